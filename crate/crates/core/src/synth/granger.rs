use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{SynthError, TimeSeries};
use crate::special::f_survival;

/// Significance level of the `rejected` flag.
pub const GRANGER_ALPHA: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrangerReport {
    pub max_lag: usize,
    pub observations: usize,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub f_statistic: f64,
    pub p_value: f64,
    /// `p_value < GRANGER_ALPHA`
    pub rejected: bool,
}

/// Residual sum of squares of the least-squares fit of `y` on the columns of
/// `design` (row-major, `rows x cols`), via Householder QR.
fn least_squares_rss(mut design: Vec<f64>, rows: usize, cols: usize, mut y: Vec<f64>) -> Result<f64, SynthError> {
    let at = |r: usize, c: usize| r * cols + c;
    let scale = design.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v))).max(1.0);
    for k in 0..cols {
        let norm = libm::sqrt((k..rows).map(|r| design[at(r, k)] * design[at(r, k)]).sum::<f64>());
        if norm <= 1e-10 * scale * libm::sqrt(rows as f64) {
            return Err(SynthError::Degenerate(format!("design matrix is singular at column {k}")));
        }
        let alpha = if design[at(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|r| design[at(r, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in k..cols {
            let dot: f64 = (k..rows).map(|r| v[r - k] * design[at(r, c)]).sum();
            let f = 2.0 * dot / vnorm2;
            for r in k..rows {
                design[at(r, c)] -= f * v[r - k];
            }
        }
        let dot: f64 = (k..rows).map(|r| v[r - k] * y[r]).sum();
        let f = 2.0 * dot / vnorm2;
        for r in k..rows {
            y[r] -= f * v[r - k];
        }
        // R's diagonal must stay well away from zero relative to the column norm
        if libm::fabs(design[at(k, k)]) <= 1e-10 * norm {
            return Err(SynthError::Degenerate(format!("design matrix is singular at column {k}")));
        }
    }
    Ok(y[cols..].iter().map(|r| r * r).sum())
}

fn lagged_design(series: &[&[f64]], max_lag: usize) -> (Vec<f64>, usize, usize) {
    let n = series[0].len();
    let rows = n - max_lag;
    let cols = 1 + series.len() * max_lag;
    let mut design = Vec::with_capacity(rows * cols);
    for t in max_lag..n {
        design.push(1.0);
        for s in series {
            for l in 1..=max_lag {
                design.push(s[t - l]);
            }
        }
    }
    (design, rows, cols)
}

/// Tests whether `x` Granger-causes `y`.
///
/// Restricted model: `y_t ~ 1 + y_{t-1..t-L}`; unrestricted adds
/// `x_{t-1..t-L}`. Both are fit by least squares on the `n - L` rows with a
/// full lag window and compared with the nested-model F statistic
/// `((RSS_r - RSS_u) / L) / (RSS_u / (n - L - 2L - 1))`.
pub fn verify_granger(x: &TimeSeries, y: &TimeSeries, max_lag: usize) -> Result<GrangerReport, SynthError> {
    let (xv, yv) = (x.values(), y.values());
    if max_lag == 0 {
        return Err(SynthError::Range(format!("max_lag must be >= 1")));
    }
    if xv.len() != yv.len() {
        return Err(SynthError::Range(format!("series lengths differ: {} vs {}", xv.len(), yv.len())));
    }
    if yv.len() < 4 * max_lag {
        return Err(SynthError::Range(format!("length {} < 4 * max_lag ({})", yv.len(), 4 * max_lag)));
    }
    let observations = yv.len() - max_lag;
    let unrestricted_params = 1 + 2 * max_lag;
    if observations <= unrestricted_params {
        return Err(SynthError::Degenerate(format!("{observations} observations for {unrestricted_params} parameters")));
    }
    let target: Vec<f64> = yv[max_lag..].to_vec();
    let (restricted, rows, rc) = lagged_design(&[yv], max_lag);
    let rss_restricted = least_squares_rss(restricted, rows, rc, target.clone())?;
    let (unrestricted, rows, uc) = lagged_design(&[yv, xv], max_lag);
    let rss_unrestricted = least_squares_rss(unrestricted, rows, uc, target)?;

    let df_num = max_lag;
    let df_den = observations - unrestricted_params;
    let gain = (rss_restricted - rss_unrestricted).max(0.0);
    let f_statistic = if rss_unrestricted > 0.0 {
        (gain / df_num as f64) / (rss_unrestricted / df_den as f64)
    } else if gain > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let p_value = f_survival(f_statistic, df_num as f64, df_den as f64);
    Ok(GrangerReport {
        max_lag,
        observations,
        rss_restricted,
        rss_unrestricted,
        df_num,
        df_den,
        f_statistic,
        p_value,
        rejected: p_value < GRANGER_ALPHA,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_base, BasePatternConfig};
    use alloc::vec;

    #[test]
    fn exact_shift_is_detected() {
        let x = gen_base(&BasePatternConfig::white_noise(1.0), 100, 1).unwrap();
        let mut shifted = vec![0.0];
        shifted.extend_from_slice(&x.values()[..99]);
        let y = TimeSeries::from_values(shifted).unwrap();
        let r = verify_granger(&x, &y, 1).unwrap();
        assert!(r.rss_restricted > r.rss_unrestricted);
        assert!(r.f_statistic > 1e6);
        assert!(r.rejected);
    }

    #[test]
    fn qr_matches_normal_equations_on_small_problem() {
        // y = 1 + 2 a exactly, plus one perturbed point; compare to closed form
        let a = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 8.0];
        let design: Vec<f64> = a.iter().flat_map(|&v| [1.0, v]).collect();
        let rss = least_squares_rss(design, 4, 2, y.to_vec()).unwrap();
        // simple linear regression oracle
        let ma = 1.5;
        let my = 4.25;
        let sxy: f64 = a.iter().zip(&y).map(|(p, q)| (p - ma) * (q - my)).sum();
        let sxx: f64 = a.iter().map(|p| (p - ma) * (p - ma)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * ma;
        let oracle: f64 = a.iter().zip(&y).map(|(p, q)| (q - icpt - slope * p).powi(2)).sum();
        assert!((rss - oracle).abs() < 1e-12, "{rss} vs {oracle}");
    }

    #[test]
    fn collinear_design_is_degenerate() {
        let x = gen_base(&BasePatternConfig::white_noise(1.0), 40, 2).unwrap();
        let r = verify_granger(&x, &x, 2);
        assert!(matches!(r, Err(SynthError::Degenerate(_))));
    }

    #[test]
    fn preconditions() {
        let x = gen_base(&BasePatternConfig::white_noise(1.0), 10, 2).unwrap();
        let y = gen_base(&BasePatternConfig::white_noise(1.0), 11, 3).unwrap();
        assert!(verify_granger(&x, &y, 1).is_err());
        assert!(verify_granger(&x, &x, 3).is_err());
        assert!(verify_granger(&x, &x, 0).is_err());
    }
}
