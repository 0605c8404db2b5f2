//! Small descriptive-statistics helpers shared by the generators, the IRT
//! scoring step and the tests.

use alloc::vec::Vec;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample autocorrelation at `lag` using the biased (1/n) autocovariance.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    if lag >= n {
        return f64::NAN;
    }
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    if denom == 0.0 {
        return f64::NAN;
    }
    let num: f64 = (lag..n).map(|t| (xs[t] - m) * (xs[t - lag] - m)).sum();
    num / denom
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() != ys.len() || xs.len() < 2 {
        return f64::NAN;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / libm::sqrt(sxx * syy)
}

/// Median; NaN on empty input.
pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Scaled median absolute deviation (consistent for the normal sigma).
pub fn robust_scale(xs: &[f64]) -> f64 {
    let m = median(xs);
    let dev: Vec<f64> = xs.iter().map(|x| libm::fabs(x - m)).collect();
    1.4826 * median(&dev)
}

/// Quantile by linear interpolation between closest ranks.
///
/// With the values sorted ascending as `v[0..n]`, the position is
/// `h = (n - 1) * p`; the result is `v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)])`.
/// `p` is clamped to `[0, 1]`. Returns `None` for empty input.
pub fn quantile(xs: &[f64], p: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let p = p.clamp(0.0, 1.0);
    let h = (v.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Min–max normalization to `[0, 1]`.
///
/// Returns the normalized values and whether the input was degenerate
/// (`max == min`), in which case every value maps to 0.5.
pub fn min_max_normalize(xs: &[f64]) -> (Vec<f64>, bool) {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return (xs.iter().map(|_| 0.5).collect(), true);
    }
    let span = hi - lo;
    (xs.iter().map(|x| ((x - lo) / span).clamp(0.0, 1.0)).collect(), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn quantile_interpolates_between_ranks() {
        let s: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        // h = 9 * 0.2 = 1.8 -> 0.2 + 0.8 * (0.3 - 0.2)
        assert!((quantile(&s, 0.2).unwrap() - 0.28).abs() < 1e-12);
        assert_eq!(quantile(&s, 0.0), Some(0.1));
        assert_eq!(quantile(&s, 1.0), Some(1.0));
        assert_eq!(quantile(&[], 0.5), None);
        assert_eq!(quantile(&[3.0], 0.7), Some(3.0));
    }

    #[test]
    fn min_max_examples() {
        let (n, degenerate) = min_max_normalize(&[1.0, 2.0, 3.0]);
        assert_eq!(n, vec![0.0, 0.5, 1.0]);
        assert!(!degenerate);
        let (n, degenerate) = min_max_normalize(&[4.0, 4.0]);
        assert_eq!(n, vec![0.5, 0.5]);
        assert!(degenerate);
    }

    #[test]
    fn median_and_scale() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(robust_scale(&[0.0; 5]), 0.0);
    }

    #[test]
    fn pearson_of_affine_copy_is_one() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((pearson(&x, &y) - 1.0).abs() < 1e-12);
    }
}
