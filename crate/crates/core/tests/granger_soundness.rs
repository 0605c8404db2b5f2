use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use tsexam_core::rng::child_seed;
use tsexam_core::synth::{
    make_pair, verify_granger, BasePatternConfig, CompositionSpec, PairKind, PairSpec, TimeSeries,
};

/// Residual sum of squares of `y ~ X` by normal equations and Gauss–Jordan.
fn rss(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let k = x[0].len();
    let mut m = vec![vec![0.0; k + 1]; k];
    for (row, &yi) in x.iter().zip(y) {
        for a in 0..k {
            for b in 0..k {
                m[a][b] += row[a] * row[b];
            }
            m[a][k] += row[a] * yi;
        }
    }
    for c in 0..k {
        let p = (c..k).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        for v in &mut m[c] {
            *v /= d;
        }
        for r in 0..k {
            if r != c {
                let f = m[r][c];
                for j in 0..=k {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
    }
    let beta: Vec<f64> = m.iter().map(|r| r[k]).collect();
    x.iter().zip(y).map(|(row, yi)| {
        let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        (yi - fit).powi(2)
    }).sum()
}

/// p-value of "x does not Granger-cause y" with `p` lags.
fn oracle_p(x: &[f64], y: &[f64], p: usize) -> f64 {
    let n = y.len();
    let mut xr = Vec::new();
    let mut xu = Vec::new();
    let mut target = Vec::new();
    for t in p..n {
        let mut r = vec![1.0];
        r.extend((1..=p).map(|l| y[t - l]));
        let mut u = r.clone();
        u.extend((1..=p).map(|l| x[t - l]));
        xr.push(r);
        xu.push(u);
        target.push(y[t]);
    }
    let (rr, ru) = (rss(&xr, &target), rss(&xu, &target));
    let d2 = (n - p - (2 * p + 1)) as f64;
    let f = ((rr - ru) / p as f64) / (ru / d2);
    1.0 - FisherSnedecor::new(p as f64, d2).unwrap().cdf(f)
}

fn noise() -> CompositionSpec {
    CompositionSpec::single(BasePatternConfig::white_noise(1.0))
}

fn granger_fixture() -> PairSpec {
    PairSpec { lag: 2, coupling: 0.8, noise_ar: 0.3, noise_scale: 1.0, ..PairSpec::new(PairKind::GrangerPair, noise()) }
}

// Run k uses child_seed(42, k), the same derivation as exam item seeds.
fn pair(spec: &PairSpec, k: u64) -> (TimeSeries, TimeSeries) {
    make_pair(spec, 128, child_seed(42, k)).unwrap()
}

#[test]
fn granger_pairs_are_detected() {
    let spec = granger_fixture();
    let mut hits = 0;
    for seed in 0..100 {
        let (x, y) = pair(&spec, seed);
        let p = oracle_p(x.values(), y.values(), 2);
        let report = verify_granger(&x, &y, 2).unwrap();
        assert!((report.p_value - p).abs() < 1e-8, "seed {seed}: {} vs {p}", report.p_value);
        hits += (p < 0.01) as usize;
    }
    println!("granger pairs rejected at p<0.01: {hits}/100");
    assert!(hits >= 95);
}

#[test]
fn independent_pairs_hold_the_null() {
    let spec = PairSpec::new(PairKind::IndependentPair, noise());
    let mut hits = 0;
    for seed in 0..200 {
        let (x, y) = pair(&spec, seed);
        let p = oracle_p(x.values(), y.values(), 2);
        assert_eq!(verify_granger(&x, &y, 2).unwrap().rejected, p < 0.05);
        hits += (p < 0.05) as usize;
    }
    println!("independent pairs rejected at 0.05: {hits}/200");
    assert!(hits <= 12);
}

#[test]
fn null_size_is_nominal_over_many_seeds() {
    let spec = PairSpec::new(PairKind::IndependentPair, noise());
    let hits = (0..2000u64)
        .filter(|&k| {
            let (x, y) = make_pair(&spec, 128, child_seed(7, k)).unwrap();
            verify_granger(&x, &y, 2).unwrap().rejected
        })
        .count();
    // Binomial(2000, 0.05): mean 100, sd about 9.7.
    assert!((70..=130).contains(&hits), "{hits}");
}
