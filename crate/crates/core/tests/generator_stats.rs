use tsexam_core::stats::{autocorrelation, mean, variance};
use tsexam_core::synth::{gen_base, BasePatternConfig};

const N: usize = 100_000;

#[test]
fn ar1_long_run_variance() {
    // sigma^2 / (1 - alpha^2) with alpha = 0.5
    let target = 1.0 / (1.0 - 0.25);
    for seed in [1, 2, 3] {
        let s = gen_base(&BasePatternConfig::autoregressive(&[0.5], 1.0), N, seed).unwrap();
        let v = variance(s.values());
        assert!((v - target).abs() / target < 0.10, "seed {seed}: {v}");
    }
}

#[test]
fn ma_autocorrelation_cuts_off() {
    for (coefs, seed) in [(vec![0.6], 11u64), (vec![0.5, -0.4], 12), (vec![0.8, 0.5, 0.3], 13)] {
        let q = coefs.len();
        let s = gen_base(&BasePatternConfig::moving_average(&coefs, 1.0), N, seed).unwrap();
        for lag in q + 1..=q + 5 {
            let r = autocorrelation(s.values(), lag);
            assert!(r.abs() <= 0.03, "q={q} lag={lag}: {r}");
        }
        // Inside the window the autocorrelation is theta_1 + sum theta_k theta_{k+1} over 1 + sum theta^2.
        let mut th = vec![1.0];
        th.extend(&coefs);
        let denom: f64 = th.iter().map(|t| t * t).sum();
        let rho1: f64 = th.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / denom;
        assert!((autocorrelation(s.values(), 1) - rho1).abs() < 0.03);
    }
}

#[test]
fn white_noise_moments() {
    for seed in [5, 6, 7] {
        let s = gen_base(&BasePatternConfig::white_noise(1.0), N, seed).unwrap();
        assert!(mean(s.values()).abs() <= 0.02);
        assert!(autocorrelation(s.values(), 1).abs() <= 0.02);
    }
}

#[test]
fn random_walk_increments_are_white() {
    let cfg: BasePatternConfig = serde_json::from_str(r#"{"kind":"RandomWalk","params":{"sigma":1.0}}"#).unwrap();
    let s = gen_base(&cfg, N, 8).unwrap();
    let inc: Vec<f64> = s.values().windows(2).map(|w| w[1] - w[0]).collect();
    assert!(mean(&inc).abs() <= 0.02);
    assert!(autocorrelation(&inc, 1).abs() <= 0.02);
    assert!((variance(&inc) - 1.0).abs() < 0.03);
}
