use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Bindings, Param, Provenance, RecipeNode, Streams, SynthError, TimeSeries};
use crate::rng::{self, SeedRng};

/// Warm-up steps discarded by the AR and MA generators.
pub const BURN_IN: usize = 200;

/// A base pattern and its parameters.
///
/// Time index is `t = 0, 1, ..., n - 1` except for `LogTrend`, which uses
/// `t = 1, ..., n`. Noise terms are `sigma * z` with `z` standard normal.
///
/// | kind | value at `t` |
/// |---|---|
/// | LinearTrend | `intercept + slope * t` |
/// | ExponentialTrend | `scale * exp(rate * t)` |
/// | LogTrend | `scale * ln(t)` |
/// | Constant | `level` |
/// | GaussianWhiteNoise | `sigma * z_t` |
/// | RandomWalk | `y_{t-1} + sigma * z_t`, `y_{-1} = 0` |
/// | SineWave | `amplitude * (1 + envelope * t / (n - 1)) * sin(2 pi u + phase)` |
/// | SawtoothWave | `amplitude * (2u - 1)` |
/// | SquareWave | `amplitude` if `u < 1/2` else `-amplitude` |
/// | MovingAverage | `e_t + sum_i coefficients[i] * e_{t-1-i}`, `e = sigma * z` |
/// | Autoregressive | `sum_i coefficients[i] * y_{t-1-i} + sigma * z_t` |
///
/// where `u = (t mod period) / period` is the phase fraction. AR and MA run
/// [`BURN_IN`] warm-up steps from a zero state before emitting values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum BasePatternConfig {
    LinearTrend {
        slope: Param,
        #[serde(default = "Param::zero")]
        intercept: Param,
    },
    ExponentialTrend {
        rate: Param,
        #[serde(default = "Param::one")]
        scale: Param,
    },
    LogTrend {
        #[serde(default = "Param::one")]
        scale: Param,
    },
    Constant {
        level: Param,
    },
    GaussianWhiteNoise {
        #[serde(default = "Param::one")]
        sigma: Param,
    },
    RandomWalk {
        #[serde(default = "Param::one")]
        sigma: Param,
    },
    SineWave {
        amplitude: Param,
        period: Param,
        #[serde(default = "Param::zero")]
        phase: Param,
        #[serde(default = "Param::zero")]
        envelope: Param,
    },
    SawtoothWave {
        amplitude: Param,
        period: Param,
    },
    SquareWave {
        amplitude: Param,
        period: Param,
    },
    MovingAverage {
        coefficients: Vec<Param>,
        #[serde(default = "Param::one")]
        sigma: Param,
    },
    Autoregressive {
        coefficients: Vec<Param>,
        #[serde(default = "Param::one")]
        sigma: Param,
    },
}

fn fixed(v: f64) -> Param {
    Param::Fixed(v)
}

impl BasePatternConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            BasePatternConfig::LinearTrend { .. } => "LinearTrend",
            BasePatternConfig::ExponentialTrend { .. } => "ExponentialTrend",
            BasePatternConfig::LogTrend { .. } => "LogTrend",
            BasePatternConfig::Constant { .. } => "Constant",
            BasePatternConfig::GaussianWhiteNoise { .. } => "GaussianWhiteNoise",
            BasePatternConfig::RandomWalk { .. } => "RandomWalk",
            BasePatternConfig::SineWave { .. } => "SineWave",
            BasePatternConfig::SawtoothWave { .. } => "SawtoothWave",
            BasePatternConfig::SquareWave { .. } => "SquareWave",
            BasePatternConfig::MovingAverage { .. } => "MovingAverage",
            BasePatternConfig::Autoregressive { .. } => "Autoregressive",
        }
    }

    pub fn constant(level: f64) -> Self {
        BasePatternConfig::Constant { level: fixed(level) }
    }

    pub fn white_noise(sigma: f64) -> Self {
        BasePatternConfig::GaussianWhiteNoise { sigma: fixed(sigma) }
    }

    pub fn autoregressive(coefficients: &[f64], sigma: f64) -> Self {
        BasePatternConfig::Autoregressive {
            coefficients: coefficients.iter().copied().map(fixed).collect(),
            sigma: fixed(sigma),
        }
    }

    pub fn moving_average(coefficients: &[f64], sigma: f64) -> Self {
        BasePatternConfig::MovingAverage {
            coefficients: coefficients.iter().copied().map(fixed).collect(),
            sigma: fixed(sigma),
        }
    }

    /// Stationarity of a fully fixed AR configuration. `None` for other kinds
    /// or when a coefficient is still a draw.
    pub fn ar_stationary(&self) -> Option<bool> {
        match self {
            BasePatternConfig::Autoregressive { coefficients, .. } => {
                let c: Option<Vec<f64>> = coefficients.iter().map(Param::fixed).collect();
                c.map(|c| ar_is_stationary(&c))
            }
            _ => None,
        }
    }

    /// True for kinds whose output is nonstationary by construction
    /// (trends with a nonzero slope or rate, and random walks).
    pub fn is_trending(&self) -> bool {
        match self {
            BasePatternConfig::LinearTrend { slope, .. } => slope.fixed() != Some(0.0),
            BasePatternConfig::ExponentialTrend { rate, .. } => rate.fixed() != Some(0.0),
            BasePatternConfig::LogTrend { scale } => scale.fixed() != Some(0.0),
            BasePatternConfig::RandomWalk { .. } => true,
            _ => false,
        }
    }

    fn resolve(&self, rng: &mut SeedRng, bindings: &mut Bindings) -> Result<Self, SynthError> {
        let kind = self.kind_name();
        let mut r = |p: &Param| p.resolve(rng, bindings).map(fixed).map_err(|e| SynthError::config(kind, e));
        Ok(match self {
            BasePatternConfig::LinearTrend { slope, intercept } => {
                BasePatternConfig::LinearTrend { slope: r(slope)?, intercept: r(intercept)? }
            }
            BasePatternConfig::ExponentialTrend { rate, scale } => {
                BasePatternConfig::ExponentialTrend { rate: r(rate)?, scale: r(scale)? }
            }
            BasePatternConfig::LogTrend { scale } => BasePatternConfig::LogTrend { scale: r(scale)? },
            BasePatternConfig::Constant { level } => BasePatternConfig::Constant { level: r(level)? },
            BasePatternConfig::GaussianWhiteNoise { sigma } => {
                BasePatternConfig::GaussianWhiteNoise { sigma: r(sigma)? }
            }
            BasePatternConfig::RandomWalk { sigma } => BasePatternConfig::RandomWalk { sigma: r(sigma)? },
            BasePatternConfig::SineWave { amplitude, period, phase, envelope } => BasePatternConfig::SineWave {
                amplitude: r(amplitude)?,
                period: r(period)?,
                phase: r(phase)?,
                envelope: r(envelope)?,
            },
            BasePatternConfig::SawtoothWave { amplitude, period } => {
                BasePatternConfig::SawtoothWave { amplitude: r(amplitude)?, period: r(period)? }
            }
            BasePatternConfig::SquareWave { amplitude, period } => {
                BasePatternConfig::SquareWave { amplitude: r(amplitude)?, period: r(period)? }
            }
            BasePatternConfig::MovingAverage { coefficients, sigma } => BasePatternConfig::MovingAverage {
                coefficients: coefficients.iter().map(&mut r).collect::<Result<_, _>>()?,
                sigma: r(sigma)?,
            },
            BasePatternConfig::Autoregressive { coefficients, sigma } => BasePatternConfig::Autoregressive {
                coefficients: coefficients.iter().map(&mut r).collect::<Result<_, _>>()?,
                sigma: r(sigma)?,
            },
        })
    }
}

/// Stationarity of `y_t = sum_i coefficients[i] * y_{t-1-i} + e_t`.
///
/// Runs the step-down (inverse Levinson–Durbin) recursion: the process is
/// stationary iff every reflection coefficient has magnitude below one, which
/// is equivalent to all roots of `1 - sum_i a_i z^i` lying outside the unit
/// circle. An empty coefficient list is white noise and counts as stationary.
pub fn ar_is_stationary(coefficients: &[f64]) -> bool {
    if coefficients.iter().any(|c| !c.is_finite()) {
        return false;
    }
    let mut a: Vec<f64> = coefficients.to_vec();
    while let Some(&k) = a.last() {
        if libm::fabs(k) >= 1.0 {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..m - 1).map(|i| (a[i] + k * a[m - 2 - i]) / denom).collect();
        a = next;
    }
    true
}

fn f(p: &Param) -> f64 {
    p.fixed().unwrap_or(f64::NAN)
}

fn normal(rng: &mut SeedRng) -> f64 {
    rng.sample(StandardNormal)
}

fn check_sigma(kind: &'static str, sigma: f64) -> Result<(), SynthError> {
    if sigma < 0.0 {
        return Err(SynthError::config(kind, format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(())
}

fn check_period(kind: &'static str, period: f64) -> Result<(), SynthError> {
    if !(period > 0.0) {
        return Err(SynthError::config(kind, format!("period must be > 0, got {period}")));
    }
    Ok(())
}

fn phase_fraction(t: usize, period: f64) -> f64 {
    (t as f64 % period) / period
}

fn evaluate(cfg: &BasePatternConfig, n: usize, rng: &mut SeedRng) -> Result<Vec<f64>, SynthError> {
    let kind = cfg.kind_name();
    let values = match cfg {
        BasePatternConfig::LinearTrend { slope, intercept } => {
            let (a, c) = (f(slope), f(intercept));
            (0..n).map(|t| c + a * t as f64).collect()
        }
        BasePatternConfig::ExponentialTrend { rate, scale } => {
            let (a, s) = (f(rate), f(scale));
            (0..n).map(|t| s * libm::exp(a * t as f64)).collect()
        }
        BasePatternConfig::LogTrend { scale } => {
            let s = f(scale);
            (1..=n).map(|t| s * libm::log(t as f64)).collect()
        }
        BasePatternConfig::Constant { level } => alloc::vec![f(level); n],
        BasePatternConfig::GaussianWhiteNoise { sigma } => {
            let s = f(sigma);
            check_sigma(kind, s)?;
            (0..n).map(|_| s * normal(rng)).collect()
        }
        BasePatternConfig::RandomWalk { sigma } => {
            let s = f(sigma);
            check_sigma(kind, s)?;
            let mut y = 0.0;
            (0..n)
                .map(|_| {
                    y += s * normal(rng);
                    y
                })
                .collect()
        }
        BasePatternConfig::SineWave { amplitude, period, phase, envelope } => {
            let (a, p, ph, env) = (f(amplitude), f(period), f(phase), f(envelope));
            check_period(kind, p)?;
            let span = if n > 1 { (n - 1) as f64 } else { 1.0 };
            (0..n)
                .map(|t| {
                    let amp = a * (1.0 + env * t as f64 / span);
                    amp * libm::sin(2.0 * PI * phase_fraction(t, p) + ph)
                })
                .collect()
        }
        BasePatternConfig::SawtoothWave { amplitude, period } => {
            let (a, p) = (f(amplitude), f(period));
            check_period(kind, p)?;
            (0..n).map(|t| a * (2.0 * phase_fraction(t, p) - 1.0)).collect()
        }
        BasePatternConfig::SquareWave { amplitude, period } => {
            let (a, p) = (f(amplitude), f(period));
            check_period(kind, p)?;
            (0..n).map(|t| if phase_fraction(t, p) < 0.5 { a } else { -a }).collect()
        }
        BasePatternConfig::MovingAverage { coefficients, sigma } => {
            let s = f(sigma);
            check_sigma(kind, s)?;
            if coefficients.is_empty() {
                return Err(SynthError::config(kind, "coefficient vector is empty"));
            }
            let alpha: Vec<f64> = coefficients.iter().map(f).collect();
            let q = alpha.len();
            let total = n + BURN_IN + q;
            let eps: Vec<f64> = (0..total).map(|_| s * normal(rng)).collect();
            (BURN_IN + q..total)
                .map(|t| eps[t] + alpha.iter().enumerate().map(|(i, a)| a * eps[t - 1 - i]).sum::<f64>())
                .collect()
        }
        BasePatternConfig::Autoregressive { coefficients, sigma } => {
            let s = f(sigma);
            check_sigma(kind, s)?;
            if coefficients.is_empty() {
                return Err(SynthError::config(kind, "coefficient vector is empty"));
            }
            let alpha: Vec<f64> = coefficients.iter().map(f).collect();
            let p = alpha.len();
            let mut y = alloc::vec![0.0; p + BURN_IN + n];
            for t in p..y.len() {
                let ar: f64 = alpha.iter().enumerate().map(|(i, a)| a * y[t - 1 - i]).sum();
                y[t] = ar + s * normal(rng);
            }
            y.split_off(p + BURN_IN)
        }
    };
    if values.iter().any(|v: &f64| !v.is_finite()) {
        return Err(SynthError::Numeric { kind });
    }
    Ok(values)
}

pub(crate) fn generate(
    config: &BasePatternConfig,
    length: usize,
    seed: u64,
    bindings: &mut Bindings,
) -> Result<TimeSeries, SynthError> {
    if length == 0 {
        return Err(SynthError::config(config.kind_name(), "length must be >= 1"));
    }
    let streams = Streams::new(seed);
    let resolved = config.resolve(&mut rng::rng(streams.params), bindings)?;
    let values = evaluate(&resolved, length, &mut rng::rng(streams.draws))?;
    let mut provenance = Provenance::new(seed, RecipeNode::Pattern(resolved));
    provenance.bindings = bindings.clone();
    TimeSeries::new(values, provenance)
}

/// Generates `length` values of a single base pattern.
pub fn gen_base(config: &BasePatternConfig, length: usize, seed: u64) -> Result<TimeSeries, SynthError> {
    generate(config, length, seed, &mut Bindings::new())
}
