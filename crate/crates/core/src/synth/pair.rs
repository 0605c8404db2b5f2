use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::base::BURN_IN;
use super::{Bindings, CompositionSpec, Provenance, RecipeNode, Streams, SynthError, TimeSeries};
use crate::rng::{self, child_seed};

/// AR coefficient of the response series' own dynamics in a Granger pair.
pub const DEFAULT_NOISE_AR: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    LaggedPair,
    GrangerPair,
    IndependentPair,
}

fn default_noise_scale() -> f64 {
    1.0
}

fn default_noise_ar() -> f64 {
    DEFAULT_NOISE_AR
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Two related series built from one base recipe `x`.
///
/// * `LaggedPair`: `y[t] = x[t - lag]`, with `y[t] = x[0]` for `t < lag`.
/// * `GrangerPair`: `y[t] = noise_ar * y[t-1] + coupling * x[t - lag] + noise_scale * z_t`,
///   the coupling term being absent for `t < lag`; the AR state is warmed up
///   for [`BURN_IN`] steps first.
/// * `IndependentPair`: `y` is a second, independently seeded draw of the base.
///
/// `reversed` swaps the returned order so the driven series comes first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub kind: PairKind,
    pub base: CompositionSpec,
    #[serde(default)]
    pub lag: usize,
    #[serde(default)]
    pub coupling: f64,
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    #[serde(default = "default_noise_ar")]
    pub noise_ar: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub reversed: bool,
}

impl PairSpec {
    pub fn new(kind: PairKind, base: CompositionSpec) -> Self {
        PairSpec {
            kind,
            base,
            lag: 0,
            coupling: 0.0,
            noise_scale: default_noise_scale(),
            noise_ar: DEFAULT_NOISE_AR,
            reversed: false,
        }
    }

    fn validate(&self, length: usize) -> Result<(), SynthError> {
        if self.lag >= length {
            return Err(SynthError::Range(format!("lag {} must be < length {length}", self.lag)));
        }
        if self.kind == PairKind::GrangerPair {
            if self.coupling == 0.0 || !self.coupling.is_finite() {
                return Err(SynthError::config("GrangerPair", "coupling must be finite and nonzero"));
            }
            if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
                return Err(SynthError::config("GrangerPair", "noise_scale must be finite and >= 0"));
            }
            if !(libm::fabs(self.noise_ar) < 1.0) {
                return Err(SynthError::config("GrangerPair", "noise_ar must lie in (-1, 1)"));
            }
        }
        Ok(())
    }
}

fn member(spec: &PairSpec, which: usize, seed: u64, values: Vec<f64>, bindings: &Bindings, note: Option<String>) -> Result<TimeSeries, SynthError> {
    let mut provenance = Provenance::new(seed, RecipeNode::PairMember { spec: spec.clone(), member: which });
    provenance.bindings = bindings.clone();
    provenance.notes.extend(note);
    TimeSeries::new(values, provenance)
}

pub(crate) fn generate(spec: &PairSpec, length: usize, seed: u64, bindings: &mut Bindings) -> Result<(TimeSeries, TimeSeries), SynthError> {
    spec.validate(length)?;
    let x = super::compose::generate(&spec.base, length, child_seed(seed, 0), bindings)?;
    let mut resolved = spec.clone();
    if let RecipeNode::Composition(base) = &x.provenance().recipe {
        resolved.base = base.clone();
    }
    let xv = x.values();
    let (y, note) = match spec.kind {
        PairKind::LaggedPair => {
            let y: Vec<f64> = (0..length).map(|t| if t < spec.lag { xv[0] } else { xv[t - spec.lag] }).collect();
            (y, Some(format!("first {} values repeat x[0]", spec.lag)))
        }
        PairKind::GrangerPair => {
            let mut draws = rng::rng(Streams::new(child_seed(seed, 1)).draws);
            let mut prev = 0.0;
            for _ in 0..BURN_IN {
                let z: f64 = draws.sample(StandardNormal);
                prev = spec.noise_ar * prev + spec.noise_scale * z;
            }
            let y: Vec<f64> = (0..length)
                .map(|t| {
                    let z: f64 = draws.sample(StandardNormal);
                    let drive = if t >= spec.lag { spec.coupling * xv[t - spec.lag] } else { 0.0 };
                    prev = spec.noise_ar * prev + drive + spec.noise_scale * z;
                    prev
                })
                .collect();
            if y.iter().any(|v| !v.is_finite()) {
                return Err(SynthError::Numeric { kind: "GrangerPair" });
            }
            (y, None)
        }
        PairKind::IndependentPair => {
            let other = super::compose::generate(&spec.base, length, child_seed(seed, 1), bindings)?;
            (other.values().to_vec(), None)
        }
    };
    let first = member(&resolved, 0, seed, xv.to_vec(), bindings, None)?;
    let second = member(&resolved, 1, seed, y, bindings, note)?;
    Ok(if spec.reversed { (second, first) } else { (first, second) })
}

/// Builds a pair of series of `length` points.
pub fn make_pair(spec: &PairSpec, length: usize, seed: u64) -> Result<(TimeSeries, TimeSeries), SynthError> {
    generate(spec, length, seed, &mut Bindings::new())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{BasePatternConfig, CompositionSpec};

    fn noise_base() -> CompositionSpec {
        CompositionSpec::single(BasePatternConfig::white_noise(1.0))
    }

    /// Brute-force cross-correlation of y against x displaced by d.
    fn cross_correlation(x: &[f64], y: &[f64], d: usize) -> f64 {
        let n = x.len() - d;
        let xs = &x[..n];
        let ys = &y[d..];
        crate::stats::pearson(xs, ys)
    }

    #[test]
    fn zero_lag_pair_is_identical() {
        let mut spec = PairSpec::new(PairKind::LaggedPair, noise_base());
        spec.lag = 0;
        let (x, y) = make_pair(&spec, 64, 1).unwrap();
        assert_eq!(x.values(), y.values());
    }

    #[test]
    fn lagged_pair_peaks_at_its_lag() {
        let mut spec = PairSpec::new(PairKind::LaggedPair, CompositionSpec::single(BasePatternConfig::autoregressive(&[0.3], 1.0)));
        spec.lag = 3;
        let (x, y) = make_pair(&spec, 128, 7).unwrap();
        let best = (0..20)
            .max_by(|&a, &b| cross_correlation(x.values(), y.values(), a).total_cmp(&cross_correlation(x.values(), y.values(), b)))
            .unwrap();
        assert_eq!(best, 3);
        assert!(y.values()[..3].iter().all(|v| *v == x.values()[0]));
    }

    #[test]
    fn lag_must_fit() {
        let mut spec = PairSpec::new(PairKind::LaggedPair, noise_base());
        spec.lag = 10;
        assert!(matches!(make_pair(&spec, 10, 0), Err(SynthError::Range(_))));
    }

    #[test]
    fn granger_requires_coupling() {
        let spec = PairSpec::new(PairKind::GrangerPair, noise_base());
        assert!(matches!(make_pair(&spec, 64, 0), Err(SynthError::Config { .. })));
    }

    #[test]
    fn independent_members_differ_and_reverse_swaps() {
        let spec = PairSpec::new(PairKind::IndependentPair, noise_base());
        let (x, y) = make_pair(&spec, 32, 2).unwrap();
        assert_ne!(x.values(), y.values());
        let mut rev = spec.clone();
        rev.reversed = true;
        let (a, b) = make_pair(&rev, 32, 2).unwrap();
        assert_eq!(a.values(), y.values());
        assert_eq!(b.values(), x.values());
    }
}
