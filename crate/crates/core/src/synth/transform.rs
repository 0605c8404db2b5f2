use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Annotation, Param, RecipeNode, Streams, SynthError, TimeSeries};
use crate::rng;
use crate::stats;

/// Lower bound on the scale that additive anomalies are measured in.
pub const SPIKE_SCALE_FLOOR: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformKind {
    SignFlip,
    AnomalyInjection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<AnomalySpec>,
}

impl TransformSpec {
    pub fn sign_flip() -> Self {
        TransformSpec { kind: TransformKind::SignFlip, anomaly: None }
    }

    pub fn anomaly(spec: AnomalySpec) -> Self {
        TransformSpec { kind: TransformKind::AnomalyInjection, anomaly: Some(spec) }
    }
}

/// Anomaly types. `s = max(robust_scale(y), 0.1)` where robust scale is the
/// normal-consistent MAD of the input; `m` is the magnitude, the window is
/// `[i, i + w)`.
///
/// | type | effect |
/// |---|---|
/// | Spike | `y[i] += m * s` (single point) |
/// | LevelShift | `y[t] += m * s` for `t >= i` |
/// | NoiseBurst | `y[t] += m * s * z_t` inside the window |
/// | Flip | the window is time-reversed |
/// | Scale | `y[t] *= m` inside the window |
/// | Cutoff | `y[t] = y[i]` inside the window (the signal flatlines) |
/// | TrendChange | `y[t] += (m * s / w) * (t - i + 1)` for `t >= i` |
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyType {
    Spike,
    LevelShift,
    NoiseBurst,
    Flip,
    Scale,
    Cutoff,
    TrendChange,
}

impl AnomalyType {
    pub fn name(self) -> &'static str {
        match self {
            AnomalyType::Spike => "Spike",
            AnomalyType::LevelShift => "LevelShift",
            AnomalyType::NoiseBurst => "NoiseBurst",
            AnomalyType::Flip => "Flip",
            AnomalyType::Scale => "Scale",
            AnomalyType::Cutoff => "Cutoff",
            AnomalyType::TrendChange => "TrendChange",
        }
    }
}

/// Where an anomaly starts.
///
/// JSON forms: an index, `{"start": s, "end": e}` (window given explicitly),
/// or `{"relative": [lo, hi]}`, a start drawn uniformly at a fraction of the
/// length and pulled left if needed so the window fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Location {
    Index(usize),
    Range { start: usize, end: usize },
    Relative { relative: [f64; 2] },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    #[serde(rename = "type")]
    pub kind: AnomalyType,
    pub location: Location,
    #[serde(default = "Param::one")]
    pub magnitude: Param,
    #[serde(default = "one")]
    pub width: usize,
}

fn range_error(reason: String) -> SynthError {
    SynthError::Range(reason)
}

/// Applies one transform, returning a new series.
pub fn apply_transform(ts: &TimeSeries, spec: &TransformSpec, seed: u64) -> Result<TimeSeries, SynthError> {
    let (mut values, mut provenance, mut annotations) = ts.clone().into_parts();
    let resolved = match (spec.kind, &spec.anomaly) {
        (TransformKind::SignFlip, None) => {
            values.iter_mut().for_each(|v| *v = -*v);
            spec.clone()
        }
        (TransformKind::AnomalyInjection, Some(anomaly)) => {
            let streams = Streams::new(seed);
            let mut param_rng = rng::rng(streams.params);
            let magnitude = anomaly
                .magnitude
                .resolve(&mut param_rng, &mut provenance.bindings)
                .map_err(|e| SynthError::config("AnomalyInjection", e))?;
            if anomaly.width == 0 {
                return Err(SynthError::config("AnomalyInjection", "width must be >= 1"));
            }
            let n = values.len();
            let (start, width) = match anomaly.location {
                Location::Index(i) => (i, anomaly.width),
                Location::Range { start, end } => {
                    if end <= start {
                        return Err(range_error(format!("empty anomaly range [{start}, {end})")));
                    }
                    (start, end - start)
                }
                Location::Relative { relative: [lo, hi] } => {
                    if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
                        return Err(range_error(format!("relative location [{lo}, {hi}] outside [0, 1]")));
                    }
                    let u = lo + (hi - lo) * param_rng.random::<f64>();
                    let w = anomaly.width.min(n);
                    let start = ((u * n as f64) as usize).min(n - w);
                    (start, w)
                }
            };
            let window_end = match anomaly.kind {
                AnomalyType::Spike => start + 1,
                AnomalyType::LevelShift | AnomalyType::TrendChange => n,
                _ => start + width,
            };
            if start >= n || window_end > n {
                return Err(range_error(format!(
                    "{} anomaly window [{start}, {window_end}) outside series of length {n}",
                    anomaly.kind.name()
                )));
            }
            let scale = stats::robust_scale(&values).max(SPIKE_SCALE_FLOOR);
            let offset = magnitude * scale;
            match anomaly.kind {
                AnomalyType::Spike => values[start] += offset,
                AnomalyType::LevelShift => values[start..].iter_mut().for_each(|v| *v += offset),
                AnomalyType::NoiseBurst => {
                    let mut draws = rng::rng(streams.draws);
                    for v in &mut values[start..window_end] {
                        let z: f64 = draws.sample(StandardNormal);
                        *v += offset * z;
                    }
                }
                AnomalyType::Flip => values[start..window_end].reverse(),
                AnomalyType::Scale => values[start..window_end].iter_mut().for_each(|v| *v *= magnitude),
                AnomalyType::Cutoff => {
                    let hold = values[start];
                    values[start..window_end].iter_mut().for_each(|v| *v = hold);
                }
                AnomalyType::TrendChange => {
                    let step = offset / width as f64;
                    for (k, v) in values[start..].iter_mut().enumerate() {
                        *v += step * (k + 1) as f64;
                    }
                }
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(SynthError::Numeric { kind: "AnomalyInjection" });
            }
            annotations.push(Annotation {
                start,
                end: window_end,
                label: format!("anomaly:{}", anomaly.kind.name()),
            });
            TransformSpec::anomaly(AnomalySpec {
                kind: anomaly.kind,
                location: Location::Range { start, end: window_end },
                magnitude: Param::Fixed(magnitude),
                width: window_end - start,
            })
        }
        (TransformKind::SignFlip, Some(_)) => {
            return Err(SynthError::config("SignFlip", "anomaly given for a sign flip"));
        }
        (TransformKind::AnomalyInjection, None) => {
            return Err(SynthError::config("AnomalyInjection", "missing anomaly spec"));
        }
    };
    provenance.recipe = RecipeNode::Transformed { source: Box::new(provenance.recipe), transform: resolved };
    TimeSeries::with_annotations(values, provenance, annotations)
}
