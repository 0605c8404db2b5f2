use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{BasePatternConfig, Bindings, CompositionSpec, PairSpec, SynthError, TransformSpec};

/// Labeled half-open index range `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// The resolved recipe tree that produced a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeNode {
    Pattern(BasePatternConfig),
    Composition(CompositionSpec),
    Transformed { source: Box<RecipeNode>, transform: TransformSpec },
    PairMember { spec: PairSpec, member: usize },
    /// Values supplied from outside any generator.
    External,
}

impl RecipeNode {
    /// Visits every base pattern in the tree.
    pub fn patterns(&self) -> Vec<&BasePatternConfig> {
        let mut out = Vec::new();
        self.collect_patterns(&mut out);
        out
    }

    fn collect_patterns<'a>(&'a self, out: &mut Vec<&'a BasePatternConfig>) {
        match self {
            RecipeNode::Pattern(cfg) => out.push(cfg),
            RecipeNode::Composition(spec) => spec.collect_patterns(out),
            RecipeNode::Transformed { source, .. } => source.collect_patterns(out),
            RecipeNode::PairMember { spec, .. } => spec.base.collect_patterns(out),
            RecipeNode::External => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub recipe: RecipeNode,
    #[serde(default, skip_serializing_if = "Bindings::is_empty")]
    pub bindings: Bindings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(seed: u64, recipe: RecipeNode) -> Self {
        Provenance { seed, recipe, bindings: Bindings::new(), notes: Vec::new() }
    }
}

/// A finite, nonempty real-valued sequence with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries")]
pub struct TimeSeries {
    values: Vec<f64>,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    annotations: Vec<Annotation>,
}

#[derive(Deserialize)]
struct RawSeries {
    values: Vec<f64>,
    provenance: Provenance,
    #[serde(default)]
    annotations: Vec<Annotation>,
}

impl TryFrom<RawSeries> for TimeSeries {
    type Error = SynthError;

    fn try_from(raw: RawSeries) -> Result<Self, Self::Error> {
        TimeSeries::with_annotations(raw.values, raw.provenance, raw.annotations)
    }
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Result<Self, SynthError> {
        Self::with_annotations(values, provenance, Vec::new())
    }

    pub fn with_annotations(
        values: Vec<f64>,
        provenance: Provenance,
        annotations: Vec<Annotation>,
    ) -> Result<Self, SynthError> {
        if values.is_empty() {
            return Err(SynthError::Series(String::from("empty series")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SynthError::Series(format!("non-finite value at index {i}")));
        }
        for a in &annotations {
            if a.start >= a.end || a.end > values.len() {
                return Err(SynthError::Series(format!(
                    "annotation '{}' [{}, {}) outside [0, {})",
                    a.label,
                    a.start,
                    a.end,
                    values.len()
                )));
            }
        }
        Ok(TimeSeries { values, provenance, annotations })
    }

    /// Wraps externally supplied values.
    pub fn from_values(values: Vec<f64>) -> Result<Self, SynthError> {
        Self::new(values, Provenance::new(0, RecipeNode::External))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn into_parts(self) -> (Vec<f64>, Provenance, Vec<Annotation>) {
        (self.values, self.provenance, self.annotations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn invariants_are_enforced() {
        assert!(TimeSeries::from_values(vec![]).is_err());
        assert!(TimeSeries::from_values(vec![1.0, f64::NAN]).is_err());
        let p = Provenance::new(0, RecipeNode::External);
        let bad = Annotation { start: 2, end: 4, label: "x".into() };
        assert!(TimeSeries::with_annotations(vec![0.0; 3], p.clone(), vec![bad]).is_err());
        let ok = Annotation { start: 2, end: 3, label: "x".into() };
        assert!(TimeSeries::with_annotations(vec![0.0; 3], p, vec![ok]).is_ok());
    }

    #[test]
    fn deserialization_validates() {
        let json = r#"{"values":[],"provenance":{"seed":0,"recipe":"external"}}"#;
        assert!(serde_json::from_str::<TimeSeries>(json).is_err());
        let json = r#"{"values":[1.5],"provenance":{"seed":0,"recipe":"external"}}"#;
        let ts: TimeSeries = serde_json::from_str(json).unwrap();
        assert_eq!(ts.values(), &[1.5]);
    }
}
