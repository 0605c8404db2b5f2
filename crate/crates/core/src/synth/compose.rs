use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::base::{self, BasePatternConfig};
use super::{Annotation, Bindings, Provenance, RecipeNode, SynthError, TimeSeries};
use crate::rng::child_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompositionMethod {
    Additive,
    Multiplicative,
    Concatenate,
}

/// A base pattern or a nested composition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Component {
    Pattern(BasePatternConfig),
    Composition(CompositionSpec),
}

impl From<BasePatternConfig> for Component {
    fn from(cfg: BasePatternConfig) -> Self {
        Component::Pattern(cfg)
    }
}

impl From<CompositionSpec> for Component {
    fn from(spec: CompositionSpec) -> Self {
        Component::Composition(spec)
    }
}

impl Component {
    pub(crate) fn generate(&self, length: usize, seed: u64, bindings: &mut Bindings) -> Result<TimeSeries, SynthError> {
        match self {
            Component::Pattern(cfg) => base::generate(cfg, length, seed, bindings),
            Component::Composition(spec) => generate(spec, length, seed, bindings),
        }
    }

    pub(crate) fn collect_patterns<'a>(&'a self, out: &mut Vec<&'a BasePatternConfig>) {
        match self {
            Component::Pattern(cfg) => out.push(cfg),
            Component::Composition(spec) => spec.collect_patterns(out),
        }
    }

    fn from_node(node: RecipeNode) -> Option<Self> {
        match node {
            RecipeNode::Pattern(cfg) => Some(Component::Pattern(cfg)),
            RecipeNode::Composition(spec) => Some(Component::Composition(spec)),
            _ => None,
        }
    }
}

/// Combination of components.
///
/// `Additive` and `Multiplicative` generate every component at the target
/// length and combine elementwise. `Concatenate` generates component `i` at
/// `lengths[i]` and joins them in order; without `lengths` the target length
/// is split evenly, the first `length % k` segments taking one extra point.
/// Component `i` is generated with seed `child_seed(seed, i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionSpec {
    pub components: Vec<Component>,
    pub method: CompositionMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<usize>>,
}

impl CompositionSpec {
    pub fn new(method: CompositionMethod, components: Vec<Component>) -> Self {
        CompositionSpec { components, method, lengths: None }
    }

    pub fn single(component: impl Into<Component>) -> Self {
        Self::new(CompositionMethod::Additive, alloc::vec![component.into()])
    }

    pub(crate) fn collect_patterns<'a>(&'a self, out: &mut Vec<&'a BasePatternConfig>) {
        for c in &self.components {
            c.collect_patterns(out);
        }
    }

    /// Every base pattern in the tree, depth first.
    pub fn patterns(&self) -> Vec<&BasePatternConfig> {
        let mut out = Vec::new();
        self.collect_patterns(&mut out);
        out
    }

    fn segment_lengths(&self, length: usize) -> Result<Vec<usize>, SynthError> {
        let k = self.components.len();
        let lengths = match &self.lengths {
            Some(lengths) => {
                if lengths.len() != k {
                    return Err(SynthError::Composition {
                        component: lengths.len().min(k),
                        reason: format!("{} lengths given for {k} components", lengths.len()),
                    });
                }
                let total: usize = lengths.iter().sum();
                if total != length {
                    return Err(SynthError::Composition {
                        component: k - 1,
                        reason: format!("segment lengths {lengths:?} sum to {total}, expected {length}"),
                    });
                }
                lengths.clone()
            }
            None => (0..k).map(|i| length / k + usize::from(i < length % k)).collect(),
        };
        if let Some(i) = lengths.iter().position(|&l| l == 0) {
            return Err(SynthError::Composition { component: i, reason: String::from("zero-length segment") });
        }
        Ok(lengths)
    }
}

pub(crate) fn generate(
    spec: &CompositionSpec,
    length: usize,
    seed: u64,
    bindings: &mut Bindings,
) -> Result<TimeSeries, SynthError> {
    if spec.components.is_empty() {
        return Err(SynthError::Composition { component: 0, reason: String::from("no components") });
    }
    if length == 0 {
        return Err(SynthError::Composition { component: 0, reason: String::from("length must be >= 1") });
    }
    let segments = match spec.method {
        CompositionMethod::Concatenate => spec.segment_lengths(length)?,
        _ => {
            if let Some(lengths) = &spec.lengths {
                if let Some(i) = lengths.iter().position(|&l| l != length) {
                    return Err(SynthError::Composition {
                        component: i,
                        reason: format!("length {} differs from target {length}", lengths[i]),
                    });
                }
            }
            alloc::vec![length; spec.components.len()]
        }
    };

    let mut values: Vec<f64> = Vec::with_capacity(length);
    let mut annotations = Vec::new();
    let mut resolved = Vec::with_capacity(spec.components.len());
    let mut offset = 0;
    for (i, (component, &len)) in spec.components.iter().zip(&segments).enumerate() {
        let child = component.generate(len, child_seed(seed, i as u64), bindings).map_err(|e| match e {
            SynthError::Composition { .. } | SynthError::Numeric { .. } => e,
            other => SynthError::Composition { component: i, reason: format!("{other}") },
        })?;
        let (child_values, child_prov, child_annotations) = child.into_parts();
        match spec.method {
            CompositionMethod::Additive if i > 0 => values.iter_mut().zip(&child_values).for_each(|(v, c)| *v += c),
            CompositionMethod::Multiplicative if i > 0 => {
                values.iter_mut().zip(&child_values).for_each(|(v, c)| *v *= c)
            }
            _ => values.extend_from_slice(&child_values),
        }
        if spec.method == CompositionMethod::Concatenate {
            annotations.push(Annotation { start: offset, end: offset + len, label: format!("segment:{i}") });
            annotations.extend(child_annotations.into_iter().map(|a| Annotation {
                start: a.start + offset,
                end: a.end + offset,
                label: a.label,
            }));
        } else {
            annotations.extend(child_annotations);
        }
        offset += len;
        resolved.push(Component::from_node(child_prov.recipe).expect("components generate patterns or compositions"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SynthError::Numeric { kind: "composition" });
    }
    let recipe = CompositionSpec { components: resolved, method: spec.method, lengths: spec.lengths.clone() };
    let mut provenance = Provenance::new(seed, RecipeNode::Composition(recipe));
    provenance.bindings = bindings.clone();
    TimeSeries::with_annotations(values, provenance, annotations)
}

/// Generates a composed series of `length` points.
pub fn compose(spec: &CompositionSpec, length: usize, seed: u64) -> Result<TimeSeries, SynthError> {
    generate(spec, length, seed, &mut Bindings::new())
}
