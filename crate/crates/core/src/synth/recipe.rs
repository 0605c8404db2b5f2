use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{apply_transform, Bindings, Component, PairSpec, SynthError, TimeSeries, TransformSpec};
use crate::rng::child_seed;

/// One series: a component followed by zero or more transforms.
///
/// The component uses `child_seed(seed, 0)`; transform `k` uses
/// `child_seed(seed, k + 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecipe {
    pub base: Component,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<TransformSpec>,
}

impl SeriesRecipe {
    pub fn new(base: impl Into<Component>) -> Self {
        SeriesRecipe { base: base.into(), transforms: Vec::new() }
    }

    pub(crate) fn generate_in(&self, length: usize, seed: u64, bindings: &mut Bindings) -> Result<TimeSeries, SynthError> {
        let mut ts = self.base.generate(length, child_seed(seed, 0), bindings)?;
        for (k, t) in self.transforms.iter().enumerate() {
            ts = apply_transform(&ts, t, child_seed(seed, k as u64 + 1))?;
            bindings.extend(ts.provenance().bindings.iter().map(|(k, v)| (k.clone(), *v)));
        }
        Ok(ts)
    }

    pub fn generate(&self, length: usize, seed: u64) -> Result<TimeSeries, SynthError> {
        self.generate_in(length, seed, &mut Bindings::new())
    }
}

/// What a template option binds to: the series shown with a question.
///
/// JSON: `{"single": {...}}`, `{"pair": {...}}` or
/// `{"two": {"first": {...}, "second": {...}}}`. In `two`, both series are
/// drawn independently (seeds `child_seed(seed, 0)` and `child_seed(seed, 1)`)
/// but share named parameter draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Single(SeriesRecipe),
    Pair(PairSpec),
    Two { first: SeriesRecipe, second: SeriesRecipe },
}

impl Recipe {
    pub fn series_count(&self) -> usize {
        match self {
            Recipe::Single(_) => 1,
            Recipe::Pair(_) | Recipe::Two { .. } => 2,
        }
    }

    /// Generates the series together with every named parameter drawn.
    pub fn generate(&self, length: usize, seed: u64) -> Result<(Vec<TimeSeries>, Bindings), SynthError> {
        let mut bindings = Bindings::new();
        let series = match self {
            Recipe::Single(r) => vec![r.generate_in(length, seed, &mut bindings)?],
            Recipe::Pair(spec) => {
                let (x, y) = super::pair::generate(spec, length, seed, &mut bindings)?;
                vec![x, y]
            }
            Recipe::Two { first, second } => {
                let a = first.generate_in(length, child_seed(seed, 0), &mut bindings)?;
                let b = second.generate_in(length, child_seed(seed, 1), &mut bindings)?;
                vec![a, b]
            }
        };
        Ok((series, bindings))
    }

    /// Components whose patterns feed the series (pair bases included).
    pub fn components(&self) -> Vec<&Component> {
        match self {
            Recipe::Single(r) => vec![&r.base],
            Recipe::Pair(_) => Vec::new(),
            Recipe::Two { first, second } => vec![&first.base, &second.base],
        }
    }

    /// Every base pattern referenced by the recipe.
    pub fn patterns(&self) -> Vec<&super::BasePatternConfig> {
        let mut out = Vec::new();
        match self {
            Recipe::Pair(spec) => spec.base.collect_patterns(&mut out),
            _ => {
                for c in self.components() {
                    c.collect_patterns(&mut out);
                }
            }
        }
        out
    }
}
