//! Seed-driven synthesis of time series.
//!
//! A series is built from base patterns ([`BasePatternConfig`]), combined by a
//! [`CompositionSpec`], optionally transformed ([`TransformSpec`]), or expanded
//! into a pair ([`PairSpec`]). Every operation is a pure function of its inputs
//! and a 64-bit seed; see [`crate::rng`] for how child seeds are derived.
//!
//! Numeric parameters are [`Param`]s: either a fixed number or a draw from a
//! range / list. Draws are resolved once per generation, the resolved value is
//! written back into the provenance recipe, and named draws are exposed as
//! bindings (a name used twice within one recipe resolves to the same value).

mod base;
mod compose;
mod error;
mod granger;
mod pair;
mod param;
mod recipe;
mod series;
mod transform;

pub use base::{ar_is_stationary, gen_base, BasePatternConfig, BURN_IN};
pub use compose::{compose, Component, CompositionMethod, CompositionSpec};
pub use error::SynthError;
pub use granger::{verify_granger, GrangerReport, GRANGER_ALPHA};
pub use pair::{make_pair, PairKind, PairSpec, DEFAULT_NOISE_AR};
pub use param::{Bindings, Param};
pub use recipe::{Recipe, SeriesRecipe};
pub use series::{Annotation, Provenance, RecipeNode, TimeSeries};
pub use transform::{apply_transform, AnomalySpec, AnomalyType, Location, TransformKind, TransformSpec, SPIKE_SCALE_FLOOR};

/// Seeds for the two independent streams a generator consumes.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Streams {
    pub params: u64,
    pub draws: u64,
}

impl Streams {
    pub(crate) fn new(seed: u64) -> Self {
        Streams {
            params: crate::rng::labeled_seed(seed, "params"),
            draws: crate::rng::labeled_seed(seed, "draws"),
        }
    }
}
