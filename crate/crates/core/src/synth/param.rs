use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SeedRng;

/// Named parameter values drawn while generating one recipe.
pub type Bindings = BTreeMap<String, f64>;

/// A numeric recipe parameter.
///
/// JSON forms: a bare number, `{"uniform": [lo, hi]}` or `{"choice": [v1, v2, ...]}`;
/// the latter two accept an optional `"name"` that binds the drawn value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Fixed(f64),
    Uniform {
        uniform: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Choice {
        choice: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

impl Param {
    pub fn zero() -> Self {
        Param::Fixed(0.0)
    }

    pub fn one() -> Self {
        Param::Fixed(1.0)
    }

    pub fn fixed(&self) -> Option<f64> {
        match self {
            Param::Fixed(v) => Some(*v),
            _ => None,
        }
    }

    fn name(&self) -> Option<&str> {
        match self {
            Param::Fixed(_) => None,
            Param::Uniform { name, .. } | Param::Choice { name, .. } => name.as_deref(),
        }
    }

    /// Draws a concrete value. Named draws reuse an existing binding.
    pub(crate) fn resolve(&self, rng: &mut SeedRng, bindings: &mut Bindings) -> Result<f64, String> {
        if let Some(name) = self.name() {
            if let Some(v) = bindings.get(name) {
                return Ok(*v);
            }
        }
        let value = match self {
            Param::Fixed(v) => *v,
            Param::Uniform { uniform: [lo, hi], .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(alloc::format!("bad uniform range [{lo}, {hi}]"));
                }
                lo + (hi - lo) * rng.random::<f64>()
            }
            Param::Choice { choice, .. } => {
                if choice.is_empty() {
                    return Err(String::from("empty choice list"));
                }
                choice[rng.random_range(0..choice.len())]
            }
        };
        if !value.is_finite() {
            return Err(alloc::format!("non-finite parameter {value}"));
        }
        if let Some(name) = self.name() {
            bindings.insert(String::from(name), value);
        }
        Ok(value)
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Fixed(v)
    }
}
