use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{logistic, ResponseMatrix};
use crate::exam::Exam;
use crate::rng::{labeled_seed, rng};

/// Simulated candidates answering by the 2PL model.
///
/// Abilities are standard normal. True item parameters are drawn from the
/// prior `a ~ U[0.5, 2.5)`, `b ~ U[-2, 2)` keyed by item id, so a resampled
/// item (new id) gets a fresh draw while surviving items keep theirs.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedPopulation {
    seed: u64,
    candidates: Vec<String>,
    theta: Vec<f64>,
}

impl SimulatedPopulation {
    pub fn new(size: usize, seed: u64) -> Self {
        let mut r = rng(labeled_seed(seed, "abilities"));
        SimulatedPopulation {
            seed,
            candidates: (0..size).map(|j| format!("sim-{j:04}")).collect(),
            theta: (0..size).map(|_| r.sample(StandardNormal)).collect(),
        }
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// True `(a, b)` of an item.
    pub fn item_parameters(&self, item_id: &str) -> (f64, f64) {
        let mut r = rng(labeled_seed(labeled_seed(self.seed, "item"), item_id));
        (r.random_range(0.5..2.5), r.random_range(-2.0..2.0))
    }

    /// Responses to the given items; each item's column of draws depends
    /// only on the population seed and the item id.
    pub fn respond_items(&self, item_ids: &[String]) -> ResponseMatrix {
        let r = item_ids
            .iter()
            .map(|id| {
                let (a, b) = self.item_parameters(id);
                let mut u = rng(labeled_seed(labeled_seed(self.seed, "responses"), id));
                self.theta.iter().map(|t| (u.random::<f64>() < logistic(a * (t - b))) as u8).collect()
            })
            .collect();
        ResponseMatrix::new(self.candidates.clone(), item_ids.to_vec(), r).expect("exam item ids are unique")
    }

    pub fn respond(&self, exam: &Exam) -> ResponseMatrix {
        self.respond_items(&exam.item_ids())
    }

    /// Mean true discrimination over the exam's items.
    pub fn mean_true_a(&self, exam: &Exam) -> f64 {
        let a: Vec<f64> = exam.items.iter().map(|i| self.item_parameters(&i.item_id).0).collect();
        crate::stats::mean(&a)
    }
}
