use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::score::below_quantile;
use super::{fit_2pl, score_items, select_drop_set, FitConfig, IrtError, ResponseMatrix};
use crate::exam::{accuracy_by_category, Exam, LineageRecord};
use crate::rng::{child_seed, labeled_seed};
use crate::template::{instantiate, Category, TemplateError, TemplateRegistry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplePolicy {
    /// Re-instantiate the dropped item's template with the next option.
    SameTemplate,
    /// Pick a seed-determined template of the same category.
    SameCategory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub num_iterations: u32,
    pub drop_percentage: f64,
    pub resample: ResamplePolicy,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { num_iterations: 3, drop_percentage: 0.2, resample: ResamplePolicy::SameTemplate }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), IrtError> {
        if self.drop_percentage > 0.0 && self.drop_percentage < 1.0 {
            Ok(())
        } else {
            Err(IrtError::Config(format!("drop_percentage {} outside (0, 1)", self.drop_percentage)))
        }
    }
}

/// Failure reported by a response callback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallbackError(pub String);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefineError {
    #[error(transparent)]
    Config(IrtError),
    #[error("round {round}: responses unavailable: {message}")]
    Callback { round: u32, message: String },
    #[error("round {round}: response matrix does not match the exam: {detail}")]
    Dimension { round: u32, detail: String },
    #[error("round {round}: fit failed: {source}")]
    Fit { round: u32, source: IrtError },
    #[error("round {round}: template '{template}' is not in the registry")]
    MissingTemplate { round: u32, template: String },
    #[error("round {round}: {source}")]
    Template { round: u32, source: TemplateError },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    pub items: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub scores: Vec<f64>,
    pub candidates: Vec<String>,
    pub theta: Vec<f64>,
    pub accuracy: Vec<f64>,
    /// Per candidate, accuracy within each category.
    pub category_accuracy: Vec<BTreeMap<Category, f64>>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub best_candidate: Option<String>,
    pub threshold: Option<f64>,
    /// Size of the score set the threshold came from.
    pub reference_size: Option<usize>,
    pub global_fallback: bool,
    pub dropped: Vec<String>,
    pub replacements: Vec<LineageRecord>,
    pub dropped_by_category: BTreeMap<Category, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub fit_config: FitConfig,
    pub refine_config: RefineConfig,
    pub rounds: Vec<RoundReport>,
}

impl RefineReport {
    pub fn mean_a(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.mean_a).collect()
    }
}

/// [`refine_observed`] without an observer.
pub fn refine(
    exam: &Exam,
    respond: impl FnMut(&Exam) -> Result<ResponseMatrix, CallbackError>,
    registry: &TemplateRegistry,
    fit_config: &FitConfig,
    config: &RefineConfig,
) -> Result<(Exam, RefineReport), RefineError> {
    refine_observed(exam, respond, registry, fit_config, config, |_, _| {})
}

/// Runs `num_iterations` rounds of respond → fit → score → drop → resample,
/// then responds and fits once more, so the report covers rounds
/// `0..=num_iterations`. `observe` sees each round's exam with its report.
///
/// The drop threshold is the `drop_percentage` quantile of the scores of
/// items the best candidate answered correctly; when that set is empty the
/// quantile of all scores is used and the round is marked `global_fallback`.
pub fn refine_observed(
    exam: &Exam,
    mut respond: impl FnMut(&Exam) -> Result<ResponseMatrix, CallbackError>,
    registry: &TemplateRegistry,
    fit_config: &FitConfig,
    config: &RefineConfig,
    mut observe: impl FnMut(&Exam, &RoundReport),
) -> Result<(Exam, RefineReport), RefineError> {
    config.validate().map_err(RefineError::Config)?;
    let mut exam = exam.clone();
    let mut rounds = Vec::new();
    for step in 0..=config.num_iterations {
        let round = exam.round;
        let m = respond(&exam).map_err(|e| RefineError::Callback { round, message: e.0 })?;
        if m.items() != exam.item_ids().as_slice() {
            return Err(RefineError::Dimension {
                round,
                detail: format!("{} rows for {} items or ids out of order", m.n_items(), exam.len()),
            });
        }
        let fit = fit_2pl(&m, fit_config).map_err(|source| RefineError::Fit { round, source })?;
        let scores = score_items(&fit).map_err(|source| RefineError::Fit { round, source })?.scores;
        let mut report = RoundReport {
            round,
            items: fit.items.clone(),
            a: fit.a.clone(),
            b: fit.b.clone(),
            scores: scores.clone(),
            candidates: fit.candidates.clone(),
            theta: fit.theta.clone(),
            accuracy: (0..m.n_candidates()).map(|j| m.accuracy(j)).collect(),
            category_accuracy: (0..m.n_candidates())
                .map(|j| {
                    accuracy_by_category(&exam, &m.candidate_row(j))
                        .into_iter()
                        .map(|(c, (hit, n))| (c, hit as f64 / n as f64))
                        .collect()
                })
                .collect(),
            mean_a: fit.mean_a(),
            mean_b: fit.mean_b(),
            log_likelihood: fit.log_likelihood,
            converged: fit.converged,
            best_candidate: None,
            threshold: None,
            reference_size: None,
            global_fallback: false,
            dropped: Vec::new(),
            replacements: Vec::new(),
            dropped_by_category: BTreeMap::new(),
        };
        if step == config.num_iterations {
            observe(&exam, &report);
            rounds.push(report);
            break;
        }

        let selection = match select_drop_set(&fit, &m, config) {
            Ok(s) => s,
            Err(IrtError::EmptyReference(best)) => {
                let (threshold, items) = below_quantile(&scores, &scores, config.drop_percentage);
                super::DropSelection {
                    best_candidate: best,
                    reference_size: scores.len(),
                    threshold,
                    items,
                    global_fallback: true,
                }
            }
            Err(source) => return Err(RefineError::Fit { round, source }),
        };
        report.best_candidate = Some(selection.best_candidate.clone());
        report.threshold = Some(selection.threshold);
        report.reference_size = Some(selection.reference_size);
        report.global_fallback = selection.global_fallback;

        let next_round = round + 1;
        let mut next = exam.clone();
        next.round = next_round;
        for &i in &selection.items {
            let old = &exam.items[i];
            let seed = child_seed(labeled_seed(old.seed, "resample"), next_round as u64);
            let template = match config.resample {
                ResamplePolicy::SameTemplate => registry.get(&old.template_id),
                ResamplePolicy::SameCategory => {
                    let pool = registry.in_category(old.category);
                    (!pool.is_empty()).then(|| pool[(seed % pool.len() as u64) as usize])
                }
            }
            .ok_or_else(|| RefineError::MissingTemplate { round, template: old.template_id.clone() })?;
            let answerable = template.answerable_options();
            let option = if template.id == old.template_id {
                let at = answerable.iter().position(|&o| o == old.generating_option).unwrap_or(0);
                answerable[(at + 1) % answerable.len()]
            } else {
                answerable[(seed % answerable.len() as u64) as usize]
            };
            let lengths = (exam.distribution.question_length, exam.distribution.example_length);
            let mut item = instantiate(template, option, seed, lengths).map_err(|source| RefineError::Template { round, source })?;
            let slot = exam.lineage[i].slot.clone();
            item.item_id = format!("{slot}-r{next_round}");
            let record = LineageRecord { slot, replaced: Some(old.item_id.clone()), round: next_round };
            report.dropped.push(old.item_id.clone());
            *report.dropped_by_category.entry(old.category).or_insert(0) += 1;
            report.replacements.push(record.clone());
            next.items[i] = item;
            next.lineage[i] = record;
        }
        observe(&exam, &report);
        rounds.push(report);
        exam = next;
    }
    Ok((exam, RefineReport { fit_config: fit_config.clone(), refine_config: config.clone(), rounds }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exam::{assemble_exam, DistributionSpec};
    use crate::irt::SimulatedPopulation;
    use crate::synth::{BasePatternConfig, Recipe, SeriesRecipe};
    use crate::template::{Category, Template, TemplateExample};
    use alloc::vec;

    fn registry() -> TemplateRegistry {
        let t = |id: &str, category: Category, sub: &str| Template {
            id: String::from(id),
            category,
            subcategory: String::from(sub),
            question_text: String::from("Is this noise?"),
            options: vec![String::from("Yes"), String::from("No"), String::from("Maybe")],
            option_recipes: vec![
                Some(Recipe::Single(SeriesRecipe::new(BasePatternConfig::white_noise(1.0)))),
                Some(Recipe::Single(SeriesRecipe::new(BasePatternConfig::constant(1.0)))),
                None,
            ],
            option_properties: Vec::new(),
            hint: None,
            relevant_concepts: Vec::new(),
            example: TemplateExample {
                recipe: Recipe::Single(SeriesRecipe::new(BasePatternConfig::white_noise(1.0))),
                correct_option: 0,
                answer: String::from("(A)"),
            },
            series_count: 1,
        };
        TemplateRegistry::new(vec![
            t("n1", Category::NoiseUnderstanding, "White Noise"),
            t("n2", Category::NoiseUnderstanding, "Random Walk"),
            t("p1", Category::PatternRecognition, "Trend"),
        ])
        .unwrap()
    }

    fn exam() -> Exam {
        let mut spec = DistributionSpec::single(Category::NoiseUnderstanding, 30);
        spec.counts.insert(Category::PatternRecognition, 20);
        spec.question_length = 16;
        spec.example_length = 8;
        assemble_exam(&registry(), &spec).unwrap()
    }

    fn fast() -> FitConfig {
        FitConfig { epochs: 200, ..FitConfig::default() }
    }

    #[test]
    fn rounds_preserve_counts_and_lineage() {
        let pop = SimulatedPopulation::new(60, 1);
        let start = exam();
        let mut seen = Vec::new();
        let (out, report) = refine_observed(
            &start,
            |e| Ok(pop.respond(e)),
            &registry(),
            &fast(),
            &RefineConfig::default(),
            |e, r| seen.push((e.round, r.round)),
        )
        .unwrap();
        assert_eq!(seen, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(report.rounds.len(), 4);
        assert_eq!(out.round, 3);
        out.validate().unwrap();
        assert_eq!(out.category_counts(), start.category_counts());
        for r in &report.rounds[..3] {
            assert!(!r.dropped.is_empty());
            assert_eq!(r.dropped.len(), r.replacements.len());
            if r.reference_size == Some(50) {
                assert!(r.dropped.len() <= 10);
            }
        }
        for (item, lin) in out.items.iter().zip(&out.lineage) {
            if let Some(old) = &lin.replaced {
                assert!(item.item_id.starts_with(&lin.slot));
                assert_ne!(&item.item_id, old);
                let prev = start.items.iter().find(|i| i.item_id == lin.slot).unwrap();
                assert_eq!(prev.template_id, item.template_id);
            }
        }
    }

    #[test]
    fn zero_iterations_leaves_exam_unchanged() {
        let pop = SimulatedPopulation::new(30, 2);
        let cfg = RefineConfig { num_iterations: 0, ..RefineConfig::default() };
        let (out, report) = refine(&exam(), |e| Ok(pop.respond(e)), &registry(), &fast(), &cfg).unwrap();
        assert_eq!(out, exam());
        assert_eq!(report.rounds.len(), 1);
        assert!(report.rounds[0].dropped.is_empty());
    }

    #[test]
    fn callback_errors_carry_the_round() {
        let pop = SimulatedPopulation::new(30, 2);
        let mut calls = 0;
        let err = refine(
            &exam(),
            |e| {
                calls += 1;
                if calls == 2 {
                    Ok(pop.respond_items(&e.item_ids()[1..]))
                } else {
                    Ok(pop.respond(e))
                }
            },
            &registry(),
            &fast(),
            &RefineConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, RefineError::Dimension { round: 1, .. }), "{err:?}");
        let err = refine(&exam(), |_| Err(CallbackError(String::from("down"))), &registry(), &fast(), &RefineConfig::default());
        assert_eq!(err.unwrap_err(), RefineError::Callback { round: 0, message: String::from("down") });
    }

    #[test]
    fn rejects_bad_drop_percentage() {
        let cfg = RefineConfig { drop_percentage: 1.0, ..RefineConfig::default() };
        let err = refine(&exam(), |_| unreachable!(), &registry(), &fast(), &cfg).unwrap_err();
        assert!(matches!(err, RefineError::Config(_)));
    }

    #[test]
    fn same_category_policy_stays_in_category() {
        let pop = SimulatedPopulation::new(40, 5);
        let cfg = RefineConfig { resample: ResamplePolicy::SameCategory, num_iterations: 1, ..RefineConfig::default() };
        let start = exam();
        let (out, _) = refine(&start, |e| Ok(pop.respond(e)), &registry(), &fast(), &cfg).unwrap();
        assert_eq!(out.category_counts(), start.category_counts());
    }
}
