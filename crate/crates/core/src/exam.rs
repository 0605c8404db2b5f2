//! Exam assembly, the key-blind split and response grading.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::irt::ResponseMatrix;
use crate::rng::{child_seed, labeled_seed};
use crate::synth::{Annotation, Provenance, TimeSeries};
use crate::template::{
    instantiate, Category, Concept, ExamItem, TemplateError, TemplateRegistry, EXAMPLE_LENGTH, QUESTION_LENGTH,
};

/// Default per-category item counts.
pub const DEFAULT_COUNTS: [(Category, usize); 5] = [
    (Category::PatternRecognition, 371),
    (Category::NoiseUnderstanding, 87),
    (Category::AnomalyDetection, 129),
    (Category::ComparativeAnalysis, 113),
    (Category::CausalityAnalysis, 63),
];
pub const DEFAULT_MASTER_SEED: u64 = 42;
pub const MIN_LENGTH: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistributionSpec {
    pub counts: BTreeMap<Category, usize>,
    pub question_length: usize,
    pub example_length: usize,
    pub master_seed: u64,
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec {
            counts: DEFAULT_COUNTS.into_iter().collect(),
            question_length: QUESTION_LENGTH,
            example_length: EXAMPLE_LENGTH,
            master_seed: DEFAULT_MASTER_SEED,
        }
    }
}

impl DistributionSpec {
    /// Only `category` with `count` items.
    pub fn single(category: Category, count: usize) -> Self {
        DistributionSpec { counts: [(category, count)].into_iter().collect(), ..Self::default() }
    }

    pub fn count(&self, category: Category) -> usize {
        self.counts.get(&category).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn validate(&self) -> Result<(), ExamError> {
        if self.question_length < MIN_LENGTH || self.example_length < MIN_LENGTH {
            return Err(ExamError::Spec(format!(
                "series lengths must be at least {MIN_LENGTH} (question {}, example {})",
                self.question_length, self.example_length
            )));
        }
        if self.total() == 0 {
            return Err(ExamError::Spec(String::from("category counts sum to zero")));
        }
        Ok(())
    }
}

/// Which dropped item, if any, an exam position replaced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageRecord {
    /// Id of the item originally assembled at this position.
    pub slot: String,
    pub replaced: Option<String>,
    /// Exam round in which the current item entered.
    pub round: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exam {
    pub items: Vec<ExamItem>,
    pub distribution: DistributionSpec,
    pub round: u32,
    /// One record per item, same order.
    pub lineage: Vec<LineageRecord>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExamError {
    #[error("distribution: {0}")]
    Spec(String),
    #[error("no templates for category {0} but {1} items requested")]
    EmptyCategory(Category, usize),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("exam invariant violated: {0}")]
    Invariant(String),
    #[error("unknown item id '{0}'")]
    UnknownItem(String),
    #[error("duplicate response from '{candidate}' to '{item}'")]
    DuplicateResponse { candidate: String, item: String },
    #[error("candidate '{candidate}' has no response to '{item}'")]
    MissingResponse { candidate: String, item: String },
    #[error("no responses")]
    NoResponses,
    #[error("exam and keys do not match: {0}")]
    Join(String),
}

impl Exam {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: &str) -> Option<&ExamItem> {
        self.items.iter().find(|i| i.item_id == id)
    }

    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.item_id.clone()).collect()
    }

    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        let mut out = BTreeMap::new();
        for item in &self.items {
            *out.entry(item.category).or_insert(0) += 1;
        }
        out
    }

    /// Checks id uniqueness, category counts, lengths and lineage shape.
    pub fn validate(&self) -> Result<(), ExamError> {
        let mut seen = BTreeSet::new();
        for item in &self.items {
            if !seen.insert(item.item_id.as_str()) {
                return Err(ExamError::Invariant(format!("duplicate item id '{}'", item.item_id)));
            }
            let lengths_ok = item.series.iter().all(|s| s.len() == self.distribution.question_length)
                && item.example_series.iter().all(|s| s.len() == self.distribution.example_length);
            if !lengths_ok {
                return Err(ExamError::Invariant(format!("item '{}' has off-spec series lengths", item.item_id)));
            }
        }
        let counts = self.category_counts();
        for c in Category::ALL {
            let got = counts.get(&c).copied().unwrap_or(0);
            if got != self.distribution.count(c) {
                return Err(ExamError::Invariant(format!(
                    "{c}: {got} items, distribution asks for {}",
                    self.distribution.count(c)
                )));
            }
        }
        if self.lineage.len() != self.items.len() {
            return Err(ExamError::Invariant(format!(
                "{} lineage records for {} items",
                self.lineage.len(),
                self.items.len()
            )));
        }
        Ok(())
    }
}

/// Seed of the `index`-th item of `category`.
pub fn item_seed(master_seed: u64, category: Category, index: usize) -> u64 {
    child_seed(labeled_seed(master_seed, category.code()), index as u64)
}

/// Builds an exam matching `spec` exactly.
///
/// Per category, item `k` uses the `k mod T`-th template in id order and
/// the next answerable option of that template in rotation, so correct
/// options are balanced per template. Item ids are `<CODE>-<k:04>`.
pub fn assemble_exam(registry: &TemplateRegistry, spec: &DistributionSpec) -> Result<Exam, ExamError> {
    spec.validate()?;
    let lengths = (spec.question_length, spec.example_length);
    let mut items = Vec::with_capacity(spec.total());
    for category in Category::ALL {
        let n = spec.count(category);
        if n == 0 {
            continue;
        }
        let templates = registry.in_category(category);
        if templates.is_empty() {
            return Err(ExamError::EmptyCategory(category, n));
        }
        let mut visits = vec![0usize; templates.len()];
        for k in 0..n {
            let t = k % templates.len();
            let answerable = templates[t].answerable_options();
            let option = answerable[visits[t] % answerable.len()];
            visits[t] += 1;
            let mut item = instantiate(templates[t], option, item_seed(spec.master_seed, category, k), lengths)?;
            item.item_id = format!("{}-{k:04}", category.code());
            items.push(item);
        }
    }
    let lineage = items
        .iter()
        .map(|i| LineageRecord { slot: i.item_id.clone(), replaced: None, round: 0 })
        .collect();
    Ok(Exam { items, distribution: spec.clone(), round: 0, lineage })
}

/// Everything a test taker may see about an item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicItem {
    pub item_id: String,
    pub template_id: String,
    pub category: Category,
    pub subcategory: String,
    pub question_text: String,
    pub options: Vec<String>,
    pub hint: Option<String>,
    pub relevant_concepts: Vec<Concept>,
    pub series: Vec<Vec<f64>>,
    pub example_series: Vec<Vec<f64>>,
    pub example_question_text: String,
    pub example_options: Vec<String>,
    pub example_answer_option: usize,
    pub example_answer: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
}

/// The answer and generation record of one item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemKey {
    pub item_id: String,
    pub correct_index: usize,
    pub permutation: Vec<usize>,
    pub generating_option: usize,
    pub seed: u64,
    pub series: Vec<SeriesMeta>,
    pub example_series: Vec<SeriesMeta>,
}

/// Key-blind view of an exam. The master seed stays in the key file since
/// it regenerates every answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExamSheet {
    pub round: u32,
    pub counts: BTreeMap<Category, usize>,
    pub question_length: usize,
    pub example_length: usize,
    pub lineage: Vec<LineageRecord>,
    pub items: Vec<PublicItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub round: u32,
    pub master_seed: u64,
    pub keys: Vec<ItemKey>,
}

fn split_series(series: &[TimeSeries]) -> (Vec<Vec<f64>>, Vec<SeriesMeta>) {
    series
        .iter()
        .cloned()
        .map(|s| {
            let (values, provenance, annotations) = s.into_parts();
            (values, SeriesMeta { provenance, annotations })
        })
        .unzip()
}

fn join_series(item: &str, values: Vec<Vec<f64>>, meta: Vec<SeriesMeta>) -> Result<Vec<TimeSeries>, ExamError> {
    if values.len() != meta.len() {
        return Err(ExamError::Join(format!("item '{item}': {} series but {} key records", values.len(), meta.len())));
    }
    values
        .into_iter()
        .zip(meta)
        .map(|(v, m)| {
            TimeSeries::with_annotations(v, m.provenance, m.annotations)
                .map_err(|e| ExamError::Join(format!("item '{item}': {e}")))
        })
        .collect()
}

impl Exam {
    pub fn split(&self) -> (ExamSheet, AnswerKey) {
        let mut items = Vec::with_capacity(self.items.len());
        let mut keys = Vec::with_capacity(self.items.len());
        for it in &self.items {
            let (series, series_meta) = split_series(&it.series);
            let (example_series, example_meta) = split_series(&it.example_series);
            items.push(PublicItem {
                item_id: it.item_id.clone(),
                template_id: it.template_id.clone(),
                category: it.category,
                subcategory: it.subcategory.clone(),
                question_text: it.question_text.clone(),
                options: it.options.clone(),
                hint: it.hint.clone(),
                relevant_concepts: it.relevant_concepts.clone(),
                series,
                example_series,
                example_question_text: it.example_question_text.clone(),
                example_options: it.example_options.clone(),
                example_answer_option: it.example_answer_option,
                example_answer: it.example_answer.clone(),
            });
            keys.push(ItemKey {
                item_id: it.item_id.clone(),
                correct_index: it.correct_index,
                permutation: it.permutation.clone(),
                generating_option: it.generating_option,
                seed: it.seed,
                series: series_meta,
                example_series: example_meta,
            });
        }
        let d = &self.distribution;
        (
            ExamSheet {
                round: self.round,
                counts: d.counts.clone(),
                question_length: d.question_length,
                example_length: d.example_length,
                lineage: self.lineage.clone(),
                items,
            },
            AnswerKey { round: self.round, master_seed: d.master_seed, keys },
        )
    }

    /// Inverse of [`Exam::split`]; keys are matched to items by position and id.
    pub fn join(sheet: ExamSheet, key: AnswerKey) -> Result<Exam, ExamError> {
        if sheet.round != key.round {
            return Err(ExamError::Join(format!("exam round {} vs key round {}", sheet.round, key.round)));
        }
        if sheet.items.len() != key.keys.len() {
            return Err(ExamError::Join(format!("{} items vs {} keys", sheet.items.len(), key.keys.len())));
        }
        let mut items = Vec::with_capacity(sheet.items.len());
        for (p, k) in sheet.items.into_iter().zip(key.keys) {
            if p.item_id != k.item_id {
                return Err(ExamError::Join(format!("item '{}' paired with key '{}'", p.item_id, k.item_id)));
            }
            let perm_ok = {
                let mut sorted = k.permutation.clone();
                sorted.sort_unstable();
                sorted == (0..p.options.len()).collect::<Vec<_>>()
                    && k.correct_index < p.options.len()
                    && k.permutation[k.correct_index] == k.generating_option
            };
            if !perm_ok {
                return Err(ExamError::Join(format!("item '{}': inconsistent key", p.item_id)));
            }
            items.push(ExamItem {
                series: join_series(&p.item_id, p.series, k.series)?,
                example_series: join_series(&p.item_id, p.example_series, k.example_series)?,
                item_id: p.item_id,
                template_id: p.template_id,
                category: p.category,
                subcategory: p.subcategory,
                question_text: p.question_text,
                options: p.options,
                hint: p.hint,
                relevant_concepts: p.relevant_concepts,
                example_question_text: p.example_question_text,
                example_options: p.example_options,
                example_answer_option: p.example_answer_option,
                example_answer: p.example_answer,
                correct_index: k.correct_index,
                permutation: k.permutation,
                generating_option: k.generating_option,
                seed: k.seed,
            });
        }
        let exam = Exam {
            items,
            distribution: DistributionSpec {
                counts: sheet.counts,
                question_length: sheet.question_length,
                example_length: sheet.example_length,
                master_seed: key.master_seed,
            },
            round: sheet.round,
            lineage: sheet.lineage,
        };
        exam.validate()?;
        Ok(exam)
    }
}

/// One candidate's answer to one item. `choice` is a display position;
/// `None` means no usable answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub candidate: String,
    pub item_id: String,
    pub choice: Option<usize>,
    #[serde(default)]
    pub parse_failure: bool,
}

/// Grades responses against the keyed positions. Candidates keep their
/// order of first appearance; missing, unparsed or out-of-range answers
/// score 0 and are flagged.
pub fn grade_responses(exam: &Exam, records: &[ResponseRecord]) -> Result<ResponseMatrix, ExamError> {
    if records.is_empty() {
        return Err(ExamError::NoResponses);
    }
    let index: BTreeMap<&str, usize> = exam.items.iter().enumerate().map(|(i, it)| (it.item_id.as_str(), i)).collect();
    let mut candidates: Vec<String> = Vec::new();
    let mut cand_index: BTreeMap<&str, usize> = BTreeMap::new();
    for rec in records {
        if !cand_index.contains_key(rec.candidate.as_str()) {
            cand_index.insert(&rec.candidate, candidates.len());
            candidates.push(rec.candidate.clone());
        }
    }
    let mut cells: Vec<Vec<Option<&ResponseRecord>>> = vec![vec![None; candidates.len()]; exam.len()];
    for rec in records {
        let i = *index.get(rec.item_id.as_str()).ok_or_else(|| ExamError::UnknownItem(rec.item_id.clone()))?;
        let j = cand_index[rec.candidate.as_str()];
        if cells[i][j].replace(rec).is_some() {
            return Err(ExamError::DuplicateResponse { candidate: rec.candidate.clone(), item: rec.item_id.clone() });
        }
    }
    let mut r = vec![vec![0u8; candidates.len()]; exam.len()];
    let mut flagged = Vec::new();
    for (i, row) in cells.iter().enumerate() {
        let item = &exam.items[i];
        for (j, cell) in row.iter().enumerate() {
            let rec = cell.ok_or_else(|| ExamError::MissingResponse {
                candidate: candidates[j].clone(),
                item: item.item_id.clone(),
            })?;
            match rec.choice {
                Some(c) if !rec.parse_failure && c < item.options.len() => r[i][j] = (c == item.correct_index) as u8,
                _ => flagged.push((i, j)),
            }
        }
    }
    ResponseMatrix::with_flags(candidates, exam.item_ids(), r, flagged).map_err(|e| ExamError::Invariant(format!("{e}")))
}

/// `(correct, total)` per category for one candidate column.
pub fn accuracy_by_category(exam: &Exam, row: &[u8]) -> BTreeMap<Category, (usize, usize)> {
    let mut out = BTreeMap::new();
    for (item, &v) in exam.items.iter().zip(row) {
        let e = out.entry(item.category).or_insert((0, 0));
        e.0 += v as usize;
        e.1 += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{BasePatternConfig, Recipe, SeriesRecipe};
    use crate::template::{Template, TemplateExample};

    fn template(id: &str, category: Category, sub: &str, options: usize) -> Template {
        Template {
            id: String::from(id),
            category,
            subcategory: String::from(sub),
            question_text: String::from("Which process generated the series?"),
            options: (0..options).map(|i| format!("option {i}")).collect(),
            option_recipes: (0..options)
                .map(|i| Some(Recipe::Single(SeriesRecipe::new(BasePatternConfig::constant(i as f64)))))
                .collect(),
            option_properties: Vec::new(),
            hint: None,
            relevant_concepts: Vec::new(),
            example: TemplateExample {
                recipe: Recipe::Single(SeriesRecipe::new(BasePatternConfig::white_noise(1.0))),
                correct_option: 0,
                answer: String::from("(A)"),
            },
            series_count: 1,
        }
    }

    fn registry() -> TemplateRegistry {
        TemplateRegistry::new(vec![
            template("a", Category::PatternRecognition, "Trend", 4),
            template("b", Category::PatternRecognition, "Cyclic", 3),
            template("c", Category::NoiseUnderstanding, "White Noise", 2),
        ])
        .unwrap()
    }

    fn small_spec() -> DistributionSpec {
        let mut spec = DistributionSpec::single(Category::PatternRecognition, 24);
        spec.counts.insert(Category::NoiseUnderstanding, 5);
        spec.question_length = 16;
        spec.example_length = 8;
        spec
    }

    #[test]
    fn default_spec_matches_table() {
        let d = DistributionSpec::default();
        assert_eq!(d.total(), 763);
        assert_eq!((d.question_length, d.example_length, d.master_seed), (128, 64, 42));
    }

    #[test]
    fn counts_and_balance() {
        let exam = assemble_exam(&registry(), &small_spec()).unwrap();
        exam.validate().unwrap();
        assert_eq!(exam.len(), 29);
        assert_eq!(exam.items[0].item_id, "PAT-0000");
        let mut per_option: BTreeMap<(String, usize), usize> = BTreeMap::new();
        for it in &exam.items {
            *per_option.entry((it.template_id.clone(), it.generating_option)).or_default() += 1;
            assert_eq!(it.series[0].values()[0], it.generating_option as f64);
        }
        // Template "a" is visited 12 times over 4 options.
        assert!((0..4).all(|o| per_option[&(String::from("a"), o)] == 3));
        assert!((0..3).all(|o| per_option[&(String::from("b"), o)] == 4));
    }

    #[test]
    fn single_item_exam_and_missing_category() {
        let spec = DistributionSpec::single(Category::PatternRecognition, 1);
        assert_eq!(assemble_exam(&registry(), &spec).unwrap().len(), 1);
        let spec = DistributionSpec::single(Category::CausalityAnalysis, 2);
        assert_eq!(assemble_exam(&registry(), &spec), Err(ExamError::EmptyCategory(Category::CausalityAnalysis, 2)));
        let mut bad = small_spec();
        bad.example_length = 4;
        assert!(matches!(assemble_exam(&registry(), &bad), Err(ExamError::Spec(_))));
    }

    #[test]
    fn split_join_roundtrip() {
        let exam = assemble_exam(&registry(), &small_spec()).unwrap();
        let (sheet, key) = exam.split();
        let json = serde_json::to_string(&sheet).unwrap();
        assert!(!json.contains("\"correct_index\""));
        assert!(!json.contains("\"seed\""));
        let sheet: ExamSheet = serde_json::from_str(&json).unwrap();
        let key: AnswerKey = serde_json::from_str(&serde_json::to_string(&key).unwrap()).unwrap();
        assert_eq!(Exam::join(sheet, key).unwrap(), exam);
    }

    #[test]
    fn join_detects_mismatch() {
        let exam = assemble_exam(&registry(), &small_spec()).unwrap();
        let (sheet, mut key) = exam.split();
        key.keys.swap(0, 1);
        assert!(matches!(Exam::join(sheet, key), Err(ExamError::Join(_))));
    }

    fn records(exam: &Exam, candidate: &str, pick: impl Fn(&ExamItem) -> Option<usize>) -> Vec<ResponseRecord> {
        exam.items
            .iter()
            .map(|it| ResponseRecord {
                candidate: String::from(candidate),
                item_id: it.item_id.clone(),
                choice: pick(it),
                parse_failure: pick(it).is_none(),
            })
            .collect()
    }

    #[test]
    fn grading() {
        let exam = assemble_exam(&registry(), &small_spec()).unwrap();
        let mut recs = records(&exam, "oracle", |it| Some(it.correct_index));
        recs.extend(records(&exam, "mute", |_| None));
        let m = grade_responses(&exam, &recs).unwrap();
        assert_eq!(m.candidates(), ["oracle", "mute"]);
        assert!(m.rows().iter().all(|row| row == &[1, 0]));
        assert_eq!(m.flagged().len(), exam.len());

        let mut dup = recs.clone();
        dup.push(recs[0].clone());
        assert!(matches!(grade_responses(&exam, &dup), Err(ExamError::DuplicateResponse { .. })));
        let mut unknown = recs.clone();
        unknown[0].item_id = String::from("nope");
        assert_eq!(grade_responses(&exam, &unknown), Err(ExamError::UnknownItem(String::from("nope"))));
        assert!(matches!(grade_responses(&exam, &recs[1..]), Err(ExamError::MissingResponse { .. })));
    }

    #[test]
    fn grading_is_permutation_invariant() {
        let exam = assemble_exam(&registry(), &DistributionSpec { question_length: 16, example_length: 8, ..DistributionSpec::single(Category::PatternRecognition, 1) }).unwrap();
        let mut other = exam.clone();
        let item = &mut other.items[0];
        let n = item.options.len();
        let rotated: Vec<usize> = (0..n).map(|p| item.permutation[(p + 1) % n]).collect();
        item.options = rotated.iter().map(|&o| exam.items[0].options[exam.items[0].permutation.iter().position(|&x| x == o).unwrap()].clone()).collect();
        item.permutation = rotated;
        item.correct_index = item.permutation.iter().position(|&o| o == item.generating_option).unwrap();
        assert_ne!(item.correct_index, exam.items[0].correct_index);
        for semantic in 0..n {
            let pos = |e: &Exam| e.items[0].permutation.iter().position(|&o| o == semantic);
            let a = grade_responses(&exam, &records(&exam, "m", |_| pos(&exam))).unwrap();
            let b = grade_responses(&other, &records(&other, "m", |_| pos(&other))).unwrap();
            assert_eq!(a.rows(), b.rows());
        }
    }
}
