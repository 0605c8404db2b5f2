//! Question templates: schema, validation, instantiation and the registry.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, labeled_seed};
use crate::synth::{Bindings, Recipe, RecipeNode, SynthError, TimeSeries};

/// Default question series length.
pub const QUESTION_LENGTH: usize = 128;
/// Default one-shot exemplar series length.
pub const EXAMPLE_LENGTH: usize = 64;
/// Seed used by the generability probe in [`validate_template`].
pub const PROBE_SEED: u64 = 0x5EED_0F_7E57;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    PatternRecognition,
    NoiseUnderstanding,
    AnomalyDetection,
    ComparativeAnalysis,
    CausalityAnalysis,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::PatternRecognition,
        Category::NoiseUnderstanding,
        Category::AnomalyDetection,
        Category::ComparativeAnalysis,
        Category::CausalityAnalysis,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            Category::PatternRecognition => "Pattern Recognition",
            Category::NoiseUnderstanding => "Noise Understanding",
            Category::AnomalyDetection => "Anomaly Detection",
            Category::ComparativeAnalysis => "Comparative Analysis",
            Category::CausalityAnalysis => "Causality Analysis",
        }
    }

    /// Short code used in item ids.
    pub fn code(self) -> &'static str {
        match self {
            Category::PatternRecognition => "PAT",
            Category::NoiseUnderstanding => "NOI",
            Category::AnomalyDetection => "ANO",
            Category::ComparativeAnalysis => "CMP",
            Category::CausalityAnalysis => "CAU",
        }
    }

    pub fn subcategories(self) -> &'static [&'static str] {
        match self {
            Category::PatternRecognition => &[
                "Trend",
                "Cyclic",
                "Stationarity",
                "Regime Switching",
                "Statistical Properties",
                "Random Processes",
            ],
            Category::NoiseUnderstanding => &["White Noise", "Random Walk", "Signal/Noise Ratio"],
            Category::AnomalyDetection => &["Anomaly Types"],
            Category::ComparativeAnalysis => &["Shape", "Distributional"],
            Category::CausalityAnalysis => &["Granger Causality"],
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Every `(category, subcategory)` pair of the taxonomy.
pub fn taxonomy() -> impl Iterator<Item = (Category, &'static str)> {
    Category::ALL.into_iter().flat_map(|c| c.subcategories().iter().map(move |s| (c, *s)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub term: String,
    pub description: String,
}

/// A property an option's generated series must have, checked against the
/// resolved recipe during validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecipeProperty {
    /// No trend or random-walk component and every AR component stationary.
    Stationary,
    /// At least one trend, random-walk or nonstationary AR component.
    Nonstationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateExample {
    pub recipe: Recipe,
    pub correct_option: usize,
    pub answer: String,
}

/// A parameterized multiple-choice question.
///
/// `option_recipes[i]` generates the series shown when option `i` is the
/// correct answer; `null` marks a text-only distractor that is never keyed.
/// `{name}` placeholders in the question and option texts are replaced by
/// the named parameter draws of the generated recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub category: Category,
    pub subcategory: String,
    pub question_text: String,
    pub options: Vec<String>,
    pub option_recipes: Vec<Option<Recipe>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub option_properties: Vec<Vec<RecipeProperty>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relevant_concepts: Vec<Concept>,
    pub example: TemplateExample,
    pub series_count: usize,
}

impl Template {
    /// Indices of options that carry a generating recipe.
    pub fn answerable_options(&self) -> Vec<usize> {
        self.option_recipes.iter().enumerate().filter(|(_, r)| r.is_some()).map(|(i, _)| i).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub template_id: String,
    pub rule: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "template '{}': {}", self.template_id, self.rule)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TemplateError {
    #[error("template '{template}': option {option} out of range for {count} options")]
    OptionOutOfRange { template: String, option: usize, count: usize },
    #[error("template '{template}': option {option} has no generating recipe")]
    Unanswerable { template: String, option: usize },
    #[error("template '{template}', {}: {source}", match option { Some(o) => format!("option {o}"), None => String::from("example") })]
    Generation { template: String, option: Option<usize>, source: SynthError },
    #[error("{}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

fn placeholders(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    out.push(String::from(name));
                }
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

fn format_value(v: f64) -> String {
    if libm::fabs(v - libm::round(v)) < 1e-9 {
        format!("{}", libm::round(v) as i64)
    } else {
        let s = format!("{v:.2}");
        let s = s.trim_end_matches('0');
        String::from(s.trim_end_matches('.'))
    }
}

/// Replaces `{name}` with the bound value; unknown names are left as is.
pub fn fill_placeholders(text: &str, bindings: &Bindings) -> String {
    let mut out = String::from(text);
    for (name, value) in bindings {
        out = out.replace(&format!("{{{name}}}"), &format_value(*value));
    }
    out
}

fn check_property(property: RecipeProperty, series: &[TimeSeries]) -> Result<(), String> {
    let nodes: Vec<&RecipeNode> = series.iter().map(|s| &s.provenance().recipe).collect();
    let patterns: Vec<_> = nodes.iter().flat_map(|n| n.patterns()).collect();
    let trending = patterns.iter().filter(|p| p.is_trending()).count();
    let bad_ar = patterns.iter().filter(|p| p.ar_stationary() == Some(false)).count();
    match property {
        RecipeProperty::Stationary if trending > 0 => Err(format!("{trending} trend/random-walk component(s)")),
        RecipeProperty::Stationary if bad_ar > 0 => Err(format!("{bad_ar} AR component(s) with a root on or inside the unit circle")),
        RecipeProperty::Nonstationary if trending == 0 && bad_ar == 0 => Err(String::from("no nonstationary component")),
        _ => Ok(()),
    }
}

/// Checks every template invariant and probes each recipe once at the
/// default lengths. Returns all violations found (empty when valid).
pub fn validate_template(template: &Template) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut violation = |rule: &str, detail: String| {
        out.push(Violation { template_id: template.id.clone(), rule: String::from(rule), detail });
    };
    if template.id.trim().is_empty() {
        violation("empty id", String::new());
    }
    if template.question_text.trim().is_empty() {
        violation("empty question text", String::new());
    }
    if !template.category.subcategories().contains(&template.subcategory.as_str()) {
        violation(
            "unknown subcategory",
            format!("'{}' is not a {} subcategory", template.subcategory, template.category.display_name()),
        );
    }
    if template.options.len() < 2 {
        violation("fewer than 2 options", format!("{} given", template.options.len()));
    }
    if template.option_recipes.len() != template.options.len() {
        violation(
            "recipe count mismatch",
            format!("{} recipes for {} options", template.option_recipes.len(), template.options.len()),
        );
    }
    if template.answerable_options().is_empty() {
        violation("no answerable option", String::new());
    }
    if !(1..=2).contains(&template.series_count) {
        violation("series_count must be 1 or 2", format!("{}", template.series_count));
    }
    if !template.option_properties.is_empty() && template.option_properties.len() != template.options.len() {
        violation(
            "property count mismatch",
            format!("{} property lists for {} options", template.option_properties.len(), template.options.len()),
        );
    }
    for (i, recipe) in template.option_recipes.iter().enumerate() {
        let Some(recipe) = recipe else { continue };
        if recipe.series_count() != template.series_count {
            violation(
                "series count mismatch",
                format!("option {i} recipe yields {} series, template declares {}", recipe.series_count(), template.series_count),
            );
            continue;
        }
        match recipe.generate(QUESTION_LENGTH, PROBE_SEED) {
            Err(e) => violation("generation failed", format!("option {i}: {e}")),
            Ok((series, bindings)) => {
                for name in placeholders(&template.question_text)
                    .into_iter()
                    .chain(template.options.iter().flat_map(|o| placeholders(o)))
                {
                    if !bindings.contains_key(&name) {
                        violation("unbound placeholder", format!("option {i} does not bind '{{{name}}}'"));
                    }
                }
                for property in template.option_properties.get(i).into_iter().flatten() {
                    if let Err(e) = check_property(*property, &series) {
                        violation(
                            match property {
                                RecipeProperty::Stationary => "option marked stationary is not",
                                RecipeProperty::Nonstationary => "option marked nonstationary is not",
                            },
                            format!("option {i}: {e}"),
                        );
                    }
                }
            }
        }
    }
    let ex = &template.example;
    if ex.correct_option >= template.options.len() {
        violation("example option out of range", format!("{} of {}", ex.correct_option, template.options.len()));
    }
    if ex.recipe.series_count() != template.series_count {
        violation("series count mismatch", format!("example recipe yields {} series", ex.recipe.series_count()));
    } else if let Err(e) = ex.recipe.generate(EXAMPLE_LENGTH, labeled_seed(PROBE_SEED, "example")) {
        violation("generation failed", format!("example: {e}"));
    }
    out
}

/// An instantiated question.
///
/// `options` are shown in shuffled order: `permutation[p]` is the template
/// option displayed at position `p`, and `correct_index` is the position of
/// `generating_option`. The exemplar keeps the template's option order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExamItem {
    pub item_id: String,
    pub template_id: String,
    pub category: Category,
    pub subcategory: String,
    pub question_text: String,
    pub options: Vec<String>,
    pub hint: Option<String>,
    pub relevant_concepts: Vec<Concept>,
    pub series: Vec<TimeSeries>,
    pub example_series: Vec<TimeSeries>,
    pub example_question_text: String,
    pub example_options: Vec<String>,
    pub example_answer_option: usize,
    pub example_answer: String,
    pub correct_index: usize,
    pub permutation: Vec<usize>,
    pub generating_option: usize,
    pub seed: u64,
}

impl ExamItem {
    /// Template option index shown at display position `position`.
    pub fn template_option(&self, position: usize) -> Option<usize> {
        self.permutation.get(position).copied()
    }
}

/// Fisher–Yates permutation of `0..n` driven by `seed`.
pub fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::rng(seed);
    for i in (1..n).rev() {
        let j = r.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// Instantiates `template` with `correct_option` as the keyed answer.
///
/// Question series use `labeled_seed(seed, "question")`, the exemplar
/// `labeled_seed(seed, "example")` and the option shuffle
/// `labeled_seed(seed, "shuffle")`. `lengths` is `(question, example)`.
pub fn instantiate(
    template: &Template,
    correct_option: usize,
    seed: u64,
    lengths: (usize, usize),
) -> Result<ExamItem, TemplateError> {
    let count = template.options.len();
    if correct_option >= count {
        return Err(TemplateError::OptionOutOfRange { template: template.id.clone(), option: correct_option, count });
    }
    let recipe = template
        .option_recipes
        .get(correct_option)
        .and_then(Option::as_ref)
        .ok_or_else(|| TemplateError::Unanswerable { template: template.id.clone(), option: correct_option })?;
    let (series, bindings) = recipe
        .generate(lengths.0, labeled_seed(seed, "question"))
        .map_err(|source| TemplateError::Generation { template: template.id.clone(), option: Some(correct_option), source })?;
    let (example_series, example_bindings) = template
        .example
        .recipe
        .generate(lengths.1, labeled_seed(seed, "example"))
        .map_err(|source| TemplateError::Generation { template: template.id.clone(), option: None, source })?;

    let filled: Vec<String> = template.options.iter().map(|o| fill_placeholders(o, &bindings)).collect();
    let permutation = shuffled_order(count, labeled_seed(seed, "shuffle"));
    let options = permutation.iter().map(|&i| filled[i].clone()).collect();
    let correct_index = permutation.iter().position(|&i| i == correct_option).expect("permutation covers all options");

    Ok(ExamItem {
        item_id: format!("{}-{seed:016x}", template.id),
        template_id: template.id.clone(),
        category: template.category,
        subcategory: template.subcategory.clone(),
        question_text: fill_placeholders(&template.question_text, &bindings),
        options,
        hint: template.hint.clone(),
        relevant_concepts: template.relevant_concepts.clone(),
        series,
        example_series,
        example_question_text: fill_placeholders(&template.question_text, &example_bindings),
        example_options: template.options.iter().map(|o| fill_placeholders(o, &example_bindings)).collect(),
        example_answer_option: template.example.correct_option,
        example_answer: fill_placeholders(&template.example.answer, &example_bindings),
        correct_index,
        permutation,
        generating_option: correct_option,
        seed,
    })
}

/// Immutable, validated set of templates indexed by id and category.
#[derive(Clone, Debug, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Template>,
}

impl TemplateRegistry {
    /// Validates every template; any violation rejects the whole set.
    pub fn new(templates: Vec<Template>) -> Result<Self, TemplateError> {
        let mut violations = Vec::new();
        let mut map = BTreeMap::new();
        for t in templates {
            violations.extend(validate_template(&t));
            if map.contains_key(&t.id) {
                violations.push(Violation {
                    template_id: t.id.clone(),
                    rule: String::from("duplicate id"),
                    detail: String::new(),
                });
                continue;
            }
            map.insert(t.id.clone(), t);
        }
        if violations.is_empty() {
            Ok(TemplateRegistry { templates: map })
        } else {
            Err(TemplateError::Invalid(violations))
        }
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.get(id)
    }

    /// All templates in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Template> {
        self.templates.values()
    }

    /// Templates of one category in id order.
    pub fn in_category(&self, category: Category) -> Vec<&Template> {
        self.iter().filter(|t| t.category == category).collect()
    }

    pub fn in_subcategory(&self, category: Category, subcategory: &str) -> Vec<&Template> {
        self.iter().filter(|t| t.category == category && t.subcategory == subcategory).collect()
    }

    /// Taxonomy entries with no template.
    pub fn missing_subcategories(&self) -> Vec<(Category, &'static str)> {
        taxonomy().filter(|(c, s)| self.in_subcategory(*c, s).is_empty()).collect()
    }
}
