//! Prompt construction from exam items.
//!
//! A prompt is an ordered list of parts, each tagged with the block it
//! belongs to. Blocks always appear in this order (optional ones may be
//! absent): instructions, the one-shot example (question, series, options,
//! answer), hint, concepts, question, series, options, answer format.
//! All fixed wording lives in `prompts/wording.json`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsexam_core::synth::TimeSeries;
use tsexam_core::template::ExamItem;

use super::render::{render_plot, PlotError};
use super::serialize::serialize_text;

pub const WORDING_JSON: &str = include_str!("../../prompts/wording.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wording {
    pub instructions: String,
    pub example_header: String,
    pub example_answer_prefix: String,
    pub hint_header: String,
    pub concepts_header: String,
    pub question_header: String,
    pub series_text_single: String,
    pub series_text_multi: String,
    pub series_image_single: String,
    pub series_image_multi: String,
    pub options_header: String,
    pub answer_format: String,
}

pub fn wording() -> &'static Wording {
    static W: OnceLock<Wording> = OnceLock::new();
    W.get_or_init(|| serde_json::from_str(WORDING_JSON).expect("wording fixture parses"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Text => "text",
            Modality::Image => "image",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guidance {
    Hint,
    RelevantConcepts,
}

fn default_true() -> bool {
    true
}
fn default_max_tokens() -> u32 {
    1024
}
fn default_seed() -> Option<u64> {
    Some(42)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub modality: Modality,
    #[serde(default)]
    pub guidance: BTreeSet<Guidance>,
    #[serde(default = "default_true")]
    pub one_shot: bool,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_seed")]
    pub seed: Option<u64>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            modality: Modality::Text,
            guidance: BTreeSet::new(),
            one_shot: true,
            max_tokens: default_max_tokens(),
            temperature: 0.0,
            seed: default_seed(),
        }
    }
}

impl PromptConfig {
    pub fn with_guidance(mut self, guidance: &[Guidance]) -> Self {
        self.guidance = guidance.iter().copied().collect();
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Instructions,
    ExampleQuestion,
    ExampleSeries,
    ExampleOptions,
    ExampleAnswer,
    Hint,
    Concepts,
    Question,
    Series,
    Options,
    AnswerFormat,
}

impl Block {
    pub fn tag(self) -> &'static str {
        match self {
            Block::Instructions => "instructions",
            Block::ExampleQuestion => "example_question",
            Block::ExampleSeries => "example_series",
            Block::ExampleOptions => "example_options",
            Block::ExampleAnswer => "example_answer",
            Block::Hint => "hint",
            Block::Concepts => "concepts",
            Block::Question => "question",
            Block::Series => "series",
            Block::Options => "options",
            Block::AnswerFormat => "answer_format",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Content {
    Text(String),
    /// PNG bytes.
    Image(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPart {
    pub block: Block,
    pub content: Content,
}

/// Generation parameters sent along with a prompt.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub parts: Vec<PromptPart>,
    pub params: GenerationParams,
}

impl Prompt {
    /// Distinct blocks in order of appearance.
    pub fn blocks(&self) -> Vec<Block> {
        let mut out: Vec<Block> = Vec::new();
        for p in &self.parts {
            if out.last() != Some(&p.block) {
                out.push(p.block);
            }
        }
        out
    }

    pub fn has_images(&self) -> bool {
        self.parts.iter().any(|p| matches!(p.content, Content::Image(_)))
    }

    pub fn text_of(&self, block: Block) -> String {
        self.parts
            .iter()
            .filter(|p| p.block == block)
            .filter_map(|p| match &p.content {
                Content::Text(t) => Some(t.as_str()),
                Content::Image(_) => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Canonical form: for each part `[tag]\n` then its text, or
    /// `image/png sha256:<hex>` for images, then `\n`.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for p in &self.parts {
            out.push('[');
            out.push_str(p.block.tag());
            out.push_str("]\n");
            match &p.content {
                Content::Text(t) => out.push_str(t),
                Content::Image(png) => {
                    out.push_str("image/png sha256:");
                    out.push_str(&hex::encode(Sha256::digest(png)));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 of [`Prompt::canonical`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("item '{item}': {count} options exceed the 26 available letters")]
    TooManyOptions { item: String, count: usize },
    #[error("item '{item}': {source}")]
    Plot { item: String, source: PlotError },
}

pub fn option_letter(i: usize) -> char {
    (b'A' + i as u8) as char
}

fn option_list(options: &[String]) -> String {
    let mut out = wording().options_header.clone();
    for (i, o) in options.iter().enumerate() {
        out.push('\n');
        out.push(option_letter(i));
        out.push_str(". ");
        out.push_str(o);
    }
    out
}

fn series_parts(
    block: Block,
    series: &[TimeSeries],
    modality: Modality,
    item: &str,
) -> Result<Vec<PromptPart>, PromptError> {
    let w = wording();
    let n = series.first().map_or(0, TimeSeries::len).to_string();
    let text = |t: String| PromptPart { block, content: Content::Text(t) };
    match modality {
        Modality::Text if series.len() == 1 => {
            let header = w.series_text_single.replace("{n}", &n);
            Ok(vec![text(format!("{header}\n{}", serialize_text(&series[0])))])
        }
        Modality::Text => Ok(series
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let header = w.series_text_multi.replace("{k}", &(k + 1).to_string()).replace("{n}", &s.len().to_string());
                text(format!("{header}\n{}", serialize_text(s)))
            })
            .collect()),
        Modality::Image => {
            let note = if series.len() == 1 { &w.series_image_single } else { &w.series_image_multi };
            let png = render_plot(series).map_err(|source| PromptError::Plot { item: item.to_string(), source })?;
            Ok(vec![text(note.replace("{n}", &n)), PromptPart { block, content: Content::Image(png) }])
        }
    }
}

pub fn build_prompt(item: &ExamItem, config: &PromptConfig) -> Result<Prompt, PromptError> {
    let count = item.options.len().max(item.example_options.len());
    if count > 26 {
        return Err(PromptError::TooManyOptions { item: item.item_id.clone(), count });
    }
    let w = wording();
    let mut parts = Vec::new();
    let text = |parts: &mut Vec<PromptPart>, block: Block, t: String| parts.push(PromptPart { block, content: Content::Text(t) });

    text(&mut parts, Block::Instructions, w.instructions.clone());
    if config.one_shot {
        text(&mut parts, Block::ExampleQuestion, format!("{}\n{}", w.example_header, item.example_question_text));
        parts.extend(series_parts(Block::ExampleSeries, &item.example_series, config.modality, &item.item_id)?);
        text(&mut parts, Block::ExampleOptions, option_list(&item.example_options));
        text(&mut parts, Block::ExampleAnswer, format!("{} {}", w.example_answer_prefix, item.example_answer));
    }
    if config.guidance.contains(&Guidance::Hint) {
        if let Some(h) = &item.hint {
            text(&mut parts, Block::Hint, format!("{}\n{h}", w.hint_header));
        }
    }
    if config.guidance.contains(&Guidance::RelevantConcepts) && !item.relevant_concepts.is_empty() {
        let mut t = w.concepts_header.clone();
        for c in &item.relevant_concepts {
            t.push_str(&format!("\n- {}: {}", c.term, c.description));
        }
        text(&mut parts, Block::Concepts, t);
    }
    text(&mut parts, Block::Question, format!("{}\n{}", w.question_header, item.question_text));
    parts.extend(series_parts(Block::Series, &item.series, config.modality, &item.item_id)?);
    text(&mut parts, Block::Options, option_list(&item.options));
    text(&mut parts, Block::AnswerFormat, w.answer_format.clone());

    Ok(Prompt {
        parts,
        params: GenerationParams { max_tokens: config.max_tokens, temperature: config.temperature, seed: config.seed },
    })
}
