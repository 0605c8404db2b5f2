//! Running an exam against one endpoint.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};
use tsexam_core::exam::{Exam, ResponseRecord};
use tsexam_core::template::{Category, ExamItem};

use super::client::{EndpointClient, ModelEndpoint, QueryError};
use super::parse::parse_answer;
use super::prompt::{build_prompt, Guidance, Modality, PromptConfig};
use crate::files::TOOL_VERSION;

/// One transcript line. The first four fields double as a response record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub candidate: String,
    pub item_id: String,
    pub choice: Option<usize>,
    pub parse_failure: bool,
    pub raw_text: Option<String>,
    pub error: Option<String>,
    pub retries: u32,
    pub latency_ms: u64,
    pub prompt_digest: String,
    pub tool_version: String,
    pub master_seed: u64,
}

impl TranscriptRecord {
    pub fn response(&self) -> ResponseRecord {
        ResponseRecord {
            candidate: self.candidate.clone(),
            item_id: self.item_id.clone(),
            choice: self.choice,
            parse_failure: self.parse_failure,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub item_id: String,
    pub category: Category,
    pub choice: Option<usize>,
    pub parse_failure: bool,
    pub correct: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub correct: usize,
    pub attempted: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredRun {
    pub candidate: String,
    pub endpoint: String,
    pub model: String,
    pub modality: Modality,
    pub guidance: Vec<Guidance>,
    pub tool_version: String,
    pub master_seed: u64,
    pub round: u32,
    pub items: Vec<ItemOutcome>,
    pub category_accuracy: BTreeMap<Category, CategoryScore>,
    pub overall_accuracy: f64,
    /// Binary responses in exam item order.
    pub row: Vec<u8>,
    pub parse_failures: usize,
    pub query_errors: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum EvaluateError {
    #[error("exam has no items")]
    EmptyExam,
    #[error("endpoint '{endpoint}' is text-only but modality is image")]
    Capability { endpoint: String },
    #[error("{0}")]
    Credentials(QueryError),
    #[error("invalid endpoint: {0}")]
    Endpoint(String),
    #[error("transcript write failed: {0}")]
    Transcript(#[from] std::io::Error),
}

pub fn candidate_id(endpoint: &ModelEndpoint, modality: Modality) -> String {
    format!("{}:{modality}", endpoint.name)
}

/// Checks everything that can fail before any request is sent.
pub fn preflight(endpoint: &ModelEndpoint, config: &PromptConfig) -> Result<(), EvaluateError> {
    endpoint.validate().map_err(EvaluateError::Endpoint)?;
    if config.modality == Modality::Image && !endpoint.supports_images {
        return Err(EvaluateError::Capability { endpoint: endpoint.name.clone() });
    }
    endpoint.credentials().map_err(EvaluateError::Credentials)?;
    Ok(())
}

fn run_item(client: &EndpointClient, item: &ExamItem, config: &PromptConfig, candidate: &str, seed: u64) -> TranscriptRecord {
    let mut rec = TranscriptRecord {
        candidate: candidate.to_string(),
        item_id: item.item_id.clone(),
        choice: None,
        parse_failure: true,
        raw_text: None,
        error: None,
        retries: 0,
        latency_ms: 0,
        prompt_digest: String::new(),
        tool_version: TOOL_VERSION.to_string(),
        master_seed: seed,
    };
    let prompt = match build_prompt(item, config) {
        Ok(p) => p,
        Err(e) => {
            rec.error = Some(format!("prompt: {e}"));
            return rec;
        }
    };
    rec.prompt_digest = prompt.digest();
    match client.query(&prompt) {
        Ok(raw) => {
            rec.retries = raw.retries;
            rec.latency_ms = raw.latency_ms;
            match parse_answer(&raw.text, &item.options) {
                Ok(i) => {
                    rec.choice = Some(i);
                    rec.parse_failure = false;
                }
                Err(f) => rec.error = Some(format!("parse: {f}")),
            }
            rec.raw_text = Some(raw.text);
        }
        Err(f) => {
            rec.retries = f.retries;
            rec.error = Some(format!("query: {}", f.error));
        }
    }
    rec
}

/// Asks every item of `exam`, writing one transcript line per item as
/// answers arrive. Per-item failures are recorded, not raised.
pub fn evaluate(
    exam: &Exam,
    endpoint: &ModelEndpoint,
    config: &PromptConfig,
    mut transcript: Option<&mut dyn Write>,
) -> Result<ScoredRun, EvaluateError> {
    if exam.is_empty() {
        return Err(EvaluateError::EmptyExam);
    }
    preflight(endpoint, config)?;
    let candidate = candidate_id(endpoint, config.modality);
    let seed = exam.distribution.master_seed;
    let client = EndpointClient::new(endpoint.clone());
    let next = AtomicUsize::new(0);
    let workers = endpoint.parallelism.min(exam.len());
    let mut records: Vec<Option<TranscriptRecord>> = vec![None; exam.len()];

    thread::scope(|s| -> Result<(), EvaluateError> {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (client, next, candidate) = (&client, &next, &candidate);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = exam.items.get(i) else { break };
                if tx.send((i, run_item(client, item, config, candidate, seed))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, rec) in rx {
            if let Some(w) = transcript.as_deref_mut() {
                serde_json::to_writer(&mut *w, &rec).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            records[i] = Some(rec);
        }
        if let Some(w) = transcript.as_deref_mut() {
            w.flush()?;
        }
        Ok(())
    })?;

    let records: Vec<TranscriptRecord> = records.into_iter().map(|r| r.expect("every item answered")).collect();
    Ok(score(exam, endpoint, config, candidate, &records))
}

fn score(exam: &Exam, endpoint: &ModelEndpoint, config: &PromptConfig, candidate: String, records: &[TranscriptRecord]) -> ScoredRun {
    let mut items = Vec::with_capacity(exam.len());
    let mut tally: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
    for (item, rec) in exam.items.iter().zip(records) {
        let correct = !rec.parse_failure && rec.choice == Some(item.correct_index);
        let t = tally.entry(item.category).or_default();
        t.0 += correct as usize;
        t.1 += 1;
        items.push(ItemOutcome {
            item_id: item.item_id.clone(),
            category: item.category,
            choice: rec.choice,
            parse_failure: rec.parse_failure,
            correct,
        });
    }
    let row: Vec<u8> = items.iter().map(|o| o.correct as u8).collect();
    let total_correct = row.iter().map(|&v| v as usize).sum::<usize>();
    ScoredRun {
        candidate,
        endpoint: endpoint.name.clone(),
        model: endpoint.model.clone(),
        modality: config.modality,
        guidance: config.guidance.iter().copied().collect(),
        tool_version: TOOL_VERSION.to_string(),
        master_seed: exam.distribution.master_seed,
        round: exam.round,
        category_accuracy: tally
            .into_iter()
            .map(|(c, (correct, attempted))| (c, CategoryScore { correct, attempted, accuracy: correct as f64 / attempted as f64 }))
            .collect(),
        overall_accuracy: total_correct as f64 / exam.len() as f64,
        parse_failures: records.iter().filter(|r| r.parse_failure).count(),
        query_errors: records.iter().filter(|r| r.error.as_deref().is_some_and(|e| e.starts_with("query:"))).count(),
        row,
        items,
    }
}
