//! Plain-text tables and report files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tsexam_core::irt::{RefineReport, RoundReport};
use tsexam_core::template::Category;

use crate::files::{FileError, TOOL_VERSION};
use crate::harness::ScoredRun;

pub const FIT_REPORT_FORMAT: &str = "tsexam-fit-report/1";
pub const REFINE_REPORT_FORMAT: &str = "tsexam-refine-report/1";
pub const SUMMARY_FORMAT: &str = "tsexam-summary/1";

/// Fit report for one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReportFile {
    pub format: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub report: RoundReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineReportFile {
    pub format: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub report: RefineReport,
}

impl FitReportFile {
    pub fn new(master_seed: u64, report: RoundReport) -> Self {
        FitReportFile { format: FIT_REPORT_FORMAT.into(), tool_version: TOOL_VERSION.into(), master_seed, report }
    }
}

impl RefineReportFile {
    pub fn new(master_seed: u64, report: RefineReport) -> Self {
        RefineReportFile { format: REFINE_REPORT_FORMAT.into(), tool_version: TOOL_VERSION.into(), master_seed, report }
    }
}

/// Left-aligned first column, right-aligned others, two-space gaps.
pub fn format_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(cols) {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate().take(cols) {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = width[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(headers);
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * cols.saturating_sub(1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

fn category_headers(first: &str) -> Vec<String> {
    let mut h = vec![first.to_string()];
    h.extend(Category::ALL.iter().map(|c| c.display_name().to_string()));
    h.push("Overall".into());
    h
}

fn category_cells(name: &str, by_cat: &BTreeMap<Category, f64>, overall: f64) -> Vec<String> {
    let mut r = vec![name.to_string()];
    r.extend(Category::ALL.iter().map(|c| by_cat.get(c).map_or("-".into(), |v| format!("{v:.3}"))));
    r.push(format!("{overall:.3}"));
    r
}

/// Model-by-category accuracy table for scored runs.
pub fn accuracy_table(runs: &[ScoredRun]) -> String {
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|run| {
            let by_cat = run.category_accuracy.iter().map(|(c, s)| (*c, s.accuracy)).collect();
            category_cells(&run.candidate, &by_cat, run.overall_accuracy)
        })
        .collect();
    format_table(&category_headers("Model"), &rows)
}

/// The same layout with one section per round, from fit reports.
pub fn round_accuracy_table(rounds: &[RoundReport]) -> String {
    let mut out = String::new();
    for r in rounds {
        out.push_str(&format!("Round {}\n", r.round));
        let rows: Vec<Vec<String>> = r
            .candidates
            .iter()
            .enumerate()
            .map(|(j, c)| category_cells(c, &r.category_accuracy.get(j).cloned().unwrap_or_default(), r.accuracy[j]))
            .collect();
        out.push_str(&format_table(&category_headers("Model"), &rows));
        out.push('\n');
    }
    out
}

/// Per-round sample average discrimination.
pub fn discrimination_table(rounds: &[RoundReport]) -> String {
    let rows: Vec<Vec<String>> = rounds.iter().map(|r| vec![r.round.to_string(), format!("{:.4}", r.mean_a)]).collect();
    format_table(&["Round".into(), "Mean a".into()], &rows)
}

/// Items dropped per category in each round.
pub fn dropped_table(rounds: &[RoundReport]) -> String {
    let mut headers = vec!["Round".to_string()];
    headers.extend(Category::ALL.iter().map(|c| c.display_name().to_string()));
    headers.push("Total".into());
    let rows: Vec<Vec<String>> = rounds
        .iter()
        .filter(|r| !r.dropped.is_empty())
        .map(|r| {
            let mut row = vec![r.round.to_string()];
            row.extend(Category::ALL.iter().map(|c| r.dropped_by_category.get(c).copied().unwrap_or(0).to_string()));
            row.push(r.dropped.len().to_string());
            row
        })
        .collect();
    format_table(&headers, &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub round: u32,
    pub items: usize,
    pub candidates: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub dropped: usize,
    /// Change of the printed mean `a` from the previous row.
    pub trend: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub rows: Vec<SummaryRow>,
}

/// Four-decimal rounding used for printed means.
fn printed(v: f64) -> f64 {
    format!("{v:.4}").parse().expect("formatted float parses")
}

pub fn summarize(master_seed: u64, rounds: &[RoundReport]) -> Summary {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for r in rounds {
        let trend = rows.last().map(|p| printed(printed(r.mean_a) - printed(p.mean_a)));
        rows.push(SummaryRow {
            round: r.round,
            items: r.items.len(),
            candidates: r.candidates.len(),
            mean_a: r.mean_a,
            mean_b: r.mean_b,
            dropped: r.dropped.len(),
            trend,
        });
    }
    Summary { format: SUMMARY_FORMAT.into(), tool_version: TOOL_VERSION.into(), master_seed, rows }
}

fn signed(v: f64) -> String {
    if v > 0.0 {
        format!("+{v:.4}")
    } else if v < 0.0 {
        format!("{v:.4}")
    } else {
        "0.0000".into()
    }
}

/// Round-by-round table; the trend column appears only with 2+ rows.
pub fn summary_table(summary: &Summary) -> String {
    let with_trend = summary.rows.len() > 1;
    let mut headers: Vec<String> = ["Round", "Items", "Candidates", "Mean a", "Mean b", "Dropped"].map(String::from).to_vec();
    if with_trend {
        headers.push("Trend a".into());
    }
    let rows: Vec<Vec<String>> = summary
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.round.to_string(),
                r.items.to_string(),
                r.candidates.to_string(),
                format!("{:.4}", r.mean_a),
                format!("{:.4}", r.mean_b),
                r.dropped.to_string(),
            ];
            if with_trend {
                row.push(r.trend.map_or(String::new(), signed));
            }
            row
        })
        .collect();
    format_table(&headers, &rows)
}

/// CSV for plotting the discrimination trend, with a `#` header comment.
pub fn trend_csv(summary: &Summary) -> String {
    let mut out = format!("# tool_version={} master_seed={}\nround,items,candidates,mean_a,mean_b,dropped\n", summary.tool_version, summary.master_seed);
    for r in &summary.rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.round, r.items, r.candidates, r.mean_a, r.mean_b, r.dropped));
    }
    out
}

/// Reads round reports from fit report or refine report files.
/// Returns the seed of the first file and the rounds sorted by round.
pub fn read_rounds(paths: &[impl AsRef<Path>]) -> Result<(u64, Vec<RoundReport>), FileError> {
    let mut seed = None;
    let mut rounds = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let bytes = std::fs::read(p).map_err(|source| FileError::Io { path: p.to_path_buf(), source })?;
        let value: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|e| FileError::Parse { path: p.to_path_buf(), message: e.to_string() })?;
        let bad = |message: String| FileError::Parse { path: p.to_path_buf(), message };
        match value.get("format").and_then(|f| f.as_str()) {
            Some(FIT_REPORT_FORMAT) => {
                let f: FitReportFile = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
                seed.get_or_insert(f.master_seed);
                rounds.push(f.report);
            }
            Some(REFINE_REPORT_FORMAT) => {
                let f: RefineReportFile = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
                seed.get_or_insert(f.master_seed);
                rounds.extend(f.report.rounds);
            }
            other => return Err(bad(format!("not a fit or refine report (format {other:?})"))),
        }
    }
    for r in &rounds {
        let n = r.items.len();
        if r.a.len() != n || r.b.len() != n || r.scores.len() != n || r.theta.len() != r.candidates.len() || r.accuracy.len() != r.candidates.len() {
            return Err(FileError::Parse { path: Default::default(), message: format!("round {} report has inconsistent lengths", r.round) });
        }
    }
    rounds.sort_by_key(|r| r.round);
    Ok((seed.unwrap_or_default(), rounds))
}
