//! On-disk formats: the key-blind exam file, the answer keys, the digest
//! manifest, and response files.
//!
//! An exported exam directory holds `exam.json`, `keys.json`,
//! `manifest.json` and, with plots, `plots/<item_id>.png`. The manifest
//! lists every other file with its SHA-256 digest. All files embed the
//! master seed and the tool version.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsexam_core::exam::{grade_responses, AnswerKey, Exam, ExamError, ExamSheet, ResponseRecord};
use tsexam_core::irt::ResponseMatrix;

use crate::harness::{render_plot, PlotError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const EXAM_FILE: &str = "exam.json";
pub const KEYS_FILE: &str = "keys.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOTS_DIR: &str = "plots";

pub const EXAM_FORMAT: &str = "tsexam-exam/1";
pub const KEYS_FORMAT: &str = "tsexam-keys/1";
pub const MANIFEST_FORMAT: &str = "tsexam-manifest/1";
pub const RESPONSES_FORMAT: &str = "tsexam-responses/1";

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Exam { path: PathBuf, source: ExamError },
    #[error("{path}: {source}")]
    Plot { path: PathBuf, source: PlotError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FileError + '_ {
    move |source| FileError::Io { path: path.to_path_buf(), source }
}

/// Key-blind exam file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExamFile {
    pub format: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub exam: ExamSheet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeysFile {
    pub format: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub keys: AnswerKey,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub round: u32,
    pub items: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn entry(&self, path: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.path == path)
    }

    pub fn png_count(&self) -> usize {
        self.entries.iter().filter(|e| e.path.ends_with(".png")).count()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FileError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    write_file(path, &to_json_pretty(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| FileError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

/// Serialized forms of an exam: `(exam.json, keys.json)` bytes.
pub fn exam_bytes(exam: &Exam) -> (Vec<u8>, Vec<u8>) {
    let (sheet, keys) = exam.split();
    let seed = exam.distribution.master_seed;
    let exam_file = ExamFile { format: EXAM_FORMAT.into(), tool_version: TOOL_VERSION.into(), master_seed: seed, exam: sheet };
    let keys_file = KeysFile { format: KEYS_FORMAT.into(), tool_version: TOOL_VERSION.into(), master_seed: seed, keys };
    let mut a = serde_json::to_vec(&exam_file).expect("serializable exam");
    let mut b = serde_json::to_vec(&keys_file).expect("serializable keys");
    a.push(b'\n');
    b.push(b'\n');
    (a, b)
}

/// Writes the exam directory and returns its manifest. Files are written
/// in a fixed order so reruns give identical digests.
pub fn export_exam(exam: &Exam, dir: &Path, include_plots: bool) -> Result<Manifest, FileError> {
    let mut entries = Vec::new();
    let mut put = |rel: String, bytes: &[u8]| -> Result<(), FileError> {
        write_file(&dir.join(&rel), bytes)?;
        entries.push(ManifestEntry { path: rel, sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    };
    let (exam_json, keys_json) = exam_bytes(exam);
    put(EXAM_FILE.into(), &exam_json)?;
    put(KEYS_FILE.into(), &keys_json)?;
    if include_plots {
        for item in &exam.items {
            let rel = format!("{PLOTS_DIR}/{}.png", item.item_id);
            let png = render_plot(&item.series).map_err(|source| FileError::Plot { path: dir.join(&rel), source })?;
            put(rel, &png)?;
        }
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        tool_version: TOOL_VERSION.into(),
        master_seed: exam.distribution.master_seed,
        round: exam.round,
        items: exam.len(),
        entries,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Directory holding `exam.json`, given the directory or the file itself.
pub fn exam_dir(path: &Path) -> &Path {
    if path.is_file() {
        path.parent().unwrap_or(Path::new("."))
    } else {
        path
    }
}

/// Reads the key-blind exam file only.
pub fn read_exam_sheet(path: &Path) -> Result<ExamFile, FileError> {
    let file = exam_dir(path).join(EXAM_FILE);
    let exam: ExamFile = read_json(&file)?;
    if exam.format != EXAM_FORMAT {
        return Err(FileError::Parse { path: file, message: format!("unsupported format '{}'", exam.format) });
    }
    Ok(exam)
}

/// Reads `exam.json` and `keys.json` and joins them.
pub fn import_exam(path: &Path) -> Result<Exam, FileError> {
    let dir = exam_dir(path);
    let exam = read_exam_sheet(dir)?;
    let keys_path = dir.join(KEYS_FILE);
    let keys: KeysFile = read_json(&keys_path)?;
    if keys.format != KEYS_FORMAT {
        return Err(FileError::Parse { path: keys_path, message: format!("unsupported format '{}'", keys.format) });
    }
    if keys.master_seed != exam.master_seed {
        return Err(FileError::Parse {
            path: keys_path,
            message: format!("master seed {} does not match exam seed {}", keys.master_seed, exam.master_seed),
        });
    }
    Exam::join(exam.exam, keys.keys).map_err(|source| FileError::Exam { path: dir.to_path_buf(), source })
}

/// Response file: `{"format": ..., "responses": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponsesFile {
    pub format: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub responses: Vec<ResponseRecord>,
}

/// Reads response records from a `.jsonl` transcript (one record per line;
/// extra fields are ignored) or a `.json` responses file.
pub fn read_response_records(path: &Path) -> Result<Vec<ResponseRecord>, FileError> {
    if path.extension().is_some_and(|x| x == "jsonl") {
        let file = fs::File::open(path).map_err(io_err(path))?;
        let mut out = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| FileError::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", n + 1),
            })?);
        }
        Ok(out)
    } else {
        Ok(read_json::<ResponsesFile>(path)?.responses)
    }
}

/// Grades a response file against the exam's keys.
pub fn import_responses(path: &Path, exam: &Exam) -> Result<ResponseMatrix, FileError> {
    let records = read_response_records(path)?;
    grade_responses(exam, &records).map_err(|source| FileError::Exam { path: path.to_path_buf(), source })
}
