//! Template loading: JSON files holding one template or an array of them,
//! from a single file, a directory, or the built-in pack.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tsexam_core::template::{Template, TemplateError, TemplateRegistry, Violation};

/// The shipped pack, one file per category.
pub const BUILTIN_PACK: [(&str, &str); 5] = [
    ("pattern_recognition.json", include_str!("../templates/pattern_recognition.json")),
    ("noise_understanding.json", include_str!("../templates/noise_understanding.json")),
    ("anomaly_detection.json", include_str!("../templates/anomaly_detection.json")),
    ("comparative_analysis.json", include_str!("../templates/comparative_analysis.json")),
    ("causality_analysis.json", include_str!("../templates/causality_analysis.json")),
];

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("template source not found: {0}")]
    NotFound(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: no template files (*.json)")]
    Empty { path: PathBuf },
    #[error("invalid templates: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<Template>),
    One(Box<Template>),
}

/// Parses a JSON document holding a template or an array of templates.
pub fn parse_templates(text: &str, origin: &Path) -> Result<Vec<Template>, LoadError> {
    // Untagged enums swallow field-level errors, so try the array form first
    // and report the error of whichever shape the document starts with.
    if text.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<Template>>(text)
    } else {
        serde_json::from_str::<Template>(text).map(|t| vec![t])
    }
    .map_err(|e| LoadError::Parse { path: origin.to_path_buf(), line: e.line(), column: e.column(), message: e.to_string() })
    .or_else(|err| match serde_json::from_str::<OneOrMany>(text) {
        Ok(OneOrMany::Many(v)) => Ok(v),
        Ok(OneOrMany::One(t)) => Ok(vec![*t]),
        Err(_) => Err(err),
    })
}

/// Reads templates from a file or from every `*.json` file directly inside
/// a directory (sorted by file name).
pub fn read_templates(source: &Path) -> Result<Vec<Template>, LoadError> {
    if !source.exists() {
        return Err(LoadError::NotFound(source.to_path_buf()));
    }
    let files = if source.is_dir() {
        let entries = fs::read_dir(source).map_err(|e| LoadError::Io { path: source.to_path_buf(), source: e })?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| LoadError::Io { path: source.to_path_buf(), source: e })?.path();
            if path.is_file() && path.extension().is_some_and(|x| x == "json") {
                files.push(path);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(LoadError::Empty { path: source.to_path_buf() });
        }
        files
    } else {
        vec![source.to_path_buf()]
    };
    let mut out = Vec::new();
    for path in files {
        let text = fs::read_to_string(&path).map_err(|e| LoadError::Io { path: path.clone(), source: e })?;
        out.extend(parse_templates(&text, &path)?);
    }
    Ok(out)
}

fn registry(templates: Vec<Template>) -> Result<TemplateRegistry, LoadError> {
    TemplateRegistry::new(templates).map_err(|e| match e {
        TemplateError::Invalid(v) => LoadError::Invalid(v),
        other => LoadError::Invalid(vec![Violation {
            template_id: String::new(),
            rule: String::from("load"),
            detail: other.to_string(),
        }]),
    })
}

/// Loads and validates templates; any invalid template rejects the load.
pub fn load_templates(source: &Path) -> Result<TemplateRegistry, LoadError> {
    registry(read_templates(source)?)
}

pub fn builtin_templates() -> Vec<Template> {
    BUILTIN_PACK
        .iter()
        .flat_map(|(name, text)| parse_templates(text, Path::new(name)).expect("built-in pack parses"))
        .collect()
}

pub fn builtin_registry() -> Result<TemplateRegistry, LoadError> {
    registry(builtin_templates())
}

/// Writes the built-in pack to `dir` so it can be edited and extended.
pub fn write_builtin_pack(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in BUILTIN_PACK {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}
