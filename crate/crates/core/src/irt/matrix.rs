use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::IrtError;

/// Binary responses `r[item][candidate]`.
///
/// `flagged` lists `(item, candidate)` cells that scored 0 because the
/// answer could not be parsed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct ResponseMatrix {
    candidates: Vec<String>,
    items: Vec<String>,
    r: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    flagged: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct RawMatrix {
    candidates: Vec<String>,
    items: Vec<String>,
    r: Vec<Vec<u8>>,
    #[serde(default)]
    flagged: Vec<(usize, usize)>,
}

impl TryFrom<RawMatrix> for ResponseMatrix {
    type Error = IrtError;

    fn try_from(raw: RawMatrix) -> Result<Self, IrtError> {
        ResponseMatrix::with_flags(raw.candidates, raw.items, raw.r, raw.flagged)
    }
}

fn unique(ids: &[String], what: &str) -> Result<(), IrtError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(IrtError::Matrix(format!("duplicate {what} id '{id}'")));
        }
    }
    Ok(())
}

impl ResponseMatrix {
    pub fn new(candidates: Vec<String>, items: Vec<String>, r: Vec<Vec<u8>>) -> Result<Self, IrtError> {
        Self::with_flags(candidates, items, r, Vec::new())
    }

    pub fn with_flags(
        candidates: Vec<String>,
        items: Vec<String>,
        r: Vec<Vec<u8>>,
        mut flagged: Vec<(usize, usize)>,
    ) -> Result<Self, IrtError> {
        unique(&candidates, "candidate")?;
        unique(&items, "item")?;
        if r.len() != items.len() {
            return Err(IrtError::Matrix(format!("{} rows for {} items", r.len(), items.len())));
        }
        for (i, row) in r.iter().enumerate() {
            if row.len() != candidates.len() {
                return Err(IrtError::Matrix(format!(
                    "row {i} has {} cells for {} candidates",
                    row.len(),
                    candidates.len()
                )));
            }
            if let Some(v) = row.iter().find(|&&v| v > 1) {
                return Err(IrtError::Matrix(format!("row {i} holds non-binary value {v}")));
            }
        }
        for &(i, j) in &flagged {
            if i >= items.len() || j >= candidates.len() {
                return Err(IrtError::Matrix(format!("flag ({i}, {j}) out of range")));
            }
            if r[i][j] != 0 {
                return Err(IrtError::Matrix(format!("flagged cell ({i}, {j}) is not 0")));
            }
        }
        flagged.sort_unstable();
        flagged.dedup();
        Ok(ResponseMatrix { candidates, items, r, flagged })
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.r
    }

    pub fn get(&self, item: usize, candidate: usize) -> u8 {
        self.r[item][candidate]
    }

    pub fn flagged(&self) -> &[(usize, usize)] {
        &self.flagged
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Column of one candidate.
    pub fn candidate_row(&self, candidate: usize) -> Vec<u8> {
        self.r.iter().map(|row| row[candidate]).collect()
    }

    /// Fraction of items the candidate answered correctly.
    pub fn accuracy(&self, candidate: usize) -> f64 {
        if self.r.is_empty() {
            return 0.0;
        }
        let hits: usize = self.r.iter().map(|row| row[candidate] as usize).sum();
        hits as f64 / self.r.len() as f64
    }

    /// Items with the same response from every candidate.
    pub fn constant_items(&self) -> Vec<usize> {
        self.r
            .iter()
            .enumerate()
            .filter(|(_, row)| row.iter().all(|&v| v == row[0]))
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn shape_checks() {
        assert!(ResponseMatrix::new(ids("c", 2), ids("i", 2), vec![vec![0, 1], vec![1, 1]]).is_ok());
        assert!(ResponseMatrix::new(ids("c", 2), ids("i", 2), vec![vec![0, 1]]).is_err());
        assert!(ResponseMatrix::new(ids("c", 2), ids("i", 1), vec![vec![0, 2]]).is_err());
        assert!(ResponseMatrix::new(vec!["x".into(), "x".into()], ids("i", 1), vec![vec![0, 1]]).is_err());
        assert!(ResponseMatrix::with_flags(ids("c", 2), ids("i", 1), vec![vec![1, 0]], vec![(0, 0)]).is_err());
    }

    #[test]
    fn serde_validates() {
        let m = ResponseMatrix::with_flags(ids("c", 2), ids("i", 2), vec![vec![0, 1], vec![1, 1]], vec![(0, 0)]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<ResponseMatrix>(&json).unwrap(), m);
        assert!(serde_json::from_str::<ResponseMatrix>(r#"{"candidates":["a"],"items":["i"],"r":[[3]]}"#).is_err());
    }

    #[test]
    fn accuracy_and_constant_items() {
        let m = ResponseMatrix::new(ids("c", 3), ids("i", 2), vec![vec![1, 1, 1], vec![0, 1, 0]]).unwrap();
        assert_eq!(m.accuracy(0), 0.5);
        assert_eq!(m.accuracy(1), 1.0);
        assert_eq!(m.constant_items(), vec![0]);
    }
}
