//! Precomputed score tables: carrier for externally computed matching scores
//! (e.g. a real dense-matching implementation run offline).
//!
//! Format: line-oriented UTF-8 text, one `example_id_a<TAB>example_id_b<TAB>score`
//! entry per line, `#` starts a comment, blank lines ignored. Pairs are
//! unordered: a lookup of (x, y) equals a lookup of (y, x).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::FaceExample;
use crate::scalar::Real;

use super::ExampleMatcher;

/// Symmetric map from unordered example-id pairs to scores in [0, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    entries: BTreeMap<(String, String), f64>,
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, a: &str, b: &str, score: f64) {
        self.entries.insert(key(a, b), score);
    }

    pub fn lookup(&self, a: &str, b: &str) -> Result<f64> {
        self.entries
            .get(&key(a, b))
            .copied()
            .ok_or_else(|| Error::MissingPair {
                a: a.to_string(),
                b: b.to_string(),
            })
    }

    /// Parse the tab-separated table format, validating every score into
    /// [0, 1]. Errors carry the 1-based line number.
    pub fn load(reader: impl BufRead) -> Result<Self> {
        let mut table = ScoreTable::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::ScoreTableParse {
                line: line_no,
                message: e.to_string(),
            })?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::ScoreTableParse {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, got {}", fields.len()),
                });
            }
            let score: f64 = fields[2].trim().parse().map_err(|e| Error::ScoreTableParse {
                line: line_no,
                message: format!("bad score: {e}"),
            })?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::ScoreOutOfRange {
                    line: line_no,
                    value: score,
                });
            }
            table.insert(fields[0].trim(), fields[1].trim(), score);
        }
        Ok(table)
    }

    pub fn save(&self, mut writer: impl Write) -> std::io::Result<()> {
        for ((a, b), score) in &self.entries {
            writeln!(writer, "{a}\t{b}\t{score}")?;
        }
        Ok(())
    }
}

/// Δ backed by a loaded score table.
pub struct TableMatcher {
    table: ScoreTable,
}

impl TableMatcher {
    pub fn new(table: ScoreTable) -> Self {
        Self { table }
    }
}

impl<T: Real> ExampleMatcher<T> for TableMatcher {
    fn score(&self, a: &FaceExample<T>, b: &FaceExample<T>) -> Result<T> {
        let s = self.table.lookup(&a.example_id, &b.example_id)?;
        Ok(T::from_f64_lossy(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_order_insensitive() {
        let text = "e1\te2\t0.7\n";
        let table = ScoreTable::load(text.as_bytes()).unwrap();
        assert_eq!(table.lookup("e2", "e1").unwrap(), 0.7);
        assert_eq!(table.lookup("e1", "e2").unwrap(), 0.7);
    }

    #[test]
    fn out_of_range_score_is_rejected_with_line() {
        let text = "e1\te2\t0.7\ne3\te4\t1.3\n";
        match ScoreTable::load(text.as_bytes()) {
            Err(Error::ScoreOutOfRange { line, value }) => {
                assert_eq!(line, 2);
                assert_eq!(value, 1.3);
            }
            other => panic!("expected ScoreOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_empty_table_and_missing_pair() {
        let table = ScoreTable::load("".as_bytes()).unwrap();
        assert!(table.is_empty());
        assert!(matches!(
            table.lookup("a", "b"),
            Err(Error::MissingPair { .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header\n\ne1\te2\t0.25   # trailing comment\n";
        let table = ScoreTable::load(text.as_bytes()).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.lookup("e1", "e2").unwrap(), 0.25);
    }

    #[test]
    fn malformed_line_reports_position() {
        let text = "e1\te2\t0.5\nnot a record\n";
        match ScoreTable::load(text.as_bytes()) {
            Err(Error::ScoreTableParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip() {
        let mut table = ScoreTable::new();
        table.insert("b", "a", 0.125);
        table.insert("c", "d", 1.0);
        let mut buf = Vec::new();
        table.save(&mut buf).unwrap();
        let reloaded = ScoreTable::load(buf.as_slice()).unwrap();
        assert_eq!(table, reloaded);
    }
}
