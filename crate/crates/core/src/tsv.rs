//! Minimal tab-separated reading shared by every file format in the crate.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Reads a headerless TSV file, requiring exactly `columns` fields per line.
/// Blank lines are skipped. Line numbers are 1-based.
pub fn read_rows(path: &Path, columns: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rows(&text, columns).map_err(|(line, msg)| Error::parse(path, line, msg))
}

pub fn parse_rows(text: &str, columns: usize) -> Result<Vec<(usize, Vec<String>)>, (usize, String)> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_owned).collect();
        if fields.len() != columns {
            return Err((i + 1, format!("expected {columns} columns, found {}", fields.len())));
        }
        rows.push((i + 1, fields));
    }
    Ok(rows)
}

/// Splits a comma-separated list; the empty string is the empty list.
pub fn split_list(field: &str) -> impl Iterator<Item = &str> {
    field.split(',').filter(|s| !s.is_empty())
}

pub fn join_list<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_count_mismatch_reports_line() {
        let err = parse_rows("a\tb\tc\nx\ty\n", 3).unwrap_err();
        assert_eq!(err.0, 2);
    }

    #[test]
    fn empty_list_field() {
        assert_eq!(split_list("").count(), 0);
        assert_eq!(split_list("1,2").collect::<Vec<_>>(), vec!["1", "2"]);
    }
}
