//! Format checks over a dataset directory. Problems become report rows, never errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::{self, DatasetSchema, ITEMS_FILE, KG_DIR, SCHEMA_FILE, TEST_FILE, TRAIN_FILE, USERS_FILE};
use crate::kg::{ALIGNMENT_FILE, INVERSE_SUFFIX, TRIPLES_FILE};
use crate::model::SideSchema;
use crate::tsv;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Path relative to the dataset directory.
    pub file: PathBuf,
    /// 1-based line, when the problem belongs to one line.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{line}: {}", self.file.display(), self.message),
            None => write!(f, "{}: {}", self.file.display(), self.message),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.violations.iter().map(|v| format!("{v}\n")).collect()
    }
}

struct Checker<'a> {
    dir: &'a Path,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn push(&mut self, file: &Path, line: Option<usize>, message: impl Into<String>) {
        self.out.push(Violation {
            file: file.to_path_buf(),
            line,
            message: message.into(),
        });
    }

    /// Rows of `file`, or `None` after recording why it could not be read.
    fn rows(&mut self, file: &Path, columns: usize) -> Option<Vec<(usize, Vec<String>)>> {
        let text = match std::fs::read_to_string(self.dir.join(file)) {
            Ok(t) => t,
            Err(e) => {
                self.push(file, None, format!("cannot read: {e}"));
                return None;
            }
        };
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            // Report every malformed line rather than stopping at the first.
            match tsv::parse_rows(line, columns) {
                Ok(mut r) => rows.push((i + 1, r.remove(0).1)),
                Err((_, msg)) => self.push(file, Some(i + 1), msg),
            }
        }
        if text.contains('\r') {
            self.push(file, None, "CR characters found; line endings must be LF");
        }
        Some(rows)
    }

    fn kg(&mut self) -> (BTreeSet<String>, BTreeMap<usize, String>) {
        let triples = Path::new(KG_DIR).join(TRIPLES_FILE);
        let mut entities = BTreeSet::new();
        for (line, f) in self.rows(&triples, 3).unwrap_or_default() {
            if f.iter().any(String::is_empty) {
                self.push(&triples, Some(line), "empty field");
                continue;
            }
            if f[1].ends_with(INVERSE_SUFFIX) {
                self.push(&triples, Some(line), format!("relation {:?} uses the reserved inverse suffix", f[1]));
            }
            entities.insert(f[0].clone());
            entities.insert(f[2].clone());
        }

        let alignment = Path::new(KG_DIR).join(ALIGNMENT_FILE);
        let mut aligned = BTreeMap::new();
        for (line, f) in self.rows(&alignment, 2).unwrap_or_default() {
            let Ok(item) = f[0].parse::<usize>() else {
                self.push(&alignment, Some(line), format!("bad item id {:?}", f[0]));
                continue;
            };
            if !entities.contains(&f[1]) {
                self.push(&alignment, Some(line), format!("unknown entity {:?}", f[1]));
                continue;
            }
            match aligned.get(&item) {
                Some(prev) if prev != &f[1] => self.push(
                    &alignment,
                    Some(line),
                    format!("item {item} aligned to both {prev:?} and {:?}", f[1]),
                ),
                _ => {
                    aligned.insert(item, f[1].clone());
                }
            }
        }
        (entities, aligned)
    }

    fn schema(&mut self) -> Option<DatasetSchema> {
        let file = Path::new(SCHEMA_FILE);
        match DatasetSchema::load(self.dir.join(file)) {
            Ok(s) => Some(s),
            Err(e) => {
                self.push(file, None, e.to_string());
                None
            }
        }
    }

    /// Returns the number of rows, which must carry ids `0..n`.
    fn profiles(&mut self, name: &str, schema: Option<&SideSchema>) -> usize {
        let file = Path::new(name);
        let mut n = 0;
        for (line, f) in self.rows(file, 3).unwrap_or_default() {
            let (id, p) = match data::parse_profile(file, line, &f) {
                Ok(x) => x,
                Err(e) => {
                    self.push(file, Some(line), strip_location(&e));
                    n += 1;
                    continue;
                }
            };
            if id != n {
                self.push(file, Some(line), format!("expected id {n}, found {id}"));
            }
            if let Some(schema) = schema {
                if let Err(e) = schema.check(&p) {
                    self.push(file, Some(line), e.to_string());
                }
            }
            n += 1;
        }
        n
    }

    fn samples(&mut self, name: &str, users: usize, items: usize, aligned: &BTreeMap<usize, String>, cap: usize) {
        let file = Path::new(name);
        for (line, f) in self.rows(file, 4).unwrap_or_default() {
            let s = match data::parse_sample(file, line, &f) {
                Ok(s) => s,
                Err(e) => {
                    self.push(file, Some(line), strip_location(&e));
                    continue;
                }
            };
            if s.user >= users {
                self.push(file, Some(line), format!("unknown user {}", s.user));
            }
            if s.behaviors.len() > cap {
                self.push(
                    file,
                    Some(line),
                    format!("{} behaviors exceed the cap of {cap}", s.behaviors.len()),
                );
            }
            for item in std::iter::once(s.target).chain(s.behaviors) {
                if item >= items {
                    self.push(file, Some(line), format!("unknown item {item}"));
                } else if !aligned.contains_key(&item) {
                    self.push(file, Some(line), format!("item {item} has no aligned entity"));
                }
            }
        }
    }
}

fn strip_location(e: &crate::error::Error) -> String {
    match e {
        crate::error::Error::Parse { message, .. } => message.clone(),
        other => other.to_string(),
    }
}

/// Checks every file of a dataset directory.
pub fn validate_dir(dir: impl AsRef<Path>) -> ValidationReport {
    let mut c = Checker {
        dir: dir.as_ref(),
        out: Vec::new(),
    };
    let (_, aligned) = c.kg();
    let schema = c.schema();
    let users = c.profiles(USERS_FILE, schema.as_ref().map(|s| &s.user));
    let items = c.profiles(ITEMS_FILE, schema.as_ref().map(|s| &s.item));
    for item in 0..items {
        if !aligned.contains_key(&item) {
            c.push(&Path::new(KG_DIR).join(ALIGNMENT_FILE), None, format!("item {item} is not aligned"));
        }
    }
    let cap = schema.as_ref().map_or(data::DEFAULT_MAX_BEHAVIORS, |s| s.max_behaviors);
    c.samples(TRAIN_FILE, users, items, &aligned, cap);
    c.samples(TEST_FILE, users, items, &aligned, cap);
    ValidationReport { violations: c.out }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_directory_reports_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let report = validate_dir(dir.path().join("nope"));
        assert!(report.violations.len() >= 6);
        assert!(report.violations.iter().all(|v| v.line.is_none()));
    }

    #[test]
    fn display_includes_line() {
        let v = Violation {
            file: "train.tsv".into(),
            line: Some(3),
            message: "bad".into(),
        };
        assert_eq!(v.to_string(), "train.tsv:3: bad");
    }
}
