//! On-disk dataset layout and the interaction/profile TSV formats.
//!
//! A dataset directory holds:
//!
//! ```text
//! kg/triples.tsv     head, relation, tail
//! kg/alignment.tsv   item id, entity name
//! items.tsv          item id, sparse ids, dense values
//! users.tsv          user id, sparse ids, dense values
//! schema.json        feature layout of both sides plus the behavior cap
//! train.tsv          user id, item id, label, behavior item ids
//! test.tsv
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{ItemId, KnowledgeGraph};
use crate::model::{FeatureSchema, Profile};
use crate::tsv;

pub const KG_DIR: &str = "kg";
pub const ITEMS_FILE: &str = "items.tsv";
pub const USERS_FILE: &str = "users.tsv";
pub const SCHEMA_FILE: &str = "schema.json";
pub const TRAIN_FILE: &str = "train.tsv";
pub const TEST_FILE: &str = "test.tsv";

/// Default behavior cap: up to 10 real-time behaviors per sample.
pub const DEFAULT_MAX_BEHAVIORS: usize = 10;

pub type UserId = usize;

/// One interaction record `(u, i, B_ui, y_ui)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub user: UserId,
    pub target: ItemId,
    /// Most recent first.
    pub behaviors: Vec<ItemId>,
    pub label: u8,
}

impl Sample {
    /// Behaviors with every occurrence of the target removed.
    pub fn deduped_behaviors(&self) -> Vec<ItemId> {
        self.behaviors.iter().copied().filter(|&b| b != self.target).collect()
    }
}

/// Contents of `schema.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub user: crate::model::SideSchema,
    pub item: crate::model::SideSchema,
    #[serde(default = "default_max_behaviors")]
    pub max_behaviors: usize,
}

fn default_max_behaviors() -> usize {
    DEFAULT_MAX_BEHAVIORS
}

impl DatasetSchema {
    pub fn features(&self) -> FeatureSchema {
        FeatureSchema {
            user: self.user.clone(),
            item: self.item.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_string(path.as_ref(), &(serde_json::to_string_pretty(self)? + "\n"))
    }
}

pub(crate) fn write_string(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_id(path: &Path, line: usize, field: &str, what: &str) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad {what} {field:?}")))
}

pub fn parse_sample(path: &Path, line: usize, fields: &[String]) -> Result<Sample> {
    let label = match fields[2].as_str() {
        "0" => 0,
        "1" => 1,
        other => return Err(Error::parse(path, line, format!("label must be 0 or 1, got {other:?}"))),
    };
    Ok(Sample {
        user: parse_id(path, line, &fields[0], "user id")?,
        target: parse_id(path, line, &fields[1], "item id")?,
        behaviors: tsv::split_list(&fields[3])
            .map(|b| parse_id(path, line, b, "behavior id"))
            .collect::<Result<_>>()?,
        label,
    })
}

pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    tsv::read_rows(path, 4)?
        .into_iter()
        .map(|(line, fields)| parse_sample(path, line, &fields))
        .collect()
}

pub fn format_samples(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", s.user, s.target, s.label, tsv::join_list(&s.behaviors));
    }
    out
}

pub fn write_samples(path: impl AsRef<Path>, samples: &[Sample]) -> Result<()> {
    write_string(path.as_ref(), &format_samples(samples))
}

/// Parses one profile row: `id␉sparse_ids␉dense_vals`.
pub fn parse_profile(path: &Path, line: usize, fields: &[String]) -> Result<(usize, Profile)> {
    let id = parse_id(path, line, &fields[0], "id")?;
    let sparse = tsv::split_list(&fields[1])
        .map(|s| parse_id(path, line, s, "sparse id"))
        .collect::<Result<_>>()?;
    let dense = tsv::split_list(&fields[2])
        .map(|v| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("bad dense value {v:?}")))
        })
        .collect::<Result<_>>()?;
    Ok((id, Profile { sparse, dense }))
}

/// Reads a profile table whose ids must be exactly `0..n` in order.
pub fn read_profiles(path: impl AsRef<Path>) -> Result<Vec<Profile>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (line, fields) in tsv::read_rows(path, 3)? {
        let (id, profile) = parse_profile(path, line, &fields)?;
        if id != out.len() {
            return Err(Error::parse(path, line, format!("expected id {}, found {id}", out.len())));
        }
        out.push(profile);
    }
    Ok(out)
}

pub fn format_profiles(profiles: &[Profile]) -> String {
    let mut out = String::new();
    for (id, p) in profiles.iter().enumerate() {
        let dense: Vec<String> = p.dense.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{id}\t{}\t{}", tsv::join_list(&p.sparse), dense.join(","));
    }
    out
}

pub fn write_profiles(path: impl AsRef<Path>, profiles: &[Profile]) -> Result<()> {
    write_string(path.as_ref(), &format_profiles(profiles))
}

/// A fully loaded dataset directory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub kg: KnowledgeGraph,
    pub schema: DatasetSchema,
    pub users: Vec<Profile>,
    pub items: Vec<Profile>,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    /// Loads `dir`, reading the KG from `dir/kg`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Self::load_with_kg(dir, dir.join(KG_DIR))
    }

    pub fn load_with_kg(dir: impl AsRef<Path>, kg_dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let ds = Dataset {
            dir: dir.to_path_buf(),
            kg: KnowledgeGraph::load_dir(kg_dir)?,
            schema: DatasetSchema::load(dir.join(SCHEMA_FILE))?,
            users: read_profiles(dir.join(USERS_FILE))?,
            items: read_profiles(dir.join(ITEMS_FILE))?,
            train: read_samples(dir.join(TRAIN_FILE))?,
            test: read_samples(dir.join(TEST_FILE))?,
        };
        ds.check()?;
        Ok(ds)
    }

    /// Cross-file consistency needed before training: every id resolves,
    /// every item is aligned, every profile matches the schema.
    pub fn check(&self) -> Result<()> {
        for (side, profiles, schema) in [("user", &self.users, &self.schema.user), ("item", &self.items, &self.schema.item)] {
            for (id, p) in profiles.iter().enumerate() {
                schema
                    .check(p)
                    .map_err(|e| Error::Integrity(format!("{side} {id}: {e}")))?;
            }
        }
        for (split, samples) in [("train", &self.train), ("test", &self.test)] {
            for (k, s) in samples.iter().enumerate() {
                if s.user >= self.users.len() {
                    return Err(Error::Integrity(format!("{split} sample {k}: unknown user {}", s.user)));
                }
                for &item in std::iter::once(&s.target).chain(&s.behaviors) {
                    if item >= self.items.len() {
                        return Err(Error::Integrity(format!("{split} sample {k}: unknown item {item}")));
                    }
                    self.kg.align(item)?;
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.kg.write_dir(dir.join(KG_DIR))?;
        self.schema.write(dir.join(SCHEMA_FILE))?;
        write_profiles(dir.join(USERS_FILE), &self.users)?;
        write_profiles(dir.join(ITEMS_FILE), &self.items)?;
        write_samples(dir.join(TRAIN_FILE), &self.train)?;
        write_samples(dir.join(TEST_FILE), &self.test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_round_trip() {
        let samples = vec![
            Sample {
                user: 3,
                target: 7,
                behaviors: vec![1, 2],
                label: 1,
            },
            Sample {
                user: 0,
                target: 2,
                behaviors: vec![],
                label: 0,
            },
        ];
        let text = format_samples(&samples);
        assert_eq!(text, "3\t7\t1\t1,2\n0\t2\t0\t\n");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        write_samples(&path, &samples).unwrap();
        assert_eq!(read_samples(&path).unwrap(), samples);
    }

    #[test]
    fn bad_label_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        fs::write(&path, "0\t1\t1\t\n0\t1\t2\t3\n").unwrap();
        match read_samples(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn profiles_round_trip_and_require_dense_ids() {
        let profiles = vec![
            Profile {
                sparse: vec![1, 0],
                dense: vec![0.25, -3.5],
            },
            Profile {
                sparse: vec![2, 4],
                dense: vec![1e-3, 7.0],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.tsv");
        write_profiles(&path, &profiles).unwrap();
        assert_eq!(read_profiles(&path).unwrap(), profiles);

        fs::write(&path, "0\t1\t\n2\t1\t\n").unwrap();
        assert!(matches!(read_profiles(&path), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn dedupe_drops_the_target() {
        let s = Sample {
            user: 0,
            target: 4,
            behaviors: vec![4, 1, 4, 2],
            label: 1,
        };
        assert_eq!(s.deduped_behaviors(), vec![1, 2]);
    }

    #[test]
    fn schema_defaults_behavior_cap() {
        let s: DatasetSchema = serde_json::from_str(
            r#"{"user": {"sparse_vocab": [2], "dense": 0}, "item": {"sparse_vocab": [], "dense": 1}}"#,
        )
        .unwrap();
        assert_eq!(s.max_behaviors, DEFAULT_MAX_BEHAVIORS);
    }
}
