//! User and item profile embedding: sparse ids become `d`-wide rows,
//! dense values are z-scored with training-split statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParameterStore};
use crate::tape::{NodeId, Tape};
use crate::tensor::DenseArray;

/// Smallest standard deviation used when standardizing.
pub const STD_FLOOR: f64 = 1e-6;

/// Feature layout of one side (user or item).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideSchema {
    /// Vocabulary size of each sparse field.
    pub sparse_vocab: Vec<usize>,
    /// Number of dense values.
    pub dense: usize,
}

impl SideSchema {
    pub fn embedded_len(&self, dim: usize) -> usize {
        self.sparse_vocab.len() * dim + self.dense
    }

    pub fn check(&self, profile: &Profile) -> Result<()> {
        if profile.sparse.len() != self.sparse_vocab.len() {
            return Err(Error::Shape(format!(
                "{} sparse ids for {} sparse fields",
                profile.sparse.len(),
                self.sparse_vocab.len()
            )));
        }
        if profile.dense.len() != self.dense {
            return Err(Error::Shape(format!(
                "{} dense values for {} dense fields",
                profile.dense.len(),
                self.dense
            )));
        }
        for (field, (&id, &vocab)) in profile.sparse.iter().zip(&self.sparse_vocab).enumerate() {
            if id >= vocab {
                return Err(Error::Lookup(format!(
                    "sparse id {id} out of vocabulary (size {vocab}) in field {field}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub user: SideSchema,
    pub item: SideSchema,
}

/// Raw features of one user or item.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub sparse: Vec<usize>,
    pub dense: Vec<f64>,
}

/// Per-field mean and standard deviation of dense features.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DenseStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DenseStats {
    /// Population statistics over `profiles`. With no profiles, mean 0 and std 1.
    pub fn fit<'a>(dense: usize, profiles: impl IntoIterator<Item = &'a Profile>) -> Self {
        let mut sum = vec![0.0; dense];
        let mut sq = vec![0.0; dense];
        let mut n = 0usize;
        for p in profiles {
            for (k, v) in p.dense.iter().take(dense).enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return DenseStats {
                mean: vec![0.0; dense],
                std: vec![1.0; dense],
            };
        }
        let n = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / n - m * m).max(0.0).sqrt())
            .collect();
        DenseStats { mean, std }
    }

    pub fn standardize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s.max(STD_FLOOR))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub user: DenseStats,
    pub item: DenseStats,
}

/// `x = e(s_1) ⊕ … ⊕ e(s_k) ⊕ z(dense)`.
pub fn embed_profile(
    tape: &mut Tape,
    store: &ParameterStore,
    tables: &[ParamId],
    schema: &SideSchema,
    profile: &Profile,
    stats: &DenseStats,
) -> Result<NodeId> {
    schema.check(profile)?;
    if tables.len() != schema.sparse_vocab.len() {
        return Err(Error::Shape(format!(
            "{} embedding tables for {} sparse fields",
            tables.len(),
            schema.sparse_vocab.len()
        )));
    }
    let mut parts = Vec::with_capacity(tables.len() + 1);
    for (&table, &id) in tables.iter().zip(&profile.sparse) {
        let t = tape.param(store, table);
        parts.push(tape.gather(t, id)?);
    }
    if schema.dense > 0 {
        parts.push(tape.input(DenseArray::vector(stats.standardize(&profile.dense))));
    }
    tape.concat(&parts)
}
