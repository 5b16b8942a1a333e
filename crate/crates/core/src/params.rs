//! Named parameters, their Adagrad accumulators, and the JSON checkpoint form.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseArray;

/// Default Adagrad stabilizer.
pub const ADAGRAD_EPS: f64 = 1e-8;

/// Half-width of the uniform initializer.
pub const INIT_SCALE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: DenseArray,
    /// Running sum of squared gradients, same length as `value`.
    pub accum: Vec<f64>,
}

/// Gradients keyed by parameter. Missing entries are zero.
pub type ParamGrads = BTreeMap<ParamId, Vec<f64>>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    params: Vec<Parameter>,
    index: BTreeMap<String, ParamId>,
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    shape: Vec<usize>,
    values: Vec<f64>,
    accum: Vec<f64>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: DenseArray) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Contract(format!("duplicate parameter name {name:?}")));
        }
        if !value.is_finite() {
            return Err(Error::Numeric(format!("parameter {name:?} has non-finite values")));
        }
        let id = ParamId(self.params.len());
        self.params.push(Parameter {
            name: name.to_owned(),
            accum: vec![0.0; value.len()],
            value,
        });
        self.index.insert(name.to_owned(), id);
        Ok(id)
    }

    /// Adds a parameter drawn uniformly from `[-INIT_SCALE, INIT_SCALE]`.
    pub fn add_uniform<R: Rng>(&mut self, name: &str, shape: Vec<usize>, rng: &mut R) -> Result<ParamId> {
        let n = shape.iter().product();
        let values = (0..n).map(|_| rng.gen_range(-INIT_SCALE..=INIT_SCALE)).collect();
        self.add(name, DenseArray::new(shape, values)?)
    }

    pub fn add_zeros(&mut self, name: &str, shape: Vec<usize>) -> Result<ParamId> {
        self.add(name, DenseArray::zeros(shape))
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("no parameter named {name:?}")))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &DenseArray {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseArray {
        &mut self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// One Adagrad update: `acc += g²; θ -= lr · g / (√acc + eps)`.
    pub fn adagrad_step(&mut self, grads: &ParamGrads, lr: f64, eps: f64) -> Result<()> {
        for (id, g) in grads {
            let p = self
                .params
                .get(id.0)
                .ok_or_else(|| Error::Lookup(format!("unknown parameter id {}", id.0)))?;
            if g.len() != p.value.len() {
                return Err(Error::Shape(format!(
                    "gradient of length {} for parameter {:?} of length {}",
                    g.len(),
                    p.name,
                    p.value.len()
                )));
            }
        }
        for (id, g) in grads {
            let p = &mut self.params[id.0];
            for ((theta, acc), gv) in p.value.values_mut().iter_mut().zip(&mut p.accum).zip(g) {
                if *gv == 0.0 {
                    continue;
                }
                *acc += gv * gv;
                *theta -= lr * gv / (acc.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let records: BTreeMap<&str, ParamRecord> = self
            .params
            .iter()
            .map(|p| {
                (
                    p.name.as_str(),
                    ParamRecord {
                        shape: p.value.shape().to_vec(),
                        values: p.value.values().to_vec(),
                        accum: p.accum.clone(),
                    },
                )
            })
            .collect();
        serde_json::to_value(records).expect("parameter records serialize")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let records: BTreeMap<String, ParamRecord> = serde_json::from_value(value)?;
        let mut store = ParameterStore::new();
        for (name, rec) in records {
            if rec.accum.len() != rec.values.len() {
                return Err(Error::Shape(format!("accumulator length mismatch for {name:?}")));
            }
            if rec.accum.iter().any(|a| *a < 0.0) {
                return Err(Error::Integrity(format!("negative accumulator in {name:?}")));
            }
            let id = store.add(&name, DenseArray::new(rec.shape, rec.values)?)?;
            store.params[id.0].accum = rec.accum;
        }
        Ok(store)
    }
}
