//! Central finite-difference check of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::tape::{NodeId, Tape};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub tolerance: f64,
    pub step: f64,
    /// Parameters larger than this are checked on a seeded sample of this many elements.
    pub max_elements: usize,
    /// Relative errors use `max(|analytic|, |numeric|, floor)` as the denominator.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            tolerance: 1e-4,
            step: 1e-5,
            max_elements: 128,
            floor: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| !p.passed)
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn scalar_loss<F>(builder: &F, store: &ParameterStore) -> Result<f64>
where
    F: Fn(&mut Tape, &ParameterStore) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = builder(&mut tape, store)?;
    tape.value(loss)
        .item()
        .ok_or_else(|| Error::Contract("gradient check needs a scalar loss".into()))
}

/// Compares backward-pass gradients with central differences for every
/// parameter in `store`. The store is restored before returning.
pub fn grad_check<F>(builder: F, store: &mut ParameterStore, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParameterStore) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = builder(&mut tape, store)?;
    let grads = tape.backward(loss)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let ids: Vec<_> = store.ids().collect();
    let mut params = Vec::with_capacity(ids.len());
    for id in ids {
        let n = store.value(id).len();
        let analytic: Vec<f64> = grads.param(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        let elements: Vec<usize> = if n > opts.max_elements {
            let mut picked = sample(&mut rng, n, opts.max_elements).into_vec();
            picked.sort_unstable();
            picked
        } else {
            (0..n).collect()
        };

        let mut worst: f64 = 0.0;
        for &k in &elements {
            let original = store.value(id).values()[k];
            store.value_mut(id).values_mut()[k] = original + opts.step;
            let plus = scalar_loss(&builder, store);
            store.value_mut(id).values_mut()[k] = original - opts.step;
            let minus = scalar_loss(&builder, store);
            store.value_mut(id).values_mut()[k] = original;
            let numeric = (plus? - minus?) / (2.0 * opts.step);
            worst = worst.max(relative_error(analytic[k], numeric, opts.floor));
        }
        params.push(ParamCheck {
            name: store.get(id).name.clone(),
            checked: elements.len(),
            max_rel_error: worst,
            passed: worst < opts.tolerance,
        });
    }
    Ok(GradCheckReport {
        tolerance: opts.tolerance,
        params,
    })
}
