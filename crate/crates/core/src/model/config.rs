use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ADAGRAD_EPS;

/// Neighbor aggregation used inside each extractor layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    /// Attention with logit `x_r · W_α · f(x_h ⊕ x_t)`.
    #[default]
    RelationAware,
    /// Zero-padded concatenation of the first `concat_cap` neighbor states, projected back.
    Concat,
    /// Unweighted sum of neighbor states.
    Sum,
    /// Attention with logit `LeakyReLU(a · (x_h ⊕ x_t))`; relations ignored.
    SelfAttention,
    /// Sum of neighbor states followed by affine + tanh.
    Nonlinear,
}

impl Aggregator {
    pub fn label(self) -> &'static str {
        match self {
            Aggregator::RelationAware => "relation-aware",
            Aggregator::Concat => "concat",
            Aggregator::Sum => "sum",
            Aggregator::SelfAttention => "self-attention",
            Aggregator::Nonlinear => "nonlinear",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Atbrg,
    /// Profiles plus mean behavior entity embedding into the MLP; no graph.
    BehaviorMlp,
}

/// Every hyperparameter and ablation switch of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Embedding width `d`.
    pub dim: usize,
    /// Extractor layer count `L`.
    pub layers: usize,
    pub mlp_dims: Vec<usize>,
    pub max_behaviors: usize,
    pub aggregator: Aggregator,
    pub use_ram: bool,
    pub use_ral: bool,
    /// Neighbor slots for the concat aggregator.
    pub concat_cap: usize,
    pub lr: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Atbrg,
            dim: 4,
            layers: 5,
            mlp_dims: vec![512, 256, 128],
            max_behaviors: 10,
            aggregator: Aggregator::RelationAware,
            use_ram: true,
            use_ral: true,
            concat_cap: 4,
            lr: 0.001,
            eps: ADAGRAD_EPS,
            seed: 0,
        }
    }
}

/// MLP widths used when the desk-scale flag is set.
pub const DESK_SCALE_MLP: [usize; 3] = [64, 32, 16];

impl ModelConfig {
    /// `L = 2n + 1` for an item neighbor depth of `n` hops in the KG.
    pub fn layers_for_depth(depth: usize) -> usize {
        2 * depth + 1
    }

    /// Width of a node state after `layer` extractor layers: `d · 2^layer`.
    pub fn state_dim(&self, layer: usize) -> usize {
        self.dim << layer
    }

    /// Width of the final relational representations.
    pub fn repr_dim(&self) -> usize {
        match self.kind {
            ModelKind::Atbrg => self.state_dim(self.layers),
            ModelKind::BehaviorMlp => self.dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.layers == 0 {
            return fail("layers must be at least 1");
        }
        if self.layers > 16 {
            return fail("layers above 16 overflow the state width");
        }
        if self.mlp_dims.is_empty() || self.mlp_dims.contains(&0) {
            return fail("mlp_dims must be non-empty with positive widths");
        }
        if self.max_behaviors == 0 {
            return fail("max_behaviors must be at least 1");
        }
        if self.concat_cap == 0 {
            return fail("concat_cap must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return fail("eps must be non-negative");
        }
        Ok(())
    }

    /// The relation embedding enters the attention logit only for the
    /// relation-aware aggregator with the relation-aware mechanism on.
    pub fn uses_relations(&self) -> bool {
        self.kind == ModelKind::Atbrg && self.aggregator == Aggregator::RelationAware && self.use_ram
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ModelConfig::default();
        assert_eq!(c.dim, 4);
        assert_eq!(c.layers, ModelConfig::layers_for_depth(2));
        assert_eq!(c.mlp_dims, vec![512, 256, 128]);
        assert_eq!(c.repr_dim(), 128);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        for c in [
            ModelConfig { dim: 0, ..Default::default() },
            ModelConfig { layers: 0, ..Default::default() },
            ModelConfig { mlp_dims: vec![], ..Default::default() },
            ModelConfig { lr: 0.0, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn json_uses_kebab_case_and_defaults() {
        let c: ModelConfig = serde_json::from_str(r#"{"aggregator": "self-attention", "layers": 3}"#).unwrap();
        assert_eq!(c.aggregator, Aggregator::SelfAttention);
        assert_eq!(c.layers, 3);
        assert_eq!(c.dim, 4);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"layer": 3}"#).is_err());
    }
}
