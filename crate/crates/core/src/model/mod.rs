//! The recommendation network.
//!
//! Graph nodes start from their entity embedding (items enter through their
//! anchor entity). Each extractor layer concatenates a node's state with an
//! attention-weighted sum of its neighbors' states, so the width doubles per
//! layer. The representation activation layer attends over behavior
//! representations keyed by the target's, and an MLP over
//! `x_u ⊕ x_i ⊕ x̃_u ⊕ x̃_i` produces the click probability.

mod config;
mod profile;

pub use config::{Aggregator, ModelConfig, ModelKind, DESK_SCALE_MLP};
pub use profile::{embed_profile, DenseStats, FeatureSchema, Profile, ProfileStats, SideSchema, STD_FLOOR};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId};
use crate::params::{ParamId, ParameterStore};
use crate::subgraph::LayeredView;
use crate::tape::{NodeId, Tape};
use crate::tensor::DenseArray;

/// Negative-side slope of the self-attention aggregator's LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Everything the network reads for one `(user, target)` sample.
#[derive(Clone, Copy, Debug)]
pub struct SampleInput<'a> {
    pub user: &'a Profile,
    pub item: &'a Profile,
    pub target: EntityId,
    /// Anchor entities of the behaviors, most recent first, already capped.
    pub behaviors: &'a [EntityId],
    /// Required by the graph model; ignored by the baseline.
    pub view: Option<&'a LayeredView>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    Uniform,
    Zeros,
}

#[derive(Clone, Debug, Default)]
struct LayerParams {
    f_w: Option<ParamId>,
    f_b: Option<ParamId>,
    w_alpha: Option<ParamId>,
    proj: Option<ParamId>,
    sa: Option<ParamId>,
    agg_w: Option<ParamId>,
    agg_b: Option<ParamId>,
}

/// Attention weights recorded by one extractor layer: `(node, α node)` for
/// each node whose neighbor weights were computed.
pub type LayerAttention = Vec<(EntityId, NodeId)>;

/// Output of the stacked extractor layers.
#[derive(Clone, Debug)]
pub struct RelationalRepr {
    pub target: NodeId,
    pub behaviors: Vec<NodeId>,
    pub attention: Vec<LayerAttention>,
}

/// Intermediate nodes of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub prob: NodeId,
    pub user_profile: NodeId,
    pub item_profile: NodeId,
    pub user_repr: NodeId,
    pub target_repr: NodeId,
    pub behavior_reprs: Vec<NodeId>,
    pub beta: Option<NodeId>,
    pub attention: Vec<LayerAttention>,
}

#[derive(Clone, Debug)]
pub struct Model {
    cfg: ModelConfig,
    schema: FeatureSchema,
    user_tables: Vec<ParamId>,
    item_tables: Vec<ParamId>,
    entity: ParamId,
    relation: Option<ParamId>,
    layers: Vec<LayerParams>,
    w_beta: Option<ParamId>,
    mlp: Vec<(ParamId, ParamId)>,
    out: (ParamId, ParamId),
}

fn declare(
    cfg: &ModelConfig,
    schema: &FeatureSchema,
    num_entities: usize,
    num_relations: usize,
) -> Vec<(String, Vec<usize>, Init)> {
    let d = cfg.dim;
    let mut out = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, init| out.push((name, shape, init));

    for (k, &v) in schema.user.sparse_vocab.iter().enumerate() {
        add(format!("user.sparse.{k}"), vec![v, d], Init::Uniform);
    }
    for (k, &v) in schema.item.sparse_vocab.iter().enumerate() {
        add(format!("item.sparse.{k}"), vec![v, d], Init::Uniform);
    }
    add("entity".into(), vec![num_entities, d], Init::Uniform);

    if cfg.kind == ModelKind::Atbrg {
        if cfg.uses_relations() {
            add("relation".into(), vec![num_relations, d], Init::Uniform);
        }
        for l in 0..cfg.layers {
            let width = cfg.state_dim(l);
            match cfg.aggregator {
                Aggregator::RelationAware => {
                    add(format!("layer{l}.f.w"), vec![d, 2 * width], Init::Uniform);
                    add(format!("layer{l}.f.b"), vec![d], Init::Zeros);
                    if cfg.use_ram {
                        add(format!("layer{l}.w_alpha"), vec![d, d], Init::Uniform);
                    } else {
                        add(format!("layer{l}.proj"), vec![d], Init::Uniform);
                    }
                }
                Aggregator::SelfAttention => {
                    add(format!("layer{l}.sa"), vec![2 * width], Init::Uniform);
                }
                Aggregator::Concat => {
                    add(format!("layer{l}.agg.w"), vec![width, cfg.concat_cap * width], Init::Uniform);
                    add(format!("layer{l}.agg.b"), vec![width], Init::Zeros);
                }
                Aggregator::Nonlinear => {
                    add(format!("layer{l}.agg.w"), vec![width, width], Init::Uniform);
                    add(format!("layer{l}.agg.b"), vec![width], Init::Zeros);
                }
                Aggregator::Sum => {}
            }
        }
        let repr = cfg.repr_dim();
        if cfg.use_ral {
            add("w_beta".into(), vec![repr, repr], Init::Uniform);
        }
    }

    let mut width = schema.user.embedded_len(d) + schema.item.embedded_len(d) + 2 * cfg.repr_dim();
    for (k, &h) in cfg.mlp_dims.iter().enumerate() {
        add(format!("mlp{k}.w"), vec![h, width], Init::Uniform);
        add(format!("mlp{k}.b"), vec![h], Init::Zeros);
        width = h;
    }
    add("out.w".into(), vec![1, width], Init::Uniform);
    add("out.b".into(), vec![1], Init::Zeros);
    out
}

impl Model {
    /// Creates the parameters for `cfg`, initialized from `cfg.seed`.
    pub fn init(
        cfg: &ModelConfig,
        schema: &FeatureSchema,
        num_entities: usize,
        num_relations: usize,
    ) -> Result<(Model, ParameterStore)> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut store = ParameterStore::new();
        for (name, shape, init) in declare(cfg, schema, num_entities, num_relations) {
            match init {
                Init::Uniform => store.add_uniform(&name, shape, &mut rng)?,
                Init::Zeros => store.add_zeros(&name, shape)?,
            };
        }
        let model = Model::bind(cfg, schema, &store)?;
        Ok((model, store))
    }

    /// Resolves parameter handles in an existing store, checking every shape.
    pub fn bind(cfg: &ModelConfig, schema: &FeatureSchema, store: &ParameterStore) -> Result<Model> {
        cfg.validate()?;
        let num_entities = store.value(store.id("entity")?).shape()[0];
        let num_relations = match store.id("relation") {
            Ok(id) => store.value(id).shape()[0],
            Err(_) => 0,
        };
        for (name, shape, _) in declare(cfg, schema, num_entities, num_relations) {
            let got = store.value(store.id(&name)?).shape();
            if got != shape.as_slice() {
                return Err(Error::Shape(format!(
                    "parameter {name:?} has shape {got:?}, expected {shape:?}"
                )));
            }
        }
        let opt = |name: String| store.id(&name).ok();
        let layers = (0..cfg.layers)
            .map(|l| LayerParams {
                f_w: opt(format!("layer{l}.f.w")),
                f_b: opt(format!("layer{l}.f.b")),
                w_alpha: opt(format!("layer{l}.w_alpha")),
                proj: opt(format!("layer{l}.proj")),
                sa: opt(format!("layer{l}.sa")),
                agg_w: opt(format!("layer{l}.agg.w")),
                agg_b: opt(format!("layer{l}.agg.b")),
            })
            .collect();
        Ok(Model {
            cfg: cfg.clone(),
            schema: schema.clone(),
            user_tables: (0..schema.user.sparse_vocab.len())
                .map(|k| store.id(&format!("user.sparse.{k}")))
                .collect::<Result<_>>()?,
            item_tables: (0..schema.item.sparse_vocab.len())
                .map(|k| store.id(&format!("item.sparse.{k}")))
                .collect::<Result<_>>()?,
            entity: store.id("entity")?,
            relation: opt("relation".into()),
            layers,
            w_beta: opt("w_beta".into()),
            mlp: (0..cfg.mlp_dims.len())
                .map(|k| Ok((store.id(&format!("mlp{k}.w"))?, store.id(&format!("mlp{k}.b"))?)))
                .collect::<Result<_>>()?,
            out: (store.id("out.w")?, store.id("out.b")?),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn entity_embedding(&self, tape: &mut Tape, store: &ParameterStore, e: EntityId) -> Result<NodeId> {
        let table = tape.param(store, self.entity);
        tape.gather(table, e.index())
    }

    fn zeros(tape: &mut Tape, len: usize) -> NodeId {
        tape.input(DenseArray::zeros(vec![len]))
    }

    fn edge_logit(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        p: &LayerParams,
        head: NodeId,
        relation: RelationId,
        tail: NodeId,
    ) -> Result<NodeId> {
        let pair = tape.concat(&[head, tail])?;
        if self.cfg.aggregator == Aggregator::SelfAttention {
            let a = tape.param(store, p.sa.unwrap());
            let s = tape.dot(a, pair)?;
            return tape.leaky_relu(s, LEAKY_SLOPE);
        }
        let fw = tape.param(store, p.f_w.unwrap());
        let fb = tape.param(store, p.f_b.unwrap());
        let pre = tape.affine(fw, pair, Some(fb))?;
        let f = tape.tanh(pre)?;
        match (p.w_alpha, self.relation) {
            (Some(wa), Some(rel)) => {
                let wa = tape.param(store, wa);
                let projected = tape.affine(wa, f, None)?;
                let table = tape.param(store, rel);
                let xr = tape.gather(table, relation.index())?;
                tape.dot(xr, projected)
            }
            _ => {
                let w = tape.param(store, p.proj.unwrap());
                tape.dot(w, f)
            }
        }
    }

    /// One extractor layer over every node of `view`, updated simultaneously.
    ///
    /// `states[k]` is the state of `view.nodes()[k]`. Returns the next states and
    /// the attention weights of each node with a non-empty neighbor list (for
    /// the attention aggregators).
    pub fn extractor_layer(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        view: &LayeredView,
        layer: usize,
        states: &[NodeId],
    ) -> Result<(Vec<NodeId>, LayerAttention)> {
        if states.len() != view.nodes().len() {
            return Err(Error::Shape(format!(
                "{} states for {} view nodes",
                states.len(),
                view.nodes().len()
            )));
        }
        let p = self
            .layers
            .get(layer)
            .ok_or_else(|| Error::Contract(format!("layer {layer} out of range")))?;
        let width = self.cfg.state_dim(layer);
        for &s in states {
            if tape.value(s).len() != width {
                return Err(Error::Shape(format!(
                    "layer {layer} state of length {}, expected {width}",
                    tape.value(s).len()
                )));
            }
        }

        let mut next = Vec::with_capacity(states.len());
        let mut attention = Vec::new();
        for (k, &node) in view.nodes().iter().enumerate() {
            let neighbors = view.neighbors_at(k);
            let head = states[k];
            let message = if neighbors.is_empty() {
                Self::zeros(tape, width)
            } else {
                let mut tails = Vec::with_capacity(neighbors.len());
                for &(_, t) in neighbors {
                    let pos = view
                        .position(t)
                        .ok_or_else(|| Error::Lookup(format!("neighbor {t} is not a view node")))?;
                    tails.push(states[pos]);
                }
                match self.cfg.aggregator {
                    Aggregator::RelationAware | Aggregator::SelfAttention => {
                        let mut logits = Vec::with_capacity(tails.len());
                        for (&(r, _), &tail) in neighbors.iter().zip(&tails) {
                            logits.push(self.edge_logit(tape, store, p, head, r, tail)?);
                        }
                        let logits = tape.stack(&logits)?;
                        let alpha = tape.masked_softmax(logits, &vec![true; tails.len()])?;
                        attention.push((node, alpha));
                        tape.weighted_sum(alpha, &tails)?
                    }
                    Aggregator::Sum => tape.sum(&tails)?,
                    Aggregator::Nonlinear => {
                        let s = tape.sum(&tails)?;
                        let w = tape.param(store, p.agg_w.unwrap());
                        let b = tape.param(store, p.agg_b.unwrap());
                        let a = tape.affine(w, s, Some(b))?;
                        tape.tanh(a)?
                    }
                    Aggregator::Concat => {
                        let cap = self.cfg.concat_cap;
                        let mut slots: Vec<NodeId> = tails.iter().take(cap).copied().collect();
                        while slots.len() < cap {
                            slots.push(Self::zeros(tape, width));
                        }
                        let joined = tape.concat(&slots)?;
                        let w = tape.param(store, p.agg_w.unwrap());
                        let b = tape.param(store, p.agg_b.unwrap());
                        tape.affine(w, joined, Some(b))?
                    }
                }
            };
            next.push(tape.concat(&[head, message])?);
        }
        Ok((next, attention))
    }

    /// Runs all `L` extractor layers and reads off the target and behavior states.
    pub fn relational_repr(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        view: &LayeredView,
        target: EntityId,
        behaviors: &[EntityId],
    ) -> Result<RelationalRepr> {
        if view.layers() != self.cfg.layers {
            return Err(Error::Contract(format!(
                "view has {} layers, model has {}",
                view.layers(),
                self.cfg.layers
            )));
        }
        let mut states = Vec::with_capacity(view.nodes().len());
        for &n in view.nodes() {
            states.push(self.entity_embedding(tape, store, n)?);
        }
        let mut attention = Vec::with_capacity(self.cfg.layers);
        for l in 0..self.cfg.layers {
            let (next, att) = self.extractor_layer(tape, store, view, l, &states)?;
            states = next;
            attention.push(att);
        }
        let read = |tape: &mut Tape, e: EntityId| -> Result<NodeId> {
            match view.position(e) {
                Some(k) => Ok(states[k]),
                None => {
                    // Not in the subgraph: the embedding followed by L empty messages.
                    let mut parts = vec![self.entity_embedding(tape, store, e)?];
                    for l in 0..self.cfg.layers {
                        parts.push(Self::zeros(tape, self.cfg.state_dim(l)));
                    }
                    tape.concat(&parts)
                }
            }
        };
        let target_repr = read(tape, target)?;
        let behavior_reprs = behaviors
            .iter()
            .map(|&b| read(tape, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(RelationalRepr {
            target: target_repr,
            behaviors: behavior_reprs,
            attention,
        })
    }

    /// Attention over behavior representations keyed by the target's, or the
    /// plain mean when the activation layer is disabled. Masked behaviors are
    /// excluded. Returns `x̃_u` and the β node, if any.
    pub fn activation_layer(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        behaviors: &[NodeId],
        target: NodeId,
        mask: &[bool],
    ) -> Result<(NodeId, Option<NodeId>)> {
        if mask.len() != behaviors.len() {
            return Err(Error::Shape(format!(
                "mask of length {} for {} behaviors",
                mask.len(),
                behaviors.len()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Contract("activation layer needs at least one behavior".into()));
        }
        match self.w_beta {
            Some(wb) if self.cfg.use_ral => {
                let wb = tape.param(store, wb);
                let keyed = tape.affine(wb, target, None)?;
                let mut logits = Vec::with_capacity(behaviors.len());
                for &b in behaviors {
                    logits.push(tape.dot(b, keyed)?);
                }
                let logits = tape.stack(&logits)?;
                let beta = tape.masked_softmax(logits, mask)?;
                Ok((tape.weighted_sum(beta, behaviors)?, Some(beta)))
            }
            _ => {
                let kept: Vec<NodeId> = behaviors
                    .iter()
                    .zip(mask)
                    .filter(|(_, &m)| m)
                    .map(|(b, _)| *b)
                    .collect();
                Ok((tape.mean(&kept)?, None))
            }
        }
    }

    /// `σ(MLP(x_u ⊕ x_i ⊕ x̃_u ⊕ x̃_i))` with tanh hidden layers.
    pub fn predict(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        user: NodeId,
        item: NodeId,
        user_repr: NodeId,
        target_repr: NodeId,
    ) -> Result<NodeId> {
        let mut h = tape.concat(&[user, item, user_repr, target_repr])?;
        for &(w, b) in &self.mlp {
            let w = tape.param(store, w);
            let b = tape.param(store, b);
            let a = tape.affine(w, h, Some(b))?;
            h = tape.tanh(a)?;
        }
        let w = tape.param(store, self.out.0);
        let b = tape.param(store, self.out.1);
        let logit = tape.affine(w, h, Some(b))?;
        tape.sigmoid(logit)
    }

    /// Full forward pass for one sample.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        input: &SampleInput<'_>,
        stats: &ProfileStats,
    ) -> Result<Forward> {
        let user_profile = embed_profile(tape, store, &self.user_tables, &self.schema.user, input.user, &stats.user)?;
        let item_profile = embed_profile(tape, store, &self.item_tables, &self.schema.item, input.item, &stats.item)?;
        let behaviors = &input.behaviors[..input.behaviors.len().min(self.cfg.max_behaviors)];
        let repr = self.cfg.repr_dim();

        let (target_repr, behavior_reprs, attention, user_repr, beta) = match self.cfg.kind {
            ModelKind::Atbrg => {
                let view = input
                    .view
                    .ok_or_else(|| Error::Contract("graph model needs a layered view".into()))?;
                let rr = self.relational_repr(tape, store, view, input.target, behaviors)?;
                let (user_repr, beta) = if rr.behaviors.is_empty() {
                    (Self::zeros(tape, repr), None)
                } else {
                    let mask = vec![true; rr.behaviors.len()];
                    self.activation_layer(tape, store, &rr.behaviors, rr.target, &mask)?
                };
                (rr.target, rr.behaviors, rr.attention, user_repr, beta)
            }
            ModelKind::BehaviorMlp => {
                let target_repr = self.entity_embedding(tape, store, input.target)?;
                let mut reprs = Vec::with_capacity(behaviors.len());
                for &b in behaviors {
                    reprs.push(self.entity_embedding(tape, store, b)?);
                }
                let user_repr = if reprs.is_empty() {
                    Self::zeros(tape, repr)
                } else {
                    tape.mean(&reprs)?
                };
                (target_repr, reprs, Vec::new(), user_repr, None)
            }
        };

        let prob = self.predict(tape, store, user_profile, item_profile, user_repr, target_repr)?;
        Ok(Forward {
            prob,
            user_profile,
            item_profile,
            user_repr,
            target_repr,
            behavior_reprs,
            beta,
            attention,
        })
    }
}
