//! Training loop, evaluation, negative sampling and ablation runs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{write_string, Dataset, Sample};
use crate::error::{Error, Result};
use crate::kg::{EntityId, ItemId, KnowledgeGraph};
use crate::metrics;
use crate::model::{
    Aggregator, DenseStats, FeatureSchema, Model, ModelConfig, ModelKind, Profile, ProfileStats, SampleInput,
    DESK_SCALE_MLP,
};
use crate::params::{ParamGrads, ParameterStore};
use crate::subgraph::{build, layered_view, ExtractParams, LayeredView, RelationalSubgraph};
use crate::tape::Tape;

/// Run-level settings wrapped around a [`ModelConfig`]. This is `cfg.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// KG hops explored from each anchor during extraction.
    pub depth: usize,
    /// Per-node expansion limit during extraction.
    pub fanout: usize,
    /// Independent runs (seeds `seed`, `seed + 1`, …) whose test AUCs are averaged.
    pub repeats: usize,
    /// Drop the target item from its own behavior list.
    pub dedupe_target: bool,
    /// Replace the MLP widths with [`DESK_SCALE_MLP`].
    pub desk_scale: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            epochs: 5,
            batch_size: 64,
            depth: 2,
            fanout: 32,
            repeats: 1,
            dedupe_target: false,
            desk_scale: false,
        }
    }
}

impl TrainConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.fanout == 0 {
            return Err(Error::Config("fanout must be at least 1".into()));
        }
        Ok(())
    }

    pub fn extract_params(&self) -> ExtractParams {
        ExtractParams::new(self.depth, self.fanout)
    }

    /// The model configuration after the desk-scale override.
    pub fn effective_model(&self) -> ModelConfig {
        let mut m = self.model.clone();
        if self.desk_scale {
            m.mlp_dims = DESK_SCALE_MLP.to_vec();
        }
        m
    }

    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        let mut c = self.clone();
        c.model.seed = seed;
        c
    }

    /// The behavior list fed to the network for `sample`.
    pub fn behaviors_of(&self, sample: &Sample) -> Vec<ItemId> {
        let mut b = if self.dedupe_target {
            sample.deduped_behaviors()
        } else {
            sample.behaviors.clone()
        };
        b.truncate(self.model.max_behaviors);
        b
    }
}

/// One extracted subgraph with its layered view.
#[derive(Clone, Debug)]
pub struct Extracted {
    pub sub: RelationalSubgraph,
    pub view: LayeredView,
}

/// Subgraphs keyed by `(target, behaviors)` for a fixed depth, fanout and layer count.
#[derive(Clone, Debug)]
pub struct SubgraphCache {
    params: ExtractParams,
    layers: usize,
    map: HashMap<(ItemId, Vec<ItemId>), Arc<Extracted>>,
}

impl SubgraphCache {
    pub fn new(params: ExtractParams, layers: usize) -> Self {
        SubgraphCache {
            params,
            layers,
            map: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Extracts every missing key, in parallel.
    pub fn prepare(&mut self, kg: &KnowledgeGraph, keys: impl IntoIterator<Item = (ItemId, Vec<ItemId>)>) -> Result<()> {
        let missing: Vec<(ItemId, Vec<ItemId>)> = keys
            .into_iter()
            .filter(|k| !self.map.contains_key(k))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let (params, layers) = (self.params, self.layers);
        let built: Vec<Extracted> = missing
            .par_iter()
            .map(|(t, b)| {
                // Depth 0 keeps only the anchors: every node falls back to its own embedding.
                let sub = if params.max_depth == 0 {
                    RelationalSubgraph {
                        target: *t,
                        behaviors: b.clone(),
                        ..Default::default()
                    }
                } else {
                    build(kg, *t, b, params)?
                };
                let view = layered_view(&sub, layers)?;
                Ok(Extracted { sub, view })
            })
            .collect::<Result<_>>()?;
        for (key, e) in missing.into_iter().zip(built) {
            self.map.insert(key, Arc::new(e));
        }
        Ok(())
    }

    pub fn get(&self, target: ItemId, behaviors: &[ItemId]) -> Option<&Arc<Extracted>> {
        self.map.get(&(target, behaviors.to_vec()))
    }
}

/// A trained network with everything needed to score new samples.
#[derive(Clone, Debug)]
pub struct Trained {
    pub config: TrainConfig,
    pub model: Model,
    pub store: ParameterStore,
    pub stats: ProfileStats,
    pub epoch_loss: Vec<f64>,
}

/// Serialized form of [`Trained`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub schema: FeatureSchema,
    pub stats: ProfileStats,
    /// Parameter name → `{shape, values, accum}`.
    pub params: serde_json::Value,
}

impl Trained {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            schema: self.model.schema().clone(),
            stats: self.stats.clone(),
            params: self.store.to_json_value(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let store = ParameterStore::from_json_value(ckpt.params)?;
        let model = Model::bind(&ckpt.config.effective_model(), &ckpt.schema, &store)?;
        Ok(Trained {
            config: ckpt.config,
            model,
            store,
            stats: ckpt.stats,
            epoch_loss: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_string(path.as_ref(), &(serde_json::to_string(&self.checkpoint())? + "\n"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        Self::from_checkpoint(ckpt)
    }

    /// Click probabilities for `samples`, in order.
    pub fn predict(&self, ds: &Dataset, samples: &[Sample], cache: &mut SubgraphCache) -> Result<Vec<f64>> {
        let scorer = Scorer::new(self, ds, cache, samples)?;
        samples
            .par_iter()
            .map(|s| {
                let mut tape = Tape::new();
                let p = scorer.prob(&mut tape, &self.store, s)?;
                Ok(tape.value(p).values()[0])
            })
            .collect()
    }

    /// Test AUC on `samples`.
    pub fn evaluate(&self, ds: &Dataset, samples: &[Sample], cache: &mut SubgraphCache) -> Result<f64> {
        let scores = self.predict(ds, samples, cache)?;
        let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
        metrics::auc(&scores, &labels)
    }

    pub fn new_cache(&self) -> SubgraphCache {
        SubgraphCache::new(self.config.extract_params(), self.config.model.layers)
    }
}

/// Read-only context for scoring samples.
struct Scorer<'a> {
    trained: &'a Trained,
    ds: &'a Dataset,
    cache: &'a SubgraphCache,
}

impl<'a> Scorer<'a> {
    fn new(trained: &'a Trained, ds: &'a Dataset, cache: &'a mut SubgraphCache, samples: &[Sample]) -> Result<Self> {
        if trained.model.config().kind == ModelKind::Atbrg {
            let cfg = &trained.config;
            cache.prepare(&ds.kg, samples.iter().map(|s| (s.target, cfg.behaviors_of(s))))?;
        }
        Ok(Scorer { trained, ds, cache })
    }

    fn prob(&self, tape: &mut Tape, store: &ParameterStore, s: &Sample) -> Result<crate::tape::NodeId> {
        let cfg = &self.trained.config;
        let behaviors = cfg.behaviors_of(s);
        let entities: Vec<EntityId> = behaviors
            .iter()
            .map(|&b| self.ds.kg.align(b))
            .collect::<Result<_>>()?;
        let extracted = match self.trained.model.config().kind {
            ModelKind::Atbrg => Some(self.cache.get(s.target, &behaviors).ok_or_else(|| {
                Error::Contract(format!("no cached subgraph for target {}", s.target))
            })?),
            ModelKind::BehaviorMlp => None,
        };
        let input = SampleInput {
            user: profile(&self.ds.users, s.user, "user")?,
            item: profile(&self.ds.items, s.target, "item")?,
            target: self.ds.kg.align(s.target)?,
            behaviors: &entities,
            view: extracted.map(|e| &e.view),
        };
        Ok(self.trained.model.forward(tape, store, &input, &self.trained.stats)?.prob)
    }
}

fn profile<'a>(profiles: &'a [Profile], id: usize, side: &str) -> Result<&'a Profile> {
    profiles
        .get(id)
        .ok_or_else(|| Error::Lookup(format!("unknown {side} id {id}")))
}

/// Dense statistics over the distinct users and items of the training split.
pub fn fit_stats(ds: &Dataset, train: &[Sample]) -> ProfileStats {
    let users: BTreeSet<usize> = train.iter().map(|s| s.user).collect();
    let items: BTreeSet<usize> = train.iter().map(|s| s.target).collect();
    ProfileStats {
        user: DenseStats::fit(
            ds.schema.user.dense,
            users.iter().filter_map(|&u| ds.users.get(u)),
        ),
        item: DenseStats::fit(
            ds.schema.item.dense,
            items.iter().filter_map(|&i| ds.items.get(i)),
        ),
    }
}

/// Fresh parameters for `cfg` over the dataset's KG and schema.
pub fn initialize(ds: &Dataset, cfg: &TrainConfig, train: &[Sample]) -> Result<Trained> {
    cfg.validate()?;
    let (model, store) = Model::init(
        &cfg.effective_model(),
        &ds.schema.features(),
        ds.kg.num_entities(),
        ds.kg.num_relations(),
    )?;
    Ok(Trained {
        config: cfg.clone(),
        model,
        store,
        stats: fit_stats(ds, train),
        epoch_loss: Vec::new(),
    })
}

/// Mini-batch Adagrad on the mean binary cross-entropy.
///
/// Per-sample gradients are computed in parallel and summed in sample order,
/// so results do not depend on the thread count.
pub fn train(ds: &Dataset, train: &[Sample], cfg: &TrainConfig) -> Result<Trained> {
    let mut trained = initialize(ds, cfg, train)?;
    let mut cache = trained.new_cache();
    train_more(&mut trained, ds, train, &mut cache, cfg.epochs)?;
    Ok(trained)
}

/// Continues training `trained` for `epochs` more epochs.
pub fn train_more(
    trained: &mut Trained,
    ds: &Dataset,
    train: &[Sample],
    cache: &mut SubgraphCache,
    epochs: usize,
) -> Result<()> {
    if train.is_empty() || epochs == 0 {
        return Ok(());
    }
    let cfg = trained.config.clone();
    let mcfg = trained.model.config().clone();
    for _ in 0..epochs {
        // One shuffle stream per epoch, independent of the parameter-init
        // stream, so a resumed run replays the same orders.
        let mut rng = ChaCha8Rng::seed_from_u64(mcfg.seed ^ 0x5eed_5eed_5eed_5eed);
        rng.set_stream(trained.epoch_loss.len() as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            if mcfg.kind == ModelKind::Atbrg {
                cache.prepare(
                    &ds.kg,
                    batch.iter().map(|&k| (train[k].target, cfg.behaviors_of(&train[k]))),
                )?;
            }
            let scorer = Scorer {
                trained,
                ds,
                cache,
            };
            let per_sample: Vec<(f64, ParamGrads)> = batch
                .par_iter()
                .map(|&k| {
                    let s = &train[k];
                    let mut tape = Tape::new();
                    let p = scorer.prob(&mut tape, &trained.store, s)?;
                    let loss = tape.bce(p, &[s.label as f64])?;
                    let value = tape.value(loss).values()[0];
                    Ok((value, tape.backward(loss)?.into_param_grads()))
                })
                .collect::<Result<_>>()?;

            let scale = 1.0 / batch.len() as f64;
            let mut grads = ParamGrads::new();
            let mut batch_loss = 0.0;
            for (value, g) in per_sample {
                batch_loss += value;
                for (id, v) in g {
                    let acc = grads.entry(id).or_insert_with(|| vec![0.0; v.len()]);
                    for (a, x) in acc.iter_mut().zip(&v) {
                        *a += x * scale;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss in epoch {} batch {b}",
                    trained.epoch_loss.len() + 1
                )));
            }
            total += batch_loss;
            trained.store.adagrad_step(&grads, mcfg.lr, mcfg.eps)?;
        }
        trained.epoch_loss.push(total / train.len() as f64);
    }
    Ok(())
}

/// Serialized training summary. Wall time is kept out of the JSON so that
/// identical runs write identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub config: TrainConfig,
    /// Mean training loss per epoch of the checkpointed (first) run.
    pub epoch_loss: Vec<f64>,
    /// Test AUC of the checkpointed run.
    pub test_auc: f64,
    /// Test AUC of every repeat, first one included.
    pub repeat_aucs: Vec<f64>,
    pub mean_test_auc: f64,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Trains `cfg.repeats` models on `ds.train`, scores `ds.test`, and returns
/// the first model with the report.
pub fn fit(ds: &Dataset, cfg: &TrainConfig) -> Result<(Trained, TrainReport)> {
    let start = Instant::now();
    cfg.validate()?;
    let seed = cfg.model.seed;
    let mut first = None;
    let mut aucs = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let run_cfg = cfg.with_seed(seed.wrapping_add(r as u64));
        let trained = train(ds, &ds.train, &run_cfg)?;
        let mut cache = trained.new_cache();
        aucs.push(trained.evaluate(ds, &ds.test, &mut cache)?);
        if first.is_none() {
            first = Some(trained);
        }
    }
    let trained = first.expect("repeats >= 1");
    let report = TrainReport {
        seed,
        config: cfg.clone(),
        epoch_loss: trained.epoch_loss.clone(),
        test_auc: aucs[0],
        mean_test_auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
        repeat_aucs: aucs,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((trained, report))
}

/// Pairs each positive with `k` negatives drawn uniformly from the items the
/// user never engaged with (neither as a target nor as a behavior).
///
/// Output order: each positive followed by its negatives.
pub fn negative_sample(positives: &[Sample], universe: &[ItemId], k: usize, seed: u64) -> Result<Vec<Sample>> {
    if k == 0 {
        return Err(Error::Contract("need at least one negative per positive".into()));
    }
    let mut engaged: BTreeMap<usize, BTreeSet<ItemId>> = BTreeMap::new();
    for s in positives {
        let set = engaged.entry(s.user).or_default();
        set.insert(s.target);
        set.extend(&s.behaviors);
    }
    let universe: BTreeSet<ItemId> = universe.iter().copied().collect();
    let mut candidates: BTreeMap<usize, Vec<ItemId>> = BTreeMap::new();
    for (&user, set) in &engaged {
        let c: Vec<ItemId> = universe.difference(set).copied().collect();
        if c.is_empty() {
            return Err(Error::Sampling(format!("user {user} engaged with every item")));
        }
        candidates.insert(user, c);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(positives.len() * (k + 1));
    for s in positives {
        out.push(Sample { label: 1, ..s.clone() });
        let c = &candidates[&s.user];
        for _ in 0..k {
            out.push(Sample {
                user: s.user,
                target: c[rng.gen_range(0..c.len())],
                behaviors: s.behaviors.clone(),
                label: 0,
            });
        }
    }
    Ok(out)
}

/// One row of an ablation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub config: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub auc: f64,
    pub repeat_aucs: Vec<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn auc_of(&self, variant: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.variant == variant).map(|r| r.auc)
    }

    /// Aligned text table, one row per variant.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.variant.chars().count())
            .chain(["Model".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>6}  {:>8}", "Model", "AUC", "Time(s)");
        for r in &self.rows {
            let _ = writeln!(out, "{:<width$}  {:>6.4}  {:>8.2}", r.variant, r.auc, r.seconds);
        }
        out
    }
}

/// Named ablation grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Full model against the behavior-only MLP.
    Baseline,
    /// Full model, without the relation-aware mechanism, without the activation layer.
    Components,
    /// Item neighbor depth n ∈ {0, 1, 2} with L = 2n + 1.
    Depth,
    /// The five neighbor aggregators.
    Aggregator,
}

pub const FULL: &str = "ATBRG";
pub const NO_RAM: &str = "ATBRG_{w/o RAM}";
pub const NO_RAL: &str = "ATBRG_{w/o RAL}";
pub const BEHAVIOR_MLP: &str = "BehaviorMLP";

pub fn preset_grid(preset: Preset, base: &TrainConfig) -> Vec<Variant> {
    let variant = |name: String, f: &dyn Fn(&mut TrainConfig)| {
        let mut config = base.clone();
        f(&mut config);
        Variant { name, config }
    };
    match preset {
        Preset::Baseline => vec![
            variant(FULL.into(), &|_| {}),
            variant(BEHAVIOR_MLP.into(), &|c| c.model.kind = ModelKind::BehaviorMlp),
        ],
        Preset::Components => vec![
            variant(FULL.into(), &|_| {}),
            variant(NO_RAM.into(), &|c| c.model.use_ram = false),
            variant(NO_RAL.into(), &|c| c.model.use_ral = false),
        ],
        Preset::Depth => (0..3)
            .map(|n| {
                let layers = ModelConfig::layers_for_depth(n);
                variant(format!("ATBRG_{{{layers}/{n}}}"), &|c| {
                    c.depth = n;
                    c.model.layers = layers;
                })
            })
            .collect(),
        Preset::Aggregator => [
            Aggregator::Concat,
            Aggregator::Sum,
            Aggregator::SelfAttention,
            Aggregator::Nonlinear,
            Aggregator::RelationAware,
        ]
        .into_iter()
        .map(|a| {
            let name = if a == Aggregator::RelationAware {
                FULL.to_string()
            } else {
                format!("ATBRG_{{{}}}", a.label())
            };
            variant(name, &move |c| c.model.aggregator = a)
        })
        .collect(),
    }
}

/// Trains and evaluates every variant on the same splits.
pub fn run_ablation(grid: &[Variant], ds: &Dataset) -> Result<AblationTable> {
    let mut rows = Vec::with_capacity(grid.len());
    for v in grid {
        let start = Instant::now();
        let (_, report) = fit(ds, &v.config)?;
        rows.push(AblationRow {
            variant: v.name.clone(),
            auc: report.mean_test_auc,
            repeat_aucs: report.repeat_aucs,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(AblationTable { rows })
}

/// Node-count analysis over a set of samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeCountAnalysis {
    pub buckets: Vec<metrics::CtrBucket>,
    /// Spearman correlation of (node count, CTR) over buckets with enough support.
    pub spearman: Option<f64>,
    pub min_support: usize,
}

impl NodeCountAnalysis {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("node_count\tctr\tsupport\n");
        for b in &self.buckets {
            let _ = writeln!(out, "{}\t{}\t{}", b.node_count, b.ctr, b.support);
        }
        out
    }

    /// Whitespace-separated columns with a `#` header, readable by gnuplot.
    pub fn to_gnuplot(&self) -> String {
        let mut out = String::from("# node_count ctr support\n");
        for b in &self.buckets {
            let _ = writeln!(out, "{} {} {}", b.node_count, b.ctr, b.support);
        }
        out
    }
}

/// Buckets `samples` by subgraph node count and correlates bucket with CTR.
pub fn analyze(
    kg: &KnowledgeGraph,
    samples: &[Sample],
    params: ExtractParams,
    dedupe_target: bool,
    min_support: usize,
) -> Result<NodeCountAnalysis> {
    let counts: Vec<usize> = samples
        .par_iter()
        .map(|s| {
            let behaviors = if dedupe_target {
                s.deduped_behaviors()
            } else {
                s.behaviors.clone()
            };
            Ok(build(kg, s.target, &behaviors, params)?.node_count)
        })
        .collect::<Result<_>>()?;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let buckets = metrics::ctr_by_node_count(&counts, &labels)?;
    let kept: Vec<&metrics::CtrBucket> = buckets.iter().filter(|b| b.support >= min_support).collect();
    let x: Vec<f64> = kept.iter().map(|b| b.node_count as f64).collect();
    let y: Vec<f64> = kept.iter().map(|b| b.ctr).collect();
    Ok(NodeCountAnalysis {
        spearman: metrics::spearman(&x, &y),
        buckets,
        min_support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positives() -> Vec<Sample> {
        vec![
            Sample {
                user: 0,
                target: 1,
                behaviors: vec![2],
                label: 1,
            },
            Sample {
                user: 1,
                target: 3,
                behaviors: vec![],
                label: 1,
            },
        ]
    }

    #[test]
    fn negative_sampling_counts_and_exclusion() {
        assert!(negative_sample(&positives(), &[0, 1, 2, 3], 0, 1).is_err());
        let out = negative_sample(&positives()[..1], &[0, 1, 2, 3, 4], 5, 1).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(out.iter().filter(|s| s.label == 1).count(), 1);
        assert!(out[1..].iter().all(|s| ![1, 2].contains(&s.target) && s.behaviors == vec![2]));
        assert!(matches!(
            negative_sample(&positives(), &[1, 2], 1, 1),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn text_table_is_aligned() {
        let t = AblationTable {
            rows: vec![
                AblationRow {
                    variant: "ATBRG".into(),
                    auc: 0.71234,
                    repeat_aucs: vec![],
                    seconds: 1.5,
                },
                AblationRow {
                    variant: NO_RAM.into(),
                    auc: 0.7,
                    repeat_aucs: vec![],
                    seconds: 12.25,
                },
            ],
        };
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
        assert!(lines[1].contains("0.7123"));
    }

    #[test]
    fn preset_shapes() {
        let base = TrainConfig::default();
        assert_eq!(preset_grid(Preset::Components, &base).len(), 3);
        let depth = preset_grid(Preset::Depth, &base);
        assert_eq!(
            depth.iter().map(|v| v.config.model.layers).collect::<Vec<_>>(),
            vec![1, 3, 5]
        );
        assert_eq!(depth[1].name, "ATBRG_{3/1}");
        assert_eq!(preset_grid(Preset::Aggregator, &base).len(), 5);
    }

    #[test]
    fn behavior_cap_and_dedupe() {
        let mut cfg = TrainConfig::default();
        cfg.model.max_behaviors = 2;
        let s = Sample {
            user: 0,
            target: 5,
            behaviors: vec![5, 1, 2, 3],
            label: 0,
        };
        assert_eq!(cfg.behaviors_of(&s), vec![5, 1]);
        cfg.dedupe_target = true;
        assert_eq!(cfg.behaviors_of(&s), vec![1, 2]);
    }
}
