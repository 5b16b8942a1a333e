//! Seeded synthetic datasets with a planted relational signal.
//!
//! Items are anchor entities `i{n}` linked to attribute entities `a{k}`
//! through relations `r{j}`. Each user owns a fixed behavior history; an
//! interaction pairs a user with a target outside that history.
//!
//! Two label models are available:
//!
//! * `overlap`: `y ~ Bernoulli(σ(s · (c − μ)))` with `c` the node count of the
//!   sample's depth-1 relational subgraph and `μ` the mean count over a
//!   1000-sample pilot draw.
//! * `relation`: every attribute has a hidden polarity `g_a = ±1` and every
//!   item a hidden quality `q_i = ±1`. The score is the mean polarity of the
//!   target's attributes reached through relation `r0` and shared with some
//!   behavior, plus the mean quality of the behaviors sharing an attribute
//!   with the target. `y ~ Bernoulli(σ(s · score))`. Telling `r0` links from
//!   the others needs the relation embedding; picking the connected
//!   behaviors needs target-keyed attention.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{write_string, Dataset, DatasetSchema, Sample};
use crate::error::{Error, Result};
use crate::kg::{ItemId, KnowledgeGraph, KnowledgeGraphBuilder};
use crate::model::{Profile, SideSchema};
use crate::subgraph::{build, ExtractParams};

/// Samples drawn to estimate `μ` in overlap mode.
pub const PILOT_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalMode {
    #[default]
    Overlap,
    Relation,
}

/// Generator settings. This is `spec.json`; ranges are inclusive `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Attribute entities (item anchors come on top).
    pub entities: usize,
    pub relations: usize,
    pub items: usize,
    pub attributes_per_item: [usize; 2],
    pub users: usize,
    pub behaviors_per_user: [usize; 2],
    pub train: usize,
    pub test: usize,
    /// Signal strength `s`.
    pub signal: f64,
    pub mode: SignalMode,
    /// Vocabulary sizes of the sparse profile fields.
    pub user_sparse_vocab: Vec<usize>,
    pub item_sparse_vocab: Vec<usize>,
    pub user_dense: usize,
    pub item_dense: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            entities: 50,
            relations: 3,
            items: 40,
            attributes_per_item: [2, 4],
            users: 200,
            behaviors_per_user: [3, 10],
            train: 2000,
            test: 600,
            signal: 4.0,
            mode: SignalMode::Overlap,
            user_sparse_vocab: vec![3],
            item_sparse_vocab: vec![5],
            user_dense: 1,
            item_dense: 1,
            seed: 0,
        }
    }
}

/// The behavior cap honoured by every generated sample.
pub const MAX_BEHAVIORS: usize = 10;

impl SynthSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("entities", self.entities),
            ("relations", self.relations),
            ("items", self.items),
            ("users", self.users),
        ] {
            if v == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        let [alo, ahi] = self.attributes_per_item;
        if alo == 0 || alo > ahi || ahi > self.entities {
            return fail(format!(
                "attributes_per_item {:?} must satisfy 1 <= lo <= hi <= entities",
                self.attributes_per_item
            ));
        }
        let [blo, bhi] = self.behaviors_per_user;
        if blo > bhi || bhi > MAX_BEHAVIORS {
            return fail(format!(
                "behaviors_per_user {:?} must satisfy lo <= hi <= {MAX_BEHAVIORS}",
                self.behaviors_per_user
            ));
        }
        if bhi >= self.items {
            return fail("behaviors_per_user must leave at least one item to target".into());
        }
        if !(self.signal >= 0.0 && self.signal.is_finite()) {
            return fail("signal must be a non-negative number".into());
        }
        if self.user_sparse_vocab.contains(&0) || self.item_sparse_vocab.contains(&0) {
            return fail("sparse vocabularies must be non-empty".into());
        }
        Ok(())
    }
}

/// Generation output plus the label-model constants actually used.
#[derive(Clone, Debug)]
pub struct Generated {
    pub dataset: Dataset,
    /// Pilot mean node count (overlap mode).
    pub mu: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    spec: &'a SynthSpec,
    mu: Option<f64>,
}

impl Generated {
    /// Writes the dataset plus `synth.json` (spec and `μ`).
    pub fn write(&self, dir: impl AsRef<Path>, spec: &SynthSpec) -> Result<()> {
        let dir = dir.as_ref();
        self.dataset.write(dir)?;
        let meta = Meta { spec, mu: self.mu };
        write_string(&dir.join("synth.json"), &(serde_json::to_string_pretty(&meta)? + "\n"))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn in_range(rng: &mut ChaCha8Rng, [lo, hi]: [usize; 2]) -> usize {
    rng.gen_range(lo..=hi)
}

fn profiles(rng: &mut ChaCha8Rng, n: usize, vocab: &[usize], dense: usize) -> Vec<Profile> {
    (0..n)
        .map(|_| Profile {
            sparse: vocab.iter().map(|&v| rng.gen_range(0..v)).collect(),
            // Two decimals keep the TSV short and round-trip exact.
            dense: (0..dense)
                .map(|_| (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0)
                .collect(),
        })
        .collect()
}

/// `(relation index, attribute index)` links of every item.
type Links = Vec<Vec<(usize, usize)>>;

struct World {
    kg: KnowledgeGraph,
    links: Links,
    histories: Vec<Vec<ItemId>>,
    polarity: Vec<f64>,
    quality: Vec<f64>,
}

fn world(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<World> {
    let mut b = KnowledgeGraphBuilder::new();
    for i in 0..spec.items {
        b.add_entity(&format!("i{i}"));
    }
    for a in 0..spec.entities {
        b.add_entity(&format!("a{a}"));
    }
    let mut links = Vec::with_capacity(spec.items);
    for i in 0..spec.items {
        let n = in_range(rng, spec.attributes_per_item);
        let mut attrs = sample(rng, spec.entities, n).into_vec();
        attrs.sort_unstable();
        let item_links: Vec<(usize, usize)> = attrs
            .into_iter()
            .map(|a| (rng.gen_range(0..spec.relations), a))
            .collect();
        for &(r, a) in &item_links {
            b.add_triple(&format!("i{i}"), &format!("r{r}"), &format!("a{a}"))?;
        }
        b.align(i, &format!("i{i}"))?;
        links.push(item_links);
    }
    let histories = (0..spec.users)
        .map(|_| {
            let n = in_range(rng, spec.behaviors_per_user);
            sample(rng, spec.items, n).into_vec()
        })
        .collect();
    let polarity = (0..spec.entities).map(|_| if rng.gen() { 1.0 } else { -1.0 }).collect();
    let quality = (0..spec.items).map(|_| if rng.gen() { 1.0 } else { -1.0 }).collect();
    Ok(World {
        kg: b.build(true),
        links,
        histories,
        polarity,
        quality,
    })
}

/// A `(user, target)` pair with the target outside the user's history.
fn draw_pair(spec: &SynthSpec, w: &World, rng: &mut ChaCha8Rng) -> (usize, ItemId) {
    let user = rng.gen_range(0..spec.users);
    loop {
        let target = rng.gen_range(0..spec.items);
        if !w.histories[user].contains(&target) {
            return (user, target);
        }
    }
}

fn overlap(w: &World, target: ItemId, behaviors: &[ItemId]) -> Result<f64> {
    Ok(build(&w.kg, target, behaviors, ExtractParams::new(1, usize::MAX))?.node_count as f64)
}

fn relation_score(w: &World, target: ItemId, behaviors: &[ItemId]) -> f64 {
    let attrs_of = |i: ItemId| w.links[i].iter().map(|&(_, a)| a).collect::<BTreeSet<_>>();
    let target_attrs = attrs_of(target);
    let behavior_attrs: Vec<BTreeSet<usize>> = behaviors.iter().map(|&b| attrs_of(b)).collect();
    let shared: BTreeSet<usize> = behavior_attrs
        .iter()
        .flat_map(|s| s.intersection(&target_attrs).copied())
        .collect();

    let strong: Vec<f64> = w.links[target]
        .iter()
        .filter(|&&(r, a)| r == 0 && shared.contains(&a))
        .map(|&(_, a)| w.polarity[a])
        .collect();
    let connected: Vec<f64> = behaviors
        .iter()
        .zip(&behavior_attrs)
        .filter(|(_, s)| !s.is_disjoint(&target_attrs))
        .map(|(&b, _)| w.quality[b])
        .collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    mean(&strong) + mean(&connected)
}

/// Generates a dataset from `spec`. Bit-deterministic per seed.
pub fn generate(spec: &SynthSpec) -> Result<Generated> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = world(spec, &mut rng)?;
    let users = profiles(&mut rng, spec.users, &spec.user_sparse_vocab, spec.user_dense);
    let items = profiles(&mut rng, spec.items, &spec.item_sparse_vocab, spec.item_dense);

    let mu = match spec.mode {
        SignalMode::Overlap => {
            let mut pilot = ChaCha8Rng::seed_from_u64(spec.seed);
            pilot.set_stream(1);
            let mut total = 0.0;
            for _ in 0..PILOT_SAMPLES {
                let (u, t) = draw_pair(spec, &w, &mut pilot);
                total += overlap(&w, t, &w.histories[u])?;
            }
            Some(total / PILOT_SAMPLES as f64)
        }
        SignalMode::Relation => None,
    };

    let mut draw = |n: usize| -> Result<Vec<Sample>> {
        (0..n)
            .map(|_| {
                let (user, target) = draw_pair(spec, &w, &mut rng);
                let behaviors = w.histories[user].clone();
                let logit = match (spec.mode, mu) {
                    (SignalMode::Overlap, Some(mu)) => spec.signal * (overlap(&w, target, &behaviors)? - mu),
                    _ => spec.signal * relation_score(&w, target, &behaviors),
                };
                let label = u8::from(rng.gen::<f64>() < sigmoid(logit));
                Ok(Sample {
                    user,
                    target,
                    behaviors,
                    label,
                })
            })
            .collect()
    };
    let train = draw(spec.train)?;
    let test = draw(spec.test)?;

    let schema = DatasetSchema {
        user: SideSchema {
            sparse_vocab: spec.user_sparse_vocab.clone(),
            dense: spec.user_dense,
        },
        item: SideSchema {
            sparse_vocab: spec.item_sparse_vocab.clone(),
            dense: spec.item_dense,
        },
        max_behaviors: MAX_BEHAVIORS,
    };
    let dataset = Dataset {
        dir: Default::default(),
        kg: w.kg,
        schema,
        users,
        items,
        train,
        test,
    };
    dataset.check()?;
    Ok(Generated { dataset, mu })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            items: 12,
            entities: 10,
            users: 8,
            behaviors_per_user: [1, 4],
            train: 40,
            test: 10,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            SynthSpec { items: 0, ..small() },
            SynthSpec { behaviors_per_user: [2, 11], ..small() },
            SynthSpec { attributes_per_item: [3, 2], ..small() },
            SynthSpec { signal: -1.0, ..small() },
        ] {
            assert!(matches!(generate(&spec), Err(Error::Config(_))));
        }
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.dataset.train, b.dataset.train);
        assert_eq!(a.dataset.kg.triples(), b.dataset.kg.triples());
        assert_eq!(a.mu, b.mu);
        let c = generate(&SynthSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.dataset.train, c.dataset.train);
    }

    #[test]
    fn targets_are_outside_the_history() {
        let g = generate(&small()).unwrap();
        for s in g.dataset.train.iter().chain(&g.dataset.test) {
            assert!(!s.behaviors.contains(&s.target));
            assert!(s.behaviors.len() <= MAX_BEHAVIORS);
        }
    }

    #[test]
    fn relation_score_by_hand() {
        let spec = SynthSpec {
            mode: SignalMode::Relation,
            ..small()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = world(&spec, &mut rng).unwrap();
        // Target 0: a1 via r0, a2 via r1. Behavior 1 shares a1, behavior 2 shares a2,
        // behavior 3 shares nothing.
        w.links = vec![vec![(0, 1), (1, 2)], vec![(2, 1)], vec![(0, 2)], vec![(0, 5)]];
        w.polarity = vec![1.0; 10];
        w.polarity[1] = -1.0;
        w.quality = vec![1.0, 1.0, -1.0, 1.0];
        // Strong attrs: a1 (-1). Connected behaviors: 1 (+1) and 2 (-1).
        assert_eq!(relation_score(&w, 0, &[1, 2, 3]), -1.0);
        assert_eq!(relation_score(&w, 0, &[3]), 0.0);
        assert_eq!(relation_score(&w, 0, &[2]), -1.0);
    }
}
