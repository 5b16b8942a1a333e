//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the code under test except to read raw data
//! (the triple list and the alignment).

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use atbrg::kg::{EntityId, ItemId, KnowledgeGraph, KnowledgeGraphBuilder, Triple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random KG with up to `max_entities` entities and `max_triples` forward
/// triples, plus `items` aligned items (anchors may repeat).
pub fn random_kg(seed: u64, max_entities: usize, max_triples: usize, items: usize) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_entities);
    let relations = rng.gen_range(1..=6);
    let triples = rng.gen_range(0..=max_triples);
    let mut b = KnowledgeGraphBuilder::new();
    for e in 0..n {
        b.add_entity(&format!("e{e}"));
    }
    for _ in 0..triples {
        let h = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        let r = rng.gen_range(0..relations);
        b.add_triple(&format!("e{h}"), &format!("r{r}"), &format!("e{t}")).unwrap();
    }
    for i in 0..items {
        b.align(i, &format!("e{}", rng.gen_range(0..n))).unwrap();
    }
    b.build(true)
}

/// Outgoing edges of `e`, found by scanning the whole triple list, sorted by
/// `(relation, tail)` and truncated to `cap`.
fn out_edges(kg: &KnowledgeGraph, e: EntityId, cap: usize) -> Vec<Triple> {
    let mut v: Vec<Triple> = kg.triples().iter().copied().filter(|t| t.head == e).collect();
    v.sort_by_key(|t| (t.relation, t.tail));
    v.dedup();
    v.truncate(cap);
    v
}

/// Every simple path (as its triples) of 1..=depth hops from `start`.
pub fn all_paths(kg: &KnowledgeGraph, start: EntityId, depth: usize, cap: usize) -> Vec<Vec<Triple>> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<Triple>> = vec![vec![]];
    for _ in 0..depth {
        let mut next = Vec::new();
        for path in &frontier {
            let end = path.last().map_or(start, |t| t.tail);
            for t in out_edges(kg, end, cap) {
                let visited = t.tail == start || path.iter().any(|p| p.tail == t.tail);
                if visited {
                    continue;
                }
                let mut p = path.clone();
                p.push(t);
                next.push(p);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[derive(Debug, PartialEq, Eq)]
pub struct OracleSubgraph {
    pub entities: BTreeSet<EntityId>,
    pub edges: BTreeSet<Triple>,
    pub node_count: usize,
}

/// Exhaustive connect + single-pass prune.
pub fn oracle_subgraph(
    kg: &KnowledgeGraph,
    target: ItemId,
    behaviors: &[ItemId],
    depth: usize,
    cap: usize,
) -> OracleSubgraph {
    let mut items: Vec<ItemId> = vec![target];
    for &b in behaviors {
        if !items.contains(&b) {
            items.push(b);
        }
    }
    let anchor_of: BTreeMap<ItemId, EntityId> = items.iter().map(|&i| (i, kg.align(i).unwrap())).collect();
    let anchors: BTreeSet<EntityId> = anchor_of.values().copied().collect();

    // (path nodes, path triples, items touched)
    let mut paths = Vec::new();
    for &item in &items {
        let start = anchor_of[&item];
        for p in all_paths(kg, start, depth, cap) {
            let nodes: Vec<EntityId> = std::iter::once(start).chain(p.iter().map(|t| t.tail)).collect();
            let mut touched: BTreeSet<ItemId> = BTreeSet::from([item]);
            for (&i, &a) in &anchor_of {
                if nodes.contains(&a) {
                    touched.insert(i);
                }
            }
            paths.push((nodes, p, touched));
        }
    }

    let mut item_sets: BTreeMap<EntityId, BTreeSet<ItemId>> = BTreeMap::new();
    for (nodes, _, touched) in &paths {
        for n in nodes.iter().filter(|n| !anchors.contains(n)) {
            item_sets.entry(*n).or_default().extend(touched);
        }
    }
    let removed: BTreeSet<EntityId> = item_sets
        .iter()
        .filter(|(_, s)| s.len() < 2)
        .map(|(e, _)| *e)
        .collect();
    let entities: BTreeSet<EntityId> = item_sets.keys().copied().filter(|e| !removed.contains(e)).collect();

    let mut edges = BTreeSet::new();
    for (nodes, triples, _) in &paths {
        if nodes.iter().any(|n| removed.contains(n)) {
            continue;
        }
        for t in triples {
            edges.insert(*t);
            if let Some(r) = kg.inverse_of(t.relation) {
                edges.insert(Triple::new(t.tail, r, t.head));
            }
        }
    }
    let touched_anchors = items
        .iter()
        .filter(|i| {
            let a = anchor_of[i];
            edges.iter().any(|t| t.head == a || t.tail == a)
        })
        .count();
    OracleSubgraph {
        node_count: entities.len() + touched_anchors,
        entities,
        edges,
    }
}

/// AUC by comparing every positive with every negative.
pub fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut doubled_wins = 0u64;
    let (mut pos, mut neg) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        if yi == 1 {
            pos += 1;
        } else {
            neg += 1;
        }
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj == 0 {
                doubled_wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    (doubled_wins as f64 / 2.0) / (pos * neg) as f64
}

/// Central-difference derivative of a scalar function.
pub fn numeric_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

use atbrg::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use atbrg::params::{ParamId, ParameterStore};
use atbrg::tape::{NodeId, Tape};
use atbrg::tensor::DenseArray;

type Builder = Box<dyn Fn(&mut Tape, &ParameterStore) -> atbrg::Result<NodeId>>;

fn away_from_zero(rng: &mut ChaCha8Rng) -> f64 {
    let x: f64 = rng.gen_range(0.2..1.5);
    if rng.gen_bool(0.5) {
        x
    } else {
        -x
    }
}

fn random_param(store: &mut ParameterStore, rng: &mut ChaCha8Rng, name: &str, shape: Vec<usize>) -> ParamId {
    let n = shape.iter().product();
    let values = (0..n).map(|_| away_from_zero(rng)).collect();
    store.add(name, DenseArray::new(shape, values).unwrap()).unwrap()
}

/// Reduces a vector node to a scalar with fixed, uneven weights so every
/// output element reaches the loss with a distinct sensitivity.
fn project(tape: &mut Tape, v: NodeId) -> atbrg::Result<NodeId> {
    let n = tape.value(v).len();
    let w = tape.input(DenseArray::vector((0..n).map(|k| 0.3 + 0.17 * k as f64).collect()));
    tape.dot(v, w)
}

/// One gradient-check case per tape primitive: a small graph whose only
/// non-trivial operation is the primitive itself.
pub fn primitive_cases(seed: u64) -> Vec<(&'static str, ParameterStore, Builder)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(&'static str, ParameterStore, Builder)> = Vec::new();
    let mut case = |name: &'static str, shapes: &[(&str, Vec<usize>)], f: Builder| {
        let mut store = ParameterStore::new();
        for (n, s) in shapes {
            random_param(&mut store, &mut rng, n, s.clone());
        }
        out.push((name, store, f));
    };
    let p = |tape: &mut Tape, store: &ParameterStore, name: &str| tape.param(store, store.id(name).unwrap());

    case("gather", &[("t", vec![4, 3])], Box::new(move |tape, s| {
        let t = p(tape, s, "t");
        let g = tape.gather(t, 2)?;
        project(tape, g)
    }));
    case("concat", &[("a", vec![2]), ("b", vec![3])], Box::new(move |tape, s| {
        let (a, b) = (p(tape, s, "a"), p(tape, s, "b"));
        let c = tape.concat(&[a, b, a])?;
        project(tape, c)
    }));
    case("affine", &[("w", vec![3, 4]), ("x", vec![4]), ("b", vec![3])], Box::new(move |tape, s| {
        let (w, x, b) = (p(tape, s, "w"), p(tape, s, "x"), p(tape, s, "b"));
        let y = tape.affine(w, x, Some(b))?;
        project(tape, y)
    }));
    case("affine_no_bias", &[("w", vec![2, 3]), ("x", vec![3])], Box::new(move |tape, s| {
        let (w, x) = (p(tape, s, "w"), p(tape, s, "x"));
        let y = tape.affine(w, x, None)?;
        project(tape, y)
    }));
    case("tanh", &[("x", vec![5])], Box::new(move |tape, s| {
        let x = p(tape, s, "x");
        let y = tape.tanh(x)?;
        project(tape, y)
    }));
    case("sigmoid", &[("x", vec![5])], Box::new(move |tape, s| {
        let x = p(tape, s, "x");
        let y = tape.sigmoid(x)?;
        project(tape, y)
    }));
    case("exp", &[("x", vec![4])], Box::new(move |tape, s| {
        let x = p(tape, s, "x");
        let y = tape.exp(x)?;
        project(tape, y)
    }));
    case("leaky_relu", &[("x", vec![6])], Box::new(move |tape, s| {
        let x = p(tape, s, "x");
        let y = tape.leaky_relu(x, 0.2)?;
        project(tape, y)
    }));
    case("dot", &[("a", vec![4]), ("b", vec![4])], Box::new(move |tape, s| {
        let (a, b) = (p(tape, s, "a"), p(tape, s, "b"));
        tape.dot(a, b)
    }));
    case("stack", &[("a", vec![3]), ("b", vec![3])], Box::new(move |tape, s| {
        let (a, b) = (p(tape, s, "a"), p(tape, s, "b"));
        let (x, y) = (tape.dot(a, b)?, tape.dot(a, a)?);
        let st = tape.stack(&[x, y, x])?;
        project(tape, st)
    }));
    case("masked_softmax", &[("z", vec![5])], Box::new(move |tape, s| {
        let z = p(tape, s, "z");
        let a = tape.masked_softmax(z, &[true, false, true, true, false])?;
        project(tape, a)
    }));
    case("weighted_sum", &[("w", vec![3]), ("a", vec![2]), ("b", vec![2]), ("c", vec![2])], Box::new(move |tape, s| {
        let (w, a, b, c) = (p(tape, s, "w"), p(tape, s, "a"), p(tape, s, "b"), p(tape, s, "c"));
        let y = tape.weighted_sum(w, &[a, b, c])?;
        project(tape, y)
    }));
    case("sum", &[("a", vec![3]), ("b", vec![3])], Box::new(move |tape, s| {
        let (a, b) = (p(tape, s, "a"), p(tape, s, "b"));
        let y = tape.sum(&[a, b, a])?;
        project(tape, y)
    }));
    case("mean", &[("a", vec![3]), ("b", vec![3])], Box::new(move |tape, s| {
        let (a, b) = (p(tape, s, "a"), p(tape, s, "b"));
        let y = tape.mean(&[a, b])?;
        project(tape, y)
    }));
    case("bce", &[("x", vec![3])], Box::new(move |tape, s| {
        let x = p(tape, s, "x");
        let prob = tape.sigmoid(x)?;
        tape.bce(prob, &[1.0, 0.0, 1.0])
    }));
    out
}

pub fn check_primitives(seed: u64, tolerance: f64) -> Vec<(&'static str, GradCheckReport)> {
    primitive_cases(seed)
        .into_iter()
        .map(|(name, mut store, f)| {
            let opts = GradCheckOptions {
                tolerance,
                ..GradCheckOptions::default()
            };
            (name, grad_check(f, &mut store, opts).unwrap())
        })
        .collect()
}

use atbrg::model::{FeatureSchema, Model, ModelConfig, Profile, ProfileStats, SampleInput, SideSchema};
use atbrg::subgraph::{build, layered_view, ExtractParams};

pub fn tiny_schema() -> FeatureSchema {
    FeatureSchema {
        user: SideSchema {
            sparse_vocab: vec![3],
            dense: 0,
        },
        item: SideSchema {
            sparse_vocab: vec![4],
            dense: 0,
        },
    }
}

/// Three items sharing a category and a brand: anchors A, B, C plus the
/// shared entities Shirt and Zara make a five-node subgraph.
pub fn five_node_kg() -> KnowledgeGraph {
    let mut b = KnowledgeGraphBuilder::new();
    for (h, r, t) in [
        ("A", "category", "Shirt"),
        ("B", "category", "Shirt"),
        ("C", "category", "Cup"),
        ("A", "brand", "Zara"),
        ("C", "brand", "Zara"),
    ] {
        b.add_triple(h, r, t).unwrap();
    }
    for (i, e) in ["A", "B", "C"].iter().enumerate() {
        b.align(i, e).unwrap();
    }
    b.build(true)
}

/// Gradient check of the whole network's cross-entropy on the five-node
/// subgraph for target A with behaviors B and C.
pub fn model_grad_check(cfg: &ModelConfig, label: f64) -> GradCheckReport {
    let kg = five_node_kg();
    let sub = build(&kg, 0, &[1, 2], ExtractParams::new(1, 16)).unwrap();
    let view = layered_view(&sub, cfg.layers).unwrap();
    assert_eq!(view.nodes().len(), 5);
    let (model, mut store) = Model::init(cfg, &tiny_schema(), kg.num_entities(), kg.num_relations()).unwrap();
    // Larger weights than the init scale so every nonlinearity leaves its linear regime.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for id in store.ids().collect::<Vec<_>>() {
        for v in store.value_mut(id).values_mut() {
            *v = rng.gen_range(-0.8..0.8);
        }
    }
    let user = Profile {
        sparse: vec![1],
        dense: vec![],
    };
    let item = Profile {
        sparse: vec![2],
        dense: vec![],
    };
    let behaviors = [kg.align(1).unwrap(), kg.align(2).unwrap()];
    let target = kg.align(0).unwrap();
    let stats = ProfileStats::default();
    let f = move |tape: &mut Tape, store: &ParameterStore| {
        let input = SampleInput {
            user: &user,
            item: &item,
            target,
            behaviors: &behaviors,
            view: Some(&view),
        };
        let fwd = model.forward(tape, store, &input, &stats)?;
        tape.bce(fwd.prob, &[label])
    };
    grad_check(f, &mut store, GradCheckOptions::default()).unwrap()
}
