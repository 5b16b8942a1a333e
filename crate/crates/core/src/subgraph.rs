//! Adaptive target-behavior relational subgraph extraction.
//!
//! For a target item and a user's behavior items we enumerate bounded-depth
//! simple paths outward from each item's anchor entity ("connect"), index
//! every non-anchor entity by the anchor items its paths touch, and drop the
//! entities that touch only one item ("prune"). Pruning is a single pass:
//! paths through a dropped entity are discarded, but entities whose item
//! sets shrink as a result are not revisited.
//!
//! ```
//! use atbrg::kg::KnowledgeGraphBuilder;
//! use atbrg::subgraph::{build, ExtractParams};
//!
//! let mut b = KnowledgeGraphBuilder::new();
//! b.add_triple("blouse", "category", "shirt").unwrap();
//! b.add_triple("dress", "category", "shirt").unwrap();
//! b.add_triple("cup", "category", "kitchen").unwrap();
//! b.align(0, "blouse").unwrap();
//! b.align(1, "dress").unwrap();
//! b.align(2, "cup").unwrap();
//! let kg = b.build(true);
//!
//! let sub = build(&kg, 0, &[1, 2], ExtractParams::new(1, 16)).unwrap();
//! assert_eq!(sub.entities, vec![kg.entity_id("shirt").unwrap()]);
//! assert_eq!(sub.node_count, 3);
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, ItemId, KnowledgeGraph, RelationId, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtractParams {
    /// Maximum hop count of an enumerated path.
    pub max_depth: usize,
    /// Per-node expansion limit; the lowest `(relation, entity)` neighbors are kept.
    pub fanout_cap: usize,
}

impl ExtractParams {
    pub fn new(max_depth: usize, fanout_cap: usize) -> Self {
        ExtractParams {
            max_depth,
            fanout_cap,
        }
    }

    fn check(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Contract("max_depth must be at least 1".into()));
        }
        if self.fanout_cap == 0 {
            return Err(Error::Contract("fanout_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// A simple path leaving an item's anchor entity.
///
/// `nodes[0]` is the anchor and `relations[k]` links `nodes[k]` to `nodes[k + 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    pub source: ItemId,
    pub nodes: Vec<EntityId>,
    pub relations: Vec<RelationId>,
}

impl Path {
    pub fn depth(&self) -> usize {
        self.relations.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = Triple> + '_ {
        self.relations
            .iter()
            .enumerate()
            .map(move |(k, &r)| Triple::new(self.nodes[k], r, self.nodes[k + 1]))
    }
}

/// All simple paths from `φ(item)` of 1..=`max_depth` hops, in DFS pre-order.
pub fn enumerate_paths(kg: &KnowledgeGraph, item: ItemId, params: ExtractParams) -> Result<Vec<Path>> {
    params.check()?;
    let anchor = kg.align(item)?;
    let mut out = Vec::new();
    let mut nodes = vec![anchor];
    let mut relations = Vec::new();
    extend_paths(kg, item, params, &mut nodes, &mut relations, &mut out)?;
    Ok(out)
}

fn extend_paths(
    kg: &KnowledgeGraph,
    item: ItemId,
    params: ExtractParams,
    nodes: &mut Vec<EntityId>,
    relations: &mut Vec<RelationId>,
    out: &mut Vec<Path>,
) -> Result<()> {
    if relations.len() == params.max_depth {
        return Ok(());
    }
    let head = *nodes.last().unwrap();
    for &(r, t) in kg.neighbors(head)?.iter().take(params.fanout_cap) {
        if nodes.contains(&t) {
            continue;
        }
        nodes.push(t);
        relations.push(r);
        out.push(Path {
            source: item,
            nodes: nodes.clone(),
            relations: relations.clone(),
        });
        extend_paths(kg, item, params, nodes, relations, out)?;
        nodes.pop();
        relations.pop();
    }
    Ok(())
}

/// Paths enumerated for one anchor item.
#[derive(Clone, Debug)]
pub struct PathSet {
    pub item: ItemId,
    pub anchor: EntityId,
    pub paths: Vec<Path>,
}

/// Output of graph connect: every path, plus each non-anchor entity's bucket.
#[derive(Clone, Debug, Default)]
pub struct CandidateGraph {
    /// Anchor items in first-seen order, deduplicated.
    pub items: Vec<ItemId>,
    /// Anchor entity -> items aligned to it.
    pub anchors: BTreeMap<EntityId, BTreeSet<ItemId>>,
    pub paths: Vec<Path>,
    pub buckets: BTreeMap<EntityId, EntityBucket>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityBucket {
    /// Indices into `CandidateGraph::paths`.
    pub paths: Vec<usize>,
    /// Anchor items appearing on any of those paths.
    pub items: BTreeSet<ItemId>,
}

impl CandidateGraph {
    fn items_on(&self, path: &Path) -> BTreeSet<ItemId> {
        let mut items = BTreeSet::new();
        for node in &path.nodes {
            if let Some(set) = self.anchors.get(node) {
                items.extend(set.iter().copied());
            }
        }
        items
    }
}

/// Graph connect: unions the per-item path sets and indexes them by entity.
pub fn connect(path_sets: &[PathSet]) -> CandidateGraph {
    let mut cand = CandidateGraph::default();
    for set in path_sets {
        if !cand.items.contains(&set.item) {
            cand.items.push(set.item);
        }
        cand.anchors.entry(set.anchor).or_default().insert(set.item);
    }
    for set in path_sets {
        for path in &set.paths {
            let idx = cand.paths.len();
            let items = cand.items_on(path);
            for node in &path.nodes {
                if cand.anchors.contains_key(node) {
                    continue;
                }
                let bucket = cand.buckets.entry(*node).or_default();
                if bucket.paths.last() != Some(&idx) {
                    bucket.paths.push(idx);
                }
                bucket.items.extend(items.iter().copied());
            }
            cand.paths.push(path.clone());
        }
    }
    cand
}

/// The adaptive target-behavior relational graph of one sample.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalSubgraph {
    pub target: ItemId,
    pub behaviors: Vec<ItemId>,
    /// `(item, anchor entity)` for the target and then each distinct behavior.
    pub anchors: Vec<(ItemId, EntityId)>,
    /// Surviving non-anchor entities, ascending.
    pub entities: Vec<EntityId>,
    /// Surviving edges, ascending; closed under inversion when the KG is augmented.
    pub edges: Vec<Triple>,
    /// Item set of every surviving entity.
    pub item_sets: BTreeMap<EntityId, Vec<ItemId>>,
    pub node_count: usize,
}

impl RelationalSubgraph {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.edges.is_empty()
    }

    pub fn anchor_of(&self, item: ItemId) -> Option<EntityId> {
        self.anchors.iter().find(|(i, _)| *i == item).map(|(_, e)| *e)
    }

    pub fn write_json(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Graph prune: one pass over the candidate entities.
pub fn prune(kg: &KnowledgeGraph, cand: &CandidateGraph) -> RelationalSubgraph {
    let removed: BTreeSet<EntityId> = cand
        .buckets
        .iter()
        .filter(|(_, b)| b.items.len() < 2)
        .map(|(e, _)| *e)
        .collect();

    let mut edges = BTreeSet::new();
    for path in &cand.paths {
        if path.nodes.iter().any(|n| removed.contains(n)) {
            continue;
        }
        for edge in path.edges() {
            edges.insert(edge);
            if let Some(mirror) = kg.invert(edge) {
                edges.insert(mirror);
            }
        }
    }

    let item_sets: BTreeMap<EntityId, Vec<ItemId>> = cand
        .buckets
        .iter()
        .filter(|(e, _)| !removed.contains(e))
        .map(|(e, b)| (*e, b.items.iter().copied().collect()))
        .collect();
    let entities: Vec<EntityId> = item_sets.keys().copied().collect();

    let touched: BTreeSet<EntityId> = edges.iter().flat_map(|t| [t.head, t.tail]).collect();
    let anchored_items = cand
        .anchors
        .iter()
        .filter(|(e, _)| touched.contains(e))
        .map(|(_, items)| items.len())
        .sum::<usize>();

    let mut anchors = Vec::new();
    for (e, items) in &cand.anchors {
        for &i in items {
            anchors.push((i, *e));
        }
    }
    anchors.sort_by_key(|(i, _)| cand.items.iter().position(|x| x == i));

    RelationalSubgraph {
        target: cand.items.first().copied().unwrap_or_default(),
        behaviors: Vec::new(),
        anchors,
        node_count: entities.len() + anchored_items,
        entities,
        edges: edges.into_iter().collect(),
        item_sets,
    }
}

/// Connect then prune for one `(target, behaviors)` sample.
pub fn build(
    kg: &KnowledgeGraph,
    target: ItemId,
    behaviors: &[ItemId],
    params: ExtractParams,
) -> Result<RelationalSubgraph> {
    params.check()?;
    let mut seen = BTreeSet::new();
    let mut sets = Vec::with_capacity(behaviors.len() + 1);
    for &item in std::iter::once(&target).chain(behaviors) {
        if !seen.insert(item) {
            continue;
        }
        sets.push(PathSet {
            item,
            anchor: kg.align(item)?,
            paths: enumerate_paths(kg, item, params)?,
        });
    }
    let cand = connect(&sets);
    let mut sub = prune(kg, &cand);
    sub.target = target;
    sub.behaviors = behaviors.to_vec();
    Ok(sub)
}

pub fn node_count(sub: &RelationalSubgraph) -> usize {
    sub.node_count
}

/// Per-layer neighbor lists over a subgraph.
///
/// Every layer sees the same edge set; only the layer parameters differ.
/// Nodes are the anchor entities plus every surviving entity, ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredView {
    layers: usize,
    nodes: Vec<EntityId>,
    neighbors: Vec<Vec<(RelationId, EntityId)>>,
}

impl LayeredView {
    /// Builds a view from explicit neighbor lists, kept in the given order.
    /// Tail nodes missing from `lists` are added with no neighbors.
    pub fn from_lists(layers: usize, lists: Vec<(EntityId, Vec<(RelationId, EntityId)>)>) -> Result<Self> {
        if layers == 0 {
            return Err(Error::Contract("layer count must be at least 1".into()));
        }
        let mut all: BTreeMap<EntityId, Vec<(RelationId, EntityId)>> = BTreeMap::new();
        for (node, list) in lists {
            for &(_, t) in &list {
                all.entry(t).or_default();
            }
            if all.insert(node, list).is_some_and(|prev| !prev.is_empty()) {
                return Err(Error::Contract(format!("node {node} listed twice")));
            }
        }
        let (nodes, neighbors) = all.into_iter().unzip();
        Ok(LayeredView {
            layers,
            nodes,
            neighbors,
        })
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn nodes(&self) -> &[EntityId] {
        &self.nodes
    }

    pub fn position(&self, node: EntityId) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    /// `N_h` at `layer`, sorted by `(relation, node)`. Unknown nodes have no neighbors.
    pub fn neighbors(&self, layer: usize, node: EntityId) -> &[(RelationId, EntityId)] {
        debug_assert!(layer < self.layers);
        match self.position(node) {
            Some(i) => &self.neighbors[i],
            None => &[],
        }
    }

    pub fn neighbors_at(&self, position: usize) -> &[(RelationId, EntityId)] {
        &self.neighbors[position]
    }
}

pub fn layered_view(sub: &RelationalSubgraph, layers: usize) -> Result<LayeredView> {
    if layers == 0 {
        return Err(Error::Contract("layer count must be at least 1".into()));
    }
    let mut nodes: BTreeSet<EntityId> = sub.entities.iter().copied().collect();
    nodes.extend(sub.anchors.iter().map(|(_, e)| *e));
    nodes.extend(sub.edges.iter().flat_map(|t| [t.head, t.tail]));
    let nodes: Vec<EntityId> = nodes.into_iter().collect();

    let mut neighbors = vec![Vec::new(); nodes.len()];
    for t in &sub.edges {
        let i = nodes.binary_search(&t.head).unwrap();
        neighbors[i].push((t.relation, t.tail));
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }
    Ok(LayeredView {
        layers,
        nodes,
        neighbors,
    })
}
