//! Immutable knowledge-graph triple store.
//!
//! Entities and relations are interned in first-appearance order. When inverse
//! augmentation is enabled, every forward relation `r` gets a partner `r^-1`
//! whose id is `r + num_forward_relations`, and every forward triple `(h, r, t)`
//! gets exactly one mirrored triple `(t, r^-1, h)`. All traversal in the crate
//! is forward over this augmented edge set.
//!
//! Items are catalog objects outside the graph; the alignment maps each item
//! to a single anchor entity.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsv;

/// File names used inside a KG directory.
pub const TRIPLES_FILE: &str = "triples.tsv";
pub const ALIGNMENT_FILE: &str = "alignment.tsv";

pub const INVERSE_SUFFIX: &str = "^-1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

/// Dense catalog item id.
pub type ItemId = usize;

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// String interner with ids in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn get_or_insert(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Accumulates triples and alignments, then freezes them into a [`KnowledgeGraph`].
#[derive(Debug, Default)]
pub struct KnowledgeGraphBuilder {
    entities: Vocab,
    relations: Vocab,
    triples: Vec<(u32, u32, u32)>,
    seen: HashSet<(u32, u32, u32)>,
    alignment: Vec<Option<EntityId>>,
}

impl KnowledgeGraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an entity that may have no triples.
    pub fn add_entity(&mut self, name: &str) -> EntityId {
        EntityId(self.entities.get_or_insert(name))
    }

    /// Adds a forward triple. Duplicates are ignored.
    pub fn add_triple(&mut self, head: &str, relation: &str, tail: &str) -> Result<()> {
        if relation.ends_with(INVERSE_SUFFIX) {
            return Err(Error::Integrity(format!(
                "relation name {relation:?} uses the reserved inverse suffix"
            )));
        }
        let h = self.entities.get_or_insert(head);
        let r = self.relations.get_or_insert(relation);
        let t = self.entities.get_or_insert(tail);
        if self.seen.insert((h, r, t)) {
            self.triples.push((h, r, t));
        }
        Ok(())
    }

    /// Maps `item` to the already-registered entity `entity`.
    pub fn align(&mut self, item: ItemId, entity: &str) -> Result<()> {
        let id = self
            .entities
            .get(entity)
            .ok_or_else(|| Error::Integrity(format!("item {item} aligned to unknown entity {entity:?}")))?;
        if self.alignment.len() <= item {
            self.alignment.resize(item + 1, None);
        }
        match self.alignment[item] {
            Some(prev) if prev.0 != id => Err(Error::Integrity(format!(
                "item {item} aligned to two entities ({} and {entity:?})",
                self.entities.name(prev.0).unwrap_or("?")
            ))),
            _ => {
                self.alignment[item] = Some(EntityId(id));
                Ok(())
            }
        }
    }

    pub fn build(self, inverse: bool) -> KnowledgeGraph {
        let num_forward = self.relations.len() as u32;
        let mut relations = self.relations;
        if inverse {
            for r in 0..num_forward {
                let name = format!("{}{INVERSE_SUFFIX}", relations.name(r).unwrap());
                relations.get_or_insert(&name);
            }
        }

        let mut triples: Vec<Triple> = self
            .triples
            .iter()
            .map(|&(h, r, t)| Triple::new(EntityId(h), RelationId(r), EntityId(t)))
            .collect();
        if inverse {
            let mirrored: Vec<Triple> = triples
                .iter()
                .map(|t| Triple::new(t.tail, RelationId(t.relation.0 + num_forward), t.head))
                .collect();
            triples.extend(mirrored);
        }

        let n = self.entities.len();
        let mut lists: Vec<Vec<(RelationId, EntityId)>> = vec![Vec::new(); n];
        for t in &triples {
            lists[t.head.index()].push((t.relation, t.tail));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut adjacency = Vec::with_capacity(triples.len());
        offsets.push(0);
        for mut list in lists {
            list.sort_unstable();
            list.dedup();
            adjacency.extend(list);
            offsets.push(adjacency.len());
        }

        KnowledgeGraph {
            entities: self.entities,
            relations,
            num_forward_relations: num_forward,
            inverse,
            triples,
            offsets,
            adjacency,
            alignment: self.alignment,
        }
    }
}

/// Directed multigraph of `(head, relation, tail)` triples with an
/// item-to-entity alignment. Read-only once built.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    num_forward_relations: u32,
    inverse: bool,
    triples: Vec<Triple>,
    offsets: Vec<usize>,
    adjacency: Vec<(RelationId, EntityId)>,
    alignment: Vec<Option<EntityId>>,
}

impl KnowledgeGraph {
    /// Loads a triples TSV and an alignment TSV, with inverse augmentation.
    pub fn load(triples_path: impl AsRef<Path>, alignment_path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with(triples_path, alignment_path, true)
    }

    pub fn load_with(
        triples_path: impl AsRef<Path>,
        alignment_path: impl AsRef<Path>,
        inverse: bool,
    ) -> Result<Self> {
        let triples_path = triples_path.as_ref();
        let alignment_path = alignment_path.as_ref();
        let mut builder = KnowledgeGraphBuilder::new();

        for (line, fields) in tsv::read_rows(triples_path, 3)? {
            builder
                .add_triple(&fields[0], &fields[1], &fields[2])
                .map_err(|e| Error::parse(triples_path, line, e.to_string()))?;
        }
        for (line, fields) in tsv::read_rows(alignment_path, 2)? {
            let item: ItemId = fields[0]
                .parse()
                .map_err(|_| Error::parse(alignment_path, line, format!("bad item id {:?}", fields[0])))?;
            builder.align(item, &fields[1]).map_err(|e| match e {
                Error::Integrity(msg) => Error::Integrity(format!("{}:{line}: {msg}", alignment_path.display())),
                other => other,
            })?;
        }
        Ok(builder.build(inverse))
    }

    /// Loads `triples.tsv` and `alignment.tsv` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Self::load(dir.join(TRIPLES_FILE), dir.join(ALIGNMENT_FILE))
    }

    /// Writes the forward triples and the alignment in canonical TSV form.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let path = dir.join(TRIPLES_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for t in self.forward_triples() {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.entity_name(t.head),
                self.relation_name(t.relation),
                self.entity_name(t.tail)
            )
            .map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join(ALIGNMENT_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for (item, entity) in self.alignment.iter().enumerate() {
            if let Some(e) = entity {
                writeln!(out, "{item}\t{}", self.entity_name(*e)).map_err(|e| Error::io(&path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    /// Total relation count, inverse relations included.
    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_forward_relations(&self) -> usize {
        self.num_forward_relations as usize
    }

    /// Number of item slots in the alignment table (max aligned item id + 1).
    pub fn num_items(&self) -> usize {
        self.alignment.len()
    }

    pub fn is_augmented(&self) -> bool {
        self.inverse
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    /// All triples; forward triples first, then their mirrors.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn forward_triples(&self) -> &[Triple] {
        let n = if self.inverse {
            self.triples.len() / 2
        } else {
            self.triples.len()
        };
        &self.triples[..n]
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(RelationId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0).unwrap_or("<unknown>")
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0).unwrap_or("<unknown>")
    }

    /// The inverse partner of `relation`, if augmentation is enabled.
    pub fn inverse_of(&self, relation: RelationId) -> Option<RelationId> {
        if !self.inverse || relation.index() >= self.relations.len() {
            return None;
        }
        let f = self.num_forward_relations;
        Some(if relation.0 < f {
            RelationId(relation.0 + f)
        } else {
            RelationId(relation.0 - f)
        })
    }

    pub fn is_inverse(&self, relation: RelationId) -> bool {
        self.inverse && relation.0 >= self.num_forward_relations
    }

    /// Mirrors a triple across its inverse relation.
    pub fn invert(&self, triple: Triple) -> Option<Triple> {
        self.inverse_of(triple.relation)
            .map(|r| Triple::new(triple.tail, r, triple.head))
    }

    /// Out-edges of `entity`, sorted by `(relation, tail)`.
    pub fn neighbors(&self, entity: EntityId) -> Result<&[(RelationId, EntityId)]> {
        let i = entity.index();
        if i >= self.entities.len() {
            return Err(Error::Lookup(format!("unknown entity {entity}")));
        }
        Ok(&self.adjacency[self.offsets[i]..self.offsets[i + 1]])
    }

    pub fn has_edge(&self, triple: Triple) -> bool {
        self.neighbors(triple.head)
            .map(|list| list.binary_search(&(triple.relation, triple.tail)).is_ok())
            .unwrap_or(false)
    }

    /// The anchor entity of `item`.
    pub fn align(&self, item: ItemId) -> Result<EntityId> {
        self.alignment
            .get(item)
            .copied()
            .flatten()
            .ok_or(Error::Alignment(item))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> KnowledgeGraph {
        // Blouse and Dress share the Shirt category; Shirt and Dress target Girl.
        let mut b = KnowledgeGraphBuilder::new();
        for (h, r, t) in [
            ("Blouse", "Category", "Shirt"),
            ("Dress", "Category", "Shirt"),
            ("Shirt", "Audience", "Girl"),
            ("Dress", "Audience", "Girl"),
            ("Blouse", "Brand", "Zara"),
            ("Dress", "Brand", "Mango"),
        ] {
            b.add_triple(h, r, t).unwrap();
        }
        b.align(0, "Blouse").unwrap();
        b.align(1, "Dress").unwrap();
        b.build(true)
    }

    #[test]
    fn empty_graph() {
        let kg = KnowledgeGraphBuilder::new().build(true);
        assert_eq!(kg.num_entities(), 0);
        assert_eq!(kg.num_relations(), 0);
        assert!(kg.triples().is_empty());
    }

    #[test]
    fn single_triple_gets_mirrored() {
        let mut b = KnowledgeGraphBuilder::new();
        b.add_triple("Blouse", "Category", "Shirt").unwrap();
        let kg = b.build(true);
        assert_eq!(kg.num_entities(), 2);
        assert_eq!(kg.num_forward_relations(), 1);
        assert_eq!(kg.num_relations(), 2);
        assert_eq!(kg.triples().len(), 2);
        assert_eq!(kg.relation_name(RelationId(1)), "Category^-1");
        assert!(kg.is_inverse(RelationId(1)));
    }

    #[test]
    fn shirt_adjacency_matches_hand_enumeration() {
        let kg = toy();
        let shirt = kg.entity_id("Shirt").unwrap();
        let cat = kg.relation_id("Category").unwrap();
        let aud = kg.relation_id("Audience").unwrap();
        let cat_inv = kg.inverse_of(cat).unwrap();
        let blouse = kg.entity_id("Blouse").unwrap();
        let dress = kg.entity_id("Dress").unwrap();
        let girl = kg.entity_id("Girl").unwrap();

        // Hand-built from the triple list: Shirt -Audience-> Girl, and the two
        // mirrored Category edges back to Blouse and Dress.
        let mut expected = vec![(aud, girl), (cat_inv, blouse), (cat_inv, dress)];
        expected.sort();
        assert_eq!(kg.neighbors(shirt).unwrap(), expected.as_slice());
    }

    #[test]
    fn isolated_and_unknown_entities() {
        let mut b = KnowledgeGraphBuilder::new();
        let lonely = b.add_entity("lonely");
        b.add_triple("a", "r", "b").unwrap();
        let kg = b.build(true);
        assert!(kg.neighbors(lonely).unwrap().is_empty());
        assert_eq!(kg.neighbors(kg.entity_id("a").unwrap()).unwrap().len(), 1);
        assert!(matches!(kg.neighbors(EntityId(99)), Err(Error::Lookup(_))));
    }

    #[test]
    fn alignment_lookup() {
        let kg = toy();
        assert_eq!(kg.align(0).unwrap(), EntityId(0));
        assert!(matches!(kg.align(7), Err(Error::Alignment(7))));
    }

    #[test]
    fn aligning_to_unknown_entity_is_an_integrity_error() {
        let mut b = KnowledgeGraphBuilder::new();
        b.add_triple("a", "r", "b").unwrap();
        assert!(matches!(b.align(0, "zzz"), Err(Error::Integrity(_))));
    }

    #[test]
    fn invert_is_an_involution() {
        let kg = toy();
        for &t in kg.triples() {
            let back = kg.invert(kg.invert(t).unwrap()).unwrap();
            assert_eq!(back, t);
            assert!(kg.has_edge(kg.invert(t).unwrap()));
        }
        assert_eq!(kg.triples().len(), 2 * kg.forward_triples().len());
    }

    #[test]
    fn duplicate_triples_collapse() {
        let mut b = KnowledgeGraphBuilder::new();
        b.add_triple("a", "r", "b").unwrap();
        b.add_triple("a", "r", "b").unwrap();
        let kg = b.build(true);
        assert_eq!(kg.triples().len(), 2);
    }

    #[test]
    fn reserved_suffix_rejected() {
        let mut b = KnowledgeGraphBuilder::new();
        assert!(b.add_triple("a", "r^-1", "b").is_err());
    }
}
