//! Finite relational structures with optional unary labels.
//!
//! Elements are opaque [`Elem`] tokens. Structures produced by evaluating an
//! operation tree derive their element tokens from the tree node that
//! introduced them, so a structure obtained from a pruned tree is literally a
//! sub-universe of the original.

mod embed;
mod enumerate;
mod text;

pub use embed::{is_embeddable, is_isomorphic, Embedding};
pub use enumerate::{
    canonical_code, enumerate_structures, EnumSpace, StructureEnumerator, DEFAULT_RAW_CAP,
};
pub use text::{parse_structure, write_structure};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Opaque element identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Elem(pub u64);

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Set of unary label predicates L1..L64 carried by one element (bit `i-1` is `Li`).
pub type LabelSet = u64;

pub const MAX_LABELS: u32 = 64;

pub fn label_bit(label: u32) -> LabelSet {
    debug_assert!((1..=MAX_LABELS).contains(&label));
    1u64 << (label - 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelSymbol {
    pub name: String,
    pub arity: usize,
}

/// Relation symbols plus a count of unary label predicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vocabulary {
    relations: Vec<RelSymbol>,
    label_count: u32,
}

impl Vocabulary {
    pub fn new(relations: Vec<RelSymbol>, label_count: u32) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &relations {
            if r.arity == 0 {
                return Err(Error::domain(format!("relation {} has arity 0", r.name)));
            }
            if !seen.insert(r.name.as_str()) {
                return Err(Error::domain(format!(
                    "duplicate relation symbol {}",
                    r.name
                )));
            }
        }
        if label_count > MAX_LABELS {
            return Err(Error::domain(format!(
                "at most {MAX_LABELS} labels are supported, got {label_count}"
            )));
        }
        Ok(Vocabulary {
            relations,
            label_count,
        })
    }

    pub fn empty() -> Self {
        Vocabulary {
            relations: Vec::new(),
            label_count: 0,
        }
    }

    /// Single binary relation `E`, used for graphs.
    pub fn graph(label_count: u32) -> Self {
        Vocabulary {
            relations: vec![RelSymbol {
                name: "E".into(),
                arity: 2,
            }],
            label_count,
        }
    }

    pub fn relations(&self) -> &[RelSymbol] {
        &self.relations
    }

    pub fn label_count(&self) -> u32 {
        self.label_count
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn arity(&self, rel: usize) -> usize {
        self.relations[rel].arity
    }

    /// Vocabulary with every relation of both sides and the larger label count.
    pub fn merge(&self, other: &Vocabulary) -> Result<Vocabulary> {
        let mut relations = self.relations.clone();
        for r in &other.relations {
            match self.relation_index(&r.name) {
                Some(i) if self.relations[i].arity != r.arity => {
                    return Err(Error::domain(format!(
                        "relation {} used with arities {} and {}",
                        r.name, self.relations[i].arity, r.arity
                    )))
                }
                Some(_) => {}
                None => relations.push(r.clone()),
            }
        }
        Vocabulary::new(relations, self.label_count.max(other.label_count))
    }

    pub fn with_label_count(&self, label_count: u32) -> Result<Vocabulary> {
        Vocabulary::new(self.relations.clone(), label_count)
    }

    /// Whether `self` is an expansion of `other` (same relations in the same
    /// order as a prefix, at least as many labels).
    pub fn extends(&self, other: &Vocabulary) -> bool {
        self.relations.len() >= other.relations.len()
            && self.relations[..other.relations.len()] == other.relations[..]
            && self.label_count >= other.label_count
    }

    /// Stable textual signature, e.g. `E/2,L=2`.
    pub fn signature(&self) -> String {
        let mut s = String::new();
        for r in &self.relations {
            s.push_str(&r.name);
            s.push('/');
            s.push_str(&r.arity.to_string());
            s.push(',');
        }
        s.push_str(&format!("L={}", self.label_count));
        s
    }
}

/// A subset of a structure's universe.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ElementSet(pub BTreeSet<Elem>);

impl ElementSet {
    pub fn new() -> Self {
        ElementSet(BTreeSet::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, e: Elem) -> bool {
        self.0.contains(&e)
    }

    pub fn iter(&self) -> impl Iterator<Item = Elem> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<Elem> for ElementSet {
    fn from_iter<I: IntoIterator<Item = Elem>>(iter: I) -> Self {
        ElementSet(iter.into_iter().collect())
    }
}

/// Finite relational structure. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    vocab: Arc<Vocabulary>,
    universe: Vec<Elem>,
    relations: Vec<BTreeSet<Box<[Elem]>>>,
    labels: BTreeMap<Elem, LabelSet>,
}

impl Structure {
    /// The designated empty structure over `vocab`.
    pub fn empty(vocab: Arc<Vocabulary>) -> Self {
        let relations = vec![BTreeSet::new(); vocab.relations.len()];
        Structure {
            vocab,
            universe: Vec::new(),
            relations,
            labels: BTreeMap::new(),
        }
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.universe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.universe.is_empty()
    }

    /// Sorted universe.
    pub fn universe(&self) -> &[Elem] {
        &self.universe
    }

    pub fn contains(&self, e: Elem) -> bool {
        self.universe.binary_search(&e).is_ok()
    }

    pub fn tuples(&self, rel: usize) -> &BTreeSet<Box<[Elem]>> {
        &self.relations[rel]
    }

    pub fn holds(&self, rel: usize, tuple: &[Elem]) -> bool {
        self.relations[rel].contains(tuple)
    }

    pub fn labels_of(&self, e: Elem) -> LabelSet {
        self.labels.get(&e).copied().unwrap_or(0)
    }

    pub fn has_label(&self, e: Elem, label: u32) -> bool {
        (1..=MAX_LABELS).contains(&label) && self.labels_of(e) & label_bit(label) != 0
    }

    pub fn labels(&self) -> &BTreeMap<Elem, LabelSet> {
        &self.labels
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.iter().map(|r| r.len()).sum()
    }

    pub fn element_set(&self) -> ElementSet {
        self.universe.iter().copied().collect()
    }

    /// Restriction to `subset`: a tuple survives iff all its components are in `subset`.
    pub fn induced_substructure(&self, subset: &ElementSet) -> Result<Structure> {
        if let Some(e) = subset.iter().find(|e| !self.contains(*e)) {
            return Err(Error::domain(format!("element {e} is not in the universe")));
        }
        let universe: Vec<Elem> = subset.iter().collect();
        let relations = self
            .relations
            .iter()
            .map(|tuples| {
                tuples
                    .iter()
                    .filter(|t| t.iter().all(|e| subset.contains(*e)))
                    .cloned()
                    .collect()
            })
            .collect();
        let labels = self
            .labels
            .iter()
            .filter(|(e, _)| subset.contains(**e))
            .map(|(e, l)| (*e, *l))
            .collect();
        Ok(Structure {
            vocab: self.vocab.clone(),
            universe,
            relations,
            labels,
        })
    }

    /// Same structure over an expanded vocabulary (extra relations empty).
    pub fn lift(&self, vocab: Arc<Vocabulary>) -> Result<Structure> {
        if *vocab == *self.vocab {
            return Ok(self.clone());
        }
        let mut relations = vec![BTreeSet::new(); vocab.relations.len()];
        for (i, r) in self.vocab.relations.iter().enumerate() {
            let j = vocab.relation_index(&r.name).ok_or_else(|| {
                Error::domain(format!(
                    "relation {} missing from target vocabulary",
                    r.name
                ))
            })?;
            if vocab.relations[j].arity != r.arity {
                return Err(Error::domain(format!("arity mismatch for {}", r.name)));
            }
            relations[j] = self.relations[i].clone();
        }
        if self
            .labels
            .values()
            .any(|l| vocab.label_count < MAX_LABELS && *l >> vocab.label_count != 0)
        {
            return Err(Error::domain("labels exceed target label count"));
        }
        Ok(Structure {
            vocab,
            universe: self.universe.clone(),
            relations,
            labels: self.labels.clone(),
        })
    }

    /// Rename elements through an injective map.
    pub fn rename(&self, f: impl Fn(Elem) -> Elem) -> Structure {
        let mut b = StructureBuilder::new(self.vocab.clone());
        for &e in &self.universe {
            b.add_element(f(e));
        }
        for (r, tuples) in self.relations.iter().enumerate() {
            for t in tuples {
                b.add_tuple(r, t.iter().map(|e| f(*e)).collect());
            }
        }
        for (e, l) in &self.labels {
            b.add_labels(f(*e), *l);
        }
        b.finish_unchecked()
    }

    /// Copy with elements renamed to `1..=n` in universe order.
    pub fn renumbered(&self) -> Structure {
        let index: HashMap<Elem, u64> = self
            .universe
            .iter()
            .enumerate()
            .map(|(i, e)| (*e, i as u64 + 1))
            .collect();
        self.rename(|e| Elem(index[&e]))
    }

    /// Copy with the given labels added to the given elements.
    pub fn with_extra_labels(&self, extra: &[(Elem, LabelSet)]) -> Result<Structure> {
        let mut s = self.clone();
        for &(e, l) in extra {
            if !s.contains(e) {
                return Err(Error::domain(format!("element {e} is not in the universe")));
            }
            *s.labels.entry(e).or_insert(0) |= l;
        }
        Ok(s)
    }

    /// Drop every label outside `keep`.
    pub fn mask_labels(&self, keep: LabelSet) -> Structure {
        let mut s = self.clone();
        s.labels = s
            .labels
            .iter()
            .filter_map(|(e, l)| (l & keep != 0).then_some((*e, l & keep)))
            .collect();
        s
    }
}

/// Accumulates elements, tuples, and labels; `finish` sorts and validates.
#[derive(Debug, Clone)]
pub struct StructureBuilder {
    vocab: Arc<Vocabulary>,
    universe: Vec<Elem>,
    relations: Vec<Vec<Box<[Elem]>>>,
    labels: Vec<(Elem, LabelSet)>,
}

impl StructureBuilder {
    pub fn new(vocab: Arc<Vocabulary>) -> Self {
        let relations = vec![Vec::new(); vocab.relations.len()];
        StructureBuilder {
            vocab,
            universe: Vec::new(),
            relations,
            labels: Vec::new(),
        }
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn add_element(&mut self, e: Elem) {
        self.universe.push(e);
    }

    pub fn add_tuple(&mut self, rel: usize, tuple: Box<[Elem]>) {
        self.relations[rel].push(tuple);
    }

    pub fn add_labels(&mut self, e: Elem, labels: LabelSet) {
        if labels != 0 {
            self.labels.push((e, labels));
        }
    }

    /// Append every element, tuple and label of `s` (over a sub-vocabulary).
    pub fn absorb(&mut self, s: &Structure) -> Result<()> {
        self.universe.extend_from_slice(&s.universe);
        for (i, r) in s.vocab.relations.iter().enumerate() {
            let j = self
                .vocab
                .relation_index(&r.name)
                .ok_or_else(|| Error::domain(format!("unknown relation {}", r.name)))?;
            self.relations[j].extend(s.relations[i].iter().cloned());
        }
        self.labels.extend(s.labels.iter().map(|(e, l)| (*e, *l)));
        Ok(())
    }

    pub fn finish(self) -> Result<Structure> {
        let s = self.finish_unchecked();
        let mut seen = s.universe.windows(2).filter(|w| w[0] == w[1]);
        if let Some(w) = seen.next() {
            return Err(Error::domain(format!("duplicate element {}", w[0])));
        }
        for (r, tuples) in s.relations.iter().enumerate() {
            let arity = s.vocab.arity(r);
            for t in tuples {
                if t.len() != arity {
                    return Err(Error::domain(format!(
                        "tuple of length {} for relation {} of arity {arity}",
                        t.len(),
                        s.vocab.relations[r].name
                    )));
                }
                if let Some(e) = t.iter().find(|e| !s.contains(**e)) {
                    return Err(Error::domain(format!(
                        "tuple component {e} not in universe"
                    )));
                }
            }
        }
        for (e, l) in &s.labels {
            if !s.contains(*e) {
                return Err(Error::domain(format!("label on unknown element {e}")));
            }
            if s.vocab.label_count < MAX_LABELS && l >> s.vocab.label_count != 0 {
                return Err(Error::domain(format!(
                    "label index exceeds label count {}",
                    s.vocab.label_count
                )));
            }
        }
        Ok(s)
    }

    pub(crate) fn finish_unchecked(self) -> Structure {
        let mut universe = self.universe;
        universe.sort_unstable();
        let relations = self
            .relations
            .into_iter()
            .map(|v| v.into_iter().collect())
            .collect();
        let mut labels = BTreeMap::new();
        for (e, l) in self.labels {
            *labels.entry(e).or_insert(0) |= l;
        }
        Structure {
            vocab: self.vocab,
            universe,
            relations,
            labels,
        }
    }
}

/// Dense index-based view used by the oracle, the evaluator and embedding search.
pub(crate) struct Indexed<'a> {
    pub s: &'a Structure,
    pub n: usize,
    pub index: HashMap<Elem, usize>,
    pub labels: Vec<LabelSet>,
    rels: Vec<DenseRel>,
}

enum DenseRel {
    Bits { arity: usize, bits: Vec<u64> },
    Sparse(HashSet<Vec<usize>>),
}

impl<'a> Indexed<'a> {
    pub fn new(s: &'a Structure) -> Self {
        let n = s.len();
        let index: HashMap<Elem, usize> = s
            .universe
            .iter()
            .enumerate()
            .map(|(i, e)| (*e, i))
            .collect();
        let labels = s.universe.iter().map(|e| s.labels_of(*e)).collect();
        let rels = s
            .relations
            .iter()
            .enumerate()
            .map(|(r, tuples)| {
                let arity = s.vocab.arity(r);
                let cells = (n as u128).checked_pow(arity as u32).unwrap_or(u128::MAX);
                if cells <= 1 << 24 {
                    let mut bits = vec![0u64; (cells as usize).div_ceil(64).max(1)];
                    for t in tuples {
                        let mut code = 0usize;
                        for e in t.iter() {
                            code = code * n + index[e];
                        }
                        bits[code / 64] |= 1 << (code % 64);
                    }
                    DenseRel::Bits { arity, bits }
                } else {
                    DenseRel::Sparse(
                        tuples
                            .iter()
                            .map(|t| t.iter().map(|e| index[e]).collect())
                            .collect(),
                    )
                }
            })
            .collect();
        Indexed {
            s,
            n,
            index,
            labels,
            rels,
        }
    }

    pub fn rel_count(&self) -> usize {
        self.rels.len()
    }

    pub fn arity(&self, rel: usize) -> usize {
        self.s.vocab.arity(rel)
    }

    /// Whether relation `rel` holds on the index tuple `t`.
    pub fn holds(&self, rel: usize, t: impl IntoIterator<Item = usize>) -> bool {
        match &self.rels[rel] {
            DenseRel::Bits { arity, bits } => {
                let mut code = 0usize;
                let mut len = 0;
                for i in t {
                    code = code * self.n + i;
                    len += 1;
                }
                debug_assert_eq!(len, *arity);
                bits[code / 64] >> (code % 64) & 1 == 1
            }
            DenseRel::Sparse(set) => set.contains(&t.into_iter().collect::<Vec<_>>()),
        }
    }
}

/// All tuples of length `arity` over positions `0..=last` that mention `last`.
pub(crate) fn tuples_mentioning(arity: usize, last: usize) -> Vec<Vec<usize>> {
    let base = last + 1;
    let total = base.pow(arity as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut t = vec![0; arity];
        for slot in t.iter_mut().rev() {
            *slot = code % base;
            code /= base;
        }
        if t.contains(&last) {
            out.push(t);
        }
    }
    out
}

/// Lookup table of [`tuples_mentioning`] per (arity, position).
#[derive(Default)]
pub(crate) struct TupleCache {
    cache: HashMap<(usize, usize), Arc<Vec<Vec<usize>>>>,
}

impl TupleCache {
    pub fn get(&mut self, arity: usize, last: usize) -> Arc<Vec<Vec<usize>>> {
        self.cache
            .entry((arity, last))
            .or_insert_with(|| Arc::new(tuples_mentioning(arity, last)))
            .clone()
    }
}

#[cfg(test)]
pub(crate) use tests::graph as test_graph;
