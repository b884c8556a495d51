use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use itertools::Itertools;

use super::{label_bit, Elem, Indexed, Structure, StructureBuilder, Vocabulary};
use crate::error::{Error, Result};

/// Which structures the enumerator ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnumSpace {
    /// Every structure over the vocabulary.
    #[default]
    All,
    /// The first relation must be binary and is restricted to be symmetric
    /// and irreflexive; other relations are left empty.
    SimpleGraphs,
}

/// Yields one canonical representative per isomorphism class, ordered by size
/// and then by canonical code.
pub struct StructureEnumerator {
    vocab: Arc<Vocabulary>,
    space: EnumSpace,
    max_size: usize,
    next_size: usize,
    batch: std::vec::IntoIter<Structure>,
}

/// Default cap on the number of raw (unlabeled, non-deduplicated) assignments.
pub const DEFAULT_RAW_CAP: u128 = 1 << 22;

pub fn enumerate_structures(
    vocab: Arc<Vocabulary>,
    max_size: usize,
    space: EnumSpace,
    raw_cap: u128,
) -> Result<StructureEnumerator> {
    if space == EnumSpace::SimpleGraphs && vocab.relations().first().map(|r| r.arity) != Some(2) {
        return Err(Error::domain(
            "simple-graph enumeration needs a binary first relation",
        ));
    }
    let mut total: u128 = 0;
    for n in 0..=max_size {
        let bits = raw_bits(&vocab, space, n);
        if bits >= 127 {
            return Err(Error::budget(format!(
                "{bits} bits per structure at size {n}"
            )));
        }
        total = total.saturating_add(1u128 << bits);
    }
    if total > raw_cap {
        return Err(Error::budget(format!(
            "enumeration up to size {max_size} needs {total} raw assignments (cap {raw_cap})"
        )));
    }
    Ok(StructureEnumerator {
        vocab,
        space,
        max_size,
        next_size: 0,
        batch: Vec::new().into_iter(),
    })
}

impl Iterator for StructureEnumerator {
    type Item = Structure;

    fn next(&mut self) -> Option<Structure> {
        loop {
            if let Some(s) = self.batch.next() {
                return Some(s);
            }
            if self.next_size > self.max_size {
                return None;
            }
            let n = self.next_size;
            self.next_size += 1;
            self.batch = enumerate_size(&self.vocab, self.space, n).into_iter();
        }
    }
}

fn slots(vocab: &Vocabulary, space: EnumSpace, n: usize) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    match space {
        EnumSpace::All => {
            for (r, sym) in vocab.relations().iter().enumerate() {
                for t in (0..sym.arity).map(|_| 0..n).multi_cartesian_product() {
                    out.push((r, t));
                }
            }
        }
        EnumSpace::SimpleGraphs => {
            for (i, j) in (0..n).tuple_combinations() {
                out.push((0, vec![i, j]));
            }
        }
    }
    out
}

fn raw_bits(vocab: &Vocabulary, space: EnumSpace, n: usize) -> usize {
    slots(vocab, space, n).len() + n * vocab.label_count() as usize
}

fn enumerate_size(vocab: &Arc<Vocabulary>, space: EnumSpace, n: usize) -> Vec<Structure> {
    let slots = slots(vocab, space, n);
    let labels = vocab.label_count() as usize;
    let bits = slots.len() + n * labels;
    let slot_index: HashMap<(usize, Vec<usize>), usize> = slots
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    // For each permutation, the raw bit position feeding each code position.
    let sources: Vec<Vec<usize>> = (0..n)
        .permutations(n)
        .map(|perm| {
            let mut src = Vec::with_capacity(bits);
            for (r, t) in &slots {
                let mut mapped: Vec<usize> = t.iter().map(|&p| perm[p]).collect();
                if space == EnumSpace::SimpleGraphs && mapped[0] > mapped[1] {
                    mapped.swap(0, 1);
                }
                src.push(slot_index[&(*r, mapped)]);
            }
            for &old in &perm {
                for l in 0..labels {
                    src.push(slots.len() + old * labels + l);
                }
            }
            src
        })
        .collect();
    let mut seen: BTreeSet<Vec<bool>> = BTreeSet::new();
    for raw in 0u64..(1u64 << bits) {
        let code = sources
            .iter()
            .map(|src| {
                src.iter()
                    .map(|&b| raw >> b & 1 == 1)
                    .collect::<Vec<bool>>()
            })
            .min()
            .unwrap_or_default();
        seen.insert(code);
    }
    seen.into_iter()
        .map(|code| decode(vocab, space, &slots, labels, n, &code))
        .collect()
}

fn decode(
    vocab: &Arc<Vocabulary>,
    space: EnumSpace,
    slots: &[(usize, Vec<usize>)],
    labels: usize,
    n: usize,
    code: &[bool],
) -> Structure {
    let mut b = StructureBuilder::new(vocab.clone());
    let elem = |i: usize| Elem(i as u64 + 1);
    for i in 0..n {
        b.add_element(elem(i));
    }
    for ((r, t), &bit) in slots.iter().zip(code) {
        if bit {
            b.add_tuple(*r, t.iter().map(|&i| elem(i)).collect());
            if space == EnumSpace::SimpleGraphs {
                b.add_tuple(*r, vec![elem(t[1]), elem(t[0])].into());
            }
        }
    }
    for e in 0..n {
        for l in 0..labels {
            if code[slots.len() + e * labels + l] {
                b.add_labels(elem(e), label_bit(l as u32 + 1));
            }
        }
    }
    b.finish_unchecked()
}

/// Lexicographically least encoding of `s` over all orderings of its universe.
/// Two structures over the same vocabulary are isomorphic iff their codes match.
pub fn canonical_code(s: &Structure) -> Vec<bool> {
    let ix = Indexed::new(s);
    let n = ix.n;
    let labels = s.vocab().label_count() as usize;
    let slots = slots(s.vocab(), EnumSpace::All, n);
    (0..n)
        .permutations(n)
        .map(|perm| {
            let mut code = Vec::with_capacity(slots.len() + n * labels);
            for (r, t) in &slots {
                code.push(ix.holds(*r, t.iter().map(|&p| perm[p])));
            }
            for &old in &perm {
                for l in 0..labels {
                    code.push(ix.labels[old] >> l & 1 == 1);
                }
            }
            code
        })
        .min()
        .unwrap_or_default()
}
