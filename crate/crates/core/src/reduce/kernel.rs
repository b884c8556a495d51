use std::collections::{BTreeSet, HashMap, HashSet};

use super::{reduce, Passes, ReductionReport};
use crate::automata::TreeAutomaton;
use crate::error::{Error, Result};
use crate::fvc::TypeEngine;
use crate::optrees::{evaluate, OpTree};
use crate::structures::{label_bit, Elem, LabelSet, Structure};

/// Conditions (i)-(v) of a bounded equivalent substructure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelCertificate {
    /// (i) the reduced tree is accepted by the automaton.
    pub accepted: bool,
    /// (ii) B is the induced substructure of A on its universe.
    pub induced: bool,
    /// (iii) every protected element survives.
    pub contains_w: bool,
    /// (iv) |B| against the witness bound computed from realized pair counts.
    pub size: usize,
    pub bound: u128,
    pub within_bound: bool,
    /// (v) root delta1 of the marked structure is unchanged.
    pub delta1_preserved: bool,
    /// Direct oracle verdict on the marked structures when |A| fits the cap.
    pub oracle_equivalent: Option<bool>,
}

impl KernelCertificate {
    pub fn holds(&self) -> bool {
        self.accepted
            && self.induced
            && self.contains_w
            && self.within_bound
            && self.delta1_preserved
            && self.oracle_equivalent != Some(false)
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    pub tree: OpTree,
    /// B over the alphabet vocabulary.
    pub structure: Structure,
    /// B with W labelled by the mark labels.
    pub marked: Structure,
    pub protected: Vec<u64>,
    pub certificate: KernelCertificate,
    pub report: ReductionReport,
}

/// Mark labels for `w` (the j-th element gets mark j+1) over `engine`.
pub fn mark_map(engine: &TypeEngine, w: &[Elem]) -> HashMap<Elem, LabelSet> {
    let base = engine.spec().vocab().label_count();
    w.iter()
        .enumerate()
        .map(|(j, e)| (*e, label_bit(base + j as u32 + 1)))
        .collect()
}

/// Reduce `t` to a fixpoint of height and degree reduction while keeping the
/// elements `w`, which are labelled with the engine's mark labels.
pub fn kernelize(
    t: &OpTree,
    engine: &TypeEngine,
    aut: &TreeAutomaton,
    w: &[Elem],
) -> Result<Kernel> {
    let w: Vec<Elem> = w
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if w.len() > engine.marks() as usize {
        return Err(Error::domain(format!(
            "{} protected elements but only {} mark labels",
            w.len(),
            engine.marks()
        )));
    }
    let spec = engine.spec();
    let (a, prov) = evaluate(t, spec)?;
    let mut protected = HashSet::new();
    for e in &w {
        if !a.contains(*e) {
            return Err(Error::domain(format!(
                "element {e} is not in the structure"
            )));
        }
        let node = prov
            .node_of(*e)
            .ok_or_else(|| Error::domain(format!("element {e} has no provenance")))?;
        protected.insert(node);
    }
    let marks = mark_map(engine, &w);
    let r = reduce(t, engine, aut, &marks, &protected, Passes::Both)?;
    let (b, _) = evaluate(&r.tree, spec)?;
    let bound = witness_bound(
        w.len(),
        r.report.distinct_pairs,
        r.report.distinct_prefix_pairs,
        spec.ops()
            .iter()
            .filter(|o| o.ranked)
            .map(|o| o.rho)
            .max()
            .unwrap_or(0),
        spec.max_leaf_size(),
    );
    let certificate = KernelCertificate {
        accepted: r.report.accepted,
        induced: r.report.embedding,
        contains_w: w.iter().all(|e| b.contains(*e)),
        size: b.len(),
        bound,
        within_bound: (b.len() as u128) <= bound,
        delta1_preserved: r.report.delta1_preserved,
        oracle_equivalent: r.report.oracle_equivalent,
    };
    let mut protected: Vec<u64> = protected.into_iter().collect();
    protected.sort_unstable();
    Ok(Kernel {
        tree: r.tree,
        structure: b,
        marked: r.output,
        protected,
        certificate,
        report: r.report,
    })
}

/// Size bound for a fixpoint tree: a root-to-leaf path repeats no
/// (pair, protected count) key, so it has at most (k+1)·P1 nodes; a folded
/// node keeps at most (k+1)·P2 + 1 children; each node adds at most
/// max(leaf size, 1) elements. Saturates at u128::MAX.
pub fn witness_bound(
    k: usize,
    pairs: usize,
    prefix_pairs: usize,
    ranked_arity: usize,
    leaf: usize,
) -> u128 {
    let path = ((k + 1) * pairs.max(1)) as u32;
    let degree = (((k + 1) * prefix_pairs + 1).max(ranked_arity).max(1)) as u128;
    let mut nodes: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..path {
        nodes = nodes.saturating_add(level);
        level = level.saturating_mul(degree);
    }
    nodes.saturating_mul(leaf.max(1) as u128)
}
