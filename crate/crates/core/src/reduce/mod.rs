//! Height and degree reduction on annotated trees, kernels with protected
//! elements, and size-targeted pumping.
//!
//! Every rewrite here replaces a node by a descendant with the same
//! (delta1, delta2) pair, or cuts/duplicates a child block between two equal
//! fold prefix pairs. Either way the pair of every surviving node is
//! unchanged, so the annotation of the input stays valid by node id and the
//! loops never re-annotate.

mod check;
mod kernel;
mod passes;
mod scale;

pub use check::{check_degree_fixpoint, check_height_fixpoint};
pub use kernel::{kernelize, mark_map, witness_bound, Kernel, KernelCertificate};
pub use scale::{scale_generate, ScaleDirection, ScaleReport, ScaleRequest};

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::automata::TreeAutomaton;
use crate::eftypes::{type_of, TypeFingerprint};
use crate::error::{Error, Result};
use crate::fvc::{annotate, Annotation, TypeEngine};
use crate::optrees::{evaluate_marked, AlphabetSpec, Node, NodeKind, OpKind, OpTree};
use crate::structures::{Elem, LabelSet, Structure};

pub(crate) type Pair = (TypeFingerprint, usize);

/// Annotation keyed by node id, valid across rewrites.
#[derive(Debug, Clone, Default)]
pub(crate) struct Live {
    pub pair: HashMap<u64, Pair>,
    /// Fold prefix pair of the parent right after this child (unranked
    /// binary-folded parents only).
    pub after: HashMap<u64, Pair>,
}

impl Live {
    pub fn from_annotation(a: &Annotation) -> Live {
        let mut live = Live::default();
        for (i, f) in a.flat.nodes.iter().enumerate() {
            live.pair
                .insert(f.node.id(), (a.delta1[i].clone(), a.delta2[i]));
            for p in &a.prefixes[i] {
                let child = a.flat.nodes[f.children[p.children - 1]].node.id();
                live.after.insert(child, (p.chi.clone(), p.h));
            }
        }
        live
    }

    /// Give the nodes of `copy` the annotations of the same-shaped `orig`.
    pub fn copy_from(&mut self, orig: &Arc<Node>, copy: &Arc<Node>) {
        let mut stack = vec![(orig, copy)];
        while let Some((o, c)) = stack.pop() {
            if let Some(p) = self.pair.get(&o.id()).cloned() {
                self.pair.insert(c.id(), p);
            }
            if let Some(p) = self.after.get(&o.id()).cloned() {
                self.after.insert(c.id(), p);
            }
            stack.extend(o.children().iter().zip(c.children()));
        }
    }
}

/// Outcome counters and certificate flags of a reduction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReductionReport {
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub height_before: usize,
    pub height_after: usize,
    pub degree_before: usize,
    pub degree_after: usize,
    pub size_before: usize,
    pub size_after: usize,
    pub height_steps: usize,
    pub degree_steps: usize,
    /// Distinct (delta1, delta2) pairs realized in the input tree.
    pub distinct_pairs: usize,
    /// Distinct fold prefix pairs realized in the input tree.
    pub distinct_prefix_pairs: usize,
    pub accepted: bool,
    pub delta1_preserved: bool,
    /// Str(output) is the induced substructure of Str(input) on its universe.
    pub embedding: bool,
    /// Oracle verdict on input vs output, when both fit the cap.
    pub oracle_equivalent: Option<bool>,
}

impl ReductionReport {
    pub fn certified(&self) -> bool {
        self.accepted
            && self.delta1_preserved
            && self.embedding
            && self.oracle_equivalent != Some(false)
    }
}

/// Which passes to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Passes {
    Height,
    Degree,
    Both,
}

/// Replace every node whose pair recurs below it (with no protected node in
/// between) by its deepest such descendant.
pub fn height_reduce(
    t: &OpTree,
    engine: &TypeEngine,
    aut: &TreeAutomaton,
    protected: &HashSet<u64>,
) -> Result<(OpTree, ReductionReport)> {
    let r = reduce(t, engine, aut, &HashMap::new(), protected, Passes::Height)?;
    Ok((r.tree, r.report))
}

/// Cut child blocks between equal fold prefix pairs at unranked binary-folded
/// nodes.
pub fn degree_reduce(
    t: &OpTree,
    engine: &TypeEngine,
    aut: &TreeAutomaton,
    protected: &HashSet<u64>,
) -> Result<(OpTree, ReductionReport)> {
    let r = reduce(t, engine, aut, &HashMap::new(), protected, Passes::Degree)?;
    Ok((r.tree, r.report))
}

pub(crate) struct Reduced {
    pub tree: OpTree,
    pub report: ReductionReport,
    pub output: Structure,
}

pub(crate) fn reduce(
    t: &OpTree,
    engine: &TypeEngine,
    aut: &TreeAutomaton,
    marks: &HashMap<Elem, LabelSet>,
    protected: &HashSet<u64>,
    passes: Passes,
) -> Result<Reduced> {
    let spec = engine.spec();
    t.validate(spec)?;
    require_accepted(t, aut)?;
    let ann = annotate(t, engine, aut, marks)?;
    let mut live = Live::from_annotation(&ann);
    let mut report = ReductionReport {
        nodes_before: t.node_count(),
        height_before: t.height(),
        degree_before: t.max_degree(),
        size_before: ann.sizes[0],
        distinct_pairs: live.pair.values().collect::<HashSet<_>>().len(),
        distinct_prefix_pairs: live.after.values().collect::<HashSet<_>>().len(),
        ..ReductionReport::default()
    };
    let mut cur = t.clone();
    loop {
        let mut changed = false;
        if passes != Passes::Degree {
            let (next, steps) = passes::height_pass(&cur, &mut live, protected)?;
            report.height_steps += steps;
            changed |= steps > 0;
            cur = next;
        }
        if passes != Passes::Height {
            let (next, steps) = passes::degree_pass(&cur, spec, &live, protected)?;
            report.degree_steps += steps;
            changed |= steps > 0;
            cur = next;
        }
        if !changed || passes != Passes::Both {
            break;
        }
    }
    report.nodes_after = cur.node_count();
    report.height_after = cur.height();
    report.degree_after = cur.max_degree();
    let fresh = annotate(&cur, engine, aut, marks)?;
    report.size_after = fresh.sizes[0];
    report.accepted = aut.is_accepting(fresh.root_state());
    report.delta1_preserved = fresh.root_type() == ann.root_type();
    let (input, _) = evaluate_marked(t, spec, engine.marks(), marks)?;
    let (output, _) = evaluate_marked(&cur, spec, engine.marks(), marks)?;
    report.embedding = is_induced_in(&output, &input)?;
    report.oracle_equivalent = oracle_verdict(engine, &input, &output)?;
    Ok(Reduced {
        tree: cur,
        report,
        output,
    })
}

pub(crate) fn require_accepted(t: &OpTree, aut: &TreeAutomaton) -> Result<()> {
    let run = aut.run(t);
    if aut.is_accepting(run.root) {
        Ok(())
    } else {
        Err(Error::Rejected(aut.state_name(run.root).to_string()))
    }
}

/// `small` equals the induced substructure of `big` on small's universe.
pub(crate) fn is_induced_in(small: &Structure, big: &Structure) -> Result<bool> {
    if !small.universe().iter().all(|e| big.contains(*e)) {
        return Ok(false);
    }
    Ok(big.induced_substructure(&small.element_set())? == *small)
}

/// Direct oracle comparison when both structures fit the cap.
pub(crate) fn oracle_verdict(
    engine: &TypeEngine,
    a: &Structure,
    b: &Structure,
) -> Result<Option<bool>> {
    let cap = engine.cap();
    if a.len() > cap || b.len() > cap {
        return Ok(None);
    }
    let (m, mode, cfg) = (engine.rank(), engine.mode(), engine.oracle());
    Ok(Some(type_of(a, m, mode, cfg)? == type_of(b, m, mode, cfg)?))
}

/// Number of elements of Str at every flattened node.
pub(crate) fn element_counts(flat: &crate::optrees::Flat, spec: &AlphabetSpec) -> Vec<usize> {
    let mut size = vec![0usize; flat.nodes.len()];
    for i in (0..flat.nodes.len()).rev() {
        let f = &flat.nodes[i];
        size[i] = match f.node.kind() {
            NodeKind::Leaf(l) => spec.leaf(*l).structure.len(),
            NodeKind::Internal(op, _) => {
                let own = matches!(spec.op(*op).kind, OpKind::Tree { .. }) as usize;
                own + f.children.iter().map(|&c| size[c]).sum::<usize>()
            }
        };
    }
    size
}

/// Rebuild the tree below `root`, substituting nodes listed in `redirect`
/// and taking children from `keep` where present.
pub(crate) fn rebuild(
    root: &Arc<Node>,
    redirect: &HashMap<u64, Arc<Node>>,
    keep: &HashMap<u64, Vec<Arc<Node>>>,
) -> Arc<Node> {
    let resolve = |n: &Arc<Node>| {
        let mut n = n.clone();
        while let Some(r) = redirect.get(&n.id()) {
            n = r.clone();
        }
        n
    };
    enum Visit {
        Enter(Arc<Node>),
        Exit(Arc<Node>, usize),
    }
    let mut out: Vec<Arc<Node>> = Vec::new();
    let mut stack = vec![Visit::Enter(resolve(root))];
    while let Some(v) = stack.pop() {
        match v {
            Visit::Enter(n) => match n.kind() {
                NodeKind::Leaf(_) => out.push(n),
                NodeKind::Internal(_, children) => {
                    let kids: Vec<Arc<Node>> = keep
                        .get(&n.id())
                        .unwrap_or(children)
                        .iter()
                        .map(resolve)
                        .collect();
                    stack.push(Visit::Exit(n.clone(), kids.len()));
                    for k in kids.into_iter().rev() {
                        stack.push(Visit::Enter(k));
                    }
                }
            },
            Visit::Exit(n, k) => {
                let NodeKind::Internal(op, _) = n.kind() else {
                    unreachable!()
                };
                let children = out.split_off(out.len() - k);
                out.push(Node::internal(n.id(), *op, children));
            }
        }
    }
    out.pop().expect("rebuild produces a root")
}
