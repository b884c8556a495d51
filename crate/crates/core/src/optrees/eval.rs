use std::collections::HashMap;
use std::sync::Arc;

use super::{AlphabetSpec, Node, NodeKind, OpKind, OpTree, REL_ANC, REL_EDGE, REL_LEFT, REL_LT};
use crate::error::{Error, Result};
use crate::structures::{label_bit, Elem, LabelSet, Structure, StructureBuilder, Vocabulary};

/// Element introduced by node `node_id` with local index `local` (leaf
/// elements count from 1; a tree node's own vertex is 0).
pub fn leaf_element(node_id: u64, local: u64) -> Elem {
    Elem(node_id << 8 | local)
}

/// Which tree node introduced each element of an evaluated structure.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    owner: HashMap<Elem, u64>,
}

impl Provenance {
    pub fn node_of(&self, e: Elem) -> Option<u64> {
        self.owner.get(&e).copied()
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Elem, u64)> + '_ {
        self.owner.iter().map(|(e, n)| (*e, *n))
    }
}

/// Str(t) with provenance.
pub fn evaluate(t: &OpTree, spec: &AlphabetSpec) -> Result<(Structure, Provenance)> {
    evaluate_marked(t, spec, 0, &HashMap::new())
}

/// Str(t) over the alphabet vocabulary widened by `extra_labels` labels, with
/// `marks` added to the named elements (absent elements are ignored).
pub fn evaluate_marked(
    t: &OpTree,
    spec: &AlphabetSpec,
    extra_labels: u32,
    marks: &HashMap<Elem, LabelSet>,
) -> Result<(Structure, Provenance)> {
    let vocab = Arc::new(
        spec.vocab()
            .with_label_count(spec.vocab().label_count() + extra_labels)?,
    );
    let rels = Rels::new(&vocab);
    let mut b = StructureBuilder::new(vocab.clone());
    let mut elems: Vec<Elem> = Vec::new();
    let mut labels: HashMap<Elem, LabelSet> = HashMap::new();
    let mut owner = HashMap::new();
    let mut ranges: Vec<(usize, usize)> = Vec::new();

    enum Visit<'a> {
        Enter(&'a Arc<Node>),
        Exit(&'a Arc<Node>, usize, Option<Elem>),
    }
    let mut stack = vec![Visit::Enter(t.root())];
    while let Some(v) = stack.pop() {
        match v {
            Visit::Enter(n) => match n.kind() {
                NodeKind::Leaf(sym) => {
                    let leaf = &spec.leaf(*sym).structure;
                    let start = elems.len();
                    let map = |e: Elem| leaf_element(n.id(), e.0);
                    for &e in leaf.universe() {
                        let g = map(e);
                        elems.push(g);
                        owner.insert(g, n.id());
                        let l = leaf.labels_of(e) | marks.get(&g).copied().unwrap_or(0);
                        labels.insert(g, l);
                        b.add_element(g);
                        b.add_labels(g, l);
                    }
                    for r in 0..leaf.vocab().relations().len() {
                        for tuple in leaf.tuples(r) {
                            b.add_tuple(r, tuple.iter().map(|e| map(*e)).collect());
                        }
                    }
                    ranges.push((start, elems.len()));
                }
                NodeKind::Internal(op, children) => {
                    let start = elems.len();
                    let root = match spec.op(*op).kind {
                        OpKind::Tree { label } => {
                            let r = leaf_element(n.id(), 0);
                            let l = label_bit(label) | marks.get(&r).copied().unwrap_or(0);
                            elems.push(r);
                            owner.insert(r, n.id());
                            labels.insert(r, l);
                            b.add_element(r);
                            b.add_labels(r, l);
                            Some(r)
                        }
                        _ => None,
                    };
                    stack.push(Visit::Exit(n, start, root));
                    for c in children.iter().rev() {
                        stack.push(Visit::Enter(c));
                    }
                }
            },
            Visit::Exit(n, start, root) => {
                let NodeKind::Internal(op, children) = n.kind() else {
                    unreachable!()
                };
                let child_ranges = ranges.split_off(ranges.len() - children.len());
                let groups: Vec<&[Elem]> =
                    child_ranges.iter().map(|&(s, e)| &elems[s..e]).collect();
                link(
                    &spec.op(*op).kind,
                    &rels,
                    root,
                    &groups,
                    &|e| labels[&e],
                    &mut b,
                )?;
                ranges.push((start, elems.len()));
            }
        }
    }
    Ok((b.finish()?, Provenance { owner }))
}

struct Rels {
    edge: Option<usize>,
    lt: Option<usize>,
    anc: Option<usize>,
    left: Option<usize>,
}

impl Rels {
    fn new(v: &Vocabulary) -> Rels {
        Rels {
            edge: v.relation_index(REL_EDGE),
            lt: v.relation_index(REL_LT),
            anc: v.relation_index(REL_ANC),
            left: v.relation_index(REL_LEFT),
        }
    }
}

fn need(r: Option<usize>, name: &str) -> Result<usize> {
    r.ok_or_else(|| Error::domain(format!("vocabulary lacks relation {name}")))
}

/// Add the tuples an operation creates between its inputs `groups` (in order)
/// and, for tree nodes, from the fresh `root`.
fn link(
    kind: &OpKind,
    rels: &Rels,
    root: Option<Elem>,
    groups: &[&[Elem]],
    labels: &dyn Fn(Elem) -> LabelSet,
    b: &mut StructureBuilder,
) -> Result<()> {
    match kind {
        OpKind::Union => {}
        OpKind::Join { matrix } => {
            let e = need(rels.edge, REL_EDGE)?;
            let n = matrix.len();
            let mut earlier: Vec<Vec<Elem>> = vec![Vec::new(); n];
            for g in groups {
                for &v in g.iter() {
                    let lv = labels(v);
                    for k in (0..n).filter(|k| lv >> k & 1 == 1) {
                        for (l, row) in matrix.iter().enumerate() {
                            if row[k] {
                                for &u in &earlier[l] {
                                    b.add_tuple(e, vec![u, v].into());
                                    b.add_tuple(e, vec![v, u].into());
                                }
                            }
                        }
                    }
                }
                for &v in g.iter() {
                    let lv = labels(v);
                    for (l, bucket) in earlier.iter_mut().enumerate() {
                        if lv >> l & 1 == 1 {
                            bucket.push(v);
                        }
                    }
                }
            }
        }
        OpKind::Concat => before(need(rels.lt, REL_LT)?, groups, b),
        OpKind::Tree { .. } => {
            let left = need(rels.left, REL_LEFT)?;
            before(left, groups, b);
            if let Some(r) = root {
                let anc = need(rels.anc, REL_ANC)?;
                for g in groups {
                    for &x in g.iter() {
                        b.add_tuple(anc, vec![r, x].into());
                    }
                }
            }
        }
    }
    Ok(())
}

// rel(x, y) for x in an earlier group and y in a later one.
fn before(rel: usize, groups: &[&[Elem]], b: &mut StructureBuilder) {
    for (j, g) in groups.iter().enumerate() {
        for earlier in &groups[..j] {
            for &x in earlier.iter() {
                for &y in g.iter() {
                    b.add_tuple(rel, vec![x, y].into());
                }
            }
        }
    }
}

/// One step of the compositional semantics, applied to arbitrary structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CombineStep {
    /// The operation on its full argument tuple.
    Apply,
    /// Tree nodes only: fresh root over the first child, marked open.
    Init,
    /// Tree nodes only: append the remaining inputs under the open root of input 0.
    Step,
    /// Tree nodes only: drop the open mark.
    Close,
}

/// Apply `step` of operation `op` to `inputs` (elements renamed apart first).
/// `vocab` is the working vocabulary including any mark labels; fold states
/// of tree nodes live in `vocab` widened by one "open" label. `root_marks` are
/// extra labels for a tree node's fresh vertex.
pub(crate) fn combine(
    spec: &AlphabetSpec,
    op: usize,
    step: CombineStep,
    inputs: &[&Structure],
    vocab: &Arc<Vocabulary>,
    root_marks: LabelSet,
) -> Result<Structure> {
    let kind = &spec.op(op).kind;
    let open_vocab = Arc::new(vocab.with_label_count(vocab.label_count() + 1)?);
    let open_bit = label_bit(vocab.label_count() + 1);
    let is_tree = matches!(kind, OpKind::Tree { .. });
    if step != CombineStep::Apply && !is_tree {
        return Err(Error::domain(format!(
            "{step:?} applies to tree operations only"
        )));
    }
    if step == CombineStep::Close {
        let [s] = inputs else {
            return Err(Error::domain("close takes one input"));
        };
        return s.mask_labels(open_bit - 1).lift(vocab.clone());
    }
    let out_vocab = if step == CombineStep::Apply {
        vocab
    } else {
        &open_vocab
    };
    let rels = Rels::new(out_vocab);
    let mut b = StructureBuilder::new(out_vocab.clone());
    let mut labels: HashMap<Elem, LabelSet> = HashMap::new();
    let mut groups: Vec<Vec<Elem>> = Vec::new();
    for (i, s) in inputs.iter().enumerate() {
        let renamed = rename_apart(s, i);
        let lifted = if step == CombineStep::Step && i == 0 {
            renamed
        } else {
            renamed.lift(vocab.clone())?
        };
        b.absorb(&lifted)?;
        for &e in lifted.universe() {
            labels.insert(e, lifted.labels_of(e));
        }
        groups.push(lifted.universe().to_vec());
    }
    let root = match (kind, step) {
        (OpKind::Tree { label }, CombineStep::Apply | CombineStep::Init) => {
            let r = Elem(0);
            let mut l = label_bit(*label) | root_marks;
            if step == CombineStep::Init {
                l |= open_bit;
            }
            b.add_element(r);
            b.add_labels(r, l);
            Some(r)
        }
        _ => None,
    };
    if step == CombineStep::Step {
        let (open, rest): (Vec<Elem>, Vec<Elem>) = groups[0]
            .iter()
            .copied()
            .partition(|e| labels[e] & open_bit != 0);
        groups[0] = rest;
        let anc = need(rels.anc, REL_ANC)?;
        for &r in &open {
            for g in &groups[1..] {
                for &x in g {
                    b.add_tuple(anc, vec![r, x].into());
                }
            }
        }
    }
    let slices: Vec<&[Elem]> = groups.iter().map(|g| g.as_slice()).collect();
    link(kind, &rels, root, &slices, &|e| labels[&e], &mut b)?;
    b.finish()
}

fn rename_apart(s: &Structure, i: usize) -> Structure {
    let index: HashMap<Elem, u64> = s
        .universe()
        .iter()
        .enumerate()
        .map(|(k, e)| (*e, k as u64))
        .collect();
    let base = (i as u64 + 1) << 40;
    s.rename(|e| Elem(base | index[&e]))
}
