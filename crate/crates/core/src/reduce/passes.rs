use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::{rebuild, Live, Pair};
use crate::error::{Error, Result};
use crate::optrees::{AlphabetSpec, Flat, Node, NodeKind, OpTree};

/// Subtree extents (preorder, so node i spans i..i+len[i]) and protected
/// node counts.
pub(crate) fn extents(flat: &Flat, protected: &HashSet<u64>) -> (Vec<usize>, Vec<usize>) {
    let n = flat.nodes.len();
    let mut len = vec![1usize; n];
    let mut prot = vec![0usize; n];
    for i in (0..n).rev() {
        prot[i] += protected.contains(&flat.nodes[i].node.id()) as usize;
        if let Some(p) = flat.nodes[i].parent {
            len[p] += len[i];
            prot[p] += prot[i];
        }
    }
    (len, prot)
}

/// Sparse table answering "deepest member in a preorder range" for one
/// group of nodes (ties go to the earlier node).
struct Deepest {
    members: Vec<usize>,
    levels: Vec<Vec<usize>>,
}

impl Deepest {
    fn new(members: Vec<usize>, depth: &[usize]) -> Deepest {
        let better = |a: usize, b: usize| if depth[b] > depth[a] { b } else { a };
        let mut levels = vec![members.clone()];
        let mut w = 1;
        while 2 * w <= members.len() {
            let prev = levels.last().unwrap();
            let next = (0..=members.len() - 2 * w)
                .map(|p| better(prev[p], prev[p + w]))
                .collect();
            levels.push(next);
            w *= 2;
        }
        Deepest { members, levels }
    }

    /// Deepest member with preorder index in `lo..hi`.
    fn query(&self, lo: usize, hi: usize, depth: &[usize]) -> Option<usize> {
        let l = self.members.partition_point(|&x| x < lo);
        let r = self.members.partition_point(|&x| x < hi);
        if l >= r {
            return None;
        }
        let k = (usize::BITS - 1 - (r - l).leading_zeros()) as usize;
        let (a, b) = (self.levels[k][l], self.levels[k][r - (1 << k)]);
        Some(if depth[b] > depth[a] { b } else { a })
    }
}

/// One top-down pass replacing each node by its deepest descendant with the
/// same pair and protected count. Returns the new tree and the number of
/// replacements; the result is a fixpoint. A replacement takes over the
/// prefix pair of the position it moves into.
pub(crate) fn height_pass(
    t: &OpTree,
    live: &mut Live,
    protected: &HashSet<u64>,
) -> Result<(OpTree, usize)> {
    let flat = t.flatten();
    let n = flat.nodes.len();
    let (len, prot) = extents(&flat, protected);
    let depth: Vec<usize> = flat.nodes.iter().map(|f| f.depth).collect();
    let mut group_of: HashMap<(&Pair, usize), usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut group = vec![0usize; n];
    for i in 0..n {
        let pair = live
            .pair
            .get(&flat.nodes[i].node.id())
            .ok_or_else(|| Error::domain("node without annotation"))?;
        let next = members.len();
        let g = *group_of.entry((pair, prot[i])).or_insert(next);
        if g == next {
            members.push(Vec::new());
        }
        members[g].push(i);
        group[i] = g;
    }
    let tables: Vec<Option<Deepest>> = members
        .into_iter()
        .map(|m| (m.len() > 1).then(|| Deepest::new(m, &depth)))
        .collect();
    let mut redirect: HashMap<u64, Arc<Node>> = HashMap::new();
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let target = tables[group[i]]
            .as_ref()
            .and_then(|d| d.query(i + 1, i + len[i], &depth));
        let here = match target {
            Some(j) => {
                redirect.insert(flat.nodes[i].node.id(), flat.nodes[j].node.clone());
                j
            }
            None => i,
        };
        stack.extend(flat.nodes[here].children.iter().rev());
    }
    if redirect.is_empty() {
        return Ok((t.clone(), 0));
    }
    for (from, to) in &redirect {
        if let Some(p) = live.after.get(from).cloned() {
            live.after.insert(to.id(), p);
        }
    }
    let root = rebuild(t.root(), &redirect, &HashMap::new());
    Ok((OpTree::with_next_id(root, t.next_id()), redirect.len()))
}

/// Kept child positions of one binary-folded node: scanning left to right,
/// each kept position jumps past the last later position with the same key.
/// The first and last positions never pair up, so two children remain.
pub(crate) fn degree_plan<K: std::hash::Hash + Eq>(keys: &[K]) -> (Vec<usize>, usize) {
    let n = keys.len();
    let mut positions: HashMap<&K, Vec<usize>> = HashMap::new();
    for (i, k) in keys.iter().enumerate() {
        positions.entry(k).or_default().push(i);
    }
    let mut kept = Vec::new();
    let mut splices = 0;
    let mut i = 0;
    while i < n {
        kept.push(i);
        let jump = positions[&keys[i]]
            .iter()
            .rev()
            .copied()
            .find(|&k| k > i && !(i == 0 && k == n - 1));
        match jump {
            Some(k) => {
                splices += 1;
                i = k + 1;
            }
            None => i += 1,
        }
    }
    (kept, splices)
}

/// Splice out repeated prefix blocks at every unranked binary-folded node.
pub(crate) fn degree_pass(
    t: &OpTree,
    spec: &AlphabetSpec,
    live: &Live,
    protected: &HashSet<u64>,
) -> Result<(OpTree, usize)> {
    let flat = t.flatten();
    let (_, prot) = extents(&flat, protected);
    let mut keep: HashMap<u64, Vec<Arc<Node>>> = HashMap::new();
    let mut steps = 0;
    for (i, f) in flat.nodes.iter().enumerate() {
        let NodeKind::Internal(op, children) = f.node.kind() else {
            continue;
        };
        let sym = spec.op(*op);
        if sym.ranked || sym.rho == 1 {
            continue;
        }
        if sym.rho > 2 {
            return Err(Error::Unsupported(format!(
                "degree reduction of {} (folds {} children at a time) at {}",
                sym.name,
                sym.rho - 1,
                flat.address(i)
            )));
        }
        if children.len() < 3 {
            continue;
        }
        let mut acc = 0;
        let mut keys = Vec::with_capacity(children.len());
        for (c, &ci) in children.iter().zip(&f.children) {
            acc += prot[ci];
            let p = live
                .after
                .get(&c.id())
                .ok_or_else(|| Error::domain("child without prefix annotation"))?;
            keys.push((p, acc));
        }
        let (kept, splices) = degree_plan(&keys);
        if splices > 0 {
            steps += splices;
            keep.insert(
                f.node.id(),
                kept.iter().map(|&k| children[k].clone()).collect(),
            );
        }
    }
    if keep.is_empty() {
        return Ok((t.clone(), 0));
    }
    let root = rebuild(t.root(), &HashMap::new(), &keep);
    Ok((OpTree::with_next_id(root, t.next_id()), steps))
}
