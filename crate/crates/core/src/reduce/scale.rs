use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::{
    element_counts, is_induced_in, oracle_verdict, passes::extents, rebuild, require_accepted, Live,
};
use crate::automata::TreeAutomaton;
use crate::error::{Error, Result};
use crate::fvc::{annotate, TypeEngine};
use crate::optrees::{
    evaluate, rebuild_spine, renumber, AlphabetSpec, Flat, Node, NodeKind, OpTree,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDirection {
    Up,
    Down,
    Auto,
}

/// Target size interval for Str of the output tree, in elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleRequest {
    pub lo: usize,
    pub hi: usize,
    pub direction: ScaleDirection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleReport {
    pub size_before: usize,
    pub size_after: usize,
    /// "none", "up" or "down".
    pub direction: &'static str,
    pub steps: usize,
    /// Size changes offered by the moves available on the input tree.
    pub granularity: Vec<usize>,
    pub accepted: bool,
    pub delta1_preserved: bool,
    /// Growing: Str(input) is induced in Str(output). Shrinking: the reverse.
    pub embedding: bool,
    pub oracle_equivalent: Option<bool>,
}

impl ScaleReport {
    pub fn certified(&self) -> bool {
        self.accepted
            && self.delta1_preserved
            && self.embedding
            && self.oracle_equivalent != Some(false)
    }
}

#[derive(Debug, Clone, Copy)]
enum Move {
    /// Node `a` and a proper descendant `b` with equal pairs (flat indices).
    Vertical { a: usize, b: usize },
    /// Children `l+1..=k` of `node` lie between equal fold prefix pairs.
    Horizontal { node: usize, l: usize, k: usize },
}

fn moves(
    flat: &Flat,
    spec: &AlphabetSpec,
    live: &Live,
    size: &[usize],
    shrinking: bool,
) -> Vec<(Move, usize)> {
    let (len, _) = extents(flat, &Default::default());
    let mut out = Vec::new();
    for a in 0..flat.nodes.len() {
        let pa = &live.pair[&flat.nodes[a].node.id()];
        for b in a + 1..a + len[a] {
            if &live.pair[&flat.nodes[b].node.id()] == pa && size[a] > size[b] {
                out.push((Move::Vertical { a, b }, size[a] - size[b]));
            }
        }
        let NodeKind::Internal(op, _) = flat.nodes[a].node.kind() else {
            continue;
        };
        let sym = spec.op(*op);
        if sym.ranked || sym.rho != 2 {
            continue;
        }
        let kids = &flat.nodes[a].children;
        let n = kids.len();
        let after: Vec<_> = kids
            .iter()
            .map(|&c| &live.after[&flat.nodes[c].node.id()])
            .collect();
        for l in 0..n {
            let mut d = 0;
            for k in l + 1..n {
                d += size[kids[k]];
                if after[k] == after[l] && d > 0 && (!shrinking || n - (k - l) >= 2) {
                    out.push((Move::Horizontal { node: a, l, k }, d));
                }
            }
        }
    }
    out
}

/// Grow or shrink `t` until |Str| lies in `[lo, hi]`, keeping the root pair.
pub fn scale_generate(
    t: &OpTree,
    engine: &TypeEngine,
    aut: &TreeAutomaton,
    req: ScaleRequest,
) -> Result<(OpTree, ScaleReport)> {
    if req.lo == 0 || req.lo > req.hi {
        return Err(Error::domain(format!(
            "bad interval [{}, {}]",
            req.lo, req.hi
        )));
    }
    let spec = engine.spec().clone();
    t.validate(&spec)?;
    require_accepted(t, aut)?;
    let none = HashMap::new();
    let ann = annotate(t, engine, aut, &none)?;
    let mut live = Live::from_annotation(&ann);
    let before = ann.sizes[0];
    let grow = before < req.lo;
    let shrink = before > req.hi;
    match req.direction {
        ScaleDirection::Up if shrink => {
            return Err(Error::Infeasible(format!(
                "size {before} is already above {}",
                req.hi
            )))
        }
        ScaleDirection::Down if grow => {
            return Err(Error::Infeasible(format!(
                "size {before} is already below {}",
                req.lo
            )))
        }
        _ => {}
    }
    let granularity: BTreeSet<usize> = {
        let flat = t.flatten();
        let size = element_counts(&flat, &spec);
        moves(&flat, &spec, &live, &size, shrink)
            .into_iter()
            .map(|(_, d)| d)
            .collect()
    };
    let mut cur = t.clone();
    let mut size_now = before;
    let mut steps = 0;
    while size_now < req.lo || size_now > req.hi {
        let flat = cur.flatten();
        let size = element_counts(&flat, &spec);
        let options = moves(&flat, &spec, &live, &size, shrink);
        let chosen = if shrink {
            options
                .iter()
                .filter(|(_, d)| size_now - d >= req.lo)
                .max_by_key(|(_, d)| *d)
                .copied()
        } else {
            let coins: BTreeSet<usize> = options.iter().map(|(_, d)| *d).collect();
            let coin = plan_growth(&coins, req.lo - size_now, req.hi - size_now).map_err(|reach| {
                Error::Infeasible(format!(
                    "cannot grow from {size_now} into [{}, {}]; increments {:?}; reachable sizes {:?}",
                    req.lo,
                    req.hi,
                    coins,
                    reach.iter().map(|r| r + size_now).collect::<Vec<_>>()
                ))
            })?;
            options.iter().find(|(_, d)| *d == coin).copied()
        };
        let Some((mv, d)) = chosen else {
            return Err(Error::Infeasible(format!(
                "cannot shrink from {size_now} into [{}, {}]: no removable repeat of at most {} elements",
                req.lo,
                req.hi,
                size_now - req.lo
            )));
        };
        cur = if shrink {
            apply_cut(&cur, &flat, mv)
        } else {
            apply_pump(&cur, &flat, mv, &mut live)
        };
        size_now = if shrink { size_now - d } else { size_now + d };
        steps += 1;
    }
    let fresh = annotate(&cur, engine, aut, &none)?;
    let (a, _) = evaluate(t, &spec)?;
    let (b, _) = evaluate(&cur, &spec)?;
    debug_assert_eq!(b.len(), size_now);
    let embedding = if shrink {
        is_induced_in(&b, &a)?
    } else {
        is_induced_in(&a, &b)?
    };
    let report = ScaleReport {
        size_before: before,
        size_after: b.len(),
        direction: if steps == 0 {
            "none"
        } else if shrink {
            "down"
        } else {
            "up"
        },
        steps,
        granularity: granularity.into_iter().collect(),
        accepted: aut.is_accepting(fresh.root_state()),
        delta1_preserved: fresh.root_type() == ann.root_type(),
        embedding,
        oracle_equivalent: oracle_verdict(engine, &a, &b)?,
    };
    Ok((cur, report))
}

/// Unbounded coin change: the largest first coin of some sum in
/// `[need_lo, need_hi]` (smallest such sum). Err carries the reachable sums.
fn plan_growth(
    coins: &BTreeSet<usize>,
    need_lo: usize,
    need_hi: usize,
) -> std::result::Result<usize, Vec<usize>> {
    let mut reach = vec![false; need_hi + 1];
    reach[0] = true;
    for s in 1..=need_hi {
        reach[s] = coins.iter().any(|&c| c <= s && reach[s - c]);
    }
    let Some(target) = (need_lo..=need_hi).find(|&s| reach[s]) else {
        return Err((1..=need_hi).filter(|&s| reach[s]).collect());
    };
    Ok(*coins
        .iter()
        .rev()
        .find(|&&c| c <= target && reach[target - c])
        .expect("a reachable sum has a last coin"))
}

fn apply_cut(t: &OpTree, flat: &Flat, mv: Move) -> OpTree {
    let root = match mv {
        Move::Vertical { a, b } => {
            let redirect = HashMap::from([(flat.nodes[a].node.id(), flat.nodes[b].node.clone())]);
            rebuild(t.root(), &redirect, &HashMap::new())
        }
        Move::Horizontal { node, l, k } => {
            let n = &flat.nodes[node].node;
            let kids: Vec<Arc<Node>> = n
                .children()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i <= l || *i > k)
                .map(|(_, c)| c.clone())
                .collect();
            rebuild(t.root(), &HashMap::new(), &HashMap::from([(n.id(), kids)]))
        }
    };
    OpTree::with_next_id(root, t.next_id())
}

fn apply_pump(t: &OpTree, flat: &Flat, mv: Move, live: &mut Live) -> OpTree {
    let mut next_id = t.next_id();
    let root = match mv {
        Move::Vertical { a, b } => {
            // t_a = C[t_b]  becomes  C[C'[t_b]] with C' a fresh copy of C
            let ta = &flat.nodes[a].node;
            let tb = &flat.nodes[b].node;
            let path_a = flat.address(a).0;
            let rel = flat.address(b).0[path_a.len()..].to_vec();
            let copy = renumber(ta, &mut next_id);
            live.copy_from(ta, &copy);
            let inner = rebuild_spine(&copy, &rel, tb.clone());
            match live.after.get(&tb.id()).cloned() {
                Some(p) => live.after.insert(inner.id(), p),
                None => live.after.remove(&inner.id()),
            };
            let outer = rebuild_spine(ta, &rel, inner);
            rebuild_spine(t.root(), &path_a, outer)
        }
        Move::Horizontal { node, l, k } => {
            let n = &flat.nodes[node].node;
            let NodeKind::Internal(op, children) = n.kind() else {
                unreachable!()
            };
            let mut kids: Vec<Arc<Node>> = children[..=k].to_vec();
            for c in &children[l + 1..=k] {
                let copy = renumber(c, &mut next_id);
                live.copy_from(c, &copy);
                kids.push(copy);
            }
            kids.extend_from_slice(&children[k + 1..]);
            let path = flat.address(node).0;
            rebuild_spine(t.root(), &path, Node::internal(n.id(), *op, kids))
        }
    };
    OpTree::with_next_id(root, next_id)
}
