//! Postcondition checks that work from a fresh annotation of the reduced
//! tree, independently of the reduction bookkeeping.

use std::collections::{HashMap, HashSet};

use super::passes::extents;
use crate::fvc::Annotation;
use crate::optrees::{AlphabetSpec, NodeKind};

/// First repeated eligible (delta1, delta2) pair on a root-to-leaf path, as
/// the addresses of the upper and lower node. Two nodes on a path are
/// eligible when no protected node lies in the upper subtree outside the
/// lower one.
pub fn check_height_fixpoint(
    ann: &Annotation,
    protected: &HashSet<u64>,
) -> Option<(String, String)> {
    let flat = &ann.flat;
    let (_, prot) = extents(flat, protected);
    let mut on_path: HashMap<(usize, usize, usize), usize> = HashMap::new();
    // distinct type ids so keys are cheap
    let mut type_id = HashMap::new();
    let tid: Vec<usize> = ann
        .delta1
        .iter()
        .map(|t| {
            let next = type_id.len();
            *type_id.entry(t).or_insert(next)
        })
        .collect();
    let key = |i: usize| (tid[i], ann.delta2[i], prot[i]);
    enum Visit {
        Enter(usize),
        Exit(usize),
    }
    let mut stack = vec![Visit::Enter(0)];
    while let Some(v) = stack.pop() {
        match v {
            Visit::Enter(i) => {
                if let Some(&upper) = on_path.get(&key(i)) {
                    return Some((flat.address(upper).to_string(), flat.address(i).to_string()));
                }
                on_path.insert(key(i), i);
                stack.push(Visit::Exit(i));
                for &c in flat.nodes[i].children.iter().rev() {
                    stack.push(Visit::Enter(c));
                }
            }
            Visit::Exit(i) => {
                on_path.remove(&key(i));
            }
        }
    }
    None
}

/// First node with two equal eligible fold prefix pairs, as its address and
/// the two child counts. The pair (first, last) is exempt because cutting
/// it would leave a single child.
pub fn check_degree_fixpoint(
    ann: &Annotation,
    spec: &AlphabetSpec,
    protected: &HashSet<u64>,
) -> Option<(String, usize, usize)> {
    let flat = &ann.flat;
    let (_, prot) = extents(flat, protected);
    for (i, f) in flat.nodes.iter().enumerate() {
        let NodeKind::Internal(op, _) = f.node.kind() else {
            continue;
        };
        let sym = spec.op(*op);
        if sym.ranked || sym.rho != 2 {
            continue;
        }
        let n = f.children.len();
        let mut seen: HashMap<(&_, usize, usize), usize> = HashMap::new();
        let mut acc = 0;
        for p in &ann.prefixes[i] {
            acc += prot[f.children[p.children - 1]];
            let k = (&p.chi, p.h, acc);
            if let Some(&first) = seen.get(&k) {
                if !(first == 1 && p.children == n) {
                    return Some((flat.address(i).to_string(), first, p.children));
                }
            } else {
                seen.insert(k, p.children);
            }
        }
    }
    None
}
