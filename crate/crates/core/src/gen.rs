//! Seeded random operation trees and formulas.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::logic::Formula;
use crate::optrees::{AlphabetSpec, Node, OpTree};
use crate::structures::Vocabulary;

/// Random tree with exactly `leaves` leaves (when the alphabet permits it;
/// otherwise as close as its arities allow). Leaf and op symbols are drawn
/// uniformly from `leaf_pool` / `op_pool` (all symbols when empty).
pub fn random_tree<R: Rng>(
    spec: &AlphabetSpec,
    rng: &mut R,
    leaves: usize,
    leaf_pool: &[usize],
    op_pool: &[usize],
) -> OpTree {
    let all_leaves: Vec<usize> = (0..spec.leaves().len()).collect();
    let all_ops: Vec<usize> = (0..spec.ops().len()).collect();
    let leaf_pool = if leaf_pool.is_empty() {
        &all_leaves[..]
    } else {
        leaf_pool
    };
    let op_pool = if op_pool.is_empty() {
        &all_ops[..]
    } else {
        op_pool
    };
    let mut next_id = 0;
    let root = build(
        spec,
        rng,
        leaves.max(1),
        leaf_pool,
        op_pool,
        &mut next_id,
        0,
    );
    OpTree::new(root)
}

fn build<R: Rng>(
    spec: &AlphabetSpec,
    rng: &mut R,
    leaves: usize,
    leaf_pool: &[usize],
    op_pool: &[usize],
    next_id: &mut u64,
    unary_run: usize,
) -> Arc<Node> {
    let id = *next_id;
    *next_id += 1;
    // (op, arity) choices that fit the leaf budget; unary chains are capped.
    let mut options = Vec::new();
    for &o in op_pool {
        let op = spec.op(o);
        let mut a = op.rho;
        while a <= leaves {
            if op.allows(a) && (a > 1 || unary_run < 2) {
                options.push((o, a));
            }
            if op.ranked || op.rho == 1 {
                break;
            }
            a += op.rho - 1;
        }
    }
    let leaf_here = leaves == 1 && (options.is_empty() || rng.gen_bool(0.7));
    if leaf_here || options.is_empty() {
        return Node::leaf(id, *leaf_pool.choose(rng).expect("leaf pool is non-empty"));
    }
    let &(op, arity) = options.choose(rng).unwrap();
    // Split the leaves into `arity` positive parts.
    let mut cuts: Vec<usize> = (1..leaves).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(arity - 1).collect();
    cuts.sort_unstable();
    let mut parts = Vec::with_capacity(arity);
    let mut prev = 0;
    for c in cuts {
        parts.push(c - prev);
        prev = c;
    }
    parts.push(leaves - prev);
    let run = if arity == 1 { unary_run + 1 } else { 0 };
    let children = parts
        .into_iter()
        .map(|n| build(spec, rng, n, leaf_pool, op_pool, next_id, run))
        .collect();
    Node::internal(id, op, children)
}

/// Left comb of binary applications of `op` over `leaf`, with `internal` op nodes.
pub fn left_comb(op: usize, leaf: usize, internal: usize) -> OpTree {
    let mut next = 0u64;
    let mut node = Node::leaf(next, leaf);
    next += 1;
    for _ in 0..internal {
        let right = Node::leaf(next, leaf);
        node = Node::internal(next + 1, op, vec![node, right]);
        next += 2;
    }
    OpTree::new(node)
}

/// Flat node `op` with `n` children all equal to `leaf`.
pub fn flat_node(op: usize, leaf: usize, n: usize) -> OpTree {
    let children = (1..=n as u64).map(|i| Node::leaf(i, leaf)).collect();
    OpTree::new(Node::internal(0, op, children))
}

/// Random sentence of quantifier rank at most `rank` over `vocab`.
/// Set quantifiers are used when `mso` is set.
pub fn random_sentence<R: Rng>(vocab: &Vocabulary, rng: &mut R, rank: u32, mso: bool) -> Formula {
    let names = ["x", "y", "z", "u", "v", "w"];
    let sets = ["X", "Y", "Z"];
    let mut bound = Vec::new();
    let mut bound_sets = Vec::new();
    gen_formula(
        vocab,
        rng,
        rank,
        mso,
        &names,
        &sets,
        &mut bound,
        &mut bound_sets,
        3,
    )
}

#[allow(clippy::too_many_arguments)]
fn gen_formula<R: Rng>(
    vocab: &Vocabulary,
    rng: &mut R,
    rank: u32,
    mso: bool,
    names: &[&'static str],
    sets: &[&'static str],
    bound: &mut Vec<&'static str>,
    bound_sets: &mut Vec<&'static str>,
    fuel: u32,
) -> Formula {
    let can_quantify = rank > 0 && bound.len() < names.len();
    let must_quantify = bound.is_empty() && can_quantify;
    if must_quantify || (can_quantify && rng.gen_bool(0.5)) {
        let use_set =
            mso && bound_sets.len() < sets.len() && !bound.is_empty() && rng.gen_bool(0.35);
        if use_set {
            let v = sets[bound_sets.len()];
            bound_sets.push(v);
            let body = gen_formula(
                vocab,
                rng,
                rank - 1,
                mso,
                names,
                sets,
                bound,
                bound_sets,
                fuel,
            );
            bound_sets.pop();
            return if rng.gen_bool(0.5) {
                Formula::ExistsSet(v.into(), Box::new(body))
            } else {
                Formula::ForallSet(v.into(), Box::new(body))
            };
        }
        let v = names[bound.len()];
        bound.push(v);
        let body = gen_formula(
            vocab,
            rng,
            rank - 1,
            mso,
            names,
            sets,
            bound,
            bound_sets,
            fuel,
        );
        bound.pop();
        return if rng.gen_bool(0.5) {
            Formula::exists(v, body)
        } else {
            Formula::forall(v, body)
        };
    }
    if bound.is_empty() {
        // rank 0 sentence: a trivial tautology or contradiction over no variables
        // is not expressible; quantify anyway with a rank-1 fallback.
        let body = Formula::Eq("x".into(), "x".into());
        return Formula::exists("x", body);
    }
    if fuel > 0 && rng.gen_bool(0.45) {
        let a = gen_formula(
            vocab,
            rng,
            rank,
            mso,
            names,
            sets,
            bound,
            bound_sets,
            fuel - 1,
        );
        let b = gen_formula(
            vocab,
            rng,
            rank,
            mso,
            names,
            sets,
            bound,
            bound_sets,
            fuel - 1,
        );
        return match rng.gen_range(0..3) {
            0 => Formula::and(a, b),
            1 => Formula::or(a, b),
            _ => Formula::implies(a, b),
        };
    }
    let atom = random_atom(vocab, rng, bound, bound_sets);
    if rng.gen_bool(0.4) {
        Formula::not(atom)
    } else {
        atom
    }
}

fn random_atom<R: Rng>(
    vocab: &Vocabulary,
    rng: &mut R,
    bound: &[&'static str],
    bound_sets: &[&'static str],
) -> Formula {
    let var = |rng: &mut R| bound.choose(rng).unwrap().to_string();
    let mut kinds = vec![0u8];
    if !vocab.relations().is_empty() {
        kinds.extend([1, 1]);
    }
    if vocab.label_count() > 0 {
        kinds.push(2);
    }
    if !bound_sets.is_empty() {
        kinds.extend([3, 3]);
    }
    match *kinds.choose(rng).unwrap() {
        1 => {
            let r = rng.gen_range(0..vocab.relations().len());
            let sym = &vocab.relations()[r];
            Formula::Rel(sym.name.clone(), (0..sym.arity).map(|_| var(rng)).collect())
        }
        2 => Formula::Label(rng.gen_range(1..=vocab.label_count()), var(rng)),
        3 => Formula::Member(bound_sets.choose(rng).unwrap().to_string(), var(rng)),
        _ => Formula::Eq(var(rng), var(rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, LogicMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_trees_are_valid_and_sized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in ["cograph1", "cograph2", "trees", "words"] {
            let spec = AlphabetSpec::builtin(name).unwrap();
            for n in 1..=10 {
                let t = random_tree(&spec, &mut rng, n, &[], &[]);
                t.validate(&spec).unwrap();
                assert_eq!(t.leaf_count(), n, "{name}");
            }
        }
    }

    #[test]
    fn combs() {
        let t = left_comb(0, 0, 5);
        assert_eq!(t.node_count(), 11);
        assert_eq!(t.height(), 5);
        assert_eq!(flat_node(0, 0, 4).max_degree(), 4);
    }

    #[test]
    fn random_sentences_respect_rank_and_reparse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = Vocabulary::graph(1);
        for i in 0..200 {
            let mso = i % 2 == 0;
            let rank = 1 + (i % 3) as u32;
            let f = random_sentence(&v, &mut rng, rank, mso);
            assert!(f.quantifier_rank() <= rank.max(1));
            assert!(f.is_sentence(), "{f}");
            let mode = if mso { LogicMode::Mso } else { LogicMode::Fo };
            assert_eq!(parse_formula(&f.to_string(), &v, mode).unwrap(), f);
        }
    }
}
