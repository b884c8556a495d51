use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eftypes::{type_of, OracleConfig, TypeFingerprint};
use crate::error::Result;
use crate::gen::random_tree;
use crate::logic::LogicMode;
use crate::optrees::{combine, evaluate, write_tree, AlphabetSpec, CombineStep, OpKind};
use crate::structures::{write_structure, Structure};

/// A sampled input structure with its type.
#[derive(Debug, Clone)]
pub struct PoolItem {
    /// Where the structure came from (a tree in s-expression form).
    pub label: String,
    pub structure: Structure,
    pub ty: TypeFingerprint,
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub left_output: String,
    pub right_output: String,
}

#[derive(Debug, Clone)]
pub struct FvcReport {
    pub op: String,
    pub mode: LogicMode,
    pub rank: u32,
    pub trials: usize,
    /// Trials whose two argument tuples differed somewhere.
    pub nontrivial: usize,
    pub counterexample: Option<Counterexample>,
}

impl FvcReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Random trees with up to three leaves whose structures have at most
/// `max_size` elements, one per distinct tree.
pub fn build_pool<R: Rng>(
    spec: &AlphabetSpec,
    mode: LogicMode,
    m: u32,
    oracle: &OracleConfig,
    max_size: usize,
    rng: &mut R,
) -> Result<Vec<PoolItem>> {
    let mut seen = BTreeMap::new();
    for attempt in 0..400 {
        let leaves = 1 + attempt % 3;
        let t = random_tree(spec, rng, leaves, &[], &[]);
        let label = write_tree(&t, spec);
        if seen.contains_key(&label) {
            continue;
        }
        let (s, _) = evaluate(&t, spec)?;
        if s.len() > max_size {
            continue;
        }
        let ty = type_of(&s, m, mode, oracle)?;
        seen.insert(
            label.clone(),
            PoolItem {
                label,
                structure: s,
                ty,
            },
        );
    }
    Ok(seen.into_values().collect())
}

/// Check `apply(A) ≡ apply(B)` whenever `A_i ≡ B_i` componentwise, on
/// `trials` random argument tuples of length `arity` drawn from `pool`.
#[allow(clippy::too_many_arguments)]
pub fn verify_congruence<R: Rng>(
    name: &str,
    pool: &[PoolItem],
    arity: usize,
    apply: &dyn Fn(&[&Structure]) -> Result<Structure>,
    mode: LogicMode,
    m: u32,
    oracle: &OracleConfig,
    trials: usize,
    rng: &mut R,
) -> Result<FvcReport> {
    let mut buckets: BTreeMap<&TypeFingerprint, Vec<&PoolItem>> = BTreeMap::new();
    for item in pool {
        buckets.entry(&item.ty).or_default().push(item);
    }
    let buckets: Vec<Vec<&PoolItem>> = buckets.into_values().collect();
    let rich: Vec<&Vec<&PoolItem>> = buckets.iter().filter(|b| b.len() > 1).collect();
    let mut report = FvcReport {
        op: name.to_string(),
        mode,
        rank: m,
        trials: 0,
        nontrivial: 0,
        counterexample: None,
    };
    if buckets.is_empty() {
        return Ok(report);
    }
    for _ in 0..trials {
        let mut left = Vec::with_capacity(arity);
        let mut right = Vec::with_capacity(arity);
        for _ in 0..arity {
            // favour buckets with several members so the pair can differ
            let bucket = if !rich.is_empty() && rng.gen_bool(0.8) {
                *rich.choose(rng).unwrap()
            } else {
                buckets.choose(rng).unwrap()
            };
            left.push(*bucket.choose(rng).unwrap());
            right.push(*bucket.choose(rng).unwrap());
        }
        report.trials += 1;
        if left.iter().zip(&right).any(|(a, b)| a.label != b.label) {
            report.nontrivial += 1;
        }
        let ls: Vec<&Structure> = left.iter().map(|p| &p.structure).collect();
        let rs: Vec<&Structure> = right.iter().map(|p| &p.structure).collect();
        let lo = apply(&ls)?;
        let ro = apply(&rs)?;
        if type_of(&lo, m, mode, oracle)? != type_of(&ro, m, mode, oracle)? {
            report.counterexample = Some(Counterexample {
                left: left.iter().map(|p| p.label.clone()).collect(),
                right: right.iter().map(|p| p.label.clone()).collect(),
                left_output: write_structure(&lo),
                right_output: write_structure(&ro),
            });
            break;
        }
    }
    Ok(report)
}

/// Empirical congruence check of operation `op` at rank `m`. Tree
/// operations are also checked on their open fold states.
pub fn verify_fvc(
    spec: &AlphabetSpec,
    op: usize,
    mode: LogicMode,
    m: u32,
    oracle: &OracleConfig,
    trials: usize,
    seed: u64,
) -> Result<FvcReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sym = spec.op(op);
    let arity = if sym.ranked { sym.rho } else { sym.rho.max(2) };
    let is_tree = matches!(sym.kind, OpKind::Tree { .. });
    let room = oracle.cap(mode).saturating_sub(is_tree as usize);
    let pool = build_pool(spec, mode, m, oracle, (room / arity).max(1), &mut rng)?;
    let vocab = spec.vocab().clone();
    let apply = |xs: &[&Structure]| combine(spec, op, CombineStep::Apply, xs, &vocab, 0);
    let folds = is_tree && !sym.ranked;
    let direct = if folds { trials - trials / 2 } else { trials };
    let mut report = verify_congruence(
        &sym.name, &pool, arity, &apply, mode, m, oracle, direct, &mut rng,
    )?;
    if folds && report.passed() {
        let open = |xs: &[&Structure]| {
            let init = combine(spec, op, CombineStep::Init, &xs[..1], &vocab, 0)?;
            combine(spec, op, CombineStep::Step, &[&init, xs[1]], &vocab, 0)
        };
        let folded = verify_congruence(
            &sym.name,
            &pool,
            2,
            &open,
            mode,
            m,
            oracle,
            trials / 2,
            &mut rng,
        )?;
        report.trials += folded.trials;
        report.nontrivial += folded.nontrivial;
        report.counterexample = folded.counterexample;
    }
    Ok(report)
}
