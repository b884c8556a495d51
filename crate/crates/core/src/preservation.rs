//! Bounded brute-force checks of PSC(k) and PCE(k).
//!
//! Substructures are induced substructures on arbitrary subsets of the
//! universe, the empty one included: otherwise "at least one element" would
//! be PSC(0). All verdicts are scoped to the enumerated sizes.

use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::logic::{eval_sentence, Formula};
use crate::structures::{
    enumerate_structures, Elem, ElementSet, EnumSpace, Structure, Vocabulary, DEFAULT_RAW_CAP,
};

/// Default cap on |A| for subset enumeration (2^|A| model checks).
pub const DEFAULT_SUBSET_BUDGET: usize = 6;

/// Class membership predicate for relativized checks.
pub type Filter<'a> = &'a (dyn Fn(&Structure) -> Result<bool> + Sync);

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub vocab: Arc<Vocabulary>,
    pub space: EnumSpace,
    pub max_size: usize,
    pub subset_budget: usize,
    pub raw_cap: u128,
}

impl CheckOptions {
    pub fn new(vocab: Arc<Vocabulary>, max_size: usize) -> CheckOptions {
        CheckOptions {
            vocab,
            space: EnumSpace::All,
            max_size,
            subset_budget: DEFAULT_SUBSET_BUDGET,
            raw_cap: DEFAULT_RAW_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    TrueUpTo(usize),
    False,
}

impl Verdict {
    pub fn holds(self) -> bool {
        matches!(self, Verdict::TrueUpTo(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::TrueUpTo(n) => write!(f, "TRUE-UP-TO-{n}"),
            Verdict::False => write!(f, "FALSE"),
        }
    }
}

/// A k-crux C of A: every substructure containing C (in the class) models phi.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CruxCertificate {
    pub structure: Structure,
    pub crux: Vec<Elem>,
    /// Substructures containing C that were model-checked.
    pub verified: usize,
}

/// A structure with a family of its substructures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverInstance {
    pub structure: Structure,
    pub members: Vec<ElementSet>,
}

impl CoverInstance {
    /// Every subset of at most k elements lies in some member.
    pub fn is_k_ary_cover(&self, k: usize) -> bool {
        !self.members.is_empty()
            && (0..=k.min(self.structure.len())).all(|j| {
                self.structure.universe().iter().combinations(j).all(|c| {
                    self.members
                        .iter()
                        .any(|m| c.iter().all(|e| m.contains(**e)))
                })
            })
    }
}

#[derive(Debug, Clone)]
pub struct PscReport {
    pub verdict: Verdict,
    pub structures: usize,
    pub models: usize,
    /// A model of phi without a k-crux.
    pub counterexample: Option<Structure>,
}

#[derive(Debug, Clone)]
pub struct PceReport {
    pub verdict: Verdict,
    pub structures: usize,
    /// A non-model with a k-ary cover by models of phi.
    pub counterexample: Option<CoverInstance>,
}

#[derive(Debug, Clone)]
pub struct DualityReport {
    pub psc: Verdict,
    pub pce_of_negation: Verdict,
    pub agree: bool,
}

/// phi and class membership on every induced substructure, indexed by the
/// bitmask over the sorted universe.
struct SubsetTable {
    sat: Vec<bool>,
    member: Vec<bool>,
}

impl SubsetTable {
    fn new(
        phi: &Formula,
        a: &Structure,
        filter: Option<Filter>,
        budget: usize,
    ) -> Result<SubsetTable> {
        let n = a.len();
        if n > budget {
            return Err(Error::budget(format!(
                "{n} elements needs 2^{n} substructure checks (budget {budget} elements)"
            )));
        }
        let u = a.universe();
        let mut sat = Vec::with_capacity(1 << n);
        let mut member = Vec::with_capacity(1 << n);
        for mask in 0usize..1 << n {
            let set = ElementSet(
                (0..n)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| u[i])
                    .collect(),
            );
            let b = a.induced_substructure(&set)?;
            let inside = match filter {
                Some(f) => f(&b)?,
                None => true,
            };
            member.push(inside);
            sat.push(inside && eval_sentence(phi, &b)?);
        }
        Ok(SubsetTable { sat, member })
    }

    fn full(&self) -> usize {
        self.sat.len() - 1
    }

    /// Class members containing `c`.
    fn supersets(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.sat.len()).filter(move |s| s & c == c && self.member[*s])
    }

    fn is_crux(&self, c: usize) -> bool {
        self.supersets(c).all(|s| self.sat[s])
    }

    /// Largest phi-model in the class containing `c` (ties: smallest mask).
    fn maximal_model(&self, c: usize) -> Option<usize> {
        self.supersets(c)
            .filter(|s| self.sat[*s])
            .max_by_key(|s| (s.count_ones(), std::cmp::Reverse(*s)))
    }
}

fn candidates(n: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..=k.min(n)).flat_map(move |j| {
        (0..n)
            .combinations(j)
            .map(|c| c.iter().map(|i| 1usize << i).sum())
    })
}

fn mask_elems(a: &Structure, mask: usize) -> Vec<Elem> {
    let u = a.universe();
    (0..u.len())
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| u[i])
        .collect()
}

fn require_sentence(phi: &Formula) -> Result<()> {
    if phi.is_sentence() {
        Ok(())
    } else {
        Err(Error::domain("formula has free variables"))
    }
}

/// First k-crux of A for phi, by size and then lexicographically.
pub fn find_crux(
    phi: &Formula,
    a: &Structure,
    k: usize,
    budget: usize,
) -> Result<Option<CruxCertificate>> {
    find_crux_in(phi, a, k, budget, None)
}

pub fn find_crux_in(
    phi: &Formula,
    a: &Structure,
    k: usize,
    budget: usize,
    filter: Option<Filter>,
) -> Result<Option<CruxCertificate>> {
    require_sentence(phi)?;
    let table = SubsetTable::new(phi, a, filter, budget)?;
    if !table.sat[table.full()] {
        return Err(Error::domain("the structure does not model the sentence"));
    }
    Ok(candidates(a.len(), k)
        .find(|&c| table.is_crux(c))
        .map(|c| CruxCertificate {
            structure: a.clone(),
            crux: mask_elems(a, c),
            verified: table.supersets(c).count(),
        }))
}

fn universe(opts: &CheckOptions, filter: Option<Filter>) -> Result<Vec<Structure>> {
    if opts.max_size > opts.subset_budget {
        return Err(Error::budget(format!(
            "max size {} exceeds the subset budget {}",
            opts.max_size, opts.subset_budget
        )));
    }
    let all = enumerate_structures(opts.vocab.clone(), opts.max_size, opts.space, opts.raw_cap)?;
    let mut out = Vec::new();
    for s in all {
        if filter.map_or(Ok(true), |f| f(&s))? {
            out.push(s);
        }
    }
    Ok(out)
}

/// Every model of phi up to `opts.max_size` elements has a k-crux.
pub fn psc_check(
    phi: &Formula,
    k: usize,
    opts: &CheckOptions,
    filter: Option<Filter>,
) -> Result<PscReport> {
    require_sentence(phi)?;
    let structures = universe(opts, filter)?;
    // (is model, has crux) per structure
    let results: Vec<(bool, bool)> = structures
        .par_iter()
        .map(|a| {
            let t = SubsetTable::new(phi, a, filter, opts.subset_budget)?;
            let model = t.sat[t.full()];
            Ok((model, model && candidates(a.len(), k).any(|c| t.is_crux(c))))
        })
        .collect::<Result<_>>()?;
    let bad = results.iter().position(|&(m, c)| m && !c);
    Ok(PscReport {
        verdict: if bad.is_some() {
            Verdict::False
        } else {
            Verdict::TrueUpTo(opts.max_size)
        },
        structures: structures.len(),
        models: results.iter().filter(|r| r.0).count(),
        counterexample: bad.map(|i| structures[i].clone()),
    })
}

/// Every structure up to `opts.max_size` elements with a k-ary cover by
/// models of phi among its substructures models phi. It suffices to try the
/// cover made of one maximal model above each candidate set.
pub fn pce_check(
    phi: &Formula,
    k: usize,
    opts: &CheckOptions,
    filter: Option<Filter>,
) -> Result<PceReport> {
    require_sentence(phi)?;
    let structures = universe(opts, filter)?;
    let covers: Vec<Option<CoverInstance>> = structures
        .par_iter()
        .map(|a| {
            let t = SubsetTable::new(phi, a, filter, opts.subset_budget)?;
            if t.sat[t.full()] {
                return Ok(None);
            }
            let mut members = Vec::new();
            for c in candidates(a.len(), k) {
                match t.maximal_model(c) {
                    Some(s) => members.push(s),
                    None => return Ok(None),
                }
            }
            members.sort_unstable();
            members.dedup();
            Ok(Some(CoverInstance {
                structure: a.clone(),
                members: members
                    .into_iter()
                    .map(|s| ElementSet(mask_elems(a, s).into_iter().collect()))
                    .collect(),
            }))
        })
        .collect::<Result<_>>()?;
    let counterexample = covers.into_iter().flatten().next();
    Ok(PceReport {
        verdict: if counterexample.is_some() {
            Verdict::False
        } else {
            Verdict::TrueUpTo(opts.max_size)
        },
        structures: structures.len(),
        counterexample,
    })
}

/// PSC(k) of phi against PCE(k) of its negation.
pub fn duality_check(
    phi: &Formula,
    k: usize,
    opts: &CheckOptions,
    filter: Option<Filter>,
) -> Result<DualityReport> {
    let psc = psc_check(phi, k, opts, filter)?.verdict;
    let pce_of_negation = pce_check(&Formula::not(phi.clone()), k, opts, filter)?.verdict;
    Ok(DualityReport {
        psc,
        pce_of_negation,
        agree: psc == pce_of_negation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, LogicMode};
    use crate::structures::test_graph as graph;

    fn f(s: &str) -> Formula {
        parse_formula(s, &Vocabulary::graph(0), LogicMode::Fo).unwrap()
    }

    fn opts(n: usize) -> CheckOptions {
        CheckOptions::new(Arc::new(Vocabulary::graph(0)), n)
    }

    const TWO: &str = "exists x. exists y. ~(x=y)";

    #[test]
    fn crux_examples() {
        let clique = f("forall x. forall y. (x=y | E(x,y))");
        let k3 = graph(3, &[(1, 2), (2, 1), (2, 3), (3, 2), (1, 3), (3, 1)]);
        assert_eq!(find_crux(&clique, &k3, 0, 6).unwrap().unwrap().crux, vec![]);
        let dom = f("exists x. forall y. (y=x | E(y,x))");
        let star = graph(4, &[(2, 1), (3, 1), (4, 1), (1, 2), (1, 3), (1, 4)]);
        let c = find_crux(&dom, &star, 1, 6).unwrap().unwrap();
        assert_eq!(c.crux, vec![star.universe()[0]]);
        assert_eq!(c.verified, 8);
        assert!(find_crux(&f(TWO), &graph(3, &[]), 1, 6).unwrap().is_none());
        assert!(find_crux(&f(TWO), &graph(1, &[]), 1, 6).is_err());
        assert!(find_crux(&f(TWO), &graph(7, &[]), 1, 6)
            .unwrap_err()
            .is_budget());
    }

    #[test]
    fn at_least_two_is_psc2_not_psc1() {
        let o = CheckOptions {
            space: EnumSpace::SimpleGraphs,
            ..opts(5)
        };
        assert_eq!(
            psc_check(&f(TWO), 2, &o, None).unwrap().verdict,
            Verdict::TrueUpTo(5)
        );
        let r = psc_check(&f(TWO), 1, &o, None).unwrap();
        assert_eq!(r.verdict, Verdict::False);
        assert_eq!(r.counterexample.unwrap().len(), 2);
    }

    #[test]
    fn universal_sentences_are_hereditary() {
        let phi = f("forall x. forall y. (E(x,y) -> E(y,x))");
        assert!(psc_check(&phi, 0, &opts(3), None).unwrap().verdict.holds());
    }

    #[test]
    fn pce_examples() {
        let loops = f("forall x. E(x,x)");
        assert!(pce_check(&loops, 1, &opts(3), None)
            .unwrap()
            .verdict
            .holds());
        let some_loop = f("exists x. E(x,x)");
        // a non-model has no loop anywhere, so no substructure models phi
        assert!(pce_check(&some_loop, 1, &opts(3), None)
            .unwrap()
            .verdict
            .holds());
        let r = pce_check(&f("~(exists x. exists y. ~(x=y))"), 1, &opts(3), None).unwrap();
        assert_eq!(r.verdict, Verdict::False);
        let cover = r.counterexample.unwrap();
        assert!(cover.is_k_ary_cover(1));
        assert_eq!(cover.structure.len(), 2);
    }

    #[test]
    fn duality_on_examples() {
        for (phi, k) in [
            (TWO, 2),
            (TWO, 1),
            ("forall x. forall y. (x=y | E(x,y))", 0),
        ] {
            let r = duality_check(&f(phi), k, &opts(3), None).unwrap();
            assert!(r.agree, "{phi} {k}: {r:?}");
        }
    }

    #[test]
    fn filter_relativizes() {
        // over loop-free structures "no loops" is trivially hereditary, and
        // "exists a loop" has no models
        let no_loops = |s: &Structure| eval_sentence(&f("forall x. ~E(x,x)"), s);
        let r = psc_check(&f("exists x. E(x,x)"), 0, &opts(3), Some(&no_loops)).unwrap();
        assert_eq!(r.models, 0);
        assert!(r.verdict.holds());
    }
}
