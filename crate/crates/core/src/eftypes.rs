//! Rank-m FO/MSO equivalence types by exhaustive back-and-forth.
//!
//! The type of a parameter sequence at remaining rank `r` is the pair (atomic
//! facts contributed by the newest parameter, set of types of all one-move
//! extensions at rank `r-1`). Facts are recorded incrementally; since siblings
//! share their prefix, comparing increments is the same as comparing full
//! atomic diagrams.
//!
//! The canonical serialization lists the distinct nodes of the type DAG level
//! by level, each level sorted by content, with children referring to sorted
//! positions on the level below. Equal nested sets give identical bytes.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::logic::LogicMode;
use crate::structures::{Indexed, Structure, TupleCache};

/// Size and rank limits for the brute-force oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub fo_cap: usize,
    pub mso_cap: usize,
    pub mso_max_rank: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            fo_cap: 10,
            mso_cap: 8,
            mso_max_rank: 3,
        }
    }
}

impl OracleConfig {
    pub fn cap(&self, mode: LogicMode) -> usize {
        match mode {
            LogicMode::Fo => self.fo_cap,
            LogicMode::Mso => self.mso_cap,
        }
    }

    pub fn admits(&self, size: usize, mode: LogicMode) -> bool {
        size <= self.cap(mode)
    }
}

/// Canonical encoding of a rank-m equivalence class.
#[derive(Clone)]
pub struct TypeFingerprint {
    mode: LogicMode,
    rank: u32,
    canon: Arc<[u8]>,
    digest: [u8; 32],
}

impl TypeFingerprint {
    pub fn mode(&self) -> LogicMode {
        self.mode
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// The full canonical serialization (ASCII).
    pub fn canonical(&self) -> &[u8] {
        &self.canon
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    pub fn digest_hex(&self) -> String {
        self.digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// First 12 hex digits of the digest, for logs.
    pub fn short(&self) -> String {
        self.digest_hex()[..12].to_string()
    }

    /// Rebuild from a stored serialization, recomputing the digest.
    pub fn from_canonical(bytes: &[u8]) -> Result<TypeFingerprint> {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| Error::Table("fingerprint is not ASCII".into()))?;
        let mut parts = text.splitn(3, '|');
        let mode = match parts.next() {
            Some("FO") => LogicMode::Fo,
            Some("MSO") => LogicMode::Mso,
            _ => return Err(Error::Table("fingerprint header lacks a logic".into())),
        };
        let rank = parts
            .next()
            .and_then(|r| r.strip_prefix("m="))
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| Error::Table("fingerprint header lacks a rank".into()))?;
        Ok(Self::from_parts(mode, rank, bytes.to_vec()))
    }

    fn from_parts(mode: LogicMode, rank: u32, canon: Vec<u8>) -> TypeFingerprint {
        let digest: [u8; 32] = Sha256::digest(&canon).into();
        TypeFingerprint {
            mode,
            rank,
            canon: canon.into(),
            digest,
        }
    }
}

impl PartialEq for TypeFingerprint {
    fn eq(&self, other: &Self) -> bool {
        self.digest == other.digest && self.canon == other.canon
    }
}

impl Eq for TypeFingerprint {}

impl Hash for TypeFingerprint {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write(&self.digest[..8]);
    }
}

impl PartialOrd for TypeFingerprint {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TypeFingerprint {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.digest
            .cmp(&other.digest)
            .then_with(|| self.canon.cmp(&other.canon))
    }
}

impl fmt::Debug for TypeFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:m{}:{}", self.mode, self.rank, self.short())
    }
}

impl fmt::Display for TypeFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.digest_hex())
    }
}

pub fn fo_type(a: &Structure, m: u32) -> Result<TypeFingerprint> {
    type_of(a, m, LogicMode::Fo, &OracleConfig::default())
}

pub fn mso_type(a: &Structure, m: u32) -> Result<TypeFingerprint> {
    type_of(a, m, LogicMode::Mso, &OracleConfig::default())
}

pub fn equiv(a: &Structure, b: &Structure, m: u32, mode: LogicMode) -> Result<bool> {
    equiv_with(a, b, m, mode, &OracleConfig::default())
}

pub fn equiv_with(
    a: &Structure,
    b: &Structure,
    m: u32,
    mode: LogicMode,
    cfg: &OracleConfig,
) -> Result<bool> {
    Ok(type_of(a, m, mode, cfg)? == type_of(b, m, mode, cfg)?)
}

/// Oracle type of `a` at rank `m`, subject to the caps in `cfg`.
pub fn type_of(
    a: &Structure,
    m: u32,
    mode: LogicMode,
    cfg: &OracleConfig,
) -> Result<TypeFingerprint> {
    let cap = cfg.cap(mode);
    if a.len() > cap {
        return Err(Error::budget(format!(
            "{mode} oracle on {} elements exceeds cap {cap}",
            a.len()
        )));
    }
    if mode == LogicMode::Mso && m > cfg.mso_max_rank {
        return Err(Error::budget(format!(
            "MSO oracle rank {m} exceeds limit {}",
            cfg.mso_max_rank
        )));
    }
    if a.len() >= 64 {
        return Err(Error::budget("oracle universes are limited to 63 elements"));
    }
    let mut game = Game {
        ix: Indexed::new(a),
        mode,
        label_count: a.vocab().label_count(),
        params: Vec::new(),
        elem_params: Vec::new(),
        tuples: TupleCache::default(),
        nodes: HashMap::new(),
        content: Vec::new(),
    };
    let root = game.node(m);
    let canon = game.serialize(root, m, a);
    Ok(TypeFingerprint::from_parts(mode, m, canon))
}

#[derive(Clone, Copy)]
enum Param {
    Elem(usize),
    Set(u64),
}

struct Game<'a> {
    ix: Indexed<'a>,
    mode: LogicMode,
    label_count: u32,
    params: Vec<Param>,
    elem_params: Vec<usize>,
    tuples: TupleCache,
    // (increment, sorted children) -> local id; content[id] = (level, key)
    nodes: HashMap<(Vec<u8>, Vec<u32>), u32>,
    content: Vec<(u32, Vec<u8>, Vec<u32>)>,
}

impl Game<'_> {
    fn node(&mut self, remaining: u32) -> u32 {
        let incr = self.increment();
        let mut children = Vec::new();
        if remaining > 0 {
            for e in 0..self.ix.n {
                self.params.push(Param::Elem(e));
                self.elem_params.push(e);
                children.push(self.node(remaining - 1));
                self.elem_params.pop();
                self.params.pop();
            }
            if self.mode == LogicMode::Mso {
                for mask in 0..(1u64 << self.ix.n) {
                    self.params.push(Param::Set(mask));
                    children.push(self.node(remaining - 1));
                    self.params.pop();
                }
            }
            children.sort_unstable();
            children.dedup();
        }
        let key = (incr, children);
        if let Some(&id) = self.nodes.get(&key) {
            return id;
        }
        let id = self.content.len() as u32;
        self.content.push((remaining, key.0.clone(), key.1.clone()));
        self.nodes.insert(key, id);
        id
    }

    // Atomic facts involving the newest parameter and earlier ones.
    fn increment(&mut self) -> Vec<u8> {
        let Some(&last) = self.params.last() else {
            return b"r".to_vec();
        };
        let earlier = &self.params[..self.params.len() - 1];
        let mut out = Vec::new();
        match last {
            Param::Set(mask) => {
                out.push(b's');
                for p in earlier {
                    if let Param::Elem(e) = p {
                        out.push(bit(mask >> e & 1 == 1));
                    }
                }
            }
            Param::Elem(e) => {
                out.push(b'e');
                for p in earlier {
                    out.push(bit(match *p {
                        Param::Elem(f) => f == e,
                        Param::Set(mask) => mask >> e & 1 == 1,
                    }));
                }
                out.push(b'/');
                let labels = self.ix.labels[e];
                for l in 0..self.label_count {
                    out.push(bit(labels >> l & 1 == 1));
                }
                let last_pos = self.elem_params.len() - 1;
                for r in 0..self.ix.rel_count() {
                    out.push(b'/');
                    let tuples = self.tuples.get(self.ix.arity(r), last_pos);
                    for t in tuples.iter() {
                        let holds = self.ix.holds(r, t.iter().map(|&p| self.elem_params[p]));
                        out.push(bit(holds));
                    }
                }
            }
        }
        out
    }

    fn serialize(&self, root: u32, m: u32, a: &Structure) -> Vec<u8> {
        let mode = match self.mode {
            LogicMode::Fo => "FO",
            LogicMode::Mso => "MSO",
        };
        let mut out = format!("{mode}|m={m}|voc={}|", a.vocab().signature()).into_bytes();
        // canonical position of each local id on its level
        let mut canon_pos = vec![0u32; self.content.len()];
        for level in 0..=m {
            let mut entries: Vec<(Vec<u8>, Vec<u32>, u32)> = self
                .content
                .iter()
                .enumerate()
                .filter(|(_, c)| c.0 == level)
                .map(|(id, (_, incr, children))| {
                    let mut kids: Vec<u32> =
                        children.iter().map(|&c| canon_pos[c as usize]).collect();
                    kids.sort_unstable();
                    (incr.clone(), kids, id as u32)
                })
                .collect();
            entries.sort();
            if level > 0 {
                out.push(b';');
            }
            for (pos, (incr, kids, id)) in entries.into_iter().enumerate() {
                canon_pos[id as usize] = pos as u32;
                if pos > 0 {
                    out.push(b' ');
                }
                out.extend_from_slice(&incr);
                if level > 0 {
                    out.push(b'[');
                    let list: Vec<String> = kids.iter().map(|k| k.to_string()).collect();
                    out.extend_from_slice(list.join(",").as_bytes());
                    out.push(b']');
                }
            }
        }
        debug_assert_eq!(self.content[root as usize].0, m);
        out
    }
}

fn bit(b: bool) -> u8 {
    if b {
        b'1'
    } else {
        b'0'
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{eval_sentence, Formula};
    use crate::structures::{
        enumerate_structures, test_graph as graph, Elem, EnumSpace, StructureBuilder, Vocabulary,
        DEFAULT_RAW_CAP,
    };
    use proptest::prelude::*;

    fn linear_order(n: u64) -> Structure {
        let vocab = Arc::new(
            Vocabulary::new(
                vec![crate::structures::RelSymbol {
                    name: "lt".into(),
                    arity: 2,
                }],
                1,
            )
            .unwrap(),
        );
        let mut b = StructureBuilder::new(vocab);
        for i in 1..=n {
            b.add_element(Elem(i));
            b.add_labels(Elem(i), 1);
            for j in i + 1..=n {
                b.add_tuple(0, vec![Elem(i), Elem(j)].into());
            }
        }
        b.finish().unwrap()
    }

    fn cycle(n: u64) -> Structure {
        let edges: Vec<_> = (1..=n).map(|i| (i, i % n + 1)).collect();
        graph(n, &edges)
    }

    #[test]
    fn k2_versus_two_points() {
        let k2 = graph(2, &[(1, 2)]);
        let two = graph(2, &[]);
        assert_eq!(fo_type(&k2, 1).unwrap(), fo_type(&two, 1).unwrap());
        assert_ne!(fo_type(&k2, 2).unwrap(), fo_type(&two, 2).unwrap());
        assert!(!equiv(&k2, &two, 2, LogicMode::Fo).unwrap());
    }

    #[test]
    fn linear_orders() {
        let t = |n| fo_type(&linear_order(n), 2).unwrap();
        assert_eq!(t(3), t(4));
        assert_ne!(t(2), t(3));
    }

    #[test]
    fn words_a5_a9() {
        assert!(equiv(&linear_order(5), &linear_order(9), 1, LogicMode::Fo).unwrap());
    }

    #[test]
    fn mso_examples() {
        assert_ne!(
            mso_type(&cycle(3), 3).unwrap(),
            mso_type(&cycle(4), 3).unwrap()
        );
        assert_eq!(
            mso_type(&graph(2, &[]), 1).unwrap(),
            mso_type(&graph(3, &[]), 1).unwrap()
        );
    }

    #[test]
    fn caps_enforced() {
        let big = graph(11, &[]);
        assert!(fo_type(&big, 1).unwrap_err().is_budget());
        assert!(mso_type(&graph(9, &[]), 1).unwrap_err().is_budget());
        assert!(mso_type(&graph(2, &[]), 4).unwrap_err().is_budget());
    }

    #[test]
    fn canonical_round_trip() {
        let t = mso_type(&cycle(4), 2).unwrap();
        assert_eq!(TypeFingerprint::from_canonical(t.canonical()).unwrap(), t);
    }

    #[test]
    fn empty_structure_has_a_type() {
        let e = Structure::empty(Arc::new(Vocabulary::graph(0)));
        assert_eq!(fo_type(&e, 2).unwrap(), fo_type(&e, 2).unwrap());
        assert_ne!(
            mso_type(&e, 1).unwrap(),
            mso_type(&graph(1, &[]), 1).unwrap()
        );
    }

    fn small_graphs(max: usize) -> Vec<Structure> {
        enumerate_structures(
            Arc::new(Vocabulary::graph(0)),
            max,
            EnumSpace::All,
            DEFAULT_RAW_CAP,
        )
        .unwrap()
        .collect()
    }

    #[test]
    fn refinement_and_mso_refines_fo() {
        let graphs = small_graphs(3);
        for m in 0..=2 {
            let types: Vec<_> = graphs
                .iter()
                .map(|g| {
                    (
                        fo_type(g, m).unwrap(),
                        fo_type(g, m + 1).unwrap(),
                        mso_type(g, m).unwrap(),
                    )
                })
                .collect();
            for (i, a) in types.iter().enumerate() {
                for b in &types[i + 1..] {
                    if a.1 == b.1 {
                        assert_eq!(a.0, b.0);
                    }
                    if a.2 == b.2 {
                        assert_eq!(a.0, b.0);
                    }
                }
            }
        }
    }

    // Sentences Q1 x Q2 y. (conjunction of literals over the binary atoms).
    fn fo_templates() -> Vec<Formula> {
        let atoms = [
            ("E", "x", "y"),
            ("E", "y", "x"),
            ("E", "x", "x"),
            ("E", "y", "y"),
            ("=", "x", "y"),
        ];
        let mut out = Vec::new();
        let mut choice = [0usize; 5];
        loop {
            let mut body: Option<Formula> = None;
            for (i, &(r, a, b)) in atoms.iter().enumerate() {
                let atom = if r == "=" {
                    Formula::Eq(a.into(), b.into())
                } else {
                    Formula::Rel(r.into(), vec![a.into(), b.into()])
                };
                let lit = match choice[i] {
                    0 => continue,
                    1 => atom,
                    _ => Formula::not(atom),
                };
                body = Some(match body {
                    None => lit,
                    Some(f) => Formula::and(f, lit),
                });
            }
            let body = body.unwrap_or(Formula::Eq("x".into(), "x".into()));
            for q1 in 0..2 {
                for q2 in 0..2 {
                    let inner = if q2 == 0 {
                        Formula::exists("y", body.clone())
                    } else {
                        Formula::forall("y", body.clone())
                    };
                    out.push(if q1 == 0 {
                        Formula::exists("x", inner)
                    } else {
                        Formula::forall("x", inner)
                    });
                }
            }
            let mut i = 0;
            loop {
                if i == 5 {
                    return out;
                }
                choice[i] += 1;
                if choice[i] < 3 {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn fo_type_equality_implies_template_agreement() {
        let sentences = fo_templates();
        let mut by_type: HashMap<TypeFingerprint, Vec<bool>> = HashMap::new();
        for g in small_graphs(3) {
            let truth: Vec<bool> = sentences
                .iter()
                .map(|s| eval_sentence(s, &g).unwrap())
                .collect();
            let t = fo_type(&g, 2).unwrap();
            if let Some(prev) = by_type.get(&t) {
                assert_eq!(prev, &truth);
            } else {
                by_type.insert(t, truth);
            }
        }
    }

    #[test]
    fn mso_type_equality_implies_template_agreement() {
        let v = Vocabulary::graph(0);
        let parse = |s: &str| crate::logic::parse_formula(s, &v, LogicMode::Mso).unwrap();
        let mut sentences = Vec::new();
        for q in ["existsSet X.", "forallSet X."] {
            for p in ["exists x.", "forall x."] {
                for body in [
                    "X(x)",
                    "~X(x)",
                    "X(x) & E(x,x)",
                    "X(x) -> E(x,x)",
                    "X(x) | E(x,x)",
                ] {
                    sentences.push(parse(&format!("{q} {p} {body}")));
                    sentences.push(parse(&format!("{p} {q} {body}")));
                }
            }
        }
        sentences.push(parse("existsSet X. existsSet Y. forall x. X(x)"));
        let mut by_type: HashMap<TypeFingerprint, Vec<bool>> = HashMap::new();
        for g in small_graphs(3) {
            let truth: Vec<bool> = sentences
                .iter()
                .map(|s| eval_sentence(s, &g).unwrap())
                .collect();
            let t = mso_type(&g, 2).unwrap();
            if let Some(prev) = by_type.get(&t) {
                assert_eq!(prev, &truth);
            } else {
                by_type.insert(t, truth);
            }
        }
    }

    fn arb_graph() -> impl Strategy<Value = (u64, Vec<(u64, u64)>)> {
        (1u64..=6).prop_flat_map(|n| (Just(n), proptest::collection::vec((1..=n, 1..=n), 0..10)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn isomorphism_invariance((n, edges) in arb_graph(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let g = graph(n, &edges);
            let mut perm: Vec<u64> = (1..=n).map(|i| i * 7 + 100).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let h = g.rename(|e| Elem(perm[(e.0 - 1) as usize]));
            prop_assert_eq!(fo_type(&g, 2).unwrap(), fo_type(&h, 2).unwrap());
            if n <= 4 {
                prop_assert_eq!(mso_type(&g, 1).unwrap(), mso_type(&h, 1).unwrap());
            }
        }
    }
}
