use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::structures::{
    label_bit, parse_structure, Elem, LabelSet, RelSymbol, Structure, StructureBuilder, Vocabulary,
};

pub const REL_EDGE: &str = "E";
pub const REL_LT: &str = "lt";
pub const REL_ANC: &str = "anc";
pub const REL_LEFT: &str = "left";

/// Largest leaf structure accepted.
pub const MAX_LEAF_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpKind {
    /// Disjoint union.
    Union,
    /// Disjoint union plus symmetric `E` edges from label `l` in an earlier
    /// input to label `k` in a later one whenever `matrix[l-1][k-1]`.
    Join { matrix: Vec<Vec<bool>> },
    /// Fresh root carrying `label`, ancestor of everything below; earlier
    /// children precede later ones under `left`.
    Tree { label: u32 },
    /// Word concatenation under the linear order `lt`.
    Concat,
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Union => "union",
            OpKind::Join { .. } => "join",
            OpKind::Tree { .. } => "tree",
            OpKind::Concat => "concat",
        }
    }

    /// Relations the operation writes, with arities.
    fn required_relations(&self) -> Vec<RelSymbol> {
        let bin = |n: &str| RelSymbol {
            name: n.to_string(),
            arity: 2,
        };
        match self {
            OpKind::Union => vec![],
            OpKind::Join { .. } => vec![bin(REL_EDGE)],
            OpKind::Tree { .. } => vec![bin(REL_ANC), bin(REL_LEFT)],
            OpKind::Concat => vec![bin(REL_LT)],
        }
    }

    fn required_labels(&self) -> u32 {
        match self {
            OpKind::Union | OpKind::Concat => 0,
            OpKind::Join { matrix } => matrix.len() as u32,
            OpKind::Tree { label } => *label,
        }
    }

    pub fn matrix_string(matrix: &[Vec<bool>]) -> String {
        matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&b| if b { '1' } else { '0' })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Debug, Clone)]
pub struct LeafSymbol {
    pub name: String,
    pub structure: Structure,
}

#[derive(Debug, Clone)]
pub struct OpSymbol {
    pub name: String,
    pub kind: OpKind,
    pub rho: usize,
    pub ranked: bool,
}

impl OpSymbol {
    /// Whether `n` children is an allowed arity: exactly ρ when ranked,
    /// otherwise ρ + i(ρ-1) for some i ≥ 0.
    pub fn allows(&self, n: usize) -> bool {
        if self.ranked || self.rho == 1 {
            return n == self.rho;
        }
        n >= self.rho && (n - self.rho).is_multiple_of(self.rho - 1)
    }

    pub fn arity_description(&self) -> String {
        if self.ranked || self.rho == 1 {
            format!("exactly {}", self.rho)
        } else {
            format!("{} + i*{}", self.rho, self.rho - 1)
        }
    }
}

/// Leaf and operation symbols over one shared vocabulary.
#[derive(Debug, Clone)]
pub struct AlphabetSpec {
    vocab: Arc<Vocabulary>,
    leaves: Vec<LeafSymbol>,
    ops: Vec<OpSymbol>,
    index: HashMap<String, Symbol>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    Leaf(usize),
    Op(usize),
}

impl AlphabetSpec {
    /// Build a spec. Leaf structures are lifted into the merged vocabulary,
    /// which also receives the relations and labels the operations write.
    pub fn new(
        leaves: Vec<(String, Structure)>,
        ops: Vec<OpSymbol>,
        extra: Option<&Vocabulary>,
    ) -> Result<AlphabetSpec> {
        let mut vocab = extra.cloned().unwrap_or_else(Vocabulary::empty);
        for (name, s) in &leaves {
            if s.is_empty() || s.len() > MAX_LEAF_SIZE {
                return Err(Error::domain(format!(
                    "leaf {name} has {} elements; leaves need 1..={MAX_LEAF_SIZE}",
                    s.len()
                )));
            }
            vocab = vocab.merge(s.vocab())?;
        }
        for op in &ops {
            if op.rho == 0 {
                return Err(Error::domain(format!("op {} has rank 0", op.name)));
            }
            if let OpKind::Join { matrix } = &op.kind {
                if matrix.is_empty() || matrix.iter().any(|r| r.len() != matrix.len()) {
                    return Err(Error::domain(format!(
                        "op {}: join matrix must be square",
                        op.name
                    )));
                }
            }
            if let OpKind::Tree { label } = op.kind {
                if label == 0 {
                    return Err(Error::domain(format!(
                        "op {}: tree labels start at 1",
                        op.name
                    )));
                }
            }
            let need = Vocabulary::new(op.kind.required_relations(), op.kind.required_labels())?;
            vocab = vocab.merge(&need)?;
        }
        let vocab = Arc::new(vocab);
        let mut index = HashMap::new();
        let mut lifted = Vec::new();
        for (i, (name, s)) in leaves.into_iter().enumerate() {
            if index.insert(name.clone(), Symbol::Leaf(i)).is_some() {
                return Err(Error::domain(format!("symbol {name} declared twice")));
            }
            let structure = s.renumbered().lift(vocab.clone())?;
            lifted.push(LeafSymbol { name, structure });
        }
        for (i, op) in ops.iter().enumerate() {
            if op.name == "leaf" {
                return Err(Error::domain("`leaf` is reserved"));
            }
            if index.insert(op.name.clone(), Symbol::Op(i)).is_some() {
                return Err(Error::domain(format!("symbol {} declared twice", op.name)));
            }
        }
        Ok(AlphabetSpec {
            vocab,
            leaves: lifted,
            ops,
            index,
        })
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn leaves(&self) -> &[LeafSymbol] {
        &self.leaves
    }

    pub fn ops(&self) -> &[OpSymbol] {
        &self.ops
    }

    pub fn leaf(&self, i: usize) -> &LeafSymbol {
        &self.leaves[i]
    }

    pub fn op(&self, i: usize) -> &OpSymbol {
        &self.ops[i]
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        self.index.get(name).copied()
    }

    pub fn max_leaf_size(&self) -> usize {
        self.leaves
            .iter()
            .map(|l| l.structure.len())
            .max()
            .unwrap_or(0)
    }

    /// Stable text rendering; its hash keys persisted tables.
    pub fn describe(&self) -> String {
        let mut out = format!("voc {}\n", self.vocab.signature());
        for l in &self.leaves {
            out.push_str(&format!("leaf {}\n", l.name));
            out.push_str(&crate::structures::write_structure(&l.structure));
        }
        for op in &self.ops {
            out.push_str(&format!(
                "op {} {} {}{}",
                op.name,
                op.kind.name(),
                op.rho,
                if op.ranked { " ranked" } else { "" }
            ));
            match &op.kind {
                OpKind::Join { matrix } => {
                    out.push_str(&format!(" matrix={}", OpKind::matrix_string(matrix)))
                }
                OpKind::Tree { label } => out.push_str(&format!(" label={label}")),
                _ => {}
            }
            out.push('\n');
        }
        out
    }

    pub fn digest(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        Sha256::digest(self.describe().as_bytes()).into()
    }

    /// Parse an alphabet file; structure files resolve relative to `base`.
    ///
    /// ```text
    /// rel E 2
    /// labels 2
    /// leaf v point label=1
    /// leaf e edge.str
    /// op u union 2
    /// op j join 2 matrix=01;10
    /// op a tree 2 label=1
    /// op n tree 2 ranked label=2
    /// op c concat 2
    /// ```
    pub fn parse(text: &str, base: Option<&Path>) -> Result<AlphabetSpec> {
        let mut rels = Vec::new();
        let mut labels = 0;
        let mut leaves = Vec::new();
        let mut ops = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: String| Error::parse(line_no, msg);
            let (positional, params) = split_params(&words[1..]).map_err(err)?;
            match words[0] {
                "rel" => {
                    let [name, arity] = positional[..] else {
                        return Err(err("usage: rel NAME ARITY".into()));
                    };
                    let arity = arity.parse().map_err(|_| err("bad arity".into()))?;
                    rels.push(RelSymbol {
                        name: name.to_string(),
                        arity,
                    });
                }
                "labels" => {
                    let [k] = positional[..] else {
                        return Err(err("usage: labels K".into()));
                    };
                    labels = k.parse().map_err(|_| err("bad label count".into()))?;
                }
                "leaf" => {
                    let [name, source] = positional[..] else {
                        return Err(err("usage: leaf NAME FILE|point [label=I,...]".into()));
                    };
                    let s = if source == "point" {
                        let mut set: LabelSet = 0;
                        if let Some(list) = params.get("label") {
                            for l in list.split(',') {
                                let l: u32 =
                                    l.parse().map_err(|_| err(format!("bad label {l}")))?;
                                if l == 0 || l > crate::structures::MAX_LABELS {
                                    return Err(err(format!("label {l} out of range")));
                                }
                                set |= label_bit(l);
                            }
                        }
                        point(set)
                    } else {
                        let path = match base {
                            Some(b) => b.join(source),
                            None => source.into(),
                        };
                        let text = std::fs::read_to_string(&path)
                            .map_err(|e| err(format!("{}: {e}", path.display())))?;
                        parse_structure(&text)
                            .map_err(|e| err(format!("{}: {e}", path.display())))?
                    };
                    leaves.push((name.to_string(), s));
                }
                "op" => {
                    let (name, kind, rho, ranked) = match positional[..] {
                        [n, k, r] => (n, k, r, false),
                        [n, k, r, "ranked"] => (n, k, r, true),
                        _ => {
                            return Err(err("usage: op NAME KIND RHO [ranked] [key=value]".into()))
                        }
                    };
                    let rho = rho.parse().map_err(|_| err(format!("bad rank {rho}")))?;
                    let kind = parse_kind(kind, &params).map_err(err)?;
                    ops.push(OpSymbol {
                        name: name.to_string(),
                        kind,
                        rho,
                        ranked,
                    });
                }
                other => return Err(err(format!("unknown directive {other}"))),
            }
        }
        let extra = Vocabulary::new(rels, labels)?;
        AlphabetSpec::new(leaves, ops, Some(&extra))
    }

    pub fn load(path: &Path) -> Result<AlphabetSpec> {
        if let Some(name) = path.to_str().and_then(|p| p.strip_prefix("builtin:")) {
            return AlphabetSpec::builtin(name);
        }
        let text = std::fs::read_to_string(path)?;
        AlphabetSpec::parse(&text, path.parent())
    }

    /// Shipped alphabets: `cograph1`, `cograph2`, `trees`, `words`.
    pub fn builtin(name: &str) -> Result<AlphabetSpec> {
        let edge = || small(&[(REL_EDGE, 1, 2), (REL_EDGE, 2, 1)], &[(1, 1), (2, 1)]);
        let (text, shapes) = match name {
            "cograph1" => (
                "labels 1\nleaf v point label=1\nop union union 2\nop join join 2 matrix=1\n",
                vec![("e", edge())],
            ),
            "cograph2" => (
                "labels 2\nleaf p1 point label=1\nleaf p2 point label=2\n\
                 op union union 2\nop cross join 2 matrix=01;10\nop full join 2 matrix=11;11\n",
                vec![("e", edge())],
            ),
            "trees" => (
                "labels 2\nleaf b point label=2\n\
                 op a tree 2 label=1\nop c tree 1 label=2\nop d tree 2 ranked label=1\n",
                vec![("ab", small(&[(REL_ANC, 1, 2)], &[(1, 1), (2, 2)]))],
            ),
            "words" => (
                "labels 2\nleaf a point label=1\nleaf b point label=2\nop cat concat 2\n",
                vec![("ab", small(&[(REL_LT, 1, 2)], &[(1, 1), (2, 2)]))],
            ),
            other => return Err(Error::domain(format!("unknown builtin alphabet {other}"))),
        };
        let parsed = AlphabetSpec::parse(text, None)?;
        let mut leaves: Vec<(String, Structure)> = parsed
            .leaves
            .into_iter()
            .map(|l| (l.name, l.structure))
            .collect();
        leaves.extend(shapes.into_iter().map(|(n, s)| (n.to_string(), s)));
        let voc = parsed.vocab.as_ref().clone();
        AlphabetSpec::new(leaves, parsed.ops, Some(&voc))
    }
}

fn split_params<'a>(
    words: &[&'a str],
) -> std::result::Result<(Vec<&'a str>, HashMap<&'a str, &'a str>), String> {
    let mut positional = Vec::new();
    let mut params = HashMap::new();
    for w in words {
        if let Some((k, v)) = w.split_once('=') {
            if params.insert(k, v).is_some() {
                return Err(format!("parameter {k} repeated"));
            }
        } else {
            positional.push(*w);
        }
    }
    Ok((positional, params))
}

fn parse_kind(kind: &str, params: &HashMap<&str, &str>) -> std::result::Result<OpKind, String> {
    let allowed: &[&str] = match kind {
        "union" => &[],
        "join" => &["matrix"],
        "tree" => &["label"],
        "concat" => &["order"],
        "product" | "tensor" => {
            return Err(format!(
                "{kind} is product-like; only sum-like operations are supported"
            ))
        }
        other => return Err(format!("unknown op kind {other}")),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(k)) {
        return Err(format!("parameter {k} does not apply to {kind}"));
    }
    Ok(match kind {
        "union" => OpKind::Union,
        "join" => {
            let m = params.get("matrix").ok_or("join needs matrix=ROWS")?;
            let matrix = m
                .split(';')
                .map(|row| {
                    row.chars()
                        .map(|c| match c {
                            '0' => Ok(false),
                            '1' => Ok(true),
                            _ => Err(format!("matrix entry {c:?} is not 0/1")),
                        })
                        .collect::<std::result::Result<Vec<bool>, String>>()
                })
                .collect::<std::result::Result<Vec<_>, String>>()?;
            OpKind::Join { matrix }
        }
        "tree" => {
            let l = params.get("label").ok_or("tree needs label=I")?;
            OpKind::Tree {
                label: l.parse().map_err(|_| format!("bad label {l}"))?,
            }
        }
        _ => match params.get("order").copied().unwrap_or("lt") {
            "lt" => OpKind::Concat,
            "succ" => {
                return Err(
                    "successor words are not supported: concatenation under successor is not \
                     compositional at fixed rank and breaks induced embeddings"
                        .into(),
                )
            }
            o => return Err(format!("unknown order {o}")),
        },
    })
}

fn point(labels: LabelSet) -> Structure {
    let mut b = StructureBuilder::new(Arc::new(
        Vocabulary::empty()
            .with_label_count(64 - labels.leading_zeros())
            .expect("label count within range"),
    ));
    b.add_element(Elem(1));
    b.add_labels(Elem(1), labels);
    b.finish_unchecked()
}

fn small(tuples: &[(&str, u64, u64)], labels: &[(u64, u32)]) -> Structure {
    let mut rels: Vec<RelSymbol> = Vec::new();
    for (r, _, _) in tuples {
        if !rels.iter().any(|s| s.name == *r) {
            rels.push(RelSymbol {
                name: r.to_string(),
                arity: 2,
            });
        }
    }
    let max_label = labels.iter().map(|l| l.1).max().unwrap_or(0);
    let vocab = Arc::new(Vocabulary::new(rels, max_label).expect("fixed vocabulary"));
    let mut b = StructureBuilder::new(vocab.clone());
    b.add_element(Elem(1));
    b.add_element(Elem(2));
    for (r, x, y) in tuples {
        b.add_tuple(
            vocab.relation_index(r).unwrap(),
            vec![Elem(*x), Elem(*y)].into(),
        );
    }
    for &(e, l) in labels {
        b.add_labels(Elem(e), label_bit(l));
    }
    b.finish_unchecked()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_sets() {
        let op = |rho, ranked| OpSymbol {
            name: "o".into(),
            kind: OpKind::Union,
            rho,
            ranked,
        };
        assert!(op(2, false).allows(3));
        assert!(!op(2, false).allows(1));
        assert!(op(3, false).allows(5));
        assert!(!op(3, false).allows(4));
        assert!(!op(2, true).allows(3));
        assert!(op(1, false).allows(1) && !op(1, false).allows(2));
    }

    #[test]
    fn builtins_load() {
        for name in ["cograph1", "cograph2", "trees", "words"] {
            let a = AlphabetSpec::builtin(name).unwrap();
            assert!(!a.leaves().is_empty(), "{name}");
            assert!(a.max_leaf_size() <= 2);
        }
        let c = AlphabetSpec::builtin("cograph2").unwrap();
        assert_eq!(c.vocab().signature(), "E/2,L=2");
        assert_eq!(c.leaves()[0].name, "p1");
    }

    #[test]
    fn products_rejected() {
        let err = AlphabetSpec::parse("op x product 2\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn successor_words_rejected() {
        assert!(AlphabetSpec::parse("op c concat 2 order=succ\n", None).is_err());
    }

    #[test]
    fn duplicate_symbols_rejected() {
        let err = AlphabetSpec::parse("leaf v point\nop v union 2\n", None).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
