use std::collections::HashMap;
use std::sync::Arc;

use super::TypeEngine;
use crate::automata::TreeAutomaton;
use crate::eftypes::TypeFingerprint;
use crate::error::{Error, Result};
use crate::optrees::{
    evaluate_marked, leaf_element, CombineStep, Flat, Node, NodeKind, OpKind, OpTree,
};
use crate::structures::{label_bit, Elem, LabelSet, Structure};

/// Fold state of an unranked node after its first `children` children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixState {
    pub children: usize,
    pub chi: TypeFingerprint,
    pub h: usize,
}

/// Per-node (delta1, delta2) annotation of a tree, indexed like `flat.nodes`.
#[derive(Debug, Clone)]
pub struct Annotation {
    pub flat: Flat,
    pub delta1: Vec<TypeFingerprint>,
    pub delta2: Vec<usize>,
    /// Fold states of unranked internal nodes; empty elsewhere.
    pub prefixes: Vec<Vec<PrefixState>>,
    /// |Str(t_a)| for every node a.
    pub sizes: Vec<usize>,
}

impl Annotation {
    pub fn root_type(&self) -> &TypeFingerprint {
        &self.delta1[0]
    }

    pub fn root_state(&self) -> usize {
        self.delta2[0]
    }

    /// The (delta1, delta2) pair of node `i`.
    pub fn pair(&self, i: usize) -> (&TypeFingerprint, usize) {
        (&self.delta1[i], self.delta2[i])
    }
}

/// Annotate every node of `t` bottom-up. `marks` adds mark labels (over the
/// engine vocabulary) to elements of Str(t).
pub fn annotate(
    t: &OpTree,
    engine: &TypeEngine,
    automaton: &TreeAutomaton,
    marks: &HashMap<Elem, LabelSet>,
) -> Result<Annotation> {
    let flat = t.flatten();
    let n = flat.nodes.len();
    let mut delta1: Vec<Option<TypeFingerprint>> = vec![None; n];
    let mut delta2 = vec![0usize; n];
    let mut prefixes = vec![Vec::new(); n];
    let mut sizes = vec![0usize; n];
    let spec = engine.spec().clone();
    for i in flat.postorder() {
        let node = &flat.nodes[i].node;
        let at = |e: Error| Error::AtNode {
            address: flat.address(i).to_string(),
            source: Box::new(e),
        };
        match node.kind() {
            NodeKind::Leaf(sym) => {
                let leaf = &spec.leaf(*sym).structure;
                let local: Vec<LabelSet> = leaf
                    .universe()
                    .iter()
                    .map(|e| {
                        marks
                            .get(&leaf_element(node.id(), e.0))
                            .copied()
                            .unwrap_or(0)
                    })
                    .collect();
                delta1[i] = Some(engine.leaf_type(*sym, &local).map_err(at)?);
                delta2[i] = automaton.leaf_state(*sym);
                sizes[i] = leaf.len();
            }
            NodeKind::Internal(op, children) => {
                let kids = &flat.nodes[i].children;
                let types: Vec<TypeFingerprint> =
                    kids.iter().map(|&c| delta1[c].clone().unwrap()).collect();
                let states: Vec<usize> = kids.iter().map(|&c| delta2[c]).collect();
                let sym = spec.op(*op);
                let is_tree = matches!(sym.kind, OpKind::Tree { .. });
                let root_marks = if is_tree {
                    marks.get(&leaf_element(node.id(), 0)).copied().unwrap_or(0)
                } else {
                    0
                };
                let child_sizes: Vec<usize> = kids.iter().map(|&c| sizes[c]).collect();
                sizes[i] = child_sizes.iter().sum::<usize>() + is_tree as usize;
                let fold = Fold {
                    engine,
                    node,
                    op: *op,
                    marks,
                    child_sizes: &child_sizes,
                    is_tree,
                };
                if sym.ranked || sym.rho == 1 {
                    delta1[i] = Some(
                        fold.step(CombineStep::Apply, root_marks, &types, children.len())
                            .map_err(at)?,
                    );
                } else {
                    let mut h = automaton.h_start(*op);
                    let mut pre = Vec::new();
                    h = automaton.h_step(*op, h, states[0]);
                    let mut chi = if is_tree {
                        fold.step(CombineStep::Init, root_marks, &types[..1], 1)
                            .map_err(at)?
                    } else {
                        types[0].clone()
                    };
                    pre.push(PrefixState {
                        children: 1,
                        chi: chi.clone(),
                        h,
                    });
                    let g = sym.rho - 1;
                    let mut done = 1;
                    while done < types.len() {
                        let mut inputs = vec![chi];
                        inputs.extend_from_slice(&types[done..done + g]);
                        for &q in &states[done..done + g] {
                            h = automaton.h_step(*op, h, q);
                        }
                        done += g;
                        let kind = if is_tree {
                            CombineStep::Step
                        } else {
                            CombineStep::Apply
                        };
                        chi = fold.step(kind, 0, &inputs, done).map_err(at)?;
                        pre.push(PrefixState {
                            children: done,
                            chi: chi.clone(),
                            h,
                        });
                    }
                    delta1[i] = Some(if is_tree {
                        fold.step(CombineStep::Close, 0, &[chi], done).map_err(at)?
                    } else {
                        chi
                    });
                    prefixes[i] = pre;
                }
                delta2[i] = automaton.node_state(*op, states.iter().copied());
            }
        }
    }
    Ok(Annotation {
        flat,
        delta1: delta1.into_iter().map(Option::unwrap).collect(),
        delta2,
        prefixes,
        sizes,
    })
}

struct Fold<'a> {
    engine: &'a TypeEngine,
    node: &'a Arc<Node>,
    op: usize,
    marks: &'a HashMap<Elem, LabelSet>,
    child_sizes: &'a [usize],
    is_tree: bool,
}

impl Fold<'_> {
    /// Compose one fold step covering the first `prefix` children.
    fn step(
        &self,
        step: CombineStep,
        root_marks: LabelSet,
        inputs: &[TypeFingerprint],
        prefix: usize,
    ) -> Result<TypeFingerprint> {
        let witness = || self.witness(step, prefix);
        self.engine
            .compose_with(self.op, step, root_marks, inputs, &witness)
    }

    /// Str of the node restricted to its first `prefix` children, with the
    /// open label on the root for unfinished tree folds.
    fn witness(&self, step: CombineStep, prefix: usize) -> Result<Option<Structure>> {
        let size = self.child_sizes[..prefix].iter().sum::<usize>() + self.is_tree as usize;
        if size > self.engine.cap() {
            return Ok(None);
        }
        let kids = self.node.children()[..prefix].to_vec();
        let partial = OpTree::new(Node::internal(self.node.id(), self.op, kids));
        let (s, _) = evaluate_marked(
            &partial,
            self.engine.spec(),
            self.engine.marks(),
            self.marks,
        )?;
        if matches!(step, CombineStep::Init | CombineStep::Step) {
            let v = self.engine.vocab();
            let open = Arc::new(v.with_label_count(v.label_count() + 1)?);
            let root = leaf_element(self.node.id(), 0);
            let s = s
                .lift(open)?
                .with_extra_labels(&[(root, label_bit(v.label_count() + 1))])?;
            return Ok(Some(s));
        }
        Ok(Some(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eftypes::{type_of, OracleConfig};
    use crate::logic::LogicMode;
    use crate::optrees::{evaluate, parse_tree, AlphabetSpec};

    fn check(alphabet: &str, text: &str, mode: LogicMode, m: u32) {
        let spec = Arc::new(AlphabetSpec::builtin(alphabet).unwrap());
        let e = TypeEngine::new(spec.clone(), mode, m, 0, OracleConfig::default()).unwrap();
        let t = parse_tree(text, &spec).unwrap();
        let a = annotate(&t, &e, &TreeAutomaton::arity_valid(&spec), &HashMap::new()).unwrap();
        let (s, _) = evaluate(&t, &spec).unwrap();
        let oracle = type_of(&s, m, mode, &OracleConfig::default()).unwrap();
        assert_eq!(a.root_type(), &oracle, "{text}");
        assert_eq!(a.sizes[0], s.len());
    }

    #[test]
    fn roots_match_oracle_across_alphabets() {
        check(
            "cograph1",
            "(union (join (leaf v) (leaf v)) (leaf v) (leaf e))",
            LogicMode::Fo,
            2,
        );
        check(
            "cograph2",
            "(full (cross (leaf p1) (leaf p2)) (leaf p1))",
            LogicMode::Fo,
            3,
        );
        check(
            "trees",
            "(a (leaf b) (c (leaf ab)) (leaf b))",
            LogicMode::Fo,
            2,
        );
        check(
            "trees",
            "(d (leaf b) (a (leaf b) (leaf b)))",
            LogicMode::Mso,
            2,
        );
        check(
            "words",
            "(cat (leaf a) (leaf ab) (leaf b) (leaf a))",
            LogicMode::Mso,
            2,
        );
    }

    #[test]
    fn rechunking_an_unranked_node_keeps_the_root_type() {
        let spec = Arc::new(AlphabetSpec::builtin("cograph1").unwrap());
        let e =
            TypeEngine::new(spec.clone(), LogicMode::Fo, 3, 0, OracleConfig::default()).unwrap();
        let aut = TreeAutomaton::arity_valid(&spec);
        let flat = parse_tree("(join (leaf v) (leaf v) (leaf e) (leaf v))", &spec).unwrap();
        let nested = parse_tree(
            "(join (join (join (leaf v) (leaf v)) (leaf e)) (leaf v))",
            &spec,
        )
        .unwrap();
        let a = annotate(&flat, &e, &aut, &HashMap::new()).unwrap();
        let b = annotate(&nested, &e, &aut, &HashMap::new()).unwrap();
        assert_eq!(a.root_type(), b.root_type());
        assert_eq!(a.prefixes[0].len(), 4);
    }

    #[test]
    fn marks_change_leaf_types() {
        let spec = Arc::new(AlphabetSpec::builtin("cograph1").unwrap());
        let e =
            TypeEngine::new(spec.clone(), LogicMode::Fo, 1, 1, OracleConfig::default()).unwrap();
        let aut = TreeAutomaton::arity_valid(&spec);
        let t = parse_tree("(union (leaf v) (leaf v))", &spec).unwrap();
        let plain = annotate(&t, &e, &aut, &HashMap::new()).unwrap();
        let marks = HashMap::from([(leaf_element(1, 1), label_bit(2))]);
        let marked = annotate(&t, &e, &aut, &marks).unwrap();
        assert_ne!(plain.delta1[1], marked.delta1[1]);
        assert_eq!(plain.delta1[2], marked.delta1[2]);
        assert_ne!(plain.root_type(), marked.root_type());
    }

    #[test]
    fn prefixes_beyond_the_cap_are_budget_errors() {
        let spec = Arc::new(AlphabetSpec::builtin("cograph1").unwrap());
        let cfg = OracleConfig {
            fo_cap: 3,
            ..OracleConfig::default()
        };
        let e = TypeEngine::new(spec.clone(), LogicMode::Fo, 3, 0, cfg).unwrap();
        let aut = TreeAutomaton::arity_valid(&spec);
        let ok = parse_tree("(union (leaf v) (leaf v) (leaf v))", &spec).unwrap();
        annotate(&ok, &e, &aut, &HashMap::new()).unwrap();
        let over = parse_tree("(union (leaf v) (leaf v) (leaf v) (leaf v))", &spec).unwrap();
        let err = annotate(&over, &e, &aut, &HashMap::new()).unwrap_err();
        assert!(err.is_budget());
        assert!(matches!(err, Error::AtNode { .. }), "{err}");
    }
}
