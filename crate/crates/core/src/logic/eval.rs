use std::collections::BTreeMap;

use super::Formula;
use crate::error::{Error, Result};
use crate::structures::{label_bit, Elem, ElementSet, Indexed, LabelSet, Structure};

/// Interpretation of free variables.
#[derive(Debug, Clone, Default)]
pub struct Assignment {
    pub elems: BTreeMap<String, Elem>,
    pub sets: BTreeMap<String, ElementSet>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_elem(mut self, v: &str, e: Elem) -> Self {
        self.elems.insert(v.to_string(), e);
        self
    }

    pub fn with_set(mut self, v: &str, s: ElementSet) -> Self {
        self.sets.insert(v.to_string(), s);
        self
    }
}

// Variables resolve to absolute stack slots at compile time.
enum Node {
    Rel(usize, Vec<usize>),
    Eq(usize, usize),
    Label(LabelSet, usize),
    Member(usize, usize),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Exists(Box<Node>),
    Forall(Box<Node>),
    ExistsSet(Box<Node>),
    ForallSet(Box<Node>),
}

struct Compiler<'a> {
    s: &'a Structure,
    elems: Vec<String>,
    sets: Vec<String>,
}

impl Compiler<'_> {
    fn elem(&self, v: &str) -> Result<usize> {
        self.elems
            .iter()
            .rposition(|x| x == v)
            .ok_or_else(|| Error::domain(format!("free variable {v} is unassigned")))
    }

    fn set(&self, v: &str) -> Result<usize> {
        self.sets
            .iter()
            .rposition(|x| x == v)
            .ok_or_else(|| Error::domain(format!("free set variable {v} is unassigned")))
    }

    fn bind(&mut self, v: &str, set: bool, f: &Formula) -> Result<Box<Node>> {
        let stack = if set { &mut self.sets } else { &mut self.elems };
        stack.push(v.to_string());
        let body = self.compile(f);
        let stack = if set { &mut self.sets } else { &mut self.elems };
        stack.pop();
        Ok(Box::new(body?))
    }

    fn compile(&mut self, f: &Formula) -> Result<Node> {
        use Formula as F;
        Ok(match f {
            F::Rel(name, args) => {
                let r = self.s.vocab().relation_index(name).ok_or_else(|| {
                    Error::domain(format!("relation {name} not in the structure's vocabulary"))
                })?;
                if self.s.vocab().arity(r) != args.len() {
                    return Err(Error::domain(format!("arity mismatch for {name}")));
                }
                Node::Rel(r, args.iter().map(|a| self.elem(a)).collect::<Result<_>>()?)
            }
            F::Eq(a, b) => Node::Eq(self.elem(a)?, self.elem(b)?),
            F::Label(l, v) => Node::Label(label_bit(*l), self.elem(v)?),
            F::Member(s, v) => Node::Member(self.set(s)?, self.elem(v)?),
            F::Not(g) => Node::Not(Box::new(self.compile(g)?)),
            F::And(a, b) => Node::And(Box::new(self.compile(a)?), Box::new(self.compile(b)?)),
            F::Or(a, b) => Node::Or(Box::new(self.compile(a)?), Box::new(self.compile(b)?)),
            F::Implies(a, b) => {
                Node::Implies(Box::new(self.compile(a)?), Box::new(self.compile(b)?))
            }
            F::Exists(v, g) => Node::Exists(self.bind(v, false, g)?),
            F::Forall(v, g) => Node::Forall(self.bind(v, false, g)?),
            F::ExistsSet(v, g) => Node::ExistsSet(self.bind(v, true, g)?),
            F::ForallSet(v, g) => Node::ForallSet(self.bind(v, true, g)?),
        })
    }
}

struct Env<'a> {
    ix: Indexed<'a>,
    elems: Vec<usize>,
    sets: Vec<u64>,
}

impl Env<'_> {
    fn eval(&mut self, node: &Node) -> bool {
        match node {
            Node::Rel(r, slots) => {
                let elems = &self.elems;
                self.ix.holds(*r, slots.iter().map(|&s| elems[s]))
            }
            Node::Eq(a, b) => self.elems[*a] == self.elems[*b],
            Node::Label(bit, v) => self.ix.labels[self.elems[*v]] & bit != 0,
            Node::Member(s, v) => self.sets[*s] >> self.elems[*v] & 1 == 1,
            Node::Not(g) => !self.eval(g),
            Node::And(a, b) => self.eval(a) && self.eval(b),
            Node::Or(a, b) => self.eval(a) || self.eval(b),
            Node::Implies(a, b) => !self.eval(a) || self.eval(b),
            Node::Exists(g) => self.quantify(g, true),
            Node::Forall(g) => !self.quantify(g, false),
            Node::ExistsSet(g) => self.quantify_set(g, true),
            Node::ForallSet(g) => !self.quantify_set(g, false),
        }
    }

    // Whether some element makes `g` evaluate to `want`.
    fn quantify(&mut self, g: &Node, want: bool) -> bool {
        let mut found = false;
        for e in 0..self.ix.n {
            self.elems.push(e);
            let v = self.eval(g);
            self.elems.pop();
            if v == want {
                found = true;
                break;
            }
        }
        found
    }

    fn quantify_set(&mut self, g: &Node, want: bool) -> bool {
        let mut found = false;
        for mask in 0..(1u64 << self.ix.n) {
            self.sets.push(mask);
            let v = self.eval(g);
            self.sets.pop();
            if v == want {
                found = true;
                break;
            }
        }
        found
    }
}

/// Largest universe on which set quantifiers are evaluated.
const MAX_SET_UNIVERSE: usize = 30;

/// Evaluate `phi` on `s` under `assignment` by direct recursion.
/// Exponential in quantifier rank; this is the reference semantics.
pub fn eval_formula(phi: &Formula, s: &Structure, assignment: &Assignment) -> Result<bool> {
    if phi.uses_sets() && s.len() > MAX_SET_UNIVERSE {
        return Err(Error::budget(format!(
            "set quantification over {} elements (limit {MAX_SET_UNIVERSE})",
            s.len()
        )));
    }
    let ix = Indexed::new(s);
    let mut compiler = Compiler {
        s,
        elems: assignment.elems.keys().cloned().collect(),
        sets: assignment.sets.keys().cloned().collect(),
    };
    let node = compiler.compile(phi)?;
    let mut elems = Vec::new();
    for (v, e) in &assignment.elems {
        let i = ix
            .index
            .get(e)
            .ok_or_else(|| Error::domain(format!("{v} is assigned {e}, not in the universe")))?;
        elems.push(*i);
    }
    let mut sets = Vec::new();
    for (v, set) in &assignment.sets {
        let mut mask = 0u64;
        for e in set.iter() {
            let i = ix
                .index
                .get(&e)
                .ok_or_else(|| Error::domain(format!("{v} contains {e}, not in the universe")))?;
            mask |= 1 << i;
        }
        sets.push(mask);
    }
    let mut env = Env { ix, elems, sets };
    Ok(env.eval(&node))
}

pub fn eval_sentence(phi: &Formula, s: &Structure) -> Result<bool> {
    eval_formula(phi, s, &Assignment::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, LogicMode};
    use crate::structures::{test_graph as graph, Vocabulary};

    fn f(s: &str) -> Formula {
        parse_formula(s, &Vocabulary::graph(0), LogicMode::Mso).unwrap()
    }

    const TWO_COLORABLE: &str =
        "existsSet X. forall x. forall y. (E(x,y) -> ((X(x) & ~X(y)) | (X(y) & ~X(x))))";

    #[test]
    fn bipartiteness() {
        let c3 = graph(3, &[(1, 2), (2, 3), (3, 1)]);
        let c4 = graph(4, &[(1, 2), (2, 3), (3, 4), (4, 1)]);
        assert!(!eval_sentence(&f(TWO_COLORABLE), &c3).unwrap());
        assert!(eval_sentence(&f(TWO_COLORABLE), &c4).unwrap());
    }

    #[test]
    fn simple_fo() {
        let p3 = graph(3, &[(1, 2), (2, 3)]);
        assert!(eval_sentence(&f("exists x. exists y. E(x,y)"), &p3).unwrap());
        assert!(!eval_sentence(
            &f("forall x. exists y. (E(x,y) & ~y=x & forall z. (E(x,z) -> z=y))"),
            &p3
        )
        .unwrap());
        assert!(eval_sentence(&f("exists x. forall y. (~y=x -> E(x,y))"), &p3).unwrap());
    }

    #[test]
    fn empty_structure() {
        let empty = Structure::empty(std::sync::Arc::new(Vocabulary::graph(0)));
        assert!(!eval_sentence(&f("exists x. x=x"), &empty).unwrap());
        assert!(eval_sentence(&f("forall x. E(x,x)"), &empty).unwrap());
        assert!(eval_sentence(&f("existsSet X. forall x. X(x)"), &empty).unwrap());
    }

    #[test]
    fn free_variables_need_assignment() {
        let p3 = graph(3, &[(1, 2), (2, 3)]);
        let phi = f("E(x,y)");
        assert!(eval_formula(&phi, &p3, &Assignment::new()).is_err());
        let a = Assignment::new()
            .with_elem("x", Elem(1))
            .with_elem("y", Elem(2));
        assert!(eval_formula(&phi, &p3, &a).unwrap());
        let phi = f("exists y. (X(y) & E(x,y))");
        let a = Assignment::new()
            .with_elem("x", Elem(2))
            .with_set("X", [Elem(3)].into_iter().collect());
        assert!(eval_formula(&phi, &p3, &a).unwrap());
    }

    #[test]
    fn shadowing_uses_innermost_binding() {
        let p2 = graph(2, &[(1, 2)]);
        // Inner x rebinds; E(x,x) never holds.
        assert!(!eval_sentence(&f("exists x. exists x. E(x,x)"), &p2).unwrap());
    }

    #[test]
    fn labels() {
        let s = crate::structures::parse_structure("universe 2\nrel E 2\nlabels 2\nlabel 1 2\n")
            .unwrap();
        let phi = parse_formula(
            "exists x. L2(x) & forall y. ~L1(y)",
            s.vocab(),
            LogicMode::Fo,
        )
        .unwrap();
        assert!(eval_sentence(&phi, &s).unwrap());
    }
}
