//! FO and MSO formulas: syntax tree, parser, quantifier rank, and a direct
//! (exponential) evaluator used as the trusted oracle for satisfaction.

mod eval;
mod parser;

pub use eval::{eval_formula, eval_sentence, Assignment};
pub use parser::parse_formula;

use std::collections::BTreeSet;
use std::fmt;

/// Which logic a computation works in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogicMode {
    Fo,
    Mso,
}

impl LogicMode {
    pub fn name(self) -> &'static str {
        match self {
            LogicMode::Fo => "fo",
            LogicMode::Mso => "mso",
        }
    }
}

impl fmt::Display for LogicMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LogicMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fo" => Ok(LogicMode::Fo),
            "mso" => Ok(LogicMode::Mso),
            other => Err(format!("unknown logic {other:?} (expected fo or mso)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Rel(String, Vec<String>),
    Eq(String, String),
    Label(u32, String),
    Member(String, String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
    ExistsSet(String, Box<Formula>),
    ForallSet(String, Box<Formula>),
}

impl Formula {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(v: &str, f: Formula) -> Formula {
        Formula::Exists(v.to_string(), Box::new(f))
    }

    pub fn forall(v: &str, f: Formula) -> Formula {
        Formula::Forall(v.to_string(), Box::new(f))
    }

    /// Maximum nesting depth of quantifiers; point and set quantifiers both count.
    pub fn quantifier_rank(&self) -> u32 {
        use Formula::*;
        match self {
            Rel(..) | Eq(..) | Label(..) | Member(..) => 0,
            Not(f) => f.quantifier_rank(),
            And(a, b) | Or(a, b) | Implies(a, b) => a.quantifier_rank().max(b.quantifier_rank()),
            Exists(_, f) | Forall(_, f) | ExistsSet(_, f) | ForallSet(_, f) => {
                1 + f.quantifier_rank()
            }
        }
    }

    pub fn uses_sets(&self) -> bool {
        use Formula::*;
        match self {
            Member(..) | ExistsSet(..) | ForallSet(..) => true,
            Rel(..) | Eq(..) | Label(..) => false,
            Not(f) | Exists(_, f) | Forall(_, f) => f.uses_sets(),
            And(a, b) | Or(a, b) | Implies(a, b) => a.uses_sets() || b.uses_sets(),
        }
    }

    /// Free element variables and free set variables.
    pub fn free_vars(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut elems = BTreeSet::new();
        let mut sets = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut Vec::new(), &mut elems, &mut sets);
        (elems, sets)
    }

    pub fn is_sentence(&self) -> bool {
        let (e, s) = self.free_vars();
        e.is_empty() && s.is_empty()
    }

    fn collect_free(
        &self,
        bound: &mut Vec<String>,
        bound_sets: &mut Vec<String>,
        elems: &mut BTreeSet<String>,
        sets: &mut BTreeSet<String>,
    ) {
        use Formula::*;
        let mut see = |v: &String, bound: &Vec<String>| {
            if !bound.contains(v) {
                elems.insert(v.clone());
            }
        };
        match self {
            Rel(_, args) => args.iter().for_each(|v| see(v, bound)),
            Eq(a, b) => {
                see(a, bound);
                see(b, bound);
            }
            Label(_, v) => see(v, bound),
            Member(s, v) => {
                see(v, bound);
                if !bound_sets.contains(s) {
                    sets.insert(s.clone());
                }
            }
            Not(f) => f.collect_free(bound, bound_sets, elems, sets),
            And(a, b) | Or(a, b) | Implies(a, b) => {
                a.collect_free(bound, bound_sets, elems, sets);
                b.collect_free(bound, bound_sets, elems, sets);
            }
            Exists(v, f) | Forall(v, f) => {
                bound.push(v.clone());
                f.collect_free(bound, bound_sets, elems, sets);
                bound.pop();
            }
            ExistsSet(v, f) | ForallSet(v, f) => {
                bound_sets.push(v.clone());
                f.collect_free(bound, bound_sets, elems, sets);
                bound_sets.pop();
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        match self {
            Rel(name, args) => write!(f, "{name}({})", args.join(",")),
            Eq(a, b) => write!(f, "{a}={b}"),
            Label(l, v) => write!(f, "L{l}({v})"),
            Member(s, v) => write!(f, "{s}({v})"),
            Not(g) => write!(f, "~{}", Paren(g)),
            And(a, b) => write!(f, "({} & {})", Paren(a), Paren(b)),
            Or(a, b) => write!(f, "({} | {})", Paren(a), Paren(b)),
            Implies(a, b) => write!(f, "({} -> {})", Paren(a), Paren(b)),
            Exists(v, g) => write!(f, "exists {v}. {g}"),
            Forall(v, g) => write!(f, "forall {v}. {g}"),
            ExistsSet(v, g) => write!(f, "existsSet {v}. {g}"),
            ForallSet(v, g) => write!(f, "forallSet {v}. {g}"),
        }
    }
}

// Quantified subformulas get parentheses when they appear as operands.
struct Paren<'a>(&'a Formula);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        match self.0 {
            Exists(..) | Forall(..) | ExistsSet(..) | ForallSet(..) => write!(f, "({})", self.0),
            other => write!(f, "{other}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::Vocabulary;

    fn parse(s: &str) -> Formula {
        parse_formula(s, &Vocabulary::graph(1), LogicMode::Mso).unwrap()
    }

    #[test]
    fn ranks() {
        assert_eq!(parse("E(x,y)").quantifier_rank(), 0);
        assert_eq!(parse("exists x. forall y. E(x,y)").quantifier_rank(), 2);
        assert_eq!(
            parse("(exists x. E(x,x)) & (forall y. y=y)").quantifier_rank(),
            1
        );
        assert_eq!(
            parse("existsSet X. forall x. forall y. (E(x,y) -> ((X(x) & ~X(y)) | (X(y) & ~X(x))))")
                .quantifier_rank(),
            3
        );
    }

    #[test]
    fn free_variables() {
        let f = parse("exists x. E(x,y) & X(z)");
        let (e, s) = f.free_vars();
        assert_eq!(e.into_iter().collect::<Vec<_>>(), vec!["y", "z"]);
        assert_eq!(s.into_iter().collect::<Vec<_>>(), vec!["X"]);
        assert!(!f.is_sentence());
    }
}
