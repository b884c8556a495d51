//! Precedence, loosest first: `->` (right associative), `|`, `&`, `~`.
//! Quantifier bodies extend as far right as possible.

use super::{Formula, LogicMode};
use crate::error::{Error, Result};
use crate::structures::Vocabulary;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Eq,
    Not,
    And,
    Or,
    Arrow,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '=' => Tok::Eq,
            '~' => Tok::Not,
            '&' => Tok::And,
            '|' => Tok::Or,
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Arrow
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i + 1 < bytes.len()
                    && ((bytes[i + 1] as char).is_ascii_alphanumeric() || bytes[i + 1] == b'_')
                {
                    i += 1;
                }
                Tok::Ident(src[start..=i].to_string())
            }
            other => {
                return Err(Error::Syntax {
                    pos: start,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

/// Parse a formula over `vocab`. Uppercase-initial variables are set variables;
/// they are rejected in FO mode.
pub fn parse_formula(src: &str, vocab: &Vocabulary, mode: LogicMode) -> Result<Formula> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
        vocab,
        mode,
    };
    let f = p.implication()?;
    if p.pos < p.toks.len() {
        return Err(p.error("trailing input"));
    }
    Ok(f)
}

struct Parser<'v> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    vocab: &'v Vocabulary,
    mode: LogicMode,
}

fn is_set_var(name: &str) -> bool {
    name.starts_with(|c: char| c.is_ascii_uppercase())
}

fn label_index(name: &str) -> Option<u32> {
    let digits = name.strip_prefix('L')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl Parser<'_> {
    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn elem_var(&mut self) -> Result<String> {
        let v = self.ident("a variable")?;
        if is_set_var(&v) {
            self.pos -= 1;
            return Err(self.error(format!("{v} is a set variable; element variable expected")));
        }
        Ok(v)
    }

    fn implication(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut f = self.conjunction()?;
        while self.eat(&Tok::Or) {
            f = Formula::or(f, self.conjunction()?);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut f = self.unary()?;
        while self.eat(&Tok::And) {
            f = Formula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat(&Tok::Not) {
            return Ok(Formula::not(self.unary()?));
        }
        if self.eat(&Tok::LParen) {
            let f = self.implication()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(f);
        }
        let name = self.ident("a formula")?;
        match name.as_str() {
            "exists" | "forall" => {
                let v = self.elem_var()?;
                self.expect(Tok::Dot, "`.` after quantified variable")?;
                let body = Box::new(self.implication()?);
                Ok(if name == "exists" {
                    Formula::Exists(v, body)
                } else {
                    Formula::Forall(v, body)
                })
            }
            "existsSet" | "forallSet" => {
                if self.mode == LogicMode::Fo {
                    self.pos -= 1;
                    return Err(self.error("set quantifier in FO mode"));
                }
                let v = self.ident("a set variable")?;
                if !is_set_var(&v) {
                    self.pos -= 1;
                    return Err(self.error("set variables must start with an uppercase letter"));
                }
                self.expect(Tok::Dot, "`.` after quantified variable")?;
                let body = Box::new(self.implication()?);
                Ok(if name == "existsSet" {
                    Formula::ExistsSet(v, body)
                } else {
                    Formula::ForallSet(v, body)
                })
            }
            _ if self.peek() == Some(&Tok::Eq) => {
                if is_set_var(&name) {
                    self.pos -= 1;
                    return Err(self.error("equality between set variables is not supported"));
                }
                self.pos += 1;
                let rhs = self.elem_var()?;
                Ok(Formula::Eq(name, rhs))
            }
            _ => self.atom(name),
        }
    }

    fn atom(&mut self, name: String) -> Result<Formula> {
        let name_pos = self.pos - 1;
        self.expect(Tok::LParen, "`(` or `=`")?;
        let mut args = vec![self.elem_var()?];
        while self.eat(&Tok::Comma) {
            args.push(self.elem_var()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        let at_name = |msg: String| Error::Syntax {
            pos: self.toks[name_pos].0,
            msg,
        };
        if let Some(r) = self.vocab.relation_index(&name) {
            let arity = self.vocab.arity(r);
            if args.len() != arity {
                return Err(at_name(format!(
                    "{name} has arity {arity}, got {}",
                    args.len()
                )));
            }
            return Ok(Formula::Rel(name, args));
        }
        if let Some(l) = label_index(&name) {
            if l == 0 || l > self.vocab.label_count() {
                return Err(at_name(format!(
                    "label {name} outside L1..L{}",
                    self.vocab.label_count()
                )));
            }
            if args.len() != 1 {
                return Err(at_name("label atoms take one argument".into()));
            }
            return Ok(Formula::Label(l, args.pop().unwrap()));
        }
        if is_set_var(&name) {
            if self.mode == LogicMode::Fo {
                return Err(at_name(format!("set variable {name} in FO mode")));
            }
            if args.len() != 1 {
                return Err(at_name("membership takes one argument".into()));
            }
            return Ok(Formula::Member(name, args.pop().unwrap()));
        }
        Err(at_name(format!("unknown relation {name}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn voc() -> Vocabulary {
        Vocabulary::graph(2)
    }

    fn ok(s: &str) -> Formula {
        parse_formula(s, &voc(), LogicMode::Mso).unwrap()
    }

    fn err_pos(s: &str, mode: LogicMode) -> usize {
        match parse_formula(s, &voc(), mode).unwrap_err() {
            Error::Syntax { pos, .. } => pos,
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn precedence() {
        let f = ok("E(x,y) | E(y,x) & x=y -> ~E(x,x)");
        let expected = Formula::implies(
            Formula::or(
                Formula::Rel("E".into(), vec!["x".into(), "y".into()]),
                Formula::and(
                    Formula::Rel("E".into(), vec!["y".into(), "x".into()]),
                    Formula::Eq("x".into(), "y".into()),
                ),
            ),
            Formula::not(Formula::Rel("E".into(), vec!["x".into(), "x".into()])),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn implication_is_right_associative() {
        let f = ok("x=x -> y=y -> z=z");
        match f {
            Formula::Implies(_, rhs) => assert!(matches!(*rhs, Formula::Implies(..))),
            _ => panic!(),
        }
    }

    #[test]
    fn quantifier_extends_right() {
        let f = ok("exists x. L1(x) & L2(x)");
        assert!(matches!(f, Formula::Exists(_, ref b) if matches!(**b, Formula::And(..))));
    }

    #[test]
    fn round_trip_printing() {
        for s in [
            "exists x. forall y. (E(x,y) | x=y)",
            "~(exists x. L1(x)) & forall y. L2(y)",
            "existsSet X. forall x. (X(x) -> ~exists y. (E(x,y) & X(y)))",
            "(x=y -> y=z) -> x=z",
        ] {
            let f = ok(s);
            assert_eq!(ok(&f.to_string()), f, "{s} printed as {f}");
        }
    }

    #[test]
    fn set_quantifier_rejected_in_fo() {
        assert_eq!(err_pos("exists x. existsSet X. X(x)", LogicMode::Fo), 10);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(err_pos("exists x E(x,x)", LogicMode::Fo), 9);
        assert_eq!(err_pos("R(x)", LogicMode::Fo), 0);
        assert_eq!(err_pos("E(x)", LogicMode::Fo), 0);
        assert_eq!(err_pos("L3(x)", LogicMode::Fo), 0);
        assert_eq!(err_pos("x = y)", LogicMode::Fo), 5);
        assert_eq!(err_pos("x $ y", LogicMode::Fo), 2);
    }
}
