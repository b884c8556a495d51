use std::sync::Arc;

use super::{AlphabetSpec, Node, NodeKind, OpTree, Symbol};
use crate::error::{Error, Result};

/// Parse `tree := "(" "leaf" SYMBOL ")" | "(" SYMBOL tree+ ")"`.
/// Node ids are assigned in preorder from 0.
pub fn parse_tree(text: &str, spec: &AlphabetSpec) -> Result<OpTree> {
    let toks = lex(text);
    let syntax = |pos: usize, msg: String| Error::Syntax { pos, msg };
    // Open frames: (op index, op name position, node id, children so far).
    let mut stack: Vec<(usize, usize, u64, Vec<Arc<Node>>)> = Vec::new();
    let mut next_id = 0u64;
    let mut done: Option<Arc<Node>> = None;
    let mut i = 0;
    while i < toks.len() {
        let (pos, tok) = toks[i];
        if done.is_some() {
            return Err(syntax(pos, "trailing input after tree".into()));
        }
        match tok {
            "(" => {
                let Some(&(name_pos, name)) = toks.get(i + 1) else {
                    return Err(syntax(text.len(), "unexpected end of input".into()));
                };
                if name == "(" || name == ")" {
                    return Err(syntax(name_pos, "expected a symbol".into()));
                }
                if name == "leaf" {
                    let (sym_pos, sym) = *toks
                        .get(i + 2)
                        .ok_or_else(|| syntax(text.len(), "unexpected end of input".into()))?;
                    let leaf = match spec.lookup(sym) {
                        Some(Symbol::Leaf(l)) => l,
                        Some(Symbol::Op(_)) => {
                            return Err(syntax(
                                sym_pos,
                                format!("{sym} is an operation, not a leaf"),
                            ))
                        }
                        None => return Err(syntax(sym_pos, format!("unknown leaf symbol {sym}"))),
                    };
                    match toks.get(i + 3) {
                        Some(&(_, ")")) => {}
                        Some(&(p, _)) => {
                            return Err(syntax(p, "expected `)` after leaf symbol".into()))
                        }
                        None => return Err(syntax(text.len(), "unexpected end of input".into())),
                    }
                    let node = Node::leaf(next_id, leaf);
                    next_id += 1;
                    match stack.last_mut() {
                        Some(frame) => frame.3.push(node),
                        None => done = Some(node),
                    }
                    i += 4;
                    continue;
                }
                let op = match spec.lookup(name) {
                    Some(Symbol::Op(o)) => o,
                    Some(Symbol::Leaf(_)) => {
                        return Err(syntax(
                            name_pos,
                            format!("leaf symbol {name} needs `(leaf {name})`"),
                        ))
                    }
                    None => return Err(syntax(name_pos, format!("unknown symbol {name}"))),
                };
                stack.push((op, name_pos, next_id, Vec::new()));
                next_id += 1;
                i += 2;
            }
            ")" => {
                let (op, name_pos, id, children) = stack
                    .pop()
                    .ok_or_else(|| syntax(pos, "unbalanced `)`".into()))?;
                let sym = spec.op(op);
                if !sym.allows(children.len()) {
                    return Err(syntax(
                        name_pos,
                        format!(
                            "{} applied to {} children; allowed arity is {}",
                            sym.name,
                            children.len(),
                            sym.arity_description()
                        ),
                    ));
                }
                let node = Node::internal(id, op, children);
                match stack.last_mut() {
                    Some(frame) => frame.3.push(node),
                    None => done = Some(node),
                }
                i += 1;
            }
            other => return Err(syntax(pos, format!("unexpected token {other:?}"))),
        }
    }
    if !stack.is_empty() {
        return Err(syntax(text.len(), "unexpected end of input".into()));
    }
    let root = done.ok_or_else(|| syntax(0, "empty input".into()))?;
    Ok(OpTree::new(root))
}

fn lex(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &text[s..i]));
            }
            if !c.is_whitespace() {
                out.push((i, &text[i..i + 1]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &text[s..]));
    }
    out
}

/// Render as a single-line s-expression.
pub fn write_tree(t: &OpTree, spec: &AlphabetSpec) -> String {
    let mut out = String::new();
    enum Step<'a> {
        Open(&'a Arc<Node>),
        Close,
    }
    let mut stack = vec![Step::Open(t.root())];
    while let Some(step) = stack.pop() {
        match step {
            Step::Close => out.push(')'),
            Step::Open(n) => {
                if !out.is_empty() && !out.ends_with('(') {
                    out.push(' ');
                }
                match n.kind() {
                    NodeKind::Leaf(l) => {
                        out.push_str("(leaf ");
                        out.push_str(&spec.leaf(*l).name);
                        out.push(')');
                    }
                    NodeKind::Internal(o, children) => {
                        out.push('(');
                        out.push_str(&spec.op(*o).name);
                        stack.push(Step::Close);
                        for c in children.iter().rev() {
                            stack.push(Step::Open(c));
                        }
                    }
                }
            }
        }
    }
    out
}
