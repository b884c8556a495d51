//! Line-oriented structure format.
//!
//! ```text
//! # comment
//! universe 3
//! rel E 2
//! labels 1
//! E 1 2
//! label 3 1
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt::Write;
use std::sync::Arc;

use super::{label_bit, Elem, RelSymbol, Structure, StructureBuilder, Vocabulary};
use crate::error::{Error, Result};

pub fn parse_structure(text: &str) -> Result<Structure> {
    let mut universe: Option<u64> = None;
    let mut rels: Vec<RelSymbol> = Vec::new();
    let mut declared_labels: Option<u32> = None;
    let mut tuples: Vec<(usize, usize, Vec<Elem>)> = Vec::new();
    let mut labels: Vec<(usize, Elem, u32)> = Vec::new();
    let mut seen_tuples = HashSet::new();
    let mut seen_labels = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let num = |w: &str| -> Result<u64> {
            w.parse::<u64>()
                .map_err(|_| Error::parse(line_no, format!("expected a number, got {w:?}")))
        };
        let elem = |w: &str| -> Result<Elem> {
            let n = universe.ok_or_else(|| Error::parse(line_no, "element before `universe`"))?;
            let e = num(w)?;
            if e == 0 || e > n {
                return Err(Error::parse(line_no, format!("element {e} outside 1..{n}")));
            }
            Ok(Elem(e))
        };
        match words[0] {
            "universe" => {
                if words.len() != 2 {
                    return Err(Error::parse(line_no, "usage: universe N"));
                }
                if universe.is_some() {
                    return Err(Error::parse(line_no, "universe declared twice"));
                }
                universe = Some(num(words[1])?);
            }
            "rel" => {
                if words.len() != 3 {
                    return Err(Error::parse(line_no, "usage: rel NAME ARITY"));
                }
                let arity = num(words[2])? as usize;
                if arity == 0 {
                    return Err(Error::parse(line_no, "arity must be positive"));
                }
                if rels.iter().any(|r| r.name == words[1]) {
                    return Err(Error::parse(
                        line_no,
                        format!("relation {} redeclared", words[1]),
                    ));
                }
                rels.push(RelSymbol {
                    name: words[1].to_string(),
                    arity,
                });
            }
            "labels" => {
                if words.len() != 2 {
                    return Err(Error::parse(line_no, "usage: labels K"));
                }
                declared_labels = Some(num(words[1])? as u32);
            }
            "label" => {
                if words.len() != 3 {
                    return Err(Error::parse(line_no, "usage: label ELEMENT INDEX"));
                }
                let e = elem(words[1])?;
                let l = num(words[2])? as u32;
                if l == 0 || l > super::MAX_LABELS {
                    return Err(Error::parse(
                        line_no,
                        format!("label index {l} out of range"),
                    ));
                }
                if !seen_labels.insert((e, l)) {
                    return Err(Error::parse(line_no, "duplicate label line"));
                }
                labels.push((line_no, e, l));
            }
            name => {
                let r = rels
                    .iter()
                    .position(|r| r.name == name)
                    .ok_or_else(|| Error::parse(line_no, format!("unknown relation {name}")))?;
                let args = words[1..]
                    .iter()
                    .map(|w| elem(w))
                    .collect::<Result<Vec<_>>>()?;
                if args.len() != rels[r].arity {
                    return Err(Error::parse(
                        line_no,
                        format!(
                            "{name} has arity {}, got {} arguments",
                            rels[r].arity,
                            args.len()
                        ),
                    ));
                }
                if !seen_tuples.insert((r, args.clone())) {
                    return Err(Error::parse(line_no, format!("duplicate tuple for {name}")));
                }
                tuples.push((line_no, r, args));
            }
        }
    }
    let n = universe.ok_or_else(|| Error::parse(0, "missing `universe` line"))?;
    let max_label = labels.iter().map(|l| l.2).max().unwrap_or(0);
    let label_count = match declared_labels {
        Some(k) if k < max_label => {
            let line = labels.iter().find(|l| l.2 > k).map(|l| l.0).unwrap_or(0);
            return Err(Error::parse(
                line,
                format!("label index exceeds declared count {k}"),
            ));
        }
        Some(k) => k,
        None => max_label,
    };
    let vocab = Arc::new(Vocabulary::new(rels, label_count)?);
    let mut b = StructureBuilder::new(vocab);
    for i in 1..=n {
        b.add_element(Elem(i));
    }
    for (_, r, args) in tuples {
        b.add_tuple(r, args.into());
    }
    for (_, e, l) in labels {
        b.add_labels(e, label_bit(l));
    }
    b.finish()
}

/// Serialize with elements renumbered `1..n` in universe order.
pub fn write_structure(s: &Structure) -> String {
    let index: HashMap<Elem, usize> = s
        .universe()
        .iter()
        .enumerate()
        .map(|(i, e)| (*e, i + 1))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "universe {}", s.len());
    let vocab = s.vocab();
    if vocab.label_count() > 0 {
        let _ = writeln!(out, "labels {}", vocab.label_count());
    }
    for r in vocab.relations() {
        let _ = writeln!(out, "rel {} {}", r.name, r.arity);
    }
    for (ri, r) in vocab.relations().iter().enumerate() {
        let mut lines: Vec<Vec<usize>> = s
            .tuples(ri)
            .iter()
            .map(|t| t.iter().map(|e| index[e]).collect())
            .collect();
        lines.sort();
        for t in lines {
            out.push_str(&r.name);
            for i in t {
                let _ = write!(out, " {i}");
            }
            out.push('\n');
        }
    }
    for (e, l) in s.labels() {
        for bit in 0..64 {
            if l >> bit & 1 == 1 {
                let _ = writeln!(out, "label {} {}", index[e], bit + 1);
            }
        }
    }
    out
}
