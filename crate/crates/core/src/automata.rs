//! Deterministic bottom-up unranked tree automata. A node's state is read off
//! a per-operation horizontal DFA run over its children's states.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::optrees::{AlphabetSpec, NodeKind, OpTree, Symbol};

#[derive(Debug, Clone)]
pub struct TreeAutomaton {
    states: Vec<String>,
    accepting: Vec<bool>,
    leaf: Vec<usize>,
    horizontal: Vec<Hdfa>,
}

/// Horizontal DFA of one operation symbol. The last state is the sink.
#[derive(Debug, Clone)]
struct Hdfa {
    names: Vec<String>,
    start: usize,
    delta: Vec<Vec<usize>>,
    out: Vec<Option<usize>>,
}

/// Result of running an automaton.
#[derive(Debug, Clone)]
pub struct Run {
    pub root: usize,
    /// State of every node, by node id.
    pub states: HashMap<u64, usize>,
}

impl TreeAutomaton {
    /// Single accepting state; horizontal DFAs accept exactly the allowed arities.
    pub fn arity_valid(spec: &AlphabetSpec) -> TreeAutomaton {
        let q = 0;
        let horizontal = spec
            .ops()
            .iter()
            .map(|op| {
                let rho = op.rho;
                let ranked = op.ranked || rho == 1;
                // counting states 0..=rho, then the sink at rho+1
                let hsink = rho + 1;
                let mut delta = vec![vec![hsink; 2]; rho + 2];
                for (c, row) in delta.iter_mut().take(rho).enumerate() {
                    row[q] = c + 1;
                }
                if !ranked {
                    delta[rho][q] = 2;
                }
                let mut out = vec![None; rho + 2];
                out[rho] = Some(q);
                Hdfa {
                    names: (0..=rho)
                        .map(|c| format!("n{c}"))
                        .chain(["sink".into()])
                        .collect(),
                    start: 0,
                    delta,
                    out,
                }
            })
            .collect();
        TreeAutomaton {
            states: vec!["q".into(), "sink".into()],
            accepting: vec![true, false],
            leaf: vec![q; spec.leaves().len()],
            horizontal,
        }
    }

    /// Parse the automaton file format:
    ///
    /// ```text
    /// states q0 q1
    /// accept q1
    /// leaf v q0
    /// hdfa union h0
    /// hstep union h0 q0 h1
    /// hout union h1 q1
    /// ```
    ///
    /// Missing transitions go to implicit sink states.
    pub fn parse(text: &str, spec: &AlphabetSpec) -> Result<TreeAutomaton> {
        let mut states: Vec<String> = Vec::new();
        let mut state_ix: HashMap<String, usize> = HashMap::new();
        let mut accept: Vec<usize> = Vec::new();
        let mut leaf: Vec<Option<usize>> = vec![None; spec.leaves().len()];
        struct Partial {
            names: Vec<String>,
            ix: HashMap<String, usize>,
            start: Option<usize>,
            delta: HashMap<(usize, usize), usize>,
            out: HashMap<usize, usize>,
        }
        let mut hs: Vec<Partial> = (0..spec.ops().len())
            .map(|_| Partial {
                names: Vec::new(),
                ix: HashMap::new(),
                start: None,
                delta: HashMap::new(),
                out: HashMap::new(),
            })
            .collect();
        let hstate = |p: &mut Partial, name: &str| -> usize {
            if let Some(&i) = p.ix.get(name) {
                return i;
            }
            p.names.push(name.to_string());
            p.ix.insert(name.to_string(), p.names.len() - 1);
            p.names.len() - 1
        };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let w: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: String| Error::parse(line_no, msg);
            let q = |name: &str| -> Result<usize> {
                state_ix
                    .get(name)
                    .copied()
                    .ok_or_else(|| err(format!("unknown state {name}")))
            };
            let op = |name: &str| -> Result<usize> {
                match spec.lookup(name) {
                    Some(Symbol::Op(o)) => Ok(o),
                    _ => Err(err(format!("unknown operation symbol {name}"))),
                }
            };
            match w[..] {
                ["states", ref names @ ..] => {
                    for n in names {
                        if state_ix.insert(n.to_string(), states.len()).is_some() {
                            return Err(err(format!("state {n} declared twice")));
                        }
                        states.push(n.to_string());
                    }
                }
                ["accept", ref names @ ..] => {
                    for n in names {
                        accept.push(q(n)?);
                    }
                }
                ["leaf", sym, st] => {
                    let l = match spec.lookup(sym) {
                        Some(Symbol::Leaf(l)) => l,
                        _ => return Err(err(format!("unknown leaf symbol {sym}"))),
                    };
                    let st = q(st)?;
                    if leaf[l].replace(st).is_some() {
                        return Err(err(format!("leaf {sym} has two transitions")));
                    }
                }
                ["hdfa", o, start] => {
                    let p = &mut hs[op(o)?];
                    let s = hstate(p, start);
                    if p.start.replace(s).is_some() {
                        return Err(err(format!("hdfa {o} declared twice")));
                    }
                }
                ["hstep", o, from, on, to] => {
                    let on = q(on)?;
                    let p = &mut hs[op(o)?];
                    let (from, to) = (hstate(p, from), hstate(p, to));
                    if p.delta.insert((from, on), to).is_some() {
                        return Err(err(format!(
                            "hstep {o} from {} on {} declared twice",
                            w[2], w[3]
                        )));
                    }
                }
                ["hout", o, h, out] => {
                    let out = q(out)?;
                    let p = &mut hs[op(o)?];
                    let h = hstate(p, h);
                    if p.out.insert(h, out).is_some() {
                        return Err(err(format!("hout {o} for {} declared twice", w[2])));
                    }
                }
                _ => return Err(err(format!("cannot parse {line:?}"))),
            }
        }
        if states.is_empty() {
            return Err(Error::parse(0, "no `states` line"));
        }
        let sink = states.len();
        states.push("sink".into());
        let mut accepting = vec![false; states.len()];
        for a in accept {
            accepting[a] = true;
        }
        let horizontal = hs
            .into_iter()
            .map(|mut p| {
                let start = match p.start {
                    Some(s) => s,
                    None => hstate(&mut p, "start"),
                };
                let hsink = p.names.len();
                p.names.push("sink".into());
                let mut delta = vec![vec![hsink; states.len()]; p.names.len()];
                for ((from, on), to) in &p.delta {
                    delta[*from][*on] = *to;
                }
                let mut out = vec![None; p.names.len()];
                for (h, o) in &p.out {
                    out[*h] = Some(*o);
                }
                Hdfa {
                    names: p.names,
                    start,
                    delta,
                    out,
                }
            })
            .collect();
        Ok(TreeAutomaton {
            states,
            accepting,
            leaf: leaf.into_iter().map(|s| s.unwrap_or(sink)).collect(),
            horizontal,
        })
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, q: usize) -> &str {
        &self.states[q]
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn leaf_state(&self, leaf: usize) -> usize {
        self.leaf[leaf]
    }

    pub fn h_start(&self, op: usize) -> usize {
        self.horizontal[op].start
    }

    pub fn h_step(&self, op: usize, h: usize, q: usize) -> usize {
        self.horizontal[op].delta[h][q]
    }

    pub fn h_name(&self, op: usize, h: usize) -> &str {
        &self.horizontal[op].names[h]
    }

    /// Node state for a completed child sequence ending in `h`.
    pub fn h_out(&self, op: usize, h: usize) -> usize {
        self.horizontal[op].out[h].unwrap_or(self.states.len() - 1)
    }

    pub fn node_state(&self, op: usize, children: impl IntoIterator<Item = usize>) -> usize {
        let h = children
            .into_iter()
            .fold(self.h_start(op), |h, q| self.h_step(op, h, q));
        self.h_out(op, h)
    }

    pub fn run(&self, t: &OpTree) -> Run {
        let flat = t.flatten();
        let mut per = vec![0usize; flat.nodes.len()];
        for i in flat.postorder() {
            let f = &flat.nodes[i];
            per[i] = match f.node.kind() {
                NodeKind::Leaf(l) => self.leaf[*l],
                NodeKind::Internal(op, _) => {
                    self.node_state(*op, f.children.iter().map(|&c| per[c]))
                }
            };
        }
        Run {
            root: per[0],
            states: flat
                .nodes
                .iter()
                .zip(&per)
                .map(|(f, &q)| (f.node.id(), q))
                .collect(),
        }
    }

    pub fn accepts(&self, t: &OpTree) -> bool {
        self.accepting[self.run(t).root]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optrees::parse_tree;

    fn cograph() -> AlphabetSpec {
        AlphabetSpec::builtin("cograph1").unwrap()
    }

    #[test]
    fn default_accepts_valid_trees() {
        let spec = cograph();
        let aut = TreeAutomaton::arity_valid(&spec);
        for t in [
            "(leaf v)",
            "(union (leaf v) (leaf e) (leaf v))",
            "(join (union (leaf v) (leaf v)) (leaf v))",
        ] {
            assert!(aut.accepts(&parse_tree(t, &spec).unwrap()), "{t}");
        }
        let trees = AlphabetSpec::builtin("trees").unwrap();
        let aut = TreeAutomaton::arity_valid(&trees);
        assert!(aut.accepts(
            &parse_tree("(d (c (leaf b)) (a (leaf b) (leaf b) (leaf b)))", &trees).unwrap()
        ));
        // ranked arity counters reject overlong sequences
        assert_eq!(aut.node_state(2, [0, 0, 0]), 1);
    }

    const ROOT_IS_UNION: &str = "\
states q r
accept r
leaf v q
leaf e q
hdfa union h0
hstep union h0 q h1
hstep union h1 q h2
hstep union h2 q h2
hout union h2 r
hdfa join g0
hstep join g0 q g1
hstep join g1 q g2
hstep join g2 q g2
hout join g2 q
";

    #[test]
    fn root_must_be_union() {
        let spec = cograph();
        let aut = TreeAutomaton::parse(ROOT_IS_UNION, &spec).unwrap();
        assert!(
            aut.accepts(&parse_tree("(union (leaf v) (join (leaf v) (leaf v)))", &spec).unwrap())
        );
        assert!(!aut.accepts(&parse_tree("(leaf v)", &spec).unwrap()));
        assert!(!aut.accepts(&parse_tree("(join (leaf v) (leaf v))", &spec).unwrap()));
        // a union below a union yields r, which the horizontal DFAs never read
        assert!(
            !aut.accepts(&parse_tree("(union (union (leaf v) (leaf v)) (leaf v))", &spec).unwrap())
        );
    }

    const DEPTH_AT_MOST_TWO: &str = "\
states d0 d1 d2
accept d0 d1 d2
leaf b d0
leaf ab d1
hdfa c s
hstep c s d0 t1
hstep c s d1 t2
hout c t1 d1
hout c t2 d2
";

    #[test]
    fn bounded_depth() {
        let spec = AlphabetSpec::builtin("trees").unwrap();
        let aut = TreeAutomaton::parse(DEPTH_AT_MOST_TWO, &spec).unwrap();
        assert!(aut.accepts(&parse_tree("(c (c (leaf b)))", &spec).unwrap()));
        assert!(!aut.accepts(&parse_tree("(c (c (c (leaf b))))", &spec).unwrap()));
        assert!(!aut.accepts(&parse_tree("(a (leaf b) (leaf b))", &spec).unwrap()));
    }

    #[test]
    fn parse_errors() {
        let spec = cograph();
        let dup = "states q\nleaf v q\nleaf v q\n";
        assert!(matches!(
            TreeAutomaton::parse(dup, &spec),
            Err(Error::Parse { line: 3, .. })
        ));
        let unknown = "states q\nleaf w q\n";
        assert!(matches!(
            TreeAutomaton::parse(unknown, &spec),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad_state = "states q\nhdfa union h\nhstep union h z h\n";
        assert!(matches!(
            TreeAutomaton::parse(bad_state, &spec),
            Err(Error::Parse { line: 3, .. })
        ));
        let nondet = "states q\nhstep union h q a\nhstep union h q b\n";
        assert!(matches!(
            TreeAutomaton::parse(nondet, &spec),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn prefix_states_on_five_children() {
        // Horizontal DFA tracking the parity of children; hand-run below.
        let spec = cograph();
        let text = "states q\naccept q\nleaf v q\nleaf e q\n\
                    hdfa union even\nhstep union even q odd\nhstep union odd q even\n\
                    hout union even q\nhout union odd q\n";
        let aut = TreeAutomaton::parse(text, &spec).unwrap();
        let mut h = aut.h_start(0);
        let mut names = Vec::new();
        for _ in 0..5 {
            h = aut.h_step(0, h, 0);
            names.push(aut.h_name(0, h).to_string());
        }
        assert_eq!(names, ["odd", "even", "odd", "even", "odd"]);
    }
}
