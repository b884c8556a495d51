//! The `fvk` command line. Every subcommand writes `config.toml`,
//! `report.txt` and its artifacts into the run directory (`--out`), and
//! prints the report. Exit codes: 0 ok, 1 property violation, 2 usage or
//! parse error, 3 budget exceeded.

use std::collections::HashMap;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::automata::TreeAutomaton;
use crate::config::RunConfig;
use crate::eftypes::{equiv_with, type_of};
use crate::error::{Error, Result};
use crate::fvc::{annotate, load_tables, save_tables, verify_fvc, TypeEngine};
use crate::logic::{eval_sentence, parse_formula, Formula, LogicMode};
use crate::optrees::{evaluate, parse_tree, write_tree, AlphabetSpec, OpTree, Symbol};
use crate::preservation::{
    duality_check, find_crux_in, pce_check, psc_check, CheckOptions, Filter,
};
use crate::reduce::{
    check_degree_fixpoint, check_height_fixpoint, kernelize, mark_map, scale_generate,
    ScaleDirection, ScaleRequest,
};
use crate::structures::{
    parse_structure, write_structure, EnumSpace, RelSymbol, Structure, Vocabulary,
};

#[derive(Debug, Parser)]
#[command(
    name = "fvk",
    version,
    about = "Operation trees, rank-m types and logical kernels"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Run directory for reports and artifacts.
    #[arg(long, global = true, default_value = "fvk-run")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    /// Builtin alphabet name (cograph1, cograph2, trees, words) or a file.
    #[arg(long, default_value = "cograph1")]
    pub alphabet: String,
    #[arg(long)]
    pub tree: PathBuf,
    /// Tree automaton file; defaults to the arity-validity automaton.
    #[arg(long)]
    pub automaton: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LogicArgs {
    #[arg(long, default_value_t = 2)]
    pub rank: u32,
    #[arg(long, default_value = "fo")]
    pub logic: LogicMode,
}

#[derive(Debug, Args)]
pub struct PreservationArgs {
    #[arg(long)]
    pub formula: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub max_size: usize,
    /// Sentence defining the class to relativize to.
    #[arg(long)]
    pub filter: Option<PathBuf>,
    /// Vocabulary signature, e.g. `E/2,L=1`.
    #[arg(long, default_value = "E/2,L=0")]
    pub sig: String,
    /// Enumerate only simple graphs (first relation symmetric, irreflexive).
    #[arg(long)]
    pub simple: bool,
    /// Also run the dual check on the negation.
    #[arg(long)]
    pub duality: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Up,
    Down,
    Auto,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CorpusKind {
    Trees,
    Sentences,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a tree to its structure.
    Eval(TreeArgs),
    /// Rank-m type fingerprint of a structure.
    Type {
        #[arg(long)]
        structure: PathBuf,
        #[command(flatten)]
        logic: LogicArgs,
    },
    /// Decide rank-m equivalence of two structures.
    Equiv {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        logic: LogicArgs,
    },
    /// Per-node (delta1, delta2) annotation.
    Annotate {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        logic: LogicArgs,
    },
    /// Height and degree reduction to a kernel protecting some elements.
    Kernel {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        logic: LogicArgs,
        /// 1-based positions in the universe of Str(tree), as written by eval.
        #[arg(long, value_delimiter = ',')]
        protect: Vec<usize>,
    },
    /// Grow or shrink a tree into a size interval.
    Scale {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        logic: LogicArgs,
        #[arg(long)]
        min: usize,
        #[arg(long)]
        max: usize,
        #[arg(long, value_enum, default_value = "auto")]
        direction: DirectionArg,
    },
    /// Bounded PSC(k) check.
    PscCheck(PreservationArgs),
    /// Bounded PCE(k) check.
    PceCheck(PreservationArgs),
    /// Smallest k-crux of a structure.
    Crux {
        #[arg(long)]
        formula: PathBuf,
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Evaluate a sentence on the kernel of Str(tree) at the sentence's rank.
    Modelcheck {
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long)]
        formula: PathBuf,
    },
    /// Sampled congruence check of one operation.
    VerifyFvc {
        #[arg(long, default_value = "cograph1")]
        alphabet: String,
        #[arg(long)]
        op: String,
        #[command(flatten)]
        logic: LogicArgs,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Seeded random trees or sentences.
    GenCorpus {
        #[arg(long, default_value = "cograph1")]
        alphabet: String,
        #[arg(long, value_enum, default_value = "trees")]
        kind: CorpusKind,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Leaves per tree, or quantifier rank for sentences.
        #[arg(long, default_value_t = 6)]
        size: usize,
        #[arg(long)]
        mso: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eval(_) => "eval",
            Command::Type { .. } => "type",
            Command::Equiv { .. } => "equiv",
            Command::Annotate { .. } => "annotate",
            Command::Kernel { .. } => "kernel",
            Command::Scale { .. } => "scale",
            Command::PscCheck(_) => "psc-check",
            Command::PceCheck(_) => "pce-check",
            Command::Crux { .. } => "crux",
            Command::Modelcheck { .. } => "modelcheck",
            Command::VerifyFvc { .. } => "verify-fvc",
            Command::GenCorpus { .. } => "gen-corpus",
        }
    }
}

/// key=value report lines under a `schema=1` header.
#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
    files: Vec<(String, String)>,
    violation: bool,
}

impl Report {
    fn new(command: &str) -> Report {
        let mut r = Report::default();
        r.kv("command", command);
        r
    }

    fn kv(&mut self, key: &str, value: impl Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    /// A certified flag; false marks the run as a property violation.
    fn check(&mut self, key: &str, ok: bool) {
        self.kv(key, ok);
        self.violation |= !ok;
    }

    fn file(&mut self, name: &str, contents: String) {
        self.kv(&format!("file.{}", name.replace('.', "_")), name);
        self.files.push((name.to_string(), contents));
    }

    pub fn render(&self) -> String {
        let mut s = String::from("schema=1\n");
        for (k, v) in &self.lines {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn violation(&self) -> bool {
        self.violation
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::domain(format!("cannot read {}: {e}", path.display())))
}

fn load_alphabet(name: &str) -> Result<Arc<AlphabetSpec>> {
    let p = Path::new(name);
    Ok(Arc::new(if p.exists() {
        AlphabetSpec::load(p)?
    } else {
        AlphabetSpec::builtin(name)?
    }))
}

struct Loaded {
    spec: Arc<AlphabetSpec>,
    tree: OpTree,
    aut: TreeAutomaton,
}

fn load_tree(a: &TreeArgs) -> Result<Loaded> {
    let spec = load_alphabet(&a.alphabet)?;
    let tree = parse_tree(&read(&a.tree)?, &spec)?;
    tree.validate(&spec)?;
    let aut = match &a.automaton {
        Some(p) => TreeAutomaton::parse(&read(p)?, &spec)?,
        None => TreeAutomaton::arity_valid(&spec),
    };
    Ok(Loaded { spec, tree, aut })
}

/// `E/2,R/3,L=1`: relation symbols with arities, then the label count.
pub fn parse_signature(sig: &str) -> Result<Vocabulary> {
    let mut rels = Vec::new();
    let mut labels = 0;
    for part in sig.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::domain(format!("bad signature item {part:?}"));
        if let Some(n) = part.strip_prefix("L=") {
            labels = n.parse().map_err(|_| bad())?;
        } else {
            let (name, arity) = part.split_once('/').ok_or_else(bad)?;
            rels.push(RelSymbol {
                name: name.to_string(),
                arity: arity.parse().map_err(|_| bad())?,
            });
        }
    }
    Vocabulary::new(rels, labels)
}

fn engine(
    spec: &Arc<AlphabetSpec>,
    l: &LogicArgs,
    marks: u32,
    cfg: &RunConfig,
) -> Result<TypeEngine> {
    engine_for(spec, l.logic, l.rank, marks, cfg)
}

fn engine_for(
    spec: &Arc<AlphabetSpec>,
    mode: LogicMode,
    rank: u32,
    marks: u32,
    cfg: &RunConfig,
) -> Result<TypeEngine> {
    let e = TypeEngine::new(spec.clone(), mode, rank, marks, cfg.oracle())?;
    if let Some(dir) = cfg.resolved_cache_dir() {
        if dir.is_dir() {
            load_tables(&e, &dir)?;
        }
    }
    Ok(e)
}

fn persist(e: &TypeEngine, cfg: &RunConfig, r: &mut Report) -> Result<()> {
    let s = e.stats();
    r.kv("tables.hits", s.hits);
    r.kv("tables.misses", s.misses);
    r.kv("tables.oracle_calls", s.oracle_calls);
    r.kv("tables.witness_fallbacks", s.witness_fallbacks);
    if let Some(dir) = cfg.resolved_cache_dir() {
        std::fs::create_dir_all(&dir)?;
        let written = save_tables(e, &dir)?;
        r.kv("tables.saved", written.len());
    }
    Ok(())
}

fn formula(path: &Path, vocab: &Vocabulary) -> Result<Formula> {
    let phi = parse_formula(read(path)?.trim(), vocab, LogicMode::Mso)?;
    if !phi.is_sentence() {
        return Err(Error::domain("formula has free variables"));
    }
    Ok(phi)
}

fn cmd_eval(a: &TreeArgs, r: &mut Report) -> Result<()> {
    let l = load_tree(a)?;
    let (s, _) = evaluate(&l.tree, &l.spec)?;
    r.kv("nodes", l.tree.node_count());
    r.kv("height", l.tree.height());
    r.kv("size", s.len());
    r.check("accepted", l.aut.accepts(&l.tree));
    r.file("structure.str", write_structure(&s));
    Ok(())
}

fn cmd_annotate(a: &TreeArgs, lg: &LogicArgs, cfg: &RunConfig, r: &mut Report) -> Result<()> {
    let l = load_tree(a)?;
    let e = engine(&l.spec, lg, 0, cfg)?;
    let ann = annotate(&l.tree, &e, &l.aut, &HashMap::new())?;
    let mut listing = String::new();
    for (i, f) in ann.flat.nodes.iter().enumerate() {
        let _ = writeln!(
            listing,
            "{}\tid={}\tsize={}\tdelta1={}\tdelta2={}",
            ann.flat.address(i),
            f.node.id(),
            ann.sizes[i],
            ann.delta1[i].short(),
            l.aut.state_name(ann.delta2[i])
        );
    }
    r.kv("logic", lg.logic);
    r.kv("rank", lg.rank);
    r.kv("root.delta1", ann.root_type());
    r.kv("root.delta2", l.aut.state_name(ann.root_state()));
    r.kv("accepted", l.aut.is_accepting(ann.root_state()));
    r.file("annotation.tsv", listing);
    persist(&e, cfg, r)
}

fn cmd_kernel(
    a: &TreeArgs,
    lg: &LogicArgs,
    protect: &[usize],
    cfg: &RunConfig,
    r: &mut Report,
) -> Result<()> {
    let l = load_tree(a)?;
    let (s, _) = evaluate(&l.tree, &l.spec)?;
    let w = protect
        .iter()
        .map(|&p| {
            s.universe().get(p.wrapping_sub(1)).copied().ok_or_else(|| {
                Error::domain(format!("--protect {p}: structure has {} elements", s.len()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e = engine(&l.spec, lg, w.len() as u32, cfg)?;
    let k = kernelize(&l.tree, &e, &l.aut, &w)?;
    let c = &k.certificate;
    r.kv("logic", lg.logic);
    r.kv("rank", lg.rank);
    r.kv("protected", w.len());
    r.kv("nodes.before", k.report.nodes_before);
    r.kv("nodes.after", k.report.nodes_after);
    r.kv("height.before", k.report.height_before);
    r.kv("height.after", k.report.height_after);
    r.kv("degree.before", k.report.degree_before);
    r.kv("degree.after", k.report.degree_after);
    r.kv("size.before", k.report.size_before);
    r.kv("size.after", c.size);
    r.kv("steps.height", k.report.height_steps);
    r.kv("steps.degree", k.report.degree_steps);
    r.kv("pairs.eta1", k.report.distinct_pairs);
    r.kv("pairs.eta2", k.report.distinct_prefix_pairs);
    r.kv("bound", c.bound);
    r.check("cert.accepted", c.accepted);
    r.check("cert.induced", c.induced);
    r.check("cert.contains_w", c.contains_w);
    r.check("cert.within_bound", c.within_bound);
    r.check("cert.delta1_preserved", c.delta1_preserved);
    r.kv("cert.oracle", verdict_text(c.oracle_equivalent));
    r.violation |= c.oracle_equivalent == Some(false);
    let protected = k.protected.iter().copied().collect();
    let fresh = annotate(&k.tree, &e, &l.aut, &mark_map(&e, &w))?;
    r.check(
        "fixpoint.height",
        check_height_fixpoint(&fresh, &protected).is_none(),
    );
    r.check(
        "fixpoint.degree",
        check_degree_fixpoint(&fresh, &l.spec, &protected).is_none(),
    );
    let kept: Vec<String> = k
        .structure
        .universe()
        .iter()
        .map(|x| (s.universe().binary_search(x).unwrap() + 1).to_string())
        .collect();
    r.kv("kept", kept.join(","));
    r.file("kernel.sexp", write_tree(&k.tree, &l.spec));
    r.file("kernel.str", write_structure(&k.structure));
    persist(&e, cfg, r)
}

fn verdict_text(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "equivalent",
        Some(false) => "DIFFERENT",
        None => "over-cap",
    }
}

fn cmd_scale(
    a: &TreeArgs,
    lg: &LogicArgs,
    lo: usize,
    hi: usize,
    d: DirectionArg,
    cfg: &RunConfig,
    r: &mut Report,
) -> Result<()> {
    let l = load_tree(a)?;
    let e = engine(&l.spec, lg, 0, cfg)?;
    let direction = match d {
        DirectionArg::Up => ScaleDirection::Up,
        DirectionArg::Down => ScaleDirection::Down,
        DirectionArg::Auto => ScaleDirection::Auto,
    };
    let (t, rep) = scale_generate(&l.tree, &e, &l.aut, ScaleRequest { lo, hi, direction })?;
    r.kv("logic", lg.logic);
    r.kv("rank", lg.rank);
    r.kv("size.before", rep.size_before);
    r.kv("size.after", rep.size_after);
    r.kv("direction", rep.direction);
    r.kv("steps", rep.steps);
    r.kv(
        "granularity",
        rep.granularity
            .iter()
            .map(|g| g.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    r.check("in_interval", (lo..=hi).contains(&rep.size_after));
    r.check("cert.accepted", rep.accepted);
    r.check("cert.delta1_preserved", rep.delta1_preserved);
    r.check("cert.embedding", rep.embedding);
    r.kv("cert.oracle", verdict_text(rep.oracle_equivalent));
    r.violation |= rep.oracle_equivalent == Some(false);
    let (s, _) = evaluate(&t, &l.spec)?;
    r.file("scaled.sexp", write_tree(&t, &l.spec));
    r.file("scaled.str", write_structure(&s));
    persist(&e, cfg, r)
}

fn cmd_preservation(
    p: &PreservationArgs,
    pce: bool,
    cfg: &RunConfig,
    r: &mut Report,
) -> Result<()> {
    let vocab = Arc::new(parse_signature(&p.sig)?);
    let phi = formula(&p.formula, &vocab)?;
    let class = p.filter.as_ref().map(|f| formula(f, &vocab)).transpose()?;
    let member = |s: &Structure| eval_sentence(class.as_ref().expect("filter present"), s);
    let filter: Option<Filter> = class.as_ref().map(|_| &member as Filter);
    let opts = CheckOptions {
        space: if p.simple {
            EnumSpace::SimpleGraphs
        } else {
            EnumSpace::All
        },
        subset_budget: cfg.enum_budget,
        ..CheckOptions::new(vocab, p.max_size)
    };
    r.kv("formula", &phi);
    r.kv("k", p.k);
    r.kv("max_size", p.max_size);
    r.kv("relativized", class.is_some());
    if pce {
        let rep = pce_check(&phi, p.k, &opts, filter)?;
        r.kv("structures", rep.structures);
        r.kv("verdict", rep.verdict);
        if let Some(c) = rep.counterexample {
            r.file("counterexample.str", write_structure(&c.structure));
            let members: Vec<String> = c
                .members
                .iter()
                .map(|m| {
                    m.iter()
                        .map(|e| {
                            (c.structure.universe().binary_search(&e).unwrap() + 1).to_string()
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            r.file("cover.txt", members.join("\n") + "\n");
        }
    } else {
        let rep = psc_check(&phi, p.k, &opts, filter)?;
        r.kv("structures", rep.structures);
        r.kv("models", rep.models);
        r.kv("verdict", rep.verdict);
        if let Some(c) = rep.counterexample {
            r.file("counterexample.str", write_structure(&c));
        }
    }
    if p.duality {
        let d = if pce {
            duality_check(&Formula::not(phi.clone()), p.k, &opts, filter)?
        } else {
            duality_check(&phi, p.k, &opts, filter)?
        };
        r.kv("duality.psc", d.psc);
        r.kv("duality.pce_of_negation", d.pce_of_negation);
        r.check("duality.agree", d.agree);
    }
    Ok(())
}

fn cmd_crux(f: &Path, s: &Path, k: usize, cfg: &RunConfig, r: &mut Report) -> Result<()> {
    let a = parse_structure(&read(s)?)?;
    let phi = formula(f, a.vocab())?;
    r.kv("formula", &phi);
    r.kv("k", k);
    match find_crux_in(&phi, &a, k, cfg.enum_budget, None)? {
        Some(c) => {
            let pos: Vec<String> = c
                .crux
                .iter()
                .map(|e| (a.universe().binary_search(e).unwrap() + 1).to_string())
                .collect();
            r.kv("crux", format!("{{{}}}", pos.join(",")));
            r.kv("verified_substructures", c.verified);
        }
        None => r.kv("crux", "none"),
    }
    Ok(())
}

fn cmd_modelcheck(a: &TreeArgs, f: &Path, cfg: &RunConfig, r: &mut Report) -> Result<()> {
    let l = load_tree(a)?;
    let phi = formula(f, l.spec.vocab())?;
    let mode = if phi.uses_sets() {
        LogicMode::Mso
    } else {
        LogicMode::Fo
    };
    let rank = phi.quantifier_rank();
    let e = engine_for(&l.spec, mode, rank, 0, cfg)?;
    let k = kernelize(&l.tree, &e, &l.aut, &[])?;
    let on_kernel = eval_sentence(&phi, &k.structure)?;
    r.kv("formula", &phi);
    r.kv("logic", mode);
    r.kv("rank", rank);
    r.kv("size", k.report.size_before);
    r.kv("kernel.size", k.structure.len());
    r.check("cert", k.certificate.holds());
    r.kv("value", on_kernel);
    let (s, _) = evaluate(&l.tree, &l.spec)?;
    match eval_sentence(&phi, &s) {
        Ok(direct) => r.check("direct_agrees", direct == on_kernel),
        Err(err) if err.is_budget() => r.kv("direct_agrees", "skipped"),
        Err(err) => return Err(err),
    }
    r.file("kernel.sexp", write_tree(&k.tree, &l.spec));
    persist(&e, cfg, r)
}

fn cmd_verify(
    alphabet: &str,
    op: &str,
    lg: &LogicArgs,
    trials: usize,
    cfg: &RunConfig,
    r: &mut Report,
) -> Result<()> {
    let spec = load_alphabet(alphabet)?;
    let Some(Symbol::Op(i)) = spec.lookup(op) else {
        return Err(Error::domain(format!("unknown operation {op}")));
    };
    let rep = verify_fvc(&spec, i, lg.logic, lg.rank, &cfg.oracle(), trials, cfg.seed)?;
    r.kv("op", &rep.op);
    r.kv("logic", rep.mode);
    r.kv("rank", rep.rank);
    r.kv("trials", rep.trials);
    r.kv("nontrivial", rep.nontrivial);
    r.check("passed", rep.passed());
    if let Some(c) = rep.counterexample {
        r.file(
            "counterexample.txt",
            format!(
                "left: {}\nright: {}\n--- left output\n{}--- right output\n{}",
                c.left.join(" "),
                c.right.join(" "),
                c.left_output,
                c.right_output
            ),
        );
    }
    Ok(())
}

fn cmd_gen(
    alphabet: &str,
    kind: CorpusKind,
    count: usize,
    size: usize,
    mso: bool,
    cfg: &RunConfig,
    r: &mut Report,
) -> Result<()> {
    let spec = load_alphabet(alphabet)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    r.kv("kind", format!("{kind:?}").to_lowercase());
    r.kv("count", count);
    for i in 0..count {
        let body = match kind {
            CorpusKind::Trees => write_tree(
                &crate::gen::random_tree(&spec, &mut rng, size.max(1), &[], &[]),
                &spec,
            ),
            CorpusKind::Sentences => {
                crate::gen::random_sentence(spec.vocab(), &mut rng, size as u32, mso).to_string()
            }
        };
        let ext = match kind {
            CorpusKind::Trees => "sexp",
            CorpusKind::Sentences => "fo",
        };
        r.file(&format!("{i:04}.{ext}"), body + "\n");
    }
    Ok(())
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<Report> {
    let mut r = Report::new(cli.command.name());
    r.kv("seed", cfg.seed);
    match &cli.command {
        Command::Eval(a) => cmd_eval(a, &mut r)?,
        Command::Type { structure, logic } => {
            let s = parse_structure(&read(structure)?)?;
            r.kv("size", s.len());
            r.kv("logic", logic.logic);
            r.kv("rank", logic.rank);
            r.kv("type", type_of(&s, logic.rank, logic.logic, &cfg.oracle())?);
        }
        Command::Equiv { a, b, logic } => {
            let (x, y) = (parse_structure(&read(a)?)?, parse_structure(&read(b)?)?);
            r.kv("logic", logic.logic);
            r.kv("rank", logic.rank);
            r.kv(
                "equivalent",
                equiv_with(&x, &y, logic.rank, logic.logic, &cfg.oracle())?,
            );
        }
        Command::Annotate { tree, logic } => cmd_annotate(tree, logic, cfg, &mut r)?,
        Command::Kernel {
            tree,
            logic,
            protect,
        } => cmd_kernel(tree, logic, protect, cfg, &mut r)?,
        Command::Scale {
            tree,
            logic,
            min,
            max,
            direction,
        } => cmd_scale(tree, logic, *min, *max, *direction, cfg, &mut r)?,
        Command::PscCheck(p) => cmd_preservation(p, false, cfg, &mut r)?,
        Command::PceCheck(p) => cmd_preservation(p, true, cfg, &mut r)?,
        Command::Crux {
            formula,
            structure,
            k,
        } => cmd_crux(formula, structure, *k, cfg, &mut r)?,
        Command::Modelcheck { tree, formula } => cmd_modelcheck(tree, formula, cfg, &mut r)?,
        Command::VerifyFvc {
            alphabet,
            op,
            logic,
            trials,
        } => cmd_verify(alphabet, op, logic, *trials, cfg, &mut r)?,
        Command::GenCorpus {
            alphabet,
            kind,
            count,
            size,
            mso,
        } => cmd_gen(alphabet, *kind, *count, *size, *mso, cfg, &mut r)?,
    }
    Ok(r)
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_budget() {
        3
    } else if e.is_usage() {
        2
    } else {
        1
    }
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = effective_config(cli).and_then(|cfg| {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global();
        let report = dispatch(cli, &cfg);
        std::fs::create_dir_all(&cli.out)?;
        std::fs::write(cli.out.join("config.toml"), cfg.to_toml())?;
        let report = report?;
        for (name, contents) in &report.files {
            std::fs::write(cli.out.join(name), contents)?;
        }
        std::fs::write(cli.out.join("report.txt"), report.render())?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            print!("{}", report.render());
            if report.violation() {
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    run(&cli)
}
