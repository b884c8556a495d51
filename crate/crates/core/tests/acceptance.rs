//! Acceptance criteria 1-8. Each test prints one `criterion N: PASS|FAIL`
//! line to the real stdout (bypassing capture) and then asserts. Tests take
//! a global lock so timings are not disturbed by each other.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use fvkernel::automata::TreeAutomaton;
use fvkernel::eftypes::{type_of, OracleConfig};
use fvkernel::fvc::{annotate, verify_fvc, TypeEngine};
use fvkernel::gen::{left_comb, random_sentence, random_tree};
use fvkernel::logic::{eval_sentence, Formula, LogicMode};
use fvkernel::optrees::{
    evaluate, evaluate_marked, parse_tree, write_tree, AlphabetSpec, OpTree, Symbol,
};
use fvkernel::preservation::{duality_check, psc_check, CheckOptions, Verdict};
use fvkernel::reduce::{
    check_degree_fixpoint, check_height_fixpoint, degree_reduce, height_reduce, kernelize,
    mark_map, scale_generate, witness_bound, ScaleDirection, ScaleRequest,
};
use fvkernel::structures::{EnumSpace, Structure, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn line(n: u32, ok: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {n}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = out.flush();
}

fn alphabet(name: &str) -> Arc<AlphabetSpec> {
    Arc::new(AlphabetSpec::builtin(name).unwrap())
}

fn op(spec: &AlphabetSpec, name: &str) -> usize {
    match spec.lookup(name) {
        Some(Symbol::Op(i)) => i,
        _ => panic!("no op {name}"),
    }
}

fn leaf(spec: &AlphabetSpec, name: &str) -> usize {
    match spec.lookup(name) {
        Some(Symbol::Leaf(i)) => i,
        _ => panic!("no leaf {name}"),
    }
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// "There are at least k vertices."
fn at_least(k: usize) -> Formula {
    let names: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
    let mut body: Option<Formula> = None;
    for i in 0..k {
        for j in i + 1..k {
            let ne = Formula::not(Formula::Eq(names[i].clone(), names[j].clone()));
            body = Some(match body {
                Some(b) => Formula::and(b, ne),
                None => ne,
            });
        }
    }
    let mut phi = body.unwrap_or_else(|| Formula::Eq(names[0].clone(), names[0].clone()));
    for n in names.iter().rev() {
        phi = Formula::exists(n, phi);
    }
    phi
}

#[test]
fn criterion_7_preservation_checks() {
    let _g = serial();
    let start = Instant::now();
    let vocab = Arc::new(Vocabulary::graph(0));
    let mut failures = Vec::new();
    let graphs = CheckOptions {
        space: EnumSpace::SimpleGraphs,
        ..CheckOptions::new(vocab.clone(), 5)
    };
    for k in 1..=3 {
        let phi = at_least(k);
        let at_k = psc_check(&phi, k, &graphs, None).unwrap().verdict;
        let below = psc_check(&phi, k - 1, &graphs, None).unwrap().verdict;
        if at_k != Verdict::TrueUpTo(5) || below != Verdict::False {
            failures.push(format!(
                "at least {k}: PSC({k}) {at_k}, PSC({}) {below}",
                k - 1
            ));
        }
    }
    let all = CheckOptions::new(vocab.clone(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut holds = 0;
    for i in 0..30 {
        let phi = random_sentence(&vocab, &mut rng, 1 + (i % 2) as u32, false);
        let r = duality_check(&phi, i % 3, &all, None).unwrap();
        holds += r.psc.holds() as usize;
        if !r.agree {
            failures.push(format!(
                "{phi} at k={}: PSC {} but PCE of negation {}",
                i % 3,
                r.psc,
                r.pce_of_negation
            ));
        }
    }
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed <= Duration::from_secs(600);
    let detail = format!(
        "at-least-k sentences for k=1..3 on graphs up to 5 vertices, 30 random sentences up to size 4 ({holds} PSC true), {} disagreements, {:.1}s of 600s",
        failures.len(),
        elapsed.as_secs_f64()
    );
    line(7, ok, &detail);
    assert!(ok, "{detail}: {failures:?}");
}

#[test]
fn criterion_8_linear_time() {
    let _g = serial();
    let spec = alphabet("cograph1");
    let aut = TreeAutomaton::arity_valid(&spec);
    let (u, v) = (op(&spec, "union"), leaf(&spec, "v"));
    let mut times = Vec::new();
    let mut sizes = Vec::new();
    for exp in 3..=5u32 {
        let internal = 10usize.pow(exp) / 2;
        let t = left_comb(u, v, internal);
        sizes.push(t.node_count());
        let runs: Vec<Duration> = (0..3)
            .map(|_| {
                let e = TypeEngine::new(spec.clone(), LogicMode::Fo, 1, 0, OracleConfig::default())
                    .unwrap();
                let start = Instant::now();
                let k = kernelize(&t, &e, &aut, &[]).unwrap();
                let d = start.elapsed();
                assert!(k.certificate.holds(), "{:?}", k.certificate);
                d
            })
            .collect();
        times.push(median(runs));
    }
    let ratios: Vec<f64> = times
        .windows(2)
        .map(|w| w[1].as_secs_f64() / w[0].as_secs_f64().max(1e-9))
        .collect();
    let ok = ratios.iter().all(|&r| r <= 20.0);
    let detail = format!(
        "nodes {:?}, median kernelize times {:?}, ratios {:.2?}, limit 20",
        sizes,
        times
            .iter()
            .map(|d| format!("{:.1}ms", d.as_secs_f64() * 1e3))
            .collect::<Vec<_>>(),
        ratios
    );
    line(8, ok, &detail);
    assert!(ok, "{detail}");
}

const ALPHABETS: [&str; 4] = ["cograph1", "cograph2", "trees", "words"];

fn settings() -> [(LogicMode, u32); 5] {
    [
        (LogicMode::Fo, 1),
        (LogicMode::Fo, 2),
        (LogicMode::Fo, 3),
        (LogicMode::Mso, 1),
        (LogicMode::Mso, 2),
    ]
}

/// Random tree with 1..=max_leaves leaves whose structure has at most
/// `max_size` elements.
fn bounded_tree(
    spec: &AlphabetSpec,
    rng: &mut ChaCha8Rng,
    max_leaves: usize,
    max_size: usize,
) -> OpTree {
    loop {
        let leaves = rng.gen_range(1..=max_leaves);
        let t = random_tree(spec, rng, leaves, &[], &[]);
        if evaluate(&t, spec).unwrap().0.len() <= max_size {
            return t;
        }
    }
}

fn ops_used(t: &OpTree, used: &mut HashSet<String>, spec: &AlphabetSpec) {
    let mut stack = vec![t.root().clone()];
    while let Some(n) = stack.pop() {
        if let fvkernel::optrees::NodeKind::Internal(o, c) = n.kind() {
            used.insert(format!("{}:{}", spec.vocab().signature(), spec.op(*o).name));
            stack.extend(c.iter().cloned());
        }
    }
}

#[test]
fn criterion_1_fvc_soundness() {
    let _g = serial();
    let start = Instant::now();
    // the brute-force oracle is the reference, so every corpus structure
    // must fit its MSO cap
    let cap = 10;
    let oracle = OracleConfig {
        fo_cap: cap,
        mso_cap: cap,
        mso_max_rank: 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut corpus = Vec::new();
    for i in 0..500 {
        let spec = alphabet(ALPHABETS[i % 4]);
        let t = bounded_tree(&spec, &mut rng, 10, cap);
        corpus.push((spec, t));
    }
    let mut used = HashSet::new();
    for (spec, t) in &corpus {
        ops_used(t, &mut used, spec);
    }
    let mut checked = 0;
    let mut failures = Vec::new();
    for (mode, m) in settings() {
        let mut engines: HashMap<&str, (TypeEngine, TreeAutomaton)> = HashMap::new();
        for (i, (spec, t)) in corpus.iter().enumerate() {
            let name = ALPHABETS[i % 4];
            let (e, aut) = engines.entry(name).or_insert_with(|| {
                (
                    TypeEngine::new(spec.clone(), mode, m, 0, oracle).unwrap(),
                    TreeAutomaton::arity_valid(spec),
                )
            });
            let ann = annotate(t, e, aut, &HashMap::new()).unwrap();
            let (s, _) = evaluate(t, spec).unwrap();
            checked += 1;
            if *ann.root_type() != type_of(&s, m, mode, &oracle).unwrap() {
                failures.push(format!("{mode} m={m} tree {i}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let ops_total: usize = ALPHABETS.iter().map(|a| alphabet(a).ops().len()).sum();
    let ok =
        failures.is_empty() && elapsed <= Duration::from_secs(15 * 60) && used.len() == ops_total;
    let detail = format!(
        "{checked} root types checked over 500 trees x 5 logic/rank settings, {} mismatches, {}/{} operations used, {:.1}s of 900s",
        failures.len(),
        used.len(),
        ops_total,
        elapsed.as_secs_f64()
    );
    line(1, ok, &detail);
    assert!(ok, "{detail}: {failures:?}");
}

#[test]
fn criterion_2_composition_congruence() {
    let _g = serial();
    let mut runs = 0;
    let mut failed = Vec::new();
    let mut trials = 0;
    for name in ALPHABETS {
        let spec = alphabet(name);
        for o in 0..spec.ops().len() {
            for m in 1..=2 {
                let r = verify_fvc(
                    &spec,
                    o,
                    LogicMode::Mso,
                    m,
                    &OracleConfig::default(),
                    200,
                    0xC2 + m as u64,
                )
                .unwrap();
                runs += 1;
                trials += r.trials;
                if !r.passed() || r.trials < 200 {
                    failed.push(format!("{name}/{} m={m}: {:?}", r.op, r.counterexample));
                }
            }
        }
    }
    let ok = failed.is_empty();
    let detail = format!(
        "{runs} op/rank runs at MSO m<=2, {trials} trials, {} with counterexamples",
        failed.len()
    );
    line(2, ok, &detail);
    assert!(ok, "{detail}: {failed:?}");
}

struct KernelCase {
    spec: Arc<AlphabetSpec>,
    tree: OpTree,
    mode: LogicMode,
    m: u32,
    w: Vec<fvkernel::structures::Elem>,
}

/// Oracle caps for the engines behind the kernel corpus. Minimal models of
/// rank-2 FO types over cograph2 and words need up to 20 elements.
fn engine_oracle() -> OracleConfig {
    OracleConfig {
        fo_cap: 20,
        ..OracleConfig::default()
    }
}

/// Alphabet and logic combinations whose rank-m types all have models
/// within [`engine_oracle`], so large trees can be typed at all.
const LARGE_FEASIBLE: [(&str, LogicMode, u32); 10] = [
    ("cograph1", LogicMode::Fo, 1),
    ("cograph1", LogicMode::Fo, 2),
    ("cograph1", LogicMode::Mso, 1),
    ("cograph1", LogicMode::Mso, 2),
    ("cograph2", LogicMode::Fo, 1),
    ("cograph2", LogicMode::Mso, 1),
    ("trees", LogicMode::Fo, 1),
    ("trees", LogicMode::Mso, 1),
    ("words", LogicMode::Fo, 1),
    ("words", LogicMode::Mso, 1),
];

/// Four out of five instances fit the default oracle cap of their logic;
/// the rest have 15 to 40 leaves.
fn kernel_corpus(count: usize, seed: u64) -> Vec<KernelCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let oracle = OracleConfig::default();
    (0..count)
        .map(|i| {
            let (spec, mode, m, tree) = if i % 5 == 4 {
                let (name, mode, m) = LARGE_FEASIBLE[(i / 5) % LARGE_FEASIBLE.len()];
                let spec = alphabet(name);
                let leaves = rng.gen_range(15..=40);
                let tree = random_tree(&spec, &mut rng, leaves, &[], &[]);
                (spec, mode, m, tree)
            } else {
                let spec = alphabet(ALPHABETS[i % 4]);
                let (mode, m) = settings()[(i / 4) % 5];
                let tree = bounded_tree(&spec, &mut rng, 10, oracle.cap(mode));
                (spec, mode, m, tree)
            };
            let (a, _) = evaluate(&tree, &spec).unwrap();
            let k = (i % 3).min(a.len());
            let mut w = a.universe().to_vec();
            for j in 0..k {
                let r = rng.gen_range(j..w.len());
                w.swap(j, r);
            }
            w.truncate(k);
            KernelCase {
                spec,
                tree,
                mode,
                m,
                w,
            }
        })
        .collect()
}

fn max_ranked_arity(spec: &AlphabetSpec) -> usize {
    spec.ops()
        .iter()
        .filter(|o| o.ranked)
        .map(|o| o.rho)
        .max()
        .unwrap_or(0)
}

#[test]
fn criterion_3_kernel_certificates() {
    let _g = serial();
    let oracle = OracleConfig::default();
    let engine_caps = engine_oracle();
    let corpus = kernel_corpus(200, 0xC3);
    let mut failures = Vec::new();
    let mut oracle_checked = 0;
    let mut shrunk = 0;
    for (i, c) in corpus.iter().enumerate() {
        let e =
            TypeEngine::new(c.spec.clone(), c.mode, c.m, c.w.len() as u32, engine_caps).unwrap();
        let aut = TreeAutomaton::arity_valid(&c.spec);
        let k = kernelize(&c.tree, &e, &aut, &c.w).unwrap_or_else(|err| {
            panic!(
                "instance {i} ({:?} {}, W {:?}) {}: {err}",
                c.mode,
                c.m,
                c.w,
                fvkernel::optrees::write_tree(&c.tree, &c.spec)
            )
        });
        let (a, _) = evaluate(&c.tree, &c.spec).unwrap();
        let (b, _) = evaluate(&k.tree, &c.spec).unwrap();
        let marks = mark_map(&e, &c.w);
        let mut bad = Vec::new();
        // (i) accepted by the automaton
        if !aut.accepts(&k.tree) {
            bad.push("i");
        }
        // (ii) induced substructure on its own universe
        if a.induced_substructure(&b.element_set()).unwrap() != b {
            bad.push("ii");
        }
        // (iii) contains W
        if !c.w.iter().all(|x| b.contains(*x)) {
            bad.push("iii");
        }
        // (iv) within the witness bound from the realized pair counts
        let bound = witness_bound(
            c.w.len(),
            k.report.distinct_pairs,
            k.report.distinct_prefix_pairs,
            max_ranked_arity(&c.spec),
            c.spec.max_leaf_size(),
        );
        if b.len() as u128 > bound {
            bad.push("iv");
        }
        // (v) root type of the marked structure, compositionally and by oracle
        let before = annotate(&c.tree, &e, &aut, &marks).unwrap();
        let after = annotate(&k.tree, &e, &aut, &marks).unwrap();
        if before.root_type() != after.root_type() {
            bad.push("v");
        }
        if a.len() <= oracle.cap(c.mode) {
            oracle_checked += 1;
            let (ma, _) = evaluate_marked(&c.tree, &c.spec, e.marks(), &marks).unwrap();
            let (mb, _) = evaluate_marked(&k.tree, &c.spec, e.marks(), &marks).unwrap();
            if type_of(&ma, c.m, c.mode, &oracle).unwrap()
                != type_of(&mb, c.m, c.mode, &oracle).unwrap()
            {
                bad.push("oracle");
            }
        }
        if !k.certificate.holds() {
            bad.push("certificate");
        }
        shrunk += (b.len() < a.len()) as usize;
        if !bad.is_empty() {
            failures.push(format!("instance {i}: {bad:?}"));
        }
    }
    let ok = failures.is_empty() && oracle_checked >= 150;
    let detail = format!(
        "200 instances with k in {{0,1,2}}, {} failing a condition, {oracle_checked} oracle-verified (need 150), {shrunk} strictly smaller",
        failures.len()
    );
    line(3, ok, &detail);
    assert!(ok, "{detail}: {failures:?}");
}

#[test]
fn criterion_4_kernel_preserves_sentences() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let (mut evals, mut truths, mut shrunk, mut failures) = (0usize, 0usize, 0usize, Vec::new());
    for name in ALPHABETS {
        let spec = alphabet(name);
        let aut = TreeAutomaton::arity_valid(&spec);
        // small trees fit every oracle; large ones only serve FO at ranks
        // whose types have models within the engine caps
        let mut trees: Vec<(OpTree, bool)> = (0..12)
            .map(|_| (bounded_tree(&spec, &mut rng, 10, 8), false))
            .collect();
        for _ in 0..4 {
            let leaves = rng.gen_range(15..=40);
            trees.push((random_tree(&spec, &mut rng, leaves, &[], &[]), true));
        }
        let structures: Vec<Structure> = trees
            .iter()
            .map(|(t, _)| evaluate(t, &spec).unwrap().0)
            .collect();
        let mut sentences: Vec<Formula> = (0..40)
            .map(|i| random_sentence(spec.vocab(), &mut rng, 1 + i % 3, false))
            .collect();
        sentences.extend((0..15).map(|i| random_sentence(spec.vocab(), &mut rng, 1 + i % 2, true)));
        let mut engines: HashMap<(bool, u32), TypeEngine> = HashMap::new();
        let mut kernels: HashMap<(usize, bool, u32), Structure> = HashMap::new();
        for phi in &sentences {
            let mso = phi.uses_sets();
            let m = phi.quantifier_rank().max(1);
            let mode = if mso { LogicMode::Mso } else { LogicMode::Fo };
            for (j, (t, large)) in trees.iter().enumerate() {
                if *large && (mso || !LARGE_FEASIBLE.contains(&(name, mode, m))) {
                    continue;
                }
                let e = engines.entry((mso, m)).or_insert_with(|| {
                    TypeEngine::new(spec.clone(), mode, m, 0, engine_oracle()).unwrap()
                });
                let kernel = kernels.entry((j, mso, m)).or_insert_with(|| {
                    let k = kernelize(t, e, &aut, &[]).unwrap();
                    evaluate(&k.tree, &spec).unwrap().0
                });
                shrunk += (kernel.len() < structures[j].len()) as usize;
                let full = eval_sentence(phi, &structures[j]).unwrap();
                evals += 1;
                truths += full as usize;
                if full != eval_sentence(phi, kernel).unwrap() {
                    failures.push(format!("{name} tree {j}: {phi}"));
                }
            }
        }
    }
    let ok = failures.is_empty();
    let detail = format!(
        "40 FO (rank<=3) + 15 MSO (rank<=2) sentences per alphabet, {evals} evaluations ({truths} true, {shrunk} on a strictly smaller kernel), {} disagreements",
        failures.len()
    );
    line(4, ok, &detail);
    assert!(ok, "{detail}: {failures:?}");
}

const SCALE_ROOT: [(&str, &str); 4] = [
    ("cograph1", "union"),
    ("cograph2", "union"),
    ("trees", "a"),
    ("words", "cat"),
];

/// An unranked root over a random subtree and 2^m + 2 copies of the first
/// leaf, so equal fold prefixes are guaranteed.
fn scale_tree(spec: &AlphabetSpec, root: &str, sub: &OpTree, m: u32) -> OpTree {
    let copy = format!(" (leaf {})", spec.leaf(0).name);
    let text = format!(
        "({root} {}{})",
        write_tree(sub, spec),
        copy.repeat((1 << m) + 2)
    );
    parse_tree(&text, spec).unwrap()
}

#[test]
fn criterion_6_scale_generation() {
    let _g = serial();
    let check = OracleConfig {
        fo_cap: 64,
        ..OracleConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let (mut ups, mut downs, mut oracle_checked, mut failures) = (0, 0, 0, Vec::new());
    let mut i = 0;
    while ups + downs < 50 {
        i += 1;
        let (name, root) = SCALE_ROOT[i % 4];
        let spec = alphabet(name);
        let grow = ups < 35 && (downs >= 15 || i % 10 < 7);
        // shrinking starts from large inputs, which only FO rank 1 types everywhere
        let (mode, m) = match (grow, name, i % 4) {
            (false, "cograph1", 1 | 3) => (LogicMode::Fo, 2),
            (false, ..) => (LogicMode::Fo, 1),
            (true, "cograph1", 1) => (LogicMode::Fo, 2),
            (true, "cograph1", 3) => (LogicMode::Mso, 2),
            (true, _, 0 | 2) => (LogicMode::Fo, 1),
            (true, ..) => (LogicMode::Mso, 1),
        };
        let leaves = if grow {
            rng.gen_range(1..=4)
        } else {
            rng.gen_range(15..=30)
        };
        let t = scale_tree(
            &spec,
            root,
            &random_tree(&spec, &mut rng, leaves, &[], &[]),
            m,
        );
        let e = TypeEngine::new(spec.clone(), mode, m, 0, engine_oracle()).unwrap();
        let aut = TreeAutomaton::arity_valid(&spec);
        let (a, _) = evaluate(&t, &spec).unwrap();
        let maxleaf = spec.max_leaf_size();
        let extra = rng.gen_range(0..=2);
        let lo = if grow {
            a.len() + rng.gen_range(1..=20)
        } else {
            let floor = evaluate(&kernelize(&t, &e, &aut, &[]).unwrap().tree, &spec)
                .unwrap()
                .0
                .len()
                + 2 * maxleaf;
            if floor >= a.len() {
                continue;
            }
            rng.gen_range(floor..a.len())
        };
        let hi = lo + maxleaf + extra;
        let direction = if grow {
            ScaleDirection::Up
        } else {
            ScaleDirection::Down
        };
        let req = ScaleRequest { lo, hi, direction };
        let tag = format!("{name} {mode} m={m} |A|={} [{lo},{hi}]", a.len());
        if grow {
            ups += 1;
        } else {
            downs += 1;
        }
        let out = match scale_generate(&t, &e, &aut, req) {
            Ok((out, _)) => out,
            Err(err) => {
                failures.push(format!("{tag}: {err}"));
                continue;
            }
        };
        let (b, _) = evaluate(&out, &spec).unwrap();
        let mut bad = Vec::new();
        if !(lo..=hi).contains(&b.len()) {
            bad.push(format!("size {}", b.len()));
        }
        if !aut.accepts(&out) {
            bad.push("rejected".into());
        }
        let before = annotate(&t, &e, &aut, &HashMap::new()).unwrap();
        let after = annotate(&out, &e, &aut, &HashMap::new()).unwrap();
        if before.root_type() != after.root_type() {
            bad.push("delta1".into());
        }
        let (small, large) = if grow { (&a, &b) } else { (&b, &a) };
        let embedded = small.universe().iter().all(|x| large.contains(*x))
            && large.induced_substructure(&small.element_set()).unwrap() == *small;
        if !embedded {
            bad.push("embedding".into());
        }
        if a.len() <= check.cap(mode) && b.len() <= check.cap(mode) {
            oracle_checked += 1;
            if type_of(&a, m, mode, &check).unwrap() != type_of(&b, m, mode, &check).unwrap() {
                bad.push("oracle".into());
            }
        }
        if !bad.is_empty() {
            failures.push(format!("{tag}: {bad:?}"));
        }
    }
    let ok = failures.is_empty();
    let detail = format!(
        "{ups} grown + {downs} shrunk instances with hi >= lo + max leaf size, {oracle_checked} oracle-verified, {} failures",
        failures.len()
    );
    line(6, ok, &detail);
    assert!(ok, "{detail}: {failures:?}");
}

#[test]
fn criterion_5_reduction_postconditions() {
    let _g = serial();
    let oracle = engine_oracle();
    let mut corpus = kernel_corpus(200, 0xC3);
    corpus.extend(kernel_corpus(100, 0xC5));
    let (mut runs, mut violations) = (0, Vec::new());
    for (i, c) in corpus.iter().enumerate() {
        let aut = TreeAutomaton::arity_valid(&c.spec);
        let plain = TypeEngine::new(c.spec.clone(), c.mode, c.m, 0, oracle).unwrap();
        let none = HashSet::new();
        let (h, _) = height_reduce(&c.tree, &plain, &aut, &none).unwrap();
        let ann = annotate(&h, &plain, &aut, &HashMap::new()).unwrap();
        if let Some(v) = check_height_fixpoint(&ann, &none) {
            violations.push(format!("height_reduce {i}: {v:?}"));
        }
        let (d, _) = degree_reduce(&c.tree, &plain, &aut, &none).unwrap();
        let ann = annotate(&d, &plain, &aut, &HashMap::new()).unwrap();
        if let Some(v) = check_degree_fixpoint(&ann, &c.spec, &none) {
            violations.push(format!("degree_reduce {i}: {v:?}"));
        }
        let e = TypeEngine::new(c.spec.clone(), c.mode, c.m, c.w.len() as u32, oracle).unwrap();
        let k = kernelize(&c.tree, &e, &aut, &c.w).unwrap();
        let protected: HashSet<u64> = k.protected.iter().copied().collect();
        let ann = annotate(&k.tree, &e, &aut, &mark_map(&e, &c.w)).unwrap();
        if let Some(v) = check_height_fixpoint(&ann, &protected) {
            violations.push(format!("kernel height {i}: {v:?}"));
        }
        if let Some(v) = check_degree_fixpoint(&ann, &c.spec, &protected) {
            violations.push(format!("kernel degree {i}: {v:?}"));
        }
        runs += 3;
    }
    let ok = violations.is_empty();
    let detail = format!(
        "{runs} reduction runs (height, degree, kernel), {} postcondition violations",
        violations.len()
    );
    line(5, ok, &detail);
    assert!(ok, "{detail}: {violations:?}");
}
