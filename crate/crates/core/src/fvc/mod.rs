//! Compositional type computation: per-operation composition tables that
//! map input types to output types, filled on demand from small
//! representative structures.

mod annotate;
mod persist;
mod verify;

pub use annotate::{annotate, Annotation, PrefixState};
pub use persist::{load_tables, save_tables, table_file_name};
pub use verify::{build_pool, verify_congruence, verify_fvc, Counterexample, FvcReport, PoolItem};

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use crate::eftypes::{type_of, OracleConfig, TypeFingerprint};
use crate::error::{Error, Result};
use crate::logic::LogicMode;
use crate::optrees::{combine, AlphabetSpec, CombineStep};
use crate::structures::{write_structure, LabelSet, Structure, Vocabulary, MAX_LABELS};

/// Lookup key of one composition: the fold step, marks on a fresh tree
/// vertex, and the input types in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComposeKey {
    pub step: CombineStep,
    pub root_marks: LabelSet,
    pub inputs: Vec<TypeFingerprint>,
}

/// Snapshot of the table for one operation.
#[derive(Debug, Clone)]
pub struct CompositionTable {
    pub mode: LogicMode,
    pub rank: u32,
    pub op: String,
    pub entries: BTreeMap<ComposeKey, TypeFingerprint>,
    pub representatives: BTreeMap<TypeFingerprint, Structure>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub hits: u64,
    pub misses: u64,
    pub oracle_calls: u64,
    /// Misses resolved from the actual structure because the combined
    /// representatives exceeded the oracle cap.
    pub witness_fallbacks: u64,
}

struct Rep {
    size: usize,
    text: String,
    s: Structure,
}

#[derive(Default)]
struct EngineState {
    interned: HashMap<[u8; 32], TypeFingerprint>,
    reps: HashMap<TypeFingerprint, Rep>,
    tables: Vec<HashMap<ComposeKey, TypeFingerprint>>,
    leaf_cache: HashMap<(usize, Vec<LabelSet>), TypeFingerprint>,
    stats: EngineStats,
}

/// Shared type computation context for one alphabet, logic, rank and
/// number of mark labels. Safe to share between threads.
pub struct TypeEngine {
    spec: Arc<AlphabetSpec>,
    mode: LogicMode,
    rank: u32,
    marks: u32,
    oracle: OracleConfig,
    vocab: Arc<Vocabulary>,
    state: Mutex<EngineState>,
}

impl std::fmt::Debug for TypeEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TypeEngine")
            .field("mode", &self.mode)
            .field("rank", &self.rank)
            .field("marks", &self.marks)
            .finish_non_exhaustive()
    }
}

impl TypeEngine {
    pub fn new(
        spec: Arc<AlphabetSpec>,
        mode: LogicMode,
        rank: u32,
        marks: u32,
        oracle: OracleConfig,
    ) -> Result<TypeEngine> {
        if mode == LogicMode::Mso && rank > oracle.mso_max_rank {
            return Err(Error::budget(format!(
                "MSO rank {rank} exceeds the supported maximum {}",
                oracle.mso_max_rank
            )));
        }
        let labels = spec.vocab().label_count() + marks;
        // one more label is reserved for open tree fold states
        if labels + 1 > MAX_LABELS {
            return Err(Error::domain(format!(
                "{labels} labels plus marks exceed {MAX_LABELS}"
            )));
        }
        let vocab = Arc::new(spec.vocab().with_label_count(labels)?);
        let state = EngineState {
            tables: vec![HashMap::new(); spec.ops().len()],
            ..EngineState::default()
        };
        Ok(TypeEngine {
            spec,
            mode,
            rank,
            marks,
            oracle,
            vocab,
            state: Mutex::new(state),
        })
    }

    pub fn spec(&self) -> &Arc<AlphabetSpec> {
        &self.spec
    }

    pub fn mode(&self) -> LogicMode {
        self.mode
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// Number of mark labels beyond the alphabet's own labels.
    pub fn marks(&self) -> u32 {
        self.marks
    }

    pub fn oracle(&self) -> &OracleConfig {
        &self.oracle
    }

    /// Alphabet vocabulary widened by the mark labels.
    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn cap(&self) -> usize {
        self.oracle.cap(self.mode)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, EngineState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn stats(&self) -> EngineStats {
        self.lock().stats
    }

    /// Oracle type of `s`, which also becomes a representative candidate.
    /// The first structure seen of a type is shrunk greedily to an
    /// equivalent induced substructure before it is kept.
    pub fn type_of_structure(&self, s: &Structure) -> Result<TypeFingerprint> {
        let t = type_of(s, self.rank, self.mode, &self.oracle)?;
        let fresh = {
            let mut st = self.lock();
            st.stats.oracle_calls += 1;
            !st.interned.contains_key(t.digest())
        };
        let small = if fresh {
            self.shrink(&t, s)?
        } else {
            s.clone()
        };
        let mut st = self.lock();
        let t = intern(&mut st, t)?;
        offer(&mut st, &t, &small);
        Ok(t)
    }

    fn shrink(&self, t: &TypeFingerprint, s: &Structure) -> Result<Structure> {
        let mut cur = s.clone();
        for e in s.universe() {
            let mut keep = cur.element_set();
            keep.0.remove(e);
            let smaller = cur.induced_substructure(&keep)?;
            let same = type_of(&smaller, self.rank, self.mode, &self.oracle)? == *t;
            self.lock().stats.oracle_calls += 1;
            if same {
                cur = smaller;
            }
        }
        Ok(cur)
    }

    /// Record `s` as a structure of type `t`; the smallest candidate is kept.
    pub fn offer_representative(&self, t: &TypeFingerprint, s: &Structure) {
        offer(&mut self.lock(), t, s);
    }

    pub fn representative(&self, t: &TypeFingerprint) -> Option<Structure> {
        self.lock().reps.get(t).map(|r| r.s.clone())
    }

    /// Type of leaf symbol `leaf` with `local_marks[i]` added to its i-th element.
    pub fn leaf_type(&self, leaf: usize, local_marks: &[LabelSet]) -> Result<TypeFingerprint> {
        let key = (leaf, local_marks.to_vec());
        if let Some(t) = self.lock().leaf_cache.get(&key) {
            return Ok(t.clone());
        }
        let base = &self.spec.leaf(leaf).structure;
        let extra: Vec<_> = base
            .universe()
            .iter()
            .zip(local_marks)
            .map(|(e, l)| (*e, *l))
            .collect();
        let s = base.lift(self.vocab.clone())?.with_extra_labels(&extra)?;
        let t = self.type_of_structure(&s)?;
        self.lock().leaf_cache.insert(key, t.clone());
        Ok(t)
    }

    pub fn compose(
        &self,
        op: usize,
        step: CombineStep,
        root_marks: LabelSet,
        inputs: &[TypeFingerprint],
    ) -> Result<TypeFingerprint> {
        self.compose_with(op, step, root_marks, inputs, &|| Ok(None))
    }

    /// As `compose`; on a miss whose combined representatives exceed the
    /// oracle cap, `witness` may supply a concrete structure of the result.
    pub fn compose_with(
        &self,
        op: usize,
        step: CombineStep,
        root_marks: LabelSet,
        inputs: &[TypeFingerprint],
        witness: &dyn Fn() -> Result<Option<Structure>>,
    ) -> Result<TypeFingerprint> {
        let key = ComposeKey {
            step,
            root_marks,
            inputs: inputs.to_vec(),
        };
        let reps: Vec<Structure> = {
            let mut st = self.lock();
            if let Some(t) = st.tables[op].get(&key) {
                let t = t.clone();
                st.stats.hits += 1;
                return Ok(t);
            }
            st.stats.misses += 1;
            inputs
                .iter()
                .map(|t| {
                    st.reps.get(t).map(|r| r.s.clone()).ok_or_else(|| {
                        Error::Table(format!("no representative for input type {}", t.short()))
                    })
                })
                .collect::<Result<_>>()?
        };
        let refs: Vec<&Structure> = reps.iter().collect();
        let combined = combine(&self.spec, op, step, &refs, &self.vocab, root_marks)?;
        let t = if combined.len() <= self.cap() {
            self.type_of_structure(&combined)?
        } else {
            match witness()? {
                Some(w) if w.len() <= self.cap() => {
                    self.lock().stats.witness_fallbacks += 1;
                    self.type_of_structure(&w)?
                }
                _ => {
                    return Err(Error::budget(format!(
                        "{} {step:?} at {} rank {}: result has {} elements, oracle cap is {}",
                        self.spec.op(op).name,
                        self.mode,
                        self.rank,
                        combined.len(),
                        self.cap()
                    )))
                }
            }
        };
        let mut st = self.lock();
        // first writer wins; a concurrent miss computed the same type
        let t = st.tables[op].entry(key).or_insert(t).clone();
        Ok(t)
    }

    /// Insert a known entry (used when loading persisted tables).
    pub(crate) fn insert_entry(
        &self,
        op: usize,
        key: ComposeKey,
        out: TypeFingerprint,
        rep: Option<&Structure>,
    ) -> Result<()> {
        let mut st = self.lock();
        for t in key.inputs.iter() {
            intern(&mut st, t.clone())?;
        }
        let out = intern(&mut st, out)?;
        if let Some(s) = rep {
            offer(&mut st, &out, s);
        }
        match st.tables[op].get(&key) {
            Some(old) if *old != out => Err(Error::Table(format!(
                "conflicting entries for {} {:?}",
                self.spec.op(op).name,
                key.step
            ))),
            _ => {
                st.tables[op].insert(key, out);
                Ok(())
            }
        }
    }

    pub fn entry_count(&self) -> usize {
        self.lock().tables.iter().map(|t| t.len()).sum()
    }

    /// Sorted snapshot of the table for `op`.
    pub fn table(&self, op: usize) -> CompositionTable {
        let st = self.lock();
        let entries: BTreeMap<_, _> = st.tables[op]
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let mut representatives = BTreeMap::new();
        for (k, v) in &entries {
            for t in k.inputs.iter().chain(std::iter::once(v)) {
                if let Some(r) = st.reps.get(t) {
                    representatives.insert(t.clone(), r.s.clone());
                }
            }
        }
        CompositionTable {
            mode: self.mode,
            rank: self.rank,
            op: self.spec.op(op).name.clone(),
            entries,
            representatives,
        }
    }
}

fn intern(st: &mut EngineState, t: TypeFingerprint) -> Result<TypeFingerprint> {
    match st.interned.get(t.digest()) {
        Some(old) if old.canonical() != t.canonical() => Err(Error::Collision(t.digest_hex())),
        Some(old) => Ok(old.clone()),
        None => {
            st.interned.insert(*t.digest(), t.clone());
            Ok(t)
        }
    }
}

fn offer(st: &mut EngineState, t: &TypeFingerprint, s: &Structure) {
    let size = s.len();
    if let Some(r) = st.reps.get(t) {
        if r.size < size {
            return;
        }
    }
    let s = s.renumbered();
    let text = write_structure(&s);
    let better = match st.reps.get(t) {
        None => true,
        Some(r) => (size, &text) < (r.size, &r.text),
    };
    if better {
        st.reps.insert(t.clone(), Rep { size, text, s });
    }
}
