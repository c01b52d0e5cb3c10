//! Sparse crossing and batch training.
//!
//! The master model is crossed with each batch's positive duples while the
//! traces of every constant stay fixed; the union model accumulates masters
//! and is trimmed by each batch's positive duples.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::core::{Atom, Axioms, Duple, Model, ModelJson, Term, Universe};
use crate::dual::{build_dual, fraction_pinning, reduce_dual, Dual};
use crate::error::{invalid, Error, Result};
use crate::evalstat::{load_and_transition, model_stats};
use crate::trace::{constant_traces, term_trace_from_constants, trace_of_atom, AtomTraces};

/// How many examples each batch draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BatchSchedule {
    /// Every example in every batch.
    Full,
    Fixed(usize),
    /// `start` examples at batch 0 growing linearly to `end_fraction` of the
    /// set at batch `ramp`, constant afterwards.
    Linear { start: usize, end_fraction: f64, ramp: usize },
}

impl Default for BatchSchedule {
    fn default() -> Self {
        BatchSchedule::Linear { start: 500, end_fraction: 2.0 / 3.0, ramp: 500 }
    }
}

impl BatchSchedule {
    pub fn size(&self, batch: usize, total: usize) -> usize {
        match *self {
            BatchSchedule::Full => total,
            BatchSchedule::Fixed(n) => n,
            BatchSchedule::Linear { start, end_fraction, ramp } => {
                let end = (end_fraction * total as f64).round();
                let s = start as f64;
                let t = if ramp == 0 { 1.0 } else { (batch as f64 / ramp as f64).min(1.0) };
                (s + (end - s) * t).round().max(1.0) as usize
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Simplification triggers when the master grows past `gamma` times its
    /// size at batch start.
    pub gamma: f64,
    /// Minimum share of duple-origin atoms in the reduced dual.
    pub kappa: f64,
    /// Fraction of the model kept by subset selection.
    pub delta: f64,
    pub schedule: BatchSchedule,
    pub max_batches: usize,
    pub stop_on_zero_training_error: bool,
    /// Training error is measured every this many batches (0: never).
    pub error_every: usize,
    /// Reduce indicator entries to one per negative duple before κ fractioning.
    pub reduce_dual: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 1.5,
            kappa: 0.1,
            delta: 0.1,
            schedule: BatchSchedule::default(),
            max_batches: 200,
            stop_on_zero_training_error: true,
            error_every: 1,
            reduce_dual: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma.is_nan() || self.gamma <= 1.0 {
            return invalid("gamma must exceed 1");
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return invalid("kappa must lie in [0, 1]");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return invalid("delta must lie in (0, 1]");
        }
        Ok(())
    }

    /// Settings for formal problems: the whole axiom set in every batch.
    pub fn formal() -> TrainConfig {
        TrainConfig { gamma: 1.1, kappa: 0.5, schedule: BatchSchedule::Full, ..TrainConfig::default() }
    }
}

/// Axioms present in every batch plus examples that batches sample from.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub background: Axioms,
    pub examples: Vec<Axioms>,
}

impl TrainingSet {
    pub fn fixed(axioms: Axioms) -> TrainingSet {
        TrainingSet { background: axioms, examples: Vec::new() }
    }

    pub fn all(&self) -> Axioms {
        let mut a = self.background.clone();
        for e in &self.examples {
            a.extend(e);
        }
        a
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub master: Model,
    pub union: Model,
    /// Positive-duple crossings performed so far.
    pub global_step: u64,
    pub batch_index: usize,
}

/// One row of the progress log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub batch: usize,
    pub master_size: usize,
    pub union_size: usize,
    pub training_error: Option<f64>,
    pub load: f64,
    pub lambda: usize,
    pub dual_size: usize,
    pub simplifications: usize,
}

/// Result of trace-constraint enforcement.
#[derive(Debug, Clone)]
pub struct Enforced {
    /// Singleton atoms to add to the model.
    pub lambda: Vec<Atom>,
    /// Traces of the model's atoms followed by those of `lambda`.
    pub atom_traces: Vec<BitSet>,
    pub constant_traces: Vec<BitSet>,
}

/// Finds singleton atoms whose addition makes the traces of `model` agree
/// with every duple of `batch`: `Tr(r_R) ⊆ Tr(r_L)` for positives and
/// `Tr(r_R) ⊄ Tr(r_L)` for negatives.
pub fn enforce_trace_constraints<R: Rng>(model: &Model, batch: &Axioms, dual: &Dual, step: u64, rng: &mut R) -> Enforced {
    let mut atom_traces = AtomTraces::compute(model.atoms(), dual).into_vec();
    let mut ctr = constant_traces(model.atoms(), &atom_traces, model.width(), dual.len());
    let mut terms: HashMap<&Term, BitSet> = HashMap::new();
    for d in batch.iter() {
        for t in [&d.left, &d.right] {
            terms.entry(t).or_insert_with(|| term_trace_from_constants(t, &ctr));
        }
    }
    let mut lambda: Vec<Atom> = Vec::new();
    let mut have: std::collections::HashSet<usize> = std::collections::HashSet::new();

    let mut add = |c: usize, terms: &mut HashMap<&Term, BitSet>, ctr: &mut Vec<BitSet>, lambda: &mut Vec<Atom>| {
        let seg = dual.constant_segment(c);
        ctr[c].intersect_with(seg);
        for (t, tr) in terms.iter_mut() {
            if t.contains(c) {
                tr.intersect_with(seg);
            }
        }
        if have.insert(c) {
            lambda.push(Atom::with_stats(BitSet::from_indices(model.width(), [c]), 0, step));
        }
    };

    loop {
        let before = lambda.len();
        for r in &batch.negatives {
            let (tl, tr) = (&terms[&r.left], &terms[&r.right]);
            if !tr.is_subset(tl) {
                continue;
            }
            let mut dc: Vec<usize> = r.left.constants().difference(r.right.constants()).to_vec();
            dc.shuffle(rng);
            let tr = tr.clone();
            let tl = tl.clone();
            for c in dc {
                if !tr.is_subset(&tl.intersection(dual.constant_segment(c))) {
                    add(c, &mut terms, &mut ctr, &mut lambda);
                    break;
                }
            }
        }
        for r in &batch.positives {
            let (tl, tr) = (&terms[&r.left], &terms[&r.right]);
            if tr.is_subset(tl) {
                continue;
            }
            let mut di = tr.difference(tl);
            let mut dc: Vec<usize> = r.right.constants().difference(r.left.constants()).to_vec();
            dc.shuffle(rng);
            let mut shared: Vec<usize> = r.right.constants().intersection(r.left.constants()).to_vec();
            shared.shuffle(rng);
            for c in dc.into_iter().chain(shared) {
                if di.is_empty() {
                    break;
                }
                let x = di.intersection(dual.constant_segment(c));
                if x != di {
                    di = x;
                    add(c, &mut terms, &mut ctr, &mut lambda);
                }
            }
        }
        if lambda.len() == before {
            break;
        }
    }
    let lambda: Vec<Atom> = lambda.into_iter().filter(|a| !model.contains(a.upper())).collect();
    atom_traces.extend(lambda.iter().map(|a| trace_of_atom(a, dual)));
    Enforced { lambda, atom_traces, constant_traces: ctr }
}

/// Model atoms with aligned traces.
#[derive(Debug, Clone)]
pub struct TracedModel {
    pub model: Model,
    pub traces: Vec<BitSet>,
}

impl TracedModel {
    pub fn new(model: Model, dual: &Dual) -> TracedModel {
        let traces = AtomTraces::compute(model.atoms(), dual).into_vec();
        TracedModel { model, traces }
    }

    fn insert(&mut self, atom: Atom, trace: BitSet) {
        if self.model.insert(atom) {
            self.traces.push(trace);
        }
    }

    fn remove(&mut self, idx: &[usize]) {
        let mut drop = vec![false; self.traces.len()];
        for &i in idx {
            drop[i] = true;
        }
        let mut k = 0;
        self.traces.retain(|_| {
            k += 1;
            !drop[k - 1]
        });
        self.model.remove_indices(idx);
    }

    pub fn constant_traces(&self, dual_len: usize) -> Vec<BitSet> {
        constant_traces(self.model.atoms(), &self.traces, self.model.width(), dual_len)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SparseStats {
    pub simplifications: usize,
    pub crossed: usize,
}

/// Crosses each positive duple into `tm`, keeping every constant's trace.
///
/// Each discriminant atom φ is replaced by unions `φ ▽ ψ` with ψ below the
/// right term, chosen so that the traces of the new atoms still intersect
/// to `Tr(φ)`. `step` counts crossings and stamps new atoms.
pub fn sparse_cross_batch<R: Rng>(
    tm: &mut TracedModel,
    positives: &[Duple],
    dual: &Dual,
    gamma: f64,
    step: &mut u64,
    rng: &mut R,
) -> SparseStats {
    let mut stats = SparseStats::default();
    let all = dual.all();
    let mut threshold = gamma * tm.model.len() as f64;
    for r in positives {
        *step += 1;
        let dis = tm.model.discriminant(&r.left, &r.right);
        if dis.is_empty() {
            continue;
        }
        stats.crossed += 1;
        let removed: Vec<(Atom, BitSet)> =
            dis.iter().map(|&i| (tm.model.atoms()[i].clone(), tm.traces[i].clone())).collect();
        tm.remove(&dis);
        let rseg = tm.model.segment(&r.right);
        let mut td: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut fresh: Vec<(Atom, BitSet)> = Vec::new();
        for (phi, trphi) in &removed {
            let mut dt = all.difference(trphi);
            while !dt.is_empty() {
                let i = dt.nth_one(rng.gen_range(0..dt.count())).expect("non-empty");
                let cands = td
                    .entry(i)
                    .or_insert_with(|| rseg.iter().copied().filter(|&j| !tm.traces[j].contains(i)).collect());
                let Some(&j) = cands.choose(rng) else {
                    debug_assert!(false, "trace constraint violated for dual atom {i}");
                    dt.remove(i);
                    continue;
                };
                dt.intersect_with(&tm.traces[j]);
                fresh.push((phi.union(&tm.model.atoms()[j], *step), trphi.union(&tm.traces[j])));
            }
        }
        for (a, t) in fresh {
            tm.insert(a, t);
        }
        if tm.model.len() as f64 > threshold {
            simplify_preserving_constant_traces(tm, dual, rng);
            stats.simplifications += 1;
            threshold = gamma * tm.model.len() as f64;
        }
    }
    stats
}

/// Keeps a subset of atoms that leaves every constant's trace unchanged.
///
/// For each constant `c`, dual atoms missing from `Tr(c)` are covered by
/// atoms above `c` whose traces also miss them, reusing already kept atoms
/// when possible. A constant that had atoms above it keeps at least one.
pub fn simplify_preserving_constant_traces<R: Rng>(tm: &mut TracedModel, dual: &Dual, rng: &mut R) {
    let width = tm.model.width();
    let atoms = tm.model.atoms();
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); width];
    for (i, a) in atoms.iter().enumerate() {
        for c in a.upper().iter() {
            lists[c].push(i);
        }
    }
    let ctr = tm.constant_traces(dual.len());
    let all = dual.all();
    let mut keep = BitSet::new(atoms.len());
    for c in 0..width {
        if lists[c].is_empty() {
            continue;
        }
        let mut dt = all.difference(&ctr[c]);
        while !dt.is_empty() {
            let i = dt.nth_one(rng.gen_range(0..dt.count())).expect("non-empty");
            let cands: Vec<usize> = lists[c].iter().copied().filter(|&j| !tm.traces[j].contains(i)).collect();
            let kept: Vec<usize> = cands.iter().copied().filter(|&j| keep.contains(j)).collect();
            let pick = match kept.choose(rng) {
                Some(&j) => j,
                None => {
                    let j = *cands.choose(rng).expect("Tr(c) is the intersection over atoms above c");
                    keep.insert(j);
                    j
                }
            };
            dt.intersect_with(&tm.traces[pick]);
        }
    }
    for list in &lists {
        if !list.is_empty() && !list.iter().any(|&j| keep.contains(j)) {
            keep.insert(*list.choose(rng).expect("non-empty"));
        }
    }
    let drop: Vec<usize> = (0..atoms.len()).filter(|&i| !keep.contains(i)).collect();
    tm.remove(&drop);
}

/// Upper bound on the master size after simplification.
pub fn master_size_bound(dual: &Dual, negatives: &[Duple]) -> usize {
    let pin: usize = dual
        .entries()
        .iter()
        .filter_map(|e| match e {
            crate::dual::DualEntry::Pinning(up) => Some(up.count()),
            _ => None,
        })
        .sum();
    pin + negatives.iter().map(|r| dual.width() - r.right.len()).sum::<usize>()
}

/// Fraction of duples the model gets wrong.
pub fn training_error(model: &Model, axioms: &Axioms) -> f64 {
    if axioms.is_empty() {
        return 0.0;
    }
    let mut segs: HashMap<&Term, Vec<usize>> = HashMap::new();
    let atoms = model.atoms();
    let wrong = axioms
        .iter()
        .filter(|d| {
            let seg = segs.entry(&d.left).or_insert_with(|| model.segment(&d.left));
            let holds = seg.iter().all(|&i| atoms[i].below(&d.right));
            holds != d.is_positive()
        })
        .count();
    wrong as f64 / axioms.len() as f64
}

/// Runs batches one at a time; see [`train`] for the whole loop.
pub struct Trainer {
    pub config: TrainConfig,
    pub state: TrainState,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(universe: Arc<Universe>, config: TrainConfig, initial: Option<Model>) -> Result<Trainer> {
        config.validate()?;
        let master = match initial {
            Some(m) => {
                if m.universe() != &universe && **m.universe() != *universe {
                    return invalid("initial model uses a different universe");
                }
                m
            }
            None => Model::freest_empty(universe)?,
        };
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let state = TrainState { union: master.clone(), master, global_step: 0, batch_index: 0 };
        Ok(Trainer { config, state, rng })
    }

    /// Restores a trainer from a checkpoint. The RNG is re-seeded from the
    /// seed and the batch index, so a resumed run differs from an
    /// uninterrupted one.
    pub fn resume(cp: Checkpoint) -> Result<Trainer> {
        let master = cp.master.into_model()?;
        let union = cp.union.into_model()?;
        let rng = ChaCha8Rng::seed_from_u64(cp.config.seed ^ (cp.batch_index as u64).rotate_left(32));
        let state = TrainState { master, union, global_step: cp.global_step, batch_index: cp.batch_index };
        Ok(Trainer { config: cp.config, state, rng })
    }

    pub fn universe(&self) -> &Arc<Universe> {
        self.state.master.universe()
    }

    fn sample(&mut self, set: &TrainingSet) -> Axioms {
        let mut batch = set.background.clone();
        let n = set.examples.len();
        if n == 0 {
            return batch;
        }
        match self.config.schedule {
            BatchSchedule::Full => set.examples.iter().for_each(|e| batch.extend(e)),
            ref s => {
                let size = s.size(self.state.batch_index, n);
                for _ in 0..size {
                    batch.extend(&set.examples[self.rng.gen_range(0..n)]);
                }
            }
        }
        batch
    }

    /// One batch: trim the union model, build and reduce the dual, enforce
    /// trace constraints, sparse-cross the positives, merge into the union.
    pub fn run_batch(&mut self, set: &TrainingSet) -> Result<BatchReport> {
        let mut batch = self.sample(set);
        batch.positives.shuffle(&mut self.rng);
        self.run_axioms(&batch, Some(set))
    }

    /// Like [`Trainer::run_batch`] with an explicit batch.
    pub fn run_axioms(&mut self, batch: &Axioms, full: Option<&TrainingSet>) -> Result<BatchReport> {
        let bi = self.state.batch_index;
        let universe = self.universe().clone();
        let st = &mut self.state;
        st.union.retain(|a| batch.positives.iter().all(|r| !a.below(&r.left) || a.below(&r.right)));

        let dual = build_dual(st.union.atoms(), batch, &universe).map_err(|e| match e {
            Error::Inconsistent { index, description, .. } => Error::Inconsistent { index, description, batch: Some(bi) },
            e => e,
        })?;
        let dual = if self.config.reduce_dual {
            reduce_dual(&dual, &batch.negatives, self.config.kappa, &mut self.rng)
        } else {
            fraction_pinning(&dual, self.config.kappa, &mut self.rng)
        };

        let enforced = enforce_trace_constraints(&st.master, batch, &dual, st.global_step, &mut self.rng);
        let lambda = enforced.lambda.len();
        let mut model = st.master.clone();
        model.extend(enforced.lambda);
        let mut tm = TracedModel { model, traces: enforced.atom_traces };
        let stats = sparse_cross_batch(&mut tm, &batch.positives, &dual, self.config.gamma, &mut st.global_step, &mut self.rng);
        st.master = tm.model;
        for a in st.master.atoms() {
            st.union.insert(a.clone());
        }
        st.batch_index += 1;

        let every = self.config.error_every;
        let training_error = match full {
            Some(set) if every > 0 && st.batch_index.is_multiple_of(every) => Some(training_error(&st.union, &set.all())),
            _ => None,
        };
        let (load, _) = load_and_transition::<f64>(&model_stats(&st.union, st.global_step), st.global_step);
        Ok(BatchReport {
            batch: bi,
            master_size: st.master.len(),
            union_size: st.union.len(),
            training_error,
            load,
            lambda,
            dual_size: dual.len(),
            simplifications: stats.simplifications,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            master: ModelJson::from(&self.state.master),
            union: ModelJson::from(&self.state.union),
            config: self.config.clone(),
            global_step: self.state.global_step,
            batch_index: self.state.batch_index,
        }
    }
}

/// Batch training until `max_batches` or, when enabled, until the union
/// model has zero training error.
pub fn train(
    set: &TrainingSet,
    universe: Arc<Universe>,
    config: TrainConfig,
    initial: Option<Model>,
) -> Result<(TrainState, Vec<BatchReport>)> {
    let mut t = Trainer::new(universe, config, initial)?;
    let mut log = Vec::new();
    for _ in 0..t.config.max_batches {
        let rep = t.run_batch(set)?;
        let done = t.config.stop_on_zero_training_error && rep.training_error == Some(0.0);
        log.push(rep);
        if done {
            break;
        }
    }
    Ok((t.state, log))
}

/// Serialized training state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub master: ModelJson,
    pub union: ModelJson,
    pub config: TrainConfig,
    pub global_step: u64,
    pub batch_index: usize,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn write_progress_csv<W: Write>(reports: &[BatchReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
