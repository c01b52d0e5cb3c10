//! Classification by fewest misses, subset selection, error estimators and
//! a softmax head over atom activations.

use std::collections::HashMap;
use std::io::Write;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::bitset::BitSet;
use crate::core::{Atom, Duple, Model, Term};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomStats {
    pub g: u32,
    /// Crossings survived since the atom last grew.
    pub h: u64,
    pub empirical_pfp: Option<f64>,
}

impl AtomStats {
    pub fn of(atom: &Atom, global_step: u64) -> AtomStats {
        AtomStats { g: atom.g, h: atom.h(global_step), empirical_pfp: None }
    }
}

pub fn model_stats(model: &Model, global_step: u64) -> Vec<AtomStats> {
    model.atoms().iter().map(|a| AtomStats::of(a, global_step)).collect()
}

/// Atoms above `label` that are not below `t`.
pub fn count_misses(model: &Model, label: usize, t: &Term) -> usize {
    model.atoms().iter().filter(|a| a.upper().contains(label) && !a.below(t)).count()
}

/// Index into `labels` of the label with fewest misses; ties go to the
/// lowest index.
pub fn classify_fewest_misses(model: &Model, labels: &[usize], t: &Term) -> usize {
    argmin(labels.iter().map(|&l| count_misses(model, l, t)))
}

fn argmin(it: impl Iterator<Item = usize>) -> usize {
    let mut best = (usize::MAX, 0);
    for (i, m) in it.enumerate() {
        if m < best.0 {
            best = (m, i);
        }
    }
    best.1
}

/// Per-label atom lists for repeated classification.
#[derive(Debug, Clone)]
pub struct MissClassifier {
    per_label: Vec<Vec<BitSet>>,
}

impl MissClassifier {
    pub fn new(model: &Model, labels: &[usize]) -> MissClassifier {
        let per_label = labels
            .iter()
            .map(|&l| model.atoms().iter().filter(|a| a.upper().contains(l)).map(|a| a.upper().clone()).collect())
            .collect();
        MissClassifier { per_label }
    }

    pub fn misses(&self, t: &Term) -> Vec<usize> {
        self.per_label.iter().map(|atoms| atoms.iter().filter(|u| !u.intersects(t.constants())).count()).collect()
    }

    pub fn classify(&self, t: &Term) -> usize {
        argmin(self.misses(t).into_iter())
    }
}

/// For each atom, the negatives (by index) it discriminates.
pub fn discrimination_sets(atoms: &[Atom], negatives: &[Duple]) -> Vec<BitSet> {
    let mut out = vec![BitSet::new(negatives.len()); atoms.len()];
    let mut by_left: HashMap<&Term, Vec<usize>> = HashMap::new();
    for (k, r) in negatives.iter().enumerate() {
        by_left.entry(&r.left).or_default().push(k);
    }
    for (left, ks) in by_left {
        for (i, a) in atoms.iter().enumerate() {
            if a.below(left) {
                for &k in &ks {
                    if !a.below(&negatives[k].right) {
                        out[i].insert(k);
                    }
                }
            }
        }
    }
    out
}

/// Greedy covering passes over the atoms, each visiting them in a fresh
/// random order and discriminating every negative, accumulated until the
/// distinct selected atoms reach `delta · |atoms|`. Returns atom indices per
/// pass.
pub fn selection_passes<R: Rng>(atoms: &[Atom], negatives: &[Duple], delta: f64, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    let disc = discrimination_sets(atoms, negatives);
    let mut covered_by_some = BitSet::new(negatives.len());
    for d in &disc {
        covered_by_some.union_with(d);
    }
    if let Some(k) = BitSet::full(negatives.len()).difference(&covered_by_some).first() {
        return Err(Error::InvalidInput(format!("model does not discriminate negative duple {k}")));
    }
    let useful = disc.iter().filter(|d| !d.is_empty()).count();
    let target = ((delta * atoms.len() as f64).ceil() as usize).min(useful);
    let mut chosen = BitSet::new(atoms.len());
    let mut passes = Vec::new();
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    let mut stale = 0;
    while chosen.count() < target.max(1) && !negatives.is_empty() {
        order.shuffle(rng);
        let mut covered = BitSet::new(negatives.len());
        let mut pass = Vec::new();
        for &i in &order {
            if disc[i].has_outside(&covered) {
                covered.union_with(&disc[i]);
                pass.push(i);
            }
        }
        let before = chosen.count();
        pass.iter().for_each(|&i| {
            chosen.insert(i);
        });
        passes.push(pass);
        stale = if chosen.count() == before { stale + 1 } else { 0 };
        if stale >= 20 {
            break;
        }
    }
    Ok(passes)
}

/// Subset selection: covering passes, then atoms above no label dropped.
pub fn select_atom_subset<R: Rng>(model: &Model, negatives: &[Duple], delta: f64, labels: &[usize], rng: &mut R) -> Result<Model> {
    let passes = selection_passes(model.atoms(), negatives, delta, rng)?;
    let mut keep = BitSet::new(model.len());
    passes.iter().flatten().for_each(|&i| {
        keep.insert(i);
    });
    let label_set = BitSet::from_indices(model.width(), labels.iter().copied());
    let atoms: Vec<Atom> = keep.iter().map(|i| model.atoms()[i].clone()).filter(|a| a.upper().intersects(&label_set)).collect();
    Ok(Model::from_atoms(model.universe().clone(), atoms))
}

/// `min(1/(h+2), (g+1)/(n+2))`.
pub fn expected_pfn_atom<F: Float>(g: u32, h: u64, n: u64) -> F {
    let one = F::one();
    let two = one + one;
    let a = one / (F::from(h).unwrap() + two);
    let b = (F::from(g).unwrap() + one) / (F::from(n).unwrap() + two);
    a.min(b)
}

/// `Σ min(1/(h+1), (g+1)/(n+1))`; may exceed 1.
pub fn expected_pfn_subset<F: Float>(stats: &[AtomStats], n: u64) -> F {
    let one = F::one();
    let np1 = F::from(n).unwrap() + one;
    stats.iter().fold(F::zero(), |acc, s| {
        let a = one / (F::from(s.h).unwrap() + one);
        let b = (F::from(s.g).unwrap() + one) / np1;
        acc + a.min(b)
    })
}

/// Load `L` and transition point `1 − e^{−L}`.
pub fn load_and_transition<F: Float>(stats: &[AtomStats], j: u64) -> (F, F) {
    let l = expected_pfn_subset::<F>(stats, j);
    (l, F::one() - (-l).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfpReport {
    pub per_atom: Vec<f64>,
    /// Fraction of negatives no atom discriminates.
    pub joint: f64,
    /// Product of the per-atom rates.
    pub product: f64,
}

pub fn empirical_pfp(atoms: &[Atom], negatives: &[Duple]) -> Result<PfpReport> {
    if negatives.is_empty() {
        return invalid("empirical PFP needs at least one negative duple");
    }
    let n = negatives.len() as f64;
    let disc = discrimination_sets(atoms, negatives);
    let per_atom: Vec<f64> = disc.iter().map(|d| 1.0 - d.count() as f64 / n).collect();
    let mut any = BitSet::new(negatives.len());
    disc.iter().for_each(|d| any.union_with(d));
    Ok(PfpReport { joint: 1.0 - any.count() as f64 / n, product: per_atom.iter().product(), per_atom })
}

/// Outcome of one biased-coin game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinGame {
    /// Tails probability of the final coin.
    pub omega: f64,
    /// Number of tails.
    pub g: u32,
    /// Heads since the last tail.
    pub h: u64,
}

/// Tosses `j` times starting from tails probability `start`; each tail
/// divides the probability by a factor drawn uniformly from `[1, 4)`.
pub fn simulate_coin<R: Rng>(j: u64, start: f64, rng: &mut R) -> CoinGame {
    let mut omega = start;
    let mut pos = 0u64;
    let mut g = 0u32;
    loop {
        let u: f64 = rng.gen::<f64>();
        // heads before the next tail, geometric with parameter omega
        let run = if omega >= 1.0 { 0.0 } else { ((1.0 - u).ln() / (1.0 - omega).ln()).floor() };
        if run >= (j - pos) as f64 {
            return CoinGame { omega, g, h: j - pos };
        }
        pos += run as u64 + 1;
        g += 1;
        omega /= rng.gen_range(1.0..4.0);
        if pos == j {
            return CoinGame { omega, g, h: 0 };
        }
    }
}

/// `(1 − δ)^{max(h+1, (j+1)/(g+1))}`: estimate of `P(ω ≥ δ)`.
pub fn coin_estimate(delta: f64, g: u32, h: u64, j: u64) -> f64 {
    let e = ((h + 1) as f64).max((j + 1) as f64 / (g + 1) as f64);
    (1.0 - delta).powf(e)
}

/// Multinomial logistic regression on ±1 atom activations.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticHead<F> {
    pub classes: usize,
    pub dim: usize,
    /// Row-major `classes × (dim + 1)`; the last column is the bias.
    pub weights: Vec<F>,
}

/// `+1` for atoms below `t`, `−1` otherwise.
pub fn activations<F: Float>(atoms: &[Atom], t: &Term) -> Vec<F> {
    atoms.iter().map(|a| if a.below(t) { F::one() } else { -F::one() }).collect()
}

fn logits<F: Float>(w: &[F], classes: usize, dim: usize, x: &[F]) -> Vec<F> {
    (0..classes)
        .map(|k| {
            let row = &w[k * (dim + 1)..(k + 1) * (dim + 1)];
            x.iter().zip(row).fold(row[dim], |acc, (&xi, &wi)| acc + xi * wi)
        })
        .collect()
}

fn softmax<F: Float>(z: &[F]) -> Vec<F> {
    let m = z.iter().copied().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = z.iter().map(|&v| (v - m).exp()).collect();
    let s = e.iter().copied().fold(F::zero(), |a, b| a + b);
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy and its gradient with respect to `w`.
pub fn loss_and_gradient<F: Float>(w: &[F], classes: usize, dim: usize, xs: &[Vec<F>], ys: &[usize]) -> (F, Vec<F>) {
    let mut grad = vec![F::zero(); w.len()];
    let mut loss = F::zero();
    let n = F::from(xs.len().max(1)).unwrap();
    for (x, &y) in xs.iter().zip(ys) {
        let p = softmax(&logits(w, classes, dim, x));
        loss = loss - p[y].max(F::min_positive_value()).ln();
        for k in 0..classes {
            let d = p[k] - if k == y { F::one() } else { F::zero() };
            let row = &mut grad[k * (dim + 1)..(k + 1) * (dim + 1)];
            for (g, &xi) in row.iter_mut().zip(x) {
                *g = *g + d * xi;
            }
            row[dim] = row[dim] + d;
        }
    }
    (loss / n, grad.into_iter().map(|g| g / n).collect())
}

impl<F: Float> LogisticHead<F> {
    pub fn zeros(classes: usize, dim: usize) -> LogisticHead<F> {
        LogisticHead { classes, dim, weights: vec![F::zero(); classes * (dim + 1)] }
    }

    /// Full-batch Adam (β1 = 0.9, β2 = 0.999, ε = 1e−8) from zero weights.
    pub fn fit(xs: &[Vec<F>], ys: &[usize], classes: usize, epochs: usize, lr: F) -> Result<LogisticHead<F>> {
        if classes == 0 {
            return invalid("logistic head needs at least one class");
        }
        let dim = xs.first().map_or(0, |x| x.len());
        if xs.len() != ys.len() {
            return invalid("activation and label counts differ");
        }
        if xs.iter().any(|x| x.len() != dim) {
            return invalid("activation vectors differ in length");
        }
        if ys.iter().any(|&y| y >= classes) {
            return invalid("class index out of range");
        }
        let mut head = LogisticHead::zeros(classes, dim);
        let c = |v: f64| F::from(v).unwrap();
        let (b1, b2, eps) = (c(0.9), c(0.999), c(1e-8));
        let mut m = vec![F::zero(); head.weights.len()];
        let mut v = m.clone();
        let (mut b1t, mut b2t) = (F::one(), F::one());
        for _ in 0..epochs {
            let (_, g) = loss_and_gradient(&head.weights, classes, dim, xs, ys);
            b1t = b1t * b1;
            b2t = b2t * b2;
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (F::one() - b1) * g[i];
                v[i] = b2 * v[i] + (F::one() - b2) * g[i] * g[i];
                let mh = m[i] / (F::one() - b1t);
                let vh = v[i] / (F::one() - b2t);
                head.weights[i] = head.weights[i] - lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(head)
    }

    /// Highest-scoring class; ties go to the lowest index.
    pub fn predict(&self, x: &[F]) -> Result<usize> {
        if x.len() != self.dim {
            return invalid(format!("expected {} activations, got {}", self.dim, x.len()));
        }
        let z = logits(&self.weights, self.classes, self.dim, x);
        let mut best = 0;
        for k in 1..z.len() {
            if z[k] > z[best] {
                best = k;
            }
        }
        Ok(best)
    }
}

/// Evaluation summary written by the CLI.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub head_accuracy: Option<f64>,
    pub per_class: Vec<(usize, usize)>,
    /// Misses of the true class, per test example.
    pub true_misses: Vec<usize>,
    /// Misses of every other class, per test example and class.
    pub other_misses: Vec<usize>,
    pub load: f64,
    pub transition: f64,
    pub model_size: usize,
    pub subset_size: usize,
}

impl Metrics {
    /// One `metric,key,value` row per quantity: accuracies, per-class counts,
    /// miss histograms, load, transition and sizes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "key", "value"])?;
        let row = |w: &mut csv::Writer<W>, m: &str, k: String, v: String| w.write_record([m, &k, &v]);
        row(&mut w, "accuracy", String::new(), self.accuracy.to_string())?;
        if let Some(h) = self.head_accuracy {
            row(&mut w, "head_accuracy", String::new(), h.to_string())?;
        }
        for (k, &(ok, total)) in self.per_class.iter().enumerate() {
            let acc = if total == 0 { 0.0 } else { ok as f64 / total as f64 };
            row(&mut w, "class_accuracy", k.to_string(), acc.to_string())?;
        }
        for (name, data) in [("true_miss_hist", &self.true_misses), ("other_miss_hist", &self.other_misses)] {
            let mut hist = std::collections::BTreeMap::new();
            data.iter().for_each(|&m| *hist.entry(m).or_insert(0usize) += 1);
            for (m, c) in hist {
                row(&mut w, name, m.to_string(), c.to_string())?;
            }
        }
        row(&mut w, "load", String::new(), self.load.to_string())?;
        row(&mut w, "transition", String::new(), self.transition.to_string())?;
        row(&mut w, "model_size", String::new(), self.model_size.to_string())?;
        row(&mut w, "subset_size", String::new(), self.subset_size.to_string())?;
        w.flush()?;
        Ok(())
    }
}
