//! The dual algebra of a batch.
//!
//! Dual atoms come from two sources: indicator sets, one per distinct
//! closure of a negative duple's right term under the positive duples, and
//! pinning entries, one per atom of the union model. Only the lower segments
//! of constants are stored; the segment of a term is the intersection of
//! its constants' segments.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bitset::BitSet;
use crate::core::{Atom, Axioms, Duple, Term, Universe};
use crate::error::{Error, Result};

static GENERATION: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DualEntry {
    /// Constants of the closed right-hand term.
    Indicator(BitSet),
    /// Upper segment of the union-model atom being pinned.
    Pinning(BitSet),
}

#[derive(Debug, Clone)]
pub struct Dual {
    generation: u64,
    width: usize,
    entries: Vec<DualEntry>,
    constant_segments: Vec<BitSet>,
}

impl Dual {
    fn from_entries(width: usize, entries: Vec<DualEntry>) -> Dual {
        let n = entries.len();
        let mut constant_segments = vec![BitSet::new(n); width];
        for (i, e) in entries.iter().enumerate() {
            match e {
                DualEntry::Indicator(ind) => ind.iter().for_each(|c| {
                    constant_segments[c].insert(i);
                }),
                DualEntry::Pinning(up) => up.complement().iter().for_each(|c| {
                    constant_segments[c].insert(i);
                }),
            }
        }
        Dual { generation: GENERATION.fetch_add(1, Ordering::Relaxed), width, entries, constant_segments }
    }

    /// Distinguishes duals; trace caches are only valid for one generation.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of constants of the underlying universe.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn entries(&self) -> &[DualEntry] {
        &self.entries
    }

    pub fn is_indicator(&self, i: usize) -> bool {
        matches!(self.entries[i], DualEntry::Indicator(_))
    }

    pub fn indicator_count(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e, DualEntry::Indicator(_))).count()
    }

    pub fn pinning_count(&self) -> usize {
        self.len() - self.indicator_count()
    }

    /// The full index set.
    pub fn all(&self) -> BitSet {
        BitSet::full(self.len())
    }

    /// `L^a([c])`.
    pub fn constant_segment(&self, c: usize) -> &BitSet {
        &self.constant_segments[c]
    }

    /// `L^a([t])`.
    pub fn term_segment(&self, t: &Term) -> BitSet {
        let words = self.len().div_ceil(64).max(1);
        let cwords = self.width.div_ceil(64);
        if t.len() * words <= self.len() * cwords {
            let mut it = t.constants().iter();
            let mut s = self.constant_segments[it.next().expect("terms are non-empty")].clone();
            for c in it {
                s.intersect_with(&self.constant_segments[c]);
            }
            s
        } else {
            let tc = t.constants();
            BitSet::from_indices(
                self.len(),
                self.entries.iter().enumerate().filter_map(|(i, e)| {
                    let inside = match e {
                        DualEntry::Indicator(ind) => tc.is_subset(ind),
                        DualEntry::Pinning(up) => !tc.intersects(up),
                    };
                    inside.then_some(i)
                }),
            )
        }
    }

    /// Entries in `L^a([r_R]) \ L^a([r_L])`: those witnessing `r_L ≰ r_R`.
    pub fn discriminating(&self, d: &Duple) -> BitSet {
        self.term_segment(&d.right).difference(&self.term_segment(&d.left))
    }

    /// Keeps the listed entries, renumbered in the given order.
    pub fn restrict(&self, keep: &[usize]) -> Dual {
        Dual {
            generation: GENERATION.fetch_add(1, Ordering::Relaxed),
            width: self.width,
            entries: keep.iter().map(|&i| self.entries[i].clone()).collect(),
            constant_segments: self.constant_segments.iter().map(|s| s.project(keep)).collect(),
        }
    }
}

/// Closes `set` under the positive duples: whenever a right term lies in
/// the set, its left term is added.
pub fn close_under(set: &mut BitSet, positives: &[Duple]) {
    loop {
        let mut changed = false;
        for r in positives {
            if r.right.constants().is_subset(set) && !r.left.constants().is_subset(set) {
                set.union_with(r.left.constants());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Builds the dual of a batch and checks it against the negative duples.
///
/// `union_atoms` must already satisfy the batch's positive duples. Returns
/// [`Error::Inconsistent`] naming the first negative duple that follows from
/// the positives.
pub fn build_dual<'a>(
    union_atoms: impl IntoIterator<Item = &'a Atom>,
    batch: &Axioms,
    universe: &Universe,
) -> Result<Dual> {
    let width = universe.len();
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    let mut closures: HashMap<&Term, BitSet> = HashMap::new();
    for r in &batch.negatives {
        if closures.contains_key(&r.right) {
            continue;
        }
        let mut ind = r.right.constants().clone();
        close_under(&mut ind, &batch.positives);
        closures.insert(&r.right, ind.clone());
        if seen.insert(ind.clone()) {
            entries.push(DualEntry::Indicator(ind));
        }
    }
    for a in union_atoms {
        if a.upper().count() < width {
            entries.push(DualEntry::Pinning(a.upper().clone()));
        }
    }
    let dual = Dual::from_entries(width, entries);
    check_consistency(&dual, &batch.negatives, universe)?;
    Ok(dual)
}

fn check_consistency(dual: &Dual, negatives: &[Duple], universe: &Universe) -> Result<()> {
    let mut cache: HashMap<&Term, BitSet> = HashMap::new();
    for (index, r) in negatives.iter().enumerate() {
        let right = cache.entry(&r.right).or_insert_with(|| dual.term_segment(&r.right)).clone();
        let left = cache.entry(&r.left).or_insert_with(|| dual.term_segment(&r.left));
        if right.is_subset(left) {
            return Err(Error::Inconsistent { index, description: r.describe(universe), batch: None });
        }
    }
    Ok(())
}

/// Shrinks the dual while every negative duple keeps a discriminating entry.
///
/// Negative duples are visited in random order; one not yet discriminated by
/// a kept entry gets a random discriminating indicator, or any discriminating
/// entry when no indicator discriminates it. Then a random subset `S` of the
/// remaining pinning entries is kept with `|D_R| ≥ κ (|D_R| + |S|)`.
pub fn reduce_dual<R: Rng>(dual: &Dual, negatives: &[Duple], kappa: f64, rng: &mut R) -> Dual {
    let mut kept = BitSet::new(dual.len());
    let mut order: Vec<usize> = (0..negatives.len()).collect();
    order.shuffle(rng);
    let mut cache: HashMap<&Term, BitSet> = HashMap::new();
    for k in order {
        let r = &negatives[k];
        let right = cache.entry(&r.right).or_insert_with(|| dual.term_segment(&r.right)).clone();
        let left = cache.entry(&r.left).or_insert_with(|| dual.term_segment(&r.left));
        let disc = right.difference(left);
        if disc.intersects(&kept) {
            continue;
        }
        let ind: Vec<usize> = disc.iter().filter(|&i| dual.is_indicator(i)).collect();
        let pick = if ind.is_empty() { disc.iter().collect::<Vec<_>>().choose(rng).copied() } else { ind.choose(rng).copied() };
        if let Some(i) = pick {
            kept.insert(i);
        }
    }
    let mut keep: Vec<usize> = kept.iter().collect();
    let duple_origin = keep.iter().filter(|&&i| dual.is_indicator(i)).count();
    keep.extend(sample_pinning(dual, duple_origin, kappa, &kept, rng));
    keep.sort_unstable();
    dual.restrict(&keep)
}

/// κ fractioning only: every indicator stays, pinning entries are subsampled.
pub fn fraction_pinning<R: Rng>(dual: &Dual, kappa: f64, rng: &mut R) -> Dual {
    let ind: Vec<usize> = (0..dual.len()).filter(|&i| dual.is_indicator(i)).collect();
    let kept = BitSet::from_indices(dual.len(), ind.iter().copied());
    let mut keep = ind.clone();
    keep.extend(sample_pinning(dual, ind.len(), kappa, &kept, rng));
    keep.sort_unstable();
    dual.restrict(&keep)
}

/// Largest pinning count `s` with `d ≥ κ (d + s)`.
pub fn max_pinning(duple_origin: usize, kappa: f64) -> usize {
    if kappa <= 0.0 {
        usize::MAX
    } else {
        ((duple_origin as f64) * (1.0 - kappa) / kappa + 1e-9).floor() as usize
    }
}

fn sample_pinning<R: Rng>(dual: &Dual, duple_origin: usize, kappa: f64, already: &BitSet, rng: &mut R) -> Vec<usize> {
    let mut pins: Vec<usize> = (0..dual.len()).filter(|&i| !dual.is_indicator(i) && !already.contains(i)).collect();
    let extra = max_pinning(duple_origin, kappa).saturating_sub(already.iter().filter(|&i| !dual.is_indicator(i)).count());
    if pins.len() > extra {
        pins.shuffle(rng);
        pins.truncate(extra);
    }
    pins
}
