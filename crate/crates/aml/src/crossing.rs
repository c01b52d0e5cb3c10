//! Full crossing and freest-model construction.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::bitset::BitSet;
use crate::core::{Duple, Model, Term, Universe};
use crate::error::{invalid, Result};

/// `(M \ D) ∪ (D ▽ R)` for the positive duple `left ≤ right`, without any
/// redundancy removal. New atoms are stamped with `step`.
pub fn full_cross(model: &Model, left: &Term, right: &Term, step: u64) -> Model {
    let dis = model.discriminant(left, right);
    if dis.is_empty() {
        return model.clone();
    }
    let atoms = model.atoms();
    let rseg = model.segment(right);
    let mut out = kept_atoms(model, &dis);
    for &i in &dis {
        for &j in &rseg {
            out.insert(atoms[i].union(&atoms[j], step));
        }
    }
    out
}

fn kept_atoms(model: &Model, dis: &[usize]) -> Model {
    let mut in_dis = vec![false; model.len()];
    for &i in dis {
        in_dis[i] = true;
    }
    Model::from_atoms(
        model.universe().clone(),
        model.atoms().iter().enumerate().filter(|(i, _)| !in_dis[*i]).map(|(_, a)| a.clone()),
    )
}

/// Full crossing followed by redundancy removal, for a non-redundant `model`.
///
/// Atoms kept from `model` stay non-redundant, so only the new unions are
/// checked. Within one discriminant atom's row, unions that contain another
/// union of the same row are redundant and never materialized.
pub fn cross_non_redundant(model: &Model, left: &Term, right: &Term, step: u64) -> Model {
    let dis = model.discriminant(left, right);
    if dis.is_empty() {
        return model.clone();
    }
    let atoms = model.atoms();
    let mut rseg = model.segment(right);
    rseg.sort_by_key(|&j| atoms[j].size());

    let mut out = kept_atoms(model, &dis);
    let mut fresh = Vec::new();
    let mut scratch = BitSet::new(model.width());
    let mut row: Vec<BitSet> = Vec::new();
    for &i in &dis {
        let phi = &atoms[i];
        row.clear();
        for &j in &rseg {
            scratch.assign_union(phi.upper(), atoms[j].upper());
            if row.iter().any(|k| k.is_subset(&scratch)) {
                continue;
            }
            row.push(scratch.clone());
        }
        let minimal: Vec<&BitSet> =
            row.iter().filter(|x| !row.iter().any(|k| k.is_proper_subset(x))).collect();
        for x in minimal {
            let a = crate::core::Atom::with_stats(x.clone(), phi.g + 1, step);
            if out.insert(a) {
                fresh.push(out.len() - 1);
            }
        }
    }
    let red = out.redundant_among(fresh);
    out.remove_indices(&red);
    out
}

/// One line of the crossing trace log.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct CrossingRecord {
    pub step: u64,
    pub duple: usize,
    pub discriminant: usize,
    pub right_segment: usize,
    pub model_size: usize,
    pub non_redundant: usize,
}

/// Crosses `positives` in order into the freest empty model.
///
/// With `remove_each_step` redundant atoms are dropped after every crossing;
/// otherwise the raw model is carried along and cleaned once at the end.
pub fn freest_model(universe: Arc<Universe>, positives: &[Duple], remove_each_step: bool) -> Result<Model> {
    freest_model_logged(universe, positives, remove_each_step, None)
}

pub fn freest_model_logged(
    universe: Arc<Universe>,
    positives: &[Duple],
    remove_each_step: bool,
    mut log: Option<&mut Vec<CrossingRecord>>,
) -> Result<Model> {
    let mut m = Model::freest_empty(universe)?;
    for (k, d) in positives.iter().enumerate() {
        if !d.is_positive() {
            return invalid(format!("duple #{k} is negative; only positive duples can be crossed"));
        }
        m.duple_holds(d)?;
        let step = k as u64 + 1;
        let (dl, rl) = if log.is_some() {
            (m.discriminant(&d.left, &d.right).len(), m.segment(&d.right).len())
        } else {
            (0, 0)
        };
        m = if remove_each_step {
            cross_non_redundant(&m, &d.left, &d.right, step)
        } else {
            full_cross(&m, &d.left, &d.right, step)
        };
        if let Some(log) = log.as_deref_mut() {
            let non_redundant = if remove_each_step { m.len() } else { m.remove_redundant().len() };
            log.push(CrossingRecord {
                step,
                duple: k,
                discriminant: dl,
                right_segment: rl,
                model_size: m.len(),
                non_redundant,
            });
        }
    }
    Ok(if remove_each_step { m } else { m.remove_redundant() })
}

/// Histogram of atom sizes over the non-redundant atoms of `model`.
pub fn atom_size_histogram(model: &Model) -> BTreeMap<usize, usize> {
    model.remove_redundant().size_histogram()
}

pub fn write_trace_csv<W: Write>(records: &[CrossingRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
