//! Traces: sets of dual-atom indices attached to atoms and terms.

use crate::bitset::BitSet;
use crate::core::{Atom, Model, Term};
use crate::dual::{Dual, DualEntry};

/// `Tr(φ) = ∪_{c ∈ U(φ)} L^a([c])`.
pub fn trace_of_upper(upper: &BitSet, dual: &Dual) -> BitSet {
    let words = dual.len().div_ceil(64).max(1);
    let cwords = dual.width().div_ceil(64);
    if upper.count() * words <= dual.len() * cwords {
        let mut t = BitSet::new(dual.len());
        for c in upper.iter() {
            t.union_with(dual.constant_segment(c));
        }
        t
    } else {
        BitSet::from_indices(
            dual.len(),
            dual.entries().iter().enumerate().filter_map(|(i, e)| {
                let hit = match e {
                    DualEntry::Indicator(ind) => upper.intersects(ind),
                    DualEntry::Pinning(up) => !upper.is_subset(up),
                };
                hit.then_some(i)
            }),
        )
    }
}

pub fn trace_of_atom(atom: &Atom, dual: &Dual) -> BitSet {
    trace_of_upper(atom.upper(), dual)
}

/// Intersection of the traces of the atoms below `t`; the full index set
/// when no atom is below `t`.
pub fn trace_of_term(t: &Term, model: &Model, dual: &Dual) -> BitSet {
    let mut tr = dual.all();
    for a in model.atoms().iter().filter(|a| a.below(t)) {
        tr.intersect_with(&trace_of_atom(a, dual));
    }
    tr
}

/// Atom traces aligned with a model's atom list, valid for one dual.
#[derive(Debug, Clone)]
pub struct AtomTraces {
    generation: u64,
    traces: Vec<BitSet>,
}

impl AtomTraces {
    pub fn compute(atoms: &[Atom], dual: &Dual) -> AtomTraces {
        AtomTraces { generation: dual.generation(), traces: atoms.iter().map(|a| trace_of_atom(a, dual)).collect() }
    }

    pub fn is_current(&self, dual: &Dual) -> bool {
        self.generation == dual.generation()
    }

    pub fn get(&self, i: usize) -> &BitSet {
        &self.traces[i]
    }

    pub fn as_slice(&self) -> &[BitSet] {
        &self.traces
    }

    pub fn into_vec(self) -> Vec<BitSet> {
        self.traces
    }
}

/// `Tr(c)` for every constant, given aligned atom traces. Constants with no
/// atom above them get the full index set.
pub fn constant_traces(atoms: &[Atom], traces: &[BitSet], width: usize, dual_len: usize) -> Vec<BitSet> {
    let mut out = vec![BitSet::full(dual_len); width];
    for (a, tr) in atoms.iter().zip(traces) {
        for c in a.upper().iter() {
            out[c].intersect_with(tr);
        }
    }
    out
}

/// `Tr(t) = ∩_{c ∈ C(t)} Tr(c)`.
pub fn term_trace_from_constants(t: &Term, constant_traces: &[BitSet]) -> BitSet {
    let mut it = t.constants().iter();
    let mut tr = constant_traces[it.next().expect("terms are non-empty")].clone();
    for c in it {
        tr.intersect_with(&constant_traces[c]);
    }
    tr
}
