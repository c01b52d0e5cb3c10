//! Brute-force oracles over small universes, with terms and atoms as `u32`
//! masks, plus random instance generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use aml::{Axioms, BitSet, Duple, Model, Term, Universe};
use proptest::prelude::*;
use rand::Rng;

/// A positive or negative duple `l ≤ r` as constant masks.
pub type MaskDuple = (u32, u32);

#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub positives: Vec<MaskDuple>,
    pub negatives: Vec<MaskDuple>,
}

pub fn bits(m: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |&i| m >> i & 1 == 1)
}

pub fn mask_of(b: &BitSet) -> u32 {
    b.iter().fold(0, |m, i| m | 1 << i)
}

pub fn term(n: usize, m: u32) -> Term {
    Term::new(n, bits(m)).unwrap()
}

pub fn universe(n: usize) -> Arc<Universe> {
    Arc::new(Universe::anonymous(n).unwrap())
}

impl Instance {
    pub fn universe(&self) -> Arc<Universe> {
        universe(self.n)
    }

    pub fn positive_duples(&self) -> Vec<Duple> {
        self.positives.iter().map(|&(l, r)| Duple::positive(term(self.n, l), term(self.n, r))).collect()
    }

    pub fn negative_duples(&self) -> Vec<Duple> {
        self.negatives.iter().map(|&(l, r)| Duple::negative(term(self.n, l), term(self.n, r))).collect()
    }

    pub fn axioms(&self) -> Axioms {
        Axioms::new(self.positive_duples(), self.negative_duples())
    }

    pub fn consistent(&self) -> bool {
        self.negatives.iter().all(|&(l, r)| !entails(&self.positives, l, r))
    }
}

/// Smallest superset of `set` closed under `r ⊆ S ⇒ l ⊆ S` for each positive.
pub fn closure(set: u32, positives: &[MaskDuple]) -> u32 {
    let mut s = set;
    loop {
        let before = s;
        for &(l, r) in positives {
            if r & !s == 0 {
                s |= l;
            }
        }
        if s == before {
            return s;
        }
    }
}

/// `l ≤ r` follows from the positive duples.
pub fn entails(positives: &[MaskDuple], l: u32, r: u32) -> bool {
    l & !closure(r, positives) == 0
}

/// An upper segment `u` is an atom of some model of the positives when every
/// positive duple holds in the one-atom model `{u}`.
pub fn admissible(u: u32, positives: &[MaskDuple]) -> bool {
    positives.iter().all(|&(l, r)| u & l == 0 || u & r != 0)
}

/// Non-redundant atoms of the freest model: admissible sets that are not the
/// union of admissible strict subsets.
pub fn freest_atoms(n: usize, positives: &[MaskDuple]) -> BTreeSet<u32> {
    let ok: Vec<bool> = (0..1u32 << n).map(|u| u != 0 && admissible(u, positives)).collect();
    (1..1u32 << n)
        .filter(|&u| ok[u as usize])
        .filter(|&u| {
            let mut cover = 0;
            let mut s = (u - 1) & u;
            while s != 0 {
                if ok[s as usize] {
                    cover |= s;
                }
                s = (s - 1) & u;
            }
            cover != u
        })
        .collect()
}

/// `l ≤ r` in the model with the given atoms.
pub fn holds_in(atoms: &[u32], l: u32, r: u32) -> bool {
    atoms.iter().all(|&a| a & l == 0 || a & r != 0)
}

/// Atoms of `atoms` that are unions of strictly narrower members.
pub fn redundant_brute(atoms: &[u32]) -> BTreeSet<u32> {
    atoms
        .iter()
        .copied()
        .filter(|&x| {
            let cover = atoms.iter().filter(|&&y| y != x && y & !x == 0).fold(0, |c, &y| c | y);
            cover == x
        })
        .collect()
}

pub fn model_masks(m: &Model) -> BTreeSet<u32> {
    m.atoms().iter().map(|a| mask_of(a.upper())).collect()
}

pub fn model_from_masks(n: usize, masks: impl IntoIterator<Item = u32>) -> Model {
    Model::from_atoms(universe(n), masks.into_iter().map(|m| aml::Atom::new(BitSet::from_indices(n, bits(m)))))
}

/// Mostly one to three constants, sometimes any non-empty subset.
pub fn random_term<R: Rng>(n: usize, rng: &mut R) -> u32 {
    if rng.gen_bool(0.8) {
        let k = rng.gen_range(1..=3.min(n));
        let mut m = 0u32;
        while m.count_ones() < k as u32 {
            m |= 1 << rng.gen_range(0..n);
        }
        m
    } else {
        rng.gen_range(1..1u32 << n)
    }
}

/// Random instance; with `consistent`, negatives that follow from the
/// positives are redrawn.
pub fn random_instance<R: Rng>(rng: &mut R, max_c: usize, max_pos: usize, max_neg: usize, consistent: bool) -> Instance {
    let n = rng.gen_range(3..=max_c);
    let positives: Vec<MaskDuple> =
        (0..rng.gen_range(1..=max_pos)).map(|_| (random_term(n, rng), random_term(n, rng))).collect();
    let mut negatives = Vec::new();
    let want = rng.gen_range(0..=max_neg);
    let mut tries = 0;
    while negatives.len() < want && tries < 200 {
        tries += 1;
        let d = (random_term(n, rng), random_term(n, rng));
        if !consistent || !entails(&positives, d.0, d.1) {
            negatives.push(d);
        }
    }
    Instance { n, positives, negatives }
}

fn term_strategy(n: usize) -> BoxedStrategy<u32> {
    prop_oneof![
        4 => proptest::collection::btree_set(0..n, 1..=3.min(n)).prop_map(|s| s.into_iter().fold(0u32, |m, i| m | 1 << i)),
        1 => 1u32..1 << n,
    ]
    .boxed()
}

pub fn instance_strategy(max_c: usize, max_pos: usize, max_neg: usize) -> impl Strategy<Value = Instance> {
    (3..=max_c).prop_flat_map(move |n| {
        let d = (term_strategy(n), term_strategy(n));
        (
            Just(n),
            proptest::collection::vec(d.clone(), 1..=max_pos),
            proptest::collection::vec(d, 0..=max_neg),
        )
            .prop_map(|(n, positives, negatives)| Instance { n, positives, negatives })
    })
}
