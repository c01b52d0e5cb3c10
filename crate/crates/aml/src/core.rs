//! Constants, terms, atoms, duples and atomized models.
//!
//! A model is a set of atoms; each atom is identified with the set of
//! constants above it (its upper segment). A term is below an atom's
//! constants whenever the two sets meet, so every query reduces to bit-set
//! intersection and inclusion.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl Universe {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return invalid("a universe needs at least one constant");
        }
        let mut lookup = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if lookup.insert(n.clone(), i).is_some() {
                return invalid(format!("duplicate constant label {n:?}"));
            }
        }
        Ok(Universe { names, lookup })
    }

    /// Constants labelled `c0, c1, ...`.
    pub fn anonymous(n: usize) -> Result<Self> {
        Universe::new((0..n).map(|i| format!("c{i}")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, c: usize) -> &str {
        &self.names[c]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }

    pub fn term(&self, names: &[&str]) -> Result<Term> {
        let ids = names
            .iter()
            .map(|n| self.index_of(n).ok_or_else(|| Error::InvalidInput(format!("unknown constant {n:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Term::new(self.len(), ids)
    }

    pub fn describe(&self, set: &BitSet) -> String {
        let parts: Vec<&str> = set.iter().map(|c| self.name(c)).collect();
        parts.join("+")
    }
}

/// An idempotent sum of constants, kept as its component-constant set.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    constants: BitSet,
}

impl Term {
    pub fn new(universe_size: usize, ids: impl IntoIterator<Item = usize>) -> Result<Term> {
        let mut constants = BitSet::new(universe_size);
        for c in ids {
            if c >= universe_size {
                return invalid(format!("constant {c} outside universe of size {universe_size}"));
            }
            constants.insert(c);
        }
        Term::from_bits(constants)
    }

    pub fn from_bits(constants: BitSet) -> Result<Term> {
        if constants.is_empty() {
            return invalid("a term needs at least one constant");
        }
        Ok(Term { constants })
    }

    pub fn constant(universe_size: usize, c: usize) -> Result<Term> {
        Term::new(universe_size, [c])
    }

    pub fn constants(&self) -> &BitSet {
        &self.constants
    }

    pub fn width(&self) -> usize {
        self.constants.len()
    }

    pub fn len(&self) -> usize {
        self.constants.count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, c: usize) -> bool {
        self.constants.contains(c)
    }

    /// `self ⊙ other`.
    pub fn join(&self, other: &Term) -> Term {
        Term { constants: self.constants.union(&other.constants) }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Term{:?}", self.constants)
    }
}

/// An atom with its training bookkeeping. Equality and hashing only look at
/// the upper segment.
#[derive(Clone)]
pub struct Atom {
    upper: BitSet,
    /// Growth count along the atom's chain of unions.
    pub g: u32,
    /// Global crossing step at which the atom was created.
    pub birth: u64,
}

impl Atom {
    pub fn new(upper: BitSet) -> Atom {
        debug_assert!(!upper.is_empty());
        Atom { upper, g: 0, birth: 0 }
    }

    pub fn with_stats(upper: BitSet, g: u32, birth: u64) -> Atom {
        Atom { upper, g, birth }
    }

    pub fn singleton(universe_size: usize, c: usize) -> Atom {
        Atom::new(BitSet::from_indices(universe_size, [c]))
    }

    pub fn upper(&self) -> &BitSet {
        &self.upper
    }

    pub fn size(&self) -> usize {
        self.upper.count()
    }

    /// `self ▽ other`; `g` grows by one when `other` adds constants to `self`.
    pub fn union(&self, other: &Atom, step: u64) -> Atom {
        let upper = self.upper.union(&other.upper);
        let g = if upper == self.upper { self.g } else { self.g + 1 };
        Atom { upper, g, birth: step }
    }

    /// Is the atom below term `t`.
    #[inline]
    pub fn below(&self, t: &Term) -> bool {
        self.upper.intersects(&t.constants)
    }

    /// Success tail: crossings survived since the atom was created.
    pub fn h(&self, global_step: u64) -> u64 {
        global_step.saturating_sub(self.birth)
    }
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper
    }
}

impl Eq for Atom {}

impl Hash for Atom {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.upper.hash(state)
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "φ{:?}", self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

/// `left ≤ right` (positive) or `left ≰ right` (negative).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Duple {
    pub left: Term,
    pub right: Term,
    pub sign: Sign,
}

impl Duple {
    pub fn positive(left: Term, right: Term) -> Duple {
        Duple { left, right, sign: Sign::Positive }
    }

    pub fn negative(left: Term, right: Term) -> Duple {
        Duple { left, right, sign: Sign::Negative }
    }

    pub fn is_positive(&self) -> bool {
        self.sign == Sign::Positive
    }

    pub fn describe(&self, u: &Universe) -> String {
        let op = if self.is_positive() { "<=" } else { "!<=" };
        format!("{} {} {}", u.describe(self.left.constants()), op, u.describe(self.right.constants()))
    }
}

/// A set of positive and negative duples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Axioms {
    pub positives: Vec<Duple>,
    pub negatives: Vec<Duple>,
}

impl Axioms {
    pub fn new(positives: Vec<Duple>, negatives: Vec<Duple>) -> Axioms {
        Axioms { positives, negatives }
    }

    /// Splits duples by sign.
    pub fn from_duples(duples: impl IntoIterator<Item = Duple>) -> Axioms {
        let (positives, negatives) = duples.into_iter().partition(|d| d.is_positive());
        Axioms { positives, negatives }
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extend(&mut self, other: &Axioms) {
        self.positives.extend(other.positives.iter().cloned());
        self.negatives.extend(other.negatives.iter().cloned());
    }

    pub fn iter(&self) -> impl Iterator<Item = &Duple> {
        self.positives.iter().chain(self.negatives.iter())
    }
}

/// Enumerating proper subsets beats scanning per-constant lists below this size.
const SUBSET_ENUM_LIMIT: usize = 10;

#[derive(Clone)]
pub struct Model {
    universe: Arc<Universe>,
    atoms: Vec<Atom>,
    index: HashMap<BitSet, usize>,
}

impl Model {
    pub fn empty(universe: Arc<Universe>) -> Model {
        Model { universe, atoms: Vec::new(), index: HashMap::new() }
    }

    /// One singleton atom per constant.
    pub fn freest_empty(universe: Arc<Universe>) -> Result<Model> {
        if universe.is_empty() {
            return invalid("empty universe");
        }
        let n = universe.len();
        Ok(Model::from_atoms(universe, (0..n).map(|c| Atom::singleton(n, c))))
    }

    pub fn from_atoms(universe: Arc<Universe>, atoms: impl IntoIterator<Item = Atom>) -> Model {
        let mut m = Model::empty(universe);
        for a in atoms {
            m.insert(a);
        }
        m
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn width(&self) -> usize {
        self.universe.len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<Atom> {
        self.atoms
    }

    pub fn contains(&self, upper: &BitSet) -> bool {
        self.index.contains_key(upper)
    }

    pub fn get(&self, upper: &BitSet) -> Option<&Atom> {
        self.index.get(upper).map(|&i| &self.atoms[i])
    }

    /// Adds `atom` unless an atom with the same upper set exists; on a clash
    /// the statistics with the earlier birth are kept. Returns true if new.
    pub fn insert(&mut self, atom: Atom) -> bool {
        assert_eq!(atom.upper.len(), self.width(), "atom width does not match universe");
        match self.index.get(&atom.upper) {
            Some(&i) => {
                let old = &mut self.atoms[i];
                if atom.birth < old.birth {
                    old.g = atom.g;
                    old.birth = atom.birth;
                }
                false
            }
            None => {
                self.index.insert(atom.upper.clone(), self.atoms.len());
                self.atoms.push(atom);
                true
            }
        }
    }

    pub fn extend(&mut self, atoms: impl IntoIterator<Item = Atom>) {
        for a in atoms {
            self.insert(a);
        }
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&Atom) -> bool) {
        self.atoms.retain(|a| keep(a));
        self.reindex();
    }

    /// Drops the atoms at the given positions.
    pub fn remove_indices(&mut self, idx: &[usize]) {
        if idx.is_empty() {
            return;
        }
        let mut drop = vec![false; self.atoms.len()];
        for &i in idx {
            drop[i] = true;
        }
        let mut k = 0;
        self.atoms.retain(|_| {
            k += 1;
            !drop[k - 1]
        });
        self.reindex();
    }

    fn reindex(&mut self) {
        self.index.clear();
        for (i, a) in self.atoms.iter().enumerate() {
            self.index.insert(a.upper.clone(), i);
        }
    }

    fn check_term(&self, t: &Term) -> Result<()> {
        if t.width() != self.width() {
            return invalid(format!("term over {} constants used with a universe of {}", t.width(), self.width()));
        }
        Ok(())
    }

    /// Indices of the atoms below `t`.
    pub fn segment(&self, t: &Term) -> Vec<usize> {
        (0..self.atoms.len()).filter(|&i| self.atoms[i].below(t)).collect()
    }

    pub fn lower_atomic_segment(&self, t: &Term) -> Result<Vec<&Atom>> {
        self.check_term(t)?;
        Ok(self.atoms.iter().filter(|a| a.below(t)).collect())
    }

    /// `left ≤ right` holds when every atom below `left` is below `right`.
    pub fn holds(&self, left: &Term, right: &Term) -> bool {
        !self.atoms.iter().any(|a| a.below(left) && !a.below(right))
    }

    pub fn duple_holds(&self, d: &Duple) -> Result<bool> {
        self.check_term(&d.left)?;
        self.check_term(&d.right)?;
        Ok(self.holds(&d.left, &d.right))
    }

    /// True when the model agrees with the duple's sign.
    pub fn satisfies(&self, d: &Duple) -> bool {
        self.holds(&d.left, &d.right) == d.is_positive()
    }

    /// Indices of the atoms below `left` but not below `right`.
    pub fn discriminant(&self, left: &Term, right: &Term) -> Vec<usize> {
        (0..self.atoms.len()).filter(|&i| self.atoms[i].below(left) && !self.atoms[i].below(right)).collect()
    }

    pub fn discriminant_atoms(&self, d: &Duple) -> Result<Vec<&Atom>> {
        self.check_term(&d.left)?;
        self.check_term(&d.right)?;
        Ok(self.discriminant(&d.left, &d.right).into_iter().map(|i| &self.atoms[i]).collect())
    }

    /// `upper` is a union of strictly narrower atoms of this model.
    pub fn is_redundant(&self, upper: &BitSet) -> bool {
        self.covered(upper, &mut None)
    }

    fn covered(&self, x: &BitSet, by_constant: &mut Option<Vec<Vec<usize>>>) -> bool {
        let k = x.count();
        if k <= 1 {
            return false;
        }
        if k <= SUBSET_ENUM_LIMIT {
            let pos = x.to_vec();
            let mut covered = BitSet::new(x.len());
            let mut scratch = BitSet::new(x.len());
            for mask in 1u32..(1u32 << k) - 1 {
                scratch.clear();
                for (b, &c) in pos.iter().enumerate() {
                    if mask & (1 << b) != 0 {
                        scratch.insert(c);
                    }
                }
                if self.index.contains_key(&scratch) {
                    covered.union_with(&scratch);
                    if covered == *x {
                        return true;
                    }
                }
            }
            return false;
        }
        let lists = by_constant.get_or_insert_with(|| self.constant_lists());
        let mut covered = BitSet::new(x.len());
        for c in x.iter() {
            if covered.contains(c) {
                continue;
            }
            match lists[c].iter().map(|&j| &self.atoms[j].upper).find(|u| u.is_proper_subset(x)) {
                Some(u) => covered.union_with(u),
                None => return false,
            }
        }
        true
    }

    /// For each constant, the atoms above it, narrowest first.
    fn constant_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.width()];
        let mut order: Vec<usize> = (0..self.atoms.len()).collect();
        order.sort_by_key(|&i| self.atoms[i].size());
        for i in order {
            for c in self.atoms[i].upper.iter() {
                lists[c].push(i);
            }
        }
        lists
    }

    /// Indices (among `candidates`) of atoms that are redundant in this model.
    pub(crate) fn redundant_among(&self, candidates: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut lists = None;
        candidates.into_iter().filter(|&i| self.covered(&self.atoms[i].upper, &mut lists)).collect()
    }

    /// The unique non-redundant atomization of the same semilattice.
    pub fn remove_redundant(&self) -> Model {
        let red = self.redundant_among(0..self.atoms.len());
        let mut m = self.clone();
        m.remove_indices(&red);
        m
    }

    /// Upper sets as sorted index lists, sorted; convenient for set comparisons.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut v: Vec<Vec<usize>> = self.atoms.iter().map(|a| a.upper.to_vec()).collect();
        v.sort();
        v
    }

    pub fn size_histogram(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut h = std::collections::BTreeMap::new();
        for a in &self.atoms {
            *h.entry(a.size()).or_insert(0) += 1;
        }
        h
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Model> {
        let j: ModelJson = serde_json::from_str(s)?;
        j.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        Model::from_json(&std::fs::read_to_string(path)?)
    }
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.atoms.iter()).finish()
    }
}

/// The term over the constants outside `atom`, or `None` for an atom above every constant.
pub fn pinning_term(atom: &Atom) -> Option<Term> {
    Term::from_bits(atom.upper.complement()).ok()
}

/// On-disk form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub constants: Vec<String>,
    pub atoms: Vec<Vec<usize>>,
    pub stats: Vec<(u32, u64)>,
}

impl From<&Model> for ModelJson {
    fn from(m: &Model) -> Self {
        ModelJson {
            constants: m.universe.names().to_vec(),
            atoms: m.atoms.iter().map(|a| a.upper.to_vec()).collect(),
            stats: m.atoms.iter().map(|a| (a.g, a.birth)).collect(),
        }
    }
}

impl ModelJson {
    pub fn into_model(self) -> Result<Model> {
        let universe = Arc::new(Universe::new(self.constants)?);
        if self.stats.len() != self.atoms.len() {
            return Err(Error::Format(format!("{} atoms but {} stats", self.atoms.len(), self.stats.len())));
        }
        let n = universe.len();
        let mut m = Model::empty(universe);
        for (ids, (g, birth)) in self.atoms.into_iter().zip(self.stats) {
            if ids.is_empty() {
                return Err(Error::Format("atom with empty upper segment".into()));
            }
            if let Some(&c) = ids.iter().find(|&&c| c >= n) {
                return Err(Error::Format(format!("constant index {c} out of range")));
            }
            m.insert(Atom::with_stats(BitSet::from_indices(n, ids), g, birth));
        }
        Ok(m)
    }
}
