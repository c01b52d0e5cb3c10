//! The n×n vertical-bar toy task: an image is positive when its first
//! column is black and no other column is.
//!
//! Images are bit masks with bit `r * n + c` set for a black pixel.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;

use crate::core::{Axioms, Duple, Term, Universe};
use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct VerticalBar {
    pub n: usize,
    pub universe: Arc<Universe>,
}

impl VerticalBar {
    pub fn new(n: usize) -> Result<VerticalBar> {
        if !(2..=8).contains(&n) {
            return invalid("vertical-bar side must be in 2..=8");
        }
        let mut names = Vec::with_capacity(2 * n * n + 1);
        for r in 1..=n {
            for c in 1..=n {
                names.push(format!("b({r},{c})"));
                names.push(format!("w({r},{c})"));
            }
        }
        names.push("p".to_string());
        Ok(VerticalBar { n, universe: Arc::new(Universe::new(names)?) })
    }

    pub fn width(&self) -> usize {
        self.universe.len()
    }

    /// Zero-based row and column.
    pub fn black(&self, r: usize, c: usize) -> usize {
        2 * (r * self.n + c)
    }

    pub fn white(&self, r: usize, c: usize) -> usize {
        2 * (r * self.n + c) + 1
    }

    pub fn label(&self) -> usize {
        2 * self.n * self.n
    }

    fn column_black(&self, mask: u64, c: usize) -> bool {
        (0..self.n).all(|r| mask >> (r * self.n + c) & 1 == 1)
    }

    pub fn is_positive(&self, mask: u64) -> bool {
        self.column_black(mask, 0) && (1..self.n).all(|c| !self.column_black(mask, c))
    }

    pub fn term(&self, mask: u64) -> Term {
        let ids = (0..self.n * self.n).map(|i| if mask >> i & 1 == 1 { 2 * i } else { 2 * i + 1 });
        Term::new(self.width(), ids).expect("pixel constants in range")
    }

    pub fn label_term(&self) -> Term {
        Term::constant(self.width(), self.label()).expect("label in range")
    }

    /// All positive images, `(2^n − 1)^(n−1)` of them.
    pub fn positives(&self) -> Vec<u64> {
        let n = self.n;
        let col = |c: usize, bits: u64| (0..n).fold(0u64, |m, r| m | ((bits >> r & 1) << (r * n + c)));
        let mut out = vec![col(0, (1 << n) - 1)];
        for c in 1..n {
            let mut next = Vec::with_capacity(out.len() * ((1 << n) - 1));
            for &m in &out {
                for bits in 0..(1u64 << n) - 1 {
                    next.push(m | col(c, bits));
                }
            }
            out = next;
        }
        out.sort_unstable();
        out
    }

    /// Every image breaking the rule; only practical for small `n`.
    pub fn all_negatives(&self) -> Result<Vec<u64>> {
        if self.n * self.n > 20 {
            return invalid("too many images to enumerate");
        }
        Ok((0..1u64 << (self.n * self.n)).filter(|&m| !self.is_positive(m)).collect())
    }

    /// `count` distinct random negatives, drawn uniformly.
    pub fn sample_negatives<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<u64> {
        let bits = self.n * self.n;
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let m = rng.gen::<u64>() & if bits == 64 { !0 } else { (1 << bits) - 1 };
            if !self.is_positive(m) && seen.insert(m) {
                out.push(m);
            }
        }
        out
    }

    /// `p ≤ T` for positives and `p ≰ T` for negatives.
    pub fn axioms(&self, positives: &[u64], negatives: &[u64]) -> Axioms {
        let p = self.label_term();
        Axioms {
            positives: positives.iter().map(|&m| Duple::positive(p.clone(), self.term(m))).collect(),
            negatives: negatives.iter().map(|&m| Duple::negative(p.clone(), self.term(m))).collect(),
        }
    }
}

/// The positive images and, with `full_count`, every negative image.
pub fn generate_vertical_bar_dataset(n: usize, full_count: bool) -> Result<(VerticalBar, Vec<u64>, Vec<u64>)> {
    let vb = VerticalBar::new(n)?;
    let pos = vb.positives();
    let neg = if full_count { vb.all_negatives()? } else { Vec::new() };
    Ok((vb, pos, neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_enumeration() {
        for n in 2..=4 {
            let vb = VerticalBar::new(n).unwrap();
            let pos = vb.positives();
            let brute = (0..1u64 << (n * n)).filter(|&m| vb.is_positive(m)).count();
            assert_eq!(pos.len(), brute);
            assert_eq!(pos.len(), ((1usize << n) - 1).pow(n as u32 - 1));
            assert!(pos.iter().all(|&m| vb.is_positive(m)));
        }
    }

    #[test]
    fn term_has_one_constant_per_pixel() {
        let vb = VerticalBar::new(4).unwrap();
        let t = vb.term(vb.positives()[0]);
        assert_eq!(t.len(), 16);
        for r in 0..4 {
            assert!(t.contains(vb.black(r, 0)));
        }
        assert_eq!(vb.width(), 33);
    }
}
