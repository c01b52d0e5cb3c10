//! Task embeddings: images, labelled classification, vertical bars and
//! Hamiltonian cycles.

pub mod hamiltonian;
pub mod idx;
pub mod vertical_bar;

use std::path::Path;
use std::sync::Arc;

use crate::core::{Axioms, Duple, Term, Universe};
use crate::error::{invalid, Error, Result};

pub use hamiltonian::{
    add_unwanted_path, build_hamiltonian_embedding, can_extend_to_cycle, interpret_path, is_hamiltonian_cycle,
    Graph, HamiltonianEmbedding, PathReading,
};
pub use vertical_bar::{generate_vertical_bar_dataset, VerticalBar};

pub const DEFAULT_THRESHOLD: u8 = 128;

/// Layout of the constants used for images of a fixed shape.
///
/// With `levels == 2` every pixel and channel has a black and a white
/// constant. Otherwise it has two chains `l(v)` and `g(v)`, `v < levels`.
/// Label constants come last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub levels: usize,
    pub classes: usize,
}

impl ImageSpec {
    pub fn binary(height: usize, width: usize, classes: usize) -> ImageSpec {
        ImageSpec { height, width, channels: 1, levels: 2, classes }
    }

    pub fn graded(height: usize, width: usize, channels: usize, levels: usize, classes: usize) -> ImageSpec {
        ImageSpec { height, width, channels, levels, classes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return invalid("levels must be at least 2");
        }
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return invalid("image dimensions must be positive");
        }
        Ok(())
    }

    pub fn is_binary(&self) -> bool {
        self.levels == 2
    }

    pub fn cells(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn constants_per_cell(&self) -> usize {
        if self.is_binary() {
            2
        } else {
            2 * self.levels
        }
    }

    pub fn constant_count(&self) -> usize {
        self.cells() * self.constants_per_cell() + self.classes
    }

    pub fn label_constant(&self, class: usize) -> usize {
        self.cells() * self.constants_per_cell() + class
    }

    pub fn label_constants(&self) -> Vec<usize> {
        (0..self.classes).map(|k| self.label_constant(k)).collect()
    }

    fn cell(&self, r: usize, c: usize, k: usize) -> usize {
        (r * self.width + c) * self.channels + k
    }

    pub fn black(&self, r: usize, c: usize, k: usize) -> usize {
        2 * self.cell(r, c, k)
    }

    pub fn white(&self, r: usize, c: usize, k: usize) -> usize {
        2 * self.cell(r, c, k) + 1
    }

    pub fn lower(&self, r: usize, c: usize, k: usize, v: usize) -> usize {
        self.cell(r, c, k) * 2 * self.levels + v
    }

    pub fn upper(&self, r: usize, c: usize, k: usize, v: usize) -> usize {
        self.cell(r, c, k) * 2 * self.levels + self.levels + v
    }

    pub fn universe(&self) -> Result<Universe> {
        self.validate()?;
        let mut names = Vec::with_capacity(self.constant_count());
        for r in 0..self.height {
            for c in 0..self.width {
                for k in 0..self.channels {
                    let at = if self.channels == 1 { format!("{r},{c}") } else { format!("{r},{c},{k}") };
                    if self.is_binary() {
                        names.push(format!("b({at})"));
                        names.push(format!("w({at})"));
                    } else {
                        names.extend((0..self.levels).map(|v| format!("l({at};{v})")));
                        names.extend((0..self.levels).map(|v| format!("g({at};{v})")));
                    }
                }
            }
        }
        names.extend((0..self.classes).map(|k| format!("label{k}")));
        Universe::new(names)
    }

    /// Term of a binary image given row-major pixels (`true` = black).
    pub fn embed_binary(&self, pixels: &[bool]) -> Result<Term> {
        if !self.is_binary() {
            return invalid("binary embedding needs levels = 2");
        }
        if pixels.len() != self.cells() {
            return invalid(format!("expected {} pixels, got {}", self.cells(), pixels.len()));
        }
        let ids = pixels.iter().enumerate().map(|(i, &b)| 2 * i + usize::from(!b));
        Term::new(self.constant_count(), ids)
    }

    /// Term of a graded image: one `l` and one `g` constant per pixel and
    /// channel. Intensities are already in `0..levels`.
    pub fn embed_graded(&self, intensities: &[u16]) -> Result<Term> {
        if intensities.len() != self.cells() {
            return invalid(format!("expected {} values, got {}", self.cells(), intensities.len()));
        }
        if let Some(&x) = intensities.iter().find(|&&x| x as usize >= self.levels) {
            return invalid(format!("intensity {x} outside 0..{}", self.levels));
        }
        if self.is_binary() {
            let px: Vec<bool> = intensities.iter().map(|&x| x == 1).collect();
            return self.embed_binary(&px);
        }
        let l = self.levels;
        let ids = intensities.iter().enumerate().flat_map(|(i, &x)| [i * 2 * l + x as usize, i * 2 * l + l + x as usize]);
        Term::new(self.constant_count(), ids)
    }

    /// `l(v) ≤ l(v+1)` and `g(v+1) ≤ g(v)` for every cell; none for binary layouts.
    pub fn chain_duples(&self) -> Vec<Duple> {
        if self.is_binary() {
            return Vec::new();
        }
        let n = self.constant_count();
        let l = self.levels;
        let mut out = Vec::with_capacity(self.cells() * 2 * (l - 1));
        for cell in 0..self.cells() {
            let base = cell * 2 * l;
            for v in 0..l - 1 {
                let t = |c| Term::constant(n, c).expect("in range");
                out.push(Duple::positive(t(base + v), t(base + v + 1)));
                out.push(Duple::positive(t(base + l + v + 1), t(base + l + v)));
            }
        }
        out
    }

    /// Maps a byte intensity onto `0..levels`.
    pub fn downsample(&self, x: u8) -> u16 {
        (x as usize * self.levels / 256) as u16
    }

    /// Embeds a byte image, thresholding for binary layouts.
    pub fn embed_bytes(&self, bytes: &[u8], threshold: u8) -> Result<Term> {
        if self.is_binary() {
            let px: Vec<bool> = bytes.iter().map(|&x| binarize(x, threshold)).collect();
            self.embed_binary(&px)
        } else {
            let v: Vec<u16> = bytes.iter().map(|&x| self.downsample(x)).collect();
            self.embed_graded(&v)
        }
    }
}

/// A pixel is black when its intensity reaches the threshold.
pub fn binarize(x: u8, threshold: u8) -> bool {
    x >= threshold
}

/// One positive `label_c ≤ term` and negatives `label_j ≰ term` for every
/// other class, per example.
pub fn build_classification_axioms(examples: &[(Term, usize)], labels: &[usize]) -> Result<Axioms> {
    let mut ax = Axioms::default();
    for g in classification_groups(examples, labels)? {
        ax.extend(&g);
    }
    Ok(ax)
}

/// Same duples as [`build_classification_axioms`], grouped per example.
pub fn classification_groups(examples: &[(Term, usize)], labels: &[usize]) -> Result<Vec<Axioms>> {
    let mut out = Vec::with_capacity(examples.len());
    for (t, class) in examples {
        if *class >= labels.len() {
            return invalid(format!("class {class} outside 0..{}", labels.len()));
        }
        let n = t.width();
        let label = |k: usize| Term::constant(n, labels[k]);
        let positives = vec![Duple::positive(label(*class)?, t.clone())];
        let negatives = (0..labels.len())
            .filter(|k| k != class)
            .map(|k| Ok(Duple::negative(label(k)?, t.clone())))
            .collect::<Result<Vec<_>>>()?;
        out.push(Axioms { positives, negatives });
    }
    Ok(out)
}

/// A labelled image set ready for training or evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: ImageSpec,
    pub universe: Arc<Universe>,
    pub examples: Vec<(Term, usize)>,
}

impl Dataset {
    pub fn from_idx(
        spec: ImageSpec,
        images: &idx::IdxImages,
        labels: &[u8],
        limit: Option<usize>,
        threshold: u8,
    ) -> Result<Dataset> {
        if images.count != labels.len() {
            return invalid(format!("{} images but {} labels", images.count, labels.len()));
        }
        if images.rows * images.cols != spec.height * spec.width * spec.channels {
            return invalid("image size does not match the embedding layout");
        }
        let n = limit.unwrap_or(images.count).min(images.count);
        let examples = (0..n)
            .map(|i| Ok((spec.embed_bytes(images.image(i), threshold)?, labels[i] as usize)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { universe: Arc::new(spec.universe()?), spec, examples })
    }

    pub fn label_constants(&self) -> Vec<usize> {
        self.spec.label_constants()
    }

    pub fn groups(&self) -> Result<Vec<Axioms>> {
        classification_groups(&self.examples, &self.label_constants())
    }
}

/// Terms as sorted constant lists, one per line of JSON.
pub fn save_terms(terms: &[Term], path: impl AsRef<Path>) -> Result<()> {
    let lists: Vec<Vec<usize>> = terms.iter().map(|t| t.constants().to_vec()).collect();
    std::fs::write(path, serde_json::to_string(&(terms.first().map_or(0, |t| t.width()), lists))?)?;
    Ok(())
}

pub fn load_terms(path: impl AsRef<Path>) -> Result<Vec<Term>> {
    let (n, lists): (usize, Vec<Vec<usize>>) = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    lists.into_iter().map(|l| Term::new(n, l).map_err(|e| Error::Format(e.to_string()))).collect()
}
