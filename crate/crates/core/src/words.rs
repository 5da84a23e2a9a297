//! Words and truncated tensor series.
//!
//! A [`Word`] `γ₁…γₙ` over the alphabet `1..=d` indexes one coefficient of a
//! tensor series. [`TensorPolynomial`] stores every coefficient up to a
//! truncation level `N`, densely per level: the coefficient of `γ₁…γₙ` sits
//! at the base-`d` lexicographic index `Σ (γᵢ − 1)·d^{n−i}`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// A finite sequence of letters in `1..=dim`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    dim: usize,
    letters: Vec<usize>,
}

impl Word {
    pub fn new(dim: usize, letters: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: 0.0,
                reason: "dimension must be positive",
            });
        }
        if let Some(&letter) = letters.iter().find(|&&l| l == 0 || l > dim) {
            return Err(Error::InvalidLetter { letter, dim });
        }
        Ok(Self { dim, letters })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            letters: Vec::new(),
        }
    }

    /// The word of length `level` whose lexicographic index is `index`.
    pub fn from_index(dim: usize, level: usize, mut index: usize) -> Self {
        let mut letters = vec![0; level];
        for slot in letters.iter_mut().rev() {
            *slot = index % dim + 1;
            index /= dim;
        }
        Self { dim, letters }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Lexicographic index of the word within its level.
    pub fn index(&self) -> usize {
        self.letters
            .iter()
            .fold(0, |acc, &l| acc * self.dim + (l - 1))
    }

    pub fn concat(&self, other: &Word) -> Word {
        assert_eq!(self.dim, other.dim, "words over different alphabets");
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word {
            dim: self.dim,
            letters,
        }
    }

    /// All words of length `level` in lexicographic order.
    pub fn all(dim: usize, level: usize) -> impl Iterator<Item = Word> {
        (0..dim.pow(level as u32)).map(move |i| Word::from_index(dim, level, i))
    }
}

/// Letters joined by commas, e.g. `1,1,2,2`; the empty word renders as ``.
impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// All interleavings of `w1` and `w2` that preserve the internal order of
/// each, with multiplicity. There are `C(|w1|+|w2|, |w1|)` of them.
///
/// Panics if the words are over different alphabets.
pub fn shuffle(w1: &Word, w2: &Word) -> Vec<Word> {
    assert_eq!(w1.dim, w2.dim, "words over different alphabets");
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(w1.len() + w2.len());
    shuffle_into(&w1.letters, &w2.letters, &mut buf, &mut out, w1.dim);
    out
}

fn shuffle_into(a: &[usize], b: &[usize], buf: &mut Vec<usize>, out: &mut Vec<Word>, dim: usize) {
    if a.is_empty() || b.is_empty() {
        let mut letters = buf.clone();
        letters.extend_from_slice(a);
        letters.extend_from_slice(b);
        out.push(Word { dim, letters });
        return;
    }
    buf.push(a[0]);
    shuffle_into(&a[1..], b, buf, out, dim);
    buf.pop();
    buf.push(b[0]);
    shuffle_into(a, &b[1..], buf, out, dim);
    buf.pop();
}

/// Element of the truncated tensor algebra `⊕_{n ≤ N} (ℝ^d)^{⊗n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorPolynomial {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl TensorPolynomial {
    pub fn zero(dim: usize, depth: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        let levels = (0..=depth).map(|n| vec![0.0; dim.pow(n as u32)]).collect();
        Self { dim, depth, levels }
    }

    /// The unit `1 + 0 + 0 + …`.
    pub fn identity(dim: usize, depth: usize) -> Self {
        let mut p = Self::zero(dim, depth);
        p.levels[0][0] = 1.0;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truncation level `N`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.levels[n]
    }

    /// Coefficient of `w`, or `None` when `w` is longer than the truncation
    /// level or over another alphabet.
    pub fn coeff(&self, w: &Word) -> Option<f64> {
        if w.dim != self.dim || w.len() > self.depth {
            return None;
        }
        Some(self.levels[w.len()][w.index()])
    }

    /// Coefficient of `w`; panics when `w` is not stored.
    pub fn get(&self, w: &Word) -> f64 {
        self.coeff(w).expect("word not stored in this tensor polynomial")
    }

    pub fn set(&mut self, w: &Word, value: f64) -> Result<()> {
        if w.dim != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: w.dim,
            });
        }
        if w.len() > self.depth {
            return Err(Error::LengthMismatch {
                expected: self.depth,
                got: w.len(),
            });
        }
        self.levels[w.len()][w.index()] = value;
        Ok(())
    }

    /// `(word, coefficient)` pairs, level by level.
    pub fn iter(&self) -> impl Iterator<Item = (Word, f64)> + '_ {
        self.levels.iter().enumerate().flat_map(move |(n, lvl)| {
            lvl.iter()
                .enumerate()
                .map(move |(i, &c)| (Word::from_index(self.dim, n, i), c))
        })
    }

    /// Signature of the straight segment with the given increment:
    /// coefficient of `γ₁…γₙ` is `∏ increment[γᵢ] / n!`.
    pub fn exp(increment: &[f64], depth: usize) -> Self {
        let mut p = Self::identity(increment.len(), depth);
        p.fill_exp(increment);
        p
    }

    fn fill_exp(&mut self, increment: &[f64]) {
        let d = self.dim;
        self.levels[0][0] = 1.0;
        for n in 1..=self.depth {
            let (lower, upper) = self.levels.split_at_mut(n);
            let prev = &lower[n - 1];
            let cur = &mut upper[0];
            let inv = 1.0 / n as f64;
            for (i, &p) in prev.iter().enumerate() {
                for (j, &x) in increment.iter().enumerate() {
                    cur[i * d + j] = p * x * inv;
                }
            }
        }
    }

    /// Concatenation product `a ⊗ b`, truncated at the common level.
    pub fn chen_product(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero(self.dim, self.depth);
        self.chen_product_into(other, &mut out)?;
        Ok(out)
    }

    /// [`chen_product`](Self::chen_product) writing into a preallocated
    /// output of the same shape.
    pub fn chen_product_into(&self, other: &Self, out: &mut Self) -> Result<()> {
        self.check_shape(other)?;
        self.check_shape(out)?;
        let d = self.dim;
        for n in 0..=self.depth {
            let dst = &mut out.levels[n];
            dst.iter_mut().for_each(|c| *c = 0.0);
            for i in 0..=n {
                let left = &self.levels[i];
                let right = &other.levels[n - i];
                let stride = d.pow((n - i) as u32);
                for (li, &a) in left.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let base = li * stride;
                    for (ri, &b) in right.iter().enumerate() {
                        dst[base + ri] += a * b;
                    }
                }
            }
        }
        Ok(())
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.depth != other.depth {
            return Err(Error::TruncationMismatch {
                left: self.depth,
                right: other.depth,
            });
        }
        Ok(())
    }

    /// Whether the level-0 coefficient is 1 to within `tol`.
    pub fn is_group_like(&self, tol: f64) -> bool {
        (self.levels[0][0] - 1.0).abs() <= tol
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Reusable signature accumulator for piecewise-linear paths: multiplies by
/// the exponential of one segment at a time without reallocating.
#[derive(Debug, Clone)]
pub struct SegmentProduct {
    acc: TensorPolynomial,
    seg: TensorPolynomial,
    tmp: TensorPolynomial,
}

impl SegmentProduct {
    pub fn new(dim: usize, depth: usize) -> Self {
        Self {
            acc: TensorPolynomial::identity(dim, depth),
            seg: TensorPolynomial::identity(dim, depth),
            tmp: TensorPolynomial::zero(dim, depth),
        }
    }

    pub fn reset(&mut self) {
        self.acc.levels.iter_mut().flatten().for_each(|c| *c = 0.0);
        self.acc.levels[0][0] = 1.0;
    }

    pub fn push(&mut self, increment: &[f64]) {
        self.seg.fill_exp(increment);
        self.acc
            .chen_product_into(&self.seg, &mut self.tmp)
            .expect("shapes fixed at construction");
        core::mem::swap(&mut self.acc, &mut self.tmp);
    }

    pub fn value(&self) -> &TensorPolynomial {
        &self.acc
    }

    pub fn into_value(self) -> TensorPolynomial {
        self.acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;
    use alloc::vec;

    fn w(dim: usize, letters: &[usize]) -> Word {
        Word::new(dim, letters.to_vec()).unwrap()
    }

    fn multiset(words: Vec<Word>) -> BTreeMap<Vec<usize>, usize> {
        let mut m = BTreeMap::new();
        for word in words {
            *m.entry(word.letters).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn word_rejects_out_of_range_letters() {
        assert_eq!(
            Word::new(2, vec![1, 3]),
            Err(Error::InvalidLetter { letter: 3, dim: 2 })
        );
        assert!(Word::new(2, vec![0]).is_err());
    }

    #[test]
    fn word_index_round_trip() {
        for i in 0..27 {
            assert_eq!(Word::from_index(3, 3, i).index(), i);
        }
        assert_eq!(w(2, &[1, 1, 2, 2]).to_string(), "1,1,2,2");
        assert_eq!(Word::empty(2).to_string(), "");
    }

    #[test]
    fn shuffle_of_single_letters() {
        let got = multiset(shuffle(&w(2, &[1]), &w(2, &[2])));
        let want = multiset(vec![w(2, &[1, 2]), w(2, &[2, 1])]);
        assert_eq!(got, want);
    }

    #[test]
    fn shuffle_matches_brute_force_enumeration() {
        // Every choice of 2 out of 4 slots for the letters of (1,1).
        let mut brute = Vec::new();
        for mask in 0u32..16 {
            if mask.count_ones() != 2 {
                continue;
            }
            let letters: Vec<usize> = (0..4).map(|i| if mask >> i & 1 == 1 { 1 } else { 2 }).collect();
            brute.push(Word::new(2, letters).unwrap());
        }
        let got = shuffle(&w(2, &[1, 1]), &w(2, &[2, 2]));
        assert_eq!(got.len(), 6);
        assert_eq!(multiset(got), multiset(brute));
        let distinct: Vec<_> = multiset(shuffle(&w(2, &[1, 1]), &w(2, &[2, 2])))
            .into_keys()
            .collect();
        assert_eq!(
            distinct,
            vec![
                vec![1, 1, 2, 2],
                vec![1, 2, 1, 2],
                vec![1, 2, 2, 1],
                vec![2, 1, 1, 2],
                vec![2, 1, 2, 1],
                vec![2, 2, 1, 1]
            ]
        );
    }

    #[test]
    fn shuffle_with_empty_word() {
        let word = w(3, &[3, 1, 2]);
        assert_eq!(shuffle(&Word::empty(3), &word), vec![word.clone()]);
        assert_eq!(shuffle(&word, &Word::empty(3)), vec![word]);
    }

    #[test]
    fn exp_of_scalar_increment() {
        let p = TensorPolynomial::exp(&[2.0], 3);
        let got: Vec<f64> = (0..=3).map(|n| p.level(n)[0]).collect();
        assert_eq!(got[..3], [1.0, 2.0, 2.0]);
        assert!((got[3] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(TensorPolynomial::exp(&[0.0, 0.0], 4), TensorPolynomial::identity(2, 4));
    }

    #[test]
    fn exp_inverse_is_negated_increment() {
        let v = [0.3, -1.2, 0.7];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let p = TensorPolynomial::exp(&v, 5)
            .chen_product(&TensorPolynomial::exp(&neg, 5))
            .unwrap();
        assert!(p.max_abs_diff(&TensorPolynomial::identity(3, 5)) < 1e-14);
    }

    #[test]
    fn chen_product_unit_and_single_splitting() {
        let b = TensorPolynomial::exp(&[0.5, -0.25], 3);
        let id = TensorPolynomial::identity(2, 3);
        assert_eq!(id.chen_product(&b).unwrap(), b);
        assert_eq!(b.chen_product(&id).unwrap(), b);

        let mut a = TensorPolynomial::zero(2, 2);
        let mut c = TensorPolynomial::zero(2, 2);
        a.set(&w(2, &[2]), 3.0).unwrap();
        c.set(&w(2, &[2]), 5.0).unwrap();
        let p = a.chen_product(&c).unwrap();
        assert_eq!(p.get(&w(2, &[2, 2])), 15.0);
        assert_eq!(p.get(&w(2, &[2])), 0.0);
    }

    #[test]
    fn chen_product_shape_errors() {
        let a = TensorPolynomial::zero(2, 3);
        assert_eq!(
            a.chen_product(&TensorPolynomial::zero(3, 3)),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        );
        assert_eq!(
            a.chen_product(&TensorPolynomial::zero(2, 2)),
            Err(Error::TruncationMismatch { left: 3, right: 2 })
        );
    }

    #[test]
    fn coefficients_beyond_truncation_are_not_stored() {
        let p = TensorPolynomial::identity(2, 2);
        assert_eq!(p.coeff(&w(2, &[1, 1, 1])), None);
        assert!(p.clone().set(&w(2, &[1, 1, 1]), 1.0).is_err());
        assert!(p.is_group_like(0.0));
    }

    /// Left-point Riemann sums of the level-2 iterated integrals of a
    /// piecewise-linear path, step `h`.
    fn riemann_level2(points: &[[f64; 2]], h: f64) -> [[f64; 2]; 2] {
        let mut samples = Vec::new();
        for seg in points.windows(2) {
            let steps = (1.0 / h).round() as usize;
            for k in 0..steps {
                let a = k as f64 / steps as f64;
                samples.push([
                    seg[0][0] + a * (seg[1][0] - seg[0][0]),
                    seg[0][1] + a * (seg[1][1] - seg[0][1]),
                ]);
            }
        }
        samples.push(*points.last().unwrap());
        let mut s2 = [[0.0; 2]; 2];
        let x0 = samples[0];
        for pair in samples.windows(2) {
            let dx = [pair[1][0] - pair[0][0], pair[1][1] - pair[0][1]];
            // Midpoint value of the running level-1 term keeps the sum second order.
            let mid = [
                0.5 * (pair[0][0] + pair[1][0]) - x0[0],
                0.5 * (pair[0][1] + pair[1][1]) - x0[1],
            ];
            for i in 0..2 {
                for j in 0..2 {
                    s2[i][j] += mid[i] * dx[j];
                }
            }
        }
        s2
    }

    #[test]
    fn two_segment_signature_matches_riemann_sums() {
        let v = [0.8, -0.3];
        let u = [-0.4, 1.1];
        let sig = TensorPolynomial::exp(&v, 2)
            .chen_product(&TensorPolynomial::exp(&u, 2))
            .unwrap();
        let oracle = riemann_level2(&[[0.0, 0.0], v, [v[0] + u[0], v[1] + u[1]]], 1e-4);
        for i in 0..2 {
            for j in 0..2 {
                let got = sig.get(&w(2, &[i + 1, j + 1]));
                assert!((got - oracle[i][j]).abs() <= 1e-6 * got.abs().max(1.0), "{i}{j}");
            }
        }
    }

    #[test]
    fn segment_product_matches_chen_products() {
        let incs = [[0.1, 0.2], [-0.3, 0.05], [0.7, -0.6]];
        let mut acc = SegmentProduct::new(2, 4);
        let mut direct = TensorPolynomial::identity(2, 4);
        for inc in &incs {
            acc.push(inc);
            direct = direct.chen_product(&TensorPolynomial::exp(inc, 4)).unwrap();
        }
        assert!(acc.value().max_abs_diff(&direct) < 1e-15);
        acc.reset();
        assert_eq!(acc.value(), &TensorPolynomial::identity(2, 4));
    }
}
