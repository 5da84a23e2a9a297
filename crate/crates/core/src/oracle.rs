//! Exact expectations for piecewise-linear approximations on a uniform grid.
//!
//! The piecewise-linear interpolation `Xˡ` of a path on `ℓ` equal cells has
//! derivative `ρ⁻¹X_{Δₖ}` on cell `k`, so every iterated integral of `Xˡ`
//! splits into a sum over weakly increasing cell assignments
//! `k₁ ≤ … ≤ kₙ`. The part of the simplex inside such a box has volume
//! `ρⁿ ∏ⱼ 1/rⱼ!` where the `rⱼ` are the lengths of the runs of equal cells;
//! the `ρ` factors cancel against the derivatives, leaving
//!
//! ```text
//! Σ_{k₁ ≤ … ≤ kₙ} ∏ⱼ 1/rⱼ! · ∏_{pairs {i,j}} G[kᵢ][kⱼ]
//! ```
//!
//! for a full pairing, with `G` the Gram matrix of the cell increments. A
//! free position `k` contributes `ρ⁻¹𝟙_{cell(uₖ)}(vₖ)`, which after
//! integration pins `kₖ` to the cell containing `vₖ`.

use alloc::vec;
use alloc::vec::Vec;

use crate::covariance::CovarianceModel;
use crate::diagrams::{enumerate_pairings, index_compatible, Diagram};
use crate::linalg::psd_rank;
use crate::words::Word;
use crate::{Error, Result};

/// Default bound on the number of cell assignments one evaluation may visit.
pub const DEFAULT_TERM_BUDGET: u64 = 100_000_000;

/// Largest word length accepted by the oracle.
pub const MAX_LEVEL: usize = 6;

/// Tolerance of the positive semidefiniteness check of the Gram matrix.
pub const GRAM_PSD_TOL: f64 = 1e-10;

/// `ℓ` equal cells `[s + kρ, s + (k+1)ρ)` of `[s, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    s: f64,
    t: f64,
    cells: usize,
}

impl UniformGrid {
    pub fn new(s: f64, t: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidParameter {
                name: "cells",
                value: 0.0,
                reason: "a grid needs at least one cell",
            });
        }
        if !(s.is_finite() && t.is_finite() && s >= 0.0 && s < t) {
            return Err(Error::Domain("grid interval must satisfy 0 ≤ s < t"));
        }
        Ok(Self { s, t, cells })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// The cell length `ρ = (t − s)/ℓ`.
    pub fn step(&self) -> f64 {
        (self.t - self.s) / self.cells as f64
    }

    /// Grid point `k ∈ 0..=ℓ`; the last one is `t` exactly.
    pub fn point(&self, k: usize) -> f64 {
        if k >= self.cells {
            self.t
        } else {
            self.s + k as f64 * self.step()
        }
    }

    /// The cell containing `v`, `None` outside `(s, t)`. Grid points are
    /// rejected since the piecewise-linear kernels are only defined between
    /// them.
    pub fn locate(&self, v: f64) -> Result<Option<usize>> {
        if !(v > self.s && v < self.t) {
            if v == self.s || v == self.t {
                return Err(Error::Domain("free time lies on a grid point"));
            }
            return Ok(None);
        }
        let k = (libm::floor((v - self.s) / self.step()) as usize).min(self.cells - 1);
        // Rounding in the division can misplace points next to a boundary.
        let k = if v < self.point(k) {
            k - 1
        } else if v >= self.point(k + 1) {
            k + 1
        } else {
            k
        };
        if v == self.point(k) {
            return Err(Error::Domain("free time lies on a grid point"));
        }
        Ok(Some(k))
    }
}

/// Gram matrix `G[i][j] = R(Δᵢ, Δⱼ)` of the cell increments of one
/// component.
#[derive(Debug, Clone)]
pub struct IncrementGram {
    grid: UniformGrid,
    g: Vec<f64>,
}

impl IncrementGram {
    pub fn new<M: CovarianceModel + ?Sized>(model: &M, grid: UniformGrid) -> Result<Self> {
        if grid.t() > model.horizon() {
            return Err(Error::Domain("grid extends beyond the model horizon"));
        }
        let n = grid.cells();
        let rho = grid.step();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            let (a, b) = (grid.point(i), grid.point(i + 1));
            g[i * n + i] = 2.0 * model.half_increment_var(a, b, b - a);
            for j in i + 1..n {
                let (c, d) = (grid.point(j), grid.point(j + 1));
                let gap = (j - i - 1) as f64 * rho;
                let v = model.inc_cov_ordered([a, b, c, d], [b - a, gap, d - c]);
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        Ok(Self { grid, g })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.cells() + j]
    }

    /// Row-major `ℓ × ℓ` entries.
    pub fn matrix(&self) -> &[f64] {
        &self.g
    }

    /// Numerical rank, failing if the matrix is indefinite beyond
    /// [`GRAM_PSD_TOL`].
    pub fn check_psd(&self) -> Result<usize> {
        psd_rank(&self.g, self.cells(), GRAM_PSD_TOL)
    }
}

/// `𝔼[Z₁⋯Zₙ]` for centred jointly Gaussian `Zᵢ` with row-major covariance
/// `cov`, as the sum over perfect matchings of products of covariances.
pub fn wick_moment(cov: &[f64], n: usize) -> f64 {
    assert_eq!(cov.len(), n * n, "covariance must be n × n");
    if n % 2 == 1 {
        return 0.0;
    }
    let mut used = vec![false; n];
    wick_rec(cov, n, &mut used)
}

fn wick_rec(cov: &[f64], n: usize, used: &mut [bool]) -> f64 {
    let Some(i) = used.iter().position(|&u| !u) else {
        return 1.0;
    };
    used[i] = true;
    let mut total = 0.0;
    for j in i + 1..n {
        if used[j] {
            continue;
        }
        let c = cov[i * n + j];
        if c != 0.0 {
            used[j] = true;
            total += c * wick_rec(cov, n, used);
            used[j] = false;
        }
    }
    used[i] = false;
    total
}

/// Lebesgue volume of `{u₁ < … < uₙ}` inside the box of the given weakly
/// increasing cells of length `step`: `stepⁿ ∏ⱼ 1/rⱼ!` over runs of equal
/// cells, and zero if the cells decrease anywhere.
pub fn ordered_box_volume(cells: &[usize], step: f64) -> f64 {
    let mut vol = 1.0;
    let mut run = 0;
    for (i, &c) in cells.iter().enumerate() {
        if i > 0 && c < cells[i - 1] {
            return 0.0;
        }
        run = if i > 0 && c == cells[i - 1] { run + 1 } else { 1 };
        vol *= step / run as f64;
    }
    vol
}

/// `C(cells + r − 1, r)`, the number of weakly increasing assignments of
/// `r` positions, saturating at `u64::MAX`.
fn assignment_count(cells: usize, r: usize) -> u64 {
    let mut c: u128 = 1;
    for i in 0..r as u128 {
        c = c * (cells as u128 + i) / (i + 1);
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

/// Exact expectations of the piecewise-linear approximation on one grid.
#[derive(Debug, Clone)]
pub struct PlOracle {
    gram: IncrementGram,
    budget: u64,
}

impl PlOracle {
    pub fn new<M: CovarianceModel + ?Sized>(model: &M, grid: UniformGrid) -> Result<Self> {
        Ok(Self {
            gram: IncrementGram::new(model, grid)?,
            budget: DEFAULT_TERM_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn gram(&self) -> &IncrementGram {
        &self.gram
    }

    pub fn grid(&self) -> &UniformGrid {
        self.gram.grid()
    }

    /// `𝔼𝒮(Xˡ)^{word}_{st}`, summing the full pairings compatible with the
    /// letters of `word`.
    pub fn expected_signature(&self, word: &Word) -> Result<f64> {
        let n = word.len();
        check_level(n)?;
        if n % 2 == 1 {
            return Ok(0.0);
        }
        let mut pairings = Vec::new();
        for d in enumerate_pairings(n, 0)? {
            if index_compatible(&d, word)? {
                pairings.push(d);
            }
        }
        self.sum(n, &pairings, &vec![None; n])
    }

    /// The piecewise-linear analogue `Pˡ_st` of a diagram without free
    /// positions, with index constraints dropped.
    pub fn diagram_scalar(&self, diagram: &Diagram) -> Result<f64> {
        if diagram.chaos_order() != 0 {
            return Err(Error::InvalidDiagram("diagram has free positions"));
        }
        check_level(diagram.n())?;
        self.sum(
            diagram.n(),
            core::slice::from_ref(diagram),
            &vec![None; diagram.n()],
        )
    }

    /// The piecewise-linear kernel `Pˡ(v)` of `diagram` for `word` at free
    /// times `free_times` carrying letters `free_indices`, both listed in
    /// the order of the diagram's singles.
    ///
    /// Free times must avoid grid points; times outside `(s, t)` give zero.
    pub fn chaos_kernel(
        &self,
        diagram: &Diagram,
        word: &Word,
        free_times: &[f64],
        free_indices: &[usize],
    ) -> Result<f64> {
        let n = diagram.n();
        check_level(n)?;
        let m = diagram.chaos_order();
        for len in [free_times.len(), free_indices.len()] {
            if len != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    got: len,
                });
            }
        }
        if !index_compatible(diagram, word)? {
            return Ok(0.0);
        }
        let letters = word.letters();
        let mut pinned = vec![None; n];
        for ((&pos, &v), &a) in diagram.singles().iter().zip(free_times).zip(free_indices) {
            if letters[pos - 1] != a {
                return Ok(0.0);
            }
            match self.grid().locate(v)? {
                Some(k) => pinned[pos - 1] = Some(k),
                None => return Ok(0.0),
            }
        }
        self.sum(n, core::slice::from_ref(diagram), &pinned)
    }

    /// `Σ_{k₁ ≤ … ≤ kₙ} ∏ 1/rⱼ! Σ_P ∏_{pairs of P} G[kᵢ][kⱼ]` with some
    /// positions pinned to a cell.
    fn sum(&self, n: usize, pairings: &[Diagram], pinned: &[Option<usize>]) -> Result<f64> {
        if pairings.is_empty() {
            return Ok(0.0);
        }
        let free = pinned.iter().filter(|p| p.is_none()).count();
        let count = assignment_count(self.gram.cells(), free);
        if count > self.budget {
            return Err(Error::Capability {
                what: "piecewise-linear assignment count",
                value: count,
                limit: self.budget,
            });
        }
        // earlier[p][i] is the earlier partner of position i in pairing p.
        let earlier: Vec<Vec<Option<usize>>> = pairings
            .iter()
            .map(|d| {
                let mut e = vec![None; n];
                for &(i, j) in d.pairs() {
                    e[j - 1] = Some(i - 1);
                }
                e
            })
            .collect();
        let np = pairings.len();
        let mut walk = Walk {
            gram: &self.gram,
            pinned,
            earlier: &earlier,
            cells: vec![0; n],
            prods: vec![1.0; (n + 1) * np],
            np,
        };
        Ok(walk.descend(0, 0, 0, 1.0))
    }
}

fn check_level(n: usize) -> Result<()> {
    if n > MAX_LEVEL {
        return Err(Error::Capability {
            what: "oracle word length",
            value: n as u64,
            limit: MAX_LEVEL as u64,
        });
    }
    Ok(())
}

/// Depth-first enumeration of weakly increasing assignments, carrying the
/// partial product of every pairing and pruning branches where all of them
/// vanish.
struct Walk<'a> {
    gram: &'a IncrementGram,
    pinned: &'a [Option<usize>],
    earlier: &'a [Vec<Option<usize>>],
    cells: Vec<usize>,
    prods: Vec<f64>,
    np: usize,
}

impl Walk<'_> {
    fn descend(&mut self, pos: usize, lo: usize, run: usize, weight: f64) -> f64 {
        let n = self.cells.len();
        let np = self.np;
        if pos == n {
            return weight * self.prods[n * np..].iter().sum::<f64>();
        }
        let (first, last) = match self.pinned[pos] {
            Some(k) if k < lo => return 0.0,
            Some(k) => (k, k),
            None => (lo, self.gram.cells() - 1),
        };
        let mut total = 0.0;
        for c in first..=last {
            let r = if pos > 0 && c == self.cells[pos - 1] {
                run + 1
            } else {
                1
            };
            self.cells[pos] = c;
            let mut alive = false;
            for p in 0..np {
                let mut v = self.prods[pos * np + p];
                if let Some(i) = self.earlier[p][pos] {
                    v *= self.gram.get(self.cells[i], c);
                }
                self.prods[(pos + 1) * np + p] = v;
                alive |= v != 0.0;
            }
            if alive {
                total += self.descend(pos + 1, c, r, weight / r as f64);
            }
        }
        total
    }
}

/// `𝔼𝒮(Xˡ)^{word}_{st}` on `grid` with the default term budget.
pub fn pl_expected_signature<M: CovarianceModel + ?Sized>(
    model: &M,
    grid: UniformGrid,
    word: &Word,
) -> Result<f64> {
    PlOracle::new(model, grid)?.expected_signature(word)
}

/// `Pˡ(v)` on `grid` with the default term budget; see
/// [`PlOracle::chaos_kernel`].
pub fn pl_chaos_kernel<M: CovarianceModel + ?Sized>(
    diagram: &Diagram,
    model: &M,
    grid: UniformGrid,
    word: &Word,
    free_times: &[f64],
    free_indices: &[usize],
) -> Result<f64> {
    PlOracle::new(model, grid)?.chaos_kernel(diagram, word, free_times, free_indices)
}

/// A `d`-dimensional combination `Σ_{α,k} w[α][k] 𝟙^α_{cell k}` of grid
/// indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    cells: usize,
    weights: Vec<f64>,
}

impl GridFunction {
    pub fn zero(dim: usize, cells: usize) -> Self {
        Self {
            dim,
            cells,
            weights: vec![0.0; dim * cells],
        }
    }

    /// `𝟙^α_{[point(a), point(b))}` for grid point indices `a ≤ b`, with
    /// letter `α ∈ 1..=dim`.
    pub fn indicator(dim: usize, cells: usize, letter: usize, a: usize, b: usize) -> Result<Self> {
        if letter == 0 || letter > dim {
            return Err(Error::InvalidLetter { letter, dim });
        }
        if a > b || b > cells {
            return Err(Error::Domain("indicator bounds must satisfy a ≤ b ≤ ℓ"));
        }
        let mut f = Self::zero(dim, cells);
        for k in a..b {
            f.weights[(letter - 1) * cells + k] = 1.0;
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self, letter: usize, cell: usize) -> f64 {
        self.weights[(letter - 1) * self.cells + cell]
    }

    pub fn set_weight(&mut self, letter: usize, cell: usize, w: f64) {
        self.weights[(letter - 1) * self.cells + cell] = w;
    }
}

/// `⟨f, g⟩_𝓗 = Σ_α Σ_{i,j} f[α][i] g[α][j] G[i][j]`; distinct components
/// are orthogonal.
pub fn grid_inner_product(f: &GridFunction, g: &GridFunction, gram: &IncrementGram) -> Result<f64> {
    if f.dim != g.dim {
        return Err(Error::DimensionMismatch {
            left: f.dim,
            right: g.dim,
        });
    }
    let n = gram.cells();
    for cells in [f.cells, g.cells] {
        if cells != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: cells,
            });
        }
    }
    let mut total = 0.0;
    for a in 0..f.dim {
        let fa = &f.weights[a * n..(a + 1) * n];
        let ga = &g.weights[a * n..(a + 1) * n];
        for (i, &fi) in fa.iter().enumerate() {
            if fi == 0.0 {
                continue;
            }
            let row = &gram.matrix()[i * n..(i + 1) * n];
            total += fi * row.iter().zip(ga).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    Ok(total)
}
