//! Exact Gaussian sampling of paths on a uniform grid and Monte Carlo
//! estimates of expected signatures.
//!
//! Cell increments of each component are drawn as `L z` with `L` the
//! Cholesky factor of the increment Gram matrix and `z` standard normal.
//! Path `i` uses the ChaCha8 stream `i` of the master seed, so a path does
//! not depend on how paths are distributed over workers. Statistics are
//! accumulated in fixed chunks of [`CHUNK_PATHS`] paths and merged in chunk
//! order, which makes estimates reproducible for any degree of parallelism.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::CovarianceModel;
use crate::linalg::Cholesky;
use crate::oracle::{IncrementGram, UniformGrid};
use crate::words::{SegmentProduct, TensorPolynomial};
use crate::{Error, Result};

/// Largest signature depth computed pathwise.
pub const MAX_DEPTH: usize = 6;

/// Paths per accumulation chunk.
pub const CHUNK_PATHS: u64 = 1024;

/// One sampled path: `ℓ + 1` grid values of a `d`-dimensional process
/// started at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub grid: UniformGrid,
    pub dim: usize,
    /// Row-major `(ℓ + 1) × d`; the first row is zero.
    pub values: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

impl PathSample {
    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }
}

/// Samples paths with the exact finite-dimensional law on a grid.
#[derive(Debug, Clone)]
pub struct PathSampler {
    grid: UniformGrid,
    dim: usize,
    chol: Cholesky,
    seed: u64,
}

impl PathSampler {
    pub fn new<M: CovarianceModel + ?Sized>(
        model: &M,
        grid: UniformGrid,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: 0.0,
                reason: "paths need at least one component",
            });
        }
        let gram = IncrementGram::new(model, grid)?;
        let chol = Cholesky::new(gram.matrix(), grid.cells())?;
        Ok(Self {
            grid,
            dim,
            chol,
            seed,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Writes the cell increments of path `index` into `out`, row-major
    /// `ℓ × d`. `z` is scratch space of length `ℓ`.
    pub fn increments_into(&self, index: u64, z: &mut [f64], col: &mut [f64], out: &mut [f64]) {
        let n = self.grid.cells();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        for a in 0..self.dim {
            for zk in z.iter_mut() {
                *zk = rng.sample(StandardNormal);
            }
            self.chol.mul_lower(z, col);
            for k in 0..n {
                out[k * self.dim + a] = col[k];
            }
        }
    }

    pub fn sample(&self, index: u64) -> PathSample {
        let (n, d) = (self.grid.cells(), self.dim);
        let mut z = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut inc = vec![0.0; n * d];
        self.increments_into(index, &mut z, &mut col, &mut inc);
        let mut values = vec![0.0; (n + 1) * d];
        for k in 0..n {
            for a in 0..d {
                values[(k + 1) * d + a] = values[k * d + a] + inc[k * d + a];
            }
        }
        PathSample {
            grid: self.grid,
            dim: d,
            values,
            seed: self.seed,
            index,
        }
    }

    /// Paths `0, 1, 2, …` of the master seed.
    pub fn paths(&self) -> impl Iterator<Item = PathSample> + '_ {
        (0u64..).map(move |i| self.sample(i))
    }

    /// Accumulates the signatures of paths `range` at depth `depth`.
    pub fn accumulate(&self, depth: usize, range: core::ops::Range<u64>) -> SignatureAccumulator {
        let (n, d) = (self.grid.cells(), self.dim);
        let mut acc = SignatureAccumulator::new(d, depth);
        let mut z = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut inc = vec![0.0; n * d];
        let mut prod = SegmentProduct::new(d, depth);
        for i in range {
            self.increments_into(i, &mut z, &mut col, &mut inc);
            prod.reset();
            for k in 0..n {
                prod.push(&inc[k * d..(k + 1) * d]);
            }
            acc.push(prod.value());
        }
        acc
    }
}

fn check_depth(depth: usize) -> Result<()> {
    if depth > MAX_DEPTH {
        return Err(Error::Capability {
            what: "pathwise signature depth",
            value: depth as u64,
            limit: MAX_DEPTH as u64,
        });
    }
    Ok(())
}

/// Signature of the piecewise-linear interpolation of a sampled path: the
/// Chen product of the segment exponentials.
pub fn pathwise_signature(p: &PathSample, depth: usize) -> Result<TensorPolynomial> {
    check_depth(depth)?;
    let mut prod = SegmentProduct::new(p.dim, depth);
    let mut inc = vec![0.0; p.dim];
    for k in 0..p.grid.cells() {
        let (a, b) = (p.point(k), p.point(k + 1));
        for (x, (u, v)) in inc.iter_mut().zip(a.iter().zip(b)) {
            *x = v - u;
        }
        prod.push(&inc);
    }
    Ok(prod.into_value())
}

/// Streaming per-coefficient mean and sum of squared deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureAccumulator {
    dim: usize,
    depth: usize,
    count: u64,
    mean: TensorPolynomial,
    m2: TensorPolynomial,
}

impl SignatureAccumulator {
    pub fn new(dim: usize, depth: usize) -> Self {
        Self {
            dim,
            depth,
            count: 0,
            mean: TensorPolynomial::zero(dim, depth),
            m2: TensorPolynomial::zero(dim, depth),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, sig: &TensorPolynomial) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for n in 0..=self.depth {
            let x = sig.level(n);
            let mean = self.mean.level_mut(n);
            let m2 = self.m2.level_mut(n);
            for i in 0..x.len() {
                let delta = x[i] - mean[i];
                mean[i] += delta * inv;
                m2[i] += delta * (x[i] - mean[i]);
            }
        }
    }

    /// Combines two accumulators of disjoint path sets.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        for n in 0..=self.depth {
            let (mb, m2b) = (other.mean.level(n), other.m2.level(n));
            let mean = self.mean.level_mut(n);
            let m2 = self.m2.level_mut(n);
            for i in 0..mb.len() {
                let delta = mb[i] - mean[i];
                mean[i] += delta * nb / total;
                m2[i] += m2b[i] + delta * delta * na * nb / total;
            }
        }
        self.count += other.count;
    }

    pub fn finish(&self, seed: u64) -> McEstimate {
        let mut std_error = TensorPolynomial::zero(self.dim, self.depth);
        if self.count > 1 {
            let n = self.count as f64;
            for k in 0..=self.depth {
                let m2 = self.m2.level(k);
                for (se, &v) in std_error.level_mut(k).iter_mut().zip(m2) {
                    *se = libm::sqrt(v / (n - 1.0) / n);
                }
            }
        }
        McEstimate {
            mean: self.mean.clone(),
            std_error,
            n_paths: self.count,
            seed,
        }
    }
}

/// Monte Carlo estimate of an expected signature.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: TensorPolynomial,
    /// Sample standard deviation over `√n_paths`, per word.
    pub std_error: TensorPolynomial,
    pub n_paths: u64,
    pub seed: u64,
}

/// Chunk boundaries `[start, end)` covering `0..n_paths`.
pub fn chunks(n_paths: u64) -> impl Iterator<Item = core::ops::Range<u64>> {
    (0..n_paths.div_ceil(CHUNK_PATHS))
        .map(move |c| c * CHUNK_PATHS..((c + 1) * CHUNK_PATHS).min(n_paths))
}

/// Sequential estimate of `𝔼𝒮(Xˡ)` up to depth `depth` from `n_paths`
/// sampled paths.
pub fn estimate_expected_signature<M: CovarianceModel + ?Sized>(
    model: &M,
    grid: UniformGrid,
    dim: usize,
    depth: usize,
    n_paths: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_depth(depth)?;
    let sampler = PathSampler::new(model, grid, dim, seed)?;
    let mut acc = SignatureAccumulator::new(dim, depth);
    for range in chunks(n_paths) {
        acc.merge(&sampler.accumulate(depth, range));
    }
    Ok(acc.finish(seed))
}
