//! One-dimensional quadrature rules for iterated integration.
//!
//! Integrands receive both the abscissa `x` and its distance `b − x` to the
//! right end of the full interval, computed without cancellation, so that
//! functions with algebraic behaviour at either end can be evaluated
//! accurately. An integrand returns an [`Estimate`] so that errors of inner
//! integrals propagate outward.

use core::f64::consts::PI;

/// A value with an absolute error bound.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

impl Estimate {
    pub const ZERO: Self = Self {
        value: 0.0,
        err: 0.0,
    };

    pub fn exact(value: f64) -> Self {
        Self { value, err: 0.0 }
    }

    pub fn scale(self, w: f64) -> Self {
        Self {
            value: w * self.value,
            err: libm::fabs(w) * self.err,
        }
    }
}

impl core::ops::Add for Estimate {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            value: self.value + rhs.value,
            err: self.err + rhs.err,
        }
    }
}

impl core::ops::AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Result of an adaptive rule: the estimate and whether the requested
/// tolerance was met within the refinement budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub estimate: Estimate,
    pub converged: bool,
}

/// Tolerances of a single one-dimensional integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleParams {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of step halvings allowed after the initial step `h = 1`.
    pub max_level: usize,
}

impl RuleParams {
    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * libm::fabs(value))
    }
}

/// Beyond this the double-exponential weights underflow.
const T_MAX: f64 = 6.0;
/// Nodes are always generated out to at least this `|t|`.
const T_MIN: f64 = 3.0;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// Tanh–sinh rule on `(lo, lo + len)`, where the right end sits `tail` to
/// the left of the end of the full interval.
///
/// The map is `x = lo + len·σ(π sinh t)` with `σ` the logistic function,
/// whose complement `len·σ(−π sinh t)` is available to full relative
/// precision. Refinement halves the step until two successive sums agree.
pub fn tanh_sinh<F>(f: &mut F, lo: f64, len: f64, tail: f64, p: &RuleParams) -> Outcome
where
    F: FnMut(f64, f64) -> Estimate,
{
    if !(len > 0.0) {
        return Outcome {
            estimate: Estimate::ZERO,
            converged: true,
        };
    }
    let mut node = |t: f64| -> Estimate {
        let z = PI * libm::sinh(t);
        let (sp, sm) = (sigmoid(z), sigmoid(-z));
        let w = len * sp * sm * PI * libm::cosh(t);
        let off = len * sp;
        let comp = len * sm;
        if !(w > 0.0) || !(off > 0.0) || !(comp > 0.0) {
            return Estimate::ZERO;
        }
        f(lo + off, tail + comp).scale(w)
    };

    // Initial level, walking outward until terms become negligible.
    let mut h = 1.0;
    let mut sum = node(0.0);
    let mut biggest = libm::fabs(sum.value);
    let mut reach = [0.0f64; 2];
    for (side, sign) in [(0usize, -1.0f64), (1, 1.0)] {
        let mut small = 0;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > T_MAX {
                break;
            }
            let e = node(sign * t);
            sum += e;
            reach[side] = t;
            let mag = libm::fabs(e.value);
            biggest = biggest.max(mag);
            if t >= T_MIN && mag <= 1e-3 * p.rel_tol * biggest + 1e-300 {
                small += 1;
                if small >= 2 {
                    break;
                }
            } else {
                small = 0;
            }
            k += 1;
        }
    }
    let mut total = sum.scale(h);
    let mut converged = false;
    let mut err = f64::INFINITY;
    let mut last_diff = f64::INFINITY;
    for level in 1..=p.max_level {
        h *= 0.5;
        let mut fresh = Estimate::ZERO;
        for (side, sign) in [(0usize, -1.0f64), (1, 1.0)] {
            let mut k = 1;
            loop {
                let t = k as f64 * h;
                if t > reach[side] + 0.5 * h {
                    break;
                }
                fresh += node(sign * t);
                k += 2;
            }
        }
        sum += fresh;
        let next = sum.scale(h);
        let diff = libm::fabs(next.value - total.value);
        total = next;
        // The error of a double-exponential rule roughly squares with each
        // halving of the step, so the latest error is about diff²/last_diff.
        err = if level >= 2 && diff < last_diff {
            diff * diff / last_diff
        } else {
            diff
        };
        err = err.max(4.0 * f64::EPSILON * libm::fabs(total.value));
        last_diff = diff;
        if level >= 2 && err <= p.tolerance(total.value) {
            converged = true;
            break;
        }
    }
    Outcome {
        estimate: Estimate {
            value: total.value,
            err: total.err + err,
        },
        converged,
    }
}

/// Below this ratio `δ/b` the logarithmic substitution of [`graded`] is
/// used.
const LOG_MAP_RATIO: f64 = 0.1;

/// Integrates over `(0, b)` an integrand whose nearest singular point lies
/// just outside the left end, at distance `delta ≥ 0` from it.
///
/// When `δ` is small compared to `b` the substitution `x = δ(eᵘ − 1)`,
/// `u ∈ (0, ln(1 + b/δ))` turns power laws `(x + δ)^a` into smooth
/// exponentials, after which a single tanh–sinh rule applies; otherwise
/// tanh–sinh is applied directly.
pub fn graded<F>(f: &mut F, b: f64, delta: f64, p: &RuleParams) -> Outcome
where
    F: FnMut(f64, f64) -> Estimate,
{
    if !(delta > 0.0) || delta >= LOG_MAP_RATIO * b {
        return tanh_sinh(f, 0.0, b, 0.0, p);
    }
    let span = libm::log1p(b / delta);
    let total = b + delta;
    let mut mapped = |u: f64, rest: f64| -> Estimate {
        let x = delta * libm::expm1(u);
        // b − x = (b + δ)(1 − e^{−(L − u)})
        let comp = -total * libm::expm1(-rest);
        f(x, comp).scale(x + delta)
    };
    tanh_sinh(&mut mapped, 0.0, span, 0.0, p)
}

/// Rank-one (Kronecker) lattice `xᵢ = frac(shift + i·α)` with `α` built
/// from square roots of primes, used for randomly shifted quasi-Monte
/// Carlo integration over the unit cube.
#[derive(Debug, Clone)]
pub struct Kronecker {
    alpha: [f64; 16],
    dim: usize,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

impl Kronecker {
    /// `dim ≤ 16`.
    pub fn new(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "at most 16 dimensions");
        let mut alpha = [0.0; 16];
        for (a, &q) in alpha.iter_mut().zip(&PRIMES) {
            let r = libm::sqrt(q as f64);
            *a = r - libm::floor(r);
        }
        Self { alpha, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes point `i` shifted by `shift` into `out`.
    pub fn point(&self, i: u64, shift: &[f64], out: &mut [f64]) {
        for k in 0..self.dim {
            let v = shift[k] + (i as f64) * self.alpha[k];
            out[k] = v - libm::floor(v);
        }
    }
}
