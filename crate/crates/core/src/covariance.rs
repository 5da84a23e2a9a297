//! Covariance models for scalar centred Gaussian processes started at zero.
//!
//! Every model is evaluated through the [`CovarianceModel`] trait. The
//! primitive methods are stated for ordered arguments `lo ≤ hi`; the
//! symmetric entry points reflect their arguments onto that branch.
//!
//! Besides plain evaluations the trait exposes "gap" forms of the
//! integrands used by the analytic engine. They receive the difference
//! `hi − lo` as a separately computed number so that integrands which are
//! singular on the diagonal can be evaluated without cancellation.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::psd_rank;
use crate::{Error, Result};

/// Scalar covariance function `R(s, t)` together with the derivatives used
/// by the chaos expansion.
pub trait CovarianceModel {
    /// Largest admissible time.
    fn horizon(&self) -> f64;

    /// Hölder exponent `H` governing the near-diagonal scaling.
    fn hoelder(&self) -> f64;

    /// `R(lo, hi)` for `0 ≤ lo ≤ hi`.
    fn cov_ordered(&self, lo: f64, hi: f64) -> f64;

    /// `∂R/∂hi` at `lo < hi`, i.e. the derivative in the later argument.
    fn d_later(&self, lo: f64, hi: f64) -> f64;

    /// `∂R/∂lo` at `lo < hi`, i.e. the derivative in the earlier argument.
    fn d_earlier(&self, lo: f64, hi: f64) -> f64;

    /// `R′(t)`, the derivative of the variance.
    fn dvar(&self, t: f64) -> f64;

    /// `∂₁₂R(lo, hi)` with `gap = hi − lo > 0` supplied separately.
    fn arc_density(&self, lo: f64, hi: f64, gap: f64) -> f64;

    /// Whether `arc_density` or `pair_density` blow up on the diagonal.
    /// Quadrature only grades its meshes for singular models.
    fn is_singular(&self) -> bool {
        false
    }

    /// `½R′(t) − ∂₂R(anchor, t)` with `gap = t − anchor > 0`.
    fn pair_density(&self, anchor: f64, t: f64, gap: f64) -> f64 {
        let _ = gap;
        0.5 * self.dvar(t) - self.d_later(anchor, t)
    }

    /// `½ R(Δ(a, b), Δ(a, b))` for `a ≤ b` with `gap = b − a`.
    fn half_increment_var(&self, a: f64, b: f64, gap: f64) -> f64 {
        let _ = gap;
        0.5 * self.inc_cov(a, b, a, b)
    }

    /// `R(Δ(p₀, p₁), Δ(p₂, p₃))` for ordered points `p₀ ≤ p₁ ≤ p₂ ≤ p₃`
    /// with consecutive differences supplied in `gaps`.
    fn inc_cov_ordered(&self, p: [f64; 4], gaps: [f64; 3]) -> f64 {
        let _ = gaps;
        self.inc_cov(p[0], p[1], p[2], p[3])
    }

    /// `R(s, t)`.
    fn cov(&self, s: f64, t: f64) -> f64 {
        if s <= t {
            self.cov_ordered(s, t)
        } else {
            self.cov_ordered(t, s)
        }
    }

    /// `R(t) = R(t, t)`.
    fn var(&self, t: f64) -> f64 {
        self.cov_ordered(t, t)
    }

    /// `∂₂R(s, t)`, the derivative in the second argument, off the diagonal.
    fn d2(&self, s: f64, t: f64) -> Result<f64> {
        if s < t {
            Ok(self.d_later(s, t))
        } else if s > t {
            Ok(self.d_earlier(t, s))
        } else {
            Err(Error::Domain("∂₂R is evaluated off the diagonal only"))
        }
    }

    /// `∂₁₂R(s, t)` off the diagonal.
    fn d12(&self, s: f64, t: f64) -> Result<f64> {
        if s < t {
            Ok(self.arc_density(s, t, t - s))
        } else if s > t {
            Ok(self.arc_density(t, s, s - t))
        } else {
            Err(Error::Domain("∂₁₂R is evaluated off the diagonal only"))
        }
    }

    /// `R(Δ(s, t), Δ(u, v)) = R(t,v) + R(s,u) − R(t,u) − R(s,v)`.
    fn inc_cov(&self, s: f64, t: f64, u: f64, v: f64) -> f64 {
        self.cov(t, v) + self.cov(s, u) - self.cov(t, u) - self.cov(s, v)
    }
}

impl<M: CovarianceModel + ?Sized> CovarianceModel for &M {
    fn horizon(&self) -> f64 {
        (**self).horizon()
    }
    fn hoelder(&self) -> f64 {
        (**self).hoelder()
    }
    fn cov_ordered(&self, lo: f64, hi: f64) -> f64 {
        (**self).cov_ordered(lo, hi)
    }
    fn d_later(&self, lo: f64, hi: f64) -> f64 {
        (**self).d_later(lo, hi)
    }
    fn d_earlier(&self, lo: f64, hi: f64) -> f64 {
        (**self).d_earlier(lo, hi)
    }
    fn dvar(&self, t: f64) -> f64 {
        (**self).dvar(t)
    }
    fn arc_density(&self, lo: f64, hi: f64, gap: f64) -> f64 {
        (**self).arc_density(lo, hi, gap)
    }
    fn is_singular(&self) -> bool {
        (**self).is_singular()
    }
    fn pair_density(&self, anchor: f64, t: f64, gap: f64) -> f64 {
        (**self).pair_density(anchor, t, gap)
    }
    fn half_increment_var(&self, a: f64, b: f64, gap: f64) -> f64 {
        (**self).half_increment_var(a, b, gap)
    }
    fn inc_cov_ordered(&self, p: [f64; 4], gaps: [f64; 3]) -> f64 {
        (**self).inc_cov_ordered(p, gaps)
    }
    fn inc_cov(&self, s: f64, t: f64, u: f64, v: f64) -> f64 {
        (**self).inc_cov(s, t, u, v)
    }
}

/// Fractional Brownian motion `R(s,t) = ½(s^{2H} + t^{2H} − |t−s|^{2H})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fbm {
    hurst: f64,
    horizon: f64,
}

impl Fbm {
    pub fn new(hurst: f64, horizon: f64) -> Result<Self> {
        if !(hurst > 0.25 && hurst < 1.0) {
            return Err(Error::InvalidParameter {
                name: "hurst",
                value: hurst,
                reason: "must lie in (1/4, 1)",
            });
        }
        check_horizon(horizon)?;
        Ok(Self { hurst, horizon })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    fn pow(&self, x: f64) -> f64 {
        libm::pow(x, 2.0 * self.hurst)
    }

    /// `(x + y)^{2H} − x^{2H}` without cancellation for small `y`.
    fn pow_increment(&self, x: f64, y: f64) -> f64 {
        if x == 0.0 {
            return self.pow(y);
        }
        self.pow(x) * libm::expm1(2.0 * self.hurst * libm::log1p(y / x))
    }
}

impl CovarianceModel for Fbm {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn hoelder(&self) -> f64 {
        self.hurst
    }

    fn cov_ordered(&self, lo: f64, hi: f64) -> f64 {
        0.5 * (self.pow(lo) + self.pow(hi) - self.pow(hi - lo))
    }

    fn d_later(&self, lo: f64, hi: f64) -> f64 {
        let e = 2.0 * self.hurst - 1.0;
        self.hurst * (libm::pow(hi, e) - libm::pow(hi - lo, e))
    }

    fn d_earlier(&self, lo: f64, hi: f64) -> f64 {
        let e = 2.0 * self.hurst - 1.0;
        self.hurst * (libm::pow(lo, e) + libm::pow(hi - lo, e))
    }

    fn dvar(&self, t: f64) -> f64 {
        2.0 * self.hurst * libm::pow(t, 2.0 * self.hurst - 1.0)
    }

    fn arc_density(&self, _lo: f64, _hi: f64, gap: f64) -> f64 {
        let c = self.hurst * (2.0 * self.hurst - 1.0);
        if c == 0.0 {
            return 0.0;
        }
        c * libm::pow(gap, 2.0 * self.hurst - 2.0)
    }

    fn is_singular(&self) -> bool {
        self.hurst != 0.5
    }

    fn pair_density(&self, _anchor: f64, _t: f64, gap: f64) -> f64 {
        self.hurst * libm::pow(gap, 2.0 * self.hurst - 1.0)
    }

    fn half_increment_var(&self, _a: f64, _b: f64, gap: f64) -> f64 {
        0.5 * self.pow(gap)
    }

    fn inc_cov_ordered(&self, _p: [f64; 4], g: [f64; 3]) -> f64 {
        if g[1] == 0.0 {
            // Adjacent intervals: ½((g₀+g₂)^{2H} − g₀^{2H} − g₂^{2H}).
            let (small, large) = if g[0] <= g[2] { (g[0], g[2]) } else { (g[2], g[0]) };
            return 0.5 * (self.pow_increment(large, small) - self.pow(small));
        }
        0.5 * (self.pow_increment(g[1] + g[2], g[0]) - self.pow_increment(g[1], g[0]))
    }
}

/// Brownian bridge on `[0, T]` returning to the origin,
/// `R(s,t) = s(1 − t/T)` for `s ≤ t`, evaluated on `[0, T − ε]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bridge {
    horizon: f64,
    eps: f64,
}

impl Bridge {
    pub fn new(horizon: f64, eps: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if !(eps > 0.0 && eps < horizon) {
            return Err(Error::InvalidParameter {
                name: "bridge_eps",
                value: eps,
                reason: "must lie in (0, T)",
            });
        }
        Ok(Self { horizon, eps })
    }

    /// Bridge with the default cut-off `ε = 10⁻³·T`.
    pub fn with_default_eps(horizon: f64) -> Result<Self> {
        Self::new(horizon, 1e-3 * horizon)
    }

    /// The time `T` at which the bridge is pinned to zero.
    pub fn pin_time(&self) -> f64 {
        self.horizon
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl CovarianceModel for Bridge {
    fn horizon(&self) -> f64 {
        self.horizon - self.eps
    }

    fn hoelder(&self) -> f64 {
        0.5
    }

    fn cov_ordered(&self, lo: f64, hi: f64) -> f64 {
        lo * (1.0 - hi / self.horizon)
    }

    fn d_later(&self, lo: f64, _hi: f64) -> f64 {
        -lo / self.horizon
    }

    fn d_earlier(&self, _lo: f64, hi: f64) -> f64 {
        1.0 - hi / self.horizon
    }

    fn dvar(&self, t: f64) -> f64 {
        1.0 - 2.0 * t / self.horizon
    }

    fn arc_density(&self, _lo: f64, _hi: f64, _gap: f64) -> f64 {
        -1.0 / self.horizon
    }

    fn pair_density(&self, _anchor: f64, _t: f64, gap: f64) -> f64 {
        0.5 - gap / self.horizon
    }

    fn half_increment_var(&self, _a: f64, _b: f64, gap: f64) -> f64 {
        0.5 * gap * (1.0 - gap / self.horizon)
    }

    fn inc_cov_ordered(&self, _p: [f64; 4], g: [f64; 3]) -> f64 {
        -g[0] * g[2] / self.horizon
    }
}

/// Ornstein–Uhlenbeck process `dX = −θX dt + σ dW` started at zero,
/// `R(s,t) = (σ²/2θ)(e^{−θ(t−s)} − e^{−θ(s+t)})` for `s ≤ t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ou {
    sigma: f64,
    theta: f64,
    horizon: f64,
}

impl Ou {
    pub fn new(sigma: f64, theta: f64, horizon: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
                reason: "must be positive",
            });
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "must be positive",
            });
        }
        check_horizon(horizon)?;
        Ok(Self {
            sigma,
            theta,
            horizon,
        })
    }

    fn scale(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta)
    }
}

impl CovarianceModel for Ou {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn hoelder(&self) -> f64 {
        0.5
    }

    fn cov_ordered(&self, lo: f64, hi: f64) -> f64 {
        let th = self.theta;
        // e^{−θ(hi−lo)} − e^{−θ(hi+lo)} = e^{−θ(hi−lo)}(1 − e^{−2θ lo})
        -self.scale() * libm::exp(-th * (hi - lo)) * libm::expm1(-2.0 * th * lo)
    }

    fn d_later(&self, lo: f64, hi: f64) -> f64 {
        let th = self.theta;
        self.scale() * th * (libm::exp(-th * (hi + lo)) - libm::exp(-th * (hi - lo)))
    }

    fn d_earlier(&self, lo: f64, hi: f64) -> f64 {
        let th = self.theta;
        self.scale() * th * (libm::exp(-th * (hi - lo)) + libm::exp(-th * (hi + lo)))
    }

    fn dvar(&self, t: f64) -> f64 {
        self.sigma * self.sigma * libm::exp(-2.0 * self.theta * t)
    }

    fn arc_density(&self, lo: f64, hi: f64, gap: f64) -> f64 {
        let th = self.theta;
        -self.scale() * th * th * (libm::exp(-th * gap) + libm::exp(-th * (hi + lo)))
    }

    fn pair_density(&self, anchor: f64, t: f64, gap: f64) -> f64 {
        let th = self.theta;
        // ½σ²e^{−2θt} = cθ e^{−2θt}; the two e^{−2θt}-type terms combine.
        let c = self.scale() * th;
        c * (libm::exp(-2.0 * th * t) + libm::exp(-th * gap) - libm::exp(-th * (anchor + t)))
    }

    fn half_increment_var(&self, a: f64, _b: f64, gap: f64) -> f64 {
        // Var(X_b − X_a) = c[2(1 − e^{−θg}) − e^{−2θa}(1 − e^{−θg})²]
        let th = self.theta;
        let m = libm::expm1(-th * gap);
        0.5 * self.scale() * (-2.0 * m - libm::exp(-2.0 * th * a) * m * m)
    }
}

/// A model together with its parameters, as selected on the command line or
/// in a configuration file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Fbm(Fbm),
    /// Standard Brownian motion, the fractional model at `H = ½`.
    Bm(Fbm),
    Bridge(Bridge),
    Ou(Ou),
}

/// Parameters from which a [`Model`] is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Fbm { hurst: f64, horizon: f64 },
    Bm { horizon: f64 },
    /// `eps = None` selects the default cut-off `10⁻³·T`.
    Bridge { horizon: f64, eps: Option<f64> },
    Ou { sigma: f64, theta: f64, horizon: f64 },
}

/// Builds and validates a model.
pub fn make_model(spec: ModelSpec) -> Result<Model> {
    Ok(match spec {
        ModelSpec::Fbm { hurst, horizon } => Model::Fbm(Fbm::new(hurst, horizon)?),
        ModelSpec::Bm { horizon } => Model::Bm(Fbm::new(0.5, horizon)?),
        ModelSpec::Bridge { horizon, eps } => Model::Bridge(match eps {
            Some(eps) => Bridge::new(horizon, eps)?,
            None => Bridge::with_default_eps(horizon)?,
        }),
        ModelSpec::Ou {
            sigma,
            theta,
            horizon,
        } => Model::Ou(Ou::new(sigma, theta, horizon)?),
    })
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Fbm(_) => "fbm",
            Model::Bm(_) => "bm",
            Model::Bridge(_) => "bridge",
            Model::Ou(_) => "ou",
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match *self {
            Model::Fbm(m) => ModelSpec::Fbm {
                hurst: m.hurst,
                horizon: m.horizon,
            },
            Model::Bm(m) => ModelSpec::Bm { horizon: m.horizon },
            Model::Bridge(m) => ModelSpec::Bridge {
                horizon: m.horizon,
                eps: Some(m.eps),
            },
            Model::Ou(m) => ModelSpec::Ou {
                sigma: m.sigma,
                theta: m.theta,
                horizon: m.horizon,
            },
        }
    }

    /// The model as a trait object.
    pub fn as_dyn(&self) -> &dyn CovarianceModel {
        match self {
            Model::Fbm(m) | Model::Bm(m) => m,
            Model::Bridge(m) => m,
            Model::Ou(m) => m,
        }
    }
}

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*) -> $ret:ty;)*) => {
        $(fn $name(&self, $($arg: $ty),*) -> $ret {
            match self {
                Model::Fbm(m) | Model::Bm(m) => m.$name($($arg),*),
                Model::Bridge(m) => m.$name($($arg),*),
                Model::Ou(m) => m.$name($($arg),*),
            }
        })*
    };
}

impl CovarianceModel for Model {
    forward! {
        horizon() -> f64;
        hoelder() -> f64;
        cov_ordered(lo: f64, hi: f64) -> f64;
        d_later(lo: f64, hi: f64) -> f64;
        d_earlier(lo: f64, hi: f64) -> f64;
        dvar(t: f64) -> f64;
        arc_density(lo: f64, hi: f64, gap: f64) -> f64;
        is_singular() -> bool;
        pair_density(anchor: f64, t: f64, gap: f64) -> f64;
        half_increment_var(a: f64, b: f64, gap: f64) -> f64;
        inc_cov_ordered(p: [f64; 4], gaps: [f64; 3]) -> f64;
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "horizon",
            value: horizon,
            reason: "must be positive and finite",
        })
    }
}

/// The four regularity ratios at a pair of times `s ≠ t`:
///
/// 0. `|∂₁₂R(s,t)|·|t−s|^{2−2H}`
/// 1. `|½R′(t) − ∂₂R(s,t)|·|t−s|^{1−2H}`
/// 2. `|R′(t)|·t^{1−2H}`
/// 3. `R(Δ(s,t), Δ(s,t))·|t−s|^{−2H}`
pub fn bound_ratios<M: CovarianceModel + ?Sized>(model: &M, s: f64, t: f64) -> Result<[f64; 4]> {
    let h = model.hoelder();
    let gap = libm::fabs(t - s);
    let d12 = model.d12(s, t)?;
    let d2 = model.d2(s, t)?;
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    Ok([
        libm::fabs(d12) * libm::pow(gap, 2.0 - 2.0 * h),
        libm::fabs(0.5 * model.dvar(t) - d2) * libm::pow(gap, 1.0 - 2.0 * h),
        libm::fabs(model.dvar(t)) * libm::pow(t, 1.0 - 2.0 * h),
        model.inc_cov(lo, hi, lo, hi) * libm::pow(gap, -2.0 * h),
    ])
}

/// Number of dyadic refinements examined per sample by [`check_bounds`].
pub const DYADIC_SCALES: usize = 6;

/// Empirical regularity constants of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub n_samples: usize,
    /// Maximum of each ratio of [`bound_ratios`] over all samples and scales.
    pub max_ratio: [f64; 4],
    /// Largest relative change of each ratio across the dyadic scales of a
    /// single sample; zero for exactly homogeneous models.
    pub max_scale_variation: [f64; 4],
    /// Set when some sample's ratio at least doubled at every halving of
    /// `t − s`.
    pub unbounded: [bool; 4],
}

/// Samples `n_samples` random pairs `s ≠ t` in `(0, T]` and evaluates the
/// regularity ratios at `t − s` scaled by `2⁻ᵏ`, `k = 0..=6`, keeping `s`
/// fixed.
pub fn check_bounds<M: CovarianceModel + ?Sized>(
    model: &M,
    n_samples: usize,
    seed: u64,
) -> BoundsReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = model.horizon();
    let mut report = BoundsReport {
        n_samples,
        max_ratio: [0.0; 4],
        max_scale_variation: [0.0; 4],
        unbounded: [false; 4],
    };
    let mut taken = 0;
    while taken < n_samples {
        let s = horizon * rng.random::<f64>();
        let t = horizon * rng.random::<f64>();
        if s == 0.0 || t == 0.0 || (t - s).abs() < 1e-9 * horizon {
            continue;
        }
        taken += 1;
        let mut profile: Vec<[f64; 4]> = Vec::with_capacity(DYADIC_SCALES + 1);
        for k in 0..=DYADIC_SCALES {
            let tk = s + (t - s) * libm::ldexp(1.0, -(k as i32));
            if let Ok(r) = bound_ratios(model, s, tk) {
                profile.push(r);
            }
        }
        for b in 0..4 {
            let first = profile[0][b];
            let mut doubling = profile.len() == DYADIC_SCALES + 1;
            for (k, r) in profile.iter().enumerate() {
                report.max_ratio[b] = report.max_ratio[b].max(r[b]);
                if first > 0.0 {
                    let v = libm::fabs(r[b] - first) / first;
                    report.max_scale_variation[b] = report.max_scale_variation[b].max(v);
                }
                if k > 0 && !(r[b] >= 2.0 * profile[k - 1][b] && r[b] > 0.0) {
                    doubling = false;
                }
            }
            report.unbounded[b] |= doubling;
        }
    }
    report
}

/// Gram matrix `R(tᵢ, tⱼ)` on the given times, row-major.
pub fn gram_matrix<M: CovarianceModel + ?Sized>(model: &M, times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut g = Vec::with_capacity(n * n);
    for &a in times {
        for &b in times {
            g.push(model.cov(a, b));
        }
    }
    g
}

/// Checks positive semidefiniteness of the Gram matrix on `times` by
/// pivoted Cholesky with relative pivot tolerance `tol`; returns the
/// numerical rank.
pub fn check_gram_psd<M: CovarianceModel + ?Sized>(
    model: &M,
    times: &[f64],
    tol: f64,
) -> Result<usize> {
    psd_rank(&gram_matrix(model, times), times.len(), tol)
}
