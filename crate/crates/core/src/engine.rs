//! Simplex integrals attached to pairing diagrams.
//!
//! For a diagram on `n` positions with singles `v₁ < … < v_m` the kernel is
//! the integral, over the ordered positions that are neither singles nor
//! the first element of a consecutive pair, of
//!
//! - `∂₁₂R(u_i, u_j)` for every arc `{i, j}`, and
//! - `½R′(u_{h+1}) − ∂₂R(u_{h−1}, u_{h+1})` for every consecutive pair
//!   `{h, h+1}`, with `u₀ = s`,
//!
//! subject to `s < u₁ < … < uₙ < t` restricted to the surviving positions
//! and with the singles fixed at the free times.
//!
//! Evaluation is iterated one-dimensional quadrature over the gaps between
//! consecutive surviving positions. Two exact integrations are applied
//! first (both can be switched off in [`QuadratureConfig`]):
//!
//! - the last pair `{h, h+1}` of a maximal consecutive run only involves
//!   `u_{h+1}` between its neighbours `u_{h−1}` and the next surviving
//!   point `b`; integrating it out gives `½ R(Δ(u_{h−1}, b), Δ(u_{h−1}, b))`;
//! - an arc `{i, j}` whose endpoints appear in no other factor integrates
//!   over the box between their neighbours to
//!   `R(Δ(prev_i, next_i), Δ(prev_j, next_j))`.
//!
//! Near-diagonal singularities of fBm are handled by the gap
//! parameterization (all point differences are sums of positive gaps),
//! tanh–sinh rules, and geometric panels toward nearby singular points.
//! Integrals with more than four remaining variables that fail to converge
//! fall back to randomly shifted lattice quasi-Monte Carlo.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covariance::CovarianceModel;
use crate::diagrams::{enumerate_pairings, index_compatible, maximal_consecutive_sequences, Diagram};
use crate::quadrature::{graded, Estimate, Kronecker, RuleParams};
use crate::words::{TensorPolynomial, Word};
use crate::{Error, Result};

/// Largest signature level for [`expected_signature`].
pub const MAX_LEVEL: usize = 6;
/// Largest path dimension for [`expected_signature`].
pub const MAX_DIM: usize = 4;
/// Largest number of integration variables handled by nested quadrature.
pub const MAX_NESTED_DIMS: usize = 6;

/// Tolerances and fallbacks of the kernel quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    /// Relative tolerance for diagrams with at most four integration
    /// variables.
    pub rel_tol: f64,
    /// Relative tolerance for diagrams with five or more.
    pub high_dim_rel_tol: f64,
    pub abs_tol: f64,
    /// Step halvings allowed in each one-dimensional rule.
    pub max_depth: usize,
    /// Power `p` of the map `y ↦ y^p` used by the quasi-Monte Carlo
    /// fallback to cluster points toward the singular faces. `None` picks
    /// it from the Hölder exponent.
    pub grading_exponent: Option<f64>,
    /// Lattice points of the quasi-Monte Carlo fallback; zero disables it.
    pub mc_fallback_samples: usize,
    pub rng_seed: u64,
    /// Apply the exact integrations described in the module docs.
    pub closed_form_reductions: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            high_dim_rel_tol: 1e-3,
            abs_tol: 1e-13,
            max_depth: 6,
            grading_exponent: None,
            mc_fallback_samples: 1 << 16,
            rng_seed: 0,
            closed_form_reductions: true,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("high_dim_rel_tol", self.high_dim_rel_tol),
            ("abs_tol", self.abs_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "tolerances must be positive",
                });
            }
        }
        if let Some(p) = self.grading_exponent {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "grading_exponent",
                    value: p,
                    reason: "must be positive",
                });
            }
        }
        if self.max_depth < 2 {
            return Err(Error::InvalidParameter {
                name: "max_depth",
                value: self.max_depth as f64,
                reason: "at least two refinements are needed",
            });
        }
        Ok(())
    }

    /// Relative tolerance for a diagram with `dims` integration variables.
    pub fn rel_tol_for(&self, dims: usize) -> f64 {
        if dims <= 4 {
            self.rel_tol
        } else {
            self.high_dim_rel_tol
        }
    }

    fn grading_for(&self, hoelder: f64) -> f64 {
        self.grading_exponent.unwrap_or(if hoelder < 0.5 {
            1.0 / (2.0 * hoelder)
        } else if hoelder > 0.5 {
            (1.0 / (2.0 * hoelder - 1.0)).min(4.0)
        } else {
            1.0
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pt {
    Start,
    End,
    Pos(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Start,
    End,
    Slot(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor<P> {
    /// `∂₁₂R(a, b)`.
    Arc(P, P),
    /// `½R′(b) − ∂₂R(a, b)`.
    Pair(P, P),
    /// `½ R(Δ(a, b), Δ(a, b))`.
    Closed(P, P),
    /// `R(Δ(p₀, p₁), Δ(p₂, p₃))`.
    Rect([P; 4]),
}

impl<P: Copy> Factor<P> {
    fn points(&self) -> Vec<P> {
        match *self {
            Factor::Arc(a, b) | Factor::Pair(a, b) | Factor::Closed(a, b) => vec![a, b],
            Factor::Rect(p) => p.to_vec(),
        }
    }

    fn map<Q>(&self, f: impl Fn(P) -> Q) -> Factor<Q> {
        match *self {
            Factor::Arc(a, b) => Factor::Arc(f(a), f(b)),
            Factor::Pair(a, b) => Factor::Pair(f(a), f(b)),
            Factor::Closed(a, b) => Factor::Closed(f(a), f(b)),
            Factor::Rect(p) => Factor::Rect([f(p[0]), f(p[1]), f(p[2]), f(p[3])]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotKind {
    /// The k-th free time.
    Free(usize),
    /// The r-th integration variable.
    Var(usize),
}

/// Integration layout of a diagram: surviving positions, the factors
/// attached to them, and the nesting order.
#[derive(Debug, Clone)]
struct Layout {
    /// Diagram positions of the slots, ascending.
    positions: Vec<usize>,
    kinds: Vec<SlotKind>,
    /// Slot index of each integration variable.
    vars: Vec<usize>,
    /// Factors without integration variables.
    constant: Vec<Factor<Node>>,
    /// Factors grouped by the last integration variable they involve.
    by_var: Vec<Vec<Factor<Node>>>,
    /// Earlier points that share a factor with variable `r` or a later one.
    near: Vec<Vec<Node>>,
}

fn refcount(factors: &[Factor<Pt>], p: Pt) -> usize {
    factors
        .iter()
        .map(|f| f.points().iter().filter(|&&q| q == p).count())
        .sum()
}

fn neighbours(live: &[usize], pos: usize) -> (Pt, Pt) {
    let idx = live.iter().position(|&q| q == pos).expect("live position");
    let prev = if idx == 0 { Pt::Start } else { Pt::Pos(live[idx - 1]) };
    let next = live.get(idx + 1).map_or(Pt::End, |&q| Pt::Pos(q));
    (prev, next)
}

impl Layout {
    fn new(diagram: &Diagram, reductions: bool) -> Self {
        let n = diagram.n();
        let mut live: Vec<usize> = (1..=n).filter(|&p| !diagram.is_eliminated(p)).collect();
        let mut factors: Vec<Factor<Pt>> = diagram
            .pairs()
            .iter()
            .map(|&(i, j)| {
                if j == i + 1 {
                    let anchor = if i == 1 { Pt::Start } else { Pt::Pos(i - 1) };
                    Factor::Pair(anchor, Pt::Pos(j))
                } else {
                    Factor::Arc(Pt::Pos(i), Pt::Pos(j))
                }
            })
            .collect();

        if reductions {
            for run in maximal_consecutive_sequences(diagram) {
                let (_, last) = *run.pairs.last().expect("runs are non-empty");
                let target = Pt::Pos(last);
                let Some(fi) = factors
                    .iter()
                    .position(|f| matches!(f, Factor::Pair(_, b) if *b == target))
                else {
                    continue;
                };
                let Factor::Pair(anchor, _) = factors[fi] else {
                    unreachable!()
                };
                let (prev, next) = neighbours(&live, last);
                if refcount(&factors, target) == 1 && prev == anchor {
                    factors[fi] = Factor::Closed(anchor, next);
                    live.retain(|&q| q != last);
                }
            }
            for fi in 0..factors.len() {
                let Factor::Arc(Pt::Pos(i), Pt::Pos(j)) = factors[fi] else {
                    continue;
                };
                if refcount(&factors, Pt::Pos(i)) != 1 || refcount(&factors, Pt::Pos(j)) != 1 {
                    continue;
                }
                let (pi, ni) = neighbours(&live, i);
                let (pj, nj) = neighbours(&live, j);
                if ni == Pt::Pos(j) {
                    continue;
                }
                factors[fi] = Factor::Rect([pi, ni, pj, nj]);
                live.retain(|&q| q != i && q != j);
            }
        }

        let singles = diagram.singles();
        let mut kinds = Vec::with_capacity(live.len());
        let mut vars = Vec::new();
        for (slot, &p) in live.iter().enumerate() {
            match singles.iter().position(|&q| q == p) {
                Some(k) => kinds.push(SlotKind::Free(k)),
                None => {
                    kinds.push(SlotKind::Var(vars.len()));
                    vars.push(slot);
                }
            }
        }
        let to_node = |p: Pt| match p {
            Pt::Start => Node::Start,
            Pt::End => Node::End,
            Pt::Pos(q) => Node::Slot(live.iter().position(|&x| x == q).expect("live point")),
        };
        let var_of = |node: Node| match node {
            Node::Slot(i) => match kinds[i] {
                SlotKind::Var(r) => Some(r),
                SlotKind::Free(_) => None,
            },
            _ => None,
        };
        let mut constant = Vec::new();
        let mut by_var = vec![Vec::new(); vars.len()];
        let mut near: Vec<Vec<Node>> = vec![Vec::new(); vars.len()];
        for f in &factors {
            let f = f.map(to_node);
            let pts = f.points();
            match pts.iter().filter_map(|&p| var_of(p)).max() {
                None => constant.push(f),
                Some(level) => {
                    by_var[level].push(f);
                    for (r, list) in near.iter_mut().enumerate().take(level + 1) {
                        let slot = vars[r];
                        for &p in &pts {
                            let before = match p {
                                Node::Start => true,
                                Node::Slot(i) => i < slot,
                                Node::End => false,
                            };
                            if before && !list.contains(&p) {
                                list.push(p);
                            }
                        }
                    }
                }
            }
        }
        Self {
            positions: live,
            kinds,
            vars,
            constant,
            by_var,
            near,
        }
    }

    fn dims(&self) -> usize {
        self.vars.len()
    }
}

/// Mutable evaluation state: positions of all slots and the gaps to their
/// predecessors, with `gap_end` the distance from the last slot to `t`.
struct Frame {
    pos: Vec<f64>,
    gap: Vec<f64>,
    gap_end: f64,
}

struct Evaluator<'a, M: ?Sized> {
    layout: &'a Layout,
    model: &'a M,
    s: f64,
    t: f64,
    singular: bool,
    params: RuleParams,
}

impl<M: CovarianceModel + ?Sized> Evaluator<'_, M> {
    fn position(&self, node: Node, fr: &Frame) -> f64 {
        match node {
            Node::Start => self.s,
            Node::End => self.t,
            Node::Slot(i) => fr.pos[i],
        }
    }

    /// Distance between two nodes `a ≤ b` as a sum of gaps.
    fn dist(&self, a: Node, b: Node, fr: &Frame) -> f64 {
        let from = match a {
            Node::Start => 0,
            Node::Slot(i) => i + 1,
            Node::End => return 0.0,
        };
        let (to, end) = match b {
            Node::Start => return 0.0,
            Node::Slot(j) => (j + 1, 0.0),
            Node::End => (fr.gap.len(), fr.gap_end),
        };
        if to <= from {
            return end;
        }
        fr.gap[from..to].iter().sum::<f64>() + end
    }

    fn factor(&self, f: &Factor<Node>, fr: &Frame) -> f64 {
        let m = self.model;
        match *f {
            Factor::Arc(a, b) => {
                m.arc_density(self.position(a, fr), self.position(b, fr), self.dist(a, b, fr))
            }
            Factor::Pair(a, b) => {
                m.pair_density(self.position(a, fr), self.position(b, fr), self.dist(a, b, fr))
            }
            Factor::Closed(a, b) => m.half_increment_var(
                self.position(a, fr),
                self.position(b, fr),
                self.dist(a, b, fr),
            ),
            Factor::Rect(p) => m.inc_cov_ordered(
                [
                    self.position(p[0], fr),
                    self.position(p[1], fr),
                    self.position(p[2], fr),
                    self.position(p[3], fr),
                ],
                [
                    self.dist(p[0], p[1], fr),
                    self.dist(p[1], p[2], fr),
                    self.dist(p[2], p[3], fr),
                ],
            ),
        }
    }

    fn prev(&self, slot: usize) -> Node {
        if slot == 0 {
            Node::Start
        } else {
            Node::Slot(slot - 1)
        }
    }

    /// Length of the free range of variable `r` when its predecessor is a
    /// fixed point.
    fn fixed_range(&self, r: usize, fr: &Frame) -> f64 {
        let slot = self.layout.vars[r];
        let lo = self.position(self.prev(slot), fr);
        let hi = (slot + 1..self.layout.kinds.len())
            .find(|&i| matches!(self.layout.kinds[i], SlotKind::Free(_)))
            .map_or(self.t, |i| fr.pos[i]);
        hi - lo
    }

    /// Binds variable `r` at gap `x` from its predecessor, with `comp` the
    /// distance to the next fixed point, and returns the product of the
    /// factors completed by it.
    fn bind(&self, r: usize, x: f64, comp: f64, fr: &mut Frame) -> f64 {
        let slot = self.layout.vars[r];
        fr.pos[slot] = self.position(self.prev(slot), fr) + x;
        fr.gap[slot] = x;
        match self.layout.kinds.get(slot + 1) {
            Some(SlotKind::Free(_)) => fr.gap[slot + 1] = comp,
            None => fr.gap_end = comp,
            Some(SlotKind::Var(_)) => {}
        }
        let mut w = 1.0;
        for f in &self.layout.by_var[r] {
            w *= self.factor(f, fr);
            if w == 0.0 {
                break;
            }
        }
        w
    }

    fn next_range(&self, r: usize, comp: f64, fr: &Frame) -> f64 {
        let slot = self.layout.vars[r];
        if matches!(self.layout.kinds.get(slot + 1), Some(SlotKind::Var(_))) {
            comp
        } else {
            self.fixed_range(r + 1, fr)
        }
    }

    /// Integrates variables `r..` with the earlier ones bound. `abs_tol` is
    /// the absolute accuracy this integral must reach; an inner integral
    /// multiplied by `w` over a range of length `range` gets
    /// `abs_tol / (range·|w|)`, which keeps the accumulated outer error
    /// within `abs_tol`.
    fn nested(&self, r: usize, range: f64, abs_tol: f64, fr: &mut Frame) -> Estimate {
        if r == self.layout.dims() {
            return Estimate::exact(1.0);
        }
        let slot = self.layout.vars[r];
        let delta = if self.singular {
            let prev = self.prev(slot);
            self.layout.near[r]
                .iter()
                .map(|&p| self.dist(p, prev, fr))
                .filter(|&d| d > 0.0)
                .fold(f64::INFINITY, f64::min)
        } else {
            f64::INFINITY
        };
        let mut integrand = |x: f64, comp: f64| -> Estimate {
            let w = self.bind(r, x, comp, fr);
            // Factors overflow only astronomically close to a singular
            // point, where the integrable singularity carries no mass.
            if w == 0.0 || !w.is_finite() {
                return Estimate::ZERO;
            }
            let next = if r + 1 < self.layout.dims() {
                self.next_range(r, comp, fr)
            } else {
                0.0
            };
            let inner_tol = abs_tol / (range * w.abs());
            let inner = self.nested(r + 1, next, inner_tol, fr).scale(w);
            if inner.value.is_finite() && inner.err.is_finite() {
                inner
            } else {
                Estimate::ZERO
            }
        };
        let delta = if delta.is_finite() { delta } else { 0.0 };
        let params = RuleParams {
            abs_tol,
            ..self.params
        };
        graded(&mut integrand, range, delta, &params).estimate
    }

    /// Randomly shifted rank-one lattice rule over the unit cube mapped onto
    /// the ordered region by successive gap fractions `y^p`.
    fn qmc(&self, n_points: usize, seed: u64, p: f64, fr: &mut Frame) -> Estimate {
        const SHIFTS: usize = 16;
        let dims = self.layout.dims();
        let lattice = Kronecker::new(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let per_shift = (n_points / SHIFTS).max(1);
        let mut shift = vec![0.0; dims];
        let mut y = vec![0.0; dims];
        let mut means = [0.0; SHIFTS];
        for mean in means.iter_mut() {
            for v in shift.iter_mut() {
                *v = rng.random::<f64>();
            }
            let mut acc = 0.0;
            for i in 0..per_shift {
                lattice.point(i as u64, &shift, &mut y);
                let mut range = self.fixed_range(0, fr);
                let mut value = 1.0;
                for r in 0..dims {
                    let u = y[r].max(f64::MIN_POSITIVE);
                    let lnu = libm::log(u);
                    let frac = libm::exp(p * lnu);
                    let x = range * frac;
                    let comp = -range * libm::expm1(p * lnu);
                    let jac = range * p * frac / u;
                    value *= jac * self.bind(r, x, comp, fr);
                    if value == 0.0 {
                        break;
                    }
                    if r + 1 < dims {
                        range = self.next_range(r, comp, fr);
                    }
                }
                if value.is_finite() {
                    acc += value;
                }
            }
            *mean = acc / per_shift as f64;
        }
        let avg = means.iter().sum::<f64>() / SHIFTS as f64;
        let var = means.iter().map(|m| (m - avg) * (m - avg)).sum::<f64>() / (SHIFTS - 1) as f64;
        Estimate {
            value: avg,
            err: libm::sqrt(var / SHIFTS as f64),
        }
    }
}

/// The kernel of one diagram for one word over `[s, t]`, a function of the
/// free times at the single positions.
#[derive(Debug, Clone)]
pub struct ChaosKernel<M> {
    diagram: Diagram,
    word: Word,
    model: M,
    s: f64,
    t: f64,
}

impl<M: CovarianceModel> ChaosKernel<M> {
    pub fn new(diagram: Diagram, word: Word, model: M, s: f64, t: f64) -> Result<Self> {
        if word.len() != diagram.n() {
            return Err(Error::LengthMismatch {
                expected: diagram.n(),
                got: word.len(),
            });
        }
        check_interval(&model, s, t)?;
        Ok(Self {
            diagram,
            word,
            model,
            s,
            t,
        })
    }

    pub fn diagram(&self) -> &Diagram {
        &self.diagram
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.s, self.t)
    }

    pub fn chaos_order(&self) -> usize {
        self.diagram.chaos_order()
    }

    /// Positions of the free (single) variables.
    pub fn free_positions(&self) -> &[usize] {
        self.diagram.singles()
    }

    /// First elements of consecutive pairs.
    pub fn eliminated_positions(&self) -> Vec<usize> {
        (1..=self.diagram.n())
            .filter(|&p| self.diagram.is_eliminated(p))
            .collect()
    }

    /// Positions carrying integration variables before any exact
    /// reduction.
    pub fn retained_positions(&self) -> Vec<usize> {
        let singles = self.diagram.singles();
        (1..=self.diagram.n())
            .filter(|&p| !self.diagram.is_eliminated(p) && !singles.contains(&p))
            .collect()
    }

    /// Letters the word requires at the free positions.
    pub fn free_letters(&self) -> Vec<usize> {
        self.free_positions()
            .iter()
            .map(|&p| self.word.letters()[p - 1])
            .collect()
    }

    /// Integration variables left after the configured exact reductions.
    pub fn quadrature_dims(&self, cfg: &QuadratureConfig) -> usize {
        Layout::new(&self.diagram, cfg.closed_form_reductions).dims()
    }

    /// Evaluates the kernel; see [`eval_kernel`].
    pub fn eval(&self, free_times: &[f64], free_indices: &[usize], cfg: &QuadratureConfig) -> Result<Estimate> {
        eval_kernel(self, free_times, free_indices, cfg)
    }
}

/// Validates `0 ≤ s ≤ t ≤ horizon`.
pub fn check_interval<M: CovarianceModel + ?Sized>(model: &M, s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            value: s,
            reason: "interval must start at a nonnegative time",
        });
    }
    if !(t >= s) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "interval end must not precede its start",
        });
    }
    if t > model.horizon() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "interval end exceeds the model horizon",
        });
    }
    Ok(())
}

/// Value of the kernel at the free times `v₁ < … < v_m` with letters
/// `free_indices`.
///
/// Returns zero when the free times are not strictly increasing inside
/// `(s, t)`, when the letters differ from the word at the free positions,
/// or when a pair of the diagram joins different letters.
pub fn eval_kernel<M: CovarianceModel>(
    kernel: &ChaosKernel<M>,
    free_times: &[f64],
    free_indices: &[usize],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    let m = kernel.chaos_order();
    if free_times.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: free_times.len(),
        });
    }
    if free_indices.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: free_indices.len(),
        });
    }
    if kernel.free_letters() != free_indices || !index_compatible(&kernel.diagram, &kernel.word)? {
        return Ok(Estimate::ZERO);
    }
    let (s, t) = (kernel.s, kernel.t);
    let mut prev = s;
    for &v in free_times {
        if !(v > prev) {
            return Ok(Estimate::ZERO);
        }
        prev = v;
    }
    if !(t > prev) {
        return Ok(Estimate::ZERO);
    }
    integrate_diagram(&kernel.diagram, &kernel.model, s, t, free_times, cfg)
}

fn integrate_diagram<M: CovarianceModel + ?Sized>(
    diagram: &Diagram,
    model: &M,
    s: f64,
    t: f64,
    free_times: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let layout = Layout::new(diagram, cfg.closed_form_reductions);
    let nominal = diagram.integration_count();
    let rel_tol = cfg.rel_tol_for(nominal);
    let eval = Evaluator {
        layout: &layout,
        model,
        s,
        t,
        singular: model.is_singular(),
        params: RuleParams {
            rel_tol,
            abs_tol: cfg.abs_tol,
            max_level: cfg.max_depth,
        },
    };
    let slots = layout.positions.len();
    let mut fr = Frame {
        pos: vec![0.0; slots],
        gap: vec![0.0; slots],
        gap_end: 0.0,
    };
    // Fixed points first; gaps adjacent to variables are set while binding.
    let mut last = s;
    for (i, kind) in layout.kinds.iter().enumerate() {
        if let SlotKind::Free(k) = *kind {
            fr.pos[i] = free_times[k];
            fr.gap[i] = free_times[k] - last;
            last = free_times[k];
        } else {
            last = f64::NAN;
        }
    }
    fr.gap_end = t - last;

    let mut scale = 1.0;
    for f in &layout.constant {
        scale *= eval.factor(f, &fr);
    }
    let dims = layout.dims();
    if dims == 0 || scale == 0.0 {
        return Ok(Estimate::exact(scale));
    }
    let fallback = cfg.mc_fallback_samples > 0;
    let p = cfg.grading_for(model.hoelder());
    if dims > MAX_NESTED_DIMS {
        if !fallback {
            return Err(Error::Capability {
                what: "integration variables for deterministic quadrature",
                value: dims as u64,
                limit: MAX_NESTED_DIMS as u64,
            });
        }
        return Ok(eval.qmc(cfg.mc_fallback_samples, cfg.rng_seed, p, &mut fr).scale(scale));
    }
    let range = eval.fixed_range(0, &fr);
    let est = eval.nested(0, range, cfg.abs_tol / scale.abs(), &mut fr).scale(scale);
    // Errors of all nested rules are propagated into `est.err`; each level
    // may use up its own tolerance.
    let allowed = (dims + 1) as f64 * cfg.abs_tol.max(rel_tol * est.value.abs());
    if est.err <= allowed {
        return Ok(est);
    }
    if dims > 4 && fallback {
        return Ok(eval.qmc(cfg.mc_fallback_samples, cfg.rng_seed, p, &mut fr).scale(scale));
    }
    Err(Error::Quadrature {
        estimate: est.value,
        error: est.err,
    })
}

/// The full simplex integral of a diagram without singles.
pub fn diagram_scalar<M: CovarianceModel + ?Sized>(
    diagram: &Diagram,
    model: &M,
    s: f64,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if diagram.chaos_order() != 0 {
        return Err(Error::InvalidDiagram("diagram_scalar needs a diagram without singles"));
    }
    check_interval(model, s, t)?;
    if diagram.n() == 0 {
        return Ok(Estimate::exact(1.0));
    }
    if s == t {
        return Ok(Estimate::ZERO);
    }
    integrate_diagram(diagram, model, s, t, &[], cfg)
}

/// One kernel per diagram in 𝒫ⁿₘ for the given word, in enumeration order.
/// A parity mismatch gives an empty list.
pub fn chaos_projection_kernels<M: CovarianceModel + Clone>(
    model: &M,
    word: &Word,
    m: usize,
    s: f64,
    t: f64,
) -> Result<Vec<ChaosKernel<M>>> {
    check_interval(model, s, t)?;
    let n = word.len();
    if m > n || (n - m) % 2 == 1 {
        return Ok(Vec::new());
    }
    enumerate_pairings(n, m)?
        .into_iter()
        .map(|d| ChaosKernel::new(d, word.clone(), model.clone(), s, t))
        .collect()
}

/// Integral of a single diagram, as reported alongside expected signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramTerm {
    pub diagram: Diagram,
    pub estimate: Estimate,
}

/// Expected signature with per-coefficient error bounds and the diagram
/// integrals it was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedSignature {
    pub value: TensorPolynomial,
    /// Sum of the error bounds of the diagrams contributing to each word.
    pub error: TensorPolynomial,
    /// Diagram integrals of every even level `2..=depth`.
    pub terms: Vec<DiagramTerm>,
}

/// Checks the capability limits of [`expected_signature`].
pub fn check_signature_request(dim: usize, depth: usize) -> Result<()> {
    if depth > MAX_LEVEL {
        return Err(Error::Capability {
            what: "expected signature level",
            value: depth as u64,
            limit: MAX_LEVEL as u64,
        });
    }
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Capability {
            what: "path dimension",
            value: dim as u64,
            limit: MAX_DIM as u64,
        });
    }
    Ok(())
}

/// Diagrams without singles at every even level up to `depth`, in the order
/// in which [`expected_signature`] evaluates them.
pub fn signature_diagrams(depth: usize) -> Result<Vec<Diagram>> {
    let mut out = Vec::new();
    for n in (2..=depth).step_by(2) {
        out.extend(enumerate_pairings(n, 0)?);
    }
    Ok(out)
}

/// Sums diagram integrals into expected signature coefficients: the
/// coefficient of a word is the sum over the diagrams whose pairs join
/// equal letters. `terms` must cover every diagram of
/// [`signature_diagrams`]`(depth)`.
pub fn assemble_expected_signature(dim: usize, depth: usize, terms: Vec<DiagramTerm>) -> Result<ExpectedSignature> {
    let mut value = TensorPolynomial::identity(dim, depth);
    let mut error = TensorPolynomial::zero(dim, depth);
    for n in (2..=depth).step_by(2) {
        let level: Vec<&DiagramTerm> = terms.iter().filter(|d| d.diagram.n() == n).collect();
        for word in Word::all(dim, n) {
            let mut v = 0.0;
            let mut e = 0.0;
            for term in &level {
                if index_compatible(&term.diagram, &word)? {
                    v += term.estimate.value;
                    e += term.estimate.err;
                }
            }
            value.set(&word, v)?;
            error.set(&word, e)?;
        }
    }
    Ok(ExpectedSignature { value, error, terms })
}

/// Expected signature of the `dim`-dimensional process with i.i.d.
/// components over `[s, t]`, truncated at `depth ≤ 6`, `dim ≤ 4`.
pub fn expected_signature<M: CovarianceModel + ?Sized>(
    model: &M,
    dim: usize,
    depth: usize,
    s: f64,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<ExpectedSignature> {
    check_signature_request(dim, depth)?;
    check_interval(model, s, t)?;
    cfg.validate()?;
    if s == t {
        return Ok(ExpectedSignature {
            value: TensorPolynomial::identity(dim, depth),
            error: TensorPolynomial::zero(dim, depth),
            terms: Vec::new(),
        });
    }
    let terms = signature_diagrams(depth)?
        .into_iter()
        .map(|diagram| {
            let estimate = diagram_scalar(&diagram, model, s, t, cfg)?;
            Ok(DiagramTerm { diagram, estimate })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_expected_signature(dim, depth, terms)
}
