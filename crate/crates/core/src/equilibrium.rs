//! Splitting method for the equilibrium problem
//! `find x ∈ C ∩ S with F(x, y) + <Bx, y - x> >= 0 for all y ∈ C`,
//! where `S = ∩_i S_i` and the constraint sets are activated in blocks
//! `I_n` through weighted averages of projections:
//!
//! ```text
//! y_n     = x_n - γ_n (B x_n + e1_n)
//! q_n     ∈ J^{δ_n}_{γ_n F} y_n
//! r_n     = q_n - γ_n (B q_n + e2_n)
//! z_n     = x_n - y_n + r_n
//! x_{n+1} = Σ_{i ∈ I_n} ω_{i,n} P_{S_i} z_n
//! ```
//!
//! `J_{γF} x` is the unique `z ∈ C` with `γF(z, y) + <z - x, y - z> >= 0`
//! for every `y ∈ C`. Approximate resolvents are produced by perturbing the
//! exact one by at most `sqrt(δ_n)` and projecting back onto `C`.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    sequence_perturbation, ErrorSchedule, IterateTrace, ProblemSpec, RunStatus, StepRecord, StopReason, StopRule,
};
use crate::error::{Error, Result};
use crate::operators::{forward_operator, FirmOp, MonotoneMap};
use crate::oracles::solve_affine_kkt;
use crate::schedules::{DeltaSchedule, ErrorSequence, GammaSchedule, Relaxation};
use crate::vector_space::{ConvexSet, HalfSpace, Matrix, Vector, FEASIBILITY_TOL};

/// Tolerance of `F(x, x) = 0` and `F(x, y) + F(y, x) <= 0` in certificates.
pub const BIFUNCTION_TOL: f64 = 1e-10;
/// Tolerance of the sampled midpoint convexity of `F(x, ·)`.
pub const CONVEXITY_TOL: f64 = 1e-9;
/// Tolerance on `Σ ω_{i,n} = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

const INNER_MAX_ITER: usize = 1_000_000;
const INNER_TOL: f64 = 1e-14;

/// Convex quadratic `g(y) = ½<Hy, y> + <l, y>` with `H` symmetric positive
/// semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    hessian: Matrix,
    linear: Vector,
}

impl Quadratic {
    pub fn new(hessian: Matrix, linear: Vector) -> Result<Self> {
        if !hessian.is_square() {
            return Err(Error::InvalidParameter("hessian must be square".into()));
        }
        linear.check_dim(hessian.rows())?;
        let scale = hessian.data().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let d = hessian.rows();
        for i in 0..d {
            for j in 0..i {
                if (hessian.get(i, j) - hessian.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter("hessian must be symmetric".into()));
                }
            }
        }
        if hessian.symmetric_part_min_eigenvalue() < -1e-12 * scale {
            return Err(Error::InvalidParameter("hessian must be positive semidefinite".into()));
        }
        Ok(Self { hessian, linear })
    }

    /// `g(y) = ½||y - p||²` up to a constant.
    pub fn distance_squared(p: &Vector) -> Self {
        Self { hessian: Matrix::identity(p.dim()), linear: p.scale(-1.0) }
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    pub fn linear(&self) -> &Vector {
        &self.linear
    }

    pub fn value(&self, y: &Vector) -> f64 {
        let hy = self.hessian.mul_vec(y).expect("dimension checked by caller");
        0.5 * hy.dot(y) + self.linear.dot(y)
    }
}

type EvalFn = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;
type BifunctionResolveFn = Arc<dyn Fn(f64, &Vector) -> Result<Vector> + Send + Sync>;

#[derive(Clone)]
enum Structure {
    /// `F(x, y) = g(y) - g(x)`.
    DifferenceOfValues(Quadratic),
    /// `F(x, y) = <Mx + u, y - x>` with `M` monotone.
    LinearVi {
        matrix: Matrix,
        offset: Vector,
    },
    Custom {
        eval: EvalFn,
        resolve: BifunctionResolveFn,
    },
}

/// A bifunction `F: C × C → ℝ` together with its resolvent.
#[derive(Clone)]
pub struct Bifunction {
    dim: usize,
    set: ConvexSet,
    structure: Structure,
}

impl Bifunction {
    pub fn difference_of_values(set: ConvexSet, g: Quadratic) -> Result<Self> {
        let dim = g.dim();
        check_set_dim(&set, dim)?;
        Ok(Self { dim, set, structure: Structure::DifferenceOfValues(g) })
    }

    pub fn linear_vi(set: ConvexSet, matrix: Matrix, offset: Vector) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidParameter("matrix must be square".into()));
        }
        let dim = matrix.rows();
        offset.check_dim(dim)?;
        check_set_dim(&set, dim)?;
        if matrix.symmetric_part_min_eigenvalue() < -1e-10 {
            return Err(Error::InvalidParameter("matrix is not monotone".into()));
        }
        Ok(Self { dim, set, structure: Structure::LinearVi { matrix, offset } })
    }

    /// User bifunction. `resolve(γ, x)` must return `J_{γF} x`; the
    /// equilibrium assumptions, hemicontinuity included, are the caller's
    /// obligation.
    pub fn custom(
        dim: usize,
        set: ConvexSet,
        eval: impl Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
        resolve: impl Fn(f64, &Vector) -> Result<Vector> + Send + Sync + 'static,
    ) -> Result<Self> {
        check_set_dim(&set, dim)?;
        Ok(Self { dim, set, structure: Structure::Custom { eval: Arc::new(eval), resolve: Arc::new(resolve) } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&self) -> &ConvexSet {
        &self.set
    }

    pub fn structure_name(&self) -> &'static str {
        match self.structure {
            Structure::DifferenceOfValues(_) => "difference-of-values",
            Structure::LinearVi { .. } => "linear-vi",
            Structure::Custom { .. } => "custom",
        }
    }

    pub fn eval(&self, x: &Vector, y: &Vector) -> f64 {
        match &self.structure {
            Structure::DifferenceOfValues(g) => g.value(y) - g.value(x),
            Structure::LinearVi { matrix, offset } => {
                let mx = matrix.mul_vec(x).expect("dimension checked by caller");
                (&mx + offset).dot(&(y - x))
            }
            Structure::Custom { eval, .. } => eval(x, y),
        }
    }

    /// `J_{γF} x`.
    pub fn exact_resolvent(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim)?;
        check_gamma(gamma)?;
        match &self.structure {
            Structure::DifferenceOfValues(g) => exact_resolvent_dc(g, &self.set, gamma, x),
            Structure::LinearVi { matrix, offset } => {
                let a = matrix.scale(gamma).add_identity(1.0);
                solve_affine_vi(&a, &x.axpy(-gamma, offset), &self.set)
            }
            Structure::Custom { resolve, .. } => resolve(gamma, x),
        }
    }

    /// `J_{γF}` as an operator.
    pub fn resolvent_op(&self, gamma: f64) -> FirmOp {
        let f = self.clone();
        FirmOp::new(self.dim, move |x| f.exact_resolvent(gamma, x))
    }

    /// `γF(q, y) + <q - x, y - q>`: nonnegative for every `y ∈ C` exactly
    /// when `q = J_{γF} x`.
    pub fn resolvent_defect(&self, gamma: f64, x: &Vector, q: &Vector, y: &Vector) -> f64 {
        gamma * self.eval(q, y) + (q - x).dot(&(y - q))
    }

    /// Samples the equilibrium assumptions on points of `C`: `F(x, x) = 0`,
    /// `F(x, y) + F(y, x) <= 0` and midpoint convexity of `F(x, ·)`.
    pub fn certify(&self, samples: usize, seed: u64) -> BifunctionReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = BifunctionReport {
            worst_diagonal: 0.0,
            worst_monotone: f64::NEG_INFINITY,
            worst_convexity: f64::NEG_INFINITY,
            passed: false,
        };
        for k in 0..samples {
            let scale = [0.5, 2.0, 10.0][k % 3];
            let x = self.set.sample(&mut rng, self.dim, scale);
            let y1 = self.set.sample(&mut rng, self.dim, scale);
            let y2 = self.set.sample(&mut rng, self.dim, scale);
            let mid = (&y1 + &y2).scale(0.5);
            report.worst_diagonal = report.worst_diagonal.max(self.eval(&x, &x).abs());
            report.worst_monotone = report.worst_monotone.max(self.eval(&x, &y1) + self.eval(&y1, &x));
            report.worst_convexity =
                report.worst_convexity.max(self.eval(&x, &mid) - 0.5 * (self.eval(&x, &y1) + self.eval(&x, &y2)));
        }
        report.passed = report.worst_diagonal <= BIFUNCTION_TOL
            && report.worst_monotone <= BIFUNCTION_TOL
            && report.worst_convexity <= CONVEXITY_TOL;
        report
    }
}

impl fmt::Debug for Bifunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bifunction")
            .field("dim", &self.dim)
            .field("set", &self.set)
            .field("structure", &self.structure_name())
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BifunctionReport {
    /// `max |F(x, x)|`.
    pub worst_diagonal: f64,
    /// `max F(x, y) + F(y, x)`.
    pub worst_monotone: f64,
    /// `max F(x, (y1+y2)/2) - (F(x, y1) + F(x, y2))/2`.
    pub worst_convexity: f64,
    pub passed: bool,
}

fn check_set_dim(set: &ConvexSet, dim: usize) -> Result<()> {
    match set.dim() {
        Some(d) if d != dim => Err(Error::DimensionMismatch { expected: dim, got: d }),
        _ => Ok(()),
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("resolvent parameter must be positive, got {gamma}")))
    }
}

/// `argmin_{y ∈ C} γ g(y) + ½||y - x||²`.
pub fn exact_resolvent_dc(g: &Quadratic, set: &ConvexSet, gamma: f64, x: &Vector) -> Result<Vector> {
    x.check_dim(g.dim())?;
    check_set_dim(set, g.dim())?;
    check_gamma(gamma)?;
    let a = g.hessian.scale(gamma).add_identity(1.0);
    solve_affine_vi(&a, &x.axpy(-gamma, &g.linear), set)
}

/// Finds `z ∈ C` with `<Az - b, y - z> >= 0` for all `y ∈ C`, where the
/// symmetric part of `A` dominates the identity. For symmetric `A` this is
/// the minimizer of `½<Az, z> - <b, z>` over `C`.
fn solve_affine_vi(a: &Matrix, b: &Vector, set: &ConvexSet) -> Result<Vector> {
    if let Some(s) = a.as_scaled_identity() {
        return set.project(&b.scale(1.0 / s));
    }
    match set {
        ConvexSet::Whole => a.solve(b),
        ConvexSet::HalfSpace(h) => {
            let free = a.solve(b)?;
            if h.contains(&free, 0.0) {
                return Ok(free);
            }
            // KKT: Az - b + μ a_h = 0 with the constraint active.
            let w = a.solve(h.normal())?;
            let mu = (h.normal().dot(&free) - h.offset()) / h.normal().dot(&w);
            Ok(free.axpy(-mu, &w))
        }
        ConvexSet::Box(bx) if a.is_diagonal() => {
            Ok(Vector::new((0..b.dim()).map(|i| (b[i] / a.get(i, i)).clamp(bx.lower()[i], bx.upper()[i])).collect())?)
        }
        ConvexSet::Ball(ball) => {
            // z(μ) = c + (A + μI)^{-1}(b - Ac); ||z(μ) - c|| decreases in μ.
            let c = ball.center();
            let v = b - &a.mul_vec(c)?;
            let offset = |mu: f64| a.add_identity(mu).solve(&v);
            let free = offset(0.0)?;
            if free.norm() <= ball.radius() {
                return Ok(c + &free);
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            while offset(hi)?.norm() > ball.radius() {
                lo = hi;
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if offset(mid)?.norm() > ball.radius() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            ball.project(&(c + &offset(hi)?))
        }
        ConvexSet::Box(bx) if b.dim() <= 4 => Ok(solve_affine_kkt(a, &b.scale(-1.0), bx)?.point),
        _ => projected_iteration(a, b, set),
    }
}

/// `z ← P_C(z - τ(Az - b))` with `τ = 1/||A||²`, a contraction because
/// `<Av, v> >= ||v||²`.
fn projected_iteration(a: &Matrix, b: &Vector, set: &ConvexSet) -> Result<Vector> {
    let lip = a.spectral_norm();
    let tau = 1.0 / (lip * lip);
    let mut z = set.project(b)?;
    let mut change = f64::INFINITY;
    for _ in 0..INNER_MAX_ITER {
        let grad = &a.mul_vec(&z)? - b;
        let next = set.project(&z.axpy(-tau, &grad))?;
        change = next.dist(&z);
        z = next;
        if change <= INNER_TOL * z.norm().max(1.0) {
            return Ok(z);
        }
    }
    Err(Error::InnerSolver { iterations: INNER_MAX_ITER, residual: change })
}

/// A member of `J^δ_{γF} x`: the exact resolvent shifted by `perturbation`
/// and projected back onto `C`, so that `||q - J_{γF} x|| <= sqrt(δ)`.
pub fn delta_resolvent(f: &Bifunction, gamma: f64, delta: f64, x: &Vector, perturbation: &Vector) -> Result<Vector> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be nonnegative, got {delta}")));
    }
    perturbation.check_dim(f.dim)?;
    let bound = delta.sqrt();
    let norm = perturbation.norm();
    if norm > bound * (1.0 + 1e-12) {
        return Err(Error::PerturbationTooLarge { norm, bound });
    }
    let exact = f.exact_resolvent(gamma, x)?;
    if norm == 0.0 {
        return Ok(exact);
    }
    let q = f.set.project(&(&exact + perturbation))?;
    debug_assert!(q.dist(&exact) <= bound * (1.0 + 1e-12) + 1e-15);
    Ok(q)
}

/// Index blocks `I_n ⊂ {0, ..., count-1}` (0-based) with declared recurrence
/// windows `M_i` and block size bound `N`.
#[derive(Clone, Debug, PartialEq)]
pub enum IndexControl {
    /// `I_n = {n mod count}`: `M_i = count`, `N = 1`.
    Cyclic { count: usize },
    /// `I_n = I` for every `n`: `M_i = 1`, `N = count`.
    Full { count: usize },
    /// `I_n = pattern[n mod pattern.len()]` with declared windows.
    Explicit { count: usize, pattern: Vec<Vec<usize>>, windows: Vec<usize>, max_card: usize },
    /// Consecutive blocks of `L = min(count, ceil(count / max_card) + 1)`
    /// steps; each block
    /// distributes a random permutation of `I` over its steps with between
    /// 1 and `max_card` indices per step. Every index recurs within
    /// `2L - 1` steps.
    RandomAudited { count: usize, max_card: usize, seed: u64 },
}

impl IndexControl {
    pub fn count(&self) -> usize {
        match self {
            IndexControl::Cyclic { count }
            | IndexControl::Full { count }
            | IndexControl::Explicit { count, .. }
            | IndexControl::RandomAudited { count, .. } => *count,
        }
    }

    pub fn max_card(&self) -> usize {
        match self {
            IndexControl::Cyclic { .. } => 1,
            IndexControl::Full { count } => *count,
            IndexControl::Explicit { max_card, .. } | IndexControl::RandomAudited { max_card, .. } => *max_card,
        }
    }

    /// Declared window `M_i`.
    pub fn window(&self, i: usize) -> usize {
        match self {
            IndexControl::Cyclic { count } => *count,
            IndexControl::Full { .. } => 1,
            IndexControl::Explicit { windows, .. } => windows.get(i).copied().unwrap_or(0),
            IndexControl::RandomAudited { count, max_card, .. } => 2 * random_block_len(*count, *max_card) - 1,
        }
    }

    fn check(&self) -> Result<()> {
        let count = self.count();
        if count == 0 {
            return Err(Error::InvalidParameter("index control needs at least one index".into()));
        }
        match self {
            IndexControl::Explicit { pattern, windows, max_card, .. } => {
                if pattern.is_empty() || windows.len() != count || *max_card == 0 {
                    return Err(Error::InvalidParameter(
                        "explicit control needs a pattern, one window per index and N >= 1".into(),
                    ));
                }
            }
            IndexControl::RandomAudited { max_card, .. } if *max_card == 0 => {
                return Err(Error::InvalidParameter("random control needs N >= 1".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// `I_n`, sorted.
    pub fn block(&self, n: usize) -> Vec<usize> {
        let mut set = match self {
            IndexControl::Cyclic { count } => vec![n % count],
            IndexControl::Full { count } => (0..*count).collect(),
            IndexControl::Explicit { pattern, .. } => pattern[n % pattern.len()].clone(),
            IndexControl::RandomAudited { count, max_card, seed } => {
                let len = random_block_len(*count, *max_card);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream((n / len) as u64);
                let mut perm: Vec<usize> = (0..*count).collect();
                perm.shuffle(&mut rng);
                let mut sizes = vec![1usize; len];
                for _ in len..*count {
                    let open: Vec<usize> = (0..len).filter(|&k| sizes[k] < *max_card).collect();
                    sizes[open[rng.random_range(0..open.len())]] += 1;
                }
                let start: usize = sizes[..n % len].iter().sum();
                perm[start..start + sizes[n % len]].to_vec()
            }
        };
        set.sort_unstable();
        set
    }
}

fn random_block_len(count: usize, max_card: usize) -> usize {
    (count.div_ceil(max_card) + 1).min(count)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ControlViolation {
    /// `i ∉ I_n ∪ ... ∪ I_{n+M_i-1}`.
    Missing { n: usize, index: usize },
    /// `card I_n` outside `[1, N]`.
    Cardinality { n: usize, card: usize },
    /// `I_n` holds an index outside `I` or a repeated one.
    BadIndex { n: usize, index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlReport {
    pub horizon: usize,
    pub first_violation: Option<ControlViolation>,
}

impl ControlReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks, for every `n <= horizon`, that `1 <= card I_n <= N` and that
/// every index appears in `I_n ∪ ... ∪ I_{n+M_i-1}`.
pub fn validate_index_control(ctrl: &IndexControl, horizon: usize) -> Result<ControlReport> {
    ctrl.check()?;
    let count = ctrl.count();
    let max_window = (0..count).map(|i| ctrl.window(i)).max().unwrap_or(0);
    if horizon < max_window {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} is shorter than the largest window {max_window}"
        )));
    }
    let blocks: Vec<Vec<usize>> = (0..=horizon + max_window).map(|n| ctrl.block(n)).collect();
    let report = |v| Ok(ControlReport { horizon, first_violation: Some(v) });
    for n in 0..=horizon {
        let block = &blocks[n];
        if block.is_empty() || block.len() > ctrl.max_card() {
            return report(ControlViolation::Cardinality { n, card: block.len() });
        }
        if let Some(&index) = block.iter().find(|&&i| i >= count) {
            return report(ControlViolation::BadIndex { n, index });
        }
        if let Some(w) = block.windows(2).find(|w| w[0] == w[1]) {
            return report(ControlViolation::BadIndex { n, index: w[0] });
        }
        for i in 0..count {
            let m = ctrl.window(i);
            if m == 0 || !blocks[n..n + m].iter().any(|b| b.contains(&i)) {
                return report(ControlViolation::Missing { n, index: i });
            }
        }
    }
    Ok(ControlReport { horizon, first_violation: None })
}

pub type WeightFn = Arc<dyn Fn(usize, &[usize]) -> Vec<f64> + Send + Sync>;

/// Weights `ω_{i,n}` on the active block, summing to one and at least `ε`.
#[derive(Clone, Default)]
pub enum WeightScheme {
    /// `ω_{i,n} = 1 / card I_n`.
    #[default]
    Uniform,
    /// `(n, I_n) ↦ weights` in the order of `I_n`.
    Custom(WeightFn),
}

impl WeightScheme {
    pub fn custom(f: impl Fn(usize, &[usize]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        WeightScheme::Custom(Arc::new(f))
    }

    pub fn weights(&self, n: usize, block: &[usize], epsilon: f64) -> Result<Vec<f64>> {
        let w = match self {
            WeightScheme::Uniform => vec![1.0 / block.len() as f64; block.len()],
            WeightScheme::Custom(f) => f(n, block),
        };
        if w.len() != block.len() {
            return Err(Error::InvalidParameter(format!("{} weights for {} active sets", w.len(), block.len())));
        }
        if let Some(&bad) = w.iter().find(|&&v| !(v >= epsilon && v <= 1.0)) {
            return Err(Error::ScheduleOutOfRange {
                what: "omega",
                iteration: n,
                value: bad,
                lower: epsilon,
                upper: 1.0,
            });
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!("weights at n = {n} sum to {sum}")));
        }
        Ok(w)
    }
}

impl fmt::Debug for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::Uniform => write!(f, "Uniform"),
            WeightScheme::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// `Σ_i ω_i P_{S_i} z`, summed in the given order.
pub fn averaged_projection(sets: &[ConvexSet], weights: &[f64], z: &Vector) -> Result<Vector> {
    if sets.len() != weights.len() || sets.is_empty() {
        return Err(Error::InvalidParameter(format!("{} weights for {} sets", weights.len(), sets.len())));
    }
    sets.iter().zip(weights).try_fold(Vector::zeros(z.dim()), |acc, (s, w)| Ok(acc.axpy(*w, &s.project(z)?)))
}

/// `H(z) = {w : <w - Qz, z - Qz> <= 0}` for `Qz` the averaged projection of
/// `z`; it contains every common point of the sets, and projecting `z` onto
/// it gives `Qz`. `None` when `z = Qz`.
pub fn averaged_projection_halfspace(z: &Vector, qz: &Vector) -> Result<Option<HalfSpace>> {
    let normal = z - qz;
    if normal.norm_sq() == 0.0 {
        return Ok(None);
    }
    let offset = qz.dot(&normal);
    Ok(Some(HalfSpace::new(normal, offset)?))
}

/// How the member of `J^{δ_n}` is chosen.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum PerturbationRule {
    /// Always the exact resolvent.
    #[default]
    None,
    /// A point drawn uniformly in direction and radius from the ball of
    /// radius `sqrt(δ_n)`, using stream `n` of a seeded generator.
    Seeded { seed: u64 },
}

impl PerturbationRule {
    pub fn at(&self, n: usize, delta: f64, dim: usize) -> Vector {
        match self {
            PerturbationRule::None => Vector::zeros(dim),
            PerturbationRule::Seeded { seed } => {
                if delta == 0.0 {
                    return Vector::zeros(dim);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(n as u64);
                let radius: f64 = rng.random_range(0.0..=1.0);
                Vector::random_unit(&mut rng, dim).scale(radius * delta.sqrt())
            }
        }
    }
}

/// `find x ∈ C ∩ S_0 ∩ ... ∩ S_{m-1}` solving the equilibrium problem for
/// `F + <B·, · - ·>`.
#[derive(Clone, Debug)]
pub struct EquilibriumProblem {
    dim: usize,
    bifunction: Bifunction,
    forward: MonotoneMap,
    sets: Vec<ConvexSet>,
    epsilon: f64,
}

impl EquilibriumProblem {
    pub fn new(bifunction: Bifunction, forward: MonotoneMap, sets: Vec<ConvexSet>, epsilon: f64) -> Result<Self> {
        let dim = bifunction.dim();
        if forward.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: forward.dim() });
        }
        if sets.is_empty() {
            return Err(Error::InvalidParameter("at least one constraint set is required".into()));
        }
        for s in &sets {
            check_set_dim(s, dim)?;
        }
        let bound = 1.0 / (forward.lipschitz() + 1.0);
        if !(epsilon > 0.0 && epsilon < bound) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, {bound}), got {epsilon}")));
        }
        Ok(Self { dim, bifunction, forward, sets, epsilon })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn bifunction(&self) -> &Bifunction {
        &self.bifunction
    }

    pub fn forward(&self) -> &MonotoneMap {
        &self.forward
    }

    pub fn sets(&self) -> &[ConvexSet] {
        &self.sets
    }

    /// `max_i d(x, S_i)`.
    pub fn infeasibility(&self, x: &Vector) -> Result<f64> {
        self.sets.iter().try_fold(0.0_f64, |m, s| Ok(m.max(s.distance(x)?)))
    }

    /// `||J_{γF}(x - γBx) - x||`.
    pub fn equilibrium_residual(&self, gamma: f64, x: &Vector) -> Result<f64> {
        let y = x.axpy(-gamma, &self.forward.eval(x)?);
        Ok(self.bifunction.exact_resolvent(gamma, &y)?.dist(x))
    }
}

/// Parameter sequences of the equilibrium method.
#[derive(Clone, Debug)]
pub struct EquilibriumSchedules {
    pub gamma: GammaSchedule,
    pub delta: DeltaSchedule,
    pub control: IndexControl,
    pub weights: WeightScheme,
    pub perturbation: PerturbationRule,
}

impl EquilibriumSchedules {
    /// Exact resolvents, uniform weights and the given control.
    pub fn exact(gamma: GammaSchedule, control: IndexControl) -> Self {
        Self {
            gamma,
            delta: DeltaSchedule::Exact,
            control,
            weights: WeightScheme::Uniform,
            perturbation: PerturbationRule::None,
        }
    }
}

/// Perturbations of the two forward evaluations.
#[derive(Clone, Debug)]
pub struct EquilibriumErrors {
    pub e1: ErrorSequence,
    pub e2: ErrorSequence,
}

impl EquilibriumErrors {
    pub fn zero() -> Self {
        Self { e1: ErrorSequence::Zero, e2: ErrorSequence::Zero }
    }
}

fn active_sets(p: &EquilibriumProblem, s: &EquilibriumSchedules, n: usize) -> Result<(Vec<ConvexSet>, Vec<f64>)> {
    let block = s.control.block(n);
    if block.is_empty() || block.len() > s.control.max_card() {
        return Err(Error::InvalidParameter(format!("block I_{n} has {} indices", block.len())));
    }
    let sets = block
        .iter()
        .map(|&i| p.sets.get(i).cloned().ok_or_else(|| Error::InvalidParameter(format!("index {i} has no set"))))
        .collect::<Result<Vec<_>>>()?;
    let weights = s.weights.weights(n, &block, p.epsilon)?;
    Ok((sets, weights))
}

/// One iteration. The record's `error_bound` is
/// `3γ||e1|| + 2 sqrt(δ) + γ||e2||`.
pub fn equilibrium_step(
    p: &EquilibriumProblem,
    s: &EquilibriumSchedules,
    errs: &EquilibriumErrors,
    n: usize,
    x: &Vector,
) -> Result<StepRecord> {
    x.check_dim(p.dim)?;
    let b_dom = p.forward.domain();
    if !b_dom.contains(x, FEASIBILITY_TOL) {
        return Err(Error::OutsideDomain { operator: "B", iteration: n });
    }
    let gamma = s.gamma.at(n, p.epsilon, p.forward.lipschitz())?;
    let delta = s.delta.at(n)?;
    let e1 = errs.e1.at(n, p.dim);
    let e2 = errs.e2.at(n, p.dim);

    let y = x.axpy(-gamma, &(&p.forward.eval(x)? + &e1));
    let q = delta_resolvent(&p.bifunction, gamma, delta, &y, &s.perturbation.at(n, delta, p.dim))?;
    if !b_dom.contains(&q, FEASIBILITY_TOL) {
        return Err(Error::OutsideDomain { operator: "B", iteration: n });
    }
    let r = q.axpy(-gamma, &(&p.forward.eval(&q)? + &e2));
    let z = &(x - &y) + &r;
    let (sets, weights) = active_sets(p, s, n)?;
    let next = averaged_projection(&sets, &weights, &z)?;

    Ok(StepRecord {
        n,
        residual: q.dist(x),
        outer_gap: z.dist(&next),
        error_bound: 3.0 * gamma * e1.norm() + 2.0 * delta.sqrt() + gamma * e2.norm(),
        dist_to_ref: None,
        feasibility: p.infeasibility(x)?,
        lambda: 1.0,
        beta: gamma * p.forward.lipschitz(),
        shadow_error: None,
        x: x.clone(),
        y,
        q,
        r,
        z,
        qz: next.clone(),
        next,
    })
}

#[derive(Clone, Debug)]
pub struct EquilibriumOptions {
    pub stop: StopRule,
    /// Bound on `max_i d(x, S_i)` for an accepted solution.
    pub feas_tol: f64,
    /// Bound on the equilibrium residual for an accepted solution.
    pub residual_tol: f64,
    pub reference: Option<Vector>,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self { stop: StopRule::default(), feas_tol: 1e-8, residual_tol: 1e-8, reference: None }
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumSolution {
    pub trace: IterateTrace,
    pub status: RunStatus,
    pub solution: Option<Vector>,
    pub last: Vector,
    /// `max_i d(last, S_i)`.
    pub feasibility: f64,
    /// Equilibrium residual at `last` for the last step size.
    pub residual: f64,
}

/// Runs [`equilibrium_step`] until the step residual and outer gap fall
/// below `stop.tol` at a point close to every `S_i` with a small
/// equilibrium residual.
pub fn solve_equilibrium(
    p: &EquilibriumProblem,
    s: &EquilibriumSchedules,
    errs: &EquilibriumErrors,
    x0: &Vector,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    x0.check_dim(p.dim)?;
    if !s.delta.sqrt_summable() {
        return Err(Error::InvalidParameter("the square roots of delta must be summable".into()));
    }
    errs.e1.check_summable(0, p.dim)?;
    errs.e2.check_summable(0, p.dim)?;
    let chi = p.forward.lipschitz();
    let mut gamma = s.gamma.at(0, p.epsilon, chi)?;
    let mut trace = IterateTrace::default();
    let mut x = x0.clone();
    let mut status = RunStatus::MaxIterations;
    for n in 0..opts.stop.max_iter {
        if !p.forward.domain().contains(&x, FEASIBILITY_TOL) {
            if n == 0 {
                return Err(Error::OutsideDomain { operator: "B", iteration: 0 });
            }
            status = RunStatus::DomainStop(StopReason::NextOutsideDomain);
            break;
        }
        let mut rec = match equilibrium_step(p, s, errs, n, &x) {
            Ok(rec) => rec,
            Err(Error::OutsideDomain { .. }) => {
                status = RunStatus::DomainStop(StopReason::QOutsideDomain);
                break;
            }
            Err(e) => return Err(e),
        };
        gamma = s.gamma.at(n, p.epsilon, chi)?;
        rec.dist_to_ref = opts.reference.as_ref().map(|z| x.dist(z));
        let small_step = rec.residual.max(rec.outer_gap) <= opts.stop.tol;
        x = rec.next.clone();
        trace.records.push(rec);
        if small_step
            && p.infeasibility(&x)? <= opts.feas_tol
            && p.equilibrium_residual(gamma, &x)? <= opts.residual_tol
        {
            status = RunStatus::Converged;
            break;
        }
    }
    let feasibility = p.infeasibility(&x)?;
    let residual = p.equilibrium_residual(gamma, &x)?;
    Ok(EquilibriumSolution {
        trace,
        status,
        solution: (status == RunStatus::Converged).then(|| x.clone()),
        last: x,
        feasibility,
        residual,
    })
}

/// Expresses the equilibrium problem as data for the generic engine:
/// `T_n = J_{γ_n F}`, `R_n = Id - γ_n B`, `a_n = -γ_n e1_n`,
/// `b_n = q_n - J_{γ_n F} y_n`, `c_n = -γ_n e2_n`, `λ_n = 1` and `Q_n` the
/// projector onto the half-space of [`averaged_projection_halfspace`].
pub fn as_engine_spec(
    p: &EquilibriumProblem,
    s: &EquilibriumSchedules,
    errs: &EquilibriumErrors,
) -> Result<(ProblemSpec, ErrorSchedule, Relaxation)> {
    let (eps, chi) = (p.epsilon, p.forward.lipschitz());
    let gamma_at = {
        let g = s.gamma.clone();
        Arc::new(move |n: usize| g.at(n, eps, chi))
    };
    let t_gamma = Arc::clone(&gamma_at);
    let f = p.bifunction.clone();
    let r_gamma = Arc::clone(&gamma_at);
    let forward = p.forward.clone();
    let (outer_p, outer_s) = (p.clone(), s.clone());
    let feas_p = p.clone();

    let spec = ProblemSpec::new(p.dim, p.epsilon)?
        .with_t(move |n| Ok(f.resolvent_op(t_gamma(n)?)))
        .with_r(move |n| forward_operator(&forward, r_gamma(n)?))
        .with_outer(move |n, z| {
            let (sets, weights) = active_sets(&outer_p, &outer_s, n)?;
            averaged_projection_halfspace(z, &averaged_projection(&sets, &weights, z)?)
        })
        .with_infeasibility(move |x| feas_p.infeasibility(x));

    let scaled = |seq: ErrorSequence| {
        let base = sequence_perturbation(seq);
        let g = Arc::clone(&gamma_at);
        Arc::new(move |n: usize, at: &Vector| Ok(base(n, at)?.scale(-g(n)?)))
    };
    let b_gamma = Arc::clone(&gamma_at);
    let (b_f, b_delta, b_rule) = (p.bifunction.clone(), s.delta.clone(), s.perturbation.clone());
    let errors = ErrorSchedule {
        a: scaled(errs.e1.clone()),
        b: Arc::new(move |n, y: &Vector| {
            let delta = b_delta.at(n)?;
            let pert = b_rule.at(n, delta, y.dim());
            if pert.norm_sq() == 0.0 {
                return Ok(Vector::zeros(y.dim()));
            }
            let gamma = b_gamma(n)?;
            let q = delta_resolvent(&b_f, gamma, delta, y, &pert)?;
            Ok(&q - &b_f.exact_resolvent(gamma, y)?)
        }),
        c: scaled(errs.e2.clone()),
    };
    Ok((spec, errors, Relaxation::constant(1.0)))
}
