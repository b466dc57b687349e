//! Forward-backward-forward splitting for `0 ∈ Ax + Bx` subject to
//! `f_1(x) <= 0, ..., f_m(x) <= 0`.
//!
//! The constraints are activated one at a time in cyclic order and only
//! through their subgradient projectors, so `S` itself is never projected
//! onto. With `γ_n` the step size and `i(n)` the active constraint:
//!
//! ```text
//! y_n     = x_n - γ_n (B x_n + e1_n)
//! q_n     = J_{γ_n A}(y_n + e2_n)
//! r_n     = q_n - γ_n (B q_n + e3_n)
//! z_n     = x_n - y_n + r_n
//! x_{n+1} = G_{i(n)} z_n
//! ```

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    sequence_perturbation, ErrorSchedule, IterateTrace, ProblemSpec, RunStatus, StepRecord, StopReason, StopRule,
};
use crate::error::{Error, Result};
use crate::operators::{forward_operator, MonotoneMap, ResolventOracle};
use crate::schedules::{ErrorSequence, GammaSchedule, Relaxation};
use crate::vector_space::{HalfSpace, Vector, FEASIBILITY_TOL};

/// Tolerance of the sampled subgradient inequality.
pub const SUBGRADIENT_TOL: f64 = 1e-9;

type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// A convex real-valued constraint `f(x) <= 0` with a subgradient selection.
#[derive(Clone)]
pub struct Constraint {
    label: String,
    value: ScalarFn,
    subgradient: VectorFn,
}

impl Constraint {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        subgradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), value: Arc::new(value), subgradient: Arc::new(subgradient) }
    }

    /// `f(x) = <normal, x> - offset`.
    pub fn affine(normal: Vector, offset: f64) -> Result<Self> {
        if normal.norm_sq() == 0.0 {
            return Err(Error::ZeroNormal);
        }
        let grad = normal.clone();
        Ok(Self::new("affine", move |x| normal.dot(x) - offset, move |_| grad.clone()))
    }

    /// `f(x) = ||x - center|| - radius`.
    pub fn ball_distance(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        let c = center.clone();
        Ok(Self::new(
            "ball-distance",
            move |x| x.dist(&center) - radius,
            move |x| {
                let d = x - &c;
                let n = d.norm();
                // 0 is a subgradient at the center, where f < 0 anyway.
                if n > 0.0 {
                    d.scale(1.0 / n)
                } else {
                    Vector::zeros(d.dim())
                }
            },
        ))
    }

    /// `f(x) = max_k <a_k, x> - b_k`; the subgradient is the gradient of the
    /// lowest-index active piece.
    pub fn max_affine(pieces: Vec<(Vector, f64)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidParameter("max-affine constraint needs a piece".into()));
        }
        let pieces = Arc::new(pieces);
        let p2 = Arc::clone(&pieces);
        let active = move |x: &Vector, ps: &[(Vector, f64)]| {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (k, (a, b)) in ps.iter().enumerate() {
                let val = a.dot(x) - b;
                if val > best_val {
                    best = k;
                    best_val = val;
                }
            }
            (best, best_val)
        };
        Ok(Self::new("max-affine", move |x| active(x, &pieces).1, move |x| p2[active(x, &p2).0].0.clone()))
    }

    /// `f ≡ -1`: a constraint that every point satisfies.
    pub fn trivial(dim: usize) -> Self {
        Self::new("trivial", |_| -1.0, move |_| Vector::zeros(dim))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    pub fn subgradient(&self, x: &Vector) -> Vector {
        (self.subgradient)(x)
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Constraint").field("label", &self.label).finish_non_exhaustive()
    }
}

/// Result of a subgradient projection.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgradientStep {
    pub point: Vector,
    /// `{y : <x - y, u> >= f(x)}`, which contains `lev_{<=0} f`; `None`
    /// when it is the whole space (zero subgradient at a feasible point).
    pub halfspace: Option<HalfSpace>,
}

/// Subgradient projector of `constraint` at `x`.
pub fn subgradient_project(constraint: &Constraint, x: &Vector) -> Result<SubgradientStep> {
    let fx = constraint.value(x);
    if !fx.is_finite() {
        return Err(Error::InvalidParameter(format!("constraint {} is not finite at x", constraint.label)));
    }
    let u = constraint.subgradient(x);
    u.check_dim(x.dim())?;
    let u_sq = u.norm_sq();
    if u_sq == 0.0 {
        if fx > 0.0 {
            return Err(Error::InfeasibleConstraint { value: fx });
        }
        return Ok(SubgradientStep { point: x.clone(), halfspace: None });
    }
    let halfspace = Some(HalfSpace::new(u.clone(), u.dot(x) - fx)?);
    let point = if fx > 0.0 { x.axpy(-fx / u_sq, &u) } else { x.clone() };
    Ok(SubgradientStep { point, halfspace })
}

/// Active constraint at iteration `n` (counted from 0): cycles `1, 2, ..., m`.
pub fn cyclic_index(m: usize, n: usize) -> usize {
    assert!(m >= 1, "at least one constraint is required");
    1 + n % m
}

/// `find x with 0 ∈ Ax + Bx and f_i(x) <= 0 for all i`.
#[derive(Clone, Debug)]
pub struct InclusionProblem {
    dim: usize,
    resolvent: ResolventOracle,
    forward: MonotoneMap,
    constraints: Vec<Constraint>,
    epsilon: f64,
}

impl InclusionProblem {
    pub fn new(
        resolvent: ResolventOracle,
        forward: MonotoneMap,
        constraints: Vec<Constraint>,
        epsilon: f64,
    ) -> Result<Self> {
        let dim = resolvent.dim();
        if forward.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: forward.dim() });
        }
        if constraints.is_empty() {
            return Err(Error::InvalidParameter("at least one constraint is required".into()));
        }
        let bound = 1.0 / (forward.lipschitz() + 1.0);
        if !(epsilon > 0.0 && epsilon < bound) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, {bound}), got {epsilon}")));
        }
        Ok(Self { dim, resolvent, forward, constraints, epsilon })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn resolvent(&self) -> &ResolventOracle {
        &self.resolvent
    }

    pub fn forward(&self) -> &MonotoneMap {
        &self.forward
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn gamma(&self, g: &GammaSchedule, n: usize) -> Result<f64> {
        g.at(n, self.epsilon, self.forward.lipschitz())
    }

    /// `max_i max(0, f_i(x))`.
    pub fn infeasibility(&self, x: &Vector) -> f64 {
        self.constraints.iter().fold(0.0_f64, |m, c| m.max(c.value(x)))
    }

    /// `||J_{γA}(x - γBx) - x||`, zero exactly on `zer(A + B)`.
    pub fn inclusion_residual(&self, gamma: f64, x: &Vector) -> Result<f64> {
        let y = x.axpy(-gamma, &self.forward.eval(x)?);
        Ok(self.resolvent.resolve(gamma, &y)?.dist(x))
    }

    /// Worst margin of `f(y) >= f(x) + <u(x), y - x>` over seeded pairs,
    /// for every constraint.
    pub fn verify_subgradients(&self, samples: usize, seed: u64) -> SubgradientReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for c in &self.constraints {
            for k in 0..samples {
                let scale = [0.5, 2.0, 10.0][k % 3];
                let x = Vector::random_cube(&mut rng, self.dim, scale);
                let y = Vector::random_cube(&mut rng, self.dim, scale);
                let margin = c.value(&y) - c.value(&x) - c.subgradient(&x).dot(&(&y - &x));
                worst = worst.min(margin);
            }
        }
        SubgradientReport { worst_margin: worst, passed: worst >= -SUBGRADIENT_TOL }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgradientReport {
    pub worst_margin: f64,
    pub passed: bool,
}

/// Perturbations `e1` (first forward step), `e2` (resolvent argument) and
/// `e3` (second forward step).
#[derive(Clone, Debug)]
pub struct InclusionErrors {
    pub e1: ErrorSequence,
    pub e2: ErrorSequence,
    pub e3: ErrorSequence,
}

impl InclusionErrors {
    pub fn zero() -> Self {
        Self { e1: ErrorSequence::Zero, e2: ErrorSequence::Zero, e3: ErrorSequence::Zero }
    }

    /// Three independent seeded sequences with norms `scale / (n+1)^power`.
    pub fn decaying(scale: f64, power: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            e1: ErrorSequence::decaying(scale, power, seed.wrapping_mul(3))?,
            e2: ErrorSequence::decaying(scale, power, seed.wrapping_mul(3).wrapping_add(1))?,
            e3: ErrorSequence::decaying(scale, power, seed.wrapping_mul(3).wrapping_add(2))?,
        })
    }
}

/// One iteration. The record's `error_bound` is `3γ||e1|| + 2||e2|| + γ||e3||`,
/// which dominates the engine's `3||a|| + 2||b|| + ||c||` because the
/// resolvent is nonexpansive.
pub fn tseng_step(
    p: &InclusionProblem,
    g: &GammaSchedule,
    errs: &InclusionErrors,
    n: usize,
    x: &Vector,
) -> Result<StepRecord> {
    x.check_dim(p.dim)?;
    let b_dom = p.forward.domain();
    if !b_dom.contains(x, FEASIBILITY_TOL) {
        return Err(Error::OutsideDomain { operator: "B", iteration: n });
    }
    let gamma = p.gamma(g, n)?;
    let e1 = errs.e1.at(n, p.dim);
    let e2 = errs.e2.at(n, p.dim);
    let e3 = errs.e3.at(n, p.dim);

    let y = x.axpy(-gamma, &(&p.forward.eval(x)? + &e1));
    let q = p.resolvent.resolve(gamma, &(&y + &e2))?;
    if !b_dom.contains(&q, FEASIBILITY_TOL) {
        return Err(Error::OutsideDomain { operator: "B", iteration: n });
    }
    let r = q.axpy(-gamma, &(&p.forward.eval(&q)? + &e3));
    let z = &(x - &y) + &r;
    let active = &p.constraints[cyclic_index(p.constraints.len(), n) - 1];
    let next = subgradient_project(active, &z)?.point;

    Ok(StepRecord {
        n,
        residual: q.dist(x),
        outer_gap: z.dist(&next),
        error_bound: 3.0 * gamma * e1.norm() + 2.0 * e2.norm() + gamma * e3.norm(),
        dist_to_ref: None,
        feasibility: p.infeasibility(x),
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

/// Tolerances and termination of [`solve_inclusion`].
#[derive(Clone, Debug)]
pub struct InclusionOptions {
    pub stop: StopRule,
    /// Bound on `max_i f_i(x)` for an accepted solution.
    pub feas_tol: f64,
    /// Bound on the inclusion residual for an accepted solution.
    pub residual_tol: f64,
    pub reference: Option<Vector>,
}

impl Default for InclusionOptions {
    fn default() -> Self {
        Self { stop: StopRule::default(), feas_tol: 1e-8, residual_tol: 1e-8, reference: None }
    }
}

#[derive(Clone, Debug)]
pub struct InclusionSolution {
    pub trace: IterateTrace,
    pub status: RunStatus,
    /// The accepted point, when the run converged.
    pub solution: Option<Vector>,
    pub last: Vector,
    /// `max_i max(0, f_i)` at `last`.
    pub feasibility: f64,
    /// Inclusion residual at `last` for the last step size.
    pub residual: f64,
}

/// Runs [`tseng_step`] until the step residual and the outer gap fall below
/// `stop.tol` at a point that is feasible and nearly a zero of `A + B`.
pub fn solve_inclusion(
    p: &InclusionProblem,
    g: &GammaSchedule,
    errs: &InclusionErrors,
    x0: &Vector,
    opts: &InclusionOptions,
) -> Result<InclusionSolution> {
    x0.check_dim(p.dim)?;
    p.gamma(g, 0)?;
    let mut trace = IterateTrace::default();
    let mut x = x0.clone();
    let mut gamma = p.gamma(g, 0)?;
    let mut status = RunStatus::MaxIterations;
    for n in 0..opts.stop.max_iter {
        if !p.forward.domain().contains(&x, FEASIBILITY_TOL) {
            if n == 0 {
                return Err(Error::OutsideDomain { operator: "B", iteration: 0 });
            }
            status = RunStatus::DomainStop(StopReason::NextOutsideDomain);
            break;
        }
        let mut rec = match tseng_step(p, g, errs, n, &x) {
            Ok(rec) => rec,
            Err(Error::OutsideDomain { .. }) => {
                status = RunStatus::DomainStop(StopReason::QOutsideDomain);
                break;
            }
            Err(e) => return Err(e),
        };
        gamma = p.gamma(g, n)?;
        rec.dist_to_ref = opts.reference.as_ref().map(|z| x.dist(z));
        let small_step = rec.residual.max(rec.outer_gap) <= opts.stop.tol;
        x = rec.next.clone();
        trace.records.push(rec);
        if small_step && p.infeasibility(&x) <= opts.feas_tol && p.inclusion_residual(gamma, &x)? <= opts.residual_tol {
            status = RunStatus::Converged;
            break;
        }
    }
    let feasibility = p.infeasibility(&x);
    let residual = p.inclusion_residual(gamma, &x)?;
    Ok(InclusionSolution {
        trace,
        status,
        solution: (status == RunStatus::Converged).then(|| x.clone()),
        last: x,
        feasibility,
        residual,
    })
}

/// Expresses the inclusion problem as data for the generic engine:
/// `T_n = J_{γ_n A}`, `R_n = Id - γ_n B`, `a_n = -γ_n e1_n`,
/// `b_n = J_{γ_n A}(y_n + e2_n) - J_{γ_n A} y_n`, `c_n = -γ_n e3_n`,
/// `λ_n = 1` and `Q_n` the subgradient projector of the active constraint.
pub fn as_engine_spec(
    p: &InclusionProblem,
    g: &GammaSchedule,
    errs: &InclusionErrors,
) -> Result<(ProblemSpec, ErrorSchedule, Relaxation)> {
    let gamma_at = {
        let (g, eps, chi) = (g.clone(), p.epsilon, p.forward.lipschitz());
        Arc::new(move |n: usize| g.at(n, eps, chi))
    };

    let t_gamma = Arc::clone(&gamma_at);
    let oracle = p.resolvent.clone();
    let r_gamma = Arc::clone(&gamma_at);
    let forward = p.forward.clone();
    let constraints = p.constraints.clone();
    let feas_problem = p.clone();

    let spec = ProblemSpec::new(p.dim, p.epsilon)?
        .with_t(move |n| Ok(oracle.at(t_gamma(n)?)))
        .with_r(move |n| forward_operator(&forward, r_gamma(n)?))
        .with_outer(move |n, z| {
            let active = &constraints[cyclic_index(constraints.len(), n) - 1];
            Ok(subgradient_project(active, z)?.halfspace)
        })
        .with_infeasibility(move |x| Ok(feas_problem.infeasibility(x)));

    let scaled = |seq: ErrorSequence, gamma_at: Arc<dyn Fn(usize) -> Result<f64> + Send + Sync>| {
        let base = sequence_perturbation(seq);
        Arc::new(move |n: usize, at: &Vector| Ok(base(n, at)?.scale(-gamma_at(n)?)))
    };
    let b_gamma = Arc::clone(&gamma_at);
    let b_oracle = p.resolvent.clone();
    let e2 = errs.e2.clone();
    let errors = ErrorSchedule {
        a: scaled(errs.e1.clone(), gamma_at.clone()),
        b: Arc::new(move |n, y: &Vector| {
            if e2.is_zero() {
                return Ok(Vector::zeros(y.dim()));
            }
            let gamma = b_gamma(n)?;
            let shifted = b_oracle.resolve(gamma, &(y + &e2.at(n, y.dim())))?;
            Ok(&shifted - &b_oracle.resolve(gamma, y)?)
        }),
        c: scaled(errs.e3.clone(), gamma_at),
    };
    Ok((spec, errors, Relaxation::constant(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{engine_step, EngineOptions, StepOutcome};
    use crate::vector_space::{project_halfspace, BoxSet, ConvexSet, Matrix};
    use rand::Rng;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn scalar_problem() -> InclusionProblem {
        InclusionProblem::new(
            ResolventOracle::normal_cone(1, BoxSet::symmetric(1, 1.0).unwrap().into()),
            MonotoneMap::identity(1),
            vec![Constraint::trivial(1)],
            0.25,
        )
        .unwrap()
    }

    #[test]
    fn affine_subgradient_projection_equals_halfspace_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = Vector::random_cube(&mut rng, 3, 2.0);
            let b = rng.random_range(-1.0..1.0);
            let x = Vector::random_cube(&mut rng, 3, 5.0);
            let step = subgradient_project(&Constraint::affine(a.clone(), b).unwrap(), &x).unwrap();
            let h = HalfSpace::new(a, b).unwrap();
            assert_eq!(step.point, project_halfspace(&h, &x).unwrap());
        }
    }

    #[test]
    fn radial_subgradient_projection() {
        let c = Constraint::ball_distance(Vector::zeros(2), 1.0).unwrap();
        let step = subgradient_project(&c, &v(&[2.0, 0.0])).unwrap();
        assert_eq!(c.subgradient(&v(&[2.0, 0.0])), v(&[1.0, 0.0]));
        assert_eq!(step.point, v(&[1.0, 0.0]));
        let inside = subgradient_project(&c, &v(&[0.3, 0.1])).unwrap();
        assert_eq!(inside.point, v(&[0.3, 0.1]));
        assert!(inside.halfspace.unwrap().contains(&v(&[0.3, 0.1]), 0.0));
    }

    #[test]
    fn zero_subgradient_at_infeasible_point_is_an_error() {
        let c = Constraint::new("positive", |_| 1.0, |x| Vector::zeros(x.dim()));
        assert_eq!(subgradient_project(&c, &v(&[0.0])), Err(Error::InfeasibleConstraint { value: 1.0 }));
        let step = subgradient_project(&Constraint::trivial(2), &v(&[4.0, 4.0])).unwrap();
        assert_eq!(step.halfspace, None);
    }

    #[test]
    fn linearization_halfspace_contains_level_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let constraints = [
            Constraint::ball_distance(v(&[0.5, -0.5]), 1.2).unwrap(),
            Constraint::max_affine(vec![(v(&[1.0, 1.0]), 0.5), (v(&[-1.0, 2.0]), 1.0), (v(&[0.0, -1.0]), 2.0)])
                .unwrap(),
            Constraint::affine(v(&[2.0, -1.0]), 0.3).unwrap(),
        ];
        for c in &constraints {
            for _ in 0..50 {
                let x = Vector::random_cube(&mut rng, 2, 6.0);
                let Some(h) = subgradient_project(c, &x).unwrap().halfspace else { continue };
                for _ in 0..200 {
                    let w = Vector::random_cube(&mut rng, 2, 4.0);
                    if c.value(&w) <= 0.0 {
                        assert!(h.contains(&w, 1e-12), "{} at {x:?} misses {w:?}", c.label());
                    }
                }
            }
        }
    }

    #[test]
    fn cyclic_index_examples() {
        let seq: Vec<_> = (0..4).map(|n| cyclic_index(3, n)).collect();
        assert_eq!(seq, vec![1, 2, 3, 1]);
        assert!((0..10).all(|n| cyclic_index(1, n) == 1));
        assert_eq!(cyclic_index(5, 7), 3);
    }

    #[test]
    fn scalar_tseng_steps_match_hand_computation() {
        // x0 = 2: y = 1, q = 1, r = 0.5, z = 1.5; then 1.5 -> 1.125.
        let p = scalar_problem();
        let g = GammaSchedule::constant(0.5);
        let rec = tseng_step(&p, &g, &InclusionErrors::zero(), 0, &v(&[2.0])).unwrap();
        assert_eq!(
            (rec.y.clone(), rec.q.clone(), rec.r.clone(), rec.z.clone()),
            (v(&[1.0]), v(&[1.0]), v(&[0.5]), v(&[1.5]))
        );
        assert_eq!(rec.next, v(&[1.5]));
        let rec = tseng_step(&p, &g, &InclusionErrors::zero(), 1, &rec.next).unwrap();
        assert_eq!(rec.next, v(&[1.125]));
    }

    #[test]
    fn vanishing_forward_step_is_proximal_point() {
        let oracle = ResolventOracle::affine(Matrix::skew2(), v(&[0.5, 0.0])).unwrap();
        let p = InclusionProblem::new(oracle.clone(), MonotoneMap::zero(2), vec![Constraint::trivial(2)], 0.5).unwrap();
        let g = GammaSchedule::constant(0.7);
        let x = v(&[1.0, -2.0]);
        let rec = tseng_step(&p, &g, &InclusionErrors::zero(), 0, &x).unwrap();
        assert_eq!(rec.next, oracle.resolve(0.7, &x).unwrap());
    }

    #[test]
    fn zero_operators_give_cyclic_subgradient_projections() {
        let c1 = Constraint::affine(v(&[1.0, 0.0]), 0.0).unwrap();
        let c2 = Constraint::ball_distance(v(&[0.0, 3.0]), 1.0).unwrap();
        let p =
            InclusionProblem::new(ResolventOracle::zero(2), MonotoneMap::zero(2), vec![c1.clone(), c2.clone()], 0.5)
                .unwrap();
        let g = GammaSchedule::constant(1.0);
        let x0 = v(&[2.0, 0.0]);
        let r0 = tseng_step(&p, &g, &InclusionErrors::zero(), 0, &x0).unwrap();
        assert_eq!(r0.next, subgradient_project(&c1, &x0).unwrap().point);
        let r1 = tseng_step(&p, &g, &InclusionErrors::zero(), 1, &r0.next).unwrap();
        assert_eq!(r1.next, subgradient_project(&c2, &r0.next).unwrap().point);
    }

    #[test]
    fn q_outside_dom_b_is_an_error() {
        let b = MonotoneMap::identity(1).with_domain(BoxSet::symmetric(1, 1.0).unwrap().into());
        let p = InclusionProblem::new(ResolventOracle::zero(1), b, vec![Constraint::trivial(1)], 0.25).unwrap();
        let errs = InclusionErrors {
            e1: ErrorSequence::Zero,
            e2: ErrorSequence::custom(|_, d| Vector::filled(d, 10.0)),
            e3: ErrorSequence::Zero,
        };
        let err = tseng_step(&p, &GammaSchedule::constant(0.5), &errs, 0, &v(&[0.5])).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain { operator: "B", .. }));
    }

    #[test]
    fn problem_validation() {
        let oracle = ResolventOracle::zero(1);
        assert!(InclusionProblem::new(oracle.clone(), MonotoneMap::identity(1), vec![], 0.1).is_err());
        // χ = 1 requires ε < 1/2.
        assert!(
            InclusionProblem::new(oracle.clone(), MonotoneMap::identity(1), vec![Constraint::trivial(1)], 0.5).is_err()
        );
        assert!(InclusionProblem::new(oracle, MonotoneMap::identity(2), vec![Constraint::trivial(1)], 0.1).is_err());
    }

    #[test]
    fn scalar_problem_converges_to_zero() {
        let sol = solve_inclusion(
            &scalar_problem(),
            &GammaSchedule::constant(0.5),
            &InclusionErrors::zero(),
            &v(&[2.0]),
            &InclusionOptions { reference: Some(v(&[0.0])), ..Default::default() },
        )
        .unwrap();
        assert_eq!(sol.status, RunStatus::Converged);
        assert!(sol.solution.unwrap().norm() <= 1e-8);
        assert!(sol.trace.records.iter().all(|r| r.dist_to_ref.is_some()));
    }

    #[test]
    fn reduction_zero_errors_and_identity_forward() {
        let p = InclusionProblem::new(
            ResolventOracle::normal_cone(2, ConvexSet::Whole),
            MonotoneMap::zero(2),
            vec![Constraint::trivial(2)],
            0.5,
        )
        .unwrap();
        let (spec, errs, _) = as_engine_spec(&p, &GammaSchedule::constant(0.8), &InclusionErrors::zero()).unwrap();
        let x = v(&[1.0, 2.0]);
        assert_eq!((errs.a)(0, &x).unwrap(), Vector::zeros(2));
        assert_eq!((errs.b)(0, &x).unwrap(), Vector::zeros(2));
        assert_eq!((errs.c)(0, &x).unwrap(), Vector::zeros(2));
        let r = (spec.r_schedule)(0).unwrap();
        assert_eq!(r.apply(&x).unwrap(), x);
    }

    #[test]
    fn reduction_matches_direct_step() {
        let p = InclusionProblem::new(
            ResolventOracle::normal_cone(2, BoxSet::symmetric(2, 1.0).unwrap().into()),
            MonotoneMap::linear(Matrix::skew2()).unwrap(),
            vec![Constraint::affine(v(&[1.0, 1.0]), 0.0).unwrap()],
            0.25,
        )
        .unwrap();
        let g = GammaSchedule::constant(0.5);
        let errs = InclusionErrors::decaying(0.1, 2.0, 5).unwrap();
        let (spec, eerrs, relax) = as_engine_spec(&p, &g, &errs).unwrap();
        let x = v(&[0.9, 0.8]);
        let direct = tseng_step(&p, &g, &errs, 0, &x).unwrap();
        let StepOutcome::Advanced(engine) =
            engine_step(&spec, &eerrs, &relax, 0, &x, &EngineOptions::default()).unwrap()
        else {
            panic!("engine stopped")
        };
        assert!(direct.next.dist(&engine.next) <= 1e-12);
        assert!(engine.error_bound <= direct.error_bound + 1e-15);
    }

    #[test]
    fn subgradient_certificates() {
        let p = InclusionProblem::new(
            ResolventOracle::zero(2),
            MonotoneMap::zero(2),
            vec![
                Constraint::ball_distance(v(&[1.0, 0.0]), 2.0).unwrap(),
                Constraint::affine(v(&[1.0, -1.0]), 0.0).unwrap(),
            ],
            0.5,
        )
        .unwrap();
        assert!(p.verify_subgradients(500, 1).passed);
        let wrong = InclusionProblem::new(
            ResolventOracle::zero(2),
            MonotoneMap::zero(2),
            vec![Constraint::new("bad", |x| x.norm_sq(), |x| x.scale(-1.0))],
            0.5,
        )
        .unwrap();
        assert!(!wrong.verify_subgradients(100, 1).passed);
    }
}
