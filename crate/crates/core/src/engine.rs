//! Generic outer-approximation iteration for
//! `find x ∈ S with T_n R_n x = x for all n`.
//!
//! Each step evaluates `R_n`, `T_n`, `R_n` again, and then projects onto a
//! half-space containing `S`:
//!
//! ```text
//! y_n     = R_n x_n + a_n
//! q_n     = T_n y_n + b_n          (stop if q_n ∉ dom R_n)
//! r_n     = R_n q_n + c_n
//! z_n     = x_n - y_n + r_n
//! x_{n+1} = x_n + λ_n (Q_n z_n - x_n)   (stop if x_{n+1} ∉ dom R_{n+1})
//! ```

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{FirmOp, PseudoContraction};
use crate::schedules::{ErrorSequence, Relaxation};
use crate::vector_space::{ConvexSet, HalfSpace, Vector, FEASIBILITY_TOL};

/// Slack allowed per step in Fejér audits.
pub const FEJER_TOL: f64 = 1e-10;

pub type FirmSchedule = Arc<dyn Fn(usize) -> Result<FirmOp> + Send + Sync>;
pub type PseudoSchedule = Arc<dyn Fn(usize) -> Result<PseudoContraction> + Send + Sync>;
/// Builds, for iteration `n` and point `z_n`, a closed half-space containing
/// `S`. `None` stands for the whole space.
pub type OuterFactory = Arc<dyn Fn(usize, &Vector) -> Result<Option<HalfSpace>> + Send + Sync>;
/// Perturbation of an operator evaluation at iteration `n`; receives the
/// point at which the operator was evaluated.
pub type Perturbation = Arc<dyn Fn(usize, &Vector) -> Result<Vector> + Send + Sync>;
pub type Infeasibility = Arc<dyn Fn(&Vector) -> Result<f64> + Send + Sync>;

/// Data of the constrained fixed-point problem fed to the engine.
#[derive(Clone)]
pub struct ProblemSpec {
    pub dim: usize,
    pub epsilon: f64,
    pub t_schedule: FirmSchedule,
    pub r_schedule: PseudoSchedule,
    pub outer: OuterFactory,
    /// Constraint violation of a point, reported in traces.
    pub infeasibility: Infeasibility,
}

impl ProblemSpec {
    /// Identity operators, no constraint.
    pub fn new(dim: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(Self {
            dim,
            epsilon,
            t_schedule: Arc::new(move |_| Ok(FirmOp::identity(dim))),
            r_schedule: Arc::new(move |_| Ok(PseudoContraction::identity(dim))),
            outer: Arc::new(|_, _| Ok(None)),
            infeasibility: Arc::new(|_| Ok(0.0)),
        })
    }

    pub fn with_t(mut self, f: impl Fn(usize) -> Result<FirmOp> + Send + Sync + 'static) -> Self {
        self.t_schedule = Arc::new(f);
        self
    }

    pub fn with_fixed_t(self, t: FirmOp) -> Self {
        self.with_t(move |_| Ok(t.clone()))
    }

    pub fn with_r(mut self, f: impl Fn(usize) -> Result<PseudoContraction> + Send + Sync + 'static) -> Self {
        self.r_schedule = Arc::new(f);
        self
    }

    pub fn with_fixed_r(self, r: PseudoContraction) -> Self {
        self.with_r(move |_| Ok(r.clone()))
    }

    pub fn with_outer(
        mut self,
        f: impl Fn(usize, &Vector) -> Result<Option<HalfSpace>> + Send + Sync + 'static,
    ) -> Self {
        self.outer = Arc::new(f);
        self
    }

    /// `Q_n` is the projector onto one fixed half-space containing `S`.
    pub fn with_fixed_halfspace(self, h: HalfSpace) -> Self {
        self.with_outer(move |_, _| Ok(Some(h.clone())))
    }

    /// Reports infeasibility as the distance to `set`.
    pub fn with_constraint_set(mut self, set: ConvexSet) -> Self {
        self.infeasibility = Arc::new(move |x| set.distance(x));
        self
    }

    pub fn with_infeasibility(mut self, f: impl Fn(&Vector) -> Result<f64> + Send + Sync + 'static) -> Self {
        self.infeasibility = Arc::new(f);
        self
    }

    fn pseudo_at(&self, n: usize) -> Result<PseudoContraction> {
        let r = (self.r_schedule)(n)?;
        let bound = 1.0 - self.epsilon;
        if r.beta() > bound {
            return Err(Error::ScheduleOutOfRange {
                what: "beta",
                iteration: n,
                value: r.beta(),
                lower: 0.0,
                upper: bound,
            });
        }
        Ok(r)
    }
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec").field("dim", &self.dim).field("epsilon", &self.epsilon).finish_non_exhaustive()
    }
}

/// Perturbations `a_n`, `b_n`, `c_n` of the three operator evaluations.
#[derive(Clone)]
pub struct ErrorSchedule {
    pub a: Perturbation,
    pub b: Perturbation,
    pub c: Perturbation,
}

impl ErrorSchedule {
    pub fn zero() -> Self {
        Self::from_sequences(ErrorSequence::Zero, ErrorSequence::Zero, ErrorSequence::Zero)
    }

    pub fn from_sequences(a: ErrorSequence, b: ErrorSequence, c: ErrorSequence) -> Self {
        Self { a: sequence_perturbation(a), b: sequence_perturbation(b), c: sequence_perturbation(c) }
    }
}

impl fmt::Debug for ErrorSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ErrorSchedule(..)")
    }
}

/// Perturbation that ignores the evaluation point.
pub fn sequence_perturbation(seq: ErrorSequence) -> Perturbation {
    Arc::new(move |n, at: &Vector| Ok(seq.at(n, at.dim())))
}

/// Termination rule for [`engine_run`] and the solvers built on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub max_iter: usize,
    /// Threshold on `max(||q_n - x_n||, ||z_n - Q_n z_n||)`.
    pub tol: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { max_iter: 100_000, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EngineOptions {
    /// Recompute the error-free shadow sequence to measure `e_n` exactly.
    pub shadow: bool,
    /// Known solution used for the `dist_to_ref` diagnostic.
    pub reference: Option<Vector>,
}

/// Everything computed during one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub x: Vector,
    pub y: Vector,
    pub q: Vector,
    pub r: Vector,
    pub z: Vector,
    /// `Q_n z_n`.
    pub qz: Vector,
    pub next: Vector,
    pub lambda: f64,
    pub beta: f64,
    /// `||q_n - x_n||`.
    pub residual: f64,
    /// `||z_n - Q_n z_n||`.
    pub outer_gap: f64,
    /// `3||a_n|| + 2||b_n|| + ||c_n||`, an upper bound on `||e_n||`.
    pub error_bound: f64,
    /// `||x_n - z_ref||` when a reference solution is known.
    pub dist_to_ref: Option<f64>,
    /// Constraint violation at `x_n`.
    pub feasibility: f64,
    /// Exact `||e_n||` from the shadow sequence (debug mode).
    pub shadow_error: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// `q_n ∉ dom R_n`.
    QOutsideDomain,
    /// `x_{n+1} ∉ dom R_{n+1}`.
    NextOutsideDomain,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::QOutsideDomain => f.write_str("q outside domain"),
            StopReason::NextOutsideDomain => f.write_str("next iterate outside domain"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Advanced(StepRecord),
    /// Algorithmic stop. The record is present when the step completed and
    /// only the new iterate left the domain.
    Stopped {
        reason: StopReason,
        record: Option<StepRecord>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIterations,
    DomainStop(StopReason),
}

/// Per-iteration records of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterateTrace {
    pub records: Vec<StepRecord>,
}

/// Column order of exported traces.
pub const TRACE_COLUMNS: [&str; 5] = ["n", "residual", "outer_gap", "error_bound", "dist_to_ref"];

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    /// Fills `dist_to_ref` for every record.
    pub fn set_reference(&mut self, z_ref: &Vector) {
        for rec in &mut self.records {
            rec.dist_to_ref = Some(rec.x.dist(z_ref));
        }
    }

    /// `Σ ||q_n - x_n||^2`.
    pub fn residual_square_sum(&self) -> f64 {
        self.records.iter().map(|r| r.residual * r.residual).sum()
    }

    /// Writes one comma-separated row per iteration, preceded by a header.
    /// With `feasibility` the column `feasibility_max` is appended.
    pub fn write_csv<W: Write>(&self, out: W, feasibility: bool) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = TRACE_COLUMNS.to_vec();
        if feasibility {
            header.push("feasibility_max");
        }
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.n.to_string(),
                format!("{:e}", r.residual),
                format!("{:e}", r.outer_gap),
                format!("{:e}", r.error_bound),
                r.dist_to_ref.map(|d| format!("{d:e}")).unwrap_or_default(),
            ];
            if feasibility {
                row.push(format!("{:e}", r.feasibility));
            }
            w.write_record(&row)?;
        }
        w.flush()
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub trace: IterateTrace,
    pub status: RunStatus,
    /// Last iterate produced (`x_0` if no step completed).
    pub last: Vector,
}

/// One iteration of the generic method.
pub fn engine_step(
    spec: &ProblemSpec,
    errs: &ErrorSchedule,
    relax: &Relaxation,
    n: usize,
    x: &Vector,
    opts: &EngineOptions,
) -> Result<StepOutcome> {
    x.check_dim(spec.dim)?;
    let r_op = spec.pseudo_at(n)?;
    if !r_op.domain().contains(x, FEASIBILITY_TOL) {
        return Err(Error::OutsideDomain { operator: "R_n", iteration: n });
    }
    let t_op = (spec.t_schedule)(n)?;
    let lambda = relax.at(n, spec.epsilon)?;

    let rx = r_op.apply(x)?;
    let a = (errs.a)(n, x)?;
    let y = &rx + &a;
    let ty = t_op.apply(&y)?;
    let b = (errs.b)(n, &y)?;
    let q = &ty + &b;
    if !r_op.domain().contains(&q, FEASIBILITY_TOL) {
        return Ok(StepOutcome::Stopped { reason: StopReason::QOutsideDomain, record: None });
    }
    let c = (errs.c)(n, &q)?;
    let r = &r_op.apply(&q)? + &c;
    let z = &(x - &y) + &r;
    let qz = match (spec.outer)(n, &z)? {
        Some(h) => h.project(&z)?,
        None => z.clone(),
    };
    let next = x.axpy(lambda, &(&qz - x));

    let shadow_error = if opts.shadow {
        let y_exact = rx.clone();
        let q_exact = t_op.apply(&y_exact)?;
        if r_op.domain().contains(&q_exact, FEASIBILITY_TOL) {
            let r_exact = r_op.apply(&q_exact)?;
            Some((&(&y_exact - &y) + &(&r - &r_exact)).norm())
        } else {
            None
        }
    } else {
        None
    };

    let record = StepRecord {
        n,
        residual: q.dist(x),
        outer_gap: z.dist(&qz),
        error_bound: 3.0 * a.norm() + 2.0 * b.norm() + c.norm(),
        dist_to_ref: opts.reference.as_ref().map(|z_ref| x.dist(z_ref)),
        feasibility: (spec.infeasibility)(x)?,
        lambda,
        beta: r_op.beta(),
        shadow_error,
        x: x.clone(),
        y,
        q,
        r,
        z,
        qz,
        next,
    };

    let next_domain = spec.pseudo_at(n + 1)?;
    if !next_domain.domain().contains(&record.next, FEASIBILITY_TOL) {
        return Ok(StepOutcome::Stopped { reason: StopReason::NextOutsideDomain, record: Some(record) });
    }
    Ok(StepOutcome::Advanced(record))
}

/// Iterates [`engine_step`] from `x0` until the stop rule fires.
pub fn engine_run(
    spec: &ProblemSpec,
    errs: &ErrorSchedule,
    relax: &Relaxation,
    x0: &Vector,
    stop: &StopRule,
    opts: &EngineOptions,
) -> Result<RunResult> {
    x0.check_dim(spec.dim)?;
    relax.at(0, spec.epsilon)?;
    if !spec.pseudo_at(0)?.domain().contains(x0, FEASIBILITY_TOL) {
        return Err(Error::OutsideDomain { operator: "R_0", iteration: 0 });
    }
    let mut trace = IterateTrace::default();
    let mut x = x0.clone();
    for n in 0..stop.max_iter {
        match engine_step(spec, errs, relax, n, &x, opts)? {
            StepOutcome::Advanced(rec) => {
                let done = rec.residual.max(rec.outer_gap) <= stop.tol;
                x = rec.next.clone();
                trace.records.push(rec);
                if done {
                    return Ok(RunResult { trace, status: RunStatus::Converged, last: x });
                }
            }
            StepOutcome::Stopped { reason, record } => {
                if let Some(rec) = record {
                    x = rec.next.clone();
                    trace.records.push(rec);
                }
                return Ok(RunResult { trace, status: RunStatus::DomainStop(reason), last: x });
            }
        }
    }
    Ok(RunResult { trace, status: RunStatus::MaxIterations, last: x })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FejerViolation {
    pub n: usize,
    /// `||x_{n+1} - z||`
    pub next_dist: f64,
    /// `||x_n - z|| + e_bound_n`
    pub allowed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FejerReport {
    pub checked: usize,
    pub violations: Vec<FejerViolation>,
    /// `sup_n ||x_n - z||` over the recorded iterates.
    pub xi: f64,
    /// `η_n = e_n^2 + 2 ξ e_n` with `e_n` the recorded error bound.
    pub eta: Vec<f64>,
}

impl FejerReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `||x_{n+1} - z|| <= ||x_n - z|| + e_bound_n` along a trace.
pub fn fejer_audit(trace: &IterateTrace, z_ref: &Vector) -> FejerReport {
    let mut violations = Vec::new();
    let mut xi: f64 = 0.0;
    for rec in &trace.records {
        let d = rec.x.dist(z_ref);
        let next_dist = rec.next.dist(z_ref);
        xi = xi.max(d).max(next_dist);
        let allowed = d + rec.error_bound;
        if next_dist > allowed + FEJER_TOL {
            violations.push(FejerViolation { n: rec.n, next_dist, allowed });
        }
    }
    let eta = trace.records.iter().map(|r| r.error_bound * r.error_bound + 2.0 * xi * r.error_bound).collect();
    FejerReport { checked: trace.records.len(), violations, xi, eta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{forward_operator, prox_abs, MonotoneMap};
    use crate::vector_space::BoxSet;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn scalar_spec() -> ProblemSpec {
        // R = Id - 0.5 Id, T = soft threshold with step 0.5.
        let r = forward_operator(&MonotoneMap::identity(1), 0.5).unwrap();
        ProblemSpec::new(1, 0.25)
            .unwrap()
            .with_fixed_r(r)
            .with_fixed_t(FirmOp::new(1, |x| Ok(x.map(|c| prox_abs(0.5, c)))))
    }

    #[test]
    fn identity_step_is_stationary() {
        let spec = ProblemSpec::new(2, 0.5).unwrap();
        let out = engine_step(
            &spec,
            &ErrorSchedule::zero(),
            &Relaxation::default(),
            0,
            &v(&[1.0, -3.0]),
            &EngineOptions::default(),
        )
        .unwrap();
        let StepOutcome::Advanced(rec) = out else { panic!("stopped") };
        assert_eq!(rec.next, v(&[1.0, -3.0]));
        assert_eq!(rec.z, rec.x);
    }

    #[test]
    fn scalar_step_matches_hand_computation() {
        // y = 1, q = 0.5, r = 0.25, z = 2 - 1 + 0.25 = 1.25.
        let out = engine_step(
            &scalar_spec(),
            &ErrorSchedule::zero(),
            &Relaxation::default(),
            0,
            &v(&[2.0]),
            &EngineOptions::default(),
        )
        .unwrap();
        let StepOutcome::Advanced(rec) = out else { panic!("stopped") };
        assert_eq!(rec.y, v(&[1.0]));
        assert_eq!(rec.q, v(&[0.5]));
        assert_eq!(rec.r, v(&[0.25]));
        assert_eq!(rec.next, v(&[1.25]));
        assert_eq!(rec.residual, 1.5);
    }

    #[test]
    fn projector_acts_as_identity_on_contained_points() {
        let h = HalfSpace::new(v(&[1.0]), 100.0).unwrap();
        let spec = scalar_spec().with_fixed_halfspace(h);
        let out = engine_step(
            &spec,
            &ErrorSchedule::zero(),
            &Relaxation::default(),
            0,
            &v(&[2.0]),
            &EngineOptions::default(),
        )
        .unwrap();
        let StepOutcome::Advanced(rec) = out else { panic!("stopped") };
        assert_eq!(rec.next, rec.z);
        assert_eq!(rec.outer_gap, 0.0);
    }

    #[test]
    fn relaxation_out_of_range_rejected_before_iteration_zero() {
        let err = engine_run(
            &scalar_spec(),
            &ErrorSchedule::zero(),
            &Relaxation::constant(1.5),
            &v(&[2.0]),
            &StopRule::default(),
            &EngineOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ScheduleOutOfRange { what: "lambda", iteration: 0, .. }));
    }

    #[test]
    fn beta_above_one_minus_epsilon_rejected() {
        let r = forward_operator(&MonotoneMap::identity(1), 0.9).unwrap();
        let spec = ProblemSpec::new(1, 0.25).unwrap().with_fixed_r(r);
        let err = engine_step(
            &spec,
            &ErrorSchedule::zero(),
            &Relaxation::default(),
            0,
            &v(&[1.0]),
            &EngineOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ScheduleOutOfRange { what: "beta", .. }));
    }

    #[test]
    fn identity_run_converges_at_iteration_zero() {
        let spec = ProblemSpec::new(3, 0.5).unwrap();
        let res = engine_run(
            &spec,
            &ErrorSchedule::zero(),
            &Relaxation::default(),
            &v(&[1.0, 2.0, 3.0]),
            &StopRule::default(),
            &EngineOptions::default(),
        )
        .unwrap();
        assert_eq!(res.status, RunStatus::Converged);
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.trace.records[0].n, 0);
        assert_eq!(res.trace.records[0].residual, 0.0);
        let report = fejer_audit(&res.trace, &v(&[0.0, 0.0, 7.0]));
        assert!(report.passed());
    }

    #[test]
    fn q_outside_box_domain_stops() {
        let domain: ConvexSet = BoxSet::symmetric(1, 1.0).unwrap().into();
        let b = MonotoneMap::identity(1).with_domain(domain);
        let r = forward_operator(&b, 0.5).unwrap();
        let spec = ProblemSpec::new(1, 0.25).unwrap().with_fixed_r(r);
        let errs = ErrorSchedule::from_sequences(
            ErrorSequence::Zero,
            ErrorSequence::custom(|_, d| Vector::filled(d, 5.0)),
            ErrorSequence::Zero,
        );
        let res = engine_run(
            &spec,
            &errs,
            &Relaxation::default(),
            &v(&[0.5]),
            &StopRule::default(),
            &EngineOptions::default(),
        )
        .unwrap();
        assert_eq!(res.status, RunStatus::DomainStop(StopReason::QOutsideDomain));
        assert!(res.trace.is_empty());

        let err = engine_run(
            &spec,
            &ErrorSchedule::zero(),
            &Relaxation::default(),
            &v(&[3.0]),
            &StopRule::default(),
            &EngineOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutsideDomain { .. }));
    }

    #[test]
    fn next_outside_domain_stops_with_record() {
        let domain: ConvexSet = BoxSet::symmetric(1, 1.0).unwrap().into();
        let r = PseudoContraction::new(1, 0.0, domain, |x| Ok(x.clone())).unwrap();
        // T pushes by +0.3 but stays inside the domain on q; z then leaves.
        let spec = ProblemSpec::new(1, 0.5)
            .unwrap()
            .with_fixed_r(r)
            .with_fixed_t(FirmOp::new(1, |x| Ok(x.map(|c| c.min(0.9)))));
        let errs = ErrorSchedule::from_sequences(
            ErrorSequence::Zero,
            ErrorSequence::Zero,
            ErrorSequence::custom(|_, d| Vector::filled(d, 2.0)),
        );
        let res = engine_run(
            &spec,
            &errs,
            &Relaxation::default(),
            &v(&[0.5]),
            &StopRule::default(),
            &EngineOptions::default(),
        )
        .unwrap();
        assert_eq!(res.status, RunStatus::DomainStop(StopReason::NextOutsideDomain));
        assert_eq!(res.trace.len(), 1);
    }

    #[test]
    fn shadow_error_below_bound() {
        let errs = ErrorSchedule::from_sequences(
            ErrorSequence::decaying(0.1, 2.0, 1).unwrap(),
            ErrorSequence::decaying(0.1, 2.0, 2).unwrap(),
            ErrorSequence::decaying(0.1, 2.0, 3).unwrap(),
        );
        let opts = EngineOptions { shadow: true, reference: Some(v(&[0.0])) };
        let res = engine_run(
            &scalar_spec(),
            &errs,
            &Relaxation::constant(0.8),
            &v(&[3.0]),
            &StopRule { max_iter: 200, tol: 1e-12 },
            &opts,
        )
        .unwrap();
        for rec in &res.trace.records {
            let e = rec.shadow_error.unwrap();
            assert!(e <= rec.error_bound + 1e-14, "n={} e={e} bound={}", rec.n, rec.error_bound);
        }
        assert!(fejer_audit(&res.trace, &v(&[0.0])).passed());
    }

    #[test]
    fn csv_export_has_header_and_one_row_per_iteration() {
        let res = engine_run(
            &scalar_spec(),
            &ErrorSchedule::zero(),
            &Relaxation::default(),
            &v(&[2.0]),
            &StopRule { max_iter: 5, tol: 0.0 },
            &EngineOptions { shadow: false, reference: Some(v(&[0.0])) },
        )
        .unwrap();
        assert_eq!(res.status, RunStatus::MaxIterations);
        let mut buf = Vec::new();
        res.trace.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,residual,outer_gap,error_bound,dist_to_ref");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("0,1.5e0,0e0,0e0,2e0"));
    }
}
