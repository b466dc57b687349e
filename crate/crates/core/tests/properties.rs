//! Invariants of the solvers along whole runs.

mod common;

use common::*;
use outersplit::engine::{engine_run, fejer_audit, EngineOptions, RunStatus, StepRecord, StopRule};
use outersplit::equilibrium::{
    solve_equilibrium, EquilibriumErrors, EquilibriumOptions, IndexControl, PerturbationRule,
};
use outersplit::inclusion::{as_engine_spec, solve_inclusion, InclusionErrors, InclusionOptions};
use outersplit::schedules::{DeltaSchedule, Relaxation};
use outersplit::vector_space::Vector;
use proptest::prelude::*;

fn options(max_iter: usize) -> InclusionOptions {
    InclusionOptions { stop: StopRule { max_iter, tol: 1e-11 }, ..InclusionOptions::default() }
}

fn displacement_bound(rec: &StepRecord) -> (f64, f64) {
    let lhs = rec.z.dist(&rec.x);
    let rhs = (1.0 + rec.beta) * rec.q.dist(&rec.x) + rec.error_bound;
    (lhs, rhs)
}

#[test]
fn rotation_forward_step_expands_displacement() {
    // R = Id - γB with B a rotation stretches every vector by sqrt(1 + γ²),
    // so ||z - x|| exceeds ||q - x|| and the (1 + β) factor is needed.
    let sol = solve_inclusion(&inclusion_d2(), &gamma(), &InclusionErrors::zero(), &v(&INCLUSION_D2_X0), &options(10))
        .unwrap();
    let rec = &sol.trace.records[0];
    let ratio = rec.z.dist(&rec.x) / rec.q.dist(&rec.x);
    assert!((ratio - 1.25f64.sqrt()).abs() < 1e-12, "{ratio}");
}

#[test]
fn nonexpansive_forward_step_keeps_plain_displacement_bound() {
    let errs = InclusionErrors::decaying(0.3, 1.5, 5).unwrap();
    let sol = solve_inclusion(&inclusion_d1(), &gamma(), &errs, &v(&INCLUSION_D1_X0), &options(500)).unwrap();
    for rec in &sol.trace.records {
        let lhs = rec.z.dist(&rec.x);
        assert!(lhs <= rec.q.dist(&rec.x) + rec.error_bound + 1e-12, "n = {}", rec.n);
    }
}

#[test]
fn relaxation_outside_range_is_rejected_before_iterating() {
    let p = inclusion_d2();
    let (spec, errs, _) = as_engine_spec(&p, &gamma(), &InclusionErrors::zero()).unwrap();
    let x0 = v(&INCLUSION_D2_X0);
    for lambda in [0.1, 1.5] {
        let run = engine_run(
            &spec,
            &errs,
            &Relaxation::constant(lambda),
            &x0,
            &StopRule::default(),
            &EngineOptions::default(),
        );
        assert!(run.is_err(), "lambda {lambda}");
    }
}

#[test]
fn relaxed_generic_run_is_fejer_and_converges() {
    let p = inclusion_d2();
    let (spec, errs, _) = as_engine_spec(&p, &gamma(), &InclusionErrors::zero()).unwrap();
    let z = Vector::zeros(2);
    let opts = EngineOptions { shadow: true, reference: Some(z.clone()) };
    let stop = StopRule { max_iter: 10_000, tol: 1e-11 };
    let run = engine_run(&spec, &errs, &Relaxation::constant(0.8), &v(&INCLUSION_D2_X0), &stop, &opts).unwrap();
    assert_eq!(run.status, RunStatus::Converged);
    assert!(fejer_audit(&run.trace, &z).passed());
    assert!(run.last.dist(&z) < 1e-9);
    assert!(run.trace.records.iter().all(|r| r.shadow_error == Some(0.0)));
}

#[test]
fn equilibrium_feasibility_reaches_tolerance() {
    let mut s = cyclic_schedules(2);
    s.control = IndexControl::RandomAudited { count: 2, max_card: 2, seed: 4 };
    s.delta = DeltaSchedule::power(0.1, 3.0).unwrap();
    s.perturbation = PerturbationRule::Seeded { seed: 5 };
    let opts = EquilibriumOptions { stop: StopRule { max_iter: 100_000, tol: 1e-10 }, ..EquilibriumOptions::default() };
    let sol = solve_equilibrium(&equilibrium_d2(), &s, &EquilibriumErrors::zero(), &v(&[-2.0, 2.0]), &opts).unwrap();
    assert_eq!(sol.status, RunStatus::Converged);
    assert!(sol.feasibility <= opts.feas_tol);
    assert!(sol.last.dist(&v(&[2.0, -1.0])) < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inclusion_runs_are_fejer_and_square_summable(
        x0 in prop::collection::vec(-5.0f64..5.0, 2),
        seed in 0u64..1000,
        noisy in any::<bool>(),
    ) {
        let p = inclusion_d2();
        let errs = if noisy { InclusionErrors::decaying(0.1, 2.0, seed).unwrap() } else { InclusionErrors::zero() };
        let sol = solve_inclusion(&p, &gamma(), &errs, &v(&x0), &options(5000)).unwrap();
        let z = Vector::zeros(2);
        let audit = fejer_audit(&sol.trace, &z);
        prop_assert!(audit.passed(), "{:?}", audit.violations.first());
        for rec in &sol.trace.records {
            prop_assert!(rec.beta <= 1.0 - p.epsilon());
            let (lhs, rhs) = displacement_bound(rec);
            prop_assert!(lhs <= rhs + 1e-12, "n = {}: {} > {}", rec.n, lhs, rhs);
        }
        if !noisy {
            // Each exact step loses (1 - β²)||x_n - q_n||² of squared distance.
            let beta = sol.trace.records[0].beta;
            let budget = v(&x0).dist(&z).powi(2) / (1.0 - beta * beta);
            prop_assert!(sol.trace.residual_square_sum() <= budget + 1e-12);
            prop_assert_eq!(sol.status, RunStatus::Converged);
            prop_assert!(sol.feasibility <= 1e-8);
        } else {
            prop_assert!(sol.last.dist(&z) <= 1e-4);
        }
    }

    #[test]
    fn equilibrium_runs_are_fejer(
        x0 in prop::collection::vec(-3.0f64..3.0, 2),
        seed in 0u64..1000,
    ) {
        let mut s = cyclic_schedules(2);
        s.delta = DeltaSchedule::power(0.5, 3.0).unwrap();
        s.perturbation = PerturbationRule::Seeded { seed };
        let opts = EquilibriumOptions { stop: StopRule { max_iter: 2000, tol: 1e-10 }, ..EquilibriumOptions::default() };
        let sol = solve_equilibrium(&equilibrium_d2(), &s, &EquilibriumErrors::zero(), &v(&x0), &opts).unwrap();
        let audit = fejer_audit(&sol.trace, &v(&[2.0, -1.0]));
        prop_assert!(audit.passed(), "{:?}", audit.violations.first());
        for rec in &sol.trace.records {
            let (lhs, rhs) = displacement_bound(rec);
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
