//! Desk-scale problems shared by the integration tests.
#![allow(dead_code)]

use outersplit::equilibrium::{Bifunction, EquilibriumProblem, EquilibriumSchedules, IndexControl, Quadratic};
use outersplit::inclusion::{Constraint, InclusionProblem};
use outersplit::operators::{MonotoneMap, ResolventOracle};
use outersplit::schedules::GammaSchedule;
use outersplit::vector_space::{BoxSet, ConvexSet, HalfSpace, Matrix, Vector};

pub fn v(c: &[f64]) -> Vector {
    Vector::new(c.to_vec()).unwrap()
}

pub fn cube(dim: usize, h: f64) -> BoxSet {
    BoxSet::symmetric(dim, h).unwrap()
}

/// `0 ∈ N_[-1,1](x) + x`, no active constraint, `ε = 0.25`.
pub fn inclusion_d1() -> InclusionProblem {
    InclusionProblem::new(
        ResolventOracle::normal_cone(1, cube(1, 1.0).into()),
        MonotoneMap::identity(1),
        vec![Constraint::trivial(1)],
        0.25,
    )
    .unwrap()
}

/// `0 ∈ N_[-1,1]^2(x) + Bx` with `B` the quarter rotation, subject to
/// `x1 + x2 <= 0`, `ε = 0.25`.
pub fn inclusion_d2() -> InclusionProblem {
    InclusionProblem::new(
        ResolventOracle::normal_cone(2, cube(2, 1.0).into()),
        MonotoneMap::linear(Matrix::skew2()).unwrap(),
        vec![Constraint::affine(v(&[1.0, 1.0]), 0.0).unwrap()],
        0.25,
    )
    .unwrap()
}

pub const INCLUSION_D1_X0: [f64; 1] = [2.0];
pub const INCLUSION_D2_X0: [f64; 2] = [0.9, 0.6];

pub fn gamma() -> GammaSchedule {
    GammaSchedule::constant(0.5)
}

/// `F(x,y) = y²/2 - x²/2` on ℝ, `B = id`, sets `[-10,10]` and `[-5,8]`.
pub fn equilibrium_d1() -> EquilibriumProblem {
    let f = Bifunction::difference_of_values(ConvexSet::Whole, Quadratic::distance_squared(&v(&[0.0]))).unwrap();
    EquilibriumProblem::new(
        f,
        MonotoneMap::identity(1),
        vec![cube(1, 10.0).into(), BoxSet::new(v(&[-5.0]), v(&[8.0])).unwrap().into()],
        0.25,
    )
    .unwrap()
}

pub const EQUILIBRIUM_D2_P: [f64; 2] = [4.0, 1.0];

/// `F(x,y) = g(y) - g(x)`, `g = ||· - (4,1)||²/2` on `[-2,2]^2`, `B` the
/// quarter rotation, sets `x1 + x2 <= 1.5` and `x1 - x2 <= 3`.
pub fn equilibrium_d2() -> EquilibriumProblem {
    let f = Bifunction::difference_of_values(cube(2, 2.0).into(), Quadratic::distance_squared(&v(&EQUILIBRIUM_D2_P)))
        .unwrap();
    EquilibriumProblem::new(
        f,
        MonotoneMap::linear(Matrix::skew2()).unwrap(),
        vec![HalfSpace::new(v(&[1.0, 1.0]), 1.5).unwrap().into(), HalfSpace::new(v(&[1.0, -1.0]), 3.0).unwrap().into()],
        0.25,
    )
    .unwrap()
}

pub fn cyclic_schedules(count: usize) -> EquilibriumSchedules {
    EquilibriumSchedules::exact(gamma(), IndexControl::Cyclic { count })
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_outersplit")
}

pub fn config_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}
