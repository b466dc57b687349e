//! Brute-force ground truth for small instances: grid search on the natural
//! residual of a variational inequality, active-set enumeration for affine
//! problems on boxes, and sampled equilibrium gaps.
//!
//! These routines only rely on `vector_space`, so that they stay an
//! independent check of the splitting solvers.

use crate::equilibrium::Bifunction;
use crate::error::{Error, Result};
use crate::operators::MonotoneMap;
use crate::vector_space::{BoxSet, ConvexSet, Matrix, Vector};

/// Complementarity tolerance of [`solve_affine_kkt`], relative to the data.
pub const KKT_TOL: f64 = 1e-10;
/// Default grid resolution per axis for `d <= 2`.
pub const GRID_RESOLUTION_2D: usize = 401;
/// Default grid resolution per axis for `d = 3`.
pub const GRID_RESOLUTION_3D: usize = 101;

#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    /// Largest violation of primal feasibility, sign conditions and
    /// stationarity, and the vector `w = Mx + u` whose negative lies in the
    /// normal cone of the box at `x`.
    Kkt { residual: f64, multipliers: Vector },
    /// Natural residual at the returned point and the grid spacing used.
    Grid { gap: f64, spacing: f64 },
}

impl Certificate {
    pub fn residual(&self) -> f64 {
        match self {
            Certificate::Kkt { residual, .. } => *residual,
            Certificate::Grid { gap, .. } => *gap,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMethod {
    Grid,
    ActiveSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub point: Vector,
    pub certificate: Certificate,
    pub method: OracleMethod,
}

/// Default resolution for dimension `dim`.
pub fn default_resolution(dim: usize) -> usize {
    if dim <= 2 {
        GRID_RESOLUTION_2D
    } else {
        GRID_RESOLUTION_3D
    }
}

/// `||x - P_C(x - F(x))||`, which vanishes exactly at solutions of the
/// variational inequality for `F` on `C`.
pub fn natural_residual(set: &ConvexSet, map: &dyn Fn(&Vector) -> Vector, x: &Vector) -> Result<f64> {
    let fx = map(x);
    fx.check_dim(x.dim())?;
    Ok(set.project(&(x - &fx))?.dist(x))
}

fn bounded_box(set: &ConvexSet, dim: usize) -> Result<BoxSet> {
    match set.bounding_box() {
        Some(b) if b.dim() == dim => Ok(b),
        Some(b) => Err(Error::DimensionMismatch { expected: dim, got: b.dim() }),
        None => Err(Error::Unsupported("grid oracle needs a bounded set".into())),
    }
}

/// Uniform grid over `bx` with `per_axis` points per axis, in lexicographic
/// order.
fn grid_points(bx: &BoxSet, per_axis: usize) -> impl Iterator<Item = Vector> + '_ {
    let dim = bx.dim();
    let total = per_axis.pow(dim as u32);
    (0..total).map(move |mut k| {
        let coords = (0..dim)
            .map(|axis| {
                let i = k % per_axis;
                k /= per_axis;
                let (lo, hi) = (bx.lower()[axis], bx.upper()[axis]);
                if per_axis == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (per_axis - 1) as f64
                }
            })
            .collect();
        Vector::new(coords).expect("grid points are finite")
    })
}

/// Minimizes the natural residual over a uniform grid of the bounding box of
/// `C` (grid points are projected onto `C`), then refines the best
/// candidates by compass search with step halving.
pub fn solve_vi_grid(set: &ConvexSet, map: &dyn Fn(&Vector) -> Vector, resolution: usize) -> Result<OracleSolution> {
    let dim = set.dim().ok_or_else(|| Error::Unsupported("grid oracle needs a bounded set".into()))?;
    if dim == 0 || dim > 3 {
        return Err(Error::Unsupported(format!("grid oracle supports 1 <= d <= 3, got {dim}")));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter("grid resolution must be at least 2".into()));
    }
    let bx = bounded_box(set, dim)?;
    let spacing = (0..dim).map(|i| (bx.upper()[i] - bx.lower()[i]) / (resolution - 1) as f64).fold(0.0_f64, f64::max);

    const KEEP: usize = 4;
    let mut best: Vec<(f64, Vector)> = Vec::with_capacity(KEEP + 1);
    for point in grid_points(&bx, resolution) {
        let x = set.project(&point)?;
        let gap = natural_residual(set, map, &x)?;
        if best.len() < KEEP || gap < best[best.len() - 1].0 {
            let pos = best.partition_point(|(g, _)| *g <= gap);
            best.insert(pos, (gap, x));
            best.truncate(KEEP);
        }
    }

    let mut winner: Option<(f64, Vector)> = None;
    for (gap, x) in best {
        let refined = compass_refine(set, map, x, gap, spacing.max(1e-3))?;
        if winner.as_ref().is_none_or(|w| refined.0 < w.0) {
            winner = Some(refined);
        }
    }
    let (gap, point) = winner.expect("grid is nonempty");
    Ok(OracleSolution { point, certificate: Certificate::Grid { gap, spacing }, method: OracleMethod::Grid })
}

fn compass_refine(
    set: &ConvexSet,
    map: &dyn Fn(&Vector) -> Vector,
    mut x: Vector,
    mut gap: f64,
    mut step: f64,
) -> Result<(f64, Vector)> {
    let dim = x.dim();
    let floor = 1e-15 * x.max_abs().max(1.0);
    let mut evals = 0;
    while step > floor && gap > 0.0 && evals < 200_000 {
        let mut moved = false;
        for axis in 0..dim {
            for sign in [1.0, -1.0] {
                let cand = set.project(&x.axpy(sign * step, &Vector::basis(dim, axis)))?;
                let g = natural_residual(set, map, &cand)?;
                evals += 1;
                if g < gap {
                    x = cand;
                    gap = g;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((gap, x))
}

/// Solves `0 ∈ Mx + u + N_box(x)` by enumerating the `3^d` patterns
/// (lower bound, upper bound, free) of the box and checking complementarity
/// of each reduced solution.
pub fn solve_affine_kkt(m: &Matrix, u: &Vector, bx: &BoxSet) -> Result<OracleSolution> {
    let dim = u.dim();
    if !m.is_square() || m.rows() != dim || bx.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: m.rows() });
    }
    if dim > 4 {
        return Err(Error::Unsupported(format!("active-set oracle supports d <= 4, got {dim}")));
    }
    let scale = m
        .data()
        .iter()
        .chain(u.iter())
        .chain(bx.lower().iter())
        .chain(bx.upper().iter())
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let tol = KKT_TOL * scale;

    #[derive(Clone, Copy, PartialEq)]
    enum Face {
        Lower,
        Upper,
        Free,
    }
    for code in 0..3usize.pow(dim as u32) {
        let mut c = code;
        let faces: Vec<Face> = (0..dim)
            .map(|_| {
                let f = [Face::Free, Face::Lower, Face::Upper][c % 3];
                c /= 3;
                f
            })
            .collect();
        let mut x: Vec<f64> = (0..dim)
            .map(|i| match faces[i] {
                Face::Lower => bx.lower()[i],
                Face::Upper => bx.upper()[i],
                Face::Free => 0.0,
            })
            .collect();
        let free: Vec<usize> = (0..dim).filter(|&i| faces[i] == Face::Free).collect();
        if !free.is_empty() {
            let k = free.len();
            let mut data = Vec::with_capacity(k * k);
            let mut rhs = Vec::with_capacity(k);
            for &i in &free {
                for &j in &free {
                    data.push(m.get(i, j));
                }
                let fixed: f64 = (0..dim).filter(|j| faces[*j] != Face::Free).map(|j| m.get(i, j) * x[j]).sum();
                rhs.push(-u[i] - fixed);
            }
            let Ok(sol) = Matrix::square(k, data)?.solve(&Vector::new(rhs)?) else { continue };
            for (slot, &i) in free.iter().enumerate() {
                x[i] = sol[slot];
            }
        }
        let point = Vector::new(x)?;
        let w = &m.mul_vec(&point)? + u;
        let residual = (0..dim).fold(0.0_f64, |acc, i| {
            let violation = match faces[i] {
                Face::Lower => (-w[i]).max(0.0),
                Face::Upper => w[i].max(0.0),
                Face::Free => w[i].abs().max(bx.lower()[i] - point[i]).max(point[i] - bx.upper()[i]),
            };
            acc.max(violation)
        });
        if residual <= tol {
            let point = bx.project(&point)?;
            return Ok(OracleSolution {
                point,
                certificate: Certificate::Kkt { residual, multipliers: w },
                method: OracleMethod::ActiveSet,
            });
        }
    }
    Err(Error::NoKktPattern)
}

/// `max_y -(F(x, y) + <Bx, y - x>)` over `y = x` and a grid of about
/// `sample_count` points projected onto `C`. The grid covers the bounding
/// box of `C`, or the cube of half-width 10 around `x` when `C` is
/// unbounded. The value is nonnegative and small at solutions.
pub fn equilibrium_gap(f: &Bifunction, b: &MonotoneMap, x: &Vector, sample_count: usize) -> Result<f64> {
    let dim = x.dim();
    let region = match f.set().bounding_box() {
        Some(bx) => bx,
        None => BoxSet::new(x.map(|c| c - 10.0), x.map(|c| c + 10.0))?,
    };
    let per_axis = ((sample_count.max(1) as f64).powf(1.0 / dim as f64).round() as usize).max(2);
    let bx_val = b.eval(x)?;
    let mut worst = 0.0_f64;
    for point in grid_points(&region, per_axis) {
        let y = f.set().pull_inside(point);
        worst = worst.max(-(f.eval(x, &y) + bx_val.dot(&(&y - x))));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::Quadratic;
    use crate::vector_space::HalfSpace;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn grid_oracle_examples() {
        let c: ConvexSet = BoxSet::symmetric(1, 1.0).unwrap().into();
        let sol = solve_vi_grid(&c, &|x: &Vector| x.clone(), default_resolution(1)).unwrap();
        assert!(sol.point.norm() <= 1e-6);
        assert!(sol.certificate.residual() <= 1e-6);

        let unit: ConvexSet = BoxSet::new(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap().into();
        let shift = v(&[1.0, 1.0]);
        let sol = solve_vi_grid(&unit, &|x: &Vector| x - &shift, default_resolution(2)).unwrap();
        assert!(sol.point.dist(&v(&[1.0, 1.0])) <= 1e-12);
        assert_eq!(sol.certificate.residual(), 0.0);

        // Interior zero of an affine map.
        let center = v(&[0.3, -0.2, 0.1]);
        let cube: ConvexSet = BoxSet::symmetric(3, 1.0).unwrap().into();
        let sol = solve_vi_grid(&cube, &|x: &Vector| (x - &center).scale(2.0), 41).unwrap();
        assert!(sol.point.dist(&center) <= 1e-8);
    }

    #[test]
    fn grid_oracle_rejects_unbounded_sets() {
        let h: ConvexSet = HalfSpace::new(v(&[1.0]), 0.0).unwrap().into();
        assert!(solve_vi_grid(&h, &|x: &Vector| x.clone(), 11).is_err());
        assert!(solve_vi_grid(&ConvexSet::Whole, &|x: &Vector| x.clone(), 11).is_err());
    }

    #[test]
    fn kkt_oracle_examples() {
        let sol = solve_affine_kkt(&Matrix::identity(1), &v(&[0.0]), &BoxSet::symmetric(1, 1.0).unwrap()).unwrap();
        assert_eq!(sol.point, v(&[0.0]));

        let sol = solve_affine_kkt(&Matrix::skew2(), &v(&[0.0, 0.0]), &BoxSet::symmetric(2, 1.0).unwrap()).unwrap();
        assert_eq!(sol.point, v(&[0.0, 0.0]));

        // x + u with u = (-3, 0.5): the first coordinate is pushed to the upper face.
        let sol =
            solve_affine_kkt(&Matrix::identity(2), &v(&[-3.0, 0.5]), &BoxSet::symmetric(2, 1.0).unwrap()).unwrap();
        assert_eq!(sol.point, v(&[1.0, -0.5]));
        let Certificate::Kkt { multipliers, .. } = sol.certificate else { panic!() };
        assert!(multipliers[0] < 0.0);
        assert!(multipliers[1].abs() < 1e-12);
    }

    #[test]
    fn kkt_oracle_degenerate_matrix_and_dimension_limit() {
        // Singular free pattern is skipped; the constant push selects the lower face.
        let m = Matrix::from_rows(&[&[0.0]]).unwrap();
        let sol = solve_affine_kkt(&m, &v(&[1.0]), &BoxSet::symmetric(1, 1.0).unwrap()).unwrap();
        assert_eq!(sol.point, v(&[-1.0]));
        assert!(matches!(
            solve_affine_kkt(&Matrix::identity(5), &Vector::zeros(5), &BoxSet::symmetric(5, 1.0).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn grid_and_kkt_agree() {
        let m = Matrix::from_rows(&[&[1.0, -1.0], &[1.0, 1.0]]).unwrap();
        let u = v(&[-4.0, -1.0]);
        let bx = BoxSet::symmetric(2, 2.0).unwrap();
        let kkt = solve_affine_kkt(&m, &u, &bx).unwrap();
        let grid = solve_vi_grid(&bx.clone().into(), &|x: &Vector| &m.mul_vec(x).unwrap() + &u, 401).unwrap();
        assert!(kkt.point.dist(&v(&[2.0, -1.0])) <= 1e-12);
        let Certificate::Grid { spacing, .. } = grid.certificate else { panic!() };
        assert!(grid.point.dist(&kkt.point) <= 2.0 * spacing);
    }

    #[test]
    fn equilibrium_gap_examples() {
        let f = Bifunction::difference_of_values(ConvexSet::Whole, Quadratic::distance_squared(&v(&[0.0]))).unwrap();
        let b = MonotoneMap::identity(1);
        assert!(equilibrium_gap(&f, &b, &v(&[0.0]), 10_000).unwrap() <= 1e-8);
        assert!(equilibrium_gap(&f, &b, &v(&[1.5]), 10_000).unwrap() > 0.1);

        // B = 0: zero gap exactly at minimizers of g over C.
        let c: ConvexSet = BoxSet::new(v(&[1.0, 1.0]), v(&[2.0, 3.0])).unwrap().into();
        let g = Bifunction::difference_of_values(c, Quadratic::distance_squared(&v(&[0.0, 0.0]))).unwrap();
        let zero = MonotoneMap::zero(2);
        assert_eq!(equilibrium_gap(&g, &zero, &v(&[1.0, 1.0]), 2_500).unwrap(), 0.0);
        assert!(equilibrium_gap(&g, &zero, &v(&[1.5, 1.0]), 2_500).unwrap() > 0.0);
    }
}
