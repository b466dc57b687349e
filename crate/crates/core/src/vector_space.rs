//! Euclidean space primitives: vectors, small dense matrices, and the
//! convex sets whose projections have closed forms.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for projection postconditions and set membership.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// A point of ℝ^d with finite coordinates.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting NaN and infinite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Unit vector along axis `axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Self(v)
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Euclidean inner product. Panics when the dimensions differ; use
    /// [`inner`] for the checked variant.
    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dot");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        (self - other).norm()
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in axpy");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + alpha * b).collect())
    }

    pub fn scale(&self, alpha: f64) -> Vector {
        Vector(self.0.iter().map(|a| alpha * a).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector(self.0.iter().map(|&a| f(a)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Checks the dimension against `expected`.
    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got: self.dim() })
        }
    }

    /// Standard-normal direction scaled to unit length.
    pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
        loop {
            let v = Vector((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
            let n = v.norm();
            if n > 1e-12 {
                return v.scale(1.0 / n);
            }
        }
    }

    /// Uniform sample of the cube `[-half_width, half_width]^dim`.
    pub fn random_cube<R: Rng + ?Sized>(rng: &mut R, dim: usize, half_width: f64) -> Vector {
        Vector((0..dim).map(|_| rng.random_range(-half_width..=half_width)).collect())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        rhs.scale(self)
    }
}

/// Checked inner product.
pub fn inner(a: &Vector, b: &Vector) -> Result<f64> {
    b.check_dim(a.dim())?;
    Ok(a.dot(b))
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        if let Some(index) = data.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    /// Square matrix from a row-major list.
    pub fn square(dim: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(dim, dim, data)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidParameter("ragged matrix rows".into()));
        }
        Self::new(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, alpha: f64) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = alpha;
        }
        m
    }

    /// Planar rotation generator `[[0, -1], [1, 0]]`.
    pub fn skew2() -> Self {
        Self { rows: 2, cols: 2, data: vec![0.0, -1.0, 1.0, 0.0] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn mul_vec(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.cols)?;
        Ok(Vector(self.data.chunks(self.cols).map(|row| row.iter().zip(x.iter()).map(|(a, b)| a * b).sum()).collect()))
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// `self + alpha * I`
    pub fn add_identity(&self, alpha: f64) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m.data[i * self.cols + i] += alpha;
        }
        m
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| alpha * a).collect() }
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|r| (0..self.cols).all(|c| r == c || self.get(r, c) == 0.0))
    }

    /// Returns `Some(alpha)` when the matrix equals `alpha * I`.
    pub fn as_scaled_identity(&self) -> Option<f64> {
        if !self.is_square() || !self.is_diagonal() {
            return None;
        }
        let alpha = if self.rows == 0 { 0.0 } else { self.get(0, 0) };
        (0..self.rows).all(|i| self.get(i, i) == alpha).then_some(alpha)
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Smallest eigenvalue of the symmetric part; nonnegative iff the
    /// linear map is monotone.
    pub fn symmetric_part_min_eigenvalue(&self) -> f64 {
        let a = self.to_nalgebra();
        let sym = (&a + a.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Spectral norm, the Lipschitz constant of `x ↦ Mx`.
    pub fn spectral_norm(&self) -> f64 {
        self.to_nalgebra().singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// Solves `self * x = b` by partial-pivot LU. Near-singular systems are
    /// rejected by a relative pivot test and a residual check.
    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        if !self.is_square() {
            return Err(Error::InvalidParameter("solve needs a square matrix".into()));
        }
        b.check_dim(self.rows)?;
        let a = self.to_nalgebra();
        let scale = a.amax().max(1.0);
        let lu = a.clone().lu();
        let pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));
        if self.rows > 0 && pivot <= 1e-12 * scale {
            return Err(Error::Singular { pivot });
        }
        let rhs = DVector::from_column_slice(b.as_slice());
        let x = lu.solve(&rhs).ok_or(Error::Singular { pivot })?;
        let residual = (&a * &x - &rhs).amax();
        if residual > 1e-10 * (scale * x.amax() + rhs.amax()).max(1.0) {
            return Err(Error::Singular { pivot });
        }
        Vector::new(x.iter().copied().collect())
    }
}

/// The closed half-space `{x : <normal, x> <= offset}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpace {
    normal: Vector,
    offset: f64,
    normal_sq: f64,
}

impl HalfSpace {
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        let normal_sq = normal.norm_sq();
        if normal_sq <= 0.0 {
            return Err(Error::ZeroNormal);
        }
        if !offset.is_finite() {
            return Err(Error::InvalidParameter("half-space offset must be finite".into()));
        }
        Ok(Self { normal, offset, normal_sq })
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.normal.dot(x) <= self.offset + tol
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        let excess = self.normal.dot(x) - self.offset;
        if excess <= 0.0 {
            Ok(x.clone())
        } else {
            Ok(x.axpy(-excess / self.normal_sq, &self.normal))
        }
    }
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    lower: Vector,
    upper: Vector,
}

impl BoxSet {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        upper.check_dim(lower.dim())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidParameter("box requires lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[-h, h]^dim`.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(Vector::filled(dim, -half_width), Vector::filled(dim, half_width))
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.iter().zip(self.lower.iter().zip(self.upper.iter())).all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        Ok(Vector(x.iter().zip(self.lower.iter().zip(self.upper.iter())).map(|(v, (l, u))| v.clamp(*l, *u)).collect()))
    }
}

/// Closed ball `B(center; radius)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    center: Vector,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.dist(&self.center) <= self.radius + tol
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        let offset = x - &self.center;
        let d = offset.norm();
        if d <= self.radius {
            Ok(x.clone())
        } else {
            Ok(self.center.axpy(self.radius / d, &offset))
        }
    }
}

/// Closed convex set descriptor used for operator domains and constraints.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvexSet {
    Whole,
    HalfSpace(HalfSpace),
    Box(BoxSet),
    Ball(Ball),
    Intersection(Vec<ConvexSet>),
}

impl ConvexSet {
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConvexSet::Whole => None,
            ConvexSet::HalfSpace(h) => Some(h.dim()),
            ConvexSet::Box(b) => Some(b.dim()),
            ConvexSet::Ball(b) => Some(b.dim()),
            ConvexSet::Intersection(parts) => parts.iter().find_map(ConvexSet::dim),
        }
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        match self {
            ConvexSet::Whole => true,
            ConvexSet::HalfSpace(h) => h.contains(x, tol),
            ConvexSet::Box(b) => b.contains(x, tol),
            ConvexSet::Ball(b) => b.contains(x, tol),
            ConvexSet::Intersection(parts) => parts.iter().all(|p| p.contains(x, tol)),
        }
    }

    /// Exact projection. Intersections of more than one nontrivial set have
    /// no closed form and are rejected.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        match self {
            ConvexSet::Whole => Ok(x.clone()),
            ConvexSet::HalfSpace(h) => h.project(x),
            ConvexSet::Box(b) => b.project(x),
            ConvexSet::Ball(b) => b.project(x),
            ConvexSet::Intersection(parts) => {
                let nontrivial: Vec<_> = parts.iter().filter(|p| **p != ConvexSet::Whole).collect();
                match nontrivial.as_slice() {
                    [] => Ok(x.clone()),
                    [single] => single.project(x),
                    _ => Err(Error::Unsupported("projection onto an intersection of sets".into())),
                }
            }
        }
    }

    /// Distance to the set. For intersections this is the largest distance
    /// to a member, a lower bound that vanishes exactly on the set.
    pub fn distance(&self, x: &Vector) -> Result<f64> {
        match self {
            ConvexSet::Intersection(parts) => parts.iter().try_fold(0.0_f64, |m, p| Ok(m.max(p.distance(x)?))),
            other => Ok(x.dist(&other.project(x)?)),
        }
    }

    /// Tightest axis-aligned box containing the set, if it is bounded.
    pub fn bounding_box(&self) -> Option<BoxSet> {
        match self {
            ConvexSet::Whole | ConvexSet::HalfSpace(_) => None,
            ConvexSet::Box(b) => Some(b.clone()),
            ConvexSet::Ball(b) => {
                let r = b.radius();
                BoxSet::new(b.center().map(|c| c - r), b.center().map(|c| c + r)).ok()
            }
            ConvexSet::Intersection(parts) => {
                let boxes: Vec<BoxSet> = parts.iter().filter_map(ConvexSet::bounding_box).collect();
                let first = boxes.first()?;
                let mut lo = first.lower().clone().into_inner();
                let mut hi = first.upper().clone().into_inner();
                for b in &boxes[1..] {
                    for i in 0..lo.len() {
                        lo[i] = lo[i].max(b.lower()[i]);
                        hi[i] = hi[i].min(b.upper()[i]);
                    }
                }
                BoxSet::new(Vector(lo), Vector(hi)).ok()
            }
        }
    }

    /// Draws a point of the set: a uniform point of the cube of half-width
    /// `scale` (clipped to the bounding box when there is one), pulled into
    /// the set by cyclic projections onto its members.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, dim: usize, scale: f64) -> Vector {
        let raw = match self.bounding_box() {
            Some(b) => Vector(
                b.lower()
                    .iter()
                    .zip(b.upper().iter())
                    .map(|(l, u)| if l == u { *l } else { rng.random_range(*l..=*u) })
                    .collect(),
            ),
            None => Vector::random_cube(rng, dim, scale),
        };
        self.pull_inside(raw)
    }

    pub(crate) fn pull_inside(&self, mut x: Vector) -> Vector {
        match self {
            ConvexSet::Intersection(parts) => {
                for _ in 0..1000 {
                    if self.contains(&x, FEASIBILITY_TOL) {
                        break;
                    }
                    for p in parts {
                        x = p.pull_inside(x);
                    }
                }
                x
            }
            other => other.project(&x).unwrap_or(x),
        }
    }
}

impl From<HalfSpace> for ConvexSet {
    fn from(h: HalfSpace) -> Self {
        ConvexSet::HalfSpace(h)
    }
}

impl From<BoxSet> for ConvexSet {
    fn from(b: BoxSet) -> Self {
        ConvexSet::Box(b)
    }
}

impl From<Ball> for ConvexSet {
    fn from(b: Ball) -> Self {
        ConvexSet::Ball(b)
    }
}

/// Projection onto the half-space `{x : <normal, x> <= offset}`.
pub fn project_halfspace(h: &HalfSpace, x: &Vector) -> Result<Vector> {
    h.project(x)
}

/// Componentwise clamp onto a box.
pub fn project_box(b: &BoxSet, x: &Vector) -> Result<Vector> {
    b.project(x)
}

/// Radial projection onto a ball.
pub fn project_ball(b: &Ball, x: &Vector) -> Result<Vector> {
    b.project(x)
}
