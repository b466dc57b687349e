//! Operators consumed by the splitting algorithms, with seeded sampling
//! certificates for their defining inequalities.
//!
//! Set-valued monotone operators only appear through their resolvents
//! ([`ResolventOracle`]); single-valued monotone Lipschitz maps through
//! [`MonotoneMap`].

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vector_space::{ConvexSet, Matrix, Vector};

/// Tolerance on the firm nonexpansiveness margin.
pub const FIRM_TOL: f64 = 1e-9;
/// Tolerance on Lipschitz certificates.
pub const LIPSCHITZ_TOL: f64 = 1e-9;
/// Tolerance on the monotonicity margin.
pub const MONOTONE_TOL: f64 = 1e-10;

pub type MapFn = Arc<dyn Fn(&Vector) -> Result<Vector> + Send + Sync>;
pub type ResolveFn = Arc<dyn Fn(f64, &Vector) -> Result<Vector> + Send + Sync>;

/// Single-valued monotone map `B` with Lipschitz constant `chi`.
#[derive(Clone)]
pub struct MonotoneMap {
    dim: usize,
    apply: MapFn,
    lipschitz: f64,
    domain: ConvexSet,
}

impl MonotoneMap {
    pub fn new(
        dim: usize,
        lipschitz: f64,
        domain: ConvexSet,
        apply: impl Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lipschitz constant must be >= 0, got {lipschitz}")));
        }
        Ok(Self { dim, apply: Arc::new(apply), lipschitz, domain })
    }

    /// `x ↦ Mx + u` on the whole space, with the spectral norm of `M` as
    /// Lipschitz constant.
    pub fn affine(matrix: Matrix, offset: Vector) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidParameter("affine map needs a square matrix".into()));
        }
        offset.check_dim(matrix.rows())?;
        let chi = matrix.spectral_norm();
        let dim = matrix.rows();
        Self::new(dim, chi, ConvexSet::Whole, move |x| Ok(&matrix.mul_vec(x)? + &offset))
    }

    /// Linear map `x ↦ Mx`.
    pub fn linear(matrix: Matrix) -> Result<Self> {
        let dim = matrix.rows();
        Self::affine(matrix, Vector::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, 1.0, ConvexSet::Whole, |x| Ok(x.clone())).expect("valid constant")
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, 0.0, ConvexSet::Whole, move |x| {
            x.check_dim(dim)?;
            Ok(Vector::zeros(dim))
        })
        .expect("valid constant")
    }

    /// Replaces the declared Lipschitz constant.
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lipschitz constant must be >= 0, got {lipschitz}")));
        }
        self.lipschitz = lipschitz;
        Ok(self)
    }

    pub fn with_domain(mut self, domain: ConvexSet) -> Self {
        self.domain = domain;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn domain(&self) -> &ConvexSet {
        &self.domain
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim)?;
        (self.apply)(x)
    }
}

impl fmt::Debug for MonotoneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneMap")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

/// Access to a maximally monotone operator `A` through `γ ↦ J_{γA}`.
#[derive(Clone)]
pub struct ResolventOracle {
    dim: usize,
    resolve: ResolveFn,
    domain: ConvexSet,
}

impl ResolventOracle {
    /// Wraps a user resolvent. Maximal monotonicity is trusted; only firm
    /// nonexpansiveness can be spot-checked with [`verify_firmly_nonexpansive`].
    pub fn new(
        dim: usize,
        domain: ConvexSet,
        resolve: impl Fn(f64, &Vector) -> Result<Vector> + Send + Sync + 'static,
    ) -> Self {
        Self { dim, resolve: Arc::new(resolve), domain }
    }

    /// Resolvent of `A = 0`, the identity for every `γ`.
    pub fn zero(dim: usize) -> Self {
        Self::new(dim, ConvexSet::Whole, |_, x| Ok(x.clone()))
    }

    /// Resolvent of `A: x ↦ Mx + u`.
    pub fn affine(matrix: Matrix, offset: Vector) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidParameter("affine operator needs a square matrix".into()));
        }
        offset.check_dim(matrix.rows())?;
        let dim = matrix.rows();
        Ok(Self::new(dim, ConvexSet::Whole, move |gamma, x| resolvent_affine(&matrix, &offset, gamma, x)))
    }

    /// Resolvent of the normal cone of `set`, i.e. its projector.
    pub fn normal_cone(dim: usize, set: ConvexSet) -> Self {
        let domain = set.clone();
        Self::new(dim, domain, move |gamma, x| resolvent_normal_cone(&set, gamma, x))
    }

    /// Resolvent of the subdifferential of the l1 norm (soft threshold).
    pub fn l1_norm(dim: usize) -> Self {
        Self::new(dim, ConvexSet::Whole, |gamma, x| Ok(x.map(|c| prox_abs(gamma, c))))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `dom A`.
    pub fn domain(&self) -> &ConvexSet {
        &self.domain
    }

    pub fn resolve(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("resolvent step must be positive, got {gamma}")));
        }
        x.check_dim(self.dim)?;
        (self.resolve)(gamma, x)
    }

    /// `J_{γA}` as a firmly nonexpansive handle.
    pub fn at(&self, gamma: f64) -> FirmOp {
        let oracle = self.clone();
        FirmOp::new(self.dim, move |x| oracle.resolve(gamma, x))
    }
}

impl fmt::Debug for ResolventOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResolventOracle").field("dim", &self.dim).field("domain", &self.domain).finish_non_exhaustive()
    }
}

/// A firmly nonexpansive operator on the whole space.
#[derive(Clone)]
pub struct FirmOp {
    dim: usize,
    apply: MapFn,
}

impl FirmOp {
    pub fn new(dim: usize, apply: impl Fn(&Vector) -> Result<Vector> + Send + Sync + 'static) -> Self {
        Self { dim, apply: Arc::new(apply) }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, |x| Ok(x.clone()))
    }

    pub fn projector(dim: usize, set: ConvexSet) -> Self {
        Self::new(dim, move |x| set.project(x))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim)?;
        (self.apply)(x)
    }
}

impl fmt::Debug for FirmOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirmOp").field("dim", &self.dim).finish_non_exhaustive()
    }
}

/// A pseudo contraction `R` whose complement `Id - R` is `beta`-Lipschitz.
#[derive(Clone)]
pub struct PseudoContraction {
    dim: usize,
    apply: MapFn,
    beta: f64,
    domain: ConvexSet,
}

impl PseudoContraction {
    pub fn new(
        dim: usize,
        beta: f64,
        domain: ConvexSet,
        apply: impl Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self { dim, apply: Arc::new(apply), beta, domain })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, 0.0, ConvexSet::Whole, |x| Ok(x.clone())).expect("valid constant")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn domain(&self) -> &ConvexSet {
        &self.domain
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim)?;
        (self.apply)(x)
    }
}

impl fmt::Debug for PseudoContraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PseudoContraction")
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

/// `J_{γA}x` for `A: x ↦ Mx + u`: the solution of `(I + γM)q = x - γu`.
pub fn resolvent_affine(matrix: &Matrix, offset: &Vector, gamma: f64, x: &Vector) -> Result<Vector> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("resolvent step must be positive, got {gamma}")));
    }
    let system = matrix.scale(gamma).add_identity(1.0);
    system.solve(&x.axpy(-gamma, offset))
}

/// Resolvent of a normal cone: the projector, independent of `gamma`.
pub fn resolvent_normal_cone(set: &ConvexSet, gamma: f64, x: &Vector) -> Result<Vector> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("resolvent step must be positive, got {gamma}")));
    }
    set.project(x)
}

/// Soft threshold, the resolvent of `γ∂|·|`.
pub fn prox_abs(gamma: f64, x: f64) -> f64 {
    assert!(gamma > 0.0, "prox step must be positive");
    x.signum() * (x.abs() - gamma).max(0.0)
}

/// The forward step `R = Id - γB`, whose complement is `γχ`-Lipschitz.
pub fn forward_operator(b: &MonotoneMap, gamma: f64) -> Result<PseudoContraction> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("forward step must be positive, got {gamma}")));
    }
    let beta = gamma * b.lipschitz();
    if beta > 1.0 {
        return Err(Error::InvalidParameter(format!("forward step gamma * chi = {beta} exceeds 1")));
    }
    let map = b.clone();
    PseudoContraction::new(b.dim(), beta, b.domain().clone(), move |x| Ok(x.axpy(-gamma, &map.eval(x)?)))
}

/// Outcome of a sampled firm nonexpansiveness check.
#[derive(Clone, Debug, PartialEq)]
pub struct FirmReport {
    pub samples: usize,
    /// Smallest observed `<x-y, Tx-Ty> - ||Tx-Ty||^2`.
    pub worst_margin: f64,
    pub passed: bool,
}

/// Outcome of a sampled pseudo contraction check.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoReport {
    pub samples: usize,
    /// Smallest `||x-y||^2 + ||(Id-R)x-(Id-R)y||^2 - ||Rx-Ry||^2`.
    pub worst_pseudo_margin: f64,
    /// Smallest `beta ||x-y|| - ||(Id-R)x-(Id-R)y||`.
    pub worst_lipschitz_margin: f64,
    pub passed: bool,
}

/// Outcome of a sampled monotone Lipschitz check.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneReport {
    pub samples: usize,
    /// Smallest `<Bx-By, x-y>`.
    pub worst_monotone_margin: f64,
    /// Smallest `chi ||x-y|| - ||Bx-By||`.
    pub worst_lipschitz_margin: f64,
    pub passed: bool,
}

const SAMPLE_SCALES: [f64; 3] = [0.5, 2.0, 10.0];

/// Seeded pair generator over a set. Scales rotate so that both nearby and
/// distant pairs are drawn.
pub(crate) struct PairSampler {
    rng: ChaCha8Rng,
    dim: usize,
    domain: ConvexSet,
    k: usize,
}

impl PairSampler {
    pub(crate) fn new(seed: u64, dim: usize, domain: ConvexSet) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), dim, domain, k: 0 }
    }

    pub(crate) fn next_pair(&mut self) -> (Vector, Vector) {
        let scale = SAMPLE_SCALES[self.k % SAMPLE_SCALES.len()];
        let near = SAMPLE_SCALES[(self.k / SAMPLE_SCALES.len()) % SAMPLE_SCALES.len()];
        self.k += 1;
        let x = self.domain.sample(&mut self.rng, self.dim, scale);
        let step = Vector::random_unit(&mut self.rng, self.dim).scale(self.rng.random_range(0.0..near));
        let y = self.domain.pull_inside(&x + &step);
        (x, y)
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        Err(Error::InvalidParameter("at least one sample is required".into()))
    } else {
        Ok(())
    }
}

/// Firm nonexpansiveness margin of one pair.
pub fn firm_margin(x: &Vector, y: &Vector, tx: &Vector, ty: &Vector) -> f64 {
    let d = tx - ty;
    (x - y).dot(&d) - d.dot(&d)
}

/// Evaluates `<x-y, Tx-Ty> >= ||Tx-Ty||^2` on `samples` seeded pairs.
pub fn verify_firmly_nonexpansive(t: &FirmOp, samples: usize, seed: u64) -> Result<FirmReport> {
    check_samples(samples)?;
    let mut sampler = PairSampler::new(seed, t.dim(), ConvexSet::Whole);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let (x, y) = sampler.next_pair();
        let m = firm_margin(&x, &y, &t.apply(&x)?, &t.apply(&y)?);
        worst = worst.min(m);
    }
    Ok(FirmReport { samples, worst_margin: worst, passed: worst >= -FIRM_TOL })
}

/// Checks the pseudo contraction inequality and the `beta` certificate of
/// `Id - R` on seeded pairs inside `R`'s domain.
pub fn verify_pseudocontraction(r: &PseudoContraction, samples: usize, seed: u64) -> Result<PseudoReport> {
    check_samples(samples)?;
    let mut sampler = PairSampler::new(seed, r.dim(), r.domain().clone());
    let mut worst_pseudo = f64::INFINITY;
    let mut worst_lip = f64::INFINITY;
    for _ in 0..samples {
        let (x, y) = sampler.next_pair();
        let (rx, ry) = (r.apply(&x)?, r.apply(&y)?);
        let dxy = &x - &y;
        let drr = &rx - &ry;
        let dcomp = &dxy - &drr;
        worst_pseudo = worst_pseudo.min(dxy.norm_sq() + dcomp.norm_sq() - drr.norm_sq());
        worst_lip = worst_lip.min(r.beta() * dxy.norm() - dcomp.norm());
    }
    Ok(PseudoReport {
        samples,
        worst_pseudo_margin: worst_pseudo,
        worst_lipschitz_margin: worst_lip,
        passed: worst_pseudo >= -FIRM_TOL && worst_lip >= -LIPSCHITZ_TOL,
    })
}

/// Checks monotonicity and the declared Lipschitz constant of `B`.
pub fn verify_monotone_map(b: &MonotoneMap, samples: usize, seed: u64) -> Result<MonotoneReport> {
    check_samples(samples)?;
    let mut sampler = PairSampler::new(seed, b.dim(), b.domain().clone());
    let mut worst_mono = f64::INFINITY;
    let mut worst_lip = f64::INFINITY;
    for _ in 0..samples {
        let (x, y) = sampler.next_pair();
        let dxy = &x - &y;
        let db = &b.eval(&x)? - &b.eval(&y)?;
        worst_mono = worst_mono.min(db.dot(&dxy));
        worst_lip = worst_lip.min(b.lipschitz() * dxy.norm() - db.norm());
    }
    Ok(MonotoneReport {
        samples,
        worst_monotone_margin: worst_mono,
        worst_lipschitz_margin: worst_lip,
        passed: worst_mono >= -MONOTONE_TOL && worst_lip >= -LIPSCHITZ_TOL,
    })
}
