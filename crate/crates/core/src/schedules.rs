//! Parameter sequences indexed by the iteration counter: error
//! perturbations, relaxations, step sizes and resolvent accuracies.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vector_space::Vector;

/// A perturbation sequence `(e_n)` in ℝ^d.
#[derive(Clone)]
pub enum ErrorSequence {
    Zero,
    /// `e_n = scale / (n+1)^power · u_n` with `u_n` a unit direction drawn
    /// from stream `n` of a ChaCha generator seeded with `seed`.
    Decaying {
        scale: f64,
        power: f64,
        seed: u64,
    },
    /// User sequence; summability is the caller's obligation.
    Custom(Arc<dyn Fn(usize, usize) -> Vector + Send + Sync>),
}

impl ErrorSequence {
    pub fn decaying(scale: f64, power: f64, seed: u64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite() && power.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad decaying error sequence ({scale}, {power})")));
        }
        Ok(ErrorSequence::Decaying { scale, power, seed })
    }

    pub fn custom(f: impl Fn(usize, usize) -> Vector + Send + Sync + 'static) -> Self {
        ErrorSequence::Custom(Arc::new(f))
    }

    /// The `n`-th perturbation in dimension `dim`.
    pub fn at(&self, n: usize, dim: usize) -> Vector {
        match self {
            ErrorSequence::Zero => Vector::zeros(dim),
            ErrorSequence::Decaying { scale, power, seed } => {
                let magnitude = scale / ((n + 1) as f64).powf(*power);
                if magnitude == 0.0 {
                    return Vector::zeros(dim);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(n as u64);
                Vector::random_unit(&mut rng, dim).scale(magnitude)
            }
            ErrorSequence::Custom(f) => f(n, dim),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ErrorSequence::Zero) || matches!(self, ErrorSequence::Decaying { scale, .. } if *scale == 0.0)
    }

    /// Checks summability of a built-in sequence over `horizon` terms: the
    /// norms must be nonincreasing and the exponent above one, so that the
    /// partial sums form a Cauchy sequence. Custom sequences are accepted
    /// as declared.
    pub fn check_summable(&self, horizon: usize, dim: usize) -> Result<()> {
        match self {
            ErrorSequence::Zero | ErrorSequence::Custom(_) => Ok(()),
            ErrorSequence::Decaying { scale, power, .. } => {
                if *scale > 0.0 && *power <= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "error sequence with exponent {power} is not summable"
                    )));
                }
                let mut prev = f64::INFINITY;
                for n in 0..horizon {
                    let norm = self.at(n, dim).norm();
                    if norm > prev * (1.0 + 1e-12) {
                        return Err(Error::InvalidParameter(format!("error norms increase at n = {n}")));
                    }
                    prev = norm;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for ErrorSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorSequence::Zero => write!(f, "Zero"),
            ErrorSequence::Decaying { scale, power, seed } => {
                f.debug_struct("Decaying").field("scale", scale).field("power", power).field("seed", seed).finish()
            }
            ErrorSequence::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A real sequence `n ↦ value`, either constant or user supplied.
#[derive(Clone)]
pub enum ScalarSchedule {
    Constant(f64),
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl ScalarSchedule {
    pub fn custom(f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        ScalarSchedule::Custom(Arc::new(f))
    }

    pub fn raw(&self, n: usize) -> f64 {
        match self {
            ScalarSchedule::Constant(v) => *v,
            ScalarSchedule::Custom(f) => f(n),
        }
    }

    fn checked(&self, what: &'static str, n: usize, lower: f64, upper: f64) -> Result<f64> {
        let value = self.raw(n);
        if value.is_finite() && value >= lower && value <= upper {
            Ok(value)
        } else {
            Err(Error::ScheduleOutOfRange { what, iteration: n, value, lower, upper })
        }
    }
}

impl fmt::Debug for ScalarSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarSchedule::Constant(v) => write!(f, "Constant({v})"),
            ScalarSchedule::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Relaxation parameters `λ_n ∈ [ε, 1]`.
#[derive(Clone, Debug)]
pub struct Relaxation(pub ScalarSchedule);

impl Relaxation {
    pub fn constant(lambda: f64) -> Self {
        Relaxation(ScalarSchedule::Constant(lambda))
    }

    pub fn at(&self, n: usize, epsilon: f64) -> Result<f64> {
        self.0.checked("lambda", n, epsilon, 1.0)
    }
}

impl Default for Relaxation {
    fn default() -> Self {
        Relaxation::constant(1.0)
    }
}

/// Step sizes `γ_n ∈ [ε, (1-ε)/χ]`.
#[derive(Clone, Debug)]
pub struct GammaSchedule(pub ScalarSchedule);

impl GammaSchedule {
    pub fn constant(gamma: f64) -> Self {
        GammaSchedule(ScalarSchedule::Constant(gamma))
    }

    pub fn custom(f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        GammaSchedule(ScalarSchedule::custom(f))
    }

    /// Upper bound `(1-ε)/χ`; unbounded when `χ = 0`.
    pub fn upper_bound(epsilon: f64, chi: f64) -> f64 {
        if chi > 0.0 {
            (1.0 - epsilon) / chi
        } else {
            f64::INFINITY
        }
    }

    pub fn at(&self, n: usize, epsilon: f64, chi: f64) -> Result<f64> {
        self.0.checked("gamma", n, epsilon, Self::upper_bound(epsilon, chi))
    }
}

/// Accuracies `δ_n` of the approximate bifunction resolvents.
#[derive(Clone)]
pub enum DeltaSchedule {
    /// `δ_n = 0`: exact resolvents.
    Exact,
    /// `δ_n = scale / (n+1)^power`.
    Power {
        scale: f64,
        power: f64,
    },
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl DeltaSchedule {
    pub fn power(scale: f64, power: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && power.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad delta schedule ({scale}, {power})")));
        }
        Ok(DeltaSchedule::Power { scale, power })
    }

    pub fn at(&self, n: usize) -> Result<f64> {
        let delta = match self {
            DeltaSchedule::Exact => 0.0,
            DeltaSchedule::Power { scale, power } => scale / ((n + 1) as f64).powf(*power),
            DeltaSchedule::Custom(f) => f(n),
        };
        if delta >= 0.0 && delta.is_finite() {
            Ok(delta)
        } else {
            Err(Error::ScheduleOutOfRange {
                what: "delta",
                iteration: n,
                value: delta,
                lower: 0.0,
                upper: f64::INFINITY,
            })
        }
    }

    /// Whether `Σ sqrt(δ_n)` is finite, decided analytically for built-in
    /// schedules.
    pub fn sqrt_summable(&self) -> bool {
        match self {
            DeltaSchedule::Exact | DeltaSchedule::Custom(_) => true,
            DeltaSchedule::Power { power, .. } => *power > 2.0,
        }
    }
}

impl fmt::Debug for DeltaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaSchedule::Exact => write!(f, "Exact"),
            DeltaSchedule::Power { scale, power } => write!(f, "Power {{ scale: {scale}, power: {power} }}"),
            DeltaSchedule::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decaying_errors_have_declared_norms_and_are_reproducible() {
        let e = ErrorSequence::decaying(0.1, 2.0, 42).unwrap();
        for n in 0..20 {
            let a = e.at(n, 3);
            assert!((a.norm() - 0.1 / ((n + 1) as f64).powi(2)).abs() < 1e-15);
            assert_eq!(a, e.at(n, 3));
        }
        assert_ne!(e.at(1, 3), ErrorSequence::decaying(0.1, 2.0, 43).unwrap().at(1, 3));
        assert!(e.check_summable(500, 3).is_ok());
        assert!(ErrorSequence::decaying(0.1, 1.0, 0).unwrap().check_summable(10, 2).is_err());
        assert!(ErrorSequence::decaying(0.0, 0.5, 0).unwrap().check_summable(10, 2).is_ok());
    }

    #[test]
    fn relaxation_bounds() {
        assert!(Relaxation::constant(1.5).at(0, 0.1).is_err());
        assert!(Relaxation::constant(0.05).at(0, 0.1).is_err());
        assert_eq!(Relaxation::constant(0.5).at(7, 0.1).unwrap(), 0.5);
        let r = Relaxation(ScalarSchedule::custom(|n| if n < 3 { 1.0 } else { 2.0 }));
        assert!(r.at(2, 0.1).is_ok());
        assert!(matches!(r.at(3, 0.1), Err(Error::ScheduleOutOfRange { iteration: 3, .. })));
    }

    #[test]
    fn gamma_bounds() {
        // ε = 0.25, χ = 1: admissible range [0.25, 0.75].
        assert_eq!(GammaSchedule::constant(0.5).at(0, 0.25, 1.0).unwrap(), 0.5);
        assert!(GammaSchedule::constant(0.8).at(0, 0.25, 1.0).is_err());
        assert!(GammaSchedule::constant(0.2).at(0, 0.25, 1.0).is_err());
        assert!(GammaSchedule::constant(50.0).at(0, 0.25, 0.0).is_ok());
    }

    #[test]
    fn delta_schedules() {
        let d = DeltaSchedule::power(1.0, 4.0).unwrap();
        assert_eq!(d.at(1).unwrap(), 1.0 / 16.0);
        assert!(d.sqrt_summable());
        assert!(!DeltaSchedule::power(1.0, 2.0).unwrap().sqrt_summable());
        assert_eq!(DeltaSchedule::Exact.at(5).unwrap(), 0.0);
    }
}
