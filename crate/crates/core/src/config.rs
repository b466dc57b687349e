//! TOML run descriptions.
//!
//! A config names the problem kind, its operators and sets, the parameter
//! schedules and the stopping rule. Matrices are flat row-major lists of
//! `dim * dim` numbers. Validation errors point at the line of the
//! offending key. `docs/config.md` documents the grammar.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::{ErrorSchedule, ProblemSpec, StopRule};
use crate::equilibrium::{
    Bifunction, EquilibriumErrors, EquilibriumOptions, EquilibriumProblem, EquilibriumSchedules, IndexControl,
    PerturbationRule, Quadratic, WeightScheme,
};
use crate::error::Error;
use crate::inclusion::{self, Constraint, InclusionErrors, InclusionOptions, InclusionProblem};
use crate::operators::{MonotoneMap, ResolventOracle};
use crate::schedules::{DeltaSchedule, ErrorSequence, GammaSchedule, Relaxation};
use crate::vector_space::{Ball, BoxSet, ConvexSet, HalfSpace, Matrix, Vector};

/// A config problem, with the line it refers to when known.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub file: String,
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}: {}", self.file, line, self.key, self.message),
            None => write!(f, "{}: {}: {}", self.file, self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Inclusion,
    Equilibrium,
    Generic,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub kind: Kind,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub x0: Vec<f64>,
    pub reference: Option<Vec<f64>>,
    #[serde(default)]
    pub stop: RawStop,
    pub schedule: RawSchedule,
    #[serde(default)]
    pub operator: RawOperators,
    #[serde(default, rename = "constraint")]
    pub constraints: Vec<RawConstraint>,
    pub bifunction: Option<RawBifunction>,
    #[serde(default, rename = "set")]
    pub sets: Vec<RawSet>,
    #[serde(default)]
    pub verify: RawVerify,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawStop {
    pub max_iter: usize,
    pub tol: f64,
    pub feas_tol: f64,
    pub residual_tol: f64,
}

impl Default for RawStop {
    fn default() -> Self {
        let stop = StopRule::default();
        Self { max_iter: stop.max_iter, tol: stop.tol, feas_tol: 1e-8, residual_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSchedule {
    pub epsilon: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    pub errors: Option<RawDecay>,
    pub delta: Option<RawDecay>,
    pub control: Option<RawControl>,
}

fn one() -> f64 {
    1.0
}

/// `scale / (n+1)^power`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDecay {
    pub scale: f64,
    pub power: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawControl {
    Cyclic,
    Full,
    Random { max_card: usize },
    Explicit { pattern: Vec<Vec<usize>>, windows: Vec<usize>, max_card: usize },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOperators {
    #[serde(default)]
    pub a: RawResolvent,
    #[serde(default)]
    pub b: RawForward,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawResolvent {
    #[default]
    Zero,
    NormalCone {
        set: RawSet,
    },
    Affine {
        matrix: Vec<f64>,
        offset: Option<Vec<f64>>,
    },
    L1,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawForward {
    pub matrix: Option<Vec<f64>>,
    pub offset: Option<Vec<f64>>,
    pub lipschitz: Option<f64>,
    pub domain: Option<RawSet>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawSet {
    Whole,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Cube { half_width: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Halfspace { normal: Vec<f64>, offset: f64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawConstraint {
    Trivial,
    Affine { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    MaxAffine { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawBifunction {
    Quadratic { hessian: Vec<f64>, linear: Vec<f64>, set: RawSet },
    DistanceSquared { point: Vec<f64>, set: RawSet },
    LinearVi { matrix: Vec<f64>, offset: Option<Vec<f64>>, set: RawSet },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawVerify {
    pub samples: usize,
}

impl Default for RawVerify {
    fn default() -> Self {
        Self { samples: 1000 }
    }
}

/// A parsed config with its source, used to anchor later errors.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub source: String,
    pub raw: RawConfig,
}

/// Problem data built from a config.
#[derive(Clone, Debug)]
pub enum Problem {
    Inclusion {
        problem: InclusionProblem,
        gamma: GammaSchedule,
        errors: InclusionErrors,
        options: InclusionOptions,
    },
    Equilibrium {
        problem: EquilibriumProblem,
        schedules: EquilibriumSchedules,
        errors: EquilibriumErrors,
        options: EquilibriumOptions,
    },
    Generic {
        spec: ProblemSpec,
        errors: ErrorSchedule,
        relax: Relaxation,
        stop: StopRule,
        reference: Option<Vector>,
        /// The inclusion data behind `spec`, used by certificates.
        source: InclusionProblem,
    },
}

/// Everything a run needs.
#[derive(Clone, Debug)]
pub struct RunSetup {
    pub kind: Kind,
    pub dim: usize,
    pub seed: u64,
    pub x0: Vector,
    pub gamma: f64,
    pub samples: usize,
    pub problem: Problem,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: file.clone(),
            line: None,
            key: "(file)".into(),
            message: e.to_string(),
        })?;
        Self::parse(path, source)
    }

    pub fn parse(path: &Path, source: String) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(&source).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(&source, s.start));
            ConfigError {
                file: path.display().to_string(),
                line,
                key: "(syntax)".into(),
                message: e.message().trim().to_string(),
            }
        })?;
        Ok(Self { path: path.to_path_buf(), source, raw })
    }

    fn err(&self, key: &str, message: impl fmt::Display) -> ConfigError {
        ConfigError {
            file: self.path.display().to_string(),
            line: locate(&self.source, key),
            key: key.to_string(),
            message: message.to_string(),
        }
    }

    fn vector(&self, key: &str, coords: &[f64]) -> Result<Vector, ConfigError> {
        if coords.len() != self.raw.dim {
            return Err(self.err(key, format!("expected {} numbers, got {}", self.raw.dim, coords.len())));
        }
        Vector::new(coords.to_vec()).map_err(|e| self.err(key, e))
    }

    fn matrix(&self, key: &str, data: &[f64]) -> Result<Matrix, ConfigError> {
        let d = self.raw.dim;
        if data.len() != d * d {
            return Err(self.err(key, format!("expected {} numbers (row-major {d}x{d}), got {}", d * d, data.len())));
        }
        Matrix::square(d, data.to_vec()).map_err(|e| self.err(key, e))
    }

    fn set(&self, key: &str, raw: &RawSet) -> Result<ConvexSet, ConfigError> {
        let wrap = |r: Result<ConvexSet, Error>| r.map_err(|e| self.err(key, e));
        match raw {
            RawSet::Whole => Ok(ConvexSet::Whole),
            RawSet::Box { lower, upper } => {
                wrap(BoxSet::new(self.vector(key, lower)?, self.vector(key, upper)?).map(Into::into))
            }
            RawSet::Cube { half_width } => wrap(BoxSet::symmetric(self.raw.dim, *half_width).map(Into::into)),
            RawSet::Ball { center, radius } => wrap(Ball::new(self.vector(key, center)?, *radius).map(Into::into)),
            RawSet::Halfspace { normal, offset } => {
                wrap(HalfSpace::new(self.vector(key, normal)?, *offset).map(Into::into))
            }
        }
    }

    fn resolvent(&self) -> Result<ResolventOracle, ConfigError> {
        let key = "operator.a";
        let d = self.raw.dim;
        match &self.raw.operator.a {
            RawResolvent::Zero => Ok(ResolventOracle::zero(d)),
            RawResolvent::NormalCone { set } => Ok(ResolventOracle::normal_cone(d, self.set(key, set)?)),
            RawResolvent::Affine { matrix, offset } => {
                let m = self.matrix("operator.a.matrix", matrix)?;
                let u = match offset {
                    Some(o) => self.vector("operator.a.offset", o)?,
                    None => Vector::zeros(d),
                };
                ResolventOracle::affine(m, u).map_err(|e| self.err("operator.a.matrix", e))
            }
            RawResolvent::L1 => Ok(ResolventOracle::l1_norm(d)),
        }
    }

    fn forward(&self) -> Result<MonotoneMap, ConfigError> {
        let raw = &self.raw.operator.b;
        let d = self.raw.dim;
        let mut b = match &raw.matrix {
            None => {
                if raw.offset.is_some() {
                    return Err(self.err("operator.b.offset", "an offset needs a matrix"));
                }
                MonotoneMap::zero(d)
            }
            Some(m) => {
                let m = self.matrix("operator.b.matrix", m)?;
                let u = match &raw.offset {
                    Some(o) => self.vector("operator.b.offset", o)?,
                    None => Vector::zeros(d),
                };
                MonotoneMap::affine(m, u).map_err(|e| self.err("operator.b.matrix", e))?
            }
        };
        if let Some(chi) = raw.lipschitz {
            b = b.with_lipschitz(chi).map_err(|e| self.err("operator.b.lipschitz", e))?;
        }
        if let Some(dom) = &raw.domain {
            b = b.with_domain(self.set("operator.b.domain", dom)?);
        }
        Ok(b)
    }

    fn constraints(&self) -> Result<Vec<Constraint>, ConfigError> {
        if self.raw.constraints.is_empty() {
            return Ok(vec![Constraint::trivial(self.raw.dim)]);
        }
        self.raw
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let key = format!("constraint[{i}]");
                let built = match c {
                    RawConstraint::Trivial => Ok(Constraint::trivial(self.raw.dim)),
                    RawConstraint::Affine { normal, offset } => {
                        Constraint::affine(self.vector(&format!("{key}.normal"), normal)?, *offset)
                    }
                    RawConstraint::Ball { center, radius } => {
                        Constraint::ball_distance(self.vector(&format!("{key}.center"), center)?, *radius)
                    }
                    RawConstraint::MaxAffine { normals, offsets } => {
                        if normals.len() != offsets.len() {
                            return Err(self.err(&format!("{key}.offsets"), "one offset per normal is required"));
                        }
                        let pieces = normals
                            .iter()
                            .zip(offsets)
                            .map(|(n, o)| Ok((self.vector(&format!("{key}.normals"), n)?, *o)))
                            .collect::<Result<Vec<_>, ConfigError>>()?;
                        Constraint::max_affine(pieces)
                    }
                };
                built.map_err(|e| self.err(&key, e))
            })
            .collect()
    }

    fn bifunction(&self) -> Result<Bifunction, ConfigError> {
        let raw = self
            .raw
            .bifunction
            .as_ref()
            .ok_or_else(|| self.err("bifunction", "equilibrium runs need a [bifunction] table"))?;
        let key = "bifunction";
        match raw {
            RawBifunction::Quadratic { hessian, linear, set } => {
                let g = Quadratic::new(
                    self.matrix("bifunction.hessian", hessian)?,
                    self.vector("bifunction.linear", linear)?,
                )
                .map_err(|e| self.err("bifunction.hessian", e))?;
                Bifunction::difference_of_values(self.set("bifunction.set", set)?, g).map_err(|e| self.err(key, e))
            }
            RawBifunction::DistanceSquared { point, set } => {
                let g = Quadratic::distance_squared(&self.vector("bifunction.point", point)?);
                Bifunction::difference_of_values(self.set("bifunction.set", set)?, g).map_err(|e| self.err(key, e))
            }
            RawBifunction::LinearVi { matrix, offset, set } => {
                let u = match offset {
                    Some(o) => self.vector("bifunction.offset", o)?,
                    None => Vector::zeros(self.raw.dim),
                };
                Bifunction::linear_vi(self.set("bifunction.set", set)?, self.matrix("bifunction.matrix", matrix)?, u)
                    .map_err(|e| self.err("bifunction.matrix", e))
            }
        }
    }

    fn control(&self, count: usize) -> Result<IndexControl, ConfigError> {
        let ctrl = match &self.raw.schedule.control {
            None | Some(RawControl::Cyclic) => IndexControl::Cyclic { count },
            Some(RawControl::Full) => IndexControl::Full { count },
            Some(RawControl::Random { max_card }) => {
                if *max_card == 0 {
                    return Err(self.err("schedule.control", "max_card must be at least 1"));
                }
                IndexControl::RandomAudited { count, max_card: *max_card, seed: self.raw.seed }
            }
            Some(RawControl::Explicit { pattern, windows, max_card }) => {
                if pattern.is_empty() || windows.len() != count || *max_card == 0 {
                    return Err(self.err(
                        "schedule.control",
                        format!("explicit control needs a nonempty pattern, {count} windows and max_card >= 1"),
                    ));
                }
                if let Some(bad) = pattern.iter().flatten().find(|&&i| i >= count) {
                    return Err(self.err("schedule.control", format!("index {bad} has no set (indices are 0-based)")));
                }
                IndexControl::Explicit {
                    count,
                    pattern: pattern.clone(),
                    windows: windows.clone(),
                    max_card: *max_card,
                }
            }
        };
        Ok(ctrl)
    }

    fn errors(&self, salt: u64) -> Result<ErrorSequence, ConfigError> {
        match self.raw.schedule.errors {
            None => Ok(ErrorSequence::Zero),
            Some(RawDecay { scale, power }) => {
                let seq = ErrorSequence::decaying(scale, power, self.raw.seed.wrapping_mul(8).wrapping_add(salt))
                    .map_err(|e| self.err("schedule.errors", e))?;
                seq.check_summable(0, self.raw.dim).map_err(|e| self.err("schedule.errors", e))?;
                Ok(seq)
            }
        }
    }

    /// Validates the config and builds the problem.
    pub fn build(&self) -> Result<RunSetup, ConfigError> {
        let raw = &self.raw;
        if raw.dim == 0 {
            return Err(self.err("dim", "dimension must be at least 1"));
        }
        let x0 = self.vector("x0", &raw.x0)?;
        let reference = raw.reference.as_ref().map(|r| self.vector("reference", r)).transpose()?;
        if raw.stop.max_iter == 0 {
            return Err(self.err("stop.max_iter", "max_iter must be at least 1"));
        }
        for (key, v) in [
            ("stop.tol", raw.stop.tol),
            ("stop.feas_tol", raw.stop.feas_tol),
            ("stop.residual_tol", raw.stop.residual_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(self.err(key, "tolerances must be positive"));
            }
        }
        if raw.verify.samples == 0 {
            return Err(self.err("verify.samples", "at least one sample is required"));
        }
        let stop = StopRule { max_iter: raw.stop.max_iter, tol: raw.stop.tol };
        let sched = &raw.schedule;
        let forward = self.forward()?;
        let chi = forward.lipschitz();
        let eps_bound = 1.0 / (chi + 1.0);
        if !(sched.epsilon > 0.0 && sched.epsilon < eps_bound) {
            return Err(self.err("schedule.epsilon", format!("epsilon must lie in (0, {eps_bound}) for chi = {chi}")));
        }
        let gamma = GammaSchedule::constant(sched.gamma);
        gamma.at(0, sched.epsilon, chi).map_err(|_| {
            self.err(
                "schedule.gamma",
                format!(
                    "gamma must lie in [{}, {}] for epsilon = {} and chi = {chi}",
                    sched.epsilon,
                    GammaSchedule::upper_bound(sched.epsilon, chi),
                    sched.epsilon
                ),
            )
        })?;
        if raw.kind != Kind::Equilibrium && (sched.delta.is_some() || sched.control.is_some()) {
            return Err(self.err(
                if sched.delta.is_some() { "schedule.delta" } else { "schedule.control" },
                "only equilibrium runs use delta and index control",
            ));
        }
        if raw.kind != Kind::Generic && sched.lambda != 1.0 {
            return Err(self.err("schedule.lambda", "relaxation is only configurable for generic runs"));
        }

        let problem = match raw.kind {
            Kind::Inclusion | Kind::Generic => {
                if raw.bifunction.is_some() || !raw.sets.is_empty() {
                    return Err(self.err("bifunction", "bifunction and [[set]] tables belong to equilibrium runs"));
                }
                let inclusion = InclusionProblem::new(self.resolvent()?, forward, self.constraints()?, sched.epsilon)
                    .map_err(|e| self.err("schedule.epsilon", e))?;
                let errors = InclusionErrors { e1: self.errors(1)?, e2: self.errors(2)?, e3: self.errors(3)? };
                if raw.kind == Kind::Inclusion {
                    let options = InclusionOptions {
                        stop,
                        feas_tol: raw.stop.feas_tol,
                        residual_tol: raw.stop.residual_tol,
                        reference,
                    };
                    Problem::Inclusion { problem: inclusion, gamma, errors, options }
                } else {
                    let relax = Relaxation::constant(sched.lambda);
                    relax.at(0, sched.epsilon).map_err(|_| {
                        self.err("schedule.lambda", format!("lambda must lie in [{}, 1]", sched.epsilon))
                    })?;
                    let (spec, errs, _) =
                        inclusion::as_engine_spec(&inclusion, &gamma, &errors).map_err(|e| self.err("kind", e))?;
                    Problem::Generic { spec, errors: errs, relax, stop, reference, source: inclusion }
                }
            }
            Kind::Equilibrium => {
                if !raw.constraints.is_empty() || !matches!(raw.operator.a, RawResolvent::Zero) {
                    return Err(self.err("constraint", "equilibrium runs use [bifunction] and [[set]] instead"));
                }
                let bifunction = self.bifunction()?;
                let sets = if raw.sets.is_empty() {
                    vec![ConvexSet::Whole]
                } else {
                    raw.sets
                        .iter()
                        .enumerate()
                        .map(|(i, s)| self.set(&format!("set[{i}]"), s))
                        .collect::<Result<Vec<_>, _>>()?
                };
                let control = self.control(sets.len())?;
                let (delta, perturbation) = match sched.delta {
                    None => (DeltaSchedule::Exact, PerturbationRule::None),
                    Some(RawDecay { scale, power }) => {
                        let d = DeltaSchedule::power(scale, power).map_err(|e| self.err("schedule.delta", e))?;
                        if !d.sqrt_summable() {
                            return Err(
                                self.err("schedule.delta", "square roots of delta must be summable (power > 2)")
                            );
                        }
                        (d, PerturbationRule::Seeded { seed: raw.seed.wrapping_mul(8).wrapping_add(5) })
                    }
                };
                let problem = EquilibriumProblem::new(bifunction, forward, sets, sched.epsilon)
                    .map_err(|e| self.err("schedule.epsilon", e))?;
                let max_card = control.max_card();
                if max_card as f64 * sched.epsilon > 1.0 + 1e-12 {
                    return Err(self.err(
                        "schedule.control",
                        format!("uniform weights 1/{max_card} fall below epsilon = {}", sched.epsilon),
                    ));
                }
                let schedules =
                    EquilibriumSchedules { gamma, delta, control, weights: WeightScheme::Uniform, perturbation };
                let errors = EquilibriumErrors { e1: self.errors(1)?, e2: self.errors(2)? };
                let options = EquilibriumOptions {
                    stop,
                    feas_tol: raw.stop.feas_tol,
                    residual_tol: raw.stop.residual_tol,
                    reference,
                };
                Problem::Equilibrium { problem, schedules, errors, options }
            }
        };
        Ok(RunSetup {
            kind: raw.kind,
            dim: raw.dim,
            seed: raw.seed,
            x0,
            gamma: sched.gamma,
            samples: raw.verify.samples,
            problem,
        })
    }
}

fn line_of_offset(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Line of `key` (dotted path, array tables written `name[i]`) in a TOML
/// source: the line of the last segment inside its table, else the table
/// header.
pub fn locate(source: &str, key: &str) -> Option<usize> {
    let (table, leaf) = match key.rsplit_once('.') {
        Some((t, l)) => (t.to_string(), l.to_string()),
        None if key.ends_with(']') => (key.to_string(), String::new()),
        None => (String::new(), key.to_string()),
    };
    let mut current = String::new();
    let mut array_counts: std::collections::HashMap<String, usize> = Default::default();
    let mut header_line = None;
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix("[[").and_then(|r| r.split("]]").next()) {
            let name = name.trim().to_string();
            let k = array_counts.entry(name.clone()).or_insert(0);
            current = format!("{name}[{k}]");
            *k += 1;
        } else if let Some(name) = t.strip_prefix('[').and_then(|r| r.split(']').next()) {
            current = name.trim().to_string();
        } else {
            if current == table && !leaf.is_empty() {
                if let Some(rest) = t.strip_prefix(leaf.as_str()) {
                    if rest.trim_start().starts_with('=') {
                        return Some(i + 1);
                    }
                }
            }
            continue;
        }
        if current == key {
            return Some(i + 1);
        }
        if current == table && header_line.is_none() {
            header_line = Some(i + 1);
        }
    }
    if header_line.is_some() {
        return header_line;
    }
    // Fall back to the nearest enclosing key, e.g. an inline table.
    match key.rsplit_once('.') {
        Some((parent, _)) => locate(source, parent),
        None => None,
    }
}
