//! `run`, `verify` and `trace-format` commands behind the `outersplit`
//! binary. Each command writes its report to `out` and returns the process
//! exit code.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{Kind, LoadedConfig, Problem, RunSetup};
use crate::engine::{engine_run, EngineOptions, IterateTrace, RunStatus};
use crate::equilibrium::{solve_equilibrium, validate_index_control};
use crate::error::Result;
use crate::inclusion::{solve_inclusion, InclusionProblem};
use crate::operators::{
    forward_operator, verify_firmly_nonexpansive, verify_monotone_map, verify_pseudocontraction, FirmOp,
};
use crate::vector_space::Vector;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_DOMAIN_STOP: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

const TRACE_DOC: &str = "\
Trace files are comma-separated with one header row and one row per iteration.

column           meaning
n                iteration index, starting at 0
residual         ||q_n - x_n||
outer_gap        ||z_n - Q_n z_n||, distance moved by the outer projection
error_bound      upper bound on the perturbation of the step
dist_to_ref      ||x_n - reference|| (empty when no reference is configured)
feasibility_max  constraint violation at x_n: max_i f_i(x_n)^+ for inclusion
                 and generic runs, max_i d(x_n, S_i) for equilibrium runs

Floats use Rust's shortest round-trip scientific notation, e.g. 1.5e-3.
";

/// Column documentation of trace files.
pub fn trace_format() -> &'static str {
    TRACE_DOC
}

struct Summary {
    trace: IterateTrace,
    status: RunStatus,
    last: Vector,
    residual: f64,
    feasibility: f64,
}

fn execute(setup: &RunSetup) -> Result<Summary> {
    match &setup.problem {
        Problem::Inclusion { problem, gamma, errors, options } => {
            let sol = solve_inclusion(problem, gamma, errors, &setup.x0, options)?;
            Ok(Summary {
                residual: sol.residual,
                feasibility: sol.feasibility,
                trace: sol.trace,
                status: sol.status,
                last: sol.last,
            })
        }
        Problem::Equilibrium { problem, schedules, errors, options } => {
            let sol = solve_equilibrium(problem, schedules, errors, &setup.x0, options)?;
            Ok(Summary {
                residual: sol.residual,
                feasibility: sol.feasibility,
                trace: sol.trace,
                status: sol.status,
                last: sol.last,
            })
        }
        Problem::Generic { spec, errors, relax, stop, reference, source } => {
            let opts = EngineOptions { shadow: false, reference: reference.clone() };
            let run = engine_run(spec, errors, relax, &setup.x0, stop, &opts)?;
            let residual = run.trace.last().map_or(f64::NAN, |r| r.residual);
            Ok(Summary {
                residual,
                feasibility: source.infeasibility(&run.last),
                trace: run.trace,
                status: run.status,
                last: run.last,
            })
        }
    }
}

fn write_trace(path: &Path, trace: &IterateTrace) -> std::io::Result<()> {
    let file = BufWriter::new(File::create(path)?);
    trace.write_csv(file, true)
}

fn format_point(x: &Vector) -> String {
    let coords: Vec<String> = x.iter().map(|c| format!("{c:e}")).collect();
    format!("[{}]", coords.join(", "))
}

/// Executes the configured solve and writes its trace. `output` overrides
/// the config's `output` key; the default is `trace.csv`.
pub fn cmd_run(config: &Path, output: Option<&Path>, out: &mut dyn Write) -> i32 {
    let loaded = match LoadedConfig::load(config) {
        Ok(l) => l,
        Err(e) => return report_config_error(out, &e.to_string()),
    };
    let setup = match loaded.build() {
        Ok(s) => s,
        Err(e) => return report_config_error(out, &e.to_string()),
    };
    let summary = match execute(&setup) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let path: PathBuf = output
        .map(Path::to_path_buf)
        .or_else(|| loaded.raw.output.clone())
        .unwrap_or_else(|| PathBuf::from("trace.csv"));
    if let Err(e) = write_trace(&path, &summary.trace) {
        let _ = writeln!(out, "error: cannot write trace {}: {e}", path.display());
        return EXIT_CONFIG;
    }
    let (label, code) = match summary.status {
        RunStatus::Converged => ("converged".to_string(), EXIT_OK),
        RunStatus::MaxIterations => ("max_iter".to_string(), EXIT_MAX_ITER),
        RunStatus::DomainStop(reason) => (format!("domain_stop ({reason})"), EXIT_DOMAIN_STOP),
    };
    let residual_name = match setup.kind {
        Kind::Inclusion => "inclusion residual",
        Kind::Equilibrium => "equilibrium residual",
        Kind::Generic => "step residual",
    };
    let _ = writeln!(out, "status: {label}");
    let _ = writeln!(out, "iterations: {}", summary.trace.len());
    let _ = writeln!(out, "{residual_name}: {:e}", summary.residual);
    let _ = writeln!(out, "feasibility: {:e}", summary.feasibility);
    let _ = writeln!(out, "last iterate: {}", format_point(&summary.last));
    let _ = writeln!(out, "trace: {}", path.display());
    code
}

fn report_config_error(out: &mut dyn Write, message: &str) -> i32 {
    let _ = writeln!(out, "config error: {message}");
    EXIT_CONFIG
}

/// One certificate suite result.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    /// Worst margins, labelled; negative beyond tolerance means failure.
    pub margins: Vec<(&'static str, f64)>,
    pub passed: bool,
}

fn firm_suite(name: String, op: &FirmOp, samples: usize, seed: u64) -> Result<SuiteResult> {
    let r = verify_firmly_nonexpansive(op, samples, seed)?;
    Ok(SuiteResult { name, margins: vec![("firm", r.worst_margin)], passed: r.passed })
}

fn forward_suites(
    b: &crate::operators::MonotoneMap,
    gammas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<SuiteResult>> {
    let mono = verify_monotone_map(b, samples, seed)?;
    let mut out = vec![SuiteResult {
        name: "B monotone, chi-Lipschitz".into(),
        margins: vec![("monotone", mono.worst_monotone_margin), ("lipschitz", mono.worst_lipschitz_margin)],
        passed: mono.passed,
    }];
    for &g in gammas {
        let pseudo = verify_pseudocontraction(&forward_operator(b, g)?, samples, seed.wrapping_add(1))?;
        out.push(SuiteResult {
            name: format!("Id - {g}B pseudo contraction"),
            margins: vec![("pseudo", pseudo.worst_pseudo_margin), ("beta", pseudo.worst_lipschitz_margin)],
            passed: pseudo.passed,
        });
    }
    Ok(out)
}

fn inclusion_suites(p: &InclusionProblem, gammas: &[f64], samples: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut out = Vec::new();
    for &g in gammas {
        out.push(firm_suite(format!("resolvent J_{g}A firm"), &p.resolvent().at(g), samples, seed)?);
    }
    out.extend(forward_suites(p.forward(), gammas, samples, seed)?);
    let sub = p.verify_subgradients(samples, seed.wrapping_add(2));
    out.push(SuiteResult {
        name: "constraint subgradients".into(),
        margins: vec![("subgradient", sub.worst_margin)],
        passed: sub.passed,
    });
    Ok(out)
}

/// Runs every certificate suite that applies to the configured problem.
pub fn verify_setup(setup: &RunSetup) -> Result<Vec<SuiteResult>> {
    let (samples, seed) = (setup.samples, setup.seed);
    let gammas: Vec<f64> = {
        let eps = match &setup.problem {
            Problem::Inclusion { problem, .. } => problem.epsilon(),
            Problem::Generic { source, .. } => source.epsilon(),
            Problem::Equilibrium { problem, .. } => problem.epsilon(),
        };
        if eps == setup.gamma {
            vec![setup.gamma]
        } else {
            vec![eps, setup.gamma]
        }
    };
    match &setup.problem {
        Problem::Inclusion { problem, .. } | Problem::Generic { source: problem, .. } => {
            inclusion_suites(problem, &gammas, samples, seed)
        }
        Problem::Equilibrium { problem, schedules, .. } => {
            let f = problem.bifunction();
            let cert = f.certify(samples, seed);
            let mut out = vec![SuiteResult {
                name: format!("bifunction ({})", f.structure_name()),
                margins: vec![
                    ("F(x,x)", 0.0 - cert.worst_diagonal),
                    ("monotone", 0.0 - cert.worst_monotone),
                    ("convex", 0.0 - cert.worst_convexity),
                ],
                passed: cert.passed,
            }];
            for &g in &gammas {
                out.push(firm_suite(format!("resolvent J_{g}F firm"), &f.resolvent_op(g), samples, seed)?);
            }
            for (i, s) in problem.sets().iter().enumerate() {
                let proj = FirmOp::projector(problem.dim(), s.clone());
                out.push(firm_suite(format!("projector onto S_{i} firm"), &proj, samples, seed)?);
            }
            out.extend(forward_suites(problem.forward(), &gammas, samples, seed)?);
            let ctrl = &schedules.control;
            let max_window = (0..ctrl.count()).map(|i| ctrl.window(i)).max().unwrap_or(1);
            let horizon = 10 * max_window;
            let report = validate_index_control(ctrl, horizon)?;
            let name = match &report.first_violation {
                None => format!("index control over {horizon} steps"),
                Some(v) => format!("index control over {horizon} steps, first violation {v:?}"),
            };
            let result = SuiteResult { name, margins: vec![], passed: report.passed() };
            out.push(result);
            Ok(out)
        }
    }
}

/// Runs the certificate suites with the config's seed; exit 0 iff all pass.
pub fn cmd_verify(config: &Path, out: &mut dyn Write) -> i32 {
    let setup = match LoadedConfig::load(config).and_then(|l| l.build()) {
        Ok(s) => s,
        Err(e) => return report_config_error(out, &e.to_string()),
    };
    let suites = match verify_setup(&setup) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut all = true;
    for s in &suites {
        let margins: Vec<String> = s.margins.iter().map(|(k, v)| format!("{k} {v:e}")).collect();
        let verdict = if s.passed { "PASS" } else { "FAIL" };
        if margins.is_empty() {
            let _ = writeln!(out, "{verdict} {}", s.name);
        } else {
            let _ = writeln!(out, "{verdict} {}: worst margins {}", s.name, margins.join(", "));
        }
        all &= s.passed;
    }
    if all {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}
