//! End-to-end scenario pipeline: assemble, certify, solve, check the ball
//! and write reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parabolic_core::{
    assemble, invariant_ball_check, min_radius, pairing_bound, transversality_check, BoundingSpec, Error, Problem,
    Propagator, RadiusVariant, SolveConfig, SolveReport, SphereSampling, Trajectory,
};
use rayon::prelude::*;

use crate::scenario::{Overrides, Scenario};
use crate::HarnessError;

/// Random pairs used to check the declared Hölder-Lipschitz constants.
const REACTION_PAIRS: usize = 1000;
/// Random initial data per exponent for the contraction certificate.
const CONTRACTION_SAMPLES: usize = 100;
const CONTRACTION_EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];
/// Slack on the closed-form pairing bound.
const PAIRING_BOUND_SLACK: f64 = 1e-6;

pub const WATERMARK: &str = "UNCERTIFIED";

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub name: &'static str,
    pub pass: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    /// All certificates passed and the solver converged.
    Solved,
    /// Certificates only, as requested by `certify`.
    Certified,
    /// Some certificate failed and the run was forced through.
    Uncertified,
    /// A certificate failed; the solve was skipped, or the converged
    /// trajectory left the ball.
    CertificateFailed,
    NotConverged,
    Diverged(String),
    BlowUp(String),
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Solved => "solved",
            Self::Certified => "certified",
            Self::Uncertified => "uncertified",
            Self::CertificateFailed => "certificate-failure",
            Self::NotConverged => "not-converged",
            Self::Diverged(_) => "diverged",
            Self::BlowUp(_) => "blow-up",
        }
    }
}

/// Result of one scenario run. `wall_time` is reported on the console only,
/// so written files depend on the inputs alone.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub status: Status,
    pub forced: bool,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: Option<f64>,
    pub max_traj_norm: Option<f64>,
    pub r_used: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub measure: f64,
    pub b: f64,
    pub p: f64,
    pub c0: f64,
    pub min_radius_proof: Option<f64>,
    pub min_radius_statement: Option<f64>,
    pub certificates: Vec<Certificate>,
    pub out_dir: PathBuf,
    pub wall_time: Duration,
}

impl RunSummary {
    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }

    /// Whether every pre-solve certificate passed.
    pub fn certified(&self) -> bool {
        self.certificates
            .iter()
            .filter(|c| c.name != "invariant_ball")
            .all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Solved | Status::Certified | Status::Uncertified => 0,
            Status::CertificateFailed => 3,
            Status::NotConverged | Status::Diverged(_) => 4,
            Status::BlowUp(_) => 5,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.12e}"));
        if self.status == Status::Uncertified {
            writeln!(s, "{WATERMARK}: certificates failed, run forced").unwrap();
        }
        writeln!(s, "scenario: {}", self.name).unwrap();
        writeln!(s, "status: {}", self.status.label()).unwrap();
        if let Status::Diverged(m) | Status::BlowUp(m) = &self.status {
            writeln!(s, "error: {m}").unwrap();
        }
        writeln!(s, "converged: {}", self.converged).unwrap();
        writeln!(s, "iterations: {}", self.iterations).unwrap();
        writeln!(s, "final_residual: {}", opt(self.final_residual)).unwrap();
        writeln!(s, "max_traj_norm: {}", opt(self.max_traj_norm)).unwrap();
        writeln!(s, "r_used: {:.12e}", self.r_used).unwrap();
        writeln!(s, "min_radius_proof: {}", opt(self.min_radius_proof)).unwrap();
        writeln!(s, "min_radius_statement: {}", opt(self.min_radius_statement)).unwrap();
        writeln!(
            s,
            "constants: L = {}, mu = {:.12e}, b = {}, |D| = {}, p = {}, C0 = {:.12e}",
            self.lipschitz, self.mu, self.b, self.measure, self.p, self.c0
        )
        .unwrap();
        writeln!(s, "certificates:").unwrap();
        for c in &self.certificates {
            writeln!(
                s,
                "  {:<16} {}  {}",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.evidence
            )
            .unwrap();
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub force: bool,
    pub certify_only: bool,
    /// Base directory; each scenario writes into `out/<name>` (or the
    /// `[output] dir` of the scenario, relative to `out`).
    pub out: PathBuf,
    pub overrides: Overrides,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            force: false,
            certify_only: false,
            out: PathBuf::from("out"),
            overrides: Overrides::default(),
        }
    }
}

fn runtime_error(e: Error) -> HarnessError {
    HarnessError::Config(e.to_string())
}

fn is_blow_up(e: &Error) -> bool {
    match e {
        Error::BlowUp { .. } => true,
        Error::ContinuationStall { source, .. } => is_blow_up(source),
        _ => false,
    }
}

/// Runs the full pipeline for `scenario` and writes its reports.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunSummary, HarnessError> {
    let started = Instant::now();
    let resolved = scenario.resolve()?;
    let domain = resolved.domain.clone();
    let (l, mu, measure, b, p) = (
        resolved.lipschitz,
        resolved.mu,
        domain.measure(),
        scenario.b,
        scenario.p,
    );
    let r = resolved.radius;

    let operator = Arc::new(assemble(&resolved.coefficients, domain.clone()).map_err(runtime_error)?);
    let propagator = Propagator::new(operator.clone(), scenario.dt, scenario.scheme).map_err(runtime_error)?;

    let mut certificates = Vec::new();
    let c0 = operator.reported_c0();
    certificates.push(Certificate {
        name: "ellipticity",
        pass: c0 > 0.0,
        evidence: format!("sampled C0 = {c0:.6e}"),
    });

    let holder = resolved
        .rhs
        .reaction()
        .validate(scenario.t_start(), scenario.t_end(), REACTION_PAIRS, scenario.seed);
    certificates.push(Certificate {
        name: "reaction",
        pass: holder.pass,
        evidence: format!(
            "declared L = {l}, beta = {}; worst ratio {:.6e} over {} pairs",
            resolved.rhs.reaction().declared_beta(),
            holder.worst_ratio,
            holder.pairs
        ),
    });

    let m0 = resolved.condition.certify_m0(r);
    certificates.push(Certificate {
        name: "m0",
        pass: m0.pass,
        evidence: m0.reason,
    });

    let gap = b - l - measure;
    certificates.push(Certificate {
        name: "condition_a",
        pass: gap > 0.0,
        evidence: format!("b - L - |D| = {b} - {l} - {measure} = {gap:.6e}"),
    });

    let proof = min_radius(l, mu, measure, b, p, RadiusVariant::Proof).ok();
    let statement = min_radius(l, mu, measure, b, p, RadiusVariant::Statement).ok();
    certificates.push(Certificate {
        name: "radius",
        pass: proof.is_some_and(|m| r >= m),
        evidence: match (proof, statement) {
            (Some(pr), Some(st)) => format!(
                "r = {r:.6e}; threshold (L+mu)|D|^(1/p)/(b-|D|-L) = {pr:.6e}, with |D| in place of |D|^(1/p) = {st:.6e}"
            ),
            _ => format!("r = {r:.6e}; no threshold since b <= L + |D|"),
        },
    });

    let spec = BoundingSpec::new(scenario.bounding, r, p).map_err(runtime_error)?;
    let sampling = SphereSampling {
        t_start: scenario.t_start(),
        t_end: scenario.t_end(),
        t_samples: scenario.t_samples,
        sphere_samples: scenario.sphere_samples,
        seed: scenario.seed,
    };
    let transversality = transversality_check(&resolved.rhs, &spec, &sampling).map_err(runtime_error)?;
    let bound = pairing_bound(l, mu, measure, b, p, r);
    let within_bound = transversality.worst_value <= bound + PAIRING_BOUND_SLACK;
    certificates.push(Certificate {
        name: "transversality",
        pass: transversality.pass,
        evidence: format!(
            "{} {} samples, worst pairing {:.6e} at t = {}, sample {}; closed-form bound {:.6e}{}",
            spec.kind.name(),
            transversality.samples.len(),
            transversality.worst_value,
            transversality.worst_point.0,
            transversality.worst_point.1,
            bound,
            if within_bound { "" } else { " EXCEEDED" }
        ),
    });

    let mut exponents = CONTRACTION_EXPONENTS.to_vec();
    if !exponents.contains(&p) {
        exponents.push(p);
    }
    let contraction = propagator
        .contraction_certificate(&exponents, CONTRACTION_SAMPLES, scenario.seed)
        .map_err(runtime_error)?;
    certificates.push(Certificate {
        name: "contraction",
        pass: contraction.pass,
        evidence: format!(
            "worst step ratio {:.15} over {} samples, p in {:?} (allowed 1 + {:e})",
            contraction.worst_ratio, contraction.samples, contraction.exponents, contraction.tolerance
        ),
    });

    let out_dir = opts.out.join(scenario.output_dir.as_deref().unwrap_or(&scenario.name));
    let mut summary = RunSummary {
        name: scenario.name.clone(),
        status: Status::Certified,
        forced: opts.force,
        converged: false,
        iterations: 0,
        final_residual: None,
        max_traj_norm: None,
        r_used: r,
        lipschitz: l,
        mu,
        measure,
        b,
        p,
        c0,
        min_radius_proof: proof,
        min_radius_statement: statement,
        certificates,
        out_dir: out_dir.clone(),
        wall_time: Duration::ZERO,
    };
    let certified = summary.certified();
    let watermark = !certified;

    let mut files = vec![("transversality.csv", transversality.to_csv())];
    if opts.certify_only || (!certified && !opts.force) {
        summary.status = if certified {
            Status::Certified
        } else {
            Status::CertificateFailed
        };
    } else {
        let condition = &resolved.condition;
        let problem = Problem::new(
            &propagator,
            &resolved.rhs,
            condition,
            scenario.t_start(),
            scenario.t_end(),
            p,
        );
        let cfg = SolveConfig {
            ball_radius: Some(r),
            ..scenario.solve.clone()
        };
        let x_init = scenario.init.build(domain.clone(), p).map_err(runtime_error)?;
        match problem.solve(&cfg, &x_init) {
            Ok(report) => {
                record_solve(&mut summary, &report, r, certified);
                files.push(("trajectory.csv", trajectory_csv(&report.trajectory)));
                files.push(("residuals.csv", report.residual_csv()));
            }
            Err(e) if is_blow_up(&e) => summary.status = Status::BlowUp(e.to_string()),
            Err(e @ (Error::Divergence { .. } | Error::ContinuationStall { .. })) => {
                if let Error::Divergence { history, .. } = &e {
                    files.push(("residuals.csv", divergence_csv(history)));
                }
                summary.status = Status::Diverged(e.to_string());
            }
            Err(e) => return Err(runtime_error(e)),
        }
    }

    files.insert(0, ("summary.txt", summary.to_text()));
    write_outputs(&out_dir, &files, watermark)?;
    summary.wall_time = started.elapsed();
    Ok(summary)
}

fn record_solve(summary: &mut RunSummary, report: &SolveReport, r: f64, certified: bool) {
    summary.converged = report.converged;
    summary.iterations = report.iterations;
    summary.final_residual = Some(report.final_residual);
    summary.max_traj_norm = Some(report.max_traj_norm);
    let ball = invariant_ball_check(report, r);
    summary.certificates.push(Certificate {
        name: "invariant_ball",
        pass: ball.pass,
        evidence: format!("max_t ||x(t)|| = {:.6e} against r = {:.6e}", ball.max_norm, ball.radius),
    });
    summary.status = if !report.converged {
        Status::NotConverged
    } else if !certified {
        Status::Uncertified
    } else if !ball.pass {
        Status::CertificateFailed
    } else {
        Status::Solved
    };
}

/// CSV with columns `t,lp_norm`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,lp_norm\n");
    for (k, n) in traj.norms().iter().enumerate() {
        writeln!(out, "{},{:e}", traj.time(k), n).unwrap();
    }
    out
}

fn divergence_csv(history: &[f64]) -> String {
    let mut out = String::from("iter,lambda,residual,max_norm\n");
    for (i, r) in history.iter().enumerate() {
        writeln!(out, "{},1,{:e},", i + 1, r).unwrap();
    }
    out
}

const OUTPUT_FILES: [&str; 4] = ["summary.txt", "transversality.csv", "trajectory.csv", "residuals.csv"];

fn write_outputs(dir: &Path, files: &[(&str, String)], watermark: bool) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for stale in OUTPUT_FILES {
        let path = dir.join(stale);
        if path.exists() {
            fs::remove_file(path).map_err(io)?;
        }
    }
    for (name, body) in files {
        let text = if watermark && name.ends_with(".csv") {
            format!("# {WATERMARK}\n{body}")
        } else {
            body.clone()
        };
        fs::write(dir.join(name), text).map_err(io)?;
    }
    Ok(())
}

/// One row of the suite table.
#[derive(Debug, Clone)]
pub struct SuiteRow {
    pub file: String,
    pub outcome: Result<RunSummary, String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    /// First nonzero row code in file order, or 0.
    pub fn exit_code(&self) -> i32 {
        self.rows.iter().map(|r| r.exit_code).find(|&c| c != 0).unwrap_or(0)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<28} {:<24} {:<20} {:>4} {:>12} {:>12} {:>12}\n",
            "file", "scenario", "status", "exit", "residual", "max_norm", "radius"
        );
        for row in &self.rows {
            match &row.outcome {
                Ok(sum) => {
                    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
                    writeln!(
                        s,
                        "{:<28} {:<24} {:<20} {:>4} {:>12} {:>12} {:>12.4e}",
                        row.file,
                        sum.name,
                        sum.status.label(),
                        row.exit_code,
                        opt(sum.final_residual),
                        opt(sum.max_traj_norm),
                        sum.r_used
                    )
                    .unwrap();
                }
                Err(msg) => {
                    let first = msg.lines().next().unwrap_or_default();
                    writeln!(
                        s,
                        "{:<28} {:<24} {:<20} {:>4}  {}",
                        row.file, "-", "error", row.exit_code, first
                    )
                    .unwrap()
                }
            }
        }
        s
    }
}

/// Scenario files (`*.toml`) in `dir`, sorted by file name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every scenario in `dir` in parallel. Errors stay in their row.
pub fn run_suite(dir: &Path, opts: &RunOptions) -> Result<SuiteReport, HarnessError> {
    let files = scenario_files(dir)?;
    let loaded: Vec<(String, Result<Scenario, HarnessError>)> = files
        .iter()
        .map(|path| {
            let file = path.file_name().unwrap().to_string_lossy().into_owned();
            (
                file,
                Scenario::from_path(path).and_then(|s| s.with_overrides(&opts.overrides)),
            )
        })
        .collect();

    let mut seen = std::collections::HashSet::new();
    let loaded: Vec<_> = loaded
        .into_iter()
        .map(|(file, s)| match s {
            Ok(s) if !seen.insert(s.output_dir.clone().unwrap_or_else(|| s.name.clone())) => {
                let msg = format!("output directory of '{}' is already used by another scenario", s.name);
                (file, Err(HarnessError::Config(msg)))
            }
            other => (file, other),
        })
        .collect();

    let rows = loaded
        .into_par_iter()
        .map(|(file, scenario)| {
            let outcome = scenario.and_then(|s| run_scenario(&s, opts));
            match outcome {
                Ok(sum) => SuiteRow {
                    file,
                    exit_code: sum.exit_code(),
                    outcome: Ok(sum),
                },
                Err(e) => SuiteRow {
                    file,
                    exit_code: e.exit_code(),
                    outcome: Err(e.to_string()),
                },
            }
        })
        .collect();
    let report = SuiteReport { rows };
    fs::create_dir_all(&opts.out).map_err(|e| HarnessError::Io(format!("{}: {e}", opts.out.display())))?;
    fs::write(opts.out.join("suite.txt"), report.table())
        .map_err(|e| HarnessError::Io(format!("{}: {e}", opts.out.display())))?;
    Ok(report)
}
