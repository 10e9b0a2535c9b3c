//! Solvers for the nonlocal problem `x' = A x + f(t, x)`, `x(a) = M(x)`.
//!
//! Both methods iterate on the initial state `z = x(a)`. One sweep evolves
//! the mild solution from `z` with forcing `lambda f` and compares `z` with
//! the target `lambda M(x)`. With a start delay `1/m` the trajectory is held
//! at `z` on `[a, a + 1/m]`, evolved from there, and the target becomes
//! `lambda S(1/m) M(x)`.

use std::fmt::Write as _;

use crate::conditions::ConditionFunctional;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Trajectory};
use crate::rhs::RhsModel;
use crate::semigroup::Propagator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Picard,
    Homotopy,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "picard" => Ok(Self::Picard),
            "homotopy" => Ok(Self::Homotopy),
            other => Err(Error::InvalidParameter(format!("unknown solver method '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Picard => "picard",
            Self::Homotopy => "homotopy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub max_iters: usize,
    /// Convergence threshold on the condition residual.
    pub tol: f64,
    /// Initial relaxation factor in `(0, 1]`.
    pub damping: f64,
    pub homotopy_steps: usize,
    /// Start delay `1/m`; zero disables it.
    pub delay_m: usize,
    pub method: Method,
    /// Radius of the ball the solution is expected in, recorded in reports.
    pub ball_radius: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
            damping: 1.0,
            homotopy_steps: 4,
            delay_m: 0,
            method: Method::Picard,
            ball_radius: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if self.method == Method::Homotopy && self.homotopy_steps == 0 {
            return bad("homotopy_steps must be at least 1".into());
        }
        Ok(())
    }
}

/// One sweep of the fixed-point map.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub lambda: f64,
    pub residual: f64,
    pub max_norm: f64,
}

/// Summary of the damped Picard solve at one continuation parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    /// Residual of the first sweep from the warm start.
    pub warm_start_residual: f64,
    /// Residual of a sweep from `x = 0`, for comparison.
    pub cold_start_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub ball_radius_used: Option<f64>,
    pub max_traj_norm: f64,
    pub trajectory: Trajectory,
    pub history: Vec<IterationRecord>,
    pub stages: Vec<StageReport>,
}

impl SolveReport {
    /// CSV with columns `iter,lambda,residual,max_norm`.
    pub fn residual_csv(&self) -> String {
        let mut out = String::from("iter,lambda,residual,max_norm\n");
        for r in &self.history {
            writeln!(out, "{},{},{:e},{:e}", r.iter, r.lambda, r.residual, r.max_norm).unwrap();
        }
        out
    }
}

/// Outcome of checking `max_t ||x(t)|| <= r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallCertificate {
    pub pass: bool,
    pub max_norm: f64,
    pub radius: f64,
}

/// Checks that the solution stays in the closed ball of radius `r`,
/// with relative slack `1e-6`.
pub fn invariant_ball_check(report: &SolveReport, r: f64) -> BallCertificate {
    BallCertificate {
        pass: report.max_traj_norm <= r * (1.0 + 1e-6),
        max_norm: report.max_traj_norm,
        radius: r,
    }
}

/// A nonlocal boundary value problem on `[t_start, t_end]`.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub propagator: &'a Propagator,
    pub rhs: &'a RhsModel,
    pub condition: &'a ConditionFunctional,
    pub t_start: f64,
    pub t_end: f64,
    /// Lebesgue exponent of the state space.
    pub p: f64,
}

struct Sweep {
    trajectory: Trajectory,
    target: GridFunction,
    residual: f64,
}

struct Stage {
    report: StageReport,
    trajectory: Trajectory,
    z: GridFunction,
}

impl<'a> Problem<'a> {
    pub fn new(
        propagator: &'a Propagator,
        rhs: &'a RhsModel,
        condition: &'a ConditionFunctional,
        t_start: f64,
        t_end: f64,
        p: f64,
    ) -> Self {
        Self {
            propagator,
            rhs,
            condition,
            t_start,
            t_end,
            p,
        }
    }

    fn delay_steps(&self, delay_m: usize) -> Result<usize> {
        if delay_m == 0 {
            return Ok(0);
        }
        let dt = self.propagator.dt();
        let total = self.propagator.steps_for(self.t_end - self.t_start)?;
        let steps = ((1.0 / delay_m as f64) / dt).round().max(1.0) as usize;
        if steps >= total {
            return Err(Error::InvalidParameter(format!(
                "start delay 1/{delay_m} does not fit inside the horizon"
            )));
        }
        Ok(steps)
    }

    fn sweep(&self, z: &GridFunction, lambda: f64, delay_steps: usize) -> Result<Sweep> {
        let pr = self.propagator;
        let (trajectory, target) = if delay_steps == 0 {
            let traj = pr.evolve_scaled(self.rhs, lambda, z, self.t_start, self.t_end)?;
            let target = self.condition.apply_m(&traj)?.scaled(lambda);
            (traj, target)
        } else {
            let t_delay = self.t_start + delay_steps as f64 * pr.dt();
            let tail = pr.evolve_scaled(self.rhs, lambda, z, t_delay, self.t_end)?;
            let mut states = vec![z.clone(); delay_steps];
            states.extend(tail.states().iter().cloned());
            let traj = Trajectory::new(self.t_start, pr.dt(), states)?;
            let m = self.condition.apply_m(&traj)?;
            let target = pr.apply_semigroup(delay_steps as f64 * pr.dt(), &m)?.scaled(lambda);
            (traj, target)
        };
        let residual = z.distance(&target);
        Ok(Sweep {
            trajectory,
            target,
            residual,
        })
    }

    /// Damped Picard iteration `z <- (1 - w) z + w lambda M(x_z)`, halving
    /// `w` on a residual increase (at most four times). A residual more than
    /// ten times above its running minimum is reported as divergence.
    fn picard_stage(
        &self,
        lambda: f64,
        z0: GridFunction,
        cfg: &SolveConfig,
        history: &mut Vec<IterationRecord>,
    ) -> Result<Stage> {
        let delay = self.delay_steps(cfg.delay_m)?;
        let mut z = z0;
        let mut damping = cfg.damping;
        let mut halvings = 0;
        let mut min_residual = f64::INFINITY;
        let mut previous = f64::INFINITY;
        let mut stage_residuals = Vec::new();
        let mut warm = None;
        let cold = if z.values().iter().all(|&v| v == 0.0) {
            None
        } else {
            let zero = GridFunction::zeros(z.domain().clone(), z.p())?;
            Some(self.sweep(&zero, lambda, delay)?.residual)
        };

        for _ in 0..cfg.max_iters {
            let sweep = self.sweep(&z, lambda, delay)?;
            let residual = sweep.residual;
            let warm = *warm.get_or_insert(residual);
            stage_residuals.push(residual);
            history.push(IterationRecord {
                iter: history.len() + 1,
                lambda,
                residual,
                max_norm: sweep.trajectory.max_norm(),
            });

            let converged = residual <= cfg.tol;
            if converged || stage_residuals.len() == cfg.max_iters {
                return Ok(Stage {
                    report: StageReport {
                        lambda,
                        iterations: stage_residuals.len(),
                        converged,
                        final_residual: residual,
                        warm_start_residual: warm,
                        cold_start_residual: cold.unwrap_or(warm),
                    },
                    trajectory: sweep.trajectory,
                    z,
                });
            }
            if residual > 10.0 * min_residual {
                return Err(Error::Divergence {
                    history: stage_residuals,
                    min: min_residual,
                });
            }
            if residual > previous && halvings < 4 {
                damping *= 0.5;
                halvings += 1;
            }
            min_residual = min_residual.min(residual);
            previous = residual;
            z = z.scaled(1.0 - damping).axpy(damping, &sweep.target);
        }
        unreachable!("max_iters >= 1 is validated")
    }

    fn report(
        &self,
        cfg: &SolveConfig,
        last: Stage,
        history: Vec<IterationRecord>,
        stages: Vec<StageReport>,
    ) -> SolveReport {
        let residual_history: Vec<f64> = history.iter().map(|r| r.residual).collect();
        SolveReport {
            converged: last.report.converged,
            iterations: residual_history.len(),
            final_residual: last.report.final_residual,
            residual_history,
            ball_radius_used: cfg.ball_radius,
            max_traj_norm: last.trajectory.max_norm(),
            trajectory: last.trajectory,
            history,
            stages,
        }
    }

    /// Damped Picard iteration on `x(a) = M(x)` starting from `x_init`.
    pub fn picard_solve(&self, cfg: &SolveConfig, x_init: &GridFunction) -> Result<SolveReport> {
        cfg.validate()?;
        let mut history = Vec::new();
        let stage = self.picard_stage(1.0, x_init.clone(), cfg, &mut history)?;
        let stages = vec![stage.report.clone()];
        Ok(self.report(cfg, stage, history, stages))
    }

    /// Continuation in `lambda = 1/N, 2/N, ..., 1` on
    /// `x' = A x + lambda f(t, x)`, `x(a) = lambda M(x)`, starting from the
    /// `lambda = 0` solution `x = 0` and warm-starting each stage from the
    /// previous one.
    pub fn homotopy_solve(&self, cfg: &SolveConfig) -> Result<SolveReport> {
        cfg.validate()?;
        let domain = self.rhs.domain().clone();
        let mut z = GridFunction::zeros(domain, self.p)?;
        let mut history = Vec::new();
        let mut stages = Vec::new();
        let n = cfg.homotopy_steps;
        for j in 1..=n {
            let lambda = j as f64 / n as f64;
            let stall = |source: Error| Error::ContinuationStall {
                lambda,
                source: Box::new(source),
            };
            let stage = self.picard_stage(lambda, z, cfg, &mut history).map_err(stall)?;
            stages.push(stage.report.clone());
            if j == n {
                return Ok(self.report(cfg, stage, history, stages));
            }
            if !stage.report.converged {
                return Err(stall(Error::InvalidInput(format!(
                    "no convergence within {} iterations (residual {:e})",
                    cfg.max_iters, stage.report.final_residual
                ))));
            }
            z = stage.z;
        }
        unreachable!("homotopy_steps >= 1 is validated")
    }

    pub fn solve(&self, cfg: &SolveConfig, x_init: &GridFunction) -> Result<SolveReport> {
        match cfg.method {
            Method::Picard => self.picard_solve(cfg, x_init),
            Method::Homotopy => self.homotopy_solve(cfg),
        }
    }

    /// Residual `||z - lambda M(x_z)||` of a single sweep from `z`.
    pub fn sweep_residual(&self, z: &GridFunction, lambda: f64, delay_m: usize) -> Result<f64> {
        Ok(self.sweep(z, lambda, self.delay_steps(delay_m)?)?.residual)
    }
}
