//! Scenario files: TOML with the sections `[domain]`, `[kernel]`,
//! `[reaction]`, `[condition]`, `[solver]`, `[bounding]` and `[output]`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use parabolic_core::{
    min_radius, BoundingKind, CoefficientField, ConditionFunctional, Domain, GridFunction, Kernel, Method,
    RadiusVariant, Reaction, RhsModel, Scheme, SolveConfig,
};
use serde::Deserialize;

use crate::HarnessError;

/// Time samples used to estimate `mu = max_t |g(t, 0)|`.
pub const MU_SAMPLES: usize = 1001;

/// Factor applied to the proof-variant threshold for `radius = "auto"`.
pub const AUTO_RADIUS_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    seed: u64,
    domain: RawDomain,
    #[serde(default)]
    kernel: RawKind,
    #[serde(default)]
    reaction: RawReaction,
    #[serde(default = "default_condition")]
    condition: RawKind,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    bounding: RawBounding,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    bounds: Vec<[f64; 2]>,
    cells: Vec<usize>,
    #[serde(default = "default_p")]
    p: f64,
    #[serde(default = "default_coefficients")]
    coefficients: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKind {
    kind: String,
}

impl Default for RawKind {
    fn default() -> Self {
        Self { kind: "zero".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReaction {
    #[serde(default = "default_zero")]
    kind: String,
    #[serde(default = "default_b")]
    b: f64,
}

impl Default for RawReaction {
    fn default() -> Self {
        Self {
            kind: default_zero(),
            b: default_b(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    method: String,
    horizon: f64,
    dt: f64,
    scheme: String,
    tol: f64,
    max_iters: usize,
    damping: f64,
    homotopy_steps: usize,
    delay_m: usize,
    init: String,
}

impl Default for RawSolver {
    fn default() -> Self {
        let cfg = SolveConfig::default();
        Self {
            method: "picard".into(),
            horizon: 1.0,
            dt: 0.01,
            scheme: "implicit_euler".into(),
            tol: cfg.tol,
            max_iters: cfg.max_iters,
            damping: cfg.damping,
            homotopy_steps: cfg.homotopy_steps,
            delay_m: cfg.delay_m,
            init: "zero".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawRadius {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawBounding {
    kind: String,
    radius: RawRadius,
    t_samples: usize,
    sphere_samples: usize,
}

impl Default for RawBounding {
    fn default() -> Self {
        Self {
            kind: "vr_ball".into(),
            radius: RawRadius::Keyword("auto".into()),
            t_samples: 16,
            sphere_samples: 256,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

fn default_condition() -> RawKind {
    RawKind { kind: "mean".into() }
}

fn default_p() -> f64 {
    2.0
}

fn default_b() -> f64 {
    2.0
}

fn default_zero() -> String {
    "zero".into()
}

fn default_coefficients() -> String {
    "identity".into()
}

/// Initial iterate for the Picard solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialGuess {
    Zero,
    Constant(f64),
    /// `amp * prod_i sin(pi (x_i - lo_i) / (hi_i - lo_i))`.
    Sine(f64),
}

impl InitialGuess {
    pub fn parse(spec: &str) -> Result<Self, String> {
        let spec = spec.trim();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number in init '{spec}'"))
        };
        match spec.split_once(':') {
            None if spec == "zero" => Ok(Self::Zero),
            Some(("constant", c)) => Ok(Self::Constant(num(c)?)),
            Some(("sine", a)) => Ok(Self::Sine(num(a)?)),
            _ => Err(format!(
                "unknown init '{spec}' (expected zero, constant:<c> or sine:<amp>)"
            )),
        }
    }

    pub fn build(self, domain: Arc<Domain>, p: f64) -> parabolic_core::Result<GridFunction> {
        match self {
            Self::Zero => GridFunction::zeros(domain, p),
            Self::Constant(c) => GridFunction::constant(domain, p, c),
            Self::Sine(amp) => {
                let bounds = domain.bounds().to_vec();
                GridFunction::from_fn(domain, p, move |x| {
                    amp * x
                        .iter()
                        .zip(&bounds)
                        .map(|(xi, (lo, hi))| (PI * (xi - lo) / (hi - lo)).sin())
                        .product::<f64>()
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusChoice {
    Auto,
    Fixed(f64),
}

/// A validated scenario. Registry names are kept as strings and resolved on
/// demand, so overrides of the grid or step re-resolve everything.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
    pub cells: Vec<usize>,
    pub p: f64,
    pub coefficients: String,
    pub kernel: String,
    pub reaction: String,
    pub b: f64,
    pub condition: String,
    pub method: Method,
    pub horizon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub solve: SolveConfig,
    pub init: InitialGuess,
    pub bounding: BoundingKind,
    pub radius: RadiusChoice,
    pub t_samples: usize,
    pub sphere_samples: usize,
    pub output_dir: Option<String>,
}

/// Everything a scenario resolves to.
pub struct Resolved {
    pub domain: Arc<Domain>,
    pub coefficients: CoefficientField,
    pub rhs: RhsModel,
    pub condition: ConditionFunctional,
    pub mu: f64,
    pub lipschitz: f64,
    pub radius: f64,
}

/// Overrides applied from the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub grid: Option<usize>,
}

fn config_err(origin: &str, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{origin}: {msg}"))
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(&path.display().to_string(), e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Parses and validates scenario text; `origin` labels error messages.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| config_err(origin, e))?;
        let err = |m: String| config_err(origin, m);
        let core = |e: parabolic_core::Error| config_err(origin, e);

        let radius = match raw.bounding.radius {
            RawRadius::Value(r) if r > 0.0 && r.is_finite() => RadiusChoice::Fixed(r),
            RawRadius::Value(r) => return Err(err(format!("radius must be positive, got {r}"))),
            RawRadius::Keyword(k) if k == "auto" => RadiusChoice::Auto,
            RawRadius::Keyword(k) => return Err(err(format!("radius must be a number or \"auto\", got '{k}'"))),
        };
        let method = Method::parse(&raw.solver.method).map_err(core)?;
        let solve = SolveConfig {
            max_iters: raw.solver.max_iters,
            tol: raw.solver.tol,
            damping: raw.solver.damping,
            homotopy_steps: raw.solver.homotopy_steps,
            delay_m: raw.solver.delay_m,
            method,
            ball_radius: None,
        };
        let scenario = Self {
            name: raw.name,
            seed: raw.seed,
            bounds: raw.domain.bounds.iter().map(|b| (b[0], b[1])).collect(),
            cells: raw.domain.cells,
            p: raw.domain.p,
            coefficients: raw.domain.coefficients,
            kernel: raw.kernel.kind,
            reaction: raw.reaction.kind,
            b: raw.reaction.b,
            condition: raw.condition.kind,
            method,
            horizon: raw.solver.horizon,
            dt: raw.solver.dt,
            scheme: Scheme::parse(&raw.solver.scheme).map_err(core)?,
            solve,
            init: InitialGuess::parse(&raw.solver.init).map_err(err)?,
            bounding: BoundingKind::parse(&raw.bounding.kind).map_err(core)?,
            radius,
            t_samples: raw.bounding.t_samples,
            sphere_samples: raw.bounding.sphere_samples,
            output_dir: raw.output.dir,
        };
        scenario.validate().map_err(|e| match e {
            HarnessError::Config(m) => config_err(origin, m),
            other => other,
        })?;
        Ok(scenario)
    }

    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self, HarnessError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dt) = o.dt {
            self.dt = dt;
        }
        if let Some(n) = o.grid {
            self.cells = vec![n; self.cells.len()];
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::Config(m));
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return err(format!(
                "scenario name '{}' is not usable as a directory name",
                self.name
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return err(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return err(format!("dt must lie in (0, horizon], got {}", self.dt));
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return err(format!("horizon {} is not a multiple of dt {}", self.horizon, self.dt));
        }
        if self.t_samples == 0 || self.sphere_samples == 0 {
            return err("t_samples and sphere_samples must be at least 1".into());
        }
        if self.b <= 0.0 {
            return err(format!("b must be positive, got {}", self.b));
        }
        self.solve.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.resolve().map(|_| ())
    }

    pub fn t_start(&self) -> f64 {
        0.0
    }

    pub fn t_end(&self) -> f64 {
        self.horizon
    }

    /// Builds the domain, operators and radius. With `radius = "auto"` this
    /// enforces `b > L + |D|` and picks `1.05` times the proof-variant
    /// threshold (or 1 when the threshold is 0).
    pub fn resolve(&self) -> Result<Resolved, HarnessError> {
        let core = |e: parabolic_core::Error| HarnessError::Config(e.to_string());
        let domain = Arc::new(Domain::new(self.bounds.clone(), self.cells.clone()).map_err(core)?);
        let coefficients = CoefficientField::parse(&self.coefficients, domain.dim()).map_err(core)?;
        let kernel = Kernel::parse(&self.kernel, &domain).map_err(core)?;
        let reaction = Reaction::parse(&self.reaction).map_err(core)?;
        let lipschitz = reaction.declared_l();
        let rhs = RhsModel::new(kernel, self.b, reaction, domain.clone()).map_err(core)?;
        let condition = ConditionFunctional::parse(&self.condition).map_err(core)?;
        let n_steps = (self.horizon / self.dt).round() as usize;
        if let ConditionFunctional::Multipoint(_) = condition {
            condition.snap_report(self.t_start(), self.dt, n_steps).map_err(core)?;
        }
        let mu = rhs.mu(self.t_start(), self.t_end(), MU_SAMPLES).map_err(core)?;
        let measure = domain.measure();
        let radius = match self.radius {
            RadiusChoice::Fixed(r) => r,
            RadiusChoice::Auto => {
                let threshold =
                    min_radius(lipschitz, mu, measure, self.b, self.p, RadiusVariant::Proof).map_err(|_| {
                        HarnessError::Config(format!(
                            "radius = \"auto\" needs condition (a) b > L + |D|, but b = {}, L = {}, |D| = {}",
                            self.b, lipschitz, measure
                        ))
                    })?;
                if threshold > 0.0 {
                    AUTO_RADIUS_FACTOR * threshold
                } else {
                    1.0
                }
            }
        };
        Ok(Resolved {
            domain,
            coefficients,
            rhs,
            condition,
            mu,
            lipschitz,
            radius,
        })
    }
}
