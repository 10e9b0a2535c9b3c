//! The nonlinearity `f(t, eta)(xi) = int_D k(xi, y) eta(y) dy - b eta(xi) + g(t, eta(xi))`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Domain, GridFunction};

#[derive(Debug, Clone, PartialEq)]
enum KernelKind {
    Zero,
    Constant(f64),
    /// `n x n` row-major, premultiplied by the cell volume.
    Dense {
        n: usize,
        weighted: Vec<f64>,
    },
}

/// Integral kernel `k(xi, y)` with `0 <= k <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    kind: KernelKind,
    label: String,
}

fn check_kernel_value(v: f64, at: impl fmt::Display) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Kernel(format!("kernel value {v} at {at} is outside [0, 1]")))
    }
}

impl Kernel {
    pub fn zero() -> Self {
        Self {
            kind: KernelKind::Zero,
            label: "zero".into(),
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        check_kernel_value(c, "every point")?;
        Ok(Self {
            kind: KernelKind::Constant(c),
            label: format!("constant:{c}"),
        })
    }

    /// Kernel given by its nodal values `k(xi_i, y_j)`, row-major.
    pub fn dense(domain: &Domain, values: Vec<f64>) -> Result<Self> {
        let n = domain.n_nodes();
        if values.len() != n * n {
            return Err(Error::Kernel(format!(
                "expected a {n}x{n} matrix ({} entries), got {}",
                n * n,
                values.len()
            )));
        }
        for (idx, &v) in values.iter().enumerate() {
            check_kernel_value(v, format_args!("({}, {})", idx / n, idx % n))?;
        }
        let w = domain.cell_volume();
        Ok(Self {
            kind: KernelKind::Dense {
                n,
                weighted: values.into_iter().map(|v| v * w).collect(),
            },
            label: "dense".into(),
        })
    }

    /// Convolution kernel `h(xi - y) = amp * exp(-|xi - y|^2 / (2 sigma^2))`,
    /// clamped to `[0, 1]`.
    pub fn gauss_conv(domain: &Domain, sigma: f64, amp: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && amp.is_finite()) {
            return Err(Error::Kernel(format!(
                "gauss_conv needs sigma > 0 and finite amplitude, got sigma={sigma}, amp={amp}"
            )));
        }
        let n = domain.n_nodes();
        let coords: Vec<Vec<f64>> = (0..n).map(|i| domain.node_coords(i)).collect();
        let mut values = Vec::with_capacity(n * n);
        for xi in &coords {
            for y in &coords {
                let r2: f64 = xi.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                values.push((amp * (-r2 / (2.0 * sigma * sigma)).exp()).clamp(0.0, 1.0));
            }
        }
        let mut k = Self::dense(domain, values)?;
        k.label = format!("gauss_conv:{sigma},{amp}");
        Ok(k)
    }

    /// Reads a whitespace-separated row-major matrix, one row per line.
    pub fn from_file(domain: &Domain, path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Kernel(format!("cannot read {}: {e}", path.display())))?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for tok in line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
            {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Kernel(format!("{}:{}: cannot parse '{tok}'", path.display(), lineno + 1)))?;
                values.push(v);
            }
        }
        let mut k = Self::dense(domain, values)?;
        k.label = format!("matrix_file:{}", path.display());
        Ok(k)
    }

    /// Resolves `zero`, `constant:<c>`, `gauss_conv:<sigma,amp>` or
    /// `matrix_file:<path>`.
    pub fn parse(spec: &str, domain: &Domain) -> Result<Self> {
        let spec = spec.trim();
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Kernel(format!("cannot parse number '{s}' in kernel '{spec}'")))
        };
        match spec.split_once(':') {
            None if spec == "zero" => Ok(Self::zero()),
            Some(("constant", c)) => Self::constant(num(c)?),
            Some(("gauss_conv", args)) => {
                let (s, a) = args
                    .split_once(',')
                    .ok_or_else(|| Error::Kernel(format!("gauss_conv expects <sigma,amp>, got '{args}'")))?;
                Self::gauss_conv(domain, num(s)?, num(a)?)
            }
            Some(("matrix_file", path)) => Self::from_file(domain, Path::new(path.trim())),
            _ => Err(Error::Kernel(format!("unknown kernel '{spec}'"))),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Midpoint quadrature of `int_D k(xi_i, y) eta(y) dy` at every node.
    pub fn apply(&self, eta: &GridFunction) -> Vec<f64> {
        match &self.kind {
            KernelKind::Zero => vec![0.0; eta.len()],
            KernelKind::Constant(c) => vec![c * eta.integral(); eta.len()],
            KernelKind::Dense { n, weighted } => {
                assert_eq!(*n, eta.len(), "kernel and grid function sizes differ");
                weighted
                    .chunks_exact(*n)
                    .map(|row| row.iter().zip(eta.values()).map(|(k, v)| k * v).sum())
                    .collect()
            }
        }
    }
}

type ReactionFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Reaction term `g(t, u)` with declared constants `(L, beta)` for
/// `|g(t, x) - g(t, y)| <= L max{|x - y|^beta, |x - y|}`.
#[derive(Clone)]
pub struct Reaction {
    name: String,
    eval: Arc<ReactionFn>,
    declared_l: f64,
    declared_beta: f64,
}

impl fmt::Debug for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Reaction")
            .field("name", &self.name)
            .field("declared_l", &self.declared_l)
            .field("declared_beta", &self.declared_beta)
            .finish()
    }
}

/// Outcome of the sampled Hölder-Lipschitz check of a [`Reaction`].
#[derive(Debug, Clone, PartialEq)]
pub struct HolderCheck {
    pub pass: bool,
    pub pairs: usize,
    /// Largest `|g(t,x) - g(t,y)| / (L max{d^beta, d})` seen.
    pub worst_ratio: f64,
}

impl Reaction {
    /// `declared_l` may be zero only for reactions independent of `u`.
    pub fn new(
        name: impl Into<String>,
        declared_l: f64,
        declared_beta: f64,
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let name = name.into();
        if !(declared_l >= 0.0 && declared_l.is_finite()) {
            return Err(Error::Reaction(format!(
                "{name}: L must be non-negative, got {declared_l}"
            )));
        }
        if !(declared_beta > 0.0 && declared_beta < 1.0) {
            return Err(Error::Reaction(format!(
                "{name}: beta must lie in (0, 1), got {declared_beta}"
            )));
        }
        Ok(Self {
            name,
            eval: Arc::new(eval),
            declared_l,
            declared_beta,
        })
    }

    pub fn zero() -> Self {
        Self::new("zero", 0.0, 0.5, |_, _| 0.0).unwrap()
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(format!("constant:{c}"), 0.0, 0.5, move |_, _| c)
    }

    /// `g = L sin(u)`.
    pub fn scaled_sin(l: f64) -> Result<Self> {
        Self::new(format!("scaled_sin:{l}"), l.abs(), 0.5, move |_, u| l * u.sin())
    }

    /// `g = L sign(u) sqrt(min(|u|, 1) / 2)`: Hölder with exponent 1/2 near
    /// zero and bounded, satisfying the growth condition with the same `L`.
    pub fn sqrt_cap(l: f64) -> Result<Self> {
        Self::new(format!("sqrt_cap:{l}"), l.abs(), 0.5, move |_, u| {
            l * u.signum() * (0.5 * u.abs().min(1.0)).sqrt()
        })
    }

    /// `g = c cos(t)`.
    pub fn time_cos(c: f64) -> Result<Self> {
        Self::new(format!("time_cos:{c}"), 0.0, 0.5, move |t, _| c * t.cos())
    }

    /// Pointwise sum; constants add and the smaller exponent is kept.
    pub fn sum(self, other: Reaction) -> Result<Self> {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        Self::new(
            format!("{}+{}", self.name, other.name),
            self.declared_l + other.declared_l,
            self.declared_beta.min(other.declared_beta),
            move |t, u| f(t, u) + g(t, u),
        )
    }

    /// Resolves registry names, optionally joined by `+`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut terms = spec.split('+').map(|term| {
            let term = term.trim();
            let arg = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Reaction(format!("cannot parse number '{s}' in '{term}'")))
            };
            match term.split_once(':') {
                None if term == "zero" => Ok(Self::zero()),
                Some(("constant", c)) => Self::constant(arg(c)?),
                Some(("scaled_sin", l)) => Self::scaled_sin(arg(l)?),
                Some(("sqrt_cap", l)) => Self::sqrt_cap(arg(l)?),
                Some(("time_cos", c)) => Self::time_cos(arg(c)?),
                _ => Err(Error::Reaction(format!("unknown reaction '{term}'"))),
            }
        });
        let first = terms.next().unwrap()?;
        terms.try_fold(first, |acc, t| acc.sum(t?))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn declared_l(&self) -> f64 {
        self.declared_l
    }

    pub fn declared_beta(&self) -> f64 {
        self.declared_beta
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        (self.eval)(t, u)
    }

    /// Checks the declared `(L, beta)` on `pairs` random pairs with
    /// `t in [t_start, t_end]`, states in `[-10, 10]` and separations spread
    /// log-uniformly over `[1e-6, 10]` so both branches of the max are hit.
    pub fn validate(&self, t_start: f64, t_end: f64, pairs: usize, seed: u64) -> HolderCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0_f64;
        let mut pass = true;
        for _ in 0..pairs {
            let t = if t_end > t_start {
                rng.random_range(t_start..=t_end)
            } else {
                t_start
            };
            let x: f64 = rng.random_range(-10.0..10.0);
            let sep = 10f64.powf(rng.random_range(-6.0..1.0));
            let y = if rng.random_bool(0.5) { x + sep } else { x - sep };
            let d = (x - y).abs();
            let diff = (self.eval(t, x) - self.eval(t, y)).abs();
            let bound = self.declared_l * d.powf(self.declared_beta).max(d);
            if diff > bound * (1.0 + 1e-6) + 1e-14 {
                pass = false;
            }
            if bound > 0.0 {
                worst = worst.max(diff / bound);
            } else if diff > 0.0 {
                worst = f64::INFINITY;
            }
        }
        HolderCheck {
            pass,
            pairs,
            worst_ratio: worst,
        }
    }
}

/// The full right-hand side `f`.
#[derive(Debug, Clone)]
pub struct RhsModel {
    kernel: Kernel,
    b: f64,
    reaction: Reaction,
    domain: Arc<Domain>,
}

/// Pointwise check of `|f(t,eta)(xi)| <= |D|^(1-1/p) ||eta|| + (b+L)|eta(xi)| + L + mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    /// `|f(t, eta)|` at the node with the largest margin.
    pub lhs: f64,
    /// The bound at that node.
    pub rhs: f64,
    /// `max_i (lhs_i - rhs_i)`.
    pub worst_margin: f64,
    pub pass: bool,
}

impl RhsModel {
    /// The decay constant must be non-negative; the solvability theory needs
    /// `b > 0`, which scenario loading enforces.
    pub fn new(kernel: Kernel, b: f64, reaction: Reaction, domain: Arc<Domain>) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "decay constant b must be >= 0, got {b}"
            )));
        }
        if let KernelKind::Dense { n, .. } = &kernel.kind {
            if *n != domain.n_nodes() {
                return Err(Error::Kernel(format!(
                    "kernel has {n} rows but the grid has {} nodes",
                    domain.n_nodes()
                )));
            }
        }
        Ok(Self {
            kernel,
            b,
            reaction,
            domain,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn eval_f(&self, t: f64, eta: &GridFunction) -> Result<GridFunction> {
        let mut out = self.kernel.apply(eta);
        for (i, (o, &u)) in out.iter_mut().zip(eta.values()).enumerate() {
            let g = self.reaction.eval(t, u);
            if !g.is_finite() {
                return Err(Error::Reaction(format!(
                    "{} returned {g} at t = {t}, u = {u} (node {i})",
                    self.reaction.name
                )));
            }
            *o += g - self.b * u;
        }
        Ok(GridFunction::from_parts(eta.domain().clone(), out, eta.p()))
    }

    /// `max |g(t, 0)|` over `n_samples` uniform times including both ends.
    pub fn mu(&self, t_start: f64, t_end: f64, n_samples: usize) -> Result<f64> {
        if n_samples < 2 {
            return Err(Error::InvalidParameter("mu needs at least 2 time samples".into()));
        }
        let span = t_end - t_start;
        Ok((0..n_samples)
            .map(|k| {
                let t = t_start + span * k as f64 / (n_samples - 1) as f64;
                self.reaction.eval(t, 0.0).abs()
            })
            .fold(0.0, f64::max))
    }

    pub fn growth_bound_check(&self, eta: &GridFunction, t: f64, mu: f64) -> Result<GrowthReport> {
        let f = self.eval_f(t, eta)?;
        let measure = self.domain.measure();
        let l = self.reaction.declared_l;
        let common = measure.powf(1.0 - 1.0 / eta.p()) * eta.lp_norm() + l + mu;
        let mut report = GrowthReport {
            lhs: 0.0,
            rhs: 0.0,
            worst_margin: f64::NEG_INFINITY,
            pass: true,
        };
        for (&fi, &ui) in f.values().iter().zip(eta.values()) {
            let lhs = fi.abs();
            let rhs = common + (self.b + l) * ui.abs();
            if lhs > rhs * (1.0 + 1e-8) {
                report.pass = false;
            }
            if lhs - rhs > report.worst_margin {
                report.worst_margin = lhs - rhs;
                report.lhs = lhs;
                report.rhs = rhs;
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Arc<Domain> {
        Arc::new(Domain::interval(0.0, 1.0, n).unwrap())
    }

    fn model(kernel: Kernel, b: f64, reaction: Reaction, d: &Arc<Domain>) -> RhsModel {
        RhsModel::new(kernel, b, reaction, d.clone()).unwrap()
    }

    #[test]
    fn pure_decay() {
        let d = unit(8);
        let m = model(Kernel::zero(), 1.0, Reaction::zero(), &d);
        let f = m.eval_f(0.0, &GridFunction::constant(d, 2.0, 1.0).unwrap()).unwrap();
        assert!(f.values().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn constant_kernel_integrates_measure() {
        // nodal quadrature of 1 over (0,1) is (n-1)/n
        for n in [16usize, 256] {
            let d = unit(n);
            let m = model(Kernel::constant(1.0).unwrap(), 0.0, Reaction::zero(), &d);
            let f = m.eval_f(0.0, &GridFunction::constant(d, 2.0, 1.0).unwrap()).unwrap();
            for v in f.values() {
                assert_relative_eq!(*v, 1.0, epsilon = 1.0 / n as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn mixed_terms_evaluate() {
        let d = unit(1000);
        let m = model(
            Kernel::constant(0.5).unwrap(),
            2.0,
            Reaction::parse("scaled_sin:1").unwrap(),
            &d,
        );
        let f = m.eval_f(0.0, &GridFunction::constant(d, 2.0, 1.0).unwrap()).unwrap();
        for v in f.values() {
            assert_relative_eq!(*v, 0.5 - 2.0 + 1f64.sin(), epsilon = 1e-3);
        }
        assert_relative_eq!(0.5 - 2.0 + 1f64.sin(), -0.65853, epsilon = 1e-5);
    }

    #[test]
    fn mu_examples() {
        let d = unit(4);
        let mu = |r: Reaction, t1: f64| model(Kernel::zero(), 1.0, r, &d).mu(0.0, t1, 1001).unwrap();
        assert_eq!(mu(Reaction::scaled_sin(0.7).unwrap(), 1.0), 0.0);
        assert_eq!(mu(Reaction::time_cos(1.0).unwrap(), PI), 1.0);
        assert_eq!(mu(Reaction::constant(2.0).unwrap(), 3.0), 2.0);
        assert!(model(Kernel::zero(), 1.0, Reaction::zero(), &d)
            .mu(0.0, 1.0, 1)
            .is_err());
    }

    #[test]
    fn kernel_bounds_are_enforced() {
        let d = unit(4);
        assert!(Kernel::constant(1.5).is_err());
        assert!(Kernel::constant(-0.1).is_err());
        assert!(Kernel::dense(&d, vec![0.5; 8]).is_err());
        let mut vals = vec![0.5; 9];
        vals[4] = 1.01;
        assert!(matches!(Kernel::dense(&d, vals), Err(Error::Kernel(_))));
        // clamped amplitude stays admissible
        let k = Kernel::gauss_conv(&d, 0.2, 3.0).unwrap();
        assert_eq!(k.label(), "gauss_conv:0.2,3");
    }

    #[test]
    fn kernel_from_file() {
        let d = unit(3);
        let dir = std::env::temp_dir().join(format!("kernel-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("k.txt");
        std::fs::write(&path, "# 2x2\n0.5 0.25\n0.25 1\n").unwrap();
        let k = Kernel::parse(&format!("matrix_file:{}", path.display()), &d).unwrap();
        let eta = GridFunction::new(d.clone(), vec![1.0, 2.0], 2.0).unwrap();
        let h = 1.0 / 3.0;
        let out = k.apply(&eta);
        assert_relative_eq!(out[0], (0.5 + 0.5) * h, epsilon = 1e-15);
        assert_relative_eq!(out[1], (0.25 + 2.0) * h, epsilon = 1e-15);
        std::fs::write(&path, "0.5 0.25\n0.25 x\n").unwrap();
        assert!(Kernel::from_file(&d, &path).is_err());
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn registry_reactions_pass_their_declared_constants() {
        for name in [
            "zero",
            "constant:2",
            "scaled_sin:0.3",
            "sqrt_cap:0.5",
            "time_cos:1",
            "scaled_sin:0.3+constant:0.5",
            "sqrt_cap:0.3+time_cos:0.5",
        ] {
            let r = Reaction::parse(name).unwrap();
            let check = r.validate(0.0, 2.0, 10_000, 5);
            assert!(check.pass, "{name}: worst ratio {}", check.worst_ratio);
        }
        assert_eq!(Reaction::parse("scaled_sin:0.3").unwrap().declared_l(), 0.3);
    }

    #[test]
    fn understated_constant_fails_validation() {
        let r = Reaction::new("liar", 0.5, 0.5, |_, u| u.sin()).unwrap();
        assert!(!r.validate(0.0, 1.0, 10_000, 1).pass);
        let r = Reaction::new("hidden", 0.0, 0.5, |_, u| 1e-3 * u).unwrap();
        assert!(!r.validate(0.0, 1.0, 1000, 1).pass);
    }

    #[test]
    fn non_finite_reaction_is_an_error() {
        let d = unit(4);
        let r = Reaction::new("bad", 1.0, 0.5, |_, u| 1.0 / (u - u)).unwrap();
        let m = model(Kernel::zero(), 1.0, r, &d);
        let eta = GridFunction::constant(d, 2.0, 1.0).unwrap();
        assert!(matches!(m.eval_f(0.0, &eta), Err(Error::Reaction(_))));
    }

    #[test]
    fn growth_bound_examples() {
        let d = unit(32);
        let m = model(
            Kernel::constant(0.5).unwrap(),
            2.0,
            Reaction::parse("time_cos:1.5").unwrap(),
            &d,
        );
        let zero = GridFunction::zeros(d.clone(), 2.0).unwrap();
        let rep = m.growth_bound_check(&zero, 0.0, 1.5).unwrap();
        assert!(rep.pass);
        assert_relative_eq!(rep.lhs, 1.5);

        let m = model(Kernel::constant(1.0).unwrap(), 1.0, Reaction::zero(), &d);
        let one = GridFunction::constant(d.clone(), 2.0, 1.0).unwrap();
        let rep = m.growth_bound_check(&one, 0.0, 0.0).unwrap();
        assert!(rep.pass);
        assert!(rep.lhs < 0.05);
    }

    #[test]
    fn unknown_names_are_rejected() {
        let d = unit(4);
        assert!(Reaction::parse("cubic:1").is_err());
        assert!(Reaction::parse("scaled_sin:x").is_err());
        assert!(Kernel::parse("gauss_conv:0.1", &d).is_err());
        assert!(Kernel::parse("mystery", &d).is_err());
    }
}
