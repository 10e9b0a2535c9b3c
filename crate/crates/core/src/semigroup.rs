//! Discrete contraction semigroup `S(t) = e^{tA}` and the IMEX propagator
//! for mild solutions of `x' = A x + f(t, x)`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Trajectory};
use crate::linalg::{BandedCholesky, CsrMatrix};
use crate::rhs::RhsModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "implicit_euler" => Ok(Self::ImplicitEuler),
            "crank_nicolson" => Ok(Self::CrankNicolson),
            other => Err(Error::InvalidParameter(format!("unknown time scheme '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ImplicitEuler => "implicit_euler",
            Self::CrankNicolson => "crank_nicolson",
        }
    }

    /// Relative growth allowed per pure-diffusion step by the contraction
    /// certificate.
    pub fn contraction_tolerance(self) -> f64 {
        match self {
            Self::ImplicitEuler => 1e-10,
            Self::CrankNicolson => 1e-6,
        }
    }
}

/// Time stepper with a cached factorization of `I - theta dt A`.
#[derive(Debug, Clone)]
pub struct Propagator {
    operator: Arc<EllipticOperator>,
    dt: f64,
    scheme: Scheme,
    implicit: BandedCholesky,
    /// `I + dt/2 A`, Crank-Nicolson only.
    explicit: Option<CsrMatrix>,
}

/// Result of sampling one pure-diffusion step for norm growth.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionCertificate {
    pub pass: bool,
    /// Largest `||S(dt) v|| / ||v||` over all samples.
    pub worst_ratio: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub exponents: Vec<f64>,
}

impl Propagator {
    pub fn new(operator: Arc<EllipticOperator>, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let (implicit, explicit) = match scheme {
            Scheme::ImplicitEuler => (operator.matrix().shifted(1.0, -dt), None),
            Scheme::CrankNicolson => (
                operator.matrix().shifted(1.0, -0.5 * dt),
                Some(operator.matrix().shifted(1.0, 0.5 * dt)),
            ),
        };
        Ok(Self {
            implicit: BandedCholesky::factor(&implicit)?,
            explicit,
            operator,
            dt,
            scheme,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn operator(&self) -> &Arc<EllipticOperator> {
        &self.operator
    }

    /// Number of steps covering a duration `t >= 0`, which must be a step
    /// multiple to within `1e-12` relative.
    pub fn steps_for(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidTime(t));
        }
        let n = (t / self.dt).round();
        if (n * self.dt - t).abs() > 1e-12 * t.max(self.dt) {
            return Err(Error::StepMismatch { t, dt: self.dt });
        }
        Ok(n as usize)
    }

    /// One step of `x' = A x + forcing`, with the forcing held explicit.
    fn step(&self, x: &[f64], forcing: Option<&[f64]>) -> Vec<f64> {
        let mut rhs = match &self.explicit {
            Some(m) => m.mul_vec(x),
            None => x.to_vec(),
        };
        if let Some(f) = forcing {
            for (r, fi) in rhs.iter_mut().zip(f) {
                *r += self.dt * fi;
            }
        }
        self.implicit.solve_in_place(&mut rhs);
        rhs
    }

    /// `S(t) v` by `t / dt` homogeneous steps.
    pub fn apply_semigroup(&self, t: f64, v: &GridFunction) -> Result<GridFunction> {
        let steps = self.steps_for(t)?;
        let mut x = v.values().to_vec();
        for _ in 0..steps {
            x = self.step(&x, None);
        }
        Ok(GridFunction::from_parts(v.domain().clone(), x, v.p()))
    }

    /// Mild solution of `x' = A x + f(t, x)` on `[t_start, t_end]` from `x0`.
    pub fn evolve(&self, rhs: &RhsModel, x0: &GridFunction, t_start: f64, t_end: f64) -> Result<Trajectory> {
        self.evolve_with(x0, t_start, t_end, |t, x| rhs.eval_f(t, x))
    }

    /// Like [`Propagator::evolve`] with the forcing scaled by `lambda`.
    pub fn evolve_scaled(
        &self,
        rhs: &RhsModel,
        lambda: f64,
        x0: &GridFunction,
        t_start: f64,
        t_end: f64,
    ) -> Result<Trajectory> {
        self.evolve_with(x0, t_start, t_end, |t, x| Ok(rhs.eval_f(t, x)?.scaled(lambda)))
    }

    /// IMEX stepping `x_{k+1} = (I - dt A)^{-1}(x_k + dt F(t_k, x_k))` (or its
    /// Crank-Nicolson analogue) for an arbitrary forcing `F`.
    pub fn evolve_with<F>(&self, x0: &GridFunction, t_start: f64, t_end: f64, mut forcing: F) -> Result<Trajectory>
    where
        F: FnMut(f64, &GridFunction) -> Result<GridFunction>,
    {
        if !(t_end > t_start) {
            return Err(Error::InvalidParameter(format!(
                "t_end ({t_end}) must exceed t_start ({t_start})"
            )));
        }
        if x0.len() != self.operator.matrix().dim() {
            return Err(Error::InvalidInput(
                "initial state is not on the propagator's grid".into(),
            ));
        }
        let steps = self.steps_for(t_end - t_start)?;
        let mut states = Vec::with_capacity(steps + 1);
        states.push(x0.clone());
        for k in 0..steps {
            let t = t_start + k as f64 * self.dt;
            let current = &states[k];
            let f = forcing(t, current)?;
            let next = self.step(current.values(), Some(f.values()));
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { step: k + 1 });
            }
            states.push(GridFunction::from_parts(current.domain().clone(), next, current.p()));
        }
        Trajectory::new(t_start, self.dt, states)
    }

    /// Samples `samples` random initial data per exponent and checks that one
    /// pure-diffusion step does not grow the `L^p` norm beyond the scheme's
    /// tolerance.
    pub fn contraction_certificate(
        &self,
        exponents: &[f64],
        samples: usize,
        seed: u64,
    ) -> Result<ContractionCertificate> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let domain = self.operator.domain().clone();
        let tolerance = self.scheme.contraction_tolerance();
        let mut worst = 0.0_f64;
        for &p in exponents {
            for _ in 0..samples {
                let v = GridFunction::random_normal(domain.clone(), p, &mut rng)?;
                let next = GridFunction::from_parts(domain.clone(), self.step(v.values(), None), p);
                worst = worst.max(next.lp_norm() / v.lp_norm());
            }
        }
        Ok(ContractionCertificate {
            pass: worst <= 1.0 + tolerance,
            worst_ratio: worst,
            tolerance,
            samples: samples * exponents.len(),
            exponents: exponents.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{assemble, CoefficientField};
    use crate::grid::Domain;
    use crate::rhs::{Kernel, Reaction};
    use std::f64::consts::PI;

    fn heat(n: usize, dt: f64, scheme: Scheme) -> Propagator {
        let d = Arc::new(Domain::interval(0.0, 1.0, n).unwrap());
        let op = assemble(&CoefficientField::identity(1), d).unwrap();
        Propagator::new(Arc::new(op), dt, scheme).unwrap()
    }

    fn sine(pr: &Propagator) -> GridFunction {
        GridFunction::from_fn(pr.operator().domain().clone(), 2.0, |x| (PI * x[0]).sin()).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let pr = heat(16, 0.01, Scheme::ImplicitEuler);
        let v = sine(&pr);
        assert_eq!(pr.apply_semigroup(0.0, &v).unwrap(), v);
    }

    #[test]
    fn eigenfunction_decays() {
        let pr = heat(64, 1e-3, Scheme::CrankNicolson);
        let v = sine(&pr);
        let out = pr.apply_semigroup(0.1, &v).unwrap();
        let exact = v.scaled((-PI * PI * 0.1).exp());
        assert!(out.distance(&exact) / exact.lp_norm() < 1e-3);
    }

    #[test]
    fn semigroup_law() {
        let pr = heat(16, 0.01, Scheme::ImplicitEuler);
        let v = sine(&pr).map(|x| x + x * x);
        let a = pr
            .apply_semigroup(0.03, &pr.apply_semigroup(0.05, &v).unwrap())
            .unwrap();
        let b = pr.apply_semigroup(0.08, &v).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_times_are_rejected() {
        let pr = heat(8, 0.01, Scheme::ImplicitEuler);
        let v = sine(&pr);
        assert!(matches!(pr.apply_semigroup(-0.1, &v), Err(Error::InvalidTime(_))));
        assert!(matches!(pr.apply_semigroup(0.015, &v), Err(Error::StepMismatch { .. })));
    }

    #[test]
    fn zero_forcing_keeps_zero() {
        let pr = heat(8, 0.1, Scheme::ImplicitEuler);
        let d = pr.operator().domain().clone();
        let rhs = RhsModel::new(Kernel::zero(), 0.0, Reaction::zero(), d.clone()).unwrap();
        let traj = pr
            .evolve(&rhs, &GridFunction::zeros(d, 2.0).unwrap(), 0.0, 1.0)
            .unwrap();
        assert_eq!(traj.states().len(), 11);
        assert!(traj.states().iter().all(|s| s.lp_norm() == 0.0));
    }

    #[test]
    fn pure_diffusion_norms_do_not_increase() {
        let pr = heat(32, 0.01, Scheme::ImplicitEuler);
        let d = pr.operator().domain().clone();
        let rhs = RhsModel::new(Kernel::zero(), 0.0, Reaction::zero(), d.clone()).unwrap();
        let x0 = GridFunction::from_fn(d, 3.0, |x| if x[0] < 0.5 { 1.0 } else { -2.0 }).unwrap();
        let norms = pr.evolve(&rhs, &x0, 0.0, 0.5).unwrap().norms();
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
    }

    #[test]
    fn blow_up_reports_step() {
        let pr = heat(8, 0.1, Scheme::ImplicitEuler);
        let d = pr.operator().domain().clone();
        let x0 = GridFunction::constant(d, 2.0, 1.0).unwrap();
        let err = pr
            .evolve_with(&x0, 0.0, 1.0, |_, x| Ok(x.map(|v| 1e300 * v * v)))
            .unwrap_err();
        assert!(matches!(err, Error::BlowUp { step: 1 | 2 }));
    }

    #[test]
    fn certificate_passes_for_heat() {
        let pr = heat(16, 0.01, Scheme::ImplicitEuler);
        let cert = pr.contraction_certificate(&[1.5, 2.0, 3.0], 20, 1).unwrap();
        assert!(cert.pass, "{cert:?}");
        assert!(cert.worst_ratio < 1.0);
    }

    #[test]
    fn scheme_names() {
        assert_eq!(Scheme::parse("crank_nicolson").unwrap(), Scheme::CrankNicolson);
        assert_eq!(Scheme::ImplicitEuler.name(), "implicit_euler");
        assert!(Scheme::parse("rk4").is_err());
    }
}
