//! Bounding functions for the ball `K = rB`, the `L^p` duality pairing and
//! the dissipativity radius threshold.
//!
//! For `V_r(x) = (||x||^2 - r^2) / 2` the transversality condition reduces to
//! `<J(x), f(t, x)> < 0` on the sphere `||x|| = r`, where `J` is the duality
//! map of `L^p`. Under `b > L + |D|` the pairing is bounded above by
//! `(-b + |D| + L) r^2 + (L + mu) |D|^(1/p) r`, which is negative once `r`
//! exceeds [`min_radius`].

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::rhs::RhsModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundingKind {
    /// `V_r(x) = (||x||^2 - r^2) / 2`.
    VrBall,
    /// `d(x, rB) = max(||x|| - r, 0)`.
    DistanceBall,
}

impl BoundingKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "vr_ball" => Ok(Self::VrBall),
            "distance_ball" => Ok(Self::DistanceBall),
            other => Err(Error::InvalidParameter(format!("unknown bounding function '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::VrBall => "vr_ball",
            Self::DistanceBall => "distance_ball",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingSpec {
    pub kind: BoundingKind,
    pub r: f64,
    pub p: f64,
}

impl BoundingSpec {
    pub fn new(kind: BoundingKind, r: f64, p: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
        }
        crate::grid::check_exponent(p)?;
        Ok(Self { kind, r, p })
    }

    pub fn v_value(&self, x: &GridFunction) -> f64 {
        let n = x.lp_norm();
        match self.kind {
            BoundingKind::VrBall => 0.5 * (n * n - self.r * self.r),
            BoundingKind::DistanceBall => (n - self.r).max(0.0),
        }
    }
}

/// `<J(x), w> = ||x||^(2-p) int_D |x|^(p-2) x w`, the pairing of `w` with the
/// duality map of `L^p` at `x`.
pub fn duality_pairing(x: &GridFunction, w: &GridFunction, p: f64) -> Result<f64> {
    crate::grid::check_exponent(p)?;
    assert_eq!(x.len(), w.len(), "grid functions differ in size");
    let weight = x.domain().cell_volume();
    let sum_p: f64 = x.values().iter().map(|v| v.abs().powf(p)).sum();
    let norm = (sum_p * weight).powf(1.0 / p);
    if norm == 0.0 {
        return Err(Error::SingularDuality);
    }
    let integral: f64 = x
        .values()
        .iter()
        .zip(w.values())
        .map(|(&xi, &wi)| xi.signum() * xi.abs().powf(p - 1.0) * wi)
        .sum::<f64>()
        * weight;
    Ok(integral * norm.powf(2.0 - p))
}

/// Which radius threshold to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusVariant {
    /// `(L + mu) |D| / (b - |D| - L)`.
    Statement,
    /// `(L + mu) |D|^(1/p) / (b - |D| - L)`, as produced by the estimate chain.
    Proof,
}

/// Threshold radius above which the ball `rB` is transversal for `f`.
/// Requires `b > L + |D|`.
pub fn min_radius(l: f64, mu: f64, measure: f64, b: f64, p: f64, variant: RadiusVariant) -> Result<f64> {
    let gap = b - measure - l;
    if !(gap > 0.0) {
        return Err(Error::Dissipativity {
            b,
            lipschitz: l,
            measure,
        });
    }
    let scale = match variant {
        RadiusVariant::Statement => measure,
        RadiusVariant::Proof => measure.powf(1.0 / p),
    };
    Ok((l + mu) * scale / gap)
}

/// Closed-form upper bound `(-b + |D| + L) r^2 + (L + mu) |D|^(1/p) r` on
/// the pairing over the sphere of radius `r`.
pub fn pairing_bound(l: f64, mu: f64, measure: f64, b: f64, p: f64, r: f64) -> f64 {
    (-b + measure + l) * r * r + (l + mu) * measure.powf(1.0 / p) * r
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingSample {
    pub t: f64,
    pub sample_id: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransversalityCertificate {
    pub pass: bool,
    pub worst_value: f64,
    /// `(t, sample_id)` of the worst value.
    pub worst_point: (f64, usize),
    pub samples: Vec<PairingSample>,
}

impl TransversalityCertificate {
    /// CSV with columns `t,sample_id,pairing_value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,sample_id,pairing_value\n");
        for s in &self.samples {
            writeln!(out, "{},{},{:e}", s.t, s.sample_id, s.value).unwrap();
        }
        out
    }
}

/// Parameters of a transversality sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSampling {
    pub t_start: f64,
    pub t_end: f64,
    pub t_samples: usize,
    pub sphere_samples: usize,
    pub seed: u64,
}

impl Default for SphereSampling {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: 1.0,
            t_samples: 16,
            sphere_samples: 256,
            seed: 0,
        }
    }
}

/// Evaluates `<J(x), f(t, x)>` on random points `x` of the sphere
/// `||x|| = r` at `t_samples` uniform times in `(t_start, t_end]`. Passes
/// iff every value is negative.
///
/// The distance bounding function has the same sign of directional
/// derivative on the sphere, so both kinds share this check.
pub fn transversality_check(
    rhs: &RhsModel,
    spec: &BoundingSpec,
    sampling: &SphereSampling,
) -> Result<TransversalityCertificate> {
    if sampling.sphere_samples == 0 || sampling.t_samples == 0 {
        return Err(Error::InvalidParameter(
            "need at least one time and one sphere sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let domain = rhs.domain().clone();
    let points = (0..sampling.sphere_samples)
        .map(|_| GridFunction::random_normal(domain.clone(), spec.p, &mut rng)?.rescaled_to(spec.r))
        .collect::<Result<Vec<_>>>()?;

    let span = sampling.t_end - sampling.t_start;
    let mut samples = Vec::with_capacity(sampling.t_samples * points.len());
    let mut worst = PairingSample {
        t: sampling.t_start,
        sample_id: 0,
        value: f64::NEG_INFINITY,
    };
    for j in 1..=sampling.t_samples {
        let t = sampling.t_start + span * j as f64 / sampling.t_samples as f64;
        for (id, x) in points.iter().enumerate() {
            let value = duality_pairing(x, &rhs.eval_f(t, x)?, spec.p)?;
            let sample = PairingSample {
                t,
                sample_id: id,
                value,
            };
            if value > worst.value {
                worst = sample.clone();
            }
            samples.push(sample);
        }
    }
    Ok(TransversalityCertificate {
        pass: worst.value < 0.0,
        worst_value: worst.value,
        worst_point: (worst.t, worst.sample_id),
        samples,
    })
}
