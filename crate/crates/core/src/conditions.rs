//! Nonlocal-in-time conditions `x(a) = M(x)` and the `(m0)` ball-invariance
//! certificate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Trajectory};

/// Time weights `h` for the nonlinear integral condition. Each is normalized
/// relative to the horizon so its `L^1` mass is known in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeWeight {
    /// `h(t) = 1 / T`.
    Uniform,
    /// `h(t) = 2 (t - a) / T^2`.
    Ramp,
    /// `h(t) = 1 / (2T)`.
    Half,
}

impl TimeWeight {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "uniform" => Ok(Self::Uniform),
            "ramp" => Ok(Self::Ramp),
            "half" => Ok(Self::Half),
            other => Err(Error::ConditionConfig(format!("unknown time weight '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Ramp => "ramp",
            Self::Half => "half",
        }
    }

    pub fn eval(self, t: f64, t_start: f64, horizon: f64) -> f64 {
        match self {
            Self::Uniform => 1.0 / horizon,
            Self::Ramp => 2.0 * (t - t_start) / (horizon * horizon),
            Self::Half => 0.5 / horizon,
        }
    }

    /// `int_a^b |h(t)| dt`.
    pub fn l1_mass(self) -> f64 {
        match self {
            Self::Uniform | Self::Ramp => 1.0,
            Self::Half => 0.5,
        }
    }
}

/// Scalar map `G` applied pointwise, with a proven Lipschitz constant.
#[derive(Clone)]
pub struct ScalarMap {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lipschitz: f64,
}

impl fmt::Debug for ScalarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarMap")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl ScalarMap {
    /// `G(s) = c tanh(s)`, Lipschitz with constant `|c|`.
    pub fn tanh_scaled(c: f64) -> Self {
        Self {
            name: format!("tanh_scaled:{c}"),
            f: Arc::new(move |s: f64| c * s.tanh()),
            lipschitz: c.abs(),
        }
    }

    pub fn parse(spec: &str) -> Result<Self> {
        match spec.trim().split_once(':') {
            Some(("tanh_scaled", c)) => {
                let c: f64 = c
                    .trim()
                    .parse()
                    .map_err(|_| Error::ConditionConfig(format!("cannot parse '{c}' in '{spec}'")))?;
                Ok(Self::tanh_scaled(c))
            }
            _ => Err(Error::ConditionConfig(format!("unknown scalar map '{spec}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }
}

/// The map `M: C([a,b], L^p(D)) -> L^p(D)`.
#[derive(Debug, Clone)]
pub enum ConditionFunctional {
    /// `M(x) = (1/T) int_a^b x(t) dt`.
    MeanValue,
    /// `M(x) = sum_i alpha_i x(t_i)`, stored as `(alpha_i, t_i)`.
    Multipoint(Vec<(f64, f64)>),
    /// `M(x) = x(b)`.
    Periodic,
    /// `M(x) = -x(b)`.
    Antiperiodic,
    /// `M(x) = G(int_a^b h(t) x(t) dt)` pointwise.
    NonlinearIntegral { weight: TimeWeight, map: ScalarMap },
}

/// Outcome of the `(m0)` check `M(C([a,b], r B)) ⊆ r B`.
#[derive(Debug, Clone, PartialEq)]
pub struct M0Certificate {
    pub pass: bool,
    pub reason: String,
}

/// Where a multipoint time landed on the trajectory grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapInfo {
    pub requested: f64,
    pub index: usize,
    pub snapped: f64,
    pub distance: f64,
}

fn trapezoid_weights(traj: &Trajectory) -> Vec<f64> {
    let n = traj.n_steps();
    let dt = traj.dt();
    (0..=n).map(|k| if k == 0 || k == n { 0.5 * dt } else { dt }).collect()
}

fn weighted_sum(traj: &Trajectory, weights: impl Iterator<Item = f64>) -> GridFunction {
    let states = traj.states();
    let mut acc = vec![0.0; states[0].len()];
    for (state, w) in states.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(state.values()) {
            *a += w * v;
        }
    }
    GridFunction::from_parts(states[0].domain().clone(), acc, states[0].p())
}

impl ConditionFunctional {
    /// Parses `mean`, `multipoint:(a1@t1,a2@t2,...)`, `periodic`,
    /// `antiperiodic` or `nonlinear:tanh_scaled:<c>,weight=<name>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = |msg: &str| Error::ConditionConfig(format!("'{spec}': {msg}"));
        match spec {
            "mean" => return Ok(Self::MeanValue),
            "periodic" => return Ok(Self::Periodic),
            "antiperiodic" => return Ok(Self::Antiperiodic),
            _ => {}
        }
        if let Some(list) = spec.strip_prefix("multipoint:") {
            let inner = list
                .trim()
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| bad("expected a parenthesized list"))?;
            let points = inner
                .split(',')
                .map(|item| {
                    let (a, t) = item.split_once('@').ok_or_else(|| bad("expected alpha@time"))?;
                    let a: f64 = a.trim().parse().map_err(|_| bad("bad weight"))?;
                    let t: f64 = t.trim().parse().map_err(|_| bad("bad time"))?;
                    Ok((a, t))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::multipoint(points);
        }
        if let Some(rest) = spec.strip_prefix("nonlinear:") {
            let (map, weight) = rest
                .rsplit_once(',')
                .ok_or_else(|| bad("expected <map>,weight=<name>"))?;
            let weight = weight
                .trim()
                .strip_prefix("weight=")
                .ok_or_else(|| bad("expected weight=<name>"))?;
            return Ok(Self::NonlinearIntegral {
                weight: TimeWeight::parse(weight)?,
                map: ScalarMap::parse(map)?,
            });
        }
        Err(bad("unknown condition"))
    }

    pub fn multipoint(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::ConditionConfig(
                "multipoint condition needs at least one point".into(),
            ));
        }
        if points.iter().any(|(a, t)| !a.is_finite() || !t.is_finite()) {
            return Err(Error::ConditionConfig(
                "multipoint weights and times must be finite".into(),
            ));
        }
        Ok(Self::Multipoint(points))
    }

    pub fn name(&self) -> String {
        match self {
            Self::MeanValue => "mean".into(),
            Self::Multipoint(pts) => format!(
                "multipoint:({})",
                pts.iter()
                    .map(|(a, t)| format!("{a}@{t}"))
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            Self::Periodic => "periodic".into(),
            Self::Antiperiodic => "antiperiodic".into(),
            Self::NonlinearIntegral { weight, map } => {
                format!("nonlinear:{},weight={}", map.name(), weight.name())
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, Self::NonlinearIntegral { .. })
    }

    /// Snaps every multipoint time onto the grid `t_start + k dt`,
    /// `k = 0..=n_steps`. Times outside `(t_start, t_end]` are rejected.
    pub fn snap_report(&self, t_start: f64, dt: f64, n_steps: usize) -> Result<Vec<SnapInfo>> {
        let Self::Multipoint(points) = self else {
            return Ok(Vec::new());
        };
        let t_end = t_start + n_steps as f64 * dt;
        let slack = 1e-12 * t_end.abs().max(1.0);
        points
            .iter()
            .map(|&(_, t)| {
                if !(t > t_start && t <= t_end + slack) {
                    return Err(Error::ConditionConfig(format!(
                        "multipoint time {t} is outside ({t_start}, {t_end}]"
                    )));
                }
                let (index, distance) = crate::grid::snap_time(t_start, dt, n_steps, t);
                Ok(SnapInfo {
                    requested: t,
                    index,
                    snapped: t_start + index as f64 * dt,
                    distance,
                })
            })
            .collect()
    }

    pub fn apply_m(&self, traj: &Trajectory) -> Result<GridFunction> {
        match self {
            Self::MeanValue => {
                let inv = 1.0 / traj.horizon();
                Ok(weighted_sum(traj, trapezoid_weights(traj).into_iter().map(|w| w * inv)))
            }
            Self::Multipoint(points) => {
                let snaps = self.snap_report(traj.t_start(), traj.dt(), traj.n_steps())?;
                let mut weights = vec![0.0; traj.states().len()];
                for (&(alpha, _), snap) in points.iter().zip(&snaps) {
                    weights[snap.index] += alpha;
                }
                Ok(weighted_sum(traj, weights.into_iter()))
            }
            Self::Periodic => Ok(traj.last().clone()),
            Self::Antiperiodic => Ok(traj.last().scaled(-1.0)),
            Self::NonlinearIntegral { weight, map } => {
                let (a, horizon) = (traj.t_start(), traj.horizon());
                let weights = trapezoid_weights(traj)
                    .into_iter()
                    .enumerate()
                    .map(|(k, w)| w * weight.eval(traj.time(k), a, horizon));
                Ok(weighted_sum(traj, weights).map(|s| map.eval(s)))
            }
        }
    }

    /// `||x(a) - M(x)||_p`.
    pub fn condition_residual(&self, traj: &Trajectory) -> Result<f64> {
        Ok(traj.initial().distance(&self.apply_m(traj)?))
    }

    /// Certifies `(m0)` for radius `r` from the analytic bound on `||M x||`.
    pub fn certify_m0(&self, r: f64) -> M0Certificate {
        if !(r > 0.0 && r.is_finite()) {
            return M0Certificate {
                pass: false,
                reason: format!("radius must be positive, got {r}"),
            };
        }
        match self {
            Self::MeanValue => M0Certificate {
                pass: true,
                reason: "||Mx|| <= (1/T) int ||x(t)|| dt <= r for every r > 0".into(),
            },
            Self::Multipoint(points) => {
                let mass: f64 = points.iter().map(|(a, _)| a.abs()).sum();
                let pass = mass <= 1.0 + 1e-12;
                M0Certificate {
                    pass,
                    reason: format!(
                        "||Mx|| <= sum|alpha_i| r with sum|alpha_i| = {mass} ({} 1)",
                        if pass { "<=" } else { ">" }
                    ),
                }
            }
            Self::Periodic | Self::Antiperiodic => M0Certificate {
                pass: true,
                reason: "||Mx|| = ||x(b)|| <= r".into(),
            },
            Self::NonlinearIntegral { weight, map } => {
                let g0 = map.eval(0.0);
                let factor = map.lipschitz() * weight.l1_mass();
                let pass = g0 == 0.0 && factor <= 1.0 + 1e-12;
                M0Certificate {
                    pass,
                    reason: format!(
                        "||Mx|| <= L_G int|h| r with L_G int|h| = {factor} and G(0) = {g0}; need <= 1 and G(0) = 0"
                    ),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;
    use approx::assert_relative_eq;

    fn base() -> GridFunction {
        let d = Arc::new(Domain::interval(0.0, 1.0, 8).unwrap());
        GridFunction::from_fn(d, 2.0, |x| x[0] * (1.0 - x[0]) + 0.1).unwrap()
    }

    fn traj_of(f: impl Fn(f64) -> f64, v: &GridFunction, n: usize, horizon: f64) -> Trajectory {
        let dt = horizon / n as f64;
        Trajectory::new(0.0, dt, (0..=n).map(|k| v.scaled(f(k as f64 * dt))).collect()).unwrap()
    }

    #[test]
    fn mean_of_constant_is_exact() {
        let v = base();
        let traj = traj_of(|_| 1.0, &v, 10, 2.0);
        let m = ConditionFunctional::MeanValue.apply_m(&traj).unwrap();
        assert!(m.distance(&v) < 1e-14);
        assert!(ConditionFunctional::MeanValue.condition_residual(&traj).unwrap() < 1e-14);
    }

    #[test]
    fn multipoint_on_linear_trajectory() {
        let v = base();
        let horizon = 2.0;
        let traj = traj_of(|t| t, &v, 20, horizon);
        let c = ConditionFunctional::parse("multipoint:(0.5@1, 0.5@2)").unwrap();
        let m = c.apply_m(&traj).unwrap();
        assert!(m.distance(&v.scaled(0.75 * horizon)) < 1e-13);
    }

    #[test]
    fn antiperiodic_flips_sign() {
        let v = base();
        let traj = traj_of(|_| 1.0, &v, 4, 1.0);
        let c = ConditionFunctional::Antiperiodic;
        assert_eq!(c.apply_m(&traj).unwrap(), v.scaled(-1.0));
        assert_relative_eq!(c.condition_residual(&traj).unwrap(), 2.0 * v.lp_norm(), epsilon = 1e-14);
        assert_eq!(ConditionFunctional::Periodic.apply_m(&traj).unwrap(), v);
    }

    #[test]
    fn residual_vanishes_when_initial_state_is_m() {
        let v = base();
        let traj = traj_of(|t| 1.0 + t * t, &v, 10, 1.0);
        let c = ConditionFunctional::parse("multipoint:(0.3@0.5,-0.2@1)").unwrap();
        let m = c.apply_m(&traj).unwrap();
        let mut states = traj.states().to_vec();
        states[0] = m;
        // M does not read x(a) for this condition
        let fixed = Trajectory::new(0.0, traj.dt(), states).unwrap();
        assert!(c.condition_residual(&fixed).unwrap() < 1e-15);
    }

    #[test]
    fn multipoint_times_must_be_inside_horizon() {
        let v = base();
        let traj = traj_of(|_| 1.0, &v, 10, 1.0);
        for bad in ["multipoint:(1@0)", "multipoint:(1@1.5)", "multipoint:(1@-0.2)"] {
            let c = ConditionFunctional::parse(bad).unwrap();
            assert!(matches!(c.apply_m(&traj), Err(Error::ConditionConfig(_))), "{bad}");
        }
    }

    #[test]
    fn snap_distance_is_reported() {
        let c = ConditionFunctional::parse("multipoint:(0.5@0.33,0.5@0.25)").unwrap();
        let snaps = c.snap_report(0.0, 0.1, 10).unwrap();
        assert_eq!(snaps[0].index, 3);
        assert_relative_eq!(snaps[0].distance, 0.03, epsilon = 1e-12);
        assert_eq!(snaps[1].index, 3);
    }

    #[test]
    fn m0_certificates() {
        assert!(ConditionFunctional::MeanValue.certify_m0(0.1).pass);
        assert!(ConditionFunctional::MeanValue.certify_m0(1e6).pass);
        let bad = ConditionFunctional::parse("multipoint:(0.6@0.5,0.5@1)")
            .unwrap()
            .certify_m0(1.0);
        assert!(!bad.pass);
        assert!(bad.reason.contains("1.1"));
        assert!(
            ConditionFunctional::parse("multipoint:(1@1)")
                .unwrap()
                .certify_m0(1.0)
                .pass
        );
        assert!(ConditionFunctional::Antiperiodic.certify_m0(1.0).pass);
        let nl = ConditionFunctional::parse("nonlinear:tanh_scaled:0.8,weight=uniform").unwrap();
        assert!(nl.certify_m0(1.0).pass);
        let nl = ConditionFunctional::parse("nonlinear:tanh_scaled:1.5,weight=uniform").unwrap();
        assert!(!nl.certify_m0(1.0).pass);
        let nl = ConditionFunctional::parse("nonlinear:tanh_scaled:1.5,weight=half").unwrap();
        assert!(nl.certify_m0(1.0).pass);
        assert!(!ConditionFunctional::MeanValue.certify_m0(0.0).pass);
    }

    #[test]
    fn nonlinear_condition_applies_map_to_weighted_mean() {
        let v = base();
        let traj = traj_of(|_| 1.0, &v, 10, 2.0);
        let c = ConditionFunctional::parse("nonlinear:tanh_scaled:0.5,weight=uniform").unwrap();
        let m = c.apply_m(&traj).unwrap();
        let expected = v.map(|s| 0.5 * s.tanh());
        assert!(m.distance(&expected) < 1e-14);
    }

    #[test]
    fn names_round_trip() {
        for s in [
            "mean",
            "periodic",
            "antiperiodic",
            "multipoint:(0.5@0.5,0.5@1)",
            "nonlinear:tanh_scaled:0.8,weight=ramp",
        ] {
            assert_eq!(ConditionFunctional::parse(s).unwrap().name(), s);
        }
        assert!(ConditionFunctional::parse("multipoint:0.5@1").is_err());
        assert!(ConditionFunctional::parse("nonlinear:tanh_scaled:1").is_err());
        assert!(ConditionFunctional::parse("neumann").is_err());
    }
}
