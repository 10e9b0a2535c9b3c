//! Uniform tensor-product grids on intervals and rectangles, nodal grid
//! functions with discrete `L^p` norms, and uniformly sampled trajectories.
//!
//! Nodes sit at `low + i * h` for `i = 0..=n_cells` on every axis. Only
//! interior nodes are stored; boundary values are implicitly zero. Every
//! interior node carries the weight of one cell, `prod(h_k)`, so the
//! quadrature of `|v|^p` is `sum_i |v_i|^p * cell_volume`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Rectangle,
}

/// A bounded box `D` with a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
    n_cells: Vec<usize>,
}

impl Domain {
    pub fn interval(low: f64, high: f64, n_cells: usize) -> Result<Self> {
        Self::new(vec![(low, high)], vec![n_cells])
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), n_cells: (usize, usize)) -> Result<Self> {
        Self::new(vec![x, y], vec![n_cells.0, n_cells.1])
    }

    pub fn new(bounds: Vec<(f64, f64)>, n_cells: Vec<usize>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 {
            return Err(Error::InvalidDomain(format!(
                "expected 1 or 2 axes, got {}",
                bounds.len()
            )));
        }
        if bounds.len() != n_cells.len() {
            return Err(Error::InvalidDomain(
                "bounds and cell counts have different lengths".into(),
            ));
        }
        for (axis, (&(lo, hi), &n)) in bounds.iter().zip(&n_cells).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: need low < high, got ({lo}, {hi})"
                )));
            }
            if n < 2 {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: need at least 2 cells, got {n}"
                )));
            }
        }
        Ok(Self { bounds, n_cells })
    }

    pub fn kind(&self) -> DomainKind {
        if self.bounds.len() == 1 {
            DomainKind::Interval
        } else {
            DomainKind::Rectangle
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn n_cells(&self) -> &[usize] {
        &self.n_cells
    }

    /// Lebesgue measure `|D|`.
    pub fn measure(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / self.n_cells[axis] as f64
    }

    /// Quadrature weight of a single node.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Interior nodes along `axis`.
    pub fn interior_count(&self, axis: usize) -> usize {
        self.n_cells[axis] - 1
    }

    pub fn n_nodes(&self) -> usize {
        (0..self.dim()).map(|a| self.interior_count(a)).product()
    }

    /// Sum of all node weights; strictly less than `|D|`.
    pub fn total_weight(&self) -> f64 {
        self.n_nodes() as f64 * self.cell_volume()
    }

    /// Flat index of the interior node with grid indices `idx` (each in
    /// `1..n_cells`). The first axis varies fastest.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for axis in (0..self.dim()).rev() {
            flat = flat * self.interior_count(axis) + (idx[axis] - 1);
        }
        flat
    }

    /// Grid indices (each in `1..n_cells`) of a flat interior index.
    pub fn grid_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let n = self.interior_count(axis);
            idx.push(flat % n + 1);
            flat /= n;
        }
        idx
    }

    /// Coordinate of grid index `i` on `axis` (`i` may be fractional for
    /// face and cell midpoints).
    pub fn coord(&self, axis: usize, i: f64) -> f64 {
        self.bounds[axis].0 + i * self.spacing(axis)
    }

    pub fn node_coords(&self, flat: usize) -> Vec<f64> {
        self.grid_index(flat)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coord(axis, i as f64))
            .collect()
    }
}

/// Discrete `L^p` norm of nodal values on `domain`; rejects non-finite input.
pub fn lp_norm(domain: &Domain, values: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value at node {i}")));
    }
    Ok(weighted_lp(values, domain.cell_volume(), p))
}

fn weighted_lp(values: &[f64], weight: f64, p: f64) -> f64 {
    let sum: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
    (sum * weight).powf(1.0 / p)
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "exponent p must lie in (1, inf), got {p}"
        )))
    }
}

/// Nodal values of a function on the interior nodes of a [`Domain`], with
/// an attached Lebesgue exponent `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: Arc<Domain>,
    values: Vec<f64>,
    p: f64,
}

impl GridFunction {
    pub fn new(domain: Arc<Domain>, values: Vec<f64>, p: f64) -> Result<Self> {
        check_exponent(p)?;
        if values.len() != domain.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "expected {} nodal values, got {}",
                domain.n_nodes(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at node {i}")));
        }
        Ok(Self { domain, values, p })
    }

    pub fn zeros(domain: Arc<Domain>, p: f64) -> Result<Self> {
        let n = domain.n_nodes();
        Self::new(domain, vec![0.0; n], p)
    }

    pub fn constant(domain: Arc<Domain>, p: f64, c: f64) -> Result<Self> {
        let n = domain.n_nodes();
        Self::new(domain, vec![c; n], p)
    }

    /// Samples `f` at every interior node.
    pub fn from_fn(domain: Arc<Domain>, p: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..domain.n_nodes()).map(|i| f(&domain.node_coords(i))).collect();
        Self::new(domain, values, p)
    }

    /// Independent standard normal nodal values.
    pub fn random_normal<R: Rng + ?Sized>(domain: Arc<Domain>, p: f64, rng: &mut R) -> Result<Self> {
        let values = (0..domain.n_nodes())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::new(domain, values, p)
    }

    /// Values not checked for finiteness; callers validate before exposing.
    pub(crate) fn from_parts(domain: Arc<Domain>, values: Vec<f64>, p: f64) -> Self {
        debug_assert_eq!(values.len(), domain.n_nodes());
        Self { domain, values, p }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Discrete `L^p(D)` norm with the function's own exponent.
    pub fn lp_norm(&self) -> f64 {
        weighted_lp(&self.values, self.domain.cell_volume(), self.p)
    }

    /// `L^p` norm of the pointwise power `|v|^beta`, used to check the
    /// embedding bound `|| |v|^beta || <= |D|^((1-beta)/p) ||v||^beta`.
    pub fn holder_power_norm(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
        }
        let powered: Vec<f64> = self.values.iter().map(|v| v.abs().powf(beta)).collect();
        Ok(weighted_lp(&powered, self.domain.cell_volume(), self.p))
    }

    /// Right-hand side of the Hölder embedding bound.
    pub fn holder_power_bound(&self, beta: f64) -> f64 {
        self.domain.measure().powf((1.0 - beta) / self.p) * self.lp_norm().powf(beta)
    }

    /// Quadrature of `v` over `D`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.cell_volume()
    }

    pub fn same_space(&self, other: &GridFunction) -> bool {
        self.p == other.p && (Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        Self::from_parts(self.domain.clone(), self.values.iter().map(|&v| f(v)).collect(), self.p)
    }

    pub fn scaled(&self, alpha: f64) -> GridFunction {
        self.map(|v| alpha * v)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &GridFunction) -> GridFunction {
        assert!(self.same_space(other), "grid functions live on different spaces");
        Self::from_parts(
            self.domain.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
            self.p,
        )
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.axpy(1.0, other)
    }

    /// `lp_norm(self - other)`.
    pub fn distance(&self, other: &GridFunction) -> f64 {
        self.sub(other).lp_norm()
    }

    /// Rescales to the given norm. Fails on the zero function.
    pub fn rescaled_to(&self, radius: f64) -> Result<GridFunction> {
        let n = self.lp_norm();
        if n == 0.0 {
            return Err(Error::InvalidInput("cannot rescale the zero function".into()));
        }
        Ok(self.scaled(radius / n))
    }
}

/// States of a function `x: [t_start, t_end] -> L^p(D)` on a uniform time
/// grid; `states[k]` is the value at `t_start + k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t_start: f64,
    dt: f64,
    states: Vec<GridFunction>,
}

impl Trajectory {
    pub fn new(t_start: f64, dt: f64, states: Vec<GridFunction>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if states.len() < 2 {
            return Err(Error::InvalidInput("a trajectory needs at least two states".into()));
        }
        let first = &states[0];
        if states.iter().any(|s| !s.same_space(first)) {
            return Err(Error::InvalidInput(
                "trajectory states must share one domain and one exponent".into(),
            ));
        }
        Ok(Self { t_start, dt, states })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps() as f64 * self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn states(&self) -> &[GridFunction] {
        &self.states
    }

    pub fn initial(&self) -> &GridFunction {
        &self.states[0]
    }

    pub fn last(&self) -> &GridFunction {
        self.states.last().unwrap()
    }

    pub fn domain(&self) -> &Arc<Domain> {
        self.states[0].domain()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(GridFunction::lp_norm).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.norms().into_iter().fold(0.0, f64::max)
    }

    /// Index of the grid time nearest to `t`; ties go to the later time.
    /// Returns the index and the snap distance `|t - time(k)|`.
    pub fn snap(&self, t: f64) -> (usize, f64) {
        snap_time(self.t_start, self.dt, self.n_steps(), t)
    }

    /// Pointwise combination `alpha * self + other`.
    pub fn axpy(&self, alpha: f64, other: &Trajectory) -> Trajectory {
        assert_eq!(self.states.len(), other.states.len());
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| b.axpy(alpha, a))
            .collect();
        Trajectory {
            t_start: self.t_start,
            dt: self.dt,
            states,
        }
    }
}

/// Nearest grid index to `t` on `t_start + k * dt`, `k in 0..=n_steps`,
/// ties toward the later time.
pub fn snap_time(t_start: f64, dt: f64, n_steps: usize, t: f64) -> (usize, f64) {
    let x = (t - t_start) / dt;
    let lower = x.floor();
    let frac = x - lower;
    // ties (within round-off) go to the later node
    let k = if frac >= 0.5 - 1e-12 { lower + 1.0 } else { lower };
    let k = (k.max(0.0) as usize).min(n_steps);
    (k, (t - (t_start + k as f64 * dt)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize) -> Arc<Domain> {
        Arc::new(Domain::interval(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn measure_is_product_of_sides() {
        assert_eq!(Domain::interval(0.0, 1.0, 7).unwrap().measure(), 1.0);
        assert_eq!(
            Domain::rectangle((0.0, 1.0), (0.0, 2.0), (4, 4)).unwrap().measure(),
            2.0
        );
        assert_eq!(Domain::interval(0.25, 0.75, 3).unwrap().measure(), 0.5);
    }

    #[test]
    fn invalid_domains_are_rejected() {
        assert!(Domain::interval(1.0, 1.0, 4).is_err());
        assert!(Domain::interval(0.0, 1.0, 1).is_err());
        assert!(Domain::interval(0.0, f64::NAN, 4).is_err());
        assert!(Domain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn flat_index_round_trips() {
        let d = Domain::rectangle((0.0, 1.0), (0.0, 1.0), (4, 5)).unwrap();
        assert_eq!(d.n_nodes(), 12);
        for flat in 0..d.n_nodes() {
            assert_eq!(d.flat_index(&d.grid_index(flat)), flat);
        }
        assert_eq!(d.grid_index(0), vec![1, 1]);
        assert_eq!(d.grid_index(3), vec![1, 2]);
    }

    #[test]
    fn lp_norm_of_zero_and_constants() {
        let d = unit(10);
        assert_eq!(GridFunction::zeros(d.clone(), 2.0).unwrap().lp_norm(), 0.0);
        for n in [8, 64, 512] {
            let one = GridFunction::constant(unit(n), 2.0, 1.0).unwrap();
            let err = (one.lp_norm() - 1.0).abs();
            assert!(err <= 1.0 / n as f64, "n = {n}: err {err}");
        }
    }

    #[test]
    fn lp_norm_converges_for_linear_function() {
        let exact = (1.0f64 / 3.0).sqrt();
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64, 128, 256] {
            let v = GridFunction::from_fn(unit(n), 2.0, |x| x[0]).unwrap();
            let err = (v.lp_norm() - exact).abs();
            assert!(err < prev);
            assert!(err <= 1.0 / n as f64);
            prev = err;
        }
    }

    #[test]
    fn lp_norm_rejects_non_finite() {
        let d = Domain::interval(0.0, 1.0, 3).unwrap();
        assert!(matches!(
            lp_norm(&d, &[1.0, f64::NAN], 2.0),
            Err(Error::InvalidInput(_))
        ));
        assert!(GridFunction::new(Arc::new(d), vec![f64::INFINITY, 0.0], 2.0).is_err());
    }

    #[test]
    fn holder_power_norm_examples() {
        let zero = GridFunction::zeros(unit(32), 2.0).unwrap();
        assert_eq!(zero.holder_power_norm(0.5).unwrap(), 0.0);

        let one = GridFunction::constant(unit(1024), 2.0, 1.0).unwrap();
        assert_relative_eq!(one.holder_power_norm(0.5).unwrap(), 1.0, epsilon = 1e-3);

        let lin = GridFunction::from_fn(unit(1024), 2.0, |x| x[0]).unwrap();
        let lhs = lin.holder_power_norm(0.5).unwrap();
        assert_relative_eq!(lhs, 0.5f64.sqrt(), epsilon = 1e-3);
        assert_relative_eq!(
            lin.holder_power_bound(0.5),
            (1.0f64 / 3.0).sqrt().sqrt(),
            epsilon = 1e-3
        );
        assert!(lhs <= lin.holder_power_bound(0.5));
    }

    #[test]
    fn holder_power_norm_rejects_bad_beta() {
        let v = GridFunction::constant(unit(4), 2.0, 1.0).unwrap();
        for beta in [0.0, 1.0, -0.3, 1.5] {
            assert!(matches!(v.holder_power_norm(beta), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn snapping_prefers_later_time_on_ties() {
        assert_eq!(snap_time(0.0, 0.1, 10, 0.25).0, 3);
        assert_eq!(snap_time(0.0, 0.1, 10, 0.24).0, 2);
        assert_eq!(snap_time(0.0, 0.1, 10, 5.0).0, 10);
        let (k, d) = snap_time(0.0, 0.1, 10, 0.5);
        assert_eq!(k, 5);
        assert!(d < 1e-12);
    }

    #[test]
    fn trajectory_rejects_mixed_spaces() {
        let a = GridFunction::zeros(unit(4), 2.0).unwrap();
        let b = GridFunction::zeros(unit(4), 3.0).unwrap();
        assert!(Trajectory::new(0.0, 0.1, vec![a.clone(), b]).is_err());
        let t = Trajectory::new(0.0, 0.5, vec![a.clone(), a.clone(), a]).unwrap();
        assert_eq!(t.n_steps(), 2);
        assert_eq!(t.t_end(), 1.0);
    }

    #[test]
    fn random_functions_are_deterministic_per_seed() {
        let d = unit(16);
        let a = GridFunction::random_normal(d.clone(), 2.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = GridFunction::random_normal(d, 2.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }
}
