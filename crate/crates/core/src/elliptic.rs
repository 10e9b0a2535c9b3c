//! Divergence-form elliptic operator `A v = sum_ij d_i(a_ij d_j v)` with
//! homogeneous Dirichlet data, assembled by finite differences.
//!
//! The operator is built from a symmetric positive semidefinite stiffness
//! form `K` and scaled by the node weight, `A = -K / cell_volume`.
//! Diagonal coefficients `a_ii` enter as face fluxes sampled at face
//! midpoints. Mixed coefficients `a_ij` (2D only) are sampled at cell
//! centers and enter through the four corner gradients of each cell, which
//! keeps `K` symmetric by construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Domain, GridFunction};
use crate::linalg::CsrMatrix;

type CoefficientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

const SYMMETRY_TOL: f64 = 1e-10;
const ELLIPTICITY_TOL: f64 = 1e-12;

/// Evaluator `xi -> [a_ij(xi)]`, returned as a row-major `dim x dim` matrix.
#[derive(Clone)]
pub struct CoefficientField {
    dim: usize,
    name: String,
    eval: Arc<CoefficientFn>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .finish()
    }
}

impl CoefficientField {
    pub fn from_fn(
        dim: usize,
        name: impl Into<String>,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled(dim, 1.0).renamed("identity")
    }

    pub fn scaled(dim: usize, c: f64) -> Self {
        Self::from_fn(dim, format!("scaled:{c}"), move |_| {
            let mut m = vec![0.0; dim * dim];
            for i in 0..dim {
                m[i * dim + i] = c;
            }
            m
        })
    }

    pub fn diag(entries: Vec<f64>) -> Self {
        let dim = entries.len();
        let name = format!(
            "diag:{}",
            entries.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
        );
        Self::from_fn(dim, name, move |_| {
            let mut m = vec![0.0; dim * dim];
            for (i, &e) in entries.iter().enumerate() {
                m[i * dim + i] = e;
            }
            m
        })
    }

    /// A constant matrix, row-major.
    pub fn constant(dim: usize, matrix: Vec<f64>) -> Self {
        assert_eq!(matrix.len(), dim * dim);
        Self::from_fn(dim, "constant", move |_| matrix.clone())
    }

    /// `a(xi) = 1 + xi` on an interval.
    pub fn linear1d() -> Self {
        Self::from_fn(1, "linear1d", |x| vec![1.0 + x[0]])
    }

    /// Resolves a registry name: `identity`, `scaled:<c>`, `diag:<c1,...>`,
    /// `linear1d`.
    pub fn parse(name: &str, dim: usize) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("coefficient field '{name}': {msg}"));
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (name.trim(), None),
        };
        match (head, arg) {
            ("identity", None) => Ok(Self::identity(dim)),
            ("scaled", Some(a)) => {
                let c: f64 = a.parse().map_err(|_| bad(format!("cannot parse '{a}'")))?;
                Ok(Self::scaled(dim, c))
            }
            ("diag", Some(a)) => {
                let entries = a
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad(format!("cannot parse '{a}'")))?;
                if entries.len() != dim {
                    return Err(bad(format!("expected {dim} entries, got {}", entries.len())));
                }
                Ok(Self::diag(entries))
            }
            ("linear1d", None) if dim == 1 => Ok(Self::linear1d()),
            ("linear1d", None) => Err(bad("only defined on intervals".into())),
            _ => Err(bad("unknown coefficient field".into())),
        }
    }

    fn renamed(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    /// Smallest eigenvalue of the symmetric part of `[a_ij(x)]`.
    pub fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        min_eigenvalue(&self.eval(x), self.dim)
    }

    fn validate_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let a = self.eval(x);
        if a.len() != self.dim * self.dim || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "coefficient field '{}' returned an invalid matrix at {x:?}",
                self.name
            )));
        }
        if self.dim == 2 {
            let gap = (a[1] - a[2]).abs();
            if gap > SYMMETRY_TOL * a.iter().fold(1.0_f64, |m, v| m.max(v.abs())) {
                return Err(Error::CoefficientSymmetry { point: x.to_vec(), gap });
            }
        }
        let lambda = min_eigenvalue(&a, self.dim);
        if lambda < ELLIPTICITY_TOL {
            return Err(Error::Ellipticity {
                point: x.to_vec(),
                eigenvalue: lambda,
            });
        }
        Ok(a)
    }
}

fn min_eigenvalue(a: &[f64], dim: usize) -> f64 {
    match dim {
        1 => a[0],
        2 => {
            let off = 0.5 * (a[1] + a[2]);
            let mean = 0.5 * (a[0] + a[3]);
            let half_diff = 0.5 * (a[0] - a[3]);
            mean - half_diff.hypot(off)
        }
        _ => unreachable!("coefficient fields are 1D or 2D"),
    }
}

/// Minimum of the smallest eigenvalue of `[a_ij]` over a uniform lattice of
/// `n_samples` points per axis on the closed domain. This is the sampled
/// estimate of the ellipticity constant `C0`.
pub fn estimate_ellipticity(coeffs: &CoefficientField, domain: &Domain, n_samples: usize) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let axis_points = |axis: usize| -> Vec<f64> {
        let (lo, hi) = domain.bounds()[axis];
        if n_samples == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..n_samples)
                .map(|k| lo + (hi - lo) * k as f64 / (n_samples - 1) as f64)
                .collect()
        }
    };
    let mut worst = f64::INFINITY;
    match domain.dim() {
        1 => {
            for x in axis_points(0) {
                worst = worst.min(coeffs.min_eigenvalue(&[x]));
            }
        }
        _ => {
            let ys = axis_points(1);
            for x in axis_points(0) {
                for &y in &ys {
                    worst = worst.min(coeffs.min_eigenvalue(&[x, y]));
                }
            }
        }
    }
    Ok(worst)
}

/// Discrete divergence-form operator over the interior nodes of a domain.
#[derive(Debug, Clone)]
pub struct EllipticOperator {
    matrix: CsrMatrix,
    domain: Arc<Domain>,
    reported_c0: f64,
}

impl EllipticOperator {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    /// Minimum eigenvalue of `[a_ij]` seen over the assembly samples.
    pub fn reported_c0(&self) -> f64 {
        self.reported_c0
    }

    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        assert_eq!(v.len(), self.matrix.dim());
        GridFunction::from_parts(v.domain().clone(), self.matrix.mul_vec(v.values()), v.p())
    }

    /// `v^T A v` (unweighted).
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.matrix.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Assembles `A` for `coeffs` on `domain`. Coefficients are validated for
/// symmetry and ellipticity at every point where they are sampled.
pub fn assemble(coeffs: &CoefficientField, domain: Arc<Domain>) -> Result<EllipticOperator> {
    if coeffs.dim() != domain.dim() {
        return Err(Error::InvalidParameter(format!(
            "coefficient field is {}D but the domain is {}D",
            coeffs.dim(),
            domain.dim()
        )));
    }
    let n = domain.n_nodes();
    let mut triplets = Vec::new();
    let mut c0 = f64::INFINITY;
    let mut sample = |x: &[f64]| -> Result<Vec<f64>> {
        let a = coeffs.validate_at(x)?;
        c0 = c0.min(min_eigenvalue(&a, coeffs.dim()));
        Ok(a)
    };

    match domain.dim() {
        1 => {
            let nc = domain.n_cells()[0];
            let h = domain.spacing(0);
            let inside = |i: usize| (1..nc).contains(&i).then(|| i - 1);
            for i in 0..nc {
                let a = sample(&[domain.coord(0, i as f64 + 0.5)])?;
                push_edge(&mut triplets, inside(i), inside(i + 1), a[0] / h);
            }
        }
        _ => {
            let (nx, ny) = (domain.n_cells()[0], domain.n_cells()[1]);
            let (hx, hy) = (domain.spacing(0), domain.spacing(1));
            let node = |i: usize, j: usize| -> Option<usize> {
                ((1..nx).contains(&i) && (1..ny).contains(&j)).then(|| domain.flat_index(&[i, j]))
            };
            // x-faces between (i, j) and (i + 1, j); faces on boundary rows couple
            // only Dirichlet nodes and are skipped
            for j in 1..ny {
                for i in 0..nx {
                    let x = [domain.coord(0, i as f64 + 0.5), domain.coord(1, j as f64)];
                    let a = sample(&x)?;
                    push_edge(&mut triplets, node(i, j), node(i + 1, j), a[0] * hy / hx);
                }
            }
            for i in 1..nx {
                for j in 0..ny {
                    let x = [domain.coord(0, i as f64), domain.coord(1, j as f64 + 0.5)];
                    let a = sample(&x)?;
                    push_edge(&mut triplets, node(i, j), node(i, j + 1), a[3] * hx / hy);
                }
            }
            // mixed terms from corner gradients of each cell
            let quarter_area = 0.25 * hx * hy;
            for j in 0..ny {
                for i in 0..nx {
                    let x = [domain.coord(0, i as f64 + 0.5), domain.coord(1, j as f64 + 0.5)];
                    let a = sample(&x)?;
                    let mixed = 0.5 * (a[1] + a[2]);
                    if mixed == 0.0 {
                        continue;
                    }
                    for (ci, cj) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                        let gx = [(node(i + 1, cj), 1.0 / hx), (node(i, cj), -1.0 / hx)];
                        let gy = [(node(ci, j + 1), 1.0 / hy), (node(ci, j), -1.0 / hy)];
                        for &(p, wp) in &gx {
                            for &(q, wq) in &gy {
                                if let (Some(p), Some(q)) = (p, q) {
                                    let v = quarter_area * mixed * wp * wq;
                                    triplets.push((p, q, v));
                                    triplets.push((q, p, v));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let scale = -1.0 / domain.cell_volume();
    let triplets: Vec<_> = triplets.into_iter().map(|(r, c, v)| (r, c, scale * v)).collect();
    Ok(EllipticOperator {
        matrix: CsrMatrix::from_triplets(n, &triplets),
        domain,
        reported_c0: c0,
    })
}

/// Adds `w * (e_p - e_q)(e_p - e_q)^T`, dropping Dirichlet nodes.
fn push_edge(triplets: &mut Vec<(usize, usize, f64)>, p: Option<usize>, q: Option<usize>, w: f64) {
    if let Some(p) = p {
        triplets.push((p, p, w));
    }
    if let Some(q) = q {
        triplets.push((q, q, w));
    }
    if let (Some(p), Some(q)) = (p, q) {
        triplets.push((p, q, -w));
        triplets.push((q, p, -w));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Arc<Domain> {
        Arc::new(Domain::interval(0.0, 1.0, n).unwrap())
    }

    fn square(n: usize) -> Arc<Domain> {
        Arc::new(Domain::rectangle((0.0, 1.0), (0.0, 1.0), (n, n)).unwrap())
    }

    #[test]
    fn identity_1d_is_standard_stencil() {
        let op = assemble(&CoefficientField::identity(1), unit(4)).unwrap();
        let m = op.matrix().to_dense();
        let h2 = 0.25f64 * 0.25;
        let expected = [
            [-2.0 / h2, 1.0 / h2, 0.0],
            [1.0 / h2, -2.0 / h2, 1.0 / h2],
            [0.0, 1.0 / h2, -2.0 / h2],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(m[i][j], expected[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn scaling_coefficients_scales_matrix() {
        let a = assemble(&CoefficientField::identity(2), square(5)).unwrap();
        let b = assemble(&CoefficientField::scaled(2, 2.0), square(5)).unwrap();
        let (a, b) = (a.matrix().to_dense(), b.matrix().to_dense());
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert_eq!(2.0 * x, *y);
            }
        }
    }

    #[test]
    fn linear_coefficient_matches_hand_assembly() {
        // nodes 0.25, 0.5, 0.75; faces at 0.125, 0.375, 0.625, 0.875
        let op = assemble(&CoefficientField::linear1d(), unit(4)).unwrap();
        let v = [1.0, -2.0, 0.5];
        let h2 = 0.0625;
        let af = [1.125, 1.375, 1.625, 1.875];
        let full = [0.0, v[0], v[1], v[2], 0.0];
        let expected: Vec<f64> = (1..4)
            .map(|i| (af[i] * (full[i + 1] - full[i]) - af[i - 1] * (full[i] - full[i - 1])) / h2)
            .collect();
        let got = op.matrix().mul_vec(&v);
        for (g, e) in got.iter().zip(&expected) {
            assert_relative_eq!(g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_2d_is_five_point_stencil() {
        let d = square(4);
        let op = assemble(&CoefficientField::identity(2), d.clone()).unwrap();
        let h2 = 1.0 / 16.0;
        let center = d.flat_index(&[2, 2]);
        let row: Vec<(usize, f64)> = op.matrix().row(center).filter(|(_, v)| *v != 0.0).collect();
        assert_eq!(row.len(), 5);
        for (j, v) in row {
            let expected = if j == center { -4.0 / h2 } else { 1.0 / h2 };
            assert_relative_eq!(v, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixed_term_is_consistent_on_bilinear_function() {
        // d_x(c d_y u) + d_y(c d_x u) = 2c for u = xy, checked away from the boundary
        let c = 0.3;
        let d = square(8);
        let coeffs = CoefficientField::constant(2, vec![1.0, c, c, 1.0]);
        let op = assemble(&coeffs, d.clone()).unwrap();
        let u = GridFunction::from_fn(d.clone(), 2.0, |x| x[0] * x[1]).unwrap();
        let au = op.apply(&u);
        let node = d.flat_index(&[4, 4]);
        assert_relative_eq!(au.values()[node], 2.0 * c, epsilon = 1e-9);
    }

    #[test]
    fn operator_is_symmetric_and_dissipative() {
        let coeffs = CoefficientField::from_fn(2, "varying", |x| {
            let s = 0.2 * (x[0] + x[1]).sin();
            vec![1.0 + x[0], s, s, 2.0 - x[1]]
        });
        let op = assemble(&coeffs, square(9)).unwrap();
        let m = op.matrix();
        assert!(m.asymmetry() <= 1e-12 * m.max_abs());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let v = GridFunction::random_normal(op.domain().clone(), 2.0, &mut rng).unwrap();
            assert!(op.quadratic_form(v.values()) <= 0.0);
        }
    }

    #[test]
    fn second_order_consistency_on_sine() {
        let mut errors = Vec::new();
        for n in [16, 32, 64] {
            let d = unit(n);
            let op = assemble(&CoefficientField::identity(1), d.clone()).unwrap();
            let v = GridFunction::from_fn(d.clone(), 2.0, |x| (PI * x[0]).sin()).unwrap();
            let exact = v.scaled(-PI * PI);
            errors.push(op.apply(&v).distance(&exact));
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn asymmetric_coefficients_are_rejected() {
        let coeffs = CoefficientField::constant(2, vec![1.0, 0.2, 0.1, 1.0]);
        assert!(matches!(
            assemble(&coeffs, square(4)),
            Err(Error::CoefficientSymmetry { .. })
        ));
    }

    #[test]
    fn degenerate_coefficients_are_rejected() {
        let coeffs = CoefficientField::from_fn(1, "vanishing", |x| vec![x[0]]);
        let d = Arc::new(Domain::interval(-1.0, 1.0, 4).unwrap());
        assert!(matches!(assemble(&coeffs, d), Err(Error::Ellipticity { .. })));
    }

    #[test]
    fn ellipticity_estimates() {
        let d1 = Domain::interval(0.0, 1.0, 4).unwrap();
        let d2 = Domain::rectangle((0.0, 1.0), (0.0, 1.0), (4, 4)).unwrap();
        assert_eq!(
            estimate_ellipticity(&CoefficientField::identity(1), &d1, 5).unwrap(),
            1.0
        );
        assert_eq!(
            estimate_ellipticity(&CoefficientField::diag(vec![2.0, 0.5]), &d2, 3).unwrap(),
            0.5
        );
        let c = CoefficientField::constant(2, vec![1.0, 0.5, 0.5, 1.0]);
        assert_relative_eq!(estimate_ellipticity(&c, &d2, 4).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(
            estimate_ellipticity(&CoefficientField::linear1d(), &d1, 11).unwrap(),
            1.0
        );
        assert!(estimate_ellipticity(&CoefficientField::identity(1), &d1, 0).is_err());
    }

    #[test]
    fn registry_names_resolve() {
        assert_eq!(
            CoefficientField::parse("identity", 2).unwrap().eval(&[0.1, 0.2]),
            vec![1.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(CoefficientField::parse("scaled:3", 1).unwrap().eval(&[0.1]), vec![3.0]);
        assert_eq!(
            CoefficientField::parse("diag:1,0.5", 2).unwrap().eval(&[0.0, 0.0]),
            vec![1.0, 0.0, 0.0, 0.5]
        );
        assert_eq!(CoefficientField::parse("linear1d", 1).unwrap().eval(&[0.5]), vec![1.5]);
        assert!(CoefficientField::parse("diag:1", 2).is_err());
        assert!(CoefficientField::parse("linear1d", 2).is_err());
        assert!(CoefficientField::parse("bogus", 1).is_err());
    }
}
