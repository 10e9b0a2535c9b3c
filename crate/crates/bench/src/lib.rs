//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use parabolic_core::{
    assemble, CoefficientField, ConditionFunctional, Domain, Kernel, Propagator, Reaction, RhsModel, Scheme,
};

pub struct Fixture {
    pub domain: Arc<Domain>,
    pub propagator: Propagator,
    pub rhs: RhsModel,
    pub condition: ConditionFunctional,
}

pub fn unit_square(n: usize) -> Arc<Domain> {
    Arc::new(Domain::rectangle((0.0, 1.0), (0.0, 1.0), (n, n)).unwrap())
}

/// Mean-value problem on `(0, 1)` with `n` cells and step `dt`.
pub fn mean_value_1d(n: usize, dt: f64) -> Fixture {
    let domain = Arc::new(Domain::interval(0.0, 1.0, n).unwrap());
    let op = assemble(&CoefficientField::identity(1), domain.clone()).unwrap();
    let propagator = Propagator::new(Arc::new(op), dt, Scheme::ImplicitEuler).unwrap();
    let rhs = RhsModel::new(
        Kernel::gauss_conv(&domain, 0.1, 1.0).unwrap(),
        2.5,
        Reaction::parse("scaled_sin:0.3+time_cos:1").unwrap(),
        domain.clone(),
    )
    .unwrap();
    Fixture {
        domain,
        propagator,
        rhs,
        condition: ConditionFunctional::MeanValue,
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_build() {
        let f = super::mean_value_1d(32, 0.05);
        assert_eq!(f.domain.n_nodes(), 31);
        assert_eq!(super::unit_square(8).n_nodes(), 49);
    }
}
