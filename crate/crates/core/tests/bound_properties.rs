use std::sync::{Arc, OnceLock};

use lattice_gibbs::bounds::{check_one_point, check_tail_bound, check_volume_bound};
use lattice_gibbs::gibbs::{Engine, Model};
use lattice_gibbs::lattice::Region;
use lattice_gibbs::single_spin::{GridConfig, Potential, SingleSpinMeasure};
use lattice_gibbs::weights::{CouplingField, ModelExponents, SpinConfig, WeightFunction};
use proptest::prelude::*;

fn model() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| {
        let ex = ModelExponents::from_q(2.0).unwrap();
        let grid = GridConfig::fixed(8, 8);
        let m = SingleSpinMeasure::build(Potential::monomial(1.0, 6).unwrap(), &ex, &grid).unwrap();
        Model::new(Arc::new(m), ex, WeightFunction::new(1.0, 1).unwrap())
    })
}

fn chain_spec(len: usize, j: &[f64], xi: (f64, f64)) -> lattice_gibbs::gibbs::GibbsSpec {
    let r = Region::chain(0, len).unwrap();
    let j = CouplingField::from_fn(&r, |e| {
        let (a, b) = e.endpoints();
        let k = a.coords()[0].min(b.coords()[0]) + 1;
        j[k as usize % j.len()]
    });
    let bd = SpinConfig::from_fn(r.boundary(), |s| if s.coords()[0] < 0 { xi.0 } else { xi.1 });
    model().spec(&r, &j, &bd).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_point_bound_holds(j in prop::collection::vec(-3.0..3.0f64, 2), xi in (-2.0..2.0f64, -2.0..2.0f64)) {
        let s = chain_spec(1, &j, xi);
        let rep = check_one_point(&s, 0.3, 0.2).unwrap();
        prop_assert!(rep.deterministic);
        prop_assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn volume_bound_holds_and_grows_with_truncation(
        j in prop::collection::vec(-3.0..3.0f64, 4),
        xi in (-2.0..2.0f64, -2.0..2.0f64),
        len in 1usize..=3,
    ) {
        let s = chain_spec(len, &j, xi);
        let mut prev = 0.0;
        for cap in [1.0, 10.0, 100.0] {
            let rep = check_volume_bound(&s, 0.1, cap, &Engine::Quadrature).unwrap();
            prop_assert!(rep.passed, "{rep:?}");
            prop_assert!(rep.lhs >= prev - 1e-12);
            prev = rep.lhs;
        }
    }

    #[test]
    fn tail_bound_holds(
        j in prop::collection::vec(-2.0..2.0f64, 3),
        xi in (-1.5..1.5f64, -1.5..1.5f64),
        radius in 0.5..3.0f64,
    ) {
        let s = chain_spec(2, &j, xi);
        let rep = check_tail_bound(&s, radius, 0.5, &Engine::Quadrature).unwrap();
        prop_assert!(rep.passed, "{rep:?}");
    }
}
