use std::sync::Arc;

use hamflow::counterexample::{
    crossing_time_analytic, formula_params, q, sigma, side, CantorTree, CounterexampleField,
};
use hamflow::field::{Analytic, FieldSpec, PiecewiseSpec, PlanarField, ScalarField};
use hamflow::flow::{levelset_flow, rk_flow, NodeFlag, RkOptions};
use hamflow::{AxisRect, Point};
use proptest::prelude::*;

fn rotation() -> (Arc<dyn ScalarField>, PlanarField) {
    let h: Arc<dyn ScalarField> = Arc::new(Analytic::quadratic(1.0, 0.0, 1.0, AxisRect::new(-4.0, 4.0, -4.0, 4.0).unwrap()));
    (h.clone(), PlanarField::from_hamiltonian(h))
}

fn vortex() -> (Arc<dyn ScalarField>, PlanarField) {
    let h: Arc<dyn ScalarField> = Arc::new(Analytic::compact_vortex(0.5, 1.0));
    (h.clone(), PlanarField::from_hamiltonian(h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_keeps_level_and_matches_rk(x in -1.0f64..1.0, y in -1.0f64..1.0, t in 0.0f64..3.0) {
        let (h, b) = rotation();
        let z = Point::new(x, y);
        prop_assume!(z.norm() > 1e-3);
        let a = levelset_flow(&h, &b, z, t).unwrap();
        prop_assert_eq!(a.flag, NodeFlag::Ok);
        prop_assert!((h.value(a.point) - h.value(z)).abs() <= 1e-12);
        let r = rk_flow(&b, z, t, &RkOptions::new(1e-12)).unwrap();
        prop_assert!(a.point.dist(r.point) <= 1e-8);
    }

    #[test]
    fn vortex_flow_composes(x in -0.9f64..0.9, y in -0.9f64..0.9, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let (h, b) = vortex();
        let z = Point::new(x, y);
        let direct = levelset_flow(&h, &b, z, s + t).unwrap();
        let first = levelset_flow(&h, &b, z, s).unwrap();
        prop_assume!(direct.flag == NodeFlag::Ok && first.flag == NodeFlag::Ok);
        let second = levelset_flow(&h, &b, first.point, t).unwrap();
        prop_assume!(second.flag == NodeFlag::Ok);
        prop_assert!(direct.point.dist(second.point) <= 1e-8, "{:?} vs {:?}", direct.point, second.point);
    }

    #[test]
    fn construction_strip_shifts_by_crossing_time(x in -0.125f64..-0.001, y in 0.001f64..0.499) {
        let depth = 4;
        let spec = FieldSpec::Piecewise(PiecewiseSpec { construction: "counterexample".into(), depth, mollified: false });
        let b = spec.planar().unwrap();
        let h = b.hamiltonian().unwrap().clone();
        let field = CounterexampleField::new(Arc::new(CantorTree::build(depth).unwrap()), depth);
        let t = 2.0;
        let z = Point::new(x, y);
        let out = levelset_flow(&h, &b, z, t).unwrap();
        prop_assert_eq!(out.flag, NodeFlag::Ok);
        prop_assert!((h.value(out.point) - h.value(z)).abs() <= 1e-12);
        let expect = x + 1.0 + t - crossing_time_analytic(&field, y);
        prop_assert!((out.point.x - expect).abs() <= 1e-10);
        prop_assert!((out.point.y - y).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn closed_form_parameters_pack_exactly(n in 2u32..200) {
        let p = formula_params(n);
        prop_assert_eq!(&p.c, &side(n));
        prop_assert_eq!(p.c.clone(), side(n + 1) * q(2, 1) + (&p.a + &p.r) * q(4, 1));
        prop_assert_eq!(p.a.clone(), &p.r * q(n as i64 - 1, 1));
    }

    #[test]
    fn sigma_products_decrease(n in 2u32..2000) {
        let (a, b) = (sigma(n), sigma(n + 1));
        prop_assert!(b > 0.0 && b < a);
    }
}
