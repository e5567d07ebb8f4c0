use std::sync::Arc;

use hamflow::field::{Analytic, PlanarField, ScalarField};
use hamflow::regularity::{verify_global_estimate, Constants, GlobalOptions};
use hamflow::AxisRect;

#[test]
fn uniform_flow_has_no_violations() {
    let h: Arc<dyn ScalarField> = Arc::new(Analytic::linear(0.0, -1.0, 0.0, AxisRect::new(-2.0, 2.0, -2.0, 2.0).unwrap()));
    let b = PlanarField::from_hamiltonian(h.clone());
    let opts = GlobalOptions { r_bar_start: 0.25, cells: 32, h_resolution: 1e-2, ..GlobalOptions::default() };
    let rep = verify_global_estimate(&b, &h, 3, 0.5, 50, 1, &opts).unwrap();
    assert_eq!(rep.report.violations, 0);
    assert_eq!(rep.report.tested, 50);
    assert!(rep.report.worst_ratio <= 1.0);
}

#[test]
fn compact_vortex_satisfies_both_items() {
    let h: Arc<dyn ScalarField> = Arc::new(Analytic::compact_vortex(0.5, 1.0));
    let b = PlanarField::from_hamiltonian(h.clone());
    let rep = verify_global_estimate(&b, &h, 4, 1.0, 500, 11, &GlobalOptions::default()).unwrap();
    assert_eq!(rep.report.tested, 500);
    assert_eq!(rep.report.violations, 0);
    assert_eq!(rep.chain_violations, 0);
    let Constants::Global { c1, c2, r, r_bar, n_tilde } = rep.report.constants else { unreachable!() };
    assert_eq!(c1, 10.0);
    let sup = b.sup_norm;
    assert_eq!(n_tilde, (sup / r_bar).ceil() as u64);
    assert_eq!(c2, n_tilde as f64 * 25.0 * (1.0 + 2.0 * sup) + 10.0);
    assert!(r <= r_bar / (10.0 * sup) && r <= 1.0 / (10.0 * n_tilde as f64));
}
