use std::sync::Arc;

use tautgw::gw_potential_series;
use tautgw::potentials::{
    build_h_series, cp1_closed_form_series, cp1_penult_residual, cp1_penult_residual_for,
    cp1_puncture_dilaton_residuals, residuals_vanish, trr_pde_residuals, wdvv_residual, PotentialSpec,
};
use tautgw::rational::{int, rat};
use tautgw::verify::wdvv_spec;
use tautgw::{CorrelatorEngine, TargetModel};

fn p(r: usize) -> Arc<TargetModel> {
    Arc::new(TargetModel::projective_space(r))
}

#[test]
fn engine_potential_equals_gw_potential_for_p3() {
    let spec = wdvv_spec(3, 2).unwrap();
    let e = CorrelatorEngine::new(spec.target.clone());
    let h = build_h_series(&spec, &e).unwrap();
    let g = gw_potential_series(&spec.target, &spec.registry, &spec.truncation).unwrap();
    assert_eq!(h, g);
    assert!(residuals_vanish(&wdvv_residual(&h, &spec.target).unwrap()));
    // Lines through two points.
    assert_eq!(h.coefficient_of(&[("x^3", 2), ("q", 1)]).unwrap(), rat(1, 2));
}

#[test]
fn perturbed_p2_potential_breaks_wdvv() {
    let spec = wdvv_spec(2, 2).unwrap();
    let e = CorrelatorEngine::new(spec.target.clone());
    let mut h = build_h_series(&spec, &e).unwrap();
    // N_2 = 1 → 2.
    let mut exp = vec![0; spec.registry.len()];
    exp[spec.index("x^2").unwrap()] = 5;
    exp[spec.index("q").unwrap()] = 2;
    h.add_term(exp, rat(1, 120));
    assert!(!residuals_vanish(&wdvv_residual(&h, &spec.target).unwrap()));
}

#[test]
fn recursion_pdes_on_p2_series() {
    let spec = PotentialSpec::from_names(
        p(2),
        &["x^0", "x^1", "x^2", "t_1^0", "t_1^2", "s_0^0", "s_0^1", "s_-1^1"],
        4,
        2,
        Some(5),
    )
    .unwrap();
    let e = CorrelatorEngine::new(spec.target.clone());
    let h = build_h_series(&spec, &e).unwrap();
    let res = trr_pde_residuals(&h, &spec).unwrap();
    assert!(res.len() >= 2);
    for (label, r) in &res {
        assert!(r.is_zero(), "{label}");
    }
}

#[test]
fn closed_form_solves_its_equations_to_high_order() {
    assert!(cp1_penult_residual(9).unwrap().is_zero());
    let spec = PotentialSpec::cp1_five_variable(5, 5, Some(5)).unwrap();
    let ht = cp1_closed_form_series(5, &spec, false).unwrap();
    for r in cp1_puncture_dilaton_residuals(&ht, &spec).unwrap() {
        assert!(r.is_zero());
    }
}

#[test]
fn wrong_h_sequence_is_detected() {
    let bad = [int(1), rat(1, 2), int(5)];
    assert!(!cp1_penult_residual_for(&bad).unwrap().is_zero());
}

#[test]
fn cp1_engine_matches_closed_form_with_descendants_off() {
    let spec = PotentialSpec::from_names(p(1), &["x^0", "x^1", "s_0^1", "s_-1^1"], 6, 4, Some(6)).unwrap();
    let e = CorrelatorEngine::new(spec.target.clone());
    let h = build_h_series(&spec, &e).unwrap();
    assert_eq!(h, cp1_closed_form_series(4, &spec, true).unwrap());
}
