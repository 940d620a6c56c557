use hasym_wasm_demo::{closed_forms, spectral_checks, surface_quantities};
use serde_json::Value;

const B: [f64; 3] = [0.3, -0.5, 0.4];
const C: [f64; 3] = [0.1, 0.2, -0.3];
const D: [f64; 9] = [0.2, -0.4, 0.1, 0.3, 0.5, -0.2, -0.1, 0.6, 0.3];

#[test]
fn closed_forms_report_adm_values() {
    let v: Value = serde_json::from_str(&closed_forms(0.7, &B, &C, &D).unwrap()).unwrap();
    assert!((v["energy"].as_f64().unwrap() - 1.4).abs() < 1e-15);
    assert!((v["center_bort"][1].as_f64().unwrap() - 0.4).abs() < 1e-15);
    let a0 = v["observer"][0].as_f64().unwrap();
    let a1 = v["observer"][1].as_f64().unwrap();
    assert!((a1 / a0 - 0.3 / 2.8).abs() < 1e-12);
}

#[test]
fn bad_shapes_are_reported() {
    let err = closed_forms(0.7, &B[..2], &C, &D).unwrap_err();
    assert!(err.starts_with("B:"), "{err}");
    assert!(closed_forms(0.7, &B, &C, &D[..4]).unwrap_err().starts_with("d:"));
}

#[test]
fn surface_limits_track_closed_forms() {
    let v: Value = serde_json::from_str(&surface_quantities(0.7, &B, &C, &D, 10, 50.0).unwrap()).unwrap();
    assert!(v["passed"].as_bool().unwrap(), "{}", v["report"]);
    let limits = v["limits"].as_array().unwrap();
    assert_eq!(limits.len(), 17);
    assert!(limits.iter().all(|r| r["abs_error"].as_f64().unwrap() < 1e-6));
}

#[test]
fn spectral_checks_pass() {
    let v: Value = serde_json::from_str(&spectral_checks(10, 1).unwrap()).unwrap();
    let checks = v.as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        let tol = c["bound"]["AtMost"].as_f64().unwrap();
        assert!(c["value"].as_f64().unwrap() <= tol, "{c}");
    }
}
