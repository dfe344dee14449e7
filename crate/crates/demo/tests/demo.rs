use nsdp_demo::{msr_curve_json, split_json, v_family_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn split_of_indefinite_diagonal() {
    let v = parse(split_json("[[2, 0], [0, -3]]").unwrap());
    assert_eq!(v["eigenvalues"], serde_json::json!([2.0, -3.0]));
    assert_eq!(v["plus"], serde_json::json!([[2.0, 0.0], [0.0, 0.0]]));
    assert_eq!(v["minus"], serde_json::json!([[0.0, 0.0], [0.0, 3.0]]));
}

#[test]
fn split_rejects_asymmetric_input() {
    assert!(split_json("[[1, 2], [0, 1]]").is_err());
    assert!(split_json("not json").is_err());
}

#[test]
fn rotated_basis_keeps_diagonal_vectors_opposite() {
    for k in 0..16 {
        let theta = k as f64 * std::f64::consts::PI / 16.0;
        let v = parse(v_family_json("linear-indefinite", theta).unwrap());
        let v11: Vec<f64> = serde_json::from_value(v["v11"].clone()).unwrap();
        let v22: Vec<f64> = serde_json::from_value(v["v22"].clone()).unwrap();
        let expect = [(2.0 * theta).cos(), (2.0 * theta).sin()];
        for i in 0..2 {
            assert!((v11[i] - expect[i]).abs() < 1e-12, "theta {theta}: {v11:?}");
            assert!((v11[i] + v22[i]).abs() < 1e-12);
        }
        assert_eq!(v["diagonal_pos_dependent"], true);
    }
}

#[test]
fn v_family_needs_order_two() {
    assert!(v_family_json("no-such-fixture", 0.0).is_err());
}

#[test]
fn msr_curve_is_flat_on_linear_indefinite() {
    let v = parse(msr_curve_json("linear-indefinite", 0.1, 48, 0).unwrap());
    let g = v["gamma_hat"].as_f64().unwrap();
    assert!((0.99..=1.01).contains(&g), "{g}");
    assert!(!v["points"].as_array().unwrap().is_empty());
}
