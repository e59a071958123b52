use epnozzle_web::{background_json, perturbation_json, threshold_json};
use serde_json::{json, Value};

fn problem() -> Value {
    json!({
        "gas": { "gamma": 1.4, "b0": 1.0 },
        "geometry": { "r1": 1.0, "r2": 1.5, "theta0": 0.4 },
        "inlet": { "rho0": 1.0, "u0": 0.4, "p0": 1.0, "e0": -3.0 },
        "nodes": 201
    })
}

#[test]
fn background_mach_number_decreases() {
    let out: Value = serde_json::from_str(&background_json(&problem().to_string()).unwrap()).unwrap();
    assert_eq!(out["strictly_decreasing"], json!(true));
    let msq: Vec<f64> = serde_json::from_value(out["msq"].clone()).unwrap();
    assert!(msq.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn threshold_lies_inside_the_bracket() {
    let mut q = problem();
    q["bracket"] = json!([-3.0, 0.5]);
    q["tol"] = json!(1e-3);
    let out: Value = serde_json::from_str(&threshold_json(&q.to_string()).unwrap()).unwrap();
    let e = out["e_star"].as_f64().unwrap();
    assert!(-3.0 < e && e < 0.5);
}

#[test]
fn perturbation_rejects_a_degenerate_grid() {
    let mut q = problem();
    q["amplitude"] = json!(1e-4);
    q["nr"] = json!(2);
    q["nt"] = json!(2);
    assert!(perturbation_json(&q.to_string()).is_err());
}

#[test]
fn unknown_shapes_are_rejected() {
    assert!(threshold_json(&problem().to_string()).is_err());
}
