use besovlab_web::{blocks_json, heat_json, pressure_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn documents_have_expected_shape() {
    let b = parse(blocks_json(64, 1.5, 9, 3.0, 0.5).unwrap());
    assert_eq!(b["field"].as_array().unwrap().len(), 64 * 64);
    let js: Vec<i64> = b["blocks"].as_array().unwrap().iter().map(|x| x["j"].as_i64().unwrap()).collect();
    assert!(js.windows(2).all(|w| w[1] == w[0] + 1));
    assert!(b["norm"].as_f64().unwrap() > 0.0);

    let p = parse(pressure_json(32, 0.9, 4, 3.0).unwrap());
    assert!(p["residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(p["a"].as_array().unwrap().len(), 32 * 32);

    let h = parse(heat_json(2, 1.5, 1, 3).unwrap());
    let times = h["scaled_times"].as_array().unwrap().len();
    for curve in h["curves"].as_array().unwrap() {
        let c: Vec<f64> = serde_json::from_value(curve.clone()).unwrap();
        assert_eq!(c.len(), times);
        assert!(c.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}

#[test]
fn same_seed_same_document() {
    assert_eq!(blocks_json(32, 1.0, 5, 2.0, 0.0).unwrap(), blocks_json(32, 1.0, 5, 2.0, 0.0).unwrap());
    assert_ne!(blocks_json(32, 1.0, 5, 2.0, 0.0).unwrap(), blocks_json(32, 1.0, 6, 2.0, 0.0).unwrap());
}
