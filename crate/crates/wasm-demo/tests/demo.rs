use stochkit::subordinated::VgParams;
use stochkit_wasm::{density_curve, path_fan, percentile_fan, FAN_PROBS, MODELS};

fn floats(v: &serde_json::Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn vg_density_is_peakier_than_normal() {
    let p = VgParams::new(0.0, 0.0, 0.2, 0.002).unwrap();
    let c = density_curve(&p, 1.0 / 252.0, 201).unwrap();
    let (x, vg, normal) = (floats(&c["x"]), floats(&c["vg"]), floats(&c["normal"]));
    assert_eq!(x.len(), 201);
    let h = x[1] - x[0];
    let mass: f64 = vg.iter().sum::<f64>() * h;
    assert!((mass - 1.0).abs() < 0.02, "mass {mass}");
    assert!(vg[100] > normal[100]);
    assert!(vg[0] > normal[0]);
    assert!(c["moments"]["excess_kurtosis"].as_f64().unwrap() > 0.0);
}

#[test]
fn vg_fan_is_ordered_and_widens() {
    let p = VgParams::new(0.05, -0.1, 0.25, 0.05).unwrap();
    let f = percentile_fan(&p, 1.0, 4).unwrap();
    let rows: Vec<Vec<f64>> = f["quantiles"].as_array().unwrap().iter().map(floats).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r.windows(2).all(|w| w[0] < w[1]), "{r:?}");
    }
    assert!(rows[3][4] - rows[3][0] > rows[0][4] - rows[0][0]);
    assert!(percentile_fan(&p, 0.0, 4).is_err());
}

#[test]
fn path_fan_shapes_and_determinism() {
    let params = [
        r#"{"mu":0.1,"sigma":0.2}"#,
        r#"{"mu":0.1,"sigma":0.2,"lambda":5,"mu_y":-0.02,"sigma_y":0.05}"#,
        r#"{"mu_bar":0.1,"theta_bar":-0.1,"sigma_bar":0.2,"nu":0.01}"#,
        r#"{"alpha":50,"beta":-5,"delta":2,"mu":0.1}"#,
        r#"{"alpha":2,"theta":100,"sigma":10}"#,
        r#"{"alpha":2,"theta":100,"sigma":5}"#,
    ];
    for (model, p) in MODELS.iter().zip(params) {
        let a = path_fan(model, p, 100.0, 30, 200, 1.0 / 252.0, 9).unwrap();
        let b = path_fan(model, p, 100.0, 30, 200, 1.0 / 252.0, 9).unwrap();
        assert_eq!(a, b, "{model}");
        let fan = a["fan"].as_array().unwrap();
        assert_eq!(fan.len(), 31);
        assert_eq!(floats(&fan[0]), vec![100.0; FAN_PROBS.len()], "{model}");
        let last = floats(&fan[30]);
        assert!(last.windows(2).all(|w| w[0] <= w[1]), "{model}: {last:?}");
        assert_eq!(a["paths"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn bad_inputs_are_reported() {
    assert!(path_fan("heston", "{}", 1.0, 5, 5, 0.1, 1).unwrap_err().contains("unknown model"));
    assert!(path_fan("gbm", r#"{"mu":0.1}"#, 1.0, 5, 5, 0.1, 1).unwrap_err().contains("bad gbm parameters"));
    assert!(path_fan("gbm", r#"{"mu":0.1,"sigma":-1}"#, 1.0, 5, 5, 0.1, 1).is_err());
}
