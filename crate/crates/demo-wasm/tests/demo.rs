use holonomy_lab_demo::*;
use serde_json::Value;

#[test]
fn sweep_csv_matches_the_library_table() {
    let csv = sweep_csv("stenzel", 2, "", 1.0, "abc", "0:0.9:30").unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert!(csv.starts_with("rho,r,A,B,C"));
    let csv = sweep_csv("bs", 0, "asd_S4", 1.0, "hessian", "").unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(sweep_csv("stenzel", 2, "", 1.0, "volume", "").unwrap_err().contains("unknown quantity"));
    assert!(sweep_csv("stenzel", 1, "", 1.0, "abc", "").unwrap_err().contains("n > 1"));
}

#[test]
fn plane_recovers_its_angles() {
    let v: Value = serde_json::from_str(&plane_json(3, 2, &[0.4, -0.2], 9).unwrap()).unwrap();
    let theta: Vec<f64> = v["theta"].as_array().unwrap().iter().map(|t| t.as_f64().unwrap()).collect();
    assert!((theta[0].abs() - 0.4).abs() < 1e-12 && (theta[1].abs() - 0.2).abs() < 1e-12);
    assert!((v["s_frak"].as_f64().unwrap() - 0.4f64.sin()).abs() < 1e-12);
    assert!((v["omega"].as_f64().unwrap() - 0.4f64.cos() * 0.2f64.cos()).abs() < 1e-12);
    assert_eq!(v["estimates_hold"], true);
    assert!(plane_json(2, 2, &[0.1, 0.2, 0.3], 0).is_err());
    assert!(plane_json(2, 2, &[2.0], 0).is_err());
}

#[test]
fn ricci_samples_vanish() {
    let v: Value = serde_json::from_str(&ricci_json("calabi", 2, "", 1.0).unwrap()).unwrap();
    let samples = v["samples"].as_array().unwrap();
    assert!(samples.len() >= 9);
    assert!(samples.iter().all(|s| s["max_ricci"].as_f64().unwrap() < 1e-8));
    assert!(ricci_json("bs", 0, "S7", 1.0).is_err());
}
