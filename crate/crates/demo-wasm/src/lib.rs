//! Browser bindings: radial sweeps, tilted planes and Ricci checks.
//!
//! Each exported function wraps a plain Rust function of the same name
//! with a `_json` or `_csv` suffix, so the logic runs and is tested
//! natively. Build for the page with
//! `wasm-pack build crates/demo-wasm --target web --out-dir www/pkg`.

use holonomy_lab::config::RunConfig;
use holonomy_lab::geom::{linear_estimates, ricci_contract, split_plane, FrameIndexSet};
use holonomy_lab::suite::{self, curvature_samples, Family};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn family(name: &str, n: usize, space: &str, kappa: f64) -> Result<Family, String> {
    let cfg = RunConfig {
        family: Some(name.into()),
        n: Some(n),
        space: (!space.is_empty()).then(|| space.into()),
        kappa: Some(kappa),
        ..Default::default()
    };
    cfg.family().map_err(|e| e.to_string())
}

/// CSV of `quantity` on `grid` (`lo:hi:count`, empty for the default).
pub fn sweep_csv(name: &str, n: usize, space: &str, kappa: f64, quantity: &str, grid: &str) -> Result<String, String> {
    let cfg = RunConfig {
        quantity: Some(quantity.into()),
        grid: (!grid.is_empty()).then(|| grid.into()),
        ..Default::default()
    };
    let q = cfg.quantity().map_err(|e| e.to_string())?;
    let g = cfg.grid().map_err(|e| e.to_string())?;
    suite::sweep(&family(name, n, space, kappa)?, q, g)
        .map(|t| t.to_csv())
        .map_err(|e| e.to_string())
}

/// Splits the graph of `diag(tan θ_k)` seen through a random basis of the
/// plane and reports the angles, `Ω` and the linear estimates.
pub fn plane_json(n: usize, m: usize, angles: &[f64], seed: u64) -> Result<String, String> {
    let frame = FrameIndexSet::new(n, m).map_err(|e| e.to_string())?;
    if angles.len() > n.min(m) || angles.iter().any(|t| !(t.abs() < std::f64::consts::FRAC_PI_2)) {
        return Err(format!("need at most {} angles in (-pi/2, pi/2)", n.min(m)));
    }
    let d = n + m;
    let mut plane = vec![vec![0.0; d]; n];
    for (k, row) in plane.iter_mut().enumerate() {
        let t = angles.get(k).copied().unwrap_or(0.0);
        row[k] = t.cos();
        if k < m {
            row[n + k] = t.sin();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
    let g = if g.determinant() < 0.0 { -g } else { g };
    let basis: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..d).map(|a| (0..n).map(|k| g[(k, j)] * plane[k][a]).sum()).collect())
        .collect();
    let sp = split_plane(&basis, frame).map_err(|e| e.to_string())?;
    let est = linear_estimates(&sp);
    let eps = 1.0 - sp.omega();
    Ok(json!({
        "theta": sp.theta,
        "s_frak": sp.s_frak,
        "omega": sp.omega(),
        "cos_product": sp.cos_product(),
        "two_sqrt_eps": 2.0 * eps.max(0.0).sqrt(),
        "estimates_hold": est.passed(1e-12),
        "worst_margin": est.worst_margin(),
    })
    .to_string())
}

/// Largest Ricci entry and its sample label over the family's curvature
/// sample points.
pub fn ricci_json(name: &str, n: usize, space: &str, kappa: f64) -> Result<String, String> {
    let samples = curvature_samples(&family(name, n, space, kappa)?).map_err(|e| e.to_string())?;
    let rows: Vec<_> = samples
        .iter()
        .map(|(label, r)| json!({ "at": label, "max_ricci": ricci_contract(r).amax(), "max_riemann": r.max_abs() }))
        .collect();
    Ok(json!({ "family": family(name, n, space, kappa)?.label(), "samples": rows }).to_string())
}

#[wasm_bindgen]
pub fn sweep(name: &str, n: usize, space: &str, kappa: f64, quantity: &str, grid: &str) -> Result<String, JsValue> {
    sweep_csv(name, n, space, kappa, quantity, grid).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn plane(n: usize, m: usize, angles: Vec<f64>, seed: u64) -> Result<String, JsValue> {
    plane_json(n, m, &angles, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn ricci(name: &str, n: usize, space: &str, kappa: f64) -> Result<String, JsValue> {
    ricci_json(name, n, space, kappa).map_err(|e| JsValue::from_str(&e))
}
