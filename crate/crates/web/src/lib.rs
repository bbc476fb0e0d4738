//! WebAssembly bindings for the static demo page in `www/`. Every entry
//! point returns a flat `Float64Array`; the layout is given per function.

use quasiloc::green::localize_eigenfunction;
use quasiloc::lyapunov::{finite_lyapunov, ldt_sample, LdtParams, PhaseGrid};
use quasiloc::transfer::{transfer_matrix_at, Interval, IntegratorConfig};
use quasiloc::AnalyticPotential;
use wasm_bindgen::prelude::*;

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn cfg() -> IntegratorConfig {
    // a little looser than the library default to keep the page responsive
    IntegratorConfig::default().with_rel_tol(1e-8)
}

/// `[E_0, L_0, E_1, L_1, …]` for `V = K²(cos 2πt + cos 2πθ)` on `[0, len]`.
pub fn lyapunov_curve_impl(k: f64, len: f64, e_min: f64, e_max: f64, count: usize, grid: usize) -> Result<Vec<f64>, String> {
    let p = AnalyticPotential::cosine_model(k).map_err(|e| e.to_string())?;
    let iv = Interval::new(0.0, len).map_err(|e| e.to_string())?;
    let g = PhaseGrid::new(grid.max(1), 1).map_err(|e| e.to_string())?;
    let n = count.max(2);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let e = e_min + (e_max - e_min) * i as f64 / (n - 1) as f64;
        let l = finite_lyapunov(&p, iv, &[golden()], e, &g, &[0.0], &cfg()).map_err(|err| err.to_string())?;
        out.push(e);
        out.push(l.value);
    }
    Ok(out)
}

/// `[E*, decay_rate, t_0, log|y_0|, t_1, log|y_1|, …]` for the Dirichlet
/// eigenvalue on `[−half, half]` nearest to `centre` on a 0.1 lattice.
pub fn eigenfunction_profile_impl(k: f64, half: f64, theta: f64, centre: f64) -> Result<Vec<f64>, String> {
    let p = AnalyticPotential::cosine_model(k).map_err(|e| e.to_string())?;
    let bx = Interval::new(-half, half).map_err(|e| e.to_string())?;
    let w = [golden()];
    let sign = |e: f64| -> Result<f64, String> {
        Ok(transfer_matrix_at(&p, bx, &[theta], &w, e, &cfg()).map_err(|err| err.to_string())?.unit()[0][1].signum())
    };
    let step = 0.1;
    let mut bracket = None;
    'scan: for r in 0..400 {
        for (lo, hi) in [(r, r + 1), (-r - 1, -r)] {
            let (el, eh) = (centre + lo as f64 * step, centre + hi as f64 * step);
            if sign(el)? != sign(eh)? {
                bracket = Some((el, eh));
                break 'scan;
            }
        }
    }
    let bracket = bracket.ok_or("no Dirichlet eigenvalue within 40 of the centre")?;
    let loc = localize_eigenfunction(&p, bx, &[theta], &w, bracket, &cfg()).map_err(|e| e.to_string())?;
    let mut out = vec![loc.energy, loc.decay_rate];
    for s in &loc.profile {
        out.push(s.t);
        out.push(s.log_abs_y);
    }
    Ok(out)
}

/// `[threshold, x_1, …, x_n]` with `x_i = log‖M_I(θ_i)‖ − |I| L_I` over
/// `samples` low-discrepancy phases, and the deviation threshold
/// `0.5 |I|^{3/4}`.
pub fn ldt_excess_impl(k: f64, len: f64, energy: f64, samples: usize) -> Result<Vec<f64>, String> {
    let p = AnalyticPotential::cosine_model(k).map_err(|e| e.to_string())?;
    let iv = Interval::new(0.0, len).map_err(|e| e.to_string())?;
    let params = LdtParams { epsilon: 0.5, sigma: 0.25, sample_count: samples.max(100), seed: 0 };
    let s = ldt_sample(&p, iv, &[golden()], energy, &params, &cfg()).map_err(|e| e.to_string())?;
    let mut out = vec![s.threshold];
    out.extend(s.log_norms.iter().map(|x| x - len * s.lyapunov));
    Ok(out)
}

#[wasm_bindgen]
pub fn lyapunov_curve(k: f64, len: f64, e_min: f64, e_max: f64, count: usize, grid: usize) -> Result<Vec<f64>, JsError> {
    lyapunov_curve_impl(k, len, e_min, e_max, count, grid).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn eigenfunction_profile(k: f64, half: f64, theta: f64, centre: f64) -> Result<Vec<f64>, JsError> {
    eigenfunction_profile_impl(k, half, theta, centre).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ldt_excess(k: f64, len: f64, energy: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    ldt_excess_impl(k, len, energy, samples).map_err(|e| JsError::new(&e))
}
