//! Browser bindings. Every entry point returns a JSON string: either the
//! result object or `{"error": "..."}`.

use genpoisson::casimir::CasimirSet;
use genpoisson::darboux::DarbouxChart;
use genpoisson::dynamics::{IntegrateOptions, Method, PoissonSystem};
use genpoisson::expr::Expression;
use genpoisson::presets::{self, Preset};
use genpoisson::verify::jacobi_residual;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn preset(name: &str, r: f64) -> Result<Preset, String> {
    if !(r.is_finite() && r > 0.0) {
        return Err(format!("rate must be positive, got {r}"));
    }
    presets::by_name(name, r).ok_or_else(|| format!("unknown example '{name}'"))
}

fn parse_point(text: &str, n: usize) -> Result<Vec<f64>, String> {
    let x: Vec<f64> = serde_json::from_str(text).map_err(|e| format!("point: {e}"))?;
    if x.len() != n {
        return Err(format!("point: expected {n} coordinates, got {}", x.len()));
    }
    Ok(x)
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Structure matrix, Jacobi residual, Casimir values and Darboux
/// coordinates of an example at `x`.
pub fn structure_at_json(name: &str, r: f64, x: &str) -> Result<Value, String> {
    let p = preset(name, r)?;
    let f = &p.family;
    let x = parse_point(x, f.dimension())?;
    let j = f.eval_j(&x).map_err(|e| e.to_string())?.j;
    let res = jacobi_residual(
        |x: &[f64]| f.eval_j(x).map(|v| v.j),
        |x: &[f64]| f.eval_j_partials(x),
        &x,
    )
    .map_err(|e| e.to_string())?;
    let cas = CasimirSet::build(f);
    let chart = DarbouxChart::new(f);
    let z = chart.to_z(&x).map_err(|e| e.to_string())?;
    Ok(json!({
        "example": p.name,
        "description": p.description,
        "point": x,
        "j": rows(&j),
        "rank": f.rank(),
        "jacobi_raw": res.raw,
        "jacobi_normalized": res.normalized,
        "casimirs": cas.values(&x).map_err(|e| e.to_string())?,
        "casimir_forms": cas.closed_forms(),
        "z": z,
    }))
}

/// Integrates the Hamiltonian flow of an example and returns the sampled
/// trajectory with its H and Casimir series.
#[allow(clippy::too_many_arguments)]
pub fn integrate_json(
    name: &str,
    r: f64,
    hamiltonian: &str,
    x0: &str,
    method: &str,
    t_end: f64,
    dt: f64,
    tol: f64,
) -> Result<Value, String> {
    let p = preset(name, r)?;
    let f = &p.family;
    let x0 = parse_point(x0, f.dimension())?;
    f.check_domain(&x0).map_err(|e| format!("x0: {e}"))?;
    let h = Expression::parse(hamiltonian, f.dimension()).map_err(|e| format!("hamiltonian: {e}"))?;
    let method = Method::parse(method).ok_or_else(|| format!("unknown method '{method}'"))?;
    if !(t_end > 0.0 && dt > 0.0 && tol > 0.0) || (t_end / dt) > 200_000.0 {
        return Err("t_end, dt and tol must be positive with at most 200000 steps".into());
    }
    let sys = PoissonSystem::new(f, h, &x0).map_err(|e| format!("hamiltonian: {e}"))?;
    let opts = IntegrateOptions { method, t_end, dt, tol };
    let (traj, stop) = match sys.integrate(&x0, &opts) {
        Ok(t) => (t, None),
        Err(genpoisson::dynamics::DynamicsError::DomainExit { partial, message, time, .. }) => {
            (*partial, Some(format!("domain exit at t = {time}: {message}")))
        }
        Err(genpoisson::dynamics::DynamicsError::StepUnderflow { partial, time }) => {
            (*partial, Some(format!("step size underflow at t = {time}")))
        }
        Err(e) => return Err(e.to_string()),
    };
    Ok(json!({
        "times": traj.times,
        "states": traj.states,
        "h": traj.h_values,
        "d": traj.d_values,
        "h_drift": traj.h_drift(),
        "d_drift": traj.d_drift(),
        "accepted": traj.meta.accepted,
        "rejected": traj.meta.rejected,
        "stopped": stop,
    }))
}

/// Samples `ψ`, `ξ` and `φ∘ξ` for one coordinate of an example on its
/// sampling range.
pub fn chart_curves_json(name: &str, r: f64, coord: usize, samples: usize) -> Result<Value, String> {
    let p = preset(name, r)?;
    let psis = p.family.psis();
    let psi = psis
        .get(coord.wrapping_sub(1))
        .ok_or_else(|| format!("coordinate must be in 1..={}", psis.len()))?;
    let samples = samples.clamp(2, 2000);
    let (lo, hi) = psi.domain().sampling_range(5.0, 0.02);
    let mut w = Vec::with_capacity(samples);
    let mut ps = Vec::with_capacity(samples);
    let mut xs = Vec::with_capacity(samples);
    let mut back = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
        let xi = psi.xi(t).map_err(|e| e.to_string())?;
        w.push(t);
        ps.push(psi.psi(t).map_err(|e| e.to_string())?);
        xs.push(xi);
        back.push(psi.phi(xi).map_err(|e| e.to_string())?);
    }
    let err = w.iter().zip(&back).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
    Ok(json!({
        "description": psi.describe(),
        "xi_formula": psi.xi_formula("w"),
        "anchor": psi.anchor(),
        "w": w,
        "psi": ps,
        "xi": xs,
        "phi_of_xi": back,
        "max_round_trip": err,
    }))
}

#[wasm_bindgen]
pub fn structure_at(name: &str, r: f64, x: &str) -> String {
    respond(structure_at_json(name, r, x))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn integrate(name: &str, r: f64, hamiltonian: &str, x0: &str, method: &str, t_end: f64, dt: f64, tol: f64) -> String {
    respond(integrate_json(name, r, hamiltonian, x0, method, t_end, dt, tol))
}

#[wasm_bindgen]
pub fn chart_curves(name: &str, r: f64, coord: usize, samples: usize) -> String {
    respond(chart_curves_json(name, r, coord, samples))
}

#[wasm_bindgen]
pub fn example_defaults(name: &str) -> String {
    respond(preset(name, 1.0).map(|p| json!({ "hamiltonian": p.hamiltonian, "x0": p.x0, "n": p.family.dimension() })))
}
