//! Browser bindings: TV curves, partition pictures and the `f` heat map.
//!
//! Inputs use the same JSON as the command-line files.

use serde_json::json;
use wasm_bindgen::prelude::*;

use torus_walk::fourier::{bad_set_w, CharacterCycles, CharacterSquares};
use torus_walk::hyperbolic::HyperbolicSystem;
use torus_walk::io::{parse_matrix, parse_measure};
use torus_walk::lattice::invariant_subgroup;
use torus_walk::svg::{partition_svg as draw, SvgOptions};
use torus_walk::symbolic::{build_partition_for, classify_rectangles, widest_cross_partition};
use torus_walk::walk::{entropy_lower_bound, Evolution, LowerBoundMode};

/// The demo keeps exact runs small enough for a page.
const MAX_STATES: u128 = 1 << 20;

fn tv_curve_json(matrix: &str, measure: &str, n: u32, t_max: u32) -> Result<String, String> {
    let a = parse_matrix(matrix).map_err(|e| e.to_string())?;
    let mu = parse_measure(measure).map_err(|e| e.to_string())?;
    let n = u64::from(n);
    let mut evo = Evolution::with_cap(&a, &mu, n, MAX_STATES).map_err(|e| e.to_string())?;
    let cycles = CharacterCycles::with_cap(&mu, &a, n, MAX_STATES).map_err(|e| e.to_string())?;
    let (mut tv, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for t in 0..=t_max as usize {
        evo.advance_to(t);
        tv.push(evo.tv_to_uniform());
        lower.push(entropy_lower_bound(&mu, n, a.dim(), t, LowerBoundMode::Derived).clamped);
        upper.push(cycles.bound(t).tv_bound.min(1.0));
    }
    Ok(json!({ "tv": tv, "lower": lower, "upper": upper }).to_string())
}

fn partition_picture(matrix: &str, measure: &str) -> Result<String, String> {
    let a = parse_matrix(matrix).map_err(|e| e.to_string())?;
    if measure.trim().is_empty() {
        let system = HyperbolicSystem::new(&a).map_err(|e| e.to_string())?;
        let p = build_partition_for(&system, system.expansiveness_constant()).map_err(|e| e.to_string())?;
        return Ok(draw(&p.rectangles, &SvgOptions::default()));
    }
    let mu = parse_measure(measure).map_err(|e| e.to_string())?;
    let h = invariant_subgroup(&a, &mu).map_err(|e| e.to_string())?;
    let w = bad_set_w(&h).map_err(|e| e.to_string())?;
    let system = HyperbolicSystem::new(&a.transpose()).map_err(|e| e.to_string())?;
    let delta0 = system.expansiveness_constant().min(w.min_separation(&system.norm) / (1.0 + system.norm.forward_norm));
    let points = w.points_f64();
    let p = widest_cross_partition(&system, &points, delta0, 4.0)
        .or_else(|_| build_partition_for(&system, 0.99 * delta0))
        .map_err(|e| e.to_string())?;
    let c = classify_rectangles(&p, &w, &system).map_err(|e| e.to_string())?;
    Ok(draw(&p.rectangles, &SvgOptions { classification: Some(&c), marks: points, ..Default::default() }))
}

/// `f` on a `resolution²` grid of cell centres, row by row from the top.
fn heatmap_values(matrix: &str, measure: &str, resolution: u32) -> Result<Vec<f64>, String> {
    let a = parse_matrix(matrix).map_err(|e| e.to_string())?;
    let mu = parse_measure(measure).map_err(|e| e.to_string())?;
    if a.dim() != 2 || mu.dim() != 2 {
        return Err("the heat map needs d = 2".into());
    }
    let chars = CharacterSquares::new(&mu, &a);
    let r = resolution.clamp(1, 512) as usize;
    let h = 1.0 / r as f64;
    let mut out = Vec::with_capacity(r * r);
    for row in 0..r {
        let y = 1.0 - (row as f64 + 0.5) * h;
        for col in 0..r {
            out.push(chars.f_min(&[(col as f64 + 0.5) * h, y]));
        }
    }
    Ok(out)
}

/// JSON `{tv, lower, upper}` for `t = 0..=t_max`.
#[wasm_bindgen]
pub fn tv_curve(matrix: &str, measure: &str, n: u32, t_max: u32) -> Result<String, JsError> {
    tv_curve_json(matrix, measure, n, t_max).map_err(|e| JsError::new(&e))
}

/// SVG of a Markov partition; with a measure, the partition of the bound
/// pipeline with rectangles meeting the bad set in red.
#[wasm_bindgen]
pub fn partition_svg(matrix: &str, measure: &str) -> Result<String, JsError> {
    partition_picture(matrix, measure).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fourier_heatmap(matrix: &str, measure: &str, resolution: u32) -> Result<Vec<f64>, JsError> {
    heatmap_values(matrix, measure, resolution).map_err(|e| JsError::new(&e))
}
