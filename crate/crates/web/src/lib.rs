//! Three interactive operations for the static page in `www/`: a heat
//! kernel slice against its Gaussian comparator, a rough-clock solve with
//! the two constant-clock comparators, and the dyadic oscillation sequence.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use roughcert::field::{mixed_norm, ExponentPair, SpaceTimeField, TimeGrid};
use roughcert::grid::{DomainSpec, SpaceGrid};
use roughcert::heat_kernel::{dirichlet_kernel, gaussian, gaussian_comparator, SpectralBasis};
use roughcert::regularity::{self, ParabolicCylinder};
use roughcert::rough::{self, RoughCoefficient, RoughProblem};
use roughcert::Result;

/// Largest number of lattice intervals the page may request.
pub const MAX_INTERVALS: usize = 512;

fn spacing(n: usize) -> Result<f64> {
    if !(4..=MAX_INTERVALS).contains(&n) {
        return Err(roughcert::Error::InvalidParameter(format!("intervals must lie in 4..={MAX_INTERVALS}, got {n}")));
    }
    Ok(1.0 / n as f64)
}

#[derive(Debug, Serialize)]
pub struct KernelProfile {
    pub x: Vec<f64>,
    pub kernel: Vec<f64>,
    pub comparator: Vec<f64>,
    pub mass: f64,
}

/// `Gamma(t, x, 0)` on `(-R, R)` with `2R` split into `intervals`, and the
/// comparator `p(t, |x|) - sup_{s<=t} p(s, 3R/4)`.
pub fn kernel_profile(intervals: usize, radius: f64, t: f64) -> Result<KernelProfile> {
    let h = 2.0 * radius * spacing(intervals)?;
    let grid = SpaceGrid::new(DomainSpec::interval(-radius, radius), h)?;
    let basis = SpectralBasis::compute(&grid)?;
    let source = grid.nearest_node([0.0, 0.0]);
    let slice = dirichlet_kernel(&grid, &basis, t, source)?;
    let far = gaussian_comparator(t, 0.75 * radius, 1)?.running_sup;
    let x: Vec<f64> = grid.nodes.iter().map(|p| p[0]).collect();
    let comparator = x.iter().map(|&xi| gaussian(t, xi.abs(), 1) - far).collect();
    Ok(KernelProfile {
        mass: slice.mass(&grid),
        kernel: slice.values,
        comparator,
        x,
    })
}

#[derive(Debug, Serialize)]
pub struct SandwichProfile {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub verdict: String,
}

fn rough_problem(intervals: usize, horizon: f64, c0: f64, omega: f64) -> Result<RoughProblem> {
    let h = spacing(intervals)?;
    let grid = SpaceGrid::new(DomainSpec::unit_interval(), h)?;
    let tg = TimeGrid::new(horizon, (h * h).max(horizon / 2000.0))?;
    let f = SpaceTimeField::constant(&grid, &tg, 1.0);
    let w0 = vec![0.0; grid.len()];
    RoughProblem::new(grid, tg, RoughCoefficient::oscillating(1.0, c0, omega, 3.0), f, w0)
}

/// Final-time profiles of `w`, `v_{a0 c0}` and `v_{a0}` on `(0,1)` with unit forcing.
pub fn sandwich_profile(intervals: usize, horizon: f64, c0: f64, omega: f64) -> Result<SandwichProfile> {
    let problem = rough_problem(intervals, horizon, c0, omega)?;
    let sol = rough::solve_rough(&problem)?;
    let upper = rough::solve_const(&problem, 1.0)?;
    let lower = rough::solve_const(&problem, c0)?;
    let report = rough::sandwich_check(&sol, &problem, 1e-12)?;
    Ok(SandwichProfile {
        x: problem.grid.nodes.iter().map(|p| p[0]).collect(),
        w: sol.w.last().to_vec(),
        lower: lower.w.last().to_vec(),
        upper: upper.w.last().to_vec(),
        verdict: report.verdict.as_str().to_string(),
    })
}

#[derive(Debug, Serialize)]
pub struct DecayProfile {
    pub radii: Vec<f64>,
    pub oscillations: Vec<f64>,
    pub delta_fit: f64,
    pub slope: Option<f64>,
    pub verdict: String,
}

/// Oscillations over cylinders of radius `0.4 * 4^{-k}` centered at `x = 1/2`
/// at the final time of the same rough run.
pub fn decay_profile(intervals: usize, horizon: f64, c0: f64, omega: f64) -> Result<DecayProfile> {
    let problem = rough_problem(intervals, horizon, c0, omega)?;
    let sol = rough::solve_rough(&problem)?;
    let (grid, tg) = (&problem.grid, &problem.time);
    let exps = ExponentPair::sup(1);
    let b = regularity::beta(1.0, 1);
    let end = tg.n_levels() - 1;
    let radius = 0.4f64.min((tg.time(end) / b).sqrt());
    let base = ParabolicCylinder::new(grid.nearest_node([0.5, 0.0]), radius, end, b);
    let local = regularity::restrict_to_cylinder(grid, tg, &problem.forcing, &base);
    let f_norm = mixed_norm(&local, exps.p, exps.q, grid, tg)?;
    let monotone = rough::monotonicity_check(&sol).passed;
    let out = regularity::dyadic_decay(grid, tg, &sol.w, &base, &exps, f_norm, monotone)?;
    Ok(DecayProfile {
        slope: regularity::loglog_slope(&out.sequence.radii, &out.sequence.o).map(|f| f.0),
        radii: out.sequence.radii,
        oscillations: out.sequence.o,
        delta_fit: out.report.delta_fit,
        verdict: out.verdict.as_str().to_string(),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = kernelProfile)]
pub fn kernel_profile_js(intervals: usize, radius: f64, t: f64) -> std::result::Result<String, JsError> {
    to_js(kernel_profile(intervals, radius, t))
}

#[wasm_bindgen(js_name = sandwichProfile)]
pub fn sandwich_profile_js(intervals: usize, horizon: f64, c0: f64, omega: f64) -> std::result::Result<String, JsError> {
    to_js(sandwich_profile(intervals, horizon, c0, omega))
}

#[wasm_bindgen(js_name = decayProfile)]
pub fn decay_profile_js(intervals: usize, horizon: f64, c0: f64, omega: f64) -> std::result::Result<String, JsError> {
    to_js(decay_profile(intervals, horizon, c0, omega))
}
