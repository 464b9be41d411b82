//! Oscillation over parabolic cylinders, the dyadic decay recursion, Hölder
//! fits, and the boundary / short-time growth constants.

use rayon::prelude::*;
use serde::Serialize;

use crate::cert::{self, Certification, Verdict};
use crate::error::{Error, Result};
use crate::field::{ExponentPair, SpaceTimeField, TimeGrid};
use crate::grid::{dist, SpaceGrid};

/// Decay threshold for the fitted `delta`.
pub const DELTA_MIN: f64 = 0.01;
/// Smallest number of usable dyadic levels for a decay verdict.
pub const MIN_LEVELS: usize = 3;
/// Smallest number of spatial nodes in a usable cylinder.
pub const MIN_CYLINDER_NODES: usize = 4;

/// `9 a0 / (32 d)`.
pub fn beta(a0: f64, dim: usize) -> f64 {
    9.0 * a0 / (32.0 * dim as f64)
}

/// `(t - beta R^2 16^{-k}, t] x B(x, R 4^{-k})` with `t` the time of level `end_level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicCylinder {
    pub center: usize,
    pub radius: f64,
    pub end_level: usize,
    pub beta: f64,
    pub level: u32,
}

impl ParabolicCylinder {
    pub fn new(center: usize, radius: f64, end_level: usize, beta: f64) -> Self {
        ParabolicCylinder {
            center,
            radius,
            end_level,
            beta,
            level: 0,
        }
    }

    pub fn at_level(&self, k: u32) -> Self {
        ParabolicCylinder { level: k, ..*self }
    }

    pub fn spatial_radius(&self) -> f64 {
        self.radius * 0.25f64.powi(self.level as i32)
    }

    pub fn duration(&self) -> f64 {
        self.beta * self.spatial_radius().powi(2)
    }

    /// Levels `n` with `t_n` in the half-open window.
    pub fn time_levels(&self, tg: &TimeGrid) -> std::ops::RangeInclusive<usize> {
        let t = tg.time(self.end_level);
        let start = t - self.duration();
        let first = ((start / tg.dt) * (1.0 + 1e-12)).floor() as i64 + 1;
        let first = first.max(0) as usize;
        first.min(self.end_level)..=self.end_level
    }
}

/// `f` with everything outside the closed cylinder set to zero.
pub fn restrict_to_cylinder(grid: &SpaceGrid, tg: &TimeGrid, f: &SpaceTimeField, cyl: &ParabolicCylinder) -> SpaceTimeField {
    let x = grid.nodes[cyl.center];
    let r = cyl.spatial_radius() * (1.0 + 1e-12);
    let window = cyl.time_levels(tg);
    let mut out = SpaceTimeField::new(grid.len());
    for n in 0..f.n_levels() {
        let level: Vec<f64> = if window.contains(&n) {
            grid.nodes.iter().zip(f.level(n)).map(|(p, v)| if dist(*p, x) <= r { *v } else { 0.0 }).collect()
        } else {
            vec![0.0; grid.len()]
        };
        out.push(&level);
    }
    out
}

/// Lattice points of the closed ball around a node: interior nodes by index,
/// plus the number of lattice points on the boundary (value zero).
#[derive(Debug, Clone)]
pub struct BallStencil {
    pub nodes: Vec<usize>,
    pub boundary_points: usize,
}

pub fn ball_stencil(grid: &SpaceGrid, center: usize, radius: f64) -> BallStencil {
    let [ci, cj] = grid.lattice_position(center);
    let [nx, ny] = grid.lattice_shape();
    let span = (radius / grid.h * (1.0 + 1e-12)).floor() as i64;
    let jspan = if grid.dim == 2 { span } else { 0 };
    let tol = radius * (1.0 + 1e-12);
    let mut nodes = Vec::new();
    let mut boundary_points = 0;
    for dj in -jspan..=jspan {
        for di in -span..=span {
            let r = grid.h * ((di * di + dj * dj) as f64).sqrt();
            if r > tol {
                continue;
            }
            let (i, j) = (ci as i64 + di, cj as i64 + dj);
            if i < 0 || j < 0 || i >= nx as i64 || j >= ny as i64 {
                continue;
            }
            match grid.node_at_lattice(i as usize, j as usize) {
                Some(k) => nodes.push(k),
                None => {
                    let o = grid.lattice_origin();
                    let p = [o[0] + i as f64 * grid.h, o[1] + j as f64 * grid.h];
                    if grid.spec.boundary_distance(p).abs() <= 1e-9 * grid.h {
                        boundary_points += 1;
                    }
                }
            }
        }
    }
    BallStencil { nodes, boundary_points }
}

/// `(min, max)` of `w` over the cylinder, boundary lattice points counting as zero.
pub fn cylinder_extrema(grid: &SpaceGrid, tg: &TimeGrid, w: &SpaceTimeField, cyl: &ParabolicCylinder) -> Result<(f64, f64)> {
    let ball = ball_stencil(grid, cyl.center, cyl.spatial_radius());
    let levels = cyl.time_levels(tg);
    if ball.nodes.len() + ball.boundary_points < MIN_CYLINDER_NODES || levels.clone().count() < 2 {
        return Err(Error::EmptyCylinder(format!(
            "{} nodes, {} levels at radius {}",
            ball.nodes.len() + ball.boundary_points,
            levels.count(),
            cyl.spatial_radius()
        )));
    }
    let (mut lo, mut hi) = if ball.boundary_points > 0 {
        (0.0, 0.0)
    } else {
        (f64::INFINITY, f64::NEG_INFINITY)
    };
    for n in levels {
        let l = w.level(n);
        for &k in &ball.nodes {
            lo = lo.min(l[k]);
            hi = hi.max(l[k]);
        }
    }
    Ok((lo, hi))
}

/// `max - min` of `w` over the grid points of the cylinder.
pub fn oscillation(grid: &SpaceGrid, tg: &TimeGrid, w: &SpaceTimeField, cyl: &ParabolicCylinder) -> Result<f64> {
    let (lo, hi) = cylinder_extrema(grid, tg, w, cyl)?;
    Ok(hi - lo)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationSequence {
    pub radii: Vec<f64>,
    pub o: Vec<f64>,
    pub m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub delta_fit: f64,
    pub cf_fit: f64,
    pub lambda: f64,
    pub alpha_lambda: f64,
    pub eta: f64,
    pub levels: usize,
}

/// Largest `delta` and smallest `C` with `o_{k+1} <= (1 - delta) o_k + budget 4^{-gamma k}`
/// at every level, then `Lambda` and `alpha_Lambda`.
pub fn fit_decay(o: &[f64], gamma: f64, gamma_tilde: f64, budget: f64) -> DecayReport {
    let mut delta = f64::INFINITY;
    for k in 0..o.len().saturating_sub(1) {
        if o[k] > 0.0 {
            let allowance = budget * 4f64.powf(-gamma * k as f64);
            delta = delta.min(1.0 - o[k + 1] / o[k] + allowance / o[k]);
        }
    }
    let delta_fit = if delta.is_finite() { delta.clamp(0.0, 1.0) } else { 1.0 };
    let mut cf_fit = 0.0f64;
    for k in 0..o.len().saturating_sub(1) {
        let excess = o[k + 1] - (1.0 - delta_fit) * o[k];
        cf_fit = cf_fit.max(excess * 4f64.powf(gamma * k as f64));
    }
    let base = 4f64.powf(-gamma).max(1.0 - delta_fit);
    let eta = 0.5 * (1.0 - base);
    let mut lambda = base + eta;
    let mut alpha_lambda = -lambda.ln() / 4f64.ln();
    if alpha_lambda > gamma_tilde {
        lambda = 4f64.powf(-gamma_tilde);
        alpha_lambda = gamma_tilde;
    }
    DecayReport {
        delta_fit,
        cf_fit,
        lambda,
        alpha_lambda,
        eta,
        levels: o.len(),
    }
}

#[derive(Debug, Clone)]
pub struct DecayOutcome {
    pub sequence: OscillationSequence,
    pub report: DecayReport,
    pub verdict: Verdict,
}

impl DecayOutcome {
    pub fn certification(&self) -> Certification {
        Certification::new("decay", self.report.delta_fit, DELTA_MIN, self.verdict)
            .param("levels", self.report.levels)
            .param("cf_fit", cert::finite_or_null(self.report.cf_fit))
            .param("lambda", cert::finite_or_null(self.report.lambda))
            .param("alpha_lambda", cert::finite_or_null(self.report.alpha_lambda))
    }
}

/// Oscillations over the nested cylinders `k = 0, 1, ...` until a cylinder
/// has fewer than four nodes or two time levels, followed by [`fit_decay`].
/// `monotone` is the outcome of the monotonicity precondition on the run.
pub fn dyadic_decay(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    w: &SpaceTimeField,
    base: &ParabolicCylinder,
    exps: &ExponentPair,
    f_norm: f64,
    monotone: bool,
) -> Result<DecayOutcome> {
    let x = grid.nodes[base.center];
    if grid.spec.boundary_distance(x) < base.radius * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "base ball of radius {} leaves the domain",
            base.radius
        )));
    }
    if base.duration() > tg.time(base.end_level) * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter("base cylinder starts before t = 0".into()));
    }
    let mut seq = OscillationSequence {
        radii: Vec::new(),
        o: Vec::new(),
        m: Vec::new(),
    };
    for k in 0.. {
        let cyl = base.at_level(k);
        match cylinder_extrema(grid, tg, w, &cyl) {
            Ok((lo, hi)) => {
                seq.radii.push(cyl.spatial_radius());
                seq.o.push(hi - lo);
                seq.m.push(lo);
            }
            Err(Error::EmptyCylinder(_)) => break,
            Err(e) => return Err(e),
        }
    }
    let budget = base.radius.powf(exps.gamma) * f_norm;
    let report = fit_decay(&seq.o, exps.gamma, exps.gamma_tilde, budget);
    let verdict = if !monotone || seq.o.len() < MIN_LEVELS {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(report.delta_fit >= DELTA_MIN)
    };
    Ok(DecayOutcome {
        sequence: seq,
        report,
        verdict,
    })
}

/// Least-squares line `y = slope x + intercept`; returns the rms residual too.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Slope of `log y` against `log x` over the points with `y > 0`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    if lx.len() < 2 {
        return None;
    }
    Some(linear_fit(&lx, &ly))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub alpha: f64,
    pub seminorm: f64,
    pub fit_residual: f64,
    pub scales: Vec<f64>,
    pub oscillations: Vec<f64>,
}

/// Sampling choices for [`holder_fit`].
#[derive(Debug, Clone, Copy)]
pub struct HolderOptions {
    /// Clock bound `a0` entering the cylinder aspect ratio.
    pub a0: f64,
    /// Count boundary lattice points as zero values.
    pub dirichlet_trace: bool,
    pub max_space_stride: usize,
    pub max_time_samples: usize,
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions {
            a0: 1.0,
            dirichlet_trace: true,
            max_space_stride: 4,
            max_time_samples: 64,
        }
    }
}

fn subsample(n: usize, count: usize) -> Vec<usize> {
    if n <= count {
        return (0..n).collect();
    }
    let mut out: Vec<usize> = (0..count)
        .map(|i| ((i as f64) * (n - 1) as f64 / (count - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Largest oscillation at spatial scale `r` over cylinders `(t - beta r^2, t] x B(x, r)`
/// with `d_x >= r` and `t >= beta r^2`.
fn scale_oscillation(grid: &SpaceGrid, tg: &TimeGrid, w: &SpaceTimeField, r: f64, opts: &HolderOptions) -> f64 {
    let b = beta(opts.a0, grid.dim);
    let dur = b * r * r;
    let first_end = (dur / tg.dt * (1.0 - 1e-12)).ceil() as usize;
    if first_end >= tg.n_levels() {
        return 0.0;
    }
    let ends: Vec<usize> = subsample(tg.n_levels() - first_end, 16)
        .into_iter()
        .map(|i| first_end + i)
        .collect();
    let centers: Vec<usize> = (0..grid.len())
        .filter(|&k| grid.boundary_distance[k] >= r * (1.0 - 1e-12))
        .collect();
    let stencils: Vec<BallStencil> = centers.iter().map(|&c| ball_stencil(grid, c, r)).collect();
    ends.par_iter()
        .map(|&end| {
            let cyl = ParabolicCylinder::new(0, r, end, b);
            let levels = cyl.time_levels(tg);
            let mut lo = vec![f64::INFINITY; grid.len()];
            let mut hi = vec![f64::NEG_INFINITY; grid.len()];
            for n in levels {
                for (k, v) in w.level(n).iter().enumerate() {
                    lo[k] = lo[k].min(*v);
                    hi[k] = hi[k].max(*v);
                }
            }
            let mut best = 0.0f64;
            for s in &stencils {
                let (mut a, mut z) = if opts.dirichlet_trace && s.boundary_points > 0 {
                    (0.0, 0.0)
                } else {
                    (f64::INFINITY, f64::NEG_INFINITY)
                };
                for &k in &s.nodes {
                    a = a.min(lo[k]);
                    z = z.max(hi[k]);
                }
                if z >= a {
                    best = best.max(z - a);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Sample points `(level, position, value)` used by the pair scan.
fn pair_samples(grid: &SpaceGrid, tg: &TimeGrid, w: &SpaceTimeField, opts: &HolderOptions) -> Vec<(f64, [f64; 2], f64)> {
    let [nx, ny] = grid.lattice_shape();
    let per_axis = nx.max(ny);
    let stride = if per_axis <= 33 {
        1
    } else {
        opts.max_space_stride.clamp(1, per_axis.div_ceil(33).max(1))
    };
    let time_count = if grid.dim == 2 {
        opts.max_time_samples.min(16)
    } else {
        opts.max_time_samples
    };
    let levels = subsample(tg.n_levels(), time_count.max(2));
    let o = grid.lattice_origin();
    let mut points = Vec::new();
    for &n in &levels {
        let t = tg.time(n);
        let l = w.level(n);
        for j in (0..ny).step_by(if grid.dim == 2 { stride } else { 1 }) {
            for i in (0..nx).step_by(stride) {
                let p = [o[0] + i as f64 * grid.h, o[1] + j as f64 * grid.h];
                match grid.node_at_lattice(i, j) {
                    Some(k) => points.push((t, p, l[k])),
                    None if opts.dirichlet_trace && grid.spec.boundary_distance(p).abs() <= 1e-9 * grid.h => {
                        points.push((t, p, 0.0))
                    }
                    None => {}
                }
            }
            if opts.dirichlet_trace && grid.dim == 1 {
                // keep both endpoints when the stride skips the last lattice point
                if (nx - 1) % stride != 0 {
                    points.push((t, [o[0] + (nx - 1) as f64 * grid.h, 0.0], 0.0));
                }
            }
        }
    }
    points
}

/// Per sample point, the largest parabolic Hölder quotient
/// `|w(t,x) - w(s,y)| / (|x-y|^alpha + |t-s|^{alpha/2})` against the later samples.
pub fn pair_quotients(grid: &SpaceGrid, tg: &TimeGrid, w: &SpaceTimeField, alpha: f64, opts: &HolderOptions) -> Vec<f64> {
    let pts = pair_samples(grid, tg, w, opts);
    (0..pts.len())
        .into_par_iter()
        .map(|a| {
            let (t, x, u) = pts[a];
            let mut best = 0.0f64;
            for &(s, y, v) in &pts[a + 1..] {
                let d = crate::grid::dist(x, y).powf(alpha) + (t - s).abs().powf(0.5 * alpha);
                if d > 0.0 {
                    best = best.max((u - v).abs() / d);
                }
            }
            best
        })
        .collect()
}

/// Largest quotient over all sampled pairs.
pub fn seminorm(grid: &SpaceGrid, tg: &TimeGrid, w: &SpaceTimeField, alpha: f64, opts: &HolderOptions) -> f64 {
    pair_quotients(grid, tg, w, alpha, opts).into_iter().fold(0.0, f64::max)
}

/// Exponent from the log-log slope of the largest oscillation against the
/// scale, then the seminorm at that exponent.
pub fn holder_fit(grid: &SpaceGrid, tg: &TimeGrid, w: &SpaceTimeField, opts: &HolderOptions) -> Result<HolderEstimate> {
    w.check_finite()?;
    let r_max = grid.spec.inradius() / 8.0;
    let mut scales = Vec::new();
    let mut r = r_max;
    while r >= 2.0 * grid.h * (1.0 - 1e-12) {
        scales.push(r);
        r *= 0.5;
    }
    if scales.len() < 2 {
        return Err(Error::TooCoarse(format!("fewer than two scales between 2h and {r_max}")));
    }
    let oscillations: Vec<f64> = scales.iter().map(|&r| scale_oscillation(grid, tg, w, r, opts)).collect();
    let (alpha, fit_residual) = match loglog_slope(&scales, &oscillations) {
        None => {
            return Ok(HolderEstimate {
                alpha: 1.0,
                seminorm: 0.0,
                fit_residual: 0.0,
                scales,
                oscillations,
            })
        }
        Some((slope, _, res)) => (slope.clamp(1e-3, 1.0), res),
    };
    let seminorm = seminorm(grid, tg, w, alpha, opts);
    Ok(HolderEstimate {
        alpha,
        seminorm,
        fit_residual,
        scales,
        oscillations,
    })
}

/// PASS iff both fits have `alpha > 0` and the normalized seminorms agree within 2x.
pub fn holder_certification(coarse: &HolderEstimate, coarse_norm: f64, fine: &HolderEstimate, fine_norm: f64, monotone: bool) -> Certification {
    let c = coarse.seminorm / coarse_norm;
    let f = fine.seminorm / fine_norm;
    let mut row = cert::stability("holder", c, f)
        .param("alpha_coarse", coarse.alpha)
        .param("alpha_fine", fine.alpha);
    if !(coarse.alpha > 0.0 && fine.alpha > 0.0) {
        row.verdict = Verdict::Fail;
    }
    if !monotone && row.verdict == Verdict::Pass {
        row.verdict = Verdict::Inconclusive;
    }
    row
}

/// `sup w / (d_x^{gamma_tilde} * norm)`; zero for `w = 0`.
pub fn boundary_decay_constant(grid: &SpaceGrid, w: &SpaceTimeField, exps: &ExponentPair, input_norm: f64) -> f64 {
    let mut q = 0.0f64;
    for l in w.levels() {
        for (k, v) in l.iter().enumerate() {
            if *v > 0.0 {
                q = q.max(v / grid.boundary_distance[k].powf(exps.gamma_tilde));
            }
        }
    }
    if q == 0.0 {
        0.0
    } else {
        q / input_norm
    }
}

/// `sup_{t > 0} |w(t,x) - w(0,x)| / (t^{min(1,gamma)/2} * norm)`.
pub fn short_time_constant(tg: &TimeGrid, w: &SpaceTimeField, exps: &ExponentPair, input_norm: f64) -> f64 {
    let e = 0.5 * exps.gamma.min(1.0);
    let w0 = w.level(0);
    let mut q = 0.0f64;
    for n in 1..w.n_levels() {
        let scale = tg.time(n).powf(e);
        for (a, b) in w.level(n).iter().zip(w0) {
            q = q.max((a - b).abs() / scale);
        }
    }
    if q == 0.0 {
        0.0
    } else {
        q / input_norm
    }
}

/// Case split for a pair of space-time points in the regularity argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairCase {
    /// `min(d_x, d_y) <= 2 |x - y|`
    NearBoundary,
    /// `min(sqrt t, sqrt s) <= |x - y|`
    SmallTime,
    /// both points far from the boundary and from `t = 0` relative to `|x - y|`
    InteriorLargeTime,
}

/// Variant requiring both times small for the second case. Returns `None`
/// for pairs it leaves uncovered.
pub fn classify_pair_literal(r: f64, t: f64, s: f64, dx: f64, dy: f64) -> Option<PairCase> {
    if dx.min(dy) <= 2.0 * r {
        Some(PairCase::NearBoundary)
    } else if t.sqrt() <= r && s.sqrt() <= r {
        Some(PairCase::SmallTime)
    } else if t.sqrt() > r && s.sqrt() > r {
        Some(PairCase::InteriorLargeTime)
    } else {
        None
    }
}

/// Exhaustive version: one small time suffices for the second case.
pub fn classify_pair(r: f64, t: f64, s: f64, dx: f64, dy: f64) -> PairCase {
    if dx.min(dy) <= 2.0 * r {
        PairCase::NearBoundary
    } else if t.min(s).sqrt() <= r {
        PairCase::SmallTime
    } else {
        PairCase::InteriorLargeTime
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;

    fn unit(h: f64) -> SpaceGrid {
        SpaceGrid::new(DomainSpec::unit_interval(), h).unwrap()
    }

    #[test]
    fn constant_field_has_zero_oscillation() {
        let g = unit(1.0 / 32.0);
        let tg = TimeGrid::new(0.1, 0.01).unwrap();
        let w = SpaceTimeField::constant(&g, &tg, 3.0);
        let c = g.nearest_node([0.5, 0.0]);
        let cyl = ParabolicCylinder::new(c, 0.25, tg.n_steps, 1.0);
        assert_eq!(oscillation(&g, &tg, &w, &cyl).unwrap(), 0.0);
    }

    #[test]
    fn linear_field_oscillation() {
        let h = 1.0 / 64.0;
        let g = unit(h);
        let tg = TimeGrid::new(0.1, 0.01).unwrap();
        let w = SpaceTimeField::sample(&g, &tg, |_, x| x[0]);
        let cyl = ParabolicCylinder::new(g.nearest_node([0.5, 0.0]), 0.25, tg.n_steps, 0.5);
        let o = oscillation(&g, &tg, &w, &cyl).unwrap();
        assert!((o - 0.5).abs() <= h);
    }

    #[test]
    fn tiny_cylinder_is_rejected() {
        let g = unit(1.0 / 16.0);
        let tg = TimeGrid::new(0.1, 0.01).unwrap();
        let w = SpaceTimeField::constant(&g, &tg, 0.0);
        let cyl = ParabolicCylinder::new(8, 0.05, tg.n_steps, 1.0);
        assert!(matches!(oscillation(&g, &tg, &w, &cyl), Err(Error::EmptyCylinder(_))));
    }

    #[test]
    fn oscillation_matches_exhaustive_enumeration() {
        let h = 1.0 / 32.0;
        let g = SpaceGrid::new(DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0]), h).unwrap();
        let tg = TimeGrid::new(0.08, 0.01).unwrap();
        let w = SpaceTimeField::sample(&g, &tg, |t, p| (7.0 * p[0] + 3.0 * t).sin() * (5.0 * p[1] - t).cos() + p[0] * p[1]);
        let center = g.nearest_node([0.5, 0.5]);
        // radius 8h: the ball fits in the 17 x 17 lattice block around the centre
        let cyl = ParabolicCylinder::new(center, 8.0 * h, tg.n_steps, 0.08 / (64.0 * h * h) * (1.0 + 1e-9));
        assert_eq!(cyl.time_levels(&tg).count(), 9);
        let [ci, cj] = g.lattice_position(center);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for n in 0..9 {
            for j in cj - 8..=cj + 8 {
                for i in ci - 8..=ci + 8 {
                    let (di, dj) = (i as f64 - ci as f64, j as f64 - cj as f64);
                    if di * di + dj * dj <= 64.0 {
                        let v = w.at(n, g.node_at_lattice(i, j).unwrap());
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
        }
        let o = oscillation(&g, &tg, &w, &cyl).unwrap();
        assert!((o - (hi - lo)).abs() < 1e-14);
    }

    #[test]
    fn synthetic_geometric_sequence() {
        let o: Vec<f64> = (0..8).map(|k| 0.8f64.powi(k)).collect();
        let r = fit_decay(&o, 2.0, 0.9, 0.0);
        assert!((r.delta_fit - 0.2).abs() < 1e-12);
        assert!(r.cf_fit.abs() < 1e-12);
        assert!(r.lambda < 1.0 && r.alpha_lambda > 0.0 && r.alpha_lambda <= 0.9);
        assert!((r.alpha_lambda + r.lambda.ln() / 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_sequence_passes_trivially() {
        let r = fit_decay(&[0.0; 5], 2.0, 0.9, 0.0);
        assert_eq!(r.delta_fit, 1.0);
        assert_eq!(r.cf_fit, 0.0);
    }

    #[test]
    fn forcing_budget_raises_delta() {
        let o = [1.0, 0.99, 0.98];
        let without = fit_decay(&o, 2.0, 0.9, 0.0);
        let with = fit_decay(&o, 2.0, 0.9, 0.5);
        assert!(with.delta_fit > without.delta_fit);
    }

    #[test]
    fn alpha_capped_by_gamma_tilde() {
        let r = fit_decay(&[1.0, 1e-6, 1e-12], 2.0, 0.3, 0.0);
        assert!((r.alpha_lambda - 0.3).abs() < 1e-15);
        assert!((r.lambda - 4f64.powf(-0.3)).abs() < 1e-15);
    }

    #[test]
    fn decay_levels_match_oscillation() {
        let h = 1.0 / 128.0;
        let g = unit(h);
        let tg = TimeGrid::new(0.05, 1e-4).unwrap();
        let w = SpaceTimeField::sample(&g, &tg, |t, x| t * (3.0 * x[0]).sin());
        let base = ParabolicCylinder::new(g.nearest_node([0.5, 0.0]), 0.4, tg.n_steps, beta(1.0, 1));
        let out = dyadic_decay(&g, &tg, &w, &base, &ExponentPair::sup(1), 0.0, true).unwrap();
        for (k, o) in out.sequence.o.iter().enumerate() {
            let direct = oscillation(&g, &tg, &w, &base.at_level(k as u32)).unwrap();
            assert!((o - direct).abs() <= 1e-14);
        }
        assert!(out.sequence.o.windows(2).all(|p| p[1] <= p[0]));
        assert!(out.sequence.m.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn decay_rejects_base_outside_domain() {
        let g = unit(1.0 / 64.0);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let w = SpaceTimeField::constant(&g, &tg, 0.0);
        let base = ParabolicCylinder::new(g.nearest_node([0.2, 0.0]), 0.4, tg.n_steps, beta(1.0, 1));
        assert!(dyadic_decay(&g, &tg, &w, &base, &ExponentPair::sup(1), 0.0, true).is_err());
    }

    #[test]
    fn decay_invariant_under_shift() {
        let g = unit(1.0 / 128.0);
        let tg = TimeGrid::new(0.05, 1e-4).unwrap();
        let w = SpaceTimeField::sample(&g, &tg, |t, x| t + (6.0 * x[0]).cos() * t.sqrt());
        let shifted = w.map(|v| v + 5.0);
        let base = ParabolicCylinder::new(g.nearest_node([0.5, 0.0]), 0.4, tg.n_steps, beta(1.0, 1));
        let e = ExponentPair::sup(1);
        let a = dyadic_decay(&g, &tg, &w, &base, &e, 1.0, true).unwrap();
        let b = dyadic_decay(&g, &tg, &shifted, &base, &e, 1.0, true).unwrap();
        for (x, y) in a.sequence.o.iter().zip(&b.sequence.o) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.report.delta_fit - b.report.delta_fit).abs() < 1e-9);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let xs: Vec<f64> = (1..6).map(|k| 0.5f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.7)).collect();
        let (s, b, res) = loglog_slope(&xs, &ys).unwrap();
        assert!((s - 0.7).abs() < 1e-12 && (b - 3f64.ln()).abs() < 1e-12 && res < 1e-12);
    }

    #[test]
    fn smooth_field_is_nearly_lipschitz() {
        let h = 1.0 / 256.0;
        let g = unit(h);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let w = SpaceTimeField::sample(&g, &tg, |_, x| x[0] * (1.0 - x[0]));
        let est = holder_fit(&g, &tg, &w, &HolderOptions::default()).unwrap();
        assert!(est.alpha > 0.9, "alpha={}", est.alpha);
        assert!(est.seminorm <= 1.0 + 4.0 * h, "seminorm={}", est.seminorm);
    }

    #[test]
    fn square_root_profile_exponent() {
        let g = unit(1.0 / 256.0);
        let tg = TimeGrid::new(0.05, 1e-3).unwrap();
        let w = SpaceTimeField::sample(&g, &tg, |_, x| x[0].max(0.0).sqrt().min((1.0 - x[0]).max(0.0).sqrt()));
        let est = holder_fit(&g, &tg, &w, &HolderOptions::default()).unwrap();
        assert!((est.alpha - 0.5).abs() < 0.05, "alpha={}", est.alpha);
    }

    #[test]
    fn constant_field_is_degenerate() {
        let g = unit(1.0 / 64.0);
        let tg = TimeGrid::new(0.05, 1e-3).unwrap();
        let w = SpaceTimeField::constant(&g, &tg, 0.0);
        let est = holder_fit(&g, &tg, &w, &HolderOptions::default()).unwrap();
        assert_eq!((est.alpha, est.seminorm), (1.0, 0.0));
    }

    #[test]
    fn holder_fit_shift_and_scale() {
        let g = unit(1.0 / 128.0);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let w = SpaceTimeField::sample(&g, &tg, |t, x| (t + 0.01).sqrt() * (x[0] * (1.0 - x[0])).powf(0.6));
        let opts = HolderOptions {
            dirichlet_trace: false,
            ..HolderOptions::default()
        };
        let base = holder_fit(&g, &tg, &w, &opts).unwrap();
        let shifted = holder_fit(&g, &tg, &w.map(|v| v + 2.0), &opts).unwrap();
        let scaled = holder_fit(&g, &tg, &w.map(|v| 3.0 * v), &opts).unwrap();
        assert!((base.alpha - shifted.alpha).abs() < 1e-9);
        assert!((base.alpha - scaled.alpha).abs() < 1e-9);
        assert!((scaled.seminorm - 3.0 * base.seminorm).abs() < 1e-9 * scaled.seminorm);
    }

    #[test]
    fn boundary_constant_of_principal_mode() {
        let g = unit(1.0 / 64.0);
        let tg = TimeGrid::new(0.1, 0.01).unwrap();
        let phi = g.map(|x| (std::f64::consts::PI * x[0]).sin());
        let w = SpaceTimeField::sample(&g, &tg, |_, x| (std::f64::consts::PI * x[0]).sin());
        for gt in [0.3, 0.9, 1.0] {
            let mut e = ExponentPair::sup(1);
            e.gamma_tilde = gt;
            let q = boundary_decay_constant(&g, &w, &e, 1.0);
            assert!(q.is_finite() && q <= std::f64::consts::PI);
        }
        assert!(phi.iter().all(|v| *v > 0.0));
        let zero = SpaceTimeField::constant(&g, &tg, 0.0);
        assert_eq!(boundary_decay_constant(&g, &zero, &ExponentPair::sup(1), 0.0), 0.0);
    }

    #[test]
    fn short_time_of_smooth_decay() {
        let pi = std::f64::consts::PI;
        let g = unit(1.0 / 64.0);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let w = SpaceTimeField::sample(&g, &tg, |t, x| (-pi * pi * t).exp() * (pi * x[0]).sin());
        let q = short_time_constant(&tg, &w, &ExponentPair::sup(1), 1.0);
        // |w - w0| <= pi^2 t <= pi^2 sqrt(T) sqrt(t)
        assert!(q <= pi * pi * 0.1f64.sqrt());
    }

    #[test]
    fn literal_partition_has_a_gap() {
        assert_eq!(classify_pair_literal(0.1, 0.5, 0.001, 0.4, 0.4), None);
        assert_eq!(classify_pair(0.1, 0.5, 0.001, 0.4, 0.4), PairCase::SmallTime);
    }

    #[test]
    fn partition_is_exhaustive_on_grid() {
        let g = unit(1.0 / 16.0);
        let tg = TimeGrid::new(0.25, 1.0 / 64.0).unwrap();
        let mut seen = std::collections::HashSet::new();
        for a in 0..g.len() {
            for b in 0..g.len() {
                let r = g.distance(a, b);
                let (dx, dy) = (g.boundary_distance[a], g.boundary_distance[b]);
                for t in tg.times() {
                    for s in tg.times() {
                        let case = classify_pair(r, t, s, dx, dy);
                        match case {
                            PairCase::NearBoundary => assert!(dx.min(dy) <= 2.0 * r),
                            PairCase::SmallTime => assert!(dx.min(dy) > 2.0 * r && t.min(s).sqrt() <= r),
                            PairCase::InteriorLargeTime => {
                                assert!(dx.min(dy) > 2.0 * r && t.sqrt() > r && s.sqrt() > r)
                            }
                        }
                        if let Some(lit) = classify_pair_literal(r, t, s, dx, dy) {
                            assert_eq!(lit, case);
                        }
                        seen.insert(case);
                    }
                }
            }
        }
        assert_eq!(seen.len(), 3);
    }
}
