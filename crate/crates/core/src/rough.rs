//! Implicit Euler solver for `a(t,x) dw/dt - Lw = f` with homogeneous
//! Dirichlet data, the constant-clock comparators `v_c`, and the comparison
//! certifications built on them.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cert::{Certification, Verdict};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SpaceTimeField, TimeGrid};
use crate::grid::SpaceGrid;
use crate::linalg::{self, BandCholesky};

/// How the coefficient is sampled on the space-time grid.
#[derive(Debug, Clone)]
pub enum CoefficientProfile {
    Constant(f64),
    /// `a0 (1 + (c0 - 1) s)` with `s = (1 + sin(omega_t t + phase) sin(k pi x) sin(k pi y)) / 2`.
    Oscillating { omega_t: f64, wavenumber: f64, phase: f64 },
    /// Piecewise constant on a `cells x cells` space-time checkerboard with
    /// values drawn uniformly in `[a0, c0 a0]`.
    Checkerboard { seed: u64, space_cells: usize, time_cells: usize },
    /// Pre-sampled values, one per (level, node).
    Sampled(SpaceTimeField),
}

/// Measurable coefficient with two-sided bounds `a0 <= a <= c0 a0`.
#[derive(Debug, Clone)]
pub struct RoughCoefficient {
    pub a0: f64,
    pub c0: f64,
    pub profile: CoefficientProfile,
}

impl RoughCoefficient {
    pub fn constant(value: f64) -> Self {
        RoughCoefficient {
            a0: value,
            c0: 1.0,
            profile: CoefficientProfile::Constant(value),
        }
    }

    pub fn oscillating(a0: f64, c0: f64, omega_t: f64, wavenumber: f64) -> Self {
        RoughCoefficient {
            a0,
            c0,
            profile: CoefficientProfile::Oscillating {
                omega_t,
                wavenumber,
                phase: 0.0,
            },
        }
    }

    pub fn checkerboard(a0: f64, c0: f64, seed: u64, space_cells: usize, time_cells: usize) -> Self {
        RoughCoefficient {
            a0,
            c0,
            profile: CoefficientProfile::Checkerboard {
                seed,
                space_cells,
                time_cells,
            },
        }
    }

    /// Sample every (level, node) and assert the bounds.
    pub fn sample(&self, grid: &SpaceGrid, tg: &TimeGrid) -> Result<SpaceTimeField> {
        let (a0, c0) = (self.a0, self.c0);
        if !(a0 > 0.0 && c0 >= 1.0) {
            return Err(Error::InvalidParameter(format!("need a0 > 0, c0 >= 1 (a0={a0}, c0={c0})")));
        }
        let field = match &self.profile {
            CoefficientProfile::Constant(v) => SpaceTimeField::constant(grid, tg, *v),
            CoefficientProfile::Oscillating {
                omega_t,
                wavenumber,
                phase,
            } => {
                let pi = std::f64::consts::PI;
                let dim = grid.dim;
                SpaceTimeField::sample(grid, tg, |t, x| {
                    let mut s = (omega_t * t + phase).sin() * (wavenumber * pi * x[0]).sin();
                    if dim == 2 {
                        s *= (wavenumber * pi * x[1]).sin();
                    }
                    a0 * (1.0 + (c0 - 1.0) * 0.5 * (1.0 + s))
                })
            }
            CoefficientProfile::Checkerboard {
                seed,
                space_cells,
                time_cells,
            } => {
                let (ns, nt) = ((*space_cells).max(1), (*time_cells).max(1));
                let cells_per_level = if grid.dim == 2 { ns * ns } else { ns };
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let table: Vec<f64> = (0..cells_per_level * nt)
                    .map(|_| a0 * rng.gen_range(1.0..=c0.max(1.0 + f64::EPSILON)).min(c0))
                    .collect();
                let [nx, ny] = grid.lattice_shape();
                let mut field = SpaceTimeField::new(grid.len());
                let mut level = vec![0.0; grid.len()];
                for n in 0..tg.n_levels() {
                    let tc = ((tg.time(n) / tg.horizon * nt as f64) as usize).min(nt - 1);
                    for (k, slot) in level.iter_mut().enumerate() {
                        let [i, j] = grid.lattice_position(k);
                        let ci = (i * ns / nx).min(ns - 1);
                        let cj = if grid.dim == 2 { (j * ns / ny).min(ns - 1) } else { 0 };
                        *slot = table[tc * cells_per_level + cj * ns + ci];
                    }
                    field.push(&level);
                }
                field
            }
            CoefficientProfile::Sampled(f) => {
                f.check_shape(grid, tg)?;
                f.clone()
            }
        };
        let (lo, hi) = (a0, c0 * a0);
        let slack = 1e-12 * hi;
        for n in 0..field.n_levels() {
            for (k, &v) in field.level(n).iter().enumerate() {
                if !(v >= lo - slack && v <= hi + slack) {
                    return Err(Error::CoefficientOutOfBounds {
                        value: v,
                        lo,
                        hi,
                        level: n,
                        node: k,
                    });
                }
            }
        }
        Ok(field)
    }
}

#[derive(Debug, Clone)]
pub struct RoughProblem {
    pub grid: SpaceGrid,
    pub time: TimeGrid,
    pub coefficient: RoughCoefficient,
    pub forcing: SpaceTimeField,
    pub w_init: ScalarField,
}

impl RoughProblem {
    pub fn new(grid: SpaceGrid, time: TimeGrid, coefficient: RoughCoefficient, forcing: SpaceTimeField, w_init: ScalarField) -> Result<Self> {
        forcing.check_shape(&grid, &time)?;
        if w_init.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: w_init.len(),
            });
        }
        if let Some(v) = w_init.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("w_init must be nonnegative, found {v}")));
        }
        Ok(RoughProblem {
            grid,
            time,
            coefficient,
            forcing,
            w_init,
        })
    }

    /// Same data with `a` replaced by the constant `c`.
    pub fn with_constant(&self, c: f64) -> Self {
        RoughProblem {
            coefficient: RoughCoefficient::constant(c),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub w: SpaceTimeField,
    /// Largest relative residual of the per-step linear solves.
    pub residual_norm: f64,
    /// `min (w^{n+1} - w^n)` over all steps and nodes.
    pub dt_w_min: f64,
    pub worst_increment: (usize, usize),
}

/// Relative residual accepted from the banded Cholesky solves.
pub const SOLVE_TOL: f64 = 1e-10;

fn solve_with(problem: &RoughProblem, a: &SpaceTimeField, constant: bool) -> Result<Solution> {
    let grid = &problem.grid;
    let dt = problem.time.dt;
    let n = grid.len();
    let mut w = SpaceTimeField::with_initial(&problem.w_init);
    let mut prev = problem.w_init.clone();
    let mut residual_norm = 0.0f64;
    let mut dt_w_min = f64::INFINITY;
    let mut worst = (0, 0);
    let mut cached: Option<(linalg::SpdBandMatrix, BandCholesky)> = None;
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for step in 1..problem.time.n_levels() {
        let a_new = a.level(step);
        for k in 0..n {
            diag[k] = a_new[k] / dt;
        }
        if !constant || cached.is_none() {
            let m = grid.shifted_operator(&diag, 1.0);
            let chol = m
                .clone()
                .factor()
                .map_err(|reason| Error::SolveFailed { step, reason })?;
            cached = Some((m, chol));
        }
        let (m, chol) = cached.as_ref().expect("factored");
        let f = problem.forcing.level(step);
        for k in 0..n {
            rhs[k] = diag[k] * prev[k] + f[k];
        }
        let mut next = rhs.clone();
        chol.solve_in_place(&mut next);
        let res = linalg::residual(m, &next, &rhs);
        if !(res <= SOLVE_TOL) {
            return Err(Error::SolveFailed {
                step,
                reason: format!("relative residual {res:e}"),
            });
        }
        residual_norm = residual_norm.max(res);
        for k in 0..n {
            let inc = next[k] - prev[k];
            if inc < dt_w_min {
                dt_w_min = inc;
                worst = (step, k);
            }
        }
        w.push(&next);
        prev = next;
    }
    Ok(Solution {
        w,
        residual_norm,
        dt_w_min,
        worst_increment: worst,
    })
}

/// Implicit Euler with the coefficient sampled at the new level:
/// `a^{n+1} (w^{n+1} - w^n)/dt - L w^{n+1} = f^{n+1}`.
pub fn solve_rough(problem: &RoughProblem) -> Result<Solution> {
    let a = problem.coefficient.sample(&problem.grid, &problem.time)?;
    let constant = matches!(problem.coefficient.profile, CoefficientProfile::Constant(_));
    solve_with(problem, &a, constant)
}

/// The comparator `v_c`: `(c d/dt - L) v = f`, `v(0) = w_init`.
pub fn solve_const(problem: &RoughProblem, c: f64) -> Result<Solution> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("clock c={c} must be positive")));
    }
    solve_rough(&problem.with_constant(c))
}

/// Scale-aware tolerance on negative increments.
pub fn monotonicity_tolerance(solution: &Solution) -> f64 {
    1e-8 * solution.w.max_abs().max(1.0)
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub dt_w_min: f64,
    pub tolerance: f64,
    /// `(level, node)` of the most negative increment.
    pub worst: (usize, usize),
    pub passed: bool,
}

pub fn monotonicity_check(solution: &Solution) -> MonotonicityReport {
    let tolerance = monotonicity_tolerance(solution);
    MonotonicityReport {
        dt_w_min: solution.dt_w_min,
        tolerance,
        worst: solution.worst_increment,
        passed: solution.dt_w_min >= -tolerance,
    }
}

/// Monotonicity of an arbitrary field in time.
pub fn field_monotonicity(w: &SpaceTimeField) -> MonotonicityReport {
    let mut dt_w_min = f64::INFINITY;
    let mut worst = (0, 0);
    for n in 1..w.n_levels() {
        for (k, (a, b)) in w.level(n - 1).iter().zip(w.level(n)).enumerate() {
            if b - a < dt_w_min {
                dt_w_min = b - a;
                worst = (n, k);
            }
        }
    }
    if w.n_levels() < 2 {
        dt_w_min = 0.0;
    }
    let tolerance = 1e-8 * w.max_abs().max(1.0);
    MonotonicityReport {
        dt_w_min,
        tolerance,
        worst,
        passed: dt_w_min >= -tolerance,
    }
}

impl MonotonicityReport {
    pub fn certification(&self) -> Certification {
        Certification::at_least("monotonicity", self.dt_w_min, -self.tolerance)
            .param("worst_level", self.worst.0)
            .param("worst_node", self.worst.1)
    }
}

#[derive(Debug, Clone)]
pub struct SandwichReport {
    pub lower_violation: f64,
    pub upper_violation: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl SandwichReport {
    pub fn certification(&self) -> Certification {
        Certification::new(
            "sandwich",
            self.lower_violation.max(self.upper_violation),
            self.tolerance,
            self.verdict,
        )
        .param("lower_violation", self.lower_violation)
        .param("upper_violation", self.upper_violation)
    }
}

/// `v_{a0 c0} - tol <= w <= v_{a0} + tol` everywhere. INCONCLUSIVE when the
/// monotonicity hypothesis fails on the run.
pub fn sandwich_check(solution: &Solution, problem: &RoughProblem, tolerance: f64) -> Result<SandwichReport> {
    if !monotonicity_check(solution).passed {
        return Ok(SandwichReport {
            lower_violation: f64::NAN,
            upper_violation: f64::NAN,
            tolerance,
            verdict: Verdict::Inconclusive,
        });
    }
    let a0 = problem.coefficient.a0;
    let fast = solve_const(problem, a0)?;
    let slow = solve_const(problem, a0 * problem.coefficient.c0)?;
    let mut lower_violation = f64::NEG_INFINITY;
    let mut upper_violation = f64::NEG_INFINITY;
    for ((w, hi), lo) in solution.w.values().iter().zip(fast.w.values()).zip(slow.w.values()) {
        lower_violation = lower_violation.max(lo - w);
        upper_violation = upper_violation.max(w - hi);
    }
    let ok = lower_violation <= tolerance && upper_violation <= tolerance;
    Ok(SandwichReport {
        lower_violation,
        upper_violation,
        tolerance,
        verdict: Verdict::from_bool(ok),
    })
}

/// `C_disc = max error / (h^2 + dt)` of the `sin(pi x)` exact solution run on
/// `(0, 1)` at the given resolution.
pub fn calibrate_discretization_constant(h: f64, dt: f64, horizon: f64) -> Result<f64> {
    let err = sine_mode_error(h, dt, horizon)?;
    Ok(err / (h * h + dt))
}

/// Max error of the implicit solve of `w_t = w_xx`, `w(0) = sin(pi x)`,
/// against `e^{-pi^2 t} sin(pi x)`.
pub fn sine_mode_error(h: f64, dt: f64, horizon: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    let grid = SpaceGrid::new(crate::grid::DomainSpec::unit_interval(), h)?;
    let tg = TimeGrid::new(horizon, dt)?;
    let w0 = grid.map(|x| (pi * x[0]).sin());
    let f = SpaceTimeField::constant(&grid, &tg, 0.0);
    let problem = RoughProblem::new(grid.clone(), tg, RoughCoefficient::constant(1.0), f, w0)?;
    let sol = solve_rough(&problem)?;
    let mut err = 0.0f64;
    for n in 0..tg.n_levels() {
        let t = tg.time(n);
        for (k, p) in grid.nodes.iter().enumerate() {
            let exact = (-pi * pi * t).exp() * (pi * p[0]).sin();
            err = err.max((sol.w.at(n, k) - exact).abs());
        }
    }
    Ok(err)
}

/// Long-format CSV: `t,x[,y],w`.
pub fn write_solution_csv<W: Write>(out: W, grid: &SpaceGrid, tg: &TimeGrid, w: &SpaceTimeField) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    if grid.dim == 1 {
        wr.write_record(["t", "x", "w"])?;
    } else {
        wr.write_record(["t", "x", "y", "w"])?;
    }
    for n in 0..w.n_levels() {
        let t = tg.time(n).to_string();
        for (k, p) in grid.nodes.iter().enumerate() {
            let v = w.at(n, k).to_string();
            if grid.dim == 1 {
                wr.write_record([t.as_str(), &p[0].to_string(), &v])?;
            } else {
                wr.write_record([t.as_str(), &p[0].to_string(), &p[1].to_string(), &v])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Whitespace-separated snapshot of one level: `x [y] value` per line.
pub fn write_snapshot<W: Write>(mut out: W, grid: &SpaceGrid, values: &[f64]) -> Result<()> {
    for (p, v) in grid.nodes.iter().zip(values) {
        if grid.dim == 1 {
            writeln!(out, "{} {}", p[0], v)?;
        } else {
            writeln!(out, "{} {} {}", p[0], p[1], v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;
    use std::f64::consts::PI;

    fn unit(h: f64) -> SpaceGrid {
        SpaceGrid::new(DomainSpec::unit_interval(), h).unwrap()
    }

    fn forced(h: f64, horizon: f64, dt: f64, coef: RoughCoefficient) -> RoughProblem {
        let g = unit(h);
        let tg = TimeGrid::new(horizon, dt).unwrap();
        let f = SpaceTimeField::constant(&g, &tg, 1.0);
        let w0 = vec![0.0; g.len()];
        RoughProblem::new(g, tg, coef, f, w0).unwrap()
    }

    #[test]
    fn exact_sine_decay() {
        let err = sine_mode_error(1.0 / 64.0, 1e-4, 0.1).unwrap();
        assert!(err < 5e-4, "err={err}");
    }

    #[test]
    fn doubled_clock_is_time_rescaling() {
        let g = unit(1.0 / 64.0);
        let w0 = g.map(|x| (PI * x[0]).sin() + 0.5 * (2.0 * PI * x[0]).sin().abs());
        let tg2 = TimeGrid::new(0.2, 2e-4).unwrap();
        let tg1 = TimeGrid::new(0.1, 1e-4).unwrap();
        let p2 = RoughProblem::new(g.clone(), tg2, RoughCoefficient::constant(2.0), SpaceTimeField::constant(&g, &tg2, 0.0), w0.clone()).unwrap();
        let p1 = RoughProblem::new(g.clone(), tg1, RoughCoefficient::constant(1.0), SpaceTimeField::constant(&g, &tg1, 0.0), w0).unwrap();
        let s2 = solve_rough(&p2).unwrap();
        let s1 = solve_rough(&p1).unwrap();
        // identical discrete systems: a/dt agrees step by step
        for (a, b) in s2.w.values().iter().zip(s1.w.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_forcing_from_rest_is_monotone() {
        for c in [0.5, 1.0, 3.0] {
            let p = forced(1.0 / 32.0, 0.2, 1e-3, RoughCoefficient::constant(c));
            let s = solve_rough(&p).unwrap();
            assert!(s.dt_w_min >= -1e-10);
            assert!(monotonicity_check(&s).passed);
            assert!(s.residual_norm <= SOLVE_TOL);
        }
    }

    #[test]
    fn pure_decay_is_not_monotone() {
        let g = unit(1.0 / 32.0);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let p = RoughProblem::new(g.clone(), tg, RoughCoefficient::constant(1.0), SpaceTimeField::constant(&g, &tg, 0.0), g.map(|x| (PI * x[0]).sin())).unwrap();
        assert!(!monotonicity_check(&solve_rough(&p).unwrap()).passed);
    }

    #[test]
    fn constant_coefficient_paths_agree() {
        let p = forced(1.0 / 32.0, 0.1, 1e-3, RoughCoefficient::constant(1.3));
        let a = solve_rough(&p).unwrap();
        let b = solve_const(&p, 1.3).unwrap();
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn faster_clock_dominates() {
        let p = forced(1.0 / 32.0, 0.1, 1e-3, RoughCoefficient::constant(1.0));
        let fast = solve_const(&p, 1.0).unwrap();
        let slow = solve_const(&p, 2.0).unwrap();
        for (a, b) in fast.w.values().iter().zip(slow.w.values()) {
            assert!(a >= b);
        }
    }

    #[test]
    fn rough_run_is_monotone_and_sandwiched() {
        let coef = RoughCoefficient::oscillating(1.0, 1.5, 5.0, 3.0);
        let p = forced(1.0 / 64.0, 0.1, 5e-4, coef);
        let s = solve_rough(&p).unwrap();
        assert!(monotonicity_check(&s).passed);
        let r = sandwich_check(&s, &p, 1e-12).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn checkerboard_respects_bounds_and_is_deterministic() {
        let g = unit(1.0 / 32.0);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let c = RoughCoefficient::checkerboard(2.0, 1.7, 11, 7, 5);
        let a = c.sample(&g, &tg).unwrap();
        assert!(a.min() >= 2.0 && a.max_abs() <= 3.4 + 1e-12);
        assert_eq!(a, c.sample(&g, &tg).unwrap());
    }

    #[test]
    fn out_of_bounds_coefficient_is_rejected() {
        let g = unit(0.25);
        let tg = TimeGrid::new(1.0, 0.5).unwrap();
        let mut bad = SpaceTimeField::constant(&g, &tg, 1.0);
        bad.level_mut(1)[1] = 3.0;
        let c = RoughCoefficient {
            a0: 1.0,
            c0: 2.0,
            profile: CoefficientProfile::Sampled(bad),
        };
        assert!(matches!(c.sample(&g, &tg), Err(Error::CoefficientOutOfBounds { level: 1, node: 1, .. })));
    }

    #[test]
    fn sandwich_inconclusive_without_monotonicity() {
        let g = unit(1.0 / 16.0);
        let tg = TimeGrid::new(0.05, 1e-3).unwrap();
        let p = RoughProblem::new(g.clone(), tg, RoughCoefficient::oscillating(1.0, 2.0, 3.0, 1.0), SpaceTimeField::constant(&g, &tg, 0.0), g.map(|x| (PI * x[0]).sin())).unwrap();
        let s = solve_rough(&p).unwrap();
        assert_eq!(sandwich_check(&s, &p, 1e-3).unwrap().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn degenerate_sandwiches_are_tight() {
        let p = forced(1.0 / 32.0, 0.05, 1e-3, RoughCoefficient::constant(1.0));
        let s = solve_rough(&p).unwrap();
        let r = sandwich_check(&s, &p, 0.0).unwrap();
        assert_eq!(r.upper_violation, 0.0);
        let p2 = RoughProblem {
            coefficient: RoughCoefficient {
                a0: 1.0,
                c0: 2.0,
                profile: CoefficientProfile::Constant(2.0),
            },
            ..p.clone()
        };
        let s2 = solve_rough(&p2).unwrap();
        let r2 = sandwich_check(&s2, &p2, 0.0).unwrap();
        assert_eq!(r2.lower_violation, 0.0);
    }

    #[test]
    fn csv_and_snapshot_export() {
        let p = forced(0.25, 0.1, 0.05, RoughCoefficient::constant(1.0));
        let s = solve_rough(&p).unwrap();
        let mut buf = Vec::new();
        write_solution_csv(&mut buf, &p.grid, &p.time, &s.w).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 3);
        assert!(text.starts_with("t,x,w"));
        let mut snap = Vec::new();
        write_snapshot(&mut snap, &p.grid, s.w.last()).unwrap();
        assert_eq!(String::from_utf8(snap).unwrap().lines().count(), 3);
    }
}
