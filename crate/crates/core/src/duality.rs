//! Duality estimate for `du/dt - L(mu u) = f`: time rescaling, the spectral
//! contraction of `Gamma * L[(mu - 1) u]`, and the empirical `L^{2+delta}` bound.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cert::{self, Certification, Verdict};
use crate::error::{Error, Result};
use crate::field::{lq_norm, mixed_norm, spacetime_norm, ExponentPair, ScalarField, SpaceTimeField, TimeGrid};
use crate::grid::SpaceGrid;
use crate::heat_kernel::SpectralBasis;

/// Slack on the certified contraction bound `1 - lambda`.
pub const CONTRACTION_TOL: f64 = 1e-8;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DELTA_SWEEP: [f64; 3] = [0.05, 0.1, 0.25];

#[derive(Debug, Clone)]
pub struct DualityProblem {
    pub time: TimeGrid,
    pub mu: SpaceTimeField,
    pub f: SpaceTimeField,
    pub u_init: ScalarField,
    pub mu_minus: f64,
    pub mu_plus: f64,
    /// `2 mu_- / (mu_- + mu_+)`
    pub lambda: f64,
    /// Factor `k` with rescaled time `s = k t`; 1 for an unscaled problem.
    pub time_factor: f64,
}

impl DualityProblem {
    pub fn new(grid: &SpaceGrid, time: TimeGrid, mu: SpaceTimeField, f: SpaceTimeField, u_init: ScalarField) -> Result<Self> {
        mu.check_shape(grid, &time)?;
        f.check_shape(grid, &time)?;
        mu.check_finite()?;
        if u_init.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: u_init.len(),
            });
        }
        let mu_minus = mu.min();
        let mu_plus = mu.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(mu_minus > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, min is {mu_minus}")));
        }
        Ok(DualityProblem {
            time,
            mu,
            f,
            u_init,
            mu_minus,
            mu_plus,
            lambda: 2.0 * mu_minus / (mu_minus + mu_plus),
            time_factor: 1.0,
        })
    }
}

/// Rescale time so that `lambda <= mu <= 2 - lambda`: with `k = (mu_- + mu_+)/2`
/// the rescaled data are `mu / k`, `f / k` on the grid `s = k t`.
pub fn rescale_time(problem: &DualityProblem) -> Result<DualityProblem> {
    if !(problem.mu_minus > 0.0) {
        return Err(Error::InvalidParameter("mu_- must be positive".into()));
    }
    let k = 0.5 * (problem.mu_minus + problem.mu_plus);
    Ok(DualityProblem {
        time: problem.time.scaled(k),
        mu: problem.mu.map(|m| m / k),
        f: problem.f.map(|v| v / k),
        u_init: problem.u_init.clone(),
        mu_minus: problem.mu_minus / k,
        mu_plus: problem.mu_plus / k,
        lambda: problem.lambda,
        time_factor: problem.time_factor * k,
    })
}

/// Implicit Euler for `(u^{n+1} - u^n)/dt - L(mu^{n+1} u^{n+1}) = f^{n+1}`,
/// solved for `z = mu u` with the SPD operator `diag(1/(mu dt)) - L`.
pub fn solve_skew(grid: &SpaceGrid, problem: &DualityProblem) -> Result<SpaceTimeField> {
    let tg = &problem.time;
    let n = grid.len();
    let mut u = problem.u_init.clone();
    let mut out = SpaceTimeField::with_initial(&u);
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for step in 1..tg.n_levels() {
        let mu = problem.mu.level(step);
        let f = problem.f.level(step);
        for k in 0..n {
            diag[k] = 1.0 / (mu[k] * tg.dt);
            rhs[k] = u[k] / tg.dt + f[k];
        }
        let m = grid.shifted_operator(&diag, 1.0);
        let (z, res) = crate::linalg::solve_checked(&m, &rhs).map_err(|reason| Error::SolveFailed { step, reason })?;
        if !(res <= crate::rough::SOLVE_TOL) {
            return Err(Error::SolveFailed {
                step,
                reason: format!("relative residual {res:e}"),
            });
        }
        for k in 0..n {
            u[k] = z[k] / mu[k];
        }
        out.push(&u);
    }
    Ok(out)
}

/// Discrete convolution `y^{n+1} = q y^n + (q - 1) g^{n+1}`, `q = e^{eigenvalue dt}`,
/// the exact time integral of `eigenvalue e^{eigenvalue (t - s)} g(s)` for
/// step-wise constant `g`. Returns `y^1..y^N`.
pub fn modal_convolution(eigenvalue: f64, dt: f64, g: &[f64]) -> Vec<f64> {
    let q = (eigenvalue * dt).exp();
    let mut y = 0.0;
    g.iter()
        .map(|gn| {
            y = q * y + (q - 1.0) * gn;
            y
        })
        .collect()
}

/// `|y|_{l^2} / |g|_{l^2}` for one mode; at most one for `eigenvalue <= 0`.
pub fn modewise_contraction(eigenvalue: f64, dt: f64, g: &[f64]) -> f64 {
    let y = modal_convolution(eigenvalue, dt, g);
    let gy: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let gg: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gg == 0.0 {
        0.0
    } else {
        gy / gg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub ratio: f64,
    pub bound: f64,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.ratio <= self.bound + CONTRACTION_TOL
    }

    pub fn certification(&self) -> Certification {
        Certification::at_most("duality_contraction", self.ratio, self.bound + CONTRACTION_TOL)
    }
}

/// Space-time `L^2` ratio `|Gamma * L[(mu - 1) u]| / |u|` over levels `1..N`,
/// mode by mode in the spectral basis. `mu` must already be rescaled.
pub fn contraction_check(grid: &SpaceGrid, basis: &SpectralBasis, tg: &TimeGrid, mu: &SpaceTimeField, u: &SpaceTimeField) -> ContractionReport {
    let n_levels = tg.n_levels();
    let mut coeffs: Vec<DVector<f64>> = Vec::with_capacity(n_levels - 1);
    let mut g = vec![0.0; grid.len()];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in 1..n_levels {
        for k in 0..grid.len() {
            let m = mu.at(n, k);
            lo = lo.min(m);
            hi = hi.max(m);
            g[k] = (m - 1.0) * u.at(n, k);
        }
        coeffs.push(basis.project(&g));
    }
    let lambda = lo.min(2.0 - hi);
    let mut num = 0.0;
    let mut signal = vec![0.0; n_levels - 1];
    for (k, &ev) in basis.eigenvalues.iter().enumerate() {
        for (s, c) in signal.iter_mut().zip(&coeffs) {
            *s = c[k];
        }
        num += modal_convolution(ev, tg.dt, &signal).iter().map(|y| y * y).sum::<f64>();
    }
    let den = spacetime_norm(u, 2.0, grid, tg);
    let ratio = if den == 0.0 { 0.0 } else { (tg.dt * num).sqrt() / den };
    ContractionReport {
        ratio,
        bound: 1.0 - lambda,
    }
}

/// `(2 + d)/(2 + delta) >= 2/p + d/q - 2`.
pub fn exponent_condition(dim: usize, delta: f64, p: f64, q: f64) -> bool {
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let d = dim as f64;
    (2.0 + d) / (2.0 + delta) >= 2.0 * inv(p) + d * inv(q) - 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub contraction_ratio: f64,
    pub lambda: f64,
    pub delta: f64,
    pub bound_constant: f64,
    pub exponent_ok: bool,
}

impl DualityReport {
    pub fn contraction_certification(&self) -> Certification {
        ContractionReport {
            ratio: self.contraction_ratio,
            bound: 1.0 - self.lambda,
        }
        .certification()
        .param("delta", self.delta)
    }
}

/// `|u|_{L^{2+delta}(Q_T)} / (|u_init|_{L^{2+delta}} + |f|_{L^p L^q})` together with
/// the contraction ratio of the rescaled problem. The ratio is left as NaN when
/// the exponent condition fails.
pub fn duality_bound_check(
    grid: &SpaceGrid,
    basis: &SpectralBasis,
    problem: &DualityProblem,
    u: &SpaceTimeField,
    exps: &ExponentPair,
    delta: f64,
) -> Result<DualityReport> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta={delta} must be nonnegative")));
    }
    u.check_shape(grid, &problem.time)?;
    let scaled = rescale_time(problem)?;
    let contraction = contraction_check(grid, basis, &scaled.time, &scaled.mu, u);
    let exponent_ok = exponent_condition(grid.dim, delta, exps.p, exps.q);
    let bound_constant = if exponent_ok {
        let r = 2.0 + delta;
        let num = spacetime_norm(u, r, grid, &problem.time);
        let den = lq_norm(grid, &problem.u_init, r) + mixed_norm(&problem.f, exps.p, exps.q, grid, &problem.time)?;
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    } else {
        f64::NAN
    };
    Ok(DualityReport {
        contraction_ratio: contraction.ratio,
        lambda: scaled.lambda,
        delta,
        bound_constant,
        exponent_ok,
    })
}

/// Refinement stability of the `L^{2+delta}` constant; INCONCLUSIVE when the
/// exponent condition excludes the check.
pub fn bound_certification(coarse: &DualityReport, fine: &DualityReport) -> Certification {
    if !(coarse.exponent_ok && fine.exponent_ok) {
        return Certification::new("duality_bound", f64::NAN, cert::STABILITY_FACTOR, Verdict::Inconclusive)
            .param("delta", coarse.delta)
            .param("exponent_ok", false);
    }
    cert::stability("duality_bound", coarse.bound_constant, fine.bound_constant).param("delta", coarse.delta)
}

/// Independent uniform draws in `[lo, hi]` at every (level, node).
pub fn random_mu(grid: &SpaceGrid, tg: &TimeGrid, lo: f64, hi: f64, seed: u64) -> SpaceTimeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SpaceTimeField::new(grid.len());
    let mut level = vec![0.0; grid.len()];
    for _ in 0..tg.n_levels() {
        for v in level.iter_mut() {
            *v = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        }
        out.push(&level);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;
    use crate::rough::{solve_const, RoughCoefficient, RoughProblem};
    use std::f64::consts::PI;

    fn unit(h: f64) -> SpaceGrid {
        SpaceGrid::new(DomainSpec::unit_interval(), h).unwrap()
    }

    fn problem(g: &SpaceGrid, tg: TimeGrid, mu: SpaceTimeField, f: f64) -> DualityProblem {
        let u0 = g.map(|x| (PI * x[0]).sin());
        DualityProblem::new(g, tg, mu, SpaceTimeField::constant(g, &tg, f), u0).unwrap()
    }

    #[test]
    fn rescale_unit_mu_is_identity() {
        let g = unit(1.0 / 16.0);
        let tg = TimeGrid::new(0.1, 0.01).unwrap();
        let p = problem(&g, tg, SpaceTimeField::constant(&g, &tg, 1.0), 0.0);
        let r = rescale_time(&p).unwrap();
        assert_eq!(r.lambda, 1.0);
        assert_eq!(r.time, tg);
        assert_eq!(r.mu, p.mu);
    }

    #[test]
    fn rescale_midpoint_normalisation() {
        let g = unit(1.0 / 16.0);
        let tg = TimeGrid::new(0.1, 0.01).unwrap();
        let mu = random_mu(&g, &tg, 1.0, 3.0, 5);
        let mut mu = mu;
        mu.level_mut(0)[0] = 1.0;
        mu.level_mut(0)[1] = 3.0;
        let r = rescale_time(&problem(&g, tg, mu, 0.0)).unwrap();
        assert!((r.lambda - 0.5).abs() < 1e-15);
        assert!((r.time_factor - 2.0).abs() < 1e-15);
        assert!((r.mu_minus - 0.5).abs() < 1e-15 && (r.mu_plus - 1.5).abs() < 1e-15);
        assert!(r.mu.values().iter().all(|m| *m >= r.lambda - 1e-15 && *m <= 2.0 - r.lambda + 1e-15));
    }

    #[test]
    fn rescaled_solution_matches_original() {
        let g = unit(1.0 / 32.0);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let p = problem(&g, tg, random_mu(&g, &tg, 0.5, 4.0, 9), 1.0);
        let a = solve_skew(&g, &p).unwrap();
        let b = solve_skew(&g, &rescale_time(&p).unwrap()).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn unit_mu_matches_heat_solver() {
        let g = unit(1.0 / 32.0);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let p = problem(&g, tg, SpaceTimeField::constant(&g, &tg, 1.0), 1.0);
        let u = solve_skew(&g, &p).unwrap();
        let rp = RoughProblem::new(g.clone(), tg, RoughCoefficient::constant(1.0), p.f.clone(), p.u_init.clone()).unwrap();
        let v = solve_const(&rp, 1.0).unwrap();
        for (x, y) in u.values().iter().zip(v.w.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn doubled_mu_is_faster_heat_flow() {
        let g = unit(1.0 / 32.0);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let p = problem(&g, tg, SpaceTimeField::constant(&g, &tg, 2.0), 0.0);
        let u = solve_skew(&g, &p).unwrap();
        let rp = RoughProblem::new(g.clone(), tg, RoughCoefficient::constant(1.0), p.f.clone(), p.u_init.clone()).unwrap();
        let v = solve_const(&rp, 0.5).unwrap();
        for (x, y) in u.values().iter().zip(v.w.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn skew_solution_stays_nonnegative() {
        let g = unit(1.0 / 32.0);
        let tg = TimeGrid::new(0.1, 1e-3).unwrap();
        let p = problem(&g, tg, random_mu(&g, &tg, 0.2, 5.0, 1), 0.5);
        assert!(solve_skew(&g, &p).unwrap().min() >= -1e-12);
    }

    #[test]
    fn modewise_kernel_is_contractive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let ev = -rng.gen_range(0.0..1e4);
            let dt = rng.gen_range(1e-5..1e-1);
            let g: Vec<f64> = (0..rng.gen_range(1..300)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(modewise_contraction(ev, dt, &g) <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn unit_mu_has_zero_contraction() {
        let g = unit(1.0 / 16.0);
        let b = SpectralBasis::compute(&g).unwrap();
        let tg = TimeGrid::new(0.1, 0.01).unwrap();
        let mu = SpaceTimeField::constant(&g, &tg, 1.0);
        let u = SpaceTimeField::sample(&g, &tg, |t, x| (1.0 + t) * x[0]);
        assert_eq!(contraction_check(&g, &b, &tg, &mu, &u).ratio, 0.0);
    }

    #[test]
    fn constant_perturbation_on_lowest_mode() {
        let g = unit(1.0 / 32.0);
        let b = SpectralBasis::compute(&g).unwrap();
        let lambda = 0.4;
        let tg = TimeGrid::new(20.0, 0.01).unwrap();
        let mu = SpaceTimeField::constant(&g, &tg, 2.0 - lambda);
        let phi = b.mode(0);
        let u = SpaceTimeField::sample(&g, &tg, |_, x| phi[g.nearest_node(x)]);
        let r = contraction_check(&g, &b, &tg, &mu, &u);
        assert!((r.bound - (1.0 - lambda)).abs() < 1e-12);
        assert!(r.ratio <= r.bound + 1e-12);
        assert!(r.ratio >= 0.95 * r.bound, "{r:?}");
    }

    #[test]
    fn random_contraction_audit_and_scale_invariance() {
        let g = unit(1.0 / 32.0);
        let b = SpectralBasis::compute(&g).unwrap();
        let tg = TimeGrid::new(0.2, 2e-3).unwrap();
        for seed in 0..20 {
            let p = problem(&g, tg, random_mu(&g, &tg, 0.5, 2.0, seed), 1.0);
            let s = rescale_time(&p).unwrap();
            let u = solve_skew(&g, &s).unwrap();
            let r = contraction_check(&g, &b, &s.time, &s.mu, &u);
            assert!(r.passed(), "{r:?}");
            let r3 = contraction_check(&g, &b, &s.time, &s.mu, &u.map(|v| 3.0 * v));
            assert!((r3.ratio - r.ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn exponent_condition_examples() {
        for delta in [0.05, 0.1, 1.0, 10.0] {
            assert!(exponent_condition(2, delta, f64::INFINITY, f64::INFINITY));
        }
        assert!(!exponent_condition(2, 1.0, 1.0, 1.0));
    }

    #[test]
    fn heat_flow_bound_is_time_power() {
        let g = unit(1.0 / 32.0);
        let b = SpectralBasis::compute(&g).unwrap();
        let tg = TimeGrid::new(0.2, 1e-3).unwrap();
        let p = problem(&g, tg, SpaceTimeField::constant(&g, &tg, 1.0), 0.0);
        let u = solve_skew(&g, &p).unwrap();
        for delta in [0.0, 0.1] {
            let rep = duality_bound_check(&g, &b, &p, &u, &ExponentPair::sup(1), delta).unwrap();
            assert!(rep.exponent_ok);
            assert!(rep.bound_constant <= 0.2f64.powf(1.0 / (2.0 + delta)) + 1e-12);
            assert_eq!(rep.contraction_ratio, 0.0);
        }
    }

    #[test]
    fn bound_stable_under_refinement() {
        let mut consts = Vec::new();
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let g = unit(h);
            let b = SpectralBasis::compute(&g).unwrap();
            let tg = TimeGrid::new(0.2, 1e-3).unwrap();
            let mu = SpaceTimeField::sample(&g, &tg, |t, x| 1.5 + 0.5 * (10.0 * t).sin() * (3.0 * PI * x[0]).cos());
            let p = problem(&g, tg, mu, 1.0);
            let u = solve_skew(&g, &p).unwrap();
            consts.push(duality_bound_check(&g, &b, &p, &u, &ExponentPair::sup(1), 0.1).unwrap());
        }
        assert!(bound_certification(&consts[0], &consts[1]).passed());
    }
}
