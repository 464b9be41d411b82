//! Reversible chemistry `A1 + A3 <-> A2 + A4` and the triangular SKT system
//! with homogeneous Dirichlet data, their auxiliary fields and a-priori checks.

use crate::cert::{Certification, Verdict};
use crate::error::{Error, Result};
use crate::field::{integral, lq_norm, ScalarField, SpaceTimeField, TimeGrid};
use crate::grid::{dist, SpaceGrid};
use crate::linalg::BandCholesky;

/// Negative values tolerated before a run is aborted.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Regularisation added to every density in the ratios `a` and `nu`.
pub const DENSITY_FLOOR: f64 = 1e-30;
/// Conservation tolerance on per-step increments of the paired masses.
pub const CONSERVATION_TOL: f64 = 1e-10;

fn factor_heat(grid: &SpaceGrid, dt: f64, diffusivity: f64) -> Result<BandCholesky> {
    let diag = vec![1.0 / dt; grid.len()];
    grid.shifted_operator(&diag, diffusivity)
        .factor()
        .map_err(|reason| Error::SolveFailed { step: 0, reason })
}

fn check_positive(u: &[f64], species: usize, step: usize) -> Result<()> {
    match u.iter().copied().find(|v| *v < -POSITIVITY_TOL || !v.is_finite()) {
        Some(value) => Err(Error::Positivity { species, value, step }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct ChemistryState {
    pub u: [ScalarField; 4],
    pub d: [f64; 4],
}

#[derive(Debug, Clone)]
pub struct ChemistryRun {
    pub grid: SpaceGrid,
    pub time: TimeGrid,
    pub d: [f64; 4],
    pub u: [SpaceTimeField; 4],
}

/// Exact reaction extent over `dt` for `s' = (u1 - s)(u3 - s) - (u2 + s)(u4 + s)`,
/// which is linear in `s`.
pub fn reaction_extent(u: [f64; 4], dt: f64) -> f64 {
    let a = u[0] * u[2] - u[1] * u[3];
    let b = u[0] + u[1] + u[2] + u[3];
    if b <= 0.0 {
        return a * dt;
    }
    -a * (-b * dt).exp_m1() / b
}

/// Lie splitting: exact reaction, then implicit diffusion of each species.
pub fn run_chemistry(grid: &SpaceGrid, tg: &TimeGrid, state: &ChemistryState) -> Result<ChemistryRun> {
    for (i, u) in state.u.iter().enumerate() {
        if u.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: u.len(),
            });
        }
        check_positive(u, i + 1, 0)?;
    }
    if state.d.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter(format!("diffusivities {:?} must be positive", state.d)));
    }
    let chol: Vec<BandCholesky> = state
        .d
        .iter()
        .map(|&d| factor_heat(grid, tg.dt, d))
        .collect::<Result<_>>()?;
    let mut fields: [SpaceTimeField; 4] = std::array::from_fn(|i| SpaceTimeField::with_initial(&state.u[i]));
    let mut cur = state.u.clone();
    let inv_dt = 1.0 / tg.dt;
    for step in 1..tg.n_levels() {
        for k in 0..grid.len() {
            let s = reaction_extent([cur[0][k], cur[1][k], cur[2][k], cur[3][k]], tg.dt);
            cur[0][k] -= s;
            cur[1][k] += s;
            cur[2][k] -= s;
            cur[3][k] += s;
        }
        for i in 0..4 {
            for v in cur[i].iter_mut() {
                *v *= inv_dt;
            }
            chol[i].solve_in_place(&mut cur[i]);
            check_positive(&cur[i], i + 1, step)?;
            fields[i].push(&cur[i]);
        }
    }
    Ok(ChemistryRun {
        grid: grid.clone(),
        time: *tg,
        d: state.d,
        u: fields,
    })
}

impl ChemistryRun {
    /// `sum_i u_i` at one level.
    pub fn total(&self, n: usize) -> ScalarField {
        let mut s = vec![0.0; self.grid.len()];
        for u in &self.u {
            for (a, b) in s.iter_mut().zip(u.level(n)) {
                *a += b;
            }
        }
        s
    }

    /// `sum_i d_i u_i` at one level.
    pub fn weighted_total(&self, n: usize) -> ScalarField {
        let mut s = vec![0.0; self.grid.len()];
        for (u, d) in self.u.iter().zip(self.d) {
            for (a, b) in s.iter_mut().zip(u.level(n)) {
                *a += d * b;
            }
        }
        s
    }

    pub fn min_density(&self) -> f64 {
        self.u.iter().map(|u| u.min()).fold(f64::INFINITY, f64::min)
    }

    /// Largest per-step increase of `int (u1+u2)`, `int (u3+u4)`, `int (u1+u4)`.
    pub fn conservation_increments(&self) -> [f64; 3] {
        let pairs = [(0, 1), (2, 3), (0, 3)];
        let mut out = [f64::NEG_INFINITY; 3];
        for (slot, (i, j)) in out.iter_mut().zip(pairs) {
            let mass = |n: usize| integral(&self.grid, self.u[i].level(n)) + integral(&self.grid, self.u[j].level(n));
            for n in 1..self.time.n_levels() {
                *slot = slot.max(mass(n) - mass(n - 1));
            }
        }
        out
    }

    pub fn structure_certifications(&self) -> Vec<Certification> {
        let inc = self.conservation_increments();
        let worst = inc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vec![
            Certification::at_least("positivity", self.min_density(), -POSITIVITY_TOL),
            Certification::at_most("conservation", worst, CONSERVATION_TOL)
                .param("u1_u2", inc[0])
                .param("u3_u4", inc[1])
                .param("u1_u4", inc[2]),
        ]
    }
}

/// `(L^1, L^2, L^inf)` per level.
pub fn norm_series(grid: &SpaceGrid, u: &SpaceTimeField) -> Vec<[f64; 3]> {
    u.levels()
        .map(|l| [lq_norm(grid, l, 1.0), lq_norm(grid, l, 2.0), lq_norm(grid, l, f64::INFINITY)])
        .collect()
}

/// Trapezoid cumulative integral in time of per-level integrands.
fn cumulative<F: Fn(usize) -> ScalarField>(n_levels: usize, n_nodes: usize, dt: f64, integrand: F) -> SpaceTimeField {
    let mut acc = vec![0.0; n_nodes];
    let mut out = SpaceTimeField::with_initial(&acc);
    let mut prev = integrand(0);
    for n in 1..n_levels {
        let cur = integrand(n);
        for k in 0..n_nodes {
            acc[k] += 0.5 * dt * (prev[k] + cur[k]);
        }
        out.push(&acc);
        prev = cur;
    }
    out
}

#[derive(Debug, Clone)]
pub struct ChemistryAux {
    pub w: SpaceTimeField,
    pub a: SpaceTimeField,
    pub a_range: (f64, f64),
    pub a_bounds: (f64, f64),
    pub residual_inf: f64,
    pub tolerance: f64,
}

impl ChemistryAux {
    pub fn a_bounds_ok(&self) -> bool {
        let slack = 1e-12 * self.a_bounds.1;
        self.a_range.0 >= self.a_bounds.0 - slack && self.a_range.1 <= self.a_bounds.1 + slack
    }

    pub fn certifications(&self) -> Vec<Certification> {
        vec![
            Certification::new(
                "chemistry_a_bounds",
                self.a_range.1,
                self.a_bounds.1,
                Verdict::from_bool(self.a_bounds_ok()),
            )
            .param("a_min", self.a_range.0)
            .param("lower", self.a_bounds.0),
            Certification::at_most("chemistry_aux_residual", self.residual_inf, self.tolerance),
        ]
    }
}

/// Builds `w = int_0^t sum d_i u_i`, `a = sum u_i / sum d_i u_i` and the residual
/// of `a dw/dt - Lw = sum u_i^init` (backward difference in time).
pub fn chemistry_aux_check(run: &ChemistryRun, tolerance: f64) -> ChemistryAux {
    let grid = &run.grid;
    let tg = &run.time;
    let n_nodes = grid.len();
    let w = cumulative(tg.n_levels(), n_nodes, tg.dt, |n| run.weighted_total(n));
    let mut a = SpaceTimeField::new(n_nodes);
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut level = vec![0.0; n_nodes];
    for n in 0..tg.n_levels() {
        for (k, slot) in level.iter_mut().enumerate() {
            let mut num = 0.0;
            let mut den = 0.0;
            for (u, d) in run.u.iter().zip(run.d) {
                let v = u.at(n, k).max(0.0) + DENSITY_FLOOR;
                num += v;
                den += d * v;
            }
            *slot = num / den;
            range = (range.0.min(*slot), range.1.max(*slot));
        }
        a.push(&level);
    }
    let init = run.total(0);
    let mut residual_inf = 0.0f64;
    for n in 1..tg.n_levels() {
        let lw = grid.laplacian(w.level(n));
        for k in 0..n_nodes {
            let dw = (w.at(n, k) - w.at(n - 1, k)) / tg.dt;
            residual_inf = residual_inf.max((a.at(n, k) * dw - lw[k] - init[k]).abs());
        }
    }
    let dmax = run.d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dmin = run.d.iter().copied().fold(f64::INFINITY, f64::min);
    ChemistryAux {
        w,
        a,
        a_range: range,
        a_bounds: (1.0 / dmax, 1.0 / dmin),
        residual_inf,
        tolerance,
    }
}

/// Gradient term `int |grad g|^2` from lattice edge differences.
pub fn dirichlet_energy(grid: &SpaceGrid, g: &[f64]) -> f64 {
    grid.cell() * grid.edge_gradients(g).iter().map(|e| e * e).sum::<f64>()
}

/// Same term for `g = u^{(p+1)/2}` via the chain rule,
/// `((p+1)/2)^2 u^{p-1} |grad u|^2` with `u^{p-1}` averaged on each edge.
pub fn dirichlet_energy_chain_rule(grid: &SpaceGrid, u: &[f64], p: f64) -> f64 {
    let c = 0.25 * (p + 1.0) * (p + 1.0);
    let grads = grid.edge_gradients(u);
    let pairs = grid.edge_pairs(u);
    let mut acc = 0.0;
    for (g, (x, y)) in grads.iter().zip(pairs) {
        let w = 0.5 * (x.max(0.0).powf(p - 1.0) + y.max(0.0).powf(p - 1.0));
        acc += c * w * g * g;
    }
    grid.cell() * acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub p: f64,
    pub c_p: f64,
    /// `(E(t_n) + D(t_n), I(t_n))` per level.
    pub series: Vec<(f64, f64)>,
    pub initial_energy: f64,
}

fn energy_series(grid: &SpaceGrid, tg: &TimeGrid, species: &[&SpaceTimeField], weights: &[f64], p: f64) -> (f64, Vec<(f64, f64)>) {
    let ex = 0.5 * (p + 1.0);
    let pref = 4.0 * p / ((p + 1.0) * (p + 1.0));
    let energy = |n: usize| -> f64 {
        species
            .iter()
            .map(|u| grid.cell() * u.level(n).iter().map(|v| v.max(0.0).powf(p + 1.0)).sum::<f64>() / (p + 1.0))
            .sum()
    };
    let e0 = energy(0);
    let mut diss = 0.0;
    let mut growth = 0.0;
    let mut series = vec![(e0, 0.0)];
    for n in 1..tg.n_levels() {
        for (u, d) in species.iter().zip(weights) {
            let g: Vec<f64> = u.level(n).iter().map(|v| v.max(0.0).powf(ex)).collect();
            diss += tg.dt * pref * d * dirichlet_energy(grid, &g);
            growth += tg.dt * grid.cell() * u.level(n).iter().map(|v| v.max(0.0).powf(p + 2.0)).sum::<f64>();
        }
        series.push((energy(n) + diss, growth));
    }
    (e0, series)
}

/// Smallest `C_p` with `E(t) + D(t) <= E(0) + C_p I(t)` at every level.
pub fn energy_inequality_check(run: &ChemistryRun, p: f64) -> Result<EnergyReport> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p={p} must be positive")));
    }
    let species: Vec<&SpaceTimeField> = run.u.iter().collect();
    let (e0, series) = energy_series(&run.grid, &run.time, &species, &run.d, p);
    let mut c_p = 0.0f64;
    for &(lhs, i) in &series[1..] {
        let excess = lhs - e0;
        if excess > 0.0 {
            c_p = c_p.max(if i > 0.0 { excess / i } else { f64::INFINITY });
        }
    }
    Ok(EnergyReport {
        p,
        c_p,
        series,
        initial_energy: e0,
    })
}

/// Spatial `C^{0,alpha}` norm `sup|u| + [u]_alpha`, boundary lattice points as zeros.
pub fn spatial_holder_norm(grid: &SpaceGrid, u: &[f64], alpha: f64) -> f64 {
    let stride = if grid.dim == 2 && grid.len() > 1200 { 2 } else { 1 };
    let mut pts: Vec<([f64; 2], f64)> = Vec::new();
    for (k, p) in grid.nodes.iter().enumerate() {
        let [i, j] = grid.lattice_position(k);
        if i % stride == 0 && j % stride == 0 {
            pts.push((*p, u[k]));
        }
    }
    for p in &grid.boundary_points {
        pts.push((*p, 0.0));
    }
    let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut semi = 0.0f64;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let d = dist(pts[a].0, pts[b].0);
            if d > 0.0 {
                semi = semi.max((pts[a].1 - pts[b].1).abs() / d.powf(alpha));
            }
        }
    }
    sup + semi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolationKind {
    Chemistry,
    Skt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationReport {
    pub alpha: f64,
    pub exponent: f64,
    pub constant: f64,
    pub slices: usize,
}

/// Smallest `C` with `|g|_r^3 <= C (|W|^{3/(3-a)} |grad g|_2^{3(2-a)/(3-a)} [+ |W|^3])`
/// over sampled time slices, `r = 2(3-a)/(2-a)`, where `W` is the auxiliary
/// field in the spatial Hölder norm and the additive term is present for SKT.
pub fn interpolation_check(
    grid: &SpaceGrid,
    g: &SpaceTimeField,
    aux: &SpaceTimeField,
    alpha: f64,
    which: InterpolationKind,
) -> Result<InterpolationReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("interpolation needs alpha in (0,1), got {alpha}")));
    }
    let r = 2.0 * (3.0 - alpha) / (2.0 - alpha);
    let e1 = 3.0 / (3.0 - alpha);
    let e2 = 3.0 * (2.0 - alpha) / (3.0 - alpha);
    let n = g.n_levels();
    let picks: Vec<usize> = if n <= 32 {
        (1..n).collect()
    } else {
        (1..=32).map(|i| i * (n - 1) / 32).collect()
    };
    let mut constant = 0.0f64;
    for &lvl in &picks {
        let gl = g.level(lvl);
        let lhs = lq_norm(grid, gl, r).powi(3);
        if lhs == 0.0 {
            continue;
        }
        let wn = spatial_holder_norm(grid, aux.level(lvl), alpha);
        let grad = dirichlet_energy(grid, gl).sqrt();
        let mut rhs = wn.powf(e1) * grad.powf(e2);
        if which == InterpolationKind::Skt {
            rhs += wn.powi(3);
        }
        constant = constant.max(if rhs > 0.0 { lhs / rhs } else { f64::INFINITY });
    }
    Ok(InterpolationReport {
        alpha,
        exponent: r,
        constant,
        slices: picks.len(),
    })
}

/// `sum u_i - sum u_i^init` per level.
pub fn chemistry_mass_change(run: &ChemistryRun) -> SpaceTimeField {
    let init = run.total(0);
    let mut out = SpaceTimeField::new(run.grid.len());
    for n in 0..run.time.n_levels() {
        let t: Vec<f64> = run.total(n).iter().zip(&init).map(|(a, b)| a - b).collect();
        out.push(&t);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SktParams {
    pub d1: f64,
    pub d2: f64,
    pub sigma: f64,
    pub r_u: f64,
    pub r_v: f64,
    pub d11: f64,
    pub d12: f64,
    pub d21: f64,
    pub d22: f64,
}

impl SktParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.d1, self.d2, self.d11, self.d12, self.d21, self.d22];
        let nonneg = [self.sigma, self.r_u, self.r_v];
        if pos.iter().all(|v| *v > 0.0) && nonneg.iter().all(|v| *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("SKT parameters out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SktState {
    pub u: ScalarField,
    pub v: ScalarField,
    pub params: SktParams,
}

#[derive(Debug, Clone)]
pub struct SktRun {
    pub grid: SpaceGrid,
    pub time: TimeGrid,
    pub params: SktParams,
    pub u: SpaceTimeField,
    pub v: SpaceTimeField,
}

/// Per step: `v` with implicit diffusion, implicit loss `v (d21 u + d22 v^n)` and
/// explicit gain; then `u` through `z = mu u`, `mu = d1 + sigma v^{n+1}`,
/// with implicit loss `u (d11 u^n + d12 v^{n+1})` and explicit gain.
pub fn run_skt(grid: &SpaceGrid, tg: &TimeGrid, state: &SktState) -> Result<SktRun> {
    let p = state.params;
    p.validate()?;
    for (i, f) in [&state.u, &state.v].into_iter().enumerate() {
        if f.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: f.len(),
            });
        }
        check_positive(f, i + 1, 0)?;
    }
    let n = grid.len();
    let inv_dt = 1.0 / tg.dt;
    let mut u = state.u.clone();
    let mut v = state.v.clone();
    let mut uf = SpaceTimeField::with_initial(&u);
    let mut vf = SpaceTimeField::with_initial(&v);
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for step in 1..tg.n_levels() {
        for k in 0..n {
            diag[k] = inv_dt + p.d21 * u[k] + p.d22 * v[k];
            rhs[k] = v[k] * (inv_dt + p.r_v);
        }
        let chol = grid
            .shifted_operator(&diag, p.d2)
            .factor()
            .map_err(|reason| Error::SolveFailed { step, reason })?;
        chol.solve_in_place(&mut rhs);
        let v_new = rhs.clone();
        check_positive(&v_new, 2, step)?;
        for k in 0..n {
            let mu = p.d1 + p.sigma * v_new[k];
            diag[k] = (inv_dt + p.d11 * u[k] + p.d12 * v_new[k]) / mu;
            rhs[k] = u[k] * (inv_dt + p.r_u);
        }
        let chol = grid
            .shifted_operator(&diag, 1.0)
            .factor()
            .map_err(|reason| Error::SolveFailed { step, reason })?;
        chol.solve_in_place(&mut rhs);
        let u_new: Vec<f64> = rhs
            .iter()
            .zip(&v_new)
            .map(|(z, vv)| z / (p.d1 + p.sigma * vv))
            .collect();
        check_positive(&u_new, 1, step)?;
        uf.push(&u_new);
        vf.push(&v_new);
        u = u_new;
        v = v_new;
    }
    Ok(SktRun {
        grid: grid.clone(),
        time: *tg,
        params: p,
        u: uf,
        v: vf,
    })
}

impl SktRun {
    /// `max(|v_init|_inf, r_v / d22)`.
    pub fn v_bound(&self) -> f64 {
        let v0 = self.v.level(0).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v0.max(self.params.r_v / self.params.d22)
    }

    pub fn min_density(&self) -> f64 {
        self.u.min().min(self.v.min())
    }

    pub fn structure_certifications(&self) -> Vec<Certification> {
        vec![
            Certification::at_least("positivity", self.min_density(), -POSITIVITY_TOL),
            Certification::at_most("skt_v_bound", self.v.max_abs(), self.v_bound() + 1e-8),
        ]
    }

    /// Smallest `C_p` with `E(t) + D(t) <= C_p (1 + I(t))`.
    pub fn energy_constant(&self, p: f64) -> Result<EnergyReport> {
        if !(p > 0.0) {
            return Err(Error::InvalidParameter(format!("p={p} must be positive")));
        }
        let (e0, series) = energy_series(&self.grid, &self.time, &[&self.u], &[self.params.d1], p);
        let c_p = series.iter().map(|(l, i)| l / (1.0 + i)).fold(0.0f64, f64::max);
        Ok(EnergyReport {
            p,
            c_p,
            series,
            initial_energy: e0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SktAux {
    pub m: SpaceTimeField,
    pub nu: SpaceTimeField,
    pub w: SpaceTimeField,
    pub w_tilde: SpaceTimeField,
    pub cumulative_u: SpaceTimeField,
    pub nu_range: (f64, f64),
    pub nu_bounds: (f64, f64),
    pub m_min: f64,
    pub residual_inf: f64,
    /// Largest of `-u`, `-m` and `u + m - lap(w_tilde)` over the run.
    pub sandwich_excess: f64,
    pub tolerance: f64,
}

impl SktAux {
    pub fn nu_bounds_ok(&self) -> bool {
        self.nu_range.0 >= self.nu_bounds.0 - 1e-8 && self.nu_range.1 <= self.nu_bounds.1 + 1e-8
    }

    pub fn certifications(&self) -> Vec<Certification> {
        vec![
            Certification::new("skt_nu_bounds", self.nu_range.1, self.nu_bounds.1, Verdict::from_bool(self.nu_bounds_ok()))
                .param("nu_min", self.nu_range.0)
                .param("lower", self.nu_bounds.0),
            Certification::at_least("skt_m_nonnegative", self.m_min, -POSITIVITY_TOL),
            Certification::at_most("skt_aux_residual", self.residual_inf, self.tolerance),
            Certification::at_most("skt_sandwich", self.sandwich_excess, self.tolerance),
        ]
    }

    /// `u + m` per level.
    pub fn u_plus_m(&self, run: &SktRun) -> SpaceTimeField {
        run.u.zip_map(&self.m, |a, b| a + b)
    }
}

/// Builds `m`, `nu`, `w = int (mu u + m)`, `w_tilde`, checks the bounds, the
/// residual of `nu^{-1} dw/dt - Lw = u_init + r_u int u`, and
/// `0 <= u <= u + m <= lap(w_tilde) + tol`.
pub fn skt_aux_check(run: &SktRun, tolerance: f64) -> Result<SktAux> {
    let grid = &run.grid;
    let tg = &run.time;
    let p = run.params;
    let n_nodes = grid.len();
    let heat = factor_heat(grid, tg.dt, 1.0)?;
    let mut m = SpaceTimeField::with_initial(&vec![0.0; n_nodes]);
    let mut cur = vec![0.0; n_nodes];
    for n in 1..tg.n_levels() {
        for k in 0..n_nodes {
            let src = run.u.at(n, k) * (p.d11 * run.u.at(n - 1, k) + p.d12 * run.v.at(n, k));
            cur[k] = cur[k] / tg.dt + src;
        }
        heat.solve_in_place(&mut cur);
        m.push(&cur);
    }
    let mu = |n: usize, k: usize| p.d1 + p.sigma * run.v.at(n, k);
    let mut nu = SpaceTimeField::new(n_nodes);
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut lvl = vec![0.0; n_nodes];
    for n in 0..tg.n_levels() {
        for k in 0..n_nodes {
            let uu = run.u.at(n, k).max(0.0) + DENSITY_FLOOR;
            let mm = m.at(n, k).max(0.0) + DENSITY_FLOOR;
            lvl[k] = (mu(n, k) * uu + mm) / (uu + mm);
            range = (range.0.min(lvl[k]), range.1.max(lvl[k]));
        }
        nu.push(&lvl);
    }
    let flux = |n: usize| -> ScalarField { (0..n_nodes).map(|k| mu(n, k) * run.u.at(n, k) + m.at(n, k)).collect() };
    let w = cumulative(tg.n_levels(), n_nodes, tg.dt, flux);
    let cumulative_u = cumulative(tg.n_levels(), n_nodes, tg.dt, |n| run.u.level(n).to_vec());
    let u_init = run.u.level(0);
    let u_init_sup = u_init.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut residual_inf = 0.0f64;
    let mut excess = f64::NEG_INFINITY;
    let neg_lap = grid
        .shifted_operator(&vec![0.0; n_nodes], 1.0)
        .factor()
        .map_err(|reason| Error::SolveFailed { step: 0, reason })?;
    let mut w_tilde = SpaceTimeField::new(n_nodes);
    let quad: Vec<f64> = grid
        .nodes
        .iter()
        .map(|x| (x[0] * x[0] + x[1] * x[1]) / (2.0 * grid.dim as f64) * u_init_sup)
        .collect();
    for n in 0..tg.n_levels() {
        let lw = grid.laplacian(w.level(n));
        let iu = cumulative_u.level(n);
        for k in 0..n_nodes {
            if n > 0 {
                let dw = (w.at(n, k) - w.at(n - 1, k)) / tg.dt;
                let rho = dw / nu.at(n, k) - lw[k] - u_init[k] - p.r_u * iu[k];
                residual_inf = residual_inf.max(rho.abs());
            }
            let lap_wt = lw[k] + u_init_sup + p.r_u * iu[k];
            let (uu, mm) = (run.u.at(n, k), m.at(n, k));
            excess = excess.max(-uu).max(-mm).max(uu + mm - lap_wt);
        }
        let mut inv = iu.to_vec();
        neg_lap.solve_in_place(&mut inv);
        let wt: Vec<f64> = (0..n_nodes)
            .map(|k| w.at(n, k) + quad[k] - p.r_u * inv[k])
            .collect();
        w_tilde.push(&wt);
    }
    let v_sup = run.v.max_abs();
    Ok(SktAux {
        m_min: m.min(),
        m,
        nu,
        w,
        w_tilde,
        cumulative_u,
        nu_range: range,
        nu_bounds: (p.d1.min(1.0), (p.d1 + p.sigma * v_sup).max(1.0)),
        residual_inf,
        sandwich_excess: excess,
        tolerance,
    })
}
