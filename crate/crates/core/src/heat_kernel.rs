//! Dirichlet heat kernel of the discrete Laplacian, computed from a dense
//! eigendecomposition, together with the free-space Gaussian comparator and
//! the kernel bound certifications.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cert::{self, Certification, Verdict};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SpaceTimeField, TimeGrid};
use crate::grid::{dist, DomainSpec, SpaceGrid};

/// Dense eigensolves above this size are refused.
pub const MAX_SPECTRAL_NODES: usize = 5_000;

/// Orthonormal eigenbasis of the discrete Dirichlet Laplacian with respect to
/// the cell-weighted inner product `<u, v> = h^d sum u v`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    /// Sorted decreasingly, all negative: `eigenvalues[0]` is the principal one.
    pub eigenvalues: Vec<f64>,
    /// Column `k` holds the eigenfield of `eigenvalues[k]`.
    pub modes: DMatrix<f64>,
    cell: f64,
}

impl SpectralBasis {
    pub fn compute(grid: &SpaceGrid) -> Result<Self> {
        let n = grid.len();
        if n > MAX_SPECTRAL_NODES {
            return Err(Error::InvalidParameter(format!(
                "{n} nodes exceeds the dense eigensolve cap {MAX_SPECTRAL_NODES}"
            )));
        }
        let eig = SymmetricEigen::new(grid.laplacian_matrix());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let scale = 1.0 / grid.cell().sqrt();
        let mut modes = DMatrix::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        for (col, &k) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            // fix the sign so that the first nonzero entry is positive
            let sign = v
                .iter()
                .find(|x| x.abs() > 1e-8)
                .map_or(1.0, |x| x.signum());
            modes.set_column(col, &(v * (scale * sign)));
            eigenvalues.push(eig.eigenvalues[k]);
        }
        Ok(SpectralBasis {
            eigenvalues,
            modes,
            cell: grid.cell(),
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn mode(&self, k: usize) -> Vec<f64> {
        self.modes.column(k).iter().copied().collect()
    }

    /// Coefficients `<u, phi_k>`.
    pub fn project(&self, u: &[f64]) -> DVector<f64> {
        self.modes.tr_mul(&DVector::from_column_slice(u)) * self.cell
    }

    pub fn synthesize(&self, coeffs: &DVector<f64>) -> ScalarField {
        (&self.modes * coeffs).iter().copied().collect()
    }

    /// `e^{t L} u`.
    pub fn heat_flow(&self, u: &[f64], t: f64) -> ScalarField {
        let mut c = self.project(u);
        for (ck, lam) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= (lam * t).exp();
        }
        self.synthesize(&c)
    }

    /// Kernel restricted to `rows x cols`.
    pub fn kernel_block(&self, t: f64, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let n = self.len();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|l| (l * t).exp()).collect();
        let a = DMatrix::from_fn(rows.len(), n, |i, k| self.modes[(rows[i], k)] * weights[k]);
        let b = DMatrix::from_fn(n, cols.len(), |k, j| self.modes[(cols[j], k)]);
        a * b
    }

    /// Full kernel matrix `Gamma(t, x_i, y_j)`.
    pub fn kernel_matrix(&self, t: f64) -> DMatrix<f64> {
        let weights = DVector::from_iterator(self.len(), self.eigenvalues.iter().map(|l| (l * t).exp()));
        let mut scaled = self.modes.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= weights[k];
        }
        scaled * self.modes.transpose()
    }
}

/// `Gamma(t, ., y)` for one source node.
#[derive(Debug, Clone)]
pub struct KernelSlice {
    pub t: f64,
    pub source: usize,
    pub values: ScalarField,
}

impl KernelSlice {
    pub fn mass(&self, grid: &SpaceGrid) -> f64 {
        crate::field::integral(grid, &self.values)
    }
}

pub fn dirichlet_kernel(grid: &SpaceGrid, basis: &SpectralBasis, t: f64, source: usize) -> Result<KernelSlice> {
    let limit = grid.h * grid.h;
    if !(t >= limit * (1.0 - 1e-12)) {
        return Err(Error::KernelTimeTooSmall { t, limit });
    }
    let mut c = DVector::zeros(basis.len());
    for k in 0..basis.len() {
        c[k] = (basis.eigenvalues[k] * t).exp() * basis.modes[(source, k)];
    }
    Ok(KernelSlice {
        t,
        source,
        values: basis.synthesize(&c),
    })
}

/// Free-space Gaussian `p(t, r)` and its running supremum over `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComparator {
    pub value: f64,
    /// `+inf` when `r = 0` (the supremum over `s -> 0` is unbounded).
    pub running_sup: f64,
}

impl GaussianComparator {
    pub fn is_unbounded(&self) -> bool {
        self.running_sup.is_infinite()
    }
}

pub fn gaussian(t: f64, r: f64, dim: usize) -> f64 {
    (4.0 * std::f64::consts::PI * t).powf(-(dim as f64) / 2.0) * (-r * r / (4.0 * t)).exp()
}

pub fn gaussian_comparator(t: f64, r: f64, dim: usize) -> Result<GaussianComparator> {
    if !(t > 0.0) || !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("comparator needs t>0, r>=0 (t={t}, r={r})")));
    }
    let value = gaussian(t, r, dim);
    let peak = r * r / (2.0 * dim as f64);
    let running_sup = if t <= peak {
        value
    } else if r == 0.0 {
        f64::INFINITY
    } else {
        gaussian(peak, r, dim)
    };
    Ok(GaussianComparator { value, running_sup })
}

/// Duhamel integral `int_0^{t_n} int Gamma((t_n - s)/A, x, y) f(s, y) dy ds` at
/// every level, integrating each mode exactly with `f` frozen at the
/// step-average on each step.
pub fn duhamel_levels(basis: &SpectralBasis, tg: &TimeGrid, f: &SpaceTimeField, clock: f64) -> Result<SpaceTimeField> {
    if !(clock > 0.0) {
        return Err(Error::InvalidParameter(format!("time scale A={clock} must be positive")));
    }
    let n = basis.len();
    let decay: Vec<f64> = basis.eigenvalues.iter().map(|l| (l * tg.dt / clock).exp()).collect();
    let gain: Vec<f64> = basis
        .eigenvalues
        .iter()
        .zip(&decay)
        .map(|(l, e)| clock / (-l) * (1.0 - e))
        .collect();
    let mut c = DVector::zeros(n);
    let mut out = SpaceTimeField::new(f.n_nodes());
    out.push(&vec![0.0; f.n_nodes()]);
    let mut fk_prev = basis.project(f.level(0));
    for m in 1..f.n_levels() {
        let fk = basis.project(f.level(m));
        for k in 0..n {
            c[k] = decay[k] * c[k] + gain[k] * 0.5 * (fk_prev[k] + fk[k]);
        }
        out.push(&basis.synthesize(&c));
        fk_prev = fk;
    }
    Ok(out)
}

pub fn duhamel(basis: &SpectralBasis, tg: &TimeGrid, f: &SpaceTimeField, clock: f64, level: usize) -> Result<ScalarField> {
    if level >= f.n_levels() {
        return Err(Error::InvalidParameter(format!("level {level} outside the time grid")));
    }
    let mut sub = SpaceTimeField::new(f.n_nodes());
    for m in 0..=level {
        sub.push(f.level(m));
    }
    Ok(duhamel_levels(basis, tg, &sub, clock)?.last().to_vec())
}

/// Explicit constant of the kernel lower bound: `R^d inf Gamma >= c_low`.
pub fn lower_bound_constant(dim: usize, c0: f64) -> f64 {
    let d = dim as f64;
    (8.0 * d / (9.0 * std::f64::consts::PI)).powf(d / 2.0) * (-c0 * d).exp() * (5.0 * d / 18.0)
}

/// The same constant evaluated through the unsimplified chain of the lower
/// bound argument, for arbitrary `a0`, `R`.
pub fn lower_bound_chain(dim: usize, radius: f64, a0: f64, c0: f64) -> f64 {
    let d = dim as f64;
    let t_r = lower_bound_horizon(dim, radius, a0);
    let r2 = radius * radius;
    (a0 / (4.0 * std::f64::consts::PI * t_r)).powf(d / 2.0)
        * (-c0 * a0 * 9.0 * r2 / (16.0 * 2.0 * t_r)).exp()
        * (5.0 * a0 * r2 / (16.0 * 4.0 * t_r))
        * radius.powf(d)
}

/// `T_R = a0 * 9 R^2 / (32 d)`.
pub fn lower_bound_horizon(dim: usize, radius: f64, a0: f64) -> f64 {
    a0 * 9.0 * radius * radius / (32.0 * dim as f64)
}

#[derive(Debug, Clone)]
pub struct LowerBoundReport {
    pub t_r: f64,
    pub c_low: f64,
    /// `inf Gamma * R^d` over the sampled balls and time window.
    pub measured_inf: f64,
    /// `min (Gamma - Psi)` over the comparator sample.
    pub comparator_gap: f64,
    pub sampled_nodes: usize,
}

impl LowerBoundReport {
    pub fn certifications(&self, radius: f64, a0: f64, c0: f64) -> Vec<Certification> {
        vec![
            Certification::at_least("kernel_lower_bound", self.measured_inf, self.c_low)
                .param("R", radius)
                .param("a0", a0)
                .param("c0", c0)
                .param("T_R", self.t_r),
            Certification::at_least("kernel_comparator", self.comparator_gap, -COMPARATOR_TOL)
                .param("R", radius)
                .param("nodes", self.sampled_nodes),
        ]
    }
}

/// Slack on `Gamma >= Psi` for the discretization of the kernel.
pub const COMPARATOR_TOL: f64 = 1e-8;
const SAMPLE_TIMES: usize = 16;

/// Lower bound on the ball `B(0, R)`: the grid must be built on that ball.
pub fn lower_bound_check(grid: &SpaceGrid, basis: &SpectralBasis, radius: f64, a0: f64, c0: f64) -> Result<LowerBoundReport> {
    if !(a0 > 0.0 && c0 >= 1.0 && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("need a0>0, c0>=1, R>0 (a0={a0}, c0={c0}, R={radius})")));
    }
    let is_ball = match grid.spec {
        DomainSpec::Interval { lo, hi } => ((hi - lo) / 2.0 - radius).abs() < 1e-12 * radius,
        DomainSpec::Disk { radius: r, .. } => (r - radius).abs() < 1e-12 * radius,
        DomainSpec::Rectangle { .. } => false,
    };
    if !is_ball {
        return Err(Error::InvalidParameter("lower bound check requires the grid of B(0, R)".into()));
    }
    let center = grid.spec.center();
    let inner: Vec<usize> = (0..grid.len())
        .filter(|&k| dist(grid.nodes[k], center) < radius / 4.0)
        .collect();
    if inner.len() < 8 {
        return Err(Error::TooCoarse(format!("{} nodes inside B(0, R/4), need 8", inner.len())));
    }
    let d = grid.dim;
    let t_r = lower_bound_horizon(d, radius, a0);
    let (t_lo, t_hi) = (t_r / (2.0 * c0 * a0), t_r / a0);
    let rd = radius.powi(d as i32);
    let mut measured_inf = f64::INFINITY;
    for j in 0..SAMPLE_TIMES {
        let t = t_lo + (t_hi - t_lo) * j as f64 / (SAMPLE_TIMES - 1) as f64;
        let block = basis.kernel_block(t, &inner, &inner);
        measured_inf = measured_inf.min(block.min() * rd);
    }

    // Gamma >= p(t, |x-y|) - sup_{s<=t} p(s, 3R/4) for t <= 9R^2/(32d)
    let t_max = 9.0 * radius * radius / (32.0 * d as f64);
    let mut comparator_gap = f64::INFINITY;
    for j in 1..=SAMPLE_TIMES {
        let t = t_max * j as f64 / SAMPLE_TIMES as f64;
        if t < grid.h * grid.h {
            continue;
        }
        let block = basis.kernel_block(t, &inner, &inner);
        let far = gaussian_comparator(t, 0.75 * radius, d)?.running_sup;
        for (a, &x) in inner.iter().enumerate() {
            for (b, &y) in inner.iter().enumerate() {
                let psi = gaussian(t, grid.distance(x, y), d) - far;
                comparator_gap = comparator_gap.min(block[(a, b)] - psi);
            }
        }
    }
    Ok(LowerBoundReport {
        t_r,
        c_low: lower_bound_constant(d, c0),
        measured_inf,
        comparator_gap,
        sampled_nodes: inner.len(),
    })
}

/// Empirical constants of the kernel upper bounds on one grid.
#[derive(Debug, Clone)]
pub struct UpperBoundConstants {
    /// `sup_{t, y} int |x - y| Gamma(t, x, y) dx / t^{1/2 - eps}`.
    pub moment_ratio: f64,
    /// `(c, C)`: smallest `C` with `Gamma <= C d_x d_y t^{-(d+2)/2} e^{-c|x-y|^2/t}`.
    pub gaussian: Vec<(f64, f64)>,
}

pub const GAUSSIAN_RATES: [f64; 2] = [1.0 / 8.0, 1.0 / 16.0];

/// Times `t_lo * (t_hi/t_lo)^{j/15}`, `j = 0..16`.
pub fn geometric_sweep(t_lo: f64, t_hi: f64) -> Vec<f64> {
    (0..SAMPLE_TIMES)
        .map(|j| t_lo * (t_hi / t_lo).powf(j as f64 / (SAMPLE_TIMES - 1) as f64))
        .collect()
}

/// Relative level below which spectral sums are roundoff, not kernel values.
const KERNEL_NOISE: f64 = 1e-12;

pub fn upper_bound_constants(grid: &SpaceGrid, basis: &SpectralBasis, epsilon: f64, times: &[f64]) -> Result<UpperBoundConstants> {
    let n = grid.len();
    let d = grid.dim as f64;
    let all: Vec<usize> = (0..n).collect();
    let mut moment_ratio = 0.0f64;
    let mut gaussian = GAUSSIAN_RATES.iter().map(|&c| (c, 0.0f64)).collect::<Vec<_>>();
    for &t in times {
        if t < grid.h * grid.h * (1.0 - 1e-12) {
            return Err(Error::KernelTimeTooSmall { t, limit: grid.h * grid.h });
        }
        let k = basis.kernel_block(t, &all, &all);
        let floor = KERNEL_NOISE * k.max();
        for y in 0..n {
            let mut moment = 0.0;
            for x in 0..n {
                moment += grid.distance(x, y) * k[(x, y)];
            }
            moment *= grid.cell();
            moment_ratio = moment_ratio.max(moment / t.powf(0.5 - epsilon));
        }
        let tscale = t.powf((d + 2.0) / 2.0);
        for x in 0..n {
            for y in 0..n {
                let g = k[(x, y)];
                if g <= floor {
                    continue;
                }
                let r2 = grid.distance(x, y).powi(2);
                let base = g * tscale / (grid.boundary_distance[x] * grid.boundary_distance[y]);
                for (c, cmax) in gaussian.iter_mut() {
                    *cmax = cmax.max(base * (*c * r2 / t).exp());
                }
            }
        }
    }
    Ok(UpperBoundConstants { moment_ratio, gaussian })
}

/// Upper bound constants on `h` and `h/2`, certified finite and stable.
pub fn upper_bound_checks(spec: &DomainSpec, h: f64, epsilon: f64, horizon: f64) -> Result<Vec<Certification>> {
    let coarse = SpaceGrid::new(spec.clone(), h)?;
    let fine = SpaceGrid::new(spec.clone(), h / 2.0)?;
    let times = geometric_sweep(4.0 * h * h, horizon);
    let kc = upper_bound_constants(&coarse, &SpectralBasis::compute(&coarse)?, epsilon, &times)?;
    let kf = upper_bound_constants(&fine, &SpectralBasis::compute(&fine)?, epsilon, &times)?;
    let mut out = vec![cert::stability("kernel_moment", kc.moment_ratio, kf.moment_ratio)
        .param("epsilon", epsilon)
        .param("h", h)];
    for ((c, a), (_, b)) in kc.gaussian.iter().zip(&kf.gaussian) {
        out.push(cert::stability("kernel_boundary_gaussian", *a, *b).param("c", *c).param("h", h));
    }
    Ok(out)
}

/// Ratios `sup_x |duhamel(f, A, t)| / (t^{gamma/2} ||f||)` over the levels in `levels`.
pub fn duhamel_ratios(
    basis: &SpectralBasis,
    tg: &TimeGrid,
    f: &SpaceTimeField,
    clock: f64,
    gamma: f64,
    f_norm: f64,
    levels: &[usize],
) -> Result<Vec<f64>> {
    let all = duhamel_levels(basis, tg, f, clock)?;
    Ok(levels
        .iter()
        .map(|&n| {
            let sup = all.level(n).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            sup / (tg.time(n).powf(gamma / 2.0) * f_norm)
        })
        .collect())
}

/// Certification of the Duhamel scaling: the ratio stays below `bound`.
pub fn duhamel_certification(ratios: &[f64], bound: f64) -> Certification {
    let worst = ratios.iter().fold(0.0f64, |m, v| m.max(*v));
    let verdict = if worst.is_finite() && worst <= bound { Verdict::Pass } else { Verdict::Fail };
    Certification::new("duhamel_scaling", worst, bound, verdict).param("samples", ratios.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::integral;
    use crate::linalg::solve_checked;
    use std::f64::consts::PI;

    fn unit(h: f64) -> (SpaceGrid, SpectralBasis) {
        let g = SpaceGrid::new(DomainSpec::unit_interval(), h).unwrap();
        let b = SpectralBasis::compute(&g).unwrap();
        (g, b)
    }

    #[test]
    fn comparator_formula_and_branches() {
        let c = gaussian_comparator(1.0, 1.0, 1).unwrap();
        assert!((c.value - 0.219_695_644).abs() < 1e-8);
        // t = 1 > r^2/2: the sup sits at the peak time 1/2
        assert_eq!(c.running_sup, gaussian(0.5, 1.0, 1));
        let c = gaussian_comparator(0.4, 1.0, 1).unwrap();
        assert_eq!(c.running_sup, gaussian(0.4, 1.0, 1));
        assert!(gaussian_comparator(0.3, 0.0, 2).unwrap().is_unbounded());
        assert!(gaussian_comparator(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn comparator_sup_nondecreasing() {
        let mut prev = 0.0;
        for j in 1..200 {
            let s = gaussian_comparator(j as f64 * 0.01, 0.75, 2).unwrap().running_sup;
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let (g, b) = unit(1.0 / 32.0);
        let gram = b.modes.tr_mul(&b.modes) * g.cell();
        let id = DMatrix::<f64>::identity(b.len(), b.len());
        assert!((gram - id).abs().max() < 1e-10);
        assert!(b.eigenvalues.windows(2).all(|w| w[0] > w[1]));
        assert!(b.eigenvalues[0] < 0.0);
    }

    #[test]
    fn kernel_matches_sine_series() {
        let (g, b) = unit(1.0 / 128.0);
        let t = 0.05;
        let y = g.nearest_node([0.3, 0.0]);
        let slice = dirichlet_kernel(&g, &b, t, y).unwrap();
        let yv = g.nodes[y][0];
        for (k, p) in g.nodes.iter().enumerate() {
            let mut s = 0.0;
            for m in 1..200 {
                let mf = m as f64;
                let term = 2.0 * (mf * PI * p[0]).sin() * (mf * PI * yv).sin() * (-mf * mf * PI * PI * t).exp();
                s += term;
                if (-mf * mf * PI * PI * t).exp() < 1e-13 {
                    break;
                }
            }
            assert!((slice.values[k] - s).abs() < 3e-4, "x={} got {} want {}", p[0], slice.values[k], s);
        }
    }

    #[test]
    fn kernel_symmetric_nonnegative_submarkov() {
        let (g, b) = unit(1.0 / 64.0);
        let mut prev_mass = f64::INFINITY;
        for &t in &[g.h * g.h, 0.001, 0.01, 0.1, 0.5] {
            let k = b.kernel_matrix(t);
            assert!((&k - k.transpose()).abs().max() < 1e-9);
            assert!(k.min() >= -1e-10);
            let y = g.len() / 3;
            let s = dirichlet_kernel(&g, &b, t, y).unwrap();
            let mass = s.mass(&g);
            assert!(mass <= 1.0 + 1e-8);
            assert!(mass < prev_mass);
            prev_mass = mass;
        }
        assert!(dirichlet_kernel(&g, &b, 0.5 * g.h * g.h, 0).is_err());
    }

    #[test]
    fn semigroup_property() {
        let (g, b) = unit(1.0 / 128.0);
        let y = 40;
        let (t, s) = (0.01, 0.02);
        let lhs = dirichlet_kernel(&g, &b, t + s, y).unwrap().values;
        let kt = b.kernel_matrix(t);
        let ks = dirichlet_kernel(&g, &b, s, y).unwrap().values;
        for x in 0..g.len() {
            let conv: f64 = (0..g.len()).map(|z| kt[(x, z)] * ks[z]).sum::<f64>() * g.cell();
            assert!((conv - lhs[x]).abs() < 1e-6);
        }
    }

    #[test]
    fn kernel_agrees_with_implicit_stepping_of_a_delta() {
        let (g, b) = unit(1.0 / 32.0);
        let y = 10;
        let t = 0.02;
        let err = |dt: f64| {
            let steps = (t / dt).round() as usize;
            let mut u = vec![0.0; g.len()];
            u[y] = 1.0 / g.h;
            let a = g.shifted_operator(&vec![1.0 / dt; g.len()], 1.0);
            for _ in 0..steps {
                let rhs: Vec<f64> = u.iter().map(|v| v / dt).collect();
                u = solve_checked(&a, &rhs).unwrap().0;
            }
            let exact = dirichlet_kernel(&g, &b, t, y).unwrap().values;
            u.iter().zip(&exact).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!(e2 < e1);
        assert!((e1 / e2) > 1.8, "ratio {}", e1 / e2);
    }

    #[test]
    fn duhamel_zero_forcing() {
        let (g, b) = unit(1.0 / 16.0);
        let tg = TimeGrid::new(0.1, 0.01).unwrap();
        let f = SpaceTimeField::constant(&g, &tg, 0.0);
        let u = duhamel(&b, &tg, &f, 1.0, tg.n_steps).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn duhamel_matches_implicit_euler_for_unit_forcing() {
        let (g, b) = unit(1.0 / 128.0);
        let tg = TimeGrid::new(0.5, 1e-3).unwrap();
        let f = SpaceTimeField::constant(&g, &tg, 1.0);
        let spectral = duhamel(&b, &tg, &f, 1.0, tg.n_steps).unwrap();
        // independent oracle: implicit Euler for dv/dt - Lv = 1, v(0) = 0
        let dt = 1e-4;
        let a = g.shifted_operator(&vec![1.0 / dt; g.len()], 1.0);
        let chol = a.factor().unwrap();
        let mut v = vec![0.0; g.len()];
        for _ in 0..5000 {
            let mut rhs: Vec<f64> = v.iter().map(|x| x / dt + 1.0).collect();
            chol.solve_in_place(&mut rhs);
            v = rhs;
        }
        let mid = g.nearest_node([0.5, 0.0]);
        assert!((spectral[mid] - v[mid]).abs() < 2e-3);
        assert!(spectral[mid] < 0.125 && spectral[mid] > 0.1);
    }

    #[test]
    fn lower_bound_constant_matches_chain() {
        assert!((lower_bound_constant(1, 2.0) - 0.0200).abs() < 5e-5);
        for &(d, r, a0, c0) in &[(1, 1.0, 1.0, 2.0), (2, 0.5, 3.0, 1.5), (1, 2.0, 0.5, 4.0)] {
            let chain = lower_bound_chain(d, r, a0, c0);
            assert!((chain - lower_bound_constant(d, c0)).abs() < 1e-14 * chain.max(1e-300));
        }
        assert_eq!(lower_bound_horizon(2, 1.0, 1.0), 9.0 / 64.0);
    }

    #[test]
    fn lower_bound_rejects_coarse_or_wrong_grid() {
        let g = SpaceGrid::new(DomainSpec::interval(-1.0, 1.0), 0.25).unwrap();
        let b = SpectralBasis::compute(&g).unwrap();
        assert!(matches!(lower_bound_check(&g, &b, 1.0, 1.0, 2.0), Err(Error::TooCoarse(_))));
        let (g, b) = unit(1.0 / 64.0);
        assert!(lower_bound_check(&g, &b, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn moment_ratio_bounded_on_sweep() {
        let (g, b) = unit(1.0 / 64.0);
        let y = g.nearest_node([0.5, 0.0]);
        let mut ratios = Vec::new();
        for &t in &[0.01, 0.02, 0.05, 0.1, 0.2, 0.5] {
            let s = dirichlet_kernel(&g, &b, t, y).unwrap();
            let m: f64 = (0..g.len()).map(|x| g.distance(x, y) * s.values[x]).sum::<f64>() * g.cell();
            ratios.push(m / t.powf(0.45));
        }
        assert!(ratios.iter().all(|r| r.is_finite() && *r < 1.0));
    }

    #[test]
    fn large_time_kernel_is_principal_mode() {
        let (g, b) = unit(1.0 / 32.0);
        let t = 2.0;
        let k = b.kernel_matrix(t);
        let phi = b.mode(0);
        let lam = b.eigenvalues[0];
        for x in 0..g.len() {
            for y in 0..g.len() {
                let lead = (lam * t).exp() * phi[x] * phi[y];
                assert!((k[(x, y)] - lead).abs() < 1e-12);
            }
        }
        // principal mode vanishes linearly: phi(h)/h ~ phi'(0)
        assert!((phi[0] / g.h - 2f64.sqrt() * PI).abs() < 0.05);
        assert!(integral(&g, &phi) > 0.0);
    }
}
