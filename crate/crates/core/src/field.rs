//! Time grids, sampled fields, exponent pairs and the Lebesgue norms built on them.

use crate::error::{Error, Result};
use crate::grid::SpaceGrid;

/// One real value per interior node.
pub type ScalarField = Vec<f64>;

/// Uniform time grid `t_n = n * dt`, `n = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// The step is adjusted so that `n_steps * dt` reproduces the horizon.
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0 && dt.is_finite() && dt > 0.0) {
            return Err(Error::BadTimeGrid(format!("T={horizon}, dt={dt}")));
        }
        let n_steps = (horizon / dt).round().max(1.0) as usize;
        Ok(TimeGrid {
            horizon,
            dt: horizon / n_steps as f64,
            n_steps,
        })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn n_levels(&self) -> usize {
        self.n_steps + 1
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_levels()).map(move |n| self.time(n))
    }

    /// Same horizon with every time multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        TimeGrid {
            horizon: self.horizon * factor,
            dt: self.dt * factor,
            n_steps: self.n_steps,
        }
    }
}

/// A [`ScalarField`] per time level, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    n_nodes: usize,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(n_nodes: usize) -> Self {
        SpaceTimeField {
            n_nodes,
            data: Vec::new(),
        }
    }

    pub fn with_initial(initial: &[f64]) -> Self {
        SpaceTimeField {
            n_nodes: initial.len(),
            data: initial.to_vec(),
        }
    }

    /// Evaluate `f(t, x)` on every grid point.
    pub fn sample<F: Fn(f64, [f64; 2]) -> f64>(grid: &SpaceGrid, tg: &TimeGrid, f: F) -> Self {
        let mut data = Vec::with_capacity(grid.len() * tg.n_levels());
        for t in tg.times() {
            data.extend(grid.nodes.iter().map(|&p| f(t, p)));
        }
        SpaceTimeField {
            n_nodes: grid.len(),
            data,
        }
    }

    pub fn constant(grid: &SpaceGrid, tg: &TimeGrid, value: f64) -> Self {
        SpaceTimeField {
            n_nodes: grid.len(),
            data: vec![value; grid.len() * tg.n_levels()],
        }
    }

    pub fn from_levels(levels: Vec<Vec<f64>>) -> Result<Self> {
        let n_nodes = levels.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_nodes * levels.len());
        for l in levels {
            if l.len() != n_nodes {
                return Err(Error::ShapeMismatch {
                    expected: n_nodes,
                    got: l.len(),
                });
            }
            data.extend(l);
        }
        Ok(SpaceTimeField { n_nodes, data })
    }

    pub fn push(&mut self, level: &[f64]) {
        assert_eq!(level.len(), self.n_nodes, "level length mismatch");
        self.data.extend_from_slice(level);
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_levels(&self) -> usize {
        if self.n_nodes == 0 {
            0
        } else {
            self.data.len() / self.n_nodes
        }
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.data[n * self.n_nodes..(n + 1) * self.n_nodes]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.n_nodes..(n + 1) * self.n_nodes]
    }

    pub fn at(&self, n: usize, node: usize) -> f64 {
        self.data[n * self.n_nodes + node]
    }

    pub fn last(&self) -> &[f64] {
        self.level(self.n_levels() - 1)
    }

    pub fn levels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_nodes.max(1))
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SpaceTimeField {
            n_nodes: self.n_nodes,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.data.len(), other.data.len(), "field shape mismatch");
        SpaceTimeField {
            n_nodes: self.n_nodes,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn check_shape(&self, grid: &SpaceGrid, tg: &TimeGrid) -> Result<()> {
        if self.n_nodes != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: self.n_nodes,
            });
        }
        if self.n_levels() != tg.n_levels() {
            return Err(Error::ShapeMismatch {
                expected: tg.n_levels(),
                got: self.n_levels(),
            });
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::NonFinite {
                level: k / self.n_nodes.max(1),
                node: k % self.n_nodes.max(1),
            }),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Integrability exponents `(p, q)` of the forcing together with the derived
/// scaling exponent `gamma = 2 - 2/p - d/q` and the boundary exponent
/// `gamma_tilde = min(gamma, 1 - 2 epsilon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentPair {
    pub p: f64,
    pub q: f64,
    pub dim: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub gamma_tilde: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.05;

fn recip(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

impl ExponentPair {
    pub fn new(p: f64, q: f64, dim: usize, epsilon: f64) -> Result<Self> {
        if !(p >= 1.0 && q >= 1.0) {
            return Err(Error::BadExponents(format!("p={p}, q={q} must lie in [1, inf]")));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::BadExponents(format!("epsilon={epsilon} must lie in (0, 1/2)")));
        }
        let gamma = 2.0 - 2.0 * recip(p) - dim as f64 * recip(q);
        if gamma <= 0.0 {
            return Err(Error::BadExponents(format!(
                "gamma = 2 - 2/p - d/q = {gamma} must be positive"
            )));
        }
        Ok(ExponentPair {
            p,
            q,
            dim,
            gamma,
            epsilon,
            gamma_tilde: gamma.min(1.0 - 2.0 * epsilon),
        })
    }

    pub fn sup(dim: usize) -> Self {
        Self::new(f64::INFINITY, f64::INFINITY, dim, DEFAULT_EPSILON).expect("valid")
    }
}

/// Cell-weighted `L^q(Omega)` norm.
pub fn lq_norm(grid: &SpaceGrid, u: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        (grid.cell() * u.iter().map(|v| v.abs().powf(q)).sum::<f64>()).powf(1.0 / q)
    }
}

pub fn integral(grid: &SpaceGrid, u: &[f64]) -> f64 {
    grid.cell() * u.iter().sum::<f64>()
}

pub fn inner(grid: &SpaceGrid, u: &[f64], v: &[f64]) -> f64 {
    grid.cell() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

/// `L^p((0,T); L^q(Omega))` norm: cell-weighted sums in space, midpoint rule
/// in time; `p = inf` takes the maximum over all sampled levels.
pub fn mixed_norm(field: &SpaceTimeField, p: f64, q: f64, grid: &SpaceGrid, tg: &TimeGrid) -> Result<f64> {
    field.check_shape(grid, tg)?;
    field.check_finite()?;
    if p.is_infinite() {
        return Ok(field
            .levels()
            .map(|l| lq_norm(grid, l, q))
            .fold(0.0f64, f64::max));
    }
    let mut mid = vec![0.0; grid.len()];
    let mut acc = 0.0;
    for n in 1..field.n_levels() {
        let (a, b) = (field.level(n - 1), field.level(n));
        for k in 0..mid.len() {
            mid[k] = 0.5 * (a[k] + b[k]);
        }
        acc += tg.dt * lq_norm(grid, &mid, q).powf(p);
    }
    Ok(acc.powf(1.0 / p))
}

/// Space-time `L^r((0,T) x Omega)` norm over levels `1..=N` (right-endpoint rule).
pub fn spacetime_norm(field: &SpaceTimeField, r: f64, grid: &SpaceGrid, tg: &TimeGrid) -> f64 {
    if r.is_infinite() {
        return field.levels().skip(1).fold(0.0f64, |m, l| m.max(lq_norm(grid, l, r)));
    }
    let mut acc = 0.0;
    for l in field.levels().skip(1) {
        acc += tg.dt * grid.cell() * l.iter().map(|v| v.abs().powf(r)).sum::<f64>();
    }
    acc.powf(1.0 / r)
}

/// `sup |u| + sup |grad u|` with one-sided differences (exterior values zero).
pub fn c1_norm(grid: &SpaceGrid, u: &[f64]) -> f64 {
    let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    sup + lipschitz_norm(grid, u)
}

/// Discrete Lipschitz constant over lattice edges, including edges to the boundary.
pub fn lipschitz_norm(grid: &SpaceGrid, u: &[f64]) -> f64 {
    grid.edge_gradients(u).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
