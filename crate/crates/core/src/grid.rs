//! Uniform lattice discretization of intervals, rectangles and disks.
//!
//! Interior nodes carry the unknowns. Lattice neighbours that fall outside the
//! domain are treated as homogeneous Dirichlet data, so the discrete Laplacian
//! is the standard second-order stencil with exterior values set to zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SpdBandMatrix;

/// Bounded domain on which the problems are posed.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Interval { lo: f64, hi: f64 },
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
    Disk { center: [f64; 2], radius: f64 },
}

impl DomainSpec {
    pub fn interval(lo: f64, hi: f64) -> Self {
        DomainSpec::Interval { lo, hi }
    }

    pub fn unit_interval() -> Self {
        DomainSpec::Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2]) -> Self {
        DomainSpec::Rectangle { lo, hi }
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        DomainSpec::Disk { center, radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn shape_name(&self) -> &'static str {
        match self {
            DomainSpec::Interval { .. } => "interval",
            DomainSpec::Rectangle { .. } => "rectangle",
            DomainSpec::Disk { .. } => "disk",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DomainSpec::Interval { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            DomainSpec::Rectangle { lo, hi } => (0..2).all(|k| lo[k].is_finite() && hi[k].is_finite() && hi[k] > lo[k]),
            DomainSpec::Disk { center, radius } => {
                center.iter().all(|c| c.is_finite()) && radius.is_finite() && radius > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DegenerateDomain(format!("{self:?} has zero measure")))
        }
    }

    /// Distance from `p` to the boundary, computed from the analytic geometry.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            DomainSpec::Interval { lo, hi } => (p[0] - lo).min(hi - p[0]),
            DomainSpec::Rectangle { lo, hi } => (p[0] - lo[0])
                .min(hi[0] - p[0])
                .min(p[1] - lo[1])
                .min(hi[1] - p[1]),
            DomainSpec::Disk { center, radius } => {
                radius - ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt()
            }
        }
    }

    /// Radius of the largest ball contained in the domain.
    pub fn inradius(&self) -> f64 {
        match *self {
            DomainSpec::Interval { lo, hi } => 0.5 * (hi - lo),
            DomainSpec::Rectangle { lo, hi } => 0.5 * (hi[0] - lo[0]).min(hi[1] - lo[1]),
            DomainSpec::Disk { radius, .. } => radius,
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match *self {
            DomainSpec::Interval { lo, hi } => [0.5 * (lo + hi), 0.0],
            DomainSpec::Rectangle { lo, hi } => [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
            DomainSpec::Disk { center, .. } => center,
        }
    }

    /// Flat `key = value` block describing the domain and spacing.
    pub fn to_kv(&self, h: f64) -> String {
        let extents = match *self {
            DomainSpec::Interval { lo, hi } => format!("{lo},{hi}"),
            DomainSpec::Rectangle { lo, hi } => format!("{},{},{},{}", lo[0], hi[0], lo[1], hi[1]),
            DomainSpec::Disk { center, radius } => format!("{},{},{}", center[0], center[1], radius),
        };
        let mut out = String::new();
        let _ = writeln!(out, "shape = {}", self.shape_name());
        let _ = writeln!(out, "extents = {extents}");
        let _ = writeln!(out, "h = {h}");
        out
    }

    /// Parse the `shape` / `extents` keys produced by [`DomainSpec::to_kv`].
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self> {
        let shape = map.get("shape").ok_or_else(|| Error::MissingKey("shape".into()))?;
        let extents = map.get("extents").ok_or_else(|| Error::MissingKey("extents".into()))?;
        let vals = extents
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("extents `{extents}`: {e}")))?;
        let want = |n: usize| -> Result<()> {
            if vals.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!("{shape} needs {n} extents, got {}", vals.len())))
            }
        };
        let spec = match shape.trim() {
            "interval" => {
                want(2)?;
                DomainSpec::interval(vals[0], vals[1])
            }
            "rectangle" => {
                want(4)?;
                DomainSpec::rectangle([vals[0], vals[2]], [vals[1], vals[3]])
            }
            "disk" => {
                want(3)?;
                DomainSpec::disk([vals[0], vals[1]], vals[2])
            }
            other => return Err(Error::Config(format!("unknown shape `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Uniform lattice restricted to the interior of a [`DomainSpec`].
#[derive(Debug, Clone)]
pub struct SpaceGrid {
    pub spec: DomainSpec,
    pub h: f64,
    pub dim: usize,
    /// Lattice origin; lattice point `(i, j)` sits at `origin + h * (i, j)`.
    origin: [f64; 2],
    lattice_shape: [usize; 2],
    lattice_index: Vec<Option<usize>>,
    pub nodes: Vec<[f64; 2]>,
    lattice_pos: Vec<[usize; 2]>,
    pub boundary_distance: Vec<f64>,
    /// Neighbours in the order -x, +x, -y, +y. `None` means exterior (value 0).
    neighbors: Vec<[Option<usize>; 4]>,
    /// Lattice points lying exactly on the boundary (interval / rectangle only).
    pub boundary_points: Vec<[f64; 2]>,
    bandwidth: usize,
}

fn lattice_count(len: f64, h: f64) -> Result<usize> {
    let n = (len / h).round();
    if n < 1.0 || ((n * h) - len).abs() > 1e-9 * len.max(1.0) {
        return Err(Error::BadSpacing {
            h,
            reason: format!("does not divide extent {len}"),
        });
    }
    Ok(n as usize)
}

impl SpaceGrid {
    pub fn new(spec: DomainSpec, h: f64) -> Result<Self> {
        spec.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::BadSpacing { h, reason: "must be positive".into() });
        }
        let dim = spec.dim();
        let (origin, lattice_shape, inside): ([f64; 2], [usize; 2], Box<dyn Fn(usize, usize) -> bool>) =
            match spec {
                DomainSpec::Interval { lo, hi } => {
                    let n = lattice_count(hi - lo, h)?;
                    ([lo, 0.0], [n + 1, 1], Box::new(move |i, _| i >= 1 && i < n))
                }
                DomainSpec::Rectangle { lo, hi } => {
                    let nx = lattice_count(hi[0] - lo[0], h)?;
                    let ny = lattice_count(hi[1] - lo[1], h)?;
                    (
                        lo,
                        [nx + 1, ny + 1],
                        Box::new(move |i, j| i >= 1 && i < nx && j >= 1 && j < ny),
                    )
                }
                DomainSpec::Disk { center, radius } => {
                    if h > radius / 8.0 {
                        return Err(Error::BadSpacing {
                            h,
                            reason: format!("disk requires h <= radius/8 = {}", radius / 8.0),
                        });
                    }
                    let m = (radius / h).ceil() as usize + 1;
                    let origin = [center[0] - m as f64 * h, center[1] - m as f64 * h];
                    let r2 = (radius * (1.0 - 1e-12)).powi(2);
                    (
                        origin,
                        [2 * m + 1, 2 * m + 1],
                        Box::new(move |i, j| {
                            let dx = (i as f64 - m as f64) * h;
                            let dy = (j as f64 - m as f64) * h;
                            dx * dx + dy * dy < r2
                        }),
                    )
                }
            };

        let [nx, ny] = lattice_shape;
        let mut lattice_index = vec![None; nx * ny];
        let mut nodes = Vec::new();
        let mut lattice_pos = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if inside(i, j) {
                    lattice_index[j * nx + i] = Some(nodes.len());
                    nodes.push([origin[0] + i as f64 * h, origin[1] + j as f64 * h]);
                    lattice_pos.push([i, j]);
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::TooCoarse("no interior nodes".into()));
        }

        let per_axis_min = (0..dim)
            .map(|k| {
                let mut coords: Vec<usize> = lattice_pos.iter().map(|p| p[k]).collect();
                coords.sort_unstable();
                coords.dedup();
                coords.len()
            })
            .min()
            .unwrap_or(0);
        if per_axis_min < 3 {
            return Err(Error::TooCoarse(format!(
                "{per_axis_min} interior nodes along some axis, need at least 3"
            )));
        }

        let lookup = |i: isize, j: isize| -> Option<usize> {
            if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
                None
            } else {
                lattice_index[j as usize * nx + i as usize]
            }
        };
        let mut neighbors = Vec::with_capacity(nodes.len());
        let mut bandwidth = 0usize;
        for (idx, &[i, j]) in lattice_pos.iter().enumerate() {
            let (i, j) = (i as isize, j as isize);
            let nb = if dim == 1 {
                [lookup(i - 1, j), lookup(i + 1, j), None, None]
            } else {
                [lookup(i - 1, j), lookup(i + 1, j), lookup(i, j - 1), lookup(i, j + 1)]
            };
            for k in nb.iter().flatten() {
                bandwidth = bandwidth.max(k.abs_diff(idx));
            }
            neighbors.push(nb);
        }

        let boundary_distance = nodes.iter().map(|&p| spec.boundary_distance(p)).collect();

        let mut boundary_points = Vec::new();
        match spec {
            DomainSpec::Interval { lo, hi } => {
                boundary_points.push([lo, 0.0]);
                boundary_points.push([hi, 0.0]);
            }
            DomainSpec::Rectangle { .. } => {
                for j in 0..ny {
                    for i in 0..nx {
                        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                            boundary_points.push([origin[0] + i as f64 * h, origin[1] + j as f64 * h]);
                        }
                    }
                }
            }
            DomainSpec::Disk { .. } => {}
        }

        Ok(SpaceGrid {
            spec,
            h,
            dim,
            origin,
            lattice_shape,
            lattice_index,
            nodes,
            lattice_pos,
            boundary_distance,
            neighbors,
            boundary_points,
            bandwidth,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature weight of one node, `h^d`.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn neighbors(&self, node: usize) -> &[Option<usize>; 4] {
        &self.neighbors[node]
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn lattice_shape(&self) -> [usize; 2] {
        self.lattice_shape
    }

    pub fn lattice_position(&self, node: usize) -> [usize; 2] {
        self.lattice_pos[node]
    }

    /// Interior mask over the full lattice, row-major in `(j, i)`.
    pub fn interior_mask(&self) -> Vec<bool> {
        self.lattice_index.iter().map(Option::is_some).collect()
    }

    pub fn lattice_origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn node_at_lattice(&self, i: usize, j: usize) -> Option<usize> {
        let [nx, ny] = self.lattice_shape;
        if i < nx && j < ny {
            self.lattice_index[j * nx + i]
        } else {
            None
        }
    }

    /// Index of the interior node closest to `p`.
    pub fn nearest_node(&self, p: [f64; 2]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, q) in self.nodes.iter().enumerate() {
            let d = dist(*q, p);
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }

    /// Nodes within the closed ball `|y - center| <= radius`.
    pub fn nodes_in_ball(&self, center: [f64; 2], radius: f64) -> Vec<usize> {
        let tol = 1e-12 * radius.max(self.h);
        (0..self.len())
            .filter(|&k| dist(self.nodes[k], center) <= radius + tol)
            .collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        dist(self.nodes[a], self.nodes[b])
    }

    pub fn map<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&p| f(p)).collect()
    }

    /// Discrete Laplacian with homogeneous Dirichlet exterior values.
    pub fn apply_laplacian(&self, u: &[f64], out: &mut [f64]) {
        let inv_h2 = 1.0 / (self.h * self.h);
        let diag = 2.0 * self.dim as f64;
        for (k, nb) in self.neighbors.iter().enumerate() {
            let mut acc = -diag * u[k];
            for j in nb.iter().flatten() {
                acc += u[*j];
            }
            out[k] = acc * inv_h2;
        }
    }

    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_laplacian(u, &mut out);
        out
    }

    /// Dense matrix of the discrete Laplacian.
    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut m = DMatrix::zeros(n, n);
        for (k, nb) in self.neighbors.iter().enumerate() {
            m[(k, k)] = -2.0 * self.dim as f64 * inv_h2;
            for j in nb.iter().flatten() {
                m[(k, *j)] = inv_h2;
            }
        }
        m
    }

    /// Banded SPD matrix `diag(d) - scale * L`, `scale >= 0`.
    pub fn shifted_operator(&self, diag: &[f64], scale: f64) -> SpdBandMatrix {
        let inv_h2 = scale / (self.h * self.h);
        let mut a = SpdBandMatrix::zeros(self.len(), self.bandwidth);
        for (k, nb) in self.neighbors.iter().enumerate() {
            a.set(k, k, diag[k] + 2.0 * self.dim as f64 * inv_h2);
            for j in nb.iter().flatten() {
                if *j < k {
                    a.set(k, *j, -inv_h2);
                }
            }
        }
        a
    }

    /// Edge differences `(u_j - u_i) / h` over every lattice edge touching an
    /// interior node, including edges to exterior (zero) values.
    pub fn edge_gradients(&self, u: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.dim);
        for (k, nb) in self.neighbors.iter().enumerate() {
            for (dir, other) in nb.iter().enumerate().take(2 * self.dim) {
                match other {
                    // each interior edge counted once, from its lower endpoint
                    Some(j) if dir % 2 == 1 => out.push((u[*j] - u[k]) / self.h),
                    Some(_) => {}
                    None => out.push((0.0 - u[k]) / self.h),
                }
            }
        }
        out
    }

    /// Edge-wise evaluation `g(u_i, u_j)` matching [`SpaceGrid::edge_gradients`].
    pub fn edge_pairs(&self, u: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len() * self.dim);
        for (k, nb) in self.neighbors.iter().enumerate() {
            for (dir, other) in nb.iter().enumerate().take(2 * self.dim) {
                match other {
                    Some(j) if dir % 2 == 1 => out.push((u[k], u[*j])),
                    Some(_) => {}
                    None => out.push((u[k], 0.0)),
                }
            }
        }
        out
    }

    pub fn to_kv(&self) -> String {
        self.spec.to_kv(self.h)
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
