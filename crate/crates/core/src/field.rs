//! Grids, fields and the discrete Hilbert-space machinery.
//!
//! One-dimensional grids are node-centered and include both boundary nodes,
//! so `dx = a / (J - 1)`. Two-dimensional grids are square and cell-centered
//! (`J x J` interior nodes at `(i + 1/2) dx`, `dx = a / J`); boundary values
//! are imposed by the stencils. All spatial integrals use the rectangle rule
//! `sum_j f_j g_j dx^d`, which is the quadrature consistent with the
//! piecewise-constant noise basis `e_j = dx^{-d/2} 1_{cell j}`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    extent: f64,
    points: usize,
    spacing: f64,
    coords: Vec<f64>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Side length `a` of the (square) domain.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Node positions along one axis (shared by both axes in 2D).
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn node_count(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Quadrature weight of one node, `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Position of node `idx`. 2D nodes are stored row-major with `x` fastest:
    /// `idx = iy * J + ix`. The second coordinate is zero in 1D.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coords[idx], 0.0],
            _ => {
                let ix = idx % self.points;
                let iy = idx / self.points;
                [self.coords[ix], self.coords[iy]]
            }
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.node_count()).map(|i| self.position(i))
    }
}

/// Builds a grid with `points` nodes per axis on `[0, a]^dim`.
pub fn make_grid(dim: usize, extent: f64, points: usize) -> Result<Arc<Grid>> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
    }
    if points < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 points per axis, got {points}")));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
    }
    let (spacing, coords) = if dim == 1 {
        let dx = extent / (points - 1) as f64;
        (dx, (0..points).map(|k| k as f64 * dx).collect())
    } else {
        let dx = extent / points as f64;
        (dx, (0..points).map(|k| (k as f64 + 0.5) * dx).collect())
    };
    Ok(Arc::new(Grid {
        dim,
        extent,
        points,
        spacing,
        coords,
    }))
}

pub(crate) fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if std::ptr::eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{}D/{} points/a={} vs {}D/{} points/a={}",
            a.dim, a.points, a.extent, b.dim, b.points, b.extent
        )))
    }
}

/// A scalar field sampled at every node of a grid.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        *self.grid == *other.grid && self.values == other.values
    }
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![value; grid.node_count()],
        }
    }

    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Shape {
                expected: grid.node_count(),
                found: values.len(),
                context: "field values",
            });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = grid.positions().map(f).collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation along a 1D grid; clamps outside the domain.
    pub fn interpolate_1d(&self, x: f64) -> f64 {
        let coords = self.grid.coords();
        let n = coords.len();
        if x <= coords[0] {
            return self.values[0];
        }
        if x >= coords[n - 1] {
            return self.values[n - 1];
        }
        let k = coords.partition_point(|&c| c <= x) - 1;
        let t = (x - coords[k]) / (coords[k + 1] - coords[k]);
        self.values[k] * (1.0 - t) + self.values[k + 1] * t
    }
}

/// Rectangle-rule approximation of `integral_D f g dx`.
pub fn inner_product(f: &Field, g: &Field) -> Result<f64> {
    check_same_grid(&f.grid, &g.grid)?;
    Ok(dot(&f.values, &g.values) * f.grid.cell_volume())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One time step of cylindrical noise: i.i.d. standard normals per node.
#[derive(Clone, Debug)]
pub struct NoiseIncrement {
    grid: Arc<Grid>,
    xi: Vec<f64>,
    dt: f64,
}

impl NoiseIncrement {
    pub fn new(grid: &Arc<Grid>, xi: Vec<f64>, dt: f64) -> Result<Self> {
        if xi.len() != grid.node_count() {
            return Err(Error::Shape {
                expected: grid.node_count(),
                found: xi.len(),
                context: "noise draws",
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidModel(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            xi,
            dt,
        })
    }

    pub fn zeros(grid: &Arc<Grid>, dt: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            xi: vec![0.0; grid.node_count()],
            dt,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Pointwise field increment `xi_j sqrt(dt / dx^d)`.
    pub fn increment_field(&self) -> Vec<f64> {
        let scale = (self.dt / self.grid.cell_volume()).sqrt();
        self.xi.iter().map(|x| x * scale).collect()
    }

    /// `<f, dW> = sum_j f_j xi_j sqrt(dt dx^d)`.
    pub fn pair(&self, f: &Field) -> Result<f64> {
        check_same_grid(&self.grid, f.grid())?;
        Ok(self.pair_values(f.values()))
    }

    pub(crate) fn pair_values(&self, f: &[f64]) -> f64 {
        dot(f, &self.xi) * (self.dt * self.grid.cell_volume()).sqrt()
    }
}

pub fn sample_noise<R: Rng + ?Sized>(grid: &Arc<Grid>, dt: f64, rng: &mut R) -> NoiseIncrement {
    let xi = (0..grid.node_count()).map(|_| rng.sample(StandardNormal)).collect();
    NoiseIncrement {
        grid: Arc::clone(grid),
        xi,
        dt,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActuatorKind {
    Gaussian,
    Boundary,
}

/// Finite actuation `m(x)`: `N` non-negative shape functions and their Gram
/// matrix `sum_j m(x_j) m(x_j)^T dx^d`.
#[derive(Clone, Debug)]
pub struct ActuatorMap {
    grid: Arc<Grid>,
    kind: ActuatorKind,
    columns: Vec<Vec<f64>>,
    gram: Vec<f64>,
}

impl ActuatorMap {
    fn from_columns(grid: &Arc<Grid>, kind: ActuatorKind, columns: Vec<Vec<f64>>) -> Self {
        let gram = gram_matrix(&columns, grid.cell_volume());
        Self {
            grid: Arc::clone(grid),
            kind,
            columns,
            gram,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kind(&self) -> ActuatorKind {
        self.kind
    }

    pub fn count(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, l: usize) -> &[f64] {
        &self.columns[l]
    }

    /// Row-major `N x N` Gram matrix.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    /// `u^T M u`, the policy inner product `<Phi, Phi>` for `Phi = m^T u`.
    pub fn quadratic(&self, u: &[f64]) -> f64 {
        let n = self.count();
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.gram[i * n..(i + 1) * n];
            acc += u[i] * dot(row, u);
        }
        acc
    }

    /// `M u`.
    pub fn gram_apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.count();
        (0..n).map(|i| dot(&self.gram[i * n..(i + 1) * n], u)).collect()
    }

    /// `b_l = <m_l, dW>` for every actuator.
    pub fn project_noise(&self, noise: &NoiseIncrement) -> Vec<f64> {
        self.columns.iter().map(|m| noise.pair_values(m)).collect()
    }

    pub fn control_field(&self, u: &[f64]) -> Result<Field> {
        if u.len() != self.count() {
            return Err(Error::Shape {
                expected: self.count(),
                found: u.len(),
                context: "control vector",
            });
        }
        let mut values = vec![0.0; self.grid.node_count()];
        for (m, &ul) in self.columns.iter().zip(u) {
            if ul != 0.0 {
                for (v, mj) in values.iter_mut().zip(m) {
                    *v += mj * ul;
                }
            }
        }
        Field::new(&self.grid, values)
    }

    /// L2-orthogonal projection of a pointwise field onto `span{m_l}`.
    pub fn project_onto_span(&self, values: &[f64]) -> Result<Vec<f64>> {
        let dv = self.grid.cell_volume();
        let rhs: Vec<f64> = self.columns.iter().map(|m| dot(m, values) * dv).collect();
        let coeffs = linalg::cholesky_solve(&self.gram, self.count(), &rhs).ok_or_else(|| {
            Error::InvalidActuator("Gram matrix is singular; cannot project onto actuator span".into())
        })?;
        let mut out = vec![0.0; values.len()];
        for (m, c) in self.columns.iter().zip(&coeffs) {
            for (o, mj) in out.iter_mut().zip(m) {
                *o += mj * c;
            }
        }
        Ok(out)
    }
}

pub(crate) fn gram_matrix(columns: &[Vec<f64>], cell_volume: f64) -> Vec<f64> {
    let n = columns.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g = dot(&columns[i], &columns[j]) * cell_volume;
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    gram
}

/// Gaussian actuators `exp(-|x - mu_l|^2 / (2 sigma^2))`, one per center.
pub fn gaussian_actuator_map(grid: &Arc<Grid>, centers: &[Vec<f64>], sigma2: f64) -> Result<ActuatorMap> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidActuator(format!("variance must be positive, got {sigma2}")));
    }
    if centers.is_empty() {
        return Err(Error::InvalidActuator("need at least one actuator".into()));
    }
    let a = grid.extent();
    let mut columns = Vec::with_capacity(centers.len());
    for mu in centers {
        if mu.len() != grid.dim() {
            return Err(Error::InvalidActuator(format!(
                "center {mu:?} has {} coordinates on a {}D grid",
                mu.len(),
                grid.dim()
            )));
        }
        if mu.iter().any(|&c| !(0.0..=a).contains(&c)) {
            return Err(Error::InvalidActuator(format!("center {mu:?} lies outside [0, {a}]")));
        }
        let col = grid
            .positions()
            .map(|p| {
                let r2: f64 = mu.iter().zip(p).map(|(c, x)| (x - c).powi(2)).sum();
                (-0.5 * r2 / sigma2).exp()
            })
            .collect();
        columns.push(col);
    }
    Ok(ActuatorMap::from_columns(grid, ActuatorKind::Gaussian, columns))
}

/// Indicator actuators on the two boundary nodes of a 1D grid.
pub fn boundary_actuator_map(grid: &Arc<Grid>) -> Result<ActuatorMap> {
    if grid.dim() != 1 {
        return Err(Error::InvalidActuator("boundary actuation is only supported in 1D".into()));
    }
    let n = grid.node_count();
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    left[0] = 1.0;
    right[n - 1] = 1.0;
    Ok(ActuatorMap::from_columns(grid, ActuatorKind::Boundary, vec![left, right]))
}

pub fn control_field(map: &ActuatorMap, u: &[f64]) -> Result<Field> {
    map.control_field(u)
}
