//! Radial meshes on the ball `B_R(0) ⊂ ℝⁿ`, nodal fields, and the discrete
//! operators and integral norms shared by every solver.
//!
//! The mesh is vertex centred: node `i` owns the control volume between the
//! faces `r_{i-1/2}` and `r_{i+1/2}` (face midpoints, with `r_{-1/2} = 0` and
//! `r_{N+1/2} = R`). Control volumes are integrated in closed form, so they
//! partition `|B_R(0)|` exactly regardless of clustering.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 16;

/// Default ratio between the widest and the narrowest cell.
pub const DEFAULT_CLUSTERING: f64 = 50.0;

/// Surface measure `ω_{n-1}` of the unit sphere in `ℝⁿ`.
pub fn sphere_measure(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// `Γ(n/2)` for a positive integer `n`.
fn gamma_half(n: usize) -> f64 {
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        // Γ(1/2) = √π and Γ(x + 1) = x Γ(x).
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Volume of `B_R(0) ⊂ ℝⁿ`.
pub fn ball_volume(n: usize, radius: f64) -> f64 {
    sphere_measure(n) * radius.powi(n as i32) / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    n: usize,
    radius: f64,
    clustering: f64,
    omega: f64,
    nodes: Vec<f64>,
    /// `N + 2` faces: `0`, the `N` interior midpoints, and `R`.
    faces: Vec<f64>,
    cell_volumes: Vec<f64>,
    /// `ω r_{j+1/2}^{n-1} / (r_{j+1} - r_j)` for the interior face `j + 1/2`.
    conductance: Vec<f64>,
}

impl RadialGrid {
    /// Builds a mesh with `cells` intervals whose widths grow geometrically
    /// away from the origin; `clustering` is the ratio of the outermost to
    /// the innermost width (1 gives a uniform mesh).
    pub fn new(n: usize, radius: f64, cells: usize, clustering: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("dimension must be at least 2, got {n}")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidGrid(format!("radius must be positive, got {radius}")));
        }
        if cells < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells, got {cells}"
            )));
        }
        if !(clustering >= 1.0) || !clustering.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "clustering ratio must be at least 1, got {clustering}"
            )));
        }

        let widths: Vec<f64> = if clustering == 1.0 {
            vec![radius / cells as f64; cells]
        } else {
            let growth = clustering.powf(1.0 / (cells - 1) as f64);
            let first = radius * (growth - 1.0) / (growth.powi(cells as i32) - 1.0);
            (0..cells).map(|i| first * growth.powi(i as i32)).collect()
        };
        let mut nodes = Vec::with_capacity(cells + 1);
        nodes.push(0.0);
        let mut acc = 0.0;
        for w in &widths[..cells - 1] {
            acc += w;
            nodes.push(acc);
        }
        nodes.push(radius);

        let mut faces = Vec::with_capacity(cells + 2);
        faces.push(0.0);
        faces.extend(nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        faces.push(radius);

        let omega = sphere_measure(n);
        let scale = omega / n as f64;
        let cell_volumes: Vec<f64> = faces
            .windows(2)
            .map(|f| scale * (f[1].powi(n as i32) - f[0].powi(n as i32)))
            .collect();
        let conductance: Vec<f64> = (0..cells)
            .map(|j| omega * faces[j + 1].powi(n as i32 - 1) / (nodes[j + 1] - nodes[j]))
            .collect();

        let grid = RadialGrid {
            n,
            radius,
            clustering,
            omega,
            nodes,
            faces,
            cell_volumes,
            conductance,
        };
        if grid.nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("nodes are not strictly increasing".into()));
        }
        if grid.cell_volumes.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidGrid("degenerate control volume".into()));
        }
        Ok(grid)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn clustering(&self) -> f64 {
        self.clustering
    }

    /// `ω_{n-1}`.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Number of cells `N`; there are `N + 1` nodes.
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volumes
    }

    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    /// `|B_R(0)|` in closed form.
    pub fn volume(&self) -> f64 {
        ball_volume(self.n, self.radius)
    }

    /// Width of cell `j`, i.e. `r_{j+1} - r_j`.
    pub fn spacing(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.cells()).map(|j| self.spacing(j)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.cells()).map(|j| self.spacing(j)).fold(0.0, f64::max)
    }

    /// Measured ratio of the widest to the narrowest cell.
    pub fn clustering_ratio(&self) -> f64 {
        self.max_spacing() / self.min_spacing()
    }

    /// First node with `r > 0`.
    pub fn first_positive_node(&self) -> f64 {
        self.nodes[1]
    }

    /// The next finer mesh: twice the cells, same radius and clustering.
    pub fn refined(&self) -> Result<Self> {
        RadialGrid::new(self.n, self.radius, 2 * self.cells(), self.clustering)
    }

    pub fn into_shared(self) -> Arc<Self> {
        Arc::new(self)
    }
}

/// Shorthand for [`RadialGrid::new`] returning a shareable handle.
pub fn build_grid(n: usize, radius: f64, cells: usize, clustering: f64) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(n, radius, cells, clustering).map(Arc::new)
}

/// Nodal samples of a radial function.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(RadialField { grid, values })
    }

    /// Samples `f` at every node. Fails if any sample is not finite.
    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialField::new(grid.clone(), values)
    }

    /// Like [`RadialField::from_fn`], but replaces the value at `r = 0` by the
    /// value at the first positive node. Used for functions singular at the
    /// origin.
    pub fn from_singular_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        values[0] = values[1];
        RadialField::new(grid.clone(), values)
    }

    pub fn constant(grid: &Arc<RadialGrid>, c: f64) -> Result<Self> {
        RadialField::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        RadialField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub(crate) fn from_raw(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        RadialField { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at_origin(&self) -> f64 {
        self.values[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RadialField::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &RadialField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        RadialField::from_raw(self.grid.clone(), values)
    }

    pub fn add(&self, other: &RadialField) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RadialField) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// `∫_Ω f` with the control-volume quadrature.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.cell_volumes())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// Max-norm distance to another field.
    pub fn max_diff(&self, other: &RadialField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Conservative (finite-volume) radial Laplacian at node `i`.
///
/// At `r = 0` the inner face has zero area and the stencil reduces to
/// `2n (f_1 - f_0) / h_0²`, the symmetric-reflection approximation of
/// `n f_rr(0)`. At `r = R` the outer face flux is zero (Neumann).
pub(crate) fn fv_laplacian_at(grid: &RadialGrid, f: &[f64], i: usize) -> f64 {
    let c = grid.conductance();
    let mut flux = 0.0;
    if i < grid.cells() {
        flux += c[i] * (f[i + 1] - f[i]);
    }
    if i > 0 {
        flux -= c[i - 1] * (f[i] - f[i - 1]);
    }
    flux / grid.cell_volumes()[i]
}

/// The conservative Laplacian used by the solvers, as three bands.
///
/// Returns `(lower, diag, upper)` such that `Δf_i = lower_i f_{i-1} +
/// diag_i f_i + upper_i f_{i+1}`.
pub(crate) fn fv_laplacian_bands(grid: &RadialGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = grid.len();
    let c = grid.conductance();
    let vol = grid.cell_volumes();
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for i in 0..m {
        if i < grid.cells() {
            upper[i] = c[i] / vol[i];
            diag[i] -= c[i] / vol[i];
        }
        if i > 0 {
            lower[i] = c[i - 1] / vol[i];
            diag[i] -= c[i - 1] / vol[i];
        }
    }
    (lower, diag, upper)
}

/// Radial Laplacian `f_rr + (n-1)/r f_r` of a field.
///
/// Interior nodes use the conservative stencil (exact on quadratics);
/// the origin uses the symmetry limit `n f_rr(0)`; at `r = R` the
/// Neumann condition `f_r(R) = 0` is built into a one-sided second-order
/// fit `f ≈ f_N + a (r-R)² + b (r-R)³`, so `Δf(R) = 2a`.
pub fn laplacian_radial(f: &RadialField) -> RadialField {
    let grid = f.grid();
    let v = f.values();
    let last = grid.cells();
    let mut out: Vec<f64> = (0..last).map(|i| fv_laplacian_at(grid, v, i)).collect();

    let r = grid.nodes();
    let d1 = r[last - 1] - grid.radius();
    let d2 = r[last - 2] - grid.radius();
    let y1 = v[last - 1] - v[last];
    let y2 = v[last - 2] - v[last];
    // a d1² + b d1³ = y1, a d2² + b d2³ = y2
    let det = d1 * d1 * d2 * d2 * d2 - d2 * d2 * d1 * d1 * d1;
    let a = (y1 * d2 * d2 * d2 - y2 * d1 * d1 * d1) / det;
    out.push(2.0 * a);
    RadialField::from_raw(grid.clone(), out)
}

/// Nodal radial derivative.
///
/// Three-point second-order differences in the interior, `f_r(0) = 0` by
/// symmetry, and a one-sided second-order difference at `r = R`.
pub fn radial_derivative(f: &RadialField) -> RadialField {
    let grid = f.grid();
    let r = grid.nodes();
    let v = f.values();
    let last = grid.cells();
    let mut out = vec![0.0; grid.len()];
    for i in 1..last {
        let hm = r[i] - r[i - 1];
        let hp = r[i + 1] - r[i];
        out[i] = (hm * hm * (v[i + 1] - v[i]) + hp * hp * (v[i] - v[i - 1])) / (hm * hp * (hm + hp));
    }
    let h1 = r[last] - r[last - 1];
    let h2 = r[last - 1] - r[last - 2];
    // quadratic through the last three nodes, differentiated at r_N
    let s = h1 + h2;
    // written in differences so constants give exactly zero
    let c_last = (2.0 * h1 + h2) / (h1 * s);
    let c_prev = c_last - s / (h1 * h2);
    out[last] = c_last * (v[last] - v[last - 1]) + c_prev * (v[last - 1] - v[last - 2]);
    RadialField::from_raw(grid.clone(), out)
}

/// `(ω_{n-1} ∫ |f|^p r^{n-1} dr)^{1/p}`, with `p = ∞` giving `max |f|`.
pub fn lp_norm(f: &RadialField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::arg("p", "p must be ≥ 1"));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let sum: f64 = f
        .values()
        .iter()
        .zip(f.grid().cell_volumes())
        .map(|(v, w)| w * v.abs().powf(p))
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// Smallest `C` with `|f(r)| ≤ C r^{-γ}` on the grid nodes with
/// `r ≥ max(r_min, r_1)`, i.e. `sup r^γ |f(r)|`.
pub fn weighted_sup(f: &RadialField, gamma: f64, r_min: f64) -> f64 {
    let cutoff = r_min.max(f.grid().first_positive_node());
    f.grid()
        .nodes()
        .iter()
        .zip(f.values())
        .skip(1)
        .filter(|(r, _)| **r >= cutoff)
        .fold(0.0, |m, (r, v)| m.max(r.powf(gamma) * v.abs()))
}
