//! Spectral realization of `A = -Δ + 1` with Neumann conditions on an
//! interval or a ball (radial functions), its fractional powers `A^μ`, the
//! semigroup `e^{-tA}`, and empirical decay-rate fits.
//!
//! Fractional powers act as `λ_k^μ` on the retained eigenmodes; nothing is
//! claimed outside the truncated span.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fv_laplacian_bands, radial_derivative, RadialField, RadialGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpectralDomain {
    Interval { length: f64 },
    RadialBall { n: usize, radius: f64 },
}

#[derive(Debug, Clone)]
pub struct SpectralOperator {
    domain: SpectralDomain,
    points: Vec<f64>,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    modes: Vec<Vec<f64>>,
    mode_gradients: Vec<Vec<f64>>,
    /// First eigenvalue left out by the truncation.
    tail_eigenvalue: f64,
    grid: Option<Arc<RadialGrid>>,
}

/// Neumann eigenpairs of `-d²/dx² + 1` on `(0, L)` in closed form, sampled on
/// `points + 1` uniform nodes with trapezoidal weights (under which the
/// sampled cosines stay exactly orthonormal).
pub fn build_spectral_interval(length: f64, points: usize, k: usize) -> Result<SpectralOperator> {
    if !(length > 0.0) {
        return Err(Error::arg("length", "interval length must be positive"));
    }
    if points < 16 {
        return Err(Error::arg("points", "need at least 16 cells"));
    }
    if k == 0 || k > (points + 1) / 4 {
        return Err(Error::arg(
            "K",
            format!(
                "truncation must be in 1..={} for {} nodes",
                (points + 1) / 4,
                points + 1
            ),
        ));
    }
    let h = length / points as f64;
    let xs: Vec<f64> = (0..=points).map(|i| i as f64 * h).collect();
    let mut weights = vec![h; points + 1];
    weights[0] = 0.5 * h;
    weights[points] = 0.5 * h;
    let wave = |j: usize| j as f64 * PI / length;
    let mut eigenvalues = Vec::with_capacity(k);
    let mut modes = Vec::with_capacity(k);
    let mut mode_gradients = Vec::with_capacity(k);
    for j in 0..k {
        let c = if j == 0 {
            (1.0 / length).sqrt()
        } else {
            (2.0 / length).sqrt()
        };
        let w = wave(j);
        eigenvalues.push(1.0 + w * w);
        modes.push(xs.iter().map(|&x| c * (w * x).cos()).collect());
        mode_gradients.push(xs.iter().map(|&x| -c * w * (w * x).sin()).collect());
    }
    Ok(SpectralOperator {
        domain: SpectralDomain::Interval { length },
        points: xs,
        weights,
        eigenvalues,
        modes,
        mode_gradients,
        tail_eigenvalue: 1.0 + wave(k) * wave(k),
        grid: None,
    })
}

/// Lowest `k` eigenpairs of the discrete radial operator `-Δ + 1` (the same
/// conservative discretization the solvers use), orthonormal in `L²(Ω)`.
pub fn build_spectral(grid: &Arc<RadialGrid>, k: usize) -> Result<SpectralOperator> {
    let m = grid.len();
    if k == 0 || k > m / 4 {
        return Err(Error::arg(
            "K",
            format!("truncation must be in 1..={} for {m} nodes", m / 4),
        ));
    }
    let (lo, di, up) = fv_laplacian_bands(grid);
    let sq: Vec<f64> = grid.cell_volumes().iter().map(|v| v.sqrt()).collect();
    // W^{1/2} (-Δ + I) W^{-1/2} is symmetric
    let mut b = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        b[(i, i)] = 1.0 - di[i];
        if i + 1 < m {
            let off = -up[i] * sq[i] / sq[i + 1];
            b[(i, i + 1)] = off;
            b[(i + 1, i)] = off;
        }
    }
    debug_assert!((0..m - 1).all(|i| {
        let a = -up[i] * sq[i] / sq[i + 1];
        let c = -lo[i + 1] * sq[i + 1] / sq[i];
        (a - c).abs() <= 1e-9 * a.abs().max(1.0)
    }));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));

    let mut eigenvalues = Vec::with_capacity(k);
    let mut modes = Vec::with_capacity(k);
    let mut mode_gradients = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let col = eig.eigenvectors.column(idx);
        let mut phi: Vec<f64> = (0..m).map(|i| col[i] / sq[i]).collect();
        // fix the sign so the value at the origin is nonnegative
        if phi[0] < 0.0 {
            phi.iter_mut().for_each(|x| *x = -*x);
        }
        let field = RadialField::new(grid.clone(), phi)?;
        mode_gradients.push(radial_derivative(&field).into_values());
        modes.push(field.into_values());
        eigenvalues.push(eig.eigenvalues[idx]);
    }
    let tail_eigenvalue = order.get(k).map(|&i| eig.eigenvalues[i]).unwrap_or(f64::INFINITY);
    Ok(SpectralOperator {
        domain: SpectralDomain::RadialBall {
            n: grid.dimension(),
            radius: grid.radius(),
        },
        points: grid.nodes().to_vec(),
        weights: grid.cell_volumes().to_vec(),
        eigenvalues,
        modes,
        mode_gradients,
        tail_eigenvalue,
        grid: Some(grid.clone()),
    })
}

#[derive(Debug, Clone)]
pub struct SemigroupOutput {
    pub values: Vec<f64>,
    /// `λ_K^μ e^{-λ_K t}` for the first omitted eigenvalue `λ_K`.
    pub tail_bound: f64,
}

impl SpectralOperator {
    pub fn domain(&self) -> &SpectralDomain {
        &self.domain
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k]
    }

    pub fn mode_gradient(&self, k: usize) -> &[f64] {
        &self.mode_gradients[k]
    }

    pub fn truncation(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn tail_eigenvalue(&self) -> f64 {
        self.tail_eigenvalue
    }

    /// The radial grid for ball operators.
    pub fn grid(&self) -> Option<&Arc<RadialGrid>> {
        self.grid.as_ref()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w).sum()
    }

    /// Discrete `L^p` norm with the operator's quadrature; `p = ∞` is the max.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            f.iter().fold(0.0, |m, x| m.max(x.abs()))
        } else {
            f.iter()
                .zip(&self.weights)
                .map(|(x, w)| w * x.abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
        }
    }

    /// Expansion coefficients `⟨φ, φ_k⟩`.
    pub fn coefficients(&self, phi: &[f64]) -> Vec<f64> {
        self.modes.iter().map(|m| self.inner(phi, m)).collect()
    }

    /// Max orthonormality defect `|⟨φ_i, φ_j⟩ - δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.truncation();
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in i..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.inner(&self.modes[i], &self.modes[j]) - target).abs());
            }
        }
        worst
    }

    /// `‖(-Δ + 1)φ_k - λ_k φ_k‖₂` per retained mode, with the discrete
    /// operator (ball) or the exact one (interval).
    pub fn eigen_residuals(&self) -> Vec<f64> {
        match &self.grid {
            Some(grid) => {
                let (lo, di, up) = fv_laplacian_bands(grid);
                self.modes
                    .iter()
                    .zip(&self.eigenvalues)
                    .map(|(phi, lam)| {
                        let m = phi.len();
                        let res: Vec<f64> = (0..m)
                            .map(|i| {
                                let mut lap = di[i] * phi[i];
                                if i > 0 {
                                    lap += lo[i] * phi[i - 1];
                                }
                                if i + 1 < m {
                                    lap += up[i] * phi[i + 1];
                                }
                                -lap + phi[i] - lam * phi[i]
                            })
                            .collect();
                        self.lp_norm(&res, 2.0)
                    })
                    .collect()
            }
            None => vec![0.0; self.truncation()],
        }
    }

    /// `∇^σ A^μ e^{-tA} φ = Σ_k λ_k^μ e^{-λ_k t} ⟨φ, φ_k⟩ ∇^σ φ_k`.
    pub fn apply_semigroup(&self, phi: &[f64], t: f64, mu: f64, sigma: u8) -> Result<SemigroupOutput> {
        if !(t >= 0.0) {
            return Err(Error::arg("t", "time must be nonnegative"));
        }
        if sigma > 1 {
            return Err(Error::arg("sigma", "σ must be 0 or 1"));
        }
        if phi.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                found: phi.len(),
            });
        }
        let coeffs = self.coefficients(phi);
        let basis = if sigma == 0 { &self.modes } else { &self.mode_gradients };
        let mut values = vec![0.0; phi.len()];
        for ((c, lam), b) in coeffs.iter().zip(&self.eigenvalues).zip(basis) {
            let factor = c * lam.powf(mu) * (-lam * t).exp();
            if factor == 0.0 {
                continue;
            }
            for (v, bi) in values.iter_mut().zip(b) {
                *v += factor * bi;
            }
        }
        let lk = self.tail_eigenvalue;
        let tail_bound = if lk.is_finite() {
            lk.powf(mu) * (-lk * t).exp()
        } else {
            0.0
        };
        Ok(SemigroupOutput { values, tail_bound })
    }

    /// [`apply_semigroup`](Self::apply_semigroup) for a field on the ball grid.
    pub fn apply_field(&self, phi: &RadialField, t: f64, mu: f64, sigma: u8) -> Result<RadialField> {
        let grid = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::arg("phi", "interval operators act on sample vectors"))?;
        let out = self.apply_semigroup(phi.values(), t, mu, sigma)?;
        RadialField::new(grid.clone(), out.values)
    }

    /// Graph norm `‖φ‖_q + ‖A^λ φ‖_q` on the truncated span, standing in for
    /// the `W^{2λ,q}` norm.
    pub fn graph_norm(&self, phi: &[f64], lambda: f64, q: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Ok(self.lp_norm(phi, q));
        }
        let a = self.apply_semigroup(phi, 0.0, lambda, 0)?;
        Ok(self.lp_norm(phi, q) + self.lp_norm(&a.values, q))
    }
}

/// `λ - μ - (σ + s)/2`, the predicted small-time exponent of
/// `‖∇^σ A^μ e^{-tA} φ‖_p` for data normalized in `W^{2λ,q}`.
pub fn predicted_decay_exponent(lambda: f64, mu: f64, sigma: u8, s: f64) -> f64 {
    lambda - mu - (sigma as f64 + s) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyNormalization {
    /// `‖φ‖_q = 1`.
    Lq,
    /// `‖φ‖_q + ‖A^λ φ‖_q = 1` on the truncation.
    GraphNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub predicted: f64,
    pub relative_error: f64,
    pub normalization: FamilyNormalization,
    pub t_grid: Vec<f64>,
    /// `sup_family ‖∇^σ A^μ e^{-tA} φ‖_p` per time.
    pub sup_norms: Vec<f64>,
    /// Largest truncation tail bound over the time grid.
    pub max_tail: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DecayProblem {
    pub sigma: u8,
    pub mu: f64,
    pub lambda: f64,
    pub q: f64,
    pub p: f64,
    pub s: f64,
}

/// `n` logarithmically spaced times in `[t_min, t_max]`.
pub fn log_time_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Least-squares slope and intercept of `y` against `x`, with the standard
/// error of the slope.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let sse: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let e = b - (intercept + slope * a);
                e * e
            })
            .sum();
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

/// Fits the small-time power law of `sup_φ ‖∇^σ A^μ e^{-tA} φ‖_p` over a
/// family normalized as requested, and compares it with
/// [`predicted_decay_exponent`].
pub fn fit_decay_exponent(
    op: &SpectralOperator,
    family: &[Vec<f64>],
    problem: DecayProblem,
    normalization: FamilyNormalization,
    t_grid: &[f64],
) -> Result<DecayFit> {
    if family.len() < 20 {
        return Err(Error::arg("family", "need at least 20 members"));
    }
    if t_grid.len() < 3 || t_grid.iter().any(|&t| !(t > 0.0 && t <= 0.5)) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg(
            "t_grid",
            "need at least 3 strictly increasing times in (0, 0.5]",
        ));
    }
    let normalized: Vec<Vec<f64>> = family
        .iter()
        .map(|phi| {
            let norm = match normalization {
                FamilyNormalization::Lq => op.lp_norm(phi, problem.q),
                FamilyNormalization::GraphNorm => op.graph_norm(phi, problem.lambda, problem.q)?,
            };
            if !(norm > 0.0) {
                return Err(Error::arg("family", "members must be nonzero"));
            }
            Ok(phi.iter().map(|x| x / norm).collect())
        })
        .collect::<Result<_>>()?;

    let mut sup_norms = Vec::with_capacity(t_grid.len());
    let mut max_tail = 0.0_f64;
    for &t in t_grid {
        let mut sup = 0.0_f64;
        for phi in &normalized {
            let out = op.apply_semigroup(phi, t, problem.mu, problem.sigma)?;
            max_tail = max_tail.max(out.tail_bound);
            sup = sup.max(op.lp_norm(&out.values, problem.p));
        }
        sup_norms.push(sup);
    }
    let lx: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = sup_norms.iter().map(|s| s.ln()).collect();
    let (slope, _, _) = linear_fit(&lx, &ly);
    let predicted = predicted_decay_exponent(problem.lambda, problem.mu, problem.sigma, problem.s);
    let relative_error = if predicted == 0.0 {
        slope.abs()
    } else {
        (slope - predicted).abs() / predicted.abs()
    };
    Ok(DecayFit {
        slope,
        predicted,
        relative_error,
        normalization,
        t_grid: t_grid.to_vec(),
        sup_norms,
        max_tail,
    })
}

/// `max_t ‖∇^σ e^{-tA} φ‖_∞ e^t / ‖∇^σ φ‖_∞` over the given times, with `φ`
/// first projected onto the retained modes.
pub fn linfty_ratio(op: &SpectralOperator, phi: &[f64], sigma: u8, times: &[f64]) -> Result<f64> {
    let base = op.apply_semigroup(phi, 0.0, 0.0, sigma)?;
    let denom = op.lp_norm(&base.values, f64::INFINITY);
    if denom == 0.0 {
        return Ok(0.0);
    }
    let mut worst = 0.0_f64;
    for &t in times {
        let out = op.apply_semigroup(phi, t, 0.0, sigma)?;
        worst = worst.max(op.lp_norm(&out.values, f64::INFINITY) * t.exp() / denom);
    }
    Ok(worst)
}
