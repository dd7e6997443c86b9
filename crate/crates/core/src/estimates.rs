//! Exponent calculus for the pointwise estimates, the cutoff `ζ` and the
//! transformed signal `z = ζ^β ṽ`, and checks of the stated inequalities
//! on discrete solutions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{radial_derivative, weighted_sup, RadialField, RadialGrid};
use crate::ks::ModelParams;
use crate::linear::relative_change;

/// Relative change under one refinement below which a constant counts as
/// mesh-stable.
pub const STABILITY_TOL: f64 = 0.2;
/// Growth factor under refinement that flags an unbounded constant.
pub const GROWTH_FACTOR: f64 = 2.0;

/// Which variant of `ṽ` the transformation uses, decided by `𝕢` vs `n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `𝕢 ≤ n/2`: `ṽ = v`.
    QLeNHalf,
    /// `𝕢 > n/2`: `ṽ = v - v(0, t)`.
    QGtNHalf,
}

impl Regime {
    pub fn classify(n: usize, q_aux: f64) -> Regime {
        if q_aux <= 0.5 * n as f64 {
            Regime::QLeNHalf
        } else {
            Regime::QGtNHalf
        }
    }

    fn subtracts_center(self) -> bool {
        self == Regime::QGtNHalf
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentBundle {
    pub p0: f64,
    /// `None` when `(m-q)n + 𝕡 ≤ 0`.
    pub alpha_lower: Option<f64>,
    pub beta_lower: f64,
    pub q_aux: f64,
    pub admissible: bool,
    pub regime: Regime,
}

/// Critical exponents for `(n, m, q, s)` and the integrability `𝕡` of `u`.
pub fn compute_exponents(params: &ModelParams, p_bound: f64) -> Result<ExponentBundle> {
    let n = params.n as f64;
    let (m, q, s) = (params.m, params.q, params.s);
    let lo = s.max(1.0);
    let hi = n * s;
    if !(p_bound >= lo && p_bound <= hi) {
        return Err(Error::arg(
            "p_bound",
            format!("𝕡 must lie in [max(s,1), ns] = [{lo}, {hi}], got {p_bound}"),
        ));
    }
    let p = p_bound;
    let diff = m - q;
    let denom = (diff * n + p) * p;
    let admissible = diff > -p / n && diff <= (n * s - 2.0 * p) / n && m > (n - 2.0 * p) / n;
    let q_aux = p / s;
    Ok(ExponentBundle {
        p0: n * (1.0 - diff) / 2.0,
        alpha_lower: (denom > 0.0).then(|| n * (n * s - p) / denom),
        beta_lower: (n * s - p) / p,
        q_aux,
        admissible,
        regime: Regime::classify(params.n, q_aux),
    })
}

/// Decay exponent `n(ns-1) + ε` of the envelope for `m = q = 1`, `𝕡 = 1`.
///
/// Accepts `s ∈ [2/n, 1]`: the endpoint `s = 2/n` still satisfies the
/// admissibility condition and is the classical case `n = 2`, `s = 1`.
/// `ε = 0` returns the threshold itself.
pub fn nonlinear_production_envelope(n: usize, s: f64, eps: f64) -> Result<f64> {
    let nf = n as f64;
    if !(s >= 2.0 / nf && s <= 1.0) {
        return Err(Error::arg(
            "s",
            format!("s must lie in [2/n, 1] = [{}, 1], got {s}", 2.0 / nf),
        ));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::arg("eps", format!("ε must be nonnegative, got {eps}")));
    }
    Ok(nf * (nf * s - 1.0) + eps)
}

/// Cutoff `ζ` with `ζ = r` on `[0, R/2]` and `ζ_r(R) = ζ_rr(R) = 0`.
#[derive(Debug, Clone)]
pub struct CutoffZeta {
    pub zeta: RadialField,
    pub zeta_r: RadialField,
    pub zeta_rr: RadialField,
}

/// `(ζ, ζ_r, ζ_rr)` at `r`.
///
/// On `[R/2, R]` this is the quintic Hermite interpolant matching
/// `(R/2, 1, 0)` at `R/2` and `ζ_r = ζ_rr = 0` at `R` with `ζ(R) = 3R/4`;
/// for that end value the quintic coefficient vanishes and, with
/// `x = (2r - R)/R`, `ζ = (R/2)(1 + x - x³ + x⁴/2)` and
/// `ζ_r = 1 - 3x² + 2x³ ∈ [0, 1]`.
pub fn zeta_at(r: f64, radius: f64) -> (f64, f64, f64) {
    let half = 0.5 * radius;
    if r <= half {
        return (r, 1.0, 0.0);
    }
    let x = (r - half) / half;
    let z = half * (1.0 + x - x.powi(3) + 0.5 * x.powi(4));
    let zr = 1.0 - 3.0 * x * x + 2.0 * x.powi(3);
    let zrr = (-6.0 * x + 6.0 * x * x) / half;
    (z, zr, zrr)
}

pub fn build_zeta(grid: &Arc<RadialGrid>) -> CutoffZeta {
    let radius = grid.radius();
    let parts: Vec<(f64, f64, f64)> = grid.nodes().iter().map(|&r| zeta_at(r, radius)).collect();
    let field = |k: usize| {
        let values = parts
            .iter()
            .map(|p| match k {
                0 => p.0,
                1 => p.1,
                _ => p.2,
            })
            .collect();
        RadialField::new(grid.clone(), values).expect("cutoff is finite")
    };
    CutoffZeta {
        zeta: field(0),
        zeta_r: field(1),
        zeta_rr: field(2),
    }
}

/// Coefficients of the `z` equation with the constants of their power
/// envelopes `|b₁| ≤ C₁ r^{β-2}`, `|b₂| ≤ C₂ r^{β-1}`, `|b₃| ≤ C₃ r^β`.
///
/// At the origin `b₁, b₂` repeat the first positive node and `b₃ = 0`;
/// the coefficients are only used away from `r = 0`.
#[derive(Debug, Clone)]
pub struct BCoefficients {
    pub beta: f64,
    pub b1: RadialField,
    pub b2: RadialField,
    pub b3: RadialField,
    pub envelope: [f64; 3],
}

pub fn build_b_coefficients(zeta: &CutoffZeta, beta: f64, n: usize) -> Result<BCoefficients> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::arg("beta", format!("β must be positive, got {beta}")));
    }
    let grid = zeta.zeta.grid().clone();
    let r = grid.nodes();
    let (z, zr, zrr) = (zeta.zeta.values(), zeta.zeta_r.values(), zeta.zeta_rr.values());
    let len = r.len();
    let mut b1 = vec![0.0; len];
    let mut b2 = vec![0.0; len];
    let mut b3 = vec![0.0; len];
    for i in 1..len {
        b1[i] = -beta * (beta - 1.0) * z[i].powf(beta - 2.0) * zr[i] * zr[i] - beta * z[i].powf(beta - 1.0) * zrr[i];
        b2[i] = -2.0 * beta * z[i].powf(beta - 1.0) * zr[i] + (n as f64 - 1.0) / r[i] * z[i].powf(beta);
        b3[i] = z[i].powf(beta);
    }
    b1[0] = b1[1];
    b2[0] = b2[1];
    b3[0] = 0.0;
    let mut envelope = [0.0f64; 3];
    for i in 1..len {
        envelope[0] = envelope[0].max(b1[i].abs() / r[i].powf(beta - 2.0));
        envelope[1] = envelope[1].max(b2[i].abs() / r[i].powf(beta - 1.0));
        envelope[2] = envelope[2].max(b3[i].abs() / r[i].powf(beta));
    }
    if envelope.iter().any(|c| !c.is_finite()) {
        return Err(Error::Internal("b-coefficient envelope is not finite".into()));
    }
    Ok(BCoefficients {
        beta,
        b1: RadialField::new(grid.clone(), b1)?,
        b2: RadialField::new(grid.clone(), b2)?,
        b3: RadialField::new(grid, b3)?,
        envelope,
    })
}

/// `z = ζ^β ṽ`.
pub fn z_transform(v: &RadialField, v_at_0: f64, zeta: &CutoffZeta, beta: f64, regime: Regime) -> RadialField {
    let shift = if regime.subtracts_center() { v_at_0 } else { 0.0 };
    v.zip_with(&zeta.zeta, |vi, zi| zi.powf(beta) * (vi - shift))
}

/// Everything needed to evaluate the `z` equation on one grid.
#[derive(Debug, Clone)]
pub struct ZContext {
    pub zeta: CutoffZeta,
    pub b: BCoefficients,
    pub regime: Regime,
    /// Include `-ζ^β v(0, t)`, which the equation needs in the `𝕢 > n/2`
    /// regime because `-ζ^β v = -z - ζ^β v(0, t)` there. Off reproduces
    /// the equation with `-z` alone.
    pub center_value_term: bool,
    /// Residuals are taken on nodes with `r ≥ r_cut`, where the `r^{β-2}`
    /// growth of `b₁` is not yet amplifying discretization error.
    pub r_cut: f64,
}

impl ZContext {
    pub fn new(grid: &Arc<RadialGrid>, beta: f64, regime: Regime, r_cut: f64) -> Result<Self> {
        if !(r_cut >= 0.0 && r_cut < grid.radius()) {
            return Err(Error::arg("r_cut", "cutoff radius must lie in [0, R)"));
        }
        let zeta = build_zeta(grid);
        let b = build_b_coefficients(&zeta, beta, grid.dimension())?;
        Ok(ZContext {
            zeta,
            b,
            regime,
            center_value_term: true,
            r_cut,
        })
    }

    pub fn beta(&self) -> f64 {
        self.b.beta
    }

    pub fn transform(&self, v: &RadialField) -> RadialField {
        z_transform(v, v.at_origin(), &self.zeta, self.beta(), self.regime)
    }

    /// Right-hand side of the `z` equation without the `v_t(0, t)` term.
    fn spatial_part(&self, v: &RadialField, g: &RadialField) -> Vec<f64> {
        let grid = v.grid();
        let r = grid.nodes();
        let z = self.transform(v);
        let zv = z.values();
        let vr = radial_derivative(v);
        let shift = if self.regime.subtracts_center() {
            v.at_origin()
        } else {
            0.0
        };
        let center = if self.regime.subtracts_center() && self.center_value_term {
            v.at_origin()
        } else {
            0.0
        };
        let (b1, b2, b3) = (self.b.b1.values(), self.b.b2.values(), self.b.b3.values());
        let mut out = vec![0.0; r.len()];
        for i in 1..grid.cells() {
            let hm = r[i] - r[i - 1];
            let hp = r[i + 1] - r[i];
            let zrr = 2.0 * ((zv[i + 1] - zv[i]) / hp - (zv[i] - zv[i - 1]) / hm) / (hp + hm);
            let vtil = v.values()[i] - shift;
            out[i] = zrr - zv[i] + b1[i] * vtil + b2[i] * vr.values()[i] + b3[i] * g.values()[i] - b3[i] * center;
        }
        out
    }
}

/// Residual of the `z` equation between two states of `τ v_t = Δv - v + g`.
#[derive(Debug, Clone)]
pub struct ZResidual {
    /// Zero outside `[r_cut, R)`.
    pub residual: RadialField,
    pub max_norm: f64,
    /// One-sided `z_r` at the origin and `z_r(R)`, for the later state.
    pub z_r_origin: f64,
    pub z_r_boundary: f64,
}

/// One-sided second-order derivative at `r = 0` from the first three
/// nodes.
fn derivative_at_origin(f: &RadialField) -> f64 {
    let r = f.grid().nodes();
    let v = f.values();
    let (h1, h2) = (r[1], r[2]);
    // quadratic through (0, v0), (h1, v1), (h2, v2), differentiated at 0
    -v[0] * (h1 + h2) / (h1 * h2) + v[1] * h2 / (h1 * (h2 - h1)) - v[2] * h1 / (h2 * (h2 - h1))
}

/// Time-centred residual `z_t - ½(F⁰ + F¹) + [𝕢 > n/2] ζ^β v_t(0)` in the
/// rescaled time `t/τ`, where `F` is the right-hand side of the equation.
#[allow(clippy::too_many_arguments)]
pub fn z_residual(
    ctx: &ZContext,
    v0: &RadialField,
    g0: &RadialField,
    t0: f64,
    v1: &RadialField,
    g1: &RadialField,
    t1: f64,
    tau: f64,
) -> Result<ZResidual> {
    if !(t1 > t0) || !(tau > 0.0) {
        return Err(Error::arg("t1", "need increasing times and τ > 0"));
    }
    let grid = v0.grid();
    let ds = (t1 - t0) / tau;
    let z0 = ctx.transform(v0);
    let z1 = ctx.transform(v1);
    let f0 = ctx.spatial_part(v0, g0);
    let f1 = ctx.spatial_part(v1, g1);
    let center_rate = if ctx.regime.subtracts_center() {
        (v1.at_origin() - v0.at_origin()) / ds
    } else {
        0.0
    };
    let b3 = ctx.b.b3.values();
    let r = grid.nodes();
    let mut res = vec![0.0; r.len()];
    let mut max_norm = 0.0f64;
    for i in 1..grid.cells() {
        if r[i] < ctx.r_cut {
            continue;
        }
        let zt = (z1.values()[i] - z0.values()[i]) / ds;
        res[i] = zt - 0.5 * (f0[i] + f1[i]) + b3[i] * center_rate;
        max_norm = max_norm.max(res[i].abs());
    }
    Ok(ZResidual {
        residual: RadialField::new(grid.clone(), res)?,
        max_norm,
        z_r_origin: derivative_at_origin(&z1),
        z_r_boundary: radial_derivative(&z1).values()[grid.cells()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZResidualReport {
    pub beta: f64,
    pub regime: Regime,
    pub r_cut: f64,
    pub max_residual: f64,
    pub max_z_r_origin: f64,
    pub max_z_r_boundary: f64,
    /// Spacings `r₁` and `R - r_{N-1}` that scale the boundary checks.
    pub h_origin: f64,
    pub h_boundary: f64,
    pub pairs: usize,
}

/// Residual over every consecutive pair of `(t, v, g)` states.
pub fn z_residual_series(
    ctx: &ZContext,
    states: &[(f64, RadialField, RadialField)],
    tau: f64,
) -> Result<ZResidualReport> {
    if states.len() < 2 {
        return Err(Error::arg("states", "need at least two consecutive states"));
    }
    let grid = states[0].1.grid().clone();
    let mut report = ZResidualReport {
        beta: ctx.beta(),
        regime: ctx.regime,
        r_cut: ctx.r_cut,
        max_residual: 0.0,
        max_z_r_origin: derivative_at_origin(&ctx.transform(&states[0].1)).abs(),
        max_z_r_boundary: radial_derivative(&ctx.transform(&states[0].1)).values()[grid.cells()].abs(),
        h_origin: grid.spacing(0),
        h_boundary: grid.spacing(grid.cells() - 1),
        pairs: states.len() - 1,
    };
    for w in states.windows(2) {
        let (t0, v0, g0) = &w[0];
        let (t1, v1, g1) = &w[1];
        let r = z_residual(ctx, v0, g0, *t0, v1, g1, *t1, tau)?;
        report.max_residual = report.max_residual.max(r.max_norm);
        report.max_z_r_origin = report.max_z_r_origin.max(r.z_r_origin.abs());
        report.max_z_r_boundary = report.max_z_r_boundary.max(r.z_r_boundary.abs());
    }
    Ok(report)
}

/// `sup_{r>0} |v(r) - v(0)| / r^κ` over the grid nodes.
pub fn holder_space(v: &RadialField, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::arg("kappa", format!("κ must lie in (0, 1], got {kappa}")));
    }
    let v0 = v.at_origin();
    Ok(v.grid()
        .nodes()
        .iter()
        .zip(v.values())
        .skip(1)
        .fold(0.0, |m, (r, x)| m.max((x - v0).abs() / r.powf(kappa))))
}

/// Samples beyond which [`holder_time`] thins the series by striding.
pub const HOLDER_TIME_CAP: usize = 2000;

/// `sup_{i≠j} |a_i - a_j| / |t_i - t_j|^θ` over the pairs of a time series.
pub fn holder_time(times: &[f64], values: &[f64], theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::arg("theta", format!("θ must lie in (0, 1), got {theta}")));
    }
    if times.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    if times.len() < 2 {
        return Err(Error::arg("times", "need at least two samples"));
    }
    let k = times.len();
    let stride = k.div_ceil(HOLDER_TIME_CAP);
    let mut idx: Vec<usize> = (0..k).step_by(stride).collect();
    if *idx.last().unwrap() != k - 1 {
        idx.push(k - 1);
    }
    let mut sup = 0.0f64;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let dt = (times[i] - times[j]).abs();
            if dt > 0.0 {
                sup = sup.max((values[i] - values[j]).abs() / dt.powf(theta));
            }
        }
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    GrowthSuspected,
    /// Neither stable nor growing by the flagging factor.
    Inconclusive,
}

/// Classifies a sequence of constants measured on successively refined
/// grids from the change between the last two levels.
pub fn refinement_verdict(constants: &[f64]) -> Verdict {
    let n = constants.len();
    if n < 2 {
        return Verdict::Inconclusive;
    }
    let (a, b) = (constants[n - 2], constants[n - 1]);
    if relative_change(constants).is_some_and(|c| c < STABILITY_TOL) || (a == 0.0 && b == 0.0) {
        Verdict::Bounded
    } else if b >= GROWTH_FACTOR * a {
        Verdict::GrowthSuspected
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEnvelopeReport {
    pub beta: f64,
    pub beta_threshold: f64,
    /// `β` at or below `(n - 𝕢)/𝕢`, where the estimate is not expected.
    pub below_threshold: bool,
    /// `sup_t sup_r r^β |v_r|` per refinement level.
    pub c_measured: Vec<f64>,
    pub mesh_stability: Option<f64>,
    pub growth_ratio: Option<f64>,
    pub verdict: Verdict,
}

/// Measures `sup_t sup_r r^β |v_r|` on each refinement level (coarse to
/// fine; each level is a list of signal snapshots).
pub fn verify_gradient_envelope(levels: &[&[RadialField]], beta: f64, q_aux: f64) -> Result<GradientEnvelopeReport> {
    if levels.is_empty() || levels.iter().any(|l| l.is_empty()) {
        return Err(Error::arg("levels", "need at least one snapshot per level"));
    }
    if !(q_aux >= 1.0) {
        return Err(Error::arg("q_aux", "𝕢 must be ≥ 1"));
    }
    let n = levels[0][0].grid().dimension() as f64;
    let beta_threshold = (n - q_aux) / q_aux;
    let c_measured: Vec<f64> = levels
        .iter()
        .map(|snaps| {
            snaps
                .iter()
                .map(|v| weighted_sup(&radial_derivative(v), beta, 0.0))
                .fold(0.0, f64::max)
        })
        .collect();
    let k = c_measured.len();
    Ok(GradientEnvelopeReport {
        beta,
        beta_threshold,
        below_threshold: beta <= beta_threshold,
        mesh_stability: relative_change(&c_measured),
        growth_ratio: (k >= 2 && c_measured[k - 2] > 0.0).then(|| c_measured[k - 1] / c_measured[k - 2]),
        verdict: refinement_verdict(&c_measured),
        c_measured,
    })
}
