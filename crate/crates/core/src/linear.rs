//! Linear auxiliary problems `0 = Δv - v + g` and `τ v_t = Δv - v + g` with
//! homogeneous Neumann conditions, plus the inequality checks the a-priori
//! theory asserts for their solutions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fv_laplacian_bands, laplacian_radial, lp_norm, radial_derivative, RadialField, RadialGrid};
use crate::tridiag;

/// Default relative slack of [`check_delta_v_bound`].
pub const DELTA_V_TOL: f64 = 0.05;
/// Default relative slack of [`check_radial_gradient_bound`].
pub const RADIAL_GRADIENT_TOL: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub v: RadialField,
    /// Max-norm of the discrete residual `Δv - v + g`, each row divided by
    /// its diagonal entry.
    pub residual_norm: f64,
    pub g: RadialField,
}

/// Discrete `(-Δ + I)` as three bands (rows not yet scaled).
fn shifted_operator(grid: &RadialGrid, shift: f64, scale: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (lo, di, up) = fv_laplacian_bands(grid);
    let lower = lo.iter().map(|x| -scale * x).collect();
    let diag = di.iter().map(|x| shift - scale * x).collect();
    let upper = up.iter().map(|x| -scale * x).collect();
    (lower, diag, upper)
}

/// Solves `-Δv + v = g` with the conservative Neumann discretization.
pub fn solve_elliptic(g: &RadialField) -> Result<EllipticSolution> {
    let grid = g.grid();
    let (lower, diag, upper) = shifted_operator(grid, 1.0, 1.0);
    let mut v = g.values().to_vec();
    tridiag::solve_in_place(&lower, &diag, &upper, &mut v)
        .map_err(|e| Error::Internal(format!("elliptic solve failed: {e}")))?;
    let av = tridiag::apply(&lower, &diag, &upper, &v);
    let residual_norm = av
        .iter()
        .zip(g.values())
        .zip(&diag)
        .fold(0.0_f64, |m, ((a, b), d)| m.max((a - b).abs() / d));
    Ok(EllipticSolution {
        v: RadialField::new(grid.clone(), v)?,
        residual_norm,
        g: g.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub pass: bool,
}

impl BoundCheck {
    /// `lhs / rhs`, the factor by which the bound is used up.
    pub fn slack_factor(&self) -> f64 {
        if self.rhs == 0.0 {
            if self.lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lhs / self.rhs
        }
    }
}

/// `‖Δv‖_q ≤ 2‖g‖_q`, checked with relative slack `tol`.
pub fn check_delta_v_bound_with(sol: &EllipticSolution, q: f64, tol: f64) -> Result<BoundCheck> {
    let lhs = lp_norm(&laplacian_radial(&sol.v), q)?;
    let rhs = 2.0 * lp_norm(&sol.g, q)?;
    Ok(BoundCheck {
        lhs,
        rhs,
        tol,
        pass: lhs <= rhs * (1.0 + tol),
    })
}

pub fn check_delta_v_bound(sol: &EllipticSolution, q: f64) -> Result<BoundCheck> {
    check_delta_v_bound_with(sol, q, DELTA_V_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGradientCheck {
    /// `max_r lhs(r) / rhs(r)` over positive nodes.
    pub max_violation_ratio: f64,
    /// Node where the ratio peaks.
    pub worst_r: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Prefactor `2M n^{-(q-1)/q} / ω^{1/q}` of the envelope
/// `r^{n-1}|v_r| ≤ prefactor · r^{n - n/q}`.
pub fn radial_gradient_prefactor(n: usize, omega: f64, q: f64, m: f64) -> f64 {
    2.0 * m * (n as f64).powf(-(q - 1.0) / q) / omega.powf(1.0 / q)
}

/// Pointwise envelope `r^{n-1}|v_r(r)| ≤ (2M n^{-(q-1)/q}/ω^{1/q}) r^{n-n/q}`
/// at every positive node, for `q ∈ [1, n]` and `‖g‖_q ≤ M`.
pub fn check_radial_gradient_bound_with(
    sol: &EllipticSolution,
    q: f64,
    m: f64,
    tol: f64,
) -> Result<RadialGradientCheck> {
    let grid = sol.v.grid();
    let n = grid.dimension();
    if !(1.0..=n as f64).contains(&q) {
        return Err(Error::arg("q", format!("q must lie in [1, n] = [1, {n}], got {q}")));
    }
    let g_norm = lp_norm(&sol.g, q)?;
    if g_norm > m * (1.0 + 1e-12) {
        return Err(Error::arg("M", format!("‖g‖_q = {g_norm} exceeds M = {m}")));
    }
    let pre = radial_gradient_prefactor(n, grid.omega(), q, m);
    let vr = radial_derivative(&sol.v);
    let (mut ratio, mut worst_r) = (0.0_f64, grid.first_positive_node());
    for (&r, &d) in grid.nodes().iter().zip(vr.values()).skip(1) {
        let lhs = r.powi(n as i32 - 1) * d.abs();
        let rhs = pre * r.powf(n as f64 - n as f64 / q);
        let this = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if this > ratio {
            ratio = this;
            worst_r = r;
        }
    }
    Ok(RadialGradientCheck {
        max_violation_ratio: ratio,
        worst_r,
        tol,
        pass: ratio <= 1.0 + tol,
    })
}

pub fn check_radial_gradient_bound(sol: &EllipticSolution, q: f64, m: f64) -> Result<RadialGradientCheck> {
    check_radial_gradient_bound_with(sol, q, m, RADIAL_GRADIENT_TOL)
}

/// Solution of the parabolic problem at one instant. `t` is user time; the
/// solver advances the rescaled problem `v_s = Δv - v + g` in internal time
/// `s = t / τ`.
#[derive(Debug, Clone)]
pub struct ParabolicState {
    pub v: RadialField,
    pub t: f64,
    pub tau: f64,
}

impl ParabolicState {
    pub fn new(v: RadialField, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::arg("tau", format!("τ must be positive, got {tau}")));
        }
        Ok(ParabolicState { v, t: 0.0, tau })
    }

    pub fn internal_time(&self) -> f64 {
        self.t / self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TimeScheme {
    #[default]
    CrankNicolson,
    ImplicitEuler,
}

/// Reusable stepper for one grid; keeps the operator bands.
#[derive(Debug, Clone)]
pub struct ParabolicStepper {
    grid: Arc<RadialGrid>,
    lap: (Vec<f64>, Vec<f64>, Vec<f64>),
    pub scheme: TimeScheme,
    /// Redo a Crank–Nicolson step with implicit Euler when nonnegative data
    /// produce a value below `-1e-12`.
    pub positivity_fallback: bool,
}

impl ParabolicStepper {
    pub fn new(grid: &Arc<RadialGrid>, scheme: TimeScheme) -> Self {
        ParabolicStepper {
            grid: grid.clone(),
            lap: fv_laplacian_bands(grid),
            scheme,
            positivity_fallback: true,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Advances by `dt` (user time) with source `g_old` at the start and
    /// `g_new` at the end of the step.
    pub fn step(
        &self,
        state: &ParabolicState,
        g_old: &RadialField,
        g_new: &RadialField,
        dt: f64,
    ) -> Result<ParabolicState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::arg("dt", format!("time step must be positive, got {dt}")));
        }
        let h = dt / state.tau;
        let v = match self.scheme {
            TimeScheme::ImplicitEuler => self.implicit_euler(state.v.values(), g_new.values(), h)?,
            TimeScheme::CrankNicolson => {
                let v = self.crank_nicolson(state.v.values(), g_old.values(), g_new.values(), h)?;
                let nonneg_data = state.v.min() >= 0.0 && g_old.min() >= 0.0 && g_new.min() >= 0.0;
                if self.positivity_fallback && nonneg_data && v.iter().any(|&x| x < -1e-12) {
                    self.implicit_euler(state.v.values(), g_new.values(), h)?
                } else {
                    v
                }
            }
        };
        Ok(ParabolicState {
            v: RadialField::new(self.grid.clone(), v)?,
            t: state.t + dt,
            tau: state.tau,
        })
    }

    fn implicit_euler(&self, v: &[f64], g: &[f64], h: f64) -> Result<Vec<f64>> {
        let (lo, di, up) = &self.lap;
        let lower: Vec<f64> = lo.iter().map(|x| -h * x).collect();
        let diag: Vec<f64> = di.iter().map(|x| 1.0 + h - h * x).collect();
        let upper: Vec<f64> = up.iter().map(|x| -h * x).collect();
        let mut rhs: Vec<f64> = v.iter().zip(g).map(|(a, b)| a + h * b).collect();
        tridiag::solve_in_place(&lower, &diag, &upper, &mut rhs)?;
        Ok(rhs)
    }

    fn crank_nicolson(&self, v: &[f64], g_old: &[f64], g_new: &[f64], h: f64) -> Result<Vec<f64>> {
        let (lo, di, up) = &self.lap;
        let half = 0.5 * h;
        let lv = tridiag::apply(lo, di, up, v);
        let mut rhs: Vec<f64> = (0..v.len())
            .map(|i| v[i] + half * (lv[i] - v[i]) + half * (g_old[i] + g_new[i]))
            .collect();
        let lower: Vec<f64> = lo.iter().map(|x| -half * x).collect();
        let diag: Vec<f64> = di.iter().map(|x| 1.0 + half - half * x).collect();
        let upper: Vec<f64> = up.iter().map(|x| -half * x).collect();
        tridiag::solve_in_place(&lower, &diag, &upper, &mut rhs)?;
        Ok(rhs)
    }
}

/// One Crank–Nicolson step with a source that is frozen over the step.
pub fn step_parabolic(state: &ParabolicState, g_at_t: &RadialField, dt: f64) -> Result<ParabolicState> {
    ParabolicStepper::new(state.v.grid(), TimeScheme::CrankNicolson).step(state, g_at_t, g_at_t, dt)
}

/// Integrates from `state` to `t_end` with fixed steps of size `dt` and
/// source `source(t)`, keeping every `every`-th state (and the final one).
pub fn integrate_parabolic(
    stepper: &ParabolicStepper,
    state: ParabolicState,
    source: &dyn Fn(f64) -> Result<RadialField>,
    dt: f64,
    t_end: f64,
    every: usize,
) -> Result<Vec<ParabolicState>> {
    if !(dt > 0.0) {
        return Err(Error::arg("dt", "time step must be positive"));
    }
    let every = every.max(1);
    let steps = ((t_end - state.t) / dt).round().max(0.0) as usize;
    let mut out = vec![state.clone()];
    let mut cur = state;
    let mut g_old = source(cur.t)?;
    for k in 1..=steps {
        let g_new = source(cur.t + dt)?;
        cur = stepper.step(&cur, &g_old, &g_new, dt)?;
        g_old = g_new;
        if k % every == 0 || k == steps {
            out.push(cur.clone());
        }
    }
    Ok(out)
}

/// Upper end of the admissible `p` range `(1, nq/(n-q))`; infinite for `q ≥ n`.
pub fn sobolev_exponent(n: usize, q: f64) -> f64 {
    let n = n as f64;
    if q >= n {
        f64::INFINITY
    } else {
        n * q / (n - q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1pReport {
    pub p: f64,
    /// `sup_t ‖v_r(·,t)‖_p` for each refinement level, coarse to fine.
    pub sup_per_level: Vec<f64>,
    /// Relative change between the two finest levels; `None` with one level.
    pub mesh_stability: Option<f64>,
}

/// Measures `sup_t ‖∇v(·,t)‖_p` over the snapshots with `t` in `window`.
///
/// `levels` holds the same run at successive refinement levels.
pub fn verify_w1p_bound(levels: &[&[ParabolicState]], p: f64, q: f64, window: (f64, f64)) -> Result<W1pReport> {
    let first = levels
        .first()
        .and_then(|l| l.first())
        .ok_or_else(|| Error::arg("levels", "need at least one nonempty trajectory"))?;
    let n = first.v.grid().dimension();
    let upper = sobolev_exponent(n, q);
    if !(p > 1.0 && p < upper) {
        return Err(Error::arg(
            "p",
            format!("p must lie in (1, nq/(n-q)) = (1, {upper}), got {p}"),
        ));
    }
    let mut sup_per_level = Vec::with_capacity(levels.len());
    for traj in levels {
        let mut sup = 0.0_f64;
        for s in traj.iter().filter(|s| s.t >= window.0 && s.t <= window.1) {
            sup = sup.max(lp_norm(&radial_derivative(&s.v), p)?);
        }
        sup_per_level.push(sup);
    }
    let mesh_stability = relative_change(&sup_per_level);
    Ok(W1pReport {
        p,
        sup_per_level,
        mesh_stability,
    })
}

/// `|x_fine - x_coarse| / max(|x_fine|, |x_coarse|)` for the last two entries.
pub(crate) fn relative_change(values: &[f64]) -> Option<f64> {
    match values {
        [.., a, b] => {
            let scale = a.abs().max(b.abs());
            Some(if scale == 0.0 { 0.0 } else { (b - a).abs() / scale })
        }
        _ => None,
    }
}
