//! Radial finite-volume solver for the quasilinear chemotaxis system
//!
//! ```text
//! u_t = ∇·(D(u)∇u − S(u)∇v),   τ v_t = Δv − v + f(u)
//! ```
//!
//! with no-flux boundaries, driven toward blow-up by an adaptive step
//! controller.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::linear::{solve_elliptic, ParabolicState, ParabolicStepper, TimeScheme};
use crate::tridiag;

/// Largest density at which coefficient functions must stay finite.
pub const COEFFICIENT_RANGE: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n: usize,
    pub radius: f64,
    pub m: f64,
    pub q: f64,
    pub s: f64,
    pub tau: f64,
    pub k_d1: f64,
    pub k_d2: f64,
    pub k_s: f64,
    pub k_f: f64,
    /// Bound `M` on the data and on `sup_t ‖u‖_𝕡`.
    pub data_bound: f64,
}

impl ModelParams {
    /// Parameters for the prototype coefficients with the constants of
    /// [`prototype_constants`].
    pub fn prototype(n: usize, radius: f64, m: f64, q: f64, s: f64, tau: f64) -> Result<Self> {
        let k = prototype_constants(m, q);
        let p = ModelParams {
            n,
            radius,
            m,
            q,
            s,
            tau,
            k_d1: k.k_d1,
            k_d2: k.k_d2,
            k_s: k.k_s,
            k_f: k.k_f,
            data_bound: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::arg("n", format!("dimension must be at least 2, got {}", self.n)));
        }
        let positive = [
            ("radius", self.radius),
            ("s", self.s),
            ("k_d1", self.k_d1),
            ("k_d2", self.k_d2),
            ("k_s", self.k_s),
            ("k_f", self.k_f),
            ("data_bound", self.data_bound),
        ];
        for (name, x) in positive {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::arg(name, format!("{name} must be positive and finite, got {x}")));
            }
        }
        for (name, x) in [("m", self.m), ("q", self.q)] {
            if !x.is_finite() {
                return Err(Error::arg(name, format!("{name} must be finite")));
            }
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::arg("tau", format!("τ must be nonnegative, got {}", self.tau)));
        }
        if self.k_d1 > self.k_d2 {
            return Err(Error::arg("k_d1", "K_D1 must not exceed K_D2"));
        }
        Ok(())
    }
}

/// Hypothesis constants `K_{D,1}, K_{D,2}, K_S, K_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    pub k_d1: f64,
    pub k_d2: f64,
    pub k_s: f64,
    pub k_f: f64,
    /// Smallest `ρ` from which all four bounds hold (0 when they hold
    /// everywhere).
    pub valid_from: f64,
}

/// Constants the prototype coefficients satisfy.
///
/// For `m < 1` no `K_{D,1}` bounds `(ρ+1)^{m-1}` below by a multiple of
/// `ρ^{m-1}` as `ρ → 0`; the returned `2^{m-1}` holds on `ρ ≥ 1` only and
/// `valid_from` says so.
pub fn prototype_constants(m: f64, q: f64) -> HypothesisConstants {
    HypothesisConstants {
        k_d1: 1f64.min(2f64.powf(m - 1.0)),
        k_d2: 1f64.max(2f64.powf(m - 1.0)),
        k_s: 1f64.max(2f64.powf(q - 1.0)),
        k_f: 1.0,
        valid_from: if m < 1.0 { 1.0 } else { 0.0 },
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coefficient functions of the density.
#[derive(Clone)]
pub struct CoefficientSet {
    pub label: String,
    pub diffusion: ScalarFn,
    pub sensitivity: ScalarFn,
    pub production: ScalarFn,
    /// Constants known to hold for these functions, if any.
    pub constants: Option<HypothesisConstants>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("label", &self.label)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    pub fn custom(
        label: impl Into<String>,
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sensitivity: impl Fn(f64) -> f64 + Send + Sync + 'static,
        production: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let c = CoefficientSet {
            label: label.into(),
            diffusion: Arc::new(diffusion),
            sensitivity: Arc::new(sensitivity),
            production: Arc::new(production),
            constants: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn d(&self, rho: f64) -> f64 {
        (self.diffusion)(rho)
    }

    pub fn s(&self, rho: f64) -> f64 {
        (self.sensitivity)(rho)
    }

    pub fn f(&self, rho: f64) -> f64 {
        (self.production)(rho)
    }

    /// Spot-checks positivity of `D` and finiteness on `[0, 10¹²]`.
    pub fn validate(&self) -> Result<()> {
        let samples = log_samples(1e-12, COEFFICIENT_RANGE, 97);
        for &rho in std::iter::once(&0.0).chain(&samples) {
            let (d, s, f) = (self.d(rho), self.s(rho), self.f(rho));
            if !d.is_finite() || !s.is_finite() || !f.is_finite() {
                return Err(Error::arg(
                    "coefficients",
                    format!("{}: non-finite value at ρ = {rho:e}", self.label),
                ));
            }
            if rho > 0.0 && !(d > 0.0) {
                return Err(Error::arg(
                    "coefficients",
                    format!("{}: D must be positive, D({rho:e}) = {d}", self.label),
                ));
            }
        }
        Ok(())
    }
}

/// `D = (ρ+1)^{m-1}`, `S = ρ(ρ+1)^{q-1}`, `f = ρ^s`.
pub fn make_prototype_coefficients(params: &ModelParams) -> CoefficientSet {
    let (m, q, s) = (params.m, params.q, params.s);
    CoefficientSet {
        label: format!("prototype(m={m}, q={q}, s={s})"),
        diffusion: Arc::new(move |rho: f64| (rho + 1.0).powf(m - 1.0)),
        sensitivity: Arc::new(move |rho: f64| rho * (rho + 1.0).powf(q - 1.0)),
        production: Arc::new(move |rho: f64| rho.max(0.0).powf(s)),
        constants: Some(prototype_constants(m, q)),
    }
}

/// `count` log-spaced points in `[lo, hi]`.
pub fn log_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count.max(2) - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisBound {
    DiffusionLower,
    DiffusionUpper,
    Sensitivity,
    Production,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisViolation {
    pub bound: HypothesisBound,
    pub rho: f64,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub samples: usize,
    pub violations: Vec<HypothesisViolation>,
    pub pass: bool,
}

/// Evaluates the four growth bounds on `D, S, f` at every sample.
pub fn check_hypothesis_bounds(
    coeffs: &CoefficientSet,
    params: &ModelParams,
    rho_samples: &[f64],
) -> Result<HypothesisReport> {
    if rho_samples.is_empty() {
        return Err(Error::arg("rho_samples", "need at least one sample"));
    }
    let slack = 1.0 + 1e-12;
    let mut violations = Vec::new();
    for &rho in rho_samples {
        let big = rho.max(1.0);
        let mut check = |bound, value: f64, limit: f64, ok: bool| {
            if !ok {
                violations.push(HypothesisViolation {
                    bound,
                    rho,
                    value,
                    limit,
                });
            }
        };
        let d = coeffs.d(rho);
        if rho > 0.0 {
            let lower = params.k_d1 * rho.powf(params.m - 1.0);
            check(HypothesisBound::DiffusionLower, d, lower, d * slack >= lower);
        }
        let upper = params.k_d2 * big.powf(params.m - 1.0);
        check(HypothesisBound::DiffusionUpper, d, upper, d <= upper * slack);
        let s = coeffs.s(rho).abs();
        let ls = params.k_s * big.powf(params.q);
        check(HypothesisBound::Sensitivity, s, ls, s <= ls * slack);
        let f = coeffs.f(rho).abs();
        let lf = params.k_f * big.powf(params.s);
        check(HypothesisBound::Production, f, lf, f <= lf * slack);
    }
    Ok(HypothesisReport {
        samples: rho_samples.len(),
        pass: violations.is_empty(),
        violations,
    })
}

/// Named initial densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Constant {
        value: f64,
    },
    /// `A exp(-r²/w²)` with `A` chosen so the discrete mass equals `mass`.
    Gaussian {
        mass: f64,
        width: f64,
    },
    /// `min(A r^{-α₀}, u_max)`.
    PowerCap {
        amplitude: f64,
        alpha0: f64,
        cap: f64,
    },
}

impl InitialData {
    pub fn sample(&self, grid: &Arc<RadialGrid>) -> Result<RadialField> {
        match *self {
            InitialData::Constant { value } => {
                if !(value >= 0.0) {
                    return Err(Error::arg("value", "initial density must be nonnegative"));
                }
                RadialField::constant(grid, value)
            }
            InitialData::Gaussian { mass, width } => {
                if !(mass > 0.0) || !(width > 0.0) {
                    return Err(Error::arg("gaussian", "mass and width must be positive"));
                }
                let shape = RadialField::from_fn(grid, |r| (-(r * r) / (width * width)).exp())?;
                Ok(shape.scale(mass / shape.integral()))
            }
            InitialData::PowerCap { amplitude, alpha0, cap } => {
                if !(amplitude > 0.0) || !(cap > 0.0) || !(alpha0 >= 0.0) {
                    return Err(Error::arg("power_cap", "amplitude, cap > 0 and α₀ ≥ 0 required"));
                }
                RadialField::from_fn(grid, |r| {
                    if r == 0.0 {
                        cap
                    } else {
                        (amplitude * r.powf(-alpha0)).min(cap)
                    }
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct KSState {
    pub u: RadialField,
    pub v: RadialField,
    pub t: f64,
    pub dt_last: f64,
    pub mass: f64,
}

impl KSState {
    /// Initial state with `v` the elliptic response to `f(u₀)`, which is
    /// the only consistent choice for `τ = 0` and a `W^{1,∞}` datum for
    /// `τ > 0`.
    pub fn initial(u0: RadialField, coeffs: &CoefficientSet) -> Result<Self> {
        let g = u0.map(|x| coeffs.f(x));
        let v = solve_elliptic(&g)?.v;
        Self::with_v(u0, v)
    }

    /// Initial state with a prescribed signal (`τ > 0` only).
    pub fn with_v(u0: RadialField, v0: RadialField) -> Result<Self> {
        if !Arc::ptr_eq(u0.grid(), v0.grid()) && u0.grid() != v0.grid() {
            return Err(Error::arg("v0", "u and v must live on the same grid"));
        }
        if u0.min() < 0.0 {
            return Err(Error::arg("u0", "initial density must be nonnegative"));
        }
        let mass = u0.integral();
        Ok(KSState {
            u: u0,
            v: v0,
            t: 0.0,
            dt_last: 0.0,
            mass,
        })
    }
}

/// Largest tolerated undershoot before a step is rejected.
pub const NEGATIVITY_TOL: f64 = 1e-8;

/// Discretization options shared by every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeOptions {
    /// Lagged-coefficient diffusion solves per step.
    pub picard_iterations: usize,
    pub time_scheme: TimeScheme,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        SchemeOptions {
            picard_iterations: 1,
            time_scheme: TimeScheme::CrankNicolson,
        }
    }
}

/// Steps one system with cached operators.
#[derive(Debug, Clone)]
pub struct KsStepper {
    grid: Arc<RadialGrid>,
    coeffs: CoefficientSet,
    params: ModelParams,
    options: SchemeOptions,
    signal: Option<ParabolicStepper>,
}

impl KsStepper {
    pub fn new(
        grid: &Arc<RadialGrid>,
        coeffs: CoefficientSet,
        params: ModelParams,
        options: SchemeOptions,
    ) -> Result<Self> {
        params.validate()?;
        coeffs.validate()?;
        if grid.dimension() != params.n || (grid.radius() - params.radius).abs() > 1e-12 * params.radius {
            return Err(Error::arg("grid", "grid dimension and radius must match the model"));
        }
        if options.picard_iterations == 0 {
            return Err(Error::arg("picard_iterations", "need at least one iteration"));
        }
        let signal = (params.tau > 0.0).then(|| ParabolicStepper::new(grid, options.time_scheme));
        Ok(KsStepper {
            grid: grid.clone(),
            coeffs,
            params,
            options,
            signal,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn upwind(&self, u: &[f64], v: &[f64], j: usize) -> f64 {
        if v[j + 1] > v[j] {
            self.coeffs.s(u[j])
        } else {
            self.coeffs.s(u[j + 1])
        }
    }

    /// Chemotactic mass flux through each interior face, positive outward.
    fn advective_flux(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let c = self.grid.conductance();
        (0..self.grid.cells())
            .map(|j| c[j] * self.upwind(u, v, j) * (v[j + 1] - v[j]))
            .collect()
    }

    /// Largest step keeping the explicit advective update nonnegative,
    /// scaled by `cfl`.
    pub fn advective_limit(&self, state: &KSState, cfl: f64) -> f64 {
        let (u, v) = (state.u.values(), state.v.values());
        let c = self.grid.conductance();
        let vol = self.grid.cell_volumes();
        let mut outflow = vec![0.0; u.len()];
        for j in 0..self.grid.cells() {
            let dv = v[j + 1] - v[j];
            let up = if dv > 0.0 { j } else { j + 1 };
            outflow[up] += c[j] * dv.abs() * self.coeffs.s(u[up]);
        }
        outflow
            .iter()
            .enumerate()
            .filter(|(_, o)| **o > 0.0)
            .map(|(i, o)| cfl * vol[i] * u[i].max(0.0) / o)
            .fold(f64::INFINITY, f64::min)
    }

    /// One step of size `dt`; returns [`Error::StepRejected`] when the
    /// result would undershoot `-1e-8` or the solve breaks down.
    pub fn step(&self, state: &KSState, dt: f64) -> Result<KSState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::arg("dt", format!("time step must be positive, got {dt}")));
        }
        let grid = &self.grid;
        let (u, v) = (state.u.values(), state.v.values());
        let c = grid.conductance();
        let vol = grid.cell_volumes();
        let len = u.len();

        let flux = self.advective_flux(u, v);
        let mut base = vec![0.0; len];
        for i in 0..len {
            let mut div = 0.0;
            if i < grid.cells() {
                div += flux[i];
            }
            if i > 0 {
                div -= flux[i - 1];
            }
            base[i] = vol[i] * u[i] - dt * div;
        }

        let mut next = u.to_vec();
        for _ in 0..self.options.picard_iterations {
            let d: Vec<f64> = next.iter().map(|&x| self.coeffs.d(x.max(0.0))).collect();
            let face: Vec<f64> = (0..grid.cells()).map(|j| 0.5 * (d[j] + d[j + 1]) * c[j]).collect();
            let mut lower = vec![0.0; len];
            let mut diag = vol.to_vec();
            let mut upper = vec![0.0; len];
            for (j, k) in face.iter().enumerate() {
                upper[j] = -dt * k;
                lower[j + 1] = -dt * k;
                diag[j] += dt * k;
                diag[j + 1] += dt * k;
            }
            let mut rhs = base.clone();
            tridiag::solve_in_place(&lower, &diag, &upper, &mut rhs)
                .map_err(|e| Error::StepRejected(format!("diffusion solve failed: {e}")))?;
            next = rhs;
        }
        if let Some(i) = next.iter().position(|x| !x.is_finite()) {
            return Err(Error::StepRejected(format!("non-finite density at node {i}")));
        }
        let low = next.iter().cloned().fold(f64::INFINITY, f64::min);
        if low < -NEGATIVITY_TOL {
            return Err(Error::StepRejected(format!("density undershoot {low:e}")));
        }

        let u_new = RadialField::new(grid.clone(), next)?;
        let g_new = u_new.map(|x| self.coeffs.f(x.max(0.0)));
        let v_new = match &self.signal {
            None => solve_elliptic(&g_new)?.v,
            Some(stepper) => {
                let g_old = state.u.map(|x| self.coeffs.f(x.max(0.0)));
                let ps = ParabolicState {
                    v: state.v.clone(),
                    t: state.t,
                    tau: self.params.tau,
                };
                stepper.step(&ps, &g_old, &g_new, dt)?.v
            }
        };
        let mass = u_new.integral();
        Ok(KSState {
            u: u_new,
            v: v_new,
            t: state.t + dt,
            dt_last: dt,
            mass,
        })
    }
}

/// One step with freshly built operators; see [`KsStepper::step`].
pub fn step_ks(state: &KSState, coeffs: &CoefficientSet, params: &ModelParams, dt: f64) -> Result<KSState> {
    KsStepper::new(state.u.grid(), coeffs.clone(), *params, SchemeOptions::default())?.step(state, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedTEnd,
    BlowupDetected,
    DtUnderflow,
}

/// Step control, blow-up detection and snapshot schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunPolicy {
    pub dt_initial: f64,
    pub dt_max: f64,
    pub dt_floor: f64,
    /// Fraction of the positivity limit used per step.
    pub cfl: f64,
    /// `c` in `dt ≤ c / ‖u‖_∞^{max(q,1)}`.
    pub growth_cap: f64,
    pub sup_threshold: f64,
    /// Spacing of snapshots in time before blow-up is suspected.
    pub snapshot_interval: f64,
    /// Sup norm above which snapshots follow the growth of `‖u‖_∞`.
    pub suspicion_level: f64,
    /// Ratio of `‖u‖_∞` between consecutive late snapshots.
    pub snapshot_growth: f64,
    pub scheme: SchemeOptions,
}

impl Default for RunPolicy {
    fn default() -> Self {
        RunPolicy {
            dt_initial: 1e-4,
            dt_max: 1e-2,
            dt_floor: 1e-14,
            cfl: 0.4,
            growth_cap: 0.05,
            sup_threshold: 1e6,
            snapshot_interval: 0.1,
            suspicion_level: 1e3,
            snapshot_growth: 1.25,
            scheme: SchemeOptions::default(),
        }
    }
}

impl RunPolicy {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_initial", self.dt_initial),
            ("dt_max", self.dt_max),
            ("dt_floor", self.dt_floor),
            ("cfl", self.cfl),
            ("growth_cap", self.growth_cap),
            ("sup_threshold", self.sup_threshold),
            ("snapshot_interval", self.snapshot_interval),
            ("suspicion_level", self.suspicion_level),
        ];
        for (name, x) in positive {
            if !(x > 0.0) {
                return Err(Error::arg(name, format!("{name} must be positive, got {x}")));
            }
        }
        if !(self.snapshot_growth > 1.0) {
            return Err(Error::arg("snapshot_growth", "snapshot_growth must exceed 1"));
        }
        if self.cfl > 1.0 {
            return Err(Error::arg("cfl", "cfl must not exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    /// Step that produced this state (0 for the initial one).
    pub dt: f64,
    pub u: RadialField,
    pub v: RadialField,
}

/// Per accepted step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub dt: f64,
    pub sup_u: f64,
    pub min_u: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub series: Vec<SeriesPoint>,
    pub termination: Termination,
    pub initial_mass: f64,
    pub t_end: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }

    pub fn final_time(&self) -> f64 {
        self.last().t
    }

    /// Largest relative mass drift over the run.
    pub fn max_mass_drift(&self) -> f64 {
        self.series
            .iter()
            .map(|p| (p.mass - self.initial_mass).abs() / self.initial_mass.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Integrates to `t_end` with adaptive steps.
///
/// The step is the smallest of `dt_max`, the advective limit, the growth
/// cap, and 1.5× the previous step; rejected steps are halved.
pub fn run_until(state0: KSState, stepper: &KsStepper, t_end: f64, policy: &RunPolicy) -> Result<Trajectory> {
    policy.validate()?;
    if !(t_end >= state0.t) {
        return Err(Error::arg("t_end", "t_end must not precede the initial time"));
    }
    let initial_mass = state0.mass;
    let mut snapshots = vec![Snapshot {
        t: state0.t,
        dt: 0.0,
        u: state0.u.clone(),
        v: state0.v.clone(),
    }];
    let mut series = vec![SeriesPoint {
        t: state0.t,
        dt: 0.0,
        sup_u: state0.u.max_abs(),
        min_u: state0.u.min(),
        mass: state0.mass,
    }];
    let growth_power = stepper.params().q.max(1.0);
    let mut state = state0;
    let mut dt_prev = policy.dt_initial;
    let mut next_uniform = state.t + policy.snapshot_interval;
    let mut last_recorded_sup = state.u.max_abs();
    let (mut accepted, mut rejected) = (0, 0);

    let termination = loop {
        let remaining = t_end - state.t;
        if remaining <= 1e-12 * t_end.abs().max(1.0) {
            break Termination::ReachedTEnd;
        }
        let sup = state.u.max_abs();
        let mut dt = policy
            .dt_max
            .min(1.5 * dt_prev)
            .min(stepper.advective_limit(&state, policy.cfl))
            .min(policy.growth_cap / sup.max(1.0).powf(growth_power));
        if dt < policy.dt_floor {
            break Termination::DtUnderflow;
        }
        let dt_full = dt.min(remaining);
        dt = dt_full;
        let next = loop {
            match stepper.step(&state, dt) {
                Ok(s) => break Some(s),
                Err(Error::InvalidArgument { name, reason }) => return Err(Error::InvalidArgument { name, reason }),
                Err(_) => {
                    rejected += 1;
                    dt *= 0.5;
                    if dt < policy.dt_floor {
                        break None;
                    }
                }
            }
        };
        let Some(next) = next else {
            break Termination::DtUnderflow;
        };
        accepted += 1;
        // a step shortened only to land on t_end says nothing about stability
        if dt < dt_full || dt_full < remaining {
            dt_prev = dt;
        }
        state = next;
        let sup = state.u.max_abs();
        series.push(SeriesPoint {
            t: state.t,
            dt,
            sup_u: sup,
            min_u: state.u.min(),
            mass: state.mass,
        });
        let blowup = sup > policy.sup_threshold;
        let done = t_end - state.t <= 1e-12 * t_end.abs().max(1.0);
        let uniform_due = state.t >= next_uniform - 1e-12 * next_uniform.abs().max(1.0);
        let growth_due = sup > policy.suspicion_level && sup >= policy.snapshot_growth * last_recorded_sup;
        if blowup || done || uniform_due || growth_due {
            snapshots.push(Snapshot {
                t: state.t,
                dt,
                u: state.u.clone(),
                v: state.v.clone(),
            });
            last_recorded_sup = sup;
            while next_uniform <= state.t + 1e-12 * state.t.abs().max(1.0) {
                next_uniform += policy.snapshot_interval;
            }
        }
        if blowup {
            break Termination::BlowupDetected;
        }
    };
    Ok(Trajectory {
        snapshots,
        series,
        termination,
        initial_mass,
        t_end,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}
