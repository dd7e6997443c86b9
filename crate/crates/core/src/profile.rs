//! Blow-up detection, power-law fits of the density profile, and envelope
//! verdicts for `u ≤ C|x|^{-α}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{refinement_verdict, ExponentBundle, Verdict};
use crate::grid::{lp_norm, weighted_sup, RadialField};
use crate::ks::{Termination, Trajectory};
use crate::linear::relative_change;
use crate::semigroup::linear_fit;

pub const MIN_FIT_NODES: usize = 8;
/// Default fit window as fractions of `R`.
pub const DEFAULT_FIT_WINDOW: [f64; 2] = [1e-3, 1e-1];
/// Snapshots whose step exceeds this multiple of `dt_floor` count as
/// reliable.
pub const RELIABLE_DT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupTrigger {
    SupThreshold,
    DtUnderflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEvent {
    pub t_est: f64,
    pub trigger: BlowupTrigger,
    pub last_good_snapshot: usize,
}

/// Index of the last snapshot at or before `t` produced by a step above
/// `10·dt_floor` (the initial snapshot always qualifies).
pub fn last_reliable_snapshot(traj: &Trajectory, t: f64, dt_floor: f64) -> usize {
    traj.snapshots
        .iter()
        .enumerate()
        .filter(|(i, s)| s.t <= t && (*i == 0 || s.dt > RELIABLE_DT_FACTOR * dt_floor))
        .map(|(i, _)| i)
        .last()
        .unwrap_or(0)
}

/// First time `‖u‖_∞` exceeds `sup_threshold`, or the end of a run that
/// stopped on step underflow; `None` for runs that stayed below both.
pub fn detect_blowup(traj: &Trajectory, sup_threshold: f64, dt_floor: f64) -> Result<Option<BlowupEvent>> {
    if traj.series.is_empty() || traj.snapshots.is_empty() {
        return Err(Error::arg("trajectory", "trajectory is empty"));
    }
    let event = if let Some(p) = traj.series.iter().find(|p| p.sup_u > sup_threshold) {
        Some((p.t, BlowupTrigger::SupThreshold))
    } else if traj.termination == Termination::DtUnderflow || traj.series.iter().skip(1).any(|p| p.dt < dt_floor) {
        let t = traj.series.last().map(|p| p.t).unwrap_or(0.0);
        Some((t, BlowupTrigger::DtUnderflow))
    } else {
        None
    };
    Ok(event.map(|(t_est, trigger)| BlowupEvent {
        t_est,
        trigger,
        last_good_snapshot: last_reliable_snapshot(traj, t_est, dt_floor),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    pub alpha_hat: f64,
    pub stderr: f64,
    pub window: [f64; 2],
    pub nodes: usize,
}

/// Least-squares slope of `log u` against `log r` on the nodes inside
/// `window`, negated.
pub fn fit_profile_exponent(u: &RadialField, window: [f64; 2]) -> Result<ProfileFit> {
    let [lo, hi] = window;
    let grid = u.grid();
    if !(lo > 0.0 && hi > lo && hi < grid.radius()) {
        return Err(Error::arg(
            "window",
            format!("window must satisfy 0 < r_lo < r_hi < R, got {window:?}"),
        ));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (r, v) in grid.nodes().iter().zip(u.values()) {
        if *r >= lo && *r <= hi {
            if !(*v > 0.0) {
                return Err(Error::arg(
                    "u",
                    format!("u = {v:e} ≤ 0 at r = {r:e}; the fit window is too wide"),
                ));
            }
            x.push(r.ln());
            y.push(v.ln());
        }
    }
    if x.len() < MIN_FIT_NODES {
        return Err(Error::arg(
            "window",
            format!("fit needs at least {MIN_FIT_NODES} nodes, window holds {}", x.len()),
        ));
    }
    let (slope, _, stderr) = linear_fit(&x, &y);
    Ok(ProfileFit {
        alpha_hat: -slope,
        stderr,
        window,
        nodes: x.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSeries {
    pub p: f64,
    pub values: Vec<f64>,
    pub running_sup: Vec<f64>,
    pub sup: f64,
}

impl LpSeries {
    /// `sup / first value`.
    pub fn growth(&self) -> f64 {
        self.sup / self.values[0]
    }

    /// `(max - min) / max` over the series.
    pub fn spread(&self) -> f64 {
        let lo = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        (self.sup - lo) / self.sup
    }
}

/// `‖u(t)‖_p` at every snapshot, with running suprema.
pub fn track_lp_norms(snapshots: &[&RadialField], p_list: &[f64]) -> Result<Vec<LpSeries>> {
    if p_list.is_empty() {
        return Err(Error::arg("p_list", "need at least one exponent"));
    }
    if snapshots.is_empty() {
        return Err(Error::arg("snapshots", "need at least one snapshot"));
    }
    p_list
        .iter()
        .map(|&p| {
            let values = snapshots.iter().map(|u| lp_norm(u, p)).collect::<Result<Vec<_>>>()?;
            let mut running_sup = Vec::with_capacity(values.len());
            let mut acc = f64::NEG_INFINITY;
            for v in &values {
                acc = acc.max(*v);
                running_sup.push(acc);
            }
            Ok(LpSeries {
                p,
                sup: acc,
                values,
                running_sup,
            })
        })
        .collect()
}

/// Smallest `C` with `u ≤ C r^{-α}` on every snapshot.
pub fn envelope_constant(snapshots: &[&RadialField], alpha: f64) -> f64 {
    snapshots
        .iter()
        .map(|u| weighted_sup(u, alpha, 0.0))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeClass {
    /// Hypothesis holds, `α > ᾱ` and `C` is mesh-stable.
    Conditional,
    /// Hypothesis holds and `α > ᾱ`, but `C` is not mesh-stable.
    Unconfirmed,
    /// `α ≤ ᾱ` or the `L^𝕡` hypothesis fails.
    OutOfTheory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileOptions {
    /// Fit window as fractions of `R`.
    pub fit_window: [f64; 2],
    pub sup_threshold: f64,
    pub dt_floor: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            fit_window: DEFAULT_FIT_WINDOW,
            sup_threshold: 1e6,
            dt_floor: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub alpha: f64,
    pub alpha_lower: Option<f64>,
    pub blowup: Option<BlowupEvent>,
    /// Fit on the last reliable snapshot of the finest level; `None` when
    /// the window holds too few nodes or nonpositive values.
    pub fit: Option<ProfileFit>,
    pub fit_error: Option<String>,
    /// Envelope constant per refinement level (coarse to fine).
    pub c_measured: Vec<f64>,
    pub c_mesh_change: Option<f64>,
    pub c_growth_ratio: Option<f64>,
    pub c_verdict: Verdict,
    /// `L^p` series of the finest level.
    pub lp: Vec<LpSeries>,
    pub hypothesis_p: f64,
    pub hypothesis_sup: f64,
    pub hypothesis_bound: f64,
    pub hypothesis_satisfied: bool,
    pub class: EnvelopeClass,
}

/// Snapshots up to the last reliable one before blow-up (all of them for
/// runs without an event).
pub fn reliable_snapshots<'a>(traj: &'a Trajectory, options: &ProfileOptions) -> Result<Vec<&'a RadialField>> {
    let end = match detect_blowup(traj, options.sup_threshold, options.dt_floor)? {
        Some(ev) => ev.last_good_snapshot,
        None => traj.snapshots.len() - 1,
    };
    Ok(traj.snapshots[..=end].iter().map(|s| &s.u).collect())
}

/// Envelope analysis of one run on successively refined grids.
///
/// `p_list` is extended by `p₀` and `𝕡` when they are at least 1.
pub fn envelope_verdict(
    levels: &[&Trajectory],
    alpha: f64,
    exponents: &ExponentBundle,
    p_bound: f64,
    data_bound: f64,
    p_list: &[f64],
    options: &ProfileOptions,
) -> Result<ProfileReport> {
    if !(alpha > 0.0) {
        return Err(Error::arg("alpha", format!("α must be positive, got {alpha}")));
    }
    let Some(finest) = levels.last() else {
        return Err(Error::arg("levels", "need at least one trajectory"));
    };
    let c_measured = levels
        .iter()
        .map(|t| reliable_snapshots(t, options).map(|s| envelope_constant(&s, alpha)))
        .collect::<Result<Vec<_>>>()?;

    let blowup = detect_blowup(finest, options.sup_threshold, options.dt_floor)?;
    let snaps = reliable_snapshots(finest, options)?;
    let last = snaps.last().expect("at least the initial snapshot");
    let radius = last.grid().radius();
    let window = [options.fit_window[0] * radius, options.fit_window[1] * radius];
    let (fit, fit_error) = match fit_profile_exponent(last, window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut ps: Vec<f64> = p_list.to_vec();
    for extra in [exponents.p0, p_bound] {
        if extra >= 1.0 && !ps.iter().any(|p| (p - extra).abs() < 1e-12) {
            ps.push(extra);
        }
    }
    let lp = track_lp_norms(&snaps, &ps)?;
    let hypothesis_sup = lp
        .iter()
        .find(|s| (s.p - p_bound).abs() < 1e-12)
        .map(|s| s.sup)
        .unwrap_or(f64::NAN);
    let hypothesis_satisfied = hypothesis_sup <= data_bound;
    let c_verdict = refinement_verdict(&c_measured);
    let above = exponents.alpha_lower.is_some_and(|a| alpha > a);
    let class = if !hypothesis_satisfied || !above {
        EnvelopeClass::OutOfTheory
    } else if c_verdict == Verdict::Bounded {
        EnvelopeClass::Conditional
    } else {
        EnvelopeClass::Unconfirmed
    };
    let k = c_measured.len();
    Ok(ProfileReport {
        alpha,
        alpha_lower: exponents.alpha_lower,
        blowup,
        fit,
        fit_error,
        c_mesh_change: relative_change(&c_measured),
        c_growth_ratio: (k >= 2 && c_measured[k - 2] > 0.0).then(|| c_measured[k - 1] / c_measured[k - 2]),
        c_verdict,
        c_measured,
        lp,
        hypothesis_p: p_bound,
        hypothesis_sup,
        hypothesis_bound: data_bound,
        hypothesis_satisfied,
        class,
    })
}
