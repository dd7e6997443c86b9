//! Scenario dispatch: runs the solvers a config asks for and turns their
//! reports into checks and series tables.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ks_radial::estimates::{
    compute_exponents, holder_space, holder_time, verify_gradient_envelope, z_residual_series, ExponentBundle, Regime,
    Verdict, ZContext,
};
use ks_radial::families::{seeded_rng, SmoothProfile, SourceFamily};
use ks_radial::grid::{build_grid, lp_norm, radial_derivative, weighted_sup, RadialField, RadialGrid};
use ks_radial::ks::{
    check_hypothesis_bounds, log_samples, make_prototype_coefficients, run_until, KSState, KsStepper, ModelParams,
    Termination, Trajectory,
};
use ks_radial::linear::{
    check_delta_v_bound_with, check_radial_gradient_bound_with, integrate_parabolic, solve_elliptic, verify_w1p_bound,
    ParabolicState, ParabolicStepper,
};
use ks_radial::profile::{detect_blowup, envelope_verdict, reliable_snapshots, track_lp_norms, ProfileOptions};
use ks_radial::semigroup::{
    build_spectral, build_spectral_interval, fit_decay_exponent, linfty_ratio, log_time_grid, DecayProblem,
    SpectralOperator,
};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{DeltaVSuiteSpec, FamilyKind, ScenarioConfig, ScenarioKind, SignalData, SpectralDomainKind};
use crate::error::HarnessError;
use crate::record::{
    CheckOutcome, HolderReport, KsLevel, LevelBound, LevelGradient, LevelInfo, LinftyReport, Reports, RunOutput,
    RunRecord, SchemeInfo, SeriesTable, SuiteCase, SuiteReport, ZLevel, SCHEMA_VERSION,
};

type SolverResult<T> = ks_radial::Result<T>;

/// Relative change between the last two entries.
fn last_change(values: &[f64]) -> Option<f64> {
    let k = values.len();
    (k >= 2).then(|| {
        let (a, b) = (values[k - 2], values[k - 1]);
        if a == b {
            0.0
        } else {
            (b - a).abs() / a.abs().max(b.abs())
        }
    })
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn opt(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn fixed(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.8}")).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Default)]
struct Collector {
    reports: Reports,
    checks: Vec<CheckOutcome>,
    tables: Vec<SeriesTable>,
    levels: Vec<LevelInfo>,
    exponents: Option<ExponentBundle>,
    termination: Option<Termination>,
    blowup: Option<ks_radial::profile::BlowupEvent>,
}

impl Collector {
    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckOutcome::new(name, pass, detail));
    }

    fn info(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(CheckOutcome::info(name, detail));
    }

    /// Stability check of a per-level constant; informational on one level.
    fn stability(&mut self, name: &str, values: &[f64], tol: f64) -> Option<f64> {
        let change = last_change(values);
        match change {
            Some(c) => self.check(
                name,
                c < tol && values.iter().all(|v| v.is_finite()),
                format!("{}, change {c:.3} (tol {tol})", sci(values)),
            ),
            None => self.info(name, format!("{} on a single level", sci(values))),
        }
        change
    }
}

/// Runs a scenario in memory.
pub fn execute(config: &ScenarioConfig) -> Result<RunOutput, HarnessError> {
    let issues = config.validate();
    if !issues.is_empty() {
        return Err(crate::config::ConfigError { issues }.into());
    }
    let start = Instant::now();
    let mut c = Collector::default();
    match config.kind {
        ScenarioKind::LinearElliptic => run_elliptic(config, &mut c)?,
        ScenarioKind::LinearParabolic => run_parabolic(config, &mut c)?,
        ScenarioKind::Ks => run_ks(config, &mut c)?,
        ScenarioKind::Semigroup => run_semigroup(config, &mut c)?,
    }
    let time_scheme = matches!(config.kind, ScenarioKind::LinearParabolic | ScenarioKind::Ks)
        .then_some(config.time.policy.scheme.time_scheme);
    let series = c.tables.iter().map(SeriesTable::file_name).collect();
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.to_toml(),
        scheme: SchemeInfo {
            grid: "vertex-centred radial finite volumes, geometric clustering".into(),
            time_scheme,
            levels: c.levels,
        },
        exponents: c.exponents,
        termination: c.termination,
        blowup: c.blowup,
        reports: c.reports,
        checks: c.checks,
        series,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        record,
        tables: c.tables,
    })
}

/// Runs a scenario and persists it under `out_root/<name>`.
pub fn run_scenario(config: &ScenarioConfig, out_root: &Path) -> Result<RunRecord, HarnessError> {
    let out = execute(config)?;
    out.persist(&out_root.join(&config.name))?;
    Ok(out.record)
}

fn grids(config: &ScenarioConfig) -> SolverResult<Vec<Arc<RadialGrid>>> {
    let m = &config.model;
    config
        .grid
        .level_cells()
        .into_iter()
        .map(|cells| build_grid(m.n, m.radius, cells, config.grid.clustering))
        .collect()
}

fn level_info(config: &ScenarioConfig, fixed_dt: bool) -> Vec<LevelInfo> {
    config
        .grid
        .level_cells()
        .into_iter()
        .enumerate()
        .map(|(k, cells)| LevelInfo {
            cells,
            clustering: config.grid.clustering,
            dt: fixed_dt.then(|| config.time.dt / (1u64 << k) as f64),
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum CaseSource {
    Smooth(SmoothProfile, f64),
    Family(SourceFamily),
}

impl CaseSource {
    fn random(rng: &mut impl Rng, n: usize, q: f64) -> Self {
        let amplitude = 10f64.powf(rng.gen_range(-1.0..1.0));
        match rng.gen_range(0..3) {
            0 => CaseSource::Smooth(SmoothProfile::random(rng), amplitude),
            1 => CaseSource::Family(SourceFamily::Power {
                amplitude,
                exponent: rng.gen_range(0.0..0.9) * n as f64 / q,
            }),
            _ => CaseSource::Family(SourceFamily::Gaussian {
                amplitude,
                width: rng.gen_range(0.05..0.5),
            }),
        }
    }

    fn sample(&self, grid: &Arc<RadialGrid>) -> SolverResult<RadialField> {
        match self {
            CaseSource::Smooth(p, a) => Ok(p.sample(grid)?.scale(*a)),
            CaseSource::Family(f) => f.sample(grid, 0.0),
        }
    }

    fn label(&self) -> String {
        match self {
            CaseSource::Smooth(_, a) => format!("smooth x{a:.3}"),
            CaseSource::Family(SourceFamily::Power { amplitude, exponent }) => {
                format!("power a={amplitude:.3} e={exponent:.3}")
            }
            CaseSource::Family(SourceFamily::Gaussian { amplitude, width }) => {
                format!("gaussian a={amplitude:.3} w={width:.3}")
            }
            CaseSource::Family(f) => format!("{f:?}"),
        }
    }
}

fn suite_pairs(spec: &DeltaVSuiteSpec) -> Vec<(usize, f64)> {
    let mut pairs = Vec::new();
    for &n in &spec.dims {
        let mut qs = spec.q_values.clone();
        if spec.include_q_equal_n {
            qs.push(n as f64);
        }
        for q in qs {
            if !pairs.contains(&(n, q)) {
                pairs.push((n, q));
            }
        }
    }
    pairs
}

fn run_suite(config: &ScenarioConfig, spec: &DeltaVSuiteSpec, c: &mut Collector) -> SolverResult<()> {
    let pairs = suite_pairs(spec);
    let mut rng = seeded_rng(config.seed);
    let cases: Vec<(usize, f64, CaseSource)> = (0..spec.cases)
        .map(|i| {
            let (n, q) = pairs[i % pairs.len()];
            (n, q, CaseSource::random(&mut rng, n, q))
        })
        .collect();
    let level_cells = config.grid.level_cells();
    let results: Vec<SuiteCase> = cases
        .par_iter()
        .map(|(n, q, src)| {
            let mut slack = Vec::with_capacity(level_cells.len());
            let mut pass = true;
            for &cells in &level_cells {
                let grid = build_grid(*n, config.model.radius, cells, config.grid.clustering)?;
                let sol = solve_elliptic(&src.sample(&grid)?)?;
                let check = check_delta_v_bound_with(&sol, *q, spec.tol)?;
                slack.push(check.slack_factor());
                pass &= check.pass;
            }
            Ok(SuiteCase {
                n: *n,
                q: *q,
                source: src.label(),
                slack,
                pass,
            })
        })
        .collect::<SolverResult<_>>()?;

    let passed = results.iter().filter(|r| r.pass).count();
    let max_slack: Vec<f64> = (0..level_cells.len())
        .map(|k| results.iter().map(|r| r.slack[k]).fold(0.0, f64::max))
        .collect();
    c.check(
        "delta_v_suite.cases",
        passed == results.len(),
        format!("{passed}/{} cases within the bound (tol {})", results.len(), spec.tol),
    );
    // room left by the tightest case, rhs/lhs; refinement should move it toward 1
    let room: Vec<f64> = max_slack.iter().map(|s| 1.0 / s).collect();
    if room.len() >= 2 {
        let k = room.len();
        c.check(
            "delta_v_suite.refinement",
            (room[k - 1] - 1.0).abs() <= (room[k - 2] - 1.0).abs(),
            format!(
                "worst lhs/rhs per level {}, slack factor rhs/lhs {}",
                fixed(&max_slack),
                fixed(&room)
            ),
        );
    } else {
        c.info(
            "delta_v_suite.refinement",
            format!("worst lhs/rhs {} on a single level", fixed(&max_slack)),
        );
    }
    let mut table = SeriesTable::new("delta_v_suite", &["case", "n", "q"]);
    for cells in &level_cells {
        table.columns.push(format!("slack_N{cells}"));
    }
    for (i, r) in results.iter().enumerate() {
        let mut row = vec![i as f64, r.n as f64, r.q];
        row.extend(&r.slack);
        table.rows.push(row);
    }
    c.tables.push(table);
    c.reports.delta_v_suite = Some(SuiteReport {
        cases: results,
        passed,
        max_slack,
    });
    Ok(())
}

fn solve_levels(
    grids: &[Arc<RadialGrid>],
    source: &SourceFamily,
) -> SolverResult<Vec<ks_radial::linear::EllipticSolution>> {
    grids
        .par_iter()
        .map(|g| solve_elliptic(&source.sample(g, 0.0)?))
        .collect()
}

fn run_elliptic(config: &ScenarioConfig, c: &mut Collector) -> Result<(), HarnessError> {
    c.levels = level_info(config, false);
    if let Some(spec) = &config.checks.delta_v_suite {
        run_suite(config, spec, c)?;
    }
    let Some(source) = config.source else {
        return Ok(());
    };
    let grids = grids(config)?;
    let sols = solve_levels(&grids, &source)?;
    let checks = &config.checks;

    if let Some(spec) = &checks.delta_v {
        for sol in &sols {
            let cells = sol.v.grid().cells();
            for &q in &spec.q {
                let check = check_delta_v_bound_with(sol, q, spec.tol)?;
                c.check(
                    format!("delta_v[q={q},N={cells}]"),
                    check.pass,
                    format!(
                        "‖Δv‖_q = {:.6e}, 2‖g‖_q = {:.6e}, ratio {:.4}",
                        check.lhs,
                        check.rhs,
                        check.slack_factor()
                    ),
                );
                c.reports.delta_v.push(LevelBound { cells, q, check });
            }
        }
    }
    if let Some(spec) = &checks.radial_gradient {
        for sol in &sols {
            let cells = sol.v.grid().cells();
            let bound = match spec.bound {
                Some(m) => m,
                None => lp_norm(&sol.g, spec.q)?,
            };
            let check = check_radial_gradient_bound_with(sol, spec.q, bound, spec.tol)?;
            c.check(
                format!("radial_gradient[q={},N={cells}]", spec.q),
                check.pass,
                format!(
                    "max lhs/rhs {:.4} at r = {:.3e} (M = {bound:.6e}, tol {})",
                    check.max_violation_ratio, check.worst_r, check.tol
                ),
            );
            c.reports.radial_gradient.push(LevelGradient { cells, bound, check });
        }
    }
    if let Some(spec) = &checks.gradient_envelope {
        for probe in &spec.probes {
            let fields: Vec<[RadialField; 1]> = match probe.source {
                Some(s) if s != source => solve_levels(&grids, &s)?.into_iter().map(|s| [s.v]).collect(),
                _ => sols.iter().map(|s| [s.v.clone()]).collect(),
            };
            let refs: Vec<&[RadialField]> = fields.iter().map(|f| &f[..]).collect();
            let rep = verify_gradient_envelope(&refs, probe.beta, spec.q_aux)?;
            envelope_check(c, &rep, probe.expect);
            c.reports.gradient_envelope.push(rep);
        }
    }
    if let Some(spec) = &checks.holder_space {
        let per_level = sols
            .iter()
            .map(|s| holder_space(&s.v, spec.exponent))
            .collect::<SolverResult<Vec<_>>>()?;
        let mesh_change = c.stability("holder_space", &per_level, spec.tol);
        c.reports.holder_space = Some(HolderReport {
            exponent: spec.exponent,
            per_level,
            mesh_change,
        });
    }
    for sol in &sols {
        let grid = sol.v.grid();
        let vr = radial_derivative(&sol.v);
        let mut table = SeriesTable::new(format!("elliptic_N{}", grid.cells()), &["r", "g", "v", "v_r"]);
        for i in 0..grid.len() {
            table.rows.push(vec![
                grid.nodes()[i],
                sol.g.values()[i],
                sol.v.values()[i],
                vr.values()[i],
            ]);
        }
        c.tables.push(table);
    }
    Ok(())
}

fn envelope_check(c: &mut Collector, rep: &ks_radial::estimates::GradientEnvelopeReport, expect: Option<Verdict>) {
    let name = format!("gradient_envelope[beta={:.4}]", rep.beta);
    let detail = format!(
        "threshold {:.4}, C per level {}, change {}, ratio {}, verdict {:?}",
        rep.beta_threshold,
        sci(&rep.c_measured),
        opt(rep.mesh_stability),
        opt(rep.growth_ratio),
        rep.verdict
    );
    match expect {
        Some(v) => c.check(name, rep.verdict == v, format!("{detail}, expected {v:?}")),
        None => c.info(name, detail),
    }
}

fn initial_signal(config: &ScenarioConfig, grid: &Arc<RadialGrid>, source: &SourceFamily) -> SolverResult<RadialField> {
    let radius = grid.radius();
    match config.signal.unwrap_or(SignalData::Constant { value: 0.0 }) {
        SignalData::Constant { value } => RadialField::constant(grid, value),
        SignalData::Cosine { mean, amplitude } => {
            RadialField::from_fn(grid, |r| mean + amplitude * (std::f64::consts::PI * r / radius).cos())
        }
        SignalData::Steady => Ok(solve_elliptic(&source.sample(grid, 0.0)?)?.v),
    }
}

fn parabolic_levels(
    config: &ScenarioConfig,
    grids: &[Arc<RadialGrid>],
    source: &SourceFamily,
) -> SolverResult<Vec<Vec<ParabolicState>>> {
    grids
        .par_iter()
        .enumerate()
        .map(|(k, grid)| {
            let dt = config.time.dt / (1u64 << k) as f64;
            let stepper = ParabolicStepper::new(grid, config.time.policy.scheme.time_scheme);
            let v0 = initial_signal(config, grid, source)?;
            let state = ParabolicState::new(v0, config.model.tau)?;
            integrate_parabolic(&stepper, state, &|t| source.sample(grid, t), dt, config.time.t_end, 1)
        })
        .collect()
}

fn run_parabolic(config: &ScenarioConfig, c: &mut Collector) -> Result<(), HarnessError> {
    c.levels = level_info(config, true);
    let source = config.source.expect("validated");
    let grids = grids(config)?;
    let levels = parabolic_levels(config, &grids, &source)?;
    let checks = &config.checks;
    let n = config.model.n;

    if let Some(spec) = &checks.w1p {
        let refs: Vec<&[ParabolicState]> = levels.iter().map(|l| &l[..]).collect();
        let rep = verify_w1p_bound(&refs, spec.p, spec.q, (spec.window[0], spec.window[1]))?;
        c.stability("w1p", &rep.sup_per_level, spec.tol);
        c.reports.w1p = Some(rep);
    }
    let mut probe_columns = Vec::new();
    if let Some(spec) = &checks.gradient_envelope {
        for probe in &spec.probes {
            let other;
            let runs = match probe.source {
                Some(s) if s != source => {
                    other = parabolic_levels(config, &grids, &s)?;
                    &other
                }
                _ => &levels,
            };
            let fields: Vec<Vec<RadialField>> = runs.iter().map(|l| l.iter().map(|s| s.v.clone()).collect()).collect();
            let refs: Vec<&[RadialField]> = fields.iter().map(|f| &f[..]).collect();
            let rep = verify_gradient_envelope(&refs, probe.beta, spec.q_aux)?;
            envelope_check(c, &rep, probe.expect);
            if probe.source.is_none_or(|s| s == source) {
                probe_columns.push(probe.beta);
            }
            c.reports.gradient_envelope.push(rep);
        }
    }
    if let Some(spec) = &checks.z_residual {
        let regime = Regime::classify(n, spec.q_aux);
        let reps = levels
            .par_iter()
            .zip(&grids)
            .map(|(states, grid)| {
                let ctx = ZContext::new(grid, spec.beta, regime, spec.r_cut)?;
                let triples = states
                    .iter()
                    .map(|s| Ok((s.t, s.v.clone(), source.sample(grid, s.t)?)))
                    .collect::<SolverResult<Vec<_>>>()?;
                z_residual_series(&ctx, &triples, config.model.tau)
            })
            .collect::<SolverResult<Vec<_>>>()?;
        let residuals: Vec<f64> = reps.iter().map(|r| r.max_residual).collect();
        let k = residuals.len();
        if k >= 2 {
            let factor = residuals[k - 2] / residuals[k - 1];
            c.check(
                "z_residual.refinement",
                factor >= spec.min_factor,
                format!(
                    "{regime:?}: residual per level {}, factor {factor:.3} (need ≥ {})",
                    sci(&residuals),
                    spec.min_factor
                ),
            );
        } else {
            c.info(
                "z_residual.refinement",
                format!("{regime:?}: residual {} on a single level", sci(&residuals)),
            );
        }
        let bf = spec.boundary_factor;
        let worst = reps
            .iter()
            .map(|r| (r.max_z_r_origin / r.h_origin).max(r.max_z_r_boundary / r.h_boundary))
            .fold(0.0, f64::max);
        c.check(
            "z_residual.boundary",
            worst <= bf,
            format!("max |z_r| / spacing at r = 0 and r = R: {worst:.3} (need ≤ {bf})"),
        );
        c.reports.z_residual = reps
            .into_iter()
            .enumerate()
            .map(|(k, report)| ZLevel {
                cells: grids[k].cells(),
                dt: config.time.dt / (1u64 << k) as f64,
                report,
            })
            .collect();
    }
    if let Some(spec) = &checks.holder_space {
        let per_level = levels
            .iter()
            .map(|l| {
                l.iter()
                    .map(|s| holder_space(&s.v, spec.exponent))
                    .try_fold(0.0, |a, x| x.map(|x| f64::max(a, x)))
            })
            .collect::<SolverResult<Vec<_>>>()?;
        let mesh_change = c.stability("holder_space", &per_level, spec.tol);
        c.reports.holder_space = Some(HolderReport {
            exponent: spec.exponent,
            per_level,
            mesh_change,
        });
    }
    if let Some(spec) = &checks.holder_time {
        let per_level = levels
            .iter()
            .map(|l| {
                let times: Vec<f64> = l.iter().map(|s| s.t).collect();
                let center: Vec<f64> = l.iter().map(|s| s.v.at_origin()).collect();
                holder_time(&times, &center, spec.exponent)
            })
            .collect::<SolverResult<Vec<_>>>()?;
        let mesh_change = c.stability("holder_time", &per_level, spec.tol);
        c.reports.holder_time = Some(HolderReport {
            exponent: spec.exponent,
            per_level,
            mesh_change,
        });
    }
    for states in &levels {
        let cells = states[0].v.grid().cells();
        let mut table = SeriesTable::new(format!("parabolic_N{cells}"), &["t", "v_center", "v_sup"]);
        for beta in &probe_columns {
            table.columns.push(format!("grad_envelope_beta_{beta:.4}"));
        }
        for s in states {
            let mut row = vec![s.t, s.v.at_origin(), s.v.max_abs()];
            if !probe_columns.is_empty() {
                let vr = radial_derivative(&s.v);
                row.extend(probe_columns.iter().map(|&b| weighted_sup(&vr, b, 0.0)));
            }
            table.rows.push(row);
        }
        c.tables.push(table);
    }
    Ok(())
}

/// Runs the KS system on every refinement level, coarse to fine.
pub fn ks_trajectories(config: &ScenarioConfig, params: &ModelParams) -> SolverResult<Vec<Trajectory>> {
    let initial = config.initial.ok_or_else(|| ks_radial::Error::InvalidArgument {
        name: "initial",
        reason: "ks scenarios need initial data".into(),
    })?;
    let coeffs = make_prototype_coefficients(params);
    grids(config)?
        .par_iter()
        .map(|grid| {
            let state = KSState::initial(initial.sample(grid)?, &coeffs)?;
            let stepper = KsStepper::new(grid, coeffs.clone(), *params, config.time.policy.scheme)?;
            run_until(state, &stepper, config.time.t_end, &config.time.policy)
        })
        .collect()
}

fn ks_level_summary(traj: &Trajectory) -> KsLevel {
    let first = traj.series.first().copied();
    KsLevel {
        cells: traj.last().u.grid().cells(),
        termination: traj.termination,
        final_time: traj.final_time(),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        initial_sup: first.map(|p| p.sup_u).unwrap_or(f64::NAN),
        max_sup: traj.series.iter().map(|p| p.sup_u).fold(0.0, f64::max),
        min_u: traj.series.iter().map(|p| p.min_u).fold(f64::INFINITY, f64::min),
        max_mass_drift: traj.max_mass_drift(),
        snapshots: traj.snapshots.len(),
    }
}

fn run_ks(config: &ScenarioConfig, c: &mut Collector) -> Result<(), HarnessError> {
    c.levels = level_info(config, false);
    let params = config.model.params();
    let checks = &config.checks;
    let coeffs = make_prototype_coefficients(&params);
    let hyp = check_hypothesis_bounds(&coeffs, &params, &log_samples(1e-6, 1e6, 241))?;
    c.check(
        "hypothesis_bounds",
        hyp.pass,
        format!("{} samples, {} violations", hyp.samples, hyp.violations.len()),
    );
    c.reports.hypothesis = Some(hyp);

    let trajs = ks_trajectories(config, &params)?;
    let policy = &config.time.policy;
    for traj in &trajs {
        let summary = ks_level_summary(traj);
        let cells = summary.cells;
        let rate = checks.mass_drift_rate;
        let m0 = traj.initial_mass.abs().max(f64::MIN_POSITIVE);
        let worst = traj
            .series
            .iter()
            .map(|p| (p.mass - traj.initial_mass).abs() / m0 / (rate * p.t + 64.0 * f64::EPSILON))
            .fold(0.0, f64::max);
        c.check(
            format!("mass_conservation[N={cells}]"),
            worst <= 1.0,
            format!(
                "max drift {:.3e}, worst ratio to {rate:e}·t: {worst:.3e}",
                summary.max_mass_drift
            ),
        );
        c.check(
            format!("nonnegativity[N={cells}]"),
            summary.min_u >= -ks_radial::ks::NEGATIVITY_TOL,
            format!("min u = {:.3e}", summary.min_u),
        );
        if let Some(expect) = checks.expect_termination {
            c.check(
                format!("termination[N={cells}]"),
                traj.termination == expect,
                format!(
                    "{:?} at t = {:.6e}, expected {expect:?}",
                    traj.termination, summary.final_time
                ),
            );
        }
        if let Some(g) = checks.sup_growth_max {
            let ratio = summary.max_sup / summary.initial_sup;
            c.check(
                format!("sup_growth[N={cells}]"),
                ratio <= g,
                format!("sup ‖u‖_∞ / ‖u₀‖_∞ = {ratio:.4} (limit {g})"),
            );
        }
        let mut table = SeriesTable::new(format!("ks_N{cells}"), &["t", "dt", "sup_u", "min_u", "mass"]);
        for p in &traj.series {
            table.rows.push(vec![p.t, p.dt, p.sup_u, p.min_u, p.mass]);
        }
        c.tables.push(table);
        c.reports.ks_levels.push(summary);
    }

    let finest = trajs.last().expect("at least one level");
    c.termination = Some(finest.termination);
    c.blowup = detect_blowup(finest, policy.sup_threshold, policy.dt_floor)?;

    let Some(spec) = &checks.profile else {
        return Ok(());
    };
    let p_bound = config.model.p_bound;
    let exps = match compute_exponents(&params, p_bound) {
        Ok(e) => e,
        Err(e) => {
            c.info("exponents", e.to_string());
            return Ok(());
        }
    };
    c.exponents = Some(exps);
    let options = ProfileOptions {
        fit_window: spec.fit_window,
        sup_threshold: policy.sup_threshold,
        dt_floor: policy.dt_floor,
    };
    let snaps = reliable_snapshots(finest, &options)?;
    let data_bound = match config.model.data_bound {
        Some(m) => m,
        None => lp_norm(snaps[0], p_bound)? * (1.0 + 1e-8),
    };
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    for probe in &spec.alphas {
        let rep = envelope_verdict(&refs, probe.alpha, &exps, p_bound, data_bound, &spec.p_list, &options)?;
        let name = format!("envelope[alpha={}]", probe.alpha);
        let detail = format!(
            "C per level {}, change {}, ratio {}, class {:?}",
            sci(&rep.c_measured),
            opt(rep.c_mesh_change),
            opt(rep.c_growth_ratio),
            rep.class
        );
        match probe.expect {
            Some(Verdict::Bounded) => c.check(
                name,
                rep.c_mesh_change.is_some_and(|x| x < probe.tol),
                format!("{detail}, need change < {}", probe.tol),
            ),
            Some(Verdict::GrowthSuspected) => c.check(
                name,
                rep.c_growth_ratio
                    .is_some_and(|x| x >= ks_radial::estimates::GROWTH_FACTOR),
                format!("{detail}, need ratio ≥ {}", ks_radial::estimates::GROWTH_FACTOR),
            ),
            Some(Verdict::Inconclusive) => c.check(name, rep.c_verdict == Verdict::Inconclusive, detail),
            None => c.info(name, detail),
        }
        c.reports.profiles.push(rep);
    }
    if let Some([lo, hi]) = spec.fit_range {
        let radius = config.model.radius;
        let window = [spec.fit_window[0] * radius, spec.fit_window[1] * radius];
        match ks_radial::profile::fit_profile_exponent(snaps.last().expect("nonempty"), window) {
            Ok(fit) => c.check(
                "profile_fit",
                fit.alpha_hat >= lo && fit.alpha_hat <= hi,
                format!(
                    "alpha_hat = {:.4} ± {:.2e} on {} nodes, need [{lo}, {hi}]",
                    fit.alpha_hat, fit.stderr, fit.nodes
                ),
            ),
            Err(e) => c.check("profile_fit", false, e.to_string()),
        }
    }
    let mut ps = spec.p_list.clone();
    ps.extend(spec.lp_constant.iter().map(|x| x.p));
    ps.extend(spec.lp_growth.iter().map(|x| x.p));
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let lp = track_lp_norms(&snaps, &ps)?;
    let series = |p: f64| lp.iter().find(|s| s.p == p).expect("tracked");
    for x in &spec.lp_constant {
        let s = series(x.p);
        c.check(
            format!("lp_constant[p={}]", x.p),
            s.spread() <= x.tol,
            format!("relative spread {:.3e} (tol {:e})", s.spread(), x.tol),
        );
    }
    for x in &spec.lp_growth {
        let s = series(x.p);
        c.check(
            format!("lp_growth[p={}]", x.p),
            s.growth() >= x.factor,
            format!("sup / initial = {:.3} (need ≥ {})", s.growth(), x.factor),
        );
    }
    let cells = finest.last().u.grid().cells();
    let mut table = SeriesTable::new(format!("profile_N{cells}"), &["t"]);
    table.columns.extend(ps.iter().map(|p| format!("lp_{p}")));
    table.columns.push("sup_u".into());
    table
        .columns
        .extend(spec.alphas.iter().map(|a| format!("c_alpha_{}", a.alpha)));
    for (i, u) in snaps.iter().enumerate() {
        let mut row = vec![finest.snapshots[i].t];
        row.extend(lp.iter().map(|s| s.values[i]));
        row.push(u.max_abs());
        row.extend(spec.alphas.iter().map(|a| weighted_sup(u, a.alpha, 0.0)));
        table.rows.push(row);
    }
    c.tables.push(table);
    Ok(())
}

fn spectral_operator(config: &ScenarioConfig) -> SolverResult<(SpectralOperator, f64)> {
    let spec = config.semigroup.expect("validated");
    match spec.domain {
        SpectralDomainKind::Interval => Ok((
            build_spectral_interval(spec.length, spec.points, spec.modes)?,
            spec.length,
        )),
        SpectralDomainKind::Ball => {
            let m = &config.model;
            let grid = build_grid(m.n, m.radius, config.grid.cells, config.grid.clustering)?;
            Ok((build_spectral(&grid, spec.modes)?, m.radius))
        }
    }
}

fn smooth_family(op: &SpectralOperator, extent: f64, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let p = SmoothProfile::random(rng);
            op.points().iter().map(|&x| p.eval(x, extent)).collect()
        })
        .collect()
}

fn run_semigroup(config: &ScenarioConfig, c: &mut Collector) -> Result<(), HarnessError> {
    let (op, extent) = spectral_operator(config)?;
    if let Some(spec) = &config.semigroup {
        c.levels = vec![LevelInfo {
            cells: spec.points,
            clustering: if spec.domain == SpectralDomainKind::Ball {
                config.grid.clustering
            } else {
                1.0
            },
            dt: None,
        }];
    }
    if let Some(spec) = &config.checks.decay {
        let mut rng = seeded_rng(config.seed);
        let family = match spec.family {
            FamilyKind::Noise => (0..spec.family_size)
                .map(|_| (0..op.points().len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            FamilyKind::Smooth => smooth_family(&op, extent, spec.family_size, &mut rng),
        };
        let problem = DecayProblem {
            sigma: spec.sigma,
            mu: spec.mu,
            lambda: spec.lambda,
            q: spec.q,
            p: spec.p,
            s: spec.s,
        };
        let t_grid = log_time_grid(spec.t_min, spec.t_max, spec.times);
        let fit = fit_decay_exponent(&op, &family, problem, spec.normalization, &t_grid)?;
        c.check(
            "decay_slope",
            fit.relative_error <= spec.tol,
            format!(
                "slope {:.4} vs predicted {:.4}, relative error {:.3} (tol {})",
                fit.slope, fit.predicted, fit.relative_error, spec.tol
            ),
        );
        let mut table = SeriesTable::new("decay", &["t", "sup_norm"]);
        for (t, s) in fit.t_grid.iter().zip(&fit.sup_norms) {
            table.rows.push(vec![*t, *s]);
        }
        c.tables.push(table);
        c.reports.decay = Some(fit);
    }
    if let Some(spec) = &config.checks.linfty {
        let mut rng = seeded_rng(config.seed.wrapping_add(1));
        let family = smooth_family(&op, extent, spec.family_size, &mut rng);
        let times: Vec<f64> = (0..spec.times)
            .map(|i| spec.t_max * i as f64 / (spec.times.max(2) - 1) as f64)
            .collect();
        let ratios = family
            .iter()
            .map(|phi| linfty_ratio(&op, phi, spec.sigma, &times))
            .collect::<SolverResult<Vec<_>>>()?;
        let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
        c.check(
            "linfty_ratio",
            max_ratio.is_finite() && max_ratio <= spec.bound,
            format!(
                "max ratio {max_ratio:.4} over {} members (bound {})",
                ratios.len(),
                spec.bound
            ),
        );
        let mut table = SeriesTable::new("linfty", &["member", "ratio"]);
        for (i, r) in ratios.iter().enumerate() {
            table.rows.push(vec![i as f64, *r]);
        }
        c.tables.push(table);
        c.reports.linfty = Some(LinftyReport {
            sigma: spec.sigma,
            ratios,
            max_ratio,
            bound: spec.bound,
        });
    }
    Ok(())
}
