//! Scenario configuration: TOML schema, parsing and validation.

use std::f64::consts::PI;
use std::fmt;

use ks_radial::estimates::Verdict;
use ks_radial::families::SourceFamily;
use ks_radial::grid::MIN_CELLS;
use ks_radial::ks::{prototype_constants, InitialData, ModelParams, RunPolicy, Termination};
use ks_radial::semigroup::FamilyNormalization;
use serde::{Deserialize, Serialize};

/// Largest number of cells a sweep may expand to.
pub const MAX_SWEEP_CELLS: usize = 10_000;
pub const MAX_REFINE_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    LinearElliptic,
    LinearParabolic,
    Ks,
    Semigroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialData>,
    /// Starting signal for linear parabolic runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceFamily>,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semigroup: Option<SemigroupSpec>,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub n: usize,
    pub radius: f64,
    pub m: f64,
    pub q: f64,
    pub s: f64,
    pub tau: f64,
    /// Integrability `𝕡` of `u` assumed by the envelope estimate.
    pub p_bound: f64,
    /// Bound `M` on `sup_t ‖u‖_𝕡`; defaults to `‖u₀‖_𝕡` with a 1e-8 margin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_d1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_d2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_f: Option<f64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            n: 2,
            radius: 1.0,
            m: 1.0,
            q: 1.0,
            s: 1.0,
            tau: 0.0,
            p_bound: 1.0,
            data_bound: None,
            k_d1: None,
            k_d2: None,
            k_s: None,
            k_f: None,
        }
    }
}

impl ModelSpec {
    /// Model parameters with unset constants taken from the prototype.
    pub fn params(&self) -> ModelParams {
        let k = prototype_constants(self.m, self.q);
        ModelParams {
            n: self.n,
            radius: self.radius,
            m: self.m,
            q: self.q,
            s: self.s,
            tau: self.tau,
            k_d1: self.k_d1.unwrap_or(k.k_d1),
            k_d2: self.k_d2.unwrap_or(k.k_d2),
            k_s: self.k_s.unwrap_or(k.k_s),
            k_f: self.k_f.unwrap_or(k.k_f),
            data_bound: self.data_bound.unwrap_or(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Cells on the coarsest level.
    pub cells: usize,
    pub clustering: f64,
    /// Number of levels; each doubles the cells (and halves `dt` for
    /// fixed-step runs).
    pub refine: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            cells: 400,
            clustering: 50.0,
            refine: 1,
        }
    }
}

impl GridSpec {
    pub fn level_cells(&self) -> Vec<usize> {
        (0..self.refine).map(|k| self.cells << k).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub t_end: f64,
    /// Fixed step of linear parabolic runs on the coarsest level.
    pub dt: f64,
    /// Adaptive stepping and snapshot schedule of KS runs.
    pub policy: RunPolicy,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec {
            t_end: 1.0,
            dt: 1e-3,
            policy: RunPolicy::default(),
        }
    }
}

/// Starting signal `v₀` of a linear parabolic run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalData {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · cos(π r / R)`.
    Cosine {
        mean: f64,
        amplitude: f64,
    },
    /// Elliptic solution for the source at `t = 0`.
    Steady,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralDomainKind {
    Interval,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemigroupSpec {
    pub domain: SpectralDomainKind,
    /// Interval length; the ball uses the model radius and grid.
    pub length: f64,
    pub points: usize,
    pub modes: usize,
}

impl Default for SemigroupSpec {
    fn default() -> Self {
        SemigroupSpec {
            domain: SpectralDomainKind::Interval,
            length: 1.0,
            points: 2000,
            modes: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_v_suite: Option<DeltaVSuiteSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_v: Option<DeltaVSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial_gradient: Option<RadialGradientSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1p: Option<W1pSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_envelope: Option<GradientEnvelopeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_residual: Option<ZResidualSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_space: Option<HolderSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_time: Option<HolderSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linfty: Option<LinftySpec>,
    /// Allowed relative mass drift per unit time in KS runs.
    pub mass_drift_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect_termination: Option<Termination>,
    /// Largest allowed `sup_t ‖u‖_∞ / ‖u₀‖_∞`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_growth_max: Option<f64>,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        ChecksSpec {
            delta_v_suite: None,
            delta_v: None,
            radial_gradient: None,
            w1p: None,
            gradient_envelope: None,
            z_residual: None,
            holder_space: None,
            holder_time: None,
            profile: None,
            decay: None,
            linfty: None,
            mass_drift_rate: 1e-8,
            expect_termination: None,
            sup_growth_max: None,
        }
    }
}

/// Randomized sources over every `(n, q)` pair with `q ∈ q_values ∪ {n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeltaVSuiteSpec {
    pub cases: usize,
    pub dims: Vec<usize>,
    pub q_values: Vec<f64>,
    pub include_q_equal_n: bool,
    pub tol: f64,
}

impl Default for DeltaVSuiteSpec {
    fn default() -> Self {
        DeltaVSuiteSpec {
            cases: 50,
            dims: vec![2, 3],
            q_values: vec![1.0, 2.0],
            include_q_equal_n: true,
            tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaVSpec {
    pub q: Vec<f64>,
    #[serde(default = "default_delta_v_tol")]
    pub tol: f64,
}

fn default_delta_v_tol() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialGradientSpec {
    pub q: f64,
    /// `M ≥ ‖g‖_q`; defaults to the discrete norm of the source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default = "default_gradient_tol")]
    pub tol: f64,
}

fn default_gradient_tol() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W1pSpec {
    pub p: f64,
    pub q: f64,
    pub window: [f64; 2],
    #[serde(default = "default_stability")]
    pub tol: f64,
}

fn default_stability() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientEnvelopeSpec {
    pub q_aux: f64,
    pub probes: Vec<EnvelopeProbe>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeProbe {
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Verdict>,
    /// Source for this probe when it differs from the scenario source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceFamily>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZResidualSpec {
    pub beta: f64,
    pub q_aux: f64,
    #[serde(default = "default_r_cut")]
    pub r_cut: f64,
    /// Required residual decrease between the two finest levels.
    #[serde(default = "default_min_factor")]
    pub min_factor: f64,
    /// `|z_r|` at `0` and `R` must stay below this multiple of the local
    /// spacing.
    #[serde(default = "default_boundary_factor")]
    pub boundary_factor: f64,
}

fn default_r_cut() -> f64 {
    0.05
}

fn default_min_factor() -> f64 {
    1.8
}

fn default_boundary_factor() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSpec {
    pub exponent: f64,
    #[serde(default = "default_stability")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSpec {
    pub alphas: Vec<AlphaProbe>,
    pub p_list: Vec<f64>,
    /// Fit window as fractions of `R`.
    pub fit_window: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_range: Option<[f64; 2]>,
    /// `‖u‖_p` series that must stay constant within `tol` (relative).
    pub lp_constant: Vec<LpConstant>,
    /// `‖u‖_p` series that must grow by at least `factor`.
    pub lp_growth: Vec<LpGrowth>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec {
            alphas: Vec::new(),
            p_list: vec![1.0, 2.0, 3.0],
            fit_window: ks_radial::profile::DEFAULT_FIT_WINDOW,
            fit_range: None,
            lp_constant: Vec::new(),
            lp_growth: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaProbe {
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Verdict>,
    /// Largest allowed relative change of `C(α)` when `expect` is
    /// `bounded`.
    #[serde(default = "default_envelope_stability")]
    pub tol: f64,
}

fn default_envelope_stability() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpConstant {
    pub p: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpGrowth {
    pub p: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Uniform noise in `[-1, 1]` at every node.
    Noise,
    /// Random smooth profiles.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub sigma: u8,
    pub mu: f64,
    pub lambda: f64,
    pub q: f64,
    /// `inf` for the sup norm.
    pub p: f64,
    pub s: f64,
    pub t_min: f64,
    pub t_max: f64,
    #[serde(default = "default_times")]
    pub times: usize,
    #[serde(default = "default_family_size")]
    pub family_size: usize,
    #[serde(default = "default_family")]
    pub family: FamilyKind,
    #[serde(default = "default_normalization")]
    pub normalization: FamilyNormalization,
    #[serde(default = "default_decay_tol")]
    pub tol: f64,
}

fn default_times() -> usize {
    12
}

fn default_family_size() -> usize {
    20
}

fn default_family() -> FamilyKind {
    FamilyKind::Noise
}

fn default_normalization() -> FamilyNormalization {
    FamilyNormalization::Lq
}

fn default_decay_tol() -> f64 {
    0.15
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinftySpec {
    pub sigma: u8,
    pub t_max: f64,
    pub times: usize,
    pub family_size: usize,
    pub bound: f64,
}

impl Default for LinftySpec {
    fn default() -> Self {
        LinftySpec {
            sigma: 1,
            t_max: 5.0,
            times: 101,
            family_size: 20,
            bound: 10.0,
        }
    }
}

/// Parameter grid for `sweep`; cells are the product of the three lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub m: Vec<f64>,
    pub q: Vec<f64>,
    pub mass_multiplier: Vec<f64>,
    #[serde(default = "default_reference_mass")]
    pub reference_mass: f64,
}

fn default_reference_mass() -> f64 {
    8.0 * PI
}

impl SweepSpec {
    pub fn cell_count(&self) -> usize {
        self.m.len() * self.q.len() * self.mass_multiplier.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum ConfigIssue {
    UnknownKey { key: String, line: Option<usize> },
    MissingKey { key: String, line: Option<usize> },
    MissingSection { section: String, reason: String },
    OutOfRange { key: String, reason: String },
    Syntax { message: String, line: Option<usize> },
}

fn at_line(line: &Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigIssue::UnknownKey { key, line } => write!(f, "unknown key `{key}`{}", at_line(line)),
            ConfigIssue::MissingKey { key, line } => write!(f, "missing key `{key}`{}", at_line(line)),
            ConfigIssue::MissingSection { section, reason } => write!(f, "missing section [{section}]: {reason}"),
            ConfigIssue::OutOfRange { key, reason } => write!(f, "{key}: {reason}"),
            ConfigIssue::Syntax { message, line } => write!(f, "syntax error{}: {message}", at_line(line)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration")?;
        for issue in &self.issues {
            write!(f, "\n  - {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Text between the first pair of backticks in `msg`.
fn quoted(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

fn classify_toml_error(text: &str, err: &toml::de::Error) -> ConfigIssue {
    let line = err.span().map(|s| line_of(text, s.start));
    let msg = err.message().to_string();
    if msg.starts_with("unknown field") {
        ConfigIssue::UnknownKey {
            key: quoted(&msg).unwrap_or(msg),
            line,
        }
    } else if msg.starts_with("missing field") {
        ConfigIssue::MissingKey {
            key: quoted(&msg).unwrap_or(msg),
            line,
        }
    } else {
        ConfigIssue::Syntax { message: msg, line }
    }
}

/// Parses and validates a scenario; every problem found is reported.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError {
        issues: vec![classify_toml_error(text, &e)],
    })?;
    let issues = config.validate();
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError { issues })
    }
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut v = Validator::default();
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            v.range(
                "name",
                "must be nonempty and use only letters, digits, `-`, `_` and `.`",
            );
        }

        let model = &self.model;
        if let Err(e) = model.params().validate() {
            v.range("model", e.to_string());
        }
        if let Some(m) = model.data_bound {
            v.positive("model.data_bound", m);
        }
        v.p("model.p_bound", model.p_bound);

        let grid = &self.grid;
        if grid.cells < MIN_CELLS {
            v.range("grid.cells", format!("must be at least {MIN_CELLS}"));
        }
        if !(grid.clustering >= 1.0) {
            v.range("grid.clustering", "must be at least 1");
        }
        if grid.refine == 0 || grid.refine > MAX_REFINE_LEVELS {
            v.range("grid.refine", format!("must be in 1..={MAX_REFINE_LEVELS}"));
        }

        v.positive("time.t_end", self.time.t_end);
        v.positive("time.dt", self.time.dt);
        if let Err(e) = self.time.policy.validate() {
            v.range("time.policy", e.to_string());
        }

        match self.kind {
            ScenarioKind::LinearElliptic => {
                if self.source.is_none() && self.checks.delta_v_suite.is_none() {
                    v.missing("source", "linear-elliptic scenarios need a source or a delta_v_suite");
                }
            }
            ScenarioKind::LinearParabolic => {
                if self.source.is_none() {
                    v.missing("source", "linear-parabolic scenarios need a source");
                }
                v.positive("model.tau", model.tau);
            }
            ScenarioKind::Ks => {
                if self.initial.is_none() {
                    v.missing("initial", "ks scenarios need initial data");
                }
            }
            ScenarioKind::Semigroup => match &self.semigroup {
                None => v.missing("semigroup", "semigroup scenarios need a spectral domain"),
                Some(sg) => {
                    if sg.domain == SpectralDomainKind::Interval {
                        v.positive("semigroup.length", sg.length);
                    }
                    if sg.modes == 0 {
                        v.range("semigroup.modes", "must be positive");
                    }
                }
            },
        }

        self.validate_checks(&mut v);

        if let Some(sw) = &self.sweep {
            if self.kind != ScenarioKind::Ks {
                v.range("sweep", "sweeps run ks scenarios only");
            }
            if !matches!(self.initial, Some(InitialData::Gaussian { .. })) {
                v.missing("initial", "sweeps scale the mass of gaussian initial data");
            }
            for (key, list) in [
                ("sweep.m", &sw.m),
                ("sweep.q", &sw.q),
                ("sweep.mass_multiplier", &sw.mass_multiplier),
            ] {
                if list.is_empty() {
                    v.range(key, "must list at least one value");
                }
                for x in list {
                    v.positive(key, *x);
                }
            }
            v.positive("sweep.reference_mass", sw.reference_mass);
            if sw.cell_count() > MAX_SWEEP_CELLS {
                v.range(
                    "sweep",
                    format!("{} cells exceed the limit of {MAX_SWEEP_CELLS}", sw.cell_count()),
                );
            }
        }
        v.issues
    }

    fn validate_checks(&self, v: &mut Validator) {
        let c = &self.checks;
        let n = self.model.n as f64;
        v.positive("checks.mass_drift_rate", c.mass_drift_rate);
        if let Some(s) = &c.delta_v_suite {
            if s.cases == 0 {
                v.range("checks.delta_v_suite.cases", "must be positive");
            }
            if s.dims.is_empty() || s.dims.iter().any(|d| !(1..=3).contains(d)) {
                v.range("checks.delta_v_suite.dims", "dimensions must lie in 1..=3");
            }
            for q in &s.q_values {
                v.p("checks.delta_v_suite.q_values", *q);
            }
            v.positive("checks.delta_v_suite.tol", s.tol);
        }
        if let Some(d) = &c.delta_v {
            for q in &d.q {
                v.p("checks.delta_v.q", *q);
            }
            v.positive("checks.delta_v.tol", d.tol);
        }
        if let Some(g) = &c.radial_gradient {
            v.p("checks.radial_gradient.q", g.q);
            if g.q > n {
                v.range("checks.radial_gradient.q", "q must not exceed n");
            }
        }
        if let Some(w) = &c.w1p {
            v.p("checks.w1p.p", w.p);
            v.p("checks.w1p.q", w.q);
            if !(w.window[0] >= 0.0 && w.window[1] > w.window[0]) {
                v.range("checks.w1p.window", "window must be increasing and nonnegative");
            }
        }
        if let Some(g) = &c.gradient_envelope {
            v.p("checks.gradient_envelope.q_aux", g.q_aux);
            if g.probes.is_empty() {
                v.range("checks.gradient_envelope.probes", "need at least one probe");
            }
        }
        if let Some(z) = &c.z_residual {
            v.p("checks.z_residual.q_aux", z.q_aux);
            v.positive("checks.z_residual.beta", z.beta);
            if !(z.r_cut > 0.0 && z.r_cut < 0.5 * self.model.radius) {
                v.range("checks.z_residual.r_cut", "must lie in (0, R/2)");
            }
        }
        for (key, h) in [
            ("checks.holder_space", &c.holder_space),
            ("checks.holder_time", &c.holder_time),
        ] {
            if let Some(h) = h {
                if !(h.exponent > 0.0 && h.exponent <= 1.0) {
                    v.range(format!("{key}.exponent"), "must lie in (0, 1]");
                }
            }
        }
        if let Some(p) = &c.profile {
            for a in &p.alphas {
                v.positive("checks.profile.alphas.alpha", a.alpha);
            }
            for x in &p.p_list {
                v.p("checks.profile.p_list", *x);
            }
            for x in &p.lp_constant {
                v.p("checks.profile.lp_constant.p", x.p);
            }
            for x in &p.lp_growth {
                v.p("checks.profile.lp_growth.p", x.p);
            }
            let [lo, hi] = p.fit_window;
            if !(lo > 0.0 && hi > lo && hi < 1.0) {
                v.range(
                    "checks.profile.fit_window",
                    "must satisfy 0 < lo < hi < 1 (fractions of R)",
                );
            }
        }
        if let Some(d) = &c.decay {
            v.p("checks.decay.q", d.q);
            v.p("checks.decay.p", d.p);
            if d.sigma > 1 {
                v.range("checks.decay.sigma", "σ must be 0 or 1");
            }
            if !(d.t_min > 0.0 && d.t_max > d.t_min && d.t_max <= 0.5) {
                v.range("checks.decay", "need 0 < t_min < t_max ≤ 0.5");
            }
        }
        if let Some(l) = &c.linfty {
            if l.sigma > 1 {
                v.range("checks.linfty.sigma", "σ must be 0 or 1");
            }
            v.positive("checks.linfty.t_max", l.t_max);
        }
    }
}

#[derive(Default)]
struct Validator {
    issues: Vec<ConfigIssue>,
}

impl Validator {
    fn range(&mut self, key: impl Into<String>, reason: impl Into<String>) {
        self.issues.push(ConfigIssue::OutOfRange {
            key: key.into(),
            reason: reason.into(),
        });
    }

    fn missing(&mut self, section: &str, reason: &str) {
        self.issues.push(ConfigIssue::MissingSection {
            section: section.into(),
            reason: reason.into(),
        });
    }

    fn positive(&mut self, key: &str, x: f64) {
        if !(x > 0.0) {
            self.range(key, format!("must be positive, got {x}"));
        }
    }

    fn p(&mut self, key: &str, p: f64) {
        if !(p >= 1.0) {
            self.range(key, "p must be ≥ 1");
        }
    }
}
