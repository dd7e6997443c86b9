//! Built-in scenarios, stored as the same TOML a user would write.

use crate::config::{parse_config, ScenarioConfig};
use crate::error::HarnessError;

const ELLIPTIC_SUITE: &str = r#"
name = "elliptic-suite"
kind = "linear-elliptic"
seed = 2024

[grid]
cells = 400
refine = 2

[checks.delta_v_suite]
cases = 50
dims = [2, 3]
q_values = [1.0, 2.0]
include_q_equal_n = true
"#;

const ELLIPTIC_GRADIENT_2D: &str = r#"
name = "elliptic-gradient-2d"
kind = "linear-elliptic"

[model]
n = 2

[grid]
cells = 400
refine = 2

[source]
family = "power"
amplitude = 1.0
exponent = 1.9

[checks.radial_gradient]
q = 1.0
"#;

const ELLIPTIC_GRADIENT_3D: &str = r#"
name = "elliptic-gradient-3d"
kind = "linear-elliptic"

[model]
n = 3

[grid]
cells = 400
refine = 2

[source]
family = "power"
amplitude = 1.0
exponent = 1.4

[checks.radial_gradient]
q = 2.0
"#;

// g = r^{-(n/q - 0.1)} with n = 2, q = 3/2; the control probe uses the
// near-critical r^{-(n/q - 0.01)}.
const PARABOLIC_GRADIENT: &str = r#"
name = "parabolic-gradient"
kind = "linear-parabolic"

[model]
n = 2
tau = 1.0

[grid]
cells = 400
refine = 2

[signal]
kind = "constant"
value = 0.0

[source]
family = "power"
amplitude = 1.0
exponent = 1.2333333333333334

[time]
t_end = 0.5
dt = 2e-3

[checks.w1p]
p = 2.0
q = 1.5
window = [0.0, 0.5]

[checks.gradient_envelope]
q_aux = 1.5

[[checks.gradient_envelope.probes]]
beta = 0.5333333333333333
expect = "bounded"

[[checks.gradient_envelope.probes]]
beta = 0.0333333333333333
expect = "growth_suspected"

[checks.gradient_envelope.probes.source]
family = "power"
amplitude = 1.0
exponent = 1.3233333333333333
"#;

const Z_EQUATION_3D: &str = r#"
name = "z-equation-3d"
kind = "linear-parabolic"

[model]
n = 3
tau = 1.0

[grid]
cells = 100
clustering = 10.0
refine = 2

[signal]
kind = "cosine"
mean = 1.0
amplitude = 0.5

[source]
family = "pulsed_gaussian"
amplitude = 2.0
width = 0.3
depth = 0.5
period = 0.25

[time]
t_end = 0.2
dt = 2e-3

[checks.z_residual]
beta = 2.5
q_aux = 1.0
"#;

const Z_EQUATION_2D: &str = r#"
name = "z-equation-2d"
kind = "linear-parabolic"

[model]
n = 2
tau = 1.0

[grid]
cells = 100
clustering = 10.0
refine = 2

[signal]
kind = "cosine"
mean = 1.0
amplitude = 0.5

[source]
family = "pulsed_gaussian"
amplitude = 2.0
width = 0.3
depth = 0.5
period = 0.25

[time]
t_end = 0.2
dt = 2e-3

[checks.z_residual]
beta = 1.2
q_aux = 1.5
"#;

// mass 12π = 1.5 · 8π
const KS2D_SUPERCRITICAL: &str = r#"
name = "ks2d-supercritical"
kind = "ks"

[model]
n = 2
m = 1.0
q = 1.0
s = 1.0
tau = 0.0
p_bound = 1.0

[grid]
cells = 400
refine = 2

[initial]
kind = "gaussian"
mass = 37.69911184307752
width = 0.1

[time]
t_end = 1.0

[checks]
expect_termination = "blowup_detected"

[checks.profile]
fit_range = [1.5, 2.5]
alphas = [
    { alpha = 2.3, expect = "bounded" },
    { alpha = 1.5, expect = "growth_suspected" },
]
lp_constant = [{ p = 1.0, tol = 1e-8 }]
lp_growth = [{ p = 3.0, factor = 10.0 }]
"#;

// mass 4π = 0.5 · 8π
const KS2D_SUBCRITICAL: &str = r#"
name = "ks2d-subcritical"
kind = "ks"

[model]
n = 2
m = 1.0
q = 1.0
s = 1.0
tau = 0.0

[grid]
cells = 400

[initial]
kind = "gaussian"
mass = 12.566370614359172
width = 0.1

[time]
t_end = 10.0

[checks]
expect_termination = "reached_t_end"
sup_growth_max = 10.0
"#;

const KS2D_MASS_SWEEP: &str = r#"
name = "ks2d-mass-sweep"
kind = "ks"

[model]
n = 2

[grid]
cells = 200

[initial]
kind = "gaussian"
mass = 25.132741228718345
width = 0.1

[time]
t_end = 2.0

[sweep]
m = [1.0]
q = [1.0]
mass_multiplier = [0.5, 1.5]
"#;

const SEMIGROUP_INTERVAL: &str = r#"
name = "semigroup-interval"
kind = "semigroup"
seed = 37

[semigroup]
domain = "interval"
length = 1.0
points = 2000
modes = 500

[checks.decay]
sigma = 1
mu = 0.0
lambda = 0.0
q = 2.0
p = inf
s = 0.51
t_min = 1e-4
t_max = 1e-2
times = 12
family = "noise"

[checks.linfty]
sigma = 1
t_max = 5.0
times = 101
family_size = 20
bound = 10.0
"#;

const PRESETS: &[(&str, &str)] = &[
    ("elliptic-suite", ELLIPTIC_SUITE),
    ("elliptic-gradient-2d", ELLIPTIC_GRADIENT_2D),
    ("elliptic-gradient-3d", ELLIPTIC_GRADIENT_3D),
    ("parabolic-gradient", PARABOLIC_GRADIENT),
    ("z-equation-3d", Z_EQUATION_3D),
    ("z-equation-2d", Z_EQUATION_2D),
    ("ks2d-supercritical", KS2D_SUPERCRITICAL),
    ("ks2d-subcritical", KS2D_SUBCRITICAL),
    ("ks2d-mass-sweep", KS2D_MASS_SWEEP),
    ("semigroup-interval", SEMIGROUP_INTERVAL),
];

const GROUPS: &[(&str, &[&str])] = &[
    ("elliptic-gradient", &["elliptic-gradient-2d", "elliptic-gradient-3d"]),
    ("z-equation", &["z-equation-3d", "z-equation-2d"]),
    ("ks2d", &["ks2d-supercritical", "ks2d-subcritical"]),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS
        .iter()
        .map(|(n, _)| *n)
        .chain(GROUPS.iter().map(|(n, _)| *n))
        .collect()
}

/// TOML text of a single preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Configs of a preset or preset group.
pub fn preset(name: &str) -> Result<Vec<ScenarioConfig>, HarnessError> {
    let members: Vec<&str> = match GROUPS.iter().find(|(n, _)| *n == name) {
        Some((_, m)) => m.to_vec(),
        None => vec![name],
    };
    members
        .into_iter()
        .map(|m| {
            let text =
                preset_text(m).ok_or_else(|| HarnessError::UnknownPreset(name.into(), preset_names().join(", ")))?;
            Ok(parse_config(text)?)
        })
        .collect()
}
