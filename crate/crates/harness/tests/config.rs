use ks_harness::config::{parse_config, ConfigIssue, ScenarioConfig, ScenarioKind};
use ks_harness::presets::{preset, preset_names, preset_text};
use ks_radial::families::SourceFamily;
use ks_radial::ks::InitialData;
use proptest::prelude::*;

const MINIMAL: &str = r#"
name = "minimal"
kind = "linear-elliptic"

[source]
family = "constant"
amplitude = 1.0
"#;

fn issues(text: &str) -> Vec<ConfigIssue> {
    parse_config(text).expect_err("config should be rejected").issues
}

#[test]
fn minimal_config_fills_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.kind, ScenarioKind::LinearElliptic);
    assert_eq!(cfg.model.n, 2);
    assert_eq!(cfg.grid.cells, 400);
    assert_eq!(cfg.grid.clustering, 50.0);
    assert_eq!(cfg.time.policy.sup_threshold, 1e6);
    let echo = cfg.to_toml();
    assert!(echo.contains("cells = 400"), "{echo}");
    assert!(echo.contains("sup_threshold"), "{echo}");
}

#[test]
fn p_below_one_is_named() {
    let text = format!("{MINIMAL}\n[checks.delta_v]\nq = [0.5]\n");
    let found = issues(&text);
    assert_eq!(found.len(), 1);
    assert!(found[0].to_string().contains("p must be ≥ 1"), "{found:?}");

    let text = r#"
name = "lp"
kind = "ks"
[initial]
kind = "constant"
value = 1.0
[checks.profile]
p_list = [1.0, 0.5]
"#;
    assert!(issues(text).iter().any(|i| i.to_string().contains("p must be ≥ 1")));
}

#[test]
fn unknown_key_reports_line() {
    let text = "name = \"x\"\nkind = \"ks\"\n\n[grid]\ncells = 100\nclustring = 5.0\n";
    match &issues(text)[..] {
        [ConfigIssue::UnknownKey { key, line }] => {
            assert_eq!(key, "clustring");
            assert_eq!(*line, Some(6));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_key_inside_tagged_section() {
    let text = format!("{MINIMAL}exponent = 1.0\n");
    assert!(matches!(&issues(&text)[..], [ConfigIssue::UnknownKey { key, .. }] if key == "exponent"));
}

#[test]
fn missing_sections_are_named() {
    let text = "name = \"x\"\nkind = \"ks\"\n";
    match &issues(text)[..] {
        [ConfigIssue::MissingSection { section, .. }] => assert_eq!(section, "initial"),
        other => panic!("{other:?}"),
    }
    let text = "name = \"x\"\nkind = \"semigroup\"\n";
    assert!(matches!(&issues(text)[..], [ConfigIssue::MissingSection { section, .. }] if section == "semigroup"));
    let text = "name = \"x\"\nkind = \"linear-parabolic\"\n[model]\ntau = 1.0\n";
    assert!(matches!(&issues(text)[..], [ConfigIssue::MissingSection { section, .. }] if section == "source"));
}

#[test]
fn missing_key_and_syntax_errors() {
    let text = "name = \"x\"\nkind = \"linear-elliptic\"\n[source]\nfamily = \"power\"\namplitude = 1.0\n";
    assert!(matches!(&issues(text)[..], [ConfigIssue::MissingKey { key, .. }] if key == "exponent"));
    let text = "name = \"x\"\nkind = \"ks\"\n[grid\ncells = 3\n";
    match &issues(text)[..] {
        [ConfigIssue::Syntax { line, .. }] => assert_eq!(*line, Some(3)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_range_violation_is_listed() {
    let text = r#"
name = "bad name!"
kind = "linear-parabolic"
[model]
tau = 0.0
[grid]
cells = 4
refine = 9
[source]
family = "constant"
amplitude = 1.0
[time]
t_end = -1.0
"#;
    let keys: Vec<String> = issues(text)
        .into_iter()
        .filter_map(|i| match i {
            ConfigIssue::OutOfRange { key, .. } => Some(key),
            _ => None,
        })
        .collect();
    for k in ["name", "model.tau", "grid.cells", "grid.refine", "time.t_end"] {
        assert!(keys.iter().any(|x| x == k), "{k} not in {keys:?}");
    }
}

#[test]
fn sweep_requires_gaussian_ks_base() {
    let text = r#"
name = "s"
kind = "ks"
[initial]
kind = "constant"
value = 1.0
[sweep]
m = [1.0]
q = [1.0]
mass_multiplier = []
"#;
    let found = issues(text);
    assert!(found
        .iter()
        .any(|i| matches!(i, ConfigIssue::MissingSection { section, .. } if section == "initial")));
    assert!(found
        .iter()
        .any(|i| matches!(i, ConfigIssue::OutOfRange { key, .. } if key == "sweep.mass_multiplier")));
}

#[test]
fn presets_parse_and_round_trip() {
    for name in preset_names() {
        for cfg in preset(name).unwrap() {
            let again = parse_config(&cfg.to_toml()).unwrap();
            assert_eq!(again, cfg, "{name}");
        }
    }
    assert!(preset_text("elliptic-suite").is_some());
    assert!(preset("no-such-preset").is_err());
}

fn source_strategy() -> impl Strategy<Value = Option<SourceFamily>> {
    prop_oneof![
        Just(None),
        (0.1f64..10.0).prop_map(|amplitude| Some(SourceFamily::Constant { amplitude })),
        (0.1f64..10.0, 0.0f64..1.9).prop_map(|(amplitude, exponent)| Some(SourceFamily::Power { amplitude, exponent })),
        (0.1f64..10.0, 0.05f64..0.5).prop_map(|(amplitude, width)| Some(SourceFamily::Gaussian { amplitude, width })),
    ]
}

fn config_strategy() -> impl Strategy<Value = ScenarioConfig> {
    (
        any::<u64>(),
        2usize..=3,
        0.5f64..3.0,
        0.5f64..3.0,
        16usize..2000,
        1usize..=4,
        1e-3f64..10.0,
        source_strategy(),
        prop::option::of((1.0f64..100.0, 0.01f64..0.5)),
        prop::collection::vec(1.0f64..10.0, 0..4),
    )
        .prop_map(|(seed, n, m, q, cells, refine, t_end, source, gauss, p_list)| {
            let mut cfg = preset("ks2d-supercritical").unwrap().remove(0);
            cfg.seed = seed;
            cfg.model.n = n;
            cfg.model.m = m;
            cfg.model.q = q;
            cfg.grid.cells = cells;
            cfg.grid.refine = refine;
            cfg.time.t_end = t_end;
            cfg.source = source;
            if let Some((mass, width)) = gauss {
                cfg.initial = Some(InitialData::Gaussian { mass, width });
            }
            if let Some(p) = cfg.checks.profile.as_mut() {
                p.p_list = p_list;
            }
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_configs_round_trip(cfg in config_strategy()) {
        let text = cfg.to_toml();
        let parsed = parse_config(&text).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(parsed.to_toml(), text);
    }
}
