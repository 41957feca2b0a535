use proptest::prelude::*;
use tubeflow::artifacts::{fmt_num, mesh_text, Artifacts};
use tubeflow::config::{ExperimentConfig, Geometry};
use tubeflow::graph_file::{GraphFile, StenosisEntry};
use tubeflow::scenarios::{linear_fit, log_slope, profile_diff, Setup};
use tubeflow::{HarnessError, Scenario};
use tubeflow_core::tubegraph::{bifurcation, straight_channel};

const SCENARIOS: [Scenario; 5] =
    [Scenario::StraightChannel, Scenario::Bifurcation, Scenario::Convergence, Scenario::Cells, Scenario::Mapdd];

#[test]
fn scenario_defaults_validate_and_build() {
    for s in SCENARIOS {
        let cfg = ExperimentConfig::from_scenario(s);
        cfg.validate().unwrap();
        let spec = cfg.graph_spec().unwrap();
        assert!(!spec.edges.is_empty(), "{}", s.name());
        assert!(!cfg.kappas().is_empty());
    }
    let bif = ExperimentConfig::from_scenario(Scenario::Bifurcation);
    assert_eq!((bif.band(), bif.agree_from_kappa()), (0.03, 10.0));
    let ch = ExperimentConfig::from_scenario(Scenario::StraightChannel);
    assert_eq!((ch.band(), ch.agree_from_kappa()), (0.02, 0.1));
    // eight elements across the narrowest (θ = 0.7) arm
    let spec = bif.graph_spec().unwrap();
    assert!((bif.element_size(&spec) - 0.7 * 0.05 / 8.0).abs() < 1e-15);
}

#[test]
fn inflow_scales_with_epsilon() {
    let cfg = ExperimentConfig::from_scenario(Scenario::StraightChannel);
    let a = Setup::new(cfg.graph_spec_at(0.1).unwrap(), 0.1 / 8.0, 1.0).unwrap();
    let b = Setup::new(cfg.graph_spec_at(0.05).unwrap(), 0.05 / 8.0, 1.0).unwrap();
    assert!((a.flow.flux[0] - 2.0 * b.flow.flux[0]).abs() < 1e-15);
    // unit mean inlet speed
    assert!((b.flow.flux[0] - 0.05).abs() < 1e-15);
}

#[test]
fn invalid_numerics_are_rejected() {
    let base = ExperimentConfig::from_scenario(Scenario::StraightChannel);
    let cases: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = vec![
        Box::new(|c| c.physics.mu = 0.0),
        Box::new(|c| c.physics.beta = f64::NAN),
        Box::new(|c| c.physics.kappa = Some(vec![])),
        Box::new(|c| c.numerics.n_per_edge = 511),
        Box::new(|c| c.numerics.layers = 2),
        Box::new(|c| c.numerics.h = Some(-1.0)),
        Box::new(|c| c.numerics.mapdd_k = vec![0.0]),
        Box::new(|c| c.numerics.epsilons = vec![1.5]),
        Box::new(|c| c.geometry = Some(Geometry::File("/nonexistent/graph.json".into()))),
    ];
    for (i, edit) in cases.iter().enumerate() {
        let mut cfg = base.clone();
        edit(&mut cfg);
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))), "case {i}");
    }
}

#[test]
fn config_file_resolves_graph_paths_relative_to_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = straight_channel(0.05, 1.0, 1.0, 1.0, 0.5, 0.05);
    let graph = serde_json::to_string(&GraphFile::from_spec(&spec)).unwrap();
    std::fs::create_dir(tmp.path().join("sub")).unwrap();
    std::fs::write(tmp.path().join("sub/g.json"), graph).unwrap();
    let cfg_path = tmp.path().join("sub/c.json");
    std::fs::write(&cfg_path, r#"{"scenario": "straight_channel", "geometry": {"file": "g.json"}}"#).unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let loaded = cfg.graph_spec().unwrap();
    assert_eq!(GraphFile::from_spec(&loaded), GraphFile::from_spec(&spec));
    // ε override rescales the file's inflows
    let half = cfg.graph_spec_at(0.025).unwrap();
    assert_eq!(half.epsilon, 0.025);
}

#[test]
fn graph_file_rejects_inconsistent_ports() {
    let text = r#"{"epsilon": 0.05,
        "nodes": [{"id": 0, "x": 0, "y": 0, "kind": "entrance_exit", "q": 1.0},
                  {"id": 1, "x": 1, "y": 0, "kind": "dead"}],
        "edges": [{"id": 0, "from": 0, "to": 1, "theta": 1.0}]}"#;
    let g: GraphFile = serde_json::from_str(text).unwrap();
    assert!(g.to_spec().is_err());
    let extra = text.replace(r#""theta": 1.0"#, r#""theta": 1.0, "colour": 3"#);
    assert!(serde_json::from_str::<GraphFile>(&extra).is_err());
}

#[test]
fn mesh_text_lists_every_section() {
    let cfg = ExperimentConfig::from_scenario(Scenario::Bifurcation);
    let s = Setup::from_config(&cfg, cfg.graph_spec().unwrap()).unwrap();
    let text = mesh_text(&s.mesh);
    assert!(text.starts_with("tubeflow-mesh 1\n"));
    for section in ["vertices", "triangles", "boundary"] {
        assert!(text.lines().any(|l| l.starts_with(section)), "missing {section}");
    }
    assert!(text.contains("node:") && text.contains("edge:") && text.contains("port:"));
}

#[test]
fn csv_artifacts_are_hashed_and_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Artifacts::create(tmp.path()).unwrap();
    out.csv("a.csv", &["x", "y"], [vec![0.1, 2.0], vec![1.0 / 3.0, -4.5]]).unwrap();
    out.json("b.json", &serde_json::json!({"k": 1})).unwrap();
    let entries = out.entries();
    assert_eq!(entries.iter().map(|e| e.path.as_str()).collect::<Vec<_>>(), ["a.csv", "b.json"]);
    let text = std::fs::read_to_string(tmp.path().join("a.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows, [vec![0.1, 2.0], vec![1.0 / 3.0, -4.5]]);
    out.finish(&serde_json::json!({})).unwrap();
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn slope_needs_two_positive_points() {
    assert!(matches!(log_slope(&[0.1], &[1.0]), Err(HarnessError::SlopeUndefined(_))));
    assert!(matches!(log_slope(&[0.1, 0.2], &[1.0, 0.0]), Err(HarnessError::SlopeUndefined(_))));
}

fn stenosis() -> impl Strategy<Value = StenosisEntry> {
    (0.3..0.7f64, -1.0..1.0f64, -0.5..0.5f64, -0.5..0.5f64, 0.2..2.0f64)
        .prop_map(|(s, m_amp, k_amp, v_amp, radius)| StenosisEntry { s, m_amp, k_amp, v_amp, radius })
}

proptest! {
    #[test]
    fn numbers_survive_the_csv_format(v in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn power_laws_have_their_exponent_as_slope(p in -3.0..3.0f64, c in 0.01..100.0f64) {
        let x = [0.1f64, 0.05, 0.025, 0.0125];
        let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
        prop_assert!((log_slope(&x, &y).unwrap() - p).abs() < 1e-10);
    }

    #[test]
    fn exact_lines_fit_with_unit_r2(a in -5.0..5.0f64, b in -5.0..5.0f64) {
        let x: Vec<f64> = (0..7).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (fa, fb, r2) = linear_fit(&x, &y);
        prop_assert!((fa - a).abs() < 1e-10 && (fb - b).abs() < 1e-10);
        prop_assert!(r2 > 1.0 - 1e-12);
    }

    #[test]
    fn profile_difference_is_a_norm(d in proptest::collection::vec(-1.0..1.0f64, 11), k in 0.0..3.0f64) {
        let s: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let zero = vec![0.0; 11];
        let scaled: Vec<f64> = d.iter().map(|v| k * v).collect();
        let (m1, l1) = profile_diff(&s, &d, &zero);
        let (mk, lk) = profile_diff(&s, &scaled, &zero);
        prop_assert!((mk - k * m1).abs() < 1e-12 && (lk - k * l1).abs() < 1e-12);
        prop_assert!(l1 <= m1 + 1e-15);
    }

    #[test]
    fn graph_files_round_trip(eps in 0.02..0.1f64, half_angle in 20.0..70.0f64, arm in 0.7..1.0f64,
                              st in proptest::collection::vec(stenosis(), 0..2)) {
        let mut spec = bifurcation(eps, 1.0, 1.0, half_angle.to_radians(), [1.0, arm, arm], 1.0, 0.5, eps);
        spec.edges[0].stenoses = st.iter().map(StenosisEntry::marker).collect();
        let file = GraphFile::from_spec(&spec);
        let json = serde_json::to_string(&file).unwrap();
        let back: GraphFile = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(GraphFile::from_spec(&back.to_spec().unwrap()), file);
    }
}
