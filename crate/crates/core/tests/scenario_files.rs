use std::path::PathBuf;

use dosewise_core::minimizer::{brute_force, evaluation_count, heuristic, schedule_grid_size};
use dosewise_core::report::run_optimization;
use dosewise_core::scenario::{load_scenario_file, ScenarioDoc, ScenarioError, SearchMode};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn small_driver_scenario_fixed_and_joint() {
    let loaded = load_scenario_file::<f64>(&fixture("scenario_small.json")).unwrap();
    assert_eq!(loaded.baseline.route1.route_id, "motorway");
    let fixed = run_optimization(&loaded, SearchMode::Fixed, 1, None).unwrap();
    let joint = run_optimization(&loaded, SearchMode::Joint, 1, None).unwrap();
    assert_eq!(fixed.result.evaluation_count, 31 * 21);
    assert_eq!(joint.result.evaluation_count, 31 * 21 * 9);
    assert!(joint.result.min_dose_ug <= fixed.result.min_dose_ug);
    assert_eq!(fixed.original, joint.original);
    assert!(fixed.summary.reduction_percent > 0.0);
}

#[test]
fn cyclist_fixed_routes_from_files() {
    let loaded = load_scenario_file::<f64>(&fixture("scenario_cyclist.json")).unwrap();
    let s = loaded.for_search(SearchMode::Fixed);
    let r = heuristic(&s, 8).unwrap();
    assert_eq!(r.evaluation_count, schedule_grid_size(s.omega_window, s.beta_window, 8));
    assert_eq!(r.argmin.route1.route_id, "bike-lane");
    let report = run_optimization(&loaded, SearchMode::Fixed, 8, None).unwrap();
    assert!(report.summary.minimized_daily_ug <= report.summary.original_daily_ug);
}

#[test]
fn graph_scenario_uses_k_shortest_alternatives() {
    let loaded = load_scenario_file::<f64>(&fixture("scenario_graph.json")).unwrap();
    let s = loaded.for_search(SearchMode::Joint).with_granularity(15);
    let n = evaluation_count(&s).unwrap();
    assert_eq!(n, schedule_grid_size(s.omega_window, s.beta_window, 15) * 9);
    let r = heuristic(&s, 15).unwrap();
    assert!(r.argmin.route1.route_id.starts_with("H>"));
    let t1 = brute_force(&loaded.for_search(SearchMode::Fixed)).unwrap();
    assert_eq!(t1.evaluation_count, 61 * 61);
}

#[test]
fn scenario_document_errors() {
    let text = std::fs::read_to_string(fixture("scenario_small.json")).unwrap();
    let mut doc: ScenarioDoc<f64> = ScenarioDoc::from_json(&text).unwrap();
    assert_eq!(ScenarioDoc::<f64>::from_json(&doc.to_json()).unwrap(), doc);
    assert!(matches!(ScenarioDoc::<f64>::from_json("{\"person\": 3}"), Err(ScenarioError::Parse { .. })));

    let dir = tempfile::tempdir().unwrap();
    for f in ["field_rush_hour.json", "catalog_rush_hour.json"] {
        std::fs::copy(fixture(f), dir.path().join(f)).unwrap();
    }
    let write = |doc: &ScenarioDoc<f64>| {
        let p = dir.path().join("s.json");
        std::fs::write(&p, doc.to_json()).unwrap();
        load_scenario_file::<f64>(&p)
    };
    assert!(write(&doc).is_ok());
    doc.granularity_minutes = 0;
    assert!(matches!(write(&doc), Err(ScenarioError::Invalid(_))));
    doc.granularity_minutes = 1;
    doc.omega_window.swap(0, 1);
    assert!(matches!(write(&doc), Err(ScenarioError::Invalid(_))));
    doc.omega_window.swap(0, 1);
    doc.baseline.route1 = Some("teleport".into());
    assert!(matches!(write(&doc), Err(ScenarioError::Invalid(_))));
    doc.baseline.route1 = None;
    doc.params = Some("nope.json".into());
    assert!(matches!(write(&doc), Err(ScenarioError::MissingAsset { .. })));
}
