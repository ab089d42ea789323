use linkscope::atelnet::{infer_topology, AtelnetParams};
use linkscope::harness::{parse_experiment_config, run_experiment, score_topology};
use linkscope::netsim::{
    format_net_config, make_scenario, parse_net_config, simulate_network, Scenario, ScenarioKnobs,
};
use linkscope::trace::{format_links, format_trace, parse_links, parse_trace};

#[test]
fn simulated_trace_survives_the_file_format() {
    let cfg = make_scenario(Scenario::Infra2Ap, &ScenarioKnobs::default()).unwrap();
    let sim = simulate_network(&cfg, 0.5, 21).unwrap();
    let back = parse_trace(&format_trace(&sim.trace)).unwrap();
    assert_eq!(back, sim.trace);
    assert_eq!(
        parse_links(&format_links(&sim.truth), 8).unwrap(),
        sim.truth
    );

    let params = AtelnetParams::default();
    assert_eq!(
        infer_topology(&back, &params).unwrap(),
        infer_topology(&sim.trace, &params).unwrap()
    );
}

#[test]
fn config_file_drives_the_same_simulation() {
    let knobs = ScenarioKnobs {
        stas_per_ap: 2,
        downlink: true,
        ..ScenarioKnobs::default()
    };
    let cfg = make_scenario(Scenario::Infra2Ap, &knobs).unwrap();
    let reparsed = parse_net_config(&format_net_config(&cfg).unwrap()).unwrap();
    assert_eq!(
        simulate_network(&reparsed, 0.3, 5).unwrap(),
        simulate_network(&cfg, 0.3, 5).unwrap()
    );
}

#[test]
fn downlink_traffic_is_still_recovered() {
    let knobs = ScenarioKnobs {
        downlink: true,
        ..ScenarioKnobs::default()
    };
    let cfg = make_scenario(Scenario::Infra2Ap, &knobs).unwrap();
    let sim = simulate_network(&cfg, 1.0, 8).unwrap();
    let est = infer_topology(&sim.trace, &AtelnetParams::default()).unwrap();
    let s = score_topology(&est.links, &sim.truth).unwrap();
    assert!(s.detected_fraction >= 0.8, "{s:?}");
    assert!(s.extra_links <= 2, "{s:?}");
}

#[test]
fn scripted_grid_routes_are_found_only_where_active() {
    let text = r#"
        scenario = "adhoc_grid"
        methods = ["atelnet"]
        trials = 2
        seed = 3
        [grid]
        durations_s = [1.0]
        [knobs]
        routes = [{ from = 25, to = 1 }]
    "#;
    let cfg = parse_experiment_config(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, dir.path()).unwrap();
    for t in &out.trials {
        let s = t.score.unwrap();
        assert_eq!(s.true_links, 8);
        assert!(s.detected_fraction >= 0.75, "{s:?}");
    }
}

#[test]
fn experiments_are_reproducible() {
    let text = "scenario = \"infra2ap\"\nmethods = [\"atelnet\", \"soft\"]\ntrials = 3\nseed = 11\n[grid]\ndurations_s = [0.3]\n";
    let cfg = parse_experiment_config(text).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_experiment(&cfg, a.path()).unwrap();
    let rb = run_experiment(&cfg, b.path()).unwrap();
    assert_eq!(ra.trials, rb.trials);
    assert_eq!(
        std::fs::read_to_string(a.path().join("trials.csv")).unwrap(),
        std::fs::read_to_string(b.path().join("trials.csv")).unwrap()
    );
}
