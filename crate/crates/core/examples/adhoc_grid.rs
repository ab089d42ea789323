//! Multi-hop flows on a 5x5 grid. Each route only holds links while it is
//! active, so the ground truth depends on the observation window.

use linkscope::netsim::{
    grid_route, make_scenario, simulate_network, truth_between, Route, Scenario, ScenarioKnobs,
};

fn main() -> linkscope::Result<()> {
    let knobs = ScenarioKnobs {
        routes: vec![
            Route {
                from: 25,
                to: 1,
                active_s: Some([0.0, 1.0]),
            },
            Route {
                from: 5,
                to: 21,
                active_s: Some([1.0, 2.0]),
            },
        ],
        ..ScenarioKnobs::default()
    };
    let hops: Vec<usize> = grid_route(5, 24, 0)?.iter().map(|r| r + 1).collect();
    println!("route 25 -> 1: {hops:?}");

    let cfg = make_scenario(Scenario::AdhocGrid, &knobs)?;
    let sim = simulate_network(&cfg, 2.0, 5)?;
    println!(
        "frames {}, responses {}",
        sim.counters.frames, sim.counters.responses
    );

    for (lo, hi) in [(0.0, 1.0), (1.0, 2.0), (0.0, 2.0)] {
        let truth = truth_between(&cfg, lo, hi)?;
        println!("[{lo}, {hi}) s: {} directed links", truth.count());
    }
    Ok(())
}
