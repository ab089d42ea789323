//! Run every detector on the same trace and score it against the truth.

use linkscope::harness::{run_methods, score_topology, Method, MethodParams};
use linkscope::netsim::{make_scenario, simulate_network, Scenario, ScenarioKnobs};

fn main() -> linkscope::Result<()> {
    let cfg = make_scenario(Scenario::Infra2Ap, &ScenarioKnobs::default())?;
    let sim = simulate_network(&cfg, 1.0, 9)?;
    let params = MethodParams::default();

    println!("{:<8} {:>9} {:>6}", "method", "detected", "extra");
    for (m, est) in Method::ALL
        .iter()
        .zip(run_methods(&Method::ALL, &sim.trace, &params))
    {
        let s = score_topology(&est?.links, &sim.truth)?;
        println!(
            "{:<8} {:>9.3} {:>6}",
            m.name(),
            s.detected_fraction,
            s.extra_links
        );
    }
    Ok(())
}
