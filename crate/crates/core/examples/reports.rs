//! Write decisions in the versioned CSV and JSON formats and read the
//! CSV back.

use linkscope::atelnet::{infer_topology, AtelnetParams};
use linkscope::netsim::{make_scenario, simulate_network, Scenario, ScenarioKnobs};
use linkscope::report::{decisions_csv, decisions_json, parse_decisions_csv};

fn main() -> linkscope::Result<()> {
    let cfg = make_scenario(Scenario::Pair, &ScenarioKnobs::default())?;
    let sim = simulate_network(&cfg, 0.5, 1)?;
    let params = AtelnetParams::default();
    let est = infer_topology(&sim.trace, &params)?;

    let csv = decisions_csv(&est, "atelnet");
    print!("{csv}");
    assert_eq!(parse_decisions_csv(&csv, Some(2))?, est.links);

    let json = decisions_json(&est, "atelnet", &params, &sim.trace)?;
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}
