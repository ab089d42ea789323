//! ATE profile of one ordered pair and the response time picked from it.

use linkscope::atelnet::{decide, estimate_response_time, AtelnetParams};
use linkscope::empirical::{joint_counts, profile_of, WindowKey};
use linkscope::netsim::{make_scenario, simulate_network, Scenario, ScenarioKnobs};

fn main() -> linkscope::Result<()> {
    let cfg = make_scenario(Scenario::Pair, &ScenarioKnobs::default())?;
    let sim = simulate_network(&cfg, 2.0, 3)?;
    let params = AtelnetParams::default();

    for (i, j) in [(0, 1), (1, 0)] {
        let pmf = joint_counts(&sim.trace, i, j, params.tau_max)?;
        let profile = profile_of(&pmf);
        let tau_hat = estimate_response_time(&profile, params.alpha)?;
        let d = decide(&pmf, sim.trace.num_samples(), i, j, &params)?;
        println!(
            "{} -> {}: tau_hat {tau_hat}, statistic {:.1} vs {:.1}, linked {}",
            i + 1,
            j + 1,
            d.statistic,
            d.threshold,
            d.decision
        );
        for (tau, a) in &profile {
            println!("  {tau:>2} {a:.4e}");
        }
        println!("  quiet windows: {}", pmf.count(WindowKey::QUIET, false));
    }
    Ok(())
}
