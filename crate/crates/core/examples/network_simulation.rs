//! Two access points with their stations, simulated for one second.

use linkscope::netsim::{
    format_net_config, make_scenario, simulate_network, Scenario, ScenarioKnobs,
};

fn main() -> linkscope::Result<()> {
    let knobs = ScenarioKnobs {
        stas_per_ap: 2,
        ..ScenarioKnobs::default()
    };
    let cfg = make_scenario(Scenario::Infra2Ap, &knobs)?;
    print!("{}", format_net_config(&cfg)?);

    let sim = simulate_network(&cfg, 1.0, 42)?;
    let c = &sim.counters;
    println!(
        "frames {} responses {} deferrals {} collisions {}",
        c.frames, c.responses, c.deferrals, c.collisions
    );
    for r in 0..sim.trace.num_radios() {
        println!("radio {}: duty {:.4}", r + 1, sim.trace.duty_cycle(r)?);
    }
    println!("true links (1-based):");
    for (i, j) in sim.truth.links() {
        println!("  {} -> {}", i + 1, j + 1);
    }
    Ok(())
}
