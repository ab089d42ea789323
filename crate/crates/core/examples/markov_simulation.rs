//! Simulate the pair chain and compare the empirical ATE with the exact
//! value.

use linkscope::empirical::ate_profile;
use linkscope::markov::{self, McParams};

fn main() -> linkscope::Result<()> {
    let p = McParams {
        p_i: 0.01,
        p_j: 0.01,
        p_di: 0.8,
        p_dj: 0.8,
        p_ri: 0.0,
        p_rj: 0.9,
        p_dri: 0.5,
        p_drj: 0.5,
    };
    let n = 2_000_000;
    let trace = markov::simulate_chain(&p, n, 11, 5e-6)?;
    println!(
        "duty cycles: {:.4} {:.4}",
        trace.duty_cycle(0)?,
        trace.duty_cycle(1)?
    );

    let profile = ate_profile(&trace, 0, 1, 3)?;
    println!("tau  empirical    exact");
    for (tau, a) in profile {
        println!("{tau:>3}  {a:.5e}  {:.5e}", markov::ate_closed(&p, tau)?);
    }
    Ok(())
}
