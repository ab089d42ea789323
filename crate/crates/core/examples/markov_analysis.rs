//! Closed-form analysis of a responding pair: chain parameters from
//! physical timing, the stationary distribution and the exact ATE.

use linkscope::markov::{self, McState, PhysicalTiming};

fn main() -> linkscope::Result<()> {
    let timing = PhysicalTiming {
        ts: 5e-6,
        frame_i: 1e-3,
        idle_i: 10e-3,
        frame_j: 1e-3,
        idle_j: 10e-3,
        resp_i: 50e-6,
        resp_j: 50e-6,
        p_ri: 0.0,
        p_rj: 1.0,
    };
    let p = markov::mc_from_physical(&timing)?;
    println!("{p:#?}");

    let closed = markov::steady_state_closed(&p)?;
    let numeric = markov::steady_state_numeric(&markov::transition_matrix(&p)?)?;
    let worst = McState::ALL
        .iter()
        .map(|&s| (closed.get(s) - numeric.get(s)).abs())
        .fold(0.0, f64::max);
    println!(
        "rho = {:.6}, max |closed - numeric| = {worst:.2e}",
        markov::rho(&p)
    );
    for s in [McState::ChInf, McState::I, McState::JResp, McState::J] {
        println!("  pi[{s:?}] = {:.6}", closed.get(s));
    }

    for tau in 1..=3 {
        let fwd = markov::ate_closed(&p, tau)?;
        let rev = markov::ate_closed(&p.swapped(), tau)?;
        println!("tau {tau}: A(i->j) = {fwd:.4e}  A(j->i) = {rev:.4e}");
    }
    Ok(())
}
