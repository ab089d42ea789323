//! How long to listen: detection probability against trace length, and
//! the false-alarm guarantee for a non-responding pair.

use linkscope::atelnet::{detection_probability, false_alarm_bound, p_fa_for_bound};
use linkscope::markov::{ate_closed, McParams};

fn main() -> linkscope::Result<()> {
    let p = McParams {
        p_i: 5e-4,
        p_j: 5e-4,
        p_di: 0.995,
        p_dj: 0.995,
        p_ri: 0.0,
        p_rj: 1.0,
        p_dri: 0.9,
        p_drj: 0.9,
    };
    let a3 = ate_closed(&p, 3)?;
    let a_null = ate_closed(&p.swapped(), 1)?;
    println!("A(3) linked = {a3:.4e}, A(1) reverse = {a_null:.4e}");

    println!("samples   P_D(p_fa=1e-3)  false-alarm bound");
    for n in [10_000u64, 30_000, 100_000, 300_000, 1_000_000] {
        println!(
            "{n:>8}   {:>14.4}  {:>17.4e}",
            detection_probability(a3, n, 3, 1e-3)?,
            false_alarm_bound(a_null, n, 1e-3)?
        );
    }
    let n = 200_000;
    let target = false_alarm_bound(a_null, n, 1e-2)?;
    println!(
        "p_fa giving bound {target:.4e} at N = {n}: {:.4e}",
        p_fa_for_bound(a_null, n, target)?
    );
    Ok(())
}
