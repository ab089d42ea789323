//! Detection thresholds and the special functions behind them.

use linkscope::atelnet::{dof, threshold};
use linkscope::distributions::{chi2_sf, f_isf, marcum_q1, noncentral_chi2_sf};

fn main() -> linkscope::Result<()> {
    println!("tau  dof  threshold(p_fa=1e-3)");
    for tau in 1..=5 {
        println!("{tau:>3} {:>4} {:>10.4}", dof(tau)?, threshold(tau, 1e-3)?);
    }

    let t = threshold(3, 1e-3)?;
    println!("chi2_sf at the lag-3 threshold: {:.3e}", chi2_sf(t, 12)?);
    for nc in [0.0, 10.0, 30.0, 60.0] {
        println!(
            "power with noncentrality {nc:>4}: {:.4}",
            noncentral_chi2_sf(t, 12, nc)?
        );
    }

    // Two degrees of freedom reduce to Marcum's Q1.
    let (nc, x) = (9.0_f64, 16.0_f64);
    println!(
        "ncx2 sf {:.6} vs Q1 {:.6}",
        noncentral_chi2_sf(x, 2, nc)?,
        marcum_q1(nc.sqrt(), x.sqrt())?
    );

    println!(
        "F(3, 1000) critical value at 1e-3: {:.4}",
        f_isf(1e-3, 3, 1000)?
    );
    Ok(())
}
