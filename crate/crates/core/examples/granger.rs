//! Lagged regression F test on a driven pair of series.

use linkscope::baselines::granger_f_statistic;
use linkscope::distributions::f_sf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> linkscope::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 5000;
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut y = vec![0.0; n];
    for t in 2..n {
        y[t] = 0.3 * y[t - 1] + 0.5 * x[t - 2] + 0.1 * (rng.random::<f64>() - 0.5);
    }

    for (name, a, b) in [("x -> y", &x, &y), ("y -> x", &y, &x)] {
        let t = granger_f_statistic(a, b, 3)?;
        println!(
            "{name}: F = {:.2} on ({}, {}), p = {:.3e}",
            t.g,
            t.dof1,
            t.dof2,
            f_sf(t.g, t.dof1, t.dof2)?
        );
    }
    Ok(())
}
