//! Reference implementations used only by tests: adaptive Gauss–Kronrod
//! quadrature and the integrals that define each special function.

#![allow(dead_code)]

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for idx in 0..7 {
        let x = h * XGK[idx];
        let s = f(c - x) + f(c + x);
        k += WGK[idx] * s;
        if idx % 2 == 1 {
            g += WG[idx / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫_a^b f` to absolute tolerance `tol` by recursive bisection.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        tol: f64,
        whole: f64,
        err: f64,
        depth: u32,
    ) -> f64 {
        if err <= tol.max(1e-13 * whole.abs())
            || depth == 0
            || (b - a).abs() < 1e-15 * a.abs().max(1.0)
        {
            return whole;
        }
        let m = 0.5 * (a + b);
        let (l, el) = kronrod(f, a, m);
        let (r, er) = kronrod(f, m, b);
        rec(f, a, m, 0.5 * tol, l, el, depth - 1) + rec(f, m, b, 0.5 * tol, r, er, depth - 1)
    }
    let (whole, err) = kronrod(f, a, b);
    rec(f, a, b, tol, whole, err, 30)
}

/// `ln Γ(x)` for `x > 0`: upward recurrence, then the Stirling series.
pub fn ln_gamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 20.0 {
        shift += x.ln();
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    let series = (1.0 / 12.0
        - z * (1.0 / 360.0 - z * (1.0 / 1260.0 - z * (1.0 / 1680.0 - z * (1.0 / 1188.0)))))
        / x;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series - shift
}

/// `P(d/2, x/2)` as `(2/Γ(d/2)) ∫_0^{√(x/2)} u^{d-1} e^{-u²} du`.
pub fn chi2_cdf(x: f64, d: u32) -> f64 {
    let (lower, upper) = chi2_parts(x, d);
    lower / (lower + upper)
}

pub fn chi2_sf(x: f64, d: u32) -> f64 {
    let (lower, upper) = chi2_parts(x, d);
    upper / (lower + upper)
}

fn chi2_parts(x: f64, d: u32) -> (f64, f64) {
    let df = f64::from(d);
    let peak = ((df - 1.0) / 2.0).max(0.0).sqrt();
    // integrand scaled by its value at the mode to stay finite for large d
    let log_peak = if df > 1.0 {
        (df - 1.0) * peak.ln() - peak * peak
    } else {
        0.0
    };
    let f = move |u: f64| {
        if u <= 0.0 {
            return if d == 1 { (-log_peak).exp() } else { 0.0 };
        }
        ((df - 1.0) * u.ln() - u * u - log_peak).exp()
    };
    let cut = (x / 2.0).sqrt();
    let end = cut.max(peak) + 40.0;
    let lower = split_integrate(&f, 0.0, cut, peak);
    let upper = split_integrate(&f, cut, end, peak);
    (lower, upper)
}

fn split_integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, at: f64) -> f64 {
    if at > a && at < b {
        integrate(f, a, at, 1e-17) + integrate(f, at, b, 1e-17)
    } else {
        integrate(f, a, b, 1e-17)
    }
}

/// `e^{-z} I_ν(z)` for integer `ν` from `(1/π) ∫_0^π e^{z(cos θ - 1)} cos νθ dθ`.
pub fn bessel_i_scaled(nu: u32, z: f64) -> f64 {
    let n = f64::from(nu);
    integrate(
        &|t: f64| (z * (t.cos() - 1.0)).exp() * (n * t).cos(),
        0.0,
        PI,
        1e-16,
    ) / PI
}

/// `Q_1(a, b) = ∫_b^∞ x e^{-(x² + a²)/2} I_0(ax) dx`.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    let f = |x: f64| x * (-0.5 * (x - a) * (x - a)).exp() * bessel_i_scaled(0, a * x);
    let end = a.max(b) + 40.0;
    if b < a {
        // split at the bulk so the tail is integrated on its own
        integrate(&f, b, a, 1e-14) + integrate(&f, a, end, 1e-14)
    } else {
        integrate(&f, b, end, 1e-14)
    }
}

/// Noncentral χ² CDF for even `d` from its Bessel-form density.
pub fn noncentral_chi2_cdf_even(x: f64, d: u32, nc: f64) -> f64 {
    assert!(d.is_multiple_of(2) && nc > 0.0);
    let nu = d / 2 - 1;
    let pdf = |t: f64| {
        if t <= 0.0 {
            return if d == 2 { 0.5 * (-nc / 2.0).exp() } else { 0.0 };
        }
        let z = (nc * t).sqrt();
        let log = -0.5 * (t + nc) + (f64::from(d) / 4.0 - 0.5) * (t / nc).ln() + z;
        0.5 * log.exp() * bessel_i_scaled(nu, z)
    };
    integrate(&pdf, 0.0, x, 1e-13)
}

/// Regularized incomplete beta `I_x(a, b)` by quadrature with `t = s²`,
/// using the reflection for `x > 1/2` so the endpoint at 1 is never touched.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x > 0.5 {
        return 1.0 - inc_beta(b, a, 1.0 - x);
    }
    let ln_b = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let f = |s: f64| {
        if s <= 0.0 {
            return if a == 0.5 { 2.0 * (-ln_b).exp() } else { 0.0 };
        }
        2.0 * ((2.0 * a - 1.0) * s.ln() + (b - 1.0) * (1.0 - s * s).ln() - ln_b).exp()
    };
    integrate(&f, 0.0, x.sqrt(), 1e-16)
}

pub fn f_cdf(x: f64, d1: u32, d2: u32) -> f64 {
    let (a, b) = (f64::from(d1), f64::from(d2));
    inc_beta(a / 2.0, b / 2.0, a * x / (a * x + b))
}

/// Fraction of `(Z₁ + √nc)² + Σ_{k≥2} Z_k²` draws at or below each `x`.
pub fn noncentral_chi2_monte_carlo(
    xs: &[f64],
    d: u32,
    nc: f64,
    draws: usize,
    seed: u64,
) -> Vec<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use rayon::prelude::*;

    let chunks = 64;
    let per = draws / chunks;
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let mut hits = vec![0u64; xs.len()];
            for _ in 0..per {
                let z: f64 = StandardNormal.sample(&mut rng);
                let mut v = (z + nc.sqrt()).powi(2);
                for _ in 1..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v += z * z;
                }
                for (h, &x) in hits.iter_mut().zip(xs) {
                    *h += u64::from(v <= x);
                }
            }
            hits
        })
        .collect();
    let total = (per * chunks) as f64;
    (0..xs.len())
        .map(|k| counts.iter().map(|c| c[k]).sum::<u64>() as f64 / total)
        .collect()
}

/// Deterministic pseudo-random points in `[0, 1)` for sweeps.
pub fn unit_points(n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// One named check of the special-function suite.
pub struct Check {
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.worst <= self.tol
    }
}

/// The full special-function comparison against the oracles above.
/// `worst` is the largest error seen, on the scale of `tol`.
pub fn special_function_checks() -> Vec<Check> {
    use linkscope::distributions as d;

    let mut out = Vec::new();

    let u = unit_points(600, 1);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let dof = 1 + (u[2 * k] * 200.0) as u32;
        let x = 10f64
            .powf(-3.0 + 6.0 * u[2 * k + 1])
            .min(3.0 * f64::from(dof) + 100.0);
        worst = worst.max((d::chi2_cdf(x, dof).unwrap() - chi2_cdf(x, dof)).abs());
    }
    out.push(Check {
        name: "chi2_cdf absolute error",
        worst,
        tol: 1e-12,
    });

    let mut worst = 0.0f64;
    for k in 0..200 {
        let dof = 1 + (u[2 * k] * 200.0) as u32;
        let p = 1e-4 + (1.0 - 2e-4) * u[2 * k + 1];
        let x = d::chi2_inv(p, dof).unwrap();
        // first-order relative error in x implied by the oracle CDF
        let dens = d::chi2_pdf(x, dof).unwrap();
        let err = if p < 0.5 {
            chi2_cdf(x, dof) - p
        } else {
            (1.0 - p) - chi2_sf(x, dof)
        };
        worst = worst.max(err.abs() / (dens * x));
    }
    out.push(Check {
        name: "chi2_inv relative error",
        worst,
        tol: 1e-10,
    });

    let mut worst = 0.0f64;
    let v = unit_points(400, 2);
    for k in 0..200 {
        let dof = 1 + (v[2 * k] * 200.0) as u32;
        let x = 10f64.powf(-6.0 + 9.0 * v[2 * k + 1]);
        let p = d::chi2_cdf(x, dof).unwrap();
        let q = d::chi2_sf(x, dof).unwrap();
        if p < 1e-290 || q < 1e-290 {
            continue;
        }
        let back = if p <= 0.5 {
            d::chi2_inv(p, dof).unwrap()
        } else {
            d::chi2_isf(q, dof).unwrap()
        };
        worst = worst.max(((back - x) / x).abs());
    }
    out.push(Check {
        name: "chi2_inv round trip relative error",
        worst,
        tol: 1e-9,
    });

    let t = linkscope::atelnet::threshold(3, 1e-3).unwrap();
    out.push(Check {
        name: "threshold(3, 1e-3) tail mass vs oracle",
        worst: (chi2_sf(t, 12) - 1e-3).abs() / 1e-3,
        tol: 1e-10,
    });

    let mut worst = 0.0f64;
    let w = unit_points(150, 3);
    for k in 0..50 {
        let a = 12.0 * w[3 * k];
        let b = 12.0 * w[3 * k + 1];
        worst = worst.max((d::marcum_q1(a, b).unwrap() - marcum_q1(a, b)).abs());
    }
    out.push(Check {
        name: "marcum_q1 vs integral",
        worst,
        tol: 1e-9,
    });

    let mut worst = 0.0f64;
    for &(x, dof, nc) in &[
        (3.0, 2, 1.5),
        (10.0, 4, 6.0),
        (25.0, 12, 10.0),
        (80.0, 20, 50.0),
        (5.0, 6, 0.3),
    ] {
        worst = worst.max(
            (d::noncentral_chi2_cdf(x, dof, nc).unwrap() - noncentral_chi2_cdf_even(x, dof, nc))
                .abs(),
        );
    }
    out.push(Check {
        name: "noncentral chi2 vs Bessel-density integral",
        worst,
        tol: 1e-9,
    });

    // worst deviation in binomial standard errors
    let mut worst = 0.0f64;
    for (k, &(dof, nc)) in [(1u32, 4.0), (3, 10.0), (12, 25.0)].iter().enumerate() {
        let mean = f64::from(dof) + nc;
        let sd = (2.0 * (f64::from(dof) + 2.0 * nc)).sqrt();
        let xs = [mean - sd, mean, mean + 1.5 * sd];
        let draws = 10_000_000;
        let mc = noncentral_chi2_monte_carlo(&xs, dof, nc, draws, 100 + k as u64);
        for (&x, &f) in xs.iter().zip(&mc) {
            let p = d::noncentral_chi2_cdf(x, dof, nc).unwrap();
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            worst = worst.max((f - p).abs() / sigma);
        }
    }
    out.push(Check {
        name: "noncentral chi2 vs Monte Carlo (sigma)",
        worst,
        tol: 3.0,
    });

    let mut worst = 0.0f64;
    let z = unit_points(300, 4);
    for k in 0..100 {
        let d1 = 1 + (z[3 * k] * 39.0) as u32;
        let d2 = 1 + (z[3 * k + 1] * 499.0) as u32;
        let p = 1e-4 + (1.0 - 2e-4) * z[3 * k + 2];
        let x = d::f_inv(p, d1, d2).unwrap();
        worst = worst.max((f_cdf(x, d1, d2) - p).abs());
    }
    out.push(Check {
        name: "f_inv round trip through oracle F CDF",
        worst,
        tol: 1e-8,
    });

    out
}
