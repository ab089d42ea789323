//! Special functions and distribution tails used by the detectors.
//!
//! Everything here is computed in-repo: regularized incomplete gamma and
//! beta functions, central and noncentral chi-square tails, the F
//! distribution, quantiles by bracketed root finding, and the first-order
//! Marcum Q function.
//!
//! Tail functions come in pairs (`*_cdf` / `*_sf`) so that small upper-tail
//! probabilities never go through `1 - cdf`.

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 200_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, reflection below 1/2).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn check_dof(d: u32) -> Result<()> {
    if d == 0 {
        return Err(domain("degrees of freedom must be at least 1"));
    }
    Ok(())
}

fn check_x(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(domain(format!("x must be non-negative, got {x}")));
    }
    Ok(())
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("{what} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// `exp(a ln x - x - ln Γ(a))`, the common prefix of the gamma tails.
fn gamma_prefix(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * gamma_prefix(a, x)
}

fn gamma_cont_frac(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    gamma_prefix(a, x) * h
}

/// Regularized lower and upper incomplete gamma `(P(a, x), Q(a, x))`.
fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    if x < a + 1.0 {
        let p = gamma_series(a, x);
        (p, 1.0 - p)
    } else {
        let q = gamma_cont_frac(a, x);
        (1.0 - q, q)
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn reg_gamma_lower(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(domain(format!("gamma shape must be positive, got {a}")));
    }
    check_x(x)?;
    Ok(gamma_pq(a, x).0)
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn reg_gamma_upper(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(domain(format!("gamma shape must be positive, got {a}")));
    }
    check_x(x)?;
    Ok(gamma_pq(a, x).1)
}

pub fn chi2_pdf(x: f64, d: u32) -> Result<f64> {
    check_dof(d)?;
    check_x(x)?;
    let k = f64::from(d) / 2.0;
    if x == 0.0 {
        return Ok(match d {
            1 => f64::INFINITY,
            2 => 0.5,
            _ => 0.0,
        });
    }
    Ok(((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp())
}

/// `P(χ²_d ≤ x)`.
pub fn chi2_cdf(x: f64, d: u32) -> Result<f64> {
    check_dof(d)?;
    check_x(x)?;
    Ok(gamma_pq(f64::from(d) / 2.0, x / 2.0).0)
}

/// `P(χ²_d > x)`.
pub fn chi2_sf(x: f64, d: u32) -> Result<f64> {
    check_dof(d)?;
    check_x(x)?;
    Ok(gamma_pq(f64::from(d) / 2.0, x / 2.0).1)
}

/// Quantile of `χ²_d`: the `x` with `chi2_cdf(x, d) = p`.
pub fn chi2_inv(p: f64, d: u32) -> Result<f64> {
    check_dof(d)?;
    check_prob(p, "probability")?;
    if p >= 1.0 {
        return Err(domain("chi-square quantile of probability 1 is infinite"));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return chi2_isf(1.0 - p, d);
    }
    let k = f64::from(d) / 2.0;
    Ok(invert_increasing(
        |x| gamma_pq(k, x / 2.0).0 - p,
        f64::from(d),
    ))
}

/// Inverse survival function of `χ²_d`: the `x` with `chi2_sf(x, d) = q`.
pub fn chi2_isf(q: f64, d: u32) -> Result<f64> {
    check_dof(d)?;
    check_prob(q, "tail probability")?;
    if q == 0.0 {
        return Err(domain(
            "chi-square upper quantile of probability 0 is infinite",
        ));
    }
    if q >= 1.0 {
        return Ok(0.0);
    }
    if q > 0.5 {
        return chi2_inv(1.0 - q, d);
    }
    let k = f64::from(d) / 2.0;
    Ok(invert_increasing(
        |x| q - gamma_pq(k, x / 2.0).1,
        f64::from(d),
    ))
}

/// Poisson(λ) mixture `Σ_k w_k F(d/2 + k, x/2)` over central tails.
///
/// Summation starts at the Poisson mode and walks outward; each side stops
/// once a geometric bound on the remaining weight, times the largest
/// remaining tail factor, falls below `1e-16` of the running sum.
fn noncentral_mixture(x: f64, d: u32, nc: f64, upper: bool) -> f64 {
    let lambda = nc / 2.0;
    let half = f64::from(d) / 2.0;
    let y = x / 2.0;
    let tail = |k: f64| {
        let (p, q) = gamma_pq(half + k, y);
        if upper {
            q
        } else {
            p
        }
    };
    let weight = |k: f64| (-lambda + k * lambda.ln() - ln_gamma(k + 1.0)).exp();

    let k0 = lambda.floor();
    let mut sum = 0.0;

    let mut k = k0;
    loop {
        let w = weight(k);
        let f = tail(k);
        sum += w * f;
        let r = lambda / (k + 2.0);
        let rest_weight = if r < 1.0 {
            w * lambda / (k + 1.0) / (1.0 - r)
        } else {
            f64::INFINITY
        };
        // upward, lower tails shrink and upper tails grow towards 1
        let rest = rest_weight * if upper { 1.0 } else { f };
        if rest <= 1e-16 * sum || (w == 0.0 && k > lambda) || k > k0 + 1e6 {
            break;
        }
        k += 1.0;
    }

    let mut k = k0 - 1.0;
    while k >= 0.0 {
        let w = weight(k);
        let f = tail(k);
        sum += w * f;
        let r = k / lambda;
        let rest_weight = if r < 1.0 {
            w * r / (1.0 - r)
        } else {
            f64::INFINITY
        };
        let rest = rest_weight * if upper { f } else { 1.0 };
        if rest <= 1e-16 * sum {
            break;
        }
        k -= 1.0;
    }
    sum.clamp(0.0, 1.0)
}

fn check_nc(nc: f64) -> Result<()> {
    if !(nc.is_finite() && nc >= 0.0) {
        return Err(domain(format!(
            "noncentrality must be finite and non-negative, got {nc}"
        )));
    }
    Ok(())
}

/// `P(χ'²_d(nc) ≤ x)`.
pub fn noncentral_chi2_cdf(x: f64, d: u32, nc: f64) -> Result<f64> {
    check_dof(d)?;
    check_x(x)?;
    check_nc(nc)?;
    if nc == 0.0 {
        return chi2_cdf(x, d);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(noncentral_mixture(x, d, nc, false))
}

/// `P(χ'²_d(nc) > x)`.
pub fn noncentral_chi2_sf(x: f64, d: u32, nc: f64) -> Result<f64> {
    check_dof(d)?;
    check_x(x)?;
    check_nc(nc)?;
    if nc == 0.0 {
        return chi2_sf(x, d);
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(noncentral_mixture(x, d, nc, true))
}

fn beta_cont_frac(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `(I_x(a, b), 1 - I_x(a, b))` with `y = 1 - x` passed in exactly.
fn beta_pair(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if y <= 0.0 {
        return (1.0, 0.0);
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        let i = front * beta_cont_frac(a, b, x) / a;
        (i, 1.0 - i)
    } else {
        let ic = front * beta_cont_frac(b, a, y) / b;
        (1.0 - ic, ic)
    }
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(domain(format!(
            "beta shapes must be positive, got ({a}, {b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(beta_pair(a, b, x, 1.0 - x).0)
}

fn f_pair(x: f64, d1: u32, d2: u32) -> (f64, f64) {
    let (d1, d2) = (f64::from(d1), f64::from(d2));
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let den = d1 * x + d2;
    beta_pair(d1 / 2.0, d2 / 2.0, d1 * x / den, d2 / den)
}

/// `P(F(d1, d2) ≤ x)`.
pub fn f_cdf(x: f64, d1: u32, d2: u32) -> Result<f64> {
    check_dof(d1)?;
    check_dof(d2)?;
    check_x(x)?;
    Ok(f_pair(x, d1, d2).0)
}

/// `P(F(d1, d2) > x)`.
pub fn f_sf(x: f64, d1: u32, d2: u32) -> Result<f64> {
    check_dof(d1)?;
    check_dof(d2)?;
    check_x(x)?;
    Ok(f_pair(x, d1, d2).1)
}

/// Quantile of `F(d1, d2)`.
pub fn f_inv(p: f64, d1: u32, d2: u32) -> Result<f64> {
    check_dof(d1)?;
    check_dof(d2)?;
    check_prob(p, "probability")?;
    if p >= 1.0 {
        return Err(domain("F quantile of probability 1 is infinite"));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return f_isf(1.0 - p, d1, d2);
    }
    Ok(invert_increasing(|x| f_pair(x, d1, d2).0 - p, 1.0))
}

/// Inverse survival function of `F(d1, d2)`.
pub fn f_isf(q: f64, d1: u32, d2: u32) -> Result<f64> {
    check_dof(d1)?;
    check_dof(d2)?;
    check_prob(q, "tail probability")?;
    if q == 0.0 {
        return Err(domain("F upper quantile of probability 0 is infinite"));
    }
    if q >= 1.0 {
        return Ok(0.0);
    }
    if q > 0.5 {
        return f_inv(1.0 - q, d1, d2);
    }
    Ok(invert_increasing(|x| q - f_pair(x, d1, d2).1, 1.0))
}

/// Root of an increasing function on `[0, ∞)` with `g(0) ≤ 0`.
///
/// Brackets geometrically around `guess`, then refines with the Illinois
/// variant of regula falsi until the bracket is a few ulps wide.
fn invert_increasing(g: impl Fn(f64) -> f64, guess: f64) -> f64 {
    let mut hi = guess.max(1e-3);
    let mut g_hi = g(hi);
    while g_hi < 0.0 {
        hi *= 2.0;
        g_hi = g(hi);
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 2.0;
    let mut g_lo = g(lo);
    while g_lo > 0.0 {
        hi = lo;
        g_hi = g_lo;
        lo /= 2.0;
        if lo < 1e-300 {
            return 0.0;
        }
        g_lo = g(lo);
    }
    if g_lo == 0.0 {
        return lo;
    }
    if g_hi == 0.0 {
        return hi;
    }

    let mut side = 0i8;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let mut next = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        x = next;
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx < 0.0 {
            lo = x;
            g_lo = gx;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            g_hi = gx;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    x
}

/// `e^{-z} I_k(z)` for `k = 0..=k_max` by Miller's backward recurrence,
/// normalized with `e^z = I_0(z) + 2 Σ_{k≥1} I_k(z)`.
pub fn bessel_i_scaled(z: f64, k_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; k_max + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = k_max + 50 + (12.0 * z.sqrt()) as usize;
    let mut above = 0.0;
    let mut cur = 1.0;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        if k <= k_max {
            out[k] = cur;
        }
        norm += 2.0 * cur;
        let below = above + 2.0 * k as f64 / z * cur;
        above = cur;
        cur = below;
        if cur > 1e250 {
            let s = 1e-250;
            cur *= s;
            above *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// First-order Marcum Q function `Q₁(a, b)`.
///
/// For `a < b` the series `e^{-(a-b)²/2} Σ_{k≥0} (a/b)^k e^{-ab} I_k(ab)`
/// is used directly; for `a ≥ b` the complementary series
/// `1 - e^{-(a-b)²/2} Σ_{k≥1} (b/a)^k e^{-ab} I_k(ab)` keeps the small side
/// of the split accurate. Bessel terms come from [`bessel_i_scaled`].
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && a >= 0.0 && b.is_finite() && b >= 0.0) {
        return Err(domain(format!(
            "Marcum Q needs finite non-negative arguments, got ({a}, {b})"
        )));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    if a == 0.0 {
        return Ok((-b * b / 2.0).exp());
    }
    let z = a * b;
    let ratio = a.min(b) / a.max(b);
    let spread = (9.0 * z.sqrt() + 40.0) as usize;
    let k_max = if ratio < 1.0 {
        spread.min((40.0 / -ratio.ln()) as usize + 10)
    } else {
        spread
    }
    .min(2_000_000);
    let bessel = bessel_i_scaled(z, k_max);
    let front = (-(a - b) * (a - b) / 2.0).exp();
    let first = if a < b { 0 } else { 1 };
    let mut sum = 0.0;
    let mut pow = if first == 0 { 1.0 } else { ratio };
    for &ik in &bessel[first..] {
        sum += pow * ik;
        pow *= ratio;
    }
    let q = if a < b {
        front * sum
    } else {
        1.0 - front * sum
    };
    Ok(q.clamp(0.0, 1.0))
}
