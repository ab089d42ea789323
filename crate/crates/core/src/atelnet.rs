//! The ATELNeT link detector.
//!
//! For an ordered pair `i → j` the detector builds the ATE profile
//! `Â(1..=τ_max)`, picks the response time `τ̂` by scanning the profile
//! backwards for the sharp drop that sits just below the true lag, and
//! rejects the no-link hypothesis when `2(N − τ̂)Â(τ̂)` exceeds the χ²
//! quantile with `τ̂(τ̂ + 1)` degrees of freedom.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{chi2_isf, marcum_q1, noncentral_chi2_sf};
use crate::empirical::{joint_counts_from_events, profile_of, JointPmf, MAX_LAG};
use crate::error::{invalid, Result};
use crate::trace::{derive_events, ActivityTrace, EventKind, LinkMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtelnetParams {
    pub tau_max: usize,
    pub alpha: f64,
    pub p_fa: f64,
}

impl Default for AtelnetParams {
    fn default() -> Self {
        Self {
            tau_max: 10,
            alpha: 10.0,
            p_fa: 1e-3,
        }
    }
}

impl AtelnetParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LAG).contains(&self.tau_max) {
            return Err(invalid(format!(
                "tau_max must lie in 1..={MAX_LAG}, got {}",
                self.tau_max
            )));
        }
        if !(self.alpha > 1.0) {
            return Err(invalid(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        check_p_fa(self.p_fa)
    }
}

fn check_p_fa(p_fa: f64) -> Result<()> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(invalid(format!("p_fa must lie in (0, 1), got {p_fa}")));
    }
    Ok(())
}

/// Outcome of one directed test. Radio ids are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkDecision {
    pub i: usize,
    pub j: usize,
    /// On the scale of `threshold`; `2(N − τ̂)Â(τ̂)` for ATELNeT.
    pub statistic: f64,
    /// Lag used by the test.
    pub tau_hat: usize,
    pub dof: u32,
    pub threshold: f64,
    pub decision: bool,
    /// Per-sample effect size: `Â(τ̂)` in nats for ATELNeT,
    /// `ln(rss_null / rss_alt)` for the regression tests.
    pub effect: f64,
    /// Samples whose window held more than two events of one radio.
    pub overflow: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyEstimate {
    pub links: LinkMatrix,
    /// Off-diagonal decisions in row-major order.
    pub details: Vec<LinkDecision>,
}

impl TopologyEstimate {
    pub fn from_details(m: usize, details: Vec<LinkDecision>) -> Result<Self> {
        let mut links = LinkMatrix::new(m);
        for d in &details {
            links.set(d.i, d.j, d.decision)?;
        }
        Ok(Self { links, details })
    }

    pub fn detail(&self, i: usize, j: usize) -> Option<&LinkDecision> {
        self.details.iter().find(|d| d.i == i && d.j == j)
    }
}

pub fn dof(tau: usize) -> Result<u32> {
    if tau < 1 {
        return Err(invalid("lag must be at least 1"));
    }
    u32::try_from(tau * (tau + 1)).map_err(|_| invalid(format!("lag {tau} too large")))
}

/// `χ²` upper quantile at `p_fa` with `dof(tau)` degrees of freedom.
pub fn threshold(tau: usize, p_fa: f64) -> Result<f64> {
    check_p_fa(p_fa)?;
    chi2_isf(p_fa, dof(tau)?)
}

/// Backward scan of an ATE profile.
///
/// Starting from the longest lag, step down while `Â(τ−1)/Â(τ) > 1/α`;
/// the first sharp drop marks the response time. A zero denominator
/// counts as no drop when the numerator is also zero.
pub fn estimate_response_time(profile: &[(usize, f64)], alpha: f64) -> Result<usize> {
    if !(alpha > 1.0) {
        return Err(invalid(format!("alpha must exceed 1, got {alpha}")));
    }
    if profile.is_empty() {
        return Err(invalid("empty ATE profile"));
    }
    for (k, &(tau, a)) in profile.iter().enumerate() {
        if tau != k + 1 {
            return Err(invalid(format!(
                "profile must list lags 1, 2, … in order; found {tau} at position {k}"
            )));
        }
        if !(a >= 0.0) || !a.is_finite() {
            return Err(invalid(format!("ATE at lag {tau} is {a}")));
        }
    }
    let ate = |t: usize| profile[t - 1].1;
    let mut tau = profile.len();
    while tau > 1 {
        let (prev, cur) = (ate(tau - 1), ate(tau));
        let ratio = if cur > 0.0 {
            prev / cur
        } else if prev > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        if ratio > 1.0 / alpha {
            tau -= 1;
        } else {
            break;
        }
    }
    Ok(tau)
}

/// Decision from a lag-`τ_max` joint table over an `n`-sample trace.
pub fn decide(
    pmf: &JointPmf,
    n: u64,
    i: usize,
    j: usize,
    params: &AtelnetParams,
) -> Result<LinkDecision> {
    params.validate()?;
    let profile = profile_of(pmf);
    let tau_hat = estimate_response_time(&profile, params.alpha)?;
    let ate = profile[tau_hat - 1].1;
    let statistic = 2.0 * (n - tau_hat as u64) as f64 * ate;
    let threshold = threshold(tau_hat, params.p_fa)?;
    Ok(LinkDecision {
        i,
        j,
        statistic,
        tau_hat,
        dof: dof(tau_hat)?,
        threshold,
        decision: statistic > threshold,
        effect: ate,
        overflow: pmf.overflow_count(),
    })
}

struct Events {
    starts: Vec<u64>,
    ends: Vec<u64>,
}

fn events(trace: &ActivityTrace, radio: usize) -> Result<Events> {
    Ok(Events {
        starts: derive_events(trace, radio, EventKind::Start)?.samples,
        ends: derive_events(trace, radio, EventKind::End)?.samples,
    })
}

fn test_events(
    ei: &Events,
    ej: &Events,
    n: u64,
    i: usize,
    j: usize,
    params: &AtelnetParams,
) -> Result<LinkDecision> {
    let pmf = joint_counts_from_events(&ei.ends, &ej.ends, &ej.starts, n, params.tau_max)?;
    decide(&pmf, n, i, j, params)
}

/// Tests whether radio `j` responds to radio `i`.
pub fn test_link(
    trace: &ActivityTrace,
    i: usize,
    j: usize,
    params: &AtelnetParams,
) -> Result<LinkDecision> {
    params.validate()?;
    if i == j {
        return Err(invalid(format!(
            "radio pair must be distinct, got ({i}, {j})"
        )));
    }
    let n = trace.num_samples();
    test_events(&events(trace, i)?, &events(trace, j)?, n, i, j, params)
}

/// Tests every ordered pair in parallel.
pub fn infer_topology(trace: &ActivityTrace, params: &AtelnetParams) -> Result<TopologyEstimate> {
    params.validate()?;
    let m = trace.num_radios();
    if m < 2 {
        return Err(invalid(format!(
            "topology needs at least 2 radios, got {m}"
        )));
    }
    let ev: Vec<Events> = (0..m).map(|r| events(trace, r)).collect::<Result<_>>()?;
    let n = trace.num_samples();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let details = pairs
        .par_iter()
        .map(|&(i, j)| test_events(&ev[i], &ev[j], n, i, j, params))
        .collect::<Result<Vec<_>>>()?;
    TopologyEstimate::from_details(m, details)
}

/// Asymptotic power at true ATE `a_true`: the statistic is non-central χ²
/// with non-centrality `2(n − τ)a_true`.
pub fn detection_probability(a_true: f64, n: u64, tau: usize, p_fa: f64) -> Result<f64> {
    if !(a_true >= 0.0) {
        return Err(invalid(format!("ATE must be non-negative, got {a_true}")));
    }
    if n <= tau as u64 {
        return Err(invalid(format!("{n} samples do not exceed lag {tau}")));
    }
    let lambda = threshold(tau, p_fa)?;
    noncentral_chi2_sf(lambda, dof(tau)?, 2.0 * (n - tau as u64) as f64 * a_true)
}

/// Upper bound on the false-alarm rate when the non-linked pair carries a
/// residual lag-1 ATE `a_null_lag1`: `Q₁(√(2(n−1)A), √λ(1))`.
pub fn false_alarm_bound(a_null_lag1: f64, n: u64, p_fa: f64) -> Result<f64> {
    if !(a_null_lag1 >= 0.0) {
        return Err(invalid(format!(
            "ATE must be non-negative, got {a_null_lag1}"
        )));
    }
    if n < 2 {
        return Err(invalid("bound needs at least 2 samples"));
    }
    let a = (2.0 * (n - 1) as f64 * a_null_lag1).sqrt();
    marcum_q1(a, threshold(1, p_fa)?.sqrt())
}

/// The nominal `p_fa` at which [`false_alarm_bound`] reaches `target`.
///
/// The bound is increasing in `p_fa`; bisection runs on `ln p_fa` over
/// `(1e-300, 1)`. Errors when `target` is below the bound's infimum.
pub fn p_fa_for_bound(a_null_lag1: f64, n: u64, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid(format!("target must lie in (0, 1), got {target}")));
    }
    let f = |lp: f64| false_alarm_bound(a_null_lag1, n, lp.exp()).map(|b| b - target);
    let (mut lo, mut hi) = (-690.0f64, -1e-12f64);
    if f(lo)? > 0.0 {
        return Err(invalid(format!("bound exceeds {target} for every p_fa")));
    }
    if f(hi)? < 0.0 {
        return Err(invalid(format!(
            "bound stays below {target} for every p_fa"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
