//! Lagged event windows, their joint counts and the plug-in asymmetric
//! transfer entropy `Â(τ) = Î(S_j ; E_i^(τ) | E_j^(τ))`.
//!
//! A window at time `t` records, for each side, which of the `τ` previous
//! samples `t-1 .. t-τ` held an end event. Because radios idle between
//! frames, a window normally holds at most one event per side; when it
//! holds more the first two positions are kept so that the window can
//! still be truncated exactly, and every multi-event window collapses into
//! a single overflow symbol when the estimate is formed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trace::{derive_events, ActivityTrace, EventKind};

/// Largest supported lag.
pub const MAX_LAG: usize = 4096;

/// End events of one radio inside a window, by lag (`t - position`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventPos {
    Quiet,
    At(u16),
    /// Two or more events; the two most recent lags, nearest first.
    Multi(u16, u16),
}

impl EventPos {
    fn from_recent(first: Option<u64>, second: Option<u64>) -> Self {
        match (first, second) {
            (None, _) => Self::Quiet,
            (Some(p), None) => Self::At(p as u16),
            (Some(p), Some(q)) => Self::Multi(p as u16, q as u16),
        }
    }

    /// The same window seen with a shorter lag.
    pub fn truncate(self, tau: usize) -> Self {
        let keep = |p: u16| usize::from(p) <= tau;
        match self {
            Self::Quiet => Self::Quiet,
            Self::At(p) if keep(p) => self,
            Self::At(_) => Self::Quiet,
            Self::Multi(p, q) if keep(q) => Self::Multi(p, q),
            Self::Multi(p, _) if keep(p) => Self::At(p),
            Self::Multi(..) => Self::Quiet,
        }
    }

    pub fn is_overflow(self) -> bool {
        matches!(self, Self::Multi(..))
    }

    fn symbol(self) -> Symbol {
        match self {
            Self::Quiet => Symbol::Quiet,
            Self::At(p) => Symbol::At(p),
            Self::Multi(..) => Symbol::Overflow,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Symbol {
    Quiet,
    At(u16),
    Overflow,
}

/// Joint event pattern of the causer `i` and the responder `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WindowKey {
    pub i: EventPos,
    pub j: EventPos,
}

impl WindowKey {
    pub const QUIET: Self = Self {
        i: EventPos::Quiet,
        j: EventPos::Quiet,
    };

    pub fn new(i: EventPos, j: EventPos) -> Self {
        Self { i, j }
    }

    pub fn truncate(self, tau: usize) -> Self {
        Self::new(self.i.truncate(tau), self.j.truncate(tau))
    }

    pub fn is_overflow(self) -> bool {
        self.i.is_overflow() || self.j.is_overflow()
    }
}

/// Counts of `(window, S_j[t])` over `t ∈ [τ, N)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointPmf {
    tau: usize,
    total: u64,
    counts: BTreeMap<(WindowKey, bool), u64>,
}

impl JointPmf {
    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Number of windows counted.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<(WindowKey, bool), u64> {
        &self.counts
    }

    pub fn count(&self, key: WindowKey, s: bool) -> u64 {
        self.counts.get(&(key, s)).copied().unwrap_or(0)
    }

    pub fn probability(&self, key: WindowKey, s: bool) -> f64 {
        self.count(key, s) as f64 / self.total.max(1) as f64
    }

    /// Windows holding two or more end events of one radio.
    pub fn overflow_count(&self) -> u64 {
        self.counts
            .iter()
            .filter(|((k, _), _)| k.is_overflow())
            .map(|(_, &c)| c)
            .sum()
    }
}

fn check_lag(tau: usize) -> Result<()> {
    if tau == 0 || tau > MAX_LAG {
        return Err(invalid(format!("lag must lie in 1..={MAX_LAG}, got {tau}")));
    }
    Ok(())
}

/// The two most recent events strictly before `t` and within `tau` of it.
fn recent(events: &[u64], t: u64, tau: u64) -> EventPos {
    let idx = events.partition_point(|&e| e < t);
    let lag = |k: usize| {
        let d = t - events[k];
        (d <= tau).then_some(d)
    };
    let first = if idx >= 1 { lag(idx - 1) } else { None };
    let second = if idx >= 2 && first.is_some() {
        lag(idx - 2)
    } else {
        None
    };
    EventPos::from_recent(first, second)
}

/// Joint counts from pre-derived event lists of a trace with `n` samples.
pub fn joint_counts_from_events(
    ends_i: &[u64],
    ends_j: &[u64],
    starts_j: &[u64],
    n: u64,
    tau_max: usize,
) -> Result<JointPmf> {
    check_lag(tau_max)?;
    let lo = tau_max as u64;
    if n <= lo {
        return Err(Error::TraceTooShort(format!(
            "{n} samples do not exceed lag {tau_max}"
        )));
    }
    let total = n - lo;

    let mut times: Vec<u64> =
        Vec::with_capacity((ends_i.len() + ends_j.len()) * tau_max + starts_j.len());
    for &e in ends_i.iter().chain(ends_j) {
        for d in 1..=lo {
            let t = e + d;
            if t >= n {
                break;
            }
            if t >= lo {
                times.push(t);
            }
        }
    }
    times.extend(starts_j.iter().copied().filter(|&s| s >= lo && s < n));
    times.sort_unstable();
    times.dedup();

    let mut counts: BTreeMap<(WindowKey, bool), u64> = BTreeMap::new();
    for &t in &times {
        let key = WindowKey::new(recent(ends_i, t, lo), recent(ends_j, t, lo));
        let s = starts_j.binary_search(&t).is_ok();
        *counts.entry((key, s)).or_insert(0) += 1;
    }
    let quiet = total - times.len() as u64;
    if quiet > 0 {
        *counts.entry((WindowKey::QUIET, false)).or_insert(0) += quiet;
    }
    Ok(JointPmf {
        tau: tau_max,
        total,
        counts,
    })
}

/// Counts of `(E_i^(τ), E_j^(τ), S_j)` for the ordered pair `i → j`.
pub fn joint_counts(trace: &ActivityTrace, i: usize, j: usize, tau_max: usize) -> Result<JointPmf> {
    if i == j {
        return Err(invalid(format!(
            "radio pair must be distinct, got ({i}, {j})"
        )));
    }
    let ends_i = derive_events(trace, i, EventKind::End)?.samples;
    let ends_j = derive_events(trace, j, EventKind::End)?.samples;
    let starts_j = derive_events(trace, j, EventKind::Start)?.samples;
    joint_counts_from_events(&ends_i, &ends_j, &starts_j, trace.num_samples(), tau_max)
}

/// Re-keys a lag-`τ_max` table to a shorter lag without another pass over
/// the trace. The time range and total stay those of the original table.
pub fn marginalize(pmf: &JointPmf, tau: usize) -> Result<JointPmf> {
    check_lag(tau)?;
    if tau > pmf.tau {
        return Err(invalid(format!(
            "cannot widen a lag-{} table to lag {tau}",
            pmf.tau
        )));
    }
    let mut counts = BTreeMap::new();
    for (&(key, s), &c) in &pmf.counts {
        *counts.entry((key.truncate(tau), s)).or_insert(0) += c;
    }
    Ok(JointPmf {
        tau,
        total: pmf.total,
        counts,
    })
}

/// Plug-in `I(S ; E_i | E_j)` in nats from non-negative cell masses.
///
/// Keys are truncated to `tau` and multi-event windows are pooled per side.
/// Masses can be counts or probabilities; only ratios enter.
pub fn ate_from_masses(cells: impl IntoIterator<Item = (WindowKey, bool, f64)>, tau: usize) -> f64 {
    let mut joint: BTreeMap<(Symbol, Symbol, bool), f64> = BTreeMap::new();
    for (key, s, m) in cells {
        if m > 0.0 {
            let k = key.truncate(tau);
            *joint.entry((k.i.symbol(), k.j.symbol(), s)).or_insert(0.0) += m;
        }
    }
    let mut by_ij: BTreeMap<(Symbol, Symbol), f64> = BTreeMap::new();
    let mut by_j: BTreeMap<Symbol, f64> = BTreeMap::new();
    let mut by_sj: BTreeMap<(bool, Symbol), f64> = BTreeMap::new();
    let mut total = 0.0;
    for (&(si, sj, s), &m) in &joint {
        *by_ij.entry((si, sj)).or_insert(0.0) += m;
        *by_j.entry(sj).or_insert(0.0) += m;
        *by_sj.entry((s, sj)).or_insert(0.0) += m;
        total += m;
    }
    if total <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (&(si, sj, s), &m) in &joint {
        let num = m * by_j[&sj];
        let den = by_ij[&(si, sj)] * by_sj[&(s, sj)];
        let term = m / total * (num / den).ln();
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
    }
    (sum + comp).max(0.0)
}

/// `Â(τ)` from a table covering lag `τ` directly or by truncation.
pub fn empirical_ate(pmf: &JointPmf, tau: usize) -> Result<f64> {
    check_lag(tau)?;
    if tau > pmf.tau {
        return Err(invalid(format!("lag {tau} exceeds table lag {}", pmf.tau)));
    }
    if pmf.total == 0 {
        return Err(Error::TraceTooShort("empty joint table".into()));
    }
    Ok(ate_from_masses(
        pmf.counts.iter().map(|(&(k, s), &c)| (k, s, c as f64)),
        tau,
    ))
}

/// `(τ, Â(τ))` for `τ = 1..=τ_max` from one table.
pub fn profile_of(pmf: &JointPmf) -> Vec<(usize, f64)> {
    (1..=pmf.tau)
        .map(|tau| {
            let a = ate_from_masses(pmf.counts.iter().map(|(&(k, s), &c)| (k, s, c as f64)), tau);
            (tau, a)
        })
        .collect()
}

/// `Â(τ)` for `τ = 1..=τ_max` from a single pass over the trace.
pub fn ate_profile(
    trace: &ActivityTrace,
    i: usize,
    j: usize,
    tau_max: usize,
) -> Result<Vec<(usize, f64)>> {
    Ok(profile_of(&joint_counts(trace, i, j, tau_max)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Interval;
    use proptest::prelude::*;

    /// Direct O(Nτ) window scan over dense event arrays.
    fn dense_counts(
        trace: &ActivityTrace,
        i: usize,
        j: usize,
        tau: usize,
        t0: usize,
    ) -> BTreeMap<(WindowKey, bool), u64> {
        let n = trace.num_samples();
        let ei = derive_events(trace, i, EventKind::End).unwrap().to_dense(n);
        let ej = derive_events(trace, j, EventKind::End).unwrap().to_dense(n);
        let sj = derive_events(trace, j, EventKind::Start)
            .unwrap()
            .to_dense(n);
        let side = |e: &[u8], t: usize| {
            let hits: Vec<u16> = (1..=tau)
                .filter(|&p| e[t - p] == 1)
                .map(|p| p as u16)
                .collect();
            match hits.as_slice() {
                [] => EventPos::Quiet,
                [p] => EventPos::At(*p),
                [p, q, ..] => EventPos::Multi(*p, *q),
            }
        };
        let mut out = BTreeMap::new();
        for (t, &s) in sj.iter().enumerate().take(n as usize).skip(t0) {
            let key = WindowKey::new(side(&ei, t), side(&ej, t));
            *out.entry((key, s == 1)).or_insert(0) += 1;
        }
        out
    }

    /// `H(S,Ej) + H(Ei,Ej) - H(Ej) - H(S,Ei,Ej)` over dense symbols.
    fn entropy_form(counts: &BTreeMap<(WindowKey, bool), u64>, tau: usize) -> f64 {
        let total: u64 = counts.values().sum();
        let h = |f: &dyn Fn(&WindowKey, bool) -> String| {
            let mut m: BTreeMap<String, u64> = BTreeMap::new();
            for (&(k, s), &c) in counts {
                *m.entry(f(&k.truncate(tau), s)).or_insert(0) += c;
            }
            m.values()
                .map(|&c| {
                    let p = c as f64 / total as f64;
                    -p * p.ln()
                })
                .sum::<f64>()
        };
        let sym = |p: EventPos| match p {
            EventPos::Multi(..) => "x".to_string(),
            other => format!("{other:?}"),
        };
        h(&|k, s| format!("{s}{}", sym(k.j))) + h(&|k, _| format!("{}{}", sym(k.i), sym(k.j)))
            - h(&|k, _| sym(k.j))
            - h(&|k, s| format!("{s}{}{}", sym(k.i), sym(k.j)))
    }

    fn responder_trace(lag: u64) -> ActivityTrace {
        let mut i = Vec::new();
        let mut j = Vec::new();
        let mut t = 5;
        for k in 0..200u64 {
            let len = 4 + k % 7;
            i.push(Interval::new(t, t + len));
            let end = t + len - 1;
            j.push(Interval::new(end + lag, end + lag + 3));
            t = end + lag + 3 + 20 + (k * 37) % 23;
        }
        ActivityTrace::new(5e-6, t + 10, vec![i, j]).unwrap()
    }

    #[test]
    fn responder_at_lag_three_jumps_at_three() {
        let tr = responder_trace(3);
        let prof = ate_profile(&tr, 0, 1, 6).unwrap();
        let a = |t: usize| prof[t - 1].1;
        assert!(a(3) > 10.0 * a(2), "profile {prof:?}");
        assert!(a(2) >= 0.0);
        let back = ate_profile(&tr, 1, 0, 6).unwrap();
        assert!(back[2].1 < a(3));
    }

    #[test]
    fn totals_and_quiet_fill() {
        let tr = responder_trace(3);
        let pmf = joint_counts(&tr, 0, 1, 10).unwrap();
        assert_eq!(pmf.total(), tr.num_samples() - 10);
        assert_eq!(pmf.counts().values().sum::<u64>(), pmf.total());
        assert_eq!(pmf.overflow_count(), 0);
    }

    #[test]
    fn argument_errors() {
        let tr = responder_trace(3);
        assert!(joint_counts(&tr, 0, 0, 3).is_err());
        assert!(joint_counts(&tr, 0, 1, 0).is_err());
        assert!(joint_counts(&tr, 0, 5, 3).is_err());
        let short = ActivityTrace::new(1.0, 3, vec![vec![], vec![]]).unwrap();
        assert!(matches!(
            joint_counts(&short, 0, 1, 3),
            Err(Error::TraceTooShort(_))
        ));
        let pmf = joint_counts(&tr, 0, 1, 3).unwrap();
        assert!(marginalize(&pmf, 4).is_err());
        assert!(empirical_ate(&pmf, 4).is_err());
    }

    #[test]
    fn dense_bursts_overflow_is_reported() {
        let row_i: Vec<u8> = (0..200).map(|t| u8::from(t % 3 == 0)).collect();
        let row_j: Vec<u8> = (0..200).map(|t| u8::from(t % 11 == 5)).collect();
        let tr = ActivityTrace::from_dense(1.0, &[row_i, row_j]).unwrap();
        let pmf = joint_counts(&tr, 0, 1, 6).unwrap();
        assert!(pmf.overflow_count() > 0);
        assert_eq!(pmf.counts().values().sum::<u64>(), pmf.total());
    }

    fn sparse_rows() -> impl Strategy<Value = Vec<Vec<u8>>> {
        (40usize..300).prop_flat_map(|n| {
            prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.25), n), 2).prop_map(
                |rows| {
                    rows.into_iter()
                        .map(|r| r.into_iter().map(u8::from).collect())
                        .collect()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn sparse_counts_match_dense_scan(rows in sparse_rows(), tau in 1usize..8) {
            let tr = ActivityTrace::from_dense(1.0, &rows).unwrap();
            let pmf = joint_counts(&tr, 0, 1, tau).unwrap();
            prop_assert_eq!(pmf.counts(), &dense_counts(&tr, 0, 1, tau, tau));
        }

        #[test]
        fn marginalize_matches_dense_scan(rows in sparse_rows(), tau_max in 2usize..9, cut in 1usize..9) {
            let tau = cut.min(tau_max);
            let tr = ActivityTrace::from_dense(1.0, &rows).unwrap();
            let pmf = joint_counts(&tr, 1, 0, tau_max).unwrap();
            let m = marginalize(&pmf, tau).unwrap();
            let want = dense_counts(&tr, 1, 0, tau, tau_max);
            prop_assert_eq!(m.counts(), &want);
            prop_assert_eq!(m.total(), pmf.total());
        }

        #[test]
        fn marginalized_ate_tracks_direct_ate(rows in sparse_rows(), tau_max in 2usize..9, cut in 1usize..9) {
            let tau = cut.min(tau_max);
            let tr = ActivityTrace::from_dense(1.0, &rows).unwrap();
            let via = empirical_ate(&marginalize(&joint_counts(&tr, 0, 1, tau_max).unwrap(), tau).unwrap(), tau).unwrap();
            let direct = empirical_ate(&joint_counts(&tr, 0, 1, tau).unwrap(), tau).unwrap();
            let n = tr.num_samples() as f64 - tau_max as f64;
            let bound = 4.0 * (tau_max - tau) as f64 * (n.ln() + 1.0) / n;
            prop_assert!((via - direct).abs() <= bound, "via={} direct={} bound={}", via, direct, bound);
        }

        #[test]
        fn ate_matches_entropy_identity(rows in sparse_rows(), tau in 1usize..7) {
            let tr = ActivityTrace::from_dense(1.0, &rows).unwrap();
            let pmf = joint_counts(&tr, 0, 1, tau).unwrap();
            let a = empirical_ate(&pmf, tau).unwrap();
            prop_assert!(a >= 0.0);
            let h = entropy_form(pmf.counts(), tau);
            prop_assert!((a - h.max(0.0)).abs() <= 1e-12, "a={} h={}", a, h);
        }
    }
}
