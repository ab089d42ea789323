//! Regression baselines.
//!
//! All three detectors fit nested autoregressions by least squares and
//! compare residuals with an F statistic
//! `g = (rss_null − rss_alt)/rss_alt · (N − 3τ − 1)/τ`.
//!
//! - [`linear_asym_test`] regresses the start events of `j` on lagged end
//!   events, over the whole trace.
//! - [`hard_fusion`] and [`soft_fusion`] regress activity on lagged
//!   activity in disjoint windows of a resampled trace, then combine the
//!   windows by majority vote or by averaging `ln(rss_null/rss_alt)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atelnet::{LinkDecision, TopologyEstimate};
use crate::distributions::f_isf;
use crate::error::{invalid, Error, Result};
use crate::trace::{derive_events, resample, ActivityTrace, EventKind};

/// Residual sums of squares of a nested pair of fits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFitResult {
    pub rss_null: f64,
    pub rss_alt: f64,
    pub n_effective: u64,
    pub tau: usize,
}

impl LinearFitResult {
    pub fn dof(&self) -> (u32, u32) {
        let d2 = self.n_effective.saturating_sub(2 * self.tau as u64 + 1);
        (self.tau as u32, d2.min(u32::MAX as u64) as u32)
    }

    /// F statistic; zero when neither model leaves a residual.
    pub fn g(&self) -> f64 {
        let (d1, d2) = self.dof();
        let gain = self.rss_null - self.rss_alt;
        if self.rss_alt <= 0.0 {
            return if gain > 0.0 { f64::INFINITY } else { 0.0 };
        }
        (gain / self.rss_alt * d2 as f64 / d1 as f64).max(0.0)
    }

    /// `ln(rss_null/rss_alt)`, with the alternate residual floored.
    pub fn magnitude(&self) -> f64 {
        if self.rss_null <= 0.0 {
            return 0.0;
        }
        let floor = self.rss_null * 1e-12;
        (self.rss_null / self.rss_alt.max(floor)).ln().max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrangerTest {
    pub fit: LinearFitResult,
    pub g: f64,
    pub dof1: u32,
    pub dof2: u32,
}

/// Cross-product accumulator for a design with an implicit intercept in
/// column 0 and several targets.
struct Gram {
    xtx: DMatrix<f64>,
    xty: DMatrix<f64>,
    yty: Vec<f64>,
    rows: u64,
}

impl Gram {
    fn new(p: usize, targets: usize) -> Self {
        Self {
            xtx: DMatrix::zeros(p, p),
            xty: DMatrix::zeros(p, targets),
            yty: vec![0.0; targets],
            rows: 0,
        }
    }

    /// Adds one row given its non-zero regressors (excluding the
    /// intercept) and non-zero targets.
    fn add(&mut self, x: &[(usize, f64)], y: &[(usize, f64)]) {
        self.add_many(x, y, 1.0);
    }

    fn add_many(&mut self, x: &[(usize, f64)], y: &[(usize, f64)], w: f64) {
        self.rows += w as u64;
        self.xtx[(0, 0)] += w;
        for &(a, va) in x {
            self.xtx[(0, a)] += w * va;
            self.xtx[(a, 0)] += w * va;
            for &(b, vb) in x {
                self.xtx[(a, b)] += w * va * vb;
            }
        }
        for &(k, vy) in y {
            self.yty[k] += w * vy * vy;
            self.xty[(0, k)] += w * vy;
            for &(a, va) in x {
                self.xty[(a, k)] += w * va * vy;
            }
        }
    }

    /// RSS of target `k` regressed on the columns in `cols`.
    fn rss(&self, cols: &[usize], k: usize) -> f64 {
        let p = cols.len();
        let a = DMatrix::from_fn(p, p, |r, c| self.xtx[(cols[r], cols[c])]);
        let b = DVector::from_fn(p, |r, _| self.xty[(cols[r], k)]);
        let scale = (0..p).map(|r| a[(r, r)]).fold(0.0f64, f64::max).max(1.0);
        let mut reg = a.clone();
        for r in 0..p {
            reg[(r, r)] += 1e-12 * scale;
        }
        let beta = match reg.cholesky() {
            Some(ch) => ch.solve(&b),
            None => return self.yty[k],
        };
        let fitted = (a * &beta).dot(&beta);
        (self.yty[k] - 2.0 * beta.dot(&b) + fitted).max(0.0)
    }
}

fn nested(
    gram: &Gram,
    null_cols: &[usize],
    alt_cols: &[usize],
    k: usize,
    tau: usize,
) -> LinearFitResult {
    let rss_null = gram.rss(null_cols, k);
    let rss_alt = gram.rss(alt_cols, k).min(rss_null);
    LinearFitResult {
        rss_null,
        rss_alt,
        n_effective: gram.rows,
        tau,
    }
}

fn check_rows(n: usize, tau: usize) -> Result<()> {
    if tau == 0 {
        return Err(invalid("regression lag must be at least 1"));
    }
    if n <= 3 * tau + 1 {
        return Err(Error::TraceTooShort(format!(
            "{n} samples do not exceed 3·{tau} + 1"
        )));
    }
    Ok(())
}

/// Tests whether lags of `x` improve an autoregression of `y`.
///
/// Null: `y[t] ~ 1 + y[t−1..=t−τ]`; alternate adds `x[t−1..=t−τ]`.
pub fn granger_f_statistic(x: &[f64], y: &[f64], tau: usize) -> Result<GrangerTest> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "series lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    check_rows(y.len(), tau)?;
    let mut gram = Gram::new(2 * tau + 1, 1);
    let mut nz = Vec::with_capacity(2 * tau);
    for t in tau..y.len() {
        nz.clear();
        for d in 1..=tau {
            if y[t - d] != 0.0 {
                nz.push((d, y[t - d]));
            }
            if x[t - d] != 0.0 {
                nz.push((tau + d, x[t - d]));
            }
        }
        let target = if y[t] != 0.0 { vec![(0, y[t])] } else { vec![] };
        gram.add(&nz, &target);
    }
    let null: Vec<usize> = (0..=tau).collect();
    let alt: Vec<usize> = (0..=2 * tau).collect();
    let fit = nested(&gram, &null, &alt, 0, tau);
    let (dof1, dof2) = fit.dof();
    Ok(GrangerTest {
        fit,
        g: fit.g(),
        dof1,
        dof2,
    })
}

/// Nested fit of `S_j[t]` on lagged `E_j` (null) plus lagged `E_i`.
pub fn linear_asym_fit(
    trace: &ActivityTrace,
    i: usize,
    j: usize,
    tau: usize,
) -> Result<LinearFitResult> {
    if i == j {
        return Err(invalid(format!(
            "radio pair must be distinct, got ({i}, {j})"
        )));
    }
    let n = trace.num_samples();
    check_rows(n as usize, tau)?;
    let ends_i = derive_events(trace, i, EventKind::End)?.samples;
    let ends_j = derive_events(trace, j, EventKind::End)?.samples;
    let starts_j = derive_events(trace, j, EventKind::Start)?.samples;
    let lo = tau as u64;

    let mut times: Vec<u64> = Vec::new();
    for &e in ends_i.iter().chain(&ends_j) {
        times.extend((1..=lo).map(|d| e + d).filter(|&t| t >= lo && t < n));
    }
    times.extend(starts_j.iter().copied().filter(|&s| s >= lo));
    times.sort_unstable();
    times.dedup();

    let mut gram = Gram::new(2 * tau + 1, 1);
    let mut nz = Vec::with_capacity(2 * tau);
    for &t in &times {
        nz.clear();
        for d in 1..=lo {
            if ends_j.binary_search(&(t - d)).is_ok() {
                nz.push((d as usize, 1.0));
            }
        }
        for d in 1..=lo {
            if ends_i.binary_search(&(t - d)).is_ok() {
                nz.push((tau + d as usize, 1.0));
            }
        }
        let s = starts_j.binary_search(&t).is_ok();
        gram.add(&nz, if s { &[(0, 1.0)] } else { &[] });
    }
    let quiet = (n - lo) - times.len() as u64;
    gram.add_many(&[], &[], quiet as f64);

    let null: Vec<usize> = (0..=tau).collect();
    let alt: Vec<usize> = (0..=2 * tau).collect();
    Ok(nested(&gram, &null, &alt, 0, tau))
}

/// F test of the event regression at a known lag `tau`. Radio ids are
/// 0-based.
pub fn linear_asym_test(
    trace: &ActivityTrace,
    i: usize,
    j: usize,
    tau: usize,
    p_fa: f64,
) -> Result<LinkDecision> {
    let fit = linear_asym_fit(trace, i, j, tau)?;
    let (d1, d2) = fit.dof();
    let threshold = f_isf(p_fa, d1, d2)?;
    let g = fit.g();
    Ok(LinkDecision {
        i,
        j,
        statistic: g,
        tau_hat: tau,
        dof: d1,
        threshold,
        decision: g > threshold,
        effect: fit.magnitude(),
        overflow: 0,
    })
}

/// [`linear_asym_test`] on every ordered pair.
pub fn linear_asym_topology(
    trace: &ActivityTrace,
    tau: usize,
    p_fa: f64,
) -> Result<TopologyEstimate> {
    let m = trace.num_radios();
    if m < 2 {
        return Err(invalid(format!(
            "topology needs at least 2 radios, got {m}"
        )));
    }
    let details = ordered_pairs(m)
        .par_iter()
        .map(|&(i, j)| linear_asym_test(trace, i, j, tau, p_fa))
        .collect::<Result<Vec<_>>>()?;
    TopologyEstimate::from_details(m, details)
}

fn ordered_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub window_s: f64,
    pub tau: usize,
    pub p_fa: f64,
    /// Activity is OR-resampled to this period before fitting.
    pub period_s: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            window_s: 60e-3,
            tau: 8,
            p_fa: 1e-3,
            period_s: 20e-6,
        }
    }
}

/// Per-window nested fits of every ordered pair, `fits[w][pair]`, with
/// pairs in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowFits {
    pub m: usize,
    pub window_len: usize,
    pub tau: usize,
    pub fits: Vec<Vec<LinearFitResult>>,
}

impl WindowFits {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        ordered_pairs(self.m)
    }
}

/// Fits every ordered pair in every disjoint window; the trailing
/// partial window is dropped.
pub fn fusion_window_fits(trace: &ActivityTrace, params: &FusionParams) -> Result<WindowFits> {
    let m = trace.num_radios();
    if m < 2 {
        return Err(invalid(format!(
            "topology needs at least 2 radios, got {m}"
        )));
    }
    if !(params.window_s > 0.0) {
        return Err(invalid(format!(
            "window must be positive, got {}",
            params.window_s
        )));
    }
    let tr = if (trace.sample_period_s() - params.period_s).abs() <= 1e-12 * params.period_s {
        trace.clone()
    } else {
        resample(trace, params.period_s)?
    };
    let w = (params.window_s / params.period_s).round() as usize;
    let tau = params.tau;
    check_rows(w, tau)?;
    let n = tr.num_samples() as usize;
    let windows = n / w;
    if windows == 0 {
        return Err(Error::TraceTooShort(format!(
            "{} s trace is shorter than one {} s window",
            tr.duration_s(),
            params.window_s
        )));
    }
    let dense: Vec<Vec<u8>> = (0..m).map(|r| tr.to_dense(r)).collect::<Result<_>>()?;
    let pairs = ordered_pairs(m);

    let fits = (0..windows)
        .into_par_iter()
        .map(|k| {
            let base = k * w;
            let p = 1 + m * tau;
            let mut gram = Gram::new(p, m);
            let mut x = Vec::new();
            let mut y = Vec::new();
            for t in base + tau..base + w {
                x.clear();
                y.clear();
                for (r, row) in dense.iter().enumerate() {
                    for d in 1..=tau {
                        if row[t - d] != 0 {
                            x.push((1 + r * tau + d - 1, 1.0));
                        }
                    }
                    if row[t] != 0 {
                        y.push((r, 1.0));
                    }
                }
                gram.add(&x, &y);
            }
            let own = |r: usize| 1 + r * tau..1 + (r + 1) * tau;
            pairs
                .iter()
                .map(|&(i, j)| {
                    let null: Vec<usize> = std::iter::once(0).chain(own(j)).collect();
                    let alt: Vec<usize> = null.iter().copied().chain(own(i)).collect();
                    nested(&gram, &null, &alt, j, tau)
                })
                .collect()
        })
        .collect();
    Ok(WindowFits {
        m,
        window_len: w,
        tau,
        fits,
    })
}

/// Per-window F tests fused by strict majority.
pub fn hard_fusion(trace: &ActivityTrace, params: &FusionParams) -> Result<TopologyEstimate> {
    hard_from_fits(&fusion_window_fits(trace, params)?, params.p_fa)
}

pub fn hard_from_fits(wf: &WindowFits, p_fa: f64) -> Result<TopologyEstimate> {
    let windows = wf.fits.len();
    let details = wf
        .pairs()
        .into_iter()
        .enumerate()
        .map(|(k, (i, j))| {
            let mut hits = 0usize;
            let mut dof = wf.tau as u32;
            for fits in &wf.fits {
                let f = fits[k];
                let (d1, d2) = f.dof();
                dof = d1;
                if f.g() > f_isf(p_fa, d1, d2)? {
                    hits += 1;
                }
            }
            Ok(LinkDecision {
                i,
                j,
                statistic: hits as f64,
                tau_hat: wf.tau,
                dof,
                threshold: windows as f64 / 2.0,
                decision: 2 * hits > windows,
                effect: mean_magnitude(wf, k),
                overflow: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TopologyEstimate::from_details(wf.m, details)
}

fn mean_magnitude(wf: &WindowFits, k: usize) -> f64 {
    wf.fits.iter().map(|f| f[k].magnitude()).sum::<f64>() / wf.fits.len() as f64
}

/// Window-averaged causality magnitude, thresholded at the mean over all
/// ordered pairs.
pub fn soft_fusion(trace: &ActivityTrace, params: &FusionParams) -> Result<TopologyEstimate> {
    soft_from_fits(&fusion_window_fits(trace, params)?)
}

pub fn soft_from_fits(wf: &WindowFits) -> Result<TopologyEstimate> {
    let pairs = wf.pairs();
    let avg: Vec<f64> = (0..pairs.len()).map(|k| mean_magnitude(wf, k)).collect();
    let mean = avg.iter().sum::<f64>() / avg.len() as f64;
    let cut = mean + 1e-12 * mean.abs();
    let details = pairs
        .into_iter()
        .zip(&avg)
        .map(|((i, j), &a)| LinkDecision {
            i,
            j,
            statistic: a,
            tau_hat: wf.tau,
            dof: wf.tau as u32,
            threshold: mean,
            decision: a > cut,
            effect: a,
            overflow: 0,
        })
        .collect();
    TopologyEstimate::from_details(wf.m, details)
}
