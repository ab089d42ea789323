//! Multi-radio binary activity traces.
//!
//! Activity is stored as run-length intervals `[start, end)` on a common
//! sample grid. Within a radio, intervals are sorted, non-empty and never
//! touch: adjacent input runs are merged when a trace is built, overlapping
//! ones are rejected.
//!
//! Radios are addressed by zero-based index in the API. The text format and
//! the `.links` sidecar number radios from 1.
//!
//! ```text
//! #ts 5e-6
//! #n 1000
//! #m 2
//! 1,10,40
//! 2,43,52
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Half-open run of active samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: u64,
    pub end: u64,
}

impl Interval {
    pub fn new(start: u64, end: u64) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, t: u64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Activity of `M` radios over `N` samples of period `Ts`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityTrace {
    sample_period_s: f64,
    num_samples: u64,
    radios: Vec<Vec<Interval>>,
}

impl ActivityTrace {
    /// Builds a trace from per-radio interval lists in any order.
    ///
    /// Adjacent intervals are merged; empty, inverted, overlapping or
    /// out-of-range intervals are errors.
    pub fn new(sample_period_s: f64, num_samples: u64, radios: Vec<Vec<Interval>>) -> Result<Self> {
        if !(sample_period_s.is_finite() && sample_period_s > 0.0) {
            return Err(invalid(format!(
                "sample period must be positive, got {sample_period_s}"
            )));
        }
        let radios = radios
            .into_iter()
            .enumerate()
            .map(|(r, ivs)| canonicalize(r + 1, num_samples, ivs))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sample_period_s,
            num_samples,
            radios,
        })
    }

    /// Builds a trace from dense 0/1 rows of equal length.
    pub fn from_dense(sample_period_s: f64, rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(
                "dense rows differ in length".into(),
            ));
        }
        let radios = rows.iter().map(|row| runs_of(row)).collect();
        Self::new(sample_period_s, n as u64, radios)
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn num_samples(&self) -> u64 {
        self.num_samples
    }

    pub fn num_radios(&self) -> usize {
        self.radios.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.num_samples as f64 * self.sample_period_s
    }

    pub fn intervals(&self, radio: usize) -> Result<&[Interval]> {
        self.radios
            .get(radio)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownRadio(radio))
    }

    pub fn is_active(&self, radio: usize, t: u64) -> Result<bool> {
        let ivs = self.intervals(radio)?;
        let k = ivs.partition_point(|iv| iv.end <= t);
        Ok(ivs.get(k).is_some_and(|iv| iv.contains(t)))
    }

    /// Dense 0/1 activity of one radio.
    pub fn to_dense(&self, radio: usize) -> Result<Vec<u8>> {
        let mut out = vec![0u8; self.num_samples as usize];
        for iv in self.intervals(radio)? {
            out[iv.start as usize..iv.end as usize].fill(1);
        }
        Ok(out)
    }

    /// Fraction of samples in which the radio is active.
    pub fn duty_cycle(&self, radio: usize) -> Result<f64> {
        let busy: u64 = self.intervals(radio)?.iter().map(Interval::len).sum();
        Ok(busy as f64 / self.num_samples.max(1) as f64)
    }

    /// Samples `[start, end)` of every radio, re-based to start at zero.
    pub fn window(&self, start: u64, end: u64) -> Result<Self> {
        if start >= end || end > self.num_samples {
            return Err(invalid(format!(
                "window [{start}, {end}) not inside [0, {})",
                self.num_samples
            )));
        }
        let radios = self
            .radios
            .iter()
            .map(|ivs| {
                ivs.iter()
                    .filter(|iv| iv.end > start && iv.start < end)
                    .map(|iv| Interval::new(iv.start.max(start) - start, iv.end.min(end) - start))
                    .collect()
            })
            .collect();
        Ok(Self {
            sample_period_s: self.sample_period_s,
            num_samples: end - start,
            radios,
        })
    }

    /// Keeps only the listed radios, in the given order.
    pub fn select(&self, radios: &[usize]) -> Result<Self> {
        let picked = radios
            .iter()
            .map(|&r| self.intervals(r).map(<[Interval]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sample_period_s: self.sample_period_s,
            num_samples: self.num_samples,
            radios: picked,
        })
    }
}

fn runs_of(row: &[u8]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &v) in row.iter().enumerate() {
        match (v != 0, start) {
            (true, None) => start = Some(t as u64),
            (false, Some(s)) => {
                out.push(Interval::new(s, t as u64));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Interval::new(s, row.len() as u64));
    }
    out
}

fn canonicalize(radio_id: usize, n: u64, mut ivs: Vec<Interval>) -> Result<Vec<Interval>> {
    for iv in &ivs {
        if iv.is_empty() {
            return Err(Error::InvertedInterval {
                radio: radio_id,
                start: iv.start,
                end: iv.end,
            });
        }
        if iv.end > n {
            return Err(Error::IntervalOutOfRange {
                radio: radio_id,
                start: iv.start,
                end: iv.end,
                num_samples: n,
            });
        }
    }
    ivs.sort_unstable();
    let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
    for iv in ivs {
        match out.last_mut() {
            Some(last) if iv.start < last.end => {
                return Err(Error::OverlappingIntervals {
                    radio: radio_id,
                    a_start: last.start,
                    a_end: last.end,
                    b_start: iv.start,
                    b_end: iv.end,
                });
            }
            Some(last) if iv.start == last.end => last.end = iv.end,
            _ => out.push(iv),
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// First sample of an activity run.
    Start,
    /// Last sample of an activity run.
    End,
}

/// Sorted sample indices at which one radio has a start or end event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventSeries {
    pub radio: usize,
    pub kind: EventKind,
    pub samples: Vec<u64>,
}

impl EventSeries {
    pub fn to_dense(&self, num_samples: u64) -> Vec<u8> {
        let mut out = vec![0u8; num_samples as usize];
        for &t in &self.samples {
            out[t as usize] = 1;
        }
        out
    }
}

/// Start or end events of one radio.
///
/// With `a[-1] = a[N] = 0`, `S[t] = 1` iff `a[t-1] = 0, a[t] = 1` and
/// `E[t] = 1` iff `a[t] = 1, a[t+1] = 0`.
pub fn derive_events(trace: &ActivityTrace, radio: usize, kind: EventKind) -> Result<EventSeries> {
    let ivs = trace.intervals(radio)?;
    let samples = match kind {
        EventKind::Start => ivs.iter().map(|iv| iv.start).collect(),
        EventKind::End => ivs.iter().map(|iv| iv.end - 1).collect(),
    };
    Ok(EventSeries {
        radio,
        kind,
        samples,
    })
}

/// Rebuilds intervals from matching start and end event lists.
pub fn intervals_from_events(starts: &[u64], ends: &[u64]) -> Result<Vec<Interval>> {
    if starts.len() != ends.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} starts but {} ends",
            starts.len(),
            ends.len()
        )));
    }
    starts
        .iter()
        .zip(ends)
        .map(|(&s, &e)| {
            if e < s {
                Err(invalid(format!("end event {e} precedes start event {s}")))
            } else {
                Ok(Interval::new(s, e + 1))
            }
        })
        .collect()
}

/// OR-downsamples a trace by the integer factor `new_period_s / Ts`.
///
/// Output sample `t` is active iff any input sample in `[k t, k t + k)` is.
/// A trailing partial block becomes one final output sample.
pub fn resample(trace: &ActivityTrace, new_period_s: f64) -> Result<ActivityTrace> {
    let k = integer_factor(trace.sample_period_s, new_period_s)?;
    let n = trace.num_samples.div_ceil(k);
    let radios = trace
        .radios
        .iter()
        .map(|ivs| {
            let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
            for iv in ivs {
                let mapped = Interval::new(iv.start / k, iv.end.div_ceil(k));
                match out.last_mut() {
                    Some(last) if mapped.start <= last.end => last.end = last.end.max(mapped.end),
                    _ => out.push(mapped),
                }
            }
            out
        })
        .collect();
    Ok(ActivityTrace {
        sample_period_s: trace.sample_period_s * k as f64,
        num_samples: n,
        radios,
    })
}

pub(crate) fn integer_factor(ts: f64, new_period_s: f64) -> Result<u64> {
    let ratio = new_period_s / ts;
    let k = ratio.round();
    if !(k >= 1.0) || (ratio - k).abs() > 1e-9 * ratio {
        return Err(invalid(format!(
            "new period {new_period_s} is not a positive integer multiple of {ts}"
        )));
    }
    Ok(k as u64)
}

/// Parses the text trace format.
pub fn parse_trace(text: &str) -> Result<ActivityTrace> {
    let mut ts = None;
    let mut n = None;
    let mut m = None;
    let mut radios: Vec<Vec<Interval>> = Vec::new();
    let mut in_body = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let header = |msg: String| Error::MalformedHeader { line: line_no, msg };
            if in_body {
                return Err(header("header line after interval rows".into()));
            }
            let mut parts = rest.split_whitespace();
            let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(header(format!("expected `#<key> <value>`, got `{line}`")));
            };
            let dup = |k: &str| header(format!("duplicate `#{k}`"));
            match key {
                "ts" => {
                    let v: f64 = value
                        .parse()
                        .map_err(|_| header(format!("bad sample period `{value}`")))?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(header(format!("sample period must be positive, got {v}")));
                    }
                    if ts.replace(v).is_some() {
                        return Err(dup(key));
                    }
                }
                "n" => {
                    let v: u64 = value
                        .parse()
                        .map_err(|_| header(format!("bad sample count `{value}`")))?;
                    if n.replace(v).is_some() {
                        return Err(dup(key));
                    }
                }
                "m" => {
                    let v: usize = value
                        .parse()
                        .map_err(|_| header(format!("bad radio count `{value}`")))?;
                    if v == 0 {
                        return Err(header("radio count must be at least 1".into()));
                    }
                    if m.replace(v).is_some() {
                        return Err(dup(key));
                    }
                }
                other => return Err(header(format!("unknown header key `{other}`"))),
            }
            continue;
        }

        if !in_body {
            let missing: Vec<&str> = [
                ("#ts", ts.is_none()),
                ("#n", n.is_none()),
                ("#m", m.is_none()),
            ]
            .into_iter()
            .filter_map(|(k, miss)| miss.then_some(k))
            .collect();
            if !missing.is_empty() {
                return Err(Error::MalformedHeader {
                    line: line_no,
                    msg: format!("missing {} before first row", missing.join(", ")),
                });
            }
            radios = vec![Vec::new(); m.unwrap_or(0)];
            in_body = true;
        }
        let row_err = |msg: String| Error::MalformedRow { line: line_no, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(row_err(format!("expected `radio,start,end`, got `{line}`")));
        }
        let radio: usize = fields[0]
            .parse()
            .map_err(|_| row_err(format!("bad radio id `{}`", fields[0])))?;
        let start: u64 = fields[1]
            .parse()
            .map_err(|_| row_err(format!("bad start `{}`", fields[1])))?;
        let end: u64 = fields[2]
            .parse()
            .map_err(|_| row_err(format!("bad end `{}`", fields[2])))?;
        if radio == 0 || radio > radios.len() {
            return Err(row_err(format!(
                "radio id {radio} outside 1..={}",
                radios.len()
            )));
        }
        radios[radio - 1].push(Interval::new(start, end));
    }

    let (Some(ts), Some(n), Some(m)) = (ts, n, m) else {
        return Err(Error::MalformedHeader {
            line: 0,
            msg: "trace needs `#ts`, `#n` and `#m` headers".into(),
        });
    };
    if radios.is_empty() {
        radios = vec![Vec::new(); m];
    }
    ActivityTrace::new(ts, n, radios)
}

/// Canonical text form: header, then rows sorted by radio and start.
pub fn format_trace(trace: &ActivityTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#ts {}", trace.sample_period_s);
    let _ = writeln!(out, "#n {}", trace.num_samples);
    let _ = writeln!(out, "#m {}", trace.num_radios());
    for (r, ivs) in trace.radios.iter().enumerate() {
        for iv in ivs {
            let _ = writeln!(out, "{},{},{}", r + 1, iv.start, iv.end);
        }
    }
    out
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<ActivityTrace> {
    parse_trace(&std::fs::read_to_string(path)?)
}

pub fn save_trace(trace: &ActivityTrace, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_trace(trace))?;
    Ok(())
}

/// Directed link relation: `get(i, j)` means radio `j` responds to radio `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkMatrix {
    m: usize,
    cells: Vec<bool>,
}

impl LinkMatrix {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            cells: vec![false; m * m],
        }
    }

    pub fn from_pairs(m: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = Self::new(m);
        for (i, j) in pairs {
            out.set(i, j, true)?;
        }
        Ok(out)
    }

    pub fn num_radios(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        i < self.m && j < self.m && self.cells[i * self.m + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) -> Result<()> {
        if i >= self.m {
            return Err(Error::UnknownRadio(i));
        }
        if j >= self.m {
            return Err(Error::UnknownRadio(j));
        }
        if i == j {
            return Err(invalid(format!("self link on radio {i}")));
        }
        self.cells[i * self.m + j] = value;
        Ok(())
    }

    /// Number of directed links.
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Directed links in row-major order.
    pub fn links(&self) -> Vec<(usize, usize)> {
        (0..self.m)
            .flat_map(|i| (0..self.m).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j))
            .collect()
    }

    /// `L ∨ Lᵀ`.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        for (i, j) in self.links() {
            out.cells[j * self.m + i] = true;
        }
        out
    }

    /// Unordered pairs `i < j` linked in either direction.
    pub fn undirected_pairs(&self) -> Vec<(usize, usize)> {
        let sym = self.symmetrized();
        sym.links().into_iter().filter(|&(i, j)| i < j).collect()
    }
}

/// Parses `i,j` lines with 1-based radio ids; `#` lines are comments.
pub fn parse_links(text: &str, m: usize) -> Result<LinkMatrix> {
    let mut out = LinkMatrix::new(m);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row_err = |msg: String| Error::MalformedRow { line: idx + 1, msg };
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| row_err(format!("expected `i,j`, got `{line}`")))?;
        let i: usize = a
            .trim()
            .parse()
            .map_err(|_| row_err(format!("bad radio id `{a}`")))?;
        let j: usize = b
            .trim()
            .parse()
            .map_err(|_| row_err(format!("bad radio id `{b}`")))?;
        if i == 0 || j == 0 || i > m || j > m {
            return Err(row_err(format!("link {i},{j} outside 1..={m}")));
        }
        out.set(i - 1, j - 1, true)
            .map_err(|e| row_err(e.to_string()))?;
    }
    Ok(out)
}

pub fn format_links(links: &LinkMatrix) -> String {
    links
        .links()
        .into_iter()
        .map(|(i, j)| format!("{},{}\n", i + 1, j + 1))
        .collect()
}

pub fn load_links(path: impl AsRef<Path>, m: usize) -> Result<LinkMatrix> {
    parse_links(&std::fs::read_to_string(path)?, m)
}

pub fn save_links(links: &LinkMatrix, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_links(links))?;
    Ok(())
}
