//! Carrier-sense network simulator producing labelled activity traces.
//!
//! Time advances on the sample grid. Each radio runs an exponential on/off
//! traffic source whose bursts are cut into frames and queued. A queued
//! frame waits until the radio has sensed `min_idle` of idle medium, then
//! counts down a uniform backoff that freezes while the medium is busy.
//! When a data frame ends, its destination answers with a short response
//! frame exactly `response_time` later, with the link's response
//! probability. Responses are never answered.
//!
//! Radio ids are 0-based in the API; config files use 1-based ids only in
//! `routes`.

use std::collections::VecDeque;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trace::{ActivityTrace, Interval, LinkMatrix};

/// A directed link: `dst` responds to data frames from `src`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub src: usize,
    pub dst: usize,
    pub response_prob: f64,
    pub response_time_s: f64,
    pub response_len_s: f64,
    /// `[start, end)` in seconds; always active when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_s: Option<[f64; 2]>,
}

impl LinkSpec {
    fn active_at(&self, time_s: f64) -> bool {
        self.active_s.is_none_or(|[a, b]| time_s >= a && time_s < b)
    }

    fn overlaps(&self, start_s: f64, end_s: f64) -> bool {
        self.active_s.is_none_or(|[a, b]| a < end_s && start_s < b)
    }
}

/// Exponential on/off source; bursts are split into exponential frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Traffic {
    pub mean_on_s: f64,
    pub mean_off_s: f64,
    pub frame_len_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_s: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacParams {
    pub min_idle_s: f64,
    /// Inclusive backoff range in slots.
    pub backoff_slots: [u32; 2],
    pub slot_s: f64,
}

impl Default for MacParams {
    fn default() -> Self {
        Self {
            min_idle_s: 34e-6,
            backoff_slots: [0, 15],
            slot_s: 9e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub ts: f64,
    pub radios: usize,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    /// One entry per radio; `None` keeps the radio silent except for
    /// responses. Files list only the sources, as `[[traffic]]` tables
    /// with a `radio` field.
    #[serde(default, with = "sparse_traffic")]
    pub traffic: Vec<Option<Traffic>>,
    #[serde(default)]
    pub mac: MacParams,
    #[serde(default)]
    pub collisions_enabled: bool,
    /// `sense[r][q]`: radio `r` hears radio `q`. All radios hear each
    /// other when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<Vec<Vec<bool>>>,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.radios;
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(Error::Config(format!(
                "ts must be positive, got {}",
                self.ts
            )));
        }
        if m == 0 {
            return Err(Error::Config("at least one radio required".into()));
        }
        if self.traffic.len() != m {
            return Err(Error::Config(format!(
                "{} traffic entries for {m} radios",
                self.traffic.len()
            )));
        }
        let mac = &self.mac;
        if !(mac.min_idle_s >= self.ts)
            || !(mac.slot_s > 0.0)
            || mac.backoff_slots[0] > mac.backoff_slots[1]
        {
            return Err(Error::Config(format!("bad mac parameters {mac:?}")));
        }
        for (r, t) in self.traffic.iter().enumerate() {
            if let Some(t) = t {
                let ok = t.mean_on_s > 0.0 && t.mean_off_s > 0.0 && t.frame_len_s >= self.ts;
                if !ok || !t.mean_on_s.is_finite() || !t.mean_off_s.is_finite() {
                    return Err(Error::Config(format!("radio {r}: bad traffic {t:?}")));
                }
            }
        }
        for l in &self.links {
            if l.src >= m || l.dst >= m || l.src == l.dst {
                return Err(Error::Config(format!(
                    "link {} -> {} invalid for {m} radios",
                    l.src, l.dst
                )));
            }
            if !(0.0..=1.0).contains(&l.response_prob) {
                return Err(Error::Config(format!(
                    "response_prob {} outside [0, 1]",
                    l.response_prob
                )));
            }
            if !(l.response_time_s >= self.ts) || !(l.response_time_s < mac.min_idle_s) {
                return Err(Error::Config(format!(
                    "response time {} s must lie in [ts, min_idle) = [{}, {})",
                    l.response_time_s, self.ts, mac.min_idle_s
                )));
            }
            if !(l.response_len_s >= self.ts) {
                return Err(Error::Config(format!(
                    "response length {} s below one sample",
                    l.response_len_s
                )));
            }
        }
        if let Some(s) = &self.sense {
            if s.len() != m || s.iter().any(|row| row.len() != m) {
                return Err(Error::Config(format!("sense matrix must be {m}×{m}")));
            }
        }
        Ok(())
    }

    pub fn hears(&self, r: usize, q: usize) -> bool {
        r != q && self.sense.as_ref().is_none_or(|s| s[r][q])
    }

    fn samples(&self, secs: f64) -> u64 {
        (secs / self.ts).round().max(0.0) as u64
    }
}

mod sparse_traffic {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Traffic;

    #[derive(Serialize, Deserialize)]
    struct Source {
        radio: usize,
        #[serde(flatten)]
        traffic: Traffic,
    }

    pub fn serialize<S: Serializer>(v: &[Option<Traffic>], s: S) -> Result<S::Ok, S::Error> {
        let sources: Vec<Source> = v
            .iter()
            .enumerate()
            .filter_map(|(radio, t)| t.clone().map(|traffic| Source { radio, traffic }))
            .collect();
        sources.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<Traffic>>, D::Error> {
        let sources = Vec::<Source>::deserialize(d)?;
        let len = sources.iter().map(|s| s.radio + 1).max().unwrap_or(0);
        let mut out = vec![None; len];
        for s in sources {
            if out[s.radio].is_some() {
                return Err(serde::de::Error::custom(format!(
                    "duplicate traffic for radio {}",
                    s.radio
                )));
            }
            out[s.radio] = Some(s.traffic);
        }
        Ok(out)
    }
}

pub fn parse_net_config(text: &str) -> Result<NetConfig> {
    let mut cfg: NetConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if cfg.traffic.len() < cfg.radios {
        cfg.traffic.resize(cfg.radios, None);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_net_config(path: impl AsRef<Path>) -> Result<NetConfig> {
    parse_net_config(&std::fs::read_to_string(path)?)
}

pub fn format_net_config(cfg: &NetConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub frames: u64,
    pub responses: u64,
    /// Data frames that found the medium busy while contending.
    pub deferrals: u64,
    /// Data frames overlapped at their destination.
    pub collisions: u64,
    /// Data frames per configured link.
    pub link_frames: Vec<u64>,
    pub link_responses: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub trace: ActivityTrace,
    /// Links with positive response probability active at any time.
    pub truth: LinkMatrix,
    pub counters: Counters,
}

/// Links with positive response probability whose activity window meets
/// `[start_s, end_s)`.
pub fn truth_between(cfg: &NetConfig, start_s: f64, end_s: f64) -> Result<LinkMatrix> {
    let mut out = LinkMatrix::new(cfg.radios);
    for l in &cfg.links {
        if l.response_prob > 0.0 && l.overlaps(start_s, end_s) {
            out.set(l.src, l.dst, true)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
enum Tx {
    Idle,
    Data {
        end: u64,
        link: Option<usize>,
        collided: bool,
    },
    Response {
        end: u64,
    },
}

impl Tx {
    fn end(self) -> Option<u64> {
        match self {
            Tx::Idle => None,
            Tx::Data { end, .. } | Tx::Response { end } => Some(end),
        }
    }
}

struct Contention {
    difs_left: u64,
    backoff_left: u64,
    deferred: bool,
}

struct Radio {
    tx: Tx,
    queue: VecDeque<u64>,
    contention: Option<Contention>,
    next_burst: u64,
    intervals: Vec<Interval>,
}

struct Pending {
    at: u64,
    radio: usize,
    len: u64,
    link: usize,
}

struct Sim<'a> {
    cfg: &'a NetConfig,
    n: u64,
    rng: ChaCha8Rng,
    radios: Vec<Radio>,
    pending: Vec<Pending>,
    outbound: Vec<Vec<usize>>,
    counters: Counters,
    difs: u64,
    slot: u64,
}

impl Sim<'_> {
    fn exp_samples(&mut self, mean_s: f64) -> u64 {
        let e = Exp::new(1.0 / mean_s)
            .expect("positive mean")
            .sample(&mut self.rng);
        (e / self.cfg.ts).round() as u64
    }

    fn busy_for(&self, r: usize) -> bool {
        self.radios
            .iter()
            .enumerate()
            .any(|(q, radio)| !matches!(radio.tx, Tx::Idle) && self.cfg.hears(r, q))
    }

    fn new_contention(&mut self) -> Contention {
        let [lo, hi] = self.cfg.mac.backoff_slots;
        let k = self.rng.random_range(lo..=hi) as u64;
        Contention {
            difs_left: self.difs,
            backoff_left: k * self.slot,
            deferred: false,
        }
    }

    fn generate_traffic(&mut self, t: u64) {
        for r in 0..self.radios.len() {
            let Some(traffic) = self.cfg.traffic[r].clone() else {
                continue;
            };
            while self.radios[r].next_burst <= t {
                let start = self.radios[r].next_burst;
                let on = self.exp_samples(traffic.mean_on_s).max(1);
                let time_s = start as f64 * self.cfg.ts;
                let in_window = traffic
                    .active_s
                    .is_none_or(|[a, b]| time_s >= a && time_s < b);
                if in_window {
                    let mut left = on;
                    loop {
                        let f = self
                            .exp_samples(traffic.frame_len_s)
                            .max(2)
                            .min(left.max(2));
                        self.radios[r].queue.push_back(f);
                        if f >= left {
                            break;
                        }
                        left -= f;
                    }
                }
                let off = self.exp_samples(traffic.mean_off_s);
                self.radios[r].next_burst = start + on + off;
            }
            if self.radios[r].contention.is_none()
                && matches!(self.radios[r].tx, Tx::Idle)
                && !self.radios[r].queue.is_empty()
            {
                let c = self.new_contention();
                self.radios[r].contention = Some(c);
            }
        }
    }

    fn finish(&mut self, t: u64) {
        for r in 0..self.radios.len() {
            if self.radios[r].tx.end() != Some(t) {
                continue;
            }
            if let Tx::Data {
                link: Some(k),
                collided,
                ..
            } = self.radios[r].tx
            {
                let l = &self.cfg.links[k];
                if !collided && self.rng.random::<f64>() < l.response_prob {
                    let lag = self.cfg.samples(l.response_time_s).max(1);
                    self.pending.push(Pending {
                        at: t - 1 + lag,
                        radio: l.dst,
                        len: self.cfg.samples(l.response_len_s).max(1),
                        link: k,
                    });
                }
            }
            self.radios[r].tx = Tx::Idle;
            if !self.radios[r].queue.is_empty() {
                let c = self.new_contention();
                self.radios[r].contention = Some(c);
            }
        }
    }

    /// Marks overlaps caused by `q` starting to transmit.
    fn note_start(&mut self, q: usize, own_link: Option<usize>) -> bool {
        let mut own_collided = false;
        for r in 0..self.radios.len() {
            if r == q {
                continue;
            }
            if let Tx::Data {
                link: Some(k),
                ref mut collided,
                ..
            } = self.radios[r].tx
            {
                let d = self.cfg.links[k].dst;
                if d == q || self.cfg.hears(d, q) {
                    *collided = true;
                }
            }
            if let Some(k) = own_link {
                let d = self.cfg.links[k].dst;
                if !matches!(self.radios[r].tx, Tx::Idle) && (d == r || self.cfg.hears(d, r)) {
                    own_collided = true;
                }
            }
        }
        own_collided
    }

    fn start(&mut self, r: usize, t: u64, len: u64, tx: Tx) {
        let end = (t + len).min(self.n);
        self.radios[r].tx = match tx {
            Tx::Data { link, collided, .. } => Tx::Data {
                end,
                link,
                collided,
            },
            Tx::Response { .. } => Tx::Response { end },
            Tx::Idle => Tx::Idle,
        };
        match self.radios[r].intervals.last_mut() {
            Some(last) if last.end == t => last.end = end,
            _ => self.radios[r].intervals.push(Interval::new(t, end)),
        }
    }

    fn start_responses(&mut self, t: u64) {
        let due: Vec<Pending> = {
            let (now, later): (Vec<_>, Vec<_>) = self.pending.drain(..).partition(|p| p.at == t);
            self.pending = later;
            now
        };
        for p in due {
            let free = matches!(self.radios[p.radio].tx, Tx::Idle);
            let clear = self.cfg.collisions_enabled || !self.busy_for(p.radio);
            if free && clear {
                self.note_start(p.radio, None);
                self.start(p.radio, t, p.len, Tx::Response { end: 0 });
                self.counters.responses += 1;
                self.counters.link_responses[p.link] += 1;
            }
        }
    }

    /// Runs one contention step; returns whether any radio counted down.
    fn contend(&mut self, t: u64, order: &mut [usize]) -> bool {
        let snapshot: Vec<bool> = if self.cfg.collisions_enabled {
            (0..self.radios.len()).map(|r| self.busy_for(r)).collect()
        } else {
            Vec::new()
        };
        order.shuffle(&mut self.rng);
        let mut counting = false;
        for &r in order.iter() {
            if !matches!(self.radios[r].tx, Tx::Idle) || self.radios[r].contention.is_none() {
                continue;
            }
            let busy = if self.cfg.collisions_enabled {
                snapshot[r]
            } else {
                self.busy_for(r)
            };
            let difs = self.difs;
            let c = self.radios[r].contention.as_mut().expect("contending");
            if busy {
                c.difs_left = difs;
                c.deferred = true;
                continue;
            }
            counting = true;
            if c.difs_left > 0 {
                c.difs_left -= 1;
                continue;
            }
            if c.backoff_left > 0 {
                c.backoff_left -= 1;
                continue;
            }
            let deferred = c.deferred;
            self.radios[r].contention = None;
            let len = self.radios[r].queue.pop_front().expect("queued frame");
            let time_s = t as f64 * self.cfg.ts;
            let active: Vec<usize> = self.outbound[r]
                .iter()
                .copied()
                .filter(|&k| self.cfg.links[k].active_at(time_s))
                .collect();
            let link = active.choose(&mut self.rng).copied();
            let collided = self.note_start(r, link);
            self.counters.frames += 1;
            self.counters.deferrals += u64::from(deferred);
            self.counters.collisions += u64::from(collided);
            if let Some(k) = link {
                self.counters.link_frames[k] += 1;
            }
            self.start(
                r,
                t,
                len,
                Tx::Data {
                    end: 0,
                    link,
                    collided,
                },
            );
        }
        counting
    }

    fn next_event(&self, t: u64) -> u64 {
        let mut next = self.n;
        for r in &self.radios {
            if let Some(e) = r.tx.end() {
                next = next.min(e);
            }
            next = next.min(r.next_burst);
        }
        for p in &self.pending {
            next = next.min(p.at);
        }
        next.max(t + 1)
    }
}

/// Simulates `duration_s` seconds of the configured network.
pub fn simulate_network(cfg: &NetConfig, duration_s: f64, seed: u64) -> Result<SimReport> {
    cfg.validate()?;
    if !(duration_s > 0.0) {
        return Err(invalid(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    let n = cfg.samples(duration_s);
    if n == 0 {
        return Err(invalid(format!(
            "duration {duration_s} s is shorter than one sample"
        )));
    }
    let m = cfg.radios;
    let mut outbound = vec![Vec::new(); m];
    for (k, l) in cfg.links.iter().enumerate() {
        outbound[l.src].push(k);
    }
    let mut sim = Sim {
        cfg,
        n,
        rng: ChaCha8Rng::seed_from_u64(seed),
        radios: Vec::with_capacity(m),
        pending: Vec::new(),
        outbound,
        counters: Counters {
            link_frames: vec![0; cfg.links.len()],
            link_responses: vec![0; cfg.links.len()],
            ..Counters::default()
        },
        difs: (cfg.mac.min_idle_s / cfg.ts - 1e-9).ceil() as u64,
        slot: cfg.samples(cfg.mac.slot_s).max(1),
    };
    for r in 0..m {
        let next_burst = match &cfg.traffic[r] {
            Some(t) => sim.exp_samples(t.mean_off_s),
            None => u64::MAX,
        };
        sim.radios.push(Radio {
            tx: Tx::Idle,
            queue: VecDeque::new(),
            contention: None,
            next_burst,
            intervals: Vec::new(),
        });
    }

    let mut order: Vec<usize> = (0..m).collect();
    let mut t = 0u64;
    while t < n {
        sim.finish(t);
        sim.generate_traffic(t);
        sim.start_responses(t);
        let counting = sim.contend(t, &mut order);
        t = if counting { t + 1 } else { sim.next_event(t) };
    }

    let radios = sim.radios.into_iter().map(|r| r.intervals).collect();
    let trace = ActivityTrace::new(cfg.ts, n, radios)?;
    Ok(SimReport {
        trace,
        truth: truth_between(cfg, 0.0, duration_s)?,
        counters: sim.counters,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[serde(rename = "infra2ap")]
    Infra2Ap,
    AdhocGrid,
    Pair,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Infra2Ap => "infra2ap",
            Scenario::AdhocGrid => "adhoc_grid",
            Scenario::Pair => "pair",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infra2ap" => Ok(Scenario::Infra2Ap),
            "adhoc_grid" => Ok(Scenario::AdhocGrid),
            "pair" => Ok(Scenario::Pair),
            other => Err(invalid(format!("unknown scenario `{other}`"))),
        }
    }
}

/// A scripted multi-hop flow between 1-based grid radios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub from: usize,
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_s: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioKnobs {
    pub ts: f64,
    pub stas_per_ap: usize,
    pub downlink: bool,
    pub mean_on_s: f64,
    pub mean_off_s: f64,
    pub frame_len_s: f64,
    pub response_prob: f64,
    pub response_time_s: f64,
    pub response_len_s: f64,
    pub mac: MacParams,
    pub collisions_enabled: bool,
    /// When false every radio is deaf to the others.
    pub sensing: bool,
    pub grid_n: usize,
    /// Hearing range in grid spacings.
    pub grid_sense_range: f64,
    pub grid_response_time_s: f64,
    /// Defaults to one flow from the last grid radio to the first.
    pub routes: Vec<Route>,
}

impl Default for ScenarioKnobs {
    fn default() -> Self {
        Self {
            ts: 5e-6,
            stas_per_ap: 3,
            downlink: false,
            mean_on_s: 1e-3,
            mean_off_s: 10e-3,
            frame_len_s: 1e-3,
            response_prob: 1.0,
            response_time_s: 16e-6,
            response_len_s: 50e-6,
            mac: MacParams::default(),
            collisions_enabled: false,
            sensing: true,
            grid_n: 5,
            grid_sense_range: 2.0,
            grid_response_time_s: 9e-6,
            routes: Vec::new(),
        }
    }
}

impl ScenarioKnobs {
    fn traffic(&self, active_s: Option<[f64; 2]>) -> Traffic {
        Traffic {
            mean_on_s: self.mean_on_s,
            mean_off_s: self.mean_off_s,
            frame_len_s: self.frame_len_s,
            active_s,
        }
    }

    fn link(
        &self,
        src: usize,
        dst: usize,
        response_time_s: f64,
        active_s: Option<[f64; 2]>,
    ) -> LinkSpec {
        LinkSpec {
            src,
            dst,
            response_prob: self.response_prob,
            response_time_s,
            response_len_s: self.response_len_s,
            active_s,
        }
    }

    fn sense(&self, m: usize) -> Option<Vec<Vec<bool>>> {
        (!self.sensing).then(|| vec![vec![false; m]; m])
    }
}

/// Hop sequence of the L-shaped grid route `from → to` (0-based ids):
/// along the row first, then along the column.
pub fn grid_route(n: usize, from: usize, to: usize) -> Result<Vec<usize>> {
    if from >= n * n || to >= n * n || from == to {
        return Err(invalid(format!(
            "route {from} -> {to} invalid on a {n}×{n} grid"
        )));
    }
    let (mut r, mut c) = (from / n, from % n);
    let (tr, tc) = (to / n, to % n);
    let mut path = vec![from];
    while c != tc {
        c = if c < tc { c + 1 } else { c - 1 };
        path.push(r * n + c);
    }
    while r != tr {
        r = if r < tr { r + 1 } else { r - 1 };
        path.push(r * n + c);
    }
    Ok(path)
}

pub fn make_scenario(scenario: Scenario, knobs: &ScenarioKnobs) -> Result<NetConfig> {
    let mut cfg = match scenario {
        Scenario::Infra2Ap => {
            let k = knobs.stas_per_ap;
            if k == 0 {
                return Err(invalid("infra2ap needs at least one STA per AP"));
            }
            let m = 2 * (k + 1);
            let mut links = Vec::new();
            let mut traffic = vec![None; m];
            for ap in [0, k + 1] {
                for (sta, slot) in traffic.iter_mut().enumerate().skip(ap + 1).take(k) {
                    links.push(knobs.link(sta, ap, knobs.response_time_s, None));
                    links.push(knobs.link(ap, sta, knobs.response_time_s, None));
                    *slot = Some(knobs.traffic(None));
                }
                if knobs.downlink {
                    traffic[ap] = Some(knobs.traffic(None));
                }
            }
            NetConfig {
                ts: knobs.ts,
                radios: m,
                links,
                traffic,
                mac: knobs.mac.clone(),
                collisions_enabled: knobs.collisions_enabled,
                sense: knobs.sense(m),
            }
        }
        Scenario::Pair => NetConfig {
            ts: knobs.ts,
            radios: 2,
            links: vec![knobs.link(0, 1, knobs.response_time_s, None)],
            traffic: vec![Some(knobs.traffic(None)), Some(knobs.traffic(None))],
            mac: knobs.mac.clone(),
            collisions_enabled: knobs.collisions_enabled,
            sense: knobs.sense(2),
        },
        Scenario::AdhocGrid => {
            let n = knobs.grid_n;
            if n < 2 {
                return Err(invalid("adhoc grid needs n ≥ 2"));
            }
            let m = n * n;
            let routes = if knobs.routes.is_empty() {
                vec![Route {
                    from: m,
                    to: 1,
                    active_s: None,
                }]
            } else {
                knobs.routes.clone()
            };
            let mut links = Vec::new();
            let mut traffic = vec![None; m];
            for route in &routes {
                if route.from == 0 || route.to == 0 {
                    return Err(invalid("route endpoints are 1-based"));
                }
                let path = grid_route(n, route.from - 1, route.to - 1)?;
                for hop in path.windows(2) {
                    links.push(knobs.link(
                        hop[0],
                        hop[1],
                        knobs.grid_response_time_s,
                        route.active_s,
                    ));
                    traffic[hop[0]] = Some(knobs.traffic(route.active_s));
                }
            }
            let sense = if knobs.sensing {
                let pos = |r: usize| ((r / n) as f64, (r % n) as f64);
                Some(
                    (0..m)
                        .map(|a| {
                            (0..m)
                                .map(|b| {
                                    let (pa, pb) = (pos(a), pos(b));
                                    a != b
                                        && (pa.0 - pb.0).hypot(pa.1 - pb.1)
                                            <= knobs.grid_sense_range + 1e-9
                                })
                                .collect()
                        })
                        .collect(),
                )
            } else {
                knobs.sense(m)
            };
            NetConfig {
                ts: knobs.ts,
                radios: m,
                links,
                traffic,
                mac: knobs.mac.clone(),
                collisions_enabled: knobs.collisions_enabled,
                sense,
            }
        }
    };
    cfg.links.retain(|l| l.src != l.dst);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{derive_events, EventKind};

    fn pair(prob: f64, resp_s: f64) -> NetConfig {
        make_scenario(
            Scenario::Pair,
            &ScenarioKnobs {
                response_prob: prob,
                response_time_s: resp_s,
                ..ScenarioKnobs::default()
            },
        )
        .unwrap()
    }

    fn busy_samples(tr: &ActivityTrace, r: usize) -> Vec<u8> {
        tr.to_dense(r).unwrap()
    }

    #[test]
    fn lone_radio_is_its_traffic() {
        let cfg = NetConfig {
            ts: 5e-6,
            radios: 1,
            links: vec![],
            traffic: vec![Some(ScenarioKnobs::default().traffic(None))],
            mac: MacParams::default(),
            collisions_enabled: false,
            sense: None,
        };
        let rep = simulate_network(&cfg, 1.0, 3).unwrap();
        assert_eq!(rep.counters.responses, 0);
        assert!(rep.counters.frames > 30);
        let duty = rep.trace.duty_cycle(0).unwrap();
        assert!((0.05..0.15).contains(&duty), "duty {duty}");
    }

    #[test]
    fn responses_follow_frames_at_exact_lag() {
        let cfg = pair(1.0, 15e-6);
        let rep = simulate_network(&cfg, 2.0, 5).unwrap();
        let ends0 = derive_events(&rep.trace, 0, EventKind::End)
            .unwrap()
            .samples;
        let starts1 = derive_events(&rep.trace, 1, EventKind::Start)
            .unwrap()
            .samples;
        let mut responses = 0;
        for &s in &starts1 {
            if ends0.binary_search(&(s - 3)).is_ok() {
                responses += 1;
            }
        }
        assert_eq!(responses as u64, rep.counters.link_responses[0]);
        assert!(rep.counters.link_responses[0] > 50);
        assert_eq!(rep.counters.link_responses[0], rep.counters.link_frames[0]);
        for &e in &ends0 {
            if e + 3 < rep.trace.num_samples() {
                assert!(
                    starts1.binary_search(&(e + 3)).is_ok(),
                    "frame ending at {e} unanswered"
                );
            }
        }
    }

    #[test]
    fn carrier_sense_prevents_overlap() {
        let cfg = make_scenario(
            Scenario::Infra2Ap,
            &ScenarioKnobs {
                downlink: true,
                ..Default::default()
            },
        )
        .unwrap();
        let rep = simulate_network(&cfg, 1.0, 11).unwrap();
        let dense: Vec<Vec<u8>> = (0..cfg.radios)
            .map(|r| busy_samples(&rep.trace, r))
            .collect();
        for t in 0..rep.trace.num_samples() as usize {
            assert!(
                dense.iter().map(|d| d[t] as u32).sum::<u32>() <= 1,
                "overlap at {t}"
            );
        }
        assert_eq!(rep.counters.collisions, 0);
        assert!(rep.counters.deferrals > 0);
        for (f, r) in rep
            .counters
            .link_frames
            .iter()
            .zip(&rep.counters.link_responses)
        {
            assert!(r <= f);
        }
    }

    #[test]
    fn gaps_exceed_response_time() {
        let cfg = make_scenario(Scenario::Infra2Ap, &ScenarioKnobs::default()).unwrap();
        let rep = simulate_network(&cfg, 1.0, 2).unwrap();
        let lag = 3;
        for r in 0..cfg.radios {
            for w in rep.trace.intervals(r).unwrap().windows(2) {
                assert!(w[1].start - w[0].end > lag, "radio {r}: {:?}", w);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = make_scenario(Scenario::Infra2Ap, &ScenarioKnobs::default()).unwrap();
        let a = simulate_network(&cfg, 0.3, 9).unwrap();
        let b = simulate_network(&cfg, 0.3, 9).unwrap();
        let c = simulate_network(&cfg, 0.3, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn collisions_mode_allows_overlap_without_responses() {
        let knobs = ScenarioKnobs {
            collisions_enabled: true,
            sensing: false,
            ..Default::default()
        };
        let cfg = make_scenario(Scenario::Pair, &knobs).unwrap();
        let rep = simulate_network(&cfg, 3.0, 4).unwrap();
        assert!(rep.counters.collisions > 0);
        assert!(rep.counters.link_responses[0] < rep.counters.link_frames[0]);
    }

    #[test]
    fn scenario_shapes() {
        let infra = make_scenario(Scenario::Infra2Ap, &ScenarioKnobs::default()).unwrap();
        assert_eq!(infra.radios, 8);
        let truth = truth_between(&infra, 0.0, 1.0).unwrap();
        assert_eq!(truth.count(), 12);
        assert!(truth.get(1, 0) && truth.get(0, 1) && truth.get(5, 4) && !truth.get(1, 4));

        let null = make_scenario(
            Scenario::Pair,
            &ScenarioKnobs {
                response_prob: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(truth_between(&null, 0.0, 1.0).unwrap().count(), 0);

        let grid = make_scenario(Scenario::AdhocGrid, &ScenarioKnobs::default()).unwrap();
        assert_eq!(grid.radios, 25);
        assert_eq!(grid.links.len(), 8);
        assert_eq!(
            grid_route(5, 24, 0).unwrap(),
            vec![24, 23, 22, 21, 20, 15, 10, 5, 0]
        );
        assert!(grid.hears(0, 1) && grid.hears(0, 10) && !grid.hears(0, 12));

        let windowed = make_scenario(
            Scenario::AdhocGrid,
            &ScenarioKnobs {
                routes: vec![Route {
                    from: 21,
                    to: 5,
                    active_s: Some([1.0, 2.0]),
                }],
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(truth_between(&windowed, 0.0, 1.0).unwrap().count(), 0);
        assert_eq!(truth_between(&windowed, 1.5, 1.6).unwrap().count(), 8);
        assert!("mesh".parse::<Scenario>().is_err());
    }

    #[test]
    fn windowed_route_is_silent_outside_window() {
        let cfg = make_scenario(
            Scenario::AdhocGrid,
            &ScenarioKnobs {
                routes: vec![Route {
                    from: 25,
                    to: 1,
                    active_s: Some([0.2, 0.4]),
                }],
                ..Default::default()
            },
        )
        .unwrap();
        let rep = simulate_network(&cfg, 0.6, 1).unwrap();
        for r in 0..cfg.radios {
            for iv in rep.trace.intervals(r).unwrap() {
                let s = iv.start as f64 * cfg.ts;
                assert!((0.2..0.45).contains(&s), "radio {r} active at {s}");
            }
        }
        assert!(rep.counters.responses > 0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = pair(1.0, 16e-6);
        cfg.links[0].response_time_s = 40e-6;
        assert!(cfg.validate().is_err());
        let mut cfg = pair(1.0, 16e-6);
        cfg.links[0].response_time_s = 1e-6;
        assert!(cfg.validate().is_err());
        let mut cfg = pair(1.0, 16e-6);
        cfg.traffic.pop();
        assert!(cfg.validate().is_err());
        let cfg = pair(0.5, 16e-6);
        let text = format_net_config(&cfg).unwrap();
        assert_eq!(parse_net_config(&text).unwrap(), cfg);
    }

    #[test]
    fn silent_radios_round_trip() {
        let cfg = make_scenario(Scenario::Infra2Ap, &ScenarioKnobs::default()).unwrap();
        assert!(cfg.traffic.iter().any(Option::is_none));
        let text = format_net_config(&cfg).unwrap();
        assert!(text.contains("[[traffic]]"));
        assert_eq!(parse_net_config(&text).unwrap(), cfg);
        let dup = "ts = 5e-6\nradios = 2\n[[traffic]]\nradio = 0\nmean_on_s = 1e-3\nmean_off_s = 1e-2\nframe_len_s = 1e-3\n[[traffic]]\nradio = 0\nmean_on_s = 1e-3\nmean_off_s = 1e-2\nframe_len_s = 1e-3\n";
        assert!(parse_net_config(dup).is_err());
    }
}
