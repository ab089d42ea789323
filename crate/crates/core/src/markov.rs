//! Two-radio shared-channel Markov chain.
//!
//! Radio `i` and radio `j` alternate on one channel. Each sample the chain
//! sits in one of 21 states: idle, a frame start or body of either radio,
//! the three post-frame channel samples, and a response start, body and
//! three post-response samples for either direction. A response to radio
//! `x` always starts exactly three samples after `x`'s frame ended.
//!
//! The module gives the transition matrix, the steady state both in closed
//! form and by a linear solve, the exact lag-3 joint PMF of the `i → j`
//! test variables, closed-form ATE at lags 1 to 3, and a sampler that
//! turns the chain into an [`ActivityTrace`].

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::empirical::{ate_from_masses, EventPos, WindowKey};
use crate::error::{invalid, Error, Result};
use crate::trace::{ActivityTrace, Interval};

pub const NUM_STATES: usize = 21;

pub type TransitionMatrix = SMatrix<f64, NUM_STATES, NUM_STATES>;

/// Per-sample transition probabilities of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    /// Frame start probability of `i` from an idle channel.
    pub p_i: f64,
    pub p_j: f64,
    /// Frame continuation probability of `i`.
    pub p_di: f64,
    pub p_dj: f64,
    /// Probability that `i` responds to a frame of `j`.
    pub p_ri: f64,
    /// Probability that `j` responds to a frame of `i`.
    pub p_rj: f64,
    /// Response continuation probability of `i`.
    pub p_dri: f64,
    pub p_drj: f64,
}

impl McParams {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("p_i", self.p_i),
            ("p_j", self.p_j),
            ("p_ri", self.p_ri),
            ("p_rj", self.p_rj),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        let cont = [
            ("p_di", self.p_di),
            ("p_dj", self.p_dj),
            ("p_dri", self.p_dri),
            ("p_drj", self.p_drj),
        ];
        for (name, v) in cont {
            if !(0.0..1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.p_i + self.p_j > 1.0 + 1e-15 {
            return Err(invalid(format!(
                "p_i + p_j = {} exceeds 1",
                self.p_i + self.p_j
            )));
        }
        Ok(())
    }

    /// The same system with the roles of `i` and `j` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            p_i: self.p_j,
            p_j: self.p_i,
            p_di: self.p_dj,
            p_dj: self.p_di,
            p_ri: self.p_rj,
            p_rj: self.p_ri,
            p_dri: self.p_drj,
            p_drj: self.p_dri,
        }
    }
}

/// Expected durations of the two radios' traffic, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalTiming {
    pub ts: f64,
    pub frame_i: f64,
    pub idle_i: f64,
    pub frame_j: f64,
    pub idle_j: f64,
    /// Length of a response sent by `i`.
    pub resp_i: f64,
    /// Length of a response sent by `j`.
    pub resp_j: f64,
    pub p_ri: f64,
    pub p_rj: f64,
}

/// Maps expected durations onto chain probabilities.
///
/// `p = Ts / (E[frame] + E[idle])` and `p_d = 1 - Ts / (E[frame] - Ts)`;
/// response lengths map like frames.
pub fn mc_from_physical(t: &PhysicalTiming) -> Result<McParams> {
    if !(t.ts.is_finite() && t.ts > 0.0) {
        return Err(invalid(format!(
            "sample period must be positive, got {}",
            t.ts
        )));
    }
    for (name, v) in [("idle_i", t.idle_i), ("idle_j", t.idle_j)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let cont = |name: &str, len: f64| -> Result<f64> {
        if !(len.is_finite() && len >= 2.0 * t.ts * (1.0 - 1e-12)) {
            return Err(invalid(format!(
                "{name} = {len} s is shorter than two samples of {} s",
                t.ts
            )));
        }
        Ok((1.0 - t.ts / (len - t.ts)).max(0.0))
    };
    let params = McParams {
        p_i: t.ts / (t.frame_i + t.idle_i),
        p_j: t.ts / (t.frame_j + t.idle_j),
        p_di: cont("frame_i", t.frame_i)?,
        p_dj: cont("frame_j", t.frame_j)?,
        p_ri: t.p_ri,
        p_rj: t.p_rj,
        p_dri: cont("resp_i", t.resp_i)?,
        p_drj: cont("resp_j", t.resp_j)?,
    };
    params.validate()?;
    Ok(params)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum McState {
    /// Channel idle for more than three samples.
    ChInf,
    IsStart,
    I,
    ChI1,
    ChI2,
    ChI3,
    JRespStart,
    JResp,
    ChIJ1,
    ChIJ2,
    ChIJ3,
    JsStart,
    J,
    ChJ1,
    ChJ2,
    ChJ3,
    IRespStart,
    IResp,
    ChJI1,
    ChJI2,
    ChJI3,
}

/// Event pattern visible in one state: lags of the latest end event of
/// each radio within the last three samples, and the start indicators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Indicators {
    pub e_i: Option<u8>,
    pub e_j: Option<u8>,
    pub s_i: bool,
    pub s_j: bool,
}

impl McState {
    pub const ALL: [McState; NUM_STATES] = [
        McState::ChInf,
        McState::IsStart,
        McState::I,
        McState::ChI1,
        McState::ChI2,
        McState::ChI3,
        McState::JRespStart,
        McState::JResp,
        McState::ChIJ1,
        McState::ChIJ2,
        McState::ChIJ3,
        McState::JsStart,
        McState::J,
        McState::ChJ1,
        McState::ChJ2,
        McState::ChJ3,
        McState::IRespStart,
        McState::IResp,
        McState::ChJI1,
        McState::ChJI2,
        McState::ChJI3,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The mirror state under `i ↔ j`.
    pub fn swapped(self) -> Self {
        use McState::*;
        match self {
            ChInf => ChInf,
            IsStart => JsStart,
            I => J,
            ChI1 => ChJ1,
            ChI2 => ChJ2,
            ChI3 => ChJ3,
            JRespStart => IRespStart,
            JResp => IResp,
            ChIJ1 => ChJI1,
            ChIJ2 => ChJI2,
            ChIJ3 => ChJI3,
            JsStart => IsStart,
            J => I,
            ChJ1 => ChI1,
            ChJ2 => ChI2,
            ChJ3 => ChI3,
            IRespStart => JRespStart,
            IResp => JResp,
            ChJI1 => ChIJ1,
            ChJI2 => ChIJ2,
            ChJI3 => ChIJ3,
        }
    }

    /// `(i transmits, j transmits)`.
    pub fn transmitting(self) -> (bool, bool) {
        use McState::*;
        match self {
            IsStart | I | IRespStart | IResp => (true, false),
            JsStart | J | JRespStart | JResp => (false, true),
            _ => (false, false),
        }
    }

    pub fn indicators(self) -> Indicators {
        use McState::*;
        let none = Indicators {
            e_i: None,
            e_j: None,
            s_i: false,
            s_j: false,
        };
        match self {
            ChInf | I | J | JResp | IResp => none,
            IsStart => Indicators { s_i: true, ..none },
            JsStart => Indicators { s_j: true, ..none },
            ChI1 | ChJI1 => Indicators {
                e_i: Some(1),
                ..none
            },
            ChI2 | ChJI2 => Indicators {
                e_i: Some(2),
                ..none
            },
            ChI3 | ChJI3 => Indicators {
                e_i: Some(3),
                ..none
            },
            ChJ1 | ChIJ1 => Indicators {
                e_j: Some(1),
                ..none
            },
            ChJ2 | ChIJ2 => Indicators {
                e_j: Some(2),
                ..none
            },
            ChJ3 | ChIJ3 => Indicators {
                e_j: Some(3),
                ..none
            },
            JRespStart => Indicators {
                e_i: Some(3),
                s_j: true,
                ..none
            },
            IRespStart => Indicators {
                e_j: Some(3),
                s_i: true,
                ..none
            },
        }
    }

    /// Probability of staying put for one more sample.
    fn self_loop(self, p: &McParams) -> f64 {
        match self {
            McState::ChInf => 1.0 - p.p_i - p.p_j,
            McState::I => p.p_di,
            McState::J => p.p_dj,
            McState::JResp => p.p_drj,
            McState::IResp => p.p_dri,
            _ => 0.0,
        }
    }

    /// Successor distribution, excluding the self-loop.
    fn exits(self, p: &McParams) -> Vec<(McState, f64)> {
        use McState::*;
        let idle_exit = |rest: f64| vec![(IsStart, p.p_i), (JsStart, p.p_j), (ChInf, rest)];
        match self {
            ChInf => vec![(IsStart, p.p_i), (JsStart, p.p_j)],
            IsStart => vec![(I, 1.0)],
            I => vec![(ChI1, 1.0 - p.p_di)],
            ChI1 => vec![(ChI2, 1.0)],
            ChI2 => vec![(JRespStart, p.p_rj), (ChI3, 1.0 - p.p_rj)],
            ChI3 => vec![(ChInf, 1.0)],
            JRespStart => vec![(JResp, 1.0)],
            JResp => vec![(ChIJ1, 1.0 - p.p_drj)],
            ChIJ1 => vec![(ChIJ2, 1.0)],
            ChIJ2 => vec![(ChIJ3, 1.0)],
            ChIJ3 | ChJI3 => idle_exit(1.0 - p.p_i - p.p_j),
            JsStart => vec![(J, 1.0)],
            J => vec![(ChJ1, 1.0 - p.p_dj)],
            ChJ1 => vec![(ChJ2, 1.0)],
            ChJ2 => vec![(IRespStart, p.p_ri), (ChJ3, 1.0 - p.p_ri)],
            ChJ3 => vec![(ChInf, 1.0)],
            IRespStart => vec![(IResp, 1.0)],
            IResp => vec![(ChJI1, 1.0 - p.p_dri)],
            ChJI1 => vec![(ChJI2, 1.0)],
            ChJI2 => vec![(ChJI3, 1.0)],
        }
    }
}

pub fn transition_matrix(params: &McParams) -> Result<TransitionMatrix> {
    params.validate()?;
    let mut m = TransitionMatrix::zeros();
    for s in McState::ALL {
        m[(s.index(), s.index())] += s.self_loop(params);
        for (t, pr) in s.exits(params) {
            m[(s.index(), t.index())] += pr;
        }
    }
    Ok(m)
}

/// Stationary probability of each state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub probs: [f64; NUM_STATES],
}

impl SteadyState {
    pub fn get(&self, s: McState) -> f64 {
        self.probs[s.index()]
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Solves `πP = π`, `Σπ = 1` on the states reachable from the idle state.
pub fn steady_state_numeric(matrix: &TransitionMatrix) -> Result<SteadyState> {
    for r in 0..NUM_STATES {
        let row: f64 = matrix.row(r).iter().sum();
        if (row - 1.0).abs() > 1e-12 || matrix.row(r).iter().any(|&v| v < 0.0) {
            return Err(invalid(format!(
                "row {r} is not a probability vector (sum {row})"
            )));
        }
    }
    let mut seen = [false; NUM_STATES];
    let mut queue = VecDeque::from([McState::ChInf.index()]);
    seen[McState::ChInf.index()] = true;
    while let Some(r) = queue.pop_front() {
        for c in 0..NUM_STATES {
            if matrix[(r, c)] > 0.0 && !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    let reach: Vec<usize> = (0..NUM_STATES).filter(|&s| seen[s]).collect();
    let k = reach.len();

    let mut a = DMatrix::<f64>::zeros(k, k);
    for (row, &to) in reach.iter().enumerate() {
        for (col, &from) in reach.iter().enumerate() {
            a[(row, col)] = matrix[(from, to)] - if from == to { 1.0 } else { 0.0 };
        }
    }
    for col in 0..k {
        a[(k - 1, col)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k);
    rhs[k - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Domain("stationary system is singular".into()))?;

    let mut probs = [0.0; NUM_STATES];
    for (idx, &s) in reach.iter().enumerate() {
        probs[s] = sol[idx].max(0.0);
    }
    Ok(SteadyState { probs })
}

/// Normalizer of the closed-form steady state.
pub fn rho(p: &McParams) -> f64 {
    let side = |ps: f64, pr: f64, pd: f64, pdr: f64| {
        4.0 * ps + 2.0 * ps * pr + ps / (1.0 - pd) + pr * ps / (1.0 - pdr)
    };
    1.0 + side(p.p_i, p.p_rj, p.p_di, p.p_drj) + side(p.p_j, p.p_ri, p.p_dj, p.p_dri)
}

/// Closed-form steady state in terms of `π_is = p_i/ρ` and `π_js = p_j/ρ`.
pub fn steady_state_closed(params: &McParams) -> Result<SteadyState> {
    params.validate()?;
    use McState::*;
    let r = rho(params);
    let x = params.p_i / r;
    let y = params.p_j / r;
    let (a, b) = (params.p_rj, params.p_ri);
    let mut probs = [0.0; NUM_STATES];
    let mut put = |s: McState, v: f64| probs[s.index()] = v;
    put(ChInf, (1.0 - a * params.p_i - b * params.p_j) / r);
    put(IsStart, x);
    put(I, x / (1.0 - params.p_di));
    put(ChI1, x);
    put(ChI2, x);
    put(ChI3, (1.0 - a) * x);
    put(JRespStart, a * x);
    put(JResp, a * x / (1.0 - params.p_drj));
    put(ChIJ1, a * x);
    put(ChIJ2, a * x);
    put(ChIJ3, a * x);
    put(JsStart, y);
    put(J, y / (1.0 - params.p_dj));
    put(ChJ1, y);
    put(ChJ2, y);
    put(ChJ3, (1.0 - b) * y);
    put(IRespStart, b * y);
    put(IResp, b * y / (1.0 - params.p_dri));
    put(ChJI1, b * y);
    put(ChJI2, b * y);
    put(ChJI3, b * y);
    Ok(SteadyState { probs })
}

/// Exact joint PMF of `(E_i^(τ), E_j^(τ), S_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactPmf {
    tau: usize,
    probs: BTreeMap<(WindowKey, bool), f64>,
}

impl ExactPmf {
    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn probs(&self) -> &BTreeMap<(WindowKey, bool), f64> {
        &self.probs
    }

    pub fn probability(&self, key: WindowKey, s: bool) -> f64 {
        self.probs.get(&(key, s)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn marginalize(&self, tau: usize) -> Result<Self> {
        if tau == 0 || tau > self.tau {
            return Err(invalid(format!(
                "cannot marginalize a lag-{} PMF to lag {tau}",
                self.tau
            )));
        }
        let mut probs = BTreeMap::new();
        for (&(k, s), &p) in &self.probs {
            *probs.entry((k.truncate(tau), s)).or_insert(0.0) += p;
        }
        Ok(Self { tau, probs })
    }

    /// Transfer entropy of this PMF at lag `tau`, by direct summation.
    pub fn ate(&self, tau: usize) -> Result<f64> {
        if tau == 0 || tau > self.tau {
            return Err(invalid(format!("lag {tau} outside 1..={}", self.tau)));
        }
        Ok(ate_from_masses(
            self.probs.iter().map(|(&(k, s), &p)| (k, s, p)),
            tau,
        ))
    }
}

fn pos(lag: Option<u8>) -> EventPos {
    lag.map_or(EventPos::Quiet, |p| EventPos::At(u16::from(p)))
}

/// Lag-3 PMF for the `i → j` test, marginalized over `S_i`.
///
/// Built from the per-state indicator rows, so cells collect exactly the
/// state sums of the lag-3 table, e.g. `(E_i at 3, S_j = 1)` holds only
/// the response-start state of `j`.
pub fn joint_pmf_lag3(ss: &SteadyState) -> ExactPmf {
    let mut probs = BTreeMap::new();
    for s in McState::ALL {
        let ind = s.indicators();
        let key = WindowKey::new(pos(ind.e_i), pos(ind.e_j));
        *probs.entry((key, ind.s_j)).or_insert(0.0) += ss.get(s);
    }
    ExactPmf { tau: 3, probs }
}

/// `m ln(ratio)` with `0 ln(·) = 0`.
fn xlog(m: f64, ratio: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else {
        m * ratio.ln()
    }
}

/// Closed-form `A(τ) = I(S_j ; E_i^(τ) | E_j^(τ))` for `τ ∈ {1, 2, 3}`.
///
/// With `x = p_i/ρ`, `y = p_j/ρ`, `a = p_rj`, `b = p_ri`:
/// every lag contributes `q = y + a x` of `j`-end mass and `g = x + b y`
/// of `i`-end mass with no `j` end in the window, so that
/// `P_n = P(E_j = 0) = 1 - τ q`, `P(S_j = 1, E_j = 0) = q` and
/// `Q_0 = P(S_j = 0, E_j = 0) = P_n - q`. For `τ < 3` the response start
/// still lies outside the window and
///
/// `A = c ln(c P_n / (r Q_0)) + q ln(P_n / r) + τ g ln(P_n / Q_0)`
///
/// with `r = P_n - τ g` and `c = r - q`. At `τ = 3` the response start
/// moves into the `E_i = 3` cell, which splits into `u = (1-a) x + b y`
/// silent samples and `a x` response starts:
///
/// `A = c ln(c P_n / (r Q_0)) + y ln(y P_n / (r q)) + u ln(u P_n / (g Q_0))
///      + a x ln(a x P_n / (g q)) + 2 g ln(P_n / Q_0)`
///
/// with `r = P_n - 3 g` and `c = r - y`.
pub fn ate_closed(params: &McParams, tau: usize) -> Result<f64> {
    params.validate()?;
    if !(1..=3).contains(&tau) {
        return Err(invalid(format!("closed form covers lags 1..=3, got {tau}")));
    }
    let r0 = rho(params);
    let x = params.p_i / r0;
    let y = params.p_j / r0;
    let (a, b) = (params.p_rj, params.p_ri);
    let t = tau as f64;
    let q = y + a * x;
    let g = x + b * y;
    let pn = 1.0 - t * q;
    let q0 = pn - q;
    let out = if tau < 3 {
        let r = pn - t * g;
        let c = r - q;
        xlog(c, c * pn / (r * q0)) + xlog(q, pn / r) + t * xlog(g, pn / q0)
    } else {
        let r = pn - 3.0 * g;
        let c = r - y;
        let u = (1.0 - a) * x + b * y;
        let ax = a * x;
        xlog(c, c * pn / (r * q0))
            + xlog(y, y * pn / (r * q))
            + xlog(u, u * pn / (g * q0))
            + xlog(ax, ax * pn / (g * q))
            + 2.0 * xlog(g, pn / q0)
    };
    Ok(out.max(0.0))
}

/// Run-length encoded state path `(state, samples)` of length `n`.
pub fn chain_segments(params: &McParams, n: u64, seed: u64) -> Result<Vec<(McState, u64)>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut state = McState::ChInf;
    let mut t = 0u64;
    while t < n {
        let stay = state.self_loop(params);
        let len = if stay <= 0.0 {
            1
        } else if stay >= 1.0 {
            n - t
        } else {
            let leave = Geometric::new(1.0 - stay).map_err(|e| invalid(e.to_string()))?;
            1u64.saturating_add(leave.sample(&mut rng))
        };
        let len = len.min(n - t);
        out.push((state, len));
        t += len;
        if t >= n {
            break;
        }
        let exits = state.exits(params);
        let mass: f64 = exits.iter().map(|&(_, p)| p).sum();
        let mut u = rng.random::<f64>() * mass;
        let mut next = exits.last().map_or(McState::ChInf, |&(s, _)| s);
        for &(s, p) in &exits {
            if u < p {
                next = s;
                break;
            }
            u -= p;
        }
        state = next;
    }
    Ok(out)
}

/// Samples the chain from the idle state and records both radios.
pub fn simulate_chain(params: &McParams, n: u64, seed: u64, ts: f64) -> Result<ActivityTrace> {
    if n == 0 {
        return Err(invalid("chain length must be at least 1"));
    }
    let segments = chain_segments(params, n, seed)?;
    let mut radios: [Vec<Interval>; 2] = [Vec::new(), Vec::new()];
    let mut t = 0u64;
    for (state, len) in segments {
        let (ai, aj) = state.transmitting();
        for (r, active) in [(0, ai), (1, aj)] {
            if active {
                match radios[r].last_mut() {
                    Some(last) if last.end == t => last.end = t + len,
                    _ => radios[r].push(Interval::new(t, t + len)),
                }
            }
        }
        t += len;
    }
    let [ri, rj] = radios;
    ActivityTrace::new(ts, n, vec![ri, rj])
}
