//! Scoring and seeded experiment sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atelnet::{infer_topology, AtelnetParams, TopologyEstimate};
use crate::baselines::{
    fusion_window_fits, hard_from_fits, linear_asym_topology, soft_from_fits, FusionParams,
};
use crate::error::{invalid, Error, Result};
use crate::netsim::{make_scenario, simulate_network, Scenario, ScenarioKnobs};
use crate::report::{schema_line, ROC_SCHEMA, SUMMARY_SCHEMA, TRIALS_SCHEMA};
use crate::trace::{ActivityTrace, LinkMatrix};

/// Undirected comparison of an estimate against ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Found true pairs over true pairs; 1 when there are no true pairs.
    pub detected_fraction: f64,
    /// Detected pairs absent from the truth.
    pub extra_links: usize,
    pub true_links: usize,
    pub detected_links: usize,
}

pub fn score_topology(estimate: &LinkMatrix, truth: &LinkMatrix) -> Result<ScoreReport> {
    if estimate.num_radios() != truth.num_radios() {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} radios, truth {}",
            estimate.num_radios(),
            truth.num_radios()
        )));
    }
    let est = estimate.symmetrized();
    let tru = truth.symmetrized();
    let true_pairs = truth.undirected_pairs();
    let found = true_pairs.iter().filter(|&&(i, j)| est.get(i, j)).count();
    let detected = estimate.undirected_pairs();
    let extra = detected.iter().filter(|&&(i, j)| !tru.get(i, j)).count();
    Ok(ScoreReport {
        detected_fraction: if true_pairs.is_empty() {
            1.0
        } else {
            found as f64 / true_pairs.len() as f64
        },
        extra_links: extra,
        true_links: true_pairs.len(),
        detected_links: detected.len(),
    })
}

/// Area under the ROC curve: the Mann–Whitney probability that an
/// alternate statistic exceeds a null one, ties counting half.
pub fn auc(null: &[f64], alt: &[f64]) -> Result<f64> {
    if null.is_empty() || alt.is_empty() {
        return Err(invalid("AUC needs samples under both hypotheses"));
    }
    if null.iter().chain(alt).any(|v| v.is_nan()) {
        return Err(invalid("AUC samples contain NaN"));
    }
    let mut all: Vec<(f64, bool)> = null
        .iter()
        .map(|&v| (v, false))
        .chain(alt.iter().map(|&v| (v, true)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < all.len() {
        let mut end = k;
        while end + 1 < all.len() && all[end + 1].0 == all[k].0 {
            end += 1;
        }
        let mid_rank = (k + end) as f64 / 2.0 + 1.0;
        rank_sum += all[k..=end].iter().filter(|e| e.1).count() as f64 * mid_rank;
        k = end + 1;
    }
    let (n0, n1) = (null.len() as f64, alt.len() as f64);
    Ok((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n0 * n1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Atelnet,
    #[serde(alias = "linear_asym")]
    Linear,
    Hard,
    Soft,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Atelnet, Method::Linear, Method::Hard, Method::Soft];

    pub fn name(self) -> &'static str {
        match self {
            Method::Atelnet => "atelnet",
            Method::Linear => "linear",
            Method::Hard => "hard",
            Method::Soft => "soft",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "atelnet" => Ok(Method::Atelnet),
            "linear" | "linear_asym" => Ok(Method::Linear),
            "hard" => Ok(Method::Hard),
            "soft" => Ok(Method::Soft),
            other => Err(invalid(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings for every method; `p_fa` is shared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodParams {
    pub p_fa: f64,
    pub alpha: f64,
    pub tau_max: usize,
    pub linear_tau: usize,
    pub fusion_window_s: f64,
    pub fusion_tau: usize,
    pub fusion_period_s: f64,
}

impl Default for MethodParams {
    fn default() -> Self {
        let a = AtelnetParams::default();
        let f = FusionParams::default();
        Self {
            p_fa: a.p_fa,
            alpha: a.alpha,
            tau_max: a.tau_max,
            linear_tau: 3,
            fusion_window_s: f.window_s,
            fusion_tau: f.tau,
            fusion_period_s: f.period_s,
        }
    }
}

impl MethodParams {
    pub fn atelnet(&self) -> AtelnetParams {
        AtelnetParams {
            tau_max: self.tau_max,
            alpha: self.alpha,
            p_fa: self.p_fa,
        }
    }

    pub fn fusion(&self) -> FusionParams {
        FusionParams {
            window_s: self.fusion_window_s,
            tau: self.fusion_tau,
            p_fa: self.p_fa,
            period_s: self.fusion_period_s,
        }
    }
}

pub fn run_method(
    method: Method,
    trace: &ActivityTrace,
    params: &MethodParams,
) -> Result<TopologyEstimate> {
    match method {
        Method::Atelnet => infer_topology(trace, &params.atelnet()),
        Method::Linear => linear_asym_topology(trace, params.linear_tau, params.p_fa),
        Method::Hard => hard_from_fits(&fusion_window_fits(trace, &params.fusion())?, params.p_fa),
        Method::Soft => soft_from_fits(&fusion_window_fits(trace, &params.fusion())?),
    }
}

/// Runs several methods on one trace; hard and soft fusion share their
/// window fits.
pub fn run_methods(
    methods: &[Method],
    trace: &ActivityTrace,
    params: &MethodParams,
) -> Vec<Result<TopologyEstimate>> {
    let needs_fits = methods
        .iter()
        .any(|m| matches!(m, Method::Hard | Method::Soft));
    let fits = needs_fits.then(|| fusion_window_fits(trace, &params.fusion()));
    methods
        .iter()
        .map(|&m| match (m, &fits) {
            (Method::Hard, Some(Ok(wf))) => hard_from_fits(wf, params.p_fa),
            (Method::Soft, Some(Ok(wf))) => soft_from_fits(wf),
            (Method::Hard | Method::Soft, Some(Err(e))) => Err(clone_error(e)),
            _ => run_method(m, trace, params),
        })
        .collect()
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::TraceTooShort(s) => Error::TraceTooShort(s.clone()),
        other => Error::InvalidParameter(other.to_string()),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Detect,
    /// Dump per-trial statistics of one pair under both hypotheses.
    Roc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub durations_s: Vec<f64>,
    /// Network sizes; empty keeps the scenario knob.
    pub stas_per_ap: Vec<usize>,
    pub p_fa: Vec<f64>,
    pub alpha: Vec<f64>,
    pub tau_max: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        let m = MethodParams::default();
        Self {
            durations_s: vec![1.0],
            stas_per_ap: Vec::new(),
            p_fa: vec![m.p_fa],
            alpha: vec![m.alpha],
            tau_max: vec![m.tau_max],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub mode: Mode,
    pub scenario: Scenario,
    pub methods: Vec<Method>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub knobs: ScenarioKnobs,
    #[serde(default)]
    pub params: MethodParams,
}

fn default_name() -> String {
    "experiment".into()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if self.methods.is_empty() || self.trials == 0 {
            return Err(Error::Config(
                "need at least one method and one trial".into(),
            ));
        }
        if g.durations_s.is_empty()
            || g.p_fa.is_empty()
            || g.alpha.is_empty()
            || g.tau_max.is_empty()
        {
            return Err(Error::Config(
                "every grid axis needs at least one value".into(),
            ));
        }
        if g.durations_s.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Config("durations must be positive".into()));
        }
        Ok(())
    }

    /// Every grid point in output order.
    pub fn points(&self) -> Vec<GridPoint> {
        let g = &self.grid;
        let sizes = if g.stas_per_ap.is_empty() {
            vec![self.knobs.stas_per_ap]
        } else {
            g.stas_per_ap.clone()
        };
        let mut out = Vec::new();
        for &duration_s in &g.durations_s {
            for &stas_per_ap in &sizes {
                for &p_fa in &g.p_fa {
                    for &alpha in &g.alpha {
                        for &tau_max in &g.tau_max {
                            out.push(GridPoint {
                                duration_s,
                                stas_per_ap,
                                p_fa,
                                alpha,
                                tau_max,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_experiment_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    parse_experiment_config(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub duration_s: f64,
    pub stas_per_ap: usize,
    pub p_fa: f64,
    pub alpha: f64,
    pub tau_max: usize,
}

impl GridPoint {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.duration_s, self.stas_per_ap, self.p_fa, self.alpha, self.tau_max
        )
    }
}

const POINT_COLUMNS: &str = "duration_s,stas_per_ap,p_fa,alpha,tau_max";

/// Seed of one trial; methods within a trial share it.
pub fn trial_seed(base: u64, point: usize, trial: usize) -> u64 {
    base.wrapping_add((point as u64) << 32)
        .wrapping_add(trial as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: GridPoint,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    /// `None` when the method could not run on this trace.
    pub score: Option<ScoreReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub point: GridPoint,
    pub method: Method,
    pub trials: usize,
    pub mean_detected_fraction: f64,
    pub ci95_detected_fraction: f64,
    pub mean_extra_links: f64,
    pub ci95_extra_links: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocRecord {
    pub point: GridPoint,
    pub method: Method,
    /// `false` for the null hypothesis.
    pub linked: bool,
    pub trial: usize,
    pub seed: u64,
    pub i: usize,
    pub j: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub decision: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentOutput {
    pub files: Vec<PathBuf>,
    pub trials: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub roc: Vec<RocRecord>,
}

fn point_params(cfg: &ExperimentConfig, p: &GridPoint) -> MethodParams {
    MethodParams {
        p_fa: p.p_fa,
        alpha: p.alpha,
        tau_max: p.tau_max,
        ..cfg.params
    }
}

fn point_knobs(cfg: &ExperimentConfig, p: &GridPoint) -> ScenarioKnobs {
    ScenarioKnobs {
        stas_per_ap: p.stas_per_ap,
        ..cfg.knobs.clone()
    }
}

fn detect_trial(
    cfg: &ExperimentConfig,
    pi: usize,
    p: &GridPoint,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let seed = trial_seed(cfg.seed, pi, trial);
    let net = make_scenario(cfg.scenario, &point_knobs(cfg, p))?;
    let sim = simulate_network(&net, p.duration_s, seed)?;
    let params = point_params(cfg, p);
    let results = run_methods(&cfg.methods, &sim.trace, &params);
    cfg.methods
        .iter()
        .zip(results)
        .map(|(&method, res)| {
            let (score, error) = match res {
                Ok(est) => (Some(score_topology(&est.links, &sim.truth)?), None),
                Err(Error::TraceTooShort(msg)) => (None, Some(msg)),
                Err(e) => return Err(e),
            };
            Ok(TrialRecord {
                point: *p,
                method,
                trial,
                seed,
                score,
                error,
            })
        })
        .collect()
}

fn roc_trial(
    cfg: &ExperimentConfig,
    pi: usize,
    p: &GridPoint,
    trial: usize,
) -> Result<Vec<RocRecord>> {
    let seed = trial_seed(cfg.seed, pi, trial);
    let params = point_params(cfg, p);
    let alt_knobs = point_knobs(cfg, p);
    let null_knobs = ScenarioKnobs {
        response_prob: 0.0,
        ..alt_knobs.clone()
    };
    let alt_cfg = make_scenario(cfg.scenario, &alt_knobs)?;
    let (i, j) = *crate::netsim::truth_between(&alt_cfg, 0.0, p.duration_s)?
        .links()
        .first()
        .ok_or_else(|| Error::Config("roc mode needs a scenario with at least one link".into()))?;
    let mut out = Vec::new();
    for (linked, knobs) in [(false, null_knobs), (true, alt_knobs)] {
        let net = make_scenario(cfg.scenario, &knobs)?;
        let sim = simulate_network(&net, p.duration_s, seed)?;
        for (&method, res) in cfg
            .methods
            .iter()
            .zip(run_methods(&cfg.methods, &sim.trace, &params))
        {
            let est = res?;
            let d = est
                .detail(i, j)
                .ok_or_else(|| invalid("missing pair decision"))?;
            out.push(RocRecord {
                point: *p,
                method,
                linked,
                trial,
                seed,
                i,
                j,
                statistic: d.statistic,
                threshold: d.threshold,
                decision: d.decision,
            });
        }
    }
    Ok(out)
}

fn mean_ci(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

pub fn summarize(
    records: &[TrialRecord],
    methods: &[Method],
    points: &[GridPoint],
) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for p in points {
        for &method in methods {
            let scores: Vec<&ScoreReport> = records
                .iter()
                .filter(|r| r.point == *p && r.method == method)
                .filter_map(|r| r.score.as_ref())
                .collect();
            let frac: Vec<f64> = scores.iter().map(|s| s.detected_fraction).collect();
            let extra: Vec<f64> = scores.iter().map(|s| s.extra_links as f64).collect();
            let (mf, cf) = mean_ci(&frac);
            let (me, ce) = mean_ci(&extra);
            out.push(SummaryRow {
                point: *p,
                method,
                trials: scores.len(),
                mean_detected_fraction: mf,
                ci95_detected_fraction: cf,
                mean_extra_links: me,
                ci95_extra_links: ce,
            });
        }
    }
    out
}

fn create(
    dir: &Path,
    name: &str,
    schema: &str,
    columns: &str,
) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    w.write_all(schema_line(schema).as_bytes())?;
    writeln!(w, "{columns}")?;
    Ok((path, w))
}

/// Runs the sweep, writing CSVs into `out_dir`. Trials of a grid point run
/// in parallel; rows are written in grid, trial, method order and flushed
/// after every grid point.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let points = cfg.points();
    let mut out = ExperimentOutput::default();
    match cfg.mode {
        Mode::Detect => {
            let (path, mut w) = create(
                out_dir,
                "trials.csv",
                TRIALS_SCHEMA,
                &format!("{POINT_COLUMNS},method,trial,seed,detected_fraction,extra_links,true_links,detected_links,error"),
            )?;
            out.files.push(path);
            for (pi, p) in points.iter().enumerate() {
                let rows: Vec<Vec<TrialRecord>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| detect_trial(cfg, pi, p, t))
                    .collect::<Result<_>>()?;
                for r in rows.into_iter().flatten() {
                    let cells = match &r.score {
                        Some(s) => format!(
                            "{},{},{},{},",
                            s.detected_fraction, s.extra_links, s.true_links, s.detected_links
                        ),
                        None => {
                            format!(",,,,{}", r.error.as_deref().unwrap_or("").replace(',', ";"))
                        }
                    };
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        p.csv(),
                        r.method,
                        r.trial,
                        r.seed,
                        cells
                    )?;
                    out.trials.push(r);
                }
                w.flush()?;
            }
            out.summary = summarize(&out.trials, &cfg.methods, &points);
            let (path, mut w) = create(
                out_dir,
                "summary.csv",
                SUMMARY_SCHEMA,
                &format!("{POINT_COLUMNS},method,trials,mean_detected_fraction,ci95_detected_fraction,mean_extra_links,ci95_extra_links"),
            )?;
            for s in &out.summary {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    s.point.csv(),
                    s.method,
                    s.trials,
                    s.mean_detected_fraction,
                    s.ci95_detected_fraction,
                    s.mean_extra_links,
                    s.ci95_extra_links
                )?;
            }
            w.flush()?;
            out.files.push(path);
        }
        Mode::Roc => {
            let (path, mut w) = create(
                out_dir,
                "roc.csv",
                ROC_SCHEMA,
                &format!(
                    "{POINT_COLUMNS},method,hypothesis,trial,seed,i,j,statistic,threshold,decision"
                ),
            )?;
            out.files.push(path);
            for (pi, p) in points.iter().enumerate() {
                let rows: Vec<Vec<RocRecord>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| roc_trial(cfg, pi, p, t))
                    .collect::<Result<_>>()?;
                for r in rows.into_iter().flatten() {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{:e},{:e},{}",
                        p.csv(),
                        r.method,
                        if r.linked { "alt" } else { "null" },
                        r.trial,
                        r.seed,
                        r.i + 1,
                        r.j + 1,
                        r.statistic,
                        r.threshold,
                        u8::from(r.decision)
                    )?;
                    out.roc.push(r);
                }
                w.flush()?;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        let truth = LinkMatrix::from_pairs(4, [(0, 1), (2, 3)]).unwrap();
        let s = score_topology(&truth, &truth).unwrap();
        assert_eq!((s.detected_fraction, s.extra_links), (1.0, 0));
        let s = score_topology(&LinkMatrix::new(4), &truth).unwrap();
        assert_eq!((s.detected_fraction, s.extra_links), (0.0, 0));
        let reversed = LinkMatrix::from_pairs(4, [(1, 0), (3, 2)]).unwrap();
        let s = score_topology(&reversed, &truth).unwrap();
        assert_eq!((s.detected_fraction, s.extra_links), (1.0, 0));
        let extra = LinkMatrix::from_pairs(4, [(1, 0), (0, 2), (2, 0), (1, 3)]).unwrap();
        let s = score_topology(&extra, &truth).unwrap();
        assert_eq!((s.detected_fraction, s.extra_links), (0.5, 2));
        assert!(score_topology(&LinkMatrix::new(3), &truth).is_err());
        let s = score_topology(&extra, &LinkMatrix::new(4)).unwrap();
        assert_eq!((s.detected_fraction, s.extra_links), (1.0, 3));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(auc(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(auc(&[1.0, 1.0], &[1.0]).unwrap(), 0.5);
        let brute = |n: &[f64], a: &[f64]| {
            let mut s = 0.0;
            for x in n {
                for y in a {
                    s += if y > x {
                        1.0
                    } else if y == x {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
            s / (n.len() * a.len()) as f64
        };
        let n = [0.3, 1.0, 1.0, 2.5, 0.1, 4.0];
        let a = [1.0, 2.0, 2.5, 3.0, 0.2];
        assert!((auc(&n, &a).unwrap() - brute(&n, &a)).abs() < 1e-15);
        assert!(auc(&[], &[1.0]).is_err());
    }

    #[test]
    fn config_parsing() {
        let cfg = parse_experiment_config(
            r#"
            scenario = "infra2ap"
            methods = ["atelnet", "linear_asym"]
            trials = 2
            [grid]
            durations_s = [0.06, 0.6]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.methods, vec![Method::Atelnet, Method::Linear]);
        assert_eq!(cfg.points().len(), 2);
        assert!(
            parse_experiment_config("scenario = \"infra2ap\"\nmethods = []\ntrials = 1\n").is_err()
        );
        assert!(parse_experiment_config(
            "scenario = \"infra2ap\"\nmethods = [\"atelnet\"]\ntrials = 1\nbogus = 3\n"
        )
        .is_err());
    }
}
