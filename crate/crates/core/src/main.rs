use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use linkscope::atelnet::{decide, estimate_response_time, AtelnetParams};
use linkscope::empirical::{joint_counts, profile_of};
use linkscope::harness::{
    load_experiment_config, run_experiment, run_method, score_topology, Method, MethodParams,
};
use linkscope::markov::{self, McParams, McState, PhysicalTiming};
use linkscope::netsim::{self, Scenario, ScenarioKnobs};
use linkscope::report::{self, ANALYSIS_SCHEMA, PROFILE_SCHEMA, SCORE_SCHEMA, SIM_SCHEMA};
use linkscope::trace::{load_trace, parse_links, save_links, save_trace};
use linkscope::{Error, LinkMatrix, Result};

#[derive(Parser)]
#[command(
    name = "linkscope",
    version,
    about = "Infer radio link topology from activity traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled trace.
    Simulate {
        #[command(subcommand)]
        source: SimSource,
    },
    /// Test every ordered radio pair of a trace.
    Infer(InferArgs),
    /// Closed-form analysis.
    Analyze {
        #[command(subcommand)]
        model: AnalyzeModel,
    },
    /// Run a seeded sweep described by a TOML file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Compare an estimate with ground truth, ignoring direction.
    Score {
        /// Decision CSV or `.links` file.
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        radios: Option<usize>,
    },
    /// ATE profile and response-time estimate of one ordered pair.
    Profile {
        #[arg(long)]
        trace: PathBuf,
        /// 1-based causer id.
        #[arg(long)]
        i: usize,
        /// 1-based causee id.
        #[arg(long)]
        j: usize,
        #[arg(long, default_value_t = 10)]
        tau_max: usize,
        #[arg(long, default_value_t = 10.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-3)]
        pfa: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Subcommand)]
enum SimSource {
    /// Two-radio Markov chain.
    Mc {
        /// McParams or PhysicalTiming as inline JSON or a JSON file.
        #[arg(long)]
        params: String,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5e-6)]
        ts: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Carrier-sense network.
    Net {
        #[arg(long, default_value = "infra2ap")]
        scenario: Scenario,
        /// Full network config (TOML); overrides the scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario knobs (TOML).
        #[arg(long)]
        knobs: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum AnalyzeModel {
    Mc {
        /// McParams or PhysicalTiming as inline JSON or a JSON file.
        #[arg(long)]
        params: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long, default_value = "atelnet")]
    method: Method,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pfa: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    #[arg(long = "tau-max", default_value_t = 10)]
    tau_max: usize,
    /// Lag of the linear test.
    #[arg(long, default_value_t = 3)]
    tau: usize,
    #[arg(long, default_value_t = 60e-3)]
    window_s: f64,
    #[arg(long, default_value_t = 8)]
    fusion_tau: usize,
    #[arg(long, default_value_t = 20e-6)]
    fusion_period_s: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ParamsInput {
    Chain(McParams),
    Physical(PhysicalTiming),
}

fn read_params(arg: &str) -> Result<(McParams, Option<PhysicalTiming>)> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg)?
    };
    match serde_json::from_str::<ParamsInput>(&text)? {
        ParamsInput::Chain(p) => {
            p.validate()?;
            Ok((p, None))
        }
        ParamsInput::Physical(t) => Ok((markov::mc_from_physical(&t)?, Some(t))),
    }
}

fn links_path(trace: &Path) -> PathBuf {
    trace.with_extension("links")
}

fn stdout(text: &str) -> Result<()> {
    let mut lock = std::io::stdout().lock();
    match lock.write_all(text.as_bytes()).and_then(|()| lock.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => stdout(text),
    }
}

fn print_json(v: &Value) -> Result<()> {
    stdout(&(serde_json::to_string_pretty(v)? + "\n"))
}

fn max_id(text: &str) -> usize {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split(',').take(2))
        .filter_map(|f| f.trim().parse::<usize>().ok())
        .max()
        .unwrap_or(0)
}

fn read_estimate(text: &str, m: usize) -> Result<LinkMatrix> {
    if text
        .trim_start()
        .starts_with(report::schema_line(report::DECISIONS_SCHEMA).trim())
    {
        report::parse_decisions_csv(text, Some(m))
    } else {
        parse_links(text, m)
    }
}

fn simulate(source: SimSource) -> Result<()> {
    match source {
        SimSource::Mc {
            params,
            samples,
            seed,
            ts,
            out,
        } => {
            let (p, _) = read_params(&params)?;
            let trace = markov::simulate_chain(&p, samples, seed, ts)?;
            let mut truth = LinkMatrix::new(2);
            truth.set(0, 1, p.p_rj > 0.0)?;
            truth.set(1, 0, p.p_ri > 0.0)?;
            save_trace(&trace, &out)?;
            save_links(&truth, links_path(&out))?;
            print_json(&json!({
                "schema": SIM_SCHEMA,
                "source": "mc",
                "params": p,
                "seed": seed,
                "num_samples": samples,
                "trace": out,
                "links": links_path(&out),
                "duty_cycle": [trace.duty_cycle(0)?, trace.duty_cycle(1)?],
            }))
        }
        SimSource::Net {
            scenario,
            config,
            knobs,
            duration,
            seed,
            out,
        } => {
            let cfg = match (config, knobs) {
                (Some(path), _) => netsim::load_net_config(path)?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path)?;
                    let k: ScenarioKnobs =
                        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                    netsim::make_scenario(scenario, &k)?
                }
                (None, None) => netsim::make_scenario(scenario, &ScenarioKnobs::default())?,
            };
            let rep = netsim::simulate_network(&cfg, duration, seed)?;
            save_trace(&rep.trace, &out)?;
            save_links(&rep.truth, links_path(&out))?;
            print_json(&json!({
                "schema": SIM_SCHEMA,
                "source": "net",
                "radios": cfg.radios,
                "duration_s": duration,
                "seed": seed,
                "trace": out,
                "links": links_path(&out),
                "counters": rep.counters,
            }))
        }
    }
}

fn infer(a: InferArgs) -> Result<()> {
    let trace = load_trace(&a.trace)?;
    let params = MethodParams {
        p_fa: a.pfa,
        alpha: a.alpha,
        tau_max: a.tau_max,
        linear_tau: a.tau,
        fusion_window_s: a.window_s,
        fusion_tau: a.fusion_tau,
        fusion_period_s: a.fusion_period_s,
    };
    let est = run_method(a.method, &trace, &params)?;
    let text = match a.format {
        Format::Csv => report::decisions_csv(&est, a.method.name()),
        Format::Json => {
            let v = report::decisions_json(&est, a.method.name(), &params, &trace)?;
            serde_json::to_string_pretty(&v)? + "\n"
        }
    };
    emit(&text, a.out.as_deref())
}

fn analyze(model: AnalyzeModel) -> Result<()> {
    let AnalyzeModel::Mc { params } = model;
    let (p, physical) = read_params(&params)?;
    let ss = markov::steady_state_closed(&p)?;
    let states: serde_json::Map<String, Value> = McState::ALL
        .iter()
        .map(|&s| (format!("{s:?}"), json!(ss.get(s))))
        .collect();
    let mut ate = serde_json::Map::new();
    for tau in 1..=3 {
        ate.insert(tau.to_string(), json!(markov::ate_closed(&p, tau)?));
    }
    print_json(&json!({
        "schema": ANALYSIS_SCHEMA,
        "params": p,
        "physical": physical,
        "rho": markov::rho(&p),
        "steady_state": states,
        "steady_state_sum": ss.sum(),
        "ate_closed": ate,
    }))
}

fn score(est: &Path, truth: &Path, radios: Option<usize>) -> Result<()> {
    let est_text = std::fs::read_to_string(est)?;
    let truth_text = std::fs::read_to_string(truth)?;
    let m = radios.unwrap_or_else(|| max_id(&est_text).max(max_id(&truth_text)));
    let s = score_topology(&read_estimate(&est_text, m)?, &parse_links(&truth_text, m)?)?;
    print_json(&json!({
        "schema": SCORE_SCHEMA,
        "radios": m,
        "detected_fraction": s.detected_fraction,
        "extra_links": s.extra_links,
        "true_links": s.true_links,
        "detected_links": s.detected_links,
    }))
}

fn profile(trace: &Path, i: usize, j: usize, params: AtelnetParams, format: Format) -> Result<()> {
    params.validate()?;
    if i == 0 || j == 0 {
        return Err(Error::InvalidParameter("radio ids are 1-based".into()));
    }
    let tr = load_trace(trace)?;
    let pmf = joint_counts(&tr, i - 1, j - 1, params.tau_max)?;
    let prof = profile_of(&pmf);
    let tau_hat = estimate_response_time(&prof, params.alpha)?;
    let d = decide(&pmf, tr.num_samples(), i - 1, j - 1, &params)?;
    match format {
        Format::Csv => {
            let mut out = report::schema_line(PROFILE_SCHEMA);
            out.push_str("tau,ate,selected\n");
            for (tau, a) in &prof {
                out.push_str(&format!("{tau},{a:e},{}\n", u8::from(*tau == tau_hat)));
            }
            stdout(&out)
        }
        Format::Json => print_json(&json!({
            "schema": PROFILE_SCHEMA,
            "i": i,
            "j": j,
            "profile": prof.iter().map(|&(t, a)| json!({"tau": t, "ate": a})).collect::<Vec<_>>(),
            "tau_hat": tau_hat,
            "statistic": d.statistic,
            "threshold": d.threshold,
            "decision": d.decision,
            "overflow": d.overflow,
        })),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { source } => simulate(source),
        Command::Infer(a) => infer(a),
        Command::Analyze { model } => analyze(model),
        Command::Experiment { config, out } => {
            let cfg = load_experiment_config(&config)?;
            let res = run_experiment(&cfg, &out)?;
            print_json(&json!({
                "schema": "linkscope.experiment/v1",
                "name": cfg.name,
                "files": res.files,
            }))
        }
        Command::Score { est, truth, radios } => score(&est, &truth, radios),
        Command::Profile {
            trace,
            i,
            j,
            tau_max,
            alpha,
            pfa,
            format,
        } => profile(
            &trace,
            i,
            j,
            AtelnetParams {
                tau_max,
                alpha,
                p_fa: pfa,
            },
            format,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
