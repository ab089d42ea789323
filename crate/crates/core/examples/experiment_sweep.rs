//! A small seeded sweep over trace length, written as CSV files.

use linkscope::harness::{parse_experiment_config, run_experiment};

const CONFIG: &str = r#"
name = "length-sweep"
scenario = "infra2ap"
methods = ["atelnet", "linear"]
trials = 3
seed = 17

[grid]
durations_s = [0.25, 0.5]
"#;

fn main() -> linkscope::Result<()> {
    let cfg = parse_experiment_config(CONFIG)?;
    let dir = std::env::temp_dir().join("linkscope-sweep");
    let out = run_experiment(&cfg, &dir)?;
    for row in &out.summary {
        println!(
            "{:>5} s {:<8} detected {:.3} ± {:.3}, extra {:.2}",
            row.point.duration_s,
            row.method.name(),
            row.mean_detected_fraction,
            row.ci95_detected_fraction,
            row.mean_extra_links
        );
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
