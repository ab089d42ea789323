//! Build a trace by hand, derive its events, round-trip it through the
//! text format and resample it onto a coarser clock.

use linkscope::trace::{derive_events, format_trace, parse_trace, resample};
use linkscope::{ActivityTrace, EventKind, Interval};

fn main() -> linkscope::Result<()> {
    let trace = ActivityTrace::new(
        5e-6,
        40,
        vec![
            vec![Interval::new(2, 10), Interval::new(20, 24)],
            vec![Interval::new(12, 15), Interval::new(26, 28)],
        ],
    )?;
    for r in 0..trace.num_radios() {
        let s = derive_events(&trace, r, EventKind::Start)?;
        let e = derive_events(&trace, r, EventKind::End)?;
        println!(
            "radio {}: starts {:?} ends {:?} duty {:.3}",
            r + 1,
            s.samples,
            e.samples,
            trace.duty_cycle(r)?
        );
    }

    let text = format_trace(&trace);
    print!("{text}");
    assert_eq!(parse_trace(&text)?, trace);

    let coarse = resample(&trace, 20e-6)?;
    println!(
        "resampled: {} samples of {} s",
        coarse.num_samples(),
        coarse.sample_period_s()
    );
    for r in 0..coarse.num_radios() {
        println!("  radio {}: {:?}", r + 1, coarse.to_dense(r)?);
    }
    Ok(())
}
