//! Link topology inference for time-multiplexed radio networks.
//!
//! Given only binary on/off activity traces of co-located radios, the
//! ATELNeT detector decides for every ordered radio pair `(i, j)` whether
//! radio `j` systematically responds to radio `i`. It combines an
//! asymmetric transfer-entropy test with a response-time estimator, and
//! ships with the baselines it is usually compared against, an exact
//! Markov-chain model of a responding pair, a CSMA network simulator
//! that produces labelled traces, and an experiment harness.
//!
//! ```no_run
//! use linkscope::{atelnet, netsim};
//!
//! let cfg = netsim::make_scenario(netsim::Scenario::Infra2Ap, &netsim::ScenarioKnobs::default())?;
//! let sim = netsim::simulate_network(&cfg, 1.0, 7)?;
//! let est = atelnet::infer_topology(&sim.trace, &atelnet::AtelnetParams::default())?;
//! println!("{} directed links", est.links.count());
//! # Ok::<(), linkscope::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atelnet;
pub mod baselines;
pub mod distributions;
pub mod empirical;
mod error;
pub mod harness;
pub mod markov;
pub mod netsim;
pub mod report;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{ActivityTrace, EventKind, EventSeries, Interval, LinkMatrix};
