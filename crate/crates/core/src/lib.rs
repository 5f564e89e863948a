//! Biased random walk on the random spanning tree of the ladder graph.
//!
//! * [`closed_form`]: speed, trap times, critical values and limits.
//! * [`tree`]: block sampler, lazily extended windows, ray and traps.
//! * [`walk`]: the conductance-weighted walk and trap simulators.
//! * [`oracle`]: exact linear-algebra answers on finite networks.
//! * [`harness`]: Monte Carlo experiments with error bars.

pub mod closed_form;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod walk;

pub use closed_form::{ModelParams, TrapKind, TrapShape};
pub use error::{Error, Result};
