//! Risk-averse and distributionally robust sequential decision making on
//! finite probability spaces.
//!
//! * [`measures`] and [`risk`]: finite laws and the risk functionals on them.
//! * [`nested`]: nested risk on scenario trees.
//! * [`saa`]: empirical VaR, sample-size bounds and Monte Carlo coverage runs.
//! * [`soc`], [`mdp`]: dynamic programming for control models and decision processes.
//! * [`saddle`]: stagewise matrix games between controls and candidate measures.

pub mod dp;
pub mod error;
pub mod mdp;
pub mod measures;
pub mod nested;
pub mod risk;
pub mod saa;
pub mod saddle;
pub mod soc;

pub use dp::{DpSolution, Policy, ValueFunction, ValueIteration};
pub use error::{Error, Result};
pub use measures::{Categorical, FiniteDistribution, SampleBatch};
pub use nested::{ScenarioTree, StageRiskProfile};
pub use risk::RiskSpec;

/// Library version string.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
