//! Controlled information fusion with Bayesian social sensors.
//!
//! A sequence of sensors each observe a binary state through a noisy channel,
//! fuse the observation with the public belief, and report a quantized
//! decision chosen to maximize a reward that includes an incentive paid by a
//! fusion center. The crate provides:
//!
//! - [`belief`]: two-state belief arithmetic, private Bayesian updates and the
//!   social learning filter driven by decisions.
//! - [`sensor`]: the sensor reward, its argmax decision rule, the incentive
//!   function and the herding/learning region partition it induces.
//! - [`solver`]: value iteration on a discretized belief grid for the fusion
//!   center's discounted incentive cost, threshold extraction, fixed-policy
//!   evaluation and the cost-of-consistency bound.
//! - [`simulate`]: seeded sample paths, sub-martingale and consistency
//!   statistics, Monte Carlo cost gaps and an exact enumeration oracle.
//! - [`cli`]: configuration and the experiment commands behind the
//!   `incentive-fusion` binary.

pub mod belief;
pub mod cli;
pub mod error;
pub mod sensor;
pub mod simulate;
pub mod solver;
pub mod stats;

pub use belief::{Belief, DecisionLikelihood, ObservationModel, Symbol};
pub use error::{FusionError, Result};
pub use sensor::{IncentiveCoefficients, Region, RewardParams, SocialSensor};
pub use solver::{BeliefGrid, FusionCostSpec, FusionProblem, SolveResult};
