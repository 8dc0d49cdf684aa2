//! Monte Carlo estimators for doubly reflected spectrally positive Lévy and
//! Markov additive surplus processes under barrier strategies.
//!
//! Every path draws from its own ChaCha stream (`seed`, path index), so
//! results do not depend on how paths are split across worker threads and
//! comparisons between strategies share random numbers path by path.

mod config;
mod dynamics;
mod exit;
mod npv;
mod regime;
mod rng;

pub use config::{SimConfig, SimError, SimEstimate};
pub use exit::{estimate_exit_identities, ExitEstimates};
pub use npv::simulate_aux_npv;
pub use regime::{estimate_value_bounds, simulate_regime_npv, ValueBounds};
pub use rng::PathRng;
