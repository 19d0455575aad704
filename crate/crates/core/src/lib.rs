//! Decision-directed OFDM channel tracking over time-varying Rayleigh fading.
//!
//! [`estimators::Rddce`] selects reliable subcarriers from a decision-directed
//! preliminary estimate, forms random subcarrier groups, estimates a denoised
//! impulse response per group through the inverse of a Vandermonde Fourier
//! submatrix, and fuses the group observations with a 1-mean consensus.
//! [`sim`] runs seeded Monte-Carlo link simulations against four baselines.

pub mod channel;
pub mod estimators;
pub mod numkernels;
pub mod phy;
pub mod rng;
pub mod sim;

pub use channel::{Cfr, Cir, ProfileName, TapProfile};
pub use estimators::{Method, Metric, RddceConfig};
pub use sim::{run_episode, run_monte_carlo, scatter_experiment, sweep, SimConfig, SimError};
