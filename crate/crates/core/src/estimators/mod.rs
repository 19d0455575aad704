//! Channel tracking methods sharing one per-symbol stepping interface.
//!
//! Every decision-directed method starts from the preamble estimate and, per
//! OFDM symbol, equalizes with the previous estimate, hard-decides, and
//! re-estimates. They differ only in how the preliminary estimate is turned
//! into the next channel estimate.

mod baselines;
mod grouped;
mod rddce;
mod selection;

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Cfr;
use crate::numkernels::{Dft, NumError};
use crate::phy::{self, OfdmSymbol, PhyError};

pub use baselines::{Basic, Filtering, Ideal, Interpolation};
pub use grouped::{
    denoise_group, finalize_estimate, group_cir, one_mean_filter, GroupObservation, GroupTransform,
};
pub use rddce::{estimate_from_groups, Rddce};
pub use selection::{
    draw_group, metric_alpha, metric_m, partition_groups, select_channels, Order,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("selection starved: {available} eligible subcarriers, {needed} required")]
    Starvation { available: usize, needed: usize },
    #[error("invalid estimator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Basic,
    Filtering,
    Interpolation,
    Rddce,
    Ideal,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Basic,
        Method::Filtering,
        Method::Interpolation,
        Method::Rddce,
        Method::Ideal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Basic => "basic",
            Method::Filtering => "filtering",
            Method::Interpolation => "interpolation",
            Method::Rddce => "rddce",
            Method::Ideal => "ideal",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Reliability score used to pick subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    /// Relative change against the previous final estimate; smallest wins.
    #[serde(rename = "M")]
    M,
    /// Magnitude of the preliminary estimate; largest wins.
    #[serde(rename = "alpha")]
    Alpha,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::M => "M",
            Metric::Alpha => "alpha",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m" => Ok(Metric::M),
            "alpha" => Ok(Metric::Alpha),
            _ => Err(format!("unknown metric `{s}` (expected M or alpha)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RddceConfig {
    /// Subcarriers kept by the selection step.
    pub n0: usize,
    /// Number of groups.
    pub n1: usize,
    /// Subcarriers per group; must equal `n_taps + n_w`.
    pub n2: usize,
    /// Delay window in samples.
    pub n_taps: usize,
    /// Taps beyond the delay window used to observe noise.
    pub n_w: usize,
    pub n_iter: usize,
    /// Observations kept per 1-mean iteration.
    pub k_keep: usize,
    pub metric: Metric,
    /// Redraws allowed for an ill-conditioned group before it is dropped.
    pub max_redraws: usize,
    /// Re-decide the reported symbols from the refined estimate.
    pub redecide: bool,
}

impl Default for RddceConfig {
    fn default() -> Self {
        Self {
            n0: 100,
            n1: 15,
            n2: 20,
            n_taps: 11,
            n_w: 9,
            n_iter: 10,
            k_keep: 5,
            metric: Metric::M,
            max_redraws: 3,
            redecide: false,
        }
    }
}

impl RddceConfig {
    pub fn validate(&self, nc: usize) -> Result<(), EstimatorError> {
        let fail = |msg: String| Err(EstimatorError::Config(msg));
        if self.n_taps == 0 || self.n_w == 0 {
            return fail(format!(
                "n_taps ({}) and n_w ({}) must be positive",
                self.n_taps, self.n_w
            ));
        }
        if self.n2 != self.n_taps + self.n_w {
            return fail(format!(
                "n2 ({}) must equal n_taps + n_w ({} + {})",
                self.n2, self.n_taps, self.n_w
            ));
        }
        if !(self.n2 <= self.n0 && self.n0 <= nc) {
            return fail(format!(
                "need n2 <= n0 <= nc, got n2={} n0={} nc={nc}",
                self.n2, self.n0
            ));
        }
        if self.n1 == 0 {
            return fail("n1 must be at least 1".into());
        }
        if self.k_keep == 0 || self.k_keep > self.n1 {
            return fail(format!(
                "k_keep ({}) must be in 1..=n1 ({})",
                self.k_keep, self.n1
            ));
        }
        if self.n_iter == 0 {
            return fail("n_iter must be at least 1".into());
        }
        Ok(())
    }
}

/// What one estimator step hands back to the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub estimate: Cfr,
    pub decisions: OfdmSymbol,
    /// Groups discarded for conditioning or numerical failure.
    pub dropped_groups: usize,
}

pub trait ChannelEstimator: Send {
    /// Consumes one received symbol. `truth` is only read by the ideal
    /// receiver; `rng` only by methods with random group draws.
    fn step(
        &mut self,
        received: &[Complex64],
        truth: &Cfr,
        rng: &mut dyn RngCore,
    ) -> Result<StepOutput, EstimatorError>;

    fn current(&self) -> &Cfr;
}

/// Outcome of equalizing with the previous estimate and re-estimating.
#[derive(Debug, Clone, PartialEq)]
pub struct Preliminary {
    pub decisions: OfdmSymbol,
    pub h_tilde: Cfr,
    pub degenerate: Vec<usize>,
}

/// Equalize, hard-decide, least-squares estimate.
pub fn ddce_preliminary(received: &[Complex64], h_prev: &Cfr) -> Result<Preliminary, EstimatorError> {
    let eq = phy::equalize(received, h_prev)?;
    let decisions = phy::qpsk_hard_decision(&eq.symbols);
    let h_tilde = phy::ls_estimate(received, &decisions)?;
    Ok(Preliminary {
        decisions,
        h_tilde,
        degenerate: eq.degenerate,
    })
}

/// Classic DFT estimation over all subcarriers: IDFT, keep the delay window,
/// zero-pad, DFT.
pub fn dft_denoise(h: &Cfr, n_taps: usize, plan: &Dft) -> Result<Cfr, EstimatorError> {
    let taps = plan.inverse(h.gains())?;
    Ok(Cfr(plan.forward_padded(&taps[..n_taps])?))
}

/// Initial estimate from a known preamble symbol.
pub fn preamble_estimate(
    received: &[Complex64],
    preamble: &OfdmSymbol,
    n_taps: usize,
    plan: &Dft,
) -> Result<Cfr, EstimatorError> {
    let ls = phy::ls_estimate(received, preamble)?;
    dft_denoise(&ls, n_taps, plan)
}

/// Builds a boxed estimator for `method`, seeded with the initial estimate.
pub fn build_estimator(
    method: Method,
    initial: Cfr,
    rddce: &RddceConfig,
    gamma: f64,
) -> Result<Box<dyn ChannelEstimator>, EstimatorError> {
    let nc = initial.len();
    rddce.validate(nc)?;
    Ok(match method {
        Method::Basic => Box::new(Basic::new(initial)),
        Method::Filtering => Box::new(Filtering::new(initial, gamma)?),
        Method::Interpolation => Box::new(Interpolation::new(initial, rddce)?),
        Method::Rddce => Box::new(Rddce::new(initial, rddce.clone())?),
        Method::Ideal => Box::new(Ideal::new(initial)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        RddceConfig::default().validate(128).unwrap();
    }

    #[test]
    fn config_invariants() {
        let bad_n2 = RddceConfig {
            n2: 5,
            ..Default::default()
        };
        assert!(bad_n2.validate(128).unwrap_err().to_string().contains("n2"));
        let bad_n0 = RddceConfig {
            n0: 200,
            ..Default::default()
        };
        assert!(bad_n0.validate(128).is_err());
        let bad_keep = RddceConfig {
            k_keep: 16,
            ..Default::default()
        };
        assert!(bad_keep.validate(128).is_err());
        let bad_iter = RddceConfig {
            n_iter: 0,
            ..Default::default()
        };
        assert!(bad_iter.validate(128).is_err());
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("kalman".parse::<Method>().is_err());
    }
}
