//! Reference trackers the refined estimator is compared against.

use num_complex::Complex64;
use rand::RngCore;

use super::grouped::{finalize_estimate, GroupTransform};
use super::{ddce_preliminary, ChannelEstimator, EstimatorError, RddceConfig, StepOutput};
use crate::channel::Cfr;
use crate::numkernels::{Dft, IndexSet};
use crate::phy;

/// Plain DDCE: the preliminary estimate becomes the next estimate.
#[derive(Debug, Clone)]
pub struct Basic {
    h_prev: Cfr,
}

impl Basic {
    pub fn new(initial: Cfr) -> Self {
        Self { h_prev: initial }
    }
}

impl ChannelEstimator for Basic {
    fn step(&mut self, received: &[Complex64], _truth: &Cfr, _rng: &mut dyn RngCore) -> Result<StepOutput, EstimatorError> {
        let prelim = ddce_preliminary(received, &self.h_prev)?;
        self.h_prev = prelim.h_tilde.clone();
        Ok(StepOutput {
            estimate: prelim.h_tilde,
            decisions: prelim.decisions,
            dropped_groups: 0,
        })
    }

    fn current(&self) -> &Cfr {
        &self.h_prev
    }
}

/// DDCE with first-order recursive smoothing:
/// `H^_t = (1 - gamma) H^_{t-1} + gamma H~_t`.
#[derive(Debug, Clone)]
pub struct Filtering {
    h_prev: Cfr,
    gamma: f64,
}

impl Filtering {
    pub fn new(initial: Cfr, gamma: f64) -> Result<Self, EstimatorError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(EstimatorError::Config(format!("gamma must be in (0, 1], got {gamma}")));
        }
        Ok(Self { h_prev: initial, gamma })
    }
}

impl ChannelEstimator for Filtering {
    fn step(&mut self, received: &[Complex64], _truth: &Cfr, _rng: &mut dyn RngCore) -> Result<StepOutput, EstimatorError> {
        let prelim = ddce_preliminary(received, &self.h_prev)?;
        let g = self.gamma;
        let estimate = Cfr(self
            .h_prev
            .gains()
            .iter()
            .zip(prelim.h_tilde.gains())
            .map(|(&old, &new)| old * (1.0 - g) + new * g)
            .collect());
        self.h_prev = estimate.clone();
        Ok(StepOutput {
            estimate,
            decisions: prelim.decisions,
            dropped_groups: 0,
        })
    }

    fn current(&self) -> &Cfr {
        &self.h_prev
    }
}

/// DDCE on a fixed, evenly spread set of `n2` subcarriers; the rest of the
/// band is interpolated by DFT estimation over that set.
#[derive(Debug, Clone)]
pub struct Interpolation {
    h_prev: Cfr,
    transform: GroupTransform,
    n_taps: usize,
    plan: Dft,
}

impl Interpolation {
    pub fn new(initial: Cfr, cfg: &RddceConfig) -> Result<Self, EstimatorError> {
        let nc = initial.len();
        cfg.validate(nc)?;
        let transform = GroupTransform::new(Self::pilot_indices(nc, cfg.n2), nc)?;
        if !transform.is_well_conditioned() {
            return Err(EstimatorError::Config(format!(
                "{} interpolation subcarriers are ill-conditioned (residual {:e})",
                cfg.n2, transform.inverse.residual
            )));
        }
        Ok(Self {
            plan: Dft::new(nc)?,
            h_prev: initial,
            transform,
            n_taps: cfg.n_taps,
        })
    }

    /// `floor(m nc / count)` for `m = 0..count`.
    pub fn pilot_indices(nc: usize, count: usize) -> IndexSet {
        IndexSet::new((0..count).map(|m| m * nc / count).collect(), nc).expect("count <= nc")
    }

    pub fn pilots(&self) -> &IndexSet {
        &self.transform.indices
    }
}

impl ChannelEstimator for Interpolation {
    fn step(&mut self, received: &[Complex64], _truth: &Cfr, _rng: &mut dyn RngCore) -> Result<StepOutput, EstimatorError> {
        let prelim = ddce_preliminary(received, &self.h_prev)?;
        let obs = self
            .transform
            .denoise(&self.transform.cir(&prelim.h_tilde), self.n_taps)?;
        let estimate = finalize_estimate(&obs.taps, &self.plan)?;
        self.h_prev = estimate.clone();
        Ok(StepOutput {
            estimate,
            decisions: prelim.decisions,
            dropped_groups: 0,
        })
    }

    fn current(&self) -> &Cfr {
        &self.h_prev
    }
}

/// Genie receiver: decides with the true channel of the current symbol.
#[derive(Debug, Clone)]
pub struct Ideal {
    h: Cfr,
}

impl Ideal {
    pub fn new(initial: Cfr) -> Self {
        Self { h: initial }
    }
}

impl ChannelEstimator for Ideal {
    fn step(&mut self, received: &[Complex64], truth: &Cfr, _rng: &mut dyn RngCore) -> Result<StepOutput, EstimatorError> {
        let decisions = phy::qpsk_hard_decision(&phy::equalize(received, truth)?.symbols);
        self.h = truth.clone();
        Ok(StepOutput {
            estimate: truth.clone(),
            decisions,
            dropped_groups: 0,
        })
    }

    fn current(&self) -> &Cfr {
        &self.h
    }
}
