use num_complex::Complex64;
use rand::RngCore;

use super::grouped::{finalize_estimate, one_mean_filter, GroupTransform};
use super::selection::{draw_group, metric_alpha, metric_m, partition_groups, select_channels, Order};
use super::{
    ddce_preliminary, dft_denoise, ChannelEstimator, EstimatorError, Metric, RddceConfig, StepOutput,
};
use crate::channel::Cfr;
use crate::numkernels::{Dft, IndexSet};
use crate::phy;

/// Decision-directed tracking refined from the most reliable subcarriers.
///
/// Per symbol: preliminary DDCE estimate, reliability ranking, random groups
/// over the retained subcarriers, one denoised impulse-response observation
/// per group, 1-mean consensus, and back to the frequency domain.
#[derive(Debug, Clone)]
pub struct Rddce {
    cfg: RddceConfig,
    plan: Dft,
    h_prev: Cfr,
}

impl Rddce {
    pub fn new(initial: Cfr, cfg: RddceConfig) -> Result<Self, EstimatorError> {
        cfg.validate(initial.len())?;
        Ok(Self {
            plan: Dft::new(initial.len())?,
            cfg,
            h_prev: initial,
        })
    }

    /// Ranks subcarriers by the configured metric. Nulls in the previous
    /// estimate are never eligible.
    pub fn select(&self, h_tilde: &Cfr, degenerate: &[usize]) -> Result<IndexSet, EstimatorError> {
        let (mut scores, order) = match self.cfg.metric {
            Metric::M => (metric_m(h_tilde, &self.h_prev), Order::Smallest),
            Metric::Alpha => (metric_alpha(h_tilde), Order::Largest),
        };
        for &k in degenerate {
            scores[k] = f64::INFINITY;
        }
        select_channels(&scores, self.cfg.n0, order)
    }

    /// Draws `n1` groups, redrawing ill-conditioned ones up to `max_redraws`
    /// times. Returns the usable transforms and the number dropped.
    fn draw_transforms(
        &self,
        selected: &IndexSet,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<GroupTransform>, usize), EstimatorError> {
        let groups = partition_groups(selected, self.cfg.n1, self.cfg.n2, rng)?;
        let mut transforms = Vec::with_capacity(groups.len());
        let mut dropped = 0;
        for first in groups {
            let mut group = first;
            let mut found = None;
            for attempt in 0..=self.cfg.max_redraws {
                if attempt > 0 {
                    group = draw_group(selected, self.cfg.n2, rng);
                }
                let t = GroupTransform::with_plan(group.clone(), &self.plan)?;
                if t.is_well_conditioned() {
                    found = Some(t);
                    break;
                }
            }
            match found {
                Some(t) => transforms.push(t),
                None => dropped += 1,
            }
        }
        Ok((transforms, dropped))
    }
}

/// Consensus estimate from a fixed list of groups. Groups whose noise solve
/// fails are dropped; with no observation left, falls back to classic DFT
/// estimation over the full band.
pub fn estimate_from_groups(
    h_tilde: &Cfr,
    transforms: &[GroupTransform],
    cfg: &RddceConfig,
    plan: &Dft,
) -> Result<(Cfr, usize), EstimatorError> {
    let mut dropped = 0;
    let observations: Vec<Vec<Complex64>> = transforms
        .iter()
        .filter_map(|t| match t.denoise(&t.cir(h_tilde), cfg.n_taps) {
            Ok(obs) => Some(obs.taps),
            Err(_) => {
                dropped += 1;
                None
            }
        })
        .collect();
    let estimate = match one_mean_filter(&observations, cfg.n_iter, cfg.k_keep) {
        Some(taps) => finalize_estimate(&taps, plan)?,
        None => dft_denoise(h_tilde, cfg.n_taps, plan)?,
    };
    Ok((estimate, dropped))
}

impl ChannelEstimator for Rddce {
    fn step(
        &mut self,
        received: &[Complex64],
        _truth: &Cfr,
        rng: &mut dyn RngCore,
    ) -> Result<StepOutput, EstimatorError> {
        let prelim = ddce_preliminary(received, &self.h_prev)?;
        let selected = self.select(&prelim.h_tilde, &prelim.degenerate)?;
        let (transforms, redraw_drops) = self.draw_transforms(&selected, rng)?;
        let (estimate, solve_drops) =
            estimate_from_groups(&prelim.h_tilde, &transforms, &self.cfg, &self.plan)?;
        let decisions = if self.cfg.redecide {
            phy::qpsk_hard_decision(&phy::equalize(received, &estimate)?.symbols)
        } else {
            prelim.decisions
        };
        self.h_prev = estimate.clone();
        Ok(StepOutput {
            estimate,
            decisions,
            dropped_groups: redraw_drops + solve_drops,
        })
    }

    fn current(&self) -> &Cfr {
        &self.h_prev
    }
}
