//! Seeded Monte-Carlo link simulation.
//!
//! An episode draws a channel, initializes the estimator from a known
//! preamble, then for every payload symbol evolves the channel, transmits
//! random QPSK, and scores the estimator's hard decisions. All randomness is
//! addressed through [`crate::rng::stream`], so every episode is a pure
//! function of `(config, seed, sample index)` and every method sees the same
//! channel, payload and noise.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    apply_channel, cscg, draw_cir, evolve_cir, noise_variance, quantize_profile, Cfr, ChannelError,
    ProfileName, QuantizedProfile, TapProfile, DEFAULT_SAMPLE_PERIOD_NS,
};
use crate::estimators::{
    build_estimator, draw_group, preamble_estimate, EstimatorError, GroupTransform, Method, RddceConfig,
};
use crate::numkernels::{Dft, IndexSet, NumError};
use crate::phy::{qpsk_modulate, OfdmSymbol, PhyError};
use crate::rng::{stream, Purpose, SHARED_SAMPLE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("episode {sample} aborted: {reason}")]
    Aborted { sample: u64, reason: String },
}

impl From<ChannelError> for SimError {
    fn from(e: ChannelError) -> Self {
        SimError::Config(e.to_string())
    }
}

/// How often the Markov channel step is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelUpdate {
    /// Every OFDM symbol; `lambda` is a per-symbol correlation.
    Symbol,
    /// Once at the start of every frame after the first; the channel is
    /// constant within a frame.
    Frame,
}

impl std::fmt::Display for ChannelUpdate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelUpdate::Symbol => "symbol",
            ChannelUpdate::Frame => "frame",
        })
    }
}

impl std::str::FromStr for ChannelUpdate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "symbol" => Ok(ChannelUpdate::Symbol),
            "frame" => Ok(ChannelUpdate::Frame),
            _ => Err(format!("unknown channel update `{s}` (expected symbol or frame)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub nc: usize,
    pub symbols_per_frame: usize,
    pub frames: usize,
    pub samples: usize,
    pub snr_db: f64,
    pub lambda: f64,
    pub channel_update: ChannelUpdate,
    pub channel: ProfileName,
    pub sample_period_ns: f64,
    /// Only read when `channel` is custom.
    pub custom_delays_ns: Vec<f64>,
    pub custom_powers_db: Vec<f64>,
    pub method: Method,
    pub rddce: RddceConfig,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nc: 128,
            symbols_per_frame: 14,
            frames: 1000,
            samples: 20,
            snr_db: 10.0,
            lambda: 0.99,
            channel_update: ChannelUpdate::Symbol,
            channel: ProfileName::Eva,
            sample_period_ns: DEFAULT_SAMPLE_PERIOD_NS,
            custom_delays_ns: Vec::new(),
            custom_powers_db: Vec::new(),
            method: Method::Rddce,
            rddce: RddceConfig::default(),
            gamma: 0.5,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn profile(&self) -> Result<TapProfile, SimError> {
        Ok(match self.channel {
            ProfileName::Eva => TapProfile::eva(self.sample_period_ns),
            ProfileName::Etu => TapProfile::etu(self.sample_period_ns),
            ProfileName::Custom => TapProfile::custom(
                self.custom_delays_ns.clone(),
                self.custom_powers_db.clone(),
                self.sample_period_ns,
            )?,
        })
    }

    pub fn quantized_profile(&self) -> Result<QuantizedProfile, SimError> {
        Ok(quantize_profile(&self.profile()?, self.rddce.n_taps)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::Config(msg));
        for (name, v) in [
            ("nc", self.nc),
            ("symbols_per_frame", self.symbols_per_frame),
            ("frames", self.frames),
            ("samples", self.samples),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda must be in [0, 1], got {}", self.lambda));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return fail(format!("snr_db must be a number or +inf, got {}", self.snr_db));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        self.rddce
            .validate(self.nc)
            .map_err(|e| SimError::Config(e.to_string()))?;
        self.quantized_profile()?;
        Ok(())
    }
}

/// One episode's trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub sample_index: u64,
    pub per_frame_acc: Vec<f64>,
    pub per_frame_channel_mse: Vec<f64>,
    pub mean_acc: f64,
    pub dropped_groups: u64,
    pub seed_used: u64,
    pub config_echo: SimConfig,
}

fn random_bits(seed: u64, sample: u64, purpose: Purpose, step: u64, n: usize) -> Vec<bool> {
    let mut rng = stream(seed, sample, purpose, step);
    (0..n).map(|_| rng.random()).collect()
}

/// The known first symbol of every episode; shared by all samples of a seed.
pub fn preamble_symbol(seed: u64, nc: usize) -> OfdmSymbol {
    qpsk_modulate(&random_bits(seed, SHARED_SAMPLE, Purpose::Preamble, 0, 2 * nc), nc)
        .expect("bit count matches")
}

fn abort(sample: u64) -> impl Fn(String) -> SimError {
    move |reason| SimError::Aborted { sample, reason }
}

pub fn run_episode(cfg: &SimConfig, sample_index: u64) -> Result<RunResult, SimError> {
    cfg.validate()?;
    let fail = abort(sample_index);
    let (seed, s, nc) = (cfg.seed, sample_index, cfg.nc);
    let profile = cfg.quantized_profile()?;
    let plan = Dft::new(nc).map_err(|e: NumError| fail(e.to_string()))?;
    let noise_var = noise_variance(cfg.snr_db);

    let mut cir = draw_cir(&profile, &mut stream(seed, s, Purpose::Channel, 0));
    let preamble = preamble_symbol(seed, nc);
    let mut cfr = cir.to_cfr(&plan)?;
    let received = apply_channel(preamble.points(), &cfr, noise_var, &mut stream(seed, s, Purpose::Noise, 0))?;
    let initial = preamble_estimate(&received, &preamble, cfg.rddce.n_taps, &plan)
        .map_err(|e| fail(e.to_string()))?;
    let mut estimator = build_estimator(cfg.method, initial, &cfg.rddce, cfg.gamma)
        .map_err(|e| SimError::Config(e.to_string()))?;

    let per_frame = (nc * cfg.symbols_per_frame) as f64;
    let mut per_frame_acc = Vec::with_capacity(cfg.frames);
    let mut per_frame_channel_mse = Vec::with_capacity(cfg.frames);
    let mut dropped_groups = 0u64;
    for frame in 0..cfg.frames {
        let mut correct = 0usize;
        let mut mse = 0.0;
        for sym in 0..cfg.symbols_per_frame {
            let t = (1 + frame * cfg.symbols_per_frame + sym) as u64;
            let evolve = match cfg.channel_update {
                ChannelUpdate::Symbol => true,
                ChannelUpdate::Frame => sym == 0 && frame > 0,
            };
            if evolve {
                cir = evolve_cir(&cir, cfg.lambda, &profile, &mut stream(seed, s, Purpose::Channel, t))?;
                cfr = cir.to_cfr(&plan)?;
            }
            let bits = random_bits(seed, s, Purpose::Payload, t, 2 * nc);
            let tx = qpsk_modulate(&bits, nc).map_err(|e: PhyError| fail(e.to_string()))?;
            let rx = apply_channel(tx.points(), &cfr, noise_var, &mut stream(seed, s, Purpose::Noise, t))?;
            let out = estimator
                .step(&rx, &cfr, &mut stream(seed, s, Purpose::Partition, t))
                .map_err(|e: EstimatorError| fail(e.to_string()))?;
            correct += out.decisions.matches(&tx);
            mse += out.estimate.mse(&cfr);
            dropped_groups += out.dropped_groups as u64;
        }
        per_frame_acc.push(correct as f64 / per_frame);
        per_frame_channel_mse.push(mse / cfg.symbols_per_frame as f64);
    }
    let mean_acc = per_frame_acc.iter().sum::<f64>() / cfg.frames as f64;
    Ok(RunResult {
        sample_index,
        per_frame_acc,
        per_frame_channel_mse,
        mean_acc,
        dropped_groups,
        seed_used: seed,
        config_echo: cfg.clone(),
    })
}

/// Aggregate over the episodes of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub mean_acc: f64,
    /// Sample standard deviation of the per-episode mean accuracy.
    pub std_acc: f64,
    pub per_frame_acc: Vec<f64>,
    pub per_frame_channel_mse: Vec<f64>,
    pub episode_mean_acc: Vec<f64>,
    pub samples_ok: usize,
    pub samples_aborted: usize,
    pub abort_reasons: Vec<String>,
    pub dropped_groups: u64,
}

pub fn run_monte_carlo(cfg: &SimConfig) -> Result<MonteCarloSummary, SimError> {
    cfg.validate()?;
    let results: Vec<Result<RunResult, SimError>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|s| run_episode(cfg, s))
        .collect();
    summarize(cfg.frames, results)
}

fn summarize(frames: usize, results: Vec<Result<RunResult, SimError>>) -> Result<MonteCarloSummary, SimError> {
    let mut per_frame_acc = vec![0.0; frames];
    let mut per_frame_mse = vec![0.0; frames];
    let mut episode_mean_acc = Vec::new();
    let mut abort_reasons = Vec::new();
    let mut dropped_groups = 0;
    for r in results {
        match r {
            Ok(run) => {
                for (a, v) in per_frame_acc.iter_mut().zip(&run.per_frame_acc) {
                    *a += v;
                }
                for (a, v) in per_frame_mse.iter_mut().zip(&run.per_frame_channel_mse) {
                    *a += v;
                }
                episode_mean_acc.push(run.mean_acc);
                dropped_groups += run.dropped_groups;
            }
            Err(e @ SimError::Aborted { .. }) => abort_reasons.push(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    let n = episode_mean_acc.len();
    if n == 0 {
        return Err(SimError::Aborted {
            sample: 0,
            reason: format!("all episodes aborted: {}", abort_reasons.join("; ")),
        });
    }
    per_frame_acc.iter_mut().for_each(|a| *a /= n as f64);
    per_frame_mse.iter_mut().for_each(|a| *a /= n as f64);
    let mean_acc = episode_mean_acc.iter().sum::<f64>() / n as f64;
    let std_acc = if n > 1 {
        (episode_mean_acc.iter().map(|a| (a - mean_acc).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloSummary {
        mean_acc,
        std_acc,
        per_frame_acc,
        per_frame_channel_mse: per_frame_mse,
        episode_mean_acc,
        samples_ok: n,
        samples_aborted: abort_reasons.len(),
        abort_reasons,
        dropped_groups,
    })
}

/// Cartesian grid of experiment coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub snr_db: Vec<f64>,
    pub lambda: Vec<f64>,
    pub methods: Vec<Method>,
    pub channels: Vec<ProfileName>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub channel: ProfileName,
    pub method: Method,
    pub lambda: f64,
    pub snr_db: f64,
    pub outcome: Result<MonteCarloSummary, String>,
}

/// Runs every grid cell. Cells are ordered channel, method, lambda, snr; a
/// failing cell is recorded and the sweep continues.
pub fn sweep(grid: &SweepGrid, base: &SimConfig) -> Result<Vec<SweepCell>, SimError> {
    if grid.snr_db.is_empty() || grid.lambda.is_empty() || grid.methods.is_empty() || grid.channels.is_empty() {
        return Err(SimError::Config("sweep grid has an empty axis".into()));
    }
    let mut coords = Vec::new();
    for &channel in &grid.channels {
        for &method in &grid.methods {
            for &lambda in &grid.lambda {
                for &snr_db in &grid.snr_db {
                    coords.push((channel, method, lambda, snr_db));
                }
            }
        }
    }
    Ok(coords
        .into_par_iter()
        .map(|(channel, method, lambda, snr_db)| {
            let cfg = SimConfig {
                channel,
                method,
                lambda,
                snr_db,
                ..base.clone()
            };
            SweepCell {
                channel,
                method,
                lambda,
                snr_db,
                outcome: run_monte_carlo(&cfg).map_err(|e| e.to_string()),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScatterStage {
    Raw,
    Denoised,
}

/// One group marker. `marker` is the mean over all `n2` taps of the group's
/// impulse response; `distance` is the l2 error of its first `n_taps` taps
/// against the true response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub snr_db: f64,
    pub group_id: usize,
    pub stage: ScatterStage,
    pub marker: Complex64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterReport {
    /// Marker of the true response, same averaging as the group markers.
    pub actual_marker: Complex64,
    pub points: Vec<ScatterPoint>,
}

const SCATTER_MAX_DRAWS: usize = 1000;

/// Group observations before and after noise compensation on one frozen
/// channel. Every group sees a fresh noise draw on the least-squares
/// estimate and a fresh random subcarrier group over the whole band.
/// `+inf` in `snrs_db` is the noiseless stage.
pub fn scatter_experiment(cfg: &SimConfig, snrs_db: &[f64], n_groups: usize) -> Result<ScatterReport, SimError> {
    cfg.validate()?;
    if n_groups == 0 {
        return Err(SimError::Config("n_groups must be positive".into()));
    }
    let (nc, n2, n_taps) = (cfg.nc, cfg.rddce.n2, cfg.rddce.n_taps);
    let plan = Dft::new(nc).map_err(|e| SimError::Config(e.to_string()))?;
    let profile = cfg.quantized_profile()?;
    let cir = draw_cir(&profile, &mut stream(cfg.seed, 0, Purpose::Channel, 0));
    let cfr = cir.to_cfr(&plan)?;
    let band = IndexSet::full(nc);
    let n2_f = n2 as f64;

    let mut points = Vec::with_capacity(2 * n_groups * snrs_db.len());
    for (level, &snr_db) in snrs_db.iter().enumerate() {
        let noise_var = noise_variance(snr_db);
        let fail = abort(level as u64);
        for group_id in 0..n_groups {
            let mut rng = stream(cfg.seed, group_id as u64, Purpose::Scatter, level as u64);
            let noisy = Cfr(cfr
                .gains()
                .iter()
                .map(|g| if noise_var > 0.0 { g + cscg(&mut rng, noise_var) } else { *g })
                .collect());
            let transform = (0..SCATTER_MAX_DRAWS)
                .map(|_| GroupTransform::new(draw_group(&band, n2, &mut rng), nc))
                .find(|t| t.as_ref().map_or(true, |t| t.is_well_conditioned()))
                .ok_or_else(|| fail("no well-conditioned group found".into()))?
                .map_err(|e| fail(e.to_string()))?;
            let raw = transform.cir(&noisy);
            let denoised = transform.denoise(&raw, n_taps).map_err(|e| fail(e.to_string()))?;
            let dist = |taps: &[Complex64]| {
                taps.iter()
                    .zip(cir.taps())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            };
            points.push(ScatterPoint {
                snr_db,
                group_id,
                stage: ScatterStage::Raw,
                marker: raw.iter().sum::<Complex64>() / n2_f,
                distance: dist(&raw[..n_taps]),
            });
            points.push(ScatterPoint {
                snr_db,
                group_id,
                stage: ScatterStage::Denoised,
                marker: denoised.taps.iter().sum::<Complex64>() / n2_f,
                distance: dist(&denoised.taps),
            });
        }
    }
    Ok(ScatterReport {
        actual_marker: cir.taps().iter().sum::<Complex64>() / n2_f,
        points,
    })
}
