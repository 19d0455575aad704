//! Tapped-delay-line Rayleigh fading channels.
//!
//! A [`TapProfile`] is quantized onto the sample grid, realizations are drawn
//! tap by tap as circularly symmetric Gaussians, and time variation follows
//! the first-order Markov model `h_t = lambda h_{t-1} + sqrt(1 - lambda^2) h_new`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernels::{Dft, NumError};

/// 1.92 MHz sampling, the LTE rate for a 128-point FFT.
pub const DEFAULT_SAMPLE_PERIOD_NS: f64 = 520.8;

const EVA_DELAYS_NS: [f64; 9] = [0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0];
const EVA_POWERS_DB: [f64; 9] = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9];
const ETU_DELAYS_NS: [f64; 9] = [0.0, 50.0, 120.0, 200.0, 230.0, 500.0, 1600.0, 2300.0, 5000.0];
const ETU_POWERS_DB: [f64; 9] = [-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid channel profile: {0}")]
    Profile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Numeric(#[from] NumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileName {
    #[serde(rename = "EVA")]
    Eva,
    #[serde(rename = "ETU")]
    Etu,
    #[serde(rename = "custom")]
    Custom,
}

impl std::fmt::Display for ProfileName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProfileName::Eva => "EVA",
            ProfileName::Etu => "ETU",
            ProfileName::Custom => "custom",
        })
    }
}

impl std::str::FromStr for ProfileName {
    type Err = String;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eva" => Ok(ProfileName::Eva),
            "etu" => Ok(ProfileName::Etu),
            "custom" => Ok(ProfileName::Custom),
            _ => Err(format!("unknown channel `{s}` (expected EVA, ETU or custom)")),
        }
    }
}

/// Power-delay profile of a multipath channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapProfile {
    pub name: ProfileName,
    pub delays_ns: Vec<f64>,
    pub powers_db: Vec<f64>,
    pub sample_period_ns: f64,
}

impl TapProfile {
    pub fn eva(sample_period_ns: f64) -> Self {
        Self {
            name: ProfileName::Eva,
            delays_ns: EVA_DELAYS_NS.to_vec(),
            powers_db: EVA_POWERS_DB.to_vec(),
            sample_period_ns,
        }
    }

    pub fn etu(sample_period_ns: f64) -> Self {
        Self {
            name: ProfileName::Etu,
            delays_ns: ETU_DELAYS_NS.to_vec(),
            powers_db: ETU_POWERS_DB.to_vec(),
            sample_period_ns,
        }
    }

    pub fn custom(delays_ns: Vec<f64>, powers_db: Vec<f64>, sample_period_ns: f64) -> Result<Self, ChannelError> {
        let p = Self {
            name: ProfileName::Custom,
            delays_ns,
            powers_db,
            sample_period_ns,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.sample_period_ns > 0.0 && self.sample_period_ns.is_finite()) {
            return Err(ChannelError::Profile(format!(
                "sample period must be positive, got {} ns",
                self.sample_period_ns
            )));
        }
        if self.delays_ns.is_empty() || self.delays_ns.len() != self.powers_db.len() {
            return Err(ChannelError::Profile(format!(
                "{} delays but {} powers",
                self.delays_ns.len(),
                self.powers_db.len()
            )));
        }
        if self.delays_ns[0] != 0.0 {
            return Err(ChannelError::Profile("first path delay must be 0 ns".into()));
        }
        if self.delays_ns.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ChannelError::Profile("path delays must be strictly increasing".into()));
        }
        if self.powers_db.iter().chain(&self.delays_ns).any(|v| !v.is_finite()) {
            return Err(ChannelError::Profile("delays and powers must be finite".into()));
        }
        Ok(())
    }
}

/// A profile mapped onto the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedProfile {
    /// Delay index of each original path.
    pub path_indices: Vec<usize>,
    /// Normalized power per delay index; length is the delay window.
    pub variances: Vec<f64>,
}

impl QuantizedProfile {
    pub fn n_taps(&self) -> usize {
        self.variances.len()
    }

    pub fn max_delay_index(&self) -> usize {
        self.path_indices.iter().copied().max().unwrap_or(0)
    }
}

/// Rounds every path to the nearest sample, merges collisions by adding
/// linear power, and normalizes the total to one.
pub fn quantize_profile(profile: &TapProfile, n_taps: usize) -> Result<QuantizedProfile, ChannelError> {
    profile.validate()?;
    let mut variances = vec![0.0; n_taps];
    let mut path_indices = Vec::with_capacity(profile.delays_ns.len());
    for (path, (&delay, &power)) in profile.delays_ns.iter().zip(&profile.powers_db).enumerate() {
        let idx = (delay / profile.sample_period_ns).round() as usize;
        if idx >= n_taps {
            return Err(ChannelError::Profile(format!(
                "path {path} ({delay} ns) lands on delay index {idx}, outside the {n_taps}-tap window"
            )));
        }
        variances[idx] += 10f64.powf(power / 10.0);
        path_indices.push(idx);
    }
    let total: f64 = variances.iter().sum();
    variances.iter_mut().for_each(|v| *v /= total);
    Ok(QuantizedProfile {
        path_indices,
        variances,
    })
}

/// One channel impulse response realization over the delay window.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir(pub Vec<Complex64>);

impl Cir {
    pub fn taps(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_cfr(&self, plan: &Dft) -> Result<Cfr, ChannelError> {
        if self.len() > plan.len() {
            return Err(ChannelError::InvalidArgument(format!(
                "{} taps do not fit in {} subcarriers",
                self.len(),
                plan.len()
            )));
        }
        Ok(Cfr(plan.forward_padded(&self.0)?))
    }

    pub fn power(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Per-subcarrier complex gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfr(pub Vec<Complex64>);

impl Cfr {
    pub fn gains(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mean squared error per subcarrier against another response.
    pub fn mse(&self, other: &Cfr) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / self.0.len() as f64
    }
}

/// `CN(0, variance)` sample.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

pub fn draw_cir<R: Rng + ?Sized>(profile: &QuantizedProfile, rng: &mut R) -> Cir {
    Cir(profile
        .variances
        .iter()
        .map(|&v| {
            if v > 0.0 {
                cscg(rng, v)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect())
}

pub fn evolve_cir<R: Rng + ?Sized>(
    prev: &Cir,
    lambda: f64,
    profile: &QuantizedProfile,
    rng: &mut R,
) -> Result<Cir, ChannelError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(ChannelError::InvalidArgument(format!(
            "lambda must be in [0, 1], got {lambda}"
        )));
    }
    if prev.len() != profile.n_taps() {
        return Err(ChannelError::InvalidArgument(format!(
            "previous response has {} taps, profile has {}",
            prev.len(),
            profile.n_taps()
        )));
    }
    let fresh = draw_cir(profile, rng);
    let innovation = (1.0 - lambda * lambda).sqrt();
    Ok(Cir(prev
        .0
        .iter()
        .zip(&fresh.0)
        .map(|(&old, &new)| old * lambda + new * innovation)
        .collect()))
}

pub fn cir_to_cfr(cir: &Cir, nc: usize) -> Result<Cfr, ChannelError> {
    cir.to_cfr(&Dft::new(nc)?)
}

/// Complex noise variance for a given SNR with unit transmit power.
/// `+inf` dB maps to a noiseless channel.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// `Y[k] = H[k] X[k] + W[k]` with `W[k] ~ CN(0, noise_var)`.
pub fn apply_channel<R: Rng + ?Sized>(
    x: &[Complex64],
    h: &Cfr,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>, ChannelError> {
    if x.len() != h.len() {
        return Err(ChannelError::InvalidArgument(format!(
            "{} symbols for {} subcarriers",
            x.len(),
            h.len()
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(ChannelError::InvalidArgument(format!(
            "noise variance must be non-negative, got {noise_var}"
        )));
    }
    Ok(x.iter()
        .zip(&h.0)
        .map(|(&xk, &hk)| {
            let clean = hk * xk;
            if noise_var > 0.0 {
                clean + cscg(rng, noise_var)
            } else {
                clean
            }
        })
        .collect())
}
