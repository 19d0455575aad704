//! QPSK mapping, hard decisions, zero-forcing equalization and
//! per-subcarrier least-squares estimation.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::Cfr;

/// Below this magnitude a channel gain is treated as a null.
pub const DEGENERATE_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One modulated symbol per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSymbol(pub Vec<Complex64>);

impl OfdmSymbol {
    pub fn points(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Gray-demapped bit pairs, inverse of [`qpsk_modulate`].
    pub fn bits(&self) -> Vec<bool> {
        self.0
            .iter()
            .flat_map(|z| [z.re < 0.0, z.im < 0.0])
            .collect()
    }

    /// Number of subcarriers carrying the same constellation point.
    pub fn matches(&self, other: &OfdmSymbol) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a == b).count()
    }
}

fn point(b0: bool, b1: bool) -> Complex64 {
    let re = if b0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    let im = if b1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Complex64::new(re, im)
}

/// `(b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
pub fn qpsk_modulate(bits: &[bool], nc: usize) -> Result<OfdmSymbol, PhyError> {
    if bits.len() != 2 * nc {
        return Err(PhyError::InvalidArgument(format!(
            "{} bits for {nc} subcarriers, expected {}",
            bits.len(),
            2 * nc
        )));
    }
    Ok(OfdmSymbol(
        bits.chunks_exact(2).map(|p| point(p[0], p[1])).collect(),
    ))
}

/// Nearest constellation point; zero real or imaginary parts go positive.
pub fn qpsk_hard_decision(x: &[Complex64]) -> OfdmSymbol {
    OfdmSymbol(x.iter().map(|z| point(z.re < 0.0, z.im < 0.0)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub symbols: Vec<Complex64>,
    /// Subcarriers whose gain was too small to divide by; their output is 0.
    pub degenerate: Vec<usize>,
}

/// Zero-forcing: `Y[k] / H[k]`.
pub fn equalize(y: &[Complex64], h_hat: &Cfr) -> Result<Equalized, PhyError> {
    if y.len() != h_hat.len() {
        return Err(PhyError::InvalidArgument(format!(
            "{} received values for {} gains",
            y.len(),
            h_hat.len()
        )));
    }
    let mut degenerate = Vec::new();
    let symbols = y
        .iter()
        .zip(h_hat.gains())
        .enumerate()
        .map(|(k, (&yk, &hk))| {
            if hk.norm() < DEGENERATE_GAIN {
                degenerate.push(k);
                Complex64::new(0.0, 0.0)
            } else {
                yk / hk
            }
        })
        .collect();
    Ok(Equalized {
        symbols,
        degenerate,
    })
}

/// `Y[k] / X[k]` with the decided symbols acting as pilots.
pub fn ls_estimate(y: &[Complex64], x_bar: &OfdmSymbol) -> Result<Cfr, PhyError> {
    if y.len() != x_bar.len() {
        return Err(PhyError::InvalidArgument(format!(
            "{} received values for {} symbols",
            y.len(),
            x_bar.len()
        )));
    }
    if let Some(k) = x_bar.points().iter().position(|x| x.norm() == 0.0) {
        return Err(PhyError::InvalidArgument(format!("symbol {k} is zero")));
    }
    Ok(Cfr(y
        .iter()
        .zip(x_bar.points())
        .map(|(&yk, &xk)| yk / xk)
        .collect()))
}
