//! DFT-based estimation over an arbitrary subcarrier group, noise
//! compensation from the taps beyond the delay window, and the 1-mean
//! consensus over group observations.

use num_complex::Complex64;

use super::{EstimatorError, RddceConfig};
use crate::channel::Cfr;
use crate::numkernels::{
    fourier_nodes, min_norm_solve, vandermonde_inverse, ComplexMatrix, Dft, IndexSet, VandermondeInverse,
};

/// Inverse of the Fourier submatrix `F_I` for one group.
#[derive(Debug, Clone)]
pub struct GroupTransform {
    pub indices: IndexSet,
    pub inverse: VandermondeInverse,
    /// `F_I` itself, for residual correction.
    forward: ComplexMatrix,
}

impl GroupTransform {
    pub fn new(indices: IndexSet, nc: usize) -> Result<Self, EstimatorError> {
        Self::with_plan(indices, &Dft::new(nc)?)
    }

    /// Same as [`GroupTransform::new`], reusing the twiddles of `plan`.
    pub fn with_plan(indices: IndexSet, plan: &Dft) -> Result<Self, EstimatorError> {
        let inverse = vandermonde_inverse(&fourier_nodes(&indices, plan.len()))?;
        let n = indices.len();
        let nc = plan.len();
        let mut forward = ComplexMatrix::zeros(n, n);
        for (r, &i) in indices.as_slice().iter().enumerate() {
            let mut m = 0;
            for c in 0..n {
                forward[(r, c)] = plan.twiddle(m);
                m += i;
                if m >= nc {
                    m -= nc;
                }
            }
        }
        Ok(Self {
            indices,
            inverse,
            forward,
        })
    }

    pub fn is_well_conditioned(&self) -> bool {
        self.inverse.is_well_conditioned()
    }

    /// `h~_I = F_I^-1 H~_I`, with one step of iterative refinement.
    pub fn cir(&self, h_tilde: &Cfr) -> Vec<Complex64> {
        let b = self.indices.gather(h_tilde.gains());
        let mut x = self.inverse.inverse.mul_vec(&b);
        let r = self.forward.residual(&b, &[&x]);
        for (x, d) in x.iter_mut().zip(self.inverse.inverse.mul_vec(&r)) {
            *x += d;
        }
        x
    }

    /// Removes the noise component that explains the last `n_w` taps.
    ///
    /// With `F_w` the last `n_w` rows of `F_I^-1`, the min-norm `W^` solving
    /// `F_w W^ = w2` is mapped back through `F_I^-1` and subtracted. The
    /// compensated tail is zero by construction.
    pub fn denoise(&self, h_i: &[Complex64], n_taps: usize) -> Result<GroupObservation, EstimatorError> {
        let n2 = self.indices.len();
        if h_i.len() != n2 || n_taps == 0 || n_taps >= n2 {
            return Err(EstimatorError::Config(format!(
                "group of {n2} cannot split {} taps into a {n_taps}-tap window plus noise",
                h_i.len()
            )));
        }
        let f_w = self.inverse.inverse.row_block(n_taps, n2);
        let w2 = &h_i[n_taps..];
        // W^ is kept as a solve plus its refinement so the compensation
        // below sees it in extended precision.
        let coarse = min_norm_solve(&f_w, w2)?;
        let fine = min_norm_solve(&f_w, &f_w.residual(w2, &[&coarse]))?;
        let compensated = self.inverse.inverse.residual(h_i, &[&coarse, &fine]);
        let tail_residual = compensated[n_taps..]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        Ok(GroupObservation {
            taps: compensated[..n_taps].to_vec(),
            conditioning: self.inverse.residual,
            tail_residual,
        })
    }
}

/// One denoised estimate of the channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupObservation {
    pub taps: Vec<Complex64>,
    /// `max |V V^-1 - I|` of the group's Vandermonde inverse.
    pub conditioning: f64,
    /// Largest magnitude left in the compensated tail.
    pub tail_residual: f64,
}

pub fn group_cir(h_tilde: &Cfr, indices: &IndexSet, nc: usize) -> Result<(Vec<Complex64>, GroupTransform), EstimatorError> {
    let transform = GroupTransform::new(indices.clone(), nc)?;
    Ok((transform.cir(h_tilde), transform))
}

pub fn denoise_group(
    h_i: &[Complex64],
    transform: &GroupTransform,
    cfg: &RddceConfig,
) -> Result<GroupObservation, EstimatorError> {
    transform.denoise(h_i, cfg.n_taps)
}

fn mean_of<'a>(items: impl Iterator<Item = &'a [Complex64]>, len: usize) -> Vec<Complex64> {
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    let mut count = 0usize;
    for v in items {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    acc
}

fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Starts from the mean of all observations, then repeatedly re-centers on
/// the `k_keep` observations closest to the current center (ties to the
/// earlier observation). `None` when there are no observations.
pub fn one_mean_filter(observations: &[Vec<Complex64>], n_iter: usize, k_keep: usize) -> Option<Vec<Complex64>> {
    let first = observations.first()?;
    let len = first.len();
    let keep = k_keep.clamp(1, observations.len());
    let mut center = mean_of(observations.iter().map(Vec::as_slice), len);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(observations.len());
    for _ in 0..n_iter {
        order.clear();
        order.extend(observations.iter().enumerate().map(|(i, o)| (distance(o, &center), i)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut kept: Vec<usize> = order[..keep].iter().map(|&(_, i)| i).collect();
        // Sum in observation order so the result does not depend on ranking.
        kept.sort_unstable();
        center = mean_of(kept.iter().map(|&i| observations[i].as_slice()), len);
    }
    Some(center)
}

/// Zero-pads the tap estimate and transforms it to the frequency domain.
pub fn finalize_estimate(h_m: &[Complex64], plan: &Dft) -> Result<Cfr, EstimatorError> {
    Ok(Cfr(plan.forward_padded(h_m)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cscg, draw_cir, quantize_profile, TapProfile, DEFAULT_SAMPLE_PERIOD_NS};
    use crate::numkernels::{norm, ComplexMatrix};
    use proptest::prelude::*;
    use rand::seq::index::sample;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const NC: usize = 128;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn etu_cir(rng: &mut ChaCha8Rng) -> crate::channel::Cir {
        let q = quantize_profile(&TapProfile::etu(DEFAULT_SAMPLE_PERIOD_NS), 11).unwrap();
        draw_cir(&q, rng)
    }

    fn random_group(rng: &mut ChaCha8Rng, n: usize, nc: usize) -> GroupTransform {
        loop {
            let idx = IndexSet::from_unsorted(sample(rng, nc, n).into_vec(), nc).unwrap();
            let t = GroupTransform::new(idx, nc).unwrap();
            if t.is_well_conditioned() {
                return t;
            }
        }
    }

    /// Classic pilot-based DFT estimation on an evenly spaced grid, written
    /// out directly: N2-point IDFT, keep the delay window.
    fn classic_truncation(h: &Cfr, stride: usize, n2: usize, n_taps: usize) -> Vec<Complex64> {
        (0..n_taps)
            .map(|t| {
                let acc: Complex64 = (0..n2)
                    .map(|m| {
                        let theta = 2.0 * PI * (m * t) as f64 / n2 as f64;
                        h.gains()[m * stride] * c(theta.cos(), theta.sin())
                    })
                    .sum();
                acc / n2 as f64
            })
            .collect()
    }

    #[test]
    fn exact_data_recovers_taps() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let plan = Dft::new(NC).unwrap();
        for _ in 0..50 {
            let cir = etu_cir(&mut rng);
            let h = cir.to_cfr(&plan).unwrap();
            let t = random_group(&mut rng, 20, NC);
            let h_i = t.cir(&h);
            for (a, b) in h_i[..11].iter().zip(cir.taps()) {
                assert!((a - b).norm() < 1e-8);
            }
            assert!(h_i[11..].iter().all(|z| z.norm() < 1e-8));

            let obs = t.denoise(&h_i, 11).unwrap();
            for (a, b) in obs.taps.iter().zip(&h_i[..11]) {
                assert!((a - b).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn evenly_spaced_group_matches_classic_estimation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (nc, n2, n_taps) in [(120usize, 20usize, 11usize), (128, 16, 11), (128, 32, 11)] {
            let stride = nc / n2;
            let idx = IndexSet::new((0..n2).map(|m| m * stride).collect(), nc).unwrap();
            let t = GroupTransform::new(idx, nc).unwrap();
            for _ in 0..10 {
                // Arbitrary noisy response, no structure assumed.
                let h = Cfr((0..nc).map(|_| cscg(&mut rng, 1.0)).collect());
                let raw = t.cir(&h);
                let ours = t.denoise(&raw, n_taps).unwrap();
                let oracle = classic_truncation(&h, stride, n2, n_taps);
                for (a, b) in ours.taps.iter().zip(&oracle) {
                    assert!((a - b).norm() < 1e-8, "nc={nc} n2={n2}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn noisy_tail_matches_mapped_noise_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let plan = Dft::new(NC).unwrap();
        let t = random_group(&mut rng, 20, NC);
        let sigma2 = 0.1;
        // E|w_r|^2 = sigma2 * sum_c |F_I^-1[r][c]|^2.
        let inv: &ComplexMatrix = &t.inverse.inverse;
        let expected: f64 = (11..20).map(|r| sigma2 * norm(inv.row(r)).powi(2)).sum();
        let cir = etu_cir(&mut rng);
        let h = cir.to_cfr(&plan).unwrap();
        let trials = 5000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let noisy = Cfr(h.gains().iter().map(|g| g + cscg(&mut rng, sigma2)).collect());
            let h_i = t.cir(&noisy);
            acc += h_i[11..].iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let measured = acc / trials as f64;
        assert!((measured / expected - 1.0).abs() < 0.1, "{measured} vs {expected}");
    }

    #[test]
    fn tail_is_zero_after_compensation() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let plan = Dft::new(NC).unwrap();
        for _ in 0..200 {
            let h = etu_cir(&mut rng).to_cfr(&plan).unwrap();
            let noisy = Cfr(h.gains().iter().map(|g| g + cscg(&mut rng, 0.1)).collect());
            let t = random_group(&mut rng, 20, NC);
            let obs = t.denoise(&t.cir(&noisy), 11).unwrap();
            assert!(obs.tail_residual < 1e-9, "tail {}", obs.tail_residual);
        }
    }

    #[test]
    fn denoising_reduces_error_at_10_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let plan = Dft::new(NC).unwrap();
        let cir = etu_cir(&mut rng);
        let h = cir.to_cfr(&plan).unwrap();
        let (mut raw_err, mut den_err) = (0.0, 0.0);
        for _ in 0..1000 {
            let noisy = Cfr(h.gains().iter().map(|g| g + cscg(&mut rng, 0.1)).collect());
            let t = random_group(&mut rng, 20, NC);
            let h_i = t.cir(&noisy);
            let obs = t.denoise(&h_i, 11).unwrap();
            raw_err += distance(&h_i[..11], cir.taps());
            den_err += distance(&obs.taps, cir.taps());
        }
        assert!(den_err < raw_err, "denoised {den_err} raw {raw_err}");
    }

    #[test]
    fn denoise_rejects_bad_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let t = random_group(&mut rng, 20, NC);
        assert!(t.denoise(&[c(0.0, 0.0); 20], 20).is_err());
        assert!(t.denoise(&[c(0.0, 0.0); 19], 11).is_err());
    }

    #[test]
    fn one_mean_fixed_point() {
        let v = vec![c(1.0, -2.0), c(0.5, 0.25)];
        let obs = vec![v.clone(); 7];
        assert_eq!(one_mean_filter(&obs, 10, 5).unwrap(), v);
        assert_eq!(one_mean_filter(&[], 10, 5), None);
    }

    #[test]
    fn one_mean_rejects_far_outliers() {
        let v = vec![c(0.3, 0.1), c(-0.2, 0.4), c(0.0, -0.7)];
        let mut obs = vec![v.clone(); 10];
        for k in 0..5 {
            obs.push(vec![c(50.0 + k as f64, -40.0), c(-30.0, 8.0 - k as f64), c(9.0, 9.0)]);
        }
        obs.shuffle(&mut ChaCha8Rng::seed_from_u64(36));
        let out = one_mean_filter(&obs, 1, 5).unwrap();
        assert!(distance(&out, &v) < 1e-10);
    }

    #[test]
    fn one_mean_averages_perturbations() {
        // E|e|^2 = sigma^2 per observation, so the mean of k_keep has
        // RMS error sigma / sqrt(k_keep).
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let (n_taps, sigma, k) = (11usize, 0.05f64, 5usize);
        let v: Vec<_> = (0..n_taps).map(|_| cscg(&mut rng, 1.0)).collect();
        let per_entry = sigma * sigma / n_taps as f64;
        let trials = 2000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let obs: Vec<Vec<_>> = (0..15)
                .map(|_| v.iter().map(|x| x + cscg(&mut rng, per_entry)).collect())
                .collect();
            acc += distance(&one_mean_filter(&obs, 10, k).unwrap(), &v);
        }
        let mean_err = acc / trials as f64;
        assert!(mean_err < 2.0 * sigma / (k as f64).sqrt(), "{mean_err}");
    }

    #[test]
    fn finalize_cases() {
        let plan = Dft::new(NC).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let cir = etu_cir(&mut rng);
        assert_eq!(finalize_estimate(cir.taps(), &plan).unwrap(), cir.to_cfr(&plan).unwrap());
        let zero = finalize_estimate(&[c(0.0, 0.0); 11], &plan).unwrap();
        assert!(zero.gains().iter().all(|g| *g == c(0.0, 0.0)));
        let back = plan.inverse(finalize_estimate(cir.taps(), &plan).unwrap().gains()).unwrap();
        assert!(distance(&back[..11], cir.taps()) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn one_mean_permutation_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut obs: Vec<Vec<Complex64>> = (0..15)
                .map(|_| (0..11).map(|_| cscg(&mut rng, 1.0)).collect())
                .collect();
            let a = one_mean_filter(&obs, 10, 5).unwrap();
            obs.shuffle(&mut rng);
            let b = one_mean_filter(&obs, 10, 5).unwrap();
            prop_assert!(distance(&a, &b) < 1e-12);
        }

        #[test]
        fn compensated_tail_vanishes(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_group(&mut rng, 20, NC);
            let h = Cfr((0..NC).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect());
            let obs = t.denoise(&t.cir(&h), 11).unwrap();
            prop_assert!(obs.tail_residual < 1e-9);
        }
    }
}
