use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rddce::channel::{apply_channel, cscg, draw_cir, quantize_profile, Cfr, TapProfile, DEFAULT_SAMPLE_PERIOD_NS};
use rddce::estimators::{
    build_estimator, dft_denoise, estimate_from_groups, preamble_estimate, GroupTransform, Method, RddceConfig,
    StepOutput,
};
use rddce::numkernels::{Dft, IndexSet};
use rddce::phy::qpsk_modulate;

const NC: usize = 128;

fn random_symbol(rng: &mut ChaCha8Rng, nc: usize) -> rddce::phy::OfdmSymbol {
    let bits: Vec<bool> = (0..2 * nc).map(|_| rng.random()).collect();
    qpsk_modulate(&bits, nc).unwrap()
}

fn eva_channel(rng: &mut ChaCha8Rng, plan: &Dft) -> Cfr {
    let q = quantize_profile(&TapProfile::eva(DEFAULT_SAMPLE_PERIOD_NS), 11).unwrap();
    draw_cir(&q, rng).to_cfr(plan).unwrap()
}

/// Runs `symbols` steps of `method` over a fixed channel and returns every
/// step's output.
fn drive(method: Method, gamma: f64, h: &Cfr, noise_var: f64, symbols: usize, seed: u64) -> Vec<StepOutput> {
    let plan = Dft::new(h.len()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let preamble = random_symbol(&mut rng, h.len());
    let y = apply_channel(preamble.points(), h, noise_var, &mut rng).unwrap();
    let cfg = RddceConfig::default();
    let initial = preamble_estimate(&y, &preamble, cfg.n_taps, &plan).unwrap();
    let mut est = build_estimator(method, initial, &cfg, gamma).unwrap();
    let mut draws = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..symbols)
        .map(|_| {
            let x = random_symbol(&mut rng, h.len());
            let y = apply_channel(x.points(), h, noise_var, &mut rng).unwrap();
            est.step(&y, h, &mut draws).unwrap()
        })
        .collect()
}

#[test]
fn static_noiseless_channel_is_tracked_exactly() {
    let plan = Dft::new(NC).unwrap();
    let h = eva_channel(&mut ChaCha8Rng::seed_from_u64(1), &plan);
    for method in [Method::Basic, Method::Filtering, Method::Interpolation, Method::Rddce] {
        let out = drive(method, 0.5, &h, 0.0, 30, 2);
        for (t, step) in out.iter().enumerate() {
            let mse = step.estimate.mse(&h);
            assert!(mse < 1e-10, "{method} symbol {}: mse {mse:e}", t + 2);
        }
    }
}

#[test]
fn basic_and_rddce_agree_on_static_noiseless_channel() {
    let plan = Dft::new(NC).unwrap();
    let h = eva_channel(&mut ChaCha8Rng::seed_from_u64(3), &plan);
    let basic = drive(Method::Basic, 0.5, &h, 0.0, 20, 4);
    let rddce = drive(Method::Rddce, 0.5, &h, 0.0, 20, 4);
    for (b, r) in basic.iter().zip(&rddce) {
        assert!(b.decisions == r.decisions);
        let diff = b.estimate.mse(&r.estimate);
        assert!(diff < 1e-20, "{diff:e}");
    }
}

#[test]
fn unit_gamma_filtering_is_basic() {
    let plan = Dft::new(NC).unwrap();
    let h = eva_channel(&mut ChaCha8Rng::seed_from_u64(5), &plan);
    let basic = drive(Method::Basic, 0.5, &h, 0.1, 50, 6);
    let filtered = drive(Method::Filtering, 1.0, &h, 0.1, 50, 6);
    assert_eq!(basic, filtered);
}

/// With every subcarrier selected and the band tiled by evenly spaced groups
/// that are all kept by the 1-mean step, the grouped estimate is classic
/// full-band truncation, noise included.
#[test]
fn evenly_tiled_groups_reduce_to_classic_estimation() {
    let (nc, n2, stride) = (120usize, 20usize, 6usize);
    let plan = Dft::new(nc).unwrap();
    let cfg = RddceConfig {
        n0: nc,
        n1: stride,
        n2,
        k_keep: stride,
        ..RddceConfig::default()
    };
    let transforms: Vec<GroupTransform> = (0..stride)
        .map(|o| GroupTransform::new(IndexSet::new((0..n2).map(|m| o + m * stride).collect(), nc).unwrap(), nc).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let q = quantize_profile(&TapProfile::etu(DEFAULT_SAMPLE_PERIOD_NS), cfg.n_taps).unwrap();
    for noise_var in [0.0, 0.1] {
        let h = draw_cir(&q, &mut rng).to_cfr(&plan).unwrap();
        let noisy = Cfr(h.gains().iter().map(|g| g + cscg(&mut rng, noise_var)).collect());
        let (grouped, dropped) = estimate_from_groups(&noisy, &transforms, &cfg, &plan).unwrap();
        let classic = dft_denoise(&noisy, cfg.n_taps, &plan).unwrap();
        assert_eq!(dropped, 0);
        let worst = grouped
            .gains()
            .iter()
            .zip(classic.gains())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "noise {noise_var}: {worst:e}");
    }
}

/// `Acc = 1 - 2 E[q] + E[q^2]` with `q = Q(sqrt(rho g))` per QPSK rail and
/// `g ~ Exp(1)`. Both expectations use Craig's form of the Q function, which
/// turns the Rayleigh average into one finite integral each.
fn qpsk_rayleigh_accuracy(rho: f64) -> f64 {
    let integrate = |upper: f64| {
        let n = 20_000;
        let h = upper / n as f64;
        let f = |t: f64| {
            let s = t.sin();
            if s == 0.0 {
                0.0
            } else {
                1.0 / (1.0 + rho / (2.0 * s * s))
            }
        };
        let mut acc = f(0.0) + f(upper);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0 / std::f64::consts::PI
    };
    let e_q = integrate(std::f64::consts::FRAC_PI_2);
    let e_q2 = integrate(std::f64::consts::FRAC_PI_4);
    1.0 - 2.0 * e_q + e_q2
}

#[test]
fn craig_oracle_matches_closed_form_bit_error() {
    let rho: f64 = 10.0;
    let p = 0.5 * (1.0 - (rho / 2.0 / (1.0 + rho / 2.0)).sqrt());
    let acc = qpsk_rayleigh_accuracy(rho);
    // Rails share the fade, so the symbol accuracy beats (1 - p)^2.
    assert!(acc > (1.0 - p) * (1.0 - p));
    assert!(acc < 1.0 - p);
}

#[test]
fn ideal_receiver_matches_rayleigh_symbol_error_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let plan = Dft::new(NC).unwrap();
    let q = quantize_profile(&TapProfile::eva(DEFAULT_SAMPLE_PERIOD_NS), 11).unwrap();
    let noise_var = 0.1;
    let mut est = build_estimator(Method::Ideal, Cfr(vec![Complex64::new(1.0, 0.0); NC]), &RddceConfig::default(), 0.5)
        .unwrap();
    let (mut correct, mut total) = (0usize, 0usize);
    for _ in 0..4000 {
        let h = draw_cir(&q, &mut rng).to_cfr(&plan).unwrap();
        let x = random_symbol(&mut rng, NC);
        let y = apply_channel(x.points(), &h, noise_var, &mut rng).unwrap();
        let out = est.step(&y, &h, &mut rng).unwrap();
        correct += out.decisions.matches(&x);
        total += NC;
    }
    let acc = correct as f64 / total as f64;
    let expected = qpsk_rayleigh_accuracy(1.0 / noise_var);
    assert!((acc - expected).abs() < 0.02, "measured {acc}, expected {expected}");
}
