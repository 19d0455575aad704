use rand::seq::index::sample;
use rand::Rng;

use super::EstimatorError;
use crate::channel::Cfr;
use crate::numkernels::IndexSet;
use crate::phy::DEGENERATE_GAIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Smallest,
    Largest,
}

/// `|H~[k] - H^[k]| / |H^[k]|`; `+inf` where the previous gain is a null.
pub fn metric_m(h_tilde: &Cfr, h_prev: &Cfr) -> Vec<f64> {
    h_tilde
        .gains()
        .iter()
        .zip(h_prev.gains())
        .map(|(&cur, &prev)| {
            let denom = prev.norm();
            if denom < DEGENERATE_GAIN {
                f64::INFINITY
            } else {
                (cur - prev).norm() / denom
            }
        })
        .collect()
}

/// `|H[k]|`.
pub fn metric_alpha(h: &Cfr) -> Vec<f64> {
    h.gains().iter().map(|g| g.norm()).collect()
}

/// Indices of the `n0` best finite scores, returned in ascending index order.
/// Ties go to the lower index; non-finite scores are never selected.
pub fn select_channels(scores: &[f64], n0: usize, order: Order) -> Result<IndexSet, EstimatorError> {
    let mut eligible: Vec<usize> = (0..scores.len()).filter(|&k| scores[k].is_finite()).collect();
    if eligible.len() < n0 {
        return Err(EstimatorError::Starvation {
            available: eligible.len(),
            needed: n0,
        });
    }
    // Stable sort keeps index order among equal scores.
    match order {
        Order::Smallest => eligible.sort_by(|&a, &b| scores[a].total_cmp(&scores[b])),
        Order::Largest => eligible.sort_by(|&a, &b| scores[b].total_cmp(&scores[a])),
    }
    eligible.truncate(n0);
    Ok(IndexSet::from_unsorted(eligible, scores.len())?)
}

/// `n2` distinct members of `selected`, uniformly at random.
pub fn draw_group<R: Rng + ?Sized>(selected: &IndexSet, n2: usize, rng: &mut R) -> IndexSet {
    let picks = sample(rng, selected.len(), n2);
    let mut group: Vec<usize> = picks.iter().map(|p| selected.as_slice()[p]).collect();
    group.sort_unstable();
    IndexSet::new(group, usize::MAX).expect("distinct members of a valid set")
}

/// `n1` independent groups of `n2` subcarriers each. Groups may overlap with
/// each other but never repeat a subcarrier internally.
pub fn partition_groups<R: Rng + ?Sized>(
    selected: &IndexSet,
    n1: usize,
    n2: usize,
    rng: &mut R,
) -> Result<Vec<IndexSet>, EstimatorError> {
    if selected.len() < n2 {
        return Err(EstimatorError::Starvation {
            available: selected.len(),
            needed: n2,
        });
    }
    Ok((0..n1).map(|_| draw_group(selected, n2, rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn metric_m_cases() {
        let prev = Cfr(vec![c(1.0, 0.5), c(-0.3, 2.0), c(0.0, 0.0)]);
        assert_eq!(&metric_m(&prev, &prev)[..2], &[0.0, 0.0]);
        let doubled = Cfr(prev.gains().iter().map(|g| g * 2.0).collect());
        let m = metric_m(&doubled, &prev);
        assert!((m[0] - 1.0).abs() < 1e-15 && (m[1] - 1.0).abs() < 1e-15);
        let rotated = Cfr(prev.gains().iter().map(|g| g * c(0.0, 1.0)).collect());
        let m = metric_m(&rotated, &prev);
        assert!((m[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m[2], f64::INFINITY);
    }

    #[test]
    fn alpha_ranks_nulls_last() {
        assert_eq!(metric_alpha(&Cfr(vec![c(1.0, 0.0); 3])), vec![1.0; 3]);
        let a = metric_alpha(&Cfr(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]));
        let all = select_channels(&a, 3, Order::Largest).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(select_channels(&a, 2, Order::Largest).unwrap().as_slice(), &[0, 2]);
    }

    #[test]
    fn selection_cases() {
        assert_eq!(select_channels(&[3.0, 1.0, 2.0], 2, Order::Smallest).unwrap().as_slice(), &[1, 2]);
        assert_eq!(select_channels(&[7.0; 4], 2, Order::Smallest).unwrap().as_slice(), &[0, 1]);
        assert_eq!(select_channels(&[7.0; 4], 2, Order::Largest).unwrap().as_slice(), &[0, 1]);
        assert_eq!(select_channels(&[1.0, 0.0, 5.0], 3, Order::Smallest).unwrap().len(), 3);
        let starved = select_channels(&[1.0, f64::INFINITY, f64::NAN], 2, Order::Smallest);
        assert_eq!(
            starved.unwrap_err(),
            EstimatorError::Starvation {
                available: 1,
                needed: 2
            }
        );
    }

    #[test]
    fn forced_partition() {
        let selected = IndexSet::new(vec![2, 5, 9, 11], 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let groups = partition_groups(&selected, 3, 4, &mut rng).unwrap();
        assert!(groups.iter().all(|g| g == &selected));
        assert!(partition_groups(&selected, 3, 5, &mut rng).is_err());
    }

    #[test]
    fn table_sized_partition_and_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let picks: Vec<usize> = sample(&mut rng, 128, 100).into_vec();
        let selected = IndexSet::from_unsorted(picks, 128).unwrap();
        let a = partition_groups(&selected, 15, 20, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = partition_groups(&selected, 15, 20, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        for g in &a {
            assert_eq!(g.len(), 20);
            assert!(g.iter().all(|i| selected.as_slice().contains(&i)));
        }
    }

    proptest! {
        #[test]
        fn metric_m_is_scale_invariant(
            seed in any::<u64>(),
            re in -3.0f64..3.0,
            im in -3.0f64..3.0,
        ) {
            prop_assume!(re.abs() + im.abs() > 1e-3);
            let scale = c(re, im);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let prev = Cfr((0..16).map(|_| draw()).collect());
            let cur = Cfr((0..16).map(|_| draw()).collect());
            let base = metric_m(&cur, &prev);
            let scaled = metric_m(
                &Cfr(cur.gains().iter().map(|g| g * scale).collect()),
                &Cfr(prev.gains().iter().map(|g| g * scale).collect()),
            );
            for (a, b) in base.iter().zip(&scaled) {
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }
        }
    }
}
