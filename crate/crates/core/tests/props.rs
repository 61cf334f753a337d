use proptest::prelude::*;

use plankton::clustering::{self, FuzzyConfig};
use plankton::features::npy;
use plankton::metrics::{overlaps, purity};

mod common;

fn labelings() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..40).prop_flat_map(|n| (prop::collection::vec(0usize..5, n), prop::collection::vec(0usize..5, n)))
}

proptest! {
    #[test]
    fn purity_is_invariant_to_relabeling((w, y) in labelings(), shift in 1usize..5) {
        let relabel = |v: &[usize]| v.iter().map(|x| (x + shift) % 5).collect::<Vec<_>>();
        let p = purity(&w, &y).unwrap();
        prop_assert!((p - purity(&relabel(&w), &y).unwrap()).abs() < 1e-12);
        prop_assert!((p - purity(&w, &relabel(&y)).unwrap()).abs() < 1e-12);
        prop_assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn metrics_agree_with_oracle((w, y) in labelings()) {
        prop_assert!((purity(&w, &y).unwrap() - common::purity_oracle(&w, &y)).abs() < 1e-12);
        prop_assert_eq!(overlaps(&w, &y).unwrap(), common::overlaps_oracle(&w, &y));
    }

    #[test]
    fn one_cluster_per_class_has_no_overlaps(y in prop::collection::vec(0usize..6, 1..30)) {
        prop_assert_eq!(purity(&y, &y).unwrap(), 1.0);
        prop_assert_eq!(overlaps(&y, &y).unwrap(), 0);
    }

    #[test]
    fn npy_round_trip_is_bit_exact(data in prop::collection::vec(any::<f32>(), 0..200)) {
        let n = data.len();
        let (shape, back) = npy::from_bytes(&npy::to_bytes(&[n], &data).unwrap()).unwrap();
        prop_assert_eq!(shape, vec![n]);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&data));
    }

    #[test]
    fn fuzzy_memberships_are_rows_of_a_stochastic_matrix(
        pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 4..40),
        k in 2usize..4,
        seed in 0u64..100,
    ) {
        prop_assume!(pts.len() >= k);
        let cfg = FuzzyConfig { seed, ..FuzzyConfig::new(k) };
        let fit = clustering::fit(&pts, &cfg).unwrap();
        for row in &fit.memberships {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|u| (0.0..=1.0).contains(u)));
        }
        prop_assert!(fit.objective_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12));
    }

    #[test]
    fn translating_points_translates_centroids(
        pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 6..30),
        dx in -10.0f64..10.0,
    ) {
        let cfg = FuzzyConfig { seed: 3, ..FuzzyConfig::new(2) };
        let a = clustering::fit(&pts, &cfg).unwrap();
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] + dx, p[1] - dx]).collect();
        let b = clustering::fit(&moved, &cfg).unwrap();
        for (ca, cb) in a.centroids.iter().zip(&b.centroids) {
            prop_assert!((ca[0] + dx - cb[0]).abs() < 1e-4 && (ca[1] - dx - cb[1]).abs() < 1e-4);
        }
    }
}
