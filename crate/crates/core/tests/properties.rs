//! Randomized invariants: distribution normalization, feature-map
//! geometry, contraction multilinearity, ranking invariance, and
//! serialization roundtrips.

use proptest::prelude::*;

use tnq_core::ctn::{born_probability, build_mps};
use tnq_core::data::LabeledImageSet;
use tnq_core::diag::roc_auc;
use tnq_core::encode::{flip_to_top_right, hypersphere_map, standardize, JetImage, Scaler};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn born_scores_form_a_distribution(
        scores in prop::collection::vec(-5.0f64..5.0, 1..8),
    ) {
        prop_assume!(scores.iter().any(|s| s.abs() > 1e-6));
        let probs = born_probability(&scores).unwrap();
        let total: f64 = probs.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for p in probs {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn hypersphere_map_stays_on_the_unit_sphere(
        x in 0.0f64..std::f64::consts::PI,
        dim in 2usize..12,
    ) {
        let v = hypersphere_map(x, dim).unwrap();
        let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn standardize_lands_in_the_angle_range(
        pixels in prop::collection::vec(-10.0f64..10.0, 9),
        lo in -5.0f64..0.0,
        span in 0.1f64..10.0,
    ) {
        let image = JetImage::new(3, 3, pixels).unwrap();
        let scaler = Scaler { lo, hi: lo + span };
        let mapped = standardize(&image, &scaler);
        for &p in mapped.pixels() {
            prop_assert!((0.0..=std::f64::consts::PI).contains(&p));
        }
    }

    #[test]
    fn orientation_flip_is_idempotent(
        pixels in prop::collection::vec(0.0f64..1.0, 16),
    ) {
        let image = JetImage::new(4, 4, pixels).unwrap();
        let once = flip_to_top_right(&image);
        let twice = flip_to_top_right(&once);
        prop_assert_eq!(once.pixels(), twice.pixels());
    }

    #[test]
    fn auc_is_invariant_under_positive_affine_maps(
        scores in prop::collection::vec(-3.0f64..3.0, 4..24),
        labels in prop::collection::vec(0usize..2, 4..24),
        scale in 0.01f64..50.0,
        offset in -10.0f64..10.0,
    ) {
        let n = scores.len().min(labels.len());
        let scores = &scores[..n];
        let mut labels = labels[..n].to_vec();
        labels[0] = 0;
        labels[1] = 1;
        let base = roc_auc(scores, &labels).unwrap().auc;
        let mapped: Vec<f64> = scores.iter().map(|s| scale * s + offset).collect();
        let auc = roc_auc(&mapped, &labels).unwrap().auc;
        prop_assert!((auc - base).abs() <= 1e-12);
    }

    #[test]
    fn chain_contraction_is_multilinear_in_the_parameters(
        seed in 0u64..1000,
        factor in 0.5f64..2.0,
    ) {
        let mut net = build_mps(4, 2, 2, 2).unwrap();
        net.init_params(seed);
        let features: Vec<Vec<f64>> = (0..4)
            .map(|k| hypersphere_map(0.3 + 0.5 * k as f64, 2).unwrap())
            .collect();
        let base = net.forward(&features).unwrap();
        let scaled: Vec<f64> = net.params().iter().map(|p| factor * p).collect();
        net.set_params(&scaled).unwrap();
        let out = net.forward(&features).unwrap();
        // One tensor per site, each entering the contraction once, so
        // scaling every parameter scales the output by factor^4.
        let gain = factor.powi(4);
        for (a, b) in base.iter().zip(&out) {
            prop_assert!((gain * a - b).abs() <= 1e-12 * gain * a.abs().max(1.0));
        }
    }

    #[test]
    fn dataset_bytes_roundtrip(
        pixels in prop::collection::vec(-1.0f32..1.0, 2 * 6),
        labels in prop::collection::vec(0u8..2, 2),
    ) {
        let set = LabeledImageSet::new(2, 3, pixels, labels).unwrap();
        let back = LabeledImageSet::from_bytes(&set.to_bytes()).unwrap();
        prop_assert_eq!(set, back);
    }
}
