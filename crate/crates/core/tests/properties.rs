//! Invariants checked on generated inputs.

mod common;

use brainpref::evaluation::{auc, binary_auc, permutation_p_value, permuted_labels};
use brainpref::features::window_bounds;
use brainpref::io::{read_epochs_from, write_epochs_to};
use brainpref::labeling::{group_ranking, tertile_sizes};
use brainpref::lda::{ledoit_wolf, log_softmax, softmax, train};
use brainpref::neurostats::{bonferroni, rm_anova, wilcoxon_signed_rank};
use brainpref::signal::{Epoch, EpochSet, ExplicitRating, RejectReason};
use nalgebra::DMatrix;
use ndarray::Array2;
use proptest::prelude::*;

fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec(-50i32..50, n).prop_map(|v| v.into_iter().map(|x| x as f64 / 4.0).collect()),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

fn matrix(max_n: usize, max_d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..max_n, 1usize..max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(-10.0f64..10.0, n * d).prop_map(move |v| DMatrix::from_row_slice(n, d, &v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn auc_is_rank_invariant((s, mut pos) in scores_and_labels()) {
        pos[0] = true;
        pos[1] = false;
        let a = binary_auc(&s, &pos).unwrap();
        let t: Vec<f64> = s.iter().map(|v| (v / 3.0).exp() * 2.0 - 7.0).collect();
        prop_assert_eq!(binary_auc(&t, &pos).unwrap(), a);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn auc_complement_symmetry((s, mut pos) in scores_and_labels()) {
        pos[0] = true;
        pos[1] = false;
        let flipped: Vec<bool> = pos.iter().map(|p| !p).collect();
        let a = binary_auc(&s, &pos).unwrap();
        let b = binary_auc(&s, &flipped).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
        prop_assert_eq!(a, common::auc_pairs(&s, &pos));
    }

    #[test]
    fn multiclass_auc_in_unit_interval(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 6..40),
    ) {
        let labels: Vec<i32> = (0..rows.len()).map(|i| (i % 3) as i32).collect();
        let a = auc(&rows, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn shrinkage_is_bounded_and_spd(x in matrix(30, 12)) {
        let lw = ledoit_wolf(&x).unwrap();
        prop_assert!((0.0..=1.0).contains(&lw.shrinkage));
        let c = &lw.covariance;
        prop_assert!((c - c.transpose()).abs().max() < 1e-12);
        if lw.target_scale > 1e-9 && lw.shrinkage > 1e-9 {
            let eig = c.clone().symmetric_eigen().eigenvalues;
            prop_assert!(eig.min() > 0.0);
        }
        // trace is preserved by shrinking toward m I
        let n = x.nrows() as f64;
        let mean = x.row_mean();
        let z = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j]);
        let s = z.transpose() * &z / n;
        prop_assert!((c.trace() - s.trace()).abs() < 1e-9 * s.trace().max(1.0));
        let (lit, lambda) = common::ledoit_wolf_literal(&common::rows(&x));
        prop_assert!((lambda - lw.shrinkage).abs() < 1e-10);
        prop_assert!((c[(0, 0)] - lit[0][0]).abs() < 1e-9 * lit[0][0].abs().max(1.0));
    }

    #[test]
    fn probabilities_normalise(scores in prop::collection::vec(-500.0f64..500.0, 1..8)) {
        let p = softmax(&scores);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lp = log_softmax(&scores);
        prop_assert!(lp.iter().all(|v| *v <= 1e-12));
    }

    #[test]
    fn lda_probabilities_normalise(x in matrix(30, 6), probe in prop::collection::vec(-10.0f64..10.0, 6)) {
        let n = x.nrows();
        prop_assume!(n >= 4);
        let labels: Vec<i32> = (0..n).map(|i| (i % 2) as i32).collect();
        if let Ok(m) = train(&x, &labels) {
            let lp = m.predict_log_prob(&probe[..x.ncols()]).unwrap();
            let total: f64 = lp.iter().map(|v| v.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn p_value_contract(obs in 0.0f64..1.0, null in prop::collection::vec(0.0f64..1.0, 0..300)) {
        let p = permutation_p_value(obs, &null);
        let expect = (1 + null.iter().filter(|v| **v >= obs).count()) as f64 / (1 + null.len()) as f64;
        prop_assert_eq!(p, expect);
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert!(p >= 1.0 / (1 + null.len()) as f64);
    }

    #[test]
    fn permutations_preserve_label_multiset(labels in prop::collection::vec(0i32..4, 1..100), seed: u64, idx in 0u64..1000) {
        let mut a = permuted_labels(&labels, seed, idx);
        prop_assert_eq!(&a, &permuted_labels(&labels, seed, idx));
        let mut b = labels.clone();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tertiles_partition_and_balance(n in 0usize..2000) {
        let t = tertile_sizes(n);
        prop_assert_eq!(t.iter().sum::<usize>(), n);
        prop_assert!(t.iter().max().unwrap() - t.iter().min().unwrap() <= 1);
        prop_assert!(t[0] <= t[1] && t[2] <= t[1]);
    }

    #[test]
    fn ranking_tertiles_match_sizes(counts in prop::collection::vec(0u8..4, 3..60)) {
        let ratings: Vec<ExplicitRating> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| ExplicitRating::new("P01", &format!("s{i:03}"), c).unwrap())
            .collect();
        let r = group_ranking(&ratings).unwrap();
        prop_assert_eq!(r.tertile_sizes(), tertile_sizes(counts.len()));
        let scores: Vec<u64> = r.entries.iter().map(|e| e.score).collect();
        prop_assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn windows_tile_without_gaps(rate in 100.0f64..5000.0) {
        let b = window_bounds(rate);
        prop_assert_eq!(b.len(), 15);
        prop_assert!(b.windows(2).all(|w| w[0].1 == w[1].0));
        prop_assert!(b.iter().all(|(s, e)| s < e));
    }

    #[test]
    fn anova_f_is_nonnegative(data in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..12)) {
        let s = rm_anova(&data).unwrap();
        prop_assert!(s.f >= 0.0);
        prop_assert!((0.0..=1.0).contains(&s.p));
        prop_assert_eq!((s.df1, s.df2), (2, 2 * (data.len() - 1)));
    }

    #[test]
    fn bonferroni_is_monotone_and_capped(p in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let adj = bonferroni(&p);
        for (a, q) in adj.iter().zip(&p) {
            prop_assert!(*a >= *q && *a <= 1.0);
        }
    }

    #[test]
    fn wilcoxon_sign_flip_symmetry(d in prop::collection::vec(-3i32..=3, 5..30)) {
        let d: Vec<f64> = d.into_iter().map(|v| v as f64).collect();
        prop_assume!(d.iter().filter(|v| **v != 0.0).count() >= 5);
        let a = wilcoxon_signed_rank(&d).unwrap();
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let b = wilcoxon_signed_rank(&neg).unwrap();
        prop_assert_eq!(a.w, b.w);
        prop_assert!((a.p - b.p).abs() < 1e-12);
        prop_assert!(a.p > 0.0 && a.p <= 1.0);
    }

    #[test]
    fn epoch_files_round_trip(
        values in prop::collection::vec(-300.0f64..300.0, 2 * 12),
        label in prop::option::of(0i8..4),
        rejected in any::<bool>(),
    ) {
        let mut set = EpochSet::new(100.0, vec!["Fz".into(), "Pz".into()]);
        set.epochs.push(Epoch {
            participant_id: "P07".into(),
            stimulus_id: "img004".into(),
            presentation_ordinal: 3,
            data: Array2::from_shape_vec((2, 12), values).unwrap(),
            rejection: rejected.then_some(RejectReason::Artifact),
            label,
        });
        let mut buf = Vec::new();
        write_epochs_to(&mut buf, &set).unwrap();
        let back = read_epochs_from(&buf[..]).unwrap();
        prop_assert_eq!(back, set);
    }
}
