use ddi_core::eval::{auc, confusion, metrics, metrics_report, roc_auc};
use proptest::prelude::*;

fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

proptest! {
    #[test]
    fn auc_equals_pairwise_oracle(
        data in prop::collection::vec((0..12i32, 0..2u8), 2..200),
    ) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s) / 4.0).collect();
        let labels: Vec<u8> = data.iter().map(|(_, y)| *y).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let a = auc(&scores, &labels).unwrap().unwrap();
        prop_assert!((a - pairwise_auc(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn roc_is_monotone_from_origin_to_corner(
        data in prop::collection::vec((-1.0..1.0f64, 0..2u8), 2..100),
    ) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| *s).collect();
        let labels: Vec<u8> = data.iter().map(|(_, y)| *y).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let curve = roc_auc(&scores, &labels).unwrap();
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in curve.points.windows(2) {
            prop_assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
        }
    }

    #[test]
    fn confusion_cells_sum_to_n(data in prop::collection::vec((-1.0..1.0f64, 0..2u8), 1..100), t in -1.0..1.0f64) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| *s).collect();
        let labels: Vec<u8> = data.iter().map(|(_, y)| *y).collect();
        let c = confusion(&scores, &labels, t).unwrap();
        prop_assert_eq!(c.total() as usize, data.len());
        let m = metrics(&c);
        for r in [m.sensitivity, m.specificity, m.ppv, m.npv] {
            if let Some(v) = r.value() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

#[test]
fn single_class_auc_is_undefined() {
    assert_eq!(auc(&[0.1, 0.2], &[1, 1]).unwrap(), None);
    assert!(roc_auc(&[0.1, 0.2], &[0, 0]).is_err());
    assert!(metrics_report(&[0.1, 0.2], &[0, 0], 0.0).unwrap().auc.is_none());
}

#[test]
fn all_positive_predictions_leave_npv_undefined() {
    let labels: Vec<u8> = (0..1000).map(|i| u8::from(i < 779)).collect();
    let scores = vec![1.0; labels.len()];
    let m = metrics(&confusion(&scores, &labels, 0.5).unwrap());
    assert_eq!(m.sensitivity.value(), Some(1.0));
    assert_eq!(m.specificity.value(), Some(0.0));
    assert_eq!(m.ppv.value(), Some(779.0 / 1000.0));
    assert!(m.npv.is_undefined());
}
