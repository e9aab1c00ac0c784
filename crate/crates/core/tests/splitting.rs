mod common;

use std::collections::BTreeSet;

use ddi_core::rng::XorShift64Star;
use ddi_core::splitting::{assign_abstracts, leakage_report, split_corpus, Split, SplitRatios};
use proptest::prelude::*;

proptest! {
    #[test]
    fn assignment_matches_triple_loop(seed in any::<u64>(), na in 1..80usize, ns in 1..60usize) {
        let mut rng = XorShift64Star::new(seed);
        let (abstracts, mut samples) = common::random_corpus(&mut rng, na, ns, 12);
        let ratios = SplitRatios::new(0.6, 0.2, 0.2).unwrap();
        let assignment = split_corpus(&abstracts, &samples, ratios, seed).unwrap();
        assign_abstracts(&assignment, &abstracts, &mut samples).unwrap();
        for s in &samples {
            let split = assignment.sample_split[&s.key()];
            let mut want = BTreeSet::new();
            for a in &abstracts {
                if assignment.abstract_split[&a.id] != split {
                    continue;
                }
                for d in &a.drug_mentions {
                    if *d == s.cardiac_drug || *d == s.other_drug {
                        want.insert(a.id.clone());
                    }
                }
            }
            prop_assert_eq!(&s.abstract_ids, &want);
        }
        prop_assert_eq!(leakage_report(&assignment, &samples).unwrap().cross_split_total(), 0);
    }

    #[test]
    fn split_sizes_partition_everything(n in 0..500usize, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let ratios = SplitRatios::new(lo, hi - lo, 1.0 - hi).unwrap();
        let sizes = ratios.sizes(n);
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        for (s, r) in sizes.iter().zip([ratios.train, ratios.dev, ratios.test]) {
            prop_assert!((*s as f64 - r * n as f64).abs() < 1.0 + 1e-9);
        }
    }
}

#[test]
fn same_seed_same_assignment_different_seed_differs() {
    let mut rng = XorShift64Star::new(5);
    let (abstracts, samples) = common::random_corpus(&mut rng, 100, 80, 20);
    let ratios = SplitRatios::new(0.8, 0.1, 0.1).unwrap();
    let a = split_corpus(&abstracts, &samples, ratios, 1).unwrap();
    let b = split_corpus(&abstracts, &samples, ratios, 1).unwrap();
    let c = split_corpus(&abstracts, &samples, ratios, 2).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.sample_split, c.sample_split);
    let train = a.sample_split.values().filter(|s| **s == Split::Train).count();
    assert_eq!(train, 64);
}
