#![allow(dead_code)]

use std::collections::BTreeSet;

use ddi_core::corpus::{DrugId, TokenizedAbstract};
use ddi_core::labeling::InteractionSample;
use ddi_core::rng::XorShift64Star;

pub fn drug(i: usize) -> DrugId {
    DrugId::from(format!("drug{i:03}").as_str())
}

/// Random abstracts over `n_drugs` drugs and random distinct samples.
pub fn random_corpus(
    rng: &mut XorShift64Star,
    n_abstracts: usize,
    n_samples: usize,
    n_drugs: usize,
) -> (Vec<TokenizedAbstract>, Vec<InteractionSample>) {
    let abstracts = (0..n_abstracts)
        .map(|i| {
            let k = 1 + rng.index(3);
            TokenizedAbstract {
                id: format!("a{i}"),
                tokens: (0..5 + rng.index(10)).map(|_| format!("w{}", rng.index(30))).collect(),
                drug_mentions: (0..k).map(|_| drug(rng.index(n_drugs))).collect(),
            }
        })
        .collect();
    let max_pairs = n_drugs * (n_drugs - 1) / 2;
    let mut seen = BTreeSet::new();
    let mut samples = Vec::new();
    while samples.len() < n_samples.min(max_pairs) {
        let (c, o) = (rng.index(n_drugs), rng.index(n_drugs));
        if c == o || !seen.insert((c.min(o), c.max(o))) {
            continue;
        }
        samples.push(InteractionSample {
            cardiac_drug: drug(c),
            other_drug: drug(o),
            label: u8::from(rng.bernoulli(0.3)),
            template_id: None,
            abstract_ids: BTreeSet::new(),
        });
    }
    (abstracts, samples)
}
