mod common;

use std::collections::BTreeSet;

use common::{brute_force_pairs, random_catalog};
use proptest::prelude::*;
use sosnet::pairing::{enumerate_pairs, EnumerateOptions, PairConstraint};
use sosnet::Error;

fn enumerated(records: &[sosnet::catalog::ImageRecord], c: &PairConstraint, max_pairs: Option<usize>, seed: u64) -> Result<Vec<(String, String)>, Error> {
    let pairs = enumerate_pairs(records, c, EnumerateOptions { max_pairs, seed })?;
    Ok(pairs
        .iter()
        .map(|p| (p.x_r(records).id.clone(), p.x_s(records).id.clone()))
        .collect())
}

#[test]
fn matches_brute_force_on_random_catalogs() {
    for seed in 0..10 {
        let records = random_catalog(seed, 20 + 18 * seed as usize);
        for c in PairConstraint::REGIMES {
            let expected = brute_force_pairs(&records, &c);
            match enumerated(&records, &c, None, 0) {
                Ok(got) => {
                    let set: BTreeSet<_> = got.iter().cloned().collect();
                    assert_eq!(set.len(), got.len(), "duplicate pairs under {c}");
                    assert_eq!(set, expected, "catalog {seed} under {c}");
                }
                Err(Error::NoPairs { .. }) => assert!(expected.is_empty(), "catalog {seed} under {c}"),
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn tighter_regimes_give_subsets() {
    let records = random_catalog(99, 200);
    let all: Vec<_> = PairConstraint::REGIMES.iter().map(|c| brute_force_pairs(&records, c)).collect();
    let ss = &all[1];
    for tighter in &all[2..] {
        assert!(tighter.is_subset(ss));
    }
    assert!(all[4].is_subset(&all[2]) && all[4].is_subset(&all[3]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn capped_enumeration_is_a_seeded_subset(seed in 0u64..1000, cap in 1usize..40, regime in 0usize..5) {
        let records = random_catalog(seed, 60);
        let c = PairConstraint::REGIMES[regime];
        let full = brute_force_pairs(&records, &c);
        prop_assume!(!full.is_empty());
        let a = enumerated(&records, &c, Some(cap), seed).unwrap();
        let b = enumerated(&records, &c, Some(cap), seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), cap.min(full.len()));
        prop_assert!(a.iter().all(|p| full.contains(p)));
    }
}
