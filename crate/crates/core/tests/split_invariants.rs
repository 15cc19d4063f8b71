use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;

use chrono::{Duration, NaiveDate};
use proptest::prelude::*;
use sosnet::catalog::{generate_records, split_chronological, split_easy, split_hard, HardSelection, ImageRecord, SynthConfig};
use sosnet::solar::{GeoPoint, SunLabel};

fn ids(rs: &[ImageRecord]) -> BTreeSet<&str> {
    rs.iter().map(|r| r.id.as_str()).collect()
}

fn cameras(rs: &[ImageRecord]) -> BTreeSet<&str> {
    rs.iter().map(|r| r.camera_id.as_str()).collect()
}

fn labelled_catalog(n: usize) -> Vec<ImageRecord> {
    let base = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap().and_hms_opt(6, 0, 0).unwrap().and_utc();
    (0..n)
        .map(|i| ImageRecord {
            id: format!("img{i:05}"),
            camera_id: format!("cam{}", i % 37),
            geo: GeoPoint::new(0.0, 0.0).unwrap(),
            timestamp_utc: base + Duration::minutes(i as i64),
            label: Some(if i % 2 == 0 { SunLabel::Sunrise } else { SunLabel::Sunset }),
            temperature_c: None,
            path: PathBuf::from(format!("img{i:05}.ppm")),
        })
        .collect()
}

#[test]
fn thousand_hard_splits_are_camera_disjoint_partitions() {
    let mut catalogs = Vec::new();
    for s in 0..10u64 {
        let config = SynthConfig {
            n_cameras: 3 + s as usize,
            days_per_camera: 4,
            seed: s,
            ..SynthConfig::default()
        };
        catalogs.push(generate_records(&config).unwrap());
    }
    for seed in 0..1000u64 {
        let records = &catalogs[(seed % 10) as usize];
        let n_cams = cameras(records).len();
        let k = 1 + (seed as usize / 10) % (n_cams - 1);
        let split = split_hard(records, &HardSelection::Random { n_test_cameras: k, seed }).unwrap();
        assert!(cameras(&split.train).is_disjoint(&cameras(&split.test)));
        assert_eq!(cameras(&split.test).len(), k);
        let (train, test) = (ids(&split.train), ids(&split.test));
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), records.len());
        assert_eq!(train.union(&test).copied().collect::<BTreeSet<_>>(), ids(records));
    }
}

#[test]
fn easy_split_reproduces_the_reported_test_count() {
    let records = labelled_catalog(12_970);
    let split = split_easy(&records, 2522.0 / 12970.0, 0).unwrap();
    assert_eq!(split.test.len(), 2_522);
    assert_eq!(split.train.len(), 10_448);
    let all: HashSet<&str> = split.train.iter().chain(&split.test).map(|r| r.id.as_str()).collect();
    assert_eq!(all.len(), 12_970);
}

#[test]
fn chronological_split_holds_out_the_latest_frames() {
    let mut records = labelled_catalog(101);
    records.reverse();
    let split = split_chronological(&records, 0.3).unwrap();
    assert_eq!(split.test.len(), 30);
    let latest_train = split.train.iter().map(|r| r.timestamp_utc).max().unwrap();
    assert!(split.test.iter().all(|r| r.timestamp_utc > latest_train));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn easy_split_partitions_by_id(n in 10usize..400, frac in 0.05f64..0.95, seed in 0u64..10_000) {
        let records = labelled_catalog(n);
        let n_test = (n as f64 * frac).round() as usize;
        prop_assume!(n_test > 0 && n_test < n);
        match split_easy(&records, frac, seed) {
            Ok(split) => {
                prop_assert_eq!(split.test.len(), n_test);
                let (train, test) = (ids(&split.train), ids(&split.test));
                prop_assert!(train.is_disjoint(&test));
                prop_assert_eq!(train.len() + test.len(), n);
            }
            // Only a side missing a class may be refused.
            Err(sosnet::Error::Split(msg)) => prop_assert!(msg.contains("no ")),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
