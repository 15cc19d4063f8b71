use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ImageRecord;
use crate::error::{Error, Result};
use crate::seed::{self, tags};
use crate::solar::SunLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Random split by record.
    Easy,
    /// Camera-disjoint split.
    Hard,
    /// Earliest records train, latest test (temperature protocol).
    Chronological,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(SplitMode::Easy),
            "hard" => Ok(SplitMode::Hard),
            "chronological" => Ok(SplitMode::Chronological),
            other => Err(Error::InvalidArgument(format!(
                "unknown split mode `{other}` (expected easy, hard or chronological)"
            ))),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Easy => "easy",
            SplitMode::Hard => "hard",
            SplitMode::Chronological => "chronological",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub mode: SplitMode,
    pub train: Vec<ImageRecord>,
    pub test: Vec<ImageRecord>,
}

impl Split {
    pub fn train_ids(&self) -> Vec<&str> {
        self.train.iter().map(|r| r.id.as_str()).collect()
    }

    pub fn test_ids(&self) -> Vec<&str> {
        self.test.iter().map(|r| r.id.as_str()).collect()
    }
}

/// How the test cameras of a hard split are chosen.
#[derive(Debug, Clone)]
pub enum HardSelection {
    Explicit(BTreeSet<String>),
    Random { n_test_cameras: usize, seed: u64 },
}

fn require_both_classes(side: &str, records: &[ImageRecord]) -> Result<()> {
    for class in SunLabel::ALL {
        if !records.iter().any(|r| r.label == Some(class)) {
            return Err(Error::Split(format!("no {class} records in the {side} set")));
        }
    }
    Ok(())
}

fn partition(records: &[ImageRecord], in_test: impl Fn(usize, &ImageRecord) -> bool) -> (Vec<ImageRecord>, Vec<ImageRecord>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if in_test(i, r) {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    (train, test)
}

/// Uniform random split by record; `round(n * test_fraction)` records go to test.
pub fn split_easy(records: &[ImageRecord], test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    if let Some(r) = records.iter().find(|r| r.label.is_none()) {
        return Err(Error::Split(format!("record `{}` is unlabelled", r.id)));
    }
    let n = records.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Split(format!(
            "fraction {test_fraction} of {n} records leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(seed, tags::SPLIT_EASY, 0));
    let mut chosen = vec![false; n];
    for &i in &order[..n_test] {
        chosen[i] = true;
    }
    let (train, test) = partition(records, |i, _| chosen[i]);
    require_both_classes("train", &train)?;
    require_both_classes("test", &test)?;
    Ok(Split {
        mode: SplitMode::Easy,
        train,
        test,
    })
}

/// Camera-disjoint split. Class presence is enforced when every record is labelled.
pub fn split_hard(records: &[ImageRecord], selection: &HardSelection) -> Result<Split> {
    let cameras: BTreeSet<&str> = records.iter().map(|r| r.camera_id.as_str()).collect();
    if cameras.len() < 2 {
        return Err(Error::Split(format!(
            "a hard split needs at least 2 cameras, found {}",
            cameras.len()
        )));
    }
    let test_cameras: HashSet<String> = match selection {
        HardSelection::Explicit(set) => {
            if let Some(missing) = set.iter().find(|c| !cameras.contains(c.as_str())) {
                return Err(Error::Split(format!("test camera `{missing}` is not in the catalog")));
            }
            set.iter().cloned().collect()
        }
        HardSelection::Random { n_test_cameras, seed } => {
            if *n_test_cameras == 0 || *n_test_cameras >= cameras.len() {
                return Err(Error::Split(format!(
                    "cannot hold out {n_test_cameras} of {} cameras",
                    cameras.len()
                )));
            }
            let mut ids: Vec<&str> = cameras.iter().copied().collect();
            ids.shuffle(&mut seed::stream(*seed, tags::SPLIT_HARD, 0));
            ids[..*n_test_cameras].iter().map(|s| s.to_string()).collect()
        }
    };
    let (train, test) = partition(records, |_, r| test_cameras.contains(&r.camera_id));
    if train.is_empty() {
        return Err(Error::Split("every camera is in the test set; train is empty".into()));
    }
    if test.is_empty() {
        return Err(Error::Split("test set is empty".into()));
    }
    if records.iter().all(|r| r.label.is_some()) {
        require_both_classes("train", &train)?;
        require_both_classes("test", &test)?;
    }
    Ok(Split {
        mode: SplitMode::Hard,
        train,
        test,
    })
}

/// Sorts by timestamp and sends the latest `round(n * test_fraction)` records to test.
pub fn split_chronological(records: &[ImageRecord], test_fraction: f64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n = records.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Split(format!(
            "fraction {test_fraction} of {n} records leaves an empty side"
        )));
    }
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.timestamp_utc.cmp(&b.timestamp_utc).then_with(|| a.id.cmp(&b.id)));
    let test = sorted.split_off(n - n_test);
    Ok(Split {
        mode: SplitMode::Chronological,
        train: sorted,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solar::GeoPoint;
    use chrono::{Duration, TimeZone, Utc};

    fn rec(id: usize, camera: usize, label: Option<SunLabel>) -> ImageRecord {
        ImageRecord {
            id: format!("r{id:03}"),
            camera_id: format!("cam{camera}"),
            geo: GeoPoint::new(10.0, 20.0).unwrap(),
            timestamp_utc: Utc.with_ymd_and_hms(2016, 1, 1, 6, 0, 0).unwrap() + Duration::hours(id as i64),
            label,
            temperature_c: None,
            path: format!("r{id}.ppm").into(),
        }
    }

    fn labelled(n: usize, cameras: usize) -> Vec<ImageRecord> {
        (0..n)
            .map(|i| {
                let l = if i % 2 == 0 { SunLabel::Sunrise } else { SunLabel::Sunset };
                rec(i, (i / 2) % cameras, Some(l))
            })
            .collect()
    }

    #[test]
    fn easy_split_is_deterministic() {
        // Two test records drawn from ten can miss a class; such seeds must
        // fail the same way every time.
        let records = labelled(10, 2);
        let mut ok = 0;
        for seed in 0..20 {
            match (split_easy(&records, 0.2, seed), split_easy(&records, 0.2, seed)) {
                (Ok(a), Ok(b)) => {
                    assert_eq!(a.test_ids(), b.test_ids());
                    assert_eq!(a.train_ids(), b.train_ids());
                    assert_eq!(a.test.len(), 2);
                    ok += 1;
                }
                (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
                _ => panic!("seed {seed} is not deterministic"),
            }
        }
        assert!(ok > 0);
    }

    #[test]
    fn easy_split_on_four_records_matches_partition_enumeration() {
        // Brute force over every 2-of-4 test subset: a subset is acceptable iff
        // both classes are present on both sides.
        let records = labelled(4, 1);
        let acceptable: Vec<Vec<usize>> = (0..4)
            .flat_map(|a| ((a + 1)..4).map(move |b| vec![a, b]))
            .filter(|s| {
                let test: Vec<_> = s.iter().map(|&i| records[i].label).collect();
                let train: Vec<_> = (0..4).filter(|i| !s.contains(i)).map(|i| records[i].label).collect();
                [&test, &train]
                    .iter()
                    .all(|side| side.contains(&Some(SunLabel::Sunrise)) && side.contains(&Some(SunLabel::Sunset)))
            })
            .collect();
        assert_eq!(acceptable.len(), 4);
        for seed in 0..50 {
            match split_easy(&records, 0.5, seed) {
                Ok(split) => {
                    let mut idx: Vec<usize> = split
                        .test
                        .iter()
                        .map(|r| records.iter().position(|x| x.id == r.id).unwrap())
                        .collect();
                    idx.sort();
                    assert!(acceptable.contains(&idx), "seed {seed}: {idx:?}");
                }
                Err(Error::Split(_)) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn easy_split_rejects_bad_fraction_and_unlabelled() {
        let records = labelled(10, 2);
        assert!(split_easy(&records, 0.0, 0).is_err());
        assert!(split_easy(&records, 1.0, 0).is_err());
        let mut unl = records.clone();
        unl[3].label = None;
        assert!(matches!(split_easy(&unl, 0.5, 0), Err(Error::Split(_))));
    }

    #[test]
    fn hard_split_with_every_camera_in_test_is_an_error() {
        let records = labelled(20, 3);
        let all: BTreeSet<String> = (0..3).map(|c| format!("cam{c}")).collect();
        assert!(matches!(split_hard(&records, &HardSelection::Explicit(all)), Err(Error::Split(_))));
    }

    #[test]
    fn hard_split_unknown_camera_is_an_error() {
        let records = labelled(20, 3);
        let sel = HardSelection::Explicit(["cam9".to_string()].into_iter().collect());
        let err = split_hard(&records, &sel).unwrap_err();
        assert!(err.to_string().contains("cam9"));
    }

    #[test]
    fn hard_split_is_camera_disjoint() {
        let records = labelled(50, 5);
        let split = split_hard(&records, &HardSelection::Random { n_test_cameras: 1, seed: 7 }).unwrap();
        for tr in &split.train {
            for te in &split.test {
                assert_ne!(tr.camera_id, te.camera_id);
                assert_ne!(tr.id, te.id);
            }
        }
        assert_eq!(split.train.len() + split.test.len(), records.len());
    }

    #[test]
    fn hard_split_needs_two_cameras() {
        let records = labelled(10, 1);
        assert!(split_hard(&records, &HardSelection::Random { n_test_cameras: 1, seed: 0 }).is_err());
    }

    #[test]
    fn chronological_split_sends_latest_to_test() {
        let records: Vec<_> = (0..10).rev().map(|i| rec(i, 0, None)).collect();
        let split = split_chronological(&records, 0.3).unwrap();
        assert_eq!(split.test_ids(), vec!["r007", "r008", "r009"]);
        assert_eq!(split.train.len(), 7);
    }
}
