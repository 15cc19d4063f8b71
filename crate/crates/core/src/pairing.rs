//! Training pairs under the five pair-constraint regimes.
//!
//! | regime                      | SS | same camera | same day |
//! |-----------------------------|----|-------------|----------|
//! | random pair                 | no | no          | no       |
//! | random pair with SS         | yes| no          | no       |
//! | same day                    | yes| no          | yes      |
//! | same location               | yes| yes         | no       |
//! | same location and day       | yes| yes         | yes      |
//!
//! "SS" requires one sunrise and one sunset frame in the pair; such pairs are
//! oriented with the sunrise member first. Pairs without SS are stored in
//! canonical id order. "Same day" compares local solar calendar dates.
//!
//! Pairs are index pairs into the record slice handed to [`enumerate_pairs`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::catalog::ImageRecord;
use crate::error::{Error, Result};
use crate::seed::{self, tags};
use crate::solar::SunLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PairConstraint {
    pub require_ss: bool,
    pub same_camera: bool,
    pub same_day: bool,
}

impl PairConstraint {
    pub const RANDOM: Self = Self::new(false, false, false);
    pub const RANDOM_SS: Self = Self::new(true, false, false);
    pub const SAME_DAY_SS: Self = Self::new(true, false, true);
    pub const SAME_CAMERA_SS: Self = Self::new(true, true, false);
    /// The selective regime: one sunrise and one sunset from the same camera and day.
    pub const SELECTIVE: Self = Self::new(true, true, true);

    pub const REGIMES: [Self; 5] = [
        Self::RANDOM,
        Self::RANDOM_SS,
        Self::SAME_DAY_SS,
        Self::SAME_CAMERA_SS,
        Self::SELECTIVE,
    ];

    pub const fn new(require_ss: bool, same_camera: bool, same_day: bool) -> Self {
        PairConstraint {
            require_ss,
            same_camera,
            same_day,
        }
    }

    /// True when `other` imposes every restriction `self` does.
    pub fn is_tightened_by(&self, other: &Self) -> bool {
        (!self.require_ss || other.require_ss)
            && (!self.same_camera || other.same_camera)
            && (!self.same_day || other.same_day)
    }
}

impl fmt::Display for PairConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.require_ss {
            parts.push("ss");
        }
        if self.same_camera {
            parts.push("same-camera");
        }
        if self.same_day {
            parts.push("same-day");
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

impl FromStr for PairConstraint {
    type Err = Error;

    /// Comma-separated flags from `ss`, `same-camera`, `same-day`; `none` or
    /// an empty string means no restriction.
    fn from_str(s: &str) -> Result<Self> {
        let mut c = PairConstraint::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "ss" => c.require_ss = true,
                "same-camera" | "same-location" => c.same_camera = true,
                "same-day" => c.same_day = true,
                "none" | "random" => {}
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown pair constraint flag `{other}` (expected ss, same-camera, same-day or none)"
                    )))
                }
            }
        }
        Ok(c)
    }
}

/// Indices of the two members. With SS, `r` is the sunrise and `s` the sunset frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub r: usize,
    pub s: usize,
}

impl Pair {
    pub fn x_r<'a>(&self, records: &'a [ImageRecord]) -> &'a ImageRecord {
        &records[self.r]
    }

    pub fn x_s<'a>(&self, records: &'a [ImageRecord]) -> &'a ImageRecord {
        &records[self.s]
    }
}

/// Predicate form of a constraint for an unordered pair of records.
pub fn satisfies(a: &ImageRecord, b: &ImageRecord, constraint: &PairConstraint) -> bool {
    if a.id == b.id {
        return false;
    }
    if constraint.require_ss {
        let ok = matches!(
            (a.label, b.label),
            (Some(SunLabel::Sunrise), Some(SunLabel::Sunset)) | (Some(SunLabel::Sunset), Some(SunLabel::Sunrise))
        );
        if !ok {
            return false;
        }
    }
    if constraint.same_camera && a.camera_id != b.camera_id {
        return false;
    }
    if constraint.same_day && a.local_solar_date() != b.local_solar_date() {
        return false;
    }
    true
}

/// Orients a satisfying pair: sunrise first under SS, otherwise lower id first.
pub fn orient(records: &[ImageRecord], i: usize, j: usize, constraint: &PairConstraint) -> Pair {
    let (a, b) = (&records[i], &records[j]);
    let swap = if constraint.require_ss {
        a.label != Some(SunLabel::Sunrise)
    } else {
        a.id > b.id
    };
    if swap {
        Pair { r: j, s: i }
    } else {
        Pair { r: i, s: j }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EnumerateOptions {
    /// Upper bound on the number of returned pairs; larger candidate sets are
    /// subsampled uniformly without replacement.
    pub max_pairs: Option<usize>,
    pub seed: u64,
}

/// One bucket of records that may pair with each other.
struct Group {
    sunrise: Vec<usize>,
    sunset: Vec<usize>,
    all: Vec<usize>,
    ss: bool,
}

impl Group {
    fn count(&self) -> usize {
        if self.ss {
            self.sunrise.len() * self.sunset.len()
        } else {
            let n = self.all.len();
            n * n.saturating_sub(1) / 2
        }
    }

    /// The `k`-th candidate in a fixed order, `k < count()`.
    fn nth(&self, k: usize) -> (usize, usize) {
        if self.ss {
            let m = self.sunset.len();
            (self.sunrise[k / m], self.sunset[k % m])
        } else {
            // Walk rows of the strict upper triangle.
            let n = self.all.len();
            let mut row = 0;
            let mut k = k;
            while k >= n - 1 - row {
                k -= n - 1 - row;
                row += 1;
            }
            (self.all[row], self.all[row + 1 + k])
        }
    }
}

fn groups(records: &[ImageRecord], constraint: &PairConstraint) -> Vec<Group> {
    let mut buckets: BTreeMap<(Option<&str>, Option<NaiveDate>), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if constraint.require_ss && r.label.is_none() {
            continue;
        }
        let cam = constraint.same_camera.then_some(r.camera_id.as_str());
        let day = constraint.same_day.then(|| r.local_solar_date());
        buckets.entry((cam, day)).or_default().push(i);
    }
    buckets
        .into_values()
        .map(|all| {
            let (sunrise, sunset) = all.iter().partition(|&&i| records[i].label == Some(SunLabel::Sunrise));
            Group {
                sunrise,
                sunset,
                all,
                ss: constraint.require_ss,
            }
        })
        .collect()
}

fn diagnostics(records: &[ImageRecord]) -> String {
    let mut per: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for r in records {
        let e = per.entry(r.camera_id.as_str()).or_default();
        match r.label {
            Some(SunLabel::Sunrise) => e.0 += 1,
            Some(SunLabel::Sunset) => e.1 += 1,
            None => e.2 += 1,
        }
    }
    if per.is_empty() {
        return "catalog is empty".into();
    }
    let mut days: BTreeMap<&str, std::collections::BTreeSet<NaiveDate>> = BTreeMap::new();
    for r in records {
        days.entry(r.camera_id.as_str()).or_default().insert(r.local_solar_date());
    }
    per.iter()
        .map(|(cam, (sr, ss, un))| {
            format!(
                "{cam}: {sr} sunrise / {ss} sunset / {un} unlabelled over {} days",
                days[cam].len()
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Per-camera pair counts under `constraint`, for diagnostics.
pub fn pair_counts_per_camera(records: &[ImageRecord], constraint: &PairConstraint) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = records.iter().map(|r| (r.camera_id.clone(), 0)).collect();
    for p in enumerate_all(records, constraint) {
        *out.get_mut(&records[p.r].camera_id).expect("camera present") += 1;
        if records[p.s].camera_id != records[p.r].camera_id {
            *out.get_mut(&records[p.s].camera_id).expect("camera present") += 1;
        }
    }
    out
}

fn sort_by_ids(records: &[ImageRecord], pairs: &mut [Pair]) {
    pairs.sort_by(|a, b| {
        (records[a.r].id.as_str(), records[a.s].id.as_str()).cmp(&(records[b.r].id.as_str(), records[b.s].id.as_str()))
    });
}

fn enumerate_all(records: &[ImageRecord], constraint: &PairConstraint) -> Vec<Pair> {
    let gs = groups(records, constraint);
    let mut pairs = Vec::with_capacity(gs.iter().map(Group::count).sum());
    for g in &gs {
        for k in 0..g.count() {
            let (i, j) = g.nth(k);
            pairs.push(orient(records, i, j, constraint));
        }
    }
    sort_by_ids(records, &mut pairs);
    pairs
}

/// Every pair satisfying `constraint`, sorted by `(id_r, id_s)`. When the
/// candidate count exceeds `options.max_pairs`, a seeded uniform subsample
/// of that size is returned instead (still sorted).
pub fn enumerate_pairs(records: &[ImageRecord], constraint: &PairConstraint, options: EnumerateOptions) -> Result<Vec<Pair>> {
    let gs = groups(records, constraint);
    let total: usize = gs.iter().map(Group::count).sum();
    if total == 0 {
        return Err(Error::NoPairs {
            constraint: constraint.to_string(),
            diagnostics: diagnostics(records),
        });
    }
    let mut pairs = match options.max_pairs {
        Some(cap) if cap < total => {
            let mut rng = seed::stream(options.seed, tags::PAIR_CAP, 0);
            let mut picks = index::sample(&mut rng, total, cap).into_vec();
            picks.sort_unstable();
            let mut out = Vec::with_capacity(cap);
            let mut gi = 0;
            let mut offset = 0;
            for k in picks {
                while k >= offset + gs[gi].count() {
                    offset += gs[gi].count();
                    gi += 1;
                }
                let (i, j) = gs[gi].nth(k - offset);
                out.push(orient(records, i, j, constraint));
            }
            out
        }
        _ => {
            let mut out = Vec::with_capacity(total);
            for g in &gs {
                for k in 0..g.count() {
                    let (i, j) = g.nth(k);
                    out.push(orient(records, i, j, constraint));
                }
            }
            out
        }
    };
    sort_by_ids(records, &mut pairs);
    Ok(pairs)
}

/// A seeded permutation of `pairs` chunked into batches of `batch_pairs`;
/// the final batch may be short.
pub fn sample_epoch(pairs: &[Pair], batch_pairs: usize, seed: u64) -> Result<Vec<Vec<Pair>>> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("cannot sample an epoch from zero pairs".into()));
    }
    if batch_pairs == 0 {
        return Err(Error::InvalidArgument("batch_pairs must be at least 1".into()));
    }
    let mut order = pairs.to_vec();
    order.shuffle(&mut seed::rng(seed));
    Ok(order.chunks(batch_pairs).map(<[Pair]>::to_vec).collect())
}
