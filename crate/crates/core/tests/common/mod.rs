//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sosnet::catalog::ImageRecord;
use sosnet::pairing::PairConstraint;
use sosnet::solar::{EventKind, GeoPoint, SunLabel, OFFICIAL_ZENITH_DEG};

#[derive(Debug, PartialEq)]
pub enum Oracle {
    At(f64),
    NeverRises,
    NeverSets,
}

fn julian_day(date: NaiveDate, ut_hours: f64) -> f64 {
    // 0001-01-01 (proleptic Gregorian) is JD 1721425.5.
    1_721_424.5 + f64::from(date.num_days_from_ce()) + ut_hours / 24.0
}

/// Declination (deg) and equation of time (minutes) from the Julian-century
/// solar position model: geometric mean longitude, equation of centre,
/// nutation-corrected obliquity.
fn sun_position(jd: f64) -> (f64, f64) {
    let t = (jd - 2_451_545.0) / 36_525.0;
    let l0 = (280.46646 + t * (36_000.76983 + t * 0.0003032)).rem_euclid(360.0);
    let m = 357.52911 + t * (35_999.05029 - 0.0001537 * t);
    let e = 0.016708634 - t * (0.000042037 + 0.0000001267 * t);
    let mr = m.to_radians();
    let c = mr.sin() * (1.914602 - t * (0.004817 + 0.000014 * t))
        + (2.0 * mr).sin() * (0.019993 - 0.000101 * t)
        + (3.0 * mr).sin() * 0.000289;
    let omega = 125.04 - 1934.136 * t;
    let app_long = l0 + c - 0.00569 - 0.00478 * omega.to_radians().sin();
    let eps0 = 23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.00059 - t * 0.001813))) / 60.0) / 60.0;
    let eps = eps0 + 0.00256 * omega.to_radians().cos();
    let decl = (eps.to_radians().sin() * app_long.to_radians().sin()).asin().to_degrees();
    let y = (eps.to_radians() / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eot = y * (2.0 * l0r).sin() - 2.0 * e * mr.sin() + 4.0 * e * y * mr.sin() * (2.0 * l0r).cos()
        - 0.5 * y * y * (4.0 * l0r).sin()
        - 1.25 * e * e * (2.0 * mr).sin();
    (decl, 4.0 * eot.to_degrees())
}

/// Event UT hour, re-evaluating the sun's position at the event instant.
pub fn solar_oracle(lat: f64, lon: f64, date: NaiveDate, kind: EventKind) -> Oracle {
    let mut ut = match kind {
        EventKind::Rise => 6.0 - lon / 15.0,
        EventKind::Set => 18.0 - lon / 15.0,
    };
    for _ in 0..5 {
        let (decl, eot) = sun_position(julian_day(date, ut));
        let cos_h = (OFFICIAL_ZENITH_DEG.to_radians().cos() - lat.to_radians().sin() * decl.to_radians().sin())
            / (lat.to_radians().cos() * decl.to_radians().cos());
        if cos_h > 1.0 {
            return Oracle::NeverRises;
        }
        if cos_h < -1.0 {
            return Oracle::NeverSets;
        }
        let h = cos_h.acos().to_degrees();
        let signed = if kind == EventKind::Rise { h } else { -h };
        ut = (720.0 - 4.0 * (lon + signed) - eot) / 60.0;
    }
    Oracle::At(ut.rem_euclid(24.0))
}

pub fn circular_minutes(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(24.0);
    d.min(24.0 - d) * 60.0
}

/// A random catalog of `n` records over a few cameras and days. Timestamps
/// cluster around local dawn, dusk and midnight so day boundaries are hit.
pub fn random_catalog(seed: u64, n: usize) -> Vec<ImageRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cameras = rng.random_range(1..=6);
    let cams: Vec<(String, f64, f64)> = (0..n_cameras)
        .map(|c| (format!("cam{c}"), rng.random_range(-60.0..60.0), rng.random_range(-179.0..179.0)))
        .collect();
    let base = NaiveDate::from_ymd_opt(2016, 5, 1).unwrap().and_hms_opt(0, 0, 0).unwrap().and_utc();
    (0..n)
        .map(|i| {
            let (cam, lat, lon) = &cams[rng.random_range(0..cams.len())];
            let day = rng.random_range(0..4i64);
            let local_hour = [6.0, 18.0, 0.0, 23.9][rng.random_range(0..4)] + rng.random_range(-0.3..0.3);
            let utc_seconds = (day as f64 * 24.0 + local_hour - lon / 15.0) * 3600.0;
            let ts = base + chrono::Duration::seconds(utc_seconds.round() as i64);
            let label = match rng.random_range(0..5) {
                0 | 1 => Some(SunLabel::Sunrise),
                2 | 3 => Some(SunLabel::Sunset),
                _ => None,
            };
            ImageRecord {
                id: format!("r{i:04}"),
                camera_id: cam.clone(),
                geo: GeoPoint::new(*lat, *lon).unwrap(),
                timestamp_utc: ts,
                label,
                temperature_c: None,
                path: PathBuf::from(format!("images/r{i:04}.ppm")),
            }
        })
        .collect()
}

/// Local mean solar day number, computed from raw seconds.
fn solar_day(ts: DateTime<Utc>, lon: f64) -> i64 {
    let shifted = ts.timestamp_millis() as f64 + lon / 15.0 * 3_600_000.0;
    (shifted.round() / 86_400_000.0).floor() as i64
}

/// All unordered pairs passing the constraint, as `(first id, second id)`
/// with the sunrise member first under SS and the smaller id first otherwise.
pub fn brute_force_pairs(records: &[ImageRecord], c: &PairConstraint) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for i in 0..records.len() {
        for j in i + 1..records.len() {
            let (a, b) = (&records[i], &records[j]);
            if c.require_ss && !(a.label.is_some() && b.label.is_some() && a.label != b.label) {
                continue;
            }
            if c.same_camera && a.camera_id != b.camera_id {
                continue;
            }
            if c.same_day && solar_day(a.timestamp_utc, a.geo.lon_deg()) != solar_day(b.timestamp_utc, b.geo.lon_deg()) {
                continue;
            }
            let (first, second) = if c.require_ss {
                if a.label == Some(SunLabel::Sunrise) { (a, b) } else { (b, a) }
            } else if a.id < b.id {
                (a, b)
            } else {
                (b, a)
            };
            out.insert((first.id.clone(), second.id.clone()));
        }
    }
    out
}
