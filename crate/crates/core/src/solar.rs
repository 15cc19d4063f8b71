//! Sunrise and sunset times from the almanac "sunrise/sunset algorithm".
//!
//! The computation follows the classic almanac recipe step by step: day of
//! year, approximate event time, the sun's mean anomaly and true longitude,
//! right ascension (aligned into the longitude's quadrant), declination, the
//! local hour angle for the requested zenith, local mean time and finally UT.
//! Angles are kept in degrees and converted only at the trig calls.
//!
//! Frames are labelled by proximity to the event of their *local solar* day,
//! i.e. the UTC instant shifted by `lon / 15` hours. No time-zone database is
//! consulted.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Official sunrise/sunset zenith, 90°50'.
pub const OFFICIAL_ZENITH_DEG: f64 = 90.833;
pub const CIVIL_ZENITH_DEG: f64 = 96.0;
pub const NAUTICAL_ZENITH_DEG: f64 = 102.0;
pub const ASTRONOMICAL_ZENITH_DEG: f64 = 108.0;

/// Default half-width of the labelling window around an event, in minutes.
pub const DEFAULT_TOLERANCE_MIN: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        let ok = lat_deg.is_finite()
            && lon_deg.is_finite()
            && (-90.0..=90.0).contains(&lat_deg)
            && (-180.0..=180.0).contains(&lon_deg);
        if !ok {
            return Err(Error::InvalidGeo {
                lat: lat_deg,
                lon: lon_deg,
            });
        }
        Ok(GeoPoint { lat_deg, lon_deg })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }

    /// Offset of local mean solar time from UTC, in hours (east positive).
    pub fn solar_offset_hours(&self) -> f64 {
        self.lon_deg / 15.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Rise,
    Set,
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rise" | "sunrise" => Ok(EventKind::Rise),
            "set" | "sunset" => Ok(EventKind::Set),
            other => Err(Error::InvalidArgument(format!(
                "unknown event kind `{other}` (expected rise or set)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventOutcome {
    /// UT hour of the event, in `[0, 24)`.
    At(f64),
    NeverRises,
    NeverSets,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarEvent {
    pub kind: EventKind,
    pub outcome: EventOutcome,
}

impl SolarEvent {
    pub fn ut_hours(&self) -> Option<f64> {
        match self.outcome {
            EventOutcome::At(h) => Some(h),
            _ => None,
        }
    }
}

impl fmt::Display for SolarEvent {
    /// `HH:MM UT`, `never-rises` or `never-sets`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.outcome {
            EventOutcome::At(h) => {
                let total = (h * 60.0).round() as i64 % (24 * 60);
                write!(f, "{:02}:{:02} UT", total / 60, total % 60)
            }
            EventOutcome::NeverRises => f.write_str("never-rises"),
            EventOutcome::NeverSets => f.write_str("never-sets"),
        }
    }
}

/// Image class. Class index 0 is sunrise, 1 is sunset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SunLabel {
    Sunrise,
    Sunset,
}

impl SunLabel {
    pub const ALL: [SunLabel; 2] = [SunLabel::Sunrise, SunLabel::Sunset];

    pub fn class_index(self) -> usize {
        match self {
            SunLabel::Sunrise => 0,
            SunLabel::Sunset => 1,
        }
    }

    pub fn from_class_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(SunLabel::Sunrise),
            1 => Some(SunLabel::Sunset),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SunLabel::Sunrise => "sunrise",
            SunLabel::Sunset => "sunset",
        }
    }

    pub fn event_kind(self) -> EventKind {
        match self {
            SunLabel::Sunrise => EventKind::Rise,
            SunLabel::Sunset => EventKind::Set,
        }
    }
}

impl fmt::Display for SunLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SunLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sunrise" => Ok(SunLabel::Sunrise),
            "sunset" => Ok(SunLabel::Sunset),
            other => Err(Error::InvalidArgument(format!(
                "unknown label `{other}` (expected sunrise or sunset)"
            ))),
        }
    }
}

pub fn day_of_year(year: i32, month: u32, day: u32) -> Result<u32> {
    NaiveDate::from_ymd_opt(year, month, day)
        .map(|d| d.ordinal())
        .ok_or(Error::InvalidDate { year, month, day })
}

fn sin_deg(x: f64) -> f64 {
    x.to_radians().sin()
}

fn cos_deg(x: f64) -> f64 {
    x.to_radians().cos()
}

/// Sunrise or sunset for `date` (treated as a UTC calendar date) at `geo`.
pub fn solar_event(geo: GeoPoint, date: NaiveDate, kind: EventKind, zenith_deg: f64) -> SolarEvent {
    let n = f64::from(date.ordinal());
    let lng_hour = geo.lon_deg / 15.0;
    let t = match kind {
        EventKind::Rise => n + (6.0 - lng_hour) / 24.0,
        EventKind::Set => n + (18.0 - lng_hour) / 24.0,
    };

    let mean_anomaly = 0.9856 * t - 3.289;
    let true_long = (mean_anomaly
        + 1.916 * sin_deg(mean_anomaly)
        + 0.020 * sin_deg(2.0 * mean_anomaly)
        + 282.634)
        .rem_euclid(360.0);

    let mut ra = (0.91764 * true_long.to_radians().tan())
        .atan()
        .to_degrees()
        .rem_euclid(360.0);
    let l_quadrant = (true_long / 90.0).floor() * 90.0;
    let ra_quadrant = (ra / 90.0).floor() * 90.0;
    ra += l_quadrant - ra_quadrant;
    let ra_hours = ra / 15.0;

    let sin_dec = 0.39782 * sin_deg(true_long);
    let cos_dec = sin_dec.asin().cos();

    let numerator = cos_deg(zenith_deg) - sin_dec * sin_deg(geo.lat_deg);
    let denominator = cos_dec * cos_deg(geo.lat_deg);
    // At the poles cos(lat) vanishes; the sign of the numerator alone decides.
    if denominator.abs() < 1e-12 {
        let outcome = if numerator > 0.0 {
            EventOutcome::NeverRises
        } else {
            EventOutcome::NeverSets
        };
        return SolarEvent { kind, outcome };
    }
    let cos_h = numerator / denominator;
    if cos_h > 1.0 {
        return SolarEvent {
            kind,
            outcome: EventOutcome::NeverRises,
        };
    }
    if cos_h < -1.0 {
        return SolarEvent {
            kind,
            outcome: EventOutcome::NeverSets,
        };
    }

    let h_deg = match kind {
        EventKind::Rise => 360.0 - cos_h.acos().to_degrees(),
        EventKind::Set => cos_h.acos().to_degrees(),
    };
    let local_mean = h_deg / 15.0 + ra_hours - 0.06571 * t - 6.622;
    let mut ut = (local_mean - lng_hour).rem_euclid(24.0);
    // rem_euclid can round up to exactly 24.0 for tiny negative inputs.
    if ut >= 24.0 {
        ut -= 24.0;
    }
    SolarEvent {
        kind,
        outcome: EventOutcome::At(ut),
    }
}

/// Local mean solar calendar date of a UTC instant at `geo`.
pub fn local_solar_date(geo: GeoPoint, instant: DateTime<Utc>) -> NaiveDate {
    shift_hours(instant, geo.solar_offset_hours()).date_naive()
}

fn shift_hours(instant: DateTime<Utc>, hours: f64) -> DateTime<Utc> {
    instant + Duration::milliseconds((hours * 3_600_000.0).round() as i64)
}

/// UTC instant of the event belonging to local solar day `local_date`, or
/// `None` on polar days.
pub fn event_instant(
    geo: GeoPoint,
    local_date: NaiveDate,
    kind: EventKind,
    zenith_deg: f64,
) -> Option<DateTime<Utc>> {
    let ut = solar_event(geo, local_date, kind, zenith_deg).ut_hours()?;
    let midnight = local_date.and_hms_opt(0, 0, 0)?.and_utc();
    let mut instant = shift_hours(midnight, ut);
    // The UT hour is only known mod 24; pick the copy whose local date matches.
    let local = local_solar_date(geo, instant);
    if local < local_date {
        instant += Duration::hours(24);
    } else if local > local_date {
        instant -= Duration::hours(24);
    }
    Some(instant)
}

/// Label a frame by its distance to the sunrise and sunset of its local
/// solar day. Returns a label only when exactly one event lies within
/// `tolerance_min` minutes.
pub fn label_window(geo: GeoPoint, timestamp: DateTime<Utc>, tolerance_min: f64) -> Option<SunLabel> {
    let day = local_solar_date(geo, timestamp);
    let near = |kind| {
        event_instant(geo, day, kind, OFFICIAL_ZENITH_DEG)
            .map(|at| ((timestamp - at).num_milliseconds() as f64 / 60_000.0).abs() <= tolerance_min)
            .unwrap_or(false)
    };
    match (near(EventKind::Rise), near(EventKind::Set)) {
        (true, false) => Some(SunLabel::Sunrise),
        (false, true) => Some(SunLabel::Sunset),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn day_of_year_examples() {
        assert_eq!(day_of_year(2016, 1, 1).unwrap(), 1);
        assert_eq!(day_of_year(2016, 3, 1).unwrap(), 61);
        assert_eq!(day_of_year(1990, 6, 25).unwrap(), 176);
        assert_eq!(day_of_year(2015, 12, 31).unwrap(), 365);
        assert_eq!(day_of_year(2016, 12, 31).unwrap(), 366);
        assert!(matches!(day_of_year(2015, 2, 29), Err(Error::InvalidDate { .. })));
        assert!(day_of_year(2016, 13, 1).is_err());
    }

    #[test]
    fn geo_rejects_out_of_range() {
        assert!(GeoPoint::new(99.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -181.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(-90.0, 180.0).is_ok());
    }

    #[test]
    fn almanac_worked_example() {
        // Wayne, NJ on 25 June 1990: the almanac's own worked example gives 9.441 UT.
        let geo = GeoPoint::new(40.9, -74.3).unwrap();
        let ev = solar_event(geo, date(1990, 6, 25), EventKind::Rise, OFFICIAL_ZENITH_DEG);
        let ut = ev.ut_hours().unwrap();
        assert!((ut - 9.441).abs() < 0.01, "{ut}");
    }

    #[test]
    fn equatorial_equinox_rises_near_six() {
        let geo = GeoPoint::new(0.0, 0.0).unwrap();
        let ut = solar_event(geo, date(2016, 3, 20), EventKind::Rise, OFFICIAL_ZENITH_DEG)
            .ut_hours()
            .unwrap();
        assert!((ut - 6.0).abs() < 10.0 / 60.0, "{ut}");
    }

    #[test]
    fn polar_night_and_midnight_sun() {
        let arctic = GeoPoint::new(80.0, 0.0).unwrap();
        let winter = solar_event(arctic, date(2016, 12, 21), EventKind::Rise, OFFICIAL_ZENITH_DEG);
        assert_eq!(winter.outcome, EventOutcome::NeverRises);
        let summer = solar_event(arctic, date(2016, 6, 21), EventKind::Set, OFFICIAL_ZENITH_DEG);
        assert_eq!(summer.outcome, EventOutcome::NeverSets);
        for lat in [89.9, 90.0, -89.95, -90.0] {
            for (m, d) in [(3, 20), (3, 21), (6, 21), (9, 22), (9, 23), (12, 21)] {
                let ev = solar_event(
                    GeoPoint::new(lat, 10.0).unwrap(),
                    date(2016, m, d),
                    EventKind::Rise,
                    OFFICIAL_ZENITH_DEG,
                );
                if let EventOutcome::At(h) = ev.outcome {
                    assert!((0.0..24.0).contains(&h));
                }
            }
        }
    }

    #[test]
    fn display_formats() {
        let ev = SolarEvent {
            kind: EventKind::Rise,
            outcome: EventOutcome::At(6.0 + 7.0 / 60.0),
        };
        assert_eq!(ev.to_string(), "06:07 UT");
        let wrap = SolarEvent {
            kind: EventKind::Rise,
            outcome: EventOutcome::At(23.999),
        };
        assert_eq!(wrap.to_string(), "00:00 UT");
        let never = SolarEvent {
            kind: EventKind::Set,
            outcome: EventOutcome::NeverSets,
        };
        assert_eq!(never.to_string(), "never-sets");
    }

    #[test]
    fn label_window_examples() {
        let geo = GeoPoint::new(48.1, 11.6).unwrap();
        let day = date(2015, 4, 10);
        let rise = event_instant(geo, day, EventKind::Rise, OFFICIAL_ZENITH_DEG).unwrap();
        let set = event_instant(geo, day, EventKind::Set, OFFICIAL_ZENITH_DEG).unwrap();
        assert_eq!(label_window(geo, rise, 15.0), Some(SunLabel::Sunrise));
        assert_eq!(
            label_window(geo, set + Duration::minutes(10), 15.0),
            Some(SunLabel::Sunset)
        );
        assert_eq!(label_window(geo, set + Duration::minutes(16), 15.0), None);
        // Local solar noon is 12:00 - lon/15 h UTC.
        let noon = Utc.with_ymd_and_hms(2015, 4, 10, 11, 13, 36).unwrap();
        assert_eq!(label_window(geo, noon, 15.0), None);
    }

    #[test]
    fn label_window_polar_day_is_unlabelled() {
        let geo = GeoPoint::new(80.0, 0.0).unwrap();
        let t = Utc.with_ymd_and_hms(2016, 12, 21, 9, 0, 0).unwrap();
        assert_eq!(label_window(geo, t, 600.0), None);
    }

    #[test]
    fn event_instant_lands_on_the_local_day() {
        // Far east and far west longitudes push events across UTC midnight.
        for lon in [-179.0, -120.0, 0.0, 120.0, 179.0] {
            let geo = GeoPoint::new(35.0, lon).unwrap();
            let day = date(2016, 7, 4);
            for kind in [EventKind::Rise, EventKind::Set] {
                let at = event_instant(geo, day, kind, OFFICIAL_ZENITH_DEG).unwrap();
                assert_eq!(local_solar_date(geo, at), day, "lon {lon} {kind:?}");
            }
        }
    }
}
