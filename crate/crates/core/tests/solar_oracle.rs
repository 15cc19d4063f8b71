//! Sunrise/sunset times checked against an independent ephemeris.

mod common;

use chrono::NaiveDate;
use common::{circular_minutes, solar_oracle as oracle, Oracle};
use sosnet::solar::{solar_event, EventKind, EventOutcome, GeoPoint, OFFICIAL_ZENITH_DEG};

#[test]
fn oracle_reproduces_a_known_almanac_value() {
    // Greenwich on the June solstice: sunrise 03:43 UT, sunset 20:21 UT.
    let d = NaiveDate::from_ymd_opt(2016, 6, 21).unwrap();
    let Oracle::At(rise) = oracle(51.4769, 0.0, d, EventKind::Rise) else { panic!() };
    let Oracle::At(set) = oracle(51.4769, 0.0, d, EventKind::Set) else { panic!() };
    assert!(circular_minutes(rise, 3.0 + 43.0 / 60.0) < 1.5, "{rise}");
    assert!(circular_minutes(set, 20.0 + 21.0 / 60.0) < 1.5, "{set}");
}

#[test]
fn grid_agrees_with_ephemeris_within_five_minutes() {
    let mut worst = 0.0f64;
    let mut compared = 0;
    for lat in [-60.0, -30.0, 0.0, 30.0, 60.0] {
        for lon in [-120.0, 0.0, 120.0] {
            for month in 1..=12 {
                let date = NaiveDate::from_ymd_opt(2016, month, 15).unwrap();
                let geo = GeoPoint::new(lat, lon).unwrap();
                for kind in [EventKind::Rise, EventKind::Set] {
                    let ours = solar_event(geo, date, kind, OFFICIAL_ZENITH_DEG).outcome;
                    match (ours, oracle(lat, lon, date, kind)) {
                        (EventOutcome::At(a), Oracle::At(b)) => {
                            let d = circular_minutes(a, b);
                            assert!(d <= 5.0, "lat {lat} lon {lon} {date} {kind:?}: {a} vs {b} ({d:.2} min)");
                            worst = worst.max(d);
                            compared += 1;
                        }
                        (EventOutcome::NeverRises, Oracle::NeverRises) | (EventOutcome::NeverSets, Oracle::NeverSets) => {}
                        (a, b) => panic!("lat {lat} lon {lon} {date} {kind:?}: {a:?} vs {b:?}"),
                    }
                }
            }
        }
    }
    assert_eq!(compared, 5 * 3 * 12 * 2);
    assert!(worst < 5.0);
}

#[test]
fn polar_days_are_classified_like_the_ephemeris() {
    let cases = [
        (80.0, 6, EventKind::Rise, Oracle::NeverSets),
        (80.0, 12, EventKind::Set, Oracle::NeverRises),
        (-80.0, 12, EventKind::Rise, Oracle::NeverSets),
        (-80.0, 6, EventKind::Set, Oracle::NeverRises),
        (70.0, 6, EventKind::Rise, Oracle::NeverSets),
        (-70.0, 6, EventKind::Set, Oracle::NeverRises),
    ];
    for (lat, month, kind, expected) in cases {
        for lon in [-120.0, 0.0, 120.0] {
            let date = NaiveDate::from_ymd_opt(2016, month, 21).unwrap();
            assert_eq!(oracle(lat, lon, date, kind), expected);
            let ours = solar_event(GeoPoint::new(lat, lon).unwrap(), date, kind, OFFICIAL_ZENITH_DEG).outcome;
            let same = matches!(
                (&ours, &expected),
                (EventOutcome::NeverRises, Oracle::NeverRises) | (EventOutcome::NeverSets, Oracle::NeverSets)
            );
            assert!(same, "lat {lat} lon {lon} {date}: {ours:?} vs {expected:?}");
        }
    }
}
