//! Solar elevation at a fixed local solar time and conversion of horizontal
//! irradiance into the module-plane feature `S_mod`.

use chrono::{Datelike, NaiveDate};

/// Maximum declination magnitude in the Cooper approximation, degrees.
pub const MAX_DECLINATION: f64 = 23.45;

/// Hour angle of 12:40 local solar time: 40 min past noon at 0.25°/min.
pub const SAMPLE_HOUR_ANGLE: f64 = 10.0;

/// Elevation below which `module_irradiance` stops amplifying.
pub const ELEVATION_FLOOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarPosition {
    pub latitude: f64,
    pub declination: f64,
    pub hour_angle: f64,
    pub elevation: f64,
}

impl SolarPosition {
    pub fn at(latitude: f64, date: NaiveDate, hour_angle: f64) -> Self {
        let declination = solar_declination(day_of_year(date));
        SolarPosition {
            latitude,
            declination,
            hour_angle,
            elevation: solar_elevation(latitude, declination, hour_angle),
        }
    }
}

pub fn day_of_year(date: NaiveDate) -> u32 {
    date.ordinal()
}

/// Cooper's declination formula, degrees.
pub fn solar_declination(day: u32) -> f64 {
    MAX_DECLINATION * (360.0 * (284.0 + day as f64) / 365.0).to_radians().sin()
}

/// Solar elevation in degrees from latitude, declination and hour angle.
pub fn solar_elevation(latitude: f64, declination: f64, hour_angle: f64) -> f64 {
    let (phi, delta, h) = (
        latitude.to_radians(),
        declination.to_radians(),
        hour_angle.to_radians(),
    );
    let s = phi.sin() * delta.sin() + phi.cos() * delta.cos() * h.cos();
    s.clamp(-1.0, 1.0).asin().to_degrees()
}

/// Normal-incidence equivalent of a horizontal daily irradiance.
///
/// Elevations under [`ELEVATION_FLOOR`] (including polar night) are raised to
/// the floor so the result stays bounded.
pub fn module_irradiance(s_horiz: f64, elevation: f64) -> f64 {
    if s_horiz == 0.0 {
        return 0.0;
    }
    s_horiz / sin_degrees(elevation.clamp(ELEVATION_FLOOR, 90.0))
}

/// Sine of an angle in degrees, exact at 30° and 90°.
fn sin_degrees(deg: f64) -> f64 {
    match deg {
        30.0 => 0.5,
        90.0 => 1.0,
        _ => deg.to_radians().sin(),
    }
}

/// `S_mod` for a given day and latitude at the 12:40 solar-time sample.
pub fn s_mod_for(latitude: f64, date: NaiveDate, s_horiz: f64) -> f64 {
    let pos = SolarPosition::at(latitude, date, SAMPLE_HOUR_ANGLE);
    module_irradiance(s_horiz, pos.elevation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn ordinal_days() {
        assert_eq!(day_of_year(d(2016, 1, 1)), 1);
        assert_eq!(day_of_year(d(2016, 12, 31)), 366);
        assert_eq!(day_of_year(d(2017, 12, 31)), 365);
        // Jan (31) + Feb 2017 (28) + 1
        let enumerated = d(2017, 1, 1)
            .iter_days()
            .take_while(|x| *x <= d(2017, 3, 1))
            .count() as u32;
        assert_eq!(enumerated, 60);
        assert_eq!(day_of_year(d(2017, 3, 1)), enumerated);
    }

    #[test]
    fn declination_reference_points() {
        assert!(solar_declination(81).abs() < 0.5);
        assert!((solar_declination(172) - 23.45).abs() < 0.2);
        // 23.45 * sin(360 * 285 / 365 deg) = 23.45 * sin(281.0959 deg) = -23.0116
        assert!((solar_declination(1) + 23.01).abs() < 0.05);
    }

    #[test]
    fn elevation_reference_points() {
        assert!((solar_elevation(0.0, 0.0, 0.0) - 90.0).abs() < 1e-9);
        assert!(solar_elevation(90.0, 0.0, 0.0).abs() < 1e-9);
        // sin(a) = sin(38.499)sin(-23) + cos(38.499)cos(-23)cos(10)
        //        = 0.622528*(-0.390731) + 0.782630*0.920505*0.984808
        //        = -0.243242 + 0.709472 = 0.466230 -> a = 27.7898 deg
        let a = solar_elevation(38.499, -23.0, 10.0);
        assert!((a - 27.7898).abs() < 1e-3, "{a}");
    }

    #[test]
    fn module_irradiance_points() {
        assert_eq!(module_irradiance(5.0, 90.0), 5.0);
        assert_eq!(module_irradiance(0.0, 45.0), 0.0);
        assert_eq!(module_irradiance(0.0, -20.0), 0.0);
        assert_eq!(module_irradiance(5.0, 30.0), 10.0);
        let floor = module_irradiance(5.0, ELEVATION_FLOOR);
        assert_eq!(module_irradiance(5.0, 3.0), floor);
        assert_eq!(module_irradiance(5.0, -40.0), floor);
        assert!((floor - 5.0 / 0.17364817766693033).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn declination_bounded_and_periodic(n in 1u32..=366) {
            let dec = solar_declination(n);
            prop_assert!(dec.abs() <= MAX_DECLINATION);
            if n + 365 <= 731 {
                let shifted = MAX_DECLINATION
                    * (360.0 * (284.0 + (n + 365) as f64) / 365.0).to_radians().sin();
                prop_assert!((shifted - dec).abs() < 1e-9);
            }
        }

        #[test]
        fn elevation_satisfies_position_identity(
            lat in -90.0f64..=90.0,
            dec in -MAX_DECLINATION..=MAX_DECLINATION,
            h in -180.0f64..=180.0,
        ) {
            let a = solar_elevation(lat, dec, h);
            prop_assert!((-90.0..=90.0).contains(&a));
            let (p, dl, hr) = (lat.to_radians(), dec.to_radians(), h.to_radians());
            let rhs = p.sin() * dl.sin() + p.cos() * dl.cos() * hr.cos();
            prop_assert!((a.to_radians().sin() - rhs).abs() < 1e-12);
        }

        #[test]
        fn noon_maximises_elevation(
            lat in -90.0f64..=90.0,
            dec in -MAX_DECLINATION..=MAX_DECLINATION,
            h in 0.0f64..=90.0,
        ) {
            prop_assert!(solar_elevation(lat, dec, 0.0) + 1e-12 >= solar_elevation(lat, dec, h));
        }

        #[test]
        fn module_irradiance_monotone_and_linear(
            s in 0.0f64..20.0,
            e1 in ELEVATION_FLOOR..=90.0,
            e2 in ELEVATION_FLOOR..=90.0,
            k in 0.0f64..5.0,
        ) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(module_irradiance(s, lo) >= module_irradiance(s, hi));
            let scaled = module_irradiance(k * s, lo);
            prop_assert!((scaled - k * module_irradiance(s, lo)).abs() <= 1e-9 * (1.0 + scaled));
        }
    }
}
