//! Unit conventions. Everything internal is miles, hours and mph; the
//! configuration file carries explicit unit suffixes that are converted here.

use std::fmt;

use serde::{Deserialize, Deserializer};

pub const FEET_PER_MILE: f64 = 5280.0;
pub const KM_PER_MILE: f64 = 1.609344;
pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const MINUTES_PER_HOUR: f64 = 60.0;

pub fn feet_to_miles(ft: f64) -> f64 {
    ft / FEET_PER_MILE
}

pub fn km_to_miles(km: f64) -> f64 {
    km / KM_PER_MILE
}

pub fn kmph_to_mph(kmph: f64) -> f64 {
    kmph / KM_PER_MILE
}

/// Physical dimension of a quantity written in the configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// Converted to miles.
    Length,
    /// Converted to feet (effective vehicle lengths, radii).
    ShortLength,
    /// Converted to mph.
    Speed,
    /// Converted to seconds.
    Duration,
    /// Converted to vehicles per mile.
    Density,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length | Dimension::ShortLength => "length",
            Dimension::Speed => "speed",
            Dimension::Duration => "duration",
            Dimension::Density => "density",
        };
        f.write_str(s)
    }
}

/// Parses strings such as `"0.8 km"`, `"200 ft"`, `"100 kmph"` or `"1 min"`
/// into the internal unit of `dim`.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .ok_or_else(|| format!("`{text}` has no unit suffix (expected a {dim})"))?;
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{text}` does not start with a number"))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    let unit = unit.trim();
    let (mul, div) = match (dim, unit) {
        (Dimension::Length, "mi" | "mile" | "miles") => (1.0, 1.0),
        (Dimension::Length, "km") => (1.0, KM_PER_MILE),
        (Dimension::Length, "m") => (1.0, KM_PER_MILE * 1000.0),
        (Dimension::Length, "ft") => (1.0, FEET_PER_MILE),
        (Dimension::ShortLength, "ft") => (1.0, 1.0),
        (Dimension::ShortLength, "m") => (FEET_PER_MILE, KM_PER_MILE * 1000.0),
        (Dimension::ShortLength, "mi") => (FEET_PER_MILE, 1.0),
        (Dimension::Speed, "mph") => (1.0, 1.0),
        (Dimension::Speed, "kmph" | "kph" | "km/h") => (1.0, KM_PER_MILE),
        (Dimension::Duration, "s" | "sec") => (1.0, 1.0),
        (Dimension::Duration, "min") => (60.0, 1.0),
        (Dimension::Duration, "h" | "hr") => (SECONDS_PER_HOUR, 1.0),
        (Dimension::Density, "veh/mi" | "veh/mi/lane") => (1.0, 1.0),
        (Dimension::Density, "veh/km" | "veh/km/lane") => (KM_PER_MILE, 1.0),
        _ => return Err(format!("`{unit}` is not a recognised {dim} unit in `{text}`")),
    };
    Ok(value * mul / div)
}

macro_rules! quantity_deserializer {
    ($name:ident, $dim:expr) => {
        pub fn $name<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            let s = String::deserialize(d)?;
            parse_quantity(&s, $dim).map_err(serde::de::Error::custom)
        }
    };
}

/// `serde(deserialize_with)` helpers for unit-suffixed strings.
pub mod de {
    use super::*;

    quantity_deserializer!(miles, Dimension::Length);
    quantity_deserializer!(feet, Dimension::ShortLength);
    quantity_deserializer!(mph, Dimension::Speed);
    quantity_deserializer!(seconds, Dimension::Duration);
    quantity_deserializer!(veh_per_mile, Dimension::Density);

    pub fn feet_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_quantity(s, Dimension::ShortLength))
            .collect::<Result<_, _>>()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_smoothing_parameters_convert() {
        let d = parse_quantity("0.8 km", Dimension::Length).unwrap();
        assert!((d - 0.497097).abs() < 1e-6);
        let v = parse_quantity("100 kmph", Dimension::Speed).unwrap();
        assert!((v - 62.1371).abs() < 1e-4);
        let r = parse_quantity("200 ft", Dimension::Length).unwrap();
        assert!((r - 0.0378788).abs() < 1e-6);
        assert_eq!(parse_quantity("1 min", Dimension::Duration).unwrap(), 60.0);
        assert_eq!(parse_quantity("-20 min", Dimension::Duration).unwrap(), -1200.0);
    }

    #[test]
    fn rejects_missing_or_wrong_units() {
        assert!(parse_quantity("16", Dimension::Length).is_err());
        assert!(parse_quantity("16 mph", Dimension::Length).is_err());
        assert!(parse_quantity("fast mph", Dimension::Speed).is_err());
    }
}
