//! Unit-annotated configuration values. Every quantity accepts either a bare
//! number in SI units or a string `"<number> <unit>"`; the Unicode minus
//! sign is accepted in place of `-`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::geometry::{perfect_sqrt, Length};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UnitError {
    #[error("cannot parse {0:?} as a number with an optional unit")]
    Syntax(String),
    #[error("unit {unit:?} is not a {kind} unit (expected one of {expected})")]
    Unit {
        unit: String,
        kind: &'static str,
        expected: &'static str,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Splits `"−120 dBm"` into (−120, "dBm"). A missing unit yields "".
pub fn split_quantity(text: &str) -> Result<(f64, String), UnitError> {
    let t = text.trim().replace('\u{2212}', "-");
    let end = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit() || c == '.' || c == '+' || c == '-' || ((c == 'e' || c == 'E') && i > 0 && is_exponent(&t, i)))
        })
        .map_or(t.len(), |(i, _)| i);
    let value: f64 = t[..end].trim().parse().map_err(|_| UnitError::Syntax(text.to_string()))?;
    Ok((value, t[end..].trim().to_string()))
}

fn is_exponent(t: &str, i: usize) -> bool {
    t[i + 1..].chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+')
}

/// 10^(x/10), exact for integer exponents.
pub fn db_to_linear(db: f64) -> f64 {
    let e = db / 10.0;
    if e.fract() == 0.0 && e.abs() < 300.0 {
        let n = e as i32;
        if n >= 0 {
            10f64.powi(n)
        } else {
            1.0 / 10f64.powi(-n)
        }
    } else {
        10f64.powf(e)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn unit_err(unit: &str, kind: &'static str, expected: &'static str) -> UnitError {
    UnitError::Unit {
        unit: unit.to_string(),
        kind,
        expected,
    }
}

pub fn parse_power(text: &str) -> Result<f64, UnitError> {
    let (v, u) = split_quantity(text)?;
    match u.as_str() {
        "" | "W" => Ok(v),
        "mW" => Ok(v * 1e-3),
        "dBm" => Ok(dbm_to_watts(v)),
        "dBW" => Ok(db_to_linear(v)),
        _ => Err(unit_err(&u, "power", "W, mW, dBm, dBW")),
    }
}

pub fn parse_frequency(text: &str) -> Result<f64, UnitError> {
    let (v, u) = split_quantity(text)?;
    match u.as_str() {
        "" | "Hz" => Ok(v),
        "kHz" => Ok(v * 1e3),
        "MHz" => Ok(v * 1e6),
        "GHz" => Ok(v * 1e9),
        _ => Err(unit_err(&u, "frequency", "Hz, kHz, MHz, GHz")),
    }
}

/// Dimensionless ratio; `dB` converts to linear.
pub fn parse_ratio(text: &str) -> Result<f64, UnitError> {
    let (v, u) = split_quantity(text)?;
    match u.as_str() {
        "" => Ok(v),
        "dB" => Ok(db_to_linear(v)),
        _ => Err(unit_err(&u, "ratio", "dB or a bare number")),
    }
}

pub fn parse_angle(text: &str) -> Result<f64, UnitError> {
    let (v, u) = split_quantity(text)?;
    match u.as_str() {
        "" | "rad" => Ok(v),
        "deg" | "°" => Ok(v.to_radians()),
        _ => Err(unit_err(&u, "angle", "rad, deg")),
    }
}

pub fn parse_time(text: &str) -> Result<f64, UnitError> {
    let (v, u) = split_quantity(text)?;
    match u.as_str() {
        "" | "s" => Ok(v),
        "ms" => Ok(v * 1e-3),
        "us" | "µs" => Ok(v * 1e-6),
        _ => Err(unit_err(&u, "time", "s, ms, us")),
    }
}

pub fn parse_speed(text: &str) -> Result<f64, UnitError> {
    let (v, u) = split_quantity(text)?;
    match u.as_str() {
        "" | "m/s" => Ok(v),
        "km/h" => Ok(v / 3.6),
        _ => Err(unit_err(&u, "speed", "m/s, km/h")),
    }
}

pub fn parse_area(text: &str) -> Result<f64, UnitError> {
    let (v, u) = split_quantity(text)?;
    match u.as_str() {
        "" | "m2" | "m^2" | "m²" => Ok(v),
        _ => Err(unit_err(&u, "area", "m2")),
    }
}

pub fn parse_length(text: &str) -> Result<Length, UnitError> {
    let (v, u) = split_quantity(text)?;
    match u.as_str() {
        "" | "m" => Ok(Length::Meters(v)),
        "cm" => Ok(Length::Meters(v * 1e-2)),
        "lambda" | "λ" => Ok(Length::Wavelengths(v)),
        _ => Err(unit_err(&u, "length", "m, cm, lambda")),
    }
}

/// Meters only; wavelength units are rejected.
pub fn parse_meters(text: &str) -> Result<f64, UnitError> {
    match parse_length(text)? {
        Length::Meters(m) => Ok(m),
        Length::Wavelengths(_) => Err(UnitError::Invalid(format!("{text:?}: this length must be given in meters"))),
    }
}

/// Serde-facing wrappers. Each deserializes from a number (SI) or a unit string.
macro_rules! quantity {
    ($(#[$doc:meta])* $name:ident, $parse:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = $name;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        write!(f, "{} as a number or a \"<value> <unit>\" string", $what)
                    }
                    fn visit_f64<E: de::Error>(self, v: f64) -> Result<$name, E> {
                        Ok($name(v))
                    }
                    fn visit_i64<E: de::Error>(self, v: i64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }
                    fn visit_u64<E: de::Error>(self, v: u64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }
                    fn visit_str<E: de::Error>(self, v: &str) -> Result<$name, E> {
                        $parse(v).map($name).map_err(E::custom)
                    }
                }
                d.deserialize_any(V)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }
    };
}

quantity!(
    /// Watts.
    Watts, parse_power, "a power");
quantity!(
    /// Meters.
    Meters, parse_meters, "a length");
quantity!(
    /// Hertz.
    Hertz, parse_frequency, "a frequency");
quantity!(
    /// Linear ratio.
    Ratio, parse_ratio, "a ratio");
quantity!(
    /// Radians.
    Radians, parse_angle, "an angle");
quantity!(
    /// Seconds.
    Seconds, parse_time, "a duration");
quantity!(
    /// m/s.
    Speed, parse_speed, "a speed");
quantity!(
    /// m².
    Area, parse_area, "an area");

/// A length in meters or wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthSpec(pub Length);

impl<'de> Deserialize<'de> for LengthSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = LengthSpec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a length in meters or a \"<value> m|lambda\" string")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<LengthSpec, E> {
                Ok(LengthSpec(Length::Meters(v)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<LengthSpec, E> {
                Ok(LengthSpec(Length::Meters(v as f64)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<LengthSpec, E> {
                Ok(LengthSpec(Length::Meters(v as f64)))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<LengthSpec, E> {
                parse_length(v).map(LengthSpec).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl Serialize for LengthSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Length::Meters(v) => s.serialize_str(&format!("{v} m")),
            Length::Wavelengths(v) => s.serialize_str(&format!("{v} lambda")),
        }
    }
}

/// IRS element count; must be a perfect square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IrsCount(pub usize);

impl<'de> Deserialize<'de> for IrsCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let n = usize::deserialize(d)?;
        if n == 0 || perfect_sqrt(n).is_none() {
            return Err(de::Error::custom(format!("N must be a perfect square, got {n}")));
        }
        Ok(IrsCount(n))
    }
}
