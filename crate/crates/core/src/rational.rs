//! Exact rational values and their JSON form.
//!
//! Values travel as JSON integers when they are integral and fit in an `i64`,
//! otherwise as `"p/q"` strings. Parsing accepts integers and strings of the
//! form `"p"` or `"p/q"`.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational valuation value.
pub type Value = BigRational;

/// Builds a [`Value`] from an integer.
pub fn int(v: i64) -> Value {
    Value::from_integer(v.into())
}

/// Parses `"p"` or `"p/q"`; rejects a zero denominator.
pub fn parse(text: &str) -> Result<Value, String> {
    let trimmed = text.trim();
    if let Some((_, den)) = trimmed.split_once('/') {
        if den.trim().parse::<i128>().map(|d| d == 0).unwrap_or(false) {
            return Err(format!("zero denominator in {text:?}"));
        }
    }
    BigRational::from_str(trimmed).map_err(|e| format!("bad rational {text:?}: {e}"))
}

/// Transparent wrapper giving [`Value`] the JSON encoding described above.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JsonRational(pub Value);

impl Serialize for JsonRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let v = &self.0;
        if v.is_integer() {
            if let Some(i) = v.numer().to_i64() {
                return serializer.serialize_i64(i);
            }
        }
        if v.denom().is_zero() {
            return Err(serde::ser::Error::custom("zero denominator"));
        }
        serializer.serialize_str(&format!("{}/{}", v.numer(), v.denom()))
    }
}

struct RationalVisitor;

impl Visitor<'_> for RationalVisitor {
    type Value = JsonRational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an integer or a \"p/q\" string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<JsonRational, E> {
        Ok(JsonRational(int(v)))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<JsonRational, E> {
        Ok(JsonRational(Value::from_integer(v.into())))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<JsonRational, E> {
        parse(v).map(JsonRational).map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for JsonRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }
}
