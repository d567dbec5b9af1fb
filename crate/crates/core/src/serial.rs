use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rng::RngStream;

/// 128-bit token identifier, written as 32 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Serial(pub u128);

impl Serial {
    pub fn random(rng: &mut RngStream) -> Self {
        Serial(rng.u128())
    }
}

impl fmt::Display for Serial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid serial {0:?}: expected 32 hex digits")]
pub struct SerialParseError(pub String);

impl FromStr for Serial {
    type Err = SerialParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 32 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(SerialParseError(s.to_string()));
        }
        u128::from_str_radix(s, 16).map(Serial).map_err(|_| SerialParseError(s.to_string()))
    }
}

impl Serialize for Serial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Serial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip() {
        let s = Serial(0x0123_4567_89ab_cdef_0011_2233_4455_6677);
        assert_eq!(s.to_string(), "0123456789abcdef0011223344556677");
        assert_eq!(s.to_string().parse::<Serial>().unwrap(), s);
        assert_eq!(Serial(1).to_string().len(), 32);
        assert!("123".parse::<Serial>().is_err());
        assert!("zz23456789abcdef0011223344556677".parse::<Serial>().is_err());
    }
}
