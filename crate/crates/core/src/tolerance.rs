use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ToleranceError {
    #[error("cannot parse tolerance {0:?}; expected p/q or a decimal")]
    Parse(String),
    #[error("tolerance {0} is outside [0, 1]")]
    OutOfRange(String),
}

/// Tolerance fidelity as an exact rational in [0, 1].
///
/// Acceptance needs at least `ceil(f_tol * n)` correct outcomes, computed in
/// integer arithmetic so that exact products accept on equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tolerance(Ratio<u64>);

impl Tolerance {
    pub fn new(numer: u64, denom: u64) -> Result<Self, ToleranceError> {
        if denom == 0 || numer > denom {
            return Err(ToleranceError::OutOfRange(format!("{numer}/{denom}")));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn from_ratio(r: Ratio<u64>) -> Result<Self, ToleranceError> {
        Self::new(*r.numer(), *r.denom())
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// Smallest integer `k >= f_tol * n`.
    pub fn min_correct(&self, n: usize) -> usize {
        let num = self.numer() as u128 * n as u128;
        let den = self.denom() as u128;
        num.div_ceil(den) as usize
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for Tolerance {
    type Err = ToleranceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ToleranceError::Parse(s.to_string());
        if let Some((p, q)) = s.split_once('/') {
            let p: u64 = p.trim().parse().map_err(|_| bad())?;
            let q: u64 = q.trim().parse().map_err(|_| bad())?;
            return Tolerance::new(p, q).map_err(|_| ToleranceError::OutOfRange(s.to_string()));
        }
        // exact decimal: "0.925" -> 925/1000
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || frac.len() > 18 {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let fr: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(fr)).ok_or_else(bad)?;
        Tolerance::new(num, den).map_err(|_| ToleranceError::OutOfRange(s.to_string()))
    }
}

impl Serialize for Tolerance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tolerance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!("3/4".parse::<Tolerance>().unwrap(), Tolerance::new(3, 4).unwrap());
        assert_eq!("0.75".parse::<Tolerance>().unwrap(), Tolerance::new(3, 4).unwrap());
        assert_eq!("1".parse::<Tolerance>().unwrap(), Tolerance::new(1, 1).unwrap());
        assert_eq!(".9".parse::<Tolerance>().unwrap(), Tolerance::new(9, 10).unwrap());
        assert!("5/4".parse::<Tolerance>().is_err());
        assert!("1.5".parse::<Tolerance>().is_err());
        assert!("x".parse::<Tolerance>().is_err());
        assert!("-0.5".parse::<Tolerance>().is_err());
        assert_eq!(Tolerance::new(10, 12).unwrap().to_string(), "5/6");
    }

    #[test]
    fn ceiling_threshold() {
        let t = Tolerance::new(3, 4).unwrap();
        assert_eq!(t.min_correct(100), 75);
        assert_eq!(t.min_correct(2), 2);
        assert_eq!(t.min_correct(4), 3);
        assert_eq!(t.min_correct(0), 0);
        let t = Tolerance::new(9, 10).unwrap();
        assert_eq!(t.min_correct(1000), 900);
        assert_eq!(t.min_correct(1001), 901);
        assert_eq!(Tolerance::new(0, 1).unwrap().min_correct(10), 0);
    }

    #[test]
    fn serde_as_string() {
        let t = Tolerance::new(9, 10).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), "\"9/10\"");
        assert_eq!(serde_json::from_str::<Tolerance>("\"9/10\"").unwrap(), t);
    }
}
