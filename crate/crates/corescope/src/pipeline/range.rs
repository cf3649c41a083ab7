//! Integer parameter ranges written as `[a, b, n]`: a single point when
//! n = 1, otherwise n points from the half-open interval [a, b) with step
//! floor((b - a) / n). Scalars abbreviate `[a, a, 1]` and pairs `[a, b]`
//! abbreviate `[a, b, b - a]`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RangeError {
    #[error("range [{a}, {b}, {n}] is invalid: {reason}")]
    InvalidRange { a: i64, b: i64, n: i64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueRange {
    pub a: i64,
    pub b: i64,
    pub n: i64,
}

impl ValueRange {
    pub fn point(a: i64) -> Self {
        ValueRange { a, b: a, n: 1 }
    }

    pub fn new(a: i64, b: i64, n: i64) -> Self {
        ValueRange { a, b, n }
    }

    pub fn expand(&self) -> Result<Vec<i64>, RangeError> {
        let invalid = |reason: &str| RangeError::InvalidRange {
            a: self.a,
            b: self.b,
            n: self.n,
            reason: reason.to_string(),
        };
        if self.n < 1 {
            return Err(invalid("point count must be at least 1"));
        }
        if self.n == 1 {
            return Ok(vec![self.a]);
        }
        if self.b < self.a {
            return Err(invalid("end must not precede start when n > 1"));
        }
        let step = (self.b - self.a) / self.n;
        Ok((0..self.n).map(|i| self.a + i * step).collect())
    }
}

impl Serialize for ValueRange {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.n == 1 && self.a == self.b {
            self.a.serialize(serializer)
        } else {
            [self.a, self.b, self.n].serialize(serializer)
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RangeRepr {
    Scalar(i64),
    Pair([i64; 2]),
    Triple([i64; 3]),
}

impl<'de> Deserialize<'de> for ValueRange {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match RangeRepr::deserialize(deserializer)? {
            RangeRepr::Scalar(a) => ValueRange { a, b: a, n: 1 },
            RangeRepr::Pair([a, b]) => ValueRange { a, b, n: b - a },
            RangeRepr::Triple([a, b, n]) => ValueRange { a, b, n },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_three_point_range_expands_with_floor_step() {
        assert_eq!(ValueRange::new(8, 15, 3).expand().unwrap(), vec![8, 10, 12]);
    }

    #[test]
    fn test_zero_step_range_repeats_start() {
        assert_eq!(ValueRange::new(1, 2, 2).expand().unwrap(), vec![1, 1]);
    }

    #[test]
    fn test_single_point_ignores_end() {
        assert_eq!(ValueRange::new(5, 9, 1).expand().unwrap(), vec![5]);
        assert_eq!(ValueRange::new(190, 190, 1).expand().unwrap(), vec![190]);
    }

    #[test]
    fn test_unit_step_covers_half_open_interval() {
        assert_eq!(
            ValueRange::new(0, 4, 4).expand().unwrap(),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn test_invalid_ranges_are_rejected() {
        assert!(ValueRange::new(0, 4, 0).expand().is_err());
        assert!(ValueRange::new(4, 0, 2).expand().is_err());
    }

    #[test]
    fn test_serde_accepts_all_three_shorthands() {
        let scalar: ValueRange = serde_json::from_str("100").unwrap();
        assert_eq!(scalar, ValueRange::point(100));
        let pair: ValueRange = serde_json::from_str("[0, 48]").unwrap();
        assert_eq!(pair, ValueRange::new(0, 48, 48));
        assert_eq!(pair.expand().unwrap().len(), 48);
        let triple: ValueRange = serde_json::from_str("[8, 15, 3]").unwrap();
        assert_eq!(triple, ValueRange::new(8, 15, 3));
    }

    #[test]
    fn test_serde_round_trip_is_stable() {
        for range in [
            ValueRange::point(7),
            ValueRange::new(8, 15, 3),
            ValueRange::new(0, 48, 48),
        ] {
            let text = serde_json::to_string(&range).unwrap();
            let back: ValueRange = serde_json::from_str(&text).unwrap();
            assert_eq!(back, range);
        }
    }
}
