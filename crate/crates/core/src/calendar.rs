use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A calendar quarter, e.g. `2021q1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearQuarter {
    pub year: i32,
    pub quarter: u8,
}

impl YearQuarter {
    pub fn new(year: i32, quarter: u8) -> Option<Self> {
        (1..=4).contains(&quarter).then_some(Self { year, quarter })
    }

    fn index(self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    fn from_index(index: i64) -> Self {
        Self {
            year: index.div_euclid(4) as i32,
            quarter: (index.rem_euclid(4) + 1) as u8,
        }
    }

    /// The quarter `steps` quarters after this one (negative goes back).
    pub fn offset(self, steps: i64) -> Self {
        Self::from_index(self.index() + steps)
    }

    /// Number of quarters from `self` to `other`.
    pub fn quarters_until(self, other: YearQuarter) -> i64 {
        other.index() - self.index()
    }
}

impl fmt::Display for YearQuarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}q{}", self.year, self.quarter)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid quarter `{0}`, expected e.g. 2021q1")]
pub struct ParseQuarterError(String);

impl FromStr for YearQuarter {
    type Err = ParseQuarterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseQuarterError(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let (year, quarter) = lower.split_once('q').ok_or_else(err)?;
        let year = year.trim_end_matches('-').parse().map_err(|_| err())?;
        let quarter = quarter.parse().map_err(|_| err())?;
        YearQuarter::new(year, quarter).ok_or_else(err)
    }
}

impl Serialize for YearQuarter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearQuarter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_wrap_years() {
        let q = YearQuarter::new(2019, 4).unwrap();
        assert_eq!(q.offset(1), YearQuarter::new(2020, 1).unwrap());
        assert_eq!(q.offset(24), YearQuarter::new(2025, 4).unwrap());
        assert_eq!(q.offset(-4), YearQuarter::new(2018, 4).unwrap());
        assert_eq!(q.quarters_until(q.offset(5)), 5);
    }

    #[test]
    fn parse_and_display() {
        let q: YearQuarter = "2021q1".parse().unwrap();
        assert_eq!(q.to_string(), "2021q1");
        assert_eq!("2025-Q4".parse::<YearQuarter>().unwrap(), YearQuarter::new(2025, 4).unwrap());
        assert!("2021q5".parse::<YearQuarter>().is_err());
        assert!("2021".parse::<YearQuarter>().is_err());
    }
}
