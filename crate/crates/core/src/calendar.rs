//! Day indexing and day-type calendar.
//!
//! Day 0 is 2016-01-14 (UTC), the first day of the collection period.

use serde::{Deserialize, Serialize};
use std::fmt;

/// 2016-01-14T00:00:00Z.
pub const EPOCH_START: u64 = 1_452_729_600;
pub const SECONDS_PER_DAY: u64 = 86_400;

/// Day offset of an epoch timestamp relative to [`EPOCH_START`].
pub fn day_of(t: u64) -> i64 {
    (t as i64 - EPOCH_START as i64).div_euclid(SECONDS_PER_DAY as i64)
}

/// Inclusive range of day offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DayRange {
    pub first: i64,
    pub last: i64,
}

impl DayRange {
    pub fn new(first: i64, last: i64) -> Self {
        DayRange { first, last }
    }

    /// Range of `len` days starting at `first`. `len` must be at least one.
    pub fn span(first: i64, len: i64) -> Self {
        DayRange { first, last: first + len - 1 }
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.last - self.first + 1) as usize
        }
    }

    pub fn contains(&self, day: i64) -> bool {
        day >= self.first && day <= self.last
    }

    pub fn contains_time(&self, t: u64) -> bool {
        self.contains(day_of(t))
    }

    pub fn days(&self) -> impl Iterator<Item = i64> {
        self.first..=self.last
    }

    pub fn overlaps(&self, other: &DayRange) -> bool {
        !self.is_empty() && !other.is_empty() && self.first <= other.last && other.first <= self.last
    }

    pub fn is_subset_of(&self, other: &DayRange) -> bool {
        self.is_empty() || (other.first <= self.first && self.last <= other.last)
    }
}

impl fmt::Display for DayRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
    Holiday,
}

impl DayType {
    pub const ALL: [DayType; 3] = [DayType::Weekday, DayType::Weekend, DayType::Holiday];

    pub fn name(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
            DayType::Holiday => "holiday",
        }
    }
}

/// Weekend rule by UTC weekday, plus an explicit holiday list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub holidays: Vec<DayRange>,
}

impl Default for Calendar {
    /// Spring Festival week, 2016-02-07 ..= 2016-02-13.
    fn default() -> Self {
        Calendar { holidays: vec![spring_festival_week()] }
    }
}

/// 2016-02-07 ..= 2016-02-13 as day offsets.
pub fn spring_festival_week() -> DayRange {
    DayRange::new(24, 30)
}

/// 2016-01-14 ..= 2016-01-31, the pre-holiday observation window.
pub fn pre_holiday_window() -> DayRange {
    DayRange::new(0, 17)
}

impl Calendar {
    pub fn without_holidays() -> Self {
        Calendar { holidays: Vec::new() }
    }

    /// 0 = Monday ... 6 = Sunday. Day 0 (2016-01-14) is a Thursday.
    pub fn weekday(day: i64) -> u32 {
        (day + 3).rem_euclid(7) as u32
    }

    pub fn day_type(&self, day: i64) -> DayType {
        if self.holidays.iter().any(|h| h.contains(day)) {
            DayType::Holiday
        } else if Self::weekday(day) >= 5 {
            DayType::Weekend
        } else {
            DayType::Weekday
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_and_weekdays() {
        assert_eq!(day_of(EPOCH_START), 0);
        assert_eq!(day_of(EPOCH_START - 1), -1);
        assert_eq!(day_of(EPOCH_START + SECONDS_PER_DAY), 1);
        // 2016-01-16 was a Saturday, 2016-01-18 a Monday.
        assert_eq!(Calendar::weekday(2), 5);
        assert_eq!(Calendar::weekday(4), 0);
        let cal = Calendar::default();
        assert_eq!(cal.day_type(0), DayType::Weekday);
        assert_eq!(cal.day_type(3), DayType::Weekend);
        // 2016-02-08 (Spring Festival) is a Monday but a holiday.
        assert_eq!(cal.day_type(25), DayType::Holiday);
    }

    #[test]
    fn ranges() {
        let r = DayRange::span(0, 19);
        assert_eq!(r.len(), 19);
        assert_eq!(r.last, 18);
        assert!(!r.overlaps(&DayRange::span(19, 5)));
        assert!(DayRange::new(2, 3).is_subset_of(&r));
        assert!(DayRange::new(5, 4).is_empty());
    }
}
