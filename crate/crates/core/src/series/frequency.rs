use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseUnit {
    Second,
    Minute,
    Hour,
    Day,
    Week,
    Month,
}

impl BaseUnit {
    pub const ALL: [BaseUnit; 6] = [
        BaseUnit::Second,
        BaseUnit::Minute,
        BaseUnit::Hour,
        BaseUnit::Day,
        BaseUnit::Week,
        BaseUnit::Month,
    ];

    /// Length in seconds. Months are treated as 30 days (uniform spacing only).
    pub fn seconds(self) -> i64 {
        match self {
            BaseUnit::Second => 1,
            BaseUnit::Minute => 60,
            BaseUnit::Hour => 3_600,
            BaseUnit::Day => 86_400,
            BaseUnit::Week => 604_800,
            BaseUnit::Month => 2_592_000,
        }
    }

    /// Calendar-natural cycle lengths in units of `self`, most dominant first.
    pub fn natural_periods(self) -> &'static [usize] {
        match self {
            BaseUnit::Second => &[60, 3_600],
            BaseUnit::Minute => &[60, 1_440],
            BaseUnit::Hour => &[24, 168],
            BaseUnit::Day => &[7, 30, 365],
            BaseUnit::Week => &[52, 4],
            BaseUnit::Month => &[12, 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrequencyTag {
    pub base_unit: BaseUnit,
    pub multiplier: u32,
}

impl FrequencyTag {
    pub fn new(base_unit: BaseUnit, multiplier: u32) -> Result<Self> {
        if multiplier == 0 {
            return Err(Error::InvalidArgument("frequency multiplier must be >= 1".into()));
        }
        Ok(Self { base_unit, multiplier })
    }

    pub fn hourly() -> Self {
        Self { base_unit: BaseUnit::Hour, multiplier: 1 }
    }

    pub fn step_seconds(&self) -> i64 {
        self.base_unit.seconds() * self.multiplier as i64
    }

    pub fn scaled(&self, factor: u32) -> Self {
        Self { base_unit: self.base_unit, multiplier: self.multiplier * factor.max(1) }
    }

    /// Natural periods expressed in steps of this frequency. Cycles that the
    /// multiplier does not divide are dropped.
    pub fn natural_periods(&self) -> Vec<usize> {
        let m = self.multiplier as usize;
        self.base_unit
            .natural_periods()
            .iter()
            .filter(|&&p| p % m == 0 && p / m >= 2)
            .map(|&p| p / m)
            .collect()
    }

    /// The dominant seasonal period, or 1 when none applies.
    pub fn dominant_period(&self) -> usize {
        self.natural_periods().first().copied().unwrap_or(1)
    }
}
