use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A bit rate held as an integer number of Mbit/s.
///
/// Integer storage keeps capacity bookkeeping exact: grooming adds and
/// removes demands repeatedly and the load of a lightpath must return to
/// exactly zero when its last user leaves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rate(u64);

impl Rate {
    pub const ZERO: Rate = Rate(0);

    pub const fn from_mbps(mbps: u64) -> Self {
        Rate(mbps)
    }

    /// Rounds to the nearest Mbit/s. Negative or non-finite input maps to zero.
    pub fn from_gbps(gbps: f64) -> Self {
        if !gbps.is_finite() || gbps <= 0.0 {
            return Rate(0);
        }
        Rate((gbps * 1000.0).round() as u64)
    }

    pub const fn mbps(self) -> u64 {
        self.0
    }

    pub fn gbps(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_sub(self, rhs: Rate) -> Option<Rate> {
        self.0.checked_sub(rhs.0).map(Rate)
    }

    pub fn saturating_sub(self, rhs: Rate) -> Rate {
        Rate(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Rate {
    type Output = Rate;
    fn add(self, rhs: Rate) -> Rate {
        Rate(self.0 + rhs.0)
    }
}

impl AddAssign for Rate {
    fn add_assign(&mut self, rhs: Rate) {
        self.0 += rhs.0;
    }
}

impl Sub for Rate {
    type Output = Rate;
    fn sub(self, rhs: Rate) -> Rate {
        Rate(self.0 - rhs.0)
    }
}

impl SubAssign for Rate {
    fn sub_assign(&mut self, rhs: Rate) {
        self.0 -= rhs.0;
    }
}

impl Sum for Rate {
    fn sum<I: Iterator<Item = Rate>>(iter: I) -> Rate {
        Rate(iter.map(|r| r.0).sum())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Gbps", self.gbps())
    }
}
