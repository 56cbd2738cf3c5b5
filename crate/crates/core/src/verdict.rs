//! Three-way decisions on numerically computed resource quantities.

use serde::{Deserialize, Serialize};

/// Values at or below this are treated as zero.
pub const FREE_MAX: f64 = 1e-7;
/// Values at or above this are treated as strictly positive.
pub const RESOURCE_MIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    /// Inside the free set (unsteerable, compatible, ...).
    Free,
    /// Certified outside the free set.
    Resource,
    /// Within solver accuracy of the boundary.
    Inconclusive,
}

impl Verdict {
    /// Classifies a quantity that vanishes exactly on the free set.
    pub fn from_value(v: f64) -> Self {
        if v <= FREE_MAX {
            Verdict::Free
        } else if v >= RESOURCE_MIN {
            Verdict::Resource
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn is_conclusive(self) -> bool {
        self != Verdict::Inconclusive
    }

    /// `Some(true)` for a resource, `Some(false)` for free.
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Verdict::Free => Some(false),
            Verdict::Resource => Some(true),
            Verdict::Inconclusive => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands() {
        assert_eq!(Verdict::from_value(-1e-9), Verdict::Free);
        assert_eq!(Verdict::from_value(1e-7), Verdict::Free);
        assert_eq!(Verdict::from_value(5e-7), Verdict::Inconclusive);
        assert_eq!(Verdict::from_value(1e-6), Verdict::Resource);
    }
}
