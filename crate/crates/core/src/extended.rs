use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

/// A value in `[0, +inf]`, the codomain of every measure here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum ExtendedNonNegReal {
    Finite(f64),
    Infinite,
}

pub use ExtendedNonNegReal::{Finite, Infinite};

impl ExtendedNonNegReal {
    pub const ZERO: ExtendedNonNegReal = Finite(0.0);

    /// Finite value; panics if `v` is negative or not finite.
    pub fn finite(v: f64) -> Self {
        assert!(v.is_finite() && v >= 0.0, "{v} is not a finite nonnegative real");
        Finite(v)
    }

    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Infinite
        } else {
            Self::finite(v)
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Finite(v) => v,
            Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    /// `|lambda| * self` with `0 * inf = 0`.
    pub fn scale(self, lambda: f64) -> Self {
        let a = lambda.abs();
        match self {
            Finite(v) => Finite(a * v),
            Infinite if a == 0.0 => Finite(0.0),
            Infinite => Infinite,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl Add for ExtendedNonNegReal {
    type Output = ExtendedNonNegReal;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a + b),
            _ => Infinite,
        }
    }
}

impl PartialOrd for ExtendedNonNegReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

/// Finite values print with the shortest round-trip representation, the
/// infinite value as `inf`.
impl fmt::Display for ExtendedNonNegReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finite(v) => write!(f, "{v}"),
            Infinite => f.write_str("inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        assert_eq!(Finite(1.0) + Finite(0.5), Finite(1.5));
        assert_eq!(Finite(1.0) + Infinite, Infinite);
        assert_eq!(Infinite.scale(0.0), Finite(0.0));
        assert_eq!(Infinite.scale(-2.0), Infinite);
        assert_eq!(Finite(0.5).scale(-2.0), Finite(1.0));
        assert!(Finite(3.0) < Infinite);
        assert_eq!(Infinite.to_string(), "inf");
        assert_eq!(Finite(0.25).to_string(), "0.25");
    }
}
