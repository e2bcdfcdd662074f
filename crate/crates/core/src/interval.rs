//! Closed subintervals of the section interval I = [-1/2, 1/2].
//!
//! Endpoints are plain f64. Half-open conventions from the underlying theory
//! (L1 = [-1/2, 0)) are handled by the global 1e-9 endpoint tolerance; an
//! interval here is always stored closed.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Left endpoint of the section interval.
pub const I_LO: f64 = -0.5;
/// Right endpoint of the section interval.
pub const I_HI: f64 = 0.5;

/// A nondegenerate closed interval [lo, hi] inside [-1/2, 1/2].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "(f64, f64)", try_from = "(f64, f64)")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::domain("interval endpoints must be finite"));
        }
        if !(lo < hi) {
            return Err(Error::domain(format!(
                "interval needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        // allow a hair of slack so images computed in floating point stay legal
        if lo < I_LO - 1e-12 || hi > I_HI + 1e-12 {
            return Err(Error::domain(format!(
                "interval [{lo}, {hi}] leaves [{I_LO}, {I_HI}]"
            )));
        }
        Ok(Interval {
            lo: lo.max(I_LO),
            hi: hi.min(I_HI),
        })
    }

    /// The whole section interval [-1/2, 1/2].
    pub fn full() -> Self {
        Interval { lo: I_LO, hi: I_HI }
    }

    /// Left half [-1/2, 0], closure of L1.
    pub fn left_half() -> Self {
        Interval { lo: I_LO, hi: 0.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval, tol: f64) -> bool {
        self.lo <= other.lo + tol && other.hi <= self.hi + tol
    }

    /// True when 0 is strictly inside.
    pub fn straddles_zero(&self) -> bool {
        self.lo < 0.0 && 0.0 < self.hi
    }

    /// Distance from the interval to 0; zero if 0 is inside or on the boundary.
    pub fn dist_to_zero(&self) -> f64 {
        if self.lo > 0.0 {
            self.lo
        } else if self.hi < 0.0 {
            -self.hi
        } else {
            0.0
        }
    }

    /// Split at 0 and keep the longer piece; ties go right. Returns the input
    /// unchanged when 0 is not strictly inside.
    pub fn bigger_half_at_zero(&self) -> Interval {
        if !self.straddles_zero() {
            return *self;
        }
        let left = Interval { lo: self.lo, hi: 0.0 };
        let right = Interval { lo: 0.0, hi: self.hi };
        if left.len() > right.len() {
            left
        } else {
            right
        }
    }

    /// Same point set check up to an endpoint tolerance.
    pub fn approx_eq(&self, other: &Interval, tol: f64) -> bool {
        (self.lo - other.lo).abs() <= tol && (self.hi - other.hi).abs() <= tol
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo < hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }

    /// n+1 equally spaced points including both endpoints.
    pub fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let n = n.max(1);
        let step = self.len() / n as f64;
        (0..=n).map(move |i| {
            if i == n {
                self.hi
            } else {
                self.lo + step * i as f64
            }
        })
    }
}

impl From<Interval> for (f64, f64) {
    fn from(iv: Interval) -> Self {
        (iv.lo, iv.hi)
    }
}

impl TryFrom<(f64, f64)> for Interval {
    type Error = Error;
    fn try_from(t: (f64, f64)) -> Result<Self> {
        Interval::new(t.0, t.1)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_and_out_of_range() {
        assert!(Interval::new(0.2, 0.2).is_err());
        assert!(Interval::new(0.3, 0.2).is_err());
        assert!(Interval::new(-0.6, 0.0).is_err());
        assert!(Interval::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn bigger_half_prefers_longer_side() {
        let iv = Interval::new(-0.4, 0.1).unwrap();
        let h = iv.bigger_half_at_zero();
        assert_eq!(h.lo(), -0.4);
        assert_eq!(h.hi(), 0.0);
        // tie goes right
        let sym = Interval::new(-0.25, 0.25).unwrap();
        let h = sym.bigger_half_at_zero();
        assert_eq!(h.lo(), 0.0);
    }

    #[test]
    fn serde_round_trip_is_a_pair() {
        let iv = Interval::new(-0.25, 0.125).unwrap();
        let js = serde_json::to_string(&iv).unwrap();
        assert_eq!(js, "[-0.25,0.125]");
        let back: Interval = serde_json::from_str(&js).unwrap();
        assert_eq!(back, iv);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn interval() -> impl Strategy<Value = Interval> {
            (I_LO..0.49f64)
                .prop_flat_map(|lo| (Just(lo), (lo + 1e-3)..=I_HI))
                .prop_map(|(lo, hi)| Interval::new(lo, hi).unwrap())
        }

        proptest! {
            #[test]
            fn midpoint_lies_inside(iv in interval()) {
                prop_assert!(iv.contains(iv.midpoint()));
                prop_assert!(iv.len() > 0.0);
            }

            #[test]
            fn intersection_is_commutative_and_contained(a in interval(), b in interval()) {
                let ab = a.intersect(&b);
                let ba = b.intersect(&a);
                prop_assert_eq!(&ab, &ba);
                if let Some(c) = ab {
                    prop_assert!(a.contains_interval(&c, 1e-12));
                    prop_assert!(b.contains_interval(&c, 1e-12));
                }
            }

            #[test]
            fn bigger_half_keeps_the_longer_side(iv in interval()) {
                if iv.straddles_zero() {
                    let h = iv.bigger_half_at_zero();
                    prop_assert!(iv.contains_interval(&h, 1e-12));
                    prop_assert!(h.len() >= iv.len() / 2.0 - 1e-12);
                    prop_assert!(!h.straddles_zero());
                }
            }
        }
    }
}
