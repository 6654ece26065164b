//! Exact rational helpers for ceilings that must not be off by one.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// The exact rational value of a finite `f64` (every finite double is dyadic).
pub fn rational(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

pub fn integer(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `⌈r⌉` as `u64`, or `None` when negative or out of range.
pub fn ceil_u64(r: &BigRational) -> Option<u64> {
    if r.is_negative() {
        return None;
    }
    r.ceil().to_integer().to_u64()
}

pub fn is_positive(r: &BigRational) -> bool {
    r > &BigRational::zero()
}

pub fn one() -> BigRational {
    BigRational::one()
}

/// Nearest `f64` at or below `r`.
pub fn floor_f64(r: &BigRational) -> f64 {
    let mut x = r.to_f64().unwrap_or(f64::NAN);
    while let Some(q) = rational(x) {
        if &q <= r {
            break;
        }
        x = x.next_down();
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_is_exact() {
        let r = rational(0.1).unwrap();
        assert_ne!(r, BigRational::new(1.into(), 10.into()));
        assert_eq!(rational(0.75).unwrap(), BigRational::new(3.into(), 4.into()));
        assert!(rational(f64::INFINITY).is_none());
    }

    #[test]
    fn ceilings() {
        assert_eq!(ceil_u64(&BigRational::new(16.into(), 3.into())), Some(6));
        assert_eq!(ceil_u64(&integer(4)), Some(4));
        assert_eq!(ceil_u64(&BigRational::new((-1).into(), 2.into())), None);
    }

    #[test]
    fn floor_f64_never_exceeds() {
        let third = BigRational::new(1.into(), 3.into());
        let x = floor_f64(&third);
        assert!(rational(x).unwrap() <= third);
        assert!(rational(x.next_up()).unwrap() > third);
    }
}
