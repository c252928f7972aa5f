//! Small helpers on exact rationals: integer powers of the branching
//! parameter, exact and rounded base-n logarithms, and prime support.

use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::Rational;

/// `n^e` as an exact rational, for any integer exponent `e`.
pub fn pow_n(n: u32, e: i64) -> Rational {
    let base = BigInt::from(n);
    let mag = base.pow(e.unsigned_abs() as u32);
    if e >= 0 {
        Rational::from_integer(mag)
    } else {
        Rational::new(BigInt::one(), mag)
    }
}

/// Exact base-`n` logarithm: `Some(j)` iff `r == n^j`.
pub fn log_n_exact(r: &Rational, n: u32) -> Option<i64> {
    if !r.is_positive() {
        return None;
    }
    let base = BigInt::from(n);
    if r.is_integer() {
        let mut v = r.to_integer();
        let mut j = 0i64;
        while v > BigInt::one() {
            if (&v % &base).is_zero() {
                v /= &base;
                j += 1;
            } else {
                return None;
            }
        }
        (v.is_one()).then_some(j)
    } else if r.numer().is_one() {
        log_n_exact(&r.recip(), n).map(|j| -j)
    } else {
        None
    }
}

/// Smallest integer `j` with `n^j >= r`, for positive `r`.
pub fn ceil_log_n(r: &Rational, n: u32) -> i64 {
    assert!(r.is_positive(), "ceil_log_n needs a positive argument");
    let mut j = 0i64;
    if pow_n(n, 0) >= *r {
        // walk down while n^(j-1) still dominates
        while pow_n(n, j - 1) >= *r {
            j -= 1;
        }
        j
    } else {
        while pow_n(n, j) < *r {
            j += 1;
        }
        j
    }
}

/// Distinct prime factors of a nonnegative integer, by trial division.
/// Every magnitude in this crate is a product of small primes (divisors of
/// the branching parameter), so trial division is exact and fast.
pub fn prime_factors(v: &BigUint) -> Vec<u64> {
    let mut out = Vec::new();
    let mut v = v.clone();
    if v <= BigUint::one() {
        return out;
    }
    let mut p = 2u64;
    while &BigUint::from(p) * BigUint::from(p) <= v {
        if (&v % p).is_zero() {
            out.push(p);
            while (&v % p).is_zero() {
                v /= p;
            }
        }
        p += 1;
    }
    if v > BigUint::one() {
        // remaining cofactor is prime
        let mut digits = v.to_u64_digits();
        debug_assert!(digits.len() == 1, "unexpectedly large prime factor");
        out.push(digits.pop().unwrap());
    }
    out
}

/// Distinct primes dividing the numerator or denominator of a reduced
/// positive rational.
pub fn prime_support(r: &Rational) -> Vec<u64> {
    let mut out = prime_factors(r.numer().magnitude());
    for p in prime_factors(r.denom().magnitude()) {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_round_trip_through_log() {
        for n in [2u32, 3, 6] {
            for e in -9i64..=9 {
                assert_eq!(log_n_exact(&pow_n(n, e), n), Some(e));
            }
        }
    }

    #[test]
    fn log_rejects_non_powers() {
        assert_eq!(log_n_exact(&Rational::new(3.into(), 1.into()), 2), None);
        assert_eq!(log_n_exact(&Rational::new(2.into(), 3.into()), 6), None);
        assert_eq!(log_n_exact(&Rational::new(0.into(), 1.into()), 2), None);
    }

    #[test]
    fn ceil_log_brackets() {
        for n in [2u32, 3] {
            for num in 1i64..20 {
                for den in 1i64..8 {
                    let r = Rational::new(num.into(), den.into());
                    let j = ceil_log_n(&r, n);
                    assert!(pow_n(n, j) >= r);
                    assert!(pow_n(n, j - 1) < r);
                }
            }
        }
    }

    #[test]
    fn prime_support_of_ratio() {
        let r = Rational::new(12.into(), 35.into());
        assert_eq!(prime_support(&r), alloc::vec![2, 3, 5, 7]);
        assert!(prime_support(&Rational::new(1.into(), 1.into())).is_empty());
    }
}
