//! Rigorous rational enclosures of `ln` and `exp`.
//!
//! Every function returns `(lo, hi)` with `lo <= f(x) <= hi` and
//! `hi - lo` below `10^-digits`. Intermediate values are rounded outward
//! to a fixed denominator so sizes stay bounded.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::poly::{int, Rational};

fn pow10(d: u32) -> BigInt {
    num_traits::pow(BigInt::from(10), d as usize)
}

/// Largest multiple of `1/den` not above `r`.
pub fn floor_to(r: &Rational, den: &BigInt) -> Rational {
    let scaled = r * Rational::from_integer(den.clone());
    Rational::new(scaled.numer().div_floor(scaled.denom()), den.clone())
}

/// Smallest multiple of `1/den` not below `r`.
pub fn ceil_to(r: &Rational, den: &BigInt) -> Rational {
    let scaled = r * Rational::from_integer(den.clone());
    Rational::new(scaled.numer().div_ceil(scaled.denom()), den.clone())
}

/// `2 atanh(z)` for `0 <= z <= 1/2`, enclosed to `10^-digits`.
fn two_atanh(z: &Rational, digits: u32) -> (Rational, Rational) {
    let eps = Rational::new(BigInt::one(), pow10(digits + 5));
    let den = pow10(digits + 10);
    let z2 = z * z;
    let mut power = z.clone();
    let mut lo = Rational::zero();
    let mut k = 1i64;
    loop {
        lo += &power / int(k);
        power = floor_to(&(&power * &z2), &den);
        k += 2;
        // remaining terms: sum_{j >= 0} power z^{2j} / (k + 2j) <= power / (k (1 - z^2))
        let tail = ceil_to(&(&power / (int(k) * (Rational::one() - &z2))), &den);
        if tail < eps {
            let lo2 = floor_to(&(&lo * int(2)), &den);
            // the floor on `power` may drop up to 1/den per step; absorb it
            let slack = Rational::new(BigInt::from(k), den.clone());
            let hi2 = ceil_to(&((&lo + &tail + slack) * int(2)), &den);
            return (lo2, hi2);
        }
    }
}

pub fn ln2(digits: u32) -> (Rational, Rational) {
    two_atanh(&Rational::new(1.into(), 3.into()), digits)
}

/// Enclosure of `ln(x)` for `x > 0`.
pub fn ln_enclosure(x: &Rational, digits: u32) -> (Rational, Rational) {
    assert!(x.is_positive(), "ln of a non-positive number");
    // x = m * 2^k with 1 <= m < 2
    let mut m = x.clone();
    let mut k: i64 = 0;
    let two = int(2);
    while m >= two {
        m /= &two;
        k += 1;
    }
    while m < Rational::one() {
        m *= &two;
        k -= 1;
    }
    let extra = (k.unsigned_abs() as f64 + 1.0).log10().ceil() as u32 + 2;
    let (l2lo, l2hi) = ln2(digits + extra);
    let z = (&m - Rational::one()) / (&m + Rational::one());
    let (mlo, mhi) = two_atanh(&z, digits + 2);
    let kr = int(k);
    if k >= 0 {
        (&kr * &l2lo + mlo, &kr * &l2hi + mhi)
    } else {
        (&kr * &l2hi + mlo, &kr * &l2lo + mhi)
    }
}

/// Enclosure of `e^t` for `0 <= t <= 1/2` by a Taylor series.
fn exp_small(t: &Rational, den: &BigInt) -> (Rational, Rational) {
    let eps = Rational::new(BigInt::one(), den.clone());
    let mut term = Rational::one();
    let mut lo = Rational::zero();
    let mut n = 0i64;
    loop {
        lo += &term;
        n += 1;
        term = &term * t / int(n);
        // remaining terms bounded by a geometric series with ratio 1/2
        let tail = &term * int(2);
        if tail < eps {
            return (floor_to(&lo, den), ceil_to(&(lo + tail), den));
        }
    }
}

/// Enclosure of `e^t` for `t >= 0`, relative width about `10^-digits`.
pub fn exp_enclosure(t: &Rational, digits: u32) -> (Rational, Rational) {
    assert!(!t.is_negative());
    let half = Rational::new(1.into(), 2.into());
    let mut s = 0u32;
    let mut r = t.clone();
    while r > half {
        r /= int(2);
        s += 1;
    }
    // squaring s times multiplies relative error by 2^s; spend more digits
    let den = pow10(digits + 10 + s / 3 + 1);
    let (mut lo, mut hi) = exp_small(&r, &den);
    for _ in 0..s {
        lo = &lo * &lo;
        hi = &hi * &hi;
        // keep sizes bounded: relative rounding at ~digits+10+s places
        let scale = Rational::from_integer(pow10(digits + 10 + s / 3 + 1));
        let mag = hi.to_integer().bits().max(1);
        let unit = Rational::from_integer(BigInt::one() << mag as usize);
        lo = floor_to(&(&lo / &unit * &scale), &BigInt::one()) / &scale * &unit;
        hi = ceil_to(&(&hi / &unit * &scale), &BigInt::one()) / &scale * &unit;
    }
    (lo, hi)
}

/// Decimal expansion of `r` rounded toward negative infinity.
pub fn decimal_floor(r: &Rational, places: u32) -> String {
    let den = pow10(places);
    let scaled = floor_to(r, &den) * Rational::from_integer(den);
    let n = scaled.to_integer();
    let neg = n.is_negative();
    let digits = n.abs().to_string();
    let width = places as usize + 1;
    let padded = format!("{:0>width$}", digits);
    let (ip, fp) = padded.split_at(padded.len() - places as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, ip, fp)
}
