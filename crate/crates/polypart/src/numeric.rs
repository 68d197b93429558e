//! Shared numeric helpers: rational/float conversions with known error
//! contracts, and rational string parsing for the file formats.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Nearest-ish f64 approximation of a rational.
///
/// Contract: if the result is finite, it is within 4 ulps of the true value.
/// Overflow yields an infinity, which callers must treat as "no information".
pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Enclosure of a rational in a pair of floats, `lo <= r <= hi`.
pub fn rat_to_f64_interval(r: &BigRational) -> (f64, f64) {
    let a = rat_to_f64(r);
    if !a.is_finite() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    // 4 steps outward covers the 4-ulp contract of `rat_to_f64`.
    let mut lo = a;
    let mut hi = a;
    for _ in 0..4 {
        lo = lo.next_down();
        hi = hi.next_up();
    }
    (lo, hi)
}

/// Parses "123", "-0.25", "1e-3", "2.5e2" or "num/den" into an exact rational.
pub fn parse_rational_str(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n.trim().parse().ok()?;
        let den: BigInt = d.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    // Decimal with optional exponent.
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if frac_part.contains(['+', '-']) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || digits == "-" || digits == "+" {
        return None;
    }
    let num: BigInt = digits.parse().ok()?;
    let scale = frac_part.len() as i32 - exp;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::new(num, ten.pow(scale as u32))
    } else {
        BigRational::from(num * ten.pow((-scale) as u32))
    })
}

/// Renders a rational as "num/den" (or "num" for integers). Exact, parseable.
pub fn rational_to_string(r: &BigRational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Sign of a big integer as -1, 0, 1.
pub fn bigint_sign(x: &BigInt) -> i8 {
    match x.sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

/// True when `a/b < c/d`, all exact (b, d > 0).
pub fn frac_lt(a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt) -> bool {
    a * d < c * b
}

/// Deterministic 64-bit mixer used to derive per-node random substreams.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> BigRational {
    BigRational::from(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_decimal_forms() {
        assert_eq!(parse_rational_str("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rational_str("-3").unwrap(), rat_int(-3));
        assert_eq!(parse_rational_str("1e-3").unwrap(), rat(1, 1000));
        assert_eq!(parse_rational_str("2.5e2").unwrap(), rat_int(250));
        assert_eq!(parse_rational_str("7/4").unwrap(), rat(7, 4));
        assert_eq!(parse_rational_str("-7/4").unwrap(), rat(-7, 4));
        assert!(parse_rational_str("").is_none());
        assert!(parse_rational_str("1/0").is_none());
        assert!(parse_rational_str("1.2.3").is_none());
        assert!(parse_rational_str("0.-5").is_none());
    }

    #[test]
    fn rational_string_round_trip() {
        for r in [rat(3, 7), rat(-22, 4), rat_int(0), rat_int(12)] {
            assert_eq!(parse_rational_str(&rational_to_string(&r)).unwrap(), r);
        }
    }

    #[test]
    fn f64_interval_encloses() {
        for r in [rat(1, 3), rat(-2, 7), rat_int(5), rat(1, 1 << 40)] {
            let (lo, hi) = rat_to_f64_interval(&r);
            let v = rat_to_f64(&r);
            assert!(lo <= v && v <= hi);
            assert!(BigRational::from_float(lo).unwrap() <= r);
            assert!(r <= BigRational::from_float(hi).unwrap());
        }
    }
}
