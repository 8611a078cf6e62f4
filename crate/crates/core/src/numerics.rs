//! Exact arithmetic substrate: binomials, rationals, and p-th roots of unity.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::f64::consts::{E, TAU};

use crate::error::{invalid, Error, Result};

/// Tolerance for identities between floating roots of unity.
pub const ROOT_TOLERANCE: f64 = 1e-10;

/// `C(n, k)`, zero when `k < 0` or `k > n`.
pub fn binomial(n: u64, k: i64) -> BigInt {
    if k < 0 || k as u64 > n {
        return BigInt::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Binomial with a possibly negative top index; `C(m, k) = 0` for `m < 0`.
pub(crate) fn binomial_signed(m: i64, k: i64) -> BigInt {
    if m < 0 {
        BigInt::zero()
    } else {
        binomial(m as u64, k)
    }
}

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(value.into())
}

pub fn pow(base: &BigRational, exp: usize) -> BigRational {
    num_traits::pow(base.clone(), exp)
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Fall back to log-space when numerator and denominator overflow f64.
        let sign = if x.is_negative() { -1.0 } else { 1.0 };
        sign * (ln_bigint(&x.numer().abs()) - ln_bigint(x.denom())).exp()
    })
}

pub(crate) fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational, finite even when it overflows `f64`.
pub fn ln_rational(x: &BigRational) -> f64 {
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

/// Parses `"3/10"`, `"-2"`, `"0.025"` or `"1/4"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let text = text.trim();
    let bad = || invalid(format!("cannot parse {text:?} as a rational"));
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(invalid(format!("zero denominator in {text:?}")));
        }
        return Ok(BigRational::new(num, den));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let mantissa: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let value = BigRational::new(mantissa, scale);
    Ok(if negative { -value } else { value })
}

/// Scientific notation with exactly `digits` significant digits, correctly
/// rounded (half away from zero).
pub fn to_sci_string(x: &BigRational, digits: usize) -> String {
    assert!(digits >= 1);
    if x.is_zero() {
        return format!("0.{}e0", "0".repeat(digits - 1));
    }
    let sign = if x.is_negative() { "-" } else { "" };
    let a = x.abs();
    let ten = BigRational::from_integer(BigInt::from(10));
    let mut exp = a.numer().to_string().len() as i64 - a.denom().to_string().len() as i64;
    let pow10 = |e: i64| -> BigRational {
        if e >= 0 {
            num_traits::pow(ten.clone(), e as usize)
        } else {
            num_traits::pow(ten.clone(), (-e) as usize).recip()
        }
    };
    while a < pow10(exp) {
        exp -= 1;
    }
    while a >= pow10(exp + 1) {
        exp += 1;
    }
    let scaled = &a * pow10(digits as i64 - 1 - exp);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut mantissa = (scaled + half).floor().to_integer();
    if mantissa == num_traits::pow(BigInt::from(10), digits) {
        mantissa /= 10;
        exp += 1;
    }
    let m = mantissa.to_string();
    if digits == 1 {
        format!("{sign}{m}e{exp}")
    } else {
        format!("{sign}{}.{}e{exp}", &m[..1], &m[1..])
    }
}

/// `numerator/denominator` in lowest terms.
pub fn fraction_string(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// `C(n,k)^2 / C(n,pk)` against the envelope `(ne/k)^{2k} (pk/n)^{pk}`.
#[derive(Debug, Clone)]
pub struct BinomialRatioBound {
    pub lhs: BigRational,
    pub rhs_bound: f64,
    pub holds: bool,
}

pub fn binomial_ratio_bound(n: u64, k: u64, p: u64) -> Result<BinomialRatioBound> {
    if p < 2 || k < 1 || p * k > n {
        return Err(invalid(format!(
            "need p >= 2 and 1 <= k <= n/p, got n={n}, k={k}, p={p}"
        )));
    }
    let lhs = BigRational::new(binomial(n, k as i64).pow(2), binomial(n, (p * k) as i64));
    let (nf, kf, pf) = (n as f64, k as f64, p as f64);
    let ln_rhs = 2.0 * kf * (nf * E / kf).ln() + pf * kf * (pf * kf / nf).ln();
    let holds = ln_rational(&lhs) <= ln_rhs + 1e-12;
    Ok(BinomialRatioBound {
        lhs,
        rhs_bound: ln_rhs.exp(),
        holds,
    })
}

/// A point on the unit circle, `exp(2 pi i j / p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitComplex(pub Complex64);

impl UnitComplex {
    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }
}

pub fn root_of_unity(p: u64, j: i64) -> Result<UnitComplex> {
    if p < 2 {
        return Err(invalid(format!("roots of unity need p >= 2, got {p}")));
    }
    let j = j.rem_euclid(p as i64) as u64;
    Ok(UnitComplex(unit_root(p, j)))
}

pub(crate) fn unit_root(p: u64, j: u64) -> Complex64 {
    let j = j % p;
    // Exact values on the axes keep small sums clean.
    match (4 * j).checked_rem(p) {
        Some(0) => match 4 * j / p {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        },
        _ => Complex64::from_polar(1.0, TAU * j as f64 / p as f64),
    }
}

/// `sum_{j=0}^{p-1} omega_p^{kj}`: `p` when `k = 0`, zero otherwise.
pub fn root_power_sum(p: u64, k: u64) -> Result<Complex64> {
    if p < 2 {
        return Err(invalid(format!("roots of unity need p >= 2, got {p}")));
    }
    if k >= p {
        return Err(Error::IndexOutOfRange(format!("k = {k} not in 0..{p}")));
    }
    Ok((0..p).map(|j| unit_root(p, k * j)).sum())
}

/// Rounds a value that is provably a rational integer, failing when it is not
/// within `tol` of one.
pub fn round_to_integer(z: Complex64, tol: f64) -> Option<BigInt> {
    let r = z.re.round();
    if (z.re - r).abs() <= tol && z.im.abs() <= tol {
        Some(BigInt::from(r as i128))
    } else {
        None
    }
}

/// Distribution `C(n,l) (p-1)^{n-l} / p^n` of zeros among `n` uniform symbols.
pub fn uniform_zero_weights(n: usize, p: usize) -> Vec<BigRational> {
    let total = num_traits::pow(BigInt::from(p), n);
    (0..=n)
        .map(|l| {
            BigRational::new(
                binomial(n as u64, l as i64) * num_traits::pow(BigInt::from(p - 1), n - l),
                total.clone(),
            )
        })
        .collect()
}

pub(crate) fn lcm(a: &BigInt, b: &BigInt) -> BigInt {
    a.lcm(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        for n in 0..20 {
            assert_eq!(binomial(n, 0), BigInt::one());
        }
        assert_eq!(binomial(7, 9), BigInt::zero());
        assert_eq!(binomial(7, -1), BigInt::zero());
    }

    #[test]
    fn pascal_rule_exhaustive() {
        for n in 1..=64u64 {
            for k in 0..=n as i64 {
                assert_eq!(
                    binomial(n, k),
                    binomial(n - 1, k - 1) + binomial(n - 1, k),
                    "n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn binomial_ratio_examples() {
        let b = binomial_ratio_bound(10, 1, 2).unwrap();
        assert_eq!(b.lhs, rat(100, 45));
        let expected = (10.0 * E).powi(2) * 0.2f64.powi(2);
        assert!((b.rhs_bound - expected).abs() < 1e-9 * expected);
        assert!(b.holds);

        for p in 2..6u64 {
            let b = binomial_ratio_bound(p, 1, p).unwrap();
            assert_eq!(b.lhs, int(p * p));
            let expected = (p as f64 * E).powi(2);
            assert!((b.rhs_bound - expected).abs() < 1e-9 * expected);
            assert!(b.holds);
        }

        let b = binomial_ratio_bound(12, 2, 3).unwrap();
        assert_eq!(b.lhs, rat(4356, 924));
        assert!(b.holds);
    }

    #[test]
    fn binomial_ratio_claim_holds_on_grid() {
        for n in 1..=40u64 {
            for p in 2..=5u64 {
                for k in 1..=n / p {
                    let b = binomial_ratio_bound(n, k, p).unwrap();
                    assert!(b.holds, "n={n} k={k} p={p}: {} vs {}", to_f64(&b.lhs), b.rhs_bound);
                }
            }
        }
    }

    #[test]
    fn binomial_ratio_rejects_bad_ranges() {
        assert!(binomial_ratio_bound(10, 0, 2).is_err());
        assert!(binomial_ratio_bound(10, 6, 2).is_err());
        assert!(binomial_ratio_bound(10, 1, 1).is_err());
    }

    #[test]
    fn roots_of_unity_examples() {
        let z = root_of_unity(2, 1).unwrap();
        assert!((z.0 - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let z = root_of_unity(4, 1).unwrap();
        assert!((z.0 - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let z = root_of_unity(3, 3).unwrap();
        assert!((z.0 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(root_of_unity(1, 0).is_err());
        let z = root_of_unity(5, -1).unwrap();
        assert!((z.0 - root_of_unity(5, 4).unwrap().0).norm() < 1e-15);
        for p in 2..30 {
            for j in 0..p as i64 {
                assert!((root_of_unity(p, j).unwrap().0.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn root_power_sums() {
        assert!((root_power_sum(5, 0).unwrap() - Complex64::new(5.0, 0.0)).norm() < 1e-12);
        assert!(root_power_sum(5, 2).unwrap().norm() < ROOT_TOLERANCE);
        assert!(root_power_sum(2, 1).unwrap().norm() < ROOT_TOLERANCE);
        for p in 2..=12 {
            for k in 1..p {
                assert!(root_power_sum(p, k).unwrap().norm() < ROOT_TOLERANCE, "p={p} k={k}");
            }
        }
        assert!(root_power_sum(5, 5).is_err());
    }

    #[test]
    fn sci_formatting() {
        assert_eq!(to_sci_string(&rat(1, 4), 5), "2.5000e-1");
        assert_eq!(to_sci_string(&rat(-2, 3), 4), "-6.667e-1");
        assert_eq!(to_sci_string(&rat(999_999, 1), 3), "1.00e6");
        assert_eq!(to_sci_string(&int(0), 3), "0.00e0");
        assert_eq!(to_sci_string(&rat(1, 3), 30), format!("3.{}e-1", "3".repeat(29)));
        assert_eq!(to_sci_string(&rat(1, 1000), 1), "1e-3");
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("3/10").unwrap(), rat(3, 10));
        assert_eq!(parse_rational("0.025").unwrap(), rat(1, 40));
        assert_eq!(parse_rational("-2").unwrap(), int(-2));
        assert_eq!(parse_rational(".5").unwrap(), rat(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1e-3").is_err());
    }

    proptest! {
        #[test]
        fn rational_addition_is_exact(a in -1000i64..1000, b in 1i64..1000, c in -1000i64..1000, d in 1i64..1000) {
            let x = rat(a, b);
            let y = rat(c, d);
            prop_assert_eq!((&x + &y) - &y, x.clone());
            prop_assert!(x.denom() > &BigInt::zero());
            prop_assert_eq!(x.numer().gcd(x.denom()), BigInt::one());
        }

        #[test]
        fn sci_string_round_trips_to_nearby_value(a in 1i64..10_000_000, b in 1i64..10_000_000) {
            let x = rat(a, b);
            let s = to_sci_string(&x, 30);
            let parsed: f64 = s.parse().unwrap();
            prop_assert!((parsed - to_f64(&x)).abs() <= 1e-14 * to_f64(&x));
        }
    }
}
