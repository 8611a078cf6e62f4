//! Expectations `E[K_k(|s|_0)]` of generalized Krawtchouk rows under the
//! walk, the shift statistic on subsets with its count profile, and the
//! claimed closed forms they are checked against.

use itertools::Itertools;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::BTreeMap;

use crate::chain::{zero_count_distribution, zero_count_polynomial, WalkParams};
use crate::error::{invalid, Error, Result};
use crate::krawtchouk::{generalized_krawtchouk, KrawtchoukTable};
use crate::numerics::{self, binomial, binomial_signed, int, pow, rat, root_power_sum, round_to_integer, unit_root};
use crate::poly::RationalPoly;

pub const MAX_SUBSETS: u128 = 1_000_000;

/// `sum_{i=0}^{floor(|k-c|/p)} (a_{c+ip} - a_{c+ip-1})` over the sorted
/// elements `a_1 < ... < a_k` of `t`, with `a_j = 0` for `j <= 0`. Terms whose
/// upper index exceeds `k` are skipped.
pub fn shift(t: &[usize], c: usize, p: usize) -> Result<u64> {
    if p < 2 {
        return Err(invalid(format!("p must be >= 2, got {p}")));
    }
    if t.windows(2).any(|w| w[0] >= w[1]) || t.first() == Some(&0) {
        return Err(invalid("subset must be strictly increasing elements of 1..=n"));
    }
    let k = t.len();
    let a = |j: i64| -> u64 {
        if j <= 0 {
            0
        } else {
            t[j as usize - 1] as u64
        }
    };
    let upper = k.abs_diff(c) / p;
    let mut total = 0u64;
    for i in 0..=upper {
        let top = (c + i * p) as i64;
        if top > k as i64 {
            continue;
        }
        total += a(top) - a(top - 1);
    }
    Ok(total)
}

/// Number of `k`-subsets of `[n]` at each shift value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShiftProfile {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub c: usize,
    pub counts: BTreeMap<u64, u64>,
}

impl ShiftProfile {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, d: u64) -> u64 {
        self.counts.get(&d).copied().unwrap_or(0)
    }
}

pub fn shift_profile_oracle(n: usize, k: usize, p: usize, c: usize) -> Result<ShiftProfile> {
    let size: u128 = binomial(n as u64, k as i64).try_into().unwrap_or(u128::MAX);
    if size > MAX_SUBSETS {
        return Err(Error::CapExceeded {
            what: "k-subsets C(n,k)",
            size,
            cap: MAX_SUBSETS,
        });
    }
    let mut counts = BTreeMap::new();
    for t in (1..=n).combinations(k) {
        *counts.entry(shift(&t, c, p)?).or_insert(0) += 1;
    }
    Ok(ShiftProfile { n, k, p, c, counts })
}

/// The two claimed normalizations of the subset count at shift `d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhiVariants {
    /// `C(d-1, j-1) C(n-d, j) / p^k` with `j = floor(|k-c|/(p-1))`.
    #[serde(serialize_with = "crate::chain::ser_rational")]
    pub with_prefactor: BigRational,
    /// `C(d-1, j-1) C(n-d, j)`.
    #[serde(serialize_with = "crate::chain::ser_rational")]
    pub without_prefactor: BigRational,
}

pub fn phi_closed_form(n: usize, k: usize, p: usize, c: usize, d: usize) -> Result<PhiVariants> {
    if p < 2 || c > p {
        return Err(invalid(format!("need p >= 2 and 0 <= c <= p, got p={p}, c={c}")));
    }
    if d < k || d + k > n {
        return Err(Error::IndexOutOfRange(format!(
            "d = {d} outside [{k}, {}]",
            n as i64 - k as i64
        )));
    }
    let j = (k.abs_diff(c) / (p - 1)) as i64;
    let count = binomial_signed(d as i64 - 1, j - 1) * binomial((n - d) as u64, j);
    let without = BigRational::from_integer(count);
    let with = &without / int(num_traits::pow(BigInt::from(p), k));
    Ok(PhiVariants {
        with_prefactor: with,
        without_prefactor: without,
    })
}

/// `E[K_k(|s|_0)] = sum_l Pr[|s|_0 = l] K_k(l)` from the exact DP and the
/// generalized table.
pub fn expected_krawtchouk_oracle(params: &WalkParams, k: usize) -> Result<BigRational> {
    let n = params.n();
    if k > n {
        return Err(Error::IndexOutOfRange(format!("k = {k} exceeds n = {n}")));
    }
    let dist = zero_count_distribution(params)?;
    let mut total = BigRational::zero();
    for (l, prob) in dist.probs().iter().enumerate() {
        total += prob * BigRational::from_integer(generalized_krawtchouk(n, params.p(), k, l)?);
    }
    Ok(total)
}

/// All moments `E[K_k(|s|_0)]` for `k = 0..=n` from one DP pass.
pub fn moment_values(params: &WalkParams) -> Result<Vec<BigRational>> {
    let n = params.n();
    let dist = zero_count_distribution(params)?;
    let table = KrawtchoukTable::generalized(n, params.p())?;
    Ok((0..=n)
        .map(|k| {
            dist.probs()
                .iter()
                .zip(table.row(k))
                .map(|(prob, v)| prob * BigRational::from_integer(v.clone()))
                .sum()
        })
        .collect())
}

/// Moments as exact polynomials in the mixing bias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MomentVector {
    pub p: usize,
    pub n: usize,
    pub values: Vec<RationalPoly>,
}

impl MomentVector {
    pub fn new(p: usize, n: usize) -> Result<Self> {
        let dist = zero_count_polynomial(p, n)?;
        let table = KrawtchoukTable::generalized(n, p)?;
        let values = (0..=n)
            .map(|k| {
                let mut acc = RationalPoly::zero();
                for (l, poly) in dist.iter().enumerate() {
                    acc = &acc + &poly.scale(&BigRational::from_integer(table.get(k, l).clone()));
                }
                acc
            })
            .collect();
        Ok(Self { p, n, values })
    }

    pub fn eval(&self, delta: &BigRational) -> Vec<BigRational> {
        self.values.iter().map(|v| v.eval(delta)).collect()
    }

    /// Rows `k` with `k mod p != 0` whose moment is not identically zero.
    pub fn nonvanishing_off_multiples(&self) -> Vec<usize> {
        (0..=self.n)
            .filter(|k| k % self.p != 0 && !self.values[*k].is_zero())
            .collect()
    }
}

pub fn expected_krawtchouk_polynomial(p: usize, n: usize, k: usize) -> Result<RationalPoly> {
    if k > n {
        return Err(Error::IndexOutOfRange(format!("k = {k} exceeds n = {n}")));
    }
    Ok(MomentVector::new(p, n)?.values.swap_remove(k))
}

/// Claimed closed-form candidates for `E[K_k]` at `k = 0 mod p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormVariant {
    /// `p^{-k} sum_d C(d-1,j-1) C(n-d,j) delta^d`.
    PrefactorInversePowerDelta,
    /// `p^{-k} sum_d C(d-1,j-1) C(n-d,j) lambda^d` with `lambda = delta/p`.
    PrefactorInversePowerLambda,
    /// `(p-1)^{n-k} sum_d C(d-1,j-1) C(n-d,j) delta^d`.
    PrefactorWeightDelta,
    /// `(p-1)^{n-k} sum_d C(d-1,j-1) C(n-d,j) lambda^d`.
    PrefactorWeightLambda,
}

impl ClosedFormVariant {
    pub const ALL: [Self; 4] = [
        Self::PrefactorInversePowerDelta,
        Self::PrefactorInversePowerLambda,
        Self::PrefactorWeightDelta,
        Self::PrefactorWeightLambda,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormStatus {
    /// Exactly one variant equals the oracle.
    Matched,
    /// No variant equals the oracle.
    NoVariantMatches,
    /// More than one variant equals the oracle, so the instance cannot pin
    /// a form (every variant vanishes at `delta = 0`).
    Degenerate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormEntry {
    pub variant: ClosedFormVariant,
    #[serde(serialize_with = "crate::chain::ser_rational")]
    pub value: BigRational,
    pub matches_oracle: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormComparison {
    pub p: usize,
    pub n: usize,
    pub k: usize,
    #[serde(serialize_with = "crate::chain::ser_rational")]
    pub delta: BigRational,
    #[serde(serialize_with = "crate::chain::ser_rational")]
    pub oracle: BigRational,
    pub variants: Vec<ClosedFormEntry>,
    pub status: ClosedFormStatus,
    pub matched: Option<ClosedFormVariant>,
}

fn subset_series(n: usize, k: usize, p: usize, x: &BigRational) -> BigRational {
    let j = (k / (p - 1)) as i64;
    (k..=n - k)
        .map(|d| {
            let coeff = binomial_signed(d as i64 - 1, j - 1) * binomial((n - d) as u64, j);
            BigRational::from_integer(coeff) * pow(x, d)
        })
        .sum()
}

/// Evaluates every claimed variant and compares it with the DP oracle.
pub fn expected_krawtchouk_closed(p: usize, n: usize, k: usize, delta: &BigRational) -> Result<ClosedFormComparison> {
    if p < 2 || k < p || !k.is_multiple_of(p) || 2 * k > n {
        return Err(invalid(format!(
            "closed form needs k a positive multiple of p with k <= n/2, got p={p}, n={n}, k={k}"
        )));
    }
    let params = WalkParams::from_mixture(p, n, delta.clone())?;
    let oracle = expected_krawtchouk_oracle(&params, k)?;
    let inverse_power = rat(1, 1) / int(num_traits::pow(BigInt::from(p), k));
    let weight = int(num_traits::pow(BigInt::from(p - 1), n - k));
    let by_delta = subset_series(n, k, p, delta);
    let by_lambda = subset_series(n, k, p, params.lambda());
    let variants: Vec<ClosedFormEntry> = ClosedFormVariant::ALL
        .iter()
        .map(|&variant| {
            let value = match variant {
                ClosedFormVariant::PrefactorInversePowerDelta => &inverse_power * &by_delta,
                ClosedFormVariant::PrefactorInversePowerLambda => &inverse_power * &by_lambda,
                ClosedFormVariant::PrefactorWeightDelta => &weight * &by_delta,
                ClosedFormVariant::PrefactorWeightLambda => &weight * &by_lambda,
            };
            ClosedFormEntry {
                variant,
                matches_oracle: value == oracle,
                value,
            }
        })
        .collect();
    let matching: Vec<ClosedFormVariant> = variants
        .iter()
        .filter(|e| e.matches_oracle)
        .map(|e| e.variant)
        .collect();
    let (status, matched) = match matching.as_slice() {
        [] => (ClosedFormStatus::NoVariantMatches, None),
        [one] => (ClosedFormStatus::Matched, Some(*one)),
        _ => (ClosedFormStatus::Degenerate, None),
    };
    Ok(ClosedFormComparison {
        p,
        n,
        k,
        delta: delta.clone(),
        oracle,
        variants,
        status,
        matched,
    })
}

/// Aggregate over a grid: one comparison per eligible `(p, n, k, delta)`.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormReport {
    pub comparisons: Vec<ClosedFormComparison>,
    pub matched: usize,
    pub no_variant_matches: usize,
    pub degenerate: usize,
    /// Variants that matched at least once, with their match counts.
    pub pinned: BTreeMap<String, usize>,
}

pub fn closed_form_report(ps: &[usize], ns: &[usize], deltas: &[BigRational]) -> Result<ClosedFormReport> {
    let mut comparisons = Vec::new();
    for &p in ps {
        for &n in ns {
            for k in (p..=n / 2).step_by(p) {
                for delta in deltas {
                    comparisons.push(expected_krawtchouk_closed(p, n, k, delta)?);
                }
            }
        }
    }
    let count = |s: ClosedFormStatus| comparisons.iter().filter(|c| c.status == s).count();
    let mut pinned = BTreeMap::new();
    for c in &comparisons {
        if let Some(v) = c.matched {
            let name = serde_json::to_value(v).expect("enum serializes");
            *pinned.entry(name.as_str().unwrap_or_default().to_string()).or_insert(0) += 1;
        }
    }
    Ok(ClosedFormReport {
        matched: count(ClosedFormStatus::Matched),
        no_variant_matches: count(ClosedFormStatus::NoVariantMatches),
        degenerate: count(ClosedFormStatus::Degenerate),
        pinned,
        comparisons,
    })
}

/// `E[omega_p^u]` for one increment `u ~ (1 - delta) Uniform + delta 1_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementExpectation {
    /// `delta + (1 - delta)/p * sum_c omega^c`, with the root sum rounded to
    /// the integer it provably is.
    pub exact: BigRational,
    /// Direct floating sum `sum_c omega^c Pr[u = c]`.
    pub complex: Complex64,
}

pub fn increment_expectation(p: usize, delta: &BigRational) -> Result<IncrementExpectation> {
    if p < 2 {
        return Err(invalid(format!("p must be >= 2, got {p}")));
    }
    if delta.is_negative() || delta > &BigRational::one() {
        return Err(invalid(format!("delta = {delta} outside [0, 1]")));
    }
    let uniform_part = (BigRational::one() - delta) / int(p as i64);
    let root_sum = round_to_integer(root_power_sum(p as u64, 1)?, numerics::ROOT_TOLERANCE)
        .ok_or_else(|| Error::Invariant("root-of-unity sum is not an integer".into()))?;
    let exact = delta + &uniform_part * BigRational::from_integer(root_sum);
    let stay = numerics::to_f64(delta);
    let each = numerics::to_f64(&uniform_part);
    let complex = (0..p as u64)
        .map(|c| unit_root(p as u64, c) * (each + if c == 0 { stay } else { 0.0 }))
        .sum();
    Ok(IncrementExpectation { exact, complex })
}

/// Row `k` and the polynomial `E[K_k]` for one failing instance of the
/// claimed vanishing at `k mod p != 0`.
#[derive(Debug, Clone, Serialize)]
pub struct VanishingViolation {
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub moment: RationalPoly,
}

/// Scans `k mod p != 0` for nonzero moment polynomials.
pub fn vanishing_violations(p: usize, n: usize) -> Result<Vec<VanishingViolation>> {
    let moments = MomentVector::new(p, n)?;
    Ok(moments
        .nonvanishing_off_multiples()
        .into_iter()
        .map(|k| VanishingViolation {
            p,
            n,
            k,
            moment: moments.values[k].clone(),
        })
        .collect())
}
