//! Binary and generalized Krawtchouk functions, their orthogonality and
//! reciprocity, and the expansion transform over the generalized basis.
//!
//! Indexing conventions:
//!
//! * Binary: `K_k(l) = sum_{|y| = k} (-1)^{alpha . y}` with `l` the Hamming
//!   weight of `alpha in {0,1}^n` and `k` the weight of `y`. Row `k = 0` is
//!   constant one.
//! * Generalized: `K_k(l) = sum_{y in Z_p^n, |y|_0 = k} omega_p^{alpha . y}`
//!   with `alpha in {0,1}^n` having `l` zeros. Row `k = n` is constant one,
//!   and at `p = 2` the value equals the binary `K_{n-k}(n-l)`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{binomial, round_to_integer, uniform_zero_weights, unit_root, ROOT_TOLERANCE};

/// Cap on `C(n,l) * p^n` for literal defining-sum evaluation.
pub const MAX_LITERAL_WORK: u128 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Binary,
    Generalized,
}

fn check_index(n: usize, k: usize, l: usize) -> Result<()> {
    if k > n || l > n {
        return Err(Error::IndexOutOfRange(format!("k = {k}, l = {l} must lie in 0..={n}")));
    }
    Ok(())
}

fn sign(exp: usize) -> BigInt {
    if exp.is_multiple_of(2) {
        BigInt::one()
    } else {
        -BigInt::one()
    }
}

/// `sum_t (-1)^t C(l,t) C(n-l,k-t)`.
pub fn binary_krawtchouk(n: usize, k: usize, l: usize) -> Result<BigInt> {
    check_index(n, k, l)?;
    Ok((0..=k)
        .map(|t| sign(t) * binomial(l as u64, t as i64) * binomial((n - l) as u64, (k - t) as i64))
        .sum())
}

/// Generalized value by coordinate factorization: an `alpha = 0` coordinate
/// contributes `1` when `y = 0` and `p - 1` otherwise; an `alpha = 1`
/// coordinate contributes `1` when `y = 0` and `sum_{c != 0} omega^c = -1`
/// otherwise. `a` counts zero coordinates of `y` inside the zeros of `alpha`.
pub fn generalized_krawtchouk(n: usize, p: usize, k: usize, l: usize) -> Result<BigInt> {
    check_index(n, k, l)?;
    if p < 2 {
        return Err(invalid(format!("p must be >= 2, got {p}")));
    }
    let pm1 = BigInt::from(p - 1);
    let lo = k.saturating_sub(n - l);
    let hi = k.min(l);
    Ok((lo..=hi)
        .map(|a| {
            binomial(l as u64, a as i64)
                * binomial((n - l) as u64, (k - a) as i64)
                * num_traits::pow(pm1.clone(), l - a)
                * sign(n - l - (k - a))
        })
        .sum())
}

fn literal_work(n: usize, p: usize, alphas: u128) -> u128 {
    (p as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX)
        .saturating_mul(alphas)
}

/// Residue histogram of `alpha . y mod p` over all `y` with `|y|_0 = k`.
fn residue_counts(alpha: &[bool], p: usize, k: usize) -> Vec<u64> {
    let n = alpha.len();
    let mut counts = vec![0u64; p];
    let mut y = vec![0usize; n];
    loop {
        if y.iter().filter(|&&v| v == 0).count() == k {
            let dot: usize = y.iter().zip(alpha).filter(|(_, &a)| a).map(|(v, _)| v).sum();
            counts[dot % p] += 1;
        }
        let mut i = n;
        loop {
            if i == 0 {
                return counts;
            }
            i -= 1;
            y[i] += 1;
            if y[i] < p {
                break;
            }
            y[i] = 0;
        }
    }
}

fn combine_residues(counts: &[u64], p: usize) -> Complex64 {
    counts
        .iter()
        .enumerate()
        .map(|(r, &c)| unit_root(p as u64, r as u64) * c as f64)
        .sum()
}

/// `alpha` with zeros in the first `l` coordinates and ones elsewhere.
fn canonical_alpha(n: usize, l: usize) -> Vec<bool> {
    (0..n).map(|i| i >= l).collect()
}

/// Literal character sum over every `y in Z_p^n` with `k` zeros, at a fixed
/// `alpha` with `l` zeros. Residues are counted exactly and combined with
/// floating roots of unity once.
pub fn generalized_defining_sum(n: usize, p: usize, k: usize, l: usize) -> Result<Complex64> {
    check_index(n, k, l)?;
    if literal_work(n, p, 1) > MAX_LITERAL_WORK {
        return Err(Error::CapExceeded {
            what: "literal defining sum p^n",
            size: literal_work(n, p, 1),
            cap: MAX_LITERAL_WORK,
        });
    }
    Ok(combine_residues(&residue_counts(&canonical_alpha(n, l), p, k), p))
}

/// Literal binary sum over weight-`k` strings `y` at a fixed `alpha` of
/// weight `l`.
pub fn binary_defining_sum(n: usize, k: usize, l: usize) -> Result<BigInt> {
    check_index(n, k, l)?;
    if n > 24 {
        return Err(Error::CapExceeded {
            what: "binary defining sum length n",
            size: n as u128,
            cap: 24,
        });
    }
    let alpha: u32 = (1u32 << l) - 1;
    Ok((0u32..1 << n)
        .filter(|y| y.count_ones() as usize == k)
        .map(|y| sign((alpha & y).count_ones() as usize))
        .sum())
}

/// Values `K_k(l)` for all `0 <= k, l <= n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KrawtchoukTable {
    variant: Variant,
    n: usize,
    p: usize,
    values: Vec<Vec<BigInt>>,
}

impl KrawtchoukTable {
    pub fn binary(n: usize) -> Self {
        let values = (0..=n)
            .map(|k| (0..=n).map(|l| binary_krawtchouk(n, k, l).expect("in range")).collect())
            .collect();
        Self {
            variant: Variant::Binary,
            n,
            p: 2,
            values,
        }
    }

    pub fn generalized(n: usize, p: usize) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("p must be >= 2, got {p}")));
        }
        let values = (0..=n)
            .map(|k| {
                (0..=n)
                    .map(|l| generalized_krawtchouk(n, p, k, l).expect("in range"))
                    .collect()
            })
            .collect();
        Ok(Self {
            variant: Variant::Generalized,
            n,
            p,
            values,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, k: usize, l: usize) -> &BigInt {
        &self.values[k][l]
    }

    pub fn row(&self, k: usize) -> &[BigInt] {
        &self.values[k]
    }

    pub fn values(&self) -> &[Vec<BigInt>] {
        &self.values
    }
}

/// `E_{b ~ Bin(n, 1/2)}[K_r(b) K_s(b)]`.
pub fn binary_inner_product(n: usize, r: usize, s: usize) -> Result<BigRational> {
    check_index(n, r, s)?;
    let den = num_traits::pow(BigInt::from(2), n);
    let total: BigInt = (0..=n)
        .map(|l| {
            binomial(n as u64, l as i64) * binary_krawtchouk(n, r, l).unwrap() * binary_krawtchouk(n, s, l).unwrap()
        })
        .sum();
    Ok(BigRational::new(total, den))
}

/// `sum_l C(n,l) (p-1)^{n-l} / p^n * K_r(l) K_s(l)` over the generalized
/// table. Composite `p` is accepted.
pub fn generalized_inner_product(n: usize, p: usize, r: usize, s: usize) -> Result<BigRational> {
    check_index(n, r, s)?;
    let weights = uniform_zero_weights(n, p);
    let mut total = BigRational::zero();
    for (l, w) in weights.iter().enumerate() {
        let prod = generalized_krawtchouk(n, p, r, l)? * generalized_krawtchouk(n, p, s, l)?;
        total += w * BigRational::from_integer(prod);
    }
    Ok(total)
}

/// `C(n,k) (p-1)^{n-k}`, the squared norm of row `k`.
pub fn generalized_norm(n: usize, p: usize, k: usize) -> BigInt {
    binomial(n as u64, k as i64) * num_traits::pow(BigInt::from(p - 1), n - k)
}

pub fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub l: usize,
    pub alphas_checked: usize,
    /// Rounded integer value, when every alpha gave an integer.
    pub value: Option<String>,
    pub max_pairwise_deviation: f64,
    pub invariant: bool,
}

/// Evaluates the defining sum at every `alpha in {0,1}^n` with `l` zeros
/// (binary `alpha` weight `n - l` at `p = 2` is the same set).
pub fn invariance_check(n: usize, p: usize, k: usize, l: usize) -> Result<InvarianceReport> {
    check_index(n, k, l)?;
    if p < 2 {
        return Err(invalid(format!("p must be >= 2, got {p}")));
    }
    let alphas = binomial(n as u64, l as i64);
    let alpha_count: u128 = alphas.try_into().unwrap_or(u128::MAX);
    let work = literal_work(n, p, alpha_count);
    if work > MAX_LITERAL_WORK {
        return Err(Error::CapExceeded {
            what: "invariance check C(n,l) p^n",
            size: work,
            cap: MAX_LITERAL_WORK,
        });
    }
    let mut values: Vec<Complex64> = Vec::new();
    for mask in 0u32..1 << n {
        if (n as u32 - mask.count_ones()) as usize != l {
            continue;
        }
        let alpha: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        values.push(combine_residues(&residue_counts(&alpha, p, k), p));
    }
    let mut max_dev: f64 = 0.0;
    for a in &values {
        for b in &values {
            max_dev = max_dev.max((a - b).norm());
        }
    }
    let rounded: Option<Vec<BigInt>> = values.iter().map(|&z| round_to_integer(z, ROOT_TOLERANCE)).collect();
    let value = rounded.and_then(|r| {
        let first = r.first()?.clone();
        r.iter().all(|x| *x == first).then(|| first.to_string())
    });
    Ok(InvarianceReport {
        n,
        p,
        k,
        l,
        alphas_checked: values.len(),
        invariant: value.is_some() && max_dev <= ROOT_TOLERANCE,
        value,
        max_pairwise_deviation: max_dev,
    })
}

/// Coefficients `f_hat(k)` over the generalized basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionCoefficients {
    pub n: usize,
    pub p: usize,
    pub coeffs: Vec<BigRational>,
}

/// `f_hat(k) = E_b[f(b) K_k(b)] / (C(n,k) (p-1)^{n-k})` with `b` the zero
/// count of a uniform string.
pub fn expansion_coefficients(f: &[BigRational], n: usize, p: usize) -> Result<ExpansionCoefficients> {
    if f.len() != n + 1 {
        return Err(invalid(format!("f has {} values, expected {}", f.len(), n + 1)));
    }
    let table = KrawtchoukTable::generalized(n, p)?;
    let weights = uniform_zero_weights(n, p);
    let coeffs = (0..=n)
        .map(|k| {
            let num: BigRational = (0..=n)
                .map(|l| &weights[l] * &f[l] * BigRational::from_integer(table.get(k, l).clone()))
                .sum();
            num / BigRational::from_integer(generalized_norm(n, p, k))
        })
        .collect();
    Ok(ExpansionCoefficients { n, p, coeffs })
}

/// `f(l) = sum_k f_hat(k) K_k(l)`.
pub fn reconstruct_ratio(coeffs: &ExpansionCoefficients) -> Result<Vec<BigRational>> {
    let (n, p) = (coeffs.n, coeffs.p);
    if coeffs.coeffs.len() != n + 1 {
        return Err(invalid("coefficient vector length does not match n"));
    }
    let table = KrawtchoukTable::generalized(n, p)?;
    Ok((0..=n)
        .map(|l| {
            (0..=n)
                .map(|k| &coeffs.coeffs[k] * BigRational::from_integer(table.get(k, l).clone()))
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ReciprocityViolation {
    pub k: usize,
    pub l: usize,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReciprocityVariantReport {
    pub variant: Variant,
    pub pairs_checked: usize,
    pub holds: bool,
    pub violations: Vec<ReciprocityViolation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReciprocityReport {
    pub n: usize,
    pub p: usize,
    pub generalized: ReciprocityVariantReport,
    /// The same `(p-1)`-weighted identity applied to the binary table.
    pub binary_weighted: ReciprocityVariantReport,
}

fn reciprocity_variant(table: &KrawtchoukTable, n: usize, p: usize) -> ReciprocityVariantReport {
    let scaled = |k: usize, l: usize| BigRational::new(table.get(k, l).clone(), generalized_norm(n, p, k));
    let mut violations = Vec::new();
    for k in 0..=n {
        for l in 0..=n {
            let (lhs, rhs) = (scaled(k, l), scaled(l, k));
            if lhs != rhs {
                violations.push(ReciprocityViolation {
                    k,
                    l,
                    lhs: lhs.to_string(),
                    rhs: rhs.to_string(),
                });
            }
        }
    }
    ReciprocityVariantReport {
        variant: table.variant(),
        pairs_checked: (n + 1) * (n + 1),
        holds: violations.is_empty(),
        violations,
    }
}

/// Checks `K_k(l) / (C(n,k)(p-1)^{n-k}) = K_l(k) / (C(n,l)(p-1)^{n-l})` for
/// every pair, under both tables.
pub fn reciprocity_check(n: usize, p: usize) -> Result<ReciprocityReport> {
    if n > 10 {
        return Err(Error::CapExceeded {
            what: "reciprocity check length n",
            size: n as u128,
            cap: 10,
        });
    }
    let generalized = KrawtchoukTable::generalized(n, p)?;
    let binary = KrawtchoukTable::binary(n);
    Ok(ReciprocityReport {
        n,
        p,
        generalized: reciprocity_variant(&generalized, n, p),
        binary_weighted: reciprocity_variant(&binary, n, p),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantRowReport {
    pub variant: Variant,
    /// Rows `k` whose entries are all equal to `(p-1)^n`.
    pub rows_equal_to_claim: Vec<usize>,
    /// Rows whose entries are all equal, with the common value.
    pub constant_rows: Vec<(usize, String)>,
    pub claim_holds: bool,
}

/// Tests the claim that rows `0` and `n` are both identically `(p-1)^n`.
pub fn constant_row_claim(n: usize, p: usize) -> Result<Vec<ConstantRowReport>> {
    let target = num_traits::pow(BigInt::from(p - 1), n);
    let tables = [KrawtchoukTable::binary(n), KrawtchoukTable::generalized(n, p)?];
    Ok(tables
        .iter()
        .map(|t| {
            let constant_rows: Vec<(usize, String)> = (0..=n)
                .filter(|&k| t.row(k).iter().all(|v| v == &t.row(k)[0]))
                .map(|k| (k, t.row(k)[0].to_string()))
                .collect();
            let rows_equal_to_claim: Vec<usize> = (0..=n).filter(|&k| t.row(k).iter().all(|v| *v == target)).collect();
            ConstantRowReport {
                variant: t.variant(),
                claim_holds: rows_equal_to_claim.contains(&0) && rows_equal_to_claim.contains(&n),
                rows_equal_to_claim,
                constant_rows,
            }
        })
        .collect())
}

/// Literal value rounded to an integer; `None` when the character sum is not
/// within tolerance of one.
pub fn generalized_defining_integer(n: usize, p: usize, k: usize, l: usize) -> Result<Option<BigInt>> {
    Ok(round_to_integer(generalized_defining_sum(n, p, k, l)?, ROOT_TOLERANCE))
}

/// `E_b[f(b)]` against the uniform zero weights.
pub fn uniform_expectation(f: &[BigRational], p: usize) -> BigRational {
    let n = f.len() - 1;
    uniform_zero_weights(n, p).iter().zip(f).map(|(w, v)| w * v).sum()
}
