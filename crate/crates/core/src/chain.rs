//! The generalized sticky chain on `Z_p`: parameters, transition matrix,
//! samplers, exact string and zero-count laws, and the state-grouping
//! reduction.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::numerics::{self, int, lcm, pow, rat};
use crate::poly::{add_into, mul_linear, RationalPoly};

/// Default cap on `p^n` for full enumeration.
pub const DEFAULT_MAX_ENUM: u128 = 2_000_000;
/// Environment variable overriding [`DEFAULT_MAX_ENUM`].
pub const MAX_ENUM_ENV: &str = "STICKY_LAB_MAX_ENUM";
pub const MAX_DP_LENGTH: usize = 10_000;
pub const MAX_POLY_LENGTH: usize = 60;

/// Enumeration cap, honoring `STICKY_LAB_MAX_ENUM` when it parses.
pub fn enumeration_cap() -> u128 {
    std::env::var(MAX_ENUM_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_ENUM)
}

/// Walk parameters. The mixing bias `delta` is canonical: every step draws
/// from `(1 - delta) * Uniform(Z_p) + delta * Stay`, so
/// `stay = 1/p + delta (p-1)/p` and `switch = (1 - delta)/p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WalkParams {
    p: usize,
    n: usize,
    #[serde(serialize_with = "ser_rational")]
    delta: BigRational,
    #[serde(serialize_with = "ser_rational")]
    stay_prob: BigRational,
    #[serde(serialize_with = "ser_rational")]
    switch_prob: BigRational,
    #[serde(serialize_with = "ser_rational")]
    lambda: BigRational,
}

pub(crate) fn ser_rational<S: serde::Serializer>(x: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

impl WalkParams {
    pub fn from_mixture(p: usize, n: usize, delta: BigRational) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("alphabet size p must be >= 2, got {p}")));
        }
        if n < 1 {
            return Err(invalid("walk length n must be >= 1"));
        }
        if delta.is_negative() || delta >= BigRational::one() {
            return Err(invalid(format!("mixing bias delta = {delta} outside [0, 1)")));
        }
        let pr = int(p as i64);
        let stay_prob = pr.recip() + &delta * int(p as i64 - 1) / &pr;
        let switch_prob = (BigRational::one() - &delta) / &pr;
        let lambda = &delta / &pr;
        let params = Self {
            p,
            n,
            delta,
            stay_prob,
            switch_prob,
            lambda,
        };
        debug_assert!(&params.stay_prob + &params.switch_prob * int(p as i64 - 1) == BigRational::one());
        Ok(params)
    }

    /// Builds the walk that stays with probability `1/p + (p-1) lambda` and
    /// moves to each other state with probability `1/p - lambda`.
    pub fn from_lambda(p: usize, n: usize, lambda: BigRational) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("alphabet size p must be >= 2, got {p}")));
        }
        if lambda.is_negative() || lambda >= rat(1, p as i64) {
            return Err(invalid(format!(
                "lambda = {lambda} outside [0, 1/{p}); the switch probability would be negative"
            )));
        }
        Self::from_mixture(p, n, lambda * int(p as i64))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> &BigRational {
        &self.delta
    }

    pub fn stay_prob(&self) -> &BigRational {
        &self.stay_prob
    }

    pub fn switch_prob(&self) -> &BigRational {
        &self.switch_prob
    }

    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }

    pub fn with_length(&self, n: usize) -> Result<Self> {
        Self::from_mixture(self.p, n, self.delta.clone())
    }
}

pub fn params_from_mixture(p: usize, n: usize, delta: BigRational) -> Result<WalkParams> {
    WalkParams::from_mixture(p, n, delta)
}

pub fn params_from_lambda(p: usize, n: usize, lambda: BigRational) -> Result<WalkParams> {
    WalkParams::from_lambda(p, n, lambda)
}

/// Row-stochastic matrix with exact entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticMatrix {
    rows: Vec<Vec<BigRational>>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(invalid("empty matrix"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(invalid(format!("row {i} has {} entries, expected {size}", row.len())));
            }
            if row.iter().any(Signed::is_negative) {
                return Err(invalid(format!("row {i} has a negative entry")));
            }
            let sum: BigRational = row.iter().sum();
            if !sum.is_one() {
                return Err(invalid(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(Self { rows })
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &BigRational {
        &self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.rows
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.size();
        (0..m).all(|i| (0..i).all(|j| self.rows[i][j] == self.rows[j][i]))
    }

    /// `(diagonal, off_diagonal)` when every diagonal entry agrees and every
    /// off-diagonal entry agrees.
    pub fn sticky_form(&self) -> Option<(BigRational, BigRational)> {
        let m = self.size();
        let diag = self.rows[0][0].clone();
        if m == 1 {
            return Some((diag, BigRational::zero()));
        }
        let off = self.rows[0][1].clone();
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { &diag } else { &off };
                if &self.rows[i][j] != want {
                    return None;
                }
            }
        }
        Some((diag, off))
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| row.iter().map(numerics::to_f64).collect())
            .collect()
    }

    /// Relabels states: entry `(i, j)` of the result is entry
    /// `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let m = self.size();
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&x| x >= m || std::mem::replace(&mut seen[x], true)) {
            return Err(invalid("not a permutation of the state set"));
        }
        let rows = (0..m)
            .map(|i| (0..m).map(|j| self.rows[perm[i]][perm[j]].clone()).collect())
            .collect();
        Ok(Self { rows })
    }
}

pub fn transition_matrix(params: &WalkParams) -> StochasticMatrix {
    let p = params.p;
    let rows = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    if i == j {
                        params.stay_prob.clone()
                    } else {
                        params.switch_prob.clone()
                    }
                })
                .collect()
        })
        .collect();
    StochasticMatrix::new(rows).expect("sticky rows sum to one")
}

/// A walk over `Z_p`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct WalkString {
    symbols: Vec<u32>,
}

impl WalkString {
    pub fn new(symbols: Vec<u32>, p: usize) -> Result<Self> {
        if let Some(bad) = symbols.iter().find(|&&s| s as usize >= p) {
            return Err(invalid(format!("symbol {bad} outside Z_{p}")));
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn zero_count(&self) -> usize {
        self.symbols.iter().filter(|&&s| s == 0).count()
    }

    /// Number of adjacent positions holding equal symbols.
    pub fn stay_count(&self) -> usize {
        self.symbols.windows(2).filter(|w| w[0] == w[1]).count()
    }

    pub fn map_symbols(&self, perm: &[u32]) -> Self {
        Self {
            symbols: self.symbols.iter().map(|&s| perm[s as usize]).collect(),
        }
    }
}

impl std::fmt::Display for WalkString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sep = if self.symbols.iter().any(|&s| s > 9) { "," } else { "" };
        let text: Vec<String> = self.symbols.iter().map(u32::to_string).collect();
        write!(f, "{}", text.join(sep))
    }
}

/// Exact law of `|s|_0`, indexed by the number of zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroCountDistribution {
    probs: Vec<BigRational>,
}

impl ZeroCountDistribution {
    pub fn new(probs: Vec<BigRational>) -> Result<Self> {
        if probs.iter().any(Signed::is_negative) {
            return Err(Error::Invariant("negative probability".into()));
        }
        let total: BigRational = probs.iter().sum();
        if !total.is_one() {
            return Err(Error::Invariant(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// The zero count of `n` i.i.d. uniform symbols.
    pub fn uniform(n: usize, p: usize) -> Self {
        Self {
            probs: numerics::uniform_zero_weights(n, p),
        }
    }

    pub fn n(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.probs
    }

    pub fn prob(&self, zeros: usize) -> &BigRational {
        &self.probs[zeros]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    /// Stay/switch transitions drawn directly.
    Direct,
    /// Partial sums of increments `u_j ~ (1 - delta) Uniform + delta * 1_0`.
    Increments,
}

/// Seeded walk generator; the same seed always yields the same walks.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    p: usize,
    n: usize,
    stay: f64,
    delta: f64,
    method: SamplingMethod,
    rng: ChaCha8Rng,
}

impl WalkSampler {
    pub fn new(params: &WalkParams, seed: u64, method: SamplingMethod) -> Self {
        Self {
            p: params.p,
            n: params.n,
            stay: numerics::to_f64(&params.stay_prob),
            delta: numerics::to_f64(&params.delta),
            method,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn fill(&mut self, out: &mut Vec<u32>) {
        out.clear();
        let p = self.p as u32;
        let mut cur = self.rng.random_range(0..p);
        out.push(cur);
        for _ in 1..self.n {
            cur = match self.method {
                SamplingMethod::Direct => {
                    if self.rng.random::<f64>() < self.stay {
                        cur
                    } else {
                        let other = self.rng.random_range(0..p - 1);
                        if other >= cur {
                            other + 1
                        } else {
                            other
                        }
                    }
                }
                SamplingMethod::Increments => {
                    let step = if self.rng.random::<f64>() < self.delta {
                        0
                    } else {
                        self.rng.random_range(0..p)
                    };
                    (cur + step) % p
                }
            };
            out.push(cur);
        }
    }

    pub fn next_walk(&mut self) -> WalkString {
        let mut symbols = Vec::with_capacity(self.n);
        self.fill(&mut symbols);
        WalkString { symbols }
    }

    /// Histogram of `|s|_0` over `samples` fresh walks.
    pub fn zero_count_histogram(&mut self, samples: u64) -> Vec<u64> {
        let mut hist = vec![0u64; self.n + 1];
        let mut buf = Vec::with_capacity(self.n);
        for _ in 0..samples {
            self.fill(&mut buf);
            hist[buf.iter().filter(|&&s| s == 0).count()] += 1;
        }
        hist
    }
}

pub fn sample_walk(params: &WalkParams, seed: u64) -> WalkString {
    WalkSampler::new(params, seed, SamplingMethod::Direct).next_walk()
}

pub fn sample_walk_increments(params: &WalkParams, seed: u64) -> WalkString {
    WalkSampler::new(params, seed, SamplingMethod::Increments).next_walk()
}

/// `(1/p) stay^{#stays} switch^{#switches}`.
pub fn string_probability(params: &WalkParams, s: &WalkString) -> Result<BigRational> {
    if s.len() != params.n {
        return Err(invalid(format!("walk has length {}, expected {}", s.len(), params.n)));
    }
    if let Some(bad) = s.symbols.iter().find(|&&x| x as usize >= params.p) {
        return Err(invalid(format!("symbol {bad} outside Z_{}", params.p)));
    }
    let stays = s.stay_count();
    let switches = params.n - 1 - stays;
    Ok(pow(&params.stay_prob, stays) * pow(&params.switch_prob, switches) / int(params.p as i64))
}

fn check_enumeration_size(p: usize, n: usize, cap: u128) -> Result<()> {
    let size = (p as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::CapExceeded {
            what: "enumeration size p^n",
            size,
            cap,
        });
    }
    Ok(())
}

/// Exact probability of every string in `Z_p^n`, capped by
/// [`enumeration_cap`].
pub fn enumerate_distribution(params: &WalkParams) -> Result<BTreeMap<WalkString, BigRational>> {
    enumerate_distribution_with_cap(params, enumeration_cap())
}

pub fn enumerate_distribution_with_cap(params: &WalkParams, cap: u128) -> Result<BTreeMap<WalkString, BigRational>> {
    let mut out = BTreeMap::new();
    for_each_string(params, cap, |s, prob| {
        out.insert(s.clone(), prob.clone());
    })?;
    Ok(out)
}

/// Visits every string with its exact probability in lexicographic order.
pub fn for_each_string(params: &WalkParams, cap: u128, mut visit: impl FnMut(&WalkString, &BigRational)) -> Result<()> {
    let (p, n) = (params.p, params.n);
    check_enumeration_size(p, n, cap)?;
    let by_stays: Vec<BigRational> = (0..n)
        .map(|stays| pow(&params.stay_prob, stays) * pow(&params.switch_prob, n - 1 - stays) / int(p as i64))
        .collect();
    let mut s = WalkString { symbols: vec![0; n] };
    loop {
        visit(&s, &by_stays[s.stay_count()]);
        // Odometer increment, last position fastest.
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            s.symbols[i] += 1;
            if (s.symbols[i] as usize) < p {
                break;
            }
            s.symbols[i] = 0;
        }
    }
}

/// The `|s|_0` marginal of an enumerated string law.
pub fn zero_count_marginal(n: usize, law: &BTreeMap<WalkString, BigRational>) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); n + 1];
    for (s, prob) in law {
        out[s.zero_count()] += prob;
    }
    out
}

/// Exact law of `|s|_0` by dynamic programming over
/// (step, zeros so far, current symbol is zero). The `p - 1` nonzero symbols
/// are interchangeable, so they share one aggregate state.
pub fn zero_count_distribution(params: &WalkParams) -> Result<ZeroCountDistribution> {
    let (p, n) = (params.p, params.n);
    if n > MAX_DP_LENGTH {
        return Err(Error::CapExceeded {
            what: "zero-count DP length n",
            size: n as u128,
            cap: MAX_DP_LENGTH as u128,
        });
    }
    // Work over the common denominator D of stay and switch.
    let den = lcm(params.stay_prob.denom(), params.switch_prob.denom());
    let stay = (&params.stay_prob * BigRational::from_integer(den.clone())).to_integer();
    let switch = (&params.switch_prob * BigRational::from_integer(den.clone())).to_integer();
    let pm1 = BigInt::from(p - 1);
    let zero_to_other = &pm1 * &switch;
    let other_to_other = &stay + BigInt::from(p as i64 - 2) * &switch;

    let mut at_zero = vec![BigInt::zero(); n + 1];
    let mut at_other = vec![BigInt::zero(); n + 1];
    at_zero[1] = BigInt::one();
    at_other[0] = pm1.clone();
    for step in 1..n {
        let mut next_zero = vec![BigInt::zero(); n + 1];
        let mut next_other = vec![BigInt::zero(); n + 1];
        for c in 0..=step {
            let (z, o) = (&at_zero[c], &at_other[c]);
            if z.is_zero() && o.is_zero() {
                continue;
            }
            next_zero[c + 1] += z * &stay + o * &switch;
            next_other[c] += z * &zero_to_other + o * &other_to_other;
        }
        at_zero = next_zero;
        at_other = next_other;
    }
    let total_den = BigInt::from(p) * num_traits::pow(den, n - 1);
    let probs = at_zero
        .into_iter()
        .zip(at_other)
        .map(|(z, o)| BigRational::new(z + o, total_den.clone()))
        .collect();
    ZeroCountDistribution::new(probs)
}

/// `Pr[|s|_0 = l]` as exact polynomials in the mixing bias, for every `l`.
pub fn zero_count_polynomial(p: usize, n: usize) -> Result<Vec<RationalPoly>> {
    if p < 2 || n < 1 {
        return Err(invalid(format!("need p >= 2 and n >= 1, got p={p}, n={n}")));
    }
    if n > MAX_POLY_LENGTH {
        return Err(Error::CapExceeded {
            what: "polynomial DP length n",
            size: n as u128,
            cap: MAX_POLY_LENGTH as u128,
        });
    }
    // Scaled by p: p*stay = 1 + (p-1)x, p*switch = 1 - x.
    let pi = p as i64;
    let lin = |a: i64, b: i64| (BigInt::from(a), BigInt::from(b));
    let zero_to_zero = lin(1, pi - 1);
    let other_to_zero = lin(1, -1);
    let zero_to_other = lin(pi - 1, -(pi - 1));
    let other_to_other = lin(pi - 1, 1);

    let mut at_zero: Vec<Vec<BigInt>> = vec![Vec::new(); n + 1];
    let mut at_other: Vec<Vec<BigInt>> = vec![Vec::new(); n + 1];
    at_zero[1] = vec![BigInt::one()];
    at_other[0] = vec![BigInt::from(pi - 1)];
    for step in 1..n {
        let mut next_zero: Vec<Vec<BigInt>> = vec![Vec::new(); n + 1];
        let mut next_other: Vec<Vec<BigInt>> = vec![Vec::new(); n + 1];
        for c in 0..=step {
            let (z, o) = (&at_zero[c], &at_other[c]);
            if !z.is_empty() {
                add_into(&mut next_zero[c + 1], &mul_linear(z, &zero_to_zero.0, &zero_to_zero.1));
                add_into(&mut next_other[c], &mul_linear(z, &zero_to_other.0, &zero_to_other.1));
            }
            if !o.is_empty() {
                add_into(
                    &mut next_zero[c + 1],
                    &mul_linear(o, &other_to_zero.0, &other_to_zero.1),
                );
                add_into(&mut next_other[c], &mul_linear(o, &other_to_other.0, &other_to_other.1));
            }
        }
        at_zero = next_zero;
        at_other = next_other;
    }
    let den = num_traits::pow(BigInt::from(p), n);
    Ok(at_zero
        .into_iter()
        .zip(at_other)
        .map(|(mut z, o)| {
            add_into(&mut z, &o);
            RationalPoly::from_integer_coeffs(&z, &den)
        })
        .collect())
}

/// Law of the number of visits to `marked` states over `n` steps of an
/// arbitrary chain started uniformly. Tracks every state individually.
pub fn visit_count_distribution(matrix: &StochasticMatrix, marked: &[bool], n: usize) -> Result<Vec<BigRational>> {
    let m = matrix.size();
    if marked.len() != m {
        return Err(invalid("marked set must cover every state"));
    }
    if n < 1 {
        return Err(invalid("walk length n must be >= 1"));
    }
    // weights[state][count]
    let start = rat(1, m as i64);
    let mut weights = vec![vec![BigRational::zero(); n + 1]; m];
    for (state, row) in weights.iter_mut().enumerate() {
        row[usize::from(marked[state])] = start.clone();
    }
    for _ in 1..n {
        let mut next = vec![vec![BigRational::zero(); n + 1]; m];
        for (from, row) in weights.iter().enumerate() {
            for (count, w) in row.iter().enumerate() {
                if w.is_zero() {
                    continue;
                }
                for (to, slot) in next.iter_mut().enumerate() {
                    let prob = matrix.entry(from, to);
                    if prob.is_zero() {
                        continue;
                    }
                    slot[count + usize::from(marked[to])] += w * prob;
                }
            }
        }
        weights = next;
    }
    let mut out = vec![BigRational::zero(); n + 1];
    for row in weights {
        for (count, w) in row.into_iter().enumerate() {
            out[count] += w;
        }
    }
    Ok(out)
}

/// The chain induced by merging `Z_p` into `k` consecutive blocks of size
/// `p/k`, together with the sticky parameters it realizes.
#[derive(Debug, Clone)]
pub struct GroupedChain {
    pub grouped: StochasticMatrix,
    pub effective: WalkParams,
}

pub fn group_states(params: &WalkParams, k: usize) -> Result<GroupedChain> {
    let p = params.p;
    if k < 2 || !p.is_multiple_of(k) {
        return Err(invalid(format!("k = {k} must be >= 2 and divide p = {p}")));
    }
    let size = p / k;
    let full = transition_matrix(params);
    let mut rows = vec![vec![BigRational::zero(); k]; k];
    for (a, row) in rows.iter_mut().enumerate() {
        for (b, slot) in row.iter_mut().enumerate() {
            let mass = |i: usize| -> BigRational { (b * size..(b + 1) * size).map(|j| full.entry(i, j)).sum() };
            let first = mass(a * size);
            // Lumpability: every member of block a must agree.
            if (a * size + 1..(a + 1) * size).any(|i| mass(i) != first) {
                return Err(Error::Invariant(format!("block {a} is not lumpable into block {b}")));
            }
            *slot = first;
        }
    }
    let grouped = StochasticMatrix::new(rows)?;
    let (stay, switch) = grouped
        .sticky_form()
        .ok_or_else(|| Error::Invariant("grouped matrix is not sticky".into()))?;
    let kr = int(k as i64);
    let predicted = kr.recip() + int(p as i64) * &params.lambda * (BigRational::one() - kr.recip());
    if stay != predicted {
        return Err(Error::Invariant(format!(
            "grouped stay probability {stay} differs from 1/k + p*lambda*(1 - 1/k) = {predicted}"
        )));
    }
    let effective = WalkParams::from_mixture(k, params.n, &stay - &switch)?;
    if transition_matrix(&effective) != grouped {
        return Err(Error::Invariant(
            "grouped matrix is not the effective sticky chain".into(),
        ));
    }
    Ok(GroupedChain { grouped, effective })
}

/// Floating view of a rational, for sampling statistics and reports.
pub fn approx(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| numerics::to_f64(x))
}
