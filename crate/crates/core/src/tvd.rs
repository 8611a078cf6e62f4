//! Total variation distance between the walk's zero count and the uniform
//! zero count, its Krawtchouk-side companions, and parameter sweeps.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::E;
use std::io::Write;

use crate::chain::{ser_rational, zero_count_distribution, WalkParams, ZeroCountDistribution};
use crate::error::{Error, Result};
use crate::krawtchouk::{generalized_norm, KrawtchoukTable};
use crate::moments::moment_values;
use crate::numerics::{self, binomial, fraction_string, to_sci_string, uniform_zero_weights};

pub const MAX_RECONSTRUCTION_LENGTH: usize = 20;
pub const MAX_MOMENT_LENGTH: usize = 60;
/// Digits in the decimal half of exact CSV cells.
pub const CSV_DIGITS: usize = 30;

/// `q(l) = Pr[|s|_0 = l] p^n / (C(n,l) (p-1)^{n-l})`.
pub fn probability_ratio(params: &WalkParams) -> Result<Vec<BigRational>> {
    let dist = zero_count_distribution(params)?;
    Ok(ratio_from(&dist, params.p()))
}

fn ratio_from(dist: &ZeroCountDistribution, p: usize) -> Vec<BigRational> {
    let n = dist.n();
    let scale = num_traits::pow(BigInt::from(p), n);
    dist.probs()
        .iter()
        .enumerate()
        .map(|(l, prob)| {
            let den = binomial(n as u64, l as i64) * num_traits::pow(BigInt::from(p - 1), n - l);
            prob * BigRational::new(scale.clone(), den)
        })
        .collect()
}

fn half_l1(dist: &ZeroCountDistribution, p: usize) -> BigRational {
    let uniform = uniform_zero_weights(dist.n(), p);
    let sum: BigRational = dist.probs().iter().zip(&uniform).map(|(a, b)| (a - b).abs()).sum();
    sum / BigRational::from_integer(2.into())
}

fn half_expected_deviation(dist: &ZeroCountDistribution, p: usize) -> BigRational {
    let uniform = uniform_zero_weights(dist.n(), p);
    let sum: BigRational = ratio_from(dist, p)
        .iter()
        .zip(&uniform)
        .map(|(q, w)| w * (q - BigRational::from_integer(1.into())).abs())
        .sum();
    sum / BigRational::from_integer(2.into())
}

/// `1/2 sum_l |Pr_walk[l] - Pr_uniform[l]|`, checked against `1/2 E_b|q(b) - 1|`.
pub fn tvd_exact(params: &WalkParams) -> Result<BigRational> {
    let dist = zero_count_distribution(params)?;
    let direct = half_l1(&dist, params.p());
    let via_ratio = half_expected_deviation(&dist, params.p());
    if direct != via_ratio {
        return Err(Error::Invariant(format!(
            "half L1 distance {direct} differs from half expected ratio deviation {via_ratio}"
        )));
    }
    Ok(direct)
}

pub fn tvd_expectation_form(params: &WalkParams) -> Result<BigRational> {
    Ok(half_expected_deviation(&zero_count_distribution(params)?, params.p()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub p: usize,
    pub n: usize,
    /// `p^{-n} sum_k K_l(k) E[K_k(|s|_0)]`.
    pub reconstructed: Vec<String>,
    pub oracle: Vec<String>,
    /// `(l, reconstructed - oracle)` for every mismatching entry.
    pub deviations: Vec<(usize, String)>,
    pub matches: bool,
}

/// Rebuilds `Pr[|s|_0 = l]` from the moment vector and compares it with the DP.
pub fn reconstruct_via_krawtchouk(params: &WalkParams) -> Result<ReconstructionReport> {
    let (p, n) = (params.p(), params.n());
    if n > MAX_RECONSTRUCTION_LENGTH {
        return Err(Error::CapExceeded {
            what: "reconstruction length n",
            size: n as u128,
            cap: MAX_RECONSTRUCTION_LENGTH as u128,
        });
    }
    let oracle = zero_count_distribution(params)?;
    let moments = moment_values(params)?;
    let table = KrawtchoukTable::generalized(n, p)?;
    let scale = BigRational::from_integer(num_traits::pow(BigInt::from(p), n));
    let reconstructed: Vec<BigRational> = (0..=n)
        .map(|l| {
            let s: BigRational = (0..=n)
                .map(|k| BigRational::from_integer(table.get(l, k).clone()) * &moments[k])
                .sum();
            s / &scale
        })
        .collect();
    let deviations: Vec<(usize, String)> = reconstructed
        .iter()
        .zip(oracle.probs())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(l, (a, b))| (l, (a - b).to_string()))
        .collect();
    Ok(ReconstructionReport {
        p,
        n,
        reconstructed: reconstructed.iter().map(ToString::to_string).collect(),
        oracle: oracle.probs().iter().map(ToString::to_string).collect(),
        matches: deviations.is_empty(),
        deviations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondMomentReport {
    /// `E_b[(q(b) - 1)^2]` under the uniform zero weights.
    #[serde(serialize_with = "ser_rational")]
    pub lhs: BigRational,
    /// `sum_{k=1}^{n} E[K_k]^2 / (C(n,k)(p-1)^{n-k})`, as claimed.
    #[serde(serialize_with = "ser_opt_rational")]
    pub claimed_rhs: Option<BigRational>,
    /// The same sum over every non-constant row `k != n`.
    #[serde(serialize_with = "ser_opt_rational")]
    pub corrected_rhs: Option<BigRational>,
    pub claimed_matches: Option<bool>,
    pub corrected_matches: Option<bool>,
}

fn ser_opt_rational<S: serde::Serializer>(x: &Option<BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_none(),
    }
}

fn second_moment_lhs(dist: &ZeroCountDistribution, p: usize) -> BigRational {
    let one = BigRational::from_integer(1.into());
    ratio_from(dist, p)
        .iter()
        .zip(uniform_zero_weights(dist.n(), p))
        .map(|(q, w)| {
            let d = q - &one;
            w * &d * &d
        })
        .sum()
}

/// Direct second moment of `q - 1`, plus the moment-side sums when
/// `n <= 60`.
pub fn second_moment(params: &WalkParams) -> Result<SecondMomentReport> {
    let (p, n) = (params.p(), params.n());
    let dist = zero_count_distribution(params)?;
    let lhs = second_moment_lhs(&dist, p);
    if n > MAX_MOMENT_LENGTH {
        return Ok(SecondMomentReport {
            lhs,
            claimed_rhs: None,
            corrected_rhs: None,
            claimed_matches: None,
            corrected_matches: None,
        });
    }
    let moments = moment_values(params)?;
    let term = |k: usize| {
        let m = &moments[k];
        m * m / BigRational::from_integer(generalized_norm(n, p, k))
    };
    let claimed: BigRational = (1..=n).map(term).sum();
    let corrected: BigRational = (0..n).map(term).sum();
    Ok(SecondMomentReport {
        claimed_matches: Some(claimed == lhs),
        corrected_matches: Some(corrected == lhs),
        claimed_rhs: Some(claimed),
        corrected_rhs: Some(corrected),
        lhs,
    })
}

/// Radius of the geometric envelope: `lambda < 1/(1+e)`.
pub fn envelope_radius() -> f64 {
    1.0 / (1.0 + E)
}

/// `1/2 sqrt(rho^2 / (1 - rho^2))` with `rho = e lambda / (1 - lambda)`.
pub fn envelope_bound(lambda: f64) -> Result<f64> {
    if !(0.0..envelope_radius()).contains(&lambda) {
        return Err(Error::Divergent(lambda));
    }
    let rho = E * lambda / (1.0 - lambda);
    Ok(0.5 * (rho * rho / (1.0 - rho * rho)).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct TvdReport {
    pub params: WalkParams,
    #[serde(serialize_with = "ser_rational")]
    pub tvd_exact: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub expectation_form: BigRational,
    pub cs_bound: f64,
    #[serde(serialize_with = "ser_rational")]
    pub second_moment: BigRational,
    pub envelope_bound: Option<f64>,
    /// `tvd / lambda`; absent at zero bias.
    pub ratio_to_lambda: Option<f64>,
    /// `tvd / delta`; absent at zero bias.
    pub ratio_to_delta: Option<f64>,
}

pub fn tvd_report(params: &WalkParams) -> Result<TvdReport> {
    let p = params.p();
    let dist = zero_count_distribution(params)?;
    let tvd_exact = half_l1(&dist, p);
    let expectation_form = half_expected_deviation(&dist, p);
    if tvd_exact != expectation_form {
        return Err(Error::Invariant(format!(
            "half L1 distance {tvd_exact} differs from half expected ratio deviation {expectation_form}"
        )));
    }
    let second_moment = second_moment_lhs(&dist, p);
    let cs_bound = 0.5 * numerics::to_f64(&second_moment).sqrt();
    let lambda = numerics::to_f64(params.lambda());
    let ratio = |x: &BigRational| (!x.is_zero()).then(|| numerics::to_f64(&(&tvd_exact / x)));
    Ok(TvdReport {
        envelope_bound: envelope_bound(lambda).ok(),
        ratio_to_lambda: ratio(params.lambda()),
        ratio_to_delta: ratio(params.delta()),
        params: params.clone(),
        tvd_exact,
        expectation_form,
        cs_bound,
        second_moment,
    })
}

/// One requested sweep cell: `(p, n, delta)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepCell {
    pub p: usize,
    pub n: usize,
    pub delta: BigRational,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SweepRow {
    Computed(Box<TvdReport>),
    Skipped {
        p: usize,
        n: usize,
        #[serde(serialize_with = "ser_rational")]
        delta: BigRational,
        reason: String,
    },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub max_ratio_to_lambda: Option<f64>,
    pub max_ratio_to_delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Supremum ratios per alphabet size.
    pub per_p: BTreeMap<usize, SweepSummary>,
}

fn run_cell(cell: &SweepCell) -> SweepRow {
    let skipped = |reason: String| SweepRow::Skipped {
        p: cell.p,
        n: cell.n,
        delta: cell.delta.clone(),
        reason,
    };
    match WalkParams::from_mixture(cell.p, cell.n, cell.delta.clone()).and_then(|w| tvd_report(&w)) {
        Ok(report) => SweepRow::Computed(Box::new(report)),
        Err(e) => skipped(e.to_string()),
    }
}

/// Evaluates every cell independently; rows follow grid order.
pub fn sweep(grid: &[SweepCell]) -> SweepResult {
    #[cfg(feature = "parallel")]
    let rows: Vec<SweepRow> = {
        use rayon::prelude::*;
        grid.par_iter().map(run_cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<SweepRow> = grid.iter().map(run_cell).collect();

    let mut per_p: BTreeMap<usize, SweepSummary> = BTreeMap::new();
    for row in &rows {
        if let SweepRow::Computed(r) = row {
            let entry = per_p.entry(r.params.p()).or_default();
            entry.cells += 1;
            let fold = |acc: Option<f64>, x: Option<f64>| match (acc, x) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
            entry.max_ratio_to_lambda = fold(entry.max_ratio_to_lambda, r.ratio_to_lambda);
            entry.max_ratio_to_delta = fold(entry.max_ratio_to_delta, r.ratio_to_delta);
        }
    }
    SweepResult { rows, per_p }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "p",
    "n",
    "delta",
    "lambda",
    "tvd_exact",
    "cs_bound",
    "second_moment",
    "envelope_bound",
    "ratio_tvd_over_lambda",
    "ratio_tvd_over_delta",
];

/// Exact cells are `<30-digit scientific>;<num>/<den>`.
pub fn exact_cell(x: &BigRational) -> String {
    format!("{};{}", to_sci_string(x, CSV_DIGITS), fraction_string(x))
}

fn float_cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

pub fn csv_record(report: &TvdReport) -> Vec<String> {
    let w = &report.params;
    vec![
        w.p().to_string(),
        w.n().to_string(),
        exact_cell(w.delta()),
        exact_cell(w.lambda()),
        exact_cell(&report.tvd_exact),
        float_cell(Some(report.cs_bound)),
        exact_cell(&report.second_moment),
        float_cell(report.envelope_bound),
        float_cell(report.ratio_to_lambda),
        float_cell(report.ratio_to_delta),
    ]
}

/// Writes computed rows as CSV. Skipped cells are omitted; they appear in the
/// JSON form of the sweep.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidParameter(format!("csv output failed: {e}"));
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_COLUMNS).map_err(io)?;
    for row in rows {
        if let SweepRow::Computed(r) = row {
            writer.write_record(csv_record(r)).map_err(io)?;
        }
    }
    writer
        .flush()
        .map_err(|e| Error::InvalidParameter(format!("csv output failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{for_each_string, transition_matrix, visit_count_distribution};
    use crate::numerics::{int, rat};
    use num_traits::One;

    fn params(p: usize, n: usize, delta: BigRational) -> WalkParams {
        WalkParams::from_mixture(p, n, delta).unwrap()
    }

    #[test]
    fn ratio_examples() {
        let q = probability_ratio(&params(4, 6, BigRational::zero())).unwrap();
        assert!(q.iter().all(One::is_one));
        let d = rat(2, 9);
        let q = probability_ratio(&params(2, 2, d.clone())).unwrap();
        let one = BigRational::one();
        assert_eq!(q, vec![&one + &d, &one - &d, &one + &d]);
        for (p, n) in [(3, 7), (5, 4)] {
            let q = probability_ratio(&params(p, n, rat(3, 7))).unwrap();
            let total: BigRational = q.iter().zip(uniform_zero_weights(n, p)).map(|(a, w)| a * w).sum();
            assert!(total.is_one());
        }
    }

    #[test]
    fn tvd_examples() {
        assert!(tvd_exact(&params(3, 5, BigRational::zero())).unwrap().is_zero());
        for d in [rat(1, 2), rat(1, 7), rat(9, 10)] {
            assert_eq!(tvd_exact(&params(2, 2, d.clone())).unwrap(), &d / int(2));
            assert!(tvd_exact(&params(2, 1, d.clone())).unwrap().is_zero());
        }
    }

    #[test]
    fn tvd_for_other_symbols_matches_zero() {
        // Relabeling symmetry: counting visits to symbol 2 gives the same law.
        let w = params(4, 6, rat(1, 3));
        let mut marked = vec![false; 4];
        marked[2] = true;
        let other = visit_count_distribution(&transition_matrix(&w), &marked, 6).unwrap();
        assert_eq!(other.as_slice(), zero_count_distribution(&w).unwrap().probs());
    }

    #[test]
    fn reconstruction_is_exact() {
        for p in [2, 3, 5] {
            for n in 1..=8 {
                for d in [rat(0, 1), rat(1, 4), rat(9, 10)] {
                    let r = reconstruct_via_krawtchouk(&params(p, n, d)).unwrap();
                    assert!(r.matches, "p={p} n={n}: {:?}", r.deviations);
                }
            }
        }
        let r = reconstruct_via_krawtchouk(&params(3, 1, rat(1, 2))).unwrap();
        assert_eq!(r.reconstructed[1], "1/3");
        assert!(reconstruct_via_krawtchouk(&params(2, 21, rat(1, 2))).is_err());
    }

    #[test]
    fn second_moment_routes() {
        let r = second_moment(&params(3, 5, BigRational::zero())).unwrap();
        assert!(r.lhs.is_zero());
        assert_eq!(r.corrected_rhs, Some(BigRational::zero()));
        // The claimed sum keeps the constant row, contributing exactly 1.
        assert_eq!(r.claimed_rhs, Some(BigRational::one()));

        for (p, n) in [(2, 4), (3, 6), (5, 5)] {
            let r = second_moment(&params(p, n, rat(1, 2))).unwrap();
            assert_eq!(r.corrected_matches, Some(true));
            assert_eq!(r.claimed_matches, Some(false));
            assert_eq!(r.claimed_rhs.unwrap() - r.corrected_rhs.as_ref().unwrap(), {
                let moments = moment_values(&params(p, n, rat(1, 2))).unwrap();
                BigRational::one() - &moments[0] * &moments[0] / int(generalized_norm(n, p, 0))
            });
        }
        let r = second_moment(&params(2, 61, rat(1, 2))).unwrap();
        assert!(r.claimed_rhs.is_none());
    }

    #[test]
    fn measure_level_cauchy_schwarz() {
        for p in 2..=5 {
            for n in [1, 3, 8, 15] {
                for d in [rat(1, 10), rat(1, 2), rat(19, 20)] {
                    let w = params(p, n, d);
                    let report = tvd_report(&w).unwrap();
                    let two_tvd = &report.tvd_exact * int(2);
                    assert!(&two_tvd * &two_tvd <= report.second_moment);
                    assert!(numerics::to_f64(&report.tvd_exact) <= report.cs_bound + 1e-12);
                    assert!(report.tvd_exact <= BigRational::one());
                }
            }
        }
    }

    #[test]
    fn envelope_bound_examples() {
        assert_eq!(envelope_bound(0.0).unwrap(), 0.0);
        assert!(matches!(envelope_bound(envelope_radius()), Err(Error::Divergent(_))));
        assert!(envelope_bound(0.5).is_err());
        assert!(envelope_bound(-0.1).is_err());
        let rho: f64 = 0.1 * E / 0.9;
        let want = 0.5 * (rho * rho / (1.0 - rho * rho)).sqrt();
        assert!((envelope_bound(0.1).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn sweep_orders_rows_and_summarizes() {
        let grid: Vec<SweepCell> = (1..=20)
            .map(|i| SweepCell {
                p: 2,
                n: 16,
                delta: rat(i, 50),
            })
            .chain([SweepCell {
                p: 2,
                n: 16,
                delta: BigRational::zero(),
            }])
            .chain([SweepCell {
                p: 2,
                n: 16,
                delta: int(2),
            }])
            .collect();
        let result = sweep(&grid);
        assert_eq!(result.rows.len(), grid.len());
        let mut prev = BigRational::zero();
        for (row, cell) in result.rows.iter().zip(&grid) {
            match row {
                SweepRow::Computed(r) => {
                    assert_eq!(r.params.delta(), &cell.delta);
                    if cell.delta.is_zero() {
                        assert!(r.tvd_exact.is_zero());
                        assert!(r.ratio_to_lambda.is_none());
                    } else {
                        assert!(r.tvd_exact > prev);
                        prev = r.tvd_exact.clone();
                        assert!(r.ratio_to_lambda.unwrap().is_finite());
                    }
                }
                SweepRow::Skipped { delta, .. } => assert_eq!(delta, &int(2)),
            }
        }
        assert_eq!(result.per_p[&2].cells, 21);
    }

    #[test]
    fn csv_layout() {
        let grid = [SweepCell {
            p: 3,
            n: 4,
            delta: rat(1, 4),
        }];
        let mut buf = Vec::new();
        write_csv(&sweep(&grid).rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 10);
        assert_eq!(row[2], format!("2.{}e-1;1/4", "5".to_string() + &"0".repeat(28)));
        assert_eq!(row[3], "8.33333333333333333333333333333e-2;1/12");
    }

    #[test]
    fn exhaustive_tvd_matches_enumeration() {
        let w = params(3, 5, rat(1, 3));
        let mut by_zeros = vec![BigRational::zero(); 6];
        for_each_string(&w, u128::MAX, |s, prob| by_zeros[s.zero_count()] += prob).unwrap();
        let uniform = uniform_zero_weights(5, 3);
        let direct: BigRational = by_zeros
            .iter()
            .zip(&uniform)
            .map(|(a, b)| (a - b).abs())
            .sum::<BigRational>()
            / int(2);
        assert_eq!(direct, tvd_exact(&w).unwrap());
    }
}
