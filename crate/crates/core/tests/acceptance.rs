//! Acceptance suite: one line per criterion, `[PASS]` or `[FAIL]`, then a
//! nonzero exit if any criterion failed. Runs every criterion even after a
//! failure so the full picture is always printed.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use sticky_lab::chain::{
    enumerate_distribution, group_states, zero_count_distribution, zero_count_marginal, SamplingMethod, WalkParams,
    WalkSampler,
};
use sticky_lab::krawtchouk::{binary_inner_product, generalized_inner_product, generalized_norm};
use sticky_lab::moments::{closed_form_report, increment_expectation, moment_values, ClosedFormStatus, MomentVector};
use sticky_lab::numerics::{binomial, rat, root_power_sum, to_f64};
use sticky_lab::spectral::verify_expander;
use sticky_lab::tvd::{sweep, tvd_report, SweepCell, SweepRow};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn params(p: usize, n: usize, delta: BigRational) -> WalkParams {
    WalkParams::from_mixture(p, n, delta).expect("valid grid parameters")
}

fn delta_grid() -> [BigRational; 4] {
    [BigRational::zero(), rat(1, 4), rat(1, 2), rat(9, 10)]
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let elapsed = start.elapsed();
    (
        elapsed <= limit,
        format!("{:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn c1_dp_equals_enumeration() -> Outcome {
    let start = Instant::now();
    let mut cells = 0;
    let mut bad = Vec::new();
    for p in 2..=4 {
        for n in 1..=8 {
            for d in delta_grid() {
                let w = params(p, n, d.clone());
                let marginal = zero_count_marginal(n, &enumerate_distribution(&w).unwrap());
                if marginal.as_slice() != zero_count_distribution(&w).unwrap().probs() {
                    bad.push(format!("p={p} n={n} delta={d}"));
                }
                cells += 1;
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(60), start);
    outcome(
        bad.is_empty() && fast,
        format!("{cells} cells exact, mismatches {bad:?}, {time}"),
    )
}

fn c2_binary_orthogonality() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0;
    let mut bad = 0;
    for n in 0..=12 {
        for r in 0..=n {
            for s in 0..=n {
                let want = if r == s {
                    BigRational::from_integer(binomial(n as u64, s as i64))
                } else {
                    BigRational::zero()
                };
                bad += usize::from(binary_inner_product(n, r, s).unwrap() != want);
                pairs += 1;
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(5), start);
    outcome(
        bad == 0 && fast,
        format!("{pairs} (n,r,s) triples, {bad} wrong, {time}"),
    )
}

fn c3_generalized_orthogonality() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0;
    let mut bad = 0;
    for p in [2, 3, 5] {
        for n in 0..=8 {
            for r in 0..=n {
                for s in 0..=n {
                    let want = if r == s {
                        BigRational::from_integer(generalized_norm(n, p, r))
                    } else {
                        BigRational::zero()
                    };
                    bad += usize::from(generalized_inner_product(n, p, r, s).unwrap() != want);
                    pairs += 1;
                }
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(30), start);
    outcome(
        bad == 0 && fast,
        format!("{pairs} (p,n,r,s) tuples, {bad} wrong, {time}"),
    )
}

fn c4_vanishing_off_multiples() -> Outcome {
    let mut checked = 0;
    let mut nonzero = Vec::new();
    for p in [2, 3, 5] {
        for n in 1..=10 {
            for d in delta_grid() {
                let moments = moment_values(&params(p, n, d.clone())).unwrap();
                for (k, m) in moments.iter().enumerate().filter(|(k, _)| k % p != 0) {
                    checked += 1;
                    if !m.is_zero() {
                        nonzero.push((p, n, k, d.clone(), m.clone()));
                    }
                }
            }
        }
    }
    let examples: Vec<String> = nonzero
        .iter()
        .filter(|(p, n, k, d, _)| {
            (*p == 3 && *n == 4 && *d == rat(1, 4)) || (*p == 2 && *n == 3 && *k == 3 && d.is_zero())
        })
        .map(|(p, n, k, d, m)| format!("p={p} n={n} k={k} delta={d}: {m}"))
        .collect();
    outcome(
        nonzero.is_empty(),
        format!(
            "{} of {checked} moments with k mod p != 0 are nonzero; examples [{}]",
            nonzero.len(),
            examples.join("; ")
        ),
    )
}

fn c5_moment_routes_and_closed_forms() -> Outcome {
    let mut bad = Vec::new();
    let mut cells = 0;
    for p in [2, 3, 5] {
        for n in 1..=10 {
            let polys = MomentVector::new(p, n).unwrap();
            for d in delta_grid() {
                if polys.eval(&d) != moment_values(&params(p, n, d.clone())).unwrap() {
                    bad.push(format!("p={p} n={n} delta={d}"));
                }
                cells += 1;
            }
        }
    }
    let ns: Vec<usize> = (1..=10).collect();
    let report = closed_form_report(&[2, 3, 5], &ns, &delta_grid()).unwrap();
    let well_formed = report.comparisons.iter().all(|c| {
        let matching = c.variants.iter().filter(|e| e.matches_oracle).count();
        match c.status {
            ClosedFormStatus::Matched => matching == 1 && c.matched.is_some(),
            ClosedFormStatus::NoVariantMatches => matching == 0,
            ClosedFormStatus::Degenerate => matching > 1 && c.delta.is_zero(),
        }
    });
    outcome(
        bad.is_empty() && well_formed,
        format!(
            "{cells} cells agree exactly (mismatches {bad:?}); closed forms over {} instances: \
             matched {} {:?}, no variant {}, degenerate at delta=0 {}",
            report.comparisons.len(),
            report.matched,
            report.pinned,
            report.no_variant_matches,
            report.degenerate
        ),
    )
}

fn c6_tvd_identities() -> Outcome {
    let mut cells = 0;
    let mut bad = Vec::new();
    let deltas = [rat(0, 1), rat(1, 20), rat(1, 4), rat(1, 2), rat(9, 10), rat(99, 100)];
    for p in 2..=6 {
        for n in [1, 2, 3, 5, 8, 13, 21, 34] {
            for d in &deltas {
                let r = tvd_report(&params(p, n, d.clone())).unwrap();
                let cs = to_f64(&r.tvd_exact) <= r.cs_bound + 1e-12;
                if r.tvd_exact != r.expectation_form || !cs {
                    bad.push(format!("p={p} n={n} delta={d}"));
                }
                cells += 1;
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{cells} cells: tvd == (1/2)E|q-1| and tvd <= cs bound; failures {bad:?}"),
    )
}

fn c7_ratio_growth_in_p() -> Outcome {
    let start = Instant::now();
    let mut grid = Vec::new();
    for p in 2..=6 {
        for n in [16, 32, 64] {
            for i in 1..=12 {
                let lambda = rat(i, 100);
                if lambda < rat(1, p as i64) {
                    grid.push(SweepCell {
                        p,
                        n,
                        delta: lambda * BigRational::from_integer(p.into()),
                    });
                }
            }
        }
    }
    let result = sweep(&grid);
    let skipped = result
        .rows
        .iter()
        .filter(|r| matches!(r, SweepRow::Skipped { .. }))
        .count();
    let lambda_sup: BTreeMap<usize, f64> = result
        .per_p
        .iter()
        .map(|(p, s)| (*p, s.max_ratio_to_lambda.unwrap_or(f64::NAN)))
        .collect();
    let delta_sup: BTreeMap<usize, f64> = result
        .per_p
        .iter()
        .map(|(p, s)| (*p, s.max_ratio_to_delta.unwrap_or(f64::NAN)))
        .collect();
    let finite = lambda_sup.values().all(|x| x.is_finite());
    let seq: Vec<f64> = (2..=6).map(|p| lambda_sup[&p]).collect();
    let monotone = seq.windows(2).all(|w| w[1] > w[0]);
    let growth = seq[4] / seq[0];
    let delta_growth = delta_sup[&6] / delta_sup[&2];
    let (fast, time) = within(Duration::from_secs(600), start);
    let fmt = |m: &BTreeMap<usize, f64>| {
        m.iter()
            .map(|(p, v)| format!("p{p}={v:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        finite && !(monotone && growth > 2.0) && skipped == 0 && fast,
        format!(
            "sup tvd/lambda [{}], monotone={monotone}, p6/p2={growth:.2}; \
             diagnostic sup tvd/delta [{}], p6/p2={delta_growth:.2}; {} cells, {time}",
            fmt(&lambda_sup),
            fmt(&delta_sup),
            grid.len()
        ),
    )
}

fn c8_spectral_gap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst_gap: f64 = 0.0;
    let mut worst_agreement: f64 = 0.0;
    let mut failures = Vec::new();
    for _ in 0..50 {
        let p = rng.random_range(2..=16);
        let d = rat(rng.random_range(0..10_000), 10_000);
        match verify_expander(&params(p, 4, d.clone())) {
            Ok(s) => {
                worst_gap = worst_gap.max((s.second_largest_magnitude - to_f64(&d)).abs());
                worst_agreement = worst_agreement.max(s.solver_agreement.unwrap_or(f64::INFINITY));
            }
            Err(e) => failures.push(format!("p={p} delta={d}: {e}")),
        }
    }
    outcome(
        failures.is_empty() && worst_gap <= 1e-10 && worst_agreement <= 1e-9,
        format!("50 instances, max |lambda_2 - delta| {worst_gap:.1e}, max solver gap {worst_agreement:.1e}, failures {failures:?}"),
    )
}

fn c9_grouping() -> Outcome {
    let mut cases = 0;
    let mut bad = Vec::new();
    for p in 2..=12 {
        for k in (2..=p).filter(|k| p % k == 0) {
            for lambda in [rat(0, 1), rat(1, 200), rat(1, 50), rat(1, 13)] {
                let w = WalkParams::from_lambda(p, 6, lambda.clone()).unwrap();
                let kr = BigRational::from_integer(k.into());
                let want =
                    kr.recip() + BigRational::from_integer(p.into()) * &lambda * (BigRational::one() - kr.recip());
                let ok = group_states(&w, k)
                    .ok()
                    .and_then(|g| g.grouped.sticky_form())
                    .is_some_and(|(stay, _)| stay == want);
                if !ok {
                    bad.push(format!("p={p} k={k} lambda={lambda}"));
                }
                cases += 1;
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{cases} (p, k, lambda) cases exact, failures {bad:?}"),
    )
}

fn c10_sampler_statistics() -> Outcome {
    let (p, n, samples) = (3, 10, 1_000_000u64);
    let w = params(p, n, rat(1, 4));
    let exact = zero_count_distribution(&w).unwrap();
    let mut worst = Vec::new();
    let mut pass = true;
    for (method, seed) in [(SamplingMethod::Direct, 1u64), (SamplingMethod::Increments, 2u64)] {
        let hist = WalkSampler::new(&w, seed, method).zero_count_histogram(samples);
        let mut worst_z: f64 = 0.0;
        for (l, &count) in hist.iter().enumerate() {
            let q = to_f64(exact.prob(l));
            let mean = q * samples as f64;
            let sigma = (samples as f64 * q * (1.0 - q)).sqrt();
            let z = if sigma > 0.0 {
                (count as f64 - mean).abs() / sigma
            } else {
                (count as f64 - mean).abs()
            };
            worst_z = worst_z.max(z);
        }
        pass &= worst_z <= 4.0;
        worst.push(format!("{method:?} max |z| {worst_z:.2}"));
    }
    outcome(
        pass,
        format!("p=3 n=10 delta=1/4, 10^6 samples each: {}", worst.join(", ")),
    )
}

fn c11_root_and_increment_identities() -> Outcome {
    let mut worst_root: f64 = 0.0;
    for p in 2..=12u64 {
        for k in 1..p {
            worst_root = worst_root.max(root_power_sum(p, k).unwrap().norm());
        }
    }
    let mut bad = Vec::new();
    let mut worst_im: f64 = 0.0;
    for p in 2..=12 {
        for i in 0..20 {
            let d = rat(i, 19);
            let r = increment_expectation(p, &d).unwrap();
            worst_im = worst_im.max(r.complex.im.abs());
            if r.exact != d || (r.complex.re - to_f64(&d)).abs() > 1e-12 {
                bad.push(format!("p={p} delta={d}"));
            }
        }
    }
    outcome(
        worst_root < 1e-10 && worst_im < 1e-12 && bad.is_empty(),
        format!("max |root sum| {worst_root:.1e}, max |imag| {worst_im:.1e}, increment mismatches {bad:?}"),
    )
}

fn run_cli(args: &[&str], out: &std::path::Path) -> (i32, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_sticky-lab"))
        .args(args)
        .arg("--output")
        .arg(out)
        .status()
        .expect("binary runs");
    (status.code().unwrap_or(-1), std::fs::read(out).unwrap_or_default())
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["verify", "--p", "3", "--n", "6", "--bias", "1/4", "--seed", "7"],
        &[
            "sweep",
            "--p",
            "2..4",
            "--n",
            "8,16",
            "--lambda",
            "0.01..0.09",
            "--step",
            "0.02",
            "--seed",
            "7",
        ],
        &[
            "sample",
            "--p",
            "3",
            "--n",
            "10",
            "--bias",
            "1/4",
            "--seed",
            "7",
            "--samples",
            "5000",
        ],
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for (i, args) in runs.iter().enumerate() {
        let (a_code, a) = run_cli(args, &dir.path().join(format!("a{i}")));
        let (b_code, b) = run_cli(args, &dir.path().join(format!("b{i}")));
        let same = a == b && !a.is_empty() && a_code == 0 && b_code == 0;
        pass &= same;
        notes.push(format!("{} {} bytes identical={same}", args[0], a.len()));
    }
    outcome(pass, notes.join(", "))
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        (
            "C1",
            "zero-count DP equals enumeration marginal",
            c1_dp_equals_enumeration,
        ),
        ("C2", "binary Krawtchouk orthogonality", c2_binary_orthogonality),
        (
            "C3",
            "generalized Krawtchouk orthogonality",
            c3_generalized_orthogonality,
        ),
        ("C4", "E[K_k] vanishes for k mod p != 0", c4_vanishing_off_multiples),
        (
            "C5",
            "moment polynomial equals oracle; closed-form report",
            c5_moment_routes_and_closed_forms,
        ),
        ("C6", "tvd expectation form and Cauchy-Schwarz bound", c6_tvd_identities),
        ("C7", "tvd/lambda does not grow like p^O(p)", c7_ratio_growth_in_p),
        ("C8", "second eigenvalue equals delta", c8_spectral_gap),
        ("C9", "grouped chain stay probability", c9_grouping),
        ("C10", "sampler histograms within 4 sigma", c10_sampler_statistics),
        (
            "C11",
            "root-of-unity and increment identities",
            c11_root_and_increment_identities,
        ),
        (
            "C12",
            "byte-identical verify, sweep and sample artifacts",
            c12_determinism,
        ),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        let result = check();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {name}: {}", result.detail);
        if !result.pass {
            failed.push(id);
        }
    }
    println!(
        "acceptance: {} passed, {} failed{}",
        criteria.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({})", failed.join(", "))
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
