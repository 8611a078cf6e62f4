//! Command-line front end. Output is a single CSV table or a single JSON
//! object stamped with [`SCHEMA_VERSION`], written once at the end.
//!
//! Exit codes: `0` success, `1` an asserted verification failed, `2` usage
//! error or cap exceeded.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde_json::{json, Value};
use std::path::PathBuf;

use crate::chain::{group_states, zero_count_distribution, SamplingMethod, WalkParams, WalkSampler};
use crate::error::{invalid, Error, Result};
use crate::moments::{expected_krawtchouk_closed, moment_values, MomentVector};
use crate::numerics::{self, fraction_string, parse_rational, uniform_zero_weights};
use crate::spectral::{spectrum, verify_expander};
use crate::tvd::{
    csv_record, exact_cell, probability_ratio, reconstruct_via_krawtchouk, second_moment, sweep, tvd_report, write_csv,
    SweepCell, SweepRow, CSV_COLUMNS, MAX_RECONSTRUCTION_LENGTH,
};
use crate::verify::{emit_verification_report, verify_instance};
use crate::SCHEMA_VERSION;

/// Walks listed verbatim in `sample` JSON output.
const LISTED_WALKS: u64 = 20;

#[derive(Debug, Parser)]
#[command(
    name = "sticky-lab",
    version,
    about = "Exact verification workbench for the generalized sticky random walk"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw seeded walks and tabulate their zero counts against the exact law.
    Sample(SampleArgs),
    /// Exact zero-count law, uniform reference and probability ratio.
    Dist(InstanceArgs),
    /// Krawtchouk moments E[K_k(|s|_0)] and the claimed closed forms.
    Moments(InstanceArgs),
    /// Exact total variation distance with its bounds.
    Tvd(InstanceArgs),
    /// Total variation distance over a (p, n, bias) grid.
    Sweep(SweepArgs),
    /// Full per-instance verification suite.
    Verify(InstanceArgs),
    /// Spectrum of the transition matrix and of its groupings.
    Spectral(InstanceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BiasKind {
    /// Mixture weight: each step is (1 - delta) Uniform + delta Stay.
    Delta,
    /// Per-state bias: stay with probability 1/p + (p-1) lambda.
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Direct,
    Increments,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// RNG seed; recorded in the artifact.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    /// Exact rational, e.g. `1/4` or `0.25`.
    #[arg(long)]
    pub bias: String,
    #[arg(long, value_enum, default_value_t = BiasKind::Delta)]
    pub bias_kind: BiasKind,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value_t = 10)]
    pub samples: u64,
    #[arg(long, value_enum, default_value_t = Method::Direct)]
    pub method: Method,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Alphabet sizes: `2..5`, `3` or `2,3,5`.
    #[arg(long)]
    pub p: String,
    /// Walk lengths: `16`, `16,32,64` or `8..12`.
    #[arg(long)]
    pub n: String,
    /// Per-state bias grid: `0.01..0.25` (with `--step`) or `0.01,0.05`.
    #[arg(long, conflicts_with = "delta", required_unless_present = "delta")]
    pub lambda: Option<String>,
    /// Mixture-weight grid, same syntax as `--lambda`.
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub step: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

impl InstanceArgs {
    pub fn params(&self) -> Result<WalkParams> {
        let bias = parse_rational(&self.bias)?;
        match self.bias_kind {
            BiasKind::Delta => WalkParams::from_mixture(self.p, self.n, bias),
            BiasKind::Lambda => WalkParams::from_lambda(self.p, self.n, bias),
        }
    }
}

fn parse_usize_grid(text: &str) -> Result<Vec<usize>> {
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| invalid(format!("not a nonnegative integer: {s:?}")))
    };
    let values = if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
        (lo..=hi).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(invalid(format!("empty grid {text:?}")));
    }
    Ok(values)
}

/// `a..b` with an exact `step` (inclusive of `b` when reached), or a comma
/// list.
pub fn parse_rational_grid(text: &str, step: Option<&str>) -> Result<Vec<BigRational>> {
    let values = if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (parse_rational(lo)?, parse_rational(hi)?);
        let step = parse_rational(step.ok_or_else(|| invalid("a range grid needs --step"))?)?;
        if !step.is_positive() {
            return Err(invalid("--step must be positive"));
        }
        let mut out = Vec::new();
        let mut x = lo;
        while x <= hi {
            out.push(x.clone());
            x += &step;
        }
        out
    } else {
        text.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(invalid(format!("empty grid {text:?}")));
    }
    Ok(values)
}

pub fn sweep_grid(args: &SweepArgs) -> Result<Vec<SweepCell>> {
    let ps = parse_usize_grid(&args.p)?;
    let ns = parse_usize_grid(&args.n)?;
    let (text, per_state) = match (&args.lambda, &args.delta) {
        (Some(l), None) => (l, true),
        (None, Some(d)) => (d, false),
        _ => return Err(invalid("give exactly one of --lambda and --delta")),
    };
    let biases = parse_rational_grid(text, args.step.as_deref())?;
    let mut grid = Vec::new();
    for &p in &ps {
        for &n in &ns {
            for b in &biases {
                let delta = if per_state {
                    b * BigRational::from_integer(p.into())
                } else {
                    b.clone()
                };
                grid.push(SweepCell { p, n, delta });
            }
        }
    }
    Ok(grid)
}

fn instance_json(params: &WalkParams, seed: u64) -> Value {
    json!({
        "p": params.p(),
        "n": params.n(),
        "delta": params.delta().to_string(),
        "lambda": params.lambda().to_string(),
        "stay_prob": params.stay_prob().to_string(),
        "switch_prob": params.switch_prob().to_string(),
        "seed": seed,
    })
}

fn envelope(command: &str, config: Value, result: Value) -> String {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("json serializes");
    text.push('\n');
    text
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let io = |e: csv::Error| invalid(format!("csv output failed: {e}"));
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(io)?;
    for row in rows {
        writer.write_record(row).map_err(io)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| invalid(format!("csv output failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn write_output(out: &OutputArgs, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_sample(args: &SampleArgs) -> Result<i32> {
    let inst = &args.instance;
    let params = inst.params()?;
    let method = match args.method {
        Method::Direct => SamplingMethod::Direct,
        Method::Increments => SamplingMethod::Increments,
    };
    let mut sampler = WalkSampler::new(&params, inst.out.seed, method);
    let listed: Vec<String> = (0..args.samples.min(LISTED_WALKS))
        .map(|_| sampler.next_walk().to_string())
        .collect();
    // Restart so the histogram covers all requested walks, listed ones included.
    let mut sampler = WalkSampler::new(&params, inst.out.seed, method);
    let hist = sampler.zero_count_histogram(args.samples);
    let exact = zero_count_distribution(&params)?;
    let expected: Vec<f64> = exact
        .probs()
        .iter()
        .map(|x| numerics::to_f64(x) * args.samples as f64)
        .collect();
    let text = match inst.out.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = hist
                .iter()
                .enumerate()
                .map(|(l, c)| vec![l.to_string(), c.to_string(), format!("{:e}", expected[l])])
                .collect();
            csv_table(&["zeros", "count", "expected_count"], &rows)?
        }
        Format::Json => {
            let mut config = instance_json(&params, inst.out.seed);
            config["samples"] = json!(args.samples);
            config["method"] = json!(method);
            envelope(
                "sample",
                config,
                json!({ "walks": listed, "zero_count_histogram": hist, "expected_counts": expected }),
            )
        }
    };
    write_output(&inst.out, &text)?;
    Ok(0)
}

fn run_dist(args: &InstanceArgs) -> Result<i32> {
    let params = args.params()?;
    let dist = zero_count_distribution(&params)?;
    let uniform = uniform_zero_weights(params.n(), params.p());
    let ratio = probability_ratio(&params)?;
    let text = match args.out.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..=params.n())
                .map(|l| {
                    vec![
                        l.to_string(),
                        exact_cell(dist.prob(l)),
                        exact_cell(&uniform[l]),
                        exact_cell(&ratio[l]),
                    ]
                })
                .collect();
            csv_table(&["zeros", "walk_probability", "uniform_probability", "ratio"], &rows)?
        }
        Format::Json => {
            let s = |xs: &[BigRational]| xs.iter().map(fraction_string).collect::<Vec<_>>();
            envelope(
                "dist",
                instance_json(&params, args.out.seed),
                json!({ "walk": s(dist.probs()), "uniform": s(&uniform), "ratio": s(&ratio) }),
            )
        }
    };
    write_output(&args.out, &text)?;
    Ok(0)
}

fn run_moments(args: &InstanceArgs) -> Result<i32> {
    let params = args.params()?;
    let (p, n) = (params.p(), params.n());
    let values = moment_values(&params)?;
    let polys = MomentVector::new(p, n).ok();
    let closed = (1..=n / 2)
        .filter(|k| k % p == 0)
        .map(|k| expected_krawtchouk_closed(p, n, k, params.delta()))
        .collect::<Result<Vec<_>>>()?;
    let nonvanishing: Vec<usize> = (0..=n).filter(|k| k % p != 0 && !values[*k].is_zero()).collect();
    let text = match args.out.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..=n)
                .map(|k| {
                    vec![
                        k.to_string(),
                        exact_cell(&values[k]),
                        polys.as_ref().map(|m| m.values[k].to_string()).unwrap_or_default(),
                    ]
                })
                .collect();
            csv_table(&["k", "expected_krawtchouk", "polynomial_in_delta"], &rows)?
        }
        Format::Json => {
            let rows: Vec<Value> = (0..=n)
                .map(|k| {
                    json!({
                        "k": k,
                        "value": fraction_string(&values[k]),
                        "polynomial": polys.as_ref().map(|m| m.values[k].clone()),
                    })
                })
                .collect();
            envelope(
                "moments",
                instance_json(&params, args.out.seed),
                json!({
                    "moments": rows,
                    "nonzero_off_multiples_of_p": nonvanishing,
                    "closed_form_report": closed,
                }),
            )
        }
    };
    write_output(&args.out, &text)?;
    Ok(0)
}

fn run_tvd(args: &InstanceArgs) -> Result<i32> {
    let params = args.params()?;
    let report = tvd_report(&params)?;
    let text = match args.out.format.unwrap_or(Format::Json) {
        Format::Csv => csv_table(&CSV_COLUMNS, &[csv_record(&report)])?,
        Format::Json => {
            let reconstruction = (params.n() <= MAX_RECONSTRUCTION_LENGTH)
                .then(|| reconstruct_via_krawtchouk(&params))
                .transpose()?;
            envelope(
                "tvd",
                instance_json(&params, args.out.seed),
                json!({
                    "report": report,
                    "second_moment": second_moment(&params)?,
                    "reconstruction": reconstruction,
                }),
            )
        }
    };
    write_output(&args.out, &text)?;
    Ok(0)
}

fn run_sweep(args: &SweepArgs) -> Result<i32> {
    let grid = sweep_grid(args)?;
    let result = sweep(&grid);
    let skipped = result
        .rows
        .iter()
        .filter(|r| matches!(r, SweepRow::Skipped { .. }))
        .count();
    if skipped > 0 {
        eprintln!(
            "note: {skipped} of {} cells skipped (see JSON output for reasons)",
            grid.len()
        );
    }
    let text = match args.out.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(&result.rows, &mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => envelope(
            "sweep",
            json!({
                "p": args.p,
                "n": args.n,
                "lambda": args.lambda,
                "delta": args.delta,
                "step": args.step,
                "seed": args.out.seed,
            }),
            serde_json::to_value(&result).expect("json serializes"),
        ),
    };
    write_output(&args.out, &text)?;
    Ok(0)
}

fn run_verify(args: &InstanceArgs) -> Result<i32> {
    let params = args.params()?;
    let report = verify_instance(&params);
    let text = match args.out.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .checks
                .iter()
                .map(|c| {
                    let status = serde_json::to_value(c.status).expect("enum serializes");
                    vec![
                        c.id.clone(),
                        status.as_str().unwrap_or_default().to_string(),
                        c.asserted.to_string(),
                        c.claim.clone(),
                    ]
                })
                .collect();
            csv_table(&["id", "status", "asserted", "claim"], &rows)?
        }
        Format::Json => emit_verification_report(&report),
    };
    write_output(&args.out, &text)?;
    if !report.passed() {
        eprintln!(
            "asserted checks failed: {}",
            report.summary.asserted_failures.join(", ")
        );
    }
    Ok(report.exit_code())
}

fn run_spectral(args: &InstanceArgs) -> Result<i32> {
    let params = args.params()?;
    let p = params.p();
    let (report, passed) = match verify_expander(&params) {
        Ok(r) => (r, true),
        Err(Error::Invariant(msg)) => {
            eprintln!("expander check failed: {msg}");
            (spectrum(&crate::chain::transition_matrix(&params))?, false)
        }
        Err(e) => return Err(e),
    };
    let mut grouped = Vec::new();
    for k in (2..p).filter(|k| p % k == 0) {
        let g = group_states(&params, k)?;
        grouped.push(json!({
            "k": k,
            "effective_delta": g.effective.delta().to_string(),
            "effective_lambda": g.effective.lambda().to_string(),
            "spectrum": spectrum(&g.grouped)?,
        }));
    }
    let text = match args.out.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(i, v)| vec![i.to_string(), format!("{v:e}")])
                .collect();
            csv_table(&["index", "eigenvalue"], &rows)?
        }
        Format::Json => envelope(
            "spectral",
            instance_json(&params, args.out.seed),
            json!({ "spectrum": report, "expander_check_passed": passed, "grouped": grouped }),
        ),
    };
    write_output(&args.out, &text)?;
    Ok(i32::from(!passed))
}

/// Dispatches a parsed configuration and returns the process exit code.
pub fn run(config: &RunConfig) -> i32 {
    let result = match &config.command {
        Command::Sample(a) => run_sample(a),
        Command::Dist(a) => run_dist(a),
        Command::Moments(a) => run_moments(a),
        Command::Tvd(a) => run_tvd(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Verify(a) => run_verify(a),
        Command::Spectral(a) => run_spectral(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Invariant(_) => 1,
                _ => 2,
            }
        }
    }
}

/// Parses process arguments and runs. Clap usage errors exit with `2`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(config) => run(&config),
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            code
        }
    }
}
