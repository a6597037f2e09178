//! The `ovm` command-line front end.
//!
//! Every command produces a [`RunReport`], rendered either as text or as
//! JSON (`--json`). Exit codes: 0 pass, 1 violation, 2 input error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::characterization::{certify_two_moment, MATCH_TOL};
use crate::counterexample::{build_dilation_matrix, build_povm, fibonacci_example, fibonacci_numbers, leading_projection, solve_params};
use crate::dilation::{dilate_minimal, NaimarkDilation};
use crate::error::OvmError;
use crate::hermitian::MatrixJson;
use crate::povm::FiniteOVM;
use crate::verify::{Suite, SuiteConfig, SuiteReport};

/// Largest `--max-k` accepted by `fibonacci`; beyond it Fibonacci numbers
/// are no longer exact in `f64`.
pub const MAX_FIBONACCI_K: u32 = 70;

#[derive(Debug, Parser)]
#[command(name = "ovm", version, about = "Spectrality checks for finite operator-valued measures")]
pub struct Cli {
    /// Tolerance for moment and commutation comparisons.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Moments, variance, spectrality and Hankel positivity of a measure.
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = 6)]
        moments: u32,
        #[arg(long, default_value_t = 3)]
        hankel: usize,
    },
    /// Minimal Naimark dilation of a measure.
    Dilate {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Non-spectral measure matching the moments of orders p and q.
    Counterexample {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        q: u32,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The golden-ratio example built from S = [[0, 1], [1, 1]].
    Fibonacci {
        #[arg(long, default_value_t = 20)]
        max_k: u32,
    },
    /// Seeded property suites.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        dim_max: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Pass,
    Violation,
    InputError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Pass => 0,
            ExitStatus::Violation => 1,
            ExitStatus::InputError => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    /// Input path to `sha256:<hex>` digest.
    pub inputs: BTreeMap<String, String>,
    pub results: Value,
    pub residual_summary: BTreeMap<String, f64>,
    pub exit_status: ExitStatus,
}

impl RunReport {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            results: json!({}),
            residual_summary: BTreeMap::new(),
            exit_status: ExitStatus::Pass,
        }
    }

    fn input_error(mut self, message: impl Into<String>) -> Self {
        self.results = json!({ "error": message.into() });
        self.exit_status = ExitStatus::InputError;
        self
    }

    fn residual(&mut self, key: impl Into<String>, value: f64) {
        self.residual_summary.insert(key.into(), value);
    }

    fn violation_if(&mut self, failed: bool) {
        if failed && self.exit_status == ExitStatus::Pass {
            self.exit_status = ExitStatus::Violation;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("command: {}\n", self.command);
        for (path, digest) in &self.inputs {
            out.push_str(&format!("input {path}: {digest}\n"));
        }
        render_value(&mut out, "", &self.results);
        for (k, v) in &self.residual_summary {
            out.push_str(&format!("residual {k}: {v:e}\n"));
        }
        let status = match self.exit_status {
            ExitStatus::Pass => "pass",
            ExitStatus::Violation => "violation",
            ExitStatus::InputError => "input_error",
        };
        out.push_str(&format!("status: {status}\n"));
        out
    }
}

fn is_leaf_array(items: &[Value]) -> bool {
    items.iter().all(|v| !v.is_object())
}

fn render_value(out: &mut String, prefix: &str, value: &Value) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                render_value(out, &key, v);
            }
        }
        Value::Array(items) if !is_leaf_array(items) => {
            for (i, v) in items.iter().enumerate() {
                render_value(out, &format!("{prefix}[{i}]"), v);
            }
        }
        Value::String(s) => out.push_str(&format!("{prefix}: {s}\n")),
        other => out.push_str(&format!("{prefix}: {other}\n")),
    }
}

/// Outcome of one invocation.
#[derive(Debug, Clone)]
pub struct Execution {
    pub report: RunReport,
    pub rendered: String,
}

impl Execution {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_status.code()
    }
}

pub fn execute(cli: &Cli) -> Execution {
    let tol = cli.tol.unwrap_or(MATCH_TOL);
    let report = match &cli.command {
        Command::Check { file, moments, hankel } => cmd_check(file, *moments, *hankel, tol),
        Command::Dilate { file, out } => cmd_dilate(file, out, tol),
        Command::Counterexample { p, q, tau, dim, out } => cmd_counterexample(*p, *q, *tau, *dim, out.as_deref(), tol),
        Command::Fibonacci { max_k } => cmd_fibonacci(*max_k, tol),
        Command::Verify {
            suite,
            trials,
            seed,
            dim_max,
        } => cmd_verify(
            suite,
            &SuiteConfig {
                trials: *trials,
                seed: *seed,
                dim_max: *dim_max,
            },
        ),
    };
    let rendered = if cli.json { report.to_json() + "\n" } else { report.to_text() };
    Execution { report, rendered }
}

/// Parses `args` (including the program name) and executes; usage errors
/// are reported as input errors.
pub fn run<I, T>(args: I) -> Execution
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let report = RunReport::new("usage").input_error(e.to_string());
            let rendered = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    return Execution {
                        report: RunReport::new("help"),
                        rendered: e.to_string(),
                    };
                }
                _ => e.to_string(),
            };
            Execution { report, rendered }
        }
    }
}

fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

fn load_measure(report: &mut RunReport, file: &Path) -> std::result::Result<FiniteOVM, String> {
    let bytes = fs::read(file).map_err(|e| format!("cannot read {}: {e}", file.display()))?;
    report.inputs.insert(file.display().to_string(), digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| format!("{} is not UTF-8", file.display()))?;
    let f = FiniteOVM::from_json_str(&text).map_err(|e| e.to_string())?;
    if !f.is_normalized() {
        return Err(OvmError::NotNormalized {
            defect: f.normalization_defect(),
        }
        .to_string());
    }
    Ok(f)
}

fn write_output(path: &Path, contents: &str) -> std::result::Result<Value, String> {
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(json!({ "path": path.display().to_string(), "digest": digest(contents.as_bytes()) }))
}

fn matrix_value(m: &crate::hermitian::HermitianMatrix) -> Value {
    serde_json::to_value(MatrixJson::from(m)).expect("matrix serializes")
}

pub fn cmd_check(file: &Path, moments: u32, hankel: usize, tol: f64) -> RunReport {
    let mut report = RunReport::new("check");
    let f = match load_measure(&mut report, file) {
        Ok(f) => f,
        Err(e) => return report.input_error(e),
    };
    let body = || -> crate::Result<(Value, f64, f64)> {
        let ms = (0..=moments)
            .map(|k| Ok(json!({ "k": k, "moment": matrix_value(&f.moment(k)?) })))
            .collect::<crate::Result<Vec<_>>>()?;
        let var = f.variance()?;
        let var_min = var.min_eigenvalue()?;
        let mut hankel_min = f64::INFINITY;
        let mut hs = Vec::new();
        for n in 0..=hankel {
            let h = f.hankel(n)?;
            let min = h.min_eigenvalue()?;
            hankel_min = hankel_min.min(min);
            hs.push(json!({ "n": n, "min_eigenvalue": min, "psd": h.is_psd(tol) }));
        }
        let results = json!({
            "dim": f.dim(),
            "atoms": f.len(),
            "support": f.support(),
            "spectral": f.is_spectral(tol),
            "moments": ms,
            "variance": matrix_value(&var),
            "variance_min_eigenvalue": var_min,
            "variance_psd": var.is_psd(tol),
            "hankel": hs,
        });
        Ok((results, var_min, hankel_min))
    };
    match body() {
        Ok((results, var_min, hankel_min)) => {
            report.results = results;
            report.residual("variance_min_eigenvalue", var_min);
            report.residual("hankel_min_eigenvalue", hankel_min);
            let failed = report.results["variance_psd"] == json!(false)
                || report.results["hankel"]
                    .as_array()
                    .is_some_and(|hs| hs.iter().any(|h| h["psd"] == json!(false)));
            report.violation_if(failed);
            report
        }
        Err(e) => report.input_error(e.to_string()),
    }
}

pub fn cmd_dilate(file: &Path, out: &Path, tol: f64) -> RunReport {
    let mut report = RunReport::new("dilate");
    let f = match load_measure(&mut report, file) {
        Ok(f) => f,
        Err(e) => return report.input_error(e),
    };
    let body = || -> crate::Result<(Value, f64, f64)> {
        let d = dilate_minimal(&f)?;
        let mut moment_residual: f64 = 0.0;
        let mut per_k = Vec::new();
        for k in 0..=6 {
            let r = d.moment(k)?.relative_distance(&f.moment(k)?)?;
            moment_residual = moment_residual.max(r);
            per_k.push(json!({ "k": k, "residual": r }));
        }
        let back = d.compress()?;
        let mut round_trip: f64 = if back.len() == f.len() { 0.0 } else { f64::INFINITY };
        for (x, y) in back.atoms().iter().zip(f.atoms()) {
            round_trip = round_trip.max((x.lambda - y.lambda).abs()).max(x.effect.distance(&y.effect)?);
        }
        let results = json!({
            "small_dim": d.small_dim(),
            "big_dim": d.big_dim(),
            "commutes": d.p_commutes(tol),
            "max_commutator": d.max_commutator(),
            "moment_residuals": per_k,
            "round_trip_residual": round_trip,
            "spectral": f.is_spectral(tol),
        });
        Ok((results, moment_residual, round_trip))
    };
    match body() {
        Ok((mut results, moment_residual, round_trip)) => {
            let d = dilate_minimal(&f).expect("dilation succeeded above");
            match write_output(out, &d.to_json()) {
                Ok(o) => results["output"] = o,
                Err(e) => return report.input_error(e),
            }
            report.results = results;
            report.residual("moment_compression", moment_residual);
            report.residual("round_trip", round_trip);
            let consistent = report.results["commutes"] == report.results["spectral"];
            report.violation_if(moment_residual > tol || round_trip > tol || !consistent);
            report
        }
        Err(e) => {
            report.results = json!({ "error": e.to_string() });
            report.exit_status = ExitStatus::Violation;
            report
        }
    }
}

pub fn cmd_counterexample(p: u32, q: u32, tau: f64, dim: usize, out: Option<&Path>, tol: f64) -> RunReport {
    let mut report = RunReport::new("counterexample");
    if dim == 0 {
        return report.input_error("dimension must be positive");
    }
    let params = match solve_params(p, q, tau) {
        Ok(c) => c,
        Err(e @ (OvmError::PairInOmega { .. } | OvmError::InvalidArgument(_))) => {
            return report.input_error(e.to_string())
        }
        Err(e) => {
            report.results = json!({ "error": e.to_string() });
            report.exit_status = ExitStatus::Violation;
            return report;
        }
    };
    let body = || -> crate::Result<Value> {
        let r = params.residuals();
        let (t, f) = build_povm(&params, dim)?;
        let s = build_dilation_matrix(&params);
        let mut entries = Vec::new();
        let mut entry_residual: f64 = 0.0;
        for k in [p, q] {
            let tk = tau.powi(k as i32);
            let rel = (s.powi(k).get(0, 0).re - tk).abs() / tk.abs();
            entry_residual = entry_residual.max(rel);
            entries.push(json!({ "k": k, "relative_residual": rel }));
        }
        let verdict = certify_two_moment(&t, &f, p, q, tol)?;
        let commutator = leading_projection().commutator_norm(&s)?;
        Ok(json!({
            "params": params,
            "povm": f.to_document(),
            "s_matrix": matrix_value(&s),
            "transcript": {
                "equation_residuals": r,
                "determinant": params.determinant(),
                "s_power_entries": entries,
                "s_power_residual": entry_residual,
                "spectral": f.is_spectral(tol),
                "commutator_norm": commutator,
                "verdict": verdict,
            },
        }))
    };
    let mut doc = match body() {
        Ok(doc) => doc,
        Err(e) => {
            report.results = json!({ "error": e.to_string() });
            report.exit_status = ExitStatus::Violation;
            return report;
        }
    };
    let t = &doc["transcript"];
    let r = params.residuals();
    let entry = t["s_power_residual"].as_f64().unwrap_or(f64::INFINITY);
    let commutator = t["commutator_norm"].as_f64().unwrap_or(0.0);
    let failed = r.weights > 1e-12
        || r.moment_p > 1e-10
        || r.moment_q > 1e-10
        || entry > 1e-9
        || t["spectral"] == json!(true)
        || commutator <= 1e-6
        || params.validate(1e-12, 1e-10).is_err();
    report.residual("weights", r.weights);
    report.residual("moment_p", r.moment_p);
    report.residual("moment_q", r.moment_q);
    report.residual("s_power_entry", entry);
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(&doc).expect("document serializes") + "\n";
        match write_output(path, &text) {
            Ok(o) => doc["output"] = o,
            Err(e) => return report.input_error(e),
        }
    }
    report.results = doc;
    report.violation_if(failed);
    report
}

pub fn cmd_fibonacci(max_k: u32, tol: f64) -> RunReport {
    let mut report = RunReport::new("fibonacci");
    if max_k > MAX_FIBONACCI_K {
        return report.input_error(format!("--max-k must be at most {MAX_FIBONACCI_K}"));
    }
    let ex = fibonacci_example();
    let body = || -> crate::Result<(Value, f64, bool)> {
        let fib = fibonacci_numbers(max_k as usize + 1);
        let leading = NaimarkDilation::from_operator_on_leading_block(&ex.s, 1)?;
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        for k in 0..=max_k {
            let expected = if k == 0 { 1.0 } else { fib[k as usize - 1] };
            let compressed = leading.moment(k)?.get(0, 0).re;
            let moment = ex.f.moment(k)?.get(0, 0).re;
            let rel = ((compressed - expected).abs()).max((moment - expected).abs()) / expected.abs().max(1.0);
            worst = worst.max(rel);
            rows.push(json!({ "k": k, "compressed": compressed, "moment": moment, "expected": expected }));
        }
        let var = ex.f.variance()?.get(0, 0).re;
        let verdict = certify_two_moment(&ex.t, &ex.f, 2, 3, tol)?;
        let d = dilate_minimal(&ex.f)?;
        let exact = ex.s.powi(2).get(0, 0).re == 1.0 && ex.s.powi(3).get(0, 0).re == 1.0;
        let spectral = ex.f.is_spectral(tol);
        let ok = exact && !spectral && (var - 1.0).abs() <= 1e-10 && verdict.all_match();
        Ok((
            json!({
                "s_matrix": matrix_value(&ex.s),
                "povm": ex.f.to_document(),
                "powers": rows,
                "exact_at_2_and_3": exact,
                "spectral": spectral,
                "variance": var,
                "verdict": verdict,
                "dilation": { "big_dim": d.big_dim(), "commutes": d.p_commutes(tol) },
            }),
            worst,
            ok,
        ))
    };
    match body() {
        Ok((results, worst, ok)) => {
            let var = results["variance"].as_f64().unwrap_or(f64::NAN);
            report.results = results;
            report.residual("fibonacci_relative", worst);
            report.residual("variance", (var - 1.0).abs());
            report.violation_if(!ok || worst > tol);
            report
        }
        Err(e) => {
            report.results = json!({ "error": e.to_string() });
            report.exit_status = ExitStatus::Violation;
            report
        }
    }
}

pub fn cmd_verify(suite: &str, cfg: &SuiteConfig) -> RunReport {
    let mut report = RunReport::new("verify");
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        match suite.parse::<Suite>() {
            Ok(s) => vec![s],
            Err(e) => return report.input_error(e.to_string()),
        }
    };
    if cfg.dim_max == 0 {
        return report.input_error("--dim-max must be positive");
    }
    let mut reports: Vec<SuiteReport> = Vec::new();
    for s in suites {
        match s.run(cfg) {
            Ok(r) => reports.push(r),
            Err(e) => reports.push(SuiteReport {
                name: s.name().to_string(),
                instances: 0,
                passed: false,
                failure_count: 1,
                failures: vec![e.to_string()],
                max_residuals: BTreeMap::new(),
                min_margins: BTreeMap::new(),
            }),
        }
    }
    for r in &reports {
        for (k, v) in &r.max_residuals {
            report.residual(format!("{}.{k}", r.name), *v);
        }
        for (k, v) in &r.min_margins {
            report.residual(format!("{}.{k}", r.name), *v);
        }
    }
    let failed = reports.iter().any(|r| !r.passed);
    report.results = json!({
        "config": cfg,
        "suites": reports,
    });
    report.violation_if(failed);
    report
}
