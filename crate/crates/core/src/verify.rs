//! Seeded property suites.
//!
//! Each suite draws its instances from per-trial random streams, checks a
//! family of invariants and aggregates the worst residuals. Results are
//! independent of thread scheduling: trials run in parallel but are
//! folded in trial order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterization::{
    holder_gap, in_omega, random_odd_candidate, random_positive_candidate, run_positive_search, run_search,
    SearchReport, MATCH_TOL,
};
use crate::corpus::{self, SupportRange, TrialRng};
use crate::counterexample::{build_dilation_matrix, build_povm, dilation_power, leading_projection, solve_params};
use crate::dilation::{dilate_minimal, numerical_rank};
use crate::error::{OvmError, Result};
use crate::hermitian::{signed_root, CMatrix, HermitianMatrix};
use crate::inequalities::{
    default_eps_list, hansen_equality_case, hansen_gap, kadison_equality_case, kadison_gap, kadison_gap_algebraic,
    lieb_ruskai_trace, CompressionMap, EQUALITY_TOL,
};

/// Lower bound on every minimum eigenvalue that should be nonnegative.
pub const PSD_SLACK: f64 = 1e-9;
/// Lower bound for the Lieb-Ruskai and Hankel checks.
pub const LOOSE_PSD_SLACK: f64 = 1e-8;
/// A moment residual at or below this counts as a match in stress suites.
pub const STRESS_MATCH_TOL: f64 = 1e-6;
/// Largest exponent covered by the exponent-pair suites.
pub const MAX_EXPONENT: u32 = 8;
/// `τ` values of the counterexample grid.
pub const GRID_TAUS: [f64; 4] = [1.0, -1.0, 2.0, 0.5];
/// Failure descriptions kept per suite.
const MAX_REPORTED_FAILURES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Kadison,
    Hansen,
    LiebRuskai,
    Hankel,
    Theorem,
    Positive,
    CounterexampleGrid,
    Holder,
    Dilation,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Kadison,
        Suite::Hansen,
        Suite::LiebRuskai,
        Suite::Hankel,
        Suite::Theorem,
        Suite::Positive,
        Suite::CounterexampleGrid,
        Suite::Holder,
        Suite::Dilation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kadison => "kadison",
            Suite::Hansen => "hansen",
            Suite::LiebRuskai => "lieb-ruskai",
            Suite::Hankel => "hankel",
            Suite::Theorem => "theorem",
            Suite::Positive => "positive",
            Suite::CounterexampleGrid => "counterexample-grid",
            Suite::Holder => "holder",
            Suite::Dilation => "dilation",
        }
    }

    pub fn run(self, cfg: &SuiteConfig) -> Result<SuiteReport> {
        match self {
            Suite::Kadison => kadison_suite(cfg),
            Suite::Hansen => hansen_suite(cfg),
            Suite::LiebRuskai => lieb_ruskai_suite(cfg),
            Suite::Hankel => hankel_suite(cfg),
            Suite::Theorem => theorem_suite(cfg),
            Suite::Positive => positive_suite(cfg),
            Suite::CounterexampleGrid => counterexample_grid_suite(),
            Suite::Holder => holder_suite(),
            Suite::Dilation => dilation_suite(cfg),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = OvmError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| OvmError::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub trials: u64,
    pub seed: u64,
    pub dim_max: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            trials: 500,
            seed: 42,
            dim_max: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: u64,
    pub passed: bool,
    pub failure_count: u64,
    /// First failures, in trial order.
    pub failures: Vec<String>,
    /// Worst value of each residual; smaller is better.
    pub max_residuals: BTreeMap<String, f64>,
    /// Worst value of each margin; larger is better.
    pub min_margins: BTreeMap<String, f64>,
}

/// Per-instance contribution to a [`SuiteReport`].
#[derive(Debug, Default)]
struct Outcome {
    residuals: Vec<(&'static str, f64)>,
    margins: Vec<(&'static str, f64)>,
    failures: Vec<String>,
}

impl Outcome {
    fn residual(&mut self, key: &'static str, value: f64) {
        self.residuals.push((key, value));
    }

    fn margin(&mut self, key: &'static str, value: f64) {
        self.margins.push((key, value));
    }

    /// Records `value <= bound` as a residual.
    fn at_most(&mut self, label: &str, key: &'static str, value: f64, bound: f64) {
        self.residual(key, value);
        if !(value <= bound) {
            self.fail(format!("{label}: {key} = {value:e} exceeds {bound:e}"));
        }
    }

    /// Records `value >= bound` as a margin.
    fn at_least(&mut self, label: &str, key: &'static str, value: f64, bound: f64) {
        self.margin(key, value);
        if !(value >= bound) {
            self.fail(format!("{label}: {key} = {value:e} below {bound:e}"));
        }
    }

    fn require(&mut self, label: &str, ok: bool, what: &str) {
        if !ok {
            self.fail(format!("{label}: {what}"));
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }
}

fn aggregate(name: &str, outcomes: Vec<Outcome>) -> SuiteReport {
    let mut report = SuiteReport {
        name: name.to_string(),
        instances: outcomes.len() as u64,
        passed: true,
        failure_count: 0,
        failures: Vec::new(),
        max_residuals: BTreeMap::new(),
        min_margins: BTreeMap::new(),
    };
    for o in outcomes {
        for (k, v) in o.residuals {
            let e = report.max_residuals.entry(k.to_string()).or_insert(f64::NEG_INFINITY);
            *e = e.max(v);
        }
        for (k, v) in o.margins {
            let e = report.min_margins.entry(k.to_string()).or_insert(f64::INFINITY);
            *e = e.min(v);
        }
        for f in o.failures {
            report.failure_count += 1;
            if report.failures.len() < MAX_REPORTED_FAILURES {
                report.failures.push(f);
            }
        }
    }
    report.passed = report.failure_count == 0;
    report
}

/// Runs `body` once per trial on its own stream; errors become failures.
fn run_trials<F>(name: &str, cfg: &SuiteConfig, body: F) -> SuiteReport
where
    F: Fn(&mut TrialRng, &mut Outcome, &str) -> Result<()> + Sync,
{
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = corpus::trial_rng(cfg.seed, trial);
            let mut out = Outcome::default();
            let label = format!("trial {trial}");
            if let Err(e) = body(&mut rng, &mut out, &label) {
                out.fail(format!("{label}: {e}"));
            }
            out
        })
        .collect();
    aggregate(name, outcomes)
}

fn random_dim(rng: &mut TrialRng, cfg: &SuiteConfig) -> usize {
    rng.random_range(2..=cfg.dim_max.max(2))
}

/// Random projection of rank `1..n` together with its complement.
fn random_proper_projection(rng: &mut TrialRng, n: usize) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let rank = rng.random_range(1..n);
    let p = corpus::random_projection(rng, n, rank)?;
    let q = &HermitianMatrix::identity(n) - &p;
    Ok((p, q))
}

/// `P X P + Q Y Q`, which commutes with `P`.
fn block_diagonal(p: &HermitianMatrix, q: &HermitianMatrix, x: &HermitianMatrix, y: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(&x.congruence(p.matrix())? + &y.congruence(q.matrix())?)
}

fn kadison_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    Ok(run_trials("kadison", cfg, |rng, out, label| {
        let n = random_dim(rng, cfg);
        let (p, q) = random_proper_projection(rng, n)?;
        let commuting = rng.random_bool(0.5);
        let a = if commuting {
            let x = corpus::random_hermitian(rng, n);
            let y = corpus::random_hermitian(rng, n);
            block_diagonal(&p, &q, &x, &y)?
        } else {
            corpus::random_hermitian(rng, n)
        };
        let c = CompressionMap::new(&p)?;
        let gap = kadison_gap(&c, &a)?;
        out.at_least(label, "min_eigenvalue", gap.min_eigenvalue()?, -PSD_SLACK);
        out.at_most(
            label,
            "algebraic_form",
            gap.distance(&kadison_gap_algebraic(&c, &a)?)?,
            PSD_SLACK,
        );
        let eq = kadison_equality_case(&c, &a, EQUALITY_TOL)?;
        out.require(label, eq.agrees(), &format!("equality case disagrees: {eq:?}"));
        out.require(label, eq.commutes == commuting, "commutation differs from construction");
        Ok(())
    }))
}

fn hansen_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    const EXPONENTS: [f64; 3] = [0.25, 0.5, 0.75];
    Ok(run_trials("hansen", cfg, |rng, out, label| {
        let n = random_dim(rng, cfg);
        let s = EXPONENTS[rng.random_range(0..EXPONENTS.len())];
        let a = corpus::random_psd(rng, n, n);
        let c = corpus::random_contraction(rng, n)?;
        out.at_least(label, "min_eigenvalue", hansen_gap(&a, &c, s)?.min_eigenvalue()?, -PSD_SLACK);

        let (p, q) = random_proper_projection(rng, n)?;
        let commuting = rng.random_bool(0.5);
        let b = if commuting {
            let x = corpus::random_psd(rng, n, n);
            let y = corpus::random_psd(rng, n, n);
            block_diagonal(&p, &q, &x, &y)?
        } else {
            corpus::random_psd(rng, n, n)
        };
        let gap = hansen_gap(&b, p.matrix(), s)?;
        out.at_least(label, "projection_min_eigenvalue", gap.min_eigenvalue()?, -PSD_SLACK);
        let eq = hansen_equality_case(&b, &p, s, EQUALITY_TOL)?;
        out.require(label, eq.agrees(), &format!("equality case disagrees: {eq:?}"));
        out.require(label, eq.commutes == commuting, "commutation differs from construction");
        Ok(())
    }))
}

fn lieb_ruskai_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let eps = default_eps_list();
    Ok(run_trials("lieb-ruskai", cfg, |rng, out, label| {
        let n = random_dim(rng, cfg);
        let (p, _) = random_proper_projection(rng, n)?;
        let a = corpus::random_hermitian(rng, n);
        let b = corpus::random_hermitian(rng, n);
        let c = CompressionMap::new(&p)?;
        let tr = lieb_ruskai_trace(&c, &a, &b, &eps)?;
        out.at_least(label, "min_eigenvalue", tr.min_eigenvalue(), -LOOSE_PSD_SLACK);
        out.at_least(label, "monotonicity", tr.monotonicity_slack, -LOOSE_PSD_SLACK);
        out.at_most(label, "last_step", tr.last_step, 1e-6);
        out.at_most(label, "pinv_discrepancy", tr.pinv_discrepancy, 1e-6);
        Ok(())
    }))
}

fn hankel_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    Ok(run_trials("hankel", cfg, |rng, out, label| {
        let f = corpus::random_mixed(rng, cfg.dim_max, SupportRange::SYMMETRIC)?;
        for n in 0..=4 {
            out.at_least(label, "hankel_min_eigenvalue", f.hankel(n)?.min_eigenvalue()?, -LOOSE_PSD_SLACK);
        }
        out.at_least(label, "variance_min_eigenvalue", f.variance()?.min_eigenvalue()?, -LOOSE_PSD_SLACK);
        Ok(())
    }))
}

/// `(p, q)` in `Omega` with `q <= MAX_EXPONENT`.
pub fn omega_pairs() -> Vec<(u32, u32)> {
    exponent_pairs().into_iter().filter(|&(p, q)| in_omega(p, q)).collect()
}

/// `(p, q)` outside `Omega` with `1 <= p <= q <= MAX_EXPONENT`.
pub fn non_omega_pairs() -> Vec<(u32, u32)> {
    exponent_pairs().into_iter().filter(|&(p, q)| !in_omega(p, q)).collect()
}

fn exponent_pairs() -> Vec<(u32, u32)> {
    (1..=MAX_EXPONENT)
        .flat_map(|p| (p..=MAX_EXPONENT).map(move |q| (p, q)))
        .collect()
}

fn search_outcome(label: &str, report: &SearchReport) -> Outcome {
    let mut out = Outcome::default();
    out.require(
        label,
        report.evaluated == report.trials,
        &format!("{} of {} trials skipped", report.skipped, report.trials),
    );
    out.at_least(label, "min_second_residual", report.min_second_residual, STRESS_MATCH_TOL);
    out.residual("max_first_residual", report.max_first_residual);
    out.require(
        label,
        report.nonspectral_matches == 0,
        &format!("{} non-spectral matches", report.nonspectral_matches),
    );
    if let Some(w) = &report.violation {
        out.fail(format!(
            "{label}: witness at trial {}: T = {:?}, F = {}",
            w.trial,
            w.t,
            w.f.to_json()
        ));
    }
    out
}

fn theorem_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let outcomes = omega_pairs()
        .into_iter()
        .map(|(p, q)| {
            let report = run_search(p, q, cfg.trials, cfg.seed, MATCH_TOL, random_odd_candidate(p, cfg.dim_max))?;
            Ok(search_outcome(&format!("({p}, {q})"), &report))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate("theorem", outcomes))
}

/// Real exponent pairs of the positive-case suite.
pub const POSITIVE_PAIRS: [(f64, f64); 2] = [(0.5, 2.0), (1.0, 3.0)];

fn positive_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let outcomes = POSITIVE_PAIRS
        .into_iter()
        .map(|(a, b)| {
            let report = run_positive_search(a, b, cfg.trials, cfg.seed, MATCH_TOL, random_positive_candidate(a, cfg.dim_max))?;
            Ok(search_outcome(&format!("({a}, {b})"), &report))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate("positive", outcomes))
}

fn grid_instance(p: u32, q: u32, tau: f64) -> Result<Outcome> {
    let label = format!("({p}, {q}, tau = {tau})");
    let mut out = Outcome::default();
    let params = solve_params(p, q, tau)?;
    let r = params.residuals();
    out.at_most(&label, "weights", r.weights, 1e-12);
    out.at_most(&label, "moment_p", r.moment_p, 1e-10);
    out.at_most(&label, "moment_q", r.moment_q, 1e-10);
    out.require(&label, params.validate(1e-12, 1e-10).is_ok(), "parameters invalid");
    out.at_most(&label, "determinant", params.determinant().abs(), 1e-9);

    let s = build_dilation_matrix(&params);
    for k in [p, q] {
        let tk = tau.powi(k as i32);
        let direct = s.powi(k).get(0, 0).re;
        out.at_most(&label, "s_power_entry", (direct - tk).abs() / tk.abs(), 1e-9);
        out.at_most(
            &label,
            "closed_form_power",
            s.powi(k).relative_distance(&dilation_power(&params, k))?,
            1e-12,
        );
    }
    let (_, f) = build_povm(&params, 1)?;
    out.require(&label, !f.is_spectral(1e-9), "F is spectral");
    let comm = leading_projection().commutator_norm(&s)?;
    out.at_least(&label, "commutator", comm, 1e-6);
    Ok(out)
}

fn counterexample_grid_suite() -> Result<SuiteReport> {
    let mut outcomes = Vec::new();
    for (p, q) in non_omega_pairs() {
        for tau in GRID_TAUS {
            outcomes.push(grid_instance(p, q, tau).unwrap_or_else(|e| {
                let mut o = Outcome::default();
                o.fail(format!("({p}, {q}, tau = {tau}): {e}"));
                o
            }));
        }
    }
    for (p, q) in omega_pairs() {
        let mut o = Outcome::default();
        o.require(
            &format!("({p}, {q})"),
            matches!(solve_params(p, q, 1.0), Err(OvmError::PairInOmega { .. })),
            "solver did not refuse a pair in Omega",
        );
        outcomes.push(o);
    }
    Ok(aggregate("counterexample-grid", outcomes))
}

/// Grid of the scalar obstruction search: weights and first support point.
pub const HOLDER_GRID_STEPS: usize = 200;
/// Points closer than this are treated as coincident.
pub const HOLDER_MIN_SEPARATION: f64 = 0.05;
pub const HOLDER_SUPPORT_BOUND: f64 = 3.0;

/// Minimum residual of `a l1^q + (1-a) l2^q = 1` over the grid, where `l2`
/// solves `a l1^p + (1-a) l2^p = 1` exactly (`p` odd), restricted to
/// `|l1 - l2| >= HOLDER_MIN_SEPARATION`. Also returns the smallest
/// Hölder gap seen.
pub fn holder_scan(p: u32, q: u32) -> (f64, f64) {
    let mut min_residual = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    let n = HOLDER_GRID_STEPS;
    for i in 1..n {
        let alpha = i as f64 / n as f64;
        let beta = 1.0 - alpha;
        for j in 0..=n {
            let l1 = -HOLDER_SUPPORT_BOUND + 2.0 * HOLDER_SUPPORT_BOUND * j as f64 / n as f64;
            let l2 = signed_root((1.0 - alpha * l1.powi(p as i32)) / beta, p);
            if (l1 - l2).abs() < HOLDER_MIN_SEPARATION {
                continue;
            }
            let mq = alpha * l1.powi(q as i32) + beta * l2.powi(q as i32);
            min_residual = min_residual.min((mq - 1.0).abs());
            min_gap = min_gap.min(holder_gap(alpha, l1, l2, p, q));
        }
    }
    (min_residual, min_gap)
}

fn holder_suite() -> Result<SuiteReport> {
    let outcomes = omega_pairs()
        .into_iter()
        .map(|(p, q)| {
            let label = format!("({p}, {q})");
            let mut out = Outcome::default();
            let (residual, gap) = holder_scan(p, q);
            out.at_least(&label, "min_q_residual", residual, STRESS_MATCH_TOL);
            out.at_least(&label, "holder_gap", gap, -1e-12);
            out
        })
        .collect();
    Ok(aggregate("holder", outcomes))
}

fn dilation_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    Ok(run_trials("dilation", cfg, |rng, out, label| {
        let f = corpus::random_mixed(rng, cfg.dim_max, SupportRange::SYMMETRIC)?;
        let d = dilate_minimal(&f)?;
        let spectral = f.is_spectral(1e-9);
        let commutes = d.p_commutes(1e-9);
        out.require(
            label,
            spectral == commutes,
            &format!("is_spectral = {spectral} but p_commutes = {commutes}"),
        );
        for k in 0..=6 {
            out.at_most(label, "moment_compression", d.moment(k)?.relative_distance(&f.moment(k)?)?, 1e-9);
        }
        let ranks = f
            .atoms()
            .iter()
            .map(|a| numerical_rank(&a.effect))
            .sum::<Result<usize>>()?;
        out.require(label, ranks == d.big_dim(), &format!("big_dim {} != rank sum {ranks}", d.big_dim()));
        let back = d.compress()?;
        let round_trip = back.len() == f.len()
            && back.atoms().iter().zip(f.atoms()).all(|(x, y)| {
                x.lambda == y.lambda && x.effect.approx_eq(&y.effect, 1e-9).unwrap_or(false)
            });
        out.require(label, round_trip, "compression does not reproduce F");
        let isometry = d.embedding().adjoint() * d.embedding();
        out.at_most(
            label,
            "isometry_defect",
            (&isometry - CMatrix::identity(f.dim(), f.dim())).norm(),
            1e-9,
        );
        Ok(())
    }))
}

/// Runs every suite in [`Suite::ALL`] order.
pub fn run_all(cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    Suite::ALL.iter().map(|s| s.run(cfg)).collect()
}
