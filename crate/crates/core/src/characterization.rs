//! Two-moment spectrality certificates.
//!
//! Given a selfadjoint `T` and a semispectral `F` with `T^p = M_p(F)` and
//! `T^q = M_q(F)`, `F` must be the spectral measure of `T` exactly when
//! `(p, q)` lies in `Omega = {p < q, p odd, q even}`. In the positive case
//! (support in `[0, inf)`, `T >= 0`) any two distinct positive real
//! exponents suffice. The certifiers below evaluate both sides and report
//! whether the outcome is consistent with these statements.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, SupportRange, TrialRng};
use crate::error::{OvmError, Result};
use crate::hermitian::HermitianMatrix;
use crate::povm::FiniteOVM;

/// Default relative tolerance for declaring two moments equal.
pub const MATCH_TOL: f64 = 1e-9;

/// `p < q`, `p` odd and `q` even.
pub fn in_omega(p: u32, q: u32) -> bool {
    p < q && p % 2 == 1 && q % 2 == 0
}

/// Outcome of a two-moment certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// One flag per requested exponent, in request order.
    pub moments_match: Vec<bool>,
    pub pair_in_omega: bool,
    pub direct_spectral: bool,
    /// False only if the exponent pair is covered by the characterization,
    /// all moments match, and `F` is nevertheless not the spectral
    /// measure of `T`.
    pub theorem_consistent: bool,
    /// `|T^k - M_k(F)|_F` per requested exponent.
    pub residuals: Vec<f64>,
}

impl Verdict {
    pub fn all_match(&self) -> bool {
        self.moments_match.iter().all(|&m| m)
    }

    fn finish(moments_match: Vec<bool>, residuals: Vec<f64>, pair_in_omega: bool, direct_spectral: bool) -> Self {
        let all = moments_match.iter().all(|&m| m);
        Self {
            theorem_consistent: !(pair_in_omega && all && !direct_spectral),
            moments_match,
            pair_in_omega,
            direct_spectral,
            residuals,
        }
    }
}

fn check_dims(t: &HermitianMatrix, f: &FiniteOVM) -> Result<()> {
    if t.dim() != f.dim() {
        return Err(OvmError::DimensionMismatch {
            expected: f.dim(),
            found: t.dim(),
        });
    }
    Ok(())
}

/// `F` is spectral and `T^k = M_k(F)` for `k = 0..=max_k`.
fn is_spectral_measure_of(t: &HermitianMatrix, f: &FiniteOVM, max_k: u32, tol: f64) -> Result<bool> {
    if !f.is_spectral(tol) {
        return Ok(false);
    }
    for k in 0..=max_k {
        if !t.powi(k).approx_eq(&f.moment(k)?, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Compares `T^k` with `M_k(F)` for `k = p, q`.
///
/// When both match and `(p, q)` is in `Omega`, `direct_spectral` also
/// requires `T^k = M_k(F)` for every `k <= 2 max(q, m)` with `m` the atom
/// count, which pins `F` down as the spectral measure of `T`.
pub fn certify_two_moment(t: &HermitianMatrix, f: &FiniteOVM, p: u32, q: u32, tol: f64) -> Result<Verdict> {
    check_dims(t, f)?;
    if p == 0 || p > q {
        return Err(OvmError::InvalidArgument(format!(
            "exponents must satisfy 1 <= p <= q, got ({p}, {q})"
        )));
    }
    let mut matches = Vec::with_capacity(2);
    let mut residuals = Vec::with_capacity(2);
    for k in [p, q] {
        let tk = t.powi(k);
        let mk = f.moment(k)?;
        residuals.push(tk.distance(&mk)?);
        matches.push(tk.approx_eq(&mk, tol)?);
    }
    let pair_in_omega = in_omega(p, q);
    let direct_spectral = if pair_in_omega && matches.iter().all(|&m| m) {
        let max_k = 2 * q.max(f.len() as u32);
        is_spectral_measure_of(t, f, max_k, tol)?
    } else {
        f.is_spectral(tol)
    };
    Ok(Verdict::finish(matches, residuals, pair_in_omega, direct_spectral))
}

/// The unique selfadjoint `T` with `T^p = M_p(F)` for odd `p`.
pub fn recover_t_odd(f: &FiniteOVM, p: u32) -> Result<HermitianMatrix> {
    if p % 2 == 0 {
        return Err(OvmError::InvalidArgument(format!(
            "p = {p} is even: selfadjoint p-th roots are not unique"
        )));
    }
    f.moment(p)?.odd_root(p)
}

/// Positive-case certificate with real exponents `alpha != beta`.
///
/// `pair_in_omega` is always true here: the characterization holds for
/// every pair of distinct positive exponents.
pub fn certify_positive(
    t: &HermitianMatrix,
    f: &FiniteOVM,
    alpha: f64,
    beta: f64,
    tol: f64,
) -> Result<Verdict> {
    check_dims(t, f)?;
    for r in [alpha, beta] {
        if !(r.is_finite() && r > 0.0) {
            return Err(OvmError::InvalidArgument(format!(
                "exponents must be positive, got {r}"
            )));
        }
    }
    if alpha == beta {
        return Err(OvmError::InvalidArgument(
            "exponents must be distinct".into(),
        ));
    }
    if !t.is_psd(1e-10) {
        return Err(OvmError::NotPsd(t.min_eigenvalue()?));
    }
    if let Some(a) = f.atoms().iter().find(|a| a.lambda < 0.0) {
        return Err(OvmError::NegativeSupport(a.lambda));
    }
    let mut matches = Vec::with_capacity(2);
    let mut residuals = Vec::with_capacity(2);
    for r in [alpha, beta] {
        let tr = t.powf_psd(r)?;
        let mr = f.moment_real(r)?;
        residuals.push(tr.distance(&mr)?);
        matches.push(tr.approx_eq(&mr, tol)?);
    }
    let direct_spectral = if matches.iter().all(|&m| m) {
        let max_k = 2 * (f.len() as u32).max(1);
        is_spectral_measure_of(t, f, max_k, tol)?
    } else {
        f.is_spectral(tol)
    };
    Ok(Verdict::finish(matches, residuals, true, direct_spectral))
}

/// `(a l1^q + b l2^q)^{p/q} - |a l1^p + b l2^p|` with `b = 1 - a`, which is
/// nonnegative for even `q` by Hölder's inequality.
pub fn holder_gap(alpha: f64, lambda1: f64, lambda2: f64, p: u32, q: u32) -> f64 {
    let beta = 1.0 - alpha;
    let mp = alpha * lambda1.powi(p as i32) + beta * lambda2.powi(p as i32);
    let mq = alpha * lambda1.powi(q as i32) + beta * lambda2.powi(q as i32);
    mq.powf(f64::from(p) / f64::from(q)) - mp.abs()
}

/// A candidate `(T, F)` that produced a noteworthy verdict.
#[derive(Debug, Clone)]
pub struct Witness {
    pub trial: u64,
    pub t: HermitianMatrix,
    pub f: FiniteOVM,
    pub verdict: Verdict,
}

/// Aggregate of a seeded search.
#[derive(Debug, Clone)]
pub struct SearchReport {
    pub trials: u64,
    pub evaluated: u64,
    pub skipped: u64,
    /// Candidates with all moments matching while `F` is not spectral.
    pub nonspectral_matches: u64,
    pub first_match: Option<Witness>,
    /// First verdict with `theorem_consistent = false`.
    pub violation: Option<Witness>,
    /// Smallest residual at the second exponent over evaluated trials.
    pub min_second_residual: f64,
    /// Largest residual at the first exponent over evaluated trials.
    pub max_first_residual: f64,
}

enum Exponents {
    Integer(u32, u32),
    Real(f64, f64),
}

/// Evaluates `trials` candidates produced by `generate(rng, trial)`; every
/// trial gets its own stream from `(seed, trial)`. A generator returning
/// `None` skips the trial.
pub fn run_search<G>(p: u32, q: u32, trials: u64, seed: u64, tol: f64, generate: G) -> Result<SearchReport>
where
    G: Fn(&mut TrialRng, u64) -> Result<Option<(HermitianMatrix, FiniteOVM)>> + Sync,
{
    search_impl(Exponents::Integer(p, q), trials, seed, tol, generate)
}

/// Positive-case analogue of [`run_search`] with real exponents.
pub fn run_positive_search<G>(
    alpha: f64,
    beta: f64,
    trials: u64,
    seed: u64,
    tol: f64,
    generate: G,
) -> Result<SearchReport>
where
    G: Fn(&mut TrialRng, u64) -> Result<Option<(HermitianMatrix, FiniteOVM)>> + Sync,
{
    search_impl(Exponents::Real(alpha, beta), trials, seed, tol, generate)
}

fn search_impl<G>(exps: Exponents, trials: u64, seed: u64, tol: f64, generate: G) -> Result<SearchReport>
where
    G: Fn(&mut TrialRng, u64) -> Result<Option<(HermitianMatrix, FiniteOVM)>> + Sync,
{
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = corpus::trial_rng(seed, trial);
            let Some((t, f)) = generate(&mut rng, trial)? else {
                return Ok(None);
            };
            let verdict = match exps {
                Exponents::Integer(p, q) => certify_two_moment(&t, &f, p, q, tol)?,
                Exponents::Real(a, b) => certify_positive(&t, &f, a, b, tol)?,
            };
            Ok(Some(Witness { trial, t, f, verdict }))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = SearchReport {
        trials,
        evaluated: 0,
        skipped: 0,
        nonspectral_matches: 0,
        first_match: None,
        violation: None,
        min_second_residual: f64::INFINITY,
        max_first_residual: 0.0,
    };
    for outcome in outcomes {
        let Some(w) = outcome else {
            report.skipped += 1;
            continue;
        };
        report.evaluated += 1;
        report.max_first_residual = report.max_first_residual.max(w.verdict.residuals[0]);
        report.min_second_residual = report.min_second_residual.min(w.verdict.residuals[1]);
        if w.verdict.all_match() && !w.f.is_spectral(tol) {
            report.nonspectral_matches += 1;
            if report.first_match.is_none() {
                report.first_match = Some(w.clone());
            }
        }
        if !w.verdict.theorem_consistent && report.violation.is_none() {
            report.violation = Some(w);
        }
    }
    Ok(report)
}

/// Random non-spectral `F` paired with `T = M_p(F)^{1/p}`; even `p` skips.
pub fn random_odd_candidate(
    p: u32,
    dim_max: usize,
) -> impl Fn(&mut TrialRng, u64) -> Result<Option<(HermitianMatrix, FiniteOVM)>> + Sync {
    move |rng, _| {
        if p % 2 == 0 {
            return Ok(None);
        }
        let f = corpus::random_nonspectral(rng, dim_max, SupportRange::SYMMETRIC)?;
        let t = recover_t_odd(&f, p)?;
        Ok(Some((t, f)))
    }
}

/// Random non-spectral `F` on `[0, inf)` with `T = M_alpha(F)^{1/alpha}`.
pub fn random_positive_candidate(
    alpha: f64,
    dim_max: usize,
) -> impl Fn(&mut TrialRng, u64) -> Result<Option<(HermitianMatrix, FiniteOVM)>> + Sync {
    move |rng, _| {
        let f = corpus::random_nonspectral(rng, dim_max, SupportRange::POSITIVE)?;
        let t = f.moment_real(alpha)?.powf_psd(1.0 / alpha)?;
        Ok(Some((t, f)))
    }
}

/// Random search for a verdict contradicting the characterization.
pub fn search_violation(p: u32, q: u32, trials: u64, seed: u64, dim_max: usize) -> Result<Option<Witness>> {
    Ok(run_search(p, q, trials, seed, MATCH_TOL, random_odd_candidate(p, dim_max))?.violation)
}
