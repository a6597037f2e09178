//! Explicit non-spectral measures that match two operator moments.
//!
//! For every `(p, q)` with `p <= q` outside `Omega` there are weights
//! `alpha + beta = 1` in `(0, 1)` and distinct points `lambda_1, lambda_2`
//! with
//!
//! ```text
//! alpha lambda_1^p + beta lambda_2^p = tau^p
//! alpha lambda_1^q + beta lambda_2^q = tau^q
//! ```
//!
//! so `T = tau I` and `F = alpha delta_{lambda_1} I + beta delta_{lambda_2} I`
//! agree at exponents `p` and `q` although `F` is not spectral. The system is
//! solved at `tau = 1` and the support is scaled by `tau` afterwards.

use serde::{Deserialize, Serialize};

use crate::characterization::in_omega;
use crate::error::{OvmError, Result};
use crate::hermitian::{CMatrix, HermitianMatrix};
use crate::povm::FiniteOVM;

/// Stopping width for the bisection on `x`.
pub const BISECTION_XTOL: f64 = 1e-14;
pub const BISECTION_MAX_ITER: usize = 200;

/// Free parameter `lambda_1 > 1` used when `p` and `q` have different
/// parity or are both odd.
pub const DEFAULT_LAMBDA1: f64 = 2.0;

/// Which branch of the construction produced a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// `p = q`.
    EqualExponents,
    /// `p`, `q` both even.
    BothEven,
    /// `p < q`, `p` even, `q` odd.
    EvenOdd,
    /// `p < q`, both odd.
    BothOdd,
}

impl Case {
    pub fn classify(p: u32, q: u32) -> Result<Self> {
        if p == 0 || p > q {
            return Err(OvmError::InvalidArgument(format!(
                "exponents must satisfy 1 <= p <= q, got ({p}, {q})"
            )));
        }
        if in_omega(p, q) {
            return Err(OvmError::PairInOmega { p, q });
        }
        Ok(match (p == q, p % 2 == 0, q % 2 == 0) {
            (true, _, _) => Case::EqualExponents,
            (false, true, true) => Case::BothEven,
            (false, true, false) => Case::EvenOdd,
            (false, false, false) => Case::BothOdd,
            (false, false, true) => unreachable!("pair in Omega"),
        })
    }
}

/// Solution of the two-moment system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    pub p: u32,
    pub q: u32,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Residuals of the three equations; the moment ones are relative to
/// `|tau|^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationResiduals {
    pub weights: f64,
    pub moment_p: f64,
    pub moment_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub lambda1: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            lambda1: DEFAULT_LAMBDA1,
        }
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(OvmError::Bisection(format!(
            "no sign change on [{lo}, {hi}]: f = {f_lo:e}, {f_hi:e}"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(OvmError::Bisection(format!(
        "no convergence after {max_iter} iterations on [{lo}, {hi}]"
    )))
}

pub fn solve_params(p: u32, q: u32, tau: f64) -> Result<CounterexampleParams> {
    solve_params_with(p, q, tau, SolveOptions::default())
}

pub fn solve_params_with(p: u32, q: u32, tau: f64, opts: SolveOptions) -> Result<CounterexampleParams> {
    if tau == 0.0 || !tau.is_finite() {
        return Err(OvmError::InvalidArgument(format!(
            "tau must be finite and nonzero, got {tau}"
        )));
    }
    let (alpha, beta, l1, l2) = match Case::classify(p, q)? {
        Case::EqualExponents => (0.5, 0.5, 0.0, 2f64.powf(1.0 / f64::from(p))),
        Case::BothEven => (0.5, 0.5, -1.0, 1.0),
        case @ (Case::EvenOdd | Case::BothOdd) => {
            let l1 = opts.lambda1;
            if !(l1 > 1.0 && l1.is_finite()) {
                return Err(OvmError::InvalidArgument(format!(
                    "lambda1 must exceed 1, got {l1}"
                )));
            }
            let (pi, qi) = (p as i32, q as i32);
            let target = (1.0 - l1.powi(pi)) / (1.0 - l1.powi(qi));
            let x = if case == Case::EvenOdd {
                let phi = |x: f64| (1.0 - x.powi(pi)) / (1.0 + x.powi(qi)) - target;
                bisect(phi, 0.0, 1.0, BISECTION_XTOL, BISECTION_MAX_ITER)?
            } else {
                let psi = |x: f64| (1.0 + x.powi(pi)) / (1.0 + x.powi(qi)) - target;
                let mut upper = 2.0;
                while psi(upper) > 0.0 {
                    upper *= 2.0;
                    if upper > 1e12 {
                        return Err(OvmError::Bisection(format!(
                            "no bracket found on (1, {upper})"
                        )));
                    }
                }
                bisect(psi, 1.0, upper, BISECTION_XTOL, BISECTION_MAX_ITER)?
            };
            let l2 = -x;
            let a = 1.0;
            let b = a * (l1.powi(pi) - 1.0) / (1.0 - l2.powi(pi));
            (a / (a + b), b / (a + b), l1, l2)
        }
    };
    Ok(CounterexampleParams {
        p,
        q,
        tau,
        alpha,
        beta,
        lambda1: tau * l1,
        lambda2: tau * l2,
    })
}

impl CounterexampleParams {
    pub fn moment(&self, k: u32) -> f64 {
        let k = k as i32;
        self.alpha * self.lambda1.powi(k) + self.beta * self.lambda2.powi(k)
    }

    pub fn residuals(&self) -> EquationResiduals {
        let rel = |k: u32| (self.moment(k) - self.tau.powi(k as i32)).abs() / self.tau.abs().powi(k as i32);
        EquationResiduals {
            weights: (self.alpha + self.beta - 1.0).abs(),
            moment_p: rel(self.p),
            moment_q: rel(self.q),
        }
    }

    /// `D(l1, l2) = (l1^p - 1)(l2^q - 1) - (l2^p - 1)(l1^q - 1)` on the
    /// support rescaled to `tau = 1`.
    pub fn determinant(&self) -> f64 {
        let (l1, l2) = (self.lambda1 / self.tau, self.lambda2 / self.tau);
        let (p, q) = (self.p as i32, self.q as i32);
        (l1.powi(p) - 1.0) * (l2.powi(q) - 1.0) - (l2.powi(p) - 1.0) * (l1.powi(q) - 1.0)
    }

    /// Checks the structural invariants within the given tolerances.
    pub fn validate(&self, weight_tol: f64, moment_tol: f64) -> Result<()> {
        let r = self.residuals();
        let in_unit = |w: f64| w > 0.0 && w < 1.0;
        if !in_unit(self.alpha) || !in_unit(self.beta) {
            return Err(OvmError::InvalidArgument(format!(
                "weights ({}, {}) not in (0, 1)",
                self.alpha, self.beta
            )));
        }
        if self.lambda1 == self.lambda2 {
            return Err(OvmError::InvalidArgument("support points coincide".into()));
        }
        if r.weights > weight_tol || r.moment_p > moment_tol || r.moment_q > moment_tol {
            return Err(OvmError::InvalidArgument(format!(
                "equation residuals too large: {r:?}"
            )));
        }
        Ok(())
    }
}

/// `T = tau I_dim` and `F = alpha delta_{lambda_1} I + beta delta_{lambda_2} I`.
pub fn build_povm(params: &CounterexampleParams, dim: usize) -> Result<(HermitianMatrix, FiniteOVM)> {
    let id = HermitianMatrix::identity(dim);
    let f = FiniteOVM::new(
        dim,
        [
            (params.lambda1, id.scale(params.alpha)),
            (params.lambda2, id.scale(params.beta)),
        ],
    )?;
    Ok((id.scale(params.tau), f))
}

/// The 2x2 dilating operator
/// `[[a l1 + b l2, sqrt(ab)(l1 - l2)], [sqrt(ab)(l1 - l2), b l1 + a l2]]`.
pub fn build_dilation_matrix(params: &CounterexampleParams) -> HermitianMatrix {
    dilation_power(params, 1)
}

/// Closed form of the `n`-th power of [`build_dilation_matrix`].
pub fn dilation_power(params: &CounterexampleParams, n: u32) -> HermitianMatrix {
    let (a, b) = (params.alpha, params.beta);
    let l1n = params.lambda1.powi(n as i32);
    let l2n = params.lambda2.powi(n as i32);
    let off = (a * b).sqrt() * (l1n - l2n);
    HermitianMatrix::from_real_rows(&[vec![a * l1n + b * l2n, off], vec![off, b * l1n + a * l2n]])
        .expect("2x2 matrix")
}

/// `diag(1, 0)` on `C^2`: projection onto the first coordinate.
pub fn leading_projection() -> HermitianMatrix {
    HermitianMatrix::diag(&[1.0, 0.0])
}

/// Fibonacci numbers `f_0..=f_n` with `f_0 = 0`, `f_1 = 1`.
pub fn fibonacci_numbers(n: usize) -> Vec<f64> {
    let mut f = vec![0.0, 1.0];
    while f.len() <= n {
        let k = f.len();
        f.push(f[k - 1] + f[k - 2]);
    }
    f.truncate(n + 1);
    f
}

pub fn golden_ratio() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// `T = 1`, `S = [[0, 1], [1, 1]]` and the compressed measure
/// `phi^2/(1+phi^2) delta_{1-phi} + 1/(1+phi^2) delta_phi`.
#[derive(Debug, Clone)]
pub struct FibonacciExample {
    pub t: HermitianMatrix,
    pub s: HermitianMatrix,
    pub p: HermitianMatrix,
    pub f: FiniteOVM,
}

pub fn fibonacci_example() -> FibonacciExample {
    let phi = golden_ratio();
    let z = 1.0 + phi * phi;
    FibonacciExample {
        t: HermitianMatrix::scalar(1.0),
        s: HermitianMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]).expect("2x2"),
        p: leading_projection(),
        f: FiniteOVM::scalar([(1.0 - phi, phi * phi / z), (phi, 1.0 / z)]).expect("valid weights"),
    }
}

/// `S = [[0, T], [T, T]]`, i.e. `[[0, 1], [1, 1]] (x) T`.
pub fn tensor_operator(t: &HermitianMatrix) -> Result<HermitianMatrix> {
    if t.frobenius_norm() == 0.0 {
        return Err(OvmError::InvalidArgument(
            "T must be nonzero, otherwise P commutes with S".into(),
        ));
    }
    let base = HermitianMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]])?;
    Ok(base.kron(t))
}

/// `S^n = [[f_{n-1} T^n, f_n T^n], [f_n T^n, f_{n+1} T^n]]` for `n >= 1`.
pub fn tensor_example(t: &HermitianMatrix, n: u32) -> Result<HermitianMatrix> {
    if n == 0 {
        return Err(OvmError::InvalidArgument("power must be positive".into()));
    }
    tensor_operator(t)?;
    let fib = fibonacci_numbers(n as usize + 1);
    let (fm, f0, fp) = (fib[n as usize - 1], fib[n as usize], fib[n as usize + 1]);
    let tn = t.powi(n).into_matrix();
    let d = t.dim();
    let mut m = CMatrix::zeros(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).copy_from(&tn.scale(fm));
    m.view_mut((0, d), (d, d)).copy_from(&tn.scale(f0));
    m.view_mut((d, 0), (d, d)).copy_from(&tn.scale(f0));
    m.view_mut((d, d), (d, d)).copy_from(&tn.scale(fp));
    HermitianMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterization::{certify_two_moment, MATCH_TOL};

    /// Substitution oracle for the moment system.
    fn substitute(alpha: f64, l1: f64, l2: f64, k: i32) -> f64 {
        alpha * l1.powi(k) + (1.0 - alpha) * l2.powi(k)
    }

    #[test]
    fn frozen_fixture_values_satisfy_the_system() {
        // exact roots: 3x^3 + 7x^2 - 4 at 2/3 and x^3 - 7x - 6 at 3
        let x: f64 = 2.0 / 3.0;
        assert!((3.0 * x * x * x + 7.0 * x * x - 4.0).abs() < 1e-15);
        assert_eq!(3f64.powi(3) - 7.0 * 3.0 - 6.0, 0.0);
        assert!((substitute(5.0 / 32.0, 2.0, -2.0 / 3.0, 2) - 1.0).abs() < 1e-15);
        assert!((substitute(5.0 / 32.0, 2.0, -2.0 / 3.0, 3) - 1.0).abs() < 1e-15);
        assert!((substitute(0.8, 2.0, -3.0, 1) - 1.0).abs() < 1e-15);
        assert!((substitute(0.8, 2.0, -3.0, 3) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_three_fixture() {
        let c = solve_params(2, 3, 1.0).unwrap();
        assert!((c.alpha - 5.0 / 32.0).abs() < 1e-12);
        assert!((c.beta - 27.0 / 32.0).abs() < 1e-12);
        assert_eq!(c.lambda1, 2.0);
        assert!((c.lambda2 + 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_three_fixture() {
        let c = solve_params(1, 3, 1.0).unwrap();
        assert!((c.alpha - 0.8).abs() < 1e-12);
        assert!((c.beta - 0.2).abs() < 1e-12);
        assert_eq!(c.lambda1, 2.0);
        assert!((c.lambda2 + 3.0).abs() < 1e-12);
    }

    #[test]
    fn both_even_fixture() {
        let c = solve_params(2, 4, 1.0).unwrap();
        assert_eq!((c.lambda1, c.lambda2, c.alpha, c.beta), (-1.0, 1.0, 0.5, 0.5));
    }

    #[test]
    fn equal_exponents_scaled() {
        let c = solve_params(2, 2, 2.0).unwrap();
        assert!((c.moment(2) - 4.0).abs() < 1e-12);
        assert_eq!(c.lambda1, 0.0);
    }

    #[test]
    fn omega_pairs_are_refused() {
        assert_eq!(solve_params(1, 2, 1.0).unwrap_err(), OvmError::PairInOmega { p: 1, q: 2 });
        assert!(solve_params(3, 8, 1.0).is_err());
        assert!(solve_params(3, 2, 1.0).is_err());
        assert!(solve_params(2, 3, 0.0).is_err());
    }

    #[test]
    fn custom_lambda1() {
        let c = solve_params_with(2, 5, 1.0, SolveOptions { lambda1: 1.5 }).unwrap();
        c.validate(1e-12, 1e-10).unwrap();
        assert!(solve_params_with(2, 5, 1.0, SolveOptions { lambda1: 0.5 }).is_err());
    }

    #[test]
    fn bisection_brackets() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-14, 200).is_err());
    }

    #[test]
    fn built_povm_matches_two_moments() {
        let c = solve_params(2, 3, 1.0).unwrap();
        let (t, f) = build_povm(&c, 1).unwrap();
        let v = certify_two_moment(&t, &f, 2, 3, MATCH_TOL).unwrap();
        assert_eq!(v.moments_match, vec![true, true]);
        assert!(!v.direct_spectral);
        // first moments differ on purpose: 10/32 - 18/32
        assert!((f.moment(1).unwrap().get(0, 0).re + 0.25).abs() < 1e-12);

        let (t, f) = build_povm(&solve_params(2, 4, 1.0).unwrap(), 3).unwrap();
        assert!(f.moment(2).unwrap().approx_eq(&t, 1e-14).unwrap());
        assert!(f.moment(4).unwrap().approx_eq(&t, 1e-14).unwrap());
        assert!(!f.is_spectral(1e-10));
    }

    #[test]
    fn dilation_matrix_fixtures() {
        let s = build_dilation_matrix(&solve_params(2, 3, 1.0).unwrap());
        let r = 15f64.sqrt() / 4.0;
        let expected = HermitianMatrix::from_real_rows(&[vec![-0.25, r], vec![r, 19.0 / 12.0]]).unwrap();
        assert!(s.approx_eq(&expected, 1e-12).unwrap());
        assert!((s.powi(2).get(0, 0).re - 1.0).abs() < 1e-12);
        assert!((s.powi(3).get(0, 0).re - 1.0).abs() < 1e-12);

        let s = build_dilation_matrix(&solve_params(2, 4, 1.0).unwrap());
        let neg_swap = HermitianMatrix::from_real_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(s.approx_eq(&neg_swap, 1e-15).unwrap());
    }

    #[test]
    fn dilation_matrix_eigenvalues_are_support() {
        for (p, q) in [(2, 3), (1, 3), (2, 4), (4, 4), (3, 5)] {
            let c = solve_params(p, q, 1.0).unwrap();
            let ev = build_dilation_matrix(&c).eigenvalues().unwrap();
            let (lo, hi) = (c.lambda1.min(c.lambda2), c.lambda1.max(c.lambda2));
            assert!((ev[0] - lo).abs() < 1e-12 && (ev[1] - hi).abs() < 1e-12);
        }
    }

    #[test]
    fn fibonacci_weights() {
        let ex = fibonacci_example();
        let phi = golden_ratio();
        let w: Vec<f64> = ex.f.atoms().iter().map(|a| a.effect.get(0, 0).re).collect();
        assert!((w[0] - phi * phi / (1.0 + phi * phi)).abs() < 1e-15);
        assert!((w[1] - 1.0 / (1.0 + phi * phi)).abs() < 1e-15);
        assert!((w[0] + w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fibonacci_sequence() {
        assert_eq!(fibonacci_numbers(7), vec![0.0, 1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0]);
        assert_eq!(fibonacci_numbers(0), vec![0.0]);
    }

    #[test]
    fn tensor_powers() {
        let t = HermitianMatrix::diag(&[2.0, -1.0]);
        let t2 = t.powi(2).into_matrix();
        let t3 = t.powi(3).into_matrix();
        let block = |m: &CMatrix, a: f64, b: f64, c: f64| {
            let mut out = CMatrix::zeros(4, 4);
            out.view_mut((0, 0), (2, 2)).copy_from(&m.scale(a));
            out.view_mut((0, 2), (2, 2)).copy_from(&m.scale(b));
            out.view_mut((2, 0), (2, 2)).copy_from(&m.scale(b));
            out.view_mut((2, 2), (2, 2)).copy_from(&m.scale(c));
            HermitianMatrix::new(out).unwrap()
        };
        assert!(tensor_example(&t, 2).unwrap().approx_eq(&block(&t2, 1.0, 1.0, 2.0), 1e-14).unwrap());
        assert!(tensor_example(&t, 3).unwrap().approx_eq(&block(&t3, 1.0, 2.0, 3.0), 1e-14).unwrap());
        let id = HermitianMatrix::identity(2).into_matrix();
        assert!(tensor_example(&HermitianMatrix::identity(2), 1)
            .unwrap()
            .approx_eq(&block(&id, 0.0, 1.0, 1.0), 0.0)
            .unwrap());
        assert!(tensor_example(&HermitianMatrix::zeros(2), 2).is_err());
    }
}
