//! Kadison, Hansen and Lieb-Ruskai inequalities as PSD gaps.
//!
//! Every gap is returned as a Hermitian matrix that should be positive
//! semidefinite up to rounding; callers inspect its minimum eigenvalue.
//! Zero gaps are matched against the equality cases: commutation of the
//! compressing projection with the operator.

use serde::{Deserialize, Serialize};

use crate::dilation::NaimarkDilation;
use crate::error::{OvmError, Result};
use crate::hermitian::{CMatrix, HermitianMatrix, Interval};

/// Slack on the spectral norm of a contraction.
pub const CONTRACTION_SLACK: f64 = 1e-12;
/// Eigenvalue cutoff of the pseudoinverse oracle.
pub const PINV_THRESHOLD: f64 = 1e-10;
/// Frobenius norm below which a gap or commutator counts as zero.
pub const EQUALITY_TOL: f64 = 1e-8;
/// Relative eigenvalue cutoff below which `t^s` is evaluated as `0^s = 0`.
pub const ZERO_EIGENVALUE_CUTOFF: f64 = 1e-12;

/// `ε = 10^-2, ..., 10^-12`.
pub fn default_eps_list() -> Vec<f64> {
    (2..=12).map(|k| 10f64.powi(-k)).collect()
}

fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// The compression `Φ(X) = R* X R` onto the range of a projection, where
/// the columns of `R` are an orthonormal basis of `ran P`.
#[derive(Debug, Clone)]
pub struct CompressionMap {
    p: HermitianMatrix,
    range: CMatrix,
}

impl CompressionMap {
    pub fn new(p: &HermitianMatrix) -> Result<Self> {
        if !p.is_projection(1e-10) {
            return Err(OvmError::NotProjection(p.projection_defect()));
        }
        let dec = p.eig()?;
        let cols: Vec<usize> = (0..p.dim()).filter(|&i| dec.eigenvalues[i] > 0.5).collect();
        if cols.is_empty() {
            return Err(OvmError::InvalidArgument("projection has empty range".into()));
        }
        let range = dec.eigenvectors.select_columns(&cols);
        Ok(Self { p: p.clone(), range })
    }

    /// Compression along an isometry `V`, so that `Φ(X) = V* X V` in the
    /// coordinates of the small space.
    pub fn from_isometry(v: &CMatrix) -> Result<Self> {
        let gram = v.adjoint() * v;
        let defect = (&gram - CMatrix::identity(v.ncols(), v.ncols())).norm();
        if defect > 1e-9 {
            return Err(OvmError::NotIsometry(defect));
        }
        let p = HermitianMatrix::new(v * v.adjoint())?;
        Ok(Self { p, range: v.clone() })
    }

    pub fn projection(&self) -> &HermitianMatrix {
        &self.p
    }

    pub fn range_basis(&self) -> &CMatrix {
        &self.range
    }

    pub fn big_dim(&self) -> usize {
        self.range.nrows()
    }

    pub fn rank(&self) -> usize {
        self.range.ncols()
    }

    pub fn action(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        x.congruence(&self.range)
    }

    /// `R* X R` for a matrix that need not be Hermitian.
    pub fn action_general(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.nrows() != self.big_dim() || x.ncols() != self.big_dim() {
            return Err(OvmError::DimensionMismatch {
                expected: self.big_dim(),
                found: x.nrows(),
            });
        }
        Ok(self.range.adjoint() * x * &self.range)
    }
}

/// `Φ(A²) - Φ(A)²`.
pub fn kadison_gap(c: &CompressionMap, a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let phi_a = c.action(a)?;
    Ok(&c.action(&a.square())? - &phi_a.square())
}

/// `R* A (I - P) A R`, the same gap written as a Gram matrix.
pub fn kadison_gap_algebraic(c: &CompressionMap, a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = c.big_dim();
    let ar = a.matrix() * c.range_basis();
    let q = CMatrix::identity(n, n) - c.projection().matrix();
    HermitianMatrix::new(ar.adjoint() * q * ar)
}

/// Outcome of an equality-case test: whether the gap vanished and whether
/// the projection commutes with the operator. The two should agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualityCase {
    pub gap_zero: bool,
    pub commutes: bool,
}

impl EqualityCase {
    pub fn agrees(&self) -> bool {
        self.gap_zero == self.commutes
    }
}

pub fn kadison_equality_case(c: &CompressionMap, a: &HermitianMatrix, tol: f64) -> Result<EqualityCase> {
    Ok(EqualityCase {
        gap_zero: kadison_gap(c, a)?.frobenius_norm() <= tol,
        commutes: c.projection().commutator_norm(a)? <= tol,
    })
}

fn check_exponent(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(OvmError::ExponentOutOfRange(s))
    }
}

/// `f(C* A C) - C* f(A) C` with `f(t) = t^s`. `C` may be rectangular,
/// mapping the small space into the space of `A`.
pub fn hansen_gap(a: &HermitianMatrix, c: &CMatrix, s: f64) -> Result<HermitianMatrix> {
    check_exponent(s)?;
    let min = a.min_eigenvalue()?;
    if !a.is_psd(1e-10) {
        return Err(OvmError::NotPsd(min));
    }
    let norm = HermitianMatrix::new(c.adjoint() * c)?.spectral_norm()?.sqrt();
    if norm > 1.0 + CONTRACTION_SLACK {
        return Err(OvmError::NotContraction(norm));
    }
    let lhs = power_snapped(&a.congruence(c)?, s)?;
    let rhs = power_snapped(a, s)?.congruence(c)?;
    Ok(&lhs - &rhs)
}

/// `t^s` on a PSD matrix with eigenvalues below the relative cutoff sent
/// to zero; `t^s` is not Lipschitz at 0, so rounding noise on a kernel
/// would otherwise be amplified to `eps^s`.
fn power_snapped(a: &HermitianMatrix, s: f64) -> Result<HermitianMatrix> {
    let cutoff = ZERO_EIGENVALUE_CUTOFF * (1.0 + a.spectral_norm()?);
    a.apply_function(|t| if t <= cutoff { 0.0 } else { t.powf(s) }, Interval::NONNEGATIVE)
}

/// Equality case of Hansen's inequality for a projection `P != I`.
pub fn hansen_equality_case(a: &HermitianMatrix, p: &HermitianMatrix, s: f64, tol: f64) -> Result<EqualityCase> {
    if !p.is_projection(1e-10) {
        return Err(OvmError::NotProjection(p.projection_defect()));
    }
    if p.approx_eq(&HermitianMatrix::identity(p.dim()), 1e-10)? {
        return Err(OvmError::InvalidArgument(
            "equality case requires a projection different from the identity".into(),
        ));
    }
    let gap = hansen_gap(a, p.matrix(), s)?;
    Ok(EqualityCase {
        gap_zero: gap.frobenius_norm() <= tol,
        commutes: p.commutator_norm(a)? <= tol,
    })
}

/// Evaluation of the Lieb-Ruskai gap along a decreasing list of `ε`.
#[derive(Debug, Clone)]
pub struct LiebRuskaiTrace {
    pub eps: Vec<f64>,
    pub gaps: Vec<HermitianMatrix>,
    /// Minimum eigenvalue of each `G(ε)`.
    pub min_eigenvalues: Vec<f64>,
    /// Most negative eigenvalue of `G(ε_k) - G(ε_{k+1})` over consecutive
    /// pairs; nonnegative up to rounding when `G` decreases with `ε`.
    pub monotonicity_slack: f64,
    /// Largest entry of `G(ε_{n-1}) - G(ε_n)` at the two smallest `ε`.
    pub last_step: f64,
    /// Largest entry of `G(ε_n)` minus the pseudoinverse value.
    pub pinv_discrepancy: f64,
}

impl LiebRuskaiTrace {
    pub fn limit(&self) -> &HermitianMatrix {
        self.gaps.last().expect("nonempty eps list")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn lr_parts(c: &CompressionMap, a: &HermitianMatrix, b: &HermitianMatrix) -> Result<(HermitianMatrix, CMatrix, HermitianMatrix)> {
    let phi_aa = c.action(&a.square())?;
    let phi_ab = c.action_general(&a.matmul(b))?;
    let phi_bb = c.action(&b.square())?;
    Ok((phi_aa, phi_ab, phi_bb))
}

fn lr_gap_with(phi_aa: &HermitianMatrix, phi_ab: &CMatrix, inverse: &HermitianMatrix) -> Result<HermitianMatrix> {
    let sub = phi_ab * inverse.matrix() * phi_ab.adjoint();
    HermitianMatrix::new(phi_aa.matrix() - sub)
}

/// `Φ(A*A) - Φ(A*B)(Φ(B*B) + εI)^{-1} Φ(B*A)` for every `ε` in `eps_list`.
pub fn lieb_ruskai_trace(
    c: &CompressionMap,
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    eps_list: &[f64],
) -> Result<LiebRuskaiTrace> {
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(OvmError::InvalidArgument("eps list must be nonempty and positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(OvmError::InvalidArgument("eps list must be strictly decreasing".into()));
    }
    let (phi_aa, phi_ab, phi_bb) = lr_parts(c, a, b)?;
    let mut gaps = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let inv = phi_bb.apply_function(|t| 1.0 / (t + eps), Interval::NONNEGATIVE)?;
        gaps.push(lr_gap_with(&phi_aa, &phi_ab, &inv)?);
    }
    let min_eigenvalues = gaps.iter().map(|g| g.min_eigenvalue()).collect::<Result<Vec<_>>>()?;
    let mut monotonicity_slack = f64::INFINITY;
    for w in gaps.windows(2) {
        monotonicity_slack = monotonicity_slack.min((&w[0] - &w[1]).min_eigenvalue()?);
    }
    let n = gaps.len();
    let last_step = if n >= 2 {
        max_abs_entry(&(gaps[n - 2].matrix() - gaps[n - 1].matrix()))
    } else {
        0.0
    };
    let pinv = phi_bb.apply_function(
        |t| if t > PINV_THRESHOLD { 1.0 / t } else { 0.0 },
        Interval::NONNEGATIVE,
    )?;
    let oracle = lr_gap_with(&phi_aa, &phi_ab, &pinv)?;
    let pinv_discrepancy = max_abs_entry(&(gaps[n - 1].matrix() - oracle.matrix()));
    Ok(LiebRuskaiTrace {
        eps: eps_list.to_vec(),
        gaps,
        min_eigenvalues,
        monotonicity_slack: if n >= 2 { monotonicity_slack } else { 0.0 },
        last_step,
        pinv_discrepancy,
    })
}

/// `G(ε)` at the smallest `ε` of the list.
pub fn lieb_ruskai_gap(
    c: &CompressionMap,
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    eps_list: &[f64],
) -> Result<HermitianMatrix> {
    Ok(lieb_ruskai_trace(c, a, b, eps_list)?.limit().clone())
}

/// Numerical replica of the sandwich
/// `T^{2r} = Φ(S^q)^{r/q'} >= Φ(S^{2r}) >= lim Φ(S^p)(Φ(S^q)+ε)^{-1}Φ(S^p) = T^{2r}`
/// for `q = 2q'` even, `q' < p < q` and `r = p - q'`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProofChain {
    pub p: u32,
    pub q: u32,
    /// Minimum eigenvalue of `Φ(S^q)^{r/q'} - Φ(S^{2r})`.
    pub hansen_min_eigenvalue: f64,
    /// Frobenius norm of the same difference.
    pub hansen_leg: f64,
    /// Minimum eigenvalue of the Lieb-Ruskai gap at the smallest `ε`.
    pub lr_min_eigenvalue: f64,
    pub lr_leg: f64,
    /// `|Φ(S^q)^{r/q'} - T^{2r}|_F`.
    pub upper_residual: f64,
    /// `|lim Φ(S^p)(Φ(S^q)+ε)^{-1}Φ(S^p) - T^{2r}|_F`.
    pub lower_residual: f64,
    /// `|[P, S^q]|_F`.
    pub commutator_q: f64,
}

impl ProofChain {
    /// Both inequalities are equalities.
    pub fn collapsed(&self, tol: f64) -> bool {
        self.hansen_leg <= tol && self.lr_leg <= tol
    }

    pub fn hansen_equality(&self, tol: f64) -> bool {
        self.commutator_q <= tol
    }
}

pub fn proof_chain(
    dilation: &NaimarkDilation,
    t: &HermitianMatrix,
    p: u32,
    q: u32,
    eps_list: &[f64],
) -> Result<ProofChain> {
    if q % 2 != 0 || !(q / 2 < p && p < q) {
        return Err(OvmError::InvalidArgument(format!(
            "chain needs q even and q/2 < p < q, got ({p}, {q})"
        )));
    }
    let qh = q / 2;
    let r = p - qh;
    let c = CompressionMap::from_isometry(dilation.embedding())?;
    let s = dilation.s();
    let s_q = s.powi(q);
    let phi_q = c.action(&s_q)?;
    let phi_2r = c.action(&s.powi(2 * r))?;
    let upper = phi_q.powf_psd(f64::from(r) / f64::from(qh))?;
    let hansen = &upper - &phi_2r;
    let lr = lieb_ruskai_gap(&c, &s.powi(r), &s.powi(qh), eps_list)?;
    let lower = &phi_2r - &lr;
    let t_2r = t.powi(2 * r);
    Ok(ProofChain {
        p,
        q,
        hansen_min_eigenvalue: hansen.min_eigenvalue()?,
        hansen_leg: hansen.frobenius_norm(),
        lr_min_eigenvalue: lr.min_eigenvalue()?,
        lr_leg: lr.frobenius_norm(),
        upper_residual: upper.distance(&t_2r)?,
        lower_residual: lower.distance(&t_2r)?,
        commutator_q: dilation.p().commutator_norm(&s_q)?,
    })
}
