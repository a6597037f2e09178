//! Dense complex Hermitian matrices.
//!
//! [`HermitianMatrix`] is the value type for effects, moments and the
//! operators `T` and `S`. Construction always symmetrizes, `(A + A*) / 2`,
//! so products such as `P T^2 P` that drift from Hermitian symmetry at
//! machine precision can be wrapped without a separate cleanup step.
//!
//! Equality is always tolerance based. The default relative Frobenius
//! tolerance is [`DEFAULT_TOL`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{OvmError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default relative tolerance for matrix equality.
pub const DEFAULT_TOL: f64 = 1e-10;

const EIG_MAX_ITER: usize = 10_000;

/// Slack allowed when checking that a spectrum lies inside a function domain.
const DOMAIN_SLACK: f64 = 1e-10;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Closed real interval, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const NONNEGATIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(OvmError::InvalidArgument(format!(
                "interval [{lo}, {hi}] is empty"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Real `p`-th root extended to negative arguments for odd `p`:
/// `sign(t) |t|^(1/p)`.
pub fn signed_root(t: f64, p: u32) -> f64 {
    match p {
        1 => t,
        3 => t.cbrt(),
        _ => t.signum() * t.abs().powf(1.0 / f64::from(p)),
    }
}

/// Square complex matrix equal to its conjugate transpose.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianMatrix{:?}", MatrixJson::from(&self.m))
    }
}

/// Ascending eigenvalues with the matching unitary eigenvector matrix
/// (eigenvectors are the columns).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// `U diag(f(mu)) U*`.
    pub fn rebuild_with(&self, values: &[f64]) -> HermitianMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        HermitianMatrix::from_matrix_unchecked(&scaled * u.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.rebuild_with(&self.eigenvalues)
    }
}

impl HermitianMatrix {
    /// Wraps a square matrix, replacing it by `(A + A*) / 2`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(OvmError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(OvmError::MalformedMatrix("empty matrix".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(OvmError::NonFinite("matrix entries".into()));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Symmetrizes without validating shape; callers guarantee a square input.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        let adj = m.adjoint();
        Self {
            m: (m + adj).scale(0.5),
        }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(OvmError::MalformedMatrix(format!(
                "expected {n} columns in every row"
            )));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| c(rows[i][j])))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: CMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: CMatrix::zeros(n, n),
        }
    }

    pub fn scalar(x: f64) -> Self {
        Self::diag(&[x])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            m: CMatrix::from_fn(n, n, |i, j| if i == j { c(values[i]) } else { c(0.0) }),
        }
    }

    /// Rank-one operator `v v*`.
    pub fn outer(v: &CVector) -> Self {
        Self::from_matrix_unchecked(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: self.m.scale(s),
        }
    }

    /// Ordinary matrix product; not Hermitian in general.
    pub fn matmul(&self, other: &HermitianMatrix) -> CMatrix {
        &self.m * &other.m
    }

    pub fn square(&self) -> Self {
        Self::from_matrix_unchecked(&self.m * &self.m)
    }

    /// `A^k` by binary powering; `A^0 = I`.
    pub fn powi(&self, k: u32) -> Self {
        let n = self.dim();
        let mut result = CMatrix::identity(n, n);
        let mut base = self.m.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Self::from_matrix_unchecked(result)
    }

    /// `C* A C` for a (possibly rectangular) `C`.
    pub fn congruence(&self, c: &CMatrix) -> Result<Self> {
        if c.nrows() != self.dim() {
            return Err(OvmError::DimensionMismatch {
                expected: self.dim(),
                found: c.nrows(),
            });
        }
        Ok(Self::from_matrix_unchecked(c.adjoint() * &self.m * c))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &HermitianMatrix) -> Self {
        Self::from_matrix_unchecked(self.m.kronecker(&other.m))
    }

    /// Frobenius norm of the commutator `AB - BA`.
    pub fn commutator_norm(&self, other: &HermitianMatrix) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok((&self.m * &other.m - &other.m * &self.m).norm())
    }

    fn check_same_dim(&self, other: &HermitianMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(OvmError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Spectral decomposition with ascending eigenvalues.
    ///
    /// Each eigenvector is normalized so that its largest-modulus component
    /// is real and positive (first such component on ties), which makes the
    /// output deterministic for identical input.
    pub fn eig(&self) -> Result<SpectralDecomposition> {
        let n = self.dim();
        let solver = SymmetricEigen::try_new(self.m.clone(), f64::EPSILON, EIG_MAX_ITER).ok_or(
            OvmError::EigenNonConvergence {
                dim: n,
                norm: self.frobenius_norm(),
            },
        )?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| solver.eigenvalues[a].total_cmp(&solver.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&i| solver.eigenvalues[i]).collect();
        let mut eigenvectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = solver.eigenvectors.column(src).into_owned();
            let mut pivot = 0;
            let mut best = -1.0;
            for (i, z) in col.iter().enumerate() {
                // ties broken towards the lowest index
                if z.norm() > best * (1.0 + 1e-12) {
                    best = z.norm();
                    pivot = i;
                }
            }
            let z = col[pivot];
            if z.norm() > 0.0 {
                let phase = z.conj() / z.norm();
                col *= phase;
            }
            let norm = col.norm();
            if norm > 0.0 {
                col.unscale_mut(norm);
            }
            eigenvectors.set_column(dst, &col);
        }
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eig()?.eigenvalues)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
    }

    /// Functional calculus `f(A) = U diag(f(mu_i)) U*`.
    ///
    /// Eigenvalues within `1e-10 (1 + |A|_2)` of `domain` are clamped onto
    /// it; anything further out is a [`OvmError::DomainViolation`].
    pub fn apply_function<F>(&self, f: F, domain: Interval) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        let dec = self.eig()?;
        let scale = dec
            .eigenvalues
            .iter()
            .fold(0.0_f64, |acc, &x| acc.max(x.abs()));
        let slack = DOMAIN_SLACK * (1.0 + scale);
        let mut values = Vec::with_capacity(dec.eigenvalues.len());
        for &mu in &dec.eigenvalues {
            if mu < domain.lo - slack || mu > domain.hi + slack {
                return Err(OvmError::DomainViolation {
                    eigenvalue: mu,
                    lo: domain.lo,
                    hi: domain.hi,
                });
            }
            let v = f(mu.clamp(domain.lo, domain.hi));
            if !v.is_finite() {
                return Err(OvmError::NonFinite(format!("f({mu})")));
            }
            values.push(v);
        }
        Ok(dec.rebuild_with(&values))
    }

    /// `A^r` for PSD `A` and real `r >= 0`, with `0^0 = 1`.
    pub fn powf_psd(&self, r: f64) -> Result<Self> {
        self.apply_function(|t| t.powf(r), Interval::NONNEGATIVE)
    }

    /// Real `p`-th root for odd `p`; see [`signed_root`].
    pub fn odd_root(&self, p: u32) -> Result<Self> {
        if p % 2 == 0 {
            return Err(OvmError::InvalidArgument(format!(
                "odd root requested with even exponent {p}"
            )));
        }
        self.apply_function(|t| signed_root(t, p), Interval::REAL_LINE)
    }

    /// `min eig(A) >= -tol (1 + |A|_2)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        match self.eigenvalues() {
            Ok(ev) => {
                let norm = ev[0].abs().max(ev[ev.len() - 1].abs());
                ev[0] >= -tol * (1.0 + norm)
            }
            Err(_) => false,
        }
    }

    /// `|A^2 - A|_F <= tol (1 + |A|_F)`.
    pub fn is_projection(&self, tol: f64) -> bool {
        self.projection_defect() <= tol * (1.0 + self.frobenius_norm())
    }

    /// `|A^2 - A|_F`.
    pub fn projection_defect(&self) -> f64 {
        (&self.m * &self.m - &self.m).norm()
    }

    /// `|A - B|_F <= tol (1 + max(|A|_F, |B|_F))`.
    pub fn approx_eq(&self, other: &HermitianMatrix, tol: f64) -> Result<bool> {
        self.check_same_dim(other)?;
        let scale = self.frobenius_norm().max(other.frobenius_norm());
        Ok(self.distance(other)? <= tol * (1.0 + scale))
    }

    /// `|A - B|_F`.
    pub fn distance(&self, other: &HermitianMatrix) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok((&self.m - &other.m).norm())
    }

    /// `|A - B|_F / (1 + max(|A|_F, |B|_F))`.
    pub fn relative_distance(&self, other: &HermitianMatrix) -> Result<f64> {
        let scale = self.frobenius_norm().max(other.frobenius_norm());
        Ok(self.distance(other)? / (1.0 + scale))
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in addition");
        HermitianMatrix {
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in subtraction");
        HermitianMatrix {
            m: &self.m - &rhs.m,
        }
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        self.scale(-1.0)
    }
}

/// On-disk matrix fragment: row-major real and imaginary parts. A missing
/// or empty `im` means a real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let rows = |part: fn(&Complex64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| part(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl From<&HermitianMatrix> for MatrixJson {
    fn from(h: &HermitianMatrix) -> Self {
        Self::from(&h.m)
    }
}

impl MatrixJson {
    /// Decodes into a dense matrix, checking that both parts share one
    /// rectangular shape.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.re.len();
        let real = self.im.is_empty();
        if !real && self.im.len() != rows {
            return Err(OvmError::MalformedMatrix(format!(
                "re has {rows} rows but im has {}",
                self.im.len()
            )));
        }
        if rows == 0 {
            return Err(OvmError::MalformedMatrix("matrix has no rows".into()));
        }
        let cols = self.re[0].len();
        for (i, r) in self.re.iter().enumerate() {
            if r.len() != cols || (!real && self.im[i].len() != cols) {
                return Err(OvmError::MalformedMatrix(format!(
                    "row {i} does not have {cols} entries in both re and im"
                )));
            }
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            Complex64::new(self.re[i][j], if real { 0.0 } else { self.im[i][j] })
        }))
    }

    pub fn to_hermitian(&self) -> Result<HermitianMatrix> {
        HermitianMatrix::new(self.to_matrix()?)
    }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MatrixJson::deserialize(d)?
            .to_hermitian()
            .map_err(serde::de::Error::custom)
    }
}
