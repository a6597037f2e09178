//! Finitely supported operator-valued measures on the real line.
//!
//! A [`FiniteOVM`] is a list of atoms `(lambda_i, F_i)` with distinct real
//! support points and positive semidefinite effects. When the effects sum
//! to the identity the measure is semispectral ("normalized"); all moment
//! based operations require that.

use serde::{Deserialize, Serialize};

use crate::error::{OvmError, Result};
use crate::hermitian::{HermitianMatrix, Interval, MatrixJson, DEFAULT_TOL};

/// Effects with a Frobenius norm below this are dropped at construction.
pub const ZERO_EFFECT_NORM: f64 = 1e-14;

/// Support points closer than `MERGE_RADIUS (1 + max |lambda|)` are merged.
pub const MERGE_RADIUS: f64 = 1e-12;

/// Largest real exponent accepted by [`FiniteOVM::moment_real`]; beyond it
/// `lambda^r` under- or overflows for ordinary support points.
pub const MAX_REAL_EXPONENT: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct Atom {
    pub lambda: f64,
    pub effect: HermitianMatrix,
}

#[derive(Debug, Clone)]
pub struct FiniteOVM {
    dim: usize,
    atoms: Vec<Atom>,
    normalized: bool,
    defect: f64,
}

impl FiniteOVM {
    /// Builds a measure from `(lambda, effect)` pairs.
    ///
    /// Atoms are sorted by support point, effects at (numerically) equal
    /// points are summed and negligible effects dropped. Every effect must be
    /// PSD within `1e-10`. Normalization is recorded, not enforced.
    pub fn new<I>(dim: usize, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, HermitianMatrix)>,
    {
        if dim == 0 {
            return Err(OvmError::InvalidArgument("dimension must be positive".into()));
        }
        let mut raw = Vec::new();
        for (lambda, effect) in atoms {
            if !lambda.is_finite() {
                return Err(OvmError::NonFinite(format!("support point {lambda}")));
            }
            if effect.dim() != dim {
                return Err(OvmError::DimensionMismatch {
                    expected: dim,
                    found: effect.dim(),
                });
            }
            let min_eigenvalue = effect.min_eigenvalue()?;
            if !effect.is_psd(DEFAULT_TOL) {
                return Err(OvmError::EffectNotPsd {
                    lambda,
                    min_eigenvalue,
                });
            }
            if effect.frobenius_norm() >= ZERO_EFFECT_NORM {
                raw.push(Atom { lambda, effect });
            }
        }
        raw.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));

        let scale = raw.iter().fold(0.0_f64, |m, a| m.max(a.lambda.abs()));
        let radius = MERGE_RADIUS * (1.0 + scale);
        let mut merged: Vec<Atom> = Vec::with_capacity(raw.len());
        for atom in raw {
            match merged.last_mut() {
                Some(last) if (atom.lambda - last.lambda).abs() <= radius => {
                    last.effect = &last.effect + &atom.effect;
                }
                _ => merged.push(atom),
            }
        }
        Ok(Self::from_sorted_atoms(dim, merged))
    }

    fn from_sorted_atoms(dim: usize, atoms: Vec<Atom>) -> Self {
        let total = atoms
            .iter()
            .fold(HermitianMatrix::zeros(dim), |acc, a| &acc + &a.effect);
        let identity = HermitianMatrix::identity(dim);
        let diff = &total - &identity;
        let defect = diff.spectral_norm().unwrap_or(f64::INFINITY);
        let normalized = total.approx_eq(&identity, DEFAULT_TOL).unwrap_or(false);
        Self {
            dim,
            atoms,
            normalized,
            defect,
        }
    }

    /// Scalar measure `sum w_i delta_{lambda_i}` on a one-dimensional space.
    pub fn scalar<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        Self::new(
            1,
            atoms
                .into_iter()
                .map(|(l, w)| (l, HermitianMatrix::scalar(w))),
        )
    }

    /// `delta_lambda I` on a `dim`-dimensional space.
    pub fn point_mass(dim: usize, lambda: f64) -> Result<Self> {
        Self::new(dim, [(lambda, HermitianMatrix::identity(dim))])
    }

    /// Spectral measure of a Hermitian operator: eigenvalues within
    /// `1e-10 (1 + |T|_2)` of each other share one projection.
    pub fn spectral_of(t: &HermitianMatrix) -> Result<Self> {
        let dec = t.eig()?;
        let ev = &dec.eigenvalues;
        let n = ev.len();
        let norm = ev[0].abs().max(ev[n - 1].abs());
        let radius = 1e-10 * (1.0 + norm);
        let mut atoms = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && ev[end] - ev[end - 1] <= radius {
                end += 1;
            }
            let u = dec.eigenvectors.columns(start, end - start);
            let projection = HermitianMatrix::new(&u * u.adjoint())?;
            let lambda = ev[start..end].iter().sum::<f64>() / (end - start) as f64;
            atoms.push((lambda, projection));
            start = end;
        }
        Self::new(n, atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.lambda).collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `|sum F_i - I|_2`.
    pub fn normalization_defect(&self) -> f64 {
        self.defect
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(OvmError::NotNormalized {
                defect: self.defect,
            })
        }
    }

    /// `sum lambda_i^k F_i`; the zeroth moment is exactly `I`.
    pub fn moment(&self, k: u32) -> Result<HermitianMatrix> {
        self.require_normalized()?;
        if k == 0 {
            return Ok(HermitianMatrix::identity(self.dim));
        }
        let exp = i32::try_from(k)
            .map_err(|_| OvmError::InvalidArgument(format!("moment order {k} too large")))?;
        Ok(self.integrate(|x| x.powi(exp)))
    }

    /// `sum f(lambda_i) F_i` for an arbitrary real function.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> HermitianMatrix {
        self.atoms
            .iter()
            .fold(HermitianMatrix::zeros(self.dim), |acc, a| {
                &acc + &a.effect.scale(f(a.lambda))
            })
    }

    /// `sum lambda_i^r F_i` for real `r` in `[0, 64]`; requires support in
    /// `[0, inf)` and uses `0^0 = 1`.
    pub fn moment_real(&self, r: f64) -> Result<HermitianMatrix> {
        self.require_normalized()?;
        if !(0.0..=MAX_REAL_EXPONENT).contains(&r) {
            return Err(OvmError::ExponentOutOfRange(r));
        }
        if let Some(a) = self.atoms.iter().find(|a| a.lambda < 0.0) {
            return Err(OvmError::NegativeSupport(a.lambda));
        }
        Ok(self.integrate(|x| x.powf(r)))
    }

    /// Intrinsic noise operator `M_2 - M_1^2`.
    pub fn variance(&self) -> Result<HermitianMatrix> {
        let m1 = self.moment(1)?;
        let m2 = self.moment(2)?;
        Ok(&m2 - &m1.square())
    }

    /// Every effect is an orthogonal projection and distinct effects have
    /// vanishing products, all within `tol`.
    pub fn is_spectral(&self, tol: f64) -> bool {
        if !self.normalized {
            return false;
        }
        if !self.atoms.iter().all(|a| a.effect.is_projection(tol)) {
            return false;
        }
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                if a.effect.matmul(&b.effect).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Block Hankel matrix with blocks `M_{j+k}`, `j, k = 0..=n`.
    pub fn hankel(&self, n: usize) -> Result<HermitianMatrix> {
        let moments = (0..=2 * n as u32)
            .map(|k| self.moment(k))
            .collect::<Result<Vec<_>>>()?;
        let d = self.dim;
        let size = (n + 1) * d;
        let mut m = crate::hermitian::CMatrix::zeros(size, size);
        for j in 0..=n {
            for k in 0..=n {
                m.view_mut((j * d, k * d), (d, d))
                    .copy_from(moments[j + k].matrix());
            }
        }
        HermitianMatrix::new(m)
    }

    /// Image measure under `omega`; effects landing on the same point are
    /// summed.
    pub fn pushforward<W: Fn(f64) -> f64>(&self, omega: W) -> Result<Self> {
        self.require_normalized()?;
        Self::new(
            self.dim,
            self.atoms
                .iter()
                .map(|a| (omega(a.lambda), a.effect.clone())),
        )
    }

    /// `F_tau(D) = F(D / tau)`, the pushforward under `x -> tau x`.
    pub fn rescale(&self, tau: f64) -> Result<Self> {
        if tau == 0.0 || !tau.is_finite() {
            return Err(OvmError::InvalidArgument(format!(
                "rescaling factor must be finite and nonzero, got {tau}"
            )));
        }
        self.pushforward(|x| tau * x)
    }

    /// Whether `omega` separates the support points (at the merge radius).
    pub fn is_injective_on_support<W: Fn(f64) -> f64>(&self, omega: W) -> bool {
        let images: Vec<f64> = self.atoms.iter().map(|a| omega(a.lambda)).collect();
        let scale = images.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let radius = MERGE_RADIUS * (1.0 + scale);
        let mut sorted = images;
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).all(|w| w[1] - w[0] > radius)
    }

    /// `F(U)` for `U` a finite union of closed intervals.
    pub fn mass_on(&self, set: &[Interval]) -> HermitianMatrix {
        self.atoms
            .iter()
            .filter(|a| set.iter().any(|i| i.contains(a.lambda)))
            .fold(HermitianMatrix::zeros(self.dim), |acc, a| &acc + &a.effect)
    }

    pub fn to_document(&self) -> PovmDocument {
        PovmDocument {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomDocument {
                    lambda: a.lambda,
                    effect: MatrixJson::from(&a.effect),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("POVM serialization")
    }
}

/// Serialized POVM: `{"dim": d, "atoms": [{"lambda": x, "effect": {re, im}}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmDocument {
    pub dim: usize,
    pub atoms: Vec<AtomDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDocument {
    pub lambda: f64,
    pub effect: MatrixJson,
}

/// Parse or validation failure with a location: a JSON line/column or a
/// field path such as `atoms[1].effect`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{location}: {message}")]
pub struct DocumentError {
    pub location: String,
    pub message: String,
}

impl DocumentError {
    pub(crate) fn from_json(e: &serde_json::Error) -> Self {
        Self {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        }
    }

    pub(crate) fn at(location: impl Into<String>, err: impl ToString) -> Self {
        Self {
            location: location.into(),
            message: err.to_string(),
        }
    }
}

impl PovmDocument {
    /// Validates the document into a measure. Non-normalized measures are
    /// accepted here; callers decide whether normalization is required.
    pub fn into_measure(self) -> std::result::Result<FiniteOVM, DocumentError> {
        if self.dim == 0 {
            return Err(DocumentError::at("dim", "dimension must be positive"));
        }
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, atom) in self.atoms.into_iter().enumerate() {
            let effect = atom
                .effect
                .to_hermitian()
                .map_err(|e| DocumentError::at(format!("atoms[{i}].effect"), e))?;
            if effect.dim() != self.dim {
                return Err(DocumentError::at(
                    format!("atoms[{i}].effect"),
                    format!("expected a {0}x{0} matrix, found {1}x{1}", self.dim, effect.dim()),
                ));
            }
            atoms.push((atom.lambda, effect));
        }
        FiniteOVM::new(self.dim, atoms).map_err(|e| match e {
            OvmError::EffectNotPsd { lambda, .. } => {
                DocumentError::at(format!("atoms[lambda = {lambda}].effect"), e)
            }
            other => DocumentError::at("atoms", other),
        })
    }
}

impl FiniteOVM {
    pub fn from_json_str(s: &str) -> std::result::Result<Self, DocumentError> {
        let doc: PovmDocument =
            serde_json::from_str(s).map_err(|e| DocumentError::from_json(&e))?;
        doc.into_measure()
    }
}
