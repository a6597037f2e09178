//! Minimal Naimark dilations of finite semispectral measures.
//!
//! For `F = sum_i delta_{lambda_i} F_i` the dilation space is the ordered
//! direct sum `K = ran F_1 (+) ... (+) ran F_m`. The isometry `V: H -> K`
//! sends `h` to `(F_1^{1/2} h, ..., F_m^{1/2} h)` written in the eigenbasis
//! of each range, so `V* E_i V = F_i` where `E_i` is the coordinate
//! projection onto the `i`-th summand. `H` is identified with `ran V` and
//! `P = V V*`.

use serde::{Deserialize, Serialize};

use crate::error::{OvmError, Result};
use crate::hermitian::{c, CMatrix, HermitianMatrix, MatrixJson};
use crate::povm::{DocumentError, FiniteOVM};

/// Relative eigenvalue threshold deciding the rank of an effect.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DilationBlock {
    pub lambda: f64,
    pub projection: HermitianMatrix,
}

#[derive(Debug, Clone)]
pub struct NaimarkDilation {
    small_dim: usize,
    big_dim: usize,
    embedding: CMatrix,
    blocks: Vec<DilationBlock>,
    s: HermitianMatrix,
    p: HermitianMatrix,
}

/// Number of eigenvalues above `RANK_TOL (1 + |A|_2)`.
pub fn numerical_rank(a: &HermitianMatrix) -> Result<usize> {
    let ev = a.eigenvalues()?;
    let norm = ev[0].abs().max(ev[ev.len() - 1].abs());
    Ok(ev.iter().filter(|&&x| x > RANK_TOL * (1.0 + norm)).count())
}

impl NaimarkDilation {
    /// Minimal dilation of a normalized measure. Blocks follow the atom
    /// order and, inside each block, ascending eigenvalues of the effect.
    pub fn minimal(f: &FiniteOVM) -> Result<Self> {
        if !f.is_normalized() {
            return Err(OvmError::NotNormalized {
                defect: f.normalization_defect(),
            });
        }
        let d = f.dim();
        let mut rows: Vec<(usize, Vec<crate::hermitian::CVector>)> = Vec::new();
        for atom in f.atoms() {
            let dec = atom.effect.eig()?;
            let norm = dec.eigenvalues[dec.eigenvalues.len() - 1].abs();
            let threshold = RANK_TOL * (1.0 + norm);
            let kept: Vec<_> = dec
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &mu)| mu > threshold)
                .map(|(j, &mu)| {
                    // row of V: sqrt(mu) u_j*
                    dec.eigenvectors.column(j).map(|z| z.conj()) * c(mu.sqrt())
                })
                .collect();
            rows.push((kept.len(), kept));
        }
        let big_dim: usize = rows.iter().map(|(r, _)| r).sum();
        let mut embedding = CMatrix::zeros(big_dim, d);
        let mut offset = 0;
        let mut ranges = Vec::with_capacity(rows.len());
        for (rank, vecs) in &rows {
            for (k, v) in vecs.iter().enumerate() {
                embedding.row_mut(offset + k).copy_from(&v.transpose());
            }
            ranges.push((offset, *rank));
            offset += rank;
        }
        let blocks = f
            .atoms()
            .iter()
            .zip(ranges)
            .filter(|(_, (_, rank))| *rank > 0)
            .map(|(atom, (start, rank))| DilationBlock {
                lambda: atom.lambda,
                projection: coordinate_projection(big_dim, start, rank),
            })
            .collect();
        Self::assemble(d, embedding, blocks)
    }

    /// Dilation given by a selfadjoint `S` on `K` and an isometry `V: H -> K`;
    /// the blocks are the spectral projections of `S`. Such a dilation need
    /// not be minimal.
    pub fn from_operator(s: &HermitianMatrix, embedding: CMatrix) -> Result<Self> {
        if embedding.nrows() != s.dim() {
            return Err(OvmError::DimensionMismatch {
                expected: s.dim(),
                found: embedding.nrows(),
            });
        }
        let spectral = FiniteOVM::spectral_of(s)?;
        let blocks = spectral
            .atoms()
            .iter()
            .map(|a| DilationBlock {
                lambda: a.lambda,
                projection: a.effect.clone(),
            })
            .collect();
        Self::assemble(embedding.ncols(), embedding, blocks)
    }

    /// `H` embedded as the first `small_dim` coordinates of `K`.
    pub fn from_operator_on_leading_block(s: &HermitianMatrix, small_dim: usize) -> Result<Self> {
        if small_dim == 0 || small_dim > s.dim() {
            return Err(OvmError::InvalidArgument(format!(
                "cannot embed dimension {small_dim} into {}",
                s.dim()
            )));
        }
        let v = CMatrix::from_fn(s.dim(), small_dim, |i, j| c(if i == j { 1.0 } else { 0.0 }));
        Self::from_operator(s, v)
    }

    fn assemble(small_dim: usize, embedding: CMatrix, blocks: Vec<DilationBlock>) -> Result<Self> {
        let big_dim = embedding.nrows();
        let gram = embedding.adjoint() * &embedding;
        let defect = (gram - CMatrix::identity(small_dim, small_dim)).norm();
        if defect > 1e-9 {
            return Err(OvmError::NotIsometry(defect));
        }
        for b in &blocks {
            if b.projection.dim() != big_dim {
                return Err(OvmError::DimensionMismatch {
                    expected: big_dim,
                    found: b.projection.dim(),
                });
            }
        }
        let s = blocks
            .iter()
            .fold(HermitianMatrix::zeros(big_dim), |acc, b| {
                &acc + &b.projection.scale(b.lambda)
            });
        let p = HermitianMatrix::new(&embedding * embedding.adjoint())?;
        Ok(Self {
            small_dim,
            big_dim,
            embedding,
            blocks,
            s,
            p,
        })
    }

    pub fn small_dim(&self) -> usize {
        self.small_dim
    }

    pub fn big_dim(&self) -> usize {
        self.big_dim
    }

    pub fn embedding(&self) -> &CMatrix {
        &self.embedding
    }

    pub fn blocks(&self) -> &[DilationBlock] {
        &self.blocks
    }

    /// First moment `sum lambda_i E_i` of the dilating spectral measure.
    pub fn s(&self) -> &HermitianMatrix {
        &self.s
    }

    /// Projection of `K` onto the embedded `H`.
    pub fn p(&self) -> &HermitianMatrix {
        &self.p
    }

    /// The compressed measure `V* E(.) V`.
    pub fn compress(&self) -> Result<FiniteOVM> {
        let atoms = self
            .blocks
            .iter()
            .map(|b| Ok((b.lambda, b.projection.congruence(&self.embedding)?)))
            .collect::<Result<Vec<_>>>()?;
        FiniteOVM::new(self.small_dim, atoms)
    }

    /// `V* S^k V`, the compression of the `k`-th power of `S`.
    pub fn moment(&self, k: u32) -> Result<HermitianMatrix> {
        self.s.powi(k).congruence(&self.embedding)
    }

    /// Largest `|P E_i - E_i P|_F` over the blocks.
    pub fn max_commutator(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.projection.commutator_norm(&self.p).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Whether `P` commutes with every spectral projection, within
    /// `tol (1 + big_dim)`.
    pub fn p_commutes(&self, tol: f64) -> bool {
        self.max_commutator() <= tol * (1.0 + self.big_dim as f64)
    }

    pub fn to_document(&self) -> DilationDocument {
        DilationDocument {
            small_dim: self.small_dim,
            big_dim: self.big_dim,
            embedding: MatrixJson::from(&self.embedding),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockDocument {
                    lambda: b.lambda,
                    projection: MatrixJson::from(&b.projection),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("dilation serialization")
    }

    pub fn from_json_str(s: &str) -> std::result::Result<Self, DocumentError> {
        let doc: DilationDocument =
            serde_json::from_str(s).map_err(|e| DocumentError::from_json(&e))?;
        doc.into_dilation()
    }
}

fn coordinate_projection(n: usize, start: usize, len: usize) -> HermitianMatrix {
    let diag: Vec<f64> = (0..n)
        .map(|i| if (start..start + len).contains(&i) { 1.0 } else { 0.0 })
        .collect();
    HermitianMatrix::diag(&diag)
}

pub fn dilate_minimal(f: &FiniteOVM) -> Result<NaimarkDilation> {
    NaimarkDilation::minimal(f)
}

/// Serialized dilation: `{"small_dim", "big_dim", "embedding", "blocks"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DilationDocument {
    pub small_dim: usize,
    pub big_dim: usize,
    pub embedding: MatrixJson,
    pub blocks: Vec<BlockDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDocument {
    pub lambda: f64,
    pub projection: MatrixJson,
}

impl DilationDocument {
    pub fn into_dilation(self) -> std::result::Result<NaimarkDilation, DocumentError> {
        let embedding = self
            .embedding
            .to_matrix()
            .map_err(|e| DocumentError::at("embedding", e))?;
        if embedding.nrows() != self.big_dim || embedding.ncols() != self.small_dim {
            return Err(DocumentError::at(
                "embedding",
                format!(
                    "expected {}x{}, found {}x{}",
                    self.big_dim,
                    self.small_dim,
                    embedding.nrows(),
                    embedding.ncols()
                ),
            ));
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.into_iter().enumerate() {
            let projection = b
                .projection
                .to_hermitian()
                .map_err(|e| DocumentError::at(format!("blocks[{i}].projection"), e))?;
            if !projection.is_projection(1e-9) {
                return Err(DocumentError::at(
                    format!("blocks[{i}].projection"),
                    OvmError::NotProjection(projection.projection_defect()),
                ));
            }
            blocks.push(DilationBlock {
                lambda: b.lambda,
                projection,
            });
        }
        NaimarkDilation::assemble(self.small_dim, embedding, blocks)
            .map_err(|e| DocumentError::at("dilation", e))
    }
}
