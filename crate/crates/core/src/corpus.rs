//! Seeded random instances for property suites.
//!
//! Random POVMs follow one fixed recipe so that corpora are reproducible
//! from a seed: draw PSD matrices `G_i = X_i X_i*`, let `Sum = sum G_i`,
//! and use the effects `Sum^{-1/2} G_i Sum^{-1/2}`.
//!
//! Each trial owns an independent ChaCha stream keyed by `(seed, trial)`,
//! so results do not depend on the order in which trials run.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hermitian::{CMatrix, HermitianMatrix, Interval};
use crate::povm::FiniteOVM;

pub type TrialRng = ChaCha8Rng;

/// Generator for trial number `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Matrix with entries whose real and imaginary parts are uniform in `[-1, 1]`.
pub fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
    })
}

pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> HermitianMatrix {
    HermitianMatrix::from_matrix_unchecked(random_complex(rng, dim, dim))
}

/// `X X*` with `X` of shape `dim x rank`.
pub fn random_psd(rng: &mut impl Rng, dim: usize, rank: usize) -> HermitianMatrix {
    let x = random_complex(rng, dim, rank);
    HermitianMatrix::from_matrix_unchecked(&x * x.adjoint())
}

/// Haar-like unitary from the eigenvectors of a random Hermitian matrix.
pub fn random_unitary(rng: &mut impl Rng, dim: usize) -> Result<CMatrix> {
    Ok(random_hermitian(rng, dim).eig()?.eigenvectors)
}

/// Orthogonal projection of the given rank in a random basis.
pub fn random_projection(rng: &mut impl Rng, dim: usize, rank: usize) -> Result<HermitianMatrix> {
    let u = random_unitary(rng, dim)?;
    let cols = u.columns(0, rank);
    HermitianMatrix::new(&cols * cols.adjoint())
}

/// Where random support points are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRange {
    pub lo: f64,
    pub hi: f64,
    /// Minimum spacing between distinct support points.
    pub min_gap: f64,
    /// Some support point must satisfy `|lambda| >= min_extent`, which
    /// keeps high moments from collapsing towards zero.
    pub min_extent: f64,
}

impl SupportRange {
    pub const SYMMETRIC: SupportRange = SupportRange {
        lo: -2.0,
        hi: 2.0,
        min_gap: 0.2,
        min_extent: 1.0,
    };
    pub const POSITIVE: SupportRange = SupportRange {
        lo: 0.0,
        hi: 3.0,
        min_gap: 0.2,
        min_extent: 1.0,
    };
}

/// `count` sorted support points from `range` respecting `min_gap` and
/// `min_extent`.
pub fn random_support(rng: &mut impl Rng, count: usize, range: SupportRange) -> Vec<f64> {
    loop {
        let mut pts: Vec<f64> = (0..count)
            .map(|_| rng.random_range(range.lo..=range.hi))
            .collect();
        pts.sort_by(f64::total_cmp);
        let spread = pts.windows(2).all(|w| w[1] - w[0] >= range.min_gap);
        if spread && pts.iter().any(|x| x.abs() >= range.min_extent) {
            return pts;
        }
    }
}

/// Random normalized POVM with `atoms` atoms built by the normalization
/// recipe. Effect ranks are random in `1..=dim`; draws whose total is near
/// singular are rejected.
pub fn random_povm(
    rng: &mut impl Rng,
    dim: usize,
    atoms: usize,
    range: SupportRange,
) -> Result<FiniteOVM> {
    let support = random_support(rng, atoms, range);
    loop {
        let gs: Vec<HermitianMatrix> = (0..atoms)
            .map(|_| {
                let rank = rng.random_range(1..=dim);
                random_psd(rng, dim, rank)
            })
            .collect();
        let total = gs
            .iter()
            .fold(HermitianMatrix::zeros(dim), |acc, g| &acc + g);
        if total.min_eigenvalue()? < 1e-2 {
            continue;
        }
        let inv_sqrt = total
            .apply_function(|t| 1.0 / t.sqrt(), Interval::new(1e-2, f64::INFINITY)?)?
            .into_matrix();
        let effects = gs
            .iter()
            .map(|g| g.congruence(&inv_sqrt))
            .collect::<Result<Vec<_>>>()?;
        return FiniteOVM::new(dim, support.iter().copied().zip(effects));
    }
}

/// Random spectral measure: a random orthonormal basis split into at most
/// `atoms` nonempty groups, one projection per group.
pub fn random_spectral_povm(
    rng: &mut impl Rng,
    dim: usize,
    atoms: usize,
    range: SupportRange,
) -> Result<FiniteOVM> {
    let groups = atoms.clamp(1, dim);
    let support = random_support(rng, groups, range);
    let u = random_unitary(rng, dim)?;
    // every group gets one basis vector, the rest are assigned at random
    let mut owner: Vec<usize> = (0..dim).map(|i| if i < groups { i } else { rng.random_range(0..groups) }).collect();
    for i in (1..dim).rev() {
        let j = rng.random_range(0..=i);
        owner.swap(i, j);
    }
    let mut effects = vec![CMatrix::zeros(dim, dim); groups];
    for (col, &g) in owner.iter().enumerate() {
        let v = u.column(col);
        effects[g] += &v * v.adjoint();
    }
    let atoms = support
        .into_iter()
        .zip(effects)
        .map(|(l, e)| Ok((l, HermitianMatrix::new(e)?)))
        .collect::<Result<Vec<_>>>()?;
    FiniteOVM::new(dim, atoms)
}

/// Random non-spectral POVM with `dim <= dim_max` and two to five atoms.
pub fn random_nonspectral(
    rng: &mut impl Rng,
    dim_max: usize,
    range: SupportRange,
) -> Result<FiniteOVM> {
    loop {
        let dim = rng.random_range(1..=dim_max.max(1));
        let atoms = rng.random_range(2..=5);
        let f = random_povm(rng, dim, atoms, range)?;
        if !f.is_spectral(1e-6) {
            return Ok(f);
        }
    }
}

/// Mixed corpus element: spectral with probability one half.
pub fn random_mixed(rng: &mut impl Rng, dim_max: usize, range: SupportRange) -> Result<FiniteOVM> {
    let dim = rng.random_range(1..=dim_max.max(1));
    let atoms = rng.random_range(1..=5);
    if rng.random_bool(0.5) {
        random_spectral_povm(rng, dim, atoms, range)
    } else {
        random_povm(rng, dim, atoms.max(2), range)
    }
}

/// Random contraction: a random matrix scaled to spectral norm in `(0, 1]`.
pub fn random_contraction(rng: &mut impl Rng, dim: usize) -> Result<CMatrix> {
    let x = random_complex(rng, dim, dim);
    let gram = HermitianMatrix::from_matrix_unchecked(x.adjoint() * &x);
    let norm = gram.spectral_norm()?.sqrt();
    let target: f64 = rng.random_range(0.1..=1.0);
    Ok(x.scale(target / norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_streams_are_reproducible_and_distinct() {
        let a: f64 = trial_rng(42, 3).random();
        let b: f64 = trial_rng(42, 3).random();
        let c: f64 = trial_rng(42, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn random_povm_is_normalized() {
        let mut rng = trial_rng(1, 0);
        for _ in 0..20 {
            let f = random_povm(&mut rng, 3, 4, SupportRange::SYMMETRIC).unwrap();
            assert!(f.is_normalized());
            assert_eq!(f.len(), 4);
            assert!(f.atoms().iter().all(|a| a.effect.is_psd(1e-10)));
        }
    }

    #[test]
    fn random_spectral_is_spectral() {
        let mut rng = trial_rng(2, 0);
        for dim in 1..5 {
            let f = random_spectral_povm(&mut rng, dim, 3, SupportRange::SYMMETRIC).unwrap();
            assert!(f.is_normalized());
            assert!(f.is_spectral(1e-10));
        }
    }

    #[test]
    fn contraction_norm_bounded() {
        let mut rng = trial_rng(3, 0);
        for _ in 0..20 {
            let c = random_contraction(&mut rng, 4).unwrap();
            let gram = HermitianMatrix::new(c.adjoint() * &c).unwrap();
            assert!(gram.spectral_norm().unwrap().sqrt() <= 1.0 + 1e-12);
        }
    }
}
