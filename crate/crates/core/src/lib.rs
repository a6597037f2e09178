//! Numerical toolkit for finitely supported operator-valued measures on the
//! real line.
//!
//! * [`hermitian`]: Hermitian matrices, spectral decomposition, functional
//!   calculus and tolerance predicates.
//! * [`povm`]: finite POV measures, operator moments, variance, Hankel
//!   matrices, pushforwards.
//! * [`dilation`]: minimal Naimark dilations and compressions.
//! * [`characterization`]: two-moment spectrality certificates.
//! * [`counterexample`]: explicit non-spectral measures matching two moments.
//! * [`inequalities`]: Kadison, Hansen and Lieb-Ruskai gaps.
//! * [`verify`]: seeded property suites, shared by the CLI and tests.

pub mod characterization;
pub mod cli;
pub mod corpus;
pub mod counterexample;
pub mod dilation;
pub mod error;
pub mod hermitian;
pub mod inequalities;
pub mod povm;
pub mod verify;

pub use dilation::{dilate_minimal, NaimarkDilation};
pub use error::{OvmError, Result};
pub use hermitian::{HermitianMatrix, Interval, SpectralDecomposition};
pub use povm::FiniteOVM;
