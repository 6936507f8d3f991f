//! Numerical toolkit for maximal regularity of damped second-order Cauchy
//! problems `ü + Bů + Au = f`.
//!
//! The crate is organised around the objects that appear in the analysis:
//!
//! * [`operator`]: dense spatial operators, resolvents and fractional powers.
//! * [`pencil`]: the quadratic pencil `λ² + λB + A`, its inverse `H(λ)` and
//!   sampled certification of the sector bounds on `H`.
//! * [`norms`]: Hölder, little-Hölder, Besov and interpolation norms of
//!   sampled time paths.
//! * [`contour`] and [`solver`]: the contour-integral solution operator, the
//!   forward operator, a Crank–Nicolson reference solver and the
//!   initial-value solve.
//! * [`gallery`]: damped wave problems and the angle sweep.

pub mod contour;
pub mod error;
pub mod gallery;
pub mod io;
pub mod linalg;
pub mod norms;
pub mod operator;
pub mod path;
pub mod pencil;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
