//! Multiple-relaxation-time lattice Boltzmann engine for d-dimensional
//! diagonal-anisotropic diffusion equations with a linear source term
//!
//! ```text
//! ∂t φ = Σ_i κ_i ∂²_i φ + η φ + S
//! ```
//!
//! The crate covers the whole pipeline:
//!
//! * [`lattice`]: DdQ(2d²+1) and DdQ(2d+1) velocity sets, the natural moment
//!   basis and the transformation matrix `M`.
//! * [`params`]: synthesis of weights and relaxation rates that make the
//!   scheme fourth-order consistent while keeping the stability structure.
//! * [`stability`]: the `JW` structure check, von Neumann scans and
//!   parameter-region rasters.
//! * [`solver`]: the periodic stencil sweep (moment-space collision, pull
//!   streaming) with equilibrium and fourth-order initialization.
//! * [`bench`]: analytic benchmark cases and convergence studies.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, which is what the tolerances in the
//! test-suite assume.

// `!(x > 0)` also rejects NaN; index loops mirror the matrix notation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod params;
pub mod roots;
pub mod scalar;
pub mod solver;
pub mod stability;

pub use error::{Error, Infeasibility, Result};
pub use lattice::LatticeFamily;
pub use scalar::Scalar;

/// Double-precision lattice description.
pub type Lattice = lattice::LatticeSpec<f64>;
/// Double-precision weight set.
pub type Weights = lattice::WeightSet<f64>;
/// Double-precision relaxation rates.
pub type Rates = lattice::RelaxationSet<f64>;
/// Double-precision dense matrix.
pub type Matrix = linalg::DenseMatrix<f64>;
/// Double-precision complex dense matrix.
pub type ComplexMatrix = linalg::DenseMatrix<num_complex::Complex<f64>>;
/// Double-precision model parameters.
pub type Model = params::ModelParams<f64>;
/// Double-precision PDE description.
pub type Pde = params::PdeParams<f64>;
/// Double-precision discretization.
pub type Grid = params::Discretization<f64>;
/// Double-precision field state.
pub type Field = solver::FieldState<f64>;
/// Double-precision benchmark case.
pub type Case = bench::BenchmarkCase<f64>;
