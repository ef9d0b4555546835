//! Numerical laboratory for the periodic Gaussian isoperimetric inequality.
//!
//! * [`theta_kernel`]: the periodized Gaussian density `p_n` and its bounds
//! * [`periodic_sets`]: phase functions whose nonnegativity sets are periodized
//! * [`surface_quadrature`]: boundary meshes and every surface integral
//! * [`noise_stability`]: seeded Monte Carlo and quadrature for noise stability

pub mod error;
pub mod noise_stability;
pub mod numerics;
pub mod periodic_sets;
pub mod surface_quadrature;
pub mod theta_kernel;

pub use error::{Error, Result};
pub use periodic_sets::{
    make_half_space, make_perturbed, membership, validate_symmetry, FamilySpec, HalfSpaceSpec,
    Membership, PerturbationMode, PhaseFunction, SymmetryReport,
};
pub use theta_kernel::{half_space_perimeter_exact, ThetaKernel};
