//! Bombieri-normed polynomial spaces `P_k` on the Riemann sphere, sampling
//! and interpolation arrays with multiplicities, and the incomplete-beta
//! estimates behind them.
//!
//! Polynomials are stored in the orthonormal basis `e_{k,j} = C(k,j)^{1/2} z^j`.
//! The Möbius isometries `T_λ` are assembled from a cached spectral
//! decomposition of the rotation generator, which keeps them unitary to
//! round-off up to `k = MAX_DEGREE`.

pub mod annex;
pub mod array;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod poly;
pub mod special;
pub mod sphere;

/// Largest supported degree; dense decompositions above this are refused.
pub const MAX_DEGREE: usize = 2048;

pub use annex::{
    run_annex_suite, verify_annex, AnnexGrid, AnnexParams, AnnexSuiteReport, Baseline,
    InequalityId, MarginReport,
};
pub use array::{
    analysis_operator, frame_bounds, interpolation_constant, min_norm_interpolant, FrameReport,
    MultiplicityArray, Node,
};
pub use error::{Error, Result};
pub use experiment::{
    generate_array, run_sweep, ExperimentConfig, Generator, Hole, MultiplicityRule, OutputFormat,
    SweepRow,
};
pub use geometry::{
    geometry_report, overlap_count, separation_check, uncovered_mass, zero_array_mass_check,
    GeometryReport, SeparationReport,
};
pub use num_complex::Complex64;
pub use poly::{isometry_matrix, kernel, BombieriPolynomial, IsometryMatrix};
pub use special::{
    incomplete_beta_reg, incomplete_binomial_f, ln_gamma, ln_incomplete_beta_reg, log_binomial,
};
pub use sphere::{
    caps_disjoint, chordal_distance, disk_measure, fibonacci_points, mobius, sphere_mesh,
    ChordalDisk, PlanePoint,
};
