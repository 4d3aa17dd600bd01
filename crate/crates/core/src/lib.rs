//! Finite-dimensional laboratory for degenerate stochastic evolution
//! equations
//!
//! ```text
//! d((B + εR)u) + (A(u) + εRu) dt = f dt + BΦ dW
//! ```
//!
//! with a positive semidefinite `B`, a monotone `A` and a `Q`-Wiener
//! process `W`. The crate provides the semi-inner product `⟨B·,·⟩`, seeded
//! reproducible noise, time steppers, and a numerical ledger for the
//! generalized Itô energy identity.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*F64`
//! aliases below fix the usual choice.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bform;
pub mod error;
pub mod integrator;
pub mod itolab;
pub mod linalg;
pub mod noise;
pub mod operators;
pub mod problems;
pub mod scalar;

pub use bform::{b_gram_schmidt, b_parseval, bzz_pairing, BForm, BOrthonormalBasis, Parseval};
pub use error::{Error, Result};
pub use integrator::{
    mc_map, mc_run, mean_and_se, picard_ball_solve, solve_path, solve_with_increments, step_explicit, step_implicit,
    EnsembleSummary, Observable, PathFlags, PathResult, Problem, Scheme, SolverConfig, Stepper,
};
pub use itolab::{
    energy_inequality_check, expected_energy_check, pathwise_ledger, qv_bound_check, regularized_ledger,
    sup_energy_diagnostic, EnergyInequalityReport, Estimate, IdentityReport, ItoLedger, SupEnergyDiagnostic,
};
pub use linalg::Mat;
pub use noise::{
    dyadic_partitions, ito_integral, path_seed, quadratic_variation, sample_increments, NoiseModel, Partition,
    QVEstimate, WienerPath,
};
pub use operators::{
    ball_project, check_coercivity, check_growth, check_monotonicity, exp_shift, CheckReport, GrowthBound,
    NonlinearOperator, OperatorMetadata,
};
pub use problems::{make_degenerate_plaplacian, make_ou, make_porous_media, make_zero_b, sine_mode_noise, Grid1D};
pub use scalar::Real;

pub type MatF64 = Mat<f64>;
pub type BFormF64 = BForm<f64>;
pub type NoiseModelF64 = NoiseModel<f64>;
pub type PartitionF64 = Partition<f64>;
pub type OperatorF64 = NonlinearOperator<f64>;
pub type ProblemF64 = Problem<f64>;
pub type SolverConfigF64 = SolverConfig<f64>;
pub type PathResultF64 = PathResult<f64>;
pub type ItoLedgerF64 = ItoLedger<f64>;
pub type Grid1DF64 = Grid1D<f64>;

pub type MatF32 = Mat<f32>;
pub type BFormF32 = BForm<f32>;
pub type ProblemF32 = Problem<f32>;
pub type SolverConfigF32 = SolverConfig<f32>;
pub type PathResultF32 = PathResult<f32>;
