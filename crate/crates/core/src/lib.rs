//! Numerics for non-local double-integral energies
//!
//! ```text
//! F_ε(u) = ∫_Ω ∫_Ω a((x − y)/ε) f(u(x) − u(y)) dx dy,   Ω = (0, 1)
//! ```
//!
//! with a 1-periodic step kernel `a` and a triple-well potential `f`.
//!
//! * [`kernel`]: periodic step kernels and their exact antiderivatives.
//! * [`states`]: step functions, potentials and the `u = z + χ` structure.
//! * [`energy`]: exact evaluation of `F_ε` and a quadrature oracle.
//! * [`cell`]: the cell problem and its three solvers.
//! * [`gammalab`]: finite-ε limit experiments and certificates.

pub mod cell;
pub mod energy;
pub mod error;
pub mod gammalab;
pub mod kernel;
pub mod numeric;
pub mod states;

pub use cell::{
    build_cell_matrix, cell_energy, gamma_closed_form, optimal_profile, solve_brute_force, solve_closed_form,
    solve_relaxed, BruteForceMode, CellKernelMatrix, CellMethod, CellProfile, CellSolveResult, MatvecMode,
    Orientation, RelaxedOptions,
};
pub use energy::{evaluate, evaluate_quadrature, rect_integral, EnergyMethod, EnergyReport};
pub use error::{Error, Result};
pub use gammalab::{
    fm_threshold_experiment, gamma_limit_constant_value, homogenized_f, implied_g1, non_representability_certificate,
    run_recovery_study, step_limit_value, two_scale_pairing, Certificate, CertificatePayload, ConvergenceStudy,
    Deviation, LambdaParams, NonRepTolerances, Verdict,
};
pub use kernel::{kernel_mean, make_lambda_kernel, PeriodicStep, PeriodicStepKernel};
pub use numeric::{compensated_sum, fit_power_law, CompensatedSum, ExtReal, PowerLawFit};
pub use states::{
    admissible_interval, decompose, eval_potential, oscillating_profile, AdmissibleDecomposition, AdmissibleInterval,
    CellArc, Potential, StepFunction,
};
