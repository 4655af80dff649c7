//! Domain-preserving strong approximation of scalar SDEs.
//!
//! A scalar SDE `dy = a(y) dt + b(y) dw` living on an open interval is mapped by a
//! Lamperti-type transform `x = F(y)` onto an SDE with constant noise. The transformed
//! equation is stepped with the drift-implicit (backward) Euler-Maruyama scheme, whose
//! implicit equation has a unique root inside the transformed domain for every increment,
//! so the back-transformed approximation `Y_k = F^{-1}(X_k)` never leaves the domain.
//!
//! Modules:
//!
//! * [`model`] the five supported models, their parameter checks and order thresholds.
//! * [`lamperti`] the transformed drift, its derivatives and the transform pair.
//! * [`implicit`] the implicit step solver and the CIR closed forms.
//! * [`brownian`] counter-based Brownian increments with exact coarse/fine coupling.
//! * [`schemes`] time stepping over a Brownian path.
//! * [`error_lab`] Monte Carlo strong-error estimation and log-log order fits.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod brownian;
pub mod error;
pub mod error_lab;
pub mod implicit;
pub mod lamperti;
pub mod model;
pub mod normal;
pub mod schemes;

mod math;

pub use brownian::{coarsen, sample_path, BrownianPath, GridSpec, SeedId};
pub use error::{Error, Result};
pub use error_lab::{
    compare_milstein_lbe, estimate_strong_error, fit_convergence, moment_monitor,
    ConvergenceReport, ErrorEstimate, Metric, PathMap, Serial,
};
pub use implicit::{
    admissible_step, cir_step_closed_form, milstein_cir_step, solve_implicit, StepSolverConfig,
};
pub use lamperti::{back_transform_path, transform, TransformedModel};
pub use model::{
    max_strong_order_p, validate_params, AitSahaliaParams, CevParams, CirParams, Heston32Params,
    Interval, Model, ModelId, ModelSpec, ValidityReport, WrightFisherParams,
};
pub use schemes::{
    interpolate_linear, run_bem, run_explicit_em, run_lbe, run_lbe_transformed, run_milstein_cir,
    SchemeConfig, SchemeId, SchemeRun,
};
