//! Simulation and analysis of the viscoelastic Kirchhoff wave equation
//!
//! ```text
//! u_tt − M(t)u_xx + ∫₀ᵗ g(t−s)u_xx(s) ds + αu_t − βu_txx = |u|^{p−2}u   on (0, L)
//! u(0, t) = 0
//! u_tt(L, t) = −M(t)u_x + ∫₀ᵗ g(t−s)u_x(s) ds − βu_tx − γ|u_t|^{m−2}u_t   at x = L
//! M(t) = a + b‖u_x‖² + σ∫u_x u_tx
//! ```
//!
//! with P1 finite elements in space and a second-order implicit midpoint
//! scheme in time. The crate also evaluates the energy, potential and
//! blow-up functionals along a run, classifies initial data into stable and
//! unstable regimes, fits decay rates and detects finite-time blow-up.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod expr;
pub mod functionals;
pub mod integrator;
pub mod kernels;
pub mod linalg;
pub mod memory;
pub mod mesh;
pub mod problem;
pub mod report;

pub use analysis::{
    classify, classify_with, detect_blowup, estimate_depth_d1, estimate_embedding_constant,
    fit_decay, AnalysisConstants, AnalysisOptions, BlowupSummary, Classification, DecayFit,
    Verdict,
};
pub use error::{Error, Result};
pub use functionals::{EnergyLedger, LedgerRecord};
pub use integrator::{run, Model, RunOutput, Simulation, Termination};
pub use kernels::{check_hypotheses, KernelReport, RateFunction, RelaxationKernel};
pub use memory::{History, HistoryMode};
pub use mesh::{assemble, build_mesh, AssembledOperators, SpatialMesh};
pub use problem::{HistoryChoice, InitialData, ProblemConfig};
pub use report::{simulate, RunReport};
