//! Joint-sparse recovery of the contrast sources.

mod norms;
mod options;
mod spg;
mod uniqueness;

pub use norms::{mixed_norm, project_l12_ball, row_norms, MixedNormSpec};
pub use options::SolverOptions;
pub use spg::{
    newton_update_tau, pareto_derivative, row_support, solve_gmmv_cv, solve_gmmv_sigma, spg_lasso_step, CvState,
    InversionResult, LassoProblem, OuterRecord, ParetoState, SpgState, StopReason,
};
pub use uniqueness::{spark, uniqueness_check, UniquenessReport, SPARK_MAX_COLUMNS};
