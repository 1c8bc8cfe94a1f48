use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, IssueKind};

/// Tuning knobs of the spectral projected-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Iterations without CV improvement before stopping.
    pub delta_n: usize,
    /// Cap on the cumulative number of inner iterations.
    pub max_iterations: usize,
    /// Inner iterations per ball radius before a forced Newton update.
    pub max_inner: usize,
    pub step_min: f64,
    pub step_max: f64,
    /// Non-monotone line-search memory.
    pub ls_memory: usize,
    /// Sufficient-decrease constant.
    pub ls_gamma: f64,
    pub ls_max_backtracks: usize,
    /// Inner optimality tolerance on the normalized problem. Absolute, so it
    /// also bounds the certificate relative to `max(1, ||J||)`.
    pub opt_tol: f64,
    /// Residual target tolerance for the known-noise solve, relative to `||Y||`.
    pub sigma_tol: f64,
    /// Stop once the reconstruction residual falls below this fraction of `||Y||`.
    pub residual_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            delta_n: 30,
            max_iterations: 3000,
            max_inner: 200,
            step_min: 1e-16,
            step_max: 1e5,
            ls_memory: 3,
            ls_gamma: 1e-4,
            ls_max_backtracks: 12,
            opt_tol: 1e-5,
            sigma_tol: 1e-4,
            residual_floor: 1e-9,
        }
    }
}

impl SolverOptions {
    pub fn issues(&self, prefix: &str) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut bad = |field: &str, msg: &str| {
            out.push(ConfigIssue {
                kind: IssueKind::Invalid,
                path: format!("{prefix}.{field}"),
                message: msg.to_string(),
            })
        };
        if self.delta_n == 0 {
            bad("delta_n", "must be at least 1");
        }
        if self.max_iterations == 0 {
            bad("max_iterations", "must be at least 1");
        }
        if self.max_inner == 0 {
            bad("max_inner", "must be at least 1");
        }
        if !(self.step_min > 0.0 && self.step_max >= self.step_min) {
            bad("step_min", "step bounds must satisfy 0 < step_min <= step_max");
        }
        if self.ls_memory == 0 {
            bad("ls_memory", "must be at least 1");
        }
        if !(self.ls_gamma > 0.0 && self.ls_gamma < 1.0) {
            bad("ls_gamma", "must lie in (0, 1)");
        }
        if !(self.opt_tol > 0.0) {
            bad("opt_tol", "must be positive");
        }
        if !(self.sigma_tol > 0.0) {
            bad("sigma_tol", "must be positive");
        }
        if !(self.residual_floor >= 0.0) {
            bad("residual_floor", "must be non-negative");
        }
        out
    }
}
