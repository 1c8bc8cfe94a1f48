//! Spectral projected gradient on the `l1,2` ball with Newton root finding
//! on the Pareto curve, and the cross-validated stopping rule.

use std::borrow::Cow;
use std::collections::VecDeque;

use faer::{c64, Mat, MatRef};
use serde::Serialize;

use super::norms::{mixed_norm, project_l12_ball, row_norms, MixedNormSpec};
use super::SolverOptions;
use crate::dataset::ScatterDataset;
use crate::error::{Error, Result};
use crate::model::RowSelection;
use crate::sensing::{blocks_norm, SensingOperator};

/// Least-squares data term `1/2 ||Phi J - Y||^2` over the reconstruction rows.
/// Operator and data may carry internal scale factors.
#[derive(Debug)]
pub struct LassoProblem<'a> {
    op: Cow<'a, SensingOperator>,
    y: Vec<Mat<c64>>,
    op_scale: f64,
    data_scale: f64,
}

impl<'a> LassoProblem<'a> {
    /// Problem in physical units. The role split of `data` decides which
    /// rows are fitted.
    pub fn new(op: &'a SensingOperator, data: &ScatterDataset) -> Result<Self> {
        op.check_dataset(data)?;
        let op = if op.measurement() == data.measurement() {
            Cow::Borrowed(op)
        } else {
            Cow::Owned(op.with_measurement(data.measurement().clone())?)
        };
        let y = data
            .blocks()
            .iter()
            .map(|b| {
                let mut b = b.clone();
                op.apply_mask(&mut b, RowSelection::All);
                b
            })
            .collect();
        Ok(Self {
            op,
            y,
            op_scale: 1.0,
            data_scale: 1.0,
        })
    }

    /// Rescales internally so that the reconstruction data have unit norm
    /// and the largest kernel column has unit norm.
    pub fn normalized(mut self) -> Result<Self> {
        let b = self.recon_data_norm();
        if !(b > 0.0) {
            return Err(Error::InvalidArgument("reconstruction data are identically zero".into()));
        }
        let a = self
            .op
            .kernels()
            .iter()
            .flat_map(|k| k.col_iter().map(|c| c.norm_l2()))
            .fold(0.0, f64::max);
        if !(a > 0.0) {
            return Err(Error::InvalidArgument("sensing operator is zero".into()));
        }
        let s = c64::new(1.0 / (b * self.data_scale), 0.0);
        for blk in &mut self.y {
            *blk = &*blk * faer::Scale(s);
        }
        self.data_scale = b;
        self.op_scale = a;
        Ok(self)
    }

    pub fn operator(&self) -> &SensingOperator {
        &self.op
    }

    /// Factor converting internal contrast sources to physical ones.
    pub fn source_scale(&self) -> f64 {
        self.data_scale / self.op_scale
    }

    pub fn data_scale(&self) -> f64 {
        self.data_scale
    }

    fn recon_data_norm(&self) -> f64 {
        let r: Vec<Mat<c64>> = self
            .y
            .iter()
            .map(|b| {
                let mut b = b.clone();
                self.op.apply_mask(&mut b, RowSelection::Recon);
                b
            })
            .collect();
        blocks_norm(&r)
    }

    /// Reconstruction residual `Y - Phi J` and the CV residual norm.
    fn evaluate(&self, j: MatRef<'_, c64>) -> Result<(Vec<Mat<c64>>, f64)> {
        let pred = self.op.apply_forward(j, RowSelection::All)?;
        let inv = faer::Scale(c64::new(1.0 / self.op_scale, 0.0));
        let mut recon = Vec::with_capacity(pred.len());
        let mut cv = 0.0;
        for (p, y) in pred.iter().zip(&self.y) {
            let all = y - p * inv;
            let mut r = all.clone();
            self.op.apply_mask(&mut r, RowSelection::Recon);
            cv += (&all - &r).norm_l2().powi(2);
            recon.push(r);
        }
        Ok((recon, cv.sqrt()))
    }

    /// `Phi^H (Phi J - Y)` from the reconstruction residual `Y - Phi J`.
    fn gradient(&self, residual: &[Mat<c64>]) -> Result<Mat<c64>> {
        let g = self.op.apply_adjoint(residual, RowSelection::Recon)?;
        Ok(&g * faer::Scale(c64::new(-1.0 / self.op_scale, 0.0)))
    }
}

/// Iterate of the inner solver together with its residual and gradient.
#[derive(Debug, Clone)]
pub struct SpgState {
    pub j: Mat<c64>,
    pub residual: Vec<Mat<c64>>,
    pub gradient: Mat<c64>,
    /// `||Y - Phi J||` on the reconstruction rows.
    pub residual_norm: f64,
    pub cv_norm: f64,
    /// Current spectral step length.
    pub step: f64,
    history: VecDeque<f64>,
}

impl SpgState {
    pub fn new(problem: &LassoProblem<'_>, j: Mat<c64>) -> Result<Self> {
        let (residual, cv_norm) = problem.evaluate(j.as_ref())?;
        let gradient = problem.gradient(&residual)?;
        let residual_norm = blocks_norm(&residual);
        Ok(Self {
            j,
            residual,
            gradient,
            residual_norm,
            cv_norm,
            step: 1.0,
            history: VecDeque::from([0.5 * residual_norm * residual_norm]),
        })
    }

    pub fn objective(&self) -> f64 {
        0.5 * self.residual_norm * self.residual_norm
    }

    /// Projected-gradient optimality measure `||J - P(J - G)||`.
    pub fn optimality(&self, tau: f64) -> Result<f64> {
        let p = project_l12_ball((&self.j - &self.gradient).as_ref(), tau)?;
        Ok((&self.j - p).norm_l2())
    }

    /// Initial step `1 / max |P(J - G) - J|`, clipped to the bounds.
    fn reset_step(&mut self, tau: f64, opts: &SolverOptions) -> Result<()> {
        let p = project_l12_ball((&self.j - &self.gradient).as_ref(), tau)?;
        let d = (p - &self.j)
            .col_iter()
            .flat_map(|c| c.iter().map(|z| z.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        self.step = if d > 0.0 {
            (1.0 / d).clamp(opts.step_min, opts.step_max)
        } else {
            1.0
        };
        Ok(())
    }
}

fn re_inner(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for c in 0..a.ncols() {
        for n in 0..a.nrows() {
            let (x, y) = (a[(n, c)], b[(n, c)]);
            s += x.re * y.re + x.im * y.im;
        }
    }
    s
}

/// One spectral projected-gradient iteration for `min 1/2 ||Phi J - Y||^2`
/// subject to `||J||_{1,2} <= tau`, with a non-monotone projected line search.
pub fn spg_lasso_step(
    state: &mut SpgState,
    problem: &LassoProblem<'_>,
    tau: f64,
    opts: &SolverOptions,
) -> Result<()> {
    let f_ref = state.history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // A spectral step that overshoots by more than the backtracking range
    // is retried once from a unit step.
    let starts = if state.step > 1.0 { vec![state.step, 1.0] } else { vec![state.step] };
    for start in starts {
        if line_search(state, problem, tau, opts, f_ref, start)? {
            return Ok(());
        }
    }
    Err(Error::LinesearchFailed(opts.ls_max_backtracks))
}

fn line_search(
    state: &mut SpgState,
    problem: &LassoProblem<'_>,
    tau: f64,
    opts: &SolverOptions,
    f_ref: f64,
    start: f64,
) -> Result<bool> {
    let mut alpha = start;
    for _ in 0..=opts.ls_max_backtracks {
        if alpha * state.gradient.norm_l2() <= f64::EPSILON * state.j.norm_l2() {
            break;
        }
        let trial = project_l12_ball((&state.j - &state.gradient * faer::Scale(c64::new(alpha, 0.0))).as_ref(), tau)?;
        let dx = &trial - &state.j;
        let gtd = re_inner(&state.gradient, &dx);
        let (residual, cv_norm) = problem.evaluate(trial.as_ref())?;
        let rn = blocks_norm(&residual);
        let f_new = 0.5 * rn * rn;
        // Slack for rounding in the objective once the iterate is stationary.
        let slack = 64.0 * f64::EPSILON * f_ref;
        if f_new <= f_ref + opts.ls_gamma * gtd + slack {
            let gradient = problem.gradient(&residual)?;
            let dg = &gradient - &state.gradient;
            let sts = dx.norm_l2().powi(2);
            let sty = re_inner(&dx, &dg);
            state.step = if sty <= 0.0 {
                opts.step_max
            } else {
                (sts / sty).clamp(opts.step_min, opts.step_max)
            };
            state.j = trial;
            state.residual = residual;
            state.gradient = gradient;
            state.residual_norm = rn;
            state.cv_norm = cv_norm;
            state.history.push_back(f_new);
            while state.history.len() > opts.ls_memory {
                state.history.pop_front();
            }
            return Ok(true);
        }
        alpha *= 0.5;
    }
    Ok(false)
}

/// Slope of the Pareto curve at `J`: `-||Phi^H r||_{inf,2} / ||r||`.
pub fn pareto_derivative(problem: &LassoProblem<'_>, j: MatRef<'_, c64>) -> Result<f64> {
    let (residual, _) = problem.evaluate(j)?;
    let rn = blocks_norm(&residual);
    if rn == 0.0 {
        return Err(Error::ZeroResidual);
    }
    let g = problem.gradient(&residual)?;
    Ok(-mixed_norm(g.as_ref(), MixedNormSpec::LINF2)? / rn)
}

fn derivative_from_state(state: &SpgState) -> Result<f64> {
    if state.residual_norm == 0.0 {
        return Err(Error::ZeroResidual);
    }
    Ok(-mixed_norm(state.gradient.as_ref(), MixedNormSpec::LINF2)? / state.residual_norm)
}

/// Point on the Pareto curve probed by the outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoState {
    pub tau: f64,
    /// Target residual.
    pub sigma: f64,
    pub phi: f64,
    pub dphi: f64,
    pub outer: usize,
}

/// Newton step `tau + (sigma - phi) / phi'`. While the residual is above
/// target the radius must grow; a non-increasing proposal is replaced by
/// `2 tau`.
pub fn newton_update_tau(s: &ParetoState) -> Result<f64> {
    if !(s.dphi < 0.0) {
        return Err(Error::NonnegativeDerivative(s.dphi));
    }
    let t = s.tau + (s.sigma - s.phi) / s.dphi;
    if s.phi > s.sigma && t <= s.tau {
        return Ok(2.0 * s.tau);
    }
    Ok(t.max(0.0))
}

/// Residual bookkeeping of the cross-validated stopping rule.
#[derive(Debug, Clone)]
pub struct CvState {
    pub r_rec: Vec<f64>,
    pub r_cv: Vec<f64>,
    pub n_iter: usize,
    pub n_opt: usize,
    pub delta_n: usize,
    pub snapshot: Mat<c64>,
}

impl CvState {
    fn new(state: &SpgState, delta_n: usize) -> Self {
        Self {
            r_rec: vec![state.residual_norm],
            r_cv: vec![state.cv_norm],
            n_iter: 0,
            n_opt: 0,
            delta_n,
            snapshot: state.j.clone(),
        }
    }

    /// Records one inner iteration; true once `delta_n` iterations have
    /// passed without improving the CV residual.
    fn record(&mut self, state: &SpgState) -> bool {
        self.n_iter += 1;
        self.r_rec.push(state.residual_norm);
        self.r_cv.push(state.cv_norm);
        if state.cv_norm < self.r_cv[self.n_opt] {
            self.n_opt = self.n_iter;
            self.snapshot = state.j.clone();
        }
        self.n_iter >= self.n_opt + self.delta_n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    /// No CV improvement for `delta_n` iterations.
    CvPatience,
    /// Reconstruction residual below the floor.
    ResidualFloor,
    /// Residual reached the prescribed target.
    SigmaReached,
    MaxIterations,
    LinesearchFailed,
}

/// One subproblem of the outer iteration, in physical units except the
/// certificate, which is measured on the internally normalized problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuterRecord {
    pub tau: f64,
    pub phi: f64,
    pub certificate: f64,
    pub converged: bool,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    /// Contrast sources `cells x (P * I)`.
    pub j: Mat<c64>,
    pub tau: f64,
    pub outer: Vec<OuterRecord>,
    /// Residual histories; entry `k` follows inner iteration `k` (0 is the zero start).
    pub r_rec: Vec<f64>,
    pub r_cv: Vec<f64>,
    pub n_iter: usize,
    pub n_opt: Option<usize>,
    /// Noise level implied by the CV minimum, `r_rec(n_opt)`.
    pub sigma_hat: Option<f64>,
    pub stop: StopReason,
    /// Norm of the fitted data.
    pub y_norm: f64,
}

impl InversionResult {
    pub fn tau_history(&self) -> Vec<f64> {
        self.outer.iter().map(|o| o.tau).collect()
    }
}

#[derive(Clone, Copy)]
enum Mode {
    Cv,
    Sigma(f64),
}

fn check_options(opts: &SolverOptions) -> Result<()> {
    let issues = opts.issues("solver");
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(issues))
    }
}

fn run(op: &SensingOperator, data: &ScatterDataset, opts: &SolverOptions, mode: Mode) -> Result<InversionResult> {
    check_options(opts)?;
    let problem = LassoProblem::new(op, data)?.normalized()?;
    let b = problem.data_scale();
    let src = problem.source_scale();
    let sigma = match mode {
        Mode::Cv => 0.0,
        Mode::Sigma(s) => s / b,
    };
    let mut state = SpgState::new(&problem, Mat::zeros(op.n_cells(), op.n_columns()))?;
    let y_norm = state.residual_norm;
    let mut cv = CvState::new(&state, opts.delta_n);
    let mut outer = Vec::new();

    let finish = |j: &Mat<c64>, tau: f64, outer: Vec<OuterRecord>, cv: &CvState, stop: StopReason| {
        let cv_mode = matches!(mode, Mode::Cv);
        InversionResult {
            j: j * faer::Scale(c64::new(src, 0.0)),
            tau: tau * src,
            outer,
            r_rec: cv.r_rec.iter().map(|v| v * b).collect(),
            r_cv: cv.r_cv.iter().map(|v| v * b).collect(),
            n_iter: cv.n_iter,
            n_opt: cv_mode.then_some(cv.n_opt),
            sigma_hat: cv_mode.then(|| cv.r_rec[cv.n_opt] * b),
            stop,
            y_norm: y_norm * b,
        }
    };

    if let Mode::Sigma(_) = mode {
        if state.residual_norm - sigma <= opts.sigma_tol * y_norm {
            return Ok(finish(&state.j, 0.0, outer, &cv, StopReason::SigmaReached));
        }
    }
    let mut tau = newton_update_tau(&ParetoState {
        tau: 0.0,
        sigma,
        phi: state.residual_norm,
        dphi: derivative_from_state(&state)?,
        outer: 0,
    })?;
    state.reset_step(tau, opts)?;
    let mut failures = 0;

    let stop = 'outer: loop {
        let mut inner = 0;
        let mut certificate = f64::INFINITY;
        let mut stalled = false;
        let mut stop = None;
        while inner < opts.max_inner {
            match spg_lasso_step(&mut state, &problem, tau, opts) {
                Ok(()) => failures = 0,
                Err(Error::LinesearchFailed(_)) => {
                    stalled = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            inner += 1;
            let patience = cv.record(&state);
            certificate = state.optimality(tau)?;
            stop = match mode {
                Mode::Cv if patience => Some(StopReason::CvPatience),
                Mode::Sigma(_) if state.residual_norm - sigma <= opts.sigma_tol * y_norm => {
                    Some(StopReason::SigmaReached)
                }
                _ if state.residual_norm <= opts.residual_floor * y_norm => Some(StopReason::ResidualFloor),
                _ if cv.n_iter >= opts.max_iterations => Some(StopReason::MaxIterations),
                _ => None,
            };
            if stop.is_some() || certificate <= opts.opt_tol {
                break;
            }
        }
        outer.push(OuterRecord {
            tau: tau * src,
            phi: state.residual_norm * b,
            certificate,
            converged: certificate <= opts.opt_tol,
            inner_iterations: inner,
        });
        if let Some(s) = stop {
            break 'outer s;
        }
        if stalled {
            failures += 1;
            if failures >= 2 {
                break 'outer StopReason::LinesearchFailed;
            }
            state.reset_step(tau, opts)?;
        }
        let pareto = ParetoState {
            tau,
            sigma,
            phi: state.residual_norm,
            dphi: derivative_from_state(&state)?,
            outer: outer.len(),
        };
        tau = newton_update_tau(&pareto)?;
    };

    match mode {
        Mode::Cv => {
            if stop == StopReason::MaxIterations && cv.n_opt == cv.n_iter {
                return Err(Error::MaxIterations(opts.max_iterations));
            }
            let snapshot = cv.snapshot.clone();
            Ok(finish(&snapshot, tau, outer, &cv, stop))
        }
        Mode::Sigma(_) => {
            if stop == StopReason::MaxIterations {
                return Err(Error::MaxIterations(opts.max_iterations));
            }
            Ok(finish(&state.j, tau, outer, &cv, stop))
        }
    }
}

/// Inversion with the noise level unknown: the target residual is zero and
/// the iteration stops on the cross-validation residual. Returns the iterate
/// with the smallest CV residual.
pub fn solve_gmmv_cv(op: &SensingOperator, data: &ScatterDataset, opts: &SolverOptions) -> Result<InversionResult> {
    if !data.measurement().has_cv() {
        return Err(Error::InvalidArgument("cross-validated solve needs CV receivers".into()));
    }
    run(op, data, opts, Mode::Cv)
}

/// Inversion for a known residual target `sigma` (physical units).
pub fn solve_gmmv_sigma(
    op: &SensingOperator,
    data: &ScatterDataset,
    sigma: f64,
    opts: &SolverOptions,
) -> Result<InversionResult> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("target residual {sigma} is negative")));
    }
    run(op, data, opts, Mode::Sigma(sigma))
}

/// Support of `j`: rows with norm above `tol` times the largest row norm.
pub fn row_support(j: MatRef<'_, c64>, tol: f64) -> Vec<usize> {
    let v = row_norms(j);
    let m = v.iter().copied().fold(0.0, f64::max);
    (0..v.len()).filter(|&n| m > 0.0 && v[n] > tol * m).collect()
}
