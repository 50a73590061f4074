//! The IHT iteration, the refit-on-final-support estimator, and the exact /
//! iterative restricted ERM sub-solvers (plain and l2-regularized).

use crate::error::{IhtError, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, hard_threshold, thresholding_margin, DenseVector, SupportSet};
use crate::loss::{empirical_gradient, empirical_risk, smoothness_bound, Dataset, LossModel};
use crate::stats::tree_sum;

/// Step-size policy for the gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// `2 / (3 * lambda_max(X'X/n))`: the global smoothness bound dominates
    /// every restricted one, so this step is conservative but always valid.
    Auto,
}

/// Configuration of a single IHT run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IhtConfig {
    /// Target sparsity level of the iterates.
    pub k: usize,
    pub eta: StepSize,
    /// Iteration cap T.
    pub max_iters: usize,
    /// Stop once the per-iteration objective decrease falls below this.
    pub obj_tol: f64,
    /// Solve the restricted ERM over the final support after the loop.
    pub refit: bool,
    /// Recorded with the run; lets callers tie a trace to an RNG stream.
    pub seed: u64,
}

impl IhtConfig {
    pub fn new(k: usize) -> Self {
        IhtConfig {
            k,
            eta: StepSize::Auto,
            max_iters: 500,
            obj_tol: 1e-10,
            refit: false,
            seed: 0,
        }
    }

    pub fn with_eta(mut self, eta: StepSize) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_max_iters(mut self, t: usize) -> Self {
        self.max_iters = t;
        self
    }

    pub fn with_obj_tol(mut self, tol: f64) -> Self {
        self.obj_tol = tol;
        self
    }

    pub fn with_refit(mut self, refit: bool) -> Self {
        self.refit = refit;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(IhtError::InvalidConfig("sparsity level k must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(IhtError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.obj_tol.is_finite() && self.obj_tol >= 0.0) {
            return Err(IhtError::InvalidConfig("obj_tol must be >= 0".into()));
        }
        if let StepSize::Fixed(e) = self.eta {
            if !(e.is_finite() && e > 0.0) {
                return Err(IhtError::InvalidConfig("fixed step size must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One entry of an IHT trajectory.
#[derive(Debug, Clone)]
pub struct IhtRecord {
    pub iterate: DenseVector,
    pub support: SupportSet,
    pub objective: f64,
    /// Hard-thresholding margin of the pre-threshold vector
    /// `w - eta * grad F_S(w)` that produced this iterate; `None` for the
    /// initial record and when `k >= p` (no thresholding happens).
    pub pre_margin: Option<f64>,
}

/// Full record of an IHT run: the iterate sequence (index 0 is the all-zero
/// start), the step size actually used, and the optional refit estimator.
#[derive(Debug, Clone)]
pub struct IhtTrace {
    pub records: Vec<IhtRecord>,
    pub eta: f64,
    pub refit: Option<DenseVector>,
    pub refit_objective: Option<f64>,
    pub config: IhtConfig,
}

impl IhtTrace {
    /// Number of gradient/threshold iterations performed.
    pub fn iterations_used(&self) -> usize {
        self.records.len() - 1
    }

    pub fn final_sparse_iterate(&self) -> &DenseVector {
        &self.records.last().expect("trace never empty").iterate
    }

    /// The estimator this run produces: the refit solution when refitting
    /// was requested, otherwise the last sparse iterate.
    pub fn estimator(&self) -> &DenseVector {
        self.refit.as_ref().unwrap_or_else(|| self.final_sparse_iterate())
    }

    pub fn final_support(&self) -> &SupportSet {
        &self.records.last().expect("trace never empty").support
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Smallest recorded pre-threshold margin, if any margins were recorded.
    pub fn min_margin(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.pre_margin)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
    }
}

/// Run IHT on the empirical risk: `w_t = H_k(w_{t-1} - eta grad F_S)` from
/// the all-zero start, stopping at `max_iters` or when the objective
/// stagnates. With `refit` set, the final entry is the restricted ERM over
/// the final support (the all-zero support refits to the zero vector).
pub fn iht_run(data: &Dataset, model: LossModel, cfg: &IhtConfig) -> Result<IhtTrace> {
    cfg.validate()?;
    let p = data.p();
    let eta = match cfg.eta {
        StepSize::Fixed(e) => e,
        StepSize::Auto => 2.0 / (3.0 * smoothness_bound(data)?),
    };

    let w0 = DenseVector::zeros(p);
    let obj0 = empirical_risk(model, &w0, data)?;
    let mut records = vec![IhtRecord {
        support: w0.support(),
        iterate: w0,
        objective: obj0,
        pre_margin: None,
    }];

    let mut prev_obj = obj0;
    for t in 1..=cfg.max_iters {
        let w = &records.last().expect("nonempty").iterate;
        let grad = match empirical_gradient(model, w, data) {
            Ok(g) => g,
            Err(IhtError::NonFinite { .. }) => return Err(IhtError::Diverged { iteration: t }),
            Err(e) => return Err(e),
        };
        let pre = w.step(eta, &grad);
        if pre.iter().any(|v| !v.is_finite()) {
            return Err(IhtError::Diverged { iteration: t });
        }
        let pre_margin = if cfg.k < p {
            Some(thresholding_margin(&pre, cfg.k)?)
        } else {
            None
        };
        let (next, support) = hard_threshold(&pre, cfg.k);
        let objective = empirical_risk(model, &next, data)?;
        if !objective.is_finite() {
            return Err(IhtError::Diverged { iteration: t });
        }
        records.push(IhtRecord {
            iterate: next,
            support,
            objective,
            pre_margin,
        });
        let decrease = prev_obj - objective;
        prev_obj = objective;
        if decrease < cfg.obj_tol {
            break;
        }
    }

    let (refit_w, refit_obj) = if cfg.refit {
        let support = records.last().expect("nonempty").support.clone();
        let w = if support.is_empty() {
            // argmin over the empty support is the zero vector
            DenseVector::zeros(p)
        } else {
            solve_restricted(data, model, &support, 0.0, DEFAULT_REFIT_TOL)?
        };
        let obj = empirical_risk(model, &w, data)?;
        (Some(w), Some(obj))
    } else {
        (None, None)
    };

    Ok(IhtTrace {
        records,
        eta,
        refit: refit_w,
        refit_objective: refit_obj,
        config: *cfg,
    })
}

const DEFAULT_REFIT_TOL: f64 = 1e-9;
const NEWTON_MAX_ITERS: usize = 500;

/// Exact restricted ERM: minimize `F_S` over `supp(w) subset J`. Squared
/// loss goes through the normal equations on the J-columns (with a tiny
/// ridge fallback when the restricted Gram is singular); logistic loss runs
/// a damped Newton iteration until the restricted gradient inf-norm is at
/// most `tol`.
pub fn restricted_erm(
    data: &Dataset,
    model: LossModel,
    support: &SupportSet,
    tol: f64,
) -> Result<DenseVector> {
    solve_restricted(data, model, support, 0.0, tol)
}

/// Restricted ERM with an added `lambda/2 ||w||^2` penalty; strongly convex,
/// so the minimizer is unique.
pub fn regularized_restricted_erm(
    data: &Dataset,
    model: LossModel,
    support: &SupportSet,
    lambda: f64,
    tol: f64,
) -> Result<DenseVector> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(IhtError::InvalidConfig(
            "regularized restricted ERM needs lambda > 0".into(),
        ));
    }
    solve_restricted(data, model, support, lambda, tol)
}

/// Restricted ERM over the support of `w`; never increases the objective
/// beyond solver tolerance.
pub fn refit(w: &DenseVector, data: &Dataset, model: LossModel, tol: f64) -> Result<DenseVector> {
    let support = w.support();
    if support.is_empty() {
        return Err(IhtError::EmptySupport);
    }
    solve_restricted(data, model, &support, 0.0, tol)
}

fn solve_restricted(
    data: &Dataset,
    model: LossModel,
    support: &SupportSet,
    lambda: f64,
    tol: f64,
) -> Result<DenseVector> {
    if support.is_empty() {
        return Err(IhtError::EmptySupport);
    }
    if let Some(max) = support.max_index() {
        if max >= data.p() {
            return Err(IhtError::SupportOutOfRange {
                index: max,
                p: data.p(),
            });
        }
    }
    let cols = support.as_slice();
    let sub = data.features().select_columns(cols)?;
    let w_restricted = match model {
        LossModel::Squared => solve_squared(&sub, data.responses(), lambda, tol)?,
        LossModel::Logistic => solve_logistic_newton(&sub, data.responses(), lambda, tol)?,
    };
    let mut full = vec![0.0; data.p()];
    for (slot, &c) in w_restricted.iter().zip(cols) {
        full[c] = *slot;
    }
    DenseVector::new(full)
}

/// Normal equations `(S'S/n + lambda I) w = S'y/n` on the restricted columns.
fn solve_squared(sub: &crate::linalg::DenseMatrix, y: &[f64], lambda: f64, tol: f64) -> Result<Vec<f64>> {
    let m = sub.n_cols();
    let n = sub.n_rows() as f64;
    let gram = sub.gram();
    let mut system = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            system[i * m + j] = gram.get(i, j) / n;
        }
    }
    for i in 0..m {
        system[i * m + i] += lambda;
    }
    let rhs: Vec<f64> = sub.matvec_t(y).into_iter().map(|v| v / n).collect();

    let factor = match cholesky(&system, m) {
        Ok(l) => l,
        Err(_) if lambda == 0.0 => {
            let trace: f64 = (0..m).map(|i| system[i * m + i]).sum();
            if trace <= 0.0 {
                return Err(IhtError::DegenerateData(
                    "restricted design has zero Gram trace".into(),
                ));
            }
            let ridge = 1e-10 * trace / m as f64;
            log::warn!(
                "singular restricted Gram ({m} columns); adding ridge {ridge:.3e} to proceed"
            );
            for i in 0..m {
                system[i * m + i] += ridge;
            }
            cholesky(&system, m).map_err(|_| IhtError::SingularSystem)?
        }
        Err(e) => return Err(e),
    };

    let mut w = cholesky_solve(&factor, m, &rhs);
    // iterative refinement against the unridged optimality condition
    for _ in 0..4 {
        let grad = restricted_grad_squared(sub, y, &w, lambda);
        let inf = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if inf <= tol {
            break;
        }
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let delta = cholesky_solve(&factor, m, &neg);
        for (wi, di) in w.iter_mut().zip(&delta) {
            *wi += di;
        }
    }
    Ok(w)
}

fn restricted_grad_squared(sub: &crate::linalg::DenseMatrix, y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    let n = sub.n_rows() as f64;
    let margins = sub.matvec(w);
    let residuals: Vec<f64> = margins.iter().zip(y).map(|(z, yi)| z - yi).collect();
    sub.matvec_t(&residuals)
        .into_iter()
        .zip(w)
        .map(|(g, wi)| g / n + lambda * wi)
        .collect()
}

/// Damped Newton with Armijo backtracking on the restricted logistic
/// objective `F_S + lambda/2 ||.||^2`.
fn solve_logistic_newton(
    sub: &crate::linalg::DenseMatrix,
    y: &[f64],
    lambda: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let m = sub.n_cols();
    let n = sub.n_rows();
    let inv_n = 1.0 / n as f64;
    let model = LossModel::Logistic;

    let objective = |w: &[f64], margins: &[f64]| -> f64 {
        let losses: Vec<f64> = margins
            .iter()
            .zip(y)
            .map(|(&z, &yi)| model.pointwise(z, yi))
            .collect();
        tree_sum(&losses) * inv_n + 0.5 * lambda * dot(w, w)
    };

    let mut w = vec![0.0; m];
    let mut margins = vec![0.0; n];
    let mut obj = objective(&w, &margins);
    let mut grad_inf = f64::INFINITY;

    for _iter in 0..NEWTON_MAX_ITERS {
        // gradient
        let slopes: Vec<f64> = margins
            .iter()
            .zip(y)
            .map(|(&z, &yi)| model.slope(z, yi))
            .collect();
        let mut grad: Vec<f64> = sub.matvec_t(&slopes).into_iter().map(|g| g * inv_n).collect();
        for (g, wi) in grad.iter_mut().zip(&w) {
            *g += lambda * wi;
        }
        grad_inf = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if grad_inf <= tol {
            return Ok(w);
        }

        // Hessian on the restricted block
        let mut hess = vec![0.0; m * m];
        for i in 0..n {
            let d = model.curvature(margins[i], y[i]) * inv_n;
            if d == 0.0 {
                continue;
            }
            let row = sub.row(i);
            for a in 0..m {
                let ra = d * row[a];
                if ra == 0.0 {
                    continue;
                }
                for (b, rb) in row.iter().enumerate() {
                    hess[a * m + b] += ra * rb;
                }
            }
        }
        let trace: f64 = (0..m).map(|i| hess[i * m + i]).sum();
        for i in 0..m {
            hess[i * m + i] += lambda;
        }

        // near-separable data can flatten the Hessian; escalate damping
        // until the factorization succeeds
        let mut damp = 0.0;
        let factor = loop {
            let mut sys = hess.clone();
            if damp > 0.0 {
                for i in 0..m {
                    sys[i * m + i] += damp;
                }
            }
            match cholesky(&sys, m) {
                Ok(l) => break l,
                Err(_) => {
                    let base = (trace.max(1e-300) / m as f64) * 1e-12;
                    damp = if damp == 0.0 { base } else { damp * 100.0 };
                    if damp > trace.max(1.0) * 1e6 {
                        return Err(IhtError::SingularSystem);
                    }
                }
            }
        };
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut dir = cholesky_solve(&factor, m, &neg_grad);
        let mut slope_along = dot(&grad, &dir);
        if slope_along >= 0.0 {
            dir = neg_grad.clone();
            slope_along = -dot(&grad, &grad);
        }

        let dir_margins = sub.matvec(&dir);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial_w: Vec<f64> = w.iter().zip(&dir).map(|(wi, di)| wi + step * di).collect();
            let trial_margins: Vec<f64> = margins
                .iter()
                .zip(&dir_margins)
                .map(|(z, dz)| z + step * dz)
                .collect();
            let trial_obj = objective(&trial_w, &trial_margins);
            if trial_obj <= obj + 1e-4 * step * slope_along {
                w = trial_w;
                margins = trial_margins;
                obj = trial_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(IhtError::NewtonNoConvergence {
                tol,
                max_iters: NEWTON_MAX_ITERS,
                grad_inf,
            });
        }
    }
    Err(IhtError::NewtonNoConvergence {
        tol,
        max_iters: NEWTON_MAX_ITERS,
        grad_inf,
    })
}
