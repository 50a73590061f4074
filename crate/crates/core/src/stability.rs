//! Stability diagnostics: hard-thresholding margins along IHT trajectories,
//! the exact population trajectory of the linear illustrating model,
//! support-overlap measures, leave-one-out uniform-stability estimation for
//! the regularized restricted estimator, and the strong-signal
//! support-recovery predicate.

use crate::error::{IhtError, Result};
use crate::linalg::{hard_threshold, thresholding_margin, DenseVector, SupportSet};
use crate::loss::{loss_value, Dataset, LossModel};
use crate::rng::RngStream;
use crate::solver::regularized_restricted_erm;
use crate::synth::{draw_sample, GenerativeSpec};
use rand::Rng;

/// Aggregated stability diagnostics for one run.
///
/// IHT-stability is reported as a margin profile rather than a boolean: the
/// driving risk function is `(eps, eta, T, w0)`-IHT stable for every
/// `eps <= min_margin`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Margin of `w_{t-1} - eta * grad F(w_{t-1})` for t = 1..T.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    /// Fraction of iterations where two compared runs selected the same
    /// support.
    pub support_match_rate: f64,
    /// Empirical leave-one-out uniform-stability estimate.
    pub loo_gamma_hat: f64,
}

impl StabilityReport {
    pub fn new(margins: Vec<f64>, support_match_rate: f64, loo_gamma_hat: f64) -> Result<Self> {
        if margins.is_empty() {
            return Err(IhtError::InvalidConfig(
                "stability report needs at least one margin".into(),
            ));
        }
        if margins.iter().any(|m| !m.is_finite())
            || !support_match_rate.is_finite()
            || !loo_gamma_hat.is_finite()
        {
            return Err(IhtError::NonFinite {
                context: "StabilityReport::new",
            });
        }
        if !(0.0..=1.0).contains(&support_match_rate) {
            return Err(IhtError::InvalidConfig(
                "support_match_rate must lie in [0, 1]".into(),
            ));
        }
        let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(StabilityReport {
            margins,
            min_margin,
            support_match_rate,
            loo_gamma_hat,
        })
    }
}

/// IHT trajectory driven by an arbitrary gradient field, with the
/// pre-threshold margin recorded at every step. `iterates[0]` is `w0` and
/// `iterates[t]` the t-th iterate; `margins[t-1]` belongs to the step that
/// produced it.
#[derive(Debug, Clone)]
pub struct MarginTrace {
    pub iterates: Vec<DenseVector>,
    pub margins: Vec<f64>,
}

impl MarginTrace {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn supports(&self) -> Vec<SupportSet> {
        self.iterates.iter().map(|w| w.support()).collect()
    }
}

/// Run the IHT recursion against a supplied gradient field (population or
/// empirical) and record the hard-thresholding margin of every
/// pre-threshold vector. The field is `(eps, eta, T, w0)`-IHT stable for
/// every `eps` up to the minimum recorded margin.
pub fn iht_stability_trace<G>(
    gradient: G,
    k: usize,
    eta: f64,
    iters: usize,
    w0: &DenseVector,
) -> Result<MarginTrace>
where
    G: Fn(&DenseVector) -> DenseVector,
{
    let p = w0.dim();
    if k == 0 || k >= p {
        return Err(IhtError::MarginUndefined { k, p });
    }
    if iters == 0 {
        return Err(IhtError::InvalidConfig("iht_stability_trace needs T >= 1".into()));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(IhtError::InvalidConfig("step size must be positive".into()));
    }
    if w0.num_nonzeros() > k {
        return Err(IhtError::InvalidConfig(
            "initial point must be k-sparse".into(),
        ));
    }
    let mut iterates = Vec::with_capacity(iters + 1);
    let mut margins = Vec::with_capacity(iters);
    iterates.push(w0.clone());
    for _t in 1..=iters {
        let w = iterates.last().expect("nonempty");
        let g = gradient(w);
        if g.dim() != p {
            return Err(IhtError::DimensionMismatch {
                context: "iht_stability_trace gradient",
                expected: p,
                got: g.dim(),
            });
        }
        let pre = w.step(eta, &g);
        if pre.iter().any(|v| !v.is_finite()) {
            return Err(IhtError::NonFinite {
                context: "iht_stability_trace pre-threshold vector",
            });
        }
        margins.push(thresholding_margin(&pre, k)?);
        let (next, _) = hard_threshold(&pre, k);
        iterates.push(next);
    }
    Ok(MarginTrace { iterates, margins })
}

/// Exact population IHT trajectory and risks for the linear illustrating
/// model `F(w) = ||w - w_tilde||^2 / 2 + sigma^2 / 2`.
#[derive(Debug, Clone)]
pub struct LinearPopulationTrace {
    /// `iterates[t] = (1 - (1-eta)^t) * w_tilde restricted to J`, with
    /// `iterates[0] = 0`.
    pub iterates: Vec<DenseVector>,
    /// Exact population risk of each iterate.
    pub risks: Vec<f64>,
    /// Top-k support J of `w_tilde`.
    pub support: SupportSet,
}

/// Closed-form population IHT trajectory for the linear model: serves as the
/// ground-truth oracle for [`iht_stability_trace`] and the solver tests.
/// Requires `eta` in (0, 1) and a strictly positive thresholding gap at
/// position k (otherwise the top-k support is ambiguous).
pub fn population_iht_linear_oracle(
    w_tilde: &DenseVector,
    sigma: f64,
    k: usize,
    eta: f64,
    iters: usize,
) -> Result<LinearPopulationTrace> {
    let p = w_tilde.dim();
    if k == 0 || k >= p {
        return Err(IhtError::MarginUndefined { k, p });
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(IhtError::InvalidConfig(
            "population oracle requires eta in (0, 1)".into(),
        ));
    }
    if thresholding_margin(w_tilde, k)? <= 0.0 {
        return Err(IhtError::AmbiguousTopK { k });
    }
    let (projected, support) = hard_threshold(w_tilde, k);
    let mut iterates = Vec::with_capacity(iters + 1);
    let mut risks = Vec::with_capacity(iters + 1);
    let risk_of = |w: &DenseVector| 0.5 * w.sub(w_tilde).norm_sq() + 0.5 * sigma * sigma;
    let zero = DenseVector::zeros(p);
    risks.push(risk_of(&zero));
    iterates.push(zero);
    for t in 1..=iters {
        let coef = 1.0 - (1.0 - eta).powi(t as i32);
        let w = projected.scale(coef);
        risks.push(risk_of(&w));
        iterates.push(w);
    }
    Ok(LinearPopulationTrace {
        iterates,
        risks,
        support,
    })
}

/// Exact-equality flag and Jaccard overlap `|a ∩ b| / |a ∪ b|` of two
/// supports (1 when both are empty).
pub fn support_overlap(a: &SupportSet, b: &SupportSet) -> (bool, f64) {
    let union = a.union_len(b);
    if union == 0 {
        return (true, 1.0);
    }
    let inter = a.intersection_len(b);
    (a == b, inter as f64 / union as f64)
}

/// Where leave-one-out replacement samples come from.
#[derive(Debug, Clone, Copy)]
pub enum ReplacementSource<'a> {
    /// Fresh draws from the generative law (approximates the adversarial
    /// sup over replacements cheaply).
    Generative(&'a GenerativeSpec),
    /// Bootstrap resampling from the dataset itself, for when no generative
    /// description is available.
    Bootstrap,
}

const LOO_EVAL_POOL: usize = 1000;
// loose enough that Newton's Armijo decrease stays certifiable above
// objective rounding noise; contributes O(G * tol / lambda) ~ 1e-7 to the
// estimate, far inside the 1e-4 acceptance slack
const LOO_SOLVE_TOL: f64 = 1e-8;

/// Empirical lower estimate of the uniform stability of the l2-regularized
/// restricted ERM: for `trials` random single-sample replacements, solve the
/// estimator on both datasets and take the largest pointwise loss difference
/// over an evaluation pool (1000 held-out points plus the training points).
///
/// The true uniform stability is a sup over all replacements and evaluation
/// points, so this sampled quantity is a lower bound; theory caps it at
/// `4 G^2 / (lambda n)`.
pub fn loo_uniform_stability(
    data: &Dataset,
    model: LossModel,
    support: &SupportSet,
    lambda: f64,
    trials: usize,
    seed: u64,
    source: ReplacementSource<'_>,
) -> Result<f64> {
    if trials == 0 {
        return Err(IhtError::InvalidConfig("loo_uniform_stability needs trials >= 1".into()));
    }
    let stream = RngStream::root(seed);
    let base = regularized_restricted_erm(data, model, support, lambda, LOO_SOLVE_TOL)?;

    // evaluation pool: held-out points followed by the training points
    let mut pool: Vec<(Vec<f64>, f64)> = Vec::with_capacity(LOO_EVAL_POOL + data.n());
    let mut pool_rng = stream.child(0).rng();
    for _ in 0..LOO_EVAL_POOL {
        match source {
            ReplacementSource::Generative(spec) => pool.push(draw_sample(spec, &mut pool_rng)),
            ReplacementSource::Bootstrap => {
                let j = pool_rng.random_range(0..data.n());
                let (x, y) = data.row(j);
                pool.push((x.to_vec(), y));
            }
        }
    }
    for i in 0..data.n() {
        let (x, y) = data.row(i);
        pool.push((x.to_vec(), y));
    }

    let mut gamma = 0.0f64;
    for trial in 0..trials {
        let mut rng = stream.child(1 + trial as u64).rng();
        let replace_at = rng.random_range(0..data.n());
        let (x_new, y_new) = match source {
            ReplacementSource::Generative(spec) => draw_sample(spec, &mut rng),
            ReplacementSource::Bootstrap => {
                let j = rng.random_range(0..data.n());
                let (x, y) = data.row(j);
                (x.to_vec(), y)
            }
        };
        let perturbed = data.with_replaced_sample(replace_at, &x_new, y_new)?;
        let alt = regularized_restricted_erm(&perturbed, model, support, lambda, LOO_SOLVE_TOL)?;
        for (x, y) in &pool {
            let d = (loss_value(model, &base, x, *y)? - loss_value(model, &alt, x, *y)?).abs();
            gamma = gamma.max(d);
        }
    }
    Ok(gamma)
}

/// Right-hand side of the strong-signal support-recovery condition:
/// `2 sqrt(2k) ||grad F(w_bar)||_inf / mu + (3G / mu) sqrt(k log(4p/delta) / n)`.
pub fn strong_signal_rhs(
    grad_inf: f64,
    mu: f64,
    g_lip: f64,
    k: usize,
    n: usize,
    p: usize,
    delta: f64,
) -> f64 {
    2.0 * (2.0 * k as f64).sqrt() * grad_inf / mu
        + 3.0 * g_lip / mu * ((k as f64) * (4.0 * p as f64 / delta).ln() / n as f64).sqrt()
}

/// Evaluate the strong-signal support-recovery condition: does the smallest
/// nonzero entry of `w_bar` exceed the recovery threshold?
#[allow(clippy::too_many_arguments)]
pub fn strong_signal_predicate(
    w_bar: &DenseVector,
    grad_inf: f64,
    mu: f64,
    g_lip: f64,
    k: usize,
    n: usize,
    p: usize,
    delta: f64,
) -> Result<bool> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(IhtError::InvalidConfig("mu must be > 0".into()));
    }
    if k == 0 || n == 0 || p == 0 {
        return Err(IhtError::InvalidConfig("k, n, p must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(IhtError::InvalidConfig("delta must lie in (0, 1)".into()));
    }
    let w_min = w_bar.min_nonzero_abs()?;
    Ok(w_min > strong_signal_rhs(grad_inf, mu, g_lip, k, n, p, delta))
}
