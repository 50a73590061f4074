//! Population-risk and excess-risk evaluation: closed form for the
//! linear-Gaussian model, Monte Carlo for logistic, and the sub-Gaussian
//! gradient concentration diagnostic.

use crate::error::{IhtError, Result};
use crate::linalg::{hard_threshold, DenseVector};
use crate::loss::{empirical_gradient, loss_value};
use crate::rng::RngStream;
use crate::stats::{mean_and_stderr, quantile_nearest_rank};
use crate::synth::{draw_sample, gen_dataset, GenerativeSpec, ModelKind};

/// Default Monte Carlo sample count for population values without a closed
/// form; the stderr is always reported so callers can scale tolerances.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

mod label {
    pub const MC: u64 = 0x10;
    pub const OPTIMUM: u64 = 0x11;
    pub const CONCENTRATION: u64 = 0x12;
}

/// A population-risk value with its Monte Carlo uncertainty (stderr and
/// sample count are 0 for closed-form evaluations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_mc: usize,
}

impl RiskEstimate {
    pub fn exact(value: f64) -> Self {
        RiskEstimate {
            value,
            stderr: 0.0,
            n_mc: 0,
        }
    }
}

fn require_closed_form_linear(spec: &GenerativeSpec) -> Result<()> {
    if spec.kind != ModelKind::LinearGaussian {
        return Err(IhtError::Unsupported(
            "closed-form population risk requires a linear-Gaussian spec".into(),
        ));
    }
    if spec.normalize_features {
        return Err(IhtError::Unsupported(
            "closed-form population risk requires identity covariance; \
             normalized features break it"
                .into(),
        ));
    }
    Ok(())
}

/// Closed-form population risk of the linear-Gaussian model with identity
/// covariance: `F(w) = ||w - w_bar||^2 / 2 + sigma^2 / 2`.
pub fn population_risk_linear(w: &DenseVector, spec: &GenerativeSpec) -> Result<RiskEstimate> {
    require_closed_form_linear(spec)?;
    if w.dim() != spec.p {
        return Err(IhtError::DimensionMismatch {
            context: "population_risk_linear",
            expected: spec.p,
            got: w.dim(),
        });
    }
    let value = 0.5 * w.sub(&spec.w_bar).norm_sq() + 0.5 * spec.sigma * spec.sigma;
    Ok(RiskEstimate::exact(value))
}

/// Monte Carlo population risk: mean pointwise loss over `n_mc` fresh draws
/// from the spec, with the sample standard error.
pub fn population_risk_mc(
    w: &DenseVector,
    spec: &GenerativeSpec,
    n_mc: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if n_mc == 0 {
        return Err(IhtError::InvalidConfig("population_risk_mc needs n_mc >= 1".into()));
    }
    if w.dim() != spec.p {
        return Err(IhtError::DimensionMismatch {
            context: "population_risk_mc",
            expected: spec.p,
            got: w.dim(),
        });
    }
    let model = spec.loss_model();
    let mut rng = RngStream::root(seed).child(label::MC).rng();
    let mut losses = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let (x, y) = draw_sample(spec, &mut rng);
        losses.push(loss_value(model, w, &x, y)?);
    }
    let (value, stderr) = mean_and_stderr(&losses);
    Ok(RiskEstimate {
        value,
        stderr,
        n_mc,
    })
}

/// Optimal k-sparse population risk `min_{||w||_0 <= k} F(w)`.
///
/// Linear-Gaussian (identity covariance): exact for every k, since the
/// closed form is minimized over k-sparse vectors by `H_k(w_bar)`. Logistic:
/// only the well-specified case `k >= ||w_bar||_0` is tractable, where the
/// optimum is `F(w_bar)`, estimated by Monte Carlo.
pub fn optimal_sparse_risk(spec: &GenerativeSpec, k: usize) -> Result<RiskEstimate> {
    optimal_sparse_risk_with(
        spec,
        k,
        DEFAULT_MC_SAMPLES,
        RngStream::root(spec.seed).child(label::OPTIMUM).value(),
    )
}

/// [`optimal_sparse_risk`] with explicit Monte Carlo controls.
pub fn optimal_sparse_risk_with(
    spec: &GenerativeSpec,
    k: usize,
    n_mc: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    match spec.kind {
        ModelKind::LinearGaussian => {
            require_closed_form_linear(spec)?;
            let (best, _) = hard_threshold(&spec.w_bar, k);
            let value =
                0.5 * best.sub(&spec.w_bar).norm_sq() + 0.5 * spec.sigma * spec.sigma;
            Ok(RiskEstimate::exact(value))
        }
        ModelKind::LogisticGaussian => {
            if spec.w_bar.num_nonzeros() > k {
                return Err(IhtError::Unsupported(format!(
                    "logistic optimal sparse risk needs k >= ||w_bar||_0 = {}; got k = {k}",
                    spec.w_bar.num_nonzeros()
                )));
            }
            population_risk_mc(&spec.w_bar, spec, n_mc, seed)
        }
    }
}

/// Sparse excess risk `F(w) - min_{||v||_0 <= k_target} F(v)`; Monte Carlo
/// parts combine their stderr in quadrature. Values can be slightly negative
/// within the reported noise; they are not clamped.
pub fn excess_risk(w: &DenseVector, spec: &GenerativeSpec, k_target: usize) -> Result<RiskEstimate> {
    excess_risk_with(
        w,
        spec,
        k_target,
        DEFAULT_MC_SAMPLES,
        RngStream::root(spec.seed).child(label::MC).value(),
    )
}

/// [`excess_risk`] with explicit Monte Carlo controls. The two Monte Carlo
/// estimates use independent substreams of `seed`.
pub fn excess_risk_with(
    w: &DenseVector,
    spec: &GenerativeSpec,
    k_target: usize,
    n_mc: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    let stream = RngStream::root(seed);
    let risk = match spec.kind {
        ModelKind::LinearGaussian => population_risk_linear(w, spec)?,
        ModelKind::LogisticGaussian => population_risk_mc(w, spec, n_mc, stream.child(0).value())?,
    };
    let optimum = optimal_sparse_risk_with(spec, k_target, n_mc, stream.child(1).value())?;
    Ok(RiskEstimate {
        value: risk.value - optimum.value,
        stderr: (risk.stderr * risk.stderr + optimum.stderr * optimum.stderr).sqrt(),
        n_mc: risk.n_mc.max(optimum.n_mc),
    })
}

/// Empirical check of the sub-Gaussian gradient concentration at the true
/// model: over `reps` fresh datasets of size `n`, records
/// `||grad F_S(w_bar)||_inf` and returns the empirical 90th percentile
/// (the (1 - delta)-quantile at delta = 0.1).
pub fn gradient_concentration_check(
    spec: &GenerativeSpec,
    w_bar: &DenseVector,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps == 0 || n == 0 {
        return Err(IhtError::InvalidConfig(
            "gradient_concentration_check needs n >= 1 and reps >= 1".into(),
        ));
    }
    let stream = RngStream::root(seed).child(label::CONCENTRATION);
    let model = spec.loss_model();
    let mut norms = Vec::with_capacity(reps);
    for r in 0..reps {
        let data = gen_dataset(&spec.clone().with_seed(stream.child(r as u64).value()), n)?;
        let grad = empirical_gradient(model, w_bar, &data)?;
        norms.push(grad.inf_norm());
    }
    Ok(quantile_nearest_rank(&norms, 0.9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_linear_values() {
        let spec = GenerativeSpec::sparse_linear(4, 1, 1.0, 1.0, 3).unwrap();
        // at the truth the risk is the noise floor sigma^2 / 2
        let at_truth = population_risk_linear(&spec.w_bar, &spec).unwrap();
        assert_relative_eq!(at_truth.value, 0.5);
        assert_eq!(at_truth.stderr, 0.0);

        // w = 0 with w_bar a unit basis vector and sigma = 1: 0.5 + 0.5
        let at_zero = population_risk_linear(&DenseVector::zeros(4), &spec).unwrap();
        assert_relative_eq!(at_zero.value, 1.0);
    }

    #[test]
    fn identity_between_closed_form_and_distance() {
        let spec = GenerativeSpec::sparse_linear(6, 2, 1.5, 0.8, 5).unwrap();
        let mut rng = RngStream::root(10).rng();
        for _ in 0..20 {
            let w = DenseVector::new(
                (0..6)
                    .map(|_| rand::Rng::random::<f64>(&mut rng) * 4.0 - 2.0)
                    .collect(),
            )
            .unwrap();
            let r = population_risk_linear(&w, &spec).unwrap();
            let dist = 0.5 * w.sub(&spec.w_bar).norm_sq();
            assert_relative_eq!(r.value - 0.5 * 0.8 * 0.8, dist, max_relative = 1e-12);
        }
    }

    #[test]
    fn mc_agrees_with_closed_form() {
        let spec = GenerativeSpec::sparse_linear(5, 2, 1.0, 0.5, 21).unwrap();
        let w = DenseVector::zeros(5);
        let exact = population_risk_linear(&w, &spec).unwrap();
        let mc = population_risk_mc(&w, &spec, 1_000_000, 0).unwrap();
        assert!(
            (mc.value - exact.value).abs() <= 3.0 * mc.stderr,
            "mc {} vs exact {} (stderr {})",
            mc.value,
            exact.value,
            mc.stderr
        );
    }

    #[test]
    fn logistic_zero_vector_risk_is_ln2() {
        let spec = GenerativeSpec::sparse_logistic(6, 2, 1.0, 9).unwrap();
        let mc = population_risk_mc(&DenseVector::zeros(6), &spec, 50_000, 3).unwrap();
        assert_relative_eq!(mc.value, std::f64::consts::LN_2, epsilon = 1e-9);
        assert!(mc.stderr <= 1e-12, "constant loss should have zero spread");
    }

    #[test]
    fn mc_stderr_shrinks_like_sqrt_n() {
        let spec = GenerativeSpec::sparse_logistic(8, 3, 1.0, 13).unwrap();
        let w = DenseVector::basis(8, 0);
        let mut ratios = Vec::new();
        for rep in 0..5u64 {
            let small = population_risk_mc(&w, &spec, 4_000, 100 + rep).unwrap();
            let big = population_risk_mc(&w, &spec, 8_000, 200 + rep).unwrap();
            ratios.push(small.stderr / big.stderr);
        }
        let med = crate::stats::median(&ratios);
        assert!(
            (1.2..=1.7).contains(&med),
            "stderr ratio {med} not near sqrt(2)"
        );
    }

    #[test]
    fn optimal_sparse_risk_linear_cases() {
        let spec = GenerativeSpec::sparse_linear(6, 2, 1.0, 0.4, 33).unwrap();
        // k >= k_bar reaches the noise floor
        let full = optimal_sparse_risk(&spec, 2).unwrap();
        assert_relative_eq!(full.value, 0.5 * 0.4 * 0.4, epsilon = 1e-15);

        // k below k_bar: best-k solution is H_k(w_bar); verify against a
        // brute-force search over all supports of size k
        let sub = optimal_sparse_risk(&spec, 1).unwrap();
        let brute = brute_force_best_k(&spec, 1);
        assert_relative_eq!(sub.value, brute, epsilon = 1e-12);
        assert!(sub.value >= full.value);
    }

    fn brute_force_best_k(spec: &GenerativeSpec, k: usize) -> f64 {
        // enumerate supports; on each, the closed form is minimized by
        // matching w_bar exactly on the support
        let p = spec.p;
        let mut best = f64::INFINITY;
        let mut combo = vec![0usize; k];
        fn rec(
            start: usize,
            fill: usize,
            combo: &mut Vec<usize>,
            p: usize,
            spec: &GenerativeSpec,
            best: &mut f64,
        ) {
            if fill == combo.len() {
                let mut masked = vec![0.0; p];
                for &i in combo.iter() {
                    masked[i] = spec.w_bar[i];
                }
                let w = DenseVector::new(masked).unwrap();
                let risk = 0.5 * w.sub(&spec.w_bar).norm_sq() + 0.5 * spec.sigma * spec.sigma;
                if risk < *best {
                    *best = risk;
                }
                return;
            }
            for i in start..p {
                combo[fill] = i;
                rec(i + 1, fill + 1, combo, p, spec, best);
            }
        }
        rec(0, 0, &mut combo, p, spec, &mut best);
        best
    }

    #[test]
    fn optimal_sparse_risk_nonincreasing_in_k() {
        let target = gen_target_dense();
        let spec = GenerativeSpec::linear_with_target(target, 3, 0.3, 0.0, 44).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let r = optimal_sparse_risk(&spec, k).unwrap().value;
            assert!(r <= prev + 1e-15, "k={k}: {r} > {prev}");
            prev = r;
        }
    }

    fn gen_target_dense() -> DenseVector {
        DenseVector::new(vec![2.0, -1.5, 1.0, -0.7, 0.5, -0.3, 0.2, -0.1]).unwrap()
    }

    #[test]
    fn logistic_optimum_requires_well_specified() {
        let spec = GenerativeSpec::sparse_logistic(6, 3, 1.0, 3).unwrap();
        assert!(optimal_sparse_risk(&spec, 2).is_err());
        assert!(optimal_sparse_risk(&spec, 3).is_ok());
    }

    #[test]
    fn excess_risk_at_truth_is_zero_within_noise() {
        let spec = GenerativeSpec::sparse_logistic(6, 2, 1.0, 55).unwrap();
        let e = excess_risk_with(&spec.w_bar, &spec, 2, 40_000, 5).unwrap();
        assert!(
            e.value.abs() <= 3.0 * e.stderr.max(1e-12),
            "excess {} stderr {}",
            e.value,
            e.stderr
        );
    }

    #[test]
    fn excess_risk_linear_zero_vector() {
        let spec = GenerativeSpec::sparse_linear(7, 3, 1.0, 0.2, 66).unwrap();
        let e = excess_risk(&DenseVector::zeros(7), &spec, 3).unwrap();
        assert_relative_eq!(e.value, 0.5 * spec.w_bar.norm_sq(), epsilon = 1e-12);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn excess_risk_seed_invariance_in_distribution() {
        let spec = GenerativeSpec::sparse_logistic(5, 2, 1.0, 77).unwrap();
        let w = DenseVector::basis(5, 1);
        let a = excess_risk_with(&w, &spec, 2, 30_000, 1).unwrap();
        let b = excess_risk_with(&w, &spec, 2, 30_000, 2).unwrap();
        let combined = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        assert!((a.value - b.value).abs() <= 6.0 * combined);
    }

    #[test]
    fn excess_risk_nonnegative_on_solver_outputs() {
        // the excess of a k_bar-sparse estimate against the best
        // k_bar-sparse risk is nonnegative up to Monte Carlo noise
        use crate::solver::{iht_run, IhtConfig};
        for case in 0..100u64 {
            let logistic = case % 2 == 1;
            let spec = if logistic {
                GenerativeSpec::sparse_logistic(12, 3, 1.0, 3000 + case).unwrap()
            } else {
                GenerativeSpec::sparse_linear(12, 3, 1.0, 0.4, 3000 + case).unwrap()
            };
            let data = crate::synth::gen_dataset(&spec, 60).unwrap();
            let cfg = IhtConfig::new(3).with_max_iters(40).with_refit(true);
            let trace = iht_run(&data, spec.loss_model(), &cfg).unwrap();
            let e = excess_risk_with(trace.estimator(), &spec, 3, 20_000, case).unwrap();
            assert!(
                e.value >= -3.0 * e.stderr - 1e-12,
                "case {case}: excess {} below -3 stderr ({})",
                e.value,
                e.stderr
            );
        }
    }

    #[test]
    fn noiseless_gradient_concentration_is_zero() {
        let spec = GenerativeSpec::sparse_linear(5, 2, 1.0, 0.0, 88).unwrap();
        let q = gradient_concentration_check(&spec, &spec.w_bar.clone(), 100, 20, 4).unwrap();
        assert!(q <= 1e-13, "noiseless quantile {q}");
    }

    #[test]
    fn gradient_concentration_scales_with_n() {
        let spec = GenerativeSpec::sparse_linear(30, 3, 1.0, 1.0, 99).unwrap();
        let q1 = gradient_concentration_check(&spec, &spec.w_bar.clone(), 250, 60, 7).unwrap();
        let q4 = gradient_concentration_check(&spec, &spec.w_bar.clone(), 1000, 60, 8).unwrap();
        let ratio = q1 / q4;
        assert!(
            (1.6..=2.6).contains(&ratio),
            "quadrupling n gave quantile ratio {ratio}, expected near 2"
        );
    }
}
