//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line (run with `cargo test --test acceptance -- --nocapture`
//! to see them). Tolerances are pinned in the assertions.

use iht_lab::experiment::{emit_csv, run_experiment, ExperimentConfig, GridMean};
use iht_lab::linalg::{hard_threshold, DenseVector, SupportSet};
use iht_lab::loss::{
    empirical_gradient, empirical_risk, estimate_constants, Dataset, LossModel,
};
use iht_lab::rng::RngStream;
use iht_lab::solver::{iht_run, IhtConfig, StepSize};
use iht_lab::stability::{
    iht_stability_trace, loo_uniform_stability, population_iht_linear_oracle,
    strong_signal_predicate, strong_signal_rhs, ReplacementSource,
};
use iht_lab::stats::{median, quantile_nearest_rank, spearman};
use iht_lab::synth::{gen_dataset, gen_gap_model, GenerativeSpec};
use iht_lab::DenseMatrix;
use rand::Rng;
use std::time::Instant;

fn report(criterion: &str, started: Instant, budget_secs: f64) {
    let elapsed = started.elapsed();
    println!("acceptance {criterion}: PASS ({elapsed:.2?})");
    assert!(
        elapsed.as_secs_f64() < budget_secs,
        "{criterion} exceeded its {budget_secs}s runtime budget: {elapsed:?}"
    );
}

/// Criterion 1: on the closed-form linear example (p = 50, k_bar = 5,
/// eta = 0.5, gap = 0.5), IHT driven by the analytic population gradient
/// matches w_t = (1 - (1-eta)^t) * w_tilde_J to 1e-10 per coordinate for
/// t = 1..20, and every recorded margin is at least eta * gap.
#[test]
fn criterion_01_population_trajectory_oracle() {
    let started = Instant::now();
    let (p, k_bar, eta, gap, iters) = (50usize, 5usize, 0.5f64, 0.5f64, 20usize);
    let w_tilde = gen_gap_model(p, k_bar, gap, 20240501).unwrap();
    let oracle = population_iht_linear_oracle(&w_tilde, 1.0, k_bar, eta, iters).unwrap();

    let trace = iht_stability_trace(
        |w| w.sub(&w_tilde),
        k_bar,
        eta,
        iters,
        &DenseVector::zeros(p),
    )
    .unwrap();

    let (projected, support) = hard_threshold(&w_tilde, k_bar);
    for t in 1..=iters {
        let coef = 1.0 - (1.0 - eta).powi(t as i32);
        let expect = projected.scale(coef);
        let dev = trace.iterates[t]
            .iter()
            .zip(expect.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(dev <= 1e-10, "t = {t}: max coordinate deviation {dev}");
        // matches the analytic oracle both in value and in support
        let dev_oracle = trace.iterates[t]
            .iter()
            .zip(oracle.iterates[t].iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(dev_oracle <= 1e-10);
        assert_eq!(trace.iterates[t].support(), support);
    }
    for (t, margin) in trace.margins.iter().enumerate() {
        assert!(
            *margin >= eta * gap - 1e-12,
            "t = {}: margin {margin} below eta * gap = {}",
            t + 1,
            eta * gap
        );
    }
    report("criterion 1 (closed-form trajectory oracle)", started, 1.0);
}

/// Criterion 2: hard_threshold agrees exactly with the brute-force sort
/// oracle on 10^4 random vectors with p <= 64, including ties.
#[test]
fn criterion_02_top_k_oracle() {
    let started = Instant::now();
    let mut rng = RngStream::root(20240502).rng();
    let tie_pool = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
    for case in 0..10_000usize {
        let p = 1 + rng.random_range(0..64);
        let values: Vec<f64> = (0..p)
            .map(|_| {
                if rng.random::<f64>() < 0.4 {
                    tie_pool[rng.random_range(0..tie_pool.len())]
                } else {
                    rng.random::<f64>() * 8.0 - 4.0
                }
            })
            .collect();
        let k = rng.random_range(0..p + 3);

        // brute-force oracle: sort (|w_i| descending, i ascending), keep
        // the first k nonzeros
        let mut order: Vec<usize> = (0..p).filter(|&i| values[i] != 0.0).collect();
        order.sort_by(|&a, &b| {
            values[b]
                .abs()
                .partial_cmp(&values[a].abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        order.truncate(k.min(p));
        order.sort_unstable();
        let mut expect = vec![0.0; p];
        for &i in &order {
            expect[i] = values[i];
        }

        let w = DenseVector::new(values).unwrap();
        let (got, support) = hard_threshold(&w, k);
        assert_eq!(got.as_slice(), &expect[..], "case {case}");
        assert_eq!(support.as_slice(), &order[..], "case {case}");
    }
    report("criterion 2 (top-k brute-force oracle, 10^4 vectors)", started, 5.0);
}

/// Criterion 3: central finite differences confirm the empirical gradient
/// with relative error <= 1e-5 on 100 random (loss, w, dataset) triples.
#[test]
fn criterion_03_gradient_finite_differences() {
    let started = Instant::now();
    let h = 1e-6;
    for case in 0..100u64 {
        let model = if case % 2 == 0 {
            LossModel::Squared
        } else {
            LossModel::Logistic
        };
        let mut rng = RngStream::root(20240503).child(case).rng();
        let n = 10 + rng.random_range(0..25);
        let p = 2 + rng.random_range(0..10);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| match model {
                LossModel::Squared => rng.random::<f64>() * 2.0 - 1.0,
                LossModel::Logistic => {
                    if rng.random::<f64>() < 0.5 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            })
            .collect();
        let data = Dataset::new(DenseMatrix::from_rows(&rows).unwrap(), y, model).unwrap();
        let w = DenseVector::new((0..p).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();

        let grad = empirical_gradient(model, &w, &data).unwrap();
        let mut fd = vec![0.0; p];
        for j in 0..p {
            let mut wp = w.as_slice().to_vec();
            let mut wm = wp.clone();
            wp[j] += h;
            wm[j] -= h;
            fd[j] = (empirical_risk(model, &DenseVector::new(wp).unwrap(), &data).unwrap()
                - empirical_risk(model, &DenseVector::new(wm).unwrap(), &data).unwrap())
                / (2.0 * h);
        }
        let err: f64 = grad
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / grad.norm().max(1e-12);
        assert!(err <= 1e-5, "case {case} ({model:?}): relative error {err}");
    }
    report("criterion 3 (finite-difference gradient check, 100 triples)", started, 10.0);
}

/// Criterion 4: on 20 well-conditioned noiseless squared instances
/// (n = 400, p = 100, k = 2 k_bar), the empirical objective reaches within
/// 1e-6 of the refit optimum within 10 * (L/mu) * log(F_S(0)/1e-6)
/// iterations, with L/mu taken from estimate_constants.
#[test]
fn criterion_04_convergence_schedule() {
    let started = Instant::now();
    let (n, p, k_bar) = (400usize, 100usize, 5usize);
    let k = 2 * k_bar;
    let eps = 1e-6;
    for instance in 0..20u64 {
        let spec = GenerativeSpec::sparse_linear(p, k_bar, 1.0, 0.0, 20240504 + instance).unwrap();
        let data = gen_dataset(&spec, n).unwrap();
        let constants = estimate_constants(LossModel::Squared, &data, k, 10.0).unwrap();
        let mu = constants.mu_strong.expect("squared loss has mu");
        let f0 = empirical_risk(LossModel::Squared, &DenseVector::zeros(p), &data).unwrap();
        let budget = (10.0 * (constants.l_smooth / mu) * (f0 / eps).ln()).ceil() as usize;

        let cfg = IhtConfig::new(k)
            .with_max_iters(budget)
            .with_obj_tol(0.0)
            .with_refit(true);
        let trace = iht_run(&data, LossModel::Squared, &cfg).unwrap();
        let refit_obj = trace.refit_objective.unwrap();
        let reached = trace
            .objectives()
            .iter()
            .position(|&obj| obj <= refit_obj + eps);
        match reached {
            Some(t) => assert!(
                t <= budget,
                "instance {instance}: reached at {t} > budget {budget}"
            ),
            None => panic!(
                "instance {instance}: never within 1e-6 of the refit optimum in {budget} iters \
                 (final {:.3e} vs refit {:.3e})",
                trace.objectives().last().unwrap(),
                refit_obj
            ),
        }
    }
    report("criterion 4 (convergence schedule, 20 instances)", started, 30.0);
}

/// Criterion 5: the leave-one-out uniform-stability estimate never exceeds
/// 4 G^2 / (lambda n) + 1e-4 over 50 instances (n in {100, 200, 400},
/// lambda in {0.1, 1}); its median halves, within factor [1/3, 3], when n
/// doubles.
#[test]
fn criterion_05_uniform_stability_rate() {
    let started = Instant::now();
    // normalized features make the logistic loss 2-Lipschitz uniformly
    let g_lip = 2.0;
    let p = 30;
    let support = SupportSet::new(vec![2, 7, 13, 21, 28]);
    // layout: 48 balanced instances (8 per (n, lambda) cell) plus one
    // extra at (100, 0.1) and one at (200, 0.1)
    let mut layout = Vec::new();
    for &n in &[100usize, 200, 400] {
        for &lambda in &[0.1f64, 1.0] {
            for _ in 0..8 {
                layout.push((n, lambda));
            }
        }
    }
    layout.push((100, 0.1));
    layout.push((200, 0.1));

    let mut by_n: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (i, &(n, lambda)) in layout.iter().enumerate() {
        let spec = GenerativeSpec::sparse_logistic(p, 4, 1.0, 20240705 + i as u64)
            .unwrap()
            .with_normalized_features();
        let data = gen_dataset(&spec, n).unwrap();
        let gamma = loo_uniform_stability(
            &data,
            LossModel::Logistic,
            &support,
            lambda,
            4,
            900 + i as u64,
            ReplacementSource::Generative(&spec),
        )
        .unwrap();
        let bound = 4.0 * g_lip * g_lip / (lambda * n as f64);
        assert!(
            gamma <= bound + 1e-4,
            "instance {i} (n={n}, lambda={lambda}): gamma {gamma} exceeds {bound} + 1e-4"
        );
        by_n.entry(n).or_default().push(gamma);
    }
    let m100 = median(&by_n[&100]);
    let m200 = median(&by_n[&200]);
    let m400 = median(&by_n[&400]);
    for (a, b, label) in [(m100, m200, "100->200"), (m200, m400, "200->400")] {
        let ratio = a / b;
        assert!(
            (2.0 / 3.0..=6.0).contains(&ratio),
            "median ratio {label} = {ratio} outside [2/3, 6] (a={a}, b={b})"
        );
    }
    report("criterion 5 (leave-one-out uniform stability, 50 instances)", started, 60.0);
}

fn distinct_sorted<T: Ord + Copy>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = values.collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn column(means: &[GridMean], n: usize) -> Vec<&GridMean> {
    let mut pts: Vec<&GridMean> = means.iter().filter(|m| m.n == n).collect();
    pts.sort_by(|a, b| a.grid_value.partial_cmp(&b.grid_value).unwrap());
    pts
}

/// Criterion 6: desk-scale sparsity scaling (p = 200, k_bar = 10, 10
/// replicates): replicate-averaged excess risk is strictly decreasing in n
/// at every k, and Spearman(k, mean excess) > 0.5 at every n.
#[test]
fn criterion_06_scaling_trend_reproduction() {
    let started = Instant::now();
    let cfg = ExperimentConfig::desk_scaling();
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.rows.len(), 4 * 3 * 10, "row completeness");
    assert_eq!(result.failures(), 0, "no solver failures at the default seed");

    let means = result.replicate_means();
    let ks = distinct_sorted(means.iter().map(|m| m.grid_value.to_bits()));
    let ns = distinct_sorted(means.iter().map(|m| m.n));

    // (a) strictly decreasing across n at every k
    for &kb in &ks {
        let mut prev = f64::INFINITY;
        for &n in &ns {
            let m = means
                .iter()
                .find(|m| m.grid_value.to_bits() == kb && m.n == n)
                .unwrap();
            assert!(
                m.mean_excess < prev,
                "k = {}: mean excess not strictly decreasing at n = {n} ({} >= {prev})",
                f64::from_bits(kb),
                m.mean_excess
            );
            prev = m.mean_excess;
        }
    }
    // (b) positive rank correlation with k at every n
    for &n in &ns {
        let pts = column(&means, n);
        let xs: Vec<f64> = pts.iter().map(|m| m.grid_value).collect();
        let ys: Vec<f64> = pts.iter().map(|m| m.mean_excess).collect();
        let rho = spearman(&xs, &ys);
        assert!(rho > 0.5, "n = {n}: Spearman(k, mean excess) = {rho} <= 0.5");
    }
    report("criterion 6 (sparsity-scaling trends at desk scale)", started, 300.0);
}

/// Criterion 7: desk-scale stability sweep (p = 200, k_bar = 20,
/// eta = 0.5, 10 replicates): mean log excess risk has Spearman < -0.5
/// against the gap at every n, and the population-trace min margin is at
/// least eta * gap at every grid point.
#[test]
fn criterion_07_stability_trend_reproduction() {
    let started = Instant::now();
    let cfg = ExperimentConfig::desk_stability();
    let eta = match cfg.eta {
        StepSize::Fixed(e) => e,
        StepSize::Auto => unreachable!(),
    };
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.rows.len(), 9 * 3 * 10, "row completeness");
    assert_eq!(result.failures(), 0);

    for r in &result.rows {
        assert!(
            r.min_margin >= eta * r.grid_value - 1e-12,
            "gap {}: population margin {} below eta * gap",
            r.grid_value,
            r.min_margin
        );
    }

    let means = result.replicate_log_means();
    for n in distinct_sorted(means.iter().map(|m| m.n)) {
        let pts = column(&means, n);
        let xs: Vec<f64> = pts.iter().map(|m| m.grid_value).collect();
        let ys: Vec<f64> = pts.iter().map(|m| m.mean_excess).collect();
        let rho = spearman(&xs, &ys);
        assert!(
            rho < -0.5,
            "n = {n}: Spearman(gap, mean log excess) = {rho} >= -0.5"
        );
    }
    report("criterion 7 (stability-sweep trends at desk scale)", started, 300.0);
}

/// Criterion 8: on well-specified linear instances built so the
/// strong-signal predicate holds with a 2x margin, the true support is
/// contained in the final IHT support in at least 90% of 50 replicates.
#[test]
fn criterion_08_strong_signal_support_recovery() {
    let started = Instant::now();
    let (p, k_bar, n, sigma, delta) = (50usize, 3usize, 600usize, 0.125f64, 0.1f64);
    let k = 2 * k_bar;
    let mut successes = 0usize;
    for rep in 0..50u64 {
        let spec = GenerativeSpec::sparse_linear(p, k_bar, 1.0, sigma, 20240508 + rep).unwrap();
        let data = gen_dataset(&spec, n).unwrap();

        // the predicate's constants: grad_inf = 0 (well-specified),
        // mu from the sampled restricted eigenvalue estimate, G as the
        // per-coordinate gradient sub-Gaussian scale sigma (the linear
        // model's gradient coordinates at the truth are -eps * x_j)
        let constants = estimate_constants(LossModel::Squared, &data, 4 * k_bar, 5.0).unwrap();
        let mu = constants.mu_strong.unwrap();
        let rhs = strong_signal_rhs(0.0, mu, sigma, k, n, p, delta);
        let w_min = spec.w_bar.min_nonzero_abs().unwrap();
        assert!(
            w_min >= 2.0 * rhs,
            "rep {rep}: construction lost its 2x margin (w_min {w_min} vs rhs {rhs})"
        );
        assert!(strong_signal_predicate(&spec.w_bar, 0.0, mu, sigma, k, n, p, delta).unwrap());

        let cfg = IhtConfig::new(k).with_max_iters(150);
        let trace = iht_run(&data, LossModel::Squared, &cfg).unwrap();
        if spec.w_bar.support().is_subset_of(trace.final_support()) {
            successes += 1;
        }
    }
    assert!(
        successes >= 45,
        "support recovery in only {successes}/50 replicates"
    );
    report("criterion 8 (strong-signal support recovery)", started, 60.0);
}

/// Criterion 9: the empirical 90th percentile of ||grad F_S(w_bar)||_inf
/// over 200 replicates stays within 1.5x the sub-Gaussian concentration
/// bound sigma * sqrt(2 log(p/0.1) / n) at (p, n) = (100, 1000).
#[test]
fn criterion_09_gradient_concentration() {
    let started = Instant::now();
    let (p, n, reps, sigma) = (100usize, 1000usize, 200usize, 1.0f64);
    let spec = GenerativeSpec::sparse_linear(p, 5, 1.0, sigma, 20240509).unwrap();
    let quantile = iht_lab::risk::gradient_concentration_check(
        &spec,
        &spec.w_bar.clone(),
        n,
        reps,
        42,
    )
    .unwrap();
    let bound = 1.5 * sigma * (2.0 * (p as f64 / 0.1).ln() / n as f64).sqrt();
    assert!(
        quantile <= bound,
        "90th percentile {quantile} exceeds 1.5x concentration bound {bound}"
    );
    // sanity: the quantile is a real positive number of the expected scale
    assert!(quantile > bound / 10.0);
    report("criterion 9 (sub-Gaussian gradient concentration)", started, 30.0);
}

/// Criterion 10: full desk-scale runs with identical config and seed
/// produce byte-identical CSVs regardless of thread count, for both
/// protocols.
#[test]
fn criterion_10_determinism_across_thread_counts() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    for (label, base) in [
        ("stability", ExperimentConfig::desk_stability()),
        ("scaling", ExperimentConfig::desk_scaling()),
    ] {
        let mut digests = Vec::new();
        for threads in [1usize, 4] {
            let cfg = ExperimentConfig {
                threads: Some(threads),
                ..base.clone()
            };
            let result = run_experiment(&cfg).unwrap();
            let path = dir.path().join(format!("{label}_{threads}.csv"));
            emit_csv(&result, &path).unwrap();
            digests.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(
            digests[0], digests[1],
            "{label}: CSV bytes differ between 1 and 4 threads"
        );
        assert!(!digests[0].is_empty());
    }
    report("criterion 10 (byte-identical CSV across thread counts)", started, 600.0);
}

/// Supplementary check used while pinning the nearest-rank quantile the
/// concentration criterion relies on.
#[test]
fn quantile_convention_sanity() {
    let values: Vec<f64> = (1..=10).map(|v| v as f64).collect();
    assert_eq!(quantile_nearest_rank(&values, 0.9), 9.0);
}
