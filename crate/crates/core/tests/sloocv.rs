mod common;

use common::*;
use geocv_core::formula::ModelSpec;
use geocv_core::model::{fit_dataset, predict, FitConfig, Priors};
use geocv_core::sloocv::{
    buffer_partition, default_radius, run_sloo, score_errors, score_metrics, CiMethod, ModelOutcome, Radius,
    SlooConfig, SlooPlan,
};
use proptest::prelude::*;

fn models() -> Vec<ModelSpec> {
    vec!["y ~ x + spatial".parse().unwrap(), "y ~ x".parse().unwrap()]
}

#[test]
fn ss_equal_n_holds_out_every_point_once() {
    let t = toy(31, 12, "y ~ x + spatial");
    let config = SlooConfig::new(models(), 12, Radius::Fixed(0.2), 0.05, 199);
    let res = run_sloo(&t.data, &t.mesh, &t.fem, &config).unwrap();
    let mut held: Vec<usize> = res.iterations.iter().map(|it| it.holdout).collect();
    held.sort_unstable();
    assert_eq!(held, (0..12).collect::<Vec<_>>());
    assert_eq!(res.metrics.len(), 2);
    for it in &res.iterations {
        let train = buffer_partition(t.data.coords(), it.holdout, 0.2).unwrap();
        assert_eq!(it.removed, 11 - train.len());
        assert_eq!(it.observed, t.data.response()[it.holdout]);
    }
    for m in &res.metrics {
        let e = m.metrics.unwrap();
        assert!(e.rmse.value >= e.mae.value);
    }
}

#[test]
fn tiny_radius_equals_ordinary_loo() {
    let t = toy(32, 12, "y ~ x + spatial");
    let min_dist = t
        .data
        .coords()
        .iter()
        .enumerate()
        .flat_map(|(i, a)| t.data.coords()[i + 1..].iter().map(move |b| a.distance(b)))
        .fold(f64::INFINITY, f64::min);
    let config = SlooConfig::new(models(), 4, Radius::Fixed(0.5 * min_dist), 0.05, 7);
    let plan = SlooPlan::new(&t.data, &t.mesh, &t.fem, &config).unwrap();
    for k in 0..plan.len() {
        let it = plan.run_iteration(k);
        assert_eq!(it.removed, 0);
        let keep: Vec<usize> = (0..12).filter(|&j| j != it.holdout).collect();
        let sub = t.data.subset(&keep);
        for (m, spec) in models().iter().enumerate() {
            let mut fc = FitConfig::new(Priors::default_for(sub.coords(), sub.response(), spec.family));
            fc.slice_points = 0;
            fc.warm_start = Some(full_theta(&t, m));
            let fit = fit_dataset(&sub, Some(&t.mesh), Some(&t.fem), spec, &fc).unwrap();
            let cov: Vec<(String, Vec<f64>)> = vec![("x".into(), vec![t.data.column("x").unwrap()[it.holdout]])];
            let p = predict(&fit, Some(&t.mesh), &[it.coord], &cov).unwrap()[0];
            assert_eq!(it.outcomes[m], ModelOutcome::Predicted { mean: p.mean, sd: p.sd });
        }
    }
}

fn full_theta(t: &Toy, m: usize) -> Vec<f64> {
    let spec = &models()[m];
    let mut fc = FitConfig::new(Priors::default_for(t.data.coords(), t.data.response(), spec.family));
    fc.slice_points = 0;
    fit_dataset(&t.data, Some(&t.mesh), Some(&t.fem), spec, &fc).unwrap().summary.theta_hat
}

#[test]
fn auto_radius_uses_fitted_range() {
    let t = toy(33, 15, "y ~ x + spatial");
    let config = SlooConfig::new(models(), 3, Radius::Auto, 0.05, 1);
    let plan = SlooPlan::new(&t.data, &t.mesh, &t.fem, &config).unwrap();
    let spec = &models()[0];
    let mut fc = FitConfig::new(Priors::default_for(t.data.coords(), t.data.response(), spec.family));
    fc.slice_points = 0;
    let full = fit_dataset(&t.data, Some(&t.mesh), Some(&t.fem), spec, &fc).unwrap();
    let expected = default_radius(full.summary.spde.unwrap().range, t.data.coords()).unwrap();
    assert_eq!(plan.radius(), expected);

    let flat = SlooConfig::new(vec!["y ~ x".parse().unwrap()], 3, Radius::Auto, 0.05, 1);
    let plan = SlooPlan::new(&t.data, &t.mesh, &t.fem, &flat).unwrap();
    assert_eq!(plan.radius(), default_radius(f64::INFINITY, t.data.coords()).unwrap());
}

#[test]
fn run_is_deterministic_and_order_free() {
    let t = toy(34, 14, "y ~ x + spatial");
    let config = SlooConfig::new(models(), 6, Radius::Fixed(0.15), 0.1, 5);
    let a = run_sloo(&t.data, &t.mesh, &t.fem, &config).unwrap();
    let b = run_sloo(&t.data, &t.mesh, &t.fem, &config).unwrap();
    assert_eq!(a, b);
    let plan = SlooPlan::new(&t.data, &t.mesh, &t.fem, &config).unwrap();
    let reversed: Vec<_> = (0..plan.len()).rev().map(|k| plan.run_iteration(k)).collect();
    assert_eq!(plan.finish(reversed), a);
}

#[test]
fn radius_removing_everything_marks_failures() {
    let t = toy(35, 10, "y ~ x");
    let config = SlooConfig::new(vec!["y ~ x".parse().unwrap()], 3, Radius::Fixed(100.0), 0.05, 2);
    let res = run_sloo(&t.data, &t.mesh, &t.fem, &config).unwrap();
    assert!(res.iterations.iter().all(|it| matches!(it.outcomes[0], ModelOutcome::Failed(_))));
    assert_eq!(res.metrics[0].n_failed, 3);
    assert_eq!(res.metrics[0].metrics, None);
}

#[test]
fn invalid_configs_are_rejected() {
    let t = toy(36, 8, "y ~ x");
    let bad = [
        SlooConfig::new(models(), 0, Radius::Fixed(0.1), 0.05, 1),
        SlooConfig::new(models(), 9, Radius::Fixed(0.1), 0.05, 1),
        SlooConfig::new(models(), 3, Radius::Fixed(-1.0), 0.05, 1),
        SlooConfig::new(models(), 3, Radius::Fixed(0.1), 1.0, 1),
        SlooConfig::new(vec![], 3, Radius::Fixed(0.1), 0.05, 1),
    ];
    for c in &bad {
        assert!(run_sloo(&t.data, &t.mesh, &t.fem, c).is_err(), "{c:?}");
    }
}

#[test]
fn bootstrap_option_changes_only_intervals() {
    let t = toy(37, 12, "y ~ x");
    let mut config = SlooConfig::new(vec!["y ~ x".parse().unwrap()], 8, Radius::Fixed(0.1), 0.05, 9);
    let normal = run_sloo(&t.data, &t.mesh, &t.fem, &config).unwrap();
    config.ci = CiMethod::Bootstrap { resamples: 400 };
    let boot = run_sloo(&t.data, &t.mesh, &t.fem, &config).unwrap();
    assert_eq!(normal.iterations, boot.iterations);
    let (a, b) = (normal.metrics[0].metrics.unwrap(), boot.metrics[0].metrics.unwrap());
    assert_eq!(a.mae.value, b.mae.value);
    assert_eq!(a.rmse.value, b.rmse.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rmse_at_least_mae_and_order_free(errors in prop::collection::vec(-5.0f64..5.0, 2..40), alpha in 0.01f64..0.5) {
        let m = score_errors(&errors, alpha).unwrap();
        prop_assert!(m.rmse.value >= m.mae.value * (1.0 - 1e-15));
        prop_assert!(m.mae.lower <= m.mae.value && m.mae.value <= m.mae.upper);
        prop_assert!(m.rmse.lower <= m.rmse.value && m.rmse.value <= m.rmse.upper);
        let mut rev = errors.clone();
        rev.reverse();
        prop_assert_eq!(m, score_errors(&rev, alpha).unwrap());
    }

    #[test]
    fn larger_radius_never_grows_training_set(seed in 0u64..500, r1 in 0.01f64..0.5, extra in 0.0f64..0.5) {
        let mut r = rng(seed);
        let pts = uniform_points(&mut r, 25);
        let small = buffer_partition(&pts, 3, r1).map(|v| v.len()).unwrap_or(0);
        let large = buffer_partition(&pts, 3, r1 + extra).map(|v| v.len()).unwrap_or(0);
        prop_assert!(large <= small);
    }
}

#[test]
fn metrics_ignore_iteration_order() {
    let t = toy(38, 12, "y ~ x");
    let config = SlooConfig::new(vec!["y ~ x".parse().unwrap()], 10, Radius::Fixed(0.1), 0.05, 3);
    let res = run_sloo(&t.data, &t.mesh, &t.fem, &config).unwrap();
    let mut shuffled = res.iterations.clone();
    shuffled.rotate_left(3);
    shuffled.swap(0, 5);
    assert_eq!(score_metrics(&shuffled, &res.models, 0.05, CiMethod::Normal, 3), res.metrics);
}
