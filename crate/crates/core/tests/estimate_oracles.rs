use caviar_core::dgp::{simulate, DgpSpec};
use caviar_core::estimate::*;
use caviar_core::model::{objective, Family, GenericSpec, InterceptBasis, ModelSpec};
use caviar_core::{Error, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn sample_median(y: &[f64]) -> f64 {
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

fn constant_model(tau: f64) -> ModelSpec {
    ModelSpec::new(
        Family::Generic(GenericSpec {
            q: 0,
            intercept: InterceptBasis::Constant,
            regressors: vec![],
        }),
        tau,
    )
    .unwrap()
}

fn desk(seed: u64) -> EstimateConfig {
    EstimateConfig::default().with_seed(seed)
}

#[test]
fn nelder_mead_quadratic() {
    let c = [1.5, -2.0, 0.25];
    let f = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    for x0 in [[0.0, 0.0, 0.0], [10.0, 5.0, -7.0]] {
        let r = nelder_mead(f, &x0, &NelderMeadOptions::default());
        for (a, b) in r.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-5, "{:?}", r.x);
        }
        assert!(r.value <= f(&x0));
    }
}

#[test]
fn nelder_mead_univariate_median() {
    let y = normals(1, 101);
    let f = |x: &[f64]| y.iter().map(|v| caviar_core::model::check_loss(0.5, v - x[0])).sum::<f64>();
    let r = nelder_mead(f, &[3.0], &NelderMeadOptions::default());
    assert!((r.x[0] - sample_median(&y)).abs() < 1e-6);
}

#[test]
fn nelder_mead_rosenbrock() {
    let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
    let opts = NelderMeadOptions {
        spread_tol: 1e-14,
        max_iter: 2000,
    };
    let r = nelder_mead(f, &[-1.2, 1.0], &opts);
    assert!(r.value < 1e-6, "{r:?}");
}

#[test]
fn nelder_mead_infinite_start_stays_put() {
    let f = |_: &[f64]| f64::INFINITY;
    let r = nelder_mead(f, &[0.3, 0.1], &NelderMeadOptions::default());
    assert!(r.value.is_infinite());
}

#[test]
fn constant_model_recovers_median() {
    let y = normals(2, 201);
    let r = fit(&constant_model(0.5), &y, &desk(3)).unwrap();
    assert!((r.beta[0] - sample_median(&y)).abs() < 1e-6, "{} vs {}", r.beta[0], sample_median(&y));
}

#[test]
fn f0_is_quantile_of_leading_tenth() {
    let y: Vec<f64> = (0..100).map(|i| i as f64).collect();
    // first 10 points are 0..9; the 0.25 order statistic is ceil(2.5) = 3rd
    assert_eq!(initial_quantile(&y, 0.25).unwrap(), 2.0);
    assert!(matches!(initial_quantile(&y[..49], 0.5), Err(Error::TooShort { .. })));
}

#[test]
fn config_validation() {
    let bad = EstimateConfig {
        m_keep: 300,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let y = normals(3, 100);
    let spec = ModelSpec::sav(0.5).unwrap();
    let cfg = EstimateConfig {
        bounds: Some(Bounds {
            lo: vec![0.0, 0.5, 1.0],
            hi: vec![1.0, 0.4, 2.0],
        }),
        ..Default::default()
    };
    assert!(fit(&spec, &y, &cfg).is_err());
}

#[test]
fn pathological_bounds_give_all_trials_invalid() {
    let y = normals(4, 200);
    let spec = ModelSpec::sav(0.5).unwrap();
    let cfg = EstimateConfig {
        n_trials: 20,
        m_keep: 5,
        bounds: Some(Bounds {
            lo: vec![1e13, 0.0, 0.0],
            hi: vec![2e13, 0.1, 0.1],
        }),
        ..Default::default()
    };
    assert_eq!(fit(&spec, &y, &cfg).unwrap_err(), Error::AllTrialsInvalid);
}

#[test]
fn r1_fit_recovers_parameters_and_is_stable() {
    let d = DgpSpec::catalog("r1").unwrap();
    let sim = simulate(&d, 4000, 11).unwrap();
    let spec = ModelSpec::asymmetric_slope(0.5).unwrap();
    let a = fit(&spec, &sim.y, &desk(1)).unwrap();
    let truth = [0.0, 0.2, 0.3, 0.3];
    for (b, t) in a.beta.iter().zip(truth) {
        assert!((b - t).abs() < 0.1, "{:?}", a.beta);
    }
    let b = fit(&spec, &sim.y, &desk(2)).unwrap();
    assert!((a.rq - b.rq).abs() <= 1e-6, "{} vs {}", a.rq, b.rq);

    // recomputation and monotone improvement
    assert_eq!(a.rq, objective(&spec, &a.beta, &sim.y, a.f0));
    assert!(a.trials.iter().all(|t| a.rq <= t.objective));
    assert_eq!(a.trials.len(), 200);

    // subgradient stationarity proxy
    let t_len = sim.y.len() as f64;
    let g = a.grads();
    for k in 0..4 {
        let m: f64 = (0..sim.y.len())
            .map(|t| {
                let hit = if sim.y[t] <= a.path.f[t] { 1.0 } else { 0.0 } - 0.5;
                hit * g.row(t)[k]
            })
            .sum::<f64>()
            / t_len.sqrt();
        assert!(m.abs() <= 5.0 / t_len.sqrt(), "k={k}: {m}");
    }
}

#[test]
fn parallel_and_sequential_fits_agree() {
    let d = DgpSpec::catalog("r1").unwrap();
    let sim = simulate(&d, 600, 12).unwrap();
    let spec = ModelSpec::asymmetric_slope(0.5).unwrap();
    let base = EstimateConfig {
        n_trials: 30,
        m_keep: 4,
        a_polish: 2,
        ..Default::default()
    };
    let seq = fit(
        &spec,
        &sim.y,
        &EstimateConfig {
            execution: Execution::Sequential,
            ..base.clone()
        },
    )
    .unwrap();
    let par = fit(
        &spec,
        &sim.y,
        &EstimateConfig {
            execution: Execution::Parallel,
            ..base
        },
    )
    .unwrap();
    assert_eq!(seq, par);
}

#[test]
fn evaluate_at_matches_objective() {
    let y = normals(5, 300);
    let spec = ModelSpec::sav(0.1).unwrap();
    let beta = [0.1, 0.5, -0.3];
    let r = evaluate_at(&spec, &y, &beta).unwrap();
    assert_eq!(r.rq, objective(&spec, &beta, &y, r.f0));
    assert_eq!(r.residuals.len(), 300);
    assert!(r.trials.is_empty());
}
