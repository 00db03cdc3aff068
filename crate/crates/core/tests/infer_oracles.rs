mod common;

use caviar_core::dgp::{simulate, DgpSpec};
use caviar_core::infer::*;
use caviar_core::numkit::{ln_gamma, std_normal_sf, Matrix};
use common::adaptive_simpson;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn chi2_pdf(x: f64, k: usize) -> f64 {
    let a = k as f64 / 2.0;
    ((a - 1.0) * x.ln() - x / 2.0 - a * 2f64.ln() - ln_gamma(a)).exp()
}

fn spd(seed: u64, p: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let a = Matrix::from_rows(&a).unwrap();
    let mut m = a.matmul(&a.transpose()).unwrap();
    for i in 0..p {
        m[(i, i)] += 0.5;
    }
    m
}

#[test]
fn chi2_identities() {
    for k in 0..400 {
        let x = k as f64 * 0.1;
        let one = chi2_sf(x, 1).unwrap();
        assert!((one - 2.0 * std_normal_sf(x.sqrt())).abs() < 1e-12, "x={x}");
        let two = chi2_sf(x, 2).unwrap();
        assert!((two - (-x / 2.0).exp()).abs() < 1e-12, "x={x}");
    }
}

#[test]
fn chi2_matches_density_quadrature() {
    for k in 3..=7usize {
        for &x in &[0.5, 2.0, 7.5, 15.0, 30.0] {
            let tail = adaptive_simpson(&|v| chi2_pdf(v, k), x, x + 400.0, 1e-14);
            let got = chi2_sf(x, k).unwrap();
            assert!((got - tail).abs() < 1e-10, "k={k} x={x}: {got} vs {tail}");
        }
    }
}

#[test]
fn wald_is_zero_at_the_null() {
    let cov = spd(1, 4);
    let beta = [0.1, 0.2, 0.3, 0.3];
    let r = Matrix::row_vector(&[0.0, 0.0, 1.0, -1.0]);
    let w = wald(&beta, &cov, &r, &[0.0], 4000).unwrap();
    assert_eq!(w.statistic, 0.0);
    assert_eq!(w.p_value, 1.0);
    assert_eq!(w.dof, 1);
}

#[test]
fn wald_singular_bracket_is_an_error() {
    let cov = Matrix::diag(&[1.0, 0.0]);
    let r = Matrix::row_vector(&[0.0, 1.0]);
    assert!(wald(&[0.0, 1.0], &cov, &r, &[0.0], 100).is_err());
}

proptest! {
    #[test]
    fn wald_invariant_under_row_recombination(seed in 0u64..500, c in -5.0f64..5.0) {
        prop_assume!(c.abs() > 0.05);
        let cov = spd(seed, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let beta: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = Matrix::from_rows(&[vec![0.0, 0.0, 1.0, -1.0], vec![1.0, 0.5, 0.0, 0.0]]).unwrap();
        let gamma = [0.1, -0.2];
        let base = wald(&beta, &cov, &r, &gamma, 2000).unwrap();
        let m = Matrix::from_rows(&[vec![c, 1.0], vec![0.3, 2.0]]).unwrap();
        let r2 = m.matmul(&r).unwrap();
        let g2 = m.mul_vec(&gamma).unwrap();
        let w = wald(&beta, &cov, &r2, &g2, 2000).unwrap();
        prop_assert!((w.statistic - base.statistic).abs() <= 1e-8 * (1.0 + base.statistic));
        let scaled = wald(&beta, &cov, &r.scale(c), &[gamma[0] * c, gamma[1] * c], 2000).unwrap();
        prop_assert!((scaled.statistic - base.statistic).abs() <= 1e-8 * (1.0 + base.statistic));
    }

    #[test]
    fn param_p_values_decrease_in_magnitude(b in 0.0f64..5.0, db in 0.001f64..1.0) {
        let cov = Matrix::diag(&[400.0]);
        let a = param_report(&[b], &cov, 400).unwrap()[0];
        let c = param_report(&[-(b + db)], &cov, 400).unwrap()[0];
        prop_assert!((0.0..=1.0).contains(&a.p_value));
        prop_assert!(c.p_value <= a.p_value);
    }
}

#[test]
fn param_report_basics() {
    let cov = Matrix::diag(&[4.0, 9.0]);
    let rows = param_report(&[0.0, 0.3], &cov, 100).unwrap();
    assert_eq!(rows[0].p_value, 1.0);
    assert!((rows[0].std_err - 0.2).abs() < 1e-15);
    let doubled = param_report(&[0.0, 0.3], &cov, 200).unwrap();
    assert!((rows[1].std_err / doubled[1].std_err - 2f64.sqrt()).abs() < 1e-12);
    assert!(param_report(&[1.0], &Matrix::diag(&[0.0]), 10).is_err());
}

#[test]
fn exceedance_of_true_r1_quantile() {
    let d = DgpSpec::catalog("r1").unwrap();
    let sim = simulate(&d, 5000, 3).unwrap();
    let f = sim.quantile_path(&d, 0.05).unwrap();
    let rate = exceedance_rate(&sim.y, &f).unwrap();
    // 4 binomial standard errors at T = 5000
    assert!((rate - 5.0).abs() < 4.0 * (0.05f64 * 0.95 / 5000.0).sqrt() * 100.0, "{rate}");
}

#[test]
fn dq_size_under_independent_hits() {
    let tau = 0.05;
    let n_trials = 500;
    let mut rejections = 0;
    for s in 0..n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
        let t_len = 1000;
        let f: Vec<f64> = (0..t_len).map(|_| rng.sample::<f64, _>(StandardNormal) - 1.645).collect();
        let y: Vec<f64> = (0..t_len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let h: Vec<f64> = y
            .iter()
            .map(|v| if *v <= -1.644_853_626_951_472_2 { 1.0 - tau } else { -tau })
            .collect();
        let (h, x) = default_instruments(&h, &f, 4).unwrap();
        let r = dq_test(&h, &x, tau, DqMode::InSample, "default").unwrap();
        if r.p_value <= 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / n_trials as f64;
    assert!((0.02..=0.09).contains(&rate), "rate {rate}");
}

#[test]
fn dq_detects_clustered_hits() {
    let tau = 0.05;
    let t_len = 2000;
    let h: Vec<f64> = (0..t_len)
        .map(|t| if (t / 10) % 20 == 0 { 1.0 - tau } else { -tau })
        .collect();
    let f = vec![-1.6; t_len];
    // constant f makes X'X singular, so drop it from the design
    let (h, x) = default_instruments(&h, &f, 4).unwrap();
    let rows: Vec<Vec<f64>> = (0..x.rows()).map(|i| x.row(i)[..5].to_vec()).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let r = dq_test(&h, &x, tau, DqMode::OutOfSample, "const, hit lags").unwrap();
    assert!(r.p_value < 1e-6);
}
