//! Monte-Carlo and iterative-oracle checks that are too slow or too noisy for
//! property testing.

use metasplit::asymptotics::{
    resolvent_trace_first, resolvent_trace_second, rho_limit, rho_sp_mc, rho_trtr_mc,
    sp_optimal_rate, stieltjes_mp, ShapePoint, WishartSpectra,
};
use metasplit::harness::{run_fig_b, ExperimentConfig, ExperimentKind, Method};
use metasplit::numerics::{gaussian_matrix, gaussian_vector, gram_eigvals};
use metasplit::oracles::{claim1_expected, claim1_moments};
use metasplit::solvers::{
    assemble_nonsplit_quadratic, assemble_split_quadratic, erm_solve, ridge_solve,
    sandwich_covariance, QuadraticAccumulator, QuadraticForm, RidgeConfig,
};
use metasplit::tasks::{sample_realizable_task, RealizableModel, SplitConfig};
use metasplit::{Matrix, Rng, Vector};

#[test]
fn gaussian_columns_are_rotation_invariant() {
    let mut rng = Rng::new(10, 0);
    let rows = 100_000;
    let x = gaussian_matrix(&mut rng, rows, 3);
    let (c, s) = (0.6_f64, 0.8_f64);
    let q = Matrix::from_row_slice(3, 3, &[c, -s, 0.0, s * c, c * c, -s, s * s, s * c, c]);
    assert!((q.transpose() * &q - Matrix::identity(3, 3)).amax() < 1e-15);
    let xq = &x * q;
    // Σ x² ~ χ²(rows) per column; two-sided 1% normal approximation
    for m in [&x, &xq] {
        for col in m.column_iter() {
            let z = (col.norm_squared() - rows as f64) / (2.0 * rows as f64).sqrt();
            assert!(z.abs() < 2.576, "z = {z}");
        }
    }
}

#[test]
fn ridge_matches_gradient_descent() {
    let mut rng = Rng::new(11, 0);
    let (n, d, lambda) = (5, 3, 0.7);
    let x = gaussian_matrix(&mut rng, n, d);
    let y = gaussian_vector(&mut rng, n);
    let w0 = gaussian_vector(&mut rng, d);
    let closed = ridge_solve(&w0, &x, &y, RidgeConfig::new(lambda).unwrap()).unwrap();
    let nf = n as f64;
    let lipschitz = (x.tr_mul(&x) / nf).symmetric_eigenvalues().max() + lambda;
    let mut w = w0.clone();
    for _ in 0..100_000 {
        let grad = x.tr_mul(&(&x * &w - &y)) / nf + (&w - &w0) * lambda;
        w -= grad / lipschitz;
    }
    assert!((w - closed).norm() < 1e-6);
}

#[test]
fn erm_matches_conjugate_gradient() {
    let mut rng = Rng::new(12, 0);
    let d = 8;
    let mut acc = QuadraticAccumulator::new(d);
    for _ in 0..30 {
        let f = QuadraticForm::new(
            gaussian_matrix(&mut rng, 2, d),
            gaussian_vector(&mut rng, 2),
        )
        .unwrap();
        acc.add(&f).unwrap();
    }
    let direct = erm_solve(&acc).unwrap();
    let mut w = Vector::zeros(d);
    let mut r = &acc.b - &acc.m * &w;
    let mut p = r.clone();
    for _ in 0..200 {
        let rr = r.norm_squared();
        if rr.sqrt() < 1e-15 * acc.b.norm() {
            break;
        }
        let mp = &acc.m * &p;
        let alpha = rr / p.dot(&mp);
        w += &p * alpha;
        r -= mp * alpha;
        p = &r + p * (r.norm_squared() / rr);
    }
    assert!((w - &direct).norm() <= 1e-8 * direct.norm());
}

fn realizable(d: usize, n: usize, seed: u64) -> RealizableModel {
    let centroid = gaussian_vector(&mut Rng::new(seed, 99), d);
    RealizableModel::new(d, n, centroid, 1.0).unwrap()
}

#[test]
fn sandwich_trace_predicts_replicate_mse() {
    let (d, n, t, reps) = (10, 10, 500, 200);
    let model = realizable(d, n, 13);
    let split = SplitConfig::new(5, 5).unwrap();
    let cfg = RidgeConfig::new(1.0).unwrap();
    let root = Rng::new(13, 0);
    let (mut observed, mut predicted) = (0.0, 0.0);
    for r in 0..reps {
        let rng = root.derive(r);
        let forms: Vec<QuadraticForm> = (0..t)
            .map(|i| {
                assemble_split_quadratic(&sample_realizable_task(&model, &rng, i), split, cfg)
                    .unwrap()
            })
            .collect();
        let mut acc = QuadraticAccumulator::new(d);
        forms.iter().for_each(|f| acc.add(f).unwrap());
        let w = erm_solve(&acc).unwrap();
        observed += (&w - &model.centroid).norm_squared();
        predicted += sandwich_covariance(&forms, &w).unwrap().trace() / t as f64;
    }
    let ratio = observed / predicted;
    assert!((ratio - 1.0).abs() < 0.2, "observed/predicted = {ratio}");
}

#[test]
fn both_estimators_are_consistent_in_realizable_model() {
    let (d, n, reps) = (20, 10, 30);
    let model = realizable(d, n, 14);
    let split = SplitConfig::new(5, 5).unwrap();
    let sp_cfg = RidgeConfig::new(1e4).unwrap();
    let tr_cfg = RidgeConfig::new(1.0).unwrap();
    let root = Rng::new(14, 0);
    let mut errs = [[0.0; 2]; 2];
    for r in 0..reps {
        let rng = root.derive(r);
        let mut accs = [QuadraticAccumulator::new(d), QuadraticAccumulator::new(d)];
        for t in 0..4000u64 {
            let task = sample_realizable_task(&model, &rng, t);
            accs[0]
                .add(&assemble_nonsplit_quadratic(&task, tr_cfg).unwrap())
                .unwrap();
            accs[1]
                .add(&assemble_split_quadratic(&task, split, sp_cfg).unwrap())
                .unwrap();
            let slot = match t + 1 {
                250 => 0,
                4000 => 1,
                _ => continue,
            };
            for m in 0..2 {
                errs[m][slot] += (erm_solve(&accs[m]).unwrap() - &model.centroid).norm_squared();
            }
        }
    }
    for [early, late] in errs {
        assert!(early >= 8.0 * late, "early {early}, late {late}");
    }
}

#[test]
fn fig_b_error_decays_like_one_over_t() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::FigB);
    cfg.seed = 15;
    cfg.t_grid = vec![100, 1000];
    let rows = run_fig_b(&cfg).unwrap();
    for method in [Method::Trtr, Method::SpN1Zero, Method::SpN1K] {
        let at = |t: f64| {
            rows.iter()
                .find(|r| r.method == method && r.coordinate == t)
                .unwrap()
                .value
        };
        let ratio = at(100.0) / (10.0 * at(1000.0));
        assert!((1.0 / 1.5..=1.5).contains(&ratio), "{method}: {ratio}");
    }
}

#[test]
fn finite_rates_approach_limit_at_gamma_one() {
    let rng = Rng::new(16, 0);
    let r = rho_trtr_mc(500, 500, 0.5, 20, &rng, 1.0).unwrap();
    assert!((r.value / (32.0 / 27.0) - 1.0).abs() < 0.02, "{r:?}");
    let r = rho_trtr_mc(500, 500, 1.0, 20, &rng.derive(1), 1.0).unwrap();
    let lim = rho_limit(ShapePoint::new(1.0, 1.0).unwrap());
    assert!((r.value / lim - 1.0).abs() < 0.02);

    let spectra = WishartSpectra::sample(800, 800, 16, &rng.derive(2)).unwrap();
    for lambda in [0.25, 0.5, 1.0, 2.0] {
        let mc = spectra.rho_trtr(lambda, 1.0).unwrap();
        let lim = rho_limit(ShapePoint::new(lambda, 1.0).unwrap());
        assert!(
            (mc.value - lim).abs() <= 3.0 * mc.stderr + 0.02 * lim,
            "lambda {lambda}: {mc:?} vs {lim}"
        );
    }
}

#[test]
fn stieltjes_matches_wishart_resolvent() {
    let x = gaussian_matrix(&mut Rng::new(17, 0), 2000, 2000);
    let eig = gram_eigvals(&x).unwrap();
    let mc = eig.iter().map(|s| 1.0 / (s + 1.0)).sum::<f64>() / 2000.0;
    let exact = stieltjes_mp(1.0, 1.0, 1.0);
    assert!((mc / exact - 1.0).abs() < 0.01, "{mc} vs {exact}");
}

#[test]
fn derivative_trick() {
    let h = 1e-4;
    for &(lambda, gamma) in &[(0.5, 1.0), (1.0, 0.5), (0.3, 2.0), (2.0, 3.0)] {
        let pt = ShapePoint::new(lambda, gamma).unwrap();
        let fd = -(stieltjes_mp(lambda, 1.0 + h, gamma) - stieltjes_mp(lambda, 1.0 - h, gamma))
            / (2.0 * h);
        let exact = resolvent_trace_first(pt);
        assert!((fd - exact).abs() < 1e-6, "{fd} vs {exact}");
    }
    // −⅙ ∂λ₁ ∂²λ₂ s by nested central differences
    let h = 1e-3;
    for &(lambda, gamma) in &[(0.5, 1.0), (1.0, 0.5), (2.0, 3.0)] {
        let s = |l1: f64, l2: f64| stieltjes_mp(l1, l2, gamma);
        let d2 = |l1: f64| (s(l1, 1.0 + h) - 2.0 * s(l1, 1.0) + s(l1, 1.0 - h)) / (h * h);
        let fd = -(d2(lambda + h) - d2(lambda - h)) / (2.0 * h) / 6.0;
        let exact = resolvent_trace_second(ShapePoint::new(lambda, gamma).unwrap());
        assert!((fd / exact - 1.0).abs() < 1e-4, "{fd} vs {exact}");
    }
    let (d, lambda) = (1000, 0.5);
    let spectra = WishartSpectra::sample(d, d, 2, &Rng::new(18, 0)).unwrap();
    let mc = spectra
        .eigvals
        .iter()
        .map(|e| {
            e.iter()
                .map(|s| s / ((s + lambda) * (s + lambda)))
                .sum::<f64>()
                / d as f64
        })
        .sum::<f64>()
        / spectra.len() as f64;
    let exact = resolvent_trace_first(ShapePoint::new(lambda, 1.0).unwrap());
    assert!((mc / exact - 1.0).abs() < 0.02, "{mc} vs {exact}");
    let mc2 = spectra
        .eigvals
        .iter()
        .map(|e| {
            e.iter()
                .map(|s| (s / ((s + lambda) * (s + lambda))).powi(2))
                .sum::<f64>()
                / d as f64
        })
        .sum::<f64>()
        / spectra.len() as f64;
    let exact2 = resolvent_trace_second(ShapePoint::new(lambda, 1.0).unwrap());
    assert!((mc2 / exact2 - 1.0).abs() < 0.02, "{mc2} vs {exact2}");
}

#[test]
fn split_rate_never_beats_its_optimum() {
    let rng = Rng::new(19, 0);
    for (i, &(d, n1, n2)) in [(10, 5, 5), (30, 15, 5), (5, 20, 2)].iter().enumerate() {
        let best = sp_optimal_rate(d, n2, 1.0).unwrap().value;
        for k in -2..=4 {
            let lambda = 10f64.powi(k);
            let r = rho_sp_mc(
                d,
                n1,
                n2,
                lambda,
                2000,
                &rng.derive_path(&[i as u64, (k + 2) as u64]),
                1.0,
            )
            .unwrap();
            assert!(
                r.value >= best - 3.0 * r.stderr,
                "{d} {n1} {n2} {lambda}: {r:?} < {best}"
            );
        }
    }
}

#[test]
fn claim1_random_symmetric() {
    let mut rng = Rng::new(20, 0);
    let g = gaussian_matrix(&mut rng, 4, 4);
    let a = (&g + g.transpose()) * 0.5;
    let m = claim1_moments(&a, 200_000, &rng.derive(1)).unwrap();
    let (same, cross) = claim1_expected(&a);
    assert!(
        (m.mean_sq_same - same).abs() <= 3.0 * m.stderr_same,
        "{m:?} vs {same}"
    );
    assert!(
        (m.mean_sq_cross - cross).abs() <= 3.0 * m.stderr_cross,
        "{m:?} vs {cross}"
    );
}
