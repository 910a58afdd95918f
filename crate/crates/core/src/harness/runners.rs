use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, SPLIT_LAMBDA};
use super::output::{sort_rows, Method, ResultRow};
use crate::asymptotics::{
    optimize_rho, rho_limit, rho_sp_mc, rho_upper_bound, sp_limit_rate, sp_optimal_rate,
    tune_trtr_lambda, RateEstimate, ShapePoint, WishartSpectra,
};
use crate::numerics::{gaussian_vector, Rng};
use crate::oracles::{counterexample_erm_gap, CounterexampleRun};
use crate::solvers::{
    assemble_nonsplit_quadratic, assemble_split_quadratic, erm_solve, QuadraticAccumulator,
    RidgeConfig,
};
use crate::tasks::{sample_realizable_task, RealizableModel, SplitConfig};
use crate::{Error, Result};

// second-level stream keys
const CENTROID: u64 = 0;
const TASKS: u64 = 1;
const TUNING: u64 = 2;
const REFERENCE: u64 = 3;

const OPTIMIZE_TOL: f64 = 1e-8;

fn root_rng(cfg: &ExperimentConfig) -> Rng {
    Rng::new(cfg.seed, cfg.experiment.stream_tag())
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "runner for `{kind}` given a `{}` config",
            cfg.experiment
        )));
    }
    cfg.validate()
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

struct RowSink {
    experiment: ExperimentKind,
    rows: Vec<ResultRow>,
}

impl RowSink {
    fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            rows: Vec::new(),
        }
    }

    fn push(
        &mut self,
        coordinate: f64,
        method: Method,
        value: f64,
        stderr: f64,
        replicates: usize,
    ) {
        self.rows.push(ResultRow {
            experiment: self.experiment,
            coordinate,
            method,
            value,
            stderr,
            replicates,
        });
    }

    fn sample(&mut self, coordinate: f64, method: Method, xs: &[f64], scale: f64) {
        let (m, se) = mean_stderr(xs);
        self.push(coordinate, method, m * scale, se * scale, xs.len());
    }

    /// Theory row; closed forms report zero replicates.
    fn rate(
        &mut self,
        coordinate: f64,
        method: Method,
        rate: &RateEstimate,
        samples: usize,
        scale: f64,
    ) {
        let reps = if rate.stderr == 0.0 { 0 } else { samples };
        self.push(
            coordinate,
            method,
            rate.value * scale,
            rate.stderr * scale,
            reps,
        );
    }

    fn finish(mut self) -> Vec<ResultRow> {
        sort_rows(&mut self.rows);
        self.rows
    }
}

/// Train-train regularization and its finite-`(d, n)` Monte-Carlo rate.
fn trtr_setting(
    cfg: &ExperimentConfig,
    d: usize,
    n: usize,
    rng: &Rng,
) -> Result<(f64, RateEstimate)> {
    match cfg.lambda {
        Some(lambda) => {
            let spectra = WishartSpectra::sample(d, n, cfg.mc_samples, rng)?;
            Ok((lambda, spectra.rho_trtr(lambda, cfg.r_sq)?))
        }
        None => {
            let tuned = tune_trtr_lambda(d, n, cfg.mc_samples, rng, cfg.r_sq)?;
            Ok((tuned.lambda, tuned.estimate))
        }
    }
}

fn centroid_model(cfg: &ExperimentConfig, d: usize, grid_index: u64) -> Result<RealizableModel> {
    let mut rng = root_rng(cfg).derive_path(&[CENTROID, grid_index]);
    let centroid = gaussian_vector(&mut rng, d);
    RealizableModel::new(d, cfg.n, centroid, cfg.r_sq)
}

/// Squared errors `[trtr, sp_n1_0, sp_n1_k]` of the three ERMs fitted on
/// growing prefixes of one task stream, one entry per grid `T`.
fn erm_errors_along_grid(
    model: &RealizableModel,
    n1: usize,
    lambda_trtr: f64,
    t_grid: &[usize],
    rng: &Rng,
) -> Result<Vec<[f64; 3]>> {
    let (d, n) = (model.dim, model.samples);
    let trtr_cfg = RidgeConfig::new(lambda_trtr)?;
    let sp_cfg = RidgeConfig::new(SPLIT_LAMBDA)?;
    let full_val = SplitConfig::new(0, n)?;
    let partial = SplitConfig::new(n1, n - n1)?;
    let mut accs = [
        QuadraticAccumulator::new(d),
        QuadraticAccumulator::new(d),
        QuadraticAccumulator::new(d),
    ];
    let mut out = Vec::with_capacity(t_grid.len());
    let last = *t_grid.last().expect("validated non-empty grid");
    for t in 0..last {
        let task = sample_realizable_task(model, rng, t as u64);
        accs[0].add(&assemble_nonsplit_quadratic(&task, trtr_cfg)?)?;
        accs[1].add(&assemble_split_quadratic(&task, full_val, sp_cfg)?)?;
        accs[2].add(&assemble_split_quadratic(&task, partial, sp_cfg)?)?;
        if t + 1 == t_grid[out.len()] {
            let mut errs = [0.0; 3];
            for (e, acc) in errs.iter_mut().zip(&accs) {
                *e = (erm_solve(acc)? - &model.centroid).norm_squared();
            }
            out.push(errs);
        }
    }
    Ok(out)
}

const ERM_METHODS: [Method; 3] = [Method::Trtr, Method::SpN1Zero, Method::SpN1K];

/// Figure (b): estimation error against the number of tasks.
pub fn run_fig_b(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    expect_kind(cfg, ExperimentKind::FigB)?;
    let (d, n, n1) = (cfg.d, cfg.n, cfg.n1);
    let root = root_rng(cfg);
    let model = centroid_model(cfg, d, 0)?;
    let (lambda, trtr_rate) = trtr_setting(cfg, d, n, &root.derive_path(&[TUNING, 0]))?;
    let sp0_rate = sp_optimal_rate(d, n, cfg.r_sq)?;
    let spk_rate = rho_sp_mc(
        d,
        n1,
        n - n1,
        SPLIT_LAMBDA,
        cfg.mc_samples,
        &root.derive_path(&[REFERENCE, 0]),
        cfg.r_sq,
    )?;

    let per_replicate = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let rng = root.derive_path(&[TASKS, 0, r as u64]);
            erm_errors_along_grid(&model, n1, lambda, &cfg.t_grid, &rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sink = RowSink::new(cfg.experiment);
    for (gi, &t) in cfg.t_grid.iter().enumerate() {
        let tf = t as f64;
        for (mi, method) in ERM_METHODS.into_iter().enumerate() {
            let errs: Vec<f64> = per_replicate.iter().map(|rep| rep[gi][mi]).collect();
            sink.sample(tf, method, &errs, 1.0);
        }
        sink.rate(
            tf,
            Method::ReferenceTrtr,
            &trtr_rate,
            cfg.mc_samples,
            1.0 / tf,
        );
        sink.rate(
            tf,
            Method::ReferenceSpN1Zero,
            &sp0_rate,
            cfg.mc_samples,
            1.0 / tf,
        );
        sink.rate(
            tf,
            Method::ReferenceSpN1K,
            &spk_rate,
            cfg.mc_samples,
            1.0 / tf,
        );
    }
    Ok(sink.finish())
}

struct GammaSetting {
    gamma: f64,
    d: usize,
    model: RealizableModel,
    lambda: f64,
    trtr_rate: RateEstimate,
    spk_rate: RateEstimate,
}

/// Figure (c): `T`-scaled estimation error against `γ = d/n` at fixed `T`.
pub fn run_fig_c(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    expect_kind(cfg, ExperimentKind::FigC)?;
    let (n, n1) = (cfg.n, cfg.n1);
    let t = *cfg.t_grid.last().expect("validated non-empty grid");
    let root = root_rng(cfg);
    let settings = cfg
        .gamma_grid
        .par_iter()
        .enumerate()
        .map(|(gi, &gamma)| {
            let gi = gi as u64;
            let d = cfg.dim_for_gamma(gamma);
            let (lambda, trtr_rate) = trtr_setting(cfg, d, n, &root.derive_path(&[TUNING, gi]))?;
            let spk_rate = rho_sp_mc(
                d,
                n1,
                n - n1,
                SPLIT_LAMBDA,
                cfg.mc_samples,
                &root.derive_path(&[REFERENCE, gi]),
                cfg.r_sq,
            )?;
            Ok(GammaSetting {
                gamma,
                d,
                model: centroid_model(cfg, d, gi)?,
                lambda,
                trtr_rate,
                spk_rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|gi| (0..cfg.replicates).map(move |r| (gi, r)))
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(gi, r)| {
            let s = &settings[gi];
            let rng = root.derive_path(&[TASKS, gi as u64, r as u64]);
            Ok(erm_errors_along_grid(&s.model, n1, s.lambda, &[t], &rng)?[0])
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sink = RowSink::new(cfg.experiment);
    let tf = t as f64;
    for (gi, s) in settings.iter().enumerate() {
        let block = &errors[gi * cfg.replicates..(gi + 1) * cfg.replicates];
        for (mi, method) in ERM_METHODS.into_iter().enumerate() {
            let errs: Vec<f64> = block.iter().map(|e| e[mi]).collect();
            sink.sample(s.gamma, method, &errs, tf);
        }
        let limit = optimize_rho(s.d as f64 / n as f64, OPTIMIZE_TOL)?.value * cfg.r_sq;
        sink.push(s.gamma, Method::ReferenceTrtr, limit, 0.0, 0);
        sink.rate(
            s.gamma,
            Method::ReferenceTrtrFinite,
            &s.trtr_rate,
            cfg.mc_samples,
            1.0,
        );
        sink.rate(
            s.gamma,
            Method::ReferenceSpN1Zero,
            &sp_optimal_rate(s.d, n, cfg.r_sq)?,
            0,
            1.0,
        );
        sink.rate(
            s.gamma,
            Method::ReferenceSpN1K,
            &s.spk_rate,
            cfg.mc_samples,
            1.0,
        );
    }
    Ok(sink.finish())
}

/// Log grid `10^{-2}, 10^{-5/3}, ..., 10^4` searched for the finite-`n₁`
/// train-validation rate in figure (a).
fn sp_lambda_grid() -> Vec<f64> {
    (-6..=12).map(|k| 10f64.powf(k as f64 / 3.0)).collect()
}

/// Figure (a): optimal rates of both methods against `γ`. No ERM runs.
pub fn run_fig_a(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    expect_kind(cfg, ExperimentKind::FigA)?;
    let (n, n1) = (cfg.n, cfg.n1);
    let root = root_rng(cfg);
    let lambdas = sp_lambda_grid();
    let finite = cfg
        .gamma_grid
        .par_iter()
        .enumerate()
        .map(|(gi, &gamma)| {
            let d = cfg.dim_for_gamma(gamma);
            let spectra = WishartSpectra::sample(
                d,
                n1,
                cfg.mc_samples,
                &root.derive_path(&[REFERENCE, gi as u64]),
            )?;
            let mut best: Option<RateEstimate> = None;
            for &lambda in &lambdas {
                let est = spectra.rho_sp(lambda, n - n1, cfg.r_sq)?;
                if best.is_none_or(|b| est.value < b.value) {
                    best = Some(est);
                }
            }
            Ok(best.expect("non-empty lambda grid"))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sink = RowSink::new(cfg.experiment);
    for (&gamma, spk) in cfg.gamma_grid.iter().zip(&finite) {
        let opt = optimize_rho(gamma, OPTIMIZE_TOL)?;
        sink.push(gamma, Method::Trtr, opt.value * cfg.r_sq, 0.0, 0);
        sink.push(
            gamma,
            Method::SpN1Zero,
            sp_limit_rate(gamma) * cfg.r_sq,
            0.0,
            0,
        );
        sink.rate(gamma, Method::SpN1K, spk, cfg.mc_samples, 1.0);
        sink.push(
            gamma,
            Method::UpperBound,
            rho_upper_bound(gamma) * cfg.r_sq,
            0.0,
            0,
        );
    }
    Ok(sink.finish())
}

/// Counterexample: both ERMs against `T`, with the exact minimizers.
pub fn run_counterexample(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    expect_kind(cfg, ExperimentKind::Counterexample)?;
    let lambda = cfg.lambda.expect("validated explicit lambda");
    let root = root_rng(cfg);
    let jobs: Vec<(usize, usize)> = (0..cfg.t_grid.len())
        .flat_map(|gi| (0..cfg.replicates).map(move |r| (gi, r)))
        .collect();
    let runs = jobs
        .iter()
        .map(|&(gi, r)| {
            let rng = root.derive_path(&[TASKS, gi as u64, r as u64]);
            counterexample_erm_gap(cfg.n, lambda, cfg.t_grid[gi], &rng)
        })
        .collect::<Result<Vec<CounterexampleRun>>>()?;

    let mut sink = RowSink::new(cfg.experiment);
    for (gi, &t) in cfg.t_grid.iter().enumerate() {
        let tf = t as f64;
        let block = &runs[gi * cfg.replicates..(gi + 1) * cfg.replicates];
        let pick = |f: fn(&CounterexampleRun) -> f64| block.iter().map(f).collect::<Vec<f64>>();
        sink.sample(tf, Method::Trtr, &pick(|r| r.w_trtr_hat), 1.0);
        sink.sample(tf, Method::SpN1K, &pick(|r| r.w_split_hat), 1.0);
        sink.sample(tf, Method::TrtrGap, &pick(|r| r.gap_to_test_star), 1.0);
        // root mean square distance, stderr by the delta method
        let sq = pick(|r| r.split_distance * r.split_distance);
        let (msq, se_sq) = mean_stderr(&sq);
        let rms = msq.sqrt();
        let se = if rms > 0.0 { se_sq / (2.0 * rms) } else { 0.0 };
        sink.push(tf, Method::SpDistance, rms, se, block.len());
        let m = block[0].minimizers;
        sink.push(tf, Method::ReferenceTrtr, m.w_trtr_star, 0.0, 0);
        sink.push(tf, Method::ReferenceTest, m.w_test_star, 0.0, 0);
    }
    Ok(sink.finish())
}

/// Finite-`(d, n)` and limiting rates at a single `λ` (tuned when absent).
pub fn run_rates(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    expect_kind(cfg, ExperimentKind::Rates)?;
    let (d, n, n1) = (cfg.d, cfg.n, cfg.n1);
    let root = root_rng(cfg);
    let (lambda, trtr) = trtr_setting(cfg, d, n, &root.derive_path(&[TUNING, 0]))?;
    let sp0 = rho_sp_mc(d, 0, n, lambda, cfg.mc_samples, &root, cfg.r_sq)?;
    let spk = rho_sp_mc(
        d,
        n1,
        n - n1,
        lambda,
        cfg.mc_samples,
        &root.derive_path(&[REFERENCE, 0]),
        cfg.r_sq,
    )?;
    let limit = rho_limit(ShapePoint::new(lambda, d as f64 / n as f64)?) * cfg.r_sq;

    let mut sink = RowSink::new(cfg.experiment);
    sink.rate(lambda, Method::Trtr, &trtr, cfg.mc_samples, 1.0);
    sink.rate(lambda, Method::SpN1Zero, &sp0, 0, 1.0);
    sink.rate(lambda, Method::SpN1K, &spk, cfg.mc_samples, 1.0);
    sink.push(lambda, Method::ReferenceTrtr, limit, 0.0, 0);
    sink.rate(
        lambda,
        Method::ReferenceSpN1Zero,
        &sp_optimal_rate(d, n, cfg.r_sq)?,
        0,
        1.0,
    );
    sink.rate(
        lambda,
        Method::ReferenceSpN1K,
        &sp_optimal_rate(d, n - n1, cfg.r_sq)?,
        0,
        1.0,
    );
    Ok(sink.finish())
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    match cfg.experiment {
        ExperimentKind::FigA => run_fig_a(cfg),
        ExperimentKind::FigB => run_fig_b(cfg),
        ExperimentKind::FigC => run_fig_c(cfg),
        ExperimentKind::Counterexample => run_counterexample(cfg),
        ExperimentKind::Rates => run_rates(cfg),
    }
}
