//! Experiment orchestration: repeated seeded runs, noise studies and
//! hyperparameter sweeps, with CSV outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;

use crate::cheb::{fast_decompose, fast_reconstruct, FastTransformPlan};
use crate::config::ExperimentConfig;
use crate::dataset::{load_dataset, NodeDataset};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, Metrics};
use crate::neural::{
    evaluate_accuracy, forward, hetero_forward, hetero_train, init_hetero, init_network, train,
    HeteroModelParams, LabeledGraphData, NetworkParams,
};
use crate::noise::{apply_noise, NoiseSpec};
use crate::rng::Stream;
use crate::spectral::eigendecompose;

/// A trained model of either pipeline.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Homogeneous(NetworkParams),
    Heterogeneous(HeteroModelParams),
}

#[derive(Debug, Clone, Copy)]
pub struct RunResult {
    pub run: usize,
    pub metrics: Metrics,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunResult>,
    pub mean: Metrics,
    pub std: Metrics,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ExperimentOutcome {
    fn from_runs(runs: Vec<RunResult>) -> Self {
        let collect =
            |f: fn(&Metrics) -> f64| -> Vec<f64> { runs.iter().map(|r| f(&r.metrics)).collect() };
        let (acc_m, acc_s) = mean_std(&collect(|m| m.accuracy));
        let (mac_m, mac_s) = mean_std(&collect(|m| m.macro_f1));
        let (mic_m, mic_s) = mean_std(&collect(|m| m.micro_f1));
        ExperimentOutcome {
            runs,
            mean: Metrics {
                accuracy: acc_m,
                macro_f1: mac_m,
                micro_f1: mic_m,
            },
            std: Metrics {
                accuracy: acc_s,
                macro_f1: mac_s,
                micro_f1: mic_s,
            },
        }
    }
}

fn feature_checksum(x: &Array2<f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in x.iter() {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Build one transform plan per homogeneous graph of the dataset.
pub fn build_plans(cfg: &ExperimentConfig, ds: &NodeDataset) -> Result<Vec<FastTransformPlan>> {
    ds.graphs()
        .into_iter()
        .map(|g| {
            FastTransformPlan::new(
                crate::graph::NormalizedLaplacian::new(g),
                cfg.family()?,
                cfg.framelet.levels,
                cfg.framelet.dilation,
                cfg.chebyshev.degree,
                cfg.cutoff()?,
            )
        })
        .collect()
}

fn predict(logits: &Array2<f64>) -> Vec<usize> {
    (0..logits.nrows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0usize;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Train once with the given features and run seed; returns the model and
/// the metrics on the test mask.
pub fn train_once(
    cfg: &ExperimentConfig,
    ds: &NodeDataset,
    plans: &[FastTransformPlan],
    features: &Array2<f64>,
    run_seed: u64,
) -> Result<(TrainedModel, Metrics)> {
    let mut train_cfg = cfg.train_config();
    train_cfg.seed = run_seed;
    let data = LabeledGraphData {
        features,
        labels: &ds.labels,
        train_mask: &ds.train_mask,
        val_mask: &ds.val_mask,
    };
    let block_count = plans[0].block_count();
    let n = ds.num_nodes();

    let (model, logits) = if ds.is_heterogeneous() {
        let hm = init_hetero(
            run_seed,
            plans.len(),
            ds.num_features(),
            cfg.model.hidden,
            ds.num_classes,
            block_count,
            n,
            train_cfg.dropout_rate,
            cfg.variant()?,
            cfg.merge()?,
        )?;
        let (trained, _history) = hetero_train(hm, plans, &data, &train_cfg)?;
        let logits = hetero_forward(&trained, plans, features, None)?;
        (TrainedModel::Heterogeneous(trained), logits)
    } else {
        let net = init_network(
            run_seed,
            ds.num_features(),
            cfg.model.hidden,
            ds.num_classes,
            block_count,
            n,
            train_cfg.dropout_rate,
            cfg.variant()?,
        );
        let (trained, _history) = train(net, &plans[0], &data, &train_cfg)?;
        let logits = forward(&trained, &plans[0], features, None)?;
        (TrainedModel::Homogeneous(trained), logits)
    };

    let metrics = compute_metrics(&predict(&logits), &ds.labels, &ds.test_mask)?;
    Ok((model, metrics))
}

fn noisy_features(
    cfg: &ExperimentConfig,
    ds: &NodeDataset,
    run_index: usize,
) -> Result<Array2<f64>> {
    let Some(section) = &cfg.noise else {
        return Ok(ds.features.clone());
    };
    // each repeat draws fresh noise from consecutive seeds
    let run_seed = section.seed.unwrap_or(cfg.train.seed) + run_index as u64;
    let spec = match cfg.noise_spec_for(section, run_seed)? {
        NoiseSpec::Binary { rate, mode, .. } => NoiseSpec::Binary {
            rate,
            mode,
            seed: run_seed,
        },
        NoiseSpec::Gaussian { sigma, .. } => NoiseSpec::Gaussian {
            sigma,
            seed: run_seed,
        },
        NoiseSpec::HighFrequency { count, level, .. } => NoiseSpec::HighFrequency {
            count,
            level,
            seed: run_seed,
        },
    };
    let es = match (&spec, ds.is_heterogeneous()) {
        (NoiseSpec::HighFrequency { .. }, true) => {
            return Err(Error::config(
                "high-frequency noise needs a homogeneous dataset",
            ))
        }
        (NoiseSpec::HighFrequency { .. }, false) => Some(eigendecompose(
            &crate::graph::NormalizedLaplacian::new(ds.graphs()[0]),
        )?),
        _ => None,
    };
    apply_noise(&ds.features, &spec, es.as_ref())
}

/// Run the configured experiment: `repeats` seeded runs, per-run rows in
/// `results.csv` and mean/std rows in `summary.csv` under `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<ExperimentOutcome> {
    let ds = load_dataset(&base_dir.join(&cfg.dataset.manifest))?;
    let outcome = run_experiment_on(cfg, &ds, out_dir)?;
    Ok(outcome)
}

/// Same as [`run_experiment`] but with an already-loaded dataset.
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    ds: &NodeDataset,
    out_dir: &Path,
) -> Result<ExperimentOutcome> {
    let plans = build_plans(cfg, ds)?;
    let record_wall = cfg.experiment.timing == "wall";
    let before = feature_checksum(&ds.features);

    let mut runs = Vec::with_capacity(cfg.experiment.repeats);
    for i in 0..cfg.experiment.repeats {
        let started = Instant::now();
        let features = noisy_features(cfg, ds, i)?;
        let run_seed = cfg.train.seed + i as u64;
        let (_, metrics) = train_once(cfg, ds, &plans, &features, run_seed)?;
        runs.push(RunResult {
            run: i,
            metrics,
            wall_seconds: if record_wall {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
    }

    if feature_checksum(&ds.features) != before {
        return Err(Error::input(
            "experiment mutated the loaded features; this is a bug",
        ));
    }

    let outcome = ExperimentOutcome::from_runs(runs);
    std::fs::create_dir_all(out_dir)?;
    write_results_csv(&out_dir.join("results.csv"), &outcome)?;
    write_summary_csv(&out_dir.join("summary.csv"), &outcome)?;
    Ok(outcome)
}

fn write_results_csv(path: &Path, outcome: &ExperimentOutcome) -> Result<()> {
    let mut text = String::from("run,accuracy,macro_f1,micro_f1,wall_seconds\n");
    for r in &outcome.runs {
        text.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.run, r.metrics.accuracy, r.metrics.macro_f1, r.metrics.micro_f1, r.wall_seconds
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_summary_csv(path: &Path, outcome: &ExperimentOutcome) -> Result<()> {
    let mut text = String::from("metric,mean,std\n");
    for (name, mean, std) in [
        ("accuracy", outcome.mean.accuracy, outcome.std.accuracy),
        ("macro_f1", outcome.mean.macro_f1, outcome.std.macro_f1),
        ("micro_f1", outcome.mean.micro_f1, outcome.std.micro_f1),
    ] {
        text.push_str(&format!("{name},{mean:.6},{std:.6}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DenoiseOutcome {
    pub clean: ExperimentOutcome,
    pub noisy: ExperimentOutcome,
}

/// Clean-versus-noisy comparison: runs the experiment with the noise
/// section removed, then as configured, and writes `denoise.csv`.
pub fn run_denoise_study(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<DenoiseOutcome> {
    if cfg.noise.is_none() {
        return Err(Error::config("denoise study needs a [noise] section"));
    }
    let ds = load_dataset(&base_dir.join(&cfg.dataset.manifest))?;

    let mut clean_cfg = cfg.clone();
    clean_cfg.noise = None;
    let clean = run_experiment_on(&clean_cfg, &ds, &out_dir.join("clean"))?;
    let noisy = run_experiment_on(cfg, &ds, &out_dir.join("noisy"))?;

    let mut text = String::from("setting,accuracy_mean,accuracy_std,drop_from_clean\n");
    text.push_str(&format!(
        "clean,{:.6},{:.6},0.000000\n",
        clean.mean.accuracy, clean.std.accuracy
    ));
    text.push_str(&format!(
        "noisy,{:.6},{:.6},{:.6}\n",
        noisy.mean.accuracy,
        noisy.std.accuracy,
        clean.mean.accuracy - noisy.mean.accuracy
    ));
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("denoise.csv"), text)?;
    Ok(DenoiseOutcome { clean, noisy })
}

/// Accuracy as a function of the modulation parameter; one experiment per
/// value, rows in `sweep.csv`.
pub fn run_alpha_sweep(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<(f64, f64, f64)>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("alpha sweep needs a [sweep] section"))?;
    let ds = load_dataset(&base_dir.join(&cfg.dataset.manifest))?;

    let mut rows = Vec::new();
    for (idx, &alpha) in sweep.values.iter().enumerate() {
        let mut one = cfg.clone();
        one.modulation.alpha = Some(alpha);
        one.validate()?;
        let outcome = run_experiment_on(&one, &ds, &out_dir.join(format!("alpha_{idx}")))?;
        rows.push((alpha, outcome.mean.accuracy, outcome.std.accuracy));
    }

    let mut text = String::from("alpha,accuracy_mean,accuracy_std\n");
    for (alpha, mean, std) in &rows {
        text.push_str(&format!("{alpha},{mean:.6},{std:.6}\n"));
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("sweep.csv"), text)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy)]
pub struct DegreeRow {
    pub degree: usize,
    /// Max deviation of the summed squared fitted bands from one, over a
    /// 1001-point grid.
    pub grid_identity_error: f64,
    /// Median round-trip relative L2 error over seeded random signals.
    pub roundtrip_median: f64,
}

/// Approximation quality as a function of Chebyshev degree, on the
/// dataset's (first) graph; rows in `sweep.csv`.
pub fn run_degree_sweep(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<DegreeRow>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("degree sweep needs a [sweep] section"))?;
    let ds = load_dataset(&base_dir.join(&cfg.dataset.manifest))?;
    let family = cfg.family()?;

    let mut rows = Vec::new();
    for &value in &sweep.values {
        let degree = value as usize;
        if degree < 1 {
            return Err(Error::config("degrees must be positive integers"));
        }
        let plan = FastTransformPlan::new(
            crate::graph::NormalizedLaplacian::new(ds.graphs()[0]),
            family.clone(),
            cfg.framelet.levels,
            cfg.framelet.dilation,
            degree,
            crate::cheb::CutoffMode::None,
        )?;
        rows.push(DegreeRow {
            degree,
            grid_identity_error: partition_grid_error(&plan, 1001),
            roundtrip_median: roundtrip_median(&plan, 20, cfg.train.seed),
        });
    }

    let mut text = String::from("degree,grid_identity_error,roundtrip_median_rel_error\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{:.9e},{:.9e}\n",
            r.degree, r.grid_identity_error, r.roundtrip_median
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("sweep.csv"), text)?;
    Ok(rows)
}

/// Scalar oracle for the fitted bands: max over a uniform grid of
/// `|sum_k p_k(xi)^2 - 1|`.
pub fn partition_grid_error(plan: &FastTransformPlan, grid: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..grid {
        let xi = std::f64::consts::PI * i as f64 / (grid - 1) as f64;
        let total: f64 = (0..plan.filter().num_bands())
            .map(|k| plan.filter().eval_band(k, xi).powi(2))
            .sum();
        worst = worst.max((total - 1.0).abs());
    }
    worst
}

/// Median round-trip relative error of the fast pipeline over seeded
/// random signals.
pub fn roundtrip_median(plan: &FastTransformPlan, trials: usize, seed: u64) -> f64 {
    let n = plan.num_nodes();
    let stream = Stream::new(seed, "degree-sweep-signal");
    let mut errors: Vec<f64> = (0..trials)
        .map(|t| {
            let x = Array2::from_shape_fn((n, 1), |(i, _)| stream.normal(&[t as u64, i as u64]));
            let c = fast_decompose(plan, &x).expect("shapes match");
            let back = fast_reconstruct(plan, &c).expect("shapes match");
            let num = (&back - &x).iter().map(|v| v * v).sum::<f64>().sqrt();
            let den = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            num / den
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    let mid = errors.len() / 2;
    if errors.len() % 2 == 1 {
        errors[mid]
    } else {
        0.5 * (errors[mid - 1] + errors[mid])
    }
}

/// Accuracy of a trained model on an arbitrary mask, for `eval`-style
/// entry points.
pub fn model_accuracy(
    model: &TrainedModel,
    plans: &[FastTransformPlan],
    features: &Array2<f64>,
    labels: &[usize],
    mask: &[usize],
) -> Result<f64> {
    let logits = match model {
        TrainedModel::Homogeneous(net) => forward(net, &plans[0], features, None)?,
        TrainedModel::Heterogeneous(hm) => hetero_forward(hm, plans, features, None)?,
    };
    Ok(evaluate_accuracy(&logits, labels, mask))
}

/// Full metrics of a trained model on a mask.
pub fn model_metrics(
    model: &TrainedModel,
    plans: &[FastTransformPlan],
    features: &Array2<f64>,
    labels: &[usize],
    mask: &[usize],
) -> Result<Metrics> {
    let logits = match model {
        TrainedModel::Homogeneous(net) => forward(net, &plans[0], features, None)?,
        TrainedModel::Heterogeneous(hm) => hetero_forward(hm, plans, features, None)?,
    };
    compute_metrics(&predict(&logits), labels, mask)
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
