//! `qufg` command-line harness: build Laplacians, run the framelet
//! transform, train and evaluate models, and reproduce the denoising and
//! sweep studies from one TOML config.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use qufg::cheb::{fast_decompose, fast_reconstruct};
use qufg::config::ExperimentConfig;
use qufg::dataset::{load_dataset, DatasetGraph};
use qufg::experiment::{
    build_plans, model_metrics, run_alpha_sweep, run_degree_sweep, run_denoise_study,
    run_experiment_on, train_once, TrainedModel,
};
use qufg::graph::{metapath_adjacency, metapath_walk_counts, MetaPath, NormalizedLaplacian};
use qufg::io::{
    read_checkpoint, read_coefficients, read_hetero_checkpoint, write_checkpoint,
    write_coefficients, write_hetero_checkpoint,
};
use qufg::spectral::{build_transform_blocks, decompose_exact, eigendecompose, FrameletSpec};

#[derive(Parser)]
#[command(
    name = "qufg",
    about = "Quasi-framelet graph transforms and spectral graph convolution experiments",
    version
)]
struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for result files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the normalized Laplacian of the configured dataset's graph
    /// and write it as `laplacian.csv` triplets.
    Laplacian,
    /// Decompose the dataset's features into framelet coefficients and
    /// write a binary coefficient dump.
    Decompose {
        /// Use the dense eigendecomposition path instead of the Chebyshev
        /// recursion.
        #[arg(long)]
        exact: bool,
        /// Output file name inside the out directory.
        #[arg(long, default_value = "coefficients.qfc")]
        file: String,
    },
    /// Reconstruct a signal from a coefficient dump and report the
    /// round-trip error against the dataset's features.
    Reconstruct {
        /// Coefficient file written by `decompose`.
        #[arg(long, default_value = "coefficients.qfc")]
        file: String,
    },
    /// Train once on the configured dataset and save a checkpoint.
    Train,
    /// Evaluate a saved checkpoint on the dataset's test split.
    Eval {
        /// Checkpoint file written by `train`.
        #[arg(long, default_value = "model.qfm")]
        file: String,
    },
    /// Run the clean-versus-noisy comparison study.
    Denoise,
    /// Resolve a meta-path against the configured heterogeneous dataset
    /// and write the induced edge list.
    Metapath {
        /// Dash-joined type names, e.g. A-P-A.
        path: String,
        /// Write walk counts per node pair instead of 0/1 edges.
        #[arg(long)]
        weighted: bool,
    },
    /// Run the configured alpha or degree sweep.
    Sweep,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (cfg, base) = load_config(&cli)?;
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;

    match &cli.command {
        Command::Laplacian => cmd_laplacian(&cfg, &base, &cli.out),
        Command::Decompose { exact, file } => cmd_decompose(&cfg, &base, &cli.out, *exact, file),
        Command::Reconstruct { file } => cmd_reconstruct(&cfg, &base, &cli.out, file),
        Command::Train => cmd_train(&cfg, &base, &cli.out),
        Command::Eval { file } => cmd_eval(&cfg, &base, &cli.out, file),
        Command::Denoise => cmd_denoise(&cfg, &base, &cli.out),
        Command::Metapath { path, weighted } => {
            cmd_metapath(&cfg, &base, &cli.out, path, *weighted)
        }
        Command::Sweep => cmd_sweep(&cfg, &base, &cli.out),
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let path = cli.config.as_ref().context("--config <path> is required")?;
    let (mut cfg, base) = ExperimentConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    Ok((cfg, base))
}

fn load_ds(cfg: &ExperimentConfig, base: &Path) -> anyhow::Result<qufg::dataset::NodeDataset> {
    Ok(load_dataset(&base.join(&cfg.dataset.manifest))?)
}

fn cmd_laplacian(cfg: &ExperimentConfig, base: &Path, out: &Path) -> anyhow::Result<()> {
    let ds = load_ds(cfg, base)?;
    let graph = ds.graphs()[0];
    let lap = NormalizedLaplacian::new(graph);
    let mut text = String::from("row,col,value\n");
    for (i, j, v) in lap.matrix().iter() {
        text.push_str(&format!("{i},{j},{v:.12}\n"));
    }
    let path = out.join("laplacian.csv");
    std::fs::write(&path, text)?;
    println!(
        "laplacian: {} nodes, {} stored entries, lambda_max {:.6} -> {}",
        graph.num_nodes(),
        lap.matrix().nnz(),
        lap.lambda_max(),
        path.display()
    );
    Ok(())
}

fn cmd_decompose(
    cfg: &ExperimentConfig,
    base: &Path,
    out: &Path,
    exact: bool,
    file: &str,
) -> anyhow::Result<()> {
    let ds = load_ds(cfg, base)?;
    let coeffs = if exact {
        let lap = NormalizedLaplacian::new(ds.graphs()[0]);
        let es = eigendecompose(&lap)?;
        let spec = FrameletSpec::new(
            cfg.family()?,
            cfg.framelet.levels,
            cfg.framelet.dilation,
            lap.lambda_max(),
        )?;
        let blocks = build_transform_blocks(&es, &spec)?;
        decompose_exact(&blocks, &spec, &ds.features)?
    } else {
        let plans = build_plans(cfg, &ds)?;
        fast_decompose(&plans[0], &ds.features)?
    };
    let path = out.join(file);
    write_coefficients(&path, &coeffs)?;
    println!(
        "decomposed {} x {} features into {} blocks -> {}",
        ds.num_nodes(),
        ds.num_features(),
        coeffs.blocks.len(),
        path.display()
    );
    Ok(())
}

fn cmd_reconstruct(
    cfg: &ExperimentConfig,
    base: &Path,
    out: &Path,
    file: &str,
) -> anyhow::Result<()> {
    let ds = load_ds(cfg, base)?;
    let coeffs = read_coefficients(&out.join(file))?;
    let plans = build_plans(cfg, &ds)?;
    let back = fast_reconstruct(&plans[0], &coeffs)?;

    let mut text = String::new();
    for i in 0..back.nrows() {
        let row: Vec<String> = (0..back.ncols())
            .map(|j| format!("{:.12}", back[[i, j]]))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = out.join("reconstructed.csv");
    std::fs::write(&path, text)?;

    if back.dim() == ds.features.dim() {
        let num = (&back - &ds.features)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let den = ds.features.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!(
            "round-trip relative L2 error vs features: {:.3e}",
            num / den.max(1e-300)
        );
    }
    println!("reconstructed signal -> {}", path.display());
    Ok(())
}

fn cmd_train(cfg: &ExperimentConfig, base: &Path, out: &Path) -> anyhow::Result<()> {
    let ds = load_ds(cfg, base)?;
    let outcome = run_experiment_on(cfg, &ds, out)?;
    println!(
        "{} runs: accuracy {:.4} +- {:.4}, macro-F1 {:.4}, micro-F1 {:.4}",
        outcome.runs.len(),
        outcome.mean.accuracy,
        outcome.std.accuracy,
        outcome.mean.macro_f1,
        outcome.mean.micro_f1
    );

    // save a checkpoint of the first run's model for `eval`
    let plans = build_plans(cfg, &ds)?;
    let features = ds.features.clone();
    let (model, _) = train_once(cfg, &ds, &plans, &features, cfg.train.seed)?;
    match &model {
        TrainedModel::Homogeneous(net) => {
            let path = out.join("model.qfm");
            write_checkpoint(&path, net)?;
            println!("checkpoint -> {}", path.display());
        }
        TrainedModel::Heterogeneous(hm) => {
            let path = out.join("model.qfh");
            write_hetero_checkpoint(&path, hm)?;
            println!("checkpoint -> {}", path.display());
        }
    }
    println!("results -> {}", out.join("results.csv").display());
    Ok(())
}

fn cmd_eval(cfg: &ExperimentConfig, base: &Path, out: &Path, file: &str) -> anyhow::Result<()> {
    let ds = load_ds(cfg, base)?;
    let plans = build_plans(cfg, &ds)?;
    let path = out.join(file);
    let model = if path.extension().and_then(|e| e.to_str()) == Some("qfh") {
        TrainedModel::Heterogeneous(read_hetero_checkpoint(&path)?)
    } else {
        TrainedModel::Homogeneous(read_checkpoint(&path)?)
    };
    let metrics = model_metrics(&model, &plans, &ds.features, &ds.labels, &ds.test_mask)?;
    let mut text = String::from("metric,value\n");
    text.push_str(&format!("accuracy,{:.6}\n", metrics.accuracy));
    text.push_str(&format!("macro_f1,{:.6}\n", metrics.macro_f1));
    text.push_str(&format!("micro_f1,{:.6}\n", metrics.micro_f1));
    std::fs::write(out.join("eval.csv"), text)?;
    println!(
        "test accuracy {:.4}, macro-F1 {:.4}, micro-F1 {:.4}",
        metrics.accuracy, metrics.macro_f1, metrics.micro_f1
    );
    Ok(())
}

fn cmd_denoise(cfg: &ExperimentConfig, base: &Path, out: &Path) -> anyhow::Result<()> {
    let outcome = run_denoise_study(cfg, base, out)?;
    println!(
        "clean accuracy {:.4} +- {:.4}; noisy accuracy {:.4} +- {:.4}; drop {:.4}",
        outcome.clean.mean.accuracy,
        outcome.clean.std.accuracy,
        outcome.noisy.mean.accuracy,
        outcome.noisy.std.accuracy,
        outcome.clean.mean.accuracy - outcome.noisy.mean.accuracy
    );
    println!("comparison -> {}", out.join("denoise.csv").display());
    Ok(())
}

fn cmd_metapath(
    cfg: &ExperimentConfig,
    base: &Path,
    out: &Path,
    path_text: &str,
    weighted: bool,
) -> anyhow::Result<()> {
    let ds = load_ds(cfg, base)?;
    let hetero = match &ds.graph {
        DatasetGraph::Heterogeneous { hetero, .. } => hetero,
        DatasetGraph::Homogeneous(_) => {
            bail!("the configured dataset is homogeneous; meta-paths need a hetero schema")
        }
    };
    let metapath = MetaPath::parse(path_text)?;
    let stem = path_text.replace('-', "_");
    if weighted {
        let counts = metapath_walk_counts(hetero, &metapath)?;
        let mut text = String::from("src\tdst\twalks\n");
        for (i, j, w) in &counts {
            text.push_str(&format!("{i}\t{j}\t{w}\n"));
        }
        let file = out.join(format!("metapath_{stem}_counts.tsv"));
        std::fs::write(&file, text)?;
        println!(
            "meta-path {} has {} reachable pairs (walk counts) -> {}",
            metapath,
            counts.len(),
            file.display()
        );
        return Ok(());
    }
    let graph = metapath_adjacency(hetero, &metapath)?;
    let mut text = String::new();
    for &(i, j) in graph.edges() {
        text.push_str(&format!("{i}\t{j}\n"));
    }
    let file = out.join(format!("metapath_{stem}.tsv"));
    std::fs::write(&file, text)?;
    println!(
        "meta-path {} induces {} edges over {} nodes -> {}",
        metapath,
        graph.num_edges(),
        graph.num_nodes(),
        file.display()
    );
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig, base: &Path, out: &Path) -> anyhow::Result<()> {
    let sweep = cfg
        .sweep
        .as_ref()
        .context("sweep needs a [sweep] section in the config")?;
    match sweep.kind.as_str() {
        "alpha" => {
            let rows = run_alpha_sweep(cfg, base, out)?;
            for (alpha, mean, std) in &rows {
                println!("alpha {alpha}: accuracy {mean:.4} +- {std:.4}");
            }
        }
        "degree" => {
            let rows = run_degree_sweep(cfg, base, out)?;
            for r in &rows {
                println!(
                    "degree {}: grid identity error {:.3e}, round-trip median {:.3e}",
                    r.degree, r.grid_identity_error, r.roundtrip_median
                );
            }
        }
        other => bail!("unknown sweep kind `{other}`"),
    }
    println!("sweep table -> {}", out.join("sweep.csv").display());
    Ok(())
}
