use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::json;

use rangeforge::exec::{self, Execution};
use rangeforge::io::{
    read_cloud, read_labels, select_subsets, write_cloud, write_labels, DatasetLayout, IoError, ObjectiveConfig,
    RunConfig,
};
use rangeforge::mcmc::{
    write_json_atomic, Chain, ExternalObjective, McmcError, Objective, QuadraticSurrogate, WorkspaceLock,
};
use rangeforge::metrics::{density_stats, per_range_ap, Box3D, FrameBoxes};
use rangeforge::resampling::{ResampleMethod, ResampleParams, ResamplePipeline, ResampleReport};
use rangeforge::synth::{simulate_scan, Scene};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

/// Marks an error as a configuration problem (exit code 2).
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "rangeforge", version, about = "Range-ring LiDAR resampling and evaluation")]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (JSON); omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rs,
    Dgr,
    Passthrough,
}

#[derive(Subcommand)]
enum Command {
    /// Write a resampled copy of a dataset plus provenance.json.
    Resample {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Overrides `resample.method` from the config.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Comma-separated per-ring values, overriding the config.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Mean number of points inside labelled boxes per class and ring.
    Stats {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run (or resume) the parameter search in a workspace.
    Optimize {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        workspace: PathBuf,
        /// Source dataset, required by an external objective.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Continue from `<workspace>/chain.json`.
        #[arg(long)]
        resume: bool,
        /// Stop once the chain has run this many iterations in total.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Per-range AP of detections against ground truth.
    Evaluate {
        #[command(flatten)]
        config: ConfigArg,
        /// Dataset whose manifest and labels are the ground truth.
        #[arg(long)]
        ground_truth: PathBuf,
        /// Directory of `<frame_id>.json` detection files.
        #[arg(long)]
        detections: PathBuf,
        /// Class-mean AP vector.
        #[arg(long)]
        output: PathBuf,
        /// Full per-class report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a synthetic dataset from a scene file (one scene or an array).
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write train/val manifests selected by stride.
    Subset {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_val: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(IoError::Config { .. }) = cause.downcast_ref::<IoError>() {
            return EXIT_CONFIG;
        }
        if let Some(McmcError::InvalidConfig(_) | McmcError::CheckpointMismatch(_) | McmcError::WorkspaceLocked(_)) =
            cause.downcast_ref::<McmcError>()
        {
            return EXIT_CONFIG;
        }
    }
    EXIT_DATA
}

fn run(cli: Cli) -> Result<()> {
    let execution = configure_threads(cli.sequential)?;
    match cli.command {
        Command::Resample {
            config,
            input,
            output,
            method,
            values,
            seed,
        } => resample(&load_config(&config)?, &input, &output, method, values, seed, execution),
        Command::Stats {
            config,
            dataset,
            output,
            csv,
        } => stats(&load_config(&config)?, &dataset, &output, csv.as_deref(), execution),
        Command::Optimize {
            config,
            workspace,
            dataset,
            resume,
            stop_after,
        } => optimize(
            &load_config(&config)?,
            &workspace,
            dataset.as_deref(),
            resume,
            stop_after,
            execution,
        ),
        Command::Evaluate {
            config,
            ground_truth,
            detections,
            output,
            report,
        } => evaluate(
            &load_config(&config)?,
            &ground_truth,
            &detections,
            &output,
            report.as_deref(),
            execution,
        ),
        Command::Simulate { config, scene, output } => simulate(&load_config(&config)?, &scene, &output, execution),
        Command::Subset {
            config,
            dataset,
            output,
            n_train,
            n_val,
        } => subset(&load_config(&config)?, &dataset, &output, n_train, n_val),
    }
}

/// Applies `RANGEFORGE_THREADS` to the global pool.
fn configure_threads(sequential: bool) -> Result<Execution> {
    if sequential || !cfg!(feature = "parallel") {
        return Ok(Execution::Sequential);
    }
    if let Ok(value) = std::env::var("RANGEFORGE_THREADS") {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| config_error(format!("RANGEFORGE_THREADS={value:?} is not a positive integer")))?;
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
        if n == 1 {
            return Ok(Execution::Sequential);
        }
    }
    Ok(Execution::Parallel)
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig> {
    match &arg.config {
        Some(path) => Ok(RunConfig::load(path)?),
        None => Ok(RunConfig::default()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_frame_labels(layout: &DatasetLayout, id: &str) -> Result<Vec<Box3D>> {
    if !layout.has_labels(id) {
        return Ok(Vec::new());
    }
    read_labels(&layout.label_path(id)).with_context(|| format!("frame {id}"))
}

fn resample(
    config: &RunConfig,
    input: &Path,
    output: &Path,
    method: Option<MethodArg>,
    values: Option<Vec<f64>>,
    seed: Option<u64>,
    execution: Execution,
) -> Result<()> {
    let rings = config.ranges.ring_count();
    let mut params = config
        .resample
        .clone()
        .unwrap_or_else(|| ResampleParams::passthrough(rings));
    if let Some(m) = method {
        params.method = match m {
            MethodArg::Rs => ResampleMethod::Rs,
            MethodArg::Dgr => ResampleMethod::Dgr,
            MethodArg::Passthrough => ResampleMethod::Passthrough,
        };
    }
    if let Some(v) = values {
        params.values = v;
    }
    if let Some(s) = seed {
        params.seed = s;
    }
    let pipeline = ResamplePipeline {
        ranges: config.ranges.clone(),
        sensor: config.sensor.clone(),
        dgr: config.dgr,
        execution,
    };
    pipeline
        .validate(&params)
        .map_err(|e| config_error(format!("resample parameters: {e}")))?;

    let src = DatasetLayout::new(input);
    let ids = src.frames()?;
    if output.exists() && fs::read_dir(output)?.next().is_some() {
        return Err(config_error(format!("output {} is not empty", output.display())));
    }
    let dst = DatasetLayout::create(output)?;
    fs::copy(src.manifest_path(), dst.manifest_path())
        .with_context(|| format!("copying {}", src.manifest_path().display()))?;

    let started = Instant::now();
    let reports = exec::map_slice(execution, &ids, |id| -> Result<ResampleReport> {
        let path = src.cloud_path(id);
        let cloud = read_cloud(&path).with_context(|| format!("frame {id}"))?;
        let (out, report) = pipeline
            .run(&cloud, &params)
            .with_context(|| format!("frame {id} ({})", path.display()))?;
        write_cloud(&out, &dst.cloud_path(id)).with_context(|| format!("frame {id}"))?;
        if src.has_labels(id) {
            fs::copy(src.label_path(id), dst.label_path(id)).with_context(|| format!("frame {id}: copying labels"))?;
        }
        Ok(report)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let provenance = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "input": input,
        "params": params,
        "ranges": config.ranges,
        "sensor": config.sensor,
        "dgr": config.dgr,
        "seconds": started.elapsed().as_secs_f64(),
        "frames": reports,
    });
    write_json(&output.join("provenance.json"), &provenance)?;
    info!("resampled {} frames into {}", ids.len(), output.display());
    Ok(())
}

fn stats(config: &RunConfig, dataset: &Path, output: &Path, csv: Option<&Path>, execution: Execution) -> Result<()> {
    let layout = DatasetLayout::new(dataset);
    let ids: Vec<String> = layout
        .frames()?
        .into_iter()
        .filter(|id| layout.has_labels(id))
        .collect();
    let frames = exec::map_slice(execution, &ids, |id| -> Result<_> {
        let cloud = read_cloud(&layout.cloud_path(id)).with_context(|| format!("frame {id}"))?;
        let boxes = read_frame_labels(&layout, id)?;
        Ok((cloud, boxes))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let stats = density_stats(&frames, &config.ranges, execution);
    write_json(output, &stats)?;
    if let Some(path) = csv {
        fs::write(path, stats.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn optimize(
    config: &RunConfig,
    workspace: &Path,
    dataset: Option<&Path>,
    resume: bool,
    stop_after: Option<usize>,
    execution: Execution,
) -> Result<()> {
    let rings = config.ranges.ring_count();
    let chain_config = config.mcmc.chain_config(&config.sensor);
    let mut objective: Box<dyn Objective> = match &config.objective {
        None => return Err(config_error("optimize needs an `objective` in the config")),
        Some(ObjectiveConfig::Surrogate { target }) => Box::new(QuadraticSurrogate::new(target.clone())),
        Some(ObjectiveConfig::External(spec)) => {
            let dataset = dataset.ok_or_else(|| config_error("an external objective needs --dataset"))?;
            let layout = DatasetLayout::new(dataset);
            let ids = layout.frames()?;
            let (train, val) = select_subsets(&ids, config.subsets.n_train, config.subsets.n_val)?;
            Box::new(ExternalObjective {
                spec: spec.clone(),
                workspace: workspace.to_path_buf(),
                pipeline: ResamplePipeline {
                    ranges: config.ranges.clone(),
                    sensor: config.sensor.clone(),
                    dgr: config.dgr,
                    execution,
                },
                dataset: layout,
                train,
                val,
            })
        }
    };

    fs::create_dir_all(workspace).with_context(|| format!("creating {}", workspace.display()))?;
    let _lock = WorkspaceLock::acquire(workspace)?;
    let checkpoint = workspace.join("chain.json");
    let mut chain = if resume {
        let chain = Chain::resume(&checkpoint, chain_config)?;
        chain.check_objective(objective.as_ref())?;
        info!("resuming at t = {}", chain.state().t);
        chain
    } else {
        if checkpoint.exists() {
            return Err(config_error(format!(
                "{} exists; pass --resume to continue it",
                checkpoint.display()
            )));
        }
        Chain::new(config.mcmc.init_params(rings), chain_config, objective.as_ref())?.with_checkpoint(&checkpoint)
    };

    chain.run(objective.as_mut(), stop_after)?;
    let state = chain.state();
    if chain.is_done() {
        let best = json!({
            "t": state.t,
            "theta_best": state.theta_best,
            "p_best": state.p_best,
            "accept_count": state.accept_count,
        });
        write_json_atomic(&workspace.join("best.json"), &best)?;
        println!(
            "best θ = {:?} (overall AP {:.4}) after {} iterations, {} accepted",
            state.theta_best.values, state.p_best.overall, state.t, state.accept_count
        );
    } else {
        println!("stopped at t = {} of {}", state.t, state.config.n_iter);
    }
    Ok(())
}

fn evaluate(
    config: &RunConfig,
    ground_truth: &Path,
    detections: &Path,
    output: &Path,
    report: Option<&Path>,
    execution: Execution,
) -> Result<()> {
    let layout = DatasetLayout::new(ground_truth);
    let ids = layout.read_manifest()?;
    let frames = exec::map_slice(execution, &ids, |id| -> Result<FrameBoxes> {
        let det_path = detections.join(format!("{id}.json"));
        let dets = if det_path.is_file() {
            read_labels(&det_path).with_context(|| format!("frame {id}"))?
        } else {
            Vec::new()
        };
        Ok(FrameBoxes {
            frame_id: id.clone(),
            ground_truth: read_frame_labels(&layout, id)?,
            detections: dets,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let result = per_range_ap(&frames, &config.eval, execution)?;
    write_json(output, &result.mean)?;
    if let Some(path) = report {
        write_json(path, &result)?;
    }
    println!("overall AP {:.4}", result.mean.overall);
    Ok(())
}

fn simulate(config: &RunConfig, scene_path: &Path, output: &Path, execution: Execution) -> Result<()> {
    let text = fs::read_to_string(scene_path).with_context(|| format!("reading {}", scene_path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", scene_path.display())))?;
    let scenes: Vec<Scene> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|s| vec![s])
    }
    .map_err(|e| config_error(format!("{}: {e}", scene_path.display())))?;
    let mut seen = std::collections::HashSet::new();
    for (i, scene) in scenes.iter().enumerate() {
        scene
            .validate()
            .map_err(|e| config_error(format!("{} scene {i}: {e}", scene_path.display())))?;
        if !seen.insert(scene.frame_id.as_str()) {
            return Err(config_error(format!("duplicate frame_id {:?}", scene.frame_id)));
        }
    }
    let layout = DatasetLayout::create(output)?;
    for scene in &scenes {
        let (cloud, boxes) = simulate_scan(scene, &config.sensor, execution);
        write_cloud(&cloud, &layout.cloud_path(&scene.frame_id))?;
        write_labels(&boxes, &layout.label_path(&scene.frame_id))?;
    }
    let ids: Vec<String> = scenes.iter().map(|s| s.frame_id.clone()).collect();
    layout.write_manifest(&ids)?;
    info!("simulated {} frames into {}", ids.len(), output.display());
    Ok(())
}

fn subset(
    config: &RunConfig,
    dataset: &Path,
    output: &Path,
    n_train: Option<usize>,
    n_val: Option<usize>,
) -> Result<()> {
    let ids = DatasetLayout::new(dataset).frames()?;
    let n_train = n_train.unwrap_or(config.subsets.n_train);
    let n_val = n_val.unwrap_or(config.subsets.n_val);
    let (train, val) =
        select_subsets(&ids, n_train, n_val).with_context(|| format!("dataset {}", dataset.display()))?;
    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    for (name, ids) in [("train.txt", &train), ("val.txt", &val)] {
        let mut text = ids.join("\n");
        if !ids.is_empty() {
            text.push('\n');
        }
        let path = output.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
