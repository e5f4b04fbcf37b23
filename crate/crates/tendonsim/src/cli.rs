//! Command-line interface: a thin shell where each subcommand is one library
//! call plus file plumbing, so scripted runs and library callers see the same
//! behavior.
//!
//! Environment overrides: `TENDONSIM_OUT_DIR` replaces the default `out`
//! directory, `TENDONSIM_THREADS` caps the worker pool. Everything else comes
//! from the config file and flags, and all randomness is seeded there, so a
//! rerun with the same inputs writes byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use crate::batch;
use crate::evaluation::{
    ablate, compare_channels, forward_surface, inverse_rmse, EvalOptions, WorkspaceBounds,
};
use crate::geometry::JointPose;
use crate::io::{load_config, read_dataset, write_dataset, ConfigFile, Dataset, DatasetRow};
use crate::mapping::{
    load_model, rmse_columns, save_model, train, Direction, TrainConfig, TrainedModel,
};
use crate::motion::protocol_suite;
use crate::sensor::{emulate_sequence, neutral_reference, tendon_index};

/// Simulate a four-tendon shoulder sensing rig: generate calibration data,
/// train angle maps, and evaluate them.
#[derive(Debug, Parser)]
#[command(name = "tendonsim", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    /// Sensor deltas to joint angles.
    Inv,
    /// Joint angles to sensor deltas.
    Fwd,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Inv => Direction::Inverse,
            DirectionArg::Fwd => Direction::Forward,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the calibration protocol and write one CSV per movement plus a
    /// combined dataset.
    Generate {
        /// TOML run configuration; defaults are built in.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default `out`, or TENDONSIM_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a map on a dataset and save it as a binary model file.
    Train {
        /// Input dataset CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "inv")]
        direction: DirectionArg,
        /// Comma-separated sensor channels, e.g. `F,SF,R`.
        #[arg(long, default_value = "F,SF,SR,R")]
        sensors: String,
        /// TOML run configuration supplying the [train] section.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model file path (default `<out>/model_<direction>.bin`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a model's error against a labeled dataset.
    Eval {
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Dataset CSV with ground-truth poses.
        #[arg(long)]
        data: PathBuf,
        /// Weight azimuth errors by sin(elevation).
        #[arg(long)]
        weighted_azimuth: bool,
    },
    /// Train every sensor subset of size two or more and rank them.
    Ablate {
        /// Input dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Report CSV path (default `<out>/ablation.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// TOML run configuration supplying the [train] section.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sample the four delta surfaces over the workspace grid.
    Fwdmap {
        /// TOML run configuration; defaults are built in.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Grid nodes per axis.
        #[arg(long, default_value_t = 46)]
        grid: usize,
        /// Grid CSV path (default `<out>/fwdmap.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drive flexion cycles through the emulated channels and report each
    /// channel's hysteresis loop.
    Hysteresis {
        /// TOML run configuration supplying the [sensor] section.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report CSV path (default `<out>/hysteresis.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flexion cycles driven by the `hysteresis` subcommand.
const HYSTERESIS_CYCLES: usize = 3;

fn default_out_dir() -> PathBuf {
    std::env::var_os("TENDONSIM_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn resolve_out_file(out: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
    let path = out.unwrap_or_else(|| default_out_dir().join(default_name));
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(path)
}

fn load_config_or_default(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => Ok(load_config(p)?),
        None => Ok(ConfigFile::default()),
    }
}

fn parse_sensor_list(s: &str) -> Result<(Vec<String>, Vec<usize>)> {
    let names: Vec<String> = s
        .split(',')
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect();
    if names.is_empty() {
        bail!("sensor list is empty");
    }
    let mut indices = Vec::with_capacity(names.len());
    for name in &names {
        indices.push(tendon_index(name).ok_or_else(|| anyhow!("unknown sensor channel {name:?}"))?);
    }
    Ok((names, indices))
}

fn sensor_indices(model: &TrainedModel) -> Result<Vec<usize>> {
    model
        .sensors
        .iter()
        .map(|name| {
            tendon_index(name).ok_or_else(|| anyhow!("model names unknown sensor channel {name:?}"))
        })
        .collect()
}

/// Executes one parsed command. Everything the binary does goes through here,
/// so tests can drive the same paths in process.
pub fn run(cli: Cli) -> Result<()> {
    let threads = std::env::var("TENDONSIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    batch::configure_threads(threads);

    match cli.command {
        Command::Generate { config, out } => generate(config.as_deref(), out),
        Command::Train {
            data,
            direction,
            sensors,
            config,
            out,
        } => train_command(&data, direction.into(), &sensors, config.as_deref(), out),
        Command::Eval {
            model,
            data,
            weighted_azimuth,
        } => eval_command(&model, &data, weighted_azimuth),
        Command::Ablate { data, out, config } => ablate_command(&data, out, config.as_deref()),
        Command::Fwdmap { config, grid, out } => fwdmap_command(config.as_deref(), grid, out),
        Command::Hysteresis { config, out } => hysteresis_command(config.as_deref(), out),
    }
}

fn generate(config: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config_or_default(config)?;
    let layout = cfg.layout()?;
    let neutral = neutral_reference(&layout, &JointPose::NEUTRAL)?;
    let dir = out.unwrap_or_else(default_out_dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let rows = protocol_suite(&cfg.protocol)?;
    let mut combined = Dataset::default();
    let mut frame_offset: u64 = 0;
    let mut time_offset: f64 = 0.0;
    for row in &rows {
        let poses: Vec<JointPose> = row.samples.iter().map(|s| s.pose).collect();
        let ideal = batch::delta_lengths(&layout, &neutral, &poses)?;
        let emulated = emulate_sequence(&cfg.sensor, &ideal);
        let dataset = Dataset {
            rows: row
                .samples
                .iter()
                .zip(&emulated)
                .map(|(s, frame)| DatasetRow {
                    frame: s.frame,
                    time_s: s.time_s,
                    theta_deg: s.pose.azimuth_deg,
                    phi_deg: s.pose.elevation_deg,
                    dl_mm: frame.as_array(),
                })
                .collect(),
        };
        let path = dir.join(format!("{}.csv", row.name));
        write_dataset(&path, &dataset)?;
        println!("wrote {} ({} frames)", path.display(), dataset.len());

        combined
            .rows
            .extend(dataset.rows.iter().map(|r| DatasetRow {
                frame: frame_offset + r.frame,
                time_s: time_offset + r.time_s,
                ..*r
            }));
        frame_offset += dataset.len() as u64;
        time_offset += dataset.len() as f64 / row.config.frame_rate_hz;
    }
    let combined_path = dir.join("combined.csv");
    write_dataset(&combined_path, &combined)?;
    println!(
        "wrote {} ({} frames)",
        combined_path.display(),
        combined.len()
    );
    Ok(())
}

fn train_command(
    data: &Path,
    direction: Direction,
    sensors: &str,
    config: Option<&Path>,
    out: Option<PathBuf>,
) -> Result<()> {
    let dataset = read_dataset(data)?;
    let (names, indices) = parse_sensor_list(sensors)?;
    let train_cfg = match config {
        Some(p) => load_config(p)?.train,
        None => match direction {
            Direction::Inverse => TrainConfig::default(),
            Direction::Forward => TrainConfig::forward_defaults(),
        },
    };

    let sensor_mat = dataset.sensor_matrix(&indices);
    let pose_mat = dataset.pose_matrix();
    let (x, y) = match direction {
        Direction::Inverse => (sensor_mat, pose_mat),
        Direction::Forward => (pose_mat, sensor_mat),
    };
    let outcome = train(&x, &y, direction, &names, &train_cfg)?;

    let default_name = match direction {
        Direction::Inverse => "model_inv.bin",
        Direction::Forward => "model_fwd.bin",
    };
    let path = resolve_out_file(out, default_name)?;
    save_model(&outcome.model, &path)?;

    let label = match direction {
        Direction::Inverse => "inverse",
        Direction::Forward => "forward",
    };
    println!(
        "trained {label} map on {} rows using sensors {}",
        dataset.len(),
        names.join(",")
    );
    println!("epochs run: {}", outcome.model.epochs_run);
    println!("best validation mse: {:.9}", outcome.model.best_val_mse);
    println!("saved {}", path.display());
    Ok(())
}

fn eval_command(model_path: &Path, data: &Path, weighted_azimuth: bool) -> Result<()> {
    let model = load_model(model_path)?;
    let dataset = read_dataset(data)?;
    let indices = sensor_indices(&model)?;
    let opts = EvalOptions {
        weight_azimuth_by_sin_elevation: weighted_azimuth,
    };
    match model.direction {
        Direction::Inverse => {
            let x = dataset.sensor_matrix(&indices);
            let y = dataset.pose_matrix();
            let (az, el) = inverse_rmse(&model, &x, &y, &opts)?;
            println!("azimuth RMSE: {az:.6} deg");
            println!("elevation RMSE: {el:.6} deg");
        }
        Direction::Forward => {
            let pred = model.predict(&dataset.pose_matrix())?;
            let truth = dataset.sensor_matrix(&indices);
            let rmse = rmse_columns(&pred, &truth);
            for (name, e) in model.sensors.iter().zip(rmse) {
                println!("{name} RMSE: {e:.6} mm");
            }
        }
    }
    Ok(())
}

fn ablate_command(data: &Path, out: Option<PathBuf>, config: Option<&Path>) -> Result<()> {
    let dataset = read_dataset(data)?;
    let train_cfg = match config {
        Some(p) => load_config(p)?.train,
        None => TrainConfig::ablation_defaults(),
    };
    let sensors = dataset.sensor_matrix(&[0, 1, 2, 3]);
    let poses = dataset.pose_matrix();
    let report = ablate(&sensors, &poses, &train_cfg, &EvalOptions::default())?;

    let path = resolve_out_file(out, "ablation.csv")?;
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "sensors",
        "rmse_azimuth_deg",
        "rmse_elevation_deg",
        "mean_rmse_deg",
        "epochs_run",
    ])?;
    for e in &report.entries {
        w.write_record([
            e.sensors.join("+"),
            e.rmse_azimuth_deg.to_string(),
            e.rmse_elevation_deg.to_string(),
            e.mean_rmse_deg.to_string(),
            e.epochs_run.to_string(),
        ])?;
        println!(
            "{}: azimuth {:.6} deg, elevation {:.6} deg, mean {:.6} deg",
            e.sensors.join("+"),
            e.rmse_azimuth_deg,
            e.rmse_elevation_deg,
            e.mean_rmse_deg
        );
    }
    w.flush()?;
    println!("best subset: {}", report.best_subset.join("+"));
    println!(
        "antagonist pair F+R is the weakest pair: {}",
        report.antagonist_pair_worst
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn fwdmap_command(config: Option<&Path>, grid: usize, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config_or_default(config)?;
    let layout = cfg.layout()?;
    let neutral = neutral_reference(&layout, &JointPose::NEUTRAL)?;
    let surface = forward_surface(&layout, &neutral, &WorkspaceBounds::default(), grid)?;

    let path = resolve_out_file(out, "fwdmap.csv")?;
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "theta_deg",
        "phi_deg",
        "dl_F_mm",
        "dl_SF_mm",
        "dl_SR_mm",
        "dl_R_mm",
    ])?;
    for p in &surface {
        let d = p.deltas.as_array();
        w.write_record([
            p.pose.azimuth_deg.to_string(),
            p.pose.elevation_deg.to_string(),
            d[0].to_string(),
            d[1].to_string(),
            d[2].to_string(),
            d[3].to_string(),
        ])?;
    }
    w.flush()?;
    println!("wrote {} ({} grid nodes)", path.display(), surface.len());
    Ok(())
}

fn hysteresis_command(config: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config_or_default(config)?;
    let layout = cfg.layout()?;
    let neutral = neutral_reference(&layout, &JointPose::NEUTRAL)?;
    let entries = compare_channels(&layout, &neutral, &cfg.sensor, HYSTERESIS_CYCLES)?;

    let path = resolve_out_file(out, "hysteresis.csv")?;
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "tendon",
        "loop_width_mm",
        "residual_offset_mm",
        "rms_gap_mm",
    ])?;
    for e in &entries {
        w.write_record([
            e.tendon.clone(),
            e.loop_width_mm.to_string(),
            e.residual_offset_mm.to_string(),
            e.rms_gap_mm.to_string(),
        ])?;
        println!(
            "{}: loop width {:.6} mm, residual {:.6} mm, rms gap {:.6} mm",
            e.tendon, e.loop_width_mm, e.residual_offset_mm, e.rms_gap_mm
        );
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}
