//! The four commands: synthesize a scene, reconstruct a field from
//! measurements, run the acquisition loop, and evaluate methods over Monte
//! Carlo repetitions.
//!
//! Every command is a pure function of its configuration, input files, and
//! seed: independent seed streams are derived per purpose (truth labels,
//! loss values, link choice, measurement noise, solver initialization,
//! acquisition, evaluation pairs), so rerunning a command with the same
//! inputs reproduces its outputs byte for byte. Each output directory gets a
//! `meta.json` sidecar recording the command, grid dimensions, seed, and the
//! configuration fingerprint.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use radiotomo_core::baselines::{ridge_ls, tv_ls};
use radiotomo_core::evaluation::{labeling_error, nmse, build_gain_map, run_mc};
use radiotomo_core::geometry::Scene;
use radiotomo_core::io::{
    read_measurement_log, write_elbo_trace_csv, write_field_csv, write_gain_map_csv,
    write_label_csv, write_measurement_log, write_report_csv, write_report_json,
    write_theta_json, ReportRow, ReportSummary, TrajectoryRow, write_trajectory_csv,
};
use radiotomo_core::seeds::derive_seed;
use radiotomo_core::selection::{
    run_adaptive, AdaptiveSchedule, AdaptiveStatus, ReplaySource, SelectionMode, SyntheticSource,
};
use radiotomo_core::synthesis::{
    sample_potts, sample_slf, synthesize_measurements, uniform_links, LabelField, LossField,
    MeasurementSet,
};
use radiotomo_core::vb::{load_checkpoint, resume_vb, run_vb, save_checkpoint, VbRun};

use crate::config::{ConfigError, LoadedConfig, ModeConfig, SourceConfig};

/// Everything a command can fail with, in exit-code order.
#[derive(Debug)]
pub enum CommandError {
    /// Exit 2: the configuration or command line is unusable.
    Config(String),
    /// Exit 3: a solver failed numerically.
    Numerical(String),
    /// Exit 4: a file could not be read, parsed, or written.
    Io(String),
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Config(m) => write!(f, "configuration error: {m}"),
            CommandError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CommandError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Numerical(_) => 3,
            CommandError::Io(_) => 4,
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e.0)
    }
}

/// Classifies a core error: solver failures are numerical, file and parse
/// problems are I/O, and everything else is a configuration the core
/// rejected.
impl From<radiotomo_core::Error> for CommandError {
    fn from(e: radiotomo_core::Error) -> Self {
        use radiotomo_core::Error as E;
        match e {
            E::NumericalGuard(_)
            | E::Divergence { .. }
            | E::SingularSystem(_)
            | E::CorruptState(_)
            | E::EmptyPool => CommandError::Numerical(e.to_string()),
            E::Io(_) | E::Parse { .. } => CommandError::Io(e.to_string()),
            _ => CommandError::Config(e.to_string()),
        }
    }
}

fn io_err<E: std::fmt::Display>(context: &str, e: E) -> CommandError {
    CommandError::Io(format!("{context}: {e}"))
}

type Result<T> = std::result::Result<T, CommandError>;

/// Seed streams, one per independent random purpose.
mod stream {
    pub const TRUTH_LABELS: u64 = 1;
    pub const TRUTH_FIELD: u64 = 2;
    pub const LINK_CHOICE: u64 = 3;
    pub const MEASUREMENT_NOISE: u64 = 4;
    pub const VB_INIT: u64 = 5;
    pub const SOURCE: u64 = 6;
    pub const SCHEDULE: u64 = 7;
    pub const FILE_SPLIT: u64 = 8;
    pub const MC: u64 = 9;
    pub const NMSE_PAIRS: u64 = 10;
}

/// The `meta.json` sidecar carried by every output directory.
#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    nx: usize,
    ny: usize,
    seed: u64,
    config_sha256: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    status: Option<String>,
}

impl<'a> Meta<'a> {
    fn new(command: &'a str, loaded: &'a LoadedConfig) -> Self {
        Meta {
            command,
            nx: loaded.config.scene.grid.nx,
            ny: loaded.config.scene.grid.ny,
            seed: loaded.config.seed,
            config_sha256: &loaded.sha256,
            method: None,
            converged: None,
            iterations: None,
            status: None,
        }
    }
}

/// Creates the output directory (and any missing parents).
fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(&format!("creating {}", dir.display()), e))
}

/// Opens a buffered writer for `name` inside the output directory.
fn file_writer(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    let path = dir.join(name);
    let f = fs::File::create(&path).map_err(|e| io_err(&format!("creating {}", path.display()), e))?;
    Ok(BufWriter::new(f))
}

fn write_meta(dir: &Path, meta: &Meta<'_>) -> Result<()> {
    let mut w = file_writer(dir, "meta.json")?;
    serde_json::to_writer_pretty(&mut w, meta)
        .map_err(|e| io_err("writing meta.json", e))?;
    writeln!(w).map_err(|e| io_err("writing meta.json", e))?;
    Ok(())
}

fn write_config_copy(dir: &Path, loaded: &LoadedConfig) -> Result<()> {
    fs::write(dir.join("config.json"), &loaded.canonical)
        .map_err(|e| io_err("writing config.json", e))
}

/// Draws the ground-truth labels and loss field from the config's truth
/// block, using the truth seed streams.
fn draw_truth(loaded: &LoadedConfig, scene: &Scene) -> Result<(LabelField, LossField)> {
    let config = &loaded.config;
    let truth = config.truth()?;
    let potts = config.potts()?;
    let sweeps = config.scene.truth.as_ref().expect("truth() checked").gibbs_sweeps;
    let labels = sample_potts(
        &scene.grid,
        &potts,
        sweeps,
        derive_seed(config.seed, stream::TRUTH_LABELS),
    );
    let field = sample_slf(&labels, &truth, derive_seed(config.seed, stream::TRUTH_FIELD))?;
    Ok((labels, field))
}

/// Synthesizes the initial measurement set from the truth field.
fn draw_initial_data(
    loaded: &LoadedConfig,
    scene: &Scene,
    field: &LossField,
) -> Result<MeasurementSet> {
    let config = &loaded.config;
    let truth = config.truth()?;
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(config.seed, stream::LINK_CHOICE));
    let links = uniform_links(scene.sensors.len(), config.scene.initial_links, &mut rng)?;
    Ok(synthesize_measurements(
        scene,
        field,
        &links,
        truth.noise_precision,
        derive_seed(config.seed, stream::MEASUREMENT_NOISE),
    )?)
}

/// Synthesizes a scene: geometry, ground truth, and an initial measurement
/// log, all written to the output directory.
pub fn cmd_simulate(loaded: &LoadedConfig, out: &Path) -> Result<()> {
    let scene = loaded.config.scene()?;
    let (labels, field) = draw_truth(loaded, &scene)?;
    let data = draw_initial_data(loaded, &scene, &field)?;

    create_out(out)?;
    fs::write(out.join("scene.json"), scene.to_json())
        .map_err(|e| io_err("writing scene.json", e))?;
    let (nx, ny) = (scene.grid.nx, scene.grid.ny);
    write_label_csv(&mut file_writer(out, "labels.csv")?, nx, ny, &labels.labels)?;
    write_field_csv(&mut file_writer(out, "field.csv")?, nx, ny, &field.values)?;
    write_measurement_log(&mut file_writer(out, "measurements.csv")?, &data)?;
    write_config_copy(out, loaded)?;
    write_meta(out, &Meta::new("simulate", loaded))?;
    Ok(())
}

/// Reads `scene.json` and `measurements.csv` from a data directory,
/// recomputing each logged link's weights on the scene.
fn read_data_dir(dir: &Path) -> Result<(Scene, MeasurementSet)> {
    let scene_path = dir.join("scene.json");
    let text = fs::read_to_string(&scene_path)
        .map_err(|e| io_err(&format!("reading {}", scene_path.display()), e))?;
    let scene = Scene::from_json(&text)?;
    let log_path = dir.join("measurements.csv");
    let f = fs::File::open(&log_path)
        .map_err(|e| io_err(&format!("reading {}", log_path.display()), e))?;
    let log = read_measurement_log(BufReader::new(f))?;
    let mut data = MeasurementSet::new(scene.grid.n_points());
    for (link, s) in log {
        let w = scene.link_weights(&link)?;
        data.append(link, w, s)?;
    }
    Ok((scene, data))
}

/// Which reconstruction a `reconstruct` invocation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Vb,
    Ridge,
    Tv,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Vb => "vb",
            Method::Ridge => "ridge",
            Method::Tv => "tv",
        }
    }
}

/// Checkpoint handling for the `vb` method.
pub struct CheckpointArgs {
    /// Write the final state here.
    pub save: Option<PathBuf>,
    /// Start from this saved state instead of a fresh initialization.
    pub resume: Option<PathBuf>,
}

fn run_vb_command(
    loaded: &LoadedConfig,
    scene: &Scene,
    data: &MeasurementSet,
    checkpoint: &CheckpointArgs,
) -> Result<VbRun> {
    let config = &loaded.config;
    let priors = config.priors()?;
    let potts = config.potts()?;
    let settings = config.vb_settings(derive_seed(config.seed, stream::VB_INIT));
    let run = match &checkpoint.resume {
        Some(path) => {
            let (state, trace) = load_checkpoint(path, data)?;
            resume_vb(data, &priors, &potts, &scene.grid, state, trace, &settings)?
        }
        None => run_vb(data, &priors, &potts, &scene.grid, &settings)?,
    };
    if let Some(path) = &checkpoint.save {
        save_checkpoint(path, &run.state, &run.elbo_trace)?;
    }
    Ok(run)
}

/// Renders the configured gain map from a reconstructed field, if any.
fn maybe_write_gain_map(
    loaded: &LoadedConfig,
    scene: &Scene,
    field: &[f64],
    out: &Path,
) -> Result<()> {
    if let Some((pathloss, receiver)) = loaded.config.gain_map()? {
        let map = build_gain_map(&scene.grid, scene.lambda, field, &pathloss, &receiver)?;
        write_gain_map_csv(&mut file_writer(out, "gain_map.csv")?, &map)?;
    }
    Ok(())
}

/// Reconstructs a loss field from a recorded data directory with the chosen
/// method and writes the estimate (plus posterior artifacts for `vb`).
pub fn cmd_reconstruct(
    loaded: &LoadedConfig,
    data_dir: &Path,
    method: Method,
    checkpoint: &CheckpointArgs,
    out: &Path,
) -> Result<()> {
    let (scene, data) = read_data_dir(data_dir)?;
    create_out(out)?;
    let (nx, ny) = (scene.grid.nx, scene.grid.ny);
    let mut meta = Meta::new("reconstruct", loaded);
    meta.method = Some(method.name());

    match method {
        Method::Vb => {
            let run = run_vb_command(loaded, &scene, &data, checkpoint)?;
            write_field_csv(
                &mut file_writer(out, "field.csv")?,
                nx,
                ny,
                &run.estimates.field.values,
            )?;
            write_label_csv(
                &mut file_writer(out, "labels.csv")?,
                nx,
                ny,
                &run.estimates.labels.labels,
            )?;
            write_theta_json(&mut file_writer(out, "theta.json")?, &run.estimates.theta)?;
            write_elbo_trace_csv(&mut file_writer(out, "elbo_trace.csv")?, &run.elbo_trace)?;
            maybe_write_gain_map(loaded, &scene, &run.estimates.field.values, out)?;
            meta.converged = Some(run.converged);
            meta.iterations = Some(run.iterations());
        }
        Method::Ridge => {
            let cfg = loaded.config.ridge(&scene.grid)?;
            let field = ridge_ls(&data, &cfg)?;
            write_field_csv(&mut file_writer(out, "field.csv")?, nx, ny, &field.values)?;
            maybe_write_gain_map(loaded, &scene, &field.values, out)?;
        }
        Method::Tv => {
            let cfg = loaded.config.tv();
            let solution = tv_ls(&data, &scene.grid, &cfg)?;
            write_field_csv(
                &mut file_writer(out, "field.csv")?,
                nx,
                ny,
                &solution.field.values,
            )?;
            maybe_write_gain_map(loaded, &scene, &solution.field.values, out)?;
            meta.converged = Some(solution.converged);
            meta.iterations = Some(solution.objectives.len().saturating_sub(1));
        }
    }
    write_config_copy(out, loaded)?;
    write_meta(out, &meta)?;
    Ok(())
}

/// Splits a recorded log into an initial measurement set and the remainder
/// available for acquisition, by a seeded shuffle.
fn split_log(
    scene: &Scene,
    log: Vec<(radiotomo_core::geometry::Link, f64)>,
    initial: usize,
    seed: u64,
) -> Result<(MeasurementSet, Vec<(radiotomo_core::geometry::Link, f64)>)> {
    if initial >= log.len() {
        return Err(CommandError::Config(format!(
            "scene.initial_links = {initial} but the log holds only {} measurements; \
             at least one must remain for acquisition",
            log.len()
        )));
    }
    let mut order: Vec<usize> = (0..log.len()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for j in 0..initial {
        let pick = j + rng.gen_range(0..order.len() - j);
        order.swap(j, pick);
    }
    let chosen: std::collections::HashSet<usize> = order[..initial].iter().copied().collect();
    let mut data = MeasurementSet::new(scene.grid.n_points());
    let mut rest = Vec::new();
    for (i, (link, s)) in log.into_iter().enumerate() {
        if chosen.contains(&i) {
            let w = scene.link_weights(&link)?;
            data.append(link, w, s)?;
        } else {
            rest.push((link, s));
        }
    }
    Ok((data, rest))
}

/// Runs the acquisition loop and writes the trajectory, per-slot estimates,
/// and the accumulated measurement log.
pub fn cmd_adaptive(loaded: &LoadedConfig, data_dir: Option<&Path>, out: &Path) -> Result<()> {
    let config = &loaded.config;
    let schedule = AdaptiveSchedule {
        slots: config.selection.slots,
        pool_size: config.selection.pool_size,
        batch: config.selection.batch,
        mode: match config.selection.mode {
            ModeConfig::Adaptive => SelectionMode::Adaptive,
            ModeConfig::Random => SelectionMode::Random,
        },
        seed: derive_seed(config.seed, stream::SCHEDULE),
    };
    let priors = config.priors()?;
    let potts = config.potts()?;
    let settings = config.vb_settings(0);

    match config.selection.source {
        SourceConfig::Synthetic => {
            let scene = config.scene()?;
            let (labels, field) = draw_truth(loaded, &scene)?;
            let initial = draw_initial_data(loaded, &scene, &field)?;
            let noise_precision = config.truth()?.noise_precision;
            let mut source = SyntheticSource::new(
                &scene,
                &field,
                noise_precision,
                derive_seed(config.seed, stream::SOURCE),
            )?;
            let run = run_adaptive(
                initial,
                &priors,
                &potts,
                &scene.grid,
                &schedule,
                &settings,
                &mut source,
            )?;
            write_adaptive_outputs(loaded, &scene, Some((&labels, &field)), &run, out)
        }
        SourceConfig::File => {
            let dir = data_dir.ok_or_else(|| {
                CommandError::Config(
                    "selection.source = \"file\" requires --data with a recorded directory"
                        .into(),
                )
            })?;
            let scene_text = fs::read_to_string(dir.join("scene.json"))
                .map_err(|e| io_err(&format!("reading {}", dir.join("scene.json").display()), e))?;
            let scene = Scene::from_json(&scene_text)?;
            let log_path = dir.join("measurements.csv");
            let f = fs::File::open(&log_path)
                .map_err(|e| io_err(&format!("reading {}", log_path.display()), e))?;
            let log = read_measurement_log(BufReader::new(f))?;
            let (initial, rest) = split_log(
                &scene,
                log,
                config.scene.initial_links,
                derive_seed(config.seed, stream::FILE_SPLIT),
            )?;
            let mut source =
                ReplaySource::new(&scene, &rest, derive_seed(config.seed, stream::SOURCE))?;
            let run = run_adaptive(
                initial,
                &priors,
                &potts,
                &scene.grid,
                &schedule,
                &settings,
                &mut source,
            )?;
            write_adaptive_outputs(loaded, &scene, None, &run, out)
        }
    }
}

/// Writes every artifact of an acquisition run: truth (when known), the
/// per-slot trajectory and estimates, final hyperparameters, and the
/// accumulated log.
fn write_adaptive_outputs(
    loaded: &LoadedConfig,
    scene: &Scene,
    truth: Option<(&LabelField, &LossField)>,
    run: &radiotomo_core::selection::AdaptiveRun,
    out: &Path,
) -> Result<()> {
    create_out(out)?;
    let (nx, ny) = (scene.grid.nx, scene.grid.ny);
    if let Some((labels, field)) = truth {
        write_label_csv(&mut file_writer(out, "truth_labels.csv")?, nx, ny, &labels.labels)?;
        write_field_csv(&mut file_writer(out, "truth_field.csv")?, nx, ny, &field.values)?;
    }
    let mut rows = Vec::with_capacity(run.records.len());
    for rec in &run.records {
        let err = match truth {
            Some((labels, _)) => Some(labeling_error(
                &rec.estimates.labels.labels,
                &labels.labels,
            )?),
            None => None,
        };
        rows.push(TrajectoryRow {
            slot: rec.slot,
            t: rec.measurements,
            elbo_final: rec.elbo,
            labeling_error: err,
            selected: rec.selected.clone(),
        });
        let tag = format!("slot_{:02}", rec.slot);
        write_field_csv(
            &mut file_writer(out, &format!("{tag}_field.csv"))?,
            nx,
            ny,
            &rec.estimates.field.values,
        )?;
        write_label_csv(
            &mut file_writer(out, &format!("{tag}_labels.csv"))?,
            nx,
            ny,
            &rec.estimates.labels.labels,
        )?;
    }
    write_trajectory_csv(&mut file_writer(out, "trajectory.csv")?, &rows)?;
    if let Some(last) = run.records.last() {
        write_theta_json(&mut file_writer(out, "theta.json")?, &last.estimates.theta)?;
    }
    write_measurement_log(&mut file_writer(out, "measurements.csv")?, &run.data)?;
    write_config_copy(out, loaded)?;
    let mut meta = Meta::new("adaptive", loaded);
    meta.status = Some(match run.status {
        AdaptiveStatus::Completed => "completed".to_string(),
        AdaptiveStatus::PoolExhausted { slot } => format!("pool exhausted at slot {slot}"),
    });
    write_meta(out, &meta)?;
    Ok(())
}

/// Compares the reconstruction methods over seeded Monte Carlo repetitions
/// of the configured synthetic scene and writes the aggregated report.
pub fn cmd_evaluate(loaded: &LoadedConfig, out: &Path) -> Result<()> {
    let config = &loaded.config;
    let scene = config.scene()?;
    let priors = config.priors()?;
    let potts = config.potts()?;
    config.truth()?;
    let ridge_cfg = config.ridge(&scene.grid)?;
    let tv_cfg = config.tv();

    let metrics = ["vb_labeling_error", "vb_nmse", "ridge_nmse", "tv_nmse"];
    let outcome = run_mc(
        config.evaluation.mc_runs,
        derive_seed(config.seed, stream::MC),
        |_, run_seed| {
            let truth = config.truth().expect("validated above");
            let labels = sample_potts(
                &scene.grid,
                &potts,
                config.scene.truth.as_ref().expect("validated").gibbs_sweeps,
                derive_seed(run_seed, stream::TRUTH_LABELS),
            );
            let field = sample_slf(&labels, &truth, derive_seed(run_seed, stream::TRUTH_FIELD))?;
            let mut rng =
                ChaCha20Rng::seed_from_u64(derive_seed(run_seed, stream::LINK_CHOICE));
            let links =
                uniform_links(scene.sensors.len(), config.scene.initial_links, &mut rng)?;
            let data = synthesize_measurements(
                &scene,
                &field,
                &links,
                truth.noise_precision,
                derive_seed(run_seed, stream::MEASUREMENT_NOISE),
            )?;

            let settings = config.vb_settings(derive_seed(run_seed, stream::VB_INIT));
            let vb = run_vb(&data, &priors, &potts, &scene.grid, &settings)?;
            let ridge = ridge_ls(&data, &ridge_cfg)?;
            let tv = tv_ls(&data, &scene.grid, &tv_cfg)?;

            let pair_seed = derive_seed(run_seed, stream::NMSE_PAIRS);
            let n_pairs = config.evaluation.nmse_pairs;
            Ok(vec![
                labeling_error(&vb.estimates.labels.labels, &labels.labels)?,
                nmse(&scene, &field.values, &vb.estimates.field.values, n_pairs, pair_seed)?,
                nmse(&scene, &field.values, &ridge.values, n_pairs, pair_seed)?,
                nmse(&scene, &field.values, &tv.field.values, n_pairs, pair_seed)?,
            ])
        },
    );

    if outcome.runs.is_empty() {
        let first = outcome
            .failures
            .first()
            .map(|(_, e)| e.to_string())
            .unwrap_or_else(|| "no runs".into());
        return Err(CommandError::Numerical(format!(
            "all {} evaluation runs failed; first error: {first}",
            config.evaluation.mc_runs
        )));
    }
    let values: Vec<Vec<f64>> = outcome.values().into_iter().cloned().collect();
    let stats = radiotomo_core::evaluation::summarize_columns(&values)?;
    let rows: Vec<ReportRow> = metrics
        .iter()
        .zip(stats)
        .map(|(name, (mean, std))| ReportRow {
            slot: 0,
            metric: name.to_string(),
            mean,
            std,
        })
        .collect();
    let summary = ReportSummary {
        n_runs: outcome.runs.len(),
        n_failures: outcome.failures.len(),
        rows: rows.clone(),
    };

    create_out(out)?;
    write_report_csv(&mut file_writer(out, "report.csv")?, &rows)?;
    write_report_json(&mut file_writer(out, "report.json")?, &summary)?;
    write_config_copy(out, loaded)?;
    write_meta(out, &Meta::new("evaluate", loaded))?;
    Ok(())
}
