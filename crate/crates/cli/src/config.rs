//! Experiment configuration: one JSON document covering the scene, priors,
//! solver settings, acquisition schedule, baselines, and evaluation knobs.
//!
//! Every field has a default, so a config file only states what it changes;
//! the defaults describe a full-scale synthetic experiment (60×60 grid, 200
//! boundary sensors, four classes). Dotted-path overrides (`--set a.b.c=v`)
//! are applied to the default-filled JSON tree before the final
//! deserialization, and unknown keys anywhere are rejected so typos fail
//! loudly. Loading validates everything by constructing the downstream
//! types, so no computation starts on a config the solvers would later
//! refuse.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use radiotomo_core::baselines::{
    exp_kernel_covariance, FieldCovariance, RidgeConfig, TvConfig,
};
use radiotomo_core::geometry::{Grid, Point, Scene, SensorSet};
use radiotomo_core::synthesis::{HyperParams, PathlossParams, PottsParams};
use radiotomo_core::vb::{HyperPriors, VbSettings};

/// A configuration problem: bad JSON, an unknown key, or a value the
/// downstream types reject.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err(message: impl Into<String>) -> ConfigError {
    ConfigError(message.into())
}

/// Grid description: `nx`×`ny` points spaced `spacing` apart starting at
/// `origin` on both axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub origin: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: 60,
            ny: 60,
            spacing: 1.0,
            origin: 1.0,
        }
    }
}

/// Sensor deployment: a count placed evenly on the area boundary, or
/// explicit positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// Number of sensors to place evenly along the boundary.
    #[serde(default)]
    pub count: Option<usize>,
    /// Explicit `[x, y]` positions; mutually exclusive with `count`.
    #[serde(default)]
    pub positions: Option<Vec<[f64; 2]>>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            count: Some(200),
            positions: None,
        }
    }
}

/// Ground-truth generator parameters for synthetic scenes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthConfig {
    pub noise_precision: f64,
    pub class_means: Vec<f64>,
    pub class_precisions: Vec<f64>,
    /// Gibbs sweeps used to draw the ground-truth label field.
    pub gibbs_sweeps: usize,
}

impl Default for TruthConfig {
    fn default() -> Self {
        TruthConfig {
            noise_precision: 20.0,
            class_means: vec![0.0, 1.0, 2.5, 5.5],
            class_precisions: vec![10.0, 10.0, 2.0, 2.0],
            gibbs_sweeps: 200,
        }
    }
}

/// Scene block: geometry, link model, label coupling, and the synthetic
/// ground truth (when one is wanted).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub grid: GridConfig,
    pub sensors: SensorConfig,
    /// Ellipse width of the link weight model.
    pub lambda: f64,
    /// Label coupling strength.
    pub beta: f64,
    pub n_classes: usize,
    /// Measurements collected before any acquisition round.
    pub initial_links: usize,
    /// Synthetic ground truth; `null` for file-driven runs.
    pub truth: Option<TruthConfig>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            grid: GridConfig::default(),
            sensors: SensorConfig::default(),
            lambda: 0.39,
            beta: 1.5,
            n_classes: 4,
            initial_links: 800,
            truth: Some(TruthConfig::default()),
        }
    }
}

/// Hyperprior block, one entry per class where vector-valued.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub noise_shape: f64,
    pub noise_scale: f64,
    pub mean_locs: Vec<f64>,
    pub mean_vars: Vec<f64>,
    pub prec_shapes: Vec<f64>,
    pub prec_scales: Vec<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            noise_shape: 1300.0,
            noise_scale: 2.0,
            mean_locs: vec![0.0, 0.9, 2.7, 5.3],
            mean_vars: vec![1e-4; 4],
            prec_shapes: vec![0.8; 4],
            prec_scales: vec![1.0, 1.0, 0.5, 0.5],
        }
    }
}

/// Reconstruction loop settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VbConfig {
    pub max_iters: usize,
    /// Stop when the bound improves by no more than this.
    pub tol: f64,
}

impl Default for VbConfig {
    fn default() -> Self {
        VbConfig {
            max_iters: 3000,
            tol: 1e-6,
        }
    }
}

/// How each acquisition round picks its batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeConfig {
    Adaptive,
    Random,
}

/// Where acquired measurements come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceConfig {
    /// Synthesized on demand from the ground-truth field.
    Synthetic,
    /// Replayed from a recorded measurement log.
    File,
}

/// Acquisition schedule block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    /// Acquisition rounds after the initial reconstruction.
    pub slots: usize,
    pub pool_size: usize,
    pub batch: usize,
    pub mode: ModeConfig,
    pub source: SourceConfig,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            slots: 8,
            pool_size: 200,
            batch: 100,
            mode: ModeConfig::Adaptive,
            source: SourceConfig::Synthetic,
        }
    }
}

/// Ridge covariance choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceConfig {
    Identity,
    /// Exponential kernel `sigma2 * exp(-distance / kappa)`.
    Exponential { sigma2: f64, kappa: f64 },
}

/// Ridge baseline block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RidgeBlock {
    pub reg_weight: f64,
    pub covariance: CovarianceConfig,
}

impl Default for RidgeBlock {
    fn default() -> Self {
        RidgeBlock {
            reg_weight: 0.015,
            covariance: CovarianceConfig::Identity,
        }
    }
}

/// Total-variation baseline block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TvBlock {
    pub reg_weight: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for TvBlock {
    fn default() -> Self {
        TvBlock {
            reg_weight: 1e-11,
            max_iters: 500,
            tol: 1e-7,
        }
    }
}

/// Baselines block.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub ridge: RidgeBlock,
    pub tv: TvBlock,
}

/// Gain-map rendering parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainMapConfig {
    pub g0_db: f64,
    pub gamma: f64,
    /// Fixed receiver position `[x, y]`.
    pub receiver: [f64; 2],
}

/// Evaluation block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub mc_runs: usize,
    /// Random link pairs behind the shadowing error metric.
    pub nmse_pairs: usize,
    /// When present, reconstruction commands also render a gain map.
    pub gain_map: Option<GainMapConfig>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            mc_runs: 20,
            nmse_pairs: 200,
            gain_map: None,
        }
    }
}

/// The whole experiment document.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub priors: PriorConfig,
    pub vb: VbConfig,
    pub selection: SelectionConfig,
    pub baselines: BaselineConfig,
    pub evaluation: EvaluationConfig,
}

impl ExperimentConfig {
    /// Builds the scene (grid, deployed sensors, link model).
    pub fn scene(&self) -> Result<Scene, ConfigError> {
        let g = &self.scene.grid;
        let grid = Grid::new(g.nx, g.ny, g.spacing, g.origin)
            .map_err(|e| cfg_err(format!("scene.grid: {e}")))?;
        let sensors = match (&self.scene.sensors.count, &self.scene.sensors.positions) {
            (Some(_), Some(_)) => {
                return Err(cfg_err(
                    "scene.sensors: give either a boundary count or explicit positions, not both",
                ))
            }
            (None, None) => {
                return Err(cfg_err(
                    "scene.sensors: give a boundary count or explicit positions",
                ))
            }
            (Some(n), None) => {
                if *n < 2 {
                    return Err(cfg_err("scene.sensors.count: at least 2 sensors required"));
                }
                SensorSet::on_boundary(&grid.area(), *n)
            }
            (None, Some(ps)) => {
                if ps.len() < 2 {
                    return Err(cfg_err(
                        "scene.sensors.positions: at least 2 sensors required",
                    ));
                }
                SensorSet::new(ps.iter().map(|p| Point::new(p[0], p[1])).collect())
            }
        };
        Scene::new(grid, sensors, self.scene.lambda)
            .map_err(|e| cfg_err(format!("scene: {e}")))
    }

    /// Builds the label coupling parameters.
    pub fn potts(&self) -> Result<PottsParams, ConfigError> {
        PottsParams::new(self.scene.beta, self.scene.n_classes)
            .map_err(|e| cfg_err(format!("scene: {e}")))
    }

    /// Builds the hyperpriors, checking the class count against the scene.
    pub fn priors(&self) -> Result<HyperPriors, ConfigError> {
        let p = &self.priors;
        let k = self.scene.n_classes;
        for (name, len) in [
            ("mean_locs", p.mean_locs.len()),
            ("mean_vars", p.mean_vars.len()),
            ("prec_shapes", p.prec_shapes.len()),
            ("prec_scales", p.prec_scales.len()),
        ] {
            if len != k {
                return Err(cfg_err(format!(
                    "priors.{name}: {len} entries for {k} classes"
                )));
            }
        }
        HyperPriors::new(
            p.noise_shape,
            p.noise_scale,
            p.mean_locs.clone(),
            p.mean_vars.clone(),
            p.prec_shapes.clone(),
            p.prec_scales.clone(),
        )
        .map_err(|e| cfg_err(format!("priors: {e}")))
    }

    /// Builds the ground-truth generator parameters; errors when the config
    /// has no truth block.
    pub fn truth(&self) -> Result<HyperParams, ConfigError> {
        let t = self
            .scene
            .truth
            .as_ref()
            .ok_or_else(|| cfg_err("scene.truth is required for synthetic commands"))?;
        if t.class_means.len() != self.scene.n_classes {
            return Err(cfg_err(format!(
                "scene.truth.class_means: {} entries for {} classes",
                t.class_means.len(),
                self.scene.n_classes
            )));
        }
        HyperParams::new(
            t.noise_precision,
            t.class_means.clone(),
            t.class_precisions.clone(),
        )
        .map_err(|e| cfg_err(format!("scene.truth: {e}")))
    }

    /// Builds the reconstruction settings with the given initialization seed.
    pub fn vb_settings(&self, seed: u64) -> VbSettings {
        VbSettings {
            max_iters: self.vb.max_iters,
            tol: self.vb.tol,
            seed,
        }
    }

    /// Builds the ridge baseline configuration.
    pub fn ridge(&self, grid: &Grid) -> Result<RidgeConfig, ConfigError> {
        let covariance = match &self.baselines.ridge.covariance {
            CovarianceConfig::Identity => FieldCovariance::Identity,
            CovarianceConfig::Exponential { sigma2, kappa } => FieldCovariance::Matrix(
                exp_kernel_covariance(grid, *sigma2, *kappa)
                    .map_err(|e| cfg_err(format!("baselines.ridge.covariance: {e}")))?,
            ),
        };
        Ok(RidgeConfig {
            reg_weight: self.baselines.ridge.reg_weight,
            covariance,
        })
    }

    /// Builds the total-variation baseline configuration.
    pub fn tv(&self) -> TvConfig {
        TvConfig {
            reg_weight: self.baselines.tv.reg_weight,
            max_iters: self.baselines.tv.max_iters,
            tol: self.baselines.tv.tol,
        }
    }

    /// Builds the gain-map pathloss parameters and receiver, when configured.
    pub fn gain_map(&self) -> Result<Option<(PathlossParams, Point)>, ConfigError> {
        match &self.evaluation.gain_map {
            None => Ok(None),
            Some(g) => {
                let pl = PathlossParams::new(g.g0_db, g.gamma)
                    .map_err(|e| cfg_err(format!("evaluation.gain_map: {e}")))?;
                Ok(Some((pl, Point::new(g.receiver[0], g.receiver[1]))))
            }
        }
    }

    /// Constructs every downstream object once, so any invariant violation
    /// surfaces before a command starts computing.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scene()?;
        self.potts()?;
        self.priors()?;
        if let Some(t) = &self.scene.truth {
            self.truth()?;
            if t.gibbs_sweeps == 0 {
                return Err(cfg_err("scene.truth.gibbs_sweeps must be positive"));
            }
        }
        if self.scene.initial_links == 0 {
            return Err(cfg_err("scene.initial_links must be positive"));
        }
        if self.vb.max_iters == 0 {
            return Err(cfg_err("vb.max_iters must be positive"));
        }
        if !(self.vb.tol > 0.0) || !self.vb.tol.is_finite() {
            return Err(cfg_err("vb.tol must be positive and finite"));
        }
        let s = &self.selection;
        if s.pool_size == 0 || s.batch == 0 || s.batch > s.pool_size {
            return Err(cfg_err(format!(
                "selection: batch {} must be in 1..=pool_size {}",
                s.batch, s.pool_size
            )));
        }
        let r = &self.baselines.ridge;
        if !(r.reg_weight >= 0.0) || !r.reg_weight.is_finite() {
            return Err(cfg_err(
                "baselines.ridge.reg_weight must be nonnegative and finite",
            ));
        }
        if let CovarianceConfig::Exponential { sigma2, kappa } = &r.covariance {
            for (name, v) in [("sigma2", *sigma2), ("kappa", *kappa)] {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(cfg_err(format!(
                        "baselines.ridge.covariance.exponential.{name} must be positive and finite"
                    )));
                }
            }
        }
        let t = &self.baselines.tv;
        if !(t.reg_weight >= 0.0) || !t.reg_weight.is_finite() {
            return Err(cfg_err(
                "baselines.tv.reg_weight must be nonnegative and finite",
            ));
        }
        if !(t.tol >= 0.0) || !t.tol.is_finite() {
            return Err(cfg_err("baselines.tv.tol must be nonnegative and finite"));
        }
        if t.max_iters == 0 {
            return Err(cfg_err("baselines.tv.max_iters must be positive"));
        }
        if self.evaluation.mc_runs == 0 {
            return Err(cfg_err("evaluation.mc_runs must be positive"));
        }
        if self.evaluation.nmse_pairs == 0 {
            return Err(cfg_err("evaluation.nmse_pairs must be positive"));
        }
        self.gain_map()?;
        Ok(())
    }
}

/// Applies one `path.to.key=value` override to the raw JSON tree. The value
/// is parsed as JSON when it parses, and taken as a string otherwise;
/// numeric path segments index into arrays.
fn apply_override(root: &mut serde_json::Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| cfg_err(format!("--set {assignment:?}: expected key=value")))?;
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(cfg_err(format!("--set {assignment:?}: empty path segment")));
    }
    let mut cur = root;
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = cur.as_array_mut().ok_or_else(|| {
                cfg_err(format!(
                    "--set {assignment:?}: {} is not an array",
                    segments[..depth].join(".")
                ))
            })?;
            if idx >= arr.len() {
                return Err(cfg_err(format!(
                    "--set {assignment:?}: index {idx} out of bounds (length {})",
                    arr.len()
                )));
            }
            if last {
                arr[idx] = value;
                return Ok(());
            }
            cur = &mut arr[idx];
        } else {
            let obj = cur.as_object_mut().ok_or_else(|| {
                cfg_err(format!(
                    "--set {assignment:?}: {} is not an object",
                    segments[..depth].join(".")
                ))
            })?;
            if last {
                obj.insert(seg.to_string(), value);
                return Ok(());
            }
            cur = obj
                .entry(seg.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
    }
    unreachable!("the last segment returns");
}

/// A validated configuration together with its canonical serialized form.
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Canonical JSON after overrides; what the hash covers.
    pub canonical: String,
    /// Hex SHA-256 of the canonical form.
    pub sha256: String,
}

/// Parses the config text, applies `--set` overrides and an optional seed
/// override, validates, and fingerprints the result.
///
/// Defaults are filled in before the overrides are applied, so an override
/// can address any field — including single entries of default-valued
/// arrays like `priors.mean_locs.1`.
pub fn load_config(
    text: &str,
    sets: &[String],
    seed: Option<u64>,
) -> Result<LoadedConfig, ConfigError> {
    let user: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| cfg_err(format!("config is not valid JSON: {e}")))?;
    if !user.is_object() {
        return Err(cfg_err("config root must be a JSON object"));
    }
    let base: ExperimentConfig = serde_json::from_value(user)
        .map_err(|e| cfg_err(format!("config does not match the schema: {e}")))?;
    let mut tree = serde_json::to_value(&base)
        .map_err(|e| cfg_err(format!("config serialization failed: {e}")))?;
    for assignment in sets {
        apply_override(&mut tree, assignment)?;
    }
    if let Some(s) = seed {
        tree["seed"] = serde_json::Value::from(s);
    }
    let config: ExperimentConfig = serde_json::from_value(tree)
        .map_err(|e| cfg_err(format!("override does not match the schema: {e}")))?;
    config.validate()?;
    let canonical = serde_json::to_string_pretty(&config)
        .map_err(|e| cfg_err(format!("config serialization failed: {e}")))?;
    let sha256 = format!("{:x}", Sha256::digest(canonical.as_bytes()));
    Ok(LoadedConfig {
        config,
        canonical,
        sha256,
    })
}
