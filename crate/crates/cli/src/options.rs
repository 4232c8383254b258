use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, ValueEnum};
use vinr::training::TrainConfig;
use vinr::{Aabb, Point3};

/// Parses six numbers `x0 y0 z0 x1 y1 z1`, separated by spaces or commas.
pub fn parse_bbox(s: &str) -> std::result::Result<Aabb, String> {
    let nums: Vec<f64> = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect::<std::result::Result<_, _>>()?;
    if nums.len() != 6 {
        return Err(format!("expected 6 numbers, got {}", nums.len()));
    }
    let b = Aabb::new(Point3::new(nums[0], nums[1], nums[2]), Point3::new(nums[3], nums[4], nums[5]));
    if !b.is_valid() {
        return Err("min corner must be below max corner on every axis".into());
    }
    Ok(b)
}

fn parse_dims(s: &str) -> std::result::Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("bad lattice size {s:?}"))?;
    if n < 2 {
        return Err(format!("lattice needs at least 2 points per axis, got {n}"));
    }
    Ok(n)
}

/// Where reference surfaces come from.
#[derive(Args, Clone, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["mesh", "shape"])))]
pub struct SurfaceSource {
    /// Closed OBJ mesh.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Built-in shape name (sphere, capsule, torus, bifurcation, trunk,
    /// left-branch, right-branch, lumen, inner-wall, outer-wall) or a JSON
    /// shape.
    #[arg(long)]
    pub shape: Option<String>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: SurfaceSource,
    /// Number of training points.
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also draw this many held-out points, disjoint from the training set.
    #[arg(long)]
    pub heldout: Option<usize>,
    /// Held-out output (default: OUT with a `.heldout.xyz` extension).
    #[arg(long)]
    pub heldout_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ActivationFlag {
    Relu,
    Softplus,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum InitFlag {
    Sphere,
    Standard,
}

/// Training hyperparameters; unset flags fall back to the config file,
/// then to the defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct TrainFlags {
    /// `key = value` file with training settings (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the Eikonal term.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Hidden layers.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Nodes per hidden layer.
    #[arg(long)]
    pub width: Option<usize>,
    /// Hidden layer receiving the input again, or `none`.
    #[arg(long)]
    pub skip: Option<String>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationFlag>,
    /// Softplus sharpness.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitFlag>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Surface points per step (default: all, at most 1024).
    #[arg(long)]
    pub batch: Option<usize>,
    /// Eikonal points per step (default: the surface batch size).
    #[arg(long)]
    pub eikonal_batch: Option<usize>,
    /// Noise of the near-surface Eikonal points, in normalised units.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Weight of the hinge keeping nested channels ordered (0 = off).
    #[arg(long)]
    pub nesting_weight: Option<f64>,
    /// Log the loss every this many epochs (shown with -v).
    #[arg(long)]
    pub log_every: Option<usize>,
}

impl TrainFlags {
    pub fn resolve(&self, mut config: TrainConfig) -> Result<TrainConfig> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            config
                .merge_text(&text)
                .with_context(|| format!("in config file {}", path.display()))?;
        }
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            if let Some(v) = value {
                config.set(key, &v)?;
            }
            Ok(())
        };
        set("epochs", self.epochs.map(|v| v.to_string()))?;
        set("lr", self.lr.map(|v| v.to_string()))?;
        set("lambda", self.lambda.map(|v| v.to_string()))?;
        set("layers", self.layers.map(|v| v.to_string()))?;
        set("width", self.width.map(|v| v.to_string()))?;
        set("skip", self.skip.clone())?;
        set(
            "activation",
            self.activation.map(|a| match a {
                ActivationFlag::Relu => "relu".to_string(),
                ActivationFlag::Softplus => "softplus".to_string(),
            }),
        )?;
        set("beta", self.beta.map(|v| v.to_string()))?;
        set(
            "init",
            self.init.map(|i| match i {
                InitFlag::Sphere => "sphere".to_string(),
                InitFlag::Standard => "standard".to_string(),
            }),
        )?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("batch", self.batch.map(|v| v.to_string()))?;
        set("eikonal_batch", self.eikonal_batch.map(|v| v.to_string()))?;
        set("sigma", self.sigma.map(|v| v.to_string()))?;
        set("nesting_weight", self.nesting_weight.map(|v| v.to_string()))?;
        set("log_every", self.log_every.map(|v| v.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Surface points (.xyz). Repeat for nested surfaces, innermost first;
    /// each file becomes one output channel.
    #[arg(long = "points", required = true)]
    pub points: Vec<PathBuf>,
    /// Model output (.inr).
    #[arg(long)]
    pub out: PathBuf,
    /// Loss trace CSV (default: OUT with a `.csv` extension).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    #[arg(long, default_value = "128", value_parser = parse_dims)]
    pub dims: usize,
    /// Lattice box `x0 y0 z0 x1 y1 z1` (default: the model's data box
    /// padded by 10%).
    #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
    pub bbox: Option<Aabb>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantFlag {
    Paper,
    Quilez,
}

#[derive(Args, Debug)]
pub struct BlendArgs {
    /// Model files (.inr), each with its own normalisation.
    #[arg(long, num_args = 1.., required = true)]
    pub models: Vec<PathBuf>,
    /// Channel used from every model.
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    /// Smoothing width; 0 gives the plain minimum.
    #[arg(long, default_value_t = vinr::csg::DEFAULT_SMOOTHING)]
    pub k: f64,
    #[arg(long, value_enum, default_value_t = VariantFlag::Paper)]
    pub variant: VariantFlag,
    #[arg(long, default_value = "256", value_parser = parse_dims)]
    pub dims: usize,
    /// Lattice box (default: union of the models' data boxes padded by 10%).
    #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
    pub bbox: Option<Aabb>,
    /// Blended grid output (.sdfgrid).
    #[arg(long)]
    pub out_grid: Option<PathBuf>,
    /// Extracted zero level set (.obj).
    #[arg(long)]
    pub out_mesh: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("input").required(true).args(["model", "grid"])))]
pub struct ExtractArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Grid file (.sdfgrid); `--dims` and `--bbox` are ignored.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    #[arg(long, default_value = "128", value_parser = parse_dims)]
    pub dims: usize,
    #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
    pub bbox: Option<Aabb>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub iso: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AsdMode {
    /// Distance to the mesh extracted at `--asd-dims`.
    Mesh,
    /// Mean absolute field value at the held-out points.
    Field,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("reference").required(true).args(["ref_mesh", "ref_shape"])))]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    /// Closed reference mesh (.obj).
    #[arg(long)]
    pub ref_mesh: Option<PathBuf>,
    /// Built-in reference shape or JSON shape.
    #[arg(long)]
    pub ref_shape: Option<String>,
    /// Held-out surface points (.xyz) for the surface distance.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    #[arg(long, default_value_t = vinr::metrics::DEFAULT_DICE_DIMS, value_parser = parse_dims)]
    pub dsc_dims: usize,
    #[arg(long, default_value_t = vinr::metrics::DEFAULT_ASD_DIMS, value_parser = parse_dims)]
    pub asd_dims: usize,
    #[arg(long, value_enum, default_value_t = AsdMode::Mesh)]
    pub asd_mode: AsdMode,
    /// Lattice box for both metrics (default: both shapes padded by 10%).
    #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
    pub bbox: Option<Aabb>,
    /// Also write a `key = value` report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SurfaceSource,
    /// Comma-separated training cloud sizes.
    #[arg(long, default_value = "100,200,400,800", value_delimiter = ',')]
    pub counts: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Held-out points per run.
    #[arg(long, default_value_t = 500)]
    pub heldout: usize,
    /// Parallel runs.
    #[arg(long, env = "VINR_JOBS", default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = vinr::metrics::DEFAULT_DICE_DIMS, value_parser = parse_dims)]
    pub dsc_dims: usize,
    #[arg(long, default_value_t = vinr::metrics::DEFAULT_ASD_DIMS, value_parser = parse_dims)]
    pub asd_dims: usize,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Training settings; defaults to the reduced 4 x 64, 2000-epoch setup.
    /// `--seed` is the base seed: job `j` samples and fits with `seed + j`.
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Args, Debug)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Points per cloud.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Icosphere subdivision level for sphere meshes.
    #[arg(long, default_value_t = 4)]
    pub subdivisions: u32,
    /// Segments around each capsule mesh.
    #[arg(long, default_value_t = 32)]
    pub segments: usize,
}
