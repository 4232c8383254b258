//! Fitting networks to point clouds: Eikonal sampling, loss assembly and
//! the Adam loop, for single surfaces and for nested multi-channel fits.

mod adam;
mod config;

use log::info;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainTransform, Point3, PointCloud};
use crate::network::{evaluate_loss, grad_of_loss, LossSpec, MlpModel};

pub use adam::{adam_step, AdamState};
pub use config::TrainConfig;

// std::time::Instant panics on wasm32-unknown-unknown; fits there report 0 s.
#[derive(Clone, Copy)]
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Self(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Abort threshold for the loss.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Distribution of the points where the Eikonal term is evaluated: half
/// uniform over `[-h, h]^3`, half Gaussian perturbations of surface points
/// clamped to the same cube.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EikonalSampler {
    pub half_extent: f64,
    pub sigma: f64,
}

impl Default for EikonalSampler {
    fn default() -> Self {
        Self {
            half_extent: 1.0,
            sigma: 0.1,
        }
    }
}

impl EikonalSampler {
    /// The first `n / 2` points are uniform, the rest perturbed.
    pub fn sample(&self, surface: &[Point3], n: usize, rng: &mut impl Rng) -> Vec<Point3> {
        let h = self.half_extent;
        let uniform = if surface.is_empty() { n } else { n / 2 };
        let mut out = Vec::with_capacity(n);
        for _ in 0..uniform {
            out.push(Point3::new(
                rng.random_range(-h..=h),
                rng.random_range(-h..=h),
                rng.random_range(-h..=h),
            ));
        }
        let noise = (self.sigma > 0.0).then(|| Normal::new(0.0, self.sigma).expect("finite sigma"));
        for _ in uniform..n {
            let p = surface[rng.random_range(0..surface.len())];
            let q = match &noise {
                Some(d) => p + Point3::new(d.sample(rng), d.sample(rng), d.sample(rng)),
                None => p,
            };
            out.push(Point3::new(q.x.clamp(-h, h), q.y.clamp(-h, h), q.z.clamp(-h, h)));
        }
        out
    }
}

pub fn sample_eikonal_points(
    sampler: &EikonalSampler,
    surface: &PointCloud,
    n: usize,
    rng: &mut impl Rng,
) -> PointCloud {
    PointCloud::new(sampler.sample(surface.points(), n, rng)).expect("finite samples")
}

/// Single-channel loss: `(total, data, eikonal)` with
/// `total = data + lambda * eikonal`.
pub fn loss_eq3(
    model: &MlpModel,
    surface: &[Point3],
    eikonal: &[Point3],
    lambda: f64,
) -> Result<(f64, f64, f64)> {
    let l = evaluate_loss(model, &LossSpec::eikonal(lambda), &[surface], eikonal, None)?;
    Ok((l.total, l.data, l.eikonal))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub total: f64,
    pub data: f64,
    pub eikonal: f64,
    pub nesting: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub trace: Vec<EpochLoss>,
    pub wall_seconds: f64,
    pub config: TrainConfig,
    pub points_per_channel: Vec<usize>,
}

impl FitReport {
    pub fn final_loss(&self) -> Option<EpochLoss> {
        self.trace.last().copied()
    }

    /// CSV with the configuration as `#` comment lines, then one row per
    /// epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.config.key_values() {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        let pts: Vec<String> = self.points_per_channel.iter().map(|n| n.to_string()).collect();
        out.push_str(&format!("# points_per_channel = {}\n", pts.join(" ")));
        out.push_str(&format!("# wall_seconds = {:.3}\n", self.wall_seconds));
        let nesting = self.config.nesting_weight > 0.0;
        out.push_str(if nesting { "epoch,total,data,eik,nest\n" } else { "epoch,total,data,eik\n" });
        for (e, l) in self.trace.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}", e + 1, l.total, l.data, l.eikonal));
            if nesting {
                out.push_str(&format!(",{}", l.nesting));
            }
            out.push('\n');
        }
        out
    }
}

/// Fits one channel to `cloud` (real coordinates).
pub fn fit(cloud: &PointCloud, config: &TrainConfig) -> Result<(MlpModel, FitReport)> {
    fit_channels(std::slice::from_ref(cloud), config)
}

/// Fits one channel per cloud (innermost surface first) in a single
/// network sharing one normalisation.
pub fn fit_nested(clouds: &[PointCloud], config: &TrainConfig) -> Result<(MlpModel, FitReport)> {
    if clouds.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "nested fit needs at least 2 clouds, got {}",
            clouds.len()
        )));
    }
    fit_channels(clouds, config)
}

pub fn fit_channels(clouds: &[PointCloud], config: &TrainConfig) -> Result<(MlpModel, FitReport)> {
    config.validate()?;
    if clouds.is_empty() {
        return Err(Error::Empty("no point clouds to fit"));
    }
    for (c, cloud) in clouds.iter().enumerate() {
        if cloud.len() < 4 {
            return Err(Error::Degenerate(format!(
                "cloud {c} has {} points, need at least 4",
                cloud.len()
            )));
        }
    }
    let start = Stopwatch::start();
    let all = PointCloud::concat(clouds);
    let transform = DomainTransform::fit(&all, config.half_extent)?;
    let normalized: Vec<PointCloud> = clouds.iter().map(|c| transform.apply_cloud(c)).collect();
    let all_normalized: Vec<Point3> = normalized.iter().flat_map(|c| c.points().iter().copied()).collect();

    let arch = config.architecture(clouds.len());
    let mut model = MlpModel::init(arch, config.seed, config.init)?.with_transform(transform);
    let spec = LossSpec {
        lambda: config.lambda,
        nesting_weight: config.nesting_weight,
    };
    let sampler = EikonalSampler {
        half_extent: 1.0,
        sigma: config.sigma,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x05ee_dba7_c4e5_u64);
    let mut adam = AdamState::new(model.params().len(), config.beta1, config.beta2, config.epsilon);
    let mut report = FitReport {
        trace: Vec::with_capacity(config.epochs),
        wall_seconds: 0.0,
        config: config.clone(),
        points_per_channel: clouds.iter().map(|c| c.len()).collect(),
    };
    let mut batches: Vec<Vec<Point3>> = vec![Vec::new(); clouds.len()];
    for epoch in 1..=config.epochs {
        for (batch, cloud) in batches.iter_mut().zip(&normalized) {
            let size = config.surface_batch(cloud.len());
            batch.clear();
            if size >= cloud.len() {
                batch.extend_from_slice(cloud.points());
            } else {
                batch.extend(index::sample(&mut rng, cloud.len(), size).iter().map(|i| cloud.points()[i]));
            }
        }
        let eik_size = config.eikonal_batch(clouds.iter().map(|c| c.len()).max().unwrap_or(0));
        let eikonal = sampler.sample(&all_normalized, eik_size, &mut rng);
        let surface: Vec<&[Point3]> = batches.iter().map(|b| b.as_slice()).collect();

        let step = grad_of_loss(&model, &spec, &surface, &eikonal);
        let (loss, grads) = match step {
            Ok(v) if v.0.total <= DIVERGENCE_LIMIT => v,
            Ok((loss, _)) => return Err(diverged(report, epoch, loss.total, start)),
            Err(Error::NonFinite(_)) => return Err(diverged(report, epoch, f64::NAN, start)),
            Err(e) => return Err(e),
        };
        report.trace.push(EpochLoss {
            total: loss.total,
            data: loss.data,
            eikonal: loss.eikonal,
            nesting: loss.nesting,
        });
        adam_step(&mut adam, model.params_mut(), &grads, config.learning_rate)?;
        if config.log_every > 0 && epoch % config.log_every == 0 {
            info!(
                "epoch {epoch}/{}: total {:.6} data {:.6} eik {:.6}",
                config.epochs, loss.total, loss.data, loss.eikonal
            );
        }
    }
    report.wall_seconds = start.seconds();
    Ok((model, report))
}

fn diverged(mut report: FitReport, epoch: usize, loss: f64, start: Stopwatch) -> Error {
    report.wall_seconds = start.seconds();
    Error::Diverged {
        epoch,
        loss,
        report: Box::new(report),
    }
}
