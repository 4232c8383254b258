use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use vinr::csg::{blend_grids, evaluate_on_grid, evaluate_with_mask, BlendSpec, BlendVariant, SdfSource};
use vinr::extraction::{check_watertight, marching_cubes};
use vinr::geometry::{
    load_mesh, load_point_cloud, read_grid, sample_surface, save_mesh, save_point_cloud, write_grid,
    MeshDistanceField,
};
use vinr::metrics::{
    average_field_distance, average_surface_distance_to, dice, nesting_violation, split_train_heldout,
    DEFAULT_PADDING,
};
use vinr::network::{load_model, save_model, MlpModel};
use vinr::synthetic::{capsule_mesh, named_fixture, sample_analytic_surface, AnalyticShape, FIXTURE_NAMES};
use vinr::training::{fit_channels, TrainConfig};
use vinr::{Aabb, Error, Lattice, PointCloud, TriangleMesh};

use crate::options::{
    AsdMode, BlendArgs, EvalArgs, ExtractArgs, FitArgs, FixturesArgs, GridArgs, SampleArgs, SurfaceSource,
    VariantFlag,
};

/// A reference surface given either analytically or as a closed mesh.
pub enum Reference {
    Shape(AnalyticShape),
    Mesh(Box<MeshDistanceField>),
}

impl Reference {
    pub fn load(source: &SurfaceSource) -> Result<Self> {
        match (&source.mesh, &source.shape) {
            (Some(path), _) => Self::from_mesh_file(path),
            (None, Some(name)) => Ok(Reference::Shape(named_fixture(name)?)),
            (None, None) => bail!("either --mesh or --shape is required"),
        }
    }

    pub fn from_mesh_file(path: &Path) -> Result<Self> {
        let mesh = load_mesh(path)?;
        let field = MeshDistanceField::new(mesh).with_context(|| format!("reference mesh {}", path.display()))?;
        Ok(Reference::Mesh(Box::new(field)))
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        Ok(match self {
            Reference::Shape(s) => sample_analytic_surface(s, n, seed)?,
            Reference::Mesh(m) => sample_surface(m.mesh(), n, seed)?,
        })
    }

    pub fn sdf(&self) -> SdfSource<'_> {
        match self {
            Reference::Shape(s) => SdfSource::Analytic(s),
            Reference::Mesh(m) => SdfSource::Mesh(m),
        }
    }

    pub fn bounds(&self) -> Aabb {
        match self {
            Reference::Shape(s) => s.bounds(),
            Reference::Mesh(m) => m.mesh().bounds(),
        }
    }
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut p = path.to_path_buf();
    p.set_extension(ext);
    p
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_checked_model(path: &Path, channel: usize) -> Result<MlpModel> {
    let model = load_model(path)?;
    model
        .check_channel(channel)
        .with_context(|| format!("model {}", path.display()))?;
    Ok(model)
}

fn default_box(model: &MlpModel) -> Aabb {
    model.transform.data_bounds().padded(DEFAULT_PADDING)
}

fn describe_mesh(mesh: &TriangleMesh) -> String {
    let r = check_watertight(mesh);
    format!(
        "{} vertices, {} triangles, closed {}, {} boundary edges, {} non-manifold edges",
        mesh.vertices.len(),
        mesh.triangles.len(),
        r.closed,
        r.boundary_edges,
        r.non_manifold_edges
    )
}

pub fn sample(args: SampleArgs) -> Result<()> {
    let reference = Reference::load(&args.source)?;
    let extra = args.heldout.unwrap_or(0);
    let cloud = reference.sample(args.count + extra, args.seed)?;
    if extra == 0 {
        save_point_cloud(&cloud, &args.out)?;
        println!("wrote {} points to {}", cloud.len(), args.out.display());
        return Ok(());
    }
    let (train, heldout) = split_train_heldout(&cloud, args.count, args.seed)?;
    let heldout_path = args
        .heldout_out
        .unwrap_or_else(|| with_extension(&args.out, "heldout.xyz"));
    save_point_cloud(&train, &args.out)?;
    save_point_cloud(&heldout, &heldout_path)?;
    println!(
        "wrote {} points to {} and {} held-out points to {}",
        train.len(),
        args.out.display(),
        heldout.len(),
        heldout_path.display()
    );
    Ok(())
}

pub fn fit(args: FitArgs) -> Result<()> {
    let config = args.train.resolve(TrainConfig::default())?;
    let clouds = args
        .points
        .iter()
        .map(|p| load_point_cloud(p).with_context(|| format!("points {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = args
        .points
        .iter()
        .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let report_path = args.report.clone().unwrap_or_else(|| with_extension(&args.out, "csv"));
    info!(
        "fitting {} channel(s) to {:?} points for {} epochs",
        clouds.len(),
        clouds.iter().map(PointCloud::len).collect::<Vec<_>>(),
        config.epochs
    );
    let (model, report) = match fit_channels(&clouds, &config) {
        Ok(v) => v,
        Err(Error::Diverged { epoch, loss, report }) => {
            write_text(&report_path, &report.to_csv())?;
            bail!(
                "training diverged at epoch {epoch} (loss {loss}); partial report in {}",
                report_path.display()
            );
        }
        Err(e) => return Err(e.into()),
    };
    let model = model.with_channel_names(names);
    save_model(&model, &args.out)?;
    write_text(&report_path, &report.to_csv())?;
    let last = report.final_loss().expect("at least one epoch");
    println!(
        "wrote {} ({} channel(s)); final loss {:.6} (data {:.6}, eikonal {:.6}) after {:.1}s",
        args.out.display(),
        model.channels(),
        last.total,
        last.data,
        last.eikonal,
        report.wall_seconds
    );
    Ok(())
}

pub fn grid(args: GridArgs) -> Result<()> {
    let model = load_checked_model(&args.model, args.channel)?;
    let lattice = Lattice::cubic(args.dims, args.bbox.unwrap_or_else(|| default_box(&model)))?;
    let (grid, mask) = evaluate_with_mask(&SdfSource::model(&model, args.channel)?, &lattice)?;
    let outside = mask.iter().filter(|m| !**m).count();
    if outside > 0 {
        info!("{outside} lattice points lie outside the model's training cube");
    }
    write_grid(&grid, &args.out)?;
    println!("wrote {}^3 grid to {}", args.dims, args.out.display());
    Ok(())
}

pub fn blend(args: BlendArgs) -> Result<()> {
    if args.models.len() < 2 {
        bail!("blending needs at least 2 models, got {}", args.models.len());
    }
    if args.out_grid.is_none() && args.out_mesh.is_none() {
        bail!("nothing to write: pass --out-grid and/or --out-mesh");
    }
    let models = args
        .models
        .iter()
        .map(|p| load_checked_model(p, args.channel))
        .collect::<Result<Vec<_>>>()?;
    let bbox = args.bbox.unwrap_or_else(|| {
        models
            .iter()
            .fold(Aabb::empty(), |acc, m| acc.union(m.transform.data_bounds()))
            .padded(DEFAULT_PADDING)
    });
    let lattice = Lattice::cubic(args.dims, bbox)?;
    let variant = match args.variant {
        VariantFlag::Paper => BlendVariant::Paper,
        VariantFlag::Quilez => BlendVariant::Quilez,
    };
    let spec = BlendSpec::new(args.k, variant)?;
    let grids = models
        .iter()
        .map(|m| evaluate_on_grid(&SdfSource::model(m, args.channel)?, &lattice))
        .collect::<vinr::Result<Vec<_>>>()?;
    let blended = blend_grids(&grids, &spec)?;
    println!(
        "blended {} models on a {}^3 lattice with k = {} ({:?} variant)",
        models.len(),
        args.dims,
        spec.k,
        spec.variant
    );
    if let Some(path) = &args.out_grid {
        write_grid(&blended, path)?;
        println!("wrote {}^3 blended grid to {}", args.dims, path.display());
    }
    if let Some(path) = &args.out_mesh {
        let mesh = marching_cubes(&blended, 0.0);
        save_mesh(&mesh, path)?;
        println!("wrote {}: {}", path.display(), describe_mesh(&mesh));
    }
    Ok(())
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let grid = match (&args.model, &args.grid) {
        (_, Some(path)) => read_grid(path)?,
        (Some(path), None) => {
            let model = load_checked_model(path, args.channel)?;
            let lattice = Lattice::cubic(args.dims, args.bbox.unwrap_or_else(|| default_box(&model)))?;
            evaluate_on_grid(&SdfSource::model(&model, args.channel)?, &lattice)?
        }
        (None, None) => bail!("either --model or --grid is required"),
    };
    let mesh = marching_cubes(&grid, args.iso);
    save_mesh(&mesh, &args.out)?;
    println!("wrote {}: {}", args.out.display(), describe_mesh(&mesh));
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let model = load_checked_model(&args.model, args.channel)?;
    let reference = match (&args.ref_mesh, &args.ref_shape) {
        (Some(path), _) => Reference::from_mesh_file(path)?,
        (None, Some(name)) => Reference::Shape(named_fixture(name)?),
        (None, None) => bail!("either --ref-mesh or --ref-shape is required"),
    };
    let heldout = args.heldout.as_deref().map(load_point_cloud).transpose()?;
    let row = evaluate(&model, args.channel, &reference, heldout.as_ref(), &EvalSettings::from(&args))?;

    println!("dsc,asd,nesting_fraction");
    println!("{}", row.csv());
    if let Some(path) = &args.report {
        let mut text = String::new();
        writeln!(text, "model = {}", args.model.display())?;
        writeln!(text, "channel = {}", args.channel)?;
        writeln!(text, "dsc = {}", row.dsc)?;
        writeln!(text, "dsc_dims = {}", args.dsc_dims)?;
        if let Some(asd) = row.asd {
            writeln!(text, "asd = {asd}")?;
            writeln!(text, "asd_mode = {:?}", args.asd_mode)?;
            writeln!(text, "asd_dims = {}", args.asd_dims)?;
            writeln!(text, "heldout_points = {}", heldout.as_ref().map_or(0, PointCloud::len))?;
        }
        if let Some(n) = row.nesting {
            writeln!(text, "nesting_fraction = {}", n.fraction)?;
            writeln!(text, "nesting_max_violation = {}", n.max_violation)?;
        }
        let b = row.bbox;
        writeln!(
            text,
            "bbox = {} {} {} {} {} {}",
            b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z
        )?;
        write_text(path, &text)?;
    }
    Ok(())
}

pub struct EvalSettings {
    pub dsc_dims: usize,
    pub asd_dims: usize,
    pub asd_mode: AsdMode,
    pub bbox: Option<Aabb>,
}

impl From<&EvalArgs> for EvalSettings {
    fn from(a: &EvalArgs) -> Self {
        Self {
            dsc_dims: a.dsc_dims,
            asd_dims: a.asd_dims,
            asd_mode: a.asd_mode,
            bbox: a.bbox,
        }
    }
}

pub struct EvalRow {
    pub dsc: f64,
    pub asd: Option<f64>,
    pub nesting: Option<vinr::metrics::NestingReport>,
    pub bbox: Aabb,
}

impl EvalRow {
    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!("{},{},{}", self.dsc, opt(self.asd), opt(self.nesting.map(|n| n.fraction)))
    }
}

/// Dice against the reference, surface distance to the held-out points,
/// and the nesting check for multi-channel models.
pub fn evaluate(
    model: &MlpModel,
    channel: usize,
    reference: &Reference,
    heldout: Option<&PointCloud>,
    settings: &EvalSettings,
) -> Result<EvalRow> {
    let bbox = settings.bbox.unwrap_or_else(|| {
        model
            .transform
            .data_bounds()
            .union(reference.bounds())
            .padded(DEFAULT_PADDING)
    });
    let recon = SdfSource::model(model, channel)?;
    let dsc_lattice = Lattice::cubic(settings.dsc_dims, bbox)?;
    let dsc = dice(&recon, &reference.sdf(), &dsc_lattice)?;
    let asd = match heldout {
        None => None,
        Some(points) => Some(match settings.asd_mode {
            AsdMode::Mesh => average_surface_distance_to(&recon, &Lattice::cubic(settings.asd_dims, bbox)?, points)?,
            AsdMode::Field => average_field_distance(&recon, points)?,
        }),
    };
    let nesting = if model.channels() >= 2 {
        // channels are stored innermost first
        let order: Vec<usize> = (0..model.channels()).rev().collect();
        Some(nesting_violation(model, &order, &dsc_lattice)?)
    } else {
        None
    };
    Ok(EvalRow {
        dsc,
        asd,
        nesting,
        bbox,
    })
}

pub fn fixtures(args: FixturesArgs) -> Result<()> {
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for name in FIXTURE_NAMES {
        let shape = named_fixture(name)?;
        let cloud = sample_analytic_surface(&shape, args.count, args.seed)?;
        let path = dir.join(format!("{name}.xyz"));
        save_point_cloud(&cloud, &path)?;
        written.push(path);
        let mesh = match &shape {
            AnalyticShape::Sphere { center, radius } => {
                Some(TriangleMesh::icosphere(*center, *radius, args.subdivisions))
            }
            AnalyticShape::Capsule { a, b, radius } => {
                Some(capsule_mesh(*a, *b, *radius, args.segments, (args.segments / 4).max(1))?)
            }
            _ => None,
        };
        if let Some(mesh) = mesh {
            let path = dir.join(format!("{name}.obj"));
            save_mesh(&mesh, &path)?;
            written.push(path);
        }
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(())
}
