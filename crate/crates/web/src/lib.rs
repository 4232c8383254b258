//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export is a thin wrapper over a plain function so the numerics can
//! be tested natively.

use vinr::csg::{smooth_union, BlendSpec, BlendVariant, SdfSource};
use vinr::extraction::{check_watertight, marching_cubes};
use vinr::synthetic::{named_fixture, sample_analytic_surface, Bifurcation};
use vinr::training::{fit, TrainConfig};
use vinr::{Aabb, Lattice, Point3, ScalarGrid, TriangleMesh};
use wasm_bindgen::prelude::*;

/// Half width of the square shown by the slice views.
pub const VIEW: f64 = 1.2;

fn js(e: vinr::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn spec(k: f64, variant: &str) -> vinr::Result<BlendSpec> {
    BlendSpec::new(k, variant.parse::<BlendVariant>()?)
}

fn blended(p: Point3, spec: &BlendSpec) -> f64 {
    let [trunk, left, right] = Bifurcation::default().capsules();
    let d = smooth_union(trunk.sdf(p), left.sdf(p), spec);
    smooth_union(d, right.sdf(p), spec)
}

/// `res * res` samples of `f` on the plane `z` over `[-VIEW, VIEW]^2`, top
/// row first.
fn slice(res: usize, z: f64, f: impl Fn(&[Point3]) -> Vec<f64>) -> Vec<f32> {
    let step = 2.0 * VIEW / (res.max(2) - 1) as f64;
    let points: Vec<Point3> = (0..res * res)
        .map(|i| Point3::new(-VIEW + (i % res) as f64 * step, VIEW - (i / res) as f64 * step, z))
        .collect();
    f(&points).into_iter().map(|v| v as f32).collect()
}

pub fn blend_slice_values(k: f64, variant: &str, z: f64, res: usize) -> vinr::Result<Vec<f32>> {
    let spec = spec(k, variant)?;
    Ok(slice(res, z, |ps| ps.iter().map(|&p| blended(p, &spec)).collect()))
}

/// Smoothed union of the three capsules of the default bifurcation on one
/// z plane.
#[wasm_bindgen]
pub fn blend_slice(k: f64, variant: &str, z: f64, res: usize) -> Result<Vec<f32>, JsError> {
    blend_slice_values(k, variant, z, res).map_err(js)
}

#[wasm_bindgen]
pub struct MeshPreview {
    mesh: TriangleMesh,
    closed: bool,
}

#[wasm_bindgen]
impl MeshPreview {
    /// Flat xyz triples.
    pub fn positions(&self) -> Vec<f32> {
        self.mesh.vertices.iter().flat_map(|p| p.to_array()).map(|v| v as f32).collect()
    }

    pub fn indices(&self) -> Vec<u32> {
        self.mesh.triangles.iter().flatten().map(|&i| i as u32).collect()
    }

    pub fn triangle_count(&self) -> usize {
        self.mesh.triangles.len()
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn volume(&self) -> f64 {
        self.mesh.enclosed_volume()
    }
}

pub fn blend_mesh(k: f64, variant: &str, dims: usize) -> vinr::Result<MeshPreview> {
    let spec = spec(k, variant)?;
    let lattice = Lattice::cubic(dims, Aabb::new(Point3::splat(-1.05), Point3::splat(1.05)))?;
    let values = lattice.positions().into_iter().map(|p| blended(p, &spec) as f32).collect();
    let mesh = marching_cubes(&ScalarGrid::new(lattice, values)?, 0.0);
    let closed = check_watertight(&mesh).closed;
    Ok(MeshPreview { mesh, closed })
}

/// Marching cubes of the blended bifurcation on a `dims^3` lattice.
#[wasm_bindgen]
pub fn preview_mesh(k: f64, variant: &str, dims: usize) -> Result<MeshPreview, JsError> {
    blend_mesh(k, variant, dims).map_err(js)
}

#[wasm_bindgen]
pub struct FitResult {
    losses: Vec<f64>,
    slice: Vec<f32>,
    points: Vec<f32>,
}

#[wasm_bindgen]
impl FitResult {
    /// Total loss per epoch.
    pub fn losses(&self) -> Vec<f64> {
        self.losses.clone()
    }

    /// Fitted field on z = 0, laid out like [`blend_slice`].
    pub fn slice(&self) -> Vec<f32> {
        self.slice.clone()
    }

    /// Flat xyz triples of the training points.
    pub fn points(&self) -> Vec<f32> {
        self.points.clone()
    }
}

/// Small network and a fast schedule, enough for a recognisable fit in
/// under a second.
pub fn demo_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: 2e-3,
        hidden_layers: 3,
        hidden_width: 32,
        skip_layer: None,
        seed,
        ..TrainConfig::default()
    }
}

pub fn fit_fixture(shape: &str, points: usize, epochs: usize, seed: u64, res: usize) -> vinr::Result<FitResult> {
    let reference = named_fixture(shape)?;
    let cloud = sample_analytic_surface(&reference, points, seed)?;
    let (model, report) = fit(&cloud, &demo_config(epochs, seed))?;
    let source = SdfSource::model(&model, 0)?;
    Ok(FitResult {
        losses: report.trace.iter().map(|l| l.total).collect(),
        slice: slice(res, 0.0, |ps| source.values(ps)),
        points: cloud.points().iter().flat_map(|p| p.to_array()).map(|v| v as f32).collect(),
    })
}

/// Samples a built-in shape and fits a small network to it.
#[wasm_bindgen]
pub fn fit_shape(shape: &str, points: usize, epochs: usize, seed: u64, res: usize) -> Result<FitResult, JsError> {
    fit_fixture(shape, points, epochs, seed, res).map_err(js)
}
