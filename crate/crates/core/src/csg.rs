//! Unions of signed distance fields and their evaluation on real-space
//! lattices.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Lattice, MeshDistanceField, Point3, ScalarGrid};
use crate::network::MlpModel;
use crate::synthetic::AnalyticShape;

pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// Hard union of two signed distances.
pub fn union_min(d1: f64, d2: f64) -> f64 {
    d1.min(d2)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendVariant {
    /// `gamma = 0.25 * k * max(k - |d1 - d2|, 0)^2`
    #[default]
    Paper,
    /// `gamma = 0.25 * max(k - |d1 - d2|, 0)^2 / k`, the polynomial smooth
    /// minimum.
    Quilez,
}

impl std::str::FromStr for BlendVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(BlendVariant::Paper),
            "quilez" => Ok(BlendVariant::Quilez),
            _ => Err(Error::InvalidArgument(format!(
                "unknown blend variant {s:?} (expected paper or quilez)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendSpec {
    pub k: f64,
    pub variant: BlendVariant,
}

impl Default for BlendSpec {
    fn default() -> Self {
        Self {
            k: DEFAULT_SMOOTHING,
            variant: BlendVariant::Paper,
        }
    }
}

impl BlendSpec {
    pub fn new(k: f64, variant: BlendVariant) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("smoothing k must be >= 0, got {k}")));
        }
        Ok(Self { k, variant })
    }

    pub fn hard() -> Self {
        Self {
            k: 0.0,
            variant: BlendVariant::Paper,
        }
    }

    /// Amount subtracted from the hard minimum.
    pub fn rounding(&self, d1: f64, d2: f64) -> f64 {
        let k = self.k;
        if k <= 0.0 {
            return 0.0;
        }
        let overlap = (k - (d1 - d2).abs()).max(0.0);
        match self.variant {
            BlendVariant::Paper => 0.25 * k * overlap * overlap,
            BlendVariant::Quilez => 0.25 * overlap * overlap / k,
        }
    }
}

/// Smoothed union: the hard minimum minus a rounding term that vanishes
/// once the two distances differ by at least `k`.
pub fn smooth_union(d1: f64, d2: f64, spec: &BlendSpec) -> f64 {
    union_min(d1, d2) - spec.rounding(d1, d2)
}

/// Anything that yields a signed distance (real units) at real-space
/// points.
#[derive(Clone, Copy, Debug)]
pub enum SdfSource<'a> {
    Analytic(&'a AnalyticShape),
    /// One output channel of a fitted network, queried through the
    /// network's stored normalisation.
    Model { model: &'a MlpModel, channel: usize },
    /// Trilinear interpolation of a sampled grid.
    Grid(&'a ScalarGrid),
    /// Exact signed distance to a closed mesh.
    Mesh(&'a MeshDistanceField),
}

const CHUNK: usize = 2048;

impl<'a> SdfSource<'a> {
    pub fn model(model: &'a MlpModel, channel: usize) -> Result<Self> {
        model.check_channel(channel)?;
        Ok(SdfSource::Model { model, channel })
    }

    pub fn value(&self, p: Point3) -> f64 {
        self.values(&[p])[0]
    }

    /// Signed distances at many points; results do not depend on how the
    /// work is split across threads.
    pub fn values(&self, points: &[Point3]) -> Vec<f64> {
        let eval = |chunk: &[Point3]| -> Vec<f64> {
            match *self {
                SdfSource::Analytic(shape) => chunk.iter().map(|&p| shape.sdf(p)).collect(),
                SdfSource::Grid(grid) => chunk.iter().map(|&p| grid.sample(p)).collect(),
                SdfSource::Mesh(field) => chunk.iter().map(|&p| field.signed_distance(p)).collect(),
                SdfSource::Model { model, channel } => {
                    let t = model.transform;
                    let local: Vec<Point3> = chunk.iter().map(|&p| t.apply(p)).collect();
                    let out = model.forward_batch(&local);
                    out.column(channel).iter().map(|&v| t.distance_to_real(v)).collect()
                }
            }
        };
        #[cfg(feature = "parallel")]
        let chunks: Vec<Vec<f64>> = points.par_chunks(CHUNK).map(eval).collect();
        #[cfg(not(feature = "parallel"))]
        let chunks: Vec<Vec<f64>> = points.chunks(CHUNK).map(eval).collect();
        chunks.concat()
    }

    /// Whether `p` lies where the source is defined: inside the training
    /// cube `[-1, 1]^3` for models, everywhere otherwise.
    pub fn in_domain(&self, p: Point3) -> bool {
        match *self {
            SdfSource::Model { model, .. } => model.transform.apply(p).abs().max_element() <= 1.0,
            _ => true,
        }
    }
}

/// Samples `source` at every lattice point.
pub fn evaluate_on_grid(source: &SdfSource<'_>, lattice: &Lattice) -> Result<ScalarGrid> {
    Ok(evaluate_with_mask(source, lattice)?.0)
}

/// Like [`evaluate_on_grid`], also returning which lattice points fall
/// inside the source's domain. Points outside keep the extrapolated value.
pub fn evaluate_with_mask(source: &SdfSource<'_>, lattice: &Lattice) -> Result<(ScalarGrid, Vec<bool>)> {
    let positions = lattice.positions();
    let values: Vec<f32> = source.values(&positions).into_iter().map(|v| v as f32).collect();
    let mask = positions.iter().map(|&p| source.in_domain(p)).collect();
    Ok((ScalarGrid::new(*lattice, values)?, mask))
}

/// Pointwise left fold of [`smooth_union`] over grids sharing a lattice.
pub fn blend_grids(grids: &[ScalarGrid], spec: &BlendSpec) -> Result<ScalarGrid> {
    if grids.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "blending needs at least 2 grids, got {}",
            grids.len()
        )));
    }
    let lattice = grids[0].lattice();
    if grids.iter().any(|g| g.lattice() != lattice) {
        return Err(Error::LatticeMismatch);
    }
    let mut acc: Vec<f64> = grids[0].values().iter().map(|&v| v as f64).collect();
    for g in &grids[1..] {
        for (a, &v) in acc.iter_mut().zip(g.values()) {
            *a = smooth_union(*a, v as f64, spec);
        }
    }
    ScalarGrid::new(*lattice, acc.into_iter().map(|v| v as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, DomainTransform};
    use crate::network::MlpArchitecture;
    use proptest::prelude::*;

    fn cube(h: f64) -> Aabb {
        Aabb::new(Point3::splat(-h), Point3::splat(h))
    }

    #[test]
    fn hard_union() {
        assert_eq!(union_min(0.3, -0.2), -0.2);
        assert_eq!(union_min(0.7, 0.7), 0.7);
    }

    #[test]
    fn worked_smooth_union_value() {
        // gamma = 0.25 * 0.1 * 0.07^2 = 1.225e-4
        let v = smooth_union(0.02, 0.05, &BlendSpec::new(0.1, BlendVariant::Paper).unwrap());
        assert!((v - 0.0198775).abs() < 1e-15, "{v}");
        let spec = BlendSpec::new(0.1, BlendVariant::Paper).unwrap();
        assert_eq!(smooth_union(0.3, 0.1, &spec), 0.1);
        let q = smooth_union(0.02, 0.05, &BlendSpec::new(0.1, BlendVariant::Quilez).unwrap());
        assert!((q - (0.02 - 0.25 * 0.0049 / 0.1)).abs() < 1e-15);
        assert!(BlendSpec::new(-1.0, BlendVariant::Paper).is_err());
    }

    proptest! {
        #[test]
        fn smooth_union_properties(d1 in -2.0f64..2.0, d2 in -2.0f64..2.0, k in 0.0f64..1.0) {
            for variant in [BlendVariant::Paper, BlendVariant::Quilez] {
                let spec = BlendSpec { k, variant };
                let s = smooth_union(d1, d2, &spec);
                prop_assert_eq!(s, smooth_union(d2, d1, &spec));
                prop_assert!(s <= union_min(d1, d2));
                prop_assert!(union_min(d1, d2) <= d1.max(d2));
                if (d1 - d2).abs() >= k {
                    prop_assert_eq!(s, union_min(d1, d2));
                }
            }
            let hard = BlendSpec::hard();
            prop_assert_eq!(smooth_union(d1, d2, &hard), union_min(d1, d2));
            let paper = BlendSpec { k, variant: BlendVariant::Paper };
            prop_assert!((smooth_union(d1, d2, &paper) - union_min(d1, d2)).abs() <= 0.25 * k * k * k + 1e-15);
        }
    }

    #[test]
    fn grid_union_of_spheres_is_pointwise_min() {
        let a = AnalyticShape::sphere(Point3::ORIGIN, 0.4);
        let b = AnalyticShape::sphere(Point3::new(0.5, 0.0, 0.0), 0.4);
        let lattice = Lattice::cubic(17, cube(1.0)).unwrap();
        let ga = evaluate_on_grid(&SdfSource::Analytic(&a), &lattice).unwrap();
        let gb = evaluate_on_grid(&SdfSource::Analytic(&b), &lattice).unwrap();
        let u = blend_grids(&[ga, gb], &BlendSpec::hard()).unwrap();
        for (n, v) in u.values().iter().enumerate() {
            let p = lattice.position_of(n);
            assert_eq!(*v, a.sdf(p).min(b.sdf(p)) as f32);
        }
    }

    #[test]
    fn analytic_grid_values() {
        let s = AnalyticShape::sphere(Point3::ORIGIN, 1.0);
        let lattice = Lattice::cubic(33, cube(2.0)).unwrap();
        let g = evaluate_on_grid(&SdfSource::Analytic(&s), &lattice).unwrap();
        assert_eq!(g.get(16, 16, 16), -1.0);
        let corner = lattice.position(32, 0, 32);
        assert_eq!(g.get(32, 0, 32), s.sdf(corner) as f32);
        assert_eq!(g.get(0, 0, 0), s.sdf(Point3::splat(-2.0)) as f32);
    }

    #[test]
    fn model_values_are_rescaled() {
        // constant network output 0.2 everywhere
        let arch = MlpArchitecture::new(1, 2, 1).with_skip(None);
        let mut params = vec![0.0; arch.parameter_count()];
        let last = arch.layer_shapes()[1];
        params[last.bias_range()][0] = 0.2;
        let model = MlpModel::from_params(arch, params)
            .unwrap()
            .with_transform(DomainTransform::new(0.5, Point3::new(3.0, 0.0, 0.0), 0.9).unwrap());
        let src = SdfSource::model(&model, 0).unwrap();
        assert!((src.value(Point3::new(3.5, 1.0, -1.0)) - 0.4).abs() < 1e-15);
        assert!(src.in_domain(Point3::new(4.9, 0.0, 0.0)));
        assert!(!src.in_domain(Point3::new(5.1, 0.0, 0.0)));
        assert!(SdfSource::model(&model, 1).is_err());
        let lattice = Lattice::cubic(3, Aabb::new(Point3::new(0.0, -1.0, -1.0), Point3::new(6.0, 1.0, 1.0))).unwrap();
        let (g, mask) = evaluate_with_mask(&src, &lattice).unwrap();
        assert!(g.values().iter().all(|&v| (v - 0.4).abs() < 1e-7));
        assert_eq!(mask.iter().filter(|m| **m).count(), 9);
    }

    #[test]
    fn blend_checks() {
        let lattice = Lattice::cubic(4, cube(1.0)).unwrap();
        let other = Lattice::cubic(5, cube(1.0)).unwrap();
        let g = ScalarGrid::filled(lattice, 1.0);
        assert!(matches!(
            blend_grids(&[g.clone(), ScalarGrid::filled(other, 1.0)], &BlendSpec::hard()),
            Err(Error::LatticeMismatch)
        ));
        assert!(blend_grids(std::slice::from_ref(&g), &BlendSpec::hard()).is_err());
        assert_eq!(blend_grids(&[g.clone(), g.clone()], &BlendSpec::hard()).unwrap(), g);
    }

    #[test]
    fn three_way_hard_blend_is_min() {
        let lattice = Lattice::cubic(9, cube(1.0)).unwrap();
        let grids: Vec<ScalarGrid> = (0..3)
            .map(|s| {
                let vals = (0..lattice.len()).map(|i| ((i * (s + 3)) as f32 * 0.61).sin()).collect();
                ScalarGrid::new(lattice, vals).unwrap()
            })
            .collect();
        let blended = blend_grids(&grids, &BlendSpec::hard()).unwrap();
        for i in 0..lattice.len() {
            let m = grids.iter().map(|g| g.values()[i]).fold(f32::INFINITY, f32::min);
            assert_eq!(blended.values()[i], m);
        }
    }

    #[test]
    fn analytic_grid_is_discretely_eikonal() {
        let s = AnalyticShape::sphere(Point3::new(0.1, 0.0, -0.05), 0.6);
        let lattice = Lattice::cubic(41, cube(1.0)).unwrap();
        let g = evaluate_on_grid(&SdfSource::Analytic(&s), &lattice).unwrap();
        let h = lattice.spacing().x;
        let mut checked = 0;
        for k in 2..39 {
            for j in 2..39 {
                for i in 2..39 {
                    let p = lattice.position(i, j, k);
                    if s.sdf(p).abs() < 2.0 * h || (p - Point3::new(0.1, 0.0, -0.05)).norm() < 2.0 * h {
                        continue;
                    }
                    let n = g.central_gradient(i, j, k).norm();
                    assert!((0.95..=1.05).contains(&n), "{n} at {p:?}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 10_000);
    }
}
