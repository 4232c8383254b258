//! Dice overlap, average surface distance and nesting checks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csg::{evaluate_on_grid, SdfSource};
use crate::error::{Error, Result};
use crate::extraction::marching_cubes;
use crate::geometry::{Aabb, Lattice, MeshDistanceField, PointCloud, TriangleMesh};
use crate::network::MlpModel;

pub const DEFAULT_DICE_DIMS: usize = 96;
pub const DEFAULT_ASD_DIMS: usize = 128;
pub const DEFAULT_NESTING_TOLERANCE: f64 = 1e-3;
/// Fraction of the largest extent added around shapes on each side when
/// building an evaluation lattice.
pub const DEFAULT_PADDING: f64 = 0.1;

/// Cubic lattice with `dims` points per axis over `bounds` padded by 10%.
pub fn evaluation_lattice(bounds: Aabb, dims: usize) -> Result<Lattice> {
    Lattice::cubic(dims, bounds.padded(DEFAULT_PADDING))
}

/// Lattice points where the source is strictly negative.
pub fn voxelize(source: &SdfSource<'_>, lattice: &Lattice) -> Vec<bool> {
    source.values(&lattice.positions()).into_iter().map(|v| v < 0.0).collect()
}

/// Dice coefficient of two occupancy masks.
pub fn dice_masks(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LatticeMismatch);
    }
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        na += x as usize;
        nb += y as usize;
        both += (x && y) as usize;
    }
    if na + nb == 0 {
        return Err(Error::Empty("both shapes are empty on the lattice"));
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Dice similarity of the interiors (`value < 0`) of two fields sampled at
/// the lattice points.
pub fn dice(a: &SdfSource<'_>, b: &SdfSource<'_>, lattice: &Lattice) -> Result<f64> {
    dice_masks(&voxelize(a, lattice), &voxelize(b, lattice))
}

/// Mean distance from each held-out point to `reconstruction`.
pub fn average_surface_distance(reconstruction: &TriangleMesh, heldout: &PointCloud) -> Result<f64> {
    if heldout.is_empty() {
        return Err(Error::Empty("held-out cloud"));
    }
    if reconstruction.is_empty() {
        return Err(Error::Empty("reconstructed surface has no triangles"));
    }
    let field = MeshDistanceField::new_unsigned(reconstruction.clone())?;
    let sum: f64 = heldout.points().iter().map(|&p| field.distance(p)).sum();
    Ok(sum / heldout.len() as f64)
}

/// Average surface distance to the zero level set of `source` extracted on
/// `lattice`.
pub fn average_surface_distance_to(source: &SdfSource<'_>, lattice: &Lattice, heldout: &PointCloud) -> Result<f64> {
    let mesh = marching_cubes(&evaluate_on_grid(source, lattice)?, 0.0);
    average_surface_distance(&mesh, heldout)
}

/// Mean `|f(y)|` over the held-out points; equals the surface distance only
/// where `f` is an exact distance.
pub fn average_field_distance(source: &SdfSource<'_>, heldout: &PointCloud) -> Result<f64> {
    if heldout.is_empty() {
        return Err(Error::Empty("held-out cloud"));
    }
    let values = source.values(heldout.points());
    Ok(values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestingReport {
    /// Fraction of lattice points where some consecutive pair is out of
    /// order by more than the tolerance.
    pub fraction: f64,
    /// Largest `f_outer - f_inner` over all points and pairs; `<= 0` means
    /// perfectly ordered.
    pub max_violation: f64,
}

/// Checks `f_0 <= f_1 <= ...` for sources listed from outermost to
/// innermost surface.
pub fn nesting_violation_of(sources: &[SdfSource<'_>], lattice: &Lattice, tolerance: f64) -> Result<NestingReport> {
    if sources.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "nesting needs at least 2 fields, got {}",
            sources.len()
        )));
    }
    let positions = lattice.positions();
    let fields: Vec<Vec<f64>> = sources.iter().map(|s| s.values(&positions)).collect();
    let mut violated = 0usize;
    let mut max_violation = f64::NEG_INFINITY;
    for i in 0..positions.len() {
        let mut bad = false;
        for pair in fields.windows(2) {
            let v = pair[0][i] - pair[1][i];
            max_violation = max_violation.max(v);
            bad |= v > tolerance;
        }
        violated += bad as usize;
    }
    Ok(NestingReport {
        fraction: violated as f64 / positions.len() as f64,
        max_violation,
    })
}

/// Nesting check on model channels given outer to inner.
pub fn nesting_violation(model: &MlpModel, outer_to_inner: &[usize], lattice: &Lattice) -> Result<NestingReport> {
    let sources = outer_to_inner
        .iter()
        .map(|&c| SdfSource::model(model, c))
        .collect::<Result<Vec<_>>>()?;
    nesting_violation_of(&sources, lattice, DEFAULT_NESTING_TOLERANCE)
}

/// Random disjoint split into `n_train` training points and the rest, each
/// kept in input order.
pub fn split_train_heldout(cloud: &PointCloud, n_train: usize, seed: u64) -> Result<(PointCloud, PointCloud)> {
    if n_train >= cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {n_train} of {} points for training and hold any out",
            cloud.len()
        )));
    }
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_mask = vec![false; cloud.len()];
    for &i in &order[..n_train] {
        train_mask[i] = true;
    }
    let (mut train, mut heldout) = (Vec::with_capacity(n_train), Vec::new());
    for (p, keep) in cloud.points().iter().zip(train_mask) {
        if keep {
            train.push(*p);
        } else {
            heldout.push(*p);
        }
    }
    Ok((PointCloud::new(train)?, PointCloud::new(heldout)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_surface, Point3};
    use crate::synthetic::{nested_wall_fixture, sample_analytic_surface, AnalyticShape};
    use std::f64::consts::PI;

    fn cube(h: f64) -> Aabb {
        Aabb::new(Point3::splat(-h), Point3::splat(h))
    }

    #[test]
    fn dice_trivial_cases() {
        let a = AnalyticShape::sphere(Point3::ORIGIN, 0.5);
        let far = AnalyticShape::sphere(Point3::new(2.0, 0.0, 0.0), 0.5);
        let l = Lattice::cubic(32, cube(3.0)).unwrap();
        assert_eq!(dice(&SdfSource::Analytic(&a), &SdfSource::Analytic(&a), &l).unwrap(), 1.0);
        assert_eq!(dice(&SdfSource::Analytic(&a), &SdfSource::Analytic(&far), &l).unwrap(), 0.0);
        let tiny = AnalyticShape::sphere(Point3::new(0.01, 0.01, 0.01), 0.001);
        assert!(dice(&SdfSource::Analytic(&tiny), &SdfSource::Analytic(&tiny), &l).is_err());
    }

    fn lens_dice(d: f64) -> f64 {
        // two unit spheres at distance d
        let lens = PI * (4.0 + d) * (2.0 - d).powi(2) / 12.0;
        lens / (4.0 / 3.0 * PI)
    }

    fn shifted_dice(n: usize) -> f64 {
        let a = AnalyticShape::sphere(Point3::ORIGIN, 1.0);
        let b = AnalyticShape::sphere(Point3::new(0.1, 0.0, 0.0), 1.0);
        let l = Lattice::cubic(n, cube(1.5)).unwrap();
        dice(&SdfSource::Analytic(&a), &SdfSource::Analytic(&b), &l).unwrap()
    }

    #[test]
    fn shifted_spheres_match_counts_and_lens_volume() {
        let l = Lattice::cubic(96, cube(1.5)).unwrap();
        let (mut na, mut nb, mut both) = (0.0, 0.0, 0.0);
        for p in l.positions() {
            let ia = p.norm_squared() < 1.0;
            let ib = (p - Point3::new(0.1, 0.0, 0.0)).norm_squared() < 1.0;
            na += ia as u8 as f64;
            nb += ib as u8 as f64;
            both += (ia && ib) as u8 as f64;
        }
        let d = shifted_dice(96);
        assert!((d - 2.0 * both / (na + nb)).abs() < 1e-12);
        let h = l.spacing().x;
        // two voxels' worth of relative volume
        let tol = 2.0 * h * h * h / (4.0 / 3.0 * PI) * (4.0 * PI / (h * h));
        assert!((d - lens_dice(0.1)).abs() < tol, "{d} vs {}", lens_dice(0.1));
    }

    #[test]
    fn dice_converges_with_resolution() {
        let exact = lens_dice(0.1);
        let errors: Vec<f64> = [32, 64, 96].iter().map(|&n| (shifted_dice(n) - exact).abs()).collect();
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    }

    #[test]
    fn dice_is_symmetric() {
        let a = AnalyticShape::torus(Point3::ORIGIN, 0.5, 0.2);
        let b = AnalyticShape::capsule(Point3::new(-0.7, 0.0, 0.0), Point3::new(0.6, 0.3, 0.0), 0.25);
        let l = Lattice::cubic(40, cube(1.0)).unwrap();
        let ab = dice(&SdfSource::Analytic(&a), &SdfSource::Analytic(&b), &l).unwrap();
        let ba = dice(&SdfSource::Analytic(&b), &SdfSource::Analytic(&a), &l).unwrap();
        assert_eq!(ab, ba);
        assert!(ab > 0.0 && ab < 1.0);
    }

    #[test]
    fn asd_to_own_surface_is_zero() {
        let s = AnalyticShape::sphere(Point3::ORIGIN, 0.5);
        let l = Lattice::cubic(24, cube(1.0)).unwrap();
        let mesh = marching_cubes(&evaluate_on_grid(&SdfSource::Analytic(&s), &l).unwrap(), 0.0);
        let held = sample_surface(&mesh, 200, 3).unwrap();
        assert!(average_surface_distance(&mesh, &held).unwrap() < 1e-9);
    }

    #[test]
    fn asd_of_exact_sphere_below_cell_diagonal() {
        let s = AnalyticShape::sphere(Point3::ORIGIN, 0.6);
        let l = Lattice::cubic(DEFAULT_ASD_DIMS, cube(1.0)).unwrap();
        let held = sample_analytic_surface(&s, 500, 4).unwrap();
        let asd = average_surface_distance_to(&SdfSource::Analytic(&s), &l, &held).unwrap();
        assert!(asd < l.cell_diagonal(), "{asd}");
    }

    #[test]
    fn asd_measures_offset() {
        let recon = AnalyticShape::sphere(Point3::ORIGIN, 0.55);
        let truth = AnalyticShape::sphere(Point3::ORIGIN, 0.5);
        let held = sample_analytic_surface(&truth, 500, 8).unwrap();
        let l = Lattice::cubic(DEFAULT_ASD_DIMS, cube(1.0)).unwrap();
        let asd = average_surface_distance_to(&SdfSource::Analytic(&recon), &l, &held).unwrap();
        assert!((asd - 0.05).abs() < 0.02 * 0.05, "{asd}");
        let field = average_field_distance(&SdfSource::Analytic(&recon), &held).unwrap();
        assert!((field - 0.05).abs() < 1e-12);
    }

    #[test]
    fn asd_is_translation_invariant() {
        let s = AnalyticShape::torus(Point3::ORIGIN, 0.5, 0.15);
        let l = Lattice::cubic(48, cube(1.0)).unwrap();
        let mesh = marching_cubes(&evaluate_on_grid(&SdfSource::Analytic(&s), &l).unwrap(), 0.0);
        let held = sample_analytic_surface(&s, 300, 2).unwrap();
        let shift = Point3::new(0.3, -1.2, 4.0);
        let a = average_surface_distance(&mesh, &held).unwrap();
        let b = average_surface_distance(&mesh.map_vertices(|p| p + shift), &held.map(|p| p + shift)).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn asd_errors() {
        let held = PointCloud::new(vec![Point3::ORIGIN]).unwrap();
        assert!(average_surface_distance(&TriangleMesh::default(), &held).is_err());
        let ico = TriangleMesh::icosphere(Point3::ORIGIN, 1.0, 1);
        assert!(average_surface_distance(&ico, &PointCloud::default()).is_err());
    }

    #[test]
    fn nesting_of_analytic_walls() {
        let [lumen, inner, outer] = nested_wall_fixture(0.3, 0.2, 0.2).unwrap();
        let l = Lattice::cubic(32, cube(1.0)).unwrap();
        let ordered = [SdfSource::Analytic(&outer), SdfSource::Analytic(&inner), SdfSource::Analytic(&lumen)];
        let r = nesting_violation_of(&ordered, &l, DEFAULT_NESTING_TOLERANCE).unwrap();
        assert_eq!(r.fraction, 0.0);
        assert!(r.max_violation <= 0.0);
        let swapped = [SdfSource::Analytic(&inner), SdfSource::Analytic(&outer), SdfSource::Analytic(&lumen)];
        let r = nesting_violation_of(&swapped, &l, DEFAULT_NESTING_TOLERANCE).unwrap();
        assert!(r.fraction > 0.0 && r.max_violation > 0.0);
        assert!(nesting_violation_of(&ordered[..1], &l, 1e-3).is_err());
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let pts: Vec<Point3> = (0..300).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let cloud = PointCloud::new(pts).unwrap();
        let (train, held) = split_train_heldout(&cloud, 200, 5).unwrap();
        assert_eq!((train.len(), held.len()), (200, 100));
        let mut all: Vec<f64> = train.points().iter().chain(held.points()).map(|p| p.x).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..300).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(split_train_heldout(&cloud, 200, 5).unwrap(), (train.clone(), held));
        assert_ne!(split_train_heldout(&cloud, 200, 6).unwrap().0, train);
        assert!(split_train_heldout(&cloud, 300, 5).is_err());
    }
}
