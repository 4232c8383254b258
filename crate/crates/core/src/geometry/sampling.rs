use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mesh::{PointCloud, TriangleMesh};
use super::point::Point3;
use crate::error::{Error, Result};

/// Uniform point on a triangle from two unit uniforms.
pub fn point_in_triangle(a: Point3, b: Point3, c: Point3, r1: f64, r2: f64) -> Point3 {
    let s = r1.sqrt();
    a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
}

/// Draws `n` points uniformly by area from the mesh surface.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return PointCloud::new(Vec::new());
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let t = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let [a, b, c] = mesh.corners(t);
            point_in_triangle(a, b, c, rng.random(), rng.random())
        })
        .collect();
    PointCloud::new(points)
}

/// Splits `total` into integer shares proportional to `areas` with the
/// largest-remainder method; ties go to the lower index.
pub fn proportional_counts(areas: &[f64], total: usize) -> Result<Vec<usize>> {
    if areas.is_empty() {
        return if total == 0 {
            Ok(Vec::new())
        } else {
            Err(Error::Empty("area list"))
        };
    }
    if let Some(a) = areas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::InvalidArgument(format!("areas must be positive, got {a}")));
    }
    let sum: f64 = areas.iter().sum();
    let quotas: Vec<f64> = areas.iter().map(|a| total as f64 * a / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (quotas[i] - quotas[i].floor(), quotas[j] - quotas[j].floor());
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance::point_to_mesh_distance;

    fn two_triangles() -> TriangleMesh {
        // areas 0.5 and 1.5
        TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(5.0, 0.0, 0.0),
                Point3::new(8.0, 0.0, 0.0),
                Point3::new(5.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap()
    }

    #[test]
    fn empty_and_degenerate() {
        let m = two_triangles();
        assert!(sample_surface(&m, 0, 1).unwrap().is_empty());
        let flat = TriangleMesh::new(vec![Point3::ORIGIN; 3], vec![[0, 1, 2]]).unwrap();
        assert!(sample_surface(&flat, 0, 1).unwrap().is_empty());
        assert!(matches!(sample_surface(&flat, 3, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn samples_lie_on_mesh() {
        let ico = TriangleMesh::icosphere(Point3::new(0.3, -0.2, 1.0), 2.0, 2);
        let cloud = sample_surface(&ico, 500, 9).unwrap();
        for p in cloud.points() {
            assert!(point_to_mesh_distance(*p, &ico).unwrap() < 1e-9);
        }
        assert_eq!(cloud, sample_surface(&ico, 500, 9).unwrap());
        assert_ne!(cloud, sample_surface(&ico, 500, 10).unwrap());
    }

    #[test]
    fn triangle_selection_follows_area() {
        // Expected 2500 / 7500; binomial sigma = sqrt(10000 * 0.25 * 0.75) = 43.3.
        let cloud = sample_surface(&two_triangles(), 10_000, 2024).unwrap();
        let first = cloud.points().iter().filter(|p| p.x < 2.0).count() as f64;
        let sigma = (10_000.0f64 * 0.25 * 0.75).sqrt();
        assert!((first - 2500.0).abs() < 3.0 * sigma, "first triangle got {first}");
    }

    #[test]
    fn proportional_counts_examples() {
        assert_eq!(proportional_counts(&[1.0, 1.0], 10).unwrap(), vec![5, 5]);
        assert_eq!(proportional_counts(&[1.0, 3.0], 8).unwrap(), vec![2, 6]);
        let c = proportional_counts(&[1.0, 1.0, 1.0], 10).unwrap();
        assert_eq!(c.iter().sum::<usize>(), 10);
        assert_eq!(c, vec![4, 3, 3]);
        assert!(proportional_counts(&[], 3).is_err());
        assert!(proportional_counts(&[1.0, 0.0], 3).is_err());
        assert_eq!(proportional_counts(&[2.0, 5.0], 0).unwrap(), vec![0, 0]);
    }

    proptest::proptest! {
        #[test]
        fn proportional_counts_sum(areas in proptest::collection::vec(1e-3f64..1e3, 1..12), total in 0usize..5000) {
            let c = proportional_counts(&areas, total).unwrap();
            proptest::prop_assert_eq!(c.iter().sum::<usize>(), total);
            let sum: f64 = areas.iter().sum();
            for (a, n) in areas.iter().zip(&c) {
                let quota = total as f64 * a / sum;
                proptest::prop_assert!((*n as f64 - quota).abs() < 1.0 + 1e-9);
            }
        }
    }
}
