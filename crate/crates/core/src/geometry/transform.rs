use serde::{Deserialize, Serialize};

use super::mesh::PointCloud;
use super::point::{Aabb, Point3};
use crate::error::{Error, Result};

pub const DEFAULT_HALF_EXTENT: f64 = 0.9;

/// Uniform similarity map from real coordinates into the normalised
/// training cube: `x_norm = scale * (x_real - center)`.
///
/// Distances shrink by `scale` under [`DomainTransform::apply`], so a signed
/// distance measured in the normalised cube is converted back to real units
/// by dividing by `scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainTransform {
    pub scale: f64,
    pub center: Point3,
    pub half_extent: f64,
}

impl Default for DomainTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl DomainTransform {
    pub fn new(scale: f64, center: Point3, half_extent: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "transform scale must be positive, got {scale}"
            )));
        }
        if !(half_extent > 0.0 && half_extent <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "half extent must lie in (0, 1], got {half_extent}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::NonFinite("transform center".into()));
        }
        Ok(Self {
            scale,
            center,
            half_extent,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            center: Point3::ORIGIN,
            half_extent: DEFAULT_HALF_EXTENT,
        }
    }

    /// Centres the cloud's bounding box and scales its longest edge to
    /// `2 * half_extent`.
    pub fn fit(cloud: &PointCloud, half_extent: f64) -> Result<Self> {
        if cloud.len() < 2 {
            return Err(Error::Degenerate(format!(
                "need at least 2 points to normalise, got {}",
                cloud.len()
            )));
        }
        let bounds = cloud.bounds();
        let longest = bounds.extent().max_element();
        if !(longest > 0.0) {
            return Err(Error::Degenerate("point cloud has zero extent".into()));
        }
        Self::new(2.0 * half_extent / longest, bounds.center(), half_extent)
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        (p - self.center) * self.scale
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        p / self.scale + self.center
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map(|p| self.apply(p))
    }

    /// Real-space box that maps onto `[-half_extent, half_extent]^3`, the
    /// region the fitted data occupied.
    pub fn data_bounds(&self) -> Aabb {
        let h = Point3::splat(self.half_extent);
        Aabb::new(self.invert(-h), self.invert(h))
    }

    /// Converts a distance measured in normalised units to real units.
    pub fn distance_to_real(&self, d: f64) -> f64 {
        d / self.scale
    }
}

pub fn fit_transform(cloud: &PointCloud, half_extent: f64) -> Result<DomainTransform> {
    DomainTransform::fit(cloud, half_extent)
}

pub fn apply_transform(t: &DomainTransform, p: Point3) -> Point3 {
    t.apply(p)
}

pub fn invert_transform(t: &DomainTransform, p: Point3) -> Point3 {
    t.invert(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_cloud(h: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(Point3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            ));
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn fit_on_symmetric_cube() {
        let t = fit_transform(&cube_cloud(2.0), 0.9).unwrap();
        assert!((t.scale - 0.45).abs() < 1e-15);
        assert_eq!(t.center, Point3::ORIGIN);

        let t = fit_transform(&cube_cloud(0.9), 0.9).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fitted_points_stay_in_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<_> = (0..500)
            .map(|_| {
                Point3::new(
                    rng.random_range(-3.0..7.0),
                    rng.random_range(1.0..2.0),
                    rng.random_range(-20.0..-19.0),
                )
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let t = fit_transform(&cloud, 0.9).unwrap();
        for p in cloud.points() {
            let q = t.apply(*p);
            assert!(q.abs().max_element() <= 0.9 + 1e-12, "{q:?}");
        }
    }

    #[test]
    fn apply_and_invert() {
        let t = DomainTransform::new(0.5, Point3::new(1.0, 0.0, 0.0), 0.9).unwrap();
        assert_eq!(t.apply(Point3::new(3.0, 0.0, 0.0)), Point3::new(1.0, 0.0, 0.0));
        assert_eq!(t.apply(t.center), Point3::ORIGIN);

        let t = DomainTransform::new(0.37, Point3::new(-4.0, 2.5, 10.0), 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = Point3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
            );
            let q = t.invert(t.apply(p));
            assert!((q - p).norm() <= 1e-12 * p.norm().max(1.0));
            let r = Point3::new(rng.random(), rng.random(), rng.random());
            let scaled = t.apply(p).distance(t.apply(r));
            assert!((scaled - 0.37 * p.distance(r)).abs() < 1e-12 * scaled.max(1.0));
        }
    }

    #[test]
    fn degenerate_cloud_rejected() {
        let cloud = PointCloud::new(vec![Point3::splat(1.0); 5]).unwrap();
        assert!(matches!(fit_transform(&cloud, 0.9), Err(Error::Degenerate(_))));
        let one = PointCloud::new(vec![Point3::splat(1.0)]).unwrap();
        assert!(fit_transform(&one, 0.9).is_err());
    }
}
