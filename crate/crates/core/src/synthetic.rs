//! Analytic shapes with exact signed distances, used as ground truth.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, PointCloud, TriangleMesh};

/// Points within this distance of the zero level set count as on it.
pub const SURFACE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticShape {
    Sphere { center: Point3, radius: f64 },
    /// Segment `a`-`b` swept by a ball.
    Capsule { a: Point3, b: Point3, radius: f64 },
    /// Ring around the z axis through `center`.
    Torus { center: Point3, major: f64, minor: f64 },
    /// Dilation by `delta` (erosion when negative).
    Offset { shape: Box<AnalyticShape>, delta: f64 },
    /// Minimum of the parts: exact outside, a bound inside.
    Union { shapes: Vec<AnalyticShape> },
}

fn segment_distance(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Two unit vectors completing `axis` to an orthonormal frame.
fn frame(axis: Point3) -> (Point3, Point3) {
    let helper = if axis.x.abs() < 0.9 {
        Point3::new(1.0, 0.0, 0.0)
    } else {
        Point3::new(0.0, 1.0, 0.0)
    };
    let e1 = axis.cross(helper).normalized();
    (e1, axis.cross(e1))
}

fn unit_vector(rng: &mut impl Rng) -> Point3 {
    loop {
        let v = Point3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

impl AnalyticShape {
    pub fn sphere(center: Point3, radius: f64) -> Self {
        AnalyticShape::Sphere { center, radius }
    }

    pub fn capsule(a: Point3, b: Point3, radius: f64) -> Self {
        AnalyticShape::Capsule { a, b, radius }
    }

    pub fn torus(center: Point3, major: f64, minor: f64) -> Self {
        AnalyticShape::Torus { center, major, minor }
    }

    pub fn offset(self, delta: f64) -> Self {
        AnalyticShape::Offset {
            shape: Box::new(self),
            delta,
        }
    }

    pub fn union(shapes: Vec<AnalyticShape>) -> Self {
        AnalyticShape::Union { shapes }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            AnalyticShape::Sphere { center, radius } | AnalyticShape::Capsule { a: center, radius, .. } => {
                if let AnalyticShape::Capsule { b, .. } = self {
                    if !b.is_finite() {
                        return Err(Error::NonFinite("capsule endpoint".into()));
                    }
                }
                if !center.is_finite() {
                    return Err(Error::NonFinite("shape position".into()));
                }
                positive("radius", *radius)
            }
            AnalyticShape::Torus { center, major, minor } => {
                if !center.is_finite() {
                    return Err(Error::NonFinite("torus center".into()));
                }
                positive("major radius", *major)?;
                positive("minor radius", *minor)
            }
            AnalyticShape::Offset { .. } => self.simplified().validate(),
            AnalyticShape::Union { shapes } => {
                if shapes.is_empty() {
                    return Err(Error::Empty("union of no shapes"));
                }
                shapes.iter().try_for_each(AnalyticShape::validate)
            }
        }
    }

    /// Signed distance at `p`.
    pub fn sdf(&self, p: Point3) -> f64 {
        match self {
            AnalyticShape::Sphere { center, radius } => (p - *center).norm() - radius,
            AnalyticShape::Capsule { a, b, radius } => segment_distance(p, *a, *b) - radius,
            AnalyticShape::Torus { center, major, minor } => {
                let d = p - *center;
                let q = (d.x * d.x + d.y * d.y).sqrt() - major;
                (q * q + d.z * d.z).sqrt() - minor
            }
            AnalyticShape::Offset { shape, delta } => shape.sdf(p) - delta,
            AnalyticShape::Union { shapes } => shapes.iter().map(|s| s.sdf(p)).fold(f64::INFINITY, f64::min),
        }
    }

    /// Tight box around the zero level set.
    pub fn bounds(&self) -> Aabb {
        match self.simplified() {
            AnalyticShape::Sphere { center, radius } => {
                Aabb::new(center - Point3::splat(radius), center + Point3::splat(radius))
            }
            AnalyticShape::Capsule { a, b, radius } => {
                Aabb::new(a.min(b) - Point3::splat(radius), a.max(b) + Point3::splat(radius))
            }
            AnalyticShape::Torus { center, major, minor } => {
                let r = Point3::new(major + minor, major + minor, minor);
                Aabb::new(center - r, center + r)
            }
            AnalyticShape::Union { shapes } => shapes.iter().fold(Aabb::empty(), |acc, s| acc.union(s.bounds())),
            AnalyticShape::Offset { .. } => unreachable!("simplified shapes have no offsets"),
        }
    }

    /// Equivalent shape with offsets folded into the primitives' radii.
    pub fn simplified(&self) -> AnalyticShape {
        fn grow(shape: &AnalyticShape, delta: f64) -> AnalyticShape {
            match shape {
                AnalyticShape::Sphere { center, radius } => AnalyticShape::sphere(*center, radius + delta),
                AnalyticShape::Capsule { a, b, radius } => AnalyticShape::capsule(*a, *b, radius + delta),
                AnalyticShape::Torus { center, major, minor } => AnalyticShape::torus(*center, *major, minor + delta),
                AnalyticShape::Offset { shape, delta: inner } => grow(shape, delta + inner),
                AnalyticShape::Union { shapes } => AnalyticShape::union(shapes.iter().map(|s| grow(s, delta)).collect()),
            }
        }
        grow(self, 0.0)
    }

    /// Closed-form surface area of a primitive; the sum over parts for
    /// unions (overlaps counted twice).
    pub fn surface_area(&self) -> f64 {
        match self.simplified() {
            AnalyticShape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            AnalyticShape::Capsule { a, b, radius } => 2.0 * PI * radius * (b - a).norm() + 4.0 * PI * radius * radius,
            AnalyticShape::Torus { major, minor, .. } => 4.0 * PI * PI * major * minor,
            AnalyticShape::Union { shapes } => shapes.iter().map(AnalyticShape::surface_area).sum(),
            AnalyticShape::Offset { .. } => unreachable!("simplified shapes have no offsets"),
        }
    }

    /// Area-uniform point on a simplified primitive.
    fn sample_primitive(&self, rng: &mut impl Rng) -> Point3 {
        match *self {
            AnalyticShape::Sphere { center, radius } => center + unit_vector(rng) * radius,
            AnalyticShape::Capsule { a, b, radius } => {
                let axis = b - a;
                let len = axis.norm();
                let side = 2.0 * PI * radius * len;
                let caps = 4.0 * PI * radius * radius;
                if len > 0.0 && rng.random::<f64>() * (side + caps) < side {
                    let dir = axis / len;
                    let (e1, e2) = frame(dir);
                    let phi = TAU * rng.random::<f64>();
                    a + axis * rng.random::<f64>() + (e1 * phi.cos() + e2 * phi.sin()) * radius
                } else {
                    let u = unit_vector(rng);
                    let end = if u.dot(axis) > 0.0 { b } else { a };
                    end + u * radius
                }
            }
            AnalyticShape::Torus { center, major, minor } => {
                // tube angle density proportional to the local ring radius
                let theta = loop {
                    let t = TAU * rng.random::<f64>();
                    if rng.random::<f64>() * (major + minor) <= major + minor * t.cos() {
                        break t;
                    }
                };
                let phi = TAU * rng.random::<f64>();
                let ring = major + minor * theta.cos();
                center + Point3::new(ring * phi.cos(), ring * phi.sin(), minor * theta.sin())
            }
            _ => unreachable!("only primitives are sampled directly"),
        }
    }
}

pub fn analytic_sdf(shape: &AnalyticShape, p: Point3) -> f64 {
    shape.sdf(p)
}

/// `n` approximately area-uniform points on the zero level set of `shape`.
/// Unions are sampled part by part (weighted by area), discarding points
/// that end up inside another part.
pub fn sample_analytic_surface(shape: &AnalyticShape, n: usize, seed: u64) -> Result<PointCloud> {
    shape.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let simple = shape.simplified();
    fn flatten<'a>(s: &'a AnalyticShape, out: &mut Vec<&'a AnalyticShape>) {
        match s {
            AnalyticShape::Union { shapes } => shapes.iter().for_each(|c| flatten(c, out)),
            _ => out.push(s),
        }
    }
    let mut parts = Vec::new();
    flatten(&simple, &mut parts);
    let areas: Vec<f64> = parts.iter().map(|s| s.surface_area()).collect();
    let total: f64 = areas.iter().sum();

    let max_attempts = 1000 * n + 1000;
    let mut points = Vec::with_capacity(n);
    let mut attempts = 0;
    while points.len() < n {
        if attempts == max_attempts {
            return Err(Error::Sampling(format!(
                "only {} of {n} surface points accepted after {attempts} attempts",
                points.len()
            )));
        }
        attempts += 1;
        let mut pick = rng.random::<f64>() * total;
        let mut part = parts[parts.len() - 1];
        for (s, a) in parts.iter().zip(&areas) {
            if pick < *a {
                part = s;
                break;
            }
            pick -= a;
        }
        let p = part.sample_primitive(&mut rng);
        if simple.sdf(p).abs() < SURFACE_TOLERANCE {
            points.push(p);
        }
    }
    PointCloud::new(points)
}

/// Lumen, inner wall and outer wall as concentric spheres at the origin,
/// in that order (so their distances decrease channel by channel).
pub fn nested_wall_fixture(r_lumen: f64, wall1: f64, wall2: f64) -> Result<[AnalyticShape; 3]> {
    if !(r_lumen > 0.0 && wall1 > 0.0 && wall2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nested walls need positive radius and thicknesses, got {r_lumen}, {wall1}, {wall2}"
        )));
    }
    Ok([
        AnalyticShape::sphere(Point3::ORIGIN, r_lumen),
        AnalyticShape::sphere(Point3::ORIGIN, r_lumen + wall1),
        AnalyticShape::sphere(Point3::ORIGIN, r_lumen + wall1 + wall2),
    ])
}

/// A trunk and two branches meeting at the trunk's end point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bifurcation {
    pub trunk_start: Point3,
    pub junction: Point3,
    pub trunk_radius: f64,
    pub branch_ends: [Point3; 2],
    pub branch_radii: [f64; 2],
}

impl Default for Bifurcation {
    /// Y-shaped tree filling most of `[-1, 1]^3`.
    fn default() -> Self {
        Self {
            trunk_start: Point3::new(0.0, -0.8, 0.0),
            junction: Point3::new(0.0, 0.0, 0.0),
            trunk_radius: 0.2,
            branch_ends: [Point3::new(-0.55, 0.65, 0.0), Point3::new(0.55, 0.65, 0.1)],
            branch_radii: [0.14, 0.14],
        }
    }
}

impl Bifurcation {
    pub fn capsules(&self) -> [AnalyticShape; 3] {
        [
            AnalyticShape::capsule(self.trunk_start, self.junction, self.trunk_radius),
            AnalyticShape::capsule(self.junction, self.branch_ends[0], self.branch_radii[0]),
            AnalyticShape::capsule(self.junction, self.branch_ends[1], self.branch_radii[1]),
        ]
    }
}

/// Union of the three capsules of `spec`.
pub fn bifurcation_fixture(spec: &Bifurcation) -> Result<AnalyticShape> {
    let shape = AnalyticShape::union(spec.capsules().to_vec());
    shape.validate()?;
    Ok(shape)
}

/// Names accepted by [`named_fixture`].
pub const FIXTURE_NAMES: [&str; 10] = [
    "sphere",
    "capsule",
    "torus",
    "bifurcation",
    "trunk",
    "left-branch",
    "right-branch",
    "lumen",
    "inner-wall",
    "outer-wall",
];

/// The capsule used for robustness sweeps.
pub fn capsule_fixture() -> AnalyticShape {
    AnalyticShape::capsule(Point3::new(-0.6, 0.0, 0.0), Point3::new(0.6, 0.0, 0.0), 0.25)
}

/// Looks up a built-in shape: `sphere` (unit sphere), `capsule`, `torus`,
/// the Y-shaped `bifurcation` and its parts `trunk`, `left-branch` and
/// `right-branch`, and the concentric `lumen`, `inner-wall` and
/// `outer-wall` spheres of radii 0.3, 0.5 and 0.7. A string starting with
/// `{` is parsed as a JSON shape instead.
pub fn named_fixture(name: &str) -> Result<AnalyticShape> {
    let trimmed = name.trim();
    if trimmed.starts_with('{') {
        let shape: AnalyticShape = serde_json::from_str(trimmed)
            .map_err(|e| Error::InvalidArgument(format!("bad shape JSON: {e}")))?;
        shape.validate()?;
        return Ok(shape);
    }
    let tree = Bifurcation::default();
    let [trunk, left, right] = tree.capsules();
    let [lumen, inner, outer] = nested_wall_fixture(0.3, 0.2, 0.2)?;
    Ok(match trimmed {
        "sphere" => AnalyticShape::sphere(Point3::ORIGIN, 1.0),
        "capsule" => capsule_fixture(),
        "torus" => AnalyticShape::torus(Point3::ORIGIN, 0.5, 0.15),
        "bifurcation" => bifurcation_fixture(&tree)?,
        "trunk" => trunk,
        "left-branch" => left,
        "right-branch" => right,
        "lumen" => lumen,
        "inner-wall" => inner,
        "outer-wall" => outer,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown shape {other:?}; expected one of {} or a JSON object",
                FIXTURE_NAMES.join(", ")
            )))
        }
    })
}

/// Closed triangulation of a capsule: `segments` around the axis and
/// `rings` latitude steps per hemispherical cap.
pub fn capsule_mesh(a: Point3, b: Point3, radius: f64, segments: usize, rings: usize) -> Result<TriangleMesh> {
    if segments < 3 || rings < 1 || !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "capsule mesh needs segments >= 3, rings >= 1 and a positive radius (got {segments}, {rings}, {radius})"
        )));
    }
    let axis = b - a;
    let len = axis.norm();
    if !(len > 0.0) {
        return Err(Error::Degenerate("capsule endpoints coincide".into()));
    }
    let dir = axis / len;
    let (e1, e2) = frame(dir);
    // latitude rows from the pole at `a` to the pole at `b`
    let mut rows: Vec<(Point3, f64, f64)> = Vec::new(); // (center, axial offset, ring radius)
    for i in 1..=rings {
        let t = PI / 2.0 * i as f64 / rings as f64;
        rows.push((a, -radius * t.cos(), radius * t.sin()));
    }
    for i in 0..rings {
        let t = PI / 2.0 * i as f64 / rings as f64;
        rows.push((b, radius * t.sin(), radius * t.cos()));
    }
    let mut vertices = vec![a - dir * radius];
    for &(c, off, r) in &rows {
        for s in 0..segments {
            let phi = TAU * s as f64 / segments as f64;
            vertices.push(c + dir * off + (e1 * phi.cos() + e2 * phi.sin()) * r);
        }
    }
    vertices.push(b + dir * radius);
    let top = vertices.len() - 1;
    let ring = |row: usize, s: usize| 1 + row * segments + s % segments;
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(0, s + 1), ring(0, s)]);
    }
    for row in 0..rows.len() - 1 {
        for s in 0..segments {
            let (p, q) = (ring(row, s), ring(row, s + 1));
            let (r, t) = (ring(row + 1, s), ring(row + 1, s + 1));
            triangles.push([p, q, t]);
            triangles.push([p, t, r]);
        }
    }
    let last = rows.len() - 1;
    for s in 0..segments {
        triangles.push([top, ring(last, s), ring(last, s + 1)]);
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::check_watertight;

    #[test]
    fn worked_distances() {
        assert_eq!(AnalyticShape::sphere(Point3::ORIGIN, 1.0).sdf(Point3::ORIGIN), -1.0);
        let cap = AnalyticShape::capsule(Point3::new(-0.5, 0.0, 0.0), Point3::new(0.5, 0.0, 0.0), 0.2);
        assert!((cap.sdf(Point3::new(0.0, 0.5, 0.0)) - 0.3).abs() < 1e-15);
        assert!((cap.sdf(Point3::new(1.0, 0.0, 0.0)) - 0.3).abs() < 1e-15);
        let torus = AnalyticShape::torus(Point3::ORIGIN, 0.5, 0.1);
        assert!((torus.sdf(Point3::new(0.5, 0.0, 0.0)) + 0.1).abs() < 1e-15);
        assert!((torus.sdf(Point3::ORIGIN) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn offset_subtracts_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shapes = [
            AnalyticShape::sphere(Point3::new(0.1, 0.2, 0.3), 0.4),
            AnalyticShape::capsule(Point3::ORIGIN, Point3::new(0.3, 0.5, -0.2), 0.1),
            AnalyticShape::torus(Point3::ORIGIN, 0.6, 0.15),
        ];
        for s in shapes {
            let off = s.clone().offset(0.07);
            for _ in 0..200 {
                let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                assert_eq!(off.sdf(p), s.sdf(p) - 0.07);
                assert!((off.simplified().sdf(p) - off.sdf(p)).abs() < 1e-15);
            }
        }
        assert!(AnalyticShape::sphere(Point3::ORIGIN, 0.2).offset(-0.3).validate().is_err());
    }

    #[test]
    fn eikonal_away_from_surfaces_and_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shapes = [
            AnalyticShape::sphere(Point3::ORIGIN, 0.5),
            AnalyticShape::capsule(Point3::new(-0.4, 0.0, 0.0), Point3::new(0.4, 0.1, 0.0), 0.2),
            AnalyticShape::torus(Point3::ORIGIN, 0.5, 0.15),
        ];
        let h = 1e-6;
        for s in &shapes {
            let mut checked = 0;
            while checked < 300 {
                let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                // medial sets: sphere center, capsule segment, torus core circle and z axis
                let medial = match s {
                    AnalyticShape::Sphere { center, .. } => (p - *center).norm(),
                    AnalyticShape::Capsule { a, b, .. } => segment_distance(p, *a, *b),
                    AnalyticShape::Torus { major, .. } => {
                        let q = (p.x * p.x + p.y * p.y).sqrt();
                        ((q - major).powi(2) + p.z * p.z).sqrt().min(q)
                    }
                    _ => unreachable!(),
                };
                if s.sdf(p).abs() < 1e-3 || medial < 1e-3 {
                    continue;
                }
                let g = Point3::new(
                    s.sdf(p + Point3::new(h, 0.0, 0.0)) - s.sdf(p - Point3::new(h, 0.0, 0.0)),
                    s.sdf(p + Point3::new(0.0, h, 0.0)) - s.sdf(p - Point3::new(0.0, h, 0.0)),
                    s.sdf(p + Point3::new(0.0, 0.0, h)) - s.sdf(p - Point3::new(0.0, 0.0, h)),
                ) / (2.0 * h);
                assert!((g.norm() - 1.0).abs() < 1e-4, "{s:?} at {p:?}");
                checked += 1;
            }
        }
    }

    #[test]
    fn samples_lie_on_surfaces() {
        let shapes = [
            AnalyticShape::sphere(Point3::new(0.2, 0.0, -0.1), 0.7),
            AnalyticShape::capsule(Point3::new(-0.5, 0.0, 0.0), Point3::new(0.5, 0.2, 0.0), 0.2),
            AnalyticShape::torus(Point3::ORIGIN, 0.5, 0.1),
            AnalyticShape::torus(Point3::ORIGIN, 0.5, 0.1).offset(0.05),
            bifurcation_fixture(&Bifurcation::default()).unwrap(),
        ];
        for s in &shapes {
            let cloud = sample_analytic_surface(s, 500, 1).unwrap();
            assert_eq!(cloud.len(), 500);
            for p in cloud.points() {
                assert!(s.sdf(*p).abs() < 1e-9, "{s:?}: {}", s.sdf(*p));
            }
            assert_eq!(cloud, sample_analytic_surface(s, 500, 1).unwrap());
            assert_ne!(cloud, sample_analytic_surface(s, 500, 2).unwrap());
        }
    }

    #[test]
    fn sphere_samples_are_area_uniform() {
        let r = 0.8;
        let s = AnalyticShape::sphere(Point3::ORIGIN, r);
        let cloud = sample_analytic_surface(&s, 4000, 5).unwrap();
        let mean_r = cloud.points().iter().map(|p| p.norm()).sum::<f64>() / 4000.0;
        assert!((mean_r - r).abs() < 1e-9);
        // by Archimedes' hat-box theorem z is uniform on [-r, r]
        let mut z: Vec<f64> = cloud.points().iter().map(|p| p.z).collect();
        z.sort_by(f64::total_cmp);
        let n = z.len() as f64;
        let d = z
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let cdf = (v + r) / (2.0 * r);
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn capsule_side_and_cap_split() {
        let (a, b, r) = (Point3::ORIGIN, Point3::new(0.0, 0.0, 1.0), 0.25);
        let s = AnalyticShape::capsule(a, b, r);
        let cloud = sample_analytic_surface(&s, 20_000, 9).unwrap();
        let on_side = cloud.points().iter().filter(|p| p.z > 0.0 && p.z < 1.0).count() as f64;
        let expect = 1.0 / (1.0 + 2.0 * r); // side / total = 2 pi r L / (2 pi r L + 4 pi r^2)
        let sd = (expect * (1.0 - expect) / 20_000.0).sqrt();
        assert!((on_side / 20_000.0 - expect).abs() < 4.0 * sd);
    }

    #[test]
    fn nested_walls_are_ordered() {
        let [lumen, inner, outer] = nested_wall_fixture(0.3, 0.2, 0.2).unwrap();
        let radius = |s: &AnalyticShape| match s {
            AnalyticShape::Sphere { radius, .. } => *radius,
            _ => unreachable!(),
        };
        assert_eq!([radius(&lumen), radius(&inner), radius(&outer)], [0.3, 0.5, 0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            assert!(outer.sdf(p) <= inner.sdf(p) && inner.sdf(p) <= lumen.sdf(p));
        }
        assert!(nested_wall_fixture(0.3, 0.0, 0.2).is_err());
    }

    #[test]
    fn bifurcation_union() {
        let spec = Bifurcation::default();
        let u = bifurcation_fixture(&spec).unwrap();
        assert!(u.sdf(Point3::new(0.0, -0.4, 0.0)) < -0.15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            for c in spec.capsules() {
                assert!(u.sdf(p) <= c.sdf(p));
            }
        }
    }

    #[test]
    fn fixtures_by_name() {
        for name in FIXTURE_NAMES {
            let s = named_fixture(name).unwrap();
            s.validate().unwrap();
            let cloud = sample_analytic_surface(&s, 200, 0).unwrap();
            let b = s.bounds().padded(1e-9);
            assert!(cloud.points().iter().all(|p| b.contains(*p)), "{name}");
        }
        assert!(named_fixture("cube").is_err());
        let json = r#"{"kind": "sphere", "center": {"x": 1.0, "y": 0.0, "z": 0.0}, "radius": 0.5}"#;
        assert_eq!(named_fixture(json).unwrap(), AnalyticShape::sphere(Point3::new(1.0, 0.0, 0.0), 0.5));
    }

    #[test]
    fn capsule_tessellation_is_closed() {
        let (a, b) = (Point3::new(0.1, -0.3, 0.0), Point3::new(0.2, 0.5, 0.3));
        let mesh = capsule_mesh(a, b, 0.2, 24, 8).unwrap();
        assert!(check_watertight(&mesh).closed);
        assert!(mesh.enclosed_volume() > 0.0);
        let shape = AnalyticShape::capsule(a, b, 0.2);
        for v in &mesh.vertices {
            assert!(shape.sdf(*v).abs() < 1e-12);
        }
        let exact = PI * 0.04 * (b - a).norm() + 4.0 / 3.0 * PI * 0.008;
        assert!((mesh.enclosed_volume() - exact).abs() / exact < 0.03);
    }
}
