//! Exact point-to-mesh distances and inside/outside classification.

use super::mesh::TriangleMesh;
use super::point::{Aabb, Point3};
use crate::error::{Error, Result};
use crate::extraction::check_watertight;

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_distance_squared(p: Point3, [a, b, c]: [Point3; 3]) -> f64 {
    (p - closest_point_on_triangle(p, a, b, c)).norm_squared()
}

/// Unsigned distance by scanning every triangle.
pub fn point_to_mesh_distance(p: Point3, mesh: &TriangleMesh) -> Result<f64> {
    if mesh.is_empty() {
        return Err(Error::Empty("mesh has no triangles"));
    }
    let best = (0..mesh.triangles.len())
        .map(|t| point_triangle_distance_squared(p, mesh.corners(t)))
        .fold(f64::INFINITY, f64::min);
    Ok(best.sqrt())
}

/// Signed distance (negative inside) for a watertight mesh. Builds an
/// acceleration structure per call; use [`MeshDistanceField`] for many
/// queries against the same mesh.
pub fn signed_distance_to_mesh(p: Point3, mesh: &TriangleMesh) -> Result<f64> {
    Ok(MeshDistanceField::new(mesh.clone())?.signed_distance(p))
}

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

const LEAF_SIZE: usize = 4;

/// Bounding-volume hierarchy over a mesh answering exact nearest-distance
/// and ray-parity queries.
#[derive(Clone, Debug)]
pub struct MeshDistanceField {
    mesh: TriangleMesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
    closed: bool,
}

/// Ray directions tried in turn when a cast grazes an edge or vertex.
fn ray_direction(attempt: usize) -> Point3 {
    let golden = 0.618_033_988_749_894_9;
    let u = (std::f64::consts::FRAC_1_PI + attempt as f64 * golden).fract();
    let v = (0.141_421_356_237_309_5 + attempt as f64 * golden * golden).fract();
    let z = 1.0 - 2.0 * u;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * v;
    Point3::new(r * phi.cos(), r * phi.sin(), z)
}

enum RayHit {
    Miss,
    Hit,
    Ambiguous,
}

fn ray_triangle(origin: Point3, dir: Point3, [a, b, c]: [Point3; 3]) -> RayHit {
    const EDGE_EPS: f64 = 1e-10;
    let e1 = b - a;
    let e2 = c - a;
    let pv = dir.cross(e2);
    let det = e1.dot(pv);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= 1e-14 * scale {
        return RayHit::Miss;
    }
    let inv = 1.0 / det;
    let tv = origin - a;
    let u = tv.dot(pv) * inv;
    if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
        return RayHit::Miss;
    }
    let qv = tv.cross(e1);
    let v = dir.dot(qv) * inv;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return RayHit::Miss;
    }
    let t = e2.dot(qv) * inv;
    if t <= 0.0 {
        return RayHit::Miss;
    }
    if u < EDGE_EPS || v < EDGE_EPS || 1.0 - u - v < EDGE_EPS {
        return RayHit::Ambiguous;
    }
    RayHit::Hit
}

fn ray_box(origin: Point3, inv_dir: Point3, b: &Aabb) -> bool {
    let mut t0: f64 = 0.0;
    let mut t1 = f64::INFINITY;
    for axis in 0..3 {
        let lo = (b.min[axis] - origin[axis]) * inv_dir[axis];
        let hi = (b.max[axis] - origin[axis]) * inv_dir[axis];
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        // NaN from 0 * inf keeps the interval unchanged
        t0 = if lo > t0 { lo } else { t0 };
        t1 = if hi < t1 { hi } else { t1 };
        if t0 > t1 * (1.0 + 1e-12) + 1e-12 {
            return false;
        }
    }
    true
}

impl MeshDistanceField {
    /// Fails on empty or non-watertight meshes.
    pub fn new(mesh: TriangleMesh) -> Result<Self> {
        let field = Self::new_unsigned(mesh)?;
        if !field.closed {
            let report = check_watertight(&field.mesh);
            return Err(Error::NotWatertight {
                boundary_edges: report.boundary_edges,
                non_manifold_edges: report.non_manifold_edges,
            });
        }
        Ok(field)
    }

    /// Accepts open meshes; only unsigned queries are meaningful then.
    pub fn new_unsigned(mesh: TriangleMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::Empty("mesh has no triangles"));
        }
        let closed = check_watertight(&mesh).closed;
        let n = mesh.triangles.len();
        let bounds: Vec<Aabb> = (0..n)
            .map(|t| Aabb::from_points(&mesh.corners(t)))
            .collect();
        let centroids: Vec<Point3> = bounds.iter().map(|b| b.center()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        Self::build(&mut nodes, &mut order, 0, n, &bounds, &centroids);
        Ok(Self {
            mesh,
            nodes,
            order,
            closed,
        })
    }

    fn build(
        nodes: &mut Vec<Node>,
        order: &mut [usize],
        start: usize,
        end: usize,
        bounds: &[Aabb],
        centroids: &[Point3],
    ) -> usize {
        let slice = &mut order[start..end];
        let node_bounds = slice
            .iter()
            .fold(Aabb::empty(), |acc, &t| acc.union(bounds[t]));
        let id = nodes.len();
        nodes.push(Node {
            bounds: node_bounds,
            kind: NodeKind::Leaf {
                start,
                count: end - start,
            },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let cb = Aabb::from_points(slice.iter().map(|&t| &centroids[t]));
        let e = cb.extent();
        let axis = if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        };
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a][axis]
                .total_cmp(&centroids[b][axis])
                .then(a.cmp(&b))
        });
        let left = Self::build(nodes, order, start, start + mid, bounds, centroids);
        let right = Self::build(nodes, order, start + mid, end, bounds, centroids);
        nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn distance(&self, p: Point3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![(0usize, self.nodes[0].bounds.distance_squared(p))];
        while let Some((id, d2)) = stack.pop() {
            if d2 >= best {
                continue;
            }
            match self.nodes[id].kind {
                NodeKind::Leaf { start, count } => {
                    for &t in &self.order[start..start + count] {
                        best = best.min(point_triangle_distance_squared(p, self.mesh.corners(t)));
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared(p);
                    let dr = self.nodes[right].bounds.distance_squared(p);
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        best.sqrt()
    }

    /// Ray-crossing parity; grazing hits are retried along other directions.
    pub fn is_inside(&self, p: Point3) -> bool {
        for attempt in 0..64 {
            let dir = ray_direction(attempt);
            if let Some(crossings) = self.count_crossings(p, dir) {
                return crossings % 2 == 1;
            }
        }
        log::warn!("ray parity stayed ambiguous at {p:?}; treating as outside");
        false
    }

    fn count_crossings(&self, origin: Point3, dir: Point3) -> Option<usize> {
        let inv = Point3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut crossings = 0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !ray_box(origin, inv, &node.bounds) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &t in &self.order[start..start + count] {
                        match ray_triangle(origin, dir, self.mesh.corners(t)) {
                            RayHit::Miss => {}
                            RayHit::Hit => crossings += 1,
                            RayHit::Ambiguous => return None,
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        Some(crossings)
    }

    /// Signed distance, negative inside. Only meaningful for closed meshes.
    pub fn signed_distance(&self, p: Point3) -> f64 {
        let d = self.distance(p);
        if d == 0.0 {
            return 0.0;
        }
        if self.is_inside(p) {
            -d
        } else {
            d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Point3 {
        Point3::new(
            rng.random_range(-r..r),
            rng.random_range(-r..r),
            rng.random_range(-r..r),
        )
    }

    #[test]
    fn vertices_have_zero_distance() {
        let ico = TriangleMesh::icosphere(Point3::ORIGIN, 1.0, 1);
        for v in &ico.vertices {
            assert_eq!(point_to_mesh_distance(*v, &ico).unwrap(), 0.0);
        }
        assert!(point_to_mesh_distance(Point3::ORIGIN, &TriangleMesh::default()).is_err());
    }

    #[test]
    fn icosphere_center_distance() {
        // Chord sagitta of a 3-subdivision icosphere is below 5e-3.
        let ico = TriangleMesh::icosphere(Point3::ORIGIN, 1.0, 3);
        let d = point_to_mesh_distance(Point3::ORIGIN, &ico).unwrap();
        assert!(d < 1.0 && 1.0 - d < 5e-3, "{d}");
        let sd = signed_distance_to_mesh(Point3::ORIGIN, &ico).unwrap();
        assert!((sd + 1.0).abs() < 5e-3);
        let far = signed_distance_to_mesh(Point3::new(11.0, 0.0, 0.0), &ico).unwrap();
        assert!(far > 0.0);
    }

    #[test]
    fn bvh_matches_brute_force_exactly() {
        let ico = TriangleMesh::icosphere(Point3::new(0.2, 0.0, -0.1), 0.8, 2);
        let field = MeshDistanceField::new(ico.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = random_point(&mut rng, 2.0);
            let brute = point_to_mesh_distance(p, &ico).unwrap();
            assert_eq!(field.distance(p).to_bits(), brute.to_bits());
            assert_eq!(field.signed_distance(p).abs().to_bits(), brute.to_bits());
        }
    }

    #[test]
    fn sign_flips_across_face() {
        let cube = TriangleMesh::unit_cube();
        let field = MeshDistanceField::new(cube).unwrap();
        let mut prev = field.signed_distance(Point3::new(-0.5, 0.5, 0.5));
        assert!(prev > 0.0);
        let mut flips = 0;
        for i in 1..=40 {
            let x = -0.5 + i as f64 * 0.05;
            let d = field.signed_distance(Point3::new(x, 0.5, 0.5));
            if d.signum() != prev.signum() && d != 0.0 {
                flips += 1;
            }
            if d != 0.0 {
                prev = d;
            }
        }
        assert_eq!(flips, 2);
        // query on a cube edge's plane forces a grazing ray from the centre line
        assert!(field.signed_distance(Point3::new(0.5, 0.5, 0.5)) < 0.0);
        assert!((field.signed_distance(Point3::new(0.5, 0.5, 0.5)) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn open_mesh_rejected() {
        let mut ico = TriangleMesh::icosphere(Point3::ORIGIN, 1.0, 1);
        ico.triangles.pop();
        assert!(matches!(
            MeshDistanceField::new(ico.clone()),
            Err(Error::NotWatertight { boundary_edges: 3, .. })
        ));
        assert!(signed_distance_to_mesh(Point3::ORIGIN, &ico).is_err());
        assert!(MeshDistanceField::new_unsigned(ico).is_ok());
    }

    #[test]
    fn signed_distance_is_similarity_covariant() {
        let ico = TriangleMesh::icosphere(Point3::ORIGIN, 1.0, 2);
        let (s, t) = (2.5, Point3::new(-3.0, 1.0, 7.0));
        let a = MeshDistanceField::new(ico.clone()).unwrap();
        let b = MeshDistanceField::new(ico.map_vertices(|v| v * s + t)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let p = random_point(&mut rng, 1.5);
            let da = a.signed_distance(p);
            let db = b.signed_distance(p * s + t);
            assert!((db - s * da).abs() <= 1e-9 * (s * da).abs().max(1e-3), "{da} {db}");
        }
    }
}
