//! Marching cubes and mesh closure checks.
//!
//! The 256-entry case table is generated from a per-face rule instead of
//! being typed in. On each cube face, walked counter-clockwise as seen from
//! outside the cube, a segment runs from the edge where the field goes from
//! positive to negative to the next edge where it returns to positive, so
//! positive corners stay on its left. A face with alternating signs gets two
//! segments that cut off its two negative corners (inside regions never
//! connect across an ambiguous face). Every crossing edge is shared by two
//! faces that traverse it in opposite directions, so the segments of a cell
//! always chain into closed loops, and neighbouring cells see the same
//! segments on their shared face. Loops are fan-triangulated in loop order,
//! which makes triangle normals point toward the positive side.

use std::collections::HashMap;
use std::sync::LazyLock;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::csg::{evaluate_on_grid, SdfSource};
use crate::error::Result;
use crate::geometry::{Lattice, ScalarGrid, TriangleMesh};
use crate::network::MlpModel;

/// Value that replaces grid samples sitting exactly on the iso level.
pub const ZERO_NUDGE: f64 = 1e-12;

/// Corner `c` of a cell sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
const EDGES: [(u8, u8); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Face corners, counter-clockwise seen from outside.
const FACES: [[u8; 4]; 6] = [
    [0, 4, 6, 2],
    [1, 3, 7, 5],
    [0, 1, 5, 4],
    [2, 6, 7, 3],
    [0, 2, 3, 1],
    [4, 5, 7, 6],
];

fn edge_between(a: u8, b: u8) -> u8 {
    let key = (a.min(b), a.max(b));
    EDGES.iter().position(|&e| e == key).expect("corners share an edge") as u8
}

fn face_edges(f: usize) -> [u8; 4] {
    let q = FACES[f];
    std::array::from_fn(|i| edge_between(q[i], q[(i + 1) % 4]))
}

fn share_face(a: u8, b: u8) -> bool {
    (0..6).any(|f| {
        let e = face_edges(f);
        e.contains(&a) && e.contains(&b)
    })
}

/// Triangles (as cell edge indices) for one corner sign pattern; bit `c`
/// of `case` is set when corner `c` is negative.
fn build_case(case: u8) -> Vec<[u8; 3]> {
    let neg = |c: u8| case >> c & 1 == 1;
    let mut next = [None::<u8>; 12];
    for (f, &q) in FACES.iter().enumerate() {
        let e = face_edges(f);
        let crossings = (0..4).filter(|&i| neg(q[i]) != neg(q[(i + 1) % 4])).count();
        if crossings == 0 {
            continue;
        }
        for k in 0..4 {
            if !neg(q[k]) {
                continue;
            }
            // walk the negative run starting at corner k
            let prev = (k + 3) % 4;
            if neg(q[prev]) {
                continue;
            }
            let mut last = k;
            while crossings == 2 && neg(q[(last + 1) % 4]) {
                last = (last + 1) % 4;
            }
            next[e[prev] as usize] = Some(e[last]);
        }
    }
    let mut visited = [false; 12];
    let mut triangles = Vec::new();
    for start in 0..12u8 {
        if visited[start as usize] || next[start as usize].is_none() {
            continue;
        }
        let mut ring = Vec::new();
        let mut e = start;
        while !visited[e as usize] {
            visited[e as usize] = true;
            ring.push(e);
            e = next[e as usize].expect("segments form closed loops");
        }
        debug_assert_eq!(e, start);
        let m = ring.len();
        // prefer a fan apex whose diagonals do not lie on a cube face
        let apex = (0..m)
            .find(|&s| (2..m.saturating_sub(1)).all(|j| !share_face(ring[s], ring[(s + j) % m])))
            .unwrap_or(0);
        for j in 1..m - 1 {
            triangles.push([ring[apex], ring[(apex + j) % m], ring[(apex + j + 1) % m]]);
        }
    }
    triangles
}

static CASES: LazyLock<Vec<Vec<[u8; 3]>>> = LazyLock::new(|| (0..=255u8).map(build_case).collect());

/// Polygonizes the `iso` level set of `grid`. Vertices are in the grid's
/// real coordinates, placed on cell edges by linear interpolation, and
/// shared between neighbouring cells. Triangles wind counter-clockwise
/// seen from the side where the field exceeds `iso`. Samples exactly at
/// `iso` are treated as `iso + 1e-12`.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> TriangleMesh {
    let lattice = *grid.lattice();
    let [nx, ny, nz] = lattice.dims;
    let field: Vec<f64> = grid
        .values()
        .iter()
        .map(|&v| {
            let d = v as f64 - iso;
            if d == 0.0 {
                ZERO_NUDGE
            } else {
                d
            }
        })
        .collect();
    let cases = &*CASES;

    // each slab of cells emits triangles as global edge keys:
    // 3 * (index of the lower lattice point) + axis
    let slab = |k: usize| -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corner = |c: u8| {
                    lattice.index(i + (c & 1) as usize, j + (c >> 1 & 1) as usize, k + (c >> 2 & 1) as usize)
                };
                let mut case = 0u8;
                for c in 0..8u8 {
                    if field[corner(c)] < 0.0 {
                        case |= 1 << c;
                    }
                }
                for tri in &cases[case as usize] {
                    out.push(tri.map(|e| {
                        let (a, b) = EDGES[e as usize];
                        let axis = (a ^ b).trailing_zeros() as usize;
                        3 * corner(a) + axis
                    }));
                }
            }
        }
        out
    };
    #[cfg(feature = "parallel")]
    let slabs: Vec<Vec<[usize; 3]>> = (0..nz - 1).into_par_iter().map(slab).collect();
    #[cfg(not(feature = "parallel"))]
    let slabs: Vec<Vec<[usize; 3]>> = (0..nz - 1).map(slab).collect();

    let stride = [1, nx, nx * ny];
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(slabs.iter().map(Vec::len).sum());
    for tri in slabs.iter().flatten() {
        triangles.push(tri.map(|key| {
            *ids.entry(key).or_insert_with(|| {
                let (p, axis) = (key / 3, key % 3);
                let q = p + stride[axis];
                let (v0, v1) = (field[p], field[q]);
                let t = v0 / (v0 - v1);
                vertices.push(lattice.position_of(p).lerp(lattice.position_of(q), t));
                vertices.len() - 1
            })
        }));
    }
    TriangleMesh {
        vertices,
        triangles,
    }
}

/// Edge-sharing statistics of a mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WatertightReport {
    /// Every edge is used by exactly two triangles with opposite winding.
    pub closed: bool,
    /// Edges used by a single triangle.
    pub boundary_edges: usize,
    /// Edges used by more than two triangles.
    pub non_manifold_edges: usize,
    /// Every two-triangle edge is traversed once in each direction.
    pub orientation_consistent: bool,
}

pub fn check_watertight(mesh: &TriangleMesh) -> WatertightReport {
    // (uses a->b with a < b, uses b->a)
    let mut edges: HashMap<(usize, usize), (u32, u32)> = HashMap::with_capacity(mesh.triangles.len() * 3 / 2);
    for &[a, b, c] in &mesh.triangles {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let entry = edges.entry((u.min(v), u.max(v))).or_default();
            if u < v {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
    }
    let mut boundary_edges = 0;
    let mut non_manifold_edges = 0;
    let mut orientation_consistent = true;
    for &(fwd, bwd) in edges.values() {
        match fwd + bwd {
            1 => boundary_edges += 1,
            2 => orientation_consistent &= fwd == 1,
            _ => non_manifold_edges += 1,
        }
    }
    WatertightReport {
        closed: boundary_edges == 0 && non_manifold_edges == 0 && orientation_consistent,
        boundary_edges,
        non_manifold_edges,
        orientation_consistent,
    }
}

/// Zero level set of one network channel sampled on `lattice`.
pub fn extract_model(model: &MlpModel, channel: usize, lattice: &Lattice) -> Result<TriangleMesh> {
    let source = SdfSource::model(model, channel)?;
    Ok(marching_cubes(&evaluate_on_grid(&source, lattice)?, 0.0))
}
