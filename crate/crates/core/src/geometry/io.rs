//! Plain-text point clouds (`.xyz`), OBJ meshes and binary scalar grids.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;

use super::grid::{Lattice, ScalarGrid};
use super::mesh::{PointCloud, TriangleMesh};
use super::point::{Aabb, Point3};
use crate::error::{Error, Result};

const GRID_MAGIC: &[u8; 4] = b"SDFG";
const GRID_VERSION: u32 = 1;
const GRID_HEADER_LEN: usize = 4 + 4 + 3 * 4 + 6 * 8;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_coords<'a>(
    path: &Path,
    line: usize,
    fields: impl Iterator<Item = &'a str>,
) -> Result<Point3> {
    let mut xyz = [0.0; 3];
    let mut count = 0;
    for field in fields {
        if count == 3 {
            return Err(parse_err(path, line, "expected exactly three coordinates"));
        }
        let v: f64 = field
            .parse()
            .map_err(|_| parse_err(path, line, format!("malformed number {field:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(path, line, format!("non-finite value {field:?}")));
        }
        xyz[count] = v;
        count += 1;
    }
    if count != 3 {
        return Err(parse_err(path, line, "expected exactly three coordinates"));
    }
    Ok(Point3::from_array(xyz))
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        points.push(parse_coords(path, n + 1, line.split_whitespace())?);
    }
    PointCloud::new(points)
}

pub fn save_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(cloud.len() * 48);
    for p in cloud.points() {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads `v` and `f` records of an OBJ file. Face entries may carry
/// `/vt/vn` suffixes, which are ignored; degenerate triangles are dropped.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, [i64; 3])> = Vec::new();
    let mut ignored = 0usize;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => vertices.push(parse_coords(path, line_no, fields.take(3))?),
            Some("f") => {
                let idx: Vec<&str> = fields.collect();
                if idx.len() != 3 {
                    return Err(parse_err(
                        path,
                        line_no,
                        format!("only triangular faces are supported, got {} indices", idx.len()),
                    ));
                }
                let mut tri = [0i64; 3];
                for (slot, tok) in tri.iter_mut().zip(&idx) {
                    let head = tok.split('/').next().unwrap_or_default();
                    *slot = head
                        .parse()
                        .map_err(|_| parse_err(path, line_no, format!("bad face index {tok:?}")))?;
                }
                faces.push((line_no, tri));
            }
            None => {}
            Some(tag) if tag.starts_with('#') => {}
            Some(_) => ignored += 1,
        }
    }
    if ignored > 0 {
        warn!("{}: ignored {ignored} unsupported OBJ records", path.display());
    }
    let nv = vertices.len() as i64;
    let mut triangles = Vec::with_capacity(faces.len());
    for (line_no, tri) in faces {
        let mut out = [0usize; 3];
        for (o, &i) in out.iter_mut().zip(&tri) {
            if i < 1 || i > nv {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("face index {i} out of range 1..={nv}"),
                ));
            }
            *o = (i - 1) as usize;
        }
        triangles.push(out);
    }
    let (mesh, dropped) = TriangleMesh::new(vertices, triangles)?.without_degenerate();
    if dropped > 0 {
        warn!("{}: dropped {dropped} degenerate triangles", path.display());
    }
    Ok(mesh)
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        for v in &mesh.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &mesh.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn encode_grid(grid: &ScalarGrid) -> Vec<u8> {
    let lattice = grid.lattice();
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + 4 * grid.values().len());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    for d in lattice.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for c in lattice.bbox.min.to_array().iter().chain(&lattice.bbox.max.to_array()) {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<ScalarGrid> {
    if bytes.len() < GRID_HEADER_LEN {
        return Err(Error::GridFormat(format!(
            "file has {} bytes, header alone needs {GRID_HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != GRID_MAGIC {
        return Err(Error::GridFormat("bad magic bytes".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != GRID_VERSION {
        return Err(Error::GridFormat(format!("unsupported version {version}")));
    }
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let c: Vec<f64> = (0..6).map(|i| f64_at(20 + 8 * i)).collect();
    let bbox = Aabb::new(Point3::new(c[0], c[1], c[2]), Point3::new(c[3], c[4], c[5]));
    let lattice = Lattice::new(dims, bbox).map_err(|e| Error::GridFormat(e.to_string()))?;
    let expected = GRID_HEADER_LEN + 4 * lattice.len();
    if bytes.len() != expected {
        return Err(Error::GridFormat(format!(
            "size mismatch: dims {dims:?} need {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let values = bytes[GRID_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarGrid::new(lattice, values).map_err(|e| Error::GridFormat(e.to_string()))
}

pub fn write_grid(grid: &ScalarGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_grid(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<ScalarGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn xyz_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.xyz", "# header\n0 0 0\n1 2 3\n");
        let cloud = load_point_cloud(&p).unwrap();
        assert_eq!(cloud.points(), &[Point3::ORIGIN, Point3::new(1.0, 2.0, 3.0)]);

        let empty = write_tmp(&dir, "e.xyz", "");
        assert!(load_point_cloud(&empty).unwrap().is_empty());

        let bad = write_tmp(&dir, "n.xyz", "0 0 nan\n");
        match load_point_cloud(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        let short = write_tmp(&dir, "s.xyz", "0 0 0\n1 2\n");
        assert!(matches!(load_point_cloud(&short), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(
            load_point_cloud(dir.path().join("missing.xyz")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn xyz_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = PointCloud::new(vec![
            Point3::new(0.1, -1e-7, 12345.678901234567),
            Point3::new(1.0 / 3.0, 2.0f64.sqrt(), -0.0),
        ])
        .unwrap();
        let p = dir.path().join("c.xyz");
        save_point_cloud(&cloud, &p).unwrap();
        assert_eq!(load_point_cloud(&p).unwrap(), cloud);
        assert!(!fs::read_to_string(&p).unwrap().contains('e'));
    }

    #[test]
    fn obj_cube_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        save_mesh(&TriangleMesh::unit_cube(), &p).unwrap();
        let m = load_mesh(&p).unwrap();
        assert_eq!((m.vertices.len(), m.triangles.len()), (8, 12));

        let zero = write_tmp(&dir, "z.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
        assert!(matches!(load_mesh(&zero), Err(Error::Parse { line: 4, .. })));
        let big = write_tmp(&dir, "b.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
        assert!(load_mesh(&big).is_err());
        let quad = write_tmp(&dir, "q.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 4 3\n");
        assert!(load_mesh(&quad).is_err());
        let extra = write_tmp(
            &dir,
            "x.obj",
            "o thing\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\nf 1 1 2\n",
        );
        let m = load_mesh(&extra).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn obj_round_trip_icosphere() {
        let dir = tempfile::tempdir().unwrap();
        let ico = TriangleMesh::icosphere(Point3::new(0.1, 0.2, 0.3), 1.7, 2);
        let p = dir.path().join("ico.obj");
        save_mesh(&ico, &p).unwrap();
        let back = load_mesh(&p).unwrap();
        assert_eq!(back.triangles, ico.triangles);
        for (a, b) in back.vertices.iter().zip(&ico.vertices) {
            assert!((*a - *b).norm() <= 1e-6 * b.norm());
        }
    }

    #[test]
    fn grid_format() {
        let lattice = Lattice::cubic(2, Aabb::new(Point3::splat(-1.0), Point3::splat(1.0))).unwrap();
        let zeros = ScalarGrid::filled(lattice, 0.0);
        let bytes = encode_grid(&zeros);
        assert_eq!(bytes.len(), GRID_HEADER_LEN + 8 * 4);
        assert_eq!(&bytes[..4], b"SDFG");

        let lattice = Lattice::new(
            [3, 4, 5],
            Aabb::new(Point3::new(-1.5, 0.0, 2.0), Point3::new(0.25, 1.0, 3.0)),
        )
        .unwrap();
        let values = (0..60).map(|i| (i as f32 * 0.37).sin() * 1e3).collect();
        let grid = ScalarGrid::new(lattice, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.sdfgrid");
        write_grid(&grid, &p).unwrap();
        let back = read_grid(&p).unwrap();
        assert_eq!(back.dims(), grid.dims());
        assert_eq!(back.bbox(), grid.bbox());
        let bits = |g: &ScalarGrid| g.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&grid));

        let full = encode_grid(&grid);
        assert!(matches!(decode_grid(&full[..full.len() - 3]), Err(Error::GridFormat(_))));
        let mut bad = full.clone();
        bad[0] = b'X';
        assert!(decode_grid(&bad).is_err());
        let mut nan = full;
        let n = nan.len();
        nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_grid(&nan).is_err());
    }
}
