use super::point::{Aabb, Point3};
use crate::error::{Error, Result};

/// Lattice layout shared by every grid evaluated over the same region:
/// `dims` samples per axis spanning `bbox` inclusively on both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub dims: [usize; 3],
    pub bbox: Aabb,
}

impl Lattice {
    pub fn new(dims: [usize; 3], bbox: Aabb) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArgument(format!(
                "lattice needs at least 2 samples per axis, got {dims:?}"
            )));
        }
        if !bbox.is_valid() {
            return Err(Error::InvalidArgument(format!(
                "bounding box min {:?} must be below max {:?} on every axis",
                bbox.min, bbox.max
            )));
        }
        Ok(Self { dims, bbox })
    }

    pub fn cubic(n: usize, bbox: Aabb) -> Result<Self> {
        Self::new([n; 3], bbox)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Point3 {
        let e = self.bbox.extent();
        Point3::new(
            e.x / (self.dims[0] - 1) as f64,
            e.y / (self.dims[1] - 1) as f64,
            e.z / (self.dims[2] - 1) as f64,
        )
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.spacing().norm()
    }

    /// Linear index with x fastest, then y, then z.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn ijk(&self, index: usize) -> [usize; 3] {
        let i = index % self.dims[0];
        let rest = index / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Point3 {
        let (lo, hi) = (self.bbox.min, self.bbox.max);
        let axis = |idx: usize, n: usize, a: f64, b: f64| {
            if idx == n - 1 {
                b
            } else {
                a + (b - a) * (idx as f64 / (n - 1) as f64)
            }
        };
        Point3::new(
            axis(i, self.dims[0], lo.x, hi.x),
            axis(j, self.dims[1], lo.y, hi.y),
            axis(k, self.dims[2], lo.z, hi.z),
        )
    }

    pub fn position_of(&self, index: usize) -> Point3 {
        let [i, j, k] = self.ijk(index);
        self.position(i, j, k)
    }

    /// All lattice positions in storage order.
    pub fn positions(&self) -> Vec<Point3> {
        (0..self.len()).map(|n| self.position_of(n)).collect()
    }
}

/// Dense samples of a scalar field on a [`Lattice`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    lattice: Lattice,
    values: Vec<f32>,
}

impl ScalarGrid {
    pub fn new(lattice: Lattice, values: Vec<f32>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::InvalidArgument(format!(
                "grid of dims {:?} needs {} values, got {}",
                lattice.dims,
                lattice.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value {i}")));
        }
        Ok(Self { lattice, values })
    }

    pub fn filled(lattice: Lattice, value: f32) -> Self {
        Self {
            lattice,
            values: vec![value; lattice.len()],
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dims(&self) -> [usize; 3] {
        self.lattice.dims
    }

    pub fn bbox(&self) -> Aabb {
        self.lattice.bbox
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.lattice.index(i, j, k)]
    }

    /// Trilinear interpolation; positions outside the box are clamped to it.
    pub fn sample(&self, p: Point3) -> f64 {
        let l = &self.lattice;
        let h = l.spacing();
        let locate = |c: f64, lo: f64, step: f64, n: usize| -> (usize, f64) {
            let u = ((c - lo) / step).clamp(0.0, (n - 1) as f64);
            let i = (u.floor() as usize).min(n - 2);
            (i, u - i as f64)
        };
        let (i, tx) = locate(p.x, l.bbox.min.x, h.x, l.dims[0]);
        let (j, ty) = locate(p.y, l.bbox.min.y, h.y, l.dims[1]);
        let (k, tz) = locate(p.z, l.bbox.min.z, h.z, l.dims[2]);
        let v = |di: usize, dj: usize, dk: usize| self.get(i + di, j + dj, k + dk) as f64;
        let x00 = v(0, 0, 0) + (v(1, 0, 0) - v(0, 0, 0)) * tx;
        let x10 = v(0, 1, 0) + (v(1, 1, 0) - v(0, 1, 0)) * tx;
        let x01 = v(0, 0, 1) + (v(1, 0, 1) - v(0, 0, 1)) * tx;
        let x11 = v(0, 1, 1) + (v(1, 1, 1) - v(0, 1, 1)) * tx;
        let y0 = x00 + (x10 - x00) * ty;
        let y1 = x01 + (x11 - x01) * ty;
        y0 + (y1 - y0) * tz
    }

    /// Central-difference gradient at an interior lattice point.
    pub fn central_gradient(&self, i: usize, j: usize, k: usize) -> Point3 {
        let h = self.lattice.spacing();
        Point3::new(
            (self.get(i + 1, j, k) as f64 - self.get(i - 1, j, k) as f64) / (2.0 * h.x),
            (self.get(i, j + 1, k) as f64 - self.get(i, j - 1, k) as f64) / (2.0 * h.y),
            (self.get(i, j, k + 1) as f64 - self.get(i, j, k - 1) as f64) / (2.0 * h.z),
        )
    }
}
