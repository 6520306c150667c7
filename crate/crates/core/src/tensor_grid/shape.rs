use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest coordinate dimension supported by the kernels.
pub const MAX_DIM: usize = 4;

/// Structured grid: periodic tangential axes, one bounded axis carrying the two
/// boundary faces.
///
/// Periodic axes hold `sizes[a]` nodes, bounded axes `sizes[a] + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub spacing: Vec<f64>,
    pub boundary_axis: usize,
    /// Coordinate of node 0 per axis (defaults to zeros).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub origin: Vec<f64>,
    /// Additional non-periodic axes that carry no boundary faces (chart grids).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chart_axes: Vec<usize>,
}

/// Which face of the bounded axis a boundary node sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Face {
    Lower,
    Upper,
}

impl Face {
    /// Sign of the outward normal along the boundary axis.
    pub fn sign(self) -> f64 {
        match self {
            Face::Lower => -1.0,
            Face::Upper => 1.0,
        }
    }
}

impl GridShape {
    /// Slab/strip grid with `n` in {2, 3}.
    pub fn new(n: usize, sizes: Vec<usize>, spacing: Vec<f64>, boundary_axis: usize) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidShape(format!("dimension {n} not in {{2, 3}}")));
        }
        let s = Self { n, sizes, spacing, boundary_axis, origin: vec![0.0; n], chart_axes: vec![] };
        s.validate()?;
        Ok(s)
    }

    /// Unit-period slab: every axis has length 1 and `cells` cells.
    pub fn unit(n: usize, cells: usize, boundary_axis: usize) -> Result<Self> {
        Self::new(n, vec![cells; n], vec![1.0 / cells as f64; n], boundary_axis)
    }

    /// Coordinate chart grid up to dimension 4 with extra bounded axes.
    pub fn chart(
        sizes: Vec<usize>,
        spacing: Vec<f64>,
        origin: Vec<f64>,
        boundary_axis: usize,
        chart_axes: Vec<usize>,
    ) -> Result<Self> {
        let n = sizes.len();
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidShape(format!("chart dimension {n} not in 2..=4")));
        }
        let s = Self { n, sizes, spacing, boundary_axis, origin, chart_axes };
        s.validate()?;
        Ok(s)
    }

    pub fn with_origin(mut self, origin: Vec<f64>) -> Result<Self> {
        self.origin = origin;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.sizes.len() != n || self.spacing.len() != n {
            return Err(Error::InvalidShape("sizes/spacing length must equal n".into()));
        }
        if !self.origin.is_empty() && self.origin.len() != n {
            return Err(Error::InvalidShape("origin length must equal n".into()));
        }
        if self.boundary_axis >= n {
            return Err(Error::InvalidShape("boundary_axis out of range".into()));
        }
        if self.chart_axes.iter().any(|&a| a >= n || a == self.boundary_axis) {
            return Err(Error::InvalidShape("bad chart axis".into()));
        }
        if let Some(a) = self.sizes.iter().position(|&s| s < 8) {
            return Err(Error::InvalidShape(format!("axis {a} has fewer than 8 cells")));
        }
        if self.spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidShape("spacing must be positive".into()));
        }
        Ok(())
    }

    pub fn is_bounded(&self, axis: usize) -> bool {
        axis == self.boundary_axis || self.chart_axes.contains(&axis)
    }

    /// Node count along `axis`.
    pub fn count(&self, axis: usize) -> usize {
        self.sizes[axis] + usize::from(self.is_bounded(axis))
    }

    /// Number of independent metric components.
    pub fn ncomp(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn num_nodes(&self) -> usize {
        (0..self.n).map(|a| self.count(a)).product()
    }

    /// Row-major strides, axis 0 slowest.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        let mut st = [0; MAX_DIM];
        let mut acc = 1;
        for a in (0..self.n).rev() {
            st[a] = acc;
            acc *= self.count(a);
        }
        st
    }

    pub fn multi(&self, idx: usize) -> [usize; MAX_DIM] {
        let st = self.strides();
        let mut m = [0; MAX_DIM];
        let mut r = idx;
        for a in 0..self.n {
            m[a] = r / st[a];
            r %= st[a];
        }
        m
    }

    pub fn index(&self, m: &[usize]) -> usize {
        let st = self.strides();
        (0..self.n).map(|a| m[a] * st[a]).sum()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let o = if self.origin.is_empty() { 0.0 } else { self.origin[axis] };
        o + i as f64 * self.spacing[axis]
    }

    pub fn coords(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.multi(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.n {
            x[a] = self.coord(a, m[a]);
        }
        x
    }

    /// Period (or extent) of an axis.
    pub fn length(&self, axis: usize) -> f64 {
        self.sizes[axis] as f64 * self.spacing[axis]
    }

    pub fn tangential_axes(&self) -> Vec<usize> {
        (0..self.n).filter(|&a| a != self.boundary_axis).collect()
    }

    /// Nodes on one boundary face in row-major order of the remaining axes.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        let b = self.boundary_axis;
        let level = match face {
            Face::Lower => 0,
            Face::Upper => self.sizes[b],
        };
        (0..self.num_nodes()).filter(|&i| self.multi(i)[b] == level).collect()
    }

    /// All boundary nodes: the lower face followed by the upper face.
    pub fn boundary_nodes(&self) -> Vec<(usize, Face)> {
        let mut out: Vec<(usize, Face)> =
            self.face_nodes(Face::Lower).into_iter().map(|i| (i, Face::Lower)).collect();
        out.extend(self.face_nodes(Face::Upper).into_iter().map(|i| (i, Face::Upper)));
        out
    }

    pub fn num_boundary_nodes(&self) -> usize {
        2 * self.num_nodes() / self.count(self.boundary_axis)
    }

    /// Node shifted by `k` whole cells along a periodic axis.
    pub fn shifted(&self, idx: usize, axis: usize, k: isize) -> usize {
        assert!(!self.is_bounded(axis));
        let mut m = self.multi(idx);
        let c = self.count(axis) as isize;
        m[axis] = (m[axis] as isize + k).rem_euclid(c) as usize;
        self.index(&m)
    }
}

/// Position of `(i, j)` in packed upper-triangular storage.
#[inline]
pub fn comp(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Index pairs `(i, j)`, `i <= j`, in packed storage order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            v.push((i, j));
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_roundtrip() {
        for n in 2..=4 {
            for (k, (i, j)) in pairs(n).into_iter().enumerate() {
                assert_eq!(comp(n, i, j), k);
                assert_eq!(comp(n, j, i), k);
            }
        }
    }

    #[test]
    fn node_indexing() {
        let s = GridShape::unit(3, 8, 1).unwrap();
        assert_eq!(s.num_nodes(), 8 * 9 * 8);
        for idx in [0, 17, 300, 575] {
            assert_eq!(s.index(&s.multi(idx)), idx);
        }
        assert_eq!(s.boundary_nodes().len(), s.num_boundary_nodes());
        assert!(GridShape::unit(3, 7, 1).is_err());
        assert!(GridShape::unit(4, 8, 1).is_err());
    }
}
