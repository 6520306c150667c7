//! First-derivative stencils and quadrature weights on grid axes.
//!
//! Periodic axes use central differences and uniform weights. Bounded axes use
//! central differences inside and the one-sided stencil
//! `(-2, 7/2, -2, 1/2) / h` at the ends, whose leading error term matches the
//! central one so that composed second derivatives stay second order. The
//! bounded-axis weights are the minimum-norm solution of `Dᵀ w = e_N − e_0`,
//! which makes the discrete divergence theorem hold exactly.

use super::shape::{GridShape, MAX_DIM};
use crate::linalg::SparseRows;
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};

const EDGE: [f64; 4] = [-2.0, 3.5, -2.0, 0.5];

/// 1-D derivative rows along one axis: `(node, coefficient)` per node.
pub fn axis_rows(count: usize, h: f64, bounded: bool) -> Vec<Vec<(usize, f64)>> {
    let c = 0.5 / h;
    (0..count)
        .map(|i| {
            if !bounded {
                vec![((i + count - 1) % count, -c), ((i + 1) % count, c)]
            } else if i == 0 {
                (0..4).map(|k| (k, EDGE[k] / h)).collect()
            } else if i == count - 1 {
                (0..4).map(|k| (count - 1 - k, -EDGE[k] / h)).collect()
            } else {
                vec![(i - 1, -c), (i + 1, c)]
            }
        })
        .collect()
}

/// Quadrature weights along one axis.
pub fn axis_weights(count: usize, h: f64, bounded: bool) -> Vec<f64> {
    if !bounded {
        return vec![h; count];
    }
    let rows = axis_rows(count, h, true);
    let mut d = DMatrix::zeros(count, count);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            d[(i, j)] += v;
        }
    }
    let mut rhs = DVector::zeros(count);
    rhs[0] = -1.0;
    rhs[count - 1] = 1.0;
    let svd = d.transpose().svd(true, true);
    let w = svd.solve(&rhs, 1e-12).expect("svd solve");
    w.iter().copied().collect()
}

/// Per-axis stencil data for a grid.
#[derive(Clone, Debug)]
pub struct Stencils {
    pub rows: Vec<Vec<Vec<(usize, f64)>>>,
    pub weights: Vec<Vec<f64>>,
}

impl Stencils {
    pub fn new(shape: &GridShape) -> Self {
        let mut rows = Vec::new();
        let mut weights = Vec::new();
        for a in 0..shape.n {
            let b = shape.is_bounded(a);
            rows.push(axis_rows(shape.count(a), shape.spacing[a], b));
            weights.push(axis_weights(shape.count(a), shape.spacing[a], b));
        }
        Self { rows, weights }
    }
}

/// Derivative of a node field along `axis`.
pub fn deriv<T: Scalar>(shape: &GridShape, st: &Stencils, f: &[T], axis: usize) -> Vec<T> {
    let strides = shape.strides();
    let s = strides[axis];
    let rows = &st.rows[axis];
    let mut out = vec![T::zero(); f.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let i = (idx / s) % shape.count(axis);
        let base = idx - i * s;
        let mut acc = T::zero();
        for &(j, c) in &rows[i] {
            acc += f[base + j * s] * c;
        }
        *o = acc;
    }
    out
}

/// Sparse matrix of the derivative along `axis`.
pub fn deriv_matrix(shape: &GridShape, st: &Stencils, axis: usize) -> SparseRows {
    let strides = shape.strides();
    let s = strides[axis];
    let rows = (0..shape.num_nodes())
        .map(|idx| {
            let i = (idx / s) % shape.count(axis);
            let base = idx - i * s;
            st.rows[axis][i].iter().map(|&(j, c)| (base + j * s, c)).collect()
        })
        .collect();
    SparseRows::new(shape.num_nodes(), rows)
}

/// Volume weight of every node (product of axis weights).
pub fn node_weights(shape: &GridShape, st: &Stencils) -> Vec<f64> {
    (0..shape.num_nodes())
        .map(|idx| {
            let m = shape.multi(idx);
            (0..shape.n).map(|a| st.weights[a][m[a]]).product()
        })
        .collect()
}

/// Face weight of a boundary node (product of tangential axis weights).
pub fn face_weight(shape: &GridShape, st: &Stencils, idx: usize) -> f64 {
    let m: [usize; MAX_DIM] = shape.multi(idx);
    (0..shape.n).filter(|&a| a != shape.boundary_axis).map(|a| st.weights[a][m[a]]).product()
}
