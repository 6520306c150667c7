//! Exact Jacobian of the discrete map `g ↦ (R, H)`.
//!
//! Node-local partials with respect to the jet come from a dense dual number;
//! they are chained with the sparse derivative matrices. Columns are indexed by
//! `node * ncomp + component`.

use super::kernel::{self, Jet};
use super::shape::{comp, pairs};
use super::stencil::{deriv_matrix, Stencils};
use super::{jet_fields, GridMetric};
use crate::error::{Error, Result};
use crate::linalg::SparseRows;
use crate::scalar::DualN;

const NIN: usize = 60;
type D60 = DualN<NIN>;

/// Sparse Jacobians `∂R/∂g` (nodes rows) and `∂H/∂g` (boundary-node rows).
#[derive(Clone, Debug)]
pub struct CurvatureJacobian {
    pub d_r: SparseRows,
    pub d_h: SparseRows,
}

impl CurvatureJacobian {
    /// Stacked `[∂R; ∂H]`.
    pub fn stacked(&self) -> SparseRows {
        let mut rows = self.d_r.rows.clone();
        rows.extend(self.d_h.rows.iter().cloned());
        SparseRows { ncols: self.d_r.ncols, rows }
    }
}

pub fn curvature_jacobian(m: &GridMetric) -> Result<CurvatureJacobian> {
    match m.n() {
        2 => jac_dim::<2>(m),
        3 => jac_dim::<3>(m),
        n => Err(Error::Unsupported(format!("Jacobian in dimension {n}"))),
    }
}

fn jac_dim<const D: usize>(m: &GridMetric) -> Result<CurvatureJacobian> {
    let shape = &m.shape;
    let st = Stencils::new(shape);
    let nc = D * (D + 1) / 2;
    let nodes = shape.num_nodes();
    let da: Vec<SparseRows> = (0..D).map(|a| deriv_matrix(shape, &st, a)).collect();
    let dab: Vec<SparseRows> = pairs(D).into_iter().map(|(a, b)| da[a].compose(&da[b])).collect();
    let jf = jet_fields(shape, &st, &m.components(), true);

    let seeded = |q: usize, second: bool| -> Jet<D60, D> {
        let mut jet = Jet::<D60, D>::zero();
        for i in 0..D {
            for j in 0..D {
                let c = comp(D, i, j);
                jet.g[i][j] = D60::var(jf.g[c][q], c);
                for a in 0..D {
                    jet.dg[a][i][j] = D60::var(jf.d[a][c][q], nc + a * nc + c);
                    if second {
                        for b in 0..D {
                            let p = comp(D, a, b);
                            jet.ddg[a][b][i][j] = D60::var(jf.dd[p][c][q], nc + D * nc + p * nc + c);
                        }
                    }
                }
            }
        }
        jet
    };

    let assemble = |q: usize, d: &[f64; NIN], second: bool| -> Vec<(usize, f64)> {
        let mut row = Vec::new();
        for c in 0..nc {
            if d[c] != 0.0 {
                row.push((q * nc + c, d[c]));
            }
            for a in 0..D {
                let w = d[nc + a * nc + c];
                if w != 0.0 {
                    for &(p, v) in &da[a].rows[q] {
                        row.push((p * nc + c, w * v));
                    }
                }
            }
            if second {
                for (pi, mat) in dab.iter().enumerate() {
                    let w = d[nc + D * nc + pi * nc + c];
                    if w != 0.0 {
                        for &(p, v) in &mat.rows[q] {
                            row.push((p * nc + c, w * v));
                        }
                    }
                }
            }
        }
        row
    };

    let mut r_rows = Vec::with_capacity(nodes);
    for q in 0..nodes {
        let jet = seeded(q, true);
        let (_, r) = kernel::ricci(&jet).ok_or(Error::DegenerateMetric { node: q, min_eig: 0.0 })?;
        r_rows.push(assemble(q, &r.d, true));
    }
    let mut h_rows = Vec::new();
    for (k, (q, face)) in shape.boundary_nodes().into_iter().enumerate() {
        let jet = seeded(q, false);
        let bp = kernel::boundary_point(&jet.g, &jet.dg, shape.boundary_axis, face.sign())
            .ok_or(Error::DegenerateBoundary { node: k })?;
        h_rows.push(assemble(q, &bp.h.d, false));
    }
    let ncols = nodes * nc;
    Ok(CurvatureJacobian { d_r: SparseRows::new(ncols, r_rows), d_h: SparseRows::new(ncols, h_rows) })
}
