//! Plain Steklov problem `Δf = 0`, `∂_ν f = σ f` on a triangle mesh.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{lowest_eigenpair, EigenConfig};
use crate::linalg::BandedSpd;
use crate::surface2d::{boundary_mass, cotangent_stiffness, TriConformalSurface};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteklovReport {
    /// First nonzero eigenvalue.
    pub sigma1: f64,
    /// Boundary values of the eigenfunction, ordered as the boundary vertices
    /// in increasing index, normalized by `∮f² = 1`.
    pub boundary_values: Vec<f64>,
    pub boundary_vertices: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// First nonzero Steklov eigenvalue with the current conformal factor.
///
/// Cotangent stiffness, consistent P1 boundary mass, Schur complement onto
/// the boundary; the constant mode is deflated.
pub fn steklov_plain(s: &TriConformalSurface) -> Result<SteklovReport> {
    let nv = s.num_vertices();
    let bverts: Vec<usize> = (0..nv).filter(|&v| s.boundary[v]).collect();
    let inner: Vec<usize> = (0..nv).filter(|&v| !s.boundary[v]).collect();
    if bverts.len() < 3 {
        return Err(Error::Precondition("Steklov problem needs a boundary".into()));
    }
    let mut slot = vec![(false, 0usize); nv];
    for (i, &v) in inner.iter().enumerate() {
        slot[v] = (false, i);
    }
    for (i, &v) in bverts.iter().enumerate() {
        slot[v] = (true, i);
    }
    let entries = cotangent_stiffness(s)?;
    let band = entries
        .iter()
        .filter(|&&(i, j, _)| !s.boundary[i] && !s.boundary[j])
        .map(|&(i, j, _)| slot[i].1.abs_diff(slot[j].1))
        .max()
        .unwrap_or(0);
    let nb = bverts.len();
    let mut kii = BandedSpd::zeros(inner.len(), band);
    let mut kib = DMatrix::zeros(inner.len(), nb);
    let mut kbb = DMatrix::zeros(nb, nb);
    for &(i, j, w) in &entries {
        let (si, sj) = (slot[i], slot[j]);
        match (si.0, sj.0) {
            (false, false) => kii.add(si.1, sj.1, w),
            (false, true) => kib[(si.1, sj.1)] += w,
            (true, false) => kib[(sj.1, si.1)] += w,
            (true, true) => {
                kbb[(si.1, sj.1)] += w;
                if i != j {
                    kbb[(sj.1, si.1)] += w;
                }
            }
        }
    }
    if !inner.is_empty() && !kii.factor() {
        return Err(Error::Singular("interior cotangent block is not positive definite".into()));
    }
    let mut sch = kbb;
    for c in 0..nb {
        let mut col: Vec<f64> = kib.column(c).iter().copied().collect();
        if !inner.is_empty() {
            kii.solve(&mut col);
        }
        let x = DVector::from_vec(col);
        for r in 0..nb {
            sch[(r, c)] -= kib.column(r).dot(&x);
        }
    }
    let sch = (&sch + sch.transpose()) * 0.5;

    let mut mass = DMatrix::zeros(nb, nb);
    for (i, j, w) in boundary_mass(s) {
        mass[(slot[i].1, slot[j].1)] += w;
    }
    let chol = nalgebra::Cholesky::new(mass).ok_or_else(|| Error::Singular("boundary mass".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::Singular("boundary mass factor".into()))?;
    let mut c = &linv * &sch * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    // push the constant mode to the top of the spectrum
    let ones = (l.transpose() * DVector::from_element(nb, 1.0)).normalize();
    let lift = c.norm();
    c += &ones * ones.transpose() * lift;
    let start = DVector::from_fn(nb, |i, _| ((i as f64) * 0.754_877_666).fract() - 0.5);
    let pair = lowest_eigenpair(&c, start, &EigenConfig::default())?;
    let f = linv.transpose() * &pair.vector;
    Ok(SteklovReport {
        sigma1: pair.value,
        boundary_values: f.iter().copied().collect(),
        boundary_vertices: bverts,
        iterations: pair.iterations,
        residual: pair.residual,
        converged: pair.converged,
    })
}
