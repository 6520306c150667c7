//! Linearized curvature map `S_g h = (δR h, 2δH h)`, its formal adjoint
//! `S*_g f = (A*f, B*f)`, the integration-by-parts identities linking them,
//! static-kernel residuals and the principal-symbol check.
//!
//! `delta_r` and `delta_h2` are exact derivatives of the discrete curvature
//! maps (dual-number evaluation). The `*_continuum` variants assemble the
//! classical formulas from grid derivatives and agree with them to second
//! order.

use crate::error::{Error, Result};
use crate::scalar::Dual;
use crate::tensor_grid::{
    boundary_generic, boundary_geometry, christoffel, comp, curvature, curvature_generic, hessian, integrate,
    inverse_dyn, pairs, partials, stencil, BoundaryField, BoundaryGeometry, GridMetric, Region, ScalarField,
    Stencils, SymTensorField, MAX_DIM,
};
use serde::{Deserialize, Serialize};

type Mat = [[f64; MAX_DIM]; MAX_DIM];

/// Residuals below this multiple of `‖f‖` declare a static kernel.
pub const STATIC_THRESHOLD: f64 = 1e-6;

/// `(δR h, 2δH h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizedPair {
    pub d_r: ScalarField,
    pub d_h2: BoundaryField,
}

/// `(A*f, B*f)`; `b_star` lives on boundary nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointPair {
    pub a_star: SymTensorField,
    pub b_star: SymTensorField,
}

fn check_h(m: &GridMetric, h: &SymTensorField) -> Result<()> {
    if h.n != m.n() || h.data.len() != m.g.data.len() {
        return Err(Error::ShapeMismatch { expected: m.g.data.len(), got: h.data.len() });
    }
    Ok(())
}

fn check_f(m: &GridMetric, f: &[f64]) -> Result<()> {
    if f.len() != m.shape.num_nodes() {
        return Err(Error::ShapeMismatch { expected: m.shape.num_nodes(), got: f.len() });
    }
    Ok(())
}

fn dual_components(m: &GridMetric, h: &SymTensorField) -> Vec<Vec<Dual>> {
    (0..m.shape.ncomp())
        .map(|c| m.g.component(c).into_iter().zip(h.component(c)).map(|(v, d)| Dual::new(v, d)).collect())
        .collect()
}

/// Exact directional derivative of the discrete scalar curvature along `h`.
pub fn delta_r(m: &GridMetric, h: &SymTensorField) -> Result<ScalarField> {
    check_h(m, h)?;
    let st = Stencils::new(&m.shape);
    let (_, r) = curvature_generic(&m.shape, &st, &dual_components(m, h))?;
    Ok(r.into_iter().map(|x| x.d).collect())
}

/// Exact directional derivative of `2H` along `h`.
pub fn delta_h2(m: &GridMetric, h: &SymTensorField) -> Result<BoundaryField> {
    check_h(m, h)?;
    let st = Stencils::new(&m.shape);
    let bd = boundary_generic(&m.shape, &st, &dual_components(m, h))?;
    Ok(bd.into_iter().map(|b| 2.0 * b.h.d).collect())
}

pub fn linearize(m: &GridMetric, h: &SymTensorField) -> Result<LinearizedPair> {
    Ok(LinearizedPair { d_r: delta_r(m, h)?, d_h2: delta_h2(m, h)? })
}

fn inverses(m: &GridMetric) -> Result<Vec<Mat>> {
    (0..m.shape.num_nodes())
        .map(|q| inverse_dyn(m.n(), &m.g.matrix(q)).ok_or(Error::DegenerateMetric { node: q, min_eig: 0.0 }))
        .collect()
}

/// `⟨a, b⟩` with both indices raised by `ginv`.
pub(crate) fn pair_with(n: usize, ginv: &Mat, a: &Mat, b: &Mat) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if a[i][j] == 0.0 {
                continue;
            }
            for k in 0..n {
                for l in 0..n {
                    s += ginv[i][k] * ginv[j][l] * a[i][j] * b[k][l];
                }
            }
        }
    }
    s
}

fn trace_with(n: usize, ginv: &Mat, a: &Mat) -> f64 {
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| ginv[i][j] * a[i][j]).sum()
}

/// `(div h)_j = g^{ik} ∇_k h_ij` per node.
fn div_sym(m: &GridMetric, gam: &[[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM]], ginv: &[Mat], h: &SymTensorField) -> Vec<[f64; MAX_DIM]> {
    let n = m.n();
    let st = Stencils::new(&m.shape);
    let dh: Vec<Vec<Vec<f64>>> =
        (0..n).map(|a| (0..h.ncomp()).map(|c| stencil::deriv(&m.shape, &st, &h.component(c), a)).collect()).collect();
    (0..m.shape.num_nodes())
        .map(|q| {
            let hm = h.matrix(q);
            let g = &gam[q];
            let mut out = [0.0; MAX_DIM];
            for (j, o) in out.iter_mut().enumerate().take(n) {
                let mut s = 0.0;
                for i in 0..n {
                    for k in 0..n {
                        let mut cov = dh[k][comp(n, i, j)][q];
                        for l in 0..n {
                            cov -= g[l][k][i] * hm[l][j] + g[l][k][j] * hm[i][l];
                        }
                        s += ginv[q][i][k] * cov;
                    }
                }
                *o = s;
            }
            out
        })
        .collect()
}

/// `∇^j w_j` for a covector field.
fn div_covector(m: &GridMetric, gam: &[[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM]], ginv: &[Mat], w: &[[f64; MAX_DIM]]) -> Vec<f64> {
    let n = m.n();
    let st = Stencils::new(&m.shape);
    let dw: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|j| stencil::deriv(&m.shape, &st, &w.iter().map(|v| v[j]).collect::<Vec<_>>(), a))
                .collect()
        })
        .collect();
    (0..m.shape.num_nodes())
        .map(|q| {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    let mut cov = dw[k][j][q];
                    for l in 0..n {
                        cov -= gam[q][l][k][j] * w[q][l];
                    }
                    s += ginv[q][j][k] * cov;
                }
            }
            s
        })
        .collect()
}

/// `δR h = −Δ(tr h) + div div h − ⟨h, Ric⟩` from grid derivatives.
pub fn delta_r_continuum(m: &GridMetric, h: &SymTensorField) -> Result<ScalarField> {
    check_h(m, h)?;
    let n = m.n();
    let ginv = inverses(m)?;
    let gam = christoffel(m)?;
    let (ric, _) = curvature(m)?;
    let tr: Vec<f64> = (0..m.shape.num_nodes()).map(|q| trace_with(n, &ginv[q], &h.matrix(q))).collect();
    let (_, lap_tr, _) = hessian(m, &tr)?;
    let divh = div_sym(m, &gam, &ginv, h);
    let divdiv = div_covector(m, &gam, &ginv, &divh);
    Ok((0..m.shape.num_nodes())
        .map(|q| -lap_tr[q] + divdiv[q] - pair_with(n, &ginv[q], &h.matrix(q), &ric.matrix(q)))
        .collect())
}

/// `2δH h = [d(tr h) − div h](ν) − div_γ X − ⟨Π, h⟩_γ` with `X` the tangential
/// part of the vector dual to `ω = h(·, ν)`.
pub fn delta_h2_continuum(m: &GridMetric, h: &SymTensorField) -> Result<BoundaryField> {
    check_h(m, h)?;
    let n = m.n();
    let shape = &m.shape;
    let ginv = inverses(m)?;
    let gam = christoffel(m)?;
    let bg = boundary_geometry(m)?;
    let tr: Vec<f64> = (0..shape.num_nodes()).map(|q| trace_with(n, &ginv[q], &h.matrix(q))).collect();
    let (dtr, _) = partials(shape, &tr);
    let divh = div_sym(m, &gam, &ginv, h);
    let nodes = shape.boundary_nodes();
    let y = shape.boundary_axis;

    // √det γ · X^i on boundary layers, spread into full-grid fields so the
    // tangential stencils can act on them
    let mut flux = vec![vec![0.0; shape.num_nodes()]; n];
    for (k, &(q, _)) in nodes.iter().enumerate() {
        let hm = h.matrix(q);
        let nu = &bg.nu[k];
        let omega: Vec<f64> = (0..n).map(|b| (0..n).map(|a| hm[b][a] * nu[a]).sum()).collect();
        for (i, fl) in flux.iter_mut().enumerate() {
            if i == y {
                continue;
            }
            let xi: f64 = (0..n).map(|j| bg.gamma_inv.get(k, i, j) * omega[j]).sum();
            fl[q] = bg.area[k] * xi;
        }
    }
    let st = Stencils::new(shape);
    let mut div_x = vec![0.0; shape.num_nodes()];
    for i in (0..n).filter(|&i| i != y) {
        let d = stencil::deriv(shape, &st, &flux[i], i);
        for (v, dv) in div_x.iter_mut().zip(d) {
            *v += dv;
        }
    }
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(k, &(q, _))| {
            let nu = &bg.nu[k];
            let normal: f64 = (0..n).map(|a| nu[a] * (dtr[a][q] - divh[q][a])).sum();
            let pih: f64 = {
                let pi = bg.pi.matrix(k);
                let gi = bg.gamma_inv.matrix(k);
                pair_with(n, &gi, &pi, &h.matrix(q))
            };
            normal - div_x[q] / bg.area[k] - pih
        })
        .collect())
}

/// `A*f = −(Δf) g + Hess f − f Ric` and `B*f = (∂f/∂ν) γ − f Π`.
pub fn adjoint(m: &GridMetric, f: &[f64]) -> Result<AdjointPair> {
    check_f(m, f)?;
    let n = m.n();
    let (ric, _) = curvature(m)?;
    let (hess, lap, _) = hessian(m, f)?;
    let mut a_star = SymTensorField::zeros(n, m.shape.num_nodes());
    for q in 0..m.shape.num_nodes() {
        for (i, j) in pairs(n) {
            a_star.set(q, i, j, -lap[q] * m.g.get(q, i, j) + hess.get(q, i, j) - f[q] * ric.get(q, i, j));
        }
    }
    let bg = boundary_geometry(m)?;
    let dnu = crate::tensor_grid::normal_derivative(m, &bg, f);
    let nodes = m.shape.boundary_nodes();
    let mut b_star = SymTensorField::zeros(n, nodes.len());
    for (k, &(q, _)) in nodes.iter().enumerate() {
        for (i, j) in pairs(n) {
            b_star.set(k, i, j, dnu[k] * bg.gamma.get(k, i, j) - f[q] * bg.pi.get(k, i, j));
        }
    }
    Ok(AdjointPair { a_star, b_star })
}

/// `(a, b)_M = ∫⟨a, b⟩_g dv`.
pub fn tensor_inner(m: &GridMetric, a: &SymTensorField, b: &SymTensorField) -> Result<f64> {
    let n = m.n();
    let ginv = inverses(m)?;
    let field: Vec<f64> = (0..m.shape.num_nodes()).map(|q| pair_with(n, &ginv[q], &a.matrix(q), &b.matrix(q))).collect();
    integrate(&field, m, Region::Interior)
}

/// `(a, b)_{∂M} = ∮⟨a, b⟩_γ dσ` for a boundary tensor `a` and the trace of a
/// node tensor `b`.
fn boundary_tensor_inner(m: &GridMetric, bg: &BoundaryGeometry, a: &SymTensorField, b: &SymTensorField) -> Result<f64> {
    let nodes = m.shape.boundary_nodes();
    let field: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(k, &(q, _))| pair_with(m.n(), &bg.gamma_inv.matrix(k), &a.matrix(k), &b.matrix(q)))
        .collect();
    integrate(&field, m, Region::Boundary)
}

fn l2(m: &GridMetric, f: &[f64]) -> Result<f64> {
    let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    Ok(integrate(&sq, m, Region::Interior)?.sqrt())
}

fn l2_boundary(m: &GridMetric, f: &[f64]) -> Result<f64> {
    let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    Ok(integrate(&sq, m, Region::Boundary)?.sqrt())
}

/// `|∫f div div h − ∫⟨Hess f, h⟩ − ∮[f (div h)(ν) − h(∇f, ν)]|`.
pub fn divergence_identity_residual(m: &GridMetric, h: &SymTensorField, f: &[f64]) -> Result<f64> {
    check_h(m, h)?;
    check_f(m, f)?;
    let n = m.n();
    let ginv = inverses(m)?;
    let gam = christoffel(m)?;
    let divh = div_sym(m, &gam, &ginv, h);
    let divdiv = div_covector(m, &gam, &ginv, &divh);
    let (hess, _, _) = hessian(m, f)?;
    let nodes = m.shape.num_nodes();
    let lhs: Vec<f64> = (0..nodes).map(|q| f[q] * divdiv[q]).collect();
    let vol: Vec<f64> = (0..nodes).map(|q| pair_with(n, &ginv[q], &hess.matrix(q), &h.matrix(q))).collect();
    let bg = boundary_geometry(m)?;
    let (df, _) = partials(&m.shape, f);
    let bd: Vec<f64> = m
        .shape
        .boundary_nodes()
        .iter()
        .enumerate()
        .map(|(k, &(q, _))| {
            let nu = &bg.nu[k];
            let hm = h.matrix(q);
            let div_nu: f64 = (0..n).map(|a| nu[a] * divh[q][a]).sum();
            // h(∇f, ν) with ∇f^a = g^{ab} ∂_b f
            let grad: Vec<f64> = (0..n).map(|a| (0..n).map(|b| ginv[q][a][b] * df[b][q]).sum()).collect();
            let hgn: f64 = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| hm[a][b] * grad[a] * nu[b]).sum();
            f[q] * div_nu - hgn
        })
        .collect();
    let res = integrate(&lhs, m, Region::Interior)?
        - integrate(&vol, m, Region::Interior)?
        - integrate(&bd, m, Region::Boundary)?;
    Ok(res.abs())
}

/// `|(δR h, f) − (A*f, h) − (B*f, h)_{∂M} + (2δH h, f)_{∂M}| / (‖h‖ ‖f‖)`.
pub fn adjointness_residual(m: &GridMetric, h: &SymTensorField, f: &[f64]) -> Result<f64> {
    check_h(m, h)?;
    check_f(m, f)?;
    if f.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let lin = linearize(m, h)?;
    let adj = adjoint(m, f)?;
    let bg = boundary_geometry(m)?;
    let ftr = crate::tensor_grid::trace(&m.shape, f);
    let dr_f: Vec<f64> = lin.d_r.iter().zip(f).map(|(a, b)| a * b).collect();
    let dh_f: Vec<f64> = lin.d_h2.iter().zip(&ftr).map(|(a, b)| a * b).collect();
    let lhs = integrate(&dr_f, m, Region::Interior)? - tensor_inner(m, &adj.a_star, h)?;
    let rhs = boundary_tensor_inner(m, &bg, &adj.b_star, h)? - integrate(&dh_f, m, Region::Boundary)?;
    let norm = tensor_inner(m, h, h)?.sqrt() * l2(m, f)?;
    Ok((lhs - rhs).abs() / norm)
}

/// Residuals of the static equations for `f` normalized to unit `L²` norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticResidual {
    /// `‖Hess f − f(Ric − R/(n−1) g)‖`
    pub r_int: f64,
    /// `‖f(Π − H/(n−1) γ)‖`
    pub r_bd: f64,
    /// `‖Δf + R f/(n−1)‖`
    pub r_trace_int: f64,
    /// `‖∂f/∂ν − H f/(n−1)‖`
    pub r_trace_bd: f64,
}

impl StaticResidual {
    pub fn max(&self) -> f64 {
        self.r_int.max(self.r_bd).max(self.r_trace_int).max(self.r_trace_bd)
    }

    /// All residuals below [`STATIC_THRESHOLD`].
    pub fn is_static(&self) -> bool {
        self.max() < STATIC_THRESHOLD
    }
}

pub fn static_residual(m: &GridMetric, f: &[f64]) -> Result<StaticResidual> {
    check_f(m, f)?;
    let norm = l2(m, f)?;
    if !(norm > 0.0) {
        return Err(Error::Precondition("static residual needs a nonzero f".into()));
    }
    let f: Vec<f64> = f.iter().map(|v| v / norm).collect();
    let n = m.n();
    let nf = n as f64;
    let ginv = inverses(m)?;
    let (ric, r) = curvature(m)?;
    let (hess, lap, _) = hessian(m, &f)?;
    let nodes = m.shape.num_nodes();
    let mut int_sq = vec![0.0; nodes];
    let mut tr_int = vec![0.0; nodes];
    for q in 0..nodes {
        let mut t = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                t[i][j] = hess.get(q, i, j) - f[q] * (ric.get(q, i, j) - r[q] / (nf - 1.0) * m.g.get(q, i, j));
            }
        }
        int_sq[q] = pair_with(n, &ginv[q], &t, &t);
        tr_int[q] = lap[q] + r[q] * f[q] / (nf - 1.0);
    }
    let bg = boundary_geometry(m)?;
    let dnu = crate::tensor_grid::normal_derivative(m, &bg, &f);
    let bnodes = m.shape.boundary_nodes();
    let mut bd_sq = vec![0.0; bnodes.len()];
    let mut tr_bd = vec![0.0; bnodes.len()];
    for (k, &(q, _)) in bnodes.iter().enumerate() {
        let mut t = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                t[i][j] = f[q] * (bg.pi.get(k, i, j) - bg.h[k] / (nf - 1.0) * bg.gamma.get(k, i, j));
            }
        }
        bd_sq[k] = pair_with(n, &bg.gamma_inv.matrix(k), &t, &t);
        tr_bd[k] = dnu[k] - bg.h[k] * f[q] / (nf - 1.0);
    }
    Ok(StaticResidual {
        r_int: integrate(&int_sq, m, Region::Interior)?.max(0.0).sqrt(),
        r_bd: integrate(&bd_sq, m, Region::Boundary)?.max(0.0).sqrt(),
        r_trace_int: l2(m, &tr_int)?,
        r_trace_bd: l2_boundary(m, &tr_bd)?,
    })
}

/// Principal-symbol diagnostics at one node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolCheck {
    /// Norm of `‖ε‖² g − ε ⊗ ε`, the only singular value of `f ↦ (‖ε‖² g − ε ⊗ ε) f`.
    pub min_singular_value: f64,
    /// `g^{ij}(‖ε‖² g_ij − ε_i ε_j) = (n − 1)‖ε‖²`.
    pub trace: f64,
    /// `|⟨ε, ν⟩|` at boundary nodes, `None` in the interior.
    pub shapiro_proxy: Option<f64>,
}

pub fn symbol_check(m: &GridMetric, eps: &[f64], node: usize) -> Result<SymbolCheck> {
    let n = m.n();
    if eps.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: eps.len() });
    }
    if eps.iter().all(|v| *v == 0.0) {
        return Err(Error::Precondition("covector must be nonzero".into()));
    }
    if node >= m.shape.num_nodes() {
        return Err(Error::Precondition(format!("node {node} out of range")));
    }
    let g = m.g.matrix(node);
    let ginv = inverse_dyn(n, &g).ok_or(Error::DegenerateMetric { node, min_eig: 0.0 })?;
    let e2: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| ginv[i][j] * eps[i] * eps[j]).sum();
    let mut t = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            t[i][j] = e2 * g[i][j] - eps[i] * eps[j];
        }
    }
    let shapiro_proxy = match m.shape.boundary_nodes().iter().position(|&(q, _)| q == node) {
        Some(k) => {
            let bg = boundary_geometry(m)?;
            Some((0..n).map(|a| eps[a] * bg.nu[k][a]).sum::<f64>().abs())
        }
        None => None,
    };
    Ok(SymbolCheck {
        min_singular_value: pair_with(n, &ginv, &t, &t).sqrt(),
        trace: trace_with(n, &ginv, &t),
        shapiro_proxy,
    })
}

/// JSON record emitted by refinement studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub op: String,
    pub grid: Vec<usize>,
    pub residuals: Vec<f64>,
    pub spacing: f64,
}

/// Observed order `log2(e_k / e_{k+1})` for successive halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
