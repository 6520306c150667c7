//! Coordinate tensor calculus on structured grids with boundary.
//!
//! A [`GridMetric`] stores the packed components of `g` at every node. All
//! curvature quantities are evaluated node by node from the metric jet
//! `(g, ∂g, ∂∂g)` built with the stencils in [`stencil`].

pub mod jacobian;
pub mod kernel;
pub mod shape;
pub mod stencil;

pub use shape::{comp, pairs, Face, GridShape, MAX_DIM};
pub use stencil::Stencils;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use kernel::Jet;
use serde::{Deserialize, Serialize};

/// Values at every grid node.
pub type ScalarField = Vec<f64>;
/// Values at boundary nodes, ordered as [`GridShape::boundary_nodes`].
pub type BoundaryField = Vec<f64>;

/// Smallest admissible metric eigenvalue.
pub const EPS_PD: f64 = 1e-8;

/// Symmetric (0,2)-tensor per node in packed upper-triangular storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTensorField {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymTensorField {
    pub fn zeros(n: usize, nodes: usize) -> Self {
        Self { n, data: vec![0.0; nodes * n * (n + 1) / 2] }
    }

    pub fn ncomp(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / self.ncomp()
    }

    #[inline]
    pub fn get(&self, node: usize, i: usize, j: usize) -> f64 {
        self.data[node * self.ncomp() + comp(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, node: usize, i: usize, j: usize, v: f64) {
        let k = node * self.ncomp() + comp(self.n, i, j);
        self.data[k] = v;
    }

    pub fn matrix(&self, node: usize) -> [[f64; MAX_DIM]; MAX_DIM] {
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..self.n {
            for j in 0..self.n {
                m[i][j] = self.get(node, i, j);
            }
        }
        m
    }

    /// Component `c` as a node field.
    pub fn component(&self, c: usize) -> Vec<f64> {
        let m = self.ncomp();
        self.data.iter().skip(c).step_by(m).copied().collect()
    }

    pub fn from_fn(n: usize, nodes: usize, mut f: impl FnMut(usize) -> [[f64; MAX_DIM]; MAX_DIM]) -> Self {
        let mut t = Self::zeros(n, nodes);
        for q in 0..nodes {
            let m = f(q);
            for (i, j) in pairs(n) {
                t.set(q, i, j, 0.5 * (m[i][j] + m[j][i]));
            }
        }
        t
    }

    pub fn axpy(&self, s: f64, other: &SymTensorField) -> SymTensorField {
        assert_eq!(self.data.len(), other.data.len());
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect();
        SymTensorField { n: self.n, data }
    }

    pub fn scale(&self, s: f64) -> SymTensorField {
        SymTensorField { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }
}

/// Metric components on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMetric {
    pub shape: GridShape,
    pub g: SymTensorField,
}

impl GridMetric {
    pub fn new(shape: GridShape, g: SymTensorField) -> Result<Self> {
        shape.validate()?;
        let expected = shape.num_nodes() * shape.ncomp();
        if g.n != shape.n || g.data.len() != expected {
            return Err(Error::ShapeMismatch { expected, got: g.data.len() });
        }
        let m = Self { shape, g };
        m.check_positive()?;
        Ok(m)
    }

    /// Metric sampled from a function of node coordinates.
    pub fn from_fn(shape: GridShape, f: impl Fn(&[f64; MAX_DIM]) -> [[f64; MAX_DIM]; MAX_DIM]) -> Result<Self> {
        let n = shape.n;
        let g = SymTensorField::from_fn(n, shape.num_nodes(), |q| f(&shape.coords(q)));
        Self::new(shape, g)
    }

    /// Euclidean metric.
    pub fn flat(shape: GridShape) -> Result<Self> {
        Self::from_fn(shape, |_| {
            let mut m = [[0.0; MAX_DIM]; MAX_DIM];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            m
        })
    }

    pub fn n(&self) -> usize {
        self.shape.n
    }

    pub fn check_positive(&self) -> Result<()> {
        let n = self.shape.n;
        for q in 0..self.shape.num_nodes() {
            let m = self.g.matrix(q);
            let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
            let ev = mat.symmetric_eigenvalues();
            let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min >= EPS_PD) {
                return Err(Error::DegenerateMetric { node: q, min_eig: min });
            }
        }
        Ok(())
    }

    /// `self + t h` (validated).
    pub fn perturbed(&self, h: &SymTensorField, t: f64) -> Result<GridMetric> {
        GridMetric::new(self.shape.clone(), self.g.axpy(t, h))
    }

    /// `c g`.
    pub fn scaled(&self, c: f64) -> Result<GridMetric> {
        GridMetric::new(self.shape.clone(), self.g.scale(c))
    }

    pub fn components(&self) -> Vec<Vec<f64>> {
        (0..self.shape.ncomp()).map(|c| self.g.component(c)).collect()
    }
}

/// Metric jets at all nodes, stored per component.
pub(crate) struct JetFields<T> {
    pub g: Vec<Vec<T>>,
    /// `d[a][c]`
    pub d: Vec<Vec<Vec<T>>>,
    /// `dd[pair(a,b)][c]`
    pub dd: Vec<Vec<Vec<T>>>,
}

pub(crate) fn jet_fields<T: Scalar>(shape: &GridShape, st: &Stencils, comps: &[Vec<T>], second: bool) -> JetFields<T> {
    let n = shape.n;
    let d: Vec<Vec<Vec<T>>> =
        (0..n).map(|a| comps.iter().map(|f| stencil::deriv(shape, st, f, a)).collect()).collect();
    let dd = if second {
        pairs(n)
            .into_iter()
            .map(|(a, b)| d[b].iter().map(|f| stencil::deriv(shape, st, f, a)).collect())
            .collect()
    } else {
        Vec::new()
    };
    JetFields { g: comps.to_vec(), d, dd }
}

pub(crate) fn jet_at<T: Scalar, const D: usize>(jf: &JetFields<T>, q: usize, second: bool) -> Jet<T, D> {
    let mut jet = Jet::<T, D>::zero();
    for i in 0..D {
        for j in 0..D {
            let c = comp(D, i, j);
            jet.g[i][j] = jf.g[c][q];
            for a in 0..D {
                jet.dg[a][i][j] = jf.d[a][c][q];
                if second {
                    for b in 0..D {
                        jet.ddg[a][b][i][j] = jf.dd[comp(D, a, b)][c][q];
                    }
                }
            }
        }
    }
    jet
}

/// Ricci components (packed, per component) and scalar curvature.
pub(crate) fn curvature_generic<T: Scalar>(
    shape: &GridShape,
    st: &Stencils,
    comps: &[Vec<T>],
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    match shape.n {
        2 => curvature_dim::<T, 2>(shape, st, comps),
        3 => curvature_dim::<T, 3>(shape, st, comps),
        4 => curvature_dim::<T, 4>(shape, st, comps),
        n => Err(Error::InvalidShape(format!("dimension {n}"))),
    }
}

fn curvature_dim<T: Scalar, const D: usize>(
    shape: &GridShape,
    st: &Stencils,
    comps: &[Vec<T>],
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let jf = jet_fields(shape, st, comps, true);
    let nodes = shape.num_nodes();
    let m = D * (D + 1) / 2;
    let mut ric = vec![vec![T::zero(); nodes]; m];
    let mut r = vec![T::zero(); nodes];
    for q in 0..nodes {
        let jet = jet_at::<T, D>(&jf, q, true);
        let (rc, rq) = kernel::ricci(&jet).ok_or(Error::DegenerateMetric { node: q, min_eig: 0.0 })?;
        for (c, (i, j)) in pairs(D).into_iter().enumerate() {
            ric[c][q] = rc[i][j];
        }
        r[q] = rq;
    }
    Ok((ric, r))
}

/// Boundary data at one boundary node in packed dynamic form.
#[derive(Clone, Debug)]
pub(crate) struct BoundaryData<T> {
    pub nu: Vec<T>,
    pub proj: Vec<T>,
    pub pi: Vec<T>,
    pub h: T,
    pub area: T,
}

pub(crate) fn boundary_generic<T: Scalar>(
    shape: &GridShape,
    st: &Stencils,
    comps: &[Vec<T>],
) -> Result<Vec<BoundaryData<T>>> {
    match shape.n {
        2 => boundary_dim::<T, 2>(shape, st, comps),
        3 => boundary_dim::<T, 3>(shape, st, comps),
        4 => boundary_dim::<T, 4>(shape, st, comps),
        n => Err(Error::InvalidShape(format!("dimension {n}"))),
    }
}

fn boundary_dim<T: Scalar, const D: usize>(
    shape: &GridShape,
    st: &Stencils,
    comps: &[Vec<T>],
) -> Result<Vec<BoundaryData<T>>> {
    let jf = jet_fields(shape, st, comps, false);
    shape
        .boundary_nodes()
        .into_iter()
        .enumerate()
        .map(|(k, (q, face))| {
            let jet = jet_at::<T, D>(&jf, q, false);
            let bp = kernel::boundary_point(&jet.g, &jet.dg, shape.boundary_axis, face.sign())
                .ok_or(Error::DegenerateBoundary { node: k })?;
            let ps = pairs(D);
            Ok(BoundaryData {
                nu: bp.nu.to_vec(),
                proj: ps.iter().map(|&(i, j)| bp.proj[i][j]).collect(),
                pi: ps.iter().map(|&(i, j)| bp.pi[i][j]).collect(),
                h: bp.h,
                area: bp.area,
            })
        })
        .collect()
}

/// Christoffel symbols per node, `out[q][k][i][j] = Γ^k_ij`.
pub fn christoffel(m: &GridMetric) -> Result<Vec<[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM]>> {
    let st = Stencils::new(&m.shape);
    let jf = jet_fields(&m.shape, &st, &m.components(), false);
    let n = m.n();
    (0..m.shape.num_nodes())
        .map(|q| {
            let mut out = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
            macro_rules! fill {
                ($d:literal) => {{
                    let jet = jet_at::<f64, $d>(&jf, q, false);
                    let ginv = kernel::inverse(&jet.g).ok_or(Error::DegenerateMetric { node: q, min_eig: 0.0 })?;
                    let (gam, _) = kernel::christoffel(&ginv, &jet.dg);
                    for k in 0..$d {
                        for i in 0..$d {
                            for j in 0..$d {
                                out[k][i][j] = gam[k][i][j];
                            }
                        }
                    }
                }};
            }
            match n {
                2 => fill!(2),
                3 => fill!(3),
                _ => fill!(4),
            }
            Ok(out)
        })
        .collect()
}

/// Ricci tensor and scalar curvature.
pub fn curvature(m: &GridMetric) -> Result<(SymTensorField, ScalarField)> {
    let st = Stencils::new(&m.shape);
    let (ric, r) = curvature_generic(&m.shape, &st, &m.components())?;
    Ok((pack(m.n(), &ric), r))
}

/// Scalar curvature only.
pub fn scalar_curvature(m: &GridMetric) -> Result<ScalarField> {
    Ok(curvature(m)?.1)
}

pub(crate) fn pack(n: usize, comps: &[Vec<f64>]) -> SymTensorField {
    let nodes = comps[0].len();
    let mc = comps.len();
    let mut data = vec![0.0; nodes * mc];
    for (c, f) in comps.iter().enumerate() {
        for (q, v) in f.iter().enumerate() {
            data[q * mc + c] = *v;
        }
    }
    SymTensorField { n, data }
}

/// Boundary geometry on both faces, ordered as [`GridShape::boundary_nodes`].
///
/// `gamma`, `pi` are stored as full `n × n` packed tensors whose rows and
/// columns along the boundary axis vanish.
#[derive(Clone, Debug)]
pub struct BoundaryGeometry {
    pub nu: Vec<Vec<f64>>,
    pub gamma: SymTensorField,
    /// Inverse induced metric padded with zeros.
    pub gamma_inv: SymTensorField,
    pub pi: SymTensorField,
    pub h: BoundaryField,
    /// `sqrt(det γ)` per boundary node.
    pub area: Vec<f64>,
}

impl BoundaryGeometry {
    /// `⟨A, B⟩_γ` at boundary node `k` for packed tensors.
    pub fn pair(&self, k: usize, a: &[f64], b: &[f64]) -> f64 {
        let n = self.gamma.n;
        let p = |i, j| self.gamma_inv.get(k, i, j);
        let at = |t: &[f64], i, j| t[comp(n, i, j)];
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k2 in 0..n {
                    for l in 0..n {
                        s += p(i, k2) * p(j, l) * at(a, i, j) * at(b, k2, l);
                    }
                }
            }
        }
        s
    }
}

pub fn boundary_geometry(m: &GridMetric) -> Result<BoundaryGeometry> {
    let st = Stencils::new(&m.shape);
    let data = boundary_generic(&m.shape, &st, &m.components())?;
    let n = m.n();
    let nb = data.len();
    let mut gamma = SymTensorField::zeros(n, nb);
    let mut gamma_inv = SymTensorField::zeros(n, nb);
    let mut pi = SymTensorField::zeros(n, nb);
    let nodes = m.shape.boundary_nodes();
    let y = m.shape.boundary_axis;
    for (k, d) in data.iter().enumerate() {
        let q = nodes[k].0;
        for (c, (i, j)) in pairs(n).into_iter().enumerate() {
            if i != y && j != y {
                gamma.set(k, i, j, m.g.get(q, i, j));
            }
            gamma_inv.set(k, i, j, d.proj[c]);
            pi.set(k, i, j, d.pi[c]);
        }
    }
    Ok(BoundaryGeometry {
        nu: data.iter().map(|d| d.nu.clone()).collect(),
        gamma,
        gamma_inv,
        pi,
        h: data.iter().map(|d| d.h).collect(),
        area: data.iter().map(|d| d.area).collect(),
    })
}

/// Integration region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Interior,
    Boundary,
    Face(Face),
}

/// Quadrature weights including the metric density: `W_q sqrt(det g)` on the
/// interior, `w_q sqrt(det γ)` on boundary nodes.
pub fn volume_weights(m: &GridMetric) -> Vec<f64> {
    let st = Stencils::new(&m.shape);
    let w = stencil::node_weights(&m.shape, &st);
    (0..m.shape.num_nodes())
        .map(|q| {
            let g = m.g.matrix(q);
            w[q] * det_dyn(m.n(), &g).sqrt()
        })
        .collect()
}

pub fn boundary_weights(m: &GridMetric) -> Result<Vec<f64>> {
    let st = Stencils::new(&m.shape);
    let bg = boundary_geometry(m)?;
    Ok(m
        .shape
        .boundary_nodes()
        .iter()
        .enumerate()
        .map(|(k, &(q, _))| stencil::face_weight(&m.shape, &st, q) * bg.area[k])
        .collect())
}

pub(crate) fn det_dyn(n: usize, g: &[[f64; MAX_DIM]; MAX_DIM]) -> f64 {
    match n {
        2 => g[0][0] * g[1][1] - g[0][1] * g[1][0],
        3 => {
            let a: [[f64; 3]; 3] = [[g[0][0], g[0][1], g[0][2]], [g[1][0], g[1][1], g[1][2]], [g[2][0], g[2][1], g[2][2]]];
            kernel::det(&a)
        }
        _ => {
            let a: [[f64; 4]; 4] = [
                [g[0][0], g[0][1], g[0][2], g[0][3]],
                [g[1][0], g[1][1], g[1][2], g[1][3]],
                [g[2][0], g[2][1], g[2][2], g[2][3]],
                [g[3][0], g[3][1], g[3][2], g[3][3]],
            ];
            kernel::det(&a)
        }
    }
}

/// Quadrature of a node field (interior) or boundary field.
pub fn integrate(field: &[f64], m: &GridMetric, region: Region) -> Result<f64> {
    match region {
        Region::Interior => {
            let expected = m.shape.num_nodes();
            if field.len() != expected {
                return Err(Error::ShapeMismatch { expected, got: field.len() });
            }
            Ok(volume_weights(m).iter().zip(field).map(|(w, f)| w * f).sum())
        }
        Region::Boundary | Region::Face(_) => {
            let expected = m.shape.num_boundary_nodes();
            if field.len() != expected {
                return Err(Error::ShapeMismatch { expected, got: field.len() });
            }
            let w = boundary_weights(m)?;
            let nodes = m.shape.boundary_nodes();
            Ok((0..expected)
                .filter(|&k| match region {
                    Region::Face(f) => nodes[k].1 == f,
                    _ => true,
                })
                .map(|k| w[k] * field[k])
                .sum())
        }
    }
}

/// Gradient components `∂_a f` and packed second derivatives `∂_a ∂_b f`.
pub fn partials(shape: &GridShape, f: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let st = Stencils::new(shape);
    let d: Vec<Vec<f64>> = (0..shape.n).map(|a| stencil::deriv(shape, &st, f, a)).collect();
    let dd = pairs(shape.n).into_iter().map(|(a, b)| stencil::deriv(shape, &st, &d[b], a)).collect();
    (d, dd)
}

/// Covariant Hessian (packed), Laplacian and `|∇f|²` of a node field.
pub fn hessian(m: &GridMetric, f: &[f64]) -> Result<(SymTensorField, ScalarField, ScalarField)> {
    let n = m.n();
    let (d, dd) = partials(&m.shape, f);
    let gam = christoffel(m)?;
    let nodes = m.shape.num_nodes();
    let mut hess = SymTensorField::zeros(n, nodes);
    let mut lap = vec![0.0; nodes];
    let mut grad2 = vec![0.0; nodes];
    for q in 0..nodes {
        let ginv = inverse_dyn(n, &m.g.matrix(q)).ok_or(Error::DegenerateMetric { node: q, min_eig: 0.0 })?;
        for (c, (i, j)) in pairs(n).into_iter().enumerate() {
            let mut v = dd[c][q];
            for k in 0..n {
                v -= gam[q][k][i][j] * d[k][q];
            }
            hess.set(q, i, j, v);
        }
        for i in 0..n {
            for j in 0..n {
                lap[q] += ginv[i][j] * hess.get(q, i, j);
                grad2[q] += ginv[i][j] * d[i][q] * d[j][q];
            }
        }
    }
    Ok((hess, lap, grad2))
}

pub(crate) fn inverse_dyn(n: usize, g: &[[f64; MAX_DIM]; MAX_DIM]) -> Option<[[f64; MAX_DIM]; MAX_DIM]> {
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| g[i][j]);
    let inv = mat.try_inverse()?;
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = inv[(i, j)];
        }
    }
    Some(out)
}

/// Normal derivative `∂f/∂ν` at boundary nodes.
pub fn normal_derivative(m: &GridMetric, bg: &BoundaryGeometry, f: &[f64]) -> BoundaryField {
    let (d, _) = partials(&m.shape, f);
    m.shape
        .boundary_nodes()
        .iter()
        .enumerate()
        .map(|(k, &(q, _))| (0..m.n()).map(|a| bg.nu[k][a] * d[a][q]).sum())
        .collect()
}

/// Restriction of a node field to boundary nodes.
pub fn trace(shape: &GridShape, f: &[f64]) -> BoundaryField {
    shape.boundary_nodes().iter().map(|&(q, _)| f[q]).collect()
}

/// Result of a conformal change `ĝ = e^{2f} g` with formula predictions.
#[derive(Clone, Debug)]
pub struct ConformalPrediction {
    pub metric: GridMetric,
    pub ric: SymTensorField,
    pub r: ScalarField,
    pub pi: SymTensorField,
    pub h: BoundaryField,
    /// `u`-form predictions with `u = e^{(n−2)f/2}` (n ≥ 3 only).
    pub r_from_u: Option<ScalarField>,
    pub h_from_u: Option<BoundaryField>,
}

/// `ĝ = e^{2f} g` together with the curvature predicted by the conformal change
/// formulas evaluated from quantities of `g`.
///
/// Mean curvature is the trace of `Π`, so `Ĥ = e^{−f}(H + (n−1) ∂_ν f)` and, in
/// the `u`-form, `Ĥ = (2(n−1)/(n−2)) 𝓑u / u^{n/(n−2)}` with
/// `𝓑 = ∂_ν + (n−2)/(2(n−1)) H`.
pub fn conformal_transform(m: &GridMetric, f: &[f64]) -> Result<ConformalPrediction> {
    let n = m.n();
    let nf = n as f64;
    let nodes = m.shape.num_nodes();
    if f.len() != nodes {
        return Err(Error::ShapeMismatch { expected: nodes, got: f.len() });
    }
    let metric = conformal_metric(m, f)?;
    let (ric, r) = curvature(m)?;
    let (hess, lap, grad2) = hessian(m, f)?;
    let (d, _) = partials(&m.shape, f);
    let mut ric_hat = SymTensorField::zeros(n, nodes);
    let mut r_hat = vec![0.0; nodes];
    for q in 0..nodes {
        for (i, j) in pairs(n) {
            let v = ric.get(q, i, j)
                - (nf - 2.0) * (hess.get(q, i, j) - d[i][q] * d[j][q])
                - (lap[q] + (nf - 2.0) * grad2[q]) * m.g.get(q, i, j);
            ric_hat.set(q, i, j, v);
        }
        r_hat[q] = (-2.0 * f[q]).exp() * (r[q] - 2.0 * (nf - 1.0) * lap[q] - (nf - 2.0) * (nf - 1.0) * grad2[q]);
    }
    let bg = boundary_geometry(m)?;
    let dnu = normal_derivative(m, &bg, f);
    let nodes_b = m.shape.boundary_nodes();
    let mut pi_hat = SymTensorField::zeros(n, nodes_b.len());
    let mut h_hat = vec![0.0; nodes_b.len()];
    for (k, &(q, _)) in nodes_b.iter().enumerate() {
        let e = f[q].exp();
        for (i, j) in pairs(n) {
            pi_hat.set(k, i, j, e * (bg.pi.get(k, i, j) + dnu[k] * bg.gamma.get(k, i, j)));
        }
        h_hat[k] = (bg.h[k] + (nf - 1.0) * dnu[k]) / e;
    }
    let (r_from_u, h_from_u) = if n >= 3 {
        let u: Vec<f64> = f.iter().map(|v| ((nf - 2.0) * v / 2.0).exp()).collect();
        let (_, lap_u, _) = hessian(m, &u)?;
        let a = (nf - 2.0) / (4.0 * (nf - 1.0));
        let ru = (0..nodes)
            .map(|q| {
                let lu = lap_u[q] - a * r[q] * u[q];
                -(4.0 * (nf - 1.0) / (nf - 2.0)) * lu / u[q].powf((nf + 2.0) / (nf - 2.0))
            })
            .collect();
        let dnu_u = normal_derivative(m, &bg, &u);
        let b = (nf - 2.0) / (2.0 * (nf - 1.0));
        let hu = nodes_b
            .iter()
            .enumerate()
            .map(|(k, &(q, _))| {
                let bu = dnu_u[k] + b * bg.h[k] * u[q];
                (2.0 * (nf - 1.0) / (nf - 2.0)) * bu / u[q].powf(nf / (nf - 2.0))
            })
            .collect();
        (Some(ru), Some(hu))
    } else {
        (None, None)
    };
    Ok(ConformalPrediction { metric, ric: ric_hat, r: r_hat, pi: pi_hat, h: h_hat, r_from_u, h_from_u })
}

/// Metric of the form `e^{2f} g` for a scalar field `f`.
pub fn conformal_metric(m: &GridMetric, f: &[f64]) -> Result<GridMetric> {
    let mut g = m.g.clone();
    let mc = g.ncomp();
    for (q, fv) in f.iter().enumerate() {
        let e = (2.0 * fv).exp();
        for c in 0..mc {
            g.data[q * mc + c] *= e;
        }
    }
    GridMetric::new(m.shape.clone(), g)
}

#[cfg(test)]
mod tests;
