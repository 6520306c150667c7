//! Conformal Laplacian energy, Yamabe quotients and first eigenvalues on slab
//! grids (`n ≥ 3`).
//!
//! The discrete energy of a node field `u` is
//!
//! ```text
//! E(u) = a_n ∫ |∇u_h|² dv + Σ_q W_q √g_q R_q u_q² + 2 Σ_k w_k √γ_k H_k u_k²
//! ```
//!
//! with `a_n = 4(n−1)/(n−2)`, `u_h` the multilinear (Q1) interpolant, the
//! gradient term integrated by two-point Gauss quadrature per cell with the
//! metric interpolated from the nodes, and the potential terms lumped with the
//! grid quadrature weights. `R` and `H` are the grid curvature of the metric.
//!
//! Both eigenvalue problems are read off this form: the interior problem is
//! `K φ = λ a_n M φ` (natural boundary condition), the boundary problem is the
//! Schur complement onto boundary nodes, `S ψ = λ a_n B ψ`. The boundary
//! operator paired with `E` is therefore `𝓑 = ∂_ν + (n−2)/(2(n−1)) H`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::scalar::{Dual, Scalar};
use crate::tensor_grid::{
    boundary_generic, boundary_geometry, comp, conformal_metric, curvature, curvature_generic,
    kernel, stencil, GridShape, Stencils,
};
use crate::{Error, GridMetric, Result, SymTensorField};

mod steklov;

pub use steklov::{steklov_plain, SteklovReport};

/// Width of the band treated as zero when classifying eigenvalue signs.
pub const ZERO_BAND: f64 = 1e-8;

/// `4(n−1)/(n−2)`.
pub fn gradient_coefficient(n: usize) -> f64 {
    let n = n as f64;
    4.0 * (n - 1.0) / (n - 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    /// `𝓛φ = λφ` inside, `𝓑φ = 0` on the boundary.
    Interior,
    /// `𝓛φ = 0` inside, `𝓑φ = λφ` on the boundary.
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignClass {
    Positive,
    Negative,
    Zero,
}

impl SignClass {
    pub fn of(lambda: f64) -> Self {
        if lambda.abs() <= ZERO_BAND {
            Self::Zero
        } else if lambda > 0.0 {
            Self::Positive
        } else {
            Self::Negative
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
            Self::Zero => "zero",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda1: f64,
    /// Node field, positive, normalized by `a_n ∫φ² = 1` (interior) or
    /// `a_n ∮φ² = 1` (boundary). For the boundary problem the interior values
    /// are the `𝓛`-harmonic extension.
    #[serde(skip)]
    pub eigenfunction: Vec<f64>,
    pub problem: Problem,
    pub sign_class: SignClass,
    pub iterations: usize,
    /// `‖Cx − λx‖ / ‖C‖_∞` for the symmetrized matrix `C`.
    pub residual: f64,
    pub converged: bool,
}

/// Eigen solver settings.
#[derive(Clone, Copy, Debug)]
pub struct EigenConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500 }
    }
}

/// Assembled quadratic forms with one tangent direction.
struct Forms {
    n: usize,
    k: DMatrix<f64>,
    dk: DMatrix<f64>,
    mass: Vec<f64>,
    dmass: Vec<f64>,
    bmass: Vec<f64>,
    dbmass: Vec<f64>,
    /// Node index of each boundary node.
    bnodes: Vec<usize>,
}

fn check_dim(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Unsupported(format!(
            "conformal Laplacian needs n ≥ 3 (coefficient 4(n−1)/(n−2) is singular at n = {n})"
        )));
    }
    Ok(())
}

fn forms(m: &GridMetric, h: Option<&SymTensorField>) -> Result<Forms> {
    let n = m.n();
    check_dim(n)?;
    let nodes = m.shape.num_nodes();
    let comps: Vec<Vec<Dual>> = (0..m.shape.ncomp())
        .map(|c| {
            (0..nodes)
                .map(|q| {
                    let v = m.g.data[q * m.shape.ncomp() + c];
                    let d = h.map_or(0.0, |h| h.data[q * h.ncomp() + c]);
                    Dual::new(v, d)
                })
                .collect()
        })
        .collect();
    if let Some(h) = h {
        if h.nodes() != nodes || h.n != n {
            return Err(Error::ShapeMismatch { expected: nodes, got: h.nodes() });
        }
    }
    let st = Stencils::new(&m.shape);
    let raw = match n {
        3 => assemble::<Dual, 3>(&m.shape, &st, &comps)?,
        4 => assemble::<Dual, 4>(&m.shape, &st, &comps)?,
        _ => return Err(Error::Unsupported(format!("dimension {n}"))),
    };
    let split = |v: &[Dual]| -> (Vec<f64>, Vec<f64>) { (v.iter().map(|x| x.v).collect(), v.iter().map(|x| x.d).collect()) };
    let (k, dk) = split(&raw.k);
    let (mass, dmass) = split(&raw.mass);
    let (bmass, dbmass) = split(&raw.bmass);
    Ok(Forms {
        n,
        k: DMatrix::from_vec(nodes, nodes, k),
        dk: DMatrix::from_vec(nodes, nodes, dk),
        mass,
        dmass,
        bmass,
        dbmass,
        bnodes: m.shape.boundary_nodes().into_iter().map(|(q, _)| q).collect(),
    })
}

struct RawForms<T> {
    k: Vec<T>,
    mass: Vec<T>,
    bmass: Vec<T>,
}

fn matrix_at<T: Scalar, const D: usize>(comps: &[Vec<T>], q: usize) -> [[T; D]; D] {
    let mut a = [[T::zero(); D]; D];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = comps[comp(D, i, j)][q];
        }
    }
    a
}

fn assemble<T: Scalar, const D: usize>(shape: &GridShape, st: &Stencils, comps: &[Vec<T>]) -> Result<RawForms<T>> {
    let nodes = shape.num_nodes();
    let a = gradient_coefficient(D);
    let (_, r) = curvature_generic(shape, st, comps)?;
    let bd = boundary_generic(shape, st, comps)?;
    let w = stencil::node_weights(shape, st);

    let mut k = vec![T::zero(); nodes * nodes];
    let mut mass = vec![T::zero(); nodes];
    for q in 0..nodes {
        let det = kernel::det(&matrix_at::<T, D>(comps, q));
        if !(det.re() > 0.0) {
            return Err(Error::DegenerateMetric { node: q, min_eig: det.re() });
        }
        mass[q] = det.sqrt() * w[q];
        k[q * nodes + q] += mass[q] * r[q];
    }
    let bnodes = shape.boundary_nodes();
    let mut bmass = vec![T::zero(); bnodes.len()];
    for (kb, &(q, _)) in bnodes.iter().enumerate() {
        bmass[kb] = bd[kb].area * stencil::face_weight(shape, st, q);
        k[q * nodes + q] += bmass[kb] * bd[kb].h * 2.0;
    }

    // Q1 basis values and reference gradients at the 2^D Gauss points
    let ncorner = 1usize << D;
    let g1 = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let mut basis = vec![vec![0.0; ncorner]; ncorner];
    let mut grad = vec![vec![[0.0; D]; ncorner]; ncorner];
    for gp in 0..ncorner {
        let xi: [f64; D] = std::array::from_fn(|ax| g1[(gp >> ax) & 1]);
        for c in 0..ncorner {
            let f = |ax: usize, x: f64| if (c >> ax) & 1 == 1 { x } else { 1.0 - x };
            let df = |ax: usize| if (c >> ax) & 1 == 1 { 1.0 } else { -1.0 };
            basis[gp][c] = (0..D).map(|ax| f(ax, xi[ax])).product();
            for ax in 0..D {
                grad[gp][c][ax] = df(ax)
                    * (0..D).filter(|&b| b != ax).map(|b| f(b, xi[b])).product::<f64>()
                    / shape.spacing[ax];
            }
        }
    }
    let cell_vol: f64 = shape.spacing[..D].iter().product::<f64>() / ncorner as f64;
    let y = shape.boundary_axis;
    for base in 0..nodes {
        if shape.multi(base)[y] + 1 >= shape.count(y) {
            continue;
        }
        let corner: Vec<usize> = (0..ncorner)
            .map(|c| (0..D).fold(base, |idx, ax| if (c >> ax) & 1 == 1 { next_node(shape, idx, ax) } else { idx }))
            .collect();
        for gp in 0..ncorner {
            let mut g = [[T::zero(); D]; D];
            for (c, &q) in corner.iter().enumerate() {
                let gq = matrix_at::<T, D>(comps, q);
                for i in 0..D {
                    for j in 0..D {
                        g[i][j] += gq[i][j] * basis[gp][c];
                    }
                }
            }
            let ginv = kernel::inverse(&g).ok_or(Error::DegenerateMetric { node: base, min_eig: 0.0 })?;
            let det = kernel::det(&g);
            if !(det.re() > 0.0) {
                return Err(Error::DegenerateMetric { node: base, min_eig: det.re() });
            }
            let scale = det.sqrt() * (a * cell_vol);
            for (ci, &qi) in corner.iter().enumerate() {
                let mut v = [T::zero(); D];
                for (aa, va) in v.iter_mut().enumerate() {
                    for bb in 0..D {
                        *va += ginv[aa][bb] * grad[gp][ci][bb];
                    }
                }
                for (cj, &qj) in corner.iter().enumerate() {
                    let mut s = T::zero();
                    for (aa, va) in v.iter().enumerate() {
                        s += *va * grad[gp][cj][aa];
                    }
                    k[qi * nodes + qj] += s * scale;
                }
            }
        }
    }
    Ok(RawForms { k, mass, bmass })
}

/// Neighbour one step up along `axis`, wrapping on periodic axes.
pub(crate) fn next_node(shape: &GridShape, idx: usize, axis: usize) -> usize {
    if shape.is_bounded(axis) {
        idx + shape.strides()[axis]
    } else {
        shape.shifted(idx, axis, 1)
    }
}

/// Discrete energy `E(u)`.
pub fn energy(m: &GridMetric, u: &[f64]) -> Result<f64> {
    check_dim(m.n())?;
    let nodes = m.shape.num_nodes();
    if u.len() != nodes {
        return Err(Error::ShapeMismatch { expected: nodes, got: u.len() });
    }
    let f = forms(m, None)?;
    let x = DVector::from_column_slice(u);
    Ok(x.dot(&(&f.k * &x)))
}

/// `Q^{a,b}(u) = E(u) / (a ‖u‖²_{2n/(n−2)} + b ‖u‖²_{2(n−1)/(n−2),∂})`.
pub fn yamabe_quotient(m: &GridMetric, u: &[f64], a: f64, b: f64) -> Result<f64> {
    let n = m.n();
    check_dim(n)?;
    if a < 0.0 || b < 0.0 || (a == 0.0 && b == 0.0) {
        return Err(Error::Precondition(format!("need a, b ≥ 0 not both zero, got ({a}, {b})")));
    }
    let e = energy(m, u)?;
    let f = forms(m, None)?;
    let nf = n as f64;
    let (p, pb) = (2.0 * nf / (nf - 2.0), 2.0 * (nf - 1.0) / (nf - 2.0));
    let vol: f64 = f.mass.iter().zip(u).map(|(w, v)| w * v.abs().powf(p)).sum();
    let bdry: f64 = f.bmass.iter().zip(&f.bnodes).map(|(w, &q)| w * u[q].abs().powf(pb)).sum();
    let den = a * vol.powf(2.0 / p) + b * bdry.powf(2.0 / pb);
    if !(den > 0.0) {
        return Err(Error::Precondition("zero denominator in the Yamabe quotient".into()));
    }
    Ok(e / den)
}

/// Lowest eigenpair of a symmetric matrix by shifted inverse iteration.
///
/// The shift starts below the Gershgorin bound and moves up to `μ − 2‖r‖`
/// whenever a Cholesky factorization of `C − σI` succeeds, which certifies
/// `σ < λ_min`.
pub(crate) struct Eigenpair {
    pub value: f64,
    pub vector: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn lowest_eigenpair(c: &DMatrix<f64>, start: DVector<f64>, cfg: &EigenConfig) -> Result<Eigenpair> {
    let n = c.nrows();
    let scale = (0..n).map(|i| c.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-300);
    let gersh = (0..n)
        .map(|i| c[(i, i)] - c.row(i).iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let shifted = |s: f64| Cholesky::new(c - DMatrix::<f64>::identity(n, n) * s);
    let mut sigma = gersh - 1e-8 * scale;
    let mut chol: Cholesky<f64, Dyn> = loop {
        if let Some(ch) = shifted(sigma) {
            break ch;
        }
        sigma -= 1e-6 * scale;
    };
    let mut x = start.normalize();
    let mut best = (f64::INFINITY, 0.0);
    for it in 1..=cfg.max_iter {
        x = chol.solve(&x);
        let norm = x.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Singular("inverse iteration broke down".into()));
        }
        x /= norm;
        let cx = c * &x;
        let mu = x.dot(&cx);
        let r = (cx - &x * mu).norm();
        let res = r / scale;
        best = (res, mu);
        if res <= cfg.tol {
            return Ok(Eigenpair { value: mu, vector: x, iterations: it, residual: res, converged: true });
        }
        let cand = mu - 2.0 * r;
        if cand > sigma {
            if let Some(ch) = shifted(cand) {
                sigma = cand;
                chol = ch;
            }
        }
    }
    Ok(Eigenpair { value: best.1, vector: x, iterations: cfg.max_iter, residual: best.0, converged: false })
}

/// Schur complement `K_bb − K_bi K_ii⁻¹ K_ib` and the extension operator.
struct Schur {
    s: DMatrix<f64>,
    inner: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
    kib: DMatrix<f64>,
}

fn schur(k: &DMatrix<f64>, bnodes: &[usize]) -> Result<Schur> {
    let nodes = k.nrows();
    let mut is_b = vec![false; nodes];
    bnodes.iter().for_each(|&q| is_b[q] = true);
    let inner: Vec<usize> = (0..nodes).filter(|&q| !is_b[q]).collect();
    let kii = DMatrix::from_fn(inner.len(), inner.len(), |i, j| k[(inner[i], inner[j])]);
    let kib = DMatrix::from_fn(inner.len(), bnodes.len(), |i, j| k[(inner[i], bnodes[j])]);
    let kbb = DMatrix::from_fn(bnodes.len(), bnodes.len(), |i, j| k[(bnodes[i], bnodes[j])]);
    let chol = Cholesky::new(kii).ok_or_else(|| {
        Error::Precondition("interior block of the energy is not positive definite; boundary problem undefined".into())
    })?;
    let s = kbb - kib.transpose() * chol.solve(&kib);
    Ok(Schur { s: (&s + s.transpose()) * 0.5, inner, chol, kib })
}

fn start_vector(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| 1.0 + 1e-3 * ((i as f64) * 0.618_034).fract())
}

/// Solves one problem and returns the report plus the full node eigenvector.
fn solve(f: &Forms, problem: Problem, cfg: &EigenConfig) -> Result<SpectralReport> {
    let an = gradient_coefficient(f.n);
    let nodes = f.k.nrows();
    let (pair, phi) = match problem {
        Problem::Interior => {
            let d: Vec<f64> = f.mass.iter().map(|w| 1.0 / (an * w).sqrt()).collect();
            let c = DMatrix::from_fn(nodes, nodes, |i, j| d[i] * f.k[(i, j)] * d[j]);
            let c = (&c + c.transpose()) * 0.5;
            let pair = lowest_eigenpair(&c, start_vector(nodes), cfg)?;
            let phi: Vec<f64> = pair.vector.iter().zip(&d).map(|(x, d)| x * d).collect();
            (pair, phi)
        }
        Problem::Boundary => {
            let sc = schur(&f.k, &f.bnodes)?;
            let nb = f.bnodes.len();
            let d: Vec<f64> = f.bmass.iter().map(|w| 1.0 / (an * w).sqrt()).collect();
            let c = DMatrix::from_fn(nb, nb, |i, j| d[i] * sc.s[(i, j)] * d[j]);
            let pair = lowest_eigenpair(&c, start_vector(nb), cfg)?;
            let psi = DVector::from_iterator(nb, pair.vector.iter().zip(&d).map(|(x, d)| x * d));
            let inner = -sc.chol.solve(&(&sc.kib * &psi));
            let mut phi = vec![0.0; nodes];
            for (k, &q) in f.bnodes.iter().enumerate() {
                phi[q] = psi[k];
            }
            for (i, &q) in sc.inner.iter().enumerate() {
                phi[q] = inner[i];
            }
            (pair, phi)
        }
    };
    let sign = if phi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    Ok(SpectralReport {
        lambda1: pair.value,
        eigenfunction: phi.into_iter().map(|v| v * sign).collect(),
        problem,
        sign_class: SignClass::of(pair.value),
        iterations: pair.iterations,
        residual: pair.residual,
        converged: pair.converged,
    })
}

/// First eigenvalue of the interior or boundary problem.
pub fn lambda1(m: &GridMetric, problem: Problem) -> Result<SpectralReport> {
    lambda1_with(m, problem, &EigenConfig::default())
}

pub fn lambda1_with(m: &GridMetric, problem: Problem, cfg: &EigenConfig) -> Result<SpectralReport> {
    solve(&forms(m, None)?, problem, cfg)
}

/// Both first eigenvalues; `true` when their sign classes agree.
pub fn sign_agreement(m: &GridMetric) -> Result<(bool, SpectralReport, SpectralReport)> {
    let f = forms(m, None)?;
    let cfg = EigenConfig::default();
    let li = solve(&f, Problem::Interior, &cfg)?;
    let lb = solve(&f, Problem::Boundary, &cfg)?;
    Ok((li.sign_class == lb.sign_class, li, lb))
}

/// Sign class of the conformal class, read from `λ₁(𝓑)`.
pub fn trichotomy(m: &GridMetric) -> Result<SignClass> {
    Ok(lambda1(m, Problem::Boundary)?.sign_class)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenDerivative {
    pub lambda1: f64,
    /// `d/dt λ₁(g + t h)` at `t = 0` from the eigenvector and the exact
    /// tangent of the discrete forms.
    pub value: f64,
    /// `−∫φ²⟨h, Ric_ḡ⟩ dv` (interior) or `−∮ψ²⟨h, Π_ḡ⟩ dσ` (boundary) with
    /// `ḡ = φ^{4/(n−2)} g`; `None` when the eigenfunction is not positive.
    pub closed_form: Option<f64>,
}

pub fn eigenvalue_derivative(m: &GridMetric, h: &SymTensorField, problem: Problem) -> Result<EigenDerivative> {
    let f = forms(m, Some(h))?;
    let rep = solve(&f, problem, &EigenConfig::default())?;
    let an = gradient_coefficient(f.n);
    let phi = DVector::from_column_slice(&rep.eigenfunction);
    let stiff = phi.dot(&(&f.dk * &phi));
    let lam = rep.lambda1;
    let value = match problem {
        Problem::Interior => {
            let dm: f64 = f.dmass.iter().zip(phi.iter()).map(|(w, p)| w * p * p).sum();
            stiff - lam * an * dm
        }
        Problem::Boundary => {
            let db: f64 = f.dbmass.iter().zip(&f.bnodes).map(|(w, &q)| w * phi[q] * phi[q]).sum();
            stiff - lam * an * db
        }
    };
    let closed_form = closed_form(m, h, &f, &rep)?;
    Ok(EigenDerivative { lambda1: lam, value, closed_form })
}

fn closed_form(m: &GridMetric, h: &SymTensorField, f: &Forms, rep: &SpectralReport) -> Result<Option<f64>> {
    let phi = &rep.eigenfunction;
    if phi.iter().any(|&v| !(v > 0.0)) {
        return Ok(None);
    }
    let n = f.n;
    let expo = 2.0 / (n as f64 - 2.0);
    let logf: Vec<f64> = phi.iter().map(|v| expo * v.ln()).collect();
    let bar = conformal_metric(m, &logf)?;
    let inv = |q: usize| crate::tensor_grid::inverse_dyn(n, &m.g.matrix(q));
    let pairing = |gi: &[[f64; 4]; 4], a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += gi[i][k] * gi[j][l] * a[i][j] * b[k][l];
                    }
                }
            }
        }
        s
    };
    Ok(Some(match rep.problem {
        Problem::Interior => {
            let (ric, _) = curvature(&bar)?;
            let mut s = 0.0;
            for (q, w) in f.mass.iter().enumerate() {
                let gi = inv(q).ok_or(Error::DegenerateMetric { node: q, min_eig: 0.0 })?;
                s += w * phi[q] * phi[q] * pairing(&gi, &h.matrix(q), &ric.matrix(q));
            }
            -s
        }
        Problem::Boundary => {
            let bg = boundary_geometry(m)?;
            let bb = boundary_geometry(&bar)?;
            let mut s = 0.0;
            for (k, &q) in f.bnodes.iter().enumerate() {
                let hp: Vec<f64> = (0..h.ncomp()).map(|c| h.data[q * h.ncomp() + c]).collect();
                let pp: Vec<f64> = (0..h.ncomp()).map(|c| bb.pi.data[k * h.ncomp() + c]).collect();
                s += f.bmass[k] * phi[q] * phi[q] * bg.pair(k, &hp, &pp);
            }
            -s
        }
    }))
}

/// `∮ψ²|Π|² dσ` with `ψ` the boundary eigenfunction normalized by
/// `a_n ∮ψ² = 1`.
pub fn weighted_pi_norm(m: &GridMetric) -> Result<f64> {
    let f = forms(m, None)?;
    let rep = solve(&f, Problem::Boundary, &EigenConfig::default())?;
    let bg = boundary_geometry(m)?;
    let nc = m.shape.ncomp();
    Ok(f.bnodes
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let p = &bg.pi.data[k * nc..(k + 1) * nc];
            f.bmass[k] * rep.eigenfunction[q].powi(2) * bg.pair(k, p, p)
        })
        .sum())
}

/// `h = −χ(y) Π` extended from each face into a collar of `width` in the
/// bounded coordinate, with `χ = 1` on the face and `χ = 0` beyond the collar
/// (cosine taper).
pub fn collar_variation(m: &GridMetric, width: f64) -> Result<SymTensorField> {
    let bg = boundary_geometry(m)?;
    let shape = &m.shape;
    let y = shape.boundary_axis;
    let ny = shape.count(y);
    let nc = shape.ncomp();
    let len = shape.length(y);
    let bnodes = shape.boundary_nodes();
    let index: std::collections::HashMap<usize, usize> = bnodes.iter().enumerate().map(|(k, &(q, _))| (q, k)).collect();
    let mut h = SymTensorField::zeros(m.n(), shape.num_nodes());
    for q in 0..shape.num_nodes() {
        let mut mi = shape.multi(q);
        let iy = mi[y];
        let (dist, face_iy) = if 2 * iy < ny { (iy as f64 * shape.spacing[y], 0) } else { ((ny - 1 - iy) as f64 * shape.spacing[y], ny - 1) };
        if dist >= width || dist > 0.5 * len {
            continue;
        }
        let chi = 0.5 * (1.0 + (std::f64::consts::PI * dist / width).cos());
        mi[y] = face_iy;
        let k = index[&shape.index(&mi[..shape.n])];
        for c in 0..nc {
            h.data[q * nc + c] = -chi * bg.pi.data[k * nc + c];
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests;
