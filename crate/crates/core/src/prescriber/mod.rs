//! Local prescription of `(R, H)` by Newton iteration on the Gram system.
//!
//! The unknown is a pair `u = (u_int, u_bd)` of an interior node field and a
//! boundary node field. It acts on the background through the weighted
//! transpose of the discrete linearization `D₀ = [∂R; ∂H](g₀)`:
//!
//! ```text
//! g(u) = g₀ + A u,   A = M⁻¹ D₀ᵀ W,   W = diag(dv, 2 dσ)
//! ```
//!
//! where `M` is the quadrature inner product on metric components. The
//! linearization of `S(u) = (R, H)(g(u))` at zero is the Gram operator
//! `D₀ A`, similar to the symmetric positive semidefinite
//! `Ĝ = W^{1/2} D₀ M⁻¹ D₀ᵀ W^{1/2}`. Static potentials of `g₀` span its kernel.

mod pipeline;

pub use pipeline::{
    choose_scale, harmonic_nudge, prescribe_full, pull_back, resample_axis, FullConfig, FullResult, TrigInterp,
};

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, SparseRows};
use crate::rearrange::gagliardo_periodic;
use crate::tensor_grid::jacobian::curvature_jacobian;
use crate::tensor_grid::{
    boundary_geometry, boundary_weights, curvature, volume_weights, BoundaryField, Face, GridMetric, ScalarField,
    SymTensorField,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Newton iteration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Initial step length; halved while the residual does not decrease.
    pub damping: f64,
    /// Smallest acceptable `σ_min / σ_max` of the Gram operator.
    pub kernel_guard: f64,
    /// Nearness radius; `None` uses `0.1 ‖(R, H)(g₀)‖ + 0.01`.
    pub eta: Option<f64>,
    /// Exponent of the nearness norm; `None` uses `2n + 1`.
    pub p: Option<f64>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol_residual: 1e-8, max_iter: 30, damping: 1.0, kernel_guard: 1e-8, eta: None, p: None }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) || self.max_iter == 0 || !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Precondition("need tol_residual > 0, max_iter ≥ 1 and damping in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    KernelDetected,
    Diverged,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrescribeResult {
    pub metric: GridMetric,
    /// `(u_int, u_bd)` concatenated.
    pub u: ScalarField,
    pub iterations: usize,
    /// Sup-norm residuals, starting with the residual of `u = 0`.
    pub residual_history: Vec<f64>,
    pub status: Status,
    /// Relative smallest singular value of the Gram operator, when computed.
    pub sigma_rel: Option<f64>,
}

impl PrescribeResult {
    /// Turn a non-converged status into the matching error.
    pub fn into_result(self) -> Result<Self> {
        let residual = self.residual_history.last().copied().unwrap_or(f64::NAN);
        match self.status {
            Status::Converged => Ok(self),
            Status::KernelDetected => {
                Err(Error::KernelDetected { sigma_rel: self.sigma_rel.unwrap_or(0.0), guard: f64::NAN })
            }
            Status::Diverged => Err(Error::Diverged { iterations: self.iterations, residual }),
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Spectrum summary of the symmetric Gram matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_rel: f64,
    pub kernel: bool,
}

/// The linear structure `A`, `D₀`, `W` attached to one background metric.
pub struct GramSystem {
    pub g0: GridMetric,
    pub d0: SparseRows,
    /// `A = M⁻¹ D₀ᵀ W`, rows indexed by metric degrees of freedom.
    pub a: SparseRows,
    /// `W` on outputs (interior nodes then boundary nodes).
    pub w: Vec<f64>,
    /// `M` on metric degrees of freedom.
    pub m: Vec<f64>,
    pub n_int: usize,
    pub n_bd: usize,
    eig: Option<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>>,
}

impl GramSystem {
    pub fn new(g0: &GridMetric) -> Result<Self> {
        let jac = curvature_jacobian(g0)?;
        let d0 = jac.stacked();
        let n_int = g0.shape.num_nodes();
        let n_bd = g0.shape.num_boundary_nodes();
        let mut w = volume_weights(g0);
        w.extend(boundary_weights(g0)?.into_iter().map(|v| 2.0 * v));
        let nc = g0.shape.ncomp();
        let n = g0.n();
        let vw = volume_weights(g0);
        let mult: Vec<f64> = crate::tensor_grid::pairs(n).iter().map(|&(i, j)| if i == j { 1.0 } else { 2.0 }).collect();
        let m: Vec<f64> = (0..n_int * nc).map(|k| vw[k / nc] * mult[k % nc]).collect();
        let dt = d0.transpose();
        let rows = dt
            .rows
            .iter()
            .enumerate()
            .map(|(k, row)| row.iter().map(|&(j, v)| (j, v * w[j] / m[k])).collect())
            .collect();
        let a = SparseRows { ncols: n_int + n_bd, rows };
        Ok(Self { g0: g0.clone(), d0, a, w, m, n_int, n_bd, eig: None })
    }

    pub fn dim(&self) -> usize {
        self.n_int + self.n_bd
    }

    /// Metric increment `A u`.
    pub fn increment(&self, u: &[f64]) -> Result<SymTensorField> {
        if u.len() != self.dim() {
            return Err(Error::ShapeMismatch { expected: self.dim(), got: u.len() });
        }
        Ok(SymTensorField { n: self.g0.n(), data: self.a.apply(u) })
    }

    /// `g₀ + A u`; leaving the positive cone is a step-size error.
    pub fn metric(&self, u: &[f64]) -> Result<GridMetric> {
        let h = self.increment(u)?;
        self.g0.perturbed(&h, 1.0).map_err(|e| match e {
            Error::DegenerateMetric { node, .. } => Error::StepTooLarge { node },
            other => other,
        })
    }

    /// `S(u) = (R, H)(g₀ + A u)`.
    pub fn s_operator(&self, u: &[f64]) -> Result<(ScalarField, BoundaryField)> {
        let g = self.metric(u)?;
        let (_, r) = curvature(&g)?;
        let h = boundary_geometry(&g).map_err(|e| match e {
            Error::DegenerateBoundary { node } => Error::StepTooLarge { node },
            other => other,
        })?;
        Ok((r, h.h))
    }

    /// `D₀ A u`.
    pub fn apply_gram(&self, u: &[f64]) -> Result<Vec<f64>> {
        let h = self.increment(u)?;
        Ok(self.d0.apply(&h.data))
    }

    /// Symmetric Gram matrix `Ĝ`.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let ndof = self.m.len();
        let dim = self.dim();
        let mut b = DMatrix::<f64>::zeros(dim, ndof);
        for (i, row) in self.d0.rows.iter().enumerate() {
            let s = self.w[i].sqrt();
            for &(k, v) in row {
                b[(i, k)] = s * v / self.m[k].sqrt();
            }
        }
        &b * b.transpose()
    }

    fn ensure_eigen(&mut self) {
        if self.eig.is_none() {
            self.eig = Some(self.gram_matrix().symmetric_eigen());
        }
    }

    pub fn kernel_report(&mut self, guard: f64) -> KernelReport {
        self.ensure_eigen();
        let ev = &self.eig.as_ref().unwrap().eigenvalues;
        let sigma_max = ev.iter().copied().fold(0.0, f64::max);
        let sigma_min = ev.iter().copied().map(f64::abs).fold(f64::INFINITY, f64::min);
        let sigma_rel = sigma_min / sigma_max;
        KernelReport { sigma_min, sigma_max, sigma_rel, kernel: !(sigma_rel >= guard) }
    }

    /// Eigenvector of the smallest Gram eigenvalue mapped back to a potential
    /// `f = W^{-1/2} y`.
    pub fn kernel_potential(&mut self) -> Vec<f64> {
        self.ensure_eigen();
        let e = self.eig.as_ref().unwrap();
        let k = e.eigenvalues.iamin();
        e.eigenvectors.column(k).iter().zip(&self.w).map(|(y, w)| y / w.sqrt()).collect()
    }

    /// Solve `D₀ A u = rhs`.
    pub fn solve(&mut self, rhs: &[f64], guard: f64) -> Result<Vec<f64>> {
        if rhs.len() != self.dim() {
            return Err(Error::ShapeMismatch { expected: self.dim(), got: rhs.len() });
        }
        let rep = self.kernel_report(guard);
        if rep.kernel {
            return Err(Error::KernelDetected { sigma_rel: rep.sigma_rel, guard });
        }
        let e = self.eig.as_ref().unwrap();
        let b = DVector::from_iterator(rhs.len(), rhs.iter().zip(&self.w).map(|(r, w)| r * w.sqrt()));
        let c = e.eigenvectors.transpose() * b;
        let c = DVector::from_iterator(c.len(), c.iter().zip(e.eigenvalues.iter()).map(|(c, l)| c / l));
        let y = &e.eigenvectors * c;
        Ok(y.iter().zip(&self.w).map(|(y, w)| y / w.sqrt()).collect())
    }

    /// Dense `D(g) A` for the current metric.
    fn newton_matrix(&self, g: &GridMetric) -> Result<DMatrix<f64>> {
        let d = curvature_jacobian(g)?.stacked();
        let dim = self.dim();
        let mut j = DMatrix::<f64>::zeros(dim, dim);
        let mut row = vec![0.0; dim];
        for (i, drow) in d.rows.iter().enumerate() {
            row.iter_mut().for_each(|v| *v = 0.0);
            for &(k, v) in drow {
                for &(c, a) in &self.a.rows[k] {
                    row[c] += v * a;
                }
            }
            for (c, v) in row.iter().enumerate() {
                j[(i, c)] = *v;
            }
        }
        Ok(j)
    }
}

/// `S(u) = (R, H)(g₀ + A u)` for a background metric.
pub fn s_operator(g0: &GridMetric, u: &[f64]) -> Result<(ScalarField, BoundaryField)> {
    GramSystem::new(g0)?.s_operator(u)
}

/// Solve `𝓢𝓢* u = (rhs_r, rhs_h)` on the background `g0`.
pub fn gram_solve(g0: &GridMetric, rhs_r: &[f64], rhs_h: &[f64], cfg: &NewtonConfig) -> Result<ScalarField> {
    let mut sys = GramSystem::new(g0)?;
    if rhs_r.len() != sys.n_int || rhs_h.len() != sys.n_bd {
        return Err(Error::ShapeMismatch { expected: sys.dim(), got: rhs_r.len() + rhs_h.len() });
    }
    let rhs: Vec<f64> = rhs_r.iter().chain(rhs_h).copied().collect();
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; sys.dim()]);
    }
    sys.solve(&rhs, cfg.kernel_guard)
}

/// Discrete `L^p ⊕ W^{1/2,p}` size of an interior/boundary pair: interior
/// `L^p`, boundary `L^p` plus the face seminorms.
pub fn nearness_norm(m: &GridMetric, r: &[f64], h: &[f64], p: f64) -> Result<f64> {
    let vw = volume_weights(m);
    let bw = boundary_weights(m)?;
    let lp = |v: &[f64], w: &[f64]| v.iter().zip(w).map(|(a, b)| b * a.abs().powf(p)).sum::<f64>().powf(1.0 / p);
    let mut total = lp(r, &vw) + lp(h, &bw);
    let shape = &m.shape;
    let tang = shape.tangential_axes();
    let sizes: Vec<usize> = tang.iter().map(|&a| shape.sizes[a]).collect();
    let spacing: Vec<f64> = tang.iter().map(|&a| shape.spacing[a]).collect();
    let per_face = shape.face_nodes(Face::Lower).len();
    for f in 0..2 {
        let vals = &h[f * per_face..(f + 1) * per_face];
        total += gagliardo_periodic(vals, &sizes, &spacing, p, m.n())?;
    }
    Ok(total)
}

pub fn default_p(n: usize) -> f64 {
    2.0 * n as f64 + 1.0
}

/// Default nearness radius `0.1 ‖(R, H)(g₀)‖ + 0.01`.
pub fn default_eta(g0: &GridMetric, p: f64) -> Result<f64> {
    let (_, r) = curvature(g0)?;
    let h = boundary_geometry(g0)?.h;
    Ok(0.1 * nearness_norm(g0, &r, &h, p)? + 0.01)
}

fn sup_residual(s: &(ScalarField, BoundaryField), tr: &[f64], th: &[f64]) -> f64 {
    let r: Vec<f64> = s.0.iter().zip(tr).map(|(a, b)| a - b).chain(s.1.iter().zip(th).map(|(a, b)| a - b)).collect();
    norm_inf(&r)
}

/// Damped Newton iteration for `S(u) = (target_r, target_h)`.
///
/// A kernel or a stalled line search is reported through the status; input
/// errors and targets outside the nearness radius are errors.
pub fn newton_prescribe(
    g0: &GridMetric,
    target_r: &[f64],
    target_h: &[f64],
    cfg: &NewtonConfig,
) -> Result<PrescribeResult> {
    cfg.validate()?;
    let mut sys = GramSystem::new(g0)?;
    if target_r.len() != sys.n_int || target_h.len() != sys.n_bd {
        return Err(Error::ShapeMismatch { expected: sys.dim(), got: target_r.len() + target_h.len() });
    }
    let dim = sys.dim();
    let mut u = vec![0.0; dim];
    let s0 = sys.s_operator(&u)?;
    let r0 = sup_residual(&s0, target_r, target_h);
    let mut history = vec![r0];
    let done = |metric: GridMetric, u: Vec<f64>, it: usize, history: Vec<f64>, status, sigma_rel| PrescribeResult {
        metric,
        u,
        iterations: it,
        residual_history: history,
        status,
        sigma_rel,
    };
    if r0 <= cfg.tol_residual {
        return Ok(done(g0.clone(), u, 0, history, Status::Converged, None));
    }
    let p = cfg.p.unwrap_or(default_p(g0.n()));
    let eta = match cfg.eta {
        Some(e) => e,
        None => default_eta(g0, p)?,
    };
    let dr: Vec<f64> = s0.0.iter().zip(target_r).map(|(a, b)| b - a).collect();
    let dh: Vec<f64> = s0.1.iter().zip(target_h).map(|(a, b)| b - a).collect();
    let dist = nearness_norm(g0, &dr, &dh, p)?;
    if dist > eta {
        return Err(Error::Precondition(format!(
            "target is {dist:.3e} away from the curvature of the background in the L^p ⊕ W^(1/2,p) norm, beyond the radius {eta:.3e}"
        )));
    }
    let rep = sys.kernel_report(cfg.kernel_guard);
    if rep.kernel {
        return Ok(done(g0.clone(), u, 0, history, Status::KernelDetected, Some(rep.sigma_rel)));
    }
    let mut g = g0.clone();
    let mut s = s0;
    let mut it = 0;
    while it < cfg.max_iter {
        it += 1;
        let j = sys.newton_matrix(&g)?;
        let rhs = DVector::from_iterator(
            dim,
            s.0.iter().zip(target_r).map(|(a, b)| b - a).chain(s.1.iter().zip(target_h).map(|(a, b)| b - a)),
        );
        let Some(step) = j.lu().solve(&rhs) else {
            return Ok(done(g, u, it, history, Status::Diverged, Some(rep.sigma_rel)));
        };
        let current = *history.last().unwrap();
        let mut lambda = cfg.damping;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            let eval = sys.metric(&trial).and_then(|gm| {
                let st = sys.s_operator(&trial)?;
                Ok((gm, st))
            });
            match eval {
                Ok((gm, st)) => {
                    let r = sup_residual(&st, target_r, target_h);
                    if r < current {
                        accepted = Some((trial, gm, st, r));
                        break;
                    }
                }
                Err(Error::StepTooLarge { .. }) | Err(Error::DegenerateMetric { .. }) => {}
                Err(e) => return Err(e),
            }
            lambda *= 0.5;
        }
        let Some((nu, ng, ns, r)) = accepted else {
            return Ok(done(g, u, it, history, Status::Diverged, Some(rep.sigma_rel)));
        };
        u = nu;
        g = ng;
        s = ns;
        history.push(r);
        if r <= cfg.tol_residual {
            return Ok(done(g, u, it, history, Status::Converged, Some(rep.sigma_rel)));
        }
    }
    Ok(done(g, u, it, history, Status::Diverged, Some(rep.sigma_rel)))
}

/// Outcome of [`continuation_solve`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuationResult {
    pub metric: GridMetric,
    pub stages: usize,
    pub iterations: usize,
    /// Residual history of every stage.
    pub histories: Vec<Vec<f64>>,
}

/// Newton solves along the straight path from `(R, H)(g)` to the target,
/// with stage length half the nearness radius.
pub fn continuation_solve(
    g: &GridMetric,
    target_r: &[f64],
    target_h: &[f64],
    cfg: &NewtonConfig,
    max_stages: usize,
) -> Result<ContinuationResult> {
    let (_, r0) = curvature(g)?;
    let h0 = boundary_geometry(g)?.h;
    if target_r.len() != r0.len() || target_h.len() != h0.len() {
        return Err(Error::ShapeMismatch { expected: r0.len() + h0.len(), got: target_r.len() + target_h.len() });
    }
    let p = cfg.p.unwrap_or(default_p(g.n()));
    let eta = match cfg.eta {
        Some(e) => e,
        None => default_eta(g, p)?,
    };
    let dr: Vec<f64> = target_r.iter().zip(&r0).map(|(a, b)| a - b).collect();
    let dh: Vec<f64> = target_h.iter().zip(&h0).map(|(a, b)| a - b).collect();
    let dist = nearness_norm(g, &dr, &dh, p)?;
    let stages = ((dist / (0.5 * eta)).ceil() as usize).max(1);
    if stages > max_stages {
        return Err(Error::Precondition(format!(
            "target needs {stages} continuation stages (distance {dist:.3e}, radius {eta:.3e}), more than the allowed {max_stages}"
        )));
    }
    let mut cur = g.clone();
    let mut iterations = 0;
    let mut histories = Vec::new();
    for k in 1..=stages {
        let t = k as f64 / stages as f64;
        let sr: Vec<f64> = r0.iter().zip(target_r).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let sh: Vec<f64> = h0.iter().zip(target_h).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let mut ncfg = *cfg;
        ncfg.eta = Some(f64::INFINITY);
        let res = newton_prescribe(&cur, &sr, &sh, &ncfg)?.into_result()?;
        iterations += res.iterations;
        histories.push(res.residual_history);
        cur = res.metric;
    }
    Ok(ContinuationResult { metric: cur, stages, iterations, histories })
}

/// Observed convergence exponents `log(r_{k+1}) / log(r_k)`-style ratios
/// `log(r_{k+2}/r_{k+1}) / log(r_{k+1}/r_k)` along a residual history.
pub fn convergence_orders(history: &[f64]) -> Vec<f64> {
    history.windows(3).map(|w| (w[2] / w[1]).ln() / (w[1] / w[0]).ln()).collect()
}

#[cfg(test)]
mod tests;
