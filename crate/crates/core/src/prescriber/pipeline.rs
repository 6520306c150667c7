//! Prescription of boundary mean curvature far from the background:
//! scale, boundary reparametrization, staged local solves and pull back.

use super::{continuation_solve, default_p, NewtonConfig, Status};
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, SparseRows};
use crate::rearrange::{build_diffeo, ApproxMode, DiffeoConfig, Domain, MonotoneReparam};
use crate::tensor_grid::stencil::{deriv_matrix, Stencils};
use crate::tensor_grid::{
    boundary_geometry, conformal_metric, curvature, det_dyn, inverse_dyn, Face, GridMetric, GridShape,
    SymTensorField, MAX_DIM,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Trigonometric interpolant of periodic samples `f(j L / N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigInterp {
    pub period: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigInterp {
    pub fn new(samples: &[f64], period: f64) -> Self {
        let n = samples.len();
        let kmax = n / 2;
        let mut a = vec![0.0; kmax + 1];
        let mut b = vec![0.0; kmax + 1];
        for k in 0..=kmax {
            let (mut sc, mut ss) = (0.0, 0.0);
            for (j, v) in samples.iter().enumerate() {
                let t = 2.0 * PI * (k * j) as f64 / n as f64;
                sc += v * t.cos();
                ss += v * t.sin();
            }
            let nyquist = n % 2 == 0 && k == kmax;
            let s = if k == 0 || nyquist { 1.0 } else { 2.0 } / n as f64;
            a[k] = s * sc;
            b[k] = if nyquist { 0.0 } else { s * ss };
        }
        Self { period, a, b }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        self.a.iter().zip(&self.b).enumerate().map(|(k, (a, b))| {
            let t = k as f64 * w * x;
            a * t.cos() + b * t.sin()
        }).sum()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        self.a.iter().zip(&self.b).enumerate().map(|(k, (a, b))| {
            let kw = k as f64 * w;
            let t = kw * x;
            kw * (b * t.cos() - a * t.sin())
        }).sum()
    }
}

/// Evaluate a node field along a periodic `axis` at coordinates
/// `targets[q]` (relative to the first node of the line through `q`).
pub fn resample_axis(shape: &GridShape, field: &[f64], axis: usize, targets: &[f64]) -> Result<Vec<f64>> {
    if shape.is_bounded(axis) {
        return Err(Error::Unsupported(format!("resampling along non-periodic axis {axis}")));
    }
    let nodes = shape.num_nodes();
    if field.len() != nodes || targets.len() != nodes {
        return Err(Error::ShapeMismatch { expected: nodes, got: field.len().min(targets.len()) });
    }
    let cnt = shape.count(axis);
    let stride = shape.strides()[axis];
    let period = shape.length(axis);
    let mut out = vec![0.0; nodes];
    let mut done = vec![false; nodes];
    for q in 0..nodes {
        if done[q] {
            continue;
        }
        let base = q - shape.multi(q)[axis] * stride;
        let line: Vec<usize> = (0..cnt).map(|i| base + i * stride).collect();
        let samples: Vec<f64> = line.iter().map(|&i| field[i]).collect();
        let ti = TrigInterp::new(&samples, period);
        for &i in &line {
            out[i] = ti.eval(targets[i]);
            done[i] = true;
        }
    }
    Ok(out)
}

/// Scale `c > 0` with `c·min T ≤ min H₀` and `c·max T ≥ max H₀`.
pub fn choose_scale(h0: &[f64], target: &[f64]) -> Result<f64> {
    let mm = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (tmin, tmax) = mm(target);
    let (hmin, hmax) = mm(h0);
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let tol = 1e-9 * (1.0 + hmin.abs().max(hmax.abs()));
    let fail = || {
        Error::Precondition(format!(
            "no c > 0 with min cT ≤ H₀ ≤ max cT: target range [{tmin:.6}, {tmax:.6}], background range [{hmin:.6}, {hmax:.6}]"
        ))
    };
    if tmin > 0.0 {
        hi = hi.min(hmin / tmin);
    } else if tmin < 0.0 {
        lo = lo.max(hmin / tmin);
    } else if hmin < -tol {
        return Err(fail());
    }
    if tmax > 0.0 {
        lo = lo.max(hmax / tmax);
    } else if tmax < 0.0 {
        hi = hi.min(hmax / tmax);
    } else if hmax > tol {
        return Err(fail());
    }
    if !(hi > 0.0) || lo > hi * (1.0 + 1e-9) + 1e-300 {
        return Err(fail());
    }
    Ok(match (lo > 0.0, hi.is_finite()) {
        (true, true) => (lo * hi).sqrt(),
        (false, true) => 0.5 * hi,
        (true, false) => 2.0 * lo,
        (false, false) => 1.0,
    })
}

pub(crate) fn lift_boundary(shape: &GridShape, b: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; shape.num_nodes()];
    for (k, &(q, _)) in shape.boundary_nodes().iter().enumerate() {
        full[q] = b[k];
    }
    full
}

/// Face field averaged over all tangential axes except `axis`.
fn face_profile(shape: &GridShape, b: &[f64], face: Face, axis: usize) -> Vec<f64> {
    let nodes = shape.boundary_nodes();
    let cnt = shape.count(axis);
    let mut sum = vec![0.0; cnt];
    let mut num = vec![0usize; cnt];
    for (k, &(q, f)) in nodes.iter().enumerate() {
        if f == face {
            let i = shape.multi(q)[axis];
            sum[i] += b[k];
            num[i] += 1;
        }
    }
    sum.iter().zip(&num).map(|(s, n)| s / *n as f64).collect()
}

/// Solve the linear Robin problem
/// `Δw = 0`, `α ∂_ν w − β H w = data` on the boundary and return the
/// conformally changed metric whose mean curvature is `H + data` to first
/// order: `(1 + w)^{4/(n−2)} g` with `α = 2(n−1)/(n−2)`, `β = 2/(n−2)` for
/// `n ≥ 3`, and `e^{2w} g` with `α = β = 1` for `n = 2`.
pub fn harmonic_nudge(m: &GridMetric, data: &[f64]) -> Result<GridMetric> {
    let shape = &m.shape;
    let n = m.n();
    let nodes = shape.num_nodes();
    let bnodes = shape.boundary_nodes();
    if data.len() != bnodes.len() {
        return Err(Error::ShapeMismatch { expected: bnodes.len(), got: data.len() });
    }
    let nf = n as f64;
    let (alpha, beta) = if n == 2 { (1.0, 1.0) } else { (2.0 * (nf - 1.0) / (nf - 2.0), 2.0 / (nf - 2.0)) };
    let st = Stencils::new(shape);
    let d: Vec<SparseRows> = (0..n).map(|a| deriv_matrix(shape, &st, a)).collect();
    let mut sqrt_g = vec![0.0; nodes];
    let mut ginv = Vec::with_capacity(nodes);
    for q in 0..nodes {
        let g = m.g.matrix(q);
        sqrt_g[q] = det_dyn(n, &g).sqrt();
        ginv.push(inverse_dyn(n, &g).ok_or(Error::DegenerateMetric { node: q, min_eig: 0.0 })?);
    }
    // diagonal terms in compact flux form (central first differences composed
    // twice leave odd-even modes undamped); cross terms by composed differences
    let mut lap = DMatrix::<f64>::zeros(nodes, nodes);
    let coef = |k: usize, a: usize, b: usize| sqrt_g[k] * ginv[k][a][b];
    for a in 0..n {
        let h2 = shape.spacing[a] * shape.spacing[a];
        let cnt = shape.count(a) as isize;
        let bounded = shape.is_bounded(a);
        for q in 0..nodes {
            let i = shape.multi(q)[a] as isize;
            if bounded && (i == 0 || i == cnt - 1) {
                continue;
            }
            let nb = |k: isize| {
                let mut mi = shape.multi(q);
                mi[a] = (i + k).rem_euclid(cnt) as usize;
                shape.index(&mi)
            };
            let (qm, qp) = (nb(-1), nb(1));
            let cm = 0.5 * (coef(q, a, a) + coef(qm, a, a));
            let cp = 0.5 * (coef(q, a, a) + coef(qp, a, a));
            lap[(q, qm)] += cm / h2 / sqrt_g[q];
            lap[(q, qp)] += cp / h2 / sqrt_g[q];
            lap[(q, q)] -= (cm + cp) / h2 / sqrt_g[q];
        }
        for b in 0..n {
            if a == b {
                continue;
            }
            let scaled = SparseRows {
                ncols: nodes,
                rows: d[b]
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(k, row)| row.iter().map(|&(j, v)| (j, v * coef(k, a, b))).collect())
                    .collect(),
            };
            let op = d[a].compose(&scaled);
            for (q, row) in op.rows.iter().enumerate() {
                for &(j, v) in row {
                    lap[(q, j)] += v / sqrt_g[q];
                }
            }
        }
    }
    let bg = boundary_geometry(m)?;
    let mut rhs = DVector::<f64>::zeros(nodes);
    for (k, &(q, _)) in bnodes.iter().enumerate() {
        lap.row_mut(q).fill(0.0);
        for a in 0..n {
            for &(j, v) in &d[a].rows[q] {
                lap[(q, j)] += alpha * bg.nu[k][a] * v;
            }
        }
        lap[(q, q)] -= beta * bg.h[k];
        rhs[q] = data[k];
    }
    let w = lap.lu().solve(&rhs).ok_or_else(|| Error::Singular("Robin problem for the conformal nudge".into()))?;
    let f: Vec<f64> = if n == 2 {
        w.iter().copied().collect()
    } else {
        w.iter()
            .enumerate()
            .map(|(q, v)| {
                if 1.0 + v <= 0.0 {
                    Err(Error::StepTooLarge { node: q })
                } else {
                    Ok(2.0 / (nf - 2.0) * (1.0 + v).ln())
                }
            })
            .collect::<Result<_>>()?
    };
    conformal_metric(m, &f)
}

/// Pull back `m` by `Ψ(p) = p + (ψ(p) − p_axis) e_axis`, where `targets[q]`
/// is `ψ` at node `q` and `jac[q][a] = ∂_a ψ`.
pub fn pull_back(m: &GridMetric, axis: usize, targets: &[f64], jac: &[[f64; MAX_DIM]]) -> Result<GridMetric> {
    let shape = &m.shape;
    let n = m.n();
    let nc = shape.ncomp();
    let comps: Vec<Vec<f64>> =
        (0..nc).map(|c| resample_axis(shape, &m.g.component(c), axis, targets)).collect::<Result<_>>()?;
    let g = SymTensorField::from_fn(n, shape.num_nodes(), |q| {
        let mut gm = [[0.0; MAX_DIM]; MAX_DIM];
        for (c, (i, j)) in crate::tensor_grid::pairs(n).into_iter().enumerate() {
            gm[i][j] = comps[c][q];
            gm[j][i] = comps[c][q];
        }
        let mut jm = [[0.0; MAX_DIM]; MAX_DIM];
        for (c, row) in jm.iter_mut().enumerate().take(n) {
            if c == axis {
                row[..n].copy_from_slice(&jac[q][..n]);
            } else {
                row[c] = 1.0;
            }
        }
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        for a in 0..n {
            for b in 0..n {
                let mut s = 0.0;
                for c in 0..n {
                    for d in 0..n {
                        s += jm[c][a] * jm[d][b] * gm[c][d];
                    }
                }
                out[a][b] = s;
            }
        }
        out
    });
    GridMetric::new(shape.clone(), g)
}

/// Options for [`prescribe_full`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullConfig {
    pub newton: NewtonConfig,
    /// Fraction of `cT − H₀` used by the conformal nudge of a constant-`H` background.
    pub nudge_fraction: f64,
    /// Relative spread below which `H₀` counts as constant.
    pub constant_tol: f64,
    /// Target tolerance of the boundary reparametrization (fractional seminorm).
    pub diffeo_eps: f64,
    /// Circle samples for the reparametrization.
    pub diffeo_samples: usize,
    /// Maximum number of continuation stages per local solve.
    pub max_stages: usize,
    /// Slope window `[min_slope, 1/min_slope]` of the boundary reparametrization.
    pub min_slope: f64,
}

impl Default for FullConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            nudge_fraction: 0.5,
            constant_tol: 1e-8,
            diffeo_eps: 5e-2,
            diffeo_samples: 128,
            max_stages: 40,
            min_slope: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FullResult {
    pub metric: GridMetric,
    pub scale: f64,
    /// Boundary reparametrizations `φ` along the first tangential axis, lower
    /// face then upper face.
    pub reparams: Vec<MonotoneReparam>,
    pub nudged: bool,
    pub stages: usize,
    pub iterations: usize,
    pub stage_histories: Vec<Vec<f64>>,
    /// `sup |H − T|` and `sup |R|` of the returned metric.
    pub h_error: f64,
    pub r_error: f64,
    pub status: Status,
}

fn curvatures(m: &GridMetric) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((curvature(m)?.1, boundary_geometry(m)?.h))
}

fn smoothstep(t: f64) -> (f64, f64) {
    let t = t.clamp(0.0, 1.0);
    (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
}

/// Scalar-flat metric with boundary mean curvature `target_h`, built from a
/// scalar-flat background by scaling, boundary reparametrization and local
/// solves.
pub fn prescribe_full(g0: &GridMetric, target_h: &[f64], cfg: &FullConfig) -> Result<FullResult> {
    cfg.newton.validate()?;
    let shape = g0.shape.clone();
    let n = g0.n();
    let nb = shape.num_boundary_nodes();
    if target_h.len() != nb {
        return Err(Error::ShapeMismatch { expected: nb, got: target_h.len() });
    }
    let (_, mut h0) = curvatures(g0)?;
    let axis = shape.tangential_axes()[0];
    let period = shape.length(axis);
    let identity = || MonotoneReparam::identity(Domain::Circle { period }, 8);
    let sup_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if sup_diff(&h0, target_h) <= cfg.newton.tol_residual {
        let r_error = norm_inf(&curvature(g0)?.1);
        return Ok(FullResult {
            metric: g0.clone(),
            scale: 1.0,
            reparams: vec![identity(), identity()],
            nudged: false,
            stages: 0,
            iterations: 0,
            stage_histories: vec![],
            h_error: 0.0,
            r_error,
            status: Status::Converged,
        });
    }
    let spread = |v: &[f64]| {
        let (a, b) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        (b - a) / (1.0 + a.abs().max(b.abs()))
    };
    let mut g = g0.clone();
    let mut nudged = false;
    if spread(&h0) <= cfg.constant_tol && spread(target_h) > cfg.constant_tol {
        let c = choose_scale(&h0, target_h)?;
        let data: Vec<f64> = target_h.iter().zip(&h0).map(|(t, h)| cfg.nudge_fraction * (c * t - h)).collect();
        g = harmonic_nudge(&g, &data)?;
        h0 = boundary_geometry(&g)?.h;
        nudged = true;
    }
    let c = choose_scale(&h0, target_h)?;

    // boundary reparametrization per face along `axis`
    let ct: Vec<f64> = target_h.iter().map(|t| c * t).collect();
    let p_circle = default_p(n).max(5.0);
    let dcfg = DiffeoConfig {
        eps: cfg.diffeo_eps,
        p: p_circle,
        mode: ApproxMode::Fractional,
        samples: cfg.diffeo_samples,
        modes: (shape.count(axis) / 4).max(1),
        min_slope: cfg.min_slope,
        ..Default::default()
    };
    let mut reparams = Vec::new();
    for face in [Face::Lower, Face::Upper] {
        let fprof = TrigInterp::new(&face_profile(&shape, &ct, face, axis), period);
        let gprof = TrigInterp::new(&face_profile(&shape, &h0, face, axis), period);
        let built = build_diffeo(&|x| fprof.eval(x), &|x| gprof.eval(x), Domain::Circle { period }, &dcfg);
        reparams.push(match built {
            Ok(r) => r.reparam,
            Err(Error::Precondition(_)) => identity(),
            Err(e) => return Err(e),
        });
    }
    let face_of = |q: usize| -> usize { usize::from(shape.multi(q)[shape.boundary_axis] != 0) };
    let x_of = |q: usize| shape.multi(q)[axis] as f64 * shape.spacing[axis];

    // c T∘φ on the boundary
    let full_ct = lift_boundary(&shape, &ct);
    let tgt: Vec<f64> = (0..shape.num_nodes())
        .map(|q| reparams[face_of(q)].eval(x_of(q)))
        .collect();
    let ct_phi_full = resample_axis(&shape, &full_ct, axis, &tgt)?;
    let ct_phi: Vec<f64> = shape.boundary_nodes().iter().map(|&(q, _)| ct_phi_full[q]).collect();

    let mut histories = Vec::new();
    let zero = vec![0.0; shape.num_nodes()];
    let first = continuation_solve(&g, &zero, &ct_phi, &cfg.newton, cfg.max_stages)?;
    histories.extend(first.histories);
    let (g1, st1, it1) = (first.metric, first.stages, first.iterations);

    // pull back c² g₁ by Ψ, Ψ = φ⁻¹ on each face
    let scaled = g1.scaled(c * c)?;
    let y = shape.boundary_axis;
    let ly = shape.length(y);
    let inv: Vec<Vec<(f64, f64)>> = reparams
        .iter()
        .map(|r| {
            (0..shape.count(axis))
                .map(|i| {
                    let x = i as f64 * shape.spacing[axis];
                    let psi = r.inverse(x);
                    (psi, 1.0 / r.derivative(psi))
                })
                .collect()
        })
        .collect();
    let mut targets = vec![0.0; shape.num_nodes()];
    let mut jac = vec![[0.0; MAX_DIM]; shape.num_nodes()];
    for q in 0..shape.num_nodes() {
        let mi = shape.multi(q);
        let (s, ds) = smoothstep(mi[y] as f64 / shape.sizes[y] as f64);
        let x = x_of(q);
        let (pl, dl) = inv[0][mi[axis]];
        let (pu, du) = inv[1][mi[axis]];
        targets[q] = x + (1.0 - s) * (pl - x) + s * (pu - x);
        jac[q][axis] = 1.0 + (1.0 - s) * (dl - 1.0) + s * (du - 1.0);
        jac[q][y] = ds / ly * (pu - pl);
    }
    let pulled = pull_back(&scaled, axis, &targets, &jac)?;
    let (st2, it2, metric) = {
        let (rr, hh) = curvatures(&pulled)?;
        let res = norm_inf(&rr).max(sup_diff(&hh, target_h));
        if res <= cfg.newton.tol_residual {
            (0, 0, pulled)
        } else {
            let polish = continuation_solve(&pulled, &zero, target_h, &cfg.newton, cfg.max_stages)?;
            histories.extend(polish.histories);
            (polish.stages, polish.iterations, polish.metric)
        }
    };
    let (rr, hh) = curvatures(&metric)?;
    let h_error = sup_diff(&hh, target_h);
    let r_error = norm_inf(&rr);
    let status = if h_error.max(r_error) <= cfg.newton.tol_residual { Status::Converged } else { Status::Diverged };
    Ok(FullResult {
        metric,
        scale: c,
        reparams,
        nudged,
        stages: st1 + st2,
        iterations: it1 + it2,
        stage_histories: histories,
        h_error,
        r_error,
        status,
    })
}
