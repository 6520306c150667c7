use serde::{Deserialize, Serialize};

use super::{
    angles_for, curvatures_for, discrete_curvatures, gauss_bonnet_residual, sign_gate, Location,
    TriConformalSurface,
};
use crate::linalg::{norm_inf, BandedLu};
use crate::rearrange::{build_diffeo, DiffeoConfig, Domain};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Pointwise tolerance on `K − f` and `κ − h`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings per Newton step before giving up.
    pub max_halvings: usize,
    /// Continuation stages allowed after a failed direct solve.
    pub max_stages: usize,
    /// Re-solve with a rearranged boundary target when continuation fails.
    pub retry: bool,
    pub diffeo_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 40, max_halvings: 20, max_stages: 200, retry: true, diffeo_eps: 5e-2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolvePath {
    Direct,
    Continuation,
    /// The boundary data was composed with a rearranging diffeomorphism.
    Rearranged,
}

/// Prescribed data: `K` per vertex (boundary vertices included, it weighs
/// their area share) and `κ` per boundary vertex (ignored inside).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub k: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl Targets {
    fn is_zero(&self) -> bool {
        self.k.iter().chain(&self.kappa).all(|&v| v == 0.0)
    }

    fn lerp(&self, other: &Targets, t: f64) -> Targets {
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
        Targets { k: mix(&self.k, &other.k), kappa: mix(&self.kappa, &other.kappa) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub surface: TriConformalSurface,
    pub iterations: usize,
    /// Sup residual after each Newton step, over all stages.
    pub history: Vec<f64>,
    pub stages: usize,
    pub path: SolvePath,
    pub residual: f64,
    pub gauss_bonnet: f64,
    /// Data actually prescribed (differs from the input on the rearranged path).
    pub targets: Targets,
}

/// `F = defect − K·area − κ·length`, the residual in curvature units
/// (`F/area` inside, `F/length` on the boundary) and the Jacobian of `F`.
pub(crate) fn residual_and_jacobian(
    s: &TriConformalSurface,
    u: &[f64],
    t: &Targets,
    with_jacobian: bool,
) -> Result<(Vec<f64>, Vec<f64>, Option<BandedLu>)> {
    let c = curvatures_for(s, u)?;
    let n = s.num_vertices();
    let f: Vec<f64> = (0..n)
        .map(|i| {
            let bd = if s.boundary[i] { t.kappa[i] * c.length[i] } else { 0.0 };
            c.defect[i] - t.k[i] * c.area[i] - bd
        })
        .collect();
    let r: Vec<f64> = (0..n).map(|i| f[i] / c.weight[i]).collect();
    if !with_jacobian {
        return Ok((f, r, None));
    }
    let bw = s.bandwidth();
    let mut j = BandedLu::zeros(n, bw, bw);
    let len = s.lengths_for(u);
    let ang = angles_for(s, &len)?;
    for (ti, tri) in s.triangles.iter().enumerate() {
        let l = s.tri_lengths(ti, &len);
        let cot: Vec<f64> = ang[ti].iter().map(|a| 1.0 / a.tan()).collect();
        // dA/du at each corner: edges at corner q are opposite the other two corners
        let mut da = [0.0; 3];
        for (q, d) in da.iter_mut().enumerate() {
            *d = (0..3).filter(|&k| k != q).map(|k| l[k] * l[k] * cot[k]).sum::<f64>() / 8.0;
        }
        for k in 0..3 {
            let (i, a, b) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (ca, cb) = (cot[(k + 1) % 3], cot[(k + 2) % 3]);
            j.add(i, i, 0.25 * (ca + cb));
            j.add(i, a, -0.25 * cb);
            j.add(i, b, -0.25 * ca);
            if t.k[i] != 0.0 {
                for q in 0..3 {
                    j.add(i, tri[q], -t.k[i] * da[q] / 3.0);
                }
            }
        }
    }
    for (a, b, e) in s.boundary_edges() {
        let d = len[e] / 8.0;
        for i in [a, b] {
            j.add(i, a, -t.kappa[i] * d);
            j.add(i, b, -t.kappa[i] * d);
        }
    }
    Ok((f, r, Some(j)))
}

struct Newton {
    u: Vec<f64>,
    iterations: usize,
    history: Vec<f64>,
}

fn newton(s: &TriConformalSurface, u0: &[f64], t: &Targets, cfg: &SolverConfig) -> Result<Newton> {
    // all-zero data is scale invariant: pin u₀ instead of the redundant first equation
    let gauge = t.is_zero();
    let mut u = u0.to_vec();
    let (_, r, _) = residual_and_jacobian(s, &u, t, false)?;
    let mut res = norm_inf(&r);
    let mut history = Vec::new();
    let mut it = 0;
    while res > cfg.tol {
        if it == cfg.max_iter {
            return Err(Error::Diverged { iterations: it, residual: res });
        }
        let (f, _, j) = residual_and_jacobian(s, &u, t, true)?;
        let mut j = j.unwrap();
        let mut rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        if gauge {
            j = pin_first(j, s.num_vertices(), s.bandwidth());
            rhs[0] = 0.0;
        }
        if !j.factor() {
            return Err(Error::Singular("conformal Jacobian has a zero pivot".into()));
        }
        j.solve(&mut rhs);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = u.iter().zip(&rhs).map(|(a, d)| a + alpha * d).collect();
            if let Ok((_, r, _)) = residual_and_jacobian(s, &trial, t, false) {
                let rn = norm_inf(&r);
                if rn < res {
                    accepted = Some((trial, rn));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((next, rn)) = accepted else {
            return Err(Error::Diverged { iterations: it, residual: res });
        };
        u = next;
        res = rn;
        it += 1;
        history.push(res);
    }
    if gauge {
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        u.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(Newton { u, iterations: it, history })
}

fn pin_first(j: BandedLu, n: usize, bw: usize) -> BandedLu {
    let mut out = BandedLu::zeros(n, bw, bw);
    for i in 1..n {
        for c in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
            let v = j.get(i, c);
            if v != 0.0 {
                out.add(i, c, v);
            }
        }
    }
    out.add(0, 0, 1.0);
    out
}

/// Data solved exactly by the current `u`: `K` inside, `κ = defect/length` on
/// the boundary.
fn current_targets(s: &TriConformalSurface) -> Result<Targets> {
    let c = discrete_curvatures(s)?;
    let k = (0..s.num_vertices()).map(|i| if s.boundary[i] { 0.0 } else { c.curvature[i] }).collect();
    let kappa = (0..s.num_vertices()).map(|i| if s.boundary[i] { c.curvature[i] } else { 0.0 }).collect();
    Ok(Targets { k, kappa })
}

/// Newton from `s.u`, falling back to continuation along the straight line
/// from the current curvature to `t`.
fn solve_with_continuation(s: &TriConformalSurface, t: &Targets, cfg: &SolverConfig) -> Result<SolveReport> {
    let (u, iterations, history, stages, path) = match newton(s, &s.u, t, cfg) {
        Ok(n) => (n.u, n.iterations, n.history, 1, SolvePath::Direct),
        Err(_) => {
            let t0 = current_targets(s)?;
            let mut u = s.u.clone();
            let (mut at, mut ds) = (0.0f64, 0.25f64);
            let (mut iterations, mut history, mut stages) = (0, Vec::new(), 0);
            while at < 1.0 {
                if stages == cfg.max_stages || ds < 1.0 / 4096.0 {
                    let (_, r, _) = residual_and_jacobian(s, &u, t, false)?;
                    return Err(Error::Diverged { iterations, residual: norm_inf(&r) });
                }
                stages += 1;
                let next = (at + ds).min(1.0);
                match newton(s, &u, &t0.lerp(t, next), cfg) {
                    Ok(n) => {
                        u = n.u;
                        iterations += n.iterations;
                        history.extend(n.history);
                        at = next;
                        ds *= 2.0;
                    }
                    Err(_) => ds *= 0.5,
                }
            }
            (u, iterations, history, stages, SolvePath::Continuation)
        }
    };
    let surface = s.with_u(u)?;
    let (_, r, _) = residual_and_jacobian(&surface, &surface.u, t, false)?;
    let gauss_bonnet = gauss_bonnet_residual(&surface)?;
    Ok(SolveReport {
        surface,
        iterations,
        history,
        stages,
        path,
        residual: norm_inf(&r),
        gauss_bonnet,
        targets: t.clone(),
    })
}

/// Solves `defect_i = K_i·area_i + κ_i·length_i` for `u`; no sign gate and no
/// rearrangement.
pub fn solve_conformal(s: &TriConformalSurface, t: &Targets, cfg: &SolverConfig) -> Result<SolveReport> {
    check_len(s, &t.k)?;
    check_len(s, &t.kappa)?;
    if !(cfg.tol > 0.0) {
        return Err(Error::Precondition("solver tolerance must be positive".into()));
    }
    solve_with_continuation(s, t, cfg)
}

/// Flat interior, boundary geodesic curvature `h` (read at boundary vertices).
pub fn solve_geodesic_curvature(s: &TriConformalSurface, h: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    check_len(s, h)?;
    let hb: Vec<f64> = (0..h.len()).filter(|&i| s.boundary[i]).map(|i| h[i]).collect();
    sign_gate(s.euler_characteristic(), &hb, Location::Boundary).into_result()?;
    let n = s.num_vertices();
    let kappa: Vec<f64> = (0..n).map(|i| if s.boundary[i] { h[i] } else { 0.0 }).collect();
    let t = Targets { k: vec![0.0; n], kappa };
    let first = match solve_conformal(s, &t, cfg) {
        Ok(r) => return Ok(r),
        Err(e) => e,
    };
    if !cfg.retry {
        return Err(first);
    }
    let kappa0 = discrete_curvatures(s)?.curvature;
    let Ok(kappa2) = rearranged_targets(s, &t.kappa, &kappa0, cfg.diffeo_eps) else {
        return Err(first);
    };
    let hb2: Vec<f64> = (0..n).filter(|&i| s.boundary[i]).map(|i| kappa2[i]).collect();
    if !sign_gate(s.euler_characteristic(), &hb2, Location::Boundary).admissible {
        return Err(first);
    }
    let t2 = Targets { k: t.k, kappa: kappa2 };
    let mut r = solve_conformal(s, &t2, cfg).map_err(|_| first)?;
    r.path = SolvePath::Rearranged;
    Ok(r)
}

/// Geodesic boundary, Gauss curvature `f`. Interior values are gated; values
/// at boundary vertices weigh the boundary strip.
pub fn solve_gauss_curvature(s: &TriConformalSurface, f: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    check_len(s, f)?;
    let fi: Vec<f64> = (0..f.len()).filter(|&i| !s.boundary[i]).map(|i| f[i]).collect();
    sign_gate(s.euler_characteristic(), &fi, Location::Interior).into_result()?;
    let t = Targets { k: f.to_vec(), kappa: vec![0.0; f.len()] };
    solve_conformal(s, &t, cfg)
}

fn check_len(s: &TriConformalSurface, v: &[f64]) -> Result<()> {
    if v.len() == s.num_vertices() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected: s.num_vertices(), got: v.len() })
    }
}

/// Composes the boundary data on each loop with an L^p-rearranging
/// diffeomorphism toward the background geodesic curvature.
fn rearranged_targets(s: &TriConformalSurface, t: &[f64], kappa0: &[f64], eps: f64) -> Result<Vec<f64>> {
    let len = s.lengths();
    let mut out = t.to_vec();
    let edge_len: Vec<f64> = s.boundary_edges().map(|(_, _, e)| len[e]).collect();
    let mut offset = 0;
    for lp in &s.loops {
        let seg = &edge_len[offset..offset + lp.len()];
        offset += lp.len();
        let total: f64 = seg.iter().sum();
        let mut xs = vec![0.0];
        for l in &seg[..seg.len() - 1] {
            xs.push(xs.last().unwrap() + l / total);
        }
        let hv: Vec<f64> = lp.iter().map(|&v| t[v]).collect();
        let kv: Vec<f64> = lp.iter().map(|&v| kappa0[v]).collect();
        let f = |x: f64| periodic_linear(&xs, &hv, x);
        let g = |x: f64| periodic_linear(&xs, &kv, x);
        let cfg = DiffeoConfig { eps, ..Default::default() };
        let phi = build_diffeo(&f, &g, Domain::Circle { period: 1.0 }, &cfg)?.reparam;
        for (k, &v) in lp.iter().enumerate() {
            out[v] = f(phi.eval_mod(xs[k]));
        }
    }
    Ok(out)
}

/// Piecewise-linear periodic interpolation on `[0, 1)`.
fn periodic_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let x = x.rem_euclid(1.0);
    let n = xs.len();
    let k = xs.partition_point(|&a| a <= x).saturating_sub(1);
    let (x0, y0) = (xs[k], ys[k]);
    let (x1, y1) = if k + 1 < n { (xs[k + 1], ys[k + 1]) } else { (1.0, ys[0]) };
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}
