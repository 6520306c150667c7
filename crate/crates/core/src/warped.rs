//! Total scalar curvature of the warped products
//! `g₀ = f^{−2p/(n−1)} (g_d + f² g_s)` on `D̄^q × S^p`, `n = p + q`, with `f`
//! radial on the unit disk and `f ≡ 1` near its boundary.
//!
//! Integrating the scalar curvature over the sphere factor and by parts over
//! the disk gives
//!
//! ```text
//! ∫ R dv = Vol(S^p) ∫_D f^{p/(n−1)−2} (p(p−1) − p(n−1−p)/(n−1) |∇f|²) dv_d
//! ```
//!
//! [`total_scalar_curvature`] evaluates this radially; [`cross_check_grid`]
//! assembles `g₀` on a coordinate chart and integrates the grid scalar
//! curvature instead.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::tensor_grid::{scalar_curvature, GridShape, MAX_DIM};
use crate::{Error, GridMetric, Result};

/// Support of the bump in `r`.
pub const BUMP_SUPPORT: (f64, f64) = (0.2, 0.6);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileShape {
    /// `f = 1 + (λ − 1) s(r)` with `s = (1 − t²)⁴`, `t` the position in
    /// [`BUMP_SUPPORT`] rescaled to `[−1, 1]`.
    Bump { lambda: f64 },
    /// Samples of `f` on a uniform grid of `[0, 1]`, cubic Hermite in between.
    Samples { f: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpProfile {
    pub p: usize,
    pub q: usize,
    /// Width of the outer band on which `f ≡ 1`.
    pub collar: f64,
    pub shape: ProfileShape,
}

fn bump(r: f64) -> (f64, f64) {
    let (a, b) = BUMP_SUPPORT;
    if r <= a || r >= b {
        return (0.0, 0.0);
    }
    let half = 0.5 * (b - a);
    let t = (r - 0.5 * (a + b)) / half;
    let w = 1.0 - t * t;
    (w.powi(4), -8.0 * t * w.powi(3) / half)
}

impl WarpProfile {
    pub fn bump(p: usize, q: usize, lambda: f64) -> Result<Self> {
        let w = Self { p, q, collar: 1.0 - BUMP_SUPPORT.1, shape: ProfileShape::Bump { lambda } };
        w.validate()?;
        Ok(w)
    }

    pub fn constant(p: usize, q: usize) -> Result<Self> {
        Self::bump(p, q, 1.0)
    }

    pub fn from_samples(p: usize, q: usize, f: Vec<f64>, collar: f64) -> Result<Self> {
        let w = Self { p, q, collar, shape: ProfileShape::Samples { f } };
        w.validate()?;
        Ok(w)
    }

    pub fn n(&self) -> usize {
        self.p + self.q
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 || self.q < 2 {
            return Err(Error::Precondition(format!("need p ≥ 1 and q ≥ 2, got p = {}, q = {}", self.p, self.q)));
        }
        if !(0.0..1.0).contains(&self.collar) {
            return Err(Error::Precondition(format!("collar width {} outside [0, 1)", self.collar)));
        }
        match &self.shape {
            ProfileShape::Bump { lambda } => {
                if !(*lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::Precondition(format!("bump amplitude {lambda} gives a nonpositive profile")));
                }
            }
            ProfileShape::Samples { f } => {
                if f.len() < 3 {
                    return Err(Error::Precondition("profile needs at least 3 samples".into()));
                }
                if let Some(i) = f.iter().position(|v| !(*v > 0.0)) {
                    return Err(Error::Precondition(format!("profile is not positive at sample {i}")));
                }
                let m = f.len() - 1;
                for (i, v) in f.iter().enumerate() {
                    if i as f64 / m as f64 >= 1.0 - self.collar - 1e-12 && (v - 1.0).abs() > 1e-12 {
                        return Err(Error::Precondition(format!("profile is not 1 in the collar (sample {i})")));
                    }
                }
            }
        }
        Ok(())
    }

    /// `f(r)` and `f'(r)`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match &self.shape {
            ProfileShape::Bump { lambda } => {
                let (s, ds) = bump(r);
                (1.0 + (lambda - 1.0) * s, (lambda - 1.0) * ds)
            }
            ProfileShape::Samples { f } => {
                let m = f.len() - 1;
                let h = 1.0 / m as f64;
                let slope = |i: usize| {
                    if i == 0 {
                        (f[1] - f[0]) / h
                    } else if i == m {
                        (f[m] - f[m - 1]) / h
                    } else {
                        (f[i + 1] - f[i - 1]) / (2.0 * h)
                    }
                };
                let x = (r.clamp(0.0, 1.0) / h).min(m as f64 - 1e-12);
                let i = x.floor() as usize;
                let t = x - i as f64;
                let (y0, y1, d0, d1) = (f[i], f[i + 1], slope(i) * h, slope(i + 1) * h);
                let (t2, t3) = (t * t, t * t * t);
                let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * d0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * d1;
                let dv = (6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * y1
                    + (3.0 * t2 - 2.0 * t) * d1;
                (v, dv / h)
            }
        }
    }

    /// `(r, f)` on `count + 1` uniform samples.
    pub fn samples(&self, count: usize) -> Vec<(f64, f64)> {
        (0..=count).map(|i| {
            let r = i as f64 / count as f64;
            (r, self.eval(r).0)
        }).collect()
    }
}

/// Volume of the unit `k`-sphere.
pub fn sphere_volume(k: usize) -> f64 {
    let a = (k as f64 + 1.0) / 2.0;
    2.0 * PI.powf(a) / gamma(a)
}

/// Volume of the unit `q`-ball.
pub fn ball_volume(q: usize) -> f64 {
    sphere_volume(q - 1) / q as f64
}

/// Radial evaluation with composite Simpson on `quad_res` intervals.
pub fn total_scalar_curvature(w: &WarpProfile, quad_res: usize) -> Result<f64> {
    w.validate()?;
    let (p, q, n) = (w.p as f64, w.q as f64, w.n() as f64);
    let res = quad_res.max(2).next_multiple_of(2);
    let rs = p * (p - 1.0);
    let c = p * (n - 1.0 - p) / (n - 1.0);
    let expo = p / (n - 1.0) - 2.0;
    let h = 1.0 / res as f64;
    let mut s = 0.0;
    for i in 0..=res {
        let r = i as f64 * h;
        let (f, df) = w.eval(r);
        if !(f > 0.0) {
            return Err(Error::Precondition(format!("profile is not positive at r = {r}")));
        }
        let wt = if i == 0 || i == res { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s += wt * f.powf(expo) * (rs - c * df * df) * r.powf(q - 1.0);
    }
    Ok(sphere_volume(w.p) * sphere_volume(w.q - 1) * s * h / 3.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NegativeProfile {
    pub profile: WarpProfile,
    pub lambda: f64,
    pub total: f64,
    pub evaluations: usize,
}

/// Smallest bump amplitude (to `1e−6` relative) whose total scalar curvature
/// is at most `target`.
pub fn find_negative_profile(p: usize, q: usize, target: f64) -> Result<NegativeProfile> {
    let n = p + q;
    if p < 1 || q < 2 || p > n - 2 {
        return Err(Error::Precondition(format!("need 1 ≤ p ≤ n − 2 with n = p + q, got p = {p}, q = {q}")));
    }
    const QUAD: usize = 2000;
    let total = |lambda: f64| -> Result<f64> { total_scalar_curvature(&WarpProfile::bump(p, q, lambda)?, QUAD) };
    let mut evals = 1;
    let base = total(1.0)?;
    if base <= target {
        return Ok(NegativeProfile { profile: WarpProfile::constant(p, q)?, lambda: 1.0, total: base, evaluations: evals });
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    let mut t_hi = total(hi)?;
    evals += 1;
    while t_hi > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Diverged { iterations: evals, residual: t_hi - target });
        }
        t_hi = total(hi)?;
        evals += 1;
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        let t = total(mid)?;
        evals += 1;
        if t <= target {
            hi = mid;
            t_hi = t;
        } else {
            lo = mid;
        }
    }
    Ok(NegativeProfile { profile: WarpProfile::bump(p, q, hi)?, lambda: hi, total: t_hi, evaluations: evals })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridCheck {
    pub formula: f64,
    pub grid: f64,
    pub relative_error: f64,
}

/// Cells along `r` for [`cross_check_grid`].
pub const DEFAULT_GRID_RES: usize = 64;

/// Inner radius and polar margin of the integration region.
const R0: f64 = 0.15;
const POLE: f64 = 0.4;
/// Extra cells on each bounded side of the chart, kept out of the integral
/// because their second differences reach the one-sided edge stencils.
const MARGIN: usize = 2;
/// Cells across `[0.4, π − 0.4]`; `R` does not depend on `φ`, so this stays
/// fixed while `r` is refined.
const POLAR_CELLS: usize = 48;

/// Warped metric on the chart `(r, θ, [φ,] ψ)`, covering `r ∈ [0.15, 1]` and,
/// for `p = 2`, `φ ∈ [0.4, π − 0.4]` plus [`MARGIN`] cells on each side.
/// `grid_res` counts the cells along `r`.
/// Only `q = 2`, `p ∈ {1, 2}` fit the grid; `grid_res` must be even and at
/// least 16.
pub fn chart_metric(w: &WarpProfile, grid_res: usize) -> Result<GridMetric> {
    w.validate()?;
    if w.q != 2 || !(1..=2).contains(&w.p) {
        return Err(Error::Unsupported(format!(
            "grid chart needs q = 2 and p ∈ {{1, 2}}, got p = {}, q = {}",
            w.p, w.q
        )));
    }
    if grid_res < 16 || grid_res % 2 == 1 {
        return Err(Error::Precondition(format!("grid resolution must be even and ≥ 16, got {grid_res}")));
    }
    let n = w.n();
    let tau = 2.0 * PI;
    let cells = grid_res + 2 * MARGIN;
    let dr = (1.0 - R0) / grid_res as f64;
    let r_origin = R0 - MARGIN as f64 * dr;
    let shape = if w.p == 1 {
        GridShape::chart(vec![cells, 8, 8], vec![dr, tau / 8.0, tau / 8.0], vec![r_origin, 0.0, 0.0], 0, vec![])?
    } else {
        let dphi = (PI - 2.0 * POLE) / POLAR_CELLS as f64;
        GridShape::chart(
            vec![cells, 8, POLAR_CELLS + 2 * MARGIN, 8],
            vec![dr, tau / 8.0, dphi, tau / 8.0],
            vec![r_origin, 0.0, POLE - MARGIN as f64 * dphi, 0.0],
            0,
            vec![2],
        )?
    };
    let expo = -2.0 * w.p as f64 / (n as f64 - 1.0);
    GridMetric::from_fn(shape, |x| {
        let r = x[0];
        let f = w.eval(r).0;
        let c = f.powf(expo);
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        m[0][0] = c;
        m[1][1] = c * r * r;
        if n == 3 {
            m[2][2] = c * f * f;
        } else {
            let s = x[2].sin();
            m[2][2] = c * f * f;
            m[3][3] = c * f * f * s * s;
        }
        m
    })
}

fn simpson(i: usize, res: usize) -> f64 {
    if i == 0 || i == res {
        1.0 / 3.0
    } else if i % 2 == 1 {
        4.0 / 3.0
    } else {
        2.0 / 3.0
    }
}

/// Integrates the grid scalar curvature of [`chart_metric`] and compares it
/// with [`total_scalar_curvature`].
///
/// The integral runs over the chart minus its margins with Simpson weights
/// along bounded axes. The disk `r < 0.15`, where `f ≡ 1` and `R = p(p−1)`,
/// is restored in closed form, and for `p = 2` the polar caps by the factor
/// `1/cos(0.4)` since neither `R` nor `f` depends on `φ`.
pub fn cross_check_grid(w: &WarpProfile, grid_res: usize) -> Result<GridCheck> {
    for i in 0..=100 {
        let r = R0 * i as f64 / 100.0;
        if (w.eval(r).0 - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("profile must be 1 on [0, {R0}] for the chart check")));
        }
    }
    let m = chart_metric(w, grid_res)?;
    let r = scalar_curvature(&m)?;
    let shape = &m.shape;
    let mut chart = 0.0;
    for q in 0..shape.num_nodes() {
        let idx = shape.multi(q);
        let mut wt = 1.0;
        for a in 0..shape.n {
            if shape.is_bounded(a) {
                let res = if a == 0 { grid_res } else { POLAR_CELLS };
                let i = idx[a];
                if i < MARGIN || i > MARGIN + res {
                    wt = 0.0;
                    break;
                }
                wt *= simpson(i - MARGIN, res) * shape.spacing[a];
            } else {
                wt *= shape.spacing[a];
            }
        }
        if wt == 0.0 {
            continue;
        }
        let g = m.g.matrix(q);
        let density: f64 = (0..shape.n).map(|a| g[a][a]).product::<f64>().sqrt();
        chart += wt * density * r[q];
    }
    let caps = if w.p == 2 { 1.0 / POLE.cos() } else { 1.0 };
    let inner = (w.p * (w.p - 1)) as f64 * sphere_volume(w.p) * PI * R0 * R0;
    let grid = chart * caps + inner;
    let formula = total_scalar_curvature(w, 4000)?;
    Ok(GridCheck { formula, grid, relative_error: (grid - formula).abs() / formula.abs().max(1e-300) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_and_ball_volumes() {
        assert!((sphere_volume(1) - 2.0 * PI).abs() < 1e-12);
        assert!((sphere_volume(2) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_volume(3) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((ball_volume(2) - PI).abs() < 1e-12);
        assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_profile_total() {
        let t = total_scalar_curvature(&WarpProfile::constant(2, 2).unwrap(), 200).unwrap();
        assert!((t - 8.0 * PI * PI).abs() < 1e-10 * t, "{t}");
        // p = 1: flat sphere factor, nothing left
        let t = total_scalar_curvature(&WarpProfile::constant(1, 2).unwrap(), 200).unwrap();
        assert!(t.abs() < 1e-12);
    }

    #[test]
    fn circle_factor_is_pure_gradient() {
        let w = WarpProfile::bump(1, 2, 3.0).unwrap();
        let t = total_scalar_curvature(&w, 4000).unwrap();
        // trapezoid on a fine grid as an independent quadrature
        let m = 200_000;
        let h = 1.0 / m as f64;
        let mut s = 0.0;
        for i in 0..=m {
            let r = i as f64 * h;
            let (f, df) = w.eval(r);
            let wt = if i == 0 || i == m { 0.5 } else { 1.0 };
            s += wt * df * df * f.powf(-1.5) * r;
        }
        let oracle = -0.5 * 2.0 * PI * 2.0 * PI * s * h;
        assert!(t < 0.0);
        assert!((t - oracle).abs() < 1e-8 * oracle.abs(), "{t} vs {oracle}");
    }

    #[test]
    fn bump_derivative_matches_differences() {
        let w = WarpProfile::bump(2, 2, 2.5).unwrap();
        for r in [0.25, 0.33, 0.4, 0.51, 0.58] {
            let e = 1e-6;
            let fd = (w.eval(r + e).0 - w.eval(r - e).0) / (2.0 * e);
            assert!((w.eval(r).1 - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn quadrature_refinement_is_stable() {
        let w = WarpProfile::bump(2, 2, 4.0).unwrap();
        let a = total_scalar_curvature(&w, 400).unwrap();
        let b = total_scalar_curvature(&w, 800).unwrap();
        assert!((a - b).abs() < 1e-3 * b.abs());
    }

    #[test]
    fn total_decreases_with_amplitude() {
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let lambda = 1.0 + 2.0 * k as f64;
            let t = total_scalar_curvature(&WarpProfile::bump(2, 2, lambda).unwrap(), 2000).unwrap();
            assert!(t < prev, "λ = {lambda}");
            prev = t;
        }
        assert!(prev < 0.0);
    }

    #[test]
    fn negative_profile_search() {
        let r = find_negative_profile(2, 2, -10.0).unwrap();
        assert!(r.total <= -10.0 && r.lambda > 1.0);
        let below = total_scalar_curvature(&WarpProfile::bump(2, 2, r.lambda * (1.0 - 1e-4)).unwrap(), 2000).unwrap();
        assert!(below > -10.0);
        let z = find_negative_profile(2, 2, 0.0).unwrap();
        assert!(z.lambda > 1.0 && z.total <= 0.0);
        assert!(find_negative_profile(3, 2, -1.0).is_ok());
        assert!(find_negative_profile(1, 1, -1.0).is_err());
    }

    #[test]
    fn sampled_profile_matches_bump() {
        let b = WarpProfile::bump(2, 2, 2.0).unwrap();
        let f: Vec<f64> = b.samples(4000).into_iter().map(|(_, v)| v).collect();
        let s = WarpProfile::from_samples(2, 2, f, 0.3).unwrap();
        let (tb, ts) = (total_scalar_curvature(&b, 4000).unwrap(), total_scalar_curvature(&s, 4000).unwrap());
        assert!((tb - ts).abs() < 1e-3 * tb.abs(), "{tb} {ts}");
        assert!(WarpProfile::from_samples(2, 2, vec![1.0, 2.0, 1.5], 0.6).is_err());
        assert!(WarpProfile::from_samples(2, 2, vec![1.0, -1.0, 1.0], 0.2).is_err());
    }

    #[test]
    fn grid_path_agrees_and_converges() {
        let c = cross_check_grid(&WarpProfile::constant(2, 2).unwrap(), 32).unwrap();
        assert!(c.relative_error < 0.02, "{c:?}");
        let w = WarpProfile::bump(2, 2, 2.0).unwrap();
        let coarse = cross_check_grid(&w, 32).unwrap();
        let fine = cross_check_grid(&w, DEFAULT_GRID_RES).unwrap();
        assert!(fine.relative_error < 0.02, "{fine:?}");
        assert!(fine.relative_error < 0.6 * coarse.relative_error, "{coarse:?} {fine:?}");
        let w1 = WarpProfile::bump(1, 2, 2.0).unwrap();
        let c1 = cross_check_grid(&w1, DEFAULT_GRID_RES).unwrap();
        assert!(c1.relative_error < 0.02, "{c1:?}");
    }
}
