//! Approximation by diffeomorphism on the circle and on intervals.
//!
//! Given `f` and `g` with `range(g) ⊂ range(f)`, [`build_diffeo`] constructs an
//! orientation-preserving reparametrization `φ` with `f∘φ` close to `g`:
//!
//! * in `L^p` by a plateau/sweep construction: each cell of a partition on
//!   which `g` is nearly constant is mapped into a short interval around a
//!   point `b_i` with `f(b_i) = g_i`, and the remaining fraction `σ` of the cell
//!   sweeps to the next plateau. `σ` shrinks geometrically with depth;
//! * in the fractional norm by a slope-limited monotone alignment followed by
//!   a Gauss–Newton fit of a smooth Fourier reparametrization.
//!
//! The fractional seminorm uses the kernel `|x − y|^{-(n + p/2)}` where `n` is
//! the dimension of the manifold whose boundary carries the field.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Sampling domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// `N` samples `x_i = i L / N`, uniform weights.
    Circle { period: f64 },
    /// `N + 1` samples including both ends, trapezoid weights.
    Interval { a: f64, b: f64 },
}

impl Domain {
    pub fn circle() -> Self {
        Domain::Circle { period: 2.0 * PI }
    }

    pub fn start(&self) -> f64 {
        match *self {
            Domain::Circle { .. } => 0.0,
            Domain::Interval { a, .. } => a,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Domain::Circle { period } => period,
            Domain::Interval { a, b } => b - a,
        }
    }

    /// Sample points for a resolution of `n` cells.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        let h = self.length() / n as f64;
        let count = match self {
            Domain::Circle { .. } => n,
            Domain::Interval { .. } => n + 1,
        };
        (0..count).map(|i| self.start() + i as f64 * h).collect()
    }

    /// Quadrature weights matching [`Domain::samples`] for `len` values.
    pub fn weights(&self, len: usize) -> Vec<f64> {
        match *self {
            Domain::Circle { period } => vec![period / len as f64; len],
            Domain::Interval { a, b } => {
                let h = (b - a) / (len - 1) as f64;
                let mut w = vec![h; len];
                w[0] = 0.5 * h;
                w[len - 1] = 0.5 * h;
                w
            }
        }
    }
}

/// Discrete `L^p` norm of samples laid out as in [`Domain::samples`].
pub fn lp_norm(values: &[f64], p: f64, domain: Domain) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Precondition(format!("L^p norm needs p ≥ 1, got {p}")));
    }
    if values.len() < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    let w = domain.weights(values.len());
    Ok(values.iter().zip(&w).map(|(v, w)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p))
}

fn check_kernel(p: f64, n: usize) -> Result<()> {
    if !(p > 2.0 * n as f64) {
        return Err(Error::Precondition(format!(
            "fractional seminorm needs p > 2n = {} so that the diagonal kernel |z|^(p/2-n) is integrable; got p = {p}",
            2 * n
        )));
    }
    Ok(())
}

/// `∫_0^{2π} |cos θ|^p dθ`.
fn angular_factor(p: f64) -> f64 {
    use statrs::function::gamma::gamma;
    2.0 * PI.sqrt() * gamma((p + 1.0) / 2.0) / gamma(p / 2.0 + 1.0)
}

/// Gagliardo seminorm `(∬ |u(x) − u(y)|^p / |x − y|^{n + p/2})^{1/p}` of a
/// field on a periodic grid of dimension `d = sizes.len() ∈ {1, 2}`.
///
/// Off-diagonal cells use point quadrature with minimum-image distances. The
/// diagonal cell (replaced by the ball of equal volume, radius `ρ`) uses the
/// first-order expansion `u(x) − u(y) ≈ ∇u·(x − y)`, which integrates to
/// `c_d |∇u|^p ρ^{p/2 − n + d} / (p/2 − n + d)`.
pub fn gagliardo_periodic(values: &[f64], sizes: &[usize], spacing: &[f64], p: f64, n: usize) -> Result<f64> {
    check_kernel(p, n)?;
    let d = sizes.len();
    if !(1..=2).contains(&d) || spacing.len() != d {
        return Err(Error::InvalidShape(format!("periodic seminorm grid of dimension {d}")));
    }
    let total: usize = sizes.iter().product();
    if values.len() != total {
        return Err(Error::ShapeMismatch { expected: total, got: values.len() });
    }
    let cell: f64 = spacing.iter().product();
    let expo = n as f64 + p / 2.0;
    let idx = |i: usize| -> [usize; 2] {
        if d == 1 {
            [i, 0]
        } else {
            [i / sizes[1], i % sizes[1]]
        }
    };
    let periodic_gap = |a: usize, b: usize, axis: usize| -> f64 {
        let m = sizes[axis];
        let k = a.abs_diff(b);
        k.min(m - k) as f64 * spacing[axis]
    };
    // gradient by periodic central differences
    let grad = |i: usize| -> f64 {
        let c = idx(i);
        let mut s = 0.0;
        for axis in 0..d {
            let m = sizes[axis];
            let mut plus = c;
            let mut minus = c;
            plus[axis] = (c[axis] + 1) % m;
            minus[axis] = (c[axis] + m - 1) % m;
            let lin = |q: [usize; 2]| if d == 1 { q[0] } else { q[0] * sizes[1] + q[1] };
            let g = (values[lin(plus)] - values[lin(minus)]) / (2.0 * spacing[axis]);
            s += g * g;
        }
        s.sqrt()
    };
    let (rho, cd) = if d == 1 { (0.5 * spacing[0], 2.0) } else { ((cell / PI).sqrt(), angular_factor(p)) };
    let e = p / 2.0 - n as f64 + d as f64;
    let diag_scale = cd * rho.powf(e) / e;
    let mut sum = 0.0;
    for i in 0..total {
        let ci = idx(i);
        let mut row = 0.0;
        for j in 0..total {
            if i == j {
                continue;
            }
            let cj = idx(j);
            let mut r2 = 0.0;
            for axis in 0..d {
                let g = periodic_gap(ci[axis], cj[axis], axis);
                r2 += g * g;
            }
            row += (values[i] - values[j]).abs().powf(p) / r2.powf(expo / 2.0);
        }
        sum += cell * (cell * row + grad(i).powf(p) * diag_scale);
    }
    Ok(sum.powf(1.0 / p))
}

/// Gagliardo seminorm on the circle `[0, period)` with manifold dimension 2.
pub fn gagliardo_seminorm(values: &[f64], p: f64, period: f64) -> Result<f64> {
    gagliardo_periodic(values, &[values.len()], &[period / values.len() as f64], p, 2)
}

/// Refinement study of the circle seminorm of a sampled function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub resolutions: Vec<usize>,
    pub values: Vec<f64>,
    /// Relative change between the last two resolutions.
    pub last_change: f64,
    /// Growth of more than 10% between the last two resolutions.
    pub diverges: bool,
}

pub fn gagliardo_refinement(f: &dyn Fn(f64) -> f64, p: f64, period: f64, resolutions: &[usize]) -> Result<RefinementStudy> {
    let values = resolutions
        .iter()
        .map(|&n| {
            let s: Vec<f64> = (0..n).map(|i| f(i as f64 * period / n as f64)).collect();
            gagliardo_seminorm(&s, p, period)
        })
        .collect::<Result<Vec<_>>>()?;
    let k = values.len();
    let last_change = if k >= 2 { (values[k - 1] - values[k - 2]) / values[k - 2].abs().max(1e-300) } else { 0.0 };
    Ok(RefinementStudy { resolutions: resolutions.to_vec(), values, last_change, diverges: last_change > 0.1 })
}

/// Interpolation used by [`MonotoneReparam`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interp {
    MonotoneCubic,
    Linear,
}

/// Orientation-preserving reparametrization given by increasing knots.
///
/// On the circle the values are a lift: `φ(x + L) = φ(x) + L`, and the last
/// value must stay below `values[0] + L`. On an interval the map fixes both
/// endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReparam {
    pub domain: Domain,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub interpolation: Interp,
    slopes: Vec<f64>,
}

fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let k = x.len();
    let secant: Vec<f64> = (0..k - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; k];
    m[0] = secant[0];
    m[k - 1] = secant[k - 2];
    for i in 1..k - 1 {
        m[i] = if secant[i - 1] * secant[i] <= 0.0 { 0.0 } else { 0.5 * (secant[i - 1] + secant[i]) };
    }
    for i in 0..k - 1 {
        if secant[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / secant[i];
        let b = m[i + 1] / secant[i];
        let s = a * a + b * b;
        if s > 9.0 {
            let t = 3.0 / s.sqrt();
            m[i] = t * a * secant[i];
            m[i + 1] = t * b * secant[i];
        }
    }
    m
}

impl MonotoneReparam {
    pub fn new(domain: Domain, nodes: Vec<f64>, values: Vec<f64>, interpolation: Interp) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::Precondition("reparametrization needs matching knot arrays of length ≥ 2".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("reparametrization knots must be strictly increasing".into()));
        }
        match domain {
            Domain::Circle { period } => {
                if nodes[0] < 0.0 || *nodes.last().unwrap() >= period {
                    return Err(Error::Precondition("circle knots must lie in [0, L)".into()));
                }
                if !(*values.last().unwrap() < values[0] + period) {
                    return Err(Error::Precondition("circle map must have degree one".into()));
                }
            }
            Domain::Interval { a, b } => {
                let (n0, n1) = (nodes[0], *nodes.last().unwrap());
                if n0 != a || n1 != b || values[0] != a || *values.last().unwrap() != b {
                    return Err(Error::Precondition("interval map must fix both endpoints".into()));
                }
            }
        }
        let mut r = Self { domain, nodes, values, interpolation, slopes: Vec::new() };
        r.rebuild_slopes();
        Ok(r)
    }

    pub fn identity(domain: Domain, knots: usize) -> Self {
        let nodes = domain.samples(knots.max(2));
        Self::new(domain, nodes.clone(), nodes, Interp::MonotoneCubic).expect("identity knots")
    }

    fn extended(&self) -> (Vec<f64>, Vec<f64>) {
        let mut x = self.nodes.clone();
        let mut y = self.values.clone();
        if let Domain::Circle { period } = self.domain {
            // one knot before and after for periodic slopes
            let k = x.len();
            x.insert(0, self.nodes[k - 1] - period);
            y.insert(0, self.values[k - 1] - period);
            x.push(self.nodes[0] + period);
            y.push(self.values[0] + period);
        }
        (x, y)
    }

    fn rebuild_slopes(&mut self) {
        let (x, y) = self.extended();
        self.slopes = match self.interpolation {
            Interp::MonotoneCubic => fritsch_carlson(&x, &y),
            Interp::Linear => Vec::new(),
        };
    }

    /// Segment lookup on the extended knots: `(x, y, slopes, index, x_reduced, lift)`.
    fn locate(&self, x: f64) -> (Vec<f64>, Vec<f64>, usize, f64, f64) {
        let (xs, ys) = self.extended();
        let (xr, lift) = match self.domain {
            Domain::Circle { period } => {
                let k = ((x - self.nodes[0]) / period).floor();
                (x - k * period, k * period)
            }
            Domain::Interval { a, b } => (x.clamp(a, b), 0.0),
        };
        let i = match xs.partition_point(|&v| v <= xr) {
            0 => 0,
            p => (p - 1).min(xs.len() - 2),
        };
        (xs, ys, i, xr, lift)
    }

    /// Lifted value `φ(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let (xs, ys, i, xr, lift) = self.locate(x);
        let h = xs[i + 1] - xs[i];
        let t = (xr - xs[i]) / h;
        let v = match self.interpolation {
            Interp::Linear => ys[i] + t * (ys[i + 1] - ys[i]),
            Interp::MonotoneCubic => {
                let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * ys[i]
                    + (t3 - 2.0 * t2 + t) * h * m0
                    + (-2.0 * t3 + 3.0 * t2) * ys[i + 1]
                    + (t3 - t2) * h * m1
            }
        };
        v + lift
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (xs, ys, i, xr, _) = self.locate(x);
        let h = xs[i + 1] - xs[i];
        let t = (xr - xs[i]) / h;
        match self.interpolation {
            Interp::Linear => (ys[i + 1] - ys[i]) / h,
            Interp::MonotoneCubic => {
                let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
                let t2 = t * t;
                ((6.0 * t2 - 6.0 * t) * ys[i] + (6.0 * t - 6.0 * t2) * ys[i + 1]) / h
                    + (3.0 * t2 - 4.0 * t + 1.0) * m0
                    + (3.0 * t2 - 2.0 * t) * m1
            }
        }
    }

    /// Value reduced to the fundamental domain.
    pub fn eval_mod(&self, x: f64) -> f64 {
        let v = self.eval(x);
        match self.domain {
            Domain::Circle { period } => v.rem_euclid(period),
            Domain::Interval { .. } => v,
        }
    }

    /// Lifted inverse, `φ(φ⁻¹(y)) = y`.
    pub fn inverse(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = match self.domain {
            Domain::Circle { period } => {
                let k = ((y - self.values[0]) / period).floor();
                let base = self.nodes[0] + k * period;
                (base - 1e-9 * period, base + period * (1.0 + 1e-9))
            }
            Domain::Interval { a, b } => (a, b),
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (flo, fhi) = ((self.eval(lo) - y).abs(), (self.eval(hi) - y).abs());
        if flo <= fhi {
            lo
        } else {
            hi
        }
    }

    /// `(node, value)` pairs for CSV export.
    pub fn table(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().copied().zip(self.values.iter().copied()).collect()
    }
}

/// Which norm `build_diffeo` targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproxMode {
    Lp,
    Fractional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproxStatus {
    Converged,
    Partial,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffeoResult {
    pub reparam: MonotoneReparam,
    pub lp_error: f64,
    /// Seminorm of `f∘φ − g` (circle only).
    pub fractional_error: Option<f64>,
    /// Best error after each depth; nonincreasing.
    pub history: Vec<f64>,
    pub depth: usize,
    pub status: ApproxStatus,
}

/// Options for [`build_diffeo`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffeoConfig {
    pub eps: f64,
    pub p: f64,
    pub mode: ApproxMode,
    /// Maximum refinement depth of the plateau construction.
    pub max_depth: usize,
    /// Samples used by the alignment and the fractional seminorm.
    pub samples: usize,
    /// Fourier modes of the smooth reparametrization.
    pub modes: usize,
    /// Fractional mode keeps `min_slope ≤ φ' ≤ 1/min_slope`.
    pub min_slope: f64,
}

impl Default for DiffeoConfig {
    fn default() -> Self {
        Self { eps: 1e-2, p: 5.0, mode: ApproxMode::Lp, max_depth: 40, samples: 256, modes: 12, min_slope: 1e-3 }
    }
}

/// Composite Simpson quadrature of `|f∘φ − g|^p` over the knot segments of `φ`.
pub fn lp_error(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, phi: &MonotoneReparam, p: f64) -> f64 {
    let mut knots = phi.nodes.clone();
    match phi.domain {
        Domain::Circle { period } => {
            if knots[0] > 0.0 {
                knots.insert(0, 0.0);
            }
            knots.push(period);
        }
        Domain::Interval { .. } => {}
    }
    let sub = 64;
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / sub as f64;
        if h <= 0.0 {
            continue;
        }
        let mut s = 0.0;
        for k in 0..=sub {
            let x = a + k as f64 * h;
            let c = if k == 0 || k == sub {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += c * (f(phi.eval(x)) - g(x)).abs().powf(p);
        }
        total += s * h / 3.0;
    }
    total.powf(1.0 / p)
}

fn check_range(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, domain: Domain) -> Result<(f64, f64)> {
    let xs = domain.samples(4096);
    let (mut fmin, mut fmax) = xs.iter().map(|&x| f(x)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    // golden-section polish around sampled extrema
    let h = domain.length() / 4096.0;
    for &x in &xs {
        let v = f(x);
        for sign in [1.0, -1.0] {
            if sign * v < sign * (if sign > 0.0 { fmax } else { fmin }) - 0.1 {
                continue;
            }
            let (mut a, mut b) = (x - h, x + h);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let c = b - r * (b - a);
                let d = a + r * (b - a);
                if sign * f(c) > sign * f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let m = f(0.5 * (a + b));
            if sign > 0.0 {
                fmax = fmax.max(m);
            } else {
                fmin = fmin.min(m);
            }
        }
    }
    let tol = 1e-12 * (1.0 + fmax.abs().max(fmin.abs()));
    for &x in &xs {
        let v = g(x);
        if v < fmin - tol || v > fmax + tol {
            return Err(Error::Precondition(format!(
                "range hypothesis violated: need min f ≤ g ≤ max f, but g({x:.4}) = {v:.6} lies outside [{fmin:.6}, {fmax:.6}]"
            )));
        }
    }
    Ok((fmin, fmax))
}

/// Preimages of `level` under `f` on one fundamental domain, refined by bisection.
fn preimages(f: &dyn Fn(f64) -> f64, level: f64, domain: Domain) -> Vec<f64> {
    let n = 2048;
    let xs = domain.samples(n);
    let mut out = Vec::new();
    let m = xs.len();
    let segs = match domain {
        Domain::Circle { .. } => m,
        Domain::Interval { .. } => m - 1,
    };
    let step = domain.length() / n as f64;
    for i in 0..segs {
        let (mut a, mut b) = (xs[i], xs[i] + step);
        let (mut fa, fb) = (f(a) - level, f(b) - level);
        if fa == 0.0 {
            out.push(a);
            continue;
        }
        if fa * fb < 0.0 {
            for _ in 0..80 {
                let c = 0.5 * (a + b);
                let fc = f(c) - level;
                if fa * fc <= 0.0 {
                    b = c;
                } else {
                    a = c;
                    fa = fc;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    if out.is_empty() {
        // tangential level (an extremum of f): take the closest sample
        let best = xs.iter().copied().min_by(|&a, &b| (f(a) - level).abs().total_cmp(&(f(b) - level).abs())).unwrap();
        out.push(best);
    }
    out
}

/// Plateau levels per cell and their lifted preimage positions.
fn plateau_targets(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, domain: Domain, cells: usize) -> Vec<f64> {
    let l = domain.length();
    let x0 = domain.start();
    let levels: Vec<f64> = (0..cells).map(|i| g(x0 + (i as f64 + 0.5) * l / cells as f64)).collect();
    let pre: Vec<Vec<f64>> = levels.iter().map(|&v| preimages(f, v, domain)).collect();
    let circle = matches!(domain, Domain::Circle { .. });
    // greedy forward choice from every candidate start; keep the shortest travel
    let mut best: Option<(f64, Vec<f64>)> = None;
    let starts: Vec<f64> = if circle { pre[0].clone() } else { vec![pre[0][0]] };
    for &b0 in &starts {
        let mut bs = vec![b0];
        let mut ok = true;
        for cand in pre.iter().skip(1) {
            let prev = *bs.last().unwrap();
            let next = cand
                .iter()
                .map(|&c| if circle { c + ((prev - c) / l).ceil().max(0.0) * l } else { c })
                .filter(|&c| c >= prev)
                .fold(f64::INFINITY, f64::min);
            if !next.is_finite() {
                ok = false;
                break;
            }
            bs.push(next);
        }
        let travel = bs.last().unwrap() - b0;
        if ok && (!circle || travel < l) && best.as_ref().is_none_or(|(t, _)| travel < *t) {
            best = Some((travel, bs));
        }
    }
    match best {
        Some((_, bs)) => bs,
        // no monotone choice: hold the first plateau
        None => vec![pre[0][0]; cells],
    }
}

/// Knots of the plateau/sweep map for a given partition and sweep fraction.
fn plateau_map(domain: Domain, bs: &[f64], sigma: f64, delta: f64) -> Result<MonotoneReparam> {
    let l = domain.length();
    let x0 = domain.start();
    let cells = bs.len();
    // merge consecutive cells sharing a plateau
    let mut groups: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &b) in bs.iter().enumerate() {
        match groups.last_mut() {
            Some(gr) if (b - gr.2).abs() < 2.0 * delta => gr.1 = i + 1,
            _ => groups.push((i, i + 1, b)),
        }
    }
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    let cell = l / cells as f64;
    match domain {
        Domain::Circle { .. } => {
            for &(s, e, b) in &groups {
                let a = x0 + s as f64 * cell;
                let span = (e - s) as f64 * cell;
                nodes.push(a);
                values.push(b - 0.5 * delta);
                nodes.push(a + (1.0 - sigma) * span);
                values.push(b + 0.5 * delta);
            }
        }
        Domain::Interval { a, b: end } => {
            let lead = 0.5 * sigma * cell;
            nodes.push(a);
            values.push(a);
            for (gi, &(s, e, b)) in groups.iter().enumerate() {
                let start = if gi == 0 { a + lead } else { x0 + s as f64 * cell };
                let span_end = x0 + e as f64 * cell;
                let stop = if gi + 1 == groups.len() { span_end - lead } else { span_end - sigma * (span_end - start) };
                let lo = (b - 0.5 * delta).max(a + 0.25 * delta.min(lead));
                let hi = (b + 0.5 * delta).min(end - 0.25 * delta.min(lead));
                nodes.push(start);
                values.push(lo);
                nodes.push(stop);
                values.push(hi.max(lo + 1e-15 * l));
            }
            nodes.push(end);
            values.push(end);
        }
    }
    // enforce strict monotonicity of values where plateaus touch
    for i in 1..values.len() {
        if values[i] <= values[i - 1] {
            values[i] = values[i - 1] + 1e-14 * l;
        }
    }
    let vals_ok = match domain {
        Domain::Circle { period } => *values.last().unwrap() < values[0] + period,
        Domain::Interval { .. } => true,
    };
    if !vals_ok {
        return Err(Error::Precondition("plateau sequence wraps more than once".into()));
    }
    MonotoneReparam::new(domain, nodes.clone(), values.clone(), Interp::MonotoneCubic)
        .or_else(|_| MonotoneReparam::new(domain, nodes, values, Interp::Linear))
}

/// Build `φ` with `‖f∘φ − g‖` below `cfg.eps` in the selected norm.
pub fn build_diffeo(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, domain: Domain, cfg: &DiffeoConfig) -> Result<DiffeoResult> {
    check_range(f, g, domain)?;
    if !(cfg.p >= 1.0) || !(cfg.eps > 0.0) {
        return Err(Error::Precondition("need p ≥ 1 and eps > 0".into()));
    }
    if cfg.mode == ApproxMode::Fractional {
        if !matches!(domain, Domain::Circle { .. }) {
            return Err(Error::Unsupported("fractional mode is implemented on the circle".into()));
        }
        check_kernel(cfg.p, 2)?;
        return fractional_diffeo(f, g, domain, cfg);
    }
    let id = MonotoneReparam::identity(domain, 16);
    let e_id = lp_error(f, g, &id, cfg.p);
    let mut best = (e_id, id);
    let mut history = vec![e_id];
    let mut depth = 0;
    let l = domain.length();
    while best.0 >= cfg.eps && depth < cfg.max_depth {
        depth += 1;
        let cells = 1usize << (depth + 1).min(10);
        let sigma = 0.5 * 0.25f64.powi(depth as i32 - 1);
        let delta = l * sigma / cells as f64;
        let bs = plateau_targets(f, g, domain, cells);
        if let Ok(phi) = plateau_map(domain, &bs, sigma, delta) {
            let e = lp_error(f, g, &phi, cfg.p);
            if e < best.0 {
                best = (e, phi);
            }
        }
        history.push(best.0);
    }
    let status = if best.0 < cfg.eps { ApproxStatus::Converged } else { ApproxStatus::Partial };
    let fractional_error = fractional_of(f, g, &best.1, cfg);
    Ok(DiffeoResult { reparam: best.1, lp_error: best.0, fractional_error, history, depth, status })
}

fn fractional_of(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, phi: &MonotoneReparam, cfg: &DiffeoConfig) -> Option<f64> {
    match phi.domain {
        Domain::Circle { period } if cfg.p > 4.0 => {
            let xs = phi.domain.samples(cfg.samples);
            let d: Vec<f64> = xs.iter().map(|&x| f(phi.eval(x)) - g(x)).collect();
            gagliardo_seminorm(&d, cfg.p, period).ok()
        }
        _ => None,
    }
}

/// Slope-limited monotone alignment of `g` against `f` on `n` circle samples:
/// returns the lifted sample index `j(i)` with steps in `{0, 1, 2}`.
pub fn align_circle(fs: &[f64], gs: &[f64], p: f64) -> Vec<usize> {
    let n = fs.len();
    let inf = f64::INFINITY;
    let mut best: (f64, Vec<usize>) = (inf, Vec::new());
    let cost = |i: usize, j: usize| (fs[j % n] - gs[i]).abs().powf(p);
    for s in 0..n {
        // dp over i = 0..n, j relative offset 0..=n (j = s + k)
        let w = n + 1;
        let mut dp = vec![inf; (n + 1) * w];
        let mut from = vec![0u8; (n + 1) * w];
        dp[0] = cost(0, s);
        for i in 0..n {
            for k in 0..w {
                let v = dp[i * w + k];
                if !v.is_finite() {
                    continue;
                }
                for step in 0..3usize {
                    let k2 = k + step;
                    if k2 >= w {
                        break;
                    }
                    // stay close to the diagonal so the closing condition stays reachable
                    if k2 + 2 * (n - i - 1) < n {
                        continue;
                    }
                    let c = v + if i + 1 < n { cost(i + 1, s + k2) } else { 0.0 };
                    let idx = (i + 1) * w + k2;
                    if c < dp[idx] {
                        dp[idx] = c;
                        from[idx] = step as u8;
                    }
                }
            }
        }
        let total = dp[n * w + n];
        if total < best.0 {
            let mut path = vec![0usize; n + 1];
            let mut k = n;
            for i in (1..=n).rev() {
                path[i] = s + k;
                k -= from[i * w + k] as usize;
            }
            path[0] = s + k;
            path.truncate(n);
            best = (total, path);
        }
    }
    best.1
}

/// Smooth circle reparametrization `x + a_0 + Σ (a_k cos kx' + b_k sin kx')`
/// with `x' = 2πx/L`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierReparam {
    pub period: f64,
    pub coef: Vec<f64>,
}

impl FourierReparam {
    pub fn modes(&self) -> usize {
        (self.coef.len() - 1) / 2
    }

    fn basis(&self, x: f64) -> Vec<f64> {
        let w = 2.0 * PI / self.period;
        let mut b = vec![1.0];
        for k in 1..=self.modes() {
            b.push((k as f64 * w * x).cos());
            b.push((k as f64 * w * x).sin());
        }
        b
    }

    pub fn eval(&self, x: f64) -> f64 {
        x + self.basis(x).iter().zip(&self.coef).map(|(b, c)| b * c).sum::<f64>()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        let mut d = 1.0;
        for k in 1..=self.modes() {
            let kw = k as f64 * w;
            d += -kw * self.coef[2 * k - 1] * (kw * x).sin() + kw * self.coef[2 * k] * (kw * x).cos();
        }
        d
    }

    pub fn min_derivative(&self, samples: usize) -> f64 {
        (0..samples).map(|i| self.derivative(i as f64 * self.period / samples as f64)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_derivative(&self, samples: usize) -> f64 {
        (0..samples).map(|i| self.derivative(i as f64 * self.period / samples as f64)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn slopes_within(&self, samples: usize, min_slope: f64) -> bool {
        self.min_derivative(samples) >= min_slope && self.max_derivative(samples) <= 1.0 / min_slope
    }

    /// Least-squares fit of lifted samples `y_i ≈ φ(x_i)`.
    pub fn fit(period: f64, xs: &[f64], ys: &[f64], modes: usize) -> Self {
        let proto = Self { period, coef: vec![0.0; 2 * modes + 1] };
        let a = nalgebra::DMatrix::from_fn(xs.len(), 2 * modes + 1, |i, j| proto.basis(xs[i])[j]);
        let b = nalgebra::DVector::from_iterator(xs.len(), xs.iter().zip(ys).map(|(x, y)| y - x));
        let sol = a.clone().svd(true, true).solve(&b, 1e-12).expect("svd");
        Self { period, coef: sol.iter().copied().collect() }
    }

    /// Monotone knot representation.
    pub fn to_reparam(&self, knots: usize) -> Result<MonotoneReparam> {
        let xs: Vec<f64> = (0..knots).map(|i| i as f64 * self.period / knots as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        MonotoneReparam::new(Domain::Circle { period: self.period }, xs, ys, Interp::MonotoneCubic)
    }
}

/// Damped Gauss–Newton on the Fourier coefficients of `φ` for
/// `Σ (f(φ(x_i)) − g(x_i))²`, keeping `min_slope ≤ φ' ≤ 1/min_slope`.
pub fn refine_fourier(
    f: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    init: FourierReparam,
    samples: usize,
    min_slope: f64,
    iterations: usize,
) -> FourierReparam {
    let l = init.period;
    let xs: Vec<f64> = (0..samples).map(|i| i as f64 * l / samples as f64).collect();
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let hstep = 1e-6 * l;
    let fd = |y: f64| (f(y + hstep) - f(y - hstep)) / (2.0 * hstep);
    let resid = |r: &FourierReparam| -> Vec<f64> { xs.iter().zip(&gs).map(|(&x, gv)| f(r.eval(x)) - gv).collect() };
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let mut cur = init;
    let mut res = resid(&cur);
    let mut mu = 1e-3;
    let m = cur.coef.len();
    for _ in 0..iterations {
        let jac = nalgebra::DMatrix::from_fn(samples, m, |i, j| fd(cur.eval(xs[i])) * cur.basis(xs[i])[j]);
        let r = nalgebra::DVector::from_vec(res.clone());
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let jtr = &jt * r;
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            let scale = jtj.diagonal().max().max(1e-12);
            for d in 0..m {
                a[(d, d)] += mu * scale;
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let trial = FourierReparam { period: l, coef: cur.coef.iter().zip(step.iter()).map(|(c, s)| c + s).collect() };
            if trial.slopes_within(4 * samples, min_slope) {
                let tr = resid(&trial);
                if sq(&tr) < sq(&res) {
                    cur = trial;
                    res = tr;
                    mu = (mu * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved || sq(&res) < 1e-28 {
            break;
        }
    }
    cur
}

fn fractional_diffeo(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, domain: Domain, cfg: &DiffeoConfig) -> Result<DiffeoResult> {
    let Domain::Circle { period } = domain else { unreachable!() };
    let n = cfg.samples;
    let xs = domain.samples(n);
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let path = align_circle(&fs, &gs, cfg.p);
    let h = period / n as f64;
    let ys: Vec<f64> = path.iter().map(|&j| j as f64 * h).collect();
    // fit with decreasing mode counts until the fit is a diffeomorphism
    let mut fit = None;
    for modes in (1..=cfg.modes).rev() {
        let c = FourierReparam::fit(period, &xs, &ys, modes);
        if c.slopes_within(4 * n, cfg.min_slope) {
            fit = Some(c);
            break;
        }
    }
    let init = fit.unwrap_or(FourierReparam { period, coef: vec![ys[0]] });
    let refined = refine_fourier(f, g, init, n, cfg.min_slope, 60);
    let reparam = refined.to_reparam(4 * n)?;
    let lp = lp_error(f, g, &reparam, cfg.p);
    let frac = fractional_of(f, g, &reparam, cfg);
    let err = frac.unwrap_or(f64::INFINITY);
    let status = if err < cfg.eps { ApproxStatus::Converged } else { ApproxStatus::Partial };
    Ok(DiffeoResult { reparam, lp_error: lp, fractional_error: frac, history: vec![err], depth: 0, status })
}

#[cfg(test)]
mod tests;
