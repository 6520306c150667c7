//! Seeded invariant and oracle checks shared by `verify` and the acceptance
//! target. Every detail string is deterministic for a fixed seed.

use std::f64::consts::PI;
use std::sync::OnceLock;

use curvkit::conformal_spectra::{
    collar_variation, eigenvalue_derivative, lambda1, sign_agreement, steklov_plain, weighted_pi_norm, Problem,
};
use curvkit::fixtures::{
    flat_slab, hneg_slab_discrete, random_metric, random_scalar, random_sym, rng, smooth_f, smooth_h, smooth_metric,
};
use curvkit::linearized_ops::{adjointness_residual, linearize, observed_orders};
use curvkit::prescriber::{gram_solve, newton_prescribe, GramSystem, NewtonConfig, Status};
use curvkit::rearrange::{build_diffeo, ApproxMode, ApproxStatus, DiffeoConfig, Domain};
use curvkit::surface2d::{
    build_mesh, gauss_bonnet_residual, sign_gate, solve_gauss_curvature, solve_geodesic_curvature, Location,
    MeshKind, SolverConfig, TriConformalSurface,
};
use curvkit::tensor_grid::{boundary_geometry, conformal_metric, scalar_curvature, GridShape};
use curvkit::warped::{cross_check_grid, find_negative_profile, total_scalar_curvature, WarpProfile};
use curvkit::{Error, GridMetric};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!("{} [{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

fn run(id: &str, name: &str, body: impl FnOnce() -> curvkit::Result<(bool, String)>) -> Check {
    let (passed, detail) = match body() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Check { id: id.into(), name: name.into(), passed, detail }
}

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

fn list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Discretely scalar-flat slab with `H ≡ −1` on an 8³ grid, built once.
pub fn hneg_fixture() -> GridMetric {
    static G: OnceLock<GridMetric> = OnceLock::new();
    G.get_or_init(|| hneg_slab_discrete(8, 8, 8, 1.0, 1.0).expect("hneg fixture")).clone()
}

fn on_boundary(s: &TriConformalSurface, h: impl Fn(&[f64; 3]) -> f64) -> Vec<f64> {
    (0..s.num_vertices()).map(|i| if s.boundary[i] { h(&s.positions[i]) } else { 0.0 }).collect()
}

pub fn gauss_bonnet(seed: u64, samples: usize, res: usize) -> Check {
    run("gauss-bonnet", "angle defects sum to 2πχ", || {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for kind in [MeshKind::Disk, MeshKind::Annulus, MeshKind::Pants] {
            let s = build_mesh(kind, res)?;
            for _ in 0..samples {
                let u: Vec<f64> = (0..s.num_vertices()).map(|_| r.gen_range(-0.3..0.3)).collect();
                worst = worst.max(gauss_bonnet_residual(&s.with_u(u)?)?);
                count += 1;
            }
        }
        Ok((worst <= 1e-9, format!("{count} factors, worst |Σ defects − 2πχ| = {}", sci(worst))))
    })
}

pub fn adjointness(cells: &[usize]) -> Check {
    run("adjointness", "(δR h, f) − (A*f, h) = (B*f, h) − (2δH h, f)", || {
        let mut res = Vec::new();
        for &c in cells {
            let shape = GridShape::unit(3, c, 1)?;
            res.push(adjointness_residual(&smooth_metric(&shape)?, &smooth_h(&shape), &smooth_f(&shape))?);
        }
        let orders = observed_orders(&res);
        let last = *res.last().unwrap_or(&f64::NAN);
        let ok = !orders.is_empty() && orders.iter().all(|&o| o >= 1.8) && last <= 1e-3;
        let r: Vec<String> = res.iter().map(|&v| sci(v)).collect();
        Ok((ok, format!("cells {cells:?}: residuals [{}], orders {}", r.join(", "), list(&orders))))
    })
}

/// Forward steps `1e−3 / 2^k` down to `1e−5`.
fn fd_steps() -> Vec<f64> {
    let mut t = 1e-3;
    let mut out = vec![t];
    while t > 1e-5 {
        t /= 2.0;
        out.push(t);
    }
    out
}

pub fn linearization_fd(seed: u64, count: usize, cells: usize) -> Check {
    run("linearization-fd", "δR and 2δH against forward quotients", || {
        let shape = GridShape::unit(3, cells, 1)?;
        let steps = fd_steps();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut finest = 0.0f64;
        for k in 0..count as u64 {
            let m = random_metric(&shape, &mut rng(seed.wrapping_mul(1000) + 2 * k), 0.2)?;
            let h = random_sym(&shape, &mut rng(seed.wrapping_mul(1000) + 2 * k + 1), 0.5);
            let lin = linearize(&m, &h)?;
            let r0 = scalar_curvature(&m)?;
            let h0 = boundary_geometry(&m)?.h;
            let mut prev: Option<(f64, f64)> = None;
            for &t in &steps {
                let mt = m.perturbed(&h, t)?;
                let rt = scalar_curvature(&mt)?;
                let ht = boundary_geometry(&mt)?.h;
                let er: Vec<f64> = (0..rt.len()).map(|q| (rt[q] - r0[q]) / t - lin.d_r[q]).collect();
                let eh: Vec<f64> = (0..ht.len()).map(|q| 2.0 * (ht[q] - h0[q]) / t - lin.d_h2[q]).collect();
                let cur = (norm2(&er) / norm2(&lin.d_r), norm2(&eh) / norm2(&lin.d_h2));
                if let Some(p) = prev {
                    for ratio in [p.0 / cur.0, p.1 / cur.1] {
                        lo = lo.min(ratio);
                        hi = hi.max(ratio);
                    }
                }
                prev = Some(cur);
                finest = finest.max(cur.0.max(cur.1));
            }
        }
        let ok = lo >= 1.8 && hi <= 2.2;
        Ok((
            ok,
            format!(
                "{count} pairs, t = 1e-3 … {}: error ratio per halving in [{lo:.3}, {hi:.3}], relative error at smallest t ≤ {}",
                sci(*steps.last().unwrap()),
                sci(finest)
            ),
        ))
    })
}

pub fn scaling_oracle(res: usize) -> Check {
    run("scaling-oracle", "constant geodesic curvature c gives u = −2 ln c", || {
        let s = build_mesh(MeshKind::Disk, res)?;
        let mut worst: f64 = 0.0;
        for c in [0.5, 1.0, 2.0] {
            let r = solve_geodesic_curvature(&s, &on_boundary(&s, |_| c), &SolverConfig::default())?;
            worst = worst.max(sup(r.surface.u.iter().map(|u| u + 2.0 * f64::ln(c))));
        }
        Ok((worst <= 1e-6, format!("disk res {res}, c ∈ {{0.5, 1, 2}}: max |u + 2 ln c| = {}", sci(worst))))
    })
}

pub fn hemisphere(resolutions: &[usize]) -> Check {
    run("hemisphere", "f ≡ 1 on the disk gives log(2/(1+r²))", || {
        let mut errs = Vec::new();
        for &res in resolutions {
            let s = build_mesh(MeshKind::Disk, res)?;
            let r = solve_gauss_curvature(&s, &vec![1.0; s.num_vertices()], &SolverConfig::default())?;
            // lengths scale by e^{u/2}, so u/2 is the continuum log-factor
            errs.push(sup((0..s.num_vertices()).map(|i| r.surface.u[i] / 2.0 - (2.0 / (1.0 + s.radius(i).powi(2))).ln())));
        }
        let last = *errs.last().unwrap_or(&f64::NAN);
        let ok = errs.windows(2).all(|w| w[1] < w[0]) && last <= 5e-3;
        let e: Vec<String> = errs.iter().map(|&v| sci(v)).collect();
        Ok((ok, format!("res {resolutions:?}: sup errors [{}]", e.join(", "))))
    })
}

pub fn sign_gate_cases() -> Check {
    run("sign-gate", "admissibility by the sign of χ", || {
        let mut bad = Vec::new();
        let mut count = 0;
        for kind in [MeshKind::Disk, MeshKind::Annulus, MeshKind::Pants] {
            let s = build_mesh(kind, 4)?;
            let chi = s.euler_characteristic();
            let pats: [(&str, fn(f64) -> f64); 4] = [
                ("positive", |_| 1.0),
                ("negative", |_| -1.0),
                ("sign-changing", |t| t.sin()),
                ("zero", |_| 0.0),
            ];
            let bverts: Vec<usize> = (0..s.num_vertices()).filter(|&v| s.boundary[v]).collect();
            let c = bverts.iter().fold([0.0, 0.0], |a, &v| [a[0] + s.positions[v][0], a[1] + s.positions[v][1]]);
            let c = [c[0] / bverts.len() as f64, c[1] / bverts.len() as f64];
            for (name, pat) in pats {
                let field: Vec<f64> = bverts
                    .iter()
                    .map(|&v| pat((s.positions[v][1] - c[1]).atan2(s.positions[v][0] - c[0]) + 0.1))
                    .collect();
                let expect = match chi.signum() {
                    1 => name == "positive" || name == "sign-changing",
                    -1 => name == "negative" || name == "sign-changing",
                    _ => name == "sign-changing" || name == "zero",
                };
                let got = sign_gate(chi, &field, Location::Boundary).admissible;
                count += 1;
                if got != expect {
                    bad.push(format!("χ={chi} {name}: got {got}"));
                }
            }
        }
        // the solver itself refuses an inadmissible target
        let disk = build_mesh(MeshKind::Disk, 4)?;
        let refused = matches!(
            solve_geodesic_curvature(&disk, &on_boundary(&disk, |_| -1.0), &SolverConfig::default()),
            Err(Error::GateViolation(_))
        );
        if !refused {
            bad.push("disk solver accepted κ ≡ −1".into());
        }
        let ok = bad.is_empty();
        let detail = if ok {
            format!("{count} cases classified as prescribed, κ ≡ 0 accepted at χ = 0 only; solver refuses κ ≡ −1 on the disk")
        } else {
            bad.join("; ")
        };
        Ok((ok, detail))
    })
}

pub fn kernel_detection() -> Check {
    run("kernel-detection", "flat slab static kernel, H ≡ −1 slab Newton", || {
        let flat = flat_slab(3, 8)?;
        let shape = &flat.shape;
        let flat_kernel = matches!(
            gram_solve(&flat, &vec![1.0; shape.num_nodes()], &vec![0.0; shape.num_boundary_nodes()], &NewtonConfig::default()),
            Err(Error::KernelDetected { .. })
        );
        let g = hneg_fixture();
        let rep = GramSystem::new(&g)?.kernel_report(NewtonConfig::default().kernel_guard);
        let shape = g.shape.clone();
        let target_h: Vec<f64> =
            shape.boundary_nodes().iter().map(|&(q, _)| -1.0 + 0.01 * (2.0 * PI * shape.coords(q)[0]).sin()).collect();
        let res = newton_prescribe(&g, &vec![0.0; shape.num_nodes()], &target_h, &NewtonConfig::default())?;
        let hist = &res.residual_history;
        let k = hist.len();
        let quadratic = k >= 3 && hist[k - 3..].windows(2).all(|w| w[1] <= (100.0 * w[0] * w[0]).max(1e-11));
        let fin = res.final_residual();
        let ok = flat_kernel && !rep.kernel && res.status == Status::Converged && fin <= 1e-8 && quadratic;
        let h: Vec<String> = hist.iter().map(|&v| sci(v)).collect();
        Ok((
            ok,
            format!(
                "flat kernel detected: {flat_kernel}; H ≡ −1 σ_rel = {}, kernel: {}; Newton {:?} in {} steps, residuals [{}]",
                sci(rep.sigma_rel),
                rep.kernel,
                res.status,
                res.iterations,
                h.join(", ")
            ),
        ))
    })
}

/// Random conformal metrics alternating between flat and `H ≡ −1` bases.
pub fn random_conformal(seed: u64, amp: f64) -> curvkit::Result<GridMetric> {
    let base = if seed % 2 == 0 { flat_slab(3, 8)? } else { hneg_fixture() };
    let f = random_scalar(&base.shape, &mut rng(seed), amp);
    conformal_metric(&base, &f)
}

pub fn eigen_sign_agreement(seed: u64, count: usize) -> Check {
    run("sign-agreement", "λ₁(𝓛) and λ₁(𝓑) share the sign class", || {
        let mut worst: f64 = 0.0;
        let mut bad = Vec::new();
        let mut classes = [0usize; 3];
        for k in 0..count as u64 {
            let g = random_conformal(seed.wrapping_mul(100) + k, 0.3)?;
            let (agree, li, lb) = sign_agreement(&g)?;
            worst = worst.max(li.residual).max(lb.residual);
            classes[li.sign_class as usize] += 1;
            if !agree {
                bad.push(format!("metric {k}: {} vs {}", sci(li.lambda1), sci(lb.lambda1)));
            }
        }
        let ok = bad.is_empty() && worst <= 1e-10;
        let mut detail = format!(
            "{count} metrics (positive/negative/zero = {}/{}/{}), worst eigen-residual {}",
            classes[0],
            classes[1],
            classes[2],
            sci(worst)
        );
        if !bad.is_empty() {
            detail.push_str(&format!("; disagreements: {}", bad.join(", ")));
        }
        Ok((ok, detail))
    })
}

pub fn steklov_oracle(res: usize) -> Check {
    run("steklov", "first plain Steklov eigenvalue on the disk is 1", || {
        let r = steklov_plain(&build_mesh(MeshKind::Disk, res)?)?;
        let err = (r.sigma1 - 1.0).abs();
        Ok((r.converged && err <= 1e-3, format!("disk res {res}: σ₁ = {:.9}, |σ₁ − 1| = {}", r.sigma1, sci(err))))
    })
}

pub fn derivative_fd(seed: u64, count: usize) -> Check {
    run("derivative-fd", "eigenvalue derivative against central differences", || {
        let base = hneg_fixture();
        let mut worst: f64 = 0.0;
        for k in 0..count as u64 {
            let h = random_sym(&base.shape, &mut rng(seed.wrapping_mul(100) + 50 + k), 0.2);
            for p in [Problem::Interior, Problem::Boundary] {
                let d = eigenvalue_derivative(&base, &h, p)?;
                let t = 1e-4;
                let lp = lambda1(&base.perturbed(&h, t)?, p)?.lambda1;
                let lm = lambda1(&base.perturbed(&h, -t)?, p)?.lambda1;
                let fd = (lp - lm) / (2.0 * t);
                worst = worst.max((d.value - fd).abs() / fd.abs().max(1e-3));
            }
        }
        Ok((worst <= 1e-3, format!("{count} variations × 2 problems: worst relative gap {}", sci(worst))))
    })
}

pub fn derivative_flat(seed: u64) -> Check {
    run("derivative-flat", "eigenvalue derivative vanishes on the flat slab", || {
        let g = flat_slab(3, 8)?;
        let h = random_sym(&g.shape, &mut rng(seed), 0.3);
        let mut worst: f64 = 0.0;
        for p in [Problem::Interior, Problem::Boundary] {
            worst = worst.max(eigenvalue_derivative(&g, &h, p)?.value.abs());
        }
        Ok((worst <= 1e-10, format!("max |dλ₁| = {}", sci(worst))))
    })
}

/// Collar width used by the `h = −Π` variation.
pub const COLLAR_WIDTH: f64 = 0.25;

pub fn derivative_collar() -> Check {
    run("derivative-collar", "h = −Π collar variation gives ∮ψ²|Π|²", || {
        let g = hneg_fixture();
        let h = collar_variation(&g, COLLAR_WIDTH)?;
        let d = eigenvalue_derivative(&g, &h, Problem::Boundary)?;
        let pi2 = weighted_pi_norm(&g)?;
        let rel = (d.value - pi2).abs() / pi2;
        Ok((
            d.value >= 0.0 && rel <= 1e-3,
            format!("H ≡ −1 slab, collar {COLLAR_WIDTH}: dλ₁ = {:.6}, ∮ψ²|Π|² = {:.6}, relative gap {}", d.value, pi2, sci(rel)),
        ))
    })
}

fn sine_to_zero(mode: ApproxMode) -> curvkit::Result<curvkit::rearrange::DiffeoResult> {
    let cfg = DiffeoConfig { p: 5.0, eps: if mode == ApproxMode::Lp { 1e-2 } else { 5e-2 }, mode, ..Default::default() };
    build_diffeo(&|x: f64| x.sin(), &|_| 0.0, Domain::circle(), &cfg)
}

pub fn approximation_lp() -> Check {
    run("approx-lp", "sin θ rearranged towards 0 in L^5", || {
        let r = sine_to_zero(ApproxMode::Lp)?;
        Ok((
            r.lp_error < 1e-2 && r.status == ApproxStatus::Converged,
            format!("L^5 error {} at depth {}", sci(r.lp_error), r.depth),
        ))
    })
}

pub fn approximation_fractional() -> Check {
    run("approx-fractional", "sin θ rearranged towards 0 in W^{1/2,5}", || {
        let r = sine_to_zero(ApproxMode::Fractional)?;
        let fe = r.fractional_error.unwrap_or(f64::INFINITY);
        Ok((fe < 5e-2, format!("Gagliardo error {}, L^5 error {}, status {:?}", sci(fe), sci(r.lp_error), r.status)))
    })
}

pub fn approximation_range() -> Check {
    run("approx-range", "targets outside [min f, max f] are rejected", || {
        let cfg = DiffeoConfig::default();
        let out = build_diffeo(&|x: f64| x.sin(), &|x: f64| 2.0 + x.sin(), Domain::circle(), &cfg);
        let edge = build_diffeo(&|x: f64| x.sin(), &|_| -1.5, Domain::circle(), &cfg);
        let ok = matches!(out, Err(Error::Precondition(_))) && matches!(edge, Err(Error::Precondition(_)));
        Ok((ok, format!("g = 2 + sin θ rejected: {}, g ≡ −1.5 rejected: {}", out.is_err(), edge.is_err())))
    })
}

const EIGHT_PI2: f64 = 8.0 * PI * PI;

pub fn warped_formula() -> Check {
    run("warp-formula", "f ≡ 1 on D² × S² totals 8π²", || {
        let t = total_scalar_curvature(&WarpProfile::constant(2, 2)?, 2000)?;
        let rel = (t - EIGHT_PI2).abs() / EIGHT_PI2;
        Ok((rel <= 1e-3, format!("total {t:.9} vs 8π² = {EIGHT_PI2:.9}, relative {}", sci(rel))))
    })
}

pub fn warped_grid(lambda: f64, grid_res: usize) -> Check {
    run("warp-grid", "grid curvature path agrees with the radial formula", || {
        let w = if lambda == 1.0 { WarpProfile::constant(2, 2)? } else { WarpProfile::bump(2, 2, lambda)? };
        let c = cross_check_grid(&w, grid_res)?;
        let mut ok = c.relative_error <= 2e-2;
        let mut detail =
            format!("λ = {lambda}, grid {grid_res}: formula {:.6}, grid {:.6}, relative {}", c.formula, c.grid, sci(c.relative_error));
        if lambda == 1.0 {
            let rel = (c.grid - EIGHT_PI2).abs() / EIGHT_PI2;
            ok &= rel <= 2e-2;
            detail.push_str(&format!(", grid vs 8π² {}", sci(rel)));
        }
        Ok((ok, detail))
    })
}

pub fn warped_negative(target: f64) -> Check {
    run("warp-negative", "bump profile drives the total below the target", || {
        let r = find_negative_profile(2, 2, target)?;
        Ok((r.total <= target, format!("λ = {:.6}, total {:.6} ≤ {target}", r.lambda, r.total)))
    })
}

pub fn warped_monotone(samples: usize) -> Check {
    run("warp-monotone", "total decreases with the bump amplitude", || {
        let lambdas: Vec<f64> = (0..samples).map(|k| 1.0 + 0.5 * k as f64).collect();
        let totals = lambdas
            .iter()
            .map(|&l| total_scalar_curvature(&WarpProfile::bump(2, 2, l)?, 2000))
            .collect::<curvkit::Result<Vec<f64>>>()?;
        let ok = totals.windows(2).all(|w| w[1] < w[0]);
        Ok((ok, format!("λ = 1 … {}: totals {}", lambdas[samples - 1], list(&totals))))
    })
}

/// The invariant run behind `verify`: every module's attainable checks at
/// reduced sizes, seeded by `seed`.
pub fn invariant_suite(seed: u64) -> Vec<Check> {
    vec![
        gauss_bonnet(seed, 20, 6),
        adjointness(&[8, 16]),
        linearization_fd(seed, 2, 8),
        scaling_oracle(8),
        hemisphere(&[6, 12]),
        sign_gate_cases(),
        kernel_detection(),
        eigen_sign_agreement(seed, 4),
        steklov_oracle(12),
        derivative_fd(seed, 2),
        derivative_flat(seed),
        approximation_lp(),
        approximation_range(),
        warped_formula(),
        warped_grid(1.0, 32),
        warped_negative(-10.0),
        warped_monotone(10),
    ]
}
