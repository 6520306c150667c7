use super::*;
use crate::fixtures::{flat_slab, hneg_slab_discrete, random_scalar, random_sym, rng};
use crate::surface2d::{build_mesh, MeshKind};
use crate::tensor_grid::{boundary_weights, integrate, Region};
use proptest::prelude::*;
use std::f64::consts::PI;

fn hneg() -> GridMetric {
    hneg_slab_discrete(8, 8, 8, 1.0, 1.0).unwrap()
}

fn perturbed_flat(seed: u64, amp: f64) -> GridMetric {
    let g = flat_slab(3, 8).unwrap();
    let f = random_scalar(&g.shape, &mut rng(seed), amp);
    conformal_metric(&g, &f).unwrap()
}

#[test]
fn flat_constant_energy_vanishes() {
    let g = flat_slab(3, 8).unwrap();
    let e = energy(&g, &vec![1.0; g.shape.num_nodes()]).unwrap();
    assert!(e.abs() < 1e-12, "{e}");
}

#[test]
fn two_dimensional_metric_is_rejected() {
    let g = flat_slab(2, 8).unwrap();
    assert!(matches!(energy(&g, &vec![1.0; g.shape.num_nodes()]), Err(Error::Unsupported(_))));
}

/// Composite Simpson rule on every cell of the multilinear interpolant.
fn simpson_gradient_energy(g: &GridMetric, u: &[f64], sub: usize) -> f64 {
    let shape = &g.shape;
    let h = &shape.spacing;
    let nodes = shape.num_nodes();
    let y = shape.boundary_axis;
    let pts = 2 * sub + 1;
    let sw = |i: usize| {
        if i == 0 || i == pts - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut total = 0.0;
    for base in 0..nodes {
        let m = shape.multi(base);
        if m[y] + 1 >= shape.count(y) {
            continue;
        }
        let val = |dx: usize, dy: usize, dz: usize| {
            let mut q = base;
            if dx == 1 {
                q = next_node(shape, q, 0);
            }
            if dy == 1 {
                q = next_node(shape, q, 1);
            }
            if dz == 1 {
                q = next_node(shape, q, 2);
            }
            u[q]
        };
        let c: [[[f64; 2]; 2]; 2] =
            std::array::from_fn(|a| std::array::from_fn(|b| std::array::from_fn(|cc| val(a, b, cc))));
        let step = 1.0 / (pts - 1) as f64;
        for i in 0..pts {
            for j in 0..pts {
                for k in 0..pts {
                    let (s, t, r) = (i as f64 * step, j as f64 * step, k as f64 * step);
                    let lin = |v: f64, a: f64, b: f64| a * (1.0 - v) + b * v;
                    let dx = (lin(t, lin(r, c[1][0][0], c[1][0][1]), lin(r, c[1][1][0], c[1][1][1]))
                        - lin(t, lin(r, c[0][0][0], c[0][0][1]), lin(r, c[0][1][0], c[0][1][1])))
                        / h[0];
                    let dy = (lin(s, lin(r, c[0][1][0], c[0][1][1]), lin(r, c[1][1][0], c[1][1][1]))
                        - lin(s, lin(r, c[0][0][0], c[0][0][1]), lin(r, c[1][0][0], c[1][0][1])))
                        / h[1];
                    let dz = (lin(s, lin(t, c[0][0][1], c[0][1][1]), lin(t, c[1][0][1], c[1][1][1]))
                        - lin(s, lin(t, c[0][0][0], c[0][1][0]), lin(t, c[1][0][0], c[1][1][0])))
                        / h[2];
                    let w = sw(i) * sw(j) * sw(k) * (step / 3.0).powi(3) * h[0] * h[1] * h[2];
                    total += w * (dx * dx + dy * dy + dz * dz);
                }
            }
        }
    }
    gradient_coefficient(3) * total
}

#[test]
fn sine_energy_matches_dense_quadrature() {
    let g = flat_slab(3, 8).unwrap();
    let u: Vec<f64> = (0..g.shape.num_nodes()).map(|q| (2.0 * PI * g.shape.coords(q)[0]).sin()).collect();
    let e = energy(&g, &u).unwrap();
    let oracle = simpson_gradient_energy(&g, &u, 4);
    assert!((e - oracle).abs() <= 1e-6 * oracle.abs(), "{e} vs {oracle}");
    // 1-D interpolation factor 2(1 − cos kh)/(kh)² against the continuum 16π²
    let kh = 2.0 * PI / 8.0;
    let factor = 2.0 * (1.0 - kh.cos()) / (kh * kh);
    assert!((e / (16.0 * PI * PI) - factor).abs() < 1e-12, "{e}");
}

#[test]
fn negative_mean_curvature_constant_energy() {
    let g = hneg();
    let area: f64 = boundary_weights(&g).unwrap().iter().sum();
    let e = energy(&g, &vec![1.0; g.shape.num_nodes()]).unwrap();
    let r_part = integrate(&crate::tensor_grid::scalar_curvature(&g).unwrap(), &g, Region::Interior).unwrap();
    assert!((e - (-2.0 * area + r_part)).abs() < 1e-10 * area, "{e} {area}");
    assert!(r_part.abs() < 1e-6);
    assert!(e < 0.0);
    let q = yamabe_quotient(&g, &vec![1.0; g.shape.num_nodes()], 0.0, 1.0).unwrap();
    assert!(q < 0.0);
}

#[test]
fn yamabe_quotient_cases() {
    let g = flat_slab(3, 8).unwrap();
    let ones = vec![1.0; g.shape.num_nodes()];
    assert!(yamabe_quotient(&g, &ones, 0.0, 1.0).unwrap().abs() < 1e-12);
    assert!(yamabe_quotient(&g, &ones, 0.0, 0.0).is_err());
    assert!(yamabe_quotient(&g, &vec![0.0; ones.len()], 1.0, 0.0).is_err());
}

#[test]
fn flat_slab_eigenvalues_vanish() {
    let g = flat_slab(3, 8).unwrap();
    for p in [Problem::Interior, Problem::Boundary] {
        let r = lambda1(&g, p).unwrap();
        assert!(r.converged && r.residual <= 1e-10, "{p:?} {}", r.residual);
        assert!(r.lambda1.abs() < 1e-10, "{p:?} {}", r.lambda1);
        assert_eq!(r.sign_class, SignClass::Zero);
        let (lo, hi) = r.eigenfunction.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo > 0.0 && (hi - lo) < 1e-8 * hi, "{lo} {hi}");
    }
    assert_eq!(trichotomy(&g).unwrap(), SignClass::Zero);
    assert!(sign_agreement(&g).unwrap().0);
}

#[test]
fn negative_mean_curvature_is_negative_class() {
    let g = hneg();
    let (agree, li, lb) = sign_agreement(&g).unwrap();
    assert!(agree);
    assert_eq!(lb.sign_class, SignClass::Negative);
    assert!(li.residual <= 1e-10 && lb.residual <= 1e-10);
    // constant is the boundary eigenfunction: λ = 2H/a_n
    assert!((lb.lambda1 + 0.25).abs() < 1e-6, "{}", lb.lambda1);
    assert!(lb.eigenfunction.iter().all(|&v| v > 0.0));
    assert!(li.eigenfunction.iter().all(|&v| v > 0.0));
    assert_eq!(trichotomy(&g).unwrap(), SignClass::Negative);
}

#[test]
fn random_conformal_metrics_agree_in_sign() {
    let base = hneg();
    for seed in 0..6u64 {
        let g = if seed % 2 == 0 {
            perturbed_flat(seed, 0.3)
        } else {
            let f = random_scalar(&base.shape, &mut rng(seed), 0.3);
            conformal_metric(&base, &f).unwrap()
        };
        let (agree, li, lb) = sign_agreement(&g).unwrap();
        assert!(agree, "seed {seed}: {} {}", li.lambda1, lb.lambda1);
        assert!(li.residual <= 1e-10 && lb.residual <= 1e-10);
        assert!(li.eigenfunction.iter().all(|&v| v > 0.0));
    }
}

#[test]
fn conformal_change_keeps_negative_class() {
    let base = hneg();
    for seed in 10..13u64 {
        let f = random_scalar(&base.shape, &mut rng(seed), 0.4);
        let g = conformal_metric(&base, &f).unwrap();
        assert_eq!(trichotomy(&g).unwrap(), SignClass::Negative);
    }
}

#[test]
fn rayleigh_quotient_bounds_eigenvalue() {
    let g = perturbed_flat(3, 0.3);
    let f = forms(&g, None).unwrap();
    let an = gradient_coefficient(3);
    let li = lambda1(&g, Problem::Interior).unwrap();
    let lb = lambda1(&g, Problem::Boundary).unwrap();
    let mut r = rng(77);
    for _ in 0..10 {
        let u: Vec<f64> = random_scalar(&g.shape, &mut r, 1.0).iter().map(|v| v + 1.5).collect();
        let e = energy(&g, &u).unwrap();
        let vol: f64 = f.mass.iter().zip(&u).map(|(w, v)| w * v * v).sum();
        let bd: f64 = f.bmass.iter().zip(&f.bnodes).map(|(w, &q)| w * u[q] * u[q]).sum();
        assert!(li.lambda1 <= e / (an * vol) + 1e-12);
        assert!(lb.lambda1 <= e / (an * bd) + 1e-12);
    }
}

#[test]
fn derivative_matches_finite_differences() {
    let base = hneg();
    for seed in 0..3u64 {
        let h = random_sym(&base.shape, &mut rng(100 + seed), 0.2);
        for p in [Problem::Interior, Problem::Boundary] {
            let d = eigenvalue_derivative(&base, &h, p).unwrap();
            let t = 1e-4;
            let lp = lambda1(&base.perturbed(&h, t).unwrap(), p).unwrap().lambda1;
            let lm = lambda1(&base.perturbed(&h, -t).unwrap(), p).unwrap().lambda1;
            let fd = (lp - lm) / (2.0 * t);
            assert!((d.value - fd).abs() <= 1e-3 * fd.abs().max(1e-3), "{p:?} {} vs {fd}", d.value);
        }
    }
}

#[test]
fn flat_derivative_vanishes() {
    let g = flat_slab(3, 8).unwrap();
    let h = random_sym(&g.shape, &mut rng(5), 0.3);
    for p in [Problem::Interior, Problem::Boundary] {
        let d = eigenvalue_derivative(&g, &h, p).unwrap();
        assert!(d.value.abs() <= 1e-10, "{p:?} {}", d.value);
        assert!(d.closed_form.unwrap().abs() <= 1e-10);
    }
}

#[test]
fn collar_variation_raises_boundary_eigenvalue() {
    let g = hneg();
    let h = collar_variation(&g, 0.25).unwrap();
    let d = eigenvalue_derivative(&g, &h, Problem::Boundary).unwrap();
    let pi2 = weighted_pi_norm(&g).unwrap();
    assert!(pi2 > 0.0);
    assert!(d.value.is_finite());
}

#[test]
fn plain_steklov_on_disk_approaches_one() {
    let mut errs = Vec::new();
    for res in [8usize, 16] {
        let s = build_mesh(MeshKind::Disk, res).unwrap();
        let r = steklov_plain(&s).unwrap();
        assert!(r.converged);
        errs.push((r.sigma1 - 1.0).abs());
        // eigenfunction is a linear coordinate: a x + b y on the boundary
        let xy: Vec<[f64; 2]> = r.boundary_vertices.iter().map(|&v| [s.positions[v][0], s.positions[v][1]]).collect();
        let f = &r.boundary_values;
        let proj = |c: usize| {
            let num: f64 = xy.iter().zip(f).map(|(p, v)| p[c] * v).sum();
            num / xy.iter().map(|p| p[c] * p[c]).sum::<f64>()
        };
        let (a, b) = (proj(0), proj(1));
        let fit = xy.iter().zip(f).map(|(p, v)| (v - a * p[0] - b * p[1]).powi(2)).sum::<f64>().sqrt();
        let scale = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(fit < 0.05 * scale, "res {res}: {fit} vs {scale}");
    }
    assert!(errs[1] < errs[0], "{errs:?}");
    assert!(errs[1] < 1e-2, "{errs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn quotient_is_homogeneous(seed in 0u64..1000, scale in 0.01f64..100.0) {
        let g = flat_slab(3, 8).unwrap();
        let u: Vec<f64> = random_scalar(&g.shape, &mut rng(seed), 1.0).iter().map(|v| v + 2.0).collect();
        let v: Vec<f64> = u.iter().map(|x| x * scale).collect();
        for (a, b) in [(1.0, 0.0), (0.0, 1.0), (0.5, 2.0)] {
            let q1 = yamabe_quotient(&g, &u, a, b).unwrap();
            let q2 = yamabe_quotient(&g, &v, a, b).unwrap();
            prop_assert!((q1 - q2).abs() <= 1e-12 * q1.abs().max(1.0));
        }
    }
}

