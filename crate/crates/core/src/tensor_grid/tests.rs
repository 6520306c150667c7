use super::*;
use crate::fixtures::{random_metric, random_scalar, rng};
use std::f64::consts::PI;

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn diag(d: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
    let mut m = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, v) in d.iter().enumerate() {
        m[i][i] = *v;
    }
    m
}

/// `dy² + sin²y dx²` on `y ∈ [0.5, π − 0.5]`, x periodic with period 1.
fn warped_band(cells: usize) -> GridMetric {
    let a = 0.5;
    let shape = GridShape::new(2, vec![cells, cells], vec![1.0 / cells as f64, (PI - 2.0 * a) / cells as f64], 1)
        .unwrap()
        .with_origin(vec![0.0, a])
        .unwrap();
    GridMetric::from_fn(shape, |x| diag(&[x[1].sin().powi(2), 1.0])).unwrap()
}

#[test]
fn euclidean_christoffel_vanishes() {
    let m = GridMetric::flat(GridShape::unit(3, 8, 1).unwrap()).unwrap();
    let gam = christoffel(&m).unwrap();
    assert_eq!(max_abs(gam.iter().flat_map(|g| g.iter().flatten().flatten().copied())), 0.0);
}

#[test]
fn conformal_christoffel_closed_form() {
    let alpha = 0.7;
    let check = |cells: usize| {
        let shape = GridShape::unit(3, cells, 1).unwrap();
        let m = GridMetric::from_fn(shape.clone(), |x| {
            let e = (2.0 * alpha * x[1]).exp();
            diag(&[e, e, e])
        })
        .unwrap();
        let gam = christoffel(&m).unwrap();
        let df = [0.0, alpha, 0.0];
        let mut err: f64 = 0.0;
        for g in &gam {
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let d = |a: usize, b: usize| f64::from(u8::from(a == b));
                        let exact = d(k, i) * df[j] + d(k, j) * df[i] - d(i, j) * df[k];
                        err = err.max((g[k][i][j] - exact).abs());
                    }
                }
            }
        }
        err
    };
    let (e1, e2) = (check(8), check(16));
    assert!(e2 < 2e-3, "{e2}");
    assert!((e1 / e2).log2() > 1.8);
}

#[test]
fn christoffel_lower_symmetry_is_exact() {
    let shape = GridShape::unit(3, 8, 1).unwrap();
    let m = random_metric(&shape, &mut rng(11), 0.2).unwrap();
    for g in christoffel(&m).unwrap() {
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(g[k][i][j], g[k][j][i]);
                }
            }
        }
    }
}

#[test]
fn flat_metric_has_zero_curvature() {
    let m = GridMetric::flat(GridShape::unit(3, 8, 1).unwrap()).unwrap();
    let (ric, r) = curvature(&m).unwrap();
    assert_eq!(max_abs(ric.data), 0.0);
    assert_eq!(max_abs(r), 0.0);
}

#[test]
fn warped_band_has_r_two_with_second_order() {
    let err = |cells| max_abs(scalar_curvature(&warped_band(cells)).unwrap().into_iter().map(|r| r - 2.0));
    let (e1, e2, e3) = (err(16), err(32), err(64));
    assert!(e3 < 3e-2, "{e3}");
    assert!((e1 / e2).log2() >= 1.8, "{e1} {e2}");
    assert!((e2 / e3).log2() >= 1.8, "{e2} {e3}");
}

#[test]
fn warped_band_mean_curvature_is_cot() {
    let a: f64 = 0.5;
    let err = |cells| {
        let m = warped_band(cells);
        let bg = boundary_geometry(&m).unwrap();
        let mut e: f64 = 0.0;
        for (k, (_, face)) in m.shape.boundary_nodes().into_iter().enumerate() {
            // lower face at y = a has outward normal −∂y, so H = −cot a; upper: cot(π − a)
            let expect = match face {
                Face::Lower => -a.cos() / a.sin(),
                Face::Upper => (PI - a).cos() / (PI - a).sin(),
            };
            e = e.max((bg.h[k] - expect).abs());
        }
        e
    };
    let (e1, e2) = (err(32), err(64));
    assert!(e2 < 3e-3, "{e2}");
    assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
}

#[test]
fn definitional_identities() {
    let shape = GridShape::unit(3, 8, 1).unwrap();
    let m = random_metric(&shape, &mut rng(3), 0.2).unwrap();
    let (ric, r) = curvature(&m).unwrap();
    for q in 0..shape.num_nodes() {
        let ginv = inverse_dyn(3, &m.g.matrix(q)).unwrap();
        let tr: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| ginv[i][j] * ric.get(q, i, j)).sum();
        assert!((tr - r[q]).abs() < 1e-12 * (1.0 + r[q].abs()));
    }
    let bg = boundary_geometry(&m).unwrap();
    for (k, &(q, _)) in shape.boundary_nodes().iter().enumerate() {
        let nu = &bg.nu[k];
        let gnn: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m.g.get(q, i, j) * nu[i] * nu[j]).sum();
        assert!((gnn - 1.0).abs() < 1e-10);
        let tr: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| bg.gamma_inv.get(k, i, j) * bg.pi.get(k, i, j))
            .sum();
        assert!((tr - bg.h[k]).abs() < 1e-12);
    }
}

#[test]
fn flat_slab_boundary_is_totally_geodesic() {
    let m = GridMetric::flat(GridShape::unit(3, 8, 1).unwrap()).unwrap();
    let bg = boundary_geometry(&m).unwrap();
    assert_eq!(max_abs(bg.pi.data), 0.0);
    assert_eq!(max_abs(bg.h), 0.0);
    // outward normals point down on the lower face and up on the upper face
    for (k, (_, face)) in m.shape.boundary_nodes().into_iter().enumerate() {
        assert_eq!(bg.nu[k][1], face.sign());
    }
}

#[test]
fn scaled_strip_stays_geodesic() {
    let c: f64 = 1.7;
    let shape = GridShape::unit(2, 8, 1).unwrap();
    let m = GridMetric::from_fn(shape, |_| diag(&[c.powi(-2), c.powi(-2)])).unwrap();
    assert!(max_abs(boundary_geometry(&m).unwrap().h) < 1e-12);
}

#[test]
fn integrate_unit_cube_and_face() {
    let m = GridMetric::flat(GridShape::unit(3, 8, 1).unwrap()).unwrap();
    let ones = vec![1.0; m.shape.num_nodes()];
    assert!((integrate(&ones, &m, Region::Interior).unwrap() - 1.0).abs() < 1e-12);
    let ob = vec![1.0; m.shape.num_boundary_nodes()];
    assert!((integrate(&ob, &m, Region::Face(Face::Upper)).unwrap() - 1.0).abs() < 1e-12);
    assert!((integrate(&ob, &m, Region::Boundary).unwrap() - 2.0).abs() < 1e-12);
    assert!(integrate(&ob, &m, Region::Interior).is_err());
}

#[test]
fn integrate_conformal_strip_matches_refined_quadrature() {
    // ∫ e^{2f} over the unit strip with f = sin(2πx) against a 10× refined sum.
    let vol = |cells: usize| {
        let shape = GridShape::unit(2, cells, 1).unwrap();
        let m = GridMetric::flat(shape.clone()).unwrap();
        let f: Vec<f64> = (0..shape.num_nodes()).map(|q| (2.0 * PI * shape.coords(q)[0]).sin()).collect();
        let mh = conformal_metric(&m, &f).unwrap();
        integrate(&vec![1.0; shape.num_nodes()], &mh, Region::Interior).unwrap()
    };
    let coarse = vol(24);
    let fine = vol(240);
    assert!((coarse - fine).abs() < 1e-6, "{coarse} {fine}");
}

#[test]
fn integrate_is_linear_and_monotone() {
    let shape = GridShape::unit(3, 8, 1).unwrap();
    let m = random_metric(&shape, &mut rng(9), 0.15).unwrap();
    let a = random_scalar(&shape, &mut rng(1), 1.0);
    let b = random_scalar(&shape, &mut rng(2), 1.0);
    let lin: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
    let ia = integrate(&a, &m, Region::Interior).unwrap();
    let ib = integrate(&b, &m, Region::Interior).unwrap();
    let il = integrate(&lin, &m, Region::Interior).unwrap();
    assert!((il - (2.0 * ia - 3.0 * ib)).abs() < 1e-12);
    let sq: Vec<f64> = a.iter().map(|x| x * x).collect();
    assert!(integrate(&sq, &m, Region::Interior).unwrap() >= 0.0);
}

#[test]
fn conformal_identity_and_constant_scaling() {
    let shape = GridShape::unit(3, 8, 1).unwrap();
    let m = random_metric(&shape, &mut rng(4), 0.2).unwrap();
    let (_, r) = curvature(&m).unwrap();
    let h = boundary_geometry(&m).unwrap().h;
    let p0 = conformal_transform(&m, &vec![0.0; shape.num_nodes()]).unwrap();
    assert_eq!(p0.metric, m);
    for q in 0..r.len() {
        assert!((p0.r[q] - r[q]).abs() < 1e-12);
    }
    let c = 0.3;
    let pc = conformal_transform(&m, &vec![c; shape.num_nodes()]).unwrap();
    let (_, rc) = curvature(&pc.metric).unwrap();
    let hc = boundary_geometry(&pc.metric).unwrap().h;
    for q in 0..r.len() {
        assert!((rc[q] - (-2.0 * c).exp() * r[q]).abs() < 1e-10 * (1.0 + r[q].abs()));
        assert!((pc.r[q] - rc[q]).abs() < 1e-10 * (1.0 + r[q].abs()));
    }
    for k in 0..h.len() {
        assert!((hc[k] - (-c).exp() * h[k]).abs() < 1e-10);
    }
}

#[test]
fn conformal_predictions_converge_on_flat_slab() {
    // random f on the flat slab: direct curvature of e^{2f} g against the formulas
    let err = |cells: usize| {
        let shape = GridShape::unit(3, cells, 1).unwrap();
        let m = GridMetric::flat(shape.clone()).unwrap();
        let f: Vec<f64> = (0..shape.num_nodes())
            .map(|q| {
                let x = shape.coords(q);
                0.2 * (2.0 * PI * x[0] + 0.4).sin() * (1.3 * x[1]).cos() + 0.1 * x[1] * (2.0 * PI * x[2]).cos()
            })
            .collect();
        let p = conformal_transform(&m, &f).unwrap();
        let (ric, r) = curvature(&p.metric).unwrap();
        let bg = boundary_geometry(&p.metric).unwrap();
        let e_r = max_abs(r.iter().zip(&p.r).map(|(a, b)| a - b));
        let e_ru = max_abs(r.iter().zip(p.r_from_u.as_ref().unwrap()).map(|(a, b)| a - b));
        let e_ric = max_abs(ric.data.iter().zip(&p.ric.data).map(|(a, b)| a - b));
        let e_h = max_abs(bg.h.iter().zip(&p.h).map(|(a, b)| a - b));
        let e_hu = max_abs(bg.h.iter().zip(p.h_from_u.as_ref().unwrap()).map(|(a, b)| a - b));
        let e_pi = max_abs(bg.pi.data.iter().zip(&p.pi.data).map(|(a, b)| a - b));
        [e_r, e_ru, e_ric, e_h, e_hu, e_pi]
    };
    let (a, b) = (err(16), err(32));
    for k in 0..6 {
        let order = (a[k] / b[k]).log2();
        assert!(order > 1.8, "quantity {k}: {} -> {} (order {order})", a[k], b[k]);
    }
}

#[test]
fn conformal_ricci_matches_formula_on_curved_background() {
    // ĝ = e^{2f} g with f = ε sin(2πx) over a random background
    let err = |cells: usize| {
        let shape = GridShape::unit(3, cells, 1).unwrap();
        let bgm = GridMetric::from_fn(shape.clone(), |x| {
            let mut m = diag(&[1.0 + 0.2 * x[1] * x[1], 1.0, 1.0 + 0.1 * (2.0 * PI * x[0]).cos()]);
            m[0][1] = 0.05 * (2.0 * PI * x[2]).sin();
            m[1][0] = m[0][1];
            m
        })
        .unwrap();
        let f: Vec<f64> = (0..shape.num_nodes()).map(|q| 0.2 * (2.0 * PI * shape.coords(q)[0]).sin()).collect();
        let p = conformal_transform(&bgm, &f).unwrap();
        let (ric, _) = curvature(&p.metric).unwrap();
        max_abs(ric.data.iter().zip(&p.ric.data).map(|(a, b)| a - b))
    };
    let (a, b) = (err(16), err(32));
    assert!((a / b).log2() > 1.8, "{a} {b}");
}

#[test]
fn conformal_u_form_rejected_in_2d() {
    let shape = GridShape::unit(2, 8, 1).unwrap();
    let m = GridMetric::flat(shape.clone()).unwrap();
    let p = conformal_transform(&m, &vec![0.1; shape.num_nodes()]).unwrap();
    assert!(p.r_from_u.is_none() && p.h_from_u.is_none());
}

#[test]
fn degenerate_metric_names_node() {
    let shape = GridShape::unit(2, 8, 1).unwrap();
    let mut g = GridMetric::flat(shape.clone()).unwrap().g;
    g.set(5, 0, 0, 0.0);
    match GridMetric::new(shape, g) {
        Err(Error::DegenerateMetric { node, .. }) => assert_eq!(node, 5),
        other => panic!("{other:?}"),
    }
}

#[test]
fn jacobian_matches_directional_dual() {
    use crate::scalar::Dual;
    let shape = GridShape::unit(3, 8, 1).unwrap();
    let m = random_metric(&shape, &mut rng(8), 0.2).unwrap();
    let h = crate::fixtures::random_sym(&shape, &mut rng(9), 1.0);
    let jac = jacobian::curvature_jacobian(&m).unwrap();
    let st = Stencils::new(&shape);
    let comps: Vec<Vec<Dual>> = (0..shape.ncomp())
        .map(|c| m.g.component(c).into_iter().zip(h.component(c)).map(|(v, d)| Dual::new(v, d)).collect())
        .collect();
    let (_, r) = curvature_generic(&shape, &st, &comps).unwrap();
    let jr = jac.d_r.apply(&h.data);
    for q in 0..r.len() {
        assert!((r[q].d - jr[q]).abs() < 1e-9 * (1.0 + jr[q].abs()));
    }
    let bd = boundary_generic(&shape, &st, &comps).unwrap();
    let jh = jac.d_h.apply(&h.data);
    for k in 0..bd.len() {
        assert!((bd[k].h.d - jh[k]).abs() < 1e-9 * (1.0 + jh[k].abs()));
    }
}

#[test]
fn json_roundtrip() {
    let shape = GridShape::unit(2, 8, 1).unwrap();
    let m = random_metric(&shape, &mut rng(1), 0.1).unwrap();
    let s = serde_json::to_string(&m).unwrap();
    let back: GridMetric = serde_json::from_str(&s).unwrap();
    assert_eq!(back, m);
}
