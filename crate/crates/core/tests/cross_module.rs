use curvkit::conformal_spectra::{lambda1, trichotomy, Problem, SignClass};
use curvkit::fixtures::{hneg_slab, hneg_slab_discrete, random_scalar, rng};
use curvkit::prescriber::{prescribe_full, FullConfig, Status};
use curvkit::surface2d::{
    build_mesh, discrete_curvatures, gauss_bonnet_residual, solve_gauss_curvature, MeshKind, SolverConfig,
    TriConformalSurface,
};
use curvkit::tensor_grid::{boundary_geometry, conformal_metric, curvature};
use curvkit::warped::{chart_metric, WarpProfile};
use curvkit::GridMetric;
use std::f64::consts::PI;

#[test]
fn prescribed_metric_stays_in_negative_class() {
    let g0 = hneg_slab_discrete(8, 8, 8, 1.0, 1.0).unwrap();
    let shape = g0.shape.clone();
    let target: Vec<f64> =
        shape.boundary_nodes().iter().map(|&(q, _)| -1.0 + 0.02 * (2.0 * PI * shape.coords(q)[0]).cos()).collect();
    let res = prescribe_full(&g0, &target, &FullConfig::default()).unwrap();
    assert_eq!(res.status, Status::Converged);
    let h = boundary_geometry(&res.metric).unwrap().h;
    let err = h.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8, "{err}");
    assert_eq!(trichotomy(&res.metric).unwrap(), SignClass::Negative);
}

#[test]
fn metric_json_round_trip_preserves_spectrum() {
    let g = hneg_slab(8, 8, 8, 1.0, 1.0).unwrap();
    let text = serde_json::to_string(&g).unwrap();
    let back: GridMetric = serde_json::from_str(&text).unwrap();
    assert_eq!(back, g);
    let (a, b) = (lambda1(&g, Problem::Boundary).unwrap(), lambda1(&back, Problem::Boundary).unwrap());
    assert_eq!(a.lambda1, b.lambda1);
}

#[test]
fn conformal_class_of_scalar_flat_slab_ignores_factor() {
    let g = hneg_slab(8, 8, 8, 1.0, 1.0).unwrap();
    for seed in [1u64, 2] {
        let f = random_scalar(&g.shape, &mut rng(seed), 0.3);
        let m = conformal_metric(&g, &f).unwrap();
        assert_eq!(trichotomy(&m).unwrap(), SignClass::Negative);
    }
}

#[test]
fn solved_surface_survives_off_round_trip_topology() {
    let s = build_mesh(MeshKind::Pants, 5).unwrap();
    let r = solve_gauss_curvature(&s, &vec![-1.0; s.num_vertices()], &SolverConfig::default()).unwrap();
    let off = TriConformalSurface::from_off(&r.surface.to_off()).unwrap();
    assert_eq!(off.euler_characteristic(), -1);
    assert_eq!(off.loops.len(), 3);
    assert!(gauss_bonnet_residual(&r.surface).unwrap() <= 1e-9);
    let c = discrete_curvatures(&r.surface).unwrap();
    assert!(c.gauss().iter().all(|(_, k)| (k + 1.0).abs() <= 1e-8));
}

#[test]
fn constant_warp_chart_is_locally_a_product_of_disk_and_sphere() {
    // f ≡ 1: flat disk times a unit two-sphere, R = 2 away from the chart edges
    let w = WarpProfile::constant(2, 2).unwrap();
    let m = chart_metric(&w, 32).unwrap();
    let (_, r) = curvature(&m).unwrap();
    let shape = &m.shape;
    let mut checked = 0;
    for q in 0..shape.num_nodes() {
        let idx = shape.multi(q);
        let inside = (0..shape.n).all(|a| !shape.is_bounded(a) || (idx[a] >= 3 && idx[a] + 3 < shape.count(a)));
        if inside {
            assert!((r[q] - 2.0).abs() < 1e-2, "node {q}: {}", r[q]);
            checked += 1;
        }
    }
    assert!(checked > 0);
}
