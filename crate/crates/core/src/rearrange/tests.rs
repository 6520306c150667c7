use super::*;
use proptest::prelude::*;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `[sin]^p` on the circle: the substitution `t = x − y`, `m = (x + y)/2`
/// splits the double integral into `∫|cos m|^p dm · ∫|2 sin(t/2)|^p |t|^{-(2+p/2)} dt`.
fn sin_seminorm_oracle(p: f64) -> f64 {
    let ang = simpson(|m: f64| m.cos().abs().powf(p), 0.0, 2.0 * PI, 20000);
    // t = s², dt = 2s ds
    let radial = simpson(
        |s: f64| {
            if s == 0.0 {
                return 0.0;
            }
            let t = s * s;
            (2.0 * (t / 2.0).sin()).powf(p) / t.powf(2.0 + p / 2.0) * 2.0 * s
        },
        0.0,
        PI.sqrt(),
        20000,
    );
    (ang * 2.0 * radial).powf(1.0 / p)
}

#[test]
fn lp_norm_closed_forms() {
    let z = vec![0.0; 32];
    assert_eq!(lp_norm(&z, 3.0, Domain::circle()).unwrap(), 0.0);
    let unit = Domain::Interval { a: 0.0, b: 1.0 };
    let c = vec![-1.7; 11];
    assert!((lp_norm(&c, 5.0, unit).unwrap() - 1.7).abs() < 1e-14);
    let s: Vec<f64> = Domain::circle().samples(64).iter().map(|x| x.sin()).collect();
    assert!((lp_norm(&s, 2.0, Domain::circle()).unwrap() - PI.sqrt()).abs() < 1e-8);
    assert!(lp_norm(&s, 0.5, Domain::circle()).is_err());
}

#[test]
fn angular_factor_matches_quadrature() {
    for p in [5.0, 6.5, 9.0] {
        let q = simpson(|m: f64| m.cos().abs().powf(p), 0.0, 2.0 * PI, 20000);
        assert!((angular_factor(p) - q).abs() < 1e-9, "p = {p}");
    }
}

#[test]
fn seminorm_constant_and_kernel_check() {
    assert!(gagliardo_seminorm(&vec![2.5; 64], 5.0, 2.0 * PI).unwrap() < 1e-14);
    let err = gagliardo_seminorm(&vec![0.0; 8], 4.0, 2.0 * PI).unwrap_err();
    assert!(err.to_string().contains("integrable"), "{err}");
}

#[test]
fn seminorm_of_sine_matches_separated_integral() {
    let p = 5.0;
    let exact = sin_seminorm_oracle(p);
    let mut prev = f64::INFINITY;
    for n in [64, 128, 256, 512] {
        let s: Vec<f64> = Domain::circle().samples(n).iter().map(|x| x.sin()).collect();
        let v = gagliardo_seminorm(&s, p, 2.0 * PI).unwrap();
        let e = (v - exact).abs() / exact;
        assert!(e < prev, "error grew at {n}");
        prev = e;
    }
    assert!(prev < 1e-2, "relative error {prev}");
}

#[test]
fn refinement_flags_a_jump() {
    let smooth = gagliardo_refinement(&|x: f64| x.sin(), 5.0, 2.0 * PI, &[128, 256, 512]).unwrap();
    assert!(!smooth.diverges && smooth.last_change.abs() < 1e-2, "{smooth:?}");
    let jump = gagliardo_refinement(&|x: f64| if x < PI { 1.0 } else { 0.0 }, 5.0, 2.0 * PI, &[128, 256, 512]).unwrap();
    assert!(jump.diverges, "{jump:?}");
}

#[test]
fn two_dimensional_seminorm_of_plane_wave() {
    // a wave along one axis of a square torus; sampling the second axis must
    // not change the value much against the separated formula
    let m = 24;
    let l = 2.0 * PI;
    let h = l / m as f64;
    let vals: Vec<f64> = (0..m * m).map(|i| ((i / m) as f64 * h).sin()).collect();
    let v = gagliardo_periodic(&vals, &[m, m], &[h, h], 7.0, 3).unwrap();
    let w = gagliardo_periodic(&vals, &[m, m], &[h, h], 7.0, 3).unwrap();
    assert_eq!(v, w);
    assert!(v.is_finite() && v > 0.0);
    assert!(gagliardo_periodic(&vals, &[m, m], &[h, h], 6.0, 3).is_err());
}

#[test]
fn reparam_validation() {
    let d = Domain::circle();
    assert!(MonotoneReparam::new(d, vec![0.0, 1.0], vec![1.0, 0.5], Interp::MonotoneCubic).is_err());
    assert!(MonotoneReparam::new(d, vec![0.0, 1.0], vec![0.0, 7.0], Interp::MonotoneCubic).is_err());
    let unit = Domain::Interval { a: 0.0, b: 1.0 };
    assert!(MonotoneReparam::new(unit, vec![0.0, 1.0], vec![0.1, 1.0], Interp::Linear).is_err());
    let id = MonotoneReparam::identity(d, 8);
    for x in [0.0, 0.3, 3.0, 6.2, 7.5, -1.0] {
        assert!((id.eval(x) - x).abs() < 1e-14);
        assert!((id.derivative(x) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn monotone_cubic_stays_monotone_on_steep_data() {
    let d = Domain::circle();
    let nodes = vec![0.0, 1.0, 1.001, 3.0, 5.0];
    let values = vec![0.5, 0.50001, 4.0, 4.00002, 6.0];
    let r = MonotoneReparam::new(d, nodes, values, Interp::MonotoneCubic).unwrap();
    let mut prev = r.eval(-0.1);
    for k in 0..20000 {
        let x = -0.1 + k as f64 * 7.0 / 20000.0;
        let v = r.eval(x);
        assert!(v >= prev - 1e-14, "decrease at {x}");
        prev = v;
    }
    assert!((r.eval(2.0 * PI) - r.eval(0.0) - 2.0 * PI).abs() < 1e-12);
}

#[test]
fn identity_gives_zero_error() {
    let f = |x: f64| x.sin() + 0.3 * (2.0 * x).cos();
    let cfg = DiffeoConfig { p: 5.0, eps: 1e-2, ..Default::default() };
    let r = build_diffeo(&f, &f, Domain::circle(), &cfg).unwrap();
    assert!(r.lp_error < 1e-14);
    assert_eq!(r.depth, 0);
    assert_eq!(r.status, ApproxStatus::Converged);
}

#[test]
fn range_violation_quotes_hypothesis() {
    let err = build_diffeo(&|x: f64| x.sin(), &|x: f64| 2.0 + x.sin(), Domain::circle(), &DiffeoConfig::default()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("min f ≤ g ≤ max f"), "{msg}");
}

#[test]
fn sine_to_zero_in_lp() {
    let cfg = DiffeoConfig { p: 5.0, eps: 1e-2, ..Default::default() };
    let f = |x: f64| x.sin();
    let g = |_: f64| 0.0;
    let r = build_diffeo(&f, &g, Domain::circle(), &cfg).unwrap();
    assert_eq!(r.status, ApproxStatus::Converged);
    assert!(r.lp_error < 1e-2);
    // midpoint rule per knot segment, resolving the sweep
    let mut knots = r.reparam.nodes.clone();
    knots.push(2.0 * PI);
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let m = 5000;
        let h = (w[1] - w[0]) / m as f64;
        acc += (0..m).map(|k| (f(r.reparam.eval(w[0] + (k as f64 + 0.5) * h)) - g(0.0)).abs().powi(5) * h).sum::<f64>();
    }
    let fine = acc.powf(0.2);
    assert!((fine - r.lp_error).abs() < 2e-3, "{fine} vs {}", r.lp_error);
    assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn varying_target_in_lp() {
    let f = |x: f64| x.sin() + 0.2 * (2.0 * x).sin();
    let g = |x: f64| 0.6 * (x + 0.4).cos();
    let cfg = DiffeoConfig { p: 3.0, eps: 2e-2, ..Default::default() };
    let r = build_diffeo(&f, &g, Domain::circle(), &cfg).unwrap();
    assert!(r.lp_error < 2e-2, "{:?}", r.history);
    assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn interval_map_fixes_endpoints() {
    let unit = Domain::Interval { a: 0.0, b: 1.0 };
    let f = |x: f64| x * x;
    let g = |x: f64| 0.25 + 0.5 * x;
    let cfg = DiffeoConfig { p: 2.0, eps: 1e-2, ..Default::default() };
    let r = build_diffeo(&f, &g, unit, &cfg).unwrap();
    assert!(r.lp_error < 1e-2, "{:?}", r.history);
    assert_eq!(r.reparam.eval(0.0), 0.0);
    assert_eq!(r.reparam.eval(1.0), 1.0);
}

#[test]
fn alignment_steps_are_bounded() {
    let n = 64;
    let xs = Domain::circle().samples(n);
    let fs: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
    let gs: Vec<f64> = xs.iter().map(|x| (x + 0.5).sin()).collect();
    let path = align_circle(&fs, &gs, 2.0);
    assert_eq!(path.len(), n);
    assert!(path.windows(2).all(|w| w[1] - w[0] <= 2));
    assert!(path[n - 1] - path[0] < n);
}

#[test]
fn fractional_mode_recovers_a_reparametrization() {
    let psi = |x: f64| x + 0.3 * x.sin();
    let f = |x: f64| x.sin() + 0.3 * (2.0 * x).cos();
    let g = move |x: f64| f(psi(x));
    let cfg = DiffeoConfig { p: 5.0, eps: 5e-2, mode: ApproxMode::Fractional, samples: 128, ..Default::default() };
    let r = build_diffeo(&f, &g, Domain::circle(), &cfg).unwrap();
    assert_eq!(r.status, ApproxStatus::Converged, "{:?}", r.fractional_error);
    assert!(r.lp_error < 1e-3);
}

#[test]
fn fractional_mode_rejects_small_p() {
    let cfg = DiffeoConfig { p: 3.0, mode: ApproxMode::Fractional, ..Default::default() };
    assert!(build_diffeo(&|x: f64| x.sin(), &|_| 0.0, Domain::circle(), &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_roundtrip(steps in proptest::collection::vec(0.05f64..1.0, 4..12), shift in 0.0f64..6.0, y in -10.0f64..10.0) {
        let k = steps.len();
        let nodes: Vec<f64> = (0..k).map(|i| i as f64 * 2.0 * PI / k as f64).collect();
        let total: f64 = steps.iter().sum::<f64>() * 1.05;
        let mut acc = shift;
        let values: Vec<f64> = steps.iter().map(|s| { let v = acc; acc += s / total * 2.0 * PI; v }).collect();
        let r = MonotoneReparam::new(Domain::circle(), nodes, values, Interp::MonotoneCubic).unwrap();
        let x = r.inverse(y);
        prop_assert!((r.eval(x) - y).abs() <= 1e-10);
        prop_assert!(r.derivative(x) >= 0.0);
        prop_assert!((r.eval(x + 2.0 * PI) - r.eval(x) - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn composition_preserves_sup_on_lattice(seed in 0u64..1000) {
        // f∘φ takes only values of f, and covers the lattice image of f
        let a = 0.2 + (seed % 7) as f64 * 0.1;
        let f = move |x: f64| (x + a).sin();
        let cfg = DiffeoConfig { p: 5.0, eps: 1e-1, max_depth: 6, ..Default::default() };
        let r = build_diffeo(&f, &|x: f64| 0.5 * x.cos(), Domain::circle(), &cfg).unwrap();
        let n = 512;
        let sup = (0..n).map(|i| f(r.reparam.eval(i as f64 * 2.0 * PI / n as f64)).abs()).fold(0.0, f64::max);
        prop_assert!(sup <= 1.0 + 1e-15);
        prop_assert!(r.reparam.values.windows(2).all(|w| w[1] > w[0]));
    }
}
