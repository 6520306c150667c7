//! Seeded smooth random fields and closed-form background metrics used by the
//! test suites, the benches and the CLI `verify` command.

use crate::error::Result;
use crate::tensor_grid::{pairs, GridMetric, GridShape, SymTensorField, MAX_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of a few separable trigonometric modes, periodic along periodic axes.
#[derive(Clone, Debug)]
pub struct SmoothRandom {
    modes: Vec<(f64, [f64; MAX_DIM], [f64; MAX_DIM])>,
}

impl SmoothRandom {
    pub fn new<R: Rng>(shape: &GridShape, rng: &mut R, nmodes: usize) -> Self {
        let modes = (0..nmodes)
            .map(|_| {
                let amp = rng.gen_range(-1.0..1.0);
                let mut k = [0.0; MAX_DIM];
                let mut ph = [0.0; MAX_DIM];
                for a in 0..shape.n {
                    let l = shape.length(a);
                    k[a] = if shape.is_bounded(a) {
                        rng.gen_range(0.5..2.5) * PI / l
                    } else {
                        2.0 * PI * rng.gen_range(0..=2) as f64 / l
                    };
                    ph[a] = rng.gen_range(0.0..2.0 * PI);
                }
                (amp, k, ph)
            })
            .collect();
        Self { modes }
    }

    pub fn eval(&self, x: &[f64; MAX_DIM], n: usize) -> f64 {
        self.modes
            .iter()
            .map(|(a, k, ph)| a * (0..n).map(|d| (k[d] * x[d] + ph[d]).cos()).product::<f64>())
            .sum::<f64>()
            / (self.modes.len() as f64).sqrt()
    }

    pub fn sample(&self, shape: &GridShape) -> Vec<f64> {
        (0..shape.num_nodes()).map(|q| self.eval(&shape.coords(q), shape.n)).collect()
    }
}

/// Smooth random scalar field with unit-order amplitude `amp`.
pub fn random_scalar<R: Rng>(shape: &GridShape, rng: &mut R, amp: f64) -> Vec<f64> {
    SmoothRandom::new(shape, rng, 4).sample(shape).into_iter().map(|v| amp * v).collect()
}

/// Smooth random symmetric tensor field.
pub fn random_sym<R: Rng>(shape: &GridShape, rng: &mut R, amp: f64) -> SymTensorField {
    let n = shape.n;
    let comps: Vec<Vec<f64>> = pairs(n).iter().map(|_| random_scalar(shape, rng, amp)).collect();
    let mut t = SymTensorField::zeros(n, shape.num_nodes());
    for (c, (i, j)) in pairs(n).into_iter().enumerate() {
        for q in 0..shape.num_nodes() {
            t.set(q, i, j, comps[c][q]);
        }
    }
    t
}

/// Identity plus a smooth random perturbation of size `amp` (keep `amp < 0.3`).
pub fn random_metric<R: Rng>(shape: &GridShape, rng: &mut R, amp: f64) -> Result<GridMetric> {
    let h = random_sym(shape, rng, amp);
    let flat = GridMetric::flat(shape.clone())?;
    flat.perturbed(&h, 1.0)
}

/// Normalization constant of the scalar-flat slab with `H ≡ −1`.
pub fn hneg_constant() -> f64 {
    (2.0 * 0.25f64.sin() / 0.25f64.cos().powi(3)).sqrt()
}

/// Conformal factor `u(y) = C cos((y − 1/2)/2)` of the `H ≡ −1` slab.
pub fn hneg_u(y: f64) -> f64 {
    hneg_constant() * ((y - 0.5) / 2.0).cos()
}

/// Scalar-flat 3-D slab whose two faces both have mean curvature `−1`:
/// `u⁴ (e^{2y} dx² + dy² + e^{−2y} dz²)` on `T² × [0, 1]`.
pub fn hneg_slab(cx: usize, cy: usize, cz: usize, lx: f64, lz: f64) -> Result<GridMetric> {
    let shape = GridShape::new(3, vec![cx, cy, cz], vec![lx / cx as f64, 1.0 / cy as f64, lz / cz as f64], 1)?;
    GridMetric::from_fn(shape, |x| {
        let y = x[1];
        let u4 = hneg_u(y).powi(4);
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        m[0][0] = u4 * (2.0 * y).exp();
        m[1][1] = u4;
        m[2][2] = u4 * (-2.0 * y).exp();
        m
    })
}

/// [`hneg_slab`] corrected to be discretely scalar flat with `H ≡ −1` at
/// the given resolution (Newton continuation from the sampled metric).
pub fn hneg_slab_discrete(cx: usize, cy: usize, cz: usize, lx: f64, lz: f64) -> Result<GridMetric> {
    use crate::prescriber::{continuation_solve, NewtonConfig};
    let g = hneg_slab(cx, cy, cz, lx, lz)?;
    let r = vec![0.0; g.shape.num_nodes()];
    let h = vec![-1.0; g.shape.num_boundary_nodes()];
    Ok(continuation_solve(&g, &r, &h, &NewtonConfig::default(), 20)?.metric)
}

/// Flat slab `[0,1]^n` with the last-but-one axis bounded (`y` in 3-D).
pub fn flat_slab(n: usize, cells: usize) -> Result<GridMetric> {
    GridMetric::flat(GridShape::unit(n, cells, 1)?)
}

/// Smooth background used by refinement studies; periodic in x and z.
pub fn smooth_metric(shape: &GridShape) -> Result<GridMetric> {
    GridMetric::from_fn(shape.clone(), |x| {
        let mut g = [[0.0; MAX_DIM]; MAX_DIM];
        let s = (2.0 * PI * x[0]).sin();
        let c = (2.0 * PI * x[shape.n - 1]).cos();
        g[0][0] = 1.0 + 0.2 * x[1] * s;
        g[1][1] = 1.0 + 0.15 * x[1] * x[1] + 0.1 * c;
        g[0][1] = 0.1 * s * x[1];
        g[1][0] = g[0][1];
        if shape.n == 3 {
            g[2][2] = 1.0 - 0.1 * x[1] * c;
            g[1][2] = 0.05 * s;
            g[2][1] = g[1][2];
        }
        g
    })
}

/// Smooth variation direction paired with [`smooth_metric`].
pub fn smooth_h(shape: &GridShape) -> SymTensorField {
    SymTensorField::from_fn(shape.n, shape.num_nodes(), |q| {
        let x = shape.coords(q);
        let mut h = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..shape.n {
            for j in 0..shape.n {
                let k = (i + 2 * j) as f64;
                h[i][j] = (2.0 * PI * x[0] + 0.3 * k).cos() * (0.7 * x[1] + 0.1 * k).sin() + 0.2 * (i + j) as f64;
            }
        }
        h
    })
}

/// Smooth positive test function paired with [`smooth_metric`].
pub fn smooth_f(shape: &GridShape) -> Vec<f64> {
    (0..shape.num_nodes())
        .map(|q| {
            let x = shape.coords(q);
            1.0 + 0.5 * (2.0 * PI * x[0]).cos() * x[1] + 0.3 * (2.0 * PI * x[shape.n - 1]).sin()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_grid::{boundary_geometry, curvature};

    #[test]
    fn hneg_slab_is_scalar_flat_with_negative_faces() {
        let err = |cy: usize| {
            let m = hneg_slab(8, cy, 8, 1.0, 1.0).unwrap();
            let (_, r) = curvature(&m).unwrap();
            let bg = boundary_geometry(&m).unwrap();
            let er = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let eh = bg.h.iter().fold(0.0f64, |a, b| a.max((b + 1.0).abs()));
            (er, eh)
        };
        let (r1, h1) = err(32);
        let (r2, h2) = err(64);
        assert!(r2 < 5e-3 && h2 < 1e-3, "{r2} {h2}");
        assert!((r1 / r2).log2() > 1.8 && (h1 / h2).log2() > 1.8);
    }

    #[test]
    fn random_fields_are_reproducible() {
        let s = GridShape::unit(3, 8, 1).unwrap();
        let a = random_scalar(&s, &mut rng(5), 0.1);
        let b = random_scalar(&s, &mut rng(5), 0.1);
        assert_eq!(a, b);
    }
}
