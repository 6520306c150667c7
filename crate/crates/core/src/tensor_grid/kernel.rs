//! Pointwise curvature from a metric jet `(g, ∂g, ∂∂g)` at one node.
//!
//! Derivatives of the Christoffel symbols are expanded by the chain rule, so
//! the whole curvature map is a node-local function of the jet. That keeps the
//! discrete linearization exact under dual-number evaluation.

use crate::scalar::Scalar;

/// Metric jet at a node. `dg[a][i][j] = ∂_a g_ij`, `ddg[a][b][i][j] = ∂_a ∂_b g_ij`.
#[derive(Clone, Copy, Debug)]
pub struct Jet<T: Scalar, const D: usize> {
    pub g: [[T; D]; D],
    pub dg: [[[T; D]; D]; D],
    pub ddg: [[[[T; D]; D]; D]; D],
}

impl<T: Scalar, const D: usize> Jet<T, D> {
    pub fn zero() -> Self {
        Self {
            g: [[T::zero(); D]; D],
            dg: [[[T::zero(); D]; D]; D],
            ddg: [[[[T::zero(); D]; D]; D]; D],
        }
    }
}

/// Inverse by Gauss–Jordan elimination with partial pivoting on real parts.
pub fn inverse<T: Scalar, const D: usize>(a: &[[T; D]; D]) -> Option<[[T; D]; D]> {
    let mut m = *a;
    let mut inv = [[T::zero(); D]; D];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for c in 0..D {
        let p = (c..D).max_by(|&x, &y| m[x][c].re().abs().total_cmp(&m[y][c].re().abs()))?;
        if m[p][c].re() == 0.0 || !m[p][c].re().is_finite() {
            return None;
        }
        m.swap(c, p);
        inv.swap(c, p);
        let piv = m[c][c].recip();
        for k in 0..D {
            m[c][k] *= piv;
            inv[c][k] *= piv;
        }
        for r in 0..D {
            if r != c {
                let f = m[r][c];
                for k in 0..D {
                    let t = m[c][k];
                    m[r][k] -= f * t;
                    let t = inv[c][k];
                    inv[r][k] -= f * t;
                }
            }
        }
    }
    Some(inv)
}

/// Christoffel symbols `gam[k][i][j] = Γ^k_ij` and the first-kind symbols.
pub fn christoffel<T: Scalar, const D: usize>(
    ginv: &[[T; D]; D],
    dg: &[[[T; D]; D]; D],
) -> ([[[T; D]; D]; D], [[[T; D]; D]; D]) {
    let mut g1 = [[[T::zero(); D]; D]; D];
    for l in 0..D {
        for i in 0..D {
            for j in i..D {
                let v = (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]) * 0.5;
                g1[l][i][j] = v;
                g1[l][j][i] = v;
            }
        }
    }
    let mut gam = [[[T::zero(); D]; D]; D];
    for k in 0..D {
        for i in 0..D {
            for j in i..D {
                let mut s = T::zero();
                for l in 0..D {
                    s += ginv[k][l] * g1[l][i][j];
                }
                gam[k][i][j] = s;
                gam[k][j][i] = s;
            }
        }
    }
    (gam, g1)
}

/// Ricci tensor and scalar curvature at a node; `None` for a singular metric.
pub fn ricci<T: Scalar, const D: usize>(jet: &Jet<T, D>) -> Option<([[T; D]; D], T)> {
    let ginv = inverse(&jet.g)?;
    let (gam, g1) = christoffel(&ginv, &jet.dg);
    // ∂_m g^{kl}
    let mut dginv = [[[T::zero(); D]; D]; D];
    for m in 0..D {
        let mut tmp = [[T::zero(); D]; D];
        for k in 0..D {
            for b in 0..D {
                let mut s = T::zero();
                for a in 0..D {
                    s += ginv[k][a] * jet.dg[m][a][b];
                }
                tmp[k][b] = s;
            }
        }
        for k in 0..D {
            for l in k..D {
                let mut s = T::zero();
                for b in 0..D {
                    s += tmp[k][b] * ginv[b][l];
                }
                dginv[m][k][l] = -s;
                dginv[m][l][k] = -s;
            }
        }
    }
    // ∂_m Γ^k_ij
    let mut dgam = [[[[T::zero(); D]; D]; D]; D];
    for m in 0..D {
        let mut dg1 = [[[T::zero(); D]; D]; D];
        for l in 0..D {
            for i in 0..D {
                for j in i..D {
                    let v = (jet.ddg[m][i][j][l] + jet.ddg[m][j][i][l] - jet.ddg[m][l][i][j]) * 0.5;
                    dg1[l][i][j] = v;
                    dg1[l][j][i] = v;
                }
            }
        }
        for k in 0..D {
            for i in 0..D {
                for j in i..D {
                    let mut s = T::zero();
                    for l in 0..D {
                        s += dginv[m][k][l] * g1[l][i][j] + ginv[k][l] * dg1[l][i][j];
                    }
                    dgam[m][k][i][j] = s;
                    dgam[m][k][j][i] = s;
                }
            }
        }
    }
    let mut trace_gam = [T::zero(); D];
    for (l, t) in trace_gam.iter_mut().enumerate() {
        for k in 0..D {
            *t += gam[k][k][l];
        }
    }
    let mut ric = [[T::zero(); D]; D];
    for a in 0..D {
        for b in a..D {
            let mut s = T::zero();
            for k in 0..D {
                s += dgam[k][k][a][b] - dgam[b][k][a][k];
            }
            for l in 0..D {
                s += trace_gam[l] * gam[l][a][b];
                for k in 0..D {
                    s -= gam[k][b][l] * gam[l][a][k];
                }
            }
            ric[a][b] = s;
            ric[b][a] = s;
        }
    }
    let mut r = T::zero();
    for a in 0..D {
        for b in 0..D {
            r += ginv[a][b] * ric[a][b];
        }
    }
    Some((ric, r))
}

/// Boundary quantities at a boundary node.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint<T: Scalar, const D: usize> {
    /// Outward unit normal, upper index.
    pub nu: [T; D],
    /// Tangential inverse metric padded with zeros (`g^{ij} − ν^i ν^j`).
    pub proj: [[T; D]; D],
    /// Second fundamental form; rows/columns along the normal axis are zero.
    pub pi: [[T; D]; D],
    pub h: T,
    /// `sqrt(det γ)`.
    pub area: T,
}

/// Second fundamental form and mean curvature on the face normal to `axis`
/// with outward sign `side`.
pub fn boundary_point<T: Scalar, const D: usize>(
    g: &[[T; D]; D],
    dg: &[[[T; D]; D]; D],
    axis: usize,
    side: f64,
) -> Option<BoundaryPoint<T, D>> {
    let ginv = inverse(g)?;
    let gyy = ginv[axis][axis];
    if !(gyy.re() > 0.0) {
        return None;
    }
    let norm = gyy.sqrt();
    let mut nu = [T::zero(); D];
    for a in 0..D {
        nu[a] = ginv[a][axis] / norm * side;
    }
    let (gam, _) = christoffel(&ginv, dg);
    let mut proj = [[T::zero(); D]; D];
    let mut pi = [[T::zero(); D]; D];
    for i in 0..D {
        for j in 0..D {
            if i == axis || j == axis {
                continue;
            }
            proj[i][j] = ginv[i][j] - nu[i] * nu[j];
            pi[i][j] = -(gam[axis][i][j] / norm) * side;
        }
    }
    let mut h = T::zero();
    for i in 0..D {
        for j in 0..D {
            h += proj[i][j] * pi[i][j];
        }
    }
    let det_g = det(g);
    let det_gamma = det_g * gyy;
    if !(det_gamma.re() > 0.0) {
        return None;
    }
    Some(BoundaryPoint { nu, proj, pi, h, area: det_gamma.sqrt() })
}

/// Determinant by elimination on a copy.
pub fn det<T: Scalar, const D: usize>(a: &[[T; D]; D]) -> T {
    let mut m = *a;
    let mut d = T::one();
    for c in 0..D {
        let p = (c..D).max_by(|&x, &y| m[x][c].re().abs().total_cmp(&m[y][c].re().abs())).unwrap();
        if m[p][c].re() == 0.0 {
            return T::zero();
        }
        if p != c {
            m.swap(c, p);
            d = -d;
        }
        d *= m[c][c];
        let piv = m[c][c].recip();
        for r in (c + 1)..D {
            let f = m[r][c] * piv;
            for k in c..D {
                let t = m[c][k];
                m[r][k] -= f * t;
            }
        }
    }
    d
}
