//! Conformal metrics on triangle meshes.
//!
//! A [`TriConformalSurface`] carries reference edge lengths `l⁰` and a log
//! factor `u` per vertex; the metric is `e^u g₀`, so edge lengths scale as
//! `l_ij = e^{(u_i+u_j)/4} l⁰_ij`. Curvature is measured by angle defects,
//! which sum to `2πχ` for every admissible length assignment.

mod mesh;
mod solver;

#[cfg(test)]
mod tests;

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use mesh::{build_mesh, MeshKind};
pub use solver::{
    solve_conformal, solve_gauss_curvature, solve_geodesic_curvature, SolvePath, SolveReport, SolverConfig, Targets,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriConformalSurface {
    pub positions: Vec<[f64; 3]>,
    pub boundary: Vec<bool>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary loops, each traversed with the surface on the left.
    pub loops: Vec<Vec<usize>>,
    /// Unique edges `[i, j]` with `i < j`.
    pub edges: Vec<[usize; 2]>,
    pub l0: Vec<f64>,
    pub u: Vec<f64>,
    /// `tri_edges[t][k]` is the edge opposite corner `k` of triangle `t`.
    tri_edges: Vec<[usize; 3]>,
}

impl TriConformalSurface {
    /// Builds the connectivity; `l0` defaults to Euclidean distances.
    pub fn new(positions: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>, l0: Option<Vec<f64>>) -> Result<Self> {
        let nv = positions.len();
        let mut index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut count = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut next: Vec<Option<usize>> = vec![None; nv];
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Parse(format!("triangle {t} has invalid vertex indices {tri:?}")));
            }
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = [a.min(b), a.max(b)];
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    count.push(0usize);
                    edges.len() - 1
                });
                count[e] += 1;
                te[k] = e;
            }
            tri_edges.push(te);
        }
        if let Some(e) = count.iter().position(|&c| c > 2) {
            return Err(Error::Parse(format!("edge {:?} is shared by more than two triangles", edges[e])));
        }
        // directed boundary edges, oriented by their triangle
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if count[index[&[a.min(b), a.max(b)]]] == 1 {
                    if next[a].is_some() {
                        return Err(Error::Parse(format!("boundary is not a union of simple loops at vertex {a}")));
                    }
                    next[a] = Some(b);
                }
            }
        }
        let mut boundary = vec![false; nv];
        let mut loops = Vec::new();
        for start in 0..nv {
            if next[start].is_none() || boundary[start] {
                continue;
            }
            let mut lp = vec![start];
            boundary[start] = true;
            let mut v = next[start].unwrap();
            while v != start {
                if boundary[v] {
                    return Err(Error::Parse(format!("boundary loops touch at vertex {v}")));
                }
                boundary[v] = true;
                lp.push(v);
                v = next[v].ok_or_else(|| Error::Parse(format!("open boundary chain at vertex {v}")))?;
            }
            loops.push(lp);
        }
        let l0 = match l0 {
            Some(l) if l.len() != edges.len() => {
                return Err(Error::ShapeMismatch { expected: edges.len(), got: l.len() })
            }
            Some(l) => l,
            None => edges.iter().map(|&[a, b]| dist(&positions[a], &positions[b])).collect(),
        };
        if let Some(e) = l0.iter().position(|&l| !(l > 0.0)) {
            return Err(Error::Parse(format!("reference length of edge {:?} is not positive", edges[e])));
        }
        let u = vec![0.0; nv];
        let s = Self { positions, boundary, triangles, loops, edges, l0, u, tri_edges };
        s.angles()?;
        Ok(s)
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn with_u(&self, u: Vec<f64>) -> Result<Self> {
        if u.len() != self.num_vertices() {
            return Err(Error::ShapeMismatch { expected: self.num_vertices(), got: u.len() });
        }
        let mut s = self.clone();
        s.u = u;
        Ok(s)
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.lengths_for(&self.u)
    }

    pub(crate) fn lengths_for(&self, u: &[f64]) -> Vec<f64> {
        self.edges.iter().zip(&self.l0).map(|(&[a, b], l)| ((u[a] + u[b]) / 4.0).exp() * l).collect()
    }

    pub(crate) fn tri_lengths(&self, t: usize, len: &[f64]) -> [f64; 3] {
        let e = self.tri_edges[t];
        [len[e[0]], len[e[1]], len[e[2]]]
    }

    pub fn angles(&self) -> Result<Vec<[f64; 3]>> {
        angles_for(self, &self.lengths())
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let index: HashMap<[usize; 2], usize> = self.edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        self.loops.iter().flat_map(move |lp| {
            let index = index.clone();
            (0..lp.len()).map(move |k| {
                let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
                (a, b, index[&[a.min(b), a.max(b)]])
            })
        })
    }

    /// Bandwidth of the vertex adjacency in the current numbering.
    pub fn bandwidth(&self) -> usize {
        self.edges.iter().map(|&[a, b]| b - a).max().unwrap_or(0)
    }

    /// Total area under the current lengths.
    pub fn area(&self) -> Result<f64> {
        let len = self.lengths();
        (0..self.triangles.len())
            .map(|t| {
                let l = self.tri_lengths(t, &len);
                check_triangle(t, &l)?;
                Ok(heron(&l))
            })
            .sum()
    }
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub(crate) fn check_triangle(t: usize, l: &[f64; 3]) -> Result<()> {
    let ok = l.iter().all(|x| x.is_finite())
        && l[0] < l[1] + l[2]
        && l[1] < l[0] + l[2]
        && l[2] < l[0] + l[1];
    if ok {
        Ok(())
    } else {
        Err(Error::TriangleInequality { tri: t })
    }
}

/// Area from side lengths (stable ordering of Heron's formula).
pub(crate) fn heron(l: &[f64; 3]) -> f64 {
    let mut s = *l;
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let (a, b, c) = (s[0], s[1], s[2]);
    0.25 * ((a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))).max(0.0).sqrt()
}

/// Corner angles; `l[k]` is the side opposite corner `k`.
pub(crate) fn corner_angles(l: &[f64; 3]) -> [f64; 3] {
    let mut th = [0.0; 3];
    for k in 0..3 {
        let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
        th[k] = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0).acos();
    }
    th
}

pub(crate) fn angles_for(s: &TriConformalSurface, len: &[f64]) -> Result<Vec<[f64; 3]>> {
    (0..s.triangles.len())
        .map(|t| {
            let l = s.tri_lengths(t, len);
            check_triangle(t, &l)?;
            Ok(corner_angles(&l))
        })
        .collect()
}

/// Angle defects and their curvature densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCurvatures {
    /// `2π − Σθ` inside, `π − Σθ` on the boundary.
    pub defect: Vec<f64>,
    /// One third of the incident area inside, half the adjacent boundary length on the boundary.
    pub weight: Vec<f64>,
    /// `K` at interior vertices, `κ` at boundary vertices.
    pub curvature: Vec<f64>,
    pub boundary: Vec<bool>,
    /// One third of the incident area at every vertex.
    pub area: Vec<f64>,
    /// Half the adjacent boundary length (zero inside).
    pub length: Vec<f64>,
}

impl DiscreteCurvatures {
    pub fn interior_total(&self) -> f64 {
        self.defect.iter().zip(&self.boundary).filter(|(_, &b)| !b).map(|(d, _)| d).sum()
    }

    pub fn boundary_total(&self) -> f64 {
        self.defect.iter().zip(&self.boundary).filter(|(_, &b)| b).map(|(d, _)| d).sum()
    }

    pub fn gauss(&self) -> Vec<(usize, f64)> {
        (0..self.defect.len()).filter(|&i| !self.boundary[i]).map(|i| (i, self.curvature[i])).collect()
    }

    pub fn geodesic(&self) -> Vec<(usize, f64)> {
        (0..self.defect.len()).filter(|&i| self.boundary[i]).map(|i| (i, self.curvature[i])).collect()
    }
}

pub fn discrete_curvatures(s: &TriConformalSurface) -> Result<DiscreteCurvatures> {
    curvatures_for(s, &s.u)
}

pub(crate) fn curvatures_for(s: &TriConformalSurface, u: &[f64]) -> Result<DiscreteCurvatures> {
    let len = s.lengths_for(u);
    let ang = angles_for(s, &len)?;
    let nv = s.num_vertices();
    let mut defect: Vec<f64> = s.boundary.iter().map(|&b| if b { PI } else { 2.0 * PI }).collect();
    let mut area = vec![0.0; nv];
    let mut length = vec![0.0; nv];
    for (t, tri) in s.triangles.iter().enumerate() {
        let a = heron(&s.tri_lengths(t, &len)) / 3.0;
        for k in 0..3 {
            defect[tri[k]] -= ang[t][k];
            area[tri[k]] += a;
        }
    }
    for (a, b, e) in s.boundary_edges() {
        length[a] += 0.5 * len[e];
        length[b] += 0.5 * len[e];
    }
    let weight: Vec<f64> = (0..nv).map(|i| if s.boundary[i] { length[i] } else { area[i] }).collect();
    let curvature = defect.iter().zip(&weight).map(|(d, w)| d / w).collect();
    Ok(DiscreteCurvatures { defect, weight, curvature, boundary: s.boundary.clone(), area, length })
}

/// `|Σ defects − 2πχ|`.
pub fn gauss_bonnet_residual(s: &TriConformalSurface) -> Result<f64> {
    let c = discrete_curvatures(s)?;
    let total: f64 = c.defect.iter().sum();
    Ok((total - 2.0 * PI * s.euler_characteristic() as f64).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Boundary,
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub admissible: bool,
    pub reason: String,
    /// Set when the field vanishes somewhere without changing sign strictly.
    pub borderline: bool,
}

/// The sign condition on the prescribed curvature tied to the sign of `χ`.
///
/// Positive `χ`: positive somewhere. Zero: strictly positive and strictly
/// negative values, or identically zero. Negative: negative somewhere.
pub fn sign_gate(chi: i64, field: &[f64], location: Location) -> GateReport {
    let pos = field.iter().any(|&v| v > 0.0);
    let neg = field.iter().any(|&v| v < 0.0);
    let zero = field.iter().any(|&v| v == 0.0);
    let what = match location {
        Location::Boundary => "geodesic curvature",
        Location::Interior => "Gauss curvature",
    };
    let (admissible, reason) = match chi.signum() {
        1 if pos => (true, format!("χ = {chi} and the {what} is positive somewhere")),
        1 => (false, format!("χ = {chi} requires the {what} to be positive somewhere")),
        -1 if neg => (true, format!("χ = {chi} and the {what} is negative somewhere")),
        -1 => (false, format!("χ = {chi} requires the {what} to be negative somewhere")),
        _ if !pos && !neg => (true, format!("χ = 0 and the {what} vanishes identically")),
        _ if pos && neg => (true, format!("χ = 0 and the {what} changes sign")),
        _ => (false, format!("χ = 0 requires the {what} to change sign or vanish identically")),
    };
    let borderline = zero && (pos ^ neg);
    GateReport { admissible, reason, borderline }
}

impl GateReport {
    pub fn into_result(self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::GateViolation(self.reason))
        }
    }
}

/// P1 stiffness (cotangent weights) under the current lengths, as `(i, j, w)`
/// with `i < j` and `(i, i, Σ)` diagonals.
pub fn cotangent_stiffness(s: &TriConformalSurface) -> Result<Vec<(usize, usize, f64)>> {
    let len = s.lengths();
    let ang = angles_for(s, &len)?;
    let mut off: HashMap<[usize; 2], f64> = HashMap::new();
    let mut diag = vec![0.0; s.num_vertices()];
    for (t, tri) in s.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let w = 0.5 / ang[t][k].tan();
            *off.entry([a.min(b), a.max(b)]).or_insert(0.0) -= w;
            diag[a] += w;
            diag[b] += w;
        }
    }
    let mut out: Vec<(usize, usize, f64)> = off.into_iter().map(|([a, b], w)| (a, b, w)).collect();
    out.sort_by_key(|&(a, b, _)| (a, b));
    out.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    Ok(out)
}

/// P1 boundary mass as `(i, j, m)` over each boundary edge (consistent mass).
pub fn boundary_mass(s: &TriConformalSurface) -> Vec<(usize, usize, f64)> {
    let len = s.lengths();
    let mut out = Vec::new();
    for (a, b, e) in s.boundary_edges() {
        out.push((a, a, len[e] / 3.0));
        out.push((b, b, len[e] / 3.0));
        out.push((a, b, len[e] / 6.0));
        out.push((b, a, len[e] / 6.0));
    }
    out
}
