use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{dist, TriConformalSurface};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    /// Unit disk, χ = 1.
    Disk,
    /// Flat cylinder of circumference 2π and height 1, χ = 0.
    Annulus,
    /// Rectangle with two square holes, χ = −1.
    Pants,
}

impl FromStr for MeshKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disk" => Ok(Self::Disk),
            "annulus" => Ok(Self::Annulus),
            "pants" => Ok(Self::Pants),
            _ => Err(Error::Parse(format!("unknown mesh kind `{s}` (disk, annulus, pants)"))),
        }
    }
}

impl MeshKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Disk => "disk",
            Self::Annulus => "annulus",
            Self::Pants => "pants",
        }
    }
}

pub fn build_mesh(kind: MeshKind, resolution: usize) -> Result<TriConformalSurface> {
    if resolution < 3 {
        return Err(Error::Precondition(format!("mesh resolution must be at least 3, got {resolution}")));
    }
    match kind {
        MeshKind::Disk => disk(resolution),
        MeshKind::Annulus => annulus(resolution),
        MeshKind::Pants => pants(resolution),
    }
}

/// Concentric rings `k = 1..=res` with `6k` vertices at radius `k/res`.
///
/// Reference lengths are the Euclidean ones scaled by `(π/N)/sin(π/N)`, `N`
/// the number of boundary vertices, so that the boundary polygon has length
/// `2π` and the flat metric has `κ ≡ 1` exactly.
fn disk(res: usize) -> Result<TriConformalSurface> {
    let mut pos = vec![[0.0, 0.0, 0.0]];
    let mut first = vec![0usize];
    for k in 1..=res {
        first.push(pos.len());
        let n = 6 * k;
        let r = k as f64 / res as f64;
        for j in 0..n {
            let a = 2.0 * PI * j as f64 / n as f64;
            pos.push([r * a.cos(), r * a.sin(), 0.0]);
        }
    }
    let ring = |k: usize, j: usize| if k == 0 { 0 } else { first[k] + j % (6 * k) };
    let mut tris = Vec::new();
    for j in 0..6 {
        tris.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for k in 2..=res {
        let (nin, nout) = (6 * (k - 1), 6 * k);
        let (mut i, mut j) = (0, 0);
        while i < nin || j < nout {
            let ain = (i + 1) as f64 / nin as f64;
            let aout = (j + 1) as f64 / nout as f64;
            if j < nout && (i == nin || aout <= ain) {
                tris.push([ring(k - 1, i), ring(k, j), ring(k, j + 1)]);
                j += 1;
            } else {
                tris.push([ring(k - 1, i), ring(k, j), ring(k - 1, i + 1)]);
                i += 1;
            }
        }
    }
    let nb = (6 * res) as f64;
    let calib = (PI / nb) / (PI / nb).sin();
    let mut s = TriConformalSurface::new(pos, tris, None)?;
    s.l0.iter_mut().for_each(|l| *l *= calib);
    Ok(s)
}

/// `4·res` columns around, `res` cell rows over unit height.
fn annulus(res: usize) -> Result<TriConformalSurface> {
    let (nt, nz) = (4 * res, res);
    let mut pos = Vec::new();
    for i in 0..=nz {
        for j in 0..nt {
            let a = 2.0 * PI * j as f64 / nt as f64;
            pos.push([a.cos(), a.sin(), i as f64 / nz as f64]);
        }
    }
    let id = |i: usize, j: usize| i * nt + j % nt;
    let mut tris = Vec::new();
    for i in 0..nz {
        for j in 0..nt {
            let (a, b, c, d) = (id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    // intrinsic lengths of the flat cylinder: arcs around, not chords
    let mut s = TriConformalSurface::new(pos, tris, None)?;
    let step = 2.0 * PI / nt as f64;
    let dz = 1.0 / nz as f64;
    let l0: Vec<f64> = s
        .edges
        .iter()
        .map(|&[a, b]| {
            let (ia, ja) = (a / nt, a % nt);
            let (ib, jb) = (b / nt, b % nt);
            let dj = (ja as i64 - jb as i64).rem_euclid(nt as i64).min((jb as i64 - ja as i64).rem_euclid(nt as i64));
            let di = ia.abs_diff(ib);
            ((dj as f64 * step).powi(2) + (di as f64 * dz).powi(2)).sqrt()
        })
        .collect();
    s.l0 = l0;
    Ok(s)
}

/// `5m × 3m` grid of cells of size `1/m` with the cell blocks
/// `[m, 2m) × [m, 2m)` and `[3m, 4m) × [m, 2m)` removed; `m = ⌈res/3⌉`.
fn pants(res: usize) -> Result<TriConformalSurface> {
    let m = res.div_ceil(3);
    let (nx, ny) = (5 * m, 3 * m);
    let hole = |i: usize, j: usize| j >= m && j < 2 * m && ((i >= m && i < 2 * m) || (i >= 3 * m && i < 4 * m));
    let mut id = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut pos = Vec::new();
    let h = 1.0 / m as f64;
    let used = |x: usize, y: usize| {
        (x.saturating_sub(1)..=x.min(nx - 1))
            .any(|i| (y.saturating_sub(1)..=y.min(ny - 1)).any(|j| !hole(i, j)))
    };
    for y in 0..=ny {
        for x in 0..=nx {
            if used(x, y) {
                id[y * (nx + 1) + x] = pos.len();
                pos.push([x as f64 * h, y as f64 * h, 0.0]);
            }
        }
    }
    let v = |x: usize, y: usize| id[y * (nx + 1) + x];
    let mut tris = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if hole(i, j) {
                continue;
            }
            let (a, b, c, d) = (v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
            if (i + j) % 2 == 0 {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    TriConformalSurface::new(pos, tris, None)
}

impl TriConformalSurface {
    /// OFF text of positions and faces. Reference lengths are not stored.
    pub fn to_off(&self) -> String {
        let mut out = String::from("OFF\n");
        let _ = writeln!(out, "{} {} {}", self.num_vertices(), self.triangles.len(), self.edges.len());
        for p in &self.positions {
            let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    /// Parses OFF; reference lengths are Euclidean distances.
    pub fn from_off(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        if tokens.next() != Some("OFF") {
            return Err(Error::Parse("missing OFF header".into()));
        }
        let mut num = |what: &str| -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("unexpected end of OFF data reading {what}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
        };
        let nv = num("vertex count")? as usize;
        let nf = num("face count")? as usize;
        num("edge count")?;
        let mut pos = Vec::with_capacity(nv);
        for _ in 0..nv {
            pos.push([num("coordinate")?, num("coordinate")?, num("coordinate")?]);
        }
        let mut tris = Vec::with_capacity(nf);
        for f in 0..nf {
            let k = num("face size")? as usize;
            if k != 3 {
                return Err(Error::Parse(format!("face {f} has {k} vertices; only triangles are supported")));
            }
            tris.push([num("index")? as usize, num("index")? as usize, num("index")? as usize]);
        }
        Self::new(pos, tris, None)
    }

    /// Largest reference edge length.
    pub fn mesh_size(&self) -> f64 {
        self.l0.iter().cloned().fold(0.0, f64::max)
    }

    pub fn radius(&self, v: usize) -> f64 {
        dist(&self.positions[v], &[0.0; 3])
    }
}
