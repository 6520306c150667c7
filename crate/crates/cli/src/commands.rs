//! `run(job)`: one function per subcommand, each writing a JSON report and
//! CSV fields into the job's output directory.

use std::path::PathBuf;

use curvkit::conformal_spectra::{lambda1, trichotomy, Problem, SpectralReport};
use curvkit::fixtures::{flat_slab, hneg_slab, hneg_slab_discrete};
use curvkit::prescriber::{newton_prescribe, prescribe_full, FullConfig, NewtonConfig};
use curvkit::rearrange::{build_diffeo, ApproxMode, DiffeoConfig, Domain};
use curvkit::surface2d::{
    build_mesh, discrete_curvatures, solve_gauss_curvature, solve_geodesic_curvature, MeshKind, SolveReport,
    SolverConfig, TriConformalSurface,
};
use curvkit::tensor_grid::{boundary_geometry, curvature};
use curvkit::warped::{cross_check_grid, find_negative_profile, total_scalar_curvature, WarpProfile};
use curvkit::GridMetric;
use serde_json::json;

use crate::error::{exit, CliError, CliResult};
use crate::expr::Expr;
use crate::job::{read_csv, read_text, Artifacts, JobSpec};
use crate::suites::{invariant_suite, Check};

pub const COMMANDS: [&str; 8] = ["solve-kappa", "solve-K", "prescribe", "spectrum", "approx", "warp", "verify", "classify"];

#[derive(Debug)]
pub struct Outcome {
    /// Text for standard output.
    pub stdout: String,
    pub artifacts: Vec<PathBuf>,
    pub exit_code: i32,
}

pub fn run(job: &JobSpec) -> CliResult<Outcome> {
    job.validate()?;
    match job.command.as_str() {
        "solve-kappa" => solve_surface(job, Target::Kappa),
        "solve-K" => solve_surface(job, Target::Gauss),
        "prescribe" => prescribe(job),
        "spectrum" => spectrum(job),
        "classify" => classify(job),
        "approx" => approx(job),
        "warp" => warp(job),
        "verify" => verify(job),
        other => Err(CliError::Usage(format!("unknown command `{other}` (expected one of {})", COMMANDS.join(", ")))),
    }
}

fn done(stdout: String, art: Artifacts) -> Outcome {
    Outcome { stdout, artifacts: art.written, exit_code: exit::OK }
}

/// Values of a target at `points`: a CSV input (last column) or an expression.
fn target_values(job: &JobSpec, key: &str, default: &str, points: &[[f64; 3]]) -> CliResult<(String, Vec<f64>)> {
    if let Some(path) = job.inputs.get(key) {
        let (_, rows) = read_csv(path)?;
        if rows.len() != points.len() {
            return Err(CliError::Usage(format!(
                "{}: {} rows, expected one per point ({})",
                path.display(),
                rows.len(),
                points.len()
            )));
        }
        let vals = rows.iter().map(|r| r.last().copied().unwrap_or(f64::NAN)).collect();
        return Ok((path.display().to_string(), vals));
    }
    let src = job.str_or(key, default)?;
    let e = Expr::parse(&src)?;
    let vals = points.iter().map(|&p| e.eval(p)).collect::<CliResult<Vec<f64>>>()?;
    Ok((src, vals))
}

pub fn load_mesh(job: &JobSpec) -> CliResult<(String, TriConformalSurface)> {
    if let Some(path) = job.inputs.get("mesh") {
        let s = TriConformalSurface::from_off(&read_text(path)?)?;
        return Ok((path.display().to_string(), s));
    }
    let name = job.str_or("mesh", "disk")?;
    let kind: MeshKind = name.parse()?;
    let res = job.usize_or("res", 16)?;
    Ok((format!("{name} (res {res})"), build_mesh(kind, res)?))
}

pub fn load_metric(job: &JobSpec) -> CliResult<(String, GridMetric)> {
    if let Some(path) = job.inputs.get("metric") {
        let m: GridMetric = serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::Usage(format!("{}: malformed metric: {e}", path.display())))?;
        let m = GridMetric::new(m.shape, m.g)?;
        return Ok((path.display().to_string(), m));
    }
    let name = job.str_or("fixture", "hneg")?;
    let cells = job.usize_or("cells", 8)?;
    let m = match name.as_str() {
        "hneg" => hneg_slab(cells, cells, cells, 1.0, 1.0)?,
        "hneg-discrete" => hneg_slab_discrete(cells, cells, cells, 1.0, 1.0)?,
        "flat" => flat_slab(3, cells)?,
        "flat2" => flat_slab(2, cells)?,
        _ => {
            return Err(CliError::Usage(format!("unknown fixture `{name}` (hneg, hneg-discrete, flat, flat2)")));
        }
    };
    Ok((format!("{name} ({cells} cells)"), m))
}

fn grid_points(m: &GridMetric, nodes: impl IntoIterator<Item = usize>) -> Vec<[f64; 3]> {
    nodes
        .into_iter()
        .map(|q| {
            let c = m.shape.coords(q);
            [c[0], c[1], if m.n() > 2 { c[2] } else { 0.0 }]
        })
        .collect()
}

fn solver_config(job: &JobSpec) -> CliResult<SolverConfig> {
    let d = SolverConfig::default();
    Ok(SolverConfig { tol: job.f64_or("tol", d.tol)?, max_iter: job.usize_or("max_iter", d.max_iter)?, ..d })
}

#[derive(Clone, Copy, PartialEq)]
enum Target {
    Kappa,
    Gauss,
}

fn solve_surface(job: &JobSpec, which: Target) -> CliResult<Outcome> {
    let (mesh_name, s) = load_mesh(job)?;
    let cfg = solver_config(job)?;
    let (key, default) = if which == Target::Kappa { ("h", "1") } else { ("f", "1") };
    let (src, mut vals) = target_values(job, key, default, &s.positions)?;
    if which == Target::Kappa {
        for (v, b) in vals.iter_mut().zip(&s.boundary) {
            if !b {
                *v = 0.0;
            }
        }
    }
    let rep: SolveReport = match which {
        Target::Kappa => solve_geodesic_curvature(&s, &vals, &cfg)?,
        Target::Gauss => solve_gauss_curvature(&s, &vals, &cfg)?,
    };
    let curv = discrete_curvatures(&rep.surface)?;
    let u = &rep.surface.u;
    let (umin, umax) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut art = Artifacts::create(job)?;
    let result = json!({
        "mesh": mesh_name,
        "vertices": s.num_vertices(),
        "triangles": s.triangles.len(),
        "euler_characteristic": s.euler_characteristic(),
        "target": src,
        "path": rep.path,
        "iterations": rep.iterations,
        "stages": rep.stages,
        "residual": rep.residual,
        "gauss_bonnet": rep.gauss_bonnet,
        "residual_history": rep.history,
        "u_min": umin,
        "u_max": umax,
    });
    art.report(&format!("{}.json", job.command), job, &result)?;
    let rows = (0..s.num_vertices()).map(|v| {
        let p = s.positions[v];
        let b = s.boundary[v];
        vec![
            p[0],
            p[1],
            f64::from(u8::from(b)),
            u[v],
            if b { 0.0 } else { curv.curvature[v] },
            if b { curv.curvature[v] } else { 0.0 },
            if which == Target::Kappa { vals[v] } else { rep.targets.k[v] },
        ]
    });
    let target_col = if which == Target::Kappa { "target_kappa" } else { "target_K" };
    art.csv("u.csv", &["x", "y", "boundary", "u", "K", "kappa", target_col], rows)?;
    let stdout = format!(
        "{}: {} on {mesh_name}, {} Newton steps, residual {:.3e}, u in [{umin:.6}, {umax:.6}]\n",
        job.command,
        match rep.path {
            curvkit::surface2d::SolvePath::Direct => "solved directly",
            curvkit::surface2d::SolvePath::Continuation => "solved by continuation",
            curvkit::surface2d::SolvePath::Rearranged => "solved with rearranged boundary data",
        },
        rep.iterations,
        rep.residual
    );
    Ok(done(stdout, art))
}

fn newton_config(job: &JobSpec) -> CliResult<NewtonConfig> {
    let d = NewtonConfig::default();
    Ok(NewtonConfig { tol_residual: job.f64_or("tol", d.tol_residual)?, max_iter: job.usize_or("max_iter", d.max_iter)?, ..d })
}

fn prescribe(job: &JobSpec) -> CliResult<Outcome> {
    let (name, g0) = load_metric(job)?;
    let shape = g0.shape.clone();
    let bnodes: Vec<usize> = shape.boundary_nodes().iter().map(|&(q, _)| q).collect();
    let (hsrc, target_h) = target_values(job, "h", "-1 + 0.01*sin(2*pi*x)", &grid_points(&g0, bnodes.iter().copied()))?;
    let newton = newton_config(job)?;
    let mut art = Artifacts::create(job)?;
    let explicit_r = job.inputs.contains_key("r") || job.get_str("r")?.is_some();
    let (metric, result, summary) = if explicit_r {
        let (rsrc, target_r) = target_values(job, "r", "0", &grid_points(&g0, 0..shape.num_nodes()))?;
        let res = newton_prescribe(&g0, &target_r, &target_h, &newton)?.into_result()?;
        let summary = format!("Newton converged in {} steps, residual {:.3e}", res.iterations, res.final_residual());
        let result = json!({
            "background": name, "target_r": rsrc, "target_h": hsrc, "mode": "newton",
            "iterations": res.iterations, "residual_history": res.residual_history,
            "status": res.status, "sigma_rel": res.sigma_rel,
        });
        (res.metric, result, summary)
    } else {
        let cfg = FullConfig { newton, ..FullConfig::default() };
        let res = prescribe_full(&g0, &target_h, &cfg)?;
        let summary = format!(
            "{:?} after {} stages, {} Newton steps, sup|H − T| = {:.3e}, sup|R| = {:.3e}",
            res.status, res.stages, res.iterations, res.h_error, res.r_error
        );
        for (k, rp) in res.reparams.iter().enumerate() {
            let rows = rp.table().into_iter().map(|(x, y)| vec![x, y]);
            art.csv(&format!("reparam_{}.csv", ["lower", "upper"][k.min(1)]), &["x", "phi"], rows)?;
        }
        let result = json!({
            "background": name, "target_h": hsrc, "mode": "full",
            "scale": res.scale, "nudged": res.nudged, "stages": res.stages, "iterations": res.iterations,
            "stage_histories": res.stage_histories, "h_error": res.h_error, "r_error": res.r_error,
            "status": res.status,
        });
        (res.metric, result, summary)
    };
    art.report("prescribe.json", job, &result)?;
    art.text("metric.json", &(serde_json::to_string(&metric).map_err(|e| CliError::Io(e.to_string()))? + "\n"))?;
    let r = curvature(&metric)?.1;
    let h = boundary_geometry(&metric)?.h;
    let pts = grid_points(&metric, bnodes.iter().copied());
    art.csv(
        "boundary.csv",
        &["x", "y", "z", "target_h", "h"],
        pts.iter().enumerate().map(|(k, p)| vec![p[0], p[1], p[2], target_h[k], h[k]]),
    )?;
    let pts = grid_points(&metric, 0..shape.num_nodes());
    art.csv("scalar.csv", &["x", "y", "z", "r"], pts.iter().zip(&r).map(|(p, v)| vec![p[0], p[1], p[2], *v]))?;
    Ok(done(format!("prescribe: {summary}\n"), art))
}

fn problems(job: &JobSpec) -> CliResult<Vec<Problem>> {
    match job.str_or("problem", "both")?.as_str() {
        "interior" => Ok(vec![Problem::Interior]),
        "boundary" => Ok(vec![Problem::Boundary]),
        "both" => Ok(vec![Problem::Interior, Problem::Boundary]),
        p => Err(CliError::Usage(format!("unknown problem `{p}` (interior, boundary, both)"))),
    }
}

fn spectrum(job: &JobSpec) -> CliResult<Outcome> {
    let (name, m) = load_metric(job)?;
    let reps: Vec<SpectralReport> = problems(job)?.into_iter().map(|p| lambda1(&m, p)).collect::<Result<_, _>>()?;
    let mut art = Artifacts::create(job)?;
    art.report("spectrum.json", job, &json!({ "metric": name, "spectra": reps }))?;
    let pts = grid_points(&m, 0..m.shape.num_nodes());
    let mut header = vec!["x", "y", "z"];
    for r in &reps {
        header.push(match r.problem {
            Problem::Interior => "phi_interior",
            Problem::Boundary => "phi_boundary",
        });
    }
    let rows = pts.iter().enumerate().map(|(q, p)| {
        let mut row = p.to_vec();
        row.extend(reps.iter().map(|r| r.eigenfunction[q]));
        row
    });
    art.csv("eigenfunction.csv", &header, rows)?;
    let mut out = String::new();
    for r in &reps {
        out.push_str(&format!(
            "spectrum: {:?} λ₁ = {:.10} ({}), residual {:.3e}\n",
            r.problem,
            r.lambda1,
            r.sign_class.name(),
            r.residual
        ));
    }
    Ok(done(out, art))
}

fn classify(job: &JobSpec) -> CliResult<Outcome> {
    let (name, m) = load_metric(job)?;
    let class = trichotomy(&m)?;
    let lb = lambda1(&m, Problem::Boundary)?;
    let mut art = Artifacts::create(job)?;
    art.report(
        "classify.json",
        job,
        &json!({ "metric": name, "class": class.name(), "lambda1_boundary": lb.lambda1, "residual": lb.residual }),
    )?;
    Ok(done(format!("{}\n", class.name()), art))
}

fn approx(job: &JobSpec) -> CliResult<Outcome> {
    let f = Expr::parse(&job.str_or("f", "sin(theta)")?)?;
    let g = Expr::parse(&job.str_or("g", "0")?)?;
    let domain = match job.str_or("domain", "circle")?.as_str() {
        "circle" => Domain::circle(),
        s => {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            let nums: Vec<f64> = parts.iter().filter_map(|p| p.parse().ok()).collect();
            if parts.len() != 2 || nums.len() != 2 || nums[0] >= nums[1] {
                return Err(CliError::Usage(format!("domain `{s}`: expected `circle` or `a,b` with a < b")));
            }
            Domain::Interval { a: nums[0], b: nums[1] }
        }
    };
    let mode = match job.str_or("mode", "lp")?.as_str() {
        "lp" => ApproxMode::Lp,
        "fractional" => ApproxMode::Fractional,
        m => return Err(CliError::Usage(format!("unknown mode `{m}` (lp, fractional)"))),
    };
    let cfg = DiffeoConfig { p: job.f64_or("p", 5.0)?, eps: job.f64_or("eps", 1e-2)?, mode, ..DiffeoConfig::default() };
    // expressions were checked at a sample point; evaluation errors become NaN and fail the range test
    f.eval_line(domain.start())?;
    g.eval_line(domain.start())?;
    let fe = |x: f64| f.eval_line(x).unwrap_or(f64::NAN);
    let ge = |x: f64| g.eval_line(x).unwrap_or(f64::NAN);
    let res = build_diffeo(&fe, &ge, domain, &cfg)?;
    let mut art = Artifacts::create(job)?;
    art.report(
        "approx.json",
        job,
        &json!({
            "f": f.source(), "g": g.source(), "domain": domain, "config": cfg,
            "lp_error": res.lp_error, "fractional_error": res.fractional_error,
            "depth": res.depth, "history": res.history, "status": res.status,
        }),
    )?;
    art.csv("reparam.csv", &["x", "phi"], res.reparam.table().into_iter().map(|(x, y)| vec![x, y]))?;
    let xs = domain.samples(512);
    art.csv("composition.csv", &["x", "f_phi", "g"], xs.iter().map(|&x| vec![x, fe(res.reparam.eval(x)), ge(x)]))?;
    let mut out = format!("approx: {:?}, L^{} error {:.3e}", res.status, cfg.p, res.lp_error);
    if let Some(fr) = res.fractional_error {
        out.push_str(&format!(", Gagliardo error {fr:.3e}"));
    }
    out.push('\n');
    Ok(done(out, art))
}

fn warp(job: &JobSpec) -> CliResult<Outcome> {
    let p = job.usize_or("p", 2)?;
    let q = job.usize_or("q", 2)?;
    let (profile, search) = match job.get_f64("target")? {
        Some(t) => {
            let r = find_negative_profile(p, q, t)?;
            (r.profile.clone(), Some(json!({ "target": t, "lambda": r.lambda, "evaluations": r.evaluations })))
        }
        None => {
            let l = job.f64_or("lambda", 1.0)?;
            (if l == 1.0 { WarpProfile::constant(p, q)? } else { WarpProfile::bump(p, q, l)? }, None)
        }
    };
    let total = total_scalar_curvature(&profile, job.usize_or("quad", 2000)?)?;
    let grid = match job.usize_or("grid", 0)? {
        0 => None,
        res => Some(cross_check_grid(&profile, res)?),
    };
    let mut art = Artifacts::create(job)?;
    art.report("warp.json", job, &json!({ "profile": profile, "total": total, "search": search, "grid_check": grid }))?;
    art.csv("profile.csv", &["r", "f", "df"], profile.samples(400).into_iter().map(|(r, f)| vec![r, f, profile.eval(r).1]))?;
    let mut out = format!("warp: (p, q) = ({p}, {q}), total scalar curvature {total:.9}\n");
    if let Some(g) = grid {
        out.push_str(&format!("warp: grid path {:.6}, relative gap {:.3e}\n", g.grid, g.relative_error));
    }
    Ok(done(out, art))
}

fn verify(job: &JobSpec) -> CliResult<Outcome> {
    let checks: Vec<Check> = invariant_suite(job.seed);
    let failed = checks.iter().filter(|c| !c.passed).count();
    let mut art = Artifacts::create(job)?;
    art.report("verify.json", job, &json!({ "passed": failed == 0, "failed": failed, "checks": checks }))?;
    let mut out: String = checks.iter().map(|c| c.line() + "\n").collect();
    out.push_str(&format!("verify: {} of {} checks passed\n", checks.len() - failed, checks.len()));
    let code = if failed == 0 { exit::OK } else { exit::VERIFICATION };
    Ok(Outcome { stdout: out, artifacts: art.written, exit_code: code })
}
