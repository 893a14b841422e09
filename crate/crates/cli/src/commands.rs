//! Command-line surface and the implementation of each subcommand.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ektau::grid::{Rect, ScalarFieldGrid, UniformGrid};
use ektau::horizontal::{solve_dirichlet, NewtonOptions};
use ektau::parabolicity::{
    area_growth, cutoff_chain_check, cutoff_energy, ChainOptions, CutoffFamily, MetricGrid, RotationalModel, Taper,
};
use ektau::spectra::{cylinder_eigenvalue, cylinder_stability_verdict, SpectralProblem, DEFAULT_SWEEP};
use ektau::surface::{fundamental_forms, SurfaceSpec};
use ektau::SpaceParams;
use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{parse_domain, parse_list, parse_space, BoundarySource, JobConfig, ParabolicityConfig};
use crate::expr::Expr;
use crate::output::Artifacts;
use crate::verify;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "ektau", version, about = "Surfaces, stability spectra and minimal graphs in E(kappa, tau)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Ambient space, `kappa=<k>,tau=<t>` (default Nil: kappa=0,tau=0.5).
    #[arg(long, global = true)]
    pub space: Option<String>,
    /// Surface, e.g. `cylinder:k=1`, `fmp:theta=0.5`, `plane:a=1,b=0`, `grid:path=s.csv`.
    #[arg(long, global = true)]
    pub surface: Option<String>,
    /// Parameter rectangle, `AxB` or `s0,s1,t0,t1`.
    #[arg(long, global = true)]
    pub domain: Option<String>,
    /// Nodes per side.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// JSON job configuration (schema 1); flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fundamental forms, curvatures and stability potential on a grid.
    Curvature,
    /// First Dirichlet eigenvalue of the stability operator.
    Spectrum,
    /// Stability verdict of a vertical cylinder on growing squares.
    StabilitySweep {
        /// Square sides, comma separated.
        #[arg(long)]
        sides: Option<String>,
    },
    /// Cutoff energies, estimate chain and area growth on a model surface.
    Parabolicity(ParabolicityArgs),
    /// Dirichlet problem for horizontal minimal graphs in Nil.
    PdeSolve {
        /// Boundary data as an expression in y, z.
        #[arg(long)]
        boundary: Option<String>,
        /// Boundary data as CSV with columns y,z,u.
        #[arg(long, conflicts_with = "boundary")]
        boundary_csv: Option<PathBuf>,
        /// Initial guess as an expression in y, z.
        #[arg(long)]
        initial: Option<String>,
    },
    /// Runs the full verification suite.
    VerifyAll,
}

#[derive(Debug, Args)]
pub struct ParabolicityArgs {
    /// `plane`, `hyperbolic` or `cylinder:c=<circumference>`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub members: Option<usize>,
    #[arg(long)]
    pub r0: Option<f64>,
    /// `log`, `linear`, `cosine` or `harmonic`.
    #[arg(long)]
    pub taper: Option<String>,
    /// First field of the test pair, in r and theta.
    #[arg(long)]
    pub u: Option<String>,
    /// Second (positive) field of the test pair.
    #[arg(long)]
    pub v: Option<String>,
    /// Radii for the area-growth report.
    #[arg(long)]
    pub growth_radii: Option<String>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Spectrum => "spectrum",
            Command::StabilitySweep { .. } => "stability-sweep",
            Command::Parabolicity(_) => "parabolicity",
            Command::PdeSolve { .. } => "pde-solve",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// Config file merged with command-line overrides.
pub fn resolve(cli: &Cli) -> Result<JobConfig, CliError> {
    let mut cfg = match &cli.common.config {
        Some(p) => JobConfig::load(p)?,
        None => JobConfig::default(),
    };
    if let Some(c) = &cfg.command {
        if c != cli.command.name() {
            return Err(CliError::Validation(format!(
                "config field 'command' is '{c}' but the subcommand is '{}'",
                cli.command.name()
            )));
        }
    }
    let c = &cli.common;
    if let Some(s) = &c.space {
        cfg.space = Some(parse_space(s)?);
    }
    if let Some(s) = &c.surface {
        cfg.surface = Some(s.parse::<SurfaceSpec>()?);
    }
    if let Some(d) = &c.domain {
        cfg.domain = Some(parse_domain(d)?);
    }
    if c.grid.is_some() {
        cfg.grid = c.grid;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    match &cli.command {
        Command::StabilitySweep { sides: Some(s) } => cfg.sides = Some(parse_list(s, "sides")?),
        Command::Parabolicity(a) => {
            let mut p = cfg.parabolicity.clone().unwrap_or_default();
            if let Some(m) = &a.model {
                p.model = m.clone();
            }
            if let Some(m) = a.members {
                p.members = m;
            }
            if let Some(r) = a.r0 {
                p.r0 = r;
            }
            if let Some(t) = &a.taper {
                p.taper = t.clone();
            }
            if a.u.is_some() {
                p.u = a.u.clone();
            }
            if a.v.is_some() {
                p.v = a.v.clone();
            }
            if let Some(g) = &a.growth_radii {
                p.growth_radii = Some(parse_list(g, "growth radii")?);
            }
            cfg.parabolicity = Some(p);
        }
        Command::PdeSolve { boundary, boundary_csv, .. } => {
            if let Some(b) = boundary {
                cfg.boundary = Some(BoundarySource::Expr(b.clone()));
            }
            if let Some(p) = boundary_csv {
                cfg.boundary = Some(BoundarySource::Csv(p.clone()));
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the parsed command line and returns the summary printed on stdout.
pub fn run(cli: &Cli) -> Result<Value, CliError> {
    let cfg = resolve(cli)?;
    let mut art = Artifacts::new(cfg.out.clone().unwrap_or_else(|| PathBuf::from(".")));
    let summary = match &cli.command {
        Command::Curvature => curvature(&cfg, &mut art)?,
        Command::Spectrum => spectrum(&cfg, &mut art)?,
        Command::StabilitySweep { .. } => stability_sweep(&cfg, &mut art)?,
        Command::Parabolicity(_) => parabolicity(&cfg, &mut art)?,
        Command::PdeSolve { initial, .. } => pde_solve(&cfg, initial.as_deref(), &mut art)?,
        Command::VerifyAll => {
            let results = verify::run_all();
            for r in &results {
                println!("{}", r.line());
            }
            let failed = results.iter().filter(|r| !r.pass).count();
            let summary = json!({ "passed": results.len() - failed, "failed": failed, "checks": results });
            art.json("verify.json", &summary)?;
            art.finish()?;
            if failed > 0 {
                return Err(CliError::ChecksFailed(failed));
            }
            return Ok(summary);
        }
    };
    let name = format!("{}.json", cli.command.name().replace('-', "_"));
    art.json(&name, &summary)?;
    art.finish()?;
    Ok(summary)
}

fn space_of(cfg: &JobConfig) -> SpaceParams {
    cfg.space.unwrap_or_else(|| {
        info!("no space given, using Nil (kappa=0, tau=0.5)");
        SpaceParams::nil()
    })
}

fn surface_of(cfg: &JobConfig) -> Result<SurfaceSpec, CliError> {
    let s = cfg
        .surface
        .clone()
        .ok_or_else(|| CliError::Validation("a surface is required (--surface or config field 'surface')".into()))?;
    Ok(match cfg.domain {
        Some(d) => s.with_domain(d),
        None => s,
    })
}

fn curvature(cfg: &JobConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let sp = space_of(cfg);
    let spec = surface_of(cfg)?;
    let imm = spec.build(sp)?;
    let rect = imm.domain();
    let n = cfg.grid.unwrap_or(21);
    let grid = UniformGrid::new(rect, n, n)?;
    let nodes: Vec<(usize, usize)> = grid.nodes().collect();
    let rows = nodes
        .par_iter()
        .map(|&(i, j)| {
            let (s, t) = (grid.s(i), grid.t(j));
            let f = fundamental_forms(imm.as_ref(), s, t)?;
            Ok(vec![s, t, f.mean, f.gauss, f.extrinsic, f.potential_q(), f.potential_qtilde(&sp), f.angle])
        })
        .collect::<Result<Vec<_>, ektau::Error>>()?;
    let header = ["s", "t", "H", "K", "K_ext", "q", "q_tilde", "angle"];
    let ranges: serde_json::Map<String, Value> = header[2..]
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let col = rows.iter().map(|r| r[c + 2]);
            let lo = col.clone().fold(f64::INFINITY, f64::min);
            let hi = col.fold(f64::NEG_INFINITY, f64::max);
            (name.to_string(), json!([lo, hi]))
        })
        .collect();
    let (cs, ct) = (0.5 * (rect.s0 + rect.s1), 0.5 * (rect.t0 + rect.t1));
    let c = fundamental_forms(imm.as_ref(), cs, ct)?;
    let ii = c.second_orthonormal();
    art.csv("curvature.csv", &header, rows)?;
    Ok(json!({
        "space": sp,
        "surface": spec,
        "grid": n,
        "center": {
            "s": cs, "t": ct,
            "H": c.mean, "K": c.gauss, "K_ext": c.extrinsic,
            "second_form": [[ii[(0, 0)], ii[(0, 1)]], [ii[(1, 0)], ii[(1, 1)]]],
            "principal_curvatures": c.principal_curvatures(),
            "q": c.potential_q(), "q_tilde": c.potential_qtilde(&sp), "angle": c.angle,
            "gauss_equation_residual": c.gauss_equation_residual(),
        },
        "ranges": ranges,
    }))
}

fn spectrum(cfg: &JobConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let sp = space_of(cfg);
    let omega = cfg.domain.unwrap_or(Rect::sized(1.0, 1.0)?);
    let spec = surface_of(cfg)?.with_domain(omega);
    let imm = spec.build(sp)?;
    let n = cfg.grid.unwrap_or(64);
    let res = SpectralProblem::new(imm.as_ref(), omega, n, n)?.first_eigenvalue()?;
    let predicted = match spec {
        SurfaceSpec::Cylinder { k_gamma, .. } => Some(cylinder_eigenvalue(&sp, k_gamma, omega.width(), omega.height())),
        _ => None,
    };
    let g = res.eigenfunction.grid;
    art.csv(
        "eigenfunction.csv",
        &["s", "t", "f"],
        g.nodes().map(|(i, j)| vec![g.s(i), g.t(j), res.eigenfunction.get(i, j)]),
    )?;
    Ok(json!({
        "space": sp,
        "surface": spec,
        "domain": omega,
        "grid": n,
        "lambda1": res.lambda1,
        "predicted": predicted,
        "iterations": res.iterations,
        "residual": res.residual,
    }))
}

fn stability_sweep(cfg: &JobConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let sp = space_of(cfg);
    let k = match surface_of(cfg)? {
        SurfaceSpec::Cylinder { k_gamma, .. } => k_gamma,
        other => {
            return Err(CliError::Validation(format!(
                "stability-sweep applies to vertical cylinders, got a {} surface",
                other.family()
            )))
        }
    };
    let sides = cfg.sides.clone().unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
    let rep = cylinder_stability_verdict(sp, k, &sides, cfg.grid.unwrap_or(48))?;
    art.csv(
        "stability.csv",
        &["side", "lambda1", "predicted", "iterations"],
        rep.rows.iter().map(|r| vec![r.side, r.lambda1, r.predicted, r.iterations as f64]),
    )?;
    Ok(serde_json::to_value(&rep).map_err(|e| CliError::Io(e.to_string()))?)
}

fn parse_model(text: &str) -> Result<RotationalModel, CliError> {
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    match name.trim() {
        "plane" => Ok(RotationalModel::Plane),
        "hyperbolic" => Ok(RotationalModel::Hyperbolic),
        "cylinder" => {
            let mut c = TAU;
            for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match item.split_once('=') {
                    Some(("c", v)) | Some(("circumference", v)) => {
                        c = v
                            .trim()
                            .parse()
                            .map_err(|_| CliError::Validation(format!("model option c='{v}' is not a number")))?
                    }
                    _ => return Err(CliError::Validation(format!("unknown cylinder model option '{item}'"))),
                }
            }
            if !(c > 0.0) {
                return Err(CliError::Validation(format!("cylinder circumference must be positive, got {c}")));
            }
            Ok(RotationalModel::Cylinder { circumference: c })
        }
        other => Err(CliError::Validation(format!(
            "unknown model '{other}' (expected plane, hyperbolic or cylinder:c=<circumference>)"
        ))),
    }
}

fn parabolicity(cfg: &JobConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let p: ParabolicityConfig = cfg.parabolicity.clone().unwrap_or_default();
    let model = parse_model(&p.model)?;
    let taper: Taper = p.taper.parse()?;
    if p.members == 0 || !(p.r0 > 0.0) {
        return Err(CliError::Validation("parabolicity needs members >= 1 and r0 > 0".into()));
    }
    let radii: Vec<(f64, f64)> = (1..=p.members)
        .map(|j| {
            let jf = j as f64;
            match model {
                // Linear tapers of length e^j r0 behind r_j = j r0.
                RotationalModel::Cylinder { .. } => (jf * p.r0, jf * p.r0 + jf.exp() * p.r0),
                _ => (jf * p.r0, jf.exp() * jf * p.r0),
            }
        })
        .collect();
    if matches!(model, RotationalModel::Hyperbolic) && radii.last().unwrap().1 > 700.0 {
        return Err(CliError::Validation(format!(
            "hyperbolic cutoffs up to R = {:.0} overflow the warping function; use fewer members",
            radii.last().unwrap().1
        )));
    }
    let fam = CutoffFamily::new(model.clone(), radii, taper)?;
    let energies = (1..=fam.len())
        .into_par_iter()
        .map(|j| cutoff_energy(&fam, j, 256))
        .collect::<Result<Vec<f64>, _>>()?;

    let u = Expr::compile(p.u.as_deref().unwrap_or("math::ln(1 + r^2)"), &["r", "theta"])
        .map_err(CliError::Validation)?;
    let v = Expr::compile(p.v.as_deref().unwrap_or("1"), &["r", "theta"]).map_err(CliError::Validation)?;
    let failure = RefCell::new(None::<String>);
    let (uf, vf) = (field(&u, &failure), field(&v, &failure));
    let opts = ChainOptions {
        tolerance: cfg.tolerances.chain,
        ..Default::default()
    };
    let chain = cutoff_chain_check(&fam, &uf, &vf, &opts);
    if let Some(msg) = failure.borrow_mut().take() {
        return Err(CliError::Validation(msg));
    }
    let chain = chain?;
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    art.csv(
        "cutoffs.csv",
        &[
            "j", "r_j", "R_j", "energy", "inner_term", "annulus_term", "weighted_energy", "bound", "combined_ok",
            "annulus_ok", "inner_ok",
        ],
        chain.rows.iter().zip(&energies).map(|(r, e)| {
            vec![
                r.j as f64, r.r_inner, r.r_outer, *e, r.inner_term, r.annulus_term, r.weighted_energy, r.bound,
                b(r.combined_ok), b(r.annulus_ok), b(r.inner_ok),
            ]
        }),
    )?;

    let growth = match &model {
        RotationalModel::Plane => {
            let radii = p.growth_radii.clone().unwrap_or_else(|| vec![1.0, 2.0, 3.0, 4.0, 5.0]);
            let half = 1.2 * radii.last().copied().unwrap_or(1.0);
            Some((MetricGrid::plane(half, 241)?, radii))
        }
        RotationalModel::Cylinder { circumference } => {
            let radii = p.growth_radii.clone().unwrap_or_else(|| vec![2.5, 5.0, 10.0, 20.0]);
            let half = 1.25 * radii.last().copied().unwrap_or(1.0);
            let around = ((circumference / 0.05).round() as usize).max(8);
            Some((MetricGrid::cylinder(*circumference, half, around)?, radii))
        }
        RotationalModel::Hyperbolic => {
            let radii = p.growth_radii.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
            Some((MetricGrid::hyperbolic_disk(401)?, radii))
        }
        RotationalModel::Custom(_) => None,
    };
    let growth = match growth {
        Some((m, radii)) => {
            let rep = area_growth(&m, (0.0, 0.0), &radii)?;
            let mut bytes = Vec::new();
            rep.write_csv(&mut bytes)?;
            art.csv_bytes("growth.csv", &["r", "vol", "ratio", "truncated"], &bytes)?;
            Some(rep)
        }
        None => None,
    };
    let violated = chain.hypothesis_holds && !chain.all_inequalities_hold();
    if !chain.hypothesis_holds {
        warn!("u (v Lap u - u Lap v) < 0 somewhere: the pair is not a Jacobi-type pair and chain failures are expected");
    }
    let summary = json!({
        "model": p.model,
        "taper": taper,
        "energies": energies,
        "energies_decreasing": energies.windows(2).all(|w| w[1] <= w[0]),
        "u": u.text(),
        "v": v.text(),
        "hypothesis_holds": chain.hypothesis_holds,
        "all_inequalities_hold": chain.all_inequalities_hold(),
        "ratio_variance": chain.ratio_variance,
        "sup_u2": chain.sup_u2,
        "growth": growth.as_ref().map(|g| json!({
            "exponent": g.exponent,
            "quadratic": g.quadratic,
            "truncated": g.rows.iter().any(|r| r.truncated),
        })),
    });
    if violated {
        art.json("parabolicity.json", &summary)?;
        return Err(CliError::Validation(
            "estimate chain violated although the Jacobi-pair hypothesis holds".into(),
        ));
    }
    Ok(summary)
}

fn pde_solve(cfg: &JobConfig, initial: Option<&str>, art: &mut Artifacts) -> Result<Value, CliError> {
    if let Some(sp) = cfg.space {
        if sp != SpaceParams::nil() {
            return Err(CliError::Validation(format!(
                "pde-solve works in Nil (kappa=0, tau=0.5), got kappa={}, tau={}",
                sp.kappa(),
                sp.tau()
            )));
        }
    }
    let rect = cfg.domain.unwrap_or(Rect::sized(1.0, 1.0)?);
    let n = cfg.grid.unwrap_or(41);
    let grid = UniformGrid::new(rect, n, n)?;
    let boundary_values: Vec<f64> = match &cfg.boundary {
        None => return Err(CliError::Validation("pde-solve needs --boundary or --boundary-csv".into())),
        Some(BoundarySource::Expr(text)) => {
            let e = Expr::compile(text, &["y", "z"]).map_err(CliError::Validation)?;
            grid.nodes()
                .map(|(i, j)| e.eval(&[grid.s(i), grid.t(j)]).map_err(CliError::Validation))
                .collect::<Result<_, _>>()?
        }
        Some(BoundarySource::Csv(path)) => boundary_from_csv(path, grid)?,
    };
    let lookup = |y: f64, z: f64| {
        let (i, j) = grid.locate(y, z).expect("boundary callback at a grid node");
        boundary_values[grid.index(i, j)]
    };
    let u0 = match initial {
        Some(text) => {
            let e = Expr::compile(text, &["y", "z"]).map_err(CliError::Validation)?;
            let vals = grid
                .nodes()
                .map(|(i, j)| e.eval(&[grid.s(i), grid.t(j)]).map_err(CliError::Validation))
                .collect::<Result<Vec<_>, _>>()?;
            Some(ScalarFieldGrid::new(grid, vals)?)
        }
        None => None,
    };
    let opts = NewtonOptions {
        tol: cfg.tolerances.newton,
        ..Default::default()
    };
    let sol = solve_dirichlet(grid, &lookup, u0.as_ref(), &opts)?;
    let u = sol.solution.values();
    let res = sol.solution.residual();
    art.csv(
        "solution.csv",
        &["y", "z", "u", "residual"],
        grid.nodes().map(|(i, j)| vec![grid.s(i), grid.t(j), u.get(i, j), res.values.get(i, j)]),
    )?;
    let s = sol.summary();
    Ok(json!({
        "domain": rect,
        "grid": n,
        "residual_norms": { "sup": s.residual_sup, "l2": s.residual_l2 },
        "iterations": s.iterations,
        "history": s.history,
        "final_ratio": s.final_ratio,
        "min_abs_normal_translation": s.min_translation_component,
    }))
}

/// Evaluator that records the first failure and yields NaN from then on.
fn field<'a>(e: &'a Expr, failure: &'a RefCell<Option<String>>) -> impl Fn(f64, f64) -> f64 + 'a {
    move |r, t| match e.eval(&[r, t]) {
        Ok(x) => x,
        Err(msg) => {
            failure.borrow_mut().get_or_insert(msg);
            f64::NAN
        }
    }
}

/// Boundary values from rows `y,z,u`; every boundary node must be listed.
fn boundary_from_csv(path: &std::path::Path, grid: UniformGrid) -> Result<Vec<f64>, CliError> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut vals = vec![f64::NAN; grid.len()];
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let num = |k: usize| -> Result<f64, CliError> {
            rec.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| {
                CliError::Validation(format!("{}: line {}: expected three numbers y,z,u", path.display(), line + 2))
            })
        };
        let (y, z, u) = (num(0)?, num(1)?, num(2)?);
        let (i, j) = grid.locate(y, z).ok_or_else(|| {
            CliError::Validation(format!("{}: line {}: ({y}, {z}) is not a grid node", path.display(), line + 2))
        })?;
        vals[grid.index(i, j)] = u;
    }
    for (i, j) in grid.nodes() {
        let k = grid.index(i, j);
        if grid.is_boundary(i, j) && vals[k].is_nan() {
            return Err(CliError::Validation(format!(
                "{}: no value for boundary node ({}, {})",
                path.display(),
                grid.s(i),
                grid.t(j)
            )));
        }
        if vals[k].is_nan() {
            vals[k] = 0.0;
        }
    }
    Ok(vals)
}
