//! Horizontal minimal graphs in Nil₃ along the Killing field `X = E1 + y E3`.
//!
//! A function `u(y, z)` defines `F(y, z) = (u, y, z + y u / 2)`, which is
//! minimal exactly when
//!
//! ```text
//! [1 + 2y u_z + (1+y²) u_z²] u_yy − 2 u_y [y + (1+y²) u_z] u_yz
//!     + [1 + (1+y²) u_y²] u_zz − u_y u_z (1 + y u_z) = 0.
//! ```
//!
//! Grid functions use second-order central differences; the Dirichlet solver
//! is a damped Newton iteration with the analytic Jacobian of that stencil.

use std::f64::consts::PI;
use std::sync::Arc;

use log::{debug, info};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, AmbientPoint, KillingField, SpaceParams, VectorField};
use crate::grid::{Rect, ScalarFieldGrid, UniformGrid};
use crate::linalg::{norm2, BandMatrix};
use crate::surface::{
    jacobi_candidates, mean_curvature, FmpSurface, GraphJet, GraphProfile, GridImmersion, HorizontalGraph,
    Immersion,
};

const TAU_NIL: f64 = 0.5;

/// Left side of the minimal graph equation at height `y`.
pub fn pde_operator(y: f64, j: &GraphJet) -> f64 {
    let (w, p) = (j.uy, j.uz);
    let c = 1.0 + y * y;
    let a11 = 1.0 + 2.0 * y * p + c * p * p;
    let a12 = -2.0 * w * (y + c * p);
    let a22 = 1.0 + c * w * w;
    a11 * j.uyy + a12 * j.uyz + a22 * j.uzz - w * p * (1.0 + y * p)
}

/// Partial derivatives of [`pde_operator`] in `(u_y, u_z)`.
fn pde_gradient(y: f64, j: &GraphJet) -> (f64, f64) {
    let (w, p) = (j.uy, j.uz);
    let c = 1.0 + y * y;
    let dw = -2.0 * (y + c * p) * j.uyz + 2.0 * c * w * j.uzz - p * (1.0 + y * p);
    let dp = (2.0 * y + 2.0 * c * p) * j.uyy - 2.0 * w * c * j.uyz - w * (1.0 + 2.0 * y * p);
    (dw, dp)
}

/// A graph function on a rectangle of the `(y, z)`-plane: closed form or grid.
#[derive(Clone)]
pub enum GraphFunction {
    Closed {
        profile: Arc<dyn GraphProfile>,
        grid: UniformGrid,
    },
    Sampled(ScalarFieldGrid),
}

impl std::fmt::Debug for GraphFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphFunction::Closed { grid, .. } => f.debug_struct("Closed").field("grid", grid).finish(),
            GraphFunction::Sampled(v) => f.debug_tuple("Sampled").field(&v.grid).finish(),
        }
    }
}

impl GraphFunction {
    pub fn closed(profile: impl GraphProfile + 'static, grid: UniformGrid) -> Self {
        GraphFunction::Closed {
            profile: Arc::new(profile),
            grid,
        }
    }

    pub fn grid(&self) -> UniformGrid {
        match self {
            GraphFunction::Closed { grid, .. } => *grid,
            GraphFunction::Sampled(v) => v.grid,
        }
    }

    pub fn values(&self) -> ScalarFieldGrid {
        match self {
            GraphFunction::Closed { profile, grid } => ScalarFieldGrid::from_fn(*grid, |y, z| profile.eval(y, z).u),
            GraphFunction::Sampled(v) => v.clone(),
        }
    }

    /// Jet at node `(i, j)`; `None` on the boundary of a sampled grid.
    pub fn jet_at(&self, i: usize, j: usize) -> Option<GraphJet> {
        match self {
            GraphFunction::Closed { profile, grid } => Some(profile.eval(grid.s(i), grid.t(j))),
            GraphFunction::Sampled(v) => {
                if v.grid.is_boundary(i, j) {
                    None
                } else {
                    Some(stencil_jet(v, i, j))
                }
            }
        }
    }

    /// Pointwise residual of the minimal graph equation; boundary nodes of a
    /// sampled grid carry zero.
    pub fn residual(&self) -> PdeResidual {
        let grid = self.grid();
        let mut values = ScalarFieldGrid::zeros(grid);
        let mut evaluated = 0;
        for (i, j) in grid.nodes() {
            if let Some(jet) = self.jet_at(i, j) {
                values.set(i, j, pde_operator(grid.s(i), &jet));
                evaluated += 1;
            }
        }
        PdeResidual::from_values(values, evaluated)
    }

    /// The graph as an immersion into Nil₃.
    pub fn immersion(&self) -> Result<Box<dyn Immersion>> {
        match self {
            GraphFunction::Closed { profile, grid } => Ok(Box::new(HorizontalGraph::new(
                SpaceParams::nil(),
                profile.clone(),
                grid.rect,
            )?)),
            GraphFunction::Sampled(v) => {
                let sp = SpaceParams::nil();
                let pts: Vec<f64> = v.values.clone();
                let g = v.grid;
                Ok(Box::new(GridImmersion::sample(sp, g, move |y, z| {
                    let (i, j) = g.locate(y, z).ok_or_else(|| Error::Contract("node lookup".into()))?;
                    let u = pts[g.index(i, j)];
                    Ok(AmbientPoint::new(u, y, z + TAU_NIL * y * u))
                })?))
            }
        }
    }

    /// `min |⟨η, X⟩|` over all nodes.
    pub fn min_translation_component(&self) -> Result<f64> {
        let sp = SpaceParams::nil();
        let grid = self.grid();
        let vals = self.values();
        let mut min = f64::INFINITY;
        for (i, j) in grid.nodes() {
            let (y, z) = (grid.s(i), grid.t(j));
            let (u, w, p) = match self {
                GraphFunction::Closed { profile, .. } => {
                    let g = profile.eval(y, z);
                    (g.u, g.uy, g.uz)
                }
                GraphFunction::Sampled(_) => {
                    let (w, p) = one_sided_gradient(&vals, i, j);
                    (vals.get(i, j), w, p)
                }
            };
            let v = translation_component(&sp, y, z, u, w, p)?;
            if !v.is_finite() {
                return Err(Error::Degenerate {
                    s: y,
                    t: z,
                    singular_values: [f64::NAN, f64::NAN],
                });
            }
            min = min.min(v.abs());
        }
        Ok(min)
    }
}

/// `⟨η, X⟩` of the graph with value `u` and gradient `(w, p)` at `(y, z)`.
fn translation_component(sp: &SpaceParams, y: f64, z: f64, u: f64, w: f64, p: f64) -> Result<f64> {
    let pt = AmbientPoint::new(u, y, z + TAU_NIL * y * u);
    let fy = geometry::Vec3::new(w, 1.0, TAU_NIL * (u + y * w));
    let fz = geometry::Vec3::new(p, 0.0, 1.0 + TAU_NIL * y * p);
    let x = KillingField::Translation.value(sp, &pt)?;
    let n = geometry::norm(sp, &pt, &geometry::cross(sp, &pt, &fy, &fz)?)?;
    Ok(geometry::volume_form(sp, &pt, &fy, &fz, &x)? / n)
}

fn stencil_jet(v: &ScalarFieldGrid, i: usize, j: usize) -> GraphJet {
    let (hy, hz) = (v.grid.hs(), v.grid.ht());
    let f = |a: isize, b: isize| v.get((i as isize + a) as usize, (j as isize + b) as usize);
    let c = f(0, 0);
    GraphJet {
        u: c,
        uy: (f(1, 0) - f(-1, 0)) / (2.0 * hy),
        uz: (f(0, 1) - f(0, -1)) / (2.0 * hz),
        uyy: (f(1, 0) - 2.0 * c + f(-1, 0)) / (hy * hy),
        uzz: (f(0, 1) - 2.0 * c + f(0, -1)) / (hz * hz),
        uyz: (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4.0 * hy * hz),
    }
}

fn one_sided_gradient(v: &ScalarFieldGrid, i: usize, j: usize) -> (f64, f64) {
    let d = |n: usize, h: f64, at: &dyn Fn(usize) -> f64, k: usize| {
        if k == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if k + 1 == n {
            (3.0 * at(k) - 4.0 * at(k - 1) + at(k - 2)) / (2.0 * h)
        } else {
            (at(k + 1) - at(k - 1)) / (2.0 * h)
        }
    };
    let g = v.grid;
    (
        d(g.ns, g.hs(), &|a| v.get(a, j), i),
        d(g.nt, g.ht(), &|b| v.get(i, b), j),
    )
}

/// Residual grid with trapezoid L² and sup norms.
#[derive(Clone, Debug)]
pub struct PdeResidual {
    pub values: ScalarFieldGrid,
    pub l2: f64,
    pub sup: f64,
    pub evaluated_nodes: usize,
}

impl PdeResidual {
    fn from_values(values: ScalarFieldGrid, evaluated_nodes: usize) -> Self {
        let g = values.grid;
        let l2 = g
            .nodes()
            .map(|(i, j)| g.trapezoid_weight(i, j) * values.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        let sup = values.max_abs();
        PdeResidual {
            values,
            l2,
            sup,
            evaluated_nodes,
        }
    }

    /// Every evaluated node is exactly zero.
    pub fn is_exactly_zero(&self) -> bool {
        self.values.values.iter().all(|v| *v == 0.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    /// `max |H|` over nodes with `|residual| < tol`.
    pub max_h_where_minimal: f64,
    pub minimal_nodes: usize,
    /// Fraction of the remaining nodes where `H` and the residual share a
    /// sign (the operator is a positive multiple of `H` for the declared normal).
    pub sign_agreement: f64,
    pub compared_nodes: usize,
    /// Nodes where the immersion was degenerate.
    pub excluded: usize,
}

/// Cross-checks the PDE residual against the mean curvature of the immersion.
pub fn consistency_vs_mean_curvature(gf: &GraphFunction, tol: f64) -> Result<ConsistencyReport> {
    let res = gf.residual();
    let imm = gf.immersion()?;
    let grid = gf.grid();
    let (mut max_h, mut minimal, mut agree, mut compared, mut excluded) = (0.0f64, 0, 0, 0, 0);
    for (i, j) in grid.nodes() {
        if gf.jet_at(i, j).is_none() {
            continue;
        }
        let h = match mean_curvature(imm.as_ref(), grid.s(i), grid.t(j)) {
            Ok(h) => h,
            Err(Error::Degenerate { .. }) => {
                excluded += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let r = res.values.get(i, j);
        if r.abs() < tol {
            minimal += 1;
            max_h = max_h.max(h.abs());
        } else {
            compared += 1;
            if r * h > 0.0 {
                agree += 1;
            }
        }
    }
    Ok(ConsistencyReport {
        max_h_where_minimal: max_h,
        minimal_nodes: minimal,
        sign_agreement: if compared > 0 { agree as f64 / compared as f64 } else { 1.0 },
        compared_nodes: compared,
        excluded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub damping_floor: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-8,
            max_iterations: 200,
            damping_floor: 1.0 / 1024.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DirichletSolution {
    pub solution: GraphFunction,
    pub iterations: usize,
    /// Residual sup norm before each step and after the last.
    pub history: Vec<f64>,
    /// Damping factor accepted at each step.
    pub steps: Vec<f64>,
    pub min_translation_component: f64,
}

impl DirichletSolution {
    pub fn final_residual(&self) -> f64 {
        *self.history.last().unwrap_or(&f64::NAN)
    }

    /// Ratio of the last two residual norms.
    pub fn final_ratio(&self) -> Option<f64> {
        let n = self.history.len();
        (n >= 2).then(|| self.history[n - 1] / self.history[n - 2])
    }

    pub fn summary(&self) -> DirichletSummary {
        let res = self.solution.residual();
        DirichletSummary {
            residual_sup: res.sup,
            residual_l2: res.l2,
            iterations: self.iterations,
            history: self.history.clone(),
            final_ratio: self.final_ratio(),
            min_translation_component: self.min_translation_component,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DirichletSummary {
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub final_ratio: Option<f64>,
    pub min_translation_component: f64,
}

/// Coons patch through the boundary values of `g` on `grid`.
pub fn transfinite_extension(grid: UniformGrid, g: &dyn Fn(f64, f64) -> f64) -> ScalarFieldGrid {
    let r = grid.rect;
    let (y0, y1, z0, z1) = (r.s0, r.s1, r.t0, r.t1);
    ScalarFieldGrid::from_fn(grid, |y, z| {
        let a = (y - y0) / (y1 - y0);
        let b = (z - z0) / (z1 - z0);
        (1.0 - a) * g(y0, z) + a * g(y1, z) + (1.0 - b) * g(y, z0) + b * g(y, z1)
            - ((1.0 - a) * (1.0 - b) * g(y0, z0)
                + a * (1.0 - b) * g(y1, z0)
                + (1.0 - a) * b * g(y0, z1)
                + a * b * g(y1, z1))
    })
}

struct Unknowns {
    ni: usize,
    nj: usize,
    y_fastest: bool,
}

impl Unknowns {
    fn len(&self) -> usize {
        self.ni * self.nj
    }

    fn band(&self) -> usize {
        if self.y_fastest {
            self.ni + 1
        } else {
            self.nj + 1
        }
    }

    /// Unknown index of interior node `(i, j)`, both 1-based on the full grid.
    fn index(&self, i: usize, j: usize) -> usize {
        if self.y_fastest {
            (i - 1) + (j - 1) * self.ni
        } else {
            (j - 1) + (i - 1) * self.nj
        }
    }
}

fn interior_residual(u: &ScalarFieldGrid, map: &Unknowns) -> Vec<f64> {
    let g = u.grid;
    let mut r = vec![0.0; map.len()];
    for j in 1..g.nt - 1 {
        for i in 1..g.ns - 1 {
            r[map.index(i, j)] = pde_operator(g.s(i), &stencil_jet(u, i, j));
        }
    }
    r
}

fn jacobian(u: &ScalarFieldGrid, map: &Unknowns) -> BandMatrix {
    let g = u.grid;
    let (hy, hz) = (g.hs(), g.ht());
    let bw = map.band();
    let mut jac = BandMatrix::zeros(map.len(), bw, bw);
    for j in 1..g.nt - 1 {
        for i in 1..g.ns - 1 {
            let y = g.s(i);
            let jet = stencil_jet(u, i, j);
            let (w, p) = (jet.uy, jet.uz);
            let c = 1.0 + y * y;
            let a11 = 1.0 + 2.0 * y * p + c * p * p;
            let a12 = -2.0 * w * (y + c * p);
            let a22 = 1.0 + c * w * w;
            let (dw, dp) = pde_gradient(y, &jet);
            let row = map.index(i, j);
            let mut put = |di: isize, dj: isize, v: f64| {
                let (ii, jj) = ((i as isize + di) as usize, (j as isize + dj) as usize);
                if v != 0.0 && !g.is_boundary(ii, jj) {
                    jac.add(row, map.index(ii, jj), v);
                }
            };
            put(0, 0, -2.0 * a11 / (hy * hy) - 2.0 * a22 / (hz * hz));
            put(1, 0, a11 / (hy * hy) + dw / (2.0 * hy));
            put(-1, 0, a11 / (hy * hy) - dw / (2.0 * hy));
            put(0, 1, a22 / (hz * hz) + dp / (2.0 * hz));
            put(0, -1, a22 / (hz * hz) - dp / (2.0 * hz));
            let m = a12 / (4.0 * hy * hz);
            put(1, 1, m);
            put(-1, -1, m);
            put(1, -1, -m);
            put(-1, 1, -m);
        }
    }
    jac
}

fn apply_step(u: &ScalarFieldGrid, delta: &[f64], t: f64, map: &Unknowns) -> ScalarFieldGrid {
    let mut out = u.clone();
    let g = u.grid;
    for j in 1..g.nt - 1 {
        for i in 1..g.ns - 1 {
            out.set(i, j, u.get(i, j) + t * delta[map.index(i, j)]);
        }
    }
    out
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves the minimal graph equation with Dirichlet data `boundary` on `grid`.
///
/// The boundary of `initial` (default: the transfinite extension of the data)
/// is replaced by the data before iterating.
pub fn solve_dirichlet(
    grid: UniformGrid,
    boundary: &dyn Fn(f64, f64) -> f64,
    initial: Option<&ScalarFieldGrid>,
    opts: &NewtonOptions,
) -> Result<DirichletSolution> {
    if grid.ns < 3 || grid.nt < 3 {
        return Err(Error::Resolution(format!("grid {}x{} has no interior", grid.ns, grid.nt)));
    }
    if !(opts.tol > 0.0) || !(opts.damping_floor > 0.0 && opts.damping_floor <= 1.0) {
        return Err(Error::Contract(format!("invalid Newton options {opts:?}")));
    }
    let mut u = match initial {
        Some(u0) if u0.grid == grid => u0.clone(),
        Some(_) => return Err(Error::Contract("initial guess lives on a different grid".into())),
        None => transfinite_extension(grid, boundary),
    };
    for (i, j) in grid.nodes() {
        if grid.is_boundary(i, j) {
            u.set(i, j, boundary(grid.s(i), grid.t(j)));
        }
    }
    let (ni, nj) = (grid.ns - 2, grid.nt - 2);
    let map = Unknowns { ni, nj, y_fastest: ni <= nj };
    let mut r = interior_residual(&u, &map);
    let mut history = vec![sup(&r)];
    let mut steps = Vec::new();
    let mut it = 0;
    while history[it] >= opts.tol {
        if it == opts.max_iterations || !history[it].is_finite() {
            return Err(Error::NoConvergence {
                iterations: it,
                last_residual: history[it],
                history,
            });
        }
        let lu = jacobian(&u, &map).lu().map_err(|e| match e {
            Error::Singular(k) => Error::Numeric(format!(
                "singular Newton Jacobian (pivot {k}) at iteration {it}; residual trace {history:?}"
            )),
            other => other,
        })?;
        let delta: Vec<f64> = lu.solve(&r).into_iter().map(|x| -x).collect();
        let r0 = norm2(&r);
        let mut t = 1.0;
        let accepted = loop {
            let cand = apply_step(&u, &delta, t, &map);
            let rc = interior_residual(&cand, &map);
            if norm2(&rc) <= (1.0 - 1e-4 * t) * r0 {
                break Some((cand, rc));
            }
            t *= 0.5;
            if t < opts.damping_floor {
                break None;
            }
        };
        let Some((cand, rc)) = accepted else {
            return Err(Error::NoConvergence {
                iterations: it,
                last_residual: history[it],
                history,
            });
        };
        u = cand;
        r = rc;
        steps.push(t);
        it += 1;
        history.push(sup(&r));
        debug!("newton step {it}: damping {t}, residual {:e}", history[it]);
    }
    info!("dirichlet solve converged in {it} steps, residual {:e}", history[it]);
    let solution = GraphFunction::Sampled(u);
    let min_translation_component = solution.min_translation_component()?;
    if !(min_translation_component > 0.0) {
        return Err(Error::Degenerate {
            s: f64::NAN,
            t: f64::NAN,
            singular_values: [min_translation_component, 0.0],
        });
    }
    Ok(DirichletSolution {
        solution,
        iterations: it,
        history,
        steps,
        min_translation_component,
    })
}

/// `det(T1, T2, X_α)` in frame components at the point of `M_θ` over `(x, y)`,
/// computed from the immersion jet.
pub fn fmp_tangency_determinant(theta: f64, alpha: f64, x: f64, y: f64) -> Result<f64> {
    let sp = SpaceParams::nil();
    let m = FmpSurface::new(theta, Rect::new(x - 1.0, x + 1.0, y - 1.0, y + 1.0)?);
    let jet = m.jet(x, y)?;
    let p = jet.point;
    let t1 = geometry::to_frame(&sp, &p, &jet.fs)?;
    let t2 = geometry::to_frame(&sp, &p, &jet.ft)?;
    let xa = geometry::to_frame(&sp, &p, &KillingField::Horizontal(alpha).value(&sp, &p)?)?;
    Ok(geometry::Mat3::from_columns(&[t1, t2, xa]).determinant())
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TangencyCurve {
    /// `X_α` is tangent to `M_θ` exactly along `x = −sinh(2θ)√(1+y²)`.
    Curve {
        /// Points `(x, y, z)` of the curve on the surface.
        points: Vec<[f64; 3]>,
        /// `max |⟨η, X_α⟩|` along the curve.
        max_on_curve: f64,
        /// `min |⟨η, X_α⟩|` at unit chart distance on either side of the curve.
        min_off_curve: f64,
    },
    /// `sin α = 0`: `X_α = ±X` is tangent to `M_θ` at every point.
    TangentEverywhere { max_abs: f64 },
}

/// Tangency locus of `X_α` on `M_θ` sampled at the heights `ys`.
pub fn fmp_tangency_curve(theta: f64, alpha: f64, ys: &[f64]) -> Result<TangencyCurve> {
    if ys.is_empty() {
        return Err(Error::Contract("no sample heights".into()));
    }
    let st = (2.0 * theta).sinh();
    let curve_x = |y: f64| -st * (1.0 + y * y).sqrt();
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
    let xmin = curve_x(lo.abs().max(hi.abs()));
    let m = FmpSurface::new(theta, Rect::new(xmin.min(0.0) - 2.0, 2.0 + xmin.abs(), lo - 1.0, hi + 1.0)?);
    let comp = |x: f64, y: f64| -> Result<f64> {
        Ok(jacobi_candidates(&m, x, y, Some(alpha))?.horizontal.unwrap_or(f64::NAN))
    };
    if alpha.sin().abs() < 1e-12 {
        let mut max_abs = 0.0f64;
        for &y in ys {
            for dx in [-1.0, 0.0, 1.0] {
                max_abs = max_abs.max(comp(curve_x(y) + dx, y)?.abs());
            }
        }
        return Ok(TangencyCurve::TangentEverywhere { max_abs });
    }
    let mut points = Vec::with_capacity(ys.len());
    let (mut on, mut off) = (0.0f64, f64::INFINITY);
    for &y in ys {
        let x = curve_x(y);
        points.push([x, y, m.height(x, y)]);
        on = on.max(comp(x, y)?.abs());
        off = off.min(comp(x - 1.0, y)?.abs()).min(comp(x + 1.0, y)?.abs());
    }
    Ok(TangencyCurve::Curve {
        points,
        max_on_curve: on,
        min_off_curve: off,
    })
}

/// Boundary data `a y + ε sin(πy) sin(πz)`; the perturbation vanishes on `∂[0,1]²`.
pub fn perturbed_plane_data(a: f64, eps: f64) -> impl Fn(f64, f64) -> f64 {
    move |y, z| a * y + eps * (PI * y).sin() * (PI * z).sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{AffineProfile, QuadraticProfile};

    fn unit_grid(n: usize) -> UniformGrid {
        UniformGrid::new(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), n, n).unwrap()
    }

    #[test]
    fn affine_profiles_are_exact_solutions() {
        let g = UniformGrid::new(Rect::new(-2.0, 2.0, -1.0, 3.0).unwrap(), 41, 37).unwrap();
        for (a, b, c) in [(0.0, 0.0, 0.0), (1.5, -2.0, 0.0), (-3.0, 0.25, 0.0), (0.0, 1.0, 2.0), (0.0, -4.0, -0.7)] {
            let r = GraphFunction::closed(AffineProfile { a, b, c }, g).residual();
            assert!(r.is_exactly_zero(), "a={a}, b={b}, c={c}: {}", r.sup);
            assert_eq!(r.evaluated_nodes, g.len());
        }
    }

    #[test]
    fn mixed_affine_is_not_minimal() {
        // u = y + z: u_yy = u_zz = u_yz = 0 but the zero-order term survives.
        let jet = GraphJet { u: 0.0, uy: 1.0, uz: 1.0, ..Default::default() };
        assert_eq!(pde_operator(0.0, &jet), -1.0);
    }

    #[test]
    fn square_profile_at_origin() {
        let jet = QuadraticProfile { cyy: 1.0, ..Default::default() }.eval(0.0, 0.0);
        assert_eq!(pde_operator(0.0, &jet), 2.0);
    }

    #[test]
    fn residual_invariances() {
        let g = unit_grid(21);
        let f = |y: f64, z: f64| (y * z).sin() + 0.3 * y * y;
        let base = GraphFunction::Sampled(ScalarFieldGrid::from_fn(g, f)).residual();
        let lifted = GraphFunction::Sampled(ScalarFieldGrid::from_fn(g, |y, z| f(y, z) + 0.75)).residual();
        assert!(base.values.values.iter().zip(&lifted.values.values).all(|(a, b)| (a - b).abs() < 1e-9));
        // z-translation by 5 grid steps shifts the residual grid.
        let dz = 5.0 * g.ht();
        let shifted = GraphFunction::Sampled(ScalarFieldGrid::from_fn(g, |y, z| f(y, z + dz))).residual();
        for j in 1..g.nt - 6 {
            for i in 1..g.ns - 1 {
                assert!((shifted.values.get(i, j) - base.values.get(i, j + 5)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn grid_residual_converges_to_closed_form() {
        let q = QuadraticProfile { cyy: 0.3, cyz: -0.2, czz: 0.5, cy: 0.1, cz: 0.4, c0: 0.0 };
        let mut errs = Vec::new();
        for n in [17, 33, 65] {
            let g = unit_grid(n);
            let exact = GraphFunction::closed(q, g).residual();
            let approx = GraphFunction::Sampled(ScalarFieldGrid::from_fn(g, |y, z| q.eval(y, z).u)).residual();
            let c = (n - 1) / 2;
            errs.push((exact.values.get(c, c) - approx.values.get(c, c)).abs());
        }
        // Quadratic data: all central differences are exact.
        assert!(errs.iter().all(|e| *e < 1e-9), "{errs:?}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = UniformGrid::new(Rect::new(-0.5, 1.0, 0.0, 1.2).unwrap(), 7, 6).unwrap();
        let u = ScalarFieldGrid::from_fn(g, |y, z| (1.3 * y + 0.4 * z).sin() + y * z * z);
        let map = Unknowns { ni: 5, nj: 4, y_fastest: false };
        let jac = jacobian(&u, &map);
        let base = interior_residual(&u, &map);
        let h = 1e-6;
        for j in 1..g.nt - 1 {
            for i in 1..g.ns - 1 {
                let mut e = vec![0.0; map.len()];
                e[map.index(i, j)] = 1.0;
                let rp = interior_residual(&apply_step(&u, &e, h, &map), &map);
                let rm = interior_residual(&apply_step(&u, &e, -h, &map), &map);
                for row in 0..map.len() {
                    let fd = (rp[row] - rm[row]) / (2.0 * h);
                    let an = jac.get(row, map.index(i, j));
                    assert!((fd - an).abs() < 1e-4 * (1.0 + an.abs()), "{fd} vs {an}");
                }
                let _ = &base;
            }
        }
    }

    #[test]
    fn affine_data_are_recovered() {
        let g = unit_grid(33);
        for (a, b, c, d) in [(1.0, 0.5, 0.0, 0.0), (-2.0, 0.0, 0.0, 0.0), (0.0, 0.0, 1.5, -1.0)] {
            let exact = move |y: f64, z: f64| a * y + b + c * z + d;
            // Start far from the solution so Newton has work to do.
            let u0 = ScalarFieldGrid::from_fn(g, |y, z| exact(y, z) + 0.2 * (PI * y).sin() * (PI * z).sin());
            let sol = solve_dirichlet(g, &exact, Some(&u0), &NewtonOptions::default()).unwrap();
            let err = sol
                .solution
                .values()
                .values
                .iter()
                .zip(ScalarFieldGrid::from_fn(g, exact).values)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err < 1e-10, "{err}");
            assert!(sol.min_translation_component > 0.0);
        }
    }

    #[test]
    fn perturbed_problem_converges_quadratically() {
        let g = unit_grid(41);
        let data = |y: f64, z: f64| 0.8 * y + 0.3 * (y * y - z * z) + 0.2 * (2.0 * z).sin();
        let sol = solve_dirichlet(g, &data, None, &NewtonOptions::default()).unwrap();
        assert!(sol.final_residual() < 1e-8);
        assert!(sol.iterations >= 2);
        assert!(sol.final_ratio().unwrap() < 0.1, "{:?}", sol.history);
        assert!(sol.min_translation_component > 0.0);
        let c = consistency_vs_mean_curvature(&sol.solution, 1e-6).unwrap();
        assert_eq!(c.minimal_nodes, 39 * 39);
    }

    #[test]
    fn solved_graph_mean_curvature_vanishes_under_refinement() {
        let data = |y: f64, z: f64| 0.8 * y + 0.3 * (y * y - z * z) + 0.2 * (2.0 * z).sin();
        let inner_h = |n: usize| {
            let g = unit_grid(n);
            let sol = solve_dirichlet(g, &data, None, &NewtonOptions::default()).unwrap();
            let imm = sol.solution.immersion().unwrap();
            let (lo, hi) = ((n - 1) / 4, 3 * (n - 1) / 4);
            let mut m = 0.0f64;
            for i in lo..=hi {
                for j in lo..=hi {
                    m = m.max(mean_curvature(imm.as_ref(), g.s(i), g.t(j)).unwrap().abs());
                }
            }
            m
        };
        let (coarse, fine) = (inner_h(21), inner_h(41));
        assert!(fine < 1e-3 && coarse / fine > 3.0, "{coarse} {fine}");
    }

    #[test]
    fn small_interior_perturbation_relaxes_to_the_plane() {
        let g = unit_grid(33);
        let eps = 0.05;
        let data = perturbed_plane_data(0.7, eps);
        let u0 = ScalarFieldGrid::from_fn(g, &data);
        let sol = solve_dirichlet(g, &data, Some(&u0), &NewtonOptions::default()).unwrap();
        let dist = sol
            .solution
            .values()
            .values
            .iter()
            .zip(ScalarFieldGrid::from_fn(g, |y, _| 0.7 * y).values)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(dist < 1e-8, "{dist}");
    }

    #[test]
    fn solver_rejects_bad_input() {
        let g = UniformGrid::new(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 2, 5).unwrap();
        assert!(matches!(solve_dirichlet(g, &|_, _| 0.0, None, &NewtonOptions::default()), Err(Error::Resolution(_))));
        let g = unit_grid(9);
        let opts = NewtonOptions { max_iterations: 0, ..Default::default() };
        let r = solve_dirichlet(g, &|y, z| y * y + z, None, &opts);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn residual_sign_tracks_mean_curvature() {
        let g = UniformGrid::new(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 21, 21).unwrap();
        let q = QuadraticProfile { cyy: 1.0, cz: 0.3, ..Default::default() };
        let rep = consistency_vs_mean_curvature(&GraphFunction::closed(q, g), 1e-12).unwrap();
        assert!(rep.compared_nodes > 300);
        assert!(rep.sign_agreement == 1.0, "{rep:?}");
        let plane = consistency_vs_mean_curvature(&GraphFunction::closed(AffineProfile { a: 2.0, b: 1.0, c: 0.0 }, g), 1e-12).unwrap();
        assert_eq!(plane.minimal_nodes, g.len());
        assert!(plane.max_h_where_minimal < 1e-10);
        let big = UniformGrid::new(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 128, 128).unwrap();
        let tilted = consistency_vs_mean_curvature(&GraphFunction::closed(AffineProfile { a: 0.0, b: 1.0, c: 2.0 }, big), 1e-12).unwrap();
        assert!(tilted.max_h_where_minimal < 1e-6);
    }

    #[test]
    fn tangency_determinant_closed_form() {
        for theta in [0.0, 0.4, 1.0] {
            for alpha in [0.3, PI / 4.0, PI / 2.0, 2.0] {
                for (x, y) in [(0.0, 0.0), (-1.3, 0.7), (2.0, -1.5)] {
                    let d = fmp_tangency_determinant(theta, alpha, x, y).unwrap();
                    let expect = -alpha.sin() * (x + (2.0 * theta).sinh() * (1.0 + y * y).sqrt());
                    assert!((d - expect).abs() < 1e-12, "{d} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn tangency_curves() {
        let ys: Vec<f64> = (0..21).map(|k| -1.0 + 0.1 * k as f64).collect();
        for (theta, alpha) in [(0.0, PI / 2.0), (1.0, PI / 4.0)] {
            match fmp_tangency_curve(theta, alpha, &ys).unwrap() {
                TangencyCurve::Curve { points, max_on_curve, min_off_curve } => {
                    assert!(max_on_curve < 1e-8, "{max_on_curve}");
                    assert!(min_off_curve > 1e-3);
                    if theta == 0.0 {
                        assert!(points.iter().all(|p| p[0] == 0.0 && p[2] == 0.0));
                    }
                }
                other => panic!("{other:?}"),
            }
        }
        match fmp_tangency_curve(0.5, 0.0, &ys).unwrap() {
            TangencyCurve::TangentEverywhere { max_abs } => assert!(max_abs < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
