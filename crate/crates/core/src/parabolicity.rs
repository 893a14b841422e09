//! Cutoff energies, the cutoff estimate chain for ratios of solutions, and
//! geodesic-ball area growth on model surfaces.
//!
//! Model surfaces are rotationally symmetric metrics `dr² + f(r)² dθ²`.
//! A cutoff equals 1 on `r ≤ r_j`, tapers to 0 on `[r_j, R_j]` and vanishes
//! beyond. All integrals use the midpoint rule on a polar grid whose radial
//! nodes include every `r_j` and `R_j`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use log::warn;
use ordered_float::OrderedFloat;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_RADIAL_NODES: usize = 64;

/// Warping function of a rotational metric.
#[derive(Clone)]
pub enum RotationalModel {
    /// `f(r) = r`.
    Plane,
    /// Half-cylinder `S¹ × [0, ∞)`, `f = circumference / 2π`.
    Cylinder { circumference: f64 },
    /// `f(r) = sinh r`.
    Hyperbolic,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RotationalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RotationalModel::Plane => write!(f, "Plane"),
            RotationalModel::Cylinder { circumference } => write!(f, "Cylinder({circumference})"),
            RotationalModel::Hyperbolic => write!(f, "Hyperbolic"),
            RotationalModel::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl RotationalModel {
    pub fn warp(&self, r: f64) -> f64 {
        match self {
            RotationalModel::Plane => r,
            RotationalModel::Cylinder { circumference } => circumference / TAU,
            RotationalModel::Hyperbolic => r.sinh(),
            RotationalModel::Custom(f) => f(r),
        }
    }

    fn warp_derivative(&self, r: f64) -> f64 {
        match self {
            RotationalModel::Plane => 1.0,
            RotationalModel::Cylinder { .. } => 0.0,
            RotationalModel::Hyperbolic => r.cosh(),
            RotationalModel::Custom(f) => {
                let h = 1e-5 * r.abs().max(1.0);
                (f(r + h) - f(r - h)) / (2.0 * h)
            }
        }
    }

    /// `∫_a^b dr / f(r)`, the radial resistance of an annulus.
    pub fn resistance(&self, a: f64, b: f64) -> f64 {
        match self {
            RotationalModel::Plane => (b / a).ln(),
            RotationalModel::Cylinder { circumference } => (b - a) * TAU / circumference,
            RotationalModel::Hyperbolic => ((0.5 * b).tanh() / (0.5 * a).tanh()).ln(),
            RotationalModel::Custom(f) => {
                // Composite Simpson in log r when a > 0, in r otherwise.
                let n = 2048;
                if a > 0.0 {
                    let (la, lb) = (a.ln(), b.ln());
                    let h = (lb - la) / n as f64;
                    simpson(n, h, |k| {
                        let r = (la + k as f64 * h).exp();
                        r / f(r)
                    })
                } else {
                    let h = (b - a) / n as f64;
                    simpson(n, h, |k| 1.0 / f(a + k as f64 * h))
                }
            }
        }
    }
}

fn simpson(n: usize, h: f64, g: impl Fn(usize) -> f64) -> f64 {
    let mut s = g(0) + g(n);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k);
    }
    s * h / 3.0
}

/// Radial profile of the cutoff on the annulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    /// `1 − ln(r/r_j) / ln(R_j/r_j)`.
    Log,
    Linear,
    /// `(1 + cos(π s)) / 2` in the normalized radius `s`.
    Cosine,
    /// Capacitary potential of the annulus for the model metric.
    Harmonic,
}

impl std::str::FromStr for Taper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Taper::Log),
            "linear" => Ok(Taper::Linear),
            "cosine" => Ok(Taper::Cosine),
            "harmonic" => Ok(Taper::Harmonic),
            other => Err(Error::Parse(format!("unknown taper '{other}'"))),
        }
    }
}

/// Cutoffs `φ_j`, `j = 1..=len`, on a rotational model.
#[derive(Clone, Debug)]
pub struct CutoffFamily {
    model: RotationalModel,
    radii: Vec<(f64, f64)>,
    taper: Taper,
}

impl CutoffFamily {
    pub fn new(model: RotationalModel, radii: Vec<(f64, f64)>, taper: Taper) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Contract("cutoff family needs at least one member".into()));
        }
        for (j, &(r, big)) in radii.iter().enumerate() {
            if !big.is_finite() {
                return Err(Error::Contract(format!(
                    "member {}: outer radius {big} gives no compact support",
                    j + 1
                )));
            }
            if !(r >= 0.0) || big <= r {
                return Err(Error::Contract(format!(
                    "member {}: annulus [{r}, {big}] has no taper region",
                    j + 1
                )));
            }
            if taper == Taper::Log && r == 0.0 {
                return Err(Error::Contract("logarithmic taper needs a positive inner radius".into()));
            }
        }
        if radii.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::Contract("inner radii must be nondecreasing".into()));
        }
        Ok(CutoffFamily { model, radii, taper })
    }

    /// Plane with `r_j = j r₀`, `R_j = e^j r_j`, logarithmic taper.
    pub fn log_plane(r0: f64, members: usize) -> Result<Self> {
        let radii = (1..=members).map(|j| (j as f64 * r0, (j as f64).exp() * j as f64 * r0)).collect();
        CutoffFamily::new(RotationalModel::Plane, radii, Taper::Log)
    }

    /// Half-cylinder with `r_j = j·step`, linear taper of length `lengths[j−1]`.
    pub fn linear_cylinder(circumference: f64, step: f64, lengths: &[f64]) -> Result<Self> {
        let radii = lengths
            .iter()
            .enumerate()
            .map(|(j, l)| ((j + 1) as f64 * step, (j + 1) as f64 * step + l))
            .collect();
        CutoffFamily::new(RotationalModel::Cylinder { circumference }, radii, Taper::Linear)
    }

    pub fn model(&self) -> &RotationalModel {
        &self.model
    }

    pub fn taper(&self) -> Taper {
        self.taper
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// `(r_j, R_j)` for `1 ≤ j ≤ len`.
    pub fn radii(&self, j: usize) -> Result<(f64, f64)> {
        if j == 0 || j > self.radii.len() {
            return Err(Error::Contract(format!("cutoff index {j} outside 1..={}", self.radii.len())));
        }
        Ok(self.radii[j - 1])
    }

    /// `φ_j(r)`.
    pub fn profile(&self, j: usize, r: f64) -> Result<f64> {
        let (a, b) = self.radii(j)?;
        Ok(self.profile_on(a, b, r))
    }

    fn profile_on(&self, a: f64, b: f64, r: f64) -> f64 {
        if r <= a {
            return 1.0;
        }
        if r >= b {
            return 0.0;
        }
        let x = (r - a) / (b - a);
        match self.taper {
            Taper::Log => 1.0 - (r / a).ln() / (b / a).ln(),
            Taper::Linear => 1.0 - x,
            Taper::Cosine => 0.5 * (1.0 + (PI * x).cos()),
            Taper::Harmonic => 1.0 - self.model.resistance(a, r) / self.model.resistance(a, b),
        }
        .clamp(0.0, 1.0)
    }
}

/// `cells` radial cells on `[a, b]`, geometric when `a > 0`.
fn radial_segment(a: f64, b: f64, cells: usize) -> Vec<f64> {
    (0..=cells)
        .map(|k| {
            let x = k as f64 / cells as f64;
            if k == cells {
                b
            } else if a > 0.0 {
                a * (b / a).powf(x)
            } else {
                a + (b - a) * x
            }
        })
        .collect()
}

/// `E(φ_j) = ∫ |∇φ_j|²` on `nodes` radial nodes across the annulus.
pub fn cutoff_energy(family: &CutoffFamily, j: usize, nodes: usize) -> Result<f64> {
    let (a, b) = family.radii(j)?;
    if nodes < MIN_RADIAL_NODES {
        return Err(Error::Resolution(format!(
            "annulus resolved by {nodes} radial nodes, at least {MIN_RADIAL_NODES} required"
        )));
    }
    let rs = radial_segment(a, b, nodes - 1);
    Ok(radial_energy(family, a, b, &rs))
}

fn radial_energy(family: &CutoffFamily, a: f64, b: f64, rs: &[f64]) -> f64 {
    rs.windows(2)
        .map(|w| {
            let dr = w[1] - w[0];
            let dphi = family.profile_on(a, b, w[1]) - family.profile_on(a, b, w[0]);
            (dphi / dr).powi(2) * family.model.warp(0.5 * (w[0] + w[1])) * dr * TAU
        })
        .sum()
}

/// Flat-annulus capacity `2π / ln(R/r)` of the plane.
pub fn plane_capacity(r: f64, big: f64) -> f64 {
    TAU / (big / r).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainOptions {
    pub angular_nodes: usize,
    /// Radial cells per unit of `ln r` (and on the initial linear segment).
    pub radial_density: usize,
    /// Relative slack allowed in each inequality.
    pub tolerance: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            angular_nodes: 128,
            radial_density: 64,
            tolerance: 1e-3,
        }
    }
}

/// One cutoff of the chain. `ratio` is `u/v`.
#[derive(Clone, Debug, Serialize)]
pub struct ChainRow {
    pub j: usize,
    pub r_inner: f64,
    pub r_outer: f64,
    pub energy: f64,
    /// `∫_{Ω_j} v² |∇ ratio|²`.
    pub inner_term: f64,
    /// `∫_{annulus} φ_j² v² |∇ ratio|²`.
    pub annulus_term: f64,
    /// `∫_{annulus} u² |∇φ_j|²`, bounded by `C·E(φ_j)`.
    pub weighted_energy: f64,
    /// `4 C E(φ_j)`.
    pub bound: f64,
    /// `inner + annulus ≤ 2 √(C E) √annulus`.
    pub combined_ok: bool,
    /// `annulus ≤ 4 C E`.
    pub annulus_ok: bool,
    /// `inner ≤ 4 C E`.
    pub inner_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    /// `C = sup u²` over the computational window.
    pub sup_u2: f64,
    /// Whether `u · div(v² ∇(u/v)) ≥ 0` held at every sampled node.
    pub hypothesis_holds: bool,
    pub hypothesis_min: f64,
    /// Area-weighted variance of `u/v` over the window.
    pub ratio_variance: f64,
    pub rows: Vec<ChainRow>,
}

impl ChainReport {
    pub fn all_inequalities_hold(&self) -> bool {
        self.rows.iter().all(|r| r.combined_ok && r.annulus_ok && r.inner_ok)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wr.serialize(row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Polar grid shared by every member of a family.
struct PolarGrid {
    rs: Vec<f64>,
    nth: usize,
}

impl PolarGrid {
    fn new(family: &CutoffFamily, opts: &ChainOptions) -> Self {
        let mut breaks: Vec<f64> = vec![0.0];
        for &(a, b) in &family.radii {
            breaks.push(a);
            breaks.push(b);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs().max(1.0));
        let mut rs = vec![0.0];
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let cells = if a > 0.0 {
                ((b / a).ln() * opts.radial_density as f64).ceil().max(4.0) as usize
            } else {
                opts.radial_density
            };
            rs.extend_from_slice(&radial_segment(a, b, cells)[1..]);
        }
        PolarGrid { rs, nth: opts.angular_nodes }
    }

    fn theta(&self, l: usize) -> f64 {
        TAU * l as f64 / self.nth as f64
    }

    fn sample(&self, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rs.len() * self.nth);
        for &r in &self.rs {
            for l in 0..self.nth {
                out.push(f(r, self.theta(l)));
            }
        }
        out
    }
}

/// Checks the estimate chain for `u/v` against every cutoff of `family`.
///
/// `u` and `v` are functions of polar coordinates `(r, θ)`; `v` must be positive.
pub fn cutoff_chain_check(
    family: &CutoffFamily,
    u: &dyn Fn(f64, f64) -> f64,
    v: &dyn Fn(f64, f64) -> f64,
    opts: &ChainOptions,
) -> Result<ChainReport> {
    if opts.angular_nodes < 8 || opts.radial_density < 8 || !(opts.tolerance > 0.0) {
        return Err(Error::Contract(format!("invalid chain options {opts:?}")));
    }
    let grid = PolarGrid::new(family, opts);
    let (nth, nr) = (grid.nth, grid.rs.len());
    let us = grid.sample(u);
    let vs = grid.sample(v);
    if let Some(k) = vs.iter().position(|x| !(*x > 0.0)) {
        return Err(Error::Precondition(format!(
            "v = {} is not positive at r = {}, theta = {}",
            vs[k],
            grid.rs[k / nth],
            grid.theta(k % nth)
        )));
    }
    let w: Vec<f64> = us.iter().zip(&vs).map(|(a, b)| a / b).collect();
    let idx = |k: usize, l: usize| k * nth + (l % nth);
    let model = &family.model;
    let dth = TAU / nth as f64;

    // Per-cell density v²|∇(u/v)|² and area.
    let ncell = (nr - 1) * nth;
    let mut dens = vec![0.0; ncell];
    let mut area = vec![0.0; ncell];
    let mut mean_w = 0.0;
    let mut total = 0.0;
    for k in 0..nr - 1 {
        let dr = grid.rs[k + 1] - grid.rs[k];
        let rm = 0.5 * (grid.rs[k] + grid.rs[k + 1]);
        let f = model.warp(rm);
        for l in 0..nth {
            let c = [idx(k, l), idx(k + 1, l), idx(k, l + 1), idx(k + 1, l + 1)];
            let wr = 0.5 * ((w[c[1]] - w[c[0]]) + (w[c[3]] - w[c[2]])) / dr;
            let wt = 0.5 * ((w[c[2]] - w[c[0]]) + (w[c[3]] - w[c[1]])) / dth;
            let vm = 0.25 * c.iter().map(|&i| vs[i]).sum::<f64>();
            let cell = k * nth + l;
            dens[cell] = vm * vm * (wr * wr + wt * wt / (f * f));
            area[cell] = f * dr * dth;
            let wm = 0.25 * c.iter().map(|&i| w[i]).sum::<f64>();
            mean_w += wm * area[cell];
            total += area[cell];
        }
    }
    mean_w /= total;
    let mut ratio_variance = 0.0;
    for k in 0..nr - 1 {
        for l in 0..nth {
            let c = [idx(k, l), idx(k + 1, l), idx(k, l + 1), idx(k + 1, l + 1)];
            let wm = 0.25 * c.iter().map(|&i| w[i]).sum::<f64>();
            ratio_variance += (wm - mean_w).powi(2) * area[k * nth + l];
        }
    }
    ratio_variance /= total;
    let sup_u2 = us.iter().fold(0.0f64, |m, x| m.max(x * x));

    let hypothesis_min = hypothesis_minimum(&grid, model, &us, &vs);
    let hscale = us.iter().fold(0.0f64, |m, x| m.max(x.abs())).powi(2).max(1e-300);
    let hypothesis_holds = hypothesis_min >= -1e-8 * hscale;

    let mut rows = Vec::with_capacity(family.len());
    for j in 1..=family.len() {
        let (a, b) = family.radii(j)?;
        let (mut inner, mut ann, mut weighted, mut energy) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..nr - 1 {
            let (r0, r1) = (grid.rs[k], grid.rs[k + 1]);
            if r0 >= b * (1.0 - 1e-12) {
                break;
            }
            let dr = r1 - r0;
            let (p0, p1) = (family.profile_on(a, b, r0), family.profile_on(a, b, r1));
            let pm = 0.5 * (p0 + p1);
            let gp2 = ((p1 - p0) / dr).powi(2);
            let in_omega = r1 <= a * (1.0 + 1e-12);
            for l in 0..nth {
                let cell = k * nth + l;
                if in_omega {
                    inner += dens[cell] * area[cell];
                } else {
                    let c = [idx(k, l), idx(k + 1, l), idx(k, l + 1), idx(k + 1, l + 1)];
                    let um2 = 0.25 * c.iter().map(|&i| us[i] * us[i]).sum::<f64>();
                    ann += pm * pm * dens[cell] * area[cell];
                    weighted += um2 * gp2 * area[cell];
                    energy += gp2 * area[cell];
                }
            }
        }
        let bound = 4.0 * sup_u2 * energy;
        let rhs = 2.0 * (sup_u2 * energy).sqrt() * ann.sqrt();
        let tol = opts.tolerance;
        let slack = |lhs: f64, rhs: f64| tol * (lhs.abs() + rhs.abs()) + 1e-14;
        rows.push(ChainRow {
            j,
            r_inner: a,
            r_outer: b,
            energy,
            inner_term: inner,
            annulus_term: ann,
            weighted_energy: weighted,
            bound,
            combined_ok: inner + ann <= rhs + slack(inner + ann, rhs),
            annulus_ok: ann <= bound + slack(ann, bound),
            inner_ok: inner <= bound + slack(inner, bound),
        });
    }
    Ok(ChainReport {
        sup_u2,
        hypothesis_holds,
        hypothesis_min,
        ratio_variance,
        rows,
    })
}

/// Minimum over interior nodes of `u (v Δu − u Δv)`.
fn hypothesis_minimum(grid: &PolarGrid, model: &RotationalModel, us: &[f64], vs: &[f64]) -> f64 {
    let nth = grid.nth;
    let dth = TAU / nth as f64;
    let lap = |vals: &[f64], k: usize, l: usize| {
        let (r0, r, r1) = (grid.rs[k - 1], grid.rs[k], grid.rs[k + 1]);
        let (h1, h2) = (r - r0, r1 - r);
        let at = |kk: usize, ll: usize| vals[kk * nth + (ll + nth) % nth];
        let (wm, w0, wp) = (at(k - 1, l), at(k, l), at(k + 1, l));
        let denom = h1 * h2 * (h1 + h2);
        let wr = (h1 * h1 * wp - h2 * h2 * wm + (h2 * h2 - h1 * h1) * w0) / denom;
        let wrr = 2.0 * (h1 * wp - (h1 + h2) * w0 + h2 * wm) / denom;
        let wtt = (at(k, l + 1) - 2.0 * w0 + at(k, l + nth - 1)) / (dth * dth);
        let f = model.warp(r);
        wrr + model.warp_derivative(r) / f * wr + wtt / (f * f)
    };
    let mut min = f64::INFINITY;
    for k in 1..grid.rs.len() - 1 {
        if model.warp(grid.rs[k]) <= 0.0 {
            continue;
        }
        for l in 0..nth {
            let i = k * nth + l;
            let h = us[i] * (vs[i] * lap(us, k, l) - us[i] * lap(vs, k, l));
            min = min.min(h);
        }
    }
    min
}

/// Metric `E dx² + 2F dx dy + G dy²` sampled on a uniform chart grid.
#[derive(Clone, Debug)]
pub struct MetricGrid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    /// Identify `x0` with `x0 + nx·h`.
    pub periodic_x: bool,
    /// `None` outside the chart.
    pub metric: Vec<Option<[f64; 3]>>,
}

impl MetricGrid {
    pub fn from_fn(
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        h: f64,
        periodic_x: bool,
        g: impl Fn(f64, f64) -> Option<[f64; 3]>,
    ) -> Result<Self> {
        if nx < 3 || ny < 3 || !(h > 0.0) {
            return Err(Error::Resolution(format!("metric grid {nx}x{ny} with spacing {h}")));
        }
        let mut metric = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                metric.push(g(x0 + i as f64 * h, y0 + j as f64 * h));
            }
        }
        Ok(MetricGrid {
            nx,
            ny,
            x0,
            y0,
            h,
            periodic_x,
            metric,
        })
    }

    /// Euclidean square `[−half, half]²`.
    pub fn plane(half: f64, n: usize) -> Result<Self> {
        let h = 2.0 * half / (n - 1) as f64;
        MetricGrid::from_fn(n, n, -half, -half, h, false, |_, _| Some([1.0, 0.0, 1.0]))
    }

    /// Flat cylinder of the given circumference, axial extent `[−half, half]`.
    pub fn cylinder(circumference: f64, half: f64, around: usize) -> Result<Self> {
        let h = circumference / around as f64;
        let ny = (2.0 * half / h).round() as usize + 1;
        MetricGrid::from_fn(around, ny, 0.0, -half, h, true, |_, _| Some([1.0, 0.0, 1.0]))
    }

    /// Conformal disk model of curvature −1, `λ² |dw|²` with `λ = 1/(1 − |w|²/4)`.
    pub fn hyperbolic_disk(n: usize) -> Result<Self> {
        let h = 4.0 / (n - 1) as f64;
        MetricGrid::from_fn(n, n, -2.0, -2.0, h, false, |x, y| {
            let d = 1.0 - 0.25 * (x * x + y * y);
            (d > 1e-3).then(|| {
                let l2 = 1.0 / (d * d);
                [l2, 0.0, l2]
            })
        })
    }

    fn norm(&self, k: usize, dx: f64, dy: f64) -> Option<f64> {
        self.metric[k].map(|[e, f, g]| (e * dx * dx + 2.0 * f * dx * dy + g * dy * dy).sqrt())
    }

    fn nearest(&self, x: f64, y: f64) -> Option<usize> {
        let i = ((x - self.x0) / self.h).round();
        let j = ((y - self.y0) / self.h).round();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some(j as usize * self.nx + i as usize)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub r: f64,
    pub vol: f64,
    pub ratio: f64,
    /// The ball touched the edge of the window.
    pub truncated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub base_point: (f64, f64),
    pub rows: Vec<GrowthRow>,
    /// Slope of `ln Vol` against `ln r` over the upper half of the radii.
    pub exponent: f64,
    /// `exponent ≤ 2.5`; a heuristic label, not a proof of quadratic growth.
    pub quadratic: bool,
}

impl GrowthReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["r", "vol", "ratio", "truncated"])?;
        for row in &self.rows {
            wr.write_record([row.r.to_string(), row.vol.to_string(), row.ratio.to_string(), row.truncated.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Coprime offsets with entries in `[−3, 3]`.
fn stencil() -> Vec<(i64, i64)> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut out = Vec::new();
    for dy in -3i64..=3 {
        for dx in -3i64..=3 {
            if (dx, dy) != (0, 0) && gcd(dx, dy) == 1 {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Graph distances from `p0` on the metric grid (Dijkstra over a 32-neighbour stencil).
pub fn grid_distances(m: &MetricGrid, p0: (f64, f64)) -> Result<Vec<f64>> {
    let start = m
        .nearest(p0.0, p0.1)
        .filter(|&k| m.metric[k].is_some())
        .ok_or_else(|| Error::Contract(format!("base point {p0:?} lies outside the metric window")))?;
    let offsets = stencil();
    let mut dist = vec![f64::INFINITY; m.metric.len()];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Reverse((OrderedFloat(0.0), start)));
    while let Some(Reverse((OrderedFloat(d), k))) = heap.pop() {
        if d > dist[k] {
            continue;
        }
        let (i, j) = ((k % m.nx) as i64, (k / m.nx) as i64);
        for &(dx, dy) in &offsets {
            let (mut ni, nj) = (i + dx, j + dy);
            if m.periodic_x {
                ni = ni.rem_euclid(m.nx as i64);
            }
            if ni < 0 || nj < 0 || ni >= m.nx as i64 || nj >= m.ny as i64 {
                continue;
            }
            let nk = nj as usize * m.nx + ni as usize;
            let (ex, ey) = (dx as f64 * m.h, dy as f64 * m.h);
            // Trapezoid rule for the segment length.
            let (Some(a), Some(b)) = (m.norm(k, ex, ey), m.norm(nk, ex, ey)) else { continue };
            let nd = d + 0.5 * (a + b);
            if nd < dist[nk] {
                dist[nk] = nd;
                heap.push(Reverse((OrderedFloat(nd), nk)));
            }
        }
    }
    Ok(dist)
}

/// `Vol(B(p₀, r))` and `r⁻² Vol` for each radius.
pub fn area_growth(m: &MetricGrid, p0: (f64, f64), radii: &[f64]) -> Result<GrowthReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract("radii must be positive and increasing".into()));
    }
    let dist = grid_distances(m, p0)?;
    let on_edge = |k: usize| {
        let (i, j) = (k % m.nx, k / m.nx);
        j == 0 || j + 1 == m.ny || (!m.periodic_x && (i == 0 || i + 1 == m.nx))
            || m.metric[k].is_none()
    };
    // (distance, cell area, touches the window edge) per node.
    let mut cells: Vec<(f64, f64, bool)> = (0..dist.len())
        .filter_map(|k| {
            let [e, f, g] = m.metric[k]?;
            let edge = on_edge(k)
                || [1usize, m.nx].iter().any(|&o| {
                    (k >= o && m.metric[k - o].is_none()) || (k + o < dist.len() && m.metric[k + o].is_none())
                });
            Some((dist[k], (e * g - f * f).sqrt() * m.h * m.h, edge))
        })
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rows = Vec::with_capacity(radii.len());
    let (mut acc, mut idx, mut touched) = (0.0, 0usize, false);
    for &r in radii {
        while idx < cells.len() && cells[idx].0 <= r {
            acc += cells[idx].1;
            touched |= cells[idx].2;
            idx += 1;
        }
        if touched {
            warn!("geodesic ball of radius {r} reaches the edge of the metric window; volume truncated");
        }
        rows.push(GrowthRow {
            r,
            vol: acc,
            ratio: acc / (r * r),
            truncated: touched,
        });
    }
    let upper = &rows[rows.len() / 2..];
    let exponent = if upper.len() >= 2 {
        let n = upper.len() as f64;
        let (xs, ys): (Vec<f64>, Vec<f64>) = upper.iter().map(|r| (r.r.ln(), r.vol.max(1e-300).ln())).unzip();
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(GrowthReport {
        base_point: p0,
        rows,
        exponent,
        quadratic: exponent <= 2.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_cutoffs_on_the_plane_match_capacity() {
        let fam = CutoffFamily::log_plane(1.0, 8).unwrap();
        for j in 1..=8 {
            let e = cutoff_energy(&fam, j, 256).unwrap();
            let exact = TAU / j as f64;
            assert!((e - exact).abs() / exact < 1e-3, "j={j}: {e} vs {exact}");
        }
        // Energy scales as 1/ln(R/r): fitted exponent of energy vs j is −1.
        let (x1, x2) = ((2.0f64).ln(), (8.0f64).ln());
        let (e1, e2) = (cutoff_energy(&fam, 2, 256).unwrap(), cutoff_energy(&fam, 8, 256).unwrap());
        let slope = (e2.ln() - e1.ln()) / (x2 - x1);
        assert!((slope + 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn linear_taper_on_cylinder() {
        let fam = CutoffFamily::linear_cylinder(3.0, 1.0, &[2.0, 5.0, 10.0]).unwrap();
        for (j, l) in [(1, 2.0), (2, 5.0), (3, 10.0)] {
            let e = cutoff_energy(&fam, j, 64).unwrap();
            assert!((e - 3.0 / l).abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn harmonic_taper_is_minimal() {
        let annulus = vec![(1.0, 2f64.exp())];
        let energy = |t: Taper, m: RotationalModel| {
            cutoff_energy(&CutoffFamily::new(m, annulus.clone(), t).unwrap(), 1, 512).unwrap()
        };
        let log = energy(Taper::Log, RotationalModel::Plane);
        for t in [Taper::Linear, Taper::Cosine] {
            assert!(energy(t, RotationalModel::Plane) > log * 1.01);
        }
        assert!((energy(Taper::Harmonic, RotationalModel::Plane) - log).abs() < 1e-10);
        // On the hyperbolic plane the capacitary profile beats the log one.
        let hyp_log = energy(Taper::Log, RotationalModel::Hyperbolic);
        let hyp_h = energy(Taper::Harmonic, RotationalModel::Hyperbolic);
        let exact = TAU / RotationalModel::Hyperbolic.resistance(1.0, 2f64.exp());
        assert!(hyp_h < hyp_log);
        assert!((hyp_h - exact).abs() / exact < 1e-3);
        // A custom warp equal to sinh reproduces the closed-form resistance.
        let custom = RotationalModel::Custom(Arc::new(f64::sinh));
        let r = custom.resistance(0.5, 3.0);
        assert!((r - RotationalModel::Hyperbolic.resistance(0.5, 3.0)).abs() < 1e-9);
    }

    #[test]
    fn invalid_families_are_rejected() {
        let p = || RotationalModel::Plane;
        assert!(matches!(CutoffFamily::new(p(), vec![(1.0, 1.0)], Taper::Log), Err(Error::Contract(_))));
        assert!(matches!(
            CutoffFamily::new(p(), vec![(1.0, f64::INFINITY)], Taper::Linear),
            Err(Error::Contract(_))
        ));
        assert!(CutoffFamily::new(p(), vec![(0.0, 1.0)], Taper::Log).is_err());
        let fam = CutoffFamily::log_plane(1.0, 2).unwrap();
        assert!(matches!(cutoff_energy(&fam, 1, 32), Err(Error::Resolution(_))));
        assert!(fam.radii(3).is_err());
    }

    #[test]
    fn profile_bounds() {
        let fam = CutoffFamily::log_plane(0.5, 3).unwrap();
        for j in 1..=3 {
            let (a, b) = fam.radii(j).unwrap();
            assert_eq!(fam.profile(j, 0.5 * a).unwrap(), 1.0);
            assert_eq!(fam.profile(j, a).unwrap(), 1.0);
            assert_eq!(fam.profile(j, b).unwrap(), 0.0);
            let mid = fam.profile(j, (a * b).sqrt()).unwrap();
            assert!((mid - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_holds_for_a_subharmonic_pair() {
        let fam = CutoffFamily::log_plane(1.0, 6).unwrap();
        let u = |r: f64, _: f64| (1.0 + r * r).ln();
        let v = |_: f64, _: f64| 1.0;
        let rep = cutoff_chain_check(&fam, &u, &v, &ChainOptions::default()).unwrap();
        assert!(rep.hypothesis_holds, "{}", rep.hypothesis_min);
        assert!(rep.all_inequalities_hold(), "{:?}", rep.rows);
        for row in &rep.rows {
            assert!(row.weighted_energy <= rep.sup_u2 * row.energy * (1.0 + 1e-9));
            assert!((row.energy - TAU / row.j as f64).abs() / (TAU / row.j as f64) < 2e-3);
        }
    }

    #[test]
    fn constant_pair_has_constant_ratio() {
        let fam = CutoffFamily::linear_cylinder(2.0, 1.0, &[1.0, 2.0, 4.0]).unwrap();
        let rep = cutoff_chain_check(&fam, &|_, _| 3.0, &|_, _| 3.0, &ChainOptions::default()).unwrap();
        assert!(rep.ratio_variance < 1e-12);
        assert!(rep.rows.iter().all(|r| r.inner_term == 0.0 && r.annulus_term == 0.0));
        assert!(rep.all_inequalities_hold());
    }

    #[test]
    fn localized_bump_breaks_the_chain() {
        // Not a solution pair: the hypothesis fails, and far cutoffs see
        // almost no ratio gradient in the annulus while the inner energy stays.
        let fam = CutoffFamily::log_plane(1.0, 6).unwrap();
        let u = |r: f64, t: f64| (r * t.cos()).sin() * (-r * r).exp();
        let rep = cutoff_chain_check(&fam, &u, &|_, _| 1.0, &ChainOptions::default()).unwrap();
        assert!(!rep.hypothesis_holds);
        assert!(!rep.rows.last().unwrap().combined_ok);
    }

    #[test]
    fn nonpositive_v_is_a_precondition_error() {
        let fam = CutoffFamily::log_plane(1.0, 1).unwrap();
        let r = cutoff_chain_check(&fam, &|_, _| 1.0, &|r, _| 1.0 - r, &ChainOptions::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn plane_growth_is_quadratic() {
        let m = MetricGrid::plane(6.0, 241).unwrap();
        let rep = area_growth(&m, (0.0, 0.0), &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        for row in &rep.rows {
            assert!((row.ratio - PI).abs() / PI < 0.03, "{row:?}");
            assert!(!row.truncated);
        }
        assert!((rep.exponent - 2.0).abs() < 0.05);
        assert!(rep.quadratic);
        let far = area_growth(&m, (0.0, 0.0), &[7.0]).unwrap();
        assert!(far.rows[0].truncated);
    }

    #[test]
    fn cylinder_growth_is_linear() {
        let m = MetricGrid::cylinder(2.0, 40.0, 40).unwrap();
        let radii = [5.0, 10.0, 20.0, 30.0];
        let rep = area_growth(&m, (0.0, 0.0), &radii).unwrap();
        for row in &rep.rows {
            assert!((row.vol - 4.0 * row.r).abs() / (4.0 * row.r) < 0.03, "{row:?}");
        }
        assert!(rep.rows.windows(2).all(|w| w[1].ratio < w[0].ratio));
        assert!((rep.exponent - 1.0).abs() < 0.05);
    }

    #[test]
    fn hyperbolic_growth_is_flagged() {
        let m = MetricGrid::hyperbolic_disk(401).unwrap();
        let radii = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
        let rep = area_growth(&m, (0.0, 0.0), &radii).unwrap();
        for row in &rep.rows {
            let exact = TAU * (row.r.cosh() - 1.0);
            assert!((row.vol - exact).abs() / exact < 0.05, "{row:?} vs {exact}");
        }
        assert!(!rep.quadratic, "exponent {}", rep.exponent);
        assert!(rep.rows.windows(2).all(|w| w[1].vol >= w[0].vol));
    }
}
