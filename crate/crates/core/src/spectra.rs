//! Dirichlet spectrum of the stability operator `L = Δ + q` on parameter rectangles.
//!
//! The operator is discretized from its energy: per-face midpoint terms for
//! `√g g^{ss} f_s²` and `√g g^{tt} f_t²` with face-averaged coefficients,
//! a per-cell term for the mixed part, and the lumped mass `W = √g h_s h_t`.
//! With `S` the resulting stiffness matrix, `L = −W⁻¹S + q` and the first
//! eigenvalue is the lowest eigenvalue of the symmetric `W^{-1/2} S W^{-1/2} − q`.

use log::{debug, info};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Rect, ScalarFieldGrid, UniformGrid};
use crate::linalg::{dot, norm2, SymBand};
use crate::surface::{potential_q, CylinderImmersion, Immersion};
use crate::geometry::SpaceParams;

pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 500;

/// Values of `√g g^{ij}` and `√g` at the nodes of the full grid.
#[derive(Clone, Debug)]
struct Coefficients {
    css: ScalarFieldGrid,
    cst: ScalarFieldGrid,
    ctt: ScalarFieldGrid,
    sqrt_g: ScalarFieldGrid,
}

fn metric_coefficients(imm: &dyn Immersion, grid: UniformGrid) -> Result<Coefficients> {
    let mut c = Coefficients {
        css: ScalarFieldGrid::zeros(grid),
        cst: ScalarFieldGrid::zeros(grid),
        ctt: ScalarFieldGrid::zeros(grid),
        sqrt_g: ScalarFieldGrid::zeros(grid),
    };
    for (i, j) in grid.nodes() {
        let g = imm.first_form(grid.s(i), grid.t(j))?;
        let det = g.determinant();
        if !(det > 0.0) {
            return Err(Error::Degenerate {
                s: grid.s(i),
                t: grid.t(j),
                singular_values: [0.0, g.norm()],
            });
        }
        let r = det.sqrt();
        c.css.set(i, j, g[(1, 1)] / r);
        c.cst.set(i, j, -g[(0, 1)] / r);
        c.ctt.set(i, j, g[(0, 0)] / r);
        c.sqrt_g.set(i, j, r);
    }
    Ok(c)
}

/// Discretized `Δ + q` on a closed subrectangle Ω with zero boundary values.
#[derive(Clone, Debug)]
pub struct SpectralProblem {
    space: SpaceParams,
    grid: UniformGrid,
    coeffs: Coefficients,
    q: ScalarFieldGrid,
    stiffness: SymBand,
    weight: Vec<f64>,
    s_fastest: bool,
}

impl SpectralProblem {
    /// `ns × nt` interior nodes on Ω; the potential is `q = |A|² + Ric(η)`.
    pub fn new(imm: &dyn Immersion, omega: Rect, ns: usize, nt: usize) -> Result<Self> {
        if !imm.domain().contains_rect(&omega) {
            return Err(Error::Contract(format!(
                "spectral rectangle {omega:?} is not inside the immersion domain {:?}",
                imm.domain()
            )));
        }
        let grid = UniformGrid::new(omega, ns + 2, nt + 2)?;
        let q = ScalarFieldGrid::try_from_fn(grid, |s, t| potential_q(imm, s, t))?;
        Self::with_potential(imm, omega, ns, nt, q)
    }

    /// Same discretization with a caller-supplied potential sampled on the full grid.
    pub fn with_potential(imm: &dyn Immersion, omega: Rect, ns: usize, nt: usize, q: ScalarFieldGrid) -> Result<Self> {
        if ns < 16 || nt < 16 {
            return Err(Error::Resolution(format!(
                "spectral grid {ns}x{nt} is below the 16x16 minimum"
            )));
        }
        let grid = UniformGrid::new(omega, ns + 2, nt + 2)?;
        if q.grid != grid {
            return Err(Error::Contract("potential is not sampled on the spectral grid".into()));
        }
        let coeffs = metric_coefficients(imm, grid)?;
        let s_fastest = ns <= nt;
        let n = ns * nt;
        let mut p = SpectralProblem {
            space: imm.space(),
            grid,
            coeffs,
            q,
            stiffness: SymBand::zeros(n, ns.min(nt) + 1),
            weight: vec![0.0; n],
            s_fastest,
        };
        p.assemble();
        debug!("assembled {ns}x{nt} spectral problem on {omega:?}");
        Ok(p)
    }

    pub fn space(&self) -> SpaceParams {
        self.space
    }

    /// Full grid of Ω, boundary nodes included.
    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn potential(&self) -> &ScalarFieldGrid {
        &self.q
    }

    pub fn interior_len(&self) -> usize {
        self.weight.len()
    }

    /// Unknown index of a full-grid node, `None` on the boundary.
    fn unknown(&self, i: usize, j: usize) -> Option<usize> {
        let g = self.grid;
        if g.is_boundary(i, j) {
            return None;
        }
        Some(if self.s_fastest {
            (i - 1) + (j - 1) * (g.ns - 2)
        } else {
            (j - 1) + (i - 1) * (g.nt - 2)
        })
    }

    fn node_of(&self, k: usize) -> (usize, usize) {
        let (ns, nt) = (self.grid.ns - 2, self.grid.nt - 2);
        if self.s_fastest {
            (k % ns + 1, k / ns + 1)
        } else {
            (k / nt + 1, k % nt + 1)
        }
    }

    /// Calls `f(nodes, local matrix)` for every face and cell term of the energy.
    fn for_each_term(&self, mut f: impl FnMut(&[(usize, usize)], &[f64])) {
        let g = self.grid;
        let (hs, ht) = (g.hs(), g.ht());
        let c = &self.coeffs;
        for j in 1..g.nt - 1 {
            for i in 0..g.ns - 1 {
                let a = 0.5 * (c.css.get(i, j) + c.css.get(i + 1, j)) * ht / hs;
                f(&[(i, j), (i + 1, j)], &[a, -a, -a, a]);
            }
        }
        for j in 0..g.nt - 1 {
            for i in 1..g.ns - 1 {
                let a = 0.5 * (c.ctt.get(i, j) + c.ctt.get(i, j + 1)) * hs / ht;
                f(&[(i, j), (i, j + 1)], &[a, -a, -a, a]);
            }
        }
        let ds = [-1.0, 1.0, -1.0, 1.0];
        let dt = [-1.0, -1.0, 1.0, 1.0];
        for j in 0..g.nt - 1 {
            for i in 0..g.ns - 1 {
                let cm = 0.25 * (c.cst.get(i, j) + c.cst.get(i + 1, j) + c.cst.get(i, j + 1) + c.cst.get(i + 1, j + 1));
                if cm == 0.0 {
                    continue;
                }
                let mut m = [0.0; 16];
                for a in 0..4 {
                    for b in 0..4 {
                        m[4 * a + b] = 0.25 * cm * (ds[a] * dt[b] + dt[a] * ds[b]);
                    }
                }
                f(&[(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)], &m);
            }
        }
    }

    fn assemble(&mut self) {
        let mut s = SymBand::zeros(self.stiffness.dim(), self.stiffness.bandwidth());
        self.for_each_term(|nodes, m| {
            let n = nodes.len();
            for (a, &(ia, ja)) in nodes.iter().enumerate() {
                let Some(ka) = self.unknown(ia, ja) else { continue };
                for (b, &(ib, jb)) in nodes.iter().enumerate().take(a + 1) {
                    let Some(kb) = self.unknown(ib, jb) else { continue };
                    s.add(ka, kb, m[n * a + b]);
                }
            }
        });
        let (hs, ht) = (self.grid.hs(), self.grid.ht());
        for k in 0..self.weight.len() {
            let (i, j) = self.node_of(k);
            self.weight[k] = self.coeffs.sqrt_g.get(i, j) * hs * ht;
        }
        self.stiffness = s;
    }

    fn check_boundary(&self, f: &ScalarFieldGrid) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::Contract("test function is not on the spectral grid".into()));
        }
        let g = self.grid;
        let worst = g
            .nodes()
            .filter(|&(i, j)| g.is_boundary(i, j))
            .map(|(i, j)| f.get(i, j).abs())
            .fold(0.0, f64::max);
        if worst > 0.0 {
            return Err(Error::Contract(format!(
                "test function has boundary value {worst:e}; zero Dirichlet data required"
            )));
        }
        Ok(())
    }

    fn gather(&self, f: &ScalarFieldGrid) -> Vec<f64> {
        (0..self.weight.len())
            .map(|k| {
                let (i, j) = self.node_of(k);
                f.get(i, j)
            })
            .collect()
    }

    fn scatter(&self, v: &[f64]) -> ScalarFieldGrid {
        let mut out = ScalarFieldGrid::zeros(self.grid);
        for (k, x) in v.iter().enumerate() {
            let (i, j) = self.node_of(k);
            out.set(i, j, *x);
        }
        out
    }

    /// `Q(f, f) = ∫ |∇f|² − q f²`, evaluated term by term from the energy.
    pub fn quadratic_form(&self, f: &ScalarFieldGrid) -> Result<f64> {
        self.check_boundary(f)?;
        let mut energy = 0.0;
        self.for_each_term(|nodes, m| {
            let n = nodes.len();
            for (a, &(ia, ja)) in nodes.iter().enumerate() {
                for (b, &(ib, jb)) in nodes.iter().enumerate() {
                    energy += m[n * a + b] * f.get(ia, ja) * f.get(ib, jb);
                }
            }
        });
        let potential: f64 = (0..self.weight.len())
            .map(|k| {
                let (i, j) = self.node_of(k);
                self.q.get(i, j) * self.weight[k] * f.get(i, j).powi(2)
            })
            .sum();
        Ok(energy - potential)
    }

    /// Discrete `L f` at interior nodes (zero on the boundary).
    pub fn apply(&self, f: &ScalarFieldGrid) -> Result<ScalarFieldGrid> {
        self.check_boundary(f)?;
        let x = self.gather(f);
        let sx = self.stiffness.mul_vec(&x);
        let lf: Vec<f64> = (0..x.len())
            .map(|k| {
                let (i, j) = self.node_of(k);
                -sx[k] / self.weight[k] + self.q.get(i, j) * x[k]
            })
            .collect();
        Ok(self.scatter(&lf))
    }

    /// `∫ f g` with the lumped metric weights.
    pub fn inner(&self, f: &ScalarFieldGrid, g: &ScalarFieldGrid) -> f64 {
        (0..self.weight.len())
            .map(|k| {
                let (i, j) = self.node_of(k);
                self.weight[k] * f.get(i, j) * g.get(i, j)
            })
            .sum()
    }

    /// Symmetric operator `W^{-1/2} S W^{-1/2} − q`.
    fn symmetric_operator(&self) -> SymBand {
        let d: Vec<f64> = self.weight.iter().map(|w| 1.0 / w.sqrt()).collect();
        let mut b = self.stiffness.scaled(&d);
        let q: Vec<f64> = (0..self.weight.len())
            .map(|k| {
                let (i, j) = self.node_of(k);
                -self.q.get(i, j)
            })
            .collect();
        b.add_diagonal(&q);
        b
    }

    /// Smallest Dirichlet eigenvalue of `−L` by shifted inverse iteration.
    pub fn first_eigenvalue(&self) -> Result<SpectralResult> {
        let b = self.symmetric_operator();
        let n = b.dim();
        let qmax = self.q.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let mut shift = -qmax - 1.0;
        let mut shifted;
        let chol = loop {
            shifted = b.clone();
            shifted.add_diagonal(&vec![-shift; n]);
            match shifted.cholesky() {
                Ok(c) => break c,
                Err(Error::NotPositiveDefinite(_)) if shift > -1e12 => {
                    shift = 2.0 * shift - 1.0;
                    debug!("indefinite stiffness, lowering shift to {shift}");
                }
                Err(e) => return Err(e),
            }
        };
        // Positive start vector: the flat first mode, scaled by √W.
        let g = self.grid;
        let mut y: Vec<f64> = (0..n)
            .map(|k| {
                let (i, j) = self.node_of(k);
                let u = (std::f64::consts::PI * i as f64 / (g.ns - 1) as f64).sin()
                    * (std::f64::consts::PI * j as f64 / (g.nt - 1) as f64).sin();
                u * self.weight[k].sqrt()
            })
            .collect();
        let nrm = norm2(&y);
        y.iter_mut().for_each(|v| *v /= nrm);
        let mut mu = dot(&y, &b.mul_vec(&y));
        let mut history = Vec::new();
        for it in 1..=MAX_ITERATIONS {
            let mut z = chol.solve(&y);
            let nz = norm2(&z);
            z.iter_mut().for_each(|v| *v /= nz);
            let bz = b.mul_vec(&z);
            let next = dot(&z, &bz);
            let residual = norm2(&bz.iter().zip(&z).map(|(a, v)| a - next * v).collect::<Vec<_>>());
            let step = (next - mu).abs();
            history.push(step);
            y = z;
            mu = next;
            let scale = mu.abs().max(1.0);
            if step <= EIGEN_TOLERANCE * scale && residual <= 1e-8 * scale {
                if y.iter().sum::<f64>() < 0.0 {
                    y.iter_mut().for_each(|v| *v = -*v);
                }
                let f: Vec<f64> = y.iter().zip(&self.weight).map(|(v, w)| v / w.sqrt()).collect();
                info!("lambda1 = {mu:.12} after {it} iterations (residual {residual:e})");
                return Ok(SpectralResult {
                    lambda1: mu,
                    eigenfunction: self.scatter(&f),
                    iterations: it,
                    residual,
                });
            }
        }
        Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            last_residual: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub lambda1: f64,
    /// First eigenfunction on the full grid, unit `L²(Ω)` norm, positive inside.
    pub eigenfunction: ScalarFieldGrid,
    pub iterations: usize,
    /// `‖(L + λ₁) f‖` in the weighted discrete norm.
    pub residual: f64,
}

/// Closed-form first eigenvalue of `−L` on `[0, a] × [0, b]` of a vertical cylinder.
pub fn cylinder_eigenvalue(sp: &SpaceParams, k_gamma: f64, a: f64, b: f64) -> f64 {
    let pi2 = std::f64::consts::PI.powi(2);
    pi2 * (1.0 / (a * a) + 1.0 / (b * b)) - (k_gamma * k_gamma + sp.kappa())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum StabilityVerdict {
    Stable,
    Unstable { witness: Rect, lambda1: f64 },
    /// `inf λ₁` is indistinguishable from zero.
    Marginal,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub side: f64,
    pub domain: Rect,
    pub grid: usize,
    pub lambda1: f64,
    pub predicted: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub kappa: f64,
    pub tau: f64,
    pub k_gamma: f64,
    pub verdict: StabilityVerdict,
    /// `λ₁(Ω)` extrapolated to infinite squares from the two largest domains.
    pub inf_lambda1: f64,
    pub rows: Vec<SweepRow>,
}

pub const DEFAULT_SWEEP: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const MARGINAL_BAND: f64 = 1e-3;

/// Runs `λ₁` on growing squares `[−a/2, a/2]²` of the cylinder over a
/// curve of geodesic curvature `k_gamma`.
///
/// A square is an instability witness once `λ₁ < −MARGINAL_BAND·a⁻²`.
/// Otherwise `λ₁(a) ≈ c/a² + λ∞` is fitted on the two largest squares and
/// `|λ∞| ≤ MARGINAL_BAND` is reported as marginal.
pub fn cylinder_stability_verdict(sp: SpaceParams, k_gamma: f64, sides: &[f64], nodes: usize) -> Result<StabilityReport> {
    if sides.len() < 2 || sides.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract("domain sweep needs at least two increasing sides".into()));
    }
    let mut rows = Vec::new();
    let mut verdict = None;
    for &a in sides {
        let omega = Rect::new(-0.5 * a, 0.5 * a, -0.5 * a, 0.5 * a)?;
        let cyl = CylinderImmersion::new(sp, k_gamma, omega)?;
        let res = SpectralProblem::new(&cyl, omega, nodes, nodes)?.first_eigenvalue()?;
        rows.push(SweepRow {
            side: a,
            domain: omega,
            grid: nodes,
            lambda1: res.lambda1,
            predicted: cylinder_eigenvalue(&sp, k_gamma, a, a),
            iterations: res.iterations,
        });
        if res.lambda1 < -MARGINAL_BAND / (a * a) {
            verdict = Some(StabilityVerdict::Unstable {
                witness: omega,
                lambda1: res.lambda1,
            });
            break;
        }
    }
    let inf_lambda1 = match rows.as_slice() {
        [.., p, q] => {
            let (a1, a2) = (p.side * p.side, q.side * q.side);
            (a2 * q.lambda1 - a1 * p.lambda1) / (a2 - a1)
        }
        _ => rows[0].lambda1,
    };
    let verdict = verdict.unwrap_or(if inf_lambda1.abs() <= MARGINAL_BAND {
        StabilityVerdict::Marginal
    } else if inf_lambda1 > 0.0 {
        StabilityVerdict::Stable
    } else {
        // Negative limit but no witness yet: the sweep was too short.
        StabilityVerdict::Unstable {
            witness: rows.last().unwrap().domain,
            lambda1: rows.last().unwrap().lambda1,
        }
    });
    Ok(StabilityReport {
        kappa: sp.kappa(),
        tau: sp.tau(),
        k_gamma,
        verdict,
        inf_lambda1,
        rows,
    })
}

/// Discrete norms of `Lu` for a sampled function.
#[derive(Clone, Debug, Serialize)]
pub struct JacobiResidual {
    /// `‖Δu + qu‖` in `L²` of the induced area.
    pub l2: f64,
    pub sup: f64,
    /// `‖L(u²) − (2|∇u|² − qu²)‖` in the same norm.
    pub square_identity: f64,
}

/// Fourth-order divergence-form `Δu` and `|∇u|²` on the immersion's parameter grid.
fn laplacian4(c: &Coefficients, u: &ScalarFieldGrid) -> Result<(ScalarFieldGrid, ScalarFieldGrid)> {
    let (us, ut) = (u.d_s()?, u.d_t()?);
    let grid = u.grid;
    let mut fs = ScalarFieldGrid::zeros(grid);
    let mut ft = ScalarFieldGrid::zeros(grid);
    let mut grad = ScalarFieldGrid::zeros(grid);
    for (i, j) in grid.nodes() {
        let (a, b, d) = (c.css.get(i, j), c.cst.get(i, j), c.ctt.get(i, j));
        let (x, y) = (us.get(i, j), ut.get(i, j));
        fs.set(i, j, a * x + b * y);
        ft.set(i, j, b * x + d * y);
        grad.set(i, j, (a * x * x + 2.0 * b * x * y + d * y * y) / c.sqrt_g.get(i, j));
    }
    let div = fs.d_s()?.zip_map(&ft.d_t()?, |p, q| p + q)?;
    Ok((div.zip_map(&c.sqrt_g, |p, r| p / r)?, grad))
}

/// `‖Δu + qu‖` on the grid of `u`, which must lie inside the immersion domain.
pub fn jacobi_residual(imm: &dyn Immersion, u: &ScalarFieldGrid) -> Result<JacobiResidual> {
    let grid = u.grid;
    if !imm.domain().contains_rect(&grid.rect) {
        return Err(Error::Contract("sampled function extends beyond the immersion domain".into()));
    }
    let c = metric_coefficients(imm, grid)?;
    let q = ScalarFieldGrid::try_from_fn(grid, |s, t| potential_q(imm, s, t))?;
    let (lap, grad) = laplacian4(&c, u)?;
    let r = lap.zip_map(&q.zip_map(u, |a, b| a * b)?, |a, b| a + b)?;
    let u2 = u.map(|v| v * v);
    let (lap2, _) = laplacian4(&c, &u2)?;
    let mut comp = ScalarFieldGrid::zeros(grid);
    for (i, j) in grid.nodes() {
        let lu2 = lap2.get(i, j) + q.get(i, j) * u2.get(i, j);
        comp.set(i, j, lu2 - (2.0 * grad.get(i, j) - q.get(i, j) * u2.get(i, j)));
    }
    Ok(JacobiResidual {
        l2: r.l2_norm_with_density(&c.sqrt_g),
        sup: r.max_abs(),
        square_identity: comp.l2_norm_with_density(&c.sqrt_g),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::surface::{FmpSurface, HorizontalGraph, QuadraticProfile};
    use crate::geometry::KillingField;
    use crate::surface::normal_component;

    fn flat(a: f64, b: f64) -> HorizontalGraph {
        HorizontalGraph::vertical_plane(0.0, 0.0, Rect::sized(a, b).unwrap())
    }

    fn mode(grid: UniformGrid) -> ScalarFieldGrid {
        let r = grid.rect;
        let mut f = ScalarFieldGrid::from_fn(grid, |s, t| {
            (PI * (s - r.s0) / r.width()).sin() * (PI * (t - r.t0) / r.height()).sin()
        });
        for (i, j) in grid.nodes() {
            if grid.is_boundary(i, j) {
                f.set(i, j, 0.0);
            }
        }
        f
    }

    #[test]
    fn flat_rectangle_eigenvalue() {
        let p = SpectralProblem::new(&flat(2.0, 1.0), Rect::sized(2.0, 1.0).unwrap(), 40, 30).unwrap();
        let res = p.first_eigenvalue().unwrap();
        let exact = PI * PI * (0.25 + 1.0);
        assert!((res.lambda1 - exact).abs() / exact < 2e-3, "{}", res.lambda1);
        // Closed form of the five-point stencil.
        let g = p.grid();
        let (hs, ht) = (g.hs(), g.ht());
        let discrete = 4.0 / (hs * hs) * (PI * hs / 4.0).sin().powi(2) + 4.0 / (ht * ht) * (PI * ht / 2.0).sin().powi(2);
        assert!((res.lambda1 - discrete).abs() < 1e-8, "{} vs {discrete}", res.lambda1);
        assert!((p.inner(&res.eigenfunction, &res.eigenfunction) - 1.0).abs() < 1e-12);
        let inside = g.nodes().filter(|&(i, j)| !g.is_boundary(i, j));
        assert!(inside.into_iter().all(|(i, j)| res.eigenfunction.get(i, j) > 0.0));
        assert!(res.residual < 1e-7);
    }

    #[test]
    fn rayleigh_quotient_of_flat_mode() {
        let imm = flat(1.0, 1.0);
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64] {
            let p = SpectralProblem::new(&imm, Rect::sized(1.0, 1.0).unwrap(), n, n).unwrap();
            let f = mode(p.grid());
            let rq = p.quadratic_form(&f).unwrap() / p.inner(&f, &f);
            let err = (rq - 2.0 * PI * PI).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn eigenvalue_converges_at_second_order() {
        let imm = flat(1.0, 1.0);
        let err = |n: usize| {
            let p = SpectralProblem::new(&imm, Rect::sized(1.0, 1.0).unwrap(), n, n).unwrap();
            (p.first_eigenvalue().unwrap().lambda1 - 2.0 * PI * PI).abs()
        };
        let rate = (err(19) / err(39)).log2();
        assert!((rate - 2.0).abs() < 0.1, "rate {rate}");
    }

    #[test]
    fn product_cylinder_shifts_spectrum() {
        let sp = SpaceParams::new(-1.0, 0.0).unwrap();
        let omega = Rect::sized(1.0, 1.0).unwrap();
        let cyl = CylinderImmersion::new(sp, 0.0, omega).unwrap();
        let p = SpectralProblem::new(&cyl, omega, 24, 24).unwrap();
        assert!(p.potential().values.iter().all(|q| (q + 1.0).abs() < 1e-10));
        let f = mode(p.grid());
        let rq = p.quadratic_form(&f).unwrap() / p.inner(&f, &f);
        let pf = SpectralProblem::new(&flat(1.0, 1.0), omega, 24, 24).unwrap();
        let rq0 = pf.quadratic_form(&f).unwrap() / pf.inner(&f, &f);
        assert!((rq - rq0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn summation_by_parts_and_symmetry() {
        let g = HorizontalGraph::nil(
            QuadraticProfile {
                cyy: 0.3,
                cyz: 0.4,
                czz: -0.2,
                cy: 0.5,
                ..Default::default()
            },
            Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(),
        );
        let omega = Rect::new(-0.8, 0.9, -0.7, 1.0).unwrap();
        let p = SpectralProblem::new(&g, omega, 20, 23).unwrap();
        let grid = p.grid();
        let bump = |c: f64| {
            let mut f = ScalarFieldGrid::from_fn(grid, |s, t| ((s + 0.8) * (0.9 - s) * (t + 0.7) * (1.0 - t)) * (c * s + t).cos());
            for (i, j) in grid.nodes() {
                if grid.is_boundary(i, j) {
                    f.set(i, j, 0.0);
                }
            }
            f
        };
        let (f, h) = (bump(1.0), bump(-2.5));
        let lf = p.apply(&f).unwrap();
        let lh = p.apply(&h).unwrap();
        assert!((p.quadratic_form(&f).unwrap() + p.inner(&f, &lf)).abs() < 1e-8);
        let (a, b) = (p.inner(&lf, &h), p.inner(&f, &lh));
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        let mut bad = f.clone();
        bad.set(0, 3, 1e-3);
        assert!(matches!(p.quadratic_form(&bad), Err(Error::Contract(_))));
        // Potential agrees with the pointwise evaluation.
        let (i, j) = (7, 11);
        let q = potential_q(&g, grid.s(i), grid.t(j)).unwrap();
        assert!((p.potential().get(i, j) - q).abs() < 1e-10);
    }

    #[test]
    fn domain_monotonicity() {
        let sp = SpaceParams::new(0.0, 0.5).unwrap();
        let big = Rect::new(0.0, 3.0, 0.0, 3.0).unwrap();
        let cyl = CylinderImmersion::new(sp, 1.0, big).unwrap();
        let mut last = f64::INFINITY;
        for a in [1.0, 1.5, 2.0, 3.0] {
            let l = SpectralProblem::new(&cyl, Rect::sized(a, a).unwrap(), 24, 24)
                .unwrap()
                .first_eigenvalue()
                .unwrap()
                .lambda1;
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn grid_minimum_is_enforced() {
        let r = Rect::sized(1.0, 1.0).unwrap();
        assert!(matches!(SpectralProblem::new(&flat(1.0, 1.0), r, 8, 20), Err(Error::Resolution(_))));
        assert!(matches!(
            SpectralProblem::new(&flat(1.0, 1.0), Rect::sized(2.0, 1.0).unwrap(), 20, 20),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn vertical_field_is_a_trivial_jacobi_function_on_cylinders() {
        let sp = SpaceParams::new(0.0, 0.5).unwrap();
        let omega = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let cyl = CylinderImmersion::new(sp, 1.0, omega).unwrap();
        let grid = UniformGrid::new(omega, 21, 21).unwrap();
        let u = ScalarFieldGrid::try_from_fn(grid, |s, t| normal_component(&cyl, s, t, &KillingField::Vertical)).unwrap();
        assert!(u.max_abs() < 1e-13);
        let r = jacobi_residual(&cyl, &u).unwrap();
        assert!(r.l2 < 1e-12 && r.square_identity < 1e-12);
    }

    #[test]
    fn translation_jacobi_function_on_fmp() {
        let m = FmpSurface::new(0.5, Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap());
        let grid = UniformGrid::new(m.domain, 65, 65).unwrap();
        let u = ScalarFieldGrid::try_from_fn(grid, |s, t| normal_component(&m, s, t, &KillingField::Translation)).unwrap();
        let r = jacobi_residual(&m, &u).unwrap();
        assert!(r.l2 < 1e-3, "{r:?}");
        assert!(r.square_identity < 1e-2, "{r:?}");
        // A non-Jacobi function is detected.
        let w = ScalarFieldGrid::from_fn(grid, |s, t| 1.0 + s * s + t);
        assert!(jacobi_residual(&m, &w).unwrap().l2 > 0.1);
    }

    #[test]
    fn verdicts_on_short_sweeps() {
        let nil = SpaceParams::new(0.0, 0.5).unwrap();
        let s = cylinder_stability_verdict(nil, 1.0, &[1.0, 2.0, 4.0, 8.0], 20).unwrap();
        match s.verdict {
            StabilityVerdict::Unstable { witness, lambda1 } => {
                assert!(lambda1 < 0.0);
                assert!(witness.width() > PI * 2f64.sqrt());
            }
            v => panic!("{v:?}"),
        }
        let h = cylinder_stability_verdict(SpaceParams::new(-1.0, 0.0).unwrap(), 0.0, &[1.0, 2.0, 4.0], 20).unwrap();
        assert_eq!(h.verdict, StabilityVerdict::Stable);
        assert!((h.inf_lambda1 - 1.0).abs() < 1e-2);
        let p = cylinder_stability_verdict(nil, 0.0, &[1.0, 2.0, 4.0], 20).unwrap();
        assert_eq!(p.verdict, StabilityVerdict::Marginal);
    }
}
