//! Ambient geometry of the homogeneous spaces E(κ, τ).
//!
//! Points are expressed in the chart `{1 + κ(x² + y²)/4 > 0} × ℝ` with metric
//!
//! ```text
//! λ²(dx² + dy²) + (dz + τλ(y dx − x dy))²,   λ = 1 / (1 + κ(x² + y²)/4)
//! ```
//!
//! which is the usual Heisenberg model `dx² + dy² + (dz + ½(y dx − x dy))²`
//! when κ = 0 and τ = ½. Vector components are always given in the chart
//! basis (∂x, ∂y, ∂z).
//!
//! The orthonormal frame returned by [`frame_at`] is the horizontal lift of
//! `(λ⁻¹∂x, λ⁻¹∂y)` rotated along the fibre by the angle `σz`. With that
//! rotation the brackets are `[E1,E2] = 2τE3`, `[E2,E3] = σE1`,
//! `[E3,E1] = σE2` whenever τ ≠ 0, so the constant table of
//! [`connection_coefficients`] is the actual connection of the frame. In the
//! product case τ = 0, κ ≠ 0 no frame has constant coefficients and the
//! table only holds on the fibre over the origin; [`connection_at`] always
//! gives the true coefficients.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Relative step used by the fourth-order central differences.
pub(crate) fn fd_step(scale: f64) -> f64 {
    f64::EPSILON.powf(0.2) * scale
}

/// Fourth-order central first derivative.
#[cfg(test)]
pub(crate) fn central4<T, F>(f: F, h: f64) -> T
where
    F: Fn(f64) -> T,
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let (p2, p1, m1, m2) = (f(2.0 * h), f(h), f(-h), f(-2.0 * h));
    (p1 - m1) * (8.0 / (12.0 * h)) + (m2 - p2) * (1.0 / (12.0 * h))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceParamsConfig", into = "SpaceParamsConfig")]
pub struct SpaceParams {
    kappa: f64,
    tau: f64,
    sigma: f64,
}

/// Wire form of [`SpaceParams`]; σ is derived and never accepted from input.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceParamsConfig {
    pub kappa: f64,
    pub tau: f64,
}

impl TryFrom<SpaceParamsConfig> for SpaceParams {
    type Error = Error;

    fn try_from(c: SpaceParamsConfig) -> Result<Self> {
        SpaceParams::new(c.kappa, c.tau)
    }
}

impl From<SpaceParams> for SpaceParamsConfig {
    fn from(sp: SpaceParams) -> Self {
        SpaceParamsConfig {
            kappa: sp.kappa,
            tau: sp.tau,
        }
    }
}

impl SpaceParams {
    /// Rejects the space forms κ = 4τ², whose isometry group is 6-dimensional.
    pub fn new(kappa: f64, tau: f64) -> Result<Self> {
        if !kappa.is_finite() || !tau.is_finite() {
            return Err(Error::InvalidSpace(format!(
                "kappa and tau must be finite (got {kappa}, {tau})"
            )));
        }
        if (kappa - 4.0 * tau * tau).abs() <= 1e-12 * (1.0 + kappa.abs()) {
            return Err(Error::InvalidSpace(format!(
                "kappa = 4 tau^2 ({kappa} = 4 * {tau}^2) is a space form"
            )));
        }
        let sigma = if tau == 0.0 { 0.0 } else { kappa / (2.0 * tau) };
        Ok(SpaceParams { kappa, tau, sigma })
    }

    /// The Heisenberg space Nil₃ = E(0, ½).
    pub fn nil() -> Self {
        SpaceParams {
            kappa: 0.0,
            tau: 0.5,
            sigma: 0.0,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_heisenberg(&self) -> bool {
        self.kappa == 0.0 && self.tau != 0.0
    }

    pub(crate) fn require_heisenberg(&self) -> Result<()> {
        if self.is_heisenberg() {
            Ok(())
        } else {
            Err(Error::UnsupportedSpace {
                kappa: self.kappa,
                tau: self.tau,
            })
        }
    }

    /// `1 + κ(x² + y²)/4`, the reciprocal of the conformal factor.
    fn chart_denominator(&self, x: f64, y: f64) -> f64 {
        1.0 + 0.25 * self.kappa * (x * x + y * y)
    }

    pub fn in_chart(&self, p: &AmbientPoint) -> bool {
        p.x.is_finite() && p.y.is_finite() && p.z.is_finite() && self.chart_denominator(p.x, p.y) > 0.0
    }

    pub(crate) fn check(&self, p: &AmbientPoint) -> Result<()> {
        if self.in_chart(p) {
            Ok(())
        } else {
            Err(Error::OutsideChart {
                x: p.x,
                y: p.y,
                z: p.z,
            })
        }
    }

    /// Conformal factor λ of the base M²(κ).
    pub fn conformal_factor(&self, p: &AmbientPoint) -> Result<f64> {
        self.check(p)?;
        Ok(1.0 / self.chart_denominator(p.x, p.y))
    }

    /// Distance scale at which the chart coefficients change appreciably.
    fn local_scale(&self, p: &AmbientPoint) -> f64 {
        if self.kappa < 0.0 {
            let edge = 2.0 / (-self.kappa).sqrt();
            let r = p.x.hypot(p.y);
            (0.25 * (edge - r)).clamp(1e-6, 1.0)
        } else {
            1.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbientPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AmbientPoint {
    pub const ORIGIN: AmbientPoint = AmbientPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        AmbientPoint { x, y, z }
    }

    pub fn to_vec(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn from_vec(v: &Vec3) -> Self {
        AmbientPoint::new(v[0], v[1], v[2])
    }

    pub fn offset(&self, dir: usize, h: f64) -> Self {
        let mut v = self.to_vec();
        v[dir] += h;
        AmbientPoint::from_vec(&v)
    }

    /// Image under the fibration, `π(x, y, z) = (x, y)`.
    pub fn project(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    pub base: AmbientPoint,
    pub components: Vec3,
}

impl TangentVector {
    pub fn new(base: AmbientPoint, components: Vec3) -> Result<Self> {
        if components.iter().all(|c| c.is_finite()) {
            Ok(TangentVector { base, components })
        } else {
            Err(Error::Numeric(format!(
                "non-finite tangent vector components {components:?}"
            )))
        }
    }
}

/// Coframe matrix Θ: row `a` holds the chart components of the 1-form ωₐ dual to Êₐ.
fn coframe(sp: &SpaceParams, p: &AmbientPoint) -> Result<Mat3> {
    let l = sp.conformal_factor(p)?;
    let t = sp.tau;
    Ok(Mat3::new(
        l, 0.0, 0.0, //
        0.0, l, 0.0, //
        t * l * p.y, -t * l * p.x, 1.0,
    ))
}

/// Partial derivatives ∂ₘΘ, m = x, y, z.
fn coframe_derivatives(sp: &SpaceParams, p: &AmbientPoint) -> Result<[Mat3; 3]> {
    let l = sp.conformal_factor(p)?;
    let t = sp.tau;
    let lx = -0.5 * sp.kappa * p.x * l * l;
    let ly = -0.5 * sp.kappa * p.y * l * l;
    let dx = Mat3::new(
        lx, 0.0, 0.0, //
        0.0, lx, 0.0, //
        t * p.y * lx, -t * (l + p.x * lx), 0.0,
    );
    let dy = Mat3::new(
        ly, 0.0, 0.0, //
        0.0, ly, 0.0, //
        t * (l + p.y * ly), -t * p.x * ly, 0.0,
    );
    Ok([dx, dy, Mat3::zeros()])
}

/// Metric coefficients gᵢⱼ in the chart basis.
pub fn metric_at(sp: &SpaceParams, p: &AmbientPoint) -> Result<Mat3> {
    let th = coframe(sp, p)?;
    Ok(th.transpose() * th)
}

/// ∂ₘgᵢⱼ for m = x, y, z.
pub fn metric_derivatives(sp: &SpaceParams, p: &AmbientPoint) -> Result<[Mat3; 3]> {
    let th = coframe(sp, p)?;
    let d = coframe_derivatives(sp, p)?;
    Ok(d.map(|dm| dm.transpose() * th + th.transpose() * dm))
}

pub fn inverse_metric(sp: &SpaceParams, p: &AmbientPoint) -> Result<Mat3> {
    let f = frame_matrix(sp, p)?;
    Ok(f * f.transpose())
}

/// Riemannian volume density √det g = λ².
pub fn volume_density(sp: &SpaceParams, p: &AmbientPoint) -> Result<f64> {
    let l = sp.conformal_factor(p)?;
    Ok(l * l)
}

pub fn inner(sp: &SpaceParams, p: &AmbientPoint, a: &Vec3, b: &Vec3) -> Result<f64> {
    Ok(a.dot(&(metric_at(sp, p)? * b)))
}

pub fn norm(sp: &SpaceParams, p: &AmbientPoint, a: &Vec3) -> Result<f64> {
    Ok(inner(sp, p, a, a)?.sqrt())
}

/// Vector product with respect to the direct orthonormal frame.
pub fn cross(sp: &SpaceParams, p: &AmbientPoint, a: &Vec3, b: &Vec3) -> Result<Vec3> {
    let ginv = inverse_metric(sp, p)?;
    Ok(ginv * a.cross(b) * volume_density(sp, p)?)
}

/// Oriented volume `dV(a, b, c)`.
pub fn volume_form(sp: &SpaceParams, p: &AmbientPoint, a: &Vec3, b: &Vec3, c: &Vec3) -> Result<f64> {
    Ok(volume_density(sp, p)? * Mat3::from_columns(&[*a, *b, *c]).determinant())
}

/// Columns are the chart components of E1, E2, E3.
pub fn frame_matrix(sp: &SpaceParams, p: &AmbientPoint) -> Result<Mat3> {
    let l = sp.conformal_factor(p)?;
    let t = sp.tau;
    let e1 = Vec3::new(1.0 / l, 0.0, -t * p.y);
    let e2 = Vec3::new(0.0, 1.0 / l, t * p.x);
    let (s, c) = (sp.sigma * p.z).sin_cos();
    Ok(Mat3::from_columns(&[c * e1 + s * e2, -s * e1 + c * e2, Vec3::z()]))
}

/// The orthonormal frame (E1, E2, E3); E3 = ∂z spans the fibre direction.
pub fn frame_at(sp: &SpaceParams, p: &AmbientPoint) -> Result<[TangentVector; 3]> {
    let f = frame_matrix(sp, p)?;
    Ok([0, 1, 2].map(|i| TangentVector {
        base: *p,
        components: f.column(i).into(),
    }))
}

/// Frame components of a chart vector, `v = Σ cₐ Eₐ`.
pub fn to_frame(sp: &SpaceParams, p: &AmbientPoint, v: &Vec3) -> Result<Vec3> {
    let f = frame_matrix(sp, p)?;
    f.try_inverse()
        .map(|fi| fi * v)
        .ok_or_else(|| Error::Numeric("singular frame".into()))
}

pub fn from_frame(sp: &SpaceParams, p: &AmbientPoint, c: &Vec3) -> Result<Vec3> {
    Ok(frame_matrix(sp, p)? * c)
}

/// Chart Christoffel symbols, indexed `[k][i][j]` for Γᵏᵢⱼ.
pub type Christoffel = [[[f64; 3]; 3]; 3];

pub fn christoffel(sp: &SpaceParams, p: &AmbientPoint) -> Result<Christoffel> {
    let ginv = inverse_metric(sp, p)?;
    let dg = metric_derivatives(sp, p)?;
    let mut out = [[[0.0; 3]; 3]; 3];
    for (k, gk) in out.iter_mut().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                gk[i][j] = 0.5
                    * (0..3)
                        .map(|l| ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                        .sum::<f64>();
            }
        }
    }
    Ok(out)
}

/// `Γ(a, b)ᵏ = Γᵏᵢⱼ aⁱ bʲ`.
pub fn christoffel_contract(gamma: &Christoffel, a: &Vec3, b: &Vec3) -> Vec3 {
    Vec3::from_fn(|k, _| {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += gamma[k][i][j] * a[i] * b[j];
            }
        }
        acc
    })
}

/// A differentiable vector field given by chart components.
pub trait VectorField: Sync {
    fn value(&self, sp: &SpaceParams, p: &AmbientPoint) -> Result<Vec3>;

    /// `J[(r, c)] = ∂_c Vʳ`. Defaults to fourth-order central differences.
    fn jacobian(&self, sp: &SpaceParams, p: &AmbientPoint) -> Result<Mat3> {
        let h = fd_step(sp.local_scale(p));
        let mut jac = Mat3::zeros();
        for c in 0..3 {
            let samples: Result<Vec<Vec3>> = [2.0, 1.0, -1.0, -2.0]
                .iter()
                .map(|m| self.value(sp, &p.offset(c, m * h)))
                .collect();
            let s = samples?;
            let col = (s[1] - s[2]) * (8.0 / (12.0 * h)) + (s[3] - s[0]) * (1.0 / (12.0 * h));
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "vector field is not differentiable at ({}, {}, {}) in direction {c}",
                    p.x, p.y, p.z
                )));
            }
            jac.set_column(c, &col);
        }
        Ok(jac)
    }
}

/// One of the frame fields E1, E2, E3 (index 0, 1, 2).
#[derive(Clone, Copy, Debug)]
pub struct FrameField(pub usize);

impl VectorField for FrameField {
    fn value(&self, sp: &SpaceParams, p: &AmbientPoint) -> Result<Vec3> {
        Ok(frame_matrix(sp, p)?.column(self.0).into())
    }

    fn jacobian(&self, sp: &SpaceParams, p: &AmbientPoint) -> Result<Mat3> {
        sp.check(p)?;
        let (k, t, sg) = (sp.kappa, sp.tau, sp.sigma);
        let (mx, my) = (0.5 * k * p.x, 0.5 * k * p.y);
        // Unrotated horizontal fields Ê1, Ê2 and their Jacobians.
        let l = sp.conformal_factor(p)?;
        let e1 = Vec3::new(1.0 / l, 0.0, -t * p.y);
        let e2 = Vec3::new(0.0, 1.0 / l, t * p.x);
        let j1 = Mat3::new(mx, my, 0.0, 0.0, 0.0, 0.0, 0.0, -t, 0.0);
        let j2 = Mat3::new(0.0, 0.0, 0.0, mx, my, 0.0, t, 0.0, 0.0);
        let (s, c) = (sg * p.z).sin_cos();
        let mut jac = match self.0 {
            0 => c * j1 + s * j2,
            1 => -s * j1 + c * j2,
            2 => return Ok(Mat3::zeros()),
            i => return Err(Error::Contract(format!("frame index {i} out of range"))),
        };
        let dz = match self.0 {
            0 => sg * (-s * e1 + c * e2),
            _ => -sg * (c * e1 + s * e2),
        };
        jac.set_column(2, &dz);
        Ok(jac)
    }
}

/// Closed-form Killing fields.
#[derive(Clone, Copy, Debug)]
pub enum KillingField {
    /// The unit vertical field E3; Killing in every E(κ, τ).
    Vertical,
    /// `X = E1 + 2τy E3` on E(0, τ); equals `E1 + y E3` on Nil₃.
    Translation,
    /// `X_α = cos α (E1 + 2τy E3) + sin α (E2 − 2τx E3)` on E(0, τ).
    Horizontal(f64),
}

impl KillingField {
    fn coefficients(&self) -> Option<(f64, f64)> {
        match *self {
            KillingField::Vertical => None,
            KillingField::Translation => Some((1.0, 0.0)),
            KillingField::Horizontal(a) => Some((a.cos(), a.sin())),
        }
    }
}

impl VectorField for KillingField {
    fn value(&self, sp: &SpaceParams, p: &AmbientPoint) -> Result<Vec3> {
        sp.check(p)?;
        match self.coefficients() {
            None => Ok(Vec3::z()),
            Some((c, s)) => {
                sp.require_heisenberg()?;
                let t = sp.tau;
                Ok(Vec3::new(c, s, t * (c * p.y - s * p.x)))
            }
        }
    }

    fn jacobian(&self, sp: &SpaceParams, p: &AmbientPoint) -> Result<Mat3> {
        sp.check(p)?;
        match self.coefficients() {
            None => Ok(Mat3::zeros()),
            Some((c, s)) => {
                sp.require_heisenberg()?;
                let t = sp.tau;
                Ok(Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -t * s, t * c, 0.0))
            }
        }
    }
}

/// Vector field from a closure; differentiated numerically.
pub struct FnField<F>(pub F);

impl<F> VectorField for FnField<F>
where
    F: Fn(&AmbientPoint) -> Vec3 + Sync,
{
    fn value(&self, sp: &SpaceParams, p: &AmbientPoint) -> Result<Vec3> {
        sp.check(p)?;
        let v = (self.0)(p);
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Error::Numeric(format!(
                "field is not finite at ({}, {}, {})",
                p.x, p.y, p.z
            )))
        }
    }
}

/// One-parameter group of the translation field X on E(0, τ):
/// `φₜ(x, y, z) = (x + t, y, z + τty)`.
pub fn translation_flow(sp: &SpaceParams, t: f64, p: &AmbientPoint) -> Result<AmbientPoint> {
    sp.require_heisenberg()?;
    Ok(AmbientPoint::new(p.x + t, p.y, p.z + sp.tau * t * p.y))
}

/// `∇̄_v W` at p for a chart vector `v`.
pub fn covariant_derivative_along(
    sp: &SpaceParams,
    p: &AmbientPoint,
    v: &Vec3,
    w: &dyn VectorField,
) -> Result<Vec3> {
    let gamma = christoffel(sp, p)?;
    let wv = w.value(sp, p)?;
    Ok(w.jacobian(sp, p)? * v + christoffel_contract(&gamma, v, &wv))
}

/// `∇̄_V W` at p.
pub fn covariant_derivative(
    sp: &SpaceParams,
    v: &dyn VectorField,
    w: &dyn VectorField,
    p: &AmbientPoint,
) -> Result<TangentVector> {
    let vv = v.value(sp, p)?;
    TangentVector::new(*p, covariant_derivative_along(sp, p, &vv, w)?)
}

/// Connection coefficients `Γ̄ᵢⱼᵏ = ⟨∇̄_{Eᵢ}Eⱼ, Eₖ⟩` of the orthonormal frame,
/// 0-based and stored as `[i][j][k]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConnectionTable(pub [[[f64; 3]; 3]; 3]);

impl ConnectionTable {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.0[i][j][k]
    }

    pub fn max_abs_diff(&self, other: &ConnectionTable) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    m = m.max((self.0[i][j][k] - other.0[i][j][k]).abs());
                }
            }
        }
        m
    }
}

/// The constant table
/// `Γ̄₁₂³ = Γ̄₂₃¹ = −Γ̄₂₁³ = −Γ̄₁₃² = τ`, `Γ̄₃₂¹ = −Γ̄₃₁² = τ − σ`, all others zero.
pub fn connection_coefficients(sp: &SpaceParams) -> ConnectionTable {
    let (t, s) = (sp.tau, sp.sigma);
    let mut g = [[[0.0; 3]; 3]; 3];
    g[0][1][2] = t;
    g[1][2][0] = t;
    g[1][0][2] = -t;
    g[0][2][1] = -t;
    g[2][1][0] = t - s;
    g[2][0][1] = -(t - s);
    ConnectionTable(g)
}

/// Connection coefficients of the frame at p, from the chart Christoffel symbols.
pub fn connection_at(sp: &SpaceParams, p: &AmbientPoint) -> Result<ConnectionTable> {
    let f = frame_matrix(sp, p)?;
    let g = metric_at(sp, p)?;
    let mut out = [[[0.0; 3]; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        let ei: Vec3 = f.column(i).into();
        for (j, cell) in row.iter_mut().enumerate() {
            let d = covariant_derivative_along(sp, p, &ei, &FrameField(j))?;
            for (k, c) in cell.iter_mut().enumerate() {
                *c = d.dot(&(g * f.column(k)));
            }
        }
    }
    Ok(ConnectionTable(out))
}

/// Lie bracket `[V, W] = J_W V − J_V W` at p.
pub fn bracket(
    sp: &SpaceParams,
    v: &dyn VectorField,
    w: &dyn VectorField,
    p: &AmbientPoint,
) -> Result<Vec3> {
    let (vv, wv) = (v.value(sp, p)?, w.value(sp, p)?);
    Ok(w.jacobian(sp, p)? * vv - v.jacobian(sp, p)? * wv)
}

/// Riemann tensor in the chart, indexed `[l][i][j][k]` with
/// `R(∂ᵢ, ∂ⱼ)∂ₖ = Rˡᵢⱼₖ ∂ₗ` and `R(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_{[X,Y]}`.
#[derive(Clone, Debug)]
pub struct CurvatureTensor {
    pub base: AmbientPoint,
    pub r: [[[[f64; 3]; 3]; 3]; 3],
    metric: Mat3,
}

/// Curvature from the chart Christoffel symbols; their x, y derivatives are
/// fourth-order central differences (nothing depends on z).
pub fn curvature_at(sp: &SpaceParams, p: &AmbientPoint) -> Result<CurvatureTensor> {
    let h = fd_step(sp.local_scale(p));
    let gamma = christoffel(sp, p)?;
    let mut dgamma = [[[[0.0; 3]; 3]; 3]; 3]; // [m][k][i][j]
    for (m, dm) in dgamma.iter_mut().enumerate().take(2) {
        let s: Vec<Christoffel> = [2.0, 1.0, -1.0, -2.0]
            .iter()
            .map(|c| christoffel(sp, &p.offset(m, c * h)))
            .collect::<Result<_>>()?;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    dm[k][i][j] = (8.0 * (s[1][k][i][j] - s[2][k][i][j]) + s[3][k][i][j]
                        - s[0][k][i][j])
                        / (12.0 * h);
                }
            }
        }
    }
    let mut r = [[[[0.0; 3]; 3]; 3]; 3];
    for (l, rl) in r.iter_mut().enumerate() {
        for (i, rli) in rl.iter_mut().enumerate() {
            for (j, rlij) in rli.iter_mut().enumerate() {
                for (k, v) in rlij.iter_mut().enumerate() {
                    let mut acc = dgamma[i][l][j][k] - dgamma[j][l][i][k];
                    for m in 0..3 {
                        acc += gamma[l][i][m] * gamma[m][j][k] - gamma[l][j][m] * gamma[m][i][k];
                    }
                    *v = acc;
                }
            }
        }
    }
    Ok(CurvatureTensor {
        base: *p,
        r,
        metric: metric_at(sp, p)?,
    })
}

impl CurvatureTensor {
    /// `R(x, y)z` as a chart vector.
    pub fn apply(&self, x: &Vec3, y: &Vec3, z: &Vec3) -> Vec3 {
        Vec3::from_fn(|l, _| {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        acc += self.r[l][i][j][k] * x[i] * y[j] * z[k];
                    }
                }
            }
            acc
        })
    }

    /// Sectional curvature of span(a, b).
    pub fn sectional(&self, a: &Vec3, b: &Vec3) -> f64 {
        let g = &self.metric;
        let num = self.apply(a, b, b).dot(&(g * a));
        let (aa, bb, ab) = (a.dot(&(g * a)), b.dot(&(g * b)), a.dot(&(g * b)));
        num / (aa * bb - ab * ab)
    }

    /// `Ric(a, b) = trace(x ↦ R(x, a)b)`.
    pub fn ricci(&self, a: &Vec3, b: &Vec3) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    acc += self.r[i][i][j][k] * a[j] * b[k];
                }
            }
        }
        acc
    }
}

/// Closed-form sectional curvature of a plane whose unit normal has vertical
/// component `n3 = ⟨n, E3⟩`: `τ² + (κ − 4τ²) n3²`.
pub fn model_sectional_curvature(sp: &SpaceParams, n3: f64) -> f64 {
    sp.tau * sp.tau + (sp.kappa - 4.0 * sp.tau * sp.tau) * n3 * n3
}

/// Closed-form Ricci curvature of a unit vector with vertical component `v3`:
/// `κ − 2τ² + (4τ² − κ) v3²`.
pub fn model_ricci(sp: &SpaceParams, v3: f64) -> f64 {
    sp.kappa - 2.0 * sp.tau * sp.tau + (4.0 * sp.tau * sp.tau - sp.kappa) * v3 * v3
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn nil_metric_reference(p: &AmbientPoint) -> Mat3 {
        // dx² + dy² + (dz + ½(y dx − x dy))² expanded by hand.
        let (a, b) = (0.5 * p.y, -0.5 * p.x);
        Mat3::new(
            1.0 + a * a,
            a * b,
            a, //
            a * b,
            1.0 + b * b,
            b, //
            a,
            b,
            1.0,
        )
    }

    fn spaces() -> Vec<SpaceParams> {
        let mut v = Vec::new();
        for &k in &[-1.0, 0.0, 1.0] {
            for &t in &[0.0, 0.5, 1.0] {
                if let Ok(sp) = SpaceParams::new(k, t) {
                    v.push(sp);
                }
            }
        }
        v
    }

    #[test]
    fn rejects_space_forms() {
        assert!(SpaceParams::new(0.0, 0.0).is_err());
        assert!(SpaceParams::new(1.0, 0.5).is_err());
        assert!(SpaceParams::new(f64::NAN, 0.5).is_err());
        assert_eq!(SpaceParams::new(-1.0, 0.0).unwrap().sigma(), 0.0);
        assert_eq!(SpaceParams::new(-1.0, 0.5).unwrap().sigma(), -1.0);
    }

    #[test]
    fn sigma_is_never_read_from_json() {
        let sp: SpaceParams = serde_json::from_str(r#"{"kappa": -1, "tau": 0.5}"#).unwrap();
        assert_eq!(sp.sigma(), -1.0);
        assert!(serde_json::from_str::<SpaceParams>(r#"{"kappa": -1, "tau": 0.5, "sigma": 3}"#).is_err());
        assert!(serde_json::from_str::<SpaceParams>(r#"{"kappa": 0, "tau": 0}"#).is_err());
    }

    #[test]
    fn nil_metric_matches_model_exactly() {
        let sp = SpaceParams::nil();
        assert_eq!(metric_at(&sp, &AmbientPoint::ORIGIN).unwrap(), Mat3::identity());
        for &(x, y, z) in &[(0.3, -1.25, 2.0), (4.0, 2.5, -1.0), (-0.75, 0.5, 0.0)] {
            let p = AmbientPoint::new(x, y, z);
            assert_eq!(metric_at(&sp, &p).unwrap(), nil_metric_reference(&p));
        }
    }

    #[test]
    fn nil_frame_matches_left_invariant_fields() {
        let sp = SpaceParams::nil();
        let p = AmbientPoint::new(1.5, -2.0, 0.7);
        let f = frame_at(&sp, &p).unwrap();
        assert_eq!(f[0].components, Vec3::new(1.0, 0.0, 1.0));
        assert_eq!(f[1].components, Vec3::new(0.0, 1.0, 0.75));
        assert_eq!(f[2].components, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn product_chart_at_origin() {
        let sp = SpaceParams::new(-1.0, 0.0).unwrap();
        let o = AmbientPoint::ORIGIN;
        assert_eq!(metric_at(&sp, &o).unwrap(), Mat3::identity());
        assert_eq!(frame_matrix(&sp, &o).unwrap(), Mat3::identity());
    }

    #[test]
    fn hyperbolic_chart_is_a_disk() {
        let sp = SpaceParams::new(-1.0, 0.0).unwrap();
        assert!(metric_at(&sp, &AmbientPoint::new(1.9, 0.0, 0.0)).is_ok());
        assert!(matches!(
            metric_at(&sp, &AmbientPoint::new(2.0, 0.1, 0.0)),
            Err(Error::OutsideChart { .. })
        ));
    }

    #[test]
    fn connection_table_values() {
        let nil = connection_coefficients(&SpaceParams::nil());
        assert_eq!(nil.get(0, 1, 2), 0.5);
        assert_eq!(nil.get(2, 1, 0), 0.5);
        let prod = connection_coefficients(&SpaceParams::new(-1.0, 0.0).unwrap());
        assert!(prod.0.iter().flatten().flatten().all(|&v| v == 0.0));
        let sl2 = connection_coefficients(&SpaceParams::new(-1.0, 0.5).unwrap());
        assert_eq!(sl2.get(2, 1, 0), 1.5);
        assert_eq!(sl2.get(2, 0, 1), -1.5);
    }

    #[test]
    fn constant_table_is_the_frame_connection_when_tau_nonzero() {
        for sp in spaces().into_iter().filter(|sp| sp.tau() != 0.0) {
            for &(x, y, z) in &[(0.0, 0.0, 0.0), (0.4, -0.3, 1.7), (-0.9, 0.6, -2.2)] {
                let p = AmbientPoint::new(x, y, z);
                let d = connection_at(&sp, &p).unwrap().max_abs_diff(&connection_coefficients(&sp));
                assert!(d < 1e-12, "{sp:?} at {p:?}: {d}");
            }
        }
    }

    #[test]
    fn product_spaces_match_table_only_over_origin() {
        let sp = SpaceParams::new(-1.0, 0.0).unwrap();
        let table = connection_coefficients(&sp);
        let at0 = connection_at(&sp, &AmbientPoint::new(0.0, 0.0, 3.0)).unwrap();
        assert!(at0.max_abs_diff(&table) < 1e-14);
        let off = connection_at(&sp, &AmbientPoint::new(0.5, 0.2, 0.0)).unwrap();
        assert!(off.max_abs_diff(&table) > 0.1);
        // ∇̄_X E3 = τ X × E3 = 0 still holds everywhere.
        for i in 0..3 {
            for k in 0..3 {
                assert!(off.get(i, 2, k).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn nabla_e1_e1_vanishes_and_nabla_e1_e2_is_tau_e3() {
        for sp in spaces().into_iter().filter(|sp| sp.tau() != 0.0 || sp.kappa() == 0.0) {
            let p = AmbientPoint::new(0.3, 0.8, -0.4);
            let d11 = covariant_derivative(&sp, &FrameField(0), &FrameField(0), &p).unwrap();
            assert!(d11.components.norm() < 1e-12);
            let d12 = covariant_derivative(&sp, &FrameField(0), &FrameField(1), &p).unwrap();
            let e3 = Vec3::z() * sp.tau();
            assert!((d12.components - e3).norm() < 1e-12);
        }
    }

    #[test]
    fn nabla_x_e3_is_tau_x_cross_e3() {
        for sp in spaces() {
            let p = AmbientPoint::new(-0.2, 0.5, 0.9);
            for i in 0..3 {
                let x = frame_matrix(&sp, &p).unwrap().column(i).into();
                let lhs = covariant_derivative_along(&sp, &p, &x, &FrameField(2)).unwrap();
                let rhs = cross(&sp, &p, &x, &Vec3::z()).unwrap() * sp.tau();
                assert!((lhs - rhs).norm() < 1e-12, "{sp:?} i={i}");
            }
        }
        // E2 × E3 = E1, so ∇̄_{E2}E3 = τE1.
        let sp = SpaceParams::nil();
        let p = AmbientPoint::new(1.0, 2.0, 3.0);
        let d = covariant_derivative(&sp, &FrameField(1), &FrameField(2), &p).unwrap();
        assert!((d.components - 0.5 * frame_matrix(&sp, &p).unwrap().column(0)).norm() < 1e-12);
    }

    #[test]
    fn cross_product_is_oriented() {
        for sp in spaces() {
            let p = AmbientPoint::new(0.2, -0.7, 1.3);
            let f = frame_matrix(&sp, &p).unwrap();
            let e: Vec<Vec3> = (0..3).map(|i| f.column(i).into()).collect();
            assert!((cross(&sp, &p, &e[0], &e[1]).unwrap() - e[2]).norm() < 1e-12);
            assert!((cross(&sp, &p, &e[1], &e[2]).unwrap() - e[0]).norm() < 1e-12);
            assert!((cross(&sp, &p, &e[2], &e[0]).unwrap() - e[1]).norm() < 1e-12);
            assert_abs_diff_eq!(volume_form(&sp, &p, &e[0], &e[1], &e[2]).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn brackets_by_finite_differences() {
        struct Numeric(FrameField);
        impl VectorField for Numeric {
            fn value(&self, sp: &SpaceParams, p: &AmbientPoint) -> Result<Vec3> {
                self.0.value(sp, p)
            }
        }
        for sp in spaces().into_iter().filter(|sp| sp.tau() != 0.0) {
            let p = AmbientPoint::new(0.35, -0.6, 0.8);
            let f = frame_matrix(&sp, &p).unwrap();
            let e = |i: usize| -> Vec3 { f.column(i).into() };
            let b12 = bracket(&sp, &Numeric(FrameField(0)), &Numeric(FrameField(1)), &p).unwrap();
            let b23 = bracket(&sp, &Numeric(FrameField(1)), &Numeric(FrameField(2)), &p).unwrap();
            let b31 = bracket(&sp, &Numeric(FrameField(2)), &Numeric(FrameField(0)), &p).unwrap();
            assert!((b12 - 2.0 * sp.tau() * e(2)).norm() < 1e-6);
            assert!((b23 - sp.sigma() * e(0)).norm() < 1e-6);
            assert!((b31 - sp.sigma() * e(1)).norm() < 1e-6);
        }
    }

    #[test]
    fn analytic_and_numeric_frame_jacobians_agree() {
        for sp in spaces() {
            let p = AmbientPoint::new(0.4, 0.1, -1.1);
            for i in 0..3 {
                let f = FrameField(i);
                let num = FnField(|q: &AmbientPoint| f.value(&sp, q).unwrap());
                let d = (f.jacobian(&sp, &p).unwrap() - num.jacobian(&sp, &p).unwrap()).norm();
                assert!(d < 1e-9, "{sp:?} E{} : {d}", i + 1);
            }
        }
    }

    #[test]
    fn killing_fields_on_nil() {
        let sp = SpaceParams::nil();
        let p = AmbientPoint::new(0.0, 1.5, -0.5);
        assert_eq!(translation_flow(&sp, 2.0, &p).unwrap(), AmbientPoint::new(2.0, 1.5, 1.0));
        let x = KillingField::Translation.value(&sp, &p).unwrap();
        let x0 = KillingField::Horizontal(0.0).value(&sp, &p).unwrap();
        assert_eq!(x, x0);
        let f = frame_matrix(&sp, &p).unwrap();
        assert!((x - (f.column(0) + p.y * f.column(2))).norm() < 1e-15);
        let xa = KillingField::Horizontal(0.7).value(&sp, &p).unwrap();
        let expect = 0.7f64.cos() * (f.column(0) + p.y * f.column(2))
            + 0.7f64.sin() * (f.column(1) - p.x * f.column(2));
        assert!((xa - expect).norm() < 1e-15);
        assert!(KillingField::Translation
            .value(&SpaceParams::new(-1.0, 0.5).unwrap(), &p)
            .is_err());
        assert!(translation_flow(&SpaceParams::new(-1.0, 0.0).unwrap(), 1.0, &p).is_err());
    }

    #[test]
    fn killing_equation_residual() {
        let nil = SpaceParams::nil();
        let cases: Vec<(SpaceParams, KillingField)> = vec![
            (nil, KillingField::Translation),
            (nil, KillingField::Horizontal(0.4)),
            (nil, KillingField::Horizontal(2.0)),
            (SpaceParams::new(-1.0, 0.5).unwrap(), KillingField::Vertical),
            (SpaceParams::new(1.0, 0.0).unwrap(), KillingField::Vertical),
        ];
        for (sp, k) in cases {
            for &(x, y, z) in &[(0.1, 0.2, 0.3), (-0.8, 0.5, 2.0), (0.6, -0.9, -1.0)] {
                let p = AmbientPoint::new(x, y, z);
                let g = metric_at(&sp, &p).unwrap();
                let basis = [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(0.3, -1.0, 0.5)];
                for v in &basis {
                    for w in &basis {
                        let dv = covariant_derivative_along(&sp, &p, v, &k).unwrap();
                        let dw = covariant_derivative_along(&sp, &p, w, &k).unwrap();
                        let res = dv.dot(&(g * w)) + dw.dot(&(g * v));
                        assert!(res.abs() < 1e-8, "{k:?} {res}");
                    }
                }
            }
        }
    }

    #[test]
    fn chart_curvature_matches_closed_forms() {
        for sp in spaces() {
            let p = AmbientPoint::new(0.3, -0.45, 0.6);
            let r = curvature_at(&sp, &p).unwrap();
            let f = frame_matrix(&sp, &p).unwrap();
            let e = |i: usize| -> Vec3 { f.column(i).into() };
            let kh = r.sectional(&e(0), &e(1));
            let kv = r.sectional(&e(0), &e(2));
            assert_abs_diff_eq!(kh, model_sectional_curvature(&sp, 1.0), epsilon = 1e-8);
            assert_abs_diff_eq!(kv, model_sectional_curvature(&sp, 0.0), epsilon = 1e-8);
            let v = (e(0) * 0.6 + e(2) * 0.8).normalize();
            let vn = v / norm(&sp, &p, &v).unwrap();
            let v3 = inner(&sp, &p, &vn, &e(2)).unwrap();
            assert_abs_diff_eq!(r.ricci(&vn, &vn), model_ricci(&sp, v3), epsilon = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal(x in -1.5f64..1.5, y in -1.5f64..1.5, z in -5.0f64..5.0, si in 0usize..8) {
            let sp = spaces()[si % spaces().len()];
            let p = AmbientPoint::new(x, y, z);
            prop_assume!(sp.in_chart(&p) && sp.conformal_factor(&p).unwrap() < 50.0);
            let f = frame_matrix(&sp, &p).unwrap();
            let gram = f.transpose() * metric_at(&sp, &p).unwrap() * f;
            prop_assert!((gram - Mat3::identity()).abs().max() < 1e-12);
        }

        #[test]
        fn levi_civita_is_metric_compatible(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -2.0f64..2.0, si in 0usize..8) {
            let sp = spaces()[si % spaces().len()];
            let p = AmbientPoint::new(x, y, z);
            let v_field = FnField(|q: &AmbientPoint| Vec3::new(q.y.sin(), 1.0 + q.x * q.z, q.x.cos()));
            let w_field = FnField(|q: &AmbientPoint| Vec3::new(q.z, q.x * q.y, 0.5 - q.y));
            let dir = Vec3::new(0.7, -0.2, 0.4);
            let h = 1e-3;
            let pair = |q: &AmbientPoint| {
                inner(&sp, q, &v_field.value(&sp, q).unwrap(), &w_field.value(&sp, q).unwrap()).unwrap()
            };
            let along = |t: f64| pair(&AmbientPoint::from_vec(&(p.to_vec() + dir * t)));
            let lhs = central4(along, h);
            let g = metric_at(&sp, &p).unwrap();
            let dv = covariant_derivative_along(&sp, &p, &dir, &v_field).unwrap();
            let dw = covariant_derivative_along(&sp, &p, &dir, &w_field).unwrap();
            let rhs = dv.dot(&(g * w_field.value(&sp, &p).unwrap())) + dw.dot(&(g * v_field.value(&sp, &p).unwrap()));
            prop_assert!((lhs - rhs).abs() < 1e-6, "{} vs {}", lhs, rhs);
        }
    }
}
