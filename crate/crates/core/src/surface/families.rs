use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Complex;

use super::{vec3, Immersion, Jet};
use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, SpaceParams};
use crate::grid::Rect;

/// Vertical cylinder `π⁻¹(γ)` over a curve of constant geodesic curvature
/// `k_γ` through the origin of M²(κ), parameterized by arclength `s` along
/// the horizontal lift of γ and fibre length `t`.
///
/// γ is the orbit of the origin under a one-parameter group of isometries of
/// the conformal model, `w(s) = S(s) / (C(s) − iαS(s))` with `α = −k_γ/2`,
/// `Δ = α² + κ/4`, `S' = C`, `C' = −ΔS`. On this orbit `λ = |C − iαS|²`,
/// which makes the lift height and all derivatives closed-form. The curve
/// leaves the origin in the +y direction, so `k_γ = 0` over Nil₃ is the plane `x = 0`.
#[derive(Clone, Debug)]
pub struct CylinderImmersion {
    space: SpaceParams,
    k_gamma: f64,
    domain: Rect,
    alpha: f64,
    delta: f64,
}

impl CylinderImmersion {
    pub fn new(space: SpaceParams, k_gamma: f64, domain: Rect) -> Result<Self> {
        if !k_gamma.is_finite() {
            return Err(Error::Contract(format!("geodesic curvature {k_gamma} is not finite")));
        }
        let alpha = -0.5 * k_gamma;
        let delta = alpha * alpha + 0.25 * space.kappa();
        // Only a great circle (κ > 0, k_γ = 0) reaches the point at infinity of the chart.
        if space.kappa() > 0.0 && alpha == 0.0 {
            let limit = 0.5 * PI / delta.sqrt();
            let reach = domain.s0.abs().max(domain.s1.abs());
            if reach >= limit * (1.0 - 1e-3) {
                return Err(Error::ChartExit(format!(
                    "great-circle arc |s| <= {reach} crosses the antipode of the chart origin at s = {limit}"
                )));
            }
        }
        Ok(CylinderImmersion {
            space,
            k_gamma,
            domain,
            alpha,
            delta,
        })
    }

    pub fn k_gamma(&self) -> f64 {
        self.k_gamma
    }

    /// `(C(s), S(s))`.
    fn trig(&self, s: f64) -> (f64, f64) {
        let d = self.delta;
        if d > 0.0 {
            let w = d.sqrt();
            ((w * s).cos(), (w * s).sin() / w)
        } else if d < 0.0 {
            let w = (-d).sqrt();
            ((w * s).cosh(), (w * s).sinh() / w)
        } else {
            (1.0, s)
        }
    }

    /// Continuous branch of `arg(C + iαS)`.
    fn phase(&self, s: f64, c: f64, sn: f64) -> f64 {
        let a = self.alpha;
        if a == 0.0 {
            return 0.0;
        }
        let base = (a * sn).atan2(c);
        if self.delta > 0.0 {
            let target = a.signum() * self.delta.sqrt() * s;
            base + 2.0 * PI * ((target - base) / (2.0 * PI)).round()
        } else {
            base
        }
    }

    /// Height of the horizontal lift over γ(s), with `h(0) = 0`.
    fn lift_height(&self, s: f64, c: f64, sn: f64) -> f64 {
        let (k, t, a) = (self.space.kappa(), self.space.tau(), self.alpha);
        if a == 0.0 || t == 0.0 {
            0.0
        } else if k.abs() < 1e-9 {
            (t / a) * (0.5 * s - (2.0 * a * s).sin() / (4.0 * a))
        } else {
            (4.0 * t / k) * (self.phase(s, c, sn) - a * s)
        }
    }
}

impl Immersion for CylinderImmersion {
    fn space(&self) -> SpaceParams {
        self.space
    }

    fn domain(&self) -> Rect {
        self.domain
    }

    fn jet(&self, s: f64, t: f64) -> Result<Jet> {
        let (a, d, k, tau) = (self.alpha, self.delta, self.space.kappa(), self.space.tau());
        let (c, sn) = self.trig(s);
        let den = Complex::new(c, -a * sn);
        let w = Complex::new(sn, 0.0) / den;
        let w1 = Complex::new(1.0, 0.0) / (den * den);
        let w2 = Complex::new(2.0 * d * sn, 2.0 * a * c) / (den * den * den);
        let q = den.norm_sqr();
        let h = self.lift_height(s, c, sn);
        let h1 = tau * a * sn * sn / q;
        let h2 = tau * a * (2.0 * sn * c * q + 0.5 * k * sn * sn * sn * c) / (q * q);
        // Rotate by a quarter turn so the curve leaves the origin along +y.
        let (w, w1, w2) = (w * Complex::i(), w1 * Complex::i(), w2 * Complex::i());
        let point = AmbientPoint::new(w.re, w.im, h + t);
        self.space.check(&point).map_err(|_| {
            Error::ChartExit(format!("curve leaves the chart at s = {s}"))
        })?;
        Ok(Jet {
            point,
            fs: vec3(w1.re, w1.im, h1),
            ft: vec3(0.0, 0.0, 1.0),
            fss: vec3(w2.re, w2.im, h2),
            fst: vec3(0.0, 0.0, 0.0),
            ftt: vec3(0.0, 0.0, 0.0),
        })
    }
}

/// The entire minimal vertical graphs `M_θ` of Nil₃,
/// `z = xy/2 + (sinh 2θ / 2)[y√(1+y²) + ln(y + √(1+y²))]`, parameterized by (x, y).
#[derive(Clone, Copy, Debug)]
pub struct FmpSurface {
    pub theta: f64,
    pub domain: Rect,
}

impl FmpSurface {
    pub fn new(theta: f64, domain: Rect) -> Self {
        FmpSurface { theta, domain }
    }

    fn strength(&self) -> f64 {
        (2.0 * self.theta).sinh()
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        let r = (1.0 + y * y).sqrt();
        0.5 * x * y + 0.5 * self.strength() * (y * r + y.asinh())
    }

    /// Frame components of the global tangent fields
    /// `T1 = E1 + y E3` and `T2 = E2 + sinh(2θ)√(1+y²) E3`.
    pub fn tangent_frame_components(&self, y: f64) -> [[f64; 3]; 2] {
        [
            [1.0, 0.0, y],
            [0.0, 1.0, self.strength() * (1.0 + y * y).sqrt()],
        ]
    }
}

impl Immersion for FmpSurface {
    fn space(&self) -> SpaceParams {
        SpaceParams::nil()
    }

    fn domain(&self) -> Rect {
        self.domain
    }

    fn jet(&self, x: f64, y: f64) -> Result<Jet> {
        let st = self.strength();
        let r = (1.0 + y * y).sqrt();
        Ok(Jet {
            point: AmbientPoint::new(x, y, self.height(x, y)),
            fs: vec3(1.0, 0.0, 0.5 * y),
            ft: vec3(0.0, 1.0, 0.5 * x + st * r),
            fss: vec3(0.0, 0.0, 0.0),
            fst: vec3(0.0, 0.0, 0.5),
            ftt: vec3(0.0, 0.0, st * y / r),
        })
    }
}

/// Value and derivatives up to second order of a graph function u(y, z).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GraphJet {
    pub u: f64,
    pub uy: f64,
    pub uz: f64,
    pub uyy: f64,
    pub uyz: f64,
    pub uzz: f64,
}

pub trait GraphProfile: Send + Sync {
    fn eval(&self, y: f64, z: f64) -> GraphJet;
}

/// `u = a·y + c·z + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineProfile {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GraphProfile for AffineProfile {
    fn eval(&self, y: f64, z: f64) -> GraphJet {
        GraphJet {
            u: self.a * y + self.c * z + self.b,
            uy: self.a,
            uz: self.c,
            ..Default::default()
        }
    }
}

/// `u = cyy·y² + cyz·yz + czz·z² + cy·y + cz·z + c0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QuadraticProfile {
    pub cyy: f64,
    pub cyz: f64,
    pub czz: f64,
    pub cy: f64,
    pub cz: f64,
    pub c0: f64,
}

impl GraphProfile for QuadraticProfile {
    fn eval(&self, y: f64, z: f64) -> GraphJet {
        GraphJet {
            u: self.cyy * y * y + self.cyz * y * z + self.czz * z * z + self.cy * y + self.cz * z + self.c0,
            uy: 2.0 * self.cyy * y + self.cyz * z + self.cy,
            uz: self.cyz * y + 2.0 * self.czz * z + self.cz,
            uyy: 2.0 * self.cyy,
            uyz: self.cyz,
            uzz: 2.0 * self.czz,
        }
    }
}

impl<F> GraphProfile for F
where
    F: Fn(f64, f64) -> GraphJet + Send + Sync,
{
    fn eval(&self, y: f64, z: f64) -> GraphJet {
        self(y, z)
    }
}

/// Horizontal graph `F(y, z) = φ_{u(y,z)}(0, y, z) = (u, y, z + τ y u)` along
/// the Killing field X of E(0, τ).
#[derive(Clone)]
pub struct HorizontalGraph {
    space: SpaceParams,
    profile: Arc<dyn GraphProfile>,
    domain: Rect,
}

impl HorizontalGraph {
    pub fn new(space: SpaceParams, profile: Arc<dyn GraphProfile>, domain: Rect) -> Result<Self> {
        space.require_heisenberg()?;
        Ok(HorizontalGraph {
            space,
            profile,
            domain,
        })
    }

    /// Graph over Nil₃.
    pub fn nil(profile: impl GraphProfile + 'static, domain: Rect) -> Self {
        HorizontalGraph {
            space: SpaceParams::nil(),
            profile: Arc::new(profile),
            domain,
        }
    }

    /// The vertical plane `Π_{a,b} = {x = a y + b}`.
    pub fn vertical_plane(a: f64, b: f64, domain: Rect) -> Self {
        Self::nil(AffineProfile { a, b, c: 0.0 }, domain)
    }

    pub fn profile(&self) -> &dyn GraphProfile {
        self.profile.as_ref()
    }
}

impl Immersion for HorizontalGraph {
    fn space(&self) -> SpaceParams {
        self.space
    }

    fn domain(&self) -> Rect {
        self.domain
    }

    fn jet(&self, y: f64, z: f64) -> Result<Jet> {
        let t = self.space.tau();
        let g = self.profile.eval(y, z);
        Ok(Jet {
            point: AmbientPoint::new(g.u, y, z + t * y * g.u),
            fs: vec3(g.uy, 1.0, t * (g.u + y * g.uy)),
            ft: vec3(g.uz, 0.0, 1.0 + t * y * g.uz),
            fss: vec3(g.uyy, 0.0, t * (2.0 * g.uy + y * g.uyy)),
            fst: vec3(g.uyz, 0.0, t * (g.uz + y * g.uyz)),
            ftt: vec3(g.uzz, 0.0, t * y * g.uzz),
        })
    }
}
