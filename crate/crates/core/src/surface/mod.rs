//! Immersed parameterized surfaces in E(κ, τ).
//!
//! Every immersion exposes a second-order [`Jet`] of its chart map. The first
//! and second fundamental forms, the unit normal and the curvatures are
//! assembled from that jet together with the chart Christoffel symbols, so
//! the same code serves closed-form families and grid-sampled data.
//!
//! Conventions: the normal η makes `{F_s, F_t, η}` a direct frame, the
//! shape operator is `A = I⁻¹ II`, its eigenvalues are the principal
//! curvatures and `H = tr(A)/2` is taken with respect to the declared η.
//! The Gauss curvature `K` is intrinsic (Brioschi formula on the first
//! fundamental form) and is never derived from the Gauss equation.

mod families;
mod sampled;
mod spec;

pub use families::{
    AffineProfile, CylinderImmersion, FmpSurface, GraphJet, GraphProfile, HorizontalGraph,
    QuadraticProfile,
};
pub use sampled::GridImmersion;
pub use spec::{GraphProfileSpec, SurfaceSpec};

use nalgebra::{Matrix2, SymmetricEigen, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    self, christoffel, christoffel_contract, curvature_at, inner, metric_at, AmbientPoint,
    KillingField, SpaceParams, TangentVector, Vec3, VectorField,
};
use crate::grid::Rect;

pub type Mat2 = Matrix2<f64>;

/// Chart map and its partial derivatives up to second order at (s, t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub point: AmbientPoint,
    pub fs: Vec3,
    pub ft: Vec3,
    pub fss: Vec3,
    pub fst: Vec3,
    pub ftt: Vec3,
}

/// First fundamental form `(E, F, G)` with its partial derivatives up to second order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricJet {
    pub value: [f64; 3],
    pub ds: [f64; 3],
    pub dt: [f64; 3],
    pub dss: [f64; 3],
    pub dst: [f64; 3],
    pub dtt: [f64; 3],
}

impl MetricJet {
    /// Gauss curvature by Brioschi's formula.
    pub fn gauss_curvature(&self) -> f64 {
        let [e, f, g] = self.value;
        let [es, fs, gs] = self.ds;
        let [et, ft, gt] = self.dt;
        let m1 = nalgebra::Matrix3::new(
            -0.5 * self.dtt[0] + self.dst[1] - 0.5 * self.dss[2],
            0.5 * es,
            fs - 0.5 * et,
            ft - 0.5 * gs,
            e,
            f,
            0.5 * gt,
            f,
            g,
        );
        let m2 = nalgebra::Matrix3::new(0.0, 0.5 * et, 0.5 * gs, 0.5 * et, e, f, 0.5 * gs, f, g);
        let det = e * g - f * f;
        (m1.determinant() - m2.determinant()) / (det * det)
    }
}

pub trait Immersion: Send + Sync {
    fn space(&self) -> SpaceParams;

    /// Parameter rectangle on which the immersion is declared.
    fn domain(&self) -> Rect;

    fn jet(&self, s: f64, t: f64) -> Result<Jet>;

    fn point(&self, s: f64, t: f64) -> Result<AmbientPoint> {
        Ok(self.jet(s, t)?.point)
    }

    fn first_form(&self, s: f64, t: f64) -> Result<Mat2> {
        let j = self.jet(s, t)?;
        first_form_of(&self.space(), &j)
    }

    /// Defaults to fourth-order differences of [`Immersion::first_form`].
    fn metric_jet(&self, s: f64, t: f64) -> Result<MetricJet> {
        let d = self.domain();
        let h = 1e-3 * d.width().min(d.height()).min(1.0);
        let efg = |ds: f64, dt: f64| -> Result<[f64; 3]> {
            let i = self.first_form(s + ds, t + dt)?;
            Ok([i[(0, 0)], i[(0, 1)], i[(1, 1)]])
        };
        let offsets = [-2.0, -1.0, 1.0, 2.0];
        let first = [1.0, -8.0, 8.0, -1.0];
        let second = [-1.0, 16.0, 16.0, -1.0];
        let center = efg(0.0, 0.0)?;
        let mut mj = MetricJet {
            value: center,
            ..Default::default()
        };
        for (k, &o) in offsets.iter().enumerate() {
            let es = efg(o * h, 0.0)?;
            let et = efg(0.0, o * h)?;
            for c in 0..3 {
                mj.ds[c] += first[k] * es[c] / (12.0 * h);
                mj.dt[c] += first[k] * et[c] / (12.0 * h);
                mj.dss[c] += second[k] * es[c] / (12.0 * h * h);
                mj.dtt[c] += second[k] * et[c] / (12.0 * h * h);
            }
            for (l, &o2) in offsets.iter().enumerate() {
                let v = efg(o * h, o2 * h)?;
                for c in 0..3 {
                    mj.dst[c] += first[k] * first[l] * v[c] / (144.0 * h * h);
                }
            }
        }
        for c in 0..3 {
            mj.dss[c] -= 30.0 * center[c] / (12.0 * h * h);
            mj.dtt[c] -= 30.0 * center[c] / (12.0 * h * h);
        }
        Ok(mj)
    }
}

fn first_form_of(sp: &SpaceParams, j: &Jet) -> Result<Mat2> {
    let g = metric_at(sp, &j.point)?;
    let (e, f, gg) = (j.fs.dot(&(g * j.fs)), j.fs.dot(&(g * j.ft)), j.ft.dot(&(g * j.ft)));
    Ok(Mat2::new(e, f, f, gg))
}

/// Local extrinsic data shared by the full and the light-weight evaluations.
struct LocalFrame {
    first: Mat2,
    second: Mat2,
    normal: Vec3,
}

fn local_frame(sp: &SpaceParams, s: f64, t: f64, j: &Jet) -> Result<LocalFrame> {
    let p = j.point;
    let first = first_form_of(sp, j)?;
    let eig = SymmetricEigen::new(first).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let sv = [lo.max(0.0).sqrt(), hi.max(0.0).sqrt()];
    if !(lo.is_finite() && hi.is_finite()) || lo <= 1e-24 * hi.max(1e-300) || hi <= 0.0 {
        return Err(Error::Degenerate {
            s,
            t,
            singular_values: sv,
        });
    }
    let ginv = geometry::inverse_metric(sp, &p)?;
    let raw = ginv * j.fs.cross(&j.ft);
    let normal = raw / geometry::norm(sp, &p, &raw)?;
    let gamma = christoffel(sp, &p)?;
    let g = metric_at(sp, &p)?;
    let gn = g * normal;
    let second_entry =
        |d2: &Vec3, a: &Vec3, b: &Vec3| (d2 + christoffel_contract(&gamma, a, b)).dot(&gn);
    let l = second_entry(&j.fss, &j.fs, &j.fs);
    let m = second_entry(&j.fst, &j.fs, &j.ft);
    let n = second_entry(&j.ftt, &j.ft, &j.ft);
    Ok(LocalFrame {
        first,
        second: Mat2::new(l, m, m, n),
        normal,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalForms {
    pub first: Mat2,
    pub second: Mat2,
    pub normal: TangentVector,
    /// Mean curvature `tr(I⁻¹ II)/2`.
    pub mean: f64,
    /// Intrinsic Gauss curvature.
    pub gauss: f64,
    /// `det II / det I`.
    pub extrinsic: f64,
    /// Angle function `η₃ = ⟨η, E3⟩`.
    pub angle: f64,
    /// Ambient sectional curvature of the tangent plane.
    pub ambient_sectional: f64,
    /// `Ric(η, η)`.
    pub ricci_normal: f64,
    /// Chart tangent vectors `F_s`, `F_t`.
    pub tangents: [Vec3; 2],
}

impl FundamentalForms {
    pub fn shape_operator(&self) -> Mat2 {
        self.first.try_inverse().unwrap_or_else(Mat2::zeros) * self.second
    }

    /// `|A|² = tr(A²)`.
    pub fn shape_norm_sq(&self) -> f64 {
        let a = self.shape_operator();
        (a * a).trace()
    }

    /// Principal curvatures `k₁ ≤ k₂`.
    pub fn principal_curvatures(&self) -> [f64; 2] {
        let disc = self.pinch().max(0.0).sqrt();
        [self.mean - disc, self.mean + disc]
    }

    /// `H² − det A = ¼(k₁ − k₂)²`.
    pub fn pinch(&self) -> f64 {
        self.mean * self.mean - self.extrinsic
    }

    /// Second fundamental form in the orthonormal basis obtained by
    /// Gram–Schmidt from `(F_s, F_t)`.
    pub fn second_orthonormal(&self) -> Mat2 {
        let (e, f, g) = (self.first[(0, 0)], self.first[(0, 1)], self.first[(1, 1)]);
        let a = 1.0 / e.sqrt();
        let d = (e * g - f * f).sqrt();
        // Columns express e1, e2 in the (F_s, F_t) basis.
        let p = Mat2::new(a, -f / (e.sqrt() * d), 0.0, e.sqrt() / d);
        p.transpose() * self.second * p
    }

    /// Same forms for the opposite normal.
    pub fn flipped(&self) -> FundamentalForms {
        FundamentalForms {
            second: -self.second,
            normal: TangentVector {
                base: self.normal.base,
                components: -self.normal.components,
            },
            mean: -self.mean,
            angle: -self.angle,
            ..*self
        }
    }

    /// `q = |A|² + Ric(η)`.
    pub fn potential_q(&self) -> f64 {
        self.shape_norm_sq() + self.ricci_normal
    }

    /// `q̃ = 3H² + κ − τ² + (H² − det A)`, so that `L = Δ − K + q̃`.
    pub fn potential_qtilde(&self, sp: &SpaceParams) -> f64 {
        3.0 * self.mean * self.mean + sp.kappa() - sp.tau() * sp.tau() + self.pinch()
    }

    /// Residual `K − K̄ − det II / det I` of the Gauss equation.
    pub fn gauss_equation_residual(&self) -> f64 {
        self.gauss - self.ambient_sectional - self.extrinsic
    }
}

pub fn fundamental_forms(imm: &dyn Immersion, s: f64, t: f64) -> Result<FundamentalForms> {
    let sp = imm.space();
    let d = imm.domain();
    if !d.contains(s, t, 1e-9 * (d.width() + d.height())) {
        return Err(Error::Contract(format!(
            "parameter ({s}, {t}) outside the immersion domain"
        )));
    }
    let j = imm.jet(s, t)?;
    let lf = local_frame(&sp, s, t, &j)?;
    let p = j.point;
    let curv = curvature_at(&sp, &p)?;
    let first_det = lf.first.determinant();
    let mean = 0.5 * (lf.first.try_inverse().unwrap() * lf.second).trace();
    let gauss = imm.metric_jet(s, t)?.gauss_curvature();
    let angle = inner(&sp, &p, &lf.normal, &Vec3::z())?;
    Ok(FundamentalForms {
        first: lf.first,
        second: lf.second,
        normal: TangentVector::new(p, lf.normal)?,
        mean,
        gauss,
        extrinsic: lf.second.determinant() / first_det,
        angle,
        ambient_sectional: curv.sectional(&j.fs, &j.ft),
        ricci_normal: curv.ricci(&lf.normal, &lf.normal),
        tangents: [j.fs, j.ft],
    })
}

/// Mean curvature only; skips the curvature tensor and the metric jet.
pub fn mean_curvature(imm: &dyn Immersion, s: f64, t: f64) -> Result<f64> {
    let sp = imm.space();
    let j = imm.jet(s, t)?;
    let lf = local_frame(&sp, s, t, &j)?;
    Ok(0.5 * (lf.first.try_inverse().unwrap() * lf.second).trace())
}

/// Unit normal at (s, t) as chart components.
pub fn unit_normal(imm: &dyn Immersion, s: f64, t: f64) -> Result<TangentVector> {
    let sp = imm.space();
    let j = imm.jet(s, t)?;
    let lf = local_frame(&sp, s, t, &j)?;
    TangentVector::new(j.point, lf.normal)
}

/// Stability potential `q = |A|² + Ric(η)` at (s, t).
pub fn potential_q(imm: &dyn Immersion, s: f64, t: f64) -> Result<f64> {
    let sp = imm.space();
    let j = imm.jet(s, t)?;
    let lf = local_frame(&sp, s, t, &j)?;
    let a = lf.first.try_inverse().unwrap() * lf.second;
    let ric = curvature_at(&sp, &j.point)?.ricci(&lf.normal, &lf.normal);
    Ok((a * a).trace() + ric)
}

/// `q̃ = 3H² + κ − τ² + (H² − det A)` at (s, t).
pub fn potential_qtilde(imm: &dyn Immersion, s: f64, t: f64) -> Result<f64> {
    let sp = imm.space();
    let j = imm.jet(s, t)?;
    let lf = local_frame(&sp, s, t, &j)?;
    let a = lf.first.try_inverse().unwrap() * lf.second;
    let h = 0.5 * a.trace();
    Ok(3.0 * h * h + sp.kappa() - sp.tau() * sp.tau() + (h * h - a.determinant()))
}

/// Inner products of the unit normal with the vertical field and, on E(0, τ),
/// with the horizontal Killing fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JacobiCandidates {
    /// `η₃ = ⟨η, E3⟩`.
    pub angle: f64,
    /// `⟨η, X⟩`.
    pub translation: Option<f64>,
    /// `⟨η, X_α⟩` for the requested α.
    pub horizontal: Option<f64>,
}

pub fn jacobi_candidates(
    imm: &dyn Immersion,
    s: f64,
    t: f64,
    alpha: Option<f64>,
) -> Result<JacobiCandidates> {
    let sp = imm.space();
    let n = unit_normal(imm, s, t)?;
    let p = n.base;
    let angle = inner(&sp, &p, &n.components, &Vec3::z())?;
    let (translation, horizontal) = if sp.is_heisenberg() {
        let x = KillingField::Translation.value(&sp, &p)?;
        let tr = inner(&sp, &p, &n.components, &x)?;
        let hz = match alpha {
            Some(a) => Some(inner(&sp, &p, &n.components, &KillingField::Horizontal(a).value(&sp, &p)?)?),
            None => None,
        };
        (Some(tr), hz)
    } else {
        (None, None)
    };
    Ok(JacobiCandidates {
        angle,
        translation,
        horizontal,
    })
}

/// `⟨η, V⟩` for an arbitrary ambient field.
pub fn normal_component(imm: &dyn Immersion, s: f64, t: f64, field: &dyn VectorField) -> Result<f64> {
    let sp = imm.space();
    let n = unit_normal(imm, s, t)?;
    inner(&sp, &n.base, &n.components, &field.value(&sp, &n.base)?)
}

pub(crate) fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vector3::new(x, y, z)
}
