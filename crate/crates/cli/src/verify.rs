//! Reference examples with known answers, run by `verify-all`.

use std::f64::consts::{PI, TAU};

use ektau::geometry::{
    connection_coefficients, covariant_derivative, frame_at, metric_at, translation_flow, FrameField, Mat3, Vec3,
};
use ektau::grid::{Rect, ScalarFieldGrid, UniformGrid};
use ektau::horizontal::{
    fmp_tangency_curve, fmp_tangency_determinant, solve_dirichlet, GraphFunction, NewtonOptions, TangencyCurve,
};
use ektau::parabolicity::{cutoff_chain_check, cutoff_energy, ChainOptions, CutoffFamily};
use ektau::spectra::{
    cylinder_eigenvalue, cylinder_stability_verdict, jacobi_residual, SpectralProblem, StabilityVerdict, DEFAULT_SWEEP,
};
use ektau::surface::{
    fundamental_forms, jacobi_candidates, mean_curvature, AffineProfile, CylinderImmersion, FmpSurface,
    HorizontalGraph, Immersion,
};
use ektau::{AmbientPoint, SpaceParams};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

type Check = fn() -> ektau::Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("nil metric matrix", nil_metric),
    ("nil orthonormal frame", nil_frame),
    ("nil connection symbols", nil_symbols),
    ("frame covariant derivatives", frame_derivatives),
    ("translation flow", flow),
    ("vertical plane is minimal", vertical_plane),
    ("nil cylinder second fundamental form", nil_cylinder),
    ("cylinder mean curvature sweep", cylinder_sweep),
    ("cylinder angle function", cylinder_angle),
    ("cylinder potential terms", cylinder_potential),
    ("stability potential identity", potential_identity),
    ("square identity for a Jacobi field", square_identity),
    ("tangency determinant", tangency_determinant),
    ("tangency curve theta=0", tangency_theta0),
    ("tangency curve theta=1", tangency_theta1),
    ("FMP minimality", fmp_minimal),
    ("affine graphs solve the equation exactly", affine_exact),
    ("Dirichlet solver", dirichlet),
    ("cylinder eigenvalue formula", eigenvalues),
    ("stability verdicts", verdicts),
    ("cutoff energies", cutoff_energies),
    ("estimate chain", chain),
    ("constant pair has constant ratio", constant_pair),
    ("curvature report example", curvature_example),
];

/// Runs every check in parallel; results keep the declaration order.
pub fn run_all() -> Vec<CheckResult> {
    CHECKS
        .par_iter()
        .map(|(name, f)| {
            let (pass, detail) = match f() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult {
                name: name.to_string(),
                pass,
                detail,
            }
        })
        .collect()
}

pub fn names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

fn square(half: f64) -> Rect {
    Rect {
        s0: -half,
        s1: half,
        t0: -half,
        t1: half,
    }
}

fn spaces() -> Vec<SpaceParams> {
    let mut out = Vec::new();
    for kappa in [-1.0, 0.0, 1.0] {
        for tau in [0.0, 0.5, 1.0] {
            if let Ok(sp) = SpaceParams::new(kappa, tau) {
                out.push(sp);
            }
        }
    }
    out
}

fn nil_metric() -> ektau::Result<(bool, String)> {
    let sp = SpaceParams::nil();
    let mut worst = 0.0f64;
    for (x, y, z) in [(0.0, 0.0, 0.0), (0.3, -1.25, 2.0), (4.0, 2.5, -1.0)] {
        // dx² + dy² + (dz + (y dx − x dy)/2)²
        let w = Vec3::new(0.5 * y, -0.5 * x, 1.0);
        let want = Mat3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0) + w * w.transpose();
        worst = worst.max((metric_at(&sp, &AmbientPoint::new(x, y, z))? - want).abs().max());
    }
    Ok((worst < 1e-14, format!("max entry deviation {worst:.1e}")))
}

fn nil_frame() -> ektau::Result<(bool, String)> {
    let sp = SpaceParams::nil();
    let mut worst = 0.0f64;
    for (x, y, z) in [(1.5, -2.0, 0.7), (-0.4, 0.9, -3.0)] {
        let f = frame_at(&sp, &AmbientPoint::new(x, y, z))?;
        let want = [Vec3::new(1.0, 0.0, -0.5 * y), Vec3::new(0.0, 1.0, 0.5 * x), Vec3::z()];
        for i in 0..3 {
            worst = worst.max((f[i].components - want[i]).norm());
        }
    }
    Ok((worst < 1e-14, format!("max deviation {worst:.1e}")))
}

fn nil_symbols() -> ektau::Result<(bool, String)> {
    let t = connection_coefficients(&SpaceParams::nil());
    let (a, b) = (t.get(0, 1, 2), t.get(2, 1, 0));
    Ok((a == 0.5 && b == 0.5, format!("symbols 12^3 = {a}, 32^1 = {b}")))
}

fn frame_derivatives() -> ektau::Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut n = 0;
    for sp in spaces() {
        // The product charts rotate nothing only through the z-axis.
        let p = if sp.tau() == 0.0 && sp.kappa() != 0.0 {
            AmbientPoint::new(0.0, 0.0, -0.4)
        } else {
            AmbientPoint::new(0.3, 0.8, -0.4)
        };
        let d11 = covariant_derivative(&sp, &FrameField(0), &FrameField(0), &p)?;
        let d12 = covariant_derivative(&sp, &FrameField(0), &FrameField(1), &p)?;
        worst = worst.max(d11.components.norm()).max((d12.components - sp.tau() * Vec3::z()).norm());
        n += 1;
    }
    Ok((worst < 1e-12, format!("{n} spaces, max deviation {worst:.1e}")))
}

fn flow() -> ektau::Result<(bool, String)> {
    let sp = SpaceParams::nil();
    let mut worst = 0.0f64;
    for (u, y, z) in [(0.7, -1.2, 0.4), (-2.0, 3.0, 1.0)] {
        let q = translation_flow(&sp, u, &AmbientPoint::new(0.0, y, z))?;
        worst = worst.max((q.x - u).abs() + (q.y - y).abs() + (q.z - (z + 0.5 * u * y)).abs());
    }
    Ok((worst < 1e-15, format!("max deviation {worst:.1e}")))
}

fn vertical_plane() -> ektau::Result<(bool, String)> {
    let m = HorizontalGraph::vertical_plane(0.0, 0.0, square(2.0));
    let mut worst = 0.0f64;
    for s in [-1.5, -0.2, 0.0, 1.1] {
        for t in [-1.0, 0.3, 1.9] {
            worst = worst.max(mean_curvature(&m, s, t)?.abs());
        }
    }
    Ok((worst < 1e-12, format!("max |H| = {worst:.1e}")))
}

fn nil_cylinder() -> ektau::Result<(bool, String)> {
    let cyl = CylinderImmersion::new(SpaceParams::nil(), 1.0, square(1.0))?;
    let f = fundamental_forms(&cyl, 0.2, -0.3)?;
    let ii = f.second_orthonormal();
    let dev = (ii[(0, 0)] - 1.0).abs()
        + (ii[(0, 1)] - 0.5).abs()
        + (ii[(1, 0)] - 0.5).abs()
        + ii[(1, 1)].abs()
        + (f.mean - 0.5).abs()
        + (f.extrinsic + 0.25).abs();
    Ok((
        dev < 1e-8,
        format!("II = [[{:.6}, {:.6}], [{:.6}, {:.6}]], H = {:.6}, Kext = {:.6}", ii[(0, 0)], ii[(0, 1)], ii[(1, 0)], ii[(1, 1)], f.mean, f.extrinsic),
    ))
}

fn cylinder_sweep() -> ektau::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for sp in spaces() {
        for k in [0.0, 0.5, 1.0] {
            let cyl = CylinderImmersion::new(sp, k, square(1.0))?;
            for (s, t) in [(-0.6, 0.1), (0.5, -0.7)] {
                worst = worst.max((mean_curvature(&cyl, s, t)? - 0.5 * k).abs());
            }
        }
    }
    Ok((worst < 1e-8, format!("max |H - k/2| = {worst:.1e}")))
}

fn cylinder_angle() -> ektau::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for sp in spaces() {
        let cyl = CylinderImmersion::new(sp, 0.5, square(1.0))?;
        for (s, t) in [(-0.6, 0.1), (0.5, -0.7), (0.0, 0.9)] {
            worst = worst.max(jacobi_candidates(&cyl, s, t, None)?.angle.abs());
        }
    }
    Ok((worst < 1e-10, format!("max |angle| = {worst:.1e}")))
}

fn cylinder_potential() -> ektau::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for sp in spaces() {
        let (kappa, tau) = (sp.kappa(), sp.tau());
        for k in [0.0, 0.5, 1.0] {
            let cyl = CylinderImmersion::new(sp, k, square(1.0))?;
            let f = fundamental_forms(&cyl, 0.3, -0.2)?;
            worst = worst
                .max((f.shape_norm_sq() - (k * k + 2.0 * tau * tau)).abs())
                .max((f.ricci_normal - (kappa - 2.0 * tau * tau)).abs())
                .max((f.potential_q() - (k * k + kappa)).abs());
        }
    }
    Ok((worst < 1e-8, format!("max deviation of |A|^2, Ric, q: {worst:.1e}")))
}

fn potential_identity() -> ektau::Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut surfaces: Vec<Box<dyn Immersion>> = Vec::new();
    for sp in spaces() {
        surfaces.push(Box::new(CylinderImmersion::new(sp, 0.5, square(1.0))?));
    }
    for theta in [0.0, 0.5, 1.0] {
        surfaces.push(Box::new(FmpSurface::new(theta, square(1.0))));
    }
    for m in &surfaces {
        let sp = m.space();
        for (s, t) in [(-0.8, 0.1), (0.3, 0.9), (0.7, -0.6)] {
            let f = fundamental_forms(m.as_ref(), s, t)?;
            worst = worst.max((-f.gauss + f.potential_qtilde(&sp) - f.potential_q()).abs());
        }
    }
    Ok((worst < 1e-6, format!("{} surfaces, max |(-K + qtilde) - q| = {worst:.1e}", surfaces.len())))
}

fn square_identity() -> ektau::Result<(bool, String)> {
    let omega = square(1.0);
    let cyl = CylinderImmersion::new(SpaceParams::nil(), 1.0, omega)?;
    let g = UniformGrid::new(omega, 129, 129)?;
    let u = ScalarFieldGrid::try_from_fn(g, |s, t| {
        Ok(jacobi_candidates(&cyl, s, t, None)?.translation.unwrap_or(f64::NAN))
    })?;
    let r = jacobi_residual(&cyl, &u)?;
    Ok((
        r.square_identity < 1e-4,
        format!("u = <eta, X> on the Nil cylinder k=1, |Lu| = {:.1e}, square identity {:.1e}", r.l2, r.square_identity),
    ))
}

fn tangency_determinant() -> ektau::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for theta in [0.0, 1.0] {
        for alpha in [PI / 4.0, PI / 2.0] {
            for i in 0..21 {
                for j in 0..21 {
                    let (x, y) = (-5.0 + 0.5 * i as f64, -5.0 + 0.5 * j as f64);
                    let d = fmp_tangency_determinant(theta, alpha, x, y)?;
                    let want = -alpha.sin() * (x + (2.0 * theta).sinh() * (1.0 + y * y).sqrt());
                    worst = worst.max((d - want).abs());
                }
            }
        }
    }
    Ok((worst < 1e-8, format!("max deviation {worst:.1e}")))
}

fn curve_check(theta: f64, alpha: f64) -> ektau::Result<(bool, String)> {
    let ys: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
    match fmp_tangency_curve(theta, alpha, &ys)? {
        TangencyCurve::Curve {
            points,
            max_on_curve,
            min_off_curve,
        } => {
            let st = (2.0 * theta).sinh();
            let xdev = points
                .iter()
                .fold(0.0f64, |m, p| m.max((p[0] + st * (1.0 + p[1] * p[1]).sqrt()).abs()));
            Ok((
                xdev < 1e-12 && max_on_curve < 1e-8 && min_off_curve > 1e-3,
                format!("curve offset {xdev:.1e}, on curve {max_on_curve:.1e}, off curve {min_off_curve:.2e}"),
            ))
        }
        other => Ok((false, format!("unexpected {other:?}"))),
    }
}

fn tangency_theta0() -> ektau::Result<(bool, String)> {
    curve_check(0.0, PI / 2.0)
}

fn tangency_theta1() -> ektau::Result<(bool, String)> {
    curve_check(1.0, PI / 4.0)
}

fn fmp_minimal() -> ektau::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for theta in [0.0, 0.5, 1.0] {
        let m = FmpSurface::new(theta, square(1.0));
        for s in [-0.9, -0.1, 0.6] {
            for t in [-0.5, 0.4, 0.95] {
                worst = worst.max(mean_curvature(&m, s, t)?.abs());
            }
        }
    }
    Ok((worst < 1e-6, format!("max |H| = {worst:.1e}")))
}

fn affine_exact() -> ektau::Result<(bool, String)> {
    let g = UniformGrid::new(square(2.0), 33, 33)?;
    let mut all = true;
    for (a, b) in [(-0.5, 1.0), (0.0, 0.0), (2.5, -1.0)] {
        all &= GraphFunction::closed(AffineProfile { a, b, c: 0.0 }, g).residual().is_exactly_zero();
        all &= GraphFunction::closed(AffineProfile { a: 0.0, b, c: a + 1.0 }, g).residual().is_exactly_zero();
    }
    Ok((all, format!("6 affine profiles exactly zero: {all}")))
}

fn dirichlet() -> ektau::Result<(bool, String)> {
    let g = UniformGrid::new(Rect::new(0.0, 1.0, 0.0, 1.0)?, 41, 41)?;
    let opts = NewtonOptions::default();
    let plane = |y: f64, _z: f64| 0.5 * y + 1.0;
    let u0 = ScalarFieldGrid::from_fn(g, |y, z| plane(y, z) + 0.2 * (PI * y).sin() * (PI * z).sin());
    let sol = solve_dirichlet(g, &plane, Some(&u0), &opts)?;
    let err = sol
        .solution
        .values()
        .values
        .iter()
        .zip(ScalarFieldGrid::from_fn(g, plane).values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let curved = solve_dirichlet(g, &|y: f64, z: f64| 0.8 * y + 0.3 * (y * y - z * z), None, &opts)?;
    let ratio = curved.final_ratio().unwrap_or(f64::INFINITY);
    let eta = sol.min_translation_component.min(curved.min_translation_component);
    Ok((
        err < 1e-10 && ratio < 0.1 && curved.final_residual() < 1e-8 && eta > 0.0,
        format!("affine error {err:.1e}, final ratio {ratio:.1e}, min|<eta,X>| {eta:.3}"),
    ))
}

fn eigenvalues() -> ektau::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (kappa, tau, k) in [(-1.0, 0.0, 0.0), (0.0, 0.5, 1.0), (1.0, 1.0, 0.5)] {
        let sp = SpaceParams::new(kappa, tau)?;
        for (a, b) in [(1.0, 1.0), (2.0, 1.0)] {
            let omega = Rect::new(0.0, a, 0.0, b)?;
            let cyl = CylinderImmersion::new(sp, k, omega)?;
            let got = SpectralProblem::new(&cyl, omega, 100, 100)?.first_eigenvalue()?.lambda1;
            let want = cylinder_eigenvalue(&sp, k, a, b);
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    Ok((worst < 0.01, format!("max relative error {worst:.1e}")))
}

fn verdicts() -> ektau::Result<(bool, String)> {
    let stable = cylinder_stability_verdict(SpaceParams::new(-1.0, 0.0)?, 0.0, &DEFAULT_SWEEP, 48)?;
    let plane = cylinder_stability_verdict(SpaceParams::nil(), 0.0, &DEFAULT_SWEEP, 48)?;
    let unstable = cylinder_stability_verdict(SpaceParams::nil(), 1.0, &DEFAULT_SWEEP, 48)?;
    let ok = stable.verdict == StabilityVerdict::Stable
        && stable.rows.iter().all(|r| r.lambda1 >= 0.99)
        && plane.verdict == StabilityVerdict::Marginal
        && matches!(unstable.verdict, StabilityVerdict::Unstable { .. });
    Ok((
        ok,
        format!(
            "H2xR k=0 {:?}, Nil plane {:?} (inf {:.1e}), Nil k=1 {}",
            stable.verdict,
            plane.verdict,
            plane.inf_lambda1,
            if matches!(unstable.verdict, StabilityVerdict::Unstable { .. }) { "unstable" } else { "not unstable" }
        ),
    ))
}

fn cutoff_energies() -> ektau::Result<(bool, String)> {
    let fam = CutoffFamily::log_plane(1.0, 8)?;
    let mut worst = 0.0f64;
    for j in 1..=8 {
        let want = TAU / j as f64;
        worst = worst.max((cutoff_energy(&fam, j, 256)? - want).abs() / want);
    }
    Ok((worst < 0.01, format!("max relative error vs 2 pi / j: {worst:.1e}")))
}

fn chain() -> ektau::Result<(bool, String)> {
    let fam = CutoffFamily::log_plane(1.0, 8)?;
    let rep = cutoff_chain_check(&fam, &|r, _| (1.0 + r * r).ln(), &|_, _| 1.0, &ChainOptions::default())?;
    Ok((
        rep.hypothesis_holds && rep.all_inequalities_hold(),
        format!("u = ln(1+r^2), v = 1: {} cutoffs, all inequalities hold: {}", rep.rows.len(), rep.all_inequalities_hold()),
    ))
}

fn constant_pair() -> ektau::Result<(bool, String)> {
    let fam = CutoffFamily::linear_cylinder(TAU, 1.0, &[1.0, 2.0, 4.0, 8.0])?;
    let rep = cutoff_chain_check(&fam, &|_, _| 0.5, &|_, _| 0.5, &ChainOptions::default())?;
    Ok((rep.ratio_variance < 1e-12, format!("variance of u/v = {:.1e}", rep.ratio_variance)))
}

fn curvature_example() -> ektau::Result<(bool, String)> {
    let sp = SpaceParams::new(0.0, 0.5)?;
    let cyl = CylinderImmersion::new(sp, 1.0, square(1.0))?;
    let f = fundamental_forms(&cyl, 0.0, 0.0)?;
    let ok = (f.mean - 0.5).abs() < 1e-8 && f.gauss.abs() < 1e-6 && (f.extrinsic + 0.25).abs() < 1e-8;
    Ok((ok, format!("H = {:.6}, K = {:.1e}, Kext = {:.6}", f.mean, f.gauss, f.extrinsic)))
}
