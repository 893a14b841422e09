//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ektau::grid::{Rect, ScalarFieldGrid, UniformGrid};
use ektau::horizontal::{
    fmp_tangency_determinant, perturbed_plane_data, solve_dirichlet, GraphFunction, NewtonOptions,
};
use ektau::parabolicity::{cutoff_chain_check, cutoff_energy, ChainOptions, CutoffFamily};
use ektau::spectra::{cylinder_eigenvalue, cylinder_stability_verdict, SpectralProblem, StabilityVerdict, DEFAULT_SWEEP};
use ektau::surface::{
    fundamental_forms, mean_curvature, AffineProfile, CylinderImmersion, FmpSurface, GridImmersion, Immersion,
};
use ektau::SpaceParams;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn square(half: f64) -> Rect {
    Rect::new(-half, half, -half, half).unwrap()
}

fn cylinder_geometry() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 4];
    let mut combos = 0;
    for kappa in [-1.0, 0.0, 1.0] {
        for tau in [0.0, 0.5, 1.0] {
            if (kappa - 4.0 * tau * tau) == 0.0 {
                continue;
            }
            let sp = SpaceParams::new(kappa, tau).unwrap();
            for k in [0.0, 0.5, 1.0] {
                combos += 1;
                let cyl = CylinderImmersion::new(sp, k, square(1.0)).unwrap();
                for s in [-0.9, -0.3, 0.0, 0.4, 0.8] {
                    for t in [-0.7, 0.0, 0.6] {
                        let ff = fundamental_forms(&cyl, s, t).unwrap();
                        let ii = ff.second_orthonormal();
                        let target = [[k, tau], [tau, 0.0]];
                        for a in 0..2 {
                            for b in 0..2 {
                                worst[0] = worst[0].max((ii[(a, b)] - target[a][b]).abs());
                            }
                        }
                        worst[1] = worst[1].max((ff.mean - 0.5 * k).abs());
                        worst[2] = worst[2].max(ff.gauss.abs());
                        worst[3] = worst[3].max((ff.extrinsic + tau * tau).abs());
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        combos == 21 && worst[0] < 1e-8 && worst[1] < 1e-8 && worst[2] < 1e-6 && worst[3] < 1e-8
            && elapsed < Duration::from_secs(10),
        format!(
            "{combos} combos (27 minus the space forms kappa = 4 tau^2), max|II-target|={:.2e} max|H-k/2|={:.2e} max|K|={:.2e} max|Kext+tau^2|={:.2e}, {:.2?}",
            worst[0], worst[1], worst[2], worst[3], elapsed
        ),
    )
}

fn eigenvalue_formula() -> Outcome {
    let start = Instant::now();
    let triples = [(-1.0, 0.0, 0.0), (0.0, 0.5, 1.0), (1.0, 1.0, 0.5), (-1.0, 0.5, 0.5), (0.0, 0.5, 0.0)];
    let mut worst = 0.0f64;
    for (kappa, tau, k) in triples {
        let sp = SpaceParams::new(kappa, tau).unwrap();
        for (a, b) in [(1.0, 1.0), (2.0, 1.0), (3.0, 2.0)] {
            let omega = Rect::new(0.0, a, 0.0, b).unwrap();
            let cyl = CylinderImmersion::new(sp, k, omega).unwrap();
            let got = SpectralProblem::new(&cyl, omega, 200, 200).unwrap().first_eigenvalue().unwrap().lambda1;
            let want = cylinder_eigenvalue(&sp, k, a, b);
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 0.01 && elapsed < Duration::from_secs(60),
        format!("15 rectangles at 200x200, max relative error {worst:.2e}, {elapsed:.2?}"),
    )
}

fn stability_verdicts() -> Outcome {
    let nodes = 48;
    let stable = cylinder_stability_verdict(SpaceParams::new(-1.0, 0.0).unwrap(), 0.0, &DEFAULT_SWEEP, nodes).unwrap();
    let min_stable = stable.rows.iter().map(|r| r.lambda1).fold(f64::INFINITY, f64::min);
    let ok_stable = stable.verdict == StabilityVerdict::Stable && min_stable >= 0.99;

    let unstable = cylinder_stability_verdict(SpaceParams::nil(), 1.0, &DEFAULT_SWEEP, nodes).unwrap();
    let (ok_unstable, witness) = match unstable.verdict {
        StabilityVerdict::Unstable { witness, lambda1 } => (lambda1 < -0.1, format!("{:.0}x{:.0} lambda1={lambda1:.3}", witness.width(), witness.height())),
        ref v => (false, format!("{v:?}")),
    };

    let marginal = cylinder_stability_verdict(SpaceParams::nil(), 0.0, &DEFAULT_SWEEP, nodes).unwrap();
    let last = marginal.rows.last().unwrap().lambda1;
    let decreasing = marginal.rows.windows(2).all(|w| w[1].lambda1 < w[0].lambda1);
    let ok_marginal = marginal.verdict == StabilityVerdict::Marginal && last.abs() < 0.05 && decreasing;

    // Stable exactly when kappa <= -k^2.
    let mut rule = true;
    for (kappa, tau, k) in [(-1.0, 0.0, 0.5), (-1.0, 1.0, 1.0), (0.0, 1.0, 0.5), (1.0, 0.0, 1.0)] {
        let rep = cylinder_stability_verdict(SpaceParams::new(kappa, tau).unwrap(), k, &DEFAULT_SWEEP, nodes).unwrap();
        let expect_stable = kappa <= -k * k;
        let got_stable = !matches!(rep.verdict, StabilityVerdict::Unstable { .. });
        rule &= expect_stable == got_stable;
    }
    check(
        ok_stable && ok_unstable && ok_marginal && rule,
        format!(
            "stable min lambda1={min_stable:.4}; unstable witness {witness}; marginal last lambda1={last:.4} inf={:.1e}; rule {}",
            marginal.inf_lambda1,
            if rule { "ok" } else { "violated" }
        ),
    )
}

fn pde_exactness() -> Outcome {
    let g = UniformGrid::new(Rect::new(-2.0, 2.0, -2.0, 2.0).unwrap(), 65, 65).unwrap();
    let mut exact = true;
    let mut cases = 0;
    for a in [-2.0, -0.5, 0.0, 1.0, 3.7] {
        for b in [-1.0, 0.0, 2.5] {
            let ry = GraphFunction::closed(AffineProfile { a, b, c: 0.0 }, g).residual();
            let rz = GraphFunction::closed(AffineProfile { a: 0.0, b, c: a }, g).residual();
            exact &= ry.is_exactly_zero() && rz.is_exactly_zero();
            cases += 2;
        }
    }
    let mut worst_analytic = 0.0f64;
    let mut worst_sampled = 0.0f64;
    let domain = square(1.0);
    let grid = UniformGrid::new(domain, 256, 256).unwrap();
    for theta in [0.0, 0.5, 1.0] {
        let m = FmpSurface::new(theta, domain);
        let sampled = GridImmersion::sample(SpaceParams::nil(), grid, |x, y| Ok(m.jet(x, y)?.point)).unwrap();
        for (i, j) in grid.nodes() {
            let (x, y) = (grid.s(i), grid.t(j));
            worst_analytic = worst_analytic.max(mean_curvature(&m, x, y).unwrap().abs());
            worst_sampled = worst_sampled.max(mean_curvature(&sampled, x, y).unwrap().abs());
        }
    }
    check(
        exact && worst_analytic < 1e-6 && worst_sampled < 1e-6,
        format!(
            "{cases} affine residual grids exactly zero: {exact}; FMP max|H| analytic {worst_analytic:.2e}, sampled {worst_sampled:.2e} at 256x256"
        ),
    )
}

fn tangency_determinant() -> Outcome {
    let mut worst = 0.0f64;
    for theta in [0.0, 1.0] {
        for alpha in [PI / 4.0, PI / 2.0] {
            for i in 0..101 {
                for j in 0..101 {
                    let x = -5.0 + 0.1 * i as f64;
                    let y = -5.0 + 0.1 * j as f64;
                    let d = fmp_tangency_determinant(theta, alpha, x, y).unwrap();
                    let closed = -alpha.sin() * (x + (2.0 * theta).sinh() * (1.0 + y * y).sqrt());
                    worst = worst.max((d - closed).abs());
                }
            }
        }
    }
    check(worst < 1e-8, format!("max deviation {worst:.2e} over 4 x 101x101 nodes on [-5,5]^2"))
}

fn potential_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut samples = 0;
    let mut probe = |imm: &dyn Immersion| {
        let sp = imm.space();
        for s in [-0.8, -0.2, 0.3, 0.7] {
            for t in [-0.6, 0.1, 0.9] {
                let ff = fundamental_forms(imm, s, t).unwrap();
                worst = worst.max((-ff.gauss + ff.potential_qtilde(&sp) - ff.potential_q()).abs());
                samples += 1;
            }
        }
    };
    for kappa in [-1.0, 0.0, 1.0] {
        for tau in [0.0, 0.5, 1.0] {
            if kappa == 4.0 * tau * tau {
                continue;
            }
            for k in [0.0, 0.5, 1.0] {
                probe(&CylinderImmersion::new(SpaceParams::new(kappa, tau).unwrap(), k, square(1.0)).unwrap());
            }
        }
    }
    for theta in [0.0, 0.5, 1.0] {
        probe(&FmpSurface::new(theta, square(1.0)));
    }
    check(worst < 1e-6, format!("{samples} samples, max |(-K+qtilde)-q| = {worst:.2e}"))
}

fn cutoff_chain() -> Outcome {
    let fam = CutoffFamily::log_plane(1.0, 8).unwrap();
    let mut energy_err = 0.0f64;
    for j in 1..=8 {
        let e = cutoff_energy(&fam, j, 256).unwrap();
        energy_err = energy_err.max((e - TAU / j as f64).abs() / (TAU / j as f64));
    }
    let opts = ChainOptions::default();
    let chain = cutoff_chain_check(&fam, &|r, _| (1.0 + r * r).ln(), &|_, _| 1.0, &opts).unwrap();
    let chain_ok = chain.hypothesis_holds && chain.rows.iter().all(|r| r.combined_ok && r.annulus_ok);
    let constant = cutoff_chain_check(&fam, &|_, _| 2.0, &|_, _| 2.0, &opts).unwrap();
    let cyl = CutoffFamily::linear_cylinder(TAU, 1.0, &[1.0, 2.0, 4.0, 8.0]).unwrap();
    let constant_cyl = cutoff_chain_check(&cyl, &|_, _| 0.5, &|_, _| 0.5, &opts).unwrap();
    let var = constant.ratio_variance.max(constant_cyl.ratio_variance);
    check(
        energy_err < 0.01 && chain_ok && var < 1e-12,
        format!(
            "max relative energy error {energy_err:.2e}; chain holds at all {} cutoffs: {chain_ok}; constant-pair variance {var:.1e}",
            chain.rows.len()
        ),
    )
}

fn dirichlet_solver() -> Outcome {
    let g = UniformGrid::new(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 41, 41).unwrap();
    let opts = NewtonOptions::default();
    let mut affine_err = 0.0f64;
    let mut min_eta = f64::INFINITY;
    for (a, b, c) in [(1.0, 0.5, 0.0), (-2.0, 1.0, 0.0), (0.0, -1.0, 1.5), (0.0, 2.0, -0.75)] {
        let exact = move |y: f64, z: f64| a * y + c * z + b;
        let u0 = ScalarFieldGrid::from_fn(g, |y, z| exact(y, z) + 0.25 * (PI * y).sin() * (PI * z).sin());
        let sol = solve_dirichlet(g, &exact, Some(&u0), &opts).unwrap();
        let err = sol
            .solution
            .values()
            .values
            .iter()
            .zip(ScalarFieldGrid::from_fn(g, exact).values)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        affine_err = affine_err.max(err);
        min_eta = min_eta.min(sol.min_translation_component);
    }
    let mut worst_ratio = 0.0f64;
    let mut final_res = 0.0f64;
    let problems: Vec<Box<dyn Fn(f64, f64) -> f64>> = vec![
        Box::new(|y, z| 0.8 * y + 0.3 * (y * y - z * z) + 0.2 * (2.0 * z).sin()),
        Box::new(|y, z| 0.5 * z + 0.1 * (y * z).cos()),
    ];
    for data in &problems {
        let sol = solve_dirichlet(g, data.as_ref(), None, &opts).unwrap();
        worst_ratio = worst_ratio.max(sol.final_ratio().unwrap_or(f64::INFINITY));
        final_res = final_res.max(sol.final_residual());
        min_eta = min_eta.min(sol.min_translation_component);
    }
    let bump = perturbed_plane_data(0.7, 0.05);
    let u0 = ScalarFieldGrid::from_fn(g, &bump);
    let sol = solve_dirichlet(g, &bump, Some(&u0), &opts).unwrap();
    worst_ratio = worst_ratio.max(sol.final_ratio().unwrap_or(f64::INFINITY));
    min_eta = min_eta.min(sol.min_translation_component);
    check(
        affine_err < 1e-10 && worst_ratio < 0.1 && final_res < 1e-8 && min_eta > 0.0,
        format!(
            "affine recovery error {affine_err:.1e}; worst final residual ratio {worst_ratio:.1e}; min|<eta,X>| = {min_eta:.3}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("cylinder second fundamental form and curvatures", cylinder_geometry),
        ("cylinder Dirichlet eigenvalue formula", eigenvalue_formula),
        ("stability verdicts on growing squares", stability_verdicts),
        ("minimal graph equation exactness and FMP minimality", pde_exactness),
        ("FMP tangency determinant", tangency_determinant),
        ("stability potential identity", potential_identity),
        ("cutoff energies and estimate chain", cutoff_chain),
        ("Dirichlet solver", dirichlet_solver),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        println!("criterion {} [{}] {}: {}", n + 1, if out.pass { "PASS" } else { "FAIL" }, name, out.detail);
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
