//! One pass/fail line per acceptance criterion.
//!
//! Criteria that cannot be met as stated are listed in `EXPECTED_RED` with
//! the reason; the harness requires those to fail and every other one to pass.

use std::f64::consts::PI;
use std::time::Instant;

use isopoincare::fpsolver::{
    build_solver, verify_thm2_hellinger, DtPolicy, GridSpec, Perturbation, PerturbationKind, Scenario, ThetaKind,
};
use isopoincare::inequality::suite::{default_densities, one_dim_problem, run_matrix, Outcome};
use isopoincare::inequality::{CheckConfig, Theorem};
use isopoincare::weights::{
    angular_weight, barenblatt_alpha_optimum, cauchy_alpha_optimum, closed_form_weight, diffusion_weight,
    inverse_gamma_weight, steady_state_residual, weight_from_density_kok,
};
use isopoincare::{DensityKind, IsotropicDensity};

const EXPECTED_RED: &[(u32, &str)] = &[(
    1,
    "the stated Cauchy form (1+rho^2)/(beta-1) is twice the integral it is defined by; \
     quadrature gives (1+rho^2)/(2(beta-1)), so every Cauchy case sits at ratio 0.5",
)];

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
    limit: f64,
}

fn timed(id: u32, name: &'static str, limit: f64, f: impl FnOnce() -> (bool, String)) -> Line {
    let start = Instant::now();
    let (ok, detail) = f();
    let secs = start.elapsed().as_secs_f64();
    let line = Line {
        id,
        name,
        pass: ok && secs < limit,
        detail,
        secs,
        limit,
    };
    println!(
        "criterion {:>2} [{}] {}: {} ({:.2}s, limit {}s)",
        line.id,
        if line.pass { "PASS" } else { "FAIL" },
        line.name,
        line.detail,
        line.secs,
        line.limit
    );
    line
}

fn density(spec: &str) -> IsotropicDensity {
    IsotropicDensity::from_spec(spec).unwrap()
}

/// 50 interior points of the support, or of `(0, 3 scale)` when unbounded.
fn interior_grid(d: &IsotropicDensity) -> Vec<f64> {
    let hi = if d.is_compact() { d.support_radius() } else { 3.0 * d.scale() };
    (0..50).map(|i| hi * (i as f64 + 0.5) / 50.0).collect()
}

fn weight_matrix() -> Vec<IsotropicDensity> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for sigma in [0.5, 1.0, 2.0] {
            out.push(density(&format!("gaussian:sigma={sigma},n={n}")));
        }
        for beta in [2.0, 3.0, 4.0] {
            out.push(density(&format!("cauchy:beta={beta},n={n}")));
        }
        for beta in [1.0, 2.0] {
            out.push(density(&format!("exponential:beta={beta},n={n}")));
        }
        for p in [2.0, 3.0] {
            out.push(density(&format!("barenblatt:a=1,p={p},n={n}")));
        }
    }
    out
}

/// The forms as printed: `sigma`, `(1+rho^2)/(beta-1)`, `(1+beta rho)/beta^2`,
/// `((p-1)/(2p))(a^2-rho^2)`.
fn stated_form(d: &IsotropicDensity, rho: f64) -> f64 {
    match d.kind() {
        DensityKind::Gaussian { sigma } => sigma,
        DensityKind::CauchyType { beta } => (1.0 + rho * rho) / (beta - 1.0),
        DensityKind::ExponentialType { beta } => (1.0 + beta * rho) / (beta * beta),
        DensityKind::Barenblatt { a, p } => (p - 1.0) / (2.0 * p) * (a * a - rho * rho),
        DensityKind::InverseGamma1d { .. } => unreachable!(),
    }
}

fn criterion_1() -> Line {
    timed(1, "closed-form weights match quadrature within 1e-6", 10.0, || {
        let mut worst: Vec<(String, f64)> = Vec::new();
        let mut corrected_ok = true;
        for d in weight_matrix() {
            let mut err: f64 = 0.0;
            for rho in interior_grid(&d) {
                let q = weight_from_density_kok(&d, rho).unwrap();
                err = err.max((q - stated_form(&d, rho)).abs() / stated_form(&d, rho));
                let k = closed_form_weight(&d).unwrap().eval(rho);
                corrected_ok &= (q - k).abs() <= 1e-6 * k;
            }
            if err > 1e-6 {
                worst.push((d.label(), err));
            }
        }
        println!("    library closed forms (Cauchy as (1+rho^2)/(2(beta-1))) all within 1e-6: {corrected_ok}");
        let detail = if worst.is_empty() {
            "30 densities x 50 points within 1e-6".to_string()
        } else {
            format!(
                "{} of 30 densities off: {}",
                worst.len(),
                worst
                    .iter()
                    .map(|(l, e)| format!("{l} ({e:.2})"))
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        };
        (worst.is_empty(), detail)
    })
}

fn criterion_2() -> Line {
    timed(2, "steady-state residual within 1e-5", 5.0, || {
        let mut targets = weight_matrix();
        targets.push(density("inverse_gamma:mu=2"));
        targets.push(density("inverse_gamma:mu=3.5"));
        let mut worst: f64 = 0.0;
        for d in &targets {
            let k = closed_form_weight(d).unwrap_or_else(|| match d.kind() {
                DensityKind::InverseGamma1d { mu } => inverse_gamma_weight(mu),
                _ => unreachable!(),
            });
            let grid: Vec<f64> = if d.is_half_line() {
                (0..50).map(|i| 0.1 + 3.0 * (i as f64 + 0.5) / 50.0).collect()
            } else {
                interior_grid(d)
            };
            let h = 1e-3 * d.scale();
            for rho in grid {
                let h = h.min(0.2 * rho).min(0.2 * (d.support_radius() - rho));
                worst = worst.max(steady_state_residual(d, &k, rho, h).abs());
            }
        }
        (worst <= 1e-5, format!("{} weights, max |residual| {worst:.2e}", targets.len()))
    })
}

fn criterion_3() -> Line {
    timed(3, "inequality soundness over the default matrix", 300.0, || {
        let theorems = [
            Theorem::Poincare1d,
            Theorem::Product,
            Theorem::IsotropicWstar,
            Theorem::RefinedOutsideBall,
            Theorem::GaussianAnisotropic,
        ];
        let cells = run_matrix(&theorems, &default_densities(), 20240601, &CheckConfig::default(), 4.0, true);
        let mut problems = Vec::new();
        let mut reports = 0;
        let mut max_ratio: f64 = 0.0;
        let mut sharp = Vec::new();
        for c in &cells {
            match &c.outcome {
                Outcome::Skipped { .. } => continue,
                Outcome::Error { message } => problems.push(format!("{} {}: {message}", c.theorem, c.target)),
                Outcome::Reports { reports: rs } => {
                    if rs.len() < 40 {
                        problems.push(format!("{} {}: only {} functions", c.theorem, c.target, rs.len()));
                    }
                    for r in rs {
                        reports += 1;
                        if !r.pass {
                            problems.push(format!("{} {} {}: ratio {}", c.theorem, c.target, r.witness, r.ratio));
                        } else {
                            max_ratio = max_ratio.max(r.ratio);
                        }
                    }
                    // linear functions along a top eigendirection of the covariance
                    let linear: &[&str] = match (c.theorem, c.target.as_str()) {
                        (Theorem::Poincare1d, "gaussian:sigma=1,n=1" | "normal(0,1)") => &["x1"],
                        (Theorem::Product, "normal(0,1) x normal(0,1)") => &["x1", "x2", "x1-0.5x2"],
                        (Theorem::GaussianAnisotropic, "normal(V=diag(1,4))") => &["x2"],
                        (Theorem::GaussianAnisotropic, t) if t.starts_with("gaussian") => &["x1", "x2", "x3", "x1-0.5x2"],
                        _ => &[],
                    };
                    {
                        for r in rs.iter().filter(|r| linear.contains(&r.witness.as_str())) {
                            sharp.push((format!("{} {} {}", c.theorem, c.target, r.witness), r.ratio));
                        }
                    }
                }
            }
        }
        let off: Vec<String> = sharp
            .iter()
            .filter(|(_, r)| (r - 1.0).abs() > 1e-6)
            .map(|(w, r)| format!("{w} at {r}"))
            .collect();
        let ok = problems.is_empty() && off.is_empty() && sharp.len() >= 10;
        let detail = format!(
            "{} cells, {reports} reports, max ratio {max_ratio:.9}, {} linear Gaussian witnesses at ratio 1 (worst |r-1| {:.1e}){}{}",
            cells.len(),
            sharp.len(),
            sharp.iter().map(|(_, r)| (r - 1.0).abs()).fold(0.0, f64::max),
            if problems.is_empty() { String::new() } else { format!("; problems: {}", problems.join("; ")) },
            if off.is_empty() { String::new() } else { format!("; not sharp: {}", off.join("; ")) },
        );
        (ok, detail)
    })
}

fn criterion_4() -> Line {
    timed(4, "angular weight bounds", 5.0, || {
        let mut worst_polar: f64 = 0.0;
        for n in [3usize, 4] {
            for i in 1..n - 1 {
                for k in 1..2000 {
                    let theta = PI * k as f64 / 2000.0;
                    worst_polar = worst_polar.max(angular_weight(i, n, theta).unwrap());
                }
            }
        }
        let mut azimuth_err: f64 = 0.0;
        let mut azimuth_max: f64 = 0.0;
        for n in [2usize, 3, 4] {
            for k in 1..4000 {
                let theta = 2.0 * PI * k as f64 / 4000.0;
                let p = angular_weight(n - 1, n, theta).unwrap();
                azimuth_err = azimuth_err.max((p - (PI * theta - theta * theta / 2.0)).abs());
                azimuth_max = azimuth_max.max(p);
            }
        }
        let ok = worst_polar <= PI * PI / 8.0 + 1e-9 && azimuth_err == 0.0 && (azimuth_max - PI * PI / 2.0).abs() < 1e-12;
        (
            ok,
            format!(
                "polar max {worst_polar:.12} (bound {:.12}), azimuthal max |error| {azimuth_err:e}, max {azimuth_max:.12}",
                PI * PI / 8.0
            ),
        )
    })
}

fn criterion_5() -> Line {
    timed(5, "alpha-family optimizer reproduces the closed forms", 1.0, || {
        let cauchy = [
            (1.25, 1usize),
            (2.0, 1),
            (4.0, 1),
            (1.6, 2),
            (1.9, 2),
            (3.0, 2),
            (2.2, 3),
            (2.45, 3),
            (4.0, 3),
            (6.0, 3),
        ];
        let mut worst: f64 = 0.0;
        let mut branches = [0, 0];
        for (beta, n) in cauchy {
            let nf = n as f64;
            let expected = if beta < nf / 2.0 + 1.0 {
                branches[0] += 1;
                1.0 / (beta - nf / 2.0).powi(2)
            } else {
                branches[1] += 1;
                1.0 / (2.0 * beta - (nf + 1.0))
            };
            let opt = cauchy_alpha_optimum(beta, n).unwrap();
            let numeric = 1.0 / (2.0 * opt.h_numeric);
            worst = worst.max((numeric - expected).abs() / expected);
        }
        let barenblatt = [(1.5, 1usize), (2.0, 1), (3.0, 1), (2.0, 2), (3.0, 2), (5.0, 2), (1.5, 3), (2.0, 3), (3.0, 3), (4.0, 3)];
        for (p, n) in barenblatt {
            let expected = (p - 1.0) / (2.0 * (n as f64 * (p - 1.0) + 1.0));
            let opt = barenblatt_alpha_optimum(p, n).unwrap();
            let numeric = 1.0 / (2.0 * opt.h_numeric);
            worst = worst.max((numeric - expected).abs() / expected);
        }
        (
            worst <= 1e-10 && branches[0] > 0 && branches[1] > 0,
            format!(
                "10 Cauchy ({} interior, {} endpoint branch) + 10 Barenblatt, max rel. error {worst:.1e}",
                branches[0], branches[1]
            ),
        )
    })
}

fn criterion_6() -> Line {
    timed(6, "solver fixed point and mass conservation", 60.0, || {
        let mut worst_drift: f64 = 0.0;
        let mut worst_mass: f64 = 0.0;
        let mut kinds = std::collections::BTreeSet::new();
        for d in default_densities() {
            kinds.insert(d.kind().name());
            let solver = build_solver(&d, &diffusion_weight(&d).unwrap(), &GridSpec::new(400)).unwrap();
            let eq = solver.equilibrium();
            let (end, _) = solver.evolve(&eq, 10.0, DtPolicy::new(1e-2, 100).unwrap()).unwrap();
            let drift = end.values.iter().zip(&eq.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / 10.0;
            worst_drift = worst_drift.max(drift);
            let s0 = solver.perturbed(&Perturbation::new(PerturbationKind::Tanh, 0.2).unwrap());
            let (_, trace) = solver.evolve(&s0, 10.0, DtPolicy::new(1e-3, 100).unwrap()).unwrap();
            worst_mass = worst_mass.max(trace.mass_drift());
        }
        (
            worst_drift < 1e-11 && worst_mass < 1e-10 && kinds.len() == 5,
            format!(
                "{} densities over {} kinds, sup drift {worst_drift:.1e} per unit time, mass drift {worst_mass:.1e}",
                default_densities().len(),
                kinds.len()
            ),
        )
    })
}

fn relaxation(spec: &str, cells: usize, sample_every: usize) -> isopoincare::fpsolver::ScenarioResult {
    Scenario {
        density: density(spec),
        perturbation: Perturbation::new(PerturbationKind::Tanh, 0.1).unwrap(),
        grid: GridSpec::new(cells),
        t_final: Some(12.0),
        policy: DtPolicy::new(1e-3, sample_every).unwrap(),
    }
    .run()
    .unwrap()
}

fn criterion_7() -> Line {
    timed(7, "chi-square decay rate bound", 120.0, || {
        let g = relaxation("gaussian:sigma=1,n=1", 400, 10);
        let c = relaxation("cauchy:beta=4,n=1", 400, 10);
        let (_, w) = one_dim_problem(&density("cauchy:beta=4,n=1")).unwrap();
        let k = diffusion_weight(&density("cauchy:beta=4,n=1")).unwrap();
        // c from the optimal family weight against K, evaluated independently
        let c_closed = (1..400).map(|i| i as f64 * 0.1).map(|r| w.eval(r) / k.eval(r)).fold(0.0, f64::max);
        let gr = g.fitted_rate.unwrap_or(0.0);
        let cr = c.fitted_rate.unwrap_or(0.0);
        let ok = g.c == 1.0
            && gr >= 1.95
            && (c.c - c_closed).abs() < 1e-9
            && cr >= 0.95 * 2.0 / c_closed
            && g.monotone
            && c.monotone;
        (
            ok,
            format!(
                "gaussian rate {gr:.4} (>= 1.95), cauchy rate {cr:.4} (>= {:.4} with c = {c_closed:.4}), monotone {}",
                0.95 * 2.0 / c_closed,
                g.monotone && c.monotone
            ),
        )
    })
}

fn criterion_8() -> Line {
    timed(8, "Hellinger surrogates", 120.0, || {
        let mut parts = Vec::new();
        let mut ok = true;
        for spec in ["gaussian:sigma=1,n=1", "cauchy:beta=4,n=1", "inverse_gamma:mu=2"] {
            let r = relaxation(spec, 400, 10);
            let t = verify_thm2_hellinger(&r.trace, r.c);
            ok &= t.passed();
            parts.push(format!(
                "{spec}: monotone {}, tail {}, int {:.3e} <= {:.3e}, L1 {}",
                t.monotone,
                t.tail_decreasing,
                t.integral,
                t.bound * 1.05,
                t.l1_ok
            ));
        }
        (ok, parts.join("; "))
    })
}

fn criterion_9() -> Line {
    timed(9, "dissipation identity", 60.0, || {
        let d = density("gaussian:sigma=1,n=1");
        let solver = build_solver(&d, &diffusion_weight(&d).unwrap(), &GridSpec::new(400)).unwrap();
        let s0 = solver.perturbed(&Perturbation::new(PerturbationKind::Tanh, 0.1).unwrap());
        let (_, trace) = solver.evolve(&s0, 3.0, DtPolicy::new(1e-3, 1).unwrap()).unwrap();
        let chi2 = trace.max_dissipation_defect(false);
        let ent = trace.max_dissipation_defect(true);
        let mut s = s0;
        let mut forms: f64 = 0.0;
        for _ in 0..300 {
            let a = solver.dissipation_i_theta(&s, &ThetaKind::Entropy).unwrap();
            let b = solver.entropy_dissipation_sqrt(&s).unwrap();
            forms = forms.max((a - b).abs() / a);
            s = solver.step(&s, 1e-2).unwrap();
        }
        (
            chi2 < 0.02 && ent < 0.02 && forms < 1e-8,
            format!("chi2 defect {chi2:.2e}, entropy defect {ent:.2e}, entropy forms differ by {forms:.1e}"),
        )
    })
}

fn criterion_10() -> Line {
    timed(10, "mesh refinement changes rates by < 1%", 180.0, || {
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for spec in ["gaussian:sigma=1,n=1", "cauchy:beta=4,n=1", "barenblatt:a=1,p=2,n=2", "inverse_gamma:mu=2"] {
            let a = relaxation(spec, 400, 10).fitted_rate.unwrap();
            let b = relaxation(spec, 800, 10).fitted_rate.unwrap();
            let change = (b - a).abs() / a;
            worst = worst.max(change);
            parts.push(format!("{spec} {a:.5} -> {b:.5}"));
        }
        (worst < 0.01, format!("max change {worst:.1e}: {}", parts.join(", ")))
    })
}

// runs without the libtest harness so the criterion lines are always printed
fn main() {
    let lines = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let mut unexpected = Vec::new();
    for l in &lines {
        match EXPECTED_RED.iter().find(|(id, _)| *id == l.id) {
            Some((_, why)) => {
                println!("criterion {:>2} is expected to fail: {why}", l.id);
                if l.pass {
                    unexpected.push(format!("criterion {} passed but is listed as expected to fail", l.id));
                }
            }
            None if !l.pass => unexpected.push(format!("criterion {} failed: {}", l.id, l.detail)),
            None => {}
        }
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("acceptance: {passed} of {} criteria pass, {} expected to fail", lines.len(), EXPECTED_RED.len());
    if !unexpected.is_empty() {
        eprintln!("{}", unexpected.join("\n"));
        std::process::exit(1);
    }
}
