//! Relaxation of perturbed equilibria: fitted chi-square rates, the Hellinger
//! checks and the dissipation identity, at two resolutions.
//!
//! `cargo run --release --example relaxation [density-spec] [perturbation]`

use isopoincare::fpsolver::{build_solver, verify_thm2_hellinger, DtPolicy, GridSpec, Perturbation, PerturbationKind};
use isopoincare::weights::diffusion_weight;
use isopoincare::IsotropicDensity;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let specs: Vec<String> = match args.first() {
        Some(s) => vec![s.clone()],
        None => vec!["gaussian:sigma=1,n=1".into(), "cauchy:beta=4,n=1".into()],
    };
    let kind = match args.get(1) {
        Some(k) => PerturbationKind::from_key(k)?,
        None => PerturbationKind::Tanh,
    };
    for spec in specs {
        let d = IsotropicDensity::from_spec(&spec)?;
        let k = diffusion_weight(&d)?;
        for cells in [400, 800] {
            let start = std::time::Instant::now();
            let solver = build_solver(&d, &k, &GridSpec::new(cells))?;
            let s0 = solver.perturbed(&Perturbation::new(kind, 0.1)?);
            let (_, trace) = solver.evolve(&s0, 12.0, DtPolicy::new(1e-3, 10)?)?;
            let hellinger = verify_thm2_hellinger(&trace, 1.0);
            println!(
                "{:<28} cells={cells:<4} r_max={:<8.3} rate={:.5} entropy rate={:.5} monotone={} H<=chi2={} \
                 defect chi2={:.2e} entropy={:.2e} mass drift={:.1e} hellinger={:?} ({:.1}s)",
                d.label(),
                solver.grid.r_max(),
                trace.fitted_rate.unwrap_or(f64::NAN),
                trace.fitted_rate_entropy.unwrap_or(f64::NAN),
                trace.all_monotone(),
                trace.hellinger_below_chi2(),
                trace.max_dissipation_defect(false),
                trace.max_dissipation_defect(true),
                trace.mass_drift(),
                hellinger.status,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
