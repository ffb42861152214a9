//! Relaxation scenarios: one density, one perturbation, one resolution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_solver, verify_thm2_hellinger, DecayTrace, DtPolicy, GridSpec, Perturbation, HellingerReport};
use crate::densities::IsotropicDensity;
use crate::error::Result;
use crate::inequality::suite::one_dim_problem;
use crate::weights::diffusion_weight;

/// Relative margin allowed below the rate bound `2/c`.
pub const RATE_MARGIN: f64 = 0.05;

/// Mass drift allowed over a whole run.
pub const MASS_DRIFT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub density: IsotropicDensity,
    pub perturbation: Perturbation,
    pub grid: GridSpec,
    /// Horizon; `None` picks one long enough to cover the fit window at the
    /// bound rate.
    pub t_final: Option<f64>,
    pub policy: DtPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub density: String,
    pub perturbation: String,
    pub eps: f64,
    pub cells: usize,
    pub r_max: f64,
    pub t_final: f64,
    pub dt: f64,
    /// `sup w/K` for the radial Poincare weight `w`.
    pub c: f64,
    pub rate_bound: f64,
    pub fitted_rate: Option<f64>,
    pub fitted_rate_entropy: Option<f64>,
    pub rate_ok: Option<bool>,
    pub monotone: bool,
    pub nonnegative: bool,
    pub hellinger_below_chi2: bool,
    pub mass_drift: f64,
    pub dissipation_defect_chi2: f64,
    pub dissipation_defect_entropy: f64,
    pub hellinger: HellingerReport,
    pub pass: bool,
    #[serde(skip)]
    pub trace: DecayTrace,
}

impl Scenario {
    pub fn label(&self) -> String {
        format!(
            "{}_{}_{}",
            self.density.label(),
            self.perturbation.kind.key(),
            self.grid.cells
        )
    }

    pub fn run(&self) -> Result<ScenarioResult> {
        let d = &self.density;
        let solver = build_solver(d, &diffusion_weight(d)?, &self.grid)?;
        let (_, w) = one_dim_problem(d)?;
        let c = solver.rate_constant(&w);
        let rate_bound = if c > 0.0 && c.is_finite() { 2.0 / c } else { 0.0 };
        let t_final = self
            .t_final
            .unwrap_or_else(|| if rate_bound > 0.0 { 1.25 * 1e8f64.ln() / rate_bound } else { 20.0 });
        let s0 = solver.perturbed(&self.perturbation);
        let (_, trace) = solver.evolve(&s0, t_final, self.policy)?;
        let hellinger = verify_thm2_hellinger(&trace, c);
        let theta0 = trace.theta_chi2.first().copied().unwrap_or(0.0);
        let rate_ok = match trace.fitted_rate {
            Some(r) => Some(r >= rate_bound * (1.0 - RATE_MARGIN)),
            None if theta0 > 1e-20 => Some(false),
            None => None,
        };
        let monotone = trace.all_monotone();
        let nonnegative = trace.all_nonnegative();
        let hellinger_below_chi2 = trace.hellinger_below_chi2();
        let mass_drift = trace.mass_drift();
        let pass = rate_ok != Some(false)
            && monotone
            && nonnegative
            && hellinger_below_chi2
            && mass_drift < MASS_DRIFT_TOL
            && hellinger.passed();
        Ok(ScenarioResult {
            density: d.label(),
            perturbation: self.perturbation.kind.key().to_string(),
            eps: self.perturbation.eps,
            cells: solver.cells(),
            r_max: solver.grid.r_max(),
            t_final,
            dt: self.policy.dt,
            c,
            rate_bound,
            fitted_rate: trace.fitted_rate,
            fitted_rate_entropy: trace.fitted_rate_entropy,
            rate_ok,
            monotone,
            nonnegative,
            hellinger_below_chi2,
            mass_drift,
            dissipation_defect_chi2: trace.max_dissipation_defect(false),
            dissipation_defect_entropy: trace.max_dissipation_defect(true),
            hellinger,
            pass,
            trace,
        })
    }
}

/// Runs scenarios in parallel; results keep the input order.
pub fn run_scenarios(scenarios: &[Scenario]) -> Vec<Result<ScenarioResult>> {
    scenarios.par_iter().map(Scenario::run).collect()
}
