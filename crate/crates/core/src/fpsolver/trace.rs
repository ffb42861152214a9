use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FPState, Solver, ThetaKind};
use crate::error::Result;
use crate::inequality::Status;

/// Window of `Theta / Theta_0` used for rate fits.
pub const RATE_WINDOW: (f64, f64) = (1e-8, 1e-1);

/// Per-step slack allowed in monotonicity checks.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// Sampled decay of the chi-square, entropy and Hellinger functionals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    pub times: Vec<f64>,
    pub theta_chi2: Vec<f64>,
    pub theta_entropy: Vec<f64>,
    pub hellinger2: Vec<f64>,
    /// Chi-square dissipation `I_Theta`.
    pub dissipation: Vec<f64>,
    pub dissipation_entropy: Vec<f64>,
    pub mass: Vec<f64>,
    pub l1: Vec<f64>,
    /// Chi-square decay rate fitted on [`RATE_WINDOW`].
    pub fitted_rate: Option<f64>,
    pub fitted_rate_entropy: Option<f64>,
}

impl DecayTrace {
    pub fn push(&mut self, solver: &Solver, s: &FPState) -> Result<()> {
        self.times.push(s.t);
        self.theta_chi2.push(solver.functional_theta(s, &ThetaKind::Chi2)?);
        self.theta_entropy.push(solver.functional_theta(s, &ThetaKind::Entropy)?);
        self.hellinger2.push(solver.functional_theta(s, &ThetaKind::Hellinger2)?);
        self.dissipation.push(solver.dissipation_i_theta(s, &ThetaKind::Chi2)?);
        self.dissipation_entropy
            .push(solver.dissipation_i_theta(s, &ThetaKind::Entropy)?);
        self.mass.push(s.mass);
        self.l1.push(solver.l1_distance(s));
        Ok(())
    }

    pub fn refit(&mut self) {
        self.fitted_rate = fit_log_rate(&self.times, &self.theta_chi2, RATE_WINDOW);
        self.fitted_rate_entropy = fit_log_rate(&self.times, &self.theta_entropy, RATE_WINDOW);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest mass change relative to the initial mass.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(1.0);
        self.mass.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max)
    }

    /// Whether `series` never increases by more than [`MONOTONE_SLACK`].
    pub fn nonincreasing(series: &[f64]) -> bool {
        series.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK)
    }

    pub fn all_monotone(&self) -> bool {
        Self::nonincreasing(&self.theta_chi2)
            && Self::nonincreasing(&self.theta_entropy)
            && Self::nonincreasing(&self.hellinger2)
    }

    pub fn all_nonnegative(&self) -> bool {
        [&self.theta_chi2, &self.theta_entropy, &self.hellinger2, &self.dissipation]
            .iter()
            .all(|s| s.iter().all(|v| *v >= 0.0))
    }

    pub fn hellinger_below_chi2(&self) -> bool {
        self.hellinger2
            .iter()
            .zip(&self.theta_chi2)
            .all(|(h, c)| *h <= c * (1.0 + 1e-12) + 1e-300)
    }

    /// Largest `|dTheta/dt + I| / I` between consecutive samples, using the
    /// sample-average dissipation. Samples below `1e-8 Theta_0` are skipped.
    pub fn max_dissipation_defect(&self, entropy: bool) -> f64 {
        let (theta, diss) = if entropy {
            (&self.theta_entropy, &self.dissipation_entropy)
        } else {
            (&self.theta_chi2, &self.dissipation)
        };
        let Some(&t0) = theta.first() else { return 0.0 };
        let mut worst: f64 = 0.0;
        for k in 0..self.times.len().saturating_sub(1) {
            if theta[k + 1] < RATE_WINDOW.0 * t0 {
                break;
            }
            let rate = (theta[k + 1] - theta[k]) / (self.times[k + 1] - self.times[k]);
            let i = 0.5 * (diss[k] + diss[k + 1]);
            if i > 0.0 {
                worst = worst.max((rate + i).abs() / i);
            }
        }
        worst
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_rows(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_rows(&mut w)?;
        let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record([
            "t",
            "theta_chi2",
            "theta_entropy",
            "hellinger2",
            "I_theta",
            "mass",
            "I_entropy",
            "l1",
        ])?;
        for k in 0..self.len() {
            w.write_record(
                [
                    self.times[k],
                    self.theta_chi2[k],
                    self.theta_entropy[k],
                    self.hellinger2[k],
                    self.dissipation[k],
                    self.mass[k],
                    self.dissipation_entropy[k],
                    self.l1[k],
                ]
                .iter()
                .map(|v| format!("{v:e}")),
            )?;
        }
        Ok(())
    }
}

/// Least-squares decay rate of `log theta` over samples with
/// `theta / theta_0` in `window`. `None` with fewer than three such samples.
pub fn fit_log_rate(times: &[f64], theta: &[f64], window: (f64, f64)) -> Option<f64> {
    let t0 = *theta.first()?;
    if !(t0 > 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(theta)
        .filter(|(_, v)| **v > 0.0 && **v >= window.0 * t0 && **v <= window.1 * t0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

/// Checks on a trace that stand in for `d_H = o(1/sqrt t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HellingerReport {
    pub samples: usize,
    pub monotone: bool,
    /// `t d_H^2` nonincreasing over the last third of the samples.
    pub tail_decreasing: bool,
    /// Trapezoid `int_0^T d_H^2 dt`.
    pub integral: f64,
    /// `(c/2) H(f_0 | f_inf)`.
    pub bound: f64,
    pub integral_ok: bool,
    /// `||f - f_inf||_1 <= 2 d_H` at every sample.
    pub l1_ok: bool,
    pub status: Status,
}

impl HellingerReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Hellinger surrogates: monotonicity, decreasing `t d_H^2` tail, the
/// integral bound `int d_H^2 <= (c/2) H(f_0|f_inf)` with 5% slack, and the
/// `L^1` comparison.
pub fn verify_thm2_hellinger(trace: &DecayTrace, c: f64) -> HellingerReport {
    let h = &trace.hellinger2;
    let samples = trace.len();
    let monotone = DecayTrace::nonincreasing(h);
    let start = samples - samples / 3;
    let tail: Vec<f64> = (start..samples).map(|k| trace.times[k] * h[k]).collect();
    let tail_decreasing = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let integral: f64 = (1..samples)
        .map(|k| 0.5 * (h[k] + h[k - 1]) * (trace.times[k] - trace.times[k - 1]))
        .sum();
    let bound = 0.5 * c * trace.theta_entropy.first().copied().unwrap_or(0.0);
    let integral_ok = integral <= bound * 1.05 + 1e-15;
    let l1_ok = trace.l1.iter().zip(h).all(|(l, h)| *l <= 2.0 * h.sqrt() + 1e-12);
    let status = if samples < 20 {
        Status::Inconclusive
    } else if monotone && tail_decreasing && integral_ok && l1_ok {
        Status::Pass
    } else {
        Status::Fail
    };
    HellingerReport {
        samples,
        monotone,
        tail_decreasing,
        integral,
        bound,
        integral_ok,
        l1_ok,
        status,
    }
}
