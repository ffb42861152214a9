//! Radial Fokker-Planck solver.
//!
//! The equation `df/dt = div[K f_inf grad(f/f_inf)]` is discretized by finite
//! volumes in the ratio `F = f / f_inf` on a radial grid, with no-flux walls
//! at both ends and implicit Euler in time. The cell-averaged equilibrium is
//! an exact discrete steady state.

mod functionals;
mod scenario;
mod trace;

pub use functionals::{ConvexPhi, ThetaKind};
pub use scenario::{run_scenarios, Scenario, ScenarioResult, MASS_DRIFT_TOL, RATE_MARGIN};
pub use trace::{fit_log_rate, verify_thm2_hellinger, DecayTrace, HellingerReport, RATE_WINDOW};

use serde::{Deserialize, Serialize};

use crate::densities::IsotropicDensity;
use crate::error::{Error, Result};
use crate::quadrature::{EndpointPolicy, Integrator};
use crate::weights::{drift_center, steady_state_residual, WeightFunction};

/// Default equilibrium mass allowed beyond a truncated outer wall.
pub const DEFAULT_TAIL_MASS: f64 = 1e-12;

/// Smallest cell-averaged equilibrium value kept; deeper underflow is floored.
const FEQ_FLOOR: f64 = 1e-290;

/// How to lay out a radial grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cells: usize,
    /// Outer wall. Defaults to the support radius, or the truncation radius
    /// for unbounded supports.
    pub r_max: Option<f64>,
    pub tail_mass: f64,
    /// Cluster cells near the origin with a `sinh` map when the domain is
    /// long compared with the density scale.
    pub stretch: bool,
}

impl GridSpec {
    pub fn new(cells: usize) -> Self {
        Self {
            cells,
            r_max: None,
            tail_mass: DEFAULT_TAIL_MASS,
            stretch: true,
        }
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = Some(r_max);
        self
    }

    pub fn uniform(mut self) -> Self {
        self.stretch = false;
        self
    }
}

/// Cells `[r_j, r_{j+1}]` of the radial domain with their `sigma_n rho^{n-1}`
/// volumes. For the half-line entry the Jacobian is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    pub n: usize,
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    pub volumes: Vec<f64>,
    surface: f64,
}

impl RadialGrid {
    pub fn from_edges(n: usize, surface: f64, edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 3 || edges[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "a radial grid needs at least two cells starting at 0".into(),
            ));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || !edges.iter().all(|e| e.is_finite()) {
            return Err(Error::InvalidParameter("grid edges must be finite and increasing".into()));
        }
        let nf = n as f64;
        let volumes: Vec<f64> = edges
            .windows(2)
            .map(|w| surface * (w[1].powi(n as i32) - w[0].powi(n as i32)) / nf)
            .collect();
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self {
            n,
            edges,
            centers,
            volumes,
            surface,
        })
    }

    /// Grid for `d` following `spec`.
    pub fn for_density(d: &IsotropicDensity, spec: &GridSpec) -> Result<Self> {
        if spec.cells < 2 {
            return Err(Error::InvalidParameter("need at least 2 cells".into()));
        }
        let r_max = match spec.r_max {
            Some(r) if r > 0.0 && r.is_finite() => r.min(d.support_radius()),
            Some(r) => return Err(Error::InvalidParameter(format!("r_max must be positive, got {r}"))),
            None if d.is_compact() => d.support_radius(),
            None => truncation_radius(d, spec.tail_mass)?,
        };
        let m = spec.cells;
        let ratio = r_max / d.scale();
        let edges: Vec<f64> = if spec.stretch && ratio > 4.0 {
            let alpha = ratio.asinh();
            (0..=m)
                .map(|j| r_max * (alpha * j as f64 / m as f64).sinh() / alpha.sinh())
                .collect()
        } else {
            (0..=m).map(|j| r_max * j as f64 / m as f64).collect()
        };
        let mut edges = edges;
        edges[m] = r_max;
        Self::from_edges(d.n(), d.surface_factor(), edges)
    }

    pub fn cells(&self) -> usize {
        self.volumes.len()
    }

    pub fn r_max(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// `sigma_n rho^{n-1}` (1 for the half-line entry).
    pub fn jacobian(&self, r: f64) -> f64 {
        self.surface * r.powi(self.n as i32 - 1)
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }
}

/// Smallest radius whose equilibrium tail mass is below `tail`.
pub fn truncation_radius(d: &IsotropicDensity, tail: f64) -> Result<f64> {
    if d.is_compact() {
        return Ok(d.support_radius());
    }
    let integ = Integrator::with_tolerances(1e-8, 0.0);
    let tail_at = |r: f64| -> Result<f64> { Ok(integ.integrate(|x| d.radial_pdf(x), r, f64::INFINITY)?.value) };
    let mut hi = d.scale();
    while tail_at(hi)? >= tail {
        hi *= 2.0;
        if hi > 1e12 * d.scale() {
            return Err(Error::InvalidParameter(format!(
                "tail mass of {} stays above {tail}",
                d.label()
            )));
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if tail_at(mid)? >= tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Finite-volume operator for one (density, weight, grid) triple.
#[derive(Clone, Debug)]
pub struct Solver {
    pub grid: RadialGrid,
    pub density: IsotropicDensity,
    pub weight: WeightFunction,
    /// Cell averages of the equilibrium, normalized to unit mass on the grid.
    pub feq: Vec<f64>,
    /// Face coefficients `K f_inf J / dr` at interior faces `1..M`.
    pub transmissibility: Vec<f64>,
}

/// Builds the solver, checking that `k` makes `d` stationary.
pub fn build_solver(d: &IsotropicDensity, k: &WeightFunction, spec: &GridSpec) -> Result<Solver> {
    let grid = RadialGrid::for_density(d, spec)?;
    build_solver_on(d, k, grid)
}

pub fn build_solver_on(d: &IsotropicDensity, k: &WeightFunction, grid: RadialGrid) -> Result<Solver> {
    check_stationary(d, k, grid.r_max())?;
    let m = grid.cells();
    let mut integ = d.radial_integrator(&Integrator::with_tolerances(1e-12, 0.0));
    integ.lower = EndpointPolicy::Open;
    let mut masses = Vec::with_capacity(m);
    for j in 0..m {
        let (a, b) = (grid.edges[j], grid.edges[j + 1]);
        let e = integ.integrate(|r| d.radial_pdf(r), a, b)?;
        masses.push(e.value.max(0.0));
    }
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter(format!("{} has no mass on the grid", d.label())));
    }
    let feq: Vec<f64> = masses
        .iter()
        .zip(&grid.volumes)
        .map(|(mass, v)| (mass / total / v).max(FEQ_FLOOR))
        .collect();
    let mut transmissibility = Vec::with_capacity(m - 1);
    for j in 1..m {
        let r = grid.edges[j];
        let kr = k.eval(r);
        if !(kr > 0.0) {
            return Err(Error::NonPositiveWeight(r));
        }
        let dr = grid.centers[j] - grid.centers[j - 1];
        transmissibility.push(kr * d.eval(r) / total * grid.jacobian(r) / dr);
    }
    Ok(Solver {
        grid,
        density: *d,
        weight: k.clone(),
        feq,
        transmissibility,
    })
}

/// Relative steady-state residual of `d/drho[K f] + (rho - m) f` at interior
/// probes; rejects weights that do not make `d` stationary.
fn check_stationary(d: &IsotropicDensity, k: &WeightFunction, r_max: f64) -> Result<()> {
    let center = drift_center(d);
    let h = 1e-4 * d.scale().min(r_max);
    for i in 1..10 {
        let rho = r_max * i as f64 / 10.0;
        let f = d.eval(rho);
        if !(f > 1e-200) || rho - 2.0 * h <= 0.0 {
            continue;
        }
        let res = steady_state_residual(d, k, rho, h);
        let size = (rho - center).abs().max(1e-3 * d.scale()) * f;
        if !(res.abs() <= 1e-4 * size) {
            return Err(Error::Hypothesis(format!(
                "{} is not a stationary weight for {}: residual {res:e} at rho = {rho}",
                k.label(),
                d.label()
            )));
        }
    }
    Ok(())
}

/// Bounded multiplicative perturbation shapes `g` with `|g| <= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    /// `tanh((rho - mean)/s)`
    Tanh,
    /// `2 exp(-((rho - mean)/s)^2) - 1`
    Bump,
    /// `cos(rho / s)`
    Cos,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 3] = [PerturbationKind::Tanh, PerturbationKind::Bump, PerturbationKind::Cos];

    pub fn key(&self) -> &'static str {
        match self {
            PerturbationKind::Tanh => "tanh",
            PerturbationKind::Bump => "bump",
            PerturbationKind::Cos => "cos",
        }
    }

    pub fn from_key(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| Error::Parse(format!("unknown perturbation {s:?} (expected tanh, bump or cos)")))
    }

    fn shape(&self, x: f64) -> f64 {
        match self {
            PerturbationKind::Tanh => x.tanh(),
            PerturbationKind::Bump => 2.0 * (-x * x).exp() - 1.0,
            PerturbationKind::Cos => x.cos(),
        }
    }
}

/// Initial data `f_inf (1 + eps g) / Z` with `0 <= eps <= 0.2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub eps: f64,
}

impl Perturbation {
    pub fn new(kind: PerturbationKind, eps: f64) -> Result<Self> {
        if !(0.0..=0.2).contains(&eps) {
            return Err(Error::InvalidParameter(format!(
                "perturbation size must lie in [0, 0.2], got {eps}"
            )));
        }
        Ok(Self { kind, eps })
    }
}

/// Cell-averaged density at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FPState {
    pub values: Vec<f64>,
    pub t: f64,
    pub mass: f64,
}

/// Time step and sampling interval for [`Solver::evolve`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtPolicy {
    pub dt: f64,
    pub sample_every: usize,
}

impl DtPolicy {
    pub fn new(dt: f64, sample_every: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || sample_every == 0 {
            return Err(Error::InvalidParameter(format!(
                "need dt > 0 and sample_every >= 1, got {dt} and {sample_every}"
            )));
        }
        Ok(Self { dt, sample_every })
    }
}

impl Solver {
    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    /// Equilibrium mass per cell, `V_i f_inf,i`.
    pub fn eq_masses(&self) -> Vec<f64> {
        self.feq.iter().zip(&self.grid.volumes).map(|(f, v)| f * v).collect()
    }

    pub fn mass_of(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.grid.volumes).map(|(f, v)| f * v).sum()
    }

    pub fn equilibrium(&self) -> FPState {
        self.state_from_values(self.feq.clone())
    }

    fn state_from_values(&self, values: Vec<f64>) -> FPState {
        let mass = self.mass_of(&values);
        FPState { values, t: 0.0, mass }
    }

    /// Perturbed start; `g` is centered at the equilibrium mean radius and
    /// scaled by the density scale.
    pub fn perturbed(&self, p: &Perturbation) -> FPState {
        let masses = self.eq_masses();
        let total: f64 = masses.iter().sum();
        let mean: f64 = masses.iter().zip(&self.grid.centers).map(|(m, r)| m * r).sum::<f64>() / total;
        let s = self.density.scale();
        let ratio: Vec<f64> = self
            .grid
            .centers
            .iter()
            .map(|r| 1.0 + p.eps * p.kind.shape((r - mean) / s))
            .collect();
        let z: f64 = ratio.iter().zip(&masses).map(|(f, m)| f * m).sum::<f64>() / total;
        let values = ratio.iter().zip(&self.feq).map(|(f, e)| f / z * e).collect();
        self.state_from_values(values)
    }

    /// Initial state from an arbitrary ratio profile `F(rho)`, renormalized.
    pub fn from_ratio(&self, ratio: impl Fn(f64) -> f64) -> Result<FPState> {
        let f: Vec<f64> = self.grid.centers.iter().map(|&r| ratio(r)).collect();
        if f.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("initial ratio must be finite and nonnegative".into()));
        }
        let masses = self.eq_masses();
        let total: f64 = masses.iter().sum();
        let z: f64 = f.iter().zip(&masses).map(|(f, m)| f * m).sum::<f64>() / total;
        if !(z > 0.0) {
            return Err(Error::InvalidParameter("initial ratio has no mass".into()));
        }
        let values = f.iter().zip(&self.feq).map(|(f, e)| f / z * e).collect();
        Ok(self.state_from_values(values))
    }

    /// `F = f / f_inf` per cell.
    pub fn ratio(&self, s: &FPState) -> Vec<f64> {
        s.values.iter().zip(&self.feq).map(|(f, e)| f / e).collect()
    }

    /// Net flux into each cell, `sum_faces T (F_nb - F_i)`.
    pub fn flux_divergence(&self, s: &FPState) -> Vec<f64> {
        let f = self.ratio(s);
        let mut out = vec![0.0; f.len()];
        for (j, t) in self.transmissibility.iter().enumerate() {
            let flux = t * (f[j + 1] - f[j]);
            out[j] += flux;
            out[j + 1] -= flux;
        }
        out
    }

    /// One implicit Euler step.
    pub fn step(&self, s: &FPState, dt: f64) -> Result<FPState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let m = self.cells();
        let t = &self.transmissibility;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            let v = self.grid.volumes[i] / dt;
            diag[i] = v * self.feq[i];
            rhs[i] = v * s.values[i];
            if i > 0 {
                diag[i] += t[i - 1];
                lower[i] = -t[i - 1];
            }
            if i + 1 < m {
                diag[i] += t[i];
                upper[i] = -t[i];
            }
        }
        let ratio = thomas(&lower, &diag, &upper, &rhs)?;
        let mut values: Vec<f64> = ratio.iter().zip(&self.feq).map(|(f, e)| f * e).collect();
        if values.iter().any(|v| *v < 0.0) {
            let before = self.mass_of(&values);
            values.iter_mut().for_each(|v| *v = v.max(0.0));
            let after = self.mass_of(&values);
            if !(before > 0.0) || !(after > 0.0) {
                return Err(Error::LinearSolve(format!("negative mass {before:e} after step")));
            }
            values.iter_mut().for_each(|v| *v *= before / after);
        }
        let mass = self.mass_of(&values);
        if !(mass > 0.0) {
            return Err(Error::LinearSolve(format!("negative mass {mass:e} after step")));
        }
        Ok(FPState {
            values,
            t: s.t + dt,
            mass,
        })
    }

    /// Evolves to `t_final`, sampling every `policy.sample_every` steps and at
    /// the end. The last step is shortened to land on `t_final`.
    pub fn evolve(&self, s0: &FPState, t_final: f64, policy: DtPolicy) -> Result<(FPState, DecayTrace)> {
        let mut trace = DecayTrace::default();
        trace.push(self, s0)?;
        let mut s = s0.clone();
        // a whole number of equal steps, so no sliver step lands at the end
        let span = t_final - s0.t;
        let steps = if span > 0.0 { (span / policy.dt - 1e-9).ceil().max(1.0) as usize } else { 0 };
        let dt = if steps > 0 { span / steps as f64 } else { 0.0 };
        for k in 1..=steps {
            s = self.step(&s, dt)?;
            s.t = if k == steps { t_final } else { s0.t + k as f64 * dt };
            if k % policy.sample_every == 0 || k == steps {
                trace.push(self, &s)?;
            }
        }
        trace.refit();
        Ok((s, trace))
    }

    /// Smallest `c` with `w <= c K` at the cell centers.
    pub fn rate_constant(&self, w: &WeightFunction) -> f64 {
        self.grid
            .centers
            .iter()
            .map(|&r| w.eval(r) / self.weight.eval(r))
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }
}

/// Tridiagonal solve; `lower[0]` and `upper[m-1]` are ignored.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for i in 0..m {
        let a = if i > 0 { lower[i] } else { 0.0 };
        let den = diag[i] - a * prev_c;
        if !(den.abs() > 0.0) || !den.is_finite() {
            return Err(Error::LinearSolve(format!("zero pivot in row {i}")));
        }
        c[i] = if i + 1 < m { upper[i] / den } else { 0.0 };
        d[i] = (rhs[i] - a * prev_d) / den;
        prev_c = c[i];
        prev_d = d[i];
    }
    let mut x = d;
    for i in (0..m.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("non-finite solution".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::diffusion_weight;

    fn solver(d: &IsotropicDensity, cells: usize) -> Solver {
        build_solver(d, &diffusion_weight(d).unwrap(), &GridSpec::new(cells)).unwrap()
    }

    #[test]
    fn thomas_matches_dense() {
        let lower = [0.0, -1.0, -2.0];
        let diag = [4.0, 5.0, 6.0];
        let upper = [-1.0, -2.0, 0.0];
        let x = [1.0, -2.0, 3.0];
        let rhs = [
            diag[0] * x[0] + upper[0] * x[1],
            lower[1] * x[0] + diag[1] * x[1] + upper[1] * x[2],
            lower[2] * x[1] + diag[2] * x[2],
        ];
        let got = thomas(&lower, &diag, &upper, &rhs).unwrap();
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_volumes_sum_to_ball() {
        let d = IsotropicDensity::gaussian(1.0, 3).unwrap();
        let g = RadialGrid::for_density(&d, &GridSpec::new(50).with_r_max(2.0)).unwrap();
        let ball = 4.0 / 3.0 * std::f64::consts::PI * 8.0;
        assert!((g.total_volume() / ball - 1.0).abs() < 1e-13);
    }

    #[test]
    fn truncation_meets_tail_mass() {
        let d = IsotropicDensity::gaussian(1.0, 1).unwrap();
        let r = truncation_radius(&d, 1e-12).unwrap();
        // 2 * upper normal tail at 7.13 is 1e-12
        assert!((r - 7.13).abs() < 0.02, "{r}");
    }

    #[test]
    fn equilibrium_is_steady() {
        let d = IsotropicDensity::gaussian(1.0, 1).unwrap();
        let s = build_solver(&d, &diffusion_weight(&d).unwrap(), &GridSpec::new(400).with_r_max(8.0)).unwrap();
        let eq = s.equilibrium();
        let res = s.flux_divergence(&eq);
        assert!(res.iter().all(|r| r.abs() < 1e-12));
        let next = s.step(&eq, 0.1).unwrap();
        for (a, b) in next.values.iter().zip(&eq.values) {
            assert!((a - b).abs() <= 1e-12 * b.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn barenblatt_boundary_is_closed() {
        let d = IsotropicDensity::barenblatt(1.0, 2.0, 2).unwrap();
        let s = solver(&d, 100);
        assert_eq!(s.grid.r_max(), 1.0);
        assert!(d.eval(1.0) == 0.0);
        assert_eq!(s.transmissibility.len(), 99);
    }

    #[test]
    fn inverse_gamma_on_truncated_half_line() {
        let d = IsotropicDensity::inverse_gamma(2.0).unwrap();
        let s = build_solver(&d, &diffusion_weight(&d).unwrap(), &GridSpec::new(400).with_r_max(50.0)).unwrap();
        let res = s.flux_divergence(&s.equilibrium());
        assert!(res.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn rejects_wrong_weight() {
        let d = IsotropicDensity::gaussian(1.0, 2).unwrap();
        let k = WeightFunction::constant(2.0);
        assert!(matches!(
            build_solver(&d, &k, &GridSpec::new(50)),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn step_conserves_mass() {
        let d = IsotropicDensity::cauchy(3.0, 2).unwrap();
        let s = solver(&d, 200);
        let mut st = s.perturbed(&Perturbation::new(PerturbationKind::Tanh, 0.2).unwrap());
        let m0 = st.mass;
        for _ in 0..50 {
            let next = s.step(&st, 0.05).unwrap();
            assert!((next.mass - st.mass).abs() < 1e-12 * m0);
            st = next;
        }
        assert!(st.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn perturbation_size_is_bounded() {
        assert!(Perturbation::new(PerturbationKind::Cos, 0.3).is_err());
        assert!(PerturbationKind::from_key("bump").is_ok());
        assert!(PerturbationKind::from_key("step").is_err());
    }
}
