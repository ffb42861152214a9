//! Experiment runner.
//!
//! A run reads an [`ExperimentConfig`] (TOML), evaluates weights, the
//! inequality matrix and relaxation scenarios, and writes:
//!
//! * `weights/<density>.csv` with columns `rho, K_closed, K_quadrature, rel_err`
//! * `checks.json` (every report, grouped by cell) and `checks.csv` (one row per report)
//! * `traces/<scenario>.csv` and `decay.json`
//! * `summary.json` and `summary.md`
//! * `manifest.json` with SHA-256 hashes of the files above
//! * `metadata.json` with the wall-clock timestamp, kept apart so that every
//!   other file is a pure function of the config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::densities::IsotropicDensity;
use crate::error::{Error, Result};
use crate::fpsolver::{run_scenarios, DtPolicy, GridSpec, Perturbation, PerturbationKind, Scenario, ScenarioResult};
use crate::inequality::suite::{run_matrix, MatrixCell, Outcome, DEFAULT_DENSITIES, DEFAULT_HYBRID_C};
use crate::inequality::{ratio_serde, CheckConfig, Status, Theorem};
use crate::weights::{closed_form_weight, inverse_gamma_weight, weight_from_density_kok, WeightFunction};

/// Relative tolerance for closed-form against quadrature weights.
pub const WEIGHT_TOL: f64 = 1e-6;

/// Relative change of fitted rates allowed under grid refinement.
pub const REFINEMENT_TOL: f64 = 0.01;

fn default_densities() -> Vec<String> {
    DEFAULT_DENSITIES.iter().map(|s| s.to_string()).collect()
}

fn default_theorems() -> Vec<String> {
    Theorem::ALL.iter().map(|t| t.key().to_string()).collect()
}

fn default_seed() -> u64 {
    20240601
}

fn default_true() -> bool {
    true
}

fn default_points() -> usize {
    50
}

fn default_hybrid_c() -> f64 {
    DEFAULT_HYBRID_C
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub quadrature_rel_tol: f64,
    pub ratio_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let c = CheckConfig::default();
        Self {
            quadrature_rel_tol: c.integrator.rel_tol,
            ratio_tol: c.tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub cells: usize,
    /// Horizon; omitted means long enough for the rate-fit window.
    pub t_final: Option<f64>,
    pub dt: f64,
    pub sample_every: usize,
    pub truncation_mass: f64,
    pub eps: f64,
    pub perturbations: Vec<String>,
    /// Also run every scenario with twice the cells and compare rates.
    pub refine: bool,
    /// Densities to evolve; defaults to the top-level list.
    pub densities: Option<Vec<String>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cells: 400,
            t_final: None,
            dt: 1e-3,
            sample_every: 10,
            truncation_mass: crate::fpsolver::DEFAULT_TAIL_MASS,
            eps: 0.1,
            perturbations: vec!["tanh".into()],
            refine: true,
            densities: None,
        }
    }
}

/// Everything a run needs. See `configs/default.toml` for an annotated copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_densities")]
    pub densities: Vec<String>,
    #[serde(default = "default_theorems")]
    pub theorems: Vec<String>,
    #[serde(default = "default_seed")]
    pub corpus_seed: u64,
    /// Add the non-catalog targets (angular laws, anisotropic Gaussians).
    #[serde(default = "default_true")]
    pub extras: bool,
    /// Write closed-form against quadrature weight tables.
    #[serde(default = "default_true")]
    pub weights: bool,
    #[serde(default = "default_points")]
    pub weight_points: usize,
    #[serde(default = "default_hybrid_c")]
    pub hybrid_c: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Relaxation runs; omitted means none.
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config takes defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn parsed_densities(&self) -> Result<Vec<IsotropicDensity>> {
        self.densities.iter().map(|s| IsotropicDensity::from_spec(s)).collect()
    }

    pub fn parsed_theorems(&self) -> Result<Vec<Theorem>> {
        self.theorems.iter().map(|s| Theorem::from_key(s)).collect()
    }

    pub fn check_config(&self) -> CheckConfig {
        let mut c = CheckConfig {
            tol: self.tolerances.ratio_tol,
            ..CheckConfig::default()
        };
        c.integrator.rel_tol = self.tolerances.quadrature_rel_tol;
        c
    }

    /// Scenarios of the solver section, coarse resolution first in each pair.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let Some(s) = &self.solver else { return Ok(Vec::new()) };
        let densities = match &s.densities {
            Some(list) => list.iter().map(|x| IsotropicDensity::from_spec(x)).collect::<Result<Vec<_>>>()?,
            None => self.parsed_densities()?,
        };
        let policy = DtPolicy::new(s.dt, s.sample_every)?;
        let mut out = Vec::new();
        for d in densities {
            for p in &s.perturbations {
                let perturbation = Perturbation::new(PerturbationKind::from_key(p)?, s.eps)?;
                let levels: &[usize] = if s.refine { &[1, 2] } else { &[1] };
                for &m in levels {
                    let mut grid = GridSpec::new(s.cells * m);
                    grid.tail_mass = s.truncation_mass;
                    out.push(Scenario {
                        density: d,
                        perturbation,
                        grid,
                        t_final: s.t_final,
                        policy,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Parses everything up front so a run fails before doing any work.
    pub fn validate(&self) -> Result<()> {
        self.parsed_densities()?;
        self.parsed_theorems()?;
        self.scenarios()?;
        if self.weight_points == 0 {
            return Err(Error::InvalidParameter("weight_points must be positive".into()));
        }
        Ok(())
    }
}

/// File-name form of a label.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// The diffusion weight in closed form, if the catalog has one.
pub fn closed_weight(d: &IsotropicDensity) -> Option<WeightFunction> {
    closed_form_weight(d).or_else(|| match d.kind() {
        crate::DensityKind::InverseGamma1d { mu } => Some(inverse_gamma_weight(mu)),
        _ => None,
    })
}

/// One row of a weight table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub rho: f64,
    #[serde(rename = "K_closed")]
    pub k_closed: f64,
    #[serde(rename = "K_quadrature")]
    pub k_quadrature: f64,
    pub rel_err: f64,
}

/// Closed-form and quadrature `K` on `points` interior points:
/// `(0, i+)` for compact supports, `(0, 3 scale)` otherwise (shifted to
/// `(0, 3)` past the mean for the half-line entry).
pub fn weight_table(d: &IsotropicDensity, points: usize) -> Result<Vec<WeightRow>> {
    let closed = closed_weight(d)
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no closed-form weight", d.label())))?;
    let hi = if d.is_compact() { d.support_radius() } else { 3.0 * d.scale() };
    let lo = if d.is_half_line() { 0.1 } else { 0.0 };
    (0..points)
        .map(|i| {
            let rho = lo + (hi - lo) * (i as f64 + 0.5) / points as f64;
            let k_closed = closed.eval(rho);
            let k_quadrature = weight_from_density_kok(d, rho)?;
            Ok(WeightRow {
                rho,
                k_closed,
                k_quadrature,
                rel_err: (k_quadrature - k_closed).abs() / k_closed.abs(),
            })
        })
        .collect()
}

pub fn write_weight_csv(rows: &[WeightRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub density: String,
    pub points: usize,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Outcome class of a matrix cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Pass,
    Fail,
    Skipped,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub theorem: Theorem,
    pub target: String,
    pub status: CellStatus,
    pub reports: usize,
    #[serde(with = "ratio_serde")]
    pub max_ratio: f64,
    pub failing: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl CellSummary {
    pub fn from_cell(c: &MatrixCell) -> Self {
        let (status, reason) = match &c.outcome {
            Outcome::Reports { .. } if c.passed() => (CellStatus::Pass, None),
            Outcome::Reports { .. } => (CellStatus::Fail, None),
            Outcome::Skipped { reason } => (CellStatus::Skipped, Some(reason.clone())),
            Outcome::Error { message } => (CellStatus::Error, Some(message.clone())),
        };
        let reports = c.reports();
        let max_ratio = reports
            .iter()
            .filter(|r| r.status == Status::Pass || r.status == Status::Fail)
            .map(|r| r.ratio)
            .fold(0.0, f64::max);
        Self {
            theorem: c.theorem,
            target: c.target.clone(),
            status,
            reports: reports.len(),
            max_ratio,
            failing: reports.iter().filter(|r| !r.pass).map(|r| r.witness.clone()).collect(),
            reason,
        }
    }
}

/// Rates of one scenario at two resolutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub density: String,
    pub perturbation: String,
    pub cells: usize,
    pub coarse_rate: Option<f64>,
    pub fine_rate: Option<f64>,
    pub rel_change: Option<f64>,
    pub pass: bool,
}

/// Pairs consecutive coarse/fine results of the same scenario.
pub fn refinement_rows(results: &[ScenarioResult]) -> Vec<RefinementRow> {
    results
        .windows(2)
        .filter(|w| w[0].density == w[1].density && w[0].perturbation == w[1].perturbation && w[1].cells == 2 * w[0].cells)
        .map(|w| {
            let rel_change = match (w[0].fitted_rate, w[1].fitted_rate) {
                (Some(a), Some(b)) => Some((b - a).abs() / a.abs()),
                _ => None,
            };
            RefinementRow {
                density: w[0].density.clone(),
                perturbation: w[0].perturbation.clone(),
                cells: w[0].cells,
                coarse_rate: w[0].fitted_rate,
                fine_rate: w[1].fitted_rate,
                rel_change,
                pass: rel_change.is_some_and(|c| c < REFINEMENT_TOL),
            }
        })
        .collect()
}

/// Everything the markdown summary is rendered from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub weights: Vec<WeightSummary>,
    pub cells: Vec<CellSummary>,
    pub decay: Vec<ScenarioResult>,
    #[serde(default)]
    pub decay_errors: Vec<String>,
    pub refinement: Vec<RefinementRow>,
    pub all_pass: bool,
}

impl RunSummary {
    fn compute_pass(&mut self) {
        self.all_pass = self.weights.iter().all(|w| w.pass)
            && self
                .cells
                .iter()
                .all(|c| matches!(c.status, CellStatus::Pass | CellStatus::Skipped))
            && self.decay.iter().all(|d| d.pass)
            && self.decay_errors.is_empty()
            && self.refinement.iter().all(|r| r.pass);
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join("summary.json"))?)?)
    }

    /// Markdown tables: weights, the check matrix, relaxation.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let mark = |b: bool| if b { "pass" } else { "FAIL" };
        let _ = writeln!(s, "# Run summary\n\nseed: {}\n", self.seed);
        if !self.weights.is_empty() {
            let _ = writeln!(s, "## Diffusion weights\n");
            let _ = writeln!(s, "| density | points | max rel. error | status |\n|---|---|---|---|");
            for w in &self.weights {
                let _ = writeln!(s, "| {} | {} | {:.2e} | {} |", w.density, w.points, w.max_rel_err, mark(w.pass));
            }
            s.push('\n');
        }
        if !self.cells.is_empty() {
            let _ = writeln!(s, "## Poincare checks\n");
            let _ = writeln!(s, "| theorem | target | reports | max ratio | status |\n|---|---|---|---|---|");
            for c in &self.cells {
                let status = match c.status {
                    CellStatus::Pass => "pass".to_string(),
                    CellStatus::Fail => format!("FAIL: {}", c.failing.join(", ")),
                    CellStatus::Skipped => format!("skipped: {}", c.reason.as_deref().unwrap_or("")),
                    CellStatus::Error => format!("ERROR: {}", c.reason.as_deref().unwrap_or("")),
                };
                let ratio = if c.reports == 0 { "-".to_string() } else { format!("{:.6}", c.max_ratio) };
                let _ = writeln!(s, "| {} | {} | {} | {} | {} |", c.theorem, c.target, c.reports, ratio, status);
            }
            s.push('\n');
        }
        if !self.decay.is_empty() || !self.decay_errors.is_empty() {
            let _ = writeln!(s, "## Relaxation\n");
            let _ = writeln!(
                s,
                "| density | perturbation | cells | c | bound 2/c | chi2 rate | monotone | mass drift | Hellinger | status |\n|---|---|---|---|---|---|---|---|---|---|"
            );
            for d in &self.decay {
                let rate = d.fitted_rate.map_or("-".to_string(), |r| format!("{r:.4}"));
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {:.4} | {:.4} | {} | {} | {:.1e} | {} | {} |",
                    d.density,
                    d.perturbation,
                    d.cells,
                    d.c,
                    d.rate_bound,
                    rate,
                    d.monotone,
                    d.mass_drift,
                    mark(d.hellinger.passed()),
                    mark(d.pass)
                );
            }
            for e in &self.decay_errors {
                let _ = writeln!(s, "\nERROR: {e}");
            }
            s.push('\n');
        }
        if !self.refinement.is_empty() {
            let _ = writeln!(s, "## Grid refinement\n");
            let _ = writeln!(s, "| density | perturbation | cells | rate | rate (2x cells) | change | status |\n|---|---|---|---|---|---|---|");
            for r in &self.refinement {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.5}"));
                let change = r.rel_change.map_or("-".to_string(), |x| format!("{x:.2e}"));
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    r.density,
                    r.perturbation,
                    r.cells,
                    f(r.coarse_rate),
                    f(r.fine_rate),
                    change,
                    mark(r.pass)
                );
            }
            s.push('\n');
        }
        let _ = writeln!(s, "overall: {}", if self.all_pass { "pass" } else { "FAIL" });
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Collects writes under one output directory and records them.
struct Outputs {
    root: PathBuf,
    files: BTreeMap<String, ManifestEntry>,
}

impl Outputs {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.insert(
            rel.to_string(),
            ManifestEntry {
                path: rel.to_string(),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(bytes)),
            },
        );
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    fn finish(mut self) -> Result<Vec<ManifestEntry>> {
        let entries: Vec<ManifestEntry> = self.files.values().cloned().collect();
        self.write_json("manifest.json", &entries)?;
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = serde_json::json!({
            "created_unix": created,
            "version": env!("CARGO_PKG_VERSION"),
        });
        fs::write(self.root.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(entries)
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Serialize)]
struct ReportRow<'a> {
    theorem: &'a str,
    target: &'a str,
    witness: &'a str,
    lhs: f64,
    rhs: f64,
    ratio: f64,
    status: Status,
    pass: bool,
}

/// Flat CSV of every report in `cells`.
pub fn checks_csv(cells: &[MatrixCell]) -> Result<Vec<u8>> {
    let rows: Vec<ReportRow> = cells
        .iter()
        .flat_map(|c| {
            c.reports().iter().map(move |r| ReportRow {
                theorem: c.theorem.key(),
                target: &c.target,
                witness: &r.witness,
                lhs: r.lhs,
                rhs: r.rhs,
                ratio: r.ratio,
                status: r.status,
                pass: r.pass,
            })
        })
        .collect();
    csv_bytes(&rows)
}

/// Executes `cfg` and writes its artifacts to `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let densities = cfg.parsed_densities()?;
    let theorems = cfg.parsed_theorems()?;
    let mut out = Outputs::new(&cfg.output_dir)?;

    let mut weights = Vec::new();
    if cfg.weights {
        for d in densities.iter().filter(|d| closed_weight(d).is_some()) {
            let rows = weight_table(d, cfg.weight_points)?;
            out.write(&format!("weights/{}.csv", slug(&d.label())), &csv_bytes(&rows)?)?;
            let max_rel_err = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
            weights.push(WeightSummary {
                density: d.label(),
                points: rows.len(),
                max_rel_err,
                pass: max_rel_err <= WEIGHT_TOL,
            });
        }
    }

    let check_cfg = cfg.check_config();
    let matrix = run_matrix(&theorems, &densities, cfg.corpus_seed, &check_cfg, cfg.hybrid_c, cfg.extras);
    if !matrix.is_empty() {
        out.write_json("checks.json", &matrix)?;
        out.write("checks.csv", &checks_csv(&matrix)?)?;
    }

    let scenarios = cfg.scenarios()?;
    let mut decay = Vec::new();
    let mut decay_errors = Vec::new();
    for (s, r) in scenarios.iter().zip(run_scenarios(&scenarios)) {
        match r {
            Ok(r) => {
                out.write(
                    &format!("traces/{}.csv", slug(&s.label())),
                    r.trace.to_csv_string()?.as_bytes(),
                )?;
                decay.push(r);
            }
            Err(e) => decay_errors.push(format!("{}: {e}", s.label())),
        }
    }
    if !scenarios.is_empty() {
        out.write_json("decay.json", &decay)?;
    }
    let refinement = refinement_rows(&decay);

    let mut summary = RunSummary {
        seed: cfg.corpus_seed,
        weights,
        cells: matrix.iter().map(CellSummary::from_cell).collect(),
        decay,
        decay_errors,
        refinement,
        all_pass: false,
    };
    summary.compute_pass();
    out.write_json("summary.json", &summary)?;
    out.write("summary.md", summary.to_markdown().as_bytes())?;
    out.finish()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(c.densities.len(), DEFAULT_DENSITIES.len());
        assert_eq!(c.theorems.len(), 6);
        assert!(c.solver.is_none());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("densites = []").is_err());
        let c = ExperimentConfig::from_toml("theorems = [\"poincare\"]").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_toml("densities = [\"lognormal\"]").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trips() {
        let c = ExperimentConfig::from_toml("[solver]\ncells = 100\nperturbations = [\"bump\", \"cos\"]").unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
        assert_eq!(back.scenarios().unwrap().len(), DEFAULT_DENSITIES.len() * 4);
    }

    #[test]
    fn slugs_are_file_names() {
        assert_eq!(slug("cauchy:beta=3,n=2"), "cauchy_beta_3_n_2");
    }

    #[test]
    fn gaussian_weight_table_is_exact() {
        let d = IsotropicDensity::gaussian(2.0, 3).unwrap();
        let rows = weight_table(&d, 10).unwrap();
        assert!(rows.iter().all(|r| r.k_closed == 2.0 && r.rel_err < 1e-9));
    }
}
