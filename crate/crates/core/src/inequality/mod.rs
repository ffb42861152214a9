//! Numerical checks of weighted Poincare inequalities
//! `Var[phi(X)] <= E[w(X) |grad phi(X)|^2]` over corpora of test functions.

pub mod corpus;
pub mod suite;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::densities::{Density1d, IsotropicDensity};
use crate::error::{Error, Result};
use crate::quadrature::hyperspherical::{HypersphericalGrid, DEFAULT_ANGULAR_ORDER, MAX_GRID_DIM};
use crate::quadrature::{Integrator, ProductRule, Rule1d, Support, TestFunction};
use crate::weights::{composite_wstar, critical_radius_b1, hybrid_weight, WeightFunction, AZIMUTHAL_BOUND, POLAR_BOUND};

pub use corpus::TestCorpus;

/// Which inequality a report refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    #[serde(rename = "poincare_1d")]
    Poincare1d,
    Product,
    IsotropicWstar,
    RefinedOutsideBall,
    Hybrid,
    GaussianAnisotropic,
}

impl Theorem {
    pub const ALL: [Theorem; 6] = [
        Theorem::Poincare1d,
        Theorem::Product,
        Theorem::IsotropicWstar,
        Theorem::RefinedOutsideBall,
        Theorem::Hybrid,
        Theorem::GaussianAnisotropic,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Theorem::Poincare1d => "poincare_1d",
            Theorem::Product => "product",
            Theorem::IsotropicWstar => "isotropic_wstar",
            Theorem::RefinedOutsideBall => "refined_outside_ball",
            Theorem::Hybrid => "hybrid",
            Theorem::GaussianAnisotropic => "gaussian_anisotropic",
        }
    }

    pub fn from_key(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace('-', "_");
        Theorem::ALL
            .into_iter()
            .find(|t| t.key() == k || (k == "isotropic_w*" && *t == Theorem::IsotropicWstar))
            .ok_or_else(|| Error::Parse(format!("unknown theorem '{s}'")))
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Outcome class of one check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Quadrature did not converge; neither pass nor fail.
    Inconclusive,
    /// The test function violates a hypothesis of the theorem.
    Rejected,
}

/// Serde adapter writing non-finite floats as `"inf"`, `"-inf"` or `"nan"`.
pub mod ratio_serde {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Num(v) => v,
            Repr::Text(t) => match t.as_str() {
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                _ => f64::NAN,
            },
        })
    }
}

/// Below this, a variance counts as zero.
pub const ZERO_VARIANCE: f64 = 1e-24;

/// Result of checking one test function against one inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub theorem: Theorem,
    pub density: String,
    pub weight: String,
    pub witness: String,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(with = "ratio_serde")]
    pub ratio: f64,
    pub tol: f64,
    pub pass: bool,
    pub status: Status,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InequalityReport {
    /// Report for `lhs <= rhs` with relative slack `tol`. A zero right side
    /// passes with ratio 0 when the variance is zero too, and fails with an
    /// infinite ratio otherwise.
    pub fn evaluate(
        theorem: Theorem,
        density: impl Into<String>,
        weight: impl Into<String>,
        witness: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tol: f64,
    ) -> Self {
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs <= ZERO_VARIANCE {
            0.0
        } else {
            f64::INFINITY
        };
        let pass = ratio <= 1.0 + tol;
        Self {
            theorem,
            density: density.into(),
            weight: weight.into(),
            witness: witness.into(),
            lhs,
            rhs,
            ratio,
            tol,
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
            extras: BTreeMap::new(),
            note: None,
        }
    }

    fn unresolved(
        theorem: Theorem,
        density: &str,
        weight: &str,
        witness: &str,
        tol: f64,
        status: Status,
        note: String,
    ) -> Self {
        Self {
            theorem,
            density: density.into(),
            weight: weight.into(),
            witness: witness.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            ratio: f64::NAN,
            tol,
            pass: false,
            status,
            extras: BTreeMap::new(),
            note: Some(note),
        }
    }

    pub fn inconclusive(theorem: Theorem, density: &str, weight: &str, witness: &str, tol: f64, err: &Error) -> Self {
        Self::unresolved(theorem, density, weight, witness, tol, Status::Inconclusive, err.to_string())
    }

    pub fn rejected(theorem: Theorem, density: &str, weight: &str, witness: &str, tol: f64, reason: String) -> Self {
        Self::unresolved(theorem, density, weight, witness, tol, Status::Rejected, reason)
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Numerical settings shared by the checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Relative slack on the ratio.
    pub tol: f64,
    pub integrator: Integrator,
    pub angular_order: usize,
    /// Nodes per factor of product rules; `None` picks by dimension.
    pub product_nodes: Option<usize>,
    /// Relative error estimate accepted from 1-D quadratures that exhaust
    /// their subdivision budget.
    pub accept_rel_error: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            integrator: Integrator::default(),
            angular_order: DEFAULT_ANGULAR_ORDER,
            product_nodes: None,
            accept_rel_error: 1e-8,
        }
    }
}

fn sorted(mut v: Vec<InequalityReport>) -> Vec<InequalityReport> {
    v.sort_by(|a, b| a.witness.cmp(&b.witness));
    v
}

fn merged(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().filter(|x| x.is_finite()).collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v.dedup();
    v
}

/// `Var[phi(X)] <= E[w(X) phi'(X)^2]` for a one-dimensional law.
pub fn check_poincare_1d(
    f: &Density1d,
    w: &WeightFunction,
    corpus: &TestCorpus,
    cfg: &CheckConfig,
) -> Vec<InequalityReport> {
    let th = Theorem::Poincare1d;
    let reports = corpus
        .members
        .par_iter()
        .map(|phi| {
            let run = || -> Result<InequalityReport> {
                let bps = merged(phi.line_breakpoints(), w.breakpoints());
                let [mean] = f.expect_within(|x| [phi.eval(&[x])], &cfg.integrator, &bps, cfg.accept_rel_error)?;
                let [var, energy] = f.expect_within(
                    |x| {
                        let mut g = [0.0];
                        let v = phi.eval_grad(&[x], &mut g) - mean;
                        let e = if g[0] == 0.0 { 0.0 } else { w.eval(x) * g[0] * g[0] };
                        [v * v, e]
                    },
                    &cfg.integrator,
                    &bps,
                    cfg.accept_rel_error,
                )?;
                Ok(InequalityReport::evaluate(th, f.label(), w.label(), &phi.id, var.max(0.0), energy, cfg.tol))
            };
            run().unwrap_or_else(|e| InequalityReport::inconclusive(th, f.label(), w.label(), &phi.id, cfg.tol, &e))
        })
        .collect();
    sorted(reports)
}

/// Tensor rule for independent factors, with each 1-D weight tabulated at
/// the factor's nodes.
struct ProductSetup {
    rule: ProductRule,
    tables: Vec<Vec<f64>>,
}

fn product_setup(factors: &[Density1d], weights: &[WeightFunction], cfg: &CheckConfig) -> Result<ProductSetup> {
    if factors.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "{} factors but {} weights",
            factors.len(),
            weights.len()
        )));
    }
    let n = factors.len();
    if n == 0 || n > crate::quadrature::product::MAX_PRODUCT_DIM {
        return Err(Error::InvalidParameter(format!(
            "product check supports 1..={} factors, got {n}",
            crate::quadrature::product::MAX_PRODUCT_DIM
        )));
    }
    let nodes = cfg.product_nodes.unwrap_or_else(|| ProductRule::default_nodes(n));
    let rules = factors
        .iter()
        .map(|f| Rule1d::for_density(f, nodes))
        .collect::<Result<Vec<_>>>()?;
    let tables = rules
        .iter()
        .zip(weights)
        .map(|(r, w)| r.nodes.iter().map(|&x| w.eval(x)).collect())
        .collect();
    Ok(ProductSetup {
        rule: ProductRule::new(rules)?,
        tables,
    })
}

/// `Var[phi] <= sum_i E[w_i(x_i) (d phi/d x_i)^2]` for a product law.
pub fn check_product(
    factors: &[Density1d],
    weights: &[WeightFunction],
    corpus: &TestCorpus,
    cfg: &CheckConfig,
) -> Result<Vec<InequalityReport>> {
    let setup = product_setup(factors, weights, cfg)?;
    let n = factors.len();
    if corpus.dim() != n {
        return Err(Error::InvalidParameter(format!(
            "corpus dimension {} does not match {n} factors",
            corpus.dim()
        )));
    }
    let label = factors.iter().map(|f| f.label()).collect::<Vec<_>>().join(" x ");
    let wlabel = weights.iter().map(|w| w.label()).collect::<Vec<_>>().join(" + ");
    let th = Theorem::Product;
    let reports = corpus
        .members
        .par_iter()
        .map(|phi| {
            let [mean] = setup.rule.sum(|y, _| [phi.eval(y)]);
            let mut g = [0.0; MAX_GRID_DIM];
            let sums: [f64; 1 + MAX_GRID_DIM] = setup.rule.sum(|y, idx| {
                let v = phi.eval_grad(y, &mut g[..n]) - mean;
                let mut out = [0.0; 1 + MAX_GRID_DIM];
                out[0] = v * v;
                for i in 0..n {
                    out[1 + i] = setup.tables[i][idx[i]] * g[i] * g[i];
                }
                out
            });
            let rhs: f64 = sums[1..=n].iter().sum();
            let mut r = InequalityReport::evaluate(th, &label, &wlabel, &phi.id, sums[0].max(0.0), rhs, cfg.tol);
            for i in 0..n {
                r = r.with_extra(&format!("term_{}", i + 1), sums[1 + i]);
            }
            r
        })
        .collect();
    Ok(sorted(reports))
}

/// Angular bounds `b_i` for the hyperspherical split in dimension `n`.
pub fn angular_bounds(n: usize) -> Vec<f64> {
    (1..n).map(|i| if i == n - 1 { AZIMUTHAL_BOUND } else { POLAR_BOUND }).collect()
}

fn grid_for(d: &IsotropicDensity, cfg: &CheckConfig) -> Result<HypersphericalGrid> {
    HypersphericalGrid::new(*d, cfg.angular_order, cfg.integrator)
}

/// `Var[phi] <= E[W*(|X|) |grad phi|^2]` with `W* = max{w, pi^2/2 rho^2}`.
///
/// Each report also carries `radial` and `angular`, the two addends of the
/// hyperspherical product bound, and `split_ratio = lhs / (radial + angular)`.
pub fn check_isotropic_wstar(
    d: &IsotropicDensity,
    w_radial: &WeightFunction,
    corpus: &TestCorpus,
    cfg: &CheckConfig,
) -> Result<Vec<InequalityReport>> {
    let n = d.n();
    if n < 2 || d.is_half_line() {
        return Err(Error::Hypothesis(format!("{}: the hyperspherical split needs n >= 2", d.label())));
    }
    let grid = grid_for(d, cfg)?;
    let wstar = composite_wstar(w_radial);
    let bounds = angular_bounds(n);
    let label = d.label();
    let th = Theorem::IsotropicWstar;
    let rule = grid.angular();
    let reports = corpus
        .members
        .par_iter()
        .map(|phi| {
            let run = || -> Result<InequalityReport> {
                let bps = merged(phi.radial_breakpoints(), w_radial.breakpoints());
                let [mean] = grid.expect(|node| [phi.eval(node.x)], &bps)?;
                let [var, full, radial, angular] = grid.expect_with(
                    |rho| (wstar.eval(rho), w_radial.eval(rho)),
                    |node, &(ws, wr)| {
                        let mut g = [0.0; MAX_GRID_DIM];
                        let v = phi.eval_grad(node.x, &mut g[..n]) - mean;
                        let g2: f64 = g[..n].iter().map(|c| c * c).sum();
                        let dr: f64 = g[..n].iter().zip(node.dir).map(|(a, b)| a * b).sum();
                        let mut ang = 0.0;
                        for (i, b) in bounds.iter().enumerate() {
                            let t = rule.tangent(node.index, i);
                            let dt = node.rho * g[..n].iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
                            ang += b * dt * dt;
                        }
                        [v * v, ws * g2, wr * dr * dr, ang]
                    },
                    &bps,
                    0.0,
                    f64::INFINITY,
                )?;
                let var = var.max(0.0);
                let split = radial + angular;
                let split_ratio = if split > 0.0 { var / split } else { 0.0 };
                Ok(
                    InequalityReport::evaluate(th, &label, wstar.label(), &phi.id, var, full, cfg.tol)
                        .with_extra("radial", radial)
                        .with_extra("angular", angular)
                        .with_extra("split_ratio", split_ratio),
                )
            };
            run().unwrap_or_else(|e| InequalityReport::inconclusive(th, &label, wstar.label(), &phi.id, cfg.tol, &e))
        })
        .collect();
    Ok(sorted(reports))
}

/// Checks that `phi` and its gradient vanish on the closed ball of radius
/// `radius`: the declared support must be contained in `|x| >= radius`, and
/// random probes inside the ball must see exact zeros.
pub fn support_guard(phi: &TestFunction, radius: f64, seed: u64) -> std::result::Result<(), String> {
    match phi.support {
        Support::OutsideBall(r) if r >= radius * (1.0 - 1e-12) => {}
        s => return Err(format!("declared support {s:?} is not outside the ball of radius {radius}")),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    phi.check_support(&mut rng, 64).map_err(|e| e.to_string())?;
    // deterministic probes on a few spheres inside the ball
    let n = phi.dim;
    let mut g = [0.0; MAX_GRID_DIM];
    for frac in [0.0, 0.25, 0.5, 0.9, 1.0] {
        for axis in 0..n {
            for sign in [-1.0, 1.0] {
                let mut x = [0.0; MAX_GRID_DIM];
                x[axis] = sign * frac * radius;
                let v = phi.eval_grad(&x[..n], &mut g[..n]);
                if v != 0.0 || g[..n].iter().any(|&c| c != 0.0) {
                    return Err(format!("nonzero at |x| = {} inside the ball of radius {radius}", frac * radius));
                }
            }
        }
    }
    Ok(())
}

/// `Var[phi] <= 2 E[K(|X|) |grad phi|^2]` for `phi` supported outside `B_R`,
/// where `R` must satisfy condition (b1) for `K`.
///
/// Members violating the support hypothesis are rejected.
pub fn check_refined_outside_ball(
    d: &IsotropicDensity,
    k: &WeightFunction,
    radius: f64,
    corpus: &TestCorpus,
    cfg: &CheckConfig,
) -> Result<Vec<InequalityReport>> {
    let n = d.n();
    if n < 2 || d.is_half_line() {
        return Err(Error::Hypothesis(format!(
            "{}: the outside-ball inequality needs n >= 2",
            d.label()
        )));
    }
    let critical = critical_radius_b1(d, k)?;
    if radius < critical * (1.0 - 1e-9) {
        return Err(Error::Hypothesis(format!(
            "R = {radius} is below the critical radius {critical} of condition (b1)"
        )));
    }
    let grid = grid_for(d, cfg)?;
    let label = d.label();
    let wlabel = format!("2*{}", k.label());
    let th = Theorem::RefinedOutsideBall;
    let reports = corpus
        .members
        .par_iter()
        .enumerate()
        .map(|(i, phi)| {
            if let Err(reason) = support_guard(phi, radius, corpus.seed.wrapping_add(i as u64)) {
                return InequalityReport::rejected(th, &label, &wlabel, &phi.id, cfg.tol, reason);
            }
            let run = || -> Result<InequalityReport> {
                let bps = merged(phi.radial_breakpoints(), &[radius]);
                let [mean] = grid.expect(|node| [phi.eval(node.x)], &bps)?;
                let [var, energy] = grid.expect_with(
                    |rho| if rho > radius { k.eval(rho) } else { 0.0 },
                    |node, &kr| {
                        let mut g = [0.0; MAX_GRID_DIM];
                        let v = phi.eval_grad(node.x, &mut g[..n]) - mean;
                        [v * v, kr * g[..n].iter().map(|c| c * c).sum::<f64>()]
                    },
                    &bps,
                    0.0,
                    f64::INFINITY,
                )?;
                Ok(
                    InequalityReport::evaluate(th, &label, &wlabel, &phi.id, var.max(0.0), 2.0 * energy, cfg.tol)
                        .with_extra("radius", radius)
                        .with_extra("critical_radius", critical),
                )
            };
            run().unwrap_or_else(|e| InequalityReport::inconclusive(th, &label, &wlabel, &phi.id, cfg.tol, &e))
        })
        .collect();
    Ok(sorted(reports))
}

/// `c(R) = R^3 / (R^n f(R))` of the hybrid inequality.
pub fn hybrid_surface_constant(d: &IsotropicDensity, radius: f64) -> f64 {
    let f = d.eval(radius);
    if radius <= 0.0 || !(f > 0.0) {
        return 0.0;
    }
    radius.powi(3) / (radius.powi(d.n() as i32) * f)
}

/// Settings of the hybrid inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridParams {
    pub radius: f64,
    pub c_mult: f64,
    pub c_r: f64,
}

/// `Var[phi] <= C (E[W |grad phi|^2] + c(R) int_{|x|=R} |grad phi|^2 f dsigma)`
/// with `W = max(w, rho^2)` inside `B_R` and `K` outside.
///
/// Each report records `empirical_constant`, the smallest `C` for which the
/// member passes. Unbounded members are rejected.
pub fn check_hybrid(
    d: &IsotropicDensity,
    w_radial: &WeightFunction,
    k: &WeightFunction,
    params: HybridParams,
    corpus: &TestCorpus,
    cfg: &CheckConfig,
) -> Result<Vec<InequalityReport>> {
    let n = d.n();
    if n < 2 || d.is_half_line() {
        return Err(Error::Hypothesis(format!("{}: the hybrid inequality needs n >= 2", d.label())));
    }
    let HybridParams { radius, c_mult, c_r } = params;
    let grid = grid_for(d, cfg)?;
    let weight = hybrid_weight(w_radial, k, radius);
    let label = d.label();
    let wlabel = format!("{c_mult}*({} + {c_r:.6}*surface)", weight.label());
    let th = Theorem::Hybrid;
    let reports = corpus
        .members
        .par_iter()
        .map(|phi| {
            if !phi.bounded {
                return InequalityReport::rejected(
                    th,
                    &label,
                    &wlabel,
                    &phi.id,
                    cfg.tol,
                    "test function is not bounded with bounded gradient".into(),
                );
            }
            let run = || -> Result<InequalityReport> {
                let bps = merged(phi.radial_breakpoints(), weight.breakpoints());
                let [mean] = grid.expect(|node| [phi.eval(node.x)], &bps)?;
                let [var, volume] = grid.expect_with(
                    |rho| weight.eval(rho),
                    |node, &wr| {
                        let mut g = [0.0; MAX_GRID_DIM];
                        let v = phi.eval_grad(node.x, &mut g[..n]) - mean;
                        [v * v, wr * g[..n].iter().map(|c| c * c).sum::<f64>()]
                    },
                    &bps,
                    0.0,
                    f64::INFINITY,
                )?;
                let surface = if radius > 0.0 { grid.surface_dirichlet(phi, radius) } else { 0.0 };
                let var = var.max(0.0);
                let base = volume + c_r * surface;
                let empirical = if base > 0.0 {
                    var / base
                } else if var <= ZERO_VARIANCE {
                    0.0
                } else {
                    f64::INFINITY
                };
                Ok(
                    InequalityReport::evaluate(th, &label, &wlabel, &phi.id, var, c_mult * base, cfg.tol)
                        .with_extra("volume", volume)
                        .with_extra("surface", surface)
                        .with_extra("radius", radius)
                        .with_extra("c_r", c_r)
                        .with_extra("c_mult", c_mult)
                        .with_extra("empirical_constant", empirical),
                )
            };
            run().unwrap_or_else(|e| InequalityReport::inconclusive(th, &label, &wlabel, &phi.id, cfg.tol, &e))
        })
        .collect();
    Ok(sorted(reports))
}

/// Eigen-decomposition of a covariance: `V = Q diag(lambda) Q^T`.
#[derive(Clone, Debug)]
pub struct Covariance {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Covariance {
    /// Validates symmetry and positive definiteness.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::InvalidParameter("covariance must be a nonempty square matrix".into()));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 1e-12 * matrix.abs().max() {
            return Err(Error::InvalidParameter(format!("covariance is not symmetric (defect {asym:e})")));
        }
        let eig = SymmetricEigen::new(matrix.clone());
        if let Some(l) = eig.eigenvalues.iter().find(|&&l| !(l > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "covariance is not positive definite (eigenvalue {l})"
            )));
        }
        Ok(Self {
            matrix,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.max()
    }

    /// `H = Q diag(sqrt(lambda))`, so that `x = u + H z` with `z` standard.
    pub fn root(&self) -> DMatrix<f64> {
        let s = DMatrix::from_diagonal(&self.eigenvalues.map(f64::sqrt));
        &self.eigenvectors * s
    }
}

/// `Var[phi] <= lambda_max E[|grad phi|^2]` under `N(u, V)`, integrated in
/// whitened coordinates `x = u + H z`.
pub fn check_gaussian_anisotropic(
    v: &DMatrix<f64>,
    u: &[f64],
    corpus: &TestCorpus,
    cfg: &CheckConfig,
) -> Result<Vec<InequalityReport>> {
    let cov = Covariance::new(v.clone())?;
    let n = cov.dim();
    if u.len() != n || corpus.dim() != n || n > MAX_GRID_DIM {
        return Err(Error::InvalidParameter(format!(
            "dimension mismatch: covariance {n}, mean {}, corpus {} (max {MAX_GRID_DIM})",
            u.len(),
            corpus.dim()
        )));
    }
    let h = cov.root();
    let lmax = cov.max_eigenvalue();
    let nodes = cfg.product_nodes.unwrap_or_else(|| ProductRule::default_nodes(n));
    let normal = Rule1d::for_density(&Density1d::standard_normal(), nodes)?;
    let rule = ProductRule::new(vec![normal; n])?;
    let map = |z: &[f64], x: &mut [f64]| {
        for i in 0..n {
            x[i] = u[i] + (0..n).map(|j| h[(i, j)] * z[j]).sum::<f64>();
        }
    };
    let label = format!("normal(u={u:?},V={:?})", cov.matrix.as_slice());
    let wlabel = format!("{lmax}");
    let th = Theorem::GaussianAnisotropic;
    let reports = corpus
        .members
        .par_iter()
        .map(|phi| {
            let mut x = [0.0; MAX_GRID_DIM];
            let [mean] = rule.sum(|z, _| {
                map(z, &mut x[..n]);
                [phi.eval(&x[..n])]
            });
            let mut g = [0.0; MAX_GRID_DIM];
            let [var, energy] = rule.sum(|z, _| {
                map(z, &mut x[..n]);
                let v = phi.eval_grad(&x[..n], &mut g[..n]) - mean;
                [v * v, g[..n].iter().map(|c| c * c).sum::<f64>()]
            });
            InequalityReport::evaluate(th, &label, &wlabel, &phi.id, var.max(0.0), lmax * energy, cfg.tol)
                .with_extra("lambda_max", lmax)
        })
        .collect();
    Ok(sorted(reports))
}
