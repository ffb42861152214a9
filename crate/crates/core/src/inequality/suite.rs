//! The density-by-theorem check matrix: which weight and corpus each pair
//! uses, and why inapplicable pairs are skipped.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_gaussian_anisotropic, check_hybrid, check_isotropic_wstar, check_poincare_1d, check_product,
    check_refined_outside_ball, hybrid_surface_constant, CheckConfig, HybridParams, InequalityReport, TestCorpus,
    Theorem,
};
use crate::densities::{Density1d, DensityKind, IsotropicDensity};
use crate::error::{Error, Result};
use crate::weights::{
    angular_weight_fn, closed_form_weight, critical_radius_b1, optimal_barenblatt_weight, optimal_cauchy_weight,
    p_weight, radial_weight, WeightFunction,
};

/// Default multiplier of the hybrid inequality.
pub const DEFAULT_HYBRID_C: f64 = 4.0;

/// Catalog entries of the default check matrix.
pub const DEFAULT_DENSITIES: [&str; 13] = [
    "gaussian:sigma=1,n=1",
    "gaussian:sigma=1,n=2",
    "gaussian:sigma=1,n=3",
    "cauchy:beta=4,n=1",
    "cauchy:beta=3,n=2",
    "cauchy:beta=4,n=3",
    "exponential:beta=1,n=2",
    "exponential:beta=1,n=3",
    "exponential:beta=2,n=2",
    "barenblatt:a=1,p=2,n=1",
    "barenblatt:a=1,p=2,n=2",
    "barenblatt:a=1,p=3,n=3",
    "inverse_gamma:mu=2",
];

/// Reports of one (target, theorem) pair, or the reason it was skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Reports { reports: Vec<InequalityReport> },
    Skipped { reason: String },
    Error { message: String },
}

/// One cell of the check matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub theorem: Theorem,
    pub target: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl MatrixCell {
    pub fn reports(&self) -> &[InequalityReport] {
        match &self.outcome {
            Outcome::Reports { reports } => reports,
            _ => &[],
        }
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self.outcome, Outcome::Skipped { .. })
    }

    /// Not skipped, and every report passes.
    pub fn passed(&self) -> bool {
        match &self.outcome {
            Outcome::Reports { reports } => reports.iter().all(|r| r.pass),
            Outcome::Skipped { .. } => true,
            Outcome::Error { .. } => false,
        }
    }
}

fn cell(theorem: Theorem, target: impl Into<String>, r: Result<Vec<InequalityReport>>) -> MatrixCell {
    let outcome = match r {
        Ok(reports) => Outcome::Reports { reports },
        Err(Error::Hypothesis(reason)) | Err(Error::Unsatisfiable(reason)) => Outcome::Skipped { reason },
        Err(e) => Outcome::Error { message: e.to_string() },
    };
    MatrixCell {
        theorem,
        target: target.into(),
        outcome,
    }
}

/// Largest polynomial degree `k <= 3` with finite `E|X|^{2k}`.
pub fn polynomial_degree(finite_moment: impl Fn(f64) -> bool) -> u32 {
    (0..=3).rev().find(|&k| finite_moment(2.0 * k as f64)).unwrap_or(0)
}

/// Standard corpus on the line, centered at the mean of `f` and scaled by
/// its standard deviation (or its natural scale when that is infinite).
pub fn corpus_1d(f: &Density1d, seed: u64) -> TestCorpus {
    let deg = polynomial_degree(|k| f.finite_moment(k));
    let s = f.std_dev().unwrap_or_else(|| f.scale());
    TestCorpus::standard(1, deg, seed).recentered(&[f.mean()], &[s])
}

/// Standard corpus for an isotropic law, in units of its scale.
pub fn corpus_isotropic(d: &IsotropicDensity, seed: u64) -> TestCorpus {
    let deg = polynomial_degree(|k| d.finite_moment(k));
    TestCorpus::standard(d.n(), deg, seed).scaled(d.scale())
}

/// The one-dimensional law and weight checked for a catalog entry: the
/// density itself for `n = 1` and the half-line entry, else its radial
/// marginal with [`radial_weight`].
pub fn one_dim_problem(d: &IsotropicDensity) -> Result<(Density1d, WeightFunction)> {
    if d.n() >= 2 {
        return Ok((Density1d::radial_marginal(d)?, radial_weight(d)?));
    }
    let f = Density1d::from_isotropic(d)?;
    let w = match d.kind() {
        DensityKind::Gaussian { sigma } => WeightFunction::constant(sigma),
        DensityKind::CauchyType { beta } => optimal_cauchy_weight(beta, 1)?,
        DensityKind::Barenblatt { a, p } => optimal_barenblatt_weight(p, 1, a)?,
        DensityKind::ExponentialType { .. } | DensityKind::InverseGamma1d { .. } => p_weight(&f),
    };
    Ok((f, w))
}

/// Factor laws and weights of the spherical factorization
/// `f(rho) f_1(theta_1) ... f_{n-1}(theta_{n-1})`.
pub fn spherical_factors(d: &IsotropicDensity) -> Result<(Vec<Density1d>, Vec<WeightFunction>)> {
    let n = d.n();
    if n < 2 || d.is_half_line() {
        return Err(Error::Hypothesis(format!("{}: spherical factorization needs n >= 2", d.label())));
    }
    let mut f = vec![Density1d::radial_marginal(d)?];
    let mut w = vec![radial_weight(d)?];
    for i in 1..n {
        f.push(if i == n - 1 {
            Density1d::uniform(0.0, 2.0 * PI)
        } else {
            Density1d::sine_power((n - 1 - i) as u32)
        });
        w.push(angular_weight_fn(i, n)?);
    }
    Ok((f, w))
}

fn product_corpus(factors: &[Density1d], seed: u64) -> TestCorpus {
    let deg = factors
        .iter()
        .map(|f| polynomial_degree(|k| f.finite_moment(k)))
        .min()
        .unwrap_or(0);
    let center: Vec<f64> = factors.iter().map(|f| f.mean()).collect();
    let scales: Vec<f64> = factors.iter().map(|f| f.std_dev().unwrap_or_else(|| f.scale())).collect();
    TestCorpus::standard(factors.len(), deg, seed).recentered(&center, &scales)
}

/// Diffusion weight `K` and critical radius of condition (b1).
pub fn refined_setup(d: &IsotropicDensity) -> Result<(WeightFunction, f64)> {
    if d.n() < 2 || d.is_half_line() {
        return Err(Error::Hypothesis(format!(
            "{}: condition (b1) is vacuous for n = 1 and the outside-ball inequality needs n >= 2",
            d.label()
        )));
    }
    let k = closed_form_weight(d)
        .ok_or_else(|| Error::Hypothesis(format!("{}: no finite diffusion weight", d.label())))?;
    let r = critical_radius_b1(d, &k)?;
    Ok((k, r))
}

fn wstar(d: &IsotropicDensity, seed: u64, cfg: &CheckConfig) -> Result<Vec<InequalityReport>> {
    if d.n() < 2 || d.is_half_line() {
        return Err(Error::Hypothesis(format!(
            "{}: the angular variable of n = 1 is a sign, which has no Poincare inequality",
            d.label()
        )));
    }
    check_isotropic_wstar(d, &radial_weight(d)?, &corpus_isotropic(d, seed), cfg)
}

fn refined(d: &IsotropicDensity, seed: u64, cfg: &CheckConfig) -> Result<Vec<InequalityReport>> {
    let (k, r) = refined_setup(d)?;
    let deg = polynomial_degree(|m| d.finite_moment(m));
    let corpus = TestCorpus::outside_ball(d.n(), r, d.support_radius(), d.scale(), deg, seed);
    check_refined_outside_ball(d, &k, r, &corpus, cfg)
}

fn hybrid(d: &IsotropicDensity, seed: u64, cfg: &CheckConfig, c_mult: f64) -> Result<Vec<InequalityReport>> {
    let (k, r) = refined_setup(d)?;
    let params = HybridParams {
        radius: r,
        c_mult,
        c_r: hybrid_surface_constant(d, r),
    };
    let corpus = TestCorpus::hybrid(d.n(), r, d.scale(), seed);
    check_hybrid(d, &radial_weight(d)?, &k, params, &corpus, cfg)
}

/// Runs one theorem against one catalog density.
pub fn check_density(theorem: Theorem, d: &IsotropicDensity, seed: u64, cfg: &CheckConfig, c_mult: f64) -> MatrixCell {
    let r = match theorem {
        Theorem::Poincare1d => one_dim_problem(d).map(|(f, w)| check_poincare_1d(&f, &w, &corpus_1d(&f, seed), cfg)),
        Theorem::Product => spherical_factors(d).and_then(|(f, w)| check_product(&f, &w, &product_corpus(&f, seed), cfg)),
        Theorem::IsotropicWstar => wstar(d, seed, cfg),
        Theorem::RefinedOutsideBall => refined(d, seed, cfg),
        Theorem::Hybrid => hybrid(d, seed, cfg, c_mult),
        Theorem::GaussianAnisotropic => match d.kind() {
            DensityKind::Gaussian { sigma } => {
                let n = d.n();
                let v = DMatrix::identity(n, n) * sigma;
                let c = TestCorpus::standard(n, 3, seed).scaled(sigma.sqrt());
                check_gaussian_anisotropic(&v, &vec![0.0; n], &c, cfg)
            }
            _ => Err(Error::Hypothesis(format!("{}: not a Gaussian law", d.label()))),
        },
    };
    cell(theorem, d.label(), r)
}

/// Rotation of `diag(1, 4)` by 30 degrees.
pub fn rotated_covariance() -> DMatrix<f64> {
    let (s, c) = (PI / 6.0).sin_cos();
    let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0])) * q.transpose()
}

/// A seeded symmetric positive definite `n x n` matrix.
pub fn random_covariance(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

/// Checks that are not tied to a catalog entry: angular laws, a product of
/// normals, and anisotropic covariances.
pub fn extra_cells(theorem: Theorem, seed: u64, cfg: &CheckConfig) -> Vec<MatrixCell> {
    match theorem {
        Theorem::Poincare1d => {
            let mut out = Vec::new();
            let normal = Density1d::standard_normal();
            out.push(cell(
                theorem,
                "normal(0,1)",
                Ok(check_poincare_1d(&normal, &WeightFunction::constant(1.0), &corpus_1d(&normal, seed), cfg)),
            ));
            let uni = Density1d::uniform(0.0, 2.0 * PI);
            out.push(cell(
                theorem,
                "uniform(0,2pi)",
                angular_weight_fn(1, 2).map(|w| check_poincare_1d(&uni, &w, &corpus_1d(&uni, seed), cfg)),
            ));
            for n in [3usize, 4] {
                let f = Density1d::sine_power((n - 2) as u32);
                out.push(cell(
                    theorem,
                    f.label().to_string(),
                    angular_weight_fn(1, n).map(|w| check_poincare_1d(&f, &w, &corpus_1d(&f, seed), cfg)),
                ));
            }
            out
        }
        Theorem::Product => {
            let n = Density1d::standard_normal();
            let f = [n.clone(), n];
            let w = [WeightFunction::constant(1.0), WeightFunction::constant(1.0)];
            vec![cell(theorem, "normal(0,1) x normal(0,1)", check_product(&f, &w, &product_corpus(&f, seed), cfg))]
        }
        Theorem::GaussianAnisotropic => {
            let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
            let cases = [
                ("normal(V=diag(1,4))", diag, vec![0.0, 0.0]),
                ("normal(V=rot30 diag(1,4),u=(1,-0.5))", rotated_covariance(), vec![1.0, -0.5]),
                ("normal(V=random 3x3)", random_covariance(3, seed), vec![0.2, 0.0, -0.3]),
            ];
            cases
                .into_iter()
                .map(|(label, v, u)| {
                    let n = v.nrows();
                    let lmax = v.clone().symmetric_eigenvalues().max();
                    let c = TestCorpus::standard(n, 3, seed).recentered(&u, &vec![lmax.sqrt(); n]);
                    cell(theorem, label, check_gaussian_anisotropic(&v, &u, &c, cfg))
                })
                .collect()
        }
        _ => Vec::new(),
    }
}

/// The full matrix for the given theorems and densities, in a fixed order.
pub fn run_matrix(
    theorems: &[Theorem],
    densities: &[IsotropicDensity],
    seed: u64,
    cfg: &CheckConfig,
    c_mult: f64,
    include_extras: bool,
) -> Vec<MatrixCell> {
    let mut out = Vec::new();
    for &t in theorems {
        for d in densities {
            out.push(check_density(t, d, seed, cfg, c_mult));
        }
        if include_extras {
            out.extend(extra_cells(t, seed, cfg));
        }
    }
    out
}

/// Parses [`DEFAULT_DENSITIES`].
pub fn default_densities() -> Vec<IsotropicDensity> {
    DEFAULT_DENSITIES
        .iter()
        .map(|s| IsotropicDensity::from_spec(s).expect("default catalog entries are valid"))
        .collect()
}
