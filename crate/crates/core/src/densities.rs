//! Catalog of isotropic probability densities and their radial marginals.
//!
//! Every density is a radial profile `f(rho)` on `[0, i+)` such that
//! `f(|x|)` integrates to one over its support in `R^n`. The one exception is
//! the inverse-Gamma wealth equilibrium, which lives on the half-line
//! `(0, inf)` with `n = 1` and unit surface factor.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::Integrator;

/// Kind and parameters of a catalog density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    /// `(2 pi sigma)^{-n/2} exp(-rho^2 / (2 sigma))`; `sigma` is the variance.
    Gaussian { sigma: f64 },
    /// `C (1 + rho^2)^{-beta}`, integrable for `beta > n/2`.
    CauchyType { beta: f64 },
    /// `C exp(-beta rho)`.
    ExponentialType { beta: f64 },
    /// `C (a^2 - rho^2)^{1/(p-1)}` on the ball of radius `a`.
    Barenblatt { a: f64, p: f64 },
    /// `mu^{1+mu} / Gamma(1+mu) exp(-mu/x) x^{-2-mu}` on `(0, inf)`.
    InverseGamma1d { mu: f64 },
}

impl DensityKind {
    pub fn name(&self) -> &'static str {
        match self {
            DensityKind::Gaussian { .. } => "gaussian",
            DensityKind::CauchyType { .. } => "cauchy",
            DensityKind::ExponentialType { .. } => "exponential",
            DensityKind::Barenblatt { .. } => "barenblatt",
            DensityKind::InverseGamma1d { .. } => "inverse_gamma",
        }
    }
}

/// Surface measure of the unit sphere in `R^n`, `2 pi^{n/2} / Gamma(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// A normalized isotropic density. Immutable and `Copy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropicDensity {
    kind: DensityKind,
    n: usize,
    support_radius: f64,
    norm_const: f64,
}

impl IsotropicDensity {
    /// Validates parameters and computes the normalization constant.
    ///
    /// Gaussian, exponential and inverse-Gamma constants are closed form;
    /// Cauchy-type and Barenblatt constants come from adaptive quadrature.
    pub fn new(kind: DensityKind, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("dimension n must be at least 1".into()));
        }
        let nf = n as f64;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let (support_radius, norm_const) = match kind {
            DensityKind::Gaussian { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("gaussian requires sigma > 0, got {sigma}"));
                }
                (f64::INFINITY, (2.0 * PI * sigma).powf(-nf / 2.0))
            }
            DensityKind::CauchyType { beta } => {
                if !(beta > nf / 2.0 && beta.is_finite()) {
                    return bad(format!(
                        "cauchy-type requires beta > n/2 = {} for integrability, got {beta}",
                        nf / 2.0
                    ));
                }
                (f64::INFINITY, f64::NAN)
            }
            DensityKind::ExponentialType { beta } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad(format!("exponential-type requires beta > 0, got {beta}"));
                }
                let c = beta.powf(nf) * gamma(nf / 2.0) / (2.0 * PI.powf(nf / 2.0) * gamma(nf));
                (f64::INFINITY, c)
            }
            DensityKind::Barenblatt { a, p } => {
                if !(a > 0.0 && a.is_finite()) {
                    return bad(format!("barenblatt requires a > 0, got {a}"));
                }
                if !(p > 1.0 && p.is_finite()) {
                    return bad(format!("barenblatt requires p > 1, got {p}"));
                }
                (a, f64::NAN)
            }
            DensityKind::InverseGamma1d { mu } => {
                if !(mu > 0.0 && mu.is_finite()) {
                    return bad(format!("inverse gamma requires mu > 0, got {mu}"));
                }
                if n != 1 {
                    return bad("inverse gamma density is one-dimensional (n = 1)".into());
                }
                let c = ((1.0 + mu) * mu.ln() - ln_gamma(1.0 + mu)).exp();
                (f64::INFINITY, c)
            }
        };
        let mut d = Self {
            kind,
            n,
            support_radius,
            norm_const,
        };
        if norm_const.is_nan() {
            d.norm_const = 1.0;
            let mass = d.raw_mass()?;
            d.norm_const = 1.0 / mass;
        }
        Ok(d)
    }

    /// Alias of [`IsotropicDensity::new`] matching the catalog constructor name.
    pub fn make(kind: DensityKind, n: usize) -> Result<Self> {
        Self::new(kind, n)
    }

    pub fn gaussian(sigma: f64, n: usize) -> Result<Self> {
        Self::new(DensityKind::Gaussian { sigma }, n)
    }

    pub fn cauchy(beta: f64, n: usize) -> Result<Self> {
        Self::new(DensityKind::CauchyType { beta }, n)
    }

    pub fn exponential(beta: f64, n: usize) -> Result<Self> {
        Self::new(DensityKind::ExponentialType { beta }, n)
    }

    pub fn barenblatt(a: f64, p: f64, n: usize) -> Result<Self> {
        Self::new(DensityKind::Barenblatt { a, p }, n)
    }

    pub fn inverse_gamma(mu: f64) -> Result<Self> {
        Self::new(DensityKind::InverseGamma1d { mu }, 1)
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// `i+`: `a` for Barenblatt, infinity otherwise.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn is_compact(&self) -> bool {
        self.support_radius.is_finite()
    }

    /// True for the inverse-Gamma entry, which lives on `(0, inf)` only.
    pub fn is_half_line(&self) -> bool {
        matches!(self.kind, DensityKind::InverseGamma1d { .. })
    }

    /// Factor turning `rho^{n-1} f(rho)` into the law of `|X|`: `sigma_n`, or
    /// 1 for the half-line entry.
    pub fn surface_factor(&self) -> f64 {
        if self.is_half_line() {
            1.0
        } else {
            unit_sphere_area(self.n)
        }
    }

    /// Characteristic length used for semi-infinite mappings and default grids.
    pub fn scale(&self) -> f64 {
        match self.kind {
            DensityKind::Gaussian { sigma } => sigma.sqrt(),
            DensityKind::CauchyType { .. } => 1.0,
            DensityKind::ExponentialType { beta } => 1.0 / beta,
            DensityKind::Barenblatt { a, .. } => a,
            DensityKind::InverseGamma1d { .. } => 1.0,
        }
    }

    /// Whether `E|X|^k` is finite.
    pub fn finite_moment(&self, k: f64) -> bool {
        match self.kind {
            DensityKind::CauchyType { beta } => k < 2.0 * beta - self.n as f64,
            DensityKind::InverseGamma1d { mu } => k < 1.0 + mu,
            _ => true,
        }
    }

    /// Unnormalized profile; zero off the support.
    fn profile(&self, rho: f64) -> f64 {
        self.ln_profile(rho).exp()
    }

    fn ln_profile(&self, rho: f64) -> f64 {
        if rho < 0.0 || rho.is_nan() {
            return f64::NEG_INFINITY;
        }
        match self.kind {
            DensityKind::Gaussian { sigma } => -rho * rho / (2.0 * sigma),
            DensityKind::CauchyType { beta } => -beta * (rho * rho).ln_1p(),
            DensityKind::ExponentialType { beta } => -beta * rho,
            DensityKind::Barenblatt { a, p } => {
                if rho >= a {
                    f64::NEG_INFINITY
                } else {
                    ((a - rho) * (a + rho)).ln() / (p - 1.0)
                }
            }
            DensityKind::InverseGamma1d { mu } => {
                if rho <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -mu / rho - (2.0 + mu) * rho.ln()
                }
            }
        }
    }

    /// `f(rho)` including the normalization constant; 0 outside the support.
    pub fn eval(&self, rho: f64) -> f64 {
        if rho < 0.0 || rho >= self.support_radius && self.is_compact() {
            return 0.0;
        }
        self.norm_const * self.profile(rho)
    }

    /// `ln f(rho)`; `-inf` outside the support.
    pub fn ln_eval(&self, rho: f64) -> f64 {
        self.norm_const.ln() + self.ln_profile(rho)
    }

    /// Law of `|X|`: `sigma_n rho^{n-1} f(rho)`.
    pub fn radial_pdf(&self, rho: f64) -> f64 {
        if rho <= 0.0 && self.n > 1 {
            return 0.0;
        }
        self.surface_factor() * rho.powi(self.n as i32 - 1) * self.eval(rho)
    }

    pub fn ln_radial_pdf(&self, rho: f64) -> f64 {
        self.surface_factor().ln() + (self.n as f64 - 1.0) * rho.ln() + self.ln_eval(rho)
    }

    /// Integrator suited to radial integrals against this density.
    pub fn radial_integrator(&self, base: &Integrator) -> Integrator {
        let mut i = *base;
        if self.is_compact() {
            i.upper = crate::quadrature::EndpointPolicy::Open;
        }
        i
    }

    fn raw_mass(&self) -> Result<f64> {
        let integ = self.radial_integrator(&Integrator::default());
        let e = integ.integrate_vec_mapped(
            |r| [self.radial_pdf(r)],
            0.0,
            self.support_radius,
            &[],
            self.scale(),
        )?;
        if !e.converged {
            return Err(Error::QuadratureNotConverged {
                subdivisions: e.subdivisions,
                estimate: e.value[0],
                error: e.error[0],
            });
        }
        Ok(e.value[0])
    }

    /// Total mass over the support, by quadrature. Should be one.
    pub fn mass(&self) -> Result<f64> {
        self.raw_mass()
    }

    pub fn radial_marginal(&self) -> RadialMarginal {
        RadialMarginal {
            base: *self,
            sigma_n: self.surface_factor(),
        }
    }

    /// Catalog label in CLI syntax, e.g. `cauchy:beta=3,n=2`.
    pub fn label(&self) -> String {
        let params = match self.kind {
            DensityKind::Gaussian { sigma } => format!("sigma={sigma}"),
            DensityKind::CauchyType { beta } => format!("beta={beta}"),
            DensityKind::ExponentialType { beta } => format!("beta={beta}"),
            DensityKind::Barenblatt { a, p } => format!("a={a},p={p}"),
            DensityKind::InverseGamma1d { mu } => format!("mu={mu}"),
        };
        format!("{}:{},n={}", self.kind.name(), params, self.n)
    }

    /// Parses `kind:key=value,...`. Missing parameters take catalog defaults
    /// (`sigma = 1`, `beta = 3`, `a = 1`, `p = 2`, `mu = 2`, `n = 1`).
    pub fn from_spec(spec: &str) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut n = 1usize;
        let mut vals = std::collections::BTreeMap::new();
        for part in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in '{part}'")))?;
            let k = k.trim();
            if k == "n" {
                n = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad dimension '{v}'")))?;
            } else {
                let x: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad value '{v}' for '{k}'")))?;
                vals.insert(k.to_string(), x);
            }
        }
        let take = |vals: &mut std::collections::BTreeMap<String, f64>, key: &str, default: f64| {
            vals.remove(key).unwrap_or(default)
        };
        let kind = match name.trim() {
            "gaussian" | "normal" => DensityKind::Gaussian {
                sigma: take(&mut vals, "sigma", 1.0),
            },
            "cauchy" | "cauchy_type" => DensityKind::CauchyType {
                beta: take(&mut vals, "beta", 3.0),
            },
            "exponential" | "exponential_type" | "exp" => DensityKind::ExponentialType {
                beta: take(&mut vals, "beta", 1.0),
            },
            "barenblatt" => DensityKind::Barenblatt {
                a: take(&mut vals, "a", 1.0),
                p: take(&mut vals, "p", 2.0),
            },
            "inverse_gamma" | "inverse_gamma_1d" => DensityKind::InverseGamma1d {
                mu: take(&mut vals, "mu", 2.0),
            },
            other => return Err(Error::Parse(format!("unknown density kind '{other}'"))),
        };
        if let Some(k) = vals.keys().next() {
            return Err(Error::Parse(format!("unknown parameter '{k}' for {name}")));
        }
        Self::new(kind, n)
    }

    /// Closed-form diffusion weight `K`, if the catalog has one.
    pub fn closed_form_weight(&self) -> Option<crate::weights::WeightFunction> {
        crate::weights::closed_form_weight(self)
    }
}

impl fmt::Display for IsotropicDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The one-dimensional law of `|X|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialMarginal {
    pub base: IsotropicDensity,
    pub sigma_n: f64,
}

impl RadialMarginal {
    pub fn eval(&self, rho: f64) -> f64 {
        self.base.radial_pdf(rho)
    }

    pub fn support(&self) -> (f64, f64) {
        (0.0, self.base.support_radius())
    }

    pub fn mass(&self) -> Result<f64> {
        self.base.mass()
    }

    pub fn to_density1d(&self) -> Result<Density1d> {
        Density1d::radial_marginal(&self.base)
    }
}

type Pdf = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A probability density on an interval `(lo, hi)` of the real line.
#[derive(Clone)]
pub struct Density1d {
    label: String,
    lo: f64,
    hi: f64,
    ln_pdf: Pdf,
    mean: f64,
    scale: f64,
    /// `q` with `pdf(x) ~ |x|^{-q}` at an infinite end; `None` for light tails.
    tail_exponent: Option<f64>,
    open_lower: bool,
    open_upper: bool,
}

impl fmt::Debug for Density1d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density1d")
            .field("label", &self.label)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("mean", &self.mean)
            .finish()
    }
}

impl Density1d {
    /// Builds a density from its log-pdf. The mean is computed by quadrature.
    pub fn from_ln_pdf(
        label: impl Into<String>,
        lo: f64,
        hi: f64,
        scale: f64,
        ln_pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!("empty interval ({lo}, {hi})")));
        }
        let mut d = Self {
            label: label.into(),
            lo,
            hi,
            ln_pdf: Arc::new(ln_pdf),
            mean: f64::NAN,
            scale,
            tail_exponent: None,
            open_lower: false,
            open_upper: false,
        };
        d.mean = d.compute_mean()?;
        Ok(d)
    }

    pub fn with_tail_exponent(mut self, q: f64) -> Self {
        self.tail_exponent = Some(q);
        self
    }

    pub fn with_open_ends(mut self, lower: bool, upper: bool) -> Self {
        self.open_lower = lower;
        self.open_upper = upper;
        self.mean = self.compute_mean().unwrap_or(self.mean);
        self
    }

    fn compute_mean(&self) -> Result<f64> {
        let e = self.integrator(&Integrator::default()).integrate_vec_mapped(
            |x| {
                let p = self.pdf(x);
                [p, x * p]
            },
            self.lo,
            self.hi,
            &[],
            self.scale,
        )?;
        Ok(e.value[1] / e.value[0])
    }

    pub fn standard_normal() -> Self {
        Self::normal(0.0, 1.0)
    }

    pub fn normal(mean: f64, variance: f64) -> Self {
        let c = -0.5 * (2.0 * PI * variance).ln();
        Self {
            label: format!("normal:mean={mean},var={variance}"),
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            ln_pdf: Arc::new(move |x| c - (x - mean) * (x - mean) / (2.0 * variance)),
            mean,
            scale: variance.sqrt(),
            tail_exponent: None,
            open_lower: false,
            open_upper: false,
        }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        let c = -(hi - lo).ln();
        Self {
            label: format!("uniform:{lo},{hi}"),
            lo,
            hi,
            ln_pdf: Arc::new(move |x| if x > lo && x < hi { c } else { f64::NEG_INFINITY }),
            mean: 0.5 * (lo + hi),
            scale: hi - lo,
            tail_exponent: None,
            open_lower: false,
            open_upper: false,
        }
    }

    /// `sin^k(theta) / int_0^pi sin^k` on `(0, pi)`; the polar-angle factor
    /// of the hyperspherical volume element.
    pub fn sine_power(k: u32) -> Self {
        let norm = sine_power_integral(k);
        let c = -norm.ln();
        Self {
            label: format!("sine_power:k={k}"),
            lo: 0.0,
            hi: PI,
            ln_pdf: Arc::new(move |t: f64| {
                if t <= 0.0 || t >= PI {
                    f64::NEG_INFINITY
                } else {
                    c + k as f64 * t.sin().ln()
                }
            }),
            mean: PI / 2.0,
            scale: PI,
            tail_exponent: None,
            open_lower: false,
            open_upper: false,
        }
    }

    /// Gamma density with shape `k` and rate `rate` on `(0, inf)`.
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) {
            return Err(Error::InvalidParameter("gamma requires shape > 0, rate > 0".into()));
        }
        let c = shape * rate.ln() - ln_gamma(shape);
        Ok(Self {
            label: format!("gamma:shape={shape},rate={rate}"),
            lo: 0.0,
            hi: f64::INFINITY,
            ln_pdf: Arc::new(move |x: f64| {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    c + (shape - 1.0) * x.ln() - rate * x
                }
            }),
            mean: shape / rate,
            scale: 1.0 / rate,
            tail_exponent: None,
            open_lower: shape < 1.0,
            open_upper: false,
        })
    }

    /// Law of `|X|` for an isotropic density (the density itself for the
    /// half-line entry).
    pub fn radial_marginal(d: &IsotropicDensity) -> Result<Self> {
        let d = *d;
        let hi = d.support_radius();
        let tail = match d.kind() {
            DensityKind::CauchyType { beta } => Some(2.0 * beta - d.n() as f64 + 1.0),
            DensityKind::InverseGamma1d { mu } => Some(2.0 + mu),
            _ => None,
        };
        let label = format!("radial({})", d.label());
        let mut out = Self {
            label,
            lo: 0.0,
            hi,
            ln_pdf: Arc::new(move |r| if r <= 0.0 { f64::NEG_INFINITY } else { d.ln_radial_pdf(r) }),
            mean: f64::NAN,
            scale: d.scale(),
            tail_exponent: tail,
            open_lower: false,
            open_upper: d.is_compact(),
        };
        out.mean = out.compute_mean()?;
        Ok(out)
    }

    /// A one-dimensional catalog density on its natural support: the whole
    /// line for `n = 1` entries, `(0, inf)` for the inverse-Gamma entry.
    pub fn from_isotropic(d: &IsotropicDensity) -> Result<Self> {
        if d.n() != 1 {
            return Err(Error::InvalidParameter(format!(
                "{} is not one-dimensional",
                d.label()
            )));
        }
        let d = *d;
        let top = d.support_radius();
        let half = d.is_half_line();
        let lo = if half { 0.0 } else { -top };
        let tail = match d.kind() {
            DensityKind::CauchyType { beta } => Some(2.0 * beta),
            DensityKind::InverseGamma1d { mu } => Some(2.0 + mu),
            _ => None,
        };
        let mut out = Self {
            label: d.label(),
            lo,
            hi: top,
            ln_pdf: Arc::new(move |x: f64| if half { d.ln_eval(x) } else { d.ln_eval(x.abs()) }),
            mean: f64::NAN,
            scale: d.scale(),
            tail_exponent: tail,
            open_lower: d.is_compact(),
            open_upper: d.is_compact(),
        };
        out.mean = if half { out.compute_mean()? } else { 0.0 };
        Ok(out)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(x >= self.lo && x <= self.hi) {
            return 0.0;
        }
        (self.ln_pdf)(x).exp()
    }

    /// Standard deviation, or `None` when the second moment is infinite.
    pub fn std_dev(&self) -> Option<f64> {
        if !self.finite_moment(2.0) {
            return None;
        }
        let m = self.mean;
        let [v] = self.expect(|x| [(x - m) * (x - m)], &Integrator::default(), &[m]).ok()?;
        Some(v.sqrt())
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.ln_pdf)(x)
    }

    /// Whether `E|X|^k` is finite.
    pub fn finite_moment(&self, k: f64) -> bool {
        match self.tail_exponent {
            Some(q) => q - k > 1.0,
            None => true,
        }
    }

    pub fn integrator(&self, base: &Integrator) -> Integrator {
        let mut i = *base;
        if self.open_lower {
            i.lower = crate::quadrature::EndpointPolicy::Open;
        }
        if self.open_upper {
            i.upper = crate::quadrature::EndpointPolicy::Open;
        }
        i
    }

    /// `E[g(X)]` componentwise.
    pub fn expect<const K: usize>(
        &self,
        g: impl Fn(f64) -> [f64; K],
        integ: &Integrator,
        breakpoints: &[f64],
    ) -> Result<[f64; K]> {
        self.expect_within(g, integ, breakpoints, 0.0)
    }

    /// As [`Density1d::expect`], but a result whose subdivision budget ran
    /// out is still accepted when its error estimate is below `accept_rel`
    /// times the largest component.
    pub fn expect_within<const K: usize>(
        &self,
        g: impl Fn(f64) -> [f64; K],
        integ: &Integrator,
        breakpoints: &[f64],
        accept_rel: f64,
    ) -> Result<[f64; K]> {
        let e = self.integrator(integ).integrate_vec_mapped(
            |x| {
                let p = self.pdf(x);
                if p == 0.0 {
                    return [0.0; K];
                }
                let mut v = g(x);
                for c in v.iter_mut() {
                    *c *= p;
                }
                v
            },
            self.lo,
            self.hi,
            breakpoints,
            self.scale,
        )?;
        let k = (0..K)
            .max_by(|&i, &j| e.error[i].partial_cmp(&e.error[j]).unwrap())
            .unwrap_or(0);
        let size = e.value.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !e.converged && e.error[k] > accept_rel * size {
            return Err(Error::QuadratureNotConverged {
                subdivisions: e.subdivisions,
                estimate: e.value[k],
                error: e.error[k],
            });
        }
        Ok(e.value)
    }
}

/// `int_0^pi sin^k`.
pub fn sine_power_integral(k: u32) -> f64 {
    PI.sqrt() * gamma((k as f64 + 1.0) / 2.0) / gamma(k as f64 / 2.0 + 1.0)
}
