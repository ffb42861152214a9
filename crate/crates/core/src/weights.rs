//! Poincare weights: the diffusion coefficient `K` of an equilibrium, the
//! one-dimensional `P` formula, the `w = P/Q'` family with its optimal
//! parameter, angular weights and the composite weights `W*` and `W`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::densities::{Density1d, DensityKind, IsotropicDensity};
use crate::error::{Error, Result};
use crate::quadrature::Integrator;

/// Where a weight came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    KokQuadrature,
    PqFamily { alpha: Option<f64> },
    PFormula,
    CompositeWstar,
    Angular { index: usize },
    HybridW { radius: f64 },
    Scaled { factor: f64 },
}

type Eval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An evaluable, immutable weight `rho -> w(rho)` on an interval.
#[derive(Clone)]
pub struct WeightFunction {
    label: String,
    provenance: Provenance,
    domain: (f64, f64),
    breakpoints: Vec<f64>,
    eval: Eval,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("label", &self.label)
            .field("provenance", &self.provenance)
            .field("domain", &self.domain)
            .finish()
    }
}

impl WeightFunction {
    pub fn new(
        label: impl Into<String>,
        provenance: Provenance,
        domain: (f64, f64),
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            provenance,
            domain,
            breakpoints: Vec::new(),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), Provenance::ClosedForm, (0.0, f64::INFINITY), move |_| c)
    }

    /// Points where the weight has a kink; quadrature splits there.
    pub fn with_breakpoints(mut self, bps: Vec<f64>) -> Self {
        self.breakpoints = bps;
        self
    }

    pub fn eval(&self, rho: f64) -> f64 {
        (self.eval)(rho)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `s * w`.
    pub fn scaled(&self, s: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            label: format!("{s}*{}", self.label),
            provenance: Provenance::Scaled { factor: s },
            domain: self.domain,
            breakpoints: self.breakpoints.clone(),
            eval: Arc::new(move |r| s * inner(r)),
        }
    }

    /// `sup w/other` over a grid interior to the common domain.
    pub fn max_ratio(&self, other: &WeightFunction, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&r| self.eval(r) / other.eval(r))
            .fold(0.0, f64::max)
    }
}

/// Exact diffusion weight from the catalog.
///
/// Gaussian: `sigma`; Cauchy-type: `(1+rho^2)/(2(beta-1))` (requires
/// `beta > 1`, otherwise `K` is infinite); exponential: `(1+beta rho)/beta^2`;
/// Barenblatt: `(p-1)/(2p) (a^2-rho^2)`. The inverse-Gamma entry returns
/// `None`; see [`inverse_gamma_weight`].
pub fn closed_form_weight(d: &IsotropicDensity) -> Option<WeightFunction> {
    let dom = (0.0, d.support_radius());
    let label = format!("K[{}]", d.label());
    let w = match d.kind() {
        DensityKind::Gaussian { sigma } => WeightFunction::new(label, Provenance::ClosedForm, dom, move |_| sigma),
        DensityKind::CauchyType { beta } => {
            if beta <= 1.0 {
                return None;
            }
            WeightFunction::new(label, Provenance::ClosedForm, dom, move |r| {
                (1.0 + r * r) / (2.0 * (beta - 1.0))
            })
        }
        DensityKind::ExponentialType { beta } => {
            WeightFunction::new(label, Provenance::ClosedForm, dom, move |r| (1.0 + beta * r) / (beta * beta))
        }
        DensityKind::Barenblatt { a, p } => WeightFunction::new(label, Provenance::ClosedForm, dom, move |r| {
            ((p - 1.0) / (2.0 * p) * (a * a - r * r)).max(0.0)
        }),
        DensityKind::InverseGamma1d { .. } => return None,
    };
    Some(w)
}

/// `K(x) = x^2 / mu` for the unit-mean inverse-Gamma equilibrium, the exact
/// solution of `d/dx[K f] + (x - 1) f = 0`.
pub fn inverse_gamma_weight(mu: f64) -> WeightFunction {
    WeightFunction::new(
        format!("K[inverse_gamma:mu={mu}]"),
        Provenance::ClosedForm,
        (0.0, f64::INFINITY),
        move |x| x * x / mu,
    )
}

/// The diffusion weight the solver should use: closed form when the catalog
/// has one, the inverse-Gamma weight for that entry, quadrature otherwise.
pub fn diffusion_weight(d: &IsotropicDensity) -> Result<WeightFunction> {
    if let Some(k) = closed_form_weight(d) {
        return Ok(k);
    }
    if let DensityKind::InverseGamma1d { mu } = d.kind() {
        return Ok(inverse_gamma_weight(mu));
    }
    kok_weight(d)
}

/// Center of the linear drift: 1 for the inverse-Gamma entry, 0 otherwise.
pub fn drift_center(d: &IsotropicDensity) -> f64 {
    if d.is_half_line() {
        1.0
    } else {
        0.0
    }
}

/// `K(rho) = int_{rho^2}^{i+^2} f(sqrt y) dy / (2 f(rho))`, evaluated as
/// `int_rho^{i+} (s - m) f(s)/f(rho) ds` by adaptive quadrature on log-density
/// ratios. `m` is the drift center (0 for isotropic entries).
pub fn weight_from_density_kok(d: &IsotropicDensity, rho: f64) -> Result<f64> {
    weight_from_density_kok_with(d, rho, &Integrator::default())
}

pub fn weight_from_density_kok_with(d: &IsotropicDensity, rho: f64, integ: &Integrator) -> Result<f64> {
    let top = d.support_radius();
    let lo = if d.is_half_line() { 0.0 } else { -f64::MIN_POSITIVE };
    if !(rho > lo && rho < top) {
        return Err(Error::OutsideDomain {
            point: rho,
            domain: format!("(0, {top})"),
        });
    }
    let ln_f0 = d.ln_eval(rho);
    if !ln_f0.is_finite() {
        return Err(Error::OutsideDomain {
            point: rho,
            domain: "density vanishes".into(),
        });
    }
    if let DensityKind::CauchyType { beta } = d.kind() {
        if beta <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "K is infinite for cauchy-type with beta = {beta} <= 1"
            )));
        }
    }
    let m = drift_center(d);
    let integ = d.radial_integrator(integ);
    let split = (rho * rho + 1.0).sqrt();
    let bps: Vec<f64> = [split, m].into_iter().filter(|&b| b > rho && b < top).collect();
    let e = integ.integrate_vec_mapped(
        |s| {
            let l = d.ln_eval(s) - ln_f0;
            if l == f64::NEG_INFINITY {
                [0.0]
            } else {
                [(s - m) * l.exp()]
            }
        },
        rho,
        top,
        &bps,
        d.scale(),
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

/// [`weight_from_density_kok`] wrapped as a weight. Evaluation at or beyond the
/// support boundary returns 0.
pub fn kok_weight(d: &IsotropicDensity) -> Result<WeightFunction> {
    // probe once so invalid densities fail at construction
    weight_from_density_kok(d, 0.5 * d.scale().min(0.5 * d.support_radius()))?;
    let d = *d;
    Ok(WeightFunction::new(
        format!("Kq[{}]", d.label()),
        Provenance::KokQuadrature,
        (0.0, d.support_radius()),
        move |r| {
            if r >= d.support_radius() {
                0.0
            } else {
                weight_from_density_kok(&d, r.max(1e-300)).unwrap_or(f64::NAN)
            }
        },
    ))
}

/// Residual `d/drho[K f](rho) + (rho - m) f(rho)` with a fourth-order centered
/// difference of step `h`.
pub fn steady_state_residual(d: &IsotropicDensity, k: &WeightFunction, rho: f64, h: f64) -> f64 {
    let kf = |r: f64| k.eval(r) * d.eval(r);
    let deriv = (-kf(rho + 2.0 * h) + 8.0 * kf(rho + h) - 8.0 * kf(rho - h) + kf(rho - 2.0 * h)) / (12.0 * h);
    deriv + (rho - drift_center(d)) * d.eval(rho)
}

/// One-dimensional `P` weight of a density with mean `m` on `(a, b)`:
/// `int_a^x (m-y) f(y) dy / f(x)` for `x <= m` and `int_x^b (y-m) f(y) dy / f(x)`
/// beyond.
pub fn p_weight_1d(f: &Density1d, m: f64, x: f64) -> Result<f64> {
    p_weight_1d_with(f, m, x, &Integrator::default())
}

pub fn p_weight_1d_with(f: &Density1d, m: f64, x: f64, integ: &Integrator) -> Result<f64> {
    let (a, b) = f.support();
    if !(x > a && x < b) {
        return Err(Error::OutsideDomain {
            point: x,
            domain: format!("({a}, {b})"),
        });
    }
    let ln_fx = f.ln_pdf(x);
    if !ln_fx.is_finite() {
        return Err(Error::OutsideDomain {
            point: x,
            domain: "density vanishes".into(),
        });
    }
    let integ = f.integrator(integ);
    let g = |y: f64| {
        let l = f.ln_pdf(y) - ln_fx;
        if l == f64::NEG_INFINITY {
            [0.0]
        } else {
            [(y - m).abs() * l.exp()]
        }
    };
    let e = if x <= m {
        integ.integrate_vec_mapped(g, a, x, &[], f.scale())?
    } else {
        integ.integrate_vec_mapped(g, x, b, &[], f.scale())?
    };
    if !e.converged && e.error[0] > 1e-8 * e.value[0].abs().max(1e-300) {
        return Err(Error::QuadratureNotConverged {
            subdivisions: e.subdivisions,
            estimate: e.value[0],
            error: e.error[0],
        });
    }
    Ok(e.value[0])
}

/// [`p_weight_1d`] at the density's own mean, as a weight.
pub fn p_weight(f: &Density1d) -> WeightFunction {
    let f = f.clone();
    let m = f.mean();
    let dom = f.support();
    WeightFunction::new(format!("P[{}]", f.label()), Provenance::PFormula, dom, move |x| {
        p_weight_1d(&f, m, x).unwrap_or(0.0)
    })
    .with_breakpoints(vec![m])
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Diffusion `P` and drift `Q` of the one-dimensional equation whose
/// equilibrium satisfies `(P f)' + Q f = 0`.
#[derive(Clone)]
pub struct PQPair {
    pub label: String,
    pub domain: (f64, f64),
    pub alpha: Option<f64>,
    p: RealFn,
    q: RealFn,
    qprime: Option<RealFn>,
}

impl fmt::Debug for PQPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PQPair")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl PQPair {
    pub fn new(
        label: impl Into<String>,
        domain: (f64, f64),
        p: impl Fn(f64) -> f64 + Send + Sync + 'static,
        q: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            domain,
            alpha: None,
            p: Arc::new(p),
            q: Arc::new(q),
            qprime: None,
        }
    }

    pub fn with_qprime(mut self, qp: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.qprime = Some(Arc::new(qp));
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn p(&self, x: f64) -> f64 {
        (self.p)(x)
    }

    pub fn q(&self, x: f64) -> f64 {
        (self.q)(x)
    }

    /// Analytic `Q'` when provided, otherwise a fourth-order centered
    /// difference with relative step `1e-5`.
    pub fn qprime(&self, x: f64) -> f64 {
        match &self.qprime {
            Some(qp) => qp(x),
            None => {
                let h = 1e-5 * x.abs().max(1e-3);
                let q = &self.q;
                (-q(x + 2.0 * h) + 8.0 * q(x + h) - 8.0 * q(x - h) + q(x - 2.0 * h)) / (12.0 * h)
            }
        }
    }

    /// Interior validation grid: dense near finite ends, geometric toward
    /// infinite ones.
    pub fn validation_grid(&self, points: usize) -> Vec<f64> {
        let (a, b) = self.domain;
        let t: Vec<f64> = (1..points).map(|i| i as f64 / points as f64).collect();
        let map = |u: f64| -> f64 {
            match (a.is_finite(), b.is_finite()) {
                (true, true) => {
                    // cosine spacing clusters toward both ends
                    let c = 0.5 * (1.0 - (PI * u).cos());
                    a + (b - a) * c
                }
                (true, false) => a + u / (1.0 - u),
                (false, true) => b - (1.0 - u) / u,
                (false, false) => {
                    let v = 2.0 * u - 1.0;
                    v / (1.0 - v * v)
                }
            }
        };
        t.into_iter().map(map).filter(|x| x.is_finite()).collect()
    }

    /// Checks `P > 0`, `Q' > 0` on the validation grid and the boundary signs
    /// `Q(i-) < 0 < Q(i+)`.
    pub fn validate(&self) -> Result<()> {
        for x in self.validation_grid(400) {
            if !(self.p(x) > 0.0) {
                return Err(Error::NonPositiveWeight(x));
            }
            if !(self.qprime(x) > 0.0) {
                return Err(Error::NonMonotoneDrift(x));
            }
        }
        let (a, b) = self.domain;
        let near = |end: f64, inward: f64| {
            if end.is_finite() {
                end + inward * 1e-9 * end.abs().max(1.0)
            } else {
                -inward * 1e8
            }
        };
        let ql = self.q(near(a, 1.0));
        let qr = self.q(near(b, -1.0));
        if !(ql < 0.0) {
            return Err(Error::Hypothesis(format!("Q at the left end is {ql}, expected < 0")));
        }
        if !(qr > 0.0) {
            return Err(Error::Hypothesis(format!("Q at the right end is {qr}, expected > 0")));
        }
        Ok(())
    }
}

/// `w = P/Q'` after validating the pair.
pub fn w_from_pq(pq: &PQPair) -> Result<WeightFunction> {
    pq.validate()?;
    let pq2 = pq.clone();
    Ok(WeightFunction::new(
        format!("P/Q'[{}]", pq.label),
        Provenance::PqFamily { alpha: pq.alpha },
        pq.domain,
        move |x| {
            let v = pq2.p(x) / pq2.qprime(x);
            if v.is_finite() {
                v.max(0.0)
            } else {
                0.0
            }
        },
    ))
}

/// Pair for the radial marginal `rho^{n-1} (1+rho^2)^{-beta}` with
/// `P = (1+rho^2)^alpha`. For `n = 1` the pair lives on the whole line.
pub fn cauchy_pq(beta: f64, n: usize, alpha: f64) -> PQPair {
    let m = (n - 1) as f64;
    let domain = if n == 1 {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        (0.0, f64::INFINITY)
    };
    PQPair::new(
        format!("cauchy:beta={beta},n={n},alpha={alpha}"),
        domain,
        move |r| (1.0 + r * r).powf(alpha),
        move |r| {
            let u = 1.0 + r * r;
            let mut q = 2.0 * (beta - alpha) * r * u.powf(alpha - 1.0);
            if m > 0.0 {
                q -= m * u.powf(alpha) / r;
            }
            q
        },
    )
    .with_qprime(move |r| {
        let u = 1.0 + r * r;
        let mut qp = 2.0 * (beta - alpha) * u.powf(alpha - 2.0) * (u + 2.0 * (alpha - 1.0) * r * r);
        if m > 0.0 {
            qp -= m * (2.0 * alpha * u.powf(alpha - 1.0) - u.powf(alpha) / (r * r));
        }
        qp
    })
    .with_alpha(alpha)
}

/// Pair for the radial marginal `rho^{n-1} (a^2-rho^2)^{beta}`, `beta = 1/(p-1)`,
/// with `P = (a^2-rho^2)^alpha`. For `n = 1` the pair lives on `(-a, a)`.
pub fn barenblatt_pq(p: f64, n: usize, a: f64, alpha: f64) -> PQPair {
    let beta = 1.0 / (p - 1.0);
    let m = (n - 1) as f64;
    let domain = if n == 1 { (-a, a) } else { (0.0, a) };
    PQPair::new(
        format!("barenblatt:p={p},n={n},a={a},alpha={alpha}"),
        domain,
        move |r| (a * a - r * r).powf(alpha),
        move |r| {
            let v = a * a - r * r;
            let mut q = 2.0 * (alpha + beta) * r * v.powf(alpha - 1.0);
            if m > 0.0 {
                q -= m * v.powf(alpha) / r;
            }
            q
        },
    )
    .with_qprime(move |r| {
        let v = a * a - r * r;
        let mut qp = 2.0 * (alpha + beta) * v.powf(alpha - 2.0) * (v - 2.0 * (alpha - 1.0) * r * r);
        if m > 0.0 {
            qp += m * (2.0 * alpha * v.powf(alpha - 1.0) + v.powf(alpha) / (r * r));
        }
        qp
    })
    .with_alpha(alpha)
}

/// Result of maximizing a family objective over `alpha in (1/2, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptimum {
    /// Closed-form maximizer.
    pub alpha: f64,
    /// Objective at the closed-form maximizer.
    pub h: f64,
    /// Golden-section maximizer.
    pub alpha_numeric: f64,
    pub h_numeric: f64,
}

impl AlphaOptimum {
    /// Coefficient `1/(2h)` of the resulting weight.
    pub fn coefficient(&self) -> f64 {
        1.0 / (2.0 * self.h)
    }
}

/// Maximizes `f` on `[lo, hi]` by golden-section search to interval width
/// `tol`. Returns the better of the final bracket and the endpoints.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(mid, f(mid)), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// `h(alpha) = (2 alpha - 1)(beta* - alpha)` with `beta* = beta - (n-1)/2`.
pub fn cauchy_h(beta: f64, n: usize, alpha: f64) -> f64 {
    let bs = beta - (n as f64 - 1.0) / 2.0;
    (2.0 * alpha - 1.0) * (bs - alpha)
}

/// `h(alpha) = (2 alpha - 1)(alpha + beta + n - 1)` with `beta = 1/(p-1)`.
pub fn barenblatt_h(p: f64, n: usize, alpha: f64) -> f64 {
    let beta = 1.0 / (p - 1.0);
    (2.0 * alpha - 1.0) * (alpha + beta + n as f64 - 1.0)
}

const ALPHA_LO: f64 = 0.5;

pub fn cauchy_alpha_optimum(beta: f64, n: usize) -> Result<AlphaOptimum> {
    let nf = n as f64;
    if !(beta > (nf + 1.0) / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "optimal cauchy weight requires beta > (n+1)/2 = {}, got {beta}",
            (nf + 1.0) / 2.0
        )));
    }
    let bs = beta - (nf - 1.0) / 2.0;
    // stationary point of the concave quadratic, clipped to the interval
    let alpha = (bs / 2.0 + 0.25).min(1.0);
    let h = cauchy_h(beta, n, alpha);
    let (alpha_numeric, h_numeric) = golden_section_max(|a| cauchy_h(beta, n, a), ALPHA_LO, 1.0, 1e-12);
    Ok(AlphaOptimum {
        alpha,
        h,
        alpha_numeric,
        h_numeric,
    })
}

pub fn barenblatt_alpha_optimum(p: f64, n: usize) -> Result<AlphaOptimum> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("barenblatt requires p > 1, got {p}")));
    }
    // h is increasing on (1/2, 1]
    let alpha = 1.0;
    let h = barenblatt_h(p, n, alpha);
    let (alpha_numeric, h_numeric) = golden_section_max(|a| barenblatt_h(p, n, a), ALPHA_LO, 1.0, 1e-12);
    Ok(AlphaOptimum {
        alpha,
        h,
        alpha_numeric,
        h_numeric,
    })
}

/// `w(beta, rho) = (1+rho^2)/(beta-n/2)^2` for `(n+1)/2 < beta < n/2+1` and
/// `(1+rho^2)/(2 beta-(n+1))` beyond, i.e. `(1+rho^2)/(2 h(alpha*))`.
pub fn optimal_cauchy_weight(beta: f64, n: usize) -> Result<WeightFunction> {
    let opt = cauchy_alpha_optimum(beta, n)?;
    let c = opt.coefficient();
    Ok(WeightFunction::new(
        format!("w[cauchy:beta={beta},n={n}]"),
        Provenance::PqFamily { alpha: Some(opt.alpha) },
        (0.0, f64::INFINITY),
        move |r| c * (1.0 + r * r),
    ))
}

/// `w(p, rho) = (p-1)/(2(n(p-1)+1)) (a^2-rho^2)`.
pub fn optimal_barenblatt_weight(p: f64, n: usize, a: f64) -> Result<WeightFunction> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("barenblatt requires a > 0, got {a}")));
    }
    let opt = barenblatt_alpha_optimum(p, n)?;
    let c = opt.coefficient();
    Ok(WeightFunction::new(
        format!("w[barenblatt:p={p},n={n},a={a}]"),
        Provenance::PqFamily { alpha: Some(opt.alpha) },
        (0.0, a),
        move |r| (c * (a * a - r * r)).max(0.0),
    ))
}

/// `w(rho) = beta rho` for the Gamma radial marginal of the exponential-type
/// density.
pub fn gamma_radial_weight(beta: f64) -> WeightFunction {
    WeightFunction::new(
        format!("w[gamma:beta={beta}]"),
        Provenance::ClosedForm,
        (0.0, f64::INFINITY),
        move |r| beta * r,
    )
}

/// One-dimensional weight of the radial marginal used by the isotropic
/// theorem: the optimal family weight for Cauchy-type and Barenblatt, `beta rho`
/// for exponential-type, and the `P` formula otherwise.
pub fn radial_weight(d: &IsotropicDensity) -> Result<WeightFunction> {
    match d.kind() {
        DensityKind::CauchyType { beta } => optimal_cauchy_weight(beta, d.n()),
        DensityKind::Barenblatt { a, p } => optimal_barenblatt_weight(p, d.n(), a),
        DensityKind::ExponentialType { beta } => Ok(gamma_radial_weight(beta)),
        _ => Ok(p_weight(&Density1d::radial_marginal(d)?)),
    }
}

/// Angular weight `P_i(theta)`. Angle `i < n-1` has density proportional to
/// `sin^{n-1-i}` on `(0, pi)`; the azimuth `i = n-1` is uniform on `(0, 2 pi)`
/// with `P = pi theta - theta^2/2`.
pub fn angular_weight(i: usize, n: usize, theta: f64) -> Result<f64> {
    if n < 2 || i < 1 || i > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "angle index must be in 1..={} for n = {n}, got {i}",
            n.saturating_sub(1)
        )));
    }
    if i == n - 1 {
        if !(theta > 0.0 && theta < 2.0 * PI) {
            return Err(Error::OutsideDomain {
                point: theta,
                domain: "(0, 2pi)".into(),
            });
        }
        return Ok(PI * theta - theta * theta / 2.0);
    }
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::OutsideDomain {
            point: theta,
            domain: "(0, pi)".into(),
        });
    }
    let k = (n - 1 - i) as u32;
    // symmetric about pi/2
    let t = theta.min(PI - theta);
    p_weight_1d(&Density1d::sine_power(k), PI / 2.0, t)
}

/// Angular weight as a [`WeightFunction`] on its angle interval.
pub fn angular_weight_fn(i: usize, n: usize) -> Result<WeightFunction> {
    angular_weight(i, n, 1.0)?;
    let dom = if i == n - 1 { (0.0, 2.0 * PI) } else { (0.0, PI) };
    Ok(WeightFunction::new(
        format!("P{i}[n={n}]"),
        Provenance::Angular { index: i },
        dom,
        move |t| angular_weight(i, n, t).unwrap_or(0.0),
    ))
}

/// Bound on angular weights entering `W*`.
pub const AZIMUTHAL_BOUND: f64 = PI * PI / 2.0;
pub const POLAR_BOUND: f64 = PI * PI / 8.0;

/// `W*(rho) = max{w(rho), (pi^2/2) rho^2}`.
pub fn composite_wstar(w_radial: &WeightFunction) -> WeightFunction {
    let w = w_radial.clone();
    let (_, hi) = w_radial.domain();
    WeightFunction::new(
        format!("W*[{}]", w_radial.label()),
        Provenance::CompositeWstar,
        (0.0, hi),
        move |r| w.eval(r).max(AZIMUTHAL_BOUND * r * r),
    )
    .with_breakpoints(w_radial.breakpoints().to_vec())
}

/// `W(rho) = max(w, rho^2)` for `rho <= R`, `K` beyond.
pub fn hybrid_weight(w: &WeightFunction, k: &WeightFunction, radius: f64) -> WeightFunction {
    let (w2, k2) = (w.clone(), k.clone());
    let mut bps = w.breakpoints().to_vec();
    bps.push(radius);
    WeightFunction::new(
        format!("W[R={radius}]"),
        Provenance::HybridW { radius },
        k.domain(),
        move |r| {
            if r <= radius {
                w2.eval(r).max(r * r)
            } else {
                k2.eval(r)
            }
        },
    )
    .with_breakpoints(bps)
}

/// Smallest `R >= 0` with `(n-1) K(r)/r^2 <= 1/2` on `[R, i+)`.
///
/// The ratio is scanned on a geometric grid to locate the last violation,
/// which is then refined by bisection; the result is verified on a dense tail
/// grid. `n = 1` returns 0.
pub fn critical_radius_b1(d: &IsotropicDensity, k: &WeightFunction) -> Result<f64> {
    let n = d.n();
    if n < 2 {
        return Ok(0.0);
    }
    let m = (n - 1) as f64;
    let g = |r: f64| m * k.eval(r) / (r * r);
    let top = d.support_radius();
    let r_hi = if top.is_finite() { top * (1.0 - 1e-12) } else { 1e8 * d.scale() };
    let r_lo = 1e-6 * d.scale().min(r_hi);
    let grid = geometric_grid(r_lo, r_hi, 4000);
    if g(r_hi) > 0.5 {
        return Err(Error::Unsatisfiable(format!(
            "(n-1)K(r)/r^2 = {} > 1/2 at r = {r_hi:e} for {}",
            g(r_hi),
            d.label()
        )));
    }
    let Some(last_bad) = grid.iter().rposition(|&r| g(r) > 0.5) else {
        return Ok(0.0);
    };
    let (mut a, mut b) = (grid[last_bad], grid[last_bad + 1]);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if g(mid) > 0.5 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-15 * b {
            break;
        }
    }
    let radius = b;
    if !top.is_finite() && radius > 1e6 * d.scale() {
        return Err(Error::Unsatisfiable(format!(
            "(n-1)K(r)/r^2 stays above 1/2 up to r = {radius:e} for {}",
            d.label()
        )));
    }
    for r in geometric_grid(radius, r_hi, 20000) {
        if g(r) > 0.5 + 1e-12 {
            return Err(Error::Unsatisfiable(format!(
                "ratio not monotone: {} at r = {r} beyond R = {radius}",
                g(r)
            )));
        }
    }
    Ok(radius)
}

fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .map(|r| r.clamp(lo, hi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior(lo: f64, hi: f64, k: usize) -> Vec<f64> {
        (1..=k).map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64).collect()
    }

    #[test]
    fn gaussian_kok_is_sigma() {
        let d = IsotropicDensity::gaussian(1.0, 3).unwrap();
        for r in [0.01, 0.5, 2.0, 6.0] {
            assert!((weight_from_density_kok(&d, r).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn exponential_and_barenblatt_kok_examples() {
        let e = IsotropicDensity::exponential(1.0, 2).unwrap();
        assert!((weight_from_density_kok(&e, 2.0).unwrap() - 3.0).abs() < 1e-8);
        let b = IsotropicDensity::barenblatt(1.0, 3.0, 2).unwrap();
        assert!((weight_from_density_kok(&b, 0.5).unwrap() - 0.25).abs() < 1e-8);
        assert!(weight_from_density_kok(&b, 1.0).is_err());
    }

    #[test]
    fn cauchy_closed_form_matches_quadrature() {
        // the integral K of (1+rho^2)^{-3} at rho = 1 is 2/(2*2) = 0.5
        let d = IsotropicDensity::cauchy(3.0, 2).unwrap();
        let k = closed_form_weight(&d).unwrap();
        assert!((k.eval(1.0) - 0.5).abs() < 1e-15);
        assert!((weight_from_density_kok(&d, 1.0).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn closed_form_examples() {
        let g = IsotropicDensity::gaussian(2.5, 4).unwrap();
        assert_eq!(closed_form_weight(&g).unwrap().eval(3.0), 2.5);
        let b = IsotropicDensity::barenblatt(1.0, 2.0, 3).unwrap();
        assert!((closed_form_weight(&b).unwrap().eval(0.0) - 0.25).abs() < 1e-15);
        let ig = IsotropicDensity::inverse_gamma(2.0).unwrap();
        assert!(closed_form_weight(&ig).is_none());
    }

    #[test]
    fn inverse_gamma_kok_matches_exact() {
        let d = IsotropicDensity::inverse_gamma(2.0).unwrap();
        let k = inverse_gamma_weight(2.0);
        for x in [0.2, 0.9, 1.0, 1.7, 5.0] {
            let q = weight_from_density_kok(&d, x).unwrap();
            assert!((q - k.eval(x)).abs() < 1e-8 * k.eval(x), "{x}: {q}");
            assert!(steady_state_residual(&d, &k, x, 1e-3).abs() < 1e-9);
        }
    }

    #[test]
    fn kok_oracle_grid() {
        let cases = [
            IsotropicDensity::cauchy(2.0, 1).unwrap(),
            IsotropicDensity::exponential(2.0, 3).unwrap(),
            IsotropicDensity::barenblatt(2.0, 1.5, 2).unwrap(),
        ];
        for d in cases {
            let k = closed_form_weight(&d).unwrap();
            let top = d.support_radius().min(10.0);
            for r in interior(0.0, top, 20) {
                let q = weight_from_density_kok(&d, r).unwrap();
                assert!((q - k.eval(r)).abs() < 1e-7 * k.eval(r), "{} at {r}", d.label());
            }
        }
    }

    #[test]
    fn standard_normal_p_weight_is_one() {
        let f = Density1d::standard_normal();
        for x in [-3.0, -0.2, 0.0, 0.4, 2.5] {
            assert!((p_weight_1d(&f, 0.0, x).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_angle_weight() {
        let f = Density1d::uniform(0.0, 2.0 * PI);
        for t in [0.3, 2.0, PI, 5.0] {
            let want = PI * t - t * t / 2.0;
            assert!((p_weight_1d(&f, PI, t).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn sine_weight_bounded() {
        let f = Density1d::sine_power(1);
        let v = p_weight_1d(&f, PI / 2.0, PI / 2.0).unwrap();
        assert!(v <= POLAR_BOUND);
        assert!(v > 0.0);
        assert!(angular_weight(1, 3, 1e-6).unwrap() >= 0.0);
        assert!(angular_weight(1, 3, 1e-6).unwrap() < 1e-5);
    }

    #[test]
    fn azimuthal_maximum() {
        assert!((angular_weight(2, 3, PI).unwrap() - PI * PI / 2.0).abs() < 1e-15);
        assert!(angular_weight(2, 3, 7.0).is_err());
        assert!(angular_weight(3, 3, 1.0).is_err());
    }

    #[test]
    fn linear_drift_gives_p() {
        let pq = PQPair::new("ou", (f64::NEG_INFINITY, f64::INFINITY), |_| 1.0, |x| x - 0.3);
        let w = w_from_pq(&pq).unwrap();
        assert!((w.eval(1.7) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decreasing_drift_rejected() {
        let pq = PQPair::new("bad", (f64::NEG_INFINITY, f64::INFINITY), |_| 1.0, |x| -x);
        assert!(matches!(w_from_pq(&pq), Err(Error::NonMonotoneDrift(_))));
    }

    #[test]
    fn cauchy_pair_bounds() {
        let w = w_from_pq(&cauchy_pq(3.0, 2, 1.0)).unwrap();
        for r in interior(0.0, 30.0, 200) {
            assert!(w.eval(r) <= (1.0 + r * r) / (2.0 * 3.0 - 3.0) * (1.0 + 1e-12));
        }
        for alpha in [0.6, 0.8, 0.95] {
            let pq = cauchy_pq(3.0, 2, alpha);
            let w = w_from_pq(&pq).unwrap();
            let bound = 1.0 / (2.0 * cauchy_h(3.0, 2, alpha));
            for r in interior(0.0, 30.0, 100) {
                assert!(w.eval(r) <= bound * (1.0 + r * r) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn cauchy_qprime_matches_difference() {
        let pq = cauchy_pq(2.7, 3, 0.8);
        let mut fd = pq.clone();
        fd.qprime = None;
        for r in [0.3, 1.0, 4.0] {
            assert!((pq.qprime(r) - fd.qprime(r)).abs() < 1e-7 * pq.qprime(r).abs());
        }
        let pb = barenblatt_pq(3.0, 2, 1.0, 0.7);
        let mut fb = pb.clone();
        fb.qprime = None;
        for r in [0.2, 0.5, 0.9] {
            assert!((pb.qprime(r) - fb.qprime(r)).abs() < 1e-6 * pb.qprime(r).abs());
        }
    }

    #[test]
    fn barenblatt_pair_bound() {
        let (p, n) = (2.0, 2);
        let beta = 1.0 / (p - 1.0);
        let w = w_from_pq(&barenblatt_pq(p, n, 1.0, 1.0)).unwrap();
        for r in interior(0.0, 1.0, 200) {
            let bound = (1.0 - r * r) / (2.0 * (1.0 + beta + n as f64 - 1.0));
            assert!(w.eval(r) <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cauchy_branches() {
        // junction beta = n/2 + 1
        let w = optimal_cauchy_weight(2.0, 2).unwrap();
        assert!((w.eval(0.0) - 1.0).abs() < 1e-12);
        let w = optimal_cauchy_weight(1.8, 2).unwrap();
        assert!((w.eval(1.0) - 2.0 / 0.64).abs() < 1e-12);
        let w = optimal_cauchy_weight(4.0, 3).unwrap();
        assert!((w.eval(1.0) - 0.5).abs() < 1e-12);
        assert!(optimal_cauchy_weight(1.5, 2).is_err());
    }

    #[test]
    fn barenblatt_optimal_examples() {
        let w = optimal_barenblatt_weight(2.0, 1, 1.0).unwrap();
        assert!((w.eval(0.0) - 0.25).abs() < 1e-12);
        assert_eq!(w.eval(1.0), 0.0);
        let w = optimal_barenblatt_weight(3.0, 2, 1.0).unwrap();
        assert!((w.eval(0.0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn golden_section_agrees() {
        for (beta, n) in [(1.8, 2), (2.2, 2), (4.0, 3), (1.2, 1)] {
            let o = cauchy_alpha_optimum(beta, n).unwrap();
            assert!((o.h - o.h_numeric).abs() < 1e-10);
            assert!(o.alpha > 0.5 && o.alpha <= 1.0);
        }
    }

    #[test]
    fn wstar_crossover() {
        let w = composite_wstar(&gamma_radial_weight(1.0));
        let cross = 2.0 / (PI * PI);
        assert!((w.eval(0.1) - 0.1).abs() < 1e-15);
        assert!((w.eval(0.3) - PI * PI / 2.0 * 0.09).abs() < 1e-15);
        assert!((w.eval(cross) - cross).abs() < 1e-12);
        assert_eq!(w.eval(0.0), 0.0);
    }

    #[test]
    fn critical_radius_examples() {
        let g = IsotropicDensity::gaussian(1.0, 3).unwrap();
        let r = critical_radius_b1(&g, &closed_form_weight(&g).unwrap()).unwrap();
        assert!((r - 2.0).abs() < 1e-9);
        let e = IsotropicDensity::exponential(1.0, 2).unwrap();
        let r = critical_radius_b1(&e, &closed_form_weight(&e).unwrap()).unwrap();
        assert!((r - (1.0 + 3f64.sqrt())).abs() < 1e-9);
        let b = IsotropicDensity::barenblatt(1.0, 2.0, 2).unwrap();
        let r = critical_radius_b1(&b, &closed_form_weight(&b).unwrap()).unwrap();
        assert!((r - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        let g1 = IsotropicDensity::gaussian(1.0, 1).unwrap();
        assert_eq!(critical_radius_b1(&g1, &WeightFunction::constant(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn cauchy_b1_unsatisfiable_when_beta_le_n() {
        let d = IsotropicDensity::cauchy(2.0, 2).unwrap();
        let k = closed_form_weight(&d).unwrap();
        assert!(matches!(critical_radius_b1(&d, &k), Err(Error::Unsatisfiable(_))));
        let d = IsotropicDensity::cauchy(3.0, 2).unwrap();
        let r = critical_radius_b1(&d, &closed_form_weight(&d).unwrap()).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
    }
}
