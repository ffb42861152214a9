//! Globally adaptive Gauss-Kronrod (10/21) integration of vector-valued integrands.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// How an endpoint is treated before adaptive bisection starts.
///
/// `Open` endpoints may carry an integrable singularity (algebraic blow-up of
/// the integrand or of its derivative). The initial partition is then graded
/// geometrically toward that endpoint. Nodes never touch an endpoint in either
/// case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EndpointPolicy {
    Open,
    #[default]
    Closed,
}

/// Tolerances and limits for adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub lower: EndpointPolicy,
    pub upper: EndpointPolicy,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_subdivisions: 4000,
            lower: EndpointPolicy::Closed,
            upper: EndpointPolicy::Closed,
        }
    }
}

/// Value and error estimate of a scalar integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Componentwise value and error estimate of a vector integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VecEstimate<const K: usize> {
    pub value: [f64; K],
    pub error: [f64; K],
    pub converged: bool,
    pub subdivisions: usize,
}

#[derive(Clone, Copy)]
struct Segment<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: [f64; K],
    resabs: [f64; K],
    splittable: bool,
}

fn kronrod21<const K: usize, F>(f: &F, a: f64, b: f64) -> Segment<K>
where
    F: Fn(f64) -> [f64; K],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = [0.0; K];
    let mut gauss = [0.0; K];
    let mut resabs = [0.0; K];
    for k in 0..K {
        kron[k] = WGK[10] * fc[k];
        resabs[k] = WGK[10] * fc[k].abs();
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..K {
            let s = f1[k] + f2[k];
            kron[k] += WGK[j] * s;
            resabs[k] += WGK[j] * (f1[k].abs() + f2[k].abs());
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; K];
    let mut error = [0.0; K];
    for k in 0..K {
        value[k] = kron[k] * half;
        resabs[k] *= half.abs();
        error[k] = ((kron[k] - gauss[k]) * half).abs();
    }
    let splittable = (b - a).abs() > 64.0 * f64::EPSILON * center.abs().max(f64::MIN_POSITIVE);
    Segment {
        a,
        b,
        value,
        error,
        resabs,
        splittable,
    }
}

/// Geometric grading toward open endpoints of `[a, b]`.
fn graded_points(a: f64, b: f64, lower: EndpointPolicy, upper: EndpointPolicy) -> Vec<f64> {
    const LEVELS: i32 = 6;
    let mut pts = vec![a, b];
    let w = b - a;
    if lower == EndpointPolicy::Open {
        for l in 1..=LEVELS {
            pts.push(a + w * 0.5f64.powi(l + 1));
        }
    }
    if upper == EndpointPolicy::Open {
        for l in 1..=LEVELS {
            pts.push(b - w * 0.5f64.powi(l + 1));
        }
    }
    if lower == EndpointPolicy::Open || upper == EndpointPolicy::Open {
        pts.push(a + 0.5 * w);
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    pts
}

impl Integrator {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn open_lower(mut self) -> Self {
        self.lower = EndpointPolicy::Open;
        self
    }

    pub fn open_upper(mut self) -> Self {
        self.upper = EndpointPolicy::Open;
        self
    }

    pub fn open_both(self) -> Self {
        self.open_lower().open_upper()
    }

    /// Adaptive integration over the finite interval `[a, b]` with the given
    /// interior breakpoints. Returns the best estimate even if the
    /// subdivision budget runs out (`converged == false`).
    pub fn integrate_vec_best<const K: usize, F>(
        &self,
        f: F,
        a: f64,
        b: f64,
        breakpoints: &[f64],
    ) -> VecEstimate<K>
    where
        F: Fn(f64) -> [f64; K],
    {
        let mut pts = graded_points(a, b, self.lower, self.upper);
        for &p in breakpoints {
            if p > a && p < b {
                pts.push(p);
            }
        }
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup();

        let mut segs: Vec<Segment<K>> = pts.windows(2).map(|w| kronrod21(&f, w[0], w[1])).collect();
        let mut subdivisions = 0usize;
        loop {
            let mut total = [0.0; K];
            let mut err = [0.0; K];
            let mut absum = [0.0; K];
            for s in &segs {
                for k in 0..K {
                    total[k] += s.value[k];
                    err[k] += s.error[k];
                    absum[k] += s.resabs[k];
                }
            }
            let mut tol = [0.0; K];
            let mut done = true;
            for k in 0..K {
                let roundoff = 50.0 * f64::EPSILON * absum[k];
                tol[k] = (self.rel_tol * total[k].abs()).max(self.abs_tol).max(roundoff);
                if err[k] > tol[k] {
                    done = false;
                }
            }
            if done || subdivisions >= self.max_subdivisions {
                return VecEstimate {
                    value: total,
                    error: err,
                    converged: done,
                    subdivisions,
                };
            }
            // worst segment relative to the current per-component tolerance
            let mut worst = None;
            let mut worst_score = 0.0;
            for (i, s) in segs.iter().enumerate() {
                if !s.splittable {
                    continue;
                }
                let score = s.error.iter().zip(&tol).map(|(e, t)| e / t).fold(0.0, f64::max);
                if score > worst_score {
                    worst_score = score;
                    worst = Some(i);
                }
            }
            let Some(i) = worst else {
                return VecEstimate {
                    value: total,
                    error: err,
                    converged: false,
                    subdivisions,
                };
            };
            let s = segs.swap_remove(i);
            let m = 0.5 * (s.a + s.b);
            segs.push(kronrod21(&f, s.a, m));
            segs.push(kronrod21(&f, m, s.b));
            subdivisions += 1;
        }
    }

    /// Vector integral over `[lo, hi]`, where either end may be infinite.
    /// Semi-infinite pieces use the substitution `x = lo + t/(1-t)`.
    pub fn integrate_vec<const K: usize, F>(
        &self,
        f: F,
        lo: f64,
        hi: f64,
        breakpoints: &[f64],
    ) -> Result<VecEstimate<K>>
    where
        F: Fn(f64) -> [f64; K],
    {
        let est = self.integrate_vec_mapped(f, lo, hi, breakpoints, 1.0)?;
        if est.converged {
            Ok(est)
        } else {
            let k = (0..K)
                .max_by(|&i, &j| est.error[i].partial_cmp(&est.error[j]).unwrap())
                .unwrap_or(0);
            Err(Error::QuadratureNotConverged {
                subdivisions: est.subdivisions,
                estimate: est.value[k],
                error: est.error[k],
            })
        }
    }

    /// Like [`Integrator::integrate_vec`] but returns the best estimate without
    /// failing, and uses `x = lo + scale * t/(1-t)` on semi-infinite pieces.
    pub fn integrate_vec_mapped<const K: usize, F>(
        &self,
        f: F,
        lo: f64,
        hi: f64,
        breakpoints: &[f64],
        scale: f64,
    ) -> Result<VecEstimate<K>>
    where
        F: Fn(f64) -> [f64; K],
    {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "integration bounds must satisfy lo < hi (got {lo}, {hi})"
            )));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!("mapping scale must be positive, got {scale}")));
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => Ok(self.integrate_vec_best(f, lo, hi, breakpoints)),
            (true, false) => Ok(self.tail(&f, lo, 1.0, breakpoints, scale)),
            (false, true) => Ok(self.tail(&f, hi, -1.0, breakpoints, scale)),
            (false, false) => {
                let l = self.tail(&f, 0.0, -1.0, breakpoints, scale);
                let r = self.tail(&f, 0.0, 1.0, breakpoints, scale);
                let mut out = r;
                for k in 0..K {
                    out.value[k] += l.value[k];
                    out.error[k] += l.error[k];
                }
                out.converged = l.converged && r.converged;
                out.subdivisions += l.subdivisions;
                Ok(out)
            }
        }
    }

    /// Integral over the ray `x = origin + sign * scale * t/(1-t)`, `t in (0, 1)`.
    fn tail<const K: usize, F>(&self, f: &F, origin: f64, sign: f64, breakpoints: &[f64], scale: f64) -> VecEstimate<K>
    where
        F: Fn(f64) -> [f64; K],
    {
        let bps: Vec<f64> = breakpoints
            .iter()
            .map(|&p| sign * (p - origin))
            .filter(|&d| d > 0.0)
            .map(|d| d / (scale + d))
            .collect();
        let g = |t: f64| {
            let jac = scale / ((1.0 - t) * (1.0 - t));
            let mut v = f(origin + sign * scale * t / (1.0 - t));
            for x in v.iter_mut() {
                *x = if *x == 0.0 { 0.0 } else { *x * jac };
            }
            v
        };
        let mut me = *self;
        // the finite end keeps its own policy; the mapped end is always open
        me.lower = if sign > 0.0 { self.lower } else { self.upper };
        me.upper = EndpointPolicy::Open;
        me.integrate_vec_best(g, 0.0, 1.0, &bps)
    }

    /// Scalar integral over `[lo, hi]`; `hi` may be `+inf` and `lo` may be `-inf`.
    pub fn integrate<F>(&self, f: F, lo: f64, hi: f64) -> Result<Estimate>
    where
        F: Fn(f64) -> f64,
    {
        self.integrate_with_breaks(f, lo, hi, &[])
    }

    pub fn integrate_with_breaks<F>(&self, f: F, lo: f64, hi: f64, breakpoints: &[f64]) -> Result<Estimate>
    where
        F: Fn(f64) -> f64,
    {
        let e = self.integrate_vec(|x| [f(x)], lo, hi, breakpoints)?;
        Ok(Estimate {
            value: e.value[0],
            error: e.error[0],
        })
    }
}

/// Convenience wrapper: integrate `g` over `[lo, hi]` with the given integrator.
pub fn integrate_interval<F>(g: F, lo: f64, hi: f64, integrator: &Integrator) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    integrator.integrate(g, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exponential_tail() {
        let e = integrate_interval(|y| (-y).exp(), 0.0, f64::INFINITY, &Integrator::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12, "{}", e.value);
    }

    #[test]
    fn sine_half_period() {
        let e = integrate_interval(f64::sin, 0.0, PI, &Integrator::default()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn algebraic_endpoint() {
        let integ = Integrator::with_tolerances(1e-13, 1e-15).open_upper();
        let e = integrate_interval(|y| (1.0 - y).sqrt(), 0.0, 1.0, &integ).unwrap();
        assert!((e.value - 2.0 / 3.0).abs() < 1e-12, "{:e}", e.value - 2.0 / 3.0);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let integ = Integrator::default().open_lower();
        let e = integrate_interval(|y| 1.0 / y.sqrt(), 0.0, 1.0, &integ).unwrap();
        assert!((e.value - 2.0).abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn whole_line_gaussian() {
        let e = Integrator::default()
            .integrate(|x| (-0.5 * x * x).exp(), f64::NEG_INFINITY, f64::INFINITY)
            .unwrap();
        assert!((e.value - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let integ = Integrator {
            max_subdivisions: 3,
            ..Integrator::default()
        };
        let err = integ.integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0).unwrap_err();
        match err {
            Error::QuadratureNotConverged { estimate, .. } => assert!(estimate.is_finite()),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn reversed_bounds_rejected() {
        assert!(Integrator::default().integrate(|x| x, 1.0, 0.0).is_err());
    }

    #[test]
    fn breakpoints_at_kink() {
        let e = Integrator::default()
            .integrate_with_breaks(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3])
            .unwrap();
        assert!((e.value - (0.045 + 0.245)).abs() < 1e-14);
    }
}
