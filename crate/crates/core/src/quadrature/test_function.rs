//! Smooth scalar test functions with exact gradients and support metadata.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension for term-built functions.
pub const MAX_DIM: usize = 4;

/// Where a test function may be nonzero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "radius", rename_all = "snake_case")]
pub enum Support {
    Full,
    OutsideBall(f64),
    InsideBall(f64),
}

/// Radial profile `R(r)` of a term, with derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    One,
    /// `exp(-r^2 / width^2)`.
    Gauss { width: f64 },
    /// `1 / (1 + r^2/width^2)`.
    Lorentz { width: f64 },
    /// `64 u^3 (1-u)^3` for `u = (r-r0)/(r1-r0)` in `(0, 1)`, zero elsewhere (C^2).
    Bump { r0: f64, r1: f64 },
    /// Quintic smootherstep from 0 at `r0` to 1 at `r1` (C^2).
    Ramp { r0: f64, r1: f64 },
    /// `1 - Ramp`.
    Window { r0: f64, r1: f64 },
}

fn smootherstep(u: f64) -> (f64, f64) {
    if u <= 0.0 {
        (0.0, 0.0)
    } else if u >= 1.0 {
        (1.0, 0.0)
    } else {
        let v = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
        let d = 30.0 * u * u * (1.0 - u) * (1.0 - u);
        (v, d)
    }
}

impl Profile {
    /// `(R(r), R'(r))`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match *self {
            Profile::One => (1.0, 0.0),
            Profile::Gauss { width } => {
                let v = (-(r * r) / (width * width)).exp();
                (v, -2.0 * r / (width * width) * v)
            }
            Profile::Lorentz { width } => {
                let q = 1.0 + r * r / (width * width);
                (1.0 / q, -2.0 * r / (width * width) / (q * q))
            }
            Profile::Bump { r0, r1 } => {
                let h = r1 - r0;
                let u = (r - r0) / h;
                if u <= 0.0 || u >= 1.0 {
                    (0.0, 0.0)
                } else {
                    let a = u * (1.0 - u);
                    (64.0 * a * a * a, 192.0 * a * a * (1.0 - 2.0 * u) / h)
                }
            }
            Profile::Ramp { r0, r1 } => {
                let (v, d) = smootherstep((r - r0) / (r1 - r0));
                (v, d / (r1 - r0))
            }
            Profile::Window { r0, r1 } => {
                let (v, d) = smootherstep((r - r0) / (r1 - r0));
                (1.0 - v, -d / (r1 - r0))
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Profile::Bump { r0, r1 } | Profile::Ramp { r0, r1 } | Profile::Window { r0, r1 } => vec![r0, r1],
            _ => Vec::new(),
        }
    }

    /// Whether `x^degree * R(|x - c|)` and its gradient stay bounded.
    fn bounds_degree(&self, degree: u32) -> bool {
        match self {
            Profile::Gauss { .. } | Profile::Bump { .. } | Profile::Window { .. } => true,
            Profile::Lorentz { .. } => degree <= 2,
            Profile::One | Profile::Ramp { .. } => degree == 0,
        }
    }
}

/// One additive piece of a term-built test function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Term {
    /// `coeff * prod_k x_k^{powers_k} * R(|x - center|)`.
    Radial {
        coeff: f64,
        powers: [u8; MAX_DIM],
        center: [f64; MAX_DIM],
        profile: Profile,
    },
    /// `amp * sin(k . x + phase)`.
    Sine { amp: f64, k: [f64; MAX_DIM], phase: f64 },
    /// `amp * sin(k . x + phase) * exp(-|x|^2 / width^2)`.
    Wave {
        amp: f64,
        k: [f64; MAX_DIM],
        phase: f64,
        width: f64,
    },
    /// `amp * tanh(k . x + offset)`.
    Tanh { amp: f64, k: [f64; MAX_DIM], offset: f64 },
    /// `coeff * x_axis / sqrt(1 + |x|^2)`: a bounded first spherical harmonic.
    Angular { coeff: f64, axis: usize },
}

impl Term {
    pub fn monomial(coeff: f64, powers: [u8; MAX_DIM]) -> Self {
        Term::Radial {
            coeff,
            powers,
            center: [0.0; MAX_DIM],
            profile: Profile::One,
        }
    }

    pub fn radial(coeff: f64, profile: Profile) -> Self {
        Term::Radial {
            coeff,
            powers: [0; MAX_DIM],
            center: [0.0; MAX_DIM],
            profile,
        }
    }

    /// Adds the term's value to the return and its gradient into `grad`.
    fn accumulate(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = x.len();
        match *self {
            Term::Radial {
                coeff,
                powers,
                center,
                profile,
            } => {
                let mut mono = 1.0;
                for k in 0..n {
                    if powers[k] > 0 {
                        mono *= x[k].powi(powers[k] as i32);
                    }
                }
                let mut r2 = 0.0;
                for k in 0..n {
                    let d = x[k] - center[k];
                    r2 += d * d;
                }
                let r = r2.sqrt();
                let (rv, rd) = profile.eval(r);
                if rv == 0.0 && rd == 0.0 {
                    return 0.0;
                }
                for k in 0..n {
                    // d/dx_k of the monomial
                    let dm = if powers[k] == 0 {
                        0.0
                    } else {
                        let mut p = powers[k] as f64 * x[k].powi(powers[k] as i32 - 1);
                        for j in 0..n {
                            if j != k && powers[j] > 0 {
                                p *= x[j].powi(powers[j] as i32);
                            }
                        }
                        p
                    };
                    let dr = if r > 0.0 { rd * (x[k] - center[k]) / r } else { 0.0 };
                    grad[k] += coeff * (dm * rv + mono * dr);
                }
                coeff * mono * rv
            }
            Term::Sine { amp, k, phase } => {
                let mut s = phase;
                for j in 0..n {
                    s += k[j] * x[j];
                }
                let (sn, cs) = s.sin_cos();
                for j in 0..n {
                    grad[j] += amp * cs * k[j];
                }
                amp * sn
            }
            Term::Wave { amp, k, phase, width } => {
                let mut s = phase;
                let mut r2 = 0.0;
                for j in 0..n {
                    s += k[j] * x[j];
                    r2 += x[j] * x[j];
                }
                let w2 = width * width;
                let e = (-r2 / w2).exp();
                let (sn, cs) = s.sin_cos();
                for j in 0..n {
                    grad[j] += amp * e * (cs * k[j] - sn * 2.0 * x[j] / w2);
                }
                amp * sn * e
            }
            Term::Tanh { amp, k, offset } => {
                let mut s = offset;
                for j in 0..n {
                    s += k[j] * x[j];
                }
                let t = s.tanh();
                for j in 0..n {
                    grad[j] += amp * (1.0 - t * t) * k[j];
                }
                amp * t
            }
            Term::Angular { coeff, axis } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let q = (1.0 + r2).sqrt();
                let xa = x[axis];
                for j in 0..n {
                    let e = if j == axis { 1.0 } else { 0.0 };
                    grad[j] += coeff * (e / q - xa * x[j] / (q * q * q));
                }
                coeff * xa / q
            }
        }
    }

    fn bounded(&self) -> bool {
        match self {
            Term::Radial { powers, profile, .. } => {
                profile.bounds_degree(powers.iter().map(|&p| p as u32).sum())
            }
            _ => true,
        }
    }

    fn radial_breakpoints(&self) -> Vec<f64> {
        match self {
            Term::Radial { center, profile, .. } if center.iter().all(|&c| c == 0.0) => profile.breakpoints(),
            _ => Vec::new(),
        }
    }
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
}

type EvalGrad = Arc<dyn Fn(&[f64], &mut [f64]) -> f64 + Send + Sync>;

/// A smooth scalar `phi` on `R^dim` with exact gradient.
#[derive(Clone)]
pub struct TestFunction {
    pub id: String,
    pub dim: usize,
    pub tags: Vec<String>,
    pub support: Support,
    pub bounded: bool,
    radial_breaks: Vec<f64>,
    line_breaks: Vec<f64>,
    f: EvalGrad,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("tags", &self.tags)
            .field("support", &self.support)
            .field("bounded", &self.bounded)
            .finish()
    }
}

impl TestFunction {
    /// Builds a function from a closure returning the value and writing the
    /// gradient (the buffer arrives zeroed).
    pub fn from_fn(
        id: impl Into<String>,
        dim: usize,
        support: Support,
        bounded: bool,
        f: impl Fn(&[f64], &mut [f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            dim,
            tags: Vec::new(),
            support,
            bounded,
            radial_breaks: Vec::new(),
            line_breaks: Vec::new(),
            f: Arc::new(f),
        }
    }

    /// Sum of terms, evaluated on the rescaled point `x / scale`.
    pub fn from_terms(id: impl Into<String>, dim: usize, scale: f64, terms: Vec<Term>) -> Self {
        assert!(dim <= MAX_DIM, "term-built test functions support dim <= {MAX_DIM}");
        let bounded = terms.iter().all(Term::bounded);
        let mut breaks: Vec<f64> = terms
            .iter()
            .flat_map(Term::radial_breakpoints)
            .map(|b| b * scale)
            .collect();
        sort_dedup(&mut breaks);
        let f = move |x: &[f64], g: &mut [f64]| {
            let mut y = [0.0; MAX_DIM];
            for k in 0..x.len() {
                y[k] = x[k] / scale;
            }
            let y = &y[..x.len()];
            let mut v = 0.0;
            for t in &terms {
                v += t.accumulate(y, g);
            }
            for gk in g.iter_mut() {
                *gk /= scale;
            }
            v
        };
        let line_breaks = if dim == 1 {
            let mut v: Vec<f64> = breaks.iter().flat_map(|&b| [-b, b]).collect();
            sort_dedup(&mut v);
            v
        } else {
            Vec::new()
        };
        Self {
            id: id.into(),
            dim,
            tags: Vec::new(),
            support: Support::Full,
            bounded,
            radial_breaks: breaks,
            line_breaks,
            f: Arc::new(f),
        }
    }

    pub fn with_tags(mut self, tags: &[&str]) -> Self {
        self.tags = tags.iter().map(|t| t.to_string()).collect();
        self
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = support;
        self
    }

    pub fn with_breakpoints(mut self, mut bps: Vec<f64>) -> Self {
        self.radial_breaks.append(&mut bps);
        sort_dedup(&mut self.radial_breaks);
        self
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    /// Radii where the function has reduced smoothness.
    pub fn radial_breakpoints(&self) -> &[f64] {
        &self.radial_breaks
    }

    /// For `dim == 1`: points of the line where smoothness drops.
    pub fn line_breakpoints(&self) -> &[f64] {
        &self.line_breaks
    }

    /// `x -> phi((x - center) / scales)` componentwise. Radial data is kept
    /// only when the map is a pure isotropic scaling.
    pub fn recentered(&self, center: &[f64], scales: &[f64]) -> Self {
        assert!(center.len() == self.dim && scales.len() == self.dim);
        let n = self.dim;
        let inner = self.f.clone();
        let c: Vec<f64> = center.to_vec();
        let s: Vec<f64> = scales.to_vec();
        let iso = c.iter().all(|&v| v == 0.0) && s.iter().all(|&v| v == s[0]);
        let mut out = self.clone();
        out.radial_breaks = if iso {
            self.radial_breaks.iter().map(|b| b * s[0]).collect()
        } else {
            Vec::new()
        };
        out.line_breaks = if n == 1 {
            self.line_breaks.iter().map(|b| c[0] + s[0] * b).collect()
        } else {
            Vec::new()
        };
        out.support = match self.support {
            Support::OutsideBall(r) if iso => Support::OutsideBall(r * s[0]),
            Support::InsideBall(r) if iso => Support::InsideBall(r * s[0]),
            _ => Support::Full,
        };
        out.f = Arc::new(move |x: &[f64], g: &mut [f64]| {
            let mut y = [0.0; MAX_DIM];
            for k in 0..n {
                y[k] = (x[k] - c[k]) / s[k];
            }
            let v = inner(&y[..n], g);
            for k in 0..n {
                g[k] /= s[k];
            }
            v
        });
        out
    }

    /// Pointwise product; supports intersect and breakpoints merge.
    pub fn times(&self, other: &TestFunction) -> Self {
        assert_eq!(self.dim, other.dim);
        let (a, b) = (self.f.clone(), other.f.clone());
        let n = self.dim;
        let mut radial_breaks = self.radial_breaks.clone();
        radial_breaks.extend_from_slice(&other.radial_breaks);
        sort_dedup(&mut radial_breaks);
        let mut line_breaks = self.line_breaks.clone();
        line_breaks.extend_from_slice(&other.line_breaks);
        sort_dedup(&mut line_breaks);
        let support = match (self.support, other.support) {
            (Support::Full, s) | (s, Support::Full) => s,
            (Support::OutsideBall(r), Support::OutsideBall(q)) => Support::OutsideBall(r.max(q)),
            (Support::InsideBall(r), Support::InsideBall(q)) => Support::InsideBall(r.min(q)),
            (s, _) => s,
        };
        let mut tags = self.tags.clone();
        for t in &other.tags {
            if !tags.contains(t) {
                tags.push(t.clone());
            }
        }
        Self {
            id: format!("{}*{}", self.id, other.id),
            dim: n,
            tags,
            support,
            bounded: self.bounded && other.bounded,
            radial_breaks,
            line_breaks,
            f: Arc::new(move |x: &[f64], g: &mut [f64]| {
                let mut ga = [0.0; MAX_DIM];
                let mut gb = [0.0; MAX_DIM];
                let va = a(x, &mut ga[..n]);
                let vb = b(x, &mut gb[..n]);
                for k in 0..n {
                    g[k] += va * gb[k] + vb * ga[k];
                }
                va * vb
            }),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut g = [0.0; MAX_DIM];
        (self.f)(x, &mut g[..x.len()])
    }

    /// Writes `grad phi(x)` into `out`.
    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        (self.f)(x, out);
    }

    /// Value and gradient in one call.
    pub fn eval_grad(&self, x: &[f64], out: &mut [f64]) -> f64 {
        out.iter_mut().for_each(|v| *v = 0.0);
        (self.f)(x, out)
    }

    /// `s * phi + c`.
    pub fn affine(&self, s: f64, c: f64) -> Self {
        let inner = self.f.clone();
        let mut out = self.clone();
        out.id = format!("{}*{s}+{c}", self.id);
        out.f = Arc::new(move |x, g| {
            let v = inner(x, g);
            for gk in g.iter_mut() {
                *gk *= s;
            }
            s * v + c
        });
        out
    }

    /// Compares the gradient with fourth-order centered differences at
    /// `probes` random points drawn in the ball of radius `radius`.
    pub fn self_test<R: Rng>(&self, rng: &mut R, probes: usize, radius: f64) -> Result<()> {
        let n = self.dim;
        let h = 1e-4 * radius.max(1e-3);
        let mut x = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut gp = vec![0.0; n];
        let mut tested = 0;
        let mut attempts = 0;
        while tested < probes && attempts < 20 * probes {
            attempts += 1;
            for v in x.iter_mut() {
                *v = rng.gen_range(-radius..radius);
            }
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if self.radial_breaks.iter().any(|&b| (r - b).abs() < 8.0 * h) || r < 8.0 * h {
                continue;
            }
            tested += 1;
            self.grad(&x, &mut g);
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..n {
                let mut at = |dx: f64| {
                    let mut y = x.clone();
                    y[k] += dx;
                    (self.f)(&y, &mut gp)
                };
                let fd = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
                gp.iter_mut().for_each(|v| *v = 0.0);
                if (fd - g[k]).abs() > 1e-6 * (gmax + 1e-2) {
                    return Err(Error::Hypothesis(format!(
                        "gradient self-test failed for {} at {x:?}, component {k}: analytic {}, difference {fd}",
                        self.id, g[k]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that the function and its gradient vanish where the support
    /// metadata says they must, at `probes` random points.
    pub fn check_support<R: Rng>(&self, rng: &mut R, probes: usize) -> Result<()> {
        let n = self.dim;
        let mut g = vec![0.0; n];
        let (inside, radius) = match self.support {
            Support::Full => return Ok(()),
            Support::OutsideBall(r) => (true, r),
            Support::InsideBall(r) => (false, r),
        };
        for _ in 0..probes {
            // random direction, radius in the forbidden region
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let rho = if inside {
                radius * rng.gen_range(0.0..1.0)
            } else {
                radius * (1.0 + rng.gen_range(0.0..3.0))
            };
            x.iter_mut().for_each(|v| *v *= rho / norm);
            let v = self.eval_grad(&x, &mut g);
            if v != 0.0 || g.iter().any(|&c| c != 0.0) {
                return Err(Error::Hypothesis(format!(
                    "{} does not vanish at |x| = {rho} despite support {:?}",
                    self.id, self.support
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn monomial_gradient() {
        let f = TestFunction::from_terms("x1x2^2", 2, 1.0, vec![Term::monomial(1.0, [1, 2, 0, 0])]);
        let mut g = [0.0; 2];
        let v = f.eval_grad(&[2.0, 3.0], &mut g);
        assert_eq!(v, 18.0);
        assert_eq!(g, [9.0, 12.0]);
    }

    #[test]
    fn profiles_pass_self_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let terms = vec![
            Term::radial(1.0, Profile::Bump { r0: 0.5, r1: 1.5 }),
            Term::radial(0.3, Profile::Ramp { r0: 1.0, r1: 2.0 }),
            Term::Radial {
                coeff: 0.7,
                powers: [1, 0, 1, 0],
                center: [0.3, -0.2, 0.1, 0.0],
                profile: Profile::Gauss { width: 0.8 },
            },
            Term::Sine {
                amp: 0.2,
                k: [1.0, -2.0, 0.5, 0.0],
                phase: 0.3,
            },
            Term::Tanh {
                amp: 0.5,
                k: [0.7, 0.1, -0.4, 0.0],
                offset: 0.2,
            },
            Term::Angular { coeff: 1.0, axis: 2 },
            Term::Radial {
                coeff: 1.0,
                powers: [2, 0, 0, 0],
                center: [0.0; 4],
                profile: Profile::Lorentz { width: 1.3 },
            },
        ];
        let f = TestFunction::from_terms("mix", 3, 1.7, terms);
        f.self_test(&mut rng, 200, 4.0).unwrap();
        assert!(f.bounded);
    }

    #[test]
    fn broken_gradient_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = TestFunction::from_fn("bad", 2, Support::Full, true, |x, g| {
            g[0] = 1.0;
            x[0] * x[0]
        });
        assert!(f.self_test(&mut rng, 10, 2.0).is_err());
    }

    #[test]
    fn support_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ok = TestFunction::from_terms("ramp", 2, 1.0, vec![Term::radial(1.0, Profile::Ramp { r0: 1.0, r1: 2.0 })])
            .with_support(Support::OutsideBall(1.0));
        ok.check_support(&mut rng, 200).unwrap();
        let bad = TestFunction::from_terms("ramp", 2, 1.0, vec![Term::radial(1.0, Profile::Ramp { r0: 0.5, r1: 2.0 })])
            .with_support(Support::OutsideBall(1.0));
        assert!(bad.check_support(&mut rng, 200).is_err());
    }

    #[test]
    fn affine_scales_gradient() {
        let f = TestFunction::from_terms("x", 1, 1.0, vec![Term::monomial(1.0, [1, 0, 0, 0])]).affine(3.0, 2.0);
        let mut g = [0.0];
        assert_eq!(f.eval_grad(&[1.5], &mut g), 6.5);
        assert_eq!(g[0], 3.0);
    }
}
