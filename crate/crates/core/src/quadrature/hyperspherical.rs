//! Integration over `R^n` in hyperspherical coordinates
//! `x1 = rho cos t1, x2 = rho sin t1 cos t2, ..., xn = rho sin t1 ... sin t_{n-1}`.
//!
//! The radial direction is integrated adaptively; the sphere uses a fixed
//! tensor Gauss-Legendre rule with the `sin^{n-1-i}(t_i)` Jacobian folded into
//! the weights.

use std::f64::consts::PI;

use crate::densities::IsotropicDensity;
use crate::error::{Error, Result};

use super::kronrod::Integrator;
use super::legendre::gauss_legendre_on;

/// Default Gauss-Legendre order per angle.
pub const DEFAULT_ANGULAR_ORDER: usize = 32;

/// Largest dimension with a full tensor angular rule.
pub const MAX_GRID_DIM: usize = 4;

/// Tensor rule on the unit sphere `S^{n-1}` with weights summing to one.
///
/// For `n = 1` the "sphere" is `{-1, +1}`; the half-line variant keeps `+1` only.
#[derive(Clone, Debug)]
pub struct AngularRule {
    n: usize,
    dirs: Vec<f64>,
    weights: Vec<f64>,
    angles: Vec<f64>,
    tangents: Vec<f64>,
}

/// Unit direction for the given angles. With `deriv = Some(i)` returns
/// `du/dt_i` instead.
pub fn direction(angles: &[f64], deriv: Option<usize>, out: &mut [f64]) {
    let n = angles.len() + 1;
    let mut s = 1.0;
    for k in 0..n {
        if k < n - 1 {
            let t = angles[k];
            let (c, sn) = if deriv == Some(k) {
                (-t.sin(), t.cos())
            } else {
                (t.cos(), t.sin())
            };
            out[k] = s * c;
            s *= sn;
        } else {
            out[k] = s;
        }
    }
    if let Some(i) = deriv {
        for v in out.iter_mut().take(i) {
            *v = 0.0;
        }
    }
}

impl AngularRule {
    pub fn new(n: usize, order: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if n == 1 {
            return Ok(Self {
                n,
                dirs: vec![-1.0, 1.0],
                weights: vec![0.5, 0.5],
                angles: Vec::new(),
                tangents: Vec::new(),
            });
        }
        if n > MAX_GRID_DIM {
            return Err(Error::InvalidParameter(format!(
                "tensor angular rule supports n <= {MAX_GRID_DIM}, got {n}"
            )));
        }
        let na = n - 1;
        let mut rules = Vec::with_capacity(na);
        for i in 0..na {
            if i == na - 1 {
                rules.push(gauss_legendre_on(order, 0.0, 2.0 * PI));
            } else {
                let k = (n - 2 - i) as i32;
                let (x, w) = gauss_legendre_on(order, 0.0, PI);
                let w = x.iter().zip(&w).map(|(t, w)| w * t.sin().powi(k)).collect();
                rules.push((x, w));
            }
        }
        let total: usize = rules.iter().map(|r| r.0.len()).product();
        let mut rule = Self {
            n,
            dirs: Vec::with_capacity(total * n),
            weights: Vec::with_capacity(total),
            angles: Vec::with_capacity(total * na),
            tangents: Vec::with_capacity(total * na * n),
        };
        let mut idx = vec![0usize; na];
        let mut th = vec![0.0; na];
        let mut u = vec![0.0; n];
        for _ in 0..total {
            let mut w = 1.0;
            for i in 0..na {
                th[i] = rules[i].0[idx[i]];
                w *= rules[i].1[idx[i]];
            }
            direction(&th, None, &mut u);
            rule.dirs.extend_from_slice(&u);
            rule.weights.push(w);
            rule.angles.extend_from_slice(&th);
            for i in 0..na {
                direction(&th, Some(i), &mut u);
                rule.tangents.extend_from_slice(&u);
            }
            for i in (0..na).rev() {
                idx[i] += 1;
                if idx[i] < rules[i].0.len() {
                    break;
                }
                idx[i] = 0;
            }
        }
        let s: f64 = rule.weights.iter().sum();
        for w in rule.weights.iter_mut() {
            *w /= s;
        }
        Ok(rule)
    }

    /// The single direction `+1` with unit weight.
    pub fn half_line() -> Self {
        Self {
            n: 1,
            dirs: vec![1.0],
            weights: vec![1.0],
            angles: Vec::new(),
            tangents: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn direction(&self, j: usize) -> &[f64] {
        &self.dirs[j * self.n..(j + 1) * self.n]
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    /// Angles `t_1..t_{n-1}` of node `j`.
    pub fn angles(&self, j: usize) -> &[f64] {
        let na = self.n.saturating_sub(1);
        &self.angles[j * na..(j + 1) * na]
    }

    /// `du/dt_i` at node `j` (`i` zero-based).
    pub fn tangent(&self, j: usize, i: usize) -> &[f64] {
        let na = self.n - 1;
        let base = (j * na + i) * self.n;
        &self.tangents[base..base + self.n]
    }
}

/// Integration grid for expectations against an isotropic density.
#[derive(Clone, Debug)]
pub struct HypersphericalGrid {
    density: IsotropicDensity,
    angular: AngularRule,
    integrator: Integrator,
}

/// Per-node context handed to integrands.
pub struct Node<'a> {
    pub rho: f64,
    pub x: &'a [f64],
    pub dir: &'a [f64],
    pub index: usize,
}

impl HypersphericalGrid {
    pub fn new(density: IsotropicDensity, order: usize, integrator: Integrator) -> Result<Self> {
        let angular = if density.is_half_line() {
            AngularRule::half_line()
        } else {
            AngularRule::new(density.n(), order)?
        };
        Ok(Self {
            density,
            angular,
            integrator: density.radial_integrator(&integrator),
        })
    }

    pub fn with_default(density: IsotropicDensity) -> Result<Self> {
        Self::new(density, DEFAULT_ANGULAR_ORDER, Integrator::default())
    }

    pub fn density(&self) -> &IsotropicDensity {
        &self.density
    }

    pub fn angular(&self) -> &AngularRule {
        &self.angular
    }

    pub fn dim(&self) -> usize {
        self.angular.dim()
    }

    /// `E[g(X)]` componentwise, with radial breakpoints.
    ///
    /// `g` receives the node context and returns a `K`-vector; the radial
    /// integrand is `f(rho) * sum_j w_j g(rho u_j)` with `f` the radial law.
    pub fn expect<const K: usize, G>(&self, g: G, breakpoints: &[f64]) -> Result<[f64; K]>
    where
        G: Fn(&Node<'_>) -> [f64; K],
    {
        self.expect_on(g, breakpoints, 0.0, self.density.support_radius())
    }

    /// As [`HypersphericalGrid::expect`] restricted to radii in `(r0, r1)`.
    pub fn expect_on<const K: usize, G>(&self, g: G, breakpoints: &[f64], r0: f64, r1: f64) -> Result<[f64; K]>
    where
        G: Fn(&Node<'_>) -> [f64; K],
    {
        self.expect_with(|_| (), |node, _| g(node), breakpoints, r0, r1)
    }

    /// General form: `pre(rho)` is computed once per radial node and handed
    /// to every angular evaluation at that radius.
    pub fn expect_with<const K: usize, P, Pre, G>(
        &self,
        pre: Pre,
        g: G,
        breakpoints: &[f64],
        r0: f64,
        r1: f64,
    ) -> Result<[f64; K]>
    where
        Pre: Fn(f64) -> P,
        G: Fn(&Node<'_>, &P) -> [f64; K],
    {
        let n = self.dim();
        let top = r1.min(self.density.support_radius());
        if !(r0 < top) {
            return Ok([0.0; K]);
        }
        let rule = &self.angular;
        let d = &self.density;
        let radial = |rho: f64| -> [f64; K] {
            let p = d.radial_pdf(rho);
            if !(p > 0.0) {
                return [0.0; K];
            }
            let aux = pre(rho);
            let mut acc = [0.0; K];
            let mut x = [0.0; MAX_GRID_DIM];
            for j in 0..rule.len() {
                let u = rule.direction(j);
                for k in 0..n {
                    x[k] = rho * u[k];
                }
                let v = g(
                    &Node {
                        rho,
                        x: &x[..n],
                        dir: u,
                        index: j,
                    },
                    &aux,
                );
                let w = rule.weight(j);
                for k in 0..K {
                    acc[k] += w * v[k];
                }
            }
            for a in acc.iter_mut() {
                *a *= p;
            }
            acc
        };
        let mut integ = self.integrator;
        if r1 < self.density.support_radius() {
            integ.upper = super::kronrod::EndpointPolicy::Closed;
        }
        let e = integ.integrate_vec_mapped(radial, r0, top, breakpoints, d.scale())?;
        if !e.converged {
            let k = (0..K)
                .max_by(|&i, &j| e.error[i].partial_cmp(&e.error[j]).unwrap())
                .unwrap_or(0);
            // accept when the unresolved part is negligible in absolute terms
            let scale: f64 = e.value.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if e.error[k] > 1e-7 * scale.max(1e-12) {
                return Err(Error::QuadratureNotConverged {
                    subdivisions: e.subdivisions,
                    estimate: e.value[k],
                    error: e.error[k],
                });
            }
        }
        Ok(e.value)
    }

    /// Average of `g` over the sphere of radius `rho`, weighted by the
    /// surface measure: `rho^{n-1} sigma_n f(rho) * mean_u g(rho u)`.
    pub fn surface<G>(&self, rho: f64, g: G) -> f64
    where
        G: Fn(&Node<'_>) -> f64,
    {
        let n = self.dim();
        let rule = &self.angular;
        let mut acc = 0.0;
        let mut x = [0.0; MAX_GRID_DIM];
        for j in 0..rule.len() {
            let u = rule.direction(j);
            for k in 0..n {
                x[k] = rho * u[k];
            }
            acc += rule.weight(j)
                * g(&Node {
                    rho,
                    x: &x[..n],
                    dir: u,
                    index: j,
                });
        }
        acc * self.density.radial_pdf(rho)
    }

    /// Total mass seen by the grid; should be one.
    pub fn mass(&self) -> Result<f64> {
        Ok(self.expect(|_| [1.0], &[])?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_and_tangents_orthogonal() {
        let rule = AngularRule::new(4, 6).unwrap();
        for j in 0..rule.len() {
            let u = rule.direction(j);
            let norm: f64 = u.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-14);
            for i in 0..3 {
                let t = rule.tangent(j, i);
                let dot: f64 = u.iter().zip(t).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_moments() {
        // E[u_k^2] = 1/n on the sphere
        for n in 2..=4 {
            let rule = AngularRule::new(n, 16).unwrap();
            for k in 0..n {
                let m: f64 = (0..rule.len()).map(|j| rule.weight(j) * rule.direction(j)[k].powi(2)).sum();
                assert!((m - 1.0 / n as f64).abs() < 1e-13, "n={n} k={k}: {m}");
            }
        }
    }

    #[test]
    fn grids_are_normalized() {
        for d in [
            IsotropicDensity::gaussian(1.0, 3).unwrap(),
            IsotropicDensity::cauchy(2.0, 2).unwrap(),
            IsotropicDensity::barenblatt(1.0, 1.5, 2).unwrap(),
            IsotropicDensity::inverse_gamma(2.0).unwrap(),
        ] {
            let g = HypersphericalGrid::with_default(d).unwrap();
            assert!((g.mass().unwrap() - 1.0).abs() < 1e-7, "{}", d.label());
        }
    }

    #[test]
    fn rejects_high_dimension() {
        assert!(AngularRule::new(5, 8).is_err());
    }
}
