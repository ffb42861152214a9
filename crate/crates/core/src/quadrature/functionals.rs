//! Variance, weighted Dirichlet forms and their hyperspherical split.

use crate::densities::IsotropicDensity;
use crate::error::Result;
use crate::weights::WeightFunction;

use super::hyperspherical::{HypersphericalGrid, MAX_GRID_DIM};
use super::test_function::TestFunction;

/// Mean and (clamped) variance of `phi(X)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

fn merged(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().filter(|x| x.is_finite() && *x > 0.0).collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v.dedup();
    v
}

impl HypersphericalGrid {
    /// Two-pass mean and variance, so that `phi + c` has the same variance.
    pub fn moments(&self, phi: &TestFunction) -> Result<Moments> {
        let bps = phi.radial_breakpoints();
        let [mean] = self.expect(|node| [phi.eval(node.x)], bps)?;
        let [var] = self.expect(
            |node| {
                let d = phi.eval(node.x) - mean;
                [d * d]
            },
            bps,
        )?;
        Ok(Moments {
            mean,
            variance: var.max(0.0),
        })
    }

    /// `E[w(|X|) |grad phi(X)|^2]`, restricted to radii in `(r0, r1)`.
    pub fn dirichlet_on(&self, w: &WeightFunction, phi: &TestFunction, r0: f64, r1: f64) -> Result<f64> {
        let bps = merged(phi.radial_breakpoints(), w.breakpoints());
        let n = self.dim();
        let [v] = self.expect_with(
            |rho| w.eval(rho),
            |node, &wr| {
                if wr == 0.0 {
                    return [0.0];
                }
                let mut g = [0.0; MAX_GRID_DIM];
                phi.grad(node.x, &mut g[..n]);
                [wr * g[..n].iter().map(|c| c * c).sum::<f64>()]
            },
            &bps,
            r0,
            r1,
        )?;
        Ok(v)
    }

    pub fn dirichlet(&self, w: &WeightFunction, phi: &TestFunction) -> Result<f64> {
        self.dirichlet_on(w, phi, 0.0, f64::INFINITY)
    }

    /// `(E[w(rho) (d phi/d rho)^2], sum_i b_i E[(d phi/d t_i)^2])`, the two
    /// addends of the hyperspherical product bound with constant angular
    /// weights `b_i`.
    pub fn split(&self, phi: &TestFunction, radial_w: &WeightFunction, angular_bounds: &[f64]) -> Result<(f64, f64)> {
        let bps = merged(phi.radial_breakpoints(), radial_w.breakpoints());
        let n = self.dim();
        let rule = self.angular();
        let na = if n >= 2 && rule.len() > 2 { n - 1 } else { 0 };
        let [radial, angular] = self.expect_with(
            |rho| radial_w.eval(rho),
            |node, &wr| {
                let mut g = [0.0; MAX_GRID_DIM];
                phi.grad(node.x, &mut g[..n]);
                let dr: f64 = g[..n].iter().zip(node.dir).map(|(a, b)| a * b).sum();
                let mut ang = 0.0;
                for i in 0..na {
                    let t = rule.tangent(node.index, i);
                    let dt: f64 = node.rho * g[..n].iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
                    ang += angular_bounds.get(i).copied().unwrap_or(0.0) * dt * dt;
                }
                [wr * dr * dr, ang]
            },
            &bps,
            0.0,
            f64::INFINITY,
        )?;
        Ok((radial, angular))
    }

    /// `int_{|x| = R} |grad phi|^2 f(|x|) dsigma`.
    pub fn surface_dirichlet(&self, phi: &TestFunction, radius: f64) -> f64 {
        let n = self.dim();
        self.surface(radius, |node| {
            let mut g = [0.0; MAX_GRID_DIM];
            phi.grad(node.x, &mut g[..n]);
            g[..n].iter().map(|c| c * c).sum()
        })
    }
}

/// `Var[phi(X)]` for `X ~ d`, on a default grid.
pub fn variance(d: &IsotropicDensity, phi: &TestFunction) -> Result<f64> {
    Ok(HypersphericalGrid::with_default(*d)?.moments(phi)?.variance)
}

/// `E[w(|X|) |grad phi(X)|^2]` for `X ~ d`, on a default grid.
pub fn weighted_dirichlet(d: &IsotropicDensity, w: &WeightFunction, phi: &TestFunction) -> Result<f64> {
    HypersphericalGrid::with_default(*d)?.dirichlet(w, phi)
}

/// Radial and angular addends of the hyperspherical product bound.
pub fn split_dirichlet_radial_angular(
    d: &IsotropicDensity,
    phi: &TestFunction,
    radial_w: &WeightFunction,
    angular_bounds: &[f64],
) -> Result<(f64, f64)> {
    HypersphericalGrid::with_default(*d)?.split(phi, radial_w, angular_bounds)
}

/// Surface term `int_{|x|=R} |grad phi|^2 f dsigma` on a default grid.
pub fn surface_dirichlet(d: &IsotropicDensity, phi: &TestFunction, radius: f64) -> Result<f64> {
    Ok(HypersphericalGrid::with_default(*d)?.surface_dirichlet(phi, radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::test_function::{Profile, Term};
    use crate::quadrature::Integrator;
    use crate::weights::{composite_wstar, WeightFunction, AZIMUTHAL_BOUND, POLAR_BOUND};
    use std::f64::consts::PI;

    fn linear(dim: usize, axis: usize) -> TestFunction {
        let mut p = [0u8; 4];
        p[axis] = 1;
        TestFunction::from_terms(format!("x{}", axis + 1), dim, 1.0, vec![Term::monomial(1.0, p)])
    }

    #[test]
    fn constant_has_zero_variance_and_energy() {
        let d = IsotropicDensity::gaussian(1.0, 2).unwrap();
        let c = TestFunction::from_terms("c", 2, 1.0, vec![Term::radial(3.0, Profile::One)]);
        assert!(variance(&d, &c).unwrap().abs() < 1e-14);
        assert_eq!(weighted_dirichlet(&d, &WeightFunction::constant(1.0), &c).unwrap(), 0.0);
    }

    #[test]
    fn standard_normal_linear() {
        let d = IsotropicDensity::gaussian(1.0, 1).unwrap();
        let x = linear(1, 0);
        assert!((variance(&d, &x).unwrap() - 1.0).abs() < 1e-10);
        let d2 = IsotropicDensity::gaussian(2.5, 1).unwrap();
        let w = WeightFunction::constant(2.5);
        assert!((weighted_dirichlet(&d2, &w, &x).unwrap() - 2.5).abs() < 1e-10);
    }

    #[test]
    fn radial_reduction_oracle() {
        // phi = exp(-rho), w = 1 + rho, exponential beta = 1 in n = 2
        let d = IsotropicDensity::exponential(1.0, 2).unwrap();
        let phi = TestFunction::from_fn("exp(-rho)", 2, crate::quadrature::Support::Full, true, |x, g| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let v = (-r).exp();
            if r > 0.0 {
                g[0] = -v * x[0] / r;
                g[1] = -v * x[1] / r;
            }
            v
        });
        let w = WeightFunction::new("1+rho", crate::weights::Provenance::ClosedForm, (0.0, f64::INFINITY), |r| 1.0 + r);
        let got = weighted_dirichlet(&d, &w, &phi).unwrap();
        let want = Integrator::default()
            .integrate(|r| 2.0 * PI * (1.0 + r) * (-2.0 * r).exp() * r * d.eval(r), 0.0, f64::INFINITY)
            .unwrap()
            .value;
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn shift_and_scale() {
        let d = IsotropicDensity::cauchy(3.0, 2).unwrap();
        let grid = HypersphericalGrid::with_default(d).unwrap();
        let phi = TestFunction::from_terms(
            "mix",
            2,
            1.0,
            vec![
                Term::Tanh {
                    amp: 1.0,
                    k: [0.8, -0.3, 0.0, 0.0],
                    offset: 0.1,
                },
                Term::radial(0.5, Profile::Gauss { width: 1.2 }),
            ],
        );
        let v = grid.moments(&phi).unwrap().variance;
        let v2 = grid.moments(&phi.affine(1.0, 3.0)).unwrap().variance;
        assert!((v - v2).abs() < 1e-10 * v);
        let w = WeightFunction::constant(1.0);
        let e = grid.dirichlet(&w, &phi).unwrap();
        let e3 = grid.dirichlet(&w, &phi.affine(3.0, 0.0)).unwrap();
        assert!((e3 - 9.0 * e).abs() < 1e-10 * e3);
    }

    #[test]
    fn split_examples() {
        let d = IsotropicDensity::gaussian(1.0, 3).unwrap();
        let w = WeightFunction::constant(1.0);
        let radial = TestFunction::from_terms("g", 3, 1.0, vec![Term::radial(1.0, Profile::Gauss { width: 1.0 })]);
        let (_, ang) = split_dirichlet_radial_angular(&d, &radial, &w, &[POLAR_BOUND, AZIMUTHAL_BOUND]).unwrap();
        assert!(ang.abs() < 1e-12);
        let cos1 = TestFunction::from_fn("cos t1", 3, crate::quadrature::Support::Full, false, |x, g| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let c = x[0] / r;
            for k in 0..3 {
                let e = if k == 0 { 1.0 } else { 0.0 };
                g[k] = (e - c * x[k] / r) / r;
            }
            c
        });
        let (rad, _) = split_dirichlet_radial_angular(&d, &cos1, &w, &[POLAR_BOUND, AZIMUTHAL_BOUND]).unwrap();
        assert!(rad.abs() < 1e-12);
        // x1 in n = 3: the split bound dominates the full W* form
        let x1 = linear(3, 0);
        let wr = crate::weights::radial_weight(&d).unwrap();
        let (r, a) = split_dirichlet_radial_angular(&d, &x1, &wr, &[POLAR_BOUND, AZIMUTHAL_BOUND]).unwrap();
        let full = weighted_dirichlet(&d, &composite_wstar(&wr), &x1).unwrap();
        assert!(r + a <= full * (1.0 + 1e-9), "{r} + {a} vs {full}");
    }
}
