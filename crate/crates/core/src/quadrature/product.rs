//! Tensor Gauss-Legendre rules for product densities.

use crate::densities::Density1d;
use crate::error::{Error, Result};

use super::legendre::gauss_legendre_on;

/// Largest dimension for the tensor product rule.
pub const MAX_PRODUCT_DIM: usize = 4;

/// Nodes and weights representing the measure `f(x) dx` of a 1-D density.
#[derive(Clone, Debug)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Panel edges on `[0, 1]`: uniform, plus geometric grading toward the ends
/// flagged in `grade`.
fn panel_edges(uniform: usize, grade: (bool, bool)) -> Vec<f64> {
    const LEVELS: i32 = 5;
    let mut e: Vec<f64> = (0..=uniform).map(|k| k as f64 / uniform as f64).collect();
    let h0 = 1.0 / uniform as f64;
    for l in 1..=LEVELS {
        let h = h0 * 0.2f64.powi(l);
        if grade.0 {
            e.push(h);
        }
        if grade.1 {
            e.push(1.0 - h);
        }
    }
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

impl Rule1d {
    /// Composite rule with roughly `nodes` points. Finite ends are graded;
    /// infinite ends use `x = c +- s t/(1-t)` with the split at the mean.
    pub fn for_density(f: &Density1d, nodes: usize) -> Result<Self> {
        let (a, b) = f.support();
        let edges = match (a.is_finite(), b.is_finite()) {
            (true, true) => panel_edges(2, (true, true)),
            (false, false) => panel_edges((nodes / 16).clamp(3, 12), (false, false)),
            _ => panel_edges(12, (true, false)),
        };
        let panels = edges.len() - 1;
        let pieces = if a.is_finite() || b.is_finite() { 1 } else { 2 };
        let order = (nodes / (panels * pieces)).max(8);
        let mut out = Rule1d {
            nodes: Vec::new(),
            weights: Vec::new(),
        };
        let s = f.scale();
        // pieces: (map t -> x, dx/dt), t in (0, 1)
        let mut push = |map: &dyn Fn(f64) -> (f64, f64)| {
            for p in 0..panels {
                let (t, w) = gauss_legendre_on(order, edges[p], edges[p + 1]);
                for (t, w) in t.into_iter().zip(w) {
                    let (x, jac) = map(t);
                    let pdf = f.pdf(x);
                    if pdf > 0.0 && x.is_finite() {
                        out.nodes.push(x);
                        out.weights.push(w * jac * pdf);
                    }
                }
            }
        };
        match (a.is_finite(), b.is_finite()) {
            (true, true) => push(&|t| (a + (b - a) * t, b - a)),
            (true, false) => push(&|t| (a + s * t / (1.0 - t), s / ((1.0 - t) * (1.0 - t)))),
            (false, true) => push(&|t| (b - s * t / (1.0 - t), s / ((1.0 - t) * (1.0 - t)))),
            (false, false) => {
                let c = f.mean();
                push(&|t| (c - s * t / (1.0 - t), s / ((1.0 - t) * (1.0 - t))));
                push(&|t| (c + s * t / (1.0 - t), s / ((1.0 - t) * (1.0 - t))));
            }
        }
        let total: f64 = out.weights.iter().sum();
        if !((total - 1.0).abs() < 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "product rule for {} captures mass {total}",
                f.label()
            )));
        }
        out.weights.iter_mut().for_each(|w| *w /= total);
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Tensor product of 1-D rules.
#[derive(Clone, Debug)]
pub struct ProductRule {
    pub factors: Vec<Rule1d>,
}

impl ProductRule {
    pub fn new(factors: Vec<Rule1d>) -> Result<Self> {
        if factors.is_empty() || factors.len() > MAX_PRODUCT_DIM {
            return Err(Error::InvalidParameter(format!(
                "product rule supports 1..={MAX_PRODUCT_DIM} factors, got {}",
                factors.len()
            )));
        }
        Ok(Self { factors })
    }

    /// Default node counts per factor for dimension `n`.
    pub fn default_nodes(n: usize) -> usize {
        match n {
            1 => 512,
            2 => 256,
            3 => 96,
            _ => 40,
        }
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    /// `sum_k w_k g(y_k, idx_k)` over the tensor grid; `idx` holds the 1-D
    /// node indices so callers can look up precomputed per-factor values.
    pub fn sum<const K: usize>(&self, mut g: impl FnMut(&[f64], &[usize]) -> [f64; K]) -> [f64; K] {
        let n = self.dim();
        let mut idx = [0usize; MAX_PRODUCT_DIM];
        let mut y = [0.0; MAX_PRODUCT_DIM];
        let mut acc = [0.0; K];
        loop {
            let mut w = 1.0;
            for i in 0..n {
                y[i] = self.factors[i].nodes[idx[i]];
                w *= self.factors[i].weights[idx[i]];
            }
            let v = g(&y[..n], &idx[..n]);
            for k in 0..K {
                acc[k] += w * v[k];
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return acc;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < self.factors[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_moments() {
        let r = Rule1d::for_density(&Density1d::standard_normal(), 256).unwrap();
        let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
        let m4: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m2 - 1.0).abs() < 1e-12, "{:e} {} {}", m2 - 1.0, r.len(), Density1d::standard_normal().scale());
        assert!((m4 - 3.0).abs() < 1e-11);
    }

    #[test]
    fn sine_rule_mean() {
        let r = Rule1d::for_density(&Density1d::sine_power(1), 96).unwrap();
        let m: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x).sum();
        assert!((m - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn tensor_sum() {
        let g = Rule1d::for_density(&Density1d::standard_normal(), ProductRule::default_nodes(2)).unwrap();
        let p = ProductRule::new(vec![g.clone(), g]).unwrap();
        let [v] = p.sum(|y, _| [y[0] * y[0] * y[1] * y[1]]);
        assert!((v - 1.0).abs() < 1e-12, "{:e}", v - 1.0);
        assert!(ProductRule::new(vec![]).is_err());
    }
}
