use std::fmt;
use std::sync::Arc;

use super::{FPState, Solver};
use crate::error::{Error, Result};

/// Convex `phi` together with its second derivative.
#[derive(Clone)]
pub struct ConvexPhi {
    pub label: String,
    pub phi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub phi2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ConvexPhi {
    pub fn new(
        label: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            phi: Arc::new(phi),
            phi2: Arc::new(phi2),
        }
    }
}

impl fmt::Debug for ConvexPhi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConvexPhi({})", self.label)
    }
}

/// Functionals `Theta(F) = int f_inf phi(F)`.
#[derive(Clone, Debug)]
pub enum ThetaKind {
    /// `phi(r) = (r-1)^2`
    Chi2,
    /// `phi(r) = r log r`, written as `r log r - r + 1` so each term is
    /// nonnegative (the difference integrates to zero).
    Entropy,
    /// `phi(r) = (sqrt r - 1)^2`
    Hellinger2,
    Custom(ConvexPhi),
}

impl ThetaKind {
    pub fn key(&self) -> &str {
        match self {
            ThetaKind::Chi2 => "chi2",
            ThetaKind::Entropy => "entropy",
            ThetaKind::Hellinger2 => "hellinger2",
            ThetaKind::Custom(p) => &p.label,
        }
    }

    fn phi(&self, r: f64) -> f64 {
        match self {
            ThetaKind::Chi2 => (r - 1.0) * (r - 1.0),
            ThetaKind::Entropy => {
                if r == 0.0 {
                    1.0
                } else {
                    // (1+d) ln(1+d) - d, accurate near r = 1
                    let d = r - 1.0;
                    r * d.ln_1p() - d
                }
            }
            ThetaKind::Hellinger2 => {
                let d = (r - 1.0) / (r.sqrt() + 1.0);
                d * d
            }
            ThetaKind::Custom(p) => (p.phi)(r),
        }
    }

    fn needs_positive(&self) -> bool {
        matches!(self, ThetaKind::Entropy)
    }
}

/// Face value of `F` for the dissipation sums. `((sqrt a + sqrt b)/2)^2` keeps
/// `(dF)^2 / F_face = 4 (d sqrt F)^2` exact in the discrete setting.
fn face_value(a: f64, b: f64) -> f64 {
    let m = 0.5 * (a.sqrt() + b.sqrt());
    m * m
}

impl Solver {
    fn checked_ratio(&self, s: &FPState, kind: &ThetaKind) -> Result<Vec<f64>> {
        if s.values.len() != self.cells() {
            return Err(Error::InvalidParameter(format!(
                "state has {} cells, grid has {}",
                s.values.len(),
                self.cells()
            )));
        }
        let f = self.ratio(s);
        if kind.needs_positive() {
            if let Some(i) = f.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "entropy needs F > 0, got {} in cell {i}",
                    f[i]
                )));
            }
        }
        Ok(f)
    }

    /// `sum_i V_i f_inf,i phi(F_i)`.
    pub fn functional_theta(&self, s: &FPState, kind: &ThetaKind) -> Result<f64> {
        let f = self.checked_ratio(s, kind)?;
        Ok(self
            .eq_masses()
            .iter()
            .zip(&f)
            .map(|(m, r)| m * kind.phi(*r))
            .sum())
    }

    /// Discrete `int K f_inf |grad F|^2 phi''(F)`.
    pub fn dissipation_i_theta(&self, s: &FPState, kind: &ThetaKind) -> Result<f64> {
        let f = self.checked_ratio(s, kind)?;
        let mut total = 0.0;
        for (j, t) in self.transmissibility.iter().enumerate() {
            let (a, b) = (f[j], f[j + 1]);
            let d2 = (b - a) * (b - a);
            let w = match kind {
                ThetaKind::Chi2 => 2.0,
                ThetaKind::Entropy => {
                    if d2 == 0.0 {
                        0.0
                    } else {
                        1.0 / face_value(a, b)
                    }
                }
                ThetaKind::Hellinger2 => {
                    if d2 == 0.0 {
                        0.0
                    } else {
                        0.5 / face_value(a, b).powf(1.5)
                    }
                }
                ThetaKind::Custom(p) => (p.phi2)(0.5 * (a + b)),
            };
            total += t * d2 * w;
        }
        Ok(total)
    }

    /// Entropy dissipation as `4 int K f_inf |grad sqrt F|^2`.
    pub fn entropy_dissipation_sqrt(&self, s: &FPState) -> Result<f64> {
        let f = self.checked_ratio(s, &ThetaKind::Entropy)?;
        Ok(self
            .transmissibility
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let d = f[j + 1].sqrt() - f[j].sqrt();
                4.0 * t * d * d
            })
            .sum())
    }

    /// `||f - f_inf||_1` over the grid.
    pub fn l1_distance(&self, s: &FPState) -> f64 {
        s.values
            .iter()
            .zip(&self.feq)
            .zip(&self.grid.volumes)
            .map(|((f, e), v)| (f - e).abs() * v)
            .sum()
    }
}
