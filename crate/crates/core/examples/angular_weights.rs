//! Angular weights of the hyperspherical split and their sup bounds.

use std::f64::consts::PI;

use isopoincare::weights::{angular_weight, AZIMUTHAL_BOUND, POLAR_BOUND};

fn main() {
    for n in 2..=4 {
        for i in 1..n {
            let top = if i == n - 1 { 2.0 * PI } else { PI };
            let bound = if i == n - 1 { AZIMUTHAL_BOUND } else { POLAR_BOUND };
            let max = (1..2000)
                .map(|k| angular_weight(i, n, top * k as f64 / 2000.0).unwrap())
                .fold(0.0, f64::max);
            println!("n={n} angle {i}: sup P = {max:.6}, bound {bound:.6}");
        }
    }
}
