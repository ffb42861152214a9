//! Closed-form diffusion weights against the quadrature definition, and the
//! steady-state residual of each.

use isopoincare::weights::{closed_form_weight, steady_state_residual, weight_from_density_kok};
use isopoincare::IsotropicDensity;

fn main() {
    let specs = [
        "gaussian:sigma=2,n=1",
        "cauchy:beta=3,n=2",
        "exponential:beta=1,n=3",
        "barenblatt:a=1,p=2,n=2",
    ];
    for spec in specs {
        let d = IsotropicDensity::from_spec(spec).unwrap();
        let k = closed_form_weight(&d).unwrap();
        let hi = if d.is_compact() { d.support_radius() } else { 3.0 * d.scale() };
        println!("{}", d.label());
        println!("  {:>6} {:>14} {:>14} {:>10} {:>10}", "rho", "K closed", "K quadrature", "rel err", "residual");
        for i in 0..6 {
            let rho = hi * (i as f64 + 0.5) / 6.0;
            let q = weight_from_density_kok(&d, rho).unwrap();
            let kc = k.eval(rho);
            let h = (1e-3 * d.scale()).min(0.2 * rho).min(0.2 * (d.support_radius() - rho));
            let res = steady_state_residual(&d, &k, rho, h);
            println!("  {rho:>6.3} {kc:>14.8} {q:>14.8} {:>10.1e} {res:>10.1e}", (q - kc).abs() / kc);
        }
    }
}
