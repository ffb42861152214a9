//! The `w = P/Q'` family: closed-form optimal alpha against golden-section
//! search, and the resulting weight coefficients.

use isopoincare::weights::{barenblatt_alpha_optimum, cauchy_alpha_optimum, optimal_cauchy_weight};

fn main() {
    println!("cauchy");
    println!("  {:>3} {:>5} {:>10} {:>10} {:>12} {:>12}", "n", "beta", "alpha", "numeric", "h", "1/(2h)");
    for n in 1..=3 {
        for beta in [1.25, 1.5, 2.0, 3.0, 5.0] {
            match cauchy_alpha_optimum(beta, n) {
                Ok(o) => println!(
                    "  {n:>3} {beta:>5} {:>10.6} {:>10.6} {:>12.6} {:>12.6}",
                    o.alpha,
                    o.alpha_numeric,
                    o.h,
                    o.coefficient()
                ),
                Err(e) => println!("  {n:>3} {beta:>5} {e}"),
            }
        }
    }
    println!("barenblatt");
    println!("  {:>3} {:>5} {:>10} {:>10} {:>12}", "n", "p", "alpha", "numeric", "h");
    for n in 1..=3 {
        for p in [1.5, 2.0, 3.0] {
            let o = barenblatt_alpha_optimum(p, n).unwrap();
            println!("  {n:>3} {p:>5} {:>10.6} {:>10.6} {:>12.6}", o.alpha, o.alpha_numeric, o.h);
        }
    }
    let w = optimal_cauchy_weight(3.0, 2).unwrap();
    println!("{} at rho = 0, 1, 2: {:.6} {:.6} {:.6}", w.label(), w.eval(0.0), w.eval(1.0), w.eval(2.0));
}
