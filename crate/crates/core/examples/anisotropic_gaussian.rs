//! Gaussian Poincare inequality with an anisotropic covariance: linear test
//! functions along the top eigenvector are sharp, the others are not.

use isopoincare::inequality::suite::rotated_covariance;
use isopoincare::inequality::{check_gaussian_anisotropic, CheckConfig, TestCorpus};
use nalgebra::DMatrix;

fn main() {
    let cfg = CheckConfig::default();
    let cases = [
        ("diag(1,4)", DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]))),
        ("rotated", rotated_covariance()),
    ];
    for (name, v) in cases {
        let corpus = TestCorpus::standard(2, 4, 7);
        let reports = check_gaussian_anisotropic(&v, &[0.5, -1.0], &corpus, &cfg).unwrap();
        let worst = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
        println!("{name}: {} functions, all pass {}, max ratio {worst:.6}", reports.len(), reports.iter().all(|r| r.pass));
        for r in reports.iter().filter(|r| r.witness.len() <= 3) {
            println!("  {:<4} ratio {:.6}", r.witness, r.ratio);
        }
    }
}
