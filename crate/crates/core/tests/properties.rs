use isopoincare::fpsolver::{build_solver, thomas, DtPolicy, GridSpec, Perturbation, PerturbationKind, ThetaKind};
use isopoincare::inequality::suite::corpus_isotropic;
use isopoincare::quadrature::{variance, weighted_dirichlet};
use isopoincare::weights::{
    angular_weight, cauchy_alpha_optimum, cauchy_h, composite_wstar, diffusion_weight, AZIMUTHAL_BOUND, POLAR_BOUND,
};
use isopoincare::IsotropicDensity;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn target(k: usize) -> IsotropicDensity {
    let spec = ["gaussian:sigma=1,n=2", "cauchy:beta=3,n=2", "exponential:beta=1,n=2", "barenblatt:a=1,p=2,n=2"][k];
    IsotropicDensity::from_spec(spec).unwrap()
}

fn kind(k: usize) -> PerturbationKind {
    [PerturbationKind::Tanh, PerturbationKind::Bump, PerturbationKind::Cos][k]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn variance_ignores_shift(k in 0usize..4, m in 0usize..40, c in -50.0f64..50.0) {
        let d = target(k);
        let corpus = corpus_isotropic(&d, 11);
        let phi = &corpus.members[m % corpus.len()];
        let v0 = variance(&d, phi).unwrap();
        let v1 = variance(&d, &phi.affine(1.0, c)).unwrap();
        prop_assert!((v1 - v0).abs() <= 1e-9 * v0.max(1e-12), "{v0} {v1}");
    }

    #[test]
    fn ratio_is_scale_invariant(k in 0usize..4, m in 0usize..40, s in 0.1f64..10.0, c in -5.0f64..5.0) {
        let d = target(k);
        let w = diffusion_weight(&d).unwrap();
        let corpus = corpus_isotropic(&d, 11);
        let phi = &corpus.members[m % corpus.len()];
        let r0 = variance(&d, phi).unwrap() / weighted_dirichlet(&d, &w, phi).unwrap();
        let psi = phi.affine(s, c);
        let r1 = variance(&d, &psi).unwrap() / weighted_dirichlet(&d, &w, &psi).unwrap();
        prop_assume!(r0.is_finite());
        prop_assert!((r1 - r0).abs() <= 1e-9 * r0, "{r0} {r1}");
    }

    #[test]
    fn dirichlet_is_linear_in_weight(k in 0usize..4, m in 0usize..40, s in 0.01f64..100.0) {
        let d = target(k);
        let w = diffusion_weight(&d).unwrap();
        let corpus = corpus_isotropic(&d, 11);
        let phi = &corpus.members[m % corpus.len()];
        let e0 = weighted_dirichlet(&d, &w, phi).unwrap();
        let e1 = weighted_dirichlet(&d, &w.scaled(s), phi).unwrap();
        prop_assert!((e1 - s * e0).abs() <= 1e-12 * s * e0.max(1e-300));
    }

    #[test]
    fn wstar_dominates_both_parts(k in 0usize..4, rho in 0.0f64..0.999) {
        let d = target(k);
        let w = diffusion_weight(&d).unwrap();
        let ws = composite_wstar(&w);
        prop_assert!(ws.eval(rho) >= w.eval(rho));
        prop_assert!(ws.eval(rho) >= AZIMUTHAL_BOUND * rho * rho);
    }

    #[test]
    fn angular_weights_stay_below_bounds(n in 2usize..6, u in 0.0001f64..0.9999) {
        for i in 1..n {
            let (top, bound) = if i == n - 1 { (2.0 * std::f64::consts::PI, AZIMUTHAL_BOUND) } else { (std::f64::consts::PI, POLAR_BOUND) };
            let p = angular_weight(i, n, u * top).unwrap();
            prop_assert!(p >= 0.0 && p <= bound * (1.0 + 1e-12), "i={i} n={n} P={p}");
        }
    }

    #[test]
    fn alpha_optimum_is_a_maximum(n in 1usize..4, excess in 0.01f64..6.0, a in 0.5f64..1.0) {
        let beta = (n as f64 + 1.0) / 2.0 + excess;
        let o = cauchy_alpha_optimum(beta, n).unwrap();
        prop_assert!(cauchy_h(beta, n, a) <= o.h + 1e-12);
        prop_assert!((o.h - o.h_numeric).abs() <= 1e-9 * o.h.abs().max(1.0));
    }

    #[test]
    fn thomas_matches_dense_solve(m in 2usize..30, seed in any::<u64>()) {
        let mut x = seed;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let lower: Vec<f64> = (0..m).map(|_| next()).collect();
        let upper: Vec<f64> = (0..m).map(|_| next()).collect();
        let diag: Vec<f64> = (0..m).map(|_| 2.0 + next()).collect();
        let rhs: Vec<f64> = (0..m).map(|_| next()).collect();
        let sol = thomas(&lower, &diag, &upper, &rhs).unwrap();
        let a = DMatrix::from_fn(m, m, |i, j| {
            if i == j { diag[i] } else if j + 1 == i { lower[i] } else if i + 1 == j { upper[i] } else { 0.0 }
        });
        let dense = a.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for (s, e) in sol.iter().zip(dense.iter()) {
            prop_assert!((s - e).abs() <= 1e-10 * (1.0 + e.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn relaxation_keeps_mass_sign_and_monotonicity(k in 0usize..4, p in 0usize..3, eps in 0.0f64..0.2) {
        let d = target(k);
        let solver = build_solver(&d, &diffusion_weight(&d).unwrap(), &GridSpec::new(120)).unwrap();
        let s0 = solver.perturbed(&Perturbation::new(kind(p), eps).unwrap());
        let (s, trace) = solver.evolve(&s0, 0.2, DtPolicy::new(1e-2, 1).unwrap()).unwrap();
        prop_assert!((s.mass - s0.mass).abs() <= 1e-12);
        prop_assert!(s.values.iter().all(|v| *v >= 0.0));
        prop_assert!(trace.all_monotone());
        prop_assert!(trace.hellinger_below_chi2());
        let h = solver.functional_theta(&s, &ThetaKind::Hellinger2).unwrap();
        let chi = solver.functional_theta(&s, &ThetaKind::Chi2).unwrap();
        prop_assert!(h <= chi + 1e-15);
    }
}
