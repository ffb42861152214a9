//! Seeded corpora of smooth test functions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::quadrature::test_function::{Profile, Term, MAX_DIM};
use crate::quadrature::{Support, TestFunction};

/// Smallest corpus size.
pub const MIN_MEMBERS: usize = 40;

/// Fewest seeded random mixtures in a corpus.
pub const MIN_RANDOM: usize = 10;

/// A list of test functions plus the seed that produced the random members.
#[derive(Clone, Debug)]
pub struct TestCorpus {
    pub seed: u64,
    pub members: Vec<TestFunction>,
}

fn axis(k: usize) -> [u8; MAX_DIM] {
    let mut p = [0; MAX_DIM];
    p[k] = 1;
    p
}

fn powers(list: &[(usize, u8)]) -> [u8; MAX_DIM] {
    let mut p = [0; MAX_DIM];
    for &(k, e) in list {
        p[k] = e;
    }
    p
}

fn with_profile(coeff: f64, p: [u8; MAX_DIM], center: [f64; MAX_DIM], profile: Profile) -> Term {
    Term::Radial {
        coeff,
        powers: p,
        center,
        profile,
    }
}

fn wave(dim: usize, raw: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
    let mut k = [0.0; MAX_DIM];
    k[..dim].copy_from_slice(&raw[..dim]);
    k
}

fn point(dim: usize, raw: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
    wave(dim, raw)
}

struct Builder {
    dim: usize,
    out: Vec<TestFunction>,
}

impl Builder {
    fn add(&mut self, id: &str, tags: &[&str], terms: Vec<Term>) {
        self.out.push(TestFunction::from_terms(id, self.dim, 1.0, terms).with_tags(tags));
    }
}

/// Deterministic members in unit coordinates: polynomials up to
/// `max_degree`, polynomial-times-Gaussian and Lorentzian terms, C^2 bumps,
/// smoothed spherical harmonics, localized waves and sigmoids.
fn deterministic(dim: usize, max_degree: u32) -> Vec<TestFunction> {
    let mut b = Builder { dim, out: Vec::new() };
    let two = dim >= 2;
    let last = dim - 1;
    let zero = [0.0; MAX_DIM];

    if max_degree >= 1 {
        for k in 0..dim {
            b.add(&format!("x{}", k + 1), &["linear"], vec![Term::monomial(1.0, axis(k))]);
        }
        if two {
            b.add("x1-0.5x2", &["linear"], vec![Term::monomial(1.0, axis(0)), Term::monomial(-0.5, axis(1))]);
        }
    }
    if max_degree >= 2 {
        b.add("x1^2", &["quadratic", "radial"], vec![Term::monomial(1.0, powers(&[(0, 2)]))]);
        let sq: Vec<Term> = (0..dim).map(|k| Term::monomial(1.0, powers(&[(k, 2)]))).collect();
        b.add("|x|^2", &["quadratic", "radial"], sq);
        b.add("x1^2+x1", &["quadratic"], vec![Term::monomial(1.0, powers(&[(0, 2)])), Term::monomial(1.0, axis(0))]);
        if two {
            b.add("x1*x2", &["quadratic", "angular"], vec![Term::monomial(1.0, powers(&[(0, 1), (1, 1)]))]);
        }
    }
    if max_degree >= 3 {
        b.add("x1^3", &["cubic"], vec![Term::monomial(1.0, powers(&[(0, 3)]))]);
        b.add("x1^3-3x1", &["cubic"], vec![Term::monomial(1.0, powers(&[(0, 3)])), Term::monomial(-3.0, axis(0))]);
        if two {
            b.add("x1*x2^2", &["cubic", "mixed"], vec![Term::monomial(1.0, powers(&[(0, 1), (1, 2)]))]);
        }
    }

    for w in [0.5, 1.0, 2.0] {
        b.add(&format!("gauss(w={w})"), &["radial", "bump"], vec![Term::radial(1.0, Profile::Gauss { width: w })]);
    }
    b.add("x1*gauss(w=1.5)", &["mixed"], vec![with_profile(1.0, axis(0), zero, Profile::Gauss { width: 1.5 })]);
    b.add("x1^2*gauss(w=1)", &["mixed"], vec![with_profile(1.0, powers(&[(0, 2)]), zero, Profile::Gauss { width: 1.0 })]);
    b.add("x1^3*gauss(w=2)", &["mixed"], vec![with_profile(1.0, powers(&[(0, 3)]), zero, Profile::Gauss { width: 2.0 })]);
    b.add(
        "gauss(c,w=0.8)",
        &["mixed", "bump"],
        vec![with_profile(1.0, [0; MAX_DIM], point(dim, [0.7, -0.4, 0.3, 0.2]), Profile::Gauss { width: 0.8 })],
    );
    if two {
        b.add(
            "x1*x2*gauss(w=1.5)",
            &["mixed", "angular"],
            vec![with_profile(1.0, powers(&[(0, 1), (1, 1)]), zero, Profile::Gauss { width: 1.5 })],
        );
    }

    b.add("lorentz(w=1)", &["radial"], vec![Term::radial(1.0, Profile::Lorentz { width: 1.0 })]);
    b.add("x1*lorentz(w=1)", &["mixed"], vec![with_profile(1.0, axis(0), zero, Profile::Lorentz { width: 1.0 })]);
    b.add("x1^2*lorentz(w=2)", &["mixed"], vec![with_profile(1.0, powers(&[(0, 2)]), zero, Profile::Lorentz { width: 2.0 })]);

    for (r0, r1) in [(0.0, 1.5), (0.5, 2.0), (1.0, 3.0)] {
        b.add(&format!("bump({r0},{r1})"), &["radial", "bump"], vec![Term::radial(1.0, Profile::Bump { r0, r1 })]);
    }
    b.add(
        "bump(c,0,1.2)",
        &["mixed", "bump"],
        vec![with_profile(1.0, [0; MAX_DIM], point(dim, [0.8, 0.3, -0.2, 0.1]), Profile::Bump { r0: 0.0, r1: 1.2 })],
    );
    b.add("window(1,3)", &["radial", "bump"], vec![Term::radial(1.0, Profile::Window { r0: 1.0, r1: 3.0 })]);
    b.add("x1*window(0.5,2.5)", &["mixed", "bump"], vec![with_profile(1.0, axis(0), zero, Profile::Window { r0: 0.5, r1: 2.5 })]);

    let mut axes = vec![0];
    if two {
        axes.push(last - 1);
        axes.push(last);
    }
    axes.dedup();
    for a in axes {
        b.add(&format!("harmonic(x{})", a + 1), &["angular"], vec![Term::Angular { coeff: 1.0, axis: a }]);
    }

    b.add(
        "sin(x1)*gauss(w=3)",
        &["mixed"],
        vec![Term::Wave { amp: 1.0, k: wave(dim, [1.0, 0.0, 0.0, 0.0]), phase: 0.0, width: 3.0 }],
    );
    b.add(
        "cos(0.5x1+0.7x2)*gauss(w=2.5)",
        &["mixed"],
        vec![Term::Wave { amp: 1.0, k: wave(dim, [0.5, 0.7, -0.3, 0.2]), phase: 0.5 * PI, width: 2.5 }],
    );
    b.add("tanh(x1)", &["mixed"], vec![Term::Tanh { amp: 1.0, k: wave(dim, [1.0, 0.0, 0.0, 0.0]), offset: 0.0 }]);
    b.add(
        "tanh(0.8x1-0.6x2+0.2)",
        &["mixed"],
        vec![Term::Tanh { amp: 1.0, k: wave(dim, [0.8, -0.6, 0.4, -0.2]), offset: 0.2 }],
    );
    b.out
}

fn random_term(dim: usize, rng: &mut ChaCha8Rng) -> Term {
    let coeff = rng.gen_range(-1.0..1.0);
    let mut v = [0.0; MAX_DIM];
    for c in v.iter_mut().take(dim) {
        *c = rng.gen_range(-1.0..1.0);
    }
    match rng.gen_range(0..5) {
        0 => with_profile(coeff, [0; MAX_DIM], v, Profile::Gauss { width: rng.gen_range(0.5..2.0) }),
        1 => Term::Wave {
            amp: coeff,
            k: v.map(|c| 2.0 * c),
            phase: rng.gen_range(0.0..2.0 * PI),
            width: rng.gen_range(1.0..3.0),
        },
        2 => Term::Tanh {
            amp: coeff,
            k: v,
            offset: rng.gen_range(-0.5..0.5),
        },
        3 => {
            let mut c = v;
            c.iter_mut().for_each(|x| *x *= 0.5);
            with_profile(coeff, [0; MAX_DIM], c, Profile::Bump { r0: 0.0, r1: rng.gen_range(1.0..2.5) })
        }
        _ => with_profile(coeff, [0; MAX_DIM], v, Profile::Lorentz { width: rng.gen_range(0.5..2.0) }),
    }
}

/// `count` random mixtures of three bounded terms each.
fn random_mixtures(dim: usize, count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let terms = (0..3).map(|_| random_term(dim, &mut rng)).collect();
            TestFunction::from_terms(format!("random#{i:02}"), dim, 1.0, terms).with_tags(&["random", "mixed"])
        })
        .collect()
}

impl TestCorpus {
    /// Default corpus on `R^dim` in unit coordinates (apply [`TestCorpus::scaled`]
    /// or [`TestCorpus::recentered`] to match a density).
    pub fn standard(dim: usize, max_degree: u32, seed: u64) -> Self {
        let mut members = deterministic(dim, max_degree);
        let extra = MIN_RANDOM.max(MIN_MEMBERS.saturating_sub(members.len()));
        members.extend(random_mixtures(dim, extra, seed));
        Self { seed, members }
    }

    /// The bounded members of the standard corpus.
    pub fn bounded(dim: usize, seed: u64) -> Self {
        let mut c = Self::standard(dim, 0, seed);
        c.members.retain(|m| m.bounded);
        c
    }

    /// Functions vanishing with their gradients on `|x| <= radius`, for
    /// densities supported in `|x| < top` (possibly infinite). `scale` sets
    /// the length unit of the profiles multiplied onto the cutoff.
    pub fn outside_ball(dim: usize, radius: f64, top: f64, scale: f64, max_degree: u32, seed: u64) -> Self {
        let room = if top.is_finite() { top - radius } else { 2.0 * scale };
        let width = if top.is_finite() { 0.4 * room } else { scale };
        let cut = TestFunction::from_terms(
            format!("ramp({radius:.4},{:.4})", radius + width),
            dim,
            1.0,
            vec![Term::radial(1.0, Profile::Ramp { r0: radius, r1: radius + width })],
        )
        .with_tags(&["boundary-supported", "radial"])
        .with_support(Support::OutsideBall(radius));

        let mut members = vec![cut.clone()];
        for (a, b) in [(0.05, 0.5), (0.2, 0.9), (0.5, 1.5)] {
            let (r0, r1) = (radius + a * room, radius + b * room);
            if top.is_finite() && r1 >= top {
                continue;
            }
            members.push(
                TestFunction::from_terms(
                    format!("shell({r0:.4},{r1:.4})"),
                    dim,
                    1.0,
                    vec![Term::radial(1.0, Profile::Bump { r0, r1 })],
                )
                .with_tags(&["boundary-supported", "bump", "radial"])
                .with_support(Support::OutsideBall(radius)),
            );
        }
        if top.is_finite() {
            let r0 = radius + 0.3 * room;
            members.push(
                TestFunction::from_terms(
                    format!("shell({r0:.4},{top:.4})"),
                    dim,
                    1.0,
                    vec![Term::radial(1.0, Profile::Bump { r0, r1: top })],
                )
                .with_tags(&["boundary-supported", "bump", "radial"])
                .with_support(Support::OutsideBall(radius)),
            );
        }
        let base = Self::standard(dim, max_degree, seed).scaled(scale);
        for m in &base.members {
            let mut p = cut.times(m);
            p.tags.push("boundary-supported".into());
            members.push(p.with_support(Support::OutsideBall(radius)));
        }
        Self { seed, members }
    }

    /// Bounded members plus functions concentrated near the sphere
    /// `|x| = radius`, inside it, and beyond `radius + scale`.
    pub fn hybrid(dim: usize, radius: f64, scale: f64, seed: u64) -> Self {
        let mut c = Self::bounded(dim, seed).scaled(scale);
        let d = 0.5 * scale.min(radius.max(scale));
        let lo = (radius - d).max(0.0);
        let mut e1 = [0.0; MAX_DIM];
        e1[0] = radius;
        let add = |c: &mut TestCorpus, id: String, tags: &[&str], terms: Vec<Term>| {
            c.members.push(TestFunction::from_terms(id, dim, 1.0, terms).with_tags(tags));
        };
        add(&mut c, format!("straddle-bump({lo:.4},{:.4})", radius + d), &["straddling", "bump", "radial"], vec![
            Term::radial(1.0, Profile::Bump { r0: lo, r1: radius + d }),
        ]);
        add(&mut c, format!("straddle-gauss(R e1,w={d:.4})"), &["straddling", "mixed"], vec![with_profile(
            1.0,
            [0; MAX_DIM],
            e1,
            Profile::Gauss { width: d },
        )]);
        add(&mut c, "straddle-window*x1".into(), &["straddling", "mixed"], vec![with_profile(
            1.0 / scale,
            axis(0),
            [0.0; MAX_DIM],
            Profile::Window { r0: lo, r1: radius + d },
        )]);
        add(&mut c, "straddle-harmonic".into(), &["straddling", "angular"], vec![
            Term::Angular { coeff: 1.0, axis: dim - 1 },
            Term::radial(0.5, Profile::Bump { r0: lo, r1: radius + d }),
        ]);
        if radius > 0.0 {
            c.members.push(
                TestFunction::from_terms(
                    format!("inner-bump(0,{:.4})", 0.9 * radius),
                    dim,
                    1.0,
                    vec![Term::radial(1.0, Profile::Bump { r0: 0.0, r1: 0.9 * radius })],
                )
                .with_tags(&["radial", "bump"])
                .with_support(Support::InsideBall(0.9 * radius)),
            );
        }
        let (r0, r1) = (radius + scale, radius + 3.0 * scale);
        c.members.push(
            TestFunction::from_terms(
                format!("tail-bump({r0:.4},{r1:.4})"),
                dim,
                1.0,
                vec![Term::radial(1.0, Profile::Bump { r0, r1 })],
            )
            .with_tags(&["boundary-supported", "bump", "radial"])
            .with_support(Support::OutsideBall(r0)),
        );
        c
    }

    /// Every member evaluated at `x / s`.
    pub fn scaled(&self, s: f64) -> Self {
        let n = self.dim();
        self.recentered(&vec![0.0; n], &vec![s; n])
    }

    /// Every member evaluated at `(x - center) / scales`.
    pub fn recentered(&self, center: &[f64], scales: &[f64]) -> Self {
        Self {
            seed: self.seed,
            members: self.members.iter().map(|m| m.recentered(center, scales)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.members.first().map_or(0, |m| m.dim)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TestFunction> {
        self.members.iter()
    }

    /// Gradient self-test of every member on the ball of radius `radius`,
    /// plus the support check for members that declare one.
    pub fn self_test(&self, radius: f64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        for m in &self.members {
            m.self_test(&mut rng, 12, radius)?;
            m.check_support(&mut rng, 12)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_determinism() {
        for dim in 1..=4 {
            for deg in 0..=3 {
                let c = TestCorpus::standard(dim, deg, 7);
                assert!(c.len() >= MIN_MEMBERS, "dim {dim} deg {deg}: {}", c.len());
                assert!(c.iter().filter(|m| m.has_tag("random")).count() >= MIN_RANDOM);
                let again = TestCorpus::standard(dim, deg, 7);
                let x = [0.3, -0.7, 1.1, 0.2];
                for (a, b) in c.iter().zip(again.iter()) {
                    assert_eq!(a.id, b.id);
                    assert_eq!(a.eval(&x[..dim]), b.eval(&x[..dim]));
                }
            }
        }
    }

    #[test]
    fn gradients_pass_self_test() {
        for dim in 1..=3 {
            TestCorpus::standard(dim, 3, 11).scaled(1.7).self_test(4.0).unwrap();
            TestCorpus::outside_ball(dim, 2.0, f64::INFINITY, 1.0, 2, 11).self_test(5.0).unwrap();
            TestCorpus::outside_ball(dim, 0.5, 1.0, 1.0, 2, 11).self_test(1.0).unwrap();
            TestCorpus::hybrid(dim, 1.5, 1.0, 11).self_test(4.0).unwrap();
        }
    }

    #[test]
    fn outside_members_vanish_inside() {
        let c = TestCorpus::outside_ball(3, 2.0, f64::INFINITY, 1.0, 3, 3);
        assert!(c.len() >= MIN_MEMBERS);
        let mut g = [0.0; 3];
        for m in c.iter() {
            assert_eq!(m.support, Support::OutsideBall(2.0));
            assert_eq!(m.eval_grad(&[1.0, -1.0, 1.2], &mut g), 0.0);
            assert_eq!(g, [0.0; 3]);
        }
    }

    #[test]
    fn hybrid_members_are_bounded() {
        let c = TestCorpus::hybrid(2, 2.7, 1.0, 5);
        assert!(c.len() >= MIN_MEMBERS);
        assert!(c.iter().all(|m| m.bounded));
        assert!(c.iter().any(|m| m.has_tag("straddling")));
    }
}
