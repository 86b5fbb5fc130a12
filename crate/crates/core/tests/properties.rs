use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spin7flow::g2spin7::{metric_vol_from_phi, model_phi};
use spin7flow::homogeneous::registry;
use spin7flow::stable::{
    assoc_metric, classify_pair, iota, model, pair_j, SixStructureClass, StructureKind,
};
use spin7flow::{KForm, Matrix, SymBilinear, Vector, VolumeForm};

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn form(dim: usize, degree: usize) -> impl Strategy<Value = KForm<f64>> {
    prop::collection::vec(-2.0..2.0f64, binomial(dim, degree))
        .prop_map(move |c| KForm::from_coeffs(dim, degree, c).unwrap())
}

fn vector(dim: usize) -> impl Strategy<Value = Vector<f64>> {
    prop::collection::vec(-2.0..2.0f64, dim).prop_map(Vector)
}

/// `1 + 0.4 X` with `X` uniform in `[-1, 1]`, kept away from singular.
fn gl(dim: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, dim * dim)
        .prop_map(move |x| Matrix::from_fn(dim, dim, |i, j| f64::from(u8::from(i == j)) + 0.4 * x[i * dim + j]))
        .prop_filter("well conditioned", |a| a.determinant().abs() > 0.2)
}

fn kind() -> impl Strategy<Value = StructureKind> {
    prop::sample::select(StructureKind::ALL.to_vec())
}

fn signs(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::bool::ANY, dim).prop_map(|b| b.into_iter().map(|x| if x { 1.0 } else { -1.0 }).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wedge_is_graded_commutative(k in 0usize..4, l in 0usize..4, seed in any::<u64>()) {
        let a = seeded(7, k, seed);
        let b = seeded(7, l, seed.rotate_left(17));
        let sign = if (k * l) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(a.wedge(&b).unwrap().distance(&b.wedge(&a).unwrap().scale(sign)) < 1e-10);
    }

    #[test]
    fn wedge_is_associative(a in form(7, 2), b in form(7, 1), c in form(7, 3)) {
        let left = a.wedge(&b).unwrap().wedge(&c).unwrap();
        let right = a.wedge(&b.wedge(&c).unwrap()).unwrap();
        prop_assert!(left.distance(&right) < 1e-9);
    }

    #[test]
    fn interior_is_an_antiderivation(a in form(7, 3), b in form(7, 2), v in vector(7)) {
        let lhs = a.wedge(&b).unwrap().interior(&v).unwrap();
        let rhs = a.interior(&v).unwrap().wedge(&b).unwrap().sub(&a.wedge(&b.interior(&v).unwrap()).unwrap());
        prop_assert!(lhs.distance(&rhs) < 1e-9);
    }

    #[test]
    fn pullback_is_functorial(a in form(6, 3), b in form(6, 2), x in gl(6), y in gl(6)) {
        let composed = a.pullback(&x.matmul(&y)).unwrap();
        let stepwise = a.pullback(&x).unwrap().pullback(&y).unwrap();
        prop_assert!(composed.distance(&stepwise) < 1e-9);
        let of_wedge = a.wedge(&b).unwrap().pullback(&x).unwrap();
        let wedge_of = a.pullback(&x).unwrap().wedge(&b.pullback(&x).unwrap()).unwrap();
        prop_assert!(of_wedge.distance(&wedge_of) < 1e-9);
    }

    #[test]
    fn hodge_pairs_against_the_volume(a in form(7, 3), b in form(7, 3), s in signs(7)) {
        let g = SymBilinear::diagonal(&s);
        let vol = VolumeForm::standard(7, 1.0).unwrap();
        let lhs = b.wedge(&a.hodge(&g, &vol).unwrap()).unwrap();
        let rhs = vol.form().scale(b.inner(&a, &g).unwrap());
        prop_assert!(lhs.distance(&rhs) < 1e-9);
        // ⋆⋆ = (−1)^{k(n−k)} sgn det g, and k(n−k) is even here
        let sgn: f64 = s.iter().product();
        let twice = a.hodge(&g, &vol).unwrap().hodge(&g, &vol).unwrap();
        prop_assert!(twice.distance(&a.scale(sgn)) < 1e-9);
    }

    #[test]
    fn complex_structure_squares_to_the_expected_sign(k in kind(), a in gl(6)) {
        let m = model::<f64>(k);
        let (om, rho) = (m.omega.pullback(&a).unwrap(), m.rho.pullback(&a).unwrap());
        let j = pair_j(&om, &rho).unwrap();
        let sq = j.matrix().matmul(j.matrix());
        let sign = if k.is_complex() { -1.0 } else { 1.0 };
        prop_assert!(sq.sub(&Matrix::identity(6).scale(sign)).max_abs() < 1e-8);
    }

    #[test]
    fn structure_maps_are_equivariant(k in kind(), a in gl(6)) {
        let m = model::<f64>(k);
        let (om, rho) = (m.omega.pullback(&a).unwrap(), m.rho.pullback(&a).unwrap());
        prop_assert_eq!(classify_pair(&om, &rho), SixStructureClass::Structure(k));
        let g0 = assoc_metric(&m.omega, &m.rho).unwrap();
        let g = assoc_metric(&om, &rho).unwrap();
        prop_assert!(g.matrix().sub(g0.pullback(&a).matrix()).max_abs() < 1e-8);
        let j0 = pair_j(&m.omega, &m.rho).unwrap();
        let j = pair_j(&om, &rho).unwrap();
        let conj = a.inverse().unwrap().matmul(j0.matrix()).matmul(&a);
        prop_assert!(j.matrix().sub(&conj).max_abs() < 1e-8);
    }

    #[test]
    fn seven_metric_is_equivariant(k in kind(), a in gl(7)) {
        let phi = model_phi::<f64>(k);
        let base = metric_vol_from_phi(&phi).unwrap();
        let moved = metric_vol_from_phi(&phi.pullback(&a).unwrap()).unwrap();
        prop_assert_eq!(base.class, moved.class);
        let g0 = base.metric.unwrap();
        let g = moved.metric.unwrap();
        prop_assert!(g.matrix().sub(g0.pullback(&a).matrix()).max_abs() < 1e-8);
    }

    #[test]
    fn iota_recovers_the_two_form(k in kind(), a in gl(6)) {
        let om = model::<f64>(k).omega.pullback(&a).unwrap();
        let sigma = om.wedge(&om).unwrap().scale(0.5);
        prop_assert!(iota(&sigma, Some(&om)).unwrap().distance(&om) < 1e-9);
        let flipped = om.neg();
        prop_assert!(iota(&sigma, Some(&flipped)).unwrap().distance(&flipped) < 1e-9);
    }

    #[test]
    fn invariant_differential_is_an_antiderivation(x in prop::collection::vec(-1.0..1.0f64, 3), y in prop::collection::vec(-1.0..1.0f64, 7)) {
        let space = registry("n11").unwrap();
        let ones = space.invariant_frame(1, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        let twos = space.invariant_frame(2, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        let a = ones.combine(&x[..ones.len().min(3)]);
        let b = twos.combine(&y[..twos.len().min(7)]);
        let lhs = space.d(&a.wedge(&b).unwrap()).unwrap();
        let rhs = space.d(&a).unwrap().wedge(&b).unwrap().sub(&a.wedge(&space.d(&b).unwrap()).unwrap());
        prop_assert!(lhs.distance(&rhs) < 1e-10);
    }
}

/// Random form of any degree from a seed, for strategies whose shape depends
/// on another generated value.
fn seeded(dim: usize, degree: usize, seed: u64) -> KForm<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..binomial(dim, degree)).map(|_| rng.gen_range(-2.0..2.0)).collect();
    KForm::from_coeffs(dim, degree, coeffs).unwrap()
}
