use spin7flow::homogeneous::{
    aloff_wallach_pair, invariant_dimensions, registry, structure_constants, su3_basis,
};
use spin7flow::stable::{classify_pair, j_star_rho, SixStructureClass, StructureKind};
use spin7flow::{KForm, Matrix, Vector};

const HORIZONTAL: [usize; 6] = [0, 1, 2, 3, 4, 5];

fn lift(a: &KForm<f64>) -> KForm<f64> {
    a.embed(7, &HORIZONTAL).unwrap()
}

#[test]
fn su3_presentation_is_a_lie_algebra() {
    let alg = structure_constants(&su3_basis()).unwrap();
    assert!(alg.jacobi_residual() < 1e-12);
    // oracle: commutator of the defining matrices, read back against the basis
    let m = su3_basis();
    let comm = m[0].matmul(&m[1]).sub(&m[1].matmul(&m[0]));
    let rebuilt = alg
        .bracket(0, 1)
        .iter()
        .zip(&m)
        .fold(Matrix::zeros(6, 6), |acc, (&c, b)| acc.add(&b.scale(c)));
    assert!(comm.sub(&rebuilt).max_abs() < 1e-12);
}

#[test]
fn invariant_form_counts() {
    let space = registry("n11").unwrap();
    let dims: Vec<usize> = invariant_dimensions(&space).unwrap().into_values().collect();
    assert_eq!(dims, [1, 3, 7, 13, 13, 7, 3, 1]);
    assert_eq!(space.invariant_basis_on(2, &HORIZONTAL).unwrap().len(), 5);
    assert_eq!(space.invariant_basis_on(3, &HORIZONTAL).unwrap().len(), 8);
}

#[test]
fn fiber_coframe_differential() {
    let space = registry("n11").unwrap();
    let de7 = &space.d_coframe()[6];
    let expected = KForm::from_terms(7, 2, &[(-4, &[1, 2]), (-2, &[3, 4]), (2, &[5, 6])]);
    assert!(de7.distance(&expected) < 1e-12);
}

#[test]
fn differential_squares_to_zero_and_matches_evaluation() {
    for name in ["n11", "flag", "abelian7"] {
        let space = registry(name).unwrap();
        for k in 0..space.dim() - 1 {
            for f in space.invariant_basis(k).unwrap() {
                let d1 = space.ce_differential(&f).unwrap();
                let by_eval = space.d_by_evaluation(f.form()).unwrap();
                assert!(d1.form().distance(&by_eval) < 1e-12, "{name} degree {k}");
                assert!(space.invariance_residual(d1.form()).unwrap() < 1e-12);
                let d2 = space.d(d1.form()).unwrap();
                assert!(d2.max_abs() < 1e-12, "{name} degree {k}");
            }
        }
    }
}

#[test]
fn family_lies_in_the_invariant_span() {
    let space = registry("n11").unwrap();
    for theta in [0.0, 0.4, 2.1] {
        let (om, rho) = aloff_wallach_pair(1.3, -0.7, 0.9, theta);
        assert!(space.invariant(lift(&om)).is_ok());
        assert!(space.invariant(lift(&rho)).is_ok());
        assert_eq!(classify_pair(&om, &rho), SixStructureClass::Structure(StructureKind::Su3));
    }
    let e12 = KForm::from_terms(7, 2, &[(1, &[1, 2])]);
    assert!(space.invariant(e12).is_ok());
}

#[test]
fn fiber_lie_derivatives_of_the_family() {
    let space = registry("n11").unwrap();
    let e7 = Vector::basis(7, 6);
    let (om, rho) = aloff_wallach_pair(1.0, 1.0, 1.0, 0.0);
    let l_om = space.lie_derivative_raw(&e7, &lift(&om)).unwrap();
    assert!(l_om.max_abs() < 1e-12);
    let l_rho = space.lie_derivative_raw(&e7, &lift(&rho)).unwrap();
    let jr = lift(&j_star_rho(&om, &rho).unwrap());
    assert!(l_rho.distance(&jr.scale(-2.0)) < 1e-12);
}

#[test]
fn lie_derivative_commutes_with_d() {
    let space = registry("n11").unwrap();
    // e7 is the only h-invariant direction of m, so X⌟α stays basic
    for k in 1..5 {
        for f in space.invariant_basis(k).unwrap() {
            let v = Vector::basis(7, 6);
            let a = space.lie_derivative_raw(&v, &space.d(f.form()).unwrap()).unwrap();
            let b = space.d(&space.lie_derivative_raw(&v, f.form()).unwrap()).unwrap();
            assert!(a.distance(&b) < 1e-12);
        }
    }
}
