//! Stable forms on 6-dimensional spaces: the invariant λ, the almost
//! (para-)complex structure of a 3-form, the metric of a pair (ω, ρ) and the
//! structure criterion.
//!
//! The reference volume used for a pair is the one oriented by `ω³`
//! ([`omega_volume`]). With a fixed `e^{1…6}` an anti-oriented ω (such as
//! the `-c² e^{56}` term of the Aloff–Wallach family) yields `J`, `g` and the
//! normalization all with the wrong sign.

use thiserror::Error;

use crate::exterior::{ExteriorError, KForm, LinearMap, Signature, SymBilinear, Vector, VolumeForm};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

const STABILITY_TOL: f64 = 1e-12;
const PAIR_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StableError {
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error("expected a {expected}-form on R^6, got degree {degree} on R^{dim}")]
    Shape { expected: usize, dim: usize, degree: usize },
    #[error("3-form is not stable (lambda = {0:e})")]
    UnstableForm(f64),
    #[error("2-form is degenerate")]
    DegenerateOmega,
    #[error("exact arithmetic cannot represent the root of {0}")]
    Irrational(String),
    #[error("not an SU(3)/SU(1,2)/SL(3,R) pair: {0}")]
    NotAStructure(PairDefect),
    #[error("4-form is not of the form ω∧ω/2")]
    NotASquare,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, StableError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StructureKind {
    Su3,
    Su12,
    Sl3r,
}

impl StructureKind {
    pub const ALL: [StructureKind; 3] = [StructureKind::Su3, StructureKind::Su12, StructureKind::Sl3r];

    pub fn name(self) -> &'static str {
        match self {
            StructureKind::Su3 => "SU(3)",
            StructureKind::Su12 => "SU(1,2)",
            StructureKind::Sl3r => "SL(3,R)",
        }
    }

    pub fn is_complex(self) -> bool {
        !matches!(self, StructureKind::Sl3r)
    }
}

/// Reason a pair failed the structure criterion.
#[derive(Clone, Debug, PartialEq)]
pub enum PairDefect {
    UnstableRho,
    DegenerateOmega,
    NotOrthogonal(f64),
    Normalization(f64),
    Signature(Signature),
    Inexact,
}

impl std::fmt::Display for PairDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairDefect::UnstableRho => write!(f, "rho is not stable"),
            PairDefect::DegenerateOmega => write!(f, "omega is degenerate"),
            PairDefect::NotOrthogonal(r) => write!(f, "omega∧rho = {r:e}, expected 0"),
            PairDefect::Normalization(r) => write!(f, "J*rho∧rho - 2/3 omega^3 = {r:e}"),
            PairDefect::Signature(s) => write!(f, "metric signature {s} does not match"),
            PairDefect::Inexact => write!(f, "irrational normalization in exact mode"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SixStructureClass {
    Structure(StructureKind),
    NotAStructure(PairDefect),
}

impl SixStructureClass {
    pub fn kind(&self) -> Option<StructureKind> {
        match self {
            SixStructureClass::Structure(k) => Some(*k),
            SixStructureClass::NotAStructure(_) => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SixStructureClass::Structure(k) => k.name().to_string(),
            SixStructureClass::NotAStructure(d) => format!("none ({d})"),
        }
    }
}

/// The quartic invariant of a 3-form, relative to a reference volume.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaInvariant<T> {
    pub value: T,
    pub reference_volume: VolumeForm<T>,
}

fn check_shape<T: Scalar>(a: &KForm<T>, degree: usize) -> Result<()> {
    if a.dim() != 6 || a.degree() != degree {
        return Err(StableError::Shape {
            expected: degree,
            dim: a.dim(),
            degree: a.degree(),
        });
    }
    Ok(())
}

/// `K(v) ⊗ vol = (v ⌟ ρ) ∧ ρ`.
pub fn k_endomorphism<T: Scalar>(rho: &KForm<T>, vol_ref: &VolumeForm<T>) -> Result<LinearMap<T>> {
    check_shape(rho, 3)?;
    let vc = vol_ref.coefficient();
    let mut k = Matrix::zeros(6, 6);
    for j in 0..6 {
        let five = rho.interior(&Vector::basis(6, j))?.wedge(rho)?;
        for p in 0..6 {
            let c = five.coeff(0x3f & !(1 << p));
            let u = if p % 2 == 0 { c } else { -c };
            k[(p, j)] = u / vc;
        }
    }
    Ok(LinearMap(k))
}

pub fn lambda<T: Scalar>(rho: &KForm<T>, vol_ref: &VolumeForm<T>) -> Result<LambdaInvariant<T>> {
    let k = k_endomorphism(rho, vol_ref)?;
    let value = k.0.matmul(&k.0).trace() / T::from_i64(6);
    Ok(LambdaInvariant {
        value,
        reference_volume: vol_ref.clone(),
    })
}

fn lambda_negligible<T: Scalar>(lam: T, rho: &KForm<T>, vol_ref: &VolumeForm<T>) -> bool {
    let r = rho.max_abs();
    let v = vol_ref.coefficient().to_f64();
    lam.negligible(r.powi(4) / (v * v), STABILITY_TOL)
}

/// `J = K / √|λ|`, so `J² = sign(λ) Id`.
pub fn assoc_j<T: Scalar>(rho: &KForm<T>, vol_ref: &VolumeForm<T>) -> Result<LinearMap<T>> {
    let k = k_endomorphism(rho, vol_ref)?;
    let lam = k.0.matmul(&k.0).trace() / T::from_i64(6);
    if lambda_negligible(lam, rho, vol_ref) {
        return Err(StableError::UnstableForm(lam.to_f64()));
    }
    let root = lam
        .abs()
        .sqrt_opt()
        .ok_or_else(|| StableError::Irrational(format!("|lambda| = {lam}")))?;
    Ok(LinearMap(k.0.scale(T::one() / root)))
}

/// `sign(ω³) · e^{1…6}`.
pub fn omega_volume<T: Scalar>(omega: &KForm<T>) -> Result<VolumeForm<T>> {
    check_shape(omega, 2)?;
    let top = omega.wedge(omega)?.wedge(omega)?.coeffs()[0];
    if top.negligible(omega.max_abs().powi(3), STABILITY_TOL) {
        return Err(StableError::DegenerateOmega);
    }
    let sign = if top > T::zero() { T::one() } else { -T::one() };
    Ok(VolumeForm::standard(6, sign)?)
}

/// `J_ρ` with the orientation fixed by ω.
pub fn pair_j<T: Scalar>(omega: &KForm<T>, rho: &KForm<T>) -> Result<LinearMap<T>> {
    assoc_j(rho, &omega_volume(omega)?)
}

/// `J_ρ^* ρ` with the orientation fixed by ω.
pub fn j_star_rho<T: Scalar>(omega: &KForm<T>, rho: &KForm<T>) -> Result<KForm<T>> {
    let j = pair_j(omega, rho)?;
    Ok(rho.pullback(&j.0)?)
}

/// The symmetric `g` with `ω(v, w) = g(v, J w)`.
pub fn assoc_metric<T: Scalar>(omega: &KForm<T>, rho: &KForm<T>) -> Result<SymBilinear<T>> {
    check_shape(omega, 2)?;
    let vol = omega_volume(omega)?;
    let k = k_endomorphism(rho, &vol)?;
    let lam = k.0.matmul(&k.0).trace() / T::from_i64(6);
    if lambda_negligible(lam, rho, &vol) {
        return Err(StableError::UnstableForm(lam.to_f64()));
    }
    let j = assoc_j(rho, &vol)?;
    // J⁻¹ = sign(λ) J
    let j_inv = if lam < T::zero() { j.0.scale(-T::one()) } else { j.0 };
    let w = two_form_matrix(omega);
    Ok(SymBilinear::new(w.matmul(&j_inv))?)
}

/// Antisymmetric Gram matrix `ω(e_a, e_b)` of a 2-form.
pub fn two_form_matrix<T: Scalar>(omega: &KForm<T>) -> Matrix<T> {
    let n = omega.dim();
    Matrix::from_fn(n, n, |a, b| omega.component(&[a, b]))
}

pub fn two_form_from_matrix<T: Scalar>(m: &Matrix<T>) -> KForm<T> {
    let n = m.rows();
    let mut out = KForm::zero(n, 2);
    for a in 0..n {
        for b in a + 1..n {
            out.set_coeff((1 << a) | (1 << b), m[(a, b)]);
        }
    }
    out
}

pub fn classify_pair<T: Scalar>(omega: &KForm<T>, rho: &KForm<T>) -> SixStructureClass {
    match try_classify(omega, rho) {
        Ok(kind) => SixStructureClass::Structure(kind),
        Err(defect) => SixStructureClass::NotAStructure(defect),
    }
}

fn try_classify<T: Scalar>(omega: &KForm<T>, rho: &KForm<T>) -> std::result::Result<StructureKind, PairDefect> {
    if check_shape(omega, 2).is_err() || check_shape(rho, 3).is_err() {
        return Err(PairDefect::DegenerateOmega);
    }
    let vol = omega_volume(omega).map_err(|_| PairDefect::DegenerateOmega)?;
    let lam = lambda(rho, &vol).map_err(|_| PairDefect::UnstableRho)?.value;
    if lambda_negligible(lam, rho, &vol) {
        return Err(PairDefect::UnstableRho);
    }
    let mixed = omega.wedge(rho).expect("degree 5 on R^6");
    let scale_or = omega.max_abs() * rho.max_abs();
    let or_res = mixed.max_abs();
    if !T::EXACT && or_res > PAIR_TOL * scale_or || T::EXACT && !mixed.is_zero() {
        return Err(PairDefect::NotOrthogonal(or_res));
    }
    let j = match assoc_j(rho, &vol) {
        Ok(j) => j,
        Err(StableError::Irrational(_)) => return Err(PairDefect::Inexact),
        Err(_) => return Err(PairDefect::UnstableRho),
    };
    let jr = rho.pullback(&j.0).expect("square map");
    let lhs = jr.wedge(rho).expect("top degree").coeffs()[0];
    let cube = omega.wedge(omega).and_then(|w| w.wedge(omega)).expect("top degree").coeffs()[0];
    let rhs = cube * T::from_ratio(2, 3);
    let diff = lhs - rhs;
    if !diff.negligible(rhs.to_f64().abs(), PAIR_TOL) {
        return Err(PairDefect::Normalization(diff.to_f64()));
    }
    let g = assoc_metric(omega, rho).map_err(|_| PairDefect::Signature(Signature {
        positive: 0,
        negative: 0,
        zero: 6,
    }))?;
    let sig = g.signature();
    match (lam < T::zero(), sig.positive, sig.negative, sig.zero) {
        (true, 6, 0, 0) => Ok(StructureKind::Su3),
        (true, 2, 4, 0) => Ok(StructureKind::Su12),
        (false, 3, 3, 0) => Ok(StructureKind::Sl3r),
        _ => Err(PairDefect::Signature(sig)),
    }
}

/// A model pair in the standard frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelPair<T> {
    pub kind: StructureKind,
    pub omega: KForm<T>,
    pub rho: KForm<T>,
}

pub fn model<T: Scalar>(kind: StructureKind) -> ModelPair<T> {
    let omega = match kind {
        StructureKind::Su12 => KForm::from_terms(6, 2, &[(-1, &[1, 2]), (-1, &[3, 4]), (1, &[5, 6])]),
        _ => KForm::from_terms(6, 2, &[(1, &[1, 2]), (1, &[3, 4]), (1, &[5, 6])]),
    };
    let rho = match kind {
        StructureKind::Sl3r => {
            KForm::from_terms(6, 3, &[(1, &[1, 3, 5]), (1, &[1, 4, 6]), (1, &[2, 3, 6]), (1, &[2, 4, 5])])
        }
        _ => KForm::from_terms(
            6,
            3,
            &[(1, &[1, 3, 5]), (-1, &[1, 4, 6]), (-1, &[2, 3, 6]), (-1, &[2, 4, 5])],
        ),
    };
    ModelPair { kind, omega, rho }
}

/// Block-diagonal map acting by `θ/3` in each coordinate plane whose pullback
/// sends the model ρ to ρ^θ: the rotation `A_θ` for the complex types and the
/// boost `B_{-θ} = B_θ⁻¹` for the para-complex one.
pub fn phase_frame(kind: StructureKind, theta: f64) -> Matrix<f64> {
    let t = theta / 3.0;
    let (c, s, s2) = if kind.is_complex() {
        (t.cos(), -t.sin(), t.sin())
    } else {
        (t.cosh(), -t.sinh(), -t.sinh())
    };
    let mut m = Matrix::zeros(6, 6);
    for b in 0..3 {
        let i = 2 * b;
        m[(i, i)] = c;
        m[(i, i + 1)] = s;
        m[(i + 1, i)] = s2;
        m[(i + 1, i + 1)] = c;
    }
    m
}

/// `ρ^θ = cos θ ρ + sin θ J*ρ` (complex) or `cosh θ ρ − sinh θ J*ρ`
/// (para-complex); ω is unchanged.
pub fn theta_deform(omega: &KForm<f64>, rho: &KForm<f64>, theta: f64) -> Result<(KForm<f64>, KForm<f64>)> {
    let kind = match classify_pair(omega, rho) {
        SixStructureClass::Structure(k) => k,
        SixStructureClass::NotAStructure(d) => return Err(StableError::NotAStructure(d)),
    };
    let jr = j_star_rho(omega, rho)?;
    let out = if kind.is_complex() {
        rho.scale(theta.cos()).add(&jr.scale(theta.sin()))
    } else {
        rho.scale(theta.cosh()).sub(&jr.scale(theta.sinh()))
    };
    Ok((omega.clone(), out))
}

/// The unique α with `α ∧ ω = τ`.
pub fn solve_wedge_omega<T: Scalar>(omega: &KForm<T>, tau: &KForm<T>) -> Result<KForm<T>> {
    check_shape(omega, 2)?;
    check_shape(tau, 4)?;
    omega_volume(omega)?;
    let m = wedge_omega_matrix(omega);
    let x = m.solve(tau.coeffs()).ok_or(StableError::DegenerateOmega)?;
    Ok(KForm::from_coeffs(6, 2, x)?)
}

fn wedge_omega_matrix<T: Scalar>(omega: &KForm<T>) -> Matrix<T> {
    let mut m = Matrix::zeros(15, 15);
    for i in 0..15 {
        let mut e = vec![T::zero(); 15];
        e[i] = T::one();
        let col = KForm::from_coeffs(6, 2, e)
            .expect("15 coefficients")
            .wedge(omega)
            .expect("degree 4");
        for (r, &c) in col.coeffs().iter().enumerate() {
            m[(r, i)] = c;
        }
    }
    m
}

/// Inverse of `ω ↦ ½ ω∧ω` on nondegenerate 2-forms. Of the two roots ±ω the
/// one with positive coefficient pairing against `sign_hint` is returned;
/// without a hint the first nonzero coefficient is made positive.
pub fn iota(sigma: &KForm<f64>, sign_hint: Option<&KForm<f64>>) -> Result<KForm<f64>> {
    check_shape(sigma, 4)?;
    if let Some(h) = sign_hint {
        check_shape(h, 2)?;
    }
    let scale = sigma.max_abs();
    if scale == 0.0 {
        return Err(StableError::NotASquare);
    }
    let mut omega = initial_square_root(sigma)?;
    let half = |w: &KForm<f64>| w.wedge(w).expect("degree 4").scale(0.5);
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..50 {
        let r = sigma.sub(&half(&omega));
        residual = r.max_abs() / scale;
        if residual <= 1e-12 {
            converged = true;
            break;
        }
        let step = solve_wedge_omega(&omega, &r)?;
        omega = omega.add(&step);
    }
    if !converged {
        let r = sigma.sub(&half(&omega)).max_abs() / scale;
        if r > 1e-10 {
            return Err(StableError::NoConvergence {
                iterations: 50,
                residual: residual.min(r),
            });
        }
    }
    let pairing = match sign_hint {
        Some(h) => h.coeffs().iter().zip(omega.coeffs()).map(|(a, b)| a * b).sum::<f64>(),
        None => omega
            .coeffs()
            .iter()
            .copied()
            .find(|c| c.abs() > 1e-12 * omega.max_abs())
            .unwrap_or(1.0),
    };
    Ok(if pairing < 0.0 { omega.neg() } else { omega })
}

// σ = P ⌟ vol for a bivector P; then ω is proportional to P⁻¹.
fn initial_square_root(sigma: &KForm<f64>) -> Result<KForm<f64>> {
    let vol = KForm::<f64>::from_coeffs(6, 6, vec![1.0])?;
    let mut p = Matrix::zeros(6, 6);
    for a in 0..6 {
        for b in a + 1..6 {
            let four = vol
                .interior(&Vector::basis(6, a))?
                .interior(&Vector::basis(6, b))?;
            let mask = 0x3f & !((1u8 << a) | (1u8 << b));
            let s = four.coeff(mask);
            p[(a, b)] = sigma.coeff(mask) * s;
            p[(b, a)] = -p[(a, b)];
        }
    }
    let w = p.inverse().ok_or(StableError::NotASquare)?;
    let guess = two_form_from_matrix(&w);
    let sq = guess.wedge(&guess)?.scale(0.5);
    let num: f64 = sq.coeffs().iter().zip(sigma.coeffs()).map(|(a, b)| a * b).sum();
    let den: f64 = sq.coeffs().iter().map(|a| a * a).sum();
    let k2 = num / den;
    if !(k2 > 0.0) {
        return Err(StableError::NotASquare);
    }
    let omega = guess.scale(k2.sqrt());
    let fit = sigma.sub(&omega.wedge(&omega)?.scale(0.5)).max_abs() / sigma.max_abs();
    if fit > 1e-6 {
        return Err(StableError::NotASquare);
    }
    Ok(omega)
}
