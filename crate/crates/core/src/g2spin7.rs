//! Stable 3-forms in seven dimensions and the 4-forms in eight dimensions
//! built from them.
//!
//! The metric of a 3-form is taken from
//! `B(v, w) · e^{1…7} = (1/6) (v⌟φ) ∧ (w⌟φ) ∧ φ`, normalized by
//! `det(B)^{1/9}`. With this sign `φ_G2` has the Euclidean metric and volume
//! `+e^{1…7}`.

use thiserror::Error;

use crate::exterior::{ExteriorError, KForm, SymBilinear, Vector, VolumeForm};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::stable::{self, classify_pair, SixStructureClass, StableError, StructureKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum G2Error {
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Stable(#[from] StableError),
    #[error("3-form is not stable")]
    NotStable,
    #[error("expected a {expected}-form on R^{dim}")]
    Shape { expected: usize, dim: usize },
    #[error("dual vector must be a multiple of the last coordinate covector")]
    BadDualVector,
    #[error("fiber length must be positive, got {0}")]
    NonpositiveF(f64),
    #[error("split data is inconsistent: {0}")]
    InconsistentSplit(&'static str),
    #[error("exact arithmetic cannot represent det(B)^(1/9) = ({0})^(1/9)")]
    Irrational(String),
}

pub type Result<T> = std::result::Result<T, G2Error>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SevenClass {
    G2,
    G2Star,
    NotStable,
}

impl SevenClass {
    pub fn name(self) -> &'static str {
        match self {
            SevenClass::G2 => "G2",
            SevenClass::G2Star => "G2*",
            SevenClass::NotStable => "not stable",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EightClass {
    Spin7,
    Spin034,
}

/// Result of [`metric_vol_from_phi`]; `metric` and `volume` are absent exactly
/// when the class is `NotStable`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiMetric<T> {
    pub class: SevenClass,
    pub metric: Option<SymBilinear<T>>,
    pub volume: Option<VolumeForm<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SevenStructure<T> {
    pub phi: KForm<T>,
    pub g7: SymBilinear<T>,
    pub vol7: VolumeForm<T>,
    pub star_phi: KForm<T>,
    pub class: SevenClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EightStructure<T> {
    pub big_phi: KForm<T>,
    pub vol8: VolumeForm<T>,
    pub g8: SymBilinear<T>,
    pub class: EightClass,
}

/// The symmetric form `B` with `B(v,w) e^{1…7} = (1/6)(v⌟φ)∧(w⌟φ)∧φ`.
pub fn phi_bilinear<T: Scalar>(phi: &KForm<T>) -> Result<Matrix<T>> {
    if phi.dim() != 7 || phi.degree() != 3 {
        return Err(G2Error::Shape { expected: 3, dim: 7 });
    }
    let contractions: Vec<KForm<T>> = (0..7)
        .map(|i| phi.interior(&Vector::basis(7, i)))
        .collect::<std::result::Result<_, _>>()?;
    let sixth = T::from_ratio(1, 6);
    let mut b = Matrix::zeros(7, 7);
    for i in 0..7 {
        for j in i..7 {
            let v = contractions[i].wedge(&contractions[j])?.wedge(phi)?.coeffs()[0] * sixth;
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    Ok(b)
}

pub fn metric_vol_from_phi<T: Scalar>(phi: &KForm<T>) -> Result<PhiMetric<T>> {
    let b = phi_bilinear(phi)?;
    let det = b.determinant();
    let not_stable = PhiMetric {
        class: SevenClass::NotStable,
        metric: None,
        volume: None,
    };
    // relative to the Hadamard bound on |det b|
    let hadamard: f64 = (0..7)
        .map(|j| b.column(j).iter().map(|x| x.to_f64().powi(2)).sum::<f64>().sqrt())
        .product();
    if det.negligible(hadamard, 1e-12) {
        return Ok(not_stable);
    }
    let s = det
        .real_root(9)
        .ok_or_else(|| G2Error::Irrational(det.to_string()))?;
    let g = SymBilinear::new(b.scale(T::one() / s))?;
    let class = match g.signature() {
        sig if sig.is(7, 0) => SevenClass::G2,
        sig if sig.is(3, 4) => SevenClass::G2Star,
        _ => return Ok(not_stable),
    };
    Ok(PhiMetric {
        class,
        metric: Some(g),
        volume: Some(VolumeForm::standard(7, s)?),
    })
}

impl<T: Scalar> SevenStructure<T> {
    pub fn from_phi(phi: KForm<T>) -> Result<Self> {
        let pm = metric_vol_from_phi(&phi)?;
        match (pm.class, pm.metric, pm.volume) {
            (SevenClass::NotStable, _, _) | (_, None, _) | (_, _, None) => Err(G2Error::NotStable),
            (class, Some(g7), Some(vol7)) => {
                let star_phi = phi.hodge(&g7, &vol7)?;
                Ok(Self {
                    phi,
                    g7,
                    vol7,
                    star_phi,
                    class,
                })
            }
        }
    }
}

/// `φ = ω ∧ η + ρ`. Forms given on `R^6` are placed on the first six
/// coordinates of `R^7`. The pair is checked on `ker η`.
pub fn build_phi<T: Scalar>(omega: &KForm<T>, rho: &KForm<T>, eta: &KForm<T>) -> Result<SevenStructure<T>> {
    if eta.dim() != 7 || eta.degree() != 1 || eta.is_zero() {
        return Err(G2Error::Shape { expected: 1, dim: 7 });
    }
    let lift = |a: &KForm<T>| -> Result<KForm<T>> {
        match a.dim() {
            6 => Ok(a.embed(7, &[0, 1, 2, 3, 4, 5])?),
            7 => Ok(a.clone()),
            _ => Err(G2Error::Shape { expected: a.degree(), dim: 7 }),
        }
    };
    let omega7 = lift(omega)?;
    let rho7 = lift(rho)?;
    let row = Matrix::from_fn(1, 7, |_, j| eta.coeffs()[j]);
    let kernel = row.null_space(1e-12);
    let frame = Matrix::from_fn(7, 6, |r, c| kernel[c][r]);
    let om6 = omega7.pullback(&frame)?;
    let rho6 = rho7.pullback(&frame)?;
    if let SixStructureClass::NotAStructure(d) = classify_pair(&om6, &rho6) {
        return Err(StableError::NotAStructure(d).into());
    }
    let phi = omega7.wedge(eta)?.add(&rho7);
    SevenStructure::from_phi(phi)
}

pub fn assoc_4form<T: Scalar>(s: &SevenStructure<T>) -> Result<KForm<T>> {
    if s.class == SevenClass::NotStable {
        return Err(G2Error::NotStable);
    }
    Ok(s.phi.hodge(&s.g7, &s.vol7)?)
}

/// `Φ = e⁸ ∧ φ + ⋆φ` for `e8_dual = a·e⁸`; the metric is `g₇ ⊕ a²`.
pub fn build_big_phi<T: Scalar>(s: &SevenStructure<T>, e8_dual: &KForm<T>) -> Result<EightStructure<T>> {
    let class = match s.class {
        SevenClass::G2 => EightClass::Spin7,
        SevenClass::G2Star => EightClass::Spin034,
        SevenClass::NotStable => return Err(G2Error::NotStable),
    };
    if e8_dual.dim() != 8 || e8_dual.degree() != 1 {
        return Err(G2Error::Shape { expected: 1, dim: 8 });
    }
    let a = e8_dual.coeffs()[7];
    if a.is_zero() || e8_dual.coeffs()[..7].iter().any(|c| !c.is_zero()) {
        return Err(G2Error::BadDualVector);
    }
    let first7 = [0, 1, 2, 3, 4, 5, 6];
    let big_phi = e8_dual
        .wedge(&s.phi.embed(8, &first7)?)?
        .add(&s.star_phi.embed(8, &first7)?);
    let vol8 = VolumeForm::new(big_phi.wedge(&big_phi)?.scale(T::from_ratio(1, 14)))?;
    Ok(EightStructure {
        big_phi,
        vol8,
        g8: s.g7.extend(&[a * a]),
        class,
    })
}

/// Data of a Spin(7)-type structure split along the radial and fiber
/// directions of a line bundle. All forms live on the same `R^n`; `omega` and
/// `rho` annihilate the radial and fiber vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleSplitData<T> {
    pub f: T,
    pub omega: KForm<T>,
    pub rho: KForm<T>,
    pub e_phi_dual: KForm<T>,
    pub e_r_dual: KForm<T>,
}

/// Frame adapted to a bundle split: six vectors spanning the distribution,
/// then `e_r`, then `e_φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitFrame<T> {
    pub frame: Matrix<T>,
    pub e_r: Vector<T>,
    pub e_phi: Vector<T>,
}

impl<T: Scalar> BundleSplitData<T> {
    pub fn frame(&self) -> Result<SplitFrame<T>> {
        let n = self.omega.dim();
        if n != 8 || self.omega.degree() != 2 || self.rho.degree() != 3 {
            return Err(G2Error::Shape { expected: 2, dim: 8 });
        }
        // common kernel of v ↦ v⌟ω and v ↦ v⌟ρ
        let mut rows = Vec::new();
        for i in 0..n {
            let a = self.omega.interior(&Vector::basis(n, i))?;
            let b = self.rho.interior(&Vector::basis(n, i))?;
            rows.push(a.coeffs().iter().chain(b.coeffs()).copied().collect::<Vec<T>>());
        }
        let m = Matrix::from_rows(&rows).transpose();
        let vertical = m.null_space(1e-10);
        if vertical.len() != 2 {
            return Err(G2Error::InconsistentSplit("omega and rho must have a 2-dimensional common kernel"));
        }
        let pair = |v: &Vec<T>, dual: &KForm<T>| {
            v.iter().zip(dual.coeffs()).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
        };
        let m2 = Matrix::from_rows(&[
            vec![pair(&vertical[0], &self.e_r_dual), pair(&vertical[1], &self.e_r_dual)],
            vec![pair(&vertical[0], &self.e_phi_dual), pair(&vertical[1], &self.e_phi_dual)],
        ]);
        let inv = m2
            .inverse()
            .ok_or(G2Error::InconsistentSplit("dual covectors do not detect the vertical plane"))?;
        let combo = |c0: T, c1: T| -> Vector<T> {
            Vector((0..n).map(|i| c0 * vertical[0][i] + c1 * vertical[1][i]).collect())
        };
        let e_r = combo(inv[(0, 0)], inv[(1, 0)]);
        let e_phi = combo(inv[(0, 1)], inv[(1, 1)]);
        let duals = Matrix::from_rows(&[self.e_r_dual.coeffs().to_vec(), self.e_phi_dual.coeffs().to_vec()]);
        let horizontal = duals.null_space(1e-12);
        if horizontal.len() != 6 {
            return Err(G2Error::InconsistentSplit("dual covectors are dependent"));
        }
        let frame = Matrix::from_fn(n, n, |r, c| match c {
            0..=5 => horizontal[c][r],
            6 => e_r.0[r],
            _ => e_phi.0[r],
        });
        Ok(SplitFrame { frame, e_r, e_phi })
    }
}

/// `Φ = ½ω∧ω + f e^φ∧J*ρ + e^r∧ρ + f e^r∧e^φ∧ω` with
/// `g₈ = g₆ + e^r⊗e^r + f² e^φ⊗e^φ`.
pub fn bundle_big_phi<T: Scalar>(d: &BundleSplitData<T>) -> Result<(KForm<T>, SymBilinear<T>)> {
    if d.f <= T::zero() {
        return Err(G2Error::NonpositiveF(d.f.to_f64()));
    }
    let sf = d.frame()?;
    let horizontal = Matrix::from_fn(8, 6, |r, c| sf.frame[(r, c)]);
    let om6 = d.omega.pullback(&horizontal)?;
    let rho6 = d.rho.pullback(&horizontal)?;
    let jr6 = stable::j_star_rho(&om6, &rho6)?;
    let g6 = stable::assoc_metric(&om6, &rho6)?;
    let inv = sf
        .frame
        .inverse()
        .ok_or(G2Error::InconsistentSplit("frame is singular"))?;
    // forms on the first six frame coordinates, pulled back to standard coordinates
    let jr = jr6.embed(8, &[0, 1, 2, 3, 4, 5])?.pullback(&inv)?;
    let half = T::from_ratio(1, 2);
    let big_phi = d
        .omega
        .wedge(&d.omega)?
        .scale(half)
        .add(&d.e_phi_dual.wedge(&jr)?.scale(d.f))
        .add(&d.e_r_dual.wedge(&d.rho)?)
        .add(&d.e_r_dual.wedge(&d.e_phi_dual)?.wedge(&d.omega)?.scale(d.f));
    let g_frame = g6.extend(&[T::one(), d.f * d.f]);
    Ok((big_phi, g_frame.pullback(&inv)))
}

/// `φ = ω ∧ e⁷ + ρ` for a model pair.
pub fn model_phi<T: Scalar>(kind: StructureKind) -> KForm<T> {
    let m = stable::model::<T>(kind);
    let e7 = KForm::from_terms(7, 1, &[(1, &[7])]);
    m.omega
        .embed(7, &[0, 1, 2, 3, 4, 5])
        .and_then(|w| w.wedge(&e7))
        .map(|w| w.add(&m.rho.embed(7, &[0, 1, 2, 3, 4, 5]).expect("R^6 in R^7")))
        .expect("model forms")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn g2_model_metric_is_euclidean() {
        let phi = model_phi::<Rational>(StructureKind::Su3);
        let pm = metric_vol_from_phi(&phi).unwrap();
        assert_eq!(pm.class, SevenClass::G2);
        assert_eq!(pm.metric.unwrap(), SymBilinear::euclidean(7));
        assert_eq!(pm.volume.unwrap().coefficient(), Rational::from_i64(1));
    }

    #[test]
    fn decomposable_phi_not_stable() {
        let phi = KForm::<f64>::from_terms(7, 3, &[(1, &[1, 2, 3])]);
        assert_eq!(metric_vol_from_phi(&phi).unwrap().class, SevenClass::NotStable);
        assert_eq!(SevenStructure::from_phi(phi), Err(G2Error::NotStable));
    }

    #[test]
    fn big_phi_rejects_oblique_dual() {
        let s = SevenStructure::from_phi(model_phi::<f64>(StructureKind::Su3)).unwrap();
        let oblique = KForm::from_terms(8, 1, &[(1, &[1]), (1, &[8])]);
        assert_eq!(build_big_phi(&s, &oblique), Err(G2Error::BadDualVector));
    }
}
