//! Lie algebras given by structure constants, reductive splits `g = h ⊕ m`
//! and the calculus of `h`-invariant forms on `m`.
//!
//! Forms live on `m` in the coordinates listed by [`ReductiveSplit::m`], so a
//! form of degree k is a `KForm` of dimension `m.len()`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::exterior::{basis_masks, ExteriorError, KForm, Vector};
use crate::linalg::Matrix;

const CLOSURE_TOL: f64 = 1e-10;
const INVARIANCE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomogeneousError {
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error("commutator [{0}, {1}] leaves the span (residual {2:e})")]
    NotClosed(usize, usize, f64),
    #[error("basis matrices are linearly dependent")]
    Dependent,
    #[error("matrices must all be square of the same size")]
    Shape,
    #[error("[h, m] is not contained in m (residual {0:e})")]
    NotReductive(f64),
    #[error("h and m must partition 0..{0}")]
    BadSplit(usize),
    #[error("form is not h-invariant (residual {0:e})")]
    NotInvariant(f64),
    #[error("form lives on a {got}-dimensional space, m has dimension {expected}")]
    WrongDimension { expected: usize, got: usize },
    #[error("unknown space {0:?}")]
    UnknownSpace(String),
}

pub type Result<T> = std::result::Result<T, HomogeneousError>;

/// Structure constants `[e_i, e_j] = Σ_k c^k_{ij} e_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebraPresentation {
    n: usize,
    c: Vec<f64>,
    matrices: Option<Vec<Matrix<f64>>>,
}

impl LieAlgebraPresentation {
    /// From a dense table indexed `[i][j][k] = c^k_{ij}`; antisymmetry in
    /// `i, j` is enforced by construction from the upper triangle.
    pub fn from_constants(n: usize, table: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut c = vec![0.0; n * n * n];
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    let v = table(i, j, k);
                    c[(i * n + j) * n + k] = v;
                    c[(j * n + i) * n + k] = -v;
                }
            }
        }
        Self { n, c, matrices: None }
    }

    pub fn abelian(n: usize) -> Self {
        Self::from_constants(n, |_, _, _| 0.0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.n + j) * self.n + k]
    }

    pub fn bracket(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.constant(i, j, k)).collect()
    }

    pub fn matrices(&self) -> Option<&[Matrix<f64>]> {
        self.matrices.as_deref()
    }

    /// Largest Jacobi identity defect over all triples.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += self.constant(i, j, m) * self.constant(m, k, l)
                                + self.constant(j, k, m) * self.constant(m, i, l)
                                + self.constant(k, i, m) * self.constant(m, j, l);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Recovers the structure constants of the span of `matrices` under the
/// commutator.
pub fn structure_constants(matrices: &[Matrix<f64>]) -> Result<LieAlgebraPresentation> {
    let n = matrices.len();
    let size = matrices.first().map_or(0, |m| m.rows());
    if matrices.iter().any(|m| !m.is_square() || m.rows() != size) {
        return Err(HomogeneousError::Shape);
    }
    let flat = Matrix::from_fn(size * size, n, |r, c| matrices[c].as_slice()[r]);
    if flat.rank(1e-12) < n {
        return Err(HomogeneousError::Dependent);
    }
    let mut c = vec![0.0; n * n * n];
    for i in 0..n {
        for j in i + 1..n {
            let comm = matrices[i].matmul(&matrices[j]).sub(&matrices[j].matmul(&matrices[i]));
            let target = comm.as_slice();
            let x = flat.least_squares(target).ok_or(HomogeneousError::Dependent)?;
            let fitted = flat.apply(&x);
            let scale = comm.max_abs().max(1.0);
            let res = fitted.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if res > CLOSURE_TOL * scale {
                return Err(HomogeneousError::NotClosed(i, j, res));
            }
            for k in 0..n {
                // exact zeros keep the tables clean
                let v = if x[k].abs() < 1e-14 { 0.0 } else { x[k] };
                c[(i * n + j) * n + k] = v;
                c[(j * n + i) * n + k] = -v;
            }
        }
    }
    Ok(LieAlgebraPresentation {
        n,
        c,
        matrices: Some(matrices.to_vec()),
    })
}

/// Real `2n × 2n` form of a complex matrix `re + i·im`; commutators are
/// preserved.
pub fn realify(re: &Matrix<f64>, im: &Matrix<f64>) -> Matrix<f64> {
    let n = re.rows();
    Matrix::from_fn(2 * n, 2 * n, |r, c| {
        let (bi, bj) = (r / n, c / n);
        let (i, j) = (r % n, c % n);
        match (bi, bj) {
            (0, 0) | (1, 1) => re[(i, j)],
            (0, 1) => -im[(i, j)],
            _ => im[(i, j)],
        }
    })
}

/// The basis `e_1, …, e_8` of `su(3)` built from the unit matrices `E_i^j`:
/// real and imaginary off-diagonal pairs for (1,2), (1,3), (2,3), then
/// `½ i (E_1^1 − E_2^2)` and `i (E_1^1 + E_2^2 − 2 E_3^3)`.
pub fn su3_basis() -> Vec<Matrix<f64>> {
    let unit = |i: usize, j: usize| {
        let mut m = Matrix::zeros(3, 3);
        m[(i, j)] = 1.0;
        m
    };
    let zero = Matrix::zeros(3, 3);
    let mut out = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        out.push(realify(&unit(i, j).sub(&unit(j, i)), &zero));
        out.push(realify(&zero, &unit(i, j).add(&unit(j, i))));
    }
    out.push(realify(&zero, &unit(0, 0).sub(&unit(1, 1)).scale(0.5)));
    out.push(realify(&zero, &unit(0, 0).add(&unit(1, 1)).sub(&unit(2, 2).scale(2.0))));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductiveSplit {
    h: Vec<usize>,
    m: Vec<usize>,
}

impl ReductiveSplit {
    pub fn new(algebra: &LieAlgebraPresentation, h: Vec<usize>, m: Vec<usize>) -> Result<Self> {
        let n = algebra.dim();
        let mut seen = vec![false; n];
        for &i in h.iter().chain(&m) {
            if i >= n || seen[i] {
                return Err(HomogeneousError::BadSplit(n));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(HomogeneousError::BadSplit(n));
        }
        let mut worst: f64 = 0.0;
        for &x in &h {
            for &y in &m {
                for &k in &h {
                    worst = worst.max(algebra.constant(x, y, k).abs());
                }
            }
        }
        if worst > 0.0 {
            return Err(HomogeneousError::NotReductive(worst));
        }
        Ok(Self { h, m })
    }

    pub fn h(&self) -> &[usize] {
        &self.h
    }

    pub fn m(&self) -> &[usize] {
        &self.m
    }
}

/// A reductive homogeneous space `G/H` described at the Lie algebra level.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousSpace {
    name: String,
    algebra: LieAlgebraPresentation,
    split: ReductiveSplit,
}

/// An `h`-invariant form on `m`, tagged with the space it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantForm {
    space: String,
    form: KForm<f64>,
}

impl InvariantForm {
    pub fn form(&self) -> &KForm<f64> {
        &self.form
    }

    pub fn into_form(self) -> KForm<f64> {
        self.form
    }

    pub fn space(&self) -> &str {
        &self.space
    }
}

/// Basis of an invariant subspace with one labelled coordinate per element.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantBasis {
    pub forms: Vec<InvariantForm>,
    pub labels: Vec<u8>,
}

impl InvariantBasis {
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Coordinates of a form in the span, read off the label tuples.
    pub fn coords(&self, a: &KForm<f64>) -> Vec<f64> {
        self.labels.iter().map(|&m| a.coeff(m)).collect()
    }

    pub fn combine(&self, x: &[f64]) -> KForm<f64> {
        let first = self.forms[0].form();
        let mut out = KForm::zero(first.dim(), first.degree());
        for (f, &c) in self.forms.iter().zip(x) {
            out = out.add(&f.form().scale(c));
        }
        out
    }

    /// Distance from `a` to its reconstruction; nonzero when `a` leaves the span.
    pub fn span_residual(&self, a: &KForm<f64>) -> f64 {
        self.combine(&self.coords(a)).distance(a)
    }

    /// Same basis with every form restricted to the `m` positions in `support`.
    pub fn restricted(&self, support: &[usize]) -> Result<Vec<KForm<f64>>> {
        self.forms
            .iter()
            .map(|f| Ok(f.form().restrict(support)?))
            .collect()
    }
}

impl HomogeneousSpace {
    pub fn new(name: &str, algebra: LieAlgebraPresentation, split: ReductiveSplit) -> Self {
        Self {
            name: name.to_string(),
            algebra,
            split,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn algebra(&self) -> &LieAlgebraPresentation {
        &self.algebra
    }

    pub fn split(&self) -> &ReductiveSplit {
        &self.split
    }

    /// Dimension of `m`.
    pub fn dim(&self) -> usize {
        self.split.m.len()
    }

    /// `[e_a, e_b]_m` in `m` coordinates, for `m` positions `a, b`.
    pub fn m_bracket(&self, a: usize, b: usize) -> Vec<f64> {
        let (i, j) = (self.split.m[a], self.split.m[b]);
        self.split.m.iter().map(|&k| self.algebra.constant(i, j, k)).collect()
    }

    fn check_dim(&self, a: &KForm<f64>) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(HomogeneousError::WrongDimension {
                expected: self.dim(),
                got: a.dim(),
            });
        }
        Ok(())
    }

    /// `d e^k = −Σ_{a<b} c^k_{ab} e^{ab}` with m-projected brackets.
    pub fn d_coframe(&self) -> Vec<KForm<f64>> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let mut f = KForm::zero(n, 2);
                for a in 0..n {
                    for b in a + 1..n {
                        let v = self.m_bracket(a, b)[k];
                        if v != 0.0 {
                            f.set_coeff((1 << a) | (1 << b), -v);
                        }
                    }
                }
                f
            })
            .collect()
    }

    /// Chevalley–Eilenberg derivative on `Λm*`, `dα = Σ_k de^k ∧ (e_k ⌟ α)`.
    /// Meaningful on h-basic forms; no invariance check is made.
    pub fn d(&self, alpha: &KForm<f64>) -> Result<KForm<f64>> {
        self.check_dim(alpha)?;
        let n = self.dim();
        if alpha.degree() >= n {
            return Err(ExteriorError::BadDegree {
                dim: n,
                degree: alpha.degree() + 1,
            }
            .into());
        }
        if alpha.degree() == 0 {
            return Ok(KForm::zero(n, 1));
        }
        let mut out = KForm::zero(n, alpha.degree() + 1);
        for (k, de) in self.d_coframe().iter().enumerate() {
            if de.is_zero() {
                continue;
            }
            let contracted = alpha.interior(&Vector::basis(n, k))?;
            out = out.add(&de.wedge(&contracted)?);
        }
        Ok(out)
    }

    /// `dα(X_0,…,X_k) = Σ_{i<j} (−1)^{i+j} α([X_i,X_j]_m, X_0,…,X̂_i,…,X̂_j,…,X_k)`
    /// evaluated on every basis tuple.
    pub fn d_by_evaluation(&self, alpha: &KForm<f64>) -> Result<KForm<f64>> {
        self.check_dim(alpha)?;
        let n = self.dim();
        let k = alpha.degree();
        if k >= n {
            return Err(ExteriorError::BadDegree { dim: n, degree: k + 1 }.into());
        }
        let mut out = KForm::zero(n, k + 1);
        if k == 0 {
            return Ok(out);
        }
        for &mask in basis_masks(n, k + 1) {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let mut total = 0.0;
            for p in 0..=k {
                for r in p + 1..=k {
                    let sign = if (p + r) % 2 == 0 { 1.0 } else { -1.0 };
                    let mut args = vec![Vector(self.m_bracket(idx[p], idx[r]))];
                    for (s, &i) in idx.iter().enumerate() {
                        if s != p && s != r {
                            args.push(Vector::basis(n, i));
                        }
                    }
                    total += sign * alpha.eval(&args)?;
                }
            }
            out.set_coeff(mask, total);
        }
        Ok(out)
    }

    /// Algebraic action of `h`-generator `x` (an algebra index):
    /// `(x·α)(Y_1,…) = −Σ_p α(…, [x, Y_p]_m, …)`.
    pub fn h_action(&self, x: usize, alpha: &KForm<f64>) -> Result<KForm<f64>> {
        self.check_dim(alpha)?;
        let n = self.dim();
        if alpha.degree() == 0 {
            return Ok(KForm::zero(n, 0));
        }
        let mut out = KForm::zero(n, alpha.degree());
        for a in 0..n {
            // column a of ad_x restricted to m
            let col: Vec<f64> = self
                .split
                .m
                .iter()
                .map(|&k| self.algebra.constant(x, self.split.m[a], k))
                .collect();
            let mut contracted: Option<KForm<f64>> = None;
            for (b, &v) in col.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let t = alpha.interior(&Vector::basis(n, b))?.scale(v);
                contracted = Some(match contracted {
                    None => t,
                    Some(acc) => acc.add(&t),
                });
            }
            if let Some(cf) = contracted {
                let ea = KForm::monomial(n, &[a], -1.0)?;
                out = out.add(&ea.wedge(&cf)?);
            }
        }
        Ok(out)
    }

    pub fn invariance_residual(&self, alpha: &KForm<f64>) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &x in &self.split.h {
            worst = worst.max(self.h_action(x, alpha)?.max_abs());
        }
        Ok(worst)
    }

    pub fn invariant(&self, form: KForm<f64>) -> Result<InvariantForm> {
        let res = self.invariance_residual(&form)?;
        if res > INVARIANCE_TOL * form.max_abs().max(1.0) {
            return Err(HomogeneousError::NotInvariant(res));
        }
        Ok(InvariantForm {
            space: self.name.clone(),
            form,
        })
    }

    fn own(&self, alpha: &InvariantForm) -> Result<()> {
        if alpha.space != self.name {
            return Err(HomogeneousError::UnknownSpace(alpha.space.clone()));
        }
        Ok(())
    }

    /// Basis of invariant k-forms, in reduced row echelon order.
    pub fn invariant_basis(&self, k: usize) -> Result<Vec<InvariantForm>> {
        self.invariant_basis_on(k, &(0..self.dim()).collect::<Vec<_>>())
    }

    /// Invariant k-forms built only from the coframe directions in `support`
    /// (positions in `m`).
    pub fn invariant_basis_on(&self, k: usize, support: &[usize]) -> Result<Vec<InvariantForm>> {
        Ok(self.invariant_frame(k, support)?.forms)
    }

    /// Like [`Self::invariant_basis_on`], with coordinate labels. Each basis
    /// form has coefficient 1 on its label tuple and every other basis form
    /// has coefficient 0 there, so the label coefficients of an invariant form
    /// are its coordinates.
    pub fn invariant_frame(&self, k: usize, support: &[usize]) -> Result<InvariantBasis> {
        let n = self.dim();
        let allowed: u8 = support.iter().fold(0u8, |m, &i| m | (1 << i));
        let masks: Vec<u8> = basis_masks(n, k).iter().copied().filter(|&m| m & !allowed == 0).collect();
        let size = basis_masks(n, k).len();
        let columns: Vec<KForm<f64>> = masks
            .iter()
            .map(|&m| {
                let mut f = KForm::zero(n, k);
                f.set_coeff(m, 1.0);
                f
            })
            .collect();
        let mut rows = Vec::new();
        for &x in &self.split.h {
            let images: Vec<KForm<f64>> = columns
                .iter()
                .map(|c| self.h_action(x, c))
                .collect::<Result<_>>()?;
            for r in 0..size {
                rows.push(images.iter().map(|img| img.coeffs()[r]).collect::<Vec<f64>>());
            }
        }
        if rows.is_empty() {
            rows.push(vec![0.0; masks.len()]);
        }
        let (null, free) = Matrix::from_rows(&rows).null_space_with_free(1e-10);
        let forms = null
            .into_iter()
            .map(|v| {
                let mut f = KForm::zero(n, k);
                for (&m, x) in masks.iter().zip(v) {
                    f.set_coeff(m, if x.abs() < 1e-14 { 0.0 } else { x });
                }
                self.invariant(f)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(InvariantBasis {
            forms,
            labels: free.into_iter().map(|c| masks[c]).collect(),
        })
    }

    pub fn ce_differential(&self, alpha: &InvariantForm) -> Result<InvariantForm> {
        self.own(alpha)?;
        Ok(InvariantForm {
            space: self.name.clone(),
            form: self.d(&alpha.form)?,
        })
    }

    /// `L_X α = X ⌟ dα + d(X ⌟ α)` for `X = Σ x_a e_a ∈ m`.
    pub fn lie_derivative_raw(&self, x: &Vector<f64>, alpha: &KForm<f64>) -> Result<KForm<f64>> {
        let n = self.dim();
        let first = if alpha.degree() < n {
            self.d(alpha)?.interior(x)?
        } else {
            KForm::zero(n, n)
        };
        if alpha.degree() == 0 {
            return Ok(first);
        }
        Ok(first.add(&self.d(&alpha.interior(x)?)?))
    }

    /// Lie derivative along the basis vector of `m` at position `x`.
    pub fn lie_derivative(&self, x: usize, alpha: &InvariantForm) -> Result<InvariantForm> {
        self.own(alpha)?;
        Ok(InvariantForm {
            space: self.name.clone(),
            form: self.lie_derivative_raw(&Vector::basis(self.dim(), x), &alpha.form)?,
        })
    }

    /// Matrix of `ad_x` on `m` for an algebra index `x`; `None` when `ad_x`
    /// does not preserve `m`.
    pub fn ad_on_m(&self, x: usize) -> Option<Matrix<f64>> {
        let m = &self.split.m;
        for &a in m {
            for &k in &self.split.h {
                if self.algebra.constant(x, a, k) != 0.0 {
                    return None;
                }
            }
        }
        Some(Matrix::from_fn(m.len(), m.len(), |b, a| self.algebra.constant(x, m[a], m[b])))
    }

    /// `Ad(exp(τ X))` on `m` for the basis element `X` of `m` at position `x`,
    /// provided `ad_X` preserves `m` and commutes with `h`. Pullback along it
    /// commutes with the differential.
    pub fn automorphism(&self, x: usize, tau: f64) -> Option<Matrix<f64>> {
        let idx = self.split.m[x];
        for &hh in &self.split.h {
            if self.algebra.bracket(idx, hh).iter().any(|&c| c != 0.0) {
                return None;
            }
        }
        self.ad_on_m(idx).map(|ad| crate::linalg::expm(&ad.scale(tau)))
    }

    pub fn pi_project(&self, alpha: &InvariantForm, e_phi_index: usize) -> Result<InvariantForm> {
        self.own(alpha)?;
        Ok(InvariantForm {
            space: self.name.clone(),
            form: pi_project(&alpha.form, e_phi_index)?,
        })
    }
}

/// `π(α) = α − e^φ ∧ (e_φ ⌟ α)` for a coordinate direction; the scale of
/// `e_φ` cancels against its dual.
pub fn pi_project(alpha: &KForm<f64>, e_phi_index: usize) -> Result<KForm<f64>> {
    let n = alpha.dim();
    if alpha.degree() == 0 {
        return Ok(alpha.clone());
    }
    let dual = KForm::monomial(n, &[e_phi_index], 1.0)?;
    let inner = alpha.interior(&Vector::basis(n, e_phi_index))?;
    Ok(alpha.sub(&dual.wedge(&inner)?))
}

/// Names accepted by [`registry`].
pub const SPACE_NAMES: [&str; 3] = ["n11", "flag", "abelian7"];

pub fn registry(name: &str) -> Result<HomogeneousSpace> {
    match name {
        "n11" | "flag" => {
            let algebra = structure_constants(&su3_basis())?;
            let (h, m) = if name == "n11" {
                (vec![7], (0..7).collect())
            } else {
                (vec![6, 7], (0..6).collect())
            };
            let split = ReductiveSplit::new(&algebra, h, m)?;
            Ok(HomogeneousSpace::new(name, algebra, split))
        }
        "abelian7" => {
            let algebra = LieAlgebraPresentation::abelian(7);
            let split = ReductiveSplit::new(&algebra, vec![], (0..7).collect())?;
            Ok(HomogeneousSpace::new(name, algebra, split))
        }
        other => Err(HomogeneousError::UnknownSpace(other.to_string())),
    }
}

/// The invariant pair on the horizontal distribution `span(e_1, …, e_6)` of
/// `N^{1,1}`:
/// `ω = a² e^{12} + b² e^{34} − c² e^{56}` and
/// `ρ = abc (cos θ ρ_1 + sin θ ρ_2)` with
/// `ρ_1 = −e^{135} − e^{146} − e^{236} + e^{245}`,
/// `ρ_2 = −e^{136} + e^{145} + e^{235} + e^{246}`.
pub fn aloff_wallach_pair(a: f64, b: f64, c: f64, theta: f64) -> (KForm<f64>, KForm<f64>) {
    let omega = KForm::from_terms(6, 2, &[(1, &[1, 2])])
        .scale(a * a)
        .add(&KForm::from_terms(6, 2, &[(1, &[3, 4])]).scale(b * b))
        .sub(&KForm::from_terms(6, 2, &[(1, &[5, 6])]).scale(c * c));
    let rho1 = KForm::from_terms(6, 3, &[(-1, &[1, 3, 5]), (-1, &[1, 4, 6]), (-1, &[2, 3, 6]), (1, &[2, 4, 5])]);
    let rho2 = KForm::from_terms(6, 3, &[(-1, &[1, 3, 6]), (1, &[1, 4, 5]), (1, &[2, 3, 5]), (1, &[2, 4, 6])]);
    let abc = a * b * c;
    let rho = rho1.scale(abc * theta.cos()).add(&rho2.scale(abc * theta.sin()));
    (omega, rho)
}

/// Dimensions of the invariant form spaces by degree.
pub fn invariant_dimensions(space: &HomogeneousSpace) -> Result<BTreeMap<usize, usize>> {
    (0..=space.dim())
        .map(|k| Ok((k, space.invariant_basis(k)?.len())))
        .collect()
}
