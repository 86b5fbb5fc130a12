//! Dense exterior algebra on `R^n`, `n <= 8`.
//!
//! A k-form stores one coefficient per strictly increasing index tuple, in
//! lexicographic order. Internally a tuple is a bitmask, and every sign comes
//! from counting transpositions.

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const MAX_DIM: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExteriorError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("degree overflow: {left} + {right} exceeds dimension {dim}")]
    DegreeOverflow { left: usize, right: usize, dim: usize },
    #[error("interior product of a 0-form")]
    ZeroDegree,
    #[error("dimension {0} outside 0..=8")]
    UnsupportedDimension(usize),
    #[error("degree {degree} exceeds dimension {dim}")]
    BadDegree { dim: usize, degree: usize },
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("metric is degenerate")]
    DegenerateMetric,
    #[error("matrix is not symmetric (deviation {0:e})")]
    NotSymmetric(f64),
    #[error("volume form must have top degree and be nonzero")]
    BadVolume,
    #[error("repeated or out-of-range index in {0:?}")]
    BadIndex(Vec<usize>),
}

pub type Result<T> = std::result::Result<T, ExteriorError>;

struct Table {
    masks: Vec<u8>,
    index: [u16; 256],
}

fn tables() -> &'static Vec<Vec<Table>> {
    static TABLES: OnceLock<Vec<Vec<Table>>> = OnceLock::new();
    TABLES.get_or_init(|| {
        (0..=MAX_DIM)
            .map(|n| {
                (0..=n)
                    .map(|k| {
                        let mut tuples = Vec::new();
                        combinations(n, k, 0, 0, &mut tuples);
                        let mut index = [u16::MAX; 256];
                        for (i, &m) in tuples.iter().enumerate() {
                            index[m as usize] = i as u16;
                        }
                        Table { masks: tuples, index }
                    })
                    .collect()
            })
            .collect()
    })
}

// Emits masks in lexicographic order of the increasing tuples they encode.
fn combinations(n: usize, k: usize, start: usize, acc: u8, out: &mut Vec<u8>) {
    if k == 0 {
        out.push(acc);
        return;
    }
    for i in start..n {
        if n - i < k {
            break;
        }
        combinations(n, k - 1, i + 1, acc | (1 << i), out);
    }
}

fn table(n: usize, k: usize) -> &'static Table {
    &tables()[n][k]
}

/// Masks of all increasing k-tuples in `0..n`, in storage order.
pub fn basis_masks(n: usize, k: usize) -> &'static [u8] {
    &table(n, k).masks
}

pub fn mask_index(n: usize, k: usize, mask: u8) -> usize {
    table(n, k).index[mask as usize] as usize
}

pub fn mask_indices(mask: u8) -> Vec<usize> {
    (0..MAX_DIM).filter(|i| mask & (1 << i) != 0).collect()
}

/// Label such as `e135` (1-based indices). The empty tuple is `1`.
pub fn mask_label(mask: u8) -> String {
    if mask == 0 {
        return "1".to_string();
    }
    let digits: String = mask_indices(mask).iter().map(|i| (i + 1).to_string()).collect();
    format!("e{digits}")
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Sign of `e^I ∧ e^J` relative to `e^{I ∪ J}`; zero when the tuples overlap.
fn wedge_sign(i: u8, j: u8) -> i32 {
    if i & j != 0 {
        return 0;
    }
    let mut swaps = 0u32;
    let mut rest = j;
    while rest != 0 {
        let b = rest.trailing_zeros();
        rest &= rest - 1;
        swaps += (i >> b).count_ones();
    }
    if swaps % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign of the permutation sorting `seq`; zero when entries repeat.
fn sort_sign(seq: &[usize]) -> i32 {
    let mut sign = 1;
    for a in 0..seq.len() {
        for b in a + 1..seq.len() {
            if seq[a] == seq[b] {
                return 0;
            }
            if seq[a] > seq[b] {
                sign = -sign;
            }
        }
    }
    sign
}

fn signed<T: Scalar>(s: i32, x: T) -> T {
    match s {
        1 => x,
        -1 => -x,
        _ => T::zero(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KForm<T> {
    dim: usize,
    degree: usize,
    coeffs: Vec<T>,
}

impl<T: Scalar> KForm<T> {
    pub fn zero(dim: usize, degree: usize) -> Self {
        assert!(dim <= MAX_DIM && degree <= dim, "bad form shape ({dim}, {degree})");
        Self {
            dim,
            degree,
            coeffs: vec![T::zero(); binomial(dim, degree)],
        }
    }

    pub fn from_coeffs(dim: usize, degree: usize, coeffs: Vec<T>) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(ExteriorError::UnsupportedDimension(dim));
        }
        if degree > dim {
            return Err(ExteriorError::BadDegree { dim, degree });
        }
        let expected = binomial(dim, degree);
        if coeffs.len() != expected {
            return Err(ExteriorError::CoefficientCount {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self { dim, degree, coeffs })
    }

    pub fn constant(dim: usize, value: T) -> Self {
        let mut f = Self::zero(dim, 0);
        f.coeffs[0] = value;
        f
    }

    /// `coeff · e^{i_1} ∧ … ∧ e^{i_k}` with 0-based, not necessarily sorted indices.
    pub fn monomial(dim: usize, indices: &[usize], coeff: T) -> Result<Self> {
        if indices.iter().any(|&i| i >= dim) {
            return Err(ExteriorError::BadIndex(indices.to_vec()));
        }
        let sign = sort_sign(indices);
        if sign == 0 {
            return Err(ExteriorError::BadIndex(indices.to_vec()));
        }
        let mut f = Self::zero(dim, indices.len());
        let mask = indices.iter().fold(0u8, |m, &i| m | (1 << i));
        f.coeffs[mask_index(dim, indices.len(), mask)] = signed(sign, coeff);
        Ok(f)
    }

    /// Sum of `coeff · e^{digits}` terms written with 1-based indices, as in
    /// `[(1, &[1, 2]), (1, &[3, 4])]`. Panics on malformed input; meant for
    /// literals.
    pub fn from_terms(dim: usize, degree: usize, terms: &[(i64, &[usize])]) -> Self {
        let mut f = Self::zero(dim, degree);
        for &(c, idx) in terms {
            assert_eq!(idx.len(), degree, "term degree");
            let zero_based: Vec<usize> = idx.iter().map(|i| i - 1).collect();
            f = f.add(&Self::monomial(dim, &zero_based, T::from_i64(c)).expect("valid term"));
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn coeff(&self, mask: u8) -> T {
        self.coeffs[mask_index(self.dim, self.degree, mask)]
    }

    pub fn set_coeff(&mut self, mask: u8, value: T) {
        let i = mask_index(self.dim, self.degree, mask);
        self.coeffs[i] = value;
    }

    /// Coefficient on `e^{indices}` for 0-based indices in any order.
    pub fn component(&self, indices: &[usize]) -> T {
        let sign = sort_sign(indices);
        if sign == 0 || indices.len() != self.degree {
            return T::zero();
        }
        let mask = indices.iter().fold(0u8, |m, &i| m | (1 << i));
        signed(sign, self.coeff(mask))
    }

    /// `(mask, coefficient)` pairs in storage order.
    pub fn terms(&self) -> impl Iterator<Item = (u8, T)> + '_ {
        basis_masks(self.dim, self.degree).iter().copied().zip(self.coeffs.iter().copied())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> KForm<f64> {
        KForm {
            dim: self.dim,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c.to_f64()).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|c| c * s)
    }

    pub fn neg(&self) -> Self {
        self.map(|c| -c)
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(
            (self.dim, self.degree),
            (other.dim, other.degree),
            "adding forms of different shape"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same(other);
        Self {
            dim: self.dim,
            degree: self.degree,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_same(other);
        Self {
            dim: self.dim,
            degree: self.degree,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a - b).collect(),
        }
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim
            && self.degree == other.degree
            && self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| a.approx_eq(*b, tol))
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(ExteriorError::DimensionMismatch(self.dim, other.dim));
        }
        let degree = self.degree + other.degree;
        if degree > self.dim {
            return Err(ExteriorError::DegreeOverflow {
                left: self.degree,
                right: other.degree,
                dim: self.dim,
            });
        }
        let mut out = Self::zero(self.dim, degree);
        for (i, a) in self.terms() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.terms() {
                if b.is_zero() {
                    continue;
                }
                let s = wedge_sign(i, j);
                if s == 0 {
                    continue;
                }
                let k = mask_index(self.dim, degree, i | j);
                out.coeffs[k] = out.coeffs[k] + signed(s, a * b);
            }
        }
        Ok(out)
    }

    /// Interior product `v ⌟ self`.
    pub fn interior(&self, v: &Vector<T>) -> Result<Self> {
        if v.dim() != self.dim {
            return Err(ExteriorError::DimensionMismatch(v.dim(), self.dim));
        }
        if self.degree == 0 {
            return Err(ExteriorError::ZeroDegree);
        }
        let mut out = Self::zero(self.dim, self.degree - 1);
        for (mask, a) in self.terms() {
            if a.is_zero() {
                continue;
            }
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let vi = v.0[i];
                if vi.is_zero() {
                    continue;
                }
                let below = (mask & ((1u8 << i) - 1)).count_ones();
                let k = mask_index(self.dim, self.degree - 1, mask & !(1 << i));
                let term = a * vi;
                out.coeffs[k] = if below % 2 == 0 {
                    out.coeffs[k] + term
                } else {
                    out.coeffs[k] - term
                };
            }
        }
        Ok(out)
    }

    /// Pullback along a linear map `A: R^m -> R^n` given as an `n × m` matrix;
    /// `(A* a)(v_1, …) = a(A v_1, …)`. The result lives on `R^m`.
    pub fn pullback(&self, a: &Matrix<T>) -> Result<Self> {
        if a.rows() != self.dim {
            return Err(ExteriorError::DimensionMismatch(a.rows(), self.dim));
        }
        let m = a.cols();
        if m > MAX_DIM {
            return Err(ExteriorError::UnsupportedDimension(m));
        }
        if self.degree > m {
            return Err(ExteriorError::BadDegree {
                dim: m,
                degree: self.degree,
            });
        }
        let k = self.degree;
        let mut out = Self::zero(m, k);
        let sources: Vec<(Vec<usize>, T)> = self
            .terms()
            .filter(|(_, c)| !c.is_zero())
            .map(|(mask, c)| (mask_indices(mask), c))
            .collect();
        for (slot, &jm) in basis_masks(m, k).iter().enumerate() {
            let cols = mask_indices(jm);
            let mut acc = T::zero();
            for (rows, c) in &sources {
                acc = acc + *c * a.select(rows, &cols).determinant();
            }
            out.coeffs[slot] = acc;
        }
        Ok(out)
    }

    /// Value on `k` vectors.
    pub fn eval(&self, vectors: &[Vector<T>]) -> Result<T> {
        if vectors.len() != self.degree {
            return Err(ExteriorError::BadDegree {
                dim: self.dim,
                degree: vectors.len(),
            });
        }
        for v in vectors {
            if v.dim() != self.dim {
                return Err(ExteriorError::DimensionMismatch(v.dim(), self.dim));
            }
        }
        if self.degree == 0 {
            return Ok(self.coeffs[0]);
        }
        let mut acc = T::zero();
        for (mask, c) in self.terms() {
            if c.is_zero() {
                continue;
            }
            let idx = mask_indices(mask);
            let m = Matrix::from_fn(self.degree, self.degree, |r, s| vectors[r].0[idx[s]]);
            acc = acc + c * m.determinant();
        }
        Ok(acc)
    }

    /// Places this form on `R^dim` by sending coordinate `i` to `positions[i]`.
    pub fn embed(&self, dim: usize, positions: &[usize]) -> Result<Self> {
        if positions.len() != self.dim {
            return Err(ExteriorError::DimensionMismatch(positions.len(), self.dim));
        }
        let mut out = Self::zero(dim, self.degree);
        for (mask, c) in self.terms() {
            if c.is_zero() {
                continue;
            }
            let idx: Vec<usize> = mask_indices(mask).iter().map(|&i| positions[i]).collect();
            out = out.add(&Self::monomial(dim, &idx, c)?);
        }
        Ok(out)
    }

    /// Restriction to the coordinate subspace spanned by `positions`.
    pub fn restrict(&self, positions: &[usize]) -> Result<Self> {
        let inclusion = Matrix::from_fn(self.dim, positions.len(), |r, c| {
            if positions[c] == r {
                T::one()
            } else {
                T::zero()
            }
        });
        self.pullback(&inclusion)
    }

    /// Induced pairing `<self, other>_g` of forms of equal degree.
    pub fn inner(&self, other: &Self, g: &SymBilinear<T>) -> Result<T> {
        let gi = g.inverse()?;
        self.inner_with_inverse(other, &gi)
    }

    fn inner_with_inverse(&self, other: &Self, gi: &Matrix<T>) -> Result<T> {
        if self.dim != other.dim || self.dim != gi.rows() {
            return Err(ExteriorError::DimensionMismatch(self.dim, other.dim));
        }
        if self.degree != other.degree {
            return Err(ExteriorError::BadDegree {
                dim: self.dim,
                degree: other.degree,
            });
        }
        let raised = raise(self, gi);
        Ok(raised
            .iter()
            .zip(&other.coeffs)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    /// Hodge star defined by `b ∧ ⋆a = <b, a>_g vol`.
    pub fn hodge(&self, g: &SymBilinear<T>, vol: &VolumeForm<T>) -> Result<Self> {
        if g.dim() != self.dim || vol.dim() != self.dim {
            return Err(ExteriorError::DimensionMismatch(g.dim(), self.dim));
        }
        let gi = g.inverse()?;
        let n = self.dim;
        let full: u8 = if n == 8 { 0xff } else { (1u8 << n) - 1 };
        let raised = raise(self, &gi);
        let vc = vol.coefficient();
        let mut out = Self::zero(n, n - self.degree);
        for (slot, &mask) in basis_masks(n, self.degree).iter().enumerate() {
            let a = raised[slot];
            if a.is_zero() {
                continue;
            }
            let comp = full & !mask;
            let s = wedge_sign(mask, comp);
            out.set_coeff(comp, signed(s, a * vc));
        }
        Ok(out)
    }
}

// Components `a^I = Σ_K det(g⁻¹[I,K]) a_K`.
fn raise<T: Scalar>(a: &KForm<T>, gi: &Matrix<T>) -> Vec<T> {
    let n = a.dim;
    let k = a.degree;
    let masks = basis_masks(n, k);
    let idx: Vec<Vec<usize>> = masks.iter().map(|&m| mask_indices(m)).collect();
    let mut out = vec![T::zero(); masks.len()];
    for (s, rows) in idx.iter().enumerate() {
        let mut acc = T::zero();
        for (t, cols) in idx.iter().enumerate() {
            let c = a.coeffs[t];
            if c.is_zero() {
                continue;
            }
            acc = acc + c * gi.select(rows, cols).determinant();
        }
        out[s] = acc;
    }
    out
}

impl<T: Scalar> fmt::Display for KForm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (mask, c) in self.terms() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}·{}", mask_label(mask))?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vector<T>(pub Vec<T>);

impl<T: Scalar> Vector<T> {
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![T::zero(); dim];
        v[i] = T::one();
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scale(&self, s: T) -> Self {
        Self(self.0.iter().map(|&x| x * s).collect())
    }
}

/// Endomorphism of `R^n` as a square matrix acting on column vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap<T>(pub Matrix<T>);

impl<T: Scalar> LinearMap<T> {
    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn apply(&self, v: &Vector<T>) -> Vector<T> {
        Vector(self.0.apply(&v.0))
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0.matmul(&other.0))
    }

    pub fn inverse(&self) -> Option<Self> {
        self.0.inverse().map(Self)
    }

    pub fn pull(&self, a: &KForm<T>) -> Result<KForm<T>> {
        a.pullback(&self.0)
    }
}

/// Symmetric bilinear form, stored as its Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBilinear<T> {
    matrix: Matrix<T>,
}

impl<T: Scalar> SymBilinear<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(ExteriorError::DimensionMismatch(matrix.rows(), matrix.cols()));
        }
        let scale = matrix.max_abs().max(f64::MIN_POSITIVE);
        let dev = matrix.sub(&matrix.transpose()).max_abs();
        let symmetric = if T::EXACT { dev == 0.0 } else { dev <= 1e-12 * scale };
        if !symmetric {
            return Err(ExteriorError::NotSymmetric(dev / scale));
        }
        // remove round-off asymmetry
        let half = T::from_ratio(1, 2);
        let sym = matrix.add(&matrix.transpose()).scale(half);
        Ok(Self { matrix: sym })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self {
            matrix: Matrix::identity(dim),
        }
    }

    pub fn diagonal(diag: &[T]) -> Self {
        Self {
            matrix: Matrix::diagonal(diag),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.matrix[(i, j)]
    }

    pub fn apply(&self, v: &Vector<T>, w: &Vector<T>) -> T {
        let gw = self.matrix.apply(&w.0);
        v.0.iter().zip(gw).fold(T::zero(), |acc, (&a, b)| acc + a * b)
    }

    /// `(positive, negative)` counts; degenerate directions are dropped.
    pub fn signature(&self) -> Signature {
        let (p, q, z) = self.matrix.inertia(1e-10);
        Signature { positive: p, negative: q, zero: z }
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        self.matrix.inverse().ok_or(ExteriorError::DegenerateMetric)
    }

    /// `Aᵀ g A`, the metric pulled back along `A`.
    pub fn pullback(&self, a: &Matrix<T>) -> Self {
        Self {
            matrix: a.transpose().matmul(&self.matrix).matmul(a),
        }
    }

    /// Orthogonal direct sum with a diagonal block.
    pub fn extend(&self, extra: &[T]) -> Self {
        let n = self.dim();
        let m = n + extra.len();
        let matrix = Matrix::from_fn(m, m, |i, j| {
            if i < n && j < n {
                self.matrix[(i, j)]
            } else if i == j {
                extra[i - n]
            } else {
                T::zero()
            }
        });
        Self { matrix }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            matrix: self.matrix.scale(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Signature {
    pub fn is(&self, p: usize, q: usize) -> bool {
        self.positive == p && self.negative == q && self.zero == 0
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.positive, self.negative)?;
        if self.zero > 0 {
            write!(f, "+{} null", self.zero)?;
        }
        Ok(())
    }
}

/// Nonzero form of top degree.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeForm<T>(KForm<T>);

impl<T: Scalar> VolumeForm<T> {
    pub fn new(form: KForm<T>) -> Result<Self> {
        if form.degree != form.dim || form.is_zero() {
            return Err(ExteriorError::BadVolume);
        }
        Ok(Self(form))
    }

    /// `c · e^{1…n}`.
    pub fn standard(dim: usize, c: T) -> Result<Self> {
        Self::new(KForm::from_coeffs(dim, dim, vec![c])?)
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn coefficient(&self) -> T {
        self.0.coeffs[0]
    }

    pub fn form(&self) -> &KForm<T> {
        &self.0
    }
}
