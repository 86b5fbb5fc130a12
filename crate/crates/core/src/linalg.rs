//! Small dense matrices over a [`Scalar`].
//!
//! Sizes here never exceed a few hundred, so plain row-major storage and
//! Gaussian elimination with partial pivoting are all that is needed.

use std::ops::{Index, IndexMut, Mul};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(T::zero(), |acc, j| acc + self[(i, j)] * v[j])
            })
            .collect()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
    }

    /// Sub-matrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn determinant(&self) -> T {
        assert!(self.is_square(), "determinant of non-square matrix");
        let n = self.rows;
        match n {
            0 => return T::one(),
            1 => return self.data[0],
            2 => return self.data[0] * self.data[3] - self.data[1] * self.data[2],
            _ => {}
        }
        let mut a = self.clone();
        let mut det = T::one();
        for col in 0..n {
            let Some(p) = pivot_row(&a, col, col) else {
                return T::zero();
            };
            if p != col {
                a.swap_rows(p, col);
                det = -det;
            }
            let piv = a[(col, col)];
            det = det * piv;
            for r in col + 1..n {
                let factor = a[(r, col)] / piv;
                if factor.is_zero() {
                    continue;
                }
                for c in col..n {
                    let v = a[(col, c)];
                    a[(r, c)] = a[(r, c)] - factor * v;
                }
            }
        }
        det
    }

    /// Solves `self * X = rhs` for square `self`. Returns `None` when singular.
    pub fn solve_matrix(&self, rhs: &Self) -> Option<Self> {
        assert!(self.is_square());
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let p = pivot_row(&a, col, col)?;
            if a[(p, col)].negligible(scale, 1e-14) {
                return None;
            }
            if p != col {
                a.swap_rows(p, col);
                b.swap_rows(p, col);
            }
            let piv = a[(col, col)];
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[(r, col)] / piv;
                if factor.is_zero() {
                    continue;
                }
                for c in col..n {
                    let v = a[(col, c)];
                    a[(r, c)] = a[(r, c)] - factor * v;
                }
                for c in 0..m {
                    let v = b[(col, c)];
                    b[(r, c)] = b[(r, c)] - factor * v;
                }
            }
        }
        for r in 0..n {
            let piv = a[(r, r)];
            for c in 0..m {
                b[(r, c)] = b[(r, c)] / piv;
            }
        }
        Some(b)
    }

    pub fn solve(&self, rhs: &[T]) -> Option<Vec<T>> {
        let b = Matrix::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.solve_matrix(&b).map(|x| x.data)
    }

    pub fn inverse(&self) -> Option<Self> {
        self.solve_matrix(&Self::identity(self.rows))
    }

    /// Basis of the null space, computed by reduced row echelon form with a
    /// relative pivot tolerance.
    pub fn null_space(&self, tol: f64) -> Vec<Vec<T>> {
        self.null_space_with_free(tol).0
    }

    /// Null space basis together with the free column of each vector; vector
    /// `i` is 1 at its own free column and 0 at the others.
    pub fn null_space_with_free(&self, tol: f64) -> (Vec<Vec<T>>, Vec<usize>) {
        let (rref, pivots) = self.rref(tol);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let basis = free
            .iter()
            .map(|&fc| {
                let mut v = vec![T::zero(); self.cols];
                v[fc] = T::one();
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = -rref[(r, fc)];
                }
                v
            })
            .collect();
        (basis, free)
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.rref(tol).1.len()
    }

    fn rref(&self, tol: f64) -> (Self, Vec<usize>) {
        let mut a = self.clone();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..a.cols {
            if row == a.rows {
                break;
            }
            let Some(p) = pivot_row(&a, col, row) else {
                continue;
            };
            if a[(p, col)].negligible(scale, tol) {
                continue;
            }
            a.swap_rows(p, row);
            let piv = a[(row, col)];
            for c in 0..a.cols {
                a[(row, c)] = a[(row, c)] / piv;
            }
            for r in 0..a.rows {
                if r == row {
                    continue;
                }
                let factor = a[(r, col)];
                if factor.is_zero() {
                    continue;
                }
                for c in 0..a.cols {
                    let v = a[(row, c)];
                    a[(r, c)] = a[(r, c)] - factor * v;
                }
            }
            pivots.push(col);
            row += 1;
        }
        (a, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Inertia `(positive, negative, zero)` of a symmetric matrix via symmetric
    /// Gaussian elimination (Sylvester's law of inertia). Works exactly over the
    /// rationals.
    pub fn inertia(&self, tol: f64) -> (usize, usize, usize) {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let (mut pos, mut neg, mut zero) = (0, 0, 0);
        let mut active: Vec<usize> = (0..n).collect();
        while let Some(&first) = active.first() {
            // largest diagonal pivot among active indices
            let mut best = first;
            for &i in &active {
                if a[(i, i)].abs() > a[(best, best)].abs() {
                    best = i;
                }
            }
            if a[(best, best)].negligible(scale, tol) {
                // all diagonals vanish; look for an off-diagonal entry to mix in
                let mut found = None;
                'outer: for (x, &i) in active.iter().enumerate() {
                    for &j in &active[x + 1..] {
                        if !a[(i, j)].negligible(scale, tol) {
                            found = Some((i, j));
                            break 'outer;
                        }
                    }
                }
                match found {
                    None => {
                        zero += active.len();
                        break;
                    }
                    Some((i, j)) => {
                        // replace basis vector i by e_i + e_j: congruence with an elementary matrix
                        for c in 0..n {
                            let v = a[(j, c)];
                            a[(i, c)] = a[(i, c)] + v;
                        }
                        for r in 0..n {
                            let v = a[(r, j)];
                            a[(r, i)] = a[(r, i)] + v;
                        }
                        continue;
                    }
                }
            }
            let p = best;
            let piv = a[(p, p)];
            if piv > T::zero() {
                pos += 1;
            } else {
                neg += 1;
            }
            active.retain(|&i| i != p);
            for &r in &active {
                let factor = a[(r, p)] / piv;
                if factor.is_zero() {
                    continue;
                }
                for &c in &active {
                    let v = a[(p, c)];
                    a[(r, c)] = a[(r, c)] - factor * v;
                }
            }
            for &r in &active {
                a[(r, p)] = T::zero();
                a[(p, r)] = T::zero();
            }
        }
        (pos, neg, zero)
    }
}

fn pivot_row<T: Scalar>(a: &Matrix<T>, col: usize, from: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for r in from..a.rows {
        let v = a[(r, col)];
        if v.is_zero() {
            continue;
        }
        match best {
            Some(b) if a[(b, col)].abs() >= v.abs() => {}
            _ => best = Some(r),
        }
    }
    best
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;

    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        self.matmul(rhs)
    }
}

impl Matrix<f64> {
    /// Least-squares solution of an overdetermined system via normal equations.
    pub fn least_squares(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let at = self.transpose();
        let ata = at.matmul(self);
        let atb = at.apply(rhs);
        ata.solve(&atb)
    }

    /// 1-norm condition number estimate from an explicit inverse.
    pub fn condition_number(&self) -> f64 {
        match self.inverse() {
            None => f64::INFINITY,
            Some(inv) => norm_1(self) * norm_1(&inv),
        }
    }
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &Matrix<f64>) -> Matrix<f64> {
    let n = a.rows();
    let norm = norm_1(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(1.0 / f64::from(2u32.pow(squarings)));
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..=20 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        sum = sum.add(&term);
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

fn norm_1(m: &Matrix<f64>) -> f64 {
    (0..m.cols)
        .map(|j| (0..m.rows).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
