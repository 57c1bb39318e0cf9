//! Small dense matrix kernels.
//!
//! Everything here works on row-major `f64` storage and is sized for the
//! problems in this crate: parameter dimension `p` up to ~10 and design
//! covariance matrices up to ~1000 square. No blocking, no SIMD.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot floor used by [`Matrix::cholesky`].
pub const SPD_PIVOT_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Order of a square matrix.
    pub fn order(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dims(
                format!("{} inner rows", self.cols),
                format!("{} rows", other.rows),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Matrix, s: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest |M_ij - M_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = self`.
    ///
    /// A pivot is accepted only if it exceeds `SPD_PIVOT_TOL` times the largest
    /// diagonal entry.
    pub fn cholesky(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::dims(
                "square",
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        let n = self.rows;
        let max_diag = self.diag().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let floor = SPD_PIVOT_TOL * max_diag;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut s = self[(j, j)];
            for k in 0..j {
                s -= l[(j, k)] * l[(j, k)];
            }
            if !(s > floor) || s <= 0.0 {
                return Err(Error::NotPositiveDefinite { index: j, pivot: s });
            }
            let d = s.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                let (ri, rj) = (i * n, j * n);
                for k in 0..j {
                    s -= l.data[ri + k] * l.data[rj + k];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Solves `L Lᵀ X = B` given the lower Cholesky factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::dims(
            format!("{n} rows"),
            format!("{} rows", b.rows()),
        ));
    }
    let m = b.cols();
    let mut x = b.clone();
    for c in 0..m {
        // forward: L z = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // backward: Lᵀ x = z
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Solves `M X = B` for symmetric positive-definite `M`.
pub fn spd_solve(m: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::dims("square", format!("{}x{}", m.rows(), m.cols())));
    }
    if b.rows() != m.rows() {
        return Err(Error::dims(
            format!("{} rows", m.rows()),
            format!("{} rows", b.rows()),
        ));
    }
    let l = m.cholesky()?;
    cholesky_solve(&l, b)
}

/// Determinant by LU factorisation with partial pivoting. Singular input gives 0.
pub fn determinant(m: &Matrix) -> f64 {
    assert!(m.is_square(), "determinant of non-square matrix");
    let n = m.rows();
    let mut a = m.clone();
    let mut det = 1.0;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[(k, k)].abs();
        for i in (k + 1)..n {
            if a[(i, k)].abs() > best {
                best = a[(i, k)].abs();
                piv = i;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != k {
            for c in 0..n {
                a.data.swap(k * n + c, piv * n + c);
            }
            det = -det;
        }
        let pk = a[(k, k)];
        det *= pk;
        for i in (k + 1)..n {
            let f = a[(i, k)] / pk;
            if f == 0.0 {
                continue;
            }
            for c in (k + 1)..n {
                a[(i, c)] -= f * a[(k, c)];
            }
        }
    }
    det
}

/// General inverse by Gauss-Jordan elimination with partial pivoting.
pub fn inverse(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::dims("square", format!("{}x{}", m.rows(), m.cols())));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    let scale = m.max_abs();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&x, &y| a[(x, k)].abs().total_cmp(&a[(y, k)].abs()))
            .unwrap();
        if a[(piv, k)].abs() <= f64::EPSILON * scale * n as f64 {
            return Err(Error::Singular);
        }
        if piv != k {
            for c in 0..n {
                a.data.swap(k * n + c, piv * n + c);
                inv.data.swap(k * n + c, piv * n + c);
            }
        }
        let pk = a[(k, k)];
        for c in 0..n {
            a[(k, c)] /= pk;
            inv[(k, c)] /= pk;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[(i, k)];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                a[(i, c)] -= f * a[(k, c)];
                inv[(i, c)] -= f * inv[(k, c)];
            }
        }
    }
    Ok(inv)
}

/// `tr(Aᵀ M A)`, accumulated as `Σ_ij M_ij (A Aᵀ)_ij` without forming `Aᵀ M A`.
pub fn trace_quadratic_form(a: &Matrix, m: &Matrix) -> Result<f64> {
    if !a.is_square() || !m.is_square() || a.rows() != m.rows() {
        return Err(Error::dims(
            format!("{}x{} pair", m.rows(), m.rows()),
            format!("A {}x{}, M {}x{}", a.rows(), a.cols(), m.rows(), m.cols()),
        ));
    }
    let p = a.rows();
    let mut total = 0.0;
    for i in 0..p {
        let ai = a.row(i);
        for j in 0..p {
            let mij = m[(i, j)];
            if mij == 0.0 {
                continue;
            }
            let aat: f64 = ai.iter().zip(a.row(j)).map(|(x, y)| x * y).sum();
            total += mij * aat;
        }
    }
    Ok(total)
}

/// Unconstrained parameters of a unit-determinant lower-triangular matrix.
///
/// Layout: the first `p - 1` entries are the log-diagonals `η_11 .. η_{p-1,p-1}`,
/// followed by the strictly-lower entries in row-major order
/// (`η_21, η_31, η_32, η_41, ...`). The last diagonal is implied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversaryParams {
    p: usize,
    values: Vec<f64>,
}

impl AdversaryParams {
    pub fn len_for(p: usize) -> usize {
        p * (p + 1) / 2 - 1
    }

    pub fn new(p: usize, values: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::dims("p >= 1", 0));
        }
        if values.len() != Self::len_for(p) {
            return Err(Error::dims(Self::len_for(p), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adversary parameters"));
        }
        Ok(AdversaryParams { p, values })
    }

    pub fn zeros(p: usize) -> Self {
        AdversaryParams {
            p,
            values: vec![0.0; Self::len_for(p)],
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Flat index of the strictly-lower entry `(i, j)`, `i > j`.
    pub fn lower_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i > j && i < self.p);
        (self.p - 1) + i * (i - 1) / 2 + j
    }
}

/// Maps η to the lower-triangular `A(η)` with determinant one.
pub fn cholesky_unit_det(eta: &AdversaryParams) -> Matrix {
    let p = eta.p;
    let mut a = Matrix::zeros(p, p);
    let mut log_sum = 0.0;
    for i in 0..p - 1 {
        a[(i, i)] = eta.values[i].exp();
        log_sum += eta.values[i];
    }
    a[(p - 1, p - 1)] = (-log_sum).exp();
    for i in 1..p {
        for j in 0..i {
            a[(i, j)] = eta.values[eta.lower_index(i, j)];
        }
    }
    a
}

/// Gradient of `-tr(A(η)ᵀ M A(η))` with respect to η, for symmetric `M`.
pub fn adversary_gradient(m: &Matrix, eta: &AdversaryParams) -> Result<Vec<f64>> {
    let p = eta.p;
    if !m.is_square() || m.rows() != p {
        return Err(Error::dims(
            format!("{p}x{p}"),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let a = cholesky_unit_det(eta);
    // dK/dA = -2 M A
    let two_ma = m.matmul(&a)?.scaled(2.0);
    let mut grad = vec![0.0; eta.values.len()];
    let last = two_ma[(p - 1, p - 1)] * a[(p - 1, p - 1)];
    for i in 0..p - 1 {
        grad[i] = -(two_ma[(i, i)] * a[(i, i)] - last);
    }
    for i in 1..p {
        for j in 0..i {
            grad[eta.lower_index(i, j)] = -two_ma[(i, j)];
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k_of(m: &Matrix, eta: &AdversaryParams) -> f64 {
        -trace_quadratic_form(&cholesky_unit_det(eta), m).unwrap()
    }

    #[test]
    fn unit_det_map_at_zero_is_identity() {
        let a = cholesky_unit_det(&AdversaryParams::zeros(3));
        assert_eq!(a, Matrix::identity(3));
    }

    #[test]
    fn unit_det_map_p2_example() {
        let eta = AdversaryParams::new(2, vec![2f64.ln(), 0.5]).unwrap();
        let a = cholesky_unit_det(&eta);
        let want = Matrix::from_rows(&[[2.0, 0.0], [0.5, 0.5]]);
        assert!(a.max_abs_diff(&want) < 1e-15);
        assert!((determinant(&a) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eta_length_is_checked() {
        assert!(AdversaryParams::new(3, vec![0.0; 4]).is_err());
        assert!(AdversaryParams::new(3, vec![0.0; 5]).is_ok());
        assert!(AdversaryParams::new(2, vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn lower_index_layout() {
        let eta = AdversaryParams::zeros(4);
        // diagonals occupy 0..3, then (1,0),(2,0),(2,1),(3,0),(3,1),(3,2)
        assert_eq!(eta.lower_index(1, 0), 3);
        assert_eq!(eta.lower_index(2, 0), 4);
        assert_eq!(eta.lower_index(2, 1), 5);
        assert_eq!(eta.lower_index(3, 2), 8);
    }

    #[test]
    fn adversary_gradient_identity_is_stationary() {
        let g = adversary_gradient(&Matrix::identity(3), &AdversaryParams::zeros(3)).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn adversary_gradient_diag_example() {
        let m = Matrix::from_diag(&[2.0, 1.0]);
        let eta = AdversaryParams::zeros(2);
        let g = adversary_gradient(&m, &eta).unwrap();
        // central differences, h = 1e-6
        let h = 1e-6;
        let fd: Vec<f64> = (0..2)
            .map(|k| {
                let mut up = eta.clone();
                up.values_mut()[k] += h;
                let mut dn = eta.clone();
                dn.values_mut()[k] -= h;
                (k_of(&m, &up) - k_of(&m, &dn)) / (2.0 * h)
            })
            .collect();
        assert!((fd[0] + 2.0).abs() < 1e-8 && fd[1].abs() < 1e-8);
        assert!((g[0] + 2.0).abs() < 1e-14 && g[1].abs() < 1e-14);
    }

    #[test]
    fn adversary_gradient_rejects_wrong_order() {
        assert!(adversary_gradient(&Matrix::identity(3), &AdversaryParams::zeros(2)).is_err());
    }

    #[test]
    fn determinant_examples() {
        for n in 1..6 {
            assert_eq!(determinant(&Matrix::identity(n)), 1.0);
        }
        assert_eq!(determinant(&Matrix::from_diag(&[2.0, 3.0])), 6.0);
        let perm = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(determinant(&perm), -1.0);
        let sing = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert_eq!(determinant(&sing), 0.0);
    }

    #[test]
    fn trace_quadratic_form_examples() {
        let m = Matrix::from_rows(&[[3.0, 1.0], [1.0, 2.0]]);
        assert_eq!(trace_quadratic_form(&Matrix::identity(2), &m).unwrap(), 5.0);
        let a = Matrix::from_diag(&[2.0, 1.0]);
        assert_eq!(trace_quadratic_form(&a, &Matrix::identity(2)).unwrap(), 5.0);
        assert!(trace_quadratic_form(&Matrix::identity(3), &m).is_err());
    }

    #[test]
    fn spd_solve_examples() {
        let b = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let x = spd_solve(&Matrix::identity(2), &b).unwrap();
        assert_eq!(x, b);
        let x = spd_solve(&Matrix::from_diag(&[10.0, 10.0]), &Matrix::identity(2)).unwrap();
        assert!(x.max_abs_diff(&Matrix::from_diag(&[0.1, 0.1])) < 1e-16);
    }

    #[test]
    fn inverse_roundtrip_and_singular() {
        let b = Matrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]);
        let prod = b.matmul(&inverse(&b).unwrap()).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(3)) < 1e-14);
        let sing = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert_eq!(inverse(&sing), Err(Error::Singular));
    }

    #[test]
    fn spd_solve_distinguishes_failures() {
        let not_pd = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(
            spd_solve(&not_pd, &Matrix::identity(2)),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            spd_solve(&Matrix::identity(2), &Matrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        // tiny pivot relative to the scale is rejected
        let near = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0 + 1e-14]]);
        assert!(near.cholesky().is_err());
    }
}
