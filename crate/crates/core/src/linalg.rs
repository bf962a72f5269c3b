//! Small dense linear algebra: LU inversion, Jacobi eigenvalues for symmetric
//! matrices, and Hessenberg/QR eigenvalues for complex matrices.
//!
//! Sizes here never exceed a few dozen rows (q ≤ 33 for d ≤ 4), so everything
//! is row-major `Vec` storage and straightforward loops.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::{Num, Zero};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Copy + Num> DenseMatrix<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![E::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = E::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[E]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!("matrix data has {} entries, expected {}x{}", data.len(), rows, cols)));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<E>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Config("ragged rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() })
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

    pub fn as_slice(&self) -> &[E] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[E] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] = out.data[i * rhs.cols + j] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// `y = A x` written into `out`.
    pub fn matvec_into(&self, x: &[E], out: &mut [E]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = E::zero();
            for (a, b) in row.iter().zip(x) {
                acc = acc + *a * *b;
            }
            *o = acc;
        }
    }

    pub fn matvec(&self, x: &[E]) -> Vec<E> {
        let mut out = vec![E::zero(); self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect() }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect() }
    }

    pub fn scale(&self, c: E) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| *a * c).collect() }
    }

    pub fn map<F: Copy + Num>(&self, f: impl Fn(E) -> F) -> DenseMatrix<F> {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| f(a)).collect() }
    }
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        self.data.iter().zip(&rhs.data).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_complex(&self) -> DenseMatrix<Complex<T>> {
        self.map(|v| Complex::new(v, T::zero()))
    }
}

impl<E> Index<(usize, usize)> for DenseMatrix<E> {
    type Output = E;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &E {
        &self.data[r * self.cols + c]
    }
}

impl<E> IndexMut<(usize, usize)> for DenseMatrix<E> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut E {
        &mut self.data[r * self.cols + c]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

const PIVOT_TOL: f64 = 1e-13;

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Config(format!("LU of non-square {}x{} matrix", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(T::min_positive_value());
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= T::lit(PIVOT_TOL) * scale {
                return Err(Error::SingularMatrix { pivot: pmax.as_f64(), column: k });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= factor * v;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[(i, j)];
                x[i] = x[i] - u * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> DenseMatrix<T> {
        let n = self.lu.rows;
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

pub fn lu_invert<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    Ok(Lu::factor(a)?.inverse())
}

/// Eigenvalues of the symmetric part `(A + Aᵀ)/2`, ascending, by cyclic Jacobi
/// rotations.
pub fn sym_eigenvalues<T: Scalar>(a: &DenseMatrix<T>) -> Result<Vec<T>> {
    if !a.is_square() {
        return Err(Error::Config(format!("eigenvalues of non-square {}x{} matrix", a.rows, a.cols)));
    }
    let n = a.rows;
    let half = T::lit(0.5);
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = half * (a[(i, j)] + a[(j, i)]);
        }
    }
    let fro = m.data.iter().map(|v| *v * *v).sum::<T>().sqrt();
    let target = T::lit(1e-12) * fro.max(T::one());
    let off = |m: &DenseMatrix<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&m) > target {
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::NumericalFailure("Jacobi iteration did not converge".into()));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(ev)
}

/// Eigenvalues of a general complex matrix: Householder reduction to upper
/// Hessenberg form followed by single-shift QR with Wilkinson shifts.
pub fn complex_eigenvalues<T: Scalar>(a: &DenseMatrix<Complex<T>>) -> Result<Vec<Complex<T>>> {
    if !a.is_square() {
        return Err(Error::Config(format!("eigenvalues of non-square {}x{} matrix", a.rows, a.cols)));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    hessenberg_in_place(&mut h);

    let eps = T::epsilon();
    let mut eig = vec![Complex::zero(); n];
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let max_total = 60 * n.max(4);
    while hi > 0 {
        // locate the start of the unreduced trailing block
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let diag = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if sub <= eps * diag || sub <= T::min_positive_value() {
                h[(l, l - 1)] = Complex::zero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_total {
            return Err(Error::NumericalFailure(format!("QR iteration did not converge for {n}x{n} matrix")));
        }
        let mu = if iter % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex::new(h[(hi, hi - 1)].norm() * T::lit(0.75), T::zero())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_step(&mut h, l, hi, mu);
    }
    eig[0] = h[(0, 0)];
    Ok(eig)
}

fn hessenberg_in_place<T: Scalar>(h: &mut DenseMatrix<Complex<T>>) {
    let n = h.rows;
    let two = T::lit(2.0);
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<Complex<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let alpha = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if alpha <= T::min_positive_value() {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() > T::zero() { x0 / x0.norm() } else { Complex::new(T::one(), T::zero()) };
        v[0] += phase * alpha;
        let vnorm2 = v.iter().map(|z| z.norm_sqr()).sum::<T>();
        if vnorm2 <= T::min_positive_value() {
            continue;
        }
        // left: rows k+1.., H <- (I - 2 v v*/|v|²) H
        for j in 0..n {
            let mut dot = Complex::zero();
            for (idx, i) in (k + 1..n).enumerate() {
                dot += v[idx].conj() * h[(i, j)];
            }
            let f = dot * (two / vnorm2);
            for (idx, i) in (k + 1..n).enumerate() {
                h[(i, j)] -= v[idx] * f;
            }
        }
        // right: cols k+1.., H <- H (I - 2 v v*/|v|²)
        for i in 0..n {
            let mut dot = Complex::zero();
            for (idx, j) in (k + 1..n).enumerate() {
                dot += h[(i, j)] * v[idx];
            }
            let f = dot * (two / vnorm2);
            for (idx, j) in (k + 1..n).enumerate() {
                h[(i, j)] -= f * v[idx].conj();
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex::zero();
        }
    }
}

fn wilkinson_shift<T: Scalar>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let m = (a - d) * half;
    let disc = (m * m + b * c).sqrt();
    let mean = (a + d) * half;
    let r1 = mean + disc;
    let r2 = mean - disc;
    if (r1 - d).norm() <= (r2 - d).norm() {
        r1
    } else {
        r2
    }
}

/// One shifted QR step `H - μI = QR, H <- RQ + μI` on the block `l..=hi`.
fn qr_step<T: Scalar>(h: &mut DenseMatrix<Complex<T>>, l: usize, hi: usize, mu: Complex<T>) {
    for k in l..=hi {
        h[(k, k)] -= mu;
    }
    let mut rots: Vec<(Complex<T>, Complex<T>)> = Vec::with_capacity(hi - l);
    for k in l..hi {
        let x = h[(k, k)];
        let y = h[(k + 1, k)];
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (c, s) = if r <= T::min_positive_value() {
            (Complex::new(T::one(), T::zero()), Complex::zero())
        } else {
            (x / r, y / r)
        };
        for j in k..=hi {
            let a = h[(k, j)];
            let b = h[(k + 1, j)];
            h[(k, j)] = c.conj() * a + s.conj() * b;
            h[(k + 1, j)] = -s * a + c * b;
        }
        rots.push((c, s));
    }
    for (idx, k) in (l..hi).enumerate() {
        let (c, s) = rots[idx];
        for i in l..=(k + 1).min(hi) {
            let a = h[(i, k)];
            let b = h[(i, k + 1)];
            h[(i, k)] = a * c + b * s;
            h[(i, k + 1)] = -(a * s.conj()) + b * c.conj();
        }
    }
    for k in l..=hi {
        h[(k, k)] += mu;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn identity_inverts_to_identity() {
        let i = DenseMatrix::<f64>::identity(5);
        assert_eq!(lu_invert(&i).unwrap(), i);
    }

    #[test]
    fn diagonal_inverse() {
        let a = DenseMatrix::from_diagonal(&[2.0, 4.0]);
        let inv = lu_invert(&a).unwrap();
        assert_eq!(inv, DenseMatrix::from_diagonal(&[0.5, 0.25]));
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(lu_invert(&a), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn lu_solve_matches_known_solution() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, -1.0, 0.0], vec![3.0, 0.0, -2.0]]).unwrap();
        let x = [1.0f64, -2.0, 0.5];
        let b = a.matvec(&x);
        let got = Lu::factor(&a).unwrap().solve(&b);
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_on_simple_matrices() {
        let d = DenseMatrix::from_diagonal(&[-1.0, -2.0, 0.0]);
        assert_eq!(sym_eigenvalues(&d).unwrap(), vec![-2.0, -1.0, 0.0]);
        let swap = DenseMatrix::from_rows(&[vec![0.0f64, 1.0], vec![1.0, 0.0]]).unwrap();
        let ev = sym_eigenvalues(&swap).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_rejects_non_square() {
        let a = DenseMatrix::<f64>::zeros(2, 3);
        assert!(sym_eigenvalues(&a).is_err());
    }

    fn sorted_by_angle(mut v: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        v.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
        v
    }

    #[test]
    fn unitary_diagonal_eigenvalues() {
        let thetas = [0.3, -1.1, 2.0, 2.9];
        let diag: Vec<_> = thetas.iter().map(|&t| Complex::from_polar(1.0, t)).collect();
        let ev = sorted_by_angle(complex_eigenvalues(&DenseMatrix::from_diagonal(&diag)).unwrap());
        let expected = sorted_by_angle(diag);
        for (a, b) in ev.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn companion_of_z_squared_minus_one() {
        let a = DenseMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let mut ev: Vec<f64> = complex_eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_matrix_has_conjugate_pair() {
        let t: f64 = 0.7;
        let a = DenseMatrix::from_rows(&[vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]).unwrap().to_complex();
        let ev = complex_eigenvalues(&a).unwrap();
        for z in ev {
            assert!((z.norm() - 1.0).abs() < 1e-13);
            assert!((z.arg().abs() - t).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenpairs_have_small_backward_error() {
        // pseudo-random complex matrix; the check is det(A - λI) ≈ 0 via LU on
        // the realified 2n×2n system.
        let n = 7;
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = c(next(), next());
            }
        }
        let ev = complex_eigenvalues(&a).unwrap();
        let trace: Complex<f64> = (0..n).map(|i| a[(i, i)]).sum();
        let sum: Complex<f64> = ev.iter().sum();
        assert!((trace - sum).norm() < 1e-12);
        for lambda in ev {
            // smallest singular value of A - λI should vanish; use inverse iteration
            let mut shifted = a.clone();
            for i in 0..n {
                shifted[(i, i)] -= lambda;
            }
            let smin = smallest_singular_estimate(&shifted);
            assert!(smin < 1e-9 * 4.0, "sigma_min = {smin}");
        }
    }

    fn smallest_singular_estimate(a: &DenseMatrix<Complex<f64>>) -> f64 {
        // |det| relative to product of row norms is a crude but monotone proxy
        let n = a.rows();
        let mut m = a.clone();
        let mut det_abs = 1.0;
        for k in 0..n {
            let (p, _) =
                (k..n).map(|i| (i, m[(i, k)].norm())).fold((k, -1.0), |b, cur| if cur.1 > b.1 { cur } else { b });
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(p, j)];
                m[(p, j)] = tmp;
            }
            let piv = m[(k, k)];
            det_abs *= piv.norm();
            if piv.norm() == 0.0 {
                return 0.0;
            }
            for i in k + 1..n {
                let f = m[(i, k)] / piv;
                for j in k..n {
                    let v = m[(k, j)];
                    m[(i, j)] -= f * v;
                }
            }
        }
        let norms: f64 = (0..n).map(|i| a.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).product();
        det_abs / norms
    }
}
