//! Small dense helpers on top of nalgebra used across modules.

use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

/// Symmetric part `(S + Sᵀ)/2`.
pub fn symmetrize<T: Real>(s: &DMatrix<T>) -> DMatrix<T> {
    (s + s.transpose()) * T::lit(0.5)
}

/// Thin singular value decomposition `m = U diag(σ) Vᵀ` with `σ` in
/// descending order; `U` is `rows x k` and `V` is `cols x k`,
/// `k = min(rows, cols)`. Columns of `U` belonging to zero singular values
/// are zero.
#[derive(Debug, Clone)]
pub struct Svd<T: Real> {
    pub u: DMatrix<T>,
    pub singular_values: Vec<T>,
    pub v: DMatrix<T>,
}

/// One-sided Jacobi SVD. nalgebra 0.35's bidiagonal SVD loses several
/// digits of its singular vectors on some exactly rank-deficient inputs,
/// which the subspace computations here cannot tolerate; Jacobi is accurate
/// to roundoff and cheap at these sizes.
pub fn svd<T: Real>(m: &DMatrix<T>) -> Svd<T> {
    let transposed = m.nrows() < m.ncols();
    let mut a = if transposed { m.transpose() } else { m.clone() };
    let (rows, cols) = a.shape();
    let mut v = DMatrix::<T>::identity(cols, cols);
    let eps = T::default_epsilon();
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * x - s * y;
                        mat[(i, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite singular values"));
    let mut u = DMatrix::zeros(rows, cols);
    let mut vs = DMatrix::zeros(cols, cols);
    let mut sv = Vec::with_capacity(cols);
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > T::zero() {
            u.set_column(k, &(a.column(j) / norms[j]));
        }
        vs.set_column(k, &v.column(j));
        sv.push(norms[j]);
    }
    if transposed {
        Svd { u: vs, singular_values: sv, v: u }
    } else {
        Svd { u, singular_values: sv, v: vs }
    }
}

/// Spectral norm (largest singular value). Zero for empty matrices.
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    svd(m).singular_values[0]
}

/// Singular values sorted in ascending order.
pub fn singular_values_ascending<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv = svd(m).singular_values;
    sv.reverse();
    sv
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues<T: Real>(s: &DMatrix<T>) -> Vec<T> {
    if s.is_empty() {
        return Vec::new();
    }
    let eig = symmetrize(s).symmetric_eigenvalues();
    let mut v: Vec<T> = eig.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    v
}

/// Orthonormal basis of the column space of `m`; columns whose singular
/// value falls below `rel_tol * sigma_max` are dropped.
pub fn orth_basis<T: Real>(m: &DMatrix<T>, rel_tol: T) -> DMatrix<T> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let d = svd(m);
    let smax = d.singular_values[0];
    if smax <= T::zero() {
        return DMatrix::zeros(rows, 0);
    }
    let keep = d.singular_values.iter().take_while(|&&x| x > rel_tol * smax).count();
    d.u.columns(0, keep).into_owned()
}

/// Right null space of `m`: orthonormal columns `c` with `|m c| <= abs_tol`.
pub fn null_space<T: Real>(m: &DMatrix<T>, abs_tol: T) -> DMatrix<T> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad to at least square so that V is complete.
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let d = svd(&padded);
    let first = d.singular_values.iter().take_while(|&&x| x > abs_tol).count();
    d.v.columns(first, cols - first).into_owned()
}

/// Thin QR factor with the sign convention `diag(R) >= 0`, which makes the
/// orthonormal factor a continuous function of the input.
pub fn thin_q<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < T::zero() {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    q
}

/// Solves the least-squares problem `min |m x - b|` with minimum norm.
pub fn lstsq<T: Real>(m: &DMatrix<T>, b: &DVector<T>, rel_tol: T) -> DVector<T> {
    if m.is_empty() {
        return DVector::zeros(m.ncols());
    }
    let d = svd(m);
    let eps = rel_tol * d.singular_values[0];
    let mut x = DVector::zeros(m.ncols());
    for (k, &sigma) in d.singular_values.iter().enumerate() {
        if sigma > eps {
            let coef = d.u.column(k).dot(b) / sigma;
            x += d.v.column(k) * coef;
        }
    }
    x
}

/// Determinant of a complex square matrix via LU.
pub fn complex_det<T: Real>(m: &DMatrix<Complex<T>>) -> Complex<T> {
    if m.is_empty() {
        return Complex::new(T::one(), T::zero());
    }
    m.clone().lu().determinant()
}

/// Eigenvalues of a complex square matrix (diagonal of its complex Schur form).
pub fn complex_eigenvalues<T: Real>(m: &DMatrix<Complex<T>>) -> Vec<Complex<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Eigenvalues of a real square matrix, returned as complex numbers.
pub fn real_eigenvalues_complex<T: Real>(m: &DMatrix<T>) -> Vec<Complex<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect()
}

/// Kronecker-free block helper: places `block` at `(r, c)` inside `target`.
pub fn set_block<T: Real>(target: &mut DMatrix<T>, r: usize, c: usize, block: &DMatrix<T>) {
    target
        .view_mut((r, c), (block.nrows(), block.ncols()))
        .copy_from(block);
}
