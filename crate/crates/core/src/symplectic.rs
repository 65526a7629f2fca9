//! Symplectic conventions on `R^{2n}` and Lagrangian-subspace primitives.
//!
//! State vectors are ordered `z = (y, w)` with the momentum block
//! `y = P w' + Q w` first and the position block `w` second. With this
//! ordering the Dirichlet plane `{(u, 0)}` collects the states with `w = 0`.
//! The complex structure is
//!
//! ```text
//! J = [[0, -I],
//!      [I,  0]]
//! ```
//!
//! and the symplectic form is `omega(z1, z2) = <J z1, z2>`. Flipping the
//! sign of `J` flips the sign of every index computed downstream.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

/// Relative singular-value floor used when a frame's rank is checked.
pub const RANK_TOL: f64 = 1e-10;
/// Default threshold on principal-angle sines for `intersection_dim`.
pub const INTERSECTION_TOL: f64 = 1e-7;
/// Default isotropy tolerance for validated frames.
pub const ISOTROPY_TOL: f64 = 1e-8;

/// The standard symplectic structure on `R^{2n}`.
#[derive(Debug, Clone)]
pub struct SymplecticConvention<T: Real> {
    n: usize,
    j: DMatrix<T>,
}

impl<T: Real> SymplecticConvention<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("symplectic dimension must be positive".into()));
        }
        Ok(Self { n, j: structure_matrix(n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> &DMatrix<T> {
        &self.j
    }

    pub fn omega(&self, z1: &DVector<T>, z2: &DVector<T>) -> T {
        (&self.j * z1).dot(z2)
    }

    /// Gram matrix `[omega(a_i, b_j)]` for the columns of `a` and `b`.
    pub fn omega_gram(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
        (&self.j * a).transpose() * b
    }

    /// Checks `J^2 = -I`, `J^T = -J` and nondegeneracy of `omega`.
    pub fn check(&self) -> bool {
        let dim = 2 * self.n;
        let id = DMatrix::<T>::identity(dim, dim);
        let sq = &self.j * &self.j + &id;
        let anti = self.j.transpose() + &self.j;
        let tiny = T::lit(1e-14);
        sq.norm() <= tiny && anti.norm() <= tiny && self.j.clone().determinant().abs() > T::lit(0.5)
    }
}

/// `J = [[0, -I], [I, 0]]` of size `2n`.
pub fn structure_matrix<T: Real>(n: usize) -> DMatrix<T> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -T::one();
        j[(n + i, i)] = T::one();
    }
    j
}

/// `omega(z1, z2) = <J z1, z2>`, computed without forming `J`.
pub fn omega<T: Real>(z1: &DVector<T>, z2: &DVector<T>) -> T {
    let n = z1.len() / 2;
    let mut acc = T::zero();
    for i in 0..n {
        // (J z1) = (-w1, y1)
        acc += -z1[n + i] * z2[i] + z1[i] * z2[n + i];
    }
    acc
}

/// Applies `J` to every column of `m`.
pub fn apply_j<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows() / 2;
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        for i in 0..n {
            out[(i, c)] = -m[(n + i, c)];
            out[(n + i, c)] = m[(i, c)];
        }
    }
    out
}

/// A Lagrangian subspace of `(R^{2n}, omega)` represented by a `2n x n`
/// column frame. Any two frames with the same span are interchangeable.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame<T: Real> {
    columns: DMatrix<T>,
    tol_iso: T,
}

impl<T: Real> LagrangianFrame<T> {
    /// Wraps columns without validation. Callers must guarantee the
    /// Lagrangian property; used internally on freshly propagated frames.
    pub(crate) fn from_trusted(columns: DMatrix<T>) -> Self {
        debug_assert!(columns.nrows() == 2 * columns.ncols());
        let f = Self { columns, tol_iso: T::lit(ISOTROPY_TOL) };
        debug_assert!(
            f.isotropy_residual() < T::lit(1e-6),
            "isotropy residual {}",
            f.isotropy_residual()
        );
        f
    }

    pub fn n(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<T> {
        &self.columns
    }

    pub fn into_columns(self) -> DMatrix<T> {
        self.columns
    }

    pub fn tol_iso(&self) -> T {
        self.tol_iso
    }

    /// Momentum block (first `n` rows).
    pub fn top(&self) -> DMatrix<T> {
        let n = self.n();
        self.columns.rows(0, n).into_owned()
    }

    /// Position block (last `n` rows); singular exactly at conjugate points.
    pub fn bottom(&self) -> DMatrix<T> {
        let n = self.n();
        self.columns.rows(n, n).into_owned()
    }

    /// `|Z^T J Z| / |Z|^2` in Frobenius norms.
    pub fn isotropy_residual(&self) -> T {
        isotropy_residual(&self.columns)
    }

    /// Right multiplication by an invertible `n x n` matrix (gauge change).
    pub fn reparameterize(&self, g: &DMatrix<T>) -> Result<Self> {
        frame_from_columns(&(&self.columns * g), self.tol_iso)
    }

    /// Orthogonal projector onto the span.
    pub fn projector(&self) -> DMatrix<T> {
        let q = orthonormal_columns(&self.columns);
        &q * q.transpose()
    }

    /// Whether the columns are orthonormal to `tol`.
    pub fn is_orthonormal(&self, tol: T) -> bool {
        let n = self.n();
        (self.columns.transpose() * &self.columns - DMatrix::<T>::identity(n, n)).norm() <= tol
    }
}

pub fn isotropy_residual<T: Real>(m: &DMatrix<T>) -> T {
    let scale = m.norm_squared();
    if scale <= T::zero() {
        return T::zero();
    }
    (apply_j(m).transpose() * m).norm() / scale
}

fn orthonormal_columns<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    linalg::thin_q(m)
}

/// Validates `m` as a Lagrangian frame.
pub fn frame_from_columns<T: Real>(m: &DMatrix<T>, tol: T) -> Result<LagrangianFrame<T>> {
    let n = m.ncols();
    if n == 0 || m.nrows() != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "expected a 2n x n frame, got {} x {}",
            m.nrows(),
            m.ncols()
        )));
    }
    let sv = linalg::singular_values_ascending(m);
    let smax = *sv.last().expect("nonempty");
    let ratio = if smax > T::zero() { sv[0] / smax } else { T::zero() };
    if ratio <= tol {
        return Err(Error::RankDeficient { ratio: ratio.to_f64_lossy() });
    }
    let residual = isotropy_residual(m);
    if residual > tol {
        return Err(Error::NotIsotropic { residual: residual.to_f64_lossy() });
    }
    Ok(LagrangianFrame { columns: m.clone(), tol_iso: tol })
}

/// Same span, orthonormal columns (thin QR with nonnegative `diag(R)`).
pub fn orthonormalize<T: Real>(f: &LagrangianFrame<T>) -> LagrangianFrame<T> {
    LagrangianFrame { columns: orthonormal_columns(&f.columns), tol_iso: f.tol_iso }
}

/// Orthonormal basis of the intersection of the column spans of `a` and `b`.
///
/// The intersection is read off from the principal angles: columns of `b`'s
/// orthonormal basis combine into intersection vectors exactly where the
/// sines of the principal angles, the singular values of `(I - P_a) Q_b`,
/// fall below `tol`.
pub fn subspace_intersection<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, tol: T) -> DMatrix<T> {
    let rows = a.nrows();
    let qa = linalg::orth_basis(a, T::lit(RANK_TOL));
    let qb = linalg::orth_basis(b, T::lit(RANK_TOL));
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let c = linalg::null_space(&resid, tol);
    if c.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    linalg::orth_basis(&(&qb * c), T::lit(RANK_TOL))
}

/// `dim(span A ∩ span B)`.
pub fn intersection_dim<T: Real>(a: &LagrangianFrame<T>, b: &LagrangianFrame<T>, tol: T) -> usize {
    subspace_intersection(a.columns(), b.columns(), tol).ncols()
}

/// Gap distance `|P_A - P_B|` between the spans, in `[0, 1]`.
pub fn gap_distance<T: Real>(a: &LagrangianFrame<T>, b: &LagrangianFrame<T>) -> T {
    subspace_gap(a.columns(), b.columns())
}

/// Gap distance between the column spans of two arbitrary matrices.
pub fn subspace_gap<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let qa = linalg::orth_basis(a, T::lit(RANK_TOL));
    let qb = linalg::orth_basis(b, T::lit(RANK_TOL));
    let diff = &qa * qa.transpose() - &qb * qb.transpose();
    linalg::spectral_norm(&diff).min(T::one())
}

/// `Λ_D = {(u, 0)}`: identity on the momentum block, zero position block.
pub fn dirichlet_plane<T: Real>(n: usize) -> LagrangianFrame<T> {
    let mut m = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        m[(i, i)] = T::one();
    }
    LagrangianFrame { columns: m, tol_iso: T::lit(ISOTROPY_TOL) }
}

/// Counts `(m+, m0, m-)` of a symmetric form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct InertiaTriple {
    pub positive: usize,
    pub zero: usize,
    pub negative: usize,
}

impl InertiaTriple {
    pub fn dim(&self) -> usize {
        self.positive + self.zero + self.negative
    }

    pub fn signature(&self) -> i64 {
        self.positive as i64 - self.negative as i64
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.zero == 0
    }
}

/// Inertia with eigenvalues in `[-tol |S|, tol |S|]` counted as zero.
pub fn inertia<T: Real>(s: &DMatrix<T>, tol: T) -> InertiaTriple {
    let eig = linalg::sym_eigenvalues(s);
    let scale = eig.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    inertia_from_eigenvalues(&eig, tol * scale)
}

/// Inertia with an absolute zero threshold.
pub fn inertia_abs<T: Real>(s: &DMatrix<T>, threshold: T) -> InertiaTriple {
    inertia_from_eigenvalues(&linalg::sym_eigenvalues(s), threshold)
}

fn inertia_from_eigenvalues<T: Real>(eig: &[T], threshold: T) -> InertiaTriple {
    let mut out = InertiaTriple::default();
    for &l in eig {
        if l > threshold {
            out.positive += 1;
        } else if l < -threshold {
            out.negative += 1;
        } else {
            out.zero += 1;
        }
    }
    out
}

/// A quadratic form given by its Gram matrix in a basis of its domain.
#[derive(Debug, Clone)]
pub struct QuadraticForm<T: Real> {
    /// Columns span the domain subspace of `R^{2n}`.
    pub basis: DMatrix<T>,
    pub gram: DMatrix<T>,
}

impl<T: Real> QuadraticForm<T> {
    pub fn new(basis: DMatrix<T>, gram: DMatrix<T>) -> Self {
        Self { basis, gram: linalg::symmetrize(&gram) }
    }

    pub fn zero_on(basis: DMatrix<T>) -> Self {
        let k = basis.ncols();
        Self { basis, gram: DMatrix::zeros(k, k) }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn inertia(&self, tol: T) -> InertiaTriple {
        inertia(&self.gram, tol)
    }

    pub fn inertia_abs(&self, threshold: T) -> InertiaTriple {
        inertia_abs(&self.gram, threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a + a.transpose()
    }

    /// Graph frame `(S; I)` of a symmetric `S` is Lagrangian.
    fn graph_frame(s: &DMatrix<f64>) -> DMatrix<f64> {
        let n = s.nrows();
        let mut m = DMatrix::zeros(2 * n, n);
        m.view_mut((0, 0), (n, n)).copy_from(s);
        m.view_mut((n, 0), (n, n)).fill_with_identity();
        m
    }

    #[test]
    fn structure_matrix_identities() {
        for n in 1..4 {
            let c = SymplecticConvention::<f64>::new(n).unwrap();
            assert!(c.check());
            assert_eq!(c.j(), &structure_matrix::<f64>(n));
        }
        assert!(SymplecticConvention::<f64>::new(0).is_err());
    }

    #[test]
    fn omega_matches_matrix_form() {
        let c = SymplecticConvention::<f64>::new(2).unwrap();
        let z1 = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let z2 = DVector::from_vec(vec![0.3, 1.0, -1.0, 2.0]);
        assert!((c.omega(&z1, &z2) - omega(&z1, &z2)).abs() < 1e-14);
        assert!((omega(&z1, &z2) + omega(&z2, &z1)).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_line_is_a_frame() {
        let f = frame_from_columns(&col(&[1.0, 0.0]), 1e-8).unwrap();
        assert_eq!(f.n(), 1);
    }

    #[test]
    fn momentum_plane_is_a_frame() {
        let mut m = DMatrix::zeros(4, 2);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        assert!(frame_from_columns(&m, 1e-8).is_ok());
    }

    #[test]
    fn e1_e3_is_not_isotropic() {
        let mut m = DMatrix::zeros(4, 2);
        m[(0, 0)] = 1.0;
        m[(2, 1)] = 1.0;
        // omega(e1, e3) = <J e1, e3> = <e3, e3> = 1.
        let e1 = DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]);
        let e3 = DVector::from_column_slice(&[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(omega(&e1, &e3), 1.0);
        assert!(matches!(frame_from_columns(&m, 1e-8), Err(Error::NotIsotropic { .. })));
    }

    #[test]
    fn rank_deficient_frame_rejected() {
        let m = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(frame_from_columns(&m, 1e-8), Err(Error::RankDeficient { .. })));
        assert!(matches!(
            frame_from_columns(&DMatrix::<f64>::zeros(3, 1), 1e-8),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn orthonormalize_scales_and_is_idempotent() {
        let f = frame_from_columns(&col(&[2.0, 0.0]), 1e-8).unwrap();
        let g = orthonormalize(&f);
        assert!((g.columns() - col(&[1.0, 0.0])).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let s = random_symmetric(&mut rng, 2);
            let f = frame_from_columns(&graph_frame(&s), 1e-8).unwrap();
            let once = orthonormalize(&f);
            let twice = orthonormalize(&once);
            assert!((once.columns() - twice.columns()).norm() < 1e-12);
            assert!(gap_distance(&f, &once) < 1e-12);
            assert!(once.is_orthonormal(1e-12));
        }
    }

    #[test]
    fn intersection_dim_examples() {
        let a = dirichlet_plane::<f64>(1);
        assert_eq!(intersection_dim(&a, &a, 1e-7), 1);
        let b = frame_from_columns(&col(&[0.0, 1.0]), 1e-8).unwrap();
        assert_eq!(intersection_dim(&a, &b, 1e-7), 0);

        // A = span{e1, e2}, B = span{e2, e1 + e3}; they share e2 only.
        let a2 = dirichlet_plane::<f64>(2);
        let bm = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(subspace_intersection(a2.columns(), &bm, 1e-7).ncols(), 1);
        assert_eq!(intersection_dim(&a2, &a2, 1e-7), 2);
    }

    #[test]
    fn gap_distance_examples() {
        let a = dirichlet_plane::<f64>(1);
        let b = frame_from_columns(&col(&[0.0, 1.0]), 1e-8).unwrap();
        assert!(gap_distance(&a, &a) < 1e-15);
        assert!((gap_distance(&a, &b) - 1.0).abs() < 1e-14);
        let th = std::f64::consts::PI / 6.0;
        let c = frame_from_columns(&col(&[th.cos(), th.sin()]), 1e-8).unwrap();
        assert!((gap_distance(&a, &c) - 0.5).abs() < 1e-14);
        assert!((gap_distance(&c, &a) - gap_distance(&a, &c)).abs() < 1e-15);
    }

    #[test]
    fn inertia_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 0.0]));
        assert_eq!(inertia(&d, 1e-12), InertiaTriple { positive: 1, zero: 1, negative: 1 });
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(inertia(&x, 1e-12), InertiaTriple { positive: 1, zero: 0, negative: 1 });
        assert_eq!(inertia(&DMatrix::<f64>::zeros(0, 0), 1e-12).dim(), 0);
    }

    #[test]
    fn inertia_is_congruence_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = random_symmetric(&mut rng, 4);
            let g = DMatrix::from_fn(4, 4, |i, j| {
                rng.random_range(-0.3..0.3) + if i == j { 1.0 } else { 0.0 }
            });
            let t = g.transpose() * &s * &g;
            assert_eq!(inertia(&s, 1e-10), inertia(&t, 1e-10));
            let neg = inertia(&(-&s), 1e-10);
            assert_eq!(neg.positive, inertia(&s, 1e-10).negative);
        }
    }

    #[test]
    fn dirichlet_plane_blocks() {
        let d = dirichlet_plane::<f64>(3);
        assert_eq!(d.top(), DMatrix::<f64>::identity(3, 3));
        assert_eq!(d.bottom(), DMatrix::<f64>::zeros(3, 3));
        assert!(d.isotropy_residual() == 0.0);
    }

    #[test]
    fn reparameterization_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let s1 = random_symmetric(&mut rng, 2);
            // Force a one-dimensional intersection: S2 - S1 has rank one.
            let v = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let s2 = &s1 + &v * v.transpose();
            let a = frame_from_columns(&graph_frame(&s1), 1e-8).unwrap();
            let b = frame_from_columns(&graph_frame(&s2), 1e-8).unwrap();
            let g = DMatrix::from_fn(2, 2, |i, j| {
                rng.random_range(-0.4..0.4) + if i == j { 1.5 } else { 0.0 }
            });
            let ag = a.reparameterize(&g).unwrap();
            assert_eq!(intersection_dim(&a, &b, 1e-7), 1);
            assert_eq!(intersection_dim(&ag, &b, 1e-7), 1);
            assert!((gap_distance(&a, &b) - gap_distance(&ag, &b)).abs() < 1e-10);
        }
    }

    #[test]
    fn single_precision_smoke() {
        let a = dirichlet_plane::<f32>(2);
        assert_eq!(intersection_dim(&a, &a, 1e-4), 2);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0f32, -1.0]));
        assert_eq!(inertia(&d, 1e-5).signature(), 0);
    }
}
