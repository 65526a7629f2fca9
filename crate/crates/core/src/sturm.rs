//! Sturm–Liouville problems `L w = -(P w' + Q w)' + Qᵀ w' + R w` on the
//! real line, their first-order Hamiltonian form and asymptotic data.
//!
//! With `y = P w' + Q w` the eigenvalue equation `L w = 0` becomes
//! `z' = J B(t) z` for `z = (y, w)` and
//!
//! ```text
//! B = [ P⁻¹        -P⁻¹Q          ]
//!     [ -QᵀP⁻¹     QᵀP⁻¹Q - R     ]
//! ```

use crate::coefficient::{Coefficient, Side};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::symplectic::{self, apply_j, InertiaTriple, LagrangianFrame};
use nalgebra::DMatrix;
use std::sync::OnceLock;

/// Limits of the Hamiltonian at `±∞` and their spectral subspaces.
#[derive(Debug, Clone)]
pub struct AsymptoticData<T: Real> {
    pub b_minus: DMatrix<T>,
    pub b_plus: DMatrix<T>,
    /// `V⁺(J B(-∞))`, the limit of the unstable bundle at `-∞`.
    pub vp_minus: LagrangianFrame<T>,
    pub vm_minus: LagrangianFrame<T>,
    pub vp_plus: LagrangianFrame<T>,
    /// `V⁻(J B(+∞))`, the limit of the stable bundle at `+∞`.
    pub vm_plus: LagrangianFrame<T>,
    /// Smallest `|Re λ|` over the spectra of `J B(±∞)`.
    pub spectral_gap: T,
}

/// The operator `L` given by its three coefficient paths.
#[derive(Debug)]
pub struct SturmLiouvilleProblem<T: Real> {
    n: usize,
    p: Coefficient<T>,
    q: Coefficient<T>,
    r: Coefficient<T>,
    asymptotic: OnceLock<Result<AsymptoticData<T>>>,
}

impl<T: Real> Clone for SturmLiouvilleProblem<T> {
    fn clone(&self) -> Self {
        Self::new(self.p.clone(), self.q.clone(), self.r.clone()).expect("validated on construction")
    }
}

impl<T: Real> SturmLiouvilleProblem<T> {
    pub fn new(p: Coefficient<T>, q: Coefficient<T>, r: Coefficient<T>) -> Result<Self> {
        let n = p.dim()?;
        if n == 0 || q.dim()? != n || r.dim()? != n {
            return Err(Error::DimensionMismatch("P, Q, R must share one positive dimension".into()));
        }
        Ok(Self { n, p, q, r, asymptotic: OnceLock::new() })
    }

    /// `P = I`, `Q = 0` with the given potential.
    pub fn schrodinger(r: Coefficient<T>) -> Result<Self> {
        let n = r.dim()?;
        Self::new(Coefficient::identity(n), Coefficient::zeros(n), r)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> &Coefficient<T> {
        &self.p
    }

    pub fn q(&self) -> &Coefficient<T> {
        &self.q
    }

    pub fn r(&self) -> &Coefficient<T> {
        &self.r
    }

    /// The problem for `L + eps I`.
    pub fn shifted(&self, eps: T) -> Result<Self> {
        if eps == T::zero() {
            return Ok(self.clone());
        }
        let shift = Coefficient::Constant(DMatrix::identity(self.n, self.n) * eps);
        Self::new(self.p.clone(), self.q.clone(), Coefficient::Sum(vec![self.r.clone(), shift]))
    }

    /// Block direct sum of two problems (coordinates of `self` first).
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        Self::new(
            Coefficient::DirectSum(vec![self.p.clone(), other.p.clone()]),
            Coefficient::DirectSum(vec![self.q.clone(), other.q.clone()]),
            Coefficient::DirectSum(vec![self.r.clone(), other.r.clone()]),
        )
    }

    /// `(P, Q, R)` at `t`.
    pub fn coefficients_at(&self, t: T) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
        (self.p.eval(t), self.q.eval(t), self.r.eval(t))
    }

    pub fn coefficient_limits(&self, side: Side) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
        (self.p.limit(side), self.q.limit(side), self.r.limit(side))
    }

    /// `B(t)`.
    pub fn hamiltonian_at(&self, t: T) -> Result<DMatrix<T>> {
        let (p, q, r) = self.coefficients_at(t);
        assemble_hamiltonian(&p, &q, &r).map_err(|e| match e {
            Error::SingularP { .. } => Error::SingularP { t: t.to_f64_lossy() },
            other => other,
        })
    }

    /// `B(±∞)`.
    pub fn hamiltonian_limit(&self, side: Side) -> Result<DMatrix<T>> {
        let (p, q, r) = self.coefficient_limits(side);
        let inf = if side == Side::Plus { f64::INFINITY } else { f64::NEG_INFINITY };
        assemble_hamiltonian(&p, &q, &r).map_err(|e| match e {
            Error::SingularP { .. } => Error::SingularP { t: inf },
            other => other,
        })
    }

    /// Limits and spectral splitting at `±∞`, computed once.
    pub fn asymptotic(&self) -> Result<&AsymptoticData<T>> {
        self.asymptotic
            .get_or_init(|| self.compute_asymptotic())
            .as_ref()
            .map_err(Clone::clone)
    }

    fn compute_asymptotic(&self) -> Result<AsymptoticData<T>> {
        let b_minus = self.hamiltonian_limit(Side::Minus)?;
        let b_plus = self.hamiltonian_limit(Side::Plus)?;
        let tol = T::lit(HYPERBOLIC_TOL);
        let sm = hyperbolic_split(&apply_j(&b_minus), tol)?;
        let sp = hyperbolic_split(&apply_j(&b_plus), tol)?;
        Ok(AsymptoticData {
            b_minus,
            b_plus,
            vp_minus: sm.plus,
            vm_minus: sm.minus,
            vp_plus: sp.plus,
            vm_plus: sp.minus,
            spectral_gap: sm.gap.min(sp.gap),
        })
    }
}

/// Relative threshold on `min |Re λ|` below which a matrix is not hyperbolic.
pub const HYPERBOLIC_TOL: f64 = 1e-8;

/// `B` from `P, Q, R`; symmetric by construction.
pub fn assemble_hamiltonian<T: Real>(p: &DMatrix<T>, q: &DMatrix<T>, r: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = p.nrows();
    let sv = linalg::singular_values_ascending(p);
    let smax = *sv.last().expect("nonempty P");
    if !(sv[0] >= T::lit(1e-12) * smax) || smax <= T::zero() {
        return Err(Error::SingularP { t: f64::NAN });
    }
    let pinv = linalg::symmetrize(&p.clone().try_inverse().ok_or(Error::SingularP { t: f64::NAN })?);
    let pinv_q = &pinv * q;
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    linalg::set_block(&mut b, 0, 0, &pinv);
    linalg::set_block(&mut b, 0, n, &(-&pinv_q));
    linalg::set_block(&mut b, n, 0, &(-pinv_q.transpose()));
    linalg::set_block(&mut b, n, n, &(q.transpose() * &pinv_q - r));
    Ok(linalg::symmetrize(&b))
}

/// Invariant subspaces of a hyperbolic Hamiltonian matrix.
#[derive(Debug, Clone)]
pub struct HyperbolicSplit<T: Real> {
    /// Eigenvalues with positive real part.
    pub plus: LagrangianFrame<T>,
    pub minus: LagrangianFrame<T>,
    pub gap: T,
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let k = m.nrows();
    let mut s = m.clone();
    let half = T::lit(0.5);
    for _ in 0..100 {
        let inv = s.clone().try_inverse().ok_or_else(|| Error::NotHyperbolic { gap: 0.0 })?;
        // Determinant scaling speeds up the early iterations.
        let det = s.determinant().abs();
        let c = if det > T::zero() && det.is_finite() {
            det.powf(-T::one() / T::of_usize(k))
        } else {
            T::one()
        };
        let next = (&s * c + inv / c) * half;
        let diff = (&next - &s).norm();
        let scale = next.norm();
        s = next;
        if diff <= T::lit(1e-13) * scale {
            // One more unscaled step to polish.
            let inv = s.clone().try_inverse().ok_or_else(|| Error::NotHyperbolic { gap: 0.0 })?;
            return Ok((&s + inv) * half);
        }
    }
    Err(Error::NotHyperbolic { gap: 0.0 })
}

fn dominant_range<T: Real>(m: &DMatrix<T>, k: usize) -> DMatrix<T> {
    linalg::svd(m).u.columns(0, k).into_owned()
}

/// Splits `M = J S` (`S` symmetric) into its stable and unstable invariant
/// subspaces. Fails when an eigenvalue has `|Re λ| ≤ tol ‖M‖`.
pub fn hyperbolic_split<T: Real>(m: &DMatrix<T>, tol: T) -> Result<HyperbolicSplit<T>> {
    let dim = m.nrows();
    if dim % 2 != 0 || !m.is_square() {
        return Err(Error::DimensionMismatch("Hamiltonian matrix must be 2n x 2n".into()));
    }
    let n = dim / 2;
    let eig = linalg::real_eigenvalues_complex(m);
    let gap = eig.iter().map(|l| l.re.abs()).fold(T::max_value().unwrap(), |a, b| a.min(b));
    let norm = linalg::spectral_norm(m);
    if gap <= tol * norm.max(T::one()) {
        return Err(Error::NotHyperbolic { gap: gap.to_f64_lossy() });
    }
    let s = matrix_sign(m)?;
    let id = DMatrix::<T>::identity(dim, dim);
    let frame = |proj: DMatrix<T>| -> Result<LagrangianFrame<T>> {
        let cols = dominant_range(&proj, n);
        symplectic::frame_from_columns(&cols, T::lit(1e-7))
            .map_err(|_| Error::NotHyperbolic { gap: gap.to_f64_lossy() })
    };
    Ok(HyperbolicSplit { plus: frame(&id + &s)?, minus: frame(&id - &s)?, gap })
}

/// Definiteness of the graph matrix `M` in a frame `(M; I)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct GraphInertia {
    pub vp_minus: Option<InertiaTriple>,
    pub vm_minus: Option<InertiaTriple>,
    pub vp_plus: Option<InertiaTriple>,
    pub vm_plus: Option<InertiaTriple>,
}

/// Estimated hypothesis constants and diagnostics on a probe grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    /// `min σ_min(P(t))`
    pub c1: f64,
    /// `max ‖Q(t)‖`
    pub c2: f64,
    /// `max ‖R(t)‖`
    pub c3: f64,
    pub l2_minus_ok: bool,
    pub l2_plus_ok: bool,
    pub hyperbolic: bool,
    pub spectral_gap: Option<f64>,
    pub transversal_dirichlet_minus: bool,
    pub transversal_dirichlet_plus: bool,
    pub graph_definiteness: Option<GraphInertia>,
    pub symmetric: bool,
    pub notes: Vec<String>,
}

impl ValidationReport {
    /// `(L2)` at both ends, the hard requirement for the index pipeline.
    pub fn l2_ok(&self) -> bool {
        self.l2_minus_ok && self.l2_plus_ok
    }

    pub fn passed(&self) -> bool {
        self.l2_ok() && self.c1 > 0.0 && self.hyperbolic && self.symmetric
    }
}

/// Default probe grid: 2001 points on `[-50, 50]`.
pub fn default_probe_grid<T: Real>() -> Vec<T> {
    (0..=2000).map(|i| T::lit(-50.0 + 0.05 * i as f64)).collect()
}

fn block_positive_definite<T: Real>(p: &DMatrix<T>, q: &DMatrix<T>, r: &DMatrix<T>) -> bool {
    let n = p.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    linalg::set_block(&mut m, 0, 0, p);
    linalg::set_block(&mut m, 0, n, q);
    linalg::set_block(&mut m, n, 0, &q.transpose());
    linalg::set_block(&mut m, n, n, r);
    let eig = linalg::sym_eigenvalues(&m);
    let scale = eig.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    eig[0] > T::lit(1e-12) * scale
}

fn graph_inertia<T: Real>(f: &LagrangianFrame<T>) -> Option<InertiaTriple> {
    let w = f.bottom();
    let winv = w.try_inverse()?;
    let m = linalg::symmetrize(&(f.top() * winv));
    Some(symplectic::inertia(&m, T::lit(1e-10)))
}

/// Checks the standing hypotheses. Never fails; problems are reported.
pub fn validate<T: Real>(p: &SturmLiouvilleProblem<T>, probe_grid: &[T]) -> ValidationReport {
    let mut notes = Vec::new();
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    let mut c3: f64 = 0.0;
    let mut symmetric = true;
    let sides = [Side::Minus, Side::Plus];
    let mut probe: Vec<(String, (DMatrix<T>, DMatrix<T>, DMatrix<T>))> =
        probe_grid.iter().map(|&t| (format!("t = {t}"), p.coefficients_at(t))).collect();
    for s in sides {
        probe.push((format!("limit {s:?}"), p.coefficient_limits(s)));
    }
    for (at, (pm, qm, rm)) in &probe {
        let asym = |m: &DMatrix<T>| (m - m.transpose()).norm() > T::lit(1e-12) * m.norm().max(T::one());
        if symmetric && (asym(pm) || asym(rm)) {
            symmetric = false;
            notes.push(format!("P or R is not symmetric at {at}"));
        }
        let sv = linalg::singular_values_ascending(&linalg::symmetrize(pm));
        let pe = linalg::sym_eigenvalues(pm);
        c1 = c1.min(pe[0].to_f64_lossy().min(sv[0].to_f64_lossy()));
        c2 = c2.max(linalg::spectral_norm(qm).to_f64_lossy());
        c3 = c3.max(linalg::spectral_norm(rm).to_f64_lossy());
    }
    if c1 <= 0.0 {
        notes.push("P is not positive definite everywhere on the probe grid".into());
    }
    let (pl, ql, rl) = p.coefficient_limits(Side::Minus);
    let l2_minus_ok = block_positive_definite(&pl, &ql, &rl);
    let (pl, ql, rl) = p.coefficient_limits(Side::Plus);
    let l2_plus_ok = block_positive_definite(&pl, &ql, &rl);
    for c in [p.p(), p.q(), p.r()] {
        for t in c.tables() {
            let mm = t.edge_mismatch().to_f64_lossy();
            if mm > 1e-6 {
                notes.push(format!("table edge differs from its declared limit by {mm:.3e}"));
            }
        }
    }
    let (hyperbolic, spectral_gap, tdm, tdp, graph) = match p.asymptotic() {
        Ok(a) => {
            let d = symplectic::dirichlet_plane::<T>(p.n());
            let tol = T::lit(symplectic::INTERSECTION_TOL);
            let gi = GraphInertia {
                vp_minus: graph_inertia(&a.vp_minus),
                vm_minus: graph_inertia(&a.vm_minus),
                vp_plus: graph_inertia(&a.vp_plus),
                vm_plus: graph_inertia(&a.vm_plus),
            };
            if gi.vp_minus.is_none() || gi.vm_plus.is_none() {
                notes.push("a limit subspace has no graph frame over the Dirichlet plane; definiteness skipped".into());
            }
            (
                true,
                Some(a.spectral_gap.to_f64_lossy()),
                symplectic::intersection_dim(&a.vp_minus, &d, tol) == 0
                    && symplectic::intersection_dim(&a.vm_minus, &d, tol) == 0,
                symplectic::intersection_dim(&a.vp_plus, &d, tol) == 0
                    && symplectic::intersection_dim(&a.vm_plus, &d, tol) == 0,
                Some(gi),
            )
        }
        Err(e) => {
            notes.push(format!("asymptotic splitting failed: {e}"));
            (false, None, false, false, None)
        }
    };
    ValidationReport {
        c1,
        c2,
        c3,
        l2_minus_ok,
        l2_plus_ok,
        hyperbolic,
        spectral_gap,
        transversal_dirichlet_minus: tdm,
        transversal_dirichlet_plus: tdp,
        graph_definiteness: graph,
        symmetric,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::Profile;

    fn scalar_problem(p: f64, q: f64, r: f64) -> SturmLiouvilleProblem<f64> {
        SturmLiouvilleProblem::new(
            Coefficient::constant_scalar(p),
            Coefficient::constant_scalar(q),
            Coefficient::constant_scalar(r),
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_scalar_examples() {
        let b = scalar_problem(1.0, 0.0, 3.0).hamiltonian_at(0.0).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -3.0]));
        let b = scalar_problem(2.0, 1.0, 0.0).hamiltonian_at(0.0).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((b - want).norm() < 1e-15);
    }

    #[test]
    fn singular_p_rejected() {
        let err = scalar_problem(0.0, 0.0, 1.0).hamiltonian_at(1.5);
        assert!(matches!(err, Err(Error::SingularP { .. })));
    }

    #[test]
    fn split_of_unit_saddle() {
        let b = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let s = hyperbolic_split(&apply_j(&b), 1e-8).unwrap();
        let up = symplectic::frame_from_columns(&DMatrix::from_column_slice(2, 1, &[1.0, 1.0]), 1e-8).unwrap();
        let down = symplectic::frame_from_columns(&DMatrix::from_column_slice(2, 1, &[1.0, -1.0]), 1e-8).unwrap();
        assert!(symplectic::gap_distance(&s.plus, &up) < 1e-12);
        assert!(symplectic::gap_distance(&s.minus, &down) < 1e-12);
        assert!((s.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nilpotent_is_not_hyperbolic() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(hyperbolic_split(&apply_j(&b), 1e-8), Err(Error::NotHyperbolic { .. })));
    }

    #[test]
    fn validation_examples() {
        let grid = default_probe_grid::<f64>();
        let ok = validate(&scalar_problem(1.0, 0.0, 1.0), &grid);
        assert!(ok.passed());
        assert_eq!((ok.c1, ok.c2, ok.c3), (1.0, 0.0, 1.0));
        let bad = validate(&scalar_problem(1.0, 0.0, -1.0), &grid);
        assert!(!bad.l2_ok());
        let well = SturmLiouvilleProblem::schrodinger(Coefficient::scalar(Profile::Sech2Well {
            kappa: 0.5,
            depth: 6.0,
            rate: 1.0,
            center: 0.0,
        }))
        .unwrap();
        let rep = validate(&well, &grid);
        assert!(rep.l2_ok() && rep.transversal_dirichlet_minus && rep.transversal_dirichlet_plus);
        assert!((rep.c3 - 5.5).abs() < 1e-12);
        let gi = rep.graph_definiteness.unwrap();
        assert_eq!(gi.vp_minus.unwrap().positive, 1);
        assert_eq!(gi.vm_plus.unwrap().negative, 1);
    }

    #[test]
    fn block_problem_is_direct_sum() {
        let a = scalar_problem(1.0, 0.0, 2.0);
        let b = scalar_problem(3.0, 0.5, 1.0);
        let s = a.direct_sum(&b).unwrap();
        let bs = s.hamiltonian_at(0.0).unwrap();
        let (ba, bb) = (a.hamiltonian_at(0.0).unwrap(), b.hamiltonian_at(0.0).unwrap());
        // Interleaved coordinates (y1, y2, w1, w2).
        for (i, j, v) in [(0, 0, ba[(0, 0)]), (0, 2, ba[(0, 1)]), (2, 2, ba[(1, 1)]), (1, 1, bb[(0, 0)]), (1, 3, bb[(0, 1)]), (3, 3, bb[(1, 1)])] {
            assert!((bs[(i, j)] - v).abs() < 1e-14);
        }
        assert_eq!(bs[(0, 1)], 0.0);
    }
}
