//! Independent eigenvalue counts for `L` from a piecewise-linear finite
//! element discretization on `[-T_o, T_o]` with Dirichlet ends.
//!
//! The stiffness matrix discretizes
//! `a(w, v) = ∫ <P w', v'> + <Q w, v'> + <w', Q v> + <R w, v>`
//! and is symmetric for any `Q`. Counts come from Sylvester inertia of
//! `K - σ M` computed by block `LDLᵀ` on the block-tridiagonal structure.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::sturm::SturmLiouvilleProblem;
use crate::symplectic::{self, InertiaTriple};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DiscretizationConfig {
    /// Half-width of the truncated interval.
    pub t_o: f64,
    /// Interior nodes at the coarsest level.
    pub n_nodes: usize,
    /// Number of levels, doubling `n_nodes` each time.
    pub richardson_levels: usize,
    /// Eigenvalues in `(-zero_window, zero_window)` make a count unstable.
    pub zero_window: f64,
    /// Threshold of the deflated count.
    pub deflation: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self { t_o: 30.0, n_nodes: 3000, richardson_levels: 3, zero_window: 1e-4, deflation: 1e-6 }
    }
}

impl DiscretizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 100 || self.richardson_levels == 0 || !(self.t_o > 0.0) {
            return Err(Error::InvalidInput("oracle needs N >= 100, T_o > 0 and at least one level".into()));
        }
        Ok(())
    }

    fn level(&self, k: usize) -> usize {
        self.n_nodes << k
    }
}

/// Block-tridiagonal matrix with `k x k` blocks.
#[derive(Debug, Clone)]
pub struct BlockTridiag<T: Real> {
    pub diag: Vec<DMatrix<T>>,
    /// `upper[i]` couples block row `i` to column `i + 1`.
    pub upper: Vec<DMatrix<T>>,
    /// `lower[i]` couples block row `i + 1` to column `i`.
    pub lower: Vec<DMatrix<T>>,
}

impl<T: Real> BlockTridiag<T> {
    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self) -> usize {
        self.diag.first().map(|d| d.nrows()).unwrap_or(0)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.diag.iter().all(|d| (d - d.transpose()).norm() <= tol * d.norm().max(T::one()))
            && self
                .upper
                .iter()
                .zip(&self.lower)
                .all(|(u, l)| (u - l.transpose()).norm() <= tol * u.norm().max(T::one()))
    }

    /// `self + s * other` (same sparsity).
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        let comb = |a: &[DMatrix<T>], b: &[DMatrix<T>]| a.iter().zip(b).map(|(x, y)| x + y * s).collect();
        Self {
            diag: comb(&self.diag, &other.diag),
            upper: comb(&self.upper, &other.upper),
            lower: comb(&self.lower, &other.lower),
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let k = self.block_size();
        let m = self.blocks();
        let mut out = DMatrix::zeros(k * m, k * m);
        for i in 0..m {
            linalg::set_block(&mut out, i * k, i * k, &self.diag[i]);
            if i + 1 < m {
                linalg::set_block(&mut out, i * k, (i + 1) * k, &self.upper[i]);
                linalg::set_block(&mut out, (i + 1) * k, i * k, &self.lower[i]);
            }
        }
        out
    }

    /// Inertia of a symmetric block-tridiagonal matrix as the sum of the
    /// inertias of the block pivots (Haynsworth additivity).
    pub fn inertia(&self) -> Result<InertiaTriple> {
        let mut total = InertiaTriple::default();
        let mut prev_inv: Option<DMatrix<T>> = None;
        for i in 0..self.blocks() {
            let mut s = self.diag[i].clone();
            if let Some(inv) = &prev_inv {
                let u = &self.upper[i - 1];
                s -= u.transpose() * inv * u;
            }
            let s = linalg::symmetrize(&s);
            let eig = s.clone().symmetric_eigen();
            let scale = eig.eigenvalues.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
            let floor = T::default_epsilon() * T::lit(64.0) * scale.max(T::lit(1e-30));
            let mut inv_diag = eig.eigenvalues.clone();
            for (j, l) in eig.eigenvalues.iter().enumerate() {
                if *l > floor {
                    total.positive += 1;
                } else if *l < -floor {
                    total.negative += 1;
                } else {
                    total.zero += 1;
                }
                // A numerically zero pivot is nudged so the recursion
                // continues; the zero count records it.
                let safe = if l.abs() > floor { *l } else { floor.max(T::lit(1e-30)) };
                inv_diag[j] = T::one() / safe;
            }
            let v = &eig.eigenvectors;
            prev_inv = Some(v * DMatrix::from_diagonal(&inv_diag) * v.transpose());
        }
        Ok(total)
    }
}

/// Stiffness and mass matrices of the discretized problem.
#[derive(Debug, Clone)]
pub struct Discretization<T: Real> {
    pub stiffness: BlockTridiag<T>,
    pub mass: BlockTridiag<T>,
    pub h: T,
    pub nodes: Vec<T>,
}

impl<T: Real> Discretization<T> {
    /// `#{λ < σ}` for `K x = λ M x`.
    pub fn count_below(&self, sigma: T) -> Result<usize> {
        Ok(self.stiffness.axpy(-sigma, &self.mass).inertia()?.negative)
    }
}

const GAUSS3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Assembles the P1 stiffness and consistent mass matrices with `n_nodes`
/// interior nodes on `[-t_o, t_o]`.
pub fn assemble<T: Real>(p: &SturmLiouvilleProblem<T>, t_o: T, n_nodes: usize) -> Result<Discretization<T>> {
    let n = p.n();
    let h = (t_o + t_o) / T::of_usize(n_nodes + 1);
    let zero = || DMatrix::<T>::zeros(n, n);
    let mut kd = vec![zero(); n_nodes];
    let mut ku = vec![zero(); n_nodes.saturating_sub(1)];
    let mut md = vec![zero(); n_nodes];
    let mut mu = vec![zero(); n_nodes.saturating_sub(1)];
    let id = DMatrix::<T>::identity(n, n);
    let half = T::lit(0.5);
    for e in 0..=n_nodes {
        let x0 = -t_o + h * T::of_usize(e);
        // Local blocks indexed [test][trial].
        let mut loc = [[zero(), zero()], [zero(), zero()]];
        let mut mloc = [[T::zero(); 2]; 2];
        for q in 0..3 {
            let s = (T::lit(GAUSS3_X[q]) + T::one()) * half;
            let wq = T::lit(GAUSS3_W[q]) * half * h;
            let (pm, qm, rm) = p.coefficients_at(x0 + s * h);
            let phi = [T::one() - s, s];
            let dphi = [-T::one() / h, T::one() / h];
            for a in 0..2 {
                for b in 0..2 {
                    let blk = &pm * (dphi[a] * dphi[b])
                        + &qm * (dphi[a] * phi[b])
                        + qm.transpose() * (phi[a] * dphi[b])
                        + &rm * (phi[a] * phi[b]);
                    loc[a][b] += blk * wq;
                    mloc[a][b] += phi[a] * phi[b] * wq;
                }
            }
        }
        // Element e joins full nodes e and e + 1; interior index = full - 1.
        let nodes = [e.checked_sub(1), if e < n_nodes { Some(e) } else { None }];
        for a in 0..2 {
            for b in 0..2 {
                let (Some(i), Some(j)) = (nodes[a], nodes[b]) else { continue };
                if i == j {
                    kd[i] += &loc[a][b];
                    md[i] += &id * mloc[a][b];
                } else if j == i + 1 {
                    ku[i] += &loc[a][b];
                    mu[i] += &id * mloc[a][b];
                }
            }
        }
    }
    let kl = ku.iter().map(|u| u.transpose()).collect();
    let ml = mu.iter().map(|u| u.transpose()).collect();
    let nodes = (1..=n_nodes).map(|i| -t_o + h * T::of_usize(i)).collect();
    Ok(Discretization {
        stiffness: BlockTridiag { diag: kd.into_iter().map(|d| linalg::symmetrize(&d)).collect(), upper: ku, lower: kl },
        mass: BlockTridiag { diag: md, upper: mu, lower: ml },
        h,
        nodes,
    })
}

/// Per-level results of a negative count.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OracleCount {
    pub count: usize,
    pub levels: Vec<usize>,
    pub nodes: Vec<usize>,
    /// Eigenvalues found in the zero window at the finest level.
    pub near_zero: usize,
}

/// `#{λ < 0}`; must agree across all refinement levels, and no eigenvalue
/// may approach zero.
///
/// Eigenvalues within `100 * zero_window` of zero at the two finest levels
/// are tracked and extrapolated with the `O(h²)` error model; the count is
/// rejected if any of them, or its extrapolation, lies in the zero window.
pub fn negative_count<T: Real>(p: &SturmLiouvilleProblem<T>, cfg: &DiscretizationConfig) -> Result<OracleCount> {
    cfg.validate()?;
    let mut levels = Vec::new();
    let mut nodes = Vec::new();
    let w = T::lit(cfg.zero_window);
    let probe = w * T::lit(100.0);
    let mut near: Vec<Vec<T>> = Vec::new();
    for k in 0..cfg.richardson_levels {
        let nn = cfg.level(k);
        let d = assemble(p, T::lit(cfg.t_o), nn)?;
        levels.push(d.count_below(T::zero())?);
        nodes.push(nn);
        near.push(eigenvalues_in(&d, -probe, probe)?);
    }
    let finest = near.last().expect("at least one level");
    let mut near_zero = finest.iter().filter(|l| l.abs() < w).count();
    if near.len() >= 2 {
        let coarse = &near[near.len() - 2];
        if coarse.len() == finest.len() {
            let four = T::lit(4.0);
            near_zero += coarse
                .iter()
                .zip(finest)
                .filter(|(c, f)| f.abs() >= w && ((four * **f - **c) / T::lit(3.0)).abs() < w)
                .count();
        }
    }
    if near_zero > 0 {
        return Err(Error::UnstableCount {
            counts: levels,
            detail: format!("{near_zero} eigenvalue(s) within {:.1e} of zero", cfg.zero_window),
        });
    }
    if levels.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::UnstableCount { counts: levels, detail: "levels disagree".into() });
    }
    Ok(OracleCount { count: levels[0], levels, nodes, near_zero })
}

/// All eigenvalues in `(lo, hi)` by bisection on counts.
pub fn eigenvalues_in<T: Real>(d: &Discretization<T>, lo: T, hi: T) -> Result<Vec<T>> {
    let base = d.count_below(lo)?;
    let top = d.count_below(hi)?;
    let mut out = Vec::with_capacity(top - base);
    for j in base..top {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = (a + b) * T::lit(0.5);
            if mid <= a || mid >= b || (b - a) <= T::lit(1e-13) * (T::one() + mid.abs()) {
                break;
            }
            if d.count_below(mid)? > j {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push((a + b) * T::lit(0.5));
    }
    Ok(out)
}

/// `#{λ < -deflation}` for operators with a known kernel; must agree across
/// levels.
pub fn deflated_negative_count<T: Real>(
    p: &SturmLiouvilleProblem<T>,
    cfg: &DiscretizationConfig,
) -> Result<OracleCount> {
    cfg.validate()?;
    let mut levels = Vec::new();
    let mut nodes = Vec::new();
    let mut near_zero = 0;
    let d0 = T::lit(cfg.deflation);
    for k in 0..cfg.richardson_levels {
        let nn = cfg.level(k);
        let d = assemble(p, T::lit(cfg.t_o), nn)?;
        levels.push(d.count_below(-d0)?);
        near_zero = d.count_below(d0)? - levels[k];
        nodes.push(nn);
    }
    if levels.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::UnstableCount { counts: levels, detail: "deflated levels disagree".into() });
    }
    Ok(OracleCount { count: levels[0], levels, nodes, near_zero })
}

/// Lower bound on the spectrum: `min λ_min(R - Qᵀ P⁻¹ Q)` over the nodes.
fn spectrum_floor<T: Real>(p: &SturmLiouvilleProblem<T>, nodes: &[T]) -> Result<T> {
    let mut lo = T::zero();
    for &t in nodes {
        let (pm, qm, rm) = p.coefficients_at(t);
        let pinv = pm.try_inverse().ok_or(Error::SingularP { t: t.to_f64_lossy() })?;
        let s = rm - qm.transpose() * pinv * qm;
        lo = lo.min(linalg::sym_eigenvalues(&s)[0]);
    }
    Ok(lo - T::one())
}

/// The `k` smallest generalized eigenvalues at `cfg.n_nodes`, by bisection
/// on inertia counts. Accuracy is `O(h²)`.
pub fn rough_spectrum<T: Real>(p: &SturmLiouvilleProblem<T>, cfg: &DiscretizationConfig, k: usize) -> Result<Vec<T>> {
    cfg.validate()?;
    if k == 0 || k > 20 {
        return Err(Error::InvalidInput("rough_spectrum supports 1..=20 eigenvalues".into()));
    }
    let d = assemble(p, T::lit(cfg.t_o), cfg.n_nodes)?;
    smallest_eigenvalues(&d, k, spectrum_floor(p, &d.nodes)?)
}

/// Bisection for the `k` smallest eigenvalues of a discretization whose
/// spectrum lies above `floor`.
pub fn smallest_eigenvalues<T: Real>(d: &Discretization<T>, k: usize, floor: T) -> Result<Vec<T>> {
    let mut hi = floor.abs().max(T::one());
    while d.count_below(hi)? < k {
        hi = hi * T::lit(2.0);
        if hi > T::lit(1e12) {
            return Err(Error::InvalidInput("fewer eigenvalues than requested".into()));
        }
    }
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        // Eigenvalue j is the smallest σ with count_below(σ) > j.
        let (mut a, mut b) = (floor, hi);
        for _ in 0..200 {
            let mid = (a + b) * T::lit(0.5);
            if mid <= a || mid >= b || (b - a) <= T::lit(1e-12) * (T::one() + mid.abs()) {
                break;
            }
            if d.count_below(mid)? > j {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push((a + b) * T::lit(0.5));
    }
    Ok(out)
}

/// Finite-difference matrices for a traveling-wave linearization on a
/// uniform grid with Dirichlet ends.
#[derive(Debug, Clone)]
pub struct WaveMatrices<T: Real> {
    /// Discretization of `u'' + c u' + B(ξ) u` with exponentially fitted
    /// couplings `e^{±ch/2}/h²` and diagonal `-2/h² - c²/4 + B`.
    pub l_h: BlockTridiag<T>,
    /// Discretization of `-u'' + c²/4 - B(ξ)`.
    pub weighted_h: BlockTridiag<T>,
    pub nodes: Vec<T>,
    pub h: T,
    pub c: T,
}

/// Builds both matrices directly from `B` sampled at interior nodes.
pub fn wave_matrices<T: Real>(c: T, nodes: Vec<T>, b_samples: &[DMatrix<T>]) -> Result<WaveMatrices<T>> {
    if nodes.len() < 3 || b_samples.len() != nodes.len() {
        return Err(Error::InvalidInput("wave matrices need matching nodes and samples".into()));
    }
    let h = nodes[1] - nodes[0];
    let n = b_samples[0].nrows();
    let id = DMatrix::<T>::identity(n, n);
    let inv_h2 = T::one() / (h * h);
    let c2 = c * c / T::lit(4.0);
    let two = T::lit(2.0);
    let m = nodes.len();
    let fitted_up = (c * h / two).exp() * inv_h2;
    let fitted_lo = (-c * h / two).exp() * inv_h2;
    let l_h = BlockTridiag {
        diag: b_samples.iter().map(|b| b - &id * (two * inv_h2 + c2)).collect(),
        upper: vec![&id * fitted_up; m - 1],
        lower: vec![&id * fitted_lo; m - 1],
    };
    let weighted_h = BlockTridiag {
        diag: b_samples.iter().map(|b| &id * (two * inv_h2 + c2) - b).collect(),
        upper: vec![&id * (-inv_h2); m - 1],
        lower: vec![&id * (-inv_h2); m - 1],
    };
    Ok(WaveMatrices { l_h, weighted_h, nodes, h, c })
}

impl<T: Real> WaveMatrices<T> {
    /// Largest relative entry mismatch of `D (-L_h) D⁻¹` against the
    /// weighted matrix over interior block rows, `D = diag(e^{c ξ_i / 2})`.
    pub fn weighted_identity_residual(&self) -> T {
        let m = self.nodes.len();
        let half = T::lit(0.5);
        let d = |i: usize| (self.c * self.nodes[i] * half).exp();
        let mut worst = T::zero();
        let scale = self.weighted_h.diag.iter().map(|b| b.norm()).fold(T::zero(), |a, b| a.max(b));
        for i in 1..m - 1 {
            let diag = -&self.l_h.diag[i];
            let up = -&self.l_h.upper[i] * (d(i) / d(i + 1));
            let lo = -&self.l_h.lower[i - 1] * (d(i) / d(i - 1));
            let r = (diag - &self.weighted_h.diag[i]).norm()
                + (up - &self.weighted_h.upper[i]).norm()
                + (lo - &self.weighted_h.lower[i - 1]).norm();
            worst = worst.max(r / scale);
        }
        worst
    }

    /// Smallest eigenvalues of the (symmetric) weighted matrix.
    pub fn weighted_smallest(&self, k: usize) -> Result<Vec<T>> {
        let id_blocks = self.block_identity();
        let floor = self
            .weighted_h
            .diag
            .iter()
            .map(|b| linalg::sym_eigenvalues(b)[0])
            .fold(T::zero(), |a, b| a.min(b))
            - T::lit(4.0) / (self.h * self.h)
            - T::one();
        let d = Discretization { stiffness: self.weighted_h.clone(), mass: id_blocks, h: self.h, nodes: self.nodes.clone() };
        smallest_eigenvalues(&d, k, floor)
    }

    fn block_identity(&self) -> BlockTridiag<T> {
        let k = self.l_h.block_size();
        let m = self.nodes.len();
        BlockTridiag {
            diag: vec![DMatrix::identity(k, k); m],
            upper: vec![DMatrix::zeros(k, k); m - 1],
            lower: vec![DMatrix::zeros(k, k); m - 1],
        }
    }

    /// For `c = 0`, the `k` largest eigenvalues of `L_h` itself, by
    /// bisection on the inertia of `L_h - σ I`. Independent of the weighted
    /// matrix, so comparing against `-weighted_smallest` tests the identity.
    pub fn l_largest(&self, k: usize) -> Result<Vec<T>> {
        if self.c != T::zero() {
            return Err(Error::InvalidInput("L_h is symmetric only for c = 0".into()));
        }
        let id = self.block_identity();
        let above = |s: T| -> Result<usize> { Ok(self.l_h.axpy(-s, &id).inertia()?.positive) };
        let ceiling = self
            .l_h
            .diag
            .iter()
            .map(|b| *linalg::sym_eigenvalues(b).last().expect("nonempty block"))
            .fold(T::zero(), |a, b| a.max(b))
            + T::lit(4.0) / (self.h * self.h)
            + T::one();
        let mut lo = -ceiling;
        while above(lo)? < k {
            lo = lo * T::lit(2.0);
            if lo < -T::lit(1e12) {
                return Err(Error::InvalidInput("fewer eigenvalues than requested".into()));
            }
        }
        let mut out = Vec::with_capacity(k);
        for j in 0..k {
            // Eigenvalue j from the top is the largest σ with above(σ) > j.
            let (mut a, mut b) = (lo, ceiling);
            for _ in 0..200 {
                let mid = (a + b) * T::lit(0.5);
                if mid <= a || mid >= b || (b - a) <= T::lit(1e-12) * (T::one() + mid.abs()) {
                    break;
                }
                if above(mid)? > j {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push((a + b) * T::lit(0.5));
        }
        Ok(out)
    }
}

/// Inertia of a dense symmetric matrix (used by tests against the block
/// routine).
pub fn dense_inertia<T: Real>(m: &DMatrix<T>) -> InertiaTriple {
    symplectic::inertia(m, T::lit(1e-12))
}
