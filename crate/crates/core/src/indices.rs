//! Index calculus on the Lagrangian Grassmannian: the form `Q(α, β; δ)`,
//! triple and Hörmander indices, Maslov indices by crossing forms, and the
//! spectral flow of symmetric matrix paths.

use crate::crossings::{
    locate_crossings, CrossingFormProvider, CrossingPlacement, LagrangianCurve, LocatorConfig,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::symplectic::{
    self, apply_j, InertiaTriple, LagrangianFrame, QuadraticForm, INTERSECTION_TOL, RANK_TOL,
};
use nalgebra::{DMatrix, DVector};

/// Zero threshold for the inertia of forms built here: relative to the
/// largest eigenvalue, with an absolute floor so vanishing forms count as zero.
pub const FORM_TOL: f64 = 1e-8;

pub fn form_inertia<T: Real>(q: &QuadraticForm<T>) -> InertiaTriple {
    let eig = linalg::sym_eigenvalues(&q.gram);
    let scale = eig.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    let thr = (T::lit(FORM_TOL) * scale).max(T::lit(FORM_TOL * 1e-2));
    symplectic::inertia_abs(&q.gram, thr)
}

fn check_same_space<T: Real>(frames: &[&DMatrix<T>]) -> Result<()> {
    let rows = frames[0].nrows();
    if frames.iter().any(|f| f.nrows() != rows) {
        return Err(Error::DimensionMismatch("subspaces live in different spaces".into()));
    }
    Ok(())
}

/// The form `Q(α, β; δ)(x1, x2) = ω(y1, z2)` on `α ∩ (β + δ)`, where
/// `x = y + z` with `y ∈ β`, `z ∈ δ`. When `β ∩ δ ≠ 0` the split uses the
/// minimum-norm coefficients.
pub fn pair_quadratic_form<T: Real>(
    alpha: &LagrangianFrame<T>,
    beta: &LagrangianFrame<T>,
    delta: &LagrangianFrame<T>,
) -> Result<QuadraticForm<T>> {
    let (a, b, d) = (alpha.columns(), beta.columns(), delta.columns());
    check_same_space(&[a, b, d])?;
    let dim = a.nrows();
    let (kb, kd) = (b.ncols(), d.ncols());
    let mut bd = DMatrix::zeros(dim, kb + kd);
    linalg::set_block(&mut bd, 0, 0, b);
    linalg::set_block(&mut bd, 0, kb, d);
    let sum = linalg::orth_basis(&bd, T::lit(RANK_TOL));
    let domain = symplectic::subspace_intersection(a, &sum, T::lit(INTERSECTION_TOL));
    let k = domain.ncols();
    if k == 0 {
        return Ok(QuadraticForm::zero_on(domain));
    }
    let mut ys = DMatrix::zeros(dim, k);
    let mut zs = DMatrix::zeros(dim, k);
    for j in 0..k {
        let x: DVector<T> = domain.column(j).into_owned();
        let coef = linalg::lstsq(&bd, &x, T::lit(RANK_TOL));
        let p = coef.rows(0, kb).into_owned();
        let q = coef.rows(kb, kd).into_owned();
        ys.set_column(j, &(b * p));
        zs.set_column(j, &(d * q));
    }
    // ω(y_i, z_j) = <J y_i, z_j>
    let gram = apply_j(&ys).transpose() * zs;
    Ok(QuadraticForm::new(domain, gram))
}

fn intersection<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    symplectic::subspace_intersection(a, b, T::lit(INTERSECTION_TOL))
}

/// Triple index `ι(α, β, κ) = m+(Q(α, β; κ)) + dim(α ∩ κ) - dim(α ∩ β ∩ κ)`.
pub fn triple_index<T: Real>(
    alpha: &LagrangianFrame<T>,
    beta: &LagrangianFrame<T>,
    kappa: &LagrangianFrame<T>,
) -> Result<i64> {
    let q = pair_quadratic_form(alpha, beta, kappa)?;
    let (a, b, k) = (alpha.columns(), beta.columns(), kappa.columns());
    let ak = intersection(a, k).ncols();
    let ab = intersection(a, b);
    let abk = if ab.ncols() == 0 { 0 } else { intersection(&ab, k).ncols() };
    Ok(form_inertia(&q).positive as i64 + ak as i64 - abk as i64)
}

/// Triple index by the witness formula
/// `m-(Q(α, δ; β)) + m-(Q(β, δ; κ)) - m-(Q(α, δ; κ))` with `δ` transversal
/// to all three.
pub fn triple_index_with_witness<T: Real>(
    alpha: &LagrangianFrame<T>,
    beta: &LagrangianFrame<T>,
    kappa: &LagrangianFrame<T>,
    delta: &LagrangianFrame<T>,
) -> Result<i64> {
    let tol = T::lit(INTERSECTION_TOL);
    for f in [alpha, beta, kappa] {
        if symplectic::intersection_dim(f, delta, tol) != 0 {
            return Err(Error::InvalidInput("witness is not transversal to the triple".into()));
        }
    }
    let m = |x: &LagrangianFrame<T>, y: &LagrangianFrame<T>| -> Result<i64> {
        Ok(form_inertia(&pair_quadratic_form(x, delta, y)?).negative as i64)
    };
    Ok(m(alpha, beta)? + m(beta, kappa)? - m(alpha, kappa)?)
}

/// Smallest principal-angle sine between two Lagrangians.
fn transversality<T: Real>(a: &LagrangianFrame<T>, b: &LagrangianFrame<T>) -> T {
    let qa = symplectic::orthonormalize(a).into_columns();
    let qb = symplectic::orthonormalize(b).into_columns();
    let resid = &qb - &qa * (qa.transpose() * &qb);
    linalg::singular_values_ascending(&resid)[0]
}

/// A Lagrangian transversal to every frame in `frames`, chosen among the
/// diagonal family `span(cos θ I; sin θ I)`. Each frame is non-transversal
/// to at most `n` members of that family, so trying `n * len + 1` angles
/// always succeeds; the best-conditioned candidate is returned.
pub fn common_transversal<T: Real>(frames: &[&LagrangianFrame<T>]) -> LagrangianFrame<T> {
    let n = frames[0].n();
    let tries = 4 * (n * frames.len() + 1);
    let mut best: Option<(T, LagrangianFrame<T>)> = None;
    for k in 0..tries {
        // Irrational offset keeps the candidates away from coordinate planes.
        let theta = T::pi() * (T::of_usize(k) + T::lit(0.381966)) / T::of_usize(tries);
        let mut m = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            m[(i, i)] = theta.cos();
            m[(n + i, i)] = theta.sin();
        }
        let cand = LagrangianFrame::from_trusted(m);
        let score = frames
            .iter()
            .map(|f| transversality(f, &cand))
            .fold(T::one(), |a, b| a.min(b));
        if best.as_ref().map(|(s, _)| score > *s).unwrap_or(true) {
            best = Some((score, cand));
        }
    }
    best.expect("at least one candidate").1
}

/// Both routes of the Hörmander index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct HormanderRoutes {
    /// `ι(λ1, λ2, κ2) - ι(λ1, λ2, κ1)`
    pub first: i64,
    /// `ι(λ1, κ1, κ2) - ι(λ2, κ1, κ2)`
    pub second: i64,
}

impl HormanderRoutes {
    pub fn consistent(&self) -> bool {
        self.first == self.second
    }
}

pub fn hormander_routes<T: Real>(
    l1: &LagrangianFrame<T>,
    l2: &LagrangianFrame<T>,
    k1: &LagrangianFrame<T>,
    k2: &LagrangianFrame<T>,
) -> Result<HormanderRoutes> {
    Ok(HormanderRoutes {
        first: triple_index(l1, l2, k2)? - triple_index(l1, l2, k1)?,
        second: triple_index(l1, k1, k2)? - triple_index(l2, k1, k2)?,
    })
}

/// Hörmander index `s(λ1, λ2; κ1, κ2)`; fails if the two triple-index
/// routes disagree.
pub fn hormander_index<T: Real>(
    l1: &LagrangianFrame<T>,
    l2: &LagrangianFrame<T>,
    k1: &LagrangianFrame<T>,
    k2: &LagrangianFrame<T>,
) -> Result<i64> {
    let r = hormander_routes(l1, l2, k1, k2)?;
    if !r.consistent() {
        return Err(Error::InconsistentIndex { first: r.first, second: r.second });
    }
    Ok(r.first)
}

/// Crossing form with its location and domain.
#[derive(Debug, Clone)]
pub struct CrossingForm<T: Real> {
    pub location: T,
    /// Basis of `Λ(location) ∩ V` as columns.
    pub kernel_basis: DMatrix<T>,
    pub form: QuadraticForm<T>,
    pub inertia: InertiaTriple,
    pub placement: CrossingPlacement,
    /// Contribution to the Maslov index under the endpoint convention.
    pub contribution: i64,
    /// Net winding jump observed by the locator.
    pub jump: i64,
    /// Intersection dimension at the refined location.
    pub multiplicity: usize,
    pub width: T,
}

impl<T: Real> CrossingForm<T> {
    pub fn is_regular(&self) -> bool {
        self.inertia.zero == 0
    }
}

/// `Γ = <B ξ, ξ>` on `E ∩ V` for the flow `ż = J B z`.
pub fn crossing_form_hamiltonian<T: Real>(
    location: T,
    b_at: &DMatrix<T>,
    e: &LagrangianFrame<T>,
    v: &LagrangianFrame<T>,
    tol: T,
) -> Result<QuadraticForm<T>> {
    let kernel = symplectic::subspace_intersection(e.columns(), v.columns(), tol);
    if kernel.ncols() == 0 {
        return Err(Error::EmptyKernel { location: location.to_f64_lossy() });
    }
    let gram = kernel.transpose() * b_at * &kernel;
    Ok(QuadraticForm::new(kernel, gram))
}

/// Crossing forms of a Hamiltonian flow `ż = J B(t) z`, given `B(t)`.
pub struct HamiltonianForm<F> {
    pub b_at: F,
}

impl<T: Real, F: Fn(T) -> Result<DMatrix<T>>> CrossingFormProvider<T> for HamiltonianForm<F> {
    fn crossing_form(&self, t: T, _frame: &LagrangianFrame<T>, kernel: &DMatrix<T>) -> Result<QuadraticForm<T>> {
        let b = (self.b_at)(t)?;
        Ok(QuadraticForm::new(kernel.clone(), kernel.transpose() * b * kernel))
    }
}

/// Maslov index `μ(V, Λ(t))` and the crossings it was assembled from.
#[derive(Debug, Clone)]
pub struct MaslovResult<T: Real> {
    pub index: i64,
    pub crossings: Vec<CrossingForm<T>>,
    /// All crossing forms nondegenerate.
    pub regular: bool,
    /// Independent winding count over the same path.
    pub winding: i64,
}

impl<T: Real> MaslovResult<T> {
    /// Whether the crossing-form sum agrees with the winding count.
    pub fn consistent(&self) -> bool {
        self.index == self.winding
    }

    pub fn require_regular(self) -> Result<Self> {
        if let Some(c) = self.crossings.iter().find(|c| !c.is_regular()) {
            return Err(Error::NonRegularCrossing { location: c.location.to_f64_lossy() });
        }
        Ok(self)
    }
}

/// Maslov index by the crossing-form formula
/// `m+(Γ(a)) + Σ_{a<t<b} sign Γ(t) - m-(Γ(b))`.
///
/// Crossings are located by winding on `grid` and refined by bisection;
/// the grid only needs to be fine enough for the locator to track the
/// eigenphases, not to isolate crossings.
pub fn maslov_index<T, C, P>(
    curve: &C,
    grid: &[T],
    reference: &LagrangianFrame<T>,
    provider: &P,
    cfg: &LocatorConfig<T>,
) -> Result<MaslovResult<T>>
where
    T: Real,
    C: LagrangianCurve<T>,
    P: CrossingFormProvider<T>,
{
    let scan = locate_crossings(curve, grid, reference, cfg)?;
    let mut crossings = Vec::with_capacity(scan.crossings.len());
    let mut index = 0;
    let mut regular = true;
    for c in scan.crossings {
        let form = provider.crossing_form(c.tau, &c.frame, &c.kernel)?;
        let inertia = form_inertia(&form);
        let contribution = match c.placement {
            CrossingPlacement::Start => inertia.positive as i64,
            CrossingPlacement::Interior => inertia.signature(),
            CrossingPlacement::End => -(inertia.negative as i64),
        };
        regular &= inertia.zero == 0;
        index += contribution;
        crossings.push(CrossingForm {
            location: c.tau,
            kernel_basis: c.kernel,
            form,
            inertia,
            placement: c.placement,
            contribution,
            jump: c.jump,
            multiplicity: c.multiplicity,
            width: c.width,
        });
    }
    Ok(MaslovResult { index, crossings, regular, winding: scan.winding })
}

/// Spectral flow of a sampled path of symmetric matrices, by inertia
/// differencing between consecutive samples. Degenerate interior samples
/// are allowed; the endpoints must be invertible.
///
/// Each step contributes `m-(A_i) - m-(A_{i+1})`, so the total telescopes to
/// `m-(A_first) - m-(A_last)`: eigenvalues moving upward through zero count
/// positively.
pub fn discrete_spectral_flow<T: Real>(path: &[DMatrix<T>], tol: T) -> Result<i64> {
    Ok(spectral_flow_steps(path, tol)?.iter().sum())
}

/// Per-step contributions of [`discrete_spectral_flow`].
pub fn spectral_flow_steps<T: Real>(path: &[DMatrix<T>], tol: T) -> Result<Vec<i64>> {
    if path.is_empty() {
        return Err(Error::InvalidInput("empty matrix path".into()));
    }
    let k = path[0].nrows();
    if path.iter().any(|a| a.nrows() != k || a.ncols() != k) {
        return Err(Error::DimensionMismatch("matrix path changes size".into()));
    }
    let last = path.len() - 1;
    for idx in [0, last] {
        if symplectic::inertia(&path[idx], tol).zero > 0 {
            return Err(Error::DegenerateEndpoint { index: idx });
        }
    }
    // Strictly negative count, so a sample sitting on a crossing is
    // attributed consistently to one side.
    let neg = |a: &DMatrix<T>| symplectic::inertia(a, tol).negative as i64;
    let counts: Vec<i64> = path.iter().map(neg).collect();
    Ok(counts.windows(2).map(|w| w[0] - w[1]).collect())
}
