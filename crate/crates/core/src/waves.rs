//! Traveling waves of gradient reaction–diffusion systems
//! `u_t = u_xx + ∇F(u)`: profiles, the exponentially weighted operator
//! `𝕃 = -d²/dξ² + c²/4 - ∇²F(w*)`, and the critical-point instability test.

use crate::chebyshev::Collocation;
use crate::coefficient::{Coefficient, CubicSpline, Table};
use crate::error::{Error, Result};
use crate::linalg;
use crate::morse::{morse_index, MorseConfig, MorseResult};
use crate::oracle::{assemble, deflated_negative_count, smallest_eigenvalues, wave_matrices, DiscretizationConfig};
use crate::scalar::Real;
use crate::sturm::SturmLiouvilleProblem;
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

/// Equilibrium residual threshold.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Profile residual and limit tolerance for externally supplied profiles.
pub const PROFILE_TOL: f64 = 1e-6;

type VecFn<T> = Arc<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>;
type MatFn<T> = Arc<dyn Fn(&DVector<T>) -> DMatrix<T> + Send + Sync>;

/// User-supplied gradient and Hessian.
#[derive(Clone)]
pub struct CustomSystem<T: Real> {
    pub name: String,
    pub n: usize,
    pub grad: VecFn<T>,
    pub hess: MatFn<T>,
}

impl<T: Real> fmt::Debug for CustomSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSystem").field("name", &self.name).field("n", &self.n).finish()
    }
}

/// The nonlinearity `∇F` of a gradient reaction–diffusion system.
#[derive(Debug, Clone)]
pub enum ReactionSystem<T: Real> {
    /// `∇F(u) = u(1 - u)(u - a)`
    Nagumo { a: T },
    /// `∇F(u) = u² - u`
    Quadratic,
    /// Scalar `∇F` given on a `u`-grid, spline interpolated.
    Tabulated(CubicSpline<T>),
    DirectSum(Vec<ReactionSystem<T>>),
    Custom(CustomSystem<T>),
}

impl<T: Real> ReactionSystem<T> {
    pub fn custom<G, H>(name: &str, n: usize, grad: G, hess: H) -> Self
    where
        G: Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static,
        H: Fn(&DVector<T>) -> DMatrix<T> + Send + Sync + 'static,
    {
        ReactionSystem::Custom(CustomSystem { name: name.into(), n, grad: Arc::new(grad), hess: Arc::new(hess) })
    }

    pub fn n(&self) -> usize {
        match self {
            ReactionSystem::Nagumo { .. } | ReactionSystem::Quadratic | ReactionSystem::Tabulated(_) => 1,
            ReactionSystem::DirectSum(parts) => parts.iter().map(|p| p.n()).sum(),
            ReactionSystem::Custom(c) => c.n,
        }
    }

    pub fn grad(&self, u: &DVector<T>) -> DVector<T> {
        match self {
            ReactionSystem::Nagumo { a } => {
                let x = u[0];
                DVector::from_element(1, x * (T::one() - x) * (x - *a))
            }
            ReactionSystem::Quadratic => DVector::from_element(1, u[0] * u[0] - u[0]),
            ReactionSystem::Tabulated(s) => DVector::from_element(1, s.eval(u[0])),
            ReactionSystem::DirectSum(parts) => {
                let mut out = DVector::zeros(u.len());
                let mut k = 0;
                for p in parts {
                    let m = p.n();
                    out.rows_mut(k, m).copy_from(&p.grad(&u.rows(k, m).into_owned()));
                    k += m;
                }
                out
            }
            ReactionSystem::Custom(c) => (c.grad)(u),
        }
    }

    pub fn hess(&self, u: &DVector<T>) -> DMatrix<T> {
        match self {
            ReactionSystem::Nagumo { a } => {
                let x = u[0];
                let v = -T::lit(3.0) * x * x + T::lit(2.0) * (T::one() + *a) * x - *a;
                DMatrix::from_element(1, 1, v)
            }
            ReactionSystem::Quadratic => DMatrix::from_element(1, 1, T::lit(2.0) * u[0] - T::one()),
            ReactionSystem::Tabulated(s) => DMatrix::from_element(1, 1, s.derivative(u[0])),
            ReactionSystem::DirectSum(parts) => {
                let mut out = DMatrix::zeros(u.len(), u.len());
                let mut k = 0;
                for p in parts {
                    let m = p.n();
                    linalg::set_block(&mut out, k, k, &p.hess(&u.rows(k, m).into_owned()));
                    k += m;
                }
                out
            }
            ReactionSystem::Custom(c) => (c.hess)(u),
        }
    }

    /// Largest asymmetry `‖H - Hᵀ‖` over the probes.
    pub fn hessian_asymmetry(&self, probes: &[DVector<T>]) -> T {
        probes.iter().fold(T::zero(), |m, u| {
            let h = self.hess(u);
            m.max((&h - h.transpose()).norm())
        })
    }

    /// `NotEquilibrium` unless `‖∇F(u)‖ < 1e-10`.
    pub fn require_equilibrium(&self, u: &DVector<T>) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::DimensionMismatch(format!("state has length {}, system has n = {}", u.len(), self.n())));
        }
        let r = self.grad(u).norm();
        if !(r < T::lit(EQUILIBRIUM_TOL)) {
            return Err(Error::NotEquilibrium { residual: r.to_f64_lossy() });
        }
        Ok(())
    }
}

/// Assumption (H): `∇²F(u±)` negative definite.
pub fn check_h<T: Real>(sys: &ReactionSystem<T>, u_minus: &DVector<T>, u_plus: &DVector<T>) -> Result<bool> {
    sys.require_equilibrium(u_minus)?;
    sys.require_equilibrium(u_plus)?;
    let neg = |u: &DVector<T>| {
        let h = linalg::symmetrize(&sys.hess(u));
        linalg::sym_eigenvalues(&h).iter().all(|&l| l < -T::lit(1e-10))
    };
    Ok(neg(u_minus) && neg(u_plus))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum ProfileKind {
    Analytic(String),
    Numeric,
}

/// A sampled solution of `w'' + c w' + ∇F(w) = 0`.
#[derive(Debug, Clone)]
pub struct WaveProfile<T: Real> {
    pub c: T,
    /// Increasing.
    pub grid: Vec<T>,
    pub w: Vec<DVector<T>>,
    pub w_prime: Vec<DVector<T>>,
    pub w_second: Vec<DVector<T>>,
    pub kind: ProfileKind,
    pub u_minus: DVector<T>,
    pub u_plus: DVector<T>,
    /// Collocation residual of a numeric solve.
    pub bvp_residual: Option<T>,
}

/// `[-40, 40]` with spacing `0.01`.
pub fn default_profile_grid<T: Real>() -> Vec<T> {
    (0..=8000).map(|i| T::lit(-40.0 + 0.01 * i as f64)).collect()
}

impl<T: Real> WaveProfile<T> {
    /// Samples `ξ ↦ (w, w', w'')` on `grid`.
    pub fn from_fn<F>(c: T, grid: Vec<T>, kind: ProfileKind, u_minus: DVector<T>, u_plus: DVector<T>, f: F) -> Self
    where
        F: Fn(T) -> (DVector<T>, DVector<T>, DVector<T>),
    {
        let mut w = Vec::with_capacity(grid.len());
        let mut wp = Vec::with_capacity(grid.len());
        let mut wpp = Vec::with_capacity(grid.len());
        for &x in &grid {
            let (a, b, d) = f(x);
            w.push(a);
            wp.push(b);
            wpp.push(d);
        }
        Self { c, grid, w, w_prime: wp, w_second: wpp, kind, u_minus, u_plus, bvp_residual: None }
    }

    /// Closed-form Nagumo front `w = 1 / (1 + e^{ξ/√2})`, `c = √2 (1/2 - a)`.
    pub fn nagumo_front(a: T, grid: Vec<T>) -> Self {
        let s2 = T::lit(2.0).sqrt();
        let c = s2 * (T::lit(0.5) - a);
        let f = move |x: T| {
            // Logistic form that stays finite for large |ξ|.
            let w = T::one() / (T::one() + (x / s2).exp());
            let wp = -w * (T::one() - w) / s2;
            let wpp = (T::one() - T::lit(2.0) * w) * w * (T::one() - w) / T::lit(2.0);
            (DVector::from_element(1, w), DVector::from_element(1, wp), DVector::from_element(1, wpp))
        };
        Self::from_fn(
            c,
            grid,
            ProfileKind::Analytic(format!("nagumo front a={}", a.to_f64_lossy())),
            DVector::from_element(1, T::one()),
            DVector::zeros(1),
            f,
        )
    }

    /// Standing pulse `w = (3/2) sech²(ξ/2)` of `∇F(u) = u² - u`.
    pub fn quadratic_pulse(grid: Vec<T>) -> Self {
        let f = |x: T| {
            let h = x / T::lit(2.0);
            let s = T::one() / h.cosh();
            let th = h.tanh();
            let s2 = s * s;
            let w = T::lit(1.5) * s2;
            let wp = -T::lit(1.5) * s2 * th;
            let wpp = T::lit(0.75) * s2 * (T::lit(2.0) * th * th - s2);
            (DVector::from_element(1, w), DVector::from_element(1, wp), DVector::from_element(1, wpp))
        };
        Self::from_fn(T::zero(), grid, ProfileKind::Analytic("quadratic pulse".into()), DVector::zeros(1), DVector::zeros(1), f)
    }

    /// The equilibrium `u` as a degenerate profile.
    pub fn constant(u: DVector<T>, c: T, grid: Vec<T>) -> Self {
        let n = u.len();
        let uc = u.clone();
        Self::from_fn(c, grid, ProfileKind::Analytic("constant".into()), u.clone(), u, move |_| {
            (uc.clone(), DVector::zeros(n), DVector::zeros(n))
        })
    }

    pub fn n(&self) -> usize {
        self.u_minus.len()
    }

    /// `sup |w'' + c w' + ∇F(w)|` over the grid.
    pub fn residual(&self, sys: &ReactionSystem<T>) -> T {
        let mut m = T::zero();
        for i in 0..self.grid.len() {
            let r = &self.w_second[i] + &self.w_prime[i] * self.c + sys.grad(&self.w[i]);
            m = m.max(r.amax());
        }
        m
    }

    /// Distance of the end samples from `u±`.
    pub fn limit_error(&self) -> T {
        let k = self.w.len() - 1;
        (&self.w[0] - &self.u_minus).amax().max((&self.w[k] - &self.u_plus).amax())
    }

    pub fn max_speed(&self) -> T {
        self.w_prime.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn validate(&self, sys: &ReactionSystem<T>) -> Result<()> {
        let k = self.grid.len();
        if k < 4 || self.w.len() != k || self.w_prime.len() != k || self.w_second.len() != k {
            return Err(Error::InvalidInput("profile arrays must match the grid (at least 4 samples)".into()));
        }
        if self.grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidInput("profile grid must increase".into()));
        }
        if sys.n() != self.n() || self.w.iter().any(|v| v.len() != self.n()) {
            return Err(Error::DimensionMismatch("profile and system dimensions differ".into()));
        }
        let r = self.residual(sys);
        if !(r < T::lit(PROFILE_TOL)) {
            return Err(Error::InvalidInput(format!("profile residual {:.3e} exceeds {PROFILE_TOL:e}", r.to_f64_lossy())));
        }
        let e = self.limit_error();
        if !(e < T::lit(PROFILE_TOL)) {
            return Err(Error::InvalidInput(format!("profile ends miss u± by {:.3e}", e.to_f64_lossy())));
        }
        Ok(())
    }

    fn cell(&self, x: T) -> usize {
        let k = self.grid.len();
        self.grid.partition_point(|&g| g <= x).clamp(1, k - 1) - 1
    }

    /// Cubic Hermite interpolant of `w'` from `(w', w'')`.
    pub fn w_prime_at(&self, x: T) -> DVector<T> {
        let i = self.cell(x);
        hermite(self.grid[i], self.grid[i + 1], &self.w_prime[i], &self.w_prime[i + 1], &self.w_second[i], &self.w_second[i + 1], x)
    }
}

fn hermite<T: Real>(x0: T, x1: T, f0: &DVector<T>, f1: &DVector<T>, d0: &DVector<T>, d1: &DVector<T>, x: T) -> DVector<T> {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let (two, three) = (T::lit(2.0), T::lit(3.0));
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = -two * s3 + three * s2;
    let h11 = s3 - s2;
    f0 * h00 + d0 * (h10 * h) + f1 * h01 + d1 * (h11 * h)
}

/// Shape of the initial guess.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Template {
    /// `u₋ + (u₊ - u₋)(1 + tanh(ξ / width)) / 2`
    Tanh { width: f64 },
    /// `u₋ + amplitude · sech²(ξ / width)`
    Sech2 { amplitude: Vec<f64>, width: f64 },
}

impl Default for Template {
    fn default() -> Self {
        Template::Tanh { width: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedMode {
    /// `c` is solved for together with the profile.
    Free,
    /// `c` is held at the guess.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseCondition {
    /// `w_k(0) = (u₋ + u₊)_k / 2`
    Midpoint { component: usize },
    /// `w_k'(0) = 0`
    Extremum { component: usize },
    /// `∫ ⟨w - w_template, w_template'⟩ = 0`
    Integral,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BvpConfig {
    pub half_width: f64,
    /// Chebyshev polynomial degree (even).
    pub degree: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub speed: SpeedMode,
    /// Chosen from the data when absent.
    pub phase: Option<PhaseCondition>,
    pub template: Template,
    /// Spacing of the output grid.
    pub output_dt: f64,
}

impl Default for BvpConfig {
    fn default() -> Self {
        Self {
            half_width: 40.0,
            degree: 400,
            tol: 1e-11,
            max_iter: 60,
            speed: SpeedMode::Free,
            phase: None,
            template: Template::default(),
            output_dt: 0.01,
        }
    }
}

impl BvpConfig {
    /// Fixed speed and an extremum phase: the setting for standing pulses.
    pub fn pulse(amplitude: Vec<f64>, width: f64) -> Self {
        Self {
            speed: SpeedMode::Fixed,
            phase: Some(PhaseCondition::Extremum { component: 0 }),
            template: Template::Sech2 { amplitude, width },
            ..Self::default()
        }
    }
}

fn default_phase<T: Real>(u_minus: &DVector<T>, u_plus: &DVector<T>) -> PhaseCondition {
    if u_minus.len() == 1 {
        if u_minus[0] != u_plus[0] {
            PhaseCondition::Midpoint { component: 0 }
        } else {
            PhaseCondition::Extremum { component: 0 }
        }
    } else {
        PhaseCondition::Integral
    }
}

/// Solves `w'' + c w' + ∇F(w) = 0`, `w(±L) = u±`, by Chebyshev collocation
/// and damped Newton. With a fixed speed the translation direction is
/// bordered by an auxiliary unknown `s` multiplying the template slope,
/// which vanishes at a solution.
pub fn solve_front<T: Real>(
    sys: &ReactionSystem<T>,
    c_guess: T,
    u_minus: &DVector<T>,
    u_plus: &DVector<T>,
    cfg: &BvpConfig,
) -> Result<WaveProfile<T>> {
    if !check_h(sys, u_minus, u_plus)? {
        return Err(Error::HypothesisViolation("∇²F(u±) must be negative definite".into()));
    }
    if cfg.degree < 8 || cfg.degree % 2 != 0 || !(cfg.half_width > 0.0) || !(cfg.output_dt > 0.0) {
        return Err(Error::InvalidInput("BVP needs an even degree >= 8 and positive widths".into()));
    }
    let n = sys.n();
    let col = Collocation::new(cfg.degree, T::lit(cfg.half_width));
    let m = col.len();
    let phase = cfg.phase.unwrap_or_else(|| default_phase(u_minus, u_plus));
    let mid = m / 2;

    // Template and its slope at the nodes.
    let mut tmpl = DMatrix::<T>::zeros(m, n);
    for (i, &x) in col.nodes.iter().enumerate() {
        let v = match &cfg.template {
            Template::Tanh { width } => {
                let s = (T::one() + (x / T::lit(*width)).tanh()) * T::lit(0.5);
                u_minus + (u_plus - u_minus) * s
            }
            Template::Sech2 { amplitude, width } => {
                if amplitude.len() != n {
                    return Err(Error::DimensionMismatch("template amplitude length differs from n".into()));
                }
                let s = T::one() / (x / T::lit(*width)).cosh();
                let amp = DVector::from_iterator(n, amplitude.iter().map(|&a| T::lit(a)));
                u_minus + amp * (s * s)
            }
        };
        tmpl.row_mut(i).copy_from(&v.transpose());
    }
    let tslope = &col.d1 * &tmpl;

    match phase {
        PhaseCondition::Midpoint { component } | PhaseCondition::Extremum { component } if component >= n => {
            return Err(Error::PhaseConditionSingular(format!("component {component} out of range")));
        }
        PhaseCondition::Midpoint { component } if u_minus[component] == u_plus[component] => {
            return Err(Error::PhaseConditionSingular("midpoint condition needs distinct limits".into()));
        }
        PhaseCondition::Integral => {
            let mass: T = (0..m).fold(T::zero(), |a, i| a + col.weights[i] * tslope.row(i).norm_squared());
            if !(mass > T::lit(1e-12)) {
                return Err(Error::PhaseConditionSingular("template has no slope".into()));
            }
        }
        _ => {}
    }

    let size = m * n + 1;
    let idx = |i: usize, k: usize| i * n + k;
    let mut x = DVector::<T>::zeros(size);
    for i in 0..m {
        for k in 0..n {
            x[idx(i, k)] = tmpl[(i, k)];
        }
    }
    x[size - 1] = match cfg.speed {
        SpeedMode::Free => c_guess,
        SpeedMode::Fixed => T::zero(),
    };

    let residual = |x: &DVector<T>| -> DVector<T> {
        let w = DMatrix::from_fn(m, n, |i, k| x[idx(i, k)]);
        let (c, s) = match cfg.speed {
            SpeedMode::Free => (x[size - 1], T::zero()),
            SpeedMode::Fixed => (c_guess, x[size - 1]),
        };
        let w1 = &col.d1 * &w;
        let w2 = &col.d2 * &w;
        let mut r = DVector::zeros(size);
        for i in 1..m - 1 {
            let g = sys.grad(&w.row(i).transpose());
            for k in 0..n {
                r[idx(i, k)] = w2[(i, k)] + c * w1[(i, k)] + g[k] + s * tslope[(i, k)];
            }
        }
        for k in 0..n {
            r[idx(0, k)] = w[(0, k)] - u_minus[k];
            r[idx(m - 1, k)] = w[(m - 1, k)] - u_plus[k];
        }
        r[size - 1] = match phase {
            PhaseCondition::Midpoint { component } => {
                w[(mid, component)] - (u_minus[component] + u_plus[component]) * T::lit(0.5)
            }
            PhaseCondition::Extremum { component } => w1[(mid, component)],
            PhaseCondition::Integral => (0..m).fold(T::zero(), |a, i| {
                a + col.weights[i] * (w.row(i) - tmpl.row(i)).dot(&tslope.row(i))
            }),
        };
        r
    };

    let jacobian = |x: &DVector<T>| -> DMatrix<T> {
        let w = DMatrix::from_fn(m, n, |i, k| x[idx(i, k)]);
        let c = match cfg.speed {
            SpeedMode::Free => x[size - 1],
            SpeedMode::Fixed => c_guess,
        };
        let w1 = &col.d1 * &w;
        let mut jm = DMatrix::zeros(size, size);
        for i in 1..m - 1 {
            let h = sys.hess(&w.row(i).transpose());
            for k in 0..n {
                let row = idx(i, k);
                for j in 0..m {
                    jm[(row, idx(j, k))] = col.d2[(i, j)] + c * col.d1[(i, j)];
                }
                for l in 0..n {
                    jm[(row, idx(i, l))] += h[(k, l)];
                }
                jm[(row, size - 1)] = match cfg.speed {
                    SpeedMode::Free => w1[(i, k)],
                    SpeedMode::Fixed => tslope[(i, k)],
                };
            }
        }
        for k in 0..n {
            jm[(idx(0, k), idx(0, k))] = T::one();
            jm[(idx(m - 1, k), idx(m - 1, k))] = T::one();
        }
        match phase {
            PhaseCondition::Midpoint { component } => jm[(size - 1, idx(mid, component))] = T::one(),
            PhaseCondition::Extremum { component } => {
                for j in 0..m {
                    jm[(size - 1, idx(j, component))] = col.d1[(mid, j)];
                }
            }
            PhaseCondition::Integral => {
                for i in 0..m {
                    for k in 0..n {
                        jm[(size - 1, idx(i, k))] = col.weights[i] * tslope[(i, k)];
                    }
                }
            }
        }
        jm
    };

    let mut r = residual(&x);
    let mut rn = r.amax();
    let tol = T::lit(cfg.tol);
    let mut converged = rn <= tol;
    for iter in 0..cfg.max_iter {
        if converged {
            break;
        }
        let jm = jacobian(&x);
        let lu = jm.lu();
        let dx = lu
            .solve(&(-&r))
            .ok_or_else(|| Error::NewtonDivergence(format!("singular Jacobian at iteration {iter}")))?;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::NewtonDivergence(format!("non-finite step at iteration {iter}")));
        }
        let mut lambda = T::one();
        loop {
            let trial = &x + &dx * lambda;
            let rt = residual(&trial);
            let tn = rt.amax();
            if tn.is_finite() && (tn < rn * (T::one() - T::lit(0.25) * lambda) || tn <= tol) {
                x = trial;
                r = rt;
                rn = tn;
                break;
            }
            lambda *= T::lit(0.5);
            if lambda < T::lit(1e-6) {
                // Full steps stall once the residual reaches rounding level.
                if rn < T::lit(1e-8) {
                    converged = true;
                    break;
                }
                return Err(Error::NewtonDivergence(format!(
                    "line search failed at iteration {iter}, residual {:.3e}",
                    rn.to_f64_lossy()
                )));
            }
        }
        let step = dx.amax() * lambda;
        converged |= rn <= tol || step <= T::lit(1e-13) * (T::one() + x.amax());
    }
    if !(rn < T::lit(1e-8)) {
        return Err(Error::NewtonDivergence(format!("residual {:.3e} after {} iterations", rn.to_f64_lossy(), cfg.max_iter)));
    }
    let (c, s) = match cfg.speed {
        SpeedMode::Free => (x[size - 1], T::zero()),
        SpeedMode::Fixed => (c_guess, x[size - 1]),
    };
    if s.abs() > T::lit(1e-8) {
        return Err(Error::NewtonDivergence(format!(
            "no solution at fixed speed (bordering parameter {:.3e})",
            s.to_f64_lossy()
        )));
    }
    let w = DMatrix::from_fn(m, n, |i, k| x[idx(i, k)]);
    let excursion = (0..m).fold(T::zero(), |a, i| a.max((w.row(i).transpose() - u_minus).amax()));
    if excursion < T::lit(1e-6) {
        return Err(Error::NewtonDivergence("converged to the constant state".into()));
    }
    let w1 = &col.d1 * &w;
    let w2 = &col.d2 * &w;
    let cols = |mat: &DMatrix<T>| -> Vec<Vec<T>> { (0..n).map(|k| mat.column(k).iter().copied().collect()).collect() };
    let (cw, cw1, cw2) = (cols(&w), cols(&w1), cols(&w2));
    let steps = (T::lit(2.0 * cfg.half_width / cfg.output_dt)).round().to_f64_lossy() as usize;
    let lw = T::lit(cfg.half_width);
    let grid: Vec<T> = (0..=steps).map(|i| -lw + T::lit(2.0 * cfg.half_width) * T::of_usize(i) / T::of_usize(steps)).collect();
    let interp = |vals: &Vec<Vec<T>>, t: T| DVector::from_iterator(n, vals.iter().map(|v| col.interpolate(v, t)));
    let mut profile = WaveProfile::from_fn(c, grid, ProfileKind::Numeric, u_minus.clone(), u_plus.clone(), |t| {
        (interp(&cw, t), interp(&cw1, t), interp(&cw2, t))
    });
    profile.bvp_residual = Some(rn);
    Ok(profile)
}

/// `𝕃 = -d²/dξ² + c²/4 - ∇²F(w*(ξ))` as a problem with `P = I`, `Q = 0`.
pub fn weighted_problem<T: Real>(sys: &ReactionSystem<T>, profile: &WaveProfile<T>) -> Result<SturmLiouvilleProblem<T>> {
    let n = profile.n();
    let shift = DMatrix::<T>::identity(n, n) * (profile.c * profile.c / T::lit(4.0));
    let r_of = |u: &DVector<T>| &shift - linalg::symmetrize(&sys.hess(u));
    let samples = profile.w.iter().map(r_of).collect();
    let table = Table::new(profile.grid.clone(), samples, r_of(&profile.u_minus), r_of(&profile.u_plus))?;
    SturmLiouvilleProblem::new(Coefficient::identity(n), Coefficient::zeros(n), Coefficient::Tabulated(table))
}

#[derive(Debug, Clone)]
pub struct CriticalPoints<T: Real> {
    pub points: Vec<T>,
    /// Near-tangential minima of `|w'|` that were not counted.
    pub warnings: Vec<String>,
}

/// Interior zeros of `w*'`. `tol` is relative to `max |w*'|`.
///
/// Samples where the profile is already within `1e-3` (relative) of an end
/// state are treated as the tails and skipped.
pub fn critical_points<T: Real>(profile: &WaveProfile<T>, tol: T) -> Result<CriticalPoints<T>> {
    let k = profile.grid.len();
    let vmax = profile.max_speed();
    let wscale = profile.w.iter().fold(T::one(), |a, v| a.max(v.amax()));
    if k < 3 || vmax <= T::lit(1e-14) * wscale {
        return Err(Error::TangentialZero { location: profile.grid.get(k / 2).map(|t| t.to_f64_lossy()).unwrap_or(0.0) });
    }
    let dist = |v: &DVector<T>| (v - &profile.u_minus).norm().min((v - &profile.u_plus).norm());
    let dmax = profile.w.iter().fold(T::zero(), |a, v| a.max(dist(v)));
    let core: Vec<bool> = profile.w.iter().map(|v| dist(v) >= T::lit(1e-3) * dmax).collect();
    let thr = tol * vmax;
    let warn = T::lit(1e-2) * vmax;
    let mut out = CriticalPoints { points: Vec::new(), warnings: Vec::new() };
    let speed = |x: T| profile.w_prime_at(x).norm();

    if profile.n() == 1 {
        let v = |i: usize| profile.w_prime[i][0];
        let mut i = 0;
        while i + 1 < k {
            if !(core[i] && core[i + 1]) {
                i += 1;
                continue;
            }
            let (a, b) = (v(i), v(i + 1));
            if a == T::zero() {
                out.points.push(profile.grid[i]);
                i += 1;
                continue;
            }
            if a * b < T::zero() {
                let (mut lo, mut hi) = (profile.grid[i], profile.grid[i + 1]);
                let sa = a.signum();
                for _ in 0..200 {
                    let mid = (lo + hi) * T::lit(0.5);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if profile.w_prime_at(mid)[0].signum() == sa {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let root = (lo + hi) * T::lit(0.5);
                if speed(root) > thr {
                    return Err(Error::TangentialZero { location: root.to_f64_lossy() });
                }
                out.points.push(root);
            } else if i > 0 && core[i - 1] && v(i - 1) * a > T::zero() && a * b > T::zero() {
                // A touching minimum without a sign change.
                let (p, q) = (v(i - 1).abs(), v(i).abs());
                if q < p && q <= b.abs() {
                    if q < thr {
                        return Err(Error::TangentialZero { location: profile.grid[i].to_f64_lossy() });
                    }
                    if q < warn {
                        out.warnings.push(format!("near-tangential minimum of |w'| = {:.3e} at {:.6}", q.to_f64_lossy(), profile.grid[i].to_f64_lossy()));
                    }
                }
            }
            i += 1;
        }
    } else {
        let norms: Vec<T> = profile.w_prime.iter().map(|v| v.norm()).collect();
        let g = |x: T| {
            let i = profile.cell(x);
            let d = hermite(
                profile.grid[i],
                profile.grid[i + 1],
                &profile.w_prime[i],
                &profile.w_prime[i + 1],
                &profile.w_second[i],
                &profile.w_second[i + 1],
                x,
            );
            // d/dξ of the Hermite interpolant, by a centred difference.
            let h = (profile.grid[i + 1] - profile.grid[i]) * T::lit(1e-4);
            let dp = (profile.w_prime_at(x + h) - profile.w_prime_at(x - h)) / (h * T::lit(2.0));
            d.dot(&dp)
        };
        for i in 1..k - 1 {
            if !(core[i - 1] && core[i] && core[i + 1]) || !(norms[i] < norms[i - 1] && norms[i] <= norms[i + 1]) {
                continue;
            }
            if norms[i] >= warn {
                continue;
            }
            let (mut lo, mut hi) = (profile.grid[i - 1], profile.grid[i + 1]);
            if !(g(lo) < T::zero() && g(hi) > T::zero()) {
                return Err(Error::TangentialZero { location: profile.grid[i].to_f64_lossy() });
            }
            for _ in 0..200 {
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid) < T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = (lo + hi) * T::lit(0.5);
            let val = speed(root);
            if val < thr {
                if out.points.last().map(|&p| (root - p).abs() < T::lit(1e-9)).unwrap_or(false) {
                    continue;
                }
                out.points.push(root);
            } else {
                out.warnings.push(format!("near-tangential minimum of |w'| = {:.3e} at {:.6}", val.to_f64_lossy(), root.to_f64_lossy()));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// No critical point was found; no stability claim is made.
    StableCandidate,
    SpectrallyUnstable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::StableCandidate => "stable-candidate",
            Verdict::SpectrallyUnstable => "spectrally-unstable",
        })
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct WaveConfig {
    pub critical_tol: f64,
    /// Morse count of `𝕃`; skipped when absent.
    pub morse: Option<MorseConfig>,
    /// Finite element check of `𝕃`; skipped when absent.
    pub oracle: Option<DiscretizationConfig>,
    pub oracle_eigenvalues: usize,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            critical_tol: 1e-6,
            // The translation mode puts 0 in the spectrum of 𝕃; the shift
            // moves it off the Dirichlet count.
            morse: Some(MorseConfig { spectral_shift: 1e-6, ..MorseConfig::default() }),
            oracle: Some(DiscretizationConfig { t_o: 40.0, n_nodes: 4000, richardson_levels: 2, ..DiscretizationConfig::default() }),
            oracle_eigenvalues: 3,
        }
    }
}

/// Finite element view of `𝕃`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct WaveOracle {
    pub smallest: Vec<f64>,
    /// `#{λ < -deflation}`
    pub negative_count: usize,
    /// Eigenvalues within the zero window.
    pub kernel_multiplicity: usize,
}

#[derive(Debug, Clone)]
pub struct WaveAnalysis<T: Real> {
    pub critical_points: Vec<T>,
    pub warnings: Vec<String>,
    pub morse_lower_bound: usize,
    pub morse: Option<MorseResult<T>>,
    pub oracle: Option<WaveOracle>,
    pub verdict: Verdict,
    pub h_check: bool,
    /// Largest eigenvalue of the linearization `L` when `c = 0` (`𝕃 = -L`).
    pub l_top_eigenvalue: Option<f64>,
}

/// Critical-point verdict, with the Morse count of `𝕃` and the oracle when
/// configured.
pub fn instability_verdict<T: Real>(
    sys: &ReactionSystem<T>,
    profile: &WaveProfile<T>,
    cfg: &WaveConfig,
) -> Result<WaveAnalysis<T>> {
    let h_check = check_h(sys, &profile.u_minus, &profile.u_plus)?;
    if !h_check {
        return Err(Error::HypothesisViolation("∇²F(u±) must be negative definite".into()));
    }
    profile.validate(sys)?;
    let degenerate = profile.max_speed() <= T::lit(1e-14);
    let crit = if degenerate {
        CriticalPoints { points: Vec::new(), warnings: vec!["constant profile: no translation mode".into()] }
    } else {
        critical_points(profile, T::lit(cfg.critical_tol))?
    };
    let bound = crit.points.len();
    let verdict = if bound > 0 { Verdict::SpectrallyUnstable } else { Verdict::StableCandidate };
    let weighted = weighted_problem(sys, profile)?;

    let morse = match &cfg.morse {
        Some(mc) => {
            let r = morse_index(&weighted, mc)?;
            if (bound as i64) > r.index {
                return Err(Error::InconsistentIndex { first: bound as i64, second: r.index });
            }
            Some(r)
        }
        None => None,
    };

    let oracle = match &cfg.oracle {
        Some(oc) => {
            let count = deflated_negative_count(&weighted, oc)?;
            let d = assemble(&weighted, T::lit(oc.t_o), oc.n_nodes)?;
            let floor = weighted_floor(&weighted, &d.nodes);
            let k = cfg.oracle_eigenvalues.max(1);
            let smallest: Vec<f64> = smallest_eigenvalues(&d, k, floor)?.iter().map(|v| v.to_f64_lossy()).collect();
            let kernel = smallest.iter().filter(|v| v.abs() < oc.zero_window).count();
            Some(WaveOracle { smallest, negative_count: count.count, kernel_multiplicity: kernel })
        }
        None => None,
    };
    // At rest 𝕃 = -L; the top of L comes from its own discretization so it
    // checks, rather than restates, the oracle's bottom eigenvalue.
    let l_top_eigenvalue = match &cfg.oracle {
        Some(oc) if profile.c == T::zero() => {
            let m = oc.n_nodes;
            let t_o = T::lit(oc.t_o);
            let h = (t_o + t_o) / T::of_usize(m + 1);
            let nodes: Vec<T> = (1..=m).map(|i| -t_o + h * T::of_usize(i)).collect();
            let b: Vec<DMatrix<T>> = nodes.iter().map(|&x| -weighted.r().eval(x)).collect();
            Some(wave_matrices(T::zero(), nodes, &b)?.l_largest(1)?[0].to_f64_lossy())
        }
        _ => None,
    };
    Ok(WaveAnalysis {
        critical_points: crit.points,
        warnings: crit.warnings,
        morse_lower_bound: bound,
        morse,
        oracle,
        verdict,
        h_check,
        l_top_eigenvalue,
    })
}

fn weighted_floor<T: Real>(p: &SturmLiouvilleProblem<T>, nodes: &[T]) -> T {
    let lo = nodes.iter().fold(T::zero(), |a, &t| a.min(linalg::sym_eigenvalues(&p.r().eval(t))[0]));
    lo - T::one()
}
