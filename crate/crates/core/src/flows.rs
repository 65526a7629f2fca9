//! Propagation of Lagrangian frames along `z' = J B(t) z`, realizing the
//! unstable and stable bundles of a Sturm–Liouville problem.

use crate::coefficient::Side;
use crate::crossings::LagrangianCurve;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::sturm::SturmLiouvilleProblem;
use crate::symplectic::{self, apply_j, LagrangianFrame};
use nalgebra::DMatrix;

/// Integrator, truncation and sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Accepted steps between re-orthonormalizations.
    pub reortho_every: usize,
    /// `ε_B`: how close `B(t)` must be to its limit at the truncation points.
    pub trunc_eps: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub sample_dt: f64,
    /// Step of the probe grid used to find the truncation points.
    pub trunc_probe_dt: f64,
    pub max_steps: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            reortho_every: 1,
            trunc_eps: 1e-8,
            t_min: 20.0,
            t_max: 400.0,
            sample_dt: 0.01,
            trunc_probe_dt: 0.05,
            max_steps: 5_000_000,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.rel_tol, self.abs_tol, self.trunc_eps, self.sample_dt, self.trunc_probe_dt];
        if pos.iter().any(|&x| !(x > 0.0)) || self.reortho_every == 0 {
            return Err(Error::InvalidInput("propagation tolerances must be positive".into()));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max) {
            return Err(Error::InvalidInput("need 0 < t_min < t_max".into()));
        }
        Ok(())
    }
}

/// Which invariant bundle a path realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bundle {
    Unstable,
    Stable,
    /// Arbitrary initial data.
    Custom,
}

/// Sampled path of Lagrangian frames on an increasing grid.
#[derive(Debug, Clone)]
pub struct FramePath<T: Real> {
    pub grid: Vec<T>,
    pub frames: Vec<LagrangianFrame<T>>,
    pub bundle: Bundle,
    /// Instant the initial frame was imposed at.
    pub t_init: T,
    /// Bound on `‖B(t) - B(±∞)‖ / gap` at the initialization point, when known.
    pub init_error: Option<T>,
}

impl<T: Real> FramePath<T> {
    pub fn span(&self) -> (T, T) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    pub fn max_isotropy_residual(&self) -> T {
        self.frames.iter().map(|f| f.isotropy_residual()).fold(T::zero(), |a, b| a.max(b))
    }

    /// Index of the stored sample from which to re-integrate toward `t`:
    /// the nearest one on the side the path was integrated from.
    fn anchor(&self, t: T) -> usize {
        let k = self.grid.len();
        let p = self.grid.partition_point(|&g| g <= t);
        let below = p.saturating_sub(1).min(k - 1);
        let above = p.min(k - 1);
        let forward = self.t_init <= self.grid[0];
        if forward {
            below
        } else {
            above
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive integrator for `Z' = J B(t) Z` with re-orthonormalization.
struct FrameIntegrator<'a, T: Real> {
    problem: &'a SturmLiouvilleProblem<T>,
    cfg: &'a PropagationConfig,
}

impl<'a, T: Real> FrameIntegrator<'a, T> {
    fn rhs(&self, t: T, z: &DMatrix<T>) -> Result<DMatrix<T>> {
        let b = self.problem.hamiltonian_at(t)?;
        Ok(apply_j(&(b * z)))
    }

    /// Integrates from `t0` to `t1`, calling `visit` at every accepted step
    /// end and at every multiple of `sample_dt` from `t0`.
    fn run(
        &self,
        z0: &DMatrix<T>,
        t0: T,
        t1: T,
        mut visit: impl FnMut(T, &DMatrix<T>),
    ) -> Result<DMatrix<T>> {
        let cfg = self.cfg;
        let dir = if t1 >= t0 { T::one() } else { -T::one() };
        let span = (t1 - t0).abs();
        let dt = T::lit(cfg.sample_dt);
        let rtol = T::lit(cfg.rel_tol);
        let atol = T::lit(cfg.abs_tol);
        let mut z = linalg::thin_q(z0);
        let mut t = t0;
        visit(t, &z);
        if span == T::zero() {
            return Ok(z);
        }
        let mut h = dt.min(span);
        let mut k1 = self.rhs(t, &z)?;
        let mut next_sample = 1usize;
        let mut since_qr = 0usize;
        let tiny = T::lit(1e-14) * (T::one() + t0.abs().max(t1.abs()));
        for _ in 0..cfg.max_steps {
            let done = (t - t0).abs();
            if done >= span {
                return Ok(z);
            }
            // Clip to the next sample instant and to the end.
            let sample_at = dt * T::of_usize(next_sample);
            let mut step = h.min(span - done);
            let mut hits_sample = false;
            if sample_at < span && done + step >= sample_at - tiny {
                step = sample_at - done;
                hits_sample = true;
            }
            if step <= tiny {
                if hits_sample {
                    next_sample += 1;
                    continue;
                }
                return Err(Error::IntegratorFailure {
                    t: t.to_f64_lossy(),
                    detail: "step size underflow".into(),
                });
            }
            let hs = step * dir;
            let mut ks: Vec<DMatrix<T>> = Vec::with_capacity(7);
            ks.push(k1.clone());
            for s in 1..7 {
                let mut acc = z.clone();
                for (j, kj) in ks.iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += kj * (hs * T::lit(a));
                    }
                }
                if s == 6 {
                    // Stage 7 is evaluated at the fifth-order solution (FSAL).
                    let k7 = self.rhs(t + hs, &acc)?;
                    ks.push(k7);
                    break;
                }
                ks.push(self.rhs(t + hs * T::lit(C[s]), &acc)?);
            }
            let mut znew = z.clone();
            for (j, kj) in ks.iter().take(6).enumerate() {
                let b = A[6][j];
                if b != 0.0 {
                    znew += kj * (hs * T::lit(b));
                }
            }
            let mut err = T::zero();
            for i in 0..z.nrows() {
                for j in 0..z.ncols() {
                    let mut e = T::zero();
                    for (s, ks_s) in ks.iter().enumerate() {
                        e += ks_s[(i, j)] * T::lit(E[s]);
                    }
                    let e = (e * hs).abs();
                    let sc = atol + rtol * z[(i, j)].abs().max(znew[(i, j)].abs());
                    err = err.max(e / sc);
                }
            }
            if !err.is_finite() {
                h = step * T::lit(0.2);
                continue;
            }
            if err <= T::one() {
                t = if hits_sample { t0 + dir * sample_at } else { t + hs };
                if (t - t0).abs() >= span - tiny {
                    t = t1;
                }
                let residual = symplectic::isotropy_residual(&znew);
                if residual > T::lit(1e-6) {
                    return Err(Error::IsotropyLoss { t: t.to_f64_lossy(), residual: residual.to_f64_lossy() });
                }
                since_qr += 1;
                let mut k_next = ks.pop().expect("seven stages");
                if since_qr >= cfg.reortho_every {
                    // Z = Q R; the derivative at the new point is J B Q = k R⁻¹,
                    // so recompute it instead.
                    znew = linalg::thin_q(&znew);
                    k_next = self.rhs(t, &znew)?;
                    since_qr = 0;
                }
                z = znew;
                k1 = k_next;
                if hits_sample {
                    next_sample += 1;
                }
                visit(t, &z);
                let fac = if err == T::zero() {
                    T::lit(5.0)
                } else {
                    (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
                };
                h = (step * fac).min(dt.max(step));
            } else {
                let fac = (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.1));
                h = step * fac;
            }
        }
        Err(Error::IntegratorFailure { t: t.to_f64_lossy(), detail: "step budget exhausted".into() })
    }
}

/// Propagates `f0` from `t0` to `t1` (either direction), sampling on the
/// `sample_dt` grid and at every step end.
pub fn propagate_frame<T: Real>(
    p: &SturmLiouvilleProblem<T>,
    f0: &LagrangianFrame<T>,
    t0: T,
    t1: T,
    cfg: &PropagationConfig,
) -> Result<FramePath<T>> {
    cfg.validate()?;
    if t0 == t1 {
        return Err(Error::InvalidInput("propagation interval is empty".into()));
    }
    if f0.n() != p.n() {
        return Err(Error::DimensionMismatch("initial frame does not match the problem".into()));
    }
    let integ = FrameIntegrator { problem: p, cfg };
    let mut grid = Vec::new();
    let mut frames = Vec::new();
    integ.run(f0.columns(), t0, t1, |t, z| {
        grid.push(t);
        frames.push(LagrangianFrame::from_trusted(z.clone()));
    })?;
    if t1 < t0 {
        grid.reverse();
        frames.reverse();
    }
    Ok(FramePath { grid, frames, bundle: Bundle::Custom, t_init: t0, init_error: None })
}

/// Integrates `f0` from `t0` to `t1` without sampling.
pub fn advance<T: Real>(
    p: &SturmLiouvilleProblem<T>,
    f0: &LagrangianFrame<T>,
    t0: T,
    t1: T,
    cfg: &PropagationConfig,
) -> Result<LagrangianFrame<T>> {
    let integ = FrameIntegrator { problem: p, cfg };
    let z = integ.run(f0.columns(), t0, t1, |_, _| {})?;
    Ok(LagrangianFrame::from_trusted(z))
}

/// Truncation points `(T_neg, T_pos)`: beyond them `B(t)` stays within
/// `ε_B` of its limit on the probe grid.
pub fn select_truncation<T: Real>(p: &SturmLiouvilleProblem<T>, cfg: &PropagationConfig) -> Result<(T, T)> {
    cfg.validate()?;
    let eps = T::lit(cfg.trunc_eps);
    for c in [p.p(), p.q(), p.r()] {
        for table in c.tables() {
            let mm = table.edge_mismatch();
            if mm > eps {
                return Err(Error::NoDecay {
                    t_max: cfg.t_max,
                    detail: format!("table edge differs from its declared limit by {:.3e}", mm.to_f64_lossy()),
                });
            }
        }
    }
    let probe = T::lit(cfg.trunc_probe_dt);
    let steps = (cfg.t_max / cfg.trunc_probe_dt).ceil() as usize;
    let mut out = [T::zero(); 2];
    for (k, side) in [Side::Minus, Side::Plus].into_iter().enumerate() {
        let limit = p.hamiltonian_limit(side)?;
        let sign = if side == Side::Plus { T::one() } else { -T::one() };
        // Scan inward from t_max; the first violation fixes the truncation.
        let mut found = None;
        for i in (0..=steps).rev() {
            let s = (probe * T::of_usize(i)).min(T::lit(cfg.t_max));
            let dev = linalg::spectral_norm(&(p.hamiltonian_at(sign * s)? - &limit));
            if dev > eps {
                if i == steps {
                    return Err(Error::NoDecay {
                        t_max: cfg.t_max,
                        detail: format!(
                            "|B(t) - B({}inf)| = {:.3e} at the search bound",
                            if side == Side::Plus { "+" } else { "-" },
                            dev.to_f64_lossy()
                        ),
                    });
                }
                found = Some(probe * T::of_usize(i + 1));
                break;
            }
        }
        let raw = found.unwrap_or(T::zero());
        let clamped = raw.max(T::lit(cfg.t_min)).min(T::lit(cfg.t_max));
        if raw < T::lit(cfg.t_min) {
            log::debug!("truncation {:?} raised from {} to t_min", side, raw);
        }
        out[k] = sign * clamped;
    }
    Ok((out[0], out[1]))
}

fn init_error<T: Real>(p: &SturmLiouvilleProblem<T>, t: T, side: Side) -> Result<T> {
    let a = p.asymptotic()?;
    let lim = if side == Side::Minus { &a.b_minus } else { &a.b_plus };
    Ok(linalg::spectral_norm(&(p.hamiltonian_at(t)? - lim)) / a.spectral_gap)
}

/// `E^u(τ)` on the truncation window, started from `V⁺(J B(-∞))`.
pub fn unstable_path<T: Real>(p: &SturmLiouvilleProblem<T>, cfg: &PropagationConfig) -> Result<FramePath<T>> {
    let (tn, tp) = select_truncation(p, cfg)?;
    unstable_path_on(p, tn, tp, cfg)
}

pub fn unstable_path_on<T: Real>(
    p: &SturmLiouvilleProblem<T>,
    t_neg: T,
    t_pos: T,
    cfg: &PropagationConfig,
) -> Result<FramePath<T>> {
    let a = p.asymptotic()?;
    let mut path = propagate_frame(p, &a.vp_minus, t_neg, t_pos, cfg)?;
    path.bundle = Bundle::Unstable;
    path.init_error = Some(init_error(p, t_neg, Side::Minus)?);
    Ok(path)
}

/// `E^s(τ)` on the truncation window, started from `V⁻(J B(+∞))` and
/// integrated backward.
pub fn stable_path<T: Real>(p: &SturmLiouvilleProblem<T>, cfg: &PropagationConfig) -> Result<FramePath<T>> {
    let (tn, tp) = select_truncation(p, cfg)?;
    stable_path_on(p, tn, tp, cfg)
}

pub fn stable_path_on<T: Real>(
    p: &SturmLiouvilleProblem<T>,
    t_neg: T,
    t_pos: T,
    cfg: &PropagationConfig,
) -> Result<FramePath<T>> {
    let a = p.asymptotic()?;
    let mut path = propagate_frame(p, &a.vm_plus, t_pos, t_neg, cfg)?;
    path.bundle = Bundle::Stable;
    path.init_error = Some(init_error(p, t_pos, Side::Plus)?);
    Ok(path)
}

/// A propagated bundle viewed as a curve that can be evaluated anywhere:
/// off-grid values are re-integrated from the nearest upstream sample
/// rather than interpolated.
pub struct BundleCurve<'a, T: Real> {
    pub problem: &'a SturmLiouvilleProblem<T>,
    pub path: &'a FramePath<T>,
    pub cfg: PropagationConfig,
}

impl<'a, T: Real> BundleCurve<'a, T> {
    pub fn new(problem: &'a SturmLiouvilleProblem<T>, path: &'a FramePath<T>, cfg: &PropagationConfig) -> Self {
        Self { problem, path, cfg: *cfg }
    }
}

impl<'a, T: Real> LagrangianCurve<T> for BundleCurve<'a, T> {
    fn n(&self) -> usize {
        self.problem.n()
    }

    fn frame_at(&self, t: T) -> Result<LagrangianFrame<T>> {
        let i = self.path.anchor(t);
        let t0 = self.path.grid[i];
        if t0 == t {
            return Ok(self.path.frames[i].clone());
        }
        advance(self.problem, &self.path.frames[i], t0, t, &self.cfg)
    }
}
