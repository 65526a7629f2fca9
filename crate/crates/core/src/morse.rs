//! Morse index of `L` from conjugate points of the unstable bundle with the
//! Dirichlet plane, cross-checked by the crossing-form (Maslov) sum and by
//! the finite element oracle.

use crate::crossings::{locate_crossings, CrossingPlacement, LagrangianCurve, LocatorConfig};
use crate::error::{Error, Result};
use crate::flows::{select_truncation, unstable_path_on, BundleCurve, FramePath, PropagationConfig};
use crate::indices::{crossing_form_hamiltonian, form_inertia};
use crate::linalg;
use crate::oracle::{deflated_negative_count, negative_count, DiscretizationConfig, OracleCount};
use crate::scalar::Real;
use crate::sturm::{default_probe_grid, validate, SturmLiouvilleProblem, ValidationReport};
use crate::symplectic::{self, InertiaTriple};
use nalgebra::{DMatrix, DVector};

/// How the oracle count is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    #[default]
    Standard,
    /// Count eigenvalues below `-deflation` (operators with a known kernel).
    Deflated,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MorseConfig {
    pub propagation: PropagationConfig,
    /// Principal-angle threshold for membership in `Λ_D`.
    pub intersection_tol: f64,
    /// Crossing localization width relative to the truncation window.
    pub width_rel: f64,
    /// Replaces `L` by `L + shift I`; a small positive shift keeps kernel
    /// modes from producing spurious crossings near the truncation ends.
    pub spectral_shift: f64,
    pub oracle: Option<DiscretizationConfig>,
    pub oracle_mode: OracleMode,
    /// Recompute with doubled truncation and `ε_B / 100`.
    pub plateau: bool,
    /// Truncation doublings allowed when a crossing sits at the window edge.
    pub boundary_retries: usize,
}

impl Default for MorseConfig {
    fn default() -> Self {
        Self {
            propagation: PropagationConfig::default(),
            intersection_tol: symplectic::INTERSECTION_TOL,
            width_rel: 1e-10,
            spectral_shift: 0.0,
            oracle: None,
            oracle_mode: OracleMode::Standard,
            plateau: false,
            boundary_retries: 2,
        }
    }
}

/// A conjugate instant of the unstable bundle.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CrossingRecord<T: Real> {
    pub tau: T,
    /// `dim(E^u(τ) ∩ Λ_D)`
    pub multiplicity: usize,
    pub form_inertia: InertiaTriple,
    /// Length of the final localization bracket.
    pub width: T,
    /// Signed winding jump across the bracket.
    pub jump: i64,
    /// Smallest singular value of the position block at `tau`.
    pub sigma_min: T,
    pub at_window_end: bool,
}

impl<T: Real> CrossingRecord<T> {
    pub fn positive_definite(&self) -> bool {
        self.form_inertia.negative == 0 && self.form_inertia.zero == 0
    }
}

/// Conjugate points of `path` (a propagated unstable bundle of `p`).
pub fn detect_conjugate_points<T: Real>(
    path: &FramePath<T>,
    p: &SturmLiouvilleProblem<T>,
    cfg: &MorseConfig,
) -> Result<Vec<CrossingRecord<T>>> {
    let (a, b) = path.span();
    let curve = BundleCurve::new(p, path, &cfg.propagation);
    let locator = LocatorConfig {
        intersection_tol: T::lit(cfg.intersection_tol),
        width_tol: T::lit(cfg.width_rel) * (b - a),
        max_subdivision: 24,
    };
    let dirichlet = symplectic::dirichlet_plane::<T>(p.n());
    let scan = locate_crossings(&curve, &path.grid, &dirichlet, &locator)?;
    let mut out = Vec::with_capacity(scan.crossings.len());
    for c in scan.crossings {
        if c.placement == CrossingPlacement::Start && c.jump == 0 {
            continue;
        }
        if c.multiplicity < c.jump.unsigned_abs() as usize {
            return Err(Error::UnresolvedCluster {
                location: c.tau.to_f64_lossy(),
                count: c.jump,
                multiplicity: c.multiplicity,
            });
        }
        let form = if c.multiplicity > 0 {
            let bmat = p.hamiltonian_at(c.tau)?;
            let q = crossing_form_hamiltonian(c.tau, &bmat, &c.frame, &dirichlet, locator.intersection_tol)?;
            form_inertia(&q)
        } else {
            InertiaTriple::default()
        };
        let sigma_min = linalg::singular_values_ascending(&c.frame.bottom())[0];
        out.push(CrossingRecord {
            tau: c.tau,
            multiplicity: c.multiplicity,
            form_inertia: form,
            width: c.width,
            jump: c.jump,
            sigma_min,
            at_window_end: c.placement == CrossingPlacement::End,
        });
    }
    Ok(out)
}

/// Outcome of the full pipeline.
#[derive(Debug, Clone)]
pub struct MorseResult<T: Real> {
    /// `Σ dim(E^u(τ) ∩ Λ_D)` over conjugate points before the window end.
    pub index: i64,
    pub crossings: Vec<CrossingRecord<T>>,
    /// Crossing-form sum with the endpoint convention.
    pub maslov_crosscheck: i64,
    /// Net eigenphase winding of the same path.
    pub winding: i64,
    pub oracle_crosscheck: Option<i64>,
    pub oracle: Option<OracleCount>,
    pub truncation: (T, T),
    pub plateau_verified: Option<bool>,
    pub plateau_index: Option<i64>,
    pub boundary_retries: usize,
    pub validation: ValidationReport,
    pub path: FramePath<T>,
}

impl<T: Real> MorseResult<T> {
    pub fn all_forms_positive(&self) -> bool {
        self.crossings.iter().all(|c| c.positive_definite())
    }

    /// The three routes agree (oracle only when computed).
    pub fn consistent(&self) -> bool {
        self.index == self.maslov_crosscheck
            && self.index == self.winding
            && self.oracle_crosscheck.map(|o| o == self.index).unwrap_or(true)
    }

    /// Converts plateau or oracle disagreement into an error.
    pub fn verified(self) -> Result<Self> {
        if let (Some(false), Some(second)) = (self.plateau_verified, self.plateau_index) {
            return Err(Error::PlateauFailure { first: self.index, second });
        }
        if let Some(o) = self.oracle_crosscheck {
            if o != self.index {
                return Err(Error::OracleMismatch { index: self.index, oracle: o });
            }
        }
        Ok(self)
    }
}

struct Run<T: Real> {
    index: i64,
    maslov: i64,
    winding: i64,
    crossings: Vec<CrossingRecord<T>>,
    path: FramePath<T>,
    near_end: bool,
}

fn run_window<T: Real>(p: &SturmLiouvilleProblem<T>, tn: T, tp: T, cfg: &MorseConfig) -> Result<Run<T>> {
    let path = unstable_path_on(p, tn, tp, &cfg.propagation)?;
    let crossings = detect_conjugate_points(&path, p, cfg)?;
    let band = T::lit(10.0 * cfg.propagation.sample_dt);
    let mut index = 0;
    let mut maslov = 0;
    let mut winding = 0;
    let mut near_end = false;
    for c in &crossings {
        winding += c.jump;
        if c.at_window_end {
            maslov -= c.form_inertia.negative as i64;
        } else {
            index += c.multiplicity as i64;
            maslov += c.form_inertia.signature();
        }
        near_end |= c.at_window_end || (tp - c.tau) <= band || (c.tau - tn) <= band;
    }
    Ok(Run { index, maslov, winding, crossings, path, near_end })
}

/// Morse index of `p` by counting conjugate points.
pub fn morse_index<T: Real>(p: &SturmLiouvilleProblem<T>, cfg: &MorseConfig) -> Result<MorseResult<T>> {
    let validation = validate(p, &default_probe_grid::<T>());
    if !validation.l2_ok() {
        return Err(Error::HypothesisViolation(
            "the block matrices [[P, Q], [Qᵀ, R]] at ±∞ must be positive definite".into(),
        ));
    }
    if validation.c1 <= 0.0 {
        return Err(Error::HypothesisViolation("P(t) must be positive definite".into()));
    }
    let shifted = p.shifted(T::lit(cfg.spectral_shift))?;
    let t_max = T::lit(cfg.propagation.t_max);
    let (mut tn, mut tp) = select_truncation(&shifted, &cfg.propagation)?;
    let mut retries = 0;
    let mut run = run_window(&shifted, tn, tp, cfg)?;
    while run.near_end && retries < cfg.boundary_retries && tp * T::lit(2.0) <= t_max {
        log::info!("crossing at the truncation edge; doubling the window");
        tn *= T::lit(2.0);
        tp *= T::lit(2.0);
        retries += 1;
        run = run_window(&shifted, tn, tp, cfg)?;
    }

    let oracle = match &cfg.oracle {
        Some(oc) => Some(match cfg.oracle_mode {
            OracleMode::Standard => negative_count(&shifted, oc)?,
            OracleMode::Deflated => deflated_negative_count(&shifted, oc)?,
        }),
        None => None,
    };

    let (plateau_verified, plateau_index) = if cfg.plateau {
        let tight = PropagationConfig { trunc_eps: cfg.propagation.trunc_eps / 100.0, ..cfg.propagation };
        let (tn2, tp2) = select_truncation(&shifted, &tight)?;
        let tn2 = tn2.min(tn * T::lit(2.0)).max(-t_max);
        let tp2 = tp2.max(tp * T::lit(2.0)).min(t_max);
        let sub = MorseConfig { propagation: tight, ..*cfg };
        let second = run_window(&shifted, tn2, tp2, &sub)?;
        (Some(second.index == run.index), Some(second.index))
    } else {
        (None, None)
    };

    Ok(MorseResult {
        index: run.index,
        crossings: run.crossings,
        maslov_crosscheck: run.maslov,
        winding: run.winding,
        oracle_crosscheck: oracle.as_ref().map(|o| o.count as i64),
        oracle,
        truncation: (tn, tp),
        plateau_verified,
        plateau_index,
        boundary_retries: retries,
        validation,
        path: run.path,
    })
}

/// One row of the per-sample diagnostics.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DiagnosticRow {
    pub tau: f64,
    pub sigma_min: f64,
    pub det: f64,
    /// A conjugate point lies in `(previous sample, tau]`.
    pub crossing_flag: bool,
}

/// `σ_min(W)` and `det W` of the position block along the path. The
/// determinant is gauge dependent in magnitude and sign; only its sign
/// changes carry meaning.
pub fn diagnostics<T: Real>(path: &FramePath<T>, crossings: &[CrossingRecord<T>]) -> Vec<DiagnosticRow> {
    let mut rows = Vec::with_capacity(path.grid.len());
    let mut prev: Option<T> = None;
    for (t, f) in path.grid.iter().zip(&path.frames) {
        let w = f.bottom();
        let flag = crossings.iter().any(|c| match prev {
            Some(p0) => c.tau > p0 && c.tau <= *t,
            None => c.tau == *t,
        });
        rows.push(DiagnosticRow {
            tau: t.to_f64_lossy(),
            sigma_min: linalg::singular_values_ascending(&w)[0].to_f64_lossy(),
            det: w.determinant().to_f64_lossy(),
            crossing_flag: flag,
        });
        prev = Some(*t);
    }
    rows
}

/// Number of isolated zeros of the position block of a solution path
/// `z(τ) ∈ E^u(τ)`. Each zero is a conjugate point, so the count is a lower
/// bound for the Morse index.
///
/// Membership is checked only where `|z|` is at least `1e-3` of its
/// maximum; far out in the tails the propagated bundle is dominated by the
/// growing mode and no longer resolves a decaying `z`.
pub fn kernel_hit_count<T: Real, C: LagrangianCurve<T>>(
    curve: &C,
    samples: &[(T, DVector<T>)],
    tol: T,
) -> Result<usize> {
    if samples.len() < 3 {
        return Err(Error::DegenerateVectorPath("need at least three samples".into()));
    }
    let n = curve.n();
    if samples.iter().any(|(_, z)| z.len() != 2 * n) {
        return Err(Error::DimensionMismatch("vector samples must have length 2n".into()));
    }
    let zmax = samples.iter().map(|(_, z)| z.norm()).fold(T::zero(), |a, b| a.max(b));
    let wpart = |z: &DVector<T>| z.rows(n, n).into_owned();
    let wmax = samples.iter().map(|(_, z)| wpart(z).norm()).fold(T::zero(), |a, b| a.max(b));
    if zmax <= T::zero() || wmax <= T::lit(1e-12) * zmax {
        return Err(Error::DegenerateVectorPath("position block vanishes identically".into()));
    }
    let core: Vec<&(T, DVector<T>)> = samples.iter().filter(|(_, z)| z.norm() >= T::lit(1e-3) * zmax).collect();
    for (t, z) in &core {
        let f = curve.frame_at(*t)?;
        let proj = f.projector();
        let zm = DMatrix::from_column_slice(2 * n, 1, z.as_slice());
        let dist = (&zm - &proj * &zm).norm() / z.norm();
        if dist > tol {
            return Err(Error::NotInBundle { t: t.to_f64_lossy(), distance: dist.to_f64_lossy() });
        }
    }
    let mut count = 0;
    if n == 1 {
        let mut last_sign = 0i8;
        for (_, z) in &core {
            let w = z[1];
            let s = if w > T::zero() {
                1
            } else if w < T::zero() {
                -1
            } else {
                0
            };
            if s != 0 {
                if last_sign != 0 && s != last_sign {
                    count += 1;
                }
                last_sign = s;
            }
        }
    } else {
        // Strict local minima of |w| that are small relative to its maximum.
        let norms: Vec<T> = core.iter().map(|(_, z)| wpart(z).norm()).collect();
        for i in 1..norms.len().saturating_sub(1) {
            if norms[i] < norms[i - 1] && norms[i] <= norms[i + 1] && norms[i] < T::lit(1e-3) * wmax {
                count += 1;
            }
        }
    }
    Ok(count)
}
