//! On-disk formats for problems, reaction systems and Lagrangian frames.
//! Matrices are row-major nested arrays; a bare number stands for a `1 x 1`
//! matrix.

use crate::coefficient::{Coefficient, CubicSpline, Profile, Table};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sturm::SturmLiouvilleProblem;
use crate::symplectic::{frame_from_columns, LagrangianFrame, RANK_TOL};
use crate::waves::{BvpConfig, ReactionSystem, WaveConfig};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn to_matrix<T: Real>(&self) -> Result<DMatrix<T>> {
        match self {
            MatrixSpec::Scalar(x) => Ok(DMatrix::from_element(1, 1, T::lit(*x))),
            MatrixSpec::Rows(rows) => rows_to_matrix(rows),
        }
    }
}

pub fn rows_to_matrix<T: Real>(rows: &[Vec<f64>]) -> Result<DMatrix<T>> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(Error::InvalidInput("matrix rows must be nonempty and of equal length".into()));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix entries must be finite".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| T::lit(rows[i][j])))
}

pub fn matrix_to_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].to_f64_lossy()).collect()).collect()
}

/// Scalar profile presets with flat parameter lists. Trailing parameters
/// may be omitted: rates, widths and radii default to 1, centres to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// `[c]`
    Constant(Vec<f64>),
    /// `[kappa, depth, rate, center]`
    Sech2Well(Vec<f64>),
    /// `[m, kappa]`: `kappa - m(m+1) sech² t`
    PoschlTeller(Vec<f64>),
    /// `[lo, hi, rate, center]`
    Tanh(Vec<f64>),
    /// `[base, amp, width, center]`
    Gaussian(Vec<f64>),
    /// `[amp, center, radius]`
    Bump(Vec<f64>),
}

fn params(name: &str, p: &[f64], required: usize, defaults: &[f64]) -> Result<Vec<f64>> {
    if p.len() < required || p.len() > required + defaults.len() {
        return Err(Error::InvalidInput(format!(
            "{name} takes {required} to {} parameters, got {}",
            required + defaults.len(),
            p.len()
        )));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} parameters must be finite")));
    }
    let mut out = p.to_vec();
    out.extend_from_slice(&defaults[p.len() - required..]);
    Ok(out)
}

impl ProfileSpec {
    pub fn to_profile<T: Real>(&self) -> Result<Profile<T>> {
        let l = T::lit;
        Ok(match self {
            ProfileSpec::Constant(p) => Profile::Constant(l(params("constant", p, 1, &[])?[0])),
            ProfileSpec::Sech2Well(p) => {
                let v = params("sech2_well", p, 2, &[1.0, 0.0])?;
                Profile::Sech2Well { kappa: l(v[0]), depth: l(v[1]), rate: l(v[2]), center: l(v[3]) }
            }
            ProfileSpec::PoschlTeller(p) => {
                let v = params("poschl_teller", p, 2, &[])?;
                Profile::Sech2Well { kappa: l(v[1]), depth: l(v[0] * (v[0] + 1.0)), rate: T::one(), center: T::zero() }
            }
            ProfileSpec::Tanh(p) => {
                let v = params("tanh", p, 2, &[1.0, 0.0])?;
                Profile::Tanh { lo: l(v[0]), hi: l(v[1]), rate: l(v[2]), center: l(v[3]) }
            }
            ProfileSpec::Gaussian(p) => {
                let v = params("gaussian", p, 2, &[1.0, 0.0])?;
                if v[2] == 0.0 {
                    return Err(Error::InvalidInput("gaussian width must be nonzero".into()));
                }
                Profile::Gaussian { base: l(v[0]), amp: l(v[1]), width: l(v[2]), center: l(v[3]) }
            }
            ProfileSpec::Bump(p) => {
                let v = params("bump", p, 1, &[0.0, 1.0])?;
                if !(v[2] > 0.0) {
                    return Err(Error::InvalidInput("bump radius must be positive".into()));
                }
                Profile::Bump { amp: l(v[0]), center: l(v[1]), radius: l(v[2]) }
            }
        })
    }
}

/// A coefficient path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    /// `I_n`
    Identity,
    /// `0_n`
    Zero,
    Constant { matrix: MatrixSpec },
    /// Profile presets: `profile(t) · matrix`, with `matrix = I_n` when
    /// omitted. Parameters as in [`ProfileSpec`].
    Sech2Well {
        params: Vec<f64>,
        #[serde(default)]
        matrix: Option<MatrixSpec>,
    },
    PoschlTeller {
        params: Vec<f64>,
        #[serde(default)]
        matrix: Option<MatrixSpec>,
    },
    Tanh {
        params: Vec<f64>,
        #[serde(default)]
        matrix: Option<MatrixSpec>,
    },
    Gaussian {
        params: Vec<f64>,
        #[serde(default)]
        matrix: Option<MatrixSpec>,
    },
    Bump {
        params: Vec<f64>,
        #[serde(default)]
        matrix: Option<MatrixSpec>,
    },
    /// Samples on an increasing grid with declared limits at `±∞`.
    Table { grid: Vec<f64>, values: Vec<MatrixSpec>, minus: MatrixSpec, plus: MatrixSpec },
    DirectSum { blocks: Vec<CoefficientSpec> },
    Sum { terms: Vec<CoefficientSpec> },
    /// `G(t)ᵀ A(t) G(t)`
    Congruence { inner: Box<CoefficientSpec>, transform: Box<CoefficientSpec> },
    /// Rotation by `angle(t)` in the `(i, j)` plane of `R^dim`.
    Rotation { dim: usize, i: usize, j: usize, angle: ProfileSpec },
}

impl CoefficientSpec {
    fn profile_part(&self) -> Option<(ProfileSpec, &Option<MatrixSpec>)> {
        Some(match self {
            CoefficientSpec::Sech2Well { params, matrix } => (ProfileSpec::Sech2Well(params.clone()), matrix),
            CoefficientSpec::PoschlTeller { params, matrix } => (ProfileSpec::PoschlTeller(params.clone()), matrix),
            CoefficientSpec::Tanh { params, matrix } => (ProfileSpec::Tanh(params.clone()), matrix),
            CoefficientSpec::Gaussian { params, matrix } => (ProfileSpec::Gaussian(params.clone()), matrix),
            CoefficientSpec::Bump { params, matrix } => (ProfileSpec::Bump(params.clone()), matrix),
            _ => return None,
        })
    }

    pub fn to_coefficient<T: Real>(&self, n: usize) -> Result<Coefficient<T>> {
        if let Some((profile, matrix)) = self.profile_part() {
            let matrix = match matrix {
                Some(m) => m.to_matrix()?,
                None => DMatrix::identity(n, n),
            };
            let c = Coefficient::Scaled { profile: profile.to_profile()?, matrix };
            if c.dim()? != n {
                return Err(Error::DimensionMismatch(format!("coefficient has dimension {}, expected {n}", c.dim()?)));
            }
            return Ok(c);
        }
        let c = match self {
            CoefficientSpec::Identity => Coefficient::identity(n),
            CoefficientSpec::Zero => Coefficient::zeros(n),
            CoefficientSpec::Constant { matrix } => Coefficient::Constant(matrix.to_matrix()?),
            CoefficientSpec::Table { grid, values, minus, plus } => {
                let samples = values.iter().map(|v| v.to_matrix()).collect::<Result<Vec<_>>>()?;
                let g = grid.iter().map(|&x| T::lit(x)).collect();
                Coefficient::Tabulated(Table::new(g, samples, minus.to_matrix()?, plus.to_matrix()?)?)
            }
            CoefficientSpec::DirectSum { blocks } => {
                let mut parts = Vec::with_capacity(blocks.len());
                for b in blocks {
                    let inner = b.dim_hint()?.unwrap_or(1);
                    parts.push(b.to_coefficient(inner)?);
                }
                Coefficient::DirectSum(parts)
            }
            CoefficientSpec::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidInput("empty sum".into()));
                }
                Coefficient::Sum(terms.iter().map(|t| t.to_coefficient(n)).collect::<Result<_>>()?)
            }
            CoefficientSpec::Congruence { inner, transform } => Coefficient::Congruence {
                inner: Box::new(inner.to_coefficient(n)?),
                transform: Box::new(transform.to_coefficient(n)?),
            },
            CoefficientSpec::Rotation { dim, i, j, angle } => {
                Coefficient::PlaneRotation { dim: *dim, i: *i, j: *j, angle: angle.to_profile()? }
            }
            _ => unreachable!("profile presets handled above"),
        };
        if c.dim()? != n {
            return Err(Error::DimensionMismatch(format!("coefficient has dimension {}, expected {n}", c.dim()?)));
        }
        Ok(c)
    }

    /// Dimension implied by the spec itself; `None` for shapeless entries
    /// (identity, zero, bare profiles), which take the size of their context.
    pub fn dim_hint(&self) -> Result<Option<usize>> {
        if let Some((_, matrix)) = self.profile_part() {
            return Ok(match matrix {
                Some(m) => Some(m.to_matrix::<f64>()?.nrows()),
                None => None,
            });
        }
        Ok(match self {
            CoefficientSpec::Identity | CoefficientSpec::Zero => None,
            CoefficientSpec::Constant { matrix } => Some(matrix.to_matrix::<f64>()?.nrows()),
            CoefficientSpec::Table { minus, .. } => Some(minus.to_matrix::<f64>()?.nrows()),
            CoefficientSpec::DirectSum { blocks } => {
                let mut n = 0;
                for b in blocks {
                    n += b.dim_hint()?.unwrap_or(1);
                }
                Some(n)
            }
            CoefficientSpec::Sum { terms } => {
                let mut hint = None;
                for t in terms {
                    hint = hint.or(t.dim_hint()?);
                }
                hint
            }
            CoefficientSpec::Congruence { inner, transform } => inner.dim_hint()?.or(transform.dim_hint()?),
            CoefficientSpec::Rotation { dim, .. } => Some(*dim),
            _ => None,
        })
    }
}

/// Problem file: `{"n": .., "P": .., "Q": .., "R": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    #[serde(rename = "P", default = "identity_spec")]
    pub p: CoefficientSpec,
    #[serde(rename = "Q", default = "zero_spec")]
    pub q: CoefficientSpec,
    #[serde(rename = "R")]
    pub r: CoefficientSpec,
}

fn identity_spec() -> CoefficientSpec {
    CoefficientSpec::Identity
}

fn zero_spec() -> CoefficientSpec {
    CoefficientSpec::Zero
}

impl ProblemSpec {
    pub fn build<T: Real>(&self) -> Result<SturmLiouvilleProblem<T>> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        SturmLiouvilleProblem::new(
            self.p.to_coefficient(self.n)?,
            self.q.to_coefficient(self.n)?,
            self.r.to_coefficient(self.n)?,
        )
    }
}

/// The nonlinearity of a reaction system file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum SystemSpec {
    Nagumo { a: f64 },
    Quadratic,
    /// Scalar `∇F` sampled on an increasing `u`-grid.
    Tabulated { u: Vec<f64>, grad: Vec<f64> },
    DirectSum { parts: Vec<SystemSpec> },
}

impl SystemSpec {
    pub fn build<T: Real>(&self) -> Result<ReactionSystem<T>> {
        Ok(match self {
            SystemSpec::Nagumo { a } => ReactionSystem::Nagumo { a: T::lit(*a) },
            SystemSpec::Quadratic => ReactionSystem::Quadratic,
            SystemSpec::Tabulated { u, grad } => ReactionSystem::Tabulated(CubicSpline::new(
                u.iter().map(|&x| T::lit(x)).collect(),
                grad.iter().map(|&x| T::lit(x)).collect(),
            )?),
            SystemSpec::DirectSum { parts } => {
                ReactionSystem::DirectSum(parts.iter().map(|p| p.build()).collect::<Result<_>>()?)
            }
        })
    }
}

/// Where the wave profile comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    /// Collocation solve.
    #[default]
    Solve,
    /// Closed-form Nagumo front (requires the `nagumo` preset).
    NagumoFront,
    /// Closed-form standing pulse (requires the `quadratic` preset).
    QuadraticPulse,
}

/// Reaction system file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub system: SystemSpec,
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    /// Speed guess, or the speed itself when `bvp.speed` is fixed.
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub profile: ProfileSource,
    #[serde(default)]
    pub bvp: BvpConfig,
    #[serde(default)]
    pub analysis: WaveConfig,
}

/// One sample of a Lagrangian path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub frame: Vec<Vec<f64>>,
}

/// Frames file for index computations: named `2n x n` frames, and
/// optionally a sampled path with a reference plane (Dirichlet when
/// omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesFile {
    pub n: usize,
    #[serde(default)]
    pub frames: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default)]
    pub path: Vec<PathSample>,
    #[serde(default)]
    pub reference: Option<Vec<Vec<f64>>>,
}

impl FramesFile {
    pub fn frame<T: Real>(&self, name: &str) -> Result<LagrangianFrame<T>> {
        let rows = self.frames.get(name).ok_or_else(|| Error::InvalidInput(format!("missing frame `{name}`")))?;
        self.parse_frame(rows)
    }

    pub fn parse_frame<T: Real>(&self, rows: &[Vec<f64>]) -> Result<LagrangianFrame<T>> {
        let m = rows_to_matrix::<T>(rows)?;
        if m.shape() != (2 * self.n, self.n) {
            return Err(Error::DimensionMismatch(format!("frames must be {}x{}", 2 * self.n, self.n)));
        }
        frame_from_columns(&m, T::lit(RANK_TOL))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_round_trip() {
        let text = r#"{"n": 1, "R": {"kind": "poschl_teller", "params": [2, 0.5]}}"#;
        let spec: ProblemSpec = serde_json::from_str(text).unwrap();
        let p = spec.build::<f64>().unwrap();
        assert!((p.r().eval(0.0)[(0, 0)] - (0.5 - 6.0)).abs() < 1e-15);
        let again: ProblemSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn direct_sum_dimensions() {
        let text = r#"{"n": 3,
            "R": {"kind": "direct_sum", "blocks": [
                {"kind": "sech2_well", "params": [2, 6]},
                {"kind": "constant", "matrix": [[1, 0], [0, 2]]}
            ]}}"#;
        let spec: ProblemSpec = serde_json::from_str(text).unwrap();
        let p = spec.build::<f64>().unwrap();
        assert_eq!(p.n(), 3);
        assert_eq!(p.r().eval(0.0)[(2, 2)], 2.0);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let wrong_n = r#"{"n": 2, "R": {"kind": "constant", "matrix": 1.0}}"#;
        let spec: ProblemSpec = serde_json::from_str(wrong_n).unwrap();
        assert!(spec.build::<f64>().is_err());
        let ragged = r#"{"n": 2, "R": {"kind": "constant", "matrix": [[1, 0], [0]]}}"#;
        assert!(serde_json::from_str::<ProblemSpec>(ragged).unwrap().build::<f64>().is_err());
        assert!(serde_json::from_str::<ProblemSpec>(r#"{"n": 1}"#).is_err());
    }

    #[test]
    fn system_file_defaults() {
        let f: SystemFile = serde_json::from_str(r#"{"system": {"preset": "nagumo", "a": 0.25}, "u_minus": [1], "u_plus": [0]}"#).unwrap();
        assert_eq!(f.profile, ProfileSource::Solve);
        assert_eq!(f.system.build::<f64>().unwrap().n(), 1);
    }
}
