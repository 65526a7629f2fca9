//! Matrix-valued coefficient paths `t ↦ P(t), Q(t), R(t)` with finite limits
//! at `±∞`.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

/// Which end of the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Minus,
    Plus,
}

/// Scalar profile families.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile<T: Real> {
    Constant(T),
    /// `kappa - depth * sech²(rate (t - center))`
    Sech2Well { kappa: T, depth: T, rate: T, center: T },
    /// `lo + (hi - lo) (1 + tanh(rate (t - center))) / 2`
    Tanh { lo: T, hi: T, rate: T, center: T },
    /// `base + amp * exp(-((t - center) / width)²)`
    Gaussian { base: T, amp: T, width: T, center: T },
    /// Smooth compactly supported bump of height `amp` on `|t - center| < radius`.
    Bump { amp: T, center: T, radius: T },
}

impl<T: Real> Profile<T> {
    pub fn eval(&self, t: T) -> T {
        match *self {
            Profile::Constant(c) => c,
            Profile::Sech2Well { kappa, depth, rate, center } => {
                let s = T::one() / (rate * (t - center)).cosh();
                kappa - depth * s * s
            }
            Profile::Tanh { lo, hi, rate, center } => {
                lo + (hi - lo) * (T::one() + (rate * (t - center)).tanh()) * T::lit(0.5)
            }
            Profile::Gaussian { base, amp, width, center } => {
                let x = (t - center) / width;
                base + amp * (-x * x).exp()
            }
            Profile::Bump { amp, center, radius } => {
                let x = (t - center) / radius;
                let s = T::one() - x * x;
                if s <= T::zero() {
                    T::zero()
                } else {
                    amp * (T::one() - T::one() / s).exp()
                }
            }
        }
    }

    pub fn limit(&self, side: Side) -> T {
        match *self {
            Profile::Constant(c) => c,
            Profile::Sech2Well { kappa, .. } => kappa,
            Profile::Tanh { lo, hi, rate, .. } => {
                let up = (side == Side::Plus) == (rate >= T::zero());
                if up {
                    hi
                } else {
                    lo
                }
            }
            Profile::Gaussian { base, .. } => base,
            Profile::Bump { .. } => T::zero(),
        }
    }
}

/// Natural cubic spline through `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline<T: Real> {
    x: Vec<T>,
    y: Vec<T>,
    m: Vec<T>,
}

impl<T: Real> CubicSpline<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let k = x.len();
        if k < 2 || y.len() != k {
            return Err(Error::InvalidInput("spline needs at least two matching samples".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("spline abscissae must increase".into()));
        }
        // Second derivatives from the tridiagonal system (Thomas algorithm).
        let mut m = vec![T::zero(); k];
        if k > 2 {
            let inner = k - 2;
            let mut diag = vec![T::zero(); inner];
            let mut rhs = vec![T::zero(); inner];
            let mut upper = vec![T::zero(); inner];
            let six = T::lit(6.0);
            for i in 0..inner {
                let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
                diag[i] = T::lit(2.0) * (h0 + h1);
                upper[i] = h1;
                rhs[i] = six * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..inner {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] = rhs[i] - w * rhs[i - 1];
            }
            let mut sol = vec![T::zero(); inner];
            sol[inner - 1] = rhs[inner - 1] / diag[inner - 1];
            for i in (0..inner - 1).rev() {
                sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
            }
            m[1..k - 1].copy_from_slice(&sol);
        }
        Ok(Self { x, y, m })
    }

    fn interval(&self, t: T) -> usize {
        let k = self.x.len();
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p if p >= k => k - 2,
            p => p - 1,
        }
    }

    /// First derivative of the spline.
    pub fn derivative(&self, t: T) -> T {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (three, six) = (T::lit(3.0), T::lit(6.0));
        (self.y[i + 1] - self.y[i]) / h
            + ((T::one() - three * a * a) * self.m[i] + (three * b * b - T::one()) * self.m[i + 1]) * h / six
    }

    pub fn eval(&self, t: T) -> T {
        let k = self.x.len();
        let i = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p if p >= k => k - 2,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let six = T::lit(6.0);
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / six
    }
}

/// Matrix samples on a grid, interpolated entrywise by natural cubic
/// splines and replaced by the declared limits outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T: Real> {
    grid: Vec<T>,
    samples: Vec<DMatrix<T>>,
    splines: Vec<CubicSpline<T>>,
    minus: DMatrix<T>,
    plus: DMatrix<T>,
}

impl<T: Real> Table<T> {
    pub fn new(grid: Vec<T>, samples: Vec<DMatrix<T>>, minus: DMatrix<T>, plus: DMatrix<T>) -> Result<Self> {
        if samples.len() != grid.len() || samples.is_empty() {
            return Err(Error::InvalidInput("table grid and samples differ in length".into()));
        }
        let (r, c) = samples[0].shape();
        if samples.iter().any(|s| s.shape() != (r, c)) || minus.shape() != (r, c) || plus.shape() != (r, c) {
            return Err(Error::DimensionMismatch("table entries differ in shape".into()));
        }
        let mut splines = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                let y = samples.iter().map(|s| s[(i, j)]).collect();
                splines.push(CubicSpline::new(grid.clone(), y)?);
            }
        }
        Ok(Self { grid, samples, splines, minus, plus })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn samples(&self) -> &[DMatrix<T>] {
        &self.samples
    }

    /// Largest mismatch between a table edge and its declared limit.
    pub fn edge_mismatch(&self) -> T {
        let first = (&self.samples[0] - &self.minus).norm();
        let last = (&self.samples[self.samples.len() - 1] - &self.plus).norm();
        first.max(last)
    }

    pub fn eval(&self, t: T) -> DMatrix<T> {
        let k = self.grid.len();
        if t < self.grid[0] {
            return self.minus.clone();
        }
        if t > self.grid[k - 1] {
            return self.plus.clone();
        }
        let (r, c) = self.minus.shape();
        DMatrix::from_fn(r, c, |i, j| self.splines[j * r + i].eval(t))
    }
}

/// A matrix-valued coefficient path.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient<T: Real> {
    Constant(DMatrix<T>),
    /// `profile(t) * matrix`
    Scaled { profile: Profile<T>, matrix: DMatrix<T> },
    /// Block-diagonal assembly.
    DirectSum(Vec<Coefficient<T>>),
    Sum(Vec<Coefficient<T>>),
    /// `G(t)ᵀ A(t) G(t)`
    Congruence { inner: Box<Coefficient<T>>, transform: Box<Coefficient<T>> },
    /// Rotation by `angle(t)` in the `(i, j)` coordinate plane of `R^dim`.
    PlaneRotation { dim: usize, i: usize, j: usize, angle: Profile<T> },
    Tabulated(Table<T>),
}

impl<T: Real> Coefficient<T> {
    pub fn scalar(profile: Profile<T>) -> Self {
        Coefficient::Scaled { profile, matrix: DMatrix::identity(1, 1) }
    }

    pub fn constant_scalar(c: T) -> Self {
        Coefficient::Constant(DMatrix::from_element(1, 1, c))
    }

    pub fn zeros(n: usize) -> Self {
        Coefficient::Constant(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Coefficient::Constant(DMatrix::identity(n, n))
    }

    /// Square dimension; validates composite shapes.
    pub fn dim(&self) -> Result<usize> {
        let square = |m: &DMatrix<T>| {
            if m.is_square() {
                Ok(m.nrows())
            } else {
                Err(Error::DimensionMismatch("coefficient matrices must be square".into()))
            }
        };
        match self {
            Coefficient::Constant(m) => square(m),
            Coefficient::Scaled { matrix, .. } => square(matrix),
            Coefficient::DirectSum(parts) => parts.iter().map(|p| p.dim()).sum(),
            Coefficient::Sum(parts) => {
                let dims = parts.iter().map(|p| p.dim()).collect::<Result<Vec<_>>>()?;
                match dims.first() {
                    Some(&d) if dims.iter().all(|&x| x == d) => Ok(d),
                    _ => Err(Error::DimensionMismatch("summands differ in dimension".into())),
                }
            }
            Coefficient::Congruence { inner, transform } => {
                let d = inner.dim()?;
                if transform.dim()? != d {
                    return Err(Error::DimensionMismatch("congruence transform size".into()));
                }
                Ok(d)
            }
            Coefficient::PlaneRotation { dim, i, j, .. } => {
                if i >= dim || j >= dim || i == j {
                    return Err(Error::InvalidInput("rotation plane out of range".into()));
                }
                Ok(*dim)
            }
            Coefficient::Tabulated(t) => square(&t.minus),
        }
    }

    pub fn eval(&self, t: T) -> DMatrix<T> {
        self.eval_with(t, None)
    }

    pub fn limit(&self, side: Side) -> DMatrix<T> {
        self.eval_with(T::zero(), Some(side))
    }

    fn eval_with(&self, t: T, side: Option<Side>) -> DMatrix<T> {
        let prof = |p: &Profile<T>| side.map(|s| p.limit(s)).unwrap_or_else(|| p.eval(t));
        match self {
            Coefficient::Constant(m) => m.clone(),
            Coefficient::Scaled { profile, matrix } => matrix * prof(profile),
            Coefficient::DirectSum(parts) => {
                let blocks: Vec<DMatrix<T>> = parts.iter().map(|p| p.eval_with(t, side)).collect();
                let n = blocks.iter().map(|b| b.nrows()).sum();
                let mut out = DMatrix::zeros(n, n);
                let mut k = 0;
                for b in &blocks {
                    linalg::set_block(&mut out, k, k, b);
                    k += b.nrows();
                }
                out
            }
            Coefficient::Sum(parts) => {
                let mut it = parts.iter().map(|p| p.eval_with(t, side));
                let first = it.next().expect("nonempty sum");
                it.fold(first, |a, b| a + b)
            }
            Coefficient::Congruence { inner, transform } => {
                let g = transform.eval_with(t, side);
                g.transpose() * inner.eval_with(t, side) * g
            }
            Coefficient::PlaneRotation { dim, i, j, angle } => {
                let a = prof(angle);
                let mut g = DMatrix::identity(*dim, *dim);
                g[(*i, *i)] = a.cos();
                g[(*j, *j)] = a.cos();
                g[(*i, *j)] = -a.sin();
                g[(*j, *i)] = a.sin();
                g
            }
            Coefficient::Tabulated(table) => match side {
                Some(Side::Minus) => table.minus.clone(),
                Some(Side::Plus) => table.plus.clone(),
                None => table.eval(t),
            },
        }
    }

    /// Tables contained anywhere in this coefficient.
    pub fn tables(&self) -> Vec<&Table<T>> {
        match self {
            Coefficient::Tabulated(t) => vec![t],
            Coefficient::DirectSum(p) | Coefficient::Sum(p) => p.iter().flat_map(|c| c.tables()).collect(),
            Coefficient::Congruence { inner, transform } => {
                let mut v = inner.tables();
                v.extend(transform.tables());
                v
            }
            _ => Vec::new(),
        }
    }
}

/// Evaluates a coefficient entrywise on many points (used for tabulating).
pub fn sample_entry<T: Real>(c: &Coefficient<T>, grid: &[T], i: usize, j: usize) -> DVector<T> {
    DVector::from_iterator(grid.len(), grid.iter().map(|&t| c.eval(t)[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sech2_profile_limits() {
        let p: Profile<f64> = Profile::Sech2Well { kappa: 0.5, depth: 6.0, rate: 1.0, center: 0.0 };
        assert!((p.eval(0.0) + 5.5).abs() < 1e-15);
        assert_eq!(p.limit(Side::Plus), 0.5);
        assert!((p.eval(40.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tanh_limits_follow_rate_sign() {
        let p: Profile<f64> = Profile::Tanh { lo: 1.0, hi: 3.0, rate: -2.0, center: 0.0 };
        assert_eq!(p.limit(Side::Plus), 1.0);
        assert_eq!(p.limit(Side::Minus), 3.0);
        assert!((p.eval(50.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bump_is_compact() {
        let p = Profile::Bump { amp: 2.0, center: 1.0, radius: 0.5 };
        assert_eq!(p.eval(1.0), 2.0);
        assert_eq!(p.eval(1.6), 0.0);
        assert!(p.eval(1.49) > 0.0);
    }

    #[test]
    fn spline_reproduces_cubic_interior() {
        let x: Vec<f64> = (0..=200).map(|i| -2.0 + 0.02 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::new(x, y).unwrap();
        for t in [-1.234, 0.0, 0.777, 1.5] {
            assert!((s.eval(t) - f64::sin(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn direct_sum_and_congruence() {
        let a: Coefficient<f64> = Coefficient::constant_scalar(2.0);
        let b = Coefficient::scalar(Profile::Constant(3.0));
        let d = Coefficient::DirectSum(vec![a, b]);
        assert_eq!(d.dim().unwrap(), 2);
        let m = d.eval(0.3);
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(1, 1)], 3.0);
        let rot = Coefficient::PlaneRotation { dim: 2, i: 0, j: 1, angle: Profile::Constant(0.7) };
        let c = Coefficient::Congruence { inner: Box::new(d.clone()), transform: Box::new(rot) };
        let cm = c.eval(0.0);
        assert!((cm.trace() - 5.0).abs() < 1e-14);
        assert!((cm.determinant() - 6.0).abs() < 1e-13);
    }

    #[test]
    fn table_snaps_outside() {
        let grid = vec![-1.0, 0.0, 1.0];
        let samples = vec![DMatrix::from_element(1, 1, 1.0); 3];
        let t = Table::new(grid, samples, DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(t.eval(5.0)[(0, 0)], 2.0);
        assert_eq!(t.eval(0.5)[(0, 0)], 1.0);
        assert_eq!(t.edge_mismatch(), 1.0);
    }
}
