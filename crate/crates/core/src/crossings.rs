//! Lagrangian curves, crossing localization, and crossing-form providers.
//!
//! Crossings of a curve `Λ(t)` with a fixed Lagrangian `V` are detected by
//! winding: in symplectic coordinates adapted to `V` every Lagrangian frame
//! `(a; b)` gives the unitary `U = (a + ib)(a - ib)^{-1}`, and `Λ(t) ∩ V`
//! is nontrivial exactly when `U(t)` has eigenvalue `1`. Counting the
//! eigenphases that pass through `1` between two instants gives the signed
//! number of crossings in between, independently of how close together they
//! sit. Positive crossing forms rotate the phases counterclockwise.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::symplectic::{self, apply_j, LagrangianFrame, QuadraticForm};
use nalgebra::DMatrix;
use num_complex::Complex;

/// A continuous path of Lagrangian subspaces that can be evaluated anywhere
/// on its domain.
pub trait LagrangianCurve<T: Real> {
    fn n(&self) -> usize;
    fn frame_at(&self, t: T) -> Result<LagrangianFrame<T>>;
}

/// Evaluates the crossing form `Γ(Λ(t), V; t)` on a given kernel.
pub trait CrossingFormProvider<T: Real> {
    /// `kernel` holds a basis of `Λ(t) ∩ V` as columns in `R^{2n}`.
    fn crossing_form(&self, t: T, frame: &LagrangianFrame<T>, kernel: &DMatrix<T>) -> Result<QuadraticForm<T>>;
}

/// Curve defined by a closure returning (not necessarily orthonormal)
/// `2n x n` frames.
pub struct FnCurve<T: Real, F: Fn(T) -> DMatrix<T>> {
    n: usize,
    f: F,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real, F: Fn(T) -> DMatrix<T>> FnCurve<T, F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f, _t: std::marker::PhantomData }
    }
}

impl<T: Real, F: Fn(T) -> DMatrix<T>> LagrangianCurve<T> for FnCurve<T, F> {
    fn n(&self) -> usize {
        self.n
    }

    fn frame_at(&self, t: T) -> Result<LagrangianFrame<T>> {
        let m = (self.f)(t);
        let f = symplectic::frame_from_columns(&m, T::lit(1e-8))?;
        Ok(symplectic::orthonormalize(&f))
    }
}

/// Crossing form from the derivative of the graph representation of the
/// curve over `Λ(t0)`, by central differences.
///
/// With an orthonormal frame `Z0` of `Λ(t0)`, nearby `Λ(t)` is the graph of
/// the symmetric `S(t) = Y X^{-1}` with `X = Z0^T Z(t)`, `Y = (J Z0)^T Z(t)`,
/// and the crossing form is `c ↦ c^T S'(t0) c` on `Z0 c ∈ V`.
pub struct FiniteDifferenceForm<'a, C> {
    pub curve: &'a C,
    pub step: f64,
}

impl<'a, T: Real, C: LagrangianCurve<T>> CrossingFormProvider<T> for FiniteDifferenceForm<'a, C> {
    fn crossing_form(&self, t: T, frame: &LagrangianFrame<T>, kernel: &DMatrix<T>) -> Result<QuadraticForm<T>> {
        let z0 = symplectic::orthonormalize(frame).into_columns();
        let jz0 = apply_j(&z0);
        let h = T::lit(self.step);
        let graph = |s: T| -> Result<DMatrix<T>> {
            let z = self.curve.frame_at(s)?.into_columns();
            let x = z0.transpose() * &z;
            let y = jz0.transpose() * &z;
            let xinv = x.try_inverse().ok_or_else(|| {
                Error::InvalidInput("finite-difference step leaves the graph chart".into())
            })?;
            Ok(y * xinv)
        };
        let ds = (graph(t + h)? - graph(t - h)?) / (h + h);
        let c = z0.transpose() * kernel;
        Ok(QuadraticForm::new(kernel.clone(), c.transpose() * ds * c))
    }
}

/// Where a located crossing sits relative to the curve's domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CrossingPlacement {
    Start,
    Interior,
    End,
}

/// A crossing found by the locator.
#[derive(Debug, Clone)]
pub struct LocatedCrossing<T: Real> {
    pub tau: T,
    /// Length of the final localization bracket.
    pub width: T,
    /// Signed winding jump across the bracket.
    pub jump: i64,
    /// Number of principal-angle sines below the intersection tolerance.
    pub multiplicity: usize,
    pub placement: CrossingPlacement,
    pub frame: LagrangianFrame<T>,
    /// Basis of `Λ(tau) ∩ V`; padded with the most nearly intersecting
    /// directions when `multiplicity < |jump|`.
    pub kernel: DMatrix<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct LocatorConfig<T: Real> {
    /// Threshold on principal-angle sines for intersection membership.
    pub intersection_tol: T,
    /// Bisection stops once the bracket is this short.
    pub width_tol: T,
    /// Recursion limit when an interval winds too fast to count directly.
    pub max_subdivision: usize,
}

impl<T: Real> LocatorConfig<T> {
    pub fn for_span(a: T, b: T) -> Self {
        Self {
            intersection_tol: T::lit(symplectic::INTERSECTION_TOL),
            width_tol: T::lit(1e-10) * (b - a).abs().max(T::one()),
            max_subdivision: 24,
        }
    }
}

/// Coordinates adapted to the reference Lagrangian `V`.
struct Chart<T: Real> {
    vq: DMatrix<T>,
    jvq: DMatrix<T>,
}

#[derive(Debug, Clone, Copy)]
struct Phase<T: Real> {
    t: T,
    arg_det: T,
    phase_sum: T,
}

impl<T: Real> Chart<T> {
    fn new(reference: &LagrangianFrame<T>) -> Self {
        let vq = symplectic::orthonormalize(reference).into_columns();
        let jvq = apply_j(&vq);
        Self { vq, jvq }
    }

    /// `(a, b)` with `a` along `V` and `b` measuring the distance from `V`.
    fn coords(&self, z: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
        (self.vq.transpose() * z, self.jvq.transpose() * z)
    }

    fn phase(&self, t: T, frame: &LagrangianFrame<T>, snap: usize) -> Phase<T> {
        let (a, b) = self.coords(frame.columns());
        let n = a.nrows();
        let plus = DMatrix::from_fn(n, n, |i, j| Complex::new(a[(i, j)], b[(i, j)]));
        let minus = plus.map(|c| c.conj());
        let det = linalg::complex_det(&plus);
        let arg_det = det.im.atan2(det.re);
        let u = &plus * minus.try_inverse().expect("a - ib is invertible for Lagrangian frames");
        let two_pi = T::two_pi();
        let mut phases: Vec<T> = linalg::complex_eigenvalues(&u)
            .iter()
            .map(|l| {
                let th = l.im.atan2(l.re);
                if th <= T::zero() {
                    th + two_pi
                } else {
                    th
                }
            })
            .collect();
        if snap > 0 {
            // Endpoint convention: phases sitting at 1 are placed at 2π.
            let mut order: Vec<usize> = (0..phases.len()).collect();
            let dist = |th: T| th.min(two_pi - th);
            order.sort_by(|&i, &j| dist(phases[i]).partial_cmp(&dist(phases[j])).unwrap());
            for &i in order.iter().take(snap) {
                phases[i] = two_pi;
            }
        }
        let phase_sum = phases.iter().fold(T::zero(), |acc, &x| acc + x);
        Phase { t, arg_det, phase_sum }
    }
}

fn wrap_pi<T: Real>(x: T) -> T {
    let two_pi = T::two_pi();
    let mut y = x % two_pi;
    if y > T::pi() {
        y -= two_pi;
    } else if y <= -T::pi() {
        y += two_pi;
    }
    y
}

struct Locator<'a, T: Real, C: LagrangianCurve<T>> {
    curve: &'a C,
    chart: Chart<T>,
    cfg: LocatorConfig<T>,
}

impl<'a, T: Real, C: LagrangianCurve<T>> Locator<'a, T, C> {
    fn sample(&self, t: T) -> Result<(Phase<T>, LagrangianFrame<T>)> {
        let f = self.curve.frame_at(t)?;
        Ok((self.chart.phase(t, &f, 0), f))
    }

    /// Signed number of eigenphases passing through `1` on `[p0.t, p1.t]`.
    fn count(&self, p0: Phase<T>, p1: Phase<T>, depth: usize) -> Result<i64> {
        let two = T::lit(2.0);
        let cont = wrap_pi(two * (p1.arg_det - p0.arg_det));
        if cont.abs() > T::frac_pi_2() && depth < self.cfg.max_subdivision {
            let mid = (p0.t + p1.t) / two;
            let (pm, _) = self.sample(mid)?;
            return Ok(self.count(p0, pm, depth + 1)? + self.count(pm, p1, depth + 1)?);
        }
        let k = (cont - (p1.phase_sum - p0.phase_sum)) / T::two_pi();
        Ok(k.round().to_f64_lossy() as i64)
    }

    fn kernel(&self, frame: &LagrangianFrame<T>, want: usize) -> (usize, DMatrix<T>) {
        let (_, b) = self.chart.coords(frame.columns());
        let n = b.ncols();
        let d = linalg::svd(&b);
        let mult = d.singular_values.iter().filter(|&&s| s <= self.cfg.intersection_tol).count();
        let k = mult.max(want).min(n);
        let mut c = DMatrix::zeros(n, k);
        // Smallest singular values sit at the end.
        for j in 0..k {
            c.set_column(j, &d.v.column(n - 1 - j));
        }
        (mult, frame.columns() * c)
    }

    /// Splits the bracket `[p0, p1]` (holding `total` net crossings) into
    /// individual crossings by bisection on the winding count.
    fn resolve(&self, p0: Phase<T>, p1: Phase<T>, total: i64, out: &mut Vec<LocatedCrossing<T>>) -> Result<()> {
        let two = T::lit(2.0);
        let mut start = p0;
        let mut remaining = total;
        while remaining != 0 {
            let mut lo = start;
            let mut hi = p1;
            let mut jump = self.count(start, hi, 0)?;
            while hi.t - lo.t > self.cfg.width_tol {
                let mid = (lo.t + hi.t) / two;
                if mid <= lo.t || mid >= hi.t {
                    break;
                }
                let (pm, _) = self.sample(mid)?;
                let c = self.count(start, pm, 0)?;
                if c == 0 {
                    lo = pm;
                } else {
                    hi = pm;
                    jump = c;
                }
            }
            if jump == 0 {
                break;
            }
            let tau = (lo.t + hi.t) / two;
            let frame = self.curve.frame_at(tau)?;
            let (multiplicity, kernel) = self.kernel(&frame, jump.unsigned_abs() as usize);
            out.push(LocatedCrossing {
                tau,
                width: hi.t - lo.t,
                jump,
                multiplicity,
                placement: CrossingPlacement::Interior,
                frame,
                kernel,
            });
            remaining -= jump;
            start = hi;
        }
        Ok(())
    }
}

/// Result of scanning a curve against a reference Lagrangian.
#[derive(Debug, Clone)]
pub struct CrossingScan<T: Real> {
    pub crossings: Vec<LocatedCrossing<T>>,
    /// Net winding over the whole domain with the endpoint convention of the
    /// CLM crossing formula (start counts `m+`, end counts `-m-`).
    pub winding: i64,
}

/// Locates all crossings of `curve` with `reference` over `grid`.
///
/// `grid` must be strictly monotone (either direction). Endpoint crossings
/// are reported with `placement` `Start`/`End` even when their winding
/// contribution is zero.
pub fn locate_crossings<T: Real, C: LagrangianCurve<T>>(
    curve: &C,
    grid: &[T],
    reference: &LagrangianFrame<T>,
    cfg: &LocatorConfig<T>,
) -> Result<CrossingScan<T>> {
    if grid.len() < 2 {
        return Err(Error::InvalidInput("crossing scan needs at least two grid points".into()));
    }
    if reference.n() != curve.n() {
        return Err(Error::DimensionMismatch("curve and reference dimensions differ".into()));
    }
    let forward = grid[1] > grid[0];
    let locator = Locator { curve, chart: Chart::new(reference), cfg: *cfg };
    let last = grid.len() - 1;

    let mut phases = Vec::with_capacity(grid.len());
    let mut endpoint = Vec::new();
    for (i, &t) in grid.iter().enumerate() {
        if i > 0 && ((grid[i] > grid[i - 1]) != forward || grid[i] == grid[i - 1]) {
            return Err(Error::InvalidInput("grid must be strictly monotone".into()));
        }
        let frame = curve.frame_at(t)?;
        let snap = if i == 0 || i == last {
            let (mult, kernel) = locator.kernel(&frame, 0);
            if mult > 0 {
                endpoint.push(LocatedCrossing {
                    tau: t,
                    width: T::zero(),
                    jump: 0,
                    multiplicity: mult,
                    placement: if i == 0 { CrossingPlacement::Start } else { CrossingPlacement::End },
                    frame: frame.clone(),
                    kernel,
                });
            }
            mult
        } else {
            0
        };
        phases.push(locator.chart.phase(t, &frame, snap));
    }

    // The locator works on increasing parameters; for decreasing grids the
    // bisection logic is identical with the comparison flipped, so map
    // through t -> -t.
    let mut interior = Vec::new();
    let mut winding = 0;
    for w in phases.windows(2) {
        let k = locator.count(w[0], w[1], 0)?;
        winding += k;
        if k != 0 {
            if forward {
                locator.resolve(w[0], w[1], k, &mut interior)?;
            } else {
                let flipped = ReversedCurve { inner: curve };
                let rl = Locator { curve: &flipped, chart: Chart::new(reference), cfg: *cfg };
                let neg = |p: Phase<T>| Phase { t: -p.t, ..p };
                let mut found = Vec::new();
                rl.resolve(neg(w[0]), neg(w[1]), k, &mut found)?;
                for mut c in found {
                    c.tau = -c.tau;
                    interior.push(c);
                }
            }
        }
    }

    let a = grid[0];
    let b = grid[last];
    let band = cfg.width_tol * T::lit(10.0);
    let mut crossings: Vec<LocatedCrossing<T>> = Vec::new();
    for mut c in endpoint {
        // Fold the winding jump generated at the endpoint into its record.
        let at = c.tau;
        let merged: i64 = interior
            .iter()
            .filter(|x| (x.tau - at).abs() <= band)
            .map(|x| x.jump)
            .sum();
        c.jump = merged;
        interior.retain(|x| (x.tau - at).abs() > band);
        crossings.push(c);
    }
    crossings.extend(interior);
    let key = |c: &LocatedCrossing<T>| if forward { c.tau } else { -c.tau };
    crossings.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
    let _ = (a, b);
    Ok(CrossingScan { crossings, winding })
}

struct ReversedCurve<'a, C> {
    inner: &'a C,
}

impl<'a, T: Real, C: LagrangianCurve<T>> LagrangianCurve<T> for ReversedCurve<'a, C> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn frame_at(&self, t: T) -> Result<LagrangianFrame<T>> {
        self.inner.frame_at(-t)
    }
}

/// Piecewise-geodesic interpolation of sampled Lagrangian frames.
///
/// Orthonormal Lagrangian frames `(X; Y)` correspond to unitary matrices
/// `X + iY`; between samples the curve follows `U_i exp(s log(U_i^* U_{i+1} G))`
/// with the real orthogonal gauge `G` chosen to align consecutive samples.
/// Every interpolated frame is exactly Lagrangian.
pub struct SampledCurve<T: Real> {
    n: usize,
    times: Vec<T>,
    unitaries: Vec<DMatrix<Complex<T>>>,
    generators: Vec<(DMatrix<Complex<T>>, Vec<T>)>,
}

impl<T: Real> SampledCurve<T> {
    pub fn new(samples: Vec<(T, LagrangianFrame<T>)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput("a sampled curve needs at least two samples".into()));
        }
        let n = samples[0].1.n();
        let mut times = Vec::new();
        let mut unitaries: Vec<DMatrix<Complex<T>>> = Vec::new();
        for (k, (t, f)) in samples.iter().enumerate() {
            if f.n() != n {
                return Err(Error::DimensionMismatch("sampled frames differ in dimension".into()));
            }
            if k > 0 && *t <= times[k - 1] {
                return Err(Error::InvalidInput("sample times must increase".into()));
            }
            let z = symplectic::orthonormalize(f);
            let (x, y) = (z.top(), z.bottom());
            let mut u = DMatrix::from_fn(n, n, |i, j| Complex::new(x[(i, j)], y[(i, j)]));
            if let Some(prev) = unitaries.last() {
                // Align the gauge with the previous sample (orthogonal Procrustes).
                let m = (prev.adjoint() * &u).map(|c| c.re);
                let d = linalg::svd(&m);
                let g = (d.u * d.v.transpose()).transpose();
                let gc = g.map(|r| Complex::new(r, T::zero()));
                u = u * gc;
            }
            times.push(*t);
            unitaries.push(u);
        }
        let mut generators = Vec::new();
        for w in unitaries.windows(2) {
            let rel = w[0].adjoint() * &w[1];
            let schur = rel.schur();
            let (q, t) = schur.unpack();
            let angles: Vec<T> = (0..n).map(|i| t[(i, i)].im.atan2(t[(i, i)].re)).collect();
            generators.push((q, angles));
        }
        Ok(Self { n, times, unitaries, generators })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }
}

impl<T: Real> LagrangianCurve<T> for SampledCurve<T> {
    fn n(&self) -> usize {
        self.n
    }

    fn frame_at(&self, t: T) -> Result<LagrangianFrame<T>> {
        let last = self.times.len() - 1;
        if t < self.times[0] || t > self.times[last] {
            return Err(Error::InvalidInput("evaluation outside the sampled range".into()));
        }
        let i = match self.times.iter().position(|&s| s > t) {
            Some(0) => 0,
            Some(k) => k - 1,
            None => last - 1,
        };
        let s = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        let (q, angles) = &self.generators[i];
        let d = DMatrix::from_fn(self.n, self.n, |r, c| {
            if r == c {
                let a = angles[r] * s;
                Complex::new(a.cos(), a.sin())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        });
        let u = &self.unitaries[i] * (q * d * q.adjoint());
        let mut z = DMatrix::zeros(2 * self.n, self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                z[(r, c)] = u[(r, c)].re;
                z[(self.n + r, c)] = u[(r, c)].im;
            }
        }
        Ok(symplectic::orthonormalize(&LagrangianFrame::from_trusted(z)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(theta: f64) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()])
    }

    fn grid(a: f64, b: f64, k: usize) -> Vec<f64> {
        (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
    }

    #[test]
    fn rotating_line_single_positive_crossing() {
        let curve = FnCurve::new(1, line);
        let v = symplectic::frame_from_columns(&line(PI / 2.0), 1e-8).unwrap();
        let g = grid(PI / 4.0, 3.0 * PI / 4.0, 40);
        let scan = locate_crossings(&curve, &g, &v, &LocatorConfig::for_span(g[0], g[40])).unwrap();
        assert_eq!(scan.winding, 1);
        assert_eq!(scan.crossings.len(), 1);
        let c = &scan.crossings[0];
        assert!((c.tau - PI / 2.0).abs() < 1e-8);
        assert_eq!(c.multiplicity, 1);
        let fd = FiniteDifferenceForm { curve: &curve, step: 1e-5 };
        let form = fd.crossing_form(c.tau, &c.frame, &c.kernel).unwrap();
        assert!((form.gram[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn close_crossings_in_one_interval_are_separated() {
        // Direct sum of two rotating lines crossing V at t = 1.0 and 1.0005.
        let curve = FnCurve::new(2, |t: f64| {
            let mut z = DMatrix::zeros(4, 2);
            let (a, b) = (t - 1.0 + PI / 2.0, t - 1.0005 + PI / 2.0);
            z[(0, 0)] = a.cos();
            z[(2, 0)] = a.sin();
            z[(1, 1)] = b.cos();
            z[(3, 1)] = b.sin();
            z
        });
        let mut vm = DMatrix::zeros(4, 2);
        vm[(2, 0)] = 1.0;
        vm[(3, 1)] = 1.0;
        let v = symplectic::frame_from_columns(&vm, 1e-8).unwrap();
        let g = grid(0.5, 1.5, 10);
        let scan = locate_crossings(&curve, &g, &v, &LocatorConfig::for_span(0.5, 1.5)).unwrap();
        assert_eq!(scan.winding, 2);
        assert_eq!(scan.crossings.len(), 2);
        assert!((scan.crossings[0].tau - 1.0).abs() < 1e-8);
        assert!((scan.crossings[1].tau - 1.0005).abs() < 1e-8);
    }

    #[test]
    fn sampled_curve_reproduces_rotating_line() {
        let samples: Vec<(f64, LagrangianFrame<f64>)> = grid(0.0, 1.0, 5)
            .into_iter()
            .map(|t| (t, symplectic::frame_from_columns(&line(t), 1e-8).unwrap()))
            .collect();
        let c = SampledCurve::new(samples).unwrap();
        let exact = symplectic::frame_from_columns(&line(0.37), 1e-8).unwrap();
        let got = c.frame_at(0.37).unwrap();
        assert!(symplectic::gap_distance(&exact, &got) < 1e-12);
    }

    #[test]
    fn wrap_pi_range() {
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_pi(-0.5f64) + 0.5).abs() < 1e-15);
    }
}
