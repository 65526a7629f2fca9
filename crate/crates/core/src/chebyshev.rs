//! Chebyshev–Gauss–Lobatto collocation on an interval.

use crate::scalar::Real;
use nalgebra::DMatrix;

/// Nodes and differentiation matrix on `[-half_width, half_width]`,
/// ordered by increasing abscissa.
#[derive(Debug, Clone)]
pub struct Collocation<T: Real> {
    pub nodes: Vec<T>,
    pub d1: DMatrix<T>,
    pub d2: DMatrix<T>,
    /// Clenshaw–Curtis quadrature weights.
    pub weights: Vec<T>,
    half_width: T,
}

impl<T: Real> Collocation<T> {
    /// `n + 1` points; `n` even puts a node at the origin.
    pub fn new(n: usize, half_width: T) -> Self {
        assert!(n >= 2);
        let pi = T::pi();
        let nn = T::of_usize(n);
        // x_j = -cos(jπ/n), increasing.
        let x: Vec<T> = (0..=n).map(|j| -(pi * T::of_usize(j) / nn).cos()).collect();
        let c = |j: usize| {
            let base = if j == 0 || j == n { T::lit(2.0) } else { T::one() };
            if j % 2 == 0 {
                base
            } else {
                -base
            }
        };
        let mut d = DMatrix::zeros(n + 1, n + 1);
        for i in 0..=n {
            for j in 0..=n {
                if i != j {
                    d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
                }
            }
        }
        // Negative-sum trick for the diagonal.
        for i in 0..=n {
            let s: T = (0..=n).filter(|&j| j != i).fold(T::zero(), |a, j| a + d[(i, j)]);
            d[(i, i)] = -s;
        }
        let scale = T::one() / half_width;
        let d1 = &d * scale;
        let d2 = &d1 * &d1;
        let nodes = x.iter().map(|&v| v * half_width).collect();
        let weights = clenshaw_curtis::<T>(n).into_iter().map(|w| w * half_width).collect();
        Self { nodes, d1, d2, weights, half_width }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    /// Barycentric interpolation of nodal `values` at `t`.
    pub fn interpolate(&self, values: &[T], t: T) -> T {
        let n = self.nodes.len() - 1;
        let mut num = T::zero();
        let mut den = T::zero();
        for (j, (&xj, &fj)) in self.nodes.iter().zip(values).enumerate() {
            let diff = t - xj;
            if diff == T::zero() {
                return fj;
            }
            let mut w = if j % 2 == 0 { T::one() } else { -T::one() };
            if j == 0 || j == n {
                w *= T::lit(0.5);
            }
            let q = w / diff;
            num += q * fj;
            den += q;
        }
        num / den
    }
}

fn clenshaw_curtis<T: Real>(n: usize) -> Vec<T> {
    let pi = T::pi();
    let nn = T::of_usize(n);
    let mut w = vec![T::zero(); n + 1];
    for (j, wj) in w.iter_mut().enumerate() {
        let theta = pi * T::of_usize(j) / nn;
        let mut s = T::zero();
        for k in 1..=n / 2 {
            let b = if 2 * k == n { T::one() } else { T::lit(2.0) };
            s += b / T::of_usize(4 * k * k - 1) * (T::of_usize(2 * k) * theta).cos();
        }
        let c = if j == 0 || j == n { T::one() } else { T::lit(2.0) };
        *wj = c / nn * (T::one() - s);
    }
    w
}
