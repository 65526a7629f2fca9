#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sturm_morse::{Coefficient, Profile};
use sturm_morse::symplectic::frame_from_columns;
use sturm_morse::{Frame, Problem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_symmetric(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = gaussian_matrix(r, n, n);
    (&a + a.transpose()) * 0.5
}

pub fn random_orthogonal(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    gaussian_matrix(r, n, n).qr().q()
}

/// `diag(O, O) · R(θ) · (I; S)`: a generic Lagrangian that need not be a
/// graph over either coordinate plane.
pub fn random_frame(r: &mut ChaCha8Rng, n: usize) -> Frame {
    let s = random_symmetric(r, n) * 2.0;
    let mut z = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        let th: f64 = r.random_range(0.0..std::f64::consts::PI);
        let (c, sn) = (th.cos(), th.sin());
        for j in 0..n {
            let (y, w) = (if i == j { 1.0 } else { 0.0 }, s[(i, j)]);
            z[(i, j)] = c * y - sn * w;
            z[(n + i, j)] = sn * y + c * w;
        }
    }
    let o = random_orthogonal(r, n);
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&o);
    big.view_mut((n, n), (n, n)).copy_from(&o);
    frame_from_columns(&(big * z), 1e-10).expect("random frame is Lagrangian")
}

pub fn random_invertible(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let g = gaussian_matrix(r, n, n) + DMatrix::identity(n, n) * 0.5;
        if sturm_morse::linalg::singular_values_ascending(&g)[0] > 0.2 {
            return g;
        }
    }
}

/// `kappa - m(m+1) sech² t`, index `#{k ≤ m : k² > kappa}`.
pub fn poschl_teller(m: u32, kappa: f64) -> Coefficient {
    Coefficient::scalar(Profile::Sech2Well { kappa, depth: (m * (m + 1)) as f64, rate: 1.0, center: 0.0 })
}

pub fn poschl_teller_problem(m: u32, kappa: f64) -> Problem {
    Problem::schrodinger(poschl_teller(m, kappa)).unwrap()
}

pub fn poschl_teller_index(m: u32, kappa: f64) -> i64 {
    (1..=m).filter(|&k| (k * k) as f64 > kappa).count() as i64
}

/// A κ at distance at least 0.3 from every `k²`.
pub fn safe_kappa(r: &mut ChaCha8Rng, m: u32) -> f64 {
    let k: u32 = r.random_range(0..=m);
    let base = if k == 0 { 0.3 } else { (k * k) as f64 + 0.3 };
    base + r.random_range(0.0..0.4)
}

/// Direct sums and smooth rotations of Pöschl–Teller blocks, with a
/// compactly supported `Q` and a smooth positive `P`.
pub fn random_problem(r: &mut ChaCha8Rng, n: usize) -> Problem {
    let blocks: Vec<Coefficient> = (0..n)
        .map(|_| {
            let m = r.random_range(1..=3);
            let kappa = safe_kappa(r, m);
            poschl_teller(m, kappa)
        })
        .collect();
    let mut rr = Coefficient::DirectSum(blocks);
    if n > 1 {
        let angle = Profile::Tanh {
            lo: r.random_range(-1.0..1.0),
            hi: r.random_range(-1.0..1.0),
            rate: r.random_range(0.3..1.5),
            center: r.random_range(-2.0..2.0),
        };
        rr = Coefficient::Congruence {
            inner: Box::new(rr),
            transform: Box::new(Coefficient::PlaneRotation { dim: n, i: 0, j: 1, angle }),
        };
    }
    let p_bump = random_symmetric(r, n);
    let p_bump = &p_bump * &p_bump * 0.3;
    let p = Coefficient::Sum(vec![
        Coefficient::identity(n),
        Coefficient::Scaled {
            profile: Profile::Gaussian { base: 0.0, amp: 1.0, width: r.random_range(0.5..2.0), center: r.random_range(-1.0..1.0) },
            matrix: p_bump,
        },
    ]);
    let q = Coefficient::Scaled {
        profile: Profile::Bump { amp: 1.0, center: r.random_range(-1.5..1.5), radius: r.random_range(1.0..3.0) },
        matrix: gaussian_matrix(r, n, n) * 0.5,
    };
    Problem::new(p, q, rr).unwrap()
}

/// Independent rotations `θ_i(t) = θ0_i + ω_i t` in the planes
/// `(y_i, w_i)`, mixed by `diag(O, O)`, plus the endpoint-fixed Lagrangian
/// deformation `Z ↦ Z + s(t) J Z S` with `s(a) = s(b) = 0`.
#[derive(Debug, Clone)]
pub struct RotatingFamily {
    pub theta0: Vec<f64>,
    pub omega: Vec<f64>,
    pub o: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub bump: f64,
    pub a: f64,
    pub b: f64,
}

impl RotatingFamily {
    pub fn random(r: &mut ChaCha8Rng, n: usize) -> Self {
        use std::f64::consts::FRAC_PI_2;
        loop {
            let a = r.random_range(-1.0..1.0);
            let b = a + r.random_range(1.0..3.0);
            let theta0: Vec<f64> = (0..n).map(|_| r.random_range(0.0..std::f64::consts::PI)).collect();
            let omega: Vec<f64> = (0..n)
                .map(|_| r.random_range(0.5..3.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            // Keep the ends away from the crossing angles.
            let clear = |th: f64| {
                let x = (th - FRAC_PI_2).rem_euclid(std::f64::consts::PI);
                x > 0.05 && x < std::f64::consts::PI - 0.05
            };
            let ok = (0..n).all(|i| clear(theta0[i] + omega[i] * a) && clear(theta0[i] + omega[i] * b));
            if ok {
                return Self {
                    theta0,
                    omega,
                    o: random_orthogonal(r, n),
                    s: random_symmetric(r, n),
                    bump: 0.0,
                    a,
                    b,
                };
            }
        }
    }

    pub fn n(&self) -> usize {
        self.theta0.len()
    }

    pub fn with_bump(&self, bump: f64) -> Self {
        Self { bump, ..self.clone() }
    }

    pub fn frame(&self, t: f64) -> DMatrix<f64> {
        let n = self.n();
        let mut z = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            let th = self.theta0[i] + self.omega[i] * t;
            z[(i, i)] = th.cos();
            z[(n + i, i)] = th.sin();
        }
        let mut big = DMatrix::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&self.o);
        big.view_mut((n, n), (n, n)).copy_from(&self.o);
        let z = big * z;
        let s = self.bump * (std::f64::consts::PI * (t - self.a) / (self.b - self.a)).sin();
        if s == 0.0 {
            return z;
        }
        let jz = sturm_morse::symplectic::apply_j(&z);
        &z + jz * (&self.s * s)
    }

    /// Signed count of angles `π/2 + kπ` passed, against `V = span(0; I)`.
    pub fn expected_maslov(&self) -> i64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        (0..self.n())
            .map(|i| {
                let (u, v) = (self.theta0[i] + self.omega[i] * self.a, self.theta0[i] + self.omega[i] * self.b);
                let (lo, hi) = (u.min(v), u.max(v));
                let k = ((hi - FRAC_PI_2) / PI).floor() - ((lo - FRAC_PI_2) / PI).floor();
                k as i64 * self.omega[i].signum() as i64
            })
            .sum()
    }
}

/// `span(0; I)`, the reference plane of [`RotatingFamily`].
pub fn momentum_free_plane(n: usize) -> Frame {
    let mut z = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        z[(n + i, i)] = 1.0;
    }
    frame_from_columns(&z, 1e-12).unwrap()
}

/// `Q(t)ᵀ diag(c_i + d_i t) Q(t)` on `[0, 1]` with nondegenerate ends; with
/// `nullity` the diagonal keeps its sign throughout.
pub fn random_matrix_path(r: &mut ChaCha8Rng, k: usize, samples: usize, nullity: bool) -> Vec<DMatrix<f64>> {
    let m0 = gaussian_matrix(r, k, k);
    let m1 = gaussian_matrix(r, k, k);
    let lines: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            let pick = |r: &mut ChaCha8Rng| {
                let x: f64 = r.random_range(0.1..2.0);
                if r.random_bool(0.5) { x } else { -x }
            };
            let c = pick(r);
            let end = if nullity { c.signum() * r.random_range(0.1..2.0) } else { pick(r) };
            (c, end - c)
        })
        .collect();
    (0..samples)
        .map(|j| {
            let t = j as f64 / (samples - 1) as f64;
            let q = (&m0 + &m1 * t + DMatrix::identity(k, k) * 3.0).qr().q();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(k, lines.iter().map(|(c, s)| c + s * t)));
            q.transpose() * d * q
        })
        .collect()
}

pub fn negative_inertia(a: &DMatrix<f64>) -> i64 {
    sturm_morse::symplectic::inertia(a, 1e-9).negative as i64
}

/// Index from the unstable bundle started at `V⁺ · g` on `window`.
pub fn gauge_index(p: &Problem, g: &DMatrix<f64>, cfg: &sturm_morse::MorseConfig, window: (f64, f64)) -> i64 {
    let shifted = p.shifted(cfg.spectral_shift).unwrap();
    let f0 = shifted.asymptotic().unwrap().vp_minus.reparameterize(g).unwrap();
    let path = sturm_morse::flows::propagate_frame(&shifted, &f0, window.0, window.1, &cfg.propagation).unwrap();
    sturm_morse::morse::detect_conjugate_points(&path, &shifted, cfg)
        .unwrap()
        .iter()
        .filter(|c| !c.at_window_end)
        .map(|c| c.multiplicity as i64)
        .sum()
}
