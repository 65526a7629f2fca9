mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use sturm_morse::flows::{advance, unstable_path};
use sturm_morse::symplectic::{dirichlet_plane, frame_from_columns, gap_distance, intersection_dim, INTERSECTION_TOL};
use sturm_morse::{Frame, PropagationConfig};

fn interleave(a: &Frame, b: &Frame) -> Frame {
    let (n1, n2) = (a.n(), b.n());
    let n = n1 + n2;
    let mut z = DMatrix::zeros(2 * n, n);
    z.view_mut((0, 0), (n1, n1)).copy_from(&a.top());
    z.view_mut((n, 0), (n1, n1)).copy_from(&a.bottom());
    z.view_mut((n1, n1), (n2, n2)).copy_from(&b.top());
    z.view_mut((n + n1, n1), (n2, n2)).copy_from(&b.bottom());
    frame_from_columns(&z, 1e-10).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_matches_block_formula(seed in any::<u64>(), n in 1usize..=3, t in -6.0f64..6.0) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let (pp, q, rr) = p.coefficients_at(t);
        let pinv = pp.clone().try_inverse().unwrap();
        let mut want = DMatrix::zeros(2 * n, 2 * n);
        want.view_mut((0, 0), (n, n)).copy_from(&pinv);
        want.view_mut((0, n), (n, n)).copy_from(&(-&pinv * &q));
        want.view_mut((n, 0), (n, n)).copy_from(&(-q.transpose() * &pinv));
        want.view_mut((n, n), (n, n)).copy_from(&(q.transpose() * &pinv * &q - &rr));
        let b = p.hamiltonian_at(t).unwrap();
        prop_assert_eq!(&b, &b.transpose());
        prop_assert!((&b - &want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn asymptotic_frames_are_lagrangian_and_transversal(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let a = p.asymptotic().unwrap();
        prop_assert!(a.spectral_gap > 0.0);
        let d = dirichlet_plane::<f64>(n);
        for f in [&a.vp_minus, &a.vm_minus, &a.vp_plus, &a.vm_plus] {
            prop_assert_eq!(f.n(), n);
            prop_assert!(f.isotropy_residual() < 1e-10);
            prop_assert_eq!(intersection_dim(f, &d, INTERSECTION_TOL), 0);
        }
    }

    #[test]
    fn direct_sums_split_blockwise(seed in any::<u64>(), n1 in 1usize..=2, n2 in 1usize..=2) {
        let mut r = rng(seed);
        let (p1, p2) = (random_problem(&mut r, n1), random_problem(&mut r, n2));
        let sum = p1.direct_sum(&p2).unwrap();
        let (a1, a2, a) = (p1.asymptotic().unwrap(), p2.asymptotic().unwrap(), sum.asymptotic().unwrap());
        prop_assert!(gap_distance(&a.vp_minus, &interleave(&a1.vp_minus, &a2.vp_minus)) < 1e-8);
        prop_assert!(gap_distance(&a.vm_plus, &interleave(&a1.vm_plus, &a2.vm_plus)) < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn propagation_is_gauge_invariant(seed in any::<u64>(), n in 1usize..=2) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let cfg = PropagationConfig::default();
        let f0 = p.asymptotic().unwrap().vp_minus.clone();
        let g = random_invertible(&mut r, n);
        let f1 = f0.reparameterize(&g).unwrap();
        let t0 = -10.0;
        for k in 1..=5 {
            let t = t0 + 4.0 * k as f64;
            let a = advance(&p, &f0, t0, t, &cfg).unwrap();
            let b = advance(&p, &f1, t0, t, &cfg).unwrap();
            prop_assert!(gap_distance(&a, &b) < 1e-8, "t = {t}: {}", gap_distance(&a, &b));
        }
    }

    #[test]
    fn propagation_round_trip(seed in any::<u64>(), n in 1usize..=2) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let cfg = PropagationConfig::default();
        let f0 = random_frame(&mut r, n);
        let (t0, t1) = (r.random_range(-3.0..0.0), r.random_range(0.5..3.0));
        let there = advance(&p, &f0, t0, t1, &cfg).unwrap();
        let back = advance(&p, &there, t1, t0, &cfg).unwrap();
        prop_assert!(gap_distance(&back, &f0) < 1e-6);
    }

    #[test]
    fn unstable_paths_stay_isotropic(seed in any::<u64>(), n in 1usize..=2) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let path = unstable_path(&p, &PropagationConfig::default()).unwrap();
        prop_assert!(path.max_isotropy_residual() < 1e-8);
        prop_assert!(path.grid.windows(2).all(|w| w[0] < w[1]));
    }
}
