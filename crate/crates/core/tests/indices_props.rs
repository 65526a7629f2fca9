mod common;

use common::*;
use proptest::prelude::*;
use sturm_morse::crossings::{FiniteDifferenceForm, FnCurve, LocatorConfig};
use sturm_morse::indices::{
    discrete_spectral_flow, hormander_routes, maslov_index, triple_index, triple_index_with_witness,
};
use sturm_morse::symplectic::intersection_dim;
use sturm_morse::Frame;

fn witnesses(r: &mut rand_chacha::ChaCha8Rng, n: usize, frames: &[&Frame], count: usize) -> Vec<Frame> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let d = random_frame(r, n);
        // Well-conditioned witnesses only; a nearly tangent one makes the
        // forms ill-conditioned without testing anything new.
        if frames.iter().all(|f| intersection_dim(f, &d, 1e-3) == 0) {
            out.push(d);
        }
    }
    out
}

fn maslov_of(fam: &RotatingFamily, reversed: bool) -> (i64, bool) {
    let n = fam.n();
    let (a, b) = if reversed { (-fam.b, -fam.a) } else { (fam.a, fam.b) };
    let f = fam.clone();
    let curve = FnCurve::new(n, move |t: f64| f.frame(if reversed { -t } else { t }));
    let grid: Vec<f64> = (0..=200).map(|i| a + (b - a) * i as f64 / 200.0).collect();
    let provider = FiniteDifferenceForm { curve: &curve, step: 1e-6 };
    let m = maslov_index(&curve, &grid, &momentum_free_plane(n), &provider, &LocatorConfig::for_span(a, b)).unwrap();
    (m.index, m.consistent() && m.regular)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn triple_index_cancellations(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let (a, b) = (random_frame(&mut r, n), random_frame(&mut r, n));
        prop_assert_eq!(triple_index(&a, &a, &b).unwrap(), 0);
        prop_assert_eq!(triple_index(&a, &b, &b).unwrap(), 0);
    }

    #[test]
    fn triple_index_routes_agree(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let (a, b, k) = (random_frame(&mut r, n), random_frame(&mut r, n), random_frame(&mut r, n));
        let direct = triple_index(&a, &b, &k).unwrap();
        prop_assert!((0..=n as i64).contains(&direct));
        for d in witnesses(&mut r, n, &[&a, &b, &k], 10) {
            prop_assert_eq!(triple_index_with_witness(&a, &b, &k, &d).unwrap(), direct);
        }
    }

    #[test]
    fn triple_index_routes_agree_on_degenerate_triples(seed in any::<u64>(), n in 1usize..=3) {
        // κ = α forces dim(α ∩ κ) = n.
        let mut r = rng(seed);
        let (a, b) = (random_frame(&mut r, n), random_frame(&mut r, n));
        let k = a.reparameterize(&random_invertible(&mut r, n)).unwrap();
        let direct = triple_index(&a, &b, &k).unwrap();
        for d in witnesses(&mut r, n, &[&a, &b, &k], 10) {
            prop_assert_eq!(triple_index_with_witness(&a, &b, &k, &d).unwrap(), direct);
        }
    }

    #[test]
    fn hormander_routes_agree(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let f: Vec<Frame> = (0..4).map(|_| random_frame(&mut r, n)).collect();
        let routes = hormander_routes(&f[0], &f[1], &f[2], &f[3]).unwrap();
        prop_assert!(routes.consistent(), "{:?}", routes);
        prop_assert_eq!(hormander_routes(&f[0], &f[0], &f[2], &f[3]).unwrap().first, 0);
        prop_assert_eq!(hormander_routes(&f[0], &f[1], &f[2], &f[2]).unwrap().first, 0);
    }

    #[test]
    fn spectral_flow_telescopes(seed in any::<u64>(), k in 1usize..=4) {
        let mut r = rng(seed);
        let path = random_matrix_path(&mut r, k, 40, false);
        let sf = discrete_spectral_flow(&path, 1e-9).unwrap();
        prop_assert_eq!(sf, negative_inertia(&path[0]) - negative_inertia(&path[39]));
    }

    #[test]
    fn spectral_flow_nullity(seed in any::<u64>(), k in 1usize..=4) {
        let mut r = rng(seed);
        let path = random_matrix_path(&mut r, k, 40, true);
        prop_assert_eq!(discrete_spectral_flow(&path, 1e-9).unwrap(), 0);
    }

    #[test]
    fn spectral_flow_is_additive(seed in any::<u64>(), k in 1usize..=4, cut in 5usize..35) {
        let mut r = rng(seed);
        let path = random_matrix_path(&mut r, k, 40, false);
        prop_assume!(sturm_morse::symplectic::inertia(&path[cut], 1e-9).zero == 0);
        let whole = discrete_spectral_flow(&path, 1e-9).unwrap();
        let left = discrete_spectral_flow(&path[..=cut], 1e-9).unwrap();
        let right = discrete_spectral_flow(&path[cut..], 1e-9).unwrap();
        prop_assert_eq!(whole, left + right);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rotating_family_maslov_and_reversal(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let fam = RotatingFamily::random(&mut r, n);
        let (mu, ok) = maslov_of(&fam, false);
        prop_assert!(ok);
        prop_assert_eq!(mu, fam.expected_maslov());
        let (back, ok) = maslov_of(&fam, true);
        prop_assert!(ok);
        prop_assert_eq!(back, -mu);
    }

    #[test]
    fn maslov_is_a_homotopy_invariant_rel_ends(seed in any::<u64>(), n in 1usize..=3, bump in -0.4f64..0.4) {
        let mut r = rng(seed);
        let fam = RotatingFamily::random(&mut r, n);
        let (mu, _) = maslov_of(&fam, false);
        let (bent, ok) = maslov_of(&fam.with_bump(bump), false);
        prop_assert!(ok);
        prop_assert_eq!(bent, mu);
    }
}

#[test]
fn perturbed_frames_stay_lagrangian() {
    let mut r = rng(7);
    let fam = RotatingFamily::random(&mut r, 3).with_bump(0.4);
    for i in 0..=20 {
        let t = fam.a + (fam.b - fam.a) * i as f64 / 20.0;
        assert!(sturm_morse::symplectic::frame_from_columns(&fam.frame(t), 1e-12).is_ok());
    }
}
