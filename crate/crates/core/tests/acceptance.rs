//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;
use sturm_morse::crossings::{FiniteDifferenceForm, FnCurve, LocatorConfig};
use sturm_morse::error::Error;
use sturm_morse::indices::{
    discrete_spectral_flow, hormander_routes, maslov_index, triple_index, triple_index_with_witness,
};
use sturm_morse::oracle::wave_matrices;
use sturm_morse::symplectic::intersection_dim;
use sturm_morse::waves::{
    instability_verdict, solve_front, weighted_problem, BvpConfig, ReactionSystem, Verdict, WaveConfig,
};
use sturm_morse::{morse_index, DiscretizationConfig, MorseConfig, Problem, PropagationConfig, WaveProfile};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const BATTERY: [(u32, f64, i64); 4] = [(2, 2.0, 1), (2, 0.5, 2), (3, 1.5, 2), (3, 0.5, 3)];

fn criterion_1() -> Outcome {
    let cfg = MorseConfig { oracle: Some(DiscretizationConfig::default()), ..MorseConfig::default() };
    let mut rows = Vec::new();
    for (m, kappa, want) in BATTERY {
        ensure(poschl_teller_index(m, kappa) == want, || "closed form disagrees with the table".into())?;
        let r = morse_index(&poschl_teller_problem(m, kappa), &cfg).map_err(err)?;
        let oracle = r.oracle_crosscheck.unwrap_or(-1);
        ensure(r.index == want && r.maslov_crosscheck == want && oracle == want, || {
            format!("m={m} κ={kappa}: A={} B={} C={oracle}, want {want}", r.index, r.maslov_crosscheck)
        })?;
        rows.push(format!("({m},{kappa})→{want}"));
    }
    Ok(format!("routes A/B/C agree: {}", rows.join(" ")))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cfg = MorseConfig { oracle: Some(DiscretizationConfig::default()), ..MorseConfig::default() };
    let mut summary = Vec::new();
    for n in [1usize, 2] {
        let mut r = rng(1000 + n as u64);
        let (mut accepted, mut rejected, mut total_index) = (0, 0, 0);
        while accepted < 50 {
            let p = random_problem(&mut r, n);
            let v = sturm_morse::sturm::validate(&p, &sturm_morse::sturm::default_probe_grid());
            ensure(v.passed(), || format!("generated problem fails validation: {v:?}"))?;
            let res = match morse_index(&p, &cfg) {
                Ok(res) => res,
                Err(Error::UnstableCount { .. }) => {
                    rejected += 1;
                    ensure(rejected <= 5, || "too many problems with an eigenvalue near zero".into())?;
                    continue;
                }
                Err(e) => return Err(format!("n={n} problem {accepted}: {e}")),
            };
            ensure(res.consistent() && res.oracle_crosscheck.is_some(), || {
                format!(
                    "n={n} problem {accepted}: Σdim={} μ={} oracle={:?}",
                    res.index, res.maslov_crosscheck, res.oracle_crosscheck
                )
            })?;
            ensure(res.all_forms_positive(), || format!("n={n} problem {accepted}: indefinite crossing form"))?;
            total_index += res.index;
            accepted += 1;
        }
        summary.push(format!("n={n}: 50 problems, Σ index {total_index}, {rejected} near-zero rejected"));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{} in {secs:.1} s", summary.join("; ")))
}

fn criterion_3() -> Outcome {
    let mut r = rng(3000);
    let cfg = MorseConfig::default();
    let mut sums = Vec::new();
    for k in 0..20 {
        let n1 = r.random_range(1..=2);
        let (p1, p2) = (random_problem(&mut r, n1), random_problem(&mut r, 1));
        let i1 = morse_index(&p1, &cfg).map_err(err)?.index;
        let i2 = morse_index(&p2, &cfg).map_err(err)?.index;
        let sum = morse_index(&p1.direct_sum(&p2).map_err(err)?, &cfg).map_err(err)?.index;
        ensure(sum == i1 + i2, || format!("pair {k}: {sum} != {i1} + {i2}"))?;
        sums.push(sum);
    }
    Ok(format!("20 pairs additive, indices {:?}", sums))
}

fn rotating_maslov(fam: &RotatingFamily, reversed: bool) -> Result<i64, String> {
    let n = fam.n();
    let (a, b) = if reversed { (-fam.b, -fam.a) } else { (fam.a, fam.b) };
    let f = fam.clone();
    let curve = FnCurve::new(n, move |t: f64| f.frame(if reversed { -t } else { t }));
    let grid: Vec<f64> = (0..=200).map(|i| a + (b - a) * i as f64 / 200.0).collect();
    let provider = FiniteDifferenceForm { curve: &curve, step: 1e-6 };
    let m = maslov_index(&curve, &grid, &momentum_free_plane(n), &provider, &LocatorConfig::for_span(a, b))
        .map_err(err)?;
    ensure(m.consistent(), || "crossing-form sum disagrees with winding".into())?;
    Ok(m.index)
}

fn criterion_4() -> Outcome {
    let mut checks = 0usize;
    for n in 1..=3usize {
        let mut r = rng(4000 + n as u64);
        for t in 0..100 {
            let ctx = |what: &str| format!("n={n} tuple {t}: {what}");
            let (a, b, k) = (random_frame(&mut r, n), random_frame(&mut r, n), random_frame(&mut r, n));
            ensure(triple_index(&a, &a, &k).map_err(err)? == 0, || ctx("ι(α,α,κ) ≠ 0"))?;
            ensure(triple_index(&a, &b, &b).map_err(err)? == 0, || ctx("ι(α,β,β) ≠ 0"))?;
            let direct = triple_index(&a, &b, &k).map_err(err)?;
            let mut found = 0;
            while found < 10 {
                let d = random_frame(&mut r, n);
                if [&a, &b, &k].iter().any(|f| intersection_dim(f, &d, 1e-3) > 0) {
                    continue;
                }
                let w = triple_index_with_witness(&a, &b, &k, &d).map_err(err)?;
                ensure(w == direct, || ctx(&format!("witness route {w} vs {direct}")))?;
                found += 1;
            }
            let l2 = random_frame(&mut r, n);
            let h = hormander_routes(&a, &l2, &b, &k).map_err(err)?;
            ensure(h.consistent(), || ctx(&format!("Hörmander routes {h:?}")))?;

            let fam = RotatingFamily::random(&mut r, n);
            let mu = rotating_maslov(&fam, false)?;
            ensure(mu == fam.expected_maslov(), || ctx(&format!("μ {mu} vs {}", fam.expected_maslov())))?;
            ensure(rotating_maslov(&fam, true)? == -mu, || ctx("reversal"))?;

            let path = random_matrix_path(&mut r, n + 1, 40, false);
            let sf = discrete_spectral_flow(&path, 1e-9).map_err(err)?;
            ensure(sf == negative_inertia(&path[0]) - negative_inertia(&path[39]), || ctx("telescoping"))?;
            let cut = r.random_range(5..35);
            if sturm_morse::symplectic::inertia(&path[cut], 1e-9).zero == 0 {
                let parts = discrete_spectral_flow(&path[..=cut], 1e-9).map_err(err)?
                    + discrete_spectral_flow(&path[cut..], 1e-9).map_err(err)?;
                ensure(parts == sf, || ctx("additivity"))?;
            }
            let flat = random_matrix_path(&mut r, n + 1, 40, true);
            ensure(discrete_spectral_flow(&flat, 1e-9).map_err(err)? == 0, || ctx("nullity"))?;
            checks += 1;
        }
    }
    Ok(format!("{checks} tuples (100 per n = 1, 2, 3), all identities exact"))
}

struct Pulse {
    sys: ReactionSystem<f64>,
    profile: WaveProfile,
}

fn pulse() -> Result<Pulse, String> {
    let sys = ReactionSystem::Quadratic;
    let zero = DVector::from_element(1, 0.0);
    let profile = solve_front(&sys, 0.0, &zero, &zero, &BvpConfig::pulse(vec![1.2], 2.0)).map_err(err)?;
    let exact = WaveProfile::quadratic_pulse(profile.grid.clone());
    let gap = profile.w.iter().zip(&exact.w).fold(0.0f64, |m, (x, y)| m.max((x - y).amax()));
    ensure(gap < 1e-6, || format!("pulse profile off the closed form by {gap:e}"))?;
    Ok(Pulse { sys, profile })
}

fn criterion_5() -> Outcome {
    let Pulse { sys, profile } = pulse()?;
    let an = instability_verdict(&sys, &profile, &WaveConfig::default()).map_err(err)?;
    ensure(an.verdict == Verdict::SpectrallyUnstable, || format!("verdict {}", an.verdict))?;
    ensure(an.critical_points.len() == 1, || format!("critical points {:?}", an.critical_points))?;
    let index = an.morse.as_ref().map(|m| m.index).unwrap_or(-1);
    ensure(index == 1, || format!("iMor(𝕃) = {index}"))?;
    let oracle = an.oracle.as_ref().ok_or("oracle not run")?;
    let lam = oracle.smallest[0];
    ensure((lam + 1.25).abs() < 1e-3, || format!("smallest eigenvalue {lam}"))?;
    let top = an.l_top_eigenvalue.ok_or("no L eigenvalue")?;
    ensure((top - 1.25).abs() < 1e-3, || format!("L eigenvalue {top}"))?;
    Ok(format!(
        "unstable, 1 critical point at {:.1e}, iMor(𝕃)=1, λ_min(𝕃)={lam:.6}, λ_max(L)={top:.6}",
        an.critical_points[0]
    ))
}

fn nagumo() -> Result<(ReactionSystem<f64>, WaveProfile), String> {
    let sys = ReactionSystem::Nagumo { a: 0.25 };
    let (one, zero) = (DVector::from_element(1, 1.0), DVector::from_element(1, 0.0));
    let p = solve_front(&sys, 0.3, &one, &zero, &BvpConfig::default()).map_err(err)?;
    Ok((sys, p))
}

fn criterion_6() -> Outcome {
    let (sys, p) = nagumo()?;
    let c_err = (p.c - 2f64.sqrt() * 0.25).abs();
    ensure(c_err < 1e-6, || format!("speed error {c_err:e}"))?;
    let exact = WaveProfile::nagumo_front(0.25, p.grid.clone());
    let gap = p.w.iter().zip(&exact.w).fold(0.0f64, |m, (x, y)| m.max((x - y).amax()));
    ensure(gap < 1e-6, || format!("profile error {gap:e}"))?;
    let an = instability_verdict(&sys, &p, &WaveConfig::default()).map_err(err)?;
    ensure(an.critical_points.is_empty(), || format!("critical points {:?}", an.critical_points))?;
    let index = an.morse.as_ref().map(|m| m.index).unwrap_or(-1);
    ensure(index == 0, || format!("iMor(𝕃) = {index}"))?;
    let o = an.oracle.as_ref().ok_or("oracle not run")?;
    ensure(o.negative_count == 0, || format!("{} eigenvalues below -1e-6", o.negative_count))?;
    ensure(o.smallest[0].abs() < 1e-4, || format!("ground state {}", o.smallest[0]))?;
    Ok(format!(
        "c={:.12} (err {c_err:.1e}), profile err {gap:.1e}, iMor(𝕃)=0, ground state {:.2e}",
        p.c, o.smallest[0]
    ))
}

fn criterion_7() -> Outcome {
    let (sys, p) = nagumo()?;
    let m = 2000;
    let t_o = 30.0;
    let h = 2.0 * t_o / (m + 1) as f64;
    let nodes: Vec<f64> = (1..=m).map(|i| -t_o + h * i as f64).collect();
    let weighted = weighted_problem(&sys, &p).map_err(err)?;
    // B = ∇²F(w) = c²/4 - R_𝕃.
    let b: Vec<DMatrix<f64>> = nodes
        .iter()
        .map(|&x| DMatrix::from_element(1, 1, p.c * p.c / 4.0) - weighted.r().eval(x))
        .collect();
    let w = wave_matrices(p.c, nodes, &b).map_err(err)?;
    let res = w.weighted_identity_residual();
    ensure(res < 1e-8, || format!("relative residual {res:e}"))?;
    Ok(format!("D(-L_h)D⁻¹ = 𝕃_h on interior rows to {res:.1e} (c = {:.6}, {m} nodes)", p.c))
}

/// Index under each perturbation of the numerical setup.
fn robust_indices(p: &Problem, base: &MorseConfig, seed: u64) -> Result<Vec<(&'static str, i64)>, String> {
    let r0 = morse_index(p, base).map_err(err)?;
    let (tn, tp) = r0.truncation;
    let mut out = vec![("base", r0.index)];
    let doubled = MorseConfig {
        propagation: PropagationConfig { t_min: 2.0 * tn.abs().max(tp), ..base.propagation },
        ..*base
    };
    out.push(("T doubled", morse_index(p, &doubled).map_err(err)?.index));
    let tight = MorseConfig {
        propagation: PropagationConfig { trunc_eps: base.propagation.trunc_eps / 100.0, ..base.propagation },
        ..*base
    };
    out.push(("ε_B/100", morse_index(p, &tight).map_err(err)?.index));
    let plateau = morse_index(p, &MorseConfig { plateau: true, ..*base }).map_err(err)?;
    out.push(("plateau", plateau.plateau_index.unwrap_or(-1)));
    let halved = MorseConfig {
        propagation: PropagationConfig { sample_dt: base.propagation.sample_dt / 2.0, ..base.propagation },
        ..*base
    };
    out.push(("sample_dt/2", morse_index(p, &halved).map_err(err)?.index));
    let mut r = rng(seed);
    for _ in 0..3 {
        let g = random_invertible(&mut r, p.n());
        out.push(("gauge", gauge_index(p, &g, base, (tn, tp))));
    }
    Ok(out)
}

fn criterion_8() -> Outcome {
    let mut changes = Vec::new();
    let mut runs = 0;
    let mut check = |label: String, got: Vec<(&'static str, i64)>, want: i64| {
        for (what, idx) in got {
            runs += 1;
            if idx != want {
                changes.push(format!("{label} {what}: {idx} != {want}"));
            }
        }
    };
    for (k, (m, kappa, want)) in BATTERY.into_iter().enumerate() {
        let got = robust_indices(&poschl_teller_problem(m, kappa), &MorseConfig::default(), 8000 + k as u64)?;
        check(format!("PT({m},{kappa})"), got, want);
    }
    let Pulse { sys, profile } = pulse()?;
    let weighted = weighted_problem(&sys, &profile).map_err(err)?;
    let wave_cfg = WaveConfig::default().morse.expect("default wave config runs the Morse count");
    check("pulse".into(), robust_indices(&weighted, &wave_cfg, 8100)?, 1);
    ensure(changes.is_empty(), || changes.join("; "))?;
    Ok(format!("{runs} perturbed runs (T doubling, ε_B/100, plateau, sample_dt/2, 3 gauges), no index change"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("Pöschl–Teller battery", criterion_1),
        ("randomized conjugate-point equality", criterion_2),
        ("direct-sum additivity", criterion_3),
        ("index-calculus identities", criterion_4),
        ("pulse instability", criterion_5),
        ("Nagumo front", criterion_6),
        ("discrete weighted identity", criterion_7),
        ("robustness and plateau", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {} {name} [{secs:.1} s]: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {} {name} [{secs:.1} s]: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
