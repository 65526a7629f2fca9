//! `sturm-morse` command-line front end.
//!
//! Exit codes: 0 success, 1 input or runtime error, 2 hypothesis
//! failure, 3 plateau or oracle disagreement, 4 spectrally unstable wave.

mod output;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use output::{num, Csv, OutputDir};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use sturm_morse::crossings::{FiniteDifferenceForm, LocatorConfig, SampledCurve};
use sturm_morse::indices::{common_transversal, hormander_routes, maslov_index, triple_index, triple_index_with_witness};
use sturm_morse::io::{FramesFile, ProblemSpec, ProfileSource, SystemFile};
use sturm_morse::morse::{diagnostics, MorseConfig};
use sturm_morse::oracle::{negative_count, rough_spectrum};
use sturm_morse::sturm::{default_probe_grid, validate};
use sturm_morse::symplectic::dirichlet_plane;
use sturm_morse::waves::{self, instability_verdict, solve_front, BvpConfig, Verdict, WaveConfig};
use sturm_morse::{DiscretizationConfig, Error, Frame, Problem, PropagationConfig, WaveProfile};

const EXIT_OK: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_HYPOTHESIS: i32 = 2;
const EXIT_VERIFICATION: i32 = 3;
const EXIT_UNSTABLE: i32 = 4;

#[derive(Parser)]
#[command(name = "sturm-morse", version, about = "Morse indices of Sturm–Liouville operators on the line")]
struct Cli {
    /// JSON file overriding numerical settings field by field.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing hypotheses on a problem file.
    Validate {
        problem: PathBuf,
    },
    /// Morse index by conjugate points.
    Morse {
        problem: PathBuf,
        /// Cross-check with the finite element count.
        #[arg(long)]
        oracle: bool,
        /// Recompute with a doubled window and a tighter truncation threshold.
        #[arg(long)]
        plateau: bool,
        /// Spectral shift added to R.
        #[arg(long, default_value_t = 0.0)]
        shift: f64,
        /// Directory for CSV outputs and the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Adds an offset to the oracle count (test harness).
        #[arg(long, hide = true, allow_hyphen_values = true)]
        inject_oracle_offset: Option<i64>,
    },
    /// Triple, Hörmander or Maslov index of frames in a file.
    Indices {
        frames: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// Finite element negative count.
    Oracle {
        problem: PathBuf,
        /// Also report the k smallest eigenvalues.
        #[arg(long)]
        eigenvalues: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Traveling-wave tools.
    Wave {
        #[command(subcommand)]
        action: WaveAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Triple,
    Hormander,
    Maslov,
}

#[derive(Subcommand)]
enum WaveAction {
    /// Compute the profile.
    Front {
        system: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical points, verdict and Morse count of the weighted operator.
    Analyze {
        system: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_morse: bool,
        #[arg(long)]
        no_oracle: bool,
    },
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct ConfigFile {
    propagation: PropagationConfig,
    oracle: DiscretizationConfig,
    bvp: Option<BvpConfig>,
    wave: Option<WaveConfig>,
}

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code_for(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::HypothesisViolation(_) | Error::NotEquilibrium { .. } | Error::NotHyperbolic { .. }) => EXIT_HYPOTHESIS,
        Some(Error::PlateauFailure { .. } | Error::OracleMismatch { .. }) => EXIT_VERIFICATION,
        _ => EXIT_ERROR,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let value = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    Ok((value, bytes))
}

fn run(cli: Cli) -> Result<i32> {
    let conf: ConfigFile = match &cli.config {
        Some(p) => read_json(p)?.0,
        None => ConfigFile::default(),
    };
    conf.propagation.validate()?;
    conf.oracle.validate()?;
    match cli.command {
        Command::Validate { problem } => cmd_validate(&problem),
        Command::Morse { problem, oracle, plateau, shift, out, inject_oracle_offset } => {
            let cfg = MorseConfig {
                propagation: conf.propagation,
                oracle: oracle.then_some(conf.oracle),
                plateau,
                spectral_shift: shift,
                ..MorseConfig::default()
            };
            cmd_morse(&problem, &cfg, out, inject_oracle_offset)
        }
        Command::Indices { frames, which } => cmd_indices(&frames, which),
        Command::Oracle { problem, eigenvalues, out } => cmd_oracle(&problem, &conf.oracle, eigenvalues, out),
        Command::Wave { action } => match action {
            WaveAction::Front { system, out } => cmd_wave_front(&system, &conf, out),
            WaveAction::Analyze { system, out, no_morse, no_oracle } => {
                cmd_wave_analyze(&system, &conf, out, no_morse, no_oracle)
            }
        },
    }
}

fn load_problem(path: &Path) -> Result<(Problem, Vec<u8>)> {
    let (spec, bytes): (ProblemSpec, _) = read_json(path)?;
    let p = spec.build().with_context(|| format!("building the problem in {}", path.display()))?;
    Ok((p, bytes))
}

fn cmd_validate(path: &Path) -> Result<i32> {
    let (p, _) = load_problem(path)?;
    let report = validate(&p, &default_probe_grid());
    println!("n {}", p.n());
    println!("C1 (min σ_min P) {}", num(report.c1));
    println!("C2 (max |Q|) {}", num(report.c2));
    println!("C3 (max |R|) {}", num(report.c3));
    println!("(L2) at -inf {}", report.l2_minus_ok);
    println!("(L2) at +inf {}", report.l2_plus_ok);
    println!("hyperbolic {}", report.hyperbolic);
    if let Some(g) = report.spectral_gap {
        println!("spectral gap {}", num(g));
    }
    println!("symmetric {}", report.symmetric);
    for n in &report.notes {
        println!("note: {n}");
    }
    println!("{}", if report.passed() { "PASS" } else { "FAIL" });
    println!("{}", serde_json::to_string(&report)?);
    Ok(if report.passed() { EXIT_OK } else { EXIT_HYPOTHESIS })
}

fn cmd_morse(path: &Path, cfg: &MorseConfig, out: Option<PathBuf>, inject: Option<i64>) -> Result<i32> {
    let (p, bytes) = load_problem(path)?;
    let mut r = sturm_morse::morse_index(&p, cfg)?;
    if let (Some(off), Some(o)) = (inject, r.oracle_crosscheck.as_mut()) {
        *o += off;
    }
    println!("index {}", r.index);
    println!("maslov crosscheck {}", r.maslov_crosscheck);
    println!("winding {}", r.winding);
    if let (Some(o), Some(oc)) = (r.oracle_crosscheck, &r.oracle) {
        let levels: Vec<String> = oc.levels.iter().map(|l| l.to_string()).collect();
        println!("oracle {o} (levels {})", levels.join(","));
    }
    println!("truncation {} {}", num(r.truncation.0), num(r.truncation.1));
    if let Some(pi) = r.plateau_index {
        println!("plateau index {pi}");
    }
    println!("all crossing forms positive {}", r.all_forms_positive());
    println!("crossings {}", r.crossings.len());
    println!("  tau multiplicity positive zero negative width");
    for c in &r.crossings {
        println!(
            "  {} {} {} {} {} {}",
            num(c.tau),
            c.multiplicity,
            c.form_inertia.positive,
            c.form_inertia.zero,
            c.form_inertia.negative,
            num(c.width)
        );
    }

    let mut dir = OutputDir::new(out)?;
    let mut cross = Csv::new(&["tau", "multiplicity", "form_positive", "form_zero", "form_negative", "width", "jump", "sigma_min"]);
    for c in &r.crossings {
        cross.row([
            num(c.tau),
            c.multiplicity.to_string(),
            c.form_inertia.positive.to_string(),
            c.form_inertia.zero.to_string(),
            c.form_inertia.negative.to_string(),
            num(c.width),
            c.jump.to_string(),
            num(c.sigma_min),
        ]);
    }
    dir.write("crossings.csv", &cross)?;
    let mut diag = Csv::new(&["tau", "sigma_min", "det", "crossing_flag"]);
    for d in diagnostics(&r.path, &r.crossings) {
        diag.row([num(d.tau), num(d.sigma_min), num(d.det), u8::from(d.crossing_flag).to_string()]);
    }
    dir.write("diagnostics.csv", &diag)?;
    dir.write("frames.csv", &frames_csv(&r.path))?;
    dir.finish("morse", path, &bytes, serde_json::to_value(cfg)?)?;

    match r.verified() {
        Ok(_) => Ok(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            Ok(EXIT_VERIFICATION)
        }
    }
}

/// `τ`, frame entries row-major, `σ_min` of the position block.
fn frames_csv(path: &sturm_morse::FramePath) -> Csv {
    let n = path.frames.first().map(|f| f.n()).unwrap_or(0);
    let mut header = vec!["tau".to_string()];
    for i in 0..2 * n {
        for j in 0..n {
            header.push(format!("z{i}_{j}"));
        }
    }
    header.push("sigma_min".into());
    let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new(&refs);
    for (t, f) in path.grid.iter().zip(&path.frames) {
        let z = f.columns();
        let mut row = vec![num(*t)];
        for i in 0..2 * n {
            for j in 0..n {
                row.push(num(z[(i, j)]));
            }
        }
        row.push(num(sturm_morse::linalg::singular_values_ascending(&f.bottom())[0]));
        csv.row(row);
    }
    csv
}

fn cmd_indices(path: &Path, which: Which) -> Result<i32> {
    let (file, _): (FramesFile, _) = read_json(path)?;
    match which {
        Which::Triple => {
            let (a, b, k): (Frame, Frame, Frame) = (file.frame("alpha")?, file.frame("beta")?, file.frame("kappa")?);
            let first = triple_index(&a, &b, &k)?;
            let delta = common_transversal(&[&a, &b, &k]);
            let second = triple_index_with_witness(&a, &b, &k, &delta)?;
            println!("triple {first}");
            println!("witness route {second}");
            println!("consistent {}", first == second);
        }
        Which::Hormander => {
            let l1: Frame = file.frame("lambda1")?;
            let l2: Frame = file.frame("lambda2")?;
            let k1: Frame = file.frame("kappa1")?;
            let k2: Frame = file.frame("kappa2")?;
            let r = hormander_routes(&l1, &l2, &k1, &k2)?;
            println!("hormander {}", r.first);
            println!("second route {}", r.second);
            println!("consistent {}", r.consistent());
        }
        Which::Maslov => {
            if file.path.len() < 3 {
                bail!("a Maslov computation needs at least three path samples");
            }
            let mut samples = Vec::with_capacity(file.path.len());
            for s in &file.path {
                samples.push((s.t, file.parse_frame::<f64>(&s.frame)?));
            }
            let reference: Frame = match &file.reference {
                Some(rows) => file.parse_frame(rows)?,
                None => dirichlet_plane(file.n),
            };
            let curve = SampledCurve::new(samples)?;
            let grid = curve.times().to_vec();
            let (a, b) = (grid[0], grid[grid.len() - 1]);
            let step = 1e-5 * (b - a).abs();
            let r = maslov_index(&curve, &grid, &reference, &FiniteDifferenceForm { curve: &curve, step }, &LocatorConfig::for_span(a, b))?;
            println!("maslov {}", r.index);
            println!("winding {}", r.winding);
            println!("regular {}", r.regular);
            println!("consistent {}", r.consistent());
            for c in &r.crossings {
                println!("  crossing {} {:?} contribution {}", num(c.location), c.placement, c.contribution);
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_oracle(path: &Path, cfg: &DiscretizationConfig, eigenvalues: Option<usize>, out: Option<PathBuf>) -> Result<i32> {
    let (p, bytes) = load_problem(path)?;
    let c = negative_count(&p, cfg)?;
    println!("count {}", c.count);
    let levels: Vec<String> = c.levels.iter().zip(&c.nodes).map(|(l, n)| format!("{n}:{l}")).collect();
    println!("levels {}", levels.join(" "));
    let mut dir = OutputDir::new(out)?;
    if let Some(k) = eigenvalues {
        let ev = rough_spectrum(&p, cfg, k)?;
        let mut csv = Csv::new(&["k", "eigenvalue"]);
        for (i, v) in ev.iter().enumerate() {
            csv.row([i.to_string(), num(*v)]);
        }
        print!("{}", csv.as_str());
        dir.write("eigenvalues.csv", &csv)?;
    }
    dir.finish("oracle", path, &bytes, serde_json::to_value(cfg)?)?;
    Ok(EXIT_OK)
}

fn load_profile(file: &SystemFile, conf: &ConfigFile) -> Result<(sturm_morse::ReactionSystem, WaveProfile)> {
    let sys = file.system.build()?;
    let um = nalgebra::DVector::from_vec(file.u_minus.clone());
    let up = nalgebra::DVector::from_vec(file.u_plus.clone());
    if !waves::check_h(&sys, &um, &up)? {
        return Err(Error::HypothesisViolation("∇²F(u±) must be negative definite".into()).into());
    }
    let bvp = conf.bvp.clone().unwrap_or_else(|| file.bvp.clone());
    let profile = match file.profile {
        ProfileSource::Solve => solve_front(&sys, file.c, &um, &up, &bvp)?,
        ProfileSource::NagumoFront => match file.system {
            sturm_morse::io::SystemSpec::Nagumo { a } => WaveProfile::nagumo_front(a, waves::default_profile_grid()),
            _ => bail!("the nagumo_front profile needs the nagumo preset"),
        },
        ProfileSource::QuadraticPulse => match file.system {
            sturm_morse::io::SystemSpec::Quadratic => WaveProfile::quadratic_pulse(waves::default_profile_grid()),
            _ => bail!("the quadratic_pulse profile needs the quadratic preset"),
        },
    };
    Ok((sys, profile))
}

fn profile_csv(p: &WaveProfile) -> Csv {
    let n = p.n();
    let mut header = vec!["xi".to_string()];
    header.extend((0..n).map(|k| format!("w{k}")));
    header.extend((0..n).map(|k| format!("w_prime{k}")));
    let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new(&refs);
    for i in 0..p.grid.len() {
        let mut row = vec![num(p.grid[i])];
        row.extend(p.w[i].iter().map(|v| num(*v)));
        row.extend(p.w_prime[i].iter().map(|v| num(*v)));
        csv.row(row);
    }
    csv
}

fn cmd_wave_front(path: &Path, conf: &ConfigFile, out: Option<PathBuf>) -> Result<i32> {
    let (file, bytes): (SystemFile, _) = read_json(path)?;
    let (sys, profile) = load_profile(&file, conf)?;
    println!("speed {}", num(profile.c));
    println!("residual {}", num(profile.residual(&sys)));
    if let Some(r) = profile.bvp_residual {
        println!("collocation residual {}", num(r));
    }
    let mut dir = OutputDir::new(out)?;
    dir.write("profile.csv", &profile_csv(&profile))?;
    dir.finish("wave front", path, &bytes, serde_json::to_value(conf.bvp.clone().unwrap_or(file.bvp))?)?;
    Ok(EXIT_OK)
}

fn cmd_wave_analyze(path: &Path, conf: &ConfigFile, out: Option<PathBuf>, no_morse: bool, no_oracle: bool) -> Result<i32> {
    let (file, bytes): (SystemFile, _) = read_json(path)?;
    let (sys, profile) = load_profile(&file, conf)?;
    let mut cfg = conf.wave.clone().unwrap_or_else(|| file.analysis.clone());
    if no_morse {
        cfg.morse = None;
    }
    if no_oracle {
        cfg.oracle = None;
    }
    let a = instability_verdict(&sys, &profile, &cfg)?;
    println!("verdict {}", a.verdict);
    println!("speed {}", num(profile.c));
    println!("critical points {}", a.critical_points.len());
    for x in &a.critical_points {
        println!("  xi {}", num(*x));
    }
    for w in &a.warnings {
        println!("warning: {w}");
    }
    println!("morse lower bound {}", a.morse_lower_bound);
    if let Some(m) = &a.morse {
        println!("morse index {}", m.index);
    }
    if let Some(o) = &a.oracle {
        println!("oracle negative count {}", o.negative_count);
        println!("oracle kernel multiplicity {}", o.kernel_multiplicity);
        let ev: Vec<String> = o.smallest.iter().map(|v| num(*v)).collect();
        println!("oracle smallest {}", ev.join(" "));
    }
    if let Some(l) = a.l_top_eigenvalue {
        println!("L top eigenvalue {}", num(l));
    }

    let mut dir = OutputDir::new(out)?;
    dir.write("profile.csv", &profile_csv(&profile))?;
    let mut crit = Csv::new(&["xi"]);
    for x in &a.critical_points {
        crit.row([num(*x)]);
    }
    dir.write("critical_points.csv", &crit)?;
    if let Some(m) = &a.morse {
        let mut diag = Csv::new(&["tau", "sigma_min", "det", "crossing_flag"]);
        for d in diagnostics(&m.path, &m.crossings) {
            diag.row([num(d.tau), num(d.sigma_min), num(d.det), u8::from(d.crossing_flag).to_string()]);
        }
        dir.write("diagnostics.csv", &diag)?;
    }
    dir.finish("wave analyze", path, &bytes, serde_json::to_value(&cfg)?)?;
    Ok(if a.verdict == Verdict::SpectrallyUnstable { EXIT_UNSTABLE } else { EXIT_OK })
}
