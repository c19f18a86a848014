//! Experiment runner: flag parsing with a flat `key = value` config file
//! underneath, subcommand dispatch, CSV emission with reproducibility
//! metadata, and the runtime verification suite.

use crate::circle::{self, minor_arc_sup, predict_z};
use crate::expsums::GaussCache;
use crate::increment::{
    balanced_sum, density_increment, largest_fourier_coefficient, roth_loop,
    BalancedSpectrumHit, RothOptions, RothOutcome, SearchOptions,
};
use crate::represent::{
    brute_force_counts, count_nontrivial, count_solutions, RepresentationTable,
};
use crate::restriction::{build_decomposition, lp_moment, w_piece_stats};
use crate::systems::{DiagonalSystem, SubsetWindow};
use crate::expsums;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::io::Write;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const USAGE: &str = "\
usage: quadri <subcommand> [flags]

subcommands:
  count      exact solution counts Z, Z_A and the nontrivial count
  predict    circle-method prediction (singular series x singular integral)
  moments    L^p moment tables of weighted quadratic exponential sums
  decompose  dyadic decomposition diagnostics of the representation function
  increment  density-increment loop on a chosen start set
  arcs       empirical minor-arc supremum measurement
  verify     invariant/property suite with a pass/fail summary

flags:
  --system <l1,l2,...>   coefficient list (default 1,1,1,1,-1,-1,-2)
  --strict / --no-strict enforce the structural conditions (default strict)
  --n <int>              window size N
  --n-list <a,b,c>       several window sizes
  --q <int>              arc/truncation parameter Q
  --p <float>            moment exponent p
  --seed <int>           RNG seed (default 42)
  --budget <int>         sample/evaluation budget
  --set <spec>           start set: full | mod:<q>:<r> | random:<density> | file:<path>
  --eta-min <float>      increment loop: stall threshold
  --length-min <int>     increment loop: minimal window length
  --workers <int>        worker threads (or env QUADRI_WORKERS)
  --out <path>           CSV output path (default stdout)
  --table <path>         count: also export the representation table CSV
  --cross-check          count: run the brute-force oracle as well
  --quick                verify: only the sub-minute checks
  --config <path>        flat key=value file; flags override it
  --dry-run              validate the configuration and print the plan
";

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub system: Option<String>,
    pub strict: bool,
    pub n: Option<u64>,
    pub n_list: Vec<u64>,
    pub q: Option<u64>,
    pub p: Option<f64>,
    pub seed: u64,
    pub budget: Option<u64>,
    pub set: Option<String>,
    pub eta_min: Option<f64>,
    pub length_min: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<String>,
    pub table: Option<String>,
    pub cross_check: bool,
    pub quick: bool,
    pub dry_run: bool,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Run(String),
    Stalled,
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(format!("io error: {e}"))
    }
}

pub fn run_main() -> i32 {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => 0,
        Err(CliError::Stalled) => 2,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}\n{USAGE}");
            64
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn dispatch(args: &[String]) -> Result<(), CliError> {
    let (cmd, cfg) = parse_args(args)?;
    if cfg.dry_run {
        println!("plan: subcommand = {cmd}");
        println!("plan: config hash = {:016x}", config_hash(&cfg));
        println!(
            "plan: system = {}, strict = {}",
            cfg.system.as_deref().unwrap_or("1,1,1,1,-1,-1,-2"),
            cfg.strict
        );
        println!("plan: n = {:?}, q = {:?}, p = {:?}", n_values(&cfg), cfg.q, cfg.p);
        println!(
            "plan: seed = {}, budget = {:?}, workers = {:?}, out = {}",
            cfg.seed,
            cfg.budget,
            effective_workers(&cfg),
            cfg.out.as_deref().unwrap_or("<stdout>")
        );
        // Validate eagerly so a bad config still fails the dry run.
        let _ = system_from(&cfg)?;
        return Ok(());
    }
    let workers = effective_workers(&cfg);
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Run(e.to_string()))?;
            pool.install(|| run_command(&cmd, &cfg))
        }
        None => run_command(&cmd, &cfg),
    }
}

fn run_command(cmd: &str, cfg: &RunConfig) -> Result<(), CliError> {
    match cmd {
        "count" => cmd_count(cfg),
        "predict" => cmd_predict(cfg),
        "moments" => cmd_moments(cfg),
        "decompose" => cmd_decompose(cfg),
        "increment" => cmd_increment(cfg),
        "arcs" => cmd_arcs(cfg),
        "verify" => cmd_verify(cfg),
        other => Err(CliError::Config(format!("unknown subcommand {other:?}"))),
    }
}

fn parse_args(args: &[String]) -> Result<(String, RunConfig), CliError> {
    if args.is_empty() {
        return Err(CliError::Config("missing subcommand".into()));
    }
    let cmd = args[0].clone();
    let mut pairs: BTreeMap<String, String> = BTreeMap::new();
    let mut flags: Vec<String> = Vec::new();

    // First pass: pull out --config and read the file as the base layer.
    let mut i = 1;
    let mut file_pairs: BTreeMap<String, String> = BTreeMap::new();
    while i < args.len() {
        if args[i] == "--config" {
            let path = args
                .get(i + 1)
                .ok_or_else(|| CliError::Config("--config needs a path".into()))?;
            let body = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
            for (no, line) in body.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::Config(format!("{path}:{} expected key = value", no + 1))
                })?;
                file_pairs.insert(k.trim().to_string(), v.trim().to_string());
            }
            i += 2;
        } else {
            i += 1;
        }
    }

    let boolean = [
        "strict",
        "no-strict",
        "dry-run",
        "quick",
        "cross-check",
    ];
    let mut i = 1;
    while i < args.len() {
        let arg = &args[i];
        if arg == "--config" {
            i += 2;
            continue;
        }
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Config(format!("unexpected argument {arg:?}")))?;
        if boolean.contains(&key) {
            flags.push(key.to_string());
            i += 1;
        } else {
            let val = args
                .get(i + 1)
                .ok_or_else(|| CliError::Config(format!("--{key} needs a value")))?;
            pairs.insert(key.to_string(), val.clone());
            i += 2;
        }
    }

    // Layering: defaults <- config file <- flags.
    let mut merged = file_pairs;
    for (k, v) in pairs {
        merged.insert(k, v);
    }
    for f in &flags {
        merged.insert(f.clone(), "true".into());
    }

    let mut cfg = RunConfig {
        strict: true,
        seed: 42,
        ..RunConfig::default()
    };
    for (k, v) in &merged {
        match k.as_str() {
            "system" => cfg.system = Some(v.clone()),
            "strict" => cfg.strict = parse_bool(v)?,
            "no-strict" => cfg.strict = !parse_bool(v)?,
            "n" => cfg.n = Some(parse_num(k, v)?),
            "n-list" => {
                cfg.n_list = v
                    .split(',')
                    .map(|t| t.trim().parse::<u64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| CliError::Config(format!("bad n-list: {e}")))?
            }
            "q" => cfg.q = Some(parse_num(k, v)?),
            "p" => {
                cfg.p = Some(
                    v.parse::<f64>()
                        .map_err(|e| CliError::Config(format!("bad p: {e}")))?,
                )
            }
            "seed" => cfg.seed = parse_num(k, v)?,
            "budget" => cfg.budget = Some(parse_num(k, v)?),
            "set" => cfg.set = Some(v.clone()),
            "eta-min" => {
                cfg.eta_min = Some(
                    v.parse::<f64>()
                        .map_err(|e| CliError::Config(format!("bad eta-min: {e}")))?,
                )
            }
            "length-min" => cfg.length_min = Some(parse_num(k, v)?),
            "workers" => cfg.workers = Some(parse_num(k, v)? as usize),
            "out" => cfg.out = Some(v.clone()),
            "table" => cfg.table = Some(v.clone()),
            "cross-check" => cfg.cross_check = parse_bool(v)?,
            "quick" => cfg.quick = parse_bool(v)?,
            "dry-run" => cfg.dry_run = parse_bool(v)?,
            other => return Err(CliError::Config(format!("unknown option --{other}"))),
        }
    }
    Ok((cmd, cfg))
}

fn parse_bool(v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(CliError::Config(format!("bad boolean {other:?}"))),
    }
}

fn parse_num(k: &str, v: &str) -> Result<u64, CliError> {
    v.parse::<u64>()
        .map_err(|e| CliError::Config(format!("bad --{k}: {e}")))
}

fn effective_workers(cfg: &RunConfig) -> Option<usize> {
    cfg.workers.or_else(|| {
        std::env::var("QUADRI_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn system_from(cfg: &RunConfig) -> Result<DiagonalSystem, CliError> {
    let literal = cfg.system.as_deref().unwrap_or("1,1,1,1,-1,-1,-2");
    DiagonalSystem::parse(literal, cfg.strict).map_err(CliError::Config)
}

fn n_values(cfg: &RunConfig) -> Vec<u64> {
    if !cfg.n_list.is_empty() {
        cfg.n_list.clone()
    } else {
        vec![cfg.n.unwrap_or(32)]
    }
}

fn set_from(cfg: &RunConfig, n: u64) -> Result<Option<SubsetWindow>, CliError> {
    let Some(spec) = cfg.set.as_deref() else {
        return Ok(None);
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let w = match parts.as_slice() {
        ["full"] => SubsetWindow::full(n),
        ["mod", q, r] => {
            let q: u64 = q
                .parse()
                .map_err(|_| CliError::Config(format!("bad set spec {spec}")))?;
            let r: u64 = r
                .parse()
                .map_err(|_| CliError::Config(format!("bad set spec {spec}")))?;
            SubsetWindow::from_fn(n, |k| k % q == r % q)
        }
        ["random", d] => {
            let d: f64 = d
                .parse()
                .map_err(|_| CliError::Config(format!("bad set spec {spec}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            SubsetWindow::from_fn(n, |_| rng.gen::<f64>() < d)
        }
        ["file", path] => {
            let body = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
            let members: Result<Vec<u64>, _> = body
                .split([',', '\n', ' '])
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<u64>())
                .collect();
            SubsetWindow::from_members(
                n,
                members.map_err(|e| CliError::Config(format!("bad member list: {e}")))?,
            )
        }
        _ => return Err(CliError::Config(format!("bad set spec {spec:?}"))),
    };
    Ok(Some(w))
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

fn config_hash(cfg: &RunConfig) -> u64 {
    // FNV-1a over the canonical key=value rendering.
    let canon = format!(
        "system={:?};strict={};n={:?};n_list={:?};q={:?};p={:?};seed={};budget={:?};set={:?};eta_min={:?};length_min={:?}",
        cfg.system, cfg.strict, cfg.n, cfg.n_list, cfg.q, cfg.p, cfg.seed, cfg.budget,
        cfg.set, cfg.eta_min, cfg.length_min
    );
    let mut h: u64 = 0xcbf29ce484222325;
    for b in canon.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn open_out(cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    match cfg.out.as_deref() {
        Some(path) => Ok(Box::new(std::fs::File::create(path)?)),
        None => Ok(Box::new(std::io::stdout())),
    }
}

fn write_preamble(out: &mut dyn Write, cfg: &RunConfig, header: &str) -> Result<(), CliError> {
    writeln!(out, "# quadri v{VERSION}")?;
    writeln!(out, "# seed = {}", cfg.seed)?;
    writeln!(out, "# config = {:016x}", config_hash(cfg))?;
    writeln!(out, "{header}")?;
    Ok(())
}

/// 17 significant digits, enough to round-trip an f64.
fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_count(cfg: &RunConfig) -> Result<(), CliError> {
    let sys = system_from(cfg)?;
    let mut out = open_out(cfg)?;
    write_preamble(&mut *out, cfg, "N,Z,Z_A,nontrivial,brute_checked")?;
    for n in n_values(cfg) {
        let z = count_solutions(&sys, n, None).map_err(|e| CliError::Run(e.to_string()))?;
        let a = set_from(cfg, n)?;
        let z_a = match &a {
            Some(w) => count_solutions(&sys, n, Some(w))
                .map_err(|e| CliError::Run(e.to_string()))?
                .to_string(),
            None => String::new(),
        };
        let nontrivial = match count_nontrivial(&sys, n, a.as_ref()) {
            Ok(v) => v.to_string(),
            Err(_) => String::new(), // above the inclusion-exclusion cap
        };
        let checked = if cfg.cross_check {
            let (bz, bn) =
                brute_force_counts(&sys, n, a.as_ref()).map_err(|e| CliError::Run(e.to_string()))?;
            let reference = match &a {
                Some(w) => count_solutions(&sys, n, Some(w)).unwrap(),
                None => z,
            };
            if bz != reference || (!nontrivial.is_empty() && bn.to_string() != nontrivial) {
                return Err(CliError::Run(format!(
                    "brute-force mismatch at N={n}: {bz}/{bn} vs {reference}/{nontrivial}"
                )));
            }
            "yes"
        } else {
            "no"
        };
        writeln!(out, "{n},{z},{z_a},{nontrivial},{checked}")?;
    }
    if let Some(path) = &cfg.table {
        let n = *n_values(cfg).last().unwrap();
        let table = RepresentationTable::build(n).map_err(|e| CliError::Run(e.to_string()))?;
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "m1,m2,count")?;
        for (m1, m2, c) in table.entries() {
            writeln!(f, "{m1},{m2},{c}")?;
        }
    }
    Ok(())
}

fn cmd_predict(cfg: &RunConfig) -> Result<(), CliError> {
    let sys = system_from(cfg)?;
    let q = cfg.q.unwrap_or(64);
    let budget = cfg.budget.unwrap_or(1 << 20);
    let cache = GaussCache::default();
    let mut out = open_out(cfg)?;
    write_preamble(
        &mut *out,
        cfg,
        "N,Q,sing,sing_err,J,J_err,prediction,exact,rel_err",
    )?;
    for n in n_values(cfg) {
        let with_exact = n <= 64;
        let p = predict_z(&sys, n, q, budget, cfg.seed, with_exact, &cache)
            .map_err(|e| CliError::Run(e.to_string()))?;
        let exact = p.exact.map(|v| v.to_string()).unwrap_or_default();
        let rel = p.rel_err.map(fmt_f).unwrap_or_default();
        writeln!(
            out,
            "{n},{q},{},{},{},{},{},{exact},{rel}",
            fmt_f(p.sing),
            fmt_f(p.sing_err),
            fmt_f(p.j_norm),
            fmt_f(p.j_err),
            fmt_f(p.prediction)
        )?;
    }
    Ok(())
}

fn cmd_moments(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.p.unwrap_or(7.0);
    let mut out = open_out(cfg)?;
    write_preamble(
        &mut *out,
        cfg,
        "N,p,seed,moment,moment_over_N^{p-3},grid_c1,grid_c2,self_err",
    )?;
    for n in n_values(cfg) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(n);
        let g: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let m = lp_moment(&g, n, p, 1, 1).map_err(|e| CliError::Run(e.to_string()))?;
        let scale = (n as f64).powf(p - 3.0);
        writeln!(
            out,
            "{n},{p},{},{},{},{},{},{}",
            cfg.seed,
            fmt_f(m.value),
            fmt_f(m.value / scale),
            m.g1,
            m.g2,
            fmt_f(m.self_err)
        )?;
    }
    Ok(())
}

fn cmd_decompose(cfg: &RunConfig) -> Result<(), CliError> {
    let n = cfg.n.unwrap_or(32);
    let q = cfg.q.unwrap_or(4);
    let cache = GaussCache::default();
    let dec = build_decomposition(n, q, &cache).map_err(|e| CliError::Run(e.to_string()))?;
    let n3 = (n as f64).powi(3);
    let mut out = open_out(cfg)?;
    write_preamble(
        &mut *out,
        cfg,
        "Y,l2_over_N3,sup_times_Y32_over_N3,moment2k_over_N3",
    )?;
    for piece in dec.pieces.iter().chain(std::iter::once(&dec.remainder)) {
        let stats = w_piece_stats(&piece.lattice).map_err(|e| CliError::Run(e.to_string()))?;
        let yf = if piece.remainder { 1.0 } else { piece.y as f64 };
        writeln!(
            out,
            "{},{},{},{}",
            if piece.remainder {
                0
            } else {
                piece.y
            },
            fmt_f(stats.l2_sq / n3),
            fmt_f(stats.sup * yf.powf(1.5) / n3),
            fmt_f(piece.lattice.moment2k(2) / n3)
        )?;
    }
    Ok(())
}

fn cmd_increment(cfg: &RunConfig) -> Result<(), CliError> {
    let sys = system_from(cfg)?;
    let n = cfg.n.unwrap_or(32);
    let a0 = set_from(cfg, n)?.unwrap_or_else(|| SubsetWindow::full(n));
    let opts = RothOptions {
        eta_min: cfg.eta_min.unwrap_or(1e-3),
        length_min: cfg.length_min.unwrap_or(8),
        fourier_budget: cfg.budget.unwrap_or(4_000_000),
        ..RothOptions::default()
    };
    let outcome = roth_loop(&sys, &a0, opts).map_err(|e| CliError::Run(e.to_string()))?;
    let mut out = open_out(cfg)?;
    write_preamble(
        &mut *out,
        cfg,
        "step,start,step_size,length,old_density,new_density,eta",
    )?;
    let (trace, verdict) = match &outcome {
        RothOutcome::FoundSolution { solution, trace } => {
            (trace, format!("# solution = {solution:?}"))
        }
        RothOutcome::Trace(trace) => (trace, "# step limit reached".to_string()),
        RothOutcome::Stalled { reason, trace } => (trace, format!("# stalled: {reason:?}")),
    };
    for (i, s) in trace.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            i,
            s.progression.start,
            s.progression.step,
            s.progression.length,
            fmt_f(s.old_density.0 as f64 / s.old_density.1 as f64),
            fmt_f(s.new_density.0 as f64 / s.new_density.1 as f64),
            fmt_f(s.eta_used)
        )?;
    }
    writeln!(out, "{verdict}")?;
    match outcome {
        RothOutcome::FoundSolution { .. } => Ok(()),
        _ => Err(CliError::Stalled),
    }
}

fn cmd_arcs(cfg: &RunConfig) -> Result<(), CliError> {
    let n = cfg.n.unwrap_or(4096);
    let q = cfg.q.unwrap_or(8);
    let samples = cfg.budget.unwrap_or(2000);
    let report = minor_arc_sup(n, q, samples, cfg.seed);
    let mut out = open_out(cfg)?;
    write_preamble(&mut *out, cfg, "N,Q,samples,minor_count,sup,sup_norm")?;
    writeln!(
        out,
        "{},{},{},{},{},{}",
        report.n,
        report.q,
        report.samples,
        report.minor_count,
        fmt_f(report.sup),
        fmt_f(report.normalized)
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct Check {
    name: &'static str,
    quick: bool,
    run: fn() -> Result<String, String>,
}

fn cmd_verify(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = open_out(cfg)?;
    write_preamble(&mut *out, cfg, "check,status,detail")?;
    let mut failures = 0;
    for check in verify_checks() {
        if cfg.quick && !check.quick {
            continue;
        }
        let (status, detail) = match (check.run)() {
            Ok(d) => ("pass", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        writeln!(out, "{},{status},{}", check.name, detail.replace(',', ";"))?;
    }
    if failures > 0 {
        return Err(CliError::Run(format!("{failures} verification failures")));
    }
    writeln!(out, "# all checks passed")?;
    Ok(())
}

fn verify_checks() -> Vec<Check> {
    vec![
        Check {
            name: "solution_predicate_examples",
            quick: true,
            run: || {
                let sys = DiagonalSystem::reference();
                let good = sys.is_solution(&[3, 1, 2, 2, 3, 1, 2]).unwrap();
                let bad = sys.is_solution(&[1, 1, 1, 1, 1, 1, 2]).unwrap();
                if good && !bad {
                    Ok("predicates match direct substitution".into())
                } else {
                    Err("solution predicate mismatch".into())
                }
            },
        },
        Check {
            name: "dp_matches_brute_force",
            quick: true,
            run: || {
                let sys = DiagonalSystem::reference();
                for n in 1..=3 {
                    let (total, nontrivial) = brute_force_counts(&sys, n, None).unwrap();
                    if count_solutions(&sys, n, None).unwrap() != total
                        || count_nontrivial(&sys, n, None).unwrap() != nontrivial
                    {
                        return Err(format!("mismatch at N={n}"));
                    }
                }
                Ok("DP equals brute force for N <= 3".into())
            },
        },
        Check {
            name: "representation_mass",
            quick: true,
            run: || {
                let n = 100u64;
                let mass = crate::represent::representation_mass(n).unwrap();
                if mass == (n as u128).pow(3) {
                    Ok(format!("sum R = {mass} = N^3"))
                } else {
                    Err(format!("mass {mass} != N^3"))
                }
            },
        },
        Check {
            name: "gauss_sum_bound",
            quick: true,
            run: || {
                let mut worst: f64 = 0.0;
                for q in 1..=60i64 {
                    let t = expsums::GaussTable::build(q as usize);
                    for a1 in 1..=q {
                        for a2 in 1..=q {
                            if expsums::RationalPoint::new(a1, a2, q).is_primitive() {
                                worst = worst.max(t.get(a1, a2).norm() / (q as f64).sqrt());
                            }
                        }
                    }
                }
                if worst <= 3.0 {
                    Ok(format!("max |V|/sqrt(q) = {worst:.4} over q <= 60"))
                } else {
                    Err(format!("bound exceeded: {worst}"))
                }
            },
        },
        Check {
            name: "rational_consistency",
            quick: true,
            run: || {
                for q in [5i64, 9] {
                    for k in 1..=3u64 {
                        let alpha = expsums::FrequencyPoint::new(
                            2.0 / q as f64,
                            3.0 / q as f64,
                        );
                        let whole = expsums::quad_sum(q as u64 * k, alpha);
                        let local = expsums::complete_gauss_sum(q, 2, 3) * k as f64;
                        if (whole - local).norm() > 1e-9 * (1.0 + local.norm()) {
                            return Err(format!("q={q} K={k}"));
                        }
                    }
                }
                Ok("V(qK) = K V(q,a) at rational points".into())
            },
        },
        Check {
            name: "transform_identity",
            quick: true,
            run: || {
                let cache = GaussCache::default();
                for q in 1..=12 {
                    let (l, r) =
                        crate::restriction::transform_identity_sides(q, 7, 19, &cache);
                    if (l - r).norm() > 1e-6 * (1.0 + l.norm()) {
                        return Err(format!("q={q}: {l} vs {r}"));
                    }
                }
                Ok("two-dimensional sums reduce to G_m1 sums".into())
            },
        },
        Check {
            name: "oscillatory_integral_cross_check",
            quick: true,
            run: || {
                let slow = expsums::unit_quad_integral(-12.5, 3.7, 1e-10).unwrap();
                let fast = expsums::unit_quad_fast(-12.5, 3.7);
                if (slow - fast).norm() < 5e-7 {
                    Ok("fresnel fast path matches adaptive panels".into())
                } else {
                    Err(format!("{fast} vs {slow}"))
                }
            },
        },
        Check {
            name: "cutoff_shape",
            quick: true,
            run: || {
                let params = expsums::CutoffParams::new(4, 256);
                let inner = expsums::cutoff_psi(expsums::FrequencyPoint::zero(), &params);
                let outer = expsums::cutoff_psi(
                    expsums::FrequencyPoint::new(2.0 * 4.0 / 256.0, 0.0),
                    &params,
                );
                if inner == 1.0 && outer == 0.0 {
                    Ok("psi is 1 on the inner box, 0 outside the support".into())
                } else {
                    Err(format!("psi values {inner}, {outer}"))
                }
            },
        },
        Check {
            name: "arc_classification",
            quick: true,
            run: || {
                let arcs = circle::ArcDecomposition::new(5, 1_000_000);
                match arcs.classify(expsums::FrequencyPoint::new(1.0 / 3.0, 2.0 / 3.0)) {
                    circle::Arc::Major(m) if m.point.q == 3 => {}
                    other => return Err(format!("(1/3,2/3) classified {other:?}")),
                }
                match arcs.classify(expsums::FrequencyPoint::new(0.9, 0.37)) {
                    circle::Arc::Minor => Ok("rational points major, generic points minor".into()),
                    other => Err(format!("generic point classified {other:?}")),
                }
            },
        },
        Check {
            name: "local_identity",
            quick: true,
            run: || {
                let sys = DiagonalSystem::reference();
                let cache = GaussCache::default();
                for p in [2u64, 3] {
                    let mut lhs = 0.0;
                    let mut q = 1u64;
                    for _ in 0..=2 {
                        lhs += circle::local_term(&sys, &cache.table(q as usize)).re;
                        q *= p;
                    }
                    let pk = p * p;
                    let rhs = circle::count_solutions_mod(&sys, pk).unwrap() as f64
                        / (pk as f64).powi(5);
                    if (lhs - rhs).abs() > 1e-8 * rhs {
                        return Err(format!("p={p}: {lhs} vs {rhs}"));
                    }
                }
                Ok("sum of local terms equals normalized residue counts".into())
            },
        },
        Check {
            name: "hensel_fixed_point",
            quick: true,
            run: || {
                let sys = DiagonalSystem::reference();
                let seed = circle::PadicSolution {
                    p: 5,
                    k: 1,
                    x: vec![2, 0, 1, 1, 2, 0, 1],
                    jacobian_unit: true,
                    pair: (0, 1),
                };
                let lifted = circle::hensel_lift(&sys, &seed, 6)
                    .map_err(|e| e.to_string())?;
                if lifted.x == vec![2, 0, 1, 1, 2, 0, 1] {
                    Ok("exact solutions lift to themselves".into())
                } else {
                    Err(format!("unexpected lift {:?}", lifted.x))
                }
            },
        },
        Check {
            name: "real_nonsingular_solution",
            quick: true,
            run: || {
                let sys = DiagonalSystem::reference();
                let x = circle::find_nonsingular_real(&sys).map_err(|e| e.to_string())?;
                Ok(format!("residual-free witness {x:?}"))
            },
        },
        Check {
            name: "balanced_function_zero_mean",
            quick: true,
            run: || {
                let a = SubsetWindow::from_fn(120, |n| n % 5 < 2);
                let v = balanced_sum(&a, expsums::FrequencyPoint::zero());
                if v.norm() == 0.0 {
                    Ok("V_f(0) = 0 exactly".into())
                } else {
                    Err(format!("V_f(0) = {v}"))
                }
            },
        },
        Check {
            name: "heilbronn_dirichlet",
            quick: true,
            run: || {
                let h = crate::increment::heilbronn_approx(0.5, 10);
                if h.q != 2 || h.value != 0.0 {
                    return Err(format!("heilbronn({}, {})", h.q, h.value));
                }
                let (r, v) = crate::increment::dirichlet_approx(1.0 / 3.0, 9)
                    .map_err(|e| e.to_string())?;
                if r == 3 && v < 1e-12 {
                    Ok("classical approximations recovered exactly".into())
                } else {
                    Err(format!("dirichlet ({r}, {v})"))
                }
            },
        },
        Check {
            name: "density_increment_residue_class",
            quick: true,
            run: || {
                let n = 300u64;
                let a = SubsetWindow::from_fn(n, |k| k % 3 == 0);
                let alpha = expsums::FrequencyPoint::new(1.0 / 3.0, 0.0);
                let hit =
                    BalancedSpectrumHit::new(alpha, balanced_sum(&a, alpha).norm(), n);
                let step = density_increment(&a, &hit).map_err(|e| e.to_string())?;
                Ok(format!(
                    "density {}/{} -> {}/{}",
                    step.old_density.0,
                    step.old_density.1,
                    step.new_density.0,
                    step.new_density.1
                ))
            },
        },
        Check {
            name: "grid_parseval",
            quick: true,
            run: || {
                let n = 16u64;
                let g: Vec<Complex64> = (1..=n)
                    .map(|k| Complex64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
                    .collect();
                let grid = crate::restriction::build_moment_grid(&g, n, 1, 1);
                let exact: f64 = g.iter().map(|v| v.norm_sqr()).sum();
                if (grid.mean_sq() - exact).abs() <= 1e-8 * exact {
                    Ok("grid mean of |V|^2 equals sum |g|^2".into())
                } else {
                    Err(format!("{} vs {exact}", grid.mean_sq()))
                }
            },
        },
        Check {
            name: "moment8_lattice_oracle",
            quick: false,
            run: || {
                let n = 16u64;
                let g = vec![Complex64::new(1.0, 0.0); n as usize];
                let exact = crate::restriction::moment8_exact(&g, n);
                let grid = lp_moment(&g, n, 8.0, 1, 1).map_err(|e| e.to_string())?;
                if (grid.value - exact).abs() <= 0.01 * exact {
                    Ok(format!("p=8 moment within 1% of the exact count"))
                } else {
                    Err(format!("{} vs {exact}", grid.value))
                }
            },
        },
        Check {
            name: "singular_series_vs_euler_product",
            quick: false,
            run: || {
                let sys = DiagonalSystem::reference();
                let cache = GaussCache::default();
                let s = circle::singular_series(&sys, 64, &cache).map_err(|e| e.to_string())?;
                let (prod, _) = circle::euler_product(&sys, 64, 1e-4).map_err(|e| e.to_string())?;
                let tol = s.tail_proxy / (1.0 - 0.5f64.sqrt());
                if (prod - s.value).abs() <= tol {
                    Ok(format!("series {} vs product {prod}", s.value))
                } else {
                    Err(format!(
                        "series {} vs product {prod}, completed proxy {tol}",
                        s.value
                    ))
                }
            },
        },
        Check {
            name: "decomposition_reconstructs",
            quick: false,
            run: || {
                let cache = GaussCache::default();
                let dec = build_decomposition(10, 2, &cache).map_err(|e| e.to_string())?;
                let exact = RepresentationTable::build(10).unwrap();
                let mut dev = 0.0f64;
                for m1 in 1..=30i64 {
                    for m2 in 1..=300i64 {
                        let mut acc = dec.remainder.lattice.get(m1, m2);
                        for p in &dec.pieces {
                            acc += p.lattice.get(m1, m2);
                        }
                        dev = dev.max((acc.re - exact.get(m1, m2) as f64).abs());
                    }
                }
                if dev < 1e-6 {
                    Ok(format!("R' + sum R_Y = R (max dev {dev:.2e})"))
                } else {
                    Err(format!("reconstruction deviation {dev}"))
                }
            },
        },
        Check {
            name: "roth_loop_end_to_end",
            quick: false,
            run: || {
                let sys = DiagonalSystem::reference();
                let a0 = SubsetWindow::full(32);
                match roth_loop(&sys, &a0, RothOptions::default()).map_err(|e| e.to_string())? {
                    RothOutcome::FoundSolution { solution, .. } => {
                        Ok(format!("solution {solution:?}"))
                    }
                    other => Err(format!("expected a solution, got {other:?}")),
                }
            },
        },
        Check {
            name: "fourier_search_lower_bound",
            quick: false,
            run: || {
                let a = SubsetWindow::from_fn(300, |k| k % 3 == 0);
                let hit = largest_fourier_coefficient(&a, SearchOptions::default());
                if hit.eta >= 1.0 / 3.0 - 1e-6 {
                    Ok(format!("eta = {:.6} at {:?}", hit.eta, hit.alpha))
                } else {
                    Err(format!("eta only {}", hit.eta))
                }
            },
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &[&str]) -> Vec<String> {
        s.iter().map(|v| v.to_string()).collect()
    }

    #[test]
    fn parse_basic_flags() {
        let (cmd, cfg) = parse_args(&args(&[
            "count",
            "--system",
            "1,1,1,1,-1,-1,-2",
            "--n",
            "8",
            "--seed",
            "7",
            "--cross-check",
        ]))
        .unwrap();
        assert_eq!(cmd, "count");
        assert_eq!(cfg.n, Some(8));
        assert_eq!(cfg.seed, 7);
        assert!(cfg.cross_check);
        assert!(cfg.strict);
    }

    #[test]
    fn config_file_with_flag_override() {
        let dir = std::env::temp_dir().join("quadri_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "n = 16\nseed = 5\n# comment\nq = 8\n").unwrap();
        let (_, cfg) = parse_args(&args(&[
            "predict",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
        ]))
        .unwrap();
        assert_eq!(cfg.n, Some(16));
        assert_eq!(cfg.q, Some(8));
        assert_eq!(cfg.seed, 9); // flag wins
    }

    #[test]
    fn bad_flags_are_config_errors() {
        assert!(matches!(
            parse_args(&args(&["count", "--bogus", "1"])),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            parse_args(&args(&["count", "--n"])),
            Err(CliError::Config(_))
        ));
        assert!(parse_args(&args(&[])).is_err());
    }

    #[test]
    fn set_specs() {
        let cfg = RunConfig {
            set: Some("mod:3:0".into()),
            seed: 1,
            ..RunConfig::default()
        };
        let w = set_from(&cfg, 30).unwrap().unwrap();
        assert_eq!(w.count(), 10);
        let cfg = RunConfig {
            set: Some("full".into()),
            ..RunConfig::default()
        };
        assert_eq!(set_from(&cfg, 12).unwrap().unwrap().count(), 12);
    }

    #[test]
    fn quick_verify_passes() {
        for check in verify_checks().iter().filter(|c| c.quick) {
            if let Err(e) = (check.run)() {
                panic!("{} failed: {e}", check.name);
            }
        }
    }
}
