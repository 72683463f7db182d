mod args;
mod manifest;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use conewalk::conditioned::{
    keep_path, sample_bridge_with, sample_htransform_with, sample_meander_split_with,
    sample_meander_with, BridgeOptions, MeanderOptions, SamplerMethod,
};
use conewalk::harmonic::{build_v_exact, HarmonicOptions, InitialGuess};
use conewalk::reference::{
    entrance_law_cdf, entrance_law_density, radial_transition_cdf, radial_transition_density,
    sample_bessel, sample_bm_meander, sample_h_bm, GridOptions,
};
use conewalk::stats::experiments::ExperimentOutput;
use conewalk::walk::{simulate_replica, survival_probability_mc, PathSample};
use conewalk::{exec, Point};
use serde::Serialize;

use args::*;
use manifest::{Experiment, Kind};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files or parameters: exit code 2.
    Validation(String),
    /// A computation that could not finish: exit code 1.
    Runtime(String),
    /// A statistical test rejected: exit code 3.
    Statistical(String),
}

impl From<conewalk::Error> for CliError {
    fn from(e: conewalk::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match with_threads_flat(cli.threads, || dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Statistical(m)) => {
            eprintln!("FAIL: {m}");
            ExitCode::from(3)
        }
    }
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Validation("--threads must be at least 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    if threads == Some(0) {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    Ok(f())
}

fn with_threads_flat(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<(), CliError> + Send,
) -> Result<(), CliError> {
    with_threads(threads, f)?
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::EstimateV(a) => estimate_v(a),
        Command::Sample(a) => sample(a),
        Command::Reference(a) => reference(a),
        Command::SurvivalExponent(a) => survival(a),
        Command::TestMeander(a) => test_meander(a),
        Command::TestHtransform(a) => test_htransform(a),
        Command::TestBridge(a) => test_bridge(a),
        Command::Suite(a) => suite(a),
    }
}

fn parse_point(s: &str) -> Result<Point, CliError> {
    Ok(Point::parse_csv(s)?)
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("bad number '{t}' in '{s}'")))
        })
        .collect()
}

/// `r_min:r_max:steps` → `steps + 1` equally spaced radii.
fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Validation(format!("bad grid '{s}' (expected r_min:r_max:steps)"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let k: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo && lo >= 0.0 && k >= 1) {
        return Err(bad());
    }
    Ok((0..=k)
        .map(|i| lo + (hi - lo) * i as f64 / k as f64)
        .collect())
}

fn method(m: Option<MethodArg>) -> Option<SamplerMethod> {
    m.map(|m| match m {
        MethodArg::Guided => SamplerMethod::Guided,
        MethodArg::Rejection => SamplerMethod::Rejection,
        MethodArg::Splitting => SamplerMethod::Splitting,
    })
}

fn finish(out: &ExperimentOutput, r: &ReportArgs) -> Result<(), CliError> {
    output::write_experiment(out, r.out.as_deref(), r.csv.as_deref(), r.plot.as_deref())?;
    gate(out)
}

fn gate(out: &ExperimentOutput) -> Result<(), CliError> {
    if out.report.pass {
        Ok(())
    } else {
        let failed: Vec<&str> = out
            .report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::Statistical(format!(
            "{}: {}",
            out.report.experiment,
            failed.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    cone: &'a str,
    steps: &'a str,
    start: Vec<f64>,
    n: usize,
    replicas: u64,
    seed: u64,
    survival_probability: f64,
    std_error: f64,
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let cone = manifest::parse_cone(&a.walk.cone)?;
    let dist = manifest::parse_steps(&a.walk.steps, &cone)?;
    let x = parse_point(&a.walk.start)?;
    let est = survival_probability_mc(&cone, &dist, &x, a.n, a.replicas, a.walk.seed)?;
    if let Some(path) = &a.record_paths {
        let paths: Vec<PathSample> = exec::try_map_indexed(a.replicas as usize, |r| {
            simulate_replica(&cone, &dist, &x, a.n, a.walk.seed, r as u64, false)
        })?;
        output::write_paths(path, x.dim(), paths.iter().enumerate())?;
    }
    output::emit_json(
        &SimulateSummary {
            cone: &a.walk.cone,
            steps: &a.walk.steps,
            start: x.to_vec(),
            n: a.n,
            replicas: a.replicas,
            seed: a.walk.seed,
            survival_probability: est.probability,
            std_error: est.std_error,
        },
        None,
    )
}

#[derive(Serialize)]
struct TableSummary {
    table: PathBuf,
    sidecar: PathBuf,
    window_radius: f64,
    residual: f64,
    sweeps: usize,
}

fn estimate_v(a: EstimateVArgs) -> Result<(), CliError> {
    let cone = manifest::parse_cone(&a.cone)?;
    let dist = manifest::parse_steps(&a.steps, &cone)?;
    let mut opts = HarmonicOptions {
        tol: a.tol,
        initial: match a.init {
            InitArg::Zero => InitialGuess::Zero,
            InitArg::Anchor => InitialGuess::Anchor,
        },
        ..HarmonicOptions::new(a.window)
    };
    if let Some(s) = a.max_sweeps {
        opts.max_sweeps = s;
    }
    let table = build_v_exact(&cone, &dist, &opts)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| output::io_err(dir, e))?;
    }
    let sidecar = table.write(&a.out)?;
    output::emit_json(
        &TableSummary {
            table: a.out.clone(),
            sidecar,
            window_radius: table.window_radius(),
            residual: table.residual(),
            sweeps: table.sweeps(),
        },
        None,
    )
}

fn sample(a: SampleArgs) -> Result<(), CliError> {
    let cone = manifest::parse_cone(&a.walk.cone)?;
    let dist = manifest::parse_steps(&a.walk.steps, &cone)?;
    let x = parse_point(&a.walk.start)?;
    let seed = a.walk.seed;
    let ens = match a.law {
        LawArg::Meander => match method(a.method) {
            Some(SamplerMethod::Splitting) => {
                let mut levels = Vec::new();
                let mut k = a.n;
                while k >= 8 {
                    levels.push(k);
                    k /= 2;
                }
                levels.reverse();
                sample_meander_split_with(
                    &cone,
                    &dist,
                    &x,
                    a.n,
                    a.count,
                    &levels,
                    seed,
                    u64::MAX / 4,
                    keep_path,
                )?
            }
            m => {
                let default = if dist.lattice_atoms().is_ok() {
                    SamplerMethod::Guided
                } else {
                    SamplerMethod::Rejection
                };
                let opts = MeanderOptions {
                    method: m.unwrap_or(default),
                    ..MeanderOptions::default()
                };
                sample_meander_with(&cone, &dist, &x, a.n, a.count, seed, &opts, keep_path)?
            }
        },
        LawArg::Htransform => {
            let table =
                manifest::harmonic_table(&cone, &dist, &x, a.n, a.vtable.as_deref(), a.window)?;
            sample_htransform_with(&table, &dist, &x, a.n, a.count, seed, keep_path)?
        }
        LawArg::Bridge => {
            let y = match &a.end {
                Some(s) => parse_point(s)?,
                None => return Err(CliError::Validation("bridge sampling needs --end".into())),
            };
            let opts = BridgeOptions {
                method: method(a.method).unwrap_or(SamplerMethod::Guided),
                ..BridgeOptions::default()
            };
            sample_bridge_with(&cone, &dist, &x, a.n, &y, a.count, seed, &opts, keep_path)?
        }
    };
    output::write_paths(&a.out, x.dim(), ens.values.iter().enumerate())?;
    output::emit_json(&ens.summary(), Some(&output::sidecar(&a.out)))
}

fn reference(a: ReferenceArgs) -> Result<(), CliError> {
    let cone = manifest::parse_cone(&a.cone)?;
    let d = cone.dimension();
    let grid_opts = GridOptions {
        m: a.m,
        eps: a.eps,
        bridge_correction: !a.no_bridge_correction,
        ..GridOptions::default()
    };
    let coords: Vec<String> = (1..=d).map(|i| format!("coord_{i}")).collect();
    let mut csv = String::new();
    match a.object {
        ObjectArg::Meander | ObjectArg::HBm => {
            let (ens, horizon) = if a.object == ObjectArg::Meander {
                (sample_bm_meander(&cone, &grid_opts, a.count, a.seed)?, 1.0)
            } else {
                let start = a
                    .start
                    .as_deref()
                    .ok_or_else(|| CliError::Validation("h-bm needs --start".into()))?;
                let x = parse_point(start)?;
                (
                    sample_h_bm(&cone, &x, a.time, &grid_opts, a.count, a.seed)?,
                    a.time,
                )
            };
            csv.push_str(&format!("replica,k,t,{},weight\n", coords.join(",")));
            for (r, (path, w)) in ens.values.iter().zip(&ens.weights).enumerate() {
                for (k, p) in path.chunks(d).enumerate() {
                    let t = horizon * k as f64 / a.m as f64;
                    let c: Vec<String> = p.iter().map(|v| output::num(*v)).collect();
                    csv.push_str(&format!(
                        "{r},{k},{},{},{}\n",
                        output::num(t),
                        c.join(","),
                        output::num(*w)
                    ));
                }
            }
            #[derive(Serialize)]
            struct Side {
                object: &'static str,
                cone: String,
                count: usize,
                attempts: u64,
                acceptance_rate: f64,
                grid: GridOptions,
                horizon: f64,
                seed: u64,
            }
            output::emit_json(
                &Side {
                    object: if a.object == ObjectArg::Meander {
                        "meander"
                    } else {
                        "h-bm"
                    },
                    cone: cone.to_string(),
                    count: ens.values.len(),
                    attempts: ens.attempts,
                    acceptance_rate: ens.acceptance_rate(),
                    grid: grid_opts,
                    horizon,
                    seed: a.seed,
                },
                Some(&output::sidecar(&a.out)),
            )?;
        }
        ObjectArg::Bessel => {
            let times = parse_list(&a.times)?;
            let paths = sample_bessel(&cone.radial_law(), a.r0, &times, a.count, a.seed)?;
            csv.push_str("replica,t,radius\n");
            for (r, p) in paths.iter().enumerate() {
                for (t, v) in times.iter().zip(p) {
                    csv.push_str(&format!("{r},{},{}\n", output::num(*t), output::num(*v)));
                }
            }
        }
        ObjectArg::EntranceDensity => {
            csv.push_str("r,density,cdf\n");
            for r in parse_grid(&a.grid)? {
                let f = entrance_law_density(&cone, a.time, r)?;
                let c = entrance_law_cdf(&cone, a.time, r)?;
                csv.push_str(&format!(
                    "{},{},{}\n",
                    output::num(r),
                    output::num(f),
                    output::num(c)
                ));
            }
        }
        ObjectArg::Kernel => {
            let law = cone.radial_law();
            csv.push_str("r2,density,cdf\n");
            for r in parse_grid(&a.grid)? {
                let f = radial_transition_density(&law, a.time, a.r0, r)?;
                let c = radial_transition_cdf(&law, a.time, a.r0, r)?;
                csv.push_str(&format!(
                    "{},{},{}\n",
                    output::num(r),
                    output::num(f),
                    output::num(c)
                ));
            }
        }
    }
    output::write_text(&a.out, &csv)
}

fn walk_experiment(kind: Kind, w: &WalkArgs) -> Result<Experiment, CliError> {
    let x = parse_point(&w.start)?;
    Ok(Experiment::new(
        kind.name(),
        kind,
        &w.cone,
        &w.steps,
        x.to_vec(),
        w.seed,
    ))
}

fn stat_fields(e: &mut Experiment, s: &StatArgs) {
    e.n = Some(s.n);
    e.count = Some(s.count);
    e.thresholds.alpha = s.alpha;
}

fn survival(a: SurvivalArgs) -> Result<(), CliError> {
    let mut e = walk_experiment(Kind::SurvivalExponent, &a.walk)?;
    e.horizons = Some(a.horizons.clone());
    e.source = Some(match a.source {
        SourceArg::Exact => conewalk::stats::experiments::SurvivalSource::Exact,
        SourceArg::Mc => conewalk::stats::experiments::SurvivalSource::MonteCarlo {
            replicas: a.replicas,
        },
    });
    e.thresholds.tolerance = Some(a.tolerance);
    finish(&manifest::run(&e)?, &a.report)
}

fn test_meander(a: TestMeanderArgs) -> Result<(), CliError> {
    let mut e = walk_experiment(Kind::Meander, &a.walk)?;
    stat_fields(&mut e, &a.stat);
    e.negative_control = !a.no_control;
    e.method = method(a.method);
    e.reference_count = Some(a.reference_count);
    e.grid = Some(manifest::Grid {
        m: a.m,
        eps: a.eps,
        bridge_correction: true,
    });
    finish(&manifest::run(&e)?, &a.report)
}

fn test_htransform(a: TestHtransformArgs) -> Result<(), CliError> {
    let mut e = walk_experiment(Kind::Htransform, &a.walk)?;
    stat_fields(&mut e, &a.stat);
    e.negative_control = !a.no_control;
    e.vtable = a.vtable.clone();
    e.window = a.window;
    finish(&manifest::run(&e)?, &a.report)
}

fn test_bridge(a: TestBridgeArgs) -> Result<(), CliError> {
    let mut e = walk_experiment(Kind::Bridge, &a.walk)?;
    stat_fields(&mut e, &a.stat);
    if let Some(s) = &a.end {
        e.end = Some(parse_point(s)?.to_vec());
    }
    e.t = Some(a.t);
    e.reference_count = Some(a.reference_count);
    e.method = method(a.method);
    e.grid = Some(manifest::Grid {
        m: a.m,
        eps: a.eps,
        bridge_correction: true,
    });
    finish(&manifest::run(&e)?, &a.report)
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

#[derive(Serialize)]
struct SuiteEntry {
    id: String,
    experiment: String,
    pass: bool,
    statistic: f64,
    report: PathBuf,
}

#[derive(Serialize)]
struct SuiteSummary {
    manifest: String,
    schema: &'static str,
    pass: bool,
    experiments: Vec<SuiteEntry>,
}

fn suite(a: SuiteArgs) -> Result<(), CliError> {
    let m = manifest::load(&a.manifest)?;
    for id in &a.only {
        if !m.experiments.iter().any(|e| &e.id == id) {
            return Err(CliError::Validation(format!(
                "no experiment '{id}' in manifest {}",
                m.name
            )));
        }
    }
    let dir = a
        .out_dir
        .clone()
        .or_else(|| m.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("conewalk-{}", m.name)));
    let mut entries = Vec::new();
    for e in m
        .experiments
        .iter()
        .filter(|e| a.only.is_empty() || a.only.contains(&e.id))
    {
        let out = manifest::run(e)?;
        let report = resolve(
            &dir,
            e.outputs
                .report
                .as_deref()
                .unwrap_or(Path::new(&format!("{}.json", e.id))),
        );
        let samples = resolve(
            &dir,
            e.outputs
                .samples
                .as_deref()
                .unwrap_or(Path::new(&format!("{}.csv", e.id))),
        );
        let plot = e.outputs.plot.as_deref().map(|p| resolve(&dir, p));
        output::write_experiment(&out, Some(&report), Some(&samples), plot.as_deref())?;
        println!(
            "{} {} ({}): statistic {:.4} / threshold {:.4}",
            if out.report.pass { "PASS" } else { "FAIL" },
            e.id,
            out.report.experiment,
            out.report.statistic,
            out.report.threshold
        );
        entries.push(SuiteEntry {
            id: e.id.clone(),
            experiment: out.report.experiment.clone(),
            pass: out.report.pass,
            statistic: out.report.statistic,
            report,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    let failed: Vec<String> = entries
        .iter()
        .filter(|e| !e.pass)
        .map(|e| e.id.clone())
        .collect();
    output::emit_json(
        &SuiteSummary {
            manifest: m.name.clone(),
            schema: manifest::SCHEMA,
            pass,
            experiments: entries,
        },
        Some(&dir.join("summary.json")),
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Statistical(format!(
            "failed experiments: {}",
            failed.join(", ")
        )))
    }
}
