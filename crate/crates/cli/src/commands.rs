//! The subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;

use aoce_core::evaluation::{exact_cost, simulate, truncation_sweep};
use aoce_core::solvers::{
    classical_policy_iteration, grid_search_baseline, relative_value_iteration, structured_policy_iteration,
    RviOptions, SpiOptions,
};
use aoce_core::{
    make_baseline, BaselineKind, BaselineSpec, Diagnostics, ErrorClass, EvaluablePolicy, Policy, SolveResult,
    SwitchingPolicy, Threshold, TruncatedMdp,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, SolverMethod};
use crate::output::{fmt_f64, unix_time, MdpHash, RunDir};
use crate::{CliError, Command, CommonArgs};

/// Record written to `diagnostics.json`.
#[derive(Debug, Serialize)]
struct RunRecord<T: Serialize> {
    command: &'static str,
    config_digest: String,
    started_unix: u64,
    finished_unix: u64,
    points: Vec<T>,
}

#[derive(Debug, Serialize)]
struct SolvedPoint {
    p_success: f64,
    lambda: f64,
    truncation: u32,
    mdp: MdpHash,
    optimal_cost: f64,
    thresholds: SwitchingPolicy,
    solver: Diagnostics,
}

pub fn run(command: &Command) -> Result<(), CliError> {
    let args = command.args();
    let config = load(args)?;
    if let Some(n) = args.threads {
        // A pool that already exists (repeated calls in one process) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match command {
        Command::Check(_) => check(&config),
        Command::Solve(a) => {
            gate(&config, a)?;
            solve(&config, &run_dir(a, &config, "solve")?)
        }
        Command::Compare(a) => {
            gate(&config, a)?;
            compare(&config, &run_dir(a, &config, "compare")?)
        }
        Command::Truncation(a) => {
            if distinct(&config.truncation.sweep) < 3 {
                return Err(CliError::Config(
                    "truncation.sweep: at least 3 distinct values of N are needed for a fit".into(),
                ));
            }
            gate(&config, a)?;
            truncation(&config, &run_dir(a, &config, "truncation")?)
        }
        Command::Simulate(a) => {
            gate(&config, a)?;
            simulation(&config, &run_dir(a, &config, "simulate")?)
        }
    }
}

/// Loads the config and applies the command-line overrides, so the echo
/// and digest describe what actually ran.
fn load(args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.simulation.seed = seed;
    }
    if let Some(horizon) = args.horizon {
        if horizon < aoce_core::evaluation::BATCHES {
            return Err(CliError::Config(format!(
                "--horizon: at least {} slots",
                aoce_core::evaluation::BATCHES
            )));
        }
        config.simulation.horizon = horizon;
    }
    Ok(config)
}

fn distinct(ns: &[u32]) -> usize {
    let mut v = ns.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

fn run_dir(args: &CommonArgs, config: &ExperimentConfig, name: &str) -> Result<RunDir, CliError> {
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{name}-{}", &config.digest()[..12])));
    RunDir::create(&path, config)
}

/// Existence reports for every channel in the config.
fn existence(config: &ExperimentConfig) -> Result<Vec<(f64, aoce_core::ExistenceReport)>, CliError> {
    let source = config.source_model()?;
    let profile = config.profile()?;
    Ok(config
        .p_success()?
        .into_iter()
        .map(|p| (p, profile.check_existence(&source, 1.0 - p)))
        .collect())
}

fn check(config: &ExperimentConfig) -> Result<(), CliError> {
    let mut failed = Vec::new();
    for (p, report) in existence(config)? {
        println!("p_success = {p}");
        println!("{report}");
        if !report.passed() {
            failed.push(p);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Existence(format!("fails for p_success in {failed:?}")))
    }
}

fn gate(config: &ExperimentConfig, args: &CommonArgs) -> Result<(), CliError> {
    for (p, report) in existence(config)? {
        if !report.passed() {
            if args.force {
                eprintln!("warning: existence condition fails for p_success = {p}; continuing (--force)");
            } else {
                return Err(CliError::Existence(format!(
                    "p_success = {p}\n{report}\n(rerun with --force to continue)"
                )));
            }
        }
    }
    Ok(())
}

fn solve_mdp(config: &ExperimentConfig, mdp: &TruncatedMdp) -> Result<SolveResult, CliError> {
    let reference = config.solver.reference - 1;
    if reference >= mdp.len() {
        return Err(CliError::Config(format!(
            "solver.reference: {} outside 1..{}",
            config.solver.reference,
            mdp.len()
        )));
    }
    let s = &config.solver;
    match s.method {
        SolverMethod::Spi => structured_policy_iteration(
            mdp,
            reference,
            SpiOptions {
                initial: None,
                max_iter: s.max_iter,
            },
        ),
        SolverMethod::Pi => {
            classical_policy_iteration(mdp.kernel(), reference, Policy::error_triggered(mdp), s.max_iter)
        }
        SolverMethod::Rvi => relative_value_iteration(
            mdp.kernel(),
            reference,
            RviOptions {
                tolerance: s.tolerance,
                max_iter: s.max_iter,
                ..RviOptions::default()
            },
        ),
    }
    .map_err(CliError::from_model)
}

fn solve_point(config: &ExperimentConfig, p: f64, lambda: f64) -> Result<(TruncatedMdp, SolvedPoint), CliError> {
    let mdp = config.build(p, lambda, config.truncation.n)?;
    let r = solve_mdp(config, &mdp)?;
    let thresholds = SwitchingPolicy::extract(&r.policy, &mdp)
        .map_err(|w| CliError::Solver(format!("optimal policy is not switching: {w}")))?
        .canonical(&mdp);
    let point = SolvedPoint {
        p_success: p,
        lambda,
        truncation: mdp.truncation(),
        mdp: MdpHash::of(mdp.kernel()),
        optimal_cost: r.gain,
        thresholds,
        solver: r.diagnostics,
    };
    Ok((mdp, point))
}

const CLASSES: [ErrorClass; 3] = [ErrorClass::MissedAlarm, ErrorClass::FalseAlarm, ErrorClass::Normal];

/// One threshold per error class, when every error of a class shares it.
fn per_class(mdp: &TruncatedMdp, sw: &SwitchingPolicy) -> Option<BTreeMap<ErrorClass, Threshold>> {
    let mut out = BTreeMap::new();
    for b in mdp.blocks() {
        let class = ErrorClass::of(b.source, b.estimate, |s| mdp.source().is_alarm(s));
        let t = sw.get(b.source, b.estimate);
        if *out.entry(class).or_insert(t) != t {
            return None;
        }
    }
    Some(out)
}

fn solve(config: &ExperimentConfig, run: &RunDir) -> Result<(), CliError> {
    let started = unix_time();
    let grid = config.grid()?;
    let solved: Vec<(TruncatedMdp, SolvedPoint)> = grid
        .par_iter()
        .map(|&(p, l)| solve_point(config, p, l))
        .collect::<Result<_, _>>()?;

    let classes: Option<Vec<BTreeMap<ErrorClass, Threshold>>> =
        solved.iter().map(|(mdp, pt)| per_class(mdp, &pt.thresholds)).collect();
    let mut header: Vec<String> = ["p_success", "lambda", "optimal_cost"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = match &classes {
        Some(classes) => {
            let present: Vec<ErrorClass> = CLASSES.into_iter().filter(|c| classes[0].contains_key(c)).collect();
            header.extend(present.iter().map(|c| c.label().to_string()));
            solved
                .iter()
                .zip(classes)
                .map(|((_, pt), by_class)| {
                    let mut row = vec![fmt_f64(pt.p_success), fmt_f64(pt.lambda), fmt_f64(pt.optimal_cost)];
                    row.extend(present.iter().map(|c| by_class[c].to_string()));
                    row
                })
                .collect()
        }
        None => {
            let (mdp, _) = &solved[0];
            header.extend(
                mdp.blocks()
                    .iter()
                    .map(|b| format!("tau_{}_{}", b.source + 1, b.estimate + 1)),
            );
            solved
                .iter()
                .map(|(mdp, pt)| {
                    let mut row = vec![fmt_f64(pt.p_success), fmt_f64(pt.lambda), fmt_f64(pt.optimal_cost)];
                    row.extend(
                        mdp.blocks()
                            .iter()
                            .map(|b| pt.thresholds.get(b.source, b.estimate).to_string()),
                    );
                    row
                })
                .collect()
        }
    };
    run.write_csv("thresholds.csv", &header, &rows)?;

    print_table(&header, &rows);
    if classes.is_none() {
        for (_, pt) in &solved {
            println!(
                "\np_success = {}, lambda = {}\n{}",
                pt.p_success, pt.lambda, pt.thresholds
            );
        }
    }
    run.write_json(
        "diagnostics.json",
        &RunRecord {
            command: "solve",
            config_digest: config.digest(),
            started_unix: started,
            finished_unix: unix_time(),
            points: solved.into_iter().map(|(_, pt)| pt).collect(),
        },
    )?;
    println!("results in {}", run.path().display());
    Ok(())
}

fn print_table(header: &[String], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|k| {
            rows.iter()
                .map(|r| r[k].len())
                .chain([header[k].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    println!("{}", line(header));
    for r in rows {
        println!("{}", line(r));
    }
}

/// Policy columns of the comparison table, in display order.
const POLICY_COLUMNS: [BaselineKind; 8] = [
    BaselineKind::Randomized,
    BaselineKind::Periodic,
    BaselineKind::Reactive,
    BaselineKind::ErrorTriggered,
    BaselineKind::Threshold,
    BaselineKind::DistortionProxy,
    BaselineKind::AoiReference,
    BaselineKind::AoiiReference,
];

#[derive(Debug, Clone, Serialize)]
struct Cell {
    policy: String,
    cost: Option<f64>,
    /// `exact`, `simulated` or `error`.
    evaluation: &'static str,
    parameter: Option<String>,
    half_width: Option<f64>,
    error: Option<String>,
}

impl Cell {
    fn failed(policy: &str, e: impl ToString) -> Self {
        Self {
            policy: policy.to_string(),
            cost: None,
            evaluation: "error",
            parameter: None,
            half_width: None,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
struct ComparePoint {
    p_success: f64,
    lambda: f64,
    mdp: Option<MdpHash>,
    cells: Vec<Cell>,
}

fn compare(config: &ExperimentConfig, run: &RunDir) -> Result<(), CliError> {
    let started = unix_time();
    let grids = config.baseline_grids();
    let listed: Vec<(BaselineKind, Vec<BaselineSpec>)> = POLICY_COLUMNS
        .into_iter()
        .filter_map(|k| grids.iter().find(|(g, _)| *g == k).cloned())
        .collect();
    let (horizon, seed) = (config.simulation.horizon, config.simulation.seed);

    let points: Vec<ComparePoint> = config
        .grid()?
        .par_iter()
        .map(|&(p, lambda)| {
            let mdp = match config.build(p, lambda, config.truncation.n) {
                Ok(mdp) => mdp,
                Err(e) => {
                    let mut cells: Vec<Cell> = listed.iter().map(|(k, _)| Cell::failed(k.name(), &e)).collect();
                    cells.push(Cell::failed("switching", &e));
                    return ComparePoint {
                        p_success: p,
                        lambda,
                        mdp: None,
                        cells,
                    };
                }
            };
            let mut cells: Vec<Cell> = listed
                .iter()
                .map(|(kind, grid)| match grid_search_baseline(grid, &mdp, horizon, seed) {
                    Ok(out) => Cell {
                        policy: kind.name().to_string(),
                        cost: Some(out.best.cost),
                        evaluation: if out.best.simulated() { "simulated" } else { "exact" },
                        parameter: out.best.spec.parameter(),
                        half_width: out.best.half_width,
                        error: None,
                    },
                    Err(e) => Cell::failed(kind.name(), e),
                })
                .collect();
            cells.push(match solve_mdp(config, &mdp) {
                Ok(r) => Cell {
                    policy: "switching".into(),
                    cost: Some(r.gain),
                    evaluation: "exact",
                    parameter: None,
                    half_width: None,
                    error: None,
                },
                Err(e) => Cell::failed("switching", e),
            });
            ComparePoint {
                p_success: p,
                lambda,
                mdp: Some(MdpHash::of(mdp.kernel())),
                cells,
            }
        })
        .collect();

    let mut header: Vec<String> = ["p_success", "lambda"].map(String::from).to_vec();
    for c in &points[0].cells {
        for suffix in ["cost", "evaluation", "parameter", "half_width"] {
            header.push(format!("{}_{suffix}", c.policy));
        }
    }
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            let mut row = vec![fmt_f64(pt.p_success), fmt_f64(pt.lambda)];
            for c in &pt.cells {
                row.push(c.cost.map(fmt_f64).unwrap_or_default());
                row.push(c.evaluation.to_string());
                row.push(c.parameter.clone().unwrap_or_default());
                row.push(c.half_width.map(fmt_f64).unwrap_or_default());
            }
            row
        })
        .collect();
    run.write_csv("compare.csv", &header, &rows)?;

    let mut summary: Vec<String> = ["p_success", "lambda"].map(String::from).to_vec();
    summary.extend(points[0].cells.iter().map(|c| c.policy.clone()));
    let short: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            let mut row = vec![fmt_f64(pt.p_success), fmt_f64(pt.lambda)];
            row.extend(pt.cells.iter().map(|c| match (c.cost, c.evaluation) {
                (Some(v), "simulated") => format!("{v:.4}*"),
                (Some(v), _) => format!("{v:.4}"),
                (None, _) => "error".into(),
            }));
            row
        })
        .collect();
    print_table(&summary, &short);
    println!("(* simulated)");
    for pt in &points {
        for c in pt.cells.iter().filter(|c| c.error.is_some()) {
            eprintln!(
                "warning: {} at p_success = {}, lambda = {}: {}",
                c.policy,
                pt.p_success,
                pt.lambda,
                c.error.as_deref().unwrap_or_default()
            );
        }
    }
    run.write_json(
        "diagnostics.json",
        &RunRecord {
            command: "compare",
            config_digest: config.digest(),
            started_unix: started,
            finished_unix: unix_time(),
            points,
        },
    )?;
    println!("results in {}", run.path().display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRecord {
    p_success: f64,
    lambda: f64,
    sweep: aoce_core::evaluation::TruncationSweep,
}

fn truncation(config: &ExperimentConfig, run: &RunDir) -> Result<(), CliError> {
    let started = unix_time();
    let source = config.source_model()?;
    let profile = config.profile()?;
    let records: Vec<SweepRecord> = config
        .grid()?
        .par_iter()
        .map(|&(p, lambda)| {
            truncation_sweep(&source, &profile, p, lambda, &config.truncation.sweep)
                .map(|sweep| SweepRecord {
                    p_success: p,
                    lambda,
                    sweep,
                })
                .map_err(CliError::from_model)
        })
        .collect::<Result<_, _>>()?;

    let header: Vec<String> = [
        "p_success",
        "lambda",
        "n",
        "optimal_cost",
        "gap",
        "in_fit",
        "fitted_ratio",
        "reference_ratio",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    for r in &records {
        for pt in &r.sweep.points {
            rows.push(vec![
                fmt_f64(r.p_success),
                fmt_f64(r.lambda),
                pt.truncation.to_string(),
                fmt_f64(pt.optimal_cost),
                fmt_f64(pt.gap),
                r.sweep.fitted_on.contains(&pt.truncation).to_string(),
                r.sweep.fitted_ratio.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.sweep.reference_ratio),
            ]);
        }
        let fitted = r
            .sweep
            .fitted_ratio
            .map_or("none (fewer than 2 gaps above the noise floor)".into(), |v| {
                format!("{v:.4}")
            });
        println!(
            "p_success = {}, lambda = {}: fitted ratio {fitted}, reference {:.4}",
            r.p_success, r.lambda, r.sweep.reference_ratio
        );
    }
    run.write_csv("sweep.csv", &header, &rows)?;
    run.write_json(
        "diagnostics.json",
        &RunRecord {
            command: "truncation",
            config_digest: config.digest(),
            started_unix: started,
            finished_unix: unix_time(),
            points: records,
        },
    )?;
    println!("results in {}", run.path().display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulatedPolicy {
    policy: String,
    parameter: Option<String>,
    exact_cost: Option<f64>,
    report: aoce_core::evaluation::SimulationReport,
}

#[derive(Debug, Serialize)]
struct SimulatePoint {
    p_success: f64,
    lambda: f64,
    mdp: MdpHash,
    policies: Vec<SimulatedPolicy>,
}

fn simulation(config: &ExperimentConfig, run: &RunDir) -> Result<(), CliError> {
    let started = unix_time();
    let (horizon, seed) = (config.simulation.horizon, config.simulation.seed);
    let points: Vec<SimulatePoint> = config
        .grid()?
        .par_iter()
        .map(|&(p, lambda)| {
            let (mdp, solved) = solve_point(config, p, lambda)?;
            let optimal = EvaluablePolicy::Stationary(solved.thresholds.expand(&mdp).map_err(CliError::from_model)?);
            let mut policies = vec![("switching".to_string(), None, optimal)];
            for spec in &config.simulation.baselines {
                let policy = make_baseline(spec, &mdp).map_err(CliError::from_model)?;
                policies.push((spec.kind().name().to_string(), spec.parameter(), policy));
            }
            let policies = policies
                .into_iter()
                .map(|(name, parameter, policy)| {
                    let exact = exact_cost(&mdp, &policy).map_err(CliError::from_model)?;
                    let report = simulate(&mdp, &policy, horizon, seed).map_err(CliError::from_model)?;
                    Ok(SimulatedPolicy {
                        policy: name,
                        parameter,
                        exact_cost: exact,
                        report,
                    })
                })
                .collect::<Result<_, CliError>>()?;
            Ok(SimulatePoint {
                p_success: p,
                lambda,
                mdp: MdpHash::of(mdp.kernel()),
                policies,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let header: Vec<String> = [
        "p_success",
        "lambda",
        "policy",
        "parameter",
        "exact_cost",
        "mean_cost",
        "half_width_95",
        "transmissions_per_slot",
        "error_fraction",
        "mean_aoce",
        "mean_aoi",
        "mean_aoii",
        "horizon",
        "seed",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    for pt in &points {
        for s in &pt.policies {
            let r = &s.report;
            rows.push(vec![
                fmt_f64(pt.p_success),
                fmt_f64(pt.lambda),
                s.policy.clone(),
                s.parameter.clone().unwrap_or_default(),
                s.exact_cost.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.mean_cost),
                fmt_f64(r.half_width_95),
                fmt_f64(r.transmissions_per_slot),
                fmt_f64(r.error_fraction),
                fmt_f64(r.mean_aoce),
                fmt_f64(r.mean_aoi),
                fmt_f64(r.mean_aoii),
                r.horizon.to_string(),
                r.seed.to_string(),
            ]);
            println!(
                "p_success = {}, lambda = {}: {:<16} {:.4} ± {:.4}{}",
                pt.p_success,
                pt.lambda,
                s.policy,
                r.mean_cost,
                r.half_width_95,
                s.exact_cost.map_or(String::new(), |v| format!(" (exact {v:.4})"))
            );
        }
    }
    run.write_csv("simulate.csv", &header, &rows)?;
    run.write_json(
        "diagnostics.json",
        &RunRecord {
            command: "simulate",
            config_digest: config.digest(),
            started_unix: started,
            finished_unix: unix_time(),
            points,
        },
    )?;
    println!("results in {}", run.path().display());
    Ok(())
}
