use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use sddcp::{run_scheme, SchemeConfig, SolveOptions, Strategy, Termination};

use crate::certify::{certify, Certificate};
use crate::error::{CliError, CliResult};
use crate::report::{
    reference_value, summarize, write_csv, write_jsonl, write_ratios_csv, write_summary_csv, ReferenceKind, RunReport,
};
use crate::source::{load, Family, Loaded};
use crate::{BenchArgs, CertifyArgs, SchemeArgs, SolveArgs};

pub fn scheme_config(strategy: Strategy, n: usize, args: &SchemeArgs) -> CliResult<SchemeConfig> {
    let mut cfg = SchemeConfig::new(strategy, n);
    if let Some(iters) = args.iters {
        cfg.max_iters = iters;
    }
    if let Some(window) = args.stall_window {
        cfg.stall_window = window;
    }
    cfg.vertex_cap = args.vertex_cap;
    cfg.weight_threshold = args.threshold;
    cfg.prune_delta = args.prune_delta;
    cfg.random_vertex_rescue = args.rescue;
    cfg.fallback_delta2 = args.fallback;
    cfg.vertex_atoms = args.vertex_atoms;
    cfg.seed = args.seed;
    if let Some(tol) = args.backend_tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Usage(format!("backend tolerance must be positive, got {tol}")));
        }
        cfg.solve.tol_feas = tol;
        cfg.solve.tol_gap = tol;
    }
    cfg.validate(n)?;
    Ok(cfg)
}

fn solve_options(args: &SchemeArgs) -> SolveOptions {
    let mut opts = SolveOptions::from_env();
    if let Some(tol) = args.backend_tol {
        opts.tol_feas = tol;
        opts.tol_gap = tol;
    }
    opts
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs one strategy on one loaded instance.
pub fn run_one(
    inst: &Loaded,
    cfg: &SchemeConfig,
    kind: ReferenceKind,
    reference: Option<f64>,
) -> CliResult<(RunReport, sddcp::SchemeRun)> {
    let start = Instant::now();
    let run = run_scheme(&inst.problem, cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let termination = run.trace.termination.unwrap_or(Termination::IterLimit);
    let report = RunReport {
        instance: inst.id.clone(),
        strategy: cfg.strategy.name(),
        iterations: run.trace.records.len(),
        best_value: run.best_value(),
        reference_kind: kind,
        reference,
        gap: None,
        gap_absolute: false,
        seconds,
        termination: termination_name(termination).to_string(),
        optimal: run.best.is_some(),
    }
    .with_gap(inst.problem.sense);
    Ok((report, run))
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::IterLimit => "iter-limit",
        Termination::CapHit => "cap-hit",
        Termination::Stalled => "stalled",
        Termination::InfeasibleStart => "infeasible-start",
        Termination::SolverFailure => "solver-failure",
    }
}

pub fn cmd_solve(args: &SolveArgs) -> CliResult<RunReport> {
    let strategy: Strategy = args.strategy.parse()?;
    let kind: ReferenceKind = args.reference.parse()?;
    let inst = load(&args.source.source())?;
    let cfg = scheme_config(strategy, inst.problem.n(), &args.scheme)?;
    info!("solving {} (n = {}, m = {}) with {}", inst.id, inst.problem.n(), inst.problem.m(), strategy.name());

    let reference = reference_value(kind, &inst, &solve_options(&args.scheme))?;
    let (report, run) = run_one(&inst, &cfg, kind, reference)?;
    println!("{}", report.human());

    if let Some(path) = &args.trace_out {
        write_text(path, &run.trace.to_csv())?;
    }
    if let Some(path) = &args.report_out {
        write_jsonl(create(path)?, std::slice::from_ref(&report))?;
    }
    let Some(_) = &run.best else {
        return Err(CliError::NoIterate(run.trace.termination.unwrap_or(Termination::SolverFailure)));
    };
    if let Some(path) = &args.cert_out {
        if let Some(cert) = Certificate::from_run(&inst.id, &run, cfg.weight_threshold)? {
            write_text(path, &cert.to_json()?)?;
        }
    }
    Ok(report)
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<Vec<RunReport>> {
    let family: Family = args.family.parse()?;
    let kind: ReferenceKind = args.reference.parse()?;
    let strategies = args.strategies.split(',').map(|s| s.trim().parse::<Strategy>()).collect::<Result<Vec<_>, _>>()?;
    if strategies.is_empty() {
        return Err(CliError::Usage("no strategies given".into()));
    }
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let opts = solve_options(&args.scheme);

    let per_instance: Vec<Vec<RunReport>> = pool.install(|| {
        (0..family.count())
            .into_par_iter()
            .map(|i| bench_instance(&family, i, &strategies, kind, &args.scheme, &opts))
            .collect()
    });
    let reports: Vec<RunReport> = per_instance.into_iter().flatten().collect();

    for r in &reports {
        println!("{}", r.human());
    }
    let summary = summarize(&reports);
    for s in &summary {
        let gap = s.mean_gap.map(|g| format!("{g:.4e}")).unwrap_or_else(|| "-".into());
        println!(
            "summary  {}  solved {}/{}  mean time {:.2}s  mean gap {gap}",
            s.strategy, s.solved, s.instances, s.mean_seconds
        );
    }

    if let Some(path) = &args.report_out {
        write_jsonl(create(path)?, &reports)?;
    }
    if let Some(path) = &args.csv_out {
        write_csv(create(path)?, &reports)?;
    }
    if let Some(path) = &args.summary_out {
        write_summary_csv(create(path)?, &summary)?;
    }
    if let Some(path) = &args.ratios_out {
        write_ratios_csv(create(path)?, &reports)?;
    }
    Ok(reports)
}

/// Reports for every strategy on instance `i`; failures become reports.
fn bench_instance(
    family: &Family,
    i: usize,
    strategies: &[Strategy],
    kind: ReferenceKind,
    args: &SchemeArgs,
    opts: &SolveOptions,
) -> Vec<RunReport> {
    let failed = |id: String, strategy: &Strategy, e: &CliError| RunReport {
        instance: id,
        strategy: strategy.name(),
        iterations: 0,
        best_value: None,
        reference_kind: kind,
        reference: None,
        gap: None,
        gap_absolute: false,
        seconds: 0.0,
        termination: format!("error: {e}"),
        optimal: false,
    };
    let inst = match family.instance(i) {
        Ok(inst) => inst,
        Err(e) => return strategies.iter().map(|s| failed(format!("instance-{i}"), s, &e)).collect(),
    };
    let reference = reference_value(kind, &inst, opts).unwrap_or_else(|e| {
        log::warn!("{}: reference failed: {e}", inst.id);
        None
    });
    strategies
        .iter()
        .map(|&strategy| {
            let result =
                scheme_config(strategy, inst.problem.n(), args).and_then(|cfg| run_one(&inst, &cfg, kind, reference));
            match result {
                Ok((report, _)) => report,
                Err(e) => failed(inst.id.clone(), &strategy, &e),
            }
        })
        .collect()
}

pub fn cmd_certify(args: &CertifyArgs) -> CliResult<()> {
    let cert = Certificate::read(&args.cert)?;
    let inst = load(&args.source.source())?;
    let checks = certify(&cert, &inst.problem)?;
    let mut out = std::io::stdout().lock();
    for c in &checks {
        writeln!(out, "{}", c.line()).map_err(|e| CliError::io("<stdout>", e))?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::CertifyFailed(failed));
    }
    Ok(())
}
