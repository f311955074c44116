//! `evans` command-line front end.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure,
//! 3 partial results (some contour nodes failed but output was written).

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};

use evans_cli::config::RunConfig;
use evans_cli::experiments;
use evans_cli::output::{fnum, write_csv, write_json, Summary};
use evans_cli::parse::{parse_contour, parse_method, parse_problem};
use evans_core::evans::{
    sample_contour, winding_number, SampleOutcome, WindingOpts,
};
use evans_core::kato::check_exclusion_radius;
use evans_core::problems::ScalarTestbed;
use evans_core::EvansError;

#[derive(Parser)]
#[command(
    name = "evans",
    version,
    about = "Evans function computation and experiment suite",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default, Clone)]
struct Common {
    /// Config file (JSON or key=value lines); flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    contour: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Truncation length M (0 = choose automatically).
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    exclusion_radius: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    bvp_step: Option<f64>,
    #[arg(long)]
    homotopy_stages: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Winding number of D around a closed contour.
    Winding(Common),
    /// Sample D along a contour (open or closed); failures become gap rows.
    Sample(Common),
    /// Truncation-length convergence on the scalar testbed.
    ConvergeM {
        #[command(flatten)]
        common: Common,
        /// Comma-separated truncation lengths, e.g. 4,5,...,12.
        #[arg(long)]
        m_list: Option<String>,
    },
    /// Orthonormality-error dynamics of continuous orthogonalization.
    Stiefel {
        #[command(flatten)]
        common: Common,
        /// Initial orthonormality error.
        #[arg(long)]
        eps: Option<f64>,
        /// Fixed integration step.
        #[arg(long)]
        h: Option<f64>,
        /// Interval length for the experiment.
        #[arg(long)]
        stiefel_m: Option<f64>,
    },
    /// Accepted-step scaling of the adaptive integrator on w' = -a w.
    MeshStudy {
        #[command(flatten)]
        common: Common,
        /// Error-per-unit-step tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Comma-separated decay rates.
        #[arg(long)]
        a_list: Option<String>,
    },
    /// Continuation-scheme order study on the convected heat problem.
    KatoOrder {
        #[command(flatten)]
        common: Common,
        /// Comma-separated contour node counts.
        #[arg(long)]
        j_list: Option<String>,
    },
    /// Evaluate D with several methods on shared nodes and compare.
    CompareMethods {
        #[command(flatten)]
        common: Common,
        /// Comma-separated method names.
        #[arg(long)]
        methods: Option<String>,
    },
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| anyhow!("{}", e)))
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| anyhow!("{}", e)))
        .collect()
}

/// Resolution order: defaults < subcommand defaults < config file < flags.
fn resolve(common: &Common, sub_defaults: &[(&str, &str)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (key, value) in sub_defaults {
        match *key {
            "problem" => cfg.problem = value.to_string(),
            "contour" => cfg.contour = value.to_string(),
            "method" => cfg.method = value.to_string(),
            _ => unreachable!("unknown subcommand default {}", key),
        }
    }
    if let Some(path) = &common.config {
        let file_cfg = RunConfig::from_file(path)?;
        cfg = file_cfg;
    }
    if let Some(v) = &common.problem {
        cfg.problem = v.clone();
    }
    if let Some(v) = &common.method {
        cfg.method = v.clone();
    }
    if let Some(v) = &common.contour {
        cfg.contour = v.clone();
    }
    if let Some(v) = common.nodes {
        cfg.nodes = v;
    }
    if let Some(v) = common.m {
        cfg.m = v;
    }
    if let Some(v) = &common.output {
        cfg.output = v.clone();
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.exclusion_radius {
        cfg.exclusion_radius = v;
    }
    if let Some(v) = common.budget {
        cfg.budget = v;
    }
    if let Some(v) = common.abs_tol {
        cfg.abs_tol = v;
    }
    if let Some(v) = common.rel_tol {
        cfg.rel_tol = v;
    }
    if let Some(v) = common.bvp_step {
        cfg.bvp_step = v;
    }
    if let Some(v) = common.homotopy_stages {
        cfg.homotopy_stages = v;
    }
    Ok(cfg)
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.output).join(name)
}

fn sample_rows(samples: &[evans_core::evans::EvansSample<f64>]) -> Vec<Vec<String>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                i.to_string(),
                fnum(s.t),
                fnum(s.lambda.re),
                fnum(s.lambda.im),
                fnum(s.value.re),
                fnum(s.value.im),
                fnum(s.value.norm()),
            ]
        })
        .collect()
}

fn cmd_winding(common: &Common) -> Result<i32> {
    let cfg = resolve(common, &[])?;
    let system = parse_problem(&cfg.problem)?;
    let contour = parse_contour(&cfg.contour, cfg.nodes)?;
    check_exclusion_radius(&contour, &system.singular_points, cfg.exclusion_radius)?;
    let method = parse_method(&cfg.method)?;
    let probe = contour.at(0.0);
    let config = experiments::method_config(
        method,
        &system,
        probe,
        cfg.m,
        cfg.abs_tol,
        cfg.rel_tol,
        cfg.bvp_step,
        cfg.homotopy_stages,
    );
    let opts = WindingOpts {
        budget: cfg.budget,
        ..WindingOpts::default()
    };
    let result = winding_number(&system, &contour, config, &opts)?;
    write_csv(
        &out_path(&cfg, "winding.csv"),
        &["index", "t", "lambda_re", "lambda_im", "d_re", "d_im", "abs_d"],
        &sample_rows(&result.samples),
    )?;
    #[derive(serde::Serialize)]
    struct WindingSummary {
        winding: i64,
        samples: usize,
        max_rel_step: f64,
        refinement_history: Vec<usize>,
    }
    write_json(
        &out_path(&cfg, "winding.json"),
        &Summary::new(
            "winding",
            cfg.clone(),
            WindingSummary {
                winding: result.winding,
                samples: result.samples.len(),
                max_rel_step: result.max_rel_step,
                refinement_history: result.refinement_history.clone(),
            },
        ),
    )?;
    println!(
        "winding = {} over {} samples (max relative step {:.3})",
        result.winding,
        result.samples.len(),
        result.max_rel_step
    );
    Ok(0)
}

fn cmd_sample(common: &Common) -> Result<i32> {
    let cfg = resolve(common, &[])?;
    let system = parse_problem(&cfg.problem)?;
    let contour = parse_contour(&cfg.contour, cfg.nodes)?;
    check_exclusion_radius(&contour, &system.singular_points, cfg.exclusion_radius)?;
    let method = parse_method(&cfg.method)?;
    let probe = contour.at(0.0);
    let config = experiments::method_config(
        method,
        &system,
        probe,
        cfg.m,
        cfg.abs_tol,
        cfg.rel_tol,
        cfg.bvp_step,
        cfg.homotopy_stages,
    );
    let outcomes = sample_contour(&system, &contour, config)?;
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for (i, outcome) in outcomes.iter().enumerate() {
        match outcome {
            SampleOutcome::Ok(s) => rows.push(vec![
                i.to_string(),
                fnum(s.t),
                fnum(s.lambda.re),
                fnum(s.lambda.im),
                fnum(s.value.re),
                fnum(s.value.im),
                fnum(s.value.norm()),
                "ok".into(),
                String::new(),
            ]),
            SampleOutcome::Failed { t, lambda, error } => {
                failures += 1;
                rows.push(vec![
                    i.to_string(),
                    fnum(*t),
                    fnum(lambda.re),
                    fnum(lambda.im),
                    String::new(),
                    String::new(),
                    String::new(),
                    "failed".into(),
                    error.clone(),
                ]);
            }
        }
    }
    write_csv(
        &out_path(&cfg, "sample.csv"),
        &[
            "index", "t", "lambda_re", "lambda_im", "d_re", "d_im", "abs_d", "status", "error",
        ],
        &rows,
    )?;
    #[derive(serde::Serialize)]
    struct SampleSummary {
        nodes: usize,
        failures: usize,
    }
    write_json(
        &out_path(&cfg, "sample.json"),
        &Summary::new(
            "sample",
            cfg.clone(),
            SampleSummary {
                nodes: outcomes.len(),
                failures,
            },
        ),
    )?;
    if failures > 0 {
        eprintln!("{} of {} nodes failed; partial results written", failures, outcomes.len());
        return Ok(3);
    }
    println!("sampled {} nodes", outcomes.len());
    Ok(0)
}

fn cmd_converge_m(common: &Common, m_list: &Option<String>) -> Result<i32> {
    let mut cfg = resolve(common, &[("problem", "scalar:1,1,1")])?;
    if let Some(list) = m_list {
        cfg.m_list = parse_f64_list(list)?;
    }
    let parts: Vec<&str> = cfg.problem.split(':').collect();
    if parts.len() != 2 || parts[0] != "scalar" {
        return Err(anyhow!(
            "converge-m runs on the scalar testbed; use --problem scalar:a,b,theta"
        ));
    }
    let nums = parts[1]
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()?;
    let tb = ScalarTestbed::new(nums[0], nums[1], nums[2])?;
    let report = experiments::converge_in_m(&tb, &cfg.m_list)?;
    let rows: Vec<Vec<String>> = report
        .abscissae
        .iter()
        .zip(&report.errors)
        .map(|(&m, &e)| vec![fnum(m), fnum(e)])
        .collect();
    write_csv(&out_path(&cfg, "converge-m.csv"), &["m", "error"], &rows)?;
    write_json(
        &out_path(&cfg, "converge-m.json"),
        &Summary::new("converge-m", cfg.clone(), report.clone()),
    )?;
    println!(
        "fitted rate {} (residual {}, degenerate: {})",
        report.fitted_rate, report.fit_residual, report.degenerate
    );
    Ok(0)
}

fn cmd_stiefel(
    common: &Common,
    eps: &Option<f64>,
    h: &Option<f64>,
    stiefel_m: &Option<f64>,
) -> Result<i32> {
    let mut cfg = resolve(common, &[("problem", "stiefel-demo")])?;
    if let Some(v) = eps {
        cfg.eps = *v;
    }
    if let Some(v) = h {
        cfg.h = *v;
    }
    if let Some(v) = stiefel_m {
        cfg.stiefel_m = *v;
    }
    let system = parse_problem(&cfg.problem)?;
    let report =
        experiments::stiefel_experiment(&system, cfg.seed, cfg.eps, cfg.h, cfg.stiefel_m)?;
    let mut rows = Vec::new();
    for leg in [&report.backward, &report.forward, &report.davey] {
        for &(x, e) in &leg.trajectory {
            rows.push(vec![leg.label.clone(), fnum(x), fnum(e)]);
        }
    }
    write_csv(
        &out_path(&cfg, "stiefel.csv"),
        &["leg", "x", "stiefel_error"],
        &rows,
    )?;
    write_json(
        &out_path(&cfg, "stiefel.json"),
        &Summary::new("stiefel", cfg.clone(), report.clone()),
    )?;
    println!(
        "predicted rate {}: backward slope {}, forward slope {}, davey slope {}",
        report.predicted_rate, report.backward.slope, report.forward.slope, report.davey.slope
    );
    Ok(0)
}

fn cmd_mesh_study(common: &Common, tol: &Option<f64>, a_list: &Option<String>) -> Result<i32> {
    let mut cfg = resolve(common, &[])?;
    if let Some(v) = tol {
        cfg.tol = *v;
    }
    if let Some(list) = a_list {
        cfg.a_list = parse_f64_list(list)?;
    }
    let m = if cfg.m > 0.0 { cfg.m } else { 16.0 };
    let report = experiments::mesh_count_study(cfg.tol, &cfg.a_list, m)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fnum(r.a),
                r.steps_uncentered.to_string(),
                r.steps_centered.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out_path(&cfg, "mesh-study.csv"),
        &["a", "steps_uncentered", "steps_centered"],
        &rows,
    )?;
    write_json(
        &out_path(&cfg, "mesh-study.json"),
        &Summary::new("mesh-study", cfg.clone(), report.clone()),
    )?;
    println!(
        "fitted exponent {} (residual {}), centered max steps {}",
        report.fitted_exponent, report.fit_residual, report.max_centered_steps
    );
    Ok(0)
}

fn cmd_kato_order(common: &Common, j_list: &Option<String>) -> Result<i32> {
    let mut cfg = resolve(
        common,
        &[("problem", "convected-heat:0"), ("contour", "circle:2,1")],
    )?;
    if let Some(list) = j_list {
        cfg.j_list = parse_usize_list(list)?;
    }
    let eta: f64 = match cfg.problem.split_once(':') {
        Some(("convected-heat", v)) => v.trim().parse()?,
        _ => {
            return Err(anyhow!(
                "kato-order runs on the convected heat problem; use --problem convected-heat:eta"
            ))
        }
    };
    let (center, radius) = match cfg.contour.split_once(':') {
        Some(("circle", body)) => {
            let (c, r) = body
                .rsplit_once(',')
                .ok_or_else(|| anyhow!("circle spec is circle:center,radius"))?;
            (evans_cli::parse::parse_complex(c)?, r.trim().parse::<f64>()?)
        }
        _ => return Err(anyhow!("kato-order needs a circle contour")),
    };
    let report = experiments::kato_order_study(eta, center, radius, &cfg.j_list)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.nodes.to_string(),
                fnum(r.closure_first),
                fnum(r.closure_second),
                fnum(r.path_error_first),
                fnum(r.path_error_second),
            ]
        })
        .collect();
    write_csv(
        &out_path(&cfg, "kato-order.csv"),
        &[
            "nodes",
            "closure_first",
            "closure_second",
            "path_error_first",
            "path_error_second",
        ],
        &rows,
    )?;
    write_json(
        &out_path(&cfg, "kato-order.json"),
        &Summary::new("kato-order", cfg.clone(), report.clone()),
    )?;
    println!(
        "closure orders: first {}, second {}; path orders: first {}, second {}",
        report.closure_order_first,
        report.closure_order_second,
        report.path_order_first,
        report.path_order_second
    );
    Ok(0)
}

fn cmd_compare(common: &Common, methods: &Option<String>) -> Result<i32> {
    let cfg = resolve(common, &[])?;
    let system = parse_problem(&cfg.problem)?;
    let contour = parse_contour(&cfg.contour, cfg.nodes)?;
    check_exclusion_radius(&contour, &system.singular_points, cfg.exclusion_radius)?;
    let method_names = methods
        .clone()
        .unwrap_or_else(|| "exterior,polar,polar-bvp,conjugation".to_string());
    let methods: Vec<_> = method_names
        .split(',')
        .map(parse_method)
        .collect::<Result<_>>()?;
    let probe = contour.at(0.0);
    let truncation = if cfg.m > 0.0 {
        cfg.m
    } else {
        evans_core::shooting::default_truncation(&system, probe, 1e-8)
    };
    let report = experiments::compare_methods(&system, &contour, &methods, truncation, |m| {
        experiments::method_config(
            m,
            &system,
            probe,
            truncation,
            cfg.abs_tol,
            cfg.rel_tol,
            cfg.bvp_step,
            cfg.homotopy_stages,
        )
    })?;
    let mut header: Vec<String> = vec!["lambda_re".into(), "lambda_im".into()];
    for m in &methods {
        header.push(format!("{}_re", m));
        header.push(format!("{}_im", m));
    }
    header.push("max_rel_diff".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![fnum(r.lambda_re), fnum(r.lambda_im)];
            for (_, re, im) in &r.values {
                row.push(fnum(*re));
                row.push(fnum(*im));
            }
            row.push(fnum(r.max_pairwise_rel_diff));
            row
        })
        .collect();
    write_csv(&out_path(&cfg, "compare-methods.csv"), &header_refs, &rows)?;
    write_json(
        &out_path(&cfg, "compare-methods.json"),
        &Summary::new("compare-methods", cfg.clone(), report.clone()),
    )?;
    println!(
        "max pairwise relative difference over {} nodes: {}",
        report.rows.len(),
        report.max_pairwise_rel_diff
    );
    Ok(0)
}

fn classify_error(err: &anyhow::Error) -> i32 {
    if let Some(core) = err.downcast_ref::<EvansError>() {
        match core {
            EvansError::Usage(_) | EvansError::Dimension(_) | EvansError::Singularity(_) => 1,
            _ => 2,
        }
    } else if err.downcast_ref::<std::num::ParseFloatError>().is_some()
        || err.downcast_ref::<std::num::ParseIntError>().is_some()
    {
        1
    } else {
        let text = format!("{:#}", err);
        // parser and config errors are usage errors
        if text.contains("unknown") || text.contains("config") || text.contains("spec") {
            1
        } else {
            2
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(workers) = std::env::var("EVANS_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; usage problems exit with 1
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Winding(c) => cmd_winding(c),
        Command::Sample(c) => cmd_sample(c),
        Command::ConvergeM { common, m_list } => cmd_converge_m(common, m_list),
        Command::Stiefel {
            common,
            eps,
            h,
            stiefel_m,
        } => cmd_stiefel(common, eps, h, stiefel_m),
        Command::MeshStudy { common, tol, a_list } => cmd_mesh_study(common, tol, a_list),
        Command::KatoOrder { common, j_list } => cmd_kato_order(common, j_list),
        Command::CompareMethods { common, methods } => cmd_compare(common, methods),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {:#}", err);
            std::process::exit(classify_error(&err));
        }
    }
}
