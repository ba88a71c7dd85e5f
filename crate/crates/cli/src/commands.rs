use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use debern::simulation::{pmse_csv, preset, presets, simulate_runs, study_csv, ScenarioSpec};
use debern::{fit as fit_model, DeconvError, DeconvModel, EmConfig, ErrorModel, FitOptions};

use crate::io::{emit, read_column, write_atomic, DataError};
use crate::{usage_error, DensityArgs, FitArgs, SimError, SimulateArgs};

fn trace_path(args: &FitArgs) -> PathBuf {
    args.trace.clone().unwrap_or_else(|| match args.out.parent() {
        Some(dir) => dir.join("trace.csv"),
        None => PathBuf::from("trace.csv"),
    })
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let error = args.error.resolve()?;
    if !(args.zeta.is_finite() && args.zeta >= 0.0) {
        return Err(usage_error(ErrorKind::ValueValidation, "--zeta must be finite and non-negative").into());
    }
    if !(args.tol.is_finite() && args.tol > 0.0) || args.max_iter == 0 {
        return Err(usage_error(ErrorKind::ValueValidation, "--tol must be positive and --max-iter at least 1").into());
    }

    let ys = read_column(&args.input, args.column.as_deref())?;
    log::info!("read {} observations from {}", ys.len(), args.input.display());
    let options = FitOptions {
        support: args.support,
        zeta: args.zeta,
        degrees: args.degrees,
        grid_width: args.grid_width,
        em: EmConfig {
            tol: args.tol,
            max_iter: args.max_iter,
        },
    };

    let started = Instant::now();
    let model = fit_model(&ys, &error, &options).map_err(|e| {
        let hint = matches!(e.root(), DeconvError::ZeroRow { .. })
            .then_some("widen --support or check the error law");
        let err = anyhow::Error::new(e);
        match hint {
            Some(h) => err.context(h),
            None => err,
        }
    })?;
    log::info!("fit finished in {:.2?}", started.elapsed());

    write_atomic(&args.out, &model.to_json()?)?;
    let trace = trace_path(args);
    write_atomic(&trace, &model.trace().to_csv(Some(model.selection())))?;

    let sel = model.selection();
    let (a, b) = model.support();
    println!("degree    {}", model.degree());
    if sel.r_values.is_empty() {
        println!("q_hat     {} (grid too short for a change point)", sel.q_hat);
    } else {
        println!("q_hat     {}", sel.q_hat);
    }
    if let Some(mb) = sel.m_b_hat {
        println!("m_b       {mb}");
    }
    println!("loglik    {:.6}", model.loglik());
    println!("support   [{a}, {b}]");
    if sel.flat_trace {
        println!("note      log-likelihood trace is flat; no change point detected");
    }
    println!("model     {}", args.out.display());
    println!("trace     {}", trace.display());
    Ok(())
}

fn load_model(path: &Path) -> Result<DeconvModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DataError(format!("cannot read {}: {e}", path.display())))?;
    DeconvModel::from_json(&text).with_context(|| format!("invalid model file {}", path.display()))
}

pub fn density(args: &DensityArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let points = usize::try_from(args.grid).map_err(|_| anyhow!("--grid is too large"))?;
    let mut out = String::from("x,f_hat,F_hat\n");
    for (t, f, cdf) in model.grid(points) {
        writeln!(out, "{t},{f},{cdf}")?;
    }
    emit(args.out.as_deref(), &out)
}

fn list_scenarios() -> String {
    let mut out = String::new();
    for p in presets() {
        let _ = writeln!(out, "{:<16} {}", p.name, p.description);
    }
    out
}

pub fn simulate(args: &SimulateArgs, seed: u64) -> Result<()> {
    if args.list_scenarios {
        print!("{}", list_scenarios());
        return Ok(());
    }
    let name = args.scenario.as_deref().unwrap_or_default();
    let Some(preset) = preset(name) else {
        return Err(usage_error(
            ErrorKind::InvalidValue,
            format!("unknown scenario `{name}`; available:\n{}", list_scenarios()),
        )
        .into());
    };
    let sigma0 = args.sigma0.unwrap_or_default();
    let error = match args.error {
        SimError::Normal => ErrorModel::normal(sigma0),
        SimError::Laplace => ErrorModel::laplace(sigma0),
    }
    .map_err(|e| usage_error(ErrorKind::ValueValidation, e))?;
    if args.n < 2 {
        return Err(usage_error(ErrorKind::ValueValidation, "--n must be at least 2").into());
    }
    let runs = usize::try_from(args.runs).map_err(|_| anyhow!("--runs is too large"))?;

    let mut spec = ScenarioSpec::new(preset.name, preset.truth.clone(), error, args.n, runs, seed);
    spec.same_seed_every_run = args.same_seed;
    let estimators = preset.estimators(error, args.degrees);

    let started = Instant::now();
    let set = simulate_runs(&spec, &estimators)?;
    let metrics = set.metrics(runs)?;
    log::info!("{runs} runs finished in {:.2?}", started.elapsed());

    emit(args.out.as_deref(), &study_csv(preset.name, args.n, sigma0, runs, &metrics))?;
    if let Some(path) = &args.pmse_out {
        write_atomic(path, &pmse_csv(&set.grid, &metrics))?;
    }
    Ok(())
}
