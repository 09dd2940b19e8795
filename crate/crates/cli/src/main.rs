//! `nelson2d` — batch front door for the two-dimensional particle–field
//! laboratory. Each subcommand reads one TOML configuration (every key
//! defaulted, unknown keys rejected), runs a seeded deterministic job, and
//! writes `manifest.json` plus CSV/JSON artifacts under the output directory.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 verification
//! failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::Rng;

use nelson2d_core::action::ActionEvaluator;
use nelson2d_core::bounds::{
    asymptotic_table, exp_moment_bound, lower_bound, minimize_renormalized_trial_bound,
    renormalized_upper_bound, AsymptoticRegime, ExpMomentKind, LowerBoundVariant,
};
use nelson2d_core::estimator::{ground_energy, kato_probe};
use nelson2d_core::fock::{flow_check, generator_residual};
use nelson2d_core::kspace::{FieldFunction, RadialGrid};
use nelson2d_core::levy::{sample_increment, sample_jump_path, JumpTable, LevyPath, RngStream};
use nelson2d_core::special::marginal_radial_cdf;
use nelson2d_core::stats::{ks_critical_1pct, ks_statistic};
use nelson2d_core::Vec2;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "nelson2d", version, about, disable_help_subcommand = true)]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. --set model.g=0.5 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Override the RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Draw exact process increments and record their radii.
    Sample,
    /// KS test of sampled radii against the closed-form marginal law.
    DensityCheck,
    /// Check that the pathwise action-decomposition gap shrinks with ε.
    ActionVerify,
    /// Check the coherent-state flow identities on random paths.
    FlowVerify,
    /// Check first-order decay of the discrete generator residual.
    GeneratorVerify,
    /// Monte Carlo ground-energy estimate over the configured time ladder.
    Estimate,
    /// Evaluate the closed-form energy bounds at the configured point.
    Bounds,
    /// Normalized bound ratios along a divergent-parameter grid.
    Asymptotics {
        /// Regime variable: N | g2 | mb-massive | mb-massless.
        #[arg(long)]
        regime: Option<String>,
    },
    /// One-sided check of the exponential moment bound.
    Expmoment,
    /// Estimate sup_x E[∫₀^t f(X^x_s) ds] over a time ladder.
    KatoProbe,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::DensityCheck => "density-check",
            Command::ActionVerify => "action-verify",
            Command::FlowVerify => "flow-verify",
            Command::GeneratorVerify => "generator-verify",
            Command::Estimate => "estimate",
            Command::Bounds => "bounds",
            Command::Asymptotics { .. } => "asymptotics",
            Command::Expmoment => "expmoment",
            Command::KatoProbe => "kato-probe",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let mut cfg = match config::load(cli.config.as_deref(), &cli.sets) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Best-effort failure manifest so the run directory records what
            // happened even when the configuration never parsed.
            let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("run-out"));
            if std::fs::create_dir_all(&out_dir).is_ok() {
                let manifest = serde_json::json!({
                    "subcommand": cli.command.name(),
                    "version": env!("CARGO_PKG_VERSION"),
                    "status": "error",
                    "exit_code": 1,
                    "error": format!("{e:#}"),
                });
                let _ = std::fs::write(
                    out_dir.join("manifest.json"),
                    serde_json::to_string_pretty(&manifest).unwrap_or_default(),
                );
            }
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    let workers = worker_count(&cfg);

    let out_dir = PathBuf::from(&cfg.output_dir);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create output directory {}: {e}", out_dir.display());
        return ExitCode::from(1);
    }

    let started = Instant::now();
    let outcome = run(cli.command.clone(), &cfg, workers, &out_dir);
    let wall = started.elapsed().as_secs_f64();

    let (status, exit) = match &outcome {
        Ok(true) => ("ok", 0u8),
        Ok(false) => ("verification-failed", 2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ("error", 1)
        }
    };
    // The manifest is written unconditionally, including on failure exits.
    if let Err(e) = write_manifest(&out_dir, cli.command.name(), &cfg, workers, wall, status, exit)
    {
        eprintln!("error: cannot write manifest: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(exit)
}

fn worker_count(cfg: &RunConfig) -> usize {
    std::env::var("NELSON2D_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .or(if cfg.workers > 0 { Some(cfg.workers) } else { None })
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    out_dir: &Path,
    subcommand: &str,
    cfg: &RunConfig,
    workers: usize,
    wall_time_s: f64,
    status: &str,
    exit_code: u8,
) -> Result<()> {
    let manifest = serde_json::json!({
        "subcommand": subcommand,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "workers": workers,
        "wall_time_s": wall_time_s,
        "status": status,
        "exit_code": exit_code,
        "config": cfg,
    });
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn csv_writer(out_dir: &Path) -> Result<csv::Writer<std::fs::File>> {
    let path = out_dir.join("results.csv");
    csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))
}

/// Returns Ok(true) on success, Ok(false) on verification failure.
fn run(command: Command, cfg: &RunConfig, workers: usize, out_dir: &Path) -> Result<bool> {
    // The worker pool is scoped per run so a fixed count reproduces artifacts
    // bit-exactly (all reductions are ordered collects).
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building the worker pool")?;
    pool.install(|| match command {
        Command::Sample => cmd_sample(cfg, out_dir),
        Command::DensityCheck => cmd_density_check(cfg, out_dir),
        Command::ActionVerify => cmd_action_verify(cfg, out_dir),
        Command::FlowVerify => cmd_flow_verify(cfg, out_dir),
        Command::GeneratorVerify => cmd_generator_verify(cfg, out_dir),
        Command::Estimate => cmd_estimate(cfg, out_dir),
        Command::Bounds => cmd_bounds(cfg, out_dir),
        Command::Asymptotics { regime } => cmd_asymptotics(cfg, regime, out_dir),
        Command::Expmoment => cmd_expmoment(cfg, out_dir),
        Command::KatoProbe => cmd_kato_probe(cfg, out_dir),
    })
}

fn cmd_sample(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let t = *cfg
        .estimator
        .t_ladder
        .last()
        .ok_or_else(|| anyhow!("[estimator] t_ladder must not be empty"))?;
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["index", "x", "y", "radius"])?;
    let mut rng = RngStream::new(cfg.seed, 0).rng();
    for i in 0..cfg.estimator.n_paths {
        let inc = sample_increment(t, cfg.model.m_p, &mut rng);
        wtr.write_record([
            i.to_string(),
            format!("{:.17e}", inc.x),
            format!("{:.17e}", inc.y),
            format!("{:.17e}", inc.norm()),
        ])?;
    }
    wtr.flush()?;
    Ok(true)
}

fn cmd_density_check(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let t = *cfg
        .estimator
        .t_ladder
        .last()
        .ok_or_else(|| anyhow!("[estimator] t_ladder must not be empty"))?;
    let n = cfg.estimator.n_paths;
    let m_p = cfg.model.m_p;
    let mut rng = RngStream::new(cfg.seed, 0).rng();
    let mut radii: Vec<f64> = (0..n)
        .map(|_| sample_increment(t, m_p, &mut rng).norm())
        .collect();
    let ks = ks_statistic(&mut radii, |r| marginal_radial_cdf(r, t, m_p));
    let critical = ks_critical_1pct(n);
    let pass = ks < critical;
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["m_p", "t", "n", "ks", "critical_1pct", "pass"])?;
    wtr.write_record([
        m_p.to_string(),
        t.to_string(),
        n.to_string(),
        format!("{ks:.6e}"),
        format!("{critical:.6e}"),
        pass.to_string(),
    ])?;
    wtr.flush()?;
    println!("density-check: KS {ks:.3e} vs 1% critical {critical:.3e} -> {}",
        if pass { "pass" } else { "FAIL" });
    Ok(pass)
}

fn cmd_action_verify(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let params = cfg.model.params()?;
    if !params.lambda.is_finite() {
        bail!("action-verify needs a finite ultraviolet cutoff (set model.lambda)");
    }
    if cfg.verify.eps_ladder.is_empty()
        || cfg.verify.eps_ladder.windows(2).any(|w| w[1] >= w[0])
    {
        bail!("[verify] eps_ladder must be strictly decreasing");
    }
    let t = cfg.verify.horizon;
    let mut means = Vec::new();
    for (k, &eps) in cfg.verify.eps_ladder.iter().enumerate() {
        let evaluator = ActionEvaluator::with_defaults(&params, eps)
            .map_err(|e| anyhow!("{e}"))?;
        let table = JumpTable::new(params.m_p, eps, cfg.sampler.table_resolution)
            .map_err(|e| anyhow!("{e}"))?;
        use rayon::prelude::*;
        let gaps: Vec<f64> = (0..cfg.verify.n_paths as u64)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let mut rng = RngStream::new(cfg.seed.wrapping_add(i), k as u64).rng();
                let path = sample_jump_path(
                    t,
                    params.m_p,
                    eps,
                    params.n_particles,
                    cfg.sampler.gaussian_correction,
                    &table,
                    &mut rng,
                )
                .map_err(|e| anyhow!("{e}"))?;
                let x: Vec<Vec2> = (0..params.n_particles)
                    .map(|_| Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
                    .collect();
                let point = evaluator
                    .ladder(&x, &path, &[t], true)
                    .map_err(|e| anyhow!("{e}"))?[0];
                Ok((point.direct.expect("finite band requested") - point.u()).abs())
            })
            .collect::<Result<_>>()?;
        means.push(gaps.iter().sum::<f64>() / gaps.len() as f64);
    }
    let pass = means.windows(2).all(|w| w[1] < w[0]);
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["eps", "mean_gap", "n_paths"])?;
    for (&eps, &gap) in cfg.verify.eps_ladder.iter().zip(&means) {
        wtr.write_record([
            eps.to_string(),
            format!("{gap:.6e}"),
            cfg.verify.n_paths.to_string(),
        ])?;
    }
    wtr.flush()?;
    println!(
        "action-verify: mean gaps {:?} over ε {:?} -> {}",
        means,
        cfg.verify.eps_ladder,
        if pass { "monotone, pass" } else { "not monotone, FAIL" }
    );
    Ok(pass)
}

fn cmd_flow_verify(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let params = cfg.model.params()?;
    if !params.lambda.is_finite() {
        bail!("flow-verify needs a finite ultraviolet cutoff (set model.lambda)");
    }
    let grid = RadialGrid::for_cutoffs(&cfg.grid.spec(), &params).map_err(|e| anyhow!("{e}"))?;
    let eps = cfg.sampler.eps.max(0.2); // flow checks don't need tiny jumps
    let table = JumpTable::new(params.m_p, eps, cfg.sampler.table_resolution)
        .map_err(|e| anyhow!("{e}"))?;
    let horizon = cfg.verify.horizon;
    use rayon::prelude::*;
    let rows: Vec<(f64, f64, f64)> = (0..cfg.verify.n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, f64)> {
            let mut rng = RngStream::new(cfg.seed.wrapping_add(i), 1).rng();
            let path = sample_jump_path(
                horizon,
                params.m_p,
                eps,
                params.n_particles,
                false,
                &table,
                &mut rng,
            )
            .map_err(|e| anyhow!("{e}"))?;
            let x: Vec<Vec2> = (0..params.n_particles)
                .map(|_| Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
                .collect();
            let s = rng.gen_range(0.25..0.45) * horizon;
            let t = rng.gen_range(0.25..0.45) * horizon;
            flow_check(&params, &grid, &x, &path, s, t).map_err(|e| anyhow!("{e}"))
        })
        .collect::<Result<_>>()?;
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["path", "r2", "r3", "r4"])?;
    for (i, (r2, r3, r4)) in rows.iter().enumerate() {
        wtr.write_record([
            i.to_string(),
            format!("{r2:.6e}"),
            format!("{r3:.6e}"),
            format!("{r4:.6e}"),
        ])?;
    }
    wtr.flush()?;
    let r2max = rows.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let r3max = rows.iter().map(|r| r.1).fold(0.0f64, f64::max);
    let pass = r2max < 1e-10 && r3max < 1e-10;
    println!(
        "flow-verify: max residuals r2={r2max:.3e} r3={r3max:.3e} over {} paths -> {}",
        rows.len(),
        if pass { "pass" } else { "FAIL" }
    );
    Ok(pass)
}

fn cmd_generator_verify(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let params = cfg.model.params()?;
    if !params.lambda.is_finite() {
        bail!("generator-verify needs a finite ultraviolet cutoff (set model.lambda)");
    }
    let grid = RadialGrid::for_cutoffs(&cfg.grid.spec(), &params).map_err(|e| anyhow!("{e}"))?;
    let h1 = FieldFunction::radial_from_fn(grid.clone(), |r| {
        Complex64::new(0.3 * (-r).exp(), 0.0)
    });
    let h2 = FieldFunction::radial_from_fn(grid.clone(), |r| {
        Complex64::new(0.2 / (1.0 + r * r), 0.0)
    });
    let eps = cfg.sampler.eps.max(0.3);
    let table = JumpTable::new(params.m_p, eps, cfg.sampler.table_resolution)
        .map_err(|e| anyhow!("{e}"))?;
    let n_paths = cfg.verify.n_paths.clamp(2, 20) as u64;
    let steps = cfg.verify.steps.max(4);
    let potential = cfg.potential.spec()?;
    let pot = move |x: &[Vec2]| potential.eval(x);
    let (mut coarse, mut fine) = (0.0, 0.0);
    for i in 0..n_paths {
        let mut rng = RngStream::new(cfg.seed.wrapping_add(i), 2).rng();
        let path = if i % 2 == 0 {
            sample_jump_path(1.0, params.m_p, eps, params.n_particles, false, &table, &mut rng)
                .map_err(|e| anyhow!("{e}"))?
        } else {
            LevyPath::constant(params.n_particles, 1.0)
        };
        let x: Vec<Vec2> = (0..params.n_particles)
            .map(|_| Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
            .collect();
        coarse += generator_residual(&params, &grid, &x, &path, 0.8, &h1, &h2, &pot, steps)
            .map_err(|e| anyhow!("{e}"))?;
        fine += generator_residual(&params, &grid, &x, &path, 0.8, &h1, &h2, &pot, 2 * steps)
            .map_err(|e| anyhow!("{e}"))?;
    }
    let ratio = fine / coarse;
    let pass = (0.4..=0.6).contains(&ratio);
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["steps", "mean_residual"])?;
    wtr.write_record([steps.to_string(), format!("{:.6e}", coarse / n_paths as f64)])?;
    wtr.write_record([(2 * steps).to_string(), format!("{:.6e}", fine / n_paths as f64)])?;
    wtr.flush()?;
    println!(
        "generator-verify: residual ratio {ratio:.3} for steps {steps}→{} -> {}",
        2 * steps,
        if pass { "pass" } else { "FAIL" }
    );
    Ok(pass)
}

fn cmd_estimate(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let params = cfg.model.params()?;
    let report = ground_energy(
        &params,
        &cfg.estimator.kac_config(&cfg.sampler),
        &cfg.potential.spec()?,
        &cfg.estimator.t_ladder,
        &cfg.weight.spec()?,
        RngStream::new(cfg.seed, 0),
    )
    .map_err(|e| anyhow!("{e}"))?;
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["t", "mean", "stderr", "n_eff", "energy", "energy_err"])?;
    for row in &report.rows {
        wtr.write_record([
            row.t.to_string(),
            format!("{:.10e}", row.mean),
            format!("{:.10e}", row.stderr),
            row.n_eff.to_string(),
            row.energy.map_or(String::new(), |e| format!("{e:.10e}")),
            row.energy_err.map_or(String::new(), |e| format!("{e:.10e}")),
        ])?;
    }
    wtr.flush()?;
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    match (report.extrapolated, report.extrapolated_err) {
        (Some(e), Some(se)) => println!("estimate: energy {e:.6} ± {se:.6} ({})", report.method),
        _ => println!("estimate: no usable ladder points ({})", report.method),
    }
    Ok(true)
}

fn cmd_bounds(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let params = cfg.model.params()?;
    let constants = cfg.bounds.constants()?;
    let mut rows: Vec<(String, String)> = Vec::new();
    let small = lower_bound(&params, &constants, LowerBoundVariant::SmallCoupling)
        .map_err(|e| anyhow!("{e}"))?;
    rows.push(("lower_small_coupling".into(), format!("{small:.10e}")));
    if let Ok(v) = lower_bound(&params, &constants, LowerBoundVariant::LargeCoupling) {
        rows.push(("lower_large_coupling".into(), format!("{v:.10e}")));
    }
    if let Ok(v) = lower_bound(&params, &constants, LowerBoundVariant::LargeCouplingMassive) {
        rows.push(("lower_large_coupling_massive".into(), format!("{v:.10e}")));
    }
    if let Ok(v) = renormalized_upper_bound(&params, constants.theta, &constants) {
        rows.push(("upper_closed_form".into(), format!("{v:.10e}")));
    }
    let s_grid = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0];
    let lambda_grid = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
    if let Ok((v, s, lam)) = minimize_renormalized_trial_bound(&params, &s_grid, &lambda_grid) {
        rows.push(("upper_trial_minimized".into(), format!("{v:.10e}")));
        rows.push(("upper_trial_s".into(), s.to_string()));
        rows.push(("upper_trial_lambda".into(), lam.to_string()));
    }
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["bound", "value"])?;
    for (k, v) in &rows {
        wtr.write_record([k, v])?;
    }
    wtr.flush()?;
    for (k, v) in &rows {
        println!("bounds: {k} = {v}");
    }
    Ok(true)
}

fn cmd_asymptotics(cfg: &RunConfig, regime_flag: Option<String>, out_dir: &Path) -> Result<bool> {
    let params = cfg.model.params()?;
    let name = regime_flag.unwrap_or_else(|| cfg.asymptotics.regime.clone());
    let regime = match name.as_str() {
        "N" => AsymptoticRegime::ParticleNumber,
        "g2" => AsymptoticRegime::Coupling,
        "mb-massive" => AsymptoticRegime::FieldMassMassive,
        "mb-massless" => AsymptoticRegime::FieldMassMassless,
        other => bail!("unknown regime {other:?} (expected N, g2, mb-massive or mb-massless)"),
    };
    let rows = asymptotic_table(regime, &cfg.asymptotics.grid, &params, cfg.asymptotics.theta)
        .map_err(|e| anyhow!("{e}"))?;
    let target = regime.target(&params);
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["point", "lower_ratio", "upper_ratio", "target"])?;
    for row in &rows {
        wtr.write_record([
            row.point.to_string(),
            format!("{:.17e}", row.lower_ratio),
            format!("{:.17e}", row.upper_ratio),
            format!("{target:.17e}"),
        ])?;
    }
    wtr.flush()?;
    println!("asymptotics: {} rows toward target {target:.6}", rows.len());
    Ok(true)
}

fn cmd_expmoment(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let params = cfg.model.params()?;
    let constants = cfg.bounds.constants()?;
    let kind = match cfg.expmoment.kind.as_str() {
        "small-coupling" => ExpMomentKind::SmallCoupling,
        "large-coupling" => ExpMomentKind::LargeCoupling,
        other => bail!(
            "[expmoment] unknown kind {other:?} (expected \"small-coupling\" or \"large-coupling\")"
        ),
    };
    let (p, t) = (cfg.expmoment.p, cfg.expmoment.t);
    let bound = exp_moment_bound(&params, &constants, p, t, kind).map_err(|e| anyhow!("{e}"))?;

    // MC estimate of E[sup_{s≤t} e^{p·u_s}] on a 16-point ladder.
    let eps = cfg.sampler.eps;
    let evaluator = ActionEvaluator::with_defaults(&params, eps).map_err(|e| anyhow!("{e}"))?;
    let table = JumpTable::new(params.m_p, eps, cfg.sampler.table_resolution)
        .map_err(|e| anyhow!("{e}"))?;
    let ts: Vec<f64> = (1..=16).map(|i| t * i as f64 / 16.0).collect();
    use rayon::prelude::*;
    let sups: Vec<f64> = (0..cfg.expmoment.n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = RngStream::new(cfg.seed, i).rng();
            let path = sample_jump_path(
                t,
                params.m_p,
                eps,
                params.n_particles,
                cfg.sampler.gaussian_correction,
                &table,
                &mut rng,
            )
            .map_err(|e| anyhow!("{e}"))?;
            let x: Vec<Vec2> = (0..params.n_particles)
                .map(|_| Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
                .collect();
            let ladder = evaluator
                .ladder(&x, &path, &ts, false)
                .map_err(|e| anyhow!("{e}"))?;
            Ok(ladder
                .iter()
                .map(|pt| (p * pt.u()).exp())
                .fold(1.0f64, f64::max))
        })
        .collect::<Result<_>>()?;
    let mc = sups.iter().sum::<f64>() / sups.len() as f64;
    let pass = mc <= bound;
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["p", "t", "mc_sup_moment", "bound", "pass"])?;
    wtr.write_record([
        p.to_string(),
        t.to_string(),
        format!("{mc:.6e}"),
        format!("{bound:.6e}"),
        pass.to_string(),
    ])?;
    wtr.flush()?;
    println!(
        "expmoment: MC {mc:.4e} vs bound {bound:.4e} -> {}",
        if pass { "pass" } else { "FAIL" }
    );
    Ok(pass)
}

fn cmd_kato_probe(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let f = cfg.potential.site_fn()?;
    let n = cfg.kato.x_points.max(1);
    let mut x_grid = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let frac = |k: usize| {
                if n == 1 {
                    0.0
                } else {
                    -1.0 + 2.0 * k as f64 / (n - 1) as f64
                }
            };
            x_grid.push(Vec2::new(cfg.kato.x_max * frac(i), cfg.kato.x_max * frac(j)));
        }
    }
    let rows = kato_probe(
        cfg.model.m_p,
        &cfg.estimator.kac_config(&cfg.sampler),
        &*f,
        &cfg.kato.t_ladder,
        &x_grid,
        RngStream::new(cfg.seed, 0),
    )
    .map_err(|e| anyhow!("{e}"))?;
    let mut wtr = csv_writer(out_dir)?;
    wtr.write_record(["t", "sup_estimate"])?;
    for row in &rows {
        wtr.write_record([row.t.to_string(), format!("{:.6e}", row.sup_estimate)])?;
    }
    wtr.flush()?;
    println!("kato-probe: {} ladder rows written", rows.len());
    Ok(true)
}
