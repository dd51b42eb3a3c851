//! Subcommand execution: resolve defaults, run the core, write outputs and the manifest.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use sgdlab_core::dynamics::{self, default_stride, hitting_times_json, trajectory_csv, Init, SgdConfig};
use sgdlab_core::experiments::{self, cell_stream, default_refutation_alpha, ScanConfig, StepRule};
use sgdlab_core::hermite::{self, HermiteProfile, DEFAULT_EXPONENT_TOL, DEFAULT_QUAD_ORDER, DEFAULT_TRUNCATION};
use sgdlab_core::models::verify_assumption_b;
use sgdlab_core::scalar::fmt_real;
use sgdlab_core::theory::{self, PredictionInputs, RegimePrediction};
use sgdlab_core::{Family, ModelSpec};

use crate::config::{
    missing, parse_activation, BudgetRuleConfig, Command, NumOrTheory, RunConfig, StepRuleConfig,
};
use crate::manifest::{unix_now, OutputSet, RunManifest, SeedRecord, MANIFEST_FILE};
use crate::{CliError, EXIT_OK, EXIT_SCALING_NOT_OBSERVED};

/// Result of a successful command.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub manifest: RunManifest,
}

/// What a command hands back for the manifest.
struct Report {
    config: RunConfig,
    resolved: serde_json::Value,
    seeds: SeedRecord,
    exit_code: i32,
}

/// Runs a resolved configuration inside a pool of `threads` workers.
pub fn execute(cfg: RunConfig) -> Result<Outcome, CliError> {
    let command = cfg.command.ok_or_else(|| missing("command"))?;
    if command.needs_seed() {
        cfg.master_seed()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads())
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    let mut out = OutputSet::new(&cfg.output_dir())?;
    let started = unix_now();
    let clock = Instant::now();
    let result = pool.install(|| match command {
        Command::Hermite => hermite_cmd(&cfg, &mut out),
        Command::Predict => predict_cmd(&cfg, &mut out),
        Command::Simulate => simulate_cmd(&cfg, &mut out),
        Command::Scan => scan_cmd(&cfg, &mut out),
        Command::Lln => lln_cmd(&cfg, &mut out),
        Command::Refute => refute_cmd(&cfg, &mut out),
        Command::Compare => compare_cmd(&cfg, &mut out),
        Command::VerifyB => verify_b_cmd(&cfg, &mut out),
    });
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            out.discard();
            return Err(e);
        }
    };
    let manifest = RunManifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: report.config,
        resolved: report.resolved,
        seeds: report.seeds,
        started_unix: started,
        finished_unix: unix_now(),
        runtime_seconds: clock.elapsed().as_secs_f64(),
        outputs: out.digests()?,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    let path = out.dir().join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(Outcome { exit_code: report.exit_code, manifest })
}

/// Copy of the configuration with the runtime-wide defaults written in.
fn echo(cfg: &RunConfig) -> RunConfig {
    let mut c = cfg.clone();
    c.output_dir = Some(cfg.output_dir());
    c.threads = Some(cfg.threads());
    c.force = Some(cfg.force.unwrap_or(false));
    if let Some(m) = &cfg.model {
        c.model = Some(m.echo());
    }
    c
}

fn no_seeds() -> SeedRecord {
    SeedRecord { master_seed: None, scheme: "deterministic".into(), streams: Vec::new() }
}

fn grid_seeds(master: u64, grid: &[usize], seeds: usize) -> SeedRecord {
    SeedRecord {
        master_seed: Some(master),
        scheme: "ChaCha8 seeded with master_seed; stream = (N << 24) | seed_index".into(),
        streams: grid
            .iter()
            .flat_map(|&n| (0..seeds).map(move |s| (format!("N={n},seed={s}"), cell_stream(n, s))))
            .collect(),
    }
}

fn step_value(v: &Option<NumOrTheory>, path: &str) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) => x.value(path),
        None => Err(missing(path)),
    }
}

fn hermite_cmd(cfg: &RunConfig, out: &mut OutputSet) -> Result<Report, CliError> {
    let model = cfg.model.clone().unwrap_or_default();
    let act = model.teacher()?;
    let block = cfg.hermite.clone().unwrap_or_default();
    let j = block.truncation.unwrap_or(DEFAULT_TRUNCATION);
    let q = block.quad_order.unwrap_or(DEFAULT_QUAD_ORDER);
    let profile = HermiteProfile::from_activation(&act, j, q)?;
    let k = hermite::information_exponent(&profile, DEFAULT_EXPONENT_TOL).ok();
    let population = hermite::supervised_population_profile::<f64>(&profile).ok().map(|p| p.summary());
    let mut csv = String::from("k,u_k\n");
    for (i, u) in profile.coefficients.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", fmt_real(*u)));
    }
    out.write("hermite.csv", &csv)?;
    out.write_json(
        "hermite.json",
        &json!({
            "activation": act.name(),
            "information_exponent": k,
            "l2_norm": profile.l2_norm_estimate,
            "tail_mass": profile.tail_mass,
            "tail_even": profile.tail_even,
            "tail_odd": profile.tail_odd,
            "relative_tail": profile.relative_tail(),
            "population": population,
        }),
    )?;
    let mut config = echo(cfg);
    let h = config.hermite_mut();
    h.truncation = Some(j);
    h.quad_order = Some(q);
    Ok(Report { config, resolved: json!({ "information_exponent": k }), seeds: no_seeds(), exit_code: EXIT_OK })
}

fn predict_cmd(cfg: &RunConfig, out: &mut OutputSet) -> Result<Report, CliError> {
    let block = cfg.predict.clone().unwrap_or_default();
    let n = block.n.ok_or_else(|| missing("predict.n"))?;
    let (k, drift) = match (&cfg.model, block.k) {
        (_, Some(k)) => (k, block.drift_coefficient.unwrap_or(1.0)),
        (Some(m), None) => {
            let profile = ModelSpec::new(m.family()?, n)?.population_profile()?;
            (profile.info_exponent(), block.drift_coefficient.unwrap_or(profile.drift_coefficient()))
        }
        (None, None) => return Err(missing("predict.k")),
    };
    let mut inputs = PredictionInputs::new(k, n, drift);
    inputs.alpha = block.alpha;
    inputs.lbar = block.lbar.unwrap_or(1.0);
    inputs.eta = block.eta.unwrap_or(0.5);
    inputs.m0 = block.m0;
    inputs.gamma = block.gamma.unwrap_or(theory::DEFAULT_GAMMA);
    inputs.big_k = block.big_k.unwrap_or(theory::DEFAULT_K);
    inputs.d = block.d.unwrap_or(1.0);
    let prediction = RegimePrediction::compute(&inputs)?;
    let text = serde_json::to_string_pretty(&prediction).map_err(|e| CliError::Io(e.to_string()))?;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    out.write_json("prediction.json", &prediction)?;
    let mut config = echo(cfg);
    let p = config.predict_mut();
    p.k = Some(k);
    p.drift_coefficient = Some(drift);
    p.lbar = Some(inputs.lbar);
    p.alpha = Some(prediction.alpha);
    p.eta = Some(inputs.eta);
    p.m0 = Some(prediction.m0);
    p.gamma = Some(inputs.gamma);
    p.big_k = Some(inputs.big_k);
    p.d = Some(inputs.d);
    Ok(Report {
        config,
        resolved: json!({ "delta_recommended": prediction.delta_recommended, "alpha": prediction.alpha }),
        seeds: no_seeds(),
        exit_code: EXIT_OK,
    })
}

fn simulate_cmd(cfg: &RunConfig, out: &mut OutputSet) -> Result<Report, CliError> {
    let seed = cfg.master_seed()?;
    let force = cfg.force.unwrap_or(false);
    let family = cfg.model.as_ref().ok_or_else(|| missing("model"))?.family()?;
    let d = cfg.dynamics.clone().unwrap_or_default();
    let n = d.n.ok_or_else(|| missing("dynamics.n"))?;
    let model = ModelSpec::new(family, n)?;
    let profile = model.population_profile()?;
    profile.require_assumption_a(force)?;
    let k = profile.info_exponent();
    let drift = profile.drift_coefficient();

    let delta_in = step_value(&d.delta, "dynamics.delta")?;
    let alpha_in = match &d.alpha {
        Some(a) => a.value("dynamics.alpha")?,
        None if d.steps.is_some() => Some(0.0),
        None => return Err(missing("dynamics.alpha")),
    };
    let mut lbar = None;
    let alpha = match alpha_in {
        Some(a) => a,
        None => {
            let l = experiments::estimate_lbar(&model, seed)?;
            lbar = Some(l);
            theory::default_alpha(n, k, theory::delta_bar(n, k, drift, l, theory::DEFAULT_K, theory::DEFAULT_GAMMA)?)?
        }
    };
    let delta = match delta_in {
        Some(v) => v,
        None => {
            let l = match lbar {
                Some(l) => l,
                None => experiments::estimate_lbar(&model, seed)?,
            };
            lbar = Some(l);
            theory::recommended_delta(n, k, alpha, drift, l, theory::DEFAULT_K)?
        }
    };
    let init = match d.init.as_deref().unwrap_or("uniform") {
        "uniform" => Init::UniformUpperHalf,
        "fixed" => Init::FixedCorrelation(d.m0.ok_or_else(|| missing("dynamics.m0"))?),
        other => return Err(CliError::Config(format!("dynamics.init: expected \"uniform\" or \"fixed\", got \"{other}\""))),
    };
    let mut run = SgdConfig::new(n, delta, alpha);
    if let Some(steps) = d.steps {
        run = run.with_steps(steps);
    }
    let stride = d.stride.unwrap_or(default_stride(run.total_steps));
    let thresholds = d.thresholds.clone().unwrap_or_else(|| vec![0.5]);
    let symmetric = d.sign_symmetric.unwrap_or_else(|| profile.is_even());
    let diagnostics = d.diagnostics.unwrap_or(false);
    let run = run
        .with_init(init)
        .with_stride(stride)
        .with_thresholds(thresholds.clone())
        .with_seed(seed, 0)
        .with_diagnostics(diagnostics)
        .with_stop_at(d.stop_at)
        .with_sign_symmetric(symmetric);
    let traj = dynamics::run_online_sgd(&model, &run)?;
    out.write("trajectory.csv", &trajectory_csv(&traj))?;
    out.write_json("hitting_times.json", &hitting_times_json(&traj))?;
    out.write_json(
        "summary.json",
        &json!({
            "family": model.family().name(),
            "n": n,
            "information_exponent": k,
            "drift_coefficient": drift,
            "delta": delta,
            "alpha": run.alpha,
            "total_steps": run.total_steps,
            "steps_taken": traj.steps_taken,
            "stopped_early": traj.stopped_early,
            "initial_m": traj.initial_m(),
            "final_m": traj.final_m,
            "max_m": traj.max_m,
            "max_abs_m": traj.max_abs_m,
            "rejections": model.rejections(),
        }),
    )?;
    let mut config = echo(cfg);
    let dy = config.dynamics_mut();
    dy.delta = Some(NumOrTheory::Value(delta));
    dy.alpha = Some(NumOrTheory::Value(run.alpha));
    dy.steps = Some(run.total_steps);
    dy.init = Some(match init {
        Init::UniformUpperHalf => "uniform".into(),
        Init::FixedCorrelation(_) => "fixed".into(),
    });
    dy.thresholds = Some(thresholds);
    dy.stride = Some(stride);
    dy.diagnostics = Some(diagnostics);
    dy.sign_symmetric = Some(symmetric);
    Ok(Report {
        config,
        resolved: json!({ "delta": delta, "alpha": run.alpha, "total_steps": run.total_steps, "lbar": lbar }),
        seeds: SeedRecord {
            master_seed: Some(seed),
            scheme: "ChaCha8 seeded with master_seed on stream 0".into(),
            streams: vec![("run".into(), 0)],
        },
        exit_code: EXIT_OK,
    })
}

fn scan_cmd(cfg: &RunConfig, out: &mut OutputSet) -> Result<Report, CliError> {
    let seed = cfg.master_seed()?;
    let family = cfg.model.as_ref().ok_or_else(|| missing("model"))?.family()?;
    let e = cfg.experiment.clone().unwrap_or_default();
    let grid = e.n_grid.clone().ok_or_else(|| missing("experiment.n_grid"))?;
    let delta_cfg = e.delta.clone().unwrap_or(StepRuleConfig::Keyword("theory".into()));
    let alpha_cfg = e.alpha.clone().unwrap_or(BudgetRuleConfig::Keyword("theory".into()));
    let mut scan = ScanConfig::new(family, grid.clone(), e.seeds.unwrap_or(20));
    scan.delta_rule = delta_cfg.resolve("experiment.delta")?;
    scan.alpha_rule = alpha_cfg.resolve("experiment.alpha", e.budget_factor())?;
    scan.eta = e.eta.unwrap_or(0.5);
    scan.extra_thresholds = e.extra_thresholds.clone().unwrap_or_default();
    if let Some(m0) = e.m0 {
        scan.init = Init::FixedCorrelation(m0);
    }
    scan.master_seed = seed;
    scan.force = cfg.force.unwrap_or(false);
    let result = experiments::scaling_scan(&scan)?;
    out.write("cells.csv", &result.cells_csv())?;
    out.write("plot.csv", &result.plot_csv())?;
    out.write_json(
        "summary.json",
        &json!({
            "family": result.family,
            "information_exponent": result.info_exponent,
            "eta": result.eta,
            "grid": result.grid,
            "slope": result.slope,
            "ratio_spread": result.ratio_spread,
            "scaling_not_observed": result.scaling_not_observed,
        }),
    )?;
    let mut config = echo(cfg);
    let ex = config.experiment_mut();
    ex.seeds = Some(scan.seeds_per_cell);
    ex.eta = Some(scan.eta);
    ex.delta = Some(delta_cfg);
    ex.alpha = Some(alpha_cfg);
    ex.budget_factor = Some(e.budget_factor());
    ex.extra_thresholds = Some(scan.extra_thresholds.clone());
    let resolved: Vec<_> = result.grid.iter().map(|g| json!({ "n": g.n, "delta": g.delta, "alpha": g.alpha, "budget": g.budget })).collect();
    if result.scaling_not_observed {
        log::warn!("scaling not observed: every seed censored at some N");
    }
    Ok(Report {
        config,
        resolved: json!({ "grid": resolved }),
        seeds: grid_seeds(seed, &grid, scan.seeds_per_cell),
        exit_code: if result.scaling_not_observed { EXIT_SCALING_NOT_OBSERVED } else { EXIT_OK },
    })
}

fn lln_cmd(cfg: &RunConfig, out: &mut OutputSet) -> Result<Report, CliError> {
    let seed = cfg.master_seed()?;
    let family = cfg.model.as_ref().ok_or_else(|| missing("model"))?.family()?;
    let e = cfg.experiment.clone().unwrap_or_default();
    let grid = e.n_grid.clone().ok_or_else(|| missing("experiment.n_grid"))?;
    let delta_cfg = e.delta.clone().ok_or_else(|| missing("experiment.delta"))?;
    let rule = delta_cfg.resolve("experiment.delta")?;
    let alpha = match &e.alpha {
        Some(BudgetRuleConfig::Value(a)) => *a,
        Some(_) => return Err(CliError::Config("experiment.alpha: lln takes a single number".into())),
        None => return Err(missing("experiment.alpha")),
    };
    let m0 = e.m0.unwrap_or(0.5);
    let seeds = e.seeds.unwrap_or(20);
    let result = experiments::lln_experiment(&family, &grid, m0, &rule, alpha, seeds, seed)?;
    let mut csv = String::from("N,seed,sup_deviation\n");
    for row in &result.rows {
        for (s, d) in row.deviations.iter().enumerate() {
            csv.push_str(&format!("{},{s},{}\n", row.n, fmt_real(*d)));
        }
    }
    out.write("lln.csv", &csv)?;
    out.write("plot.csv", &result.plot_csv())?;
    let rows: Vec<_> = result
        .rows
        .iter()
        .map(|r| json!({ "n": r.n, "delta": r.delta, "alpha": r.alpha, "median": r.median, "q25": r.q25, "q75": r.q75 }))
        .collect();
    out.write_json("summary.json", &json!({ "m0": m0, "rows": rows, "strictly_decreasing": result.is_strictly_decreasing() }))?;
    let mut config = echo(cfg);
    let ex = config.experiment_mut();
    ex.m0 = Some(m0);
    ex.seeds = Some(seeds);
    let deltas: Vec<f64> = result.rows.iter().map(|r| r.delta).collect();
    Ok(Report { config, resolved: json!({ "delta": deltas }), seeds: grid_seeds(seed, &grid, seeds), exit_code: EXIT_OK })
}

fn refute_cmd(cfg: &RunConfig, out: &mut OutputSet) -> Result<Report, CliError> {
    let seed = cfg.master_seed()?;
    let family = cfg.model.as_ref().ok_or_else(|| missing("model"))?.family()?;
    let d = cfg.dynamics.clone().unwrap_or_default();
    let n = d.n.ok_or_else(|| missing("dynamics.n"))?;
    let delta = step_value(&d.delta, "dynamics.delta")?
        .ok_or_else(|| CliError::Config("dynamics.delta: refute needs a number".into()))?;
    let k = ModelSpec::new(family.clone(), n)?.population_profile()?.info_exponent();
    let alpha = match &d.alpha {
        Some(a) => match a.value("dynamics.alpha")? {
            Some(v) => v,
            None => default_refutation_alpha(n, k)?,
        },
        None => default_refutation_alpha(n, k)?,
    };
    let e = cfg.experiment.clone().unwrap_or_default();
    let eta = e.eta.unwrap_or(0.1);
    let seeds = e.seeds.unwrap_or(50);
    let r = experiments::refutation_experiment(&family, n, alpha, delta, eta, seeds, seed)?;
    let mut csv = String::from("seed,max_abs_m,final_m\n");
    for (s, (a, b)) in r.max_m.iter().zip(&r.final_m).enumerate() {
        csv.push_str(&format!("{s},{},{}\n", fmt_real(*a), fmt_real(*b)));
    }
    out.write("refute.csv", &csv)?;
    out.write_json(
        "summary.json",
        &json!({
            "n": n, "alpha": alpha, "delta": delta, "eta": eta, "seeds": seeds,
            "alpha_critical": theory::alpha_critical(n, k)?,
            "exceed_fraction": r.exceed_fraction,
            "recovery_fraction": r.recovery_fraction,
            "recovery_level": r.recovery_level,
        }),
    )?;
    let mut config = echo(cfg);
    config.dynamics_mut().alpha = Some(NumOrTheory::Value(alpha));
    let ex = config.experiment_mut();
    ex.eta = Some(eta);
    ex.seeds = Some(seeds);
    Ok(Report { config, resolved: json!({ "alpha": alpha }), seeds: grid_seeds(seed, &[n], seeds), exit_code: EXIT_OK })
}

fn compare_cmd(cfg: &RunConfig, out: &mut OutputSet) -> Result<Report, CliError> {
    let seed = cfg.master_seed()?;
    let e = cfg.experiment.clone().unwrap_or_default();
    let names = e.activations.clone().ok_or_else(|| missing("experiment.activations"))?;
    let acts = names.iter().map(|a| parse_activation(a, "experiment.activations")).collect::<Result<Vec<_>, _>>()?;
    let d = cfg.dynamics.clone().unwrap_or_default();
    let n = d.n.ok_or_else(|| missing("dynamics.n"))?;
    let number = |v: &Option<NumOrTheory>, path: &str| -> Result<f64, CliError> {
        step_value(v, path)?.ok_or_else(|| CliError::Config(format!("{path}: compare needs a number")))
    };
    let alpha = number(&d.alpha, "dynamics.alpha")?;
    let delta = number(&d.delta, "dynamics.delta")?;
    let level = e.level.unwrap_or(0.9);
    let seeds = e.seeds.unwrap_or(20);
    let r = experiments::same_data_comparison(&acts, n, alpha, delta, level, seeds, seed)?;
    let mut csv = String::from("seed,activation,tau\n");
    for (s, row) in r.taus.iter().enumerate() {
        for (name, tau) in r.activations.iter().zip(row) {
            csv.push_str(&format!("{s},{name},{}\n", tau.map(|t| t.to_string()).unwrap_or_default()));
        }
    }
    out.write("compare.csv", &csv)?;
    out.write_json(
        "summary.json",
        &json!({ "activations": r.activations, "n": n, "alpha": alpha, "delta": delta, "level": level, "ordered_fraction": r.ordered_fraction }),
    )?;
    let mut config = echo(cfg);
    let ex = config.experiment_mut();
    ex.level = Some(level);
    ex.seeds = Some(seeds);
    Ok(Report { config, resolved: json!({}), seeds: grid_seeds(seed, &[n], seeds), exit_code: EXIT_OK })
}

#[derive(Serialize)]
struct ProbeRow {
    m: f64,
    directional: f64,
    directional_se: f64,
    moment: f64,
    moment_se: f64,
    second: f64,
    second_se: f64,
}

fn verify_b_cmd(cfg: &RunConfig, out: &mut OutputSet) -> Result<Report, CliError> {
    let seed = cfg.master_seed()?;
    let family: Family<f64> = cfg.model.as_ref().ok_or_else(|| missing("model"))?.family()?;
    let n = cfg.dynamics.as_ref().and_then(|d| d.n).ok_or_else(|| missing("dynamics.n"))?;
    let e = cfg.experiment.clone().unwrap_or_default();
    let iota = e.iota.unwrap_or(0.5);
    let probes = e.probes.unwrap_or(8);
    let samples = e.samples_per_probe.unwrap_or(2000);
    let model = ModelSpec::new(family, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = verify_assumption_b(&model, iota, probes, samples, &mut rng)?;
    let mut csv = String::from("m,directional,directional_se,moment,moment_se,second,second_se\n");
    for p in &est.probes {
        let row = ProbeRow {
            m: p.m,
            directional: p.directional,
            directional_se: p.directional_se,
            moment: p.moment,
            moment_se: p.moment_se,
            second: p.second,
            second_se: p.second_se,
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_real(row.m),
            fmt_real(row.directional),
            fmt_real(row.directional_se),
            fmt_real(row.moment),
            fmt_real(row.moment_se),
            fmt_real(row.second),
            fmt_real(row.second_se)
        ));
    }
    out.write("probes.csv", &csv)?;
    out.write_json(
        "verify_b.json",
        &json!({
            "n": n,
            "c1_hat": est.c1_hat,
            "grad_moment_hat": est.grad_moment_hat,
            "second_moment_hat": est.second_moment_hat,
            "lbar": theory::lbar_from_estimate(&est),
            "iota": est.iota,
            "probe_count": est.probe_count,
            "samples_per_probe": est.samples_per_probe,
            "standard_errors": est.standard_errors,
        }),
    )?;
    let mut config = echo(cfg);
    let ex = config.experiment_mut();
    ex.iota = Some(iota);
    ex.probes = Some(probes);
    ex.samples_per_probe = Some(samples);
    Ok(Report {
        config,
        resolved: json!({}),
        seeds: SeedRecord {
            master_seed: Some(seed),
            scheme: "ChaCha8 seeded with master_seed on stream 0".into(),
            streams: vec![("probes".into(), 0)],
        },
        exit_code: EXIT_OK,
    })
}

/// Step rule of a scan, for callers that build configurations in code.
pub fn step_rule_config(rule: &StepRule) -> StepRuleConfig {
    match rule {
        StepRule::Theory => StepRuleConfig::Keyword("theory".into()),
        StepRule::Fixed(v) => StepRuleConfig::Value(*v),
        StepRule::PerN(v) => StepRuleConfig::List(v.clone()),
        StepRule::Power { coefficient, exponent } => StepRuleConfig::Power { coefficient: *coefficient, exponent: *exponent },
    }
}
