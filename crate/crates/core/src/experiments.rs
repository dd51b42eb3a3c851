//! Desk-scale studies: hitting-time scaling scans, law-of-large-numbers deviations,
//! refutation probabilities, search/descent splits and same-data comparisons.

use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::activation::Activation;
use crate::dynamics::{
    hitting_time, median, population_path, run_online_sgd, run_online_sgd_observed, Direction, Init, SgdConfig,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::models::{verify_assumption_b, Family, ModelSpec};
use crate::scalar::{fmt_real, Real};
use crate::theory;

/// Default multiplier in the step budget M = ⌈c · α_c · (ln N)² · N⌉.
pub const DEFAULT_BUDGET_FACTOR: f64 = 20.0;
/// Bootstrap resamples used by slope fits.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Two-sided coverage of reported bootstrap intervals.
pub const CI_LEVEL: f64 = 0.9;

/// How the step size is chosen at each N.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StepRule {
    /// [`theory::recommended_delta`] with L̄ estimated at that N.
    Theory,
    Fixed(f64),
    /// One value per grid entry.
    PerN(Vec<f64>),
    /// c · N^e.
    Power { coefficient: f64, exponent: f64 },
}

/// How the number of samples per dimension is chosen at each N.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BudgetRule {
    /// α = c · α_c(N, k) · (ln N)².
    Theory { factor: f64 },
    Fixed(f64),
    PerN(Vec<f64>),
}

impl Default for BudgetRule {
    fn default() -> Self {
        BudgetRule::Theory { factor: DEFAULT_BUDGET_FACTOR }
    }
}

impl StepRule {
    fn resolve<T: Real>(&self, model: &ModelSpec<T>, index: usize, k: usize, alpha: f64, seed: u64) -> Result<f64> {
        let n = model.dim();
        match self {
            StepRule::Fixed(d) => Ok(*d),
            StepRule::PerN(v) => per_n(v, index, "delta"),
            StepRule::Power { coefficient, exponent } => Ok(coefficient * (n as f64).powf(*exponent)),
            StepRule::Theory => {
                let profile = model.population_profile()?;
                let lbar = estimate_lbar(model, seed)?;
                theory::recommended_delta(n, k, alpha, profile.drift_coefficient().to_f64_lossy(), lbar, theory::DEFAULT_K)
            }
        }
    }
}

impl BudgetRule {
    fn resolve(&self, n: usize, index: usize, k: usize) -> Result<f64> {
        match self {
            BudgetRule::Theory { factor } => {
                let ln = (n as f64).ln();
                Ok(factor * theory::alpha_critical(n, k)? * ln * ln)
            }
            BudgetRule::Fixed(a) => Ok(*a),
            BudgetRule::PerN(v) => per_n(v, index, "alpha"),
        }
    }
}

fn per_n(v: &[f64], index: usize, what: &str) -> Result<f64> {
    v.get(index)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("{what} list has {} entries, grid needs entry {}", v.len(), index + 1)))
}

/// L̄ = max(E‖∇H‖²/N, 1) from a moment estimate on 8 probes of 2000 samples.
pub fn estimate_lbar<T: Real>(model: &ModelSpec<T>, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let est = verify_assumption_b(model, 0.5, 8, 2000, &mut rng)?;
    Ok(theory::lbar_from_estimate(&est))
}

/// ChaCha stream of cell (N, seed index); shared across activations in comparisons.
pub fn cell_stream(n: usize, seed_index: usize) -> u64 {
    ((n as u64) << 24) | seed_index as u64
}

/// Parameters of a hitting-time scaling scan.
#[derive(Debug, Clone)]
pub struct ScanConfig<T> {
    pub family: Family<T>,
    pub n_grid: Vec<usize>,
    pub seeds_per_cell: usize,
    pub delta_rule: StepRule,
    pub alpha_rule: BudgetRule,
    pub eta: f64,
    /// Further levels whose hitting times are recorded; the run stops at the highest.
    pub extra_thresholds: Vec<f64>,
    pub init: Init<T>,
    pub master_seed: u64,
    /// Run even if φ′ fails the negativity check.
    pub force: bool,
}

impl<T: Real> ScanConfig<T> {
    pub fn new(family: Family<T>, n_grid: Vec<usize>, seeds_per_cell: usize) -> Self {
        Self {
            family,
            n_grid,
            seeds_per_cell,
            delta_rule: StepRule::Theory,
            alpha_rule: BudgetRule::default(),
            eta: 0.5,
            extra_thresholds: Vec::new(),
            init: Init::UniformUpperHalf,
            master_seed: 0,
            force: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("N grid must be nonempty and strictly increasing".into()));
        }
        if self.seeds_per_cell < 5 {
            return Err(Error::InvalidArgument(format!("need at least 5 seeds per cell, got {}", self.seeds_per_cell)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidArgument(format!("threshold {} outside (0, 1)", self.eta)));
        }
        if let Family::TensorPca { order, .. } | Family::CompositeTensor { orders: (order, _), .. } = &self.family {
            if *order >= 3 && *self.n_grid.last().expect("nonempty") > 128 {
                return Err(Error::InvalidArgument("tensor scans of order >= 3 are capped at N = 128".into()));
            }
        }
        Ok(())
    }

    fn thresholds(&self) -> Vec<T> {
        let mut levels: Vec<f64> = self.extra_thresholds.iter().copied().chain([self.eta]).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels.into_iter().map(T::lit).collect()
    }
}

/// Outcome of one (N, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub n: usize,
    pub seed_index: usize,
    pub stream: u64,
    /// First step with m ≥ η, `None` when censored.
    pub tau: Option<u64>,
    pub censored: bool,
    pub final_m: f64,
    pub steps: u64,
    /// (level, hitting time) for every recorded threshold.
    pub hits: Vec<(f64, Option<u64>)>,
}

impl CellResult {
    pub fn hit(&self, level: f64) -> Option<u64> {
        self.hits.iter().find(|(l, _)| (*l - level).abs() < 1e-12).and_then(|(_, t)| *t)
    }
}

/// Quartiles of the uncensored hitting times at one N.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    pub budget: u64,
    pub uncensored: usize,
    pub censored: usize,
    pub q25: Option<f64>,
    pub q50: Option<f64>,
    pub q75: Option<f64>,
    /// median τ / (N ln N).
    pub ratio_n_log_n: Option<f64>,
}

/// Least-squares fit on (ln N, ln y) with a bootstrap interval for the slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub resamples: usize,
    /// (N, median statistic) points the fit used.
    pub points: Vec<(f64, f64)>,
}

impl SlopeFit {
    pub fn overlaps(&self, other: &SlopeFit) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub family: String,
    pub info_exponent: usize,
    pub eta: f64,
    pub master_seed: u64,
    pub cells: Vec<CellResult>,
    pub grid: Vec<GridSummary>,
    pub slope: Option<SlopeFit>,
    /// max/min over N of median τ/(N ln N).
    pub ratio_spread: Option<f64>,
    /// Some N had every seed censored.
    pub scaling_not_observed: bool,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl ScanResult {
    /// One row per cell: N, seed, tau, censored, final_m.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("N,seed,tau,censored,final_m\n");
        for c in &self.cells {
            let tau = c.tau.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", c.n, c.seed_index, tau, c.censored, fmt_real(c.final_m)));
        }
        out
    }

    /// Plot data: x = N, y = median τ, y_lo / y_hi = quartiles.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("x,y,y_lo,y_hi\n");
        for g in &self.grid {
            if let (Some(a), Some(b), Some(c)) = (g.q25, g.q50, g.q75) {
                out.push_str(&format!("{},{},{},{}\n", g.n, fmt_real(b), fmt_real(a), fmt_real(c)));
            }
        }
        out
    }
}

/// Runs every (N, seed) cell with stop-at-threshold and fits the log-log slope of median τ.
pub fn scaling_scan<T: Real>(cfg: &ScanConfig<T>) -> Result<ScanResult> {
    cfg.validate()?;
    let started = Instant::now();
    let thresholds = cfg.thresholds();
    let stop = *thresholds.last().expect("at least eta");
    let mut plans = Vec::with_capacity(cfg.n_grid.len());
    let mut k = 0;
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let model = ModelSpec::new(cfg.family.clone(), n)?;
        let profile = model.population_profile()?;
        profile.require_assumption_a(cfg.force)?;
        k = profile.info_exponent();
        let symmetric = profile.is_even();
        let alpha = cfg.alpha_rule.resolve(n, i, k)?;
        let delta = cfg.delta_rule.resolve(&model, i, k, alpha, cfg.master_seed)?;
        let budget = (alpha * n as f64).ceil() as u64;
        log::info!("scan N = {n}: delta = {delta:.4e}, alpha = {alpha:.4e}, budget = {budget}");
        plans.push((model, delta, alpha, budget, symmetric));
    }
    let jobs: Vec<(usize, usize)> =
        (0..plans.len()).flat_map(|i| (0..cfg.seeds_per_cell).map(move |s| (i, s))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, s)| {
            let (model, delta, _, budget, symmetric) = &plans[i];
            let n = model.dim();
            let run = SgdConfig::new(n, T::lit(*delta), 0.0)
                .with_steps(*budget)
                .with_init(cfg.init)
                .with_thresholds(thresholds.clone())
                .with_stop_at(Some(stop))
                .with_sign_symmetric(*symmetric)
                .with_stride((*budget).max(1))
                .with_seed(cfg.master_seed, cell_stream(n, s));
            let traj = run_online_sgd(model, &run)?;
            let tau = traj.tracked_hit(T::lit(cfg.eta)).flatten();
            Ok(CellResult {
                n,
                seed_index: s,
                stream: run.stream,
                tau,
                censored: tau.is_none(),
                final_m: traj.final_m.to_f64_lossy(),
                steps: traj.steps_taken,
                hits: traj.hitting_times.iter().map(|(l, t)| (l.to_f64_lossy(), *t)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grid = Vec::with_capacity(plans.len());
    let mut pairs = Vec::new();
    let mut not_observed = false;
    for (model, delta, alpha, budget, _) in &plans {
        let n = model.dim();
        let mut taus: Vec<f64> = cells.iter().filter(|c| c.n == n).filter_map(|c| c.tau.map(|t| t as f64)).collect();
        let censored = cfg.seeds_per_cell - taus.len();
        if taus.is_empty() {
            not_observed = true;
            log::warn!("every seed censored at N = {n}");
        }
        pairs.extend(taus.iter().map(|&t| (n as f64, t)));
        taus.sort_by(f64::total_cmp);
        let q = |p: f64| (!taus.is_empty()).then(|| quantile_sorted(&taus, p));
        let q50 = q(0.5);
        grid.push(GridSummary {
            n,
            delta: *delta,
            alpha: *alpha,
            budget: *budget,
            uncensored: taus.len(),
            censored,
            q25: q(0.25),
            q50,
            q75: q(0.75),
            ratio_n_log_n: q50.map(|m| m / (n as f64 * (n as f64).ln())),
        });
    }
    let distinct = grid.iter().filter(|g| g.uncensored > 0).count();
    let slope = if distinct >= 2 && pairs.iter().all(|p| p.1 > 0.0) {
        Some(fit_loglog_slope(&pairs, cfg.master_seed)?)
    } else {
        None
    };
    let ratios: Vec<f64> = grid.iter().filter_map(|g| g.ratio_n_log_n).collect();
    let ratio_spread = (ratios.len() >= 2).then(|| {
        let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
        hi / lo
    });
    Ok(ScanResult {
        family: cfg.family.name().to_string(),
        info_exponent: k,
        eta: cfg.eta,
        master_seed: cfg.master_seed,
        cells,
        grid,
        slope,
        ratio_spread,
        scaling_not_observed: not_observed,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Linear-interpolation quantile of a sorted, nonempty slice.
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Fits ln(median y) against ln N over the groups of equal N, with a percentile
/// bootstrap interval that resamples within each group.
pub fn fit_loglog_slope(pairs: &[(f64, f64)], seed: u64) -> Result<SlopeFit> {
    fit_loglog_slope_with(pairs, BOOTSTRAP_RESAMPLES, CI_LEVEL, seed)
}

pub fn fit_loglog_slope_with(pairs: &[(f64, f64)], resamples: usize, level: f64, seed: u64) -> Result<SlopeFit> {
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 pairs, got {}", pairs.len())));
    }
    if let Some(p) = pairs.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InvalidArgument(format!("log-log fit needs positive values, got ({}, {})", p.0, p.1)));
    }
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for &(x, y) in pairs {
        match groups.iter_mut().find(|g| g.0 == x) {
            Some(g) => g.1.push(y),
            None => groups.push((x, vec![y])),
        }
    }
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("need at least two distinct N".into()));
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let points: Vec<(f64, f64)> = groups.iter().map(|(x, ys)| (*x, median(&mut ys.clone()))).collect();
    let (slope, intercept) = least_squares_log(&points);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - 1);
    let mut slopes = Vec::with_capacity(resamples);
    let mut buf = Vec::new();
    for _ in 0..resamples {
        let boot: Vec<(f64, f64)> = groups
            .iter()
            .map(|(x, ys)| {
                buf.clear();
                buf.extend((0..ys.len()).map(|_| *ys.choose(&mut rng).expect("nonempty group")));
                (*x, median(&mut buf))
            })
            .collect();
        slopes.push(least_squares_log(&boot).0);
    }
    slopes.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let (mut lo, mut hi) = if slopes.is_empty() {
        (slope, slope)
    } else {
        (quantile_sorted(&slopes, tail), quantile_sorted(&slopes, 1.0 - tail))
    };
    lo = lo.min(slope);
    hi = hi.max(slope);
    Ok(SlopeFit { slope, intercept, ci_low: lo, ci_high: hi, level, resamples, points })
}

fn least_squares_log(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Sup-deviations of SGD from the population recursion at one N.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnRow {
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    pub deviations: Vec<f64>,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnResult {
    pub m0: f64,
    pub rows: Vec<LlnRow>,
}

impl LlnResult {
    /// Plot data: x = N, y = median sup-deviation, y_lo / y_hi = quartiles.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("x,y,y_lo,y_hi\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.n, fmt_real(r.median), fmt_real(r.q25), fmt_real(r.q75)));
        }
        out
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].median < w[0].median)
    }
}

/// Largest αδ² the law-of-large-numbers experiment accepts.
pub const LLN_MAX_ALPHA_DELTA_SQ: f64 = 0.05;

/// For each N, sup_{t ≤ αN} |m_t − m̄_t| over `seeds` runs from latitude m0.
pub fn lln_experiment<T: Real>(
    family: &Family<T>,
    n_grid: &[usize],
    m0: f64,
    delta_rule: &StepRule,
    alpha: f64,
    seeds: usize,
    master_seed: u64,
) -> Result<LlnResult> {
    if !(m0 > 0.0 && m0 <= 1.0) {
        return Err(Error::InvalidArgument(format!("initial latitude {m0} outside (0, 1]")));
    }
    if seeds == 0 || n_grid.is_empty() {
        return Err(Error::InvalidArgument("need at least one seed and one N".into()));
    }
    let mut plans = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let model = ModelSpec::new(family.clone(), n)?;
        let profile = model.population_profile()?;
        let delta = delta_rule.resolve(&model, i, profile.info_exponent(), alpha, master_seed)?;
        if alpha * delta * delta > LLN_MAX_ALPHA_DELTA_SQ {
            return Err(Error::Precondition(format!(
                "alpha * delta^2 = {:.3e} exceeds {LLN_MAX_ALPHA_DELTA_SQ} at N = {n}",
                alpha * delta * delta
            )));
        }
        let steps = (alpha * n as f64).floor() as u64;
        let path = population_path(&profile, n, T::lit(delta), T::lit(m0), steps);
        plans.push((model, delta, steps, path));
    }
    let jobs: Vec<(usize, usize)> = (0..plans.len()).flat_map(|i| (0..seeds).map(move |s| (i, s))).collect();
    let devs = jobs
        .par_iter()
        .map(|&(i, s)| {
            let (model, delta, steps, path) = &plans[i];
            let n = model.dim();
            let run = SgdConfig::new(n, T::lit(*delta), 0.0)
                .with_steps(*steps)
                .with_init(Init::FixedCorrelation(T::lit(m0)))
                .with_stride((*steps).max(1))
                .with_seed(master_seed, cell_stream(n, s));
            let mut sup = 0.0f64;
            run_online_sgd_observed(model, &run, |p| {
                let d = (p.m - path[p.step as usize]).abs().to_f64_lossy();
                sup = sup.max(d);
            })?;
            Ok(sup)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = plans
        .iter()
        .enumerate()
        .map(|(i, (model, delta, _, _))| {
            let mut d = devs[i * seeds..(i + 1) * seeds].to_vec();
            let mut sorted = d.clone();
            sorted.sort_by(f64::total_cmp);
            LlnRow {
                n: model.dim(),
                delta: *delta,
                alpha,
                median: median(&mut d),
                q25: quantile_sorted(&sorted, 0.25),
                q75: quantile_sorted(&sorted, 0.75),
                deviations: devs[i * seeds..(i + 1) * seeds].to_vec(),
            }
        })
        .collect();
    Ok(LlnResult { m0, rows })
}

/// α below the critical level: α_c/10 for k ≥ 2, 0.2 for k = 1.
pub fn default_refutation_alpha(n: usize, k: usize) -> Result<f64> {
    Ok(if k == 1 { 0.2 } else { theory::alpha_critical(n, k)? / 10.0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct RefutationResult {
    pub n: usize,
    pub alpha: f64,
    pub delta: f64,
    pub eta: f64,
    pub seeds: usize,
    /// Fraction of runs whose running max of |m| exceeded η.
    pub exceed_fraction: f64,
    /// Fraction of runs ending with m_M > `recovery_level` (|m_M| for even losses).
    pub recovery_fraction: f64,
    pub recovery_level: f64,
    /// Running max of |m| per run.
    pub max_m: Vec<f64>,
    pub final_m: Vec<f64>,
}

/// P̂(sup_{t ≤ αN} |m_t| > η) from uniform upper-half starts.
pub fn refutation_experiment<T: Real>(
    family: &Family<T>,
    n: usize,
    alpha: f64,
    delta: f64,
    eta: f64,
    seeds: usize,
    master_seed: u64,
) -> Result<RefutationResult> {
    if seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let model = ModelSpec::new(family.clone(), n)?;
    let symmetric = model.population_profile()?.is_even();
    let steps = (alpha * n as f64).floor() as u64;
    let runs = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let run = SgdConfig::new(n, T::lit(delta), 0.0)
                .with_steps(steps)
                .with_stride(steps.max(1))
                .with_seed(master_seed, cell_stream(n, s));
            let traj = run_online_sgd(&model, &run)?;
            let end = traj.final_m.to_f64_lossy();
            Ok((traj.max_abs_m.to_f64_lossy(), if symmetric { end.abs() } else { end }))
        })
        .collect::<Result<Vec<_>>>()?;
    let recovery_level = 0.9;
    let frac = |f: &dyn Fn(&(f64, f64)) -> bool| runs.iter().filter(|r| f(r)).count() as f64 / seeds as f64;
    Ok(RefutationResult {
        n,
        alpha,
        delta,
        eta,
        seeds,
        exceed_fraction: frac(&|r| r.0 > eta),
        recovery_fraction: frac(&|r| r.1 > recovery_level),
        recovery_level,
        max_m: runs.iter().map(|r| r.0).collect(),
        final_m: runs.iter().map(|r| r.1).collect(),
    })
}

/// Search and descent durations of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitRun {
    /// τ_η^+.
    pub search: u64,
    /// τ_{1−η}^+ − τ_η^+.
    pub descent: u64,
    /// descent / τ_{1−η}^+.
    pub descent_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub eta: f64,
    pub runs: Vec<SplitRun>,
    /// Runs missing either hitting time.
    pub excluded: usize,
    pub median_descent_fraction: Option<f64>,
}

/// Splits each run at τ_η^+ and τ_{1−η}^+.
pub fn search_descent_split<T: Real>(trajectories: &[Trajectory<T>], eta: T) -> SplitResult {
    let upper = T::one() - eta;
    split_from_times(
        trajectories
            .iter()
            .map(|t| (hitting_time(t, eta, Direction::Up), hitting_time(t, upper, Direction::Up))),
        eta.to_f64_lossy(),
    )
}

/// [`search_descent_split`] on scan cells that recorded both η and 1 − η.
pub fn search_descent_split_cells(cells: &[CellResult], eta: f64) -> SplitResult {
    split_from_times(cells.iter().map(|c| (c.hit(eta), c.hit(1.0 - eta))), eta)
}

fn split_from_times(times: impl Iterator<Item = (Option<u64>, Option<u64>)>, eta: f64) -> SplitResult {
    let mut runs = Vec::new();
    let mut excluded = 0;
    for pair in times {
        match pair {
            (Some(a), Some(b)) if b >= a && b > 0 => runs.push(SplitRun {
                search: a,
                descent: b - a,
                descent_fraction: (b - a) as f64 / b as f64,
            }),
            _ => excluded += 1,
        }
    }
    let mut fractions: Vec<f64> = runs.iter().map(|r| r.descent_fraction).collect();
    let median_descent_fraction = (!fractions.is_empty()).then(|| median(&mut fractions));
    SplitResult { eta, runs, excluded, median_descent_fraction }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonResult {
    pub activations: Vec<String>,
    pub n: usize,
    pub alpha: f64,
    pub delta: f64,
    pub level: f64,
    /// taus[seed][activation] = first step with m ≥ level.
    pub taus: Vec<Vec<Option<u64>>>,
    /// Fraction of seeds whose hitting times strictly increase in the listed order.
    pub ordered_fraction: f64,
    #[serde(skip)]
    pub trajectories: Vec<Vec<Trajectory<f64>>>,
}

impl ComparisonResult {
    /// Fraction of seeds on which activation i reached the level, and j within `factor` of it.
    pub fn within_factor(&self, i: usize, j: usize, factor: f64) -> f64 {
        let ok = self
            .taus
            .iter()
            .filter(|row| match (row[i], row[j]) {
                (Some(a), Some(b)) => {
                    let (a, b) = (a.max(1) as f64, b.max(1) as f64);
                    a / b <= factor && b / a <= factor
                }
                _ => false,
            })
            .count();
        ok as f64 / self.taus.len() as f64
    }
}

/// Feeds one sample stream per seed to every activation (teacher = student) and
/// records when each reaches `level`.
pub fn same_data_comparison(
    activations: &[Activation],
    n: usize,
    alpha: f64,
    delta: f64,
    level: f64,
    seeds: usize,
    master_seed: u64,
) -> Result<ComparisonResult> {
    if activations.is_empty() || seeds == 0 {
        return Err(Error::InvalidArgument("need at least one activation and one seed".into()));
    }
    let models = activations
        .iter()
        .map(|a| {
            let model = ModelSpec::new(Family::Supervised { teacher: a.clone(), student: None }, n)?;
            let symmetric = model.population_profile()?.is_even();
            Ok((model, symmetric))
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = (alpha * n as f64).floor() as u64;
    let jobs: Vec<(usize, usize)> = (0..seeds).flat_map(|s| (0..models.len()).map(move |a| (s, a))).collect();
    let trajs = jobs
        .par_iter()
        .map(|&(s, a)| {
            let run = SgdConfig::new(n, delta, 0.0)
                .with_steps(steps)
                .with_thresholds(vec![level])
                .with_stop_at(Some(level))
                .with_sign_symmetric(models[a].1)
                .with_stride((steps / 200).max(1))
                .with_seed(master_seed, cell_stream(n, s));
            run_online_sgd(&models[a].0, &run)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_seed: Vec<Vec<Trajectory<f64>>> = trajs.chunks(models.len()).map(|c| c.to_vec()).collect();
    let taus: Vec<Vec<Option<u64>>> =
        per_seed.iter().map(|row| row.iter().map(|t| t.tracked_hit(level).flatten()).collect()).collect();
    let ordered = taus
        .iter()
        .filter(|row| {
            row.iter().all(Option::is_some) && row.windows(2).all(|w| w[0].expect("some") < w[1].expect("some"))
        })
        .count();
    Ok(ComparisonResult {
        activations: activations.iter().map(Activation::name).collect(),
        n,
        alpha,
        delta,
        level,
        ordered_fraction: ordered as f64 / seeds as f64,
        taus,
        trajectories: per_seed,
    })
}
