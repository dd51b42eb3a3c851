//! Online SGD on the sphere, the one-dimensional population recursion, hitting
//! times, and the drift / martingale / radial bookkeeping of the correlation.
//!
//! One step on a fresh sample Y_t:
//!
//! ```text
//! X̃ = X − (δ/N) ∇L(X; Y_t)        (∇ is the spherical gradient)
//! X' = X̃ / ‖X̃‖
//! ```
//!
//! Writing m = X·θ and r = ‖X̃‖ ≥ 1, the change in m splits exactly as
//!
//! ```text
//! m' − m = −(δ/N) φ′(m)(1 − m²)        drift
//!          − (δ/N) ∇H·θ                 martingale increment, H = L − Φ
//!          + radial residual            (m̃/r − m̃)
//! ```
//!
//! and the cumulative martingale M_t sums +(δ/N)∇H·θ, so m_t = m_0 + drift − M_t + radial.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::PopulationProfile;
use crate::models::{GradDirection, ModelSpec, Sample};
use crate::scalar::{dot, fmt_real, Real};
use crate::sphere::{sample_upper_half_sphere, UnitVector};

/// Starting point of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Init<T> {
    /// Uniform on the sphere conditioned on m ≥ 0.
    UniformUpperHalf,
    /// Uniform on the latitude m = m_0.
    FixedCorrelation(T),
}

/// Parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig<T> {
    pub dim: usize,
    pub step_size: T,
    pub alpha: f64,
    /// M = ⌊αN⌋ unless set directly.
    pub total_steps: u64,
    pub init: Init<T>,
    pub record_stride: u64,
    /// Strictly increasing levels whose hitting times are tracked at every step.
    pub thresholds: Vec<T>,
    pub seed: u64,
    /// ChaCha stream; experiments use the run index.
    pub stream: u64,
    pub diagnostics: bool,
    /// Stop as soon as m_t ≥ this level.
    pub stop_at: Option<T>,
    /// Track |m_t| instead of m_t for thresholds and stopping; for losses with L(x) = L(−x).
    pub sign_symmetric: bool,
}

impl<T: Real> SgdConfig<T> {
    /// M = ⌊αN⌋ steps, uniform upper-half start, default stride.
    pub fn new(dim: usize, step_size: T, alpha: f64) -> Self {
        let total_steps = (alpha * dim as f64).floor().max(0.0) as u64;
        Self {
            dim,
            step_size,
            alpha,
            total_steps,
            init: Init::UniformUpperHalf,
            record_stride: default_stride(total_steps),
            thresholds: Vec::new(),
            seed: 0,
            stream: 0,
            diagnostics: false,
            stop_at: None,
            sign_symmetric: false,
        }
    }

    pub fn with_steps(mut self, total_steps: u64) -> Self {
        self.total_steps = total_steps;
        self.alpha = total_steps as f64 / self.dim as f64;
        self.record_stride = default_stride(total_steps);
        self
    }

    pub fn with_init(mut self, init: Init<T>) -> Self {
        self.init = init;
        self
    }

    pub fn with_thresholds(mut self, thresholds: Vec<T>) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn with_seed(mut self, seed: u64, stream: u64) -> Self {
        self.seed = seed;
        self.stream = stream;
        self
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    pub fn with_stop_at(mut self, level: Option<T>) -> Self {
        self.stop_at = level;
        self
    }

    pub fn with_sign_symmetric(mut self, on: bool) -> Self {
        self.sign_symmetric = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!("dimension {} below 2", self.dim)));
        }
        if !(self.step_size >= T::zero()) || !self.step_size.is_finite() {
            return Err(Error::InvalidArgument(format!("step size {} must be finite and nonnegative", self.step_size)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidArgument("record stride must be positive".into()));
        }
        if self.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("thresholds must be strictly increasing".into()));
        }
        if let Init::FixedCorrelation(m) = self.init {
            if !(m.abs() <= T::one()) {
                return Err(Error::InvalidArgument(format!("initial correlation {m} outside [-1, 1]")));
            }
        }
        Ok(())
    }

    /// The RNG of this run: ChaCha8 seeded from `seed`, on stream `stream`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// max(1, ⌊M/10⁴⌋).
pub fn default_stride(total_steps: u64) -> u64 {
    (total_steps / 10_000).max(1)
}

/// Cumulative decomposition of m_t at the recorded steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition<T> {
    pub m0: T,
    pub drift_cum: Vec<T>,
    pub martingale_cum: Vec<T>,
    pub radial_cum: Vec<T>,
    /// Running max of r_t = ‖X̃_t‖.
    pub r_max: Vec<T>,
    /// Running max of |M_t|.
    pub martingale_sup: Vec<T>,
}

/// Recorded path of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub dim: usize,
    pub step_size: T,
    pub seed: u64,
    pub stream: u64,
    pub recorded_times: Vec<u64>,
    pub m_values: Vec<T>,
    /// (threshold, first step with m_t ≥ threshold); |m_t| for sign-symmetric runs.
    pub hitting_times: Vec<(T, Option<u64>)>,
    pub final_m: T,
    /// Number of steps actually taken.
    pub steps_taken: u64,
    pub stopped_early: bool,
    /// max_t m_t over every step.
    pub max_m: T,
    /// max_t |m_t| over every step.
    pub max_abs_m: T,
    pub decomposition: Option<Decomposition<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn initial_m(&self) -> T {
        self.m_values[0]
    }

    /// Exact hitting time of a tracked threshold.
    pub fn tracked_hit(&self, level: T) -> Option<Option<u64>> {
        self.hitting_times.iter().find(|(l, _)| *l == level).map(|(_, t)| *t)
    }
}

/// Per-step bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics<T> {
    pub m_before: T,
    pub m_after: T,
    /// ‖X̃‖.
    pub r: T,
    /// −(δ/N) φ′(m)(1 − m²); zero without a profile.
    pub drift: T,
    /// +(δ/N) ∇H·θ; enters m with a minus sign.
    pub martingale: T,
    /// Whatever closes m' = m + drift − martingale + radial.
    pub radial: T,
}

/// State passed to run observers after every step (and once for t = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress<T> {
    pub step: u64,
    pub m: T,
    pub drift_cum: T,
    pub martingale_cum: T,
    pub radial_cum: T,
    pub r_max: T,
    pub martingale_sup: T,
}

/// One SGD step from `x` on sample `s`. The drift/martingale split needs φ′ from `profile`.
pub fn sgd_step<T: Real>(
    x: &UnitVector<T>,
    s: &Sample<T>,
    delta: T,
    model: &ModelSpec<T>,
    profile: Option<&PopulationProfile<T>>,
) -> Result<(UnitVector<T>, StepDiagnostics<T>)> {
    if x.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.dim() });
    }
    let mut coords = x.as_slice().to_vec();
    let mut dense = Vec::new();
    let m = dot(&coords, model.theta().as_slice());
    let d = step_in_place(model, profile, &mut coords, m, s, delta, &mut dense)?;
    Ok((UnitVector::from_normalized_unchecked(coords), d))
}

fn step_in_place<T: Real>(
    model: &ModelSpec<T>,
    profile: Option<&PopulationProfile<T>>,
    x: &mut [T],
    m: T,
    s: &Sample<T>,
    delta: T,
    dense: &mut Vec<T>,
) -> Result<StepDiagnostics<T>> {
    let theta = model.theta().as_slice();
    let e1 = model.reflection().is_identity();
    let scale = delta / T::from_usize_lossy(model.dim());
    let (c, dir) = model.gradient_parts(x, s, dense)?;
    let v: &[T] = match (dir, s) {
        (GradDirection::Data, Sample::Response { a, .. }) => a,
        (GradDirection::Data, Sample::Observation { y }) => y,
        (GradDirection::Theta, _) => theta,
        (GradDirection::Dense, _) => dense,
        _ => unreachable!("data direction needs a data sample"),
    };
    let vx = match dir {
        GradDirection::Theta => m,
        _ => dot(v, x),
    };
    let v_theta = if e1 { v[0] } else { dot(v, theta) };
    // X̃ = x − k (v − (v·x) x) = x (1 + k v·x) − k v.
    let k = scale * c;
    let keep = T::one() + k * vx;
    let mut norm_sq = T::zero();
    for (xi, &vi) in x.iter_mut().zip(v) {
        *xi = *xi * keep - k * vi;
        norm_sq = norm_sq + *xi * *xi;
    }
    let r = norm_sq.sqrt();
    debug_assert!(r.to_f64_lossy() >= 1.0 - 1e-12, "radial factor {r} below 1");
    if !(r.to_f64_lossy() >= crate::sphere::MIN_NORM) {
        return Err(Error::ZeroNorm { norm: r.to_f64_lossy() });
    }
    let inv = T::one() / r;
    x.iter_mut().for_each(|xi| *xi = *xi * inv);
    let m_after = if e1 { x[0] } else { dot(x, theta) };

    let one_minus = T::one() - m * m;
    let grad_l_theta = c * (v_theta - vx * m);
    let grad_phi_theta = profile.map_or(grad_l_theta, |p| p.phi_prime(m) * one_minus);
    let drift = -scale * grad_phi_theta;
    let martingale = scale * (grad_l_theta - grad_phi_theta);
    let radial = m_after - (m - scale * grad_l_theta);
    Ok(StepDiagnostics { m_before: m, m_after, r, drift, martingale, radial })
}

/// M steps of online SGD on fresh samples.
pub fn run_online_sgd<T: Real>(model: &ModelSpec<T>, cfg: &SgdConfig<T>) -> Result<Trajectory<T>> {
    run_online_sgd_observed(model, cfg, |_| {})
}

/// [`run_online_sgd`] with a callback after every step (and at t = 0).
pub fn run_online_sgd_observed<T: Real, F: FnMut(&Progress<T>)>(
    model: &ModelSpec<T>,
    cfg: &SgdConfig<T>,
    mut observe: F,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    if cfg.dim != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: cfg.dim });
    }
    let profile = if cfg.diagnostics { Some(model.population_profile()?) } else { None };
    let mut rng = cfg.rng();
    let e1 = UnitVector::basis(cfg.dim, 0)?;
    let start = match cfg.init {
        Init::UniformUpperHalf => sample_upper_half_sphere(&mut rng, cfg.dim, &e1)?,
        Init::FixedCorrelation(m0) => UnitVector::at_correlation(&mut rng, &e1, m0)?,
    };
    let mut x = start.into_vec();
    model.reflection().apply_in_place(&mut x);
    let theta = model.theta().as_slice();
    let mut m = dot(&x, theta);

    let mut rec = Recorder::new(cfg, m);
    let mut progress = Progress {
        step: 0,
        m,
        drift_cum: T::zero(),
        martingale_cum: T::zero(),
        radial_cum: T::zero(),
        r_max: T::one(),
        martingale_sup: T::zero(),
    };
    rec.record(&progress);
    observe(&progress);
    let mut sample = Sample::Empty;
    let mut dense = Vec::new();
    let mut t = 0;
    while t < cfg.total_steps && !rec.should_stop(m) {
        t += 1;
        model.sample_into(&mut rng, &mut sample);
        let d = step_in_place(model, profile.as_ref(), &mut x, m, &sample, cfg.step_size, &mut dense)
            .map_err(|e| with_replay(e, cfg, t))?;
        m = d.m_after;
        if !m.is_finite() {
            return Err(Error::NonFinite { what: "correlation", seed: cfg.seed, step: t });
        }
        progress.step = t;
        progress.m = m;
        if cfg.diagnostics {
            progress.drift_cum = progress.drift_cum + d.drift;
            progress.martingale_cum = progress.martingale_cum + d.martingale;
            progress.radial_cum = progress.radial_cum + d.radial;
            progress.r_max = progress.r_max.max(d.r);
            progress.martingale_sup = progress.martingale_sup.max(progress.martingale_cum.abs());
        }
        rec.update(&progress);
        observe(&progress);
    }
    if let crate::models::Family::Glm(_) = model.family() {
        let rej = model.rejections();
        if rej as f64 > 1e-3 * t.max(1) as f64 {
            log::warn!("Poisson feature rejections {rej} exceed 0.1% of {t} draws; responses are slightly biased");
        }
    }
    Ok(rec.finish(&progress))
}

fn with_replay<T>(e: Error, cfg: &SgdConfig<T>, step: u64) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { what, seed: cfg.seed, step },
        other => other,
    }
}

/// Collects the recorded path and hitting times.
struct Recorder<'a, T> {
    cfg: &'a SgdConfig<T>,
    times: Vec<u64>,
    m_values: Vec<T>,
    hits: Vec<Option<u64>>,
    max_m: T,
    max_abs_m: T,
    decomposition: Option<Decomposition<T>>,
    last_recorded: Option<u64>,
    stopped: bool,
}

impl<'a, T: Real> Recorder<'a, T> {
    fn new(cfg: &'a SgdConfig<T>, m0: T) -> Self {
        let capacity = (cfg.total_steps / cfg.record_stride + 2).min(1 << 22) as usize;
        let decomposition = cfg.diagnostics.then(|| Decomposition {
            m0,
            drift_cum: Vec::with_capacity(capacity),
            martingale_cum: Vec::with_capacity(capacity),
            radial_cum: Vec::with_capacity(capacity),
            r_max: Vec::with_capacity(capacity),
            martingale_sup: Vec::with_capacity(capacity),
        });
        Self {
            cfg,
            times: Vec::with_capacity(capacity),
            m_values: Vec::with_capacity(capacity),
            hits: vec![None; cfg.thresholds.len()],
            max_m: m0,
            max_abs_m: m0.abs(),
            decomposition,
            last_recorded: None,
            stopped: false,
        }
    }

    fn level(&self, m: T) -> T {
        if self.cfg.sign_symmetric {
            m.abs()
        } else {
            m
        }
    }

    fn should_stop(&mut self, m: T) -> bool {
        if let Some(level) = self.cfg.stop_at {
            if self.level(m) >= level {
                self.stopped = true;
            }
        }
        self.stopped
    }

    fn record(&mut self, p: &Progress<T>) {
        self.times.push(p.step);
        self.m_values.push(p.m);
        if let Some(d) = &mut self.decomposition {
            d.drift_cum.push(p.drift_cum);
            d.martingale_cum.push(p.martingale_cum);
            d.radial_cum.push(p.radial_cum);
            d.r_max.push(p.r_max);
            d.martingale_sup.push(p.martingale_sup);
        }
        self.last_recorded = Some(p.step);
        self.track(p);
    }

    fn track(&mut self, p: &Progress<T>) {
        self.max_m = self.max_m.max(p.m);
        self.max_abs_m = self.max_abs_m.max(p.m.abs());
        let value = self.level(p.m);
        for (hit, &level) in self.hits.iter_mut().zip(&self.cfg.thresholds) {
            if hit.is_none() && value >= level {
                *hit = Some(p.step);
            }
        }
    }

    fn update(&mut self, p: &Progress<T>) {
        if p.step % self.cfg.record_stride == 0 {
            self.record(p);
        } else {
            self.track(p);
        }
    }

    fn finish(mut self, p: &Progress<T>) -> Trajectory<T> {
        if self.last_recorded != Some(p.step) {
            self.record(p);
        }
        let stopped_early = self.stopped && p.step < self.cfg.total_steps;
        Trajectory {
            dim: self.cfg.dim,
            step_size: self.cfg.step_size,
            seed: self.cfg.seed,
            stream: self.cfg.stream,
            recorded_times: self.times,
            m_values: self.m_values,
            hitting_times: self.cfg.thresholds.iter().copied().zip(self.hits).collect(),
            final_m: p.m,
            steps_taken: p.step,
            stopped_early,
            max_m: self.max_m,
            max_abs_m: self.max_abs_m,
            decomposition: self.decomposition,
        }
    }
}

/// One step of the population recursion
/// m̄' = (m̄ − (δ/N) φ′(m̄)(1 − m̄²)) / √(1 + (δ/N)² φ′(m̄)² (1 − m̄²)).
#[inline]
pub fn population_step<T: Real>(profile: &PopulationProfile<T>, m: T, scale: T) -> T {
    let one_minus = (T::one() - m * m).max(T::zero());
    let g = scale * profile.phi_prime(m);
    (m - g * one_minus) / (T::one() + g * g * one_minus).sqrt()
}

/// Deterministic trajectory of m̄_t from m̄_0 = m0, recorded like an SGD run.
pub fn run_population_dynamics<T: Real>(
    profile: &PopulationProfile<T>,
    cfg: &SgdConfig<T>,
    m0: T,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    if !(m0.abs() <= T::one()) {
        return Err(Error::InvalidArgument(format!("initial correlation {m0} outside [-1, 1]")));
    }
    let scale = cfg.step_size / T::from_usize_lossy(cfg.dim);
    let mut cfg_plain = cfg.clone();
    cfg_plain.diagnostics = false;
    let mut rec = Recorder::new(&cfg_plain, m0);
    let mut progress = Progress {
        step: 0,
        m: m0,
        drift_cum: T::zero(),
        martingale_cum: T::zero(),
        radial_cum: T::zero(),
        r_max: T::one(),
        martingale_sup: T::zero(),
    };
    rec.record(&progress);
    let mut m = m0;
    let mut t = 0;
    while t < cfg.total_steps && !rec.should_stop(m) {
        t += 1;
        m = population_step(profile, m, scale);
        progress.step = t;
        progress.m = m;
        rec.update(&progress);
    }
    Ok(rec.finish(&progress))
}

/// m̄_0..m̄_M as a dense vector.
pub fn population_path<T: Real>(profile: &PopulationProfile<T>, dim: usize, delta: T, m0: T, steps: u64) -> Vec<T> {
    let scale = delta / T::from_usize_lossy(dim);
    let mut out = Vec::with_capacity(steps as usize + 1);
    let mut m = m0;
    out.push(m);
    for _ in 0..steps {
        m = population_step(profile, m, scale);
        out.push(m);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Up,
    Down,
}

/// First step with m_t ≥ η (up) or m_t ≤ η (down). Tracked thresholds are answered
/// exactly; other levels are read off the recorded path.
pub fn hitting_time<T: Real>(traj: &Trajectory<T>, eta: T, direction: Direction) -> Option<u64> {
    if direction == Direction::Up {
        if let Some(hit) = traj.tracked_hit(eta) {
            return hit;
        }
    }
    traj.recorded_times
        .iter()
        .zip(&traj.m_values)
        .find(|(_, &m)| match direction {
            Direction::Up => m >= eta,
            Direction::Down => m <= eta,
        })
        .map(|(&t, _)| t)
}

/// Outcome of checking m_t ≥ m_0/2 + (δa/8N) Σ_{j<t} m_j^{k−1} on the stopped window.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    /// Last step of the window t ≤ τ⁻_{γ/(2√N)} ∧ τ⁺_η ∧ M.
    pub window_end: u64,
    pub steps_checked: u64,
    pub steps_satisfied: u64,
    pub fraction: f64,
    /// max over the window of (right side − m_t); negative when the inequality holds everywhere.
    pub worst_deficit: f64,
    pub holds_on_window: bool,
}

/// Checks the stopped difference inequality along a fully recorded trajectory.
pub fn difference_inequality_check<T: Real>(
    traj: &Trajectory<T>,
    profile: &PopulationProfile<T>,
    eta: T,
    gamma: T,
) -> Result<InequalityReport> {
    if traj.decomposition.is_none() {
        return Err(Error::Precondition("difference inequality check needs a run with diagnostics enabled".into()));
    }
    let contiguous = traj.recorded_times.iter().enumerate().all(|(i, &t)| t == i as u64);
    if !contiguous {
        return Err(Error::Precondition("difference inequality check needs record_stride = 1".into()));
    }
    let n = T::from_usize_lossy(traj.dim);
    let lower = gamma / (T::lit(2.0) * n.sqrt());
    let m0 = traj.m_values[0];
    let k = profile.info_exponent();
    let coef = traj.step_size * profile.drift_coefficient() / (T::lit(8.0) * n);
    let mut sum = T::zero();
    let mut checked = 0u64;
    let mut satisfied = 0u64;
    let mut worst = f64::NEG_INFINITY;
    let mut end = 0u64;
    for (&t, &m) in traj.recorded_times.iter().zip(&traj.m_values) {
        let rhs = m0 / T::lit(2.0) + coef * sum;
        checked += 1;
        if m >= rhs {
            satisfied += 1;
        }
        worst = worst.max((rhs - m).to_f64_lossy());
        end = t;
        if m <= lower || m >= eta {
            break;
        }
        sum = sum + m.powi(k as i32 - 1);
    }
    Ok(InequalityReport {
        window_end: end,
        steps_checked: checked,
        steps_satisfied: satisfied,
        fraction: satisfied as f64 / checked as f64,
        worst_deficit: worst,
        holds_on_window: satisfied == checked,
    })
}

/// Median over seeds of sup_{t≤T} |M_t| for each horizon T.
///
/// Runs `seeds` trajectories of `max(horizons)` steps on streams 0..seeds of `cfg.seed`.
pub fn martingale_scaling_probe<T: Real>(
    model: &ModelSpec<T>,
    cfg: &SgdConfig<T>,
    horizons: &[u64],
    seeds: usize,
) -> Result<Vec<(u64, f64)>> {
    if !cfg.diagnostics {
        return Err(Error::Precondition("martingale probe needs diagnostics enabled".into()));
    }
    if horizons.is_empty() || seeds == 0 {
        return Err(Error::InvalidArgument("need at least one horizon and one seed".into()));
    }
    let longest = *horizons.iter().max().expect("nonempty");
    let mut per_horizon = vec![Vec::with_capacity(seeds); horizons.len()];
    for run in 0..seeds {
        let run_cfg = cfg
            .clone()
            .with_steps(longest)
            .with_stride(longest.max(1))
            .with_seed(cfg.seed, run as u64)
            .with_stop_at(None);
        let mut values = vec![0.0; horizons.len()];
        run_online_sgd_observed(model, &run_cfg, |p| {
            for (v, &h) in values.iter_mut().zip(horizons) {
                if p.step == h {
                    *v = p.martingale_sup.to_f64_lossy();
                }
            }
        })?;
        for (bucket, v) in per_horizon.iter_mut().zip(values) {
            bucket.push(v);
        }
    }
    Ok(horizons.iter().zip(per_horizon).map(|(&h, mut v)| (h, median(&mut v))).collect())
}

/// Median of a nonempty slice (mean of the two middle values for even lengths).
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// CSV with columns step, m, drift_cum, martingale_cum, radial_cum, r_max.
/// Decomposition columns are empty when diagnostics were off.
pub fn trajectory_csv<T: Real>(traj: &Trajectory<T>) -> String {
    let mut out = String::from("step,m,drift_cum,martingale_cum,radial_cum,r_max\n");
    for (i, (&t, &m)) in traj.recorded_times.iter().zip(&traj.m_values).enumerate() {
        match &traj.decomposition {
            Some(d) => out.push_str(&format!(
                "{t},{},{},{},{},{}\n",
                fmt_real(m),
                fmt_real(d.drift_cum[i]),
                fmt_real(d.martingale_cum[i]),
                fmt_real(d.radial_cum[i]),
                fmt_real(d.r_max[i])
            )),
            None => out.push_str(&format!("{t},{},,,,\n", fmt_real(m))),
        }
    }
    out
}

/// Hitting times as a JSON object keyed by the threshold's decimal form.
pub fn hitting_times_json<T: Real>(traj: &Trajectory<T>) -> serde_json::Value {
    let map = traj
        .hitting_times
        .iter()
        .map(|(level, hit)| (format!("{}", level.to_f64_lossy()), serde_json::json!(hit)))
        .collect::<serde_json::Map<_, _>>();
    serde_json::Value::Object(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::models::Family;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn supervised(act: Activation, n: usize) -> ModelSpec<f64> {
        ModelSpec::new(Family::Supervised { teacher: act, student: None }, n).unwrap()
    }

    fn control(coefficients: Vec<f64>, n: usize) -> ModelSpec<f64> {
        ModelSpec::new(Family::Population { coefficients }, n).unwrap()
    }

    #[test]
    fn zero_step_leaves_x_unchanged() {
        let model = supervised(Activation::Relu, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = sample_upper_half_sphere(&mut rng, 10, model.theta()).unwrap();
        let s = model.sample(&mut rng);
        let (y, d) = sgd_step(&x, &s, 0.0, &model, None).unwrap();
        assert_eq!(x.as_slice(), y.as_slice());
        assert_eq!(d.r, 1.0);
    }

    #[test]
    fn zero_gradient_sample_leaves_x_unchanged() {
        // Linear teacher at x = θ has zero residual.
        let model = supervised(Activation::Linear, 6);
        let s = model.sample(&mut ChaCha8Rng::seed_from_u64(2));
        let x = model.theta().clone();
        let (y, d) = sgd_step(&x, &s, 0.7, &model, None).unwrap();
        assert_eq!(y.as_slice(), x.as_slice());
        assert_eq!(d.r, 1.0);
    }

    #[test]
    fn two_dimensional_normalization_step() {
        // With a = e_2 and y = −0.1 the gradient at e_1 is (0, 0.2); δ/N = 0.5 makes the
        // step (0, 0.1), so X̃ = (1, −0.1) and X' = X̃/√1.01.
        let x = UnitVector::basis(2, 0).unwrap();
        let model = ModelSpec::new(Family::LinearRegression { noise_std: 0.0 }, 2).unwrap();
        let s = Sample::Response { y: -0.1, a: vec![0.0, 1.0] };
        let (y, _) = sgd_step(&x, &s, 1.0, &model, None).unwrap();
        let r = 1.01f64.sqrt();
        assert_abs_diff_eq!(y.as_slice()[0], 1.0 / r, epsilon = 1e-15);
        assert_abs_diff_eq!(y.as_slice()[1], -0.1 / r, epsilon = 1e-15);
        assert_abs_diff_eq!(y.as_slice()[0], 0.995_037_190_209_989, epsilon = 1e-12);
    }

    #[test]
    fn empty_run_contains_only_the_start() {
        let model = supervised(Activation::Linear, 20);
        let traj = run_online_sgd(&model, &SgdConfig::new(20, 0.5, 0.0)).unwrap();
        assert_eq!(traj.recorded_times, vec![0]);
        assert_eq!(traj.steps_taken, 0);
        assert_eq!(traj.final_m, traj.m_values[0]);
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let model = supervised(Activation::Relu, 50);
        let cfg = SgdConfig::new(50, 0.5, 20.0).with_seed(9, 3).with_diagnostics(true).with_thresholds(vec![0.5]);
        let a = run_online_sgd(&model, &cfg).unwrap();
        let b = run_online_sgd(&model, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_online_sgd(&model, &cfg.clone().with_seed(9, 4)).unwrap();
        assert_ne!(a.m_values, c.m_values);
    }

    #[test]
    fn rotation_invariance_of_paths() {
        let base = supervised(Activation::Square, 40);
        let rotated = base.clone().with_random_theta(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let cfg = SgdConfig::new(40, 0.3, 5.0).with_seed(17, 0).with_stride(1);
        let a = run_online_sgd(&base, &cfg).unwrap();
        let b = run_online_sgd(&rotated, &cfg).unwrap();
        for (x, y) in a.m_values.iter().zip(&b.m_values) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-9);
        }
    }

    #[test]
    fn decomposition_closes_and_norm_is_kept() {
        for model in [
            supervised(Activation::Square, 100),
            ModelSpec::new(Family::GaussianMixture { p: 0.5 }, 100).unwrap(),
            ModelSpec::new(Family::TensorPca { order: 2, snr: 1.0, entries: Default::default() }, 16).unwrap(),
        ] {
            let n = model.dim();
            let cfg = SgdConfig::new(n, 0.8, 40.0).with_seed(3, 0).with_diagnostics(true).with_stride(7);
            let traj = run_online_sgd(&model, &cfg).unwrap();
            let d = traj.decomposition.as_ref().unwrap();
            for i in 0..traj.m_values.len() {
                let rebuilt = d.m0 + d.drift_cum[i] - d.martingale_cum[i] + d.radial_cum[i];
                assert!((traj.m_values[i] - rebuilt).abs() < 1e-9);
                assert!(d.r_max[i] >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn unit_norm_after_every_step() {
        let model = supervised(Activation::Hermite3, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = sample_upper_half_sphere(&mut rng, 30, model.theta()).unwrap();
        for _ in 0..2000 {
            let s = model.sample(&mut rng);
            x = sgd_step(&x, &s, 2.0, &model, None).unwrap().0;
            assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_control_matches_population_recursion() {
        let model = control(vec![2.0, -2.0], 200);
        let profile = model.population_profile().unwrap();
        let cfg = SgdConfig::new(200, 1.0, 5.0)
            .with_init(Init::FixedCorrelation(0.1))
            .with_stride(1)
            .with_diagnostics(true);
        let sgd = run_online_sgd(&model, &cfg).unwrap();
        let pop = run_population_dynamics(&profile, &cfg, 0.1).unwrap();
        for (a, b) in sgd.m_values.iter().zip(&pop.m_values) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
        let d = sgd.decomposition.unwrap();
        assert!(d.martingale_cum.iter().all(|v| v.abs() < 1e-15));
        let report = difference_inequality_check(
            &run_online_sgd(&model, &cfg).unwrap(),
            &profile,
            0.9,
            1.0,
        )
        .unwrap();
        assert!(report.holds_on_window);
    }

    #[test]
    fn population_fixed_points() {
        let sq: PopulationProfile<f64> = PopulationProfile::polynomial(vec![4.0, 0.0, -4.0]).unwrap();
        let cfg = SgdConfig::new(100, 1.0, 10.0).with_stride(1);
        let eq = run_population_dynamics(&sq, &cfg, 0.0).unwrap();
        assert!(eq.m_values.iter().all(|&m| m == 0.0));
        let pole = run_population_dynamics(&sq, &cfg, 1.0).unwrap();
        assert!(pole.m_values.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn population_converges_monotonically() {
        let p: PopulationProfile<f64> = PopulationProfile::polynomial(vec![4.0, 0.0, -4.0]).unwrap();
        let n = 100;
        let cfg = SgdConfig::new(n, 1.0, 400.0).with_stride(1);
        let traj = run_population_dynamics(&p, &cfg, 0.05).unwrap();
        assert!(traj.m_values.windows(2).all(|w| w[1] >= w[0]));
        assert!(traj.final_m > 1.0 - 1e-3);
    }

    #[test]
    fn population_weak_recovery_time_within_theory_factor() {
        let p: PopulationProfile<f64> = PopulationProfile::polynomial(vec![2.0, -2.0]).unwrap();
        let cfg = SgdConfig::new(1000, 1.0, 100.0).with_thresholds(vec![0.5]);
        let traj = run_population_dynamics(&p, &cfg, 0.01).unwrap();
        let tau = traj.tracked_hit(0.5).unwrap().unwrap() as f64;
        let predicted = crate::theory::predicted_weak_recovery_time(1, 1000, 1.0, 0.5, 0.01, 2.0).unwrap();
        let ratio = tau / predicted;
        assert!((1.0 / 8.0..=8.0).contains(&ratio), "tau {tau}, predicted {predicted}");
    }

    #[test]
    fn hitting_time_cases() {
        let mut traj = Trajectory {
            dim: 10,
            step_size: 1.0,
            seed: 0,
            stream: 0,
            recorded_times: (0..10).collect(),
            m_values: vec![0.0; 10],
            hitting_times: vec![],
            final_m: 0.0,
            steps_taken: 9,
            stopped_early: false,
            max_m: 0.0,
            max_abs_m: 0.0,
            decomposition: None,
        };
        assert_eq!(hitting_time(&traj, 0.5, Direction::Up), None);
        traj.m_values = (0..10).map(|i| i as f64 / 13.0).collect();
        assert_eq!(hitting_time(&traj, 0.5, Direction::Up), Some(7));
        assert_eq!(hitting_time(&traj, 0.0, Direction::Down), Some(0));
    }

    #[test]
    fn frozen_path_fails_linear_inequality() {
        let p: PopulationProfile<f64> = PopulationProfile::polynomial(vec![2.0, -2.0]).unwrap();
        let n = 100;
        let steps = 20_000;
        let traj = Trajectory {
            dim: n,
            step_size: 1.0,
            seed: 0,
            stream: 0,
            recorded_times: (0..=steps).collect(),
            m_values: vec![0.2; steps as usize + 1],
            hitting_times: vec![],
            final_m: 0.2,
            steps_taken: steps,
            stopped_early: false,
            max_m: 0.2,
            max_abs_m: 0.2,
            decomposition: Some(Decomposition {
                m0: 0.2,
                drift_cum: vec![],
                martingale_cum: vec![],
                radial_cum: vec![],
                r_max: vec![],
                martingale_sup: vec![],
            }),
        };
        let report = difference_inequality_check(&traj, &p, 0.9, 1.0).unwrap();
        assert!(report.fraction < 0.05, "{report:?}");
        let mut no_diag = traj.clone();
        no_diag.decomposition = None;
        assert!(difference_inequality_check(&no_diag, &p, 0.9, 1.0).is_err());
    }

    #[test]
    fn linear_teacher_recovers() {
        let n = 500;
        let model = supervised(Activation::Linear, n);
        let mut good = 0;
        for seed in 0..20 {
            let cfg = SgdConfig::new(n, 0.5, 50.0).with_seed(100, seed);
            if run_online_sgd(&model, &cfg).unwrap().final_m > 0.9 {
                good += 1;
            }
        }
        assert!(good >= 18, "{good}/20");
    }

    #[test]
    fn stop_at_threshold() {
        let model = supervised(Activation::Linear, 100);
        let cfg = SgdConfig::new(100, 0.5, 100.0).with_thresholds(vec![0.5]).with_stop_at(Some(0.5)).with_seed(1, 0);
        let traj = run_online_sgd(&model, &cfg).unwrap();
        assert!(traj.stopped_early);
        assert_eq!(traj.tracked_hit(0.5), Some(Some(traj.steps_taken)));
        assert!(traj.final_m >= 0.5);
        assert_eq!(*traj.recorded_times.last().unwrap(), traj.steps_taken);
    }

    #[test]
    fn sign_symmetric_runs_track_absolute_correlation() {
        let model = supervised(Activation::Square, 50);
        let cfg = SgdConfig::new(50, 0.05, 200.0)
            .with_init(Init::FixedCorrelation(-0.2))
            .with_thresholds(vec![0.5])
            .with_stop_at(Some(0.5));
        let plain = run_online_sgd(&model, &cfg).unwrap();
        assert_eq!(plain.tracked_hit(0.5), Some(None));
        assert!(plain.final_m < -0.5);
        let sym = run_online_sgd(&model, &cfg.with_sign_symmetric(true)).unwrap();
        assert!(sym.stopped_early);
        assert!(sym.final_m <= -0.5 && sym.max_abs_m >= 0.5);
    }

    #[test]
    fn hitting_times_are_exact_regardless_of_stride() {
        let model = supervised(Activation::Linear, 100);
        let cfg = SgdConfig::new(100, 0.5, 30.0).with_thresholds(vec![0.3, 0.6]).with_seed(2, 0);
        let coarse = run_online_sgd(&model, &cfg.clone().with_stride(97)).unwrap();
        let fine = run_online_sgd(&model, &cfg.with_stride(1)).unwrap();
        assert_eq!(coarse.hitting_times, fine.hitting_times);
        let t3 = coarse.tracked_hit(0.3).unwrap().unwrap();
        let t6 = coarse.tracked_hit(0.6).unwrap().unwrap();
        assert!(t3 <= t6);
        assert_eq!(hitting_time(&fine, 0.3, Direction::Up), Some(t3));
    }

    #[test]
    fn martingale_increments_have_zero_mean() {
        let model = supervised(Activation::Square, 50);
        let profile = model.population_profile().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m0 in [0.1, 0.4, 0.8] {
            let x = UnitVector::at_correlation(&mut rng, model.theta(), m0).unwrap();
            let incs: Vec<f64> = (0..10_000)
                .map(|_| {
                    let s = model.sample(&mut rng);
                    sgd_step(&x, &s, 1.0, &model, Some(&profile)).unwrap().1.martingale
                })
                .collect();
            let mean = incs.iter().sum::<f64>() / incs.len() as f64;
            let var = incs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (incs.len() - 1) as f64;
            assert!(mean.abs() < 4.0 * (var / incs.len() as f64).sqrt(), "m0 {m0}: {mean}");
        }
    }

    #[test]
    fn zero_noise_martingale_probe() {
        let model = control(vec![4.0, 0.0, -4.0], 100);
        let cfg = SgdConfig::new(100, 1.0, 1.0).with_diagnostics(true).with_init(Init::FixedCorrelation(0.2));
        let table = martingale_scaling_probe(&model, &cfg, &[10, 100], 3).unwrap();
        assert!(table.iter().all(|&(_, v)| v < 1e-15));
    }

    #[test]
    fn martingale_probe_is_linear_in_step_size() {
        let model = supervised(Activation::Square, 200);
        let cfg = |d: f64| SgdConfig::new(200, d, 1.0).with_diagnostics(true).with_seed(5, 0);
        let a = martingale_scaling_probe(&model, &cfg(0.0005), &[2000], 9).unwrap()[0].1;
        let b = martingale_scaling_probe(&model, &cfg(0.001), &[2000], 9).unwrap()[0].1;
        assert!((b / a - 2.0).abs() < 0.05, "{a} {b}");
    }

    #[test]
    fn csv_and_json_exports() {
        let model = supervised(Activation::Linear, 20);
        let cfg = SgdConfig::new(20, 0.5, 2.0).with_diagnostics(true).with_thresholds(vec![0.5]).with_stride(10);
        let traj = run_online_sgd(&model, &cfg).unwrap();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("step,m,drift_cum,martingale_cum,radial_cum,r_max"));
        assert_eq!(lines.count(), traj.recorded_times.len());
        let json = hitting_times_json(&traj);
        assert!(json.get("0.5").is_some());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let model = supervised(Activation::Linear, 20);
        assert!(run_online_sgd(&model, &SgdConfig::new(21, 0.5, 1.0)).is_err());
        assert!(run_online_sgd(&model, &SgdConfig::new(20, 0.5, 1.0).with_thresholds(vec![0.5, 0.2])).is_err());
        assert!(run_online_sgd(&model, &SgdConfig::new(20, -1.0, 1.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn closure_holds_for_random_runs(seed in 0u64..1000, delta in 0.05f64..3.0, n in 5usize..60) {
            let model = supervised(Activation::Relu, n);
            let cfg = SgdConfig::new(n, delta, 20.0).with_seed(seed, 0).with_diagnostics(true).with_stride(3);
            let traj = run_online_sgd(&model, &cfg).unwrap();
            let d = traj.decomposition.as_ref().unwrap();
            for i in 0..traj.m_values.len() {
                let rebuilt = d.m0 + d.drift_cum[i] - d.martingale_cum[i] + d.radial_cum[i];
                prop_assert!((traj.m_values[i] - rebuilt).abs() < 1e-9);
                prop_assert!(traj.m_values[i].abs() <= 1.0);
            }
        }
    }
}
