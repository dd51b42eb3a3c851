//! The model zoo: samplers, per-sample losses and gradients, population profiles,
//! and Monte Carlo estimates of the gradient-noise moments.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::activation::{sigmoid, Activation};
use crate::error::{Error, Result};
use crate::hermite::{
    cross_population_profile, log_cosh, supervised_population_profile, GaussianRule, HermiteProfile,
    PopulationProfile,
};
use crate::scalar::{dot, Real};
use crate::sphere::{tangent_project, Reflection, UnitVector};

/// Canonical-link GLM families with unit dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmFamily {
    /// Gaussian response, b(t) = t²/2.
    Linear,
    /// Bernoulli response, b(t) = log(1 + e^t).
    Logistic,
    /// Poisson response, b(t) = e^t.
    Poisson,
}

impl GlmFamily {
    /// Cumulant b(t).
    pub fn cumulant<T: Real>(self, t: T) -> T {
        match self {
            GlmFamily::Linear => T::lit(0.5) * t * t,
            GlmFamily::Logistic => softplus(t),
            GlmFamily::Poisson => t.exp(),
        }
    }

    /// Mean function f = b′.
    pub fn mean<T: Real>(self, t: T) -> T {
        match self {
            GlmFamily::Linear => t,
            GlmFamily::Logistic => sigmoid(t),
            GlmFamily::Poisson => t.exp(),
        }
    }

    /// f′ = b″.
    pub fn mean_derivative<T: Real>(self, t: T) -> T {
        match self {
            GlmFamily::Linear => T::one(),
            GlmFamily::Logistic => {
                let s = sigmoid(t);
                s * (T::one() - s)
            }
            GlmFamily::Poisson => t.exp(),
        }
    }
}

fn softplus<T: Real>(t: T) -> T {
    t.max(T::zero()) + (-t.abs()).exp().ln_1p()
}

/// Law of the noise tensor entries; both have mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryDistribution {
    #[default]
    Gaussian,
    Rademacher,
}

/// Data distributions with a hidden direction θ.
#[derive(Debug, Clone, PartialEq)]
pub enum Family<T> {
    /// y = f(a·θ), a ~ N(0, I); loss (y − g(a·x))² with g = f unless a student is given.
    Supervised { teacher: Activation, student: Option<Activation> },
    /// y | a from the exponential family with canonical parameter a·θ; loss −y(a·x) + b(a·x).
    Glm(GlmFamily),
    /// y = a·θ + σε; loss (y − a·x)².
    LinearRegression { noise_std: T },
    /// Y = J + λθ^{⊗p}; loss −⟨Y, x^{⊗p}⟩.
    TensorPca { order: usize, snr: T, entries: EntryDistribution },
    /// Two independent spiked tensors of orders p and q; loss L_p + w·L_q.
    CompositeTensor { orders: (usize, usize), snr: T, weight: T, entries: EntryDistribution },
    /// Y = Z + εθ with P(ε = 1) = p; loss −log cosh(Y·x + h), h = ½ log(p/(1−p)).
    GaussianMixture { p: T },
    /// No data: the per-sample loss is φ(x·θ) itself. Used as a zero-noise control.
    Population { coefficients: Vec<T> },
}

impl<T: Real> Family<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Supervised { .. } => "supervised",
            Family::Glm(_) => "glm",
            Family::LinearRegression { .. } => "linear_regression",
            Family::TensorPca { .. } => "tensor_pca",
            Family::CompositeTensor { .. } => "composite_tensor",
            Family::GaussianMixture { .. } => "gaussian_mixture",
            Family::Population { .. } => "population",
        }
    }

    /// Mixture parameterized by the tilt h instead of the weight p.
    pub fn mixture_from_tilt(h: T) -> Result<Self> {
        let e = (h + h).exp();
        let p = e / (T::one() + e);
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidArgument(format!("mixture tilt {h} gives a degenerate weight")));
        }
        Ok(Family::GaussianMixture { p })
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            Family::LinearRegression { noise_std } if !(*noise_std >= T::zero()) => {
                bad(format!("noise_std {noise_std} must be nonnegative"))
            }
            Family::TensorPca { order, snr, .. } if *order < 2 || !(*snr > T::zero()) => {
                bad(format!("tensor PCA needs order >= 2 and snr > 0, got p={order}, snr={snr}"))
            }
            Family::CompositeTensor { orders: (p, q), snr, weight, .. }
                if *p < 2 || *q < 2 || !(*snr > T::zero()) || !(*weight >= T::zero()) =>
            {
                bad(format!("composite tensor needs orders >= 2, snr > 0, weight >= 0; got ({p},{q}), {snr}, {weight}"))
            }
            Family::GaussianMixture { p } if !(*p > T::zero() && *p < T::one()) => {
                bad(format!("mixture weight {p} must lie in (0, 1)"))
            }
            Family::Population { coefficients } if coefficients.is_empty() => bad("empty population profile".into()),
            _ => Ok(()),
        }
    }
}

/// One observation. Buffers are reused by [`ModelSpec::sample_into`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sample<T> {
    /// Response and features.
    Response { y: T, a: Vec<T> },
    /// Key of a streamed noise tensor; entries are regenerated on demand.
    Tensor { key: u64 },
    /// Observation vector.
    Observation { y: Vec<T> },
    /// Zero-noise control.
    Empty,
}

impl<T> Sample<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Sample::Response { .. } => "response",
            Sample::Tensor { .. } => "tensor",
            Sample::Observation { .. } => "observation",
            Sample::Empty => "empty",
        }
    }
}

/// Where the ambient gradient points: `coefficient · vector`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum GradDirection {
    /// The sample's features `a` or observation `Y`.
    Data,
    /// The hidden direction θ.
    Theta,
    /// A general vector written to the scratch buffer.
    Dense,
}

/// A data distribution in dimension N with hidden direction θ.
///
/// Samples are drawn in the frame where θ = e_1 and then mapped by the
/// Householder reflection taking e_1 to θ, so a run with a random θ reproduces
/// the θ = e_1 run step for step. Tensor noise is not rotated; only the spike uses θ.
#[derive(Debug, Clone)]
pub struct ModelSpec<T> {
    family: Family<T>,
    dim: usize,
    theta: UnitVector<T>,
    reflection: Reflection<T>,
    rejections: Arc<AtomicU64>,
}

impl<T: Real> ModelSpec<T> {
    pub fn new(family: Family<T>, dim: usize) -> Result<Self> {
        family.validate()?;
        let theta = UnitVector::basis(dim, 0)?;
        let reflection = Reflection::onto(&theta);
        Ok(Self { family, dim, theta, reflection, rejections: Arc::new(AtomicU64::new(0)) })
    }

    pub fn with_theta(mut self, theta: UnitVector<T>) -> Result<Self> {
        if theta.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: theta.dim() });
        }
        self.reflection = Reflection::onto(&theta);
        self.theta = theta;
        Ok(self)
    }

    pub fn with_random_theta<R: Rng + ?Sized>(self, rng: &mut R) -> Result<Self> {
        let g = (0..self.dim).map(|_| T::standard_normal(rng)).collect();
        let theta = UnitVector::normalize(g)?;
        self.with_theta(theta)
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> &UnitVector<T> {
        &self.theta
    }

    pub(crate) fn reflection(&self) -> &Reflection<T> {
        &self.reflection
    }

    /// Poisson draws rejected because a·θ exceeded 30.
    pub fn rejections(&self) -> u64 {
        self.rejections.load(Ordering::Relaxed)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample<T> {
        let mut s = Sample::Empty;
        self.sample_into(rng, &mut s);
        s
    }

    /// Draws one observation into `out`, reusing its buffers when the kind matches.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Sample<T>) {
        let n = self.dim;
        match &self.family {
            Family::Supervised { .. } | Family::Glm(_) | Family::LinearRegression { .. } => {
                if !matches!(out, Sample::Response { .. }) {
                    *out = Sample::Response { y: T::zero(), a: Vec::with_capacity(n) };
                }
                let Sample::Response { y, a } = out else { unreachable!() };
                *y = self.draw_response(rng, a);
                self.reflection.apply_in_place(a);
            }
            Family::TensorPca { .. } | Family::CompositeTensor { .. } => {
                *out = Sample::Tensor { key: rng.random() };
            }
            Family::GaussianMixture { p } => {
                if !matches!(out, Sample::Observation { .. }) {
                    *out = Sample::Observation { y: Vec::with_capacity(n) };
                }
                let Sample::Observation { y } = out else { unreachable!() };
                fill_normal(rng, y, n);
                let eps = if rng.random::<f64>() < p.to_f64_lossy() { T::one() } else { -T::one() };
                y[0] = y[0] + eps;
                self.reflection.apply_in_place(y);
            }
            Family::Population { .. } => *out = Sample::Empty,
        }
    }

    fn draw_response<R: Rng + ?Sized>(&self, rng: &mut R, a: &mut Vec<T>) -> T {
        let n = self.dim;
        loop {
            fill_normal(rng, a, n);
            let z = a[0];
            match &self.family {
                Family::Supervised { teacher, .. } => return teacher.eval(z),
                Family::LinearRegression { noise_std } => return z + *noise_std * T::standard_normal(rng),
                Family::Glm(GlmFamily::Linear) => return z + T::standard_normal(rng),
                Family::Glm(GlmFamily::Logistic) => {
                    let u: f64 = rng.random();
                    return if u < sigmoid(z.to_f64_lossy()) { T::one() } else { T::zero() };
                }
                Family::Glm(GlmFamily::Poisson) => {
                    let eta = z.to_f64_lossy();
                    if eta > 30.0 {
                        self.rejections.fetch_add(1, Ordering::Relaxed);
                        continue;
                    }
                    let draw: f64 = Poisson::new(eta.exp()).expect("finite positive rate").sample(rng);
                    return T::lit(draw);
                }
                _ => unreachable!("response families only"),
            }
        }
    }

    /// Per-sample loss L(x; s).
    pub fn loss(&self, x: &UnitVector<T>, s: &Sample<T>) -> Result<T> {
        self.check_dim(x)?;
        let xs = x.as_slice();
        let v = match (&self.family, s) {
            (Family::Supervised { teacher, student }, Sample::Response { y, a }) => {
                let g = student.as_ref().unwrap_or(teacher);
                let r = *y - g.eval(dot(a, xs));
                r * r
            }
            (Family::Glm(fam), Sample::Response { y, a }) => {
                let z = dot(a, xs);
                -*y * z + fam.cumulant(z)
            }
            (Family::LinearRegression { .. }, Sample::Response { y, a }) => {
                let r = *y - dot(a, xs);
                r * r
            }
            (Family::TensorPca { order, snr, entries }, Sample::Tensor { key }) => {
                let m = dot(xs, self.theta.as_slice());
                -(tensor_form(*key, *order, *entries, xs) + *snr * m.powi(*order as i32))
            }
            (Family::CompositeTensor { orders: (p, q), snr, weight, entries }, Sample::Tensor { key }) => {
                let m = dot(xs, self.theta.as_slice());
                let lp = tensor_form(*key, *p, *entries, xs) + *snr * m.powi(*p as i32);
                let lq = tensor_form(second_key(*key), *q, *entries, xs) + *snr * m.powi(*q as i32);
                -(lp + *weight * lq)
            }
            (Family::GaussianMixture { p }, Sample::Observation { y }) => -log_cosh(dot(y, xs) + tilt(*p)),
            (Family::Population { coefficients }, Sample::Empty) => {
                let m = dot(xs, self.theta.as_slice());
                coefficients.iter().rev().fold(T::zero(), |acc, &c| acc * m + c)
            }
            _ => return Err(self.kind_mismatch(s)),
        };
        finite(v, "loss", s)
    }

    /// Ambient Euclidean gradient of the loss in x.
    pub fn euclid_gradient(&self, x: &UnitVector<T>, s: &Sample<T>) -> Result<Vec<T>> {
        self.check_dim(x)?;
        let mut dense = Vec::new();
        let (c, dir) = self.gradient_parts(x.as_slice(), s, &mut dense)?;
        let v: &[T] = match (dir, s) {
            (GradDirection::Data, Sample::Response { a, .. }) => a,
            (GradDirection::Data, Sample::Observation { y }) => y,
            (GradDirection::Theta, _) => self.theta.as_slice(),
            (GradDirection::Dense, _) => &dense,
            _ => unreachable!("data direction needs a data sample"),
        };
        Ok(v.iter().map(|&vi| c * vi).collect())
    }

    /// Spherical gradient: the tangent projection of [`Self::euclid_gradient`].
    pub fn spherical_gradient(&self, x: &UnitVector<T>, s: &Sample<T>) -> Result<Vec<T>> {
        tangent_project(x, &self.euclid_gradient(x, s)?)
    }

    /// Gradient as `(c, direction)`; for `Dense` the vector is written to `dense` and c = 1.
    pub(crate) fn gradient_parts(&self, xs: &[T], s: &Sample<T>, dense: &mut Vec<T>) -> Result<(T, GradDirection)> {
        let two = T::lit(2.0);
        let out = match (&self.family, s) {
            (Family::Supervised { teacher, student }, Sample::Response { y, a }) => {
                let g = student.as_ref().unwrap_or(teacher);
                let z = dot(a, xs);
                (two * (g.eval(z) - *y) * g.derivative(z), GradDirection::Data)
            }
            (Family::Glm(fam), Sample::Response { y, a }) => (fam.mean(dot(a, xs)) - *y, GradDirection::Data),
            (Family::LinearRegression { .. }, Sample::Response { y, a }) => {
                (two * (dot(a, xs) - *y), GradDirection::Data)
            }
            (Family::TensorPca { order, snr, entries }, Sample::Tensor { key }) => {
                dense.clear();
                dense.resize(self.dim, T::zero());
                tensor_gradient(*key, *order, *entries, xs, T::one(), dense);
                let m = dot(xs, self.theta.as_slice());
                let spike = *snr * T::from_usize_lossy(*order) * m.powi(*order as i32 - 1);
                for (d, &t) in dense.iter_mut().zip(self.theta.as_slice()) {
                    *d = -(*d + spike * t);
                }
                (T::one(), GradDirection::Dense)
            }
            (Family::CompositeTensor { orders: (p, q), snr, weight, entries }, Sample::Tensor { key }) => {
                dense.clear();
                dense.resize(self.dim, T::zero());
                tensor_gradient(*key, *p, *entries, xs, T::one(), dense);
                tensor_gradient(second_key(*key), *q, *entries, xs, *weight, dense);
                let m = dot(xs, self.theta.as_slice());
                let spike = *snr
                    * (T::from_usize_lossy(*p) * m.powi(*p as i32 - 1)
                        + *weight * T::from_usize_lossy(*q) * m.powi(*q as i32 - 1));
                for (d, &t) in dense.iter_mut().zip(self.theta.as_slice()) {
                    *d = -(*d + spike * t);
                }
                (T::one(), GradDirection::Dense)
            }
            (Family::GaussianMixture { p }, Sample::Observation { y }) => {
                (-(dot(y, xs) + tilt(*p)).tanh(), GradDirection::Data)
            }
            (Family::Population { coefficients }, Sample::Empty) => {
                let m = dot(xs, self.theta.as_slice());
                let d = coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(T::zero(), |acc, (j, &c)| acc * m + T::from_usize_lossy(j) * c);
                (d, GradDirection::Theta)
            }
            _ => return Err(self.kind_mismatch(s)),
        };
        finite(out.0, "gradient", s)?;
        if out.1 == GradDirection::Dense {
            for &d in dense.iter() {
                finite(d, "gradient", s)?;
            }
        }
        Ok(out)
    }

    /// ⟨Y, x^{⊗p}⟩ for a tensor sample (the order-p tensor of a composite).
    pub fn tensor_value(&self, x: &[T], s: &Sample<T>) -> Result<T> {
        let (order, snr, entries) = match &self.family {
            Family::TensorPca { order, snr, entries } => (*order, *snr, *entries),
            Family::CompositeTensor { orders: (p, _), snr, entries, .. } => (*p, *snr, *entries),
            _ => return Err(Error::InvalidArgument("not a tensor model".into())),
        };
        let Sample::Tensor { key } = s else { return Err(self.kind_mismatch(s)) };
        let m = dot(x, self.theta.as_slice());
        Ok(tensor_form(*key, order, entries, x) + snr * m.powi(order as i32))
    }

    /// φ, φ′ and the derived constants for this family.
    ///
    /// Every φ here is the exact mean of the per-sample loss, additive constant
    /// included (supervised profiles up to the Hermite truncation).
    pub fn population_profile(&self) -> Result<PopulationProfile<T>> {
        match &self.family {
            Family::Supervised { teacher, student } => {
                let tp = HermiteProfile::of(teacher)?;
                match student {
                    None => supervised_population_profile(&tp),
                    Some(g) => cross_population_profile(&tp, &HermiteProfile::of(g)?),
                }
            }
            Family::Glm(fam) => {
                let rule = GaussianRule::hermite(64)?;
                let u1 = rule.expect(|z| fam.mean_derivative(z))?;
                let c = rule.expect(|z| fam.cumulant(z))?;
                Ok(PopulationProfile::polynomial_with_exponent(vec![T::lit(c), T::lit(-u1)], 1))
            }
            Family::LinearRegression { noise_std } => {
                let c = T::lit(2.0) + *noise_std * *noise_std;
                Ok(PopulationProfile::polynomial_with_exponent(vec![c, T::lit(-2.0)], 1))
            }
            Family::TensorPca { order, snr, .. } => {
                let mut c = vec![T::zero(); order + 1];
                c[*order] = -*snr;
                Ok(PopulationProfile::polynomial_with_exponent(c, *order))
            }
            Family::CompositeTensor { orders: (p, q), snr, weight, .. } => {
                let mut c = vec![T::zero(); p.max(q) + 1];
                c[*p] = c[*p] - *snr;
                c[*q] = c[*q] - *snr * *weight;
                let k = if *weight > T::zero() { *p.min(q) } else { *p };
                Ok(PopulationProfile::polynomial_with_exponent(c, k))
            }
            Family::GaussianMixture { p } => PopulationProfile::mixture(*p),
            Family::Population { coefficients } => PopulationProfile::polynomial(coefficients.clone()),
        }
    }

    fn check_dim(&self, x: &UnitVector<T>) -> Result<()> {
        if x.dim() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, got: x.dim() })
        }
    }

    fn kind_mismatch(&self, s: &Sample<T>) -> Error {
        Error::InvalidArgument(format!("{} sample passed to a {} model", s.kind(), self.family.name()))
    }
}

fn tilt<T: Real>(p: T) -> T {
    T::lit(0.5) * (p / (T::one() - p)).ln()
}

fn finite<T: Real>(v: T, what: &'static str, s: &Sample<T>) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        let seed = if let Sample::Tensor { key } = s { *key } else { 0 };
        Err(Error::NonFinite { what, seed, step: 0 })
    }
}

fn fill_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, v: &mut Vec<T>, n: usize) {
    v.clear();
    v.extend((0..n).map(|_| T::standard_normal(rng)));
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn second_key(key: u64) -> u64 {
    mix64(key ^ 0x5EC0_4D7E_A5A5_0001)
}

/// Entry `index` of the noise tensor with stream `key`: a pure function of both.
#[inline]
pub fn tensor_entry(key: u64, index: u64, entries: EntryDistribution) -> f64 {
    let h1 = mix64(key ^ mix64(index));
    match entries {
        EntryDistribution::Rademacher => {
            if h1 >> 63 == 1 {
                1.0
            } else {
                -1.0
            }
        }
        EntryDistribution::Gaussian => {
            let h2 = mix64(h1);
            let u1 = ((h1 >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
            let u2 = (h2 >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        }
    }
}

/// Calls `visit(multi_index, entry)` over all N^p entries in row-major order.
fn for_each_entry<F: FnMut(&[usize], f64)>(key: u64, order: usize, n: usize, entries: EntryDistribution, mut visit: F) {
    let mut idx = vec![0usize; order];
    let total = (n as u64).pow(order as u32);
    for lin in 0..total {
        visit(&idx, tensor_entry(key, lin, entries));
        for slot in (0..order).rev() {
            idx[slot] += 1;
            if idx[slot] < n {
                break;
            }
            idx[slot] = 0;
        }
    }
}

/// ⟨J, x^{⊗p}⟩ for the streamed noise tensor.
fn tensor_form<T: Real>(key: u64, order: usize, entries: EntryDistribution, x: &[T]) -> T {
    let xf: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
    let mut acc = 0.0;
    for_each_entry(key, order, x.len(), entries, |idx, j| {
        acc += j * idx.iter().map(|&i| xf[i]).product::<f64>();
    });
    T::lit(acc)
}

/// Adds `scale · ∇_x ⟨J, x^{⊗p}⟩` to `out`.
fn tensor_gradient<T: Real>(key: u64, order: usize, entries: EntryDistribution, x: &[T], scale: T, out: &mut [T]) {
    let xf: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
    let mut acc = vec![0.0; x.len()];
    let mut prefix = vec![1.0; order + 1];
    for_each_entry(key, order, x.len(), entries, |idx, j| {
        for q in 0..order {
            prefix[q + 1] = prefix[q] * xf[idx[q]];
        }
        let mut suffix = 1.0;
        for q in (0..order).rev() {
            acc[idx[q]] += j * prefix[q] * suffix;
            suffix *= xf[idx[q]];
        }
    });
    for (o, a) in out.iter_mut().zip(acc) {
        *o = *o + scale * T::lit(a);
    }
}

/// Monte Carlo estimates of the gradient-noise moments at a set of probe points.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionBEstimate {
    /// max over probes of E[(∇H·θ)²].
    pub c1_hat: f64,
    /// max over probes of E[‖∇H‖^{4+ι}] / N^{(4+ι)/2}.
    pub grad_moment_hat: f64,
    /// max over probes of E[‖∇H‖²] / N.
    pub second_moment_hat: f64,
    pub iota: f64,
    pub probe_count: usize,
    pub samples_per_probe: usize,
    /// Standard errors of the three maxima, in the same order.
    pub standard_errors: [f64; 3],
    pub probes: Vec<ProbeEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeEstimate {
    pub m: f64,
    pub directional: f64,
    pub directional_se: f64,
    pub moment: f64,
    pub moment_se: f64,
    pub second: f64,
    pub second_se: f64,
}

/// Estimates the moments of ∇H = ∇L − ∇Φ (spherical gradients) at probe points
/// m ∈ {0, 0.25, 0.5, 0.9} on one geodesic from θ, plus uniform random points.
pub fn verify_assumption_b<T: Real, R: Rng + ?Sized>(
    model: &ModelSpec<T>,
    iota: f64,
    probes: usize,
    samples_per_probe: usize,
    rng: &mut R,
) -> Result<AssumptionBEstimate> {
    if probes < 4 || samples_per_probe < 100 {
        return Err(Error::Precondition(format!(
            "need at least 4 probes and 100 samples per probe, got {probes} and {samples_per_probe}"
        )));
    }
    if !(iota > 0.0) {
        return Err(Error::InvalidArgument(format!("iota must be positive, got {iota}")));
    }
    let profile = model.population_profile()?;
    let theta = model.theta();
    let n = model.dim();
    let nf = n as f64;
    let geodesic = UnitVector::at_correlation(rng, theta, T::zero())?;
    let mut points = Vec::with_capacity(probes);
    for m in [0.0, 0.25, 0.5, 0.9] {
        let s = (1.0 - m * m as f64).sqrt();
        let v = theta
            .as_slice()
            .iter()
            .zip(geodesic.as_slice())
            .map(|(&t, &u)| T::lit(m) * t + T::lit(s) * u)
            .collect();
        points.push(UnitVector::normalize(v)?);
    }
    while points.len() < probes {
        let g = (0..n).map(|_| T::standard_normal(rng)).collect();
        points.push(UnitVector::normalize(g)?);
    }

    let power = 4.0 + iota;
    let mut estimates = Vec::with_capacity(probes);
    let mut sample = Sample::Empty;
    for x in &points {
        let m = dot(x.as_slice(), theta.as_slice());
        let dphi = profile.phi_prime(m);
        let grad_phi: Vec<T> = theta
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(&t, &xi)| dphi * (t - m * xi))
            .collect();
        let mut stats = [Moments::default(), Moments::default(), Moments::default()];
        for _ in 0..samples_per_probe {
            model.sample_into(rng, &mut sample);
            let gl = model.spherical_gradient(x, &sample)?;
            let mut dir = 0.0;
            let mut sq = 0.0;
            for ((&a, &b), &t) in gl.iter().zip(&grad_phi).zip(theta.as_slice()) {
                let h = (a - b).to_f64_lossy();
                dir += h * t.to_f64_lossy();
                sq += h * h;
            }
            stats[0].push(dir * dir);
            stats[1].push(sq.powf(power / 2.0) / nf.powf(power / 2.0));
            stats[2].push(sq / nf);
        }
        let [d, mo, se] = stats.map(|s| s.mean_and_se());
        estimates.push(ProbeEstimate {
            m: m.to_f64_lossy(),
            directional: d.0,
            directional_se: d.1,
            moment: mo.0,
            moment_se: mo.1,
            second: se.0,
            second_se: se.1,
        });
    }
    let argmax = |f: fn(&ProbeEstimate) -> (f64, f64)| {
        estimates
            .iter()
            .map(f)
            .fold((0.0_f64, 0.0_f64), |best, cur| if cur.0 > best.0 { cur } else { best })
    };
    let c1 = argmax(|p| (p.directional, p.directional_se));
    let mo = argmax(|p| (p.moment, p.moment_se));
    let se = argmax(|p| (p.second, p.second_se));
    Ok(AssumptionBEstimate {
        c1_hat: c1.0,
        grad_moment_hat: mo.0,
        second_moment_hat: se.0,
        iota,
        probe_count: probes,
        samples_per_probe,
        standard_errors: [c1.1, mo.1, se.1],
        probes: estimates,
    })
}

#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean_and_se(self) -> (f64, f64) {
        let mean = self.sum / self.n;
        let var = ((self.sum_sq / self.n - mean * mean) * self.n / (self.n - 1.0)).max(0.0);
        (mean, (var / self.n).sqrt())
    }
}
