//! Population loss profiles φ(m) and the quantities the dynamics consume.

use serde::Serialize;

use super::quadrature::GaussianRule;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nodes in the Gauss–Hermite rule behind the mixture profile.
pub const MIXTURE_QUAD_ORDER: usize = 64;

/// How φ is represented.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiForm<T> {
    /// φ(m) = Σ_j c_j m^j with `coefficients[j] = c_j`.
    Polynomial { coefficients: Vec<T> },
    /// φ(m) = −E[log cosh(Z + εm + h)] with P(ε = 1) = p.
    Mixture { p: T, h: T, rule: Vec<(T, T)> },
}

/// φ, φ′ and the constants derived from them for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationProfile<T> {
    form: PhiForm<T>,
    info_exponent: usize,
    drift_coefficient: T,
    grad_norm_bound: T,
    assumption_a_holds: bool,
}

/// Plain-number view of a profile for reports.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub info_exponent: usize,
    pub drift_coefficient: f64,
    pub grad_norm_bound: f64,
    pub assumption_a_holds: bool,
    pub phi_at_zero: f64,
}

impl<T: Real> PopulationProfile<T> {
    /// Polynomial profile with the exponent detected as the first coefficient
    /// with |c_j| > 1e-12·max_i |c_i| (i ≥ 1).
    pub fn polynomial(coefficients: Vec<T>) -> Result<Self> {
        let scale = coefficients
            .iter()
            .skip(1)
            .fold(T::zero(), |acc, c| acc.max(c.abs()));
        let tol = scale * T::lit(1e-12);
        let k = coefficients
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, c)| c.abs() > tol && scale > T::zero())
            .map(|(j, _)| j)
            .ok_or(Error::NoExponent { order: coefficients.len().saturating_sub(1) })?;
        Ok(Self::polynomial_with_exponent(coefficients, k))
    }

    /// Polynomial profile with a caller-supplied exponent k.
    pub fn polynomial_with_exponent(coefficients: Vec<T>, k: usize) -> Self {
        let ck = coefficients.get(k).copied().unwrap_or_else(T::zero);
        let drift = -T::from_usize_lossy(k) * ck;
        Self::finish(PhiForm::Polynomial { coefficients }, k, drift)
    }

    /// Profile of the symmetric two-component mixture with weight p on +θ.
    pub fn mixture(p: T) -> Result<Self> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidArgument(format!("mixture weight {p} must lie in (0, 1)")));
        }
        let h = T::lit(0.5) * (p / (T::one() - p)).ln();
        let rule = GaussianRule::hermite(MIXTURE_QUAD_ORDER)?
            .iter()
            .map(|(z, w)| (T::lit(z), T::lit(w)))
            .collect();
        let form = PhiForm::Mixture { p, h, rule };
        let probe = Self::finish(form.clone(), 1, T::one());
        let d1 = -probe.phi_prime(T::zero());
        let d2 = -probe.mixture_phi_second(T::zero());
        let tol = T::lit(1e-10);
        let (k, drift) = if d1.abs() > tol { (1, d1) } else { (2, d2) };
        Ok(Self::finish(form, k, drift))
    }

    fn finish(form: PhiForm<T>, k: usize, drift: T) -> Self {
        let mut out = Self {
            form,
            info_exponent: k,
            drift_coefficient: drift,
            grad_norm_bound: T::zero(),
            assumption_a_holds: false,
        };
        out.grad_norm_bound = (0..=2000)
            .map(|i| T::lit(-1.0 + i as f64 / 1000.0))
            .map(|m| {
                let d = out.phi_prime(m);
                d * d * (T::one() - m * m)
            })
            .fold(T::zero(), T::max);
        out.assumption_a_holds = drift > T::zero() && assumption_a_grid().all(|m| out.phi_prime(T::lit(m)) < T::zero());
        out
    }

    /// φ(m) = φ(−m) on a grid of [0, 1], to 1e-10 relative.
    pub fn is_even(&self) -> bool {
        (0..=100).map(|i| T::lit(i as f64 / 100.0)).all(|m| {
            let (a, b) = (self.phi(m), self.phi(-m));
            (a - b).abs() <= T::lit(1e-10) * (T::one() + a.abs())
        })
    }

    pub fn form(&self) -> &PhiForm<T> {
        &self.form
    }

    pub fn phi(&self, m: T) -> T {
        match &self.form {
            PhiForm::Polynomial { coefficients } => coefficients.iter().rev().fold(T::zero(), |acc, &c| acc * m + c),
            PhiForm::Mixture { p, h, rule } => -Self::eps_average(*p, |e| {
                rule.iter().fold(T::zero(), |acc, &(z, w)| acc + w * log_cosh(z + e * m + *h))
            }),
        }
    }

    pub fn phi_prime(&self, m: T) -> T {
        match &self.form {
            PhiForm::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(T::zero(), |acc, (j, &c)| acc * m + T::from_usize_lossy(j) * c),
            PhiForm::Mixture { p, h, rule } => -Self::eps_average(*p, |e| {
                rule.iter().fold(T::zero(), |acc, &(z, w)| acc + w * (z + e * m + *h).tanh() * e)
            }),
        }
    }

    fn mixture_phi_second(&self, m: T) -> T {
        match &self.form {
            PhiForm::Mixture { p, h, rule } => -Self::eps_average(*p, |e| {
                rule.iter().fold(T::zero(), |acc, &(z, w)| {
                    let c = (z + e * m + *h).cosh();
                    acc + w / (c * c)
                })
            }),
            PhiForm::Polynomial { .. } => unreachable!("only used for mixtures"),
        }
    }

    fn eps_average<F: Fn(T) -> T>(p: T, g: F) -> T {
        p * g(T::one()) + (T::one() - p) * g(-T::one())
    }

    pub fn info_exponent(&self) -> usize {
        self.info_exponent
    }

    /// −φ^{(k)}(0)/(k−1)!, so that −φ′(m) ≈ drift·m^{k−1} near the equator.
    pub fn drift_coefficient(&self) -> T {
        self.drift_coefficient
    }

    /// sup over the sphere of |∇Φ|² = φ′(m)²(1 − m²), on a 2001-point grid.
    pub fn grad_norm_bound(&self) -> T {
        self.grad_norm_bound
    }

    /// φ′ < 0 on the grid 0.01, 0.02, …, 0.99 and a positive drift coefficient.
    pub fn assumption_a_holds(&self) -> bool {
        self.assumption_a_holds
    }

    /// Errors unless the negativity condition holds or `force` is set.
    pub fn require_assumption_a(&self, force: bool) -> Result<()> {
        if self.assumption_a_holds || force {
            Ok(())
        } else {
            Err(Error::AssumptionAViolated)
        }
    }

    pub fn summary(&self) -> ProfileSummary {
        ProfileSummary {
            info_exponent: self.info_exponent,
            drift_coefficient: self.drift_coefficient.to_f64_lossy(),
            grad_norm_bound: self.grad_norm_bound.to_f64_lossy(),
            assumption_a_holds: self.assumption_a_holds,
            phi_at_zero: self.phi(T::zero()).to_f64_lossy(),
        }
    }

    /// The same profile in another scalar type.
    pub fn cast<U: Real>(&self) -> PopulationProfile<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        let form = match &self.form {
            PhiForm::Polynomial { coefficients } => PhiForm::Polynomial {
                coefficients: coefficients.iter().map(|&v| c(v)).collect(),
            },
            PhiForm::Mixture { p, h, rule } => PhiForm::Mixture {
                p: c(*p),
                h: c(*h),
                rule: rule.iter().map(|&(z, w)| (c(z), c(w))).collect(),
            },
        };
        PopulationProfile {
            form,
            info_exponent: self.info_exponent,
            drift_coefficient: c(self.drift_coefficient),
            grad_norm_bound: c(self.grad_norm_bound),
            assumption_a_holds: self.assumption_a_holds,
        }
    }
}

fn assumption_a_grid() -> impl Iterator<Item = f64> {
    (1..=99).map(|i| i as f64 / 100.0)
}

/// log cosh(u) without overflow.
pub fn log_cosh<T: Real>(u: T) -> T {
    let a = u.abs();
    a + (-(a + a)).exp().ln_1p() - T::LN_2()
}
