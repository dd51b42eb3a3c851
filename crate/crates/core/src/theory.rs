//! Closed-form predictions: critical sample complexity, admissible step sizes,
//! weak-recovery times, and the Grönwall, Bihari–LaSalle and refutation envelopes.

use num_traits::Num;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::AssumptionBEstimate;
use crate::scalar::Real;

/// Default constant K in the step-size bound.
pub const DEFAULT_K: f64 = 4.0;
/// Default scale γ of the starting latitude γ/√N.
pub const DEFAULT_GAMMA: f64 = 1.0;

/// Samples per dimension needed for recovery: 1, ln N, N^{k−2} for k = 1, 2, ≥ 3.
pub fn alpha_critical(n: usize, k: usize) -> Result<f64> {
    if n < 3 || k == 0 {
        return Err(Error::InvalidArgument(format!("alpha_critical needs N >= 3 and k >= 1, got N = {n}, k = {k}")));
    }
    let nf = n as f64;
    Ok(match k {
        1 => 1.0,
        2 => nf.ln(),
        _ => nf.powi(k as i32 - 2),
    })
}

/// δ̄_N(k): a/(4K L̄) for k = 1, a γ^{k−2} / (K L̄ N^{(k−2)/2} ln N) for k ≥ 2.
pub fn delta_bar(n: usize, k: usize, drift_coefficient: f64, lbar: f64, big_k: f64, gamma: f64) -> Result<f64> {
    positive(&[("drift coefficient", drift_coefficient), ("lbar", lbar), ("K", big_k), ("gamma", gamma)])?;
    if n < 3 || k == 0 {
        return Err(Error::InvalidArgument(format!("delta_bar needs N >= 3 and k >= 1, got N = {n}, k = {k}")));
    }
    let nf = n as f64;
    Ok(if k == 1 {
        drift_coefficient / (4.0 * big_k * lbar)
    } else {
        let e = (k - 2) as f64;
        drift_coefficient * gamma.powf(e) / (big_k * lbar * nf.powf(e / 2.0) * nf.ln())
    })
}

/// min(δ̄_N(k), 1/(√α ln N)), rejected if below 2/α.
pub fn recommended_delta(n: usize, k: usize, alpha: f64, drift_coefficient: f64, lbar: f64, big_k: f64) -> Result<f64> {
    recommended_delta_with_gamma(n, k, alpha, drift_coefficient, lbar, big_k, DEFAULT_GAMMA)
}

pub fn recommended_delta_with_gamma(
    n: usize,
    k: usize,
    alpha: f64,
    drift_coefficient: f64,
    lbar: f64,
    big_k: f64,
    gamma: f64,
) -> Result<f64> {
    positive(&[("alpha", alpha)])?;
    let bar = delta_bar(n, k, drift_coefficient, lbar, big_k, gamma)?;
    let delta = bar.min(1.0 / (alpha.sqrt() * (n as f64).ln()));
    let lower = 2.0 / alpha;
    if delta < lower {
        return Err(Error::EmptyStepWindow { delta, lower });
    }
    Ok(delta)
}

/// Smallest round α ≥ 20 α_c whose step window is nonempty: √α ≥ 2.2 ln N and α ≥ 2.2/δ̄.
pub fn default_alpha(n: usize, k: usize, delta_bar: f64) -> Result<f64> {
    let ln_n = (n as f64).ln();
    let need = (20.0 * alpha_critical(n, k)?).max((2.2 * ln_n).powi(2)).max(2.2 / delta_bar);
    Ok(need.ceil())
}

/// L̄ = max(E‖∇H‖²/N, 1) from a moment estimate.
pub fn lbar_from_estimate(est: &AssumptionBEstimate) -> f64 {
    est.second_moment_hat.max(1.0)
}

/// Predicted number of steps for the lower envelope to reach η from m0.
///
/// k = 1: ⌈8ηN/(δa)⌉. k = 2: ⌈(8N/(δa)) ln(2η/m0)⌉, clamped at 0.
/// k ≥ 3: first t with g_k(t) ≥ η, g_k(t) = m0 (1 − (δa/8N)(k−2) m0^{k−2} t)^{−1/(k−2)}.
pub fn predicted_weak_recovery_time(k: usize, n: usize, delta: f64, eta: f64, m0: f64, a: f64) -> Result<f64> {
    positive(&[("delta", delta), ("eta", eta), ("m0", m0), ("drift coefficient", a)])?;
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument("k and N must be positive".into()));
    }
    if m0 > 1.0 || eta >= 1.0 {
        return Err(Error::InvalidArgument(format!("need m0 <= 1 and eta < 1, got m0 = {m0}, eta = {eta}")));
    }
    let rate = 8.0 * n as f64 / (delta * a);
    let t = match k {
        1 => rate * eta,
        2 => (rate * ((2.0 / m0).ln() + eta.ln())).max(0.0),
        _ => {
            let e = (k - 2) as f64;
            let r = m0 / eta;
            if r >= 1.0 {
                0.0
            } else {
                (1.0 - r.powf(e)) * rate / (e * m0.powf(e))
            }
        }
    };
    Ok(t.ceil())
}

/// Discrete Grönwall lower bound a(1+b)^t.
pub fn gronwall_envelope<T: Num + Clone>(a: T, b: T, t: u64) -> T {
    let factor = T::one() + b;
    let mut out = a;
    for _ in 0..t {
        out = out * factor.clone();
    }
    out
}

/// t at which a(1 − b(k−2)a^{k−2}t)^{−1/(k−2)} blows up.
pub fn bihari_lasalle_blowup<T: Real>(a: T, b: T, k: usize) -> T {
    let e = T::from_usize_lossy(k - 2);
    T::one() / (b * e * a.powf(e))
}

/// Bihari–LaSalle envelope a(1 − b(k−2)a^{k−2}t)^{−1/(k−2)}, for k ≥ 3 before blowup.
pub fn bihari_lasalle_envelope<T: Real>(a: T, b: T, k: usize, t: u64) -> Result<T> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("Bihari-LaSalle envelope needs k >= 3, got {k}")));
    }
    if !(a >= T::zero() && b >= T::zero()) {
        return Err(Error::InvalidArgument("Bihari-LaSalle envelope needs a, b >= 0".into()));
    }
    let e = T::from_usize_lossy(k - 2);
    let base = T::one() - b * e * a.powf(e) * T::lit(t as f64);
    if !(base > T::zero()) {
        return Err(Error::Blowup { blowup_time: bihari_lasalle_blowup(a, b, k).to_f64_lossy() });
    }
    Ok(a * base.powf(-T::one() / e))
}

/// Upper envelope on the correlation from a start within d/√N:
/// 2d/√N + 2δat/N (k = 1), 2d/√N · exp(2δat/N) (k = 2), Bihari–LaSalle with
/// a' = 2d/√N and b = 2δa/N (k ≥ 3).
pub fn refutation_envelope(k: usize, n: usize, delta: f64, d: f64, a: f64, t: u64) -> Result<f64> {
    positive(&[("d", d)])?;
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument("k and N must be positive".into()));
    }
    let nf = n as f64;
    let start = 2.0 * d / nf.sqrt();
    let rate = 2.0 * delta * a / nf;
    Ok(match k {
        1 => start + rate * t as f64,
        2 => start * (rate * t as f64).exp(),
        _ => bihari_lasalle_envelope(start, rate, k, t)?,
    })
}

/// Everything `predict` reports for one regime.
#[derive(Debug, Clone, Serialize)]
pub struct RegimePrediction {
    pub k: usize,
    pub n: usize,
    pub alpha_critical: f64,
    pub alpha: f64,
    pub delta_recommended: f64,
    pub drift_coefficient: f64,
    pub lbar: f64,
    pub eta: f64,
    pub m0: f64,
    pub t_star: f64,
    /// (t, lower envelope) on an even grid up to t_star or blowup.
    pub envelope: Vec<(u64, f64)>,
    /// (t, refutation upper envelope) on the same grid.
    pub refutation_envelope: Vec<(u64, f64)>,
}

/// Inputs of [`RegimePrediction::compute`].
#[derive(Debug, Clone, Copy)]
pub struct PredictionInputs {
    pub k: usize,
    pub n: usize,
    /// Samples per dimension; defaults to [`default_alpha`] when `None`.
    pub alpha: Option<f64>,
    pub drift_coefficient: f64,
    pub lbar: f64,
    pub big_k: f64,
    pub gamma: f64,
    pub eta: f64,
    /// Start latitude; defaults to γ/√N.
    pub m0: Option<f64>,
    /// Starting-scale d of the refutation envelope.
    pub d: f64,
    pub grid_points: usize,
}

impl PredictionInputs {
    pub fn new(k: usize, n: usize, drift_coefficient: f64) -> Self {
        Self {
            k,
            n,
            alpha: None,
            drift_coefficient,
            lbar: 1.0,
            big_k: DEFAULT_K,
            gamma: DEFAULT_GAMMA,
            eta: 0.5,
            m0: None,
            d: 1.0,
            grid_points: 33,
        }
    }
}

impl RegimePrediction {
    pub fn compute(p: &PredictionInputs) -> Result<Self> {
        let alpha_c = alpha_critical(p.n, p.k)?;
        let alpha = match p.alpha {
            Some(a) => a,
            None => default_alpha(p.n, p.k, delta_bar(p.n, p.k, p.drift_coefficient, p.lbar, p.big_k, p.gamma)?)?,
        };
        let delta = recommended_delta_with_gamma(p.n, p.k, alpha, p.drift_coefficient, p.lbar, p.big_k, p.gamma)?;
        let m0 = p.m0.unwrap_or(p.gamma / (p.n as f64).sqrt());
        let t_star = predicted_weak_recovery_time(p.k, p.n, delta, p.eta, m0, p.drift_coefficient)?;
        let nf = p.n as f64;
        // Lower envelope of m_t ≥ m0/2 + (δa/8N) Σ m_j^{k−1}.
        let b = delta * p.drift_coefficient / (8.0 * nf);
        let horizon = t_star.max(1.0) as u64;
        let grid: Vec<u64> = (0..p.grid_points.max(2))
            .map(|i| horizon * i as u64 / (p.grid_points.max(2) - 1) as u64)
            .collect();
        let lower = |t: u64| -> Option<f64> {
            match p.k {
                1 => Some(m0 / 2.0 + b * t as f64),
                2 => Some(gronwall_envelope(m0 / 2.0, b, t)),
                _ => bihari_lasalle_envelope(m0, b, p.k, t).ok(),
            }
        };
        let envelope = grid.iter().filter_map(|&t| lower(t).map(|v| (t, v))).collect();
        let refutation = grid
            .iter()
            .filter_map(|&t| refutation_envelope(p.k, p.n, delta, p.d, p.drift_coefficient, t).ok().map(|v| (t, v)))
            .collect();
        Ok(Self {
            k: p.k,
            n: p.n,
            alpha_critical: alpha_c,
            alpha,
            delta_recommended: delta,
            drift_coefficient: p.drift_coefficient,
            lbar: p.lbar,
            eta: p.eta,
            m0,
            t_star,
            envelope,
            refutation_envelope: refutation,
        })
    }
}

fn positive(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    #[test]
    fn alpha_critical_values() {
        assert_eq!(alpha_critical(1000, 1).unwrap(), 1.0);
        assert_relative_eq!(alpha_critical(20, 2).unwrap(), 2.995_732_273_553_991, epsilon = 1e-12);
        assert_eq!(alpha_critical(100, 4).unwrap(), 10_000.0);
        assert!(alpha_critical(2, 1).is_err());
    }

    #[test]
    fn alpha_critical_ratio_grows() {
        for k in 2..5 {
            let r = |n| alpha_critical(n, k + 1).unwrap() / alpha_critical(n, k).unwrap();
            assert!(r(10_000) > r(1000) && r(1000) > r(100));
        }
    }

    #[test]
    fn delta_bar_shapes() {
        let d1 = delta_bar(100, 1, 2.0, 3.0, 4.0, 1.0).unwrap();
        assert_relative_eq!(d1, 2.0 / 48.0);
        assert_eq!(d1, delta_bar(100_000, 1, 2.0, 3.0, 4.0, 1.0).unwrap());
        let d3 = |n: usize| delta_bar(n, 3, 1.0, 1.0, 4.0, 1.0).unwrap();
        let nf = 400.0f64;
        assert_relative_eq!(d3(400), 1.0 / (4.0 * nf.sqrt() * nf.ln()), epsilon = 1e-15);
    }

    #[test]
    fn recommended_delta_window() {
        let d = recommended_delta(1000, 1, 400.0, 2.0, 1.0, 4.0).unwrap();
        assert_relative_eq!(d, 1.0 / (20.0 * 1000f64.ln()));
        let d = recommended_delta(1000, 1, 400.0, 2.0, 20.0, 4.0).unwrap();
        assert_relative_eq!(d, 2.0 / 320.0);
        assert!(recommended_delta(1000, 1, 100.0, 2.0, 1.0, 4.0).is_err());
        let err = recommended_delta(100_000, 2, 4.0, 1.0, 1.0, 4.0).unwrap_err();
        assert!(matches!(err, Error::EmptyStepWindow { .. }));
    }

    #[test]
    fn recovery_time_examples() {
        assert_eq!(predicted_weak_recovery_time(1, 1000, 0.1, 0.5, 0.01, 2.0).unwrap(), 20_000.0);
        assert_eq!(predicted_weak_recovery_time(2, 1000, 0.1, 0.25, 0.5, 2.0).unwrap(), 0.0);
        // k = 3 from m0 = 1/√N: t ∝ N²/δ once m0 ≪ η.
        let t = |n: usize, delta: f64| predicted_weak_recovery_time(3, n, delta, 0.5, 1.0 / (n as f64).sqrt(), 1.0).unwrap();
        let ratio = t(40_000, 0.1) / t(10_000, 0.1);
        assert!((ratio / 8.0 - 1.0).abs() < 0.02, "{ratio}");
        assert!((t(10_000, 0.05) / t(10_000, 0.1) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn recovery_time_matches_envelope_crossing() {
        let (n, delta, a, m0, eta) = (500, 0.3, 1.5, 0.05, 0.4);
        let t = predicted_weak_recovery_time(3, n, delta, eta, m0, a).unwrap() as u64;
        let b = delta * a / (8.0 * n as f64);
        assert!(bihari_lasalle_envelope(m0, b, 3, t).unwrap() >= eta - 1e-12);
        assert!(bihari_lasalle_envelope(m0, b, 3, t - 1).unwrap() < eta);
    }

    #[test]
    fn gronwall_equality_for_linear_recursion() {
        let a = BigRational::new(BigInt::from(1), BigInt::from(100));
        let b = BigRational::new(BigInt::from(1), BigInt::from(1000));
        let mut m = a.clone();
        let mut sum = BigRational::from_integer(BigInt::from(0));
        for t in 0..300u64 {
            assert_eq!(m, gronwall_envelope(a.clone(), b.clone(), t));
            sum += &m;
            m = &a + &b * &sum;
        }
        let mut m = 0.01f64;
        let mut sum = 0.0;
        for t in 0..10_000 {
            assert_relative_eq!(m, gronwall_envelope(0.01, 0.001, t), max_relative = 1e-10);
            sum += m;
            m = 0.01 + 0.001 * sum;
        }
    }

    #[test]
    fn gronwall_trivial_cases() {
        assert_eq!(gronwall_envelope(0.3, 0.7, 0), 0.3);
        assert_eq!(gronwall_envelope(0.3, 0.0, 50), 0.3);
    }

    #[test]
    fn bihari_lasalle_basics() {
        assert_eq!(bihari_lasalle_envelope(0.05, 1e-4, 3, 0).unwrap(), 0.05);
        let blow = bihari_lasalle_blowup(0.05, 1e-4, 3);
        assert_relative_eq!(blow, 200_000.0, max_relative = 1e-12);
        assert!(matches!(bihari_lasalle_envelope(0.05, 1e-4, 3, 200_000), Err(Error::Blowup { .. })));
        let mut prev = 0.0;
        for t in (0..199_000).step_by(1000) {
            let v = bihari_lasalle_envelope(0.05, 1e-4, 3, t).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn bihari_lasalle_is_the_continuous_solution() {
        // y' = b y^{k−1}, y(0) = a; compare against an RK4 integration.
        let (a, b, k) = (0.1f64, 0.02, 4usize);
        let f = |y: f64| b * y.powi(k as i32 - 1);
        let (mut y, h) = (a, 0.01);
        for _ in 0..100_000 {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert_relative_eq!(y, bihari_lasalle_envelope(a, b, k, 1000).unwrap(), max_relative = 1e-9);
    }

    #[test]
    fn refutation_envelope_values() {
        for k in 1..5 {
            assert_relative_eq!(refutation_envelope(k, 400, 0.3, 1.5, 2.0, 0).unwrap(), 0.15, epsilon = 1e-15);
        }
        let (n, delta, a) = (1000usize, 0.2, 3.0);
        let t = ((n as f64) / (2.0 * delta * a) * 2f64.ln()).round() as u64;
        let v = refutation_envelope(2, n, delta, 1.0, a, t).unwrap();
        assert_relative_eq!(v, 4.0 / (n as f64).sqrt(), max_relative = 1e-3);
        let v = refutation_envelope(1, 2048, 0.2, 1.0, 1.0, 2 * 2048).unwrap();
        assert_relative_eq!(v, 2.0 / 2048f64.sqrt() + 0.8, epsilon = 1e-14);
    }

    #[test]
    fn regime_prediction_k2() {
        let mut p = PredictionInputs::new(2, 1000, 8.0);
        p.lbar = 4.0;
        let r = RegimePrediction::compute(&p).unwrap();
        assert_relative_eq!(r.alpha_critical, 1000f64.ln());
        assert!(r.t_star > 0.0 && r.t_star.is_finite());
        assert!(r.envelope.windows(2).all(|w| w[1].1 >= w[0].1));
        // (1+b)^t sits just below e^{bt}, which reaches η exactly at t*.
        assert!(r.envelope.last().unwrap().1 >= 0.99 * p.eta);
    }

    proptest! {
        #[test]
        fn recovery_time_monotone(n in 100usize..10_000, delta in 0.01f64..1.0, a in 0.1f64..10.0,
                                  eta in 0.2f64..0.45, k in 1usize..5) {
            let m0 = 1.0 / (n as f64).sqrt();
            let t = predicted_weak_recovery_time(k, n, delta, eta, m0, a).unwrap();
            prop_assert!(t > 0.0 && t.is_finite());
            prop_assert!(predicted_weak_recovery_time(k, n, 2.0 * delta, eta, m0, a).unwrap() <= t);
            prop_assert!(predicted_weak_recovery_time(k, n, delta, eta, m0, 2.0 * a).unwrap() <= t);
            prop_assert!(predicted_weak_recovery_time(k, n, delta, eta + 0.04, m0, a).unwrap() >= t);
            prop_assert!(predicted_weak_recovery_time(k, 2 * n, delta, eta, 1.0 / (2.0 * n as f64).sqrt(), a).unwrap() >= t);
            if k >= 2 {
                prop_assert!(predicted_weak_recovery_time(k, n, delta, eta, 1.5 * m0, a).unwrap() <= t);
            }
        }

        #[test]
        fn gronwall_dominated_exactly(an in 1i64..100, bn in 1i64..100, steps in 1u64..60) {
            let a = BigRational::new(BigInt::from(an), BigInt::from(1000));
            let b = BigRational::new(BigInt::from(bn), BigInt::from(10_000));
            let mut m = a.clone();
            let mut sum = BigRational::from_integer(BigInt::from(0));
            for t in 0..steps {
                prop_assert!(m >= gronwall_envelope(a.clone(), b.clone(), t));
                sum += &m;
                m = &a + &b * &sum;
            }
        }
    }
}
