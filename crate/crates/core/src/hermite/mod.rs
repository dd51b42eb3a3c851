//! Orthonormal Hermite analysis of activations and the supervised population loss.
//!
//! Convention: h_k are the *orthonormal* probabilists' Hermite polynomials,
//! E[h_j(Z) h_k(Z)] = δ_jk for Z ~ N(0, 1). So h_2(z) = (z² − 1)/√2 and
//! u_k(f) = E[f(Z) h_k(Z)]. The physicists' H_k or the monic He_k would rescale
//! every coefficient.
//!
//! With this convention the noiseless supervised loss is
//! φ_f(m) = E[(f(Z₁m + Z₂√(1−m²)) − f(Z₁))²] = 2 Σ_j u_j² (1 − m^j).

pub mod profile;
pub mod quadrature;

use serde::Serialize;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::scalar::Real;
pub use profile::{log_cosh, PhiForm, PopulationProfile, ProfileSummary};
pub use quadrature::{GaussianRule, PlaneRule};

/// Default number of Hermite coefficients kept (u_0..u_J).
pub const DEFAULT_TRUNCATION: usize = 128;
/// Default Gauss–Hermite order for coefficient extraction.
pub const DEFAULT_QUAD_ORDER: usize = 200;
/// Default exponent-detection tolerance, relative to ‖f‖.
pub const DEFAULT_EXPONENT_TOL: f64 = 1e-8;

/// h_k(z) by the three-term recurrence h_{k+1} = (z h_k − √k h_{k−1})/√(k+1).
pub fn hermite_polynomial<T: Real>(k: usize, z: T) -> T {
    let mut prev = T::zero();
    let mut cur = T::one();
    for j in 0..k {
        let next = (z * cur - T::from_usize_lossy(j).sqrt() * prev) / T::from_usize_lossy(j + 1).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[j] = h_j(z)` for j = 0..out.len().
pub fn hermite_all(z: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = z;
    }
    for j in 1..out.len().saturating_sub(1) {
        out[j + 1] = (z * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
    }
}

/// u_k(f) = E[f(Z) h_k(Z)] by `quad_order`-point Gauss–Hermite quadrature.
pub fn hermite_coefficient<F: Fn(f64) -> f64>(f: F, k: usize, quad_order: usize) -> Result<f64> {
    if quad_order < k + 1 {
        return Err(Error::InvalidArgument(format!(
            "quadrature order {quad_order} too small for coefficient {k}"
        )));
    }
    let rule = GaussianRule::hermite(quad_order)?;
    rule.expect(|z| f(z) * hermite_polynomial(k, z))
}

/// Truncated Hermite expansion of an activation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteProfile {
    /// u_0..u_J.
    pub coefficients: Vec<f64>,
    pub truncation_order: usize,
    /// Quadrature value of ‖f‖² = E[f(Z)²].
    pub l2_norm_estimate: f64,
    /// ‖f‖² − Σ_{j≤J} u_j².
    pub tail_mass: f64,
    /// Part of `tail_mass` carried by even degrees.
    pub tail_even: f64,
    /// Part of `tail_mass` carried by odd degrees.
    pub tail_odd: f64,
}

impl HermiteProfile {
    /// Expands `f` against the given rule, which must be symmetric about zero.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, truncation_order: usize, rule: &GaussianRule) -> Result<Self> {
        let j = truncation_order;
        let mut coefficients = vec![0.0; j + 1];
        let mut h = vec![0.0; j + 1];
        let mut norm = 0.0;
        let mut even_norm = 0.0;
        for (z, w) in rule.iter() {
            let fz = f(z);
            let fm = f(-z);
            for v in [fz, fm] {
                if !v.is_finite() {
                    return Err(Error::NonFiniteAtNode { node: z, value: v });
                }
            }
            hermite_all(z, &mut h);
            for (u, hk) in coefficients.iter_mut().zip(&h) {
                *u += w * fz * hk;
            }
            norm += w * fz * fz;
            let e = 0.5 * (fz + fm);
            even_norm += w * e * e;
        }
        let captured_even: f64 = coefficients.iter().step_by(2).map(|u| u * u).sum();
        let captured_odd: f64 = coefficients.iter().skip(1).step_by(2).map(|u| u * u).sum();
        let tail_even = even_norm - captured_even;
        let tail_odd = (norm - even_norm) - captured_odd;
        Ok(Self {
            coefficients,
            truncation_order: j,
            l2_norm_estimate: norm,
            tail_mass: tail_even + tail_odd,
            tail_even,
            tail_odd,
        })
    }

    /// Expands a registered activation with a rule suited to it: Gauss–Hermite of
    /// order `quad_order` for polynomials, a composite rule split at the kinks otherwise.
    pub fn from_activation(act: &Activation, truncation_order: usize, quad_order: usize) -> Result<Self> {
        let rule = rule_for(act, quad_order)?;
        Self::from_fn(|z| act.eval(z), truncation_order, &rule)
    }

    /// Default truncation and quadrature.
    pub fn of(act: &Activation) -> Result<Self> {
        Self::from_activation(act, DEFAULT_TRUNCATION, DEFAULT_QUAD_ORDER)
    }

    pub fn u(&self, k: usize) -> f64 {
        self.coefficients.get(k).copied().unwrap_or(0.0)
    }

    /// Relative tail mass tail/‖f‖².
    pub fn relative_tail(&self) -> f64 {
        if self.l2_norm_estimate > 0.0 {
            self.tail_mass / self.l2_norm_estimate
        } else {
            0.0
        }
    }
}

fn rule_for(act: &Activation, quad_order: usize) -> Result<GaussianRule> {
    if act.polynomial_degree().is_some() {
        GaussianRule::hermite(quad_order)
    } else {
        GaussianRule::piecewise(act.kinks(), 40.0, 0.25, 20)
    }
}

/// Smallest j ≥ 1 with |u_j| > tol·‖f‖.
pub fn information_exponent(profile: &HermiteProfile, tol: f64) -> Result<usize> {
    let threshold = tol * profile.l2_norm_estimate.max(0.0).sqrt();
    profile
        .coefficients
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, u)| u.abs() > threshold)
        .map(|(j, _)| j)
        .ok_or(Error::NoExponent { order: profile.truncation_order })
}

/// φ(m) = 2 Σ_{j≤J} u_j² (1 − m^j), plus the even and odd tail masses placed at the
/// first omitted even and odd degrees. The tail terms make φ exact at m ∈ {−1, 0, 1}
/// and change it by O(|m|^{J+1}) elsewhere.
pub fn supervised_population_profile<T: Real>(profile: &HermiteProfile) -> Result<PopulationProfile<T>> {
    let k = information_exponent(profile, DEFAULT_EXPONENT_TOL)?;
    if profile.relative_tail() > 1e-6 {
        log::warn!(
            "Hermite tail carries {:.3e} of ||f||^2 beyond order {}; lumping it into two terms",
            profile.relative_tail(),
            profile.truncation_order
        );
    }
    let j = profile.truncation_order;
    let mut coefficients = vec![0.0; j + 3];
    let mut constant = 0.0;
    for (deg, u) in profile.coefficients.iter().enumerate().skip(1) {
        coefficients[deg] = -2.0 * u * u;
        constant += 2.0 * u * u;
    }
    let (next_even, next_odd) = if (j + 1) % 2 == 0 { (j + 1, j + 2) } else { (j + 2, j + 1) };
    for (deg, t) in [(next_even, profile.tail_even), (next_odd, profile.tail_odd)] {
        let t = t.max(0.0);
        coefficients[deg] = -2.0 * t;
        constant += 2.0 * t;
    }
    coefficients[0] = constant;
    let coefficients = coefficients.into_iter().map(T::lit).collect();
    Ok(PopulationProfile::polynomial_with_exponent(coefficients, k))
}

/// Mis-specified student g trained on teacher f:
/// φ(m) = −2 Σ_j u_j(f) u_j(g) m^j + ‖f‖² + ‖g‖².
pub fn cross_population_profile<T: Real>(
    teacher: &HermiteProfile,
    student: &HermiteProfile,
) -> Result<PopulationProfile<T>> {
    if teacher.truncation_order != student.truncation_order {
        return Err(Error::InvalidArgument(format!(
            "truncation orders differ: {} vs {}",
            teacher.truncation_order, student.truncation_order
        )));
    }
    let scale = (teacher.l2_norm_estimate * student.l2_norm_estimate).max(0.0).sqrt();
    let threshold = DEFAULT_EXPONENT_TOL * scale;
    let products: Vec<f64> = teacher
        .coefficients
        .iter()
        .zip(&student.coefficients)
        .map(|(a, b)| a * b)
        .collect();
    let k = products
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, p)| p.abs() > threshold)
        .map(|(j, _)| j)
        .ok_or(Error::NoExponent { order: teacher.truncation_order })?;
    let mut coefficients: Vec<f64> = products.iter().map(|p| -2.0 * p).collect();
    coefficients[0] += teacher.l2_norm_estimate + student.l2_norm_estimate;
    let coefficients = coefficients.into_iter().map(T::lit).collect();
    Ok(PopulationProfile::polynomial_with_exponent(coefficients, k))
}

/// Independent route to φ_f(m): E[(f(Z₁m + Z₂√(1−m²)) − f(Z₁))²] by planar quadrature.
pub fn population_loss_oracle<F: Fn(f64) -> f64>(f: F, m: f64, rule: &PlaneRule) -> Result<f64> {
    if !(-1.0..=1.0).contains(&m) {
        return Err(Error::InvalidArgument(format!("correlation {m} outside [-1, 1]")));
    }
    let s = (1.0 - m * m).max(0.0).sqrt();
    rule.expect(|a1, a2| {
        let d = f(a1 * m + a2 * s) - f(a1);
        d * d
    })
}

/// [`population_loss_oracle`] for a registered activation.
///
/// Uses a polar rule whose angular panels break where either argument crosses a kink
/// at the origin; `quad_order` sets the Gauss–Legendre order per panel.
pub fn population_loss_quadrature_oracle(act: &Activation, m: f64, quad_order: usize) -> Result<f64> {
    if act.kinks().iter().any(|&c| c != 0.0) {
        return Err(Error::InvalidArgument("planar oracle supports kinks at the origin only".into()));
    }
    let mut breaks = Vec::new();
    if !act.kinks().is_empty() {
        let s = (1.0 - m * m).max(0.0).sqrt();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let line = (-m).atan2(s);
        let pi = std::f64::consts::PI;
        breaks.extend([half_pi, 3.0 * half_pi, line, line + pi]);
    }
    let rule = PlaneRule::polar(&breaks, 14.0, quad_order.clamp(8, 64))?;
    population_loss_oracle(|z| act.eval(z), m, &rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn low_order_values() {
        assert_eq!(hermite_polynomial(0, 3.7_f64), 1.0);
        assert_abs_diff_eq!(hermite_polynomial(2, 1.0_f64), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hermite_polynomial(3, 2.0_f64), 2.0 / 6f64.sqrt(), epsilon = 1e-15);
        let mut all = [0.0; 6];
        hermite_all(0.7, &mut all);
        for (k, v) in all.iter().enumerate() {
            assert_abs_diff_eq!(*v, hermite_polynomial(k, 0.7), epsilon = 1e-15);
        }
    }

    #[test]
    fn closed_form_coefficients() {
        assert_abs_diff_eq!(hermite_coefficient(|z| z, 1, 10).unwrap(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(hermite_coefficient(|z| z, 3, 10).unwrap(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(hermite_coefficient(|z| z * z, 0, 10).unwrap(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(hermite_coefficient(|z| z * z, 2, 10).unwrap(), 2f64.sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(hermite_coefficient(|z| z * z, 1, 10).unwrap(), 0.0, epsilon = 1e-13);
        assert!(hermite_coefficient(|z| z, 5, 4).is_err());
    }

    #[test]
    fn relu_coefficients() {
        let p = HermiteProfile::of(&Activation::Relu).unwrap();
        assert_abs_diff_eq!(p.u(0), 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(p.u(1), 0.5, epsilon = 1e-13);
        // u_2 = E[max(Z,0)(Z²−1)]/√2 = 1/(2√π).
        assert_abs_diff_eq!(p.u(2), 1.0 / (2.0 * PI.sqrt()), epsilon = 1e-13);
        assert_abs_diff_eq!(p.u(3), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(p.l2_norm_estimate, 0.5, epsilon = 1e-13);
        assert!(p.tail_mass > 0.0 && p.tail_mass < 2e-4);
        assert!(p.tail_odd.abs() < 1e-12);
    }

    #[test]
    fn bessel_inequality() {
        for act in [Activation::Relu, Activation::Sigmoid, Activation::Abs, Activation::Cubic] {
            let p = HermiteProfile::of(&act).unwrap();
            let captured: f64 = p.coefficients.iter().map(|u| u * u).sum();
            assert!(captured <= p.l2_norm_estimate + 1e-8, "{act}");
            assert!(p.tail_mass >= -1e-8, "{act}: {}", p.tail_mass);
        }
    }

    #[test]
    fn exponents_of_named_activations() {
        let cases = [
            (Activation::Linear, 1),
            (Activation::Cubic, 1),
            (Activation::Sigmoid, 1),
            (Activation::Relu, 1),
            (Activation::Square, 2),
            (Activation::Abs, 2),
            (Activation::Hermite3, 3),
            (Activation::CubicMinus3x, 3),
            (Activation::Hermite4, 4),
        ];
        for (act, k) in cases {
            let p = HermiteProfile::of(&act).unwrap();
            assert_eq!(information_exponent(&p, DEFAULT_EXPONENT_TOL).unwrap(), k, "{act}");
        }
    }

    #[test]
    fn constant_activation_has_no_exponent() {
        let p = HermiteProfile::of(&Activation::Polynomial(vec![2.0])).unwrap();
        assert!(matches!(information_exponent(&p, 1e-8), Err(Error::NoExponent { .. })));
    }

    #[test]
    fn supervised_profiles() {
        let lin: PopulationProfile<f64> =
            supervised_population_profile(&HermiteProfile::of(&Activation::Linear).unwrap()).unwrap();
        assert_abs_diff_eq!(lin.phi(0.3), 2.0 * 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(lin.phi_prime(-0.4), -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lin.drift_coefficient(), 2.0, epsilon = 1e-12);

        let sq: PopulationProfile<f64> =
            supervised_population_profile(&HermiteProfile::of(&Activation::Square).unwrap()).unwrap();
        assert_eq!(sq.info_exponent(), 2);
        assert_abs_diff_eq!(sq.phi(0.5), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sq.phi_prime(0.5), -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sq.drift_coefficient(), 8.0, epsilon = 1e-12);

        for act in [Activation::Relu, Activation::Sigmoid, Activation::Hermite3] {
            let p: PopulationProfile<f64> = supervised_population_profile(&HermiteProfile::of(&act).unwrap()).unwrap();
            assert_abs_diff_eq!(p.phi(1.0), 0.0, epsilon = 1e-12);
            assert!(p.assumption_a_holds(), "{act}");
        }
    }

    #[test]
    fn derivatives_at_equator() {
        for act in [Activation::Relu, Activation::Sigmoid, Activation::Abs, Activation::Square] {
            let hp = HermiteProfile::of(&act).unwrap();
            let p: PopulationProfile<f64> = supervised_population_profile(&hp).unwrap();
            let h = 1e-4;
            let d1 = (p.phi(h) - p.phi(-h)) / (2.0 * h);
            let d2 = (p.phi(h) - 2.0 * p.phi(0.0) + p.phi(-h)) / (h * h);
            assert_abs_diff_eq!(d1, -2.0 * hp.u(1).powi(2), epsilon = 1e-8);
            assert_abs_diff_eq!(d2, -4.0 * hp.u(2).powi(2), epsilon = 1e-6);
        }
    }

    #[test]
    fn cross_profiles() {
        let f = HermiteProfile::of(&Activation::Polynomial(vec![0.0, 1.0, 1.0])).unwrap();
        let g = HermiteProfile::of(&Activation::Linear).unwrap();
        let p: PopulationProfile<f64> = cross_population_profile(&f, &g).unwrap();
        assert_eq!(p.info_exponent(), 1);
        assert_abs_diff_eq!(p.drift_coefficient(), 2.0, epsilon = 1e-12);

        let sq = HermiteProfile::of(&Activation::Square).unwrap();
        assert!(matches!(
            cross_population_profile::<f64>(&g, &sq),
            Err(Error::NoExponent { .. })
        ));

        let relu = HermiteProfile::of(&Activation::Relu).unwrap();
        let same: PopulationProfile<f64> = cross_population_profile(&relu, &relu).unwrap();
        let sup: PopulationProfile<f64> = supervised_population_profile(&relu).unwrap();
        let offset = same.phi(0.0) - sup.phi(0.0);
        for m in [-0.8, -0.2, 0.3, 0.9] {
            assert_abs_diff_eq!(same.phi(m) - sup.phi(m), offset, epsilon = 1e-9);
        }
    }

    #[test]
    fn oracle_simple_values() {
        assert_abs_diff_eq!(population_loss_quadrature_oracle(&Activation::Relu, 1.0, 20).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(population_loss_quadrature_oracle(&Activation::Linear, 0.0, 20).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(population_loss_quadrature_oracle(&Activation::Square, 0.5, 20).unwrap(), 3.0, epsilon = 1e-10);
        assert!(population_loss_quadrature_oracle(&Activation::Linear, 1.5, 20).is_err());
    }
}
