//! Geometry of the unit sphere S^{N-1}.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{dot, norm_sq, Real};

/// Norms below this cannot be normalized.
pub const MIN_NORM: f64 = 1e-300;

/// A point on S^{N-1} with N >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector<T> {
    coords: Vec<T>,
}

impl<T: Real> UnitVector<T> {
    /// Normalizes `v` onto the sphere.
    pub fn normalize(mut v: Vec<T>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "sphere dimension must be at least 2, got {}",
                v.len()
            )));
        }
        let norm = norm_sq(&v).sqrt();
        if !(norm.to_f64_lossy() >= MIN_NORM) {
            return Err(Error::ZeroNorm { norm: norm.to_f64_lossy() });
        }
        let inv = T::one() / norm;
        v.iter_mut().for_each(|c| *c = *c * inv);
        Ok(Self { coords: v })
    }

    /// The i-th standard basis vector e_{i+1} in dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Result<Self> {
        if dim < 2 || i >= dim {
            return Err(Error::InvalidArgument(format!("basis vector {i} in dimension {dim}")));
        }
        let mut coords = vec![T::zero(); dim];
        coords[i] = T::one();
        Ok(Self { coords })
    }

    /// Wraps coordinates that are already unit-norm up to rounding.
    ///
    /// Used on the hot path right after an explicit normalization.
    pub(crate) fn from_normalized_unchecked(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coords
    }

    pub fn norm(&self) -> T {
        norm_sq(&self.coords).sqrt()
    }

    /// Uniform point at latitude `m` relative to `theta`: m·θ + sqrt(1-m²)·u with u a
    /// uniform unit vector orthogonal to θ.
    pub fn at_correlation<R: Rng + ?Sized>(rng: &mut R, theta: &UnitVector<T>, m: T) -> Result<Self> {
        if m.abs() > T::one() {
            return Err(Error::InvalidArgument(format!("correlation {m} outside [-1, 1]")));
        }
        let n = theta.dim();
        let g: Vec<T> = (0..n).map(|_| T::standard_normal(rng)).collect();
        let u = UnitVector::normalize(tangent_project(theta, &g)?)?;
        let s = (T::one() - m * m).max(T::zero()).sqrt();
        let v = theta
            .coords
            .iter()
            .zip(&u.coords)
            .map(|(&t, &w)| m * t + s * w)
            .collect();
        UnitVector::normalize(v)
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// m(x) = x·θ.
pub fn correlation<T: Real>(x: &UnitVector<T>, theta: &UnitVector<T>) -> Result<T> {
    check_dims(theta.dim(), x.dim())?;
    Ok(dot(&x.coords, &theta.coords))
}

/// Projection of `g` onto the tangent space at `x`: g - (g·x) x.
pub fn tangent_project<T: Real>(x: &UnitVector<T>, g: &[T]) -> Result<Vec<T>> {
    check_dims(x.dim(), g.len())?;
    let radial = dot(g, &x.coords);
    Ok(g.iter().zip(&x.coords).map(|(&gi, &xi)| gi - radial * xi).collect())
}

/// Uniform draw on S^{N-1} conditioned on x·θ >= 0.
pub fn sample_upper_half_sphere<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    theta: &UnitVector<T>,
) -> Result<UnitVector<T>> {
    check_dims(theta.dim(), n)?;
    let g: Vec<T> = (0..n).map(|_| T::standard_normal(rng)).collect();
    let mut x = UnitVector::normalize(g)?;
    if dot(&x.coords, &theta.coords) < T::zero() {
        x.coords.iter_mut().for_each(|c| *c = -*c);
    }
    Ok(x)
}

/// Householder reflection H with H e_1 = θ; symmetric and orthogonal, so H = H⁻¹.
#[derive(Debug, Clone)]
pub struct Reflection<T> {
    /// Unit normal of the mirror, or `None` when θ = e_1.
    normal: Option<Vec<T>>,
}

impl<T: Real> Reflection<T> {
    pub fn onto(theta: &UnitVector<T>) -> Self {
        let mut v: Vec<T> = theta.coords.iter().map(|&t| -t).collect();
        v[0] = v[0] + T::one();
        let nrm = norm_sq(&v).sqrt();
        if nrm.to_f64_lossy() < 1e-14 {
            return Self { normal: None };
        }
        v.iter_mut().for_each(|c| *c = *c / nrm);
        Self { normal: Some(v) }
    }

    pub fn is_identity(&self) -> bool {
        self.normal.is_none()
    }

    pub fn apply_in_place(&self, w: &mut [T]) {
        if let Some(v) = &self.normal {
            let two_proj = T::lit(2.0) * dot(v, w);
            w.iter_mut().zip(v).for_each(|(wi, &vi)| *wi = *wi - two_proj * vi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uv(v: &[f64]) -> UnitVector<f64> {
        UnitVector::normalize(v.to_vec()).unwrap()
    }

    #[test]
    fn correlation_cases() {
        let e1 = UnitVector::<f64>::basis(3, 0).unwrap();
        let e2 = UnitVector::<f64>::basis(3, 1).unwrap();
        assert_eq!(correlation(&e1, &e1).unwrap(), 1.0);
        assert_eq!(correlation(&e2, &e1).unwrap(), 0.0);
        let x = uv(&[3.0 / 5.0, 4.0 / 5.0]);
        let theta = UnitVector::basis(2, 0).unwrap();
        assert_abs_diff_eq!(correlation(&x, &theta).unwrap(), 0.6, epsilon = 1e-15);
        assert!(matches!(
            correlation(&x, &e1),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn tangent_projection_cases() {
        let x = uv(&[0.3, -0.4, 0.5, 0.1]);
        let p = tangent_project(&x, x.as_slice()).unwrap();
        assert!(p.iter().all(|c| c.abs() < 1e-15));

        let x = UnitVector::<f64>::basis(2, 0).unwrap();
        assert_eq!(tangent_project(&x, &[2.0, 3.0]).unwrap(), vec![0.0, 3.0]);
        assert_eq!(tangent_project(&x, &[0.0, 3.0]).unwrap(), vec![0.0, 3.0]);
        assert!(tangent_project(&x, &[1.0]).is_err());
    }

    #[test]
    fn zero_vector_is_an_error() {
        assert!(matches!(UnitVector::<f64>::normalize(vec![0.0; 4]), Err(Error::ZeroNorm { .. })));
        assert!(UnitVector::<f64>::normalize(vec![1.0]).is_err());
    }

    #[test]
    fn upper_half_sphere_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1000;
        let theta = UnitVector::<f64>::basis(n, 0).unwrap();
        let draws = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let x = sample_upper_half_sphere(&mut rng, n, &theta).unwrap();
            let m = correlation(&x, &theta).unwrap();
            assert!(m >= 0.0);
            assert_abs_diff_eq!(x.norm(), 1.0, epsilon = 1e-12);
            let s = (n as f64).sqrt() * m;
            sum += s;
            sum_sq += s * s;
        }
        let mean = sum / draws as f64;
        let se = ((sum_sq / draws as f64 - mean * mean) / draws as f64).sqrt();
        let half_normal_mean = (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - half_normal_mean).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn upper_half_circle_angle_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = UnitVector::<f64>::basis(2, 0).unwrap();
        let bins = 10;
        let draws = 20_000;
        let mut counts = vec![0usize; bins];
        for _ in 0..draws {
            let x = sample_upper_half_sphere(&mut rng, 2, &theta).unwrap();
            let angle = x.as_slice()[1].atan2(x.as_slice()[0]);
            assert!(angle.abs() <= std::f64::consts::FRAC_PI_2);
            let b = ((angle + std::f64::consts::FRAC_PI_2) / std::f64::consts::PI * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 9 degrees of freedom, 99.9% quantile is 27.9
        assert!(chi2 < 27.9, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn half_normal_ks_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1000;
        let theta = UnitVector::<f64>::basis(n, 0).unwrap();
        let mut s: Vec<f64> = (0..10_000)
            .map(|_| {
                let x = sample_upper_half_sphere(&mut rng, n, &theta).unwrap();
                (n as f64).sqrt() * x.as_slice()[0]
            })
            .collect();
        s.sort_by(f64::total_cmp);
        let len = s.len() as f64;
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let cdf = statrs::function::erf::erf(v / std::f64::consts::SQRT_2);
                ((i + 1) as f64 / len - cdf).abs().max((cdf - i as f64 / len).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS distance {ks}");
    }

    #[test]
    fn fixed_correlation_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = uv(&[1.0, 2.0, -1.0, 0.5, 0.0]);
        let x = UnitVector::at_correlation(&mut rng, &theta, 0.37).unwrap();
        assert_abs_diff_eq!(correlation(&x, &theta).unwrap(), 0.37, epsilon = 1e-12);
    }

    #[test]
    fn reflection_maps_e1_to_theta() {
        let theta = uv(&[0.2, -0.7, 0.1, 0.4]);
        let h = Reflection::onto(&theta);
        let mut e1 = vec![1.0, 0.0, 0.0, 0.0];
        h.apply_in_place(&mut e1);
        for (a, b) in e1.iter().zip(theta.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        assert!(Reflection::onto(&UnitVector::<f64>::basis(4, 0).unwrap()).is_identity());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalization_and_projection(v in prop::collection::vec(-10.0f64..10.0, 2..20),
                                            g in prop::collection::vec(-10.0f64..10.0, 20)) {
                prop_assume!(norm_sq(&v) > 1e-6);
                let x = UnitVector::normalize(v).unwrap();
                prop_assert!((x.norm() - 1.0).abs() < 1e-12);
                let g = &g[..x.dim()];
                let p = tangent_project(&x, g).unwrap();
                let gnorm = norm_sq(g).sqrt();
                prop_assert!(dot(&p, x.as_slice()).abs() <= 1e-10 * gnorm.max(1.0));
                let pp = tangent_project(&x, &p).unwrap();
                for (a, b) in p.iter().zip(&pp) {
                    prop_assert!((a - b).abs() <= 1e-10 * gnorm.max(1.0));
                }
            }
        }
    }
}
