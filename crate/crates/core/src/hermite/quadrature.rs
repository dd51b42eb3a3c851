//! Quadrature rules against the standard Gaussian measure.
//!
//! All rules here integrate `E[g(Z)]` for `Z ~ N(0, 1)` (weights sum to one),
//! or `E[g(Z1, Z2)]` for the planar rules.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Largest Gauss–Hermite order supported. Beyond this the unscaled recurrence
/// used for the Newton iteration overflows at the outermost nodes.
pub const MAX_HERMITE_ORDER: usize = 300;

/// Nodes and weights for `E[g(Z)] ≈ Σ w_i g(z_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussianRule {
    /// n-point Gauss–Hermite rule for the probabilists' weight φ(z).
    ///
    /// Exact for polynomials of degree ≤ 2n − 1.
    pub fn hermite(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_HERMITE_ORDER {
            return Err(Error::InvalidArgument(format!(
                "Gauss-Hermite order must be in 1..={MAX_HERMITE_ORDER}, got {n}"
            )));
        }
        let (x, w) = gauss_hermite_physicists(n);
        // Physicists' weight e^{-x²} → standard normal: z = √2 x, w / √π.
        let nodes = x.iter().map(|&xi| xi * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().map(|&wi| wi / PI.sqrt()).collect();
        Ok(Self { nodes, weights })
    }

    /// Composite Gauss–Legendre rule on [−radius, radius] times the Gaussian density,
    /// with panel edges forced at every entry of `breakpoints`.
    ///
    /// Suited to integrands with kinks: each panel sees a smooth function.
    pub fn piecewise(breakpoints: &[f64], radius: f64, panel_width: f64, per_panel: usize) -> Result<Self> {
        if !(radius > 0.0 && panel_width > 0.0) || per_panel == 0 {
            return Err(Error::InvalidArgument("piecewise rule needs positive radius, width and order".into()));
        }
        let mut edges = vec![-radius, radius];
        edges.extend(breakpoints.iter().copied().filter(|b| b.abs() < radius));
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let (gx, gw) = gauss_legendre(per_panel);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in edges.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let panels = ((b - a) / panel_width).ceil().max(1.0) as usize;
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + h * p as f64;
                let half = 0.5 * h;
                let mid = lo + half;
                for (&t, &w) in gx.iter().zip(&gw) {
                    let z = mid + half * t;
                    nodes.push(z);
                    weights.push(half * w * std_normal_pdf(z));
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `E[g(Z)]`, failing on the first non-finite integrand value.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut g: F) -> Result<f64> {
        let mut acc = 0.0;
        for (z, w) in self.iter() {
            let v = g(z);
            if !v.is_finite() {
                return Err(Error::NonFiniteAtNode { node: z, value: v });
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// Nodes and weights for `E[g(Z1, Z2)]` with independent standard normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneRule {
    points: Vec<(f64, f64, f64)>,
}

impl PlaneRule {
    /// Tensor product of two n-point Gauss–Hermite rules.
    pub fn tensor_hermite(n: usize) -> Result<Self> {
        let g = GaussianRule::hermite(n)?;
        let mut points = Vec::with_capacity(n * n);
        for (z1, w1) in g.iter() {
            for (z2, w2) in g.iter() {
                points.push((z1, z2, w1 * w2));
            }
        }
        Ok(Self { points })
    }

    /// Polar rule: composite Gauss–Legendre in the angle, split at `angle_breaks`,
    /// and composite Gauss–Legendre in the radius on [0, radius] with weight r·e^{−r²/2}.
    ///
    /// Integrands that are smooth on every angular sector (homogeneous functions
    /// with kinks along lines through the origin) are integrated to near machine precision.
    pub fn polar(angle_breaks: &[f64], radius: f64, per_panel: usize) -> Result<Self> {
        if !(radius > 0.0) || per_panel == 0 {
            return Err(Error::InvalidArgument("polar rule needs positive radius and order".into()));
        }
        let two_pi = 2.0 * PI;
        let mut edges = vec![0.0, two_pi];
        edges.extend(angle_breaks.iter().map(|a| a.rem_euclid(two_pi)));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let (gx, gw) = gauss_legendre(per_panel);

        let mut angles = Vec::new();
        for seg in edges.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b - a <= 0.0 {
                continue;
            }
            let panels = ((b - a) / (PI / 8.0)).ceil().max(1.0) as usize;
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let mid = a + h * (p as f64 + 0.5);
                for (&t, &w) in gx.iter().zip(&gw) {
                    angles.push((mid + 0.5 * h * t, 0.5 * h * w / two_pi));
                }
            }
        }
        let radial_panels = (radius / 0.5).ceil() as usize;
        let hr = radius / radial_panels as f64;
        let mut radii = Vec::new();
        for p in 0..radial_panels {
            let mid = hr * (p as f64 + 0.5);
            for (&t, &w) in gx.iter().zip(&gw) {
                let r = mid + 0.5 * hr * t;
                radii.push((r, 0.5 * hr * w * r * (-0.5 * r * r).exp()));
            }
        }
        let mut points = Vec::with_capacity(angles.len() * radii.len());
        for &(th, wa) in &angles {
            let (s, c) = th.sin_cos();
            for &(r, wr) in &radii {
                points.push((r * c, r * s, wa * wr));
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `E[g(Z1, Z2)]`, failing on the first non-finite integrand value.
    pub fn expect<F: FnMut(f64, f64) -> f64>(&self, mut g: F) -> Result<f64> {
        let mut acc = 0.0;
        for &(z1, z2, w) in &self.points {
            let v = g(z1, z2);
            if !v.is_finite() {
                return Err(Error::NonFiniteAtNode { node: z1, value: v });
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2 * (-0.5 * z * z).exp() / PI.sqrt()
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Hermite nodes and weights for the weight e^{−x²}, ascending.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished by Newton
/// steps on the orthonormal recurrence, which also yields the weights.
fn gauss_hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let mut x = vec![0.0; n];
    let mut off: Vec<f64> = (1..=n).map(|k| if k < n { (k as f64 / 2.0).sqrt() } else { 0.0 }).collect();
    tridiagonal_eigenvalues(&mut x, &mut off);
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        let mut z = *xi;
        let mut pp = 1.0;
        for _ in 0..8 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        *xi = z;
        *wi = 2.0 / (pp * pp);
    }
    // Exact symmetry about the origin.
    for i in 0..n / 2 {
        let a = 0.5 * (x[n - 1 - i] - x[i]);
        let b = 0.5 * (w[i] + w[n - 1 - i]);
        x[i] = -a;
        x[n - 1 - i] = a;
        w[i] = b;
        w[n - 1 - i] = b;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (e[i] couples i and i+1, last entry ignored), by implicit QL.
/// Results overwrite `d`.
fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    if n == 0 {
        return;
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}
