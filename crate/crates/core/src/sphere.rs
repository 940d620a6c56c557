//! Calculus on the unit round sphere.
//!
//! Fields live on a Gauss–Legendre (in `cos θ`) × uniform-φ product grid and
//! are transformed with real orthonormal spherical harmonics. Transforms are
//! separable: a direct Fourier sum along each latitude row followed by a
//! Legendre sum per azimuthal order. Nodes never sit on a pole, so one-forms
//! are stored in the coordinate basis `(dθ, dφ)` without special cases.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A quadrature node: colatitude, longitude and weight (with `sin θ`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub theta: f64,
    pub phi: f64,
    pub weight: f64,
}

/// Product grid plus precomputed Legendre tables up to `l_max`.
#[derive(Debug)]
pub struct SphereGrid {
    n_theta: usize,
    n_phi: usize,
    l_max: usize,
    nodes: Vec<Node>,
    gl_weight: Vec<f64>,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    // legendre[i][lm_index(l, m)] for m >= 0, orthonormal on S² when combined
    // with the azimuthal factors below.
    legendre: Vec<Vec<f64>>,
    legendre_dtheta: Vec<Vec<f64>>,
    cos_mphi: Vec<Vec<f64>>,
    sin_mphi: Vec<Vec<f64>>,
}

/// Index of the real harmonic `(l, m)`, `-l <= m <= l`, in a coefficient vector.
#[inline]
pub fn mode_index(l: usize, m: i64) -> usize {
    (l * l) as usize + (l as i64 + m) as usize
}

#[inline]
fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

impl SphereGrid {
    /// Minimal grid exact for products of two degree-`l_max` fields.
    pub fn new(l_max: usize) -> Result<Arc<Self>> {
        Self::with_nodes(l_max, l_max + 1, 2 * l_max + 2)
    }

    pub fn with_nodes(l_max: usize, n_theta: usize, n_phi: usize) -> Result<Arc<Self>> {
        if n_theta < l_max + 1 || n_phi < 2 * l_max + 1 {
            return Err(Error::Validation(format!(
                "grid {n_theta}x{n_phi} cannot resolve l_max = {l_max}"
            )));
        }
        let (z, wz) = gauss_legendre(n_theta);
        // θ ascending means cos θ descending.
        let cos_theta: Vec<f64> = z.iter().rev().copied().collect();
        let gl_weight: Vec<f64> = wz.iter().rev().copied().collect();
        let theta: Vec<f64> = cos_theta.iter().map(|c| c.acos()).collect();
        let sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let phis: Vec<f64> = (0..n_phi).map(|j| j as f64 * dphi).collect();

        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            for &phi in &phis {
                nodes.push(Node { theta: theta[i], phi, weight: gl_weight[i] * dphi });
            }
        }

        let mut legendre = Vec::with_capacity(n_theta);
        let mut legendre_dtheta = Vec::with_capacity(n_theta);
        for i in 0..n_theta {
            let (q, dq) = normalized_legendre(l_max, cos_theta[i], sin_theta[i]);
            legendre.push(q);
            legendre_dtheta.push(dq);
        }
        let cos_mphi = (0..=l_max)
            .map(|m| phis.iter().map(|p| (m as f64 * p).cos()).collect())
            .collect();
        let sin_mphi = (0..=l_max)
            .map(|m| phis.iter().map(|p| (m as f64 * p).sin()).collect())
            .collect();

        Ok(Arc::new(SphereGrid {
            n_theta,
            n_phi,
            l_max,
            nodes,
            gl_weight,
            cos_theta,
            sin_theta,
            legendre,
            legendre_dtheta,
            cos_mphi,
            sin_mphi,
        }))
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn n_phi(&self) -> usize {
        self.n_phi
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn n_modes(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Unit position vector at node `k`.
    pub fn position(&self, k: usize) -> [f64; 3] {
        let i = k / self.n_phi;
        let phi = self.nodes[k].phi;
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        [s * phi.cos(), s * phi.sin(), c]
    }

    /// Coordinate tangent vectors `∂_θ X̃`, `∂_φ X̃` at node `k`.
    pub fn tangents(&self, k: usize) -> [[f64; 3]; 2] {
        let i = k / self.n_phi;
        let phi = self.nodes[k].phi;
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        let (cp, sp) = (phi.cos(), phi.sin());
        [[c * cp, c * sp, -s], [-s * sp, s * cp, 0.0]]
    }

    /// `sin θ` at node `k`.
    pub fn sin_theta(&self, k: usize) -> f64 {
        self.sin_theta[k / self.n_phi]
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other)
            || (self.l_max == other.l_max
                && self.n_theta == other.n_theta
                && self.n_phi == other.n_phi)
    }

    /// Real spherical-harmonic coefficients from nodal values.
    pub fn analysis(&self, values: &[f64]) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.n_modes()];
        let dphi = 2.0 * PI / self.n_phi as f64;
        let mut fc = vec![0.0; self.l_max + 1];
        let mut fs = vec![0.0; self.l_max + 1];
        for i in 0..self.n_theta {
            let row = &values[i * self.n_phi..(i + 1) * self.n_phi];
            for m in 0..=self.l_max {
                let (mut a, mut b) = (0.0, 0.0);
                for j in 0..self.n_phi {
                    a += row[j] * self.cos_mphi[m][j];
                    b += row[j] * self.sin_mphi[m][j];
                }
                fc[m] = a * dphi * self.gl_weight[i];
                fs[m] = b * dphi * self.gl_weight[i];
            }
            let q = &self.legendre[i];
            for l in 0..=self.l_max {
                coeffs[mode_index(l, 0)] += q[tri_index(l, 0)] * fc[0];
                for m in 1..=l {
                    let qm = q[tri_index(l, m)] * std::f64::consts::SQRT_2;
                    coeffs[mode_index(l, m as i64)] += qm * fc[m];
                    coeffs[mode_index(l, -(m as i64))] += qm * fs[m];
                }
            }
        }
        coeffs
    }

    fn synthesize_with(&self, coeffs: &[f64], table: &[Vec<f64>], deriv_phi: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let mut gc = vec![0.0; self.l_max + 1];
        let mut gs = vec![0.0; self.l_max + 1];
        for i in 0..self.n_theta {
            let q = &table[i];
            for m in 0..=self.l_max {
                let (mut a, mut b) = (0.0, 0.0);
                for l in m..=self.l_max {
                    if m == 0 {
                        a += q[tri_index(l, 0)] * coeffs[mode_index(l, 0)];
                    } else {
                        let qm = q[tri_index(l, m)] * std::f64::consts::SQRT_2;
                        a += qm * coeffs[mode_index(l, m as i64)];
                        b += qm * coeffs[mode_index(l, -(m as i64))];
                    }
                }
                gc[m] = a;
                gs[m] = b;
            }
            let row = &mut out[i * self.n_phi..(i + 1) * self.n_phi];
            for (j, v) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for m in 0..=self.l_max {
                    if deriv_phi {
                        let mf = m as f64;
                        s += mf * (-gc[m] * self.sin_mphi[m][j] + gs[m] * self.cos_mphi[m][j]);
                    } else {
                        s += gc[m] * self.cos_mphi[m][j] + gs[m] * self.sin_mphi[m][j];
                    }
                }
                *v = s;
            }
        }
        out
    }

    /// Nodal values from coefficients.
    pub fn synthesis(&self, coeffs: &[f64]) -> Vec<f64> {
        self.synthesize_with(coeffs, &self.legendre, false)
    }

    /// `(∂_θ f, ∂_φ f)` at the nodes for the band-limited field with `coeffs`.
    pub fn synthesis_gradient(&self, coeffs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.synthesize_with(coeffs, &self.legendre_dtheta, false),
            self.synthesize_with(coeffs, &self.legendre, true),
        )
    }

    /// Quadrature sum, fixed reduction order.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        self.nodes.iter().zip(values).map(|(n, v)| n.weight * v).sum()
    }

    pub fn integrate(self: &Arc<Self>, f: &SphereScalar) -> Result<f64> {
        self.check(&f.grid)?;
        Ok(self.integrate_values(&f.values))
    }

    fn check(self: &Arc<Self>, other: &Arc<SphereGrid>) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn constant(self: &Arc<Self>, value: f64) -> SphereScalar {
        SphereScalar { grid: self.clone(), values: vec![value; self.len()] }
    }

    pub fn from_fn(self: &Arc<Self>, f: impl Fn([f64; 3]) -> f64) -> SphereScalar {
        let values = (0..self.len()).map(|k| f(self.position(k))).collect();
        SphereScalar { grid: self.clone(), values }
    }

    pub fn from_values(self: &Arc<Self>, values: Vec<f64>) -> Result<SphereScalar> {
        if values.len() != self.len() {
            return Err(Error::GridMismatch);
        }
        Ok(SphereScalar { grid: self.clone(), values })
    }

    pub fn from_coeffs(self: &Arc<Self>, coeffs: &[f64]) -> SphereScalar {
        SphereScalar { grid: self.clone(), values: self.synthesis(coeffs) }
    }

    /// The three coordinate functions `X̃^i`.
    pub fn coordinates(self: &Arc<Self>) -> CoordinateFunctions {
        CoordinateFunctions {
            x: [0, 1, 2].map(|i| self.from_fn(|p| p[i])),
        }
    }

    /// Tangential gradient of a Cartesian-linear field `v · X̃`.
    pub fn gradient_of_linear(self: &Arc<Self>, v: [f64; 3]) -> SphereOneForm {
        let mut theta = vec![0.0; self.len()];
        let mut phi = vec![0.0; self.len()];
        for k in 0..self.len() {
            let t = self.tangents(k);
            theta[k] = dot3(v, t[0]);
            phi[k] = dot3(v, t[1]);
        }
        SphereOneForm { grid: self.clone(), theta, phi }
    }
}

#[inline]
pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Orthonormal associated Legendre functions `Q_l^m(cos θ)` (with the
/// `1/√(2π)` azimuthal normalization folded in for m = 0 and the `√2`
/// applied at use sites for m > 0) and their θ-derivatives.
fn normalized_legendre(l_max: usize, x: f64, s: f64) -> (Vec<f64>, Vec<f64>) {
    let n = (l_max + 1) * (l_max + 2) / 2;
    let mut q = vec![0.0; n];
    let mut dq = vec![0.0; n];
    let mut qmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            qmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        q[tri_index(m, m)] = qmm;
        if m < l_max {
            q[tri_index(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * x * qmm;
        }
        for l in (m + 2)..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            q[tri_index(l, m)] = a * (x * q[tri_index(l - 1, m)] - b * q[tri_index(l - 2, m)]);
        }
    }
    for m in 0..=l_max {
        for l in m..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let lower = if l > m {
                ((2.0 * lf + 1.0) / (2.0 * lf - 1.0)).sqrt()
                    * (lf * lf - mf * mf).sqrt()
                    * q[tri_index(l - 1, m)]
            } else {
                0.0
            };
            dq[tri_index(l, m)] = (lf * x * q[tri_index(l, m)] - lower) / s;
        }
    }
    (q, dq)
}

/// Scalar field sampled at the grid nodes.
#[derive(Clone, Debug)]
pub struct SphereScalar {
    pub grid: Arc<SphereGrid>,
    pub values: Vec<f64>,
}

/// One-form in the coordinate basis: `ω = ω_θ dθ + ω_φ dφ`.
#[derive(Clone, Debug)]
pub struct SphereOneForm {
    pub grid: Arc<SphereGrid>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

/// `X̃^1, X̃^2, X̃^3` restricted to the unit sphere.
#[derive(Clone, Debug)]
pub struct CoordinateFunctions {
    pub x: [SphereScalar; 3],
}

impl SphereScalar {
    pub fn coeffs(&self) -> Vec<f64> {
        self.grid.analysis(&self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SphereScalar {
        SphereScalar { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination. Panics on grids of different shape; use
    /// [`SphereScalar::try_zip`] where that can happen.
    pub fn zip(&self, other: &SphereScalar, f: impl Fn(f64, f64) -> f64) -> SphereScalar {
        self.try_zip(other, f).expect("fields on different grids")
    }

    pub fn try_zip(&self, other: &SphereScalar, f: impl Fn(f64, f64) -> f64) -> Result<SphereScalar> {
        self.grid.check(&other.grid)?;
        Ok(SphereScalar {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> SphereScalar {
        self.map(|v| s * v)
    }
    pub fn add(&self, other: &SphereScalar) -> SphereScalar {
        self.zip(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &SphereScalar) -> SphereScalar {
        self.zip(other, |a, b| a - b)
    }
    pub fn mul(&self, other: &SphereScalar) -> SphereScalar {
        self.zip(other, |a, b| a * b)
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate_values(&self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SphereScalar) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Spectral Laplace–Beltrami operator of the round metric.
    pub fn laplacian(&self) -> SphereScalar {
        let mut c = self.coeffs();
        scale_by_degree(&mut c, self.grid.l_max, |l| -((l * (l + 1)) as f64));
        self.grid.from_coeffs(&c)
    }

    pub fn gradient(&self) -> SphereOneForm {
        let (theta, phi) = self.grid.synthesis_gradient(&self.coeffs());
        SphereOneForm { grid: self.grid.clone(), theta, phi }
    }

    /// Coordinate second partials `(∂_θθ f, ∂_θφ f, ∂_φφ f)`, exact for
    /// band-limited fields. `∂_θθ` comes from `Δ̃f = f_θθ + cot θ f_θ + f_φφ / sin²θ`.
    pub fn hessian(&self) -> [Vec<f64>; 3] {
        let grid = &self.grid;
        let c = self.coeffs();
        let mut cpp = c.clone();
        for l in 0..=grid.l_max {
            for m in -(l as i64)..=(l as i64) {
                cpp[mode_index(l, m)] *= -((m * m) as f64);
            }
        }
        let mut cl = c.clone();
        scale_by_degree(&mut cl, grid.l_max, |l| -((l * (l + 1)) as f64));
        let f_t = grid.synthesize_with(&c, &grid.legendre_dtheta, false);
        let f_tp = grid.synthesize_with(&c, &grid.legendre_dtheta, true);
        let f_pp = grid.synthesis(&cpp);
        let lap = grid.synthesis(&cl);
        let f_tt = (0..grid.len())
            .map(|k| {
                let s = grid.sin_theta(k);
                let cot = grid.position(k)[2] / s;
                lap[k] - cot * f_t[k] - f_pp[k] / (s * s)
            })
            .collect();
        [f_tt, f_tp, f_pp]
    }

    /// Part of the field with degree in `degrees`.
    pub fn project_degrees(&self, degrees: std::ops::RangeInclusive<usize>) -> SphereScalar {
        let mut c = self.coeffs();
        for l in 0..=self.grid.l_max {
            if !degrees.contains(&l) {
                for m in -(l as i64)..=(l as i64) {
                    c[mode_index(l, m)] = 0.0;
                }
            }
        }
        self.grid.from_coeffs(&c)
    }

    /// Root-sum-square of the coefficients at each degree.
    pub fn degree_power(&self) -> Vec<f64> {
        let c = self.coeffs();
        (0..=self.grid.l_max)
            .map(|l| {
                (-(l as i64)..=(l as i64))
                    .map(|m| c[mode_index(l, m)].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

fn scale_by_degree(c: &mut [f64], l_max: usize, f: impl Fn(usize) -> f64) {
    for l in 0..=l_max {
        let s = f(l);
        for m in -(l as i64)..=(l as i64) {
            c[mode_index(l, m)] *= s;
        }
    }
}

impl SphereOneForm {
    pub fn zero(grid: &Arc<SphereGrid>) -> SphereOneForm {
        SphereOneForm { grid: grid.clone(), theta: vec![0.0; grid.len()], phi: vec![0.0; grid.len()] }
    }

    pub fn scale(&self, s: f64) -> SphereOneForm {
        SphereOneForm {
            grid: self.grid.clone(),
            theta: self.theta.iter().map(|v| s * v).collect(),
            phi: self.phi.iter().map(|v| s * v).collect(),
        }
    }

    pub fn add(&self, other: &SphereOneForm) -> SphereOneForm {
        assert!(self.grid.same_as(&other.grid), "one-forms on different grids");
        SphereOneForm {
            grid: self.grid.clone(),
            theta: self.theta.iter().zip(&other.theta).map(|(a, b)| a + b).collect(),
            phi: self.phi.iter().zip(&other.phi).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SphereOneForm) -> SphereOneForm {
        self.add(&other.scale(-1.0))
    }

    /// Multiply by a scalar field.
    pub fn times(&self, f: &SphereScalar) -> SphereOneForm {
        assert!(self.grid.same_as(&f.grid), "fields on different grids");
        SphereOneForm {
            grid: self.grid.clone(),
            theta: self.theta.iter().zip(&f.values).map(|(a, b)| a * b).collect(),
            phi: self.phi.iter().zip(&f.values).map(|(a, b)| a * b).collect(),
        }
    }

    /// Round-metric pairing `σ̃^{ab} ω_a η_b`.
    pub fn dot(&self, other: &SphereOneForm) -> SphereScalar {
        let values = (0..self.grid.len())
            .map(|k| {
                let s = self.grid.sin_theta(k);
                self.theta[k] * other.theta[k] + self.phi[k] * other.phi[k] / (s * s)
            })
            .collect();
        SphereScalar { grid: self.grid.clone(), values }
    }

    /// Hodge rotation `ω_a ↦ ε_a^b ω_b`: `(ω_θ, ω_φ) ↦ (-ω_φ / sin θ, sin θ ω_θ)`.
    pub fn rotate(&self) -> SphereOneForm {
        let mut theta = vec![0.0; self.grid.len()];
        let mut phi = vec![0.0; self.grid.len()];
        for k in 0..self.grid.len() {
            let s = self.grid.sin_theta(k);
            theta[k] = -self.phi[k] / s;
            phi[k] = s * self.theta[k];
        }
        SphereOneForm { grid: self.grid.clone(), theta, phi }
    }

    /// Round-metric divergence `σ̃^{ab} ∇̃_a ω_b`, projected onto degrees
    /// `≤ l_max` through the weak form `⟨Y, div ω⟩ = -⟨∇Y, ω⟩`.
    pub fn divergence(&self) -> SphereScalar {
        let grid = &self.grid;
        let n_phi = grid.n_phi;
        let mut wt = vec![0.0; grid.len()];
        let mut wp = vec![0.0; grid.len()];
        for k in 0..grid.len() {
            let s = grid.sin_theta(k);
            wt[k] = self.theta[k];
            wp[k] = self.phi[k] / (s * s);
        }
        // -Σ w (∂_θY ω_θ + ∂_φY ω_φ / sin²θ), done row by row.
        let mut coeffs = vec![0.0; grid.n_modes()];
        let dphi = 2.0 * PI / n_phi as f64;
        let lm = grid.l_max;
        for i in 0..grid.n_theta {
            let w = grid.gl_weight[i] * dphi;
            let rt = &wt[i * n_phi..(i + 1) * n_phi];
            let rp = &wp[i * n_phi..(i + 1) * n_phi];
            let q = &grid.legendre[i];
            let dq = &grid.legendre_dtheta[i];
            for m in 0..=lm {
                let (mut tc, mut ts, mut pc, mut ps) = (0.0, 0.0, 0.0, 0.0);
                for j in 0..n_phi {
                    let (c, s) = (grid.cos_mphi[m][j], grid.sin_mphi[m][j]);
                    tc += rt[j] * c;
                    ts += rt[j] * s;
                    pc += rp[j] * c;
                    ps += rp[j] * s;
                }
                let mf = m as f64;
                for l in m..=lm {
                    if m == 0 {
                        coeffs[mode_index(l, 0)] -= w * dq[tri_index(l, 0)] * tc;
                    } else {
                        let r2 = std::f64::consts::SQRT_2;
                        let qd = r2 * dq[tri_index(l, m)];
                        let qv = r2 * q[tri_index(l, m)];
                        // cos(mφ) mode: ∂_φ → -m sin(mφ); sin(mφ) mode: ∂_φ → m cos(mφ).
                        coeffs[mode_index(l, m as i64)] -= w * (qd * tc - mf * qv * ps);
                        coeffs[mode_index(l, -(m as i64))] -= w * (qd * ts + mf * qv * pc);
                    }
                }
            }
        }
        grid.from_coeffs(&coeffs)
    }
}

/// Operators diagonal in degree that may have a kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SphereOperator {
    /// `Δ̃ + shift`
    ShiftedLaplacian(f64),
    /// `Δ̃ (Δ̃ + shift)`
    LaplacianTimesShifted(f64),
}

impl SphereOperator {
    pub fn eigenvalue(&self, l: usize) -> f64 {
        let lam = -((l * (l + 1)) as f64);
        match *self {
            SphereOperator::ShiftedLaplacian(s) => lam + s,
            SphereOperator::LaplacianTimesShifted(s) => lam * (lam + s),
        }
    }
}

/// Result of a kernel-aware solve: minimal-norm solution and the part of the
/// right-hand side lying in the kernel.
#[derive(Clone, Debug)]
pub struct KernelSolve {
    pub solution: SphereScalar,
    pub obstruction: SphereScalar,
}

pub fn solve_operator(op: SphereOperator, rhs: &SphereScalar) -> KernelSolve {
    let grid = &rhs.grid;
    let c = rhs.coeffs();
    let mut sol = vec![0.0; c.len()];
    let mut obs = vec![0.0; c.len()];
    for l in 0..=grid.l_max {
        let ev = op.eigenvalue(l);
        for m in -(l as i64)..=(l as i64) {
            let k = mode_index(l, m);
            if ev.abs() < 1e-12 {
                obs[k] = c[k];
            } else {
                sol[k] = c[k] / ev;
            }
        }
    }
    KernelSolve { solution: grid.from_coeffs(&sol), obstruction: grid.from_coeffs(&obs) }
}

/// `(Δ̃ + shift) u = rhs` with kernel handling.
pub fn solve_shifted_laplacian(shift: f64, rhs: &SphereScalar) -> KernelSolve {
    solve_operator(SphereOperator::ShiftedLaplacian(shift), rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_of_low_degree_fields() {
        let grid = SphereGrid::new(6).unwrap();
        let f = grid.from_fn(|x| x[0] * x[2]);
        let [tt, tp, pp] = f.hessian();
        for (k, node) in grid.nodes().iter().enumerate() {
            let (t, p) = (node.theta, node.phi);
            assert!((tt[k] + 2.0 * (2.0 * t).sin() * p.cos()).abs() < 1e-12);
            assert!((tp[k] + (2.0 * t).cos() * p.sin()).abs() < 1e-12);
            assert!((pp[k] + 0.5 * (2.0 * t).sin() * p.cos()).abs() < 1e-12);
        }
        let z = grid.coordinates().x[2].clone();
        let [tt, tp, pp] = z.hessian();
        for (k, node) in grid.nodes().iter().enumerate() {
            assert!((tt[k] + node.theta.cos()).abs() < 1e-12);
            assert!(tp[k].abs() < 1e-12 && pp[k].abs() < 1e-12);
        }
    }
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_area() {
        for l in [0, 1, 4, 16, 32] {
            let g = SphereGrid::new(l).unwrap();
            let s: f64 = g.nodes().iter().map(|n| n.weight).sum();
            assert_relative_eq!(s, 4.0 * PI, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_underresolved_grid() {
        assert!(SphereGrid::with_nodes(8, 8, 17).is_err());
        assert!(SphereGrid::with_nodes(8, 9, 16).is_err());
    }

    #[test]
    fn coordinate_functions() {
        let g = SphereGrid::new(8).unwrap();
        let x = g.coordinates();
        for k in 0..g.len() {
            let s: f64 = (0..3).map(|i| x.x[i].values[k].powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        for i in 0..3 {
            let lap = x.x[i].laplacian();
            assert!(lap.max_abs_diff(&x.x[i].scale(-2.0)) < 1e-10);
        }
    }

    #[test]
    fn integrate_examples() {
        let g = SphereGrid::new(8).unwrap();
        let x = g.coordinates();
        assert_relative_eq!(g.integrate(&g.constant(1.0)).unwrap(), 4.0 * PI, max_relative = 1e-13);
        for i in 0..3 {
            for j in 0..3 {
                let v = g.integrate(&x.x[i].mul(&x.x[j])).unwrap();
                let expect = if i == j { 4.0 * PI / 3.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-13);
            }
        }
        let odd = x.x[0].mul(&x.x[1]).mul(&x.x[1]);
        assert!(g.integrate(&odd).unwrap().abs() < 1e-14);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = SphereGrid::new(6).unwrap();
        let b = SphereGrid::new(8).unwrap();
        assert!(matches!(a.integrate(&b.constant(1.0)), Err(Error::GridMismatch)));
        assert!(a.constant(1.0).try_zip(&b.constant(1.0), |x, y| x + y).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let g = SphereGrid::new(6).unwrap();
        let x = g.coordinates();
        assert!(g.constant(3.0).laplacian().sup_norm() < 1e-12);
        let f = x.x[0].mul(&x.x[1]);
        assert!(f.laplacian().max_abs_diff(&f.scale(-6.0)) < 1e-12);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = SphereGrid::new(6).unwrap();
        let w = g.constant(2.5).gradient();
        assert!(w.theta.iter().chain(&w.phi).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_of_coordinates_matches_tangents() {
        let g = SphereGrid::new(5).unwrap();
        let x = g.coordinates();
        for i in 0..3 {
            let mut e = [0.0; 3];
            e[i] = 1.0;
            let exact = g.gradient_of_linear(e);
            let w = x.x[i].gradient();
            for k in 0..g.len() {
                assert!((w.theta[k] - exact.theta[k]).abs() < 1e-12);
                assert!((w.phi[k] - exact.phi[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shifted_solve_examples() {
        let g = SphereGrid::new(6).unwrap();
        let x = g.coordinates();
        let xy = x.x[0].mul(&x.x[1]);
        let s = solve_shifted_laplacian(2.0, &xy.scale(-4.0));
        assert!(s.solution.max_abs_diff(&xy) < 1e-12);
        assert!(s.obstruction.sup_norm() < 1e-12);

        let s = solve_shifted_laplacian(2.0, &x.x[0]);
        assert!(s.solution.sup_norm() < 1e-12);
        assert!(s.obstruction.max_abs_diff(&x.x[0]) < 1e-12);

        let s = solve_shifted_laplacian(2.0, &g.constant(0.7));
        assert!(s.solution.max_abs_diff(&g.constant(0.35)) < 1e-12);
        assert!(s.obstruction.sup_norm() < 1e-12);
    }

    #[test]
    fn biharmonic_kernel_is_degrees_zero_and_one() {
        let g = SphereGrid::new(6).unwrap();
        let x = g.coordinates();
        let rhs = g.constant(1.0).add(&x.x[2]).add(&x.x[0].mul(&x.x[1]));
        let s = solve_operator(SphereOperator::LaplacianTimesShifted(2.0), &rhs);
        let p = s.obstruction.degree_power();
        assert!(p[0] > 0.1 && p[1] > 0.1 && p[2] < 1e-12);
        // Δ̃(Δ̃+2) on ℓ = 2 multiplies by 24.
        assert!(s.solution.max_abs_diff(&x.x[0].mul(&x.x[1]).scale(1.0 / 24.0)) < 1e-12);
    }
}
