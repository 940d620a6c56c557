//! Geometry of the coordinate spheres `Σ_r` in conformally flat data, and
//! extraction of `1/r` expansion coefficients from samples at several radii.
//!
//! With `g = u⁴δ` the data on `Σ_r` reduce to
//!
//! ```text
//! σ      = u⁴ r² σ̃
//! |H|    = √(h̄² - p²),   h̄ = 2r⁻¹u⁻² - 2∂_r(u⁻²),   p = u⁻⁴ k_ij (δ^ij - X̃^i X̃^j)
//! (α_H)_a = (h̄ ∂_a p - p ∂_a h̄) / (h̄² - p²) - u⁻² k_ra
//! ```
//!
//! Every angular derivative here is taken analytically through jets.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fit::fit_powers;
use crate::initial_data::{dot, HarmonicAsymptotics};
use crate::jet::Jet1;
use crate::sphere::{SphereGrid, SphereOneForm, SphereScalar};

/// `(σ, |H|, α_H)` on one coordinate sphere.
#[derive(Clone, Debug)]
pub struct SurfaceData {
    pub r: f64,
    /// `φ` with `σ_ab = φ r² σ̃_ab`; equals `u⁴`.
    pub sigma: SphereScalar,
    pub h_norm: SphereScalar,
    pub alpha_h: SphereOneForm,
    pub h_bar: SphereScalar,
    pub p: SphereScalar,
}

fn cartesian(x: [f64; 3]) -> [Jet1; 3] {
    [0, 1, 2].map(|i| {
        let mut g = [0.0; 3];
        g[i] = 1.0;
        Jet1 { v: x[i], g }
    })
}

fn along(f: &Jet1, t: [f64; 3]) -> f64 {
    f.g[0] * t[0] + f.g[1] * t[1] + f.g[2] * t[2]
}

pub fn surface_data(data: &HarmonicAsymptotics, r: f64, grid: &Arc<SphereGrid>) -> Result<SurfaceData> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let n_nodes = grid.len();
    let mut phi = vec![0.0; n_nodes];
    let mut h_norm = vec![0.0; n_nodes];
    let mut h_bar = vec![0.0; n_nodes];
    let mut p_vals = vec![0.0; n_nodes];
    let mut a_theta = vec![0.0; n_nodes];
    let mut a_phi = vec![0.0; n_nodes];
    for node in 0..n_nodes {
        let nv = grid.position(node);
        let x = nv.map(|v| v * r);
        let (u, y) = data.field_jets(x)?;
        if u.v <= 0.0 {
            return Err(Error::Domain(format!("u = {} ≤ 0 on the sphere of radius {r}", u.v)));
        }
        let xs = cartesian(x);
        let rj = (xs[0] * xs[0] + xs[1] * xs[1] + xs[2] * xs[2]).sqrt();
        let n = xs.map(|xi| xi / rj);
        let u1 = u.first_order();
        let um2 = u1.powi(-2);
        let um3 = u1.powi(-3);
        let mut dr_um2 = Jet1::constant(0.0);
        for i in 0..3 {
            dr_um2 = dr_um2 + n[i] * u.partial(i) * um3 * -2.0;
        }
        let hb = um2 * 2.0 / rj - dr_um2 * 2.0;

        let dy = [0, 1, 2].map(|i| [0, 1, 2].map(|j| y[i].partial(j)));
        let div = dy[0][0] + dy[1][1] + dy[2][2];
        let u2 = u1 * u1;
        let mut k = [[Jet1::constant(0.0); 3]; 3];
        let mut trace = Jet1::constant(0.0);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = dy[i][j] + dy[j][i];
                if i == j {
                    s = s - div * 0.5;
                }
                k[i][j] = u2 * s;
                let proj = if i == j { n[i] * n[j] * -1.0 + 1.0 } else { n[i] * n[j] * -1.0 };
                trace = trace + k[i][j] * proj;
            }
        }
        let p = trace * u1.powi(-4);

        let det = hb.v * hb.v - p.v * p.v;
        if !(det > 0.0) {
            let node_ref = grid.nodes()[node];
            return Err(Error::NonSpacelikeH { node, theta: node_ref.theta, phi: node_ref.phi });
        }
        let tangents = grid.tangents(node).map(|t| t.map(|v| v * r));
        let mut alpha = [0.0; 2];
        for (a, t) in tangents.iter().enumerate() {
            let k_ra: f64 = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| k[i][j].v * nv[i] * t[j])
                .sum();
            alpha[a] = (hb.v * along(&p, *t) - p.v * along(&hb, *t)) / det - um2.v * k_ra;
        }
        phi[node] = u2.v * u2.v;
        h_norm[node] = det.sqrt();
        h_bar[node] = hb.v;
        p_vals[node] = p.v;
        a_theta[node] = alpha[0];
        a_phi[node] = alpha[1];
    }
    Ok(SurfaceData {
        r,
        sigma: grid.from_values(phi)?,
        h_norm: grid.from_values(h_norm)?,
        alpha_h: SphereOneForm { grid: grid.clone(), theta: a_theta, phi: a_phi },
        h_bar: grid.from_values(h_bar)?,
        p: grid.from_values(p_vals)?,
    })
}

impl SurfaceData {
    /// `√det σ / √det σ̃ = u⁴ r²`.
    pub fn area_factor(&self) -> SphereScalar {
        self.sigma.scale(self.r * self.r)
    }
}

/// Coefficient fields of a fitted scalar series `Σ f_n r^n`.
#[derive(Clone, Debug)]
pub struct ScalarSeries {
    pub orders: Vec<i32>,
    pub coefficients: Vec<SphereScalar>,
    pub fit_residual: f64,
}

/// Coefficient one-forms of a fitted series.
#[derive(Clone, Debug)]
pub struct OneFormSeries {
    pub orders: Vec<i32>,
    pub coefficients: Vec<SphereOneForm>,
    pub fit_residual: f64,
}

impl ScalarSeries {
    pub fn coefficient(&self, order: i32) -> Option<&SphereScalar> {
        self.orders.iter().position(|&n| n == order).map(|i| &self.coefficients[i])
    }

    pub fn evaluate(&self, r: f64) -> SphereScalar {
        let grid = &self.coefficients[0].grid;
        let mut out = grid.constant(0.0);
        for (n, c) in self.orders.iter().zip(&self.coefficients) {
            out = out.add(&c.scale(r.powi(*n)));
        }
        out
    }
}

impl OneFormSeries {
    pub fn coefficient(&self, order: i32) -> Option<&SphereOneForm> {
        self.orders.iter().position(|&n| n == order).map(|i| &self.coefficients[i])
    }
}

fn same_grid(fields: &[&Arc<SphereGrid>]) -> Result<Arc<SphereGrid>> {
    let first = fields.first().ok_or_else(|| Error::Validation("no samples".into()))?;
    if fields.iter().any(|g| !g.same_as(first)) {
        return Err(Error::GridMismatch);
    }
    Ok((*first).clone())
}

pub fn scalar_series(radii: &[f64], samples: &[SphereScalar], orders: &[i32]) -> Result<ScalarSeries> {
    let grid = same_grid(&samples.iter().map(|s| &s.grid).collect::<Vec<_>>())?;
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.values.clone()).collect();
    let fit = fit_powers(radii, orders, &rows)?;
    let coefficients =
        fit.coeffs.iter().map(|c| grid.from_values(c.clone())).collect::<Result<Vec<_>>>()?;
    Ok(ScalarSeries { orders: orders.to_vec(), coefficients, fit_residual: fit.residual })
}

pub fn one_form_series(radii: &[f64], samples: &[SphereOneForm], orders: &[i32]) -> Result<OneFormSeries> {
    let grid = same_grid(&samples.iter().map(|s| &s.grid).collect::<Vec<_>>())?;
    let n = grid.len();
    let rows: Vec<Vec<f64>> =
        samples.iter().map(|s| s.theta.iter().chain(&s.phi).copied().collect()).collect();
    let fit = fit_powers(radii, orders, &rows)?;
    let coefficients = fit
        .coeffs
        .iter()
        .map(|c| SphereOneForm { grid: grid.clone(), theta: c[..n].to_vec(), phi: c[n..].to_vec() })
        .collect();
    Ok(OneFormSeries { orders: orders.to_vec(), coefficients, fit_residual: fit.residual })
}

/// Fitted series of every surface field over a ladder of samples.
#[derive(Clone, Debug)]
pub struct SurfaceSeries {
    /// `u⁴ r²`, the area factor.
    pub area: ScalarSeries,
    pub h_norm: ScalarSeries,
    pub alpha_h: OneFormSeries,
}

/// Fit `(u⁴r², |H|, α_H)` against `r^n`, `n ∈ orders`; the area factor is fitted
/// against the same orders shifted up by three so that `r²` lines up with `r⁻¹`.
pub fn extract_series(samples: &[SurfaceData], orders: &[i32]) -> Result<SurfaceSeries> {
    let radii: Vec<f64> = samples.iter().map(|s| s.r).collect();
    let area_orders: Vec<i32> = orders.iter().map(|n| n + 3).collect();
    let area: Vec<SphereScalar> = samples.iter().map(|s| s.area_factor()).collect();
    let h: Vec<SphereScalar> = samples.iter().map(|s| s.h_norm.clone()).collect();
    let alpha: Vec<SphereOneForm> = samples.iter().map(|s| s.alpha_h.clone()).collect();
    Ok(SurfaceSeries {
        area: scalar_series(&radii, &area, &area_orders)?,
        h_norm: scalar_series(&radii, &h, orders)?,
        alpha_h: one_form_series(&radii, &alpha, orders)?,
    })
}

/// The expansion coefficients of `|H|` and `α_H` consumed downstream.
#[derive(Clone, Debug)]
pub struct PhysicalExpansion {
    pub h_m2: SphereScalar,
    pub h_m3: SphereScalar,
    pub alpha_m1: SphereOneForm,
    pub alpha_m2: SphereOneForm,
}

impl PhysicalExpansion {
    /// Closed forms for harmonic asymptotics:
    ///
    /// ```text
    /// h⁽⁻²⁾ = -8A
    /// h⁽⁻³⁾ = -12u₂ + 18A² - ¼ g²
    /// α⁽⁻¹⁾ = (3/2) ∂g
    /// α⁽⁻²⁾ = -6A ∂g + (5/2) d_ij (∂X̃^i) X̃^j - ½ d_ij X̃^i ∂X̃^j
    /// ```
    ///
    /// with `g = B·X̃`.
    pub fn closed_form(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>) -> PhysicalExpansion {
        let a = data.mass;
        let b = data.momentum;
        let h_m2 = grid.constant(-8.0 * a);
        let h_m3 = grid.from_fn(|n| {
            let g = dot(b, n);
            -12.0 * data.u2_profile(n) + 18.0 * a * a - 0.25 * g * g
        });
        let alpha_m1 = grid.gradient_of_linear(b).scale(1.5);
        let mut alpha_m2 = SphereOneForm::zero(grid);
        for k in 0..grid.len() {
            let x = grid.position(k);
            for (comp, t) in grid.tangents(k).iter().enumerate() {
                let mut v = -6.0 * a * dot(b, *t);
                for i in 0..3 {
                    for j in 0..3 {
                        v += data.angular[i][j] * (2.5 * t[i] * x[j] - 0.5 * x[i] * t[j]);
                    }
                }
                if comp == 0 {
                    alpha_m2.theta[k] = v;
                } else {
                    alpha_m2.phi[k] = v;
                }
            }
        }
        PhysicalExpansion { h_m2, h_m3, alpha_m1, alpha_m2 }
    }

    /// The same coefficients read off fitted series.
    pub fn from_series(series: &SurfaceSeries) -> Result<PhysicalExpansion> {
        let missing = |n: i32| Error::Usage(format!("series lacks order {n}"));
        Ok(PhysicalExpansion {
            h_m2: series.h_norm.coefficient(-2).ok_or_else(|| missing(-2))?.clone(),
            h_m3: series.h_norm.coefficient(-3).ok_or_else(|| missing(-3))?.clone(),
            alpha_m1: series.alpha_h.coefficient(-1).ok_or_else(|| missing(-1))?.clone(),
            alpha_m2: series.alpha_h.coefficient(-2).ok_or_else(|| missing(-2))?.clone(),
        })
    }
}

/// `α⁽⁻²⁾` in the unreduced arrangement
/// `A∂g + 3 W_i ∂X̃^i + ½ ∂(∇̃W_i·∇̃X̃^i)`, built from the sampled `W_i`.
pub fn alpha_m2_unreduced(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>) -> SphereOneForm {
    let coords = grid.coordinates();
    let w: [SphereScalar; 3] = [0, 1, 2].map(|i| grid.from_fn(|n| data.y2_profile(n)[i]));
    let mut inner = grid.constant(0.0);
    let mut three_w = SphereOneForm::zero(grid);
    for i in 0..3 {
        let dx = coords.x[i].gradient();
        inner = inner.add(&w[i].gradient().dot(&dx));
        three_w = three_w.add(&dx.times(&w[i]).scale(3.0));
    }
    grid.gradient_of_linear(data.momentum)
        .scale(data.mass)
        .add(&three_w)
        .add(&inner.gradient().scale(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic() -> HarmonicAsymptotics {
        HarmonicAsymptotics::new(
            0.6,
            [0.3, -0.5, 0.4],
            [0.2, -0.1, 0.7],
            [[0.1, 0.5, -0.3], [0.2, -0.4, 0.6], [0.9, 0.1, 0.3]],
        )
        .unwrap()
    }

    fn one_form_sup(w: &SphereOneForm) -> f64 {
        w.dot(w).values.iter().fold(0.0_f64, |m, v| m.max(v.sqrt()))
    }

    #[test]
    fn flat_sphere_is_round() {
        let grid = SphereGrid::new(6).unwrap();
        let s = surface_data(&HarmonicAsymptotics::flat(), 7.0, &grid).unwrap();
        assert!(s.h_norm.values.iter().all(|h| (h - 2.0 / 7.0).abs() < 1e-16));
        assert!(one_form_sup(&s.alpha_h) == 0.0);
        assert!(s.sigma.values.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn time_symmetric_mean_curvature() {
        let grid = SphereGrid::new(6).unwrap();
        let a = 0.7;
        let data = HarmonicAsymptotics::new(a, [0.0; 3], [0.0; 3], [[0.0; 3]; 3]).unwrap();
        let r = 9.0;
        let s = surface_data(&data, r, &grid).unwrap();
        let u = 1.0 + a / r;
        // ∂_r(u⁻²) = 2A u⁻³ / r²
        let expect = 2.0 / (r * u * u) - 4.0 * a / (u * u * u * r * r);
        assert!(s.h_norm.values.iter().all(|h| (h - expect).abs() < 1e-15));
        assert!(one_form_sup(&s.alpha_h) == 0.0);
    }

    #[test]
    fn leading_connection_form() {
        let grid = SphereGrid::new(8).unwrap();
        let d = generic();
        let r = 200.0;
        let s = surface_data(&d, r, &grid).unwrap();
        let lead = grid.gradient_of_linear(d.momentum).scale(1.5 / r);
        let diff = one_form_sup(&s.alpha_h.sub(&lead));
        assert!(diff * r * r < 20.0, "{diff}");
        assert!(diff * r * r > 0.1);
    }

    #[test]
    fn area_element_is_conformal() {
        let grid = SphereGrid::new(6).unwrap();
        let d = generic();
        let s = surface_data(&d, 30.0, &grid).unwrap();
        for k in 0..grid.len() {
            let (u, _) = d.field_jets(grid.position(k).map(|v| v * 30.0)).unwrap();
            assert_eq!(s.area_factor().values[k], u.v.powi(2).powi(2) * 900.0);
        }
    }

    #[test]
    fn non_spacelike_mean_curvature_is_reported() {
        let grid = SphereGrid::new(6).unwrap();
        let d = HarmonicAsymptotics::new(0.3, [1.15, 0.0, 0.0], [0.0; 3], [[0.0; 3]; 3]).unwrap();
        let err = (1..200)
            .map(|i| 0.05 * i as f64)
            .find_map(|r| surface_data(&d, r, &grid).err());
        assert!(matches!(err, Some(Error::NonSpacelikeH { .. }) | Some(Error::Domain(_))), "{err:?}");
    }

    #[test]
    fn unreduced_connection_coefficient_matches() {
        let grid = SphereGrid::new(10).unwrap();
        let d = generic();
        let closed = PhysicalExpansion::closed_form(&d, &grid).alpha_m2;
        let other = alpha_m2_unreduced(&d, &grid);
        assert!(one_form_sup(&closed.sub(&other)) < 1e-12);
    }

    #[test]
    fn fitted_series_match_closed_forms() {
        let grid = SphereGrid::new(10).unwrap();
        let d = generic();
        let radii: Vec<f64> = (0..8).map(|k| 100.0 * 2f64.powi(k)).collect();
        let samples: Vec<SurfaceData> =
            radii.iter().map(|&r| surface_data(&d, r, &grid).unwrap()).collect();
        let orders: Vec<i32> = (1..=7).map(|n| -n).collect();
        let series = extract_series(&samples, &orders).unwrap();
        let fitted = PhysicalExpansion::from_series(&series).unwrap();
        let closed = PhysicalExpansion::closed_form(&d, &grid);
        let lead = series.h_norm.coefficient(-1).unwrap();
        assert!(lead.values.iter().all(|v| (v - 2.0).abs() < 1e-9));
        assert!(fitted.h_m2.max_abs_diff(&closed.h_m2) < 1e-6);
        assert!(fitted.h_m3.max_abs_diff(&closed.h_m3) < 1e-5);
        assert!(one_form_sup(&fitted.alpha_m1.sub(&closed.alpha_m1)) < 1e-6);
        assert!(one_form_sup(&fitted.alpha_m2.sub(&closed.alpha_m2)) < 1e-5);
        // h⁽⁻²⁾ is pure ℓ = 0 and α⁽⁻¹⁾ is exact.
        assert!(fitted.h_m2.project_degrees(1..=10).sup_norm() < 1e-8);
        assert!(fitted.alpha_m1.rotate().divergence().sup_norm() < 1e-8);
    }

    #[test]
    fn held_out_radius_is_predicted() {
        let grid = SphereGrid::new(8).unwrap();
        let d = generic();
        let radii: Vec<f64> = (0..6).map(|k| 100.0 * 2f64.powi(k)).collect();
        let samples: Vec<SurfaceData> =
            radii.iter().map(|&r| surface_data(&d, r, &grid).unwrap()).collect();
        let series = extract_series(&samples, &[-1, -2, -3, -4, -5]).unwrap();
        let held = surface_data(&d, 300.0, &grid).unwrap();
        let err = series.h_norm.evaluate(300.0).max_abs_diff(&held.h_norm);
        assert!(err <= 10.0 * series.h_norm.fit_residual.max(1e-17), "{err} vs {}", series.h_norm.fit_residual);
    }
}
