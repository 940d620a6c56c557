//! Total conserved quantities: ADM energy-momentum, ADM angular momentum and
//! BORT center of mass from flux integrals, and the CWY center of mass and
//! angular momentum from the optimal embedding, each by closed form and by
//! extrapolated surface integrals.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::embedding::{rho_j, EmbeddingExpansion, ReferenceExpansion};
use crate::error::{Error, Result};
use crate::fit::{extrapolate_many, propagated_noise};
use crate::initial_data::{dot, evaluate, ExpansionCompletion, HarmonicAsymptotics};
use crate::lorentz::{boost_from_observer, minkowski, BoostMatrix, Observer, Vec4};
use crate::reference::{optimal_fields, reference_geometry};
use crate::sphere::{SphereGrid, SphereOneForm, SphereScalar};
use crate::surface::{surface_data, PhysicalExpansion};

pub type Vec3 = [f64; 3];

/// Tolerance for the observer consistency `a/a⁰ = B/(4A)`.
const OBSERVER_TOL: f64 = 1e-10;

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// `(E, P, C_BORT, J_ADM)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmValues {
    pub e: f64,
    pub p: Vec3,
    pub c: Vec3,
    pub j: Vec3,
}

impl AdmValues {
    pub const NAMES: [&'static str; 10] = ["E", "P_1", "P_2", "P_3", "C_BORT_1", "C_BORT_2", "C_BORT_3", "J_ADM_1", "J_ADM_2", "J_ADM_3"];

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.e];
        v.extend(self.p);
        v.extend(self.c);
        v.extend(self.j);
        v
    }

    pub fn from_slice(v: &[f64]) -> AdmValues {
        AdmValues { e: v[0], p: [v[1], v[2], v[3]], c: [v[4], v[5], v[6]], j: [v[7], v[8], v[9]] }
    }
}

/// `E = 2A`, `P = B/2`, `C_BORT = 2c`, `J_ADM^i = ε^{ijk} d_jk / 2`.
pub fn adm_closed_form(data: &HarmonicAsymptotics) -> AdmValues {
    let j = [0, 1, 2].map(|i| {
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += levi_civita(i, a, b) * data.angular[a][b];
            }
        }
        0.5 * s
    });
    AdmValues {
        e: 2.0 * data.mass,
        p: data.momentum.map(|b| 0.5 * b),
        c: data.center.map(|c| 2.0 * c),
        j,
    }
}

/// The four flux integrals on the coordinate sphere of radius `r`, with
/// `ν = u⁻² n` and `dΣ = u⁴ r² dS`.
///
/// The BORT boundary term uses `g_ij - δ_ij`, and `P` is taken with the sign
/// that makes it the momentum conjugate to the shift `Y`.
pub fn adm_at_radius(data: &HarmonicAsymptotics, r: f64, grid: &Arc<SphereGrid>) -> Result<AdmValues> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let n_nodes = grid.len();
    let mut cols = vec![vec![0.0; n_nodes]; 10];
    for node in 0..n_nodes {
        let n = grid.position(node);
        let x = n.map(|v| v * r);
        let pd = evaluate(data, x)?;
        let u2 = pd.u * pd.u;
        let u4 = u2 * u2;
        let u3 = u2 * pd.u;
        let nu = n.map(|v| v / u2);
        let area = u4 * r * r;
        let tr_k = (pd.k[0][0] + pd.k[1][1] + pd.k[2][2]) / u4;
        let pi = |i: usize, k: usize| pd.k[i][k] - pd.g[i][k] * tr_k;

        let flux = -8.0 * u3 * dot(pd.du, nu);
        cols[0][node] = flux * area / (16.0 * PI);
        for k in 0..3 {
            let p: f64 = (0..3).map(|i| pi(i, k) * nu[i]).sum();
            cols[1 + k][node] = -p * area / (8.0 * PI);
            let boundary = -2.0 * (u4 - 1.0) * nu[k];
            cols[4 + k][node] = (x[k] * flux - boundary) * area / (16.0 * PI);
            let mut jk = 0.0;
            for a in 0..3 {
                // (e_k × x)^a = ε_{a k b} x^b
                let y: f64 = (0..3).map(|b| levi_civita(a, k, b) * x[b]).sum();
                for b in 0..3 {
                    jk += pi(a, b) * y * nu[b];
                }
            }
            cols[7 + k][node] = jk * area / (8.0 * PI);
        }
    }
    let v: Vec<f64> = cols.iter().map(|c| grid.integrate_values(c)).collect();
    Ok(AdmValues::from_slice(&v))
}

/// Per-radius samples with their extrapolated limits.
#[derive(Clone, Debug, Serialize)]
pub struct Extrapolated<T> {
    pub radii: Vec<f64>,
    pub samples: Vec<T>,
    pub limit: T,
    pub error: T,
}

fn extrapolate_values<T>(radii: &[f64], samples: Vec<T>, to_vec: impl Fn(&T) -> Vec<f64>, from: impl Fn(&[f64]) -> T) -> Result<Extrapolated<T>> {
    let rows: Vec<Vec<f64>> = samples.iter().map(&to_vec).collect();
    let limits = extrapolate_many(radii, &rows)?;
    let value: Vec<f64> = limits.iter().map(|l| l.value).collect();
    let error: Vec<f64> = limits.iter().map(|l| l.error).collect();
    Ok(Extrapolated { radii: radii.to_vec(), samples, limit: from(&value), error: from(&error) })
}

pub fn adm_quantities(data: &HarmonicAsymptotics, radii: &[f64], grid: &Arc<SphereGrid>) -> Result<Extrapolated<AdmValues>> {
    let samples = radii.iter().map(|&r| adm_at_radius(data, r, grid)).collect::<Result<Vec<_>>>()?;
    extrapolate_values(radii, samples, AdmValues::to_vec, AdmValues::from_slice)
}

/// `(C_CWY, J_CWY)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CwyValues {
    pub c: Vec3,
    pub j: Vec3,
}

impl CwyValues {
    pub const NAMES: [&'static str; 6] = ["C_CWY_1", "C_CWY_2", "C_CWY_3", "J_CWY_1", "J_CWY_2", "J_CWY_3"];
    pub const ZERO: CwyValues = CwyValues { c: [0.0; 3], j: [0.0; 3] };

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.c.to_vec();
        v.extend(self.j);
        v
    }

    pub fn from_slice(v: &[f64]) -> CwyValues {
        CwyValues { c: [v[0], v[1], v[2]], j: [v[3], v[4], v[5]] }
    }

    pub fn max_abs_diff(&self, other: &CwyValues) -> f64 {
        self.to_vec().iter().zip(other.to_vec()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// ```text
/// C_i = 2c_i/a⁰ + (c_i B_j - c_j B_i) A_0j/(4A) + (d_ij - d_ji) A_0j/4
/// J_i = Σ_{j,k,l} (ε_ijk/4) [A_kl (c_j B_l - c_l B_j)/A + A_kl (d_jl - d_lj)]
/// ```
pub fn cwy_closed_form(data: &HarmonicAsymptotics, obs: &Observer, boost: &BoostMatrix) -> Result<CwyValues> {
    data.validate()?;
    if data.is_flat() {
        return Ok(CwyValues::ZERO);
    }
    let big_a = data.mass;
    let (b, c, d) = (data.momentum, data.center, data.angular);
    let mismatch = (0..3).map(|k| (obs.a[k] / obs.a0 - b[k] / (4.0 * big_a)).abs()).fold(0.0, f64::max);
    if mismatch > OBSERVER_TOL {
        return Err(Error::Validation(format!("observer velocity differs from B/(4A) by {mismatch:e}")));
    }
    let m = &boost.entries;
    let cv = [0, 1, 2].map(|i| {
        let mut s = 2.0 * c[i] / obs.a0;
        for j in 0..3 {
            let a0j = m[0][j + 1];
            s += (c[i] * b[j] - c[j] * b[i]) * a0j / (4.0 * big_a) + (d[i][j] - d[j][i]) * a0j / 4.0;
        }
        s
    });
    let jv = [0, 1, 2].map(|i| {
        let mut s = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                let e = levi_civita(i, j, k);
                if e == 0.0 {
                    continue;
                }
                for l in 0..3 {
                    let akl = m[k + 1][l + 1];
                    s += e / 4.0 * (akl * (c[j] * b[l] - c[l] * b[j]) / big_a + akl * (d[j][l] - d[l][j]));
                }
            }
        }
        s
    });
    Ok(CwyValues { c: cv, j: jv })
}

/// Linear vector field `x ↦ M x` on Minkowski space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KillingGenerator {
    pub matrix: [[f64; 4]; 4],
}

impl KillingGenerator {
    /// `x^i ∂₀ + x⁰ ∂_i`.
    pub fn boost(i: usize) -> KillingGenerator {
        let mut m = [[0.0; 4]; 4];
        m[0][i + 1] = 1.0;
        m[i + 1][0] = 1.0;
        KillingGenerator { matrix: m }
    }

    /// `x^j ∂_k - x^k ∂_j`.
    pub fn rotation(j: usize, k: usize) -> KillingGenerator {
        let mut m = [[0.0; 4]; 4];
        m[k + 1][j + 1] += 1.0;
        m[j + 1][k + 1] -= 1.0;
        KillingGenerator { matrix: m }
    }

    /// `A·M`: the generator's values carried by the Lorentz transformation `A`.
    pub fn transformed_by(&self, boost: &BoostMatrix) -> KillingGenerator {
        let a = &boost.entries;
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| a[i][k] * self.matrix[k][j]).sum();
            }
        }
        KillingGenerator { matrix: out }
    }

    pub fn add(&self, other: &KillingGenerator) -> KillingGenerator {
        let mut out = self.matrix;
        for (row, o) in out.iter_mut().zip(&other.matrix) {
            for (v, w) in row.iter_mut().zip(o) {
                *v += w;
            }
        }
        KillingGenerator { matrix: out }
    }

    pub fn apply(&self, x: &Vec4) -> Vec4 {
        [0, 1, 2, 3].map(|i| (0..4).map(|j| self.matrix[i][j] * x[j]).sum())
    }
}

/// `⟨K, T₀⟩` and the pullback `⟨K, ∂_a X⟩` along the embedding `x`.
pub fn killing_tangential(k: &KillingGenerator, x: &[SphereScalar; 4], t0: &Vec4) -> (SphereScalar, SphereOneForm) {
    let grid = x[0].grid.clone();
    let grads = x.clone().map(|c| c.gradient());
    let n = grid.len();
    let mut kt = vec![0.0; n];
    let mut theta = vec![0.0; n];
    let mut phi = vec![0.0; n];
    for node in 0..n {
        let kv = k.apply(&[0, 1, 2, 3].map(|mu| x[mu].values[node]));
        kt[node] = minkowski(&kv, t0);
        theta[node] = minkowski(&kv, &[0, 1, 2, 3].map(|mu| grads[mu].theta[node]));
        phi[node] = minkowski(&kv, &[0, 1, 2, 3].map(|mu| grads[mu].phi[node]));
    }
    (SphereScalar { grid: grid.clone(), values: kt }, SphereOneForm { grid, theta, phi })
}

/// Everything needed to evaluate `E(Σ_r, X, T₀, K)` for several `K`.
struct ConservedIntegrand {
    x: [SphereScalar; 4],
    t0: Vec4,
    /// `ρ u⁴ r²`, the density against `dS`.
    rho_area: SphereScalar,
    /// `j` with the physical `σ^{ab}√σ = σ̃^{ab}√σ̃` already applied.
    j: SphereOneForm,
}

impl ConservedIntegrand {
    /// `-(1/8π) ∫ (⟨K, T₀⟩ρ + j(K^⊤)) dΣ`.
    fn evaluate(&self, k: &KillingGenerator) -> f64 {
        let (kt, kx) = killing_tangential(k, &self.x, &self.t0);
        -(kt.mul(&self.rho_area).integral() + kx.dot(&self.j).integral()) / (8.0 * PI)
    }
}

fn conserved_integrand(
    data: &HarmonicAsymptotics,
    emb: &EmbeddingExpansion,
    r: f64,
) -> Result<ConservedIntegrand> {
    let grid = emb.grid();
    let phys = surface_data(data, r, grid)?;
    let reference = reference_geometry(emb, &phys)?;
    let obs = emb.observer_at(r);
    let fields = optimal_fields(&phys, &reference, &obs)?;
    Ok(ConservedIntegrand {
        rho_area: fields.rho.mul(&phys.area_factor()),
        j: fields.j,
        x: reference.x,
        t0: obs.as_vec4(),
    })
}

/// CWY center of mass and angular momentum at one radius, with the generators
/// carried by the limiting boost. `J_i = Σ_{j<k} ε_ijk E(A(x^j∂_k - x^k∂_j))`.
pub fn cwy_at_radius(data: &HarmonicAsymptotics, emb: &EmbeddingExpansion, r: f64) -> Result<CwyValues> {
    let boost = boost_from_observer(&emb.observer)?;
    let integrand = conserved_integrand(data, emb, r)?;
    let c = [0, 1, 2].map(|i| integrand.evaluate(&KillingGenerator::boost(i).transformed_by(&boost)));
    let mut j = [0.0; 3];
    for a in 0..3 {
        for b in (a + 1)..3 {
            let e = integrand.evaluate(&KillingGenerator::rotation(a, b).transformed_by(&boost));
            for (i, ji) in j.iter_mut().enumerate() {
                *ji += levi_civita(i, a, b) * e;
            }
        }
    }
    Ok(CwyValues { c, j })
}

/// `(1/8π)∫X̃^k ρ⁽⁻³⁾` and `(1/8π)∫X̃^k ⟨∂X̃^l, j⁽⁻²⁾⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedIntegrals {
    pub x_rho: Vec3,
    pub x_dx_j: [[f64; 3]; 3],
}

impl ReducedIntegrals {
    pub fn from_expansion(
        phys: &PhysicalExpansion,
        completion: &ExpansionCompletion,
        emb: &EmbeddingExpansion,
    ) -> ReducedIntegrals {
        let reference = ReferenceExpansion::closed_form(emb, completion);
        let rj = rho_j(phys, &reference, emb);
        let grid = emb.grid();
        let coords = grid.coordinates();
        let x_rho = [0, 1, 2].map(|k| coords.x[k].mul(&rj.rho_m3).integral() / (8.0 * PI));
        let x_dx_j = [0, 1, 2].map(|k| {
            [0, 1, 2].map(|l| {
                let mut e = [0.0; 3];
                e[l] = 1.0;
                grid.gradient_of_linear(e).dot(&rj.j_m2).mul(&coords.x[k]).integral() / (8.0 * PI)
            })
        });
        ReducedIntegrals { x_rho, x_dx_j }
    }

    /// `2c/a⁰` and `(c_l B_k - c_k B_l)/(4A) + (d_lk - d_kl)/4`.
    pub fn closed_form(data: &HarmonicAsymptotics, obs: &Observer) -> ReducedIntegrals {
        let (b, c, d) = (data.momentum, data.center, data.angular);
        let inv = if data.mass > 0.0 { 1.0 / (4.0 * data.mass) } else { 0.0 };
        ReducedIntegrals {
            x_rho: c.map(|ci| 2.0 * ci / obs.a0),
            x_dx_j: [0, 1, 2].map(|k| [0, 1, 2].map(|l| (c[l] * b[k] - c[k] * b[l]) * inv + (d[l][k] - d[k][l]) / 4.0)),
        }
    }

    pub fn max_abs_diff(&self, other: &ReducedIntegrals) -> f64 {
        let mut m = 0.0_f64;
        for k in 0..3 {
            m = m.max((self.x_rho[k] - other.x_rho[k]).abs());
            for l in 0..3 {
                m = m.max((self.x_dx_j[k][l] - other.x_dx_j[k][l]).abs());
            }
        }
        m
    }

    /// `C_i = x_rho_i - Σ_j A_0j q_ij`, `J_i = -Σ ε_ijk A_kl q_jl`.
    pub fn assemble(&self, boost: &BoostMatrix) -> CwyValues {
        let m = &boost.entries;
        let q = &self.x_dx_j;
        let c = [0, 1, 2].map(|i| self.x_rho[i] - (0..3).map(|j| m[0][j + 1] * q[i][j]).sum::<f64>());
        let j = [0, 1, 2].map(|i| {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    for l in 0..3 {
                        s -= levi_civita(i, a, b) * m[b + 1][l + 1] * q[a][l];
                    }
                }
            }
            s
        });
        CwyValues { c, j }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CwyQuantities {
    pub numeric: Extrapolated<CwyValues>,
    pub reduced: ReducedIntegrals,
}

pub fn cwy_numeric(
    data: &HarmonicAsymptotics,
    completion: &ExpansionCompletion,
    phys: &PhysicalExpansion,
    emb: &EmbeddingExpansion,
    radii: &[f64],
) -> Result<CwyQuantities> {
    let samples = radii.iter().map(|&r| cwy_at_radius(data, emb, r)).collect::<Result<Vec<_>>>()?;
    let mut numeric = extrapolate_values(radii, samples, CwyValues::to_vec, CwyValues::from_slice)?;
    // ρ is a difference of O(1/r) curvatures, so each sample carries roundoff of order ε r²
    let noise: Vec<f64> = radii.iter().map(|r| f64::EPSILON * r * r).collect();
    let floor = propagated_noise(radii, &noise)?;
    numeric.error = CwyValues::from_slice(&numeric.error.to_vec().iter().map(|e| e.max(floor)).collect::<Vec<_>>());
    Ok(CwyQuantities { numeric, reduced: ReducedIntegrals::from_expansion(phys, completion, emb) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::optimal_expansion;
    use crate::initial_data::complete_expansion;

    const RADII: [f64; 5] = [50.0, 100.0, 200.0, 400.0, 800.0];

    fn sample() -> HarmonicAsymptotics {
        HarmonicAsymptotics::new(
            0.8,
            [0.5, -0.7, 0.3],
            [0.4, -0.2, 0.9],
            [[0.3, -0.6, 0.2], [0.1, 0.5, -0.8], [0.7, 0.2, -0.4]],
        )
        .unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn adm_matches_closed_form() {
        let d = sample();
        let grid = SphereGrid::new(16).unwrap();
        let q = adm_quantities(&d, &RADII, &grid).unwrap();
        let err = max_diff(&q.limit.to_vec(), &adm_closed_form(&d).to_vec());
        assert!(err < 1e-6, "{err:e} {:?} {:?}", q.limit, adm_closed_form(&d));
    }

    #[test]
    fn cwy_numeric_matches_closed_form() {
        let d = sample();
        let grid = SphereGrid::new(16).unwrap();
        let c = complete_expansion(&d, &grid).unwrap();
        let (e, p) = optimal_expansion(&d, &c).unwrap();
        let boost = boost_from_observer(&e.observer).unwrap();
        let exact = cwy_closed_form(&d, &e.observer, &boost).unwrap();
        let q = cwy_numeric(&d, &c, &p, &e, &RADII).unwrap();
        let err = q.numeric.limit.max_abs_diff(&exact);
        assert!(err < 1e-6, "{err:e}\n{:?}\n{exact:?}\n{:?}", q.numeric.limit, q.numeric.error);
        assert!(q.reduced.max_abs_diff(&ReducedIntegrals::closed_form(&d, &e.observer)) < 1e-8);
        assert!(q.reduced.assemble(&boost).max_abs_diff(&exact) < 1e-8);
    }

    #[test]
    fn generators_pair_as_expected() {
        let grid = SphereGrid::new(6).unwrap();
        let coords = grid.coordinates();
        let r = 3.0;
        let x = [grid.constant(0.0), coords.x[0].scale(r), coords.x[1].scale(r), coords.x[2].scale(r)];
        let t0 = [1.0, 0.0, 0.0, 0.0];
        let (kt, _) = killing_tangential(&KillingGenerator::rotation(0, 1), &x, &t0);
        assert!(kt.sup_norm() == 0.0);
        let (kt, _) = killing_tangential(&KillingGenerator::boost(0), &x, &t0);
        assert!(kt.max_abs_diff(&coords.x[0].scale(-r)) < 1e-15);
        let k1 = KillingGenerator::boost(1);
        let k2 = KillingGenerator::rotation(2, 0);
        let (_, a) = killing_tangential(&k1.add(&k2), &x, &t0);
        let (_, b1) = killing_tangential(&k1, &x, &t0);
        let (_, b2) = killing_tangential(&k2, &x, &t0);
        let diff = a.sub(&b1.add(&b2));
        assert!(diff.dot(&diff).sup_norm() < 1e-24);
    }

    #[test]
    fn closed_form_is_linear_and_sees_only_antisymmetric_d() {
        let d = sample();
        let obs = Observer::from_velocity(d.momentum.map(|b| b / (4.0 * d.mass))).unwrap();
        let boost = boost_from_observer(&obs).unwrap();
        let base = cwy_closed_form(&d, &obs, &boost).unwrap();
        let mut sym = d;
        for i in 0..3 {
            for j in 0..3 {
                sym.angular[i][j] += 0.3 * (i + j) as f64;
            }
        }
        assert!(cwy_closed_form(&sym, &obs, &boost).unwrap().max_abs_diff(&base) < 1e-15);
        let zero = HarmonicAsymptotics::new(d.mass, d.momentum, [0.0; 3], [[0.0; 3]; 3]).unwrap();
        assert_eq!(cwy_closed_form(&zero, &obs, &boost).unwrap(), CwyValues::ZERO);
        let bad = Observer::REST;
        assert!(matches!(cwy_closed_form(&d, &bad, &BoostMatrix::IDENTITY), Err(Error::Validation(_))));
    }

    #[test]
    fn vanishing_momentum_reduces_to_adm() {
        let d = HarmonicAsymptotics::new(0.5, [0.0; 3], [0.1, 0.2, 0.3], [[0.0, 0.4, -0.2], [0.1, 0.0, 0.6], [0.5, -0.3, 0.0]]).unwrap();
        let adm = adm_closed_form(&d);
        let cwy = cwy_closed_form(&d, &Observer::REST, &BoostMatrix::IDENTITY).unwrap();
        assert!(max_diff(&cwy.c, &adm.c) < 1e-15 && max_diff(&cwy.j, &adm.j) < 1e-15);
        assert!(max_diff(&cwy.c, &[0.2, 0.4, 0.6]) < 1e-15);
    }
}
