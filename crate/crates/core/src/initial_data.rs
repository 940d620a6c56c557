//! Harmonic-asymptotics initial data `g = u⁴δ`, `k = u²(Y_{i,j} + Y_{j,i} - ½ Y_{k,k} δ)`.
//!
//! The data set is the truncated expansion
//!
//! ```text
//! u   = 1 + A/r + u₂(X̃)/r²
//! Y_i = B_i/r + W_i(X̃)/r²
//! ```
//!
//! with the second-order profiles fixed by the vacuum constraints:
//!
//! ```text
//! u₂  = c·X̃ - (9/64)|B|² + (1/64)(B·X̃)²
//! W_i = d_ij X̃^j - (5/2) A B_i + (1/2) A (B·X̃) X̃^i
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::sphere::{solve_shifted_laplacian, SphereGrid, SphereScalar};

/// The four coefficient families of one data set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicAsymptotics {
    /// `A`; the ADM energy is `2A`.
    #[serde(rename = "A")]
    pub mass: f64,
    /// `B_i`; the ADM momentum is `B/2`.
    #[serde(rename = "B")]
    pub momentum: [f64; 3],
    /// `c_i`; the BORT center is `2c`.
    #[serde(rename = "c")]
    pub center: [f64; 3],
    /// `d_ij`, general 3×3; only `d - dᵀ` reaches the angular momentum.
    #[serde(rename = "d")]
    pub angular: [[f64; 3]; 3],
}

impl HarmonicAsymptotics {
    pub fn new(mass: f64, momentum: [f64; 3], center: [f64; 3], angular: [[f64; 3]; 3]) -> Result<Self> {
        let data = HarmonicAsymptotics { mass, momentum, center, angular };
        // the all-zero set is reachable only through `flat()`
        if !(mass > 0.0) {
            return Err(Error::Validation(format!("A must be positive, got {mass}")));
        }
        data.validate()?;
        Ok(data)
    }

    /// Minkowski data: `u ≡ 1`, `Y ≡ 0`.
    pub fn flat() -> Self {
        HarmonicAsymptotics { mass: 0.0, momentum: [0.0; 3], center: [0.0; 3], angular: [[0.0; 3]; 3] }
    }

    pub fn is_flat(&self) -> bool {
        *self == Self::flat()
    }

    pub fn validate(&self) -> Result<()> {
        let all = std::iter::once(self.mass)
            .chain(self.momentum)
            .chain(self.center)
            .chain(self.angular.iter().flatten().copied());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite coefficient".into()));
        }
        if self.is_flat() {
            return Ok(());
        }
        if self.mass <= 0.0 {
            return Err(Error::Validation(format!("A must be positive, got {}", self.mass)));
        }
        let ratio = self.boost_ratio();
        if ratio >= 1.0 {
            return Err(Error::NoTimelikeObserver(ratio));
        }
        Ok(())
    }

    /// `|B| / (4A)`, the speed of the limiting observer.
    pub fn boost_ratio(&self) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        norm3(self.momentum) / (4.0 * self.mass)
    }

    pub fn b_squared(&self) -> f64 {
        self.momentum.iter().map(|b| b * b).sum()
    }

    /// `u₂(n)` at a unit vector.
    pub fn u2_profile(&self, n: [f64; 3]) -> f64 {
        let g = dot(self.momentum, n);
        dot(self.center, n) - 9.0 / 64.0 * self.b_squared() + g * g / 64.0
    }

    /// `W_i(n)` at a unit vector.
    pub fn y2_profile(&self, n: [f64; 3]) -> [f64; 3] {
        let g = dot(self.momentum, n);
        let a = self.mass;
        [0, 1, 2].map(|i| {
            dot(self.angular[i], n) - 2.5 * a * self.momentum[i] + 0.5 * a * g * n[i]
        })
    }

    /// `u` and `Y_i` as second-order jets at `x ≠ 0`.
    pub fn field_jets(&self, x: [f64; 3]) -> Result<(Jet, [Jet; 3])> {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if !(r2 > 0.0) {
            return Err(Error::Domain("the data are singular at the origin".into()));
        }
        if self.is_flat() {
            return Ok((Jet::constant(1.0), [Jet::constant(0.0); 3]));
        }
        let xs = Jet::coordinates(x);
        let r = (xs[0] * xs[0] + xs[1] * xs[1] + xs[2] * xs[2]).sqrt();
        let inv_r = r.recip();
        let n = xs.map(|xi| xi * inv_r);
        let inv_r2 = inv_r * inv_r;
        let g = lin(self.momentum, &n);
        let cn = lin(self.center, &n);
        let a = self.mass;
        let u2 = cn - 9.0 / 64.0 * self.b_squared() + g * g * (1.0 / 64.0);
        let u = inv_r * a + u2 * inv_r2 + 1.0;
        let y = [0, 1, 2].map(|i| {
            let w = lin(self.angular[i], &n) - 2.5 * a * self.momentum[i] + g * n[i] * (0.5 * a);
            inv_r * self.momentum[i] + w * inv_r2
        });
        Ok((u, y))
    }
}

fn lin(v: [f64; 3], n: &[Jet; 3]) -> Jet {
    n[0] * v[0] + n[1] * v[1] + n[2] * v[2]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// The second-order angular profiles on the grid.
#[derive(Clone, Debug)]
pub struct ExpansionCompletion {
    pub u_m2: SphereScalar,
    pub y_m2: [SphereScalar; 3],
}

/// Sample the closed-form `u₂`, `W_i` and check them against a kernel-aware
/// solve of the second-order vacuum equations
///
/// ```text
/// (Δ̃+2) u₂  = -(1/16)(B·X̃)² - (1/4)|B|²
/// (Δ̃+2) W_i = -2A X̃^i (B·X̃) - 4A B_i
/// ```
///
/// whose ℓ = 1 freedom must be exactly `c·X̃` and `d_ij X̃^j`.
pub fn complete_expansion(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>) -> Result<ExpansionCompletion> {
    let (completion, worst) = completion_with_residual(data, grid)?;
    if worst > 1e-9 {
        return Err(Error::Consistency(worst));
    }
    Ok(completion)
}

/// [`complete_expansion`] without the tolerance gate: returns the fields and
/// `[u residual, Y residual]`, each the larger of the obstruction and the
/// mismatch against the closed form.
pub fn completion_residuals(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>) -> Result<(ExpansionCompletion, [f64; 2])> {
    data.validate()?;
    let u_m2 = grid.from_fn(|n| data.u2_profile(n));
    let y_m2 = [0, 1, 2].map(|i| grid.from_fn(|n| data.y2_profile(n)[i]));

    let b2 = data.b_squared();
    let a = data.mass;
    let rhs_u = grid.from_fn(|n| {
        let g = dot(data.momentum, n);
        -g * g / 16.0 - b2 / 4.0
    });
    let check = |closed: &SphereScalar, rhs: &SphereScalar, kernel: &SphereScalar| -> f64 {
        let solved = solve_shifted_laplacian(2.0, rhs);
        let obstruction = solved.obstruction.sup_norm();
        obstruction.max(closed.sub(&solved.solution).max_abs_diff(kernel))
    };
    let res_u = check(&u_m2, &rhs_u, &grid.from_fn(|n| dot(data.center, n)));
    let mut res_y = 0.0_f64;
    for i in 0..3 {
        let rhs = grid.from_fn(|n| {
            let g = dot(data.momentum, n);
            -2.0 * a * n[i] * g - 4.0 * a * data.momentum[i]
        });
        res_y = res_y.max(check(&y_m2[i], &rhs, &grid.from_fn(|n| dot(data.angular[i], n))));
    }
    Ok((ExpansionCompletion { u_m2, y_m2 }, [res_u, res_y]))
}

fn completion_with_residual(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>) -> Result<(ExpansionCompletion, f64)> {
    completion_residuals(data, grid).map(|(c, r)| (c, r[0].max(r[1])))
}

/// Fields and their Cartesian derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointData {
    pub u: f64,
    pub du: [f64; 3],
    pub y: [f64; 3],
    /// `dy[i][j] = ∂_j Y_i`
    pub dy: [[f64; 3]; 3],
    pub g: [[f64; 3]; 3],
    pub k: [[f64; 3]; 3],
}

pub fn evaluate(data: &HarmonicAsymptotics, x: [f64; 3]) -> Result<PointData> {
    let (u, y) = data.field_jets(x)?;
    Ok(point_data(&u, &y))
}

fn point_data(u: &Jet, y: &[Jet; 3]) -> PointData {
    let dy = [0, 1, 2].map(|i| y[i].g);
    let u2 = u.v * u.v;
    let u4 = u2 * u2;
    let div = dy[0][0] + dy[1][1] + dy[2][2];
    let mut g = [[0.0; 3]; 3];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        g[i][i] = u4;
        for j in 0..3 {
            let sym = dy[i][j] + dy[j][i];
            k[i][j] = u2 * (sym - if i == j { 0.5 * div } else { 0.0 });
        }
    }
    PointData { u: u.v, du: u.g, y: y.map(|v| v.v), dy, g, k }
}

/// Pointwise residuals of the reduced vacuum system
///
/// ```text
/// 8Δu - u(-|𝔏Y|² + ½ (tr 𝔏Y)²)
/// ΔY_i - (2u⁻¹ u_i tr 𝔏Y - 4u⁻¹ u_j (𝔏Y)_ij)
/// ```
///
/// with `(𝔏Y)_ij = Y_{i,j} + Y_{j,i} - Y_{k,k} δ_ij`, at `r X̃` over the grid.
#[derive(Clone, Debug)]
pub struct ConstraintResidual {
    pub r: f64,
    pub hamiltonian: SphereScalar,
    pub momentum: [SphereScalar; 3],
    /// Largest sum of absolute term sizes; the roundoff floor is relative to it.
    pub hamiltonian_scale: f64,
    pub momentum_scale: f64,
}

pub fn constraint_residual(data: &HarmonicAsymptotics, r: f64, grid: &Arc<SphereGrid>) -> Result<ConstraintResidual> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let n = grid.len();
    let mut ham = vec![0.0; n];
    let mut mom = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let (mut ham_scale, mut mom_scale) = (0.0_f64, 0.0_f64);
    for k in 0..n {
        let p = grid.position(k).map(|v| v * r);
        let (u, y) = data.field_jets(p)?;
        let dy = [0, 1, 2].map(|i| y[i].g);
        let div = dy[0][0] + dy[1][1] + dy[2][2];
        let mut ly = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                ly[i][j] = dy[i][j] + dy[j][i] - if i == j { div } else { 0.0 };
            }
        }
        let tr = ly[0][0] + ly[1][1] + ly[2][2];
        let sq: f64 = ly.iter().flatten().map(|v| v * v).sum();
        ham[k] = 8.0 * u.laplacian() - u.v * (-sq + 0.5 * tr * tr);
        let abs_lap = |h: &[[f64; 3]; 3]| h[0][0].abs() + h[1][1].abs() + h[2][2].abs();
        ham_scale = ham_scale.max(8.0 * abs_lap(&u.h) + u.v.abs() * (sq + 0.5 * tr * tr));
        for i in 0..3 {
            let contraction: f64 = (0..3).map(|j| u.g[j] * ly[i][j]).sum();
            let rhs = 2.0 / u.v * u.g[i] * tr - 4.0 / u.v * contraction;
            mom[i][k] = y[i].laplacian() - rhs;
            mom_scale = mom_scale.max(abs_lap(&y[i].h) + rhs.abs());
        }
    }
    let [m0, m1, m2] = mom;
    Ok(ConstraintResidual {
        r,
        hamiltonian: grid.from_values(ham)?,
        momentum: [grid.from_values(m0)?, grid.from_values(m1)?, grid.from_values(m2)?],
        hamiltonian_scale: ham_scale,
        momentum_scale: mom_scale,
    })
}

impl ConstraintResidual {
    pub fn momentum_sup(&self) -> f64 {
        self.momentum.iter().map(|m| m.sup_norm()).fold(0.0, f64::max)
    }
}

/// `log₂(sup|R(r)| / sup|R(2r)|)`, the measured power-law decay over one doubling.
pub fn decay_exponent(at_r: f64, at_2r: f64) -> f64 {
    (at_r / at_2r).log2()
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

    #[test]
    fn validation() {
        assert!(HarmonicAsymptotics::new(0.0, [0.0; 3], [0.0; 3], [[0.0; 3]; 3]).is_err());
        assert!(HarmonicAsymptotics::new(-1.0, [0.0; 3], [0.0; 3], [[0.0; 3]; 3]).is_err());
        assert!(matches!(
            HarmonicAsymptotics::new(0.5, [2.0, 0.0, 0.0], [0.0; 3], [[0.0; 3]; 3]),
            Err(Error::NoTimelikeObserver(_))
        ));
        assert!(HarmonicAsymptotics::new(0.5, [f64::NAN, 0.0, 0.0], [0.0; 3], [[0.0; 3]; 3]).is_err());
        assert!(HarmonicAsymptotics::flat().validate().is_ok());
    }

    #[test]
    fn completion_vanishes_without_b_c_d() {
        let grid = SphereGrid::new(8).unwrap();
        let data = HarmonicAsymptotics::new(0.7, [0.0; 3], [0.0; 3], [[0.0; 3]; 3]).unwrap();
        let c = complete_expansion(&data, &grid).unwrap();
        assert!(c.u_m2.sup_norm() < 1e-15);
        assert!(c.y_m2.iter().all(|y| y.sup_norm() < 1e-15));
    }

    #[test]
    fn completion_single_axis_momentum() {
        let grid = SphereGrid::new(8).unwrap();
        let b = 0.8;
        let data = HarmonicAsymptotics::new(0.5, [b, 0.0, 0.0], [0.0; 3], [[0.0; 3]; 3]).unwrap();
        let c = complete_expansion(&data, &grid).unwrap();
        let expect = grid.from_fn(|n| -9.0 / 64.0 * b * b + b * b * n[0] * n[0] / 64.0);
        assert!(c.u_m2.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn completion_generic_passes_elliptic_check() {
        let grid = SphereGrid::new(10).unwrap();
        complete_expansion(&generic(), &grid).unwrap();
    }

    #[test]
    fn evaluate_at_origin_is_domain_error() {
        assert!(matches!(evaluate(&generic(), [0.0; 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn time_symmetric_point_values() {
        let data = HarmonicAsymptotics::new(0.7, [0.0; 3], [0.0; 3], [[0.0; 3]; 3]).unwrap();
        let x = [3.0, -4.0, 12.0];
        let p = evaluate(&data, x).unwrap();
        assert!((p.u - (1.0 + 0.7 / 13.0)).abs() < 1e-15);
        assert!(p.y.iter().all(|v| *v == 0.0));
        assert!(p.k.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn asymptotically_flat() {
        let d = generic();
        let p = evaluate(&d, [1e7, 2e7, -3e7]).unwrap();
        assert!((p.u - 1.0).abs() < 1e-7);
        assert!(p.y.iter().all(|v| v.abs() < 1e-7));
    }

    #[test]
    fn k_trace_reproduces_leading_p() {
        let d = generic();
        let r = 100.0;
        for n in [[0.0, 0.6, 0.8], [1.0, 0.0, 0.0], [-0.48, 0.6, 0.64]] {
            let p = evaluate(&d, n.map(|v| v * r)).unwrap();
            let mut trace = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    trace += p.k[i][j] * ((i == j) as u8 as f64 - n[i] * n[j]);
                }
            }
            let pr = trace / p.u.powi(4) * r * r;
            assert!((pr - dot(d.momentum, n)).abs() < 0.05, "{pr}");
        }
    }

    #[test]
    fn g_and_k_exactly_symmetric() {
        let d = generic();
        let p = evaluate(&d, [7.0, -2.0, 3.5]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(p.g[i][j], p.g[j][i]);
                assert_eq!(p.k[i][j], p.k[j][i]);
            }
        }
    }

    #[test]
    fn schwarzschild_residual_vanishes() {
        let grid = SphereGrid::new(6).unwrap();
        let data = HarmonicAsymptotics::new(0.5, [0.0; 3], [0.0; 3], [[0.0; 3]; 3]).unwrap();
        let res = constraint_residual(&data, 10.0, &grid).unwrap();
        assert!(res.hamiltonian.sup_norm() < 1e-14);
        assert!(res.momentum_sup() == 0.0);
    }

    #[test]
    fn generic_residual_decay() {
        let grid = SphereGrid::new(8).unwrap();
        let d = generic();
        let a = constraint_residual(&d, 100.0, &grid).unwrap();
        let b = constraint_residual(&d, 200.0, &grid).unwrap();
        let eh = decay_exponent(a.hamiltonian.sup_norm(), b.hamiltonian.sup_norm());
        let em = decay_exponent(a.momentum_sup(), b.momentum_sup());
        assert!(eh >= 4.5, "hamiltonian exponent {eh}");
        assert!(em >= 3.5, "momentum exponent {em}");
    }
}
