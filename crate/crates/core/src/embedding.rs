//! Asymptotic expansion of the optimal isometric embedding of `Σ_r` into
//! Minkowski space, and the resulting `ρ`, `j` coefficients.
//!
//! ```text
//! X^i = r X̃^i + (X^i)⁽⁰⁾ + (X^i)⁽⁻¹⁾/r
//! X⁰  = (X⁰)⁽⁰⁾ + (X⁰)⁽⁻¹⁾/r
//! T₀  = (a⁰, a) + (·, a⁽⁻¹⁾)/r
//! ```
//!
//! The leading orders follow from the linearised isometric and optimal
//! equations. `(X⁰)⁽⁻¹⁾` and `a⁽⁻¹⁾` are fixed by requiring `div j⁽⁻²⁾ = 0`:
//! the `ℓ = 1` part of that equation is linear in `a⁽⁻¹⁾`, and the `ℓ ≥ 2`
//! part is `½Δ̃(Δ̃+2)(X⁰)⁽⁻¹⁾ = div j⁽⁻²⁾|_{(X⁰)⁽⁻¹⁾=0}`.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::initial_data::{dot, ExpansionCompletion, HarmonicAsymptotics};
use crate::lorentz::Observer;
use crate::sphere::{solve_operator, SphereGrid, SphereOneForm, SphereOperator, SphereScalar};
use crate::surface::PhysicalExpansion;

/// Tolerance on obstructions that must vanish after the solvability conditions.
pub const OBSTRUCTION_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct EmbeddingExpansion {
    /// `A`, which enters the reduced formulas for `ρ⁽⁻³⁾` and `j⁽⁻²⁾`.
    pub mass: f64,
    pub xi_1: [SphereScalar; 3],
    pub xi_0: [SphereScalar; 3],
    pub xi_m1: [SphereScalar; 3],
    pub x0_0: SphereScalar,
    pub x0_m1: SphereScalar,
    pub observer: Observer,
    pub a_m1: [f64; 3],
}

impl EmbeddingExpansion {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.x0_0.grid
    }

    /// `T₀(r) = (a⁰(r), a + a⁽⁻¹⁾/r)`, renormalised.
    pub fn observer_at(&self, r: f64) -> Observer {
        let a = self.observer.a;
        Observer::from_spatial([0, 1, 2].map(|i| a[i] + self.a_m1[i] / r))
    }

    pub fn with_second_order(&self, x0_m1: SphereScalar, a_m1: [f64; 3]) -> EmbeddingExpansion {
        EmbeddingExpansion { x0_m1, a_m1, ..self.clone() }
    }
}

/// `(∫ X̃^k f)_k`.
pub fn l1_moments(f: &SphereScalar) -> [f64; 3] {
    let grid = &f.grid;
    [0, 1, 2].map(|k| {
        let v: Vec<f64> = (0..grid.len()).map(|n| grid.position(n)[k] * f.values[n]).collect();
        grid.integrate_values(&v)
    })
}

/// Solution of `∂_a X̃ · ∂_b X + ∂_a X · ∂_b X̃ = f σ̃_ab`: `X = (f/2) X̃`.
pub fn conformal_isometric(f: &SphereScalar) -> [SphereScalar; 3] {
    let coords = f.grid.coordinates();
    coords.x.map(|x| x.mul(f).scale(0.5))
}

/// `max |∂_a X̃·∂_b X + ∂_a X·∂_b X̃ - f σ̃_ab|` over components, with `X` differentiated spectrally.
pub fn isometric_defect(x: &[SphereScalar; 3], f: &SphereScalar) -> f64 {
    let grid = &f.grid;
    let grads = x.clone().map(|c| c.gradient());
    let mut worst = 0.0_f64;
    for k in 0..grid.len() {
        let [tt, tp] = grid.tangents(k);
        let s = grid.sin_theta(k);
        let xt = [0, 1, 2].map(|i| grads[i].theta[k]);
        let xp = [0, 1, 2].map(|i| grads[i].phi[k]);
        let e_tt = 2.0 * dot(tt, xt) - f.values[k];
        let e_tp = dot(tt, xp) + dot(tp, xt);
        let e_pp = 2.0 * dot(tp, xp) - f.values[k] * s * s;
        worst = worst.max(e_tt.abs()).max(e_tp.abs()).max(e_pp.abs());
    }
    worst
}

/// Source, obstruction and minimal-norm solution of the linearised optimal
/// equation
///
/// ```text
/// div(ρ⁽⁻²⁾∇̃τ⁽¹⁾) - ¼Δ̃(ρ⁽⁻²⁾Δ̃τ⁽¹⁾) - ½Δ̃(Δ̃+2)(X⁰)⁽⁰⁾ + div α_H⁽⁻¹⁾ = 0
/// ```
///
/// for a given observer, with `τ⁽¹⁾ = -a·X̃` and `ρ⁽⁻²⁾ = (h₀⁽⁻²⁾ - h⁽⁻²⁾)/a⁰`.
#[derive(Clone, Debug)]
pub struct LinearizedOptimal {
    pub source: SphereScalar,
    /// `ℓ ≤ 1` part of the source, which `Δ̃(Δ̃+2)` cannot reach.
    pub obstruction: SphereScalar,
    pub x0_0: SphereScalar,
}

pub fn linearized_optimal(
    phys: &PhysicalExpansion,
    h0_m2: &SphereScalar,
    observer: &Observer,
) -> LinearizedOptimal {
    let grid = &h0_m2.grid;
    let rho2 = h0_m2.sub(&phys.h_m2).scale(1.0 / observer.a0);
    let tau1 = grid.from_fn(|n| -dot(observer.a, n));
    let source = tau1
        .gradient()
        .times(&rho2)
        .divergence()
        .sub(&rho2.mul(&tau1.laplacian()).laplacian().scale(0.25))
        .add(&phys.alpha_m1.divergence());
    let solved = solve_operator(SphereOperator::LaplacianTimesShifted(2.0), &source.scale(2.0));
    LinearizedOptimal { obstruction: solved.obstruction.scale(0.5), source, x0_0: solved.solution }
}

/// `h₀⁽⁻²⁾ = -X̃^i Δ̃(X^i)⁽⁰⁾ - tr σ⁽¹⁾`.
pub fn reference_h_m2(xi_0: &[SphereScalar; 3], sigma_1: &SphereScalar) -> SphereScalar {
    let coords = xi_0[0].grid.coordinates();
    let mut out = sigma_1.scale(-2.0);
    for i in 0..3 {
        out = out.sub(&coords.x[i].mul(&xi_0[i].laplacian()));
    }
    out
}

/// Leading orders: `(X^i)⁽⁰⁾`, observer from the `ℓ = 1` solvability
/// condition, `(X⁰)⁽⁰⁾`, and `(X^i)⁽⁻¹⁾`. Second-order fields start at zero.
pub fn solve_leading_embedding(
    data: &HarmonicAsymptotics,
    completion: &ExpansionCompletion,
    phys: &PhysicalExpansion,
) -> Result<EmbeddingExpansion> {
    data.validate()?;
    let grid = completion.u_m2.grid.clone();
    let a = data.mass;
    // σ = u⁴r²σ̃ gives σ⁽¹⁾ = 4A σ̃ and σ⁽⁰⁾ = (6A² + 4u⁽⁻²⁾) σ̃.
    let sigma_1 = grid.constant(4.0 * a);
    let xi_0 = conformal_isometric(&sigma_1);
    let h0_m2 = reference_h_m2(&xi_0, &sigma_1);

    let observer = if data.is_flat() {
        Observer::REST
    } else {
        // ℓ = 1 part of the source is 3 κ (a/a⁰)·X̃ + div α⁽⁻¹⁾ with κ = h₀⁽⁻²⁾ - h⁽⁻²⁾.
        let kappa = h0_m2.sub(&phys.h_m2).integral() / (4.0 * std::f64::consts::PI);
        let w = l1_moments(&phys.alpha_m1.divergence()).map(|m| m * 3.0 / (4.0 * std::f64::consts::PI));
        Observer::from_velocity(w.map(|wk| -wk / (3.0 * kappa)))?
    };
    let lin = linearized_optimal(phys, &h0_m2, &observer);
    let obstruction = lin.obstruction.sup_norm();
    if obstruction > OBSTRUCTION_TOL {
        return Err(Error::Consistency(obstruction));
    }
    let x0_0 = lin.x0_0;

    // Isometric equation at O(1): the right side is conformal once (X⁰)⁽⁰⁾ = 0
    // and (X^i)⁽⁰⁾ = 2A X̃^i, leaving (4u⁽⁻²⁾ + 2A²) σ̃.
    if x0_0.sup_norm() > OBSTRUCTION_TOL {
        return Err(Error::Consistency(x0_0.sup_norm()));
    }
    let sigma_0 = completion.u_m2.scale(4.0).map(|v| v + 6.0 * a * a);
    let xi_m1 = conformal_isometric(&sigma_0.map(|v| v - 4.0 * a * a));
    let coords = grid.coordinates();
    Ok(EmbeddingExpansion {
        mass: a,
        xi_1: coords.x,
        xi_0,
        xi_m1,
        x0_0,
        x0_m1: grid.constant(0.0),
        observer,
        a_m1: [0.0; 3],
    })
}

/// `|H₀|` and `α_{H₀}` coefficients of the reference surface.
#[derive(Clone, Debug)]
pub struct ReferenceExpansion {
    pub h0_m2: SphereScalar,
    pub h0_m3: SphereScalar,
    pub alpha0_m2: SphereOneForm,
}

impl ReferenceExpansion {
    /// `h₀⁽⁻²⁾ = -4A`, `h₀⁽⁻³⁾ = -2Δ̃u⁽⁻²⁾ - 4u⁽⁻²⁾ + 6A²`,
    /// `α₀⁽⁻²⁾ = ∂((X⁰)⁽⁻¹⁾ + ½Δ̃(X⁰)⁽⁻¹⁾)`.
    pub fn closed_form(emb: &EmbeddingExpansion, completion: &ExpansionCompletion) -> ReferenceExpansion {
        let a = emb.mass;
        let u2 = &completion.u_m2;
        let grid = emb.grid();
        ReferenceExpansion {
            h0_m2: grid.constant(-4.0 * a),
            h0_m3: u2.laplacian().scale(-2.0).sub(&u2.scale(4.0)).map(|v| v + 6.0 * a * a),
            alpha0_m2: emb.x0_m1.add(&emb.x0_m1.laplacian().scale(0.5)).gradient(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RhoJ {
    pub rho_m2: SphereScalar,
    pub rho_m3: SphereScalar,
    pub j_m1: SphereOneForm,
    pub j_m2: SphereOneForm,
}

/// Expand `ρ` and `j` through `r⁻³` and `r⁻²`:
///
/// ```text
/// ρ⁽⁻²⁾ = (h₀⁽⁻²⁾ - h⁽⁻²⁾)/a⁰
/// a⁰³ρ⁽⁻³⁾ = a⁰²(h₀⁽⁻³⁾ - h⁽⁻³⁾) - 4A²(a·X̃)² - 4A a·a⁽⁻¹⁾
/// j⁽⁻¹⁾ = -(3/2)ρ⁽⁻²⁾ ∂(a·X̃) + α_H⁽⁻¹⁾
/// j⁽⁻²⁾ = -(ρ⁽⁻²⁾(2A a + a⁽⁻¹⁾) + ρ⁽⁻³⁾ a)·∂X̃
///         - ∂(½ρ⁽⁻²⁾ a⁽⁻¹⁾·X̃ + 2Aρ⁽⁻²⁾ a·X̃ + ½ρ⁽⁻³⁾ a·X̃) - α₀⁽⁻²⁾ + α_H⁽⁻²⁾
/// ```
pub fn rho_j(phys: &PhysicalExpansion, reference: &ReferenceExpansion, emb: &EmbeddingExpansion) -> RhoJ {
    let grid = emb.grid();
    let big_a = emb.mass;
    let Observer { a0, a } = emb.observer;
    let am1 = emb.a_m1;
    let rho2 = reference.h0_m2.sub(&phys.h_m2).scale(1.0 / a0);
    let a_dot_x = grid.from_fn(|n| dot(a, n));
    let am1_dot_x = grid.from_fn(|n| dot(am1, n));
    let rho3 = reference
        .h0_m3
        .sub(&phys.h_m3)
        .scale(a0 * a0)
        .sub(&a_dot_x.mul(&a_dot_x).scale(4.0 * big_a * big_a))
        .map(|v| (v - 4.0 * big_a * dot(a, am1)) / (a0 * a0 * a0));

    let j1 = a_dot_x.gradient().times(&rho2).scale(-1.5).add(&phys.alpha_m1);

    // ρ⁽⁻²⁾ is constant for every admissible input, but keep it a field.
    let mut lin = SphereOneForm::zero(grid);
    for i in 0..3 {
        let coeff = rho2.scale(2.0 * big_a * a[i] + am1[i]).add(&rho3.scale(a[i]));
        let mut e = [0.0; 3];
        e[i] = 1.0;
        lin = lin.add(&grid.gradient_of_linear(e).times(&coeff));
    }
    let potential = rho2
        .mul(&am1_dot_x)
        .scale(0.5)
        .add(&rho2.mul(&a_dot_x).scale(2.0 * big_a))
        .add(&rho3.mul(&a_dot_x).scale(0.5));
    let j2 = lin
        .scale(-1.0)
        .sub(&potential.gradient())
        .sub(&reference.alpha0_m2)
        .add(&phys.alpha_m2);
    RhoJ { rho_m2: rho2, rho_m3: rho3, j_m1: j1, j_m2: j2 }
}

/// Fix `a⁽⁻¹⁾` and `(X⁰)⁽⁻¹⁾` from `div j⁽⁻²⁾ = 0`.
pub fn solve_second_order(
    emb: &EmbeddingExpansion,
    phys: &PhysicalExpansion,
    completion: &ExpansionCompletion,
) -> Result<EmbeddingExpansion> {
    let grid = emb.grid().clone();
    let base = emb.with_second_order(grid.constant(0.0), [0.0; 3]);
    let div_j2 = |e: &EmbeddingExpansion| -> SphereScalar {
        let reference = ReferenceExpansion::closed_form(e, completion);
        rho_j(phys, &reference, e).j_m2.divergence()
    };
    let d0 = div_j2(&base);
    let m0 = l1_moments(&d0);
    // The ℓ = 1 moments are affine in a⁽⁻¹⁾; read off the linear part column by column.
    let mut columns = Matrix3::zeros();
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let mk = l1_moments(&div_j2(&base.with_second_order(grid.constant(0.0), e)));
        for i in 0..3 {
            columns[(i, k)] = mk[i] - m0[i];
        }
    }
    let rhs = -Vector3::new(m0[0], m0[1], m0[2]);
    let a_m1 = if rhs.norm() == 0.0 {
        [0.0; 3]
    } else {
        let sol = columns
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Consistency(f64::INFINITY))?;
        [sol[0], sol[1], sol[2]]
    };
    let with_a = base.with_second_order(grid.constant(0.0), a_m1);
    let d = div_j2(&with_a);
    let solved = solve_operator(SphereOperator::LaplacianTimesShifted(2.0), &d.scale(2.0));
    let leftover = solved.obstruction.sup_norm();
    if leftover > OBSTRUCTION_TOL {
        return Err(Error::Consistency(leftover));
    }
    Ok(base.with_second_order(solved.solution, a_m1))
}

/// The whole expansion from the data, with closed-form surface coefficients.
pub fn optimal_expansion(
    data: &HarmonicAsymptotics,
    completion: &ExpansionCompletion,
) -> Result<(EmbeddingExpansion, PhysicalExpansion)> {
    let grid = completion.u_m2.grid.clone();
    let phys = PhysicalExpansion::closed_form(data, &grid);
    let lead = solve_leading_embedding(data, completion, &phys)?;
    let emb = solve_second_order(&lead, &phys, completion)?;
    Ok((emb, phys))
}

/// Reduced form of `a⁰³ρ⁽⁻³⁾`:
/// `a⁰²(-(19/16)|B|² + (9/16)g² + 12c·X̃ - 12A²) - 4A²(a·X̃)² - 4A a·a⁽⁻¹⁾`, divided by `a⁰³`.
pub fn rho_m3_reduced(data: &HarmonicAsymptotics, emb: &EmbeddingExpansion) -> SphereScalar {
    let Observer { a0, a } = emb.observer;
    let big_a = data.mass;
    let b2 = data.b_squared();
    emb.grid().from_fn(|n| {
        let g = dot(data.momentum, n);
        let ax = dot(a, n);
        let inner = -19.0 / 16.0 * b2 + 9.0 / 16.0 * g * g + 12.0 * dot(data.center, n) - 12.0 * big_a * big_a;
        (a0 * a0 * inner - 4.0 * big_a * big_a * ax * ax - 4.0 * big_a * dot(a, emb.a_m1)) / (a0 * a0 * a0)
    })
}

/// Reduced form of `j⁽⁻²⁾` with the numbered rational coefficients, valid once
/// `a/a⁰ = B/(4A)`.
pub fn j_m2_reduced(
    data: &HarmonicAsymptotics,
    emb: &EmbeddingExpansion,
    phys: &PhysicalExpansion,
    reference: &ReferenceExpansion,
) -> SphereOneForm {
    let grid = emb.grid();
    let big_a = data.mass;
    let a0 = emb.observer.a0;
    let b = data.momentum;
    let am1 = emb.a_m1;
    let dg = grid.gradient_of_linear(b);
    let g = grid.from_fn(|n| dot(b, n));
    let cx = grid.from_fn(|n| dot(data.center, n));
    let scalar_coeff = g
        .mul(&g)
        .scale(-25.0 / (128.0 * big_a))
        .sub(&cx.scale(4.5 / big_a))
        .map(|v| {
            v + 0.5 * big_a + 57.0 / (128.0 * big_a) * data.b_squared()
                + 3.0 / (8.0 * big_a * a0) * dot(b, am1)
        });
    dg.times(&scalar_coeff)
        .sub(&grid.gradient_of_linear(am1).scale(6.0 * big_a / a0))
        .sub(&grid.gradient_of_linear(data.center).times(&g).scale(1.5 / big_a))
        .sub(&reference.alpha0_m2)
        .add(&phys.alpha_m2)
}
