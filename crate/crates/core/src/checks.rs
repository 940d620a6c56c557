//! Named closed-form versus numeric checks. Each check carries its measured
//! value and the bound it must satisfy; the CLI and the acceptance suite both
//! run from this registry.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::conserved::{
    adm_closed_form, adm_quantities, cwy_closed_form, cwy_numeric, AdmValues, CwyValues, Extrapolated, ReducedIntegrals,
};
use crate::embedding::{
    conformal_isometric, isometric_defect, j_m2_reduced, linearized_optimal, optimal_expansion, reference_h_m2, rho_j,
    rho_m3_reduced, EmbeddingExpansion, ReferenceExpansion,
};
use crate::error::Result;
use crate::initial_data::{complete_expansion, completion_residuals, constraint_residual, decay_exponent, HarmonicAsymptotics};
use crate::lorentz::{boost_from_observer, Observer};
use crate::reference::{optimal_fields, optimal_residual, quasi_local_energy, reference_geometry};
use crate::sphere::{mode_index, solve_shifted_laplacian, SphereGrid, SphereOneForm};
use crate::surface::{alpha_m2_unreduced, extract_series, surface_data, PhysicalExpansion, SurfaceData};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Check {
        Check { name: name.into(), value, bound: Bound::AtMost(tol) }
    }

    pub fn at_least(name: impl Into<String>, value: f64, min: f64) -> Check {
        Check { name: name.into(), value, bound: Bound::AtLeast(min) }
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost(t) => self.value <= t,
            Bound::AtLeast(m) => self.value >= m,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let bound = match self.bound {
            Bound::AtMost(t) => format!("<= {t:.1e}"),
            Bound::AtLeast(m) => format!(">= {m}"),
        };
        write!(f, "{status} {} value={:.6e} bound {bound}", self.name, self.value)
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(Check::passed)
}

/// Tolerance for spectrally exact identities.
pub const QUADRATURE_TOL: f64 = 1e-8;
/// Tolerance for extrapolated limits.
pub const LIMIT_TOL: f64 = 1e-6;

/// Radii for coefficient fits: geometric with ratio 2 from 100.
pub fn series_radii() -> Vec<f64> {
    (0..8).map(|k| 100.0 * 2f64.powi(k)).collect()
}

/// Radii for the constraint decay exponents.
pub const CONSTRAINT_RADII: (f64, f64) = (100.0, 200.0);

/// A random admissible data set: `A ∈ [0.25, 1]`, `|B| ≤ 2A`, and every
/// component of `c` and `d` in `[-1, 1]`.
pub fn draw_data(rng: &mut impl Rng) -> HarmonicAsymptotics {
    let mass = rng.gen_range(0.25..=1.0);
    let ball = loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            break v;
        }
    };
    let momentum = ball.map(|x| 2.0 * mass * x);
    let center = [0; 3].map(|_| rng.gen_range(-1.0..=1.0));
    let angular = [[0; 3]; 3].map(|row| row.map(|_| rng.gen_range(-1.0..=1.0)));
    HarmonicAsymptotics { mass, momentum, center, angular }
}

fn one_form_sup(w: &SphereOneForm) -> f64 {
    w.dot(w).values.iter().fold(0.0_f64, |m, v| m.max(v.sqrt()))
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `max |Δ| / max(1, ‖exact‖)` over the four ADM groups.
pub fn adm_relative_error(numeric: &AdmValues, exact: &AdmValues) -> f64 {
    let rel = |a: &[f64], b: &[f64]| max_abs(a, b) / norm(b).max(1.0);
    rel(&[numeric.e], &[exact.e])
        .max(rel(&numeric.p, &exact.p))
        .max(rel(&numeric.c, &exact.c))
        .max(rel(&numeric.j, &exact.j))
}

/// `∫ x^a y^b z^c dS = 4π (a-1)!!(b-1)!!(c-1)!! / (a+b+c+1)!!` for even exponents, else 0.
pub fn monomial_moment(a: u32, b: u32, c: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    let double_factorial = |n: i64| (1..=n).rev().step_by(2).fold(1.0, |p, k| p * k as f64);
    let (a, b, c) = (a as i64, b as i64, c as i64);
    4.0 * PI * double_factorial(a - 1) * double_factorial(b - 1) * double_factorial(c - 1)
        / double_factorial(a + b + c + 1)
}

fn random_coeffs(grid: &Arc<SphereGrid>, rng: &mut impl Rng, max_degree: usize) -> Vec<f64> {
    let mut c = vec![0.0; grid.n_modes()];
    for l in 0..=max_degree {
        for m in -(l as i64)..=(l as i64) {
            c[mode_index(l, m)] = rng.gen_range(-1.0..1.0);
        }
    }
    c
}

/// Quadrature, transform and differential-operator identities.
pub fn spectral(grid: &Arc<SphereGrid>, rng: &mut impl Rng) -> Vec<Check> {
    let tol = 1e-9;
    let l_max = grid.l_max();
    let mut out = Vec::new();
    let weights = grid.integrate_values(&vec![1.0; grid.len()]);
    out.push(Check::at_most("spectral.weights", (weights / (4.0 * PI) - 1.0).abs(), 1e-12));

    let coords = grid.coordinates();
    let unit = (0..grid.len())
        .map(|k| (coords.x.iter().map(|x| x.values[k].powi(2)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    out.push(Check::at_most("spectral.coordinates_unit", unit, 1e-12));
    let eig = coords.x.iter().map(|x| x.laplacian().max_abs_diff(&x.scale(-2.0))).fold(0.0, f64::max);
    out.push(Check::at_most("spectral.coordinates_eigen", eig, 1e-10));

    let mut quad = 0.0_f64;
    let deg = 2 * l_max as u32;
    for a in 0..=deg {
        for b in 0..=(deg - a) {
            for c in 0..=(deg - a - b) {
                let f = grid.from_fn(|n| n[0].powi(a as i32) * n[1].powi(b as i32) * n[2].powi(c as i32));
                quad = quad.max((f.integral() - monomial_moment(a, b, c)).abs() / (4.0 * PI));
            }
        }
    }
    out.push(Check::at_most("spectral.quadrature_exactness", quad, 1e-10));

    let coeffs = random_coeffs(grid, rng, l_max);
    let back = grid.analysis(&grid.synthesis(&coeffs));
    out.push(Check::at_most("spectral.round_trip", max_abs(&back, &coeffs), 1e-12));

    let mut eigen = 0.0_f64;
    for l in 0..=l_max {
        let mut c = vec![0.0; grid.n_modes()];
        for m in -(l as i64)..=(l as i64) {
            c[mode_index(l, m)] = rng.gen_range(-1.0..1.0);
        }
        let f = grid.from_coeffs(&c);
        eigen = eigen.max(f.laplacian().max_abs_diff(&f.scale(-((l * (l + 1)) as f64))) / ((l * (l + 1)) as f64).max(1.0));
    }
    out.push(Check::at_most("spectral.laplacian_eigen", eigen, 1e-10));

    let f = grid.from_coeffs(&coeffs);
    let scale = f.laplacian().sup_norm();
    out.push(Check::at_most(
        "spectral.div_grad",
        f.gradient().divergence().max_abs_diff(&f.laplacian()) / scale,
        tol,
    ));
    let g = grid.from_coeffs(&random_coeffs(grid, rng, l_max / 2));
    let h = grid.from_coeffs(&random_coeffs(grid, rng, l_max / 2));
    let omega = g.gradient().add(&h.gradient().rotate());
    let p = grid.from_coeffs(&random_coeffs(grid, rng, l_max / 2));
    let lhs = p.mul(&omega.divergence()).integral();
    let rhs = -p.gradient().dot(&omega).integral();
    out.push(Check::at_most("spectral.adjointness", (lhs - rhs).abs() / rhs.abs().max(1.0), tol));
    let curl_div = h.gradient().rotate().divergence().sup_norm();
    out.push(Check::at_most("spectral.rotated_gradient_divergence", curl_div, tol));

    let xy = coords.x[0].mul(&coords.x[1]);
    let s1 = solve_shifted_laplacian(2.0, &xy.scale(-4.0));
    let s2 = solve_shifted_laplacian(2.0, &coords.x[0]);
    let s3 = solve_shifted_laplacian(2.0, &grid.constant(0.7));
    let solve = s1
        .solution
        .max_abs_diff(&xy)
        .max(s1.obstruction.sup_norm())
        .max(s2.solution.sup_norm())
        .max(s2.obstruction.max_abs_diff(&coords.x[0]))
        .max(s3.solution.max_abs_diff(&grid.constant(0.35)))
        .max(s3.obstruction.sup_norm());
    out.push(Check::at_most("spectral.shifted_solve", solve, tol));
    out
}

/// Second-order coefficients of `u` and `Y` against the kernel-aware solve.
pub fn harmonic_expansion(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>) -> Result<Vec<Check>> {
    let (_, [ru, ry]) = completion_residuals(data, grid)?;
    Ok(vec![
        Check::at_most("harmonic_expansion.u", ru, 1e-9),
        Check::at_most("harmonic_expansion.y", ry, 1e-9),
    ])
}

/// Residuals below this multiple of the term scale are roundoff.
pub const CONSTRAINT_ROUNDOFF: f64 = 1e-12;

/// Hamiltonian and momentum constraint decay over one doubling. Data that
/// satisfies a constraint exactly (Schwarzschild, flat) leaves only roundoff,
/// whose exponent is meaningless; that case is checked against the term scale.
pub fn constraints(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>) -> Result<Vec<Check>> {
    let (r1, r2) = CONSTRAINT_RADII;
    let a = constraint_residual(data, r1, grid)?;
    let b = constraint_residual(data, r2, grid)?;
    let audit = |name: &str, min: f64, at_r: f64, at_2r: f64, scale_r: f64, scale_2r: f64| {
        let relative = (at_r / scale_r).max(at_2r / scale_2r);
        if scale_r == 0.0 || relative <= CONSTRAINT_ROUNDOFF {
            let relative = if scale_r == 0.0 { at_r.max(at_2r) } else { relative };
            Check::at_most(format!("constraints.{name}_exact"), relative, CONSTRAINT_ROUNDOFF)
        } else {
            Check::at_least(format!("constraints.{name}_decay"), decay_exponent(at_r, at_2r), min)
        }
    };
    Ok(vec![
        audit("hamiltonian", 4.5, a.hamiltonian.sup_norm(), b.hamiltonian.sup_norm(), a.hamiltonian_scale, b.hamiltonian_scale),
        audit("momentum", 3.5, a.momentum_sup(), b.momentum_sup(), a.momentum_scale, b.momentum_scale),
    ])
}

/// Fitted `|H|`, `α_H` coefficients against their closed forms.
pub fn surface_series(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>) -> Result<Vec<Check>> {
    let samples = series_radii()
        .iter()
        .map(|&r| surface_data(data, r, grid))
        .collect::<Result<Vec<SurfaceData>>>()?;
    let orders: Vec<i32> = (1..=7).map(|n| -n).collect();
    let series = extract_series(&samples, &orders)?;
    let fitted = PhysicalExpansion::from_series(&series)?;
    let closed = PhysicalExpansion::closed_form(data, grid);
    let held_out = 300.0;
    let predicted = series.h_norm.evaluate(held_out);
    let actual = surface_data(data, held_out, grid)?.h_norm;
    let misfit = predicted.max_abs_diff(&actual) / series.h_norm.fit_residual.max(f64::MIN_POSITIVE);
    Ok(vec![
        Check::at_most("surface.h_m2_monopole", fitted.h_m2.project_degrees(1..=grid.l_max()).sup_norm(), QUADRATURE_TOL),
        Check::at_most("surface.alpha_m1_exact", fitted.alpha_m1.rotate().divergence().sup_norm(), QUADRATURE_TOL),
        Check::at_most("surface.held_out_over_fit_residual", misfit, 10.0),
        Check::at_most("surface.h_m2", fitted.h_m2.max_abs_diff(&closed.h_m2), 1e-6),
        Check::at_most("surface.h_m3", fitted.h_m3.max_abs_diff(&closed.h_m3), 1e-5),
        Check::at_most("surface.alpha_m1", one_form_sup(&fitted.alpha_m1.sub(&closed.alpha_m1)), 1e-6),
        Check::at_most("surface.alpha_m2", one_form_sup(&fitted.alpha_m2.sub(&closed.alpha_m2)), 1e-5),
        Check::at_most(
            "surface.alpha_m2_reduction",
            one_form_sup(&alpha_m2_unreduced(data, grid).sub(&closed.alpha_m2)),
            1e-10,
        ),
    ])
}

/// Everything the optimal expansion is asserted to satisfy.
pub struct ExpansionContext {
    pub data: HarmonicAsymptotics,
    pub completion: crate::initial_data::ExpansionCompletion,
    pub phys: PhysicalExpansion,
    pub emb: EmbeddingExpansion,
}

impl ExpansionContext {
    pub fn new(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>) -> Result<ExpansionContext> {
        let completion = complete_expansion(data, grid)?;
        let (emb, phys) = optimal_expansion(data, &completion)?;
        Ok(ExpansionContext { data: *data, completion, phys, emb })
    }
}

/// Optimal expansion, reference coefficients, `ρ` and `j`, and the reduced integrals.
pub fn embedding(ctx: &ExpansionContext) -> Vec<Check> {
    let ExpansionContext { data, completion, phys, emb } = ctx;
    let grid = emb.grid();
    let a = data.mass;
    let mut out = Vec::new();
    let velocity = if data.is_flat() { [0.0; 3] } else { data.momentum.map(|b| b / (4.0 * a)) };
    out.push(Check::at_most(
        "optimal_expansion.observer",
        max_abs(&emb.observer.a.map(|x| x / emb.observer.a0), &velocity),
        1e-12,
    ));
    out.push(Check::at_most("optimal_expansion.x0_0", emb.x0_0.sup_norm(), 1e-12));
    out.push(Check::at_most(
        "optimal_expansion.isometric_1",
        isometric_defect(&emb.xi_0, &grid.constant(4.0 * a)),
        1e-9,
    ));
    let sigma_0 = completion.u_m2.scale(4.0).map(|v| v + 2.0 * a * a);
    out.push(Check::at_most("optimal_expansion.isometric_0", isometric_defect(&emb.xi_m1, &sigma_0), 1e-9));

    let reference = ReferenceExpansion::closed_form(emb, completion);
    let numeric_h0 = reference_h_m2(&emb.xi_0, &grid.constant(4.0 * a));
    out.push(Check::at_most("reference.h0_m2", numeric_h0.max_abs_diff(&reference.h0_m2), 1e-10));

    let rj = rho_j(phys, &reference, emb);
    let rho2 = if data.is_flat() { 0.0 } else { 4.0 * a / emb.observer.a0 };
    out.push(Check::at_most("expansion_rho.rho_m2", rj.rho_m2.map(|v| v - rho2).sup_norm(), 1e-10));
    out.push(Check::at_most("expansion_rho.rho_m3", rj.rho_m3.max_abs_diff(&rho_m3_reduced(data, emb)), 1e-10));
    out.push(Check::at_most("j.j_m1", one_form_sup(&rj.j_m1), 1e-9));
    if !data.is_flat() {
        let reduced = j_m2_reduced(data, emb, phys, &reference);
        out.push(Check::at_most("j.j_m2", one_form_sup(&rj.j_m2.sub(&reduced)), 1e-10));
    }
    out.push(Check::at_most("j.div_j_m2", rj.j_m2.divergence().sup_norm(), QUADRATURE_TOL));

    let reduced = ReducedIntegrals::from_expansion(phys, completion, emb);
    let expect = ReducedIntegrals::closed_form(data, &emb.observer);
    out.push(Check::at_most("evaluation_2.rho", max_abs(&reduced.x_rho, &expect.x_rho), QUADRATURE_TOL));
    let q = (0..3)
        .flat_map(|k| (0..3).map(move |l| (k, l)))
        .map(|(k, l)| (reduced.x_dx_j[k][l] - expect.x_dx_j[k][l]).abs())
        .fold(0.0, f64::max);
    out.push(Check::at_most("evaluation_2.j", q, QUADRATURE_TOL));
    out
}

/// `ℓ = 1` obstruction of the linearised optimal equation: zero for the
/// consistent observer, `3(4A a/a⁰ - B)·X̃` otherwise.
pub fn obstruction(ctx: &ExpansionContext, rng: &mut impl Rng) -> Vec<Check> {
    let ExpansionContext { data, phys, emb, .. } = ctx;
    let grid = emb.grid();
    let sigma_1 = grid.constant(4.0 * data.mass);
    let h0 = reference_h_m2(&conformal_isometric(&sigma_1), &sigma_1);
    let at_optimum = linearized_optimal(phys, &h0, &emb.observer).obstruction.sup_norm();
    let mut formula = 0.0_f64;
    for _ in 0..5 {
        let obs = Observer::from_spatial([0; 3].map(|_| rng.gen_range(-1.0..1.0)));
        let lin = linearized_optimal(phys, &h0, &obs);
        let expect = grid.from_fn(|n| {
            (0..3).map(|k| 3.0 * (4.0 * data.mass * obs.a[k] / obs.a0 - data.momentum[k]) * n[k]).sum()
        });
        formula = formula.max(lin.obstruction.max_abs_diff(&expect));
    }
    vec![
        Check::at_most("obstruction.vanishes", at_optimum, 1e-9),
        Check::at_most("obstruction.formula", formula, QUADRATURE_TOL),
    ]
}

/// Numeric and closed-form conserved quantities for one data set.
#[derive(Clone, Debug)]
pub struct ConservedReport {
    pub adm: Extrapolated<AdmValues>,
    pub adm_closed: AdmValues,
    pub cwy: Extrapolated<CwyValues>,
    pub cwy_closed: CwyValues,
    pub reduced: ReducedIntegrals,
    pub observer: Observer,
    /// `E(Σ_r, X, T₀)/8π` per radius, extrapolated, and `a⁰E - a·P`.
    pub energy: Extrapolated<f64>,
    pub energy_closed: f64,
}

pub fn conserved_report(ctx: &ExpansionContext, radii: &[f64]) -> Result<ConservedReport> {
    let ExpansionContext { data, completion, phys, emb } = ctx;
    let grid = emb.grid();
    let adm = adm_quantities(data, radii, grid)?;
    let adm_closed = adm_closed_form(data);
    let boost = boost_from_observer(&emb.observer)?;
    let cwy_closed = cwy_closed_form(data, &emb.observer, &boost)?;
    let cwy = cwy_numeric(data, completion, phys, emb, radii)?;
    let energies = radii
        .iter()
        .map(|&r| {
            let s = surface_data(data, r, grid)?;
            let refs = reference_geometry(emb, &s)?;
            Ok(quasi_local_energy(&s, &refs, &emb.observer_at(r))? / (8.0 * PI))
        })
        .collect::<Result<Vec<f64>>>()?;
    let lim = crate::fit::extrapolate(radii, &energies)?;
    let obs = emb.observer;
    let energy_closed = obs.a0 * adm_closed.e - (0..3).map(|k| obs.a[k] * adm_closed.p[k]).sum::<f64>();
    Ok(ConservedReport {
        adm,
        adm_closed,
        cwy: cwy.numeric,
        cwy_closed,
        reduced: cwy.reduced,
        observer: obs,
        energy: Extrapolated { radii: radii.to_vec(), samples: energies, limit: lim.value, error: lim.error },
        energy_closed,
    })
}

/// Tolerance checks on a conserved-quantity report.
pub fn conserved(report: &ConservedReport) -> Vec<Check> {
    let boost = boost_from_observer(&report.observer).expect("observer from the expansion is normalised");
    vec![
        Check::at_most("adm.relative", adm_relative_error(&report.adm.limit, &report.adm_closed), LIMIT_TOL),
        Check::at_most("thm_final.numeric", report.cwy.limit.max_abs_diff(&report.cwy_closed), LIMIT_TOL),
        Check::at_most("thm_final.reduced", report.reduced.assemble(&boost).max_abs_diff(&report.cwy_closed), QUADRATURE_TOL),
        Check::at_most("energy.limit", (report.energy.limit - report.energy_closed).abs(), LIMIT_TOL),
    ]
}

/// With `B = 0` the CWY quantities equal the ADM angular momentum and BORT
/// center, on both the closed-form and the numeric path.
pub fn vanishing_momentum(data: &HarmonicAsymptotics, grid: &Arc<SphereGrid>, radii: &[f64]) -> Result<Vec<Check>> {
    let rest = HarmonicAsymptotics { momentum: [0.0; 3], ..*data };
    let ctx = ExpansionContext::new(&rest, grid)?;
    let report = conserved_report(&ctx, radii)?;
    let adm = &report.adm_closed;
    let bort = |v: &CwyValues| max_abs(&v.c, &adm.c).max(max_abs(&v.j, &adm.j));
    let boost = boost_from_observer(&report.observer)?;
    Ok(vec![
        Check::at_most("vanishing_momentum.closed_form", bort(&report.cwy_closed), QUADRATURE_TOL),
        Check::at_most("vanishing_momentum.reduced", bort(&report.reduced.assemble(&boost)), QUADRATURE_TOL),
        Check::at_most("vanishing_momentum.numeric", bort(&report.cwy.limit), QUADRATURE_TOL),
        Check::at_most(
            "vanishing_momentum.numeric_adm",
            max_abs(&report.cwy.limit.c, &report.adm.limit.c).max(max_abs(&report.cwy.limit.j, &report.adm.limit.j)),
            QUADRATURE_TOL,
        ),
    ])
}

/// Flat data: `ρ`, `j` and every reported quantity vanish.
pub fn flat(grid: &Arc<SphereGrid>, radii: &[f64]) -> Result<Vec<Check>> {
    let tol = 1e-10;
    let data = HarmonicAsymptotics::flat();
    let ctx = ExpansionContext::new(&data, grid)?;
    let reference = ReferenceExpansion::closed_form(&ctx.emb, &ctx.completion);
    let rj = rho_j(&ctx.phys, &reference, &ctx.emb);
    let expansion = rj
        .rho_m2
        .sup_norm()
        .max(rj.rho_m3.sup_norm())
        .max(one_form_sup(&rj.j_m1))
        .max(one_form_sup(&rj.j_m2));
    let mut fields = 0.0_f64;
    let mut residual = 0.0_f64;
    for &r in radii {
        let s = surface_data(&data, r, grid)?;
        let refs = reference_geometry(&ctx.emb, &s)?;
        let f = optimal_fields(&s, &refs, &Observer::REST)?;
        fields = fields.max(f.rho.sup_norm()).max(one_form_sup(&f.j));
        residual = residual.max(optimal_residual(&s, &refs, &Observer::REST)?.sup_norm());
    }
    let report = conserved_report(&ctx, radii)?;
    let quantity = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut all = quantity(&report.adm.limit.to_vec())
        .max(quantity(&report.adm_closed.to_vec()))
        .max(quantity(&report.cwy.limit.to_vec()))
        .max(quantity(&report.cwy_closed.to_vec()))
        .max(report.energy.limit.abs())
        .max(report.energy.samples.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
    for s in &report.adm.samples {
        all = all.max(quantity(&s.to_vec()));
    }
    for s in &report.cwy.samples {
        all = all.max(quantity(&s.to_vec()));
    }
    Ok(vec![
        Check::at_most("flat.expansion_rho_j", expansion, tol),
        Check::at_most("flat.rho_j", fields, tol),
        Check::at_most("flat.optimal_residual", residual, tol),
        Check::at_most("flat.quantities", all, tol),
    ])
}

/// Changing `a⁽⁻¹⁾` arbitrarily and `(X⁰)⁽⁻¹⁾` inside its `ℓ ≤ 1` freedom
/// moves the extrapolated CWY values by less than their error estimate. An
/// `ℓ = 2` change of `(X⁰)⁽⁻¹⁾` does move them, by the amount the reduced
/// integrals predict.
pub fn perturbation(ctx: &ExpansionContext, radii: &[f64], rng: &mut impl Rng) -> Result<Vec<Check>> {
    let ExpansionContext { data, completion, phys, emb } = ctx;
    let grid = emb.grid();
    let base = cwy_numeric(data, completion, phys, emb, radii)?;
    let mut low = vec![0.0; grid.n_modes()];
    for idx in 0..4 {
        low[idx] = rng.gen_range(-1.0..1.0);
    }
    let a_shift = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
    let moved = emb.with_second_order(
        emb.x0_m1.add(&grid.from_coeffs(&low)),
        [0, 1, 2].map(|i| emb.a_m1[i] + a_shift[i]),
    );
    let after = cwy_numeric(data, completion, phys, &moved, radii)?;
    let b = base.numeric.limit.to_vec();
    let err = base.numeric.error.to_vec();
    let margin = after
        .numeric
        .limit
        .to_vec()
        .iter()
        .zip(&b)
        .zip(&err)
        .map(|((x, y), e)| (x - y).abs() - e)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut quad = vec![0.0; grid.n_modes()];
    for m in -2..=2 {
        quad[mode_index(2, m)] = rng.gen_range(-1.0..1.0);
    }
    let bent = emb.with_second_order(emb.x0_m1.add(&grid.from_coeffs(&quad)), emb.a_m1);
    let shifted = cwy_numeric(data, completion, phys, &bent, radii)?;
    let boost = boost_from_observer(&emb.observer)?;
    let predicted: Vec<f64> = ReducedIntegrals::from_expansion(phys, completion, &bent)
        .assemble(&boost)
        .to_vec()
        .iter()
        .zip(base.reduced.assemble(&boost).to_vec())
        .map(|(x, y)| x - y)
        .collect();
    let observed: Vec<f64> = shifted.numeric.limit.to_vec().iter().zip(&b).map(|(x, y)| x - y).collect();
    Ok(vec![
        Check::at_most("perturbation.within_error_estimate", margin, 0.0),
        Check::at_most("perturbation.l2_shift_predicted", max_abs(&observed, &predicted), LIMIT_TOL),
    ])
}

/// Criteria over seeded random draws: ADM reproduction and CWY consistency.
pub fn draws(grid: &Arc<SphereGrid>, radii: &[f64], count: usize, rng: &mut impl Rng) -> Result<Vec<Check>> {
    let mut adm = 0.0_f64;
    let mut cwy = 0.0_f64;
    for _ in 0..count {
        let data = draw_data(rng);
        let ctx = ExpansionContext::new(&data, grid)?;
        let limit = adm_quantities(&data, radii, grid)?.limit;
        adm = adm.max(adm_relative_error(&limit, &adm_closed_form(&data)));
        let boost = boost_from_observer(&ctx.emb.observer)?;
        let exact = cwy_closed_form(&data, &ctx.emb.observer, &boost)?;
        let numeric = cwy_numeric(&data, &ctx.completion, &ctx.phys, &ctx.emb, radii)?;
        cwy = cwy.max(numeric.numeric.limit.max_abs_diff(&exact));
    }
    Ok(vec![
        Check::at_most("adm.draws", adm, LIMIT_TOL),
        Check::at_most("thm_final.consistency", cwy, LIMIT_TOL),
    ])
}

