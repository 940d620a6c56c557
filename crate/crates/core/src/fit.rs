//! Least-squares fits in powers of `r`, shared by series extraction and limit
//! extrapolation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest condition number accepted for a (column-scaled) Vandermonde system.
pub const MAX_CONDITION: f64 = 1e12;

/// Fitted coefficients of `Σ_n c_n r^n` for many columns sharing one radius ladder.
#[derive(Clone, Debug)]
pub struct PowerFit {
    pub orders: Vec<i32>,
    /// `coeffs[o][col]` multiplies `r^{orders[o]}`.
    pub coeffs: Vec<Vec<f64>>,
    /// Largest absolute misfit over every column and radius.
    pub residual: f64,
    pub condition: f64,
}

pub fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Validation("radii must be positive and finite".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("radii must be strictly increasing".into()));
    }
    Ok(())
}

/// Fit each column of `samples` (one row per radius) against `{r^n : n ∈ orders}`.
pub fn fit_powers(radii: &[f64], orders: &[i32], samples: &[Vec<f64>]) -> Result<PowerFit> {
    check_radii(radii)?;
    let m = radii.len();
    let k = orders.len();
    if k == 0 || m < k + 1 {
        return Err(Error::Validation(format!(
            "need at least {} radii for {} orders, got {m}",
            k + 1,
            k
        )));
    }
    if samples.len() != m {
        return Err(Error::Validation(format!("{} sample rows for {m} radii", samples.len())));
    }
    let width = samples[0].len();
    if samples.iter().any(|s| s.len() != width) {
        return Err(Error::Validation("sample rows differ in length".into()));
    }
    let mut sorted = orders.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != k {
        return Err(Error::Validation("repeated order".into()));
    }

    // Work in t = r / r₀ and normalise columns so the condition number
    // reflects the radius spacing rather than the units.
    let r0 = radii[0];
    let mut design = DMatrix::from_fn(m, k, |s, o| (radii[s] / r0).powi(orders[o]));
    let mut col_scale = vec![0.0; k];
    for o in 0..k {
        let norm = design.column(o).norm();
        col_scale[o] = norm;
        design.column_mut(o).scale_mut(1.0 / norm);
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let pinv = svd
        .pseudo_inverse(0.0)
        .map_err(|e| Error::Validation(format!("pseudo-inverse failed: {e}")))?;

    let rhs = DMatrix::from_fn(m, width, |s, c| samples[s][c]);
    let sol = &pinv * &rhs;
    let fitted = &design * &sol;
    let residual = (fitted - &rhs).abs().max();

    let coeffs = (0..k)
        .map(|o| {
            let unscale = 1.0 / (col_scale[o] * r0.powi(orders[o]));
            (0..width).map(|c| sol[(o, c)] * unscale).collect()
        })
        .collect();
    Ok(PowerFit { orders: orders.to_vec(), coeffs, residual, condition })
}

impl PowerFit {
    pub fn coefficient(&self, order: i32) -> Option<&[f64]> {
        self.orders.iter().position(|&n| n == order).map(|i| self.coeffs[i].as_slice())
    }

    /// Re-sum the series for one column at radius `r`.
    pub fn evaluate(&self, col: usize, r: f64) -> f64 {
        self.orders.iter().zip(&self.coeffs).map(|(&n, c)| c[col] * r.powi(n)).sum()
    }
}

/// The `r → ∞` limit of a sequence together with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limit {
    pub value: f64,
    pub error: f64,
}

/// Polynomial in `1/r` of degree `m - 2`; the error estimate is the change in
/// the constant term when the degree is lowered by one.
pub fn extrapolate(radii: &[f64], values: &[f64]) -> Result<Limit> {
    extrapolate_many(radii, &values.iter().map(|v| vec![*v]).collect::<Vec<_>>()).map(|v| v[0])
}

/// Column-wise [`extrapolate`] for `rows[s][q]` = quantity `q` at radius `s`.
pub fn extrapolate_many(radii: &[f64], rows: &[Vec<f64>]) -> Result<Vec<Limit>> {
    let m = radii.len();
    if m < 3 {
        return Err(Error::Validation(format!("extrapolation needs at least 3 radii, got {m}")));
    }
    let full: Vec<i32> = (0..=(m as i32 - 2)).map(|n| -n).collect();
    let reduced = &full[..full.len() - 1];
    let hi = fit_powers(radii, &full, rows)?;
    let lo = fit_powers(radii, reduced, rows)?;
    let a = hi.coefficient(0).expect("order 0 present");
    let b = lo.coefficient(0).expect("order 0 present");
    Ok(a.iter().zip(b).map(|(x, y)| Limit { value: *x, error: (x - y).abs() }).collect())
}

/// Weights `w_s` with `limit = Σ_s w_s f(r_s)`.
pub fn extrapolation_weights(radii: &[f64]) -> Result<Vec<f64>> {
    let m = radii.len();
    let rows: Vec<Vec<f64>> = (0..m).map(|s| (0..m).map(|q| if q == s { 1.0 } else { 0.0 }).collect()).collect();
    Ok(extrapolate_many(radii, &rows)?.iter().map(|l| l.value).collect())
}

/// `Σ_s |w_s| δ_s`: the worst-case effect on the limit of per-sample noise `δ_s`.
pub fn propagated_noise(radii: &[f64], noise: &[f64]) -> Result<f64> {
    Ok(extrapolation_weights(radii)?.iter().zip(noise).map(|(w, d)| w.abs() * d).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_reproduce_the_limit() {
        let radii = [50.0, 100.0, 200.0, 400.0, 800.0];
        let values = radii.map(|r| 1.5 + 4.0 / r - 9.0 / (r * r));
        let w = extrapolation_weights(&radii).unwrap();
        let via_weights: f64 = w.iter().zip(&values).map(|(a, b)| a * b).sum();
        assert!((via_weights - extrapolate(&radii, &values).unwrap().value).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_exact_polynomial() {
        let radii = [50.0, 100.0, 200.0, 400.0, 800.0];
        let f = |r: f64| 3.0 - 2.0 / r + 7.0 / (r * r) + 11.0 / r.powi(3);
        let lim = extrapolate(&radii, &radii.map(f)).unwrap();
        assert!((lim.value - 3.0).abs() < 1e-12, "{lim:?}");
    }

    #[test]
    fn series_coefficients_and_residual() {
        let radii = [10.0_f64, 20.0, 40.0, 80.0, 160.0];
        let rows: Vec<Vec<f64>> =
            radii.iter().map(|&r| vec![2.0 / r - 8.0 / (r * r), 1.0 / r.powi(3)]).collect();
        let fit = fit_powers(&radii, &[-1, -2, -3], &rows).unwrap();
        assert!((fit.coefficient(-1).unwrap()[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficient(-2).unwrap()[0] + 8.0).abs() < 1e-8);
        assert!((fit.coefficient(-3).unwrap()[1] - 1.0).abs() < 1e-8);
        assert!(fit.residual < 1e-14);
    }

    #[test]
    fn rejects_bad_ladders() {
        assert!(matches!(extrapolate(&[1.0, 1.0, 2.0], &[0.0; 3]), Err(Error::Validation(_))));
        assert!(matches!(extrapolate(&[1.0, 2.0], &[0.0; 2]), Err(Error::Validation(_))));
        let close = [1000.0, 1000.001, 1000.002, 1000.003, 1000.004];
        assert!(matches!(extrapolate(&close, &[0.0; 5]), Err(Error::IllConditioned(_))));
    }
}
