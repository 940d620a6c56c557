//! Minkowski space `R^{3,1}` with `η = diag(-1, 1, 1, 1)`.

use crate::error::{Error, Result};

pub type Vec4 = [f64; 4];

pub fn minkowski(a: &Vec4, b: &Vec4) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// A future timelike unit vector `(a⁰, a)` with `(a⁰)² - |a|² = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observer {
    pub a0: f64,
    pub a: [f64; 3],
}

impl Observer {
    pub const REST: Observer = Observer { a0: 1.0, a: [0.0; 3] };

    /// Unit observer with spatial part `a`.
    pub fn from_spatial(a: [f64; 3]) -> Observer {
        let a0 = (1.0 + a.iter().map(|v| v * v).sum::<f64>()).sqrt();
        Observer { a0, a }
    }

    /// Observer moving with velocity `v = a / a⁰`, `|v| < 1`.
    pub fn from_velocity(v: [f64; 3]) -> Result<Observer> {
        let v2: f64 = v.iter().map(|x| x * x).sum();
        if !(v2 < 1.0) {
            return Err(Error::NoTimelikeObserver(v2.sqrt()));
        }
        let a0 = 1.0 / (1.0 - v2).sqrt();
        Ok(Observer { a0, a: v.map(|x| a0 * x) })
    }

    pub fn as_vec4(&self) -> Vec4 {
        [self.a0, self.a[0], self.a[1], self.a[2]]
    }

    /// `(a⁰)² - |a|² - 1`.
    pub fn normalization_defect(&self) -> f64 {
        self.a0 * self.a0 - self.a.iter().map(|v| v * v).sum::<f64>() - 1.0
    }
}

/// Lorentz transformation taking `∂₀` to the observer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostMatrix {
    pub entries: [[f64; 4]; 4],
}

/// The canonical (rotation-free) boost:
/// `A₀₀ = a⁰`, `A₀ⱼ = Aⱼ₀ = aⱼ`, `A_kl = δ_kl + a_k a_l / (1 + a⁰)`.
pub fn boost_from_observer(obs: &Observer) -> Result<BoostMatrix> {
    let defect = obs.normalization_defect();
    if !(obs.a0 >= 1.0 && defect.abs() <= 1e-10 * obs.a0 * obs.a0) {
        return Err(Error::Validation(format!(
            "observer ({}, {:?}) is not a future unit vector",
            obs.a0, obs.a
        )));
    }
    let mut m = [[0.0; 4]; 4];
    m[0][0] = obs.a0;
    for j in 0..3 {
        m[0][j + 1] = obs.a[j];
        m[j + 1][0] = obs.a[j];
        for l in 0..3 {
            m[j + 1][l + 1] = if j == l { 1.0 } else { 0.0 } + obs.a[j] * obs.a[l] / (1.0 + obs.a0);
        }
    }
    Ok(BoostMatrix { entries: m })
}

impl BoostMatrix {
    pub const IDENTITY: BoostMatrix = BoostMatrix {
        entries: [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
    };

    pub fn apply(&self, x: &Vec4) -> Vec4 {
        let m = &self.entries;
        [0, 1, 2, 3].map(|i| (0..4).map(|j| m[i][j] * x[j]).sum())
    }

    /// `η Aᵀ η`.
    pub fn inverse(&self) -> BoostMatrix {
        let sign = |i: usize| if i == 0 { -1.0 } else { 1.0 };
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = sign(i) * self.entries[j][i] * sign(j);
            }
        }
        BoostMatrix { entries: out }
    }

    pub fn compose(&self, other: &BoostMatrix) -> BoostMatrix {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| self.entries[i][k] * other.entries[k][j]).sum();
            }
        }
        BoostMatrix { entries: out }
    }

    /// `max |Aᵀ η A - η|`.
    pub fn eta_defect(&self) -> f64 {
        let m = &self.entries;
        let eta = |i: usize| if i == 0 { -1.0 } else { 1.0 };
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                let v: f64 = (0..4).map(|k| m[k][i] * eta(k) * m[k][j]).sum();
                let target = if i == j { eta(i) } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}
