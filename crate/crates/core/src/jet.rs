//! Second-order forward-mode jets in three variables.
//!
//! A [`Jet`] carries a value, its gradient and its Hessian with respect to the
//! Cartesian coordinates of R³. Arithmetic propagates all three exactly, which
//! is how the data fields get their analytic derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

impl Jet {
    pub const fn constant(v: f64) -> Jet {
        Jet { v, g: [0.0; 3], h: [[0.0; 3]; 3] }
    }

    /// The coordinate function `x^i` at the point `x`.
    pub fn coordinate(x: [f64; 3], i: usize) -> Jet {
        let mut g = [0.0; 3];
        g[i] = 1.0;
        Jet { v: x[i], g, h: [[0.0; 3]; 3] }
    }

    pub fn coordinates(x: [f64; 3]) -> [Jet; 3] {
        [0, 1, 2].map(|i| Jet::coordinate(x, i))
    }

    /// Apply a scalar function given its value and first two derivatives.
    pub fn chain(self, f: f64, df: f64, d2f: f64) -> Jet {
        let mut out = Jet::constant(f);
        for i in 0..3 {
            out.g[i] = df * self.g[i];
            for j in i..3 {
                out.h[i][j] = df * self.h[i][j] + d2f * self.g[i] * self.g[j];
                out.h[j][i] = out.h[i][j];
            }
        }
        out
    }

    pub fn sqrt(self) -> Jet {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn recip(self) -> Jet {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(self, n: i32) -> Jet {
        let v = self.v;
        let nf = n as f64;
        self.chain(v.powi(n), nf * v.powi(n - 1), nf * (nf - 1.0) * v.powi(n - 2))
    }

    pub fn laplacian(&self) -> f64 {
        self.h[0][0] + self.h[1][1] + self.h[2][2]
    }

    /// First-order jet of `∂_i` of this jet (value and gradient only).
    pub fn partial(&self, i: usize) -> Jet1 {
        Jet1 { v: self.g[i], g: self.h[i] }
    }

    pub fn first_order(&self) -> Jet1 {
        Jet1 { v: self.v, g: self.g }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut r = self;
        r.v += o.v;
        for i in 0..3 {
            r.g[i] += o.g[i];
            for j in 0..3 {
                r.h[i][j] += o.h[i][j];
            }
        }
        r
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut r = Jet::constant(self.v * o.v);
        for i in 0..3 {
            r.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for j in i..3 {
                r.h[i][j] = self.h[i][j] * o.v
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i]
                    + self.v * o.h[i][j];
                r.h[j][i] = r.h[i][j];
            }
        }
        r
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.v -= c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, c: f64) -> Jet {
        self.v *= c;
        for i in 0..3 {
            self.g[i] *= c;
            for j in 0..3 {
                self.h[i][j] *= c;
            }
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self * (1.0 / c)
    }
}

/// Value plus gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    pub g: [f64; 3],
}

impl Jet1 {
    pub const fn constant(v: f64) -> Jet1 {
        Jet1 { v, g: [0.0; 3] }
    }

    pub fn chain(self, f: f64, df: f64) -> Jet1 {
        Jet1 { v: f, g: self.g.map(|x| df * x) }
    }

    pub fn sqrt(self) -> Jet1 {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }

    pub fn recip(self) -> Jet1 {
        self.chain(1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn powi(self, n: i32) -> Jet1 {
        self.chain(self.v.powi(n), n as f64 * self.v.powi(n - 1))
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(self, o: Jet1) -> Jet1 {
        Jet1 { v: self.v + o.v, g: [0, 1, 2].map(|i| self.g[i] + o.g[i]) }
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(self, o: Jet1) -> Jet1 {
        Jet1 { v: self.v - o.v, g: [0, 1, 2].map(|i| self.g[i] - o.g[i]) }
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, o: Jet1) -> Jet1 {
        Jet1 { v: self.v * o.v, g: [0, 1, 2].map(|i| self.g[i] * o.v + self.v * o.g[i]) }
    }
}

impl Div for Jet1 {
    type Output = Jet1;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet1) -> Jet1 {
        self * o.recip()
    }
}

impl Mul<f64> for Jet1 {
    type Output = Jet1;
    fn mul(self, c: f64) -> Jet1 {
        Jet1 { v: self.v * c, g: self.g.map(|x| x * c) }
    }
}

impl Add<f64> for Jet1 {
    type Output = Jet1;
    fn add(mut self, c: f64) -> Jet1 {
        self.v += c;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(x: [Jet; 3]) -> Jet {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        (x[0] * x[1] + 2.0_f64.into_jet()) / r.powi(3) + x[2].recip() * 0.5
    }

    trait IntoJet {
        fn into_jet(self) -> Jet;
    }
    impl IntoJet for f64 {
        fn into_jet(self) -> Jet {
            Jet::constant(self)
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = [0.7, -1.3, 2.1];
        let j = f(Jet::coordinates(p));
        let val = |q: [f64; 3]| f(Jet::coordinates(q)).v;
        let h = 1e-4;
        for i in 0..3 {
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (val(a) - val(b)) / (2.0 * h);
            assert!((fd - j.g[i]).abs() < 1e-7, "grad {i}");
            for k in 0..3 {
                let ga = f(Jet::coordinates(a)).g[k];
                let gb = f(Jet::coordinates(b)).g[k];
                let fd2 = (ga - gb) / (2.0 * h);
                assert!((fd2 - j.h[i][k]).abs() < 1e-6, "hess {i}{k}");
            }
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let j = f(Jet::coordinates([1.1, 0.4, -0.9]));
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(j.h[i][k], j.h[k][i]);
            }
        }
    }
}
