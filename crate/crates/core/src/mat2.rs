//! Minimal complex 2x2 matrix algebra, enough for spin-1/2 operators.
//!
//! Basis order everywhere is (|+1/2>, |-1/2>).

use num_complex::Complex64 as C64;
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[C64::new(0.0, 0.0); 2]; 2]);

    pub fn identity() -> Self {
        Mat2::diag(1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[C64::new(a, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(b, 0.0)]])
    }

    /// S_z = diag(1/2, -1/2).
    pub fn s_z() -> Self {
        Mat2::diag(0.5, -0.5)
    }

    /// S_+ = |+1/2><-1/2|.
    pub fn s_plus() -> Self {
        let mut m = Mat2::ZERO;
        m.0[0][1] = C64::new(1.0, 0.0);
        m
    }

    /// S_- = |-1/2><+1/2|.
    pub fn s_minus() -> Self {
        Mat2::s_plus().dagger()
    }

    pub fn dagger(&self) -> Self {
        let a = &self.0;
        Mat2([[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]])
    }

    pub fn scale(&self, s: C64) -> Self {
        let a = &self.0;
        Mat2([[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn commutator(&self, other: &Mat2) -> Mat2 {
        *self * *other - *other * *self
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        m
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let row = |r: &[C64; 2]| [r[0] * b[0][0] + r[1] * b[1][0], r[0] * b[0][1] + r[1] * b[1][1]];
        Mat2([row(&a[0]), row(&a[1])])
    }
}
