//! Points of C^2 and the identification C^2 = R^4.
//!
//! Real coordinates are ordered (x1, y1, x2, y2) with z_j = x_j + i y_j.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

/// A point (or vector) of C^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPoint2 {
    pub z1: Complex64,
    pub z2: Complex64,
}

impl ComplexPoint2 {
    pub const ORIGIN: ComplexPoint2 = ComplexPoint2 {
        z1: Complex64::new(0.0, 0.0),
        z2: Complex64::new(0.0, 0.0),
    };

    pub fn new(z1: Complex64, z2: Complex64) -> Self {
        Self { z1, z2 }
    }

    pub fn from_real(x: [f64; 4]) -> Self {
        Self {
            z1: Complex64::new(x[0], x[1]),
            z2: Complex64::new(x[2], x[3]),
        }
    }

    pub fn to_real(self) -> [f64; 4] {
        [self.z1.re, self.z1.im, self.z2.re, self.z2.im]
    }

    /// Euclidean norm of the underlying R^4 vector.
    pub fn norm(self) -> f64 {
        (self.z1.norm_sqr() + self.z2.norm_sqr()).sqrt()
    }

    pub fn norm_sqr(self) -> f64 {
        self.z1.norm_sqr() + self.z2.norm_sqr()
    }

    pub fn dist(self, other: ComplexPoint2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.z1.re.is_finite()
            && self.z1.im.is_finite()
            && self.z2.re.is_finite()
            && self.z2.im.is_finite()
    }

    pub fn component(self, j: usize) -> Complex64 {
        match j {
            0 => self.z1,
            1 => self.z2,
            _ => panic!("component index out of range"),
        }
    }
}

impl Add for ComplexPoint2 {
    type Output = ComplexPoint2;
    fn add(self, rhs: ComplexPoint2) -> ComplexPoint2 {
        ComplexPoint2::new(self.z1 + rhs.z1, self.z2 + rhs.z2)
    }
}

impl Sub for ComplexPoint2 {
    type Output = ComplexPoint2;
    fn sub(self, rhs: ComplexPoint2) -> ComplexPoint2 {
        ComplexPoint2::new(self.z1 - rhs.z1, self.z2 - rhs.z2)
    }
}

impl Neg for ComplexPoint2 {
    type Output = ComplexPoint2;
    fn neg(self) -> ComplexPoint2 {
        ComplexPoint2::new(-self.z1, -self.z2)
    }
}

impl Mul<f64> for ComplexPoint2 {
    type Output = ComplexPoint2;
    fn mul(self, s: f64) -> ComplexPoint2 {
        ComplexPoint2::new(self.z1 * s, self.z2 * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_round_trip() {
        let p = ComplexPoint2::from_real([1.0, -2.0, 0.5, 3.25]);
        assert_eq!(p.to_real(), [1.0, -2.0, 0.5, 3.25]);
        assert!((p.norm_sqr() - (1.0 + 4.0 + 0.25 + 10.5625)).abs() < 1e-15);
    }
}
