//! Small dense d x d matrices (d <= 3) stored row-major on the stack.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    d: usize,
    a: [f64; 9],
}

impl Mat {
    pub fn zeros(d: usize) -> Self {
        assert!((1..=3).contains(&d), "matrix dimension must be 1..=3");
        Mat { d, a: [0.0; 9] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Mat::zeros(d);
        for i in 0..d {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_slice(d: usize, s: &[f64]) -> Self {
        assert_eq!(s.len(), d * d, "slice length must be d*d");
        let mut m = Mat::zeros(d);
        m.a[..d * d].copy_from_slice(s);
        m
    }

    /// `a ⊗ n`.
    pub fn outer(a: &[f64], n: &[f64]) -> Self {
        assert_eq!(a.len(), n.len());
        let d = a.len();
        let mut m = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.set(i, j, a[i] * n[j]);
            }
        }
        m
    }

    pub fn scalar_multiple(d: usize, s: f64) -> Self {
        Mat::identity(d) * s
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.d + j] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.a[..self.d * self.d]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        let n = self.d * self.d;
        &mut self.a[..n]
    }

    /// Frobenius inner product `A : B`.
    pub fn dot(&self, other: &Mat) -> f64 {
        debug_assert_eq!(self.d, other.d);
        self.as_slice().iter().zip(other.as_slice()).map(|(x, y)| x * y).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.get(i, i)).sum()
    }

    pub fn transpose(&self) -> Mat {
        let mut m = Mat::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                m.set(i, j, self.get(j, i));
            }
        }
        m
    }

    pub fn det(&self) -> f64 {
        match self.d {
            1 => self.a[0],
            2 => self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0),
            _ => {
                let g = |i, j| self.get(i, j);
                g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
                    - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                    + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
            }
        }
    }

    /// Cofactor matrix, the derivative of `det` with respect to the entries.
    pub fn cofactor(&self) -> Mat {
        let d = self.d;
        let mut c = Mat::zeros(d);
        match d {
            1 => c.a[0] = 1.0,
            2 => {
                c.set(0, 0, self.get(1, 1));
                c.set(0, 1, -self.get(1, 0));
                c.set(1, 0, -self.get(0, 1));
                c.set(1, 1, self.get(0, 0));
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                        let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                        c.set(
                            i,
                            j,
                            self.get(i1, j1) * self.get(i2, j2) - self.get(i1, j2) * self.get(i2, j1),
                        );
                    }
                }
            }
        }
        c
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Vector-matrix product `x^T A`.
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|j| (0..self.d).map(|i| x[i] * self.get(i, j)).sum())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

impl Add for Mat {
    type Output = Mat;
    fn add(mut self, rhs: Mat) -> Mat {
        self += rhs;
        self
    }
}

impl AddAssign for Mat {
    fn add_assign(&mut self, rhs: Mat) {
        debug_assert_eq!(self.d, rhs.d);
        for k in 0..self.d * self.d {
            self.a[k] += rhs.a[k];
        }
    }
}

impl Sub for Mat {
    type Output = Mat;
    fn sub(mut self, rhs: Mat) -> Mat {
        self -= rhs;
        self
    }
}

impl SubAssign for Mat {
    fn sub_assign(&mut self, rhs: Mat) {
        debug_assert_eq!(self.d, rhs.d);
        for k in 0..self.d * self.d {
            self.a[k] -= rhs.a[k];
        }
    }
}

impl Mul<f64> for Mat {
    type Output = Mat;
    fn mul(mut self, s: f64) -> Mat {
        for k in 0..self.d * self.d {
            self.a[k] *= s;
        }
        self
    }
}

impl Neg for Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self * -1.0
    }
}

pub fn vec_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn vec_dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cofactor_is_gradient_of_det() {
        let m = Mat::from_slice(3, &[1.0, 2.0, 0.5, -0.3, 1.5, 0.7, 0.2, -1.1, 2.0]);
        let c = m.cofactor();
        let h = 1e-6;
        for k in 0..9 {
            let mut p = m;
            let mut q = m;
            p.as_mut_slice()[k] += h;
            q.as_mut_slice()[k] -= h;
            let fd = (p.det() - q.det()) / (2.0 * h);
            assert!((fd - c.as_slice()[k]).abs() < 1e-8);
        }
    }
}
