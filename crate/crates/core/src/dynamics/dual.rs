//! Forward-mode dual numbers, used to differentiate the recursive
//! Newton-Euler mass matrix exactly with respect to one joint angle.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Scalar type the chain recursion is generic over.
pub(crate) trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + AddAssign
{
    fn from_f64(v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

/// `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }
}

impl Add for Dual {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.re += rhs.re;
        self.eps += rhs.eps;
    }
}

impl Sub for Dual {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.eps - rhs.eps)
    }
}

impl Mul for Dual {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.re * rhs.re, self.re * rhs.eps + self.eps * rhs.re)
    }
}

impl Neg for Dual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl Real for Dual {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::new(v, 0.0)
    }
    #[inline]
    fn sin(self) -> Self {
        Self::new(self.re.sin(), self.eps * self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        Self::new(self.re.cos(), -self.eps * self.re.sin())
    }
}

/// Minimal 3-vector over any [`Real`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct V3<T>(pub [T; 3]);

impl<T: Real> V3<T> {
    pub fn zero() -> Self {
        Self([T::from_f64(0.0); 3])
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self(v.map(T::from_f64))
    }

    pub fn dot(&self, o: &Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Self) -> Self {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = o.0;
        Self([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    pub fn scale(&self, s: T) -> Self {
        Self(self.0.map(|v| v * s))
    }
}

impl<T: Real> Add for V3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> Sub for V3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

/// Row-major 3x3 matrix over any [`Real`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct M3<T>(pub [[T; 3]; 3]);

impl<T: Real> M3<T> {
    pub fn from_f64(m: [[f64; 3]; 3]) -> Self {
        Self(m.map(|r| r.map(T::from_f64)))
    }

    pub fn mul_vec(&self, v: &V3<T>) -> V3<T> {
        V3([0, 1, 2].map(|i| self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2]))
    }

    pub fn tr_mul_vec(&self, v: &V3<T>) -> V3<T> {
        V3([0, 1, 2].map(|i| self.0[0][i] * v.0[0] + self.0[1][i] * v.0[1] + self.0[2][i] * v.0[2]))
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = [[T::from_f64(0.0); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        Self(out)
    }

    /// Rodrigues rotation about the unit `axis` by `angle`.
    pub fn axis_angle(axis: &V3<T>, angle: T) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        let one = T::from_f64(1.0);
        let v = one - c;
        let [x, y, z] = axis.0;
        Self([
            [c + x * x * v, x * y * v - z * s, x * z * v + y * s],
            [y * x * v + z * s, c + y * y * v, y * z * v - x * s],
            [z * x * v - y * s, z * y * v + x * s, c + z * z * v],
        ])
    }
}
