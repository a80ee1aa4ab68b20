//! Dense LU factorizations: complex determinants with a tracked binary
//! exponent, and a real inverse.

use num_complex::Complex;
use num_traits::Float;

/// `mant * 2^exp2`.
#[derive(Clone, Copy, Debug)]
pub struct ScaledDet<T> {
    pub mant: Complex<T>,
    pub exp2: i64,
}

impl<T: Float> ScaledDet<T> {
    pub fn one() -> Self {
        ScaledDet {
            mant: Complex::new(T::one(), T::zero()),
            exp2: 0,
        }
    }

    pub fn zero() -> Self {
        ScaledDet {
            mant: Complex::new(T::zero(), T::zero()),
            exp2: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mant.re == T::zero() && self.mant.im == T::zero()
    }

    pub fn mul(self, other: Self) -> Self {
        let mut out = ScaledDet {
            mant: self.mant * other.mant,
            exp2: self.exp2 + other.exp2,
        };
        out.rescale();
        out
    }

    pub fn scale_real(self, f: T) -> Self {
        let mut out = ScaledDet {
            mant: self.mant * f,
            exp2: self.exp2,
        };
        out.rescale();
        out
    }

    /// `self / other` as an unscaled complex number.
    pub fn ratio(self, other: Self) -> Complex<T> {
        if self.is_zero() {
            return Complex::new(T::zero(), T::zero());
        }
        let q = self.mant / other.mant;
        q * pow2::<T>(self.exp2 - other.exp2)
    }

    /// Natural log of the modulus.
    pub fn ln_abs(&self) -> f64 {
        let a = self.mant.norm().to_f64().unwrap_or(0.0);
        a.ln() + (self.exp2 as f64) * std::f64::consts::LN_2
    }

    fn rescale(&mut self) {
        let mag = (self.mant.re.abs() + self.mant.im.abs())
            .to_f64()
            .unwrap_or(0.0);
        if mag == 0.0 || !mag.is_finite() {
            return;
        }
        let k = mag.log2().floor() as i64;
        if k.abs() > 32 {
            self.mant = self.mant * pow2::<T>(-k);
            self.exp2 += k;
        }
    }
}

fn pow2<T: Float>(k: i64) -> T {
    let two = T::one() + T::one();
    if k >= 0 {
        if k > 2000 {
            T::infinity()
        } else {
            two.powi(k as i32)
        }
    } else if k < -2000 {
        T::zero()
    } else {
        T::one() / two.powi((-k) as i32)
    }
}

fn abs1<T: Float>(z: &Complex<T>) -> T {
    z.re.abs() + z.im.abs()
}

/// Determinant of the row-major `n x n` matrix `a` by LU with partial
/// pivoting. `a` is overwritten.
pub fn det_lu<T: Float>(a: &mut [Complex<T>], n: usize) -> ScaledDet<T> {
    debug_assert_eq!(a.len(), n * n);
    let mut det = ScaledDet::one();
    for k in 0..n {
        let mut piv = k;
        let mut best = abs1(&a[k * n + k]);
        for r in (k + 1)..n {
            let v = abs1(&a[r * n + k]);
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == T::zero() {
            return ScaledDet::zero();
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            det.mant = -det.mant;
        }
        let p = a[k * n + k];
        det = det.mul(ScaledDet { mant: p, exp2: 0 });
        let inv = Complex::new(T::one(), T::zero()) / p;
        for r in (k + 1)..n {
            let f = a[r * n + k] * inv;
            if f.re == T::zero() && f.im == T::zero() {
                continue;
            }
            for c in (k + 1)..n {
                let t = a[k * n + c];
                a[r * n + c] = a[r * n + c] - f * t;
            }
        }
    }
    det
}

/// Inverse of a real row-major matrix by Gauss-Jordan with partial pivoting.
pub fn inverse_real(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for k in 0..n {
        let mut piv = k;
        for r in (k + 1)..n {
            if m[r * n + k].abs() > m[piv * n + k].abs() {
                piv = r;
            }
        }
        if m[piv * n + k] == 0.0 {
            return None;
        }
        if piv != k {
            for c in 0..n {
                m.swap(k * n + c, piv * n + c);
                inv.swap(k * n + c, piv * n + c);
            }
        }
        let p = m[k * n + k];
        for c in 0..n {
            m[k * n + c] /= p;
            inv[k * n + c] /= p;
        }
        for r in 0..n {
            if r == k {
                continue;
            }
            let f = m[r * n + k];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m[r * n + c] -= f * m[k * n + c];
                inv[r * n + c] -= f * inv[k * n + c];
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use twofloat::TwoFloat;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn det_of_small_complex_matrix() {
        let mut a = vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, 1.0), c(3.0, -1.0)];
        let d = det_lu(&mut a, 2);
        let v = d.ratio(ScaledDet::one());
        // (1+i)(3-i) - 2i = 4 + 2i - 2i
        assert!((v - c(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn det_tracks_large_exponents() {
        let n = 40;
        let mut a = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = c(1e30, 0.0);
        }
        let d = det_lu(&mut a, n);
        assert!((d.ln_abs() - 1200.0 * 10f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn det_in_double_double() {
        let one = TwoFloat::from(1.0);
        let z = TwoFloat::from(0.0);
        let mut a = vec![
            Complex::new(one, z),
            Complex::new(one, z),
            Complex::new(one, z),
            Complex::new(one + TwoFloat::from(1e-20), z),
        ];
        let d = det_lu(&mut a, 2);
        let v = d.ratio(ScaledDet::one());
        assert!((f64::from(v.re) - 1e-20).abs() < 1e-30);
    }

    #[test]
    fn real_inverse_roundtrip() {
        let a = vec![4.0, 1.0, 2.0, 3.0];
        let inv = inverse_real(&a, 2).unwrap();
        assert!((inv[0] - 0.3).abs() < 1e-12 && (inv[3] - 0.4).abs() < 1e-12);
        assert!(inverse_real(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
