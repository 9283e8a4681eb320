//! Symmetric tridiagonal matrices, which is all a uniform 1-D P1
//! discretization ever produces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored as its diagonal and first off-diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::Argument(format!(
                "tridiagonal shape mismatch: diag {} off {}",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `y = A x`
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        if n == 1 {
            y[0] = self.diag[0] * x[0];
            return;
        }
        y[0] = self.diag[0] * x[0] + self.off[0] * x[1];
        for i in 1..n - 1 {
            y[i] = self.off[i - 1] * x[i - 1] + self.diag[i] * x[i] + self.off[i] * x[i + 1];
        }
        y[n - 1] = self.off[n - 2] * x[n - 2] + self.diag[n - 1] * x[n - 1];
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_into(x, &mut y);
        y
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = self.diag[i] * y[i];
            if i > 0 {
                row += self.off[i - 1] * y[i - 1];
            }
            if i + 1 < n {
                row += self.off[i] * y[i + 1];
            }
            acc += x[i] * row;
        }
        acc
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &SymTridiagonal) -> SymTridiagonal {
        SymTridiagonal {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a + s * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> SymTridiagonal {
        SymTridiagonal {
            diag: self.diag.iter().map(|a| s * a).collect(),
            off: self.off.iter().map(|a| s * a).collect(),
        }
    }

    /// LDLᵀ factorization without pivoting.
    ///
    /// Works for any matrix whose leading principal minors are nonzero, which
    /// covers every SPD system here and the mildly indefinite Newton matrices
    /// near a blow-up.
    pub fn factor(&self) -> Result<LdlFactor> {
        let n = self.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let bad = |p: f64| p.abs() <= 1e-300 * scale || !p.is_finite();
        d[0] = self.diag[0];
        for i in 1..n {
            if bad(d[i - 1]) {
                return Err(Error::Numeric(format!("zero pivot at row {}", i - 1)));
            }
            l[i - 1] = self.off[i - 1] / d[i - 1];
            d[i] = self.diag[i] - l[i - 1] * self.off[i - 1];
        }
        if bad(d[n - 1]) {
            return Err(Error::Numeric(format!("zero pivot at row {}", n - 1)));
        }
        Ok(LdlFactor { d, l })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::Argument(format!(
                "rhs length {} != {}",
                b.len(),
                self.dim()
            )));
        }
        Ok(self.factor()?.solve(b))
    }
}

#[derive(Clone, Debug)]
pub struct LdlFactor {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl LdlFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
        x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(a: &SymTridiagonal) -> Vec<Vec<f64>> {
        let n = a.dim();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = a.diag[i];
            if i + 1 < n {
                m[i][i + 1] = a.off[i];
                m[i + 1][i] = a.off[i];
            }
        }
        m
    }

    #[test]
    fn solve_matches_dense_product() {
        let a = SymTridiagonal::new(vec![4.0, 5.0, 6.0, 3.0], vec![1.0, -2.0, 0.5]).unwrap();
        let b = vec![1.0, -1.0, 2.0, 0.25];
        let x = a.solve(&b).unwrap();
        let m = dense(&a);
        for i in 0..4 {
            let r: f64 = (0..4).map(|j| m[i][j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn bilinear_agrees_with_mul() {
        let a = SymTridiagonal::new(vec![2.0, 2.0, 1.0], vec![-1.0, -1.0]).unwrap();
        let x = [0.3, -0.7, 1.1];
        let y = [1.0, 2.0, -0.5];
        assert!((a.bilinear(&x, &y) - dot(&x, &a.mul(&y))).abs() < 1e-15);
        assert!((a.bilinear(&x, &y) - a.bilinear(&y, &x)).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = SymTridiagonal::new(vec![1.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(a.solve(&[1.0, 1.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(SymTridiagonal::new(vec![1.0, 2.0], vec![]).is_err());
    }
}
