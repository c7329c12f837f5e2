//! Small dense linear algebra for the Newton systems.

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `self += weight · a aᵀ` for a sparse vector `a`.
    pub fn add_outer_sparse(&mut self, a: &[(usize, f64)], weight: f64) {
        for &(i, ai) in a {
            for &(j, aj) in a {
                self.add(i, j, weight * ai * aj);
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix, possibly
/// of its Jacobi-scaled form `D a D`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
    /// Diagonal of `D`; empty when unscaled.
    scaling: Vec<f64>,
}

impl Cholesky {
    /// Factors `a + ridge·I`; `None` if a pivot is not positive.
    pub fn factor(a: &DenseMatrix, ridge: f64) -> Option<Self> {
        Self::factor_scaled(a, &[], ridge)
    }

    fn factor_scaled(a: &DenseMatrix, scaling: &[f64], ridge: f64) -> Option<Self> {
        let n = a.dim();
        let entry = |i: usize, j: usize| match scaling {
            [] => a.get(i, j),
            d => d[i] * a.get(i, j) * d[j],
        };
        let mut l = DenseMatrix::zeros(n);
        for j in 0..n {
            let mut d = entry(j, j) + ridge;
            for k in 0..j {
                let v = l.get(j, k);
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in (j + 1)..n {
                let mut s = entry(i, j);
                let (ri, rj) = (i * n, j * n);
                for k in 0..j {
                    s -= l.data[ri + k] * l.data[rj + k];
                }
                l.set(i, j, s / d);
            }
        }
        Some(Self { l, scaling: scaling.to_vec() })
    }

    /// Factors with an escalating ridge when the plain factorization breaks
    /// down. The ridge is applied to the Jacobi-scaled matrix, so it is
    /// relative to each diagonal entry rather than to the largest one.
    pub fn factor_regularized(a: &DenseMatrix) -> Option<Self> {
        if let Some(c) = Self::factor(a, 0.0) {
            return Some(c);
        }
        let floor = a.max_abs_diag().max(f64::MIN_POSITIVE) * 1e-300_f64.max(f64::EPSILON * f64::EPSILON);
        let scaling: Vec<f64> = (0..a.dim()).map(|i| 1.0 / a.get(i, i).abs().max(floor).sqrt()).collect();
        let mut ridge = 1e-14;
        for _ in 0..12 {
            if let Some(c) = Self::factor_scaled(a, &scaling, ridge) {
                return Some(c);
            }
            ridge *= 10.0;
        }
        None
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.dim();
        let mut y = match self.scaling.as_slice() {
            [] => b.to_vec(),
            d => b.iter().zip(d).map(|(v, s)| v * s).collect(),
        };
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        if !self.scaling.is_empty() {
            y.iter_mut().zip(&self.scaling).for_each(|(v, s)| *v *= s);
        }
        y
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let mut a = DenseMatrix::zeros(3);
        let rows = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                a.set(i, j, *v);
            }
        }
        let c = Cholesky::factor(&a, 0.0).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = DenseMatrix::zeros(2);
        a.set(0, 0, 1.0);
        a.set(1, 1, -1.0);
        assert!(Cholesky::factor(&a, 0.0).is_none());
    }

    #[test]
    fn regularized_handles_singular_psd() {
        let mut a = DenseMatrix::zeros(2);
        a.add_outer_sparse(&[(0, 1.0), (1, 1.0)], 1.0);
        assert!(Cholesky::factor(&a, 0.0).is_none());
        assert!(Cholesky::factor_regularized(&a).is_some());
    }

    #[test]
    fn regularized_ridge_is_relative_per_entry() {
        // singular, with diagonal entries twenty orders apart
        let mut a = DenseMatrix::zeros(3);
        a.add_outer_sparse(&[(0, 1.0), (1, 1.0)], 1.0);
        a.set(2, 2, 1e20);
        let c = Cholesky::factor_regularized(&a).unwrap();
        let x = c.solve(&[1.0, 1.0, 1e20]);
        assert!((x[0] + x[1] - 1.0).abs() < 1e-6, "{x:?}");
        assert!((x[2] - 1.0).abs() < 1e-12);
    }
}
