//! Banded linear algebra used by the spectral and flow solvers.
//!
//! All discrete operators in this crate are tridiagonal in the node index, with an
//! extra corner coupling when the profile is a closed loop. [`Tridiag`] stores that
//! shape; [`TridiagLu`] factors it with partial pivoting (LAPACK `gttrf` layout) and
//! handles the periodic corners by a Sherman-Morrison correction.

use crate::error::{Error, Result};

/// A (possibly periodic) tridiagonal matrix.
///
/// Row `i` reads `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1]`. For a
/// non-periodic matrix `lower[0]` and `upper[n-1]` are ignored; for a periodic one
/// they couple to `x[n-1]` and `x[0]` respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub periodic: bool,
}

impl Tridiag {
    pub fn zeros(n: usize, periodic: bool) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n], periodic }
    }

    pub fn identity(n: usize, periodic: bool) -> Self {
        let mut t = Self::zeros(n, periodic);
        t.diag.iter_mut().for_each(|d| *d = 1.0);
        t
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i] * x[i - 1];
            } else if self.periodic && n > 1 {
                acc += self.lower[0] * x[n - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            } else if self.periodic && n > 1 {
                acc += self.upper[n - 1] * x[0];
            }
            y[i] = acc;
        }
        y
    }

    /// `alpha * self + beta * I`.
    pub fn scaled_plus_identity(&self, alpha: f64, beta: f64) -> Tridiag {
        Tridiag {
            lower: self.lower.iter().map(|v| alpha * v).collect(),
            diag: self.diag.iter().map(|v| alpha * v + beta).collect(),
            upper: self.upper.iter().map(|v| alpha * v).collect(),
            periodic: self.periodic,
        }
    }

    pub fn factor(&self) -> Result<TridiagLu> {
        TridiagLu::new(self)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factor()?.solve(b))
    }

    /// Dense copy, for small systems and tests.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += self.diag[i];
            if i > 0 {
                m[(i, i - 1)] += self.lower[i];
            } else if self.periodic && n > 1 {
                m[(0, n - 1)] += self.lower[0];
            }
            if i + 1 < n {
                m[(i, i + 1)] += self.upper[i];
            } else if self.periodic && n > 1 {
                m[(n - 1, 0)] += self.upper[n - 1];
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
struct GtLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    ipiv: Vec<usize>,
}

impl GtLu {
    fn factor(mut dl: Vec<f64>, mut d: Vec<f64>, mut du: Vec<f64>) -> Result<Self> {
        let n = d.len();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut ipiv: Vec<usize> = (0..n).collect();
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                ipiv[i] = i + 1;
            }
        }
        if let Some(i) = d.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::Invalid(format!("singular tridiagonal system at row {i}")));
        }
        Ok(Self { dl, d, du, du2, ipiv })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.ipiv[i] == i {
                b[i + 1] -= self.dl[i] * b[i];
            } else {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Pivoted LU factorization of a [`Tridiag`], reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    lu: GtLu,
    // Sherman-Morrison data for the periodic corners: z = T'^{-1} u and v = (1, .., corner/gamma).
    correction: Option<(Vec<f64>, f64, f64)>,
}

impl TridiagLu {
    pub fn new(t: &Tridiag) -> Result<Self> {
        let n = t.len();
        if n == 0 {
            return Err(Error::Invalid("empty tridiagonal system".into()));
        }
        let dl: Vec<f64> = (1..n).map(|i| t.lower[i]).collect();
        let du: Vec<f64> = (0..n - 1).map(|i| t.upper[i]).collect();
        let mut d = t.diag.clone();
        if !t.periodic || n < 3 {
            if t.periodic && n == 2 {
                // corners fold onto the off-diagonals
                let dl = vec![t.lower[1] + t.upper[1]];
                let du = vec![t.upper[0] + t.lower[0]];
                return Ok(Self { lu: GtLu::factor(dl, d, du)?, correction: None });
            }
            return Ok(Self { lu: GtLu::factor(dl, d, du)?, correction: None });
        }
        let a = t.lower[0]; // A[0][n-1]
        let c = t.upper[n - 1]; // A[n-1][0]
        let gamma = if t.diag[0] != 0.0 { -t.diag[0] } else { -1.0 };
        d[0] -= gamma;
        d[n - 1] -= a * c / gamma;
        let lu = GtLu::factor(dl, d, du)?;
        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = c;
        lu.solve_in_place(&mut z);
        Ok(Self { lu, correction: Some((z, 1.0, a / gamma)) })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.lu.solve_in_place(x);
        if let Some((z, v0, vn)) = &self.correction {
            let n = x.len();
            let vy = v0 * x[0] + vn * x[n - 1];
            let vz = v0 * z[0] + vn * z[n - 1];
            let f = vy / (1.0 + vz);
            x.iter_mut().zip(z).for_each(|(xi, zi)| *xi -= f * zi);
        }
    }
}

/// Neumaier-compensated summation; the result does not depend on how terms cancel.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// `log(exp(a) + exp(b))` without overflow or underflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Ordinary least squares fit `y = intercept + slope * x`; returns `(slope, intercept, r2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}
