use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIGMA_MIN: f64 = 0.01;
pub const SIGMA_MAX: f64 = 2.0;

/// Full covariance `Σ = L diag(σ²) Lᵀ` with unit lower-triangular `L`.
///
/// `lower` holds the strictly lower entries of `L` row by row:
/// `(1,0), (2,0), (2,1), (3,0), …`. Standard deviations are stored on the
/// log scale and clipped to `[SIGMA_MIN, SIGMA_MAX]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdlCovariance {
    lower: Vec<f64>,
    log_sigma: Vec<f64>,
}

pub(crate) fn lower_index(i: usize, j: usize) -> usize {
    debug_assert!(j < i);
    i * (i - 1) / 2 + j
}

pub(crate) fn clip_log_sigma(v: f64) -> f64 {
    v.clamp(SIGMA_MIN.ln(), SIGMA_MAX.ln())
}

impl LdlCovariance {
    pub fn new(lower: Vec<f64>, log_sigma: Vec<f64>) -> Result<Self> {
        let d = log_sigma.len();
        if d == 0 {
            return Err(Error::InvalidArgument("covariance dimension must be positive".into()));
        }
        if lower.len() != d * (d - 1) / 2 {
            return Err(Error::LengthMismatch {
                expected: d * (d - 1) / 2,
                got: lower.len(),
            });
        }
        if lower.iter().chain(&log_sigma).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "covariance factors",
            });
        }
        let log_sigma = log_sigma.into_iter().map(clip_log_sigma).collect();
        Ok(LdlCovariance { lower, log_sigma })
    }

    pub fn from_sigma(lower: Vec<f64>, sigma: &[f64]) -> Result<Self> {
        if sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("standard deviations must be positive".into()));
        }
        Self::new(lower, sigma.iter().map(|s| s.ln()).collect())
    }

    pub fn identity(d: usize) -> Self {
        LdlCovariance {
            lower: vec![0.0; d * (d.saturating_sub(1)) / 2],
            log_sigma: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.log_sigma.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn log_sigma(&self) -> &[f64] {
        &self.log_sigma
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|v| v.exp()).collect()
    }

    /// Unit lower-triangular factor `L`.
    pub fn unit_lower(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Greater => self.lower[lower_index(i, j)],
            std::cmp::Ordering::Less => 0.0,
        })
    }

    /// `L⁻¹`, by forward substitution.
    pub fn unit_lower_inverse(&self) -> DMatrix<f64> {
        unit_lower_inverse(&self.unit_lower())
    }

    /// Dense `Σ`.
    pub fn compose(&self) -> DMatrix<f64> {
        let l = self.unit_lower();
        let d2 = DVector::from_iterator(self.dim(), self.log_sigma.iter().map(|v| (2.0 * v).exp()));
        let ld = &l * DMatrix::from_diagonal(&d2);
        symmetrize(&ld * l.transpose())
    }

    /// Dense `Σ⁻¹ = L⁻ᵀ diag(σ⁻²) L⁻¹`.
    pub fn invert(&self) -> DMatrix<f64> {
        let u = self.unit_lower_inverse();
        let inv_d2 = DVector::from_iterator(self.dim(), self.log_sigma.iter().map(|v| (-2.0 * v).exp()));
        symmetrize(u.transpose() * DMatrix::from_diagonal(&inv_d2) * &u)
    }

    /// `ln |Σ| = 2 Σ ln σ_i`.
    pub fn logdet(&self) -> f64 {
        2.0 * self.log_sigma.iter().sum::<f64>()
    }

    /// Factors a symmetric positive-definite matrix, clipping σ.
    pub fn decompose(sigma: &DMatrix<f64>) -> Result<Self> {
        let (l, d) =
            ldl_factor(sigma).ok_or_else(|| Error::Inadmissible("covariance is not positive definite".into()))?;
        let n = sigma.nrows();
        let mut lower = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 1..n {
            for j in 0..i {
                lower.push(l[(i, j)]);
            }
        }
        let log_sigma = d.iter().map(|v| 0.5 * v.ln()).collect();
        Self::new(lower, log_sigma)
    }

    /// Applies `L diag(σ)` to `z`.
    pub fn scale(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let s: Vec<f64> = z.iter().zip(&self.log_sigma).map(|(z, l)| z * l.exp()).collect();
        (0..d)
            .map(|i| s[i] + (0..i).map(|j| self.lower[lower_index(i, j)] * s[j]).sum::<f64>())
            .collect()
    }
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `A = L D Lᵀ` for symmetric `A`; `None` unless every pivot is positive.
pub(crate) fn ldl_factor(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut d = DVector::<f64>::zeros(n);
    for j in 0..n {
        let mut dj = a[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        if !(dj > 0.0) || !dj.is_finite() {
            return None;
        }
        d[j] = dj;
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    Some((l, d))
}

pub(crate) fn unit_lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut u = DMatrix::<f64>::identity(n, n);
    for c in 0..n {
        for i in c + 1..n {
            let mut v = 0.0;
            for k in c..i {
                v -= l[(i, k)] * u[(k, c)];
            }
            u[(i, c)] = v;
        }
    }
    u
}

/// Solves `A x = b` given `A = L D Lᵀ`.
pub(crate) fn ldl_solve(l: &DMatrix<f64>, d: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut y = b.clone();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
    }
    for i in 0..n {
        y[i] /= d[i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[(k, i)] * y[k];
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_case() {
        let c = LdlCovariance::identity(3);
        assert_eq!(c.compose(), DMatrix::identity(3, 3));
        assert_eq!(c.invert(), DMatrix::identity(3, 3));
        assert_eq!(c.logdet(), 0.0);
    }

    #[test]
    fn two_dim_example() {
        let c = LdlCovariance::from_sigma(vec![0.5], &[1.0, 2.0]).unwrap();
        let s = c.compose();
        assert_abs_diff_eq!(s[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(0, 1)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(1, 1)], 4.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c.logdet(), 2.0 * 2f64.ln(), epsilon = 1e-15);
        let prod = &s * c.invert();
        assert_abs_diff_eq!((prod - DMatrix::identity(2, 2)).amax(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma_is_clipped() {
        let c = LdlCovariance::from_sigma(vec![], &[1e-5]).unwrap();
        assert_abs_diff_eq!(c.sigma()[0], SIGMA_MIN, epsilon = 1e-15);
        let c = LdlCovariance::from_sigma(vec![], &[10.0]).unwrap();
        assert_abs_diff_eq!(c.sigma()[0], SIGMA_MAX, epsilon = 1e-15);
    }

    #[test]
    fn decompose_round_trip() {
        let c = LdlCovariance::from_sigma(vec![0.3, -1.2, 0.7], &[0.5, 1.1, 0.2]).unwrap();
        let back = LdlCovariance::decompose(&c.compose()).unwrap();
        for (a, b) in back.lower().iter().zip(c.lower()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in back.log_sigma().iter().zip(c.log_sigma()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn decompose_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(LdlCovariance::decompose(&m).is_err());
    }

    #[test]
    fn solve_matches_inverse() {
        let c = LdlCovariance::from_sigma(vec![0.3, -1.2, 0.7], &[0.5, 1.1, 0.2]).unwrap();
        let s = c.compose();
        let (l, d) = ldl_factor(&s).unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = ldl_solve(&l, &d, &b);
        let r = &s * &x - &b;
        assert!(r.amax() < 1e-12);
    }
}
