//! Dense Cholesky factorization with a jitter schedule, triangular solves and
//! bordered (one row at a time) factor extension.

use crate::error::{check_dim, Error, Result};

/// Retries multiply the jitter by 10, at most this many times.
const JITTER_RETRIES: i32 = 8;
const MIN_JITTER: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A + jitter_applied · I`.
///
/// Storage is dense row-major `dim × dim`; the strict upper triangle is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    dim: usize,
    lower: Vec<f64>,
    jitter_applied: f64,
}

impl SpdFactor {
    /// Factor of the empty matrix; extending it grows a factor row by row.
    pub fn empty() -> Self {
        Self {
            dim: 0,
            lower: Vec::new(),
            jitter_applied: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.lower[i * self.dim..(i + 1) * self.dim]
    }

    /// `Σ ln L_ii`, i.e. half the log-determinant of the factored matrix.
    pub fn half_log_det(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).ln()).sum()
    }

    /// Rebuilds `L Lᵀ` as dense rows.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.dim;
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum();
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        out
    }

    /// Solves `L y = rhs`.
    pub fn forward_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, rhs.len())?;
        let mut y = rhs.to_vec();
        self.forward_in_place(&mut y);
        Ok(y)
    }

    pub(crate) fn forward_in_place(&self, y: &mut [f64]) {
        for i in 0..self.dim {
            let row = self.row(i);
            let s: f64 = row[..i].iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ x = rhs`.
    pub fn backward_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, rhs.len())?;
        let mut x = rhs.to_vec();
        for i in (0..self.dim).rev() {
            let mut s = x[i];
            for k in i + 1..self.dim {
                s -= self.get(k, i) * x[k];
            }
            x[i] = s / self.get(i, i);
        }
        Ok(x)
    }
}

/// Cholesky factorization of a symmetric matrix given as rows.
///
/// The first attempt uses `base_jitter` as is; on failure the diagonal shift
/// restarts at `max(base_jitter, 1e-10)` and grows tenfold per retry.
pub fn cholesky(matrix: &[Vec<f64>], base_jitter: f64) -> Result<SpdFactor> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    for row in matrix {
        check_dim(n, row.len())?;
    }
    let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
    cholesky_flat(&flat, n, base_jitter)
}

fn cholesky_flat(a: &[f64], n: usize, base_jitter: f64) -> Result<SpdFactor> {
    let mut last = base_jitter;
    for jitter in jitter_schedule(base_jitter) {
        last = jitter;
        if let Some(lower) = try_factor(a, n, jitter) {
            return Ok(SpdFactor {
                dim: n,
                lower,
                jitter_applied: jitter,
            });
        }
    }
    Err(Error::NotPositiveDefinite { jitter: last })
}

fn jitter_schedule(base: f64) -> impl Iterator<Item = f64> {
    let start = base.max(MIN_JITTER);
    let first = (base < start).then_some(base);
    first
        .into_iter()
        .chain((0..=JITTER_RETRIES).map(move |k| start * 10f64.powi(k)))
}

fn try_factor(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                let d = s + jitter;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `(L Lᵀ) x = rhs`.
pub fn solve_spd(factor: &SpdFactor, rhs: &[f64]) -> Result<Vec<f64>> {
    let y = factor.forward_solve(rhs)?;
    factor.backward_solve(&y)
}

/// Factor of the bordered matrix `[[A, b], [bᵀ, c]]` given the factor of `A`,
/// `new_row = b` and `new_diag = c`. Costs `O(n²)`.
///
/// The existing jitter is applied to the new diagonal entry too. If the Schur
/// complement is not positive, the whole bordered matrix is refactored with a
/// larger jitter.
pub fn extend_factor(factor: &SpdFactor, new_row: &[f64], new_diag: f64) -> Result<SpdFactor> {
    let n = factor.dim;
    check_dim(n, new_row.len())?;
    let l_row = factor.forward_solve(new_row)?;
    let schur = new_diag + factor.jitter_applied - l_row.iter().map(|v| v * v).sum::<f64>();
    if schur > 0.0 && schur.is_finite() {
        let m = n + 1;
        let mut lower = vec![0.0; m * m];
        for i in 0..n {
            lower[i * m..i * m + n].copy_from_slice(factor.row(i));
        }
        lower[n * m..n * m + n].copy_from_slice(&l_row);
        lower[n * m + n] = schur.sqrt();
        return Ok(SpdFactor {
            dim: m,
            lower,
            jitter_applied: factor.jitter_applied,
        });
    }

    let m = n + 1;
    let rebuilt = factor.reconstruct();
    let mut a = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            a[i * m + j] = rebuilt[i][j] - if i == j { factor.jitter_applied } else { 0.0 };
        }
        a[i * m + n] = new_row[i];
        a[n * m + i] = new_row[i];
    }
    a[n * m + n] = new_diag;
    let retry_base = (factor.jitter_applied * 10.0).max(MIN_JITTER);
    cholesky_flat(&a, m, retry_base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_spd(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| w[k][i] * w[k][j]).sum::<f64>();
            }
            a[i][i] += 1.0;
        }
        a
    }

    fn frob(a: &[Vec<f64>]) -> f64 {
        a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_factor_is_identity() {
        let a = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let f = cholesky(&a, 0.0).unwrap();
        assert_eq!(f.jitter_applied(), 0.0);
        assert_eq!(f.reconstruct(), a);
        assert_eq!(solve_spd(&f, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_by_hand() {
        let f = cholesky(&[vec![4.0, 2.0], vec![2.0, 3.0]], 0.0).unwrap();
        assert_eq!(f.get(0, 0), 2.0);
        assert_eq!(f.get(0, 1), 0.0);
        assert_eq!(f.get(1, 0), 1.0);
        assert!((f.get(1, 1) - 2f64.sqrt()).abs() < 1e-15);
        // inverse of [[4,2],[2,3]] is [[3,-2],[-2,4]]/8
        let x = solve_spd(&f, &[8.0, 7.0]).unwrap();
        let expected = [(3.0 * 8.0 - 2.0 * 7.0) / 8.0, (-2.0 * 8.0 + 4.0 * 7.0) / 8.0];
        assert!((x[0] - expected[0]).abs() < 1e-14 && (x[1] - expected[1]).abs() < 1e-14);
        assert!((x[0] - 1.25).abs() < 1e-14 && (x[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_of_random_spd() {
        let a = random_spd(20, 7);
        let f = cholesky(&a, 0.0).unwrap();
        let r = f.reconstruct();
        let diff: Vec<Vec<f64>> = (0..20)
            .map(|i| (0..20).map(|j| r[i][j] - a[i][j]).collect())
            .collect();
        assert!(frob(&diff) / frob(&a) < 1e-8);
        for i in 0..20 {
            assert!(f.get(i, i) > 0.0);
        }
    }

    #[test]
    fn solve_residual_is_small() {
        let a = random_spd(10, 11);
        let f = cholesky(&a, 0.0).unwrap();
        let b: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let x = solve_spd(&f, &b).unwrap();
        let res = (0..10)
            .map(|i| ((0..10).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i]).abs())
            .fold(0.0, f64::max);
        assert!(res < 1e-8);
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let f = cholesky(&a, 0.0).unwrap();
        assert!(f.jitter_applied() >= 1e-10);
        assert!(f.jitter_applied() <= 1e-2);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = vec![vec![1.0, 0.0], vec![0.0, -5.0]];
        assert!(matches!(cholesky(&a, 0.0), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn non_square_is_dimension_mismatch() {
        let a = vec![vec![1.0, 0.0], vec![0.0]];
        assert!(matches!(cholesky(&a, 0.0), Err(Error::DimensionMismatch { .. })));
        let f = cholesky(&[vec![2.0]], 0.0).unwrap();
        assert!(matches!(solve_spd(&f, &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn extend_small_cases() {
        let f = cholesky(&[vec![1.0]], 0.0).unwrap();
        let g = extend_factor(&f, &[0.0], 1.0).unwrap();
        assert_eq!(g.reconstruct(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);

        let f = cholesky(&[vec![4.0]], 0.0).unwrap();
        let g = extend_factor(&f, &[2.0], 3.0).unwrap();
        let direct = cholesky(&[vec![4.0, 2.0], vec![2.0, 3.0]], 0.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.get(i, j) - direct.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn incremental_matches_batch() {
        let n = 15;
        let a = random_spd(n, 3);
        let mut f = SpdFactor::empty();
        for k in 0..n {
            f = extend_factor(&f, &a[k][..k], a[k][k]).unwrap();
        }
        let batch = cholesky(&a, 0.0).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((f.get(i, j) - batch.get(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn extend_refactors_when_schur_collapses() {
        let f = cholesky(&[vec![1.0]], 0.0).unwrap();
        // duplicate row: Schur complement is exactly zero
        let g = extend_factor(&f, &[1.0], 1.0).unwrap();
        assert_eq!(g.dim(), 2);
        assert!(g.jitter_applied() > 0.0);
    }
}
