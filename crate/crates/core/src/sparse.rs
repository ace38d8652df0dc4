//! Sparse kernels shared by the discretization and solver layers: CSR
//! storage, preconditioned conjugate gradients, preconditioned MINRES,
//! and a direct sparse LU backend.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("iterative solver stalled after {iterations} iterations (relative residual {relative_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        relative_residual: f64,
    },
    #[error("matrix is numerically singular: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Compressed sparse row matrix over f64. Construction from triplets is
/// deterministic: duplicate entries are summed in insertion order.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            if prev == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                prev = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or(0.0)
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn tr_mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
    }

    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tr_mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest |a_ij - a_ji|; zero for an entrywise-symmetric matrix.
    pub fn max_symmetry_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out.push((i, j, v));
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct IterStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator given in apply form. Convergence is on the unpreconditioned
/// residual: |b - Ax| <= tol * |b|.
pub fn pcg<A, P>(
    apply: A,
    precondition: P,
    b: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, IterStats), SparseError>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return Ok((
            vec![0.0; n],
            IterStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut best_rel = f64::INFINITY;

    for it in 1..=max_iterations {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(SparseError::Singular(format!(
                "conjugate gradients hit a non-positive curvature direction (p^T A p = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / norm_b;
        best_rel = best_rel.min(rel);
        if rel <= tol {
            return Ok((
                x,
                IterStats {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Err(SparseError::NonConvergence {
        iterations: max_iterations,
        relative_residual: best_rel,
    })
}

/// Preconditioned MINRES for symmetric (possibly indefinite) systems.
/// The preconditioner must be symmetric positive definite and is given in
/// apply form. Convergence is checked on the true residual.
pub fn minres<A, P>(
    apply: A,
    precondition: P,
    b: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, IterStats), SparseError>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return Ok((
            vec![0.0; n],
            IterStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }

    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    precondition(&r1, &mut y);
    let beta1_sq = dot(&r1, &y);
    if beta1_sq <= 0.0 {
        return Err(SparseError::Singular(
            "MINRES preconditioner is not positive definite".into(),
        ));
    }
    let beta1 = beta1_sq.sqrt();

    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0f64;
    let mut sn = 0.0f64;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut scratch = vec![0.0; n];

    let mut final_rel = f64::INFINITY;
    for it in 1..=max_iterations {
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = y[i] * s;
        }
        apply(&v, &mut scratch);
        if it >= 2 {
            let c = beta / oldb;
            for i in 0..n {
                scratch[i] -= c * r1[i];
            }
        }
        let alfa = dot(&v, &scratch);
        let c = alfa / beta;
        for i in 0..n {
            scratch[i] -= c * r2[i];
        }
        r1.copy_from_slice(&r2);
        r2.copy_from_slice(&scratch);
        precondition(&r2, &mut y);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            return Err(SparseError::Singular(
                "MINRES preconditioner is not positive definite".into(),
            ));
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;

        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w2, &mut w);
        // w2 now holds the previous w; w holds w1 (two steps back).
        for i in 0..n {
            w[i] = (v[i] - oldeps * w[i] - delta * w2[i]) / gamma;
        }
        for i in 0..n {
            x[i] += phi * w[i];
        }

        // phibar tracks the preconditioned residual norm; confirm on the
        // true residual before declaring victory.
        if phibar <= 0.5 * tol * beta1 || it == max_iterations || it % 50 == 0 {
            apply(&x, &mut scratch);
            for i in 0..n {
                scratch[i] = b[i] - scratch[i];
            }
            final_rel = norm2(&scratch) / norm_b;
            if final_rel <= tol {
                return Ok((
                    x,
                    IterStats {
                        iterations: it,
                        relative_residual: final_rel,
                    },
                ));
            }
        }
    }

    Err(SparseError::NonConvergence {
        iterations: max_iterations,
        relative_residual: final_rel,
    })
}

/// Direct solve via sparse LU with partial pivoting, plus one step of
/// iterative refinement.
pub fn direct_solve(matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>, SparseError> {
    use faer::linalg::solvers::Solve;
    use faer::sparse::{SparseColMat, Triplet};

    if matrix.nrows() != matrix.ncols() {
        return Err(SparseError::DimensionMismatch(format!(
            "direct solve needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if rhs.len() != matrix.nrows() {
        return Err(SparseError::DimensionMismatch(format!(
            "rhs length {} does not match matrix size {}",
            rhs.len(),
            matrix.nrows()
        )));
    }

    let triplets: Vec<Triplet<usize, usize, f64>> = matrix
        .triplets()
        .into_iter()
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(
        matrix.nrows(),
        matrix.ncols(),
        &triplets,
    )
    .map_err(|e| SparseError::Singular(format!("sparse assembly failed: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| SparseError::Singular(format!("LU factorization failed: {e:?}")))?;

    let n = matrix.nrows();
    let rhs_mat = faer::Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let sol = lu.solve(&rhs_mat);
    let mut x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();

    // One refinement pass tightens the residual to near round-off.
    let mut residual = vec![0.0; n];
    matrix.mul_vec_into(&x, &mut residual);
    for i in 0..n {
        residual[i] = rhs[i] - residual[i];
    }
    let res_mat = faer::Mat::<f64>::from_fn(n, 1, |i, _| residual[i]);
    let corr = lu.solve(&res_mat);
    for i in 0..n {
        x[i] += corr[(i, 0)];
    }

    if x.iter().any(|v| !v.is_finite()) {
        return Err(SparseError::Singular(
            "LU solve produced non-finite entries".into(),
        ));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 4.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 1), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn matvec_and_transpose() {
        // [[1, 2], [0, 3], [4, 0]]
        let m = CsrMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0), (2, 0, 4.0)]);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, 3.0, 4.0]);
        assert_eq!(m.tr_mul_vec(&[1.0, 1.0, 1.0]), vec![5.0, 5.0]);
    }

    #[test]
    fn cg_solves_spd() {
        let m = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 4.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 1, 3.0),
                (2, 2, 2.0),
            ],
        );
        let b = vec![1.0, 2.0, 3.0];
        let (x, stats) = pcg(
            |v, out| m.mul_vec_into(v, out),
            |v, out| out.copy_from_slice(v),
            &b,
            1e-14,
            100,
        )
        .unwrap();
        let r = m.mul_vec(&x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
        assert!(stats.relative_residual <= 1e-14);
    }

    #[test]
    fn minres_solves_indefinite() {
        // [[2, 1], [1, 0]] is symmetric indefinite.
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let b = vec![3.0, 1.0];
        let (x, _) = minres(
            |v, out| m.mul_vec_into(v, out),
            |v, out| out.copy_from_slice(v),
            &b,
            1e-12,
            200,
        )
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10);
        assert!((x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn direct_matches_minres() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)],
        );
        let b = vec![3.0, 1.0];
        let x = direct_solve(&m, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direct_rejects_singular() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]);
        assert!(direct_solve(&m, &[1.0, 1.0]).is_err());
    }
}
