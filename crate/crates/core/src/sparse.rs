//! Symmetric sparse systems and their solvers.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// Default relative residual tolerance for iterative solves.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Target of the default solve; local conservation of the recovered flux is
/// only as good as the algebraic residual, so the solve goes past the tolerance
/// when it can.
pub const POLISH_TOLERANCE: f64 = 1e-14;

/// Largest system solved by the dense fallback.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Jacobi-preconditioned conjugate gradients, with a dense fallback for small systems.
    #[default]
    Auto,
    Pcg,
    Dense,
}

#[derive(Clone, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub dense: bool,
}

/// Accumulates triplets and converts to CSR, summing duplicates in insertion order.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    coo: CooMatrix<f64>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { coo: CooMatrix::new(n, n) }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.coo.push(i, j, v);
        }
    }

    pub fn build(self) -> CsrMatrix<f64> {
        CsrMatrix::from(&self.coo)
    }
}

pub fn matvec(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = 0.0;
        for idx in offsets[i]..offsets[i + 1] {
            s += vals[idx] * x[cols[idx]];
        }
        *yi = s;
    }
}

pub fn diagonal(a: &CsrMatrix<f64>) -> Vec<f64> {
    (0..a.nrows()).map(|i| a.get_entry(i, i).map_or(0.0, |e| e.into_value())).collect()
}

pub fn to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        m[(i, j)] += *v;
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Relative residual `‖b - A x‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    matvec(a, x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let nb = norm(b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

struct PcgOutcome {
    x: Vec<f64>,
    iterations: usize,
    relative_residual: f64,
    converged: bool,
}

// Stops at `tol`, at breakdown, or when a restart from the true residual
// no longer improves on the previous one.
fn pcg_core(a: &CsrMatrix<f64>, b: &[f64], tol: f64, max_iter: usize) -> PcgOutcome {
    let n = b.len();
    let mut x = vec![0.0; n];
    let nb = norm(b);
    if nb == 0.0 {
        return PcgOutcome { x, iterations: 0, relative_residual: 0.0, converged: true };
    }
    let inv_diag: Vec<f64> = diagonal(a).iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut last_restart = f64::INFINITY;
    for it in 1..=max_iter {
        matvec(a, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            let res = relative_residual(a, &x, b);
            return PcgOutcome { x, iterations: it, relative_residual: res, converged: res <= tol };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let mut restart = false;
        if norm(&r) <= tol * nb {
            // the recursive residual drifts from b - Ax; check and restart from the true one
            let true_res = relative_residual(a, &x, b);
            if true_res <= tol || true_res > 0.5 * last_restart {
                return PcgOutcome { x, iterations: it, relative_residual: true_res, converged: true_res <= tol };
            }
            last_restart = true_res;
            matvec(a, &x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            restart = true;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = if restart { 0.0 } else { rz_new / rz };
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = relative_residual(a, &x, b);
    PcgOutcome { x, iterations: max_iter, relative_residual: res, converged: res <= tol }
}

/// Conjugate gradients with a diagonal preconditioner.
pub fn pcg(a: &CsrMatrix<f64>, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let out = pcg_core(a, b, tol, max_iter);
    if !out.converged {
        return Err(Error::SolverFailure { iterations: out.iterations, residual: out.relative_residual });
    }
    Ok((out.x, SolveStats { iterations: out.iterations, relative_residual: out.relative_residual, dense: false }))
}

/// Runs conjugate gradients towards `POLISH_TOLERANCE` and accepts anything
/// below `DEFAULT_TOLERANCE` once progress stalls.
pub fn pcg_polished(a: &CsrMatrix<f64>, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
    let out = pcg_core(a, b, POLISH_TOLERANCE, 10 * b.len().max(1));
    if out.relative_residual > DEFAULT_TOLERANCE {
        return Err(Error::SolverFailure { iterations: out.iterations, residual: out.relative_residual });
    }
    Ok((out.x, SolveStats { iterations: out.iterations, relative_residual: out.relative_residual, dense: false }))
}

/// Dense solve by Cholesky, falling back to LU when the matrix is not numerically SPD.
pub fn dense_solve(a: &CsrMatrix<f64>, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
    let m = to_dense(a);
    let rhs = DVector::from_column_slice(b);
    let sol = match m.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => m.lu().solve(&rhs).ok_or(Error::SolverFailure { iterations: 0, residual: f64::INFINITY })?,
    };
    let x: Vec<f64> = sol.iter().copied().collect();
    let res = relative_residual(a, &x, b);
    Ok((x, SolveStats { iterations: 0, relative_residual: res, dense: true }))
}

pub fn solve(a: &CsrMatrix<f64>, b: &[f64], kind: SolverKind) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::InvalidArgument(format!("system size mismatch: {}x{} vs {}", a.nrows(), a.ncols(), n)));
    }
    match kind {
        SolverKind::Pcg => pcg_polished(a, b),
        SolverKind::Dense => dense_solve(a, b),
        SolverKind::Auto => match pcg_polished(a, b) {
            Ok(r) => Ok(r),
            Err(e) if n <= DENSE_LIMIT => {
                log::warn!("conjugate gradients failed ({e}); using the dense solver");
                dense_solve(a, b)
            }
            Err(e) => Err(e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_dense(rows: &[&[f64]]) -> CsrMatrix<f64> {
        let mut t = TripletBuilder::new(rows.len());
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t.add(i, j, v);
            }
        }
        t.build()
    }

    #[test]
    fn identity_returns_rhs() {
        let a = from_dense(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let (x, _) = solve(&a, &[1.0, -2.0, 3.0], SolverKind::Pcg).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn two_by_two() {
        let a = from_dense(&[&[2.0, 1.0], &[1.0, 2.0]]);
        for kind in [SolverKind::Pcg, SolverKind::Dense, SolverKind::Auto] {
            let (x, stats) = solve(&a, &[3.0, 3.0], kind).unwrap();
            assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
            assert!(stats.relative_residual <= 1e-12);
        }
    }

    #[test]
    fn laplacian_chain() {
        let n = 200;
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            t.add(i, i, 2.0);
            if i > 0 {
                t.add(i, i - 1, -1.0);
                t.add(i - 1, i, -1.0);
            }
        }
        let a = t.build();
        let b = vec![1.0; n];
        let (x, stats) = solve(&a, &b, SolverKind::Pcg).unwrap();
        assert!(relative_residual(&a, &x, &b) <= 1e-12);
        assert!(stats.iterations <= n + 1);
    }

    #[test]
    fn indefinite_matrix_fails_pcg() {
        let a = from_dense(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(matches!(pcg(&a, &[0.0, 1.0], 1e-12, 20), Err(Error::SolverFailure { .. })));
    }

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2);
        t.add(0, 0, 1.0);
        t.add(0, 0, 2.0);
        t.add(1, 1, 1.0);
        let a = t.build();
        assert_eq!(to_dense(&a)[(0, 0)], 3.0);
    }
}
