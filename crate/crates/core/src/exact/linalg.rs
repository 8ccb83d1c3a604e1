//! Sparse symmetric positive definite solves for Dirichlet Laplacians.

use crate::{Error, Result};

/// Domains up to this many vertices are factored directly.
pub const DIRECT_LIMIT: usize = 4000;
/// Required relative residual of every returned solution (infinity norm).
pub const RESIDUAL_TOL: f64 = 1e-10;
const CG_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    /// Direct below [`DIRECT_LIMIT`] vertices, iterative above.
    #[default]
    Auto,
    Direct,
    Iterative,
}

/// Symmetric matrix with a dense diagonal and unit negative off-diagonal
/// entries: `A = diag(d) - adjacency`. Rows are in solver order.
#[derive(Debug, Clone)]
pub struct Laplacian {
    pub diag: Vec<f64>,
    pub offsets: Vec<usize>,
    pub cols: Vec<u32>,
}

impl Laplacian {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.cols[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.len() {
            let s: f64 = self.row(i).iter().map(|&j| x[j as usize]).sum();
            out[i] = self.diag[i] * x[i] - s;
        }
    }

    /// `||A x - b||_inf`
    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.len()];
        self.apply(x, &mut ax);
        ax.iter()
            .zip(b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Cholesky factor stored row by row over each row's envelope.
#[derive(Debug, Clone)]
struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    fn factor(a: &Laplacian) -> Result<Self> {
        let n = a.len();
        let first: Vec<usize> = (0..n)
            .map(|i| {
                a.row(i)
                    .iter()
                    .map(|&j| j as usize)
                    .filter(|&j| j < i)
                    .min()
                    .unwrap_or(i)
            })
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; start[n]];
        for i in 0..n {
            for &j in a.row(i) {
                let j = j as usize;
                if j < i {
                    values[start[i] + j - first[i]] = -1.0;
                }
            }
            values[start[i + 1] - 1] = a.diag[i];
        }
        for i in 0..n {
            let fi = first[i];
            let (lo, hi) = values.split_at_mut(start[i]);
            let row_i = &mut hi[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let row_j = &lo[start[j]..start[j + 1]];
                let mut s = row_i[j - fi];
                for k in fi.max(fj)..j {
                    s -= row_i[k - fi] * row_j[k - fj];
                }
                row_i[j - fi] = s / row_j[j - fj];
            }
            let mut s = row_i[i - fi];
            for k in fi..i {
                s -= row_i[k - fi] * row_i[k - fi];
            }
            if !(s > 0.0) {
                return Err(Error::Numerical {
                    reason: format!("matrix is not positive definite (pivot {i} = {s:e})"),
                    residual: f64::NAN,
                });
            }
            row_i[i - fi] = s.sqrt();
        }
        Ok(Self {
            first,
            start,
            values,
        })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= row[k - fi] * yi;
            }
        }
        y
    }
}

/// A factored (or preconditioned) SPD system ready for repeated solves.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    matrix: Laplacian,
    method: Method,
}

#[derive(Debug, Clone)]
enum Method {
    Direct(EnvelopeCholesky),
    Iterative,
}

impl SpdSolver {
    pub fn new(matrix: Laplacian, choice: SolverChoice) -> Result<Self> {
        let direct = match choice {
            SolverChoice::Auto => matrix.len() <= DIRECT_LIMIT,
            SolverChoice::Direct => true,
            SolverChoice::Iterative => false,
        };
        let method = if direct {
            Method::Direct(EnvelopeCholesky::factor(&matrix)?)
        } else {
            Method::Iterative
        };
        Ok(Self { matrix, method })
    }

    pub fn matrix(&self) -> &Laplacian {
        &self.matrix
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.method, Method::Direct(_))
    }

    /// Solve `A x = b`, failing unless `||A x - b||_inf <= 1e-10 ||b||_inf`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.matrix.len());
        let x = match &self.method {
            Method::Direct(f) => f.solve(b),
            Method::Iterative => conjugate_gradient(&self.matrix, b)?,
        };
        let res = self.matrix.residual(&x, b);
        let scale = b
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let rel = res / scale;
        if !(rel <= RESIDUAL_TOL) {
            return Err(Error::Numerical {
                reason: "residual check failed".into(),
                residual: rel,
            });
        }
        Ok(x)
    }
}

/// Jacobi-preconditioned conjugate gradients, at most `10 n` iterations.
fn conjugate_gradient(a: &Laplacian, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&a.diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iter = 10 * n.max(1);
    let mut rel = 1.0;
    for _ in 0..max_iter {
        a.apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Numerical {
                reason: "matrix is not positive definite".into(),
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
        if rel <= CG_TOL {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / a.diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numerical {
        reason: format!("conjugate gradients did not converge in {max_iter} iterations"),
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path of `n` vertices, both ends attached to a killing boundary.
    fn path(n: usize) -> Laplacian {
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        for i in 0..n {
            if i > 0 {
                cols.push(i as u32 - 1);
            }
            if i + 1 < n {
                cols.push(i as u32 + 1);
            }
            offsets.push(cols.len());
        }
        Laplacian {
            diag: vec![2.0; n],
            offsets,
            cols,
        }
    }

    #[test]
    fn path_exit_times_are_quadratic() {
        // u(i) = (i + 1)(n - i) solves the discrete Poisson problem on a path
        let n = 40;
        for choice in [SolverChoice::Direct, SolverChoice::Iterative] {
            let s = SpdSolver::new(path(n), choice).unwrap();
            let u = s.solve(&vec![2.0; n]).unwrap();
            for (i, ui) in u.iter().enumerate() {
                let exact = ((i + 1) * (n - i)) as f64;
                assert!((ui - exact).abs() < 1e-9 * exact, "{i}: {ui} vs {exact}");
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        // a closed two-vertex component: diag equals degree, no killing
        let a = Laplacian {
            diag: vec![1.0, 1.0],
            offsets: vec![0, 1, 2],
            cols: vec![1, 0],
        };
        assert!(matches!(
            SpdSolver::new(a, SolverChoice::Direct),
            Err(Error::Numerical { .. })
        ));
    }

    #[test]
    fn direct_and_iterative_agree() {
        let n = 25;
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 1.0).collect();
        let x1 = SpdSolver::new(path(n), SolverChoice::Direct)
            .unwrap()
            .solve(&b)
            .unwrap();
        let x2 = SpdSolver::new(path(n), SolverChoice::Iterative)
            .unwrap()
            .solve(&b)
            .unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
