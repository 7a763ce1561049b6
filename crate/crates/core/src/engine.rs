//! Operators of the scaled problem and the solver for the block normal
//! equations `M [y; ybar] = h` with
//! `M = [A A^*, A B^*; B A^*, B B^* + I]`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{pcg_solve, CholeskyFactor, LinalgError};
use crate::params::AatMethod;
use crate::scaling::ScaledProblem;

#[derive(Debug, Clone)]
enum MSolver {
    Direct(CholeskyFactor),
    Iterative,
}

/// Outcome of one solve with `M`.
#[derive(Debug, Clone)]
pub struct MSolve {
    pub w: DVector<f64>,
    /// `||h - M w||`.
    pub residual: f64,
    pub cg_iters: usize,
}

#[derive(Debug, Clone)]
pub struct Engine {
    pub prob: ScaledProblem,
    solver: MSolver,
    diag: DVector<f64>,
}

impl Engine {
    /// Factorizes `M` when `method` is direct and `m + p <= direct_limit`;
    /// a failed factorization falls back to PCG with a warning.
    pub fn new(prob: ScaledProblem, method: AatMethod, direct_limit: usize) -> Self {
        let (m, p) = (prob.m(), prob.p());
        let mut diag = DVector::zeros(m + p);
        for (k, n) in prob.at.col_norms().into_iter().enumerate() {
            diag[k] = n * n;
        }
        for (j, n) in prob.bt.col_norms().into_iter().enumerate() {
            diag[m + j] = n * n + 1.0;
        }
        for d in diag.iter_mut() {
            if *d <= 0.0 {
                *d = 1.0;
            }
        }
        let mut eng = Self { prob, solver: MSolver::Iterative, diag };
        if method == AatMethod::Direct {
            if m + p <= direct_limit {
                match CholeskyFactor::new(&eng.m_matrix()) {
                    Ok(f) => eng.solver = MSolver::Direct(f),
                    Err(e) => log::warn!("normal-equation factorization failed ({e}); using PCG"),
                }
            } else {
                log::warn!("m + p = {} exceeds the direct-solve limit {direct_limit}; using PCG", m + p);
            }
        }
        eng
    }

    pub fn m(&self) -> usize {
        self.prob.m()
    }

    pub fn p(&self) -> usize {
        self.prob.p()
    }

    pub fn method(&self) -> AatMethod {
        match self.solver {
            MSolver::Direct(_) => AatMethod::Direct,
            MSolver::Iterative => AatMethod::Iterative,
        }
    }

    /// Diagonal of `M`, used as the CG preconditioner.
    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }

    /// `A^* y + B^* ybar` for the stacked `w = [y; ybar]`.
    pub fn kt(&self, w: &[f64]) -> DVector<f64> {
        let m = self.m();
        let mut out = vec![0.0; self.prob.dim()];
        self.prob.at.mul_add(&w[..m], &mut out);
        self.prob.bt.mul_add(&w[m..], &mut out);
        DVector::from_vec(out)
    }

    /// `[A x; B x]`.
    pub fn k(&self, x: &[f64]) -> DVector<f64> {
        let (m, p) = (self.m(), self.p());
        let mut out = DVector::zeros(m + p);
        out.rows_mut(0, m).copy_from(&self.prob.at.tr_mul(x));
        out.rows_mut(m, p).copy_from(&self.prob.bt.tr_mul(x));
        out
    }

    pub fn apply_m(&self, w: &DVector<f64>) -> DVector<f64> {
        let m = self.m();
        let mut out = self.k(self.kt(w.as_slice()).as_slice());
        for j in m..w.len() {
            out[j] += w[j];
        }
        out
    }

    /// Dense `M`, assembled row-wise from the sparse columns.
    pub fn m_matrix(&self) -> DMatrix<f64> {
        let (m, p) = (self.m(), self.p());
        let n = m + p;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.prob.dim()];
        for k in 0..m {
            for (r, v) in self.prob.at.col(k) {
                rows[r].push((k, v));
            }
        }
        for j in 0..p {
            for (r, v) in self.prob.bt.col(j) {
                rows[r].push((m + j, v));
            }
        }
        let mut g = DMatrix::zeros(n, n);
        for row in &rows {
            for &(a, va) in row {
                for &(b, vb) in row {
                    g[(a, b)] += va * vb;
                }
            }
        }
        for j in m..n {
            g[(j, j)] += 1.0;
        }
        g
    }

    /// Solves `M w = h` to `||h - M w|| <= tol` (exactly for the direct method).
    pub fn solve_m(&self, h: &DVector<f64>, tol: f64, x0: Option<&DVector<f64>>) -> Result<MSolve, LinalgError> {
        match &self.solver {
            MSolver::Direct(f) => {
                let w = f.solve(h);
                let residual = (h - self.apply_m(&w)).norm();
                Ok(MSolve { w, residual, cg_iters: 0 })
            }
            MSolver::Iterative => {
                let n = h.len();
                let maxit = (2 * n).clamp(100, 5000);
                let out = match pcg_solve(|d| self.apply_m(d), h, &self.diag, tol, maxit, x0) {
                    Ok(o) => o,
                    Err(LinalgError::Breakdown { .. }) => {
                        pcg_solve(|d| self.apply_m(d), h, &self.diag, tol, maxit, None)?
                    }
                    Err(e) => return Err(e),
                };
                if !out.converged {
                    log::debug!("PCG on M stopped at residual {:.3e} (target {tol:.3e})", out.residual_norm);
                }
                Ok(MSolve { residual: out.residual_norm, cg_iters: out.iterations, w: out.x })
            }
        }
    }
}
