//! Dense symmetric kernels: svec/smat, eigendecomposition, cone and box
//! projections, and the two linear solvers used on the normal equations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Relative asymmetry accepted by [`svec`] before it refuses the input.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix dimension is zero")]
    ZeroDimension,
    #[error("matrix is not symmetric (max |X - X^T| = {max_dev:e})")]
    Asymmetric { max_dev: f64 },
    #[error("vector length {len} is not a triangular number")]
    NotTriangular { len: usize },
    #[error("input contains non-finite entries")]
    NonFinite,
    #[error("lower bound exceeds upper bound at index {index}")]
    BoundsCrossed { index: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("conjugate gradient breakdown at iteration {iteration} (curvature {curvature:e})")]
    Breakdown { iteration: usize, curvature: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// `n(n+1)/2`.
#[inline]
pub fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Inverse of [`tri`], if `len` is triangular.
pub fn tri_root(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (n..=n + 1).find(|&k| tri(k) == len)
}

/// Position of entry `(i, j)` (any order) in the svec layout of an `n x n` matrix.
#[inline]
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Row/column pair of svec position `t`, upper triangle (`i <= j`).
pub fn svec_pair(t: usize) -> (usize, usize) {
    let mut j = tri_root_floor(t);
    while tri(j + 1) <= t {
        j += 1;
    }
    (t - tri(j), j)
}

fn tri_root_floor(t: usize) -> usize {
    let j = (((8 * t + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    if tri(j) > t {
        j.saturating_sub(1)
    } else {
        j
    }
}

fn max_asymmetry(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let mut dev = 0.0_f64;
    for j in 0..n {
        for i in 0..j {
            dev = dev.max((x[(i, j)] - x[(j, i)]).abs());
        }
    }
    dev
}

/// Symmetric vectorization: column-major upper triangle, off-diagonals scaled by `sqrt(2)`.
///
/// Inputs asymmetric within [`SYMMETRY_TOL`] (relative to the largest entry) are
/// symmetrized first.
pub fn svec(x: &DMatrix<f64>) -> Result<DVector<f64>, LinalgError> {
    let n = x.nrows();
    if n == 0 {
        return Err(LinalgError::ZeroDimension);
    }
    if x.ncols() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: x.ncols() });
    }
    let scale = x.amax().max(1.0);
    let dev = max_asymmetry(x);
    if !(dev <= SYMMETRY_TOL * scale) {
        return Err(LinalgError::Asymmetric { max_dev: dev });
    }
    let mut out = DVector::zeros(tri(n));
    svec_into(x, out.as_mut_slice());
    Ok(out)
}

/// Unchecked svec of the symmetric part of `x` into `out`.
pub(crate) fn svec_into(x: &DMatrix<f64>, out: &mut [f64]) {
    let n = x.nrows();
    let mut t = 0;
    for j in 0..n {
        for i in 0..j {
            out[t] = SQRT2 * 0.5 * (x[(i, j)] + x[(j, i)]);
            t += 1;
        }
        out[t] = x[(j, j)];
        t += 1;
    }
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64]) -> Result<DMatrix<f64>, LinalgError> {
    let n = tri_root(v.len()).ok_or(LinalgError::NotTriangular { len: v.len() })?;
    if n == 0 {
        return Err(LinalgError::ZeroDimension);
    }
    Ok(smat_unchecked(v, n))
}

pub(crate) fn smat_unchecked(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, n);
    let mut t = 0;
    for j in 0..n {
        for i in 0..j {
            let e = v[t] / SQRT2;
            x[(i, j)] = e;
            x[(j, i)] = e;
            t += 1;
        }
        x[(j, j)] = v[t];
        t += 1;
    }
    x
}

/// Eigenvalues sorted descending with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigDecomp {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let q = &self.vectors;
        let mut scaled = q.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.values[k];
        }
        scaled * q.transpose()
    }

    /// Number of strictly positive eigenvalues.
    pub fn positive_count(&self) -> usize {
        self.values.iter().filter(|&&l| l > 0.0).count()
    }
}

/// Source of symmetric eigendecompositions. The solver only ever uses
/// [`FullEigen`]; a partial (top-k) method can be plugged in here.
pub trait EigenBackend {
    fn decompose(&self, x: &DMatrix<f64>) -> Result<EigDecomp, LinalgError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FullEigen;

impl EigenBackend for FullEigen {
    fn decompose(&self, x: &DMatrix<f64>) -> Result<EigDecomp, LinalgError> {
        sym_eig(x)
    }
}

/// Full symmetric eigendecomposition (implicit-shift QR on the tridiagonal form).
pub fn sym_eig(x: &DMatrix<f64>) -> Result<EigDecomp, LinalgError> {
    let n = x.nrows();
    if n == 0 {
        return Err(LinalgError::ZeroDimension);
    }
    if x.ncols() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: x.ncols() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let sym = (x + x.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let (raw_values, raw_vectors) = jacobi_polish(&sym, eig.eigenvectors);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_values[b].total_cmp(&raw_values[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| raw_values[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &raw_vectors.column(src));
    }
    Ok(EigDecomp { values, vectors })
}

/// Cyclic Jacobi sweeps on `Q^T X Q` until its off-diagonal part is at
/// rounding level. The QR iteration alone leaves residuals near `1e-10 ||X||`.
fn jacobi_polish(x: &DMatrix<f64>, mut q: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let mut b = q.transpose() * x * &q;
    let scale = x.norm().max(f64::MIN_POSITIVE);
    let target = 1e-15 * scale * (n as f64).sqrt();
    for _ in 0..6 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += b[(i, j)] * b[(i, j)];
            }
        }
        if off.sqrt() <= target {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = b[(p, r)];
                if apr.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (b[(r, r)] - b[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (bkp, bkr) = (b[(k, p)], b[(k, r)]);
                    b[(k, p)] = c * bkp - s * bkr;
                    b[(k, r)] = s * bkp + c * bkr;
                }
                for k in 0..n {
                    let (bpk, brk) = (b[(p, k)], b[(r, k)]);
                    b[(p, k)] = c * bpk - s * brk;
                    b[(r, k)] = s * bpk + c * brk;
                }
                for k in 0..n {
                    let (qkp, qkr) = (q[(k, p)], q[(k, r)]);
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }
    ((0..n).map(|i| b[(i, i)]).collect(), q)
}

/// Projection onto the PSD cone, `Q max(L, 0) Q^T`. The decomposition is
/// returned for reuse by the generalized Jacobian.
pub fn proj_psd(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, EigDecomp), LinalgError> {
    proj_psd_with(&FullEigen, x)
}

pub fn proj_psd_with(
    backend: &dyn EigenBackend,
    x: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, EigDecomp), LinalgError> {
    let eig = backend.decompose(x)?;
    Ok((psd_part(&eig), eig))
}

/// `Q max(L, 0) Q^T` for an existing decomposition.
pub fn psd_part(eig: &EigDecomp) -> DMatrix<f64> {
    let n = eig.values.len();
    let r = eig.positive_count();
    if r == 0 {
        return DMatrix::zeros(n, n);
    }
    let q = eig.vectors.columns(0, r);
    let mut scaled = q.clone_owned();
    for k in 0..r {
        scaled.column_mut(k).scale_mut(eig.values[k]);
    }
    let p = scaled * q.transpose();
    (&p + p.transpose()) * 0.5
}

/// Elementwise median of `(lo, x, hi)`; `None` bounds are infinite.
pub fn proj_box(
    x: &[f64],
    lo: Option<&[f64]>,
    hi: Option<&[f64]>,
) -> Result<Vec<f64>, LinalgError> {
    for bound in [lo, hi].into_iter().flatten() {
        if bound.len() != x.len() {
            return Err(LinalgError::DimensionMismatch { expected: x.len(), found: bound.len() });
        }
    }
    if let (Some(l), Some(u)) = (lo, hi) {
        if let Some(index) = l.iter().zip(u).position(|(a, b)| a > b) {
            return Err(LinalgError::BoundsCrossed { index });
        }
    }
    let mut out = x.to_vec();
    clamp_in_place(&mut out, lo, hi);
    Ok(out)
}

pub(crate) fn clamp_in_place(x: &mut [f64], lo: Option<&[f64]>, hi: Option<&[f64]>) {
    if let Some(l) = lo {
        for (v, &b) in x.iter_mut().zip(l) {
            if *v < b {
                *v = b;
            }
        }
    }
    if let Some(u) = hi {
        for (v, &b) in x.iter_mut().zip(u) {
            if *v > b {
                *v = b;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Diagonally preconditioned conjugate gradients on a symmetric PSD operator.
///
/// Stops once `||rhs - M x|| <= tol` or after `maxit` iterations; hitting
/// `maxit` is reported through `converged`, non-positive curvature as
/// [`LinalgError::Breakdown`].
pub fn pcg_solve<F>(
    mut apply: F,
    rhs: &DVector<f64>,
    precond: &DVector<f64>,
    tol: f64,
    maxit: usize,
    x0: Option<&DVector<f64>>,
) -> Result<PcgOutcome, LinalgError>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let n = rhs.len();
    if precond.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: precond.len() });
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let inv_diag = precond.map(|d| if d > 0.0 && d.is_finite() { 1.0 / d } else { 1.0 });
    let mut x = match x0 {
        Some(x0) => x0.clone(),
        None => DVector::zeros(n),
    };
    let mut r = if x.iter().any(|&v| v != 0.0) { rhs - apply(&x) } else { rhs.clone() };
    let mut rnorm = r.norm();
    if rnorm <= tol {
        return Ok(PcgOutcome { x, residual_norm: rnorm, iterations: 0, converged: true });
    }
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 1..=maxit {
        let mp = apply(&p);
        let curvature = p.dot(&mp);
        let pnorm2 = p.norm_squared();
        if !(curvature > 1e-30 * pnorm2) {
            return Err(LinalgError::Breakdown { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &mp, 1.0);
        rnorm = r.norm();
        if rnorm <= tol {
            return Ok(PcgOutcome { x, residual_norm: rnorm, iterations: it, converged: true });
        }
        z = r.component_mul(&inv_diag);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + beta * &p;
    }
    Ok(PcgOutcome { x, residual_norm: rnorm, iterations: maxit, converged: false })
}

/// Cached dense Cholesky factor for repeated solves.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl CholeskyFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let chol = nalgebra::Cholesky::new(m.clone()).ok_or(LinalgError::NotPositiveDefinite)?;
        // nalgebra accepts tiny positive pivots; reject numerically singular factors.
        let l = chol.l_dirty();
        let diag_max = (0..m.nrows()).map(|i| l[(i, i)]).fold(0.0_f64, f64::max);
        let diag_min = (0..m.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
        if m.nrows() > 0 && !(diag_min > 1e-10 * diag_max) {
            return Err(LinalgError::NotPositiveDefinite);
        }
        Ok(Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }
}

pub fn chol_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    if rhs.len() != m.nrows() {
        return Err(LinalgError::DimensionMismatch { expected: m.nrows(), found: rhs.len() });
    }
    Ok(CholeskyFactor::new(m)?.solve(rhs))
}
