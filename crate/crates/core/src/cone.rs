//! Cone operations on flat svec-coordinate vectors: projection onto the
//! product of PSD cones and nonnegative orthants, and an element of the
//! Clarke generalized Jacobian of that projection.

use nalgebra::DMatrix;

use crate::linalg::{self, EigDecomp, LinalgError};
use crate::model::{BlockKind, BlockStructure};

/// `Π_K(x)` over all blocks.
pub fn project(blk: &BlockStructure, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let mut out = vec![0.0; x.len()];
    for j in 0..blk.len() {
        let b = blk.block(j);
        let r = blk.range(j);
        match b.kind {
            BlockKind::Psd => {
                let m = linalg::smat_unchecked(&x[r.clone()], b.size);
                let (p, _) = linalg::proj_psd(&m)?;
                linalg::svec_into(&p, &mut out[r]);
            }
            BlockKind::Linear => {
                for t in r {
                    out[t] = x[t].max(0.0);
                }
            }
        }
    }
    Ok(out)
}

/// Per-block data needed to apply the generalized Jacobian at a point.
#[derive(Debug, Clone)]
enum BlockJac {
    Psd { q: DMatrix<f64>, omega: DMatrix<f64>, rank: usize },
    Linear { d: Vec<f64> },
}

/// Projection of a point together with a Jacobian element at that point.
#[derive(Debug, Clone)]
pub struct Projection {
    pub value: Vec<f64>,
    jac: Vec<BlockJac>,
}

/// First-divided-difference matrix of `max(·, 0)` over eigenvalues sorted in
/// descending order. Ties: 1 for positive, 0 for negative, 1/2 at zero.
pub fn omega(values: &[f64]) -> DMatrix<f64> {
    let n = values.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (values[i], values[j]);
        match (a > 0.0, b > 0.0) {
            (true, true) => 1.0,
            (false, false) => {
                if a == 0.0 && b == 0.0 {
                    0.5
                } else {
                    0.0
                }
            }
            (true, false) => a / (a - b),
            (false, true) => b / (b - a),
        }
    })
}

impl Projection {
    pub fn new(blk: &BlockStructure, x: &[f64]) -> Result<Self, LinalgError> {
        let mut value = vec![0.0; x.len()];
        let mut jac = Vec::with_capacity(blk.len());
        for j in 0..blk.len() {
            let b = blk.block(j);
            let r = blk.range(j);
            match b.kind {
                BlockKind::Psd => {
                    let m = linalg::smat_unchecked(&x[r.clone()], b.size);
                    let (p, eig): (DMatrix<f64>, EigDecomp) = linalg::proj_psd(&m)?;
                    linalg::svec_into(&p, &mut value[r]);
                    let rank = eig.positive_count();
                    jac.push(BlockJac::Psd { omega: omega(eig.values.as_slice()), q: eig.vectors, rank });
                }
                BlockKind::Linear => {
                    let d = x[r.clone()]
                        .iter()
                        .map(|&v| if v > 0.0 { 1.0 } else if v < 0.0 { 0.0 } else { 0.5 })
                        .collect();
                    for t in r {
                        value[t] = x[t].max(0.0);
                    }
                    jac.push(BlockJac::Linear { d });
                }
            }
        }
        Ok(Self { value, jac })
    }

    /// Applies the Jacobian element to a direction `h` (svec coordinates).
    pub fn jac_apply(&self, blk: &BlockStructure, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; h.len()];
        for (j, bj) in self.jac.iter().enumerate() {
            let r = blk.range(j);
            match bj {
                BlockJac::Psd { q, omega, rank } => {
                    if *rank == 0 {
                        continue;
                    }
                    let n = q.nrows();
                    let hm = linalg::smat_unchecked(&h[r.clone()], n);
                    let ht = q.transpose() * &hm * q;
                    let w = ht.component_mul(omega);
                    let res = q * w * q.transpose();
                    linalg::svec_into(&res, &mut out[r]);
                }
                BlockJac::Linear { d } => {
                    for (k, t) in r.enumerate() {
                        out[t] = d[k] * h[t];
                    }
                }
            }
        }
        out
    }
}
