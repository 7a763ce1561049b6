//! Semismooth Newton-CG for the `(y, ybar, S)` subproblem of the second
//! phase, in scaled coordinates.
//!
//! With `(Z, v, X, s)` fixed and `S` eliminated as `Π_K(-G)`, the subproblem
//! reduces to minimizing
//! `φ(w) = -<b, y> + σ/2 ||Π_K(G)||^2 + σ/2 ||v - ybar + s/σ||^2`,
//! `G = A^*y + B^*ybar + Z - C + X/σ`, a convex `C^1` function with strongly
//! semismooth gradient.

use nalgebra::DVector;

use crate::cone::{self, Projection};
use crate::engine::Engine;
use crate::error::SolveError;
use crate::linalg::{pcg_solve, LinalgError};
use crate::params::SncgSettings;
use crate::residuals::IterateState;

/// The reduced function at fixed `(Z, v, X, s, σ)`.
#[derive(Debug, Clone)]
pub struct ReducedFunction<'a> {
    eng: &'a Engine,
    sigma: f64,
    /// `Z - C + X/σ`.
    g0: DVector<f64>,
    v: DVector<f64>,
    s: DVector<f64>,
}

/// Value, gradient and the projection data at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad: DVector<f64>,
    /// `G(w)`.
    pub g: DVector<f64>,
    pub proj: Projection,
}

impl<'a> ReducedFunction<'a> {
    pub fn new(eng: &'a Engine, st: &IterateState, z: &DVector<f64>, v: &DVector<f64>, sigma: f64) -> Self {
        let g0 = z - &eng.prob.c + &st.x.data / sigma;
        Self { eng, sigma, g0, v: v.clone(), s: st.s.clone() }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn evaluate(&self, w: &DVector<f64>) -> Result<Evaluation, LinalgError> {
        let eng = self.eng;
        let (m, p) = (eng.m(), eng.p());
        let sigma = self.sigma;
        let g = eng.kt(w.as_slice()) + &self.g0;
        let proj = Projection::new(&eng.prob.blk, g.as_slice())?;
        let pn2: f64 = proj.value.iter().map(|x| x * x).sum();
        let mut value = -eng.prob.b.dot(&w.rows(0, m)) + 0.5 * sigma * pn2;
        let mut grad = eng.k(&proj.value) * sigma;
        for k in 0..m {
            grad[k] -= eng.prob.b[k];
        }
        for j in 0..p {
            let yb = w[m + j];
            let r = self.v[j] - yb + self.s[j] / sigma;
            value += 0.5 * sigma * r * r;
            grad[m + j] += sigma * (yb - self.v[j]) - self.s[j];
        }
        if !value.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        Ok(Evaluation { value, grad, g, proj })
    }

    /// Applies the generalized Hessian `σ K J K^* + σ diag(0, I)` at the
    /// evaluation point to `d`.
    pub fn hess_apply(&self, at: &Evaluation, d: &DVector<f64>) -> DVector<f64> {
        let eng = self.eng;
        let m = eng.m();
        let kd = eng.kt(d.as_slice());
        let jd = at.proj.jac_apply(&eng.prob.blk, kd.as_slice());
        let mut out = eng.k(&jd) * self.sigma;
        for j in m..d.len() {
            out[j] += self.sigma * d[j];
        }
        out
    }

    /// `S = Π_K(-G)`, computed as `Π_K(G) - G`.
    pub fn dual_s(&self, at: &Evaluation) -> DVector<f64> {
        DVector::from_iterator(at.g.len(), at.proj.value.iter().zip(at.g.iter()).map(|(p, g)| p - g))
    }
}

#[derive(Debug, Clone)]
pub struct SncgOutcome {
    pub w: DVector<f64>,
    pub dual_s: DVector<f64>,
    /// `||grad|| / sqrt(σ)` at `w`.
    pub achieved: f64,
    pub converged: bool,
    pub newton_steps: usize,
    pub cg_iters: usize,
}

/// Newton-CG with Armijo backtracking, stopping at `||grad|| / sqrt(σ) <= eps`.
pub fn sncg_solve(
    rf: &ReducedFunction<'_>,
    w0: DVector<f64>,
    eps: f64,
    settings: &SncgSettings,
) -> Result<SncgOutcome, SolveError> {
    let sigma = rf.sigma;
    let rs = sigma.sqrt();
    let mut w = w0;
    let mut ev = rf.evaluate(&w)?;
    let mut cg_iters = 0;
    let precond = rf.eng.diag() * sigma;
    for newton in 0..settings.max_newton {
        let gnorm = ev.grad.norm();
        let achieved = gnorm / rs;
        if achieved <= eps {
            return Ok(SncgOutcome { dual_s: rf.dual_s(&ev), w, achieved, converged: true, newton_steps: newton, cg_iters });
        }
        let ridge = sigma * settings.ridge_floor.max((0.1 * gnorm).min(1e-3));
        let rel = settings.cg_cap.min(gnorm.powf(settings.cg_exponent));
        let rhs = -&ev.grad;
        let apply = |d: &DVector<f64>| rf.hess_apply(&ev, d) + d * ridge;
        let pre = precond.add_scalar(ridge);
        let mut dir = match pcg_solve(apply, &rhs, &pre, rel * gnorm, settings.cg_maxit, None) {
            Ok(o) => {
                cg_iters += o.iterations;
                o.x
            }
            Err(LinalgError::Breakdown { iteration, .. }) => {
                cg_iters += iteration;
                rhs.component_div(&pre)
            }
            Err(e) => return Err(e.into()),
        };
        let mut slope = ev.grad.dot(&dir);
        if !(slope < 0.0) {
            dir = rhs.component_div(&pre);
            slope = ev.grad.dot(&dir);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let trial = &w + &dir * alpha;
            let tev = rf.evaluate(&trial)?;
            if tev.value <= ev.value + settings.armijo * alpha * slope {
                accepted = Some((trial, tev));
                break;
            }
            alpha *= settings.backtrack;
        }
        match accepted {
            Some((trial, tev)) => {
                w = trial;
                ev = tev;
            }
            None => {
                let achieved = ev.grad.norm() / rs;
                return Ok(SncgOutcome { dual_s: rf.dual_s(&ev), w, achieved, converged: false, newton_steps: newton + 1, cg_iters });
            }
        }
    }
    let achieved = ev.grad.norm() / rs;
    Ok(SncgOutcome {
        dual_s: rf.dual_s(&ev),
        w,
        converged: achieved <= eps,
        achieved,
        newton_steps: settings.max_newton,
        cg_iters,
    })
}

/// The projection `Π_K(-G)` for the given `w`, for callers that only need `S`.
pub fn eliminated_s(rf: &ReducedFunction<'_>, w: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    let g = rf.eng.kt(w.as_slice()) + &rf.g0;
    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
    Ok(DVector::from_vec(cone::project(&rf.eng.prob.blk, &neg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Block, BlockStructure, ProblemData, SparseCols};
    use crate::params::AatMethod;
    use crate::scaling::ScaledProblem;

    #[test]
    fn scalar_subproblem_closed_form() {
        // One 1x1 block, A = 1, b = 2, C = 0.5, X = 0, Z = 0, σ = 1:
        // φ(y) = -2y + max(y - 0.5, 0)^2 / 2  -> y* = 2.5.
        let blk = BlockStructure::new(vec![Block::psd(1)]).unwrap();
        let at = SparseCols::from_triplets(1, 1, vec![(0, 0, 1.0)]).unwrap();
        let data = ProblemData::new(blk, at, vec![0.5], vec![2.0]);
        let eng = Engine::new(ScaledProblem::new(&data, false), AatMethod::Direct, 10);
        let st = IterateState::zeros(&data);
        let rf = ReducedFunction::new(&eng, &st, &DVector::zeros(1), &DVector::zeros(0), 1.0);
        let out = sncg_solve(&rf, DVector::zeros(1), 1e-13, &SncgSettings::default()).unwrap();
        assert!(out.converged);
        assert!((out.w[0] - 2.5).abs() < 1e-12);
        assert!(out.dual_s[0].abs() < 1e-12);
        let again = sncg_solve(&rf, out.w.clone(), 1e-13, &SncgSettings::default()).unwrap();
        assert_eq!(again.newton_steps, 0);
    }
}
