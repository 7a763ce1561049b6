//! Steps of the symmetric Gauss-Seidel semi-proximal ADMM on the augmented
//! Lagrangian of the dual, in scaled coordinates.
//!
//! One iteration updates `(Z, v)` in closed form, then `y/ybar`, `S`,
//! `y/ybar` again (the Gauss-Seidel sweep), then the multipliers `(X, s)`.

use nalgebra::DVector;

use crate::cone;
use crate::engine::Engine;
use crate::error::SolveError;
use crate::residuals::IterateState;

/// `min { d*(-z) + σ/2 ||z + w||^2 }` over one coordinate of a box: the
/// closed form `clamp(σw, lo, hi)/σ - w`, written so that coordinates with
/// `σw` inside the box give exactly zero.
#[inline]
fn box_dual_update(w: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let t = sigma * w;
    if t < lo {
        lo / sigma - w
    } else if t > hi {
        hi / sigma - w
    } else {
        0.0
    }
}

/// Step 1: new `(Z, v)` given `R1 - Z = A^*y + B^*ybar + S - C + X/σ` and
/// `R2 - v = -ybar + s/σ`. `Z` stays zero when `X` is unbounded.
pub fn step1_zv(eng: &Engine, st: &IterateState, sigma: f64) -> (DVector<f64>, DVector<f64>) {
    let prob = &eng.prob;
    let dim = prob.dim();
    let mut z = DVector::zeros(dim);
    if prob.has_bounds() {
        let mut w = eng.kt(&stack(&st.y, &st.ybar));
        w += &st.dual_s.data - &prob.c + &st.x.data / sigma;
        for t in 0..dim {
            let lo = prob.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l[t]);
            let hi = prob.upper.as_ref().map_or(f64::INFINITY, |u| u[t]);
            z[t] = box_dual_update(w[t], sigma, lo, hi);
        }
    }
    let p = prob.p();
    let mut v = DVector::zeros(p);
    for j in 0..p {
        let w = -st.ybar[j] + st.s[j] / sigma;
        v[j] = box_dual_update(w, sigma, prob.l[j], prob.u[j]);
    }
    (z, v)
}

pub fn stack(y: &DVector<f64>, ybar: &DVector<f64>) -> Vec<f64> {
    y.iter().chain(ybar.iter()).copied().collect()
}

/// Result of the Gauss-Seidel sweep over `(y, ybar)`, `S`, `(y, ybar)`.
#[derive(Debug, Clone)]
pub struct SgsOutcome {
    pub w: DVector<f64>,
    pub dual_s: DVector<f64>,
    /// Whether the second `(y, ybar)` solve was performed.
    pub resolved: bool,
    /// `sqrt(σ) ||h - M w||` of the returned `w`.
    pub achieved: f64,
    pub cg_iters: usize,
}

/// Right-hand side of Step 2a for a given `S`.
pub fn step2_rhs(eng: &Engine, st: &IterateState, dual_s: &DVector<f64>, z: &DVector<f64>, v: &DVector<f64>, sigma: f64) -> DVector<f64> {
    let prob = &eng.prob;
    let m = prob.m();
    let t = dual_s + z - &prob.c + &st.x.data / sigma;
    let mut h = -eng.k(t.as_slice());
    for k in 0..m {
        h[k] += prob.b[k] / sigma;
    }
    for j in 0..prob.p() {
        h[m + j] += v[j] + st.s[j] / sigma;
    }
    h
}

/// Steps 2a-2c. Solves the normal equations to `sqrt(σ) ||h - M w|| <= eps`,
/// projects for `S`, and keeps the first solution when it still satisfies
/// the test with `10 eps` for the updated right-hand side.
pub fn step2_sgs(
    eng: &Engine,
    st: &IterateState,
    z: &DVector<f64>,
    v: &DVector<f64>,
    sigma: f64,
    eps: f64,
) -> Result<SgsOutcome, SolveError> {
    let prob = &eng.prob;
    let rs = sigma.sqrt();
    let h = step2_rhs(eng, st, &st.dual_s.data, z, v, sigma);
    let w0 = DVector::from_vec(stack(&st.y, &st.ybar));
    let first = eng.solve_m(&h, eps / rs, Some(&w0))?;
    let mut cg_iters = first.cg_iters;

    let g = eng.kt(first.w.as_slice()) + z - &prob.c + &st.x.data / sigma;
    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
    let dual_s = DVector::from_vec(cone::project(&prob.blk, &neg)?);

    let delta = &dual_s - &st.dual_s.data;
    let hnew = &h - eng.k(delta.as_slice());
    let res_keep = rs * (&hnew - eng.apply_m(&first.w)).norm();
    if res_keep <= 10.0 * eps {
        return Ok(SgsOutcome { w: first.w, dual_s, resolved: false, achieved: res_keep, cg_iters });
    }
    let second = eng.solve_m(&hnew, eps / rs, Some(&first.w))?;
    cg_iters += second.cg_iters;
    Ok(SgsOutcome { achieved: rs * second.residual, w: second.w, dual_s, resolved: true, cg_iters })
}

/// Step 3: `X += τσ R_D1`, `s += τσ R_D2`.
pub fn step3_multipliers(eng: &Engine, st: &mut IterateState, sigma: f64, tau: f64) {
    let prob = &eng.prob;
    let rd1 = eng.kt(&stack(&st.y, &st.ybar)) + &st.dual_s.data + &st.z.data - &prob.c;
    st.x.data += rd1 * (tau * sigma);
    let rd2 = &st.v - &st.ybar;
    st.s += rd2 * (tau * sigma);
}

/// Writes a Step-2 outcome into the state.
pub fn accept(eng: &Engine, st: &mut IterateState, z: DVector<f64>, v: DVector<f64>, out: SgsOutcome) {
    let m = eng.m();
    st.z.data = z;
    st.v = v;
    st.y = out.w.rows(0, m).into_owned();
    st.ybar = out.w.rows(m, eng.p()).into_owned();
    st.dual_s.data = out.dual_s;
}

/// One full iteration; returns the Step-2 outcome for bookkeeping.
pub fn iterate(eng: &Engine, st: &mut IterateState, sigma: f64, tau: f64, eps: f64) -> Result<SgsOutcome, SolveError> {
    let (z, v) = step1_zv(eng, st, sigma);
    let out = step2_sgs(eng, st, &z, &v, sigma, eps)?;
    accept(eng, st, z, v, out.clone());
    step3_multipliers(eng, st, sigma, tau);
    Ok(out)
}
