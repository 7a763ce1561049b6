//! KKT residuals, duality gap and the stopping decision.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cone;
use crate::error::SolveError;
use crate::model::{BlockVars, ProblemData, SparseCols};
use crate::params::SolverParams;

/// Primal and dual variables of the problem pair, in svec coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: BlockVars,
    pub s: DVector<f64>,
    pub y: DVector<f64>,
    pub ybar: DVector<f64>,
    /// Dual slack on the cone `K`.
    pub dual_s: BlockVars,
    /// Multiplier of the bound `L <= X <= U`; zero where `X` is unbounded.
    pub z: BlockVars,
    pub v: DVector<f64>,
}

impl IterateState {
    /// The all-zero starting point.
    pub fn zeros(data: &ProblemData) -> Self {
        let p = data.p();
        Self {
            x: BlockVars::zeros(&data.blk),
            s: DVector::zeros(p),
            y: DVector::zeros(data.m()),
            ybar: DVector::zeros(p),
            dual_s: BlockVars::zeros(&data.blk),
            z: BlockVars::zeros(&data.blk),
            v: DVector::zeros(p),
        }
    }

    pub fn check_shape(&self, data: &ProblemData) -> Result<(), SolveError> {
        let dim = data.blk.dim();
        let (m, p) = (data.m(), data.p());
        let ok = self.x.data.len() == dim
            && self.dual_s.data.len() == dim
            && self.z.data.len() == dim
            && self.y.len() == m
            && self.s.len() == p
            && self.ybar.len() == p
            && self.v.len() == p;
        if !ok {
            return Err(SolveError::Shape(format!("state does not match dim={dim}, m={m}, p={p}")));
        }
        let finite = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        if ![&self.x.data, &self.dual_s.data, &self.z.data, &self.y, &self.s, &self.ybar, &self.v].into_iter().all(finite) {
            return Err(SolveError::NonFinite);
        }
        Ok(())
    }
}

/// Relative KKT residuals and objective values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_k: f64,
    pub eta_pbound: f64,
    /// `max(eta_p, eta_d, eta_k, eta_pbound)`.
    pub eta: f64,
    pub eta_g: f64,
    pub pobj: f64,
    pub dobj: f64,
}

/// `sup { <g, w> : lo <= w <= hi }` with `0 * inf = 0`; `+inf` when unbounded.
pub fn support_box(g: &[f64], lo: Option<&[f64]>, hi: Option<&[f64]>) -> f64 {
    let mut total = 0.0;
    for (t, &gt) in g.iter().enumerate() {
        let term = if gt > 0.0 {
            gt * hi.map_or(f64::INFINITY, |h| h[t])
        } else if gt < 0.0 {
            gt * lo.map_or(f64::NEG_INFINITY, |l| l[t])
        } else {
            0.0
        };
        total += term;
    }
    total
}

/// Relative gap `|pobj - dobj| / (1 + |pobj| + |dobj|)`; 1 when `dobj` is infinite.
pub fn relative_gap(pobj: f64, dobj: f64) -> f64 {
    if !dobj.is_finite() || !pobj.is_finite() {
        return 1.0;
    }
    (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs())
}

fn svec_scaled(op: &SparseCols, scale: &[f64]) -> SparseCols {
    op.scaled(scale, &vec![1.0; op.ncols()])
}

fn clamp(x: f64, lo: Option<&[f64]>, hi: Option<&[f64]>, t: usize) -> f64 {
    let mut v = x;
    if let Some(h) = hi {
        v = v.min(h[t]);
    }
    if let Some(l) = lo {
        v = v.max(l[t]);
    }
    v
}

/// Precomputed operator data for repeated residual evaluation.
#[derive(Debug, Clone)]
pub struct ResidualEvaluator<'a> {
    data: &'a ProblemData,
    at: SparseCols,
    bt: SparseCols,
    c: DVector<f64>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    bnorm: f64,
    cnorm: f64,
}

impl<'a> ResidualEvaluator<'a> {
    pub fn new(data: &'a ProblemData) -> Self {
        let scale = data.blk.coord_scale();
        let (lower, upper) = data.bounds_svec();
        let c = data.c_svec().data;
        Self {
            at: svec_scaled(&data.at, &scale),
            bt: svec_scaled(&data.bt, &scale),
            cnorm: c.norm(),
            bnorm: data.b.iter().map(|v| v * v).sum::<f64>().sqrt(),
            c,
            lower,
            upper,
            data,
        }
    }

    pub fn data(&self) -> &ProblemData {
        self.data
    }

    /// `(pobj, dobj, eta_g)`.
    pub fn gap(&self, st: &IterateState) -> (f64, f64, f64) {
        let pobj = self.c.dot(&st.x.data);
        let neg_z: Vec<f64> = st.z.data.iter().map(|v| -v).collect();
        let neg_v: Vec<f64> = st.v.iter().map(|v| -v).collect();
        let by: f64 = self.data.b.iter().zip(st.y.iter()).map(|(a, b)| a * b).sum();
        let dobj = by
            - support_box(&neg_z, self.lower.as_deref(), self.upper.as_deref())
            - support_box(&neg_v, Some(&self.data.l), Some(&self.data.u));
        (pobj, dobj, relative_gap(pobj, dobj))
    }

    pub fn eta(&self, st: &IterateState) -> Result<Residuals, SolveError> {
        st.check_shape(self.data)?;
        let data = self.data;
        let x = st.x.data.as_slice();
        let p = data.p();

        let ax = self.at.tr_mul(x);
        let rp1 = ax.iter().zip(&data.b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / (1.0 + self.bnorm);
        let mut eta_p = rp1;
        if p > 0 {
            let bx = self.bt.tr_mul(x);
            let r = (&bx - &st.s).norm() / (1.0 + st.s.norm());
            eta_p = eta_p.max(r);
        }

        let mut rd = st.dual_s.data.clone() + &st.z.data - &self.c;
        self.at.mul_add(st.y.as_slice(), rd.as_mut_slice());
        self.bt.mul_add(st.ybar.as_slice(), rd.as_mut_slice());
        let mut eta_d = rd.norm() / (1.0 + self.cnorm);
        if p > 0 {
            eta_d = eta_d.max((&st.ybar - &st.v).norm() / (1.0 + st.v.norm()));
        }

        let xms: Vec<f64> = x.iter().zip(st.dual_s.data.iter()).map(|(a, b)| a - b).collect();
        let proj = cone::project(&data.blk, &xms)?;
        let rk = x.iter().zip(&proj).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let eta_k = 0.2 * rk / (1.0 + st.x.norm() + st.dual_s.norm());

        let mut eta_pbound = 0.0f64;
        if self.lower.is_some() || self.upper.is_some() {
            let (lo, hi) = (self.lower.as_deref(), self.upper.as_deref());
            let r = x
                .iter()
                .zip(st.z.data.iter())
                .enumerate()
                .map(|(t, (xt, zt))| (xt - clamp(xt - zt, lo, hi, t)).powi(2))
                .sum::<f64>()
                .sqrt();
            eta_pbound = r / (1.0 + st.x.norm() + st.z.norm());
        }
        if p > 0 {
            let (lo, hi) = (Some(data.l.as_slice()), Some(data.u.as_slice()));
            let r = st
                .s
                .iter()
                .zip(st.v.iter())
                .enumerate()
                .map(|(t, (st_, vt))| (st_ - clamp(st_ - vt, lo, hi, t)).powi(2))
                .sum::<f64>()
                .sqrt();
            eta_pbound = eta_pbound.max(r / (1.0 + st.s.norm() + st.v.norm()));
        }
        eta_pbound *= 0.2;

        let (pobj, dobj, eta_g) = self.gap(st);
        let eta = eta_p.max(eta_d).max(eta_k).max(eta_pbound);
        Ok(Residuals { eta_p, eta_d, eta_k, eta_pbound, eta, eta_g, pobj, dobj })
    }
}

pub fn compute_eta(data: &ProblemData, st: &IterateState) -> Result<Residuals, SolveError> {
    ResidualEvaluator::new(data).eta(st)
}

pub fn compute_gap(data: &ProblemData, st: &IterateState) -> Result<(f64, f64, f64), SolveError> {
    st.check_shape(data)?;
    Ok(ResidualEvaluator::new(data).gap(st))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopDecision {
    Continue,
    Converged,
    MaxIter,
    MaxTime,
    Stagnation,
}

/// Stopping decision after iteration `iter` (1-based) with elapsed wall time
/// `elapsed` seconds. `history` holds the `η` values of the current run,
/// ending with `res.eta`.
pub fn should_stop(res: &Residuals, params: &SolverParams, history: &[f64], iter: usize, elapsed: f64) -> StopDecision {
    if res.eta <= params.tol {
        return StopDecision::Converged;
    }
    if elapsed >= params.maxtime {
        return StopDecision::MaxTime;
    }
    if iter >= params.maxiter {
        return StopDecision::MaxIter;
    }
    if params.stopoption == 1 && stagnated(history, params.stagnation_window, params.stagnation_ratio) {
        return StopDecision::Stagnation;
    }
    StopDecision::Continue
}

/// True when the best `η` over the whole history is not below `ratio` times
/// the best value seen before the trailing `window` entries.
pub fn stagnated(history: &[f64], window: usize, ratio: f64) -> bool {
    if window == 0 || history.len() <= window {
        return false;
    }
    let split = history.len() - window;
    let before = history[..split].iter().copied().fold(f64::INFINITY, f64::min);
    let recent = history[split..].iter().copied().fold(f64::INFINITY, f64::min);
    recent > ratio * before
}
