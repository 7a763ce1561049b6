//! Two-phase driver: the ADMM phase produces a warm start at `tol_adm`,
//! the Newton-CG phase finishes to `tol`.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::SolveError;
use crate::model::ProblemData;
use crate::params::{AatMethod, SolverParams};
use crate::phase1::{self, stack};
use crate::phase2::{sncg_solve, ReducedFunction};
use crate::residuals::{should_stop, stagnated, IterateState, ResidualEvaluator, Residuals, StopDecision};
use crate::scaling::ScaledProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iter: usize,
    /// 0 for the starting point, then 1 or 2.
    pub phase: u8,
    pub sigma: f64,
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_k: f64,
    pub eta_pbound: f64,
    pub eta: f64,
    pub eta_g: f64,
    pub pobj: f64,
    pub dobj: f64,
    pub elapsed: f64,
    pub newton_steps: usize,
    pub cg_iters: usize,
}

impl HistoryRecord {
    /// Copy with the wall-clock field cleared, for reproducibility checks.
    pub fn without_time(mut self) -> Self {
        self.elapsed = 0.0;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_k: f64,
    pub eta_pbound: f64,
    pub eta: f64,
    pub eta_g: f64,
    pub iter_phase1: usize,
    pub iter_phase2: usize,
    pub termination: StopDecision,
    pub wall_time: f64,
    pub phase1_time: f64,
    pub aat_method: AatMethod,
    pub final_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub pobj: f64,
    pub dobj: f64,
    /// Final iterate in original coordinates.
    pub state: IterateState,
    pub info: SolveInfo,
    pub runhist: Vec<HistoryRecord>,
}

/// Mutable solve context shared by both phases.
struct Run<'a> {
    params: &'a SolverParams,
    eng: Engine,
    eval: ResidualEvaluator<'a>,
    st: IterateState,
    sigma: f64,
    iter: usize,
    start: Instant,
    hist: Vec<HistoryRecord>,
    phase_etas: Vec<f64>,
    last: Residuals,
    streak_high: usize,
    streak_low: usize,
}

fn initial_sigma(params: &SolverParams, prob: &ScaledProblem) -> f64 {
    let s = params.sigma.initial.unwrap_or_else(|| {
        let (b, c) = (prob.b.norm(), prob.c.norm());
        if b > 0.0 && c > 0.0 {
            b / c
        } else {
            1.0
        }
    });
    s.clamp(params.sigma.min, params.sigma.max)
}

impl<'a> Run<'a> {
    fn new(data: &'a ProblemData, params: &'a SolverParams, init: Option<&IterateState>) -> Result<Self, SolveError> {
        params.validate()?;
        let findings = data.validate();
        if !findings.is_empty() {
            return Err(SolveError::Invalid(findings));
        }
        let start = Instant::now();
        let init = match init {
            Some(s) => {
                s.check_shape(data)?;
                s.clone()
            }
            None => IterateState::zeros(data),
        };
        let prob = ScaledProblem::new(data, true);
        let st = prob.scale_state(&init);
        let sigma = initial_sigma(params, &prob);
        let eng = Engine::new(prob, params.aat_method, params.direct_limit);
        let eval = ResidualEvaluator::new(data);
        let last = eval.eta(&init)?;
        let mut run = Self {
            params,
            eng,
            eval,
            st,
            sigma,
            iter: 0,
            start,
            hist: Vec::new(),
            phase_etas: Vec::new(),
            last,
            streak_high: 0,
            streak_low: 0,
        };
        if params.printlevel >= 1 {
            println!(
                " m = {}, p = {}, dim = {}, blocks = {}, normal equations: {:?}, sigma0 = {:.2e}",
                data.m(),
                data.p(),
                data.blk.dim(),
                data.blk.len(),
                run.eng.method(),
                sigma
            );
            println!(" {:>6} {:>2} {:>9} {:>9} {:>9} {:>9} {:>9} {:>14} {:>14} {:>8} {:>9}", "iter", "ph", "eta_P", "eta_D", "eta_K", "eta_B", "eta_g", "pobj", "dobj", "time", "sigma");
        }
        run.record(0, last, 0, 0);
        Ok(run)
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn record(&mut self, phase: u8, r: Residuals, newton_steps: usize, cg_iters: usize) {
        let rec = HistoryRecord {
            iter: self.iter,
            phase,
            sigma: self.sigma,
            eta_p: r.eta_p,
            eta_d: r.eta_d,
            eta_k: r.eta_k,
            eta_pbound: r.eta_pbound,
            eta: r.eta,
            eta_g: r.eta_g,
            pobj: r.pobj,
            dobj: r.dobj,
            elapsed: self.elapsed(),
            newton_steps,
            cg_iters,
        };
        let pl = self.params.printlevel;
        if pl >= 2 || (pl >= 1 && self.iter.is_multiple_of(50)) {
            self.print(&rec);
        }
        self.hist.push(rec);
    }

    fn print(&self, r: &HistoryRecord) {
        println!(
            " {:>6} {:>2} {:>9.2e} {:>9.2e} {:>9.2e} {:>9.2e} {:>9.2e} {:>14.7e} {:>14.7e} {:>8.2} {:>9.2e}",
            r.iter, r.phase, r.eta_p, r.eta_d, r.eta_k, r.eta_pbound, r.eta_g, r.pobj, r.dobj, r.elapsed, r.sigma
        );
    }

    fn eps(&self) -> f64 {
        let p = self.params;
        let sched = p.epsilon.at(self.iter + 1, self.eng.prob.b.norm());
        sched.min(p.epsilon_eta_factor * self.last.eta).max(1e-14)
    }

    fn evaluate(&mut self) -> Result<Residuals, SolveError> {
        let orig = self.eng.prob.unscale_state(&self.st);
        self.eval.eta(&orig).map_err(|e| e.at(self.iter))
    }

    fn adjust_sigma(&mut self, r: &Residuals) {
        let s = &self.params.sigma;
        if r.eta_d <= 0.0 || r.eta_p <= 0.0 {
            return;
        }
        // In-band iterations leave both counters unchanged.
        let ratio = r.eta_p.max(r.eta_k).max(r.eta_pbound) / r.eta_d;
        if ratio > s.ratio_high {
            self.streak_high += 1;
            self.streak_low = 0;
        } else if ratio < s.ratio_low {
            self.streak_low += 1;
            self.streak_high = 0;
        }
        if self.streak_high >= s.patience {
            self.sigma = (self.sigma / s.factor).max(s.min);
            self.streak_high = 0;
        } else if self.streak_low >= s.patience {
            self.sigma = (self.sigma * s.factor).min(s.max);
            self.streak_low = 0;
        }
    }

    /// Shared bookkeeping after one iteration.
    fn finish_iteration(&mut self, phase: u8, newton: usize, cg: usize) -> Result<Residuals, SolveError> {
        let r = self.evaluate()?;
        self.last = r;
        self.phase_etas.push(r.eta);
        self.record(phase, r, newton, cg);
        self.adjust_sigma(&r);
        Ok(r)
    }

    fn phase1_step(&mut self) -> Result<Residuals, SolveError> {
        self.iter += 1;
        let eps = self.eps();
        let out = phase1::iterate(&self.eng, &mut self.st, self.sigma, self.params.tau, eps).map_err(|e| e.at(self.iter))?;
        self.finish_iteration(1, 0, out.cg_iters)
    }

    fn phase2_step(&mut self) -> Result<Residuals, SolveError> {
        self.iter += 1;
        let eps = self.eps();
        let (eng, sigma, tau) = (&self.eng, self.sigma, self.params.tau);
        let (z, v) = phase1::step1_zv(eng, &self.st, sigma);
        let rf = ReducedFunction::new(eng, &self.st, &z, &v, sigma);
        let w0 = DVector::from_vec(stack(&self.st.y, &self.st.ybar));
        let out = sncg_solve(&rf, w0, eps, &self.params.sncg).map_err(|e| e.at(self.iter))?;
        let (newton, mut cg) = (out.newton_steps, out.cg_iters);
        let sgs = if out.converged {
            phase1::SgsOutcome { w: out.w, dual_s: out.dual_s, resolved: false, achieved: out.achieved, cg_iters: 0 }
        } else {
            log::debug!("iteration {}: Newton-CG stopped at {:.2e} > {:.2e}; using a Gauss-Seidel pass", self.iter, out.achieved, eps);
            let s = phase1::step2_sgs(eng, &self.st, &z, &v, sigma, eps).map_err(|e| e.at(self.iter))?;
            cg += s.cg_iters;
            s
        };
        phase1::accept(eng, &mut self.st, z, v, sgs);
        phase1::step3_multipliers(eng, &mut self.st, sigma, tau);
        self.finish_iteration(2, newton, cg)
    }

    fn decide(&self, r: &Residuals) -> StopDecision {
        should_stop(r, self.params, &self.phase_etas, self.iter, self.elapsed())
    }

    /// Runs the first phase. With `handover`, it stops at `tol_adm`,
    /// `maxiter_adm` or stagnation and reports `Continue`.
    fn run_phase1(&mut self, handover: bool, maxiter_adm: usize) -> Result<(StopDecision, usize), SolveError> {
        let mut count = 0;
        if self.last.eta <= self.params.tol {
            return Ok((StopDecision::Converged, 0));
        }
        self.phase_etas.clear();
        self.phase_etas.push(self.last.eta);
        loop {
            let r = self.phase1_step()?;
            count += 1;
            let d = self.decide(&r);
            if handover {
                match d {
                    StopDecision::Converged | StopDecision::MaxTime | StopDecision::MaxIter => return Ok((d, count)),
                    _ => {}
                }
                if r.eta <= self.params.tol_adm
                    || count >= maxiter_adm
                    || stagnated(&self.phase_etas, self.params.handover_window, self.params.stagnation_ratio)
                {
                    return Ok((StopDecision::Continue, count));
                }
            } else if d != StopDecision::Continue {
                return Ok((d, count));
            }
        }
    }

    fn run_phase2(&mut self) -> Result<(StopDecision, usize), SolveError> {
        let mut count = 0;
        if self.last.eta <= self.params.tol {
            return Ok((StopDecision::Converged, 0));
        }
        self.phase_etas.clear();
        self.phase_etas.push(self.last.eta);
        loop {
            let r = self.phase2_step()?;
            count += 1;
            let d = self.decide(&r);
            if d != StopDecision::Continue {
                return Ok((d, count));
            }
        }
    }

    fn into_result(self, termination: StopDecision, iter_phase1: usize, iter_phase2: usize, phase1_time: f64) -> SolveResult {
        let state = self.eng.prob.unscale_state(&self.st);
        let r = self.last;
        let wall_time = self.elapsed();
        if self.params.printlevel >= 1 {
            if let Some(last) = self.hist.last() {
                if last.iter % 50 != 0 && self.params.printlevel == 1 {
                    self.print(last);
                }
            }
            println!(
                " termination: {termination:?}; iterations {} + {}; eta = {:.2e}, eta_g = {:.2e}; pobj = {:.8e}, dobj = {:.8e}; time {:.2}s",
                iter_phase1, iter_phase2, r.eta, r.eta_g, r.pobj, r.dobj, wall_time
            );
        }
        SolveResult {
            pobj: r.pobj,
            dobj: r.dobj,
            state,
            info: SolveInfo {
                eta_p: r.eta_p,
                eta_d: r.eta_d,
                eta_k: r.eta_k,
                eta_pbound: r.eta_pbound,
                eta: r.eta,
                eta_g: r.eta_g,
                iter_phase1,
                iter_phase2,
                termination,
                wall_time,
                phase1_time,
                aat_method: self.eng.method(),
                final_sigma: self.sigma,
            },
            runhist: self.hist,
        }
    }
}

/// Solves the problem. Without `init` the start is the zero point.
pub fn solve(data: &ProblemData, params: &SolverParams, init: Option<&IterateState>) -> Result<SolveResult, SolveError> {
    let mut run = Run::new(data, params, init)?;
    if params.phase1_only {
        let (d, n1) = run.run_phase1(false, usize::MAX)?;
        let t = run.elapsed();
        return Ok(run.into_result(d, n1, 0, t));
    }
    let has_extra = data.has_bounds() || data.p() > 0;
    let (d, n1) = run.run_phase1(true, params.maxiter_adm_for(has_extra))?;
    let t1 = run.elapsed();
    if d != StopDecision::Continue {
        return Ok(run.into_result(d, n1, 0, t1));
    }
    let (d, n2) = run.run_phase2()?;
    Ok(run.into_result(d, n1, n2, t1))
}

/// First phase alone, to `tol_adm` or `maxiter_adm`.
pub fn run_phase1(data: &ProblemData, params: &SolverParams, init: Option<&IterateState>) -> Result<SolveResult, SolveError> {
    let mut run = Run::new(data, params, init)?;
    let has_extra = data.has_bounds() || data.p() > 0;
    let (d, n1) = run.run_phase1(true, params.maxiter_adm_for(has_extra))?;
    let t = run.elapsed();
    Ok(run.into_result(d, n1, 0, t))
}

/// Second phase alone from a given (e.g. first-phase) state, to `tol`.
pub fn run_phase2(data: &ProblemData, params: &SolverParams, warm: &IterateState) -> Result<SolveResult, SolveError> {
    let mut run = Run::new(data, params, Some(warm))?;
    let (d, n2) = run.run_phase2()?;
    Ok(run.into_result(d, 0, n2, 0.0))
}
