//! Solver options.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper limit (exclusive) for the dual steplength.
pub const GOLDEN: f64 = 1.618_033_988_749_895;

/// How the normal equations of the first phase are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AatMethod {
    /// Dense Cholesky factor of the normal-equation operator.
    Direct,
    /// Preconditioned conjugate gradients.
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameter {name}: {reason}")]
pub struct ParamError {
    pub name: &'static str,
    pub reason: String,
}

/// Inner-solve tolerance `eps_k = min(cap, k^-exponent) * max(1, ||b||)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub cap: f64,
    pub exponent: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { cap: 1e-2, exponent: 1.5 }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, k: usize, bnorm: f64) -> f64 {
        let k = k.max(1) as f64;
        self.cap.min(k.powf(-self.exponent)) * bnorm.max(1.0)
    }
}

/// Settings of the semismooth Newton-CG inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SncgSettings {
    pub max_newton: usize,
    /// CG relative tolerance `min(cg_cap, ||g||^cg_exponent)`.
    pub cg_cap: f64,
    pub cg_exponent: f64,
    pub cg_maxit: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Lower bound on the ridge added to the generalized Hessian.
    pub ridge_floor: f64,
}

impl Default for SncgSettings {
    fn default() -> Self {
        Self {
            max_newton: 50,
            cg_cap: 0.5,
            cg_exponent: 0.6,
            cg_maxit: 500,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            ridge_floor: 1e-12,
        }
    }
}

/// Penalty-parameter balancing between primal and dual infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSettings {
    /// Starting penalty; `None` selects `||b|| / ||C||` clamped to `[min, max]`.
    pub initial: Option<f64>,
    pub factor: f64,
    pub ratio_low: f64,
    pub ratio_high: f64,
    /// Out-of-band iterations on one side, not interrupted by the other side,
    /// before an update.
    pub patience: usize,
    pub min: f64,
    pub max: f64,
}

impl Default for SigmaSettings {
    fn default() -> Self {
        Self { initial: None, factor: 1.25, ratio_low: 0.2, ratio_high: 5.0, patience: 5, min: 1e-4, max: 1e4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub tol: f64,
    pub maxiter: usize,
    /// Wall-clock limit in seconds.
    pub maxtime: f64,
    /// Tolerance at which the first phase hands over.
    pub tol_adm: f64,
    /// First-phase iteration limit; `None` picks 200 for problems without
    /// bounds or inequality rows, 2000 otherwise.
    pub maxiter_adm: Option<usize>,
    pub printlevel: u8,
    /// 1 enables the stagnation exit.
    pub stopoption: u8,
    pub aat_method: AatMethod,
    pub tau: f64,
    pub phase1_only: bool,
    pub epsilon: EpsilonSchedule,
    /// `eps_k` is further capped by this multiple of the last `η`.
    pub epsilon_eta_factor: f64,
    pub sigma: SigmaSettings,
    pub sncg: SncgSettings,
    /// Largest `m + p` solved with a dense factor.
    pub direct_limit: usize,
    /// Trailing iterations over which the best `η` must improve by the
    /// factor `stagnation_ratio`; applies to the stagnation exit.
    pub stagnation_window: usize,
    pub stagnation_ratio: f64,
    /// The same test with this window hands the first phase over early.
    pub handover_window: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            maxiter: 20000,
            maxtime: 10000.0,
            tol_adm: 1e-4,
            maxiter_adm: None,
            printlevel: 1,
            stopoption: 1,
            aat_method: AatMethod::Direct,
            tau: 1.618,
            phase1_only: false,
            epsilon: EpsilonSchedule::default(),
            epsilon_eta_factor: 0.1,
            sigma: SigmaSettings::default(),
            sncg: SncgSettings::default(),
            direct_limit: 4000,
            stagnation_window: 200,
            stagnation_ratio: 0.9,
            handover_window: 50,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let err = |name, reason: &str| Err(ParamError { name, reason: reason.to_string() });
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return err("tol", "must be positive");
        }
        if !(self.tol_adm > 0.0 && self.tol_adm.is_finite()) {
            return err("tolADM", "must be positive");
        }
        if !(self.maxtime > 0.0) {
            return err("maxtime", "must be positive");
        }
        if !(self.tau > 0.0 && self.tau < GOLDEN) {
            return err("tau", "must lie in (0, (1+sqrt 5)/2)");
        }
        if self.stopoption > 1 {
            return err("stopoption", "must be 0 or 1");
        }
        if !(self.epsilon.cap > 0.0 && self.epsilon.exponent > 1.0) {
            return err("epsilon", "schedule must be positive and summable (exponent > 1)");
        }
        if let Some(s) = self.sigma.initial {
            if !(s > 0.0 && s.is_finite()) {
                return err("sigma", "must be positive");
            }
        }
        if !(self.sigma.factor > 1.0 && self.sigma.min > 0.0 && self.sigma.min <= self.sigma.max) {
            return err("sigma", "factor must exceed 1 and 0 < min <= max");
        }
        let s = &self.sncg;
        if !(s.armijo > 0.0 && s.armijo < 0.5) {
            return err("armijo", "must lie in (0, 0.5)");
        }
        if !(s.backtrack > 0.0 && s.backtrack < 1.0) {
            return err("backtrack", "must lie in (0, 1)");
        }
        if s.max_newton == 0 || s.cg_maxit == 0 {
            return err("sncg", "iteration limits must be positive");
        }
        Ok(())
    }

    /// Phase-1 iteration limit for a problem with the given features.
    pub fn maxiter_adm_for(&self, has_bounds_or_rows: bool) -> usize {
        self.maxiter_adm.unwrap_or(if has_bounds_or_rows { 2000 } else { 200 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = SolverParams::default();
        p.validate().unwrap();
        assert_eq!(p.maxiter_adm_for(false), 200);
        assert_eq!(p.maxiter_adm_for(true), 2000);
    }

    #[test]
    fn tau_must_stay_below_golden_ratio() {
        let p = SolverParams { tau: GOLDEN, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn epsilon_schedule_values() {
        let e = EpsilonSchedule::default();
        assert_eq!(e.at(1, 0.5), 1e-2);
        assert!((e.at(100, 1.0) - 1e-3).abs() < 1e-18);
        assert!((e.at(100, 4.0) - 4e-3).abs() < 1e-17);
    }
}
