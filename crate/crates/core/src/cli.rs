//! Command-line driver.
//!
//! Exit codes: 0 converged, 2 stopped by an iteration/time limit or
//! stagnation (the result is still written), 1 bad input, 3 numerical
//! failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::io::{self, SdpaSign};
use crate::model::ProblemData;
use crate::params::{AatMethod, SolverParams};
use crate::problems;
use crate::residuals::StopDecision;
use crate::solver::solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Sdpa,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "bsdp", version, about = "Two-phase augmented Lagrangian solver for SDPs with bound constraints")]
pub struct Args {
    /// Problem file.
    #[arg(long, value_name = "PATH", required_unless_present = "gen", conflicts_with = "gen")]
    pub input: Option<PathBuf>,
    /// Input format; inferred from the extension when omitted (`.json` is JSON, anything else SDPA).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Generate a problem instead of reading one, e.g. `theta:cycle,5`.
    #[arg(long, value_name = "NAME:ARGS")]
    pub gen: Option<String>,
    /// Target relative KKT residual (default 1e-6).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Total iteration limit over both phases.
    #[arg(long)]
    pub maxiter: Option<usize>,
    /// Seconds.
    #[arg(long)]
    pub maxtime: Option<f64>,
    /// Tolerance at which the first phase hands over.
    #[arg(long = "tolADM")]
    pub tol_adm: Option<f64>,
    /// First-phase iteration limit (default 200, or 2000 with bounds or inequality rows).
    #[arg(long = "maxiterADM")]
    pub maxiter_adm: Option<usize>,
    /// 0 silent, 1 every 50th iteration, 2 every iteration.
    #[arg(long)]
    pub printlevel: Option<u8>,
    /// 1 stops on stagnation, 0 never does.
    #[arg(long)]
    pub stopoption: Option<u8>,
    #[arg(long = "aat-method", value_enum)]
    pub aat_method: Option<AatMethod>,
    /// Run the first phase alone.
    #[arg(long = "phase1-only")]
    pub phase1_only: bool,
    /// Result JSON.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Also write the problem in JSON form.
    #[arg(long = "write-problem", value_name = "PATH")]
    pub write_problem: Option<PathBuf>,
    /// `min` stores `C = -F0` (SDPA maximizes), `max` keeps `C = F0`.
    #[arg(long = "sdpa-sign", value_enum, default_value = "min")]
    pub sdpa_sign: SdpaSign,
}

impl Args {
    pub fn params(&self) -> SolverParams {
        let mut p = SolverParams::default();
        if let Some(v) = self.tol {
            p.tol = v;
        }
        if let Some(v) = self.maxiter {
            p.maxiter = v;
        }
        if let Some(v) = self.maxtime {
            p.maxtime = v;
        }
        if let Some(v) = self.tol_adm {
            p.tol_adm = v;
        }
        p.maxiter_adm = self.maxiter_adm.or(p.maxiter_adm);
        if let Some(v) = self.printlevel {
            p.printlevel = v;
        }
        if let Some(v) = self.stopoption {
            p.stopoption = v;
        }
        if let Some(v) = self.aat_method {
            p.aat_method = v;
        }
        p.phase1_only = self.phase1_only;
        p
    }
}

/// A loaded problem and the map from its standard-form objective to the
/// reported one.
struct Loaded {
    data: ProblemData,
    sign: f64,
    scale: f64,
}

fn load(args: &Args) -> Result<Loaded, String> {
    if let Some(spec) = &args.gen {
        let inst = problems::generate(spec).map_err(|e| e.to_string())?;
        return Ok(Loaded { sign: inst.sense.sign(), scale: inst.obj_scale, data: inst.data });
    }
    let path = args.input.as_ref().expect("clap requires --input without --gen");
    if !path.exists() {
        return Err(format!("input file not found: {}", path.display()));
    }
    let format = args.format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Sdpa,
    });
    let data = match format {
        Format::Sdpa => io::read_sdpa(path, args.sdpa_sign),
        Format::Json => io::read_json(path),
    }
    .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Loaded { data, sign: 1.0, scale: 1.0 })
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let params = args.params();
    if let Err(e) = params.validate() {
        eprintln!("error: {e}");
        return 1;
    }
    let loaded = match load(&args) {
        Ok(l) => l,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    if let Some(path) = &args.write_problem {
        if let Err(e) = io::write_json(&loaded.data, path) {
            eprintln!("error: {e}");
            return 1;
        }
    }
    let res = match solve(&loaded.data, &params, None) {
        Ok(r) => r,
        Err(crate::error::SolveError::Invalid(findings)) => {
            for f in findings {
                eprintln!("error: {f}");
            }
            return 1;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    let obj = loaded.sign * loaded.scale * res.pobj;
    println!("obj = {obj:.10e}");
    println!("pobj = {:.10e}, dobj = {:.10e}, eta = {:.3e}, termination = {:?}", res.pobj, res.dobj, res.info.eta, res.info.termination);
    if let Some(path) = &args.output {
        if let Err(e) = io::write_result(&loaded.data, &res, Some(obj), path) {
            eprintln!("error: {e}");
            return 1;
        }
    }
    match res.info.termination {
        StopDecision::Converged => 0,
        _ => 2,
    }
}
