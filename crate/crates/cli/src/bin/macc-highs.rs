//! Minimal HiGHS front end: reads an LP/MPS file, solves it and writes the
//! raw solution file. Accepts the same flags as the stock `highs` binary for
//! the subset the planner uses.

use std::ffi::CString;
use std::os::raw::c_void;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use highs_sys::*;

#[derive(Parser)]
#[command(name = "macc-highs", about = "Solve an LP/MPS model with HiGHS")]
struct Args {
    /// Positional model file, as an alternative to --model_file.
    model: Option<PathBuf>,
    #[arg(long = "model_file")]
    model_file: Option<PathBuf>,
    #[arg(long = "solution_file")]
    solution_file: Option<PathBuf>,
    /// Seconds; unlimited when absent.
    #[arg(long = "time_limit")]
    time_limit: Option<f64>,
    #[arg(long)]
    threads: Option<i32>,
    /// Silence the solver log.
    #[arg(long)]
    quiet: bool,
}

struct Highs(*mut c_void);

impl Drop for Highs {
    fn drop(&mut self) {
        // SAFETY: pointer came from Highs_create and is destroyed once.
        unsafe { Highs_destroy(self.0) }
    }
}

fn cstr(s: &str) -> CString {
    CString::new(s).expect("no interior NUL")
}

#[allow(non_upper_case_globals)]
fn status_name(status: HighsInt) -> &'static str {
    match status {
        kHighsModelStatusOptimal => "Optimal",
        kHighsModelStatusInfeasible => "Infeasible",
        kHighsModelStatusUnboundedOrInfeasible => "Primal infeasible or unbounded",
        kHighsModelStatusUnbounded => "Unbounded",
        kHighsModelStatusTimeLimit => "Time limit reached",
        kHighsModelStatusIterationLimit => "Iteration limit reached",
        kHighsModelStatusModelEmpty => "Empty",
        kHighsModelStatusLoadError => "Load error",
        kHighsModelStatusModelError => "Model error",
        kHighsModelStatusInterrupt => "Interrupted by user",
        _ => "Unknown",
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let Some(model) = args.model_file.or(args.model) else {
        eprintln!("macc-highs: no model file given");
        return ExitCode::from(2);
    };
    let model = cstr(&model.to_string_lossy());
    // SAFETY: every call below receives the live handle and NUL-terminated strings.
    unsafe {
        let h = Highs(Highs_create());
        if args.quiet {
            Highs_setBoolOptionValue(h.0, cstr("output_flag").as_ptr(), 0);
        }
        if let Some(limit) = args.time_limit {
            Highs_setDoubleOptionValue(h.0, cstr("time_limit").as_ptr(), limit);
        }
        if let Some(threads) = args.threads {
            Highs_setIntOptionValue(h.0, cstr("threads").as_ptr(), threads);
        }
        if Highs_readModel(h.0, model.as_ptr()) == kHighsStatusError {
            eprintln!("macc-highs: could not read model");
            return ExitCode::from(1);
        }
        if Highs_run(h.0) == kHighsStatusError {
            eprintln!("macc-highs: solver error");
            return ExitCode::from(1);
        }
        let status = Highs_getModelStatus(h.0);
        println!("Model status        : {}", status_name(status));
        if let Some(path) = args.solution_file {
            let path = cstr(&path.to_string_lossy());
            if Highs_writeSolution(h.0, path.as_ptr()) == kHighsStatusError {
                eprintln!("macc-highs: could not write solution");
                return ExitCode::from(1);
            }
        }
    }
    ExitCode::SUCCESS
}
