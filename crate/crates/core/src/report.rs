//! A full run with its analyses attached.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify, detect_blowup, fit_decay, lyapunov_band, AnalysisConstants, AnalysisOptions,
    BlowupSummary, Classification, DecayFit, LyapunovBand,
};
use crate::error::Result;
use crate::functionals::{BlowupParams, EnergyLedger};
use crate::integrator::{run, Model, RunOutput, Termination};
use crate::problem::ProblemConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ProblemConfig,
    pub termination: Termination,
    pub failure: Option<String>,
    pub step_count: usize,
    pub t_end: f64,
    pub wall_time: f64,
    pub ledger: EnergyLedger,
    pub classification: Classification,
    pub decay_fit: Option<DecayFit>,
    /// Why no decay fit is attached, when absent.
    pub decay_fit_error: Option<String>,
    pub blowup: BlowupSummary,
    pub blowup_params: BlowupParams,
    pub f_horizon: f64,
    pub lyapunov: LyapunovBand,
    pub warnings: Vec<String>,
}

/// Runs `cfg`, classifies its initial data and attaches decay and blow-up analyses.
pub fn simulate(cfg: &ProblemConfig, opts: &AnalysisOptions) -> Result<(RunReport, RunOutput)> {
    let start = std::time::Instant::now();
    let model = Model::new(cfg.clone())?;
    let consts = AnalysisConstants::new(&model, opts)?;
    let classification = classify(&model, &consts)?;
    let out = run(cfg)?;
    let (decay_fit, decay_fit_error) = if out.termination == Termination::Horizon {
        let t0 = opts.t0_fraction * out.t_end;
        match fit_decay(
            &out.ledger.times(),
            &out.ledger.column(|r| r.e),
            &cfg.rate(),
            t0,
        ) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("run did not reach the horizon".into()))
    };
    let blowup = detect_blowup(
        &out.ledger,
        cfg,
        out.termination,
        out.t_end,
        &out.blowup_params,
    )?;
    let lyapunov = lyapunov_band(&out.ledger, opts.eps1, opts.eps2);
    let report = RunReport {
        config: cfg.clone(),
        termination: out.termination,
        failure: out.failure.clone(),
        step_count: out.step_count,
        t_end: out.t_end,
        wall_time: start.elapsed().as_secs_f64(),
        ledger: out.ledger.clone(),
        classification,
        decay_fit,
        decay_fit_error,
        blowup,
        blowup_params: out.blowup_params,
        f_horizon: out.f_horizon,
        lyapunov,
        warnings: out.warnings.clone(),
    };
    Ok((report, out))
}
