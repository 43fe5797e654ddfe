//! Subcommand drivers. Each returns a [`RunReport`] whose status is the
//! process exit code.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::io::{read_timeseries, write_timeseries};
use super::report::{save_report, ExitStatus, FitSummary, RunReport};
use super::sampling::sample_initial_data;
use crate::analysis::{
    check_global_conditions, check_relaxed_conditions, compute_constants, default_fit_window,
    fit_exponential, fit_trajectory, verify_decay_bounds, DecayVerification, HypothesisReport,
    Quantity, TheoremConstants,
};
use crate::diagnostics::{
    dissipative_inequality_check, fluctuations, norms, run_fluctuation_oracle, DiagnosticsContext,
    DiagnosticsRecord, InvariantMonitor,
};
use crate::error::{Result, TcsError};
use crate::integrator::{integrate, IntegratorConfig, Trajectory};
use crate::model::{asymptotic_temperature, center_of_mass, ConservedQuantities, ParticleEnsemble};

pub const ENERGY_DRIFT_TOL: f64 = 1e-8;
pub const CENTER_OF_MASS_TOL: f64 = 1e-8;
pub const ZERO_MEAN_TOL: f64 = 1e-9;
pub const TEMPERATURE_IDENTITY_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 1e-6;
/// Default horizon of the `oracle` subcommand.
pub const ORACLE_T_END: f64 = 10.0;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const REPORT_FILE: &str = "report.txt";

fn initial_tnorm(s0: &ParticleEnsemble) -> f64 {
    let com = center_of_mass(s0);
    let t_inf = asymptotic_temperature(&ConservedQuantities::from_initial(s0), &com.v);
    norms(&fluctuations(s0, t_inf)).t
}

/// Constants and both hypothesis variants for the sampled initial data.
pub fn hypotheses(
    s0: &ParticleEnsemble,
    cfg: &ScenarioConfig,
) -> Result<(TheoremConstants, Vec<HypothesisReport>)> {
    let p = cfg.model_params()?;
    let c = compute_constants(s0, &p, cfg.eps, cfg.eps0)?;
    let tnorm0 = initial_tnorm(s0);
    let reports = vec![
        check_global_conditions(&c, tnorm0),
        check_relaxed_conditions(&c, tnorm0),
    ];
    Ok((c, reports))
}

/// Hypothesis report only; no integration.
pub fn check(cfg: &ScenarioConfig) -> RunReport {
    let mut report = RunReport::new("check", Some(cfg.clone()));
    let s0 = match sample_initial_data(cfg) {
        Ok(s) => s,
        Err(e) => {
            report.fail(&e);
            return report;
        }
    };
    match hypotheses(&s0, cfg) {
        Ok((_, reports)) => {
            if !reports[0].overall {
                report.escalate(ExitStatus::Unsatisfied);
            }
            report.hypotheses = reports;
        }
        Err(e @ TcsError::ConstantsUndefined { .. }) => {
            report.notes.push(e.to_string());
            report.escalate(ExitStatus::Unsatisfied);
        }
        Err(e) => report.fail(&e),
    }
    report
}

/// Guaranteed decay rates of `X`, `V` (from the `|Z|^2` envelope) and of
/// `Tnorm` (from the temperature envelope).
pub fn guaranteed_rate(q: Quantity, c: &TheoremConstants) -> f64 {
    match q {
        Quantity::X | Quantity::V => c.eps / 3.0,
        Quantity::Tnorm => c.a1.min(2.0 * c.eps / 3.0) / 2.0,
    }
}

pub struct SimulationOutcome {
    pub report: RunReport,
    pub trajectory: Option<Trajectory>,
    pub constants: Option<TheoremConstants>,
}

/// Integrates, checks envelopes, the dissipative inequality and the
/// conservation invariants, and fits decay rates. Writes the time series and
/// report to `out_dir` when given.
pub fn simulate(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> SimulationOutcome {
    let mut report = RunReport::new("simulate", Some(cfg.clone()));
    let mut outcome_constants = None;
    let finish = |mut report: RunReport, trajectory, constants| {
        if let Some(dir) = out_dir {
            if let Err(e) = fs::create_dir_all(dir)
                .map_err(|e| TcsError::io(dir, e))
                .and_then(|_| save_report(&report, &dir.join(REPORT_FILE)))
            {
                report.fail(&e);
            }
        }
        SimulationOutcome {
            report,
            trajectory,
            constants,
        }
    };

    let prepared = sample_initial_data(cfg)
        .and_then(|s0| Ok((s0, cfg.model_params()?, cfg.integrator_config()?)));
    let (s0, p, icfg) = match prepared {
        Ok(v) => v,
        Err(e) => {
            report.fail(&e);
            return finish(report, None, None);
        }
    };

    match hypotheses(&s0, cfg) {
        Ok((c, reports)) => {
            report.hypotheses = reports;
            outcome_constants = Some(c);
        }
        Err(e @ TcsError::ConstantsUndefined { .. }) => report.notes.push(e.to_string()),
        Err(e) => {
            report.fail(&e);
            return finish(report, None, None);
        }
    }

    let ctx = DiagnosticsContext::new(&s0, cfg.eps);
    let mut monitor = InvariantMonitor::new(&s0);
    let traj = match integrate(&s0, &p, &icfg, &ctx, |r, s| monitor.observe(r, s)) {
        Ok(t) => t,
        Err(e) => {
            report.fail(&e);
            return finish(report, None, outcome_constants);
        }
    };

    if let Some(dir) = out_dir {
        let written = fs::create_dir_all(dir)
            .map_err(|e| TcsError::io(dir, e))
            .and_then(|_| write_timeseries(&traj.records, &dir.join(TIMESERIES_FILE)));
        if let Err(e) = written {
            report.fail(&e);
        }
    }

    let refs: Vec<&HypothesisReport> = report.hypotheses.iter().collect();
    match verify_decay_bounds(&traj, &refs) {
        Ok(DecayVerification::Refused) => {
            report.decay = Some(DecayVerification::Refused);
            report.escalate(ExitStatus::Unsatisfied);
        }
        Ok(v) => {
            if !v.violations().is_empty() {
                report.escalate(ExitStatus::Violation);
            }
            report.decay = Some(v);
        }
        Err(e) => report.fail(&e),
    }

    if let Some(c) = &outcome_constants {
        match dissipative_inequality_check(&traj, &p, c) {
            Ok(d) => {
                // The inequality is only derived for eps <= 1/2.
                if !d.violations.is_empty() && c.eps <= 0.5 {
                    report.escalate(ExitStatus::Violation);
                }
                report.dissipative = Some(d);
            }
            Err(e) => report.notes.push(format!("dissipative check skipped: {e}")),
        }
    }

    for (q, fit) in fit_trajectory(&traj, default_fit_window(&traj.times)) {
        match fit {
            Ok(fit) => report.fits.push(FitSummary {
                fit,
                guaranteed_rate: outcome_constants.as_ref().map(|c| guaranteed_rate(q, c)),
            }),
            Err(e) => report.notes.push(format!("{} fit skipped: {e}", q.name())),
        }
    }

    for (name, value, tol) in [
        ("energy drift", monitor.energy_drift, ENERGY_DRIFT_TOL),
        (
            "center of mass",
            monitor.center_of_mass_error,
            CENTER_OF_MASS_TOL,
        ),
        ("zero mean", monitor.zero_mean_residual, ZERO_MEAN_TOL),
        (
            "temperature identity",
            monitor.temperature_identity_residual,
            TEMPERATURE_IDENTITY_TOL,
        ),
    ] {
        if !(value <= tol) {
            report
                .invariant_failures
                .push(format!("{name}: {value:.3e} > {tol:.0e}"));
            report.escalate(ExitStatus::Violation);
        }
    }
    report.invariants = Some(monitor);
    finish(report, Some(traj), outcome_constants)
}

/// Decay fits from a time-series file. `window` defaults to the second half.
pub fn fit_file(path: &Path, window: Option<(f64, f64)>) -> RunReport {
    let mut report = RunReport::new("fit", None);
    let records = match read_timeseries(path) {
        Ok(r) => r,
        Err(e) => {
            report.fail(&e);
            return report;
        }
    };
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let window = window.unwrap_or_else(|| default_fit_window(&times));
    for q in Quantity::ALL {
        let values: Vec<f64> = records.iter().map(|r| quantity_of(r, q)).collect();
        match fit_exponential(q, &times, &values, window) {
            Ok(fit) => report.fits.push(FitSummary {
                fit,
                guaranteed_rate: None,
            }),
            Err(e) => {
                report.notes.push(format!("{} fit failed: {e}", q.name()));
                report.escalate(ExitStatus::Usage);
            }
        }
    }
    report
}

fn quantity_of(r: &DiagnosticsRecord, q: Quantity) -> f64 {
    match q {
        Quantity::X => r.x_norm,
        Quantity::V => r.v_norm,
        Quantity::Tnorm => r.t_norm,
    }
}

/// Equivalence of the full system and the fluctuation system over
/// `[0, t_end]`.
pub fn oracle(cfg: &ScenarioConfig, t_end: f64) -> RunReport {
    let mut report = RunReport::new("oracle", Some(cfg.clone()));
    let run = sample_initial_data(cfg).and_then(|s0| {
        let p = cfg.model_params()?;
        let icfg = IntegratorConfig::new(cfg.dt, t_end, cfg.record_stride)?;
        run_fluctuation_oracle(&s0, &p, &icfg)
    });
    match run {
        Ok(o) => {
            let m = o.max_deviation;
            if !(m.x <= ORACLE_TOL && m.v <= ORACLE_TOL && m.t <= ORACLE_TOL) {
                report.escalate(ExitStatus::Violation);
            }
            report.oracle_deviation = Some(m);
        }
        Err(e) => report.fail(&e),
    }
    report
}

/// Axes of a `(kappa1, kappa2, eps0)` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub eps0: Vec<f64>,
}

impl SweepGrid {
    pub fn cells(&self, base: &ScenarioConfig) -> Vec<ScenarioConfig> {
        let mut cells = Vec::new();
        for &k1 in &self.kappa1 {
            for &k2 in &self.kappa2 {
                for &e0 in &self.eps0 {
                    let mut c = base.clone();
                    c.kappa1 = k1;
                    c.kappa2 = k2;
                    c.eps0 = e0;
                    cells.push(c);
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub kappa1: f64,
    pub kappa2: f64,
    pub eps0: f64,
    pub status: ExitStatus,
    pub theorem: Option<bool>,
    pub relaxed: Option<bool>,
    pub envelope_violations: usize,
    pub final_x: Option<f64>,
    pub final_v: Option<f64>,
    pub final_tnorm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
    pub status: ExitStatus,
}

impl SweepSummary {
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.16e}"));
        let flag = |b: Option<bool>| b.map_or_else(String::new, |v| v.to_string());
        let mut out = String::from(
            "cell,kappa1,kappa2,eps0,exit_code,theorem,relaxed,envelope_violations,X_end,V_end,Tnorm_end\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{},{},{},{},{},{},{}\n",
                c.index,
                c.kappa1,
                c.kappa2,
                c.eps0,
                c.status.code(),
                flag(c.theorem),
                flag(c.relaxed),
                c.envelope_violations,
                opt(c.final_x),
                opt(c.final_v),
                opt(c.final_tnorm)
            ));
        }
        out
    }
}

pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";

pub fn cell_dir(out_dir: &Path, index: usize) -> PathBuf {
    out_dir.join(format!("cell_{index:04}"))
}

/// Runs [`simulate`] on every grid cell in a pool of `workers` threads.
/// Cell results do not depend on the worker count.
pub fn sweep(
    base: &ScenarioConfig,
    grid: &SweepGrid,
    workers: usize,
    out_dir: Option<&Path>,
) -> Result<SweepSummary> {
    let configs = grid.cells(base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| TcsError::Config(format!("cannot start {workers} workers: {e}")))?;
    let cells: Vec<SweepCell> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(index, cfg)| {
                let dir = out_dir.map(|d| cell_dir(d, index));
                let out = simulate(cfg, dir.as_deref());
                let last = out.trajectory.as_ref().and_then(|t| t.records.last());
                let variant = |i: usize| out.report.hypotheses.get(i).map(|h| h.overall);
                SweepCell {
                    index,
                    kappa1: cfg.kappa1,
                    kappa2: cfg.kappa2,
                    eps0: cfg.eps0,
                    status: out.report.status,
                    theorem: variant(0),
                    relaxed: variant(1),
                    envelope_violations: out.report.envelope_violation_count(),
                    final_x: last.map(|r| r.x_norm),
                    final_v: last.map(|r| r.v_norm),
                    final_tnorm: last.map(|r| r.t_norm),
                }
            })
            .collect()
    });
    let status = cells
        .iter()
        .fold(ExitStatus::Success, |s, c| s.combine(c.status));
    let summary = SweepSummary { cells, status };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| TcsError::io(dir, e))?;
        let path = dir.join(SWEEP_SUMMARY_FILE);
        fs::write(&path, summary.to_csv()).map_err(|e| TcsError::io(&path, e))?;
    }
    Ok(summary)
}
