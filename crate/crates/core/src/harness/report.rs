//! Run reports: readable text followed by a `key=value` trailer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::ScenarioConfig;
use crate::analysis::{DecayFit, DecayVerification, EnvelopeKind, HypothesisReport};
use crate::diagnostics::{DissipativeCheck, FluctuationNorms, InvariantMonitor};
use crate::error::{Result, TcsError};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Usage,
    Violation,
    /// Hypotheses unsatisfied, or the envelope verifier refused to run.
    Unsatisfied,
    NumericalFailure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Usage => 1,
            ExitStatus::Violation => 2,
            ExitStatus::Unsatisfied => 3,
            ExitStatus::NumericalFailure => 4,
        }
    }

    fn rank(self) -> u8 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Unsatisfied => 1,
            ExitStatus::Violation => 2,
            ExitStatus::NumericalFailure => 3,
            ExitStatus::Usage => 4,
        }
    }

    /// The more severe of the two.
    pub fn combine(self, other: ExitStatus) -> ExitStatus {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ExitStatus::Success => "success",
            ExitStatus::Usage => "usage_error",
            ExitStatus::Violation => "violation",
            ExitStatus::Unsatisfied => "hypotheses_unsatisfied",
            ExitStatus::NumericalFailure => "numerical_failure",
        }
    }
}

/// A fit together with the rate the theory guarantees for that quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub fit: DecayFit,
    pub guaranteed_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    pub config: Option<ScenarioConfig>,
    pub hypotheses: Vec<HypothesisReport>,
    pub decay: Option<DecayVerification>,
    pub dissipative: Option<DissipativeCheck>,
    pub fits: Vec<FitSummary>,
    pub invariants: Option<InvariantMonitor>,
    /// Invariant metrics above their thresholds.
    pub invariant_failures: Vec<String>,
    pub oracle_deviation: Option<FluctuationNorms>,
    pub failure: Option<String>,
    pub notes: Vec<String>,
    pub status: ExitStatus,
}

impl RunReport {
    pub fn new(command: &str, config: Option<ScenarioConfig>) -> Self {
        Self {
            command: command.into(),
            config,
            hypotheses: Vec::new(),
            decay: None,
            dissipative: None,
            fits: Vec::new(),
            invariants: None,
            invariant_failures: Vec::new(),
            oracle_deviation: None,
            failure: None,
            notes: Vec::new(),
            status: ExitStatus::Success,
        }
    }

    pub fn escalate(&mut self, status: ExitStatus) {
        self.status = self.status.combine(status);
    }

    pub fn fail(&mut self, err: &TcsError) {
        self.failure = Some(err.to_string());
        self.escalate(if err.is_numerical_failure() {
            ExitStatus::NumericalFailure
        } else {
            ExitStatus::Usage
        });
    }

    pub fn envelope_violation_count(&self) -> usize {
        self.decay.as_ref().map_or(0, |d| d.violations().len())
    }

    pub fn dissipative_violation_count(&self) -> usize {
        self.dissipative.as_ref().map_or(0, |d| d.violations.len())
    }

    pub fn trailer(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut put = |k: String, v: String| kv.push((k, v));
        put("command".into(), self.command.clone());
        put("status".into(), self.status.label().into());
        put("exit_code".into(), self.status.code().to_string());
        if let Some(h) = self.hypotheses.first() {
            let c = &h.constants;
            for (k, v) in [
                ("T_m", c.t_min),
                ("T_M", c.t_max),
                ("X0", c.x0),
                ("V0", c.v0),
                ("Tnorm0", h.tnorm0),
                ("zc0", c.zc0_norm),
                ("delta_star", c.delta_star),
                ("lambda", c.lambda),
                ("gamma", c.gamma),
                ("A1", c.a1),
                ("A2", c.a2),
                ("phi_far", c.phi_far),
                ("zeta_far", c.zeta_far),
            ] {
                put(format!("constant.{k}"), format!("{v:.16e}"));
            }
        }
        for h in &self.hypotheses {
            let v = h.variant.key();
            put(format!("{v}.overall"), h.overall.to_string());
            for c in &h.conditions {
                put(format!("{v}.{}.satisfied", c.key), c.satisfied.to_string());
                put(format!("{v}.{}.lhs", c.key), format!("{:.16e}", c.lhs));
                put(format!("{v}.{}.rhs", c.key), format!("{:.16e}", c.rhs));
                put(format!("{v}.{}.slack", c.key), format!("{:.16e}", c.slack));
            }
        }
        match &self.decay {
            Some(DecayVerification::Checked {
                records,
                violations,
                min_relative_margin_mechanical,
                min_relative_margin_temperature,
            }) => {
                put("envelope.records".into(), records.to_string());
                let count = |k: EnvelopeKind| violations.iter().filter(|v| v.kind == k).count();
                put(
                    "envelope.mechanical.violations".into(),
                    count(EnvelopeKind::Mechanical).to_string(),
                );
                put(
                    "envelope.temperature.violations".into(),
                    count(EnvelopeKind::Temperature).to_string(),
                );
                put(
                    "envelope.mechanical.min_margin".into(),
                    format!("{min_relative_margin_mechanical:.6e}"),
                );
                put(
                    "envelope.temperature.min_margin".into(),
                    format!("{min_relative_margin_temperature:.6e}"),
                );
            }
            Some(DecayVerification::Refused) => put("envelope.refused".into(), "true".into()),
            None => {}
        }
        if let Some(d) = &self.dissipative {
            put("dissipative.checked".into(), d.checked.to_string());
            put(
                "dissipative.violations".into(),
                d.violations.len().to_string(),
            );
            put(
                "dissipative.out_of_range".into(),
                d.out_of_range.len().to_string(),
            );
        }
        for f in &self.fits {
            let q = f.fit.quantity.name();
            put(format!("fit.{q}.rate"), format!("{:.16e}", f.fit.rate));
            put(
                format!("fit.{q}.r_squared"),
                format!("{:.16e}", f.fit.r_squared),
            );
            if let Some(g) = f.guaranteed_rate {
                put(format!("fit.{q}.guaranteed_rate"), format!("{g:.16e}"));
            }
        }
        if let Some(m) = &self.invariants {
            put("drift.energy".into(), format!("{:.6e}", m.energy_drift));
            put(
                "drift.center_of_mass".into(),
                format!("{:.6e}", m.center_of_mass_error),
            );
            put(
                "drift.zero_mean".into(),
                format!("{:.6e}", m.zero_mean_residual),
            );
            put(
                "drift.temperature_identity".into(),
                format!("{:.6e}", m.temperature_identity_residual),
            );
        }
        if let Some(o) = &self.oracle_deviation {
            put("oracle.max_deviation.X".into(), format!("{:.6e}", o.x));
            put("oracle.max_deviation.V".into(), format!("{:.6e}", o.v));
            put("oracle.max_deviation.Tnorm".into(), format!("{:.6e}", o.t));
        }
        kv
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "== tcs {} ==", self.command);
        if let Some(cfg) = &self.config {
            let _ = writeln!(out, "-- configuration");
            for line in cfg.to_text().lines() {
                let _ = writeln!(out, "  {line}");
            }
        }
        for h in &self.hypotheses {
            let _ = write!(out, "-- {h}");
        }
        match &self.decay {
            Some(DecayVerification::Refused) => {
                let _ = writeln!(
                    out,
                    "-- decay envelopes: not verified (no hypothesis variant satisfied)"
                );
            }
            Some(DecayVerification::Checked {
                records,
                violations,
                ..
            }) => {
                let _ = writeln!(
                    out,
                    "-- decay envelopes: {records} records, {} violations",
                    violations.len()
                );
                for v in violations.iter().take(20) {
                    let _ = writeln!(
                        out,
                        "  {:?} t={:.4} measured={:.6e} envelope={:.6e}",
                        v.kind, v.t, v.measured, v.envelope
                    );
                }
            }
            None => {}
        }
        if let Some(d) = &self.dissipative {
            let _ = writeln!(
                out,
                "-- dissipative inequality: {} samples checked, {} violations, {} outside the a priori regime",
                d.checked,
                d.violations.len(),
                d.out_of_range.len()
            );
            for v in d.violations.iter().take(20) {
                let _ = writeln!(
                    out,
                    "  t={:.4} dL/dt={:.6e} bound={:.6e} tol={:.3e}",
                    v.t, v.dl_dt, v.bound, v.tolerance
                );
            }
        }
        if !self.fits.is_empty() {
            let _ = writeln!(out, "-- decay fits");
            for f in &self.fits {
                let _ = write!(
                    out,
                    "  {:<6} window [{:.3}, {:.3}] rate {:.6e} r^2 {:.6}",
                    f.fit.quantity.name(),
                    f.fit.window.0,
                    f.fit.window.1,
                    f.fit.rate,
                    f.fit.r_squared
                );
                if let Some(g) = f.guaranteed_rate {
                    let _ = write!(out, " (guaranteed >= {g:.3e})");
                }
                out.push('\n');
            }
        }
        if let Some(m) = &self.invariants {
            let _ = writeln!(
                out,
                "-- invariants over {} samples: energy {:.3e}, center of mass {:.3e}, zero mean {:.3e}, temperature identity {:.3e}",
                m.samples,
                m.energy_drift,
                m.center_of_mass_error,
                m.zero_mean_residual,
                m.temperature_identity_residual
            );
            for f in &self.invariant_failures {
                let _ = writeln!(out, "  FAILED {f}");
            }
        }
        if let Some(o) = &self.oracle_deviation {
            let _ = writeln!(
                out,
                "-- fluctuation oracle max deviation: X {:.3e}, V {:.3e}, Tnorm {:.3e}",
                o.x, o.v, o.t
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(out, "error: {f}");
        }
        let _ = writeln!(
            out,
            "-- status: {} (exit {})",
            self.status.label(),
            self.status.code()
        );
        let _ = writeln!(out, "[trailer]");
        for (k, v) in self.trailer() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

pub fn save_report(report: &RunReport, path: &Path) -> Result<()> {
    fs::write(path, report.render()).map_err(|e| TcsError::io(path, e))
}

/// Reads the `key=value` trailer back from rendered report text.
pub fn parse_trailer(text: &str) -> Vec<(String, String)> {
    text.lines()
        .skip_while(|l| l.trim() != "[trailer]")
        .skip(1)
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_priority() {
        use ExitStatus::*;
        assert_eq!(Success.combine(Unsatisfied), Unsatisfied);
        assert_eq!(Unsatisfied.combine(Violation), Violation);
        assert_eq!(Violation.combine(Unsatisfied), Violation);
        assert_eq!(Violation.combine(NumericalFailure), NumericalFailure);
        assert_eq!(
            [Success, Usage, Violation, Unsatisfied, NumericalFailure].map(ExitStatus::code),
            [0, 1, 2, 3, 4]
        );
    }

    #[test]
    fn trailer_round_trip() {
        let mut r = RunReport::new("check", None);
        r.escalate(ExitStatus::Unsatisfied);
        let kv = parse_trailer(&r.render());
        assert!(kv.contains(&("exit_code".into(), "3".into())));
        assert!(kv.contains(&("command".into(), "check".into())));
    }
}
