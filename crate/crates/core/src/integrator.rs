//! Fixed-step classical Runge-Kutta integration with trajectory recording.

use crate::diagnostics::{DiagnosticsContext, DiagnosticsRecord};
use crate::error::{Result, TcsError};
use crate::model::{rhs, ModelParams, ParticleEnsemble};

/// Step size, horizon and recording policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Record every `record_stride`-th step. The final step is always recorded.
    pub record_stride: usize,
    /// Keep the full state at each recorded step.
    pub retain_states: bool,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64, record_stride: usize) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            record_stride,
            retain_states: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_states(mut self) -> Self {
        self.retain_states = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(TcsError::InvalidIntegrator(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(TcsError::InvalidIntegrator(format!(
                "t_end = {} must be at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(TcsError::InvalidIntegrator(
                "record_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Step end times `t_1, ..., t_N` with `t_N = t_end` exactly. A final
    /// partial step absorbs any remainder of `t_end / dt`.
    pub fn step_times(&self) -> Vec<f64> {
        let ratio = self.t_end / self.dt;
        let full = (ratio + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (1..=full).map(|k| k as f64 * self.dt).collect();
        let covered = full as f64 * self.dt;
        if self.t_end - covered > 1e-9 * self.dt {
            times.push(self.t_end);
        } else if let Some(last) = times.last_mut() {
            *last = self.t_end;
        }
        times
    }
}

/// Recorded output of [`integrate`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub records: Vec<DiagnosticsRecord>,
    pub states: Option<Vec<ParticleEnsemble>>,
    pub dt: f64,
    pub record_stride: usize,
    /// Cross-term weight used for the recorded Lyapunov values.
    pub lyapunov_eps: f64,
}

impl Trajectory {
    /// Nominal spacing between records.
    pub fn record_spacing(&self) -> f64 {
        self.dt * self.record_stride as f64
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step(s: &ParticleEnsemble, p: &ModelParams, dt: f64) -> Result<ParticleEnsemble> {
    if dt == 0.0 {
        return Ok(s.clone());
    }
    let k1 = rhs(s, p)?;
    let k2 = rhs(&s.advanced(&k1, 0.5 * dt), p)?;
    let k3 = rhs(&s.advanced(&k2, 0.5 * dt), p)?;
    let k4 = rhs(&s.advanced(&k3, dt), p)?;
    let combine = |base: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..base.len())
            .map(|i| base[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    let next = ParticleEnsemble::from_parts(
        s.dim(),
        combine(s.positions(), &k1.dx, &k2.dx, &k3.dx, &k4.dx),
        combine(s.velocities(), &k1.dv, &k2.dv, &k3.dv, &k4.dv),
        combine(s.temperatures(), &k1.dtemp, &k2.dtemp, &k3.dtemp, &k4.dtemp),
    )?;
    next.check_finite()?;
    next.check_temperatures()?;
    Ok(next)
}

/// Integrates from `t = 0` to `cfg.t_end`, calling `observer` on every
/// recorded sample (including `t = 0`).
pub fn integrate<F>(
    s0: &ParticleEnsemble,
    p: &ModelParams,
    cfg: &IntegratorConfig,
    ctx: &DiagnosticsContext,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(&DiagnosticsRecord, &ParticleEnsemble),
{
    cfg.validate()?;
    s0.check_finite()?;
    s0.check_temperatures()?;
    let at = |time: f64| {
        move |e: TcsError| TcsError::AtTime {
            time,
            source: Box::new(e),
        }
    };

    let step_times = cfg.step_times();
    let mut traj = Trajectory {
        times: Vec::new(),
        records: Vec::new(),
        states: cfg.retain_states.then(Vec::new),
        dt: cfg.dt,
        record_stride: cfg.record_stride,
        lyapunov_eps: ctx.eps(),
    };
    let mut push = |traj: &mut Trajectory, t: f64, s: &ParticleEnsemble| {
        let record = ctx.record(t, s);
        observer(&record, s);
        traj.times.push(t);
        traj.records.push(record);
        if let Some(states) = traj.states.as_mut() {
            states.push(s.clone());
        }
    };

    push(&mut traj, 0.0, s0);
    let mut state = s0.clone();
    let mut t_prev = 0.0;
    for (k, &t) in step_times.iter().enumerate() {
        state = rk4_step(&state, p, t - t_prev).map_err(at(t_prev))?;
        t_prev = t;
        let step = k + 1;
        if step % cfg.record_stride == 0 || step == step_times.len() {
            push(&mut traj, t, &state);
        }
    }
    Ok(traj)
}
