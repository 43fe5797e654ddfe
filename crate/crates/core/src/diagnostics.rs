//! Fluctuation functionals, conservation monitors, the dissipation check on
//! recorded trajectories, and an independent integrator for the fluctuation
//! system used as an oracle against the full simulation.

use crate::analysis::TheoremConstants;
use crate::error::{Result, TcsError};
use crate::integrator::{rk4_step, IntegratorConfig, Trajectory};
use crate::model::{
    asymptotic_temperature, center_of_mass, total_energy, CenterOfMass, ConservedQuantities,
    ModelParams, ParticleEnsemble,
};
use crate::numeric::{compensated_sum, dist_sq, dot, norm_sq, CompensatedSum};

/// Deviations `x_a - x_c`, `v_a - v_c` and `T_a - T_inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationState {
    pub dim: usize,
    pub xhat: Vec<f64>,
    pub vhat: Vec<f64>,
    pub that: Vec<f64>,
}

impl FluctuationState {
    pub fn len(&self) -> usize {
        self.that.len()
    }

    pub fn is_empty(&self) -> bool {
        self.that.is_empty()
    }

    fn row<'a>(&self, data: &'a [f64], a: usize) -> &'a [f64] {
        &data[a * self.dim..(a + 1) * self.dim]
    }

    fn advanced(&self, d: &FluctuationDerivative, h: f64) -> Self {
        let axpy = |b: &[f64], i: &[f64]| b.iter().zip(i).map(|(b, i)| b + h * i).collect();
        Self {
            dim: self.dim,
            xhat: axpy(&self.xhat, &d.dxhat),
            vhat: axpy(&self.vhat, &d.dvhat),
            that: axpy(&self.that, &d.dthat),
        }
    }
}

pub fn fluctuations(s: &ParticleEnsemble, t_inf: f64) -> FluctuationState {
    let com = center_of_mass(s);
    fluctuations_about(s, &com.x, &com.v, t_inf)
}

/// Fluctuations about an externally supplied mean.
pub fn fluctuations_about(
    s: &ParticleEnsemble,
    x_c: &[f64],
    v_c: &[f64],
    t_inf: f64,
) -> FluctuationState {
    let dim = s.dim();
    FluctuationState {
        dim,
        xhat: s
            .positions()
            .iter()
            .enumerate()
            .map(|(i, x)| x - x_c[i % dim])
            .collect(),
        vhat: s
            .velocities()
            .iter()
            .enumerate()
            .map(|(i, v)| v - v_c[i % dim])
            .collect(),
        that: s.temperatures().iter().map(|t| t - t_inf).collect(),
    }
}

/// The l2 norms `X`, `V` and `T` of the fluctuations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationNorms {
    pub x: f64,
    pub v: f64,
    pub t: f64,
}

pub fn norms(f: &FluctuationState) -> FluctuationNorms {
    let sq = |data: &[f64]| compensated_sum(data.iter().map(|v| v * v)).sqrt();
    FluctuationNorms {
        x: sq(&f.xhat),
        v: sq(&f.vhat),
        t: sq(&f.that),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValue {
    pub value: f64,
    /// `eps` lies outside `(0, 1/2]`, where the equivalence with
    /// `X^2 + V^2` is not guaranteed.
    pub eps_out_of_range: bool,
}

/// `L = sum_a (|xhat_a|^2 / 2 + |vhat_a|^2 / 2 + eps xhat_a . vhat_a)`.
pub fn lyapunov(f: &FluctuationState, eps: f64) -> LyapunovValue {
    let value = compensated_sum((0..f.len()).map(|a| {
        let (x, v) = (f.row(&f.xhat, a), f.row(&f.vhat, a));
        0.5 * norm_sq(x) + 0.5 * norm_sq(v) + eps * dot(x, v)
    }));
    LyapunovValue {
        value,
        eps_out_of_range: !(eps > 0.0 && eps <= 0.5),
    }
}

/// Per-sample functionals written to the time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub x_norm: f64,
    pub v_norm: f64,
    pub t_norm: f64,
    pub energy: f64,
    pub x_c: Vec<f64>,
    pub v_c: Vec<f64>,
    pub t_inf: f64,
    pub lyapunov: f64,
    pub min_t: f64,
    pub max_t: f64,
}

impl DiagnosticsRecord {
    /// `max_a |T_a - T_inf|`.
    pub fn max_temperature_deviation(&self) -> f64 {
        (self.max_t - self.t_inf).max(self.t_inf - self.min_t)
    }
}

/// Everything needed to turn a state into a [`DiagnosticsRecord`].
#[derive(Debug, Clone)]
pub struct DiagnosticsContext {
    conserved: ConservedQuantities,
    eps: f64,
}

impl DiagnosticsContext {
    pub fn new(s0: &ParticleEnsemble, eps: f64) -> Self {
        Self {
            conserved: ConservedQuantities::from_initial(s0),
            eps,
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn conserved(&self) -> &ConservedQuantities {
        &self.conserved
    }

    pub fn record(&self, t: f64, s: &ParticleEnsemble) -> DiagnosticsRecord {
        let com = center_of_mass(s);
        let t_inf = asymptotic_temperature(&self.conserved, &com.v);
        let f = fluctuations_about(s, &com.x, &com.v, t_inf);
        let nrm = norms(&f);
        let temps = s.temperatures();
        DiagnosticsRecord {
            t,
            x_norm: nrm.x,
            v_norm: nrm.v,
            t_norm: nrm.t,
            energy: total_energy(s),
            t_inf,
            lyapunov: lyapunov(&f, self.eps).value,
            min_t: temps.iter().copied().fold(f64::INFINITY, f64::min),
            max_t: temps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            x_c: com.x,
            v_c: com.v,
        }
    }
}

/// Closed-form center-of-mass orbit and asymptotic temperature at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanState {
    pub x_c: Vec<f64>,
    pub v_c: Vec<f64>,
    pub t_inf: f64,
}

impl MeanState {
    pub fn harmonic(initial: &CenterOfMass, conserved: &ConservedQuantities, t: f64) -> MeanState {
        let (s, c) = t.sin_cos();
        let x_c: Vec<f64> = initial
            .x
            .iter()
            .zip(&initial.v)
            .map(|(x, v)| c * x + s * v)
            .collect();
        let v_c: Vec<f64> = initial
            .x
            .iter()
            .zip(&initial.v)
            .map(|(x, v)| -s * x + c * v)
            .collect();
        let t_inf = asymptotic_temperature(conserved, &v_c);
        MeanState { x_c, v_c, t_inf }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationDerivative {
    pub dxhat: Vec<f64>,
    pub dvhat: Vec<f64>,
    pub dthat: Vec<f64>,
}

/// Right-hand side of the fluctuation system, driven by a given mean state.
/// The temperature line is stated for `d/dt (That_a + |vhat_a|^2 / 2)` and
/// solved for `dThat_a/dt`.
pub fn fluctuation_rhs(
    f: &FluctuationState,
    aux: &MeanState,
    p: &ModelParams,
) -> Result<FluctuationDerivative> {
    let (n, dim) = (f.len(), f.dim);
    let temps: Vec<f64> = f.that.iter().map(|t| t + aux.t_inf).collect();
    if let Some(index) = temps.iter().position(|&t| !(t > 0.0)) {
        return Err(TcsError::TemperatureCollapse {
            index,
            value: temps[index],
        });
    }
    let inv: Vec<f64> = temps.iter().map(|t| 1.0 / t).collect();
    let scale1 = p.kappa1 / n as f64;
    let scale2 = p.kappa2 / n as f64;
    let mut dvhat = vec![0.0; n * dim];
    let mut dthat = vec![0.0; n];
    for a in 0..n {
        let xa = f.row(&f.xhat, a);
        let va = f.row(&f.vhat, a);
        let mut align = vec![CompensatedSum::new(); dim];
        let mut heat = CompensatedSum::new();
        for b in 0..n {
            let xb = f.row(&f.xhat, b);
            let vb = f.row(&f.vhat, b);
            let r2 = dist_sq(xa, xb);
            let phi = p.phi.at_distance_sq(r2);
            let zeta = p.zeta.at_distance_sq(r2);
            for k in 0..dim {
                align[k].add(phi * (vb[k] * inv[b] - va[k] * inv[a]));
            }
            heat.add(zeta * (inv[a] - inv[b]));
        }
        let dva = &mut dvhat[a * dim..(a + 1) * dim];
        for k in 0..dim {
            dva[k] = scale1 * align[k].value() - xa[k];
        }
        let drive = dot(&aux.x_c, va) + dot(&aux.v_c, xa);
        dthat[a] = scale2 * heat.value() + drive - dot(va, dva);
    }
    Ok(FluctuationDerivative {
        dxhat: f.vhat.clone(),
        dvhat,
        dthat,
    })
}

fn fluctuation_rk4_step(
    f: &FluctuationState,
    p: &ModelParams,
    initial: &CenterOfMass,
    conserved: &ConservedQuantities,
    t: f64,
    h: f64,
) -> Result<FluctuationState> {
    let mid = MeanState::harmonic(initial, conserved, t + 0.5 * h);
    let k1 = fluctuation_rhs(f, &MeanState::harmonic(initial, conserved, t), p)?;
    let k2 = fluctuation_rhs(&f.advanced(&k1, 0.5 * h), &mid, p)?;
    let k3 = fluctuation_rhs(&f.advanced(&k2, 0.5 * h), &mid, p)?;
    let k4 = fluctuation_rhs(
        &f.advanced(&k3, h),
        &MeanState::harmonic(initial, conserved, t + h),
        p,
    )?;
    let combine = |base: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..base.len())
            .map(|i| base[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    Ok(FluctuationState {
        dim: f.dim,
        xhat: combine(&f.xhat, &k1.dxhat, &k2.dxhat, &k3.dxhat, &k4.dxhat),
        vhat: combine(&f.vhat, &k1.dvhat, &k2.dvhat, &k3.dvhat, &k4.dvhat),
        that: combine(&f.that, &k1.dthat, &k2.dthat, &k3.dthat, &k4.dthat),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub t: f64,
    pub simulated: FluctuationNorms,
    pub oracle: FluctuationNorms,
    /// l2 norms of the differences between the two fluctuation states.
    pub deviation: FluctuationNorms,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub samples: Vec<OracleSample>,
    pub max_deviation: FluctuationNorms,
}

/// Integrates the full system and the fluctuation system side by side on
/// the same step grid. Fluctuations of the full run are taken about the
/// closed-form mean; the fluctuation run is driven by the same closed form.
pub fn run_fluctuation_oracle(
    s0: &ParticleEnsemble,
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<OracleReport> {
    cfg.validate()?;
    let initial = center_of_mass(s0);
    let conserved = ConservedQuantities::from_initial(s0);
    let mean0 = MeanState::harmonic(&initial, &conserved, 0.0);
    let mut full = s0.clone();
    let mut fl = fluctuations_about(s0, &mean0.x_c, &mean0.v_c, mean0.t_inf);

    let mut samples = Vec::new();
    let mut max_dev = FluctuationNorms {
        x: 0.0,
        v: 0.0,
        t: 0.0,
    };
    let mut sample = |t: f64, full: &ParticleEnsemble, fl: &FluctuationState| {
        let mean = MeanState::harmonic(&initial, &conserved, t);
        let sim = fluctuations_about(full, &mean.x_c, &mean.v_c, mean.t_inf);
        let diff = FluctuationState {
            dim: sim.dim,
            xhat: sim.xhat.iter().zip(&fl.xhat).map(|(a, b)| a - b).collect(),
            vhat: sim.vhat.iter().zip(&fl.vhat).map(|(a, b)| a - b).collect(),
            that: sim.that.iter().zip(&fl.that).map(|(a, b)| a - b).collect(),
        };
        let deviation = norms(&diff);
        max_dev.x = max_dev.x.max(deviation.x);
        max_dev.v = max_dev.v.max(deviation.v);
        max_dev.t = max_dev.t.max(deviation.t);
        samples.push(OracleSample {
            t,
            simulated: norms(&sim),
            oracle: norms(fl),
            deviation,
        });
    };

    sample(0.0, &full, &fl);
    let steps = cfg.step_times();
    let mut t_prev = 0.0;
    for (k, &t) in steps.iter().enumerate() {
        let h = t - t_prev;
        let wrap = |e: TcsError| TcsError::AtTime {
            time: t_prev,
            source: Box::new(e),
        };
        full = rk4_step(&full, p, h).map_err(wrap)?;
        fl = fluctuation_rk4_step(&fl, p, &initial, &conserved, t_prev, h).map_err(wrap)?;
        t_prev = t;
        if (k + 1) % cfg.record_stride == 0 || k + 1 == steps.len() {
            sample(t, &full, &fl);
        }
    }
    Ok(OracleReport {
        samples,
        max_deviation: max_dev,
    })
}

/// Running maxima of the conservation and structure residuals.
#[derive(Debug, Clone)]
pub struct InvariantMonitor {
    initial: CenterOfMass,
    energy0: f64,
    /// `max |E(t) - E(0)| / |E(0)|`.
    pub energy_drift: f64,
    /// Max-norm distance of `(x_c, v_c)` from the harmonic orbit.
    pub center_of_mass_error: f64,
    /// `max |sum xhat|, |sum vhat|` divided by `n * scale`, with scale the
    /// largest position or velocity magnitude in the sample.
    pub zero_mean_residual: f64,
    /// `max |sum (T_a - T_inf) + V^2 / 2|` divided by `|E(0)|`.
    pub temperature_identity_residual: f64,
    pub samples: usize,
}

impl InvariantMonitor {
    pub fn new(s0: &ParticleEnsemble) -> Self {
        Self {
            initial: center_of_mass(s0),
            energy0: total_energy(s0),
            energy_drift: 0.0,
            center_of_mass_error: 0.0,
            zero_mean_residual: 0.0,
            temperature_identity_residual: 0.0,
            samples: 0,
        }
    }

    pub fn observe(&mut self, record: &DiagnosticsRecord, s: &ParticleEnsemble) {
        let e_scale = self.energy0.abs().max(f64::MIN_POSITIVE);
        self.energy_drift = self
            .energy_drift
            .max((record.energy - self.energy0).abs() / e_scale);

        let (sin, cos) = record.t.sin_cos();
        for k in 0..s.dim() {
            let (x0, v0) = (self.initial.x[k], self.initial.v[k]);
            let dx = (record.x_c[k] - (cos * x0 + sin * v0)).abs();
            let dv = (record.v_c[k] - (-sin * x0 + cos * v0)).abs();
            self.center_of_mass_error = self.center_of_mass_error.max(dx).max(dv);
        }

        let n = s.len() as f64;
        let scale = s
            .positions()
            .iter()
            .chain(s.velocities())
            .fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        let f = fluctuations_about(s, &record.x_c, &record.v_c, record.t_inf);
        for k in 0..s.dim() {
            let sx = compensated_sum((0..s.len()).map(|a| f.xhat[a * s.dim() + k]));
            let sv = compensated_sum((0..s.len()).map(|a| f.vhat[a * s.dim() + k]));
            self.zero_mean_residual = self
                .zero_mean_residual
                .max(sx.abs() / (n * scale))
                .max(sv.abs() / (n * scale));
        }
        let identity = compensated_sum(f.that.iter().copied()) + 0.5 * record.v_norm.powi(2);
        self.temperature_identity_residual = self
            .temperature_identity_residual
            .max(identity.abs() / e_scale);
        self.samples += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipativeViolation {
    pub t: f64,
    /// Centered-difference estimate of `dL/dt`.
    pub dl_dt: f64,
    pub bound: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DissipativeCheck {
    pub checked: usize,
    pub violations: Vec<DissipativeViolation>,
    /// Samples where the a priori temperature condition fails; skipped.
    pub out_of_range: Vec<f64>,
    pub tolerance: f64,
}

/// Checks the dissipative inequality for `L` along a recorded trajectory.
///
/// `dL/dt` is estimated by centered differences on the record grid; the
/// allowance is `10 h^2 * max|L'''|` (third differences of the data) plus a
/// rounding floor.
pub fn dissipative_inequality_check(
    traj: &Trajectory,
    p: &ModelParams,
    c: &TheoremConstants,
) -> Result<DissipativeCheck> {
    if (traj.lyapunov_eps - c.eps).abs() > 0.0 {
        return Err(TcsError::Trajectory(format!(
            "trajectory recorded L with eps = {}, constants use eps = {}",
            traj.lyapunov_eps, c.eps
        )));
    }
    let rec = &traj.records;
    if rec.len() < 5 {
        return Err(TcsError::Trajectory(
            "need at least 5 records for centered differences".into(),
        ));
    }
    let h = rec[1].t - rec[0].t;
    let uniform = |i: usize| ((rec[i + 1].t - rec[i].t) - h).abs() <= 1e-9 * h;

    let mut third = 0.0f64;
    for i in 1..rec.len() - 2 {
        if (i - 1..=i + 1).all(uniform) {
            let d3 = rec[i + 2].lyapunov - 3.0 * rec[i + 1].lyapunov + 3.0 * rec[i].lyapunov
                - rec[i - 1].lyapunov;
            third = third.max(d3.abs() / h.powi(3));
        }
    }
    let l_max = rec.iter().fold(0.0f64, |m, r| m.max(r.lyapunov.abs()));
    let tolerance = 10.0 * h * h * third + 8.0 * f64::EPSILON * l_max / h;

    let a_priori_global = c.t_min > 3.0 * c.eps0;
    let phi0 = p.phi.at_zero();
    let thermal = p.kappa1 * c.eps0 * phi0 / (c.t_min - c.eps0).powi(2);
    let mut out = DissipativeCheck {
        tolerance,
        ..Default::default()
    };
    for i in 1..rec.len() - 1 {
        if !(uniform(i - 1) && uniform(i)) {
            continue;
        }
        let r = &rec[i];
        if !a_priori_global || r.max_temperature_deviation() > c.eps0 {
            out.out_of_range.push(r.t);
            continue;
        }
        let dl_dt = (rec[i + 1].lyapunov - rec[i - 1].lyapunov) / (2.0 * h);
        let phi = p.phi.at_distance_sq(2.0 * r.x_norm * r.x_norm);
        let coeff = -2.0 * c.lambda * phi + c.eps * c.gamma + thermal;
        let bound = coeff * r.v_norm.powi(2) - 0.5 * c.eps * r.x_norm.powi(2);
        out.checked += 1;
        if dl_dt > bound + tolerance {
            out.violations.push(DissipativeViolation {
                t: r.t,
                dl_dt,
                bound,
                tolerance,
            });
        }
    }
    Ok(out)
}
