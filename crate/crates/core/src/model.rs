//! State, communication kernels and the right-hand side of the thermodynamic
//! Cucker-Smale system in the harmonic potential `|x|^2 / 2`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, TcsError};
use crate::numeric::{column_means, compensated_sum, dist_sq, dot, norm_sq, CompensatedSum};

/// Temperatures at or below this value abort the simulation.
pub const COLLAPSE_THRESHOLD: f64 = 1e-12;

type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied kernel. Construction spot-checks positivity, monotonicity
/// and the declared Lipschitz constant on a geometric grid.
#[derive(Clone)]
pub struct CustomKernel {
    name: String,
    f: KernelFn,
    lipschitz: f64,
}

impl CustomKernel {
    pub fn new<F>(name: impl Into<String>, f: F, lipschitz: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(TcsError::InvalidKernel(format!(
                "{name}: Lipschitz constant must be finite and nonnegative"
            )));
        }
        let mut grid = vec![0.0];
        let mut r = 1e-4;
        while r <= 1e4 {
            grid.push(r);
            r *= 1.25;
        }
        let mut prev: Option<(f64, f64)> = None;
        for &r in &grid {
            let value = f(r);
            let positive_at_origin = r > 0.0 || value > 0.0;
            if !(value.is_finite() && value >= 0.0 && positive_at_origin) {
                return Err(TcsError::InvalidKernel(format!(
                    "{name}: value {value} at r = {r} is not admissible"
                )));
            }
            if let Some((r0, v0)) = prev {
                if value > v0 {
                    return Err(TcsError::InvalidKernel(format!(
                        "{name}: increases between r = {r0} and r = {r}"
                    )));
                }
                if (v0 - value) > lipschitz * (r - r0) * (1.0 + 1e-12) {
                    return Err(TcsError::InvalidKernel(format!(
                        "{name}: slope on [{r0}, {r}] exceeds the declared Lipschitz constant {lipschitz}"
                    )));
                }
            }
            prev = Some((r, value));
        }
        Ok(Self {
            name,
            f: Arc::new(f),
            lipschitz,
        })
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// Communication weight as a function of inter-particle distance.
///
/// The built-in family is `c * (1 + r^2)^(-beta / 2)`, which is positive,
/// nonincreasing and Lipschitz with constant `c * beta / 2`.
#[derive(Debug, Clone)]
pub enum CommunicationKernel {
    Algebraic { amplitude: f64, exponent: f64 },
    Custom(CustomKernel),
}

impl CommunicationKernel {
    pub fn algebraic(amplitude: f64, exponent: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(TcsError::InvalidKernel(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(TcsError::InvalidKernel(format!(
                "decay exponent must be nonnegative, got {exponent}"
            )));
        }
        Ok(CommunicationKernel::Algebraic {
            amplitude,
            exponent,
        })
    }

    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(TcsError::KernelDomain(r));
        }
        Ok(self.at_distance_sq(r * r))
    }

    /// Kernel value from a squared distance; skips the domain check.
    #[inline]
    pub(crate) fn at_distance_sq(&self, r2: f64) -> f64 {
        match self {
            CommunicationKernel::Algebraic {
                amplitude,
                exponent,
            } => {
                let base = 1.0 + r2;
                if *exponent == 1.0 {
                    amplitude / base.sqrt()
                } else if *exponent == 2.0 {
                    amplitude / base
                } else if *exponent == 0.0 {
                    *amplitude
                } else {
                    amplitude * base.powf(-0.5 * exponent)
                }
            }
            CommunicationKernel::Custom(k) => (k.f)(r2.sqrt()),
        }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            CommunicationKernel::Algebraic {
                amplitude,
                exponent,
            } => 0.5 * amplitude * exponent,
            CommunicationKernel::Custom(k) => k.lipschitz,
        }
    }

    /// Value at zero distance, the kernel's maximum.
    pub fn at_zero(&self) -> f64 {
        self.at_distance_sq(0.0)
    }
}

/// Coupling strengths and kernels.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub phi: CommunicationKernel,
    pub zeta: CommunicationKernel,
    pub dim: usize,
}

impl ModelParams {
    /// Zero couplings are accepted so degenerate regimes can be simulated;
    /// the theorem checks report them as failing.
    pub fn new(
        kappa1: f64,
        kappa2: f64,
        phi: CommunicationKernel,
        zeta: CommunicationKernel,
        dim: usize,
    ) -> Result<Self> {
        for (name, k) in [("kappa1", kappa1), ("kappa2", kappa2)] {
            if !(k.is_finite() && k >= 0.0) {
                return Err(TcsError::InvalidParams(format!(
                    "{name} must be finite and nonnegative, got {k}"
                )));
            }
        }
        if dim == 0 {
            return Err(TcsError::InvalidParams("dim must be at least 1".into()));
        }
        Ok(Self {
            kappa1,
            kappa2,
            phi,
            zeta,
            dim,
        })
    }
}

/// Positions, velocities and temperatures of `n` unit-mass particles in `d`
/// dimensions. Vectors are stored row-major, one row per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    temperatures: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(
        dim: usize,
        positions: Vec<f64>,
        velocities: Vec<f64>,
        temperatures: Vec<f64>,
    ) -> Result<Self> {
        let s = Self::from_parts(dim, positions, velocities, temperatures)?;
        s.check_finite()?;
        s.check_temperatures()?;
        Ok(s)
    }

    /// Builds an ensemble from per-particle vectors.
    pub fn from_rows(
        positions: &[Vec<f64>],
        velocities: &[Vec<f64>],
        temperatures: &[f64],
    ) -> Result<Self> {
        let dim = positions.first().map_or(0, Vec::len);
        if positions.iter().chain(velocities).any(|r| r.len() != dim) {
            return Err(TcsError::Shape("rows have differing dimensions".into()));
        }
        Self::new(
            dim,
            positions.concat(),
            velocities.concat(),
            temperatures.to_vec(),
        )
    }

    /// Shape-checked constructor without the admissibility checks; used for
    /// Runge-Kutta stage states.
    pub(crate) fn from_parts(
        dim: usize,
        positions: Vec<f64>,
        velocities: Vec<f64>,
        temperatures: Vec<f64>,
    ) -> Result<Self> {
        let n = temperatures.len();
        if dim == 0 || n == 0 {
            return Err(TcsError::Shape(format!(
                "need n >= 1 and d >= 1, got n = {n}, d = {dim}"
            )));
        }
        if positions.len() != n * dim || velocities.len() != n * dim {
            return Err(TcsError::Shape(format!(
                "expected {} position and velocity entries for n = {n}, d = {dim}; got {} and {}",
                n * dim,
                positions.len(),
                velocities.len()
            )));
        }
        Ok(Self {
            dim,
            positions,
            velocities,
            temperatures,
        })
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if !self.positions.iter().all(|v| v.is_finite()) {
            return Err(TcsError::NumericalBlowUp("positions"));
        }
        if !self.velocities.iter().all(|v| v.is_finite()) {
            return Err(TcsError::NumericalBlowUp("velocities"));
        }
        if !self.temperatures.iter().all(|v| v.is_finite()) {
            return Err(TcsError::NumericalBlowUp("temperatures"));
        }
        Ok(())
    }

    pub(crate) fn check_temperatures(&self) -> Result<()> {
        match self
            .temperatures
            .iter()
            .position(|&t| !(t > COLLAPSE_THRESHOLD))
        {
            Some(index) => Err(TcsError::TemperatureCollapse {
                index,
                value: self.temperatures[index],
            }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.temperatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temperatures.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, alpha: usize) -> &[f64] {
        &self.positions[alpha * self.dim..(alpha + 1) * self.dim]
    }

    pub fn velocity(&self, alpha: usize) -> &[f64] {
        &self.velocities[alpha * self.dim..(alpha + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    /// `self + h * d`, without admissibility checks.
    pub(crate) fn advanced(&self, d: &Derivative, h: f64) -> Self {
        let axpy = |base: &[f64], inc: &[f64]| -> Vec<f64> {
            base.iter().zip(inc).map(|(b, i)| b + h * i).collect()
        };
        Self {
            dim: self.dim,
            positions: axpy(&self.positions, &d.dx),
            velocities: axpy(&self.velocities, &d.dv),
            temperatures: axpy(&self.temperatures, &d.dtemp),
        }
    }
}

/// Time derivative of a [`ParticleEnsemble`], same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
    pub dtemp: Vec<f64>,
}

/// Arithmetic means of positions, velocities and temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterOfMass {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub temperature: f64,
}

pub fn center_of_mass(s: &ParticleEnsemble) -> CenterOfMass {
    CenterOfMass {
        x: column_means(&s.positions, s.dim),
        v: column_means(&s.velocities, s.dim),
        temperature: compensated_sum(s.temperatures.iter().copied()) / s.len() as f64,
    }
}

/// Quantities fixed by the initial data: the mean temperature `T_c(0)` and
/// the mean kinetic energy `(1/2n) sum |v_a(0)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedQuantities {
    pub mean_temperature: f64,
    pub mean_kinetic: f64,
}

impl ConservedQuantities {
    pub fn from_initial(s0: &ParticleEnsemble) -> Self {
        let n = s0.len() as f64;
        let kinetic = compensated_sum((0..s0.len()).map(|a| norm_sq(s0.velocity(a))));
        Self {
            mean_temperature: compensated_sum(s0.temperatures.iter().copied()) / n,
            mean_kinetic: 0.5 * kinetic / n,
        }
    }
}

/// `T_inf(t) = -|v_c(t)|^2 / 2 + T_c(0) + (1/2n) sum |v_a(0)|^2`.
pub fn asymptotic_temperature(conserved: &ConservedQuantities, v_c: &[f64]) -> f64 {
    -0.5 * norm_sq(v_c) + conserved.mean_temperature + conserved.mean_kinetic
}

/// Lower and upper temperature bounds `(T_m, T_M)` determined by the
/// initial data. `T_m` must be positive.
pub fn extreme_temperature_bounds(s0: &ParticleEnsemble) -> Result<(f64, f64)> {
    let conserved = ConservedQuantities::from_initial(s0);
    let com = center_of_mass(s0);
    let t_max = conserved.mean_temperature + conserved.mean_kinetic;
    let t_min = t_max - (norm_sq(&com.v) + norm_sq(&com.x));
    if t_min > 0.0 {
        Ok((t_min, t_max))
    } else {
        Err(TcsError::InadmissibleInitialData(t_min))
    }
}

/// `E = sum_a (T_a + |v_a|^2 / 2)`.
pub fn total_energy(s: &ParticleEnsemble) -> f64 {
    compensated_sum((0..s.len()).map(|a| s.temperatures[a] + 0.5 * norm_sq(s.velocity(a))))
}

/// Symmetric matrices of pairwise kernel values, row-major `n x n`.
pub(crate) fn kernel_matrices(
    positions: &[f64],
    dim: usize,
    phi: &CommunicationKernel,
    zeta: &CommunicationKernel,
) -> (Vec<f64>, Vec<f64>) {
    let n = positions.len() / dim;
    let mut phi_m = vec![0.0; n * n];
    let mut zeta_m = vec![0.0; n * n];
    let (phi0, zeta0) = (phi.at_zero(), zeta.at_zero());
    for a in 0..n {
        phi_m[a * n + a] = phi0;
        zeta_m[a * n + a] = zeta0;
        let xa = &positions[a * dim..(a + 1) * dim];
        for b in (a + 1)..n {
            let r2 = dist_sq(xa, &positions[b * dim..(b + 1) * dim]);
            let (p, z) = (phi.at_distance_sq(r2), zeta.at_distance_sq(r2));
            phi_m[a * n + b] = p;
            phi_m[b * n + a] = p;
            zeta_m[a * n + b] = z;
            zeta_m[b * n + a] = z;
        }
    }
    (phi_m, zeta_m)
}

/// Right-hand side of the system. The temperature equation is stated for
/// `d/dt (T_a + |v_a|^2 / 2)`; it is solved for `dT_a/dt` using the
/// velocity derivative computed in the same call.
pub fn rhs(s: &ParticleEnsemble, p: &ModelParams) -> Result<Derivative> {
    if s.dim != p.dim {
        return Err(TcsError::Shape(format!(
            "ensemble dimension {} does not match model dimension {}",
            s.dim, p.dim
        )));
    }
    s.check_temperatures()?;
    let (n, dim) = (s.len(), s.dim);
    let v_c = column_means(&s.velocities, dim);
    let inv_t: Vec<f64> = s.temperatures.iter().map(|t| 1.0 / t).collect();
    // (v_a - v_c) / T_a
    let weighted: Vec<f64> = (0..n * dim)
        .map(|i| (s.velocities[i] - v_c[i % dim]) * inv_t[i / dim])
        .collect();
    let (phi_m, zeta_m) = kernel_matrices(&s.positions, dim, &p.phi, &p.zeta);

    let scale1 = p.kappa1 / n as f64;
    let scale2 = p.kappa2 / n as f64;
    let mut dv = vec![0.0; n * dim];
    let mut dtemp = vec![0.0; n];
    let mut coupling = vec![CompensatedSum::new(); dim];
    for a in 0..n {
        coupling.iter_mut().for_each(|c| *c = CompensatedSum::new());
        let mut heat = CompensatedSum::new();
        let wa = &weighted[a * dim..(a + 1) * dim];
        for b in 0..n {
            let phi_ab = phi_m[a * n + b];
            let wb = &weighted[b * dim..(b + 1) * dim];
            for k in 0..dim {
                coupling[k].add(phi_ab * (wb[k] - wa[k]));
            }
            heat.add(zeta_m[a * n + b] * (inv_t[a] - inv_t[b]));
        }
        let force: Vec<f64> = coupling.iter().map(|c| scale1 * c.value()).collect();
        let xa = s.position(a);
        let va = s.velocity(a);
        let dva = &mut dv[a * dim..(a + 1) * dim];
        for k in 0..dim {
            dva[k] = force[k] - xa[k];
        }
        dtemp[a] = scale2 * heat.value() + dot(&force, &v_c) - dot(va, dva);
    }
    Ok(Derivative {
        dx: s.velocities.clone(),
        dv,
        dtemp,
    })
}
