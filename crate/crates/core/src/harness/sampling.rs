//! Seeded initial data. Each coordinate is drawn from its own position in a
//! counter-based ChaCha stream, so a value depends only on
//! `(seed, particle, coordinate)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Interval, ScenarioConfig};
use crate::error::Result;
use crate::model::ParticleEnsemble;

/// Uniform draw in `[0, 1)` for one `(seed, particle, coordinate)` key.
pub fn keyed_unit(seed: u64, particle: usize, coordinate: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(particle as u64);
    // One u64 consumes two 32-bit words.
    rng.set_word_pos(2 * coordinate as u128);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn draw(iv: &Interval, u: f64) -> f64 {
    iv.lo + iv.width() * u
}

/// Coordinates `0..d` are positions, `d..2d` velocities, `2d` temperature.
pub fn sample_initial_data(cfg: &ScenarioConfig) -> Result<ParticleEnsemble> {
    cfg.validate()?;
    let d = cfg.dim;
    let mut x = Vec::with_capacity(cfg.n * d);
    let mut v = Vec::with_capacity(cfg.n * d);
    let mut temps = Vec::with_capacity(cfg.n);
    for a in 0..cfg.n {
        for (k, iv) in cfg.position_box.iter().enumerate() {
            x.push(draw(iv, keyed_unit(cfg.seed, a, k)));
        }
        for (k, iv) in cfg.velocity_box.iter().enumerate() {
            v.push(draw(iv, keyed_unit(cfg.seed, a, d + k)));
        }
        temps.push(draw(
            &cfg.temperature_interval,
            keyed_unit(cfg.seed, a, 2 * d),
        ));
    }
    ParticleEnsemble::new(d, x, v, temps)
}
