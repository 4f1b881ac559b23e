use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LoadProfile, NoiseProvenance};
use crate::error::{Error, Result};

pub const OCTAVE_RANGE: RangeInclusive<u32> = 2..=10;

/// Knobs for the noise added to each load variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Peak noise amplitude as a fraction of `max |base|`.
    pub amplitude: f64,
    /// Lattice cells across `[0, L]` for the first octave.
    pub base_cells: f64,
    /// Amplitude ratio between successive octaves.
    pub persistence: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.25,
            base_cells: 5.0,
            persistence: 0.5,
        }
    }
}

/// Classic 1-D gradient noise summed over octaves (fractal Brownian motion).
///
/// Output is scaled so a single octave spans `[-1, 1]`; the octave sum is
/// divided by the total octave weight, so the range holds for any octave count.
#[derive(Debug, Clone)]
pub struct PerlinNoise1d {
    layers: Vec<Layer>,
    total_weight: f64,
}

#[derive(Debug, Clone)]
struct Layer {
    frequency: f64,
    weight: f64,
    offset: f64,
    gradients: Vec<f64>,
}

impl PerlinNoise1d {
    pub fn new(seed: u64, octaves: u32, base_cells: f64, persistence: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(octaves as usize);
        let mut weight = 1.0;
        let mut total_weight = 0.0;
        for o in 0..octaves {
            let frequency = base_cells * f64::from(1u32 << o);
            // random lattice offset so x = 0 is not pinned to zero
            let offset = rng.gen::<f64>();
            let cells = (frequency + offset).ceil() as usize + 2;
            let gradients = (0..cells).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            layers.push(Layer {
                frequency,
                weight,
                offset,
                gradients,
            });
            total_weight += weight;
            weight *= persistence;
        }
        Self {
            layers,
            total_weight,
        }
    }

    /// Noise at normalized position `t ∈ [0, 1]`.
    pub fn sample(&self, t: f64) -> f64 {
        let sum: f64 = self
            .layers
            .iter()
            .map(|layer| layer.weight * layer.gradient_noise(t * layer.frequency + layer.offset))
            .sum();
        2.0 * sum / self.total_weight
    }
}

impl Layer {
    fn gradient_noise(&self, x: f64) -> f64 {
        let i = x.floor();
        let t = x - i;
        let i = (i.max(0.0) as usize).min(self.gradients.len() - 2);
        let g0 = self.gradients[i];
        let g1 = self.gradients[i + 1];
        let fade = t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let a = g0 * t;
        let b = g1 * (t - 1.0);
        a + fade * (b - a)
    }
}

impl NoiseConfig {
    pub fn apply(&self, base: &LoadProfile, seed: u64, octave: u32) -> Result<LoadProfile> {
        if !OCTAVE_RANGE.contains(&octave) {
            return Err(Error::arg(format!(
                "octave {octave} outside [{}, {}]",
                OCTAVE_RANGE.start(),
                OCTAVE_RANGE.end()
            )));
        }
        let peak = base.samples().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let amplitude = self.amplitude * peak;
        let noise = PerlinNoise1d::new(seed, octave, self.base_cells, self.persistence);
        let last = (base.len() - 1) as f64;
        let samples = base
            .samples()
            .iter()
            .enumerate()
            .map(|(i, v)| v + amplitude * noise.sample(i as f64 / last))
            .collect();
        Ok(base
            .with_samples(samples)
            .with_noise(NoiseProvenance { seed, octave }))
    }
}

/// Adds Perlin noise with the default [`NoiseConfig`].
pub fn add_perlin_noise(base: &LoadProfile, seed: u64, octave: u32) -> Result<LoadProfile> {
    NoiseConfig::default().apply(base, seed, octave)
}
