//! Distributed loads on `[0, L]`, sampled at `N` evenly spaced points.
//!
//! Loads point downward, so samples are `<= 0` after normalization. Between
//! samples a load is the piecewise-linear interpolant of its samples; every
//! integral in this crate (resultants, moments, tractions) is taken exactly on
//! that interpolant, which coincides with the trapezoidal rule on grid-aligned
//! intervals.

mod classes;
mod corpus;
mod perlin;

pub use classes::{generate_class_load, ClassShape, CLASS_COUNT};
pub use corpus::{
    generate_corpus, generate_corpus_with, read_corpus, write_corpus, CorpusParams, LoadCorpus,
    LOADS_FILE, LOADS_MANIFEST, VARIANTS_PER_CLASS,
};
pub use perlin::{add_perlin_noise, NoiseConfig, PerlinNoise1d, OCTAVE_RANGE};

use crate::error::{Error, Result};
use crate::norm::Norm;

/// Default grid size.
pub const DEFAULT_N: usize = 1000;
/// Default top-surface length.
pub const DEFAULT_LENGTH: f64 = 10.0;

/// Seed and octave of the Perlin noise a load variant was perturbed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseProvenance {
    pub seed: u64,
    pub octave: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    samples: Vec<f64>,
    length: f64,
    class_id: Option<u32>,
    noise: Option<NoiseProvenance>,
}

impl LoadProfile {
    pub fn new(samples: Vec<f64>, length: f64) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::arg(format!(
                "a load needs at least 3 samples, got {}",
                samples.len()
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::arg(format!(
                "load length must be positive, got {length}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            length,
            class_id: None,
            noise: None,
        })
    }

    /// A load whose samples are `f(x_i)` on the evenly spaced grid.
    pub fn from_fn(n: usize, length: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::arg(format!(
                "a load needs at least 3 samples, got {n}"
            )));
        }
        let dx = length / (n - 1) as f64;
        Self::new((0..n).map(|i| f(i as f64 * dx)).collect(), length)
    }

    pub fn constant(value: f64, n: usize, length: f64) -> Result<Self> {
        Self::from_fn(n, length, |_| value)
    }

    pub fn with_class(mut self, class_id: u32) -> Self {
        self.class_id = Some(class_id);
        self
    }

    pub fn with_noise(mut self, noise: NoiseProvenance) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn class_id(&self) -> Option<u32> {
        self.class_id
    }

    pub fn noise(&self) -> Option<NoiseProvenance> {
        self.noise
    }

    /// Grid spacing `L / (N - 1)`.
    pub fn spacing(&self) -> f64 {
        self.length / (self.samples.len() - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Linear interpolation of the samples; clamps outside `[0, L]`.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.samples.len();
        let dx = self.spacing();
        if x <= 0.0 {
            return self.samples[0];
        }
        if x >= self.length {
            return self.samples[n - 1];
        }
        let s = x / dx;
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        self.samples[i] * (1.0 - t) + self.samples[i + 1] * t
    }

    /// Signed resultant `∫ w dx` over `[0, L]` (trapezoidal rule).
    pub fn integral(&self) -> f64 {
        let s = &self.samples;
        let inner: f64 = s[1..s.len() - 1].iter().sum();
        self.spacing() * (inner + 0.5 * (s[0] + s[s.len() - 1]))
    }

    /// `(∫ w dx, ∫ w x dx)` over `[a, b]`, exact for the linear interpolant.
    ///
    /// The interval is clipped to `[0, L]`.
    pub fn moments(&self, a: f64, b: f64) -> (f64, f64) {
        let a = a.max(0.0);
        let b = b.min(self.length);
        if b <= a {
            return (0.0, 0.0);
        }
        let n = self.samples.len();
        let dx = self.spacing();
        let first = ((a / dx).floor() as usize).min(n - 2);
        let last = ((b / dx).ceil() as usize).clamp(first + 1, n - 1);
        let mut force = 0.0;
        let mut moment = 0.0;
        for i in first..last {
            let x0 = i as f64 * dx;
            let x1 = if i + 1 == n - 1 {
                self.length
            } else {
                (i + 1) as f64 * dx
            };
            let p = x0.max(a);
            let q = x1.min(b);
            if q <= p {
                continue;
            }
            let (w0, w1) = (self.samples[i], self.samples[i + 1]);
            let slope = (w1 - w0) / (x1 - x0);
            let wp = w0 + slope * (p - x0);
            let wq = w0 + slope * (q - x0);
            let h = q - p;
            force += 0.5 * h * (wp + wq);
            moment += h / 6.0 * (wp * (2.0 * p + q) + wq * (p + 2.0 * q));
        }
        (force, moment)
    }

    /// Location of the resultant. `None` for a zero-resultant load.
    pub fn centroid(&self) -> Option<f64> {
        let (f, m) = self.moments(0.0, self.length);
        (f != 0.0).then(|| m / f)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// `self + other`, sample-wise. Provenance of `self` is kept.
    pub fn added(&self, other: &LoadProfile) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            ..self.clone()
        })
    }

    /// Same load with every sample shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v + offset).collect(),
            ..self.clone()
        }
    }

    /// Mirror image about `x = L / 2`.
    pub fn mirrored(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self {
            samples,
            ..self.clone()
        }
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            samples,
            ..self.clone()
        }
    }

    fn check_compatible(&self, other: &LoadProfile) -> Result<()> {
        if self.samples.len() != other.samples.len() {
            return Err(Error::arg(format!(
                "load grids differ: N = {} vs {}",
                self.samples.len(),
                other.samples.len()
            )));
        }
        Ok(())
    }
}

/// Clamps positive samples to zero and rescales so that `∫ w dx = -1`.
pub fn normalize(load: &LoadProfile) -> Result<LoadProfile> {
    let clamped: Vec<f64> = load.samples.iter().map(|v| v.min(0.0)).collect();
    let clamped = load.with_samples(clamped);
    let area = clamped.integral();
    if area == 0.0 || !area.is_finite() {
        return Err(Error::DegenerateLoad(format!(
            "integral of the downward part is {area}"
        )));
    }
    let scale = -1.0 / area;
    Ok(clamped.scaled(scale))
}

/// Distance between two loads on the same grid.
pub fn load_distance(w1: &LoadProfile, w2: &LoadProfile, norm: Norm) -> Result<f64> {
    w1.check_compatible(w2)?;
    Ok(norm.distance(&w1.samples, &w2.samples))
}
