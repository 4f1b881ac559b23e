use std::f64::consts::PI;

use rand::Rng;

use super::LoadProfile;
use crate::error::{Error, Result};

pub const CLASS_COUNT: u32 = 20;

/// Noise-free base curve of one load class.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassShape {
    Constant,
    /// V shape, zero at mid-span.
    Valley,
    /// Inverted V, peak magnitude at mid-span.
    Peak,
    /// Heaviest at `x = 0`.
    RampDown,
    /// Heaviest at `x = L`.
    RampUp,
    /// `|sin|` with wave number `k` and phase offset `phi` (in periods).
    Sine {
        k: f64,
        phi: f64,
    },
    /// Negative Gaussian KDE with bandwidth `0.1 L`.
    Kde {
        points: Vec<f64>,
    },
}

const SINES: [(f64, f64); 6] = [
    (0.5, 0.0),
    (1.0, 0.0),
    (1.0, 0.25),
    (1.5, 0.0),
    (1.5, 0.25),
    (2.0, 0.0),
];

impl ClassShape {
    /// Shape for `class_id`, drawing KDE point locations from `rng`.
    pub fn for_class<R: Rng + ?Sized>(class_id: u32, length: f64, rng: &mut R) -> Result<Self> {
        Ok(match class_id {
            1 => ClassShape::Constant,
            2 => ClassShape::Valley,
            3 => ClassShape::Peak,
            4 => ClassShape::RampDown,
            5 => ClassShape::RampUp,
            6..=11 => {
                let (k, phi) = SINES[(class_id - 6) as usize];
                ClassShape::Sine { k, phi }
            }
            12..=20 => {
                let n = match class_id {
                    12..=14 => 2,
                    15..=17 => 5,
                    _ => 25,
                };
                ClassShape::Kde {
                    points: (0..n).map(|_| rng.gen_range(0.0..length)).collect(),
                }
            }
            other => return Err(Error::UnknownClass(other)),
        })
    }

    pub fn eval(&self, x: f64, length: f64) -> f64 {
        let l = length;
        match self {
            ClassShape::Constant => -1.0 / l,
            ClassShape::Valley => {
                let c = 2.0 / l;
                if x < l / 2.0 {
                    -c + 2.0 * c / l * x
                } else {
                    (l / 2.0 - x) * 2.0 * c / l
                }
            }
            ClassShape::Peak => {
                let c = 2.0 / l;
                if x < l / 2.0 {
                    -2.0 * c / l * x
                } else {
                    2.0 * c / l * x - 2.0 * c
                }
            }
            ClassShape::RampDown => {
                let c = 2.0 / l;
                c / l * x - c
            }
            ClassShape::RampUp => {
                let c = 2.0 / l;
                -c / l * x
            }
            ClassShape::Sine { k, phi } => {
                -PI / (2.0 * l) * (2.0 * PI * k * x / l - 2.0 * PI * phi).sin().abs()
            }
            ClassShape::Kde { points } => {
                let h = 0.1 * l;
                let n = points.len() as f64;
                let sum: f64 = points
                    .iter()
                    .map(|p| (-(x - p) * (x - p) / (2.0 * h * h)).exp())
                    .sum();
                -sum / (n * h)
            }
        }
    }
}

/// Noise-free base load for a class, sampled on `n` evenly spaced points.
pub fn generate_class_load<R: Rng + ?Sized>(
    class_id: u32,
    length: f64,
    n: usize,
    shape_rng: &mut R,
) -> Result<LoadProfile> {
    if n < 3 {
        return Err(Error::arg(format!(
            "a load needs at least 3 samples, got {n}"
        )));
    }
    let shape = ClassShape::for_class(class_id, length, shape_rng)?;
    Ok(LoadProfile::from_fn(n, length, |x| shape.eval(x, length))?.with_class(class_id))
}
