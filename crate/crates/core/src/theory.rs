//! Collision predicate, collision radii and adversarial load pairs for the
//! two beam families, plus the far-pair collision probability `p2` for the
//! three-support composite family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beams::sample_positions;
use crate::error::{Error, Result};
use crate::hash::HashValue;
use crate::loads::LoadProfile;

/// `(R, cR, p1, p2)` with bucket size `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityParams {
    pub r: f64,
    pub c: f64,
    pub p1: f64,
    pub p2: f64,
    pub s: f64,
}

impl SensitivityParams {
    pub fn is_sensitive(&self) -> bool {
        self.r > 0.0 && self.c > 1.0 && self.p1 > self.p2
    }
}

/// Two-support beams: `p1 = 1` within `R = 2 m S / L`, but equal-resultant,
/// equal-centroid loads collide at any distance, so `p2 = 1` for every `c`.
pub fn sensitivity_ss(m: f64, length: f64, s: f64, c: f64) -> Result<SensitivityParams> {
    Ok(SensitivityParams {
        r: collision_radius_ss(m, length, s)?,
        c,
        p1: 1.0,
        p2: 1.0,
        s,
    })
}

/// Three-support composite beams with a load discretized into `n` cells;
/// `p2` is the small-`m` bound for the spike-triplet pair.
pub fn sensitivity_ssc3(
    m: f64,
    length: f64,
    s: f64,
    c: f64,
    n: usize,
) -> Result<SensitivityParams> {
    Ok(SensitivityParams {
        r: collision_radius_ssc3(m, length, s)?,
        c,
        p1: 1.0,
        p2: p2_analytic(n)?,
        s,
    })
}

/// True iff every component differs by less than `s`.
#[inline]
pub fn collides(a: &[f64], b: &[f64], s: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < s)
}

pub fn is_collision(h1: &HashValue, h2: &HashValue, s: f64) -> Result<bool> {
    if h1.ns() != h2.ns() {
        return Err(Error::arg(format!(
            "hash sizes differ: {} vs {}",
            h1.ns(),
            h2.ns()
        )));
    }
    Ok(collides(h1.readouts(), h2.readouts(), s))
}

/// `R = 2 m S / L` for two-support beams.
pub fn collision_radius_ss(m: f64, length: f64, s: f64) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::arg(format!("m = {m} outside (0, 1)")));
    }
    Ok(2.0 * m * s / length)
}

/// Upper end of the `m` window in which the `C` reaction is the binding one.
pub fn ssc3_m_limit() -> f64 {
    1.0 - 12f64.sqrt() / 6.0
}

/// `R = 2 S m L / (L - m L)^2` for three-support composite beams.
pub fn collision_radius_ssc3(m: f64, length: f64, s: f64) -> Result<f64> {
    if !(m > 0.0 && m < ssc3_m_limit() && m <= 1.0 / 3.0) {
        return Err(Error::arg(format!(
            "m = {m} outside (0, {:.6}) ∩ (0, 1/3]",
            ssc3_m_limit()
        )));
    }
    let free = length - m * length;
    Ok(2.0 * s * m * length / (free * free))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `(w, w ± R 1)`: a pair at Linf distance exactly `R`.
pub fn uniform_shift_pair(w: &LoadProfile, r: f64, sign: Sign) -> (LoadProfile, LoadProfile) {
    (w.clone(), w.shifted(sign.value() * r))
}

/// Constant load `q` against a single central spike of height `q N`.
///
/// Both share centroid `L / 2`; their Linf distance is `q (N - 1)`. On the
/// sampled grid the spike's resultant is `q L N / (N - 1)`, so raw reactions
/// agree up to that `1 / (N - 1)` mismatch and normalized reactions agree
/// exactly.
pub fn centroid_collision_pair(
    q: f64,
    n: usize,
    length: f64,
) -> Result<(LoadProfile, LoadProfile)> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::arg(format!("N must be odd and at least 3, got {n}")));
    }
    let flat = LoadProfile::constant(q, n, length)?;
    let mut spike = vec![0.0; n];
    spike[n / 2] = q * n as f64;
    Ok((flat, LoadProfile::new(spike, length)?))
}

/// Zero load against a `(-cR/2, cR, -cR/2)` triplet on cells `t, t+1, t+2`
/// of an `n`-cell partition of `[0, L]`.
///
/// The triplet is sampled on a grid three times finer than the cells so that
/// it is nonzero only strictly inside `[t L / n, (t + 3) L / n]`; it has zero
/// resultant, zero moment and Linf norm `cR`. Both loads use `3 n + 1`
/// samples.
pub fn spike_triplet_pair(
    cr: f64,
    t: usize,
    n: usize,
    length: f64,
) -> Result<(LoadProfile, LoadProfile)> {
    if n < 3 || t > n - 3 {
        return Err(Error::arg(format!(
            "need 0 <= t <= N - 3, got t = {t}, N = {n}"
        )));
    }
    let samples = 3 * n + 1;
    let zero = LoadProfile::constant(0.0, samples, length)?;
    let mut w = vec![0.0; samples];
    let start = 3 * t;
    let pattern = [-0.5, -0.5, 0.0, 1.0, 1.0, 0.0, -0.5, -0.5];
    for (j, v) in pattern.iter().enumerate() {
        w[start + 1 + j] = v * cr;
    }
    Ok((zero, LoadProfile::new(w, length)?))
}

/// `((N - 3) / N)^3`, the `m -> 0` probability that three uniform supports all
/// miss a window of three cells.
pub fn p2_analytic(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::arg(format!("N must be at least 3, got {n}")));
    }
    let ratio = (n - 3) as f64 / n as f64;
    Ok(ratio.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl Estimate {
    fn from_hits(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

const SHARD_TRIALS: u64 = 1 << 16;

/// Monte-Carlo estimate of `p2`: the fraction of three-support placements
/// (minimum gap `m L`) that all miss a uniformly placed three-cell window.
///
/// Trials run in fixed-size shards, each on its own ChaCha stream derived
/// from one seed drawn from `rng`, so the result does not depend on the
/// thread count.
pub fn p2_monte_carlo<R: Rng + ?Sized>(
    n: usize,
    m: f64,
    trials: u64,
    rng: &mut R,
) -> Result<Estimate> {
    if n < 3 {
        return Err(Error::arg(format!("N must be at least 3, got {n}")));
    }
    if trials == 0 {
        return Err(Error::arg("need at least one trial"));
    }
    if !(0.0..=1.0 / 3.0).contains(&m) {
        return Err(Error::arg(format!(
            "m = {m} infeasible for 3 supports (need 0 <= m <= 1/3)"
        )));
    }
    let seed: u64 = rng.gen();
    let shards = trials.div_ceil(SHARD_TRIALS);
    let hits: u64 = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let count = SHARD_TRIALS.min(trials - shard * SHARD_TRIALS);
            let mut hits = 0;
            for _ in 0..count {
                let t = rng.gen_range(0..=n - 3) as f64;
                let lo = t / n as f64;
                let hi = (t + 3.0) / n as f64;
                let supports = sample_positions(3, m, 1.0, &mut rng).expect("feasible by check");
                if supports.iter().all(|x| *x < lo || *x > hi) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(Estimate::from_hits(hits, trials))
}
