//! Beams as hash functions: the reactions of a simply supported beam, or of a
//! chain of simply supported segments joined at interior roller supports.
//!
//! Segment `j` spans supports `j` and `j + 1`. Its tributary load is the part
//! of `w` between those supports, except that the first segment also carries
//! the overhang `[0, s_0]` and the last the overhang `[s_{k-1}, L]`. Each
//! segment is statically determinate; interior supports collect the share
//! of both neighbours. With two supports this is the ordinary simply
//! supported beam.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::HashValue;
use crate::loads::LoadProfile;

pub const ENSEMBLE_SIZE: usize = 100;
pub const MAX_SUPPORTS: usize = 10;

/// Relative slack when re-checking a sampled gap against `m L`.
const GAP_SLACK: f64 = 1e-12;

/// Upper bound on the minimum-gap fraction `m` for `k` supports.
pub fn max_min_gap(k: usize) -> f64 {
    if k == 2 {
        1.0
    } else {
        1.0 / k as f64
    }
}

/// Default minimum-gap fraction used by the experiments.
pub fn default_min_gap(k: usize) -> f64 {
    0.5 / (k.max(2) - 1) as f64
}

fn check_min_gap(k: usize, m: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::arg(format!(
            "a beam needs at least 2 supports, got {k}"
        )));
    }
    let upper = max_min_gap(k);
    let ok = if k == 2 {
        m > 0.0 && m < upper
    } else {
        m > 0.0 && m <= upper
    };
    if !ok {
        return Err(Error::arg(format!(
            "minimum gap fraction m = {m} outside the admissible range for k = {k} (0 < m {} {upper})",
            if k == 2 { "<" } else { "<=" }
        )));
    }
    Ok(())
}

/// Ordered support positions on `[0, L]` with adjacent gaps of at least `m L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    positions: Vec<f64>,
    m: f64,
    length: f64,
}

impl SupportSet {
    pub fn new(positions: Vec<f64>, m: f64, length: f64) -> Result<Self> {
        check_min_gap(positions.len(), m)?;
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::arg(format!(
                "beam length must be positive, got {length}"
            )));
        }
        if positions.iter().any(|p| !(0.0..=length).contains(p)) {
            return Err(Error::arg(format!(
                "supports {positions:?} outside [0, {length}]"
            )));
        }
        let min_gap = m * length * (1.0 - GAP_SLACK);
        for pair in positions.windows(2) {
            if pair[1] - pair[0] < min_gap {
                return Err(Error::arg(format!(
                    "supports {} and {} closer than m L = {}",
                    pair[0],
                    pair[1],
                    m * length
                )));
            }
        }
        Ok(Self {
            positions,
            m,
            length,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn k(&self) -> usize {
        self.positions.len()
    }

    pub fn min_gap(&self) -> f64 {
        self.m
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Supports reflected about `x = L / 2`.
    pub fn mirrored(&self) -> Self {
        let positions = self
            .positions
            .iter()
            .rev()
            .map(|p| self.length - p)
            .collect();
        Self {
            positions,
            ..self.clone()
        }
    }
}

/// `k` sorted positions uniform over `{0 <= x_1 < ... < x_k <= L : gaps >= m L}`.
///
/// Sorting `k` uniforms on the shortened interval `[0, L - (k-1) m L]` and
/// spreading the `i`-th by `i m L` maps onto that region with unit Jacobian,
/// which gives the rejection sampler's distribution without rejections.
/// Accepts `m = 0` (independent uniform supports).
pub fn sample_positions<R: Rng + ?Sized>(
    k: usize,
    m: f64,
    length: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::arg(format!("need at least 2 supports, got {k}")));
    }
    let gap = m * length;
    let free = length - gap * (k - 1) as f64;
    if m < 0.0 || free < 0.0 {
        return Err(Error::arg(format!(
            "infeasible support layout: {k} supports with gaps m L = {gap} do not fit in L = {length}"
        )));
    }
    let mut u: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * free).collect();
    u.sort_by(f64::total_cmp);
    Ok(u.into_iter()
        .enumerate()
        .map(|(i, x)| (x + i as f64 * gap).min(length))
        .collect())
}

pub fn sample_supports<R: Rng + ?Sized>(
    k: usize,
    m: f64,
    length: f64,
    rng: &mut R,
) -> Result<SupportSet> {
    check_min_gap(k, m)?;
    let positions = sample_positions(k, m, length, rng)?;
    SupportSet::new(positions, m, length)
}

fn segment_reactions(load: &LoadProfile, supports: &SupportSet) -> Result<HashValue> {
    if (load.length() - supports.length()).abs() > 1e-12 * supports.length() {
        return Err(Error::arg(format!(
            "load length {} does not match beam length {}",
            load.length(),
            supports.length()
        )));
    }
    let s = supports.positions();
    let k = s.len();
    let mut reactions = vec![0.0; k];
    for j in 0..k - 1 {
        let span = s[j + 1] - s[j];
        if span <= 0.0 {
            return Err(Error::arg(format!("coincident supports at x = {}", s[j])));
        }
        let from = if j == 0 { 0.0 } else { s[j] };
        let to = if j == k - 2 {
            supports.length()
        } else {
            s[j + 1]
        };
        let (force, moment) = load.moments(from, to);
        // moment about the left support; loads are negative (downward)
        let right = -(moment - s[j] * force) / span;
        let left = -force - right;
        reactions[j] += left;
        reactions[j + 1] += right;
    }
    HashValue::new(reactions)
}

/// Reactions of a two-support beam; overhangs on both sides are included.
pub fn reactions_simply_supported(load: &LoadProfile, supports: &SupportSet) -> Result<HashValue> {
    if supports.k() != 2 {
        return Err(Error::arg(format!(
            "simply supported beam needs 2 supports, got {}",
            supports.k()
        )));
    }
    segment_reactions(load, supports)
}

/// Reactions of a composite beam with three or more supports.
pub fn reactions_composite(load: &LoadProfile, supports: &SupportSet) -> Result<HashValue> {
    if supports.k() < 3 {
        return Err(Error::arg(format!(
            "composite beam needs at least 3 supports, got {}",
            supports.k()
        )));
    }
    segment_reactions(load, supports)
}

/// Dispatches on the support count.
pub fn reactions(load: &LoadProfile, supports: &SupportSet) -> Result<HashValue> {
    segment_reactions(load, supports)
}

/// A set of beams sharing `k`, `m` and `L`, with independently drawn supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEnsemble {
    members: Vec<SupportSet>,
    seed: u64,
}

impl BeamEnsemble {
    /// Draws [`ENSEMBLE_SIZE`] members from a stream seeded by `seed`.
    pub fn sample(k: usize, m: f64, length: f64, seed: u64) -> Result<Self> {
        Self::sample_n(k, m, length, seed, ENSEMBLE_SIZE)
    }

    pub fn sample_n(k: usize, m: f64, length: f64, seed: u64, size: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = (0..size)
            .map(|_| sample_supports(k, m, length, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { members, seed })
    }

    pub fn from_members(members: Vec<SupportSet>, seed: u64) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::arg("an ensemble needs at least one member"))?;
        if members.iter().any(|s| {
            s.k() != first.k() || s.min_gap() != first.min_gap() || s.length() != first.length()
        }) {
            return Err(Error::arg("ensemble members must share k, m and L"));
        }
        Ok(Self { members, seed })
    }

    pub fn members(&self) -> &[SupportSet] {
        &self.members
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One hash per ensemble member, in member order.
pub fn ensemble_hash(load: &LoadProfile, ensemble: &BeamEnsemble) -> Result<Vec<HashValue>> {
    ensemble
        .members()
        .iter()
        .map(|s| reactions(load, s))
        .collect()
}

/// Most frequent label; ties go to the smallest label.
pub fn hard_vote(predictions: &[u32]) -> Result<u32> {
    let mut counts = BTreeMap::new();
    for p in predictions {
        *counts.entry(*p).or_insert(0usize) += 1;
    }
    // BTreeMap iterates in ascending label order, so `max_by_key` would keep
    // the last maximum; fold keeps the first instead.
    counts
        .into_iter()
        .fold(None, |best: Option<(u32, usize)>, (label, n)| match best {
            Some((_, bn)) if bn >= n => best,
            _ => Some((label, n)),
        })
        .map(|(label, _)| label)
        .ok_or_else(|| Error::arg("cannot vote over zero predictions"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loads::{generate_class_load, normalize};

    fn uniform(n: usize) -> LoadProfile {
        LoadProfile::constant(-0.1, n, 10.0).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn symmetric_supports_split_evenly() {
        let s = SupportSet::new(vec![0.0, 10.0], 0.5, 10.0).unwrap();
        let h = reactions_simply_supported(&uniform(101), &s).unwrap();
        assert!(close(h.readouts(), &[0.5, 0.5], 1e-12), "{h:?}");
    }

    #[test]
    fn centroid_over_support() {
        let s = SupportSet::new(vec![0.0, 5.0], 0.5, 10.0).unwrap();
        let h = reactions_simply_supported(&uniform(101), &s).unwrap();
        assert!(close(h.readouts(), &[0.0, 1.0], 1e-12), "{h:?}");
    }

    #[test]
    fn triangular_load_by_hand() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = normalize(&generate_class_load(4, 10.0, 1000, &mut rng).unwrap()).unwrap();
        let s = SupportSet::new(vec![0.0, 10.0], 0.5, 10.0).unwrap();
        let h = reactions_simply_supported(&w, &s).unwrap();
        assert!(close(h.readouts(), &[2.0 / 3.0, 1.0 / 3.0], 1e-9), "{h:?}");
    }

    #[test]
    fn composite_uniform_by_hand() {
        // segment AB: tributary [0, 1]; segment BC: tributary [1, 10], span 1
        // A = (1*0.1 - 0.05)/1, C = (4.95 - 0.9)/1, B = 1 - A - C
        let s = SupportSet::new(vec![0.0, 1.0, 2.0], 0.1, 10.0).unwrap();
        let h = reactions_composite(&uniform(1001), &s).unwrap();
        assert!(close(h.readouts(), &[0.05, -3.1, 4.05], 1e-12), "{h:?}");
    }

    #[test]
    fn composite_mirror_symmetry() {
        let s = SupportSet::new(vec![0.0, 5.0, 10.0], 0.3, 10.0).unwrap();
        let h = reactions_composite(&uniform(101), &s).unwrap();
        assert!((h.readouts()[0] - h.readouts()[2]).abs() < 1e-12);
    }

    #[test]
    fn arity_checks() {
        let two = SupportSet::new(vec![1.0, 9.0], 0.5, 10.0).unwrap();
        let three = SupportSet::new(vec![1.0, 5.0, 9.0], 0.3, 10.0).unwrap();
        assert!(reactions_composite(&uniform(11), &two).is_err());
        assert!(reactions_simply_supported(&uniform(11), &three).is_err());
        let short = LoadProfile::constant(-0.1, 11, 5.0).unwrap();
        assert!(reactions(&short, &two).is_err());
    }

    #[test]
    fn support_validation() {
        assert!(SupportSet::new(vec![0.0, 0.0], 0.1, 10.0).is_err());
        assert!(SupportSet::new(vec![3.0, 1.0], 0.1, 10.0).is_err());
        assert!(SupportSet::new(vec![0.0, 11.0], 0.1, 10.0).is_err());
        assert!(SupportSet::new(vec![0.0, 0.5], 0.1, 10.0).is_err());
        assert!(SupportSet::new(vec![0.0, 1.0], 0.1, 10.0).is_ok());
        assert!(SupportSet::new(vec![0.0], 0.1, 10.0).is_err());
    }

    #[test]
    fn sampler_respects_gap_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // k = 3 allows at most m = 1/3
        assert!(sample_supports(3, 0.4, 10.0, &mut rng).is_err());
        assert!(sample_supports(3, 1.0 / 3.0, 10.0, &mut rng).is_ok());
        assert!(sample_supports(2, 1.0, 10.0, &mut rng).is_err());
        assert!(sample_supports(2, 0.0, 10.0, &mut rng).is_err());
        for _ in 0..1000 {
            let k = rng.gen_range(2..=MAX_SUPPORTS);
            let m = default_min_gap(k);
            let s = sample_supports(k, m, 10.0, &mut rng).unwrap();
            assert!(s
                .positions()
                .windows(2)
                .all(|p| p[1] - p[0] >= m * 10.0 * (1.0 - 1e-12)));
        }
    }

    #[test]
    fn near_unit_gap_collapses_to_ends() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let s = sample_supports(2, 0.999, 10.0, &mut rng).unwrap();
            assert!(s.positions()[0] <= 0.01 + 1e-12);
            assert!(s.positions()[1] >= 10.0 - 0.01 - 1e-12);
        }
    }

    #[test]
    fn sampler_is_uniform_for_two_supports() {
        // for k = 2, m = 0.5: the left support is uniform-triangular on [0, 5]
        // with density (5 - a) * 2 / 25, so E[a] = 5/3
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| sample_positions(2, 0.5, 10.0, &mut rng).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 5.0 / 3.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn ensembles() {
        let e = BeamEnsemble::sample(5, default_min_gap(5), 10.0, 11).unwrap();
        assert_eq!(e.len(), ENSEMBLE_SIZE);
        assert_eq!(
            e,
            BeamEnsemble::sample(5, default_min_gap(5), 10.0, 11).unwrap()
        );
        let hashes = ensemble_hash(&uniform(101), &e).unwrap();
        assert_eq!(hashes.len(), ENSEMBLE_SIZE);
        for h in &hashes {
            assert!((h.total() - 1.0).abs() < 1e-9);
        }

        let same = vec![e.members()[0].clone(); 100];
        let degenerate = BeamEnsemble::from_members(same, 0).unwrap();
        let hashes = ensemble_hash(&uniform(101), &degenerate).unwrap();
        assert!(hashes.iter().all(|h| h == &hashes[0]));

        let mixed = vec![
            e.members()[0].clone(),
            SupportSet::new(vec![0.0, 10.0], 0.5, 10.0).unwrap(),
        ];
        assert!(BeamEnsemble::from_members(mixed, 0).is_err());
    }

    #[test]
    fn voting() {
        assert_eq!(hard_vote(&[3, 3, 7]).unwrap(), 3);
        assert_eq!(hard_vote(&[1, 2]).unwrap(), 1);
        assert_eq!(hard_vote(&[2, 1]).unwrap(), 1);
        let mut many = vec![5u32; 60];
        many.extend((0..40).map(|i| i % 20 + 1));
        assert_eq!(hard_vote(&many).unwrap(), 5);
        assert!(hard_vote(&[]).is_err());
    }
}
