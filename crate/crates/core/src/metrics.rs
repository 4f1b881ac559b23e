//! Evaluation of a hash system over a labelled load corpus: binned collision
//! probability against load distance, Spearman rank correlation between
//! load and hash distances, and leave-one-out nearest-neighbour accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beams::hard_vote;
use crate::error::{Error, Result};
use crate::hash::HashValue;
use crate::norm::Norm;
use crate::theory::collides;

pub const CURVE_BINS: usize = 5;
pub const DEFAULT_BUCKET: f64 = 0.01;

/// Number of unordered pairs among `n` items.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Distances of all pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn pairwise_distances<T: AsRef<[f64]> + Sync>(items: &[T], norm: Norm) -> Vec<f64> {
    let n = items.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = items[i].as_ref();
            (i + 1..n)
                .map(|j| norm.distance(a, items[j].as_ref()))
                .collect()
        })
        .collect();
    rows.concat()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionCurve {
    /// Mean load distance of the pairs in each bin.
    pub bin_centers: Vec<f64>,
    pub p_collision: Vec<f64>,
    pub s: f64,
    pub bin_pair_counts: Vec<usize>,
}

/// Sizes of `bins` equal-count bins over `n` items; the first `n % bins`
/// bins take one extra item.
fn bin_sizes(n: usize, bins: usize) -> Vec<usize> {
    (0..bins)
        .map(|b| n / bins + usize::from(b < n % bins))
        .collect()
}

/// Pair indices ordered by load distance, ties by pair index.
fn order_by_distance(dists: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dists.len()).collect();
    order.sort_by(|a, b| dists[*a].total_cmp(&dists[*b]).then(a.cmp(b)));
    order
}

fn curve_from_flags(load_dists: &[f64], order: &[usize], flags: &[bool], s: f64) -> CollisionCurve {
    let sizes = bin_sizes(order.len(), CURVE_BINS);
    let mut centers = Vec::with_capacity(CURVE_BINS);
    let mut probs = Vec::with_capacity(CURVE_BINS);
    let mut start = 0;
    for size in &sizes {
        let bin = &order[start..start + size];
        let dist_sum: f64 = bin.iter().map(|p| load_dists[*p]).sum();
        let hits = bin.iter().filter(|p| flags[**p]).count();
        centers.push(dist_sum / *size as f64);
        probs.push(hits as f64 / *size as f64);
        start += size;
    }
    CollisionCurve {
        bin_centers: centers,
        p_collision: probs,
        s,
        bin_pair_counts: sizes,
    }
}

fn collision_flags<T: AsRef<[f64]> + Sync>(hashes: &[T], s: f64) -> Vec<bool> {
    let n = hashes.len();
    let rows: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = hashes[i].as_ref();
            (i + 1..n)
                .map(|j| collides(a, hashes[j].as_ref(), s))
                .collect()
        })
        .collect();
    rows.concat()
}

fn check_pairs(load_dists: &[f64], items: usize) -> Result<()> {
    if load_dists.len() != pair_count(items) {
        return Err(Error::arg(format!(
            "{} load distances for {items} items (expected {})",
            load_dists.len(),
            pair_count(items)
        )));
    }
    if load_dists.len() < CURVE_BINS {
        return Err(Error::arg(format!(
            "need at least {CURVE_BINS} pairs, got {}",
            load_dists.len()
        )));
    }
    Ok(())
}

fn check_hash_sizes<T: AsRef<[f64]>>(hashes: &[T]) -> Result<()> {
    if let Some(first) = hashes.first() {
        let ns = first.as_ref().len();
        if hashes.iter().any(|h| h.as_ref().len() != ns) {
            return Err(Error::arg("hash values have different sensor counts"));
        }
    }
    Ok(())
}

/// Collision probability per equal-count bin of load distance.
///
/// `load_dists` holds the pair distances in [`pairwise_distances`] order.
pub fn collision_curve(load_dists: &[f64], hashes: &[HashValue], s: f64) -> Result<CollisionCurve> {
    check_pairs(load_dists, hashes.len())?;
    check_hash_sizes(hashes)?;
    let order = order_by_distance(load_dists);
    let flags = collision_flags(hashes, s);
    Ok(curve_from_flags(load_dists, &order, &flags, s))
}

/// Average (fractional) ranks, 1-based. Returns whether any ties occurred.
fn average_ranks(values: &[f64]) -> (Vec<f64>, bool) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = false;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        if j - i > 1 {
            ties = true;
        }
        // positions i..j share the mean of ranks i+1..=j
        let rank = (i + j + 1) as f64 / 2.0;
        for p in &order[i..j] {
            ranks[*p] = rank;
        }
        i = j;
    }
    (ranks, ties)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation. Without ties this is
/// `1 - 6 Σ d_i^2 / (n (n^2 - 1))`; with ties, Pearson correlation of the
/// average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::arg(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::arg("need at least two observations"));
    }
    if x.iter().any(|v| v.is_nan()) || y.iter().any(|v| v.is_nan()) {
        return Err(Error::arg("NaN in correlation input"));
    }
    let constant = |v: &[f64]| v.iter().all(|e| *e == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::UndefinedCorrelation(
            "one of the inputs is constant".into(),
        ));
    }
    let (rx, tx) = average_ranks(x);
    let (ry, ty) = average_ranks(y);
    if tx || ty {
        return Ok(pearson(&rx, &ry));
    }
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// Leave-one-out `k`-nearest-neighbour predictions. Distance ties go to the
/// lower index; label ties among the `k` neighbours to the smaller label.
pub fn loo_predictions<T: AsRef<[f64]> + Sync>(
    items: &[T],
    labels: &[u32],
    k: usize,
    norm: Norm,
) -> Result<Vec<u32>> {
    if items.len() != labels.len() {
        return Err(Error::arg(format!(
            "{} items but {} labels",
            items.len(),
            labels.len()
        )));
    }
    if k == 0 || k >= items.len() {
        return Err(Error::arg(format!("k = {k} must be in 1..{}", items.len())));
    }
    check_hash_sizes(items)?;
    (0..items.len())
        .into_par_iter()
        .map(|i| {
            let query = items[i].as_ref();
            if k == 1 {
                let mut best = (f64::INFINITY, usize::MAX);
                for (j, item) in items.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let d = norm.distance(query, item.as_ref());
                    if d < best.0 {
                        best = (d, j);
                    }
                }
                return Ok(labels[best.1]);
            }
            let mut neighbours: Vec<(f64, usize)> = items
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, item)| (norm.distance(query, item.as_ref()), j))
                .collect();
            neighbours.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let votes: Vec<u32> = neighbours[..k].iter().map(|(_, j)| labels[*j]).collect();
            hard_vote(&votes)
        })
        .collect()
}

/// Fraction of correct predictions.
pub fn accuracy(predictions: &[u32], labels: &[u32]) -> Result<f64> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return Err(Error::arg(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

pub fn knn_loo_accuracy<T: AsRef<[f64]> + Sync>(
    items: &[T],
    labels: &[u32],
    k: usize,
    norm: Norm,
) -> Result<f64> {
    accuracy(&loo_predictions(items, labels, k, norm)?, labels)
}

/// Hard-voted leave-one-out 1-NN predictions; `member_hashes[m][i]` is member
/// `m`'s hash of item `i`.
pub fn ensemble_loo_predictions(
    member_hashes: &[Vec<HashValue>],
    labels: &[u32],
    norm: Norm,
) -> Result<Vec<u32>> {
    if member_hashes.is_empty() {
        return Err(Error::arg("an ensemble needs at least one member"));
    }
    let per_member = member_hashes
        .iter()
        .map(|hashes| loo_predictions(hashes, labels, 1, norm))
        .collect::<Result<Vec<_>>>()?;
    (0..labels.len())
        .map(|i| {
            let votes: Vec<u32> = per_member.iter().map(|p| p[i]).collect();
            hard_vote(&votes)
        })
        .collect()
}

pub fn ensemble_loo_accuracy(
    member_hashes: &[Vec<HashValue>],
    labels: &[u32],
    norm: Norm,
) -> Result<f64> {
    accuracy(
        &ensemble_loo_predictions(member_hashes, labels, norm)?,
        labels,
    )
}

/// Row = true class, column = predicted class, both 1-based labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn trace(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in 1..=self.classes() {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(&(i + 1).to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion_matrix(predictions: &[u32], labels: &[u32]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.iter().chain(labels).any(|c| *c == 0) {
        return Err(Error::arg("class labels are 1-based"));
    }
    let classes = predictions
        .iter()
        .chain(labels)
        .copied()
        .max()
        .unwrap_or(0)
        .max(crate::loads::CLASS_COUNT) as usize;
    let mut counts = vec![vec![0; classes]; classes];
    for (p, l) in predictions.iter().zip(labels) {
        counts[*l as usize - 1][*p as usize - 1] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system_id: String,
    pub spearman_rho: f64,
    pub accuracy: f64,
    pub curve: CollisionCurve,
    /// Leave-one-out 1-NN (or hard-voted) prediction for each load.
    pub predictions: Vec<u32>,
}

/// Everything about the corpus that evaluation reuses across systems.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub load_dists: Vec<f64>,
    order: Vec<usize>,
    pub labels: Vec<u32>,
    pub s: f64,
    pub norm: Norm,
}

impl EvalContext {
    pub fn new(load_dists: Vec<f64>, labels: Vec<u32>, s: f64, norm: Norm) -> Result<Self> {
        check_pairs(&load_dists, labels.len())?;
        let order = order_by_distance(&load_dists);
        Ok(Self {
            load_dists,
            order,
            labels,
            s,
            norm,
        })
    }

    /// Pair distances of the loads themselves under `norm`.
    pub fn for_loads(loads: &[crate::loads::LoadProfile], s: f64, norm: Norm) -> Result<Self> {
        let samples: Vec<&[f64]> = loads.iter().map(|w| w.samples()).collect();
        let labels = loads.iter().map(|w| w.class_id().unwrap_or(0)).collect();
        Self::new(pairwise_distances(&samples, norm), labels, s, norm)
    }

    fn normalized(&self, hashes: &[HashValue]) -> Result<Vec<HashValue>> {
        if hashes.len() != self.labels.len() {
            return Err(Error::arg(format!(
                "{} hashes for {} loads",
                hashes.len(),
                self.labels.len()
            )));
        }
        check_hash_sizes(hashes)?;
        hashes.iter().map(HashValue::normalized).collect()
    }

    fn rho_and_curve(&self, hashes: &[HashValue]) -> Result<(f64, CollisionCurve)> {
        let hash_dists = pairwise_distances(hashes, self.norm);
        let rho = spearman_rho(&self.load_dists, &hash_dists)?;
        let flags = collision_flags(hashes, self.s);
        Ok((
            rho,
            curve_from_flags(&self.load_dists, &self.order, &flags, self.s),
        ))
    }

    /// Metrics for a single system; hashes are normalized to sum one first.
    pub fn evaluate(&self, system_id: &str, hashes: &[HashValue]) -> Result<EvalReport> {
        let hashes = self.normalized(hashes)?;
        let (spearman_rho, curve) = self.rho_and_curve(&hashes)?;
        let predictions = loo_predictions(&hashes, &self.labels, 1, self.norm)?;
        Ok(EvalReport {
            system_id: system_id.to_string(),
            spearman_rho,
            accuracy: accuracy(&predictions, &self.labels)?,
            curve,
            predictions,
        })
    }

    /// Ensemble metrics: accuracy from hard-voted member predictions; rho and
    /// the collision curve averaged over members.
    pub fn evaluate_ensemble(
        &self,
        system_id: &str,
        member_hashes: &[Vec<HashValue>],
    ) -> Result<EvalReport> {
        if member_hashes.is_empty() {
            return Err(Error::arg("an ensemble needs at least one member"));
        }
        let members = member_hashes
            .iter()
            .map(|h| self.normalized(h))
            .collect::<Result<Vec<_>>>()?;
        let per_member = members
            .iter()
            .map(|h| self.rho_and_curve(h))
            .collect::<Result<Vec<_>>>()?;
        let count = per_member.len() as f64;
        let spearman_rho = per_member.iter().map(|(r, _)| r).sum::<f64>() / count;
        let mut curve = per_member[0].1.clone();
        for b in 0..CURVE_BINS {
            curve.p_collision[b] = per_member
                .iter()
                .map(|(_, c)| c.p_collision[b])
                .sum::<f64>()
                / count;
        }
        let predictions = ensemble_loo_predictions(&members, &self.labels, self.norm)?;
        Ok(EvalReport {
            system_id: system_id.to_string(),
            spearman_rho,
            accuracy: accuracy(&predictions, &self.labels)?,
            curve,
            predictions,
        })
    }
}
