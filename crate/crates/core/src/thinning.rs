//! Thinning operations on nerve-tree samples: independent p-thinning of end
//! points or whole trees, uniform thinning to a fixed tree count, and the
//! dependent thinning model that preferentially removes isolated trees.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_data, Result};
use crate::geometry::{nn_distances, Point};
use crate::rng::{RngSpec, SimRng};
use crate::sample::{NerveSample, NerveTree, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Base,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionEstimate {
    /// Ratio clamped to `[0, 1]`.
    pub p: f64,
    pub raw: f64,
    pub clamped: bool,
}

fn group_intensity(group: &SampleSet, kind: PointKind) -> (usize, f64) {
    group.samples().iter().fold((0, 0.0), |(n, a), s| {
        let count = match kind {
            PointKind::Base => s.n_trees(),
            PointKind::End => s.n_ends(),
        };
        (n + count, a + s.window().area())
    })
}

/// Ratio of mean intensities, pooled as total count over total window area.
pub fn estimate_retention_p(
    target: &SampleSet,
    source: &SampleSet,
    kind: PointKind,
) -> Result<RetentionEstimate> {
    if target.is_empty() || source.is_empty() {
        return Err(invalid_arg("retention estimate needs two nonempty groups"));
    }
    let (nt, at) = group_intensity(target, kind);
    let (ns, as_) = group_intensity(source, kind);
    if ns == 0 {
        return Err(invalid_data("source group has no points of the requested kind"));
    }
    let raw = (nt as f64 / at) / (ns as f64 / as_);
    if raw > 1.0 {
        log::warn!("estimated retention probability {raw:.4} exceeds 1; clamped");
    }
    Ok(RetentionEstimate {
        p: raw.min(1.0),
        raw,
        clamped: raw > 1.0,
    })
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid_arg(format!("retention probability must lie in [0, 1], got {p}")))
    }
}

/// Keeps each end point independently with probability `p`.
pub fn p_thin_endpoints(sample: &NerveSample, p: f64, rng: RngSpec) -> Result<NerveSample> {
    check_p(p)?;
    let mut rng = rng.rng();
    let trees = sample
        .trees()
        .iter()
        .map(|t| {
            let ends = t
                .ends
                .iter()
                .copied()
                .filter(|_| rng.random::<f64>() < p)
                .collect();
            NerveTree::new(t.tree_id, t.base, ends)
        })
        .collect();
    Ok(sample.with_trees(trees))
}

/// Keeps each tree (base and all its ends) independently with probability `p`.
pub fn p_thin_trees(sample: &NerveSample, p: f64, rng: RngSpec) -> Result<NerveSample> {
    check_p(p)?;
    let mut rng = rng.rng();
    let trees = sample
        .trees()
        .iter()
        .filter(|_| rng.random::<f64>() < p)
        .cloned()
        .collect();
    Ok(sample.with_trees(trees))
}

/// Keeps a uniformly random subset of exactly `n_b` trees.
pub fn thin_trees_to_count(sample: &NerveSample, n_b: usize, rng: RngSpec) -> Result<NerveSample> {
    let n = sample.n_trees();
    if n_b > n {
        return Err(invalid_arg(format!(
            "cannot keep {n_b} trees of a sample with {n}"
        )));
    }
    let mut keep = index::sample(&mut rng.rng(), n, n_b).into_vec();
    keep.sort_unstable();
    let trees = keep.into_iter().map(|i| sample.trees()[i].clone()).collect();
    Ok(sample.with_trees(trees))
}

/// Removal weights `1 - exp(-theta^2 m_j^2)` from nearest-neighbour
/// distances `m_j` among `bases`, unnormalized.
pub fn removal_weights(bases: &[Point], theta: f64) -> Vec<f64> {
    nn_distances(bases)
        .into_iter()
        .map(|m| -(-(theta * m).powi(2)).exp_m1())
        .collect()
}

/// Removal weights normalized to probabilities.
pub fn removal_probabilities(bases: &[Point], theta: f64) -> Vec<f64> {
    let w = removal_weights(bases, theta);
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        w.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / bases.len() as f64; bases.len()]
    }
}

fn draw_index(weights: &[f64], rng: &mut SimRng) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        log::warn!("all removal weights vanished; removing uniformly at random");
        return rng.random_range(0..weights.len());
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap at the top; take the last positive weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// Dependent thinning: repeatedly recomputes nearest-neighbour marks among
/// the remaining bases, removes one tree drawn with probability proportional
/// to `1 - exp(-theta^2 m^2)` together with its end points, until `n_b`
/// trees remain.
pub fn dependent_thin(sample: &NerveSample, theta: f64, n_b: usize, rng: RngSpec) -> Result<NerveSample> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(invalid_arg(format!("theta must be > 0, got {theta}")));
    }
    let n = sample.n_trees();
    if n_b >= n {
        return Err(invalid_arg(format!(
            "target count {n_b} must be below the current tree count {n}"
        )));
    }
    if n_b == 0 {
        return Err(invalid_arg(
            "dependent thinning needs at least one remaining tree (marks need two points)",
        ));
    }
    let mut rng = rng.rng();
    let mut trees: Vec<NerveTree> = sample.trees().to_vec();
    let mut bases: Vec<Point> = trees.iter().map(|t| t.base).collect();
    while trees.len() > n_b {
        let w = removal_weights(&bases, theta);
        let l = draw_index(&w, &mut rng);
        trees.remove(l);
        bases.remove(l);
    }
    Ok(sample.with_trees(trees))
}

/// Indices of samples with at least `n_b + 5` trees.
pub fn eligible_indices(healthy: &SampleSet, n_b: usize) -> Vec<usize> {
    healthy
        .samples()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.n_trees() >= n_b + 5)
        .map(|(i, _)| i)
        .collect()
}

/// Sample ids of the healthy samples eligible as thinning sources for a
/// target with `n_b` trees.
pub fn eligible_healthy(healthy: &SampleSet, n_b: usize) -> Vec<String> {
    eligible_indices(healthy, n_b)
        .into_iter()
        .map(|i| healthy.samples()[i].sample_id.clone())
        .collect()
}
