//! Second-order and empty-space summary functions for single and replicated
//! point patterns.
//!
//! All pair-based estimators use the translation edge correction
//! `1 / |W ∩ (W + x_i - x_j)|`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{check_grid, linear_grid, CurveKind, SummaryCurve};
use crate::error::{invalid_arg, Error, Result};
use crate::geometry::{erode_window, MarkedPointPattern, Point, PointPattern, Window};
use crate::rng::RngSpec;
use crate::stats::quantile_sorted;

/// Convex weights used to pool replicate curves.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolingWeights {
    weights: Vec<f64>,
}

impl PoolingWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid_arg("pooling weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid_arg(format!("pooling weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Settings for the empty space function estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FConfig {
    /// Target number of test points; the stratification grid rounds this.
    pub n_test_points: usize,
    pub grid: Vec<f64>,
}

impl Default for FConfig {
    fn default() -> Self {
        Self {
            n_test_points: 10_000,
            grid: linear_grid(0.0, 100.0, 1.0),
        }
    }
}

pub const DEFAULT_F_THRESHOLD: f64 = 0.3;

fn check_pair_grid(grid: &[f64], window: &Window) -> Result<()> {
    check_grid(grid)?;
    if grid[0] < 0.0 {
        return Err(invalid_arg("r-grid must be nonnegative"));
    }
    let rmax = *grid.last().unwrap();
    if rmax >= window.width().min(window.height()) {
        return Err(Error::RadiusTooLarge {
            r: rmax,
            width: window.width(),
            height: window.height(),
        });
    }
    Ok(())
}

/// Ripley's K with translation correction:
/// `K(r) = |W|^2 / n^2 * sum_{i != j} 1{d_ij <= r} / |W_xi ∩ W_xj|`.
/// The squared window area makes K an area, so a Poisson pattern gives
/// `pi r^2` on any window.
pub fn estimate_k(pattern: &PointPattern, grid: &[f64]) -> Result<SummaryCurve> {
    let n = pattern.len();
    if n < 2 {
        return Err(invalid_arg(format!("K needs at least 2 points, got {n}")));
    }
    let window = pattern.window();
    check_pair_grid(grid, window)?;
    let rmax = *grid.last().unwrap();
    let pts = pattern.points();

    // (distance, ordered-pair weight) for every unordered pair within rmax
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = pts[i].x - pts[j].x;
            let dy = pts[i].y - pts[j].y;
            let d = (dx * dx + dy * dy).sqrt();
            if d <= rmax {
                pairs.push((d, 2.0 / window.overlap_area(dx, dy)));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let scale = window.area() * window.area() / (n as f64 * n as f64);
    let mut values = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut next = 0;
    for &r in grid {
        while next < pairs.len() && pairs[next].0 <= r {
            acc += pairs[next].1;
            next += 1;
        }
        values.push(scale * acc);
    }
    SummaryCurve::new(grid.to_vec(), values, CurveKind::K)
}

/// `sqrt(K(r) / pi) - r`. Missing K values stay missing.
pub fn centered_l(k: &SummaryCurve) -> Result<SummaryCurve> {
    if let Some(v) = k.values().iter().find(|v| **v < 0.0) {
        return Err(invalid_arg(format!("negative K value {v}")));
    }
    Ok(k.map_values(CurveKind::LCentered, |r, v| (v / PI).sqrt() - r))
}

/// `w_i = n_i^2 / sum_k n_k^2`.
pub fn square_point_weights(counts: &[usize]) -> Result<PoolingWeights> {
    let total: f64 = counts.iter().map(|&c| (c as f64).powi(2)).sum();
    if total == 0.0 {
        return Err(invalid_arg("square point weights need at least one nonzero count"));
    }
    let mut weights: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64).powi(2) / total)
        .collect();
    // absorb rounding so the invariant sum == 1 holds tightly
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    PoolingWeights::new(weights)
}

/// Pointwise weighted mean. Missing values are skipped and the remaining
/// weights renormalized; a grid value missing everywhere stays missing.
pub fn pool_curves(curves: &[SummaryCurve], weights: &PoolingWeights) -> Result<SummaryCurve> {
    let first = curves
        .first()
        .ok_or_else(|| invalid_arg("cannot pool an empty list of curves"))?;
    if curves.len() != weights.len() {
        return Err(invalid_arg(format!(
            "{} curves but {} weights",
            curves.len(),
            weights.len()
        )));
    }
    for (i, c) in curves.iter().enumerate() {
        if !c.same_grid(first) {
            return Err(Error::GridMismatch(format!("curve {i} has a different grid")));
        }
        if c.kind() != first.kind() {
            return Err(Error::GridMismatch(format!("curve {i} has a different kind")));
        }
    }
    let w = weights.as_slice();
    let values = (0..first.len())
        .map(|k| {
            let (mut num, mut den) = (0.0, 0.0);
            for (c, &wi) in curves.iter().zip(w) {
                let v = c.values()[k];
                if !v.is_nan() {
                    num += wi * v;
                    den += wi;
                }
            }
            if den > 0.0 {
                num / den
            } else {
                f64::NAN
            }
        })
        .collect();
    SummaryCurve::new(first.grid().to_vec(), values, first.kind())
}

/// One replicate curve with its subject and point count.
#[derive(Debug, Clone)]
pub struct Replicate<'a> {
    pub subject_id: &'a str,
    pub curve: SummaryCurve,
    pub count: usize,
}

/// Two-level pooling: samples to subjects, then subjects to the group, each
/// level with square point number weights. Subjects are taken in order of
/// first appearance.
pub fn pool_hierarchical(replicates: &[Replicate<'_>]) -> Result<SummaryCurve> {
    let mut subjects: Vec<&str> = Vec::new();
    for r in replicates {
        if !subjects.contains(&r.subject_id) {
            subjects.push(r.subject_id);
        }
    }
    let mut subject_curves = Vec::with_capacity(subjects.len());
    let mut subject_counts = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let members: Vec<&Replicate> = replicates.iter().filter(|r| r.subject_id == *s).collect();
        let counts: Vec<usize> = members.iter().map(|r| r.count).collect();
        let curves: Vec<SummaryCurve> = members.iter().map(|r| r.curve.clone()).collect();
        let total: usize = counts.iter().sum();
        let curve = if total == 0 {
            pool_curves(&curves, &PoolingWeights::new(vec![1.0 / curves.len() as f64; curves.len()])?)?
        } else {
            pool_curves(&curves, &square_point_weights(&counts)?)?
        };
        subject_curves.push(curve);
        subject_counts.push(total);
    }
    pool_curves(&subject_curves, &square_point_weights(&subject_counts)?)
}

/// Epanechnikov kernel with half-width `b`.
#[inline]
pub fn epanechnikov(x: f64, b: f64) -> f64 {
    let u = x / b;
    if u.abs() <= 1.0 {
        0.75 / b * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR / 1.34) n^(-1/5)`, applied to
/// the pairwise distances shorter than `rmax`.
pub fn silverman_bandwidth(points: &[Point], rmax: f64) -> Result<f64> {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dist = points[i].dist(&points[j]);
            if dist < rmax {
                d.push(dist);
            }
        }
    }
    if d.len() < 2 {
        return Err(Error::Numeric(format!(
            "bandwidth needs at least 2 pair distances below {rmax}, found {}",
            d.len()
        )));
    }
    d.sort_by(f64::total_cmp);
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile_sorted(&d, 0.75) - quantile_sorted(&d, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = 0.9 * spread * n.powf(-0.2);
    if bw > 0.0 && bw.is_finite() {
        Ok(bw)
    } else {
        Err(Error::Numeric("degenerate pair distances; bandwidth is zero".into()))
    }
}

/// Kernel estimate of the mark correlation function with test function
/// `f(m_i, m_j) = m_i m_j`:
///
/// `k(r) = sum m_i m_j w_ij / (mbar^2 sum w_ij)`,
/// `w_ij = e_b(r - d_ij) / |W_xi ∩ W_xj|`.
///
/// Grid values without kernel mass are missing (`NaN`).
pub fn mark_correlation(
    mpattern: &MarkedPointPattern,
    grid: &[f64],
    bandwidth: Option<f64>,
) -> Result<SummaryCurve> {
    let n = mpattern.len();
    if n < 2 {
        return Err(invalid_arg(format!(
            "mark correlation needs at least 2 points, got {n}"
        )));
    }
    let window = mpattern.window();
    check_pair_grid(grid, window)?;
    let marks = mpattern.marks();
    // anchored mean: exactly m_0 when all marks are equal, so that the
    // normalised products below are exactly 1 for constant marks
    let mbar = marks[0] + marks.iter().map(|m| m - marks[0]).sum::<f64>() / n as f64;
    if mbar == 0.0 {
        return Err(Error::Numeric("mark mean is zero".into()));
    }
    let rmax = *grid.last().unwrap();
    let b = match bandwidth {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => return Err(invalid_arg(format!("bandwidth must be > 0, got {b}"))),
        None => silverman_bandwidth(mpattern.points(), rmax)?,
    };

    let pts = mpattern.points();
    let mut num = vec![0.0; grid.len()];
    let mut den = vec![0.0; grid.len()];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = pts[i].x - pts[j].x;
            let dy = pts[i].y - pts[j].y;
            let d = (dx * dx + dy * dy).sqrt();
            if d > rmax + b {
                continue;
            }
            let inv_area = 1.0 / window.overlap_area(dx, dy);
            let mm = (marks[i] / mbar) * (marks[j] / mbar);
            for (k, &r) in grid.iter().enumerate() {
                let e = epanechnikov(r - d, b);
                if e > 0.0 {
                    let w = e * inv_area;
                    num[k] += mm * w;
                    den[k] += w;
                }
            }
        }
    }
    let values = num
        .iter()
        .zip(&den)
        .map(|(&a, &w)| if w > 0.0 { a / w } else { f64::NAN })
        .collect();
    SummaryCurve::new(grid.to_vec(), values, CurveKind::MarkCorr)
}

/// One uniform point in each cell of a grid of roughly `n` equal cells.
pub fn stratified_test_points<R: Rng + ?Sized>(window: &Window, n: usize, rng: &mut R) -> Vec<Point> {
    let n = n.max(1) as f64;
    let nx = ((n * window.width() / window.height()).sqrt().round() as usize).max(1);
    let ny = ((n / nx as f64).round() as usize).max(1);
    let cw = window.width() / nx as f64;
    let ch = window.height() / ny as f64;
    let mut out = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let x = window.xmin + (ix as f64 + rng.random::<f64>()) * cw;
            let y = window.ymin + (iy as f64 + rng.random::<f64>()) * ch;
            out.push(Point::new(x.min(window.xmax), y.min(window.ymax)));
        }
    }
    out
}

fn check_f_grid(grid: &[f64], window: &Window) -> Result<()> {
    check_grid(grid)?;
    if grid[0] < 0.0 {
        return Err(invalid_arg("r-grid must be nonnegative"));
    }
    erode_window(window, *grid.last().unwrap()).map(|_| ())
}

/// Empty space function estimated from a fixed set of test points: at each
/// r, the fraction of test points in `W ⊖ r` within distance r of the pattern.
pub fn empty_space_f_with_points(
    pattern: &PointPattern,
    grid: &[f64],
    test_points: &[Point],
) -> Result<SummaryCurve> {
    let window = pattern.window();
    check_f_grid(grid, window)?;
    let m = grid.len();
    if pattern.is_empty() {
        log::warn!("empty space function of an empty pattern is identically zero");
        return SummaryCurve::new(grid.to_vec(), vec![0.0; m], CurveKind::F);
    }
    let data = pattern.points();
    // difference arrays over grid indices
    let mut hits = vec![0i64; m + 1];
    let mut inside = vec![0i64; m + 1];
    for y in test_points {
        let b = window.boundary_distance(y);
        // last grid index with r <= b
        let hi = grid.partition_point(|&r| r <= b);
        if hi == 0 {
            continue;
        }
        inside[0] += 1;
        inside[hi] -= 1;
        let d = data
            .iter()
            .map(|p| p.dist2(y))
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        let lo = grid.partition_point(|&r| r < d);
        if lo < hi {
            hits[lo] += 1;
            hits[hi] -= 1;
        }
    }
    let mut values = Vec::with_capacity(m);
    let (mut h, mut t) = (0i64, 0i64);
    for k in 0..m {
        h += hits[k];
        t += inside[k];
        values.push(if t > 0 { h as f64 / t as f64 } else { f64::NAN });
    }
    SummaryCurve::new(grid.to_vec(), values, CurveKind::F)
}

/// Empty space function with one stratified test-point set reused for all r.
pub fn empty_space_f(pattern: &PointPattern, config: &FConfig, rng: RngSpec) -> Result<SummaryCurve> {
    check_f_grid(&config.grid, pattern.window())?;
    let pts = stratified_test_points(pattern.window(), config.n_test_points, &mut rng.rng());
    empty_space_f_with_points(pattern, &config.grid, &pts)
}

/// Smallest grid r with `F(r) >= threshold`.
pub fn first_crossing(f: &SummaryCurve, threshold: f64) -> Result<f64> {
    f.grid()
        .iter()
        .zip(f.values())
        .find(|(_, &v)| v >= threshold)
        .map(|(&r, _)| r)
        .ok_or_else(|| Error::SummaryUndefined {
            max_f: f.values().iter().copied().filter(|v| !v.is_nan()).fold(0.0, f64::max),
            threshold,
        })
}

/// Scalar ABC summary: smallest r with `F(r) >= 0.3`.
pub fn abc_summary(pattern: &PointPattern, config: &FConfig, rng: RngSpec) -> Result<f64> {
    abc_summary_with_threshold(pattern, config, DEFAULT_F_THRESHOLD, rng)
}

pub fn abc_summary_with_threshold(
    pattern: &PointPattern,
    config: &FConfig,
    threshold: f64,
    rng: RngSpec,
) -> Result<f64> {
    if pattern.is_empty() {
        return Err(invalid_arg("summary of an empty pattern is undefined"));
    }
    first_crossing(&empty_space_f(pattern, config, rng)?, threshold)
}
