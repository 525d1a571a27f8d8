//! Global envelopes ranked by the extreme rank length (ERL) measure,
//! pointwise bootstrap envelopes for pooled curves, and posterior predictive
//! bands for the dependent thinning model.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{linear_grid, CurveKind, SummaryCurve};
use crate::error::{invalid_arg, Error, Result};
use crate::geometry::{nn_distance_marks, MarkedPointPattern, PointPattern};
use crate::rng::RngSpec;
use crate::sample::{NerveSample, SampleSet};
use crate::stats::quantile_sorted;
use crate::summaries::{
    centered_l, estimate_k, mark_correlation, pool_curves, pool_hierarchical, square_point_weights,
    Replicate,
};
use crate::territory::{ecdf_curve, territory_size, total_territory_size};
use crate::thinning::{dependent_thin, eligible_indices};

/// Curves sharing one grid, stored row-wise. `NaN` is a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEnsemble {
    grid: Vec<f64>,
    kind: CurveKind,
    rows: Vec<Vec<f64>>,
}

impl CurveEnsemble {
    pub fn new(curves: &[SummaryCurve]) -> Result<Self> {
        let first = curves
            .first()
            .ok_or_else(|| invalid_arg("an ensemble needs at least 2 curves"))?;
        for (i, c) in curves.iter().enumerate() {
            if !c.same_grid(first) {
                return Err(Error::GridMismatch(format!("ensemble curve {i} has a different grid")));
            }
        }
        Self::from_rows(
            first.grid().to_vec(),
            first.kind(),
            curves.iter().map(|c| c.values().to_vec()).collect(),
        )
    }

    pub fn from_rows(grid: Vec<f64>, kind: CurveKind, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(invalid_arg(format!(
                "an ensemble needs at least 2 curves, got {}",
                rows.len()
            )));
        }
        crate::curve::check_grid(&grid)?;
        if let Some(i) = rows.iter().position(|r| r.len() != grid.len()) {
            return Err(Error::GridMismatch(format!(
                "ensemble row {i} has {} values for {} grid points",
                rows[i].len(),
                grid.len()
            )));
        }
        Ok(Self { grid, kind, rows })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn curve(&self, i: usize) -> SummaryCurve {
        SummaryCurve::new(self.grid.clone(), self.rows[i].clone(), self.kind).expect("valid grid")
    }

    /// Grid indices where every curve has a value.
    pub fn common_valid(&self) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&k| self.rows.iter().all(|r| r[k].is_finite()))
            .collect()
    }

    fn restrict(&self, keep: &[usize]) -> CurveEnsemble {
        CurveEnsemble {
            grid: keep.iter().map(|&k| self.grid[k]).collect(),
            kind: self.kind,
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&k| r[k]).collect())
                .collect(),
        }
    }
}

/// Sorted vector of pointwise two-sided ranks of one curve. Lexicographically
/// smaller keys belong to more extreme curves.
#[derive(Debug, Clone, PartialEq)]
pub struct ErlKey(pub Vec<f64>);

impl Eq for ErlKey {}

impl PartialOrd for ErlKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ErlKey {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

/// Pointwise two-sided mid-ranks `min(R_below, s + 1 - R_below)`.
fn pointwise_ranks(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let s = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mut ranks = vec![vec![0.0; d]; s];
    let mut order: Vec<usize> = (0..s).collect();
    for k in 0..d {
        order.sort_by(|&a, &b| rows[a][k].total_cmp(&rows[b][k]));
        let mut i = 0;
        while i < s {
            let mut j = i;
            while j + 1 < s && rows[order[j + 1]][k] == rows[order[i]][k] {
                j += 1;
            }
            // positions i..=j (0-based) share mid-rank
            let below = (i + j) as f64 / 2.0 + 1.0;
            let two_sided = below.min(s as f64 + 1.0 - below);
            for &c in &order[i..=j] {
                ranks[c][k] = two_sided;
            }
            i = j + 1;
        }
    }
    ranks
}

/// ERL ordering keys, one per curve.
pub fn erl_rank(ensemble: &CurveEnsemble) -> Vec<ErlKey> {
    pointwise_ranks(&ensemble.rows)
        .into_iter()
        .map(|mut r| {
            r.sort_by(f64::total_cmp);
            ErlKey(r)
        })
        .collect()
}

/// Lower and upper bound curves, optionally with the curve under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub grid: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub alpha: f64,
    /// Observed values on `grid`.
    pub observed: Option<Vec<f64>>,
    /// Number of curves the envelope was built from (observed included).
    pub n_curves: usize,
    /// Grid values removed because some curve was missing there.
    pub dropped_r: Vec<f64>,
    pub warning: Option<String>,
}

impl Envelope {
    /// Grid indices where `values` leave the band.
    pub fn exits(&self, values: &[f64]) -> Vec<usize> {
        values
            .iter()
            .enumerate()
            .filter(|(k, v)| **v < self.lo[*k] || **v > self.hi[*k])
            .map(|(k, _)| k)
            .collect()
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        self.exits(values).is_empty()
    }

    /// r values where the observed curve exits; empty without an observed curve.
    pub fn exit_points(&self) -> Vec<f64> {
        self.observed
            .as_ref()
            .map(|o| self.exits(o).into_iter().map(|k| self.grid[k]).collect())
            .unwrap_or_default()
    }

    pub fn observed_inside(&self) -> Option<bool> {
        self.observed.as_ref().map(|o| self.contains(o))
    }

    /// `r,lo,hi,observed`, observed left empty when absent.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "lo", "hi", "observed"])?;
        for k in 0..self.grid.len() {
            let obs = self
                .observed
                .as_ref()
                .map(|o| o[k].to_string())
                .unwrap_or_default();
            w.write_record([
                self.grid[k].to_string(),
                self.lo[k].to_string(),
                self.hi[k].to_string(),
                obs,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn report(&self) -> EnvelopeReport {
        EnvelopeReport {
            alpha: self.alpha,
            n_curves: self.n_curves,
            inside: self.observed_inside(),
            exit_points: self.exit_points(),
            dropped_r: self.dropped_r.clone(),
            warning: self.warning.clone(),
        }
    }
}

/// JSON verdict for an envelope test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub alpha: f64,
    pub n_curves: usize,
    pub inside: Option<bool>,
    pub exit_points: Vec<f64>,
    pub dropped_r: Vec<f64>,
    pub warning: Option<String>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(invalid_arg(format!("alpha must lie in [0, 1), got {alpha}")))
    }
}

/// Indices of the curves kept in the non-extreme set: all curves whose key is
/// at least `E_(alpha)`, the largest key with at most `alpha s` keys strictly
/// below it. Curves tied at the cutoff are all kept.
fn non_extreme_set(keys: &[ErlKey], alpha: f64) -> Vec<usize> {
    let s = keys.len();
    let mut sorted: Vec<&ErlKey> = keys.iter().collect();
    sorted.sort();
    let m = ((alpha * s as f64 + 1e-9).floor() as usize).min(s - 1);
    let cutoff = sorted[m];
    (0..s).filter(|&i| &keys[i] >= cutoff).collect()
}

fn envelope_from(ens: &CurveEnsemble, alpha: f64, observed: Option<Vec<f64>>, dropped_r: Vec<f64>) -> Envelope {
    let keys = erl_rank(ens);
    let keep = non_extreme_set(&keys, alpha);
    let d = ens.grid.len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &i in &keep {
        for k in 0..d {
            lo[k] = lo[k].min(ens.rows[i][k]);
            hi[k] = hi[k].max(ens.rows[i][k]);
        }
    }
    let s = ens.len();
    let warning = (alpha > 0.0 && (s as f64) < 2.0 / alpha).then(|| {
        format!("only {s} curves for alpha = {alpha}; at least {} recommended", (2.0 / alpha).ceil())
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Envelope {
        grid: ens.grid.clone(),
        lo,
        hi,
        alpha,
        observed,
        n_curves: s,
        dropped_r,
        warning,
    }
}

fn restrict_valid(ens: &CurveEnsemble) -> Result<(CurveEnsemble, Vec<f64>)> {
    let keep = ens.common_valid();
    if keep.is_empty() {
        return Err(Error::Numeric("no grid value where every curve is defined".into()));
    }
    let dropped = (0..ens.grid.len())
        .filter(|k| !keep.contains(k))
        .map(|k| ens.grid[k])
        .collect();
    Ok((ens.restrict(&keep), dropped))
}

/// ERL global envelope at level `alpha` from the ensemble alone.
pub fn global_envelope(ensemble: &CurveEnsemble, alpha: f64) -> Result<Envelope> {
    check_alpha(alpha)?;
    let (ens, dropped) = restrict_valid(ensemble)?;
    Ok(envelope_from(&ens, alpha, None, dropped))
}

/// Monte Carlo test: the observed curve is ranked together with the
/// simulated ones and the envelope is built from all of them.
pub fn global_envelope_test(observed: &SummaryCurve, simulated: &CurveEnsemble, alpha: f64) -> Result<Envelope> {
    check_alpha(alpha)?;
    if observed.grid() != simulated.grid() {
        return Err(Error::GridMismatch("observed curve and ensemble grids differ".into()));
    }
    let mut rows = Vec::with_capacity(simulated.len() + 1);
    rows.push(observed.values().to_vec());
    rows.extend(simulated.rows.iter().cloned());
    let all = CurveEnsemble::from_rows(simulated.grid.clone(), simulated.kind, rows)?;
    let (ens, dropped) = restrict_valid(&all)?;
    let obs = ens.rows[0].clone();
    Ok(envelope_from(&ens, alpha, Some(obs), dropped))
}

/// One subject's pooled curve and total point count.
#[derive(Debug, Clone)]
pub struct SubjectCurve {
    pub curve: SummaryCurve,
    pub count: usize,
}

/// Resamples subjects with replacement `b` times, pools each resample with
/// square point number weights and takes pointwise `alpha/2` and
/// `1 - alpha/2` quantiles. The observed curve is the pool of all subjects.
pub fn bootstrap_pointwise_envelope(
    subjects: &[SubjectCurve],
    alpha: f64,
    b: usize,
    rng: RngSpec,
) -> Result<Envelope> {
    if subjects.len() < 2 {
        return Err(invalid_arg(format!(
            "bootstrap needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid_arg(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if b == 0 {
        return Err(invalid_arg("need at least one bootstrap replicate"));
    }
    let curves: Vec<SummaryCurve> = subjects.iter().map(|s| s.curve.clone()).collect();
    let counts: Vec<usize> = subjects.iter().map(|s| s.count).collect();
    let pooled = pool_curves(&curves, &square_point_weights(&counts)?)?;

    let reps: Vec<Vec<f64>> = (0..b as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.derive(i).rng();
            let idx: Vec<usize> = (0..subjects.len()).map(|_| r.random_range(0..subjects.len())).collect();
            let cs: Vec<SummaryCurve> = idx.iter().map(|&j| curves[j].clone()).collect();
            let ns: Vec<usize> = idx.iter().map(|&j| counts[j]).collect();
            // a resample of zero-count subjects has no weights; it is all-missing
            match square_point_weights(&ns) {
                Ok(w) => pool_curves(&cs, &w).map(|c| c.values().to_vec()),
                Err(_) => Ok(vec![f64::NAN; pooled.len()]),
            }
        })
        .collect::<Result<_>>()?;

    let d = pooled.len();
    let mut lo = vec![f64::NAN; d];
    let mut hi = vec![f64::NAN; d];
    for k in 0..d {
        let mut col: Vec<f64> = reps.iter().map(|r| r[k]).filter(|v| !v.is_nan()).collect();
        if col.is_empty() {
            continue;
        }
        col.sort_by(f64::total_cmp);
        lo[k] = quantile_sorted(&col, alpha / 2.0);
        hi[k] = quantile_sorted(&col, 1.0 - alpha / 2.0);
    }
    Ok(Envelope {
        grid: pooled.grid().to_vec(),
        lo,
        hi,
        alpha,
        observed: Some(pooled.values().to_vec()),
        n_curves: b,
        dropped_r: Vec::new(),
        warning: None,
    })
}

/// Curve-valued group statistics used for posterior predictive checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// Centered L of the end points.
    LEnds,
    /// Centered L of the base points.
    LBases,
    /// Mark correlation of bases marked by territory size.
    MarkCorr,
    /// ECDF of the number of end points per tree.
    ClusterSizeEcdf,
    /// ECDF of per-sample total territory size.
    TerritoryAreaEcdf,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::LEnds,
        Statistic::LBases,
        Statistic::MarkCorr,
        Statistic::ClusterSizeEcdf,
        Statistic::TerritoryAreaEcdf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::LEnds => "L-ends",
            Statistic::LBases => "L-bases",
            Statistic::MarkCorr => "markcorr",
            Statistic::ClusterSizeEcdf => "cluster-size-ecdf",
            Statistic::TerritoryAreaEcdf => "territory-area-ecdf",
        }
    }

    /// Pooled curve of a group of samples; samples sharing a subject id are
    /// pooled first.
    pub fn group_curve(&self, samples: &[&NerveSample], cfg: &StatisticConfig) -> Result<SummaryCurve> {
        if samples.is_empty() {
            return Err(invalid_arg("group statistic of an empty group"));
        }
        match self {
            Statistic::LEnds => pooled_per_sample(samples, |s| l_curve(&s.ends(), &cfg.r_grid)),
            Statistic::LBases => pooled_per_sample(samples, |s| l_curve(&s.bases(), &cfg.r_grid)),
            Statistic::MarkCorr => pooled_per_sample(samples, |s| {
                let m = territory_marks(s)?;
                if m.len() < 2 {
                    return Ok(None);
                }
                match mark_correlation(&m, &cfg.r_grid, cfg.mark_bandwidth) {
                    Ok(c) => Ok(Some((c, m.len()))),
                    Err(Error::Numeric(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            }),
            Statistic::ClusterSizeEcdf => {
                let v: Vec<f64> = samples
                    .iter()
                    .flat_map(|s| s.trees().iter().map(|t| t.n_ends() as f64))
                    .collect();
                ecdf_curve(&v, &cfg.cluster_grid)
            }
            Statistic::TerritoryAreaEcdf => {
                let v: Vec<f64> = samples.iter().map(|s| total_territory_size(s)).collect();
                ecdf_curve(&v, &cfg.area_grid)
            }
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .iter()
            .copied()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Statistic::ALL.iter().map(|s| s.name()).collect();
                invalid_arg(format!("unknown statistic '{s}'; valid: {}", names.join(", ")))
            })
    }
}

/// Grids and tuning for [`Statistic::group_curve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticConfig {
    pub r_grid: Vec<f64>,
    pub mark_bandwidth: Option<f64>,
    pub cluster_grid: Vec<f64>,
    pub area_grid: Vec<f64>,
}

impl Default for StatisticConfig {
    fn default() -> Self {
        StatisticConfig {
            r_grid: linear_grid(0.0, 100.0, 1.0),
            mark_bandwidth: None,
            cluster_grid: linear_grid(0.0, 30.0, 1.0),
            area_grid: linear_grid(0.0, 30_000.0, 250.0),
        }
    }
}

impl StatisticConfig {
    pub fn grid_for(&self, stat: Statistic) -> &[f64] {
        match stat {
            Statistic::LEnds | Statistic::LBases | Statistic::MarkCorr => &self.r_grid,
            Statistic::ClusterSizeEcdf => &self.cluster_grid,
            Statistic::TerritoryAreaEcdf => &self.area_grid,
        }
    }
}

fn l_curve(p: &PointPattern, grid: &[f64]) -> Result<Option<(SummaryCurve, usize)>> {
    if p.len() < 2 {
        return Ok(None);
    }
    Ok(Some((centered_l(&estimate_k(p, grid)?)?, p.len())))
}

/// Bases of trees with end points, marked by territory size.
pub fn territory_marks(sample: &NerveSample) -> Result<MarkedPointPattern> {
    let trees: Vec<_> = sample.trees().iter().filter(|t| !t.ends.is_empty()).collect();
    let marks = trees.iter().map(|t| territory_size(t)).collect::<Result<Vec<_>>>()?;
    let pattern = PointPattern::new(trees.iter().map(|t| t.base).collect(), *sample.window())?;
    MarkedPointPattern::new(pattern, marks)
}

/// Per-sample curves pooled hierarchically; samples whose curve is
/// undefined (returning `None`) are left out.
fn pooled_per_sample(
    samples: &[&NerveSample],
    f: impl Fn(&NerveSample) -> Result<Option<(SummaryCurve, usize)>>,
) -> Result<SummaryCurve> {
    let mut reps = Vec::with_capacity(samples.len());
    for s in samples {
        if let Some((curve, count)) = f(s)? {
            reps.push(Replicate {
                subject_id: s.subject_id.as_str(),
                curve,
                count,
            });
        }
    }
    if reps.is_empty() {
        return Err(Error::Numeric("statistic undefined for every sample in the group".into()));
    }
    pool_hierarchical(&reps)
}

/// A target sample for posterior prediction: tree count, subject and
/// posterior draws of theta.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveTarget {
    pub target_id: String,
    pub subject_id: String,
    pub n_b: usize,
    pub thetas: Vec<f64>,
}

/// Replicate group curves: for each replicate and target, draw theta from
/// the target's posterior and a healthy source uniformly from the eligible
/// ones, thin it to the target's tree count and pool the statistic over the
/// thinned group. Replicate `i` uses `rng.derive(i)`.
pub fn posterior_predictive_replicates(
    healthy: &SampleSet,
    targets: &[PredictiveTarget],
    statistic: Statistic,
    cfg: &StatisticConfig,
    n_sim: usize,
    rng: RngSpec,
) -> Result<CurveEnsemble> {
    if targets.is_empty() {
        return Err(invalid_arg("no targets"));
    }
    if n_sim < 2 {
        return Err(invalid_arg("need at least 2 predictive replicates"));
    }
    if let Some(t) = targets.iter().find(|t| t.thetas.is_empty()) {
        return Err(invalid_arg(format!("target {} has no posterior draws", t.target_id)));
    }
    let eligible: Vec<Vec<usize>> = targets.iter().map(|t| eligible_indices(healthy, t.n_b)).collect();
    let missing: Vec<&str> = targets
        .iter()
        .zip(&eligible)
        .filter(|(t, e)| e.is_empty() || t.n_b == 0)
        .map(|(t, _)| t.target_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::NoEligibleHealthy(missing.join(", ")));
    }

    let rows: Vec<Vec<f64>> = (0..n_sim as u64)
        .into_par_iter()
        .map(|i| {
            let spec = rng.derive(i);
            let mut r = spec.rng();
            let mut thinned = Vec::with_capacity(targets.len());
            for (ti, (t, elig)) in targets.iter().zip(&eligible).enumerate() {
                let theta = t.thetas[r.random_range(0..t.thetas.len())];
                let src = &healthy.samples()[elig[r.random_range(0..elig.len())]];
                let mut s = dependent_thin(src, theta, t.n_b, spec.derive(ti as u64 + 1))?;
                s.sample_id = t.target_id.clone();
                s.subject_id = t.subject_id.clone();
                thinned.push(s);
            }
            let refs: Vec<&NerveSample> = thinned.iter().collect();
            match statistic.group_curve(&refs, cfg) {
                Ok(c) => Ok(c.values().to_vec()),
                Err(Error::Numeric(_)) => Ok(vec![f64::NAN; cfg.grid_for(statistic).len()]),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let kind = match statistic {
        Statistic::LEnds | Statistic::LBases => CurveKind::LCentered,
        Statistic::MarkCorr => CurveKind::MarkCorr,
        _ => CurveKind::Ecdf,
    };
    CurveEnsemble::from_rows(cfg.grid_for(statistic).to_vec(), kind, rows)
}

/// Global envelope over posterior predictive replicates. With an observed
/// group curve, it is ranked together with the replicates.
pub fn posterior_predictive_band(
    healthy: &SampleSet,
    targets: &[PredictiveTarget],
    statistic: Statistic,
    cfg: &StatisticConfig,
    n_sim: usize,
    alpha: f64,
    observed: Option<&SummaryCurve>,
    rng: RngSpec,
) -> Result<Envelope> {
    check_alpha(alpha)?;
    let ens = posterior_predictive_replicates(healthy, targets, statistic, cfg, n_sim, rng)?;
    match observed {
        Some(o) => global_envelope_test(o, &ens, alpha),
        None => global_envelope(&ens, alpha),
    }
}

/// Nearest-neighbour distance marks of the bases, exposed for reports.
pub fn base_spacing_marks(sample: &NerveSample) -> Result<MarkedPointPattern> {
    nn_distance_marks(&sample.bases())
}
