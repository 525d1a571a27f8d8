//! Homogeneous Poisson and Matérn cluster process simulation, the Matérn K
//! function, and minimum-contrast fitting of the cluster parameters.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::curve::{CurveKind, SummaryCurve};
use crate::error::{invalid_arg, Error, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::rng::RngSpec;
use crate::sample::{Group, NerveSample, NerveTree};

/// Matérn cluster process: parents with intensity `kappa` (per square
/// micron), each with Poisson(`mu`) daughters uniform in a disc of radius
/// `radius` microns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub kappa: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub mu: f64,
}

impl MaternParams {
    pub fn new(kappa: f64, radius: f64, mu: f64) -> Result<Self> {
        let p = Self { kappa, radius, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.kappa, self.radius, self.mu]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(invalid_arg(format!("Matérn parameters must be positive: {self:?}")))
        }
    }
}

impl Default for MaternParams {
    /// About 40 trees per 330 x 432 micron window with 4.6 ends per tree.
    fn default() -> Self {
        MaternParams {
            kappa: 40.0 / (330.0 * 432.0),
            radius: 20.0,
            mu: 4.6,
        }
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::Numeric(format!("Poisson({mean}): {e}")))?;
    Ok(d.sample(rng) as usize)
}

fn uniform_in<R: Rng + ?Sized>(w: &Window, rng: &mut R) -> Point {
    Point::new(
        w.xmin + rng.random::<f64>() * w.width(),
        w.ymin + rng.random::<f64>() * w.height(),
    )
}

/// Homogeneous Poisson process with intensity `lambda` on `window`.
pub fn simulate_poisson(lambda: f64, window: &Window, rng: RngSpec) -> Result<PointPattern> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid_arg(format!("intensity must be >= 0, got {lambda}")));
    }
    let mut rng = rng.rng();
    let n = poisson_count(lambda * window.area(), &mut rng)?;
    let pts = (0..n).map(|_| uniform_in(window, &mut rng)).collect();
    PointPattern::new(pts, *window)
}

/// One Matérn realization split into trees.
///
/// Parents are generated on the window dilated by the cluster radius. Trees
/// are kept for parents inside the window; daughters of parents outside the
/// window that land inside are returned separately as `orphan_ends`, so the
/// full daughter pattern is stationary up to the window edge.
#[derive(Debug, Clone)]
pub struct MaternRealization {
    pub sample: NerveSample,
    pub orphan_ends: Vec<Point>,
}

impl MaternRealization {
    /// All daughters inside the window, including orphans.
    pub fn daughters(&self) -> PointPattern {
        let mut pts = self.sample.end_points();
        pts.extend_from_slice(&self.orphan_ends);
        PointPattern::from_trusted(pts, *self.sample.window())
    }
}

pub fn simulate_matern(params: &MaternParams, window: &Window, rng: RngSpec) -> Result<MaternRealization> {
    params.validate()?;
    window.validate()?;
    let mut rng = rng.rng();
    let outer = window.dilate(params.radius);
    let n_parents = poisson_count(params.kappa * outer.area(), &mut rng)?;
    let mut trees = Vec::new();
    let mut orphans = Vec::new();
    for _ in 0..n_parents {
        let parent = uniform_in(&outer, &mut rng);
        let n_kids = poisson_count(params.mu, &mut rng)?;
        let mut ends = Vec::with_capacity(n_kids);
        for _ in 0..n_kids {
            let rho = params.radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            let p = Point::new(parent.x + rho * phi.cos(), parent.y + rho * phi.sin());
            if window.contains(&p) {
                ends.push(p);
            }
        }
        if window.contains(&parent) {
            trees.push(NerveTree::new(trees.len() as u64 + 1, parent, ends));
        } else {
            orphans.extend(ends);
        }
    }
    let sample = NerveSample::new("sim", "sim", Group::Healthy, trees, *window)?;
    Ok(MaternRealization {
        sample,
        orphan_ends: orphans,
    })
}

/// Excess-overlap function of two discs: `h(z)` for `z = r / 2R`, rising
/// from 0 at z = 0 to 1 at z = 1.
fn matern_overlap(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        let s = (1.0 - z * z).sqrt();
        2.0 + ((8.0 * z * z - 4.0) * z.acos() - 2.0 * z.asin() + 4.0 * z * s * s * s - 6.0 * z * s)
            / PI
    }
}

/// `K(r) = pi r^2 + h(r / 2R) / kappa`.
pub fn matern_k(params: &MaternParams, r: f64) -> f64 {
    PI * r * r + matern_overlap(r / (2.0 * params.radius)) / params.kappa
}

/// Result of a minimum-contrast fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternFit {
    #[serde(flatten)]
    pub params: MaternParams,
    pub objective: f64,
}

pub const CONTRAST_EXPONENT: f64 = 0.25;

struct Contrast<'a> {
    grid: &'a [f64],
    target: Vec<f64>,
    q: f64,
}

impl Contrast<'_> {
    /// Trapezoid rule for the integrated squared difference of K^q.
    fn eval(&self, log_kappa: f64, log_r: f64) -> f64 {
        let p = MaternParams {
            kappa: log_kappa.exp(),
            radius: log_r.exp(),
            mu: 1.0,
        };
        let diff: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.target)
            .map(|(&r, &t)| (t - matern_k(&p, r).powf(self.q)).powi(2))
            .collect();
        self.grid
            .windows(2)
            .zip(diff.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }
}

/// Nelder–Mead on a box; points are clamped into the box.
fn nelder_mead(
    f: impl Fn(f64, f64) -> f64,
    start: [f64; 2],
    step: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    tol: f64,
    max_iter: usize,
) -> Option<([f64; 2], f64, usize)> {
    let clamp = |p: [f64; 2]| [p[0].clamp(lo[0], hi[0]), p[1].clamp(lo[1], hi[1])];
    let eval = |p: [f64; 2]| f(p[0], p[1]);
    let mut s: Vec<([f64; 2], f64)> = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ]
    .into_iter()
    .map(|p| {
        let p = clamp(p);
        (p, eval(p))
    })
    .collect();
    for it in 0..max_iter {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        if s.iter().any(|v| !v.1.is_finite()) {
            return None;
        }
        let size = s
            .iter()
            .skip(1)
            .map(|v| (v.0[0] - s[0].0[0]).abs().max((v.0[1] - s[0].0[1]).abs()))
            .fold(0.0, f64::max);
        if size < tol && (s[2].1 - s[0].1).abs() <= tol * (1.0 + s[0].1.abs()) {
            return Some((s[0].0, s[0].1, it));
        }
        let c = [(s[0].0[0] + s[1].0[0]) / 2.0, (s[0].0[1] + s[1].0[1]) / 2.0];
        let along = |t: f64| clamp([c[0] + t * (s[2].0[0] - c[0]), c[1] + t * (s[2].0[1] - c[1])]);
        let xr = along(-1.0);
        let fr = eval(xr);
        if fr < s[0].1 {
            let xe = along(-2.0);
            let fe = eval(xe);
            s[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < s[1].1 {
            s[2] = (xr, fr);
        } else {
            let xc = if fr < s[2].1 { along(-0.5) } else { along(0.5) };
            let fc = eval(xc);
            if fc < fr.min(s[2].1) {
                s[2] = (xc, fc);
            } else {
                let best = s[0].0;
                for v in s.iter_mut().skip(1) {
                    let p = clamp([(v.0[0] + best[0]) / 2.0, (v.0[1] + best[1]) / 2.0]);
                    *v = (p, eval(p));
                }
            }
        }
    }
    None
}

/// Fits `(kappa, R)` by minimizing `∫ (K_hat(r)^q - K(r)^q)^2 dr` over the
/// curve's grid with `q = 0.25`; `mu` is taken from `mu_hint`.
pub fn fit_matern_mincontrast(k_curve: &SummaryCurve, mu_hint: f64) -> Result<MaternFit> {
    if k_curve.kind() != CurveKind::K {
        return Err(invalid_arg("minimum contrast needs a K curve"));
    }
    if k_curve.len() < 10 {
        return Err(invalid_arg(format!(
            "minimum contrast needs at least 10 grid points, got {}",
            k_curve.len()
        )));
    }
    if !(mu_hint > 0.0) || !mu_hint.is_finite() {
        return Err(invalid_arg(format!("mu hint must be > 0, got {mu_hint}")));
    }
    if k_curve.values().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid_arg("K curve must be finite and nonnegative"));
    }
    let grid = k_curve.grid();
    let rmax = *grid.last().unwrap();
    if !(rmax > 0.0) {
        return Err(invalid_arg("K curve grid must extend beyond r = 0"));
    }
    let q = CONTRAST_EXPONENT;
    let contrast = Contrast {
        grid,
        target: k_curve.values().iter().map(|v| v.powf(q)).collect(),
        q,
    };

    // search box: clustering excess 1/kappa from 1e-4 to 1e4 times pi rmax^2,
    // cluster radius from rmax / 1000 to 2 rmax
    let area = PI * rmax * rmax;
    let lo = [(1e-4 / area).ln(), (rmax / 1000.0).ln()];
    let hi = [(1e4 / area).ln(), (2.0 * rmax).ln()];

    let n = 60;
    let mut best = ([0.0; 2], f64::INFINITY);
    for i in 0..=n {
        for j in 0..=n {
            let p = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64,
            ];
            let v = contrast.eval(p[0], p[1]);
            if v < best.1 {
                best = (p, v);
            }
        }
    }
    let step = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
    let (x, fx, _) = nelder_mead(
        |a, b| contrast.eval(a, b),
        best.0,
        step,
        lo,
        hi,
        1e-8,
        5000,
    )
    .ok_or_else(|| {
        Error::Numeric(format!(
            "minimum contrast optimizer did not converge (grid optimum kappa = {:.4e}, R = {:.4})",
            best.0[0].exp(),
            best.0[1].exp()
        ))
    })?;

    let margin = 1e-3;
    for (k, name) in ["kappa", "R"].iter().enumerate() {
        let span = hi[k] - lo[k];
        if x[k] - lo[k] < margin * span || hi[k] - x[k] < margin * span {
            return Err(Error::Numeric(format!(
                "minimum contrast solution on the search boundary for {name} \
                 (kappa = {:.4e}, R = {:.4}, objective = {fx:.4e}); the curve shows no \
                 identifiable clustering",
                x[0].exp(),
                x[1].exp()
            )));
        }
    }
    Ok(MaternFit {
        params: MaternParams::new(x[0].exp(), x[1].exp(), mu_hint)?,
        objective: fx,
    })
}
