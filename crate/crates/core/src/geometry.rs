//! Planar points, rectangular observation windows and (marked) point patterns.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_data, Error, Result};

/// A location in the plane, in microns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    // +0.0 and -0.0 are the same location.
    fn key(&self) -> (u64, u64) {
        ((self.x + 0.0).to_bits(), (self.y + 0.0).to_bits())
    }
}

/// Closed axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Default for Window {
    /// The 330 x 432 micron biopsy window.
    fn default() -> Self {
        Window {
            xmin: 0.0,
            ymin: 0.0,
            xmax: 330.0,
            ymax: 432.0,
        }
    }
}

impl Window {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let w = Window {
            xmin,
            ymin,
            xmax,
            ymax,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn unit() -> Self {
        Window {
            xmin: 0.0,
            ymin: 0.0,
            xmax: 1.0,
            ymax: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.xmin, self.ymin, self.xmax, self.ymax]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.xmax <= self.xmin || self.ymax <= self.ymin {
            return Err(invalid_data(format!("degenerate window {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Distance from an interior point to the nearest edge.
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        (p.x - self.xmin)
            .min(self.xmax - p.x)
            .min(p.y - self.ymin)
            .min(self.ymax - p.y)
    }

    /// `|W ∩ (W + (dx, dy))|`, the translation edge-correction area.
    #[inline]
    pub fn overlap_area(&self, dx: f64, dy: f64) -> f64 {
        let a = (self.width() - dx.abs()).max(0.0);
        let b = (self.height() - dy.abs()).max(0.0);
        a * b
    }

    /// Largest r for which the eroded window is nonempty (exclusive).
    pub fn max_erosion(&self) -> f64 {
        0.5 * self.width().min(self.height())
    }

    /// Window dilated by `r` on every side.
    pub fn dilate(&self, r: f64) -> Window {
        Window {
            xmin: self.xmin - r,
            ymin: self.ymin - r,
            xmax: self.xmax + r,
            ymax: self.ymax + r,
        }
    }
}

/// Shrinks `window` by `r` on each side.
pub fn erode_window(window: &Window, r: f64) -> Result<Window> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(invalid_arg(format!("erosion radius must be >= 0, got {r}")));
    }
    if 2.0 * r >= window.width() || 2.0 * r >= window.height() {
        return Err(Error::RadiusTooLarge {
            r,
            width: window.width(),
            height: window.height(),
        });
    }
    Ok(Window {
        xmin: window.xmin + r,
        ymin: window.ymin + r,
        xmax: window.xmax - r,
        ymax: window.ymax - r,
    })
}

/// A simple point pattern observed in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Window,
}

impl PointPattern {
    /// Validates finiteness, containment in the window and simplicity.
    pub fn new(points: Vec<Point>, window: Window) -> Result<Self> {
        window.validate()?;
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(invalid_data(format!("point {i} has non-finite coordinates")));
            }
            if !window.contains(p) {
                return Err(invalid_data(format!(
                    "point {i} ({}, {}) lies outside window {:?}",
                    p.x, p.y, window
                )));
            }
        }
        if let Some((i, j)) = find_duplicate(&points) {
            return Err(invalid_data(format!(
                "points {i} and {j} coincide at ({}, {})",
                points[i].x, points[i].y
            )));
        }
        Ok(Self { points, window })
    }

    pub fn empty(window: Window) -> Self {
        Self {
            points: Vec::new(),
            window,
        }
    }

    /// For points already known to satisfy the invariants (e.g. a subset of
    /// a validated pattern).
    pub(crate) fn from_trusted(points: Vec<Point>, window: Window) -> Self {
        debug_assert!(points.iter().all(|p| window.contains(p)));
        Self { points, window }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Intensity estimate n / |W|.
    pub fn intensity(&self) -> f64 {
        self.points.len() as f64 / self.window.area()
    }
}

pub(crate) fn find_duplicate(points: &[Point]) -> Option<(usize, usize)> {
    let mut keyed: Vec<((u64, u64), usize)> =
        points.iter().enumerate().map(|(i, p)| (p.key(), i)).collect();
    keyed.sort_unstable();
    keyed
        .windows(2)
        .find(|w| w[0].0 == w[1].0)
        .map(|w| (w[0].1.min(w[1].1), w[0].1.max(w[1].1)))
}

/// A point pattern with one real mark per point.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointPattern {
    pattern: PointPattern,
    marks: Vec<f64>,
}

impl MarkedPointPattern {
    pub fn new(pattern: PointPattern, marks: Vec<f64>) -> Result<Self> {
        if marks.len() != pattern.len() {
            return Err(invalid_data(format!(
                "{} marks for {} points",
                marks.len(),
                pattern.len()
            )));
        }
        if let Some(i) = marks.iter().position(|m| !m.is_finite()) {
            return Err(invalid_data(format!("mark {i} is not finite")));
        }
        Ok(Self { pattern, marks })
    }

    pub fn pattern(&self) -> &PointPattern {
        &self.pattern
    }

    pub fn points(&self) -> &[Point] {
        self.pattern.points()
    }

    pub fn window(&self) -> &Window {
        self.pattern.window()
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }
}

/// Nearest-neighbour distance of each point, by brute force.
pub(crate) fn nn_distances(points: &[Point]) -> Vec<f64> {
    let n = points.len();
    let mut best = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = points[i].dist2(&points[j]);
            if d2 < best[i] {
                best[i] = d2;
            }
            if d2 < best[j] {
                best[j] = d2;
            }
        }
    }
    best.iter_mut().for_each(|d| *d = d.sqrt());
    best
}

/// Marks every point with the distance to its nearest other point.
pub fn nn_distance_marks(pattern: &PointPattern) -> Result<MarkedPointPattern> {
    if pattern.len() < 2 {
        return Err(invalid_arg(format!(
            "nearest-neighbour marks need at least 2 points, got {}",
            pattern.len()
        )));
    }
    let marks = nn_distances(pattern.points());
    MarkedPointPattern::new(pattern.clone(), marks)
}
