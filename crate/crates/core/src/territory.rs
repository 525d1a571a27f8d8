//! Reactive territories: convex hulls of nerve trees, their sizes and
//! coverage, and empirical distribution functions of per-tree quantities.

use crate::curve::{check_grid, CurveKind, SummaryCurve};
use crate::error::{invalid_arg, invalid_data, Result};
use crate::geometry::{Point, Window};
use crate::sample::{NerveSample, NerveTree};

/// Simple polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(invalid_arg("a polygon needs at least 3 vertices"));
        }
        let mut poly = Polygon { vertices };
        if signed_area(&poly.vertices) < 0.0 {
            poly.vertices.reverse();
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon {
            vertices: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    /// Crossing-number test; boundary points may go either way.
    pub fn contains(&self, p: &Point) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[j]);
            if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    fn bbox(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }
}

/// Shoelace formula; positive for counterclockwise order.
pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

#[inline]
fn cross(o: &Point, a: &Point, b: &Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hull {
    Polygon(Polygon),
    /// Fewer than three non-collinear points; carries the distinct input points.
    Degenerate(Vec<Point>),
}

impl Hull {
    pub fn area(&self) -> f64 {
        match self {
            Hull::Polygon(p) => p.area(),
            Hull::Degenerate(_) => 0.0,
        }
    }
}

/// Andrew's monotone chain. Collinear boundary points are dropped.
pub fn convex_hull(points: &[Point]) -> Result<Hull> {
    if points.is_empty() {
        return Err(invalid_arg("convex hull of an empty point set"));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Ok(Hull::Degenerate(pts));
    }
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Ok(Hull::Degenerate(pts));
    }
    Ok(Hull::Polygon(Polygon { vertices: lower }))
}

/// Reactive territory size of a tree: hull area of base and ends, or the
/// distance from the base to its farthest end when that area is zero.
pub fn territory_size(tree: &NerveTree) -> Result<f64> {
    if tree.ends.is_empty() {
        return Err(invalid_data(format!(
            "tree {} has no end points; territory undefined",
            tree.tree_id
        )));
    }
    let mut pts = Vec::with_capacity(tree.ends.len() + 1);
    pts.push(tree.base);
    pts.extend_from_slice(&tree.ends);
    let area = convex_hull(&pts)?.area();
    if area > 0.0 {
        Ok(area)
    } else {
        Ok(tree
            .ends
            .iter()
            .map(|e| e.dist(&tree.base))
            .fold(0.0, f64::max))
    }
}

/// Hull polygon of a tree, if it has positive area.
pub fn territory_polygon(tree: &NerveTree) -> Option<Polygon> {
    let mut pts = vec![tree.base];
    pts.extend_from_slice(&tree.ends);
    match convex_hull(&pts) {
        Ok(Hull::Polygon(p)) => Some(p),
        _ => None,
    }
}

pub const DEFAULT_UNION_RESOLUTION: f64 = 1.0;

/// Area of the union of polygons clipped to the window. Rows of height
/// about `resolution` are sampled at their midlines; rows holding a vertex
/// height are split there first. Along each sampled line the covered length
/// is exact, so rectangles come out exact and hull unions nearly so.
pub fn union_area(polygons: &[Polygon], window: &Window, resolution: f64) -> Result<f64> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(invalid_arg(format!("resolution must be > 0, got {resolution}")));
    }
    if polygons.is_empty() {
        return Ok(0.0);
    }
    let ny = (window.height() / resolution).ceil().max(1.0) as usize;
    let ch = window.height() / ny as f64;
    let boxes: Vec<(f64, f64, f64, f64)> = polygons.iter().map(Polygon::bbox).collect();
    let mut breaks: Vec<f64> = polygons
        .iter()
        .flat_map(|p| p.vertices().iter().map(|v| v.y))
        .filter(|&y| y > window.ymin && y < window.ymax)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut scratch = Scanline::default();
    let mut total = 0.0;
    let mut cuts: Vec<f64> = Vec::new();
    for iy in 0..ny {
        let y0 = window.ymin + iy as f64 * ch;
        let y1 = if iy + 1 == ny { window.ymax } else { y0 + ch };
        cuts.clear();
        cuts.push(y0);
        let from = breaks.partition_point(|&b| b <= y0);
        cuts.extend(breaks[from..].iter().take_while(|&&b| b < y1));
        cuts.push(y1);
        for w in cuts.windows(2) {
            let y = 0.5 * (w[0] + w[1]);
            total += scratch.covered_length(polygons, &boxes, window, y) * (w[1] - w[0]);
        }
    }
    Ok(total)
}

#[derive(Default)]
struct Scanline {
    intervals: Vec<(f64, f64)>,
    xs: Vec<f64>,
}

impl Scanline {
    fn covered_length(&mut self, polygons: &[Polygon], boxes: &[(f64, f64, f64, f64)], window: &Window, y: f64) -> f64 {
        self.intervals.clear();
        for (poly, &(_, y0, _, y1)) in polygons.iter().zip(boxes) {
            if y < y0 || y > y1 {
                continue;
            }
            self.xs.clear();
            let v = poly.vertices();
            for k in 0..v.len() {
                let (a, b) = (v[k], v[(k + 1) % v.len()]);
                // half-open rule so shared vertices count once
                if (a.y <= y) != (b.y <= y) {
                    self.xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
            self.xs.sort_by(f64::total_cmp);
            for pair in self.xs.chunks_exact(2) {
                let lo = pair[0].max(window.xmin);
                let hi = pair[1].min(window.xmax);
                if hi > lo {
                    self.intervals.push((lo, hi));
                }
            }
        }
        self.intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut len = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for &(lo, hi) in &self.intervals {
            cur = match cur {
                Some((a, b)) if lo <= b => Some((a, b.max(hi))),
                Some((a, b)) => {
                    len += b - a;
                    Some((lo, hi))
                }
                None => Some((lo, hi)),
            };
        }
        if let Some((a, b)) = cur {
            len += b - a;
        }
        len
    }
}

/// Sum of territory sizes over the trees of a sample that have end points.
pub fn total_territory_size(sample: &NerveSample) -> f64 {
    sample
        .trees()
        .iter()
        .filter(|t| !t.ends.is_empty())
        .map(|t| territory_size(t).unwrap_or(0.0))
        .sum()
}

/// Area of the window covered by the union of the sample's territories.
pub fn covered_area(sample: &NerveSample, resolution: f64) -> Result<f64> {
    let polys: Vec<Polygon> = sample.trees().iter().filter_map(territory_polygon).collect();
    union_area(&polys, sample.window(), resolution)
}

/// Right-continuous empirical CDF evaluated on `grid`.
pub fn ecdf_curve(values: &[f64], grid: &[f64]) -> Result<SummaryCurve> {
    if values.is_empty() {
        return Err(invalid_arg("ECDF of an empty sample"));
    }
    check_grid(grid)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let out = grid
        .iter()
        .map(|&r| sorted.partition_point(|&v| v <= r) as f64 / n)
        .collect();
    SummaryCurve::new(grid.to_vec(), out, CurveKind::Ecdf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn hull_square_with_center() {
        let h = convex_hull(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)])).unwrap();
        let Hull::Polygon(p) = h else { panic!("degenerate") };
        assert_eq!(p.vertices().len(), 4);
        assert_eq!(p.area(), 1.0);
        assert!(signed_area(p.vertices()) > 0.0);
    }

    #[test]
    fn hull_triangle() {
        let h = convex_hull(&pts(&[(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)])).unwrap();
        assert_eq!(h.area(), 6.0);
    }

    #[test]
    fn hull_degenerate_inputs() {
        assert!(convex_hull(&[]).is_err());
        assert!(matches!(convex_hull(&pts(&[(1.0, 1.0)])).unwrap(), Hull::Degenerate(v) if v.len() == 1));
        assert!(matches!(convex_hull(&pts(&[(0.0, 0.0), (1.0, 1.0)])).unwrap(), Hull::Degenerate(_)));
        assert!(matches!(
            convex_hull(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])).unwrap(),
            Hull::Degenerate(_)
        ));
    }

    fn brute_force_hull_vertices(p: &[Point]) -> Vec<usize> {
        let mut out = Vec::new();
        for i in 0..p.len() {
            let on_hull = (0..p.len()).filter(|&j| j != i).any(|j| {
                (0..p.len())
                    .filter(|&k| k != i && k != j)
                    .all(|k| cross(&p[i], &p[j], &p[k]) > 0.0)
            });
            if on_hull {
                out.push(i);
            }
        }
        out
    }

    #[test]
    fn hull_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let p: Vec<Point> = (0..10)
                .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let Hull::Polygon(h) = convex_hull(&p).unwrap() else { panic!() };
            let mut got: Vec<usize> = h
                .vertices()
                .iter()
                .map(|v| p.iter().position(|q| q == v).unwrap())
                .collect();
            got.sort_unstable();
            assert_eq!(got, brute_force_hull_vertices(&p));
        }
    }

    fn tree(ends: &[(f64, f64)]) -> NerveTree {
        NerveTree::new(1, Point::new(0.0, 0.0), pts(ends))
    }

    #[test]
    fn territory_examples() {
        assert_eq!(territory_size(&tree(&[(4.0, 0.0), (0.0, 3.0)])).unwrap(), 6.0);
        assert_eq!(territory_size(&tree(&[(3.0, 4.0)])).unwrap(), 5.0);
        assert_eq!(territory_size(&tree(&[(1.0, 0.0), (2.0, 0.0)])).unwrap(), 2.0);
        assert!(territory_size(&tree(&[])).is_err());
    }

    #[test]
    fn territory_scaling_per_branch() {
        let area = tree(&[(4.0, 0.0), (0.0, 3.0), (2.0, 2.5)]);
        let scaled = tree(&[(12.0, 0.0), (0.0, 9.0), (6.0, 7.5)]);
        let (a, b) = (territory_size(&area).unwrap(), territory_size(&scaled).unwrap());
        assert!((b - 9.0 * a).abs() < 1e-9);
        let len = tree(&[(1.0, 1.0)]);
        let len3 = tree(&[(3.0, 3.0)]);
        assert!((territory_size(&len3).unwrap() - 3.0 * territory_size(&len).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn union_area_examples() {
        let w = Window::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let a = Polygon::rect(0.0, 0.0, 1.0, 1.0);
        let b = Polygon::rect(5.0, 5.0, 6.0, 6.0);
        assert!((union_area(&[a.clone(), b], &w, 0.01).unwrap() - 2.0).abs() < 1e-9);
        assert!((union_area(&[a.clone(), a.clone()], &w, 0.01).unwrap() - 1.0).abs() < 1e-9);
        let c = Polygon::rect(0.0, 0.0, 2.0, 1.0);
        let d = Polygon::rect(1.0, 0.0, 3.0, 1.0);
        let u = union_area(&[c, d], &w, 0.05).unwrap();
        // inclusion-exclusion: 2 + 2 - 1
        assert!((u - 3.0).abs() <= 0.03);
        assert_eq!(union_area(&[], &w, 1.0).unwrap(), 0.0);
        assert!(union_area(&[a], &w, 0.0).is_err());
    }

    #[test]
    fn union_of_off_grid_rectangles_is_exact() {
        let w = Window::default();
        let r = |a: f64, b: f64, c: f64, d: f64| Polygon::rect(3.3 * a + 0.37, 3.3 * b + 0.41, 3.3 * c + 0.37, 3.3 * d + 0.41);
        let u = union_area(&[r(1.0, 1.0, 5.0, 5.0), r(3.0, 1.0, 7.0, 5.0), r(3.0, 3.0, 7.0, 7.0)], &w, 1.0).unwrap();
        assert!((u - 32.0 * 3.3 * 3.3).abs() < 1e-9, "{u}");
        // a triangle: sampled at slab midlines, linear edges integrate exactly
        let t = Polygon::new(vec![Point::new(0.5, 0.25), Point::new(7.5, 0.25), Point::new(0.5, 9.75)]).unwrap();
        assert!((union_area(&[t], &w, 1.0).unwrap() - 0.5 * 7.0 * 9.5).abs() < 1e-9);
    }

    #[test]
    fn union_clipped_to_window() {
        let w = Window::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let a = Polygon::rect(-5.0, -5.0, 2.0, 2.0);
        assert!((union_area(&[a], &w, 0.01).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn ecdf_examples() {
        let e = ecdf_curve(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.values(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0]);
        let c = ecdf_curve(&[2.0; 5], &[1.0, 1.9, 2.0, 3.0]).unwrap();
        assert_eq!(c.values(), &[0.0, 0.0, 1.0, 1.0]);
        assert!(ecdf_curve(&[], &[0.0]).is_err());
    }

    #[test]
    fn ecdf_matches_counting_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let v: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..10.0)).collect();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let e = ecdf_curve(&v, &grid).unwrap();
        for (r, f) in grid.iter().zip(e.values()) {
            let count = v.iter().filter(|&&x| x <= *r).count();
            assert_eq!(*f, count as f64 / 200.0);
        }
    }

    proptest! {
        #[test]
        fn hull_invariances(
            coords in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..40),
            angle in 0.0f64..6.283,
            shift in (-100.0f64..100.0, -100.0f64..100.0),
        ) {
            let p = pts(&coords);
            let area = convex_hull(&p).unwrap().area();
            let mut rev = p.clone();
            rev.reverse();
            prop_assert!((convex_hull(&rev).unwrap().area() - area).abs() <= 1e-9 * area.max(1.0));
            let (s, c) = angle.sin_cos();
            let moved: Vec<Point> = p
                .iter()
                .map(|q| Point::new(c * q.x - s * q.y + shift.0, s * q.x + c * q.y + shift.1))
                .collect();
            prop_assert!((convex_hull(&moved).unwrap().area() - area).abs() <= 1e-7 * area.max(1.0));
            if let Hull::Polygon(h) = convex_hull(&p).unwrap() {
                let again = convex_hull(h.vertices()).unwrap();
                prop_assert_eq!(again, Hull::Polygon(h));
            }
        }

        #[test]
        fn union_not_more_than_sum(
            rects in prop::collection::vec((0.0f64..8.0, 0.0f64..8.0, 0.1f64..2.0, 0.1f64..2.0), 1..5),
        ) {
            let w = Window::new(0.0, 0.0, 10.0, 10.0).unwrap();
            let polys: Vec<Polygon> = rects.iter().map(|&(x, y, a, b)| Polygon::rect(x, y, x + a, y + b)).collect();
            let total: f64 = polys.iter().map(Polygon::area).sum();
            let u = union_area(&polys, &w, 0.05).unwrap();
            // midpoint rule error is at most one cell row/column per edge
            let slack: f64 = rects.iter().map(|&(_, _, a, b)| 2.0 * 0.05 * (a + b) + 4.0 * 0.0025).sum();
            prop_assert!(u <= total + slack);
        }
    }
}
