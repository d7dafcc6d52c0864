//! Planar convex hulls and halfplane clipping.

use serde::{Deserialize, Serialize};

/// Collinearity tolerance on cross products.
pub const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Monotone-chain hull, counterclockwise from the lowest-leftmost vertex,
/// with collinear points removed.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (a.x - b.x).abs() <= COLLINEAR_TOL && (a.y - b.y).abs() <= COLLINEAR_TOL);
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= COLLINEAR_TOL
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() == 2 && hull[0] == hull[1] {
        hull.pop();
    }
    hull
}

/// Keeps the part of a convex polygon where `a x + b y >= c`.
fn clip(poly: &[Point], a: f64, b: f64, c: f64) -> Vec<Point> {
    let inside = |p: Point| a * p.x + b * p.y >= c - 1e-12;
    let n = poly.len();
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return if inside(poly[0]) { poly.to_vec() } else { vec![] };
    }
    let mut out = vec![];
    for idx in 0..n {
        let cur = poly[idx];
        let prev = poly[(idx + n - 1) % n];
        let (ci, pi) = (inside(cur), inside(prev));
        if ci != pi {
            let fc = a * cur.x + b * cur.y - c;
            let fp = a * prev.x + b * prev.y - c;
            let t = fp / (fp - fc);
            let mut q = Point::new(prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y));
            // snap to the clipping line
            if b == 0.0 {
                q.x = c / a;
            } else if a == 0.0 {
                q.y = c / b;
            }
            out.push(q);
        }
        if ci {
            out.push(cur);
        }
    }
    out
}

/// `conv(points) ∩ {x >= levels[0], y >= levels[1]}`, counterclockwise.
pub fn convex_hull_clip(points: &[Point], levels: [f64; 2]) -> Vec<Point> {
    let hull = convex_hull(points);
    let clipped = clip(&hull, 1.0, 0.0, levels[0]);
    let clipped = clip(&clipped, 0.0, 1.0, levels[1]);
    convex_hull(&clipped)
}

/// Shoelace area (0 for fewer than three vertices).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let s: f64 = (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p.x * q.y - q.x * p.y
        })
        .sum();
    0.5 * s.abs()
}

/// Strict left turns at every vertex.
pub fn is_convex_ccw(poly: &[Point]) -> bool {
    let n = poly.len();
    n < 3
        || (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) > 0.0)
}

/// Point-in-convex-polygon test with tolerance.
pub fn contains(poly: &[Point], p: Point, tol: f64) -> bool {
    match poly.len() {
        0 => false,
        1 => (poly[0].x - p.x).abs() <= tol && (poly[0].y - p.y).abs() <= tol,
        2 => {
            let (a, b) = (poly[0], poly[1]);
            let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
            let dist = cross(a, b, p).abs() / len;
            let t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
            dist <= tol && (-tol..=1.0 + tol).contains(&t)
        }
        n => (0..n).all(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
            cross(a, b, p) / len >= -tol
        }),
    }
}
