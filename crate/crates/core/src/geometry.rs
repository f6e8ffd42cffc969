//! Planar polygon primitives in projected metre coordinates.

use serde::{Deserialize, Serialize};

use crate::error::GeoError;

pub type Point = [f64; 2];

/// A polygon with one exterior ring and optional holes. Rings are stored
/// open (the closing vertex is dropped) and in any orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    #[serde(default)]
    pub holes: Vec<Vec<Point>>,
}

fn open_ring(mut ring: Vec<Point>) -> Result<Vec<Point>, GeoError> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(GeoError::NonFinite);
    }
    if ring.len() < 3 {
        return Err(GeoError::DegenerateRing(ring.len()));
    }
    Ok(ring)
}

impl Polygon {
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self, GeoError> {
        Ok(Polygon {
            exterior: open_ring(exterior)?,
            holes: holes.into_iter().map(open_ring).collect::<Result<_, _>>()?,
        })
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon {
            exterior: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            holes: Vec::new(),
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.exterior).abs() - self.holes.iter().map(|h| signed_area(h).abs()).sum::<f64>()
    }
}

/// One or more polygons treated as a single geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPolygon(pub Vec<Polygon>);

impl From<Polygon> for MultiPolygon {
    fn from(p: Polygon) -> Self {
        MultiPolygon(vec![p])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl MultiPolygon {
    pub fn area(&self) -> f64 {
        self.0.iter().map(Polygon::area).sum()
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        self.0.iter().flat_map(|p| p.rings())
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Point> {
        self.rings().flat_map(|r| r.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bbox(&self) -> Option<BBox> {
        let mut it = self.vertices();
        let first = *it.next()?;
        let mut b = BBox { min: first, max: first };
        for p in it {
            b.min = [b.min[0].min(p[0]), b.min[1].min(p[1])];
            b.max = [b.max[0].max(p[0]), b.max[1].max(p[1])];
        }
        Some(b)
    }

    /// Even-odd rule over all rings. Points on an edge may fall either way.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for ring in self.rings() {
            let n = ring.len();
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                if (a[1] > p[1]) != (b[1] > p[1]) {
                    let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                    if p[0] < x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings().flat_map(|ring| {
            let n = ring.len();
            (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
        })
    }

    /// Area centroid; holes count negatively.
    pub fn centroid(&self) -> Option<Point> {
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for poly in &self.0 {
            for (k, ring) in poly.rings().enumerate() {
                let s = signed_area(ring);
                // exterior positive, holes negative, whatever the orientation
                let sign = if (k == 0) == (s >= 0.0) { 1.0 } else { -1.0 };
                let c = ring_centroid(ring);
                a += sign * s.abs();
                cx += sign * s.abs() * c[0];
                cy += sign * s.abs() * c[1];
            }
        }
        if a > 0.0 {
            Some([cx / a, cy / a])
        } else {
            self.vertices().next().copied()
        }
    }

    /// The centroid when it lies inside, otherwise the midpoint of the
    /// widest interior span on the horizontal line through the centroid.
    pub fn representative_point(&self) -> Option<Point> {
        let c = self.centroid()?;
        if self.contains(c) {
            return Some(c);
        }
        let bbox = self.bbox()?;
        let height = bbox.max[1] - bbox.min[1];
        for y in [c[1], 0.5 * (bbox.min[1] + bbox.max[1])]
            .into_iter()
            .chain((1..16).map(|k| bbox.min[1] + height * k as f64 / 16.0))
        {
            if let Some(p) = self.widest_span_midpoint(y) {
                return Some(p);
            }
        }
        Some(c)
    }

    fn widest_span_midpoint(&self, y: f64) -> Option<Point> {
        let mut xs: Vec<f64> = self
            .edges()
            .filter(|(a, b)| (a[1] > y) != (b[1] > y))
            .map(|(a, b)| a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]))
            .collect();
        xs.sort_by(f64::total_cmp);
        xs.chunks_exact(2)
            .filter(|w| w[1] > w[0])
            .max_by(|u, v| (u[1] - u[0]).total_cmp(&(v[1] - v[0])))
            .map(|w| [0.5 * (w[0] + w[1]), y])
            .filter(|&p| self.contains(p))
    }
}

pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn ring_centroid(ring: &[Point]) -> Point {
    let n = ring.len();
    let a = signed_area(ring);
    if a == 0.0 {
        let sx: f64 = ring.iter().map(|p| p[0]).sum();
        let sy: f64 = ring.iter().map(|p| p[1]).sum();
        return [sx / n as f64, sy / n as f64];
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let cross = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let x = a[0] + t * d[0] - p[0];
    let y = a[1] + t * d[1] - p[1];
    x.hypot(y)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

pub fn segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Closest distance between two areal geometries; zero when they touch,
/// overlap or one contains the other.
pub fn polygon_distance(u: &MultiPolygon, v: &MultiPolygon) -> f64 {
    if u.vertices().next().is_some_and(|&p| v.contains(p)) || v.vertices().next().is_some_and(|&p| u.contains(p)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (a, b) in u.edges() {
        for (c, d) in v.edges() {
            best = best.min(segment_distance(a, b, c, d));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

/// Convex hull by monotone chain, counter-clockwise without collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
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
            while hull.len() >= start + 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Minimum-area enclosing rectangle as (longer side, shorter side), with
/// candidate orientations taken from the hull edges.
pub fn min_area_rectangle(points: &[Point]) -> (f64, f64) {
    let hull = convex_hull(points);
    match hull.len() {
        0 | 1 => return (0.0, 0.0),
        2 => {
            let d = [hull[1][0] - hull[0][0], hull[1][1] - hull[0][1]];
            return (d[0].hypot(d[1]), 0.0);
        }
        _ => {}
    }
    let n = hull.len();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        if len == 0.0 {
            continue;
        }
        let u = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let (mut lo_u, mut hi_u, mut lo_v, mut hi_v) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let s = p[0] * u[0] + p[1] * u[1];
            let t = -p[0] * u[1] + p[1] * u[0];
            lo_u = lo_u.min(s);
            hi_u = hi_u.max(s);
            lo_v = lo_v.min(t);
            hi_v = hi_v.max(t);
        }
        let (w, h) = (hi_u - lo_u, hi_v - lo_v);
        if w * h < best.0 {
            best = (w * h, w.max(h), w.min(h));
        }
    }
    (best.1, best.2)
}
