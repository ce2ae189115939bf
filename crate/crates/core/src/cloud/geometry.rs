//! Polygonal domain description and the planar predicates the cloud
//! builders need.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dist2(self, other: Point) -> f64 {
        let d = self - other;
        d.dot(d)
    }

    /// Unit vector in the same direction, `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Point> {
        let n = self.norm();
        (n > f64::EPSILON && n.is_finite()).then(|| self * (1.0 / n))
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Whether a boundary segment prescribes values or a derivative relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Dirichlet,
    Derivative,
}

/// Closed simple polygon with one boundary label per edge. Edge `i` runs
/// from `vertices[i]` to `vertices[i + 1]`; vertices are stored
/// counter-clockwise so that outward normals point to the right of each edge.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainGeometry {
    vertices: Vec<Point>,
    edge_labels: Vec<String>,
    kinds: BTreeMap<String, BoundaryKind>,
}

impl DomainGeometry {
    /// Builds a polygon domain. Clockwise input is reoriented. Every label
    /// starts out as a Dirichlet segment; see [`Self::with_boundary_kinds`].
    pub fn polygon(vertices: Vec<Point>, edge_labels: Vec<String>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::Geometry(format!("polygon needs at least 3 vertices, got {n}")));
        }
        if edge_labels.len() != n {
            return Err(Error::Geometry(format!(
                "polygon has {n} edges but {} edge labels",
                edge_labels.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::Geometry("non-finite polygon vertex".into()));
        }
        let area = signed_area(&vertices);
        let scale = bbox_of(&vertices).diagonal();
        if area.abs() <= 1e-12 * scale * scale {
            return Err(Error::Geometry("polygon has zero area".into()));
        }
        let (vertices, edge_labels) = if area < 0.0 {
            let rv: Vec<Point> = vertices.iter().rev().copied().collect();
            let labels = (0..n)
                .map(|k| edge_labels[(2 * n - 2 - k) % n].clone())
                .collect();
            (rv, labels)
        } else {
            (vertices, edge_labels)
        };
        for i in 0..n {
            if vertices[i].dist(vertices[(i + 1) % n]) <= 1e-12 * scale {
                return Err(Error::Geometry(format!("polygon edge {i} has zero length")));
            }
        }
        check_simple(&vertices)?;
        let kinds = edge_labels
            .iter()
            .map(|l| (l.clone(), BoundaryKind::Dirichlet))
            .collect();
        Ok(Self {
            vertices,
            edge_labels,
            kinds,
        })
    }

    /// Axis-aligned rectangle `[x0, x0 + width] × [y0, y0 + height]`; labels
    /// are given bottom, right, top, left.
    pub fn rectangle(x0: f64, y0: f64, width: f64, height: f64, labels: [&str; 4]) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Geometry(format!(
                "rectangle must have positive extent, got {width} × {height}"
            )));
        }
        Self::polygon(
            vec![
                Point::new(x0, y0),
                Point::new(x0 + width, y0),
                Point::new(x0 + width, y0 + height),
                Point::new(x0, y0 + height),
            ],
            labels.iter().map(|s| s.to_string()).collect(),
        )
    }

    /// Assigns a boundary kind to every label. All labels must be covered and
    /// no unknown labels may appear.
    pub fn with_boundary_kinds(mut self, kinds: &BTreeMap<String, BoundaryKind>) -> Result<Self> {
        for label in self.kinds.keys() {
            if !kinds.contains_key(label) {
                return Err(Error::Geometry(format!("no boundary kind for segment `{label}`")));
            }
        }
        for label in kinds.keys() {
            if !self.kinds.contains_key(label) {
                return Err(Error::Geometry(format!("unknown segment label `{label}`")));
            }
        }
        self.kinds = kinds.clone();
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge(&self, e: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[e], self.vertices[(e + 1) % n])
    }

    pub fn edge_label(&self, e: usize) -> &str {
        &self.edge_labels[e]
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.kinds.keys().map(String::as_str)
    }

    pub fn kind_of_label(&self, label: &str) -> Option<BoundaryKind> {
        self.kinds.get(label).copied()
    }

    pub fn edge_kind(&self, e: usize) -> BoundaryKind {
        self.kinds[&self.edge_labels[e]]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edge(e);
        a.dist(b)
    }

    /// Outward unit normal of edge `e`.
    pub fn edge_normal(&self, e: usize) -> Point {
        let (a, b) = self.edge(e);
        let d = b - a;
        Point::new(d.y, -d.x) * (1.0 / d.norm())
    }

    /// Interior angle at vertex `v`, in degrees.
    pub fn interior_angle(&self, v: usize) -> f64 {
        let n = self.vertices.len();
        let prev = self.vertices[(v + n - 1) % n];
        let cur = self.vertices[v];
        let next = self.vertices[(v + 1) % n];
        let d1 = cur - prev;
        let d2 = next - cur;
        let turn = d1.cross(d2).atan2(d1.dot(d2));
        180.0 - turn.to_degrees()
    }

    /// A vertex is a corner when its interior angle deviates from a straight
    /// angle by more than one degree.
    pub fn is_corner(&self, v: usize) -> bool {
        (self.interior_angle(v) - 180.0).abs() > 1.0
    }

    pub fn bbox(&self) -> BBox {
        bbox_of(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn min_edge_length(&self) -> f64 {
        (0..self.edge_count())
            .map(|e| self.edge_length(e))
            .fold(f64::INFINITY, f64::min)
    }

    /// Length tolerance used for on-boundary tests.
    pub fn tolerance(&self) -> f64 {
        1e-9 * self.bbox().diagonal()
    }

    /// Even-odd point-in-polygon test. Points on the boundary may go either
    /// way; combine with [`Self::distance_to_boundary`] when that matters.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[j];
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
                if p.x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn distance_to_edge(&self, e: usize, p: Point) -> f64 {
        let (a, b) = self.edge(e);
        segment_distance(a, b, p)
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        (0..self.edge_count())
            .map(|e| self.distance_to_edge(e, p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Edges passing within `tol` of `p`, in increasing edge order.
    pub fn incident_edges(&self, p: Point, tol: f64) -> Vec<usize> {
        (0..self.edge_count())
            .filter(|&e| self.distance_to_edge(e, p) <= tol)
            .collect()
    }

    /// Vertex index located at `p`, if any.
    pub fn vertex_at(&self, p: Point, tol: f64) -> Option<usize> {
        self.vertices.iter().position(|v| v.dist(p) <= tol)
    }

    /// Closed-domain membership: strictly inside or on the boundary.
    pub fn contains_closed(&self, p: Point) -> bool {
        self.contains(p) || self.distance_to_boundary(p) <= self.tolerance()
    }

    /// Returns the bounds if this polygon is an axis-aligned rectangle.
    pub fn as_rectangle(&self) -> Option<BBox> {
        if self.vertices.len() != 4 {
            return None;
        }
        let tol = self.tolerance();
        let axis = (0..4).all(|e| {
            let (a, b) = self.edge(e);
            (a.x - b.x).abs() <= tol || (a.y - b.y).abs() <= tol
        });
        axis.then(|| self.bbox())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

pub(crate) fn bbox_of(points: &[Point]) -> BBox {
    let mut min = Point::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    }
    BBox { min, max }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

pub(crate) fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    let t = if len2 > 0.0 {
        ((p - a).dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(a + d * t)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

fn check_simple(v: &[Point]) -> Result<()> {
    let n = v.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return Err(Error::Geometry(format!(
                    "polygon is not simple: edges {i} and {j} intersect"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> DomainGeometry {
        DomainGeometry::rectangle(0.0, 0.0, 1.0, 1.0, ["B", "R", "T", "L"]).unwrap()
    }

    #[test]
    fn rectangle_normals_point_outward() {
        let g = square();
        assert_eq!(g.edge_normal(0), Point::new(0.0, -1.0));
        assert_eq!(g.edge_normal(1), Point::new(1.0, 0.0));
        assert_eq!(g.edge_normal(2), Point::new(0.0, 1.0));
        assert_eq!(g.edge_normal(3), Point::new(-1.0, 0.0));
        for v in 0..4 {
            assert!((g.interior_angle(v) - 90.0).abs() < 1e-12);
            assert!(g.is_corner(v));
        }
    }

    #[test]
    fn clockwise_input_is_reoriented_with_labels() {
        let cw = vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ];
        let labels = vec!["L".into(), "T".into(), "R".into(), "B".into()];
        let g = DomainGeometry::polygon(cw, labels).unwrap();
        assert!(g.area() > 0.0);
        for e in 0..4 {
            let (a, b) = g.edge(e);
            let mid = (a + b) * 0.5;
            let expected = match g.edge_label(e) {
                "L" => mid.x == 0.0,
                "R" => mid.x == 1.0,
                "T" => mid.y == 1.0,
                "B" => mid.y == 0.0,
                _ => false,
            };
            assert!(expected, "edge {e} label {} at {mid}", g.edge_label(e));
        }
    }

    #[test]
    fn self_intersecting_polygon_is_rejected() {
        let bow = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        let labels = vec!["a".into(); 4];
        assert!(matches!(
            DomainGeometry::polygon(bow, labels),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn degenerate_rectangle_is_rejected() {
        assert!(DomainGeometry::rectangle(0.0, 0.0, 0.0, 1.0, ["a"; 4]).is_err());
    }

    #[test]
    fn containment_and_distance() {
        let g = square();
        assert!(g.contains(Point::new(0.5, 0.5)));
        assert!(!g.contains(Point::new(1.5, 0.5)));
        assert!((g.distance_to_boundary(Point::new(0.5, 0.2)) - 0.2).abs() < 1e-15);
        assert_eq!(g.incident_edges(Point::new(0.0, 0.0), 1e-9), vec![0, 3]);
    }

    #[test]
    fn reflex_vertex_angle() {
        let l_shape = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        let g = DomainGeometry::polygon(l_shape, vec!["w".into(); 6]).unwrap();
        assert!((g.interior_angle(3) - 270.0).abs() < 1e-9);
    }
}
