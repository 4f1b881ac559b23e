//! Polygon-with-holes domains and the JSON geometry file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Fixity;

pub type Point = [f64; 2];

/// Coordinates closer than this (relative to the domain size) are treated as equal.
pub(crate) const GEOM_TOL: f64 = 1e-9;

/// Outer boundary plus interior holes. Rings are stored counter-clockwise
/// (outline) and clockwise (holes) after [`Geometry::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    outline: Vec<Point>,
    holes: Vec<Vec<Point>>,
}

impl Geometry {
    pub fn new(outline: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let mut outline = dedup_ring(outline);
        check_ring(&outline, "outline")?;
        if signed_area(&outline) < 0.0 {
            outline.reverse();
        }
        let mut rings: Vec<Vec<Point>> = Vec::with_capacity(holes.len());
        for (i, hole) in holes.into_iter().enumerate() {
            let mut hole = dedup_ring(hole);
            check_ring(&hole, &format!("hole {i}"))?;
            if signed_area(&hole) > 0.0 {
                hole.reverse();
            }
            for p in &hole {
                if !point_strictly_inside(p, &outline) {
                    return Err(Error::Geometry(format!(
                        "hole {i} vertex ({}, {}) is not strictly inside the outline",
                        p[0], p[1]
                    )));
                }
            }
            if rings_touch(&hole, &outline) {
                return Err(Error::Geometry(format!("hole {i} touches the outline")));
            }
            for (j, other) in rings.iter().enumerate() {
                if rings_touch(&hole, other)
                    || point_inside(&hole[0], other)
                    || point_inside(&other[0], &hole)
                {
                    return Err(Error::Geometry(format!("holes {j} and {i} overlap")));
                }
            }
            rings.push(hole);
        }
        Ok(Self {
            outline,
            holes: rings,
        })
    }

    pub fn rectangle(width: f64, depth: f64) -> Result<Self> {
        Self::new(
            vec![[0.0, 0.0], [width, 0.0], [width, depth], [0.0, depth]],
            vec![],
        )
    }

    pub fn outline(&self) -> &[Point] {
        &self.outline
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.outline) + self.holes.iter().map(|h| signed_area(h)).sum::<f64>()
    }

    /// `(x_min, y_min, x_max, y_max)` of the outline.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        ring_bounds(&self.outline)
    }

    pub fn contains(&self, p: &Point) -> bool {
        point_inside(p, &self.outline) && !self.holes.iter().any(|h| point_inside(p, h))
    }

    /// Outline edges lying on `y = y_max`, as x-intervals sorted by start.
    pub fn top_intervals(&self) -> Vec<(f64, f64)> {
        let (_, _, _, y_max) = self.bounds();
        self.horizontal_intervals(y_max)
    }

    /// Outline edges lying on `y = y_min`, as x-intervals sorted by start.
    pub fn bottom_intervals(&self) -> Vec<(f64, f64)> {
        let (_, y_min, _, _) = self.bounds();
        self.horizontal_intervals(y_min)
    }

    fn horizontal_intervals(&self, y: f64) -> Vec<(f64, f64)> {
        let tol = self.tol();
        let n = self.outline.len();
        let mut out: Vec<(f64, f64)> = (0..n)
            .filter_map(|i| {
                let a = self.outline[i];
                let b = self.outline[(i + 1) % n];
                ((a[1] - y).abs() <= tol && (b[1] - y).abs() <= tol)
                    .then(|| (a[0].min(b[0]), a[0].max(b[0])))
            })
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        // merge collinear neighbours
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for iv in out {
            match merged.last_mut() {
                Some(last) if (iv.0 - last.1).abs() <= tol => last.1 = last.1.max(iv.1),
                _ => merged.push(iv),
            }
        }
        merged
    }

    pub(crate) fn tol(&self) -> f64 {
        let (x0, y0, x1, y1) = self.bounds();
        GEOM_TOL * (x1 - x0).max(y1 - y0)
    }
}

/// Sensor-related fields of a custom domain file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub outline: Vec<Point>,
    #[serde(default)]
    pub holes: Vec<Vec<Point>>,
    pub sensors: usize,
    #[serde(default = "default_custom_fixity")]
    pub fixity: Fixity,
    /// Sensor station x-coordinates; evenly spaced over the bottom edge if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_x: Option<Vec<f64>>,
}

fn default_custom_fixity() -> Fixity {
    Fixity::SensorsOnly
}

impl GeometryFile {
    pub fn read(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Geometry(format!("bad geometry file: {e}")))
    }

    /// One of the shipped custom domains, by name (`C1`, `C2`, `C3`).
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name.to_ascii_uppercase().as_str() {
            "C1" => include_str!("../../geometries/c1_funnel.json"),
            "C2" => include_str!("../../geometries/c2_void.json"),
            "C3" => include_str!("../../geometries/c3_comb.json"),
            _ => return None,
        };
        Some(Self::parse(text).expect("shipped geometry files are valid"))
    }
}

/// Lattice window geometry: a `10 x 10` square with a `g x g` grid of square
/// holes, struts and holes all `10 / (2g + 1)` wide.
pub fn lattice_geometry(g: usize, size: f64) -> Result<Geometry> {
    let w = size / (2 * g + 1) as f64;
    let mut holes = Vec::with_capacity(g * g);
    for j in 0..g {
        for i in 0..g {
            let x0 = (2 * i + 1) as f64 * w;
            let y0 = (2 * j + 1) as f64 * w;
            holes.push(vec![[x0, y0], [x0, y0 + w], [x0 + w, y0 + w], [x0 + w, y0]]);
        }
    }
    Geometry::new(
        vec![[0.0, 0.0], [size, 0.0], [size, size], [0.0, size]],
        holes,
    )
}

pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    0.5 * (0..n)
        .map(|i| {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

fn ring_bounds(ring: &[Point]) -> (f64, f64, f64, f64) {
    ring.iter().fold(
        (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), p| (a.min(p[0]), b.min(p[1]), c.max(p[0]), d.max(p[1])),
    )
}

fn dedup_ring(mut ring: Vec<Point>) -> Vec<Point> {
    ring.dedup();
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

fn check_ring(ring: &[Point], what: &str) -> Result<()> {
    if ring.len() < 3 {
        return Err(Error::Geometry(format!("{what} needs at least 3 vertices")));
    }
    if ring.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Geometry(format!(
            "{what} has non-finite coordinates"
        )));
    }
    if signed_area(ring).abs() <= 0.0 {
        return Err(Error::Geometry(format!("{what} has zero area")));
    }
    let n = ring.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if adjacent {
                // neighbours share one vertex; they may not fold back onto each other
                let shared = if j == i + 1 { b } else { a };
                let (p, q) = if j == i + 1 { (a, d) } else { (b, c) };
                if collinear_overlap(shared, p, q) {
                    return Err(Error::Geometry(format!(
                        "{what} folds back on itself at ({}, {})",
                        shared[0], shared[1]
                    )));
                }
            } else if segments_intersect(a, b, c, d) {
                return Err(Error::Geometry(format!("{what} is self-intersecting")));
            }
        }
    }
    Ok(())
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

// edges shared-vertex `s` -> `p` and `s` -> `q` point the same way
fn collinear_overlap(s: Point, p: Point, q: Point) -> bool {
    cross(s, p, q) == 0.0 && (p[0] - s[0]) * (q[0] - s[0]) + (p[1] - s[1]) * (q[1] - s[1]) > 0.0
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test (touching counts).
pub(crate) fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

fn rings_touch(a: &[Point], b: &[Point]) -> bool {
    let (na, nb) = (a.len(), b.len());
    (0..na)
        .any(|i| (0..nb).any(|j| segments_intersect(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb])))
}

/// Even-odd point-in-polygon test; points on the boundary may go either way.
pub(crate) fn point_inside(p: &Point, ring: &[Point]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn point_strictly_inside(p: &Point, ring: &[Point]) -> bool {
    let n = ring.len();
    let on_boundary = (0..n).any(|i| {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        cross(a, b, *p) == 0.0 && on_segment(a, b, *p)
    });
    !on_boundary && point_inside(p, ring)
}
