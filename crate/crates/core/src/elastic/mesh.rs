//! Quadratic triangle meshes: a structured mesher for axis-aligned domains and a
//! constrained-Delaunay mesher for general polygons.

use std::collections::{HashMap, HashSet};

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use crate::error::{Error, Result};

use super::geometry::{Geometry, Point};
use super::solver::{CsrMatrix, SkylineCholesky};

/// Boundary role of a mesh node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeTag {
    Top,
    Sensor(usize),
    /// On the bottom edge but outside every sensor segment.
    FixedBottom,
    Free,
}

/// Conforming mesh of 6-node triangles.
///
/// Triangle node order: vertices 0, 1, 2 counter-clockwise, then the midside
/// nodes of edges 0-1, 1-2 and 2-0. Nodes `0..corner_count()` are vertices.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    corners: usize,
    triangles: Vec<[usize; 6]>,
    top_edges: Vec<[usize; 3]>,
    bottom_edges: Vec<[usize; 3]>,
    bottom: Vec<usize>,
    sensors: Vec<Vec<usize>>,
    /// Per sensor, `(node, weight)` pairs turning nodal y-reactions of a fully
    /// clamped bottom into the traction integrated over the sensor segment.
    traction_weights: Vec<Vec<(usize, f64)>>,
    tol: f64,
}

impl Mesh {
    /// Promotes a linear triangulation to quadratic triangles and tags its
    /// top (`y = y_max`) and bottom (`y = y_min`) boundary edges.
    pub fn from_linear(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Mesh("no triangles".into()));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for p in &vertices {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        let tol = 1e-9 * (x1 - x0).max(y1 - y0);
        let corners = vertices.len();
        let mut nodes = vertices;
        let mut mids: HashMap<(usize, usize), (usize, u32)> = HashMap::new();
        let mut out = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= corners) {
                return Err(Error::Mesh(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let [a, b, c] = *tri;
            let area = tri_area(nodes[a], nodes[b], nodes[c]);
            if !(area > tol * tol) {
                return Err(Error::Mesh(format!(
                    "triangle {t} is inverted or degenerate (area {area:e})"
                )));
            }
            let mut mid = |p: usize, q: usize, nodes: &mut Vec<Point>| {
                let key = (p.min(q), p.max(q));
                let entry = mids.entry(key).or_insert_with(|| {
                    let (u, v) = (nodes[p], nodes[q]);
                    nodes.push([0.5 * (u[0] + v[0]), 0.5 * (u[1] + v[1])]);
                    (nodes.len() - 1, 0)
                });
                entry.1 += 1;
                entry.0
            };
            let m01 = mid(a, b, &mut nodes);
            let m12 = mid(b, c, &mut nodes);
            let m20 = mid(c, a, &mut nodes);
            out.push([a, b, c, m01, m12, m20]);
        }
        let mut top_edges = Vec::new();
        let mut bottom_edges = Vec::new();
        let mut bottom = HashSet::new();
        for (&(p, q), &(m, count)) in &mids {
            if count > 2 {
                return Err(Error::Mesh(format!(
                    "edge ({p}, {q}) is shared by {count} triangles"
                )));
            }
            if count != 1 {
                continue;
            }
            let (u, v) = (nodes[p], nodes[q]);
            if (u[1] - y1).abs() <= tol && (v[1] - y1).abs() <= tol {
                top_edges.push(if u[0] < v[0] { [p, m, q] } else { [q, m, p] });
            }
            if (u[1] - y0).abs() <= tol && (v[1] - y0).abs() <= tol {
                bottom.extend([p, m, q]);
                bottom_edges.push(if u[0] < v[0] { [p, m, q] } else { [q, m, p] });
            }
        }
        top_edges.sort_by(|a, b| nodes[a[0]][0].total_cmp(&nodes[b[0]][0]));
        bottom_edges.sort_by(|a, b| nodes[a[0]][0].total_cmp(&nodes[b[0]][0]));
        let mut bottom: Vec<usize> = bottom.into_iter().collect();
        bottom.sort_by(|&a, &b| nodes[a][0].total_cmp(&nodes[b][0]));
        Ok(Self {
            nodes,
            corners,
            triangles: out,
            top_edges,
            bottom_edges,
            bottom,
            sensors: Vec::new(),
            traction_weights: Vec::new(),
            tol,
        })
    }

    /// Tags the bottom nodes within `width / 2` of each station as one sensor.
    pub fn with_sensors(mut self, stations: &[f64], width: f64) -> Result<Self> {
        let mut sensors = Vec::with_capacity(stations.len());
        let mut taken = HashSet::new();
        for (i, &c) in stations.iter().enumerate() {
            let group: Vec<usize> = self
                .bottom
                .iter()
                .copied()
                .filter(|&n| (self.nodes[n][0] - c).abs() <= 0.5 * width + self.tol)
                .collect();
            if group.len() < 2 {
                return Err(Error::Mesh(format!(
                    "sensor {i} at x = {c} covers {} bottom nodes after meshing",
                    group.len()
                )));
            }
            if group.iter().any(|n| !taken.insert(*n)) {
                return Err(Error::Mesh(format!("sensor {i} overlaps another sensor")));
            }
            sensors.push(group);
        }
        self.traction_weights = stations
            .iter()
            .map(|&c| self.segment_traction_weights(c - 0.5 * width, c + 0.5 * width))
            .collect::<Result<_>>()?;
        self.sensors = sensors;
        Ok(self)
    }

    /// Weights `g = M^-1 c` on the bottom chain containing `[a, b]`, where `M`
    /// is the chain's boundary mass matrix and `c_j` the integral of shape
    /// function `j` over `[a, b]`. For consistent nodal reactions `r = M t`,
    /// `g . r` is the exact integral of the recovered traction `t`.
    fn segment_traction_weights(&self, a: f64, b: f64) -> Result<Vec<(usize, f64)>> {
        let x = |n: usize| self.nodes[n][0];
        let inside = |e: &[usize; 3]| {
            let mid = x(e[1]);
            mid > a - self.tol && mid < b + self.tol
        };
        let Some(first) = self.bottom_edges.iter().position(inside) else {
            return Err(Error::Mesh(format!("no bottom edge inside [{a}, {b}]")));
        };
        // the contiguous chain of bottom edges through the segment
        let mut lo = first;
        while lo > 0
            && (x(self.bottom_edges[lo - 1][2]) - x(self.bottom_edges[lo][0])).abs() <= self.tol
        {
            lo -= 1;
        }
        let mut hi = first;
        while hi + 1 < self.bottom_edges.len()
            && (x(self.bottom_edges[hi][2]) - x(self.bottom_edges[hi + 1][0])).abs() <= self.tol
        {
            hi += 1;
        }
        let chain = &self.bottom_edges[lo..=hi];
        let size = 2 * chain.len() + 1;
        let mut mass = Vec::with_capacity(9 * chain.len());
        let mut c = vec![0.0; size];
        for (e, edge) in chain.iter().enumerate() {
            let h = x(edge[2]) - x(edge[0]);
            let local = [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]];
            for i in 0..3 {
                for j in 0..3 {
                    mass.push((2 * e + i, 2 * e + j, h * local[i][j] / 30.0));
                }
            }
            if inside(edge) {
                for (i, w) in [1.0, 4.0, 1.0].iter().enumerate() {
                    c[2 * e + i] += h * w / 6.0;
                }
            }
        }
        let factor = SkylineCholesky::factor(&CsrMatrix::from_triplets(size, mass))?;
        let g = factor.solve(&c);
        let nodes = chain
            .iter()
            .flat_map(|e| [e[0], e[1]])
            .chain(std::iter::once(chain[chain.len() - 1][2]));
        Ok(nodes.zip(g).collect())
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn corner_count(&self) -> usize {
        self.corners
    }

    pub fn triangles(&self) -> &[[usize; 6]] {
        &self.triangles
    }

    /// Top boundary edges as `[left, mid, right]`, sorted left to right.
    pub fn top_edges(&self) -> &[[usize; 3]] {
        &self.top_edges
    }

    /// All nodes on the bottom boundary, sorted by x.
    pub fn bottom_nodes(&self) -> &[usize] {
        &self.bottom
    }

    pub fn sensors(&self) -> &[Vec<usize>] {
        &self.sensors
    }

    /// Bottom boundary edges as `[left, mid, right]`, sorted left to right.
    pub fn bottom_edges(&self) -> &[[usize; 3]] {
        &self.bottom_edges
    }

    /// See [`Mesh::with_sensors`]; one weight list per sensor.
    pub fn traction_weights(&self) -> &[Vec<(usize, f64)>] {
        &self.traction_weights
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    pub fn node_tag(&self, node: usize) -> NodeTag {
        if let Some(i) = self.sensors.iter().position(|s| s.contains(&node)) {
            return NodeTag::Sensor(i);
        }
        if self.bottom.contains(&node) {
            return NodeTag::FixedBottom;
        }
        if self.top_edges.iter().any(|e| e.contains(&node)) {
            return NodeTag::Top;
        }
        NodeTag::Free
    }

    /// Signed area of each triangle's vertex triangle.
    pub fn signed_areas(&self) -> Vec<f64> {
        self.triangles
            .iter()
            .map(|t| tri_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]))
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.signed_areas().iter().sum()
    }

    /// `(x_min, y_min, x_max, y_max)` over all nodes.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.nodes.iter().fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), p| (a.min(p[0]), b.min(p[1]), c.max(p[0]), d.max(p[1])),
        )
    }

    /// x-extent covered by the top edges, if they form one contiguous run.
    pub fn top_span(&self) -> Option<(f64, f64)> {
        let first = self.top_edges.first()?;
        let mut end = self.nodes[first[2]][0];
        for e in &self.top_edges[1..] {
            if (self.nodes[e[0]][0] - end).abs() > self.tol {
                return None;
            }
            end = self.nodes[e[2]][0];
        }
        Some((self.nodes[first[0]][0], end))
    }
}

fn tri_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Sorted breakpoints with near-duplicates merged, each interval split into
/// `ceil(len / h)` equal parts.
fn graded_axis(mut breaks: Vec<f64>, h: f64, tol: f64) -> Vec<f64> {
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let parts = ((w[1] - w[0]) / h - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=parts {
            out.push(if k == parts {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * k as f64 / parts as f64
            });
        }
    }
    out
}

/// Tensor-grid mesh of an axis-aligned domain (rectangle with rectangular
/// holes). Diagonals flip at the vertical midline so the mesh is mirror
/// symmetric whenever the breakpoints are.
pub fn structured_mesh(
    geometry: &Geometry,
    x_breaks: &[f64],
    y_breaks: &[f64],
    h: f64,
) -> Result<Mesh> {
    if !(h > 0.0) {
        return Err(Error::arg(format!("mesh size must be positive, got {h}")));
    }
    let (x0, y0, x1, y1) = geometry.bounds();
    let tol = geometry.tol();
    let mut xb = vec![x0, x1, 0.5 * (x0 + x1)];
    xb.extend(x_breaks.iter().copied().filter(|&x| x > x0 && x < x1));
    let mut yb = vec![y0, y1];
    yb.extend(y_breaks.iter().copied().filter(|&y| y > y0 && y < y1));
    for ring in geometry.holes() {
        xb.extend(ring.iter().map(|p| p[0]));
        yb.extend(ring.iter().map(|p| p[1]));
    }
    let xs = graded_axis(xb, h, tol);
    let ys = graded_axis(yb, h, tol);
    let xm = 0.5 * (x0 + x1);
    let nx = xs.len();
    let id = |i: usize, j: usize| j * nx + i;
    let mut used = vec![usize::MAX; nx * ys.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..nx - 1 {
            let center = [0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])];
            if !geometry.contains(&center) {
                continue;
            }
            let mut v = |a: usize, b: usize| {
                let k = id(a, b);
                if used[k] == usize::MAX {
                    used[k] = vertices.len();
                    vertices.push([xs[a], ys[b]]);
                }
                used[k]
            };
            let (p00, p10, p01, p11) = (v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1));
            if center[0] < xm {
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            } else {
                triangles.push([p00, p10, p01]);
                triangles.push([p10, p11, p01]);
            }
        }
    }
    Mesh::from_linear(vertices, triangles)
}

/// Quality triangulation of an arbitrary polygon with holes. Boundary edges
/// are pre-split to length `<= h`, and `bottom_marks` are inserted as extra
/// vertices on the bottom edge so sensor segments end on nodes.
pub fn polygon_mesh(geometry: &Geometry, bottom_marks: &[f64], h: f64) -> Result<Mesh> {
    if !(h > 0.0) {
        return Err(Error::arg(format!("mesh size must be positive, got {h}")));
    }
    let tol = geometry.tol();
    let (_, y_min, _, _) = geometry.bounds();
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut rings: Vec<&[Point]> = vec![geometry.outline()];
    rings.extend(geometry.holes().iter().map(|h| h.as_slice()));
    for ring in rings {
        let mut pts = Vec::new();
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let mut ts: Vec<f64> = Vec::new();
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let parts = (len / h - 1e-9).ceil().max(1.0) as usize;
            ts.extend((0..parts).map(|k| k as f64 / parts as f64));
            if (a[1] - y_min).abs() <= tol && (b[1] - y_min).abs() <= tol {
                for &x in bottom_marks {
                    let t = (x - a[0]) / (b[0] - a[0]);
                    if t > 0.0 && t < 1.0 {
                        ts.push(t);
                    }
                }
            }
            ts.sort_by(f64::total_cmp);
            ts.dedup_by(|s, t| (*s - *t).abs() * len <= 1e-3 * h);
            pts.extend(
                ts.into_iter()
                    .map(|t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]),
            );
        }
        let mut handles = Vec::with_capacity(pts.len());
        for p in &pts {
            let handle = cdt
                .insert(Point2::new(p[0], p[1]))
                .map_err(|e| Error::Mesh(format!("cannot insert boundary point: {e:?}")))?;
            handles.push(handle);
        }
        for i in 0..handles.len() {
            let (a, b) = (handles[i], handles[(i + 1) % handles.len()]);
            if !cdt.can_add_constraint(a, b) {
                return Err(Error::Geometry("boundary edges intersect".into()));
            }
            cdt.add_constraint(a, b);
        }
    }
    let params = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .with_angle_limit(AngleLimit::from_deg(25.0))
        .with_max_allowed_area(0.5 * h * h)
        .with_max_additional_vertices(1_000_000);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(Error::Mesh("polygon refinement did not finish".into()));
    }
    let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();
    let mut index = vec![usize::MAX; cdt.num_vertices()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let tri = face.vertices().map(|v| {
            let k = v.fix().index();
            if index[k] == usize::MAX {
                index[k] = vertices.len();
                let p = v.position();
                vertices.push([p.x, p.y]);
            }
            index[k]
        });
        triangles.push(tri);
    }
    Mesh::from_linear(vertices, triangles)
}
