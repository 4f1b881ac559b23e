//! 2-D elastic hashing domains: a plane-strain body loaded on its top edge and
//! held at force sensors on its bottom edge.
//!
//! A domain is meshed and factorized once by [`ElasticHasher`]; every load is
//! then one forward/back substitution.

pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod solver;
pub mod vtk;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::HashValue;
use crate::loads::LoadProfile;

pub use fem::{ConstrainedSystem, ElasticSolution, Material};
pub use geometry::{lattice_geometry, Geometry, GeometryFile};
pub use mesh::{Mesh, NodeTag};
pub use vtk::{to_vtk, write_vtk};

/// Rectangle depths studied; the top edge is always [`TOP_LENGTH`] long.
pub const RECT_DEPTHS: [f64; 5] = [1.0, 2.5, 5.0, 10.0, 20.0];
pub const TOP_LENGTH: f64 = 10.0;
/// Sensor segment width as a fraction of the top length.
pub const SENSOR_WIDTH_FRACTION: f64 = 0.05;
pub const DEFAULT_MESH_H: f64 = 0.5;
pub const MIN_SENSORS: usize = 2;
pub const MAX_SENSORS: usize = 5;
pub const LATTICE_GRIDS: [usize; 3] = [2, 3, 4];

/// Which bottom nodes are held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixity {
    /// Only the sensor segments are fixed.
    SensorsOnly,
    /// The whole bottom edge is fixed; only sensor segments are read.
    FullBottom,
}

impl fmt::Display for Fixity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fixity::SensorsOnly => "sensors_only",
            Fixity::FullBottom => "full_bottom",
        })
    }
}

impl FromStr for Fixity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sensors_only" | "sensors" => Ok(Fixity::SensorsOnly),
            "full_bottom" | "full" => Ok(Fixity::FullBottom),
            _ => Err(Error::arg(format!(
                "unknown fixity {s:?} (expected sensors_only or full_bottom)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Rectangle,
    Lattice { grid: usize },
    Custom { name: String },
}

/// A validated domain description, ready to mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub depth: f64,
    pub top_length: f64,
    pub fixity: Fixity,
    pub geometry: Geometry,
    /// Sensor station x-coordinates, left to right.
    pub stations: Vec<f64>,
    pub sensor_width: f64,
    pub mesh_h: f64,
}

fn check_mesh_h(mesh_h: f64) -> Result<()> {
    if mesh_h > 0.0 && mesh_h.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "mesh size must be positive, got {mesh_h}"
        )))
    }
}

fn check_ns(ns: usize) -> Result<()> {
    if (MIN_SENSORS..=MAX_SENSORS).contains(&ns) {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "sensor count must be in {MIN_SENSORS}..={MAX_SENSORS}, got {ns}"
        )))
    }
}

/// `ns` stations at the centers of equal cells of `[x0, x1]`.
pub fn even_stations(ns: usize, x0: f64, x1: f64) -> Vec<f64> {
    (0..ns)
        .map(|i| x0 + (2 * i + 1) as f64 * (x1 - x0) / (2 * ns) as f64)
        .collect()
}

impl DomainSpec {
    pub fn rectangle(depth: f64, ns: usize, fixity: Fixity, mesh_h: f64) -> Result<Self> {
        if !RECT_DEPTHS.contains(&depth) {
            return Err(Error::arg(format!(
                "rectangle depth must be one of {RECT_DEPTHS:?}, got {depth}"
            )));
        }
        check_ns(ns)?;
        check_mesh_h(mesh_h)?;
        Ok(Self {
            kind: DomainKind::Rectangle,
            depth,
            top_length: TOP_LENGTH,
            fixity,
            geometry: Geometry::rectangle(TOP_LENGTH, depth)?,
            stations: even_stations(ns, 0.0, TOP_LENGTH),
            sensor_width: SENSOR_WIDTH_FRACTION * TOP_LENGTH,
            mesh_h,
        })
    }

    /// Square with a `g x g` window grid; one sensor under each of the
    /// `g + 1` vertical struts.
    pub fn lattice(grid: usize, mesh_h: f64) -> Result<Self> {
        if !LATTICE_GRIDS.contains(&grid) {
            return Err(Error::arg(format!(
                "lattice grid must be one of {LATTICE_GRIDS:?}, got {grid}"
            )));
        }
        check_mesh_h(mesh_h)?;
        let strut = TOP_LENGTH / (2 * grid + 1) as f64;
        Ok(Self {
            kind: DomainKind::Lattice { grid },
            depth: TOP_LENGTH,
            top_length: TOP_LENGTH,
            fixity: Fixity::SensorsOnly,
            geometry: lattice_geometry(grid, TOP_LENGTH)?,
            stations: (0..=grid)
                .map(|j| (2 * j) as f64 * strut + 0.5 * strut)
                .collect(),
            sensor_width: SENSOR_WIDTH_FRACTION * TOP_LENGTH,
            mesh_h,
        })
    }

    pub fn custom(file: &GeometryFile, mesh_h: f64) -> Result<Self> {
        check_ns(file.sensors)?;
        check_mesh_h(mesh_h)?;
        let geometry = Geometry::new(file.outline.clone(), file.holes.clone())?;
        let (_, y0, _, y1) = geometry.bounds();
        let tol = geometry.tol();
        let top = geometry.top_intervals();
        let top_length = match top.as_slice() {
            [(a, b)] if a.abs() <= tol => *b,
            _ => {
                return Err(Error::Geometry(
                    "the top edge must be a single horizontal segment starting at x = 0".into(),
                ))
            }
        };
        let bottom = geometry.bottom_intervals();
        let sensor_width = SENSOR_WIDTH_FRACTION * top_length;
        let stations = match &file.sensor_x {
            Some(xs) => {
                if xs.len() != file.sensors {
                    return Err(Error::Geometry(format!(
                        "{} sensor positions given for {} sensors",
                        xs.len(),
                        file.sensors
                    )));
                }
                xs.clone()
            }
            None => {
                let x0 = bottom.first().map_or(0.0, |iv| iv.0);
                let x1 = bottom.last().map_or(0.0, |iv| iv.1);
                even_stations(file.sensors, x0, x1)
            }
        };
        if stations.windows(2).any(|w| w[1] - w[0] <= sensor_width) {
            return Err(Error::Geometry(
                "sensor stations must be increasing and not overlap".into(),
            ));
        }
        for &c in &stations {
            let (a, b) = (c - 0.5 * sensor_width, c + 0.5 * sensor_width);
            if !bottom.iter().any(|iv| iv.0 - tol <= a && b <= iv.1 + tol) {
                return Err(Error::Geometry(format!(
                    "sensor at x = {c} does not lie on the bottom edge"
                )));
            }
        }
        Ok(Self {
            kind: DomainKind::Custom {
                name: file.name.clone().unwrap_or_else(|| "custom".into()),
            },
            depth: y1 - y0,
            top_length,
            fixity: file.fixity,
            geometry,
            stations,
            sensor_width,
            mesh_h,
        })
    }

    /// A shipped domain (`C1`..`C3`) or a geometry file path.
    pub fn custom_from(name_or_path: &str, mesh_h: f64) -> Result<Self> {
        let file = match GeometryFile::builtin(name_or_path) {
            Some(f) => f,
            None => GeometryFile::read(Path::new(name_or_path))?,
        };
        Self::custom(&file, mesh_h)
    }

    pub fn ns(&self) -> usize {
        self.stations.len()
    }

    pub fn with_mesh_h(mut self, mesh_h: f64) -> Result<Self> {
        check_mesh_h(mesh_h)?;
        self.mesh_h = mesh_h;
        Ok(self)
    }
}

pub fn build_domain(spec: &DomainSpec) -> Result<Mesh> {
    let marks: Vec<f64> = spec
        .stations
        .iter()
        .flat_map(|&c| [c - 0.5 * spec.sensor_width, c + 0.5 * spec.sensor_width])
        .collect();
    let mesh = match spec.kind {
        DomainKind::Rectangle | DomainKind::Lattice { .. } => {
            mesh::structured_mesh(&spec.geometry, &marks, &[], spec.mesh_h)?
        }
        DomainKind::Custom { .. } => mesh::polygon_mesh(&spec.geometry, &marks, spec.mesh_h)?,
    };
    mesh.with_sensors(&spec.stations, spec.sensor_width)
}

fn constrained_dofs(mesh: &Mesh, fixity: Fixity) -> Vec<usize> {
    let nodes: Vec<usize> = match fixity {
        Fixity::SensorsOnly => mesh.sensors().iter().flatten().copied().collect(),
        Fixity::FullBottom => mesh.bottom_nodes().to_vec(),
    };
    nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect()
}

/// One-off solve; prefer [`ElasticHasher`] for many loads on one domain.
pub fn solve(
    mesh: &Mesh,
    load: &LoadProfile,
    fixity: Fixity,
    material: &Material,
) -> Result<ElasticSolution> {
    let k = fem::assemble_stiffness(mesh, material);
    let system = ConstrainedSystem::new(k, constrained_dofs(mesh, fixity))?;
    let f = fem::traction_vector(mesh, load)?;
    fem::assemble_solution(&system, mesh.node_count(), &f)
}

/// Vertical force carried by each sensor.
///
/// With only the sensors fixed this is the sum of their nodal reactions. With
/// the whole bottom clamped, nodal reactions at a segment's end nodes also
/// collect traction from outside it, so the traction is recovered along the
/// bottom edge and integrated over the segment instead.
pub fn sensor_forces(solution: &ElasticSolution, mesh: &Mesh, fixity: Fixity) -> Vec<f64> {
    match fixity {
        Fixity::SensorsOnly => mesh
            .sensors()
            .iter()
            .map(|group| group.iter().map(|&n| solution.reactions[n][1]).sum())
            .collect(),
        Fixity::FullBottom => mesh
            .traction_weights()
            .iter()
            .map(|w| w.iter().map(|&(n, g)| g * solution.reactions[n][1]).sum())
            .collect(),
    }
}

/// Sensor forces normalized to sum to one.
pub fn sensor_readout(
    solution: &ElasticSolution,
    mesh: &Mesh,
    fixity: Fixity,
) -> Result<HashValue> {
    HashValue::new(sensor_forces(solution, mesh, fixity))?.normalized()
}

/// A meshed, factorized domain that hashes loads.
#[derive(Debug, Clone)]
pub struct ElasticHasher {
    spec: DomainSpec,
    mesh: Mesh,
    system: ConstrainedSystem,
}

impl ElasticHasher {
    pub fn new(spec: &DomainSpec, material: &Material) -> Result<Self> {
        let mesh = build_domain(spec)?;
        let k = fem::assemble_stiffness(&mesh, material);
        let system = ConstrainedSystem::new(k, constrained_dofs(&mesh, spec.fixity))?;
        Ok(Self {
            spec: spec.clone(),
            mesh,
            system,
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn solve(&self, load: &LoadProfile) -> Result<ElasticSolution> {
        let f = fem::traction_vector(&self.mesh, load)?;
        fem::assemble_solution(&self.system, self.mesh.node_count(), &f)
    }

    pub fn hash(&self, load: &LoadProfile) -> Result<HashValue> {
        sensor_readout(&self.solve(load)?, &self.mesh, self.spec.fixity)
    }

    pub fn hash_all(&self, loads: &[LoadProfile]) -> Result<Vec<HashValue>> {
        loads.par_iter().map(|w| self.hash(w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> LoadProfile {
        LoadProfile::constant(-0.1, 201, 10.0).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(DomainSpec::rectangle(3.0, 2, Fixity::SensorsOnly, 0.5).is_err());
        assert!(DomainSpec::rectangle(1.0, 6, Fixity::SensorsOnly, 0.5).is_err());
        assert!(DomainSpec::rectangle(1.0, 2, Fixity::SensorsOnly, 0.0).is_err());
        assert!(DomainSpec::lattice(5, 0.5).is_err());
        let l = DomainSpec::lattice(2, 0.5).unwrap();
        assert_eq!(l.stations, vec![1.0, 5.0, 9.0]);
        assert_eq!("full_bottom".parse::<Fixity>().unwrap(), Fixity::FullBottom);
        assert!("clamped".parse::<Fixity>().is_err());
    }

    #[test]
    fn symmetric_rectangle_splits_evenly() {
        for fixity in [Fixity::SensorsOnly, Fixity::FullBottom] {
            let spec = DomainSpec::rectangle(2.5, 2, fixity, 0.5).unwrap();
            let h = ElasticHasher::new(&spec, &Material::default()).unwrap();
            let sol = h.solve(&uniform()).unwrap();
            assert!(sol.equilibrium_error() < 1e-9);
            let r = sensor_readout(&sol, h.mesh(), fixity).unwrap();
            assert!((r.readouts()[0] - 0.5).abs() < 1e-9, "{:?}", r.readouts());
        }
    }

    #[test]
    fn sensors_only_reactions_all_pass_through_sensors() {
        let spec = DomainSpec::rectangle(1.0, 3, Fixity::SensorsOnly, 0.5).unwrap();
        let mesh = build_domain(&spec).unwrap();
        let sol = solve(&mesh, &uniform(), spec.fixity, &Material::default()).unwrap();
        let total: f64 = sensor_forces(&sol, &mesh, spec.fixity).iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn custom_domains_mesh() {
        for name in ["C1", "C2", "C3"] {
            let spec = DomainSpec::custom_from(name, 1.0).unwrap();
            let mesh = build_domain(&spec).unwrap();
            assert!(mesh.signed_areas().iter().all(|&a| a > 0.0));
            assert!((mesh.area() - spec.geometry.area()).abs() < 1e-6 * spec.geometry.area());
        }
    }

    #[test]
    fn custom_sensor_off_bottom_rejected() {
        let mut f = GeometryFile::builtin("C1").unwrap();
        f.sensor_x = Some(vec![1.0, 5.0, 6.0]);
        assert!(matches!(
            DomainSpec::custom(&f, 0.5),
            Err(Error::Geometry(_))
        ));
    }
}
