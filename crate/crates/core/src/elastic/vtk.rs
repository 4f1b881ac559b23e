use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

use super::fem::ElasticSolution;
use super::mesh::{Mesh, NodeTag};

const VTK_QUADRATIC_TRIANGLE: u8 = 22;

/// Legacy ASCII VTK unstructured grid with displacement and reaction vectors
/// and a per-node tag (0 free, 1 top, 2 bottom, 10 + i sensor i).
pub fn to_vtk(mesh: &Mesh, solution: Option<&ElasticSolution>) -> String {
    let mut s = String::new();
    let n = mesh.node_count();
    let tris = mesh.triangles();
    s.push_str(
        "# vtk DataFile Version 3.0\nmech-lsh elastic domain\nASCII\nDATASET UNSTRUCTURED_GRID\n",
    );
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", tris.len(), tris.len() * 7);
    for t in tris {
        let _ = writeln!(s, "6 {} {} {} {} {} {}", t[0], t[1], t[2], t[3], t[4], t[5]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", tris.len());
    for _ in tris {
        let _ = writeln!(s, "{VTK_QUADRATIC_TRIANGLE}");
    }
    let _ = writeln!(s, "POINT_DATA {n}\nSCALARS tag int 1\nLOOKUP_TABLE default");
    for i in 0..n {
        let tag = match mesh.node_tag(i) {
            NodeTag::Free => 0,
            NodeTag::Top => 1,
            NodeTag::FixedBottom => 2,
            NodeTag::Sensor(k) => 10 + k,
        };
        let _ = writeln!(s, "{tag}");
    }
    if let Some(sol) = solution {
        for (name, field) in [
            ("displacement", &sol.displacements),
            ("reaction", &sol.reactions),
        ] {
            let _ = writeln!(s, "VECTORS {name} double");
            for v in field.iter() {
                let _ = writeln!(s, "{} {} 0", v[0], v[1]);
            }
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, solution: Option<&ElasticSolution>) -> Result<()> {
    crate::io::write_text(path, &to_vtk(mesh, solution))
}
