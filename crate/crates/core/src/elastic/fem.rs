//! Plane-strain linear elasticity on quadratic triangles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loads::LoadProfile;

use super::mesh::Mesh;
use super::solver::{conjugate_gradient, relative_residual, CsrMatrix, SkylineCholesky};

/// Relative residual every accepted linear solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;
/// Relative mismatch allowed between total reaction and total applied load.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            youngs_modulus: 1.0,
            poisson_ratio: 0.3,
        }
    }
}

impl Material {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
            return Err(Error::arg(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(Error::arg(format!(
                "Poisson ratio must lie in (-1, 0.5), got {poisson_ratio}"
            )));
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
        })
    }

    /// Plane-strain constitutive matrix in Voigt order (xx, yy, xy).
    fn plane_strain(&self) -> [[f64; 3]; 3] {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
        [
            [c * (1.0 - nu), c * nu, 0.0],
            [c * nu, c * (1.0 - nu), 0.0],
            [0.0, 0.0, c * (1.0 - 2.0 * nu) / 2.0],
        ]
    }
}

// 3-point rule, exact for quadratics on the reference triangle
const TRI_POINTS: [[f64; 2]; 3] = [
    [1.0 / 6.0, 1.0 / 6.0],
    [2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0],
];
const TRI_WEIGHT: f64 = 1.0 / 6.0;

// Gauss-Legendre on [0, 1], exact to degree 5
const LINE_POINTS: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
const LINE_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Reference-coordinate gradients of the six shape functions at `(xi, eta)`.
fn shape_gradients(xi: f64, eta: f64) -> [[f64; 2]; 6] {
    let l1 = 1.0 - xi - eta;
    [
        [-(4.0 * l1 - 1.0), -(4.0 * l1 - 1.0)],
        [4.0 * xi - 1.0, 0.0],
        [0.0, 4.0 * eta - 1.0],
        [4.0 * (l1 - xi), -4.0 * xi],
        [4.0 * eta, 4.0 * xi],
        [-4.0 * eta, 4.0 * (l1 - eta)],
    ]
}

pub(crate) fn element_stiffness(x: &[[f64; 2]; 6], d: &[[f64; 3]; 3]) -> [[f64; 12]; 12] {
    let mut k = [[0.0; 12]; 12];
    for p in TRI_POINTS {
        let g = shape_gradients(p[0], p[1]);
        let mut jac = [[0.0; 2]; 2];
        for (gi, xi) in g.iter().zip(x) {
            for r in 0..2 {
                for c in 0..2 {
                    jac[r][c] += gi[r] * xi[c];
                }
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        let mut b = [[0.0; 12]; 3];
        for (a, ga) in g.iter().enumerate() {
            let dx = inv[0][0] * ga[0] + inv[0][1] * ga[1];
            let dy = inv[1][0] * ga[0] + inv[1][1] * ga[1];
            b[0][2 * a] = dx;
            b[1][2 * a + 1] = dy;
            b[2][2 * a] = dy;
            b[2][2 * a + 1] = dx;
        }
        let w = TRI_WEIGHT * det;
        let mut db = [[0.0; 12]; 3];
        for r in 0..3 {
            for c in 0..12 {
                db[r][c] = (0..3).map(|s| d[r][s] * b[s][c]).sum();
            }
        }
        for i in 0..12 {
            for j in 0..12 {
                k[i][j] += w * (0..3).map(|s| b[s][i] * db[s][j]).sum::<f64>();
            }
        }
    }
    k
}

/// Global stiffness with dofs `2 * node` (x) and `2 * node + 1` (y).
pub fn assemble_stiffness(mesh: &Mesh, material: &Material) -> CsrMatrix {
    let d = material.plane_strain();
    let nodes = mesh.nodes();
    let mut triplets = Vec::with_capacity(mesh.triangles().len() * 144);
    for tri in mesh.triangles() {
        let x = tri.map(|n| nodes[n]);
        let ke = element_stiffness(&x, &d);
        for (a, &na) in tri.iter().enumerate() {
            for (b, &nb) in tri.iter().enumerate() {
                for r in 0..2 {
                    for c in 0..2 {
                        triplets.push((2 * na + r, 2 * nb + c, ke[2 * a + r][2 * b + c]));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(2 * mesh.node_count(), triplets)
}

/// Consistent nodal forces of the vertical traction `w(x)` on the top edges.
///
/// Each edge is split at the load's sample points so every piece integrates a
/// linear-times-quadratic polynomial, which the 3-point rule does exactly.
pub fn traction_vector(mesh: &Mesh, load: &LoadProfile) -> Result<Vec<f64>> {
    let (x0, x1) = mesh
        .top_span()
        .ok_or_else(|| Error::Mesh("top boundary is not one contiguous edge run".into()))?;
    let tol = 1e-9 * load.length();
    if x0.abs() > tol || (x1 - load.length()).abs() > tol {
        return Err(Error::arg(format!(
            "load spans [0, {}] but the top surface spans [{x0}, {x1}]",
            load.length()
        )));
    }
    let nodes = mesh.nodes();
    let dx = load.spacing();
    let mut f = vec![0.0; 2 * mesh.node_count()];
    for edge in mesh.top_edges() {
        let (a, b) = (nodes[edge[0]][0], nodes[edge[2]][0]);
        let mut cuts = vec![a];
        let first = (a / dx).floor() as usize + 1;
        let mut i = first;
        while (i as f64) * dx < b - tol {
            if (i as f64) * dx > a + tol {
                cuts.push(i as f64 * dx);
            }
            i += 1;
        }
        cuts.push(b);
        let mut fe = [0.0; 3];
        for piece in cuts.windows(2) {
            let (p, q) = (piece[0], piece[1]);
            for (t, w) in LINE_POINTS.iter().zip(LINE_WEIGHTS) {
                let x = p + t * (q - p);
                let s = (x - a) / (b - a);
                let n = [
                    (1.0 - s) * (1.0 - 2.0 * s),
                    4.0 * s * (1.0 - s),
                    s * (2.0 * s - 1.0),
                ];
                let wx = load.value_at(x) * w * (q - p);
                for k in 0..3 {
                    fe[k] += wx * n[k];
                }
            }
        }
        for k in 0..3 {
            f[2 * edge[k] + 1] += fe[k];
        }
    }
    Ok(f)
}

/// A stiffness matrix partitioned into free and constrained dofs, with the
/// free block factorized once for repeated solves.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    k: CsrMatrix,
    free: Vec<usize>,
    constrained: Vec<usize>,
    k_ff: CsrMatrix,
    k_fc: CsrMatrix,
    factor: Option<SkylineCholesky>,
}

impl ConstrainedSystem {
    pub fn new(k: CsrMatrix, mut constrained: Vec<usize>) -> Result<Self> {
        let n = k.dim();
        constrained.sort_unstable();
        constrained.dedup();
        if constrained.is_empty() {
            return Err(Error::Solver {
                message: "system is singular: no constrained degrees of freedom".into(),
                residual: f64::NAN,
            });
        }
        if constrained.last().is_some_and(|&d| d >= n) {
            return Err(Error::arg("constrained dof out of range"));
        }
        let mut is_c = vec![false; n];
        for &d in &constrained {
            is_c[d] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&d| !is_c[d]).collect();
        let mut free_map = vec![usize::MAX; n];
        let mut c_map = vec![usize::MAX; n];
        for (i, &d) in free.iter().enumerate() {
            free_map[d] = i;
        }
        for (i, &d) in constrained.iter().enumerate() {
            c_map[d] = i;
        }
        let k_ff = k.submatrix(&free, &free_map, free.len());
        let k_fc = k.submatrix(&free, &c_map, constrained.len());
        // a failed factorization leaves CG to decide whether the system is solvable
        let factor = SkylineCholesky::factor(&k_ff).ok();
        Ok(Self {
            k,
            free,
            constrained,
            k_ff,
            k_fc,
            factor,
        })
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained
    }

    pub fn is_factorized(&self) -> bool {
        self.factor.is_some()
    }

    /// Solves `K u = f + r` with `u = prescribed` on the constrained dofs.
    /// Returns the full displacement vector and the reactions `r = K u - f`
    /// on the constrained dofs (in `constrained_dofs()` order).
    pub fn solve(&self, f: &[f64], prescribed: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.k.dim();
        if f.len() != n || prescribed.len() != self.constrained.len() {
            return Err(Error::arg(
                "force or prescribed-displacement vector has the wrong length",
            ));
        }
        let coupling = self.k_fc.mul_vec(prescribed);
        let rhs: Vec<f64> = self
            .free
            .iter()
            .zip(&coupling)
            .map(|(&d, c)| f[d] - c)
            .collect();
        let u_f = match &self.factor {
            Some(factor) => {
                let direct = factor.solve(&rhs);
                if relative_residual(&self.k_ff, &direct, &rhs) <= SOLVE_TOLERANCE {
                    direct
                } else {
                    conjugate_gradient(&self.k_ff, &rhs, direct, SOLVE_TOLERANCE, 20 * rhs.len())?
                }
            }
            None => conjugate_gradient(
                &self.k_ff,
                &rhs,
                vec![0.0; rhs.len()],
                SOLVE_TOLERANCE,
                20 * rhs.len(),
            )
            .map_err(|e| match e {
                Error::Solver { residual, .. } => Error::Solver {
                    message:
                        "stiffness is singular (insufficient constraints?) and CG did not converge"
                            .into(),
                    residual,
                },
                other => other,
            })?,
        };
        let mut u = vec![0.0; n];
        for (&d, v) in self.free.iter().zip(&u_f) {
            u[d] = *v;
        }
        for (&d, v) in self.constrained.iter().zip(prescribed) {
            u[d] = *v;
        }
        let reactions = self
            .constrained
            .iter()
            .map(|&d| self.k.row(d).map(|(c, v)| v * u[c]).sum::<f64>() - f[d])
            .collect();
        Ok((u, reactions))
    }
}

/// Nodal displacements and support reactions of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticSolution {
    pub displacements: Vec<[f64; 2]>,
    /// Reaction force per node; zero at unconstrained nodes.
    pub reactions: Vec<[f64; 2]>,
    /// Total applied surface force `(F_x, F_y)`.
    pub applied: [f64; 2],
}

impl ElasticSolution {
    pub fn total_reaction(&self) -> [f64; 2] {
        self.reactions
            .iter()
            .fold([0.0, 0.0], |acc, r| [acc[0] + r[0], acc[1] + r[1]])
    }

    /// `|R_y + F_y| / |F_y|`.
    pub fn equilibrium_error(&self) -> f64 {
        let ry = self.total_reaction()[1];
        let fy = self.applied[1];
        (ry + fy).abs() / fy.abs().max(f64::MIN_POSITIVE)
    }
}

pub(crate) fn assemble_solution(
    system: &ConstrainedSystem,
    nodes: usize,
    f: &[f64],
) -> Result<ElasticSolution> {
    let zero = vec![0.0; system.constrained_dofs().len()];
    let (u, r) = system.solve(f, &zero)?;
    let mut reactions = vec![[0.0; 2]; nodes];
    for (&d, v) in system.constrained_dofs().iter().zip(r) {
        reactions[d / 2][d % 2] = v;
    }
    let applied = [f.iter().step_by(2).sum(), f.iter().skip(1).step_by(2).sum()];
    let solution = ElasticSolution {
        displacements: u.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        reactions,
        applied,
    };
    if solution
        .displacements
        .iter()
        .flatten()
        .any(|v| !v.is_finite())
    {
        return Err(Error::Solver {
            message: "non-finite displacement".into(),
            residual: f64::NAN,
        });
    }
    let err = solution.equilibrium_error();
    if applied[1] != 0.0 && err > EQUILIBRIUM_TOLERANCE {
        return Err(Error::Solver {
            message: format!("reactions miss equilibrium by {err:e} (relative)"),
            residual: err,
        });
    }
    Ok(solution)
}
