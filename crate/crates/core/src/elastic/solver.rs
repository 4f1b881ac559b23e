//! Sparse symmetric storage, reverse Cuthill-McKee ordering, an envelope
//! (skyline) Cholesky factorization and a Jacobi-preconditioned CG fallback.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, merged column indices.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len() / 2);
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(
                r < n && c < n,
                "triplet ({r}, {c}) outside a {n} x {n} matrix"
            );
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Rows `rows` restricted to columns `cols`, renumbered by position.
    /// `col_map[j]` is the new index of old column `j`, or `usize::MAX`.
    pub fn submatrix(&self, rows: &[usize], col_map: &[usize], ncols: usize) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for &r in rows {
            for (c, v) in self.row(r) {
                let nc = col_map[c];
                if nc != usize::MAX {
                    cols.push(nc);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        debug_assert!(cols.iter().all(|&c| c < ncols));
        // rows were sorted by old column; renumbering is monotone so they still are
        CsrMatrix {
            n: rows.len(),
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n)
        .map(|i| a.row(i).filter(|&(c, _)| c != i).count())
        .collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(a, seed, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a.row(v).map(|(c, _)| c).filter(|&c| !visited[c]).collect();
            next.sort_by_key(|&c| (degree[c], c));
            for c in next {
                visited[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

// BFS levels from `root`: (last level, depth)
fn bfs_levels(a: &CsrMatrix, root: usize, mark: &mut [usize], stamp: usize) -> (Vec<usize>, usize) {
    mark[root] = stamp;
    let mut level = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &level {
            for (c, _) in a.row(v) {
                if mark[c] != stamp {
                    mark[c] = stamp;
                    next.push(c);
                }
            }
        }
        if next.is_empty() {
            return (level, depth);
        }
        level = next;
        depth += 1;
    }
}

fn pseudo_peripheral(a: &CsrMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut mark = vec![usize::MAX; a.dim()];
    let mut root = seed;
    let (mut last, mut depth) = bfs_levels(a, root, &mut mark, 0);
    for stamp in 1..8 {
        let cand = *last.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
        let (l, d) = bfs_levels(a, cand, &mut mark, stamp);
        if d <= depth {
            break;
        }
        root = cand;
        last = l;
        depth = d;
    }
    root
}

/// Envelope Cholesky factor `P A P^T = L L^T`, stored row-wise from the first
/// structurally nonzero column of each row to the diagonal.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    ptr: Vec<usize>,
    vals: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (c, _) in a.row(old) {
                let nc = inv[c];
                if nc < new {
                    first[new] = first[new].min(nc);
                }
            }
        }
        let mut ptr = Vec::with_capacity(n + 1);
        ptr.push(0);
        for i in 0..n {
            ptr.push(ptr[i] + i - first[i] + 1);
        }
        let mut vals = vec![0.0; ptr[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (c, v) in a.row(old) {
                let nc = inv[c];
                if nc <= new {
                    vals[ptr[new] + nc - first[new]] += v;
                }
            }
        }
        let max_diag = a.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let pivot_floor = 1e-12 * max_diag;
        for i in 0..n {
            let fi = first[i];
            let (done, row_i) = vals.split_at_mut(ptr[i]);
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let lj = &done[ptr[j]..ptr[j + 1]];
                let dot: f64 = row_i[start - fi..j - fi]
                    .iter()
                    .zip(&lj[start - fj..j - fj])
                    .map(|(x, y)| x * y)
                    .sum();
                row_i[j - fi] = (row_i[j - fi] - dot) / lj[j - fj];
            }
            let d = row_i[i - fi] - row_i[..i - fi].iter().map(|x| x * x).sum::<f64>();
            if !(d > pivot_floor) {
                return Err(Error::Solver {
                    message: format!(
                        "stiffness matrix is singular or indefinite (pivot {d:e} at row {i})"
                    ),
                    residual: f64::NAN,
                });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            ptr,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.vals[self.ptr[i]..self.ptr[i + 1]];
            let dot: f64 = row[..i - fi]
                .iter()
                .zip(&y[fi..i])
                .map(|(l, v)| l * v)
                .sum();
            y[i] = (y[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.vals[self.ptr[i]..self.ptr[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (l, v) in row[..i - fi].iter().zip(&mut y[fi..i]) {
                *v -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `||A x - b|| / ||b||` (or the absolute residual when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm(b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Jacobi-preconditioned conjugate gradients from the initial guess `x`.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.dim();
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Solver {
            message: "CG needs a positive diagonal".into(),
            residual: f64::NAN,
        });
    }
    let nb = norm(b);
    if nb == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(v, d)| v / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / nb;
    for _ in 0..max_iter {
        if res <= tol {
            return Ok(x);
        }
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / nb;
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= tol {
        return Ok(x);
    }
    Err(Error::Solver {
        message: format!("conjugate gradients did not reach relative residual {tol:e}"),
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // 1-D Laplacian with a Dirichlet end: SPD, tridiagonal
    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 4.0]);
    }

    #[test]
    fn rcm_is_a_permutation_with_small_envelope() {
        // a shuffled path graph must be reordered back to bandwidth 1
        let n = 50;
        let shuffle: Vec<usize> = (0..n).map(|i| (i * 17) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((shuffle[i], shuffle[i], 2.0));
            if i + 1 < n {
                t.push((shuffle[i], shuffle[i + 1], -1.0));
                t.push((shuffle[i + 1], shuffle[i], -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, t);
        let mut p = reverse_cuthill_mckee(&a);
        let f = SkylineCholesky::factor(&a).unwrap();
        assert_eq!(f.envelope_size(), 2 * n - 1);
        p.sort();
        assert_eq!(p, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn cholesky_solves_laplacian() {
        let n = 40;
        let a = laplacian(n);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = SkylineCholesky::factor(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(relative_residual(&a, &x, &b) < 1e-13);
    }

    #[test]
    fn singular_matrix_is_reported() {
        // pure Neumann Laplacian has the constant vector in its kernel
        let a = CsrMatrix::from_triplets(
            3,
            vec![
                (0, 0, 1.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 1.0),
            ],
        );
        assert!(matches!(
            SkylineCholesky::factor(&a),
            Err(Error::Solver { .. })
        ));
    }

    #[test]
    fn cg_agrees_with_cholesky() {
        let n = 30;
        let a = laplacian(n);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let direct = SkylineCholesky::factor(&a).unwrap().solve(&b);
        let iter = conjugate_gradient(&a, &b, vec![0.0; n], 1e-12, 1000).unwrap();
        for (u, v) in direct.iter().zip(&iter) {
            assert!((u - v).abs() < 1e-8 * u.abs().max(1.0));
        }
        let err = conjugate_gradient(&a, &b, vec![0.0; n], 1e-12, 2).unwrap_err();
        assert!(matches!(err, Error::Solver { residual, .. } if residual > 1e-12));
    }

    #[test]
    fn submatrix_extracts_block() {
        let a = laplacian(4);
        let map = [usize::MAX, 0, 1, usize::MAX];
        let s = a.submatrix(&[1, 2], &map, 2);
        assert_eq!(s.mul_vec(&[1.0, 0.0]), vec![2.0, -1.0]);
    }
}
