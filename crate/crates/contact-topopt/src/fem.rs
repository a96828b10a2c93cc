//! Linear finite elements on triangle meshes: sparse assembly, constrained
//! degree-of-freedom bookkeeping, and a deterministic direct solver
//! (reverse Cuthill-McKee reordering + skyline LDL^T factorization).
//!
//! Displacements use two degrees of freedom per vertex, interleaved as
//! `[u0_x, u0_y, u1_x, u1_y, ...]`.  Scalar fields (phase field, flow
//! components) use one per vertex.

use crate::error::Error;
use crate::material::{Elasticity, FrictionParams, Sym2};
use crate::mesh::{BoundaryTag, Mesh};
use crate::Result;

// ---------------------------------------------------------------------------
// Sparse matrices
// ---------------------------------------------------------------------------

/// Triplet accumulator for assembly.
#[derive(Debug, Clone)]
pub struct Coo {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Coo {
    pub fn new(n: usize) -> Self {
        Coo { n, entries: Vec::new() }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// Merge another accumulator of the same dimension into this one.
    pub fn add_coo(&mut self, other: &Coo) {
        assert_eq!(self.n, other.n);
        self.entries.extend_from_slice(&other.entries);
    }

    /// Compress to CSR, summing duplicate positions.
    pub fn to_csr(&self) -> Csr {
        let mut sorted = self.entries.clone();
        sorted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut cur_row = 0usize;
        for &(i, j, v) in &sorted {
            while cur_row < i {
                cur_row += 1;
                row_ptr[cur_row] = col_idx.len();
            }
            if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
            }
        }
        while cur_row < self.n {
            cur_row += 1;
            row_ptr[cur_row] = col_idx.len();
        }
        Csr { n: self.n, row_ptr, col_idx, values }
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
        y
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    /// Infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `A^T diag(w) A` for symmetric `A` (used for the lumped biharmonic
/// operator `K M^{-1} K`).
pub fn gram_scaled(a: &Csr, w: &[f64]) -> Coo {
    assert_eq!(w.len(), a.n);
    let mut out = Coo::new(a.n);
    for k in 0..a.n {
        if w[k] == 0.0 {
            continue;
        }
        let lo = a.row_ptr[k];
        let hi = a.row_ptr[k + 1];
        for p in lo..hi {
            for q in lo..hi {
                out.add(a.col_idx[p], a.col_idx[q], w[k] * a.values[p] * a.values[q]);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Reverse Cuthill-McKee
// ---------------------------------------------------------------------------

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern.
/// Returns `perm` with `perm[new] = old`.  Deterministic: ties broken by
/// vertex index, components started from the minimum-degree vertex.
pub fn reverse_cuthill_mckee(csr: &Csr) -> Vec<usize> {
    let n = csr.n;
    let degree: Vec<usize> = (0..n).map(|i| csr.row_ptr[i + 1] - csr.row_ptr[i]).collect();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    loop {
        let start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v));
        let Some(start) = start else { break };
        visited[start] = true;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = csr
                .row(v)
                .map(|(j, _)| j)
                .filter(|&j| j != v && !visited[j])
                .collect();
            nbrs.sort_unstable_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

// ---------------------------------------------------------------------------
// Skyline LDL^T
// ---------------------------------------------------------------------------

/// Symmetric positive definite direct solver: RCM reordering plus an
/// in-place skyline (profile) LDL^T factorization.  Solves include a
/// residual check with one step of iterative refinement.
pub struct SpdSolver {
    csr: Csr,
    perm: Vec<usize>,    // perm[new] = old
    first: Vec<usize>,   // first stored column per (permuted) row
    row_ptr: Vec<usize>, // packed row starts; row i spans first[i]..=i
    data: Vec<f64>,      // L below diagonal, D on diagonal
}

impl SpdSolver {
    pub fn new(coo: &Coo) -> Result<Self> {
        let csr = coo.to_csr();
        let n = csr.n;
        if n == 0 {
            return Err(Error::Solve("empty system".into()));
        }
        let perm = reverse_cuthill_mckee(&csr);
        let mut inv_perm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        // profile of the permuted matrix
        let mut first: Vec<usize> = (0..n).collect();
        for i_old in 0..n {
            let pi = inv_perm[i_old];
            for (j_old, _) in csr.row(i_old) {
                let pj = inv_perm[j_old];
                if pj < first[pi] {
                    first[pi] = pj;
                }
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; row_ptr[n]];
        for i_old in 0..n {
            let pi = inv_perm[i_old];
            for (j_old, v) in csr.row(i_old) {
                let pj = inv_perm[j_old];
                if pj <= pi {
                    data[row_ptr[pi] + (pj - first[pi])] += v;
                }
            }
        }
        let mut solver = SpdSolver { csr, perm, first, row_ptr, data };
        solver.factor()?;
        Ok(solver)
    }

    fn at(&self, i: usize, j: usize) -> usize {
        self.row_ptr[i] + (j - self.first[i])
    }

    /// In-place LDL^T on the skyline.  Fails with a solve error on a
    /// non-positive pivot (matrix not positive definite).
    fn factor(&mut self) -> Result<()> {
        let n = self.csr.n;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            scale = scale.max(self.data[self.at(i, i)].abs());
        }
        if scale == 0.0 {
            return Err(Error::Solve("zero matrix".into()));
        }
        let mut w = vec![0.0; n]; // scaled active row: w[k] = L[i][k] * D[k]
        for i in 0..n {
            let fi = self.first[i];
            for k in fi..i {
                w[k] = self.data[self.at(i, k)];
            }
            for j in fi..i {
                let fj = self.first[j];
                let lo = fi.max(fj);
                let mut s = w[j];
                for k in lo..j {
                    s -= w[k] * self.data[self.at(j, k)];
                }
                w[j] = s; // L[i][j] * D[j]
                let dj = self.data[self.at(j, j)];
                let idx = self.at(i, j);
                self.data[idx] = s / dj;
            }
            let mut d = self.data[self.at(i, i)];
            for k in fi..i {
                d -= self.data[self.at(i, k)] * w[k];
            }
            if !(d > 1e-14 * scale) {
                return Err(Error::Solve(format!(
                    "non-positive pivot {d:.3e} at row {i} (system is not positive definite)"
                )));
            }
            let idx = self.at(i, i);
            self.data[idx] = d;
        }
        Ok(())
    }

    fn solve_factored(&self, b: &[f64]) -> Vec<f64> {
        let n = self.csr.n;
        let mut z = vec![0.0; n];
        for i in 0..n {
            z[i] = b[self.perm[i]];
        }
        for i in 0..n {
            let mut s = z[i];
            for k in self.first[i]..i {
                s -= self.data[self.at(i, k)] * z[k];
            }
            z[i] = s;
        }
        for i in 0..n {
            z[i] /= self.data[self.at(i, i)];
        }
        for i in (0..n).rev() {
            let zi = z[i];
            for k in self.first[i]..i {
                z[k] -= self.data[self.at(i, k)] * zi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        x
    }

    /// Solve `A x = b` with a relative residual check (one refinement step
    /// before giving up).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.csr.n);
        let mut x = self.solve_factored(b);
        let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tol = 1e-10;
        for _attempt in 0..2 {
            let ax = self.csr.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let bound = tol * (norm_b + self.csr.inf_norm() * norm_x).max(f64::MIN_POSITIVE);
            if norm_r <= bound {
                return Ok(x);
            }
            let dx = self.solve_factored(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        let ax = self.csr.matvec(&x);
        let norm_r = b
            .iter()
            .zip(&ax)
            .map(|(bi, ai)| (bi - ai) * (bi - ai))
            .sum::<f64>()
            .sqrt();
        Err(Error::Solve(format!(
            "direct solve residual {norm_r:.3e} exceeds tolerance after refinement"
        )))
    }

    pub fn matrix(&self) -> &Csr {
        &self.csr
    }

    #[cfg(test)]
    fn bandwidth(&self) -> usize {
        (0..self.csr.n).map(|i| i - self.first[i]).max().unwrap_or(0)
    }

    #[cfg(test)]
    fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

// ---------------------------------------------------------------------------
// Degree-of-freedom maps
// ---------------------------------------------------------------------------

/// Map between a full vector of degrees of freedom and the reduced vector
/// with constrained entries eliminated.  Constrained entries carry a
/// prescribed value (zero in all production paths; tests use nonzero values
/// for patch tests).
#[derive(Debug, Clone)]
pub struct DofMap {
    pub full_dim: usize,
    pub constraint: Vec<Option<f64>>,
    pub reduced_of: Vec<Option<usize>>,
    pub full_of: Vec<usize>,
}

impl DofMap {
    pub fn from_constraints(constraint: Vec<Option<f64>>) -> Self {
        let full_dim = constraint.len();
        let mut reduced_of = vec![None; full_dim];
        let mut full_of = Vec::new();
        for (i, c) in constraint.iter().enumerate() {
            if c.is_none() {
                reduced_of[i] = Some(full_of.len());
                full_of.push(i);
            }
        }
        DofMap { full_dim, constraint, reduced_of, full_of }
    }

    pub fn reduced_dim(&self) -> usize {
        self.full_of.len()
    }

    /// Full-size vector with prescribed values filled in and free entries
    /// taken from `reduced`.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        assert_eq!(reduced.len(), self.full_of.len());
        let mut full = vec![0.0; self.full_dim];
        for (i, c) in self.constraint.iter().enumerate() {
            if let Some(v) = c {
                full[i] = *v;
            }
        }
        for (r, &i) in self.full_of.iter().enumerate() {
            full[i] = reduced[r];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.full_dim);
        self.full_of.iter().map(|&i| full[i]).collect()
    }

    /// Reduce `A x = b`: drop constrained rows, move `A[:, c] * value`
    /// contributions of constrained columns to the right-hand side.
    pub fn reduce_system(&self, a: &Coo, b: &[f64]) -> (Coo, Vec<f64>) {
        assert_eq!(a.n, self.full_dim);
        assert_eq!(b.len(), self.full_dim);
        let mut rb: Vec<f64> = self.full_of.iter().map(|&i| b[i]).collect();
        let mut ra = Coo::new(self.full_of.len());
        for &(i, j, v) in &a.entries {
            match (self.reduced_of[i], self.reduced_of[j]) {
                (Some(ri), Some(rj)) => ra.add(ri, rj, v),
                (Some(ri), None) => {
                    let val = self.constraint[j].unwrap();
                    if val != 0.0 {
                        rb[ri] -= v * val;
                    }
                }
                _ => {}
            }
        }
        (ra, rb)
    }

    /// Reduce a matrix alone (all prescribed values ignored).
    pub fn reduce_matrix(&self, a: &Coo) -> Coo {
        let mut ra = Coo::new(self.full_of.len());
        for &(i, j, v) in &a.entries {
            if let (Some(ri), Some(rj)) = (self.reduced_of[i], self.reduced_of[j]) {
                ra.add(ri, rj, v);
            }
        }
        ra
    }
}

/// Tangential axis of an axis-aligned contact edge: 0 when the edge is
/// horizontal (sliding along x, normal along y), 1 when vertical.
pub fn contact_tangent_axis(mesh: &Mesh, a: usize, b: usize) -> usize {
    let pa = mesh.vertices[a];
    let pb = mesh.vertices[b];
    if (pa[1] - pb[1]).abs() <= (pa[0] - pb[0]).abs() {
        0
    } else {
        1
    }
}

/// Constraints of the displacement problem: both components clamped on
/// Dirichlet vertices, the normal component eliminated on contact vertices
/// (bilateral contact).  Fails when no Dirichlet edge exists or when a
/// vertex joins contact edges of both orientations.
pub fn state_constraints(mesh: &Mesh) -> Result<Vec<Option<f64>>> {
    let n = mesh.vertex_count();
    let mut constraint: Vec<Option<f64>> = vec![None; 2 * n];
    let mut has_dirichlet = false;
    let mut contact_axis: Vec<Option<usize>> = vec![None; n];
    for e in &mesh.boundary {
        match e.tag {
            BoundaryTag::Dirichlet => {
                has_dirichlet = true;
                for v in [e.a, e.b] {
                    constraint[2 * v] = Some(0.0);
                    constraint[2 * v + 1] = Some(0.0);
                }
            }
            BoundaryTag::Contact => {
                let tangent = contact_tangent_axis(mesh, e.a, e.b);
                for v in [e.a, e.b] {
                    match contact_axis[v] {
                        None => contact_axis[v] = Some(tangent),
                        Some(t) if t == tangent => {}
                        Some(_) => {
                            return Err(Error::Domain(format!(
                                "vertex {v} joins contact edges of both orientations"
                            )));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if !has_dirichlet {
        return Err(Error::Domain(
            "the displacement problem needs a nonempty Dirichlet boundary".into(),
        ));
    }
    for (v, axis) in contact_axis.iter().enumerate() {
        if let Some(t) = axis {
            let normal = 1 - t;
            constraint[2 * v + normal] = Some(0.0);
        }
    }
    Ok(constraint)
}

/// Constraints of the velocity/descent flow: both components clamped on
/// every Dirichlet, Neumann and Contact vertex; only the free boundary and
/// the interior move.
pub fn flow_constraints(mesh: &Mesh) -> Vec<Option<f64>> {
    let fixed = mesh.tagged_vertex_mask(&[
        BoundaryTag::Dirichlet,
        BoundaryTag::Neumann,
        BoundaryTag::Contact,
    ]);
    let mut constraint = vec![None; 2 * mesh.vertex_count()];
    for (v, f) in fixed.iter().enumerate() {
        if *f {
            constraint[2 * v] = Some(0.0);
            constraint[2 * v + 1] = Some(0.0);
        }
    }
    constraint
}

// ---------------------------------------------------------------------------
// Element-level quantities
// ---------------------------------------------------------------------------

/// Gradients of the three P1 basis functions on triangle `t`.
pub fn shape_gradients(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
    let two_area = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
    [
        [(pb[1] - pc[1]) / two_area, (pc[0] - pb[0]) / two_area],
        [(pc[1] - pa[1]) / two_area, (pa[0] - pc[0]) / two_area],
        [(pa[1] - pb[1]) / two_area, (pb[0] - pa[0]) / two_area],
    ]
}

/// Linearized strain of the P1 displacement `u` (full interleaved vector) on
/// triangle `t` (constant per triangle).
pub fn triangle_strain(mesh: &Mesh, t: usize, u: &[f64]) -> Sym2 {
    let grads = shape_gradients(mesh, t);
    let tri = mesh.triangles[t];
    let mut exx = 0.0;
    let mut eyy = 0.0;
    let mut exy = 0.0;
    for k in 0..3 {
        let ux = u[2 * tri[k]];
        let uy = u[2 * tri[k] + 1];
        exx += ux * grads[k][0];
        eyy += uy * grads[k][1];
        exy += 0.5 * (ux * grads[k][1] + uy * grads[k][0]);
    }
    Sym2 { xx: exx, yy: eyy, xy: exy }
}

/// Displacement gradient (not symmetrized) of `u` on triangle `t`:
/// `[[du_x/dx, du_x/dy], [du_y/dx, du_y/dy]]`.
pub fn triangle_displacement_gradient(mesh: &Mesh, t: usize, u: &[f64]) -> [[f64; 2]; 2] {
    let grads = shape_gradients(mesh, t);
    let tri = mesh.triangles[t];
    let mut g = [[0.0; 2]; 2];
    for k in 0..3 {
        let ux = u[2 * tri[k]];
        let uy = u[2 * tri[k] + 1];
        for c in 0..2 {
            g[0][c] += ux * grads[k][c];
            g[1][c] += uy * grads[k][c];
        }
    }
    g
}

/// 6x6 element stiffness of triangle `t` (plane strain, P1).
pub fn element_stiffness(mesh: &Mesh, elast: &Elasticity, t: usize) -> [[f64; 6]; 6] {
    let grads = shape_gradients(mesh, t);
    let area = mesh.triangle_area(t);
    let (la, mu) = (elast.lambda, elast.mu);
    // Voigt D for plane strain: [[la+2mu, la, 0], [la, la+2mu, 0], [0, 0, mu]]
    let mut b = [[0.0; 6]; 3];
    for k in 0..3 {
        b[0][2 * k] = grads[k][0];
        b[1][2 * k + 1] = grads[k][1];
        b[2][2 * k] = grads[k][1];
        b[2][2 * k + 1] = grads[k][0];
    }
    let d = [
        [la + 2.0 * mu, la, 0.0],
        [la, la + 2.0 * mu, 0.0],
        [0.0, 0.0, mu],
    ];
    let mut db = [[0.0; 6]; 3];
    for r in 0..3 {
        for c in 0..6 {
            for k in 0..3 {
                db[r][c] += d[r][k] * b[k][c];
            }
        }
    }
    let mut ke = [[0.0; 6]; 6];
    for r in 0..6 {
        for c in 0..6 {
            let mut s = 0.0;
            for k in 0..3 {
                s += b[k][r] * db[k][c];
            }
            ke[r][c] = area * s;
        }
    }
    ke
}

// ---------------------------------------------------------------------------
// Global assembly
// ---------------------------------------------------------------------------

/// Global elastic stiffness, optionally scaled per triangle by `coeff`
/// (material interpolation / ersatz coefficient).  Coefficients must be
/// strictly positive and finite.
pub fn assemble_stiffness(mesh: &Mesh, elast: &Elasticity, coeff: Option<&[f64]>) -> Result<Coo> {
    if let Some(c) = coeff {
        assert_eq!(c.len(), mesh.triangle_count());
    }
    let mut k = Coo::new(2 * mesh.vertex_count());
    for t in 0..mesh.triangle_count() {
        let scale = match coeff {
            Some(c) => {
                if !(c[t] > 0.0 && c[t].is_finite()) {
                    return Err(Error::Assembly(format!(
                        "stiffness coefficient {} on triangle {t} must be positive and finite",
                        c[t]
                    )));
                }
                c[t]
            }
            None => 1.0,
        };
        let ke = element_stiffness(mesh, elast, t);
        let tri = mesh.triangles[t];
        for r in 0..6 {
            let gi = 2 * tri[r / 2] + r % 2;
            for c in 0..6 {
                let gj = 2 * tri[c / 2] + c % 2;
                k.add(gi, gj, scale * ke[r][c]);
            }
        }
    }
    Ok(k)
}

/// Elastic strain energy `1/2 int coeff * sigma(u) : eps(u)`.
pub fn elastic_energy(mesh: &Mesh, elast: &Elasticity, coeff: Option<&[f64]>, u: &[f64]) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.triangle_count() {
        let scale = coeff.map_or(1.0, |c| c[t]);
        let eps = triangle_strain(mesh, t, u);
        total += scale * mesh.triangle_area(t) * elast.energy_density(&eps);
    }
    total
}

/// Consistent load vector of a constant body force `f`, optionally scaled
/// per triangle (each triangle contributes `coeff * area / 3` per vertex).
pub fn assemble_body_force(mesh: &Mesh, f: [f64; 2], coeff: Option<&[f64]>) -> Vec<f64> {
    let mut load = vec![0.0; 2 * mesh.vertex_count()];
    for t in 0..mesh.triangle_count() {
        let scale = coeff.map_or(1.0, |c| c[t]) * mesh.triangle_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            load[2 * v] += scale * f[0];
            load[2 * v + 1] += scale * f[1];
        }
    }
    load
}

/// Consistent load vector of a constant traction `g` on the Neumann
/// boundary (`g L / 2` per edge endpoint; exact for P1).
pub fn assemble_traction(mesh: &Mesh, g: [f64; 2]) -> Vec<f64> {
    let mut load = vec![0.0; 2 * mesh.vertex_count()];
    for e in &mesh.boundary {
        if e.tag != BoundaryTag::Neumann {
            continue;
        }
        let half = 0.5 * mesh.edge_length(e);
        for v in [e.a, e.b] {
            load[2 * v] += half * g[0];
            load[2 * v + 1] += half * g[1];
        }
    }
    load
}

/// Scalar stiffness (grad-grad) matrix, one degree of freedom per vertex.
pub fn assemble_scalar_laplacian(mesh: &Mesh) -> Coo {
    let mut k = Coo::new(mesh.vertex_count());
    for t in 0..mesh.triangle_count() {
        let grads = shape_gradients(mesh, t);
        let area = mesh.triangle_area(t);
        let tri = mesh.triangles[t];
        for r in 0..3 {
            for c in 0..3 {
                k.add(
                    tri[r],
                    tri[c],
                    area * (grads[r][0] * grads[c][0] + grads[r][1] * grads[c][1]),
                );
            }
        }
    }
    k
}

/// Consistent scalar mass matrix (`area/12 * [[2,1,1],[1,2,1],[1,1,2]]`).
pub fn assemble_scalar_mass(mesh: &Mesh) -> Coo {
    let mut m = Coo::new(mesh.vertex_count());
    for t in 0..mesh.triangle_count() {
        let area = mesh.triangle_area(t);
        let tri = mesh.triangles[t];
        for r in 0..3 {
            for c in 0..3 {
                let w = if r == c { 2.0 } else { 1.0 };
                m.add(tri[r], tri[c], area / 12.0 * w);
            }
        }
    }
    m
}

/// Lumped scalar mass (row sums of the consistent mass: `area/3` per
/// incident triangle).
pub fn lumped_scalar_mass(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.vertex_count()];
    for t in 0..mesh.triangle_count() {
        let third = mesh.triangle_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            m[v] += third;
        }
    }
    m
}

// ---------------------------------------------------------------------------
// Frictional contact terms (regularized, bilateral)
// ---------------------------------------------------------------------------

const GAUSS_2: [(f64, f64); 2] = [
    (-0.577_350_269_189_625_8, 1.0),
    (0.577_350_269_189_625_8, 1.0),
];

/// Accumulate the friction residual `int dj(u_t) phi_i ds` over contact
/// edges into `out` (full interleaved vector), using two-point Gauss
/// quadrature per edge.
pub fn contact_residual(mesh: &Mesh, fp: &FrictionParams, u: &[f64], out: &mut [f64]) {
    if fp.is_zero() {
        return;
    }
    for e in &mesh.boundary {
        if e.tag != BoundaryTag::Contact {
            continue;
        }
        let axis = contact_tangent_axis(mesh, e.a, e.b);
        let (ua, ub) = (u[2 * e.a + axis], u[2 * e.b + axis]);
        let half_len = 0.5 * mesh.edge_length(e);
        for (xi, wgt) in GAUSS_2 {
            let na = 0.5 * (1.0 - xi);
            let nb = 0.5 * (1.0 + xi);
            let slip = na * ua + nb * ub;
            let tau = fp.dj(slip) * wgt * half_len;
            out[2 * e.a + axis] += tau * na;
            out[2 * e.b + axis] += tau * nb;
        }
    }
}

/// Accumulate the friction tangent `int d2j(u_t) phi_i phi_j ds` into `out`.
pub fn contact_tangent(mesh: &Mesh, fp: &FrictionParams, u: &[f64], out: &mut Coo) {
    contact_tangent_impl(mesh, fp, u, out, false);
}

/// Same assembly with the negative (softening) part of the friction
/// curvature dropped, leaving a positive-semidefinite contribution.  Used as
/// a factorization fallback when near-void material under the contact zone
/// lets the softening outweigh the elastic stiffness; the residual is
/// untouched, so the converged solution is identical.
pub fn contact_tangent_positive(mesh: &Mesh, fp: &FrictionParams, u: &[f64], out: &mut Coo) {
    contact_tangent_impl(mesh, fp, u, out, true);
}

fn contact_tangent_impl(
    mesh: &Mesh,
    fp: &FrictionParams,
    u: &[f64],
    out: &mut Coo,
    positive_only: bool,
) {
    if fp.is_zero() {
        return;
    }
    for e in &mesh.boundary {
        if e.tag != BoundaryTag::Contact {
            continue;
        }
        let axis = contact_tangent_axis(mesh, e.a, e.b);
        let (ua, ub) = (u[2 * e.a + axis], u[2 * e.b + axis]);
        let half_len = 0.5 * mesh.edge_length(e);
        let (ia, ib) = (2 * e.a + axis, 2 * e.b + axis);
        for (xi, wgt) in GAUSS_2 {
            let na = 0.5 * (1.0 - xi);
            let nb = 0.5 * (1.0 + xi);
            let slip = na * ua + nb * ub;
            let mut curv = fp.d2j(slip);
            if positive_only {
                curv = curv.max(0.0);
            }
            let d2 = curv * wgt * half_len;
            out.add(ia, ia, d2 * na * na);
            out.add(ia, ib, d2 * na * nb);
            out.add(ib, ia, d2 * nb * na);
            out.add(ib, ib, d2 * nb * nb);
        }
    }
}

/// Friction dissipation `int j(u_t) ds` with the same quadrature as the
/// residual (so the energy functional and its gradient stay consistent).
pub fn contact_dissipation(mesh: &Mesh, fp: &FrictionParams, u: &[f64]) -> f64 {
    if fp.is_zero() {
        return 0.0;
    }
    let mut total = 0.0;
    for e in &mesh.boundary {
        if e.tag != BoundaryTag::Contact {
            continue;
        }
        let axis = contact_tangent_axis(mesh, e.a, e.b);
        let (ua, ub) = (u[2 * e.a + axis], u[2 * e.b + axis]);
        let half_len = 0.5 * mesh.edge_length(e);
        for (xi, wgt) in GAUSS_2 {
            let na = 0.5 * (1.0 - xi);
            let nb = 0.5 * (1.0 + xi);
            total += fp.j(na * ua + nb * ub) * wgt * half_len;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, BoundaryRule, DomainKind, DomainSpec, Side};

    fn unit_square(h: f64, rules: Vec<BoundaryRule>) -> Mesh {
        generate(&DomainSpec { kind: DomainKind::Rectangle { width: 1.0, height: 1.0 }, h, rules })
            .unwrap()
    }

    fn steel_like() -> Elasticity {
        Elasticity::new(1.0, 0.3).unwrap()
    }

    // ---- dense oracle ------------------------------------------------------

    /// Dense symmetric solve by Gaussian elimination with partial pivoting;
    /// independent oracle for the sparse direct solver.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut x = b.to_vec();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
            m.swap(col, piv);
            x.swap(col, piv);
            let d = m[col][col];
            assert!(d.abs() > 1e-14, "singular oracle matrix");
            for row in col + 1..n {
                let f = m[row][col] / d;
                if f == 0.0 {
                    continue;
                }
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                x[row] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            x[col] /= m[col][col];
            for row in 0..col {
                x[row] -= m[row][col] * x[col];
                m[row][col] = 0.0;
            }
        }
        x
    }

    fn coo_to_dense(a: &Coo) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; a.n]; a.n];
        for &(i, j, v) in &a.entries {
            d[i][j] += v;
        }
        d
    }

    #[test]
    fn csr_compression_sums_duplicates() {
        let mut a = Coo::new(3);
        a.add(0, 1, 2.0);
        a.add(0, 1, 3.0);
        a.add(2, 2, 1.0);
        a.add(1, 0, 4.0);
        let csr = a.to_csr();
        assert_eq!(csr.row_ptr, vec![0, 1, 2, 3]);
        assert_eq!(csr.col_idx, vec![1, 0, 2]);
        assert_eq!(csr.values, vec![5.0, 4.0, 1.0]);
        let y = csr.matvec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![10.0, 4.0, 3.0]);
    }

    #[test]
    fn rcm_recovers_banded_order_of_a_path() {
        // path graph 0-1-2-...-9 scrambled by a fixed permutation
        let scramble = [3usize, 7, 1, 9, 0, 5, 8, 2, 6, 4];
        let mut a = Coo::new(10);
        for v in 0..10 {
            a.add(scramble[v], scramble[v], 4.0);
        }
        for v in 0..9 {
            a.add(scramble[v], scramble[v + 1], -1.0);
            a.add(scramble[v + 1], scramble[v], -1.0);
        }
        let solver = SpdSolver::new(&a).unwrap();
        assert_eq!(solver.bandwidth(), 1, "path graph must reorder to bandwidth 1");
        assert_eq!(solver.permutation().len(), 10);
    }

    #[test]
    fn skyline_matches_dense_oracle_on_random_spd() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..10 {
            let n = 5 + trial * 3;
            // A = B^T B + I is SPD; keep B sparse-ish
            let mut dense = vec![vec![0.0; n]; n];
            for _ in 0..3 * n {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                let v: f64 = rng.gen_range(-1.0..1.0);
                dense[i][j] += v;
            }
            let mut spd = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += dense[k][i] * dense[k][j];
                    }
                    spd[i][j] = s + if i == j { 1.0 } else { 0.0 };
                }
            }
            let mut coo = Coo::new(n);
            for i in 0..n {
                for j in 0..n {
                    if spd[i][j] != 0.0 {
                        coo.add(i, j, spd[i][j]);
                    }
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = SpdSolver::new(&coo).unwrap().solve(&b).unwrap();
            let x_ref = dense_solve(&spd, &b);
            for (a, b) in x.iter().zip(&x_ref) {
                assert!((a - b).abs() < 1e-10, "sparse {a} vs dense {b}");
            }
        }
    }

    #[test]
    fn skyline_rejects_indefinite_matrix() {
        let mut a = Coo::new(2);
        a.add(0, 0, 1.0);
        a.add(0, 1, 3.0);
        a.add(1, 0, 3.0);
        a.add(1, 1, 1.0); // eigenvalues 4 and -2
        match SpdSolver::new(&a) {
            Err(Error::Solve(_)) => {}
            other => panic!("expected solve error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn gram_scaled_matches_dense_triple_product() {
        let mesh = unit_square(0.5, vec![]);
        let k = assemble_scalar_laplacian(&mesh).to_csr();
        let w: Vec<f64> = (0..k.n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let g = gram_scaled(&k, &w);
        let dense_k = {
            let mut d = vec![vec![0.0; k.n]; k.n];
            for i in 0..k.n {
                for (j, v) in k.row(i) {
                    d[i][j] += v;
                }
            }
            d
        };
        let gd = coo_to_dense(&g);
        for i in 0..k.n {
            for j in 0..k.n {
                let mut s = 0.0;
                for l in 0..k.n {
                    s += dense_k[l][i] * w[l] * dense_k[l][j];
                }
                assert!((gd[i][j] - s).abs() < 1e-12);
            }
        }
    }

    // ---- elasticity assembly ----------------------------------------------

    #[test]
    fn element_stiffness_annihilates_rigid_motions() {
        let mesh = generate(&DomainSpec {
            kind: DomainKind::SquareWithHole { side: 1.0, center: [0.5, 0.5], radius: 0.2 },
            h: 0.1,
            rules: vec![],
        })
        .unwrap();
        let elast = steel_like();
        for t in (0..mesh.triangle_count()).step_by(17) {
            let ke = element_stiffness(&mesh, &elast, t);
            let tri = mesh.triangles[t];
            // translation x, translation y, infinitesimal rotation
            let modes: [Box<dyn Fn(usize) -> [f64; 2]>; 3] = [
                Box::new(|_| [1.0, 0.0]),
                Box::new(|_| [0.0, 1.0]),
                Box::new(|v| {
                    let p = mesh.vertices[v];
                    [-p[1], p[0]]
                }),
            ];
            for mode in &modes {
                let mut ue = [0.0; 6];
                for k in 0..3 {
                    let m = mode(tri[k]);
                    ue[2 * k] = m[0];
                    ue[2 * k + 1] = m[1];
                }
                for r in 0..6 {
                    let s: f64 = (0..6).map(|c| ke[r][c] * ue[c]).sum();
                    assert!(s.abs() < 1e-12, "rigid mode leaks force {s} on triangle {t}");
                }
            }
        }
    }

    #[test]
    fn uniform_strain_energy_is_exact_on_any_mesh() {
        // u = (x, 0): eps_xx = 1, energy density = (lambda + 2 mu) / 2
        let mesh = generate(&DomainSpec {
            kind: DomainKind::SquareWithHole { side: 1.0, center: [0.5, 0.5], radius: 0.2 },
            h: 0.1,
            rules: vec![],
        })
        .unwrap();
        let elast = steel_like();
        let u: Vec<f64> = mesh
            .vertices
            .iter()
            .flat_map(|p| [p[0], 0.0])
            .collect();
        let k = assemble_stiffness(&mesh, &elast, None).unwrap().to_csr();
        let ku = k.matvec(&u);
        let energy: f64 = 0.5 * u.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>();
        let density = 0.5 * (elast.lambda + 2.0 * elast.mu);
        let expect = density * mesh.area();
        assert!(
            (energy - expect).abs() < 1e-12 * expect.abs(),
            "energy {energy} vs {expect}"
        );
        let direct = elastic_energy(&mesh, &elast, None, &u);
        assert!((direct - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn patch_test_reproduces_linear_displacement() {
        // prescribe u = (0.3 x + 0.1 y, -0.2 x + 0.05 y) on the whole boundary;
        // the interior solution must reproduce it exactly.
        let mesh = unit_square(0.25, vec![
            BoundaryRule { side: Side::Left, span: None, tag: BoundaryTag::Dirichlet },
            BoundaryRule { side: Side::Right, span: None, tag: BoundaryTag::Dirichlet },
            BoundaryRule { side: Side::Bottom, span: None, tag: BoundaryTag::Dirichlet },
            BoundaryRule { side: Side::Top, span: None, tag: BoundaryTag::Dirichlet },
        ]);
        let elast = steel_like();
        let exact = |p: [f64; 2]| [0.3 * p[0] + 0.1 * p[1], -0.2 * p[0] + 0.05 * p[1]];
        let on_boundary = mesh.boundary_vertex_mask();
        let mut constraint = vec![None; 2 * mesh.vertex_count()];
        for v in 0..mesh.vertex_count() {
            if on_boundary[v] {
                let val = exact(mesh.vertices[v]);
                constraint[2 * v] = Some(val[0]);
                constraint[2 * v + 1] = Some(val[1]);
            }
        }
        let dofs = DofMap::from_constraints(constraint);
        let k = assemble_stiffness(&mesh, &elast, None).unwrap();
        let rhs = vec![0.0; 2 * mesh.vertex_count()];
        let (ka, fa) = dofs.reduce_system(&k, &rhs);
        let x = SpdSolver::new(&ka).unwrap().solve(&fa).unwrap();
        let u = dofs.expand(&x);
        for v in 0..mesh.vertex_count() {
            let want = exact(mesh.vertices[v]);
            assert!(
                (u[2 * v] - want[0]).abs() < 1e-11 && (u[2 * v + 1] - want[1]).abs() < 1e-11,
                "vertex {v}: got ({}, {}), want {want:?}",
                u[2 * v],
                u[2 * v + 1]
            );
        }
    }

    #[test]
    fn scalar_laplace_converges_at_second_order() {
        // -Delta u = 2 pi^2 sin(pi x) sin(pi y), u = 0 on the boundary
        let exact = |p: [f64; 2]| (std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin();
        let mut errors = Vec::new();
        for h in [1.0 / 8.0, 1.0 / 16.0] {
            let mesh = unit_square(h, vec![]);
            let k = assemble_scalar_laplacian(&mesh);
            let m = assemble_scalar_mass(&mesh).to_csr();
            let f_nodal: Vec<f64> = mesh
                .vertices
                .iter()
                .map(|&p| 2.0 * std::f64::consts::PI.powi(2) * exact(p))
                .collect();
            let rhs = m.matvec(&f_nodal);
            let on_boundary = mesh.boundary_vertex_mask();
            let constraint: Vec<Option<f64>> = on_boundary
                .iter()
                .map(|&b| if b { Some(0.0) } else { None })
                .collect();
            let dofs = DofMap::from_constraints(constraint);
            let (ka, fa) = dofs.reduce_system(&k, &rhs);
            let x = SpdSolver::new(&ka).unwrap().solve(&fa).unwrap();
            let u = dofs.expand(&x);
            // nodal max error
            let err = mesh
                .vertices
                .iter()
                .enumerate()
                .map(|(v, &p)| (u[v] - exact(p)).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        let rate = (errors[0] / errors[1]).log2();
        assert!(
            (1.7..=2.4).contains(&rate),
            "convergence rate {rate} (errors {errors:?})"
        );
    }

    // ---- loads --------------------------------------------------------------

    #[test]
    fn body_force_total_equals_area_times_force() {
        let mesh = generate(&DomainSpec {
            kind: DomainKind::LShape { outer: 2.0, notch: 1.0 },
            h: 0.25,
            rules: vec![],
        })
        .unwrap();
        let f = [0.0, -0.3];
        let load = assemble_body_force(&mesh, f, None);
        let fx: f64 = load.iter().step_by(2).sum();
        let fy: f64 = load.iter().skip(1).step_by(2).sum();
        assert!(fx.abs() < 1e-13);
        assert!((fy - f[1] * 3.0).abs() < 1e-12, "total fy {fy}");
    }

    #[test]
    fn traction_total_equals_band_length_times_traction() {
        let mesh = unit_square(0.25, vec![
            BoundaryRule { side: Side::Top, span: Some((0.25, 0.75)), tag: BoundaryTag::Neumann },
        ]);
        let g = [0.1, -0.4];
        let load = assemble_traction(&mesh, g);
        let fx: f64 = load.iter().step_by(2).sum();
        let fy: f64 = load.iter().skip(1).step_by(2).sum();
        assert!((fx - 0.5 * g[0]).abs() < 1e-13);
        assert!((fy - 0.5 * g[1]).abs() < 1e-13);
        // interior band node gets a full edge length, band ends get half
        let mid = mesh
            .vertices
            .iter()
            .position(|p| (p[0] - 0.5).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12)
            .unwrap();
        assert!((load[2 * mid] - 0.25 * g[0]).abs() < 1e-13);
    }

    #[test]
    fn mass_matrices_integrate_constants_exactly() {
        let mesh = unit_square(0.3, vec![]);
        let ones = vec![1.0; mesh.vertex_count()];
        let m = assemble_scalar_mass(&mesh).to_csr();
        let total: f64 = m.matvec(&ones).iter().sum();
        assert!((total - mesh.area()).abs() < 1e-13);
        let lumped = lumped_scalar_mass(&mesh);
        let total_l: f64 = lumped.iter().sum();
        assert!((total_l - mesh.area()).abs() < 1e-13);
        // lumped = consistent row sums
        let row_sums = m.matvec(&ones);
        for (a, b) in lumped.iter().zip(&row_sums) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    // ---- contact terms -------------------------------------------------------

    fn contact_square() -> (Mesh, FrictionParams) {
        let mesh = unit_square(0.25, vec![
            BoundaryRule { side: Side::Top, span: None, tag: BoundaryTag::Dirichlet },
            BoundaryRule { side: Side::Bottom, span: None, tag: BoundaryTag::Contact },
        ]);
        let fp = FrictionParams::new(4e-3, 2e-3, 100.0, 1e-3).unwrap();
        (mesh, fp)
    }

    #[test]
    fn contact_residual_of_constant_slip_sums_to_traction_bound() {
        let (mesh, fp) = contact_square();
        let slip = 0.02; // outside the regularization band
        let mut u = vec![0.0; 2 * mesh.vertex_count()];
        for v in 0..mesh.vertex_count() {
            u[2 * v] = slip;
        }
        let mut r = vec![0.0; u.len()];
        contact_residual(&mesh, &fp, &u, &mut r);
        let total: f64 = r.iter().step_by(2).sum();
        let expect = fp.dj(slip) * mesh.boundary_length(BoundaryTag::Contact);
        assert!((total - expect).abs() < 1e-14, "total {total} vs {expect}");
        // y components untouched (bottom edge is horizontal: tangent is x)
        assert!(r.iter().skip(1).step_by(2).all(|&v| v == 0.0));
    }

    #[test]
    fn contact_tangent_of_constant_slip_is_scaled_edge_mass() {
        let (mesh, fp) = contact_square();
        let slip = 0.02;
        let mut u = vec![0.0; 2 * mesh.vertex_count()];
        for v in 0..mesh.vertex_count() {
            u[2 * v] = slip;
        }
        let mut t = Coo::new(u.len());
        contact_tangent(&mesh, &fp, &u, &mut t);
        let d2 = fp.d2j(slip);
        // pick one contact edge, check the 2x2 block = d2 * L/6 * [[2,1],[1,2]]
        let e = mesh
            .boundary
            .iter()
            .find(|e| e.tag == BoundaryTag::Contact)
            .unwrap();
        let len = mesh.edge_length(e);
        let dense = coo_to_dense(&t);
        // the (a, b) coupling comes from this edge alone, so it is the
        // off-diagonal of d2 * L/6 * [[2,1],[1,2]] regardless of neighbors
        let off = dense[2 * e.a][2 * e.b];
        assert!(
            (off - d2 * len / 6.0).abs() < 1e-15,
            "off-diagonal {off} vs {}",
            d2 * len / 6.0
        );
    }

    #[test]
    fn dissipation_gradient_matches_residual() {
        // directional finite difference of the dissipation equals the
        // residual's projection: the discrete energy and its gradient are
        // quadrature-consistent.
        let (mesh, fp) = contact_square();
        let n = 2 * mesh.vertex_count();
        let u: Vec<f64> = (0..n).map(|i| 0.003 * ((i * 37 % 11) as f64 / 11.0 - 0.4)).collect();
        let dir: Vec<f64> = (0..n).map(|i| (i * 17 % 7) as f64 / 7.0 - 0.5).collect();
        let eps = 1e-7;
        let up: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
        let um: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
        let fd = (contact_dissipation(&mesh, &fp, &up) - contact_dissipation(&mesh, &fp, &um))
            / (2.0 * eps);
        let mut r = vec![0.0; n];
        contact_residual(&mesh, &fp, &u, &mut r);
        let dot: f64 = r.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((fd - dot).abs() < 1e-8 * (1.0 + dot.abs()), "fd {fd} vs dot {dot}");
    }

    // ---- constraints ----------------------------------------------------------

    #[test]
    fn state_constraints_eliminate_contact_normal_only() {
        let (mesh, _) = contact_square();
        let constraint = state_constraints(&mesh).unwrap();
        for v in 0..mesh.vertex_count() {
            let p = mesh.vertices[v];
            let on_bottom = p[1].abs() < 1e-12;
            let on_top = (p[1] - 1.0).abs() < 1e-12;
            if on_top {
                assert!(constraint[2 * v].is_some() && constraint[2 * v + 1].is_some());
            } else if on_bottom {
                assert!(constraint[2 * v].is_none(), "tangential dof must stay free");
                assert_eq!(constraint[2 * v + 1], Some(0.0), "normal dof eliminated");
            } else {
                assert!(constraint[2 * v].is_none() && constraint[2 * v + 1].is_none());
            }
        }
    }

    #[test]
    fn state_constraints_require_dirichlet() {
        let mesh = unit_square(0.5, vec![]);
        assert!(matches!(state_constraints(&mesh), Err(Error::Domain(_))));
    }

    #[test]
    fn mixed_orientation_contact_corner_is_rejected() {
        let mesh = unit_square(0.5, vec![
            BoundaryRule { side: Side::Top, span: None, tag: BoundaryTag::Dirichlet },
            BoundaryRule { side: Side::Bottom, span: None, tag: BoundaryTag::Contact },
            BoundaryRule { side: Side::Left, span: None, tag: BoundaryTag::Contact },
        ]);
        assert!(matches!(state_constraints(&mesh), Err(Error::Domain(_))));
    }

    #[test]
    fn reduce_system_moves_prescribed_values_to_rhs() {
        // 2x2: [[2,1],[1,3]] x = [1, 2], x1 prescribed = 5
        let mut a = Coo::new(2);
        a.add(0, 0, 2.0);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        a.add(1, 1, 3.0);
        let dofs = DofMap::from_constraints(vec![None, Some(5.0)]);
        let (ra, rb) = dofs.reduce_system(&a, &[1.0, 2.0]);
        assert_eq!(ra.n, 1);
        let dense = coo_to_dense(&ra);
        assert_eq!(dense[0][0], 2.0);
        assert_eq!(rb, vec![1.0 - 5.0]);
        let x = dofs.expand(&[7.0]);
        assert_eq!(x, vec![7.0, 5.0]);
    }
}
