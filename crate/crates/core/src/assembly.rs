//! P1 finite element assembly of stiffness matrices and load vectors.
//!
//! All element integrals are closed form: gradients of the linear basis are
//! constant per triangle and the material data is constant per triangle.
//! Dirichlet nodes are eliminated, leaving a reduced SPD system over the free
//! nodes (numbered in mesh order).

use crate::error::{Error, Result};
use crate::machine_model::{MachineConfig, Material, Point};
use crate::mesh::{centroid, signed_area, Mesh};

/// Square sparse matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub symmetric: bool,
}

impl SparseMatrix {
    /// Sums duplicate entries and drops the ones that cancel to zero.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>, symmetric: bool) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            debug_assert!(i < nrows && j < ncols);
            if rows.last() == Some(&i) && col_idx.last() == Some(&j) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(i);
                col_idx.push(j);
                values.push(v);
            }
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((i, j), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[i + 1] += 1;
                keep_cols.push(j);
                keep_vals.push(v);
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
            symmetric,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    pub fn scaled(&self, c: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= c);
        m
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Free (non-Dirichlet) numbering of the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    /// `free[node]` is the reduced index, `None` on the Dirichlet boundary.
    pub free: Vec<Option<usize>>,
    pub num_free: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut dirichlet = vec![false; mesh.num_nodes()];
        for &i in &mesh.dirichlet_nodes {
            dirichlet[i] = true;
        }
        let mut next = 0;
        let free = dirichlet
            .iter()
            .map(|&d| {
                if d {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        DofMap { free, num_free: next }
    }

    /// Expands a reduced vector to all nodes (zero on the Dirichlet boundary).
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        self.free.iter().map(|f| f.map_or(0.0, |i| reduced[i])).collect()
    }
}

pub type LoadVector = Vec<f64>;

/// Gradients of the three barycentric functions of a triangle, plus its signed area.
pub fn p1_gradients(p: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let area = signed_area(p[0], p[1], p[2]);
    let two_a = 2.0 * area;
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (b, c) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(b[1] - c[1]) / two_a, (c[0] - b[0]) / two_a];
    }
    (g, area)
}

/// `nu * area * grad(phi_i) . grad(phi_j)` on one triangle.
pub fn local_stiffness(p: [Point; 3], nu: f64) -> Result<[[f64; 3]; 3]> {
    let (g, area) = p1_gradients(p);
    check_area(0, area, p)?;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = nu * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    Ok(k)
}

fn check_area(triangle: usize, area: f64, p: [Point; 3]) -> Result<()> {
    let scale = p
        .iter()
        .flat_map(|a| p.iter().map(move |b| (a[0] - b[0]).hypot(a[1] - b[1])))
        .fold(0.0f64, f64::max);
    if !(area > 1e-14 * scale * scale) {
        return Err(Error::DegenerateTriangle { triangle, area });
    }
    Ok(())
}

/// Per-triangle material, evaluated at the centroid in the subdomain frame.
pub fn element_materials(mesh: &Mesh, cfg: &MachineConfig) -> Result<Vec<Material>> {
    mesh.triangles
        .iter()
        .map(|t| cfg.material_at(centroid(&mesh.nodes, t)))
        .collect()
}

/// Stiffness matrix over all nodes for given per-triangle reluctivities.
pub fn assemble_stiffness_full(mesh: &Mesh, nu: &[f64]) -> Result<SparseMatrix> {
    let n = mesh.num_nodes();
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_points(t);
        let (g, area) = p1_gradients(p);
        check_area(t, area, p)?;
        for i in 0..3 {
            for j in 0..3 {
                let v = nu[t] * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                triplets.push((tri[i], tri[j], v));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, triplets, true))
}

/// Restricts a full-node matrix to the free nodes.
pub fn reduce(full: &SparseMatrix, dofs: &DofMap) -> SparseMatrix {
    let triplets = full
        .triplets()
        .into_iter()
        .filter_map(|(i, j, v)| Some((dofs.free[i]?, dofs.free[j]?, v)))
        .collect();
    SparseMatrix::from_triplets(dofs.num_free, dofs.num_free, triplets, full.symmetric)
}

/// Reduced stiffness matrix `(nu grad a, grad v)` with Dirichlet rows and columns eliminated.
pub fn assemble_stiffness(mesh: &Mesh, cfg: &MachineConfig) -> Result<SparseMatrix> {
    let nu: Vec<f64> = element_materials(mesh, cfg)?.iter().map(|m| m.nu).collect();
    Ok(reduce(&assemble_stiffness_full(mesh, &nu)?, &DofMap::new(mesh)))
}

/// `(j, phi_i)` for per-triangle constant `j`, over all nodes.
pub fn current_load_full(mesh: &Mesh, current: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let share = current[t] * mesh.area(t) / 3.0;
        for &i in tri {
            f[i] += share;
        }
    }
    f
}

/// `-(M_perp, grad phi_i)` for per-triangle constant `M_perp`, over all nodes.
pub fn magnet_load_full(mesh: &Mesh, m_perp: &[[f64; 2]]) -> Vec<f64> {
    let mut f = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let m = m_perp[t];
        if m == [0.0, 0.0] {
            continue;
        }
        let (g, area) = p1_gradients(mesh.triangle_points(t));
        for i in 0..3 {
            f[tri[i]] -= (m[0] * g[i][0] + m[1] * g[i][1]) * area;
        }
    }
    f
}

fn restrict(full: &[f64], dofs: &DofMap) -> LoadVector {
    let mut out = vec![0.0; dofs.num_free];
    for (node, f) in dofs.free.iter().enumerate() {
        if let Some(i) = f {
            out[*i] = full[node];
        }
    }
    out
}

pub fn assemble_current_load(mesh: &Mesh, cfg: &MachineConfig) -> Result<LoadVector> {
    let j: Vec<f64> = element_materials(mesh, cfg)?.iter().map(|m| m.current).collect();
    Ok(restrict(&current_load_full(mesh, &j), &DofMap::new(mesh)))
}

pub fn assemble_magnet_load(mesh: &Mesh, cfg: &MachineConfig) -> Result<LoadVector> {
    let m: Vec<[f64; 2]> = element_materials(mesh, cfg)?.iter().map(|m| m.m_perp).collect();
    Ok(restrict(&magnet_load_full(mesh, &m), &DofMap::new(mesh)))
}
