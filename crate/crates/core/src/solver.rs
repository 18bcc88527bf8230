//! Coupled stator/rotor saddle-point solves.
//!
//! For a rotor angle `alpha` the discrete system reads
//!
//! ```text
//! K_S a_S            + B_S^T lambda         = j_e
//!        K_R a_R     - B_R(alpha)^T lambda  = j_M
//! B_S a_S - B_R(alpha) a_R                  = 0
//! ```
//!
//! with `B_R(alpha) = R(alpha) B_R(0)`. Two strategies are registered: the
//! `monolithic` one factorizes the whole indefinite matrix for every angle and
//! serves as the reference; the `schur` one eliminates the subdomain unknowns
//! once (offline) and then solves only the `(2N + 1)`-dimensional interface
//! system per angle (online).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side as FaerSide};

use crate::assembly::{
    assemble_current_load, assemble_magnet_load, assemble_stiffness, DofMap, LoadVector, SparseMatrix,
};
use crate::error::{Error, Result};
use crate::linalg::{
    mat_t_vec, mat_vec, norm, spd_backends, symmetric_conditioning, CholeskyBackend, Conditioning, SpdBackend,
    SpdFactor,
};
use crate::machine_model::MachineConfig;
use crate::mesh::{build_meshes, extract_trace, Mesh};
use crate::mortar::{assemble_coupling, multiplier_dim, rotation_blocks, CouplingMatrix, ModeBlocks};
use crate::registry::Registry;

/// Condition estimate above which an interface solve is reported as unstable.
pub const INSTABILITY_LIMIT: f64 = 1e12;

/// A coupling matrix together with the subdomain unknown of each column.
#[derive(Debug, Clone)]
pub struct InterfaceCoupling {
    pub matrix: CouplingMatrix,
    pub dof_columns: Vec<usize>,
    pub num_dofs: usize,
}

impl InterfaceCoupling {
    pub fn new(matrix: CouplingMatrix, dofs: &DofMap) -> Result<Self> {
        let dof_columns = matrix
            .node_ids
            .iter()
            .map(|&n| {
                dofs.free[n].ok_or_else(|| Error::Mesh(format!("interface node {n} is on the Dirichlet boundary")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(InterfaceCoupling {
            matrix,
            dof_columns,
            num_dofs: dofs.num_free,
        })
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    /// `B x` for a subdomain vector `x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let trace: Vec<f64> = self.dof_columns.iter().map(|&d| x[d]).collect();
        self.matrix.mul_vec(&trace)
    }

    /// `B^T y` as a subdomain vector.
    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs];
        for (d, v) in self.dof_columns.iter().zip(self.matrix.mul_transpose_vec(y)) {
            out[*d] += v;
        }
        out
    }

    /// `B^T` as a dense `num_dofs x (2N + 1)` matrix.
    pub fn transpose_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.num_dofs, self.nrows());
        for (c, &d) in self.dof_columns.iter().enumerate() {
            for r in 0..self.nrows() {
                m[(d, r)] += self.matrix.get(r, c);
            }
        }
        m
    }

    /// `B X` for a dense `num_dofs x k` matrix `X`.
    pub fn mul_dense(&self, x: &Mat<f64>) -> Mat<f64> {
        let mut out = Mat::zeros(self.nrows(), x.ncols());
        for r in 0..self.nrows() {
            let row = self.matrix.row(r);
            for k in 0..x.ncols() {
                out[(r, k)] = row.iter().zip(&self.dof_columns).map(|(b, &d)| b * x[(d, k)]).sum();
            }
        }
        out
    }

    pub fn rotated(&self, op: &ModeBlocks) -> InterfaceCoupling {
        InterfaceCoupling {
            matrix: self.matrix.left_mul(op),
            ..self.clone()
        }
    }
}

pub struct SubdomainFactors {
    pub stator: Box<dyn SpdFactor>,
    pub rotor: Box<dyn SpdFactor>,
}

/// Angle-independent matrices and vectors of the coupled problem.
pub struct AssembledSystem {
    pub config: MachineConfig,
    pub degree: usize,
    pub rotor_mesh: Mesh,
    pub stator_mesh: Mesh,
    pub rotor_dofs: DofMap,
    pub stator_dofs: DofMap,
    pub k_s: SparseMatrix,
    pub k_r: SparseMatrix,
    pub j_e: LoadVector,
    pub j_m: LoadVector,
    pub b_s: InterfaceCoupling,
    pub b_r0: InterfaceCoupling,
    backend: Arc<dyn SpdBackend>,
    factorizations: AtomicUsize,
    factors: OnceLock<SubdomainFactors>,
    schur: OnceLock<SchurPrecomputation>,
}

impl std::fmt::Debug for AssembledSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AssembledSystem")
            .field("degree", &self.degree)
            .field("stator_dofs", &self.stator_dofs.num_free)
            .field("rotor_dofs", &self.rotor_dofs.num_free)
            .field("backend", &self.backend.name())
            .finish()
    }
}

impl AssembledSystem {
    pub fn new(cfg: &MachineConfig) -> Result<Self> {
        Self::with_backend(cfg, Arc::new(CholeskyBackend))
    }

    pub fn with_backend_name(cfg: &MachineConfig, backend: &str) -> Result<Self> {
        Self::with_backend(cfg, spd_backends().get(backend)?)
    }

    pub fn with_backend(cfg: &MachineConfig, backend: Arc<dyn SpdBackend>) -> Result<Self> {
        let (rotor, stator) = build_meshes(cfg)?;
        Self::from_meshes(cfg, rotor, stator, backend)
    }

    pub fn from_meshes(cfg: &MachineConfig, rotor_mesh: Mesh, stator_mesh: Mesh, backend: Arc<dyn SpdBackend>) -> Result<Self> {
        cfg.validate()?;
        let degree = cfg.multiplier_degree;
        let rotor_dofs = DofMap::new(&rotor_mesh);
        let stator_dofs = DofMap::new(&stator_mesh);
        let rotor_trace = extract_trace(&rotor_mesh)?;
        let stator_trace = extract_trace(&stator_mesh)?;
        let bound = rotor_trace.len().min(stator_trace.len());
        if multiplier_dim(degree) > bound {
            log::warn!(
                "2N + 1 = {} exceeds the smaller interface trace ({bound} nodes); the interface system may be unstable",
                multiplier_dim(degree)
            );
        }
        let b_s = InterfaceCoupling::new(assemble_coupling(&stator_trace, degree, cfg.r_gamma)?, &stator_dofs)?;
        let b_r0 = InterfaceCoupling::new(assemble_coupling(&rotor_trace, degree, cfg.r_gamma)?, &rotor_dofs)?;
        Ok(AssembledSystem {
            config: cfg.clone(),
            degree,
            k_s: assemble_stiffness(&stator_mesh, cfg)?,
            k_r: assemble_stiffness(&rotor_mesh, cfg)?,
            j_e: assemble_current_load(&stator_mesh, cfg)?,
            j_m: assemble_magnet_load(&rotor_mesh, cfg)?,
            rotor_mesh,
            stator_mesh,
            rotor_dofs,
            stator_dofs,
            b_s,
            b_r0,
            backend,
            factorizations: AtomicUsize::new(0),
            factors: OnceLock::new(),
            schur: OnceLock::new(),
        })
    }

    pub fn multiplier_dim(&self) -> usize {
        multiplier_dim(self.degree)
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Number of sparse subdomain factorizations performed so far.
    pub fn factorization_count(&self) -> usize {
        self.factorizations.load(Ordering::SeqCst)
    }

    /// Total number of interface trace unknowns on both sides.
    pub fn trace_dofs(&self) -> (usize, usize) {
        (self.b_s.dof_columns.len(), self.b_r0.dof_columns.len())
    }

    /// Factorizations of `K_S` and `K_R`, computed on first use.
    pub fn factors(&self) -> Result<&SubdomainFactors> {
        if let Some(f) = self.factors.get() {
            return Ok(f);
        }
        let stator = self.backend.factorize(&self.k_s)?;
        self.factorizations.fetch_add(1, Ordering::SeqCst);
        let rotor = self.backend.factorize(&self.k_r)?;
        self.factorizations.fetch_add(1, Ordering::SeqCst);
        // a concurrent caller may have won the race; either value is equivalent
        let _ = self.factors.set(SubdomainFactors { stator, rotor });
        Ok(self.factors.get().expect("factors were just set"))
    }

    /// Cached offline data of the Schur path.
    pub fn schur(&self) -> Result<&SchurPrecomputation> {
        if let Some(p) = self.schur.get() {
            return Ok(p);
        }
        let pre = precompute_schur(self)?;
        let _ = self.schur.set(pre);
        Ok(self.schur.get().expect("precomputation was just set"))
    }

    pub fn rotor_coupling(&self, alpha: f64) -> InterfaceCoupling {
        self.b_r0.rotated(&rotation_blocks(alpha, self.degree))
    }

    /// Relative residuals of the three block equations.
    pub fn residuals(&self, state: &SolutionState) -> BlockResiduals {
        let b_r = self.rotor_coupling(state.alpha);
        let ks = self.k_s.mul_vec(&state.a_s);
        let bs_l = self.b_s.mul_t(&state.lambda);
        let stator: Vec<f64> = (0..ks.len()).map(|i| ks[i] + bs_l[i] - self.j_e[i]).collect();
        let kr = self.k_r.mul_vec(&state.a_r);
        let br_l = b_r.mul_t(&state.lambda);
        let rotor: Vec<f64> = (0..kr.len()).map(|i| kr[i] - br_l[i] - self.j_m[i]).collect();
        let bs_a = self.b_s.mul(&state.a_s);
        let br_a = b_r.mul(&state.a_r);
        let coupling: Vec<f64> = bs_a.iter().zip(&br_a).map(|(a, b)| a - b).collect();
        let rel = |r: &[f64], parts: &[&[f64]]| {
            let scale: f64 = parts.iter().map(|p| norm(p)).sum();
            if scale == 0.0 {
                norm(r)
            } else {
                norm(r) / scale
            }
        };
        BlockResiduals {
            stator: rel(&stator, &[&ks, &bs_l, &self.j_e]),
            rotor: rel(&rotor, &[&kr, &br_l, &self.j_m]),
            coupling: rel(&coupling, &[&bs_a, &br_a]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockResiduals {
    pub stator: f64,
    pub rotor: f64,
    pub coupling: f64,
}

impl BlockResiduals {
    pub fn max(&self) -> f64 {
        self.stator.max(self.rotor).max(self.coupling)
    }
}

/// Coefficient vectors at one rotor angle. `lambda` uses the internal
/// multiplier convention (constant mode is the function 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub alpha: f64,
    pub a_s: Vec<f64>,
    pub a_r: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Offline data: `X = K^-1 B^T`, `y = K^-1 j` and their interface projections.
#[derive(Debug, Clone)]
pub struct SchurPrecomputation {
    pub degree: usize,
    pub x_s: Mat<f64>,
    pub x_r: Mat<f64>,
    pub y_s: Vec<f64>,
    pub y_r: Vec<f64>,
    /// `B_S X_S`.
    pub g_s: Mat<f64>,
    /// `B_R(0) X_R`.
    pub g_r: Mat<f64>,
    /// `B_S y_S`.
    pub h_s: Vec<f64>,
    /// `B_R(0) y_R`.
    pub h_r: Vec<f64>,
}

pub fn precompute_schur(sys: &AssembledSystem) -> Result<SchurPrecomputation> {
    let factors = sys.factors()?;
    let x_s = factors.stator.solve_many(&sys.b_s.transpose_dense())?;
    let x_r = factors.rotor.solve_many(&sys.b_r0.transpose_dense())?;
    let y_s = factors.stator.solve(&sys.j_e)?;
    let y_r = factors.rotor.solve(&sys.j_m)?;
    let g_s = sys.b_s.mul_dense(&x_s);
    let g_r = sys.b_r0.mul_dense(&x_r);
    let h_s = sys.b_s.mul(&y_s);
    let h_r = sys.b_r0.mul(&y_r);
    Ok(SchurPrecomputation {
        degree: sys.degree,
        x_s,
        x_r,
        y_s,
        y_r,
        g_s,
        g_r,
        h_s,
        h_r,
    })
}

fn congruence(r: &ModeBlocks, g: &Mat<f64>) -> Mat<f64> {
    // R G R^T, applied column- then row-wise
    let n = g.nrows();
    let mut tmp = Mat::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| g[(i, j)]).collect();
        for (i, v) in r.apply(&col).into_iter().enumerate() {
            tmp[(i, j)] = v;
        }
    }
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| tmp[(i, j)]).collect();
        for (j, v) in r.apply(&row).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

impl SchurPrecomputation {
    pub fn dim(&self) -> usize {
        multiplier_dim(self.degree)
    }

    /// `K_int(alpha) = G_S + R G_R R^T` and `f_int(alpha) = B_S y_S - R B_R(0) y_R`.
    pub fn interface_system(&self, alpha: f64) -> (Mat<f64>, Vec<f64>) {
        let r = rotation_blocks(alpha, self.degree);
        let rot = congruence(&r, &self.g_r);
        let k = Mat::from_fn(self.dim(), self.dim(), |i, j| self.g_s[(i, j)] + rot[(i, j)]);
        let rh = r.apply(&self.h_r);
        let f = self.h_s.iter().zip(&rh).map(|(a, b)| a - b).collect();
        (k, f)
    }

    pub fn interface_conditioning(&self, alpha: f64) -> Result<Conditioning> {
        symmetric_conditioning(&self.interface_system(alpha).0)
    }

    /// Solves `K_int(alpha) x = rhs`, refusing ill-conditioned interface matrices.
    pub fn solve_interface_rhs(&self, alpha: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let (k, _) = self.interface_system(alpha);
        solve_checked(&k, rhs)
    }
}

fn solve_checked(k: &Mat<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let cond = symmetric_conditioning(k)?;
    if !(cond.condition <= INSTABILITY_LIMIT) {
        return Err(Error::Instability {
            condition: cond.condition,
            limit: INSTABILITY_LIMIT,
        });
    }
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = match k.llt(FaerSide::Lower) {
        Ok(llt) => llt.solve(&b),
        Err(_) => k.partial_piv_lu().solve(&b),
    };
    Ok((0..rhs.len()).map(|i| x[(i, 0)]).collect())
}

/// Multiplier coefficients from the interface system at `alpha`.
pub fn solve_interface(pre: &SchurPrecomputation, alpha: f64) -> Result<Vec<f64>> {
    let (k, f) = pre.interface_system(alpha);
    solve_checked(&k, &f)
}

/// Subdomain coefficients from a multiplier: `a_S = y_S - X_S lambda`,
/// `a_R = y_R + X_R R(alpha)^T lambda`.
pub fn reconstruct(pre: &SchurPrecomputation, lambda: &[f64], alpha: f64) -> SolutionState {
    let xs_l = mat_vec(&pre.x_s, lambda);
    let rt_l = rotation_blocks(alpha, pre.degree).apply_transpose(lambda);
    let xr_l = mat_vec(&pre.x_r, &rt_l);
    SolutionState {
        alpha,
        a_s: pre.y_s.iter().zip(&xs_l).map(|(y, x)| y - x).collect(),
        a_r: pre.y_r.iter().zip(&xr_l).map(|(y, x)| y + x).collect(),
        lambda: lambda.to_vec(),
    }
}

/// Reference solve of the full indefinite system with a sparse LU factorization.
pub fn solve_monolithic(sys: &AssembledSystem, alpha: f64) -> Result<SolutionState> {
    let (ns, nr, m) = (sys.k_s.nrows, sys.k_r.nrows, sys.multiplier_dim());
    let n = ns + nr + m;
    let b_r = sys.rotor_coupling(alpha);
    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(sys.k_s.nnz() + sys.k_r.nnz());
    for (i, j, v) in sys.k_s.triplets() {
        triplets.push(Triplet::new(i, j, v));
    }
    for (i, j, v) in sys.k_r.triplets() {
        triplets.push(Triplet::new(ns + i, ns + j, v));
    }
    for (coupling, offset, sign) in [(&sys.b_s, 0, 1.0), (&b_r, ns, -1.0)] {
        for r in 0..m {
            for (c, &d) in coupling.dof_columns.iter().enumerate() {
                let v = sign * coupling.matrix.get(r, c);
                if v != 0.0 {
                    triplets.push(Triplet::new(ns + nr + r, offset + d, v));
                    triplets.push(Triplet::new(offset + d, ns + nr + r, v));
                }
            }
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let symbolic = SymbolicLu::try_new(a.symbolic()).map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let lu = Lu::try_new_with_symbolic(symbolic, a.as_ref()).map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let condition = saddle_condition_estimate(&a, &lu);
    if !(condition <= SADDLE_CONDITION_LIMIT) {
        return Err(Error::Instability {
            condition,
            limit: SADDLE_CONDITION_LIMIT,
        });
    }
    let mut rhs = Mat::zeros(n, 1);
    for i in 0..ns {
        rhs[(i, 0)] = sys.j_e[i];
    }
    for i in 0..nr {
        rhs[(ns + i, 0)] = sys.j_m[i];
    }
    let x = lu.solve(&rhs);
    Ok(SolutionState {
        alpha,
        a_s: (0..ns).map(|i| x[(i, 0)]).collect(),
        a_r: (0..nr).map(|i| x[(ns + i, 0)]).collect(),
        lambda: (0..m).map(|i| x[(ns + nr + i, 0)]).collect(),
    })
}

/// Limit on the equilibrated 1-norm condition estimate of the saddle matrix.
pub const SADDLE_CONDITION_LIMIT: f64 = 1e14;

/// 1-norm condition estimate (Hager's method) of the symmetrically
/// equilibrated saddle matrix `D A D`, with `D_ii = 1 / sqrt(max_j |A_ij|)`.
fn saddle_condition_estimate(a: &SparseColMat<usize, f64>, lu: &Lu<usize, f64>) -> f64 {
    let n = a.nrows();
    let mut row_max = vec![0.0f64; n];
    let mut col_sums = vec![0.0f64; n];
    let a_ref = a.as_ref();
    let col_ptr = a_ref.symbolic().col_ptr();
    let row_idx = a_ref.symbolic().row_idx();
    let vals = a_ref.val();
    for j in 0..n {
        for k in col_ptr[j]..col_ptr[j + 1] {
            row_max[row_idx[k]] = row_max[row_idx[k]].max(vals[k].abs());
        }
    }
    if row_max.contains(&0.0) {
        return f64::INFINITY;
    }
    let d: Vec<f64> = row_max.iter().map(|v| 1.0 / v.sqrt()).collect();
    for j in 0..n {
        for k in col_ptr[j]..col_ptr[j + 1] {
            col_sums[j] += (d[row_idx[k]] * vals[k] * d[j]).abs();
        }
    }
    let norm_a = col_sums.iter().cloned().fold(0.0, f64::max);
    // (D A D)^-1 x = D^-1 A^-1 D^-1 x; the matrix is symmetric so A^-T = A^-1
    let apply_inv = |x: &[f64]| -> Vec<f64> {
        let b = Mat::from_fn(n, 1, |i, _| x[i] / d[i]);
        let y = lu.solve(&b);
        (0..n).map(|i| y[(i, 0)] / d[i]).collect()
    };
    let mut x = vec![1.0 / n as f64; n];
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = apply_inv(&x);
        if y.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        estimate = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let z = apply_inv(&xi);
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs()))
            .fold((0, 0.0), |acc, e| if e.1 > acc.1 { e } else { acc });
        let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if zmax <= zx {
            break;
        }
        x = vec![0.0; n];
        x[jmax] = 1.0;
    }
    norm_a * estimate
}

/// A way of solving the coupled system at one angle.
pub trait SaddleSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Angle-independent work, done once before a sweep.
    fn prepare(&self, _sys: &AssembledSystem) -> Result<()> {
        Ok(())
    }

    fn solve(&self, sys: &AssembledSystem, alpha: f64) -> Result<SolutionState>;
}

pub struct MonolithicSolver;

impl SaddleSolver for MonolithicSolver {
    fn name(&self) -> &'static str {
        "monolithic"
    }

    fn solve(&self, sys: &AssembledSystem, alpha: f64) -> Result<SolutionState> {
        solve_monolithic(sys, alpha)
    }
}

pub struct SchurSolver;

impl SaddleSolver for SchurSolver {
    fn name(&self) -> &'static str {
        "schur"
    }

    fn prepare(&self, sys: &AssembledSystem) -> Result<()> {
        sys.schur().map(|_| ())
    }

    fn solve(&self, sys: &AssembledSystem, alpha: f64) -> Result<SolutionState> {
        let pre = sys.schur()?;
        let lambda = solve_interface(pre, alpha)?;
        Ok(reconstruct(pre, &lambda, alpha))
    }
}

pub fn saddle_solvers() -> Registry<dyn SaddleSolver> {
    let mut r: Registry<dyn SaddleSolver> = Registry::new("saddle-point strategy");
    r.register("schur", Arc::new(SchurSolver));
    r.register("monolithic", Arc::new(MonolithicSolver));
    r
}

/// `B_R(0)^T`-weighted helper used by the derivative system: `X_R v`.
pub fn rotor_response(pre: &SchurPrecomputation, v: &[f64]) -> Vec<f64> {
    mat_vec(&pre.x_r, v)
}

/// `X_S^T w`, occasionally useful for adjoint-style checks.
pub fn stator_response_t(pre: &SchurPrecomputation, w: &[f64]) -> Vec<f64> {
    mat_t_vec(&pre.x_s, w)
}
