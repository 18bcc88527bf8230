//! Harmonic mortar coupling: trigonometric multipliers on the coupling circle.
//!
//! Multiplier coefficients are stored in the order
//! `[const, cos 1, sin 1, cos 2, sin 2, ..., cos N, sin N]` (length `2N + 1`).
//! Internally the constant mode is the function `1`. Reported coefficients
//! follow the `c_0 / 2 + sum c_n cos(n theta) + d_n sin(n theta)` convention,
//! so the reported `c_0` is twice the internal constant coefficient.
//!
//! The coupling matrix entry for mode row `m` and trace column `j` is
//! `r_gamma * integral_0^{2 pi} trig_m(theta) hat_j(theta) dtheta`, where
//! `hat_j` is the nodal basis that is linear in the angle between trace nodes.
//! Rotating a trace by `alpha` multiplies the matrix from the left by the
//! block-diagonal rotation `R(alpha)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::machine_model::Side;
use crate::mesh::InterfaceTrace;

pub fn multiplier_dim(degree: usize) -> usize {
    2 * degree + 1
}

/// Row of the cosine coefficient of mode `n >= 1`; the sine coefficient follows it.
pub fn cos_row(n: usize) -> usize {
    2 * n - 1
}

/// Mode number of a multiplier row.
pub fn mode_of_row(row: usize) -> usize {
    row.div_ceil(2)
}

/// Value of a multiplier given in the reported `c_0 / 2` convention.
pub fn eval_multiplier(coeffs: &[f64], theta: f64) -> f64 {
    assert!(coeffs.len() % 2 == 1, "multiplier coefficient vector must have odd length");
    let degree = coeffs.len() / 2;
    let mut v = 0.5 * coeffs[0];
    for n in 1..=degree {
        let (s, c) = (n as f64 * theta).sin_cos();
        v += coeffs[cos_row(n)] * c + coeffs[cos_row(n) + 1] * s;
    }
    v
}

pub fn to_reported(internal: &[f64]) -> Vec<f64> {
    let mut out = internal.to_vec();
    out[0] *= 2.0;
    out
}

pub fn from_reported(reported: &[f64]) -> Vec<f64> {
    let mut out = reported.to_vec();
    out[0] *= 0.5;
    out
}

/// Amplitudes `C_n = sqrt(c_n^2 + d_n^2)`, with `C_0 = |c_0 / 2|`.
pub fn mode_amplitudes(internal: &[f64]) -> Vec<f64> {
    let degree = internal.len() / 2;
    let mut out = Vec::with_capacity(degree + 1);
    out.push(internal[0].abs());
    for n in 1..=degree {
        out.push(internal[cos_row(n)].hypot(internal[cos_row(n) + 1]));
    }
    out
}

/// Coefficients of `d lambda / d theta` (internal convention).
pub fn multiplier_derivative(internal: &[f64]) -> Vec<f64> {
    let degree = internal.len() / 2;
    let mut out = vec![0.0; internal.len()];
    for n in 1..=degree {
        let (c, d) = (internal[cos_row(n)], internal[cos_row(n) + 1]);
        out[cos_row(n)] = n as f64 * d;
        out[cos_row(n) + 1] = -(n as f64) * c;
    }
    out
}

/// `(sin u - u cos u) / u^2`, accurate for small `u`.
fn odd_moment_factor(u: f64) -> f64 {
    if u.abs() < 1.0 {
        // sum_k (-1)^(k+1) 2k u^(2k-1) / (2k+1)!
        let u2 = u * u;
        let mut term = u / 3.0;
        let mut sum = term;
        let mut k = 1.0;
        while term.abs() > 1e-18 * sum.abs() {
            // ratio of consecutive terms
            term *= -u2 * (k + 1.0) / (k * (2.0 * k + 2.0) * (2.0 * k + 3.0));
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        (u.sin() - u * u.cos()) / (u * u)
    }
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// `(integral cos(n t) L(t) dt, integral sin(n t) L(t) dt)` over `[a, b]`,
/// for `L` linear with `L(a) = fa`, `L(b) = fb`.
pub fn panel_moments(n: usize, a: f64, b: f64, fa: f64, fb: f64) -> (f64, f64) {
    let h = b - a;
    let mean = 0.5 * (fa + fb);
    if n == 0 {
        return (mean * h, 0.0);
    }
    let nf = n as f64;
    let mid = 0.5 * (a + b);
    let u = 0.5 * nf * h;
    let even = h * sinc(u);
    // (fb - fa) / h * integral s sin(n s) ds over [-h/2, h/2]
    let odd = (fb - fa) * 0.5 * h * odd_moment_factor(u);
    let (s, c) = (nf * mid).sin_cos();
    (mean * even * c - odd * s, mean * even * s + odd * c)
}

/// Dense `(2N + 1) x K` coupling matrix of one trace, columns in trace order.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub degree: usize,
    pub side: Side,
    pub radius: f64,
    /// Mesh node of each column.
    pub node_ids: Vec<usize>,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl CouplingMatrix {
    pub fn nrows(&self) -> usize {
        multiplier_dim(self.degree)
    }

    pub fn ncols(&self) -> usize {
        self.node_ids.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.ncols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let k = self.ncols();
        &self.data[row * k..(row + 1) * k]
    }

    /// Applies the matrix to trace values (one per column).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols()];
        for (r, &yr) in y.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a * yr;
            }
        }
        out
    }

    /// Column of a given mesh node, if the node is on the trace.
    pub fn column_of(&self, node: usize) -> Option<usize> {
        self.node_ids.iter().position(|&n| n == node)
    }

    /// Rows transformed by a block operator: `op * self`.
    pub fn left_mul(&self, op: &ModeBlocks) -> CouplingMatrix {
        assert_eq!(op.degree, self.degree);
        let k = self.ncols();
        let mut data = vec![0.0; self.data.len()];
        for j in 0..k {
            let col: Vec<f64> = (0..self.nrows()).map(|r| self.data[r * k + j]).collect();
            for (r, v) in op.apply(&col).into_iter().enumerate() {
                data[r * k + j] = v;
            }
        }
        CouplingMatrix { data, ..self.clone() }
    }
}

/// Coupling matrix by closed-form integration of trigonometric modes against
/// the piecewise-linear trace basis.
pub fn assemble_coupling(trace: &InterfaceTrace, degree: usize, radius: f64) -> Result<CouplingMatrix> {
    let k = trace.len();
    if k < 3 {
        return Err(Error::Mesh(format!("coupling needs at least 3 trace nodes, found {k}")));
    }
    let rows = multiplier_dim(degree);
    let mut data = vec![0.0; rows * k];
    let theta = &trace.angles;
    for j in 0..k {
        let left = if j == 0 { theta[k - 1] - 2.0 * PI } else { theta[j - 1] };
        let right = if j + 1 == k { theta[0] + 2.0 * PI } else { theta[j + 1] };
        // the wrap-around panel is integrated on the shifted interval; the integrand is 2 pi periodic
        let panels = [(left, theta[j], 0.0, 1.0), (theta[j], right, 1.0, 0.0)];
        for n in 0..=degree {
            let (mut c, mut s) = (0.0, 0.0);
            for &(a, b, fa, fb) in &panels {
                if b - a < 1e-14 {
                    continue;
                }
                let (pc, ps) = panel_moments(n, a, b, fa, fb);
                c += pc;
                s += ps;
            }
            if n == 0 {
                data[j] = radius * c;
            } else {
                data[cos_row(n) * k + j] = radius * c;
                data[(cos_row(n) + 1) * k + j] = radius * s;
            }
        }
    }
    Ok(CouplingMatrix {
        degree,
        side: trace.side,
        radius,
        node_ids: trace.node_ids.clone(),
        data,
    })
}

/// Block-diagonal operator on multiplier coefficients: a scalar on the
/// constant mode and one 2x2 block per mode acting on `(cos n, sin n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBlocks {
    pub degree: usize,
    pub constant: f64,
    pub blocks: Vec<[[f64; 2]; 2]>,
}

pub type RotationBlocks = ModeBlocks;

impl ModeBlocks {
    pub fn identity(degree: usize) -> Self {
        ModeBlocks {
            degree,
            constant: 1.0,
            blocks: vec![[[1.0, 0.0], [0.0, 1.0]]; degree],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), multiplier_dim(self.degree));
        let mut y = vec![0.0; x.len()];
        y[0] = self.constant * x[0];
        for (i, b) in self.blocks.iter().enumerate() {
            let r = cos_row(i + 1);
            y[r] = b[0][0] * x[r] + b[0][1] * x[r + 1];
            y[r + 1] = b[1][0] * x[r] + b[1][1] * x[r + 1];
        }
        y
    }

    pub fn transpose(&self) -> Self {
        ModeBlocks {
            degree: self.degree,
            constant: self.constant,
            blocks: self.blocks.iter().map(|b| [[b[0][0], b[1][0]], [b[0][1], b[1][1]]]).collect(),
        }
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.transpose().apply(x)
    }

    /// `self * other`.
    pub fn compose(&self, other: &ModeBlocks) -> Self {
        assert_eq!(self.degree, other.degree);
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                let mut c = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                    }
                }
                c
            })
            .collect();
        ModeBlocks {
            degree: self.degree,
            constant: self.constant * other.constant,
            blocks,
        }
    }

    /// Dense row-major matrix.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = multiplier_dim(self.degree);
        let mut m = vec![vec![0.0; n]; n];
        m[0][0] = self.constant;
        for (i, b) in self.blocks.iter().enumerate() {
            let r = cos_row(i + 1);
            for a in 0..2 {
                for c in 0..2 {
                    m[r + a][r + c] = b[a][c];
                }
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &ModeBlocks) -> f64 {
        let mut d = (self.constant - other.constant).abs();
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            for i in 0..2 {
                for j in 0..2 {
                    d = d.max((a[i][j] - b[i][j]).abs());
                }
            }
        }
        d
    }
}

/// `R(alpha)`: the change of multiplier coefficients under a rotation by `alpha`.
pub fn rotation_blocks(alpha: f64, degree: usize) -> RotationBlocks {
    ModeBlocks {
        degree,
        constant: 1.0,
        blocks: (1..=degree)
            .map(|n| {
                let (s, c) = (n as f64 * alpha).sin_cos();
                [[c, -s], [s, c]]
            })
            .collect(),
    }
}

/// `R'(alpha)`, the entrywise derivative of `rotation_blocks`.
pub fn rotation_derivative(alpha: f64, degree: usize) -> ModeBlocks {
    ModeBlocks {
        degree,
        constant: 0.0,
        blocks: (1..=degree)
            .map(|n| {
                let nf = n as f64;
                let (s, c) = (nf * alpha).sin_cos();
                [[-nf * s, -nf * c], [nf * c, -nf * s]]
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_trace(k: usize, offset: f64) -> InterfaceTrace {
        InterfaceTrace {
            side: Side::Rotor,
            radius: 1.0,
            angles: (0..k).map(|i| offset + 2.0 * PI * i as f64 / k as f64).collect(),
            node_ids: (0..k).collect(),
        }
    }

    /// Adaptive Simpson on `[a, b]`.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
            }
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
    }

    #[test]
    fn small_argument_factor_matches_direct_formula() {
        for &u in &[0.9f64, 0.5, 0.1] {
            let direct = (u.sin() - u * u.cos()) / (u * u);
            assert!((odd_moment_factor(u) - direct).abs() < 1e-15);
        }
        assert!((odd_moment_factor(1e-8) - 1e-8 / 3.0).abs() < 1e-24);
    }

    #[test]
    fn constant_row_sums_to_circumference() {
        let tr = uniform_trace(13, 0.2);
        let b = assemble_coupling(&tr, 4, 0.7).unwrap();
        let s: f64 = b.row(0).iter().sum();
        assert!((s - 2.0 * PI * 0.7).abs() < 1e-14);
    }

    #[test]
    fn cos1_entry_at_node_zero_matches_quadrature() {
        let tr = uniform_trace(8, 0.0);
        let b = assemble_coupling(&tr, 1, 1.0).unwrap();
        let h = PI / 4.0;
        let hat = |t: f64| (1.0 - t.abs() / h).max(0.0);
        let q = simpson(&|t: f64| t.cos() * hat(t), -h, 0.0, 1e-15) + simpson(&|t: f64| t.cos() * hat(t), 0.0, h, 1e-15);
        assert!((b.get(cos_row(1), 0) - q).abs() < 1e-12);
        // closed form: h sinc^2(h/2)
        let exact = h * ((h / 2.0).sin() / (h / 2.0)).powi(2);
        assert!((b.get(cos_row(1), 0) - exact).abs() < 1e-15);
    }

    #[test]
    fn sine_rows_vanish_on_symmetric_hat() {
        let tr = uniform_trace(16, 0.0);
        let b = assemble_coupling(&tr, 7, 1.3).unwrap();
        for n in 1..=7 {
            assert!(b.get(cos_row(n) + 1, 0).abs() <= 1e-15 * b.get(0, 0));
        }
    }

    #[test]
    fn too_few_nodes_is_an_error() {
        let tr = uniform_trace(2, 0.0);
        assert!(assemble_coupling(&tr, 1, 1.0).is_err());
    }

    #[test]
    fn rotation_block_basics() {
        let r0 = rotation_blocks(0.0, 3);
        assert_eq!(r0, ModeBlocks::identity(3));
        let q = rotation_blocks(PI / 2.0, 1);
        let b = q.blocks[0];
        assert!(b[0][0].abs() < 1e-16 && (b[0][1] + 1.0).abs() < 1e-16);
        assert!((b[1][0] - 1.0).abs() < 1e-16 && b[1][1].abs() < 1e-16);
        let d = rotation_derivative(0.0, 2);
        assert_eq!(d.constant, 0.0);
        assert_eq!(d.blocks[1], [[-0.0, -2.0], [2.0, -0.0]]);
        assert_eq!(rotation_derivative(1.234, 4).constant, 0.0);
    }

    proptest! {
        #[test]
        fn rotations_compose(a in -7.0f64..7.0, b in -7.0f64..7.0) {
            let n = 6;
            let lhs = rotation_blocks(a, n).compose(&rotation_blocks(b, n));
            prop_assert!(lhs.max_abs_diff(&rotation_blocks(a + b, n)) < 1e-14 * 8.0);
            let rtr = rotation_blocks(a, n).transpose().compose(&rotation_blocks(a, n));
            prop_assert!(rtr.max_abs_diff(&ModeBlocks::identity(n)) < 1e-15 * 4.0);
        }

        #[test]
        fn multiplier_is_periodic(c in proptest::collection::vec(-3.0f64..3.0, 9), t in -4.0f64..4.0) {
            let v0 = eval_multiplier(&c, t);
            let v1 = eval_multiplier(&c, t + 2.0 * PI);
            prop_assert!((v0 - v1).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_differences_at_second_order() {
        let n = 5;
        let alpha = 0.37;
        let exact = rotation_derivative(alpha, n);
        let mut errs = Vec::new();
        for &eps in &[1e-2, 1e-3] {
            let plus = rotation_blocks(alpha + eps, n);
            let minus = rotation_blocks(alpha - eps, n);
            let fd = ModeBlocks {
                degree: n,
                constant: (plus.constant - minus.constant) / (2.0 * eps),
                blocks: plus
                    .blocks
                    .iter()
                    .zip(&minus.blocks)
                    .map(|(p, m)| {
                        let mut b = [[0.0; 2]; 2];
                        for i in 0..2 {
                            for j in 0..2 {
                                b[i][j] = (p[i][j] - m[i][j]) / (2.0 * eps);
                            }
                        }
                        b
                    })
                    .collect(),
            };
            errs.push(fd.max_abs_diff(&exact));
        }
        let order = (errs[0] / errs[1]).log10();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn eval_conventions() {
        assert_eq!(eval_multiplier(&[2.0, 0.0, 0.0], 0.4), 1.0);
        assert_eq!(eval_multiplier(&[0.0, 1.0, 0.0], 0.0), 1.0);
        let internal = [0.5, 1.0, 2.0];
        assert_eq!(to_reported(&internal), vec![1.0, 1.0, 2.0]);
        assert_eq!(from_reported(&to_reported(&internal)), internal.to_vec());
    }

    #[test]
    fn multiplier_derivative_matches_finite_difference() {
        let c = [0.3, 1.0, -0.5, 0.25, 2.0];
        let dc = multiplier_derivative(&from_reported(&c));
        let t = 0.9;
        let h = 1e-5;
        let fd = (eval_multiplier(&c, t + h) - eval_multiplier(&c, t - h)) / (2.0 * h);
        assert!((eval_multiplier(&to_reported(&dc), t) - fd).abs() < 1e-8);
    }

    #[test]
    fn rotating_the_trace_rotates_the_rows() {
        let tr = uniform_trace(24, 0.0);
        let b0 = assemble_coupling(&tr, 10, 1.0).unwrap();
        for &alpha in &[0.1, 1.7, 4.0, -0.3] {
            let direct = assemble_coupling(&tr.rotated(alpha), 10, 1.0).unwrap();
            let via = b0.left_mul(&rotation_blocks(alpha, 10));
            for (j, &node) in direct.node_ids.iter().enumerate() {
                let c = via.column_of(node).unwrap();
                for r in 0..direct.nrows() {
                    assert!((direct.get(r, j) - via.get(r, c)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn row_rank_follows_the_aliasing_bound() {
        for (k, n) in [(8usize, 3usize), (8, 4), (9, 4), (12, 7)] {
            let b = assemble_coupling(&uniform_trace(k, 0.0), n, 1.0).unwrap();
            let m = faer::Mat::from_fn(b.nrows(), b.ncols(), |i, j| b.get(i, j));
            let sv = m.singular_values().unwrap();
            let tol = 1e-10 * sv[0];
            let rank = sv.iter().filter(|&&s| s > tol).count();
            assert_eq!(rank, multiplier_dim(n).min(k), "K={k}, N={n}");
        }
    }
}
