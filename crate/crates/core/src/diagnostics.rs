//! Energy, torque, the angle-derivative system and torque-curve analysis.
//!
//! Torque sign convention: positive counterclockwise about the +z axis,
//! reported in N·m for the configured axial length.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inner, mat_vec};
use crate::machine_model::MachineConfig;
use crate::mortar::{mode_amplitudes, multiplier_derivative, rotation_blocks, rotation_derivative};
use crate::solver::{AssembledSystem, SaddleSolver, SchurPrecomputation, SolutionState};

/// `E = ½ a_S^T K_S a_S + ½ a_R^T K_R a_R − j_M^T a_R`, in J/m.
pub fn compute_energy(sys: &AssembledSystem, state: &SolutionState) -> f64 {
    0.5 * sys.k_s.quad_form(&state.a_s) + 0.5 * sys.k_r.quad_form(&state.a_r) - inner(&sys.j_m, &state.a_r)
}

/// `λ^T B_R'(α) a_R` per unit length.
pub fn torque_per_length(sys: &AssembledSystem, state: &SolutionState) -> f64 {
    let b_a = sys.b_r0.mul(&state.a_r);
    let db_a = rotation_derivative(state.alpha, sys.degree).apply(&b_a);
    inner(&state.lambda, &db_a)
}

/// Torque in N·m: `L · λ^T R'(α) B_R(0) a_R`.
pub fn compute_torque(sys: &AssembledSystem, state: &SolutionState) -> f64 {
    sys.config.axial_length * torque_per_length(sys, state)
}

/// The same torque written through the angular derivative of the multiplier,
/// `−L (Dλ)^T B_R(α) a_R` with `D` the mode-derivative operator.
pub fn compute_torque_dual(sys: &AssembledSystem, state: &SolutionState) -> f64 {
    let b_a = sys.rotor_coupling(state.alpha).mul(&state.a_r);
    sys.config.axial_length * inner(&multiplier_derivative(&state.lambda), &b_a)
}

/// `d/dα` of a solution state.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeState {
    pub alpha: f64,
    pub a_s: Vec<f64>,
    pub a_r: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Solves the differentiated saddle system
///
/// ```text
/// K_S a_S' + B_S^T λ'            = 0
/// K_R a_R' − B_R(α)^T λ'         = B_R'(α)^T λ
/// B_S a_S' − B_R(α) a_R'         = B_R'(α) a_R
/// ```
///
/// through the interface matrix already available from the Schur precomputation.
pub fn solve_derivative_system(
    sys: &AssembledSystem,
    pre: &SchurPrecomputation,
    state: &SolutionState,
) -> Result<DerivativeState> {
    let (alpha, degree) = (state.alpha, sys.degree);
    let r = rotation_blocks(alpha, degree);
    let dr = rotation_derivative(alpha, degree);
    let drt_l = dr.apply_transpose(&state.lambda);
    let coupled = r.apply(&mat_vec(&pre.g_r, &drt_l));
    let moved = dr.apply(&sys.b_r0.mul(&state.a_r));
    let rhs: Vec<f64> = moved.iter().zip(&coupled).map(|(a, b)| -(a + b)).collect();
    let dlambda = pre.solve_interface_rhs(alpha, &rhs)?;
    let a_s = mat_vec(&pre.x_s, &dlambda).into_iter().map(|v| -v).collect();
    let rt_dl = r.apply_transpose(&dlambda);
    let w: Vec<f64> = drt_l.iter().zip(&rt_dl).map(|(a, b)| a + b).collect();
    Ok(DerivativeState {
        alpha,
        a_s,
        a_r: mat_vec(&pre.x_r, &w),
        lambda: dlambda,
    })
}

/// Terms of the discrete energy balance at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    /// `dE/dα` from the derivative system.
    pub energy_rate: f64,
    /// `j_e^T a_S'`.
    pub electric_power: f64,
    /// Torque per unit length.
    pub torque: f64,
}

impl EnergyBalance {
    pub fn residual(&self) -> f64 {
        (self.energy_rate - (self.electric_power - self.torque)).abs()
    }
}

pub fn energy_balance(sys: &AssembledSystem, state: &SolutionState, dstate: &DerivativeState) -> EnergyBalance {
    let energy_rate = inner(&sys.k_s.mul_vec(&state.a_s), &dstate.a_s) + inner(&sys.k_r.mul_vec(&state.a_r), &dstate.a_r)
        - inner(&sys.j_m, &dstate.a_r);
    EnergyBalance {
        energy_rate,
        electric_power: inner(&sys.j_e, &dstate.a_s),
        torque: torque_per_length(sys, state),
    }
}

/// `|dE/dα − (j_e^T a_S' − λ^T B_R'(α) a_R)|`, which vanishes up to round-off.
pub fn energy_balance_residual(sys: &AssembledSystem, state: &SolutionState, dstate: &DerivativeState) -> f64 {
    energy_balance(sys, state, dstate).residual()
}

/// Coefficients of `T(α) ≈ ĉ_0/2 + Σ ĉ_m cos(mα) + d̂_m sin(mα)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierCoefficients {
    /// Mechanical orders `m` (per revolution).
    pub orders: Vec<usize>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierCoefficients {
    pub fn eval(&self, alpha: f64) -> f64 {
        let mut v = 0.0;
        for (k, &m) in self.orders.iter().enumerate() {
            let w = if m == 0 { 0.5 } else { 1.0 };
            let (s, c) = (m as f64 * alpha).sin_cos();
            v += w * (self.cos[k] * c + self.sin[k] * s);
        }
        v
    }
}

/// Discrete Fourier analysis of samples on a uniform grid covering exactly one
/// period (endpoint excluded). The period must divide a full revolution.
pub fn fourier_analyze(alphas: &[f64], values: &[f64], period: f64) -> Result<FourierCoefficients> {
    let n = alphas.len();
    if n != values.len() || n == 0 {
        return Err(Error::Fourier(format!("{n} angles but {} samples", values.len())));
    }
    let h = period / n as f64;
    for (i, a) in alphas.iter().enumerate() {
        if (a - (alphas[0] + i as f64 * h)).abs() > 1e-9 * period {
            return Err(Error::Fourier(format!("grid is not uniform over one period at sample {i}")));
        }
    }
    let per_rev = 2.0 * PI / period;
    let base = per_rev.round();
    if base < 1.0 || (per_rev - base).abs() > 1e-9 * per_rev {
        return Err(Error::Fourier(format!("period {period} does not divide a full revolution")));
    }
    let base = base as usize;
    let kmax = (n - 1) / 2;
    let mut out = FourierCoefficients {
        orders: Vec::with_capacity(kmax + 1),
        cos: Vec::with_capacity(kmax + 1),
        sin: Vec::with_capacity(kmax + 1),
    };
    for k in 0..=kmax {
        let m = k * base;
        let (mut c, mut s) = (0.0, 0.0);
        for i in 0..n {
            // phase from the grid index keeps the sum exact for any start angle
            let (sn, cs) = (m as f64 * alphas[0] + 2.0 * PI * (k * i % n) as f64 / n as f64).sin_cos();
            c += values[i] * cs;
            s += values[i] * sn;
        }
        out.orders.push(m);
        out.cos.push(2.0 * c / n as f64);
        out.sin.push(2.0 * s / n as f64);
    }
    Ok(out)
}

/// Sampled torque curve with optional Fourier coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorqueCurve {
    pub alphas: Vec<f64>,
    pub torques: Vec<f64>,
    pub fourier: Option<FourierCoefficients>,
}

impl TorqueCurve {
    pub fn new(alphas: Vec<f64>, torques: Vec<f64>) -> Self {
        TorqueCurve {
            alphas,
            torques,
            fourier: None,
        }
    }

    pub fn analyze(&mut self, period: f64) -> Result<&FourierCoefficients> {
        self.fourier = Some(fourier_analyze(&self.alphas, &self.torques, period)?);
        Ok(self.fourier.as_ref().expect("just set"))
    }

    pub fn max_abs(&self) -> f64 {
        self.torques.iter().fold(0.0, |m, t| m.max(t.abs()))
    }
}

/// Relevant/irrelevant split of the multiplier mode amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierModeReport {
    pub amplitudes: Vec<f64>,
    pub relevant_modes: Vec<usize>,
    pub relevant_sum: f64,
    pub irrelevant_sum: f64,
    pub max_relevant: f64,
}

/// Relevant/irrelevant split of the torque coefficients: only sine terms of
/// multiples of the cogging order are expected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorqueModeReport {
    pub relevant_orders: Vec<usize>,
    pub cos_sum: f64,
    pub irrelevant_sin_sum: f64,
    pub max_relevant_sin: f64,
}

impl MultiplierModeReport {
    pub fn ratio(&self) -> f64 {
        self.irrelevant_sum / self.max_relevant
    }
}

impl TorqueModeReport {
    pub fn ratio(&self) -> f64 {
        (self.cos_sum + self.irrelevant_sin_sum) / self.max_relevant_sin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub symmetric: bool,
    pub cogging_order: usize,
    pub multiplier: Option<MultiplierModeReport>,
    pub torque: Option<TorqueModeReport>,
}

pub fn multiplier_mode_report(lambda: &[f64], cfg: &MachineConfig) -> MultiplierModeReport {
    let amplitudes = mode_amplitudes(lambda);
    let mut r = MultiplierModeReport {
        amplitudes: amplitudes.clone(),
        relevant_modes: Vec::new(),
        relevant_sum: 0.0,
        irrelevant_sum: 0.0,
        max_relevant: 0.0,
    };
    for (n, a) in amplitudes.into_iter().enumerate() {
        if cfg.is_relevant_multiplier_mode(n) {
            r.relevant_modes.push(n);
            r.relevant_sum += a;
            r.max_relevant = r.max_relevant.max(a);
        } else {
            r.irrelevant_sum += a;
        }
    }
    r
}

pub fn torque_mode_report(coeffs: &FourierCoefficients, cfg: &MachineConfig) -> TorqueModeReport {
    let mut r = TorqueModeReport {
        relevant_orders: Vec::new(),
        cos_sum: 0.0,
        irrelevant_sin_sum: 0.0,
        max_relevant_sin: 0.0,
    };
    for (k, &m) in coeffs.orders.iter().enumerate() {
        // the mean value is the constant term ĉ_0 / 2
        r.cos_sum += if m == 0 { 0.5 * coeffs.cos[k].abs() } else { coeffs.cos[k].abs() };
        if cfg.is_relevant_torque_mode(m) {
            r.relevant_orders.push(m);
            r.max_relevant_sin = r.max_relevant_sin.max(coeffs.sin[k].abs());
        } else {
            r.irrelevant_sin_sum += coeffs.sin[k].abs();
        }
    }
    r
}

pub fn symmetry_report(lambda: Option<&[f64]>, torque: Option<&FourierCoefficients>, cfg: &MachineConfig) -> SymmetryReport {
    SymmetryReport {
        symmetric: cfg.has_pole_symmetry(),
        cogging_order: cfg.cogging_order(),
        multiplier: lambda.map(|l| multiplier_mode_report(l, cfg)),
        torque: torque.map(|c| torque_mode_report(c, cfg)),
    }
}

/// Energy and torque at one angle of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSample {
    pub alpha: f64,
    pub energy: f64,
    pub torque: f64,
    pub lambda: Vec<f64>,
}

/// Solves at every angle in parallel. Failures are kept per angle so that one
/// unstable angle does not abort the sweep.
pub fn sweep(sys: &AssembledSystem, solver: &dyn SaddleSolver, alphas: &[f64]) -> Result<Vec<Result<SweepSample>>> {
    solver.prepare(sys)?;
    Ok(alphas
        .par_iter()
        .map(|&alpha| {
            let state = solver.solve(sys, alpha)?;
            Ok(SweepSample {
                alpha,
                energy: compute_energy(sys, &state),
                torque: compute_torque(sys, &state),
                lambda: state.lambda,
            })
        })
        .collect())
}

/// `start + i (stop − start) / count` for `i = 0..count`.
pub fn uniform_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + i as f64 * (stop - start) / count as f64).collect()
}
