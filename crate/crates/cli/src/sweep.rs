//! Rotation sweeps: torque CSV, Fourier summary and symmetry report.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use hmortar::diagnostics::{fourier_analyze, symmetry_report, sweep, FourierCoefficients, SymmetryReport, TorqueCurve};

use crate::output::{build, TORQUE_SIGN};
use crate::{write_file, CliError, ConfigFile, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Angles in degrees; failed angles carry a NaN torque.
    pub curve: TorqueCurve,
    pub failures: Vec<(f64, String)>,
    pub factorizations: usize,
    pub symmetry: Option<SymmetryReport>,
}

#[derive(Debug, Serialize)]
struct FourierRow {
    m: usize,
    c: f64,
    d: f64,
    relevant: bool,
}

#[derive(Debug, Serialize)]
struct FourierSummary {
    period_deg: f64,
    torque_sign: &'static str,
    /// `T(α) ≈ c_0/2 + Σ c_m cos(mα) + d_m sin(mα)`, `m` per revolution.
    coefficients: Vec<FourierRow>,
    sum_abs_c: f64,
    sum_abs_d_relevant: f64,
    sum_abs_d_irrelevant: f64,
    max_abs_d_relevant: f64,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    count: usize,
    start_deg: f64,
    stop_deg: f64,
    strategy: String,
    backend: String,
    multiplier_degree: usize,
    sparse_factorizations: usize,
    failures: Vec<SweepFailure>,
}

#[derive(Debug, Serialize)]
struct SweepFailure {
    alpha_deg: f64,
    error: String,
}

/// The span as a fraction of a full turn, when it is one.
fn period_of(grid: &GridSpec) -> Option<f64> {
    let span = grid.stop_deg - grid.start_deg;
    let per_turn = 360.0 / span;
    ((per_turn - per_turn.round()).abs() <= 1e-9 * per_turn && per_turn.round() >= 1.0).then_some(span)
}

fn fourier_summary(coeffs: &FourierCoefficients, period_deg: f64, cfg: &hmortar::MachineConfig) -> FourierSummary {
    let mut s = FourierSummary {
        period_deg,
        torque_sign: TORQUE_SIGN,
        coefficients: Vec::new(),
        sum_abs_c: 0.0,
        sum_abs_d_relevant: 0.0,
        sum_abs_d_irrelevant: 0.0,
        max_abs_d_relevant: 0.0,
    };
    for (k, &m) in coeffs.orders.iter().enumerate() {
        let relevant = cfg.is_relevant_torque_mode(m);
        let (c, d) = (coeffs.cos[k], coeffs.sin[k]);
        s.sum_abs_c += if m == 0 { 0.5 * c.abs() } else { c.abs() };
        if relevant {
            s.sum_abs_d_relevant += d.abs();
            s.max_abs_d_relevant = s.max_abs_d_relevant.max(d.abs());
        } else {
            s.sum_abs_d_irrelevant += d.abs();
        }
        s.coefficients.push(FourierRow { m, c, d, relevant });
    }
    s
}

pub fn torque_csv(curve: &TorqueCurve) -> String {
    let mut out = String::from("alpha_deg,torque_Nm\n");
    for (a, t) in curve.alphas.iter().zip(&curve.torques) {
        writeln!(out, "{a:.16e},{t:.16e}").expect("writing to a string");
    }
    out
}

pub fn run_sweep(
    cfg: &ConfigFile,
    grid: &GridSpec,
    with_symmetry: bool,
    out_dir: Option<&Path>,
) -> Result<SweepOutcome, CliError> {
    grid.validate()?;
    let (sys, solver) = build(cfg)?;
    let degrees = grid.angles_deg();
    let radians: Vec<f64> = degrees.iter().map(|d| d.to_radians()).collect();
    let samples = sweep(&sys, solver.as_ref(), &radians)?;

    let mut failures = Vec::new();
    let mut torques = Vec::with_capacity(samples.len());
    let mut first_lambda = None;
    for (deg, sample) in degrees.iter().zip(samples) {
        match sample {
            Ok(s) => {
                torques.push(s.torque);
                first_lambda.get_or_insert(s.lambda);
            }
            Err(e) => {
                log::warn!("alpha = {deg} deg failed: {e}");
                torques.push(f64::NAN);
                failures.push((*deg, e.to_string()));
            }
        }
    }
    let mut curve = TorqueCurve::new(degrees.clone(), torques);

    let period = period_of(grid);
    let fourier = match period {
        Some(p) if failures.is_empty() => Some(fourier_analyze(&radians, &curve.torques, p.to_radians())?),
        _ => None,
    };
    let symmetry = with_symmetry.then(|| symmetry_report(first_lambda.as_deref(), fourier.as_ref(), &cfg.machine));
    curve.fourier = fourier;

    if let Some(dir) = out_dir {
        write_file(dir, "torque.csv", &torque_csv(&curve))?;
        let summary = SweepSummary {
            count: grid.count,
            start_deg: grid.start_deg,
            stop_deg: grid.stop_deg,
            strategy: solver.name().to_string(),
            backend: sys.backend_name().to_string(),
            multiplier_degree: sys.degree,
            sparse_factorizations: sys.factorization_count(),
            failures: failures
                .iter()
                .map(|(a, e)| SweepFailure {
                    alpha_deg: *a,
                    error: e.clone(),
                })
                .collect(),
        };
        write_file(dir, "sweep_summary.json", &to_json(&summary))?;
        match (&curve.fourier, period) {
            (Some(coeffs), Some(p)) => {
                write_file(dir, "fourier_summary.json", &to_json(&fourier_summary(coeffs, p, &cfg.machine)))?;
            }
            _ => log::info!("no Fourier summary: the grid does not cover a whole fraction of a turn without failures"),
        }
        if let Some(report) = &symmetry {
            write_file(dir, "symmetry_report.json", &to_json(report))?;
        }
    }
    Ok(SweepOutcome {
        curve,
        failures,
        factorizations: sys.factorization_count(),
        symmetry,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}
