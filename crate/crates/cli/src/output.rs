//! Single-angle simulation and its output files.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use hmortar::assembly::{p1_gradients, DofMap};
use hmortar::diagnostics::{compute_energy, compute_torque};
use hmortar::mesh::Mesh;
use hmortar::mortar::{mode_amplitudes, to_reported};
use hmortar::solver::{saddle_solvers, SaddleSolver};
use hmortar::{AssembledSystem, SolutionState};

use crate::{write_file, CliError, ConfigFile};

pub const TORQUE_SIGN: &str = "positive counterclockwise about +z";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    pub stator: f64,
    pub rotor: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub alpha_deg: f64,
    pub strategy: String,
    pub backend: String,
    pub multiplier_degree: usize,
    pub stator_dofs: usize,
    pub rotor_dofs: usize,
    #[serde(rename = "torque_Nm")]
    pub torque_nm: f64,
    pub torque_sign: &'static str,
    /// The minimized functional `½‖a‖²_K − j_M·a`; negative at a solution.
    #[serde(rename = "energy_J_per_m")]
    pub energy_j_per_m: f64,
    /// `½‖a_S‖²_{K_S} + ½‖a_R‖²_{K_R}`.
    #[serde(rename = "stored_energy_J_per_m")]
    pub stored_energy_j_per_m: f64,
    /// Multiplier coefficients `[c_0, c_1, d_1, c_2, d_2, ...]`, with the
    /// constant term read as `c_0 / 2`.
    pub lambda: Vec<f64>,
    pub lambda_amplitudes: Vec<f64>,
    pub residuals: Residuals,
    pub field_files: Vec<String>,
}

pub(crate) fn build(cfg: &ConfigFile) -> Result<(AssembledSystem, Arc<dyn SaddleSolver>), CliError> {
    let solver = saddle_solvers().get(&cfg.solver.strategy)?;
    let sys = AssembledSystem::with_backend_name(&cfg.machine, &cfg.solver.backend)?;
    Ok((sys, solver))
}

/// Cell-wise `|grad a|` of a nodal field.
pub fn gradient_magnitude(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    (0..mesh.num_triangles())
        .map(|t| {
            let (g, _) = p1_gradients(mesh.triangle_points(t));
            let tri = mesh.triangles[t];
            let mut grad = [0.0; 2];
            for i in 0..3 {
                grad[0] += nodal[tri[i]] * g[i][0];
                grad[1] += nodal[tri[i]] * g[i][1];
            }
            grad[0].hypot(grad[1])
        })
        .collect()
}

fn field_vtk(mesh: &Mesh, dofs: &DofMap, coeffs: &[f64]) -> String {
    let nodal = dofs.expand(coeffs);
    let grad = gradient_magnitude(mesh, &nodal);
    let region: Vec<f64> = mesh.tags.iter().map(|t| t.code() as f64).collect();
    mesh.to_vtk(&[("a", &nodal)], &[("grad_a_norm", &grad), ("region", &region)])
}

/// VTK files of both subdomains, the rotor drawn at its rotated position.
pub fn export_fields(sys: &AssembledSystem, state: &SolutionState, dir: &Path) -> Result<Vec<String>, CliError> {
    let rotor = sys.rotor_mesh.rotated(state.alpha);
    let files = [
        ("stator_field.vtk", field_vtk(&sys.stator_mesh, &sys.stator_dofs, &state.a_s)),
        ("rotor_field.vtk", field_vtk(&rotor, &sys.rotor_dofs, &state.a_r)),
    ];
    files
        .iter()
        .map(|(name, text)| write_file(dir, name, text).map(|_| name.to_string()))
        .collect()
}

pub fn run_simulate(
    cfg: &ConfigFile,
    alpha_deg: f64,
    export: bool,
    out_dir: Option<&Path>,
) -> Result<SimulateSummary, CliError> {
    let (sys, solver) = build(cfg)?;
    let state = solver.solve(&sys, alpha_deg.to_radians())?;
    let res = sys.residuals(&state);
    let mut summary = SimulateSummary {
        alpha_deg,
        strategy: solver.name().to_string(),
        backend: sys.backend_name().to_string(),
        multiplier_degree: sys.degree,
        stator_dofs: sys.stator_dofs.num_free,
        rotor_dofs: sys.rotor_dofs.num_free,
        torque_nm: compute_torque(&sys, &state),
        torque_sign: TORQUE_SIGN,
        energy_j_per_m: compute_energy(&sys, &state),
        stored_energy_j_per_m: 0.5 * (sys.k_s.quad_form(&state.a_s) + sys.k_r.quad_form(&state.a_r)),
        lambda: to_reported(&state.lambda),
        lambda_amplitudes: mode_amplitudes(&state.lambda),
        residuals: Residuals {
            stator: res.stator,
            rotor: res.rotor,
            coupling: res.coupling,
        },
        field_files: Vec::new(),
    };
    if let Some(dir) = out_dir {
        if export {
            summary.field_files = export_fields(&sys, &state, dir)?;
        }
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write_file(dir, "simulate_summary.json", &json)?;
    } else if export {
        return Err(CliError::Arguments("--export-fields needs --out".into()));
    }
    Ok(summary)
}
