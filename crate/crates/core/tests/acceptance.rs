//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hmortar::diagnostics::{
    compute_energy, compute_torque, energy_balance, fourier_analyze, multiplier_mode_report, solve_derivative_system,
    sweep, torque_mode_report, uniform_grid,
};
use hmortar::linalg::norm;
use hmortar::machine_model::{default_config, MachineConfig, Side};
use hmortar::mesh::{build_meshes, extract_trace, InterfaceTrace};
use hmortar::mortar::{assemble_coupling, cos_row, multiplier_dim, rotation_blocks};
use hmortar::solver::{reconstruct, saddle_solvers, solve_interface, solve_monolithic, AssembledSystem};
use hmortar::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(a).max(norm(b)).max(f64::MIN_POSITIVE)
}

fn degree(cfg: &MachineConfig, n: usize) -> MachineConfig {
    let mut c = cfg.clone();
    c.multiplier_degree = n;
    c
}

fn rotation_identity() -> Outcome {
    let cfg = degree(&default_config(), 10);
    let (rotor, _) = build_meshes(&cfg).unwrap();
    let trace = extract_trace(&rotor).unwrap();
    let b0 = assemble_coupling(&trace, 10, cfg.r_gamma).unwrap();
    let scale = b0.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let alpha = rng.gen_range(-PI..PI);
        let direct = assemble_coupling(&trace.rotated(alpha), 10, cfg.r_gamma).unwrap();
        let via_r = b0.left_mul(&rotation_blocks(alpha, 10));
        for c in 0..direct.ncols() {
            // the rotated trace may start at a different node; match columns by node id
            let c0 = via_r.column_of(direct.node_ids[c]).unwrap();
            for r in 0..direct.nrows() {
                worst = worst.max((direct.get(r, c) - via_r.get(r, c0)).abs() / scale);
            }
        }
    }
    Outcome {
        pass: worst <= 1e-12 && trace.len() >= 24,
        detail: format!("{} trace nodes, N=10, max rel entry diff {worst:.2e} (tol 1e-12)", trace.len()),
    }
}

fn energy_balance_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut with_currents = default_config();
    with_currents.current_density = (0..with_currents.slots).map(|k| 3e6 * (2.0 * PI * k as f64 / 12.0).sin()).collect();
    for cfg in [default_config(), with_currents] {
        let sys = AssembledSystem::new(&cfg).unwrap();
        let pre = sys.schur().unwrap();
        for _ in 0..10 {
            let alpha = rng.gen_range(0.0..2.0 * PI);
            let st = reconstruct(pre, &solve_interface(pre, alpha).unwrap(), alpha);
            let d = solve_derivative_system(&sys, pre, &st).unwrap();
            let b = energy_balance(&sys, &st, &d);
            let scale = compute_energy(&sys, &st).abs().max(b.torque.abs()).max(1.0);
            worst = worst.max(b.residual() / scale);
        }
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("10 angles with and without currents, max rel residual {worst:.2e} (tol 1e-10)"),
    }
}

fn schur_vs_monolithic() -> Outcome {
    let sys = AssembledSystem::new(&default_config()).unwrap();
    let pre = sys.schur().unwrap();
    let mut worst = [0.0f64; 3];
    for alpha in uniform_grid(0.0, 2.0 * PI, 20) {
        let mono = solve_monolithic(&sys, alpha).unwrap();
        let st = reconstruct(pre, &solve_interface(pre, alpha).unwrap(), alpha);
        worst[0] = worst[0].max(rel(&mono.a_s, &st.a_s));
        worst[1] = worst[1].max(rel(&mono.a_r, &st.a_r));
        worst[2] = worst[2].max(rel(&mono.lambda, &st.lambda));
    }
    Outcome {
        pass: worst.iter().all(|&w| w <= 1e-8),
        detail: format!(
            "20 angles, max rel diff a_S {:.2e}, a_R {:.2e}, lambda {:.2e} (tol 1e-8)",
            worst[0], worst[1], worst[2]
        ),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Adaptive bisection with a fixed Gauss-Legendre rule on each piece; `tol`
/// bounds the local error of every accepted piece.
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)], tol: f64, depth: u32) -> f64 {
    let apply = |a: f64, b: f64| {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        rule.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
    };
    let m = 0.5 * (a + b);
    let (whole, halves) = (apply(a, b), apply(a, m) + apply(m, b));
    if depth == 0 || (whole - halves).abs() <= tol {
        halves
    } else {
        adaptive(f, a, m, rule, tol, depth - 1) + adaptive(f, m, b, rule, tol, depth - 1)
    }
}

/// Hat function of node `j` on the circle, evaluated from periodic distances.
fn hat(angles: &[f64], j: usize, theta: f64) -> f64 {
    let k = angles.len();
    let wrap = |x: f64| x.rem_euclid(2.0 * PI);
    let left = wrap(angles[j] - angles[(j + k - 1) % k]);
    let right = wrap(angles[(j + 1) % k] - angles[j]);
    let d = wrap(theta - angles[j]);
    if d <= right {
        1.0 - d / right
    } else if 2.0 * PI - d <= left {
        1.0 - (2.0 * PI - d) / left
    } else {
        0.0
    }
}

fn quadrature_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut wrapped = false;
    for &k in &[8usize, 24, 64] {
        for variant in 0..2 {
            // uniform traces shifted off zero, and jittered ones
            let shift = rng.gen_range(0.0..2.0 * PI);
            let mut angles: Vec<f64> = (0..k)
                .map(|i| {
                    let jitter = if variant == 1 { rng.gen_range(-0.3..0.3) } else { 0.0 };
                    ((i as f64 + jitter) * 2.0 * PI / k as f64 + shift).rem_euclid(2.0 * PI)
                })
                .collect();
            angles.sort_by(f64::total_cmp);
            let trace = InterfaceTrace {
                side: Side::Rotor,
                radius: 1.0,
                angles: angles.clone(),
                node_ids: (0..k).collect(),
            };
            let b = assemble_coupling(&trace, 20, 1.0).unwrap();
            let rule = gauss_legendre(12);
            let mut breaks = angles.clone();
            breaks.insert(0, 0.0);
            breaks.push(2.0 * PI);
            wrapped |= angles[0] > 0.0;
            for j in 0..k {
                for n in 0..=20usize {
                    for (row, trig) in [(0usize, 0u8), (1, 1)] {
                        if n == 0 && row == 1 {
                            continue;
                        }
                        let f = |t: f64| {
                            let w = match (n, trig) {
                                (0, _) => 1.0,
                                (_, 0) => (n as f64 * t).cos(),
                                _ => (n as f64 * t).sin(),
                            };
                            w * hat(&angles, j, t)
                        };
                        let exact: f64 = breaks.windows(2).map(|w| adaptive(&f, w[0], w[1], &rule, 1e-16, 20)).sum();
                        let r = if n == 0 { 0 } else { cos_row(n) + row };
                        worst = worst.max((b.get(r, j) - exact).abs());
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst <= 1e-12 && wrapped,
        detail: format!("N=20, traces 8/24/64 incl. wrap-around hats, max abs diff {worst:.2e} (tol 1e-12)"),
    }
}

/// Full-revolution torque sweep at 1 degree spacing on the default machine.
fn symmetry_and_periodicity() -> (Outcome, Outcome) {
    let cfg = default_config();
    let sys = AssembledSystem::new(&cfg).unwrap();
    let alphas = uniform_grid(0.0, 2.0 * PI, 360);
    let schur = saddle_solvers().get("schur").unwrap();
    let samples: Vec<_> = sweep(&sys, schur.as_ref(), &alphas).unwrap().into_iter().map(|s| s.unwrap()).collect();
    let torques: Vec<f64> = samples.iter().map(|s| s.torque).collect();

    let mut lambda_ratio = 0.0f64;
    for s in samples.iter().step_by(7) {
        lambda_ratio = lambda_ratio.max(multiplier_mode_report(&s.lambda, &cfg).ratio());
    }
    let coeffs = fourier_analyze(&alphas, &torques, 2.0 * PI).unwrap();
    let tr = torque_mode_report(&coeffs, &cfg);
    let cos_ratio = tr.cos_sum / tr.max_relevant_sin;
    let sin_ratio = tr.irrelevant_sin_sum / tr.max_relevant_sin;
    let patterns = Outcome {
        pass: lambda_ratio <= 1e-8 && cos_ratio <= 1e-8 && sin_ratio <= 1e-8 && tr.max_relevant_sin > 0.0,
        detail: format!(
            "lambda irrelevant/max-relevant {lambda_ratio:.2e}; torque sum|c_m| {cos_ratio:.2e}, sum irrelevant |d_m| {sin_ratio:.2e} of max |d_m| {:.3e} N m (tol 1e-8)",
            tr.max_relevant_sin
        ),
    };

    let period = 360 / cfg.cogging_order();
    let t_max = torques.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let mut per = 0.0f64;
    let mut anti = 0.0f64;
    for i in 0..360 {
        per = per.max((torques[i] - torques[(i + period) % 360]).abs());
    }
    let half = period / 2;
    for d in 0..=half {
        anti = anti.max((torques[half + d] + torques[(half + 360 - d) % 360]).abs());
    }
    let periodicity = Outcome {
        pass: per <= 1e-9 * t_max && anti <= 1e-9 * t_max,
        detail: format!(
            "period {period} deg, max|T| {t_max:.3e} N m, periodicity {:.2e}, antisymmetry {:.2e} (relative, tol 1e-9)",
            per / t_max,
            anti / t_max
        ),
    };
    (patterns, periodicity)
}

/// Six-pole, six-slot analog. Its torque appears already at N = 3, because the
/// slotting couples mode 3 to itself and to mode 9. The default 36-slot machine
/// needs N >= 21 before any mode pair (15, 21) interacts, so its torque is
/// identically zero over the whole N range of this check.
fn low_order_machine() -> MachineConfig {
    let mut c = default_config();
    c.slots = 6;
    c.angular_divisions_rotor = 120;
    c.angular_divisions_stator = 120;
    c
}

fn convergence_in_n() -> Outcome {
    let base = low_order_machine();
    let alphas = uniform_grid(0.0, 2.0 * PI / base.cogging_order() as f64, 24);
    let curve = |n: usize| -> Vec<f64> {
        let sys = AssembledSystem::new(&degree(&base, n)).unwrap();
        let schur = saddle_solvers().get("schur").unwrap();
        sweep(&sys, schur.as_ref(), &alphas).unwrap().into_iter().map(|s| s.unwrap().torque).collect()
    };
    let reference = curve(48);
    let t_ref = reference.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let devs: Vec<f64> = [3, 6, 9, 12]
        .iter()
        .map(|&n| curve(n).iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / t_ref)
        .collect();
    // N = 6 and N = 12 add only modes that vanish by symmetry, so those steps tie
    let monotone = devs.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let decreased = devs[3] < devs[0];
    Outcome {
        pass: monotone && decreased,
        detail: format!(
            "P=3, S=6, reference N=48: relative max deviation for N=3,6,9,12 = {:.4e}, {:.4e}, {:.4e}, {:.4e} (non-increasing, net decrease)",
            devs[0], devs[1], devs[2], devs[3]
        ),
    }
}

fn stability_boundary() -> Outcome {
    let cfg = default_config();
    // total interface trace unknowns of both sides
    let bound = cfg.angular_divisions_rotor + cfg.angular_divisions_stator;
    let probe = |n: usize| {
        let sys = AssembledSystem::new(&degree(&cfg, n)).unwrap();
        let pre = sys.schur().unwrap();
        let cond = pre.interface_conditioning(0.1).unwrap().condition;
        (cond, solve_interface(pre, 0.1))
    };
    // 2N + 1 = bound + 1, and 2N + 1 = bound / 2 rounded to an odd count
    let (n_over, n_half) = (bound / 2, (bound / 2 - 1) / 2);
    let (c_over, r_over) = probe(n_over);
    let (c_half, r_half) = probe(n_half);
    let raised = matches!(r_over, Err(Error::Instability { .. }));
    Outcome {
        pass: raised && c_over > 1e12 && r_half.is_ok() && c_half <= 1e12,
        detail: format!(
            "trace dofs {bound}: 2N+1={} cond {c_over:.2e} error raised {raised}; 2N+1={} cond {c_half:.2e} solved {}",
            multiplier_dim(n_over),
            multiplier_dim(n_half),
            r_half.is_ok()
        ),
    }
}

fn derivative_convergence() -> Outcome {
    let sys = AssembledSystem::new(&default_config()).unwrap();
    let pre = sys.schur().unwrap();
    let alpha = 0.123;
    let solve = |a: f64| reconstruct(pre, &solve_interface(pre, a).unwrap(), a);
    let d = solve_derivative_system(&sys, pre, &solve(alpha)).unwrap();
    let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let (p, m) = (solve(alpha + eps), solve(alpha - eps));
            let fd: Vec<f64> = p.a_s.iter().zip(&m.a_s).map(|(x, y)| (x - y) / (2.0 * eps)).collect();
            rel(&fd, &d.a_s)
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log10()).collect();
    Outcome {
        pass: orders.iter().all(|o| (o - 2.0).abs() <= 0.2),
        detail: format!(
            "rel errors {:.2e}, {:.2e}, {:.2e}; observed orders {:.3}, {:.3} (target 2.0 +- 0.2)",
            errors[0], errors[1], errors[2], orders[0], orders[1]
        ),
    }
}

fn offline_online() -> Outcome {
    let sys = AssembledSystem::new(&default_config()).unwrap();
    let pre = sys.schur().unwrap();
    let alphas = uniform_grid(0.0, 2.0 * PI, 360);
    let start = Instant::now();
    for &alpha in &alphas {
        let st = reconstruct(pre, &solve_interface(pre, alpha).unwrap(), alpha);
        std::hint::black_box(compute_torque(&sys, &st));
    }
    let online = start.elapsed().as_secs_f64() / alphas.len() as f64;
    let count = sys.factorization_count();
    let start = Instant::now();
    let reps = 5;
    for k in 0..reps {
        let st = solve_monolithic(&sys, alphas[k * 17]).unwrap();
        std::hint::black_box(compute_torque(&sys, &st));
    }
    let mono = start.elapsed().as_secs_f64() / reps as f64;
    Outcome {
        pass: count == 2 && mono >= 10.0 * online,
        detail: format!(
            "{count} factorizations for 360 angles; per angle {:.3} ms online vs {:.3} ms monolithic ({:.1}x)",
            online * 1e3,
            mono * 1e3,
            mono / online
        ),
    }
}

fn run(id: &str, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let pass = out.pass && elapsed <= limit;
    println!(
        "{} C{id} {name}: {} [{:.1}s, limit {}s]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run("1", "rotation identity", Duration::from_secs(5), rotation_identity);
    ok &= run("2", "discrete energy balance", Duration::from_secs(30), energy_balance_check);
    ok &= run("3", "Schur vs monolithic", Duration::from_secs(60), schur_vs_monolithic);
    ok &= run("4", "coupling integrals vs quadrature", Duration::from_secs(10), quadrature_oracle);
    let mut periodicity = None;
    ok &= run("5", "symmetry mode patterns", Duration::from_secs(300), || {
        let (patterns, rest) = symmetry_and_periodicity();
        periodicity = Some(rest);
        patterns
    });
    // shares the sweep of C5
    ok &= run("6", "torque periodicity and antisymmetry", Duration::from_secs(300), || {
        periodicity.take().expect("C5 ran first")
    });
    ok &= run("7", "convergence in N", Duration::from_secs(300), convergence_in_n);
    ok &= run("8", "stability boundary", Duration::from_secs(30), stability_boundary);
    ok &= run("9", "derivative system", Duration::from_secs(60), derivative_convergence);
    ok &= run("10", "offline/online contract", Duration::from_secs(300), offline_online);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
