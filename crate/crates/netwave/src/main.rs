//! Command line interface for network generation, operator assembly, mesh
//! inspection, corrector computation, eigenvalue solves, time integration,
//! and the convergence experiments.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use netwave::coarse_fem::{build_interpolator, build_mesh};
use netwave::experiments::{
    emit_outputs, parse_level, run_experiment, ExperimentConfig, ExperimentKind,
};
use netwave::io;
use netwave::lod::{build_multiscale_basis, LodContext, SolveOptions};
use netwave::network::{generate_with_stats, validate_assumptions, GeneratorConfig};
use netwave::operators::{
    assemble_graph_laplacian, assemble_mass, random_edge_coefficients, replicate_components,
    ElasticParams, PairConvention, StiffnessModel,
};
use netwave::wave::{prepare_fine_initial, prepare_multiscale_initial, LoadProfile, TimeSignal, WaveSystem};
use netwave::{Error, Result};

#[derive(Parser)]
#[command(name = "netwave", version, about = "Multiscale wave solvers on spatial networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorKind {
    M,
    L,
    Scalar,
    Elastic,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceKind {
    Fine,
    Ms,
}

#[derive(Clone, Copy, ValueEnum)]
enum ForcingKind {
    Zero,
    /// sin(2 pi t) * 1
    Sin1,
    /// 1e5 x1^2 sin(0.4 pi t) e_z (elastic)
    PressureZ,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random fiber network.
    Gen {
        #[arg(long, default_value_t = 0.07)]
        r: f64,
        #[arg(long = "total-length")]
        total_length: f64,
        #[arg(long, default_value_t = 1e-3)]
        merge_tol: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write the binary variant instead of text.
        #[arg(long)]
        binary: bool,
    },
    /// Check network properties over a grid of box radii.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated radii, e.g. 0.25,0.125.
        #[arg(long = "R", value_delimiter = ',')]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 16)]
        centers: usize,
    },
    /// Assemble an operator and export it as MatrixMarket.
    Assemble {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        op: OperatorKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        gamma_seed: u64,
        /// Eliminate Dirichlet rows and columns before export.
        #[arg(long)]
        constrained: bool,
    },
    /// Build the coarse mesh and report element fill and Gram conditioning.
    Mesh {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "H")]
        h: String,
        #[arg(long)]
        report: bool,
    },
    /// Compute the multiscale basis and persist it.
    Correctors {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "H")]
        h: String,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "scalar")]
        op: OperatorKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        gamma_seed: u64,
        /// Per-patch statistics CSV.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Smallest generalized eigenvalues of (K, M).
    Eigen {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "smallest")]
        which: String,
        #[arg(long, default_value_t = 6)]
        count: usize,
        #[arg(long, value_enum, default_value = "scalar")]
        op: OperatorKind,
        #[arg(long, default_value_t = 1)]
        gamma_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the wave equation in the fine or multiscale space.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        space: SpaceKind,
        #[arg(long = "H")]
        h: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long = "T")]
        t_final: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long, value_enum, default_value = "zero")]
        forcing: ForcingKind,
        #[arg(long, value_enum, default_value = "scalar")]
        op: OperatorKind,
        #[arg(long, default_value_t = 1)]
        gamma_seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Snapshot times, comma separated.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
    },
    /// Run a convergence experiment from a flat key = value config file.
    Experiment {
        #[arg(value_enum)]
        kind: CliExperiment,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Exit nonzero unless slopes meet the optimal-order thresholds.
        #[arg(long)]
        assert_slopes: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliExperiment {
    Eigenmode,
    Scalar,
    Elastic,
}

fn main() {
    if let Err(e) = dispatch() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch() -> Result<()> {
    match Cli::parse().command {
        Command::Gen {
            r,
            total_length,
            merge_tol,
            seed,
            out,
            binary,
        } => {
            let cfg = GeneratorConfig {
                segment_length: r,
                total_length,
                merge_tol_factor: merge_tol,
                seed,
            };
            let (net, stats) = generate_with_stats(&cfg)?;
            if binary {
                io::save_network_binary(&net, &out)?;
            } else {
                io::save_network(&net, &out)?;
            }
            println!(
                "generated {} nodes, {} edges ({} boundary); placed length {:.3}, surviving {:.3}",
                net.n_nodes(),
                net.n_edges(),
                net.n_boundary(),
                stats.placed_length,
                stats.surviving_length
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Validate {
            input,
            radii,
            centers,
        } => {
            let net = io::load_network(&input)?;
            let report = validate_assumptions(&net, &radii, centers);
            println!(
                "nodes {}  edges {}  max edge {:.4e}  boundary gap {:.4e}",
                net.n_nodes(),
                net.n_edges(),
                report.max_edge_length,
                report.boundary_gap
            );
            println!("R,density_min,density_max,sigma_ratio,connectivity,locality,boundary");
            for c in &report.per_radius {
                println!(
                    "{:.6},{:.6},{:.6},{:.4},{},{},{}",
                    c.radius,
                    c.density_min,
                    c.density_max,
                    c.sigma_ratio,
                    c.all_connected(),
                    c.locality_ok,
                    c.boundary_ok
                );
            }
            match report.r0_estimate {
                Some(r0) => println!("R0 estimate: {r0}"),
                None => println!("R0 estimate: none of the tested radii satisfied all checks"),
            }
            Ok(())
        }
        Command::Assemble {
            input,
            op,
            out,
            gamma_seed,
            constrained,
        } => {
            let net = io::load_network(&input)?;
            let operator = match op {
                OperatorKind::M => assemble_mass(&net, 1)?,
                OperatorKind::L => assemble_graph_laplacian(&net)?,
                OperatorKind::Scalar => {
                    let gamma = random_edge_coefficients(&net, 0.1, 0.9, gamma_seed);
                    StiffnessModel::Scalar { gamma }.assemble(&net)?
                }
                OperatorKind::Elastic => StiffnessModel::Elastic {
                    params: ElasticParams::new(210e9, 5e-4)?,
                    convention: PairConvention::Ordered,
                }
                .assemble(&net)?,
            };
            let operator = if constrained {
                operator.eliminate_boundary(&net)
            } else {
                operator
            };
            io::write_matrix_market(operator.matrix(), &out)?;
            println!(
                "wrote {} ({} x {}, {} nonzeros)",
                out.display(),
                operator.dim(),
                operator.dim(),
                operator.matrix().nnz()
            );
            Ok(())
        }
        Command::Mesh { input, h, report } => {
            let net = io::load_network(&input)?;
            let level = parse_level(&h)?;
            let mesh = build_mesh(&net, level)?;
            println!(
                "H = 2^-{level}: {} elements, {} mesh nodes ({} free)",
                mesh.n_elements(),
                mesh.n_mesh_nodes(),
                mesh.n_free()
            );
            if let Some(warning) = mesh.locality_warning(&net) {
                println!("warning: {warning}");
            }
            if report {
                let mass = assemble_mass(&net, 1)?;
                let interp = build_interpolator(&mesh, &net, &mass, true)?;
                println!("element,node_count");
                for e in 0..mesh.n_elements() {
                    println!("{e},{}", mesh.element_nodes(e).len());
                }
                println!(
                    "worst local Gram condition estimate: {:.4e}",
                    interp.worst_gram_condition()
                );
            }
            Ok(())
        }
        Command::Correctors {
            input,
            h,
            k,
            op,
            out,
            gamma_seed,
            stats,
        } => {
            let net = io::load_network(&input)?;
            let level = parse_level(&h)?;
            let mesh = build_mesh(&net, level)?;
            let mass = assemble_mass(&net, 1)?;
            let interp = build_interpolator(&mesh, &net, &mass, true)?;
            let model = model_for(op, &net, gamma_seed)?;
            let comps = model.components();
            let m_full = if comps == 1 {
                mass.clone()
            } else {
                replicate_components(&mass, comps)
            };
            let k_op = model.assemble(&net)?.eliminate_boundary(&net);
            let m_op = m_full.eliminate_boundary(&net);
            let ctx = LodContext {
                net: &net,
                mesh: &mesh,
                interp: &interp,
                k_op: &k_op,
                m_op: &m_op,
                model: &model,
                options: SolveOptions::default(),
            };
            let (basis, corrector_stats) = build_multiscale_basis(&ctx, k)?;
            io::save_basis(&basis.to_data(), &out)?;
            println!(
                "basis: {} columns over {} fine DOFs; worst patch residual {:.3e}; wrote {}",
                basis.dim(),
                basis.n_fine(),
                corrector_stats.max_residual,
                out.display()
            );
            if let Some(stats_path) = stats {
                use std::fmt::Write as _;
                let mut csv =
                    String::from("element,unknowns,constraints,right_hand_sides,solve_seconds,residual\n");
                for p in &corrector_stats.per_patch {
                    writeln!(
                        csv,
                        "{},{},{},{},{:.6},{:e}",
                        p.element,
                        p.unknowns,
                        p.constraints,
                        p.right_hand_sides,
                        p.solve_seconds,
                        p.residual
                    )
                    .unwrap();
                }
                std::fs::write(&stats_path, csv)?;
                println!("wrote {}", stats_path.display());
            }
            Ok(())
        }
        Command::Eigen {
            input,
            which,
            count,
            op,
            gamma_seed,
            out,
        } => {
            if which != "smallest" {
                return Err(Error::Config(format!(
                    "only --which smallest is supported, got {which:?}"
                )));
            }
            let net = io::load_network(&input)?;
            let model = model_for(op, &net, gamma_seed)?;
            let comps = model.components();
            let mass = assemble_mass(&net, comps)?;
            let k_op = model.assemble(&net)?.eliminate_boundary(&net);
            let m_op = mass.eliminate_boundary(&net);
            let result =
                netwave::eigen::smallest_eigenpairs(&k_op, &m_op, count, 1e-10, gamma_seed)?;
            let mut csv = String::from("index,eigenvalue,residual\n");
            for (i, (v, r)) in result.values.iter().zip(&result.residuals).enumerate() {
                use std::fmt::Write as _;
                writeln!(csv, "{},{:e},{:e}", i + 1, v, r).unwrap();
            }
            match out {
                Some(path) => {
                    std::fs::write(&path, csv)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Solve {
            input,
            space,
            h,
            k,
            t_final,
            tau,
            forcing,
            op,
            gamma_seed,
            out,
            snapshots,
        } => {
            solve_command(
                input, space, h, k, t_final, tau, forcing, op, gamma_seed, out, snapshots,
            )
        }
        Command::Experiment {
            kind,
            config,
            out,
            assert_slopes,
        } => {
            let kind = match kind {
                CliExperiment::Eigenmode => ExperimentKind::Eigenmode,
                CliExperiment::Scalar => ExperimentKind::ScalarInhomogeneous,
                CliExperiment::Elastic => ExperimentKind::Elastic,
            };
            let mut cfg = ExperimentConfig::new(kind);
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path)?;
                cfg.apply_text(&text)?;
                if cfg.kind != kind {
                    return Err(Error::Config(
                        "config file experiment key contradicts the subcommand".into(),
                    ));
                }
            }
            let table = run_experiment(&cfg)?;
            emit_outputs(&table, &out)?;
            println!("H,k,err_K,err_M");
            for r in &table.rows {
                println!("2^-{},{},{:.6e},{:.6e}", r.level, r.k, r.err_k, r.err_m);
            }
            println!("slope_K = {:.3}, slope_M = {:.3}", table.slope_k, table.slope_m);
            for w in &table.warnings {
                println!("warning: {w}");
            }
            println!("outputs in {}", out.display());
            if assert_slopes {
                table.assert_slopes(0.9, 1.8)?;
                println!("slope assertions passed");
            }
            Ok(())
        }
    }
}

fn model_for(op: OperatorKind, net: &netwave::Network, gamma_seed: u64) -> Result<StiffnessModel> {
    match op {
        OperatorKind::Scalar => Ok(StiffnessModel::Scalar {
            gamma: random_edge_coefficients(net, 0.1, 0.9, gamma_seed),
        }),
        OperatorKind::Elastic => Ok(StiffnessModel::Elastic {
            params: ElasticParams::new(210e9, 5e-4)?,
            convention: PairConvention::Ordered,
        }),
        OperatorKind::M | OperatorKind::L => Err(Error::Config(
            "this command needs a stiffness operator (scalar or elastic)".into(),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_command(
    input: PathBuf,
    space: SpaceKind,
    h: Option<String>,
    k: Option<usize>,
    t_final: f64,
    tau: f64,
    forcing: ForcingKind,
    op: OperatorKind,
    gamma_seed: u64,
    out: PathBuf,
    snapshots: Vec<f64>,
) -> Result<()> {
    let net = io::load_network(&input)?;
    let model = model_for(op, &net, gamma_seed)?;
    let comps = model.components();
    let mass_scalar = assemble_mass(&net, 1)?;
    let m_full = if comps == 1 {
        mass_scalar.clone()
    } else {
        replicate_components(&mass_scalar, comps)
    };
    let k_op = model.assemble(&net)?.eliminate_boundary(&net);
    let m_op = m_full.eliminate_boundary(&net);
    let m_diag = m_op.diagonal().expect("diagonal mass");
    let map = k_op.dof_map().unwrap();
    let n = k_op.dim();

    // Forcing space vector on free DOFs.
    let (space_vec, signal) = match forcing {
        ForcingKind::Zero => (vec![0.0; n], TimeSignal::Zero),
        ForcingKind::Sin1 => (
            vec![1.0; n],
            TimeSignal::Sine {
                omega: 2.0 * std::f64::consts::PI,
                amplitude: 1.0,
            },
        ),
        ForcingKind::PressureZ => {
            if comps != 3 {
                return Err(Error::Config(
                    "pressure-z forcing requires the elastic operator".into(),
                ));
            }
            let mut v = vec![0.0; n];
            for rank in 0..map.n_free_nodes() {
                let node = map.free_nodes()[rank];
                let x1 = net.coord(node)[0];
                v[rank * 3 + 2] = 1e5 * x1 * x1;
            }
            (
                v,
                TimeSignal::Sine {
                    omega: 0.4 * std::f64::consts::PI,
                    amplitude: 1.0,
                },
            )
        }
    };
    let m_space: Vec<f64> = space_vec.iter().zip(&m_diag).map(|(s, m)| s * m).collect();
    let n_steps = (t_final / tau).round().max(2.0) as usize;
    let zero = vec![0.0; n];
    let f0: Vec<f64> = {
        let a = signal.value(0.0);
        space_vec.iter().map(|s| s * a).collect()
    };

    std::fs::create_dir_all(&out)?;
    let snapshot_steps: Vec<usize> = snapshots
        .iter()
        .map(|t| (t / tau).round() as usize)
        .collect();

    let energy = match space {
        SpaceKind::Fine => {
            let system = WaveSystem::fine(&m_op, &k_op, tau)?;
            let (u0, u1) = prepare_fine_initial(&zero, &zero, &f0, tau, &m_diag, &k_op);
            let load = LoadProfile {
                base: m_space,
                signal,
            };
            let result = netwave::wave::run(&system, u0, u1, n_steps, &load, |step, state| {
                if snapshot_steps.contains(&step) {
                    let path = out.join(format!("snapshot_{step}.txt"));
                    let _ = io::save_vector(&state.u_curr, &path);
                }
            });
            result.energy
        }
        SpaceKind::Ms => {
            let level = parse_level(
                h.as_deref()
                    .ok_or_else(|| Error::Config("--H is required for the multiscale space".into()))?,
            )?;
            let k = k.unwrap_or(level as usize).max(1);
            let mesh = build_mesh(&net, level)?;
            let interp = build_interpolator(&mesh, &net, &mass_scalar, true)?;
            let ctx = LodContext {
                net: &net,
                mesh: &mesh,
                interp: &interp,
                k_op: &k_op,
                m_op: &m_op,
                model: &model,
                options: SolveOptions::default(),
            };
            let (basis, _) = build_multiscale_basis(&ctx, k)?;
            let system = WaveSystem::multiscale(&basis, tau)?;
            let (c0, c1) =
                prepare_multiscale_initial(&basis, &k_op, &zero, &zero, &f0, tau, &m_diag)?;
            let load = LoadProfile {
                base: basis.project_rhs(&m_space),
                signal,
            };
            let result = netwave::wave::run(&system, c0, c1, n_steps, &load, |step, state| {
                if snapshot_steps.contains(&step) {
                    let fine = basis.to_fine(&state.u_curr);
                    let path = out.join(format!("snapshot_{step}.txt"));
                    let _ = io::save_vector(&fine, &path);
                }
            });
            result.energy
        }
    };

    use std::fmt::Write as _;
    let mut csv = String::from("step,t,kinetic,potential,total\n");
    for e in &energy {
        writeln!(csv, "{},{:e},{:e},{:e},{:e}", e.step, e.t, e.kinetic, e.potential, e.total())
            .unwrap();
    }
    std::fs::write(out.join("energy.csv"), csv)?;
    println!(
        "ran {} steps; wrote energy trace and {} snapshots to {}",
        n_steps - 1,
        snapshot_steps.len(),
        out.display()
    );
    Ok(())
}
