//! Convergence experiments: eigenmode, inhomogeneous scalar, and elastic
//! wave problems solved with the localized multiscale method over a sweep of
//! mesh sizes, with errors measured against a closed-form or in-run fine
//! reference and least-squares convergence slopes.

mod config;

pub use config::{default_generator, parse_level, ExperimentConfig, ExperimentKind, NetworkSource};

use std::time::Instant;

use crate::coarse_fem::{build_interpolator, build_mesh};
use crate::eigen;
use crate::error::{Error, Result};
use crate::io::load_network;
use crate::lod::{build_multiscale_basis, LodContext, MultiscaleBasis, SolveOptions};
use crate::network::{generate_fiber_network, Network};
use crate::operators::{
    assemble_mass, random_edge_coefficients, replicate_components, SparseOperator, StiffnessModel,
};
use crate::wave::{
    prepare_multiscale_initial, EnergySample, LoadProfile, TimeSignal, WaveState, WaveSystem,
};

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub k: usize,
    /// max over half-steps of the K-norm solution error.
    pub err_k: f64,
    /// max over steps of the M-norm velocity error.
    pub err_m: f64,
    pub setup_seconds: f64,
    pub step_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub kind: ExperimentKind,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log2(err_K) against log2(H).
    pub slope_k: f64,
    pub slope_m: f64,
    /// Energy trace of the finest multiscale run.
    pub energy: Vec<EnergySample>,
    pub warnings: Vec<String>,
    pub meta: Vec<(String, String)>,
}

impl ConvergenceTable {
    pub fn assert_slopes(&self, min_k: f64, min_m: f64) -> Result<()> {
        if self.slope_k < min_k {
            return Err(Error::Invalid(format!(
                "K-norm slope {:.3} below threshold {min_k}",
                self.slope_k
            )));
        }
        if self.slope_m < min_m {
            return Err(Error::Invalid(format!(
                "M-norm slope {:.3} below threshold {min_m}",
                self.slope_m
            )));
        }
        Ok(())
    }
}

/// Least-squares slope of `log2(err)` vs `log2(H)`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = points.iter().map(|(h, _)| h.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.max(1e-300).log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Eigenmode => run_eigenmode(cfg),
        ExperimentKind::ScalarInhomogeneous => run_scalar_inhomogeneous(cfg),
        ExperimentKind::Elastic => run_elastic(cfg),
    }
}

/// Shared problem state: network, operators, and the stiffness model.
pub struct Problem {
    pub net: Network,
    pub model: StiffnessModel,
    pub components: usize,
    /// Unconstrained scalar mass (for the interpolator).
    pub mass_scalar: SparseOperator,
    /// Dirichlet-constrained operators.
    pub m_op: SparseOperator,
    pub k_op: SparseOperator,
    pub m_diag: Vec<f64>,
}

impl Problem {
    pub fn build(cfg: &ExperimentConfig) -> Result<Problem> {
        let raw = match &cfg.network {
            NetworkSource::Generate(g) => generate_fiber_network(g)?,
            NetworkSource::File(path) => load_network(path)?,
        };
        let net = match cfg.kind {
            ExperimentKind::Eigenmode => raw.assign_boundary(|x| x[0] == 0.0 || x[0] == 1.0)?,
            ExperimentKind::ScalarInhomogeneous => raw.assign_boundary(|x| {
                x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0 || x[1] == 1.0
            })?,
            ExperimentKind::Elastic => {
                let net = raw.assign_boundary(|x| x[0] == 0.0)?;
                if net.n_boundary() < 3 {
                    return Err(Error::InvalidNetwork(format!(
                        "elastic problem needs at least 3 Dirichlet nodes, found {}",
                        net.n_boundary()
                    )));
                }
                net
            }
        };
        let model = match cfg.kind {
            ExperimentKind::Elastic => StiffnessModel::Elastic {
                params: cfg.elastic,
                convention: cfg.kb_pairs,
            },
            _ => StiffnessModel::Scalar {
                gamma: random_edge_coefficients(
                    &net,
                    cfg.gamma_range.0,
                    cfg.gamma_range.1,
                    cfg.gamma_seed,
                ),
            },
        };
        let components = model.components();
        let mass_scalar = assemble_mass(&net, 1)?;
        let m_full = if components == 1 {
            mass_scalar.clone()
        } else {
            replicate_components(&mass_scalar, components)
        };
        let m_op = m_full.eliminate_boundary(&net);
        let k_op = model.assemble(&net)?.eliminate_boundary(&net);
        let m_diag = m_op
            .diagonal()
            .expect("mass stays diagonal after elimination");
        Ok(Problem {
            net,
            model,
            components,
            mass_scalar,
            m_op,
            k_op,
            m_diag,
        })
    }

    pub fn n_free(&self) -> usize {
        self.k_op.dim()
    }

    /// Mass-weighted load base for the fine space: `(M f_space)_i`.
    fn fine_load_base(&self, space: &[f64]) -> Vec<f64> {
        space
            .iter()
            .zip(&self.m_diag)
            .map(|(s, m)| s * m)
            .collect()
    }
}

/// One multiscale sweep entry stepped in lockstep with a reference.
struct SweepRun {
    level: u32,
    k: usize,
    basis: MultiscaleBasis,
    system: WaveSystem,
    state: WaveState,
    load: LoadProfile,
    /// Fine representation of the current pair.
    fine_prev: Vec<f64>,
    fine_curr: Vec<f64>,
    err_k: f64,
    err_m: f64,
    setup_seconds: f64,
    step_seconds: f64,
    energy: Vec<EnergySample>,
}

impl SweepRun {
    fn build(
        cfg: &ExperimentConfig,
        problem: &Problem,
        level: u32,
        g: &[f64],
        h: &[f64],
        f0: &[f64],
        space: &[f64],
        signal: &TimeSignal,
    ) -> Result<SweepRun> {
        let start = Instant::now();
        let k = cfg.k_for_level(level);
        let mesh = build_mesh(&problem.net, level)?;
        let interp = build_interpolator(&mesh, &problem.net, &problem.mass_scalar, cfg.averaging)?;
        let ctx = LodContext {
            net: &problem.net,
            mesh: &mesh,
            interp: &interp,
            k_op: &problem.k_op,
            m_op: &problem.m_op,
            model: &problem.model,
            options: SolveOptions::default(),
        };
        let (basis, _stats) = build_multiscale_basis(&ctx, k)?;
        let system = WaveSystem::multiscale(&basis, cfg.tau)?;
        let (c0, c1) = prepare_multiscale_initial(
            &basis,
            &problem.k_op,
            g,
            h,
            f0,
            cfg.tau,
            &problem.m_diag,
        )?;
        // Load base in the multiscale space: B' M f_space.
        let m_space = problem.fine_load_base(space);
        let load = LoadProfile {
            base: basis.project_rhs(&m_space),
            signal: signal.clone(),
        };
        let fine_prev = basis.to_fine(&c0);
        let fine_curr = basis.to_fine(&c1);
        let state = WaveState::new(c0, c1, cfg.tau);
        let (kin, pot) = system.energy(&state.u_prev, &state.u_curr);
        Ok(SweepRun {
            level,
            k,
            basis,
            system,
            state,
            load,
            fine_prev,
            fine_curr,
            err_k: 0.0,
            err_m: 0.0,
            setup_seconds: start.elapsed().as_secs_f64(),
            step_seconds: 0.0,
            energy: vec![EnergySample {
                step: 0,
                t: 0.0,
                kinetic: kin,
                potential: pot,
            }],
        })
    }

    /// Advances one step and refreshes the fine representation.
    fn step(&mut self, t_n: f64) {
        let start = Instant::now();
        let mut load = vec![0.0; self.system.dim()];
        let a = self.load.signal.value(t_n);
        for (l, b) in load.iter_mut().zip(&self.load.base) {
            *l = a * b;
        }
        self.system.step(&mut self.state, &load);
        self.step_seconds += start.elapsed().as_secs_f64();
        std::mem::swap(&mut self.fine_prev, &mut self.fine_curr);
        self.fine_curr = self.basis.to_fine(&self.state.u_curr);
        let (kin, pot) = self.system.energy(&self.state.u_prev, &self.state.u_curr);
        self.energy.push(EnergySample {
            step: self.state.n - 1,
            t: t_n,
            kinetic: kin,
            potential: pot,
        });
    }

    /// Error of the pair `(u^n, u^{n+1})` against reference fine vectors.
    fn accumulate_error(
        &mut self,
        problem: &Problem,
        ref_prev: &[f64],
        ref_curr: &[f64],
        tau: f64,
    ) -> Result<()> {
        let n = self.fine_curr.len();
        let mut half = vec![0.0; n];
        let mut vel = vec![0.0; n];
        for i in 0..n {
            half[i] = 0.5 * (self.fine_prev[i] + self.fine_curr[i])
                - 0.5 * (ref_prev[i] + ref_curr[i]);
            vel[i] = (self.fine_curr[i] - self.fine_prev[i]) / tau
                - (ref_curr[i] - ref_prev[i]) / tau;
        }
        self.err_k = self.err_k.max(problem.k_op.norm(&half)?);
        self.err_m = self.err_m.max(problem.m_op.norm(&vel)?);
        Ok(())
    }
}

fn finish_table(
    cfg: &ExperimentConfig,
    runs: Vec<SweepRun>,
    mut warnings: Vec<String>,
    extra_meta: Vec<(String, String)>,
) -> ConvergenceTable {
    let mut rows = Vec::with_capacity(runs.len());
    let mut energy = Vec::new();
    for run in &runs {
        rows.push(ConvergenceRow {
            level: run.level,
            h: 0.5f64.powi(run.level as i32),
            k: run.k,
            err_k: run.err_k,
            err_m: run.err_m,
            setup_seconds: run.setup_seconds,
            step_seconds: run.step_seconds,
        });
    }
    if let Some(finest) = runs.iter().max_by_key(|r| r.level) {
        energy = finest.energy.clone();
    }
    for pair in rows.windows(2) {
        if pair[1].err_k > pair[0].err_k || pair[1].err_m > pair[0].err_m {
            warnings.push(format!(
                "error not monotone from H=2^-{} to H=2^-{}",
                pair[0].level, pair[1].level
            ));
        }
    }
    let slope_k = fit_slope(&rows.iter().map(|r| (r.h, r.err_k)).collect::<Vec<_>>());
    let slope_m = fit_slope(&rows.iter().map(|r| (r.h, r.err_m)).collect::<Vec<_>>());
    let mut meta = cfg.manifest();
    meta.extend(extra_meta);
    meta.push(("slope_K".into(), format!("{slope_k:.6}")));
    meta.push(("slope_M".into(), format!("{slope_m:.6}")));
    ConvergenceTable {
        kind: cfg.kind,
        rows,
        slope_k,
        slope_m,
        energy,
        warnings,
        meta,
    }
}

/// Homogeneous problem with eigenmode data: the exact solution is
/// `u(t) = cos(sqrt(lambda) t) w` for the sixth eigenpair.
fn run_eigenmode(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    let problem = Problem::build(cfg)?;
    let n = problem.n_free();
    let seed = gamma_seed_of(cfg);
    let eig = eigen::smallest_eigenpairs(&problem.k_op, &problem.m_op, 6, eigen::DEFAULT_TOL, seed)?;
    let lambda = eig.values[5];
    let mode = &eig.vectors[5];
    let omega = lambda.sqrt();
    let horizon = cfg.horizon.unwrap_or(std::f64::consts::PI / omega);
    let n_steps = (horizon / cfg.tau).round().max(2.0) as usize;

    let zero = vec![0.0; n];
    let space = vec![0.0; n];
    let signal = TimeSignal::Zero;
    let mut runs: Vec<SweepRun> = cfg
        .levels
        .iter()
        .map(|&level| SweepRun::build(cfg, &problem, level, mode, &zero, &zero, &space, &signal))
        .collect::<Result<_>>()?;

    // March all levels together against the closed-form solution, comparing
    // u at t_{n+1/2} and D_t u there.
    let tau = cfg.tau;
    for step in 1..n_steps {
        let t_n = step as f64 * tau;
        for run in runs.iter_mut() {
            run.step(t_n);
        }
        let t_half = t_n + 0.5 * tau;
        let exact_half: Vec<f64> = mode.iter().map(|w| (omega * t_half).cos() * w).collect();
        let exact_vel: Vec<f64> = mode
            .iter()
            .map(|w| -omega * (omega * t_half).sin() * w)
            .collect();
        for run in runs.iter_mut() {
            let nf = run.fine_curr.len();
            let mut half = vec![0.0; nf];
            let mut vel = vec![0.0; nf];
            for i in 0..nf {
                half[i] = 0.5 * (run.fine_prev[i] + run.fine_curr[i]) - exact_half[i];
                vel[i] = (run.fine_curr[i] - run.fine_prev[i]) / tau - exact_vel[i];
            }
            run.err_k = run.err_k.max(problem.k_op.norm(&half)?);
            run.err_m = run.err_m.max(problem.m_op.norm(&vel)?);
        }
    }

    let meta = vec![
        ("lambda_6".into(), format!("{lambda:.12e}")),
        ("n_free".into(), format!("{n}")),
        ("n_steps".into(), format!("{n_steps}")),
    ];
    Ok(finish_table(cfg, runs, Vec::new(), meta))
}

fn gamma_seed_of(cfg: &ExperimentConfig) -> u64 {
    match &cfg.network {
        NetworkSource::Generate(g) => g.seed,
        NetworkSource::File(_) => cfg.gamma_seed,
    }
}

/// Inhomogeneous problems against the fine reference scheme, stepped in
/// lockstep with every mesh level.
fn run_reference_comparison(
    cfg: &ExperimentConfig,
    problem: &Problem,
    space: Vec<f64>,
    signal: TimeSignal,
    extra_meta: Vec<(String, String)>,
    warnings: Vec<String>,
) -> Result<ConvergenceTable> {
    let n = problem.n_free();
    let horizon = cfg
        .horizon
        .ok_or_else(|| Error::Config("T is required for reference experiments".into()))?;
    let n_steps = (horizon / cfg.tau).round().max(2.0) as usize;
    let zero = vec![0.0; n];

    let ref_start = Instant::now();
    let ref_system = WaveSystem::fine(&problem.m_op, &problem.k_op, cfg.tau)?;
    let ref_setup = ref_start.elapsed().as_secs_f64();
    let ref_load = LoadProfile {
        base: problem.fine_load_base(&space),
        signal: signal.clone(),
    };
    // Zero initial data in both spaces.
    let mut ref_state = WaveState::new(zero.clone(), zero.clone(), cfg.tau);

    let mut runs: Vec<SweepRun> = cfg
        .levels
        .iter()
        .map(|&level| {
            SweepRun::build(cfg, problem, level, &zero, &zero, &zero, &space, &signal)
        })
        .collect::<Result<_>>()?;

    let mut ref_step_seconds = 0.0;
    let mut load_vec = vec![0.0; n];
    for step in 1..n_steps {
        let t_n = step as f64 * cfg.tau;
        let start = Instant::now();
        let a = ref_load.signal.value(t_n);
        for (l, b) in load_vec.iter_mut().zip(&ref_load.base) {
            *l = a * b;
        }
        ref_system.step(&mut ref_state, &load_vec);
        ref_step_seconds += start.elapsed().as_secs_f64();
        for run in runs.iter_mut() {
            run.step(t_n);
            run.accumulate_error(problem, &ref_state.u_prev, &ref_state.u_curr, cfg.tau)?;
        }
    }

    let mut meta = extra_meta;
    meta.push(("n_free".into(), format!("{n}")));
    meta.push(("n_steps".into(), format!("{n_steps}")));
    meta.push(("reference_setup_seconds".into(), format!("{ref_setup:.3}")));
    meta.push((
        "reference_step_seconds".into(),
        format!("{ref_step_seconds:.3}"),
    ));
    Ok(finish_table(cfg, runs, warnings, meta))
}

fn run_scalar_inhomogeneous(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    let problem = Problem::build(cfg)?;
    let n = problem.n_free();
    let space = vec![1.0; n];
    let signal = TimeSignal::Sine {
        omega: 2.0 * std::f64::consts::PI,
        amplitude: 1.0,
    };
    run_reference_comparison(cfg, &problem, space, signal, Vec::new(), Vec::new())
}

fn run_elastic(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    let problem = Problem::build(cfg)?;
    let n = problem.n_free();
    let map = problem.k_op.dof_map().unwrap();

    // Rigidity probe: a singular or near-singular constrained stiffness means
    // Γ does not rigidify the network; surfaced as a warning, not silently.
    let mut warnings = Vec::new();
    match crate::linalg::Factorization::cholesky(
        problem.k_op.matrix(),
        crate::linalg::Ordering::NestedDissection,
    ) {
        Ok(_) => {}
        Err(e) => warnings.push(format!(
            "elastic stiffness is not positive definite ({e}); the Dirichlet set may not rigidify the network"
        )),
    }

    // Forcing space: 1e5 x1^2 on the z component.
    let mut space = vec![0.0; n];
    for rank in 0..map.n_free_nodes() {
        let node = map.free_nodes()[rank];
        let x1 = problem.net.coord(node)[0];
        space[rank * 3 + 2] = 1e5 * x1 * x1;
    }
    let signal = TimeSignal::Sine {
        omega: 0.4 * std::f64::consts::PI,
        amplitude: 1.0,
    };
    run_reference_comparison(cfg, &problem, space, signal, Vec::new(), warnings)
}

/// Writes `convergence.csv`, `energy.csv`, `convergence.dat`, and a
/// `meta.txt` manifest into `dir`.
pub fn emit_outputs(table: &ConvergenceTable, dir: &std::path::Path) -> Result<()> {
    use std::fmt::Write as _;
    std::fs::create_dir_all(dir)?;

    let mut csv = String::from("H,k,err_K,err_M,setup_seconds,step_seconds\n");
    for r in &table.rows {
        writeln!(
            csv,
            "{:e},{},{:e},{:e},{:.3},{:.3}",
            r.h, r.k, r.err_k, r.err_m, r.setup_seconds, r.step_seconds
        )
        .unwrap();
    }
    std::fs::write(dir.join("convergence.csv"), csv)?;

    let mut energy = String::from("step,t,kinetic,potential,total\n");
    for e in &table.energy {
        writeln!(
            energy,
            "{},{:e},{:e},{:e},{:e}",
            e.step,
            e.t,
            e.kinetic,
            e.potential,
            e.total()
        )
        .unwrap();
    }
    std::fs::write(dir.join("energy.csv"), energy)?;

    let mut dat = String::from("# H err_K err_M\n");
    for r in &table.rows {
        writeln!(dat, "{:e} {:e} {:e}", r.h, r.err_k, r.err_m).unwrap();
    }
    std::fs::write(dir.join("convergence.dat"), dat)?;

    let mut meta = String::new();
    for (k, v) in &table.meta {
        writeln!(meta, "{k} = {v}").unwrap();
    }
    for w in &table.warnings {
        writeln!(meta, "warning = {w}").unwrap();
    }
    std::fs::write(dir.join("meta.txt"), meta)?;
    Ok(())
}

/// Canonical form of `convergence.csv` for determinism comparisons: the two
/// wall-clock columns are masked, everything else must match byte for byte.
pub fn mask_timing_columns(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() == 6 && fields[0] != "H" {
                format!("{},{},{},{},-,-", fields[0], fields[1], fields[2], fields[3])
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
