//! Run orchestration: each command parses a validated config, executes the
//! matching solver or study, writes the run directory (config echo, norms
//! CSV, snapshots, optional VTK, manifest) and maps the termination reason to
//! an exit code.
//!
//! Exit codes: 0 success, 2 validation failure, 3 bound exit, 4
//! non-contraction, 5 internal error.

use crate::config::{echo_config, Config, RunMode, StudyParams, TimeSpec};
use crate::output::{norms_csv, write_series, ManifestBuilder};
use porowave_core::elliptic::EllipticProblem;
use porowave_core::harness::{
    study_bv_growth, study_contraction_viscoelastic, study_contraction_viscous,
    study_euler_convergence, study_galerkin_crosscheck, study_gronwall_viscoelastic,
    study_gronwall_viscous, study_jump_invariance, study_variant_gap, StudyResult,
};
use porowave_core::model::{log_transform, Variant};
use porowave_core::norms::TimeSeries;
use porowave_core::report::{RunReport, Termination};
use porowave_core::viscoelastic::ViscoRunConfig;
use porowave_core::viscous::{select_safe_horizon, ViscousMode, ViscousRunConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BOUND: i32 = 3;
pub const EXIT_NON_CONTRACTION: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug)]
pub enum CmdError {
    Validation(String),
    Internal(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Validation(_) => EXIT_VALIDATION,
            CmdError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Validation(m) => write!(f, "validation: {m}"),
            CmdError::Internal(m) => write!(f, "internal: {m}"),
        }
    }
}

impl std::error::Error for CmdError {}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Internal(format!("io: {e}"))
    }
}

/// Flags shared by all run commands.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub stride: Option<usize>,
    pub vtk: bool,
    pub threads: usize,
    pub seed: u64,
}

impl RunContext {
    fn prepare(&self, config: &Config) -> Result<(PathBuf, ManifestBuilder, Instant), CmdError> {
        std::fs::create_dir_all(&self.out_dir)?;
        let echo_path = self.out_dir.join("config.echo");
        std::fs::write(&echo_path, echo_config(config))?;
        let mut manifest = ManifestBuilder::new(&echo_path, config.grid, self.threads, self.seed);
        if config.partition.subdomains() > 1 {
            manifest.set(
                "partition-note",
                "voxelized subdomain boundaries stand in for smooth interfaces",
            );
        }
        Ok((echo_path, manifest, Instant::now()))
    }

    fn stride_for(&self, config: &Config) -> usize {
        self.stride.unwrap_or(config.stride).max(1)
    }
}

fn exit_code_for(termination: &Termination) -> i32 {
    match termination {
        Termination::Horizon => EXIT_OK,
        Termination::BoundExit { .. } => EXIT_BOUND,
        Termination::NonContraction => EXIT_NON_CONTRACTION,
        Termination::Error(_) => EXIT_INTERNAL,
    }
}

fn viscous_run_config(config: &Config, horizon: f64) -> ViscousRunConfig {
    let mut run = ViscousRunConfig::new(config.coeffs, config.phi0.clone(), horizon, config.steps);
    run.mode = match config.mode {
        RunMode::Euler => ViscousMode::Euler,
        RunMode::Picard => ViscousMode::Picard,
    };
    run.picard_tol = config.picard_tol;
    run.picard_max_iter = config.picard_max_iter;
    run.eps_min = config.eps_min;
    run.r_max = config.r_max;
    run.frozen_u = config.frozen_u;
    run.elliptic_tol = config.elliptic_tol;
    run.jump_threshold = config.jump_threshold;
    run
}

fn visco_run_config(config: &Config, horizon: f64) -> Result<ViscoRunConfig, CmdError> {
    let state0 = match config.coeffs.variant {
        Variant::LogTransformed => {
            let mut out = config.phi0.clone();
            for v in out.values_mut() {
                *v = log_transform(*v).map_err(|e| CmdError::Validation(format!("{e}")))?;
            }
            out
        }
        _ => config.phi0.clone(),
    };
    let mut run =
        ViscoRunConfig::new(config.coeffs, state0, config.u0_field(), horizon, config.steps);
    run.inner_tol = config.inner_tol;
    run.inner_max_iter = config.inner_max_iter;
    run.xi_tol = config.xi_tol;
    run.xi_max_iter = config.xi_max_iter;
    run.gamma = config.gamma;
    run.partition = Some(config.partition.clone());
    run.eps_min = config.eps_min;
    run.r_max = config.r_max;
    run.elliptic_tol = config.elliptic_tol;
    run.jump_threshold = config.jump_threshold;
    Ok(run)
}

fn resolve_horizon(config: &Config, ctx: &RunContext) -> Result<f64, CmdError> {
    match config.time {
        TimeSpec::Fixed(t) => Ok(t),
        TimeSpec::Auto { cap } => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            select_safe_horizon(&config.phi0, &config.coeffs, &mut rng, cap, config.frozen_u)
                .map_err(|e| CmdError::Validation(format!("safe horizon: {e}")))
        }
    }
}

fn write_run_outputs(
    ctx: &RunContext,
    config: &Config,
    mut manifest: ManifestBuilder,
    series: &TimeSeries,
    report: &RunReport,
    started: Instant,
) -> Result<i32, CmdError> {
    let csv_path = ctx.out_dir.join("norms.csv");
    std::fs::write(&csv_path, norms_csv(report))?;
    manifest.record_file(&csv_path);
    let files = write_series(
        &ctx.out_dir,
        &config.prefix,
        series,
        ctx.stride_for(config),
        ctx.vtk || config.vtk,
    )?;
    for f in &files {
        manifest.record_file(f);
    }
    manifest.set("achieved-horizon", &report.achieved_t.to_string());
    if let Termination::BoundExit { t_exit } = report.termination {
        manifest.set("t-exit", &t_exit.to_string());
    }
    manifest.set("cbar-estimate", &report.cbar_estimate.to_string());
    if report.mild_residual_max > 0.0 {
        manifest.set("mild-residual-max", &report.mild_residual_max.to_string());
    }
    manifest.write(
        &ctx.out_dir,
        report.termination.name(),
        started.elapsed().as_secs_f64(),
    )?;
    Ok(exit_code_for(&report.termination))
}

/// Solves the instantaneous elliptic pressure balance at the initial state.
pub fn cmd_solve_elliptic(config: &Config, ctx: &RunContext) -> Result<i32, CmdError> {
    let (_, mut manifest, started) = ctx.prepare(config)?;
    let problem = EllipticProblem::from_state(&config.coeffs, &config.phi0)
        .map_err(|e| CmdError::Validation(format!("{e}")))?
        .with_tol(config.elliptic_tol);
    let solution = problem.solve(None).map_err(|e| CmdError::Internal(format!("{e}")))?;
    let check = problem.uniform_bound_check(&solution);

    let mut series = TimeSeries::new(config.phi0.clone(), solution.u.clone())
        .map_err(|e| CmdError::Internal(format!("{e}")))?;
    let _ = &mut series;
    let mut report = RunReport::new();
    report.steps.push(porowave_core::report::StepStats {
        t: 0.0,
        phi_inf: porowave_core::norms::lp_norm(&config.phi0, f64::INFINITY).expect("inf"),
        phi_min: config.phi0.min(),
        phi_bv: porowave_core::norms::bv_norm(&config.phi0),
        u_inf: check.u_inf,
        u_w12: check.u_w12,
        rate_inf: 0.0,
        jump_face_count: 0,
    });
    report.achieved_t = 0.0;

    manifest.set("newton-iterations", &solution.newton_iters.to_string());
    manifest.set("cg-iterations", &solution.cg_iters_total.to_string());
    manifest.set("residual-norm", &solution.residual_norm.to_string());
    manifest.set("w12-ratio", &check.ratio.to_string());
    write_run_outputs(ctx, config, manifest, &series, &report, started)
}

/// Time integration of the viscous limit (explicit Euler or Picard).
pub fn cmd_run_viscous(config: &Config, ctx: &RunContext) -> Result<i32, CmdError> {
    let (_, manifest, started) = ctx.prepare(config)?;
    let horizon = resolve_horizon(config, ctx)?;
    let run = viscous_run_config(config, horizon);
    run.validate().map_err(|e| CmdError::Validation(format!("{e}")))?;
    let result = match run.mode {
        ViscousMode::Euler => porowave_core::viscous::run_euler(&run),
        ViscousMode::Picard => porowave_core::viscous::picard_solve(&run),
    };
    let (series, report) = result.map_err(|e| CmdError::Internal(format!("{e}")))?;
    write_run_outputs(ctx, config, manifest, &series, &report, started)
}

/// Coupled viscoelastic integration (per-step Picard backward Euler).
pub fn cmd_run_viscoelastic(config: &Config, ctx: &RunContext) -> Result<i32, CmdError> {
    let (_, manifest, started) = ctx.prepare(config)?;
    let horizon = resolve_horizon(config, ctx)?;
    let run = visco_run_config(config, horizon)?;
    run.validate().map_err(|e| CmdError::Validation(format!("{e}")))?;
    let (series, report) = porowave_core::viscoelastic::run_viscoelastic(&run)
        .map_err(|e| CmdError::Internal(format!("{e}")))?;
    write_run_outputs(ctx, config, manifest, &series, &report, started)
}

fn study_params(config: &Config) -> StudyParams {
    config.study.clone().unwrap_or_default()
}

/// Runs one named study and writes its CSV table and verdict text.
pub fn cmd_study(name: &str, config: &Config, ctx: &RunContext) -> Result<i32, CmdError> {
    let (_, mut manifest, started) = ctx.prepare(config)?;
    let params = study_params(config);
    if let Some(declared) = &params.name {
        if declared != name {
            return Err(CmdError::Validation(format!(
                "study name {declared:?} in config does not match requested {name:?}"
            )));
        }
    }
    let horizon = resolve_horizon(config, ctx)?;
    let result: StudyResult = match name {
        "euler-convergence" => {
            let run = viscous_run_config(config, horizon);
            study_euler_convergence(&run, params.levels.max(2))
                .map_err(|e| CmdError::Internal(format!("{e}")))?
        }
        "jump-invariance" => {
            let viscous = viscous_run_config(config, horizon);
            // matched viscoelastic twin of the viscous configuration
            let mut twin = config.clone();
            twin.coeffs.variant = match config.coeffs.variant {
                Variant::ViscousFull => Variant::LogTransformed,
                _ => Variant::SmallPorosity,
            };
            if !(twin.coeffs.q > 0.0) {
                twin.coeffs.q = 1.0;
            }
            let visco = visco_run_config(&twin, horizon)?;
            study_jump_invariance(&viscous, Some(&visco), &config.partition)
                .map_err(|e| CmdError::Internal(format!("{e}")))?
        }
        "gronwall" => {
            if config.coeffs.variant.is_viscous() {
                let run = viscous_run_config(config, horizon);
                study_gronwall_viscous(&run, &params.deltas)
                    .map_err(|e| CmdError::Internal(format!("{e}")))?
            } else {
                let run = visco_run_config(config, horizon)?;
                study_gronwall_viscoelastic(&run, &params.deltas)
                    .map_err(|e| CmdError::Internal(format!("{e}")))?
            }
        }
        "contraction-scaling" => {
            let horizons = if params.horizons.is_empty() {
                vec![horizon, 0.5 * horizon, 0.25 * horizon]
            } else {
                params.horizons.clone()
            };
            if config.coeffs.variant.is_viscous() {
                let run = viscous_run_config(config, horizon);
                study_contraction_viscous(&run, &horizons)
                    .map_err(|e| CmdError::Internal(format!("{e}")))?
            } else {
                let run = visco_run_config(config, horizon)?;
                study_contraction_viscoelastic(&run, &horizons)
                    .map_err(|e| CmdError::Internal(format!("{e}")))?
            }
        }
        "bv-growth" => {
            let run = viscous_run_config(config, horizon);
            study_bv_growth(&run).map_err(|e| CmdError::Internal(format!("{e}")))?
        }
        "variant-gap" => {
            let mut base = config.clone();
            base.coeffs.variant = Variant::SmallPorosity;
            if !(base.coeffs.q > 0.0) {
                base.coeffs.q = 1.0;
            }
            let run = visco_run_config(&base, horizon)?;
            study_variant_gap(&run, &params.scalings)
                .map_err(|e| CmdError::Internal(format!("{e}")))?
        }
        "galerkin-crosscheck" => {
            let run = visco_run_config(config, horizon)?;
            study_galerkin_crosscheck(&run, params.modes)
                .map_err(|e| CmdError::Internal(format!("{e}")))?
        }
        other => {
            return Err(CmdError::Validation(format!(
                "unknown study {other:?}; known: euler-convergence, jump-invariance, gronwall, \
                 contraction-scaling, bv-growth, variant-gap, galerkin-crosscheck"
            )))
        }
    };

    let csv_path = ctx.out_dir.join("study.csv");
    std::fs::write(&csv_path, result.to_csv())?;
    manifest.record_file(&csv_path);
    let verdict_path = ctx.out_dir.join("verdict.txt");
    std::fs::write(&verdict_path, result.verdict_text())?;
    manifest.record_file(&verdict_path);
    manifest.set("study", &result.name);
    manifest.set("verdict", if result.verdict.passed() { "pass" } else { "fail" });
    manifest.write(&ctx.out_dir, "horizon", started.elapsed().as_secs_f64())?;
    Ok(EXIT_OK)
}

/// Turns a run directory into gnuplot-ready tables plus a plotting script.
pub fn cmd_emit_plots(run_dir: &Path) -> Result<i32, CmdError> {
    if !run_dir.is_dir() {
        return Err(CmdError::Validation(format!(
            "run directory {} does not exist",
            run_dir.display()
        )));
    }
    let mut phi_files: Vec<PathBuf> = Vec::new();
    for entry in std::fs::read_dir(run_dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.contains("_phi_") && name.ends_with(".dat") {
            phi_files.push(path);
        }
    }
    phi_files.sort();
    if phi_files.is_empty() {
        return Err(CmdError::Validation(format!(
            "no snapshot files in {}",
            run_dir.display()
        )));
    }
    let mut emitted = Vec::new();
    for phi_path in &phi_files {
        let (phi, t) = crate::output::read_snapshot(phi_path)?;
        let u_path_name = phi_path
            .file_name()
            .and_then(|n| n.to_str())
            .expect("checked above")
            .replace("_phi_", "_u_");
        let u_path = run_dir.join(&u_path_name);
        let u = if u_path.exists() {
            Some(crate::output::read_snapshot(&u_path)?.0)
        } else {
            None
        };
        let grid = phi.grid();
        let out_name = phi_path
            .file_name()
            .and_then(|n| n.to_str())
            .expect("checked above")
            .replace("_phi_", "_plot_")
            .replace(".dat", ".txt");
        let out_path = run_dir.join(&out_name);
        let mut table = format!("# t = {t}\n");
        if grid.dim() == 1 {
            table.push_str("# x phi u\n");
            for i in 0..grid.num_cells() {
                let x = grid.cell_center(i)[0];
                let uval = u.as_ref().map(|f| f.values()[i]).unwrap_or(0.0);
                table.push_str(&format!("{x} {} {uval}\n", phi.values()[i]));
            }
        } else {
            // ny x nx matrix of phi (u gets its own file)
            let [nx, ny] = grid.cells();
            for iy in 0..ny {
                let row: Vec<String> = (0..nx)
                    .map(|ix| phi.values()[grid.index(ix, iy)].to_string())
                    .collect();
                table.push_str(&row.join(" "));
                table.push('\n');
            }
            if let Some(u) = &u {
                let mut utable = format!("# t = {t}\n");
                for iy in 0..ny {
                    let row: Vec<String> =
                        (0..nx).map(|ix| u.values()[grid.index(ix, iy)].to_string()).collect();
                    utable.push_str(&row.join(" "));
                    utable.push('\n');
                }
                let u_out = run_dir.join(out_name.replace("_plot_", "_plot_u_"));
                std::fs::write(&u_out, utable)?;
            }
        }
        std::fs::write(&out_path, table)?;
        emitted.push(out_name);
    }
    // ready-made plotting script
    let first = emitted.first().expect("nonempty");
    let last = emitted.last().expect("nonempty");
    let script = format!(
        "# gnuplot script generated by porowave emit-plots\n\
         set key left\n\
         plot \"{first}\" using 1:2 with lines title \"phi(0)\", \\\n     \
         \"{last}\" using 1:2 with lines title \"phi(T)\"\n\
         pause -1\n"
    );
    std::fs::write(run_dir.join("plot.gp"), script)?;
    Ok(EXIT_OK)
}
