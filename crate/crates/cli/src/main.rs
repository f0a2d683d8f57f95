//! `synrm`: drive the machine design pipeline from the shell.
//!
//! Subcommands mirror the pipeline stages: `solve` a single state, `sweep`
//! torque over rotation, `optimize` the rotor (optionally from an embedded
//! study preset), `postprocess` magnet directions into blocks, and
//! `curves` to tabulate the material models. Every run drops its outputs
//! plus a `summary.txt` manifest with content hashes into the output
//! directory.

mod config;
mod summary;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use synrm_core::csvout;
use synrm_core::fem::{DensityField, Machine, PhysicalDesign};
use synrm_core::optimizer::{optimize_with, ChainEval, OptimizeConfig};
use synrm_core::postprocess::{
    apply_clustering, extract_magnet_cells, kmeans_cluster, ClusterConfig,
};
use synrm_core::presets::{initial_field, Preset};
use synrm_core::torque::{four_point_torque, torque_sweep, ArkkioEvaluator};
use synrm_core::vtk::{self, VtkGrid};

use config::RunConfig;
use summary::Summary;

#[derive(Parser)]
#[command(
    name = "synrm",
    version,
    about = "Design pipeline for a magnet-assisted synchronous reluctance machine"
)]
struct Cli {
    /// TOML run configuration; benchmark defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one magnetostatic state and export the field.
    Solve {
        /// Rotor angle in radians.
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Physical design CSV; solid iron rotor when omitted.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Torque at equally spaced rotor angles over a full turn.
    Sweep {
        #[arg(long, default_value_t = 60)]
        positions: usize,
        /// Physical design CSV; solid iron rotor when omitted.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Run the density-based topology optimization.
    Optimize {
        /// Embedded study preset (see `--preset help` for names).
        #[arg(long)]
        preset: Option<String>,
        /// Raw design CSV to start from. Required for the magnet presets,
        /// which continue from an iron-air-40 result.
        #[arg(long)]
        start: Option<PathBuf>,
        /// Cap on optimizer iterations, overriding preset/config.
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Cluster the magnet directions of a finished design into blocks.
    Postprocess {
        /// Physical design CSV from an optimize run.
        #[arg(long)]
        design: PathBuf,
        /// Number of magnet blocks, overriding the config.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate the reluctivity curve, density interpolations and the
    /// projection family as CSV.
    Curves,
}

fn main() -> Result<()> {
    init_thread_pool()?;
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    match cli.cmd {
        Command::Solve { theta, design } => cmd_solve(&cfg, &out, theta, design),
        Command::Sweep { positions, design } => cmd_sweep(&cfg, &out, positions, design),
        Command::Optimize {
            preset,
            start,
            max_iters,
        } => cmd_optimize(&cfg, &out, preset.as_deref(), start, max_iters),
        Command::Postprocess { design, k, seed } => cmd_postprocess(&cfg, &out, &design, k, seed),
        Command::Curves => cmd_curves(&cfg, &out),
    }
}

fn init_thread_pool() -> Result<()> {
    if let Ok(v) = std::env::var("PMSYNRM_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("PMSYNRM_THREADS must be a number, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("installing the thread pool")?;
    }
    Ok(())
}

fn solid_iron(n: usize) -> PhysicalDesign {
    PhysicalDesign::new(vec![1.0; n], vec![[0.0, 0.0]; n])
}

fn load_physical(machine: &Machine, path: Option<&Path>) -> Result<PhysicalDesign> {
    match path {
        Some(p) => {
            let d = csvout::read_physical(p)?;
            if d.len() != machine.n_design() {
                bail!(
                    "{}: design has {} elements, the mesh has {}",
                    p.display(),
                    d.len(),
                    machine.n_design()
                );
            }
            Ok(d)
        }
        None => Ok(solid_iron(machine.n_design())),
    }
}

fn cmd_solve(cfg: &RunConfig, out: &Path, theta: f64, design: Option<PathBuf>) -> Result<()> {
    let mut summary = Summary::new("solve");
    let machine = cfg.build_machine()?;
    let design = load_physical(&machine, design.as_deref())?;
    let sol = machine.solve_state(&design, theta, None)?;
    let torque = ArkkioEvaluator::new(&machine).torque_of(&machine, &sol);

    let state_path = out.join("state.vtk");
    vtk::write_state(&state_path, &machine, &sol)?;
    summary
        .kv("theta_rad", theta)
        .kv("torque_nm", torque)
        .kv("newton_iters", sol.newton_iters)
        .kv("residual", sol.residual);
    summary.file(&state_path)?;
    summary.write(out)?;
    println!("theta = {theta} rad: torque = {torque} N*m ({} Newton iters)", sol.newton_iters);
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, out: &Path, positions: usize, design: Option<PathBuf>) -> Result<()> {
    if positions == 0 {
        bail!("--positions must be at least 1");
    }
    let mut summary = Summary::new("sweep");
    let machine = cfg.build_machine()?;
    let design = load_physical(&machine, design.as_deref())?;
    let arkkio = ArkkioEvaluator::new(&machine);
    let thetas: Vec<f64> = (0..positions)
        .map(|k| 2.0 * PI * k as f64 / positions as f64)
        .collect();
    let samples = torque_sweep(&machine, &arkkio, &design, &thetas)?;

    let path = out.join("sweep.csv");
    csvout::write_sweep(&path, &samples)?;
    let mean = samples.iter().map(|s| s.torque).sum::<f64>() / samples.len() as f64;
    let max = samples.iter().map(|s| s.torque).fold(f64::MIN, f64::max);
    summary
        .kv("positions", positions)
        .kv("torque_mean_nm", mean)
        .kv("torque_max_nm", max);
    summary.file(&path)?;
    summary.write(out)?;
    println!("{positions} positions: mean torque {mean} N*m, max {max} N*m");
    Ok(())
}

/// Design snapshot VTK from a mid-run chain evaluation.
fn write_eval_snapshot(path: &Path, machine: &Machine, eval: &ChainEval) -> Result<()> {
    let mut grid = VtkGrid::from_design_cells("design iterate", machine.design_mesh());
    let norm: Vec<f64> = eval
        .physical
        .mag
        .iter()
        .map(|m| (m[0] * m[0] + m[1] * m[1]).sqrt())
        .collect();
    let angle: Vec<f64> = eval.physical.mag.iter().map(|m| m[1].atan2(m[0])).collect();
    grid.cell_scalars("rho_nu_filtered", eval.rho_nu_tilde.clone())
        .cell_scalars("iron_density", eval.physical.rho_nu.clone())
        .cell_scalars("mag_norm", norm)
        .cell_scalars("mag_angle", angle);
    grid.write(path)?;
    Ok(())
}

fn cmd_optimize(
    cfg: &RunConfig,
    out: &Path,
    preset: Option<&str>,
    start: Option<PathBuf>,
    max_iters: Option<usize>,
) -> Result<()> {
    let mut summary = Summary::new("optimize");
    let (machine, mut ocfg, start_field, label): (Machine, OptimizeConfig, DensityField, String) =
        match preset {
            Some(name) => {
                let study = Preset::from_name(name)?.study();
                let machine = cfg.build_preset_machine(study.machine.clone())?;
                let upstream = match &start {
                    Some(p) => Some(csvout::read_design(p)?),
                    None => None,
                };
                let field = initial_field(&study, &machine, upstream.as_ref())?;
                (machine, study.optimize.clone(), field, name.to_string())
            }
            None => {
                let machine = cfg.build_machine()?;
                let field = match &start {
                    Some(p) => {
                        let f = csvout::read_design(p)?;
                        f.validate(machine.n_design())?;
                        f
                    }
                    None => DensityField::gray(machine.n_design()),
                };
                (machine, cfg.optimize_config(), field, "custom".to_string())
            }
        };
    if let Some(mi) = max_iters {
        ocfg.filter.max_iters = mi;
    }
    summary.kv("study", &label);
    summary.kv("design_elements", machine.n_design());

    let snapshot_every = cfg.output.snapshot_every;
    let mut snapshot_err: Option<anyhow::Error> = None;
    let result = optimize_with(&machine, &start_field, &ocfg, |row, ev| {
        if row.iter % 10 == 0 {
            eprintln!(
                "iter {:4}  L {:+.6e}  T {:+.5} N*m  vol_fe {:.4}  vol_mag {:.4}  |g| {:.2e}",
                row.iter, row.lagrangian, row.t_bar, row.vol_iron, row.vol_mag, row.grad_inf
            );
        }
        if snapshot_every > 0 && row.iter % snapshot_every == 0 && snapshot_err.is_none() {
            let path = out.join(format!("design_iter{:04}.vtk", row.iter));
            if let Err(e) = write_eval_snapshot(&path, &machine, &ev.eval) {
                snapshot_err = Some(e);
            }
        }
    })?;
    if let Some(e) = snapshot_err {
        return Err(e.context("writing design snapshot"));
    }

    let history_path = out.join("history.csv");
    csvout::write_history(&history_path, &result.history)?;
    let raw_path = out.join("design_raw.csv");
    csvout::write_design(&raw_path, &result.design)?;
    let phys_path = out.join("design_physical.csv");
    csvout::write_physical(&phys_path, &result.physical)?;
    let design_vtk = out.join("design.vtk");
    vtk::write_design_snapshot(&design_vtk, &machine, &result.design, &result.physical)?;
    let state_vtk = out.join("state.vtk");
    vtk::write_state(&state_vtk, &machine, &result.states[0])?;

    summary
        .kv("termination", format!("{:?}", result.termination))
        .kv("iterations", result.history.len())
        .kv("t_bar_nm", result.t_bar)
        .kv("vol_iron", result.vol_iron)
        .kv("vol_magnet", result.vol_mag);

    for p in [&history_path, &raw_path, &phys_path, &design_vtk, &state_vtk] {
        summary.file(p)?;
    }
    if snapshot_every > 0 {
        let mut iter = 0;
        loop {
            let p = out.join(format!("design_iter{iter:04}.vtk"));
            if !p.exists() {
                break;
            }
            summary.file(&p)?;
            iter += snapshot_every;
        }
    }

    if ocfg.magnets {
        let ccfg = cfg.cluster_config(&machine);
        cluster_and_report(cfg, out, &machine, &result.physical, ccfg, &mut summary)?;
    } else {
        summary.kv("t_bar_after_kmeans_nm", "n/a (magnets disabled)");
    }

    summary.write(out)?;
    println!(
        "{label}: T = {} N*m after {} iterations ({:?}), vol_fe = {:.4}, vol_mag = {:.4}",
        result.t_bar,
        result.history.len(),
        result.termination,
        result.vol_iron,
        result.vol_mag
    );
    Ok(())
}

/// Shared by `optimize` (as a final step) and `postprocess`: cluster the
/// magnet cells, re-evaluate the torque, and record both.
fn cluster_and_report(
    _cfg: &RunConfig,
    out: &Path,
    machine: &Machine,
    physical: &PhysicalDesign,
    ccfg: ClusterConfig,
    summary: &mut Summary,
) -> Result<()> {
    let arkkio = ArkkioEvaluator::new(machine);
    let before = four_point_torque(machine, &arkkio, physical, None)?;
    summary.kv("t_bar_nm_preclustering", before.average);

    let cells = match extract_magnet_cells(
        machine,
        physical,
        ccfg.mag_threshold,
        ccfg.iron_threshold,
    ) {
        Ok(cells) => cells,
        Err(synrm_core::Error::Postprocess(msg)) => {
            summary.kv("t_bar_after_kmeans_nm", format!("n/a ({msg})"));
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    summary.kv("magnet_cells", cells.len());
    summary.kv("clusters", ccfg.k);
    summary.kv("cluster_seed", ccfg.seed);

    let clustering = kmeans_cluster(&cells, &ccfg)?;
    let clustered = apply_clustering(physical, &cells, &clustering);
    let after = four_point_torque(machine, &arkkio, &clustered, Some(&before.states))?;

    let clusters_path = out.join("clusters.csv");
    csvout::write_clusters(&clusters_path, &cells, &clustering)?;
    let clustered_path = out.join("design_clustered.csv");
    csvout::write_physical(&clustered_path, &clustered)?;

    summary
        .kv("kmeans_iterations", clustering.iterations)
        .kv("t_bar_after_kmeans_nm", after.average)
        .kv(
            "kmeans_torque_retention",
            format!("{:.4}", after.average / before.average),
        );
    summary.file(&clusters_path)?;
    summary.file(&clustered_path)?;
    println!(
        "k-means (k = {}): torque {} -> {} N*m",
        ccfg.k, before.average, after.average
    );
    Ok(())
}

fn cmd_postprocess(
    cfg: &RunConfig,
    out: &Path,
    design: &Path,
    k: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let mut summary = Summary::new("postprocess");
    let machine = cfg.build_machine()?;
    let physical = load_physical(&machine, Some(design))?;
    let mut ccfg = cfg.cluster_config(&machine);
    if let Some(k) = k {
        ccfg.k = k;
    }
    if let Some(s) = seed {
        ccfg.seed = s;
    }
    cluster_and_report(cfg, out, &machine, &physical, ccfg, &mut summary)?;
    summary.write(out)?;
    Ok(())
}

fn cmd_curves(cfg: &RunConfig, out: &Path) -> Result<()> {
    use synrm_core::materials::InterpScheme;

    let mut summary = Summary::new("curves");
    let machine_cfg = cfg.machine_config()?;

    let nu_path = out.join("curves_reluctivity.csv");
    std::fs::write(
        &nu_path,
        csvout::reluctivity_table_csv(&machine_cfg.iron, 2.5, 500),
    )?;

    let schemes = [
        (
            "simp",
            InterpScheme::Simp {
                exponent: cfg.material.simp_exponent,
            },
        ),
        (
            "lukas",
            InterpScheme::Lukas {
                lambda: cfg.material.lukas_lambda,
            },
        ),
        ("td_hermite", InterpScheme::td_hermite_default()),
    ];
    let interp_path = out.join("curves_interpolation.csv");
    std::fs::write(&interp_path, csvout::interpolation_table_csv(&schemes, 500))?;

    let proj_path = out.join("curves_projection.csv");
    std::fs::write(
        &proj_path,
        csvout::projection_table_csv(
            &[1.0, 2.0, 4.0, 8.0, 16.0],
            cfg.optimizer.rho_cut,
            500,
        ),
    )?;

    for p in [&nu_path, &interp_path, &proj_path] {
        summary.file(p)?;
    }
    summary.write(out)?;
    println!(
        "wrote {}, {}, {}",
        nu_path.display(),
        interp_path.display(),
        proj_path.display()
    );
    Ok(())
}
