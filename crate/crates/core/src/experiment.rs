//! Orchestration of configured runs: experiments, single simulations and
//! kernel inspection, with their files.

use std::path::Path;

use serde::Serialize;

use crate::config::{ParticleScheme, RunConfig, RunModel, RunSpec};
use crate::error::{invalid, Result};
use crate::grid::VelocityGrid;
use crate::homogeneous::{relax_with, RelaxOptions, DT_FACTOR};
use crate::kernels::KernelSet;
use crate::kinetic::{CollisionMode, KineticConfig, KineticSolver, VelocityInit};
use crate::macroscopic::{assemble_macro_model, MacroModel, MacroSolver, MacroVariant};
use crate::output::{ensure_dir, write_csv, write_csv_records, write_field, write_text, Manifest, ManifestRun};
use crate::par::Exec;
use crate::particles::{estimate_density, simulate_event_driven, step_discrete, JumpModel, JumpStatistics, ParticleEnsemble};
use crate::spatial::{FieldMoments, SpatialGrid};

/// Spatial moments of one output field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotRow {
    pub run: String,
    pub model: String,
    pub time: f64,
    pub mass: f64,
    pub outflow: f64,
    pub cx: f64,
    pub cy: f64,
    pub var_x: f64,
    pub cov_xy: f64,
    pub var_y: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    /// Angle of the major axis in `[0, pi)`.
    pub major_angle: f64,
}

impl SnapshotRow {
    fn new(run: &RunSpec, time: f64, m: &FieldMoments, outflow: f64) -> Self {
        let (eig, dir) = m.principal();
        Self {
            run: run.name.clone(),
            model: model_name(run.model).to_string(),
            time,
            mass: m.mass,
            outflow,
            cx: m.center[0],
            cy: m.center[1],
            var_x: m.cov[0][0],
            cov_xy: m.cov[0][1],
            var_y: m.cov[1][1],
            eig_min: eig[0],
            eig_max: eig[1],
            major_angle: dir[1].atan2(dir[0]).rem_euclid(std::f64::consts::PI),
        }
    }
}

/// Result of one run: its snapshots and final density.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: RunSpec,
    pub space: SpatialGrid,
    pub rows: Vec<SnapshotRow>,
    pub rho: Vec<f64>,
    pub macro_model: Option<MacroModel>,
    pub files: Vec<String>,
}

impl RunOutput {
    pub fn last(&self) -> &SnapshotRow {
        self.rows.last().expect("at least one snapshot")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Execution of the loops inside each solver.
    pub exec: Exec,
    /// Run independent variants concurrently.
    pub concurrent: bool,
}

pub fn model_name(m: RunModel) -> &'static str {
    match m {
        RunModel::Bgk => "bgk",
        RunModel::TwoOperator => "two_operator",
        RunModel::M1 => "m1",
        RunModel::M2 => "m2",
        RunModel::M3 => "m3",
        RunModel::M4 => "m4",
    }
}

fn stem(run: &str, t: f64) -> String {
    format!("{run}_t{t:.4}")
}

/// Run one configured variant, writing its fields into `out` when given.
pub fn run_one(cfg: &RunConfig, spec: &RunSpec, out: Option<&Path>, exec: Exec) -> Result<RunOutput> {
    let ks = cfg.kernel_set(spec.mean_speed.as_ref())?;
    let space = cfg.space()?;
    let rho0 = cfg.initial_density(&space);
    let t_end = spec.t_end.unwrap_or(cfg.time.t_end);
    let times = cfg.output_times(t_end);
    let hash = cfg.hash();
    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut emit = |t: f64, rho: &[f64], m: &FieldMoments, outflow: f64| -> Result<()> {
        rows.push(SnapshotRow::new(spec, t, m, outflow));
        if let Some(dir) = out {
            files.extend(write_field(dir, &stem(&spec.name, t), &space, rho, t, &hash)?);
        }
        Ok(())
    };
    if let Some(model) = spec.model.collision() {
        let f = &cfg.frequencies;
        let mut kc = KineticConfig::new(space, CollisionMode::new(model, f.scaling, f.epsilon));
        kc.scheme = cfg.kinetic.scheme;
        kc.boundary = cfg.kinetic.boundary;
        kc.cfl = cfg.kinetic.cfl;
        kc.exec = exec;
        let solver = KineticSolver::new(&ks, kc)?;
        let mut field = solver.initial_field(&rho0, cfg.initial.velocity)?;
        let mut rho = rho0;
        for &t in &times {
            solver.advance_to(&mut field, t)?;
            rho = solver.density(&field);
            emit(t, &rho, &solver.moments(&field), field.outflow)?;
        }
        Ok(RunOutput { spec: spec.clone(), space, rows, rho, macro_model: None, files })
    } else {
        let variant = spec.model.variant().expect("macro model");
        let model = assemble_macro_model(&ks, variant, cfg.frequencies.epsilon)?;
        let mut solver = MacroSolver::new(space, model);
        solver.scheme = cfg.macro_opts.scheme;
        solver.exec = exec;
        let mut st = solver.state(rho0)?;
        for &t in &times {
            solver.advance_to(&mut st, t)?;
            emit(t, &st.rho, &solver.moments(&st), 0.0)?;
        }
        Ok(RunOutput {
            spec: spec.clone(),
            space,
            rows,
            rho: st.rho,
            macro_model: Some(model),
            files,
        })
    }
}

/// Run the given variants and write fields, the snapshot table and a manifest.
pub fn run_runs(cfg: &RunConfig, runs: &[RunSpec], out: &Path, opts: RunOptions) -> Result<Vec<RunOutput>> {
    ensure_dir(out)?;
    let outer = if opts.concurrent { Exec::Parallel } else { Exec::Serial };
    let results = outer.map_collect(runs.len(), |i| run_one(cfg, &runs[i], Some(out), opts.exec));
    let results: Vec<RunOutput> = results.into_iter().collect::<Result<_>>()?;

    let rows: Vec<&SnapshotRow> = results.iter().flat_map(|r| &r.rows).collect();
    write_csv(&out.join("center_of_mass.csv"), &rows)?;
    let models: Vec<&MacroModel> = results.iter().filter_map(|r| r.macro_model.as_ref()).collect();
    if !models.is_empty() {
        let mut rec = vec![["variant", "epsilon", "ux", "uy", "dxx", "dxy", "dyy", "eig_min", "eig_max"]
            .map(String::from)
            .to_vec()];
        for m in models {
            let e = m.eigenvalues();
            rec.push(
                [m.epsilon, m.drift[0], m.drift[1], m.diffusion[0][0], m.diffusion[0][1], m.diffusion[1][1], e[0], e[1]]
                    .iter()
                    .map(|v| v.to_string())
                    .fold(vec![m.variant.to_string()], |mut acc, s| {
                        acc.push(s);
                        acc
                    }),
            );
        }
        write_csv_records(&out.join("macro_models.csv"), &rec)?;
    }
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    let mut manifest = Manifest::new(&cfg.name, &cfg.hash());
    for r in &results {
        manifest.runs.push(ManifestRun {
            name: r.spec.name.clone(),
            model: model_name(r.spec.model).to_string(),
            t_end: r.last().time,
            files: r.files.clone(),
        });
    }
    manifest.write(out)?;
    Ok(results)
}

/// Every `[[runs]]` entry of the configuration.
pub fn run_experiment(cfg: &RunConfig, out: &Path, opts: RunOptions) -> Result<Vec<RunOutput>> {
    run_runs(cfg, &cfg.resolved_runs(), out, opts)
}

/// The configured kinetic runs, or one two-operator run when there are none.
pub fn simulate_kinetic(cfg: &RunConfig, out: &Path, opts: RunOptions) -> Result<Vec<RunOutput>> {
    let mut runs: Vec<RunSpec> = cfg.resolved_runs().into_iter().filter(|r| r.model.collision().is_some()).collect();
    if runs.is_empty() {
        runs.push(RunSpec {
            name: "kinetic".into(),
            model: RunModel::TwoOperator,
            t_end: None,
            mean_speed: None,
        });
    }
    run_runs(cfg, &runs, out, opts)
}

/// One macroscopic variant up to the configured end time.
pub fn simulate_macro(cfg: &RunConfig, variant: MacroVariant, out: &Path, opts: RunOptions) -> Result<RunOutput> {
    let model = match variant {
        MacroVariant::M1 => RunModel::M1,
        MacroVariant::M2 => RunModel::M2,
        MacroVariant::M3 => RunModel::M3,
        MacroVariant::M4 => RunModel::M4,
    };
    let spec = cfg
        .runs
        .iter()
        .find(|r| r.model == model)
        .cloned()
        .unwrap_or(RunSpec {
            name: variant.to_string().to_uppercase(),
            model,
            t_end: None,
            mean_speed: None,
        });
    Ok(run_runs(cfg, &[spec], out, opts)?.remove(0))
}

/// Velocity density used to start homogeneous and particle runs.
pub fn initial_velocity(ks: &KernelSet, init: VelocityInit) -> Vec<f64> {
    let g = &ks.grid;
    match init {
        VelocityInit::Equilibrium => ks.t_eq.clone(),
        VelocityInit::Isotropic => {
            let v = 1.0 / (g.speed.u_max * 2.0 * std::f64::consts::PI);
            vec![v; g.len()]
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct RelaxRow {
    time: f64,
    mass: f64,
    norm_t_sq: Option<f64>,
    d_total: Option<f64>,
    direction_marginal_error: f64,
}

/// Homogeneous relaxation from the configured velocity profile.
pub fn simulate_homogeneous(cfg: &RunConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let ks = cfg.kernel_set(None)?;
    let f0 = initial_velocity(&ks, cfg.initial.velocity);
    let mut opt = RelaxOptions::new(DT_FACTOR / ks.freq.sum(), cfg.time.t_end);
    opt.entropy_every = 1;
    let traj = relax_with(&f0, &ks, opt)?;
    let rows: Vec<RelaxRow> = (0..traj.times.len())
        .map(|k| RelaxRow {
            time: traj.times[k],
            mass: traj.mass[k],
            norm_t_sq: traj.entropy[k].map(|e| e.norm_t_sq),
            d_total: traj.entropy[k].and_then(|e| e.d_total),
            direction_marginal_error: traj.marginal_direction_error[k],
        })
        .collect();
    write_csv(&out.join("relaxation.csv"), &rows)?;
    write_velocity_csv(&out.join("final_state.csv"), &ks.grid, &[("f", traj.last()), ("t_eq", &ks.t_eq)])?;
    write_text(&out.join("config.toml"), &cfg.to_toml())
}

/// Monte Carlo run of the jump process from the configured start.
pub fn simulate_particles(cfg: &RunConfig, out: &Path, exec: Exec) -> Result<JumpStatistics> {
    ensure_dir(out)?;
    let ks = cfg.kernel_set(None)?;
    let f0 = initial_velocity(&ks, cfg.initial.velocity);
    let p = &cfg.particles;
    let mut ens = ParticleEnsemble::sample(p.n, cfg.seed, &ks.grid, &f0, cfg.initial.x0, exec)?;
    let model = JumpModel::new(&ks);
    let stats = match p.scheme {
        ParticleScheme::EventDriven => simulate_event_driven(&mut ens, &model, cfg.time.t_end, exec)?,
        ParticleScheme::Discrete => {
            let steps = (cfg.time.t_end / p.dt).round().max(1.0) as usize;
            let dt = cfg.time.t_end / steps as f64;
            for _ in 0..steps {
                step_discrete(&mut ens, &model, dt, exec)?;
            }
            ens.statistics()
        }
    };
    write_csv(&out.join("jump_statistics.csv"), &[stats])?;
    let space = cfg.space()?;
    let est = estimate_density(&ens, &space, &ks.grid, exec);
    write_field(out, "particle_density", &space, &est.rho, ens.time, &cfg.hash())?;
    write_velocity_csv(&out.join("velocity_histogram.csv"), &ks.grid, &[("f_mc", &est.f), ("t_eq", &ks.t_eq)])?;
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    Ok(stats)
}

fn write_velocity_csv(path: &Path, grid: &VelocityGrid, cols: &[(&str, &[f64])]) -> Result<()> {
    let mut rec = vec![["i", "j", "speed", "theta"].iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    rec[0].extend(cols.iter().map(|(n, _)| n.to_string()));
    for i in 0..grid.n_s() {
        for j in 0..grid.n_theta() {
            let k = grid.idx(i, j);
            let mut r = vec![
                i.to_string(),
                j.to_string(),
                grid.speed.nodes[i].to_string(),
                grid.angle.nodes[j].to_string(),
            ];
            r.extend(cols.iter().map(|(_, c)| c[k].to_string()));
            rec.push(r);
        }
    }
    write_csv_records(path, &rec)
}

/// Dump psi, q, T and the moments of the configured kernels.
pub fn inspect_kernels(cfg: &RunConfig, out: &Path) -> Result<KernelSet> {
    ensure_dir(out)?;
    let ks = cfg.kernel_set(None)?;
    let nt = ks.n_theta();
    let q_full: Vec<f64> = (0..ks.grid.len()).map(|k| ks.q[k % nt]).collect();
    write_velocity_csv(
        &out.join("kernels.csv"),
        &ks.grid,
        &[("psi", &ks.psi), ("q", &q_full), ("t_eq", &ks.t_eq)],
    )?;
    let mut rec = vec![["i", "speed", "psi_q", "psi_q_c"].map(String::from).to_vec()];
    for i in 0..ks.n_s() {
        rec.push(vec![
            i.to_string(),
            ks.grid.speed.nodes[i].to_string(),
            ks.psi_q[i].to_string(),
            ks.psi_q_c[i].to_string(),
        ]);
    }
    write_csv_records(&out.join("speed_marginals.csv"), &rec)?;
    let text = toml::to_string(&ks.moments).map_err(|e| invalid(e.to_string()))?;
    write_text(&out.join("moments.toml"), &text)?;
    Ok(ks)
}
