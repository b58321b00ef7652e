use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dualjump::config::{ParticleScheme, RunConfig};
use dualjump::diagnostics::run_diagnostics;
use dualjump::experiment::{
    inspect_kernels, run_experiment, simulate_homogeneous, simulate_kinetic, simulate_macro, simulate_particles,
    RunOptions, RunOutput,
};
use dualjump::macroscopic::MacroVariant;
use dualjump::par::Exec;

#[derive(Parser, Debug)]
#[command(name = "dualjump", version, about = "Speed and direction jump processes: kinetic, particle and drift-diffusion runs")]
struct Cli {
    /// TOML run configuration; defaults to the test1 preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use threads inside solvers and run independent variants concurrently.
    #[arg(long, global = true)]
    parallel: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernel tables and moments.
    Kernels {
        #[command(subcommand)]
        action: KernelsAction,
    },
    /// Run a single solver.
    Simulate {
        #[command(subcommand)]
        target: Target,
    },
    /// Run every variant of a preset (test1, test2_1, test2_2) or of --config.
    Experiment { preset: Option<String> },
    /// Invariant checks on the configured kernels.
    Diagnostics,
}

#[derive(Subcommand, Debug)]
enum KernelsAction {
    /// Write psi, q, T and the moment set.
    Inspect,
}

#[derive(Subcommand, Debug)]
enum Target {
    /// Space-homogeneous relaxation.
    Homogeneous(TimeArg),
    /// Monte Carlo particles.
    Particles(ParticleArgs),
    /// Kinetic solver runs of the configuration.
    Kinetic(TimeArg),
    /// One drift-diffusion limit.
    Macro {
        #[arg(long, value_parser = parse_variant)]
        variant: MacroVariant,
        #[command(flatten)]
        time: TimeArg,
    },
}

#[derive(Args, Debug)]
struct TimeArg {
    /// Override the end time.
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Args, Debug)]
struct ParticleArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Step of the discrete scheme.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SchemeArg {
    Event,
    Discrete,
}

fn parse_variant(s: &str) -> std::result::Result<MacroVariant, String> {
    s.parse().map_err(|e: dualjump::Error| e.to_string())
}

fn load(cli: &Cli, preset: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match (preset, &cli.config) {
        (Some(_), Some(_)) => bail!(dualjump::Error::InvalidConfig(
            "give either a preset or --config, not both".into()
        )),
        (Some(p), None) => RunConfig::preset(p)?,
        (None, Some(path)) => RunConfig::load(path)?,
        (None, None) => RunConfig::preset("test1")?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Drop runs ending after `t` and cap the rest.
fn set_t_end(cfg: &mut RunConfig, t: Option<f64>) -> Result<()> {
    if let Some(t) = t {
        cfg.time.t_end = t;
        cfg.time.snapshots.retain(|&s| s <= t);
        for r in &mut cfg.runs {
            r.t_end = Some(t);
        }
        cfg.validate()?;
    }
    Ok(())
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| Path::new("out").join(default))
}

fn summarize(runs: &[RunOutput]) {
    for r in runs {
        let s = r.last();
        println!(
            "{:<6} {:<13} t={:<7} mass={:.6} outflow={:.3e} center=({:.4}, {:.4}) cov=[{:.4e} {:.4e}; {:.4e}] major={:.3}",
            s.run, s.model, s.time, s.mass, s.outflow, s.cx, s.cy, s.var_x, s.cov_xy, s.var_y, s.major_angle
        );
    }
}

fn run(cli: &Cli) -> Result<()> {
    let exec = Exec::from_flag(cli.parallel);
    let opts = RunOptions { exec, concurrent: cli.parallel };
    match &cli.command {
        Command::Kernels { action: KernelsAction::Inspect } => {
            let cfg = load(cli, None)?;
            let out = out_dir(cli, "kernels");
            let ks = inspect_kernels(&cfg, &out)?;
            let m = &ks.moments;
            println!("u_q   = [{:.6e}, {:.6e}]", m.u_q[0], m.u_q[1]);
            println!("u_M   = [{:.6e}, {:.6e}]", m.u_m[0], m.u_m[1]);
            println!("u_T   = [{:.6e}, {:.6e}]", m.u_t[0], m.u_t[1]);
            println!("u_psiq = {:.6e}  V_psiq = {:.6e}", m.u_psiq, m.v_psiq);
            println!("wrote {}", out.display());
        }
        Command::Simulate { target } => {
            let mut cfg = load(cli, None)?;
            match target {
                Target::Homogeneous(t) => {
                    set_t_end(&mut cfg, t.t_end)?;
                    let out = out_dir(cli, "homogeneous");
                    simulate_homogeneous(&cfg, &out)?;
                    println!("wrote {}", out.display());
                }
                Target::Particles(a) => {
                    set_t_end(&mut cfg, a.t_end)?;
                    if let Some(n) = a.n {
                        cfg.particles.n = n;
                    }
                    if let Some(s) = a.scheme {
                        cfg.particles.scheme = match s {
                            SchemeArg::Event => ParticleScheme::EventDriven,
                            SchemeArg::Discrete => ParticleScheme::Discrete,
                        };
                    }
                    if let Some(dt) = a.dt {
                        cfg.particles.dt = dt;
                    }
                    cfg.validate()?;
                    let out = out_dir(cli, "particles");
                    let s = simulate_particles(&cfg, &out, exec)?;
                    println!(
                        "n={} t={} zero_jump_fraction={:.6} mean_speed_jumps={:.4} mean_dir_jumps={:.4}",
                        s.n, s.time, s.zero_jump_fraction, s.mean_speed_jumps, s.mean_dir_jumps
                    );
                    println!("wrote {}", out.display());
                }
                Target::Kinetic(t) => {
                    set_t_end(&mut cfg, t.t_end)?;
                    let out = out_dir(cli, "kinetic");
                    summarize(&simulate_kinetic(&cfg, &out, opts)?);
                    println!("wrote {}", out.display());
                }
                Target::Macro { variant, time } => {
                    set_t_end(&mut cfg, time.t_end)?;
                    let out = out_dir(cli, &format!("macro_{variant}"));
                    let r = simulate_macro(&cfg, *variant, &out, opts)?;
                    if let Some(m) = &r.macro_model {
                        println!(
                            "drift=[{:.6e}, {:.6e}] diffusion=[{:.6e} {:.6e}; {:.6e}]",
                            m.drift[0], m.drift[1], m.diffusion[0][0], m.diffusion[0][1], m.diffusion[1][1]
                        );
                    }
                    summarize(std::slice::from_ref(&r));
                    println!("wrote {}", out.display());
                }
            }
        }
        Command::Experiment { preset } => {
            if preset.is_none() && cli.config.is_none() {
                bail!(dualjump::Error::InvalidConfig(
                    "name a preset (test1, test2_1, test2_2) or pass --config".into()
                ));
            }
            let cfg = load(cli, preset.as_deref())?;
            let out = out_dir(cli, &cfg.name);
            let runs = run_experiment(&cfg, &out, opts).with_context(|| format!("experiment {}", cfg.name))?;
            summarize(&runs);
            println!("wrote {}", out.display());
        }
        Command::Diagnostics => {
            let cfg = load(cli, None)?;
            let out = out_dir(cli, "diagnostics");
            let rep = run_diagnostics(&cfg)?;
            rep.write(&out)?;
            print!("{rep}");
            let failed = rep.checks.iter().filter(|c| c.status == dualjump::diagnostics::Status::Fail).count();
            println!("{failed} failed of {}; wrote {}", rep.checks.len(), out.display());
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<dualjump::Error>()) {
        Some(err) if err.is_stability() => 3,
        Some(dualjump::Error::Io { .. }) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let stab = anyhow::Error::new(dualjump::Error::Stability("dt".into()));
        assert_eq!(exit_code(&stab), 3);
        let indef = anyhow::Error::new(dualjump::Error::IndefiniteDiffusion {
            variant: "m2".into(),
            eigenvalues: [-1.0, 1.0],
        });
        assert_eq!(exit_code(&indef.context("experiment")), 3);
        let bad = anyhow::Error::new(dualjump::Error::InvalidConfig("x".into()));
        assert_eq!(exit_code(&bad), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
