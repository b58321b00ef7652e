//! Invariant checks on a configuration's kernels, reported with residuals.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::entropy::entropy_report;
use crate::error::Result;
use crate::homogeneous::{relax_with, RelaxOptions, DT_FACTOR};
use crate::kernels::{Frequencies, KernelSet, MeanSpeed};
use crate::kinetic::VelocityInit;
use crate::macroscopic::{assemble_macro_model, MacroVariant};
use crate::operators::{apply_l, boundedness_constant, check_weights, norm_t_sq, pseudo_inverse_l};
use crate::tensor::max_abs;
use crate::output::write_csv;

use crate::experiment::initial_velocity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Not evaluated; the reason is in `note`.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub residual: f64,
    pub threshold: f64,
    pub note: String,
}

impl Check {
    fn new(name: &str, residual: f64, threshold: f64) -> Self {
        let status = if residual <= threshold { Status::Pass } else { Status::Fail };
        Self {
            name: name.to_string(),
            status,
            residual,
            threshold,
            note: String::new(),
        }
    }

    fn skipped(name: &str, note: String) -> Self {
        Self {
            name: name.to_string(),
            status: Status::Skipped,
            residual: f64::NAN,
            threshold: f64::NAN,
            note,
        }
    }

    fn failed(name: &str, note: String) -> Self {
        Self {
            status: Status::Fail,
            ..Self::skipped(name, note)
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<Check>,
}

impl DiagnosticsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        crate::output::ensure_dir(dir)?;
        write_csv(&dir.join("diagnostics.csv"), &self.checks)
    }
}

impl fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            match c.status {
                Status::Skipped => writeln!(f, "SKIP {:<34} {}", c.name, c.note)?,
                st => {
                    let tag = if st == Status::Pass { "PASS" } else { "FAIL" };
                    write!(f, "{tag} {:<34} residual {:.3e} threshold {:.1e}", c.name, c.residual, c.threshold)?;
                    if c.note.is_empty() {
                        writeln!(f)?;
                    } else {
                        writeln!(f, " ({})", c.note)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn column_sums(ks: &KernelSet, a: &[f64]) -> f64 {
    let g = &ks.grid;
    (0..ks.n_theta())
        .map(|j| {
            let s: f64 = (0..ks.n_s()).map(|i| a[g.idx(i, j)]).sum::<f64>() * g.speed.dv;
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn random_zero_mass(ks: &KernelSet, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = ks.grid.len();
    let mut eta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = eta.iter().sum::<f64>() / n as f64;
    eta.iter_mut().for_each(|x| *x -= mean);
    eta
}

/// Unconditioned kernels sharing the grid and frequencies of `ks`.
fn unconditioned(cfg: &RunConfig, ks: &KernelSet, freq: Frequencies) -> Result<KernelSet> {
    let k = &cfg.kernels;
    KernelSet::von_mises(
        ks.grid.clone(),
        k.k_psi,
        &MeanSpeed::Constant { value: ks.moments.u_psiq },
        k.k_q,
        k.theta_q,
        freq,
    )
}

/// Checks in the weighted norm, which need strictly positive weights.
fn weighted_checks(ks: &KernelSet, rng: &mut ChaCha8Rng, r: &mut DiagnosticsReport) -> Result<()> {
    let g = &ks.grid;
    let s = ks.freq.sum();
    let c = boundedness_constant(ks)?;
    let mut ratio = 0.0f64;
    for _ in 0..10 {
        let f: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        ratio = ratio.max(norm_t_sq(ks, &apply_l(ks, &f)) / (c * norm_t_sq(ks, &f)));
    }
    r.checks.push(Check::new("boundedness ratio", ratio, 1.0));

    let f0 = initial_velocity(ks, VelocityInit::Isotropic);
    let mut opt = RelaxOptions::new(DT_FACTOR / s, 5.0 / ks.freq.mu_tilde.min(ks.freq.mu_hat));
    opt.entropy_every = 1;
    let traj = relax_with(&f0, ks, opt)?;
    let norms: Vec<f64> = traj.entropy.iter().flatten().map(|e| e.norm_t_sq).collect();
    let rise = norms
        .windows(2)
        .map(|w| (w[1] - w[0]) / norms[0].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    r.checks.push(Check::new("entropy monotone", rise, 1e-12));
    let rep = entropy_report(ks, &f0)?;
    r.checks.push(Check::new("dissipation sign", rep.d_total.unwrap_or(0.0).max(0.0), 0.0));
    Ok(())
}

pub fn run_diagnostics(cfg: &RunConfig) -> Result<DiagnosticsReport> {
    let ks = cfg.kernel_set(None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut r = DiagnosticsReport::default();
    let g = &ks.grid;
    let s = ks.freq.sum();

    r.checks.push(Check::new("psi normalization", column_sums(&ks, &ks.psi), 1e-10));
    let q_sum: f64 = ks.q.iter().sum::<f64>() * g.angle.dtheta;
    r.checks.push(Check::new("q normalization", (q_sum - 1.0).abs(), 1e-10));
    r.checks.push(Check::new("T normalization", (g.mass(&ks.t_eq) - 1.0).abs(), 1e-10));

    let lt = apply_l(&ks, &ks.t_eq);
    r.checks.push(Check::new("equilibrium in kernel", sup(&lt) / (s * sup(&ks.t_eq)), 1e-12));

    let mut worst = 0.0f64;
    for _ in 0..10 {
        let eta = random_zero_mass(&ks, &mut rng);
        let phi = pseudo_inverse_l(&ks, &eta)?;
        let back = apply_l(&ks, &phi);
        let err = back.iter().zip(&eta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err / sup(&eta));
    }
    r.checks.push(Check::new("pseudo-inverse roundtrip", worst, 1e-10));

    match check_weights(&ks) {
        Ok(()) => weighted_checks(&ks, &mut rng, &mut r)?,
        Err(e) => {
            for name in ["boundedness ratio", "entropy monotone", "dissipation sign"] {
                r.checks.push(Check::skipped(name, e.to_string()));
            }
        }
    }
    let f0 = initial_velocity(&ks, VelocityInit::Isotropic);
    let traj = relax_with(&f0, &ks, RelaxOptions::new(DT_FACTOR / s, 5.0 / ks.freq.mu_tilde.min(ks.freq.mu_hat)))?;
    let mass_drift = traj.mass.iter().map(|m| (m - traj.mass[0]).abs()).fold(0.0, f64::max);
    r.checks.push(Check::new("relaxation mass", mass_drift, 1e-12));

    let m = &ks.moments;
    let (mt, mh) = (ks.freq.mu_tilde, ks.freq.mu_hat);
    let id = (0..2)
        .map(|a| (m.u_t[a] - (mt * m.u_m[a] + mh * m.u_psiq * m.u_q[a]) / s).abs())
        .fold(0.0, f64::max);
    r.checks.push(Check::new("drift identity", id, 1e-12));
    let spread = m.v_psi_spread;
    r.checks.push(Check::new("speed variance spread (info)", spread, f64::INFINITY));

    for v in MacroVariant::ALL {
        let name = format!("{v} diffusion definite");
        match assemble_macro_model(&ks, v, cfg.frequencies.epsilon) {
            Ok(m) => r.checks.push(Check::new(&name, (-m.eigenvalues()[0]).max(0.0), 1e-12 * max_abs(m.diffusion))),
            Err(e) => r.checks.push(Check::failed(&name, e.to_string())),
        }
    }

    let uniform = KernelSet::von_mises(g.clone(), 0.0, &MeanSpeed::Constant { value: g.speed.u_max / 2.0 }, 0.0, 0.0, ks.freq)?;
    let um = &uniform.moments;
    let mut drift = um.u_q[0].abs().max(um.u_q[1].abs()).max(um.u_m[0].abs()).max(um.u_m[1].abs());
    for v in MacroVariant::ALL {
        let mm = assemble_macro_model(&uniform, v, cfg.frequencies.epsilon)?;
        drift = drift.max(mm.drift[0].abs()).max(mm.drift[1].abs());
    }
    r.checks.push(Check::new("uniform kernels drift-free", drift, 1e-12));

    let a = unconditioned(cfg, &ks, Frequencies::new(mt, mh))?;
    let b = unconditioned(cfg, &ks, Frequencies::new(mh, mt))?;
    let swap = a.t_eq.iter().zip(&b.t_eq).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    r.checks.push(Check::new("frequency swap symmetry", swap / sup(&a.t_eq), 1e-12));

    Ok(r)
}
