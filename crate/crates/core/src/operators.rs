//! Matrix-free scattering operators on a velocity grid.

use crate::error::{Error, Result};
use crate::grid::VelocityGrid;
use crate::kernels::KernelSet;

/// Mass and the two unnormalized marginals of a velocity density.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub rho: f64,
    /// `int f dtheta`, one entry per speed node.
    pub speed: Vec<f64>,
    /// `int f dv`, one entry per angle node.
    pub dir: Vec<f64>,
}

pub fn marginals(grid: &VelocityGrid, f: &[f64]) -> Marginals {
    let mut speed = vec![0.0; grid.n_s()];
    let mut dir = vec![0.0; grid.n_theta()];
    let rho = marginals_into(grid, f, &mut speed, &mut dir);
    Marginals { rho, speed, dir }
}

/// Fills the marginals and returns the mass.
pub fn marginals_into(grid: &VelocityGrid, f: &[f64], speed: &mut [f64], dir: &mut [f64]) -> f64 {
    let nt = grid.n_theta();
    dir.fill(0.0);
    for (i, row) in f.chunks_exact(nt).enumerate() {
        let mut acc = 0.0;
        for (d, &x) in dir.iter_mut().zip(row) {
            acc += x;
            *d += x;
        }
        speed[i] = acc * grid.angle.dtheta;
    }
    dir.iter_mut().for_each(|d| *d *= grid.speed.dv);
    dir.iter().sum::<f64>() * grid.angle.dtheta
}

/// Reusable buffers for [`apply_l_into`].
#[derive(Debug, Clone)]
pub struct OpScratch {
    speed: Vec<f64>,
    dir: Vec<f64>,
}

impl OpScratch {
    pub fn new(grid: &VelocityGrid) -> Self {
        Self {
            speed: vec![0.0; grid.n_s()],
            dir: vec![0.0; grid.n_theta()],
        }
    }
}

/// `out = mu_hat * Lhat f + mu_tilde * Ltilde f` without allocating.
pub fn apply_l_into(
    ks: &KernelSet,
    mu_tilde: f64,
    mu_hat: f64,
    f: &[f64],
    out: &mut [f64],
    scr: &mut OpScratch,
) {
    let nt = ks.n_theta();
    marginals_into(&ks.grid, f, &mut scr.speed, &mut scr.dir);
    let s = mu_tilde + mu_hat;
    for (i, (orow, frow)) in out.chunks_exact_mut(nt).zip(f.chunks_exact(nt)).enumerate() {
        let gain_dir = mu_hat * scr.speed[i];
        let prow = &ks.psi[i * nt..(i + 1) * nt];
        for j in 0..nt {
            orow[j] = gain_dir * ks.q[j] + mu_tilde * scr.dir[j] * prow[j] - s * frow[j];
        }
    }
}

/// Direction-jump operator: `(int f dtheta) q - f`.
pub fn apply_direction_jump(ks: &KernelSet, f: &[f64]) -> Vec<f64> {
    let nt = ks.n_theta();
    let m = marginals(&ks.grid, f);
    f.iter()
        .enumerate()
        .map(|(k, x)| m.speed[k / nt] * ks.q[k % nt] - x)
        .collect()
}

/// Speed-jump operator: `(int f dv) psi - f`.
pub fn apply_speed_jump(ks: &KernelSet, f: &[f64]) -> Vec<f64> {
    let nt = ks.n_theta();
    let m = marginals(&ks.grid, f);
    f.iter()
        .enumerate()
        .map(|(k, x)| m.dir[k % nt] * ks.psi[k] - x)
        .collect()
}

/// Full operator with the kernel set's frequencies.
pub fn apply_l(ks: &KernelSet, f: &[f64]) -> Vec<f64> {
    apply_l_with(ks, ks.freq.mu_tilde, ks.freq.mu_hat, f)
}

pub fn apply_l_with(ks: &KernelSet, mu_tilde: f64, mu_hat: f64, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    apply_l_into(ks, mu_tilde, mu_hat, f, &mut out, &mut OpScratch::new(&ks.grid));
    out
}

/// Marginal direction operator `mu_hat (rho q - int f dv)`.
pub fn apply_marginal_direction(ks: &KernelSet, f: &[f64]) -> Vec<f64> {
    let m = marginals(&ks.grid, f);
    let mu = ks.freq.mu_hat;
    ks.q.iter()
        .zip(&m.dir)
        .map(|(q, d)| mu * (m.rho * q - d))
        .collect()
}

/// Marginal speed operator `mu_tilde (int psi (int f dv) dtheta - int f dtheta)`.
pub fn apply_marginal_speed(ks: &KernelSet, f: &[f64]) -> Vec<f64> {
    let nt = ks.n_theta();
    let m = marginals(&ks.grid, f);
    let mu = ks.freq.mu_tilde;
    (0..ks.n_s())
        .map(|i| {
            let gain: f64 = (0..nt).map(|j| ks.psi[i * nt + j] * m.dir[j]).sum::<f64>()
                * ks.grid.angle.dtheta;
            mu * (gain - m.speed[i])
        })
        .collect()
}

/// Solve `L phi = eta` on the zero-mass subspace.
pub fn pseudo_inverse_l(ks: &KernelSet, eta: &[f64]) -> Result<Vec<f64>> {
    let g = &ks.grid;
    let (ns, nt) = (g.n_s(), g.n_theta());
    let m = marginals(g, eta);
    let sup = eta.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let volume = g.speed.u_max * 2.0 * std::f64::consts::PI;
    if m.rho.abs() > 1e-10 * sup * volume {
        return Err(Error::Domain(format!(
            "input has mass {:e}; it is not orthogonal to the equilibrium",
            m.rho
        )));
    }
    let (mt, mh) = (ks.freq.mu_tilde, ks.freq.mu_hat);
    let m_hat: Vec<f64> = m.dir.iter().map(|d| -d / mh).collect();
    let m_tilde: Vec<f64> = (0..ns)
        .map(|i| {
            (0..nt).map(|j| ks.psi[i * nt + j] * m_hat[j]).sum::<f64>() * g.angle.dtheta
                - m.speed[i] / mt
        })
        .collect();
    let s = mt + mh;
    Ok(eta
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let (i, j) = (k / nt, k % nt);
            (mh * m_tilde[i] * ks.q[j] + mt * ks.psi[k] * m_hat[j] - e) / s
        })
        .collect())
}

/// Relative floor below which a weight counts as degenerate.
pub const WEIGHT_FLOOR: f64 = 1e-15;

/// Checks that the `L^2` weights `T`, `q` and `psi_q` are bounded away from zero.
pub fn check_weights(ks: &KernelSet) -> Result<()> {
    let nt = ks.n_theta();
    for j in 0..nt {
        let col: Vec<f64> = (0..ks.n_s()).map(|i| ks.t_eq[i * nt + j]).collect();
        check_vec(&col, &format!("equilibrium column {j}"))?;
    }
    check_vec(&ks.q, "direction kernel")?;
    check_vec(&ks.psi_q, "averaged speed kernel")
}

fn check_vec(w: &[f64], what: &str) -> Result<()> {
    let max = w.iter().fold(0.0f64, |a, &b| a.max(b));
    match w.iter().position(|&x| !(x >= WEIGHT_FLOOR * max) || x <= 0.0) {
        Some(k) => Err(Error::DegenerateWeight(format!(
            "{what}: entry {k} is {:e} against a maximum of {max:e}",
            w[k]
        ))),
        None => Ok(()),
    }
}

/// `sum f^2 / T dv dtheta`.
pub fn norm_t_sq(ks: &KernelSet, f: &[f64]) -> f64 {
    weighted_sq(f, &ks.t_eq) * ks.grid.cell()
}

/// `sum h^2 / q dtheta` for a direction profile.
pub fn norm_q_sq(ks: &KernelSet, h: &[f64]) -> f64 {
    weighted_sq(h, &ks.q) * ks.grid.angle.dtheta
}

/// `sum h^2 / psi_q dv` for a speed profile.
pub fn norm_psiq_sq(ks: &KernelSet, h: &[f64]) -> f64 {
    weighted_sq(h, &ks.psi_q) * ks.grid.speed.dv
}

fn weighted_sq(f: &[f64], w: &[f64]) -> f64 {
    f.iter()
        .zip(w)
        .map(|(x, w)| x * x / w.max(1e-300))
        .sum()
}

/// Closed-form constant of the boundedness estimate `|Lf|_T^2 <= C |f|_T^2`.
pub fn boundedness_constant(ks: &KernelSet) -> Result<f64> {
    check_vec(&ks.psi_q, "averaged speed kernel")?;
    let nt = ks.n_theta();
    let mut smax = 0.0f64;
    for (k, c) in ks.psi_q_c.iter().enumerate() {
        smax = smax.max(c / ks.psi_q[k / nt]);
    }
    Ok(constant_from_ratio(ks.freq.mu_tilde, ks.freq.mu_hat, smax))
}

pub(crate) fn constant_from_ratio(mt: f64, mh: f64, smax: f64) -> f64 {
    let s = mt + mh;
    s * (mt * mt / mh * (smax + 3.0)
        + 4.0 * mh * mh * s / (mt * mt)
        + 2.0 * s
        + 4.0 * mh
        + 2.0 * s * (smax + 1.0))
}
