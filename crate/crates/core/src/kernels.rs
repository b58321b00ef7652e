//! Discrete transition kernels and the equilibrium they induce.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{AngleGrid, SpeedGrid, VelocityGrid};
use crate::moments::MomentSet;

/// Mean new speed as a function of the current direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanSpeed {
    Constant { value: f64 },
    /// `upper` on `[0, pi)`, `lower` on `[pi, 2pi)`.
    HalfPlane { upper: f64, lower: f64 },
    /// `amplitude * |cos(theta)|`.
    AbsCos { amplitude: f64 },
    /// One value per angle node.
    Table { values: Vec<f64> },
}

impl MeanSpeed {
    /// Evaluate on the angle nodes.
    pub fn tabulate(&self, angle: &AngleGrid) -> Result<Vec<f64>> {
        let out = match self {
            MeanSpeed::Constant { value } => vec![*value; angle.len()],
            MeanSpeed::HalfPlane { upper, lower } => angle
                .nodes
                .iter()
                .map(|&t| if t < PI { *upper } else { *lower })
                .collect(),
            MeanSpeed::AbsCos { amplitude } => {
                angle.cos.iter().map(|c| amplitude * c.abs()).collect()
            }
            MeanSpeed::Table { values } => {
                if values.len() != angle.len() {
                    return Err(invalid(format!(
                        "mean speed table has {} entries for {} angle nodes",
                        values.len(),
                        angle.len()
                    )));
                }
                values.clone()
            }
        };
        Ok(out)
    }
}

/// Speed kernel `psi[i * n_theta + j]`, a rescaled von Mises in speed for each direction.
pub fn make_speed_kernel(
    grid: &VelocityGrid,
    k_psi: f64,
    mean_speed: &[f64],
) -> Result<Vec<f64>> {
    let u = grid.speed.u_max;
    let (ns, nt) = (grid.n_s(), grid.n_theta());
    if !(k_psi >= 0.0) {
        return Err(invalid(format!("k_psi must be >= 0, got {k_psi}")));
    }
    if mean_speed.len() != nt {
        return Err(invalid("mean speed table does not match the angle grid"));
    }
    if let Some(m) = mean_speed.iter().find(|m| !(**m >= 0.0 && **m <= u)) {
        return Err(invalid(format!("mean speed {m} outside [0, {u}]")));
    }
    let mut psi = vec![0.0; ns * nt];
    for (j, &m) in mean_speed.iter().enumerate() {
        // exponent shifted by its max (k_psi) to stay finite for large k
        for i in 0..ns {
            let arg = 2.0 * PI * (grid.speed.nodes[i] - m) / u;
            psi[i * nt + j] = (k_psi * (arg.cos() - 1.0)).exp();
        }
        let norm: f64 = (0..ns).map(|i| psi[i * nt + j]).sum::<f64>() * grid.speed.dv;
        for i in 0..ns {
            psi[i * nt + j] /= norm;
        }
    }
    Ok(psi)
}

/// Bimodal von Mises direction kernel with axis `theta_q`.
pub fn make_direction_kernel(angle: &AngleGrid, k_q: f64, theta_q: f64) -> Result<Vec<f64>> {
    if !(k_q >= 0.0) {
        return Err(invalid(format!("k_q must be >= 0, got {k_q}")));
    }
    let mut q: Vec<f64> = angle
        .nodes
        .iter()
        .map(|&t| {
            let c = (t - theta_q).cos();
            (k_q * (c - 1.0)).exp() + (k_q * (-c - 1.0)).exp()
        })
        .collect();
    let norm: f64 = q.iter().sum::<f64>() * angle.dtheta;
    q.iter_mut().for_each(|x| *x /= norm);
    Ok(q)
}

/// Jump frequencies. `mu` is the single relaxation rate of the BGK model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequencies {
    pub mu_tilde: f64,
    pub mu_hat: f64,
    #[serde(default = "one")]
    pub mu: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Frequencies {
    fn default() -> Self {
        Self {
            mu_tilde: 1.0,
            mu_hat: 1.0,
            mu: 1.0,
        }
    }
}

impl Frequencies {
    pub fn new(mu_tilde: f64, mu_hat: f64) -> Self {
        Self {
            mu_tilde,
            mu_hat,
            mu: 1.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.mu_tilde + self.mu_hat
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu_tilde", self.mu_tilde), ("mu_hat", self.mu_hat), ("mu", self.mu)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `(psi_q, psi_q_c, T)` from the kernels, without renormalizing anything.
pub fn derive_equilibrium(
    grid: &VelocityGrid,
    psi: &[f64],
    q: &[f64],
    mu_tilde: f64,
    mu_hat: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (ns, nt) = (grid.n_s(), grid.n_theta());
    let dth = grid.angle.dtheta;
    let psi_q: Vec<f64> = (0..ns)
        .map(|i| (0..nt).map(|j| psi[i * nt + j] * q[j]).sum::<f64>() * dth)
        .collect();
    let s = mu_tilde + mu_hat;
    let mut psi_q_c = vec![0.0; ns * nt];
    let mut t = vec![0.0; ns * nt];
    for i in 0..ns {
        for j in 0..nt {
            let k = i * nt + j;
            psi_q_c[k] = (mu_hat * psi_q[i] + mu_tilde * psi[k]) / s;
            t[k] = q[j] * psi_q_c[k];
        }
    }
    (psi_q, psi_q_c, t)
}

/// Kernels, frequencies, equilibrium and moments on one velocity grid.
#[derive(Debug, Clone)]
pub struct KernelSet {
    pub grid: VelocityGrid,
    pub psi: Vec<f64>,
    pub q: Vec<f64>,
    pub freq: Frequencies,
    pub psi_q: Vec<f64>,
    pub psi_q_c: Vec<f64>,
    pub t_eq: Vec<f64>,
    pub moments: MomentSet,
}

impl KernelSet {
    pub fn new(grid: VelocityGrid, psi: Vec<f64>, q: Vec<f64>, freq: Frequencies) -> Result<Self> {
        freq.validate()?;
        let (ns, nt) = (grid.n_s(), grid.n_theta());
        if psi.len() != ns * nt || q.len() != nt {
            return Err(invalid("kernel shapes do not match the velocity grid"));
        }
        if psi.iter().chain(q.iter()).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("kernels must be finite and nonnegative"));
        }
        for j in 0..nt {
            let m: f64 = (0..ns).map(|i| psi[i * nt + j]).sum::<f64>() * grid.speed.dv;
            if (m - 1.0).abs() > 1e-10 {
                return Err(invalid(format!("speed kernel column {j} integrates to {m}")));
            }
        }
        let mq: f64 = q.iter().sum::<f64>() * grid.angle.dtheta;
        if (mq - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("direction kernel integrates to {mq}")));
        }
        let (psi_q, psi_q_c, t_eq) = derive_equilibrium(&grid, &psi, &q, freq.mu_tilde, freq.mu_hat);
        let moments = MomentSet::compute(&grid, &psi, &q, &psi_q, &t_eq, &freq);
        Ok(Self {
            grid,
            psi,
            q,
            freq,
            psi_q,
            psi_q_c,
            t_eq,
            moments,
        })
    }

    /// Von Mises kernels from their parameters.
    pub fn von_mises(
        grid: VelocityGrid,
        k_psi: f64,
        mean_speed: &MeanSpeed,
        k_q: f64,
        theta_q: f64,
        freq: Frequencies,
    ) -> Result<Self> {
        let table = mean_speed.tabulate(&grid.angle)?;
        let psi = make_speed_kernel(&grid, k_psi, &table)?;
        let q = make_direction_kernel(&grid.angle, k_q, theta_q)?;
        Self::new(grid, psi, q, freq)
    }

    /// Same kernels with other frequencies; equilibrium and moments are recomputed.
    pub fn with_frequencies(&self, freq: Frequencies) -> Result<Self> {
        Self::new(self.grid.clone(), self.psi.clone(), self.q.clone(), freq)
    }

    pub fn n_s(&self) -> usize {
        self.grid.n_s()
    }

    pub fn n_theta(&self) -> usize {
        self.grid.n_theta()
    }

    /// True when every column of `psi` is the same (up to `1e-12` relative).
    pub fn is_unconditioned(&self) -> bool {
        let nt = self.n_theta();
        let scale = self.psi.iter().fold(0.0f64, |a, &b| a.max(b));
        self.psi
            .chunks(nt)
            .all(|row| row.iter().all(|&x| (x - row[0]).abs() <= 1e-12 * scale))
    }

    /// Product kernel `M = psi * q` used by the single-operator model.
    pub fn bgk_equilibrium(&self) -> Vec<f64> {
        let nt = self.n_theta();
        self.psi
            .iter()
            .enumerate()
            .map(|(k, p)| p * self.q[k % nt])
            .collect()
    }

    /// Speed marginal of `psi` for direction `j`.
    pub fn psi_column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let nt = self.n_theta();
        (0..self.n_s()).map(move |i| self.psi[i * nt + j])
    }
}

/// Nearest speed-grid node to `v`.
pub fn nearest_speed_node(speed: &SpeedGrid, v: f64) -> usize {
    let i = (v / speed.dv - 0.5).round();
    (i.max(0.0) as usize).min(speed.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(ns: usize, nt: usize) -> VelocityGrid {
        VelocityGrid::new(ns, nt, 4.0).unwrap()
    }

    #[test]
    fn concentrated_speed_kernel_peaks_at_mean() {
        let g = grid(64, 16);
        let psi = make_speed_kernel(&g, 80.0, &[1.5; 16]).unwrap();
        let target = nearest_speed_node(&g.speed, 1.5);
        for j in 0..16 {
            let col: Vec<f64> = (0..64).map(|i| psi[i * 16 + j]).collect();
            let arg = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(arg, target);
        }
    }

    #[test]
    fn zero_concentration_is_uniform() {
        let g = grid(8, 8);
        let psi = make_speed_kernel(&g, 0.0, &[1.0; 8]).unwrap();
        assert!(psi.iter().all(|p| (p - 0.25).abs() < 1e-15));
        let q = make_direction_kernel(&g.angle, 0.0, 0.3).unwrap();
        assert!(q.iter().all(|x| (x - 1.0 / (2.0 * PI)).abs() < 1e-15));
    }

    #[test]
    fn half_plane_mean_speed() {
        let g = grid(64, 32);
        let table = MeanSpeed::HalfPlane { upper: 1.5, lower: 0.2 }
            .tabulate(&g.angle)
            .unwrap();
        let psi = make_speed_kernel(&g, 80.0, &table).unwrap();
        for j in 0..32 {
            let arg = (0..64)
                .max_by(|&a, &b| psi[a * 32 + j].total_cmp(&psi[b * 32 + j]))
                .unwrap();
            let v = g.speed.nodes[arg];
            if g.angle.nodes[j] < PI {
                assert!((v - 1.5).abs() <= g.speed.dv);
            } else {
                assert!((v - 0.2).abs() <= g.speed.dv);
            }
        }
    }

    #[test]
    fn mean_speed_out_of_range() {
        let g = grid(8, 8);
        assert!(make_speed_kernel(&g, 1.0, &[4.5; 8]).is_err());
        assert!(make_speed_kernel(&g, 1.0, &[-0.1; 8]).is_err());
    }

    #[test]
    fn bimodal_direction_kernel_symmetric() {
        let g = AngleGrid::new(64).unwrap();
        let q = make_direction_kernel(&g, 2.0, PI / 2.0).unwrap();
        // nodes j and j + n/2 are antipodal
        for j in 0..32 {
            assert!((q[j] - q[j + 32]).abs() < 1e-14 * q[j]);
        }
        let ux: f64 = q.iter().zip(&g.cos).map(|(a, c)| a * c).sum::<f64>() * g.dtheta;
        let uy: f64 = q.iter().zip(&g.sin).map(|(a, s)| a * s).sum::<f64>() * g.dtheta;
        assert!(ux.abs() < 1e-12 && uy.abs() < 1e-12);
    }

    #[test]
    fn two_angle_hand_quadrature() {
        // the grid constructor wants four angles, so build a two-column system by hand
        let g = grid(3, 4);
        let nt = 4;
        let c1 = [0.1, 0.15, 0.0];
        let c2 = [0.05, 0.05, 0.15];
        let mut psi = vec![0.0; 12];
        for i in 0..3 {
            psi[i * nt] = c1[i];
            psi[i * nt + 1] = c2[i];
        }
        let (a, b) = (0.3, 0.7);
        let q = [a, b, 0.0, 0.0];
        let (pq, _, _) = derive_equilibrium(&g, &psi, &q, 1.0, 1.0);
        for i in 0..3 {
            let expect = (a * c1[i] + b * c2[i]) * g.angle.dtheta;
            assert!((pq[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn unconditioned_equilibrium() {
        let g = grid(16, 8);
        let ks = KernelSet::von_mises(
            g,
            5.0,
            &MeanSpeed::Constant { value: 2.0 },
            3.0,
            0.4,
            Frequencies::new(0.7, 1.3),
        )
        .unwrap();
        assert!(ks.is_unconditioned());
        for i in 0..16 {
            for j in 0..8 {
                let k = i * 8 + j;
                assert!((ks.psi_q[i] - ks.psi[k]).abs() < 1e-13);
                assert!((ks.psi_q_c[k] - ks.psi[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn slow_speed_limit() {
        let g = grid(12, 8);
        let table = MeanSpeed::HalfPlane { upper: 1.5, lower: 0.2 }
            .tabulate(&g.angle)
            .unwrap();
        let psi = make_speed_kernel(&g, 4.0, &table).unwrap();
        let q = make_direction_kernel(&g.angle, 1.0, 0.0).unwrap();
        let (pq, pqc, _) = derive_equilibrium(&g, &psi, &q, 0.0, 1.0);
        for i in 0..12 {
            for j in 0..8 {
                assert_eq!(pqc[i * 8 + j], pq[i]);
            }
        }
    }

    #[test]
    fn rejects_bad_frequencies() {
        let g = grid(4, 4);
        let r = KernelSet::von_mises(
            g,
            1.0,
            &MeanSpeed::Constant { value: 1.0 },
            1.0,
            0.0,
            Frequencies::new(0.0, 1.0),
        );
        assert!(r.is_err());
    }
}
