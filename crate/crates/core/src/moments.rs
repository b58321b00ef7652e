//! Velocity moments of the kernels by midpoint quadrature.

use serde::Serialize;

use crate::grid::VelocityGrid;
use crate::kernels::Frequencies;
use crate::tensor::{outer, scale, sub, Mat2, Vec2, ZERO2};

/// Scalar, vector and tensor moments of a kernel set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSet {
    /// Mean new speed per direction node.
    pub u_psi: Vec<f64>,
    /// Second speed moment per direction node.
    pub v_psi: Vec<f64>,
    pub u_q: Vec2,
    pub u_psiq: f64,
    pub v_psiq: f64,
    pub u_m: Vec2,
    pub u_t: Vec2,
    pub u_p: Vec2,
    pub vq: Mat2,
    pub d_q: Mat2,
    pub d_t: Mat2,
    pub d_m: Mat2,
    pub d_p: Mat2,
    /// `int u_psi q v (x) v`.
    pub upsi_vq: Mat2,
    /// `int u_psi^2 q v (x) v`.
    pub upsi2_vq: Mat2,
    /// `int u_psi^2 q v`.
    pub upsi2_q: Vec2,
    /// `max_j |V_psi(theta_j) - V_psiq|`.
    pub v_psi_spread: f64,
}

impl MomentSet {
    pub fn compute(
        grid: &VelocityGrid,
        psi: &[f64],
        q: &[f64],
        psi_q: &[f64],
        t_eq: &[f64],
        _freq: &Frequencies,
    ) -> Self {
        let (ns, nt) = (grid.n_s(), grid.n_theta());
        let dv = grid.speed.dv;
        let dth = grid.angle.dtheta;
        let v = &grid.speed.nodes;

        let mut u_psi = vec![0.0; nt];
        let mut v_psi = vec![0.0; nt];
        for j in 0..nt {
            for i in 0..ns {
                let p = psi[i * nt + j];
                u_psi[j] += v[i] * p;
                v_psi[j] += v[i] * v[i] * p;
            }
            u_psi[j] *= dv;
            v_psi[j] *= dv;
        }
        let u_psiq = (0..ns).map(|i| v[i] * psi_q[i]).sum::<f64>() * dv;
        let v_psiq = (0..ns).map(|i| v[i] * v[i] * psi_q[i]).sum::<f64>() * dv;

        let mut u_q = [0.0; 2];
        let mut u_m = [0.0; 2];
        let mut upsi2_q = [0.0; 2];
        let mut vq = ZERO2;
        let mut upsi_vq = ZERO2;
        let mut upsi2_vq = ZERO2;
        for j in 0..nt {
            let e = grid.angle.dir(j);
            let w = q[j] * dth;
            let ee = outer(e, e);
            for a in 0..2 {
                u_q[a] += e[a] * w;
                u_m[a] += e[a] * u_psi[j] * w;
                upsi2_q[a] += e[a] * u_psi[j] * u_psi[j] * w;
                for b in 0..2 {
                    vq[a][b] += ee[a][b] * w;
                    upsi_vq[a][b] += ee[a][b] * u_psi[j] * w;
                    upsi2_vq[a][b] += ee[a][b] * u_psi[j] * u_psi[j] * w;
                }
            }
        }

        let mut u_t = [0.0; 2];
        for i in 0..ns {
            for j in 0..nt {
                let w = v[i] * t_eq[i * nt + j];
                u_t[0] += w * grid.angle.cos[j];
                u_t[1] += w * grid.angle.sin[j];
            }
        }
        let u_t = [u_t[0] * dv * dth, u_t[1] * dv * dth];
        let u_p = [u_q[0] * u_psiq, u_q[1] * u_psiq];

        let base = scale(vq, v_psiq);
        let v_psi_spread = v_psi.iter().fold(0.0f64, |m, x| m.max((x - v_psiq).abs()));
        Self {
            d_q: sub(vq, outer(u_q, u_q)),
            d_t: sub(base, outer(u_t, u_t)),
            d_m: sub(base, outer(u_m, u_m)),
            d_p: sub(base, outer(u_p, u_p)),
            u_psi,
            v_psi,
            u_q,
            u_psiq,
            v_psiq,
            u_m,
            u_t,
            u_p,
            vq,
            upsi_vq,
            upsi2_vq,
            upsi2_q,
            v_psi_spread,
        }
    }
}
