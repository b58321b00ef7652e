//! Spatially homogeneous relaxation `df/dt = L f`.

use crate::entropy::{report_unchecked, EntropyReport};
use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSet;
use crate::operators::{apply_l_into, check_weights, marginals, norm_psiq_sq, norm_q_sq, OpScratch};

/// Stage buffers for classical RK4.
#[derive(Debug, Clone)]
pub struct Rk4Buf {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Buf {
    pub fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }
}

/// One RK4 step of `df/dt = rhs(f)` in place.
pub fn rk4_step<F>(f: &mut [f64], dt: f64, buf: &mut Rk4Buf, mut rhs: F)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let Rk4Buf { k, tmp } = buf;
    let [k1, k2, k3, k4] = k;
    rhs(f, k1);
    for ((t, x), a) in tmp.iter_mut().zip(f.iter()).zip(k1.iter()) {
        *t = x + 0.5 * dt * a;
    }
    rhs(tmp, k2);
    for ((t, x), a) in tmp.iter_mut().zip(f.iter()).zip(k2.iter()) {
        *t = x + 0.5 * dt * a;
    }
    rhs(tmp, k3);
    for ((t, x), a) in tmp.iter_mut().zip(f.iter()).zip(k3.iter()) {
        *t = x + dt * a;
    }
    rhs(tmp, k4);
    for (n, x) in f.iter_mut().enumerate() {
        *x += dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    }
}

/// Largest admissible step relative to the total jump frequency.
pub const DT_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct RelaxOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between stored states.
    pub store_every: usize,
    /// Stored states between entropy reports.
    pub entropy_every: usize,
}

impl RelaxOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            store_every: 1,
            entropy_every: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelaxationTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    /// `None` when the weights are degenerate or between entropy strides.
    pub entropy: Vec<Option<EntropyReport>>,
    /// Sup-norm distance of the direction marginal to its closed form.
    pub marginal_direction_error: Vec<f64>,
}

impl RelaxationTrajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    /// Least-squares decay rate of `|f - rho T|^2` over the reported times.
    pub fn fitted_decay_rate(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.entropy)
            .filter_map(|(t, e)| e.map(|e| (*t, e.norm_t_sq)))
            .collect();
        let first = pts.first()?.1;
        let pts: Vec<(f64, f64)> = pts
            .into_iter()
            .filter(|(_, n)| *n > 1e-24 * first && *n > 0.0)
            .map(|(t, n)| (t, n.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let num: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
        Some(-num / den)
    }
}

/// Closed-form direction marginal `rho q + exp(-mu_hat t)(f0_hat - rho q)`.
pub fn exact_direction_marginal(ks: &KernelSet, f0: &[f64], t: f64) -> Vec<f64> {
    let m = marginals(&ks.grid, f0);
    let e = (-ks.freq.mu_hat * t).exp();
    m.dir
        .iter()
        .zip(&ks.q)
        .map(|(d, q)| m.rho * q + e * (d - m.rho * q))
        .collect()
}

/// Right-hand side of the decay estimate for factorized data.
pub fn factorized_bound(ks: &KernelSet, f0: &[f64], t: f64) -> f64 {
    let m = marginals(&ks.grid, f0);
    let dq: Vec<f64> = m.dir.iter().zip(&ks.q).map(|(d, q)| d - m.rho * q).collect();
    let dp: Vec<f64> = m.speed.iter().zip(&ks.psi_q).map(|(s, p)| s - m.rho * p).collect();
    (-ks.freq.mu_hat * t / 2.0).exp() * norm_q_sq(ks, &dq).sqrt()
        + (-ks.freq.mu_tilde * t / 2.0).exp() * norm_psiq_sq(ks, &dp).sqrt()
}

pub fn relax(f0: &[f64], ks: &KernelSet, dt: f64, t_end: f64) -> Result<RelaxationTrajectory> {
    relax_with(f0, ks, RelaxOptions::new(dt, t_end))
}

pub fn relax_with(f0: &[f64], ks: &KernelSet, opt: RelaxOptions) -> Result<RelaxationTrajectory> {
    if f0.len() != ks.grid.len() {
        return Err(invalid("initial state does not match the velocity grid"));
    }
    if f0.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(invalid("initial state must be finite and nonnegative"));
    }
    if !(opt.t_end >= 0.0) {
        return Err(invalid("t_end must be nonnegative"));
    }
    let limit = DT_FACTOR / ks.freq.sum();
    if !(opt.dt > 0.0) || opt.dt > limit {
        return Err(Error::Stability(format!(
            "dt = {} exceeds {limit} = 0.1 / (mu_tilde + mu_hat)",
            opt.dt
        )));
    }
    let steps = (opt.t_end / opt.dt).ceil() as usize;
    let dt = if steps == 0 { 0.0 } else { opt.t_end / steps as f64 };
    let store_every = opt.store_every.max(1);
    let entropy_every = opt.entropy_every.max(1);
    let weights_ok = check_weights(ks).is_ok();

    let mut traj = RelaxationTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        mass: Vec::new(),
        entropy: Vec::new(),
        marginal_direction_error: Vec::new(),
    };
    let record = |traj: &mut RelaxationTrajectory, t: f64, f: &[f64]| {
        let m = marginals(&ks.grid, f);
        let exact = exact_direction_marginal(ks, f0, t);
        let err = m.dir.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let k = traj.times.len();
        let entropy = (weights_ok && k.is_multiple_of(entropy_every)).then(|| report_unchecked(ks, f));
        traj.times.push(t);
        traj.states.push(f.to_vec());
        traj.mass.push(m.rho);
        traj.entropy.push(entropy);
        traj.marginal_direction_error.push(err);
    };

    let mut f = f0.to_vec();
    let mut buf = Rk4Buf::new(f.len());
    let mut scr = OpScratch::new(&ks.grid);
    let (mt, mh) = (ks.freq.mu_tilde, ks.freq.mu_hat);
    record(&mut traj, 0.0, &f);
    for n in 1..=steps {
        rk4_step(&mut f, dt, &mut buf, |x, out| apply_l_into(ks, mt, mh, x, out, &mut scr));
        if n % store_every == 0 || n == steps {
            let t = if n == steps { opt.t_end } else { n as f64 * dt };
            record(&mut traj, t, &f);
        }
    }
    Ok(traj)
}
