//! Monte Carlo simulation of the two-clock velocity-jump process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::VelocityGrid;
use crate::kernels::KernelSet;
use crate::par::Exec;
use crate::spatial::SpatialGrid;
use crate::tensor::Vec2;

/// Particles per independently seeded chunk.
pub const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: Vec2,
    /// Speed node index.
    pub s: u32,
    /// Angle node index.
    pub a: u32,
    pub n_speed_jumps: u32,
    pub n_dir_jumps: u32,
}

#[derive(Debug, Clone)]
struct Chunk {
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
}

/// Inverse-CDF sampler over the discrete kernels plus the two jump rates.
#[derive(Debug, Clone)]
pub struct JumpModel {
    speeds: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    n_s: usize,
    /// Column-major CDF of psi: `speed_cdf[j * n_s + i]`.
    speed_cdf: Vec<f64>,
    angle_cdf: Vec<f64>,
    pub mu_tilde: f64,
    pub mu_hat: f64,
}

fn cdf(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    let total = acc;
    c.iter_mut().for_each(|x| *x /= total);
    if let Some(last) = c.last_mut() {
        *last = 1.0;
    }
    c
}

#[inline]
fn invert(cdf: &[f64], u: f64) -> u32 {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32
}

impl JumpModel {
    pub fn new(ks: &KernelSet) -> Self {
        let g = &ks.grid;
        let n_s = g.n_s();
        let speed_cdf = (0..g.n_theta()).flat_map(|j| cdf(ks.psi_column(j))).collect();
        Self {
            speeds: g.speed.nodes.clone(),
            cos: g.angle.cos.clone(),
            sin: g.angle.sin.clone(),
            n_s,
            speed_cdf,
            angle_cdf: cdf(ks.q.iter().copied()),
            mu_tilde: ks.freq.mu_tilde,
            mu_hat: ks.freq.mu_hat,
        }
    }

    /// Override the jump rates; zero switches a clock off.
    pub fn with_rates(mut self, mu_tilde: f64, mu_hat: f64) -> Result<Self> {
        if !(mu_tilde >= 0.0 && mu_hat >= 0.0) {
            return Err(invalid("jump rates must be nonnegative"));
        }
        self.mu_tilde = mu_tilde;
        self.mu_hat = mu_hat;
        Ok(self)
    }

    #[inline]
    fn new_speed<R: Rng>(&self, angle: u32, rng: &mut R) -> u32 {
        let j = angle as usize;
        invert(&self.speed_cdf[j * self.n_s..(j + 1) * self.n_s], rng.random())
    }

    #[inline]
    fn new_angle<R: Rng>(&self, rng: &mut R) -> u32 {
        invert(&self.angle_cdf, rng.random())
    }

    #[inline]
    fn velocity(&self, p: &Particle) -> Vec2 {
        let v = self.speeds[p.s as usize];
        [v * self.cos[p.a as usize], v * self.sin[p.a as usize]]
    }
}

#[inline]
fn exponential<R: Rng>(rate: f64, rng: &mut R) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

#[inline]
fn drift(p: &mut Particle, v: Vec2, t: f64) {
    p.x[0] += t * v[0];
    p.x[1] += t * v[1];
}

/// Particles split into chunks, each with its own random stream.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    chunks: Vec<Chunk>,
    n: usize,
    pub time: f64,
}

impl ParticleEnsemble {
    fn chunk_rng(seed: u64, k: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed ^ k as u64)
    }

    /// `n` particles at `x0` with velocities drawn from the density `f0`.
    pub fn sample(n: usize, seed: u64, grid: &VelocityGrid, f0: &[f64], x0: Vec2, exec: Exec) -> Result<Self> {
        if f0.len() != grid.len() {
            return Err(invalid("velocity density does not match the grid"));
        }
        if f0.iter().any(|x| !(*x >= 0.0)) || !(f0.iter().sum::<f64>() > 0.0) {
            return Err(invalid("velocity density must be nonnegative with positive mass"));
        }
        let c = cdf(f0.iter().copied());
        let nt = grid.n_theta() as u32;
        let n_chunks = n.div_ceil(CHUNK);
        let chunks = exec.map_collect(n_chunks, |k| {
            let mut rng = Self::chunk_rng(seed, k);
            let len = CHUNK.min(n - k * CHUNK);
            let particles = (0..len)
                .map(|_| {
                    let idx = invert(&c, rng.random());
                    Particle {
                        x: x0,
                        s: idx / nt,
                        a: idx % nt,
                        n_speed_jumps: 0,
                        n_dir_jumps: 0,
                    }
                })
                .collect();
            Chunk { particles, rng }
        });
        Ok(Self { chunks, n, time: 0.0 })
    }

    /// Ensemble from explicit particle states.
    pub fn from_particles(particles: Vec<Particle>, seed: u64) -> Self {
        let n = particles.len();
        let chunks = particles
            .chunks(CHUNK)
            .enumerate()
            .map(|(k, c)| Chunk {
                particles: c.to_vec(),
                rng: Self::chunk_rng(seed, k),
            })
            .collect();
        Self { chunks, n, time: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn particles(&self) -> impl Iterator<Item = &Particle> {
        self.chunks.iter().flat_map(|c| c.particles.iter())
    }

    /// Reposition every particle with `place(index)`.
    pub fn set_positions<F: Fn(usize) -> Vec2>(&mut self, place: F) {
        for (k, c) in self.chunks.iter_mut().enumerate() {
            for (i, p) in c.particles.iter_mut().enumerate() {
                p.x = place(k * CHUNK + i);
            }
        }
    }

    pub fn statistics(&self) -> JumpStatistics {
        let mut zero = 0u64;
        let mut s = 0u64;
        let mut d = 0u64;
        for p in self.particles() {
            zero += (p.n_speed_jumps == 0 && p.n_dir_jumps == 0) as u64;
            s += p.n_speed_jumps as u64;
            d += p.n_dir_jumps as u64;
        }
        let n = self.n.max(1) as f64;
        JumpStatistics {
            n: self.n,
            time: self.time,
            zero_jump_fraction: zero as f64 / n,
            mean_speed_jumps: s as f64 / n,
            mean_dir_jumps: d as f64 / n,
        }
    }
}

/// Jump counts accumulated since the ensemble was created.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpStatistics {
    pub n: usize,
    pub time: f64,
    pub zero_jump_fraction: f64,
    pub mean_speed_jumps: f64,
    pub mean_dir_jumps: f64,
}

/// One step of the discrete-time scheme with Bernoulli clocks.
pub fn step_discrete(ens: &mut ParticleEnsemble, model: &JumpModel, dt: f64, exec: Exec) -> Result<()> {
    let bound = 1.0 / model.mu_tilde.max(model.mu_hat);
    if !(dt > 0.0) || dt > bound {
        return Err(invalid(format!(
            "dt = {dt} violates dt <= min(1/mu_tilde, 1/mu_hat) = {bound}"
        )));
    }
    let (ps, pd) = (model.mu_tilde * dt, model.mu_hat * dt);
    exec.chunks_mut(&mut ens.chunks, 1, |_, cs| {
        let Chunk { particles, rng } = &mut cs[0];
        for p in particles.iter_mut() {
            let v = model.velocity(p);
            drift(p, v, dt);
            // both draws use the state before the step
            let jump_s = rng.random::<f64>() < ps;
            let jump_d = rng.random::<f64>() < pd;
            if jump_s {
                p.s = model.new_speed(p.a, rng);
                p.n_speed_jumps += 1;
            }
            if jump_d {
                p.a = model.new_angle(rng);
                p.n_dir_jumps += 1;
            }
        }
    });
    ens.time += dt;
    Ok(())
}

/// Advance by `duration` with two exponential clocks per particle.
pub fn simulate_event_driven(
    ens: &mut ParticleEnsemble,
    model: &JumpModel,
    duration: f64,
    exec: Exec,
) -> Result<JumpStatistics> {
    if !(duration > 0.0) {
        return Err(invalid("duration must be positive"));
    }
    exec.chunks_mut(&mut ens.chunks, 1, |_, cs| {
        let Chunk { particles, rng } = &mut cs[0];
        for p in particles.iter_mut() {
            // pending clocks are redrawn at entry; exponentials are memoryless
            let mut t = 0.0;
            let mut next_s = exponential(model.mu_tilde, rng);
            let mut next_d = exponential(model.mu_hat, rng);
            loop {
                let next = next_s.min(next_d);
                let v = model.velocity(p);
                if next >= duration {
                    drift(p, v, duration - t);
                    break;
                }
                drift(p, v, next - t);
                t = next;
                if next_s <= next_d {
                    p.s = model.new_speed(p.a, rng);
                    p.n_speed_jumps += 1;
                    next_s = t + exponential(model.mu_tilde, rng);
                } else {
                    p.a = model.new_angle(rng);
                    p.n_dir_jumps += 1;
                    next_d = t + exponential(model.mu_hat, rng);
                }
            }
        }
    });
    ens.time += duration;
    Ok(ens.statistics())
}

/// Spatial and velocity histograms of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// Row-major `[ny][nx]` density per unit area.
    pub rho: Vec<f64>,
    /// Velocity density per unit speed per unit angle.
    pub f: Vec<f64>,
    /// Fraction of particles outside the spatial grid.
    pub overflow: f64,
}

pub fn estimate_density(
    ens: &ParticleEnsemble,
    space: &SpatialGrid,
    vel: &VelocityGrid,
    exec: Exec,
) -> DensityEstimate {
    let nt = vel.n_theta();
    let counts = exec.map_collect(ens.chunks.len(), |k| {
        let mut cells = vec![0u64; space.len()];
        let mut nodes = vec![0u64; vel.len()];
        let mut out = 0u64;
        for p in &ens.chunks[k].particles {
            match space.locate(p.x) {
                Some(c) => cells[c] += 1,
                None => out += 1,
            }
            nodes[p.s as usize * nt + p.a as usize] += 1;
        }
        (cells, nodes, out)
    });
    let mut cells = vec![0u64; space.len()];
    let mut nodes = vec![0u64; vel.len()];
    let mut out = 0u64;
    for (c, v, o) in counts {
        cells.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        nodes.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        out += o;
    }
    let n = ens.len().max(1) as f64;
    DensityEstimate {
        rho: cells.iter().map(|&c| c as f64 / (n * space.cell_area())).collect(),
        f: nodes.iter().map(|&c| c as f64 / (n * vel.cell())).collect(),
        overflow: out as f64 / n,
    }
}
