//! Kinetic solver on a 2D cell grid times the velocity grid, Strang split
//! into transport and per-cell collision.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::homogeneous::{rk4_step, Rk4Buf};
use crate::kernels::KernelSet;
use crate::operators::{apply_l_into, OpScratch};
use crate::par::Exec;
use crate::spatial::{FieldMoments, SpatialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionModel {
    /// Single relaxation `mu (rho psi q - f)`.
    Bgk,
    /// Independent speed and direction jumps.
    TwoOperator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    None,
    SameOrder,
    FastDirection,
    FastSpeed,
}

impl Scaling {
    /// Powers of `1/eps` applied to `(mu_tilde, mu_hat)`.
    pub fn powers(self) -> (i32, i32) {
        match self {
            Scaling::None => (0, 0),
            Scaling::SameOrder => (1, 1),
            Scaling::FastDirection => (1, 2),
            Scaling::FastSpeed => (2, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionMode {
    pub model: CollisionModel,
    pub scaling: Scaling,
    pub epsilon: f64,
}

impl CollisionMode {
    pub fn new(model: CollisionModel, scaling: Scaling, epsilon: f64) -> Self {
        Self { model, scaling, epsilon }
    }

    pub fn unscaled(model: CollisionModel) -> Self {
        Self::new(model, Scaling::None, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportScheme {
    #[default]
    Upwind,
    Minmod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    ZeroInflow,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityInit {
    /// Local equilibrium of the collision operator.
    #[default]
    Equilibrium,
    /// Uniform over the velocity grid.
    Isotropic,
}

#[derive(Debug, Clone, Copy)]
pub struct KineticConfig {
    pub space: SpatialGrid,
    pub mode: CollisionMode,
    pub scheme: TransportScheme,
    pub boundary: Boundary,
    pub cfl: f64,
    pub exec: Exec,
}

impl KineticConfig {
    pub fn new(space: SpatialGrid, mode: CollisionMode) -> Self {
        Self {
            space,
            mode,
            scheme: TransportScheme::Upwind,
            boundary: Boundary::ZeroInflow,
            cfl: 0.9,
            exec: Exec::default(),
        }
    }
}

/// Distribution `f[(iy * nx + ix) * nv + v]` with its outflow ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    pub f: Vec<f64>,
    pub time: f64,
    /// Mass that has left through the boundary.
    pub outflow: f64,
    /// Entries clipped to zero after falling below the positivity floor.
    pub clipped: usize,
}

/// Fraction of a collision step's frequency allowed per RK4 substep.
const SUBSTEP: f64 = 0.1;
/// Cells per collision task.
const CELLS_PER_TASK: usize = 32;

#[derive(Debug, Clone)]
pub struct KineticSolver {
    ks: KernelSet,
    cfg: KineticConfig,
    mu_tilde: f64,
    mu_hat: f64,
    mu_bgk: f64,
    equilibrium: Vec<f64>,
    bgk_m: Vec<f64>,
    cx: Vec<f64>,
    cy: Vec<f64>,
}

impl KineticSolver {
    pub fn new(ks: &KernelSet, cfg: KineticConfig) -> Result<Self> {
        let eps = cfg.mode.epsilon;
        if cfg.mode.scaling != Scaling::None && !(eps > 0.0 && eps <= 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1], got {eps}")));
        }
        if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
            return Err(invalid(format!("CFL number must lie in (0, 1], got {}", cfg.cfl)));
        }
        let (pt, ph) = cfg.mode.scaling.powers();
        let (mu_tilde, mu_hat, mu_bgk) = match cfg.mode.model {
            CollisionModel::TwoOperator => (
                ks.freq.mu_tilde / eps.powi(pt),
                ks.freq.mu_hat / eps.powi(ph),
                0.0,
            ),
            CollisionModel::Bgk => {
                if pt != ph {
                    return Err(invalid("the single-operator model only supports the same-order scaling"));
                }
                (0.0, 0.0, ks.freq.mu / eps.powi(pt))
            }
        };
        let nt = ks.n_theta();
        let bgk_m = ks.bgk_equilibrium();
        let equilibrium = match cfg.mode.model {
            CollisionModel::Bgk => bgk_m.clone(),
            CollisionModel::TwoOperator => {
                let s = mu_tilde + mu_hat;
                (0..ks.grid.len())
                    .map(|k| ks.q[k % nt] * (mu_hat * ks.psi_q[k / nt] + mu_tilde * ks.psi[k]) / s)
                    .collect()
            }
        };
        let (cx, cy) = (0..ks.grid.len())
            .map(|k| {
                let v = ks.grid.velocity(k / nt, k % nt);
                (v[0], v[1])
            })
            .unzip();
        Ok(Self {
            ks: ks.clone(),
            cfg,
            mu_tilde,
            mu_hat,
            mu_bgk,
            equilibrium,
            bgk_m,
            cx,
            cy,
        })
    }

    pub fn config(&self) -> &KineticConfig {
        &self.cfg
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.ks
    }

    /// Velocity equilibrium of the collision operator, unit mass.
    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }

    /// Effective collision frequency after scaling.
    pub fn collision_frequency(&self) -> f64 {
        match self.cfg.mode.model {
            CollisionModel::Bgk => self.mu_bgk,
            CollisionModel::TwoOperator => self.mu_tilde + self.mu_hat,
        }
    }

    /// Largest stable step.
    pub fn max_dt(&self) -> f64 {
        let s = &self.cfg.space;
        self.cfg.cfl * s.dx().min(s.dy()) / self.ks.grid.speed.u_max
    }

    fn nv(&self) -> usize {
        self.ks.grid.len()
    }

    /// `f = rho0(x) g(v)` with `g` from `init`.
    pub fn initial_field(&self, rho0: &[f64], init: VelocityInit) -> Result<KineticField> {
        if rho0.len() != self.cfg.space.len() {
            return Err(invalid("initial density does not match the spatial grid"));
        }
        let g: Vec<f64> = match init {
            VelocityInit::Equilibrium => self.equilibrium.clone(),
            VelocityInit::Isotropic => {
                let u = self.ks.grid.speed.u_max;
                vec![1.0 / (2.0 * std::f64::consts::PI * u); self.nv()]
            }
        };
        let f = rho0
            .iter()
            .flat_map(|r| g.iter().map(move |x| r * x))
            .collect();
        Ok(KineticField {
            f,
            time: 0.0,
            outflow: 0.0,
            clipped: 0,
        })
    }

    /// Cell densities `rho = int f dv`, row-major `[ny][nx]`.
    pub fn density(&self, field: &KineticField) -> Vec<f64> {
        let c = self.ks.grid.cell();
        field.f.chunks_exact(self.nv()).map(|v| v.iter().sum::<f64>() * c).collect()
    }

    /// Mass inside the domain.
    pub fn mass(&self, field: &KineticField) -> f64 {
        self.density(field).iter().sum::<f64>() * self.cfg.space.cell_area()
    }

    pub fn moments(&self, field: &KineticField) -> FieldMoments {
        FieldMoments::of(&self.cfg.space, &self.density(field))
    }

    /// Mass-weighted `L^1` distance of the direction marginal from `q`.
    pub fn direction_marginal_l1(&self, field: &KineticField) -> f64 {
        let g = &self.ks.grid;
        let (ns, nt) = (g.n_s(), g.n_theta());
        let mut err = 0.0;
        let mut mass = 0.0;
        for cell in field.f.chunks_exact(self.nv()) {
            let rho = cell.iter().sum::<f64>() * g.cell();
            for j in 0..nt {
                let h: f64 = (0..ns).map(|i| cell[i * nt + j]).sum::<f64>() * g.speed.dv;
                err += (h - rho * self.ks.q[j]).abs() * g.angle.dtheta;
            }
            mass += rho;
        }
        err / mass
    }

    /// One Strang step: half transport, collision, half transport.
    pub fn step(&self, field: &mut KineticField, dt: f64) -> Result<()> {
        let limit = self.max_dt();
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Stability(format!("dt = {dt} exceeds the CFL limit {limit}")));
        }
        let mut flux = vec![0.0; self.flux_len()];
        self.transport(field, 0.5 * dt, &mut flux, true);
        self.collide(field, dt);
        self.transport(field, 0.5 * dt, &mut flux, false);
        field.time += dt;
        Ok(())
    }

    /// Step with the largest stable dt until `t`, shortening the last step.
    pub fn advance_to(&self, field: &mut KineticField, t: f64) -> Result<()> {
        let dt = self.max_dt();
        while field.time < t - 1e-12 * t.max(1.0) {
            let h = dt.min(t - field.time);
            self.step(field, h)?;
        }
        Ok(())
    }

    fn flux_len(&self) -> usize {
        let s = &self.cfg.space;
        ((s.nx + 1) * s.ny).max(s.nx * (s.ny + 1)) * self.nv()
    }

    fn transport(&self, field: &mut KineticField, tau: f64, flux: &mut [f64], x_first: bool) {
        if x_first {
            self.sweep_x(field, tau, flux);
            self.sweep_y(field, tau, flux);
        } else {
            self.sweep_y(field, tau, flux);
            self.sweep_x(field, tau, flux);
        }
    }

    fn sweep_x(&self, field: &mut KineticField, tau: f64, flux: &mut [f64]) {
        let s = self.cfg.space;
        let (nx, nv) = (s.nx, self.nv());
        let periodic = self.cfg.boundary == Boundary::Periodic;
        let r = tau / s.dx();
        let zeros = vec![0.0; nv];
        let f = &field.f;
        let row_faces = (nx + 1) * nv;
        self.cfg.exec.chunks_mut(&mut flux[..row_faces * s.ny], row_faces, |iy, out| {
            let row = &f[iy * nx * nv..(iy + 1) * nx * nv];
            let cell = |k: isize| -> &[f64] {
                let k = if periodic { k.rem_euclid(nx as isize) } else { k };
                if k < 0 || k >= nx as isize {
                    &zeros
                } else {
                    &row[k as usize * nv..(k as usize + 1) * nv]
                }
            };
            for face in 0..=nx {
                let k = face as isize;
                face_flux(
                    &mut out[face * nv..(face + 1) * nv],
                    &self.cx,
                    r,
                    [cell(k - 2), cell(k - 1), cell(k), cell(k + 1)],
                    self.cfg.scheme,
                );
            }
        });
        let flux = &*flux;
        self.cfg.exec.chunks_mut(&mut field.f, nx * nv, |iy, row| {
            let fr = &flux[iy * row_faces..(iy + 1) * row_faces];
            for ix in 0..nx {
                for v in 0..nv {
                    row[ix * nv + v] -= r * (fr[(ix + 1) * nv + v] - fr[ix * nv + v]);
                }
            }
        });
        if !periodic {
            let w = tau * s.dy() * self.ks.grid.cell();
            let mut out = 0.0;
            for iy in 0..s.ny {
                let fr = &flux[iy * row_faces..(iy + 1) * row_faces];
                for v in 0..nv {
                    out += fr[nx * nv + v] - fr[v];
                }
            }
            field.outflow += out * w;
        }
    }

    fn sweep_y(&self, field: &mut KineticField, tau: f64, flux: &mut [f64]) {
        let s = self.cfg.space;
        let (nx, ny, nv) = (s.nx, s.ny, self.nv());
        let periodic = self.cfg.boundary == Boundary::Periodic;
        let r = tau / s.dy();
        let zeros = vec![0.0; nv];
        let f = &field.f;
        let face_row = nx * nv;
        self.cfg.exec.chunks_mut(&mut flux[..face_row * (ny + 1)], face_row, |face, out| {
            let cell = |k: isize, ix: usize| -> &[f64] {
                let k = if periodic { k.rem_euclid(ny as isize) } else { k };
                if k < 0 || k >= ny as isize {
                    &zeros
                } else {
                    let o = (k as usize * nx + ix) * nv;
                    &f[o..o + nv]
                }
            };
            let k = face as isize;
            for ix in 0..nx {
                face_flux(
                    &mut out[ix * nv..(ix + 1) * nv],
                    &self.cy,
                    r,
                    [cell(k - 2, ix), cell(k - 1, ix), cell(k, ix), cell(k + 1, ix)],
                    self.cfg.scheme,
                );
            }
        });
        let flux = &*flux;
        self.cfg.exec.chunks_mut(&mut field.f, face_row, |iy, row| {
            let lo = &flux[iy * face_row..(iy + 1) * face_row];
            let hi = &flux[(iy + 1) * face_row..(iy + 2) * face_row];
            for n in 0..face_row {
                row[n] -= r * (hi[n] - lo[n]);
            }
        });
        if !periodic {
            let w = tau * s.dx() * self.ks.grid.cell();
            let lo = &flux[..face_row];
            let hi = &flux[ny * face_row..(ny + 1) * face_row];
            let out: f64 = hi.iter().zip(lo).map(|(h, l)| h - l).sum();
            field.outflow += out * w;
        }
    }

    fn collide(&self, field: &mut KineticField, dt: f64) {
        let freq = self.collision_frequency();
        let n_sub = ((dt * freq / SUBSTEP).ceil() as usize).max(1);
        let h = dt / n_sub as f64;
        let nv = self.nv();
        let ks = &self.ks;
        let c = ks.grid.cell();
        let (mt, mh, mu) = (self.mu_tilde, self.mu_hat, self.mu_bgk);
        let model = self.cfg.mode.model;
        let m = &self.bgk_m;
        let clipped = std::sync::atomic::AtomicUsize::new(0);
        self.cfg.exec.chunks_mut_with(
            &mut field.f,
            nv * CELLS_PER_TASK,
            || (Rk4Buf::new(nv), OpScratch::new(&ks.grid)),
            |(buf, scr), _, cells| {
                for cell in cells.chunks_exact_mut(nv) {
                    for _ in 0..n_sub {
                        match model {
                            CollisionModel::TwoOperator => {
                                rk4_step(cell, h, buf, |x, out| apply_l_into(ks, mt, mh, x, out, scr))
                            }
                            CollisionModel::Bgk => rk4_step(cell, h, buf, |x, out| {
                                let rho = x.iter().sum::<f64>() * c;
                                for ((o, xv), mv) in out.iter_mut().zip(x).zip(m) {
                                    *o = mu * (rho * mv - xv);
                                }
                            }),
                        }
                    }
                    let top = cell.iter().fold(0.0f64, |a, &b| a.max(b));
                    let mut n = 0;
                    for x in cell.iter_mut() {
                        if *x < -1e-14 * top {
                            *x = 0.0;
                            n += 1;
                        }
                    }
                    if n > 0 {
                        clipped.fetch_add(n, std::sync::atomic::Ordering::Relaxed);
                    }
                }
            },
        );
        field.clipped += clipped.into_inner();
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Numerical flux through the face between cells `k-1` and `k`, per velocity.
/// `cells` holds `[k-2, k-1, k, k+1]`; `r = tau / dx`.
#[inline]
fn face_flux(out: &mut [f64], c: &[f64], r: f64, cells: [&[f64]; 4], scheme: TransportScheme) {
    let [ll, l, rr_, rrr] = cells;
    match scheme {
        TransportScheme::Upwind => {
            for v in 0..out.len() {
                let a = c[v];
                out[v] = if a >= 0.0 { a * l[v] } else { a * rr_[v] };
            }
        }
        TransportScheme::Minmod => {
            for v in 0..out.len() {
                let a = c[v];
                let nu = (a * r).abs();
                out[v] = if a >= 0.0 {
                    a * (l[v] + 0.5 * (1.0 - nu) * minmod(rr_[v] - l[v], l[v] - ll[v]))
                } else {
                    a * (rr_[v] - 0.5 * (1.0 - nu) * minmod(rrr[v] - rr_[v], rr_[v] - l[v]))
                };
            }
        }
    }
}
