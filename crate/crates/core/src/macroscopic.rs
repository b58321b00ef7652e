//! Drift-diffusion limits and a finite-volume solver for them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSet;
use crate::par::Exec;
use crate::spatial::{FieldMoments, SpatialGrid};
use crate::tensor::{add, eig_sym, max_abs, outer, scale, sub, sym, vadd, vscale, Mat2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacroVariant {
    /// Single-operator model.
    M1,
    /// Both jump processes at the same rate.
    M2,
    /// Fast direction jumps.
    M3,
    /// Fast speed jumps.
    M4,
}

impl MacroVariant {
    pub const ALL: [MacroVariant; 4] = [Self::M1, Self::M2, Self::M3, Self::M4];
}

impl fmt::Display for MacroVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::M1 => "m1",
            Self::M2 => "m2",
            Self::M3 => "m3",
            Self::M4 => "m4",
        };
        f.write_str(s)
    }
}

impl FromStr for MacroVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Self::M1),
            "m2" => Ok(Self::M2),
            "m3" => Ok(Self::M3),
            "m4" => Ok(Self::M4),
            _ => Err(invalid(format!("unknown macroscopic variant '{s}'"))),
        }
    }
}

/// Constant-coefficient drift-diffusion model `rho_t + div(rho u) = div(D grad rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroModel {
    pub variant: MacroVariant,
    pub drift: Vec2,
    pub diffusion: Mat2,
    pub epsilon: f64,
    pub mu_tilde: f64,
    pub mu_hat: f64,
    pub mu: f64,
}

impl MacroModel {
    /// Model with the given coefficients, for tests and custom runs.
    pub fn custom(drift: Vec2, diffusion: Mat2) -> Result<Self> {
        let m = Self {
            variant: MacroVariant::M1,
            drift,
            diffusion: sym(diffusion),
            epsilon: 1.0,
            mu_tilde: 1.0,
            mu_hat: 1.0,
            mu: 1.0,
        };
        m.check_definite()?;
        Ok(m)
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        eig_sym(self.diffusion)
    }

    fn check_definite(&self) -> Result<()> {
        let e = self.eigenvalues();
        if e[0] < -1e-12 * max_abs(self.diffusion) {
            return Err(Error::IndefiniteDiffusion {
                variant: self.variant.to_string(),
                eigenvalues: e,
            });
        }
        Ok(())
    }
}

/// Drift and diffusion of `variant` from the kernel moments.
pub fn assemble_macro_model(ks: &KernelSet, variant: MacroVariant, epsilon: f64) -> Result<MacroModel> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let m = &ks.moments;
    let (mt, mh, mu) = (ks.freq.mu_tilde, ks.freq.mu_hat, ks.freq.mu);
    let s = mt + mh;
    let e = epsilon;
    let (drift, diffusion) = match variant {
        MacroVariant::M1 => (m.u_m, scale(m.d_m, e / mu)),
        MacroVariant::M2 => {
            let t1 = scale(m.vq, e / s * m.v_psiq);
            let t2 = scale(outer(m.u_t, m.u_t), -e * (2.0 * mh + mt) / (mh * s));
            let t3 = scale(
                outer(m.u_q, m.u_q),
                e * mh * mh / (mt * s * s) * (m.v_psiq - m.u_psiq * m.u_psiq),
            );
            let w = vadd(vscale(m.upsi2_q, mt), vscale(m.u_q, mh * m.v_psiq));
            let t4 = scale(outer(m.u_q, w), e / (s * s));
            let j = add(scale(m.upsi_vq, mh * m.u_psiq), scale(m.upsi2_vq, mt));
            let t5 = scale(j, e * mt / (mh * s * s));
            (m.u_t, sym(add(add(add(t1, t2), add(t3, t4)), t5)))
        }
        MacroVariant::M3 => {
            let r = mt / mh;
            let drift = vadd(vscale(m.u_p, 1.0 - e * r), vscale(m.u_m, e * r));
            let d = scale(outer(m.u_q, m.u_q), e / mt * (m.v_psiq - m.u_psiq * m.u_psiq));
            (drift, d)
        }
        MacroVariant::M4 => {
            let drift = vadd(
                vscale(m.u_m, 1.0 + e),
                vscale([m.u_m[0] - m.u_p[0], m.u_m[1] - m.u_p[1]], -e * mh / mt),
            );
            (drift, scale(sub(m.upsi2_vq, outer(m.u_m, m.u_m)), e / mh))
        }
    };
    let model = MacroModel {
        variant,
        drift,
        diffusion,
        epsilon,
        mu_tilde: mt,
        mu_hat: mh,
        mu,
    };
    model.check_definite()?;
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftScheme {
    #[default]
    Upwind,
    Minmod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub rho: Vec<f64>,
    pub time: f64,
}

/// Explicit finite-volume stepper with zero-flux walls.
#[derive(Debug, Clone)]
pub struct MacroSolver {
    pub space: SpatialGrid,
    pub model: MacroModel,
    pub scheme: DriftScheme,
    pub exec: Exec,
}

/// Safety factor on the explicit stability bound.
const SAFETY: f64 = 0.9;

impl MacroSolver {
    pub fn new(space: SpatialGrid, model: MacroModel) -> Self {
        Self {
            space,
            model,
            scheme: DriftScheme::Upwind,
            exec: Exec::default(),
        }
    }

    /// Largest stable step of the explicit update.
    pub fn max_dt(&self) -> f64 {
        let (dx, dy) = (self.space.dx(), self.space.dy());
        let [ux, uy] = self.model.drift;
        let d = self.model.diffusion;
        let rate = ux.abs() / dx
            + uy.abs() / dy
            + 2.0 * d[0][0] / (dx * dx)
            + 2.0 * d[1][1] / (dy * dy)
            + 2.0 * d[0][1].abs() / (dx * dy);
        if rate == 0.0 {
            f64::INFINITY
        } else {
            SAFETY / rate
        }
    }

    pub fn state(&self, rho: Vec<f64>) -> Result<MacroState> {
        if rho.len() != self.space.len() {
            return Err(invalid("density does not match the spatial grid"));
        }
        Ok(MacroState { rho, time: 0.0 })
    }

    pub fn moments(&self, state: &MacroState) -> FieldMoments {
        FieldMoments::of(&self.space, &state.rho)
    }

    pub fn step(&self, state: &mut MacroState, dt: f64) -> Result<()> {
        let limit = self.max_dt();
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Stability(format!("dt = {dt} exceeds the stable limit {limit}")));
        }
        let SpatialGrid { nx, ny, .. } = self.space;
        let (dx, dy) = (self.space.dx(), self.space.dy());
        let [ux, uy] = self.model.drift;
        let d = self.model.diffusion;
        let rho = &state.rho;
        let at = |ix: isize, iy: isize| -> f64 {
            // reflected ghosts give zero normal gradient at the walls
            let ix = ix.clamp(0, nx as isize - 1) as usize;
            let iy = iy.clamp(0, ny as isize - 1) as usize;
            rho[iy * nx + ix]
        };
        let scheme = self.scheme;
        let drift_flux = |u: f64, c: f64, ll: f64, l: f64, r: f64, rr: f64| -> f64 {
            match scheme {
                DriftScheme::Upwind => {
                    if u >= 0.0 {
                        u * l
                    } else {
                        u * r
                    }
                }
                DriftScheme::Minmod => {
                    let nu = c.abs();
                    if u >= 0.0 {
                        u * (l + 0.5 * (1.0 - nu) * minmod(r - l, l - ll))
                    } else {
                        u * (r - 0.5 * (1.0 - nu) * minmod(rr - r, r - l))
                    }
                }
            }
        };

        // x faces: row iy, face k between cells k-1 and k
        let mut fx = vec![0.0; ny * (nx + 1)];
        self.exec.chunks_mut(&mut fx, nx + 1, |iy, row| {
            let j = iy as isize;
            for k in 1..nx {
                let (l, r) = (k as isize - 1, k as isize);
                let gx = (at(r, j) - at(l, j)) / dx;
                let gy = (at(l, j + 1) - at(l, j - 1) + at(r, j + 1) - at(r, j - 1)) / (4.0 * dy);
                // ghost values beyond the walls are not used by the drift flux
                let ll = if l > 0 { at(l - 1, j) } else { at(l, j) };
                let rr = if r < nx as isize - 1 { at(r + 1, j) } else { at(r, j) };
                row[k] = drift_flux(ux, ux * dt / dx, ll, at(l, j), at(r, j), rr)
                    - (d[0][0] * gx + d[0][1] * gy);
            }
        });
        let mut fy = vec![0.0; (ny + 1) * nx];
        self.exec.chunks_mut(&mut fy, nx, |k, row| {
            if k == 0 || k == ny {
                return;
            }
            let (l, r) = (k as isize - 1, k as isize);
            for (ix, out) in row.iter_mut().enumerate() {
                let i = ix as isize;
                let gy = (at(i, r) - at(i, l)) / dy;
                let gx = (at(i + 1, l) - at(i - 1, l) + at(i + 1, r) - at(i - 1, r)) / (4.0 * dx);
                let ll = if l > 0 { at(i, l - 1) } else { at(i, l) };
                let rr = if r < ny as isize - 1 { at(i, r + 1) } else { at(i, r) };
                *out = drift_flux(uy, uy * dt / dy, ll, at(i, l), at(i, r), rr)
                    - (d[1][0] * gx + d[1][1] * gy);
            }
        });
        let (fx, fy) = (&fx, &fy);
        self.exec.chunks_mut(&mut state.rho, nx, |iy, row| {
            for (ix, x) in row.iter_mut().enumerate() {
                let div = (fx[iy * (nx + 1) + ix + 1] - fx[iy * (nx + 1) + ix]) / dx
                    + (fy[(iy + 1) * nx + ix] - fy[iy * nx + ix]) / dy;
                *x -= dt * div;
            }
        });
        state.time += dt;
        Ok(())
    }

    /// Step with the largest stable dt until `t`.
    pub fn advance_to(&self, state: &mut MacroState, t: f64) -> Result<()> {
        let dt = self.max_dt();
        while state.time < t - 1e-12 * t.max(1.0) {
            let h = dt.min(t - state.time);
            self.step(state, h)?;
        }
        Ok(())
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

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::grid::VelocityGrid;
    use crate::kernels::{Frequencies, MeanSpeed};
    use crate::spatial::gaussian;
    use crate::tensor::{IDENT2, ZERO2};

    fn kernels(mean: MeanSpeed, k_q: f64, theta_q: f64, f: Frequencies) -> KernelSet {
        KernelSet::von_mises(VelocityGrid::new(16, 32, 4.0).unwrap(), 5.0, &mean, k_q, theta_q, f).unwrap()
    }

    fn close(a: Mat2, b: Mat2, tol: f64) -> bool {
        max_abs(sub(a, b)) <= tol
    }

    #[test]
    fn zero_mean_direction_drift() {
        let f = Frequencies::new(0.7, 1.9);
        let ks = kernels(MeanSpeed::HalfPlane { upper: 1.5, lower: 0.2 }, 4.0, PI / 2.0, f);
        let m2 = assemble_macro_model(&ks, MacroVariant::M2, 0.1).unwrap();
        let expect = vscale(ks.moments.u_m, f.mu_tilde / f.sum());
        assert!((m2.drift[0] - expect[0]).abs() < 1e-12 && (m2.drift[1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_mean_direction_diffusion_m2() {
        // reduced form with u_q = 0 written out independently
        let f = Frequencies::new(0.8, 1.3);
        let ks = kernels(MeanSpeed::HalfPlane { upper: 1.5, lower: 0.4 }, 3.0, PI / 2.0, f);
        let m = &ks.moments;
        let eps = 0.2;
        let (mt, mh) = (f.mu_tilde, f.mu_hat);
        let s = mt + mh;
        let nt = ks.n_theta();
        let mut integral = ZERO2;
        for j in 0..nt {
            let e = ks.grid.angle.dir(j);
            let u = m.u_psi[j];
            let w = (mh * m.u_psiq * u + mt * u * u) * ks.q[j] * ks.grid.angle.dtheta;
            integral = add(integral, scale(outer(e, e), w));
        }
        let expect = add(
            scale(
                sub(
                    scale(m.vq, m.v_psiq),
                    scale(outer(m.u_m, m.u_m), mt * mt * (2.0 * mh + mt) / (mh * s * s)),
                ),
                eps / s,
            ),
            scale(integral, eps * mt / (mh * s * s)),
        );
        let got = assemble_macro_model(&ks, MacroVariant::M2, eps).unwrap().diffusion;
        assert!(close(got, expect, 1e-12));
    }

    #[test]
    fn unconditioned_unit_frequencies_m2() {
        let ks = kernels(MeanSpeed::Constant { value: 1.7 }, 2.0, 0.6, Frequencies::default());
        let m = &ks.moments;
        let eps = 0.3;
        let var = m.v_psiq - m.u_psiq * m.u_psiq;
        let expect = scale(
            add(
                add(m.d_t, scale(outer(m.u_q, m.u_q), var)),
                scale(m.d_q, m.u_psiq * m.u_psiq),
            ),
            eps / 2.0,
        );
        let got = assemble_macro_model(&ks, MacroVariant::M2, eps).unwrap().diffusion;
        assert!(close(got, expect, 1e-12));
    }

    #[test]
    fn unconditioned_zero_mean_reductions() {
        let f = Frequencies::new(0.6, 1.4);
        let ks = kernels(MeanSpeed::Constant { value: 1.2 }, 2.5, PI / 2.0, f);
        let m = &ks.moments;
        let eps = 0.15;
        let m4 = assemble_macro_model(&ks, MacroVariant::M4, eps).unwrap();
        assert!(m4.drift[0].abs() < 1e-12 && m4.drift[1].abs() < 1e-12);
        let expect = scale(m.vq, eps / f.mu_hat * m.u_psiq * m.u_psiq);
        assert!(close(m4.diffusion, expect, 1e-12));

        let m3 = assemble_macro_model(&ks, MacroVariant::M3, eps).unwrap();
        let d = vscale(m.u_m, eps * f.mu_tilde / f.mu_hat);
        assert!((m3.drift[0] - d[0]).abs() < 1e-12 && (m3.drift[1] - d[1]).abs() < 1e-12);
        assert!(max_abs(m3.diffusion) < 1e-12);

        let m2 = assemble_macro_model(&ks, MacroVariant::M2, eps).unwrap();
        let s = f.sum();
        let expect = scale(m.vq, eps / s * (m.v_psiq + f.mu_tilde / f.mu_hat * m.u_psiq * m.u_psiq));
        assert!(close(m2.diffusion, expect, 1e-12));
    }

    #[test]
    fn uniform_kernels_are_pure_diffusion() {
        let ks = KernelSet::von_mises(
            VelocityGrid::new(8, 16, 4.0).unwrap(),
            0.0,
            &MeanSpeed::Constant { value: 2.0 },
            0.0,
            0.0,
            Frequencies::default(),
        )
        .unwrap();
        for v in MacroVariant::ALL {
            let m = assemble_macro_model(&ks, v, 0.5).unwrap();
            assert!(m.drift[0].abs() < 1e-13 && m.drift[1].abs() < 1e-13, "{v}");
        }
    }

    #[test]
    fn rejects_indefinite() {
        let r = MacroModel::custom([0.0; 2], [[1.0, 0.0], [0.0, -0.5]]);
        match r {
            Err(Error::IndefiniteDiffusion { eigenvalues, .. }) => assert!(eigenvalues[0] < 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variant_names_roundtrip() {
        for v in MacroVariant::ALL {
            assert_eq!(v.to_string().parse::<MacroVariant>().unwrap(), v);
        }
        assert!("m5".parse::<MacroVariant>().is_err());
    }

    fn space() -> SpatialGrid {
        SpatialGrid::new(48, 48, [0.0, 2.5], [0.0, 2.5]).unwrap()
    }

    #[test]
    fn nothing_moves_without_coefficients() {
        let solver = MacroSolver::new(space(), MacroModel::custom([0.0; 2], ZERO2).unwrap());
        let rho = space().sample(gaussian(1.0, 0.01, [1.25, 1.25]));
        let mut st = solver.state(rho.clone()).unwrap();
        for _ in 0..10 {
            solver.step(&mut st, 0.01).unwrap();
        }
        assert_eq!(st.rho, rho);
    }

    #[test]
    fn heat_kernel_variance() {
        let d = 0.02;
        let solver = MacroSolver::new(space(), MacroModel::custom([0.0; 2], scale(IDENT2, d)).unwrap());
        let mut st = solver.state(space().sample(gaussian(1.0, 0.01, [1.25, 1.25]))).unwrap();
        let v0 = solver.moments(&st).cov;
        let dt = solver.max_dt();
        for _ in 0..100 {
            solver.step(&mut st, dt).unwrap();
        }
        let v1 = solver.moments(&st).cov;
        let t = 100.0 * dt;
        for a in 0..2 {
            let expect = v0[a][a] + 2.0 * d * t;
            assert!(((v1[a][a] - expect) / expect).abs() < 0.01);
        }
    }

    #[test]
    fn anisotropic_cross_diffusion_variance() {
        let dm = [[0.02, 0.008], [0.008, 0.01]];
        let solver = MacroSolver::new(space(), MacroModel::custom([0.0; 2], dm).unwrap());
        let mut st = solver.state(space().sample(gaussian(1.0, 0.01, [1.25, 1.25]))).unwrap();
        let v0 = solver.moments(&st).cov;
        solver.advance_to(&mut st, 0.5).unwrap();
        let v1 = solver.moments(&st).cov;
        for a in 0..2 {
            for b in 0..2 {
                let expect = v0[a][b] + 2.0 * dm[a][b] * 0.5;
                assert!((v1[a][b] - expect).abs() < 0.01 * expect.abs().max(1e-3), "{a}{b}");
            }
        }
    }

    #[test]
    fn mass_conserved_long_run() {
        let model = MacroModel::custom([0.3, -0.2], [[0.01, 0.004], [0.004, 0.02]]).unwrap();
        let mut solver = MacroSolver::new(SpatialGrid::new(24, 24, [0.0, 2.5], [0.0, 2.5]).unwrap(), model);
        for scheme in [DriftScheme::Upwind, DriftScheme::Minmod] {
            solver.scheme = scheme;
            let rho = solver.space.sample(gaussian(1.0, 0.02, [1.25, 1.25]));
            let mut st = solver.state(rho).unwrap();
            let m0 = solver.moments(&st).mass;
            let dt = solver.max_dt();
            for _ in 0..10_000 {
                solver.step(&mut st, dt).unwrap();
            }
            let m1 = solver.moments(&st).mass;
            assert!(((m1 - m0) / m0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unstable_step() {
        let solver = MacroSolver::new(space(), MacroModel::custom([1.0, 0.0], ZERO2).unwrap());
        let mut st = solver.state(vec![1.0; 48 * 48]).unwrap();
        assert!(matches!(solver.step(&mut st, 1.0), Err(Error::Stability(_))));
    }

    #[test]
    fn drift_moves_centre() {
        let u = [0.2, 0.4];
        let solver = MacroSolver::new(space(), MacroModel::custom(u, ZERO2).unwrap());
        let mut st = solver.state(space().sample(gaussian(1.0, 0.01, [1.0, 0.8]))).unwrap();
        solver.advance_to(&mut st, 1.0).unwrap();
        let c = solver.moments(&st).center;
        assert!((c[0] - 1.2).abs() < 1e-6 && (c[1] - 1.2).abs() < 1e-6);
    }

    #[test]
    fn serial_matches_parallel() {
        let model = MacroModel::custom([0.3, 0.1], [[0.02, 0.005], [0.005, 0.01]]).unwrap();
        let run = |exec| {
            let mut s = MacroSolver::new(space(), model);
            s.exec = exec;
            let mut st = s.state(space().sample(gaussian(1.0, 0.01, [1.25, 1.25]))).unwrap();
            s.advance_to(&mut st, 0.3).unwrap();
            st
        };
        assert_eq!(run(Exec::Serial), run(Exec::Parallel));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn assembled_tensors_symmetric(
            mt in 0.2f64..3.0, mh in 0.2f64..3.0, kq in 0.0f64..6.0, th in 0.0f64..std::f64::consts::TAU,
            hi in 0.5f64..3.0, lo in 0.1f64..1.0, eps in 0.01f64..0.3,
        ) {
            let ks = kernels(MeanSpeed::HalfPlane { upper: hi, lower: lo }, kq, th, Frequencies::new(mt, mh));
            for v in MacroVariant::ALL {
                match assemble_macro_model(&ks, v, eps) {
                    Ok(m) => prop_assert_eq!(m.diffusion[0][1], m.diffusion[1][0]),
                    Err(Error::IndefiniteDiffusion { eigenvalues, .. }) => prop_assert!(eigenvalues[0] < 0.0),
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }
        }
    }
}
