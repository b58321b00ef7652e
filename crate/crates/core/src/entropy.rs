//! Weighted `L^2` distances to equilibrium and entropy dissipation.

use serde::Serialize;

use crate::error::Result;
use crate::kernels::KernelSet;
use crate::operators::{check_weights, marginals};

/// Entropy quantities of one velocity density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyReport {
    /// `|f - rho T|^2` in `L^2_T`.
    pub norm_t_sq: f64,
    pub d_t: f64,
    pub d_q: f64,
    pub d_psiq: f64,
    /// `<Lf, f>_T`, only for a direction-independent speed kernel.
    pub d_total: Option<f64>,
}

/// `-1/2 sum_k sum_l (a_k - a_l)^2 w_k w_l`, evaluated in centered form.
pub fn dissipation(a: &[f64], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let mean = a.iter().zip(w).map(|(a, w)| a * w).sum::<f64>() / total;
    -total * a.iter().zip(w).map(|(a, w)| (a - mean).powi(2) * w).sum::<f64>()
}

pub fn entropy_report(ks: &KernelSet, f: &[f64]) -> Result<EntropyReport> {
    check_weights(ks)?;
    Ok(report_unchecked(ks, f))
}

pub(crate) fn report_unchecked(ks: &KernelSet, f: &[f64]) -> EntropyReport {
    let g = &ks.grid;
    let m = marginals(g, f);
    let c = g.cell();

    let norm_t_sq = f
        .iter()
        .zip(&ks.t_eq)
        .map(|(x, t)| (x - m.rho * t).powi(2) / t)
        .sum::<f64>()
        * c;

    let a: Vec<f64> = f.iter().zip(&ks.t_eq).map(|(x, t)| x / t).collect();
    let w: Vec<f64> = ks.t_eq.iter().map(|t| t * c).collect();
    let d_t = dissipation(&a, &w);

    let a: Vec<f64> = m.dir.iter().zip(&ks.q).map(|(x, q)| x / q).collect();
    let w: Vec<f64> = ks.q.iter().map(|q| q * g.angle.dtheta).collect();
    let d_q = dissipation(&a, &w);

    let a: Vec<f64> = m.speed.iter().zip(&ks.psi_q).map(|(x, p)| x / p).collect();
    let w: Vec<f64> = ks.psi_q.iter().map(|p| p * g.speed.dv).collect();
    let d_psiq = dissipation(&a, &w);

    let d_total = ks.is_unconditioned().then(|| {
        ks.freq.sum() * d_t - ks.freq.mu_hat * d_psiq - ks.freq.mu_tilde * d_q
    });
    EntropyReport {
        norm_t_sq,
        d_t,
        d_q,
        d_psiq,
        d_total,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::grid::VelocityGrid;
    use crate::kernels::{Frequencies, MeanSpeed};
    use crate::operators::{apply_l, norm_t_sq};

    fn kernels(mean: MeanSpeed, f: Frequencies) -> KernelSet {
        KernelSet::von_mises(VelocityGrid::new(8, 12, 4.0).unwrap(), 2.0, &mean, 1.5, PI / 3.0, f)
            .unwrap()
    }

    fn literal(a: &[f64], w: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..a.len() {
            for l in 0..a.len() {
                s += (a[k] - a[l]).powi(2) * w[k] * w[l];
            }
        }
        -0.5 * s
    }

    fn positive_field(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() * 0.1).collect()
    }

    #[test]
    fn centered_form_matches_double_sum() {
        let a = [0.3, -1.0, 2.0, 0.7];
        let w = [0.1, 0.4, 0.2, 0.3];
        assert!((dissipation(&a, &w) - literal(&a, &w)).abs() < 1e-14);
    }

    #[test]
    fn equilibrium_has_no_dissipation() {
        let ks = kernels(MeanSpeed::Constant { value: 1.5 }, Frequencies::default());
        let f: Vec<f64> = ks.t_eq.iter().map(|t| 0.8 * t).collect();
        let r = entropy_report(&ks, &f).unwrap();
        assert!(r.norm_t_sq.abs() < 1e-28);
        assert!(r.d_t.abs() < 1e-28 && r.d_q.abs() < 1e-28 && r.d_psiq.abs() < 1e-28);
        assert!(r.d_total.unwrap().abs() < 1e-27);
    }

    #[test]
    fn literal_sums_agree() {
        let ks = kernels(MeanSpeed::HalfPlane { upper: 2.0, lower: 1.0 }, Frequencies::default());
        let f = positive_field(1, 96);
        let r = entropy_report(&ks, &f).unwrap();
        let c = ks.grid.cell();
        let a: Vec<f64> = f.iter().zip(&ks.t_eq).map(|(x, t)| x / t).collect();
        let w: Vec<f64> = ks.t_eq.iter().map(|t| t * c).collect();
        assert!((r.d_t - literal(&a, &w)).abs() < 1e-12 * r.d_t.abs());
        // D_T equals minus the squared distance when T has unit mass
        assert!((r.d_t + r.norm_t_sq).abs() < 1e-10 * r.norm_t_sq);
        assert!(r.d_total.is_none());
    }

    #[test]
    fn total_is_symmetric_form() {
        let fr = Frequencies::new(0.6, 1.7);
        let ks = kernels(MeanSpeed::Constant { value: 1.2 }, fr);
        let f = positive_field(2, 96);
        let r = entropy_report(&ks, &f).unwrap();
        let lf = apply_l(&ks, &f);
        let inner: f64 = lf
            .iter()
            .zip(&f)
            .zip(&ks.t_eq)
            .map(|((a, b), t)| a * b / t)
            .sum::<f64>()
            * ks.grid.cell();
        assert!((r.d_total.unwrap() - inner).abs() < 1e-10 * inner.abs());
        // d/dt |f - rho T|^2 = 2 <Lf, f>
        let h = 1e-6;
        let fp: Vec<f64> = f.iter().zip(&lf).map(|(a, b)| a + h * b).collect();
        let fm: Vec<f64> = f.iter().zip(&lf).map(|(a, b)| a - h * b).collect();
        let rho = ks.grid.mass(&f);
        let dist = |g: &[f64]| {
            let d: Vec<f64> = g.iter().zip(&ks.t_eq).map(|(x, t)| x - rho * t).collect();
            norm_t_sq(&ks, &d)
        };
        let deriv = (dist(&fp) - dist(&fm)) / (2.0 * h);
        assert!((deriv - 2.0 * inner).abs() < 1e-6 * inner.abs());
    }

    #[test]
    fn degenerate_kernels_rejected() {
        let ks = KernelSet::von_mises(
            VelocityGrid::new(16, 32, 4.0).unwrap(),
            80.0,
            &MeanSpeed::Constant { value: 1.5 },
            10.0,
            PI / 2.0,
            Frequencies::default(),
        )
        .unwrap();
        assert!(entropy_report(&ks, &ks.t_eq).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn signs_and_jensen(seed in 0u64..10_000, mt in 0.1f64..4.0, mh in 0.1f64..4.0) {
            let ks = kernels(MeanSpeed::Constant { value: 2.2 }, Frequencies::new(mt, mh));
            let f = positive_field(seed, 96);
            let r = entropy_report(&ks, &f).unwrap();
            let tol = 1e-12 * r.norm_t_sq;
            prop_assert!(r.norm_t_sq >= 0.0);
            prop_assert!(r.d_t <= tol && r.d_q <= tol && r.d_psiq <= tol);
            prop_assert!(r.d_t <= r.d_q + tol);
            prop_assert!(r.d_t <= r.d_psiq + tol);
            prop_assert!(r.d_total.unwrap() <= tol);
        }

        #[test]
        fn conditioned_signs(seed in 0u64..10_000) {
            let ks = kernels(MeanSpeed::AbsCos { amplitude: 2.0 }, Frequencies::default());
            let f = positive_field(seed, 96);
            let r = entropy_report(&ks, &f).unwrap();
            prop_assert!(r.d_t <= 0.0 && r.d_q <= 0.0);
            prop_assert!(r.d_t <= r.d_q + 1e-12 * r.norm_t_sq);
        }
    }
}
