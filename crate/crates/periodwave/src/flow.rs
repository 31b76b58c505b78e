//! Optimal-transport conditional flow matching: probability path, target
//! vector field, regression loss and prior sampling.
//!
//! The path is the straight line phi_t(x0) = (1 - (1 - sigma_min) t) x0 + t x1
//! with constant target field u = x1 - (1 - sigma_min) x0.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Default sigma_min of the OT path.
pub const SIGMA_MIN: f64 = 1e-4;

/// Default prior noise scale alpha.
pub const NOISE_SCALE: f64 = 0.5;

/// Default inference temperature tau.
pub const TEMPERATURE: f64 = 0.667;

/// Scale and shape of the data-dependent prior draw.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    /// Per-sample std from the energy prior.
    pub sample_std: Vec<f64>,
    /// Noise scale alpha applied at train and inference time.
    pub noise_scale: f64,
    /// Temperature tau; fixed to 1 during training.
    pub temperature: f64,
}

impl PriorSpec {
    pub fn new(sample_std: Vec<f64>, noise_scale: f64, temperature: f64) -> Result<Self> {
        if noise_scale <= 0.0 {
            return Err(Error::Config("noise scale must be > 0".into()));
        }
        if temperature < 0.0 {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        Ok(PriorSpec {
            sample_std,
            noise_scale,
            temperature,
        })
    }
}

/// Draw x0[i] = tau * alpha * std[i] * eps_i with eps ~ N(0, 1).
pub fn sample_prior(spec: &PriorSpec, length: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if length != spec.sample_std.len() {
        return Err(Error::Shape(format!(
            "prior length {} != requested {length}",
            spec.sample_std.len()
        )));
    }
    let scale = spec.temperature * spec.noise_scale;
    Ok(spec
        .sample_std
        .iter()
        .map(|&s| scale * s * rng.normal())
        .collect())
}

/// phi_t(x0 | x1) evaluated elementwise.
pub fn ot_path(x0: &[f64], x1: &[f64], t: f64, sigma_min: f64) -> Result<Vec<f64>> {
    if x0.len() != x1.len() {
        return Err(Error::Shape(format!(
            "ot_path length mismatch: {} vs {}",
            x0.len(),
            x1.len()
        )));
    }
    let a = 1.0 - (1.0 - sigma_min) * t;
    Ok(x0
        .iter()
        .zip(x1)
        .map(|(&u, &v)| a * u + t * v)
        .collect())
}

/// The constant-in-t target field u = x1 - (1 - sigma_min) x0.
pub fn ot_target(x0: &[f64], x1: &[f64], sigma_min: f64) -> Result<Vec<f64>> {
    if x0.len() != x1.len() {
        return Err(Error::Shape(format!(
            "ot_target length mismatch: {} vs {}",
            x0.len(),
            x1.len()
        )));
    }
    let c = 1.0 - sigma_min;
    Ok(x0.iter().zip(x1).map(|(&u, &v)| v - c * u).collect())
}

/// Mean squared error between predicted and target fields.
pub fn cfm_loss(v_pred: &[f64], u_target: &[f64]) -> Result<f64> {
    if v_pred.is_empty() {
        return Err(Error::Shape("cfm_loss of empty input".into()));
    }
    if v_pred.len() != u_target.len() {
        return Err(Error::Shape(format!(
            "cfm_loss length mismatch: {} vs {}",
            v_pred.len(),
            u_target.len()
        )));
    }
    let sum: f64 = v_pred
        .iter()
        .zip(u_target)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(sum / v_pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_pair(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = Rng::seed_from(seed);
        let a = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let b = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        (a, b)
    }

    #[test]
    fn path_starts_at_x0() {
        let (x0, x1) = random_pair(64, 1);
        let p = ot_path(&x0, &x1, 0.0, SIGMA_MIN).unwrap();
        assert_eq!(p, x0);
    }

    #[test]
    fn straight_midpoint() {
        let p = ot_path(&[0.0], &[2.0], 0.5, 0.0).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn path_end_with_sigma_min() {
        let p = ot_path(&[1.0], &[1.0], 1.0, 1e-4).unwrap();
        assert!((p[0] - 1.0001).abs() < 1e-12);
    }

    #[test]
    fn target_reduces_to_x1_for_zero_x0() {
        let (_, x1) = random_pair(32, 2);
        let x0 = vec![0.0; 32];
        let u = ot_target(&x0, &x1, SIGMA_MIN).unwrap();
        assert_eq!(u, x1);
    }

    #[test]
    fn degenerate_pair_zero_target() {
        let x = vec![0.7; 16];
        let u = ot_target(&x, &x, 0.0).unwrap();
        assert!(u.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn finite_difference_of_path_matches_target() {
        let (x0, x1) = random_pair(128, 3);
        let u = ot_target(&x0, &x1, SIGMA_MIN).unwrap();
        let h = 1e-3;
        for &t in &[0.1, 0.5, 0.9] {
            let hi = ot_path(&x0, &x1, t + h, SIGMA_MIN).unwrap();
            let lo = ot_path(&x0, &x1, t - h, SIGMA_MIN).unwrap();
            for ((a, b), &ui) in hi.iter().zip(&lo).zip(&u) {
                let fd = (a - b) / (2.0 * h);
                assert!((fd - ui).abs() < 1e-5, "fd {fd} target {ui}");
            }
        }
    }

    #[test]
    fn loss_zero_iff_equal() {
        let (x0, x1) = random_pair(50, 4);
        assert_eq!(cfm_loss(&x0, &x0).unwrap(), 0.0);
        assert!(cfm_loss(&x0, &x1).unwrap() > 0.0);
    }

    #[test]
    fn unit_offset_loss() {
        let v = vec![1.0; 10];
        let u = vec![0.0; 10];
        assert!((cfm_loss(&v, &u).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_bruteforce() {
        let (a, b) = random_pair(333, 5);
        let got = cfm_loss(&a, &b).unwrap();
        let mut acc = 0.0;
        for i in 0..a.len() {
            acc += (a[i] - b[i]).powi(2);
        }
        assert!((got - acc / 333.0).abs() < 1e-7);
    }

    #[test]
    fn zero_temperature_is_deterministic_zero() {
        let spec = PriorSpec::new(vec![1.0; 100], 0.5, 0.0).unwrap();
        let mut rng = Rng::seed_from(10);
        let x0 = sample_prior(&spec, 100, &mut rng).unwrap();
        assert!(x0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prior_monte_carlo_std() {
        let n = 1_000_000;
        let spec = PriorSpec::new(vec![1.0; n], NOISE_SCALE, TEMPERATURE).unwrap();
        let mut rng = Rng::seed_from(123);
        let x0 = sample_prior(&spec, n, &mut rng).unwrap();
        let var: f64 = x0.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!(
            (std - 0.3335).abs() < 0.002,
            "empirical std {std}, want 0.3335 +- 0.002"
        );
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(ot_path(&[1.0], &[1.0, 2.0], 0.5, 0.0).is_err());
        assert!(ot_target(&[1.0], &[1.0, 2.0], 0.0).is_err());
        assert!(cfm_loss(&[], &[]).is_err());
        let spec = PriorSpec::new(vec![1.0; 4], 0.5, 1.0).unwrap();
        assert!(sample_prior(&spec, 5, &mut Rng::seed_from(0)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn prop_path_target_consistency(seed in 0u64..500, t in 0.05f64..0.95) {
                let (x0, x1) = random_pair(32, seed);
                let u = ot_target(&x0, &x1, SIGMA_MIN).unwrap();
                let h = 1e-3;
                let hi = ot_path(&x0, &x1, t + h, SIGMA_MIN).unwrap();
                let lo = ot_path(&x0, &x1, t - h, SIGMA_MIN).unwrap();
                for ((a, b), &ui) in hi.iter().zip(&lo).zip(&u) {
                    prop_assert!(((a - b) / (2.0 * h) - ui).abs() < 1e-5);
                }
            }

            #[test]
            fn prop_loss_nonnegative(seed in 0u64..500) {
                let (a, b) = random_pair(64, seed);
                prop_assert!(cfm_loss(&a, &b).unwrap() >= 0.0);
            }
        }
    }
}
