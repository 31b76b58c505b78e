//! Orthonormal Haar DWT and the depth-2 wavelet-packet split into four
//! equal-width frequency bands.
//!
//! The packet leaves are frequency-ordered (Gray-code corrected), so at a
//! 24 kHz rate the four bands cover 0-3, 3-6, 6-9 and 9-12 kHz in order.

use crate::error::{Error, Result};

/// Four subband signals, low to high frequency, each of length T/4.
#[derive(Debug, Clone, PartialEq)]
pub struct BandComponents {
    pub bands: [Vec<f64>; 4],
}

impl BandComponents {
    pub fn band_len(&self) -> usize {
        self.bands[0].len()
    }

    pub fn band_energies(&self) -> [f64; 4] {
        let mut e = [0.0; 4];
        for (i, b) in self.bands.iter().enumerate() {
            e[i] = b.iter().map(|x| x * x).sum();
        }
        e
    }
}

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// One level of orthonormal Haar analysis.
///
/// a_k = (x_{2k} + x_{2k+1})/sqrt(2), d_k = (x_{2k} - x_{2k+1})/sqrt(2).
pub fn dwt(signal: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if signal.len() % 2 != 0 {
        return Err(Error::Shape(format!(
            "dwt requires even length, got {}",
            signal.len()
        )));
    }
    let half = signal.len() / 2;
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    for k in 0..half {
        let x0 = signal[2 * k];
        let x1 = signal[2 * k + 1];
        approx.push((x0 + x1) * INV_SQRT2);
        detail.push((x0 - x1) * INV_SQRT2);
    }
    Ok((approx, detail))
}

/// Exact inverse of [`dwt`].
pub fn idwt(approx: &[f64], detail: &[f64]) -> Result<Vec<f64>> {
    if approx.len() != detail.len() {
        return Err(Error::Shape(format!(
            "idwt length mismatch: {} vs {}",
            approx.len(),
            detail.len()
        )));
    }
    let mut out = Vec::with_capacity(approx.len() * 2);
    for (a, d) in approx.iter().zip(detail) {
        out.push((a + d) * INV_SQRT2);
        out.push((a - d) * INV_SQRT2);
    }
    Ok(out)
}

/// Depth-2 full wavelet packet, leaves reordered low to high frequency.
///
/// Natural tree order is [aa, ad, da, dd]; because the detail branch flips
/// the spectrum on decimation, the frequency order is [aa, ad, dd, da].
pub fn packet_split(signal: &[f64]) -> Result<BandComponents> {
    if signal.len() % 4 != 0 {
        return Err(Error::Shape(format!(
            "packet_split requires length divisible by 4, got {}",
            signal.len()
        )));
    }
    let (a, d) = dwt(signal)?;
    let (aa, ad) = dwt(&a)?;
    let (da, dd) = dwt(&d)?;
    Ok(BandComponents {
        bands: [aa, ad, dd, da],
    })
}

/// Exact inverse of [`packet_split`].
pub fn packet_merge(b: &BandComponents) -> Result<Vec<f64>> {
    let n = b.bands[0].len();
    if b.bands.iter().any(|band| band.len() != n) {
        return Err(Error::Shape("packet_merge: band length mismatch".into()));
    }
    let a = idwt(&b.bands[0], &b.bands[1])?;
    let d = idwt(&b.bands[3], &b.bands[2])?;
    idwt(&a, &d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_signal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = Rng::seed_from(seed);
        (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()
    }

    #[test]
    fn constant_pair() {
        let (a, d) = dwt(&[2.0, 2.0]).unwrap();
        assert!((a[0] - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn zeros_stay_zero() {
        let (a, d) = dwt(&[0.0; 64]).unwrap();
        assert!(a.iter().chain(&d).all(|&x| x == 0.0));
    }

    #[test]
    fn parseval_energy() {
        let x = random_signal(1024, 11);
        let (a, d) = dwt(&x).unwrap();
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ead: f64 = a.iter().chain(&d).map(|v| v * v).sum();
        assert!((ex - ead).abs() < 1e-9 * ex.max(1.0), "{ex} vs {ead}");
    }

    #[test]
    fn idwt_closed_forms() {
        let x = idwt(&[2.0 * std::f64::consts::SQRT_2], &[0.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);

        // a=x, d=0 upsamples to pairs (x_k/sqrt2, x_k/sqrt2)
        let a = [1.0, -0.5, 0.25];
        let up = idwt(&a, &[0.0; 3]).unwrap();
        for (k, &v) in a.iter().enumerate() {
            assert!((up[2 * k] - v * INV_SQRT2).abs() < 1e-12);
            assert!((up[2 * k + 1] - v * INV_SQRT2).abs() < 1e-12);
        }
    }

    #[test]
    fn dwt_roundtrip() {
        let x = random_signal(512, 21);
        let (a, d) = dwt(&x).unwrap();
        let y = idwt(&a, &d).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn dc_goes_to_band0() {
        let x = vec![0.5; 256];
        let b = packet_split(&x).unwrap();
        let e = b.band_energies();
        assert!(e[0] > 1e-6);
        assert!(e[1] < 1e-12 && e[2] < 1e-12 && e[3] < 1e-12);
    }

    #[test]
    fn nyquist_goes_to_band3() {
        // alternating +1,-1 is pure Nyquist; in the natural packet tree that
        // is node dd, which sits at frequency-ordered position 3
        let x: Vec<f64> = (0..256).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let b = packet_split(&x).unwrap();
        let e = b.band_energies();
        assert!(e[3] > 1e-6);
        assert!(e[0] < 1e-12 && e[1] < 1e-12 && e[2] < 1e-12);
    }

    #[test]
    fn packet_roundtrip() {
        let x = random_signal(4096, 31);
        let y = packet_merge(&packet_split(&x).unwrap()).unwrap();
        let max = x
            .iter()
            .zip(&y)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        assert!(max < 1e-6, "max err {max}");
    }

    #[test]
    fn lowpass_projection() {
        // keep only band 0, merge, re-split: bands 1..3 stay (near) zero
        let x = random_signal(1024, 41);
        let b = packet_split(&x).unwrap();
        let proj = BandComponents {
            bands: [
                b.bands[0].clone(),
                vec![0.0; 256],
                vec![0.0; 256],
                vec![0.0; 256],
            ],
        };
        let low = packet_merge(&proj).unwrap();
        let again = packet_split(&low).unwrap();
        let e = again.band_energies();
        assert!(e[1] < 1e-12 && e[2] < 1e-12 && e[3] < 1e-12);
        // band 0 unchanged
        for (u, v) in b.bands[0].iter().zip(&again.bands[0]) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn frequency_ordering_of_sines() {
        // pure sines at the band centers land in the right band at 24 kHz
        let fs = 24_000.0;
        for (band, freq) in [(0usize, 1500.0), (1, 4500.0), (2, 7500.0), (3, 10500.0)] {
            let x: Vec<f64> = (0..4096)
                .map(|i| (std::f64::consts::TAU * freq * i as f64 / fs).sin())
                .collect();
            let b = packet_split(&x).unwrap();
            let e = b.band_energies();
            let argmax = e
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, band, "{freq} Hz energies {e:?}");
        }
    }

    #[test]
    fn odd_length_rejected() {
        assert!(dwt(&[1.0, 2.0, 3.0]).is_err());
        assert!(packet_split(&[1.0, 2.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn prop_perfect_reconstruction(seed in 0u64..1000, exp in 2u32..12) {
                let n = (1usize << exp).max(4);
                let x = random_signal(n, seed);
                let y = packet_merge(&packet_split(&x).unwrap()).unwrap();
                for (u, v) in x.iter().zip(&y) {
                    prop_assert!((u - v).abs() < 1e-6);
                }
            }

            #[test]
            fn prop_split_preserves_energy(seed in 0u64..1000) {
                let x = random_signal(1024, seed);
                let b = packet_split(&x).unwrap();
                let ex: f64 = x.iter().map(|v| v * v).sum();
                let eb: f64 = b.band_energies().iter().sum();
                prop_assert!((ex - eb).abs() <= 1e-9 * ex.max(1.0));
            }
        }
    }
}
