//! Spherically isotropic noise fields by plane-wave superposition.
//!
//! Each plane wave carries an independent Gaussian noise signal; directions
//! follow a Fibonacci lattice on the unit sphere. Synthesis happens in the
//! frequency domain, so every microphone's delay is an exact phase ramp.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{dot, sub, ArrayGeometry, Point3};
use crate::rng::{derive_seed, CounterRng};
use crate::signal::MultichannelSignal;
use crate::{Complex, Error, Result, SPEED_OF_SOUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseField {
    /// Spectrally white plane waves.
    Diffuse,
    /// Plane waves with a -3 dB/octave tilt, emphasising low frequencies.
    Babble,
}

const MIN_PLANE_WAVES: usize = 64;
/// Below this frequency the babble tilt is held flat.
const BABBLE_CORNER_HZ: f64 = 100.0;

fn fibonacci_sphere(n: usize) -> Vec<Point3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

pub fn diffuse_noise(
    geometry: &ArrayGeometry,
    len: usize,
    fs: u32,
    num_plane_waves: usize,
    seed: u64,
) -> Result<MultichannelSignal> {
    synthesize(geometry, len, fs, num_plane_waves, seed, NoiseField::Diffuse)
}

/// Diffuse noise whose per-wave spectrum falls at 3 dB per octave.
pub fn babble_like_noise(
    geometry: &ArrayGeometry,
    len: usize,
    fs: u32,
    num_plane_waves: usize,
    seed: u64,
) -> Result<MultichannelSignal> {
    synthesize(geometry, len, fs, num_plane_waves, seed, NoiseField::Babble)
}

impl NoiseField {
    pub fn generate(
        self,
        geometry: &ArrayGeometry,
        len: usize,
        fs: u32,
        num_plane_waves: usize,
        seed: u64,
    ) -> Result<MultichannelSignal> {
        synthesize(geometry, len, fs, num_plane_waves, seed, self)
    }
}

fn synthesize(
    geometry: &ArrayGeometry,
    len: usize,
    fs: u32,
    num_plane_waves: usize,
    seed: u64,
    field: NoiseField,
) -> Result<MultichannelSignal> {
    if num_plane_waves < MIN_PLANE_WAVES {
        return Err(Error::invalid(format!("need at least {MIN_PLANE_WAVES} plane waves, got {num_plane_waves}")));
    }
    if len < 2 || fs == 0 {
        return Err(Error::invalid("diffuse noise needs len >= 2 and fs > 0"));
    }
    let bins = len / 2 + 1;
    let df = fs as f64 / len as f64;
    let center = geometry.center();
    let directions = fibonacci_sphere(num_plane_waves);
    let shaping: Vec<f64> = (0..bins)
        .map(|k| match field {
            NoiseField::Diffuse => 1.0,
            NoiseField::Babble => (BABBLE_CORNER_HZ / (k as f64 * df).max(BABBLE_CORNER_HZ)).sqrt(),
        })
        .collect();

    let wave_spectrum = |w: usize| -> Vec<Complex> {
        let mut rng = CounterRng::new(derive_seed(seed, &[w as u64]));
        (0..bins).map(|k| Complex::new(rng.normal(), rng.normal()) * shaping[k]).collect()
    };

    let mic_offsets: Vec<Point3> = geometry.mic_positions().iter().map(|p| sub(*p, center)).collect();
    let mut spectra = vec![vec![Complex::new(0.0, 0.0); bins]; mic_offsets.len()];
    for (w, u) in directions.iter().enumerate() {
        let noise = wave_spectrum(w);
        spectra.par_iter_mut().zip(&mic_offsets).for_each(|(acc, offset)| {
            // a wave arriving from direction u reaches points further along u first
            let tau = -dot(*offset, *u) / SPEED_OF_SOUND;
            let step = Complex::from_polar(1.0, -TAU * df * tau);
            let mut phasor = Complex::new(1.0, 0.0);
            for (k, (a, n)) in acc.iter_mut().zip(&noise).enumerate() {
                if k % 1024 == 0 {
                    phasor = Complex::from_polar(1.0, -TAU * df * k as f64 * tau);
                }
                *a += n * phasor;
                phasor *= step;
            }
        });
    }

    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(len);
    let mut channels: Vec<Vec<f64>> = spectra
        .into_iter()
        .map(|half| {
            let mut full = vec![Complex::new(0.0, 0.0); len];
            full[..bins].copy_from_slice(&half);
            full[0].im = 0.0;
            if len.is_multiple_of(2) {
                full[len / 2].im = 0.0;
            }
            for k in 1..(len - bins + 1) {
                full[len - k] = half[k].conj();
            }
            ifft.process(&mut full);
            full.into_iter().map(|c| c.re).collect()
        })
        .collect();

    let power: f64 = channels.iter().flatten().map(|v| v * v).sum::<f64>() / (channels.len() * len) as f64;
    let gain = if power > 0.0 { 1.0 / power.sqrt() } else { 0.0 };
    channels.iter_mut().flatten().for_each(|v| *v *= gain);
    MultichannelSignal::new(channels, fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::ula;

    #[test]
    fn lattice_is_unit_and_balanced() {
        let d = fibonacci_sphere(512);
        let mut mean = [0.0; 3];
        for u in &d {
            assert!((dot(*u, *u) - 1.0).abs() < 1e-12);
            (0..3).for_each(|i| mean[i] += u[i] / 512.0);
        }
        assert!(mean.iter().all(|m| m.abs() < 0.01));
    }

    #[test]
    fn duplicated_position_is_identical() {
        let g = ArrayGeometry::new(vec![[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.1, 1.0, 1.0]], [1.0, 0.0, 0.0]).unwrap();
        let x = diffuse_noise(&g, 4096, 16000, 64, 3).unwrap();
        assert_eq!(x.channel(0), x.channel(1));
        assert_ne!(x.channel(0), x.channel(2));
    }

    #[test]
    fn deterministic_and_normalized() {
        let g = ula([2.0, 2.0, 1.5], 4, 0.08, [1.0, 0.0, 0.0]).unwrap();
        let a = babble_like_noise(&g, 8192, 16000, 64, 9).unwrap();
        let b = babble_like_noise(&g, 8192, 16000, 64, 9).unwrap();
        assert_eq!(a, b);
        let p = crate::signal::mean_power(&a);
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_waves() {
        let g = ula([2.0, 2.0, 1.5], 4, 0.08, [1.0, 0.0, 0.0]).unwrap();
        assert!(diffuse_noise(&g, 1024, 16000, 32, 0).is_err());
    }
}
