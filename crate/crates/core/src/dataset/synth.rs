use super::{wrap_phase, PhaseMap};
use crate::acoustics::Rir;
use crate::rng::{derive_seed, CounterRng};
use crate::signal::{convolve_many, stft, white_noise, MultichannelSignal, Spectrogram, StftParams};
use crate::{Error, Result};

/// Convolves a mono source with every channel of `rir`; output keeps the
/// source length.
pub fn spatialize(source: &[f64], rir: &Rir) -> Result<MultichannelSignal> {
    let mut chans = convolve_many(source, rir.taps());
    chans.iter_mut().for_each(|c| c.truncate(source.len()));
    MultichannelSignal::new(chans, rir.sample_rate())
}

/// One white-noise realization spatialized through `rir`, `noise_len`
/// samples long. The convolution onset is discarded so every sample sees the
/// full reverberant tail.
pub fn synth_single_source_signal(rir: &Rir, noise_len: usize, seed: u64) -> Result<MultichannelSignal> {
    let lead = rir.len().saturating_sub(1);
    let noise = white_noise(noise_len + lead, 1, rir.sample_rate(), seed);
    spatialize(noise.channel(0), rir)?.slice(lead, noise_len)
}

pub fn synth_single_source_stft(rir: &Rir, noise_len: usize, params: StftParams, seed: u64) -> Result<Spectrogram> {
    stft(&synth_single_source_signal(rir, noise_len, seed)?, params)
}

/// Per-subband permutations of `frames` concatenated frame indices, one
/// independently seeded permutation per bin.
pub fn interleave_permutations(frames: usize, bins: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..bins).map(|k| CounterRng::new(derive_seed(seed, &[k as u64])).permutation(frames)).collect()
}

/// Concatenates two spectrograms along time, then shuffles frames within
/// each subband. All channels of a time-frequency bin move together.
pub fn interleave_two_sources(a: &Spectrogram, b: &Spectrogram, seed: u64) -> Result<Spectrogram> {
    if a.num_channels() != b.num_channels()
        || a.num_bins() != b.num_bins()
        || a.frame_len() != b.frame_len()
        || a.hop() != b.hop()
        || a.sample_rate() != b.sample_rate()
    {
        return Err(Error::shape(format!(
            "cannot interleave {}x{} and {}x{} spectrograms",
            a.num_channels(),
            a.num_bins(),
            b.num_channels(),
            b.num_bins()
        )));
    }
    let (na, nb) = (a.num_frames(), b.num_frames());
    let total = na + nb;
    let bins = a.num_bins();
    let perms = interleave_permutations(total, bins, seed);
    let mut data = Vec::with_capacity(a.num_channels() * total * bins);
    for m in 0..a.num_channels() {
        for n in 0..total {
            for (k, perm) in perms.iter().enumerate() {
                let src = perm[n];
                data.push(if src < na { a.get(m, src, k) } else { b.get(m, src - na, k) });
            }
        }
    }
    Spectrogram::from_parts(data, a.num_channels(), total, a.params(), a.sample_rate())
}

/// Phase of every channel at one frame, wrapped to (−π, π].
pub fn extract_phase_map(spec: &Spectrogram, frame: usize) -> Result<PhaseMap> {
    if frame >= spec.num_frames() {
        return Err(Error::invalid(format!("frame {frame} out of range for {} frames", spec.num_frames())));
    }
    let mut values = Vec::with_capacity(spec.num_channels() * spec.num_bins());
    for m in 0..spec.num_channels() {
        values.extend(spec.frame(m, frame).iter().map(|c| wrap_phase(c.arg())));
    }
    PhaseMap::new(spec.num_channels(), spec.num_bins(), values)
}

pub fn phase_maps(spec: &Spectrogram) -> Result<Vec<PhaseMap>> {
    (0..spec.num_frames()).map(|n| extract_phase_map(spec, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::{image_method_rir, ula, RoomConfig, SourcePlacement};
    use crate::Complex;
    use std::f64::consts::PI;

    fn anechoic_rir(doa: f64, spacing: f64) -> Rir {
        let room = RoomConfig::new("free", [8.0, 8.0, 4.0], 0.0).unwrap();
        let geom = ula([4.0, 3.0, 1.5], 4, spacing, [1.0, 0.0, 0.0]).unwrap();
        let src = SourcePlacement::new(doa, 2.0).unwrap().position_in(&geom, &room).unwrap();
        let parts =
            geom.mic_positions().iter().map(|&p| image_method_rir(&room, src, p, 16000, Some(400)).unwrap()).collect();
        Rir::stack(parts).unwrap()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    fn wrapped(x: f64) -> f64 {
        (x + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn broadside_has_no_phase_difference() {
        let spec = synth_single_source_stft(&anechoic_rir(90.0, 0.08), 8192, StftParams::half_overlap(256), 3).unwrap();
        let mut diffs = Vec::new();
        for n in 0..spec.num_frames() {
            for k in 1..spec.num_bins() {
                diffs.push(wrapped((spec.get(2, n, k) * spec.get(1, n, k).conj()).arg()).abs());
            }
        }
        assert!(median(diffs) < 0.05);
    }

    #[test]
    fn endfire_matches_analytic_delay() {
        let d = 0.02;
        let spec = synth_single_source_stft(&anechoic_rir(0.0, d), 16384, StftParams::half_overlap(256), 4).unwrap();
        let mut errs = Vec::new();
        for k in 1..spec.num_bins() - 1 {
            let expected = 2.0 * PI * spec.bin_freq(k) * d / 343.0;
            let cross: Complex = (0..spec.num_frames()).map(|n| spec.get(1, n, k) * spec.get(0, n, k).conj()).sum();
            errs.push(wrapped(cross.arg() - expected).abs());
        }
        let med = median(errs);
        assert!(med < 0.05, "median error {med}");
    }

    #[test]
    fn synthesis_is_deterministic() {
        let rir = anechoic_rir(45.0, 0.08);
        let a = synth_single_source_stft(&rir, 4096, StftParams::half_overlap(256), 9).unwrap();
        let b = synth_single_source_stft(&rir, 4096, StftParams::half_overlap(256), 9).unwrap();
        assert_eq!(a, b);
    }

    fn numbered(frames: usize, bins: usize, offset: f64) -> Spectrogram {
        let mut data = Vec::new();
        for m in 0..2 {
            for n in 0..frames {
                for k in 0..bins {
                    data.push(Complex::new(offset + n as f64, (m * 1000 + k) as f64));
                }
            }
        }
        Spectrogram::from_parts(data, 2, frames, StftParams::half_overlap(16), 16000).unwrap()
    }

    #[test]
    fn interleave_moves_channels_together() {
        let a = numbered(5, 9, 0.0);
        let b = numbered(7, 9, 100.0);
        let out = interleave_two_sources(&a, &b, 1).unwrap();
        assert_eq!(out.num_frames(), 12);
        for n in 0..12 {
            for k in 0..9 {
                assert_eq!(out.get(0, n, k).re, out.get(1, n, k).re);
                assert_eq!(out.get(1, n, k).im, (1000 + k) as f64);
            }
        }
    }

    #[test]
    fn interleave_balances_sources() {
        let perms = interleave_permutations(200, 257, 11);
        for n in 0..200 {
            let from_a = perms.iter().filter(|p| p[n] < 100).count() as f64 / 257.0;
            assert!((from_a - 0.5).abs() < 0.16, "frame {n}: {from_a}");
        }
        let mean: f64 =
            (0..200).map(|n| perms.iter().filter(|p| p[n] < 100).count() as f64 / 257.0).sum::<f64>() / 200.0;
        assert!((mean - 0.5).abs() < 0.05);
    }

    #[test]
    fn interleave_permutations_differ_across_bins() {
        let perms = interleave_permutations(100, 257, 2);
        let mut same = 0;
        let mut total = 0;
        for i in 0..perms.len() {
            for j in i + 1..perms.len() {
                total += 1;
                same += (perms[i] == perms[j]) as usize;
            }
        }
        assert!((same as f64) < 0.01 * total as f64);
    }

    #[test]
    fn interleave_rejects_mismatch() {
        let a = numbered(5, 9, 0.0);
        let b = numbered(5, 9, 0.0).select_channels(&[0]).unwrap();
        assert!(interleave_two_sources(&a, &b, 0).is_err());
    }

    #[test]
    fn phase_map_shape_and_values() {
        let spec = synth_single_source_stft(&anechoic_rir(30.0, 0.08), 4096, StftParams::half_overlap(256), 1).unwrap();
        let map = extract_phase_map(&spec, 3).unwrap();
        assert_eq!((map.mics(), map.bins()), (4, 129));
        assert!(extract_phase_map(&spec, spec.num_frames()).is_err());

        let real =
            Spectrogram::from_parts(vec![Complex::new(2.0, 0.0); 2 * 3 * 5], 2, 3, StftParams::half_overlap(8), 16000)
                .unwrap();
        assert!(extract_phase_map(&real, 1).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channel_rotation_shifts_row() {
        let mut spec =
            synth_single_source_stft(&anechoic_rir(70.0, 0.08), 4096, StftParams::half_overlap(256), 5).unwrap();
        let before = extract_phase_map(&spec, 2).unwrap();
        let alpha = 1.3;
        let rot = Complex::from_polar(1.0, alpha);
        spec.frame_mut(2, 2).iter_mut().for_each(|c| *c *= rot);
        let after = extract_phase_map(&spec, 2).unwrap();
        for k in 0..after.bins() {
            let d = wrapped(after.get(2, k) as f64 - before.get(2, k) as f64 - alpha);
            assert!(d.abs() < 1e-5);
            assert_eq!(after.get(0, k), before.get(0, k));
        }
    }
}
