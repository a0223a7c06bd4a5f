//! Source signals for test mixtures and the mixture synthesis itself.

use std::f64::consts::TAU;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::acoustics::{babble_like_noise, diffuse_noise, ArrayGeometry, Rir};
use crate::dataset::spatialize;
use crate::rng::{derive_seed, CounterRng};
use crate::signal::{mix_at_snr, read_wav, white_noise, MultichannelSignal};
use crate::{Error, Result};

/// Plane waves used for diffuse and babble noise in test mixtures.
pub const NOISE_PLANE_WAVES: usize = 128;

/// Speech-like test source: a sequence of 80–300 ms segments, each voiced
/// (harmonic complex with a gliding pitch), unvoiced (white noise) or silent,
/// joined with 10 ms raised-cosine ramps. Unit mean power over active
/// segments. The first segment is active and silences never follow each
/// other, so every 320 ms window holds some activity.
pub fn speech_like_bursts(len: usize, fs: u32, seed: u64) -> Vec<f64> {
    let fs_f = fs as f64;
    let mut rng = CounterRng::new(seed);
    let mut out = vec![0.0; len];
    let ramp = (0.01 * fs_f) as usize;
    let mut start = 0;
    let mut seg = 0u64;
    let mut silent = true;
    while start < len {
        let dur = ((rng.uniform_range(0.08, 0.3) * fs_f) as usize).max(2 * ramp + 1);
        let end = (start + dur).min(len);
        let kind = if silent { 0.8 * rng.uniform() } else { rng.uniform() };
        silent = kind >= 0.8;
        let mut seg_rng = CounterRng::new(derive_seed(seed, &[seg]));
        if kind < 0.6 {
            let f0 = seg_rng.uniform_range(90.0, 250.0);
            let glide = seg_rng.uniform_range(-0.2, 0.2);
            let harmonics = ((0.5 * fs_f) / (f0 * (1.0 + glide.abs()))).floor() as usize;
            let phases: Vec<f64> = (0..harmonics).map(|_| seg_rng.uniform_range(0.0, TAU)).collect();
            let norm: f64 = (1..=harmonics).map(|h| 1.0 / h as f64).sum::<f64>() / 2.0;
            let gain = 1.0 / norm.sqrt();
            let n = (end - start) as f64;
            let mut phase0 = 0.0;
            for (i, o) in out[start..end].iter_mut().enumerate() {
                let f = f0 * (1.0 + glide * i as f64 / n);
                phase0 += TAU * f / fs_f;
                *o = gain
                    * phases
                        .iter()
                        .enumerate()
                        .map(|(h, p)| ((h + 1) as f64 * phase0 + p).sin() / ((h + 1) as f64).sqrt())
                        .sum::<f64>();
            }
        } else if kind < 0.8 {
            out[start..end].iter_mut().for_each(|o| *o = seg_rng.normal());
        }
        let n = end - start;
        for i in 0..ramp.min(n / 2) {
            let w = 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / ramp as f64).cos());
            out[start + i] *= w;
            out[end - 1 - i] *= w;
        }
        start = end;
        seg += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum SourceKind {
    /// Synthetic speech-like bursts.
    #[default]
    Bursts,
    /// Mono WAV files; trial `i`, source `j` picks file `(i·L + j) mod n` and
    /// a seeded random excerpt.
    Wav { files: Vec<PathBuf> },
}

/// Loaded source material.
#[derive(Debug, Clone)]
pub enum SourceBank {
    Bursts,
    Wav(Vec<Vec<f64>>, u32),
}

impl SourceBank {
    pub fn load(kind: &SourceKind) -> Result<Self> {
        match kind {
            SourceKind::Bursts => Ok(Self::Bursts),
            SourceKind::Wav { files } => {
                if files.is_empty() {
                    return Err(Error::invalid("no source WAV files given"));
                }
                let mut fs = None;
                let mut clips = Vec::new();
                for f in files {
                    let sig = read_wav(f)?;
                    if *fs.get_or_insert(sig.sample_rate()) != sig.sample_rate() {
                        return Err(Error::invalid(format!("{} has a different sample rate", f.display())));
                    }
                    clips.push(sig.channel(0).to_vec());
                }
                Ok(Self::Wav(clips, fs.unwrap()))
            }
        }
    }

    /// Source signal `index` of `len` samples at `fs`.
    pub fn signal(&self, index: usize, len: usize, fs: u32, seed: u64) -> Result<Vec<f64>> {
        match self {
            Self::Bursts => Ok(speech_like_bursts(len, fs, seed)),
            Self::Wav(clips, rate) => {
                if *rate != fs {
                    return Err(Error::invalid(format!("source WAVs are {rate} Hz, RIRs are {fs} Hz")));
                }
                let clip = &clips[index % clips.len()];
                if clip.len() < len {
                    return Err(Error::InsufficientSamples { needed: len, got: clip.len() });
                }
                let offset = CounterRng::new(seed).below(clip.len() - len + 1);
                Ok(clip[offset..offset + len].to_vec())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseType {
    /// Spatially white sensor noise.
    White,
    Diffuse,
    Babble,
}

impl NoiseType {
    pub fn name(&self) -> &'static str {
        match self {
            Self::White => "white",
            Self::Diffuse => "diffuse",
            Self::Babble => "babble",
        }
    }

    pub fn generate(&self, geometry: &ArrayGeometry, len: usize, fs: u32, seed: u64) -> Result<MultichannelSignal> {
        match self {
            Self::White => Ok(white_noise(len, geometry.num_mics(), fs, seed)),
            Self::Diffuse => diffuse_noise(geometry, len, fs, NOISE_PLANE_WAVES, seed),
            Self::Babble => babble_like_noise(geometry, len, fs, NOISE_PLANE_WAVES, seed),
        }
    }
}

/// Sum of spatialized sources plus noise at `snr_db` relative to the summed
/// reverberant sources.
pub fn synth_mixture(
    rirs: &[&Rir],
    sources: &[Vec<f64>],
    geometry: &ArrayGeometry,
    noise: NoiseType,
    snr_db: f64,
    seed: u64,
) -> Result<MultichannelSignal> {
    if rirs.len() != sources.len() || rirs.is_empty() {
        return Err(Error::shape(format!("{} RIRs for {} sources", rirs.len(), sources.len())));
    }
    let mut mix: Option<MultichannelSignal> = None;
    for (rir, src) in rirs.iter().zip(sources) {
        let s = spatialize(src, rir)?;
        match &mut mix {
            Some(m) => m.add(&s)?,
            None => mix = Some(s),
        }
    }
    let mix = mix.expect("at least one source");
    let n = noise.generate(geometry, mix.len(), mix.sample_rate(), seed)?;
    mix_at_snr(&mix, &n, snr_db)
}
