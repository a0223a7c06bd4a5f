use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{make_labels, synth_single_source_signal, wrap_phase, Dataset, DoaGrid};
use crate::acoustics::{RirBank, RirKey};
use crate::rng::{derive_seed, CounterRng};
use crate::signal::{mix_at_snr, stft, white_noise, StftParams};
use crate::{Error, Result};

/// Multi-condition training configuration. Every combination of room, array
/// position, distance and DOA pair becomes one interleaved signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingPlan {
    /// Room names as stored in the RIR bank.
    pub rooms: Vec<String>,
    /// Array positions `0..positions` per room.
    pub positions: usize,
    pub distances: Vec<f64>,
    /// Training DOAs; every grid class when absent.
    #[serde(default)]
    pub doas: Option<Vec<f64>>,
    /// Minimum angular distance between the two sources, degrees.
    pub min_separation: f64,
    /// Sensor-noise SNR range in dB, drawn uniformly once per signal.
    pub snr_range_db: [f64; 2],
    /// STFT frames per single-source signal.
    pub frames_per_source: usize,
}

#[derive(Debug, Clone)]
struct Tuple {
    room: String,
    position: usize,
    distance: f64,
    doas: [f64; 2],
}

impl TrainingPlan {
    fn doas(&self, grid: &DoaGrid) -> Vec<f64> {
        self.doas.clone().unwrap_or_else(|| grid.angles().to_vec())
    }

    /// Unordered DOA pairs at least `min_separation` apart, ascending.
    pub fn pairs(&self, grid: &DoaGrid) -> Vec<[f64; 2]> {
        let doas = self.doas(grid);
        let mut out = Vec::new();
        for (i, &a) in doas.iter().enumerate() {
            for &b in &doas[i + 1..] {
                if (a - b).abs() >= self.min_separation - 1e-9 {
                    out.push(if a < b { [a, b] } else { [b, a] });
                }
            }
        }
        out
    }

    fn tuples(&self, grid: &DoaGrid) -> Vec<Tuple> {
        let pairs = self.pairs(grid);
        let mut out = Vec::new();
        for room in &self.rooms {
            for position in 0..self.positions {
                for &distance in &self.distances {
                    for &doas in &pairs {
                        out.push(Tuple { room: room.clone(), position, distance, doas });
                    }
                }
            }
        }
        out
    }

    /// Records produced: two sources per tuple, `frames_per_source` each.
    pub fn record_count(&self, grid: &DoaGrid) -> usize {
        self.tuples(grid).len() * 2 * self.frames_per_source
    }

    /// Every bank entry the plan reads.
    pub fn required_keys(&self, grid: &DoaGrid) -> Vec<RirKey> {
        let doas = self.doas(grid);
        let mut keys = Vec::new();
        for room in &self.rooms {
            for position in 0..self.positions {
                for &d in &self.distances {
                    keys.extend(doas.iter().map(|&a| RirKey::new(room, position, d, a)));
                }
            }
        }
        keys
    }

    fn validate(&self, grid: &DoaGrid) -> Result<()> {
        let [lo, hi] = self.snr_range_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("bad SNR range [{lo}, {hi}]")));
        }
        if self.frames_per_source == 0 {
            return Err(Error::invalid("frames_per_source must be positive"));
        }
        for &a in &self.doas(grid) {
            grid.index_of(a)?;
        }
        if self.pairs(grid).is_empty() {
            return Err(Error::invalid("no DOA pair satisfies the minimum separation"));
        }
        Ok(())
    }
}

/// Builds the interleaved two-source training set from a RIR bank. The
/// output is globally shuffled and identical for identical inputs.
pub fn build_training_set(
    bank: &RirBank,
    plan: &TrainingPlan,
    grid: &DoaGrid,
    params: StftParams,
    seed: u64,
) -> Result<Dataset> {
    params.validate()?;
    plan.validate(grid)?;
    let missing = bank.missing(&plan.required_keys(grid));
    if !missing.is_empty() {
        return Err(Error::MissingRirs(missing));
    }
    let first = bank.require(&plan.required_keys(grid)[0])?;
    let mics = first.rir.num_mics();
    let bins = params.num_bins();
    let frames = plan.frames_per_source;
    let noise_len = params.samples_for_frames(frames);

    let tuples = plan.tuples(grid);
    let chunks = tuples
        .par_iter()
        .enumerate()
        .map(|(t, tuple)| -> Result<(Vec<f32>, u64)> {
            let mut specs = Vec::with_capacity(2);
            for (s, &doa) in tuple.doas.iter().enumerate() {
                let key = RirKey::new(&tuple.room, tuple.position, tuple.distance, doa);
                let rir = &bank.require(&key)?.rir;
                if rir.num_mics() != mics {
                    return Err(Error::shape(format!("{key} has {} mics, expected {mics}", rir.num_mics())));
                }
                let signal_seed = derive_seed(seed, &[t as u64, s as u64]);
                let clean = synth_single_source_signal(rir, noise_len, derive_seed(signal_seed, &[0]))?;
                let [lo, hi] = plan.snr_range_db;
                let snr = CounterRng::new(derive_seed(signal_seed, &[1])).uniform_range(lo, hi);
                let noise = white_noise(noise_len, mics, rir.sample_rate(), derive_seed(signal_seed, &[2]));
                let noisy = mix_at_snr(&clean, &noise, snr)?;
                let spec = stft(&noisy, params)?;
                specs.push(spec.frames_range(0, frames)?);
            }
            let mixed = super::interleave_two_sources(&specs[0], &specs[1], derive_seed(seed, &[t as u64, 2]))?;
            let mut phases = Vec::with_capacity(2 * frames * mics * bins);
            for n in 0..mixed.num_frames() {
                for m in 0..mics {
                    phases.extend(mixed.frame(m, n).iter().map(|c| wrap_phase(c.arg())));
                }
            }
            Ok((phases, make_labels(&tuple.doas, grid)?.mask()))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_tuple = 2 * frames;
    let per_record = mics * bins;
    let total = chunks.len() * per_tuple;
    let order = CounterRng::new(derive_seed(seed, &[u64::MAX])).permutation(total);
    let mut phases = Vec::with_capacity(total * per_record);
    let mut labels = Vec::with_capacity(total);
    for src in order {
        let (chunk, mask) = &chunks[src / per_tuple];
        let off = (src % per_tuple) * per_record;
        phases.extend_from_slice(&chunk[off..off + per_record]);
        labels.push(*mask);
    }
    Dataset::from_raw(mics, bins, grid.len(), seed, phases, labels)
}
