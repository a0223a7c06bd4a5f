use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{Condition, MetricsRow, TrialResult};
use super::sources::{synth_mixture, NoiseType, SourceBank, SourceKind};
use crate::acoustics::{ArrayGeometry, RirBank, RirKey};
use crate::baselines::{block_spectrum, Band, BaselineMethod, MUSIC_WINDOW};
use crate::dataset::DoaGrid;
use crate::estimator::{block_average, frame_posteriors, select_top_l};
use crate::nnet::Network;
use crate::rng::{derive_seed, CounterRng};
use crate::signal::{stft, Spectrogram, StftParams};
use crate::{Error, Result};

/// One block to localize.
pub struct TrialInput<'a> {
    pub spec: &'a Spectrogram,
    pub frames: Range<usize>,
    pub sources: usize,
    pub geometry: &'a ArrayGeometry,
    pub grid: &'a DoaGrid,
    /// Ground truth, for oracle methods only.
    pub true_doas: &'a [f64],
}

/// A localization method scored by the harness: one score per grid class for
/// a block, from which the top `L` classes are taken.
pub trait DoaMethod: Send + Sync {
    fn name(&self) -> String;
    fn block_scores(&self, input: &TrialInput) -> Result<Vec<f64>>;
}

pub struct CnnMethod {
    pub name: String,
    pub model: Network<f32>,
}

impl DoaMethod for CnnMethod {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn block_scores(&self, input: &TrialInput) -> Result<Vec<f64>> {
        block_average(&frame_posteriors(&self.model, input.spec, input.frames.clone())?)
    }
}

pub struct BaselineDoa {
    pub method: BaselineMethod,
    pub band: Band,
}

impl DoaMethod for BaselineDoa {
    fn name(&self) -> String {
        self.method.name().to_string()
    }

    fn block_scores(&self, input: &TrialInput) -> Result<Vec<f64>> {
        block_spectrum(
            self.method,
            input.spec,
            input.frames.clone(),
            input.sources,
            input.grid,
            input.geometry,
            self.band,
        )
    }
}

/// Returns the true DOAs; used to self-test the harness.
pub struct OracleMethod;

impl DoaMethod for OracleMethod {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn block_scores(&self, input: &TrialInput) -> Result<Vec<f64>> {
        let mut s = vec![0.0; input.grid.len()];
        for &d in input.true_doas {
            s[input.grid.index_of(d)?] = 1.0;
        }
        Ok(s)
    }
}

fn default_sources() -> usize {
    2
}
fn default_block() -> usize {
    50
}
fn default_signals() -> usize {
    1
}
fn default_noise() -> Vec<NoiseType> {
    vec![NoiseType::White]
}

/// Test design: every (room, SNR, noise type, distance) is one condition;
/// trials within it cover array positions × DOA combinations × signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rooms: Vec<String>,
    pub positions: usize,
    pub distances: Vec<f64>,
    pub snrs_db: Vec<f64>,
    #[serde(default = "default_noise")]
    pub noise_types: Vec<NoiseType>,
    /// Number of simultaneous sources `L`.
    #[serde(default = "default_sources")]
    pub sources: usize,
    pub min_separation: f64,
    /// Candidate DOAs; every grid class when absent.
    #[serde(default)]
    pub doas: Option<Vec<f64>>,
    /// Seeded subsample of DOA combinations per position.
    #[serde(default)]
    pub max_combinations: Option<usize>,
    #[serde(default = "default_signals")]
    pub signals_per_combination: usize,
    #[serde(default = "default_block")]
    pub block_frames: usize,
    /// Accuracy threshold in degrees.
    pub threshold_deg: f64,
    #[serde(default)]
    pub source: SourceKind,
    #[serde(default)]
    pub band: Band,
    pub seed: u64,
}

fn combinations(doas: &[f64], l: usize, min_sep: f64) -> Vec<Vec<f64>> {
    fn rec(doas: &[f64], l: usize, min_sep: f64, start: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == l {
            out.push(cur.clone());
            return;
        }
        for i in start..doas.len() {
            if cur.iter().all(|&c| (c - doas[i]).abs() >= min_sep - 1e-9) {
                cur.push(doas[i]);
                rec(doas, l, min_sep, i + 1, cur, out);
                cur.pop();
            }
        }
    }
    let mut sorted = doas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    rec(&sorted, l, min_sep, 0, &mut Vec::new(), &mut out);
    out
}

impl ExperimentConfig {
    /// DOA combinations used at one array position.
    pub fn combinations(&self, grid: &DoaGrid, position: usize) -> Vec<Vec<f64>> {
        let doas = self.doas.clone().unwrap_or_else(|| grid.angles().to_vec());
        let all = combinations(&doas, self.sources, self.min_separation);
        match self.max_combinations {
            Some(n) if n < all.len() => {
                let mut idx = CounterRng::new(derive_seed(self.seed, &[0xc0b, position as u64])).permutation(all.len());
                idx.truncate(n);
                idx.sort_unstable();
                idx.into_iter().map(|i| all[i].clone()).collect()
            }
            _ => all,
        }
    }

    /// Trials per condition row.
    pub fn trials_per_condition(&self, grid: &DoaGrid) -> usize {
        (0..self.positions).map(|p| self.combinations(grid, p).len()).sum::<usize>() * self.signals_per_combination
    }

    pub fn required_keys(&self, grid: &DoaGrid) -> Vec<RirKey> {
        let mut keys = Vec::new();
        for room in &self.rooms {
            for p in 0..self.positions {
                for &d in &self.distances {
                    let mut doas: Vec<f64> = self.combinations(grid, p).into_iter().flatten().collect();
                    doas.sort_by(f64::total_cmp);
                    doas.dedup();
                    keys.extend(doas.into_iter().map(|a| RirKey::new(room, p, d, a)));
                }
            }
        }
        keys
    }

    fn validate(&self, grid: &DoaGrid) -> Result<()> {
        if self.sources == 0 || self.block_frames == 0 || self.positions == 0 || self.signals_per_combination == 0 {
            return Err(Error::invalid("sources, positions, signals and block length must be positive"));
        }
        if self.rooms.is_empty() || self.distances.is_empty() || self.snrs_db.is_empty() || self.noise_types.is_empty()
        {
            return Err(Error::invalid("experiment has an empty condition axis"));
        }
        if let Some(d) = &self.doas {
            for &a in d {
                grid.index_of(a)?;
            }
        }
        if self.combinations(grid, 0).is_empty() {
            return Err(Error::invalid("no DOA combination satisfies the separation constraint"));
        }
        Ok(())
    }
}

/// Shared inputs of a trial's mixture.
pub(crate) struct MixtureTrial<'a> {
    pub rirs: Vec<&'a crate::acoustics::Rir>,
    pub geometry: &'a ArrayGeometry,
    pub noise: NoiseType,
    pub snr_db: f64,
    pub seed: u64,
}

/// Frames needed before a block so the reverberant onset has passed and the
/// MUSIC window is full.
pub(crate) fn lead_frames(rir_len: usize, params: StftParams) -> usize {
    rir_len.div_ceil(params.hop) + MUSIC_WINDOW
}

pub(crate) fn trial_spectrogram(
    trial: &MixtureTrial,
    sources: &SourceBank,
    params: StftParams,
    block_frames: usize,
    source_index: usize,
) -> Result<(Spectrogram, Range<usize>)> {
    let rir_len = trial.rirs.iter().map(|r| r.len()).max().unwrap_or(0);
    let lead = lead_frames(rir_len, params);
    let len = params.samples_for_frames(lead + block_frames);
    let fs = trial.rirs[0].sample_rate();
    let signals = (0..trial.rirs.len())
        .map(|j| sources.signal(source_index * trial.rirs.len() + j, len, fs, derive_seed(trial.seed, &[1, j as u64])))
        .collect::<Result<Vec<_>>>()?;
    let mix =
        synth_mixture(&trial.rirs, &signals, trial.geometry, trial.noise, trial.snr_db, derive_seed(trial.seed, &[2]))?;
    let spec = stft(&mix, params)?;
    Ok((spec, lead..lead + block_frames))
}

/// One simulated test block: the given sources at `doas` from one array
/// position, mixed with noise. Returns the spectrogram, the block's frame
/// range and the array geometry.
#[allow(clippy::too_many_arguments)]
pub fn simulated_block<'a>(
    bank: &'a RirBank,
    room: &str,
    position: usize,
    distance: f64,
    doas: &[f64],
    noise: NoiseType,
    snr_db: f64,
    source: &SourceKind,
    params: StftParams,
    block_frames: usize,
    seed: u64,
) -> Result<(Spectrogram, Range<usize>, &'a ArrayGeometry)> {
    if doas.is_empty() || block_frames == 0 {
        return Err(Error::invalid("a block needs at least one source and one frame"));
    }
    params.validate()?;
    let keys: Vec<RirKey> = doas.iter().map(|&a| RirKey::new(room, position, distance, a)).collect();
    let missing = bank.missing(&keys);
    if !missing.is_empty() {
        return Err(Error::MissingRirs(missing));
    }
    let rirs = keys.iter().map(|k| bank.require(k).map(|e| &e.rir)).collect::<Result<Vec<_>>>()?;
    let geometry = &bank.require(&keys[0])?.meta.geometry;
    let trial = MixtureTrial { rirs, geometry, noise, snr_db, seed };
    let (spec, frames) = trial_spectrogram(&trial, &SourceBank::load(source)?, params, block_frames, 0)?;
    Ok((spec, frames, geometry))
}

/// Runs every method on every trial and aggregates one row per method and
/// condition. Deterministic for a fixed config.
pub fn run_experiment(
    bank: &RirBank,
    config: &ExperimentConfig,
    grid: &DoaGrid,
    params: StftParams,
    methods: &[&dyn DoaMethod],
) -> Result<(Vec<MetricsRow>, Vec<TrialResult>)> {
    config.validate(grid)?;
    params.validate()?;
    let missing = bank.missing(&config.required_keys(grid));
    if !missing.is_empty() {
        return Err(Error::MissingRirs(missing));
    }
    let sources = SourceBank::load(&config.source)?;

    struct Job {
        cond: usize,
        room: String,
        position: usize,
        distance: f64,
        snr: f64,
        noise: NoiseType,
        doas: Vec<f64>,
        signal: usize,
        seed: u64,
    }
    let mut conditions = Vec::new();
    let mut jobs = Vec::new();
    for room in &config.rooms {
        let rt60 = bank.entries().find(|e| &e.meta.room.name == room).map(|e| e.meta.room.rt60).unwrap_or(f64::NAN);
        for &snr in &config.snrs_db {
            for &noise in &config.noise_types {
                for &distance in &config.distances {
                    let cond = conditions.len();
                    conditions.push(Condition {
                        room: room.clone(),
                        rt60_s: rt60,
                        snr_db: snr,
                        noise_type: noise.name().to_string(),
                        distance_m: distance,
                    });
                    for position in 0..config.positions {
                        for (ci, doas) in config.combinations(grid, position).into_iter().enumerate() {
                            for signal in 0..config.signals_per_combination {
                                // Same source material across conditions for a given position and combination.
                                let seed = derive_seed(config.seed, &[position as u64, ci as u64, signal as u64]);
                                jobs.push(Job {
                                    cond,
                                    room: room.clone(),
                                    position,
                                    distance,
                                    snr,
                                    noise,
                                    doas: doas.clone(),
                                    signal: ci * config.signals_per_combination + signal,
                                    seed,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    let results: Vec<Vec<TrialResult>> = jobs
        .par_iter()
        .map(|job| -> Result<Vec<TrialResult>> {
            let keys: Vec<RirKey> =
                job.doas.iter().map(|&a| RirKey::new(&job.room, job.position, job.distance, a)).collect();
            let rirs = keys.iter().map(|k| bank.require(k).map(|e| &e.rir)).collect::<Result<Vec<_>>>()?;
            let geometry = &bank.require(&keys[0])?.meta.geometry;
            let trial = MixtureTrial { rirs, geometry, noise: job.noise, snr_db: job.snr, seed: job.seed };
            let (spec, frames) = trial_spectrogram(&trial, &sources, params, config.block_frames, job.signal)?;
            let input =
                TrialInput { spec: &spec, frames, sources: config.sources, geometry, grid, true_doas: &job.doas };
            methods
                .iter()
                .map(|m| {
                    let est = select_top_l(&m.block_scores(&input)?, config.sources, grid)?;
                    Ok(TrialResult {
                        method: m.name(),
                        condition: conditions[job.cond].clone(),
                        true_doas: job.doas.clone(),
                        estimated_doas: est.doas,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut all = Vec::new();
    for (ci, _) in conditions.iter().enumerate() {
        for (mi, _) in methods.iter().enumerate() {
            let trials: Vec<TrialResult> =
                jobs.iter().zip(&results).filter(|(j, _)| j.cond == ci).map(|(_, r)| r[mi].clone()).collect();
            rows.push(MetricsRow::from_trials(&trials, config.threshold_deg)?);
        }
    }
    for r in results {
        all.extend(r);
    }
    Ok((rows, all))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_counts() {
        let doas: Vec<f64> = (0..13).map(|i| i as f64 * 15.0).collect();
        assert_eq!(combinations(&doas, 2, 30.0).len(), 66);
        assert_eq!(combinations(&doas, 2, 0.0).len(), 78);
        assert_eq!(combinations(&doas, 1, 30.0).len(), 13);
        for c in combinations(&doas, 3, 45.0) {
            assert!(c.windows(2).all(|w| w[1] - w[0] >= 45.0));
        }
    }
}
