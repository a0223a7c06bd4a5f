use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sources::{NoiseType, SourceBank, SourceKind};
use crate::acoustics::{RirBank, RirKey};
use crate::baselines::{music_frame, Band};
use crate::dataset::{extract_phase_map, spatialize, DoaGrid};
use crate::estimator::top_l_indices;
use crate::nnet::Network;
use crate::rng::derive_seed;
use crate::signal::{mix_at_snr, stft, StftParams};
use crate::{Error, Result};

/// Interval `[start_s, end_s)` during which `doas` are active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub doas: Vec<f64>,
}

/// 60° alone, then 105° joins, then 135°, then 135° alone: 1 s, 2 s, 2 s, 1 s.
pub fn default_schedule() -> Vec<Segment> {
    vec![
        Segment { start_s: 0.0, end_s: 1.0, doas: vec![60.0] },
        Segment { start_s: 1.0, end_s: 3.0, doas: vec![60.0, 105.0] },
        Segment { start_s: 3.0, end_s: 5.0, doas: vec![60.0, 105.0, 135.0] },
        Segment { start_s: 5.0, end_s: 6.0, doas: vec![135.0] },
    ]
}

fn default_noise() -> NoiseType {
    NoiseType::White
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicConfig {
    pub room: String,
    pub position: usize,
    pub distance: f64,
    pub segments: Vec<Segment>,
    pub snr_db: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseType,
    #[serde(default)]
    pub source: SourceKind,
    #[serde(default)]
    pub band: Band,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProfile {
    pub segment: usize,
    pub method: String,
    pub true_doas: Vec<f64>,
    /// Segment-averaged scores scaled to a maximum of 1.
    pub profile: Vec<f64>,
    /// The `|true_doas|` highest classes, ascending.
    pub top: Vec<f64>,
    pub frames: usize,
}

impl SegmentProfile {
    pub fn argmax(&self) -> usize {
        top_l_indices(&self.profile, 1)[0]
    }

    /// True DOAs present among the top classes.
    pub fn hits(&self) -> usize {
        self.true_doas.iter().filter(|d| self.top.iter().any(|t| (t - *d).abs() < 1e-9)).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicResult {
    pub classes: Vec<f64>,
    /// Per method, one score row per frame.
    pub traces: Vec<(String, Vec<Vec<f64>>)>,
    pub profiles: Vec<SegmentProfile>,
}

impl DynamicResult {
    /// CSV `frame,class_deg,probability,method`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("frame,class_deg,probability,method\n");
        for (method, rows) in &self.traces {
            for (n, row) in rows.iter().enumerate() {
                for (c, v) in self.classes.iter().zip(row) {
                    let _ = writeln!(s, "{n},{c},{v:.6},{method}");
                }
            }
        }
        s
    }

    /// Frame × class heatmap of one method's trace.
    pub fn svg_heatmap(&self, method: &str) -> Option<String> {
        let rows = &self.traces.iter().find(|(m, _)| m == method)?.1;
        let (cw, ch) = (2.0, 10.0);
        let w = rows.len() as f64 * cw;
        let h = self.classes.len() as f64 * ch;
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        for (n, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let level = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
                // class 0 at the bottom
                let y = (self.classes.len() - 1 - c) as f64 * ch;
                let _ = writeln!(
                    s,
                    "<rect x=\"{}\" y=\"{y}\" width=\"{cw}\" height=\"{ch}\" fill=\"rgb({level},{level},255)\"/>",
                    n as f64 * cw
                );
            }
        }
        s.push_str("</svg>\n");
        Some(s)
    }
}

fn validate(segments: &[Segment], grid: &DoaGrid) -> Result<()> {
    if segments.is_empty() {
        return Err(Error::invalid("empty schedule"));
    }
    for (i, s) in segments.iter().enumerate() {
        if !(s.start_s >= 0.0 && s.end_s > s.start_s) || s.doas.is_empty() {
            return Err(Error::invalid(format!("segment {i} is empty or reversed")));
        }
        for &d in &s.doas {
            grid.index_of(d)?;
        }
        if i > 0 && s.start_s < segments[i - 1].end_s {
            return Err(Error::invalid(format!("segment {i} overlaps segment {}", i - 1)));
        }
    }
    Ok(())
}

/// Simulates the schedule, then records per-frame network posteriors and
/// MUSIC pseudo-spectra plus per-segment averaged profiles.
pub fn dynamic_scenario(
    bank: &RirBank,
    config: &DynamicConfig,
    grid: &DoaGrid,
    params: StftParams,
    model: &Network<f32>,
) -> Result<DynamicResult> {
    validate(&config.segments, grid)?;
    let mut doas: Vec<f64> = config.segments.iter().flat_map(|s| s.doas.clone()).collect();
    doas.sort_by(f64::total_cmp);
    doas.dedup();
    let keys: Vec<RirKey> =
        doas.iter().map(|&a| RirKey::new(&config.room, config.position, config.distance, a)).collect();
    let missing = bank.missing(&keys);
    if !missing.is_empty() {
        return Err(Error::MissingRirs(missing));
    }
    let entries = keys.iter().map(|k| bank.require(k)).collect::<Result<Vec<_>>>()?;
    let geometry = &entries[0].meta.geometry;
    let fs = entries[0].rir.sample_rate();
    let fs_f = fs as f64;
    let total_s = config.segments.last().expect("validated").end_s;
    let len = (total_s * fs_f).round() as usize;
    let ramp = (0.01 * fs_f) as usize;
    let sources = SourceBank::load(&config.source)?;

    let mut mix: Option<crate::signal::MultichannelSignal> = None;
    for (j, (&doa, entry)) in doas.iter().zip(&entries).enumerate() {
        let mut sig = sources.signal(j, len, fs, derive_seed(config.seed, &[j as u64]))?;
        let active: Vec<bool> = (0..len)
            .map(|i| {
                let t = i as f64 / fs_f;
                config.segments.iter().any(|s| t >= s.start_s && t < s.end_s && s.doas.contains(&doa))
            })
            .collect();
        // smooth the gate with short ramps
        let mut gate: Vec<f64> = active.iter().map(|&a| a as u8 as f64).collect();
        if ramp > 0 {
            let mut acc = 0.0;
            let mut smoothed = vec![0.0; len];
            for i in 0..len {
                acc += gate[i];
                if i >= ramp {
                    acc -= gate[i - ramp];
                }
                smoothed[i] = acc / ramp as f64;
            }
            gate = smoothed;
        }
        sig.iter_mut().zip(&gate).for_each(|(s, g)| *s *= g);
        let spatial = spatialize(&sig, &entry.rir)?;
        match &mut mix {
            Some(m) => m.add(&spatial)?,
            None => mix = Some(spatial),
        }
    }
    let mix = mix.expect("at least one source");
    let noise = config.noise.generate(geometry, len, fs, derive_seed(config.seed, &[u64::MAX]))?;
    let noisy = mix_at_snr(&mix, &noise, config.snr_db)?;
    let spec = stft(&noisy, params)?;
    let frames = spec.num_frames();

    let active_count = |n: usize| -> usize {
        let centre = (n * params.hop + params.frame_len / 2) as f64 / fs_f;
        config.segments.iter().find(|s| centre >= s.start_s && centre < s.end_s).map_or(1, |s| s.doas.len())
    };
    let maps = (0..frames).map(|n| extract_phase_map(&spec, n)).collect::<Result<Vec<_>>>()?;
    let cnn: Vec<Vec<f64>> = model.predict_batch(&maps)?.into_iter().map(|p| p.probs().to_vec()).collect();
    let music: Vec<Vec<f64>> = (0..frames)
        .map(|n| {
            let l = active_count(n).min(spec.num_channels() - 1);
            music_frame(&spec, n, grid, geometry, l, config.band).map(|p| p.values().to_vec())
        })
        .collect::<Result<_>>()?;

    let traces = vec![("cnn".to_string(), cnn), ("music".to_string(), music)];
    let mut profiles = Vec::new();
    for (si, seg) in config.segments.iter().enumerate() {
        let lo = (seg.start_s * fs_f).ceil() as usize;
        let hi = (seg.end_s * fs_f).floor() as usize;
        let inside: Vec<usize> =
            (0..frames).filter(|&n| n * params.hop >= lo && n * params.hop + params.frame_len <= hi).collect();
        if inside.is_empty() {
            return Err(Error::invalid(format!("segment {si} is shorter than one frame")));
        }
        for (method, rows) in &traces {
            let mut avg = vec![0.0; grid.len()];
            for &n in &inside {
                avg.iter_mut().zip(&rows[n]).for_each(|(a, v)| *a += v);
            }
            let peak = avg.iter().cloned().fold(0.0, f64::max);
            if peak > 0.0 {
                avg.iter_mut().for_each(|a| *a /= peak);
            }
            let mut top: Vec<f64> = top_l_indices(&avg, seg.doas.len()).into_iter().map(|i| grid.angle(i)).collect();
            top.sort_by(f64::total_cmp);
            profiles.push(SegmentProfile {
                segment: si,
                method: method.clone(),
                true_doas: seg.doas.clone(),
                profile: avg,
                top,
                frames: inside.len(),
            });
        }
    }

    // Traces are reported per frame on a 0..1 scale.
    let traces = traces
        .into_iter()
        .map(|(m, rows)| {
            if m == "music" {
                let rows = rows
                    .into_iter()
                    .map(|r| {
                        let peak = r.iter().cloned().fold(0.0, f64::max);
                        r.into_iter().map(|v| if peak > 0.0 { v / peak } else { 0.0 }).collect()
                    })
                    .collect();
                (m, rows)
            } else {
                (m, rows)
            }
        })
        .collect();
    Ok(DynamicResult { classes: grid.angles().to_vec(), traces, profiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_doa_grid;

    #[test]
    fn schedule_validation() {
        let g = make_doa_grid(15.0).unwrap();
        assert!(validate(&default_schedule(), &g).is_ok());
        let mut overlap = default_schedule();
        overlap[1].start_s = 0.5;
        assert!(validate(&overlap, &g).is_err());
        let mut off = default_schedule();
        off[0].doas = vec![62.0];
        assert!(validate(&off, &g).is_err());
        assert!(validate(&[], &g).is_err());
    }
}
