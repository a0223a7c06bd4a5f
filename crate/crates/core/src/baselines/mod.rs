//! SRP-PHAT and broadband MUSIC on the same DOA grid and block rule as the
//! network.

mod linalg;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::acoustics::ArrayGeometry;
use crate::dataset::DoaGrid;
use crate::estimator::{select_top_l, BlockEstimate};
use crate::signal::Spectrogram;
use crate::{Complex, Error, Result, SPEED_OF_SOUND};

pub use linalg::{hermitian_eig, ComplexMatrix, Eigen};

/// Frames in the MUSIC correlation window (current plus preceding ones).
pub const MUSIC_WINDOW: usize = 10;
/// Diagonal loading relative to `trace(R) / M`.
pub const DIAGONAL_LOADING: f64 = 1e-9;

/// Analysis band in Hz. DC and Nyquist bins are always excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Default for Band {
    fn default() -> Self {
        Self { low_hz: 100.0, high_hz: 8000.0 }
    }
}

impl Band {
    pub fn bins(&self, spec: &Spectrogram) -> Result<Vec<usize>> {
        let bins: Vec<usize> = (1..spec.num_bins().saturating_sub(1))
            .filter(|&k| {
                let f = spec.bin_freq(k);
                f >= self.low_hz && f <= self.high_hz
            })
            .collect();
        if bins.is_empty() {
            return Err(Error::invalid(format!("no STFT bins between {} and {} Hz", self.low_hz, self.high_hz)));
        }
        Ok(bins)
    }
}

/// Non-negative score per grid DOA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSpectrum {
    values: Vec<f64>,
}

impl PseudoSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("pseudo-spectrum value {v}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-subband spatial correlation matrices over a frame window.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCorrelation {
    pub bins: Vec<usize>,
    pub matrices: Vec<ComplexMatrix>,
}

impl SpatialCorrelation {
    /// Mean of `y yᴴ` over `frames` for each bin in the band.
    pub fn estimate(spec: &Spectrogram, frames: Range<usize>, band: Band) -> Result<Self> {
        if frames.is_empty() || frames.end > spec.num_frames() {
            return Err(Error::invalid(format!("frame window {frames:?} outside the spectrogram")));
        }
        let bins = band.bins(spec)?;
        let w = 1.0 / frames.len() as f64;
        let matrices = bins
            .iter()
            .map(|&k| {
                let mut r = ComplexMatrix::zeros(spec.num_channels());
                for n in frames.clone() {
                    r.add_outer(&spec.column(n, k), w);
                }
                r
            })
            .collect();
        Ok(Self { bins, matrices })
    }
}

fn check_inputs(spec: &Spectrogram, geometry: &ArrayGeometry) -> Result<()> {
    if spec.num_channels() < 2 {
        return Err(Error::invalid("at least two microphones are required"));
    }
    if geometry.num_mics() != spec.num_channels() {
        return Err(Error::shape(format!(
            "{} mics in the geometry, {} channels in the spectrogram",
            geometry.num_mics(),
            spec.num_channels()
        )));
    }
    Ok(())
}

/// Relative delays per grid DOA.
fn grid_delays(grid: &DoaGrid, geometry: &ArrayGeometry) -> Vec<Vec<f64>> {
    grid.angles().iter().map(|&a| geometry.delays(a, SPEED_OF_SOUND)).collect()
}

fn steering(delays: &[f64], freq: f64) -> Vec<Complex> {
    delays.iter().map(|&t| Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * freq * t)).collect()
}

/// Steered response power with phase-transform weighting for one frame.
pub fn srp_phat_frame(
    spec: &Spectrogram,
    frame: usize,
    grid: &DoaGrid,
    geometry: &ArrayGeometry,
    band: Band,
) -> Result<PseudoSpectrum> {
    check_inputs(spec, geometry)?;
    if frame >= spec.num_frames() {
        return Err(Error::invalid(format!("frame {frame} out of range")));
    }
    let bins = band.bins(spec)?;
    let m = spec.num_channels();
    // PHAT-weighted cross spectra, skipping zero-magnitude products.
    let mut cross = Vec::with_capacity(bins.len() * m * (m - 1) / 2);
    for &k in &bins {
        let col = spec.column(frame, k);
        for p in 0..m {
            for q in p + 1..m {
                let x = col[p] * col[q].conj();
                let mag = x.norm();
                cross.push(if mag > 0.0 { x / mag } else { Complex::new(0.0, 0.0) });
            }
        }
    }
    let values = grid_delays(grid, geometry)
        .iter()
        .map(|tau| {
            let mut sum = 0.0;
            let mut idx = 0;
            for &k in &bins {
                let a = steering(tau, spec.bin_freq(k));
                for p in 0..m {
                    for q in p + 1..m {
                        // a_p a_q* removes the model phase of Y_p Y_q*.
                        sum += (cross[idx] * (a[p] * a[q].conj()).conj()).re;
                        idx += 1;
                    }
                }
            }
            sum.max(0.0)
        })
        .collect();
    PseudoSpectrum::new(values)
}

/// Broadband MUSIC pseudo-spectrum from a precomputed correlation.
pub fn music_spectrum(
    corr: &SpatialCorrelation,
    spec: &Spectrogram,
    grid: &DoaGrid,
    geometry: &ArrayGeometry,
    sources: usize,
) -> Result<PseudoSpectrum> {
    check_inputs(spec, geometry)?;
    let m = spec.num_channels();
    if sources >= m {
        return Err(Error::NoiseSubspaceEmpty { sources, mics: m });
    }
    let delays = grid_delays(grid, geometry);
    let mut values = vec![0.0; grid.len()];
    for (&k, r) in corr.bins.iter().zip(&corr.matrices) {
        let mut r = r.clone();
        let load = DIAGONAL_LOADING * r.trace().re / m as f64;
        (0..m).for_each(|i| r.set(i, i, r.get(i, i) + load));
        let eig = hermitian_eig(&r)?;
        let noise = m - sources;
        let f = spec.bin_freq(k);
        for (v, tau) in values.iter_mut().zip(&delays) {
            let a = steering(tau, f);
            let proj: f64 = (0..noise)
                .map(|j| (0..m).map(|i| eig.vectors.get(i, j).conj() * a[i]).sum::<Complex>().norm_sqr())
                .sum();
            *v += 1.0 / proj.max(1e-300);
        }
    }
    let nb = corr.bins.len() as f64;
    values.iter_mut().for_each(|v| *v /= nb);
    PseudoSpectrum::new(values)
}

/// MUSIC for one frame, with the correlation averaged over that frame and up
/// to `MUSIC_WINDOW - 1` preceding frames.
pub fn music_frame(
    spec: &Spectrogram,
    frame: usize,
    grid: &DoaGrid,
    geometry: &ArrayGeometry,
    sources: usize,
    band: Band,
) -> Result<PseudoSpectrum> {
    check_inputs(spec, geometry)?;
    if frame >= spec.num_frames() {
        return Err(Error::invalid(format!("frame {frame} out of range")));
    }
    let start = (frame + 1).saturating_sub(MUSIC_WINDOW);
    let corr = SpatialCorrelation::estimate(spec, start..frame + 1, band)?;
    music_spectrum(&corr, spec, grid, geometry, sources)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    SrpPhat,
    Music,
}

impl BaselineMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SrpPhat => "srp-phat",
            Self::Music => "music",
        }
    }

    pub fn frame_spectrum(
        &self,
        spec: &Spectrogram,
        frame: usize,
        grid: &DoaGrid,
        geometry: &ArrayGeometry,
        sources: usize,
        band: Band,
    ) -> Result<PseudoSpectrum> {
        match self {
            Self::SrpPhat => srp_phat_frame(spec, frame, grid, geometry, band),
            Self::Music => music_frame(spec, frame, grid, geometry, sources, band),
        }
    }
}

/// Mean of per-frame pseudo-spectra over a block.
pub fn block_spectrum(
    method: BaselineMethod,
    spec: &Spectrogram,
    frames: Range<usize>,
    sources: usize,
    grid: &DoaGrid,
    geometry: &ArrayGeometry,
    band: Band,
) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Err(Error::EmptyBlock);
    }
    let n = frames.len() as f64;
    let mut sum = vec![0.0; grid.len()];
    for f in frames {
        let s = method.frame_spectrum(spec, f, grid, geometry, sources, band)?;
        sum.iter_mut().zip(s.values()).for_each(|(a, b)| *a += b);
    }
    sum.iter_mut().for_each(|v| *v /= n);
    Ok(sum)
}

/// Block decision: averaged pseudo-spectrum, then the estimator's top-L rule.
pub fn baseline_block(
    method: BaselineMethod,
    spec: &Spectrogram,
    frames: Range<usize>,
    sources: usize,
    grid: &DoaGrid,
    geometry: &ArrayGeometry,
    band: Band,
) -> Result<BlockEstimate> {
    let avg = block_spectrum(method, spec, frames, sources, grid, geometry, band)?;
    select_top_l(&avg, sources, grid)
}
