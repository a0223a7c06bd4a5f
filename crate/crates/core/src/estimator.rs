//! Block-level decisions from frame posteriors: average, then keep the `L`
//! most probable classes.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataset::{extract_phase_map, DoaGrid};
use crate::nnet::{Network, Scalar};
use crate::signal::Spectrogram;
use crate::{Error, Result};

/// Per-class probabilities for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorVector {
    probs: Vec<f64>,
}

impl PosteriorVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty posterior vector"));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("posterior {p} outside [0, 1]")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        top_l_indices(&self.probs, 1)[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    pub averaged_probs: Vec<f64>,
    /// Selected DOAs in degrees, ascending.
    pub doas: Vec<f64>,
    pub num_sources: usize,
}

/// Elementwise mean over the block.
pub fn block_average(frames: &[PosteriorVector]) -> Result<Vec<f64>> {
    let first = frames.first().ok_or(Error::EmptyBlock)?;
    let mut sum = vec![0.0; first.len()];
    for f in frames {
        if f.len() != sum.len() {
            return Err(Error::shape("posterior lengths differ within the block"));
        }
        sum.iter_mut().zip(&f.probs).for_each(|(s, p)| *s += p);
    }
    let n = frames.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Indices of the `l` largest values, highest first; equal values go to the
/// lower index.
pub fn top_l_indices(values: &[f64], l: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(l);
    idx
}

pub fn select_top_l(avg: &[f64], l: usize, grid: &DoaGrid) -> Result<BlockEstimate> {
    if avg.len() != grid.len() {
        return Err(Error::shape(format!("{} scores for {} classes", avg.len(), grid.len())));
    }
    if l == 0 || l > grid.len() {
        return Err(Error::invalid(format!("cannot select {l} of {} classes", grid.len())));
    }
    let mut doas: Vec<f64> = top_l_indices(avg, l).into_iter().map(|i| grid.angle(i)).collect();
    doas.sort_by(f64::total_cmp);
    Ok(BlockEstimate { averaged_probs: avg.to_vec(), doas, num_sources: l })
}

/// Frame posteriors for a range of spectrogram frames.
pub fn frame_posteriors<T: Scalar>(
    model: &Network<T>,
    spec: &Spectrogram,
    frames: Range<usize>,
) -> Result<Vec<PosteriorVector>> {
    if frames.is_empty() || frames.end > spec.num_frames() {
        return Err(Error::invalid(format!("frame range {frames:?} invalid for {} frames", spec.num_frames())));
    }
    let maps = frames.map(|n| extract_phase_map(spec, n)).collect::<Result<Vec<_>>>()?;
    model.predict_batch(&maps)
}

pub fn estimate_block<T: Scalar>(
    model: &Network<T>,
    spec: &Spectrogram,
    frames: Range<usize>,
    l: usize,
    grid: &DoaGrid,
) -> Result<BlockEstimate> {
    if model.spec().classes != grid.len() {
        return Err(Error::shape("model classes do not match the grid"));
    }
    select_top_l(&block_average(&frame_posteriors(model, spec, frames)?)?, l, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_doa_grid;

    fn pv(v: &[f64]) -> PosteriorVector {
        PosteriorVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn averaging() {
        assert_eq!(block_average(&[pv(&[1.0, 0.0]), pv(&[0.0, 1.0])]).unwrap(), vec![0.5, 0.5]);
        let f = pv(&[0.2, 0.7, 0.1]);
        assert!((block_average(&vec![f.clone(); 7]).unwrap()[1] - 0.7).abs() < 1e-15);
        assert!(matches!(block_average(&[]), Err(Error::EmptyBlock)));
        assert!(block_average(&[pv(&[0.1]), pv(&[0.1, 0.2])]).is_err());
    }

    #[test]
    fn posterior_range() {
        assert!(PosteriorVector::new(vec![1.2]).is_err());
        assert!(PosteriorVector::new(vec![f64::NAN]).is_err());
        assert!(PosteriorVector::new(vec![]).is_err());
    }

    #[test]
    fn selection() {
        let g = make_doa_grid(5.0).unwrap();
        let mut avg = vec![0.0; 37];
        avg[12] = 1.0;
        assert_eq!(select_top_l(&avg, 1, &g).unwrap().doas, vec![60.0]);
        avg[21] = 0.8;
        avg[3] = 0.1;
        assert_eq!(select_top_l(&avg, 2, &g).unwrap().doas, vec![60.0, 105.0]);
        assert!(select_top_l(&avg, 38, &g).is_err());
        assert!(select_top_l(&avg, 0, &g).is_err());
    }

    #[test]
    fn ties_go_to_lower_index() {
        let g = make_doa_grid(15.0).unwrap();
        let mut avg = vec![0.1; 13];
        avg[3] = 0.9;
        avg[4] = 0.9;
        assert_eq!(select_top_l(&avg, 1, &g).unwrap().doas, vec![45.0]);
        assert_eq!(top_l_indices(&[0.5; 4], 2), vec![0, 1]);
    }
}
