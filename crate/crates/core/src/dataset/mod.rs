//! Training data: DOA grids, phase maps, multi-hot labels, two-source
//! interleaving and the binary dataset container.

mod build;
mod store;
mod synth;

use std::f32::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use build::{build_training_set, TrainingPlan};
pub use store::Dataset;
pub use synth::{
    extract_phase_map, interleave_permutations, interleave_two_sources, phase_maps, spatialize,
    synth_single_source_signal, synth_single_source_stft,
};

/// Largest class count a `u64` label mask can hold.
pub const MAX_CLASSES: usize = 64;

/// Uniform DOA classes `0, res, 2·res, …, 180` in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaGrid {
    resolution: f64,
    classes: Vec<f64>,
}

pub fn make_doa_grid(resolution: f64) -> Result<DoaGrid> {
    DoaGrid::new(resolution)
}

impl DoaGrid {
    pub fn new(resolution: f64) -> Result<Self> {
        let steps = 180.0 / resolution;
        if !(resolution > 0.0 && resolution <= 180.0) || (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!("resolution {resolution}° does not divide 180°")));
        }
        let steps = steps.round() as usize;
        let classes = (0..=steps).map(|i| i as f64 * resolution).collect();
        Ok(Self { resolution, classes })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.classes
    }

    pub fn angle(&self, index: usize) -> f64 {
        self.classes[index]
    }

    /// Class index of an on-grid DOA.
    pub fn index_of(&self, doa: f64) -> Result<usize> {
        let pos = doa / self.resolution;
        let idx = pos.round();
        if !doa.is_finite() || (pos - idx).abs() > 1e-6 || idx < 0.0 || idx as usize >= self.len() {
            return Err(Error::OffGrid(doa));
        }
        Ok(idx as usize)
    }

    /// Class index closest to any DOA in [0°, 180°].
    pub fn nearest_index(&self, doa: f64) -> usize {
        ((doa / self.resolution).round().max(0.0) as usize).min(self.len() - 1)
    }
}

/// STFT phases of one frame, `mics × bins`, mic-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    mics: usize,
    bins: usize,
    values: Vec<f32>,
}

/// Wraps a phase into (−π, π] at `f32` precision.
pub(crate) fn wrap_phase(phase: f64) -> f32 {
    let v = phase as f32;
    if v <= -PI {
        PI
    } else {
        v
    }
}

impl PhaseMap {
    pub fn new(mics: usize, bins: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != mics * bins || mics == 0 || bins == 0 {
            return Err(Error::shape(format!("{} values for a {mics}x{bins} phase map", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(**v > -PI && **v <= PI)) {
            return Err(Error::invalid(format!("phase {v} outside (-pi, pi]")));
        }
        Ok(Self { mics, bins, values })
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, m: usize, k: usize) -> f32 {
        self.values[m * self.bins + k]
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

/// Multi-hot DOA label stored as a bitmask over at most 64 classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelVector {
    classes: usize,
    mask: u64,
}

impl LabelVector {
    pub fn new(classes: usize, mask: u64) -> Result<Self> {
        if classes == 0 || classes > MAX_CLASSES {
            return Err(Error::Unsupported(format!("{classes} classes; labels hold 1 to {MAX_CLASSES}")));
        }
        if classes < MAX_CLASSES && mask >> classes != 0 {
            return Err(Error::invalid(format!("label mask {mask:#x} exceeds {classes} classes")));
        }
        Ok(Self { classes, mask })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.classes && self.mask >> index & 1 == 1
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.classes).filter(|&i| self.contains(i)).collect()
    }

    pub fn to_targets(&self) -> Vec<f32> {
        (0..self.classes).map(|i| if self.contains(i) { 1.0 } else { 0.0 }).collect()
    }
}

/// Sets one bit per DOA. Every DOA must lie on the grid and appear once.
pub fn make_labels(doas: &[f64], grid: &DoaGrid) -> Result<LabelVector> {
    let mut mask = 0u64;
    for &doa in doas {
        let bit = 1u64 << grid.index_of(doa)?;
        if mask & bit != 0 {
            return Err(Error::DuplicateDoa(doa));
        }
        mask |= bit;
    }
    LabelVector::new(grid.len(), mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub phase_map: PhaseMap,
    pub label: LabelVector,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(make_doa_grid(5.0).unwrap().len(), 37);
        assert_eq!(make_doa_grid(15.0).unwrap().len(), 13);
        assert_eq!(make_doa_grid(90.0).unwrap().angles(), &[0.0, 90.0, 180.0]);
        assert!(make_doa_grid(7.0).is_err());
        assert!(make_doa_grid(0.0).is_err());
        assert!(make_doa_grid(-5.0).is_err());
    }

    #[test]
    fn grid_indexing() {
        let g = make_doa_grid(5.0).unwrap();
        assert_eq!(g.index_of(60.0).unwrap(), 12);
        assert_eq!(g.index_of(180.0).unwrap(), 36);
        assert!(matches!(g.index_of(62.0), Err(Error::OffGrid(_))));
        assert!(g.index_of(185.0).is_err());
        assert_eq!(g.nearest_index(62.0), 12);
        assert_eq!(g.nearest_index(63.0), 13);
        assert_eq!(g.nearest_index(-3.0), 0);
    }

    #[test]
    fn labels() {
        let g = make_doa_grid(5.0).unwrap();
        let l = make_labels(&[60.0, 105.0], &g).unwrap();
        assert_eq!(l.indices(), vec![12, 21]);
        assert_eq!(l.count(), 2);
        assert_eq!(make_labels(&[0.0], &g).unwrap().mask(), 1);
        assert!(matches!(make_labels(&[0.0, 0.0], &g), Err(Error::DuplicateDoa(_))));
        assert!(make_labels(&[61.0], &g).is_err());
        let t = l.to_targets();
        assert_eq!(t.iter().sum::<f32>(), 2.0);
        assert_eq!(t[12], 1.0);
    }

    #[test]
    fn label_limits() {
        assert!(LabelVector::new(65, 1).is_err());
        assert!(LabelVector::new(3, 0b1000).is_err());
        assert!(LabelVector::new(64, u64::MAX).is_ok());
        assert!(make_labels(&[1.0], &make_doa_grid(1.0).unwrap()).is_err());
    }

    #[test]
    fn phase_wrap() {
        assert_eq!(wrap_phase(-std::f64::consts::PI), PI);
        assert_eq!(wrap_phase(std::f64::consts::PI), PI);
        assert_eq!(wrap_phase(0.5), 0.5);
        assert!(PhaseMap::new(1, 2, vec![0.0, -PI]).is_err());
        assert!(PhaseMap::new(1, 2, vec![0.0, f32::NAN]).is_err());
        assert!(PhaseMap::new(2, 2, vec![0.0; 3]).is_err());
    }
}
