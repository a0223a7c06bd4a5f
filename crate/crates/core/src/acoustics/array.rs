use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{dot, norm, sub, Point3, RoomConfig};
use crate::{Complex, Error, Result};

/// Microphone positions plus the reference axis that DOAs are measured from.
///
/// DOAs lie in the horizontal plane: 0° points along `axis`, 90° along
/// `z × axis` (broadside), 180° along `-axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    mic_positions: Vec<Point3>,
    axis: Point3,
}

impl ArrayGeometry {
    pub fn new(mic_positions: Vec<Point3>, axis: Point3) -> Result<Self> {
        if mic_positions.len() < 2 {
            return Err(Error::invalid("an array needs at least two microphones"));
        }
        let n = norm(axis);
        if !(n > 0.0) || axis[2].abs() > 1e-9 * n {
            return Err(Error::invalid("array axis must be a non-zero horizontal vector"));
        }
        Ok(Self { mic_positions, axis: [axis[0] / n, axis[1] / n, 0.0] })
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn mic_positions(&self) -> &[Point3] {
        &self.mic_positions
    }

    pub fn axis(&self) -> Point3 {
        self.axis
    }

    pub fn center(&self) -> Point3 {
        let m = self.num_mics() as f64;
        let mut c = [0.0; 3];
        for p in &self.mic_positions {
            (0..3).for_each(|i| c[i] += p[i] / m);
        }
        c
    }

    /// Largest distance between any two microphones.
    pub fn aperture(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.mic_positions.iter().enumerate() {
            for b in &self.mic_positions[i + 1..] {
                best = best.max(norm(sub(*a, *b)));
            }
        }
        best
    }

    /// Unit vector pointing from the array towards `doa_deg`.
    pub fn direction(&self, doa_deg: f64) -> Point3 {
        let (s, c) = doa_deg.to_radians().sin_cos();
        let a = self.axis;
        // z × axis
        let perp = [-a[1], a[0], 0.0];
        [c * a[0] + s * perp[0], c * a[1] + s * perp[1], 0.0]
    }

    /// Far-field arrival delay of each microphone relative to the centre, s.
    pub fn delays(&self, doa_deg: f64, c: f64) -> Vec<f64> {
        let u = self.direction(doa_deg);
        let center = self.center();
        self.mic_positions.iter().map(|p| -dot(sub(*p, center), u) / c).collect()
    }

    /// Sub-array made of the given microphones.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let pos = indices
            .iter()
            .map(|&i| {
                self.mic_positions.get(i).copied().ok_or_else(|| Error::invalid(format!("microphone {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pos, self.axis)
    }

    /// Indices of the `count` middle microphones.
    pub fn middle_indices(&self, count: usize) -> Result<Vec<usize>> {
        let m = self.num_mics();
        if count < 2 || count > m || !(m - count).is_multiple_of(2) {
            return Err(Error::invalid(format!("cannot take {count} middle microphones of {m}")));
        }
        let start = (m - count) / 2;
        Ok((start..start + count).collect())
    }

    /// Same array shape with its centre moved to `center`.
    pub fn translated_to(&self, center: Point3) -> Self {
        let c = self.center();
        let d = sub(center, c);
        Self {
            mic_positions: self.mic_positions.iter().map(|p| [p[0] + d[0], p[1] + d[1], p[2] + d[2]]).collect(),
            axis: self.axis,
        }
    }
}

/// Uniform linear array of `mics` microphones, symmetric about `center`.
pub fn ula(center: Point3, mics: usize, spacing: f64, axis: Point3) -> Result<ArrayGeometry> {
    if mics < 2 {
        return Err(Error::invalid("ULA needs at least two microphones"));
    }
    if !(spacing > 0.0) {
        return Err(Error::invalid("ULA spacing must be positive"));
    }
    let n = norm(axis);
    if !(n > 0.0) {
        return Err(Error::invalid("zero axis"));
    }
    let a = [axis[0] / n, axis[1] / n, axis[2] / n];
    let mid = (mics - 1) as f64 / 2.0;
    let positions = (0..mics)
        .map(|i| {
            let o = (i as f64 - mid) * spacing;
            [center[0] + o * a[0], center[1] + o * a[1], center[2] + o * a[2]]
        })
        .collect();
    ArrayGeometry::new(positions, a)
}

/// Far-field steering vector, element m = exp(-j 2π f τ_m).
pub fn steering_vector(geometry: &ArrayGeometry, doa_deg: f64, freq: f64, c: f64) -> Vec<Complex> {
    geometry.delays(doa_deg, c).into_iter().map(|tau| Complex::from_polar(1.0, -TAU * freq * tau)).collect()
}

/// A source at `doa` degrees and `distance` metres from the array centre, in
/// the array plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePlacement {
    pub doa: f64,
    pub distance: f64,
}

impl SourcePlacement {
    pub fn new(doa: f64, distance: f64) -> Result<Self> {
        if !(0.0..=180.0).contains(&doa) {
            return Err(Error::invalid(format!("DOA {doa} outside [0, 180]")));
        }
        if !(distance > 0.0) {
            return Err(Error::invalid("source distance must be positive"));
        }
        Ok(Self { doa, distance })
    }

    pub fn position(&self, geometry: &ArrayGeometry) -> Point3 {
        let c = geometry.center();
        let u = geometry.direction(self.doa);
        [c[0] + self.distance * u[0], c[1] + self.distance * u[1], c[2] + self.distance * u[2]]
    }

    /// Position, checked to lie strictly inside `room`.
    pub fn position_in(&self, geometry: &ArrayGeometry, room: &RoomConfig) -> Result<Point3> {
        let p = self.position(geometry);
        room.check_inside(p)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SPEED_OF_SOUND;

    const X: Point3 = [1.0, 0.0, 0.0];

    #[test]
    fn ula_aperture() {
        let g = ula([0.0; 3], 4, 0.08, X).unwrap();
        assert!((g.aperture() - 0.24).abs() < 1e-12);
        let g = ula([0.0; 3], 8, 0.02, X).unwrap();
        assert!((g.aperture() - 0.14).abs() < 1e-12);
    }

    #[test]
    fn ula_center_preserved() {
        let c = [2.0, 1.5, 1.2];
        let g = ula(c, 5, 0.03, [0.0, 2.0, 0.0]).unwrap();
        let got = g.center();
        for i in 0..3 {
            assert!((got[i] - c[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn ula_rejects_degenerate() {
        assert!(ula([0.0; 3], 1, 0.08, X).is_err());
        assert!(ula([0.0; 3], 4, 0.0, X).is_err());
    }

    #[test]
    fn broadside_is_all_ones() {
        let g = ula([0.0; 3], 4, 0.08, X).unwrap();
        for v in steering_vector(&g, 90.0, 3000.0, SPEED_OF_SOUND) {
            assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn endfire_adjacent_delay() {
        let g = ula([0.0; 3], 4, 0.08, X).unwrap();
        let d = g.delays(0.0, SPEED_OF_SOUND);
        for w in d.windows(2) {
            assert!(((w[0] - w[1]).abs() - 0.08 / 343.0).abs() < 1e-15);
        }
        // the microphone nearest the source (largest x) hears it first
        assert!(d[3] < d[0]);
    }

    #[test]
    fn zero_frequency_is_all_ones() {
        let g = ula([0.0; 3], 4, 0.08, X).unwrap();
        for doa in [0.0, 37.0, 180.0] {
            assert!(steering_vector(&g, doa, 0.0, SPEED_OF_SOUND)
                .iter()
                .all(|v| (v - Complex::new(1.0, 0.0)).norm() < 1e-15));
        }
    }

    #[test]
    fn mirror_doa_conjugates() {
        let g = ula([1.0, 2.0, 1.5], 4, 0.08, X).unwrap();
        for doa in [0.0, 20.0, 65.0, 110.0] {
            let a = steering_vector(&g, doa, 1700.0, SPEED_OF_SOUND);
            let b = steering_vector(&g, 180.0 - doa, 1700.0, SPEED_OF_SOUND);
            for (x, y) in a.iter().zip(&b) {
                assert!((x.conj() - y).norm() < 1e-12);
                assert!((x.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn middle_microphones() {
        let g = ula([0.0; 3], 8, 0.02, X).unwrap();
        assert_eq!(g.middle_indices(4).unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(g.middle_indices(6).unwrap(), vec![1, 2, 3, 4, 5, 6]);
        assert!(g.middle_indices(3).is_err());
        let sub = g.subset(&[2, 3, 4, 5]).unwrap();
        assert!((sub.aperture() - 0.06).abs() < 1e-12);
    }

    #[test]
    fn source_direction() {
        let g = ula([2.0, 2.0, 1.5], 4, 0.08, X).unwrap();
        let p = SourcePlacement::new(90.0, 1.0).unwrap().position(&g);
        assert!((p[0] - 2.0).abs() < 1e-12 && (p[1] - 3.0).abs() < 1e-12);
        let p = SourcePlacement::new(0.0, 1.0).unwrap().position(&g);
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[1] - 2.0).abs() < 1e-12);
        assert!(SourcePlacement::new(181.0, 1.0).is_err());
    }
}
