//! `DSET` files: magic, `u32` version, `u32` M, `u32` K, `u32` I,
//! `u64` record count, `u64` seed, then per record M·K little-endian `f32`
//! phases (mic-major) followed by a `u64` label mask.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DatasetRecord, LabelVector, PhaseMap, MAX_CLASSES};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"DSET";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 8 + 8;

/// Phase maps and labels held contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    mics: usize,
    bins: usize,
    classes: usize,
    seed: u64,
    phases: Vec<f32>,
    labels: Vec<u64>,
}

impl Dataset {
    pub fn new(mics: usize, bins: usize, classes: usize, seed: u64) -> Result<Self> {
        if mics == 0 || bins == 0 {
            return Err(Error::invalid("dataset needs at least one mic and one bin"));
        }
        if classes == 0 || classes > MAX_CLASSES {
            return Err(Error::Unsupported(format!("{classes} classes; datasets hold 1 to {MAX_CLASSES}")));
        }
        Ok(Self { mics, bins, classes, seed, phases: Vec::new(), labels: Vec::new() })
    }

    pub(crate) fn from_raw(
        mics: usize,
        bins: usize,
        classes: usize,
        seed: u64,
        phases: Vec<f32>,
        labels: Vec<u64>,
    ) -> Result<Self> {
        let mut d = Self::new(mics, bins, classes, seed)?;
        if phases.len() != labels.len() * mics * bins {
            return Err(Error::shape("phase buffer does not match the label count"));
        }
        d.phases = phases;
        d.labels = labels;
        Ok(d)
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, record: &DatasetRecord) -> Result<()> {
        let map = &record.phase_map;
        if map.mics() != self.mics || map.bins() != self.bins || record.label.classes() != self.classes {
            return Err(Error::shape("record does not match the dataset shape"));
        }
        self.phases.extend_from_slice(map.values());
        self.labels.push(record.label.mask());
        Ok(())
    }

    pub fn record_phases(&self, index: usize) -> &[f32] {
        let n = self.mics * self.bins;
        &self.phases[index * n..(index + 1) * n]
    }

    pub fn label(&self, index: usize) -> u64 {
        self.labels[index]
    }

    pub fn record(&self, index: usize) -> Result<DatasetRecord> {
        Ok(DatasetRecord {
            phase_map: PhaseMap::new(self.mics, self.bins, self.record_phases(index).to_vec())?,
            label: LabelVector::new(self.classes, self.labels[index])?,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [VERSION, self.mics as u32, self.bins as u32, self.classes as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        let mut buf = Vec::with_capacity(4 * self.mics * self.bins + 8);
        for i in 0..self.len() {
            buf.clear();
            self.record_phases(i).iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
            buf.extend_from_slice(&self.labels[i].to_le_bytes());
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        read_exact(&mut r, &mut header, "header")?;
        if &header[..4] != MAGIC {
            return Err(Error::Format("not a DSET dataset file".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        if word(0) != VERSION {
            return Err(Error::Format(format!("dataset version {}, expected {VERSION}", word(0))));
        }
        let (mics, bins, classes) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let count = u64::from_le_bytes(header[20..28].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(header[28..36].try_into().unwrap());
        let mut data = Self::new(mics, bins, classes, seed)?;
        let per = mics * bins;
        data.phases.reserve_exact(count.saturating_mul(per).min(1 << 28));
        let mut buf = vec![0u8; 4 * per + 8];
        for i in 0..count {
            read_exact(&mut r, &mut buf, &format!("record {i}"))?;
            let (phases, label) = buf.split_at(4 * per);
            data.phases.extend(phases.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
            let mask = u64::from_le_bytes(label.try_into().unwrap());
            LabelVector::new(classes, mask)?;
            data.labels.push(mask);
        }
        if r.read(&mut [0u8])? != 0 {
            return Err(Error::Format("trailing bytes after the last record".into()));
        }
        Ok(data)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("dataset truncated in {what}")),
        _ => Error::Io(e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let mut d = Dataset::new(2, 3, 5, 42).unwrap();
        for i in 0..4 {
            let vals = (0..6).map(|j| (i * 6 + j) as f32 * 0.1 - 1.0).collect();
            let rec = DatasetRecord {
                phase_map: PhaseMap::new(2, 3, vals).unwrap(),
                label: LabelVector::new(5, 0b10001 >> (i % 2)).unwrap(),
            };
            d.push(&rec).unwrap();
        }
        d
    }

    #[test]
    fn round_trip() {
        let d = sample();
        let mut bytes = Vec::new();
        d.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4 * (6 * 4 + 8));
        let back = Dataset::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.record(1).unwrap().label.mask(), 0b1000);
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = Vec::new();
        sample().write_to(&mut bytes).unwrap();
        for cut in [0, 10, HEADER_LEN, bytes.len() - 1] {
            assert!(Dataset::read_from(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Dataset::read_from(extra.as_slice()).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(Dataset::read_from(magic.as_slice()).is_err());
    }

    #[test]
    fn push_checks_shape() {
        let mut d = Dataset::new(2, 3, 5, 0).unwrap();
        let rec = DatasetRecord {
            phase_map: PhaseMap::new(3, 2, vec![0.0; 6]).unwrap(),
            label: LabelVector::new(5, 1).unwrap(),
        };
        assert!(d.push(&rec).is_err());
    }
}
