//! Collections of simulated (or measured) RIRs keyed by acoustic condition,
//! with a binary on-disk format.
//!
//! Each RIR is stored as `<name>.drir`: the magic `DRIR`, then little-endian
//! `u32` version, microphone count, sample rate and tap count, then `f32`
//! taps row-major by microphone. A JSON sidecar `<name>.json` carries the
//! geometry and condition, and `index.json` lists every entry. Index entries
//! may instead point at multichannel WAV files holding measured responses.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{image_method_rir, ula, ArrayGeometry, Point3, Rir, RoomConfig, SourcePlacement};
use crate::rng::{derive_seed, CounterRng};
use crate::{Error, Result};

const DRIR_MAGIC: &[u8; 4] = b"DRIR";
const DRIR_VERSION: u32 = 1;
const WALL_MARGIN: f64 = 0.3;

/// Identifies one RIR set: room, array position, source distance and DOA.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RirKey {
    pub room: String,
    pub position: usize,
    pub distance_mm: u32,
    pub doa_cdeg: u32,
}

impl RirKey {
    pub fn new(room: &str, position: usize, distance_m: f64, doa_deg: f64) -> Self {
        Self {
            room: room.to_string(),
            position,
            distance_mm: (distance_m * 1000.0).round() as u32,
            doa_cdeg: (doa_deg * 100.0).round() as u32,
        }
    }

    pub fn distance(&self) -> f64 {
        self.distance_mm as f64 / 1000.0
    }

    pub fn doa(&self) -> f64 {
        self.doa_cdeg as f64 / 100.0
    }

    pub fn file_stem(&self) -> String {
        format!("{}_p{}_d{}mm_a{}cdeg", self.room, self.position, self.distance_mm, self.doa_cdeg)
    }
}

impl std::fmt::Display for RirKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(room {}, position {}, {} m, {}°)", self.room, self.position, self.distance(), self.doa())
    }
}

/// Sidecar metadata for one RIR file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RirMeta {
    pub file: String,
    pub room: RoomConfig,
    pub position: usize,
    pub distance_m: f64,
    pub doa_deg: f64,
    pub sample_rate: u32,
    pub geometry: ArrayGeometry,
    #[serde(default)]
    pub source_position: Option<Point3>,
}

impl RirMeta {
    pub fn key(&self) -> RirKey {
        RirKey::new(&self.room.name, self.position, self.distance_m, self.doa_deg)
    }
}

#[derive(Debug, Clone)]
pub struct BankEntry {
    pub meta: RirMeta,
    pub rir: Rir,
}

#[derive(Debug, Serialize, Deserialize)]
struct BankIndex {
    entries: Vec<RirMeta>,
}

fn default_height() -> f64 {
    1.5
}

/// What to simulate: every (room, array position, distance, DOA) tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankPlan {
    pub rooms: Vec<RoomConfig>,
    pub mics: usize,
    pub spacing: f64,
    pub positions_per_room: usize,
    #[serde(default = "default_height")]
    pub array_height: f64,
    pub distances: Vec<f64>,
    pub doas: Vec<f64>,
    pub sample_rate: u32,
    #[serde(default)]
    pub max_len: Option<usize>,
    pub seed: u64,
}

impl BankPlan {
    pub fn num_tuples(&self) -> usize {
        self.rooms.len() * self.positions_per_room * self.distances.len() * self.doas.len()
    }

    /// Array placements for one room: uniformly random centres that leave
    /// room for every source distance on the front half-plane.
    pub fn array_positions(&self, room_index: usize) -> Result<Vec<ArrayGeometry>> {
        let room = &self.rooms[room_index];
        let reach = self.distances.iter().copied().fold(0.0, f64::max);
        let half_aperture = (self.mics as f64 - 1.0) * self.spacing / 2.0;
        let [lx, ly, lz] = room.dims;
        let x_lo = WALL_MARGIN + reach.max(half_aperture);
        let x_hi = lx - WALL_MARGIN - reach.max(half_aperture);
        let y_lo = WALL_MARGIN + 0.2;
        let y_hi = ly - WALL_MARGIN - reach;
        if x_lo > x_hi || y_lo > y_hi || !(self.array_height > 0.0 && self.array_height < lz) {
            return Err(Error::invalid(format!("room {} too small for sources at {reach} m", room.name)));
        }
        let mut rng = CounterRng::new(derive_seed(self.seed, &[0xa77a, room_index as u64]));
        (0..self.positions_per_room)
            .map(|_| {
                let centre = [rng.uniform_range(x_lo, x_hi), rng.uniform_range(y_lo, y_hi), self.array_height];
                ula(centre, self.mics, self.spacing, [1.0, 0.0, 0.0])
            })
            .collect()
    }
}

/// RIRs indexed by [`RirKey`].
#[derive(Debug, Clone, Default)]
pub struct RirBank {
    entries: BTreeMap<RirKey, BankEntry>,
}

/// Simulates one multichannel RIR for a source placement.
pub fn simulate_entry(
    room: &RoomConfig,
    position: usize,
    geometry: &ArrayGeometry,
    placement: SourcePlacement,
    fs: u32,
    max_len: Option<usize>,
) -> Result<BankEntry> {
    let src = placement.position_in(geometry, room)?;
    let parts = geometry
        .mic_positions()
        .iter()
        .map(|&mic| image_method_rir(room, src, mic, fs, max_len))
        .collect::<Result<Vec<_>>>()?;
    let rir = Rir::stack(parts)?;
    let mut meta = RirMeta {
        file: String::new(),
        room: room.clone(),
        position,
        distance_m: placement.distance,
        doa_deg: placement.doa,
        sample_rate: fs,
        geometry: geometry.clone(),
        source_position: Some(src),
    };
    meta.file = format!("{}.drir", meta.key().file_stem());
    Ok(BankEntry { meta, rir })
}

impl RirBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// Simulates every tuple of the plan in parallel.
    pub fn generate(plan: &BankPlan) -> Result<Self> {
        let mut jobs = Vec::with_capacity(plan.num_tuples());
        for (ri, room) in plan.rooms.iter().enumerate() {
            room.validate()?;
            for (pi, geom) in plan.array_positions(ri)?.into_iter().enumerate() {
                for &dist in &plan.distances {
                    for &doa in &plan.doas {
                        jobs.push((room, pi, geom.clone(), SourcePlacement::new(doa, dist)?));
                    }
                }
            }
        }
        let entries = jobs
            .into_par_iter()
            .map(|(room, pi, geom, placement)| {
                simulate_entry(room, pi, &geom, placement, plan.sample_rate, plan.max_len)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bank = Self::new();
        for e in entries {
            bank.insert(e);
        }
        Ok(bank)
    }

    pub fn insert(&mut self, entry: BankEntry) {
        self.entries.insert(entry.meta.key(), entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &RirKey) -> Option<&BankEntry> {
        self.entries.get(key)
    }

    pub fn require(&self, key: &RirKey) -> Result<&BankEntry> {
        self.get(key).ok_or_else(|| Error::MissingRirs(vec![key.to_string()]))
    }

    pub fn entries(&self) -> impl Iterator<Item = &BankEntry> {
        self.entries.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &RirKey> {
        self.entries.keys()
    }

    /// Keys from `wanted` that the bank lacks.
    pub fn missing<'a>(&self, wanted: impl IntoIterator<Item = &'a RirKey>) -> Vec<String> {
        wanted.into_iter().filter(|k| !self.entries.contains_key(k)).map(ToString::to_string).collect()
    }

    /// Array geometry of a (room, position) pair.
    pub fn geometry(&self, room: &str, position: usize) -> Option<&ArrayGeometry> {
        self.entries
            .values()
            .find(|e| e.meta.room.name == room && e.meta.position == position)
            .map(|e| &e.meta.geometry)
    }

    /// Restricts every entry to a subset of microphones.
    pub fn select_mics(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Self::new();
        for e in self.entries.values() {
            let mut meta = e.meta.clone();
            meta.geometry = e.meta.geometry.subset(indices)?;
            out.insert(BankEntry { meta, rir: e.rir.select(indices)? });
        }
        Ok(out)
    }

    /// Writes every entry plus sidecars and `index.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut index = BankIndex { entries: Vec::new() };
        for e in self.entries.values() {
            let mut meta = e.meta.clone();
            let stem = meta.key().file_stem();
            meta.file = format!("{stem}.drir");
            write_drir(dir.join(&meta.file), &e.rir)?;
            fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(&meta)?)?;
            index.entries.push(meta);
        }
        fs::write(dir.join("index.json"), serde_json::to_vec_pretty(&index)?)?;
        Ok(())
    }

    /// Loads a bank from `dir/index.json`; entries may be `.drir` or `.wav`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let index: BankIndex = serde_json::from_slice(&fs::read(dir.join("index.json"))?)?;
        let mut bank = Self::new();
        for meta in index.entries {
            let path = dir.join(&meta.file);
            let rir = if meta.file.to_ascii_lowercase().ends_with(".wav") {
                Rir::from_wav(&path)?
            } else {
                read_drir(&path)?
            };
            if rir.num_mics() != meta.geometry.num_mics() {
                return Err(Error::Format(format!(
                    "{}: {} channels but geometry has {} microphones",
                    meta.file,
                    rir.num_mics(),
                    meta.geometry.num_mics()
                )));
            }
            bank.insert(BankEntry { meta, rir });
        }
        Ok(bank)
    }
}

pub fn write_drir(path: impl AsRef<Path>, rir: &Rir) -> Result<()> {
    let mut buf = Vec::with_capacity(20 + 4 * rir.num_mics() * rir.len());
    buf.extend_from_slice(DRIR_MAGIC);
    for v in [DRIR_VERSION, rir.num_mics() as u32, rir.sample_rate(), rir.len() as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for ch in rir.taps() {
        for &v in ch {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_drir(path: impl AsRef<Path>) -> Result<Rir> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < 20 || &bytes[..4] != DRIR_MAGIC {
        return Err(bad("not a DRIR file"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (version, mics, fs_hz, taps) = (word(0), word(1) as usize, word(2), word(3) as usize);
    if version != DRIR_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let expected = 20 + 4 * mics * taps;
    if bytes.len() != expected {
        return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let data: Vec<f64> =
        bytes[20..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    let channels = data.chunks(taps.max(1)).map(<[f64]>::to_vec).collect();
    Rir::new(channels, fs_hz)
}
