//! Binary model container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "SVDPHAT\0"
//! version          u32
//! M, N, hop, Q, K  u32 x 5
//! delta            f64
//! sample_rate      f64
//! speed_of_sound   f64
//! total_energy     f64      Tr{W W^H}
//! geometry_hash    u64      first 8 bytes of SHA-256 over mics, rates, framing and grid
//! section_count    u32
//! sections         tag [u8; 4], payload length u64, payload, CRC-32 of payload u32
//! trailer          u32      CRC-32 of every preceding byte
//! ```
//!
//! Sections, in order:
//!
//! | tag    | payload                                                       |
//! |--------|---------------------------------------------------------------|
//! | `NAME` | UTF-8 geometry label                                          |
//! | `MICS` | `M x 3` f64 positions in meters                               |
//! | `GRID` | `Q x 3` f64 unit directions                                   |
//! | `TDOA` | `Q x P` f64 farfield TDOAs in samples (regenerates rows of W) |
//! | `SIGM` | `K` f64 retained singular values                              |
//! | `BASH` | `K x P(N/2+1)` complex (re, im) rows of `V^H`                 |
//! | `DICT` | `Q x K` complex normalized dictionary rows                    |
//! | `NORM` | `Q` f64 dictionary row norms before normalization             |
//! | `KDTR` | k-d tree: dims, leaf size, ids, embedded points, nodes        |
//!
//! Every value is stored at full `f64` precision, so a save/load round trip is
//! bit-exact.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::SvdPhatModel;
use crate::codec::{ByteReader, ByteWriter};
use crate::geometry::{ArrayConfig, ScanGrid};
use crate::nn_index::NnIndex;
use crate::{Error, Result};

pub const MODEL_MAGIC: [u8; 8] = *b"SVDPHAT\0";
pub const MODEL_VERSION: u32 = 1;

const SECTIONS: [&[u8; 4]; 9] = [
    b"NAME", b"MICS", b"GRID", b"TDOA", b"SIGM", b"BASH", b"DICT", b"NORM", b"KDTR",
];

/// Identifies the geometry a model was fitted for.
pub fn geometry_hash(config: &ArrayConfig, grid: &ScanGrid) -> u64 {
    let mut h = Sha256::new();
    for p in config.mics() {
        for v in p {
            h.update(v.to_le_bytes());
        }
    }
    h.update(config.sample_rate().to_le_bytes());
    h.update(config.speed_of_sound().to_le_bytes());
    h.update((config.frame_size() as u64).to_le_bytes());
    h.update((config.hop_size() as u64).to_le_bytes());
    for p in grid.points() {
        for v in p {
            h.update(v.to_le_bytes());
        }
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::ModelFormat(format!("{what} {v} does not fit the header")))
}

impl SvdPhatModel {
    pub fn geometry_hash(&self) -> u64 {
        geometry_hash(&self.config, &self.grid)
    }

    /// Encodes the model in the container format.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let c = &self.config;
        let mut w = ByteWriter::default();
        w.bytes(&MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        w.u32(to_u32(c.num_mics(), "microphone count")?);
        w.u32(to_u32(c.frame_size(), "frame size")?);
        w.u32(to_u32(c.hop_size(), "hop size")?);
        w.u32(to_u32(self.grid.len(), "grid size")?);
        w.u32(to_u32(self.rank, "rank")?);
        w.f64(self.delta);
        w.f64(c.sample_rate());
        w.f64(c.speed_of_sound());
        w.f64(self.total_energy);
        w.u64(self.geometry_hash());
        w.u32(SECTIONS.len() as u32);

        for tag in SECTIONS {
            let mut s = ByteWriter::default();
            match tag {
                b"NAME" => s.bytes(c.name().as_bytes()),
                b"MICS" => s.f64s(c.mics().as_flattened()),
                b"GRID" => s.f64s(self.grid.points().as_flattened()),
                b"TDOA" => s.f64s(&self.tdoas),
                b"SIGM" => s.f64s(&self.singular_values),
                b"BASH" => s.complexes(&self.basis),
                b"DICT" => s.complexes(&self.dictionary),
                b"NORM" => s.f64s(&self.row_norms),
                b"KDTR" => self.index.write(&mut s),
                _ => unreachable!(),
            }
            w.bytes(tag);
            w.u64(s.buf.len() as u64);
            w.bytes(&s.buf);
            w.u32(crc32fast::hash(&s.buf));
        }
        let trailer = crc32fast::hash(&w.buf);
        w.u32(trailer);
        Ok(w.buf)
    }

    /// Decodes and validates a model container.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MODEL_MAGIC.len() + 4 {
            return Err(Error::Checksum("model file (too short)".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        if bytes[..8] != MODEL_MAGIC {
            return Err(Error::ModelFormat("not an SVD-PHAT model (bad magic)".into()));
        }
        if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
            return Err(Error::Checksum("model file".into()));
        }

        let mut r = ByteReader::new(&body[8..], "model header");
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Version {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let m = r.u32()? as usize;
        let frame_size = r.u32()? as usize;
        let hop_size = r.u32()? as usize;
        let q = r.u32()? as usize;
        let rank = r.u32()? as usize;
        let delta = r.f64()?;
        let sample_rate = r.f64()?;
        let speed_of_sound = r.f64()?;
        let total_energy = r.f64()?;
        let hash = r.u64()?;
        let count = r.u32()? as usize;
        if count != SECTIONS.len() {
            return Err(Error::ModelFormat(format!("expected {} sections, found {count}", SECTIONS.len())));
        }

        let mut payloads = Vec::with_capacity(count);
        for expected in SECTIONS {
            let tag = r.take(4)?;
            if tag != expected {
                return Err(Error::ModelFormat(format!(
                    "expected section {}, found {}",
                    String::from_utf8_lossy(expected),
                    String::from_utf8_lossy(tag)
                )));
            }
            let len = usize::try_from(r.u64()?)
                .map_err(|_| Error::ModelFormat("section length overflow".into()))?;
            let payload = r.take(len)?;
            if crc32fast::hash(payload) != r.u32()? {
                return Err(Error::Checksum(format!("section {}", String::from_utf8_lossy(expected))));
            }
            payloads.push(payload);
        }
        if !r.is_empty() {
            return Err(Error::ModelFormat("trailing bytes after the last section".into()));
        }

        let name = String::from_utf8(payloads[0].to_vec())
            .map_err(|_| Error::ModelFormat("geometry name is not UTF-8".into()))?;
        let mics = read_vec3s(payloads[1], m, "MICS")?;
        let config = ArrayConfig::new(mics, sample_rate, speed_of_sound, frame_size, hop_size)?.with_name(name);
        let grid = ScanGrid::from_points(read_vec3s(payloads[2], q, "GRID")?)?;
        if geometry_hash(&config, &grid) != hash {
            return Err(Error::ModelFormat("geometry hash does not match the stored geometry".into()));
        }
        let cols = config.num_columns();
        if rank == 0 || rank > q.min(cols) {
            return Err(Error::ModelFormat(format!("rank {rank} is out of range")));
        }
        super::check_delta(delta).map_err(|e| Error::ModelFormat(e.to_string()))?;

        let tdoas = read_exact_f64s(payloads[3], q * config.num_pairs(), "TDOA")?;
        let singular_values = read_exact_f64s(payloads[4], rank, "SIGM")?;
        let basis = read_exact_complexes(payloads[5], rank * cols, "BASH")?;
        let dictionary = read_exact_complexes(payloads[6], q * rank, "DICT")?;
        let row_norms = read_exact_f64s(payloads[7], q, "NORM")?;
        let mut tree = ByteReader::new(payloads[8], "KDTR section");
        let index = NnIndex::read(&mut tree)?;
        if !tree.is_empty() || index.dim() != rank || index.len() != q {
            return Err(Error::ModelFormat("k-d tree does not match the dictionary".into()));
        }

        Ok(SvdPhatModel {
            config,
            grid,
            tdoas,
            delta,
            rank,
            singular_values,
            total_energy,
            basis,
            dictionary,
            row_norms,
            index,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn section_len_error(tag: &str, expected: usize, actual: usize) -> Error {
    Error::ModelFormat(format!("section {tag} holds {actual} bytes, expected {expected}"))
}

fn read_exact_f64s(payload: &[u8], n: usize, tag: &str) -> Result<Vec<f64>> {
    if payload.len() != n * 8 {
        return Err(section_len_error(tag, n * 8, payload.len()));
    }
    ByteReader::new(payload, "section").f64s(n)
}

fn read_exact_complexes(payload: &[u8], n: usize, tag: &str) -> Result<Vec<num_complex::Complex64>> {
    if payload.len() != n * 16 {
        return Err(section_len_error(tag, n * 16, payload.len()));
    }
    ByteReader::new(payload, "section").complexes(n)
}

fn read_vec3s(payload: &[u8], n: usize, tag: &str) -> Result<Vec<crate::Vec3>> {
    let flat = read_exact_f64s(payload, n * 3, tag)?;
    Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}
