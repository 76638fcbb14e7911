//! Microphone array configuration, scan grids and time differences of arrival.
//!
//! All TDOAs are expressed in samples. For a pair `(i, j)` the TDOA is positive
//! when the wavefront reaches microphone `j` first, i.e. when the source is
//! closer to `j` than to `i`.

mod grid;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

pub use grid::{ScanGrid, DEFAULT_GRID_LEVEL, MAX_GRID_LEVEL};

/// Shipped array geometries, keyed by label.
pub const PRESETS: &[(&str, &str)] = &[
    ("1d", include_str!("../../configs/1d.toml")),
    ("2d", include_str!("../../configs/2d.toml")),
    ("3d", include_str!("../../configs/3d.toml")),
];

/// Tolerance on the Euclidean norm of anything treated as a direction.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Microphone positions plus the acquisition and framing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArrayConfig", into = "RawArrayConfig")]
pub struct ArrayConfig {
    name: String,
    mics: Vec<Vec3>,
    sample_rate: f64,
    speed_of_sound: f64,
    frame_size: usize,
    hop_size: usize,
}

#[derive(Serialize, Deserialize)]
struct RawArrayConfig {
    #[serde(default)]
    name: String,
    sample_rate: f64,
    speed_of_sound: f64,
    frame_size: usize,
    hop_size: usize,
    mics: Vec<Vec3>,
}

impl TryFrom<RawArrayConfig> for ArrayConfig {
    type Error = Error;

    fn try_from(raw: RawArrayConfig) -> Result<Self> {
        let mut config = ArrayConfig::new(
            raw.mics,
            raw.sample_rate,
            raw.speed_of_sound,
            raw.frame_size,
            raw.hop_size,
        )?;
        config.name = raw.name;
        Ok(config)
    }
}

impl From<ArrayConfig> for RawArrayConfig {
    fn from(c: ArrayConfig) -> Self {
        RawArrayConfig {
            name: c.name,
            sample_rate: c.sample_rate,
            speed_of_sound: c.speed_of_sound,
            frame_size: c.frame_size,
            hop_size: c.hop_size,
            mics: c.mics,
        }
    }
}

impl ArrayConfig {
    pub fn new(
        mics: Vec<Vec3>,
        sample_rate: f64,
        speed_of_sound: f64,
        frame_size: usize,
        hop_size: usize,
    ) -> Result<Self> {
        if mics.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 microphones, got {}",
                mics.len()
            )));
        }
        if let Some(m) = mics.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "microphone {m} has a non-finite position"
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if !(speed_of_sound.is_finite() && speed_of_sound > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "speed of sound must be positive, got {speed_of_sound}"
            )));
        }
        if frame_size == 0 || frame_size % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "frame size must be even and nonzero, got {frame_size}"
            )));
        }
        if hop_size == 0 || hop_size > frame_size {
            return Err(Error::InvalidConfig(format!(
                "hop size must lie in 1..={frame_size}, got {hop_size}"
            )));
        }
        Ok(ArrayConfig {
            name: String::new(),
            mics,
            sample_rate,
            speed_of_sound,
            frame_size,
            hop_size,
        })
    }

    /// Attaches a display label (used in benchmark output).
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Parses the TOML configuration format.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let config = Self::from_toml_str(&text).map_err(|e| match e {
            Error::ConfigSyntax(inner) => {
                Error::InvalidConfig(format!("{}: {inner}", path.display()))
            }
            other => other,
        })?;
        if config.name.is_empty() {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            return Ok(config.with_name(stem.unwrap_or_default()));
        }
        Ok(config)
    }

    /// One of the shipped geometries: `"1d"`, `"2d"` or `"3d"`.
    pub fn preset(label: &str) -> Option<Self> {
        PRESETS
            .iter()
            .find(|(name, _)| *name == label)
            .map(|(_, text)| Self::from_toml_str(text).expect("shipped config is valid"))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mics(&self) -> &[Vec3] {
        &self.mics
    }

    pub fn num_mics(&self) -> usize {
        self.mics.len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn hop_size(&self) -> usize {
        self.hop_size
    }

    /// `P = M(M-1)/2`.
    pub fn num_pairs(&self) -> usize {
        let m = self.mics.len();
        m * (m - 1) / 2
    }

    /// Retained frequency bins per frame, `N/2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    /// Length of a concatenated cross-spectrum vector, `P(N/2 + 1)`.
    pub fn num_columns(&self) -> usize {
        self.num_pairs() * self.num_bins()
    }

    /// Microphone pairs in lexicographic order `(0,1), (0,2), ..., (M-2,M-1)`.
    pub fn pairs(&self) -> impl Iterator<Item = MicPair> + '_ {
        let m = self.mics.len();
        (0..m).flat_map(move |i| (i + 1..m).map(move |j| MicPair { i, j }))
    }

    /// Largest distance between two microphones.
    pub fn aperture(&self) -> f64 {
        self.pairs()
            .map(|p| norm(sub(self.mics[p.j], self.mics[p.i])))
            .fold(0.0, f64::max)
    }

    /// Number of dimensions spanned by the microphone positions (1, 2 or 3).
    pub fn dimensionality(&self) -> usize {
        let tol = 1e-9 * self.aperture().max(f64::MIN_POSITIVE);
        let origin = self.mics[0];
        let offsets: Vec<Vec3> = self.mics.iter().map(|&p| sub(p, origin)).collect();
        let Some(&axis) = offsets.iter().max_by(|a, b| norm(**a).total_cmp(&norm(**b))) else {
            return 1;
        };
        if norm(axis) <= tol {
            return 1;
        }
        let normal = offsets
            .iter()
            .map(|&v| cross(axis, v))
            .max_by(|a, b| norm(*a).total_cmp(&norm(*b)))
            .unwrap();
        if norm(normal) <= tol * norm(axis) {
            return 1;
        }
        let planar = offsets
            .iter()
            .all(|&v| dot(normal, v).abs() <= tol * norm(normal));
        if planar {
            2
        } else {
            3
        }
    }

    fn samples_per_meter(&self) -> f64 {
        self.sample_rate / self.speed_of_sound
    }
}

/// An ordered microphone pair with `i < j` (zero-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MicPair {
    pub i: usize,
    pub j: usize,
}

impl MicPair {
    pub fn new(i: usize, j: usize) -> Result<Self> {
        if i >= j {
            return Err(Error::InvalidArgument(format!(
                "microphone pair needs i < j, got ({i}, {j})"
            )));
        }
        Ok(MicPair { i, j })
    }

    /// Position of this pair in the lexicographic enumeration of `m` microphones.
    pub fn ordinal(&self, m: usize) -> usize {
        self.i * m - self.i * (self.i + 1) / 2 + (self.j - self.i - 1)
    }
}

/// Exact TDOA in samples for a source at `source` (meters).
///
/// Equals `(fs/c) * (|s - r_i| - |s - r_j|)`.
pub fn tdoa_exact(config: &ArrayConfig, source: Vec3, pair: MicPair) -> f64 {
    let di = norm(sub(source, config.mics[pair.i]));
    let dj = norm(sub(source, config.mics[pair.j]));
    config.samples_per_meter() * (di - dj)
}

/// Farfield TDOA in samples for a plane wave arriving from unit `direction`.
///
/// Equals `(fs/c) * (r_j - r_i) . u`.
pub fn tdoa_farfield(config: &ArrayConfig, direction: Vec3, pair: MicPair) -> Result<f64> {
    check_unit(direction)?;
    Ok(farfield_unchecked(config, direction, pair))
}

pub(crate) fn farfield_unchecked(config: &ArrayConfig, direction: Vec3, pair: MicPair) -> f64 {
    let baseline = sub(config.mics[pair.j], config.mics[pair.i]);
    config.samples_per_meter() * dot(baseline, direction)
}

/// Rejects vectors whose norm is not 1 within [`UNIT_TOLERANCE`].
pub fn check_unit(v: Vec3) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() > UNIT_TOLERANCE || !n.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "expected a unit direction, got norm {n}"
        )));
    }
    Ok(())
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

/// Angle in radians between two unit vectors.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    // atan2 form stays accurate for nearly parallel vectors
    norm(cross(a, b)).atan2(dot(a, b))
}
