//! Multichannel WAV input and output (16-bit PCM or 32-bit float).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::{Error, Result};

/// Deinterleaved audio, one `Vec` per channel, samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

/// Sample encodings accepted on input and produced on output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

impl Recording {
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest absolute sample value.
    pub fn peak(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut reader = WavReader::new(std::io::BufReader::new(file))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported WAV encoding ({bits}-bit {format:?}); use 16-bit PCM or 32-bit float",
                path.display()
            )))
        }
    };
    let mut out = vec![Vec::with_capacity(interleaved.len() / channels.max(1)); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (ch, &v) in out.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    Ok(Recording {
        sample_rate: spec.sample_rate,
        channels: out,
    })
}

pub fn write_wav(path: impl AsRef<Path>, recording: &Recording, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let channels = u16::try_from(recording.num_channels())
        .ok()
        .filter(|&c| c > 0)
        .ok_or_else(|| Error::InvalidArgument("WAV needs between 1 and 65535 channels".into()))?;
    if recording.channels.iter().any(|c| c.len() != recording.len()) {
        return Err(Error::InvalidArgument("channels differ in length".into()));
    }
    let (bits_per_sample, sample_format) = match encoding {
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
        WavEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels,
        sample_rate: recording.sample_rate,
        bits_per_sample,
        sample_format,
    };
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut writer = WavWriter::new(std::io::BufWriter::new(file), spec)?;
    for n in 0..recording.len() {
        for ch in &recording.channels {
            match encoding {
                WavEncoding::Pcm16 => {
                    let v = (ch[n] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v)?;
                }
                WavEncoding::Float32 => writer.write_sample(ch[n] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(channels: usize, len: usize) -> Recording {
        Recording {
            sample_rate: 16000,
            channels: (0..channels)
                .map(|c| (0..len).map(|n| 0.5 * ((n + 7 * c) as f64 * 0.01).sin()).collect())
                .collect(),
        }
    }

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let rec = tone(7, 500);
        write_wav(&path, &rec, WavEncoding::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16000);
        assert_eq!(back.num_channels(), 7);
        for (a, b) in rec.channels.iter().zip(&back.channels) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn pcm16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.wav");
        let rec = tone(3, 300);
        write_wav(&path, &rec, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        for (a, b) in rec.channels.iter().zip(&back.channels) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1.0 / 32768.0);
            }
        }
    }

    #[test]
    fn rejects_other_encodings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(read_wav(&path).unwrap_err().to_string().contains("unsupported"));
        assert!(matches!(read_wav(dir.path().join("missing.wav")), Err(Error::File { .. })));
    }
}
