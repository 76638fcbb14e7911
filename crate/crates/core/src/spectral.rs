//! Sine-window STFT and PHAT-normalized cross-spectra.
//!
//! Cross-spectra are laid out pair-major: all bins `k = 0..=N/2` of pair
//! `(0,1)`, then all bins of pair `(0,2)`, and so on. The steering matrix uses
//! the same column order.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::geometry::ArrayConfig;
use crate::{Error, Result};

/// `w[n] = sin(pi (n + 0.5) / N)` for `n = 0..N`.
pub fn sine_window(frame_size: usize) -> Vec<f64> {
    let n = frame_size as f64;
    (0..frame_size)
        .map(|i| (std::f64::consts::PI * (i as f64 + 0.5) / n).sin())
        .collect()
}

/// One STFT frame: `M` one-sided spectra of `N/2 + 1` bins each.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFrame {
    pub index: usize,
    spectra: Vec<Vec<Complex64>>,
}

impl SpectrumFrame {
    pub fn new(index: usize, spectra: Vec<Vec<Complex64>>) -> Result<Self> {
        let Some(bins) = spectra.first().map(Vec::len) else {
            return Err(Error::InvalidArgument("spectrum frame needs channels".into()));
        };
        if let Some(bad) = spectra.iter().find(|s| s.len() != bins) {
            return Err(Error::DimensionMismatch {
                what: "spectrum bins",
                expected: bins,
                actual: bad.len(),
            });
        }
        Ok(SpectrumFrame { index, spectra })
    }

    pub fn num_channels(&self) -> usize {
        self.spectra.len()
    }

    pub fn num_bins(&self) -> usize {
        self.spectra[0].len()
    }

    pub fn channel(&self, m: usize) -> &[Complex64] {
        &self.spectra[m]
    }
}

/// Concatenated PHAT cross-spectra of all pairs, length `P(N/2 + 1)`.
///
/// Every entry has modulus 1, or is exactly zero where a channel had no energy
/// in that bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrumVector(Vec<Complex64>);

impl CrossSpectrumVector {
    /// Wraps raw entries. No normalization is applied.
    pub fn from_vec(entries: Vec<Complex64>) -> Self {
        CrossSpectrumVector(entries)
    }

    pub fn zeros(len: usize) -> Self {
        CrossSpectrumVector(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }
}

impl std::ops::Index<usize> for CrossSpectrumVector {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Reusable short-time Fourier transform with a sine analysis window.
pub struct Stft {
    frame_size: usize,
    hop_size: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(config: &ArrayConfig) -> Self {
        let frame_size = config.frame_size();
        let fft = FftPlanner::new().plan_fft_forward(frame_size);
        Stft {
            frame_size,
            hop_size: config.hop_size(),
            window: sine_window(frame_size),
            fft,
        }
    }

    /// Number of full frames in a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_size {
            0
        } else {
            (len - self.frame_size) / self.hop_size + 1
        }
    }

    /// Frame `l` covers samples `[l * hop, l * hop + N)` of every channel.
    pub fn frames<S: AsRef<[f64]>>(&self, signals: &[S]) -> Result<Vec<SpectrumFrame>> {
        let len = check_channels(signals, self.frame_size)?;
        let bins = self.frame_size / 2 + 1;
        let mut buffer = vec![Complex64::new(0.0, 0.0); self.frame_size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        (0..self.frame_count(len))
            .map(|l| {
                let start = l * self.hop_size;
                let spectra = signals
                    .iter()
                    .map(|channel| {
                        let samples = &channel.as_ref()[start..start + self.frame_size];
                        for ((b, &x), &w) in buffer.iter_mut().zip(samples).zip(&self.window) {
                            *b = Complex64::new(x * w, 0.0);
                        }
                        self.fft.process_with_scratch(&mut buffer, &mut scratch);
                        buffer[..bins].to_vec()
                    })
                    .collect();
                SpectrumFrame::new(l, spectra)
            })
            .collect()
    }
}

fn check_channels<S: AsRef<[f64]>>(signals: &[S], frame_size: usize) -> Result<usize> {
    let Some(first) = signals.first() else {
        return Err(Error::InvalidArgument("no input channels".into()));
    };
    let len = first.as_ref().len();
    if let Some(bad) = signals.iter().find(|s| s.as_ref().len() != len) {
        return Err(Error::DimensionMismatch {
            what: "channel length",
            expected: len,
            actual: bad.as_ref().len(),
        });
    }
    if len < frame_size {
        return Err(Error::InvalidArgument(format!(
            "channels hold {len} samples, shorter than one {frame_size}-sample frame"
        )));
    }
    Ok(len)
}

/// STFT of all channels with the framing of `config`.
pub fn stft_frames<S: AsRef<[f64]>>(signals: &[S], config: &ArrayConfig) -> Result<Vec<SpectrumFrame>> {
    Stft::new(config).frames(signals)
}

/// `X_i[k] X_j[k]^* / (|X_i[k]| |X_j[k]|)` for every pair and bin.
pub fn cross_spectrum(frame: &SpectrumFrame) -> CrossSpectrumVector {
    let m = frame.num_channels();
    let bins = frame.num_bins();
    let unit: Vec<Vec<Complex64>> = frame
        .spectra
        .iter()
        .map(|s| {
            s.iter()
                .map(|&z| {
                    let mag = z.norm();
                    if mag == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        z / mag
                    }
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(m * (m - 1) / 2 * bins);
    for i in 0..m {
        for j in i + 1..m {
            out.extend(unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b.conj()));
        }
    }
    CrossSpectrumVector(out)
}

/// STFT followed by [`cross_spectrum`] for every frame.
pub fn cross_spectra<S: AsRef<[f64]>>(
    signals: &[S],
    config: &ArrayConfig,
) -> Result<Vec<CrossSpectrumVector>> {
    if signals.len() != config.num_mics() {
        return Err(Error::DimensionMismatch {
            what: "channel count",
            expected: config.num_mics(),
            actual: signals.len(),
        });
    }
    Ok(stft_frames(signals, config)?.iter().map(cross_spectrum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair_config(frame: usize) -> ArrayConfig {
        ArrayConfig::new(vec![[0.0; 3], [0.1, 0.0, 0.0]], 16000.0, 343.0, frame, frame / 2).unwrap()
    }

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Direct O(N^2) DFT, the oracle for the FFT path.
    fn dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let phase = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                        Complex64::from_polar(v, phase)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn window_is_symmetric_sine() {
        let w = sine_window(8);
        for n in 0..8 {
            assert!((w[n] - w[7 - n]).abs() < 1e-15);
        }
        assert!((w[0] - (std::f64::consts::PI / 16.0).sin()).abs() < 1e-15);
    }

    #[test]
    fn framing_boundaries() {
        let c = pair_config(256);
        let stft = Stft::new(&c);
        assert_eq!(stft.frame_count(255), 0);
        assert_eq!(stft.frame_count(256), 1);
        assert_eq!(stft.frame_count(383), 1);
        assert_eq!(stft.frame_count(384), 2);
        let x = noise(1000, 1);
        let frames = stft.frames(&[x.clone(), x.clone()]).unwrap();
        assert_eq!(frames.len(), 6);
        // frame 3 is the windowed slice starting at 3 * hop
        let w = sine_window(256);
        let slice: Vec<f64> = x[384..640].iter().zip(&w).map(|(a, b)| a * b).collect();
        for (got, want) in frames[3].channel(0).iter().zip(dft(&slice)) {
            assert!((got - want).norm() < 1e-9);
        }
        assert_eq!(frames[3].num_bins(), 129);
    }

    #[test]
    fn rejects_bad_channels() {
        let c = pair_config(256);
        assert!(matches!(
            stft_frames(&[vec![0.0; 300], vec![0.0; 299]], &c),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(stft_frames(&[vec![0.0; 100], vec![0.0; 100]], &c).is_err());
        assert!(cross_spectra(&[vec![0.0; 300]], &c).is_err());
    }

    #[test]
    fn zero_input_gives_zero_spectra() {
        let c = pair_config(256);
        let frames = stft_frames(&[vec![0.0; 512], vec![0.0; 512]], &c).unwrap();
        for f in &frames {
            assert!(f.channel(0).iter().all(|z| z.norm() == 0.0));
            assert!(cross_spectrum(f).as_slice().iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn tone_peaks_at_its_bin() {
        let c = pair_config(256);
        let f = 16.0 * 16000.0 / 256.0;
        let x: Vec<f64> = (0..1024)
            .map(|t| (2.0 * std::f64::consts::PI * f * t as f64 / 16000.0).cos())
            .collect();
        for frame in stft_frames(&[x.clone(), x], &c).unwrap() {
            let peak = frame
                .channel(0)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap()
                .0;
            assert_eq!(peak, 16);
        }
    }

    #[test]
    fn dc_concentrates_in_first_two_bins() {
        // oracle: direct DFT of the window itself
        let w = sine_window(256);
        let spectrum = dft(&w);
        let energy: Vec<f64> = spectrum.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = energy.iter().sum();
        let oracle_share = (energy[0] + energy[1]) / total;
        assert!(oracle_share > 0.99, "{oracle_share}");

        let c = pair_config(256);
        let frame = &stft_frames(&[vec![1.0; 256], vec![1.0; 256]], &c).unwrap()[0];
        let got: Vec<f64> = frame.channel(0).iter().map(|z| z.norm_sqr()).collect();
        let share = (got[0] + got[1]) / got.iter().sum::<f64>();
        assert!((share - oracle_share).abs() < 1e-12);
    }

    #[test]
    fn identical_channels_give_unit_real() {
        let c = pair_config(256);
        let x = noise(800, 3);
        for v in cross_spectra(&[x.clone(), x], &c).unwrap() {
            for z in v.as_slice() {
                assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn delayed_channel_phase_follows_shift_theorem() {
        // channel j lags channel i by d samples
        let d = 3usize;
        let c = pair_config(256);
        let base = noise(4096 + d, 7);
        let xi = base[d..].to_vec();
        let xj = base[..4096].to_vec();
        let spectra = cross_spectra(&[xi, xj], &c).unwrap();
        let n = 256.0;
        let mut agreement = 0.0;
        let mut count = 0.0;
        for v in &spectra {
            for k in 0..129 {
                let expected = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * d as f64 / n);
                agreement += (v[k] * expected.conj()).re;
                count += 1.0;
            }
        }
        assert!(agreement / count > 0.9, "mean agreement {}", agreement / count);
    }

    #[test]
    fn silent_channel_zeroes_its_pairs() {
        let m3 = ArrayConfig::new(vec![[0.0; 3], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0]], 16000.0, 343.0, 256, 128)
            .unwrap();
        let v = &cross_spectra(&[noise(512, 1), vec![0.0; 512], noise(512, 2)], &m3).unwrap()[0];
        // pairs (0,1) and (1,2) involve the silent channel
        assert!(v.as_slice()[..129].iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!(v.as_slice()[258..].iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!(v.as_slice()[129..258].iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn phat_properties(seed in any::<u64>(), gain in 1e-3f64..1e3) {
            let c = pair_config(64);
            let a = noise(200, seed);
            let b = noise(200, seed ^ 0x5555);
            let forward = cross_spectra(&[a.clone(), b.clone()], &c).unwrap();
            let swapped = cross_spectra(&[b.clone(), a.clone()], &c).unwrap();
            let scaled = cross_spectra(&[a.iter().map(|v| v * gain).collect::<Vec<_>>(), b], &c).unwrap();
            for ((f, s), g) in forward.iter().zip(&swapped).zip(&scaled) {
                for ((x, y), z) in f.as_slice().iter().zip(s.as_slice()).zip(g.as_slice()) {
                    let modulus = x.norm();
                    prop_assert!(modulus == 0.0 || (modulus - 1.0).abs() < 1e-12);
                    prop_assert!((x - y.conj()).norm() < 1e-12);
                    prop_assert!((x - z).norm() < 1e-9);
                }
            }
        }
    }
}
