use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::geometry::{check_unit, dot, normalize, sub, ArrayConfig};
use crate::{Error, Result, Vec3};

/// Lower and upper bound of the SNR draw for random scenes, in dB.
pub const SNR_RANGE_DB: (f64, f64) = (0.0, 30.0);

/// Synthetic wideband source signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalKind {
    /// Gaussian white noise.
    Noise,
    /// Sum of three linear chirps with random band edges and phases.
    Sweep,
}

impl SignalKind {
    pub fn generate(self, len: usize, sample_rate: f64, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            SignalKind::Noise => (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            SignalKind::Sweep => {
                let nyquist = 0.5 * sample_rate;
                let duration = len as f64 / sample_rate;
                let mut out = vec![0.0; len];
                for _ in 0..3 {
                    let f0 = rng.random_range(0.01..0.9) * nyquist;
                    let f1 = rng.random_range(0.01..0.9) * nyquist;
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    let amp = rng.random_range(0.5..1.0);
                    for (n, v) in out.iter_mut().enumerate() {
                        let t = n as f64 / sample_rate;
                        let arg = std::f64::consts::TAU * (f0 * t + (f1 - f0) * t * t / (2.0 * duration));
                        *v += amp * (arg + phase).sin();
                    }
                }
                out
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Noise => "noise",
            SignalKind::Sweep => "sweep",
        }
    }
}

impl std::str::FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(SignalKind::Noise),
            "sweep" => Ok(SignalKind::Sweep),
            other => Err(Error::InvalidArgument(format!(
                "unknown signal kind {other:?} (expected noise or sweep)"
            ))),
        }
    }
}

/// Uniformly distributed direction on the unit sphere.
pub fn random_direction(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = crate::geometry::norm(v);
        if n > 1e-6 {
            return normalize(v);
        }
    }
}

/// A single farfield source observed by an array in free field.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: ArrayConfig,
    /// True direction of arrival.
    pub direction: Vec3,
    pub signal: Vec<f64>,
    /// Per-channel signal-to-noise ratio; `None` disables the noise.
    pub snr_db: Option<f64>,
    /// Seeds the sensor noise.
    pub seed: u64,
}

impl Scene {
    pub fn new(
        config: ArrayConfig,
        direction: Vec3,
        signal: Vec<f64>,
        snr_db: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        check_unit(direction)?;
        if let Some(snr) = snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidArgument(format!("SNR must be finite, got {snr}")));
            }
        }
        Ok(Scene {
            config,
            direction,
            signal,
            snr_db,
            seed,
        })
    }

    /// Random direction, SNR drawn uniformly from [`SNR_RANGE_DB`] and a
    /// randomly chosen signal kind, all derived from `seed`.
    pub fn random(config: &ArrayConfig, len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let direction = random_direction(&mut rng);
        let snr = rng.random_range(SNR_RANGE_DB.0..SNR_RANGE_DB.1);
        let kind = if rng.random_bool(0.5) {
            SignalKind::Noise
        } else {
            SignalKind::Sweep
        };
        let signal = kind.generate(len, config.sample_rate(), &mut rng);
        Scene {
            config: config.clone(),
            direction,
            signal,
            snr_db: Some(snr),
            seed,
        }
    }
}

/// Delays of every microphone relative to microphone 0, in samples.
pub fn arrival_delays(config: &ArrayConfig, direction: Vec3) -> Vec<f64> {
    let spm = config.sample_rate() / config.speed_of_sound();
    let reference = config.mics()[0];
    config
        .mics()
        .iter()
        .map(|&r| spm * dot(sub(reference, r), direction))
        .collect()
}

/// Renders the microphone signals of a scene.
///
/// Each channel is the source delayed by its farfield arrival offset relative
/// to microphone 0, applied as a phase ramp over the zero-padded signal, plus
/// independent white Gaussian noise at the requested per-channel SNR.
pub fn simulate_scene(scene: &Scene) -> Result<Vec<Vec<f64>>> {
    let len = scene.signal.len();
    if len == 0 {
        return Err(Error::InvalidArgument("scene signal is empty".into()));
    }
    check_unit(scene.direction)?;
    let delays = arrival_delays(&scene.config, scene.direction);
    let max_delay = delays.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let margin = max_delay.ceil() as usize + 64;
    let fft_len = (len + 2 * margin).next_power_of_two();

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); fft_len];
    for (s, &v) in spectrum[margin..margin + len].iter_mut().zip(&scene.signal) {
        *s = Complex64::new(v, 0.0);
    }
    forward.process(&mut spectrum);

    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    rng.set_stream(1);
    let n = fft_len as f64;
    let mut channels = Vec::with_capacity(delays.len());
    for &delay in &delays {
        let mut buf: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                if 2 * k == fft_len {
                    // Nyquist: keep the signal real
                    s * (std::f64::consts::PI * delay).cos()
                } else {
                    let f = if 2 * k < fft_len { k as f64 } else { k as f64 - n };
                    s * Complex64::from_polar(1.0, -std::f64::consts::TAU * f * delay / n)
                }
            })
            .collect();
        inverse.process(&mut buf);
        let clean: Vec<f64> = buf[margin..margin + len].iter().map(|z| z.re / n).collect();
        let channel = match scene.snr_db {
            None => clean,
            Some(snr) => {
                let power = clean.iter().map(|v| v * v).sum::<f64>() / len as f64;
                let sigma = (power / 10f64.powf(snr / 10.0)).sqrt();
                clean
                    .into_iter()
                    .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        };
        channels.push(channel);
    }
    Ok(channels)
}
