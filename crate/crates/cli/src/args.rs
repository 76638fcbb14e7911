use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Environment variable naming the directory searched for `<label>.toml`
/// array configurations before the built-in presets.
pub const CONFIG_DIR_ENV: &str = "DOA_CONFIG_DIR";

#[derive(Debug, Parser)]
#[command(name = "doa", version, about = "Sound source localization with SRP-PHAT and SVD-PHAT")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    /// Emit JSON instead of CSV or plain text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factorize the steering matrix and write a model file.
    BuildModel(BuildModelArgs),
    /// Localize every STFT frame of a multichannel WAV file.
    Localize(LocalizeArgs),
    /// Render a free-field scene to a WAV file with a JSON ground-truth sidecar.
    Simulate(SimulateArgs),
    /// Sweep the energy threshold over simulated scenes and write a CSV table.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct BuildModelArgs {
    /// Array configuration: a shipped label (1d, 2d, 3d) or a TOML file.
    #[arg(long, short)]
    pub config: String,

    /// Fraction of steering-matrix energy allowed to be discarded.
    #[arg(long, short, default_value_t = 1e-5, value_parser = parse_delta)]
    pub delta: f64,

    /// Icosphere subdivision level of the scan grid.
    #[arg(long, default_value_t = svdphat::geometry::DEFAULT_GRID_LEVEL, value_parser = parse_level)]
    pub grid_level: u32,

    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long, short)]
    pub model: PathBuf,

    /// WAV file with one channel per microphone.
    #[arg(long, short)]
    pub input: PathBuf,

    /// Use the exhaustive SRP-PHAT scan instead of the model's fast path.
    #[arg(long)]
    pub exact: bool,

    /// Write records here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, short)]
    pub config: String,

    /// Source direction as x,y,z (normalized); random when neither this nor
    /// --grid-point is given.
    #[arg(long, value_parser = parse_vec3, conflicts_with = "grid_point", allow_hyphen_values = true)]
    pub direction: Option<[f64; 3]>,

    /// Place the source on this point of the scan grid.
    #[arg(long)]
    pub grid_point: Option<usize>,

    #[arg(long, default_value_t = svdphat::geometry::DEFAULT_GRID_LEVEL, value_parser = parse_level)]
    pub grid_level: u32,

    /// Per-channel SNR in dB; noiseless when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,

    /// Scene length in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,

    /// Source signal: noise or sweep.
    #[arg(long, default_value = "noise")]
    pub signal: svdphat::sim::SignalKind,

    /// Write 16-bit PCM instead of 32-bit float.
    #[arg(long)]
    pub pcm16: bool,

    /// Output WAV; the sidecar goes next to it with a .json extension.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Geometries to sweep (repeatable); all shipped presets by default.
    #[arg(long, short)]
    pub config: Vec<String>,

    /// Decade range such as 1e-1..1e-6, or a comma-separated list.
    #[arg(long, default_value = "1e-1..1e-6", value_parser = parse_deltas)]
    pub deltas: DeltaList,

    /// Simulated scenes per geometry.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    pub scenes: u32,

    #[arg(long, default_value_t = svdphat::geometry::DEFAULT_GRID_LEVEL, value_parser = parse_level)]
    pub grid_level: u32,

    /// Scene length in seconds.
    #[arg(long, default_value_t = 0.2)]
    pub duration: f64,

    /// Skip throughput measurement; the fps columns read nan and the output
    /// is byte-identical across runs.
    #[arg(long)]
    pub no_timing: bool,

    /// CSV destination; standard output when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaList(pub Vec<f64>);

fn parse_delta(s: &str) -> Result<f64, String> {
    let d: f64 = s.trim().parse().map_err(|e| format!("{s:?} is not a number: {e}"))?;
    if d > 0.0 && d < 1.0 {
        Ok(d)
    } else {
        Err(format!("delta must lie strictly between 0 and 1, got {d}"))
    }
}

fn parse_level(s: &str) -> Result<u32, String> {
    let level: u32 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if level > svdphat::geometry::MAX_GRID_LEVEL {
        return Err(format!(
            "grid level {level} exceeds the maximum of {}",
            svdphat::geometry::MAX_GRID_LEVEL
        ));
    }
    Ok(level)
}

/// `a..b` with both ends powers of ten expands to every decade in between,
/// in the order written; otherwise a comma-separated list.
fn parse_deltas(s: &str) -> Result<DeltaList, String> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse_delta(a)?, parse_delta(b)?);
        let (ea, eb) = (a.log10().round(), b.log10().round());
        if (10f64.powf(ea) - a).abs() > 1e-12 * a || (10f64.powf(eb) - b).abs() > 1e-12 * b {
            return Err(format!("range ends must be powers of ten: {s:?}"));
        }
        let (ea, eb) = (ea as i32, eb as i32);
        let step = if eb >= ea { 1 } else { -1 };
        let mut out = Vec::new();
        let mut e = ea;
        loop {
            out.push(format!("1e{e}").parse().unwrap());
            if e == eb {
                break;
            }
            e += step;
        }
        return Ok(DeltaList(out));
    }
    s.split(',').map(parse_delta).collect::<Result<_, _>>().map(DeltaList)
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [x, y, z] = parts[..] else {
        return Err(format!("expected x,y,z, got {s:?}"));
    };
    let n = (x * x + y * y + z * z).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err("direction must be a finite nonzero vector".into());
    }
    Ok([x / n, y / n, z / n])
}
