use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use svdphat::audio::{read_wav, write_wav, Recording, WavEncoding};
use svdphat::geometry::{ArrayConfig, ScanGrid, PRESETS};
use svdphat::sim::{self, BenchmarkSettings, Scene};
use svdphat::spectral::cross_spectra;
use svdphat::srp::{srp_localize, DoaEstimate, SteeringMatrix};
use svdphat::svd::SvdPhatModel;
use svdphat::Error;

use crate::args::{BenchmarkArgs, BuildModelArgs, Cli, LocalizeArgs, SimulateArgs, CONFIG_DIR_ENV};
use crate::CliError;

fn shipped_labels() -> String {
    PRESETS.iter().map(|(l, _)| *l).collect::<Vec<_>>().join(", ")
}

/// A path (anything ending in `.toml` or containing a separator) is read
/// as is; a bare label is looked up in `$DOA_CONFIG_DIR`, then among the
/// shipped presets.
pub fn resolve_config(spec: &str) -> Result<ArrayConfig, CliError> {
    if spec.ends_with(".toml") || spec.contains(std::path::MAIN_SEPARATOR) || spec.contains('/') {
        return Ok(ArrayConfig::from_file(spec)?);
    }
    if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
        let path = PathBuf::from(dir).join(format!("{spec}.toml"));
        if path.is_file() {
            return Ok(ArrayConfig::from_file(path)?);
        }
    }
    ArrayConfig::preset(spec).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown geometry {spec:?}; shipped configs: {}",
            shipped_labels()
        ))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::file(path, e).into())
}

pub fn build_model(cli: &Cli, args: &BuildModelArgs) -> Result<(), CliError> {
    let config = resolve_config(&args.config)?;
    let grid = ScanGrid::icosphere(args.grid_level)?;
    let start = Instant::now();
    let steering = SteeringMatrix::build(&config, &grid)?;
    let model = SvdPhatModel::fit(&steering, args.delta)?;
    let seconds = start.elapsed().as_secs_f64();
    drop(steering);
    model.save(&args.output)?;
    if cli.json {
        println!(
            "{}",
            json!({
                "geometry": config.name(),
                "Q": grid.len(),
                "delta": args.delta,
                "K": model.rank(),
                "gain": model.gain(),
                "fit_seconds": seconds,
                "model": args.output.display().to_string(),
            })
        );
    } else {
        println!("geometry   {}", config.name());
        println!("Q          {}", grid.len());
        println!("delta      {:e}", args.delta);
        println!("K          {}", model.rank());
        println!("gain Q/K   {:.2}", model.gain());
        println!("fit time   {seconds:.2} s");
        println!("model      {}", args.output.display());
    }
    Ok(())
}

fn check_recording(rec: &Recording, config: &ArrayConfig, path: &Path) -> Result<(), CliError> {
    if rec.num_channels() != config.num_mics() {
        return Err(Error::InvalidArgument(format!(
            "{}: has {} channel(s), the model expects {} (one per microphone)",
            path.display(),
            rec.num_channels(),
            config.num_mics()
        ))
        .into());
    }
    if f64::from(rec.sample_rate) != config.sample_rate() {
        return Err(Error::InvalidArgument(format!(
            "{}: sample rate {} Hz, the model expects {} Hz",
            path.display(),
            rec.sample_rate,
            config.sample_rate()
        ))
        .into());
    }
    Ok(())
}

pub fn localize(cli: &Cli, args: &LocalizeArgs) -> Result<(), CliError> {
    let model = SvdPhatModel::load(&args.model)?;
    let rec = read_wav(&args.input)?;
    check_recording(&rec, model.config(), &args.input)?;
    let observations = cross_spectra(&rec.channels, model.config())?;
    let estimates: Vec<DoaEstimate> = if args.exact {
        let steering = SteeringMatrix::build(model.config(), model.grid())?;
        observations
            .iter()
            .enumerate()
            .map(|(t, x)| srp_localize(&steering, x).map(|e| e.with_frame(t)))
            .collect::<svdphat::Result<_>>()?
    } else {
        observations
            .iter()
            .enumerate()
            .map(|(t, x)| model.localize(x).map(|e| e.with_frame(t)))
            .collect::<svdphat::Result<_>>()?
    };
    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    if !cli.json {
        writeln!(out, "frame,q,x,y,z,energy,valid")?;
    }
    for e in &estimates {
        let [x, y, z] = e.direction;
        if cli.json {
            writeln!(
                out,
                "{}",
                json!({"frame": e.frame, "q": e.index, "direction": [x, y, z], "energy": e.energy, "valid": e.valid})
            )?;
        } else {
            writeln!(out, "{},{},{x},{y},{z},{},{}", e.frame, e.index, e.energy, e.valid)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let config = resolve_config(&args.config)?;
    let len = (args.duration * config.sample_rate()).round();
    if !(len >= 1.0 && len.is_finite()) {
        return Err(CliError::Usage(format!("duration {} s gives no samples", args.duration)));
    }
    if config.sample_rate().fract() != 0.0 || config.sample_rate() > f64::from(u32::MAX) {
        return Err(Error::InvalidArgument(format!(
            "sample rate {} Hz cannot be stored in a WAV header",
            config.sample_rate()
        ))
        .into());
    }
    if let Some(snr) = args.snr {
        if !snr.is_finite() {
            return Err(CliError::Usage(format!("SNR must be finite, got {snr}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let (direction, grid_point) = match (args.direction, args.grid_point) {
        (Some(d), _) => (d, None),
        (None, Some(q)) => {
            let grid = ScanGrid::icosphere(args.grid_level)?;
            if q >= grid.len() {
                return Err(CliError::Usage(format!(
                    "grid point {q} out of range; the level-{} grid has {} points",
                    args.grid_level,
                    grid.len()
                )));
            }
            (grid.point(q), Some(q))
        }
        (None, None) => (sim::random_direction(&mut rng), None),
    };
    let signal = args.signal.generate(len as usize, config.sample_rate(), &mut rng);
    let scene = Scene::new(config.clone(), direction, signal, args.snr, cli.seed)?;
    let mut channels = sim::simulate_scene(&scene)?;
    let peak = channels.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { 0.9 / peak } else { 1.0 };
    for v in channels.iter_mut().flatten() {
        *v *= gain;
    }
    let rec = Recording {
        sample_rate: config.sample_rate() as u32,
        channels,
    };
    let encoding = if args.pcm16 { WavEncoding::Pcm16 } else { WavEncoding::Float32 };
    write_wav(&args.output, &rec, encoding)?;

    let sidecar_path = args.output.with_extension("json");
    let sidecar = json!({
        "wav": args.output.file_name().map(|n| n.to_string_lossy().into_owned()),
        "geometry": config.name(),
        "mics": config.mics(),
        "sample_rate": config.sample_rate(),
        "speed_of_sound": config.speed_of_sound(),
        "samples": rec.len(),
        "direction": direction,
        "grid_point": grid_point,
        "grid_level": grid_point.map(|_| args.grid_level),
        "snr_db": args.snr,
        "signal": args.signal.name(),
        "seed": cli.seed,
        "output_gain": gain,
        "encoding": if args.pcm16 { "pcm16" } else { "float32" },
    });
    let mut f = create(&sidecar_path)?;
    serde_json::to_writer_pretty(&mut f, &sidecar).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;
    if cli.json {
        println!("{sidecar}");
    } else {
        println!(
            "wrote {} ({} channels, {} samples) and {}",
            args.output.display(),
            rec.num_channels(),
            rec.len(),
            sidecar_path.display()
        );
    }
    Ok(())
}

pub fn benchmark(cli: &Cli, args: &BenchmarkArgs) -> Result<(), CliError> {
    let labels: Vec<String> = if args.config.is_empty() {
        PRESETS.iter().map(|(l, _)| l.to_string()).collect()
    } else {
        args.config.clone()
    };
    let configs = labels
        .iter()
        .map(|l| resolve_config(l))
        .collect::<Result<Vec<_>, _>>()?;
    let scene_len = configs
        .iter()
        .map(|c| (args.duration * c.sample_rate()).round())
        .fold(f64::INFINITY, f64::min);
    if !(scene_len >= 1.0 && scene_len.is_finite()) {
        return Err(CliError::Usage(format!("duration {} s gives no samples", args.duration)));
    }
    let settings = BenchmarkSettings {
        deltas: args.deltas.0.clone(),
        scenes: args.scenes as usize,
        seed: cli.seed,
        grid_level: args.grid_level,
        scene_len: scene_len as usize,
        timing: !args.no_timing,
    };
    let rows = sim::run_benchmark(&configs, &settings)?;

    let to_stdout = args.output.is_none();
    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    if cli.json {
        for r in &rows {
            writeln!(
                out,
                "{}",
                json!({
                    "geometry": r.geometry, "delta": r.delta, "K": r.rank, "gain": r.gain,
                    "rmse_svd": r.rmse_svd, "rmse_srp": r.rmse_srp, "delta_rmse": r.delta_rmse,
                    "fps_svd": r.fps_svd, "fps_srp": r.fps_srp, "frames": r.frames,
                    "agreement": r.agreement, "mean_nodes_visited": r.mean_nodes_visited,
                })
            )?;
        }
    } else {
        let metadata = [
            ("aggregation", "mean of per-scene energy-weighted RMSE".to_string()),
            ("scenes", settings.scenes.to_string()),
            ("scene_samples", settings.scene_len.to_string()),
            ("grid_level", settings.grid_level.to_string()),
            ("seed", settings.seed.to_string()),
            ("timing", settings.timing.to_string()),
        ];
        sim::write_csv(&mut out, &rows, &metadata)?;
    }
    out.flush()?;
    drop(out);
    let table = sim::summary(&rows);
    if to_stdout {
        eprint!("{table}");
    } else {
        print!("{table}");
    }
    Ok(())
}
