use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::metrics::{rmse, DirectionMapping};
use super::scene::{simulate_scene, Scene};
use crate::geometry::{ArrayConfig, ScanGrid};
use crate::spectral::{cross_spectra, CrossSpectrumVector};
use crate::srp::{srp_localize, DoaEstimate, SteeringMatrix};
use crate::svd::{Decomposition, SvdPhatModel};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "geometry,delta,K,gain,rmse_svd,rmse_srp,delta_rmse,fps_svd,fps_srp";

/// Knobs of a rank sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSettings {
    pub deltas: Vec<f64>,
    pub scenes: usize,
    pub seed: u64,
    pub grid_level: u32,
    /// Scene length in samples.
    pub scene_len: usize,
    /// Measure throughput; when false the fps columns are left empty.
    pub timing: bool,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        BenchmarkSettings {
            deltas: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            scenes: 50,
            seed: 0,
            grid_level: crate::geometry::DEFAULT_GRID_LEVEL,
            scene_len: 3200,
            timing: true,
        }
    }
}

/// One `(geometry, delta)` point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub geometry: String,
    pub delta: f64,
    pub rank: usize,
    /// `Q / K`.
    pub gain: f64,
    pub rmse_svd: f64,
    pub rmse_srp: f64,
    /// `rmse_svd - rmse_srp`.
    pub delta_rmse: f64,
    pub fps_svd: Option<f64>,
    pub fps_srp: Option<f64>,
    pub frames: usize,
    /// Fraction of frames where both methods pick the same grid point.
    pub agreement: f64,
    pub mean_nodes_visited: f64,
    pub norm_spread: f64,
}

/// Simulated scenes and their cross-spectra, shared by both localizers.
#[derive(Debug, Clone)]
pub struct SceneBatch {
    pub scenes: Vec<Scene>,
    pub observations: Vec<Vec<CrossSpectrumVector>>,
}

impl SceneBatch {
    /// Scene `i` is seeded from the `i`-th draw of a generator seeded with
    /// `seed`, so batches of different sizes share their common prefix.
    pub fn simulate(config: &ArrayConfig, count: usize, len: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<u64> = (0..count).map(|_| rng.random()).collect();
        let scenes: Vec<Scene> = seeds.iter().map(|&s| Scene::random(config, len, s)).collect();
        let observations = scenes
            .par_iter()
            .map(|scene| cross_spectra(&simulate_scene(scene)?, config))
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneBatch { scenes, observations })
    }

    pub fn frame_count(&self) -> usize {
        self.observations.iter().map(Vec::len).sum()
    }
}

/// Per-scene estimates of one localizer over a batch.
#[derive(Debug, Clone)]
pub struct BatchRun {
    pub estimates: Vec<Vec<DoaEstimate>>,
    pub seconds: f64,
    pub nodes_visited: usize,
}

impl BatchRun {
    /// Mean over scenes of the energy-weighted error.
    pub fn mean_rmse(&self, batch: &SceneBatch, mapping: DirectionMapping) -> Result<f64> {
        let mut sum = 0.0;
        for (est, scene) in self.estimates.iter().zip(&batch.scenes) {
            let valid: Vec<DoaEstimate> = est.iter().copied().filter(|e| e.valid).collect();
            sum += rmse(&valid, scene.direction, mapping)?;
        }
        Ok(sum / batch.scenes.len().max(1) as f64)
    }

    pub fn fps(&self) -> f64 {
        self.estimates.iter().map(Vec::len).sum::<usize>() as f64 / self.seconds
    }
}

pub fn run_exact(w: &SteeringMatrix, batch: &SceneBatch) -> Result<BatchRun> {
    let start = Instant::now();
    let estimates = batch
        .observations
        .iter()
        .map(|frames| {
            frames
                .iter()
                .enumerate()
                .map(|(t, x)| srp_localize(w, x).map(|e| e.with_frame(t)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchRun {
        estimates,
        seconds: start.elapsed().as_secs_f64(),
        nodes_visited: 0,
    })
}

pub fn run_model(model: &SvdPhatModel, batch: &SceneBatch) -> Result<BatchRun> {
    let mut nodes_visited = 0;
    let start = Instant::now();
    let mut estimates = Vec::with_capacity(batch.observations.len());
    for frames in &batch.observations {
        let mut scene = Vec::with_capacity(frames.len());
        for (t, x) in frames.iter().enumerate() {
            let (e, stats) = model.localize_with_stats(x)?;
            nodes_visited += stats.nodes_visited;
            scene.push(e.with_frame(t));
        }
        estimates.push(scene);
    }
    Ok(BatchRun {
        estimates,
        seconds: start.elapsed().as_secs_f64(),
        nodes_visited,
    })
}

/// Sweeps `deltas` for one geometry against a precomputed decomposition.
pub fn evaluate_geometry(
    label: &str,
    w: &SteeringMatrix,
    decomposition: &Decomposition,
    batch: &SceneBatch,
    deltas: &[f64],
    timing: bool,
) -> Result<Vec<BenchmarkRow>> {
    let mapping = DirectionMapping::for_dimensionality(w.config().dimensionality())?;
    let exact = run_exact(w, batch)?;
    let rmse_srp = exact.mean_rmse(batch, mapping)?;
    let frames = batch.frame_count();
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let model = decomposition.model(delta)?;
        let run = run_model(&model, batch)?;
        let rmse_svd = run.mean_rmse(batch, mapping)?;
        let same = run
            .estimates
            .iter()
            .flatten()
            .zip(exact.estimates.iter().flatten())
            .filter(|(a, b)| a.index == b.index)
            .count();
        rows.push(BenchmarkRow {
            geometry: label.to_string(),
            delta,
            rank: model.rank(),
            gain: model.gain(),
            rmse_svd,
            rmse_srp,
            delta_rmse: rmse_svd - rmse_srp,
            fps_svd: timing.then(|| run.fps()),
            fps_srp: timing.then(|| exact.fps()),
            frames,
            agreement: same as f64 / frames.max(1) as f64,
            mean_nodes_visited: run.nodes_visited as f64 / frames.max(1) as f64,
            norm_spread: model.norm_spread(),
        });
    }
    Ok(rows)
}

/// Full sweep: every geometry is factorized once and evaluated at every delta
/// on the same scenes.
pub fn run_benchmark(configs: &[ArrayConfig], settings: &BenchmarkSettings) -> Result<Vec<BenchmarkRow>> {
    if settings.scenes == 0 {
        return Err(Error::InvalidArgument("scene count must be positive".into()));
    }
    for &d in &settings.deltas {
        crate::svd::check_delta(d)?;
    }
    let Some(min_delta) = settings.deltas.iter().copied().reduce(f64::min) else {
        return Err(Error::InvalidArgument("no delta values given".into()));
    };
    let grid = ScanGrid::icosphere(settings.grid_level)?;
    let mut rows = Vec::new();
    for config in configs {
        let w = SteeringMatrix::build(config, &grid)?;
        let decomposition = Decomposition::compute(&w, min_delta)?;
        let batch = SceneBatch::simulate(config, settings.scenes, settings.scene_len, settings.seed)?;
        rows.extend(evaluate_geometry(
            config.name(),
            &w,
            &decomposition,
            &batch,
            &settings.deltas,
            settings.timing,
        )?);
    }
    Ok(rows)
}

fn fps_field(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |f| format!("{f:.1}"))
}

/// Writes the rows as CSV, preceded by `# key=value` comment lines.
pub fn write_csv(mut out: impl Write, rows: &[BenchmarkRow], metadata: &[(&str, String)]) -> Result<()> {
    for (key, value) in metadata {
        writeln!(out, "# {key}={value}")?;
    }
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:e},{},{},{},{},{},{},{}",
            r.geometry.replace(',', "_"),
            r.delta,
            r.rank,
            r.gain,
            r.rmse_svd,
            r.rmse_srp,
            r.delta_rmse,
            fps_field(r.fps_svd),
            fps_field(r.fps_srp),
        )?;
    }
    Ok(())
}

/// Fixed-width table for terminals.
pub fn summary(rows: &[BenchmarkRow]) -> String {
    let mut s = format!(
        "{:<10} {:>8} {:>5} {:>8} {:>10} {:>10} {:>11} {:>7} {:>9} {:>10} {:>10}\n",
        "geometry", "delta", "K", "gain", "rmse_svd", "rmse_srp", "delta_rmse", "agree", "visited", "fps_svd", "fps_srp"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<10} {:>8.0e} {:>5} {:>8.1} {:>10.5} {:>10.5} {:>11.2e} {:>7.3} {:>9.0} {:>10} {:>10}\n",
            r.geometry,
            r.delta,
            r.rank,
            r.gain,
            r.rmse_svd,
            r.rmse_srp,
            r.delta_rmse,
            r.agreement,
            r.mean_nodes_visited,
            fps_field(r.fps_svd),
            fps_field(r.fps_srp),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_settings() -> BenchmarkSettings {
        BenchmarkSettings {
            deltas: vec![1e-1, 1e-3, 1e-5],
            scenes: 3,
            seed: 9,
            grid_level: 2,
            scene_len: 1200,
            timing: false,
        }
    }

    #[test]
    fn rows_are_consistent_and_monotone() {
        let configs = [ArrayConfig::preset("2d").unwrap()];
        let rows = run_benchmark(&configs, &small_settings()).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r.gain, 162.0 / r.rank as f64);
            assert_eq!(r.delta_rmse, r.rmse_svd - r.rmse_srp);
            assert!(r.fps_svd.is_none());
            assert_eq!(r.frames, 3 * 8);
        }
        for pair in rows.windows(2) {
            // deltas decrease along the list
            assert!(pair[0].rank <= pair[1].rank);
            assert!(pair[0].gain >= pair[1].gain);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let configs = [ArrayConfig::preset("1d").unwrap()];
        let a = run_benchmark(&configs, &small_settings()).unwrap();
        let b = run_benchmark(&configs, &small_settings()).unwrap();
        assert_eq!(a, b);
        let mut other = small_settings();
        other.seed = 10;
        let c = run_benchmark(&configs, &other).unwrap();
        assert_ne!(a[0].rmse_srp, c[0].rmse_srp);
    }

    #[test]
    fn batches_share_prefix() {
        let config = ArrayConfig::preset("3d").unwrap();
        let a = SceneBatch::simulate(&config, 2, 800, 5).unwrap();
        let b = SceneBatch::simulate(&config, 4, 800, 5).unwrap();
        assert_eq!(a.scenes[..], b.scenes[..2]);
    }

    #[test]
    fn csv_layout() {
        let row = BenchmarkRow {
            geometry: "1d".into(),
            delta: 1e-5,
            rank: 8,
            gain: 320.25,
            rmse_svd: 0.5,
            rmse_srp: 0.25,
            delta_rmse: 0.25,
            fps_svd: None,
            fps_srp: Some(10.0),
            frames: 1,
            agreement: 1.0,
            mean_nodes_visited: 3.0,
            norm_spread: 1.0,
        };
        let mut out = Vec::new();
        write_csv(&mut out, &[row], &[("seed", "1".into())]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            format!("# seed=1\n{CSV_HEADER}\n1d,1e-5,8,320.25,0.5,0.25,0.25,nan,10.0\n")
        );
    }

    #[test]
    fn rejects_bad_settings() {
        let configs = [ArrayConfig::preset("1d").unwrap()];
        let mut s = small_settings();
        s.deltas = vec![];
        assert!(run_benchmark(&configs, &s).is_err());
        s.deltas = vec![1.5];
        assert!(run_benchmark(&configs, &s).is_err());
        s = small_settings();
        s.scenes = 0;
        assert!(run_benchmark(&configs, &s).is_err());
    }
}
