//! End-to-end checks across modules on small grids.

use svdphat::audio::{read_wav, write_wav, Recording, WavEncoding};
use svdphat::geometry::{ArrayConfig, ScanGrid};
use svdphat::sim::{simulate_scene, Scene, SignalKind};
use svdphat::spectral::{cross_spectra, CrossSpectrumVector};
use svdphat::srp::{srp_localize, SteeringMatrix};
use svdphat::svd::{Decomposition, SvdPhatModel};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scene(config: &ArrayConfig, grid: &ScanGrid, q: usize, snr: Option<f64>, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = SignalKind::Noise.generate(4000, config.sample_rate(), &mut rng);
    simulate_scene(&Scene::new(config.clone(), grid.point(q), signal, snr, seed).unwrap()).unwrap()
}

#[test]
fn noiseless_scenes_localize_on_their_grid_point() {
    let config = ArrayConfig::preset("3d").unwrap();
    let grid = ScanGrid::icosphere(3).unwrap();
    let w = SteeringMatrix::build(&config, &grid).unwrap();
    let model = SvdPhatModel::fit(&w, 1e-5).unwrap();
    for q in [0, 111, 333, 600] {
        let frames = cross_spectra(&scene(&config, &grid, q, None, q as u64), &config).unwrap();
        for x in &frames {
            assert_eq!(srp_localize(&w, x).unwrap().index, q);
            assert_eq!(model.localize(x).unwrap().index, q);
        }
    }
}

#[test]
fn wav_round_trip_preserves_estimates() {
    let config = ArrayConfig::preset("2d").unwrap();
    let grid = ScanGrid::icosphere(2).unwrap();
    let w = SteeringMatrix::build(&config, &grid).unwrap();
    let model = SvdPhatModel::fit(&w, 1e-4).unwrap();
    let channels = scene(&config, &grid, 40, Some(15.0), 3);
    let peak = channels.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let rec = Recording {
        sample_rate: 16000,
        channels: channels.iter().map(|c| c.iter().map(|v| v / peak).collect()).collect(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.wav");
    write_wav(&path, &rec, WavEncoding::Float32).unwrap();
    let back = read_wav(&path).unwrap();

    let direct = cross_spectra(&rec.channels, &config).unwrap();
    let loaded = cross_spectra(&back.channels, &config).unwrap();
    for (a, b) in direct.iter().zip(&loaded) {
        assert_eq!(model.localize(a).unwrap().index, model.localize(b).unwrap().index);
    }
}

#[test]
fn saved_model_matches_fresh_fit() {
    let config = ArrayConfig::preset("1d").unwrap();
    let grid = ScanGrid::icosphere(2).unwrap();
    let w = SteeringMatrix::build(&config, &grid).unwrap();
    let dec = Decomposition::compute(&w, 1e-5).unwrap();
    let model = dec.model(1e-5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.svdphat");
    model.save(&path).unwrap();
    let loaded = SvdPhatModel::load(&path).unwrap();
    let frames = cross_spectra(&scene(&config, &grid, 17, Some(5.0), 8), &config).unwrap();
    for x in &frames {
        assert_eq!(loaded.localize(x).unwrap(), model.localize(x).unwrap());
    }
}

#[test]
fn silent_input_is_flagged_not_guessed() {
    let config = ArrayConfig::preset("3d").unwrap();
    let grid = ScanGrid::icosphere(1).unwrap();
    let w = SteeringMatrix::build(&config, &grid).unwrap();
    let model = SvdPhatModel::fit(&w, 1e-3).unwrap();
    let silence = vec![vec![0.0; 1024]; 7];
    for x in cross_spectra(&silence, &config).unwrap() {
        let e = model.localize(&x).unwrap();
        assert!(!e.valid);
        assert_eq!(e.energy, 0.0);
    }
    let zeros = CrossSpectrumVector::zeros(config.num_columns());
    assert!(!model.localize(&zeros).unwrap().valid);
}

#[test]
fn wrong_lengths_are_rejected() {
    let config = ArrayConfig::preset("3d").unwrap();
    let grid = ScanGrid::icosphere(1).unwrap();
    let w = SteeringMatrix::build(&config, &grid).unwrap();
    let model = SvdPhatModel::fit(&w, 1e-3).unwrap();
    let short = CrossSpectrumVector::zeros(10);
    assert!(model.localize(&short).is_err());
    assert!(srp_localize(&w, &short).is_err());
    assert!(cross_spectra(&vec![vec![0.0; 512]; 3], &config).is_err());
}
