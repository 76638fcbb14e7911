//! Steering matrix and the exhaustive SRP-PHAT baseline.

use num_complex::Complex64;

use crate::geometry::{farfield_unchecked, ArrayConfig, ScanGrid};
use crate::spectral::CrossSpectrumVector;
use crate::{Error, Result, Vec3};

/// Default ceiling on steering-matrix storage (2 GiB).
pub const DEFAULT_MEMORY_CAP: u64 = 2 << 30;

/// One localization result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaEstimate {
    /// STFT frame the estimate belongs to.
    pub frame: usize,
    /// Zero-based grid index of the selected direction.
    pub index: usize,
    pub direction: Vec3,
    /// SRP-PHAT energy `Y` of the selected direction.
    pub energy: f64,
    /// False when the observation carried no usable phase (all-zero input).
    pub valid: bool,
}

impl DoaEstimate {
    pub fn with_frame(mut self, frame: usize) -> Self {
        self.frame = frame;
        self
    }
}

/// The `Q x P(N/2+1)` matrix of steering coefficients, stored row-major.
///
/// Entry `(q; i, j, k)` is `exp(+2 pi sqrt(-1) k tau_{q,i,j} / N)` where `tau`
/// is the farfield TDOA of grid point `q` for pair `(i, j)`.
#[derive(Debug, Clone)]
pub struct SteeringMatrix {
    config: ArrayConfig,
    grid: ScanGrid,
    tdoas: Vec<f64>,
    data: Vec<Complex64>,
}

impl SteeringMatrix {
    pub fn build(config: &ArrayConfig, grid: &ScanGrid) -> Result<Self> {
        Self::build_with_cap(config, grid, DEFAULT_MEMORY_CAP)
    }

    /// Like [`build`](Self::build) with an explicit storage ceiling in bytes.
    pub fn build_with_cap(config: &ArrayConfig, grid: &ScanGrid, cap: u64) -> Result<Self> {
        let rows = grid.len();
        let cols = config.num_columns();
        let required = (rows as u64)
            .saturating_mul(cols as u64)
            .saturating_mul(std::mem::size_of::<Complex64>() as u64);
        if required > cap {
            return Err(Error::MemoryCap {
                rows,
                cols,
                required,
                cap,
            });
        }
        let tdoas = tdoa_table(config, grid);
        let pairs = config.num_pairs();
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        for (q, row) in data.chunks_exact_mut(cols).enumerate() {
            fill_row(&tdoas[q * pairs..(q + 1) * pairs], config.frame_size(), row);
        }
        Ok(SteeringMatrix {
            config: config.clone(),
            grid: grid.clone(),
            tdoas,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.grid.len()
    }

    pub fn cols(&self) -> usize {
        self.config.num_columns()
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.config
    }

    pub fn grid(&self) -> &ScanGrid {
        &self.grid
    }

    /// Farfield TDOAs in samples, `Q x P` row-major.
    pub fn tdoas(&self) -> &[f64] {
        &self.tdoas
    }

    pub fn row(&self, q: usize) -> &[Complex64] {
        let cols = self.cols();
        &self.data[q * cols..(q + 1) * cols]
    }

    /// Whole matrix, row-major.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `Tr{W W^H}`, the squared Frobenius norm.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum()
    }

    /// The observation that row `q` matches perfectly: its complex conjugate.
    pub fn matched_observation(&self, q: usize) -> CrossSpectrumVector {
        CrossSpectrumVector::from_vec(self.row(q).iter().map(Complex64::conj).collect())
    }

    /// `Y_q = Re{W_q . X}` for a single row.
    pub fn energy(&self, q: usize, x: &CrossSpectrumVector) -> Result<f64> {
        self.check_len(x)?;
        Ok(real_dot(self.row(q), x.as_slice()))
    }

    fn check_len(&self, x: &CrossSpectrumVector) -> Result<()> {
        if x.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                what: "cross-spectrum length",
                expected: self.cols(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// Farfield TDOA of every grid point and pair, `Q x P` row-major.
pub fn tdoa_table(config: &ArrayConfig, grid: &ScanGrid) -> Vec<f64> {
    let pairs: Vec<_> = config.pairs().collect();
    grid.points()
        .iter()
        // + 0.0 folds -0.0 into 0.0 so that equal delays have equal bits
        .flat_map(|&u| pairs.iter().map(move |&p| farfield_unchecked(config, u, p) + 0.0))
        .collect()
}

/// Writes one steering row from its `P` TDOAs.
pub(crate) fn fill_row(tdoas: &[f64], frame_size: usize, row: &mut [Complex64]) {
    let bins = frame_size / 2 + 1;
    let n = frame_size as f64;
    for (chunk, &tau) in row.chunks_exact_mut(bins).zip(tdoas) {
        for (k, w) in chunk.iter_mut().enumerate() {
            *w = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 * tau / n);
        }
    }
}

/// `Re{sum_c a_c b_c}` with a fixed accumulation order.
///
/// Both localizers compute energies through this function so that their
/// values agree bit for bit.
pub(crate) fn real_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l].re * y[l].re - x[l].im * y[l].im;
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x.re * y.re - x.im * y.im)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `Y = Re{W X}`, the energy of every candidate direction.
pub fn srp_energy_map(w: &SteeringMatrix, x: &CrossSpectrumVector) -> Result<Vec<f64>> {
    w.check_len(x)?;
    let cols = w.cols();
    Ok(w.data
        .chunks_exact(cols)
        .map(|row| real_dot(row, x.as_slice()))
        .collect())
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (q, &y) in values.iter().enumerate() {
        if best.map_or(true, |(_, b)| y > b) {
            best = Some((q, y));
        }
    }
    best.map(|(q, _)| q)
}

/// Exhaustive SRP-PHAT: the grid direction with the highest energy.
pub fn srp_localize(w: &SteeringMatrix, x: &CrossSpectrumVector) -> Result<DoaEstimate> {
    let energies = srp_energy_map(w, x)?;
    let index = argmax(&energies).expect("grid is never empty");
    Ok(DoaEstimate {
        frame: 0,
        index,
        direction: w.grid.point(index),
        energy: energies[index],
        valid: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MicPair, ScanGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> (ArrayConfig, ScanGrid) {
        (ArrayConfig::preset("3d").unwrap(), ScanGrid::icosphere(2).unwrap())
    }

    fn random_phat(len: usize, seed: u64) -> CrossSpectrumVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CrossSpectrumVector::from_vec(
            (0..len)
                .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect(),
        )
    }

    /// Scalar triple sum over pairs and bins, straight from the definition.
    fn scalar_energy(config: &ArrayConfig, direction: Vec3, x: &CrossSpectrumVector) -> f64 {
        let n = config.frame_size();
        let bins = config.num_bins();
        let mut y = 0.0;
        for (p, pair) in config.pairs().enumerate() {
            let tau = crate::geometry::tdoa_farfield(config, direction, pair).unwrap();
            for k in 0..bins {
                let w = Complex64::new(0.0, 2.0 * std::f64::consts::PI * k as f64 * tau / n as f64).exp();
                y += (w * x[p * bins + k]).re;
            }
        }
        y
    }

    #[test]
    fn dimensions_for_table_parameters() {
        let config = ArrayConfig::preset("1d").unwrap();
        assert_eq!(config.num_pairs(), 21);
        assert_eq!(config.num_bins(), 129);
        // memory cap check reports the full-size shape without allocating it
        let err = SteeringMatrix::build_with_cap(&config, &ScanGrid::default_grid(), 1).unwrap_err();
        match err {
            Error::MemoryCap { rows, cols, required, .. } => {
                assert_eq!((rows, cols), (2562, 2709));
                assert_eq!(required, 2562 * 2709 * 16);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(err_message_mentions_cap(&config));
    }

    fn err_message_mentions_cap(config: &ArrayConfig) -> bool {
        let e = SteeringMatrix::build_with_cap(config, &ScanGrid::icosphere(0).unwrap(), 10).unwrap_err();
        e.to_string().contains("cap")
    }

    #[test]
    fn structural_entries() {
        let (config, grid) = small();
        let w = SteeringMatrix::build(&config, &grid).unwrap();
        assert_eq!((w.rows(), w.cols()), (162, 2709));
        for q in 0..w.rows() {
            let row = w.row(q);
            assert!(row.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            for p in 0..21 {
                assert_eq!(row[p * 129], Complex64::new(1.0, 0.0));
            }
        }
        // broadside: pair (1,2) of the 3-D array lies on x, so direction z is orthogonal
        let up = ScanGrid::from_points(vec![[0.0, 0.0, 1.0]]).unwrap();
        let w = SteeringMatrix::build(&config, &up).unwrap();
        let ordinal = MicPair::new(1, 2).unwrap().ordinal(7);
        for k in 0..129 {
            let z = w.row(0)[ordinal * 129 + k];
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn matrix_form_matches_scalar_sum() {
        let (config, grid) = small();
        let w = SteeringMatrix::build(&config, &grid).unwrap();
        for seed in 0..3 {
            let x = random_phat(w.cols(), seed);
            let y = srp_energy_map(&w, &x).unwrap();
            for q in (0..grid.len()).step_by(7) {
                let s = scalar_energy(&config, grid.point(q), &x);
                assert!((y[q] - s).abs() <= 1e-9 * s.abs().max(1.0), "q={q}: {} vs {s}", y[q]);
                assert_eq!(w.energy(q, &x).unwrap(), y[q]);
            }
        }
    }

    #[test]
    fn self_match_and_upper_bound() {
        let (config, grid) = small();
        let w = SteeringMatrix::build(&config, &grid).unwrap();
        let bound = w.cols() as f64;
        for q in 0..grid.len() {
            let x = w.matched_observation(q);
            let est = srp_localize(&w, &x).unwrap();
            assert_eq!(est.index, q);
            assert!((est.energy - bound).abs() < 1e-9);
            assert_eq!(est.direction, grid.point(q));
        }
        for seed in 0..5 {
            let y = srp_energy_map(&w, &random_phat(w.cols(), seed)).unwrap();
            assert!(y.iter().all(|&v| v <= bound * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn zero_observation_and_ties() {
        let (config, grid) = small();
        let w = SteeringMatrix::build(&config, &grid).unwrap();
        let y = srp_energy_map(&w, &CrossSpectrumVector::zeros(w.cols())).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        // everything ties at zero: lowest index
        assert_eq!(srp_localize(&w, &CrossSpectrumVector::zeros(w.cols())).unwrap().index, 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax(&[]), None);
        assert!(matches!(
            srp_energy_map(&w, &CrossSpectrumVector::zeros(5)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sign_convention_on_integer_delay() {
        // exhaustive integer-lag scan over a single pair: the peak must sit at
        // tau = -d when channel j lags channel i by d samples
        let config = ArrayConfig::new(vec![[0.0; 3], [0.2, 0.0, 0.0]], 16000.0, 343.0, 256, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base: Vec<f64> = (0..4100).map(|_| rng.random_range(-1.0..1.0)).collect();
        for d in [1usize, 4, 7] {
            let xi = base[d..d + 4000].to_vec();
            let xj = base[..4000].to_vec();
            let spectra = crate::spectral::cross_spectra(&[xi, xj], &config).unwrap();
            let scores: Vec<f64> = (-10..=10)
                .map(|tau| {
                    let mut row = vec![Complex64::new(0.0, 0.0); 129];
                    fill_row(&[tau as f64], 256, &mut row);
                    spectra.iter().map(|x| real_dot(&row, x.as_slice())).sum()
                })
                .collect();
            let best = argmax(&scores).unwrap() as i64 - 10;
            assert_eq!(best, -(d as i64));
        }
    }
}
