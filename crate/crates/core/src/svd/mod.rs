//! Offline factorization of the steering matrix and online SVD-PHAT localization.
//!
//! Offline, `W ~ U S V^H` is truncated to the smallest rank `K` whose singular
//! energy covers a `1 - delta` share of `Tr{W W^H}`. The rows of `D = U S` are
//! normalized and indexed with a k-d tree.
//!
//! Online, an observation `X` is projected to `Z = V^H X`. For unit vectors,
//! `Re{D̂_q Ẑ} = 1 - |D̂_q - conj(Ẑ)|^2 / 2`, so the best direction is the
//! nearest dictionary row to `conj(Ẑ)`. Its energy is then evaluated exactly
//! from the matching steering row.

mod file;

use std::collections::HashMap;

use faer::Mat;
use num_complex::Complex64;

use crate::geometry::{ArrayConfig, ScanGrid};
use crate::nn_index::{NnIndex, SearchStats, DEFAULT_LEAF_SIZE};
use crate::spectral::CrossSpectrumVector;
use crate::srp::{fill_row, real_dot, DoaEstimate, SteeringMatrix};
use crate::{Error, Result};

pub use file::{MODEL_MAGIC, MODEL_VERSION};

/// Checks `0 < delta < 1`.
pub fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "delta must lie strictly between 0 and 1, got {delta}"
        )))
    }
}

/// Smallest `K` with `sum_{k<=K} sigma_k^2 >= (1 - delta) * total_energy`.
///
/// `singular_values` must be sorted in decreasing order. Returns the full
/// length when rounding keeps the cumulative sum just below the target.
pub fn rank_for_delta(singular_values: &[f64], total_energy: f64, delta: f64) -> usize {
    let target = (1.0 - delta) * total_energy;
    let mut acc = 0.0;
    for (k, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc >= target {
            return k + 1;
        }
    }
    singular_values.len().max(1)
}

/// A truncated SVD of a steering matrix, kept to serve every `delta` down to
/// the one it was computed for.
///
/// Holds all singular values but only the leading `max_rank` columns of
/// `U S` and `V`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    config: ArrayConfig,
    grid: ScanGrid,
    tdoas: Vec<f64>,
    singular_values: Vec<f64>,
    total_energy: f64,
    max_rank: usize,
    // Q x max_rank, row-major
    scaled_left: Vec<Complex64>,
    // max_rank x cols, row k is the conjugate of column k of V
    basis: Vec<Complex64>,
}

impl Decomposition {
    /// Factorizes `w`, keeping enough columns for any tolerance `>= min_delta`.
    pub fn compute(w: &SteeringMatrix, min_delta: f64) -> Result<Self> {
        check_delta(min_delta)?;
        let (rows, cols) = (w.rows(), w.cols());
        let data = w.as_slice();
        let mat = Mat::<Complex64>::from_fn(rows, cols, |i, j| data[i * cols + j]);
        let svd = mat
            .thin_svd()
            .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
        drop(mat);
        let s = svd.S().column_vector();
        let singular_values: Vec<f64> = (0..s.nrows()).map(|k| s[k].re).collect();
        if singular_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Decomposition("non-finite singular value".into()));
        }
        let total_energy = w.frobenius_norm_sq();
        let max_rank = rank_for_delta(&singular_values, total_energy, min_delta);

        let u = svd.U();
        let v = svd.V();
        let mut scaled_left = Vec::with_capacity(rows * max_rank);
        for q in 0..rows {
            scaled_left.extend((0..max_rank).map(|k| u[(q, k)] * singular_values[k]));
        }
        // Directions the array cannot tell apart have identical steering rows.
        // Give them identical dictionary rows too, so the search breaks the
        // tie toward the lowest index just like the exhaustive scan.
        let pairs = w.config().num_pairs();
        let mut first_seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for q in 0..rows {
            let key = w.tdoas()[q * pairs..(q + 1) * pairs].iter().map(|t| t.to_bits()).collect();
            let first = *first_seen.entry(key).or_insert(q);
            if first != q {
                scaled_left.copy_within(first * max_rank..(first + 1) * max_rank, q * max_rank);
            }
        }
        let mut basis = Vec::with_capacity(max_rank * cols);
        for k in 0..max_rank {
            basis.extend((0..cols).map(|c| v[(c, k)].conj()));
        }
        Ok(Decomposition {
            config: w.config().clone(),
            grid: w.grid().clone(),
            tdoas: w.tdoas().to_vec(),
            singular_values,
            total_energy,
            max_rank,
            scaled_left,
            basis,
        })
    }

    /// All `min(Q, P(N/2+1))` singular values, decreasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `Tr{W W^H}`, computed directly from the matrix entries.
    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    /// Largest rank this decomposition can hand out.
    pub fn max_rank(&self) -> usize {
        self.max_rank
    }

    pub fn rank_for(&self, delta: f64) -> Result<usize> {
        check_delta(delta)?;
        Ok(rank_for_delta(&self.singular_values, self.total_energy, delta))
    }

    /// Builds the model for `delta` (normalized dictionary plus k-d tree).
    pub fn model(&self, delta: f64) -> Result<SvdPhatModel> {
        self.model_with_leaf_size(delta, DEFAULT_LEAF_SIZE)
    }

    pub fn model_with_leaf_size(&self, delta: f64, leaf_size: usize) -> Result<SvdPhatModel> {
        let rank = self.rank_for(delta)?;
        if rank > self.max_rank {
            return Err(Error::InvalidArgument(format!(
                "delta {delta} needs rank {rank}, but only {} columns were kept",
                self.max_rank
            )));
        }
        let q = self.grid.len();
        let cols = self.config.num_columns();
        let mut dictionary = Vec::with_capacity(q * rank);
        let mut row_norms = Vec::with_capacity(q);
        for row in self.scaled_left.chunks_exact(self.max_rank) {
            let row = &row[..rank];
            let norm = row.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Decomposition(
                    "a grid direction has no energy in the retained subspace".into(),
                ));
            }
            dictionary.extend(row.iter().map(|z| z / norm));
            row_norms.push(norm);
        }
        let index = NnIndex::with_leaf_size(&dictionary, rank, leaf_size)?;
        Ok(SvdPhatModel {
            config: self.config.clone(),
            grid: self.grid.clone(),
            tdoas: self.tdoas.clone(),
            delta,
            rank,
            singular_values: self.singular_values[..rank].to_vec(),
            total_energy: self.total_energy,
            basis: self.basis[..rank * cols].to_vec(),
            dictionary,
            row_norms,
            index,
        })
    }
}

/// Projection of one observation onto the retained subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `Z = V^H X`.
    pub z: Vec<Complex64>,
    pub norm: f64,
    /// `Z / |Z|`, absent when `Z` is zero.
    pub unit: Option<Vec<Complex64>>,
}

impl Projection {
    pub fn is_degenerate(&self) -> bool {
        self.unit.is_none()
    }
}

/// A fitted SVD-PHAT localizer. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdPhatModel {
    config: ArrayConfig,
    grid: ScanGrid,
    // Q x P farfield TDOAs; any steering row can be regenerated from these
    tdoas: Vec<f64>,
    delta: f64,
    rank: usize,
    singular_values: Vec<f64>,
    total_energy: f64,
    basis: Vec<Complex64>,
    dictionary: Vec<Complex64>,
    row_norms: Vec<f64>,
    index: NnIndex,
}

impl SvdPhatModel {
    /// Offline stage: factorize `w` and index the normalized dictionary.
    pub fn fit(w: &SteeringMatrix, delta: f64) -> Result<Self> {
        Decomposition::compute(w, delta)?.model(delta)
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.config
    }

    pub fn grid(&self) -> &ScanGrid {
        &self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Retained rank `K`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Row-count reduction `Q / K` of the online product.
    pub fn gain(&self) -> f64 {
        self.grid.len() as f64 / self.rank as f64
    }

    /// The `K` retained singular values.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `Tr{W W^H}` of the matrix the model was fitted on.
    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    /// `|D_q|` before normalization, one per grid point.
    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    /// Unit-norm dictionary row `D̂_q`.
    pub fn dictionary_row(&self, q: usize) -> &[Complex64] {
        &self.dictionary[q * self.rank..(q + 1) * self.rank]
    }

    /// Column `k` of `V`.
    pub fn basis_vector(&self, k: usize) -> Vec<Complex64> {
        let cols = self.config.num_columns();
        self.basis[k * cols..(k + 1) * cols].iter().map(Complex64::conj).collect()
    }

    pub fn index(&self) -> &NnIndex {
        &self.index
    }

    /// `max_q |D_q| / min_q |D_q|`.
    pub fn norm_spread(&self) -> f64 {
        let max = self.row_norms.iter().cloned().fold(0.0, f64::max);
        let min = self.row_norms.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// `Z = V^H X`.
    pub fn project(&self, x: &CrossSpectrumVector) -> Result<Projection> {
        let cols = self.config.num_columns();
        if x.len() != cols {
            return Err(Error::DimensionMismatch {
                what: "cross-spectrum length",
                expected: cols,
                actual: x.len(),
            });
        }
        let x = x.as_slice();
        let z: Vec<Complex64> = self
            .basis
            .chunks_exact(cols)
            .map(|row| complex_dot(row, x))
            .collect();
        let norm = z.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        let unit = (norm > 0.0 && norm.is_finite()).then(|| z.iter().map(|v| v / norm).collect());
        Ok(Projection { z, norm, unit })
    }

    /// Online stage: projection, nearest-neighbor search, exact energy.
    pub fn localize(&self, x: &CrossSpectrumVector) -> Result<DoaEstimate> {
        self.localize_with_stats(x).map(|(e, _)| e)
    }

    pub fn localize_with_stats(&self, x: &CrossSpectrumVector) -> Result<(DoaEstimate, SearchStats)> {
        let projection = self.project(x)?;
        let Some(unit) = projection.unit else {
            return Ok((
                DoaEstimate {
                    frame: 0,
                    index: 0,
                    direction: self.grid.point(0),
                    energy: 0.0,
                    valid: false,
                },
                SearchStats::default(),
            ));
        };
        let query: Vec<Complex64> = unit.iter().map(Complex64::conj).collect();
        let (neighbor, stats) = self.index.nearest_with_stats(&query)?;
        let q = neighbor.index;
        Ok((
            DoaEstimate {
                frame: 0,
                index: q,
                direction: self.grid.point(q),
                energy: self.energy(q, x)?,
                valid: true,
            },
            stats,
        ))
    }

    /// Exact `Y_q = Re{W_q . X}` from a regenerated steering row.
    pub fn energy(&self, q: usize, x: &CrossSpectrumVector) -> Result<f64> {
        let cols = self.config.num_columns();
        if x.len() != cols {
            return Err(Error::DimensionMismatch {
                what: "cross-spectrum length",
                expected: cols,
                actual: x.len(),
            });
        }
        let pairs = self.config.num_pairs();
        let mut row = vec![Complex64::new(0.0, 0.0); cols];
        fill_row(&self.tdoas[q * pairs..(q + 1) * pairs], self.config.frame_size(), &mut row);
        Ok(real_dot(&row, x.as_slice()))
    }
}

fn complex_dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    Complex64::new(re, im)
}
