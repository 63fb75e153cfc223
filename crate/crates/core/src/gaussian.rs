//! Shot-noise-normalized Gaussian machinery.
//!
//! Every variance in this crate is expressed in units of the vacuum
//! (shot-noise) variance `n0`. Random draws are produced in fixed-size
//! blocks, each block driven by its own ChaCha8 stream, so a batch is a pure
//! function of `(seed, n)` no matter how many rayon workers produce it.
//!
//! Conditional variances follow the zero-mean convention used throughout:
//! `V(Y|X) = <Y^2> - <XY>^2 / <X^2>` with raw (uncentered) moments.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Number of draws produced by one RNG stream.
pub const BLOCK_LEN: usize = 1 << 16;

/// Vacuum fluctuation variance; the unit of every variance-valued quantity.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShotNoise {
    n0: f64,
}

impl ShotNoise {
    pub fn new(n0: f64) -> Result<Self> {
        if !(n0.is_finite() && n0 > 0.0) {
            return Err(Error::domain(format!(
                "shot noise n0 must be positive, got {n0}"
            )));
        }
        Ok(Self { n0 })
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    /// Converts a variance in shot-noise units into absolute units.
    pub fn to_absolute(&self, variance_in_units: f64) -> f64 {
        variance_in_units * self.n0
    }

    /// Converts an absolute variance into shot-noise units.
    pub fn to_units(&self, absolute_variance: f64) -> f64 {
        absolute_variance / self.n0
    }
}

impl Default for ShotNoise {
    fn default() -> Self {
        Self { n0: 1.0 }
    }
}

/// Scalar linear predictor `y ≈ coefficient * x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LinearEstimator {
    pub coefficient: f64,
}

impl LinearEstimator {
    pub fn predict(&self, x: f64) -> f64 {
        self.coefficient * x
    }

    /// Mean squared error of this estimator on the given data.
    pub fn residual_variance(&self, predictor: &[f64], target: &[f64]) -> Result<f64> {
        check_lengths(predictor, target, 1)?;
        let sum: f64 = predictor
            .iter()
            .zip(target)
            .map(|(&x, &y)| {
                let r = y - self.coefficient * x;
                r * r
            })
            .sum();
        Ok(sum / target.len() as f64)
    }
}

/// Columnar record of quadrature realizations. All columns share one length.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    columns: IndexMap<String, Vec<f64>>,
    seed: u64,
    len: usize,
}

impl SampleBatch {
    pub fn new(seed: u64) -> Self {
        Self {
            columns: IndexMap::new(),
            seed,
            len: 0,
        }
    }

    /// Adds (or replaces) a column. The first column fixes the batch length.
    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if !self.columns.is_empty() && values.len() != self.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: values.len(),
            });
        }
        self.len = values.len();
        self.columns.insert(name.into(), values);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.insert(name, values)?;
        Ok(self)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// New batch holding only the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut out = SampleBatch::new(self.seed);
        if indices.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        for (name, values) in &self.columns {
            let picked = indices
                .iter()
                .map(|&i| {
                    values.get(i).copied().ok_or_else(|| {
                        Error::domain(format!("row index {i} out of range for {} rows", self.len))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            out.insert(name.clone(), picked)?;
        }
        Ok(out)
    }

    /// Writes the batch as CSV: one header row of column names, then one row per sample.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.keys())?;
        let mut row: Vec<String> = Vec::with_capacity(self.columns.len());
        for i in 0..self.len {
            row.clear();
            row.extend(self.columns.values().map(|c| c[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for a named sub-stream of `seed`.
///
/// Used to give each column of a batch its own random source.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// `n` i.i.d. zero-mean Gaussian draws of the given variance (shot-noise units).
pub fn sample_gaussian(variance: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(Error::domain(format!(
            "variance must be finite and non-negative, got {variance}"
        )));
    }
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if variance == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let sigma = variance.sqrt();
    let mut out = vec![0.0; n];
    out.par_chunks_mut(BLOCK_LEN)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = block_rng(seed, block);
            for v in chunk.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = sigma * z;
            }
        });
    Ok(out)
}

/// `n` fair coin flips, block-parallel like [`sample_gaussian`].
pub fn sample_bits(n: usize, seed: u64) -> Result<Vec<bool>> {
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut out = vec![false; n];
    out.par_chunks_mut(BLOCK_LEN)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = block_rng(seed, block);
            for b in chunk.iter_mut() {
                *b = rng.random::<bool>();
            }
        });
    Ok(out)
}

/// Sorted sample of `k` distinct indices from `0..n`, a pure function of `seed`.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::domain(format!("cannot pick {k} of {n} indices")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn check_lengths(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < min {
        return Err(Error::InsufficientSamples {
            needed: min,
            got: a.len(),
        });
    }
    Ok(())
}

/// Raw second moment `<x^2>`.
pub fn second_moment(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Raw cross moment `<xy>`. Slices must have equal length.
pub fn cross_moment(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / x.len() as f64
}

/// Best scalar linear estimate of `target` from `predictor` and its residual
/// variance, `min_c <(target - c * predictor)^2>`.
///
/// A predictor that is identically zero carries no information: the result is
/// `<target^2>` with coefficient 0.
pub fn empirical_conditional_variance(
    predictor: &[f64],
    target: &[f64],
) -> Result<(f64, LinearEstimator)> {
    check_lengths(predictor, target, 2)?;
    let sxx: f64 = predictor.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Ok((second_moment(target), LinearEstimator { coefficient: 0.0 }));
    }
    let sxy: f64 = predictor.iter().zip(target).map(|(a, b)| a * b).sum();
    let estimator = LinearEstimator {
        coefficient: sxy / sxx,
    };
    // Residual computed directly rather than as <y^2> - <xy>^2/<x^2>; exact zero
    // for target == predictor.
    let variance = estimator.residual_variance(predictor, target)?;
    Ok((variance, estimator))
}

/// Residual variance of the least-squares projection of `target` onto the
/// span of `predictors`.
///
/// The normal equations carry a ridge term `1e-12 * trace(Gram) / k` so that
/// collinear predictor sets still solve.
pub fn empirical_conditional_variance_multi(predictors: &[&[f64]], target: &[f64]) -> Result<f64> {
    let coefs = least_squares(predictors, target)?;
    let n = target.len();
    let mut sum = 0.0;
    for i in 0..n {
        let fit: f64 = predictors.iter().zip(&coefs).map(|(p, c)| c * p[i]).sum();
        let r = target[i] - fit;
        sum += r * r;
    }
    Ok(sum / n as f64)
}

/// Ridge-regularized least-squares coefficients for `target ≈ Σ c_j predictors[j]`.
pub fn least_squares(predictors: &[&[f64]], target: &[f64]) -> Result<Vec<f64>> {
    if target.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: target.len(),
        });
    }
    for p in predictors {
        check_lengths(p, target, 2)?;
    }
    let k = predictors.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..=i {
            let g = cross_moment(predictors[i], predictors[j]);
            gram[i * k + j] = g;
            gram[j * k + i] = g;
        }
        rhs[i] = cross_moment(predictors[i], target);
    }
    let trace: f64 = (0..k).map(|i| gram[i * k + i]).sum();
    if trace == 0.0 {
        return Ok(vec![0.0; k]);
    }
    let ridge = 1e-12 * trace / k as f64;
    for i in 0..k {
        gram[i * k + i] += ridge;
    }
    Ok(cholesky_solve(&mut gram, &mut rhs, k))
}

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, overwritten).
fn cholesky_solve(a: &mut [f64], b: &mut [f64], k: usize) -> Vec<f64> {
    for j in 0..k {
        let mut d = a[j * k + j];
        for m in 0..j {
            d -= a[j * k + m] * a[j * k + m];
        }
        // The ridge keeps d > 0 up to round-off.
        let d = d.max(f64::MIN_POSITIVE).sqrt();
        a[j * k + j] = d;
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for m in 0..j {
                s -= a[i * k + m] * a[j * k + m];
            }
            a[i * k + j] = s / d;
        }
    }
    for i in 0..k {
        let mut s = b[i];
        for m in 0..i {
            s -= a[i * k + m] * b[m];
        }
        b[i] = s / a[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = b[i];
        for m in (i + 1)..k {
            s -= a[m * k + i] * b[m];
        }
        b[i] = s / a[i * k + i];
    }
    b.to_vec()
}

/// Mutual information `½·log2(signal / conditional)` in bits per symbol.
///
/// An infinite conditional variance (a party that learns nothing) yields
/// `-inf`; an infinite signal yields `+inf`.
pub fn shannon_rate(signal_variance: f64, conditional_variance: f64) -> Result<f64> {
    if !(signal_variance > 0.0) || !(conditional_variance > 0.0) {
        return Err(Error::domain(format!(
            "Shannon rate needs positive variances, got signal={signal_variance}, conditional={conditional_variance}"
        )));
    }
    if signal_variance.is_infinite() && conditional_variance.is_infinite() {
        return Err(Error::domain(
            "Shannon rate of two infinite variances is undefined",
        ));
    }
    Ok(0.5 * (signal_variance / conditional_variance).log2())
}

/// Standard error of a Gaussian variance estimate from `n` samples,
/// `variance * sqrt(2 / n)`.
pub fn variance_standard_error(variance: f64, n: usize) -> f64 {
    variance * (2.0 / n as f64).sqrt()
}

/// Product-moment statistic `<xy>` of one sample with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub n: usize,
}

impl MomentEstimate {
    pub fn from_samples(x: &[f64], y: &[f64]) -> Result<Self> {
        check_lengths(x, y, 2)?;
        let n = x.len() as f64;
        let mean = cross_moment(x, y);
        let var = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let d = a * b - mean;
                d * d
            })
            .sum::<f64>()
            / (n - 1.0);
        Ok(Self {
            value: mean,
            standard_error: (var / n).sqrt(),
            n: x.len(),
        })
    }

    /// Two-sample z-score of the difference between two independent estimates.
    pub fn z_score(&self, other: &MomentEstimate) -> f64 {
        let se = self.standard_error.hypot(other.standard_error);
        if se == 0.0 {
            if self.value == other.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - other.value) / se
        }
    }
}
