//! Synthetic multiview data: `X_i = Z A_i + σ N_i`, optionally with appended
//! outlying columns `X_i = [Z A_i, O_i] + σ N_i`, dense or sparse-masked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix, ViewCollection};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    /// Outlying columns appended to each view.
    pub count: usize,
    /// Rescale `O_i` to the average per-entry power of `Z A_i`.
    pub matched_power: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Entities (rows).
    pub l: usize,
    /// Clean features per view.
    pub m: usize,
    /// Latent dimension.
    pub n: usize,
    /// Number of views.
    pub i: usize,
    pub sigma: f64,
    /// Target density; factors are masked before multiplication.
    pub rho: Option<f64>,
    pub outliers: Option<OutlierSpec>,
    pub seed: u64,
}

impl SynthConfig {
    /// `(L, M, N, I) = (500, 25, 20, 3)`, `σ = 0.1`.
    pub fn fig3(seed: u64) -> Self {
        SynthConfig {
            l: 500,
            m: 25,
            n: 20,
            i: 3,
            sigma: 0.1,
            rho: None,
            outliers: None,
            seed,
        }
    }

    /// `(L, M, N) = (150, 60, 60)`, 60 matched-power outlying columns, `σ = 1`, three views.
    pub fn table1(seed: u64) -> Self {
        SynthConfig {
            l: 150,
            m: 60,
            n: 60,
            i: 3,
            sigma: 1.0,
            rho: None,
            outliers: Some(OutlierSpec {
                count: 60,
                matched_power: true,
            }),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.m == 0 || self.i == 0 || self.n == 0 {
            return Err(Error::Parameter("L, M, N and I must all be positive".into()));
        }
        if self.n > self.l.min(self.m) {
            return Err(Error::Parameter(format!(
                "latent dimension N = {} exceeds min(L, M) = {}",
                self.n,
                self.l.min(self.m)
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::Parameter(format!("density must lie in (0, 1], got {rho}")));
            }
        }
        Ok(())
    }

    fn outlier_count(&self) -> usize {
        self.outliers.map_or(0, |o| o.count)
    }
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub views: ViewCollection,
    /// Per view, the clean column indices `S_iᶜ`.
    pub clean_cols: Vec<Vec<usize>>,
    /// Per view, the outlying column indices `S_i`.
    pub outlier_cols: Vec<Vec<usize>>,
    pub ground_truth_z: SparseMatrix,
    /// Per view `nnz / (L · M_i)`.
    pub realized_density: Vec<f64>,
}

fn view_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Gaussian entries at i.i.d. Bernoulli(`p`) positions, scaled by `scale`.
fn masked_gaussian(rows: usize, cols: usize, p: f64, scale: f64, rng: &mut ChaCha8Rng) -> Result<SparseMatrix> {
    let total = rows as u128 * cols as u128;
    let mut triplets = Vec::new();
    if p >= 1.0 {
        for r in 0..rows {
            for c in 0..cols {
                let v: f64 = StandardNormal.sample(rng);
                triplets.push((r, c, scale * v));
            }
        }
    } else if p > 0.0 {
        let skip = Geometric::new(p).map_err(|e| Error::Parameter(format!("mask rate {p}: {e}")))?;
        let mut pos: u128 = skip.sample(rng) as u128;
        while pos < total {
            let v: f64 = StandardNormal.sample(rng);
            triplets.push(((pos / cols as u128) as usize, (pos % cols as u128) as usize, scale * v));
            pos += 1 + skip.sample(rng) as u128;
        }
    }
    SparseMatrix::from_triplets(rows, cols, triplets)
}

/// Draws a dataset; identical configs give bitwise-identical output.
///
/// `Z` comes from stream 0 of the seeded generator and view `i` from stream
/// `i + 1`, so views are generated in parallel without affecting the result.
pub fn gen(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    match config.rho {
        None => gen_dense(config),
        Some(rho) => gen_sparse(config, rho),
    }
}

fn gen_dense(config: &SynthConfig) -> Result<SynthDataset> {
    let (l, m, n) = (config.l, config.m, config.n);
    let s = config.outlier_count();
    let z = gaussian(l, n, &mut view_rng(config.seed, 0));
    let mats = (0..config.i)
        .into_par_iter()
        .map(|i| {
            let mut rng = view_rng(config.seed, i as u64 + 1);
            let a = gaussian(n, m, &mut rng);
            let y = z.matmul(&a)?;
            let outliers = match config.outliers {
                Some(spec) if spec.count > 0 => {
                    let mut o = gaussian(l, s, &mut rng);
                    if spec.matched_power {
                        let target = y.frobenius_sq() / (l * m) as f64;
                        let current = o.frobenius_sq() / (l * s) as f64;
                        if current > 0.0 {
                            o.scale((target / current).sqrt());
                        }
                    }
                    Some(o)
                }
                _ => None,
            };
            let noise = gaussian(l, m + s, &mut rng);
            let x = DenseMatrix::from_fn(l, m + s, |r, c| {
                let signal = if c < m {
                    y[(r, c)]
                } else {
                    outliers.as_ref().map_or(0.0, |o| o[(r, c - m)])
                };
                signal + config.sigma * noise[(r, c)]
            });
            Ok(SparseMatrix::from_dense(&x))
        })
        .collect::<Result<Vec<_>>>()?;
    finish(config, mats, SparseMatrix::from_dense(&z))
}

fn gen_sparse(config: &SynthConfig, rho: f64) -> Result<SynthDataset> {
    let (l, m, n) = (config.l, config.m, config.n);
    let s = config.outlier_count();
    // P(entry of Z A is nonzero) ≈ N p², so p = sqrt(ρ / 2N) leaves ρ/2 for the noise
    let factor_rate = (rho / (2.0 * n as f64)).sqrt().min(1.0);
    let noise_rate = if config.sigma > 0.0 { rho / 2.0 } else { 0.0 };
    let z = masked_gaussian(l, n, factor_rate, 1.0, &mut view_rng(config.seed, 0))?;
    let mats = (0..config.i)
        .into_par_iter()
        .map(|i| {
            let mut rng = view_rng(config.seed, i as u64 + 1);
            let a = masked_gaussian(n, m, factor_rate, 1.0, &mut rng)?;
            let y = z.mul_sparse(&a)?;
            let signal = match config.outliers {
                Some(spec) if spec.count > 0 => {
                    let mut o = masked_gaussian(l, s, rho, 1.0, &mut rng)?;
                    if spec.matched_power && o.nnz() > 0 {
                        let target = y.frobenius_sq() / (l * m) as f64;
                        let current = o.frobenius_sq() / (l * s) as f64;
                        let k = (target / current).sqrt();
                        o.values_mut().iter_mut().for_each(|v| *v *= k);
                    }
                    y.hstack(&o)?
                }
                _ => y,
            };
            let noise = masked_gaussian(l, m + s, noise_rate, config.sigma, &mut rng)?;
            signal.add(&noise)
        })
        .collect::<Result<Vec<_>>>()?;
    finish(config, mats, z)
}

fn finish(config: &SynthConfig, mats: Vec<SparseMatrix>, z: SparseMatrix) -> Result<SynthDataset> {
    let m = config.m;
    let s = config.outlier_count();
    let realized_density = mats.iter().map(|x| x.density()).collect();
    Ok(SynthDataset {
        config: config.clone(),
        views: ViewCollection::from_matrices(mats)?,
        clean_cols: vec![(0..m).collect(); config.i],
        outlier_cols: vec![(m..m + s).collect(); config.i],
        ground_truth_z: z,
        realized_density,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetrics {
    /// `(1/I) Σ_i ‖X_i(:,S_iᶜ) Q_i(S_iᶜ,:) − G‖_F²`
    pub metric1: f64,
    /// `(1/I) Σ_i ‖X_i(:,S_i) Q_i(S_i,:)‖_F²`
    pub metric2: f64,
    /// Per view, mean row norm of `Q_i` over clean rows.
    pub clean_row_norm: Vec<f64>,
    /// Per view, mean row norm of `Q_i` over outlying rows (0 when there are none).
    pub outlier_row_norm: Vec<f64>,
}

/// Mean of `‖Q(r,:)‖_2` over `rows`; zero for an empty set.
pub fn average_row_norm(q: &DenseMatrix, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter()
        .map(|&r| q.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum::<f64>()
        / rows.len() as f64
}

fn keep_rows(q: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(q.rows(), q.cols());
    for &r in rows {
        out.row_mut(r).copy_from_slice(q.row(r));
    }
    out
}

/// Matching (`metric₁`) and suppression (`metric₂`) scores for the given
/// column partition.
pub fn feature_metrics_for(
    views: &ViewCollection,
    clean_cols: &[Vec<usize>],
    outlier_cols: &[Vec<usize>],
    q: &[DenseMatrix],
    g: &DenseMatrix,
) -> Result<FeatureMetrics> {
    let n = views.len();
    if q.len() != n || clean_cols.len() != n || outlier_cols.len() != n {
        return Err(Error::Parameter(format!(
            "expected {n} Q blocks and index sets, got {}, {} and {}",
            q.len(),
            clean_cols.len(),
            outlier_cols.len()
        )));
    }
    if g.rows() != views.rows() {
        return Err(Error::shape("feature_metrics", format!("G with {} rows", views.rows()), format!("{} rows", g.rows())));
    }
    let mut metric1 = 0.0;
    let mut metric2 = 0.0;
    let mut clean_row_norm = Vec::with_capacity(n);
    let mut outlier_row_norm = Vec::with_capacity(n);
    for (i, v) in views.iter().enumerate() {
        let qi = &q[i];
        if qi.shape() != (v.cols(), g.cols()) {
            return Err(Error::shape(
                "feature_metrics",
                format!("Q_{i} {}x{}", v.cols(), g.cols()),
                format!("{}x{}", qi.rows(), qi.cols()),
            ));
        }
        let (clean, out) = (&clean_cols[i], &outlier_cols[i]);
        if let Some(&bad) = clean.iter().chain(out.iter()).find(|&&c| c >= v.cols()) {
            return Err(Error::Parameter(format!("column index {bad} out of range for view {i}")));
        }
        metric1 += v.matrix.mul_dense(&keep_rows(qi, clean))?.dist_sq(g)?;
        if !out.is_empty() {
            metric2 += v.matrix.mul_dense(&keep_rows(qi, out))?.frobenius_sq();
        }
        clean_row_norm.push(average_row_norm(qi, clean));
        outlier_row_norm.push(average_row_norm(qi, out));
    }
    Ok(FeatureMetrics {
        metric1: metric1 / n as f64,
        metric2: metric2 / n as f64,
        clean_row_norm,
        outlier_row_norm,
    })
}

pub fn feature_metrics(dataset: &SynthDataset, q: &[DenseMatrix], g: &DenseMatrix) -> Result<FeatureMetrics> {
    feature_metrics_for(&dataset.views, &dataset.clean_cols, &dataset.outlier_cols, q, g)
}

/// A uniformly random permutation of `0..n`, for shuffling fixtures.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}
