//! The naive two-step baseline: fit a VAR to every series independently,
//! then cluster the vectorized coefficient matrices with k-means
//! (k-means++ seeding). Also provides the representative-selection step
//! used to initialize the hard-clustering algorithm.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::TimeSeriesSet;
use crate::varfit::{ols_from_entry, QrCache};

const KMEANS_MAX_ITERS: usize = 100;

/// Result of the naive two-step baseline.
#[derive(Debug, Clone)]
pub struct TwoStepResult {
    /// 0-based cluster labels per series.
    pub labels: Vec<usize>,
    /// Per-series stacked coefficients Θ̃_n*, one row per series.
    pub theta_rows: DMatrix<f64>,
    /// Per-series residual covariances.
    pub covariances: Vec<DMatrix<f64>>,
    /// For each cluster, the member whose parameters lie closest to the
    /// cluster centroid.
    pub representatives: Vec<usize>,
    /// True when any per-series fit needed ridge regularization.
    pub any_ridged: bool,
}

/// Fits a VAR(p) to every series from the cache and clusters the
/// coefficient vectors into K groups. Deterministic given the seed.
pub fn naive_two_step(
    data: &TimeSeriesSet,
    k: usize,
    order: usize,
    seed: u64,
    cache: &QrCache,
) -> Result<TwoStepResult> {
    let n = data.n_series();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "K={k} must lie in 1..=N ({n})"
        )));
    }
    let fits: Result<Vec<_>> = (0..n)
        .into_par_iter()
        .map(|i| ols_from_entry(cache.entry(i, order)?))
        .collect();
    let fits = fits?;
    let any_ridged = fits.iter().any(|f| f.2);
    // One row per series: Θ̃_n* vectorized in column-major order.
    let dim = fits[0].0.len();
    let theta_rows = DMatrix::from_fn(n, dim, |i, j| fits[i].0[j]);
    let covariances: Vec<DMatrix<f64>> = fits.into_iter().map(|f| f.1).collect();

    let km = kmeans(&theta_rows, k, seed)?;
    Ok(TwoStepResult {
        labels: km.labels,
        theta_rows,
        covariances,
        representatives: km.representatives,
        any_ridged,
    })
}

pub(crate) struct KmeansOutcome {
    pub labels: Vec<usize>,
    pub representatives: Vec<usize>,
}

/// Lloyd iterations with k-means++ seeding on the rows of `points`.
/// Empty clusters are reseeded from the point farthest from its centroid.
pub(crate) fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<KmeansOutcome> {
    let n = points.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);
    let mut labels = vec![0usize; n];

    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for i in 0..n {
            let best = nearest_centroid(&points.row(i).into_owned(), &centroids);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        // Reseed empty clusters from the worst-fitting point.
        for c in 0..k {
            if !labels.contains(&c) {
                let worst = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist2(&points.row(a).into_owned(), &centroids[labels[a]]);
                        let db = dist2(&points.row(b).into_owned(), &centroids[labels[b]]);
                        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("n >= 1");
                labels[worst] = c;
                changed = true;
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = nalgebra::DVector::zeros(points.ncols());
            for &i in &members {
                mean += points.row(i).transpose();
            }
            *centroid = mean / members.len() as f64;
        }
        if !changed {
            break;
        }
    }

    let representatives = (0..k)
        .map(|c| {
            (0..n)
                .filter(|&i| labels[i] == c)
                .min_by(|&a, &b| {
                    let da = dist2(&points.row(a).into_owned(), &centroids[c]);
                    let db = dist2(&points.row(b).into_owned(), &centroids[c]);
                    da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                })
                .ok_or_else(|| Error::FitFailure(format!("k-means cluster {c} is empty")))
        })
        .collect::<Result<Vec<usize>>>()?;

    Ok(KmeansOutcome {
        labels,
        representatives,
    })
}

fn plus_plus_seeds(
    points: &DMatrix<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<nalgebra::DVector<f64>> {
    let n = points.nrows();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points.row(rng.random_range(0..n)).transpose());
    while centroids.len() < k {
        let d2: Vec<f64> = (0..n)
            .map(|i| {
                let p = points.row(i).transpose();
                centroids
                    .iter()
                    .map(|c| (&p - c).norm_squared())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All points coincide with an existing centroid.
            rng.random_range(0..n)
        };
        centroids.push(points.row(next).transpose());
    }
    centroids
}

fn nearest_centroid(point: &nalgebra::RowDVector<f64>, centroids: &[nalgebra::DVector<f64>]) -> usize {
    let p = point.transpose();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = (&p - centroid).norm_squared();
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn dist2(point: &nalgebra::RowDVector<f64>, centroid: &nalgebra::DVector<f64>) -> f64 {
    (point.transpose() - centroid).norm_squared()
}
