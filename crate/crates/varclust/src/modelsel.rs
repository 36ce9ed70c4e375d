//! Choosing the number of clusters and the VAR order: the extended BIC
//! surface over (K, p), the surrogate log-likelihood that makes BIC
//! applicable to the hard-clustering algorithm, per-series order
//! selection, and the cheap cyclic (K, p) search.
//!
//! Model classes with different K have wildly different sizes, so the
//! plain BIC prior is biased toward large K; the extended criterion adds
//! 2γ·log card(S_j), the log-size of the class, with γ ∈ [0, 1].

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cmvar::{self, CmvarConfig, CmvarResult};
use crate::error::{Error, Result};
use crate::klmvar::{self, KlmvarConfig, KlmvarResult};
use crate::types::{TimeSeries, TimeSeriesSet};
use crate::varfit::{fit_var_ols, CovKernel, QrCache};

const LN_2PI: f64 = 1.8378770664093453;

/// Which clustering algorithm a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Cmvar,
    Klmvar,
}

/// A fitted clustering, as consumed by the BIC formulas.
#[derive(Debug, Clone)]
pub enum ClusterFit {
    Cmvar(CmvarResult),
    Klmvar(KlmvarResult),
}

impl ClusterFit {
    pub fn k(&self) -> usize {
        match self {
            ClusterFit::Cmvar(r) => r.params.n_components(),
            ClusterFit::Klmvar(r) => r.params.n_components(),
        }
    }

    pub fn orders(&self) -> Vec<usize> {
        match self {
            ClusterFit::Cmvar(r) => r.params.orders(),
            ClusterFit::Klmvar(r) => r.params.orders(),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            ClusterFit::Cmvar(r) => r.converged,
            ClusterFit::Klmvar(r) => r.converged,
        }
    }

    /// Mixture-parameter count η_mix: K−1 free weights for the soft
    /// algorithm; one label per series for the hard one.
    fn eta_mix(&self, n: usize) -> f64 {
        match self {
            ClusterFit::Cmvar(r) => (r.params.n_components() - 1) as f64,
            ClusterFit::Klmvar(_) => n as f64,
        }
    }

    /// The likelihood the BIC consumes: the mixture log-likelihood for the
    /// soft algorithm, the surrogate for the hard one.
    fn bic_log_likelihood(&self, data: &TimeSeriesSet, cache: &QrCache) -> Result<f64> {
        match self {
            ClusterFit::Cmvar(r) => cmvar::log_likelihood(data, &r.params, cache),
            ClusterFit::Klmvar(r) => surrogate_log_likelihood(r, cache),
        }
    }
}

/// Number of K-multisets over N_p order candidates:
/// card(S_j) = C(N_p+K−1, K), evaluated exactly. Values at or beyond
/// 2^63 are a range error.
pub fn model_space_cardinality(n_p: usize, k: usize) -> Result<u64> {
    if n_p == 0 || k == 0 {
        return Err(Error::InvalidArgument(
            "cardinality needs n_p >= 1 and K >= 1".into(),
        ));
    }
    // C(n_p+k-1, k) multiplicatively, dividing early to stay exact.
    let mut num = 1u128;
    for i in 0..k as u128 {
        num = num
            .checked_mul(n_p as u128 + i)
            .ok_or_else(|| Error::RangeError("model space cardinality overflow".into()))?;
        num /= i + 1;
        if num >= 1u128 << 63 {
            return Err(Error::RangeError(
                "model space cardinality exceeds 2^63".into(),
            ));
        }
    }
    Ok(num as u64)
}

/// Surrogate log-likelihood for a hard clustering:
/// Σ_n (m/2)(p_max−T)·log 2π − ½·D_{n,label(n)}(Θ̃_k, Ω_k), with the
/// dissimilarity evaluated at the raw (unnormalized) covariances.
pub fn surrogate_log_likelihood(result: &KlmvarResult, cache: &QrCache) -> Result<f64> {
    let rows = cache.rows_used() as f64;
    let m = cache.dim() as f64;
    let psi = klmvar::psi_matrix(&result.params, cache, false)?;
    let log_dets: Vec<f64> = result
        .params
        .components()
        .iter()
        .map(|c| match CovKernel::new(c.covariance()) {
            Ok(kern) => kern.log_det(),
            Err(_) => f64::NEG_INFINITY,
        })
        .collect();
    let mut total = 0.0;
    for (i, &l) in result.labels.iter().enumerate() {
        let d = rows * log_dets[l] + psi[(i, l)];
        total += -0.5 * m * rows * LN_2PI - 0.5 * d;
    }
    Ok(total)
}

/// Extended BIC. With γ = 0 this is the plain BIC; larger γ penalizes
/// model classes by their size.
pub fn extended_bic(
    fit: &ClusterFit,
    data: &TimeSeriesSet,
    gamma: f64,
    n_p: usize,
    cache: &QrCache,
) -> Result<f64> {
    let log_l = fit.bic_log_likelihood(data, cache)?;
    extended_bic_from_parts(
        log_l,
        data.dim(),
        data.n_series(),
        cache.rows_used(),
        &fit.orders(),
        fit.eta_mix(data.n_series()),
        gamma,
        n_p,
    )
}

/// The criterion with every ingredient supplied explicitly:
/// −2·logL + [m²·Σp_k + K(m²/2 + 3m/2) + η_mix]·log[N(T−p_max)]
/// + 2γ·log card(S_j).
#[allow(clippy::too_many_arguments)]
pub fn extended_bic_from_parts(
    log_l: f64,
    m: usize,
    n: usize,
    rows_used: usize,
    orders: &[usize],
    eta_mix: f64,
    gamma: f64,
    n_p: usize,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} outside [0, 1]"
        )));
    }
    let k = orders.len() as f64;
    let mf = m as f64;
    let sum_p: usize = orders.iter().sum();
    let n_params = mf * mf * sum_p as f64 + k * (mf * mf / 2.0 + 1.5 * mf) + eta_mix;
    let sample = (n * rows_used) as f64;
    let mut score = -2.0 * log_l + n_params * sample.ln();
    if gamma > 0.0 {
        let card = model_space_cardinality(n_p, orders.len())? as f64;
        score += 2.0 * gamma * card.ln();
    }
    Ok(score)
}

/// Shared knobs for grid sweeps: per-cell base seed (every cell uses the
/// same one for comparability), restarts taking the best objective, and
/// the fit tolerances.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub seed: u64,
    pub restarts: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 3,
            tol: 1e-8,
            max_iters: 500,
        }
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy)]
pub struct BicCell {
    pub k: usize,
    pub p: usize,
    pub score: f64,
    pub converged: bool,
}

/// BIC scores over the (K, p) grid with the shared-window convention
/// p_max = max(p candidates).
#[derive(Debug, Clone)]
pub struct BicGrid {
    pub k_candidates: Vec<usize>,
    pub p_candidates: Vec<usize>,
    /// Scores indexed [k_index, p_index]; +∞ marks a failed cell.
    pub scores: DMatrix<f64>,
    pub converged: Vec<Vec<bool>>,
    pub gamma: f64,
    pub seed: u64,
    /// (K, p) of the minimal finite score; ties prefer smaller K, then
    /// smaller p.
    pub best: (usize, usize),
}

impl BicGrid {
    pub fn cells(&self) -> Vec<BicCell> {
        let mut out = Vec::new();
        for (i, &k) in self.k_candidates.iter().enumerate() {
            for (j, &p) in self.p_candidates.iter().enumerate() {
                out.push(BicCell {
                    k,
                    p,
                    score: self.scores[(i, j)],
                    converged: self.converged[i][j],
                });
            }
        }
        out
    }
}

fn run_cell(
    data: &TimeSeriesSet,
    k: usize,
    p: usize,
    algo: Algorithm,
    cfg: &SweepConfig,
    cache: &QrCache,
) -> Result<ClusterFit> {
    let orders = vec![p; k];
    match algo {
        Algorithm::Klmvar => {
            let config = KlmvarConfig {
                max_iters: cfg.max_iters,
                tol: cfg.tol,
                seed: cfg.seed,
                ..KlmvarConfig::default()
            };
            klmvar::fit_klmvar_restarts(data, &orders, &config, cfg.restarts, cache)
                .map(ClusterFit::Klmvar)
        }
        Algorithm::Cmvar => {
            let config = CmvarConfig {
                max_iters: cfg.max_iters,
                tol: cfg.tol,
                seed: cfg.seed,
                ..CmvarConfig::default()
            };
            cmvar::fit_cmvar_restarts(data, &orders, &config, cfg.restarts, cache)
                .map(ClusterFit::Cmvar)
        }
    }
}

/// Evaluates the extended BIC on every (K, p) cell. Cells run
/// concurrently against one shared cache; a failed fit scores +∞ and the
/// sweep continues.
pub fn bic_surface(
    data: &TimeSeriesSet,
    k_candidates: &[usize],
    p_candidates: &[usize],
    gamma: f64,
    algo: Algorithm,
    cfg: &SweepConfig,
) -> Result<BicGrid> {
    if k_candidates.is_empty() || p_candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate lists".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} outside [0, 1]"
        )));
    }
    let p_max = *p_candidates.iter().max().expect("nonempty");
    let cache = QrCache::build(data, p_candidates, p_max)?;
    let n_p = p_candidates.len();

    let cell_list: Vec<(usize, usize)> = k_candidates
        .iter()
        .flat_map(|&k| p_candidates.iter().map(move |&p| (k, p)))
        .collect();
    let evaluated: Vec<(f64, bool)> = cell_list
        .par_iter()
        .map(|&(k, p)| match run_cell(data, k, p, algo, cfg, &cache) {
            Ok(fit) => {
                let converged = fit.converged();
                match extended_bic(&fit, data, gamma, n_p, &cache) {
                    Ok(score) if score.is_finite() => (score, converged),
                    _ => (f64::INFINITY, false),
                }
            }
            Err(_) => (f64::INFINITY, false),
        })
        .collect();

    let n_k = k_candidates.len();
    let mut scores = DMatrix::from_element(n_k, n_p, f64::INFINITY);
    let mut converged = vec![vec![false; n_p]; n_k];
    for (idx, &(_, _)) in cell_list.iter().enumerate() {
        let (i, j) = (idx / n_p, idx % n_p);
        scores[(i, j)] = evaluated[idx].0;
        converged[i][j] = evaluated[idx].1;
    }

    let best = best_cell(k_candidates, p_candidates, &scores)?;
    Ok(BicGrid {
        k_candidates: k_candidates.to_vec(),
        p_candidates: p_candidates.to_vec(),
        scores,
        converged,
        gamma,
        seed: cfg.seed,
        best,
    })
}

fn best_cell(
    k_candidates: &[usize],
    p_candidates: &[usize],
    scores: &DMatrix<f64>,
) -> Result<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (i, &k) in k_candidates.iter().enumerate() {
        for (j, &p) in p_candidates.iter().enumerate() {
            let s = scores[(i, j)];
            if !s.is_finite() {
                continue;
            }
            // Strict comparison keeps the smaller-K-then-smaller-p tie rule
            // because of iteration order.
            if best.map(|(_, b)| s < b).unwrap_or(true) {
                best = Some(((k, p), s));
            }
        }
    }
    best.map(|(cell, _)| cell)
        .ok_or_else(|| Error::FitFailure("every BIC cell failed".into()))
}

/// BIC for a single-series VAR order:
/// −2·logL + [m²p + m(m+3)/2]·log(T−p), each candidate fitted on its own
/// regression window. Ties prefer the smaller order.
pub fn select_order_bic(series: &TimeSeries, p_candidates: &[usize]) -> Result<usize> {
    if p_candidates.is_empty() {
        return Err(Error::InvalidArgument("no order candidates".into()));
    }
    let m = series.dim() as f64;
    let mut best: Option<(usize, f64)> = None;
    for &p in p_candidates {
        let fit = fit_var_ols(series, p)?;
        let rows = fit.rows as f64;
        let log_det = match CovKernel::new(&fit.covariance) {
            Ok(kern) => kern.log_det(),
            // A perfect fit sends the likelihood to +∞; BIC −∞ wins.
            Err(_) => f64::NEG_INFINITY,
        };
        // At the maximum-likelihood covariance the quadratic term is
        // exactly rows·m.
        let log_l = -0.5 * m * rows * LN_2PI - 0.5 * (rows * log_det + rows * m);
        let penalty = (m * m * p as f64 + m * (m + 3.0) / 2.0) * rows.ln();
        let score = -2.0 * log_l + penalty;
        if best.map(|(_, b)| score < b).unwrap_or(true) {
            best = Some((p, score));
        }
    }
    Ok(best.expect("candidates nonempty").0)
}

/// Majority vote of [`select_order_bic`] across all series; ties prefer
/// the smaller order.
pub fn select_order_vote(data: &TimeSeriesSet, p_candidates: &[usize]) -> Result<usize> {
    let votes: Result<Vec<usize>> = data
        .series()
        .par_iter()
        .map(|s| select_order_bic(s, p_candidates))
        .collect();
    let votes = votes?;
    let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for v in votes {
        *counts.entry(v).or_insert(0) += 1;
    }
    Ok(counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("at least one vote")
        .0)
}

/// Cheap (K, p) selection: fix p by per-series order voting, then sweep K
/// at γ = 0; cycle the two one-dimensional sweeps until stable (at most
/// five cycles).
pub fn adhoc_select(
    data: &TimeSeriesSet,
    k_candidates: &[usize],
    p_candidates: &[usize],
    algo: Algorithm,
    cfg: &SweepConfig,
) -> Result<(usize, usize)> {
    if k_candidates.is_empty() || p_candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate lists".into()));
    }
    let p_max = *p_candidates.iter().max().expect("nonempty");
    let cache = QrCache::build(data, p_candidates, p_max)?;
    let n_p = p_candidates.len();

    let score_at = |k: usize, p: usize| -> f64 {
        match run_cell(data, k, p, algo, cfg, &cache) {
            Ok(fit) => extended_bic(&fit, data, 0.0, n_p, &cache).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };
    let sweep = |fixed_other: usize, candidates: &[usize], sweep_k: bool| -> usize {
        let scored: Vec<(usize, f64)> = candidates
            .par_iter()
            .map(|&c| {
                let s = if sweep_k {
                    score_at(c, fixed_other)
                } else {
                    score_at(fixed_other, c)
                };
                (c, s)
            })
            .collect();
        scored
            .into_iter()
            .filter(|(_, s)| s.is_finite())
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(c, _)| c)
            .unwrap_or(candidates[0])
    };

    let mut p = select_order_vote(data, p_candidates)?;
    let mut k = sweep(p, k_candidates, true);
    for _ in 0..5 {
        let p_next = if p_candidates.len() > 1 {
            sweep(k, p_candidates, false)
        } else {
            p
        };
        let k_next = if k_candidates.len() > 1 {
            sweep(p_next, k_candidates, true)
        } else {
            k
        };
        if p_next == p && k_next == k {
            break;
        }
        p = p_next;
        k = k_next;
    }
    Ok((k, p))
}
