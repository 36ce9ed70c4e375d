//! Hard clustering as coordinate descent: alternate between assigning
//! every series to the component minimizing its ψ dissimilarity and
//! refitting each component by pooled least squares over its members.
//!
//! Covariances are normalized to unit determinant before entering ψ, so
//! the label update and the parameter update are exact partial minimizers
//! of the objective
//!
//!   f(τ, Θ̃, Ω̃) = Σ_n Σ_k τ_{n,k} [(T−p)·log|Ω̃_k| + ψ_{n,k}]
//!
//! which makes the objective trace non-increasing and guarantees
//! termination after finitely many label configurations.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::twostep::naive_two_step;
use crate::types::{Assignment, ComponentFlags, MixtureParams, TimeSeriesSet, VarComponent};
use crate::varfit::{
    covariance_is_singular_scaled, ols_from_entry, residual_gram, solve_spd, ComponentKernel,
    CovKernel, QrCache,
};

/// Two initial components count as distinct when their stacked
/// coefficients differ by more than this in max norm.
const DISTINCT_TOL: f64 = 1e-10;

const INIT_ATTEMPTS: usize = 20;

#[derive(Debug, Clone)]
pub enum KlmvarInit {
    /// Uniform random one-hot labels, then one parameter update.
    RandomLabels,
    /// Per-series fits clustered by k-means; one representative per
    /// cluster seeds the components.
    NaiveTwoStep,
    GivenComponents(Vec<VarComponent>),
}

/// What to do when a cluster loses all members.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmptyClusterPolicy {
    /// Move the series with the largest current ψ into the empty cluster
    /// (the k-means-style default; keeps the objective non-increasing).
    ReseedWorst,
    /// Keep the previous component and flag it.
    Freeze,
}

#[derive(Debug, Clone)]
pub struct KlmvarConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub init: KlmvarInit,
    /// Skip determinant normalization and use raw Ω_k in the label
    /// update. Cheaper, loses the descent guarantee.
    pub unnormalized: bool,
    pub empty_policy: EmptyClusterPolicy,
}

impl Default for KlmvarConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
            seed: 0,
            init: KlmvarInit::NaiveTwoStep,
            unnormalized: false,
            empty_policy: EmptyClusterPolicy::ReseedWorst,
        }
    }
}

impl KlmvarConfig {
    fn validate(&self) -> Result<()> {
        if self.tol <= 0.0 {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KlmvarResult {
    /// Fitted components with their raw covariances Ω_k; no weights.
    pub params: MixtureParams,
    /// Determinant-normalized covariances Ω̃_k.
    pub normalized_covariances: Vec<DMatrix<f64>>,
    /// One-hot assignment.
    pub assignment: Assignment,
    /// 0-based hard labels.
    pub labels: Vec<usize>,
    pub objective: f64,
    /// Objective after each parameter update; non-increasing.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub cluster_sizes: Vec<usize>,
    /// Hash of each visited label configuration; no value repeats within
    /// a run (finite-termination bookkeeping).
    pub label_hashes: Vec<u64>,
    pub component_flags: Vec<ComponentFlags>,
}

/// Ω̃ = Ω / det(Ω)^{1/m}, so that det(Ω̃) = 1. Returns the normalized
/// matrix and whether PD-repair jitter was applied first.
pub fn normalize_covariance(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let (pd, jittered) = repaired_covariance(cov)?;
    let kern = CovKernel::new(&pd)?;
    let scale = (kern.log_det() / pd.nrows() as f64).exp();
    Ok((pd / scale, jittered))
}

fn repaired_covariance(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let mut c = cov.clone();
    crate::varfit::symmetrize(&mut c);
    if c.clone().cholesky().is_some() {
        return Ok((c, false));
    }
    let m = c.nrows();
    let delta = 1e-10 * (c.trace() / m as f64).max(1.0);
    for i in 0..m {
        c[(i, i)] += delta;
    }
    if c.clone().cholesky().is_some() {
        Ok((c, true))
    } else {
        Err(Error::InvalidCovariance(
            "covariance cannot be repaired to positive definite".into(),
        ))
    }
}

/// ψ-evaluation kernels for every component, in either covariance mode.
fn build_kernels(params: &MixtureParams, normalized: bool) -> Result<Vec<ComponentKernel>> {
    params
        .components()
        .iter()
        .map(|c| {
            if normalized {
                let (norm, _) = normalize_covariance(c.covariance())?;
                ComponentKernel::new(c, &norm)
            } else {
                ComponentKernel::new(c, c.covariance())
            }
        })
        .collect()
}

/// N×K matrix of ψ_{n,k}. With `normalized` the covariances are scaled to
/// unit determinant first (the k-LMVAR dissimilarity); otherwise raw
/// covariances are used.
pub fn psi_matrix(
    params: &MixtureParams,
    cache: &QrCache,
    normalized: bool,
) -> Result<DMatrix<f64>> {
    let kernels = build_kernels(params, normalized)?;
    crate::varfit::psi_matrix(&kernels, cache)
}

fn argmin_rows(psi: &DMatrix<f64>) -> Vec<usize> {
    (0..psi.nrows())
        .map(|n| {
            let mut best = 0usize;
            for k in 1..psi.ncols() {
                if psi[(n, k)] < psi[(n, best)] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Assigns every series to the component minimizing ψ_{n,k}; ties break
/// toward the lowest index.
pub fn assign_labels(
    data: &TimeSeriesSet,
    params: &MixtureParams,
    cache: &QrCache,
    normalized: bool,
) -> Result<Assignment> {
    let psi = psi_matrix(params, cache, normalized)?;
    if psi.iter().any(|v| v.is_nan()) {
        return Err(Error::NumericFailure {
            series: 0,
            component: 0,
            detail: "NaN dissimilarity in label update".into(),
        });
    }
    debug_assert_eq!(psi.nrows(), data.n_series());
    Assignment::hard(&argmin_rows(&psi), params.n_components())
}

#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub params: MixtureParams,
    pub normalized_covariances: Vec<DMatrix<f64>>,
    /// Labels actually fitted (reseeding may move one series per
    /// previously-empty cluster).
    pub labels: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub flags: Vec<ComponentFlags>,
    /// f = Σ_n (T−p)·log|Ω̃_{label(n)}| + ψ_{n,label(n)} at the new
    /// parameters.
    pub objective: f64,
}

/// Pooled least-squares update of every cluster's coefficients and
/// covariance, with empty-cluster handling per the policy.
pub fn update_parameters(
    labels_in: &[usize],
    orders: &[usize],
    cache: &QrCache,
    policy: EmptyClusterPolicy,
    prev: Option<&MixtureParams>,
    normalized_psi: bool,
) -> Result<UpdateOutcome> {
    let k = orders.len();
    let n = labels_in.len();
    let m = cache.dim();
    let rows = cache.rows_used() as f64;
    if let Some(&bad) = labels_in.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for K={k}"
        )));
    }
    let mut labels = labels_in.to_vec();
    let mut flags = vec![ComponentFlags::default(); k];

    let (components, kernels) = loop {
        let sets = index_sets(&labels, k);
        let fitted: Result<Vec<Option<(VarComponent, ComponentFlags)>>> = (0..k)
            .into_par_iter()
            .map(|c| {
                if sets[c].is_empty() {
                    Ok(None)
                } else {
                    fit_cluster(&sets[c], orders[c], cache, rows, m).map(Some)
                }
            })
            .collect();
        let fitted = fitted?;

        let empty: Vec<usize> = (0..k).filter(|&c| sets[c].is_empty()).collect();
        if empty.is_empty() {
            let mut comps = Vec::with_capacity(k);
            let mut kerns = Vec::with_capacity(k);
            for (c, item) in fitted.into_iter().enumerate() {
                let (comp, f) = item.expect("no empty clusters remain");
                flags[c].ridged |= f.ridged;
                flags[c].singular_covariance |= f.singular_covariance;
                kerns.push(component_kernel_for_mode(&comp, normalized_psi)?);
                comps.push(comp);
            }
            break (comps, kerns);
        }

        if policy == EmptyClusterPolicy::Freeze {
            let mut comps = Vec::with_capacity(k);
            let mut kerns = Vec::with_capacity(k);
            for (c, item) in fitted.into_iter().enumerate() {
                let comp = match item {
                    Some((comp, f)) => {
                        flags[c].ridged |= f.ridged;
                        flags[c].singular_covariance |= f.singular_covariance;
                        comp
                    }
                    None => {
                        flags[c].frozen = true;
                        match prev {
                            Some(p) => p.components()[c].clone(),
                            None => {
                                return Err(Error::DegenerateCluster {
                                    component: c,
                                    detail: "cluster is empty and no previous value exists".into(),
                                })
                            }
                        }
                    }
                };
                kerns.push(component_kernel_for_mode(&comp, normalized_psi)?);
                comps.push(comp);
            }
            break (comps, kerns);
        }

        // Reseed: move the worst-fitting series (from a cluster that can
        // spare one) into the lowest empty cluster, then refit.
        let target = empty[0];
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            let c = labels[i];
            if sets[c].len() < 2 {
                continue;
            }
            let (comp, _) = fitted[c].as_ref().expect("occupied cluster was fitted");
            let kern = component_kernel_for_mode(comp, normalized_psi)?;
            let own = kern.kern.psi_entry(cache.entry(i, orders[c])?, &kern.theta_t);
            if worst.map(|(_, w)| own > w).unwrap_or(true) {
                worst = Some((i, own));
            }
        }
        let (mover, _) = worst.ok_or(Error::DegenerateCluster {
            component: target,
            detail: "no cluster can spare a series for reseeding".into(),
        })?;
        labels[mover] = target;
        flags[target].reseeded = true;
    };

    let params = MixtureParams::new(components, None)?;
    let normalized_covariances: Vec<DMatrix<f64>> = params
        .components()
        .iter()
        .map(|c| normalize_covariance(c.covariance()).map(|(nc, _)| nc))
        .collect::<Result<_>>()?;

    let psi = crate::varfit::psi_matrix(&kernels, cache)?;
    let mut objective = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        objective += rows * kernels[l].kern.log_det() + psi[(i, l)];
    }
    let sets = index_sets(&labels, k);
    Ok(UpdateOutcome {
        params,
        normalized_covariances,
        cluster_sizes: sets.iter().map(Vec::len).collect(),
        labels,
        flags,
        objective,
    })
}

fn component_kernel_for_mode(comp: &VarComponent, normalized: bool) -> Result<ComponentKernel> {
    if normalized {
        let (norm, _) = normalize_covariance(comp.covariance())?;
        ComponentKernel::new(comp, &norm)
    } else {
        ComponentKernel::new(comp, comp.covariance())
    }
}

fn fit_cluster(
    members: &[usize],
    order: usize,
    cache: &QrCache,
    rows: f64,
    m: usize,
) -> Result<(VarComponent, ComponentFlags)> {
    let mut flags = ComponentFlags::default();
    let cols = 1 + m * order;
    let mut a = DMatrix::zeros(cols, cols);
    let mut b = DMatrix::zeros(cols, m);
    let mut any_degenerate = false;
    for &i in members {
        let entry = cache.entry(i, order)?;
        any_degenerate |= entry.degenerate;
        a += entry.r.transpose() * &entry.r;
        b += entry.r.transpose() * &entry.yq;
    }
    if any_degenerate {
        let jitter = 1e-8 * a.trace() / cols as f64;
        for i in 0..cols {
            a[(i, i)] += jitter;
        }
        flags.ridged = true;
    }
    let (theta_t, jittered) = solve_spd(a, &b)?;
    flags.ridged |= jittered;

    let mut cov = DMatrix::zeros(m, m);
    let mut signal = 0.0;
    for &i in members {
        let entry = cache.entry(i, order)?;
        cov += residual_gram(entry, &theta_t);
        signal += entry.yq.norm_squared() + entry.s_perp.trace();
    }
    let denom = rows * members.len() as f64;
    cov /= denom;
    crate::varfit::symmetrize(&mut cov);
    flags.singular_covariance = covariance_is_singular_scaled(&cov, signal / (denom * m as f64));
    Ok((VarComponent::from_stacked(&theta_t.transpose(), cov)?, flags))
}

fn index_sets(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        sets[l].push(i);
    }
    sets
}

/// Objective f(τ, Θ̃, Ω̃) = Σ_n (T−p)·log|Ω̃_{label(n)}| + ψ_{n,label(n)}
/// with determinant-normalized covariances (the log term is evaluated,
/// not assumed zero).
pub fn objective(
    labels: &Assignment,
    params: &MixtureParams,
    cache: &QrCache,
) -> Result<f64> {
    if !labels.is_hard() {
        return Err(Error::InvalidArgument(
            "objective requires one-hot labels".into(),
        ));
    }
    let kernels = build_kernels(params, true)?;
    let psi = crate::varfit::psi_matrix(&kernels, cache)?;
    let rows = cache.rows_used() as f64;
    let mut total = 0.0;
    for (i, l) in labels.labels().into_iter().enumerate() {
        total += rows * kernels[l].kern.log_det() + psi[(i, l)];
    }
    Ok(total)
}

/// Draws K initial components per the strategy; they are checked to be
/// pairwise distinct (coefficients differing by more than 1e-10 in max
/// norm). Retries with perturbed seeds before giving up.
pub fn initialize(
    data: &TimeSeriesSet,
    orders: &[usize],
    strategy: &KlmvarInit,
    seed: u64,
    cache: &QrCache,
) -> Result<Vec<VarComponent>> {
    let k = orders.len();
    let n = data.n_series();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "K={k} must lie in 1..=N ({n})"
        )));
    }
    match strategy {
        KlmvarInit::GivenComponents(comps) => {
            if comps.len() != k {
                return Err(Error::InitFailure(format!(
                    "{} components given for K={k}",
                    comps.len()
                )));
            }
            for (c, &p) in comps.iter().zip(orders) {
                if c.order() != p || c.dim() != data.dim() {
                    return Err(Error::InitFailure(
                        "given component has wrong order or dimension".into(),
                    ));
                }
            }
            if !pairwise_distinct(comps) {
                return Err(Error::InitFailure(
                    "given components are not pairwise distinct".into(),
                ));
            }
            Ok(comps.clone())
        }
        KlmvarInit::RandomLabels => {
            for attempt in 0..INIT_ATTEMPTS {
                let labels = random_full_labels(n, k, seed.wrapping_add(attempt as u64))?;
                let update = update_parameters(
                    &labels,
                    orders,
                    cache,
                    EmptyClusterPolicy::ReseedWorst,
                    None,
                    true,
                )?;
                if pairwise_distinct(update.params.components()) {
                    return Ok(update.params.components().to_vec());
                }
            }
            Err(Error::InitFailure(format!(
                "no {k} distinct components found in {INIT_ATTEMPTS} random-label draws"
            )))
        }
        KlmvarInit::NaiveTwoStep => {
            let fit_order = orders.iter().copied().max().expect("K >= 1");
            for attempt in 0..INIT_ATTEMPTS {
                let two = naive_two_step(
                    data,
                    k,
                    fit_order,
                    seed.wrapping_add(attempt as u64),
                    cache,
                )?;
                let comps: Result<Vec<VarComponent>> = two
                    .representatives
                    .iter()
                    .zip(orders)
                    .map(|(&rep, &p)| {
                        let (theta, cov, _) = ols_from_entry(cache.entry(rep, p)?)?;
                        let (cov, _) = repaired_covariance(&cov)?;
                        VarComponent::from_stacked(&theta, cov)
                    })
                    .collect();
                let comps = comps?;
                if pairwise_distinct(&comps) {
                    return Ok(comps);
                }
            }
            Err(Error::InitFailure(format!(
                "no {k} distinct representatives found in {INIT_ATTEMPTS} two-step draws"
            )))
        }
    }
}

fn pairwise_distinct(comps: &[VarComponent]) -> bool {
    for (i, a) in comps.iter().enumerate() {
        for b in comps.iter().skip(i + 1) {
            if a.order() == b.order() && (a.stacked() - b.stacked()).amax() <= DISTINCT_TOL {
                return false;
            }
        }
    }
    true
}

fn random_full_labels(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..INIT_ATTEMPTS {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        if (0..k).all(|c| labels.contains(&c)) {
            return Ok(labels);
        }
    }
    // Guarantee coverage: the first K series get one cluster each.
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    for c in 0..k {
        labels[c] = c;
    }
    Ok(labels)
}

fn hash_labels(labels: &[usize]) -> u64 {
    let mut h = DefaultHasher::new();
    labels.hash(&mut h);
    h.finish()
}

/// Runs the coordinate-descent loop: label update, parameter update,
/// stop on label stability or when the relative objective change falls
/// below `tol`. `iterations` counts completed parameter updates.
pub fn fit_klmvar(
    data: &TimeSeriesSet,
    orders: &[usize],
    config: &KlmvarConfig,
) -> Result<KlmvarResult> {
    let p_max = orders.iter().copied().max().unwrap_or(0);
    let cache = QrCache::build(data, orders, p_max)?;
    fit_klmvar_with_cache(data, orders, config, &cache)
}

pub fn fit_klmvar_with_cache(
    data: &TimeSeriesSet,
    orders: &[usize],
    config: &KlmvarConfig,
    cache: &QrCache,
) -> Result<KlmvarResult> {
    config.validate()?;
    let k = orders.len();
    let normalized = !config.unnormalized;

    let components = initialize(data, orders, &config.init, config.seed, cache)?;
    let mut params = MixtureParams::new(components, None)?;
    let mut normalized_covs: Vec<DMatrix<f64>> = params
        .components()
        .iter()
        .map(|c| normalize_covariance(c.covariance()).map(|(nc, _)| nc))
        .collect::<Result<_>>()?;

    let mut flags = vec![ComponentFlags::default(); k];
    let mut labels: Option<Vec<usize>> = None;
    let mut cluster_sizes = vec![0usize; k];
    let mut trace: Vec<f64> = Vec::new();
    let mut hashes: Vec<u64> = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;

    for _ in 0..config.max_iters {
        let new_labels = {
            let kernels = build_kernels(&params, normalized)?;
            let psi = crate::varfit::psi_matrix(&kernels, cache)?;
            if psi.iter().any(|v| v.is_nan()) {
                return Err(Error::NumericFailure {
                    series: 0,
                    component: 0,
                    detail: "NaN dissimilarity in label update".into(),
                });
            }
            argmin_rows(&psi)
        };
        if labels.as_ref() == Some(&new_labels) {
            converged = true;
            break;
        }

        let update = update_parameters(
            &new_labels,
            orders,
            cache,
            config.empty_policy,
            Some(&params),
            normalized,
        )?;
        for (acc, f) in flags.iter_mut().zip(&update.flags) {
            acc.ridged |= f.ridged;
            acc.frozen |= f.frozen;
            acc.reseeded |= f.reseeded;
            acc.singular_covariance |= f.singular_covariance;
        }
        hashes.push(hash_labels(&update.labels));
        labels = Some(update.labels);
        params = update.params;
        normalized_covs = update.normalized_covariances;
        cluster_sizes = update.cluster_sizes;
        trace.push(update.objective);
        iterations += 1;

        if trace.len() >= 2 {
            let prev = trace[trace.len() - 2];
            let cur = trace[trace.len() - 1];
            if (cur - prev).abs() <= config.tol * (1.0 + cur.abs()) {
                converged = true;
                break;
            }
        }
    }

    let labels = labels.ok_or_else(|| Error::FitFailure("no iteration completed".into()))?;
    let assignment = Assignment::hard(&labels, k)?;
    Ok(KlmvarResult {
        params,
        normalized_covariances: normalized_covs,
        assignment,
        objective: *trace.last().expect("trace non-empty"),
        objective_trace: trace,
        labels,
        iterations,
        converged,
        cluster_sizes,
        label_hashes: hashes,
        component_flags: flags,
    })
}

/// Runs `restarts` independent fits and keeps the one with the smallest
/// objective. Restart 0 uses the configured initialization; later
/// restarts alternate between the two-step and random-label strategies
/// with perturbed seeds, which escapes the merged-cluster local optima
/// either strategy can land in on its own.
pub fn fit_klmvar_restarts(
    data: &TimeSeriesSet,
    orders: &[usize],
    config: &KlmvarConfig,
    restarts: usize,
    cache: &QrCache,
) -> Result<KlmvarResult> {
    let restarts = restarts.max(1);
    let mut best: Option<KlmvarResult> = None;
    let mut first_err: Option<Error> = None;
    for r in 0..restarts {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(r as u64);
        if r > 0 {
            cfg.init = if r % 2 == 1 {
                KlmvarInit::RandomLabels
            } else {
                KlmvarInit::NaiveTwoStep
            };
        }
        match fit_klmvar_with_cache(data, orders, &cfg, cache) {
            Ok(res) => {
                if best.as_ref().map(|b| res.objective < b.objective).unwrap_or(true) {
                    best = Some(res);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("restarts >= 1 implies an error was recorded"))
}

/// Evaluates the soft E-step with Ω_k replaced by γ·Ω̃_k for each γ in a
/// strictly decreasing positive sequence. As γ shrinks the rows approach
/// the one-hot assignment of [`assign_labels`].
pub fn soft_limit_probe(
    data: &TimeSeriesSet,
    params: &MixtureParams,
    gamma_list: &[f64],
    cache: &QrCache,
) -> Result<Vec<Assignment>> {
    if gamma_list.is_empty() {
        return Err(Error::InvalidArgument("gamma list is empty".into()));
    }
    if gamma_list.iter().any(|&g| g <= 0.0)
        || gamma_list.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidArgument(
            "gamma list must be strictly decreasing and positive".into(),
        ));
    }
    let k = params.n_components();
    let n = data.n_series();
    let rows = cache.rows_used() as f64;
    let m = data.dim() as f64;
    let kernels = build_kernels(params, true)?;
    let psi = crate::varfit::psi_matrix(&kernels, cache)?;
    let log_weights: Vec<f64> = match params.weights() {
        Some(w) => w.iter().map(|a| a.ln()).collect(),
        None => vec![(1.0 / k as f64).ln(); k],
    };

    let mut out = Vec::with_capacity(gamma_list.len());
    for &gamma in gamma_list {
        let mut tau = DMatrix::zeros(n, k);
        let mut scores = vec![0.0f64; k];
        for i in 0..n {
            for (c, kern) in kernels.iter().enumerate() {
                scores[c] = log_weights[c]
                    - 0.5 * rows * (m * gamma.ln() + kern.kern.log_det())
                    - 0.5 * psi[(i, c)] / gamma;
            }
            let norm = crate::cmvar::log_sum_exp(&scores);
            let mut sum = 0.0;
            for c in 0..k {
                tau[(i, c)] = (scores[c] - norm).exp();
                sum += tau[(i, c)];
            }
            for c in 0..k {
                tau[(i, c)] /= sum;
            }
        }
        out.push(Assignment::soft(tau)?);
    }
    Ok(out)
}
