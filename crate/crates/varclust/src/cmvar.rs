//! EM-based soft clustering with a mixture of Gaussian VAR components.
//!
//! Responsibilities are computed entirely in the log domain: the textbook
//! update divides products of Gaussian densities across T−p time points,
//! which underflows long before problems of practical size (already at
//! m = 6, T = 400). The log-sum-exp path always returns finite
//! responsibilities and a counter records how many rows were in the
//! regime where the plain formula would have collapsed to 0/0, so the
//! failure region stays observable.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::design::residual_matrix;
use crate::error::{Error, Result};
use crate::types::{Assignment, ComponentFlags, MixtureParams, TimeSeriesSet, VarComponent};
use crate::varfit::{
    covariance_is_singular_scaled, residual_gram, solve_spd, ComponentKernel, QrCache,
};

const LN_2PI: f64 = 1.8378770664093453; // ln(2π)

/// Spread of per-row log-scores beyond which exp-space responsibilities
/// are numerically one-hot (exp(-700) is below the smallest normal f64).
pub const UNDERFLOW_GAP: f64 = 700.0;

/// Initialization strategy for the EM loop.
#[derive(Debug, Clone)]
pub enum CmvarInit {
    /// Dirichlet(1,…,1) responsibility rows drawn from the seed.
    RandomResponsibilities,
    /// One E-step against the given components (uniform weights).
    FromComponents(Vec<VarComponent>),
}

#[derive(Debug, Clone)]
pub struct CmvarConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub init: CmvarInit,
}

impl Default for CmvarConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
            seed: 0,
            init: CmvarInit::RandomResponsibilities,
        }
    }
}

impl CmvarConfig {
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
pub struct CmvarResult {
    /// Final parameters with weights sorted in descending order.
    pub params: MixtureParams,
    /// Soft responsibilities, columns permuted like the components.
    pub tau: Assignment,
    /// Hard labels by row argmax (ties toward the lowest index).
    pub labels: Vec<usize>,
    /// Mixture log-likelihood at the final parameters.
    pub log_likelihood: f64,
    /// Log-likelihood after each iteration; non-decreasing by the EM
    /// ascent property.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Rows whose log-score spread exceeded [`UNDERFLOW_GAP`], summed
    /// over all E-steps.
    pub underflow_events: usize,
    /// Every row was in the underflow regime at the very first E-step,
    /// the failure mode a plain-formula implementation dies on.
    pub underflow_dominated: bool,
    /// All components collapsed onto the same symmetric fixed point.
    pub degenerate_init: bool,
    pub component_flags: Vec<ComponentFlags>,
}

/// E-step output: responsibilities plus the per-row log-normalizers
/// needed to evaluate the mixture log-likelihood for free.
#[derive(Debug, Clone)]
pub struct EStep {
    pub tau: Assignment,
    /// Rows whose finite log-score spread exceeded [`UNDERFLOW_GAP`].
    pub underflow_rows: usize,
    /// log Σ_k exp(g_{n,k}) per row.
    pub row_log_norms: Vec<f64>,
}

/// M-step output: updated parameters plus per-component flags.
#[derive(Debug, Clone)]
pub struct MStep {
    pub params: MixtureParams,
    pub flags: Vec<ComponentFlags>,
}

/// Posterior responsibilities τ_{n,k} in the log domain:
/// g_{n,k} = log α_k − ((T−p)/2)·log|Ω_k| − ψ_{n,k}/2 normalized by
/// log-sum-exp over k. Rows sum to one exactly as computed.
pub fn e_step(data: &TimeSeriesSet, params: &MixtureParams, cache: &QrCache) -> Result<EStep> {
    let weights = params
        .weights()
        .ok_or_else(|| Error::InvalidArgument("E-step requires mixture weights".into()))?;
    let kernels = component_kernels(params)?;
    let scores = log_scores(data.n_series(), weights, &kernels, cache)?;
    finish_e_step(&scores)
}

/// Mixture weights, coefficients and covariances maximizing the
/// τ-weighted complete-data likelihood. Columns whose responsibility
/// mass satisfies Σ_n τ_{n,k}·(T−p) ≤ m are degenerate: the component is
/// frozen at its previous value (or a unit-covariance placeholder) and
/// flagged.
pub fn m_step(
    data: &TimeSeriesSet,
    tau: &Assignment,
    orders: &[usize],
    cache: &QrCache,
    prev: Option<&MixtureParams>,
) -> Result<MStep> {
    let n = data.n_series();
    let m = data.dim();
    if tau.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: tau.n(),
            context: "responsibility rows".into(),
        });
    }
    if orders.len() != tau.k() {
        return Err(Error::DimensionMismatch {
            expected: tau.k(),
            got: orders.len(),
            context: "orders per component".into(),
        });
    }
    let rows = cache.rows_used() as f64;
    let mass = tau.column_sums();
    // Dividing by the summed mass (= N up to round-off) keeps the weight
    // vector stochastic to machine precision even for large N.
    let weights = &mass / mass.sum();

    let updated: Result<Vec<(VarComponent, ComponentFlags)>> = (0..tau.k())
        .into_par_iter()
        .map(|k| update_component(tau, orders[k], cache, k, mass[k], rows, m, prev))
        .collect();
    let updated = updated?;
    if updated.iter().all(|(_, f)| f.frozen) {
        return Err(Error::FitFailure(
            "every component lost its responsibility mass".into(),
        ));
    }
    let (components, flags): (Vec<_>, Vec<_>) = updated.into_iter().unzip();
    Ok(MStep {
        params: MixtureParams::new(components, Some(weights))?,
        flags,
    })
}

#[allow(clippy::too_many_arguments)]
fn update_component(
    tau: &Assignment,
    order: usize,
    cache: &QrCache,
    k: usize,
    mass: f64,
    rows: f64,
    m: usize,
    prev: Option<&MixtureParams>,
) -> Result<(VarComponent, ComponentFlags)> {
    let mut flags = ComponentFlags::default();
    if mass * rows <= m as f64 {
        flags.frozen = true;
        let comp = match prev {
            Some(p) => p.components()[k].clone(),
            None => placeholder_component(m, order),
        };
        return Ok((comp, flags));
    }
    let cols = 1 + m * order;
    let mut a = DMatrix::zeros(cols, cols);
    let mut b = DMatrix::zeros(cols, m);
    let mut any_degenerate = false;
    for i in 0..tau.n() {
        let w = tau.tau()[(i, k)];
        if w == 0.0 {
            continue;
        }
        let entry = cache.entry(i, order)?;
        any_degenerate |= entry.degenerate;
        a += w * (entry.r.transpose() * &entry.r);
        b += w * (entry.r.transpose() * &entry.yq);
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
    for i in 0..tau.n() {
        let w = tau.tau()[(i, k)];
        if w == 0.0 {
            continue;
        }
        let entry = cache.entry(i, order)?;
        cov += w * residual_gram(entry, &theta_t);
        signal += w * (entry.yq.norm_squared() + entry.s_perp.trace());
    }
    cov /= rows * mass;
    crate::varfit::symmetrize(&mut cov);
    flags.singular_covariance =
        covariance_is_singular_scaled(&cov, signal / (rows * mass * m as f64));
    let comp = VarComponent::from_stacked(&theta_t.transpose(), cov)?;
    Ok((comp, flags))
}

fn placeholder_component(m: usize, order: usize) -> VarComponent {
    VarComponent::new(
        DVector::zeros(m),
        (0..order).map(|_| DMatrix::zeros(m, m)).collect(),
        DMatrix::identity(m, m),
    )
    .expect("placeholder component is well-formed")
}

/// Mixture log-likelihood of the whole data set: for every time point,
/// a log-sum-exp over components of the Gaussian log-density weighted by
/// log α_k. Used by the BIC machinery.
pub fn log_likelihood(
    data: &TimeSeriesSet,
    params: &MixtureParams,
    cache: &QrCache,
) -> Result<f64> {
    let weights = params
        .weights()
        .ok_or_else(|| Error::InvalidArgument("log-likelihood requires weights".into()))?;
    for c in params.components() {
        c.validate_pd()?;
    }
    let kernels = component_kernels(params)?;
    let m = data.dim() as f64;
    let p_max = cache.p_max();
    let log_w: Vec<f64> = weights.iter().map(|a| a.ln()).collect();

    let per_series: Result<Vec<f64>> = data
        .series()
        .par_iter()
        .map(|s| {
            let mut quads: Vec<DVector<f64>> = Vec::with_capacity(kernels.len());
            for (comp, ck) in params.components().iter().zip(&kernels) {
                let e = residual_matrix(s, comp, p_max)?;
                quads.push(ck.kern.psi_rows(&e));
            }
            let rows = quads[0].len();
            let mut total = 0.0;
            let mut scores = vec![0.0f64; kernels.len()];
            for t in 0..rows {
                for (k, ck) in kernels.iter().enumerate() {
                    scores[k] =
                        log_w[k] - 0.5 * m * LN_2PI - 0.5 * ck.kern.log_det() - 0.5 * quads[k][t];
                }
                total += log_sum_exp(&scores);
            }
            Ok(total)
        })
        .collect();
    Ok(per_series?.iter().sum())
}

/// Log-likelihood of the per-series mixture (each series drawn from one
/// component): Σ_n LSE_k[log α_k + Σ_t log f_k]. This is the quantity the
/// EM iteration provably never decreases, so it drives the convergence
/// test and the trace.
pub fn series_log_likelihood(
    data: &TimeSeriesSet,
    params: &MixtureParams,
    cache: &QrCache,
) -> Result<f64> {
    let weights = params
        .weights()
        .ok_or_else(|| Error::InvalidArgument("log-likelihood requires weights".into()))?;
    let kernels = component_kernels(params)?;
    let scores = log_scores(data.n_series(), weights, &kernels, cache)?;
    let e = finish_e_step(&scores)?;
    Ok(objective_from_norms(
        &e.row_log_norms,
        cache.rows_used(),
        data.dim(),
    ))
}

/// Fits the mixture by alternating E- and M-steps until the relative
/// log-likelihood change drops below `tol` or `max_iters` is reached.
pub fn fit_cmvar(
    data: &TimeSeriesSet,
    orders: &[usize],
    config: &CmvarConfig,
) -> Result<CmvarResult> {
    let p_max = orders.iter().copied().max().unwrap_or(0);
    let cache = QrCache::build(data, orders, p_max)?;
    fit_cmvar_with_cache(data, orders, config, &cache)
}

/// Same as [`fit_cmvar`] but reuses a prebuilt factorization cache (the
/// cache may carry a larger shared p_max, e.g. during a BIC sweep).
pub fn fit_cmvar_with_cache(
    data: &TimeSeriesSet,
    orders: &[usize],
    config: &CmvarConfig,
    cache: &QrCache,
) -> Result<CmvarResult> {
    config.validate()?;
    if orders.is_empty() {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let n = data.n_series();
    let k = orders.len();
    let rows = cache.rows_used();
    let m = data.dim();

    let mut underflow_events = 0usize;
    let mut first_estep_rows: Option<usize> = None;

    let mut tau = match &config.init {
        CmvarInit::RandomResponsibilities => random_responsibilities(n, k, config.seed)?,
        CmvarInit::FromComponents(comps) => {
            if comps.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "init supplies {} components for K={k}",
                    comps.len()
                )));
            }
            let uniform = DVector::from_element(k, 1.0 / k as f64);
            let params = MixtureParams::new(comps.clone(), Some(uniform))?;
            let e = e_step(data, &params, cache)?;
            underflow_events += e.underflow_rows;
            first_estep_rows = Some(e.underflow_rows);
            e.tau
        }
    };

    let mut prev_params: Option<MixtureParams> = None;
    let mut flags = vec![ComponentFlags::default(); k];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=config.max_iters {
        let mstep = m_step(data, &tau, orders, cache, prev_params.as_ref())?;
        for (acc, f) in flags.iter_mut().zip(&mstep.flags) {
            acc.ridged |= f.ridged;
            acc.frozen |= f.frozen;
            acc.singular_covariance |= f.singular_covariance;
        }
        let estep = e_step(data, &mstep.params, cache)?;
        underflow_events += estep.underflow_rows;
        first_estep_rows.get_or_insert(estep.underflow_rows);

        let ll = objective_from_norms(&estep.row_log_norms, rows, m);
        if !ll.is_finite() {
            return Err(Error::NumericFailure {
                series: 0,
                component: 0,
                detail: format!("log-likelihood became {ll} at iteration {iter}"),
            });
        }
        trace.push(ll);
        tau = estep.tau;
        prev_params = Some(mstep.params);
        iterations = iter;

        if iter >= 2 {
            let prev_ll = trace[iter - 2];
            if (ll - prev_ll).abs() <= config.tol * (1.0 + ll.abs()) {
                converged = true;
                break;
            }
        }
    }

    let params = prev_params.expect("at least one M-step ran");
    let (params, tau, flags) = sort_by_weight(params, tau, flags)?;
    let labels = tau.labels();
    let degenerate_init = k > 1 && components_identical(params.components());

    Ok(CmvarResult {
        log_likelihood: *trace.last().expect("trace is non-empty"),
        params,
        labels,
        tau,
        log_likelihood_trace: trace,
        iterations,
        converged,
        underflow_events,
        underflow_dominated: first_estep_rows == Some(n),
        degenerate_init,
        component_flags: flags,
    })
}

/// Runs `restarts` independent fits and keeps the one with the largest
/// final log-likelihood. Restart 0 uses the configured initialization;
/// later restarts draw fresh random responsibilities.
pub fn fit_cmvar_restarts(
    data: &TimeSeriesSet,
    orders: &[usize],
    config: &CmvarConfig,
    restarts: usize,
    cache: &QrCache,
) -> Result<CmvarResult> {
    let restarts = restarts.max(1);
    let mut best: Option<CmvarResult> = None;
    let mut first_err: Option<Error> = None;
    for r in 0..restarts {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(r as u64);
        if r > 0 {
            cfg.init = CmvarInit::RandomResponsibilities;
        }
        match fit_cmvar_with_cache(data, orders, &cfg, cache) {
            Ok(res) => {
                if best
                    .as_ref()
                    .map(|b| res.log_likelihood > b.log_likelihood)
                    .unwrap_or(true)
                {
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

fn component_kernels(params: &MixtureParams) -> Result<Vec<ComponentKernel>> {
    params
        .components()
        .iter()
        .map(|c| ComponentKernel::new(c, c.covariance()))
        .collect()
}

/// g_{n,k} = log α_k − ((T−p)/2)·log|Ω_k| − ψ_{n,k}/2.
fn log_scores(
    n: usize,
    weights: &DVector<f64>,
    kernels: &[ComponentKernel],
    cache: &QrCache,
) -> Result<DMatrix<f64>> {
    let psi = crate::varfit::psi_matrix(kernels, cache)?;
    let half_rows = cache.rows_used() as f64 / 2.0;
    let mut g = DMatrix::zeros(n, kernels.len());
    for (k, ck) in kernels.iter().enumerate() {
        let base = weights[k].ln() - half_rows * ck.kern.log_det();
        for i in 0..n {
            g[(i, k)] = base - 0.5 * psi[(i, k)];
        }
    }
    Ok(g)
}

fn finish_e_step(scores: &DMatrix<f64>) -> Result<EStep> {
    let (n, k) = scores.shape();
    let mut tau = DMatrix::zeros(n, k);
    let mut log_norms = Vec::with_capacity(n);
    let mut underflow_rows = 0usize;

    for i in 0..n {
        let row: Vec<f64> = scores.row(i).iter().copied().collect();
        if let Some(j) = row.iter().position(|v| v.is_nan()) {
            return Err(Error::NumericFailure {
                series: i,
                component: j,
                detail: "NaN log-score in E-step".into(),
            });
        }
        let finite: Vec<f64> = row.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Err(Error::NumericFailure {
                series: i,
                component: 0,
                detail: "all component log-scores are -inf".into(),
            });
        }
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        if hi - lo > UNDERFLOW_GAP {
            underflow_rows += 1;
        }
        let norm = log_sum_exp(&row);
        // exp(g − LSE) sums to 1 only up to round-off at extreme score
        // magnitudes; renormalize so rows are stochastic by construction.
        let mut sum = 0.0;
        for j in 0..k {
            tau[(i, j)] = (row[j] - norm).exp();
            sum += tau[(i, j)];
        }
        for j in 0..k {
            tau[(i, j)] /= sum;
        }
        log_norms.push(norm);
    }
    Ok(EStep {
        tau: Assignment::soft(tau)?,
        underflow_rows,
        row_log_norms: log_norms,
    })
}

fn objective_from_norms(log_norms: &[f64], rows: usize, m: usize) -> f64 {
    let constant = -(rows as f64) * (m as f64) * 0.5 * LN_2PI;
    log_norms.iter().map(|v| v + constant).sum()
}

fn random_responsibilities(n: usize, k: usize, seed: u64) -> Result<Assignment> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp1};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut tau = DMatrix::zeros(n, k);
    for i in 0..n {
        // Normalized unit-rate exponentials are Dirichlet(1,…,1).
        let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        for j in 0..k {
            tau[(i, j)] = draws[j] / total;
        }
    }
    Assignment::soft(tau)
}

fn sort_by_weight(
    params: MixtureParams,
    tau: Assignment,
    flags: Vec<ComponentFlags>,
) -> Result<(MixtureParams, Assignment, Vec<ComponentFlags>)> {
    let weights = params.weights().expect("cmvar params carry weights");
    let k = params.n_components();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let components: Vec<_> = order.iter().map(|&j| params.components()[j].clone()).collect();
    let new_weights = DVector::from_iterator(k, order.iter().map(|&j| weights[j]));
    let mut new_tau = DMatrix::zeros(tau.n(), k);
    for (dst, &src) in order.iter().enumerate() {
        new_tau.column_mut(dst).copy_from(&tau.tau().column(src));
    }
    let new_flags = order.iter().map(|&j| flags[j]).collect();
    Ok((
        MixtureParams::new(components, Some(new_weights))?,
        Assignment::soft(new_tau)?,
        new_flags,
    ))
}

fn components_identical(comps: &[VarComponent]) -> bool {
    comps.windows(2).all(|w| {
        let d_theta = (w[0].stacked() - w[1].stacked()).amax();
        let d_cov = (w[0].covariance() - w[1].covariance()).amax();
        d_theta < 1e-10 && d_cov < 1e-10
    })
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() {
        return hi;
    }
    hi + values.iter().map(|v| (v - hi).exp()).sum::<f64>().ln()
}
