//! Per-series least-squares VAR estimation and the shared fast-computation
//! layer: the QR cache, Cholesky utilities and the ψ dissimilarity kernel.
//!
//! For each series the thin QR factorization X = QR is computed once and
//! only R and Qᵀ·Y are retained (Q itself is discarded). Together with the
//! orthogonal-complement Gram matrix S⊥ = YᵀY − (QᵀY)ᵀ(QᵀY) these carry
//! everything the iterative algorithms need:
//!
//!   XᵀX = RᵀR,   XᵀY = Rᵀ(QᵀY),   EᵀE = (QᵀY − RΘ̃ᵀ)ᵀ(QᵀY − RΘ̃ᵀ) + S⊥,
//!
//! so residual Gram matrices and ψ values are evaluated without touching
//! the raw data again, and as sums of positive semidefinite terms.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::design::build_design;
use crate::error::{Error, Result};
use crate::types::{TimeSeries, TimeSeriesSet, VarComponent};

/// Relative threshold below which a diagonal entry of R marks the design
/// matrix as rank-deficient.
const DEGENERATE_REL_TOL: f64 = 1e-10;

/// Ridge jitter scale used when solving with a degenerate design.
const RIDGE_SCALE: f64 = 1e-8;

/// Cached factorization products for one (series, order) pair.
#[derive(Debug, Clone)]
pub struct QrEntry {
    /// Upper-triangular R of the thin QR of X, (1+mp)×(1+mp).
    pub r: DMatrix<f64>,
    /// QᵀY, (1+mp)×m.
    pub yq: DMatrix<f64>,
    /// YᵀY − yqᵀ·yq, the Gram matrix of the component of Y orthogonal to
    /// the column span of X. Positive semidefinite by construction.
    pub s_perp: DMatrix<f64>,
    /// Number of regression rows, T − p_max.
    pub rows_used: usize,
    /// True when R has a near-zero diagonal (collinear design columns).
    pub degenerate: bool,
}

impl QrEntry {
    fn build(series: &TimeSeries, order: usize, p_max: usize) -> Result<Self> {
        let (x, y) = build_design(series, order, p_max)?;
        let rows = x.nrows();
        let cols = x.ncols();
        let qr = x.qr();
        let r = qr.r();
        let mut z = y;
        qr.q_tr_mul(&mut z);
        let yq = z.rows(0, cols).into_owned();
        let s_perp = if rows > cols {
            let tail = z.rows(cols, rows - cols);
            let mut g = tail.transpose() * tail;
            symmetrize(&mut g);
            g
        } else {
            DMatrix::zeros(yq.ncols(), yq.ncols())
        };
        let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let degenerate = (0..cols).any(|i| r[(i, i)].abs() < DEGENERATE_REL_TOL * max_diag);
        Ok(Self {
            r,
            yq,
            s_perp,
            rows_used: rows,
            degenerate,
        })
    }
}

/// Per-(series, order) QR factorization products shared by all fast paths.
///
/// Immutable after construction; one entry exists per (series, distinct
/// order), so a single shared order yields exactly N entries.
#[derive(Debug, Clone)]
pub struct QrCache {
    entries: BTreeMap<usize, Vec<QrEntry>>,
    p_max: usize,
    n_series: usize,
    rows_used: usize,
    dim: usize,
}

impl QrCache {
    /// Factorizes every (series, distinct order) pair. Parallel over
    /// series; the cache is read-only afterwards.
    pub fn build(data: &TimeSeriesSet, orders: &[usize], p_max: usize) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidArgument("no orders requested".into()));
        }
        let distinct: BTreeSet<usize> = orders.iter().copied().collect();
        if let Some(&bad) = distinct.iter().find(|&&p| p > p_max) {
            return Err(Error::InvalidArgument(format!(
                "order {bad} exceeds p_max {p_max}"
            )));
        }
        let mut entries = BTreeMap::new();
        for &order in &distinct {
            let per_series: Result<Vec<QrEntry>> = data
                .series()
                .par_iter()
                .map(|s| QrEntry::build(s, order, p_max))
                .collect();
            entries.insert(order, per_series?);
        }
        Ok(Self {
            entries,
            p_max,
            n_series: data.n_series(),
            rows_used: data.len_t() - p_max,
            dim: data.dim(),
        })
    }

    pub fn entry(&self, series: usize, order: usize) -> Result<&QrEntry> {
        self.entries
            .get(&order)
            .and_then(|v| v.get(series))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no cache entry for series {series}, order {order}"
                ))
            })
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    /// Regression rows per series, T − p_max.
    pub fn rows_used(&self) -> usize {
        self.rows_used
    }

    pub fn n_series(&self) -> usize {
        self.n_series
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of cached entries across distinct orders.
    pub fn n_entries(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn any_degenerate(&self) -> bool {
        self.entries
            .values()
            .any(|v| v.iter().any(|e| e.degenerate))
    }
}

/// A per-series least-squares VAR fit. The covariance is returned even
/// when singular; flags record which fallbacks fired.
#[derive(Debug, Clone)]
pub struct VarFit {
    /// Stacked coefficients Θ̃ = [Θ₀, Θ₁, …, Θ_p], m×(1+mp).
    pub theta: DMatrix<f64>,
    /// Residual covariance EᵀE / rows.
    pub covariance: DMatrix<f64>,
    pub order: usize,
    pub rows: usize,
    /// Ridge jitter was applied because the design was rank-deficient.
    pub ridged: bool,
    /// The residual covariance has no Cholesky factorization.
    pub singular_covariance: bool,
}

impl VarFit {
    /// Converts into a model component; fails if the covariance is not
    /// positive definite.
    pub fn into_component(self) -> Result<VarComponent> {
        let comp = VarComponent::from_stacked(&self.theta, self.covariance)?;
        comp.validate_pd()?;
        Ok(comp)
    }
}

/// Ordinary least squares fit of a VAR(p) to a single series, using its
/// own regression window (p_max = p).
pub fn fit_var_ols(series: &TimeSeries, order: usize) -> Result<VarFit> {
    let entry = QrEntry::build(series, order, order)?;
    let (theta, covariance, ridged) = ols_from_entry(&entry)?;
    let singular = covariance_is_singular(&covariance, &entry);
    Ok(VarFit {
        theta,
        covariance,
        order,
        rows: entry.rows_used,
        ridged,
        singular_covariance: singular,
    })
}

/// Solves the least-squares problem recorded in a cache entry.
///
/// Returns (Θ̃, residual covariance, ridged). The clean path is
/// back-substitution on R; a degenerate design falls back to ridge-
/// regularized normal equations with jitter 1e-8·trace(XᵀX)/(1+mp).
pub fn ols_from_entry(entry: &QrEntry) -> Result<(DMatrix<f64>, DMatrix<f64>, bool)> {
    let cols = entry.r.ncols();
    let (theta_t, ridged) = if entry.degenerate {
        let mut a = entry.r.transpose() * &entry.r;
        let jitter = RIDGE_SCALE * a.trace() / cols as f64;
        for i in 0..cols {
            a[(i, i)] += jitter;
        }
        let b = entry.r.transpose() * &entry.yq;
        let (theta_t, _) = solve_spd(a, &b)?;
        (theta_t, true)
    } else {
        let theta_t = entry
            .r
            .solve_upper_triangular(&entry.yq)
            .ok_or_else(|| Error::InvalidArgument("singular R in back-substitution".into()))?;
        (theta_t, false)
    };
    let cov = residual_gram(entry, &theta_t) / entry.rows_used as f64;
    Ok((theta_t.transpose(), cov, ridged))
}

/// A residual covariance counts as singular when its Cholesky fails or
/// when some conditional variance is negligible relative to the signal
/// energy of the series that produced it.
pub fn covariance_is_singular(cov: &DMatrix<f64>, entry: &QrEntry) -> bool {
    let signal = (entry.yq.norm_squared() + entry.s_perp.trace())
        / (entry.rows_used as f64 * cov.nrows() as f64);
    covariance_is_singular_scaled(cov, signal)
}

/// Same check against an explicit mean-square signal level (used for
/// pooled cluster covariances).
pub fn covariance_is_singular_scaled(cov: &DMatrix<f64>, signal_scale: f64) -> bool {
    let m = cov.nrows();
    match cov.clone().cholesky() {
        None => true,
        Some(ch) => {
            let l = ch.l();
            (0..m).any(|i| l[(i, i)].powi(2) <= 1e-12 * signal_scale.max(f64::MIN_POSITIVE))
        }
    }
}

/// Residual Gram matrix EᵀE for a cache entry under stacked coefficients
/// given as Θ̃ᵀ, (1+mp)×m.
pub fn residual_gram(entry: &QrEntry, theta_t: &DMatrix<f64>) -> DMatrix<f64> {
    let d = &entry.yq - &entry.r * theta_t;
    let mut g = d.transpose() * d + &entry.s_perp;
    symmetrize(&mut g);
    g
}

/// Cholesky-backed evaluation kernel for one covariance matrix.
///
/// Holds the lower factor L, the explicit inverse and the log-determinant
/// so that ψ values can be evaluated both from explicit residual rows and
/// from cached Gram matrices.
#[derive(Debug, Clone)]
pub struct CovKernel {
    l: DMatrix<f64>,
    inv: DMatrix<f64>,
    log_det: f64,
}

impl CovKernel {
    /// Symmetrizes the input (absorbing round-off) and factorizes it.
    pub fn new(covariance: &DMatrix<f64>) -> Result<Self> {
        let mut c = covariance.clone();
        symmetrize(&mut c);
        let chol = c
            .cholesky()
            .ok_or_else(|| Error::InvalidCovariance("Cholesky factorization failed".into()))?;
        let l = chol.l();
        let log_det = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
        Ok(Self {
            inv: chol.inverse(),
            l,
            log_det,
        })
    }

    /// log det Ω = 2·Σ log L_ii.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// ψ = Σ_t ‖L⁻¹e_t‖² for explicit residual rows, solved by forward
    /// substitution.
    pub fn psi_residuals(&self, residuals: &DMatrix<f64>) -> f64 {
        let z = self
            .l
            .solve_lower_triangular(&residuals.transpose())
            .expect("Cholesky factor has positive diagonal");
        z.norm_squared()
    }

    /// Per-time-point quadratic forms e_tᵀΩ⁻¹e_t for explicit residual
    /// rows (one value per row of E).
    pub fn psi_rows(&self, residuals: &DMatrix<f64>) -> nalgebra::DVector<f64> {
        let z = self
            .l
            .solve_lower_triangular(&residuals.transpose())
            .expect("Cholesky factor has positive diagonal");
        nalgebra::DVector::from_iterator(
            z.ncols(),
            z.column_iter().map(|c| c.norm_squared()),
        )
    }

    /// ψ = tr(Ω⁻¹ EᵀE) from a residual Gram matrix.
    pub fn psi_gram(&self, gram: &DMatrix<f64>) -> f64 {
        self.inv.dot(gram).max(0.0)
    }

    /// ψ for a cache entry under Θ̃ᵀ: the fit part by forward substitution
    /// on (QᵀY − RΘ̃ᵀ)ᵀ plus the constant tr(Ω⁻¹ S⊥) part.
    pub fn psi_entry(&self, entry: &QrEntry, theta_t: &DMatrix<f64>) -> f64 {
        let d = &entry.yq - &entry.r * theta_t;
        let z = self
            .l
            .solve_lower_triangular(&d.transpose())
            .expect("Cholesky factor has positive diagonal");
        (z.norm_squared() + self.inv.dot(&entry.s_perp)).max(0.0)
    }
}

/// Dissimilarity ψ = Σ_t e_tᵀ Ω⁻¹ e_t evaluated through the Cholesky
/// factor of Ω. Non-negative; zero exactly when the residuals vanish.
pub fn psi(residuals: &DMatrix<f64>, covariance: &DMatrix<f64>) -> Result<f64> {
    Ok(CovKernel::new(covariance)?.psi_residuals(residuals))
}

/// Builds a kernel, escalating to a small diagonal jitter when the
/// covariance estimate is singular (noise-free clusters produce exactly
/// zero residual covariance; the clustering loop must survive them).
/// The flag reports whether jitter was applied.
pub fn kernel_with_jitter(covariance: &DMatrix<f64>) -> Result<(CovKernel, bool)> {
    if let Ok(k) = CovKernel::new(covariance) {
        return Ok((k, false));
    }
    let m = covariance.nrows();
    let delta = 1e-10 * (covariance.trace() / m as f64).max(1.0);
    let mut c = covariance.clone();
    for i in 0..m {
        c[(i, i)] += delta;
    }
    CovKernel::new(&c).map(|k| (k, true))
}

/// One mixture component prepared for repeated ψ evaluation: stacked
/// coefficients transposed once, plus the covariance kernel chosen by the
/// caller (raw or determinant-normalized).
#[derive(Debug, Clone)]
pub struct ComponentKernel {
    pub theta_t: DMatrix<f64>,
    pub kern: CovKernel,
    pub order: usize,
    /// Jitter was needed to factorize the covariance.
    pub jittered: bool,
}

impl ComponentKernel {
    pub fn new(comp: &VarComponent, covariance: &DMatrix<f64>) -> Result<Self> {
        let (kern, jittered) = kernel_with_jitter(covariance)?;
        Ok(Self {
            theta_t: comp.stacked().transpose(),
            kern,
            order: comp.order(),
            jittered,
        })
    }
}

/// N×K matrix of ψ_{n,k} values, evaluated from the cache. Parallel over
/// series; entry order is deterministic.
pub fn psi_matrix(kernels: &[ComponentKernel], cache: &QrCache) -> Result<DMatrix<f64>> {
    let n = cache.n_series();
    let k = kernels.len();
    let rows: Result<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            kernels
                .iter()
                .map(|ck| Ok(ck.kern.psi_entry(cache.entry(i, ck.order)?, &ck.theta_t)))
                .collect()
        })
        .collect();
    let rows = rows?;
    Ok(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
}

/// log det of a positive-definite matrix via its Cholesky factor.
pub fn log_det_pd(covariance: &DMatrix<f64>) -> Result<f64> {
    Ok(CovKernel::new(covariance)?.log_det())
}

/// Solves A·X = B for symmetric positive (semi)definite A, escalating to
/// ridge jitter when the Cholesky factorization fails. Returns X and
/// whether jitter was applied.
pub fn solve_spd(mut a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    symmetrize(&mut a);
    if let Some(chol) = a.clone().cholesky() {
        return Ok((chol.solve(b), false));
    }
    let dim = a.nrows();
    let jitter = RIDGE_SCALE * a.trace().max(1e-300) / dim as f64;
    for i in 0..dim {
        a[(i, i)] += jitter;
    }
    a.clone()
        .cholesky()
        .map(|c| (c.solve(b), true))
        .ok_or_else(|| Error::InvalidArgument("normal equations are singular".into()))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
