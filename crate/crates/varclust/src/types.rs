//! Domain types shared by every algorithm: time series containers, VAR
//! component parameters, mixture parameters and cluster assignments.
//!
//! All types are immutable value objects after construction and safe to
//! share read-only across worker threads.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance for symmetry / row-sum / weight-sum checks on construction.
pub const VALIDATION_TOL: f64 = 1e-12;

/// One vector time series: a T×m matrix whose rows are time points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    id: String,
    values: DMatrix<f64>,
}

impl TimeSeries {
    /// Builds a series from a T×m matrix of observations. Every entry must
    /// be finite; T and m must be at least 1.
    pub fn new(id: impl Into<String>, values: DMatrix<f64>) -> Result<Self> {
        let id = id.into();
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "series `{id}` must have at least one row and one column"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "series `{id}` contains a non-finite value"
            )));
        }
        Ok(Self { id, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// T×m observation matrix; row index increases with time.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of time points T.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Variable dimension m.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// An ordered set of N series sharing the same T and m.
#[derive(Debug, Clone)]
pub struct TimeSeriesSet {
    series: Vec<TimeSeries>,
}

impl TimeSeriesSet {
    /// Validates that the set is non-empty and that every series has the
    /// same length and variable dimension. Variable-length sets are
    /// rejected at load time.
    pub fn new(series: Vec<TimeSeries>) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset must contain at least one series".into()))?;
        let (t, m) = (first.len(), first.dim());
        for s in &series {
            if s.len() != t {
                return Err(Error::DimensionMismatch {
                    expected: t,
                    got: s.len(),
                    context: format!("series `{}` length", s.id()),
                });
            }
            if s.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: s.dim(),
                    context: format!("series `{}` dimension", s.id()),
                });
            }
        }
        Ok(Self { series })
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    /// Shared series length T.
    pub fn len_t(&self) -> usize {
        self.series[0].len()
    }

    /// Shared variable dimension m.
    pub fn dim(&self) -> usize {
        self.series[0].dim()
    }
}

/// One cluster's VAR model: intercept, lag matrices and innovation
/// covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct VarComponent {
    intercept: DVector<f64>,
    lag_matrices: Vec<DMatrix<f64>>,
    covariance: DMatrix<f64>,
}

impl VarComponent {
    /// Validates dimensions, finiteness and covariance symmetry (within
    /// 1e-12 relative). Positive definiteness is checked where the
    /// covariance is consumed as a model, not here, so that estimation
    /// routines can return singular covariances with a flag.
    pub fn new(
        intercept: DVector<f64>,
        lag_matrices: Vec<DMatrix<f64>>,
        covariance: DMatrix<f64>,
    ) -> Result<Self> {
        let m = intercept.len();
        if m == 0 {
            return Err(Error::InvalidArgument("intercept must be non-empty".into()));
        }
        for (i, a) in lag_matrices.iter().enumerate() {
            if a.nrows() != m || a.ncols() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: a.nrows().max(a.ncols()),
                    context: format!("lag matrix {}", i + 1),
                });
            }
        }
        if covariance.nrows() != m || covariance.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: covariance.nrows(),
                context: "covariance".into(),
            });
        }
        let scale = covariance.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for i in 0..m {
            for j in (i + 1)..m {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > VALIDATION_TOL * scale {
                    return Err(Error::InvalidArgument(
                        "covariance is not symmetric".into(),
                    ));
                }
            }
        }
        let finite = intercept.iter().all(|v| v.is_finite())
            && lag_matrices.iter().all(|a| a.iter().all(|v| v.is_finite()))
            && covariance.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "component contains a non-finite value".into(),
            ));
        }
        Ok(Self {
            intercept,
            lag_matrices,
            covariance,
        })
    }

    /// Rebuilds a component from the stacked coefficient matrix
    /// Θ̃ = [Θ₀, Θ₁, …, Θ_p] of shape m×(1+mp).
    pub fn from_stacked(stacked: &DMatrix<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let m = stacked.nrows();
        if m == 0 || (stacked.ncols() + m - 1) % m != 0 {
            return Err(Error::InvalidArgument(format!(
                "stacked coefficient matrix {}x{} is not m x (1+mp)",
                stacked.nrows(),
                stacked.ncols()
            )));
        }
        let p = (stacked.ncols() - 1) / m;
        let intercept = DVector::from_column_slice(stacked.column(0).as_slice());
        let lag_matrices = (0..p)
            .map(|i| stacked.columns(1 + i * m, m).into_owned())
            .collect();
        Self::new(intercept, lag_matrices, covariance)
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    pub fn lag_matrices(&self) -> &[DMatrix<f64>] {
        &self.lag_matrices
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// VAR order p.
    pub fn order(&self) -> usize {
        self.lag_matrices.len()
    }

    /// Variable dimension m.
    pub fn dim(&self) -> usize {
        self.intercept.len()
    }

    /// The stacked coefficient matrix Θ̃ = [Θ₀, Θ₁, …, Θ_p], m×(1+mp).
    pub fn stacked(&self) -> DMatrix<f64> {
        let m = self.dim();
        let p = self.order();
        let mut out = DMatrix::zeros(m, 1 + m * p);
        out.column_mut(0).copy_from(&self.intercept);
        for (i, a) in self.lag_matrices.iter().enumerate() {
            out.columns_mut(1 + i * m, m).copy_from(a);
        }
        out
    }

    /// Errors unless the covariance admits a Cholesky factorization.
    pub fn validate_pd(&self) -> Result<()> {
        if self.covariance.clone().cholesky().is_none() {
            return Err(Error::InvalidCovariance(
                "covariance is not positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// The K components of a mixture plus optional mixing weights (present
/// for the soft algorithm, absent for the hard one).
#[derive(Debug, Clone)]
pub struct MixtureParams {
    components: Vec<VarComponent>,
    weights: Option<DVector<f64>>,
}

impl MixtureParams {
    pub fn new(components: Vec<VarComponent>, weights: Option<DVector<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        let m = components[0].dim();
        if components.iter().any(|c| c.dim() != m) {
            return Err(Error::InvalidArgument(
                "components disagree on variable dimension".into(),
            ));
        }
        if let Some(w) = &weights {
            if w.len() != components.len() {
                return Err(Error::DimensionMismatch {
                    expected: components.len(),
                    got: w.len(),
                    context: "mixture weights".into(),
                });
            }
            if w.iter().any(|&a| a < 0.0 || !a.is_finite()) {
                return Err(Error::InvalidArgument(
                    "mixture weights must be finite and non-negative".into(),
                ));
            }
            if (w.sum() - 1.0).abs() > VALIDATION_TOL {
                return Err(Error::InvalidArgument(format!(
                    "mixture weights sum to {}, expected 1",
                    w.sum()
                )));
            }
        }
        Ok(Self {
            components,
            weights,
        })
    }

    pub fn components(&self) -> &[VarComponent] {
        &self.components
    }

    pub fn weights(&self) -> Option<&DVector<f64>> {
        self.weights.as_ref()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Largest component order.
    pub fn max_order(&self) -> usize {
        self.components.iter().map(|c| c.order()).max().unwrap_or(0)
    }

    /// Per-component orders p_1..p_K.
    pub fn orders(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.order()).collect()
    }
}

/// Per-component bookkeeping flags carried through fit results. None of
/// these abort a fit; they record which numerical fallbacks fired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComponentFlags {
    /// Ridge jitter was applied when solving this component's normal
    /// equations.
    pub ridged: bool,
    /// The component lost its responsibility mass and was frozen at its
    /// previous value.
    pub frozen: bool,
    /// The cluster emptied and was reseeded from the worst-fit series.
    pub reseeded: bool,
    /// The residual covariance estimate was singular (jitter applied
    /// where it is consumed).
    pub singular_covariance: bool,
}

/// An N×K responsibility matrix: soft rows sum to one, hard rows are
/// one-hot. Index sets I_k are derived from hard rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    tau: DMatrix<f64>,
}

impl Assignment {
    /// Wraps a soft responsibility matrix, validating that every row is a
    /// probability vector (sums to 1 within 1e-12, entries in \[0,1\]).
    pub fn soft(tau: DMatrix<f64>) -> Result<Self> {
        if tau.nrows() == 0 || tau.ncols() == 0 {
            return Err(Error::InvalidArgument("assignment must be non-empty".into()));
        }
        for n in 0..tau.nrows() {
            let mut sum = 0.0;
            for k in 0..tau.ncols() {
                let v = tau[(n, k)];
                if !(0.0..=1.0 + VALIDATION_TOL).contains(&v) || !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "responsibility ({n},{k}) = {v} outside [0,1]"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > VALIDATION_TOL {
                return Err(Error::InvalidArgument(format!(
                    "responsibility row {n} sums to {sum}"
                )));
            }
        }
        Ok(Self { tau })
    }

    /// Builds one-hot rows from 0-based labels.
    pub fn hard(labels: &[usize], k: usize) -> Result<Self> {
        if labels.is_empty() || k == 0 {
            return Err(Error::InvalidArgument("assignment must be non-empty".into()));
        }
        let mut tau = DMatrix::zeros(labels.len(), k);
        for (n, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidArgument(format!(
                    "label {l} out of range for K={k}"
                )));
            }
            tau[(n, l)] = 1.0;
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> &DMatrix<f64> {
        &self.tau
    }

    pub fn n(&self) -> usize {
        self.tau.nrows()
    }

    pub fn k(&self) -> usize {
        self.tau.ncols()
    }

    /// True when every row has exactly one entry equal to 1.
    pub fn is_hard(&self) -> bool {
        (0..self.n()).all(|n| {
            let row = self.tau.row(n);
            row.iter().filter(|&&v| v == 1.0).count() == 1
                && row.iter().filter(|&&v| v == 0.0).count() == self.k() - 1
        })
    }

    /// 0-based row-argmax labels; ties break toward the lowest index.
    pub fn labels(&self) -> Vec<usize> {
        (0..self.n())
            .map(|n| {
                let row = self.tau.row(n);
                let mut best = 0;
                for k in 1..self.k() {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    /// Index sets I_k of the hard labels derived from this assignment.
    pub fn index_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.k()];
        for (n, l) in self.labels().into_iter().enumerate() {
            sets[l].push(n);
        }
        sets
    }

    /// Per-column responsibility mass Σ_n τ_{n,k}.
    pub fn column_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.k(), (0..self.k()).map(|k| self.tau.column(k).sum()))
    }
}
