//! Lagged design-matrix and residual construction.
//!
//! Every model predicts only the time points t = p_max+1, …, T regardless
//! of its own order, so that objective and likelihood values stay
//! comparable across orders and cluster counts. Row r of a design matrix
//! therefore corresponds to time t = p_max+1+r.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{TimeSeries, VarComponent};

/// Builds the regression pair (X, Y) for one series at a given order.
///
/// X has shape (T−p_max)×(1+mp) with rows [1, Y_{t−1}ᵀ, …, Y_{t−p}ᵀ];
/// Y has shape (T−p_max)×m with rows Y_tᵀ.
pub fn build_design(
    series: &TimeSeries,
    order: usize,
    p_max: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if order > p_max {
        return Err(Error::InvalidArgument(format!(
            "order {order} exceeds p_max {p_max}"
        )));
    }
    let t_len = series.len();
    if t_len <= p_max + 1 {
        return Err(Error::InsufficientData {
            id: series.id().to_string(),
            t: t_len,
            p_max,
        });
    }
    let m = series.dim();
    let rows = t_len - p_max;
    let vals = series.values();

    let mut x = DMatrix::zeros(rows, 1 + m * order);
    let mut y = DMatrix::zeros(rows, m);
    for r in 0..rows {
        // 0-based row index of time t = p_max+1+r.
        let t = p_max + r;
        x[(r, 0)] = 1.0;
        for lag in 1..=order {
            for j in 0..m {
                x[(r, 1 + (lag - 1) * m + j)] = vals[(t - lag, j)];
            }
        }
        for j in 0..m {
            y[(r, j)] = vals[(t, j)];
        }
    }
    Ok((x, y))
}

/// Residual matrix E = Y − X·Θ̃ᵀ of shape (T−p_max)×m for one series
/// under one component.
pub fn residual_matrix(
    series: &TimeSeries,
    comp: &VarComponent,
    p_max: usize,
) -> Result<DMatrix<f64>> {
    if comp.dim() != series.dim() {
        return Err(Error::DimensionMismatch {
            expected: series.dim(),
            got: comp.dim(),
            context: format!("component dimension vs series `{}`", series.id()),
        });
    }
    let (x, y) = build_design(series, comp.order(), p_max)?;
    Ok(y - x * comp.stacked().transpose())
}
