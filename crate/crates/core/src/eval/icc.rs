//! Two-way absolute-agreement intraclass correlations, ICC(A,1) and ICC(A,k).

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc_single: f64,
    pub icc_average: f64,
    pub ms_rows: f64,
    pub ms_columns: f64,
    pub ms_error: f64,
    pub n: usize,
    pub k: usize,
}

/// `scores` is targets × raters.
pub fn icc_two_way_mixed_absolute(scores: ArrayView2<'_, f64>) -> Result<IccResult> {
    let (n, k) = scores.dim();
    if n < 2 || k < 2 {
        return Err(Error::Shape(format!("ICC needs at least 2x2 scores, got {n}x{k}")));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("ICC scores must be finite"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let grand = scores.mean().expect("non-empty");
    let ss_rows = kf * scores
        .mean_axis(Axis(1))
        .expect("non-empty")
        .iter()
        .map(|m| (m - grand).powi(2))
        .sum::<f64>();

    // Column and residual sums are invariant to subtracting a per-row
    // constant; taking it from the first column makes identical columns
    // produce exact zeros.
    let shifted = Array2::from_shape_fn((n, k), |(i, j)| scores[[i, j]] - scores[[i, 0]]);
    let sg = shifted.mean().expect("non-empty");
    let col_means = shifted.mean_axis(Axis(0)).expect("non-empty");
    let row_means = shifted.mean_axis(Axis(1)).expect("non-empty");
    let ss_cols = nf * col_means.iter().map(|m| (m - sg).powi(2)).sum::<f64>();
    let mut ss_err = 0.0;
    for i in 0..n {
        for j in 0..k {
            ss_err += (shifted[[i, j]] - row_means[i] - col_means[j] + sg).powi(2);
        }
    }

    let ms_rows = ss_rows / (nf - 1.0);
    let ms_columns = ss_cols / (kf - 1.0);
    let ms_error = ss_err / ((nf - 1.0) * (kf - 1.0));
    let den_single = ms_rows + (kf - 1.0) * ms_error + kf / nf * (ms_columns - ms_error);
    let den_average = ms_rows + (ms_columns - ms_error) / nf;
    if den_single == 0.0 || den_average == 0.0 {
        return Err(Error::Numeric("ICC undefined: scores have zero variance".into()));
    }
    Ok(IccResult {
        icc_single: (ms_rows - ms_error) / den_single,
        icc_average: (ms_rows - ms_error) / den_average,
        ms_rows,
        ms_columns,
        ms_error,
        n,
        k,
    })
}
