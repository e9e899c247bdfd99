use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;

/// Ridge added to the pooled covariance, relative to its mean eigenvalue.
pub const DEFAULT_SHRINKAGE: f64 = 1e-6;

/// Gaussian LDA for labels `0` (control) and `1` (infected).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LdaModel {
    /// Class means, row `k` for label `k`.
    pub means: Array2<f64>,
    /// Pooled covariance after shrinkage.
    pub covariance: Array2<f64>,
    pub priors: [f64; 2],
    pub shrinkage: f64,
    precision: Array2<f64>,
}

pub fn fit_lda(scores: ArrayView2<f64>, labels: &[u8]) -> Result<LdaModel> {
    fit_lda_with(scores, labels, DEFAULT_SHRINKAGE)
}

pub fn fit_lda_with(scores: ArrayView2<f64>, labels: &[u8], shrinkage: f64) -> Result<LdaModel> {
    let (n, a) = scores.dim();
    if a == 0 {
        return Err(Error::InvalidArgument(
            "LDA needs at least one score column".into(),
        ));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("label {l} is not 0 or 1")));
    }
    if !(shrinkage >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage {shrinkage} is negative"
        )));
    }
    let mut counts = [0usize; 2];
    for &l in labels {
        counts[l as usize] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::Degenerate(
            "LDA training data holds a single class".into(),
        ));
    }
    if n <= a.max(2) {
        return Err(Error::InvalidArgument(format!(
            "{n} samples cannot fit {a} score dimensions"
        )));
    }
    let mut means = Array2::<f64>::zeros((2, a));
    for (row, &l) in scores.axis_iter(Axis(0)).zip(labels) {
        let mut m = means.row_mut(l as usize);
        m += &row;
    }
    for (mut m, &count) in means.axis_iter_mut(Axis(0)).zip(&counts) {
        m /= count as f64;
    }
    let mut cov = Array2::<f64>::zeros((a, a));
    for (row, &l) in scores.axis_iter(Axis(0)).zip(labels) {
        let d = &row - &means.row(l as usize);
        let d = d.view().insert_axis(Axis(1));
        cov += &d.dot(&d.t());
    }
    cov /= (n - 2) as f64;
    let ridge = shrinkage * cov.diag().sum() / a as f64;
    for i in 0..a {
        cov[[i, i]] += ridge;
    }
    let precision = spd_inverse(cov.view())
        .map_err(|_| Error::Degenerate("pooled covariance is not positive definite".into()))?;
    Ok(LdaModel {
        means,
        covariance: cov,
        priors: [counts[0] as f64 / n as f64, counts[1] as f64 / n as f64],
        shrinkage,
        precision,
    })
}

impl LdaModel {
    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// Linear discriminant values `N × 2`.
    fn discriminants(&self, scores: ArrayView2<f64>) -> Result<Array2<f64>> {
        if scores.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "scores have {} columns, model expects {}",
                scores.ncols(),
                self.dim()
            )));
        }
        let coef = self.precision.dot(&self.means.t());
        let mut out = scores.dot(&coef);
        for k in 0..2 {
            let mu = self.means.row(k);
            let offset = -0.5 * mu.dot(&coef.column(k)) + self.priors[k].ln();
            out.column_mut(k).mapv_inplace(|v| v + offset);
        }
        Ok(out)
    }

    /// Labels (argmax posterior, control on exact ties) and `N × 2` posteriors.
    pub fn predict(&self, scores: ArrayView2<f64>) -> Result<(Vec<u8>, Array2<f64>)> {
        let mut post = self.discriminants(scores)?;
        let mut labels = Vec::with_capacity(post.nrows());
        for mut row in post.axis_iter_mut(Axis(0)) {
            let m = row[0].max(row[1]);
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row /= s;
            labels.push(u8::from(row[1] > row[0]));
        }
        Ok((labels, post))
    }

    pub fn predict_labels(&self, scores: ArrayView2<f64>) -> Result<Vec<u8>> {
        let d = self.discriminants(scores)?;
        Ok(d.axis_iter(Axis(0))
            .map(|r| u8::from(r[1] > r[0]))
            .collect())
    }

    /// Log-posterior odds of class 1 against class 0.
    pub fn log_odds(&self, scores: ArrayView2<f64>) -> Result<Array1<f64>> {
        let d = self.discriminants(scores)?;
        Ok(&d.column(1) - &d.column(0))
    }
}
