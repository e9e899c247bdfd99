use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use super::collection::{BlockCollection, BlockMeta};
use crate::error::{Error, Result};
use crate::linalg::{orient_largest_positive, thin_svd};

const RANK_TOL: f64 = 1e-10;

/// Consensus PCA with super weights, obtained from the SVD of the scaled
/// concatenation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MbpcaModel {
    pub blocks: Vec<BlockMeta>,
    /// `N × A`, mutually orthogonal columns.
    pub super_scores: Array2<f64>,
    /// Unit-norm loadings on the concatenated feature space, `Σ R_b × A`.
    pub loadings: Array2<f64>,
    /// Fraction of the total sum of squares captured by each component.
    pub explained_variance: Vec<f64>,
    /// Share of each component's loading energy carried by each block, `B × A`.
    pub block_importance: Array2<f64>,
    offsets: Vec<usize>,
}

impl MbpcaModel {
    pub fn n_components(&self) -> usize {
        self.super_scores.ncols()
    }

    /// `p_b,a = X_bᵀ t_a / (t_aᵀ t_a)` for block `b`, `R_b × A`.
    pub fn block_loadings(&self, b: usize) -> Array2<f64> {
        self.loadings
            .slice(s![self.offsets[b]..self.offsets[b + 1], ..])
            .to_owned()
    }

    /// Super scores of a collection transformed with the same scalings.
    pub fn scores(&self, c: &BlockCollection) -> Result<Array2<f64>> {
        let x = c.concat();
        if x.ncols() != self.loadings.nrows() {
            return Err(Error::Shape(format!(
                "collection has {} features, model expects {}",
                x.ncols(),
                self.loadings.nrows()
            )));
        }
        Ok(x.dot(&self.loadings))
    }
}

pub fn fit_mbpca(c: &BlockCollection, a: usize) -> Result<MbpcaModel> {
    if a == 0 {
        return Err(Error::InvalidArgument(
            "MB-PCA needs at least one component".into(),
        ));
    }
    let x = c.concat();
    let svd = thin_svd(x.view())?;
    let rank = svd.rank(RANK_TOL);
    if a > rank {
        return Err(Error::Rank { requested: a, rank });
    }
    let total_ss: f64 = x.iter().map(|v| v * v).sum();
    let offsets = c.offsets();
    let mut scores = Array2::zeros((x.nrows(), a));
    let mut loadings = Array2::zeros((x.ncols(), a));
    let mut importance = Array2::zeros((c.n_blocks(), a));
    let mut explained = Vec::with_capacity(a);
    for k in 0..a {
        let sigma = svd.singular_values[k];
        let mut v: Array1<f64> = svd.v.column(k).to_owned();
        let mut t: Array1<f64> = svd.u.column(k).mapv(|u| u * sigma);
        if orient_largest_positive(v.view_mut()) {
            t.mapv_inplace(|x| -x);
        }
        // X_bᵀ t / (tᵀt) equals the block slice of v since Xᵀu = σv.
        for b in 0..c.n_blocks() {
            let part = v.slice(s![offsets[b]..offsets[b + 1]]);
            importance[[b, k]] = part.dot(&part);
        }
        scores.column_mut(k).assign(&t);
        loadings.column_mut(k).assign(&v);
        explained.push(sigma * sigma / total_ss);
    }
    Ok(MbpcaModel {
        blocks: c.meta().to_vec(),
        super_scores: scores,
        loadings,
        explained_variance: explained,
        block_importance: importance,
        offsets,
    })
}
