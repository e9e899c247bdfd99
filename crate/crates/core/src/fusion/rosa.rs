use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::collection::{BlockCollection, BlockMeta};
use crate::block::BlockKind;
use crate::error::{Error, Result};
use crate::linalg::inverse;

/// Relative size below which an orthogonalized candidate score is rejected.
const CANDIDATE_TOL: f64 = 1e-10;
/// Relative residual gap under which two blocks are considered tied.
const TIE_TOL: f64 = 1e-12;

/// One latent variable of the block-selection trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    /// 1-based latent-variable index.
    pub component: usize,
    /// 0-based position of the winning block in the collection.
    pub block: usize,
    pub kind: BlockKind,
    pub source: usize,
    /// `‖y_res‖` after deflating by this component.
    pub residual_norm: f64,
}

impl SelectionStep {
    pub fn label(&self) -> String {
        match self.kind {
            BlockKind::Spatial => format!("Spat({})", self.source),
            BlockKind::Spectral => format!("Spect({})", self.source),
        }
    }
}

/// ROSA-PLS fit: every latent variable is won by exactly one block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RosaModel {
    pub blocks: Vec<BlockMeta>,
    /// Orthonormal training scores, `N × A`.
    pub scores: Array2<f64>,
    /// Unit weights, zero outside the winning block of each column.
    pub weights: Array2<f64>,
    /// `X_concatᵀ T`.
    pub loadings: Array2<f64>,
    /// `W (PᵀW)⁻¹`, mapping scaled features straight to scores.
    pub rotations: Array2<f64>,
    /// `Tᵀ y`.
    pub y_loadings: Array1<f64>,
    /// Regression coefficients on the scaled concatenation at the full A.
    pub beta: Array1<f64>,
    pub y_mean: f64,
    pub trace: Vec<SelectionStep>,
}

impl RosaModel {
    pub fn n_components(&self) -> usize {
        self.scores.ncols()
    }

    pub fn winners(&self) -> Vec<usize> {
        self.trace.iter().map(|s| s.block).collect()
    }

    fn check(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.weights.nrows() {
            return Err(Error::Shape(format!(
                "collection has {} features, model expects {}",
                x.ncols(),
                self.weights.nrows()
            )));
        }
        Ok(())
    }

    /// Scores of the first `a` latent variables for scaled features.
    pub fn scores_of(&self, x: ArrayView2<f64>, a: usize) -> Result<Array2<f64>> {
        self.check(x)?;
        if a > self.n_components() {
            return Err(Error::Rank {
                requested: a,
                rank: self.n_components(),
            });
        }
        Ok(x.dot(&self.rotations.slice(s![.., ..a])))
    }

    /// Coefficients of the `a`-component truncation.
    pub fn beta_at(&self, a: usize) -> Array1<f64> {
        self.rotations
            .slice(s![.., ..a])
            .dot(&self.y_loadings.slice(s![..a]))
    }

    /// `ŷ = ȳ + X β` at the full number of components.
    pub fn predict(&self, c: &BlockCollection) -> Result<Array1<f64>> {
        let x = c.concat();
        self.check(x.view())?;
        Ok(x.dot(&self.beta) + self.y_mean)
    }
}

/// Scores of a test collection already transformed with the training scalings.
pub fn rosa_scores(model: &RosaModel, c_test: &BlockCollection) -> Result<Array2<f64>> {
    let x = c_test.concat();
    model.scores_of(x.view(), model.n_components())
}

struct Candidate {
    weight: Array1<f64>,
    score: Array1<f64>,
    residual: f64,
}

fn candidate(xb: ArrayView2<f64>, y_res: ArrayView1<f64>, t: ArrayView2<f64>) -> Option<Candidate> {
    let mut w = xb.t().dot(&y_res);
    let wn = w.dot(&w).sqrt();
    if !(wn > 0.0) {
        return None;
    }
    w /= wn;
    let raw = xb.dot(&w);
    let raw_norm = raw.dot(&raw).sqrt();
    let mut score = raw;
    for _ in 0..2 {
        if t.ncols() > 0 {
            let proj = t.t().dot(&score);
            score -= &t.dot(&proj);
        }
    }
    let sn = score.dot(&score).sqrt();
    if !(sn > CANDIDATE_TOL * raw_norm) || !(raw_norm > 0.0) {
        return None;
    }
    score /= sn;
    let fitted = score.dot(&y_res);
    let resid = &y_res - &(&score * fitted);
    Some(Candidate {
        weight: w,
        score,
        residual: resid.dot(&resid).sqrt(),
    })
}

pub fn fit_rosa(c: &BlockCollection, y: ArrayView1<f64>, a: usize) -> Result<RosaModel> {
    let x = c.concat();
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Shape(format!("{} responses for {n} rows", y.len())));
    }
    if a == 0 {
        return Err(Error::InvalidArgument(
            "ROSA needs at least one latent variable".into(),
        ));
    }
    let offsets = c.offsets();
    let y_mean = y.mean().unwrap_or(0.0);
    let yc = y.mapv(|v| v - y_mean);
    let y_norm = yc.dot(&yc).sqrt();
    let mut y_res = yc.clone();
    let mut t = Array2::<f64>::zeros((n, 0));
    let mut w = Array2::<f64>::zeros((x.ncols(), 0));
    let mut trace = Vec::with_capacity(a);

    for comp in 0..a {
        if y_res.dot(&y_res).sqrt() <= 1e-12 * y_norm.max(f64::MIN_POSITIVE) {
            log::warn!("response fully explained after {comp} latent variables");
            break;
        }
        let candidates: Vec<Option<Candidate>> = (0..c.n_blocks())
            .into_par_iter()
            .map(|b| {
                let xb = x.slice(s![.., offsets[b]..offsets[b + 1]]);
                candidate(xb, y_res.view(), t.view())
            })
            .collect();
        let best = candidates
            .iter()
            .flatten()
            .map(|c| c.residual)
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            log::warn!("no valid candidate score at latent variable {}", comp + 1);
            break;
        }
        let tied: Vec<usize> = candidates
            .iter()
            .enumerate()
            .filter_map(|(b, c)| {
                c.as_ref()
                    .filter(|c| c.residual - best <= TIE_TOL * best.max(1e-300))
                    .map(|_| b)
            })
            .collect();
        let winner = tied[0];
        if tied.len() > 1 {
            log::info!(
                "latent variable {}: blocks {tied:?} tie, taking {winner}",
                comp + 1
            );
        }
        let win = candidates[winner].as_ref().expect("winner is valid");
        let mut padded = Array1::zeros(x.ncols());
        padded
            .slice_mut(s![offsets[winner]..offsets[winner + 1]])
            .assign(&win.weight);
        t.push_column(win.score.view()).expect("matching rows");
        w.push_column(padded.view()).expect("matching rows");
        let fitted = win.score.dot(&y_res);
        y_res = &y_res - &(&win.score * fitted);
        let meta = &c.meta()[winner];
        trace.push(SelectionStep {
            component: comp + 1,
            block: winner,
            kind: meta.kind,
            source: meta.source,
            residual_norm: y_res.dot(&y_res).sqrt(),
        });
    }
    if trace.is_empty() {
        return Err(Error::Degenerate(
            "response has no variance to model".into(),
        ));
    }
    if trace.len() < a {
        log::warn!("ROSA stopped at {} of {a} latent variables", trace.len());
    }
    let p = x.t().dot(&t);
    let q = t.t().dot(&yc);
    let ptw = p.t().dot(&w);
    let rotations = w.dot(&inverse(ptw.view())?);
    let beta = rotations.dot(&q);
    Ok(RosaModel {
        blocks: c.meta().to_vec(),
        scores: t,
        weights: w,
        loadings: p,
        rotations,
        y_loadings: q,
        beta,
        y_mean,
        trace,
    })
}

impl RosaModel {
    /// Training residual norms, starting from the centered response.
    pub fn residual_norms(&self) -> Vec<f64> {
        self.trace.iter().map(|s| s.residual_norm).collect()
    }

    /// Column index ranges of each block in the concatenated space.
    pub fn block_ranges(&self) -> Vec<(usize, usize)> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|m| {
                let r = (start, start + m.columns.len());
                start = r.1;
                r
            })
            .collect()
    }

    /// Support check: column `a` of W is zero outside its winning block.
    pub fn weight_support_ok(&self) -> bool {
        let ranges = self.block_ranges();
        self.trace.iter().enumerate().all(|(a, step)| {
            let (lo, hi) = ranges[step.block];
            self.weights
                .column(a)
                .iter()
                .enumerate()
                .all(|(i, v)| (lo..hi).contains(&i) || *v == 0.0)
        })
    }

    pub fn score_gram(&self) -> Array2<f64> {
        self.scores.t().dot(&self.scores)
    }
}
