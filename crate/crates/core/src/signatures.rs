//! Spectral branch: unfold each patch into a pixel-by-band matrix and keep
//! either its mean spectrum or its leading uncentered singular vectors.

use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{BlockKind, FeatureBlock};
use crate::error::{Error, Result};
use crate::linalg::{orient_largest_positive, thin_svd};
use crate::patching::PatchSet;

/// Singular values below `SIGNATURE_RANK_TOL * s_max` are treated as zero.
pub const SIGNATURE_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SpectralMethod {
    Mean,
    Svd { signatures: usize },
}

/// `k × k × bands` patch to `k² × bands`, row-major pixel order.
pub fn unfold(patch: ArrayView3<f64>) -> Array2<f64> {
    let (h, w, b) = patch.dim();
    let mut out = Array2::zeros((h * w, b));
    for r in 0..h {
        for c in 0..w {
            out.row_mut(r * w + c)
                .assign(&patch.slice(ndarray::s![r, c, ..]));
        }
    }
    out
}

pub fn refold(m: ArrayView2<f64>, k: usize) -> Result<Array3<f64>> {
    let (p, b) = m.dim();
    if p != k * k {
        return Err(Error::Shape(format!("{p} rows cannot refold to {k}x{k}")));
    }
    Ok(Array3::from_shape_fn((k, k, b), |(r, c, j)| {
        m[[r * k + c, j]]
    }))
}

pub fn mean_spectrum(m: ArrayView2<f64>) -> Result<Array1<f64>> {
    m.mean_axis(Axis(0))
        .ok_or_else(|| Error::InvalidArgument("mean of an empty spectra matrix".into()))
}

/// Leading right singular vectors of the uncentered matrix, one per row,
/// unit norm, largest-magnitude coefficient positive. Directions beyond the
/// numerical rank are zero rows; the second value counts them.
pub fn svd_signatures(m: ArrayView2<f64>, count: usize) -> Result<(Array2<f64>, usize)> {
    let (p, bands) = m.dim();
    if count == 0 || count > p.min(bands) {
        return Err(Error::InvalidArgument(format!(
            "{count} signatures requested from a {p}x{bands} matrix"
        )));
    }
    let mut out = Array2::zeros((count, bands));
    let svd = match thin_svd(m) {
        Ok(s) => s,
        Err(_) => return Ok((out, count)),
    };
    let rank = svd.rank(SIGNATURE_RANK_TOL);
    let kept = rank.min(count);
    for j in 0..kept {
        let mut row = out.row_mut(j);
        row.assign(&svd.v.column(j));
        orient_largest_positive(row);
    }
    Ok((out, count - kept))
}

/// Spectral blocks for every patch: one `N × bands` block for the mean, or
/// `signatures` blocks where block j holds each patch's j-th loading.
pub fn spectral_block(patches: &PatchSet, method: SpectralMethod) -> Result<Vec<FeatureBlock>> {
    let n = patches.len();
    let bands = patches.bands();
    let names: Vec<String> = patches
        .cube()
        .axis()
        .wavelengths()
        .iter()
        .map(|w| format!("{w}"))
        .collect();
    match method {
        SpectralMethod::Mean => {
            let rows: Vec<Array1<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let m = unfold(patches.view(i).expect("in range"));
                    mean_spectrum(m.view()).expect("non-empty patch")
                })
                .collect();
            let mut data = Array2::zeros((n, bands));
            for (i, r) in rows.into_iter().enumerate() {
                data.row_mut(i).assign(&r);
            }
            Ok(vec![FeatureBlock::new(
                BlockKind::Spectral,
                1,
                "mean",
                names,
                data,
            )?])
        }
        SpectralMethod::Svd { signatures } => {
            let per_patch: Vec<Result<(Array2<f64>, usize)>> = (0..n)
                .into_par_iter()
                .map(|i| svd_signatures(unfold(patches.view(i)?).view(), signatures))
                .collect();
            let mut blocks: Vec<Array2<f64>> =
                (0..signatures).map(|_| Array2::zeros((n, bands))).collect();
            let mut zero_filled = 0usize;
            for (i, res) in per_patch.into_iter().enumerate() {
                let (sig, missing) = res?;
                zero_filled += missing;
                for (j, block) in blocks.iter_mut().enumerate() {
                    block.row_mut(i).assign(&sig.row(j));
                }
            }
            if zero_filled > 0 {
                log::warn!(
                    "{zero_filled} spectral signatures zero-filled in rank-deficient patches"
                );
            }
            blocks
                .into_iter()
                .enumerate()
                .map(|(j, data)| {
                    FeatureBlock::new(BlockKind::Spectral, j + 1, "svd", names.clone(), data)
                })
                .collect()
        }
    }
}
