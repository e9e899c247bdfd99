//! Spectral reduction: PCA fitted on training spectra and used to turn each
//! hyperspectral patch into a few monochrome score images.

use ndarray::{Array1, Array2, Array4, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_means, orient_largest_positive, thin_svd};
use crate::patching::PatchSet;

/// Relative singular-value threshold below which a direction counts as null.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentSelector {
    /// Keep exactly this many components.
    Count(usize),
    /// Keep the smallest number whose cumulative explained variance reaches τ.
    Variance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `bands × components`, orthonormal columns.
    pub loadings: Array2<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    pub fn project_spectrum(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.loadings.t().dot(&(&x - &self.mean))
    }

    /// Scores of each row of `spectra`.
    pub fn transform(&self, spectra: ArrayView2<f64>) -> Result<Array2<f64>> {
        if spectra.ncols() != self.bands() {
            return Err(Error::Shape(format!(
                "{} channels, model expects {}",
                spectra.ncols(),
                self.bands()
            )));
        }
        Ok((&spectra - &self.mean.view().insert_axis(Axis(0))).dot(&self.loadings))
    }
}

pub fn fit_pca(training: ArrayView2<f64>, selector: ComponentSelector) -> Result<PcaModel> {
    let (m, bands) = training.dim();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 spectra, got {m}"
        )));
    }
    let max_k = (m - 1).min(bands);
    if let ComponentSelector::Count(k) = selector {
        if k == 0 || k > max_k {
            return Err(Error::InvalidArgument(format!(
                "component count {k} outside 1..={max_k}"
            )));
        }
    }
    if let ComponentSelector::Variance(t) = selector {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "variance threshold {t} outside (0, 1]"
            )));
        }
    }
    let mean = column_means(training);
    let centered = &training - &mean.view().insert_axis(Axis(0));
    let svd = thin_svd(centered.view())?;
    let rank = svd.rank(RANK_TOL);
    if rank == 0 {
        return Err(Error::Degenerate(
            "training spectra have zero variance".into(),
        ));
    }
    let variances: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|s| s * s / (m - 1) as f64)
        .collect();
    let total: f64 = variances.iter().sum();
    let ratios: Vec<f64> = variances.iter().map(|v| v / total).collect();
    let k = match selector {
        ComponentSelector::Count(k) => {
            if k > rank {
                return Err(Error::Rank { requested: k, rank });
            }
            k
        }
        ComponentSelector::Variance(tau) => {
            let mut cum = 0.0;
            let mut k = rank;
            for (i, r) in ratios.iter().enumerate().take(rank) {
                cum += r;
                if cum >= tau - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };
    let mut loadings = svd.v.slice(ndarray::s![.., ..k]).to_owned();
    for col in loadings.columns_mut() {
        orient_largest_positive(col);
    }
    Ok(PcaModel {
        mean,
        loadings,
        explained_variance_ratio: ratios[..k].to_vec(),
    })
}

/// Score images of every patch, indexed `[patch, component, row, col]`.
pub fn project_patches(patches: &PatchSet, model: &PcaModel) -> Result<Array4<f64>> {
    if patches.bands() != model.bands() {
        return Err(Error::Shape(format!(
            "patches have {} channels, model expects {}",
            patches.bands(),
            model.bands()
        )));
    }
    let k = patches.k();
    let nc = model.n_components();
    let per_patch: Vec<Array2<f64>> = (0..patches.len())
        .into_par_iter()
        .map(|i| {
            let view = patches.view(i).expect("index in range");
            let flat = view
                .to_shape((k * k, model.bands()))
                .expect("contiguous patch");
            model.transform(flat.view()).expect("checked shape")
        })
        .collect();
    let mut out = Array4::zeros((patches.len(), nc, k, k));
    for (i, scores) in per_patch.into_iter().enumerate() {
        for p in 0..k * k {
            for c in 0..nc {
                out[[i, c, p / k, p % k]] = scores[[p, c]];
            }
        }
    }
    Ok(out)
}
