//! Texture descriptors of monochrome score images: structure-tensor triplets
//! and GLCM-based Haralick indices.

pub mod glcm;
pub mod haralick;
pub mod structure_tensor;

use ndarray::{s, Array2, ArrayView4, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use glcm::{glcm, quantize, Glcm, Orientation};
pub use haralick::{haralick, HaralickVector};
pub use structure_tensor::{structure_tensor, TensorFeatures};

use crate::block::{BlockKind, FeatureBlock};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SpatialMethod {
    Tensor,
    Haralick {
        levels: usize,
        distance: usize,
        orientations: Vec<u32>,
    },
}

impl SpatialMethod {
    pub fn haralick_isotropic(levels: usize) -> Self {
        SpatialMethod::Haralick {
            levels,
            distance: 1,
            orientations: vec![0, 45, 90, 135],
        }
    }

    pub fn width(&self) -> usize {
        match self {
            SpatialMethod::Tensor => 3,
            SpatialMethod::Haralick { .. } => 14,
        }
    }
}

/// Global `(min, max)` of each component over all pixels of all patches.
pub fn component_ranges(images: ArrayView4<f64>) -> Vec<(f64, f64)> {
    images
        .axis_iter(Axis(1))
        .map(|comp| {
            comp.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
        })
        .collect()
}

/// Quantization range `(lo, hi)` of one reduction component.
pub type Range = (f64, f64);

/// One block per reduction component from score images `[patch, comp, r, c]`.
/// Quantization ranges are derived from `images` unless `frozen` is given;
/// the ranges actually used are returned alongside the blocks.
pub fn spatial_block(
    images: ArrayView4<f64>,
    method: &SpatialMethod,
    frozen: Option<&[(f64, f64)]>,
) -> Result<(Vec<FeatureBlock>, Vec<Range>)> {
    let (n, n_comp, _, _) = images.dim();
    let ranges = match frozen {
        Some(r) if r.len() == n_comp => r.to_vec(),
        Some(r) => {
            return Err(Error::Shape(format!(
                "{} frozen ranges for {n_comp} components",
                r.len()
            )))
        }
        None => component_ranges(images),
    };
    let mut blocks = Vec::with_capacity(n_comp);
    for (comp, &(lo, hi)) in ranges.iter().enumerate() {
        let rows: Vec<Result<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let img = images.slice(s![i, comp, .., ..]);
                match method {
                    SpatialMethod::Tensor => Ok(structure_tensor(img).to_array().to_vec()),
                    SpatialMethod::Haralick {
                        levels,
                        distance,
                        orientations,
                    } => {
                        let orients = orientations
                            .iter()
                            .map(|&d| Orientation::from_degrees(d))
                            .collect::<Result<Vec<_>>>()?;
                        let q = quantize(img, *levels, lo, hi)?;
                        let g = glcm(q.view(), *levels, *distance, &orients)?;
                        Ok(haralick(&g).to_array().to_vec())
                    }
                }
            })
            .collect();
        let width = method.width();
        let mut data = Array2::zeros((n, width));
        for (i, row) in rows.into_iter().enumerate() {
            let row = row?;
            data.row_mut(i).assign(&ndarray::ArrayView1::from(&row[..]));
        }
        let (names, tag): (Vec<String>, &str) = match method {
            SpatialMethod::Tensor => (
                TensorFeatures::NAMES
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                "tensor",
            ),
            SpatialMethod::Haralick { .. } => (
                HaralickVector::NAMES
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                "haralick",
            ),
        };
        blocks.push(FeatureBlock::new(
            BlockKind::Spatial,
            comp + 1,
            tag,
            names,
            data,
        )?);
    }
    Ok((blocks, ranges))
}
