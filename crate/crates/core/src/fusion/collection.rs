use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::block::{BlockKind, FeatureBlock};
use crate::error::{Error, Result};
use crate::preprocess::{block_autoscale, ScalingParams};

/// Description of one block in a fitted collection, enough to transform new
/// data identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub kind: BlockKind,
    pub source: usize,
    pub method: String,
    pub columns: Vec<String>,
    pub scaling: ScalingParams,
}

impl BlockMeta {
    pub fn label(&self) -> String {
        match self.kind {
            BlockKind::Spatial => format!("Spat({})", self.source),
            BlockKind::Spectral => format!("Spect({})", self.source),
        }
    }
}

/// Autoscaled blocks sharing the same rows.
#[derive(Debug, Clone)]
pub struct BlockCollection {
    blocks: Vec<FeatureBlock>,
    meta: Vec<BlockMeta>,
}

fn check_rows(blocks: &[FeatureBlock]) -> Result<usize> {
    let n = blocks
        .first()
        .ok_or_else(|| Error::InvalidArgument("no blocks to assemble".into()))?
        .nrows();
    if let Some(b) = blocks.iter().find(|b| b.nrows() != n) {
        return Err(Error::Shape(format!(
            "block {} has {} rows, expected {n}",
            b.label(),
            b.nrows()
        )));
    }
    Ok(n)
}

/// Autoscale every block and freeze the parameters.
pub fn assemble(blocks: &[FeatureBlock]) -> Result<BlockCollection> {
    check_rows(blocks)?;
    let mut scaled = Vec::with_capacity(blocks.len());
    let mut meta = Vec::with_capacity(blocks.len());
    for b in blocks {
        let (data, scaling) = block_autoscale(b.data.view())
            .map_err(|e| Error::Degenerate(format!("block {}: {e}", b.label())))?;
        meta.push(BlockMeta {
            kind: b.kind,
            source: b.source,
            method: b.method.clone(),
            columns: b.columns.clone(),
            scaling,
        });
        scaled.push(FeatureBlock { data, ..b.clone() });
    }
    Ok(BlockCollection {
        blocks: scaled,
        meta,
    })
}

impl BlockCollection {
    /// Rebuild a collection from stored metadata and raw blocks.
    pub fn from_meta(meta: Vec<BlockMeta>, raw: &[FeatureBlock]) -> Result<Self> {
        if meta.len() != raw.len() {
            return Err(Error::Shape(format!(
                "{} blocks for {} scalings",
                raw.len(),
                meta.len()
            )));
        }
        check_rows(raw)?;
        let mut blocks = Vec::with_capacity(raw.len());
        for (m, b) in meta.iter().zip(raw) {
            if m.kind != b.kind || m.source != b.source || m.columns.len() != b.ncols() {
                return Err(Error::Shape(format!(
                    "block {} does not match {}",
                    b.label(),
                    m.label()
                )));
            }
            blocks.push(FeatureBlock {
                data: m.scaling.apply(b.data.view())?,
                ..b.clone()
            });
        }
        Ok(Self { blocks, meta })
    }

    /// Apply the frozen scalings to new raw blocks.
    pub fn transform(&self, raw: &[FeatureBlock]) -> Result<BlockCollection> {
        Self::from_meta(self.meta.clone(), raw)
    }

    pub fn blocks(&self) -> &[FeatureBlock] {
        &self.blocks
    }

    pub fn meta(&self) -> &[BlockMeta] {
        &self.meta
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn nrows(&self) -> usize {
        self.blocks[0].nrows()
    }

    /// Column offsets of each block in the concatenation, plus the total.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for b in &self.blocks {
            out.push(out.last().unwrap() + b.ncols());
        }
        out
    }

    pub fn concat(&self) -> Array2<f64> {
        let views: Vec<_> = self.blocks.iter().map(|b| b.data.view()).collect();
        concatenate(Axis(1), &views).expect("rows checked at construction")
    }
}
