//! Feature blocks: one N × R matrix per reduction component (spatial) or per
//! signature rank (spectral).

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Spatial,
    Spectral,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKind::Spatial => "spatial",
            BlockKind::Spectral => "spectral",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub kind: BlockKind,
    /// 1-based reduction component (spatial) or signature rank (spectral);
    /// 1 for the mean-spectrum block.
    pub source: usize,
    /// Producing method, e.g. `tensor`, `haralick`, `mean`, `svd`.
    pub method: String,
    pub columns: Vec<String>,
    pub data: Array2<f64>,
}

impl FeatureBlock {
    pub fn new(
        kind: BlockKind,
        source: usize,
        method: impl Into<String>,
        columns: Vec<String>,
        data: Array2<f64>,
    ) -> Result<Self> {
        if columns.len() != data.ncols() {
            return Err(Error::Shape(format!(
                "{} column names for {} columns",
                columns.len(),
                data.ncols()
            )));
        }
        Ok(Self {
            kind,
            source,
            method: method.into(),
            columns,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// Label in the `Spat(2)` / `Spect(1)` style of block-selection tables.
    pub fn label(&self) -> String {
        match self.kind {
            BlockKind::Spatial => format!("Spat({})", self.source),
            BlockKind::Spectral => format!("Spect({})", self.source),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureBlock {
        FeatureBlock {
            data: self.data.select(Axis(0), rows),
            ..self.clone()
        }
    }

    /// Row-wise concatenation of blocks that describe the same features.
    pub fn vstack(parts: &[FeatureBlock]) -> Result<FeatureBlock> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
        if parts
            .iter()
            .any(|p| p.kind != first.kind || p.source != first.source || p.columns != first.columns)
        {
            return Err(Error::Shape(
                "stacked blocks describe different features".into(),
            ));
        }
        let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
        let data = concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(FeatureBlock {
            data,
            ..first.clone()
        })
    }

    /// CSV with a `#` metadata line followed by a header row and one row per patch.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        writeln!(
            f,
            "#kind={},source={},method={}",
            self.kind, self.source, self.method
        )?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(&self.columns)?;
        for row in self.data.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureBlock> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut meta = String::new();
        reader.read_line(&mut meta)?;
        let meta = meta
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::InvalidArgument("block CSV lacks metadata line".into()))?;
        let (mut kind, mut source, mut method) = (None, None, String::new());
        for kv in meta.split(',') {
            match kv.split_once('=') {
                Some(("kind", "spatial")) => kind = Some(BlockKind::Spatial),
                Some(("kind", "spectral")) => kind = Some(BlockKind::Spectral),
                Some(("source", v)) => source = v.parse().ok(),
                Some(("method", v)) => method = v.to_string(),
                _ => return Err(Error::InvalidArgument(format!("bad block metadata '{kv}'"))),
            }
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let columns: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        let mut values = Vec::new();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            for v in rec.iter() {
                values.push(
                    v.parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad number '{v}'")))?,
                );
            }
            rows += 1;
        }
        let data = Array2::from_shape_vec((rows, columns.len()), values)
            .map_err(|e| Error::Shape(e.to_string()))?;
        FeatureBlock::new(
            kind.ok_or_else(|| Error::InvalidArgument("missing block kind".into()))?,
            source.ok_or_else(|| Error::InvalidArgument("missing block source".into()))?,
            method,
            columns,
            data,
        )
    }
}
