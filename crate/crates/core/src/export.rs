//! Artifact writers: 16-bit score images, matrix CSVs and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Code reserved for pixels without a value.
pub const BACKGROUND_CODE: u16 = 0;

/// Affine map from stored codes back to values: `value = offset + scale·(code − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgmMeta {
    pub offset: f64,
    pub scale: f64,
    pub background: u16,
}

impl PgmMeta {
    pub fn decode(&self, code: u16) -> Option<f64> {
        (code != self.background).then_some(self.offset + self.scale * (code as f64 - 1.0))
    }
}

/// Sidecar path holding the [`PgmMeta`] of an image.
pub fn meta_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("json")
}

/// Write a binary 16-bit PGM; `None` pixels get the background code. Values
/// are spread over codes `1..=65535`.
pub fn write_pgm16(path: impl AsRef<Path>, image: &Array2<Option<f64>>) -> Result<PgmMeta> {
    let path = path.as_ref();
    let (lo, hi) = image
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let (offset, scale) = if lo.is_finite() && hi > lo {
        (lo, (hi - lo) / 65534.0)
    } else if lo.is_finite() {
        (lo, 1.0)
    } else {
        (0.0, 1.0)
    };
    let (h, w) = image.dim();
    let mut buf = format!("P5\n{w} {h}\n65535\n").into_bytes();
    for v in image.iter() {
        let code = match v {
            Some(v) => (((v - offset) / scale).round() as i64 + 1).clamp(1, 65535) as u16,
            None => BACKGROUND_CODE,
        };
        buf.extend_from_slice(&code.to_be_bytes());
    }
    fs::write(path, buf)?;
    let meta = PgmMeta {
        offset,
        scale,
        background: BACKGROUND_CODE,
    };
    fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| Error::Header("non-ASCII PGM header".into()))
}

pub fn read_pgm16(path: impl AsRef<Path>) -> Result<Array2<u16>> {
    let bytes = fs::read(path)?;
    let mut pos = 0;
    if header_token(&bytes, &mut pos)? != "P5" {
        return Err(Error::Header("not a binary PGM".into()));
    }
    let mut num = || -> Result<usize> {
        let t = header_token(&bytes, &mut pos)?;
        t.parse()
            .map_err(|_| Error::Header(format!("bad PGM header field {t:?}")))
    };
    let (w, h, max) = (num()?, num()?, num()?);
    if max != 65535 {
        return Err(Error::Header(format!(
            "expected a 16-bit PGM, maxval is {max}"
        )));
    }
    let data = &bytes[pos + 1..];
    if data.len() != 2 * w * h {
        return Err(Error::Shape(format!(
            "PGM payload has {} bytes for {w}x{h}",
            data.len()
        )));
    }
    Ok(Array2::from_shape_fn((h, w), |(r, c)| {
        let i = 2 * (r * w + c);
        u16::from_be_bytes([data[i], data[i + 1]])
    }))
}

/// Decoded image of a PGM written by [`write_pgm16`].
pub fn read_score_image(path: impl AsRef<Path>) -> Result<Array2<Option<f64>>> {
    let path = path.as_ref();
    let codes = read_pgm16(path)?;
    let meta: PgmMeta = serde_json::from_str(&fs::read_to_string(meta_path(path))?)?;
    Ok(codes.mapv(|c| meta.decode(c)))
}

/// CSV with a header row and an optional leading label column.
pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    header: &[String],
    row_labels: Option<&[String]>,
    data: ArrayView2<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let expected = data.ncols() + usize::from(row_labels.is_some());
    if header.len() != expected {
        return Err(Error::Shape(format!(
            "{} header fields for {expected} columns",
            header.len()
        )));
    }
    w.write_record(header)?;
    for (i, row) in data.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(expected);
        if let Some(labels) = row_labels {
            rec.push(labels[i].clone());
        }
        rec.extend(row.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric matrix from a CSV written by [`write_matrix_csv`], skipping
/// `label_columns` leading columns.
pub fn read_matrix_csv(
    path: impl AsRef<Path>,
    label_columns: usize,
) -> Result<(Vec<String>, Array2<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for field in rec.iter().skip(label_columns) {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad number {field:?}: {e}")))?,
            );
        }
        rows += 1;
    }
    let cols = header.len().saturating_sub(label_columns);
    let data =
        Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Shape(e.to_string()))?;
    Ok((header, data))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

impl Manifest {
    /// Hash every file under `dir` except an existing manifest.
    pub fn scan(dir: impl AsRef<Path>, seed: u64) -> Result<Manifest> {
        let dir = dir.as_ref();
        let mut paths = Vec::new();
        walk(dir, &mut paths)?;
        let mut files = Vec::new();
        for p in paths {
            let rel = p
                .strip_prefix(dir)
                .expect("walked under dir")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            if rel == MANIFEST_NAME {
                continue;
            }
            let bytes = fs::read(&p)?;
            files.push(ManifestEntry {
                path: rel,
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Manifest {
            tool: "spatspec".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            files,
        })
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(MANIFEST_NAME);
        let mut f = fs::File::create(&path)?;
        f.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(path)
    }

    /// Entries whose file is missing or whose hash no longer matches.
    pub fn verify(&self, dir: impl AsRef<Path>) -> Result<Vec<String>> {
        let dir = dir.as_ref();
        let mut bad = Vec::new();
        for e in &self.files {
            match fs::read(dir.join(&e.path)) {
                Ok(b) if sha256_hex(&b) == e.sha256 => {}
                _ => bad.push(e.path.clone()),
            }
        }
        Ok(bad)
    }
}
