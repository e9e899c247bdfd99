//! Hyperspectral cube container, ENVI subset reader/writer, and radiometric
//! conversions (raw counts to reflectance to absorbance).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wavelength axis in nanometres, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralAxis {
    wavelengths: Vec<f64>,
}

impl SpectralAxis {
    pub fn new(wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.is_empty() {
            return Err(Error::InvalidArgument("empty wavelength list".into()));
        }
        if wavelengths.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite wavelength".into()));
        }
        if let Some(i) = wavelengths.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "wavelengths not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { wavelengths })
    }

    /// Channel-index axis `0..n`, used when a header carries no wavelengths.
    pub fn synthetic(n: usize) -> Self {
        Self {
            wavelengths: (0..n).map(|i| i as f64).collect(),
        }
    }

    pub fn uniform(start: f64, step: f64, n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| start + step * i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    /// True when every step equals the first one within `rel_tol`.
    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        if self.len() < 3 {
            return true;
        }
        let step = self.wavelengths[1] - self.wavelengths[0];
        self.wavelengths
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= rel_tol * step.abs())
    }

    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "axis slice {start}..{end} of {}",
                self.len()
            )));
        }
        Ok(Self {
            wavelengths: self.wavelengths[start..end].to_vec(),
        })
    }

    pub fn nearest_index(&self, nm: f64) -> usize {
        self.wavelengths
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - nm).abs().total_cmp(&(b.1 - nm).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    RawCounts,
    Reflectance,
    Absorbance,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::RawCounts => "raw-counts",
            Unit::Reflectance => "reflectance",
            Unit::Absorbance => "absorbance",
        })
    }
}

/// A hyperspectral cube stored as `[row, col, band]`.
#[derive(Debug, Clone)]
pub struct HyperCube {
    axis: SpectralAxis,
    values: Array3<f64>,
    unit: Unit,
    mask: Option<Array2<bool>>,
}

impl HyperCube {
    pub fn new(values: Array3<f64>, axis: SpectralAxis, unit: Unit) -> Result<Self> {
        if values.len_of(Axis(2)) != axis.len() {
            return Err(Error::Shape(format!(
                "cube has {} bands but the axis has {}",
                values.len_of(Axis(2)),
                axis.len()
            )));
        }
        Ok(Self {
            axis,
            values,
            unit,
            mask: None,
        })
    }

    pub fn height(&self) -> usize {
        self.values.len_of(Axis(0))
    }

    pub fn width(&self) -> usize {
        self.values.len_of(Axis(1))
    }

    pub fn bands(&self) -> usize {
        self.values.len_of(Axis(2))
    }

    pub fn axis(&self) -> &SpectralAxis {
        &self.axis
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn mask(&self) -> Option<&Array2<bool>> {
        self.mask.as_ref()
    }

    pub fn spectrum(&self, row: usize, col: usize) -> ArrayView1<'_, f64> {
        self.values.slice(ndarray::s![row, col, ..])
    }

    pub fn is_usable(&self, row: usize, col: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[[row, col]])
    }

    pub fn usable_pixels(&self) -> usize {
        match &self.mask {
            Some(m) => m.iter().filter(|&&b| b).count(),
            None => self.height() * self.width(),
        }
    }

    /// Same geometry and mask, new values along a (possibly different) axis.
    pub fn with_values(&self, values: Array3<f64>, axis: SpectralAxis, unit: Unit) -> Result<Self> {
        if values.len_of(Axis(0)) != self.height() || values.len_of(Axis(1)) != self.width() {
            return Err(Error::Shape(
                "replacement values change cube geometry".into(),
            ));
        }
        let mut cube = HyperCube::new(values, axis, unit)?;
        cube.mask = self.mask.clone();
        Ok(cube)
    }
}

/// White and dark references. Each is either a single spectrum (`bands`), one
/// spectrum per column (`width × bands`, line-scan cameras) or a full cube.
#[derive(Debug, Clone)]
pub struct CalibrationRefs {
    pub white: Array3<f64>,
    pub dark: Array3<f64>,
}

impl CalibrationRefs {
    /// References given per column, shape `(width, bands)`.
    pub fn per_column(white: Array2<f64>, dark: Array2<f64>) -> Self {
        Self {
            white: white.insert_axis(Axis(0)),
            dark: dark.insert_axis(Axis(0)),
        }
    }

    /// Full-image references, shape `(height, width, bands)`.
    pub fn full(white: Array3<f64>, dark: Array3<f64>) -> Self {
        Self { white, dark }
    }

    /// One spectrum applied to every pixel.
    pub fn spectrum(white: Vec<f64>, dark: Vec<f64>) -> Self {
        let n = white.len();
        let w = Array3::from_shape_vec((1, 1, n), white).expect("shape");
        let d = Array3::from_shape_vec((1, 1, dark.len()), dark).expect("shape");
        Self { white: w, dark: d }
    }
}

/// Broadcast rule: a reference axis of length 1 repeats along the cube axis.
fn broadcast_index(dim: usize, len: usize, i: usize) -> usize {
    if dim == 1 {
        0
    } else {
        debug_assert_eq!(dim, len);
        i
    }
}

fn check_broadcast(r: &Array3<f64>, cube: &HyperCube, name: &str) -> Result<()> {
    let (h, w, b) = r.dim();
    let ok = (h == 1 || h == cube.height()) && (w == 1 || w == cube.width()) && b == cube.bands();
    if ok {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{name} reference {:?} does not broadcast to cube {:?}",
            r.dim(),
            cube.values.dim()
        )))
    }
}

/// `R = (raw - dark) / (white - dark)` per pixel and band.
pub fn to_reflectance(cube: &HyperCube, refs: &CalibrationRefs) -> Result<HyperCube> {
    if cube.unit != Unit::RawCounts {
        return Err(Error::Unit {
            expected: Unit::RawCounts,
            found: cube.unit,
        });
    }
    check_broadcast(&refs.white, cube, "white")?;
    check_broadcast(&refs.dark, cube, "dark")?;
    let (wh, ww, _) = refs.white.dim();
    let (dh, dw, _) = refs.dark.dim();
    let mut out = Array3::zeros(cube.values.raw_dim());
    for ((r, c, b), v) in out.indexed_iter_mut() {
        let white = refs.white[[
            broadcast_index(wh, cube.height(), r),
            broadcast_index(ww, cube.width(), c),
            b,
        ]];
        let dark = refs.dark[[
            broadcast_index(dh, cube.height(), r),
            broadcast_index(dw, cube.width(), c),
            b,
        ]];
        let span = white - dark;
        if span <= 0.0 {
            if cube.is_usable(r, c) {
                return Err(Error::Degenerate(format!(
                    "white reference does not exceed dark at band {b} (pixel {r},{c})"
                )));
            }
            continue;
        }
        *v = (cube.values[[r, c, b]] - dark) / span;
    }
    cube.with_values(out, cube.axis.clone(), Unit::Reflectance)
}

pub const DEFAULT_ABSORBANCE_FLOOR: f64 = 1e-6;

/// `A = log10(1 / max(R, floor))`. Returns the cube and how many values were
/// raised to the floor.
pub fn to_absorbance(cube: &HyperCube, floor: f64) -> Result<(HyperCube, usize)> {
    if cube.unit != Unit::Reflectance {
        return Err(Error::Unit {
            expected: Unit::Reflectance,
            found: cube.unit,
        });
    }
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "absorbance floor must be positive, got {floor}"
        )));
    }
    let mut floored = 0usize;
    let out = cube.values.mapv(|r| {
        let r = if r < floor || r.is_nan() {
            floored += 1;
            floor
        } else {
            r
        };
        -r.log10()
    });
    if floored > 0 {
        log::warn!("{floored} reflectance values raised to the absorbance floor {floor}");
    }
    Ok((
        cube.with_values(out, cube.axis.clone(), Unit::Absorbance)?,
        floored,
    ))
}

/// Intersect the cube mask with `mask` (true = usable).
pub fn apply_mask(cube: &HyperCube, mask: &Array2<bool>) -> Result<HyperCube> {
    if mask.dim() != (cube.height(), cube.width()) {
        return Err(Error::Shape(format!(
            "mask {:?} does not match cube {}x{}",
            mask.dim(),
            cube.height(),
            cube.width()
        )));
    }
    let merged = match &cube.mask {
        Some(m) => ndarray::Zip::from(m).and(mask).map_collect(|&a, &b| a && b),
        None => mask.clone(),
    };
    let mut out = cube.clone();
    out.mask = Some(merged);
    Ok(out)
}

// ---------------------------------------------------------------------------
// ENVI subset

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interleave {
    Bsq,
    Bil,
    Bip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataType {
    F32,
    U16,
}

impl DataType {
    fn code(self) -> u32 {
        match self {
            DataType::F32 => 4,
            DataType::U16 => 12,
        }
    }

    fn bytes(self) -> usize {
        match self {
            DataType::F32 => 4,
            DataType::U16 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ByteOrder {
    Little,
    Big,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnviHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub interleave: Interleave,
    pub data_type: DataType,
    pub byte_order: ByteOrder,
    pub wavelengths: Option<Vec<f64>>,
    pub unit: Unit,
}

fn split_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("ENVI") => {}
        _ => return Err(Error::Header("missing ENVI signature on first line".into())),
    }
    let mut pending: Option<(String, String)> = None;
    for line in lines {
        if let Some((key, mut value)) = pending.take() {
            value.push(' ');
            value.push_str(line.trim());
            if line.contains('}') {
                entries.push((key, value));
            } else {
                pending = Some((key, value));
            }
            continue;
        }
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Header(format!("line without '=': {line}")));
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if value.starts_with('{') && !value.contains('}') {
            pending = Some((key, value));
        } else {
            entries.push((key, value));
        }
    }
    if let Some((key, _)) = pending {
        return Err(Error::Header(format!(
            "unterminated brace list for '{key}'"
        )));
    }
    Ok(entries)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::Header(format!("'{key}' is not a non-negative integer: {v}")))
}

pub fn parse_header(text: &str) -> Result<EnviHeader> {
    let mut samples = None;
    let mut lines = None;
    let mut bands = None;
    let mut interleave = None;
    let mut data_type = None;
    let mut byte_order = None;
    let mut wavelengths: Option<Vec<f64>> = None;
    let mut unit = Unit::RawCounts;

    fn set<T: PartialEq + fmt::Debug>(slot: &mut Option<T>, key: &str, v: T) -> Result<()> {
        match slot {
            Some(old) if *old != v => Err(Error::Header(format!(
                "contradictory values for '{key}': {old:?} and {v:?}"
            ))),
            _ => {
                *slot = Some(v);
                Ok(())
            }
        }
    }

    for (key, value) in split_entries(text)? {
        match key.as_str() {
            "samples" => set(&mut samples, &key, parse_usize(&key, &value)?)?,
            "lines" => set(&mut lines, &key, parse_usize(&key, &value)?)?,
            "bands" => set(&mut bands, &key, parse_usize(&key, &value)?)?,
            "interleave" => {
                let il = match value.to_ascii_lowercase().as_str() {
                    "bsq" => Interleave::Bsq,
                    "bil" => Interleave::Bil,
                    "bip" => Interleave::Bip,
                    other => {
                        return Err(Error::Header(format!("unsupported interleave '{other}'")))
                    }
                };
                set(&mut interleave, &key, il)?
            }
            "data type" => {
                let dt = match parse_usize(&key, &value)? {
                    4 => DataType::F32,
                    12 => DataType::U16,
                    other => return Err(Error::Header(format!("unsupported data type {other}"))),
                };
                set(&mut data_type, &key, dt)?
            }
            "byte order" => {
                let bo = match parse_usize(&key, &value)? {
                    0 => ByteOrder::Little,
                    1 => ByteOrder::Big,
                    other => return Err(Error::Header(format!("invalid byte order {other}"))),
                };
                set(&mut byte_order, &key, bo)?
            }
            "wavelength" => {
                let inner = value.trim().trim_start_matches('{').trim_end_matches('}');
                let parsed = inner
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| Error::Header(format!("bad wavelength '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                wavelengths = Some(parsed);
            }
            "data units" => {
                unit = match value.to_ascii_lowercase().as_str() {
                    "reflectance" => Unit::Reflectance,
                    "absorbance" => Unit::Absorbance,
                    _ => Unit::RawCounts,
                }
            }
            _ => log::warn!("ignoring ENVI header key '{key}'"),
        }
    }

    let need = |v: Option<usize>, k: &str| v.ok_or_else(|| Error::Header(format!("missing '{k}'")));
    let header = EnviHeader {
        samples: need(samples, "samples")?,
        lines: need(lines, "lines")?,
        bands: need(bands, "bands")?,
        interleave: interleave.ok_or_else(|| Error::Header("missing 'interleave'".into()))?,
        data_type: data_type.ok_or_else(|| Error::Header("missing 'data type'".into()))?,
        byte_order: byte_order.ok_or_else(|| Error::Header("missing 'byte order'".into()))?,
        wavelengths,
        unit,
    };
    if let Some(w) = &header.wavelengths {
        if w.len() != header.bands {
            return Err(Error::Header(format!(
                "{} wavelengths listed for {} bands",
                w.len(),
                header.bands
            )));
        }
    }
    Ok(header)
}

pub fn format_header(h: &EnviHeader) -> String {
    let mut s = String::from("ENVI\n");
    s += &format!(
        "samples = {}\nlines = {}\nbands = {}\n",
        h.samples, h.lines, h.bands
    );
    s += &format!(
        "interleave = {}\n",
        match h.interleave {
            Interleave::Bsq => "bsq",
            Interleave::Bil => "bil",
            Interleave::Bip => "bip",
        }
    );
    s += &format!("data type = {}\n", h.data_type.code());
    s += &format!(
        "byte order = {}\n",
        match h.byte_order {
            ByteOrder::Little => 0,
            ByteOrder::Big => 1,
        }
    );
    if h.unit != Unit::RawCounts {
        s += &format!("data units = {}\n", h.unit);
    }
    if let Some(w) = &h.wavelengths {
        let list: Vec<String> = w.iter().map(|x| format!("{x}")).collect();
        s += &format!("wavelength = {{{}}}\n", list.join(", "));
    }
    s
}

/// Candidate payload paths for a header, in lookup order.
fn payload_candidates(header_path: &Path) -> Vec<PathBuf> {
    let stem = header_path.with_extension("");
    let mut out = Vec::new();
    for ext in ["raw", "img", "dat", "bsq", "bil", "bip"] {
        out.push(header_path.with_extension(ext));
    }
    out.push(stem);
    out
}

/// Payload path written by [`write_envi`].
pub fn payload_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

/// Linear offset of `(row, col, band)` in the payload.
fn payload_offset(
    il: Interleave,
    lines: usize,
    samples: usize,
    bands: usize,
    r: usize,
    c: usize,
    b: usize,
) -> usize {
    match il {
        Interleave::Bsq => (b * lines + r) * samples + c,
        Interleave::Bil => (r * bands + b) * samples + c,
        Interleave::Bip => (r * samples + c) * bands + b,
    }
}

pub fn load_envi(header_path: impl AsRef<Path>) -> Result<HyperCube> {
    let header_path = header_path.as_ref();
    let header = parse_header(&fs::read_to_string(header_path)?)?;
    let payload_file = payload_candidates(header_path)
        .into_iter()
        .find(|p| p.is_file() && p != header_path)
        .ok_or_else(|| {
            Error::Header(format!(
                "no payload file found next to {}",
                header_path.display()
            ))
        })?;
    let bytes = fs::read(&payload_file)?;
    let n = header.samples * header.lines * header.bands;
    let expected = n * header.data_type.bytes();
    if bytes.len() != expected {
        return Err(Error::Header(format!(
            "payload {} has {} bytes, header implies {expected}",
            payload_file.display(),
            bytes.len()
        )));
    }
    let decoded: Vec<f64> = match (header.data_type, header.byte_order) {
        (DataType::F32, ByteOrder::Little) => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (DataType::F32, ByteOrder::Big) => bytes
            .chunks_exact(4)
            .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (DataType::U16, ByteOrder::Little) => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as f64)
            .collect(),
        (DataType::U16, ByteOrder::Big) => bytes
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect(),
    };
    let (lines, samples, bands) = (header.lines, header.samples, header.bands);
    let values = Array3::from_shape_fn((lines, samples, bands), |(r, c, b)| {
        decoded[payload_offset(header.interleave, lines, samples, bands, r, c, b)]
    });
    let axis = match header.wavelengths {
        Some(w) => SpectralAxis::new(w)?,
        None => SpectralAxis::synthetic(bands),
    };
    HyperCube::new(values, axis, header.unit)
}

/// Write `cube` as `<header_path>` plus a `.raw` payload. Values are narrowed
/// to the requested data type (f32 rounding, or u16 with rounding and clamping).
pub fn write_envi(
    cube: &HyperCube,
    header_path: impl AsRef<Path>,
    interleave: Interleave,
    data_type: DataType,
    byte_order: ByteOrder,
) -> Result<()> {
    let header_path = header_path.as_ref();
    let (lines, samples, bands) = cube.values.dim();
    let header = EnviHeader {
        samples,
        lines,
        bands,
        interleave,
        data_type,
        byte_order,
        wavelengths: Some(cube.axis.wavelengths.clone()),
        unit: cube.unit,
    };
    let n = lines * samples * bands;
    let mut ordered = vec![0.0f64; n];
    for ((r, c, b), &v) in cube.values.indexed_iter() {
        ordered[payload_offset(interleave, lines, samples, bands, r, c, b)] = v;
    }
    let mut bytes = Vec::with_capacity(n * data_type.bytes());
    for v in ordered {
        match (data_type, byte_order) {
            (DataType::F32, ByteOrder::Little) => {
                bytes.extend_from_slice(&(v as f32).to_le_bytes())
            }
            (DataType::F32, ByteOrder::Big) => bytes.extend_from_slice(&(v as f32).to_be_bytes()),
            (DataType::U16, bo) => {
                let q = v.round().clamp(0.0, u16::MAX as f64) as u16;
                match bo {
                    ByteOrder::Little => bytes.extend_from_slice(&q.to_le_bytes()),
                    ByteOrder::Big => bytes.extend_from_slice(&q.to_be_bytes()),
                }
            }
        }
    }
    fs::write(header_path, format_header(&header))?;
    fs::write(payload_path(header_path), bytes)?;
    Ok(())
}
