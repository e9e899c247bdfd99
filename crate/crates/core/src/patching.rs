//! Odd-width square patches around pixels whose whole window lies inside a
//! labelled zone (supervised case) or a mask (unsupervised case).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array2, ArrayView1, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::cube_io::HyperCube;
use crate::error::{Error, Result};

/// Class labels used by the supervised pipeline.
pub const CONTROL: u8 = 0;
pub const INFECTED: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub zone_id: u32,
    pub class_label: Option<u8>,
    /// `(row, col)` pixels belonging to the zone.
    pub pixels: Vec<(usize, usize)>,
}

impl ZoneSpec {
    /// Axis-aligned rectangle `rows × cols` with its top-left corner at `(r0, c0)`.
    pub fn rect(
        zone_id: u32,
        class_label: Option<u8>,
        r0: usize,
        c0: usize,
        rows: usize,
        cols: usize,
    ) -> Self {
        let pixels = (r0..r0 + rows)
            .flat_map(|r| (c0..c0 + cols).map(move |c| (r, c)))
            .collect();
        Self {
            zone_id,
            class_label,
            pixels,
        }
    }
}

/// Where patches may be taken from.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Mask(&'a Array2<bool>),
    Zones(&'a [ZoneSpec]),
}

#[derive(Debug, Clone)]
pub struct PatchSet {
    k: usize,
    centers: Vec<(usize, usize)>,
    zone_ids: Vec<u32>,
    class_labels: Option<Vec<u8>>,
    cube: Arc<HyperCube>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusRow {
    pub zone_id: u32,
    pub class_label: Option<u8>,
    pub patches: usize,
}

/// Summed-area table, one row/column larger than the image.
fn integral(img: &Array2<bool>) -> Array2<u32> {
    let (h, w) = img.dim();
    let mut sat = Array2::<u32>::zeros((h + 1, w + 1));
    for r in 0..h {
        for c in 0..w {
            sat[[r + 1, c + 1]] =
                img[[r, c]] as u32 + sat[[r, c + 1]] + sat[[r + 1, c]] - sat[[r, c]];
        }
    }
    sat
}

/// Row-major centers whose k×k window is fully `true` in `img`.
fn full_windows(img: &Array2<bool>, k: usize) -> Vec<(usize, usize)> {
    let (h, w) = img.dim();
    if h < k || w < k {
        return Vec::new();
    }
    let sat = integral(img);
    let half = k / 2;
    let full = (k * k) as u32;
    let mut out = Vec::new();
    for r in 0..=h - k {
        for c in 0..=w - k {
            let sum = sat[[r + k, c + k]] + sat[[r, c]] - sat[[r, c + k]] - sat[[r + k, c]];
            if sum == full {
                out.push((r + half, c + half));
            }
        }
    }
    out
}

fn usable_image(cube: &HyperCube) -> Array2<bool> {
    match cube.mask() {
        Some(m) => m.clone(),
        None => Array2::from_elem((cube.height(), cube.width()), true),
    }
}

pub fn extract_patches(cube: Arc<HyperCube>, region: Region<'_>, k: usize) -> Result<PatchSet> {
    if k.is_multiple_of(2) || k < 3 {
        return Err(Error::InvalidArgument(format!(
            "patch width must be odd and at least 3, got {k}"
        )));
    }
    let usable = usable_image(&cube);
    let (h, w) = usable.dim();
    let mut centers = Vec::new();
    let mut zone_ids = Vec::new();
    let mut labels = Vec::new();
    let mut all_labelled = true;
    match region {
        Region::Mask(mask) => {
            if mask.dim() != (h, w) {
                return Err(Error::Shape(format!(
                    "mask {:?} vs cube {h}x{w}",
                    mask.dim()
                )));
            }
            let combined = ndarray::Zip::from(mask)
                .and(&usable)
                .map_collect(|&a, &b| a && b);
            centers = full_windows(&combined, k);
            zone_ids = vec![0; centers.len()];
            all_labelled = false;
        }
        Region::Zones(zones) => {
            let mut order: Vec<&ZoneSpec> = zones.iter().collect();
            order.sort_by_key(|z| (z.zone_id, z.class_label));
            for zone in order {
                let mut img = Array2::from_elem((h, w), false);
                for &(r, c) in &zone.pixels {
                    if r >= h || c >= w {
                        return Err(Error::Shape(format!(
                            "zone {} pixel ({r},{c}) outside {h}x{w} cube",
                            zone.zone_id
                        )));
                    }
                    img[[r, c]] = usable[[r, c]];
                }
                let found = full_windows(&img, k);
                zone_ids.extend(std::iter::repeat_n(zone.zone_id, found.len()));
                match zone.class_label {
                    Some(l) => labels.extend(std::iter::repeat_n(l, found.len())),
                    None => all_labelled = false,
                }
                centers.extend(found);
            }
        }
    }
    Ok(PatchSet {
        k,
        centers,
        zone_ids,
        class_labels: all_labelled.then_some(labels),
        cube,
    })
}

impl PatchSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[(usize, usize)] {
        &self.centers
    }

    pub fn zone_ids(&self) -> &[u32] {
        &self.zone_ids
    }

    pub fn class_labels(&self) -> Option<&[u8]> {
        self.class_labels.as_deref()
    }

    pub fn cube(&self) -> &HyperCube {
        &self.cube
    }

    pub fn bands(&self) -> usize {
        self.cube.bands()
    }

    /// Copy-free `k × k × bands` view of patch `i`; the center pixel sits at
    /// `((k-1)/2, (k-1)/2)`.
    pub fn view(&self, i: usize) -> Result<ArrayView3<'_, f64>> {
        let &(r, c) = self.centers.get(i).ok_or(Error::OutOfRange {
            index: i,
            len: self.len(),
        })?;
        let h = self.k / 2;
        Ok(self
            .cube
            .values()
            .slice(s![r - h..=r + h, c - h..=c + h, ..]))
    }

    pub fn center_spectrum(&self, i: usize) -> Result<ArrayView1<'_, f64>> {
        let &(r, c) = self.centers.get(i).ok_or(Error::OutOfRange {
            index: i,
            len: self.len(),
        })?;
        Ok(self.cube.spectrum(r, c))
    }

    /// Center spectra of every patch, one per row.
    pub fn center_spectra(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.len(), self.bands()));
        for (i, &(r, c)) in self.centers.iter().enumerate() {
            out.row_mut(i).assign(&self.cube.spectrum(r, c));
        }
        out
    }

    /// Patch count per zone and class, in extraction order.
    pub fn census(&self) -> Vec<CensusRow> {
        let mut counts: BTreeMap<(u32, Option<u8>), usize> = BTreeMap::new();
        for i in 0..self.len() {
            let label = self.class_labels.as_ref().map(|l| l[i]);
            *counts.entry((self.zone_ids[i], label)).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|((zone_id, class_label), patches)| CensusRow {
                zone_id,
                class_label,
                patches,
            })
            .collect()
    }
}

/// Census table with one row per zone and one count column per class, plus a
/// TOTAL row.
pub fn write_census_csv(rows: &[CensusRow], path: impl AsRef<Path>) -> Result<()> {
    let mut by_zone: BTreeMap<u32, (usize, usize, usize)> = BTreeMap::new();
    for row in rows {
        let e = by_zone.entry(row.zone_id).or_default();
        match row.class_label {
            Some(INFECTED) => e.0 += row.patches,
            Some(CONTROL) => e.1 += row.patches,
            _ => e.2 += row.patches,
        }
    }
    let mut f = File::create(path)?;
    writeln!(f, "zone,infected,control,unlabelled")?;
    let mut total = (0, 0, 0);
    for (zone, (i, c, u)) in by_zone {
        writeln!(f, "{zone},{i},{c},{u}")?;
        total = (total.0 + i, total.1 + c, total.2 + u);
    }
    writeln!(f, "TOTAL,{},{},{}", total.0, total.1, total.2)?;
    Ok(())
}

/// Zones from a CSV of `zone_id,class,row,col` lines (class may be empty).
pub fn read_zones_csv(path: impl AsRef<Path>) -> Result<Vec<ZoneSpec>> {
    let mut rdr = csv::Reader::from_path(path)?;
    type Key = (u32, Option<u8>);
    let mut zones: BTreeMap<Key, Vec<(usize, usize)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
        let parse = |i: usize| -> Result<usize> {
            field(i)
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad zone CSV field '{}'", field(i))))
        };
        let zone_id = parse(0)? as u32;
        let class = match field(1) {
            "" => None,
            s => Some(
                s.parse::<u8>()
                    .map_err(|_| Error::InvalidArgument(format!("bad class '{s}'")))?,
            ),
        };
        zones
            .entry((zone_id, class))
            .or_default()
            .push((parse(2)?, parse(3)?));
    }
    Ok(zones
        .into_iter()
        .map(|((zone_id, class_label), pixels)| ZoneSpec {
            zone_id,
            class_label,
            pixels,
        })
        .collect())
}

pub fn write_zones_csv(zones: &[ZoneSpec], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["zone_id", "class", "row", "col"])?;
    for z in zones {
        let class = z.class_label.map(|c| c.to_string()).unwrap_or_default();
        for &(r, c) in &z.pixels {
            w.write_record([
                z.zone_id.to_string(),
                class.clone(),
                r.to_string(),
                c.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Zones from an 8-bit indexed or grayscale PNG. The pixel value is the zone
/// id, 0 is background. Classes come from `classes` (zone id → label).
pub fn read_zones_png(
    path: impl AsRef<Path>,
    classes: &BTreeMap<u32, u8>,
) -> Result<Vec<ZoneSpec>> {
    let decoder = png::Decoder::new(std::io::BufReader::new(File::open(path)?));
    let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight
        || !matches!(
            info.color_type,
            png::ColorType::Grayscale | png::ColorType::Indexed
        )
    {
        return Err(Error::Png(format!(
            "expected 8-bit grayscale or indexed PNG, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut zones: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for r in 0..h {
        for c in 0..w {
            let v = buf[r * info.line_size + c] as u32;
            if v != 0 {
                zones.entry(v).or_default().push((r, c));
            }
        }
    }
    Ok(zones
        .into_iter()
        .map(|(zone_id, pixels)| ZoneSpec {
            zone_id,
            class_label: classes.get(&zone_id).copied(),
            pixels,
        })
        .collect())
}

/// Mask from an 8-bit grayscale PNG; nonzero pixels are usable.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<Array2<bool>> {
    let decoder = png::Decoder::new(std::io::BufReader::new(File::open(path)?));
    let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight || info.color_type != png::ColorType::Grayscale {
        return Err(Error::Png("mask must be 8-bit grayscale".into()));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    Ok(Array2::from_shape_fn((h, w), |(r, c)| {
        buf[r * info.line_size + c] != 0
    }))
}

/// Write a mask as an 8-bit grayscale PNG, 255 for usable pixels.
pub fn write_mask_png(mask: &Array2<bool>, path: impl AsRef<Path>) -> Result<()> {
    let (h, w) = mask.dim();
    let file = std::io::BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, w as u32, h as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let data: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    enc.write_header()
        .and_then(|mut w| w.write_image_data(&data))
        .map_err(|e| Error::Png(e.to_string()))
}
