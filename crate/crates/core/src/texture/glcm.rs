use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel-pair direction of a co-occurrence offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Deg0,
        Orientation::Deg45,
        Orientation::Deg90,
        Orientation::Deg135,
    ];

    pub fn from_degrees(deg: u32) -> Result<Self> {
        match deg {
            0 => Ok(Orientation::Deg0),
            45 => Ok(Orientation::Deg45),
            90 => Ok(Orientation::Deg90),
            135 => Ok(Orientation::Deg135),
            other => Err(Error::InvalidArgument(format!(
                "unsupported GLCM orientation {other}°"
            ))),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            Orientation::Deg0 => 0,
            Orientation::Deg45 => 45,
            Orientation::Deg90 => 90,
            Orientation::Deg135 => 135,
        }
    }

    /// `(d_row, d_col)` for distance `d`, rows growing downward.
    fn offset(self, d: isize) -> (isize, isize) {
        match self {
            Orientation::Deg0 => (0, d),
            Orientation::Deg45 => (-d, d),
            Orientation::Deg90 => (-d, 0),
            Orientation::Deg135 => (-d, -d),
        }
    }
}

/// Normalized, symmetric gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Glcm {
    pub levels: usize,
    pub p: Array2<f64>,
}

impl Glcm {
    /// Wrap an existing probability matrix (must be square, non-negative,
    /// summing to one).
    pub fn from_probabilities(p: Array2<f64>) -> Result<Self> {
        let (r, c) = p.dim();
        if r != c || r == 0 {
            return Err(Error::Shape(format!("GLCM must be square, got {r}x{c}")));
        }
        if p.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "GLCM entries must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = p.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("GLCM sums to {sum}")));
        }
        Ok(Self { levels: r, p })
    }

    pub fn nonzero(&self) -> usize {
        self.p.iter().filter(|v| **v > 0.0).count()
    }
}

/// Equal-width binning of `clamp(v, lo, hi)` into `levels` bins; `hi` maps to
/// the last bin.
pub fn quantize(image: ArrayView2<f64>, levels: usize, lo: f64, hi: f64) -> Result<Array2<usize>> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 gray levels, got {levels}"
        )));
    }
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "quantization range ({lo}, {hi}) is empty"
        )));
    }
    let width = hi - lo;
    Ok(image.mapv(|v| {
        let v = if v.is_nan() { lo } else { v.clamp(lo, hi) };
        let bin = ((v - lo) / width * levels as f64).floor() as usize;
        bin.min(levels - 1)
    }))
}

/// Raw symmetric pair counts summed over `orientations`.
pub fn glcm_counts(
    quantized: ArrayView2<usize>,
    levels: usize,
    distance: usize,
    orientations: &[Orientation],
) -> Result<Array2<f64>> {
    if let Some(v) = quantized.iter().find(|&&v| v >= levels) {
        return Err(Error::InvalidArgument(format!(
            "gray level {v} outside 0..{levels}"
        )));
    }
    if distance == 0 {
        return Err(Error::InvalidArgument(
            "co-occurrence distance must be positive".into(),
        ));
    }
    let (h, w) = quantized.dim();
    let mut counts = Array2::<f64>::zeros((levels, levels));
    for &o in orientations {
        let (dr, dc) = o.offset(distance as isize);
        for r in 0..h as isize {
            for c in 0..w as isize {
                let (r2, c2) = (r + dr, c + dc);
                if r2 < 0 || c2 < 0 || r2 >= h as isize || c2 >= w as isize {
                    continue;
                }
                let a = quantized[[r as usize, c as usize]];
                let b = quantized[[r2 as usize, c2 as usize]];
                counts[[a, b]] += 1.0;
                counts[[b, a]] += 1.0;
            }
        }
    }
    Ok(counts)
}

pub fn glcm(
    quantized: ArrayView2<usize>,
    levels: usize,
    distance: usize,
    orientations: &[Orientation],
) -> Result<Glcm> {
    let counts = glcm_counts(quantized, levels, distance, orientations)?;
    let total = counts.sum();
    if total == 0.0 {
        return Err(Error::Degenerate(format!(
            "no pixel pairs at distance {distance} in a {:?} image",
            quantized.dim()
        )));
    }
    Ok(Glcm {
        levels,
        p: counts / total,
    })
}
