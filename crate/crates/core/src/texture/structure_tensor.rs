use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Below this trace the tensor is treated as zero (flat patch).
pub const TENSOR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorFeatures {
    /// Trace of the averaged tensor, `λ1 + λ2`.
    pub magnitude: f64,
    /// Orientation of the dominant eigenvector in `[0, π)`, measured from the
    /// column axis towards the row axis.
    pub phase: f64,
    /// `(λ1 - λ2) / (λ1 + λ2)`, 0 for flat patches.
    pub coherence: f64,
}

impl TensorFeatures {
    pub const NAMES: [&'static str; 3] = ["magnitude", "phase", "coherence"];

    pub fn to_array(self) -> [f64; 3] {
        [self.magnitude, self.phase, self.coherence]
    }
}

/// scipy-style "reflect": the edge sample is repeated (`c b a | a b c`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let j = i.rem_euclid(period);
    (if j < n { j } else { period - 1 - j }) as usize
}

/// 3×3 Sobel derivatives along columns (x) and rows (y).
pub fn sobel(img: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (h, w) = img.dim();
    let at = |r: isize, c: isize| img[[reflect(r, h), reflect(c, w)]];
    let mut gx = Array2::zeros((h, w));
    let mut gy = Array2::zeros((h, w));
    for r in 0..h as isize {
        for c in 0..w as isize {
            gx[[r as usize, c as usize]] =
                (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                    - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
            gy[[r as usize, c as usize]] =
                (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                    - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
        }
    }
    (gx, gy)
}

/// Patch-averaged gradient tensor `[[jxx, jxy], [jxy, jyy]]`.
pub fn tensor(img: ArrayView2<f64>) -> (f64, f64, f64) {
    let (gx, gy) = sobel(img);
    let n = img.len() as f64;
    let jxx = gx.iter().map(|v| v * v).sum::<f64>() / n;
    let jyy = gy.iter().map(|v| v * v).sum::<f64>() / n;
    let jxy = gx.iter().zip(gy.iter()).map(|(a, b)| a * b).sum::<f64>() / n;
    (jxx, jxy, jyy)
}

pub fn structure_tensor(patch: ArrayView2<f64>) -> TensorFeatures {
    let (jxx, jxy, jyy) = tensor(patch);
    let trace = jxx + jyy;
    if trace <= TENSOR_EPS {
        return TensorFeatures {
            magnitude: trace.max(0.0),
            phase: 0.0,
            coherence: 0.0,
        };
    }
    let half_diff = 0.5 * (jxx - jyy);
    let root = (half_diff * half_diff + jxy * jxy).sqrt();
    let l1 = 0.5 * trace + root;
    let l2 = (0.5 * trace - root).max(0.0);
    let coherence = ((l1 - l2) / (l1 + l2)).clamp(0.0, 1.0);
    let mut phase = 0.5 * (2.0 * jxy).atan2(jxx - jyy);
    if phase < 0.0 {
        phase += std::f64::consts::PI;
    }
    if phase >= std::f64::consts::PI {
        phase -= std::f64::consts::PI;
    }
    TensorFeatures {
        magnitude: l1 + l2,
        phase,
        coherence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn flat_patch() {
        let f = structure_tensor(Array2::from_elem((7, 7), 3.0).view());
        assert_eq!(
            f,
            TensorFeatures {
                magnitude: 0.0,
                phase: 0.0,
                coherence: 0.0
            }
        );
    }

    #[test]
    fn column_ramp() {
        let img = Array2::from_shape_fn((7, 7), |(_, c)| c as f64);
        let f = structure_tensor(img.view());
        assert!((f.coherence - 1.0).abs() < 1e-12);
        assert!(f.phase.abs() < 1e-12);
        assert!(f.magnitude > 0.0);
    }

    #[test]
    fn row_ramp_is_perpendicular() {
        let img = Array2::from_shape_fn((5, 5), |(r, _)| 2.0 * r as f64);
        let f = structure_tensor(img.view());
        assert!((f.phase - PI / 2.0).abs() < 1e-12);
        assert!((f.coherence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflect_repeats_edge() {
        assert_eq!(reflect(-1, 3), 0);
        assert_eq!(reflect(-2, 3), 1);
        assert_eq!(reflect(3, 3), 2);
        assert_eq!(reflect(4, 3), 1);
    }
}
