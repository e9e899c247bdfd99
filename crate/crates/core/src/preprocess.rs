//! Spectral pretreatments: Savitzky-Golay filtering with edge trimming, and
//! the per-block autoscaling applied before fusion.

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::cube_io::{HyperCube, SpectralAxis};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavGolSpec {
    pub window: usize,
    pub degree: usize,
    pub deriv_order: usize,
}

impl SavGolSpec {
    pub fn new(window: usize, degree: usize, deriv_order: usize) -> Result<Self> {
        let spec = Self {
            window,
            degree,
            deriv_order,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "window must be odd, got {}",
                self.window
            )));
        }
        if self.degree >= self.window {
            return Err(Error::InvalidArgument(format!(
                "degree {} must be below window {}",
                self.degree, self.window
            )));
        }
        if self.deriv_order > self.degree {
            return Err(Error::InvalidArgument(format!(
                "derivative order {} exceeds degree {}",
                self.deriv_order, self.degree
            )));
        }
        Ok(())
    }

    /// Correlation weights `c[j]`, `j = -m..=m`, such that
    /// `y[i] = sum_j c[j] * x[i + j]` is the `deriv_order`-th derivative (unit
    /// spacing) of the local least-squares polynomial at the window center.
    pub fn kernel(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let m = (self.window / 2) as i64;
        let cols = self.degree + 1;
        // Positions scaled to [-1, 1] keep the design matrix well conditioned.
        let unit = m.max(1) as f64;
        let a = DMatrix::from_fn(self.window, cols, |i, q| {
            ((i as i64 - m) as f64 / unit).powi(q as i32)
        });
        let proj = a
            .pseudo_inverse(1e-14)
            .map_err(|e| Error::Degenerate(format!("Savitzky-Golay design matrix: {e}")))?;
        let fact: f64 = (1..=self.deriv_order).map(|v| v as f64).product();
        let chain = unit.powi(self.deriv_order as i32);
        Ok((0..self.window)
            .map(|j| proj[(self.deriv_order, j)] * fact / chain)
            .collect())
    }
}

/// Mirror index (`x[-1] = x[1]`) for edge handling.
fn mirror(i: i64, n: i64) -> usize {
    let period = 2 * (n - 1);
    if period == 0 {
        return 0;
    }
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    j as usize
}

fn filter_row(x: ArrayView1<f64>, kernel: &[f64], out: &mut [f64]) {
    let n = x.len() as i64;
    let m = (kernel.len() / 2) as i64;
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as i64;
        let mut acc = 0.0;
        for (j, &w) in kernel.iter().enumerate() {
            let idx = i + j as i64 - m;
            let v = if (0..n).contains(&idx) {
                x[idx as usize]
            } else {
                x[mirror(idx, n)]
            };
            acc += w * v;
        }
        *o = acc;
    }
}

/// Filter every row of `spectra` (M × bands). The same symmetric kernel is used
/// at every position with mirrored edges; the first and last `window / 2`
/// outputs are contaminated and should be removed with [`trim_edges`].
pub fn savgol(spectra: ArrayView2<f64>, spec: &SavGolSpec) -> Result<Array2<f64>> {
    let kernel = spec.kernel()?;
    let bands = spectra.ncols();
    if bands < spec.window {
        return Err(Error::InvalidArgument(format!(
            "{bands} channels is fewer than the window {}",
            spec.window
        )));
    }
    let mut out = Array2::zeros(spectra.raw_dim());
    Zip::from(out.rows_mut())
        .and(spectra.rows())
        .par_for_each(|mut o, x| {
            let o = o.as_slice_mut().expect("standard layout");
            filter_row(x, &kernel, o);
        });
    Ok(out)
}

/// Drop `n_per_side` channels at both ends of the matrix and the axis.
pub fn trim_edges(
    spectra: ArrayView2<f64>,
    axis: &SpectralAxis,
    n_per_side: usize,
) -> Result<(Array2<f64>, SpectralAxis)> {
    let bands = spectra.ncols();
    if bands != axis.len() {
        return Err(Error::Shape(format!(
            "{bands} columns vs axis of {}",
            axis.len()
        )));
    }
    if bands <= 2 * n_per_side {
        return Err(Error::InvalidArgument(format!(
            "cannot trim {n_per_side} channels per side from {bands}"
        )));
    }
    let end = bands - n_per_side;
    Ok((
        spectra.slice(s![.., n_per_side..end]).to_owned(),
        axis.slice(n_per_side, end)?,
    ))
}

/// Savitzky-Golay filter every pixel spectrum of a cube, then trim.
pub fn savgol_cube(cube: &HyperCube, spec: &SavGolSpec, n_per_side: usize) -> Result<HyperCube> {
    let (h, w, b) = cube.values().dim();
    let flat = cube
        .values()
        .to_shape((h * w, b))
        .map_err(|e| Error::Shape(e.to_string()))?;
    let filtered = savgol(flat.view(), spec)?;
    let (trimmed, axis) = trim_edges(filtered.view(), cube.axis(), n_per_side)?;
    let nb = axis.len();
    let values = Array3::from_shape_vec((h, w, nb), trimmed.into_raw_vec_and_offset().0)
        .map_err(|e| Error::Shape(e.to_string()))?;
    cube.with_values(values, axis, cube.unit())
}

/// Column means and the global scale that [`block_autoscale`] applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub column_means: Vec<f64>,
    /// Population standard deviation of all elements of the centered block.
    pub scale: f64,
}

impl ScalingParams {
    pub fn apply(&self, block: ArrayView2<f64>) -> Result<Array2<f64>> {
        if block.ncols() != self.column_means.len() {
            return Err(Error::Shape(format!(
                "block has {} columns, scaling expects {}",
                block.ncols(),
                self.column_means.len()
            )));
        }
        let means = ArrayView1::from(&self.column_means[..]);
        Ok((&block - &means.insert_axis(Axis(0))) / self.scale)
    }
}

/// Center columns, then divide the whole block by its global standard deviation.
pub fn block_autoscale(block: ArrayView2<f64>) -> Result<(Array2<f64>, ScalingParams)> {
    let n = block.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "autoscaling needs at least 2 rows, got {n}"
        )));
    }
    let means: Array1<f64> = block.mean_axis(Axis(0)).expect("non-empty");
    let centered = &block - &means.view().insert_axis(Axis(0));
    let count = centered.len() as f64;
    let scale = (centered.iter().map(|v| v * v).sum::<f64>() / count).sqrt();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Degenerate(
            "constant block has zero standard deviation".into(),
        ));
    }
    Ok((
        centered / scale,
        ScalingParams {
            column_means: means.to_vec(),
            scale,
        },
    ))
}
