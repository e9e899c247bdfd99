//! Synthetic scenes standing in for the leaf and wood-disk acquisitions.
//!
//! Every pixel carries an absorbance spectrum
//! `x = (1 + α·a)·s0 + class·depth·g + σ_s·(b1·n1 + b2·n2) + noise`, where
//! `s0` is a smooth base spectrum with water bands near 1440 and 1940 nm, `a`
//! a zero-mean unit-variance texture field, `g` a Gaussian absorption peak and
//! `n1`, `n2` a baseline slope and a broad band whose per-pixel amplitudes
//! `b1`, `b2` are independent N(0, 1) draws shared by both classes. The cube
//! is returned as reflectance `10^(-x)`.
//!
//! In texture-only mode both classes draw `a` from N(0, 1) at every pixel, but
//! the infected field mixes in a spatially smoothed component, so only the
//! spatial autocorrelation differs. In spectrum-only mode the field is white
//! for both classes and the infected zones gain the absorption peak.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cube_io::{HyperCube, SpectralAxis, Unit};
use crate::error::{Error, Result};
use crate::patching::{ZoneSpec, CONTROL, INFECTED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastKind {
    TextureOnly,
    SpectrumOnly,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    /// Pairs of square zones, one infected and one control per pair, laid
    /// out on a grid.
    Zones {
        zones_per_class: usize,
        zone_size: usize,
        gap: usize,
        columns: usize,
    },
    /// A masked disk with concentric rings and no class labels.
    Disk {
        radius: usize,
        margin: usize,
        ring_period: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub layout: Layout,
    pub bands: usize,
    pub start_nm: f64,
    pub step_nm: f64,
    pub contrast: ContrastKind,
    /// Texture mixing weight in `[0, 1]`; also scales the peak depth.
    pub magnitude: f64,
    /// Absorbance depth of the class peak at magnitude 1.
    pub peak_depth: f64,
    pub peak_nm: f64,
    pub peak_width_nm: f64,
    /// Multiplicative modulation `α` of the base spectrum by the field.
    pub modulation: f64,
    /// Gaussian sigma, in pixels, of the correlated field component.
    pub smoothing: f64,
    /// Standard deviation of the per-band absorbance noise.
    pub noise: f64,
    /// Per-pixel scatter amplitude `σ_s` of the slope and broad-band terms.
    pub scatter: f64,
    /// Amplitude of a slow field added to every pixel's texture value.
    pub background_amplitude: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            layout: Layout::Zones {
                zones_per_class: 8,
                zone_size: 7,
                gap: 2,
                columns: 4,
            },
            bands: 256,
            start_nm: 960.0,
            step_nm: 6.0,
            contrast: ContrastKind::TextureOnly,
            magnitude: 0.8,
            peak_depth: 0.05,
            peak_nm: 1940.0,
            peak_width_nm: 30.0,
            modulation: 0.1,
            smoothing: 1.5,
            noise: 0.002,
            scatter: 0.05,
            background_amplitude: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub cube: HyperCube,
    pub zones: Vec<ZoneSpec>,
    pub mask: Option<Array2<bool>>,
}

fn gaussian(x: f64, mu: f64, sigma: f64) -> f64 {
    (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp()
}

/// Smooth base absorbance with water bands near 1440 and 1940 nm.
pub fn base_spectrum(axis: &SpectralAxis) -> Vec<f64> {
    axis.wavelengths()
        .iter()
        .map(|&l| {
            0.4 + 0.2 * (l - 960.0) / 1530.0
                + 0.15 * gaussian(l, 1200.0, 60.0)
                + 0.5 * gaussian(l, 1440.0, 40.0)
                + 0.8 * gaussian(l, 1940.0, 50.0)
        })
        .collect()
}

fn white(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Array2<f64> {
    Array2::from_shape_fn((h, w), |_| rng.sample(StandardNormal))
}

/// Unit-variance Gaussian-filtered white noise.
fn smooth_field(rng: &mut ChaCha8Rng, h: usize, w: usize, sigma: f64) -> Array2<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let kernel: Vec<f64> = (0..=2 * radius)
        .map(|i| gaussian(i as f64, radius as f64, sigma))
        .collect();
    let raw = white(rng, h + 2 * radius, w + 2 * radius);
    let norm: f64 = kernel.iter().map(|k| k * k).sum::<f64>();
    let mut rows = Array2::<f64>::zeros((h + 2 * radius, w));
    for r in 0..h + 2 * radius {
        for c in 0..w {
            rows[[r, c]] = (0..kernel.len()).map(|j| kernel[j] * raw[[r, c + j]]).sum();
        }
    }
    Array2::from_shape_fn((h, w), |(r, c)| {
        (0..kernel.len())
            .map(|i| kernel[i] * rows[[r + i, c]])
            .sum::<f64>()
            / norm
    })
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bands < 2 {
            return Err(Error::InvalidArgument(format!(
                "{} bands is too few",
                self.bands
            )));
        }
        if !(0.0..=1.0).contains(&self.magnitude) {
            return Err(Error::InvalidArgument(format!(
                "magnitude {} outside [0, 1]",
                self.magnitude
            )));
        }
        if !(self.smoothing > 0.0)
            || !(self.noise >= 0.0)
            || !(self.scatter >= 0.0)
            || !(self.step_nm > 0.0)
        {
            return Err(Error::InvalidArgument(
                "smoothing and step must be positive, noise and scatter non-negative".into(),
            ));
        }
        match self.layout {
            Layout::Zones {
                zones_per_class,
                zone_size,
                columns,
                ..
            } if zones_per_class == 0 || zone_size == 0 || columns == 0 => Err(
                Error::InvalidArgument("zone layout has a zero dimension".into()),
            ),
            Layout::Disk {
                radius,
                ring_period,
                ..
            } if radius == 0 || !(ring_period > 0.0) => Err(Error::InvalidArgument(
                "disk radius and ring period must be positive".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn axis(&self) -> Result<SpectralAxis> {
        SpectralAxis::uniform(self.start_nm, self.step_nm, self.bands)
    }

    fn texture_mix(&self) -> f64 {
        match self.contrast {
            ContrastKind::TextureOnly | ContrastKind::Both => self.magnitude,
            ContrastKind::SpectrumOnly => 0.0,
        }
    }

    fn depth(&self) -> f64 {
        match self.contrast {
            ContrastKind::SpectrumOnly | ContrastKind::Both => self.magnitude * self.peak_depth,
            ContrastKind::TextureOnly => 0.0,
        }
    }
}

pub fn synth(spec: &SyntheticSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let axis = spec.axis()?;
    let s0 = base_spectrum(&axis);
    let g: Vec<f64> = axis
        .wavelengths()
        .iter()
        .map(|&l| gaussian(l, spec.peak_nm, spec.peak_width_nm))
        .collect();
    let (lo, hi) = (axis.wavelengths()[0], axis.wavelengths()[axis.len() - 1]);
    let slope: Vec<f64> = axis
        .wavelengths()
        .iter()
        .map(|&l| (2.0 * l - lo - hi) / (hi - lo))
        .collect();
    let broad: Vec<f64> = axis
        .wavelengths()
        .iter()
        .map(|&l| gaussian(l, 1650.0, 200.0))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let (h, w, zones, mask, field, class_map) = match spec.layout {
        Layout::Zones {
            zones_per_class,
            zone_size,
            gap,
            columns,
        } => {
            let n_zones = 2 * zones_per_class;
            let grid_rows = n_zones.div_ceil(columns);
            let h = gap + grid_rows * (zone_size + gap);
            let w = gap + columns.min(n_zones) * (zone_size + gap);
            let mut zones = Vec::with_capacity(n_zones);
            for z in 0..n_zones {
                let (gr, gc) = (z / columns, z % columns);
                let class = if z % 2 == 0 { INFECTED } else { CONTROL };
                zones.push(ZoneSpec::rect(
                    (z / 2 + 1) as u32,
                    Some(class),
                    gap + gr * (zone_size + gap),
                    gap + gc * (zone_size + gap),
                    zone_size,
                    zone_size,
                ));
            }
            let base = white(&mut rng, h, w);
            let smooth = smooth_field(&mut rng, h, w, spec.smoothing);
            let mut class_map = Array2::<u8>::from_elem((h, w), CONTROL);
            for z in &zones {
                for &(r, c) in &z.pixels {
                    class_map[[r, c]] = z.class_label.unwrap_or(CONTROL);
                }
            }
            let c = spec.texture_mix();
            let field = Array2::from_shape_fn((h, w), |(r, col)| {
                if class_map[[r, col]] == INFECTED {
                    (1.0 - c).sqrt() * base[[r, col]] + c.sqrt() * smooth[[r, col]]
                } else {
                    base[[r, col]]
                }
            });
            (h, w, zones, None, field, class_map)
        }
        Layout::Disk {
            radius,
            margin,
            ring_period,
        } => {
            let size = 2 * (radius + margin) + 1;
            let centre = (radius + margin) as f64;
            let noise = white(&mut rng, size, size);
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let mask = Array2::from_shape_fn((size, size), |(r, c)| {
                ((r as f64 - centre).powi(2) + (c as f64 - centre).powi(2)).sqrt() <= radius as f64
            });
            let field = Array2::from_shape_fn((size, size), |(r, c)| {
                let d = ((r as f64 - centre).powi(2) + (c as f64 - centre).powi(2)).sqrt();
                (std::f64::consts::TAU * d / ring_period + phase).sin() + 0.3 * noise[[r, c]]
            });
            (
                size,
                size,
                Vec::new(),
                Some(mask),
                field,
                Array2::from_elem((size, size), CONTROL),
            )
        }
    };

    let phases: (f64, f64) = (
        rng.random::<f64>() * std::f64::consts::TAU,
        rng.random::<f64>() * std::f64::consts::TAU,
    );
    let depth = spec.depth();
    let bands = spec.bands;
    let mut values = Array3::<f64>::zeros((h, w, bands));
    for r in 0..h {
        for c in 0..w {
            let bg = spec.background_amplitude
                * (std::f64::consts::TAU * r as f64 / h as f64 + phases.0).cos()
                * (std::f64::consts::TAU * c as f64 / w as f64 + phases.1).cos();
            let a = field[[r, c]] + bg;
            let infected = class_map[[r, c]] == INFECTED;
            let b1: f64 = rng.sample(StandardNormal);
            let b2: f64 = rng.sample(StandardNormal);
            for j in 0..bands {
                let eps: f64 = rng.sample(StandardNormal);
                let mut x = (1.0 + spec.modulation * a) * s0[j]
                    + spec.scatter * (b1 * slope[j] + b2 * broad[j])
                    + spec.noise * eps;
                if infected {
                    x += depth * g[j];
                }
                values[[r, c, j]] = 10f64.powf(-x);
            }
        }
    }
    let mut cube = HyperCube::new(values, axis, Unit::Reflectance)?;
    if let Some(m) = &mask {
        cube = crate::cube_io::apply_mask(&cube, m)?;
    }
    Ok(SyntheticScene { cube, zones, mask })
}
