use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cube_io::DEFAULT_ABSORBANCE_FLOOR;
use crate::discriminant::{CvPlan, DEFAULT_SHRINKAGE};
use crate::error::{Error, Result};
use crate::preprocess::SavGolSpec;
use crate::reduction::ComponentSelector;
use crate::signatures::SpectralMethod;
use crate::synth::{Layout, SyntheticSpec};
use crate::texture::SpatialMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Train,
    Test,
}

/// One acquisition on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInput {
    /// ENVI header of the cube.
    pub header: PathBuf,
    /// White and dark references (ENVI); required for raw-count cubes.
    #[serde(default)]
    pub white: Option<PathBuf>,
    #[serde(default)]
    pub dark: Option<PathBuf>,
    /// 8-bit PNG, nonzero = usable pixel.
    #[serde(default)]
    pub mask: Option<PathBuf>,
    /// Zone CSV (`zone_id,class,row,col`).
    #[serde(default)]
    pub zones: Option<PathBuf>,
    #[serde(default)]
    pub date: u32,
    #[serde(default)]
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InputConfig {
    /// Generated scenes: one per date and role.
    Synthetic {
        spec: SyntheticSpec,
        #[serde(default = "one")]
        dates: u32,
        #[serde(default)]
        test_scenes: bool,
    },
    Envi {
        images: Vec<ImageInput>,
    },
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSettings {
    pub outer_subsets: usize,
    pub outer_subset_size: usize,
    pub a_min: usize,
    pub shrinkage: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            outer_subsets: 2,
            outer_subset_size: 20,
            a_min: 1,
            shrinkage: DEFAULT_SHRINKAGE,
        }
    }
}

impl CvSettings {
    pub fn plan(&self, groups: Vec<u32>, a_max: usize, seed: u64) -> CvPlan {
        CvPlan {
            groups,
            outer_subsets: self.outer_subsets,
            outer_subset_size: self.outer_subset_size,
            a_min: self.a_min,
            a_max,
            seed,
            shrinkage: self.shrinkage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FusionConfig {
    Mbpca {
        components: usize,
    },
    Rosa {
        /// Largest candidate number of latent variables.
        max_components: usize,
        #[serde(default)]
        cv: CvSettings,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub name: String,
    pub input: InputConfig,
    #[serde(default = "default_floor")]
    pub absorbance_floor: f64,
    pub patch_width: usize,
    #[serde(default)]
    pub savgol: Option<SavGolSpec>,
    /// Channels removed at each end after filtering.
    #[serde(default)]
    pub trim: usize,
    pub reduction: ComponentSelector,
    pub spatial: SpatialMethod,
    pub spectral: SpectralMethod,
    pub fusion: FusionConfig,
    #[serde(default)]
    pub seed: u64,
    /// When set, the training patch count must match.
    #[serde(default)]
    pub expected_patches: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_floor() -> f64 {
    DEFAULT_ABSORBANCE_FLOOR
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config; relative paths are taken from the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InputConfig::Envi { images } = &mut cfg.input {
            for img in images {
                fix(&mut img.header);
                for p in [&mut img.white, &mut img.dark, &mut img.mask, &mut img.zones]
                    .into_iter()
                    .flatten()
                {
                    fix(p);
                }
            }
        }
        if let Some(out) = &mut cfg.output_dir {
            fix(out);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn is_supervised(&self) -> bool {
        matches!(self.fusion, FusionConfig::Rosa { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.patch_width.is_multiple_of(2) || self.patch_width < 3 {
            return bad(format!(
                "patch_width must be odd and at least 3, got {}",
                self.patch_width
            ));
        }
        if let Some(sg) = &self.savgol {
            sg.validate()?;
        } else if self.trim > 0 {
            return bad("trim without a Savitzky-Golay filter".into());
        }
        let supervised = self.is_supervised();
        match &self.input {
            InputConfig::Synthetic { spec, dates, .. } => {
                spec.validate()?;
                if *dates == 0 {
                    return bad("at least one synthetic date is required".into());
                }
                let labelled = matches!(spec.layout, Layout::Zones { .. });
                if supervised && !labelled {
                    return bad(
                        "rosa fusion needs labelled zones, the synthetic layout is a disk".into(),
                    );
                }
                if !supervised && labelled {
                    return bad(
                        "mbpca fusion takes an unlabelled region, use the disk layout".into(),
                    );
                }
            }
            InputConfig::Envi { images } => {
                if !images.iter().any(|i| i.role == Role::Train) {
                    return bad("no training image".into());
                }
                for img in images {
                    if supervised && img.zones.is_none() {
                        return bad(format!(
                            "rosa fusion needs zones for {}",
                            img.header.display()
                        ));
                    }
                    if !supervised && img.zones.is_some() {
                        return bad(format!(
                            "mbpca fusion takes a mask, not zones, for {}",
                            img.header.display()
                        ));
                    }
                    if img.white.is_some() != img.dark.is_some() {
                        return bad(format!(
                            "{} needs both references or neither",
                            img.header.display()
                        ));
                    }
                }
            }
        }
        match &self.fusion {
            FusionConfig::Mbpca { components } if *components == 0 => {
                bad("mbpca needs at least one component".into())
            }
            FusionConfig::Rosa { max_components, cv } if *max_components < cv.a_min.max(1) => {
                bad(format!(
                    "max_components {max_components} is below a_min {}",
                    cv.a_min
                ))
            }
            _ => Ok(()),
        }
    }
}
