use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use spatspec::discriminant::{format_tenths, CvReport, LdaModel, Rounding};
use spatspec::fusion::RosaModel;
use spatspec::pipeline::{
    self, export_synthetic, fit_final, fuse_mbpca, ingest, predict_test, prepare, read_features,
    read_json, run_cv, sweep_gray_levels, write_census, write_cv, write_features, write_json,
    write_mbpca, write_report, write_rosa, write_rows, PipelineConfig,
};
use spatspec::SavGolSpec;

#[derive(Parser)]
#[command(
    name = "spatspec",
    version,
    about = "Spatial-spectral feature extraction and fusion for hyperspectral images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Run directory; defaults to the config's `output_dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Lower bound applied to reflectance before taking the log.
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    sg_window: Option<usize>,
    #[arg(long)]
    sg_degree: Option<usize>,
    #[arg(long)]
    sg_deriv: Option<usize>,
    /// Channels dropped at each end after filtering.
    #[arg(long)]
    trim: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and preprocess every scene; write scene metadata and patch census.
    Ingest(Common),
    /// Write the configured synthetic scenes as ENVI cubes plus an equivalent config.
    Synth(Common),
    /// Extract spatial and spectral feature blocks.
    Features(Common),
    /// Fuse the blocks: MB-PCA, or ROSA at the cross-validated (or given) A.
    Fuse {
        #[command(flatten)]
        common: Common,
        /// Latent variables for ROSA; defaults to the CV optimum.
        #[arg(long)]
        components: Option<usize>,
    },
    /// Nested grouped cross-validation of ROSA + LDA.
    Cv(Common),
    /// Classify the test blocks with a fitted model.
    Predict(Common),
    /// Confusion tables from the test predictions.
    Report(Common),
    /// Minimum CV error for each number of gray levels.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Inclusive range `lo..=hi` or comma list, e.g. `2-19` or `2,4,8`.
        #[arg(long, default_value = "2-19")]
        levels: String,
    },
    /// Every stage in order, with a manifest.
    Run(Common),
}

impl Common {
    fn load(&self) -> Result<(PipelineConfig, PathBuf)> {
        let mut cfg = PipelineConfig::load(&self.config)
            .with_context(|| format!("loading config {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(f) = self.floor {
            cfg.absorbance_floor = f;
        }
        if self.sg_window.is_some() || self.sg_degree.is_some() || self.sg_deriv.is_some() {
            let base = cfg.savgol.unwrap_or(SavGolSpec {
                window: 13,
                degree: 3,
                deriv_order: 0,
            });
            cfg.savgol = Some(SavGolSpec {
                window: self.sg_window.unwrap_or(base.window),
                degree: self.sg_degree.unwrap_or(base.degree),
                deriv_order: self.sg_deriv.unwrap_or(base.deriv_order),
            });
        }
        if let Some(t) = self.trim {
            cfg.trim = t;
        }
        cfg.validate()?;
        let out = match (&self.out, &cfg.output_dir) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => o.clone(),
            (None, None) => bail!("no output directory: pass --out or set output_dir"),
        };
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok((cfg, out))
    }
}

fn parse_levels(text: &str) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = text.split_once('-') {
        let (lo, hi): (usize, usize) = (lo.trim().parse()?, hi.trim().parse()?);
        if lo > hi {
            bail!("empty gray-level range {text}");
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',').map(|s| Ok(s.trim().parse()?)).collect()
}

fn cv_optimum(out: &Path) -> Result<usize> {
    let path = out.join("cv_summary.json");
    let report: CvReport = read_json(&path).with_context(|| {
        format!(
            "reading {}; run `cv` first or pass --components",
            path.display()
        )
    })?;
    Ok(report.optimal_a)
}

fn print_confusion(title: &str, m: &spatspec::ConfusionMatrix) {
    let r = m.report(Rounding::default());
    let [ii, ic, ci, cc] = m.table();
    println!("{title}");
    println!(
        "  {:>10} {:>10} {:>10} {:>8}",
        "", "infected", "control", "error"
    );
    println!(
        "  {:>10} {ii:>10} {ic:>10} {:>7}%",
        "infected",
        format_tenths(r.row_infected)
    );
    println!(
        "  {:>10} {ci:>10} {cc:>10} {:>7}%",
        "control",
        format_tenths(r.row_control)
    );
    println!(
        "  {:>10} {:>9}% {:>9}% {:>7}%",
        "error",
        format_tenths(r.column_infected),
        format_tenths(r.column_control),
        format_tenths(r.overall)
    );
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(c) => {
            let (cfg, out) = c.load()?;
            let scenes = ingest(&cfg)?;
            let prepared = prepare(&cfg, &scenes)?;
            write_json(out.join("scenes.json"), &prepared.scenes)?;
            write_census(out.join("census.csv"), &prepared)?;
            for (s, p) in prepared.scenes.iter().zip(&prepared.patches) {
                println!(
                    "{}: {}×{}×{} cube, {} patches",
                    s.name,
                    s.height,
                    s.width,
                    s.bands,
                    p.len()
                );
            }
        }
        Command::Synth(c) => {
            let (cfg, out) = c.load()?;
            let mut exported = export_synthetic(&cfg, &out)?;
            exported.output_dir = None;
            let path = out.join("config.json");
            fs::write(&path, exported.to_json()? + "\n")?;
            println!("wrote {}", path.display());
        }
        Command::Features(c) => {
            let (cfg, out) = c.load()?;
            let prepared = prepare(&cfg, &ingest(&cfg)?)?;
            let f = pipeline::features_with(&prepared, &cfg.spatial)?;
            write_census(out.join("census.csv"), &prepared)?;
            write_features(&out, &f)?;
            for b in &f.train.blocks {
                println!(
                    "{} {}: {}×{}",
                    b.kind,
                    b.source,
                    b.data.nrows(),
                    b.data.ncols()
                );
            }
        }
        Command::Fuse { common, components } => {
            let (cfg, out) = common.load()?;
            let f = read_features(&out)?;
            if cfg.is_supervised() {
                let a = match components {
                    Some(a) => a,
                    None => cv_optimum(&out)?,
                };
                let cv: Option<CvReport> = read_json(out.join("cv_summary.json")).ok();
                let outcome = fit_final(&cfg, &f, a)?;
                write_rosa(&out, &outcome, cv.as_ref())?;
                for s in &outcome.model.trace[..outcome.a] {
                    println!("LV {}: {} block {}", s.component, s.kind, s.source);
                }
            } else {
                let outcome = fuse_mbpca(&cfg, &f)?;
                write_mbpca(&out, &outcome)?;
                for (a, v) in outcome.model.explained_variance.iter().enumerate() {
                    println!("component {}: {:.4}", a + 1, v);
                }
            }
        }
        Command::Cv(c) => {
            let (cfg, out) = c.load()?;
            let f = read_features(&out)?;
            let report = run_cv(&cfg, &f.train)?;
            write_cv(&out, &report)?;
            for (a, e) in report.a_values.iter().zip(&report.mean_curve) {
                println!("A = {a:2}: {:.2}%", 100.0 * e);
            }
            println!("optimal A = {}", report.optimal_a);
        }
        Command::Predict(c) => {
            let (_, out) = c.load()?;
            let f = read_features(&out)?;
            let model: RosaModel = read_json(out.join("models/rosa.json"))
                .context("no fitted model; run `fuse` first")?;
            let lda: LdaModel = read_json(out.join("models/lda.json"))?;
            let pred = predict_test(&f, &model, &lda)?;
            if pred.is_empty() {
                bail!("the config has no test scenes");
            }
            write_rows(out.join("predictions_test.csv"), &pred)?;
            println!("{} test patches classified", pred.len());
        }
        Command::Report(c) => {
            let (_, out) = c.load()?;
            let Some((all, by_date)) = write_report(&out)? else {
                bail!("no predictions_test.csv under {}", out.display());
            };
            print_confusion("test", &all);
            for (d, m) in &by_date {
                print_confusion(&format!("date {d}"), m);
            }
        }
        Command::Sweep { common, levels } => {
            let (cfg, out) = common.load()?;
            let rows = sweep_gray_levels(&cfg, &parse_levels(&levels)?)?;
            write_rows(out.join("gray_level_sweep.csv"), &rows)?;
            for r in &rows {
                println!(
                    "NG {:2}: {:.2}% at A = {}",
                    r.levels,
                    100.0 * r.min_error,
                    r.argmin_a
                );
            }
        }
        Command::Run(c) => {
            let (cfg, out) = c.load()?;
            let s = pipeline::run(&cfg, &out)?;
            if let Some(cv) = &s.cv {
                println!(
                    "optimal A = {}, CV error {:.2}%",
                    cv.optimal_a,
                    100.0 * cv.min_error()
                );
            }
            if let Some(m) = &s.test_confusion {
                print_confusion("test", m);
            }
            println!(
                "{} files listed in {}",
                s.manifest.files.len(),
                out.join("manifest.json").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
