//! Batch experiment driver: fit, evaluate, profile, compare, permutation
//! studies and coordinate-decomposition debugging. Emits CSV and grid files
//! for external plotting.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure (non-finite loss).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use asmr::coords::PartitionScheme;
use asmr::dataio::{self, DataError, Grid};
use asmr::metrics::{iou, psnr, ssim};
use asmr::model::{AsmrModel, ModelError, SirenModel};
use asmr::profiler::{mac_asmr, mac_siren, MacReport};
use asmr::train::{fit_asmr, fit_siren, records_to_csv, Batch, TrainConfig, TrainError};

#[derive(Parser)]
#[command(name = "asmr", version, about = "Activation-sharing multi-resolution coordinate networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a model to a signal; writes checkpoint, metrics.csv and a
    /// reconstruction into the output directory.
    Fit(FitArgs),
    /// Evaluate a checkpoint against a target signal.
    Eval(EvalArgs),
    /// Analytic MAC/parameter profile of a configuration.
    Profile(ProfileArgs),
    /// Fit every distinct permutation of a base multiset and tabulate
    /// cost/quality.
    Permute(PermuteArgs),
    /// Print the per-level decomposition of a coordinate.
    Decompose(DecomposeArgs),
    /// Fit several configurations on the same target and tabulate them.
    Compare(CompareArgs),
}

/// Flat key=value experiment description; flags override file entries.
#[derive(Debug, Clone)]
struct ExperimentConfig {
    model: ModelKind,
    widths: Vec<usize>,
    scheme: Option<String>,
    omega0: f64,
    input: Option<PathBuf>,
    out: PathBuf,
    samples: usize,
    crop_to_factorable: bool,
    train: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ModelKind {
    Siren,
    Asmr,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Asmr,
            widths: vec![2, 128, 128, 128, 1],
            scheme: None,
            omega0: 30.0,
            input: None,
            out: PathBuf::from("out"),
            samples: 32_000,
            crop_to_factorable: false,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NumericFailure { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<asmr::coords::CoordsError> for CliError {
    fn from(e: asmr::coords::CoordsError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn parse_widths(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("bad widths `{s}`: {e}")))
}

fn parse_batch(s: &str) -> Result<Batch, CliError> {
    if s == "full" {
        Ok(Batch::Full)
    } else {
        s.parse::<usize>()
            .map(Batch::Sampled)
            .map_err(|e| CliError::Config(format!("bad batch `{s}` (use `full` or a count): {e}")))
    }
}

fn parse_model(s: &str) -> Result<ModelKind, CliError> {
    match s {
        "siren" => Ok(ModelKind::Siren),
        "asmr" => Ok(ModelKind::Asmr),
        other => Err(CliError::Config(format!(
            "unknown model `{other}` (use `siren` or `asmr`)"
        ))),
    }
}

impl ExperimentConfig {
    /// Parses a flat `key=value` file; `#` starts a comment.
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected key=value, found `{line}`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |e: String| CliError::Config(format!("bad value for `{key}`: {e}"));
        match key {
            "model" => self.model = parse_model(value)?,
            "widths" => self.widths = parse_widths(value)?,
            "scheme" => self.scheme = Some(value.to_string()),
            "omega0" => self.omega0 = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "input" => self.input = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "samples" => self.samples = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "crop_to_factorable" => {
                self.crop_to_factorable = value
                    .parse()
                    .map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?
            }
            "iters" => self.train.iterations = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "lr" => self.train.lr = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "lr_min" => self.train.lr_min = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "batch" => self.train.batch = parse_batch(value)?,
            "seed" => self.train.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "log_every" => self.train.log_every = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }
}

/// Shared hyperparameter flags; every `Some` overrides the config file.
#[derive(Args, Debug, Clone, Default)]
struct OverrideArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target signal (.pgm, .ppm, .wav or .grid).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Model kind: `siren` or `asmr`.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated layer widths, e.g. 2,128,128,128,1.
    #[arg(long)]
    widths: Option<String>,
    /// Partition scheme, e.g. `4x4x4x8` or `axis0=4x4;axis1=2x8`.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_min: Option<f64>,
    /// `full` or a per-step sample count.
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    log_every: Option<usize>,
    /// Leading samples to read from WAV inputs.
    #[arg(long)]
    samples: Option<usize>,
    /// Crop the input to the scheme's extents when it is larger.
    #[arg(long)]
    crop_to_factorable: bool,
}

impl OverrideArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.model {
            cfg.model = parse_model(v)?;
        }
        if let Some(v) = &self.widths {
            cfg.widths = parse_widths(v)?;
        }
        if let Some(v) = &self.scheme {
            cfg.scheme = Some(v.clone());
        }
        if let Some(v) = self.omega0 {
            cfg.omega0 = v;
        }
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.iters {
            cfg.train.iterations = v;
        }
        if let Some(v) = self.lr {
            cfg.train.lr = v;
        }
        if let Some(v) = self.lr_min {
            cfg.train.lr_min = v;
        }
        if let Some(v) = &self.batch {
            cfg.train.batch = parse_batch(v)?;
        }
        if let Some(v) = self.seed {
            cfg.train.seed = v;
        }
        if let Some(v) = self.log_every {
            cfg.train.log_every = v;
        }
        if let Some(v) = self.samples {
            cfg.samples = v;
        }
        if self.crop_to_factorable {
            cfg.crop_to_factorable = true;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `fit`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Target signal to compare against.
    #[arg(long)]
    input: PathBuf,
    /// Leading samples to read from WAV inputs.
    #[arg(long, default_value_t = 32_000)]
    samples: usize,
    /// Optional directory to write the reconstruction into.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct PermuteArgs {
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Coordinate, comma-separated per axis (e.g. `100` or `3,7`).
    coordinate: String,
    /// Partition scheme.
    #[arg(long)]
    scheme: String,
}

#[derive(Args)]
struct CompareArgs {
    /// Config files, one per model to compare (repeatable).
    #[arg(long, required = true, num_args = 1..)]
    config: Vec<PathBuf>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Fit(args) => cmd_fit(&args),
        Cmd::Eval(args) => cmd_eval(&args),
        Cmd::Profile(args) => cmd_profile(&args),
        Cmd::Permute(args) => cmd_permute(&args),
        Cmd::Decompose(args) => cmd_decompose(&args),
        Cmd::Compare(args) => cmd_compare(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read_input(path: &Path, samples: usize) -> Result<Grid, CliError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let grid = match ext {
        "pgm" => dataio::read_pgm(path)?,
        "ppm" => dataio::read_ppm(path)?,
        "wav" => dataio::read_wav(path, samples)?,
        "grid" => dataio::read_raw_grid(path)?,
        other => {
            return Err(CliError::Data(format!(
                "unsupported input extension `.{other}` (use .pgm, .ppm, .wav or .grid)"
            )))
        }
    };
    Ok(grid)
}

fn write_like_input(grid: &Grid, input: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let ext = input.extension().and_then(|e| e.to_str()).unwrap_or("grid");
    let path = out.join(format!("reconstruction.{ext}"));
    match ext {
        "pgm" => dataio::write_pgm(grid, &path)?,
        "ppm" => dataio::write_ppm(grid, &path)?,
        "wav" => dataio::write_wav(grid, &path, 16_000)?,
        _ => dataio::write_raw_grid(grid, &path)?,
    }
    Ok(path)
}

/// Parses the scheme and reconciles it with the target extents, cropping
/// when allowed.
fn scheme_for(cfg: &ExperimentConfig, target: &Grid) -> Result<(PartitionScheme, Grid), CliError> {
    let text = cfg
        .scheme
        .as_deref()
        .ok_or_else(|| CliError::Config("asmr model requires --scheme".into()))?;
    let scheme = parse_scheme_for_dims(text, target.extents.len())?;
    if scheme.extents() == target.extents.as_slice() {
        return Ok((scheme, target.clone()));
    }
    if cfg.crop_to_factorable {
        let cropped = dataio::crop(target, scheme.extents())?;
        return Ok((scheme, cropped));
    }
    Err(CliError::Config(format!(
        "scheme extents {:?} do not match target extents {:?} (pass --crop-to-factorable to crop)",
        scheme.extents(),
        target.extents
    )))
}

/// A single-axis scheme string is broadcast to every axis of a `dims`-D
/// target; multi-axis strings must match exactly.
fn parse_scheme_for_dims(text: &str, dims: usize) -> Result<PartitionScheme, CliError> {
    let scheme = PartitionScheme::parse(text)?;
    if scheme.dim() == dims {
        return Ok(scheme);
    }
    if scheme.dim() == 1 && dims > 1 {
        let bases = vec![scheme.bases_per_axis()[0].clone(); dims];
        let extents = vec![scheme.extents()[0]; dims];
        return Ok(PartitionScheme::new(&bases, &extents)?);
    }
    Err(CliError::Config(format!(
        "scheme is {}-D but the target is {dims}-D",
        scheme.dim()
    )))
}

struct FitOutcome {
    csv: String,
    reconstruction: Grid,
    final_psnr: f64,
    params: usize,
    per_sample_mac: f64,
}

fn run_fit(cfg: &ExperimentConfig, target: &Grid, out_dir: Option<&Path>) -> Result<FitOutcome, CliError> {
    match cfg.model {
        ModelKind::Asmr => {
            let (scheme, target) = scheme_for(cfg, target)?;
            let mut model = AsmrModel::init(&cfg.widths, cfg.omega0, scheme.clone(), cfg.train.seed)?;
            let result = fit_asmr(&mut model, &target, &cfg.train)?;
            if let Some(dir) = out_dir {
                model.save(&dir.join("model.ckpt"))?;
            }
            let pred = model.forward_shared(None)?;
            let recon = Grid::new(
                target.extents.clone(),
                target.channels,
                target.denormalize(pred.data()),
                target.lo,
                target.hi,
            );
            let report = mac_asmr(&cfg.widths, &scheme).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(FitOutcome {
                csv: records_to_csv(&result.records),
                final_psnr: native_psnr(&recon, &target),
                reconstruction: recon,
                params: report.params,
                per_sample_mac: report.per_sample(),
            })
        }
        ModelKind::Siren => {
            let mut model = SirenModel::init(&cfg.widths, cfg.omega0, cfg.train.seed)?;
            let result = fit_siren(&mut model, target, &cfg.train)?;
            if let Some(dir) = out_dir {
                model.save(&dir.join("model.ckpt"))?;
            }
            let coords = asmr::train::normalized_coords(&target.extents);
            let pred = model.forward(&coords)?;
            let recon = Grid::new(
                target.extents.clone(),
                target.channels,
                target.denormalize(pred.data()),
                target.lo,
                target.hi,
            );
            let report = mac_siren(&cfg.widths, 1);
            Ok(FitOutcome {
                csv: records_to_csv(&result.records),
                final_psnr: native_psnr(&recon, target),
                reconstruction: recon,
                params: report.params,
                per_sample_mac: report.total_macs as f64,
            })
        }
    }
}

fn native_psnr(pred: &Grid, target: &Grid) -> f64 {
    psnr(&pred.values, &target.values, target.peak()).expect("matching shapes")
}

/// SSIM for 2-D targets at least 11x11; `None` otherwise.
fn native_ssim(pred: &Grid, target: &Grid) -> Option<f64> {
    if target.extents.len() != 2 {
        return None;
    }
    ssim(
        &pred.values,
        &target.values,
        target.extents[0],
        target.extents[1],
        target.channels,
        target.peak(),
    )
    .ok()
}

fn ssim_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |s| format!("{s:.4}"))
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let cfg = args.overrides.resolve()?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Config("fit requires --input".into()))?;
    let target = read_input(&input, cfg.samples)?;
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cfg.out.display())))?;
    let outcome = run_fit(&cfg, &target, Some(&cfg.out))?;
    fs::write(cfg.out.join("metrics.csv"), &outcome.csv)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let recon_path = write_like_input(&outcome.reconstruction, &input, &cfg.out)?;
    println!(
        "fit complete: psnr {:.2} dB, params {}, {:.1} MACs/sample",
        outcome.final_psnr, outcome.params, outcome.per_sample_mac
    );
    println!(
        "wrote {}, {}, {}",
        cfg.out.join("model.ckpt").display(),
        cfg.out.join("metrics.csv").display(),
        recon_path.display()
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let target = read_input(&args.input, args.samples)?;
    // checkpoints are self-describing; try the multi-resolution kind first
    let recon_values = match AsmrModel::load(&args.checkpoint) {
        Ok(model) => model.forward_shared(None)?.data().to_vec(),
        Err(ModelError::VersionMismatch(_)) => {
            let model = SirenModel::load(&args.checkpoint)?;
            let coords = asmr::train::normalized_coords(&target.extents);
            model.forward(&coords)?.data().to_vec()
        }
        Err(e) => return Err(e.into()),
    };
    if recon_values.len() != target.values.len() {
        return Err(CliError::Config(format!(
            "checkpoint reconstructs {} values but the target has {}",
            recon_values.len(),
            target.values.len()
        )));
    }
    let recon = Grid::new(
        target.extents.clone(),
        target.channels,
        target.denormalize(&recon_values),
        target.lo,
        target.hi,
    );
    let mid = (target.lo + target.hi) / 2.0;
    println!("psnr,ssim,iou");
    println!(
        "{:.4},{},{:.4}",
        native_psnr(&recon, &target),
        ssim_cell(native_ssim(&recon, &target)),
        iou(&recon.values, &target.values, mid).expect("matching shapes")
    );
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(e.to_string()))?;
        write_like_input(&recon, &args.input, dir)?;
    }
    Ok(())
}

fn report_csv(report: &MacReport) -> String {
    let mut out = String::from("layer,points,macs\n");
    for e in &report.entries {
        let _ = writeln!(out, "{},{},{}", e.label, e.points, e.macs);
    }
    let _ = writeln!(out, "total,{},{}", report.total_points, report.total_macs);
    let _ = writeln!(out, "per_sample,,{:.2}", report.per_sample());
    let _ = writeln!(out, "params,,{}", report.params);
    out
}

fn cmd_profile(args: &ProfileArgs) -> Result<(), CliError> {
    let cfg = args.overrides.resolve()?;
    let report = match cfg.model {
        ModelKind::Siren => mac_siren(&cfg.widths, 1),
        ModelKind::Asmr => {
            let text = cfg
                .scheme
                .as_deref()
                .ok_or_else(|| CliError::Config("asmr profile requires --scheme".into()))?;
            let scheme = PartitionScheme::parse(text)?;
            mac_asmr(&cfg.widths, &scheme).map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    let csv = report_csv(&report);
    if let Some(out) = &args.overrides.out {
        fs::create_dir_all(out).map_err(|e| CliError::Data(e.to_string()))?;
        fs::write(out.join("profile.csv"), &csv).map_err(|e| CliError::Data(e.to_string()))?;
    }
    print!("{csv}");
    Ok(())
}

/// Distinct permutations of a multiset, lexicographically ordered.
fn distinct_permutations(bases: &[usize]) -> Vec<Vec<usize>> {
    fn recurse(remaining: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
        if remaining.is_empty() {
            out.insert(prefix.clone());
            return;
        }
        for i in 0..remaining.len() {
            let v = remaining.remove(i);
            prefix.push(v);
            recurse(remaining, prefix, out);
            prefix.pop();
            remaining.insert(i, v);
        }
    }
    let mut out = BTreeSet::new();
    recurse(&mut bases.to_vec(), &mut Vec::new(), &mut out);
    out.into_iter().collect()
}

fn cmd_permute(args: &PermuteArgs) -> Result<(), CliError> {
    let mut cfg = args.overrides.resolve()?;
    cfg.model = ModelKind::Asmr;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Config("permute requires --input".into()))?;
    let target = read_input(&input, cfg.samples)?;
    let text = cfg
        .scheme
        .clone()
        .ok_or_else(|| CliError::Config("permute requires --scheme (the base multiset)".into()))?;
    let base_scheme = PartitionScheme::parse(&text)?;
    if base_scheme.dim() != 1 {
        return Err(CliError::Config(
            "permute takes a single-axis scheme, e.g. --scheme 4x4x4x8".into(),
        ));
    }
    let mut csv = String::from("permutation,per_sample_mac,psnr,ssim\n");
    for perm in distinct_permutations(&base_scheme.bases_per_axis()[0]) {
        let scheme_text = perm
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join("x");
        cfg.scheme = Some(scheme_text.clone());
        let outcome = run_fit(&cfg, &target, None)?;
        let _ = writeln!(
            csv,
            "{},{:.2},{:.4},{}",
            scheme_text,
            outcome.per_sample_mac,
            outcome.final_psnr,
            ssim_cell(native_ssim(&outcome.reconstruction, &target))
        );
    }
    if let Some(out) = &args.overrides.out {
        fs::create_dir_all(out).map_err(|e| CliError::Data(e.to_string()))?;
        fs::write(out.join("permutations.csv"), &csv)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    print!("{csv}");
    Ok(())
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<(), CliError> {
    let scheme = PartitionScheme::parse(&args.scheme)?;
    let coordinate: Vec<usize> = args
        .coordinate
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("bad coordinate `{}`: {e}", args.coordinate)))?;
    if coordinate.len() != scheme.dim() {
        return Err(CliError::Config(format!(
            "coordinate has {} axes but the scheme has {}",
            coordinate.len(),
            scheme.dim()
        )));
    }
    let levels = scheme.decompose(&coordinate)?;
    if scheme.dim() == 1 {
        let digits: Vec<String> = levels.iter().map(|l| l[0].to_string()).collect();
        println!("{}", digits.join(","));
    } else {
        for (i, level) in levels.iter().enumerate() {
            let digits: Vec<String> = level.iter().map(|v| v.to_string()).collect();
            println!("level{}: {}", i, digits.join(","));
        }
    }
    let back = scheme.recompose(&levels)?;
    let back: Vec<String> = back.iter().map(|v| v.to_string()).collect();
    println!("recomposed: {}", back.join(","));
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let mut csv = String::from("model,params,per_sample_mac,psnr,ssim\n");
    let mut first_extents: Option<Vec<usize>> = None;
    for path in &args.config {
        let cfg = ExperimentConfig::load(path)?;
        let input = cfg
            .input
            .clone()
            .ok_or_else(|| CliError::Config(format!("{}: missing input", path.display())))?;
        let target = read_input(&input, cfg.samples)?;
        match &first_extents {
            None => first_extents = Some(target.extents.clone()),
            Some(e) if *e != target.extents => {
                return Err(CliError::Config(format!(
                    "configs target mixed extents: {:?} vs {:?}",
                    e, target.extents
                )))
            }
            Some(_) => {}
        }
        let outcome = run_fit(&cfg, &target, None)?;
        let label = match cfg.model {
            ModelKind::Siren => format!("siren[{}]", join_usize(&cfg.widths)),
            ModelKind::Asmr => format!("asmr[{}]", join_usize(&cfg.widths)),
        };
        let _ = writeln!(
            csv,
            "{},{},{:.2},{:.4},{}",
            label,
            outcome.params,
            outcome.per_sample_mac,
            outcome.final_psnr,
            ssim_cell(native_ssim(&outcome.reconstruction, &target))
        );
    }
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|e| CliError::Data(e.to_string()))?;
            }
        }
        fs::write(out, &csv).map_err(|e| CliError::Data(e.to_string()))?;
    }
    print!("{csv}");
    Ok(())
}

fn join_usize(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
