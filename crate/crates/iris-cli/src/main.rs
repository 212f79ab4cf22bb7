//! `iriscode` - command-line pipeline for iris-code encoding, matching,
//! kernel training, and evaluation.
//!
//! The full workflow is `synth -> pairs -> align -> encode -> match -> eval`,
//! plus `train` to learn a kernel bank and `kernels` for bank utilities.
//! Every subcommand is deterministic given its flags and seed; `--threads`
//! never changes any output byte.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use iris_core::coder::{encode_code, read_code, write_code};
use iris_core::dataset::{manifest_to_csv, parse_pairs_csv, Dataset, ManifestEntry, PairKind, PairRow};
use iris_core::error::Error as CoreError;
use iris_core::eval::{evaluate, export_report, ScoreSet};
use iris_core::kernel::{
    export_kernel_heatmaps, load_kernels, save_kernels, KernelBank, DEFAULT_SIZES,
};
use iris_core::matcher::{parse_scores_csv, score_pairs, scores_to_csv};
use iris_core::sampling::{load_sampling_map, SamplingMap};
use iris_core::trainer::mining::LoadedDataset;
use iris_core::trainer::{TrainConfig, TrainSession};
use iris_core::{align, pgm, synth};

#[derive(Parser)]
#[command(name = "iriscode", version, about = "Iris-code pipeline: encode, match, train, evaluate")]
struct Cli {
    /// Seed for the stochastic subcommands (synth, pairs, train)
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads (0 = one per core); outputs never depend on this
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Suppress the resolved-configuration log lines
    #[arg(short, long, global = true)]
    quiet: bool,

    /// Per-batch progress while training
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of per-class textures with masks
    Synth {
        /// Number of classes (alternating left/right eye sides)
        #[arg(long)]
        classes: usize,
        /// Images per class
        #[arg(long)]
        images_per_class: usize,
        /// Class id prefix; lets separately generated sets stay disjoint
        #[arg(long, default_value = "c")]
        class_prefix: String,
        /// Output directory (manifest.csv, images/, masks/)
        #[arg(long)]
        out: PathBuf,
    },
    /// Write genuine.csv and impostor.csv pair lists for a manifest
    Pairs {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rotation-align each class and write shifted copies + a new manifest
    Align {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode every manifest image into a binary code file
    Encode {
        #[arg(long)]
        manifest: PathBuf,
        /// Kernel bank file (see `kernels gabor-gen` for the format)
        #[arg(long)]
        kernels: PathBuf,
        /// Sampling map file; defaults to the built-in 8x32 grid
        #[arg(long)]
        sampling_map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score pair lists against a directory of encoded codes
    Match {
        /// Pairs CSV (repeatable; rows are concatenated)
        #[arg(long, required = true)]
        pairs: Vec<PathBuf>,
        #[arg(long)]
        codes: PathBuf,
        /// Search code-grid column shifts in [-n, +n] for the best match
        #[arg(long, default_value_t = 0)]
        max_shift: usize,
        #[arg(long)]
        sampling_map: Option<PathBuf>,
        /// Output scores CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a kernel bank with triplet loss and batch-hard mining
    Train(TrainArgs),
    /// Compute d', EER, ROC, and histograms from match scores
    Eval {
        /// Scores CSV with a kind column (from `match`)
        #[arg(long, conflicts_with_all = ["genuine", "impostor"])]
        scores: Option<PathBuf>,
        /// Scores CSV treated entirely as genuine comparisons
        #[arg(long, requires = "impostor")]
        genuine: Option<PathBuf>,
        /// Scores CSV treated entirely as impostor comparisons
        #[arg(long, requires = "genuine")]
        impostor: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kernel bank utilities
    Kernels {
        #[command(subcommand)]
        action: KernelCmd,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train_manifest: PathBuf,
    #[arg(long)]
    val_manifest: PathBuf,
    /// TOML config file; defaults apply for missing keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weight initialization: random, gabor, or file
    #[arg(long, default_value = "random")]
    init: String,
    /// Kernel file for --init file
    #[arg(long)]
    init_file: Option<PathBuf>,
    #[arg(long)]
    sampling_map: Option<PathBuf>,
    /// Continue from the checkpoint in the output directory
    #[arg(long)]
    resume: bool,
    /// Output directory (checkpoints, trained kernels, history)
    #[arg(long)]
    out: PathBuf,
    // config overrides
    #[arg(long)]
    total_batches: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    validation_triplets: Option<usize>,
    #[arg(long)]
    validation_every: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
}

#[derive(Subcommand)]
enum KernelCmd {
    /// Write per-kernel heatmap PGMs and raw-weight CSVs
    ExportHeatmaps {
        #[arg(long)]
        kernels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subtract each kernel's mean so responses binarize around zero
    ZeroMean {
        #[arg(long)]
        kernels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the default Gabor bank
    GaborGen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print kernel shapes and weight statistics
    Inspect {
        #[arg(long)]
        kernels: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .expect("thread pool not yet initialized");
    }
    if let Err(e) = run(&cli) {
        eprintln!("error: {:#}", e);
        let code = e
            .downcast_ref::<CoreError>()
            .map(CoreError::exit_code)
            .unwrap_or(2);
        std::process::exit(code);
    }
}

fn log_config(cli: &Cli, command: &str, fields: &[(&str, String)]) {
    if cli.quiet {
        return;
    }
    let rendered: Vec<String> = fields.iter().map(|(k, v)| format!("{}={}", k, v)).collect();
    eprintln!(
        "[iriscode] {} seed={} threads={} {}",
        command,
        cli.seed,
        cli.threads,
        rendered.join(" ")
    );
}

fn load_map(path: &Option<PathBuf>) -> anyhow::Result<SamplingMap> {
    Ok(match path {
        Some(p) => load_sampling_map(p)?,
        None => SamplingMap::default_grid(),
    })
}

/// Code file path for a manifest-relative image path.
fn code_rel_path(image_rel: &str) -> PathBuf {
    let mut p = PathBuf::from(image_rel);
    p.set_extension("irc");
    p
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Synth {
            classes,
            images_per_class,
            class_prefix,
            out,
        } => {
            log_config(
                cli,
                "synth",
                &[
                    ("classes", classes.to_string()),
                    ("images_per_class", images_per_class.to_string()),
                    ("class_prefix", class_prefix.clone()),
                    ("out", out.display().to_string()),
                ],
            );
            let manifest =
                synth::generate_with_prefix(out, *classes, *images_per_class, cli.seed, class_prefix)?;
            eprintln!("[iriscode] wrote {}", manifest.display());
            Ok(())
        }

        Command::Pairs { manifest, out } => {
            log_config(
                cli,
                "pairs",
                &[
                    ("manifest", manifest.display().to_string()),
                    ("out", out.display().to_string()),
                ],
            );
            let ds = Dataset::load(manifest)?;
            std::fs::create_dir_all(out)?;
            let genuine = ds.genuine_pairs();
            let impostor = ds.impostor_pairs(cli.seed);
            std::fs::write(out.join("genuine.csv"), genuine.to_csv(&ds))?;
            std::fs::write(out.join("impostor.csv"), impostor.to_csv(&ds))?;
            eprintln!(
                "[iriscode] {} genuine, {} impostor pairs",
                genuine.len(),
                impostor.len()
            );
            Ok(())
        }

        Command::Align { manifest, out } => {
            log_config(
                cli,
                "align",
                &[
                    ("manifest", manifest.display().to_string()),
                    ("out", out.display().to_string()),
                ],
            );
            cmd_align(manifest, out)
        }

        Command::Encode {
            manifest,
            kernels,
            sampling_map,
            out,
        } => {
            log_config(
                cli,
                "encode",
                &[
                    ("manifest", manifest.display().to_string()),
                    ("kernels", kernels.display().to_string()),
                    ("out", out.display().to_string()),
                ],
            );
            cmd_encode(manifest, kernels, sampling_map, out)
        }

        Command::Match {
            pairs,
            codes,
            max_shift,
            sampling_map,
            out,
        } => {
            log_config(
                cli,
                "match",
                &[
                    ("codes", codes.display().to_string()),
                    ("max_shift", max_shift.to_string()),
                    ("out", out.display().to_string()),
                ],
            );
            cmd_match(pairs, codes, *max_shift, sampling_map, out)
        }

        Command::Train(args) => cmd_train(cli, args),

        Command::Eval {
            scores,
            genuine,
            impostor,
            out,
        } => {
            log_config(cli, "eval", &[("out", out.display().to_string())]);
            cmd_eval(scores, genuine, impostor, out)
        }

        Command::Kernels { action } => cmd_kernels(action),
    }
}

fn cmd_align(manifest: &Path, out: &Path) -> anyhow::Result<()> {
    let ds = Dataset::load(manifest)?;
    std::fs::create_dir_all(out)?;

    let mut log = String::from("class,image,shift\n");
    use rayon::prelude::*;
    let per_class: Vec<anyhow::Result<Vec<(String, String, usize)>>> = ds
        .classes()
        .par_iter()
        .map(|group| {
            let mut images = Vec::with_capacity(group.len());
            let mut masks = Vec::with_capacity(group.len());
            for i in group.indices() {
                images.push(ds.load_image(i)?);
                masks.push(ds.load_mask(i)?);
            }
            let (result, shifted_images, shifted_masks) = align::align_class(&images, &masks);
            let mut rows = Vec::with_capacity(group.len());
            for (offset, i) in group.indices().enumerate() {
                let entry = &ds.entries()[i];
                pgm::write_iris(&out.join(&entry.image), &shifted_images[offset])?;
                pgm::write_mask(&out.join(&entry.mask), &shifted_masks[offset])?;
                rows.push((
                    entry.class_id.clone(),
                    entry.image.clone(),
                    result.shifts[offset],
                ));
            }
            Ok(rows)
        })
        .collect();
    for rows in per_class {
        for (class, image, shift) in rows? {
            log.push_str(&format!("{},{},{}\n", class, image, shift));
        }
    }
    std::fs::write(out.join("alignment.csv"), log)?;

    let entries: Vec<ManifestEntry> = ds.entries().to_vec();
    std::fs::write(out.join("manifest.csv"), manifest_to_csv(&entries))?;
    Ok(())
}

fn cmd_encode(
    manifest: &Path,
    kernels: &Path,
    sampling_map: &Option<PathBuf>,
    out: &Path,
) -> anyhow::Result<()> {
    let ds = Dataset::load(manifest)?;
    let bank = load_kernels(kernels)?;
    let map = load_map(sampling_map)?;
    std::fs::create_dir_all(out)?;

    use rayon::prelude::*;
    (0..ds.entries().len())
        .into_par_iter()
        .try_for_each(|i| -> anyhow::Result<()> {
            let iris = ds.load_image(i)?;
            let mask = ds.load_mask(i)?;
            let code = encode_code(&iris, &mask, &bank, &map)?;
            write_code(&out.join(code_rel_path(&ds.entries()[i].image)), &code)?;
            Ok(())
        })?;
    eprintln!("[iriscode] encoded {} images", ds.entries().len());
    Ok(())
}

fn cmd_match(
    pairs_files: &[PathBuf],
    codes_dir: &Path,
    max_shift: usize,
    sampling_map: &Option<PathBuf>,
    out: &Path,
) -> anyhow::Result<()> {
    let map = load_map(sampling_map)?;
    let mut rows: Vec<PairRow> = Vec::new();
    for f in pairs_files {
        let text = std::fs::read_to_string(f)?;
        rows.extend(parse_pairs_csv(&text)?);
    }

    // load each referenced code once
    let mut codes = HashMap::new();
    for row in &rows {
        for path in [&row.path_a, &row.path_b] {
            if !codes.contains_key(path.as_str()) {
                let code = read_code(&codes_dir.join(code_rel_path(path)))
                    .map_err(|_| CoreError::MissingCode(path.clone()))?;
                codes.insert(path.clone(), code);
            }
        }
    }

    let (scored, excluded) = score_pairs(&rows, &codes, max_shift, &map)?;
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, scores_to_csv(&scored))?;
    eprintln!(
        "[iriscode] scored {} pairs, excluded {} (no jointly valid bits)",
        scored.len(),
        excluded
    );
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    // explicit flags override the file
    if let Some(v) = args.total_batches {
        config.total_batches = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.pool_size {
        config.pool_size = Some(v);
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.validation_triplets {
        config.validation_triplets = v;
    }
    if let Some(v) = args.validation_every {
        config.validation_every = v;
    }
    if let Some(v) = args.checkpoint_every {
        config.checkpoint_every = v;
    }
    if cli.seed != 42 {
        config.seed = cli.seed;
    }
    config.validate()?;

    if !cli.quiet {
        eprintln!(
            "[iriscode] train resolved config:\n{}",
            config.to_toml().trim_end()
        );
    }

    let map = load_map(&args.sampling_map)?;
    let train_ds = Dataset::load(&args.train_manifest)?;
    let val_ds = Dataset::load(&args.val_manifest)?;
    let train_data = LoadedDataset::load(&train_ds)?;
    let val_data = LoadedDataset::load(&val_ds)?;

    std::fs::create_dir_all(&args.out)?;
    let session = TrainSession {
        config: &config,
        train_data: &train_data,
        val_data: &val_data,
        map: &map,
        checkpoint_dir: Some(args.out.clone()),
    };

    let verbose = cli.verbose;
    let progress = |r: &iris_core::trainer::BatchRecord| {
        if verbose {
            match r.val_loss {
                Some(v) => eprintln!(
                    "batch {:>6}  train {:.6}  val {:.6}  ({:.0} ms)",
                    r.batch, r.train_loss, v, r.wall_ms
                ),
                None => eprintln!(
                    "batch {:>6}  train {:.6}  ({:.0} ms)",
                    r.batch, r.train_loss, r.wall_ms
                ),
            }
        }
    };

    let result = if args.resume {
        session.resume(progress)?
    } else {
        let init = match args.init.as_str() {
            "random" => KernelBank::random_init(config.seed, &DEFAULT_SIZES)?,
            "gabor" => KernelBank::gabor_default(),
            "file" => {
                let path = args.init_file.as_ref().ok_or_else(|| {
                    CoreError::InvalidArgument("--init file requires --init-file".into())
                })?;
                load_kernels(path)?
            }
            other => {
                return Err(CoreError::InvalidArgument(format!(
                    "unknown init '{}' (expected random, gabor, or file)",
                    other
                ))
                .into())
            }
        };
        save_kernels(&init, &args.out.join("initial_kernels.txt"))?;
        session.run(init, progress)?
    };

    save_kernels(&result.trained, &args.out.join("trained_kernels.txt"))?;
    std::fs::write(args.out.join("history.csv"), result.history.to_csv())?;
    let last_val = result.history.records.iter().rev().find_map(|r| r.val_loss);
    let summary = format!(
        "batches: {}\ninitial_val_loss: {}\nfinal_val_loss: {}\n",
        config.total_batches,
        result.initial_val_loss,
        last_val.map_or("n/a".to_string(), |v| v.to_string())
    );
    std::fs::write(args.out.join("train_summary.txt"), summary)?;
    if !cli.quiet {
        eprintln!(
            "[iriscode] initial val loss {:.6}, final val loss {}",
            result.initial_val_loss,
            last_val.map_or("n/a".to_string(), |v| format!("{:.6}", v))
        );
    }
    Ok(())
}

fn cmd_eval(
    scores: &Option<PathBuf>,
    genuine: &Option<PathBuf>,
    impostor: &Option<PathBuf>,
    out: &Path,
) -> anyhow::Result<()> {
    let mut set = ScoreSet::default();
    match (scores, genuine, impostor) {
        (Some(path), None, None) => {
            let rows = parse_scores_csv(&std::fs::read_to_string(path)?)?;
            for (kind, d) in rows {
                match kind {
                    PairKind::Genuine => set.genuine.push(d),
                    PairKind::Impostor => set.impostor.push(d),
                }
            }
        }
        (None, Some(g), Some(i)) => {
            for (path, bucket) in [(g, 0), (i, 1)] {
                let rows = parse_scores_csv(&std::fs::read_to_string(path)?)?;
                for (_, d) in rows {
                    if bucket == 0 {
                        set.genuine.push(d);
                    } else {
                        set.impostor.push(d);
                    }
                }
            }
        }
        _ => {
            return Err(CoreError::InvalidArgument(
                "eval needs --scores or both --genuine and --impostor".into(),
            )
            .into())
        }
    }
    let report = evaluate(&set)?;
    export_report(&report, out)?;
    eprintln!(
        "[iriscode] d'={:.4} eer={:.4} ({} genuine, {} impostor)",
        report.d_prime, report.eer, report.genuine_count, report.impostor_count
    );
    Ok(())
}

fn cmd_kernels(action: &KernelCmd) -> anyhow::Result<()> {
    match action {
        KernelCmd::ExportHeatmaps { kernels, out } => {
            let bank = load_kernels(kernels)?;
            let files = export_kernel_heatmaps(&bank, out)?;
            eprintln!("[iriscode] wrote {} files to {}", files.len(), out.display());
        }
        KernelCmd::ZeroMean { kernels, out } => {
            let bank = load_kernels(kernels)?.zero_mean();
            save_kernels(&bank, out)?;
        }
        KernelCmd::GaborGen { out } => {
            save_kernels(&KernelBank::gabor_default(), out)?;
        }
        KernelCmd::Inspect { kernels } => {
            let bank = load_kernels(kernels)?;
            for (i, k) in bank.kernels().iter().enumerate() {
                let lo = k.weights().iter().copied().fold(f64::INFINITY, f64::min);
                let hi = k.weights().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                println!(
                    "kernel {}: {}x{}  sum {:+.3e}  min {:+.3e}  max {:+.3e}",
                    i,
                    k.rows(),
                    k.cols(),
                    k.sum(),
                    lo,
                    hi
                );
            }
        }
    }
    Ok(())
}
