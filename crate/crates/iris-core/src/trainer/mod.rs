//! Kernel-bank training: mining, forward/backward, optimizer loop,
//! persistent validation, and checkpointing.

pub mod forward;
pub mod loss;
pub mod mining;
pub mod optim;
pub mod points;
pub mod validation;

use std::fmt::Write as FmtWrite;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{load_kernels, save_kernels, KernelBank};
use crate::sampling::SamplingMap;

use forward::{triplet_backward, triplet_forward, GradientSet, TripletData};
use loss::LossKind;
use mining::{batch_hard_mine, LoadedDataset};
use optim::Optimizer;
use points::TrainPoints;
use validation::{
    build_validation_set, load_validation_set, resolve_triplets, save_validation_set,
    validation_loss, ResolvedTriplet, ValTriplet,
};

/// Training hyperparameters; a TOML file with any subset of these keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Candidate classes mined per anchor/positive pair; defaults to
    /// batch_size when absent.
    pub pool_size: Option<usize>,
    pub total_batches: u64,
    pub validation_triplets: usize,
    pub validation_every: u64,
    pub checkpoint_every: u64,
    pub seed: u64,
    /// "soft-margin" or "hinge".
    pub loss: String,
    pub hinge_alpha: f64,
    /// "adam" or "sgd".
    pub optimizer: String,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub sgd_momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            pool_size: None,
            total_batches: 20_000,
            validation_triplets: 2048,
            validation_every: 250,
            checkpoint_every: 1000,
            seed: 42,
            loss: "soft-margin".into(),
            hinge_alpha: 0.2,
            optimizer: "adam".into(),
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            sgd_momentum: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let cfg: TrainConfig =
            toml::from_str(&text).map_err(|e| Error::ConfigFormat(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::ConfigFormat("batch_size must be >= 2".into()));
        }
        if self.pool_size == Some(0) {
            return Err(Error::ConfigFormat("pool_size must be >= 1".into()));
        }
        if self.validation_every == 0 || self.checkpoint_every == 0 {
            return Err(Error::ConfigFormat(
                "validation_every and checkpoint_every must be >= 1".into(),
            ));
        }
        self.loss_kind()?;
        match self.optimizer.as_str() {
            "adam" | "sgd" => Ok(()),
            other => Err(Error::ConfigFormat(format!("unknown optimizer '{}'", other))),
        }
    }

    pub fn pool(&self) -> usize {
        self.pool_size.unwrap_or(self.batch_size)
    }

    pub fn loss_kind(&self) -> Result<LossKind> {
        match self.loss.as_str() {
            "soft-margin" => Ok(LossKind::SoftMargin),
            "hinge" => {
                if self.hinge_alpha < 0.0 {
                    return Err(Error::ConfigFormat("hinge_alpha must be >= 0".into()));
                }
                Ok(LossKind::Hinge {
                    alpha: self.hinge_alpha,
                })
            }
            other => Err(Error::ConfigFormat(format!("unknown loss '{}'", other))),
        }
    }

    fn new_optimizer(&self, bank: &KernelBank) -> Optimizer {
        match self.optimizer.as_str() {
            "sgd" => Optimizer::sgd(self.learning_rate, self.sgd_momentum, bank.kernels()),
            _ => Optimizer::adam(
                self.learning_rate,
                self.adam_beta1,
                self.adam_beta2,
                self.adam_epsilon,
                bank.kernels(),
            ),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// One history row. The exported CSV carries batch, train loss, and the
/// periodic validation loss; wall-clock stays in memory for logging only.
#[derive(Debug, Clone)]
pub struct BatchRecord {
    pub batch: u64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub skipped_triplets: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub records: Vec<BatchRecord>,
}

impl TrainHistory {
    pub fn validation_entries(&self) -> usize {
        self.records.iter().filter(|r| r.val_loss.is_some()).count()
    }

    /// CSV export `batch,train_loss,val_loss` (val column empty off-cadence).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch,train_loss,val_loss\n");
        for r in &self.records {
            match r.val_loss {
                Some(v) => writeln!(out, "{},{},{}", r.batch, r.train_loss, v).unwrap(),
                None => writeln!(out, "{},{},", r.batch, r.train_loss).unwrap(),
            }
        }
        out
    }
}

pub struct TrainResult {
    /// Zero-meaned export bank.
    pub trained: KernelBank,
    /// Raw bank as left by the final optimizer step (what checkpoints hold).
    pub raw: KernelBank,
    pub history: TrainHistory,
    /// Mean validation loss of the starting bank, before any update.
    pub initial_val_loss: f64,
}

/// Checkpoint file names within a checkpoint directory.
pub const CKPT_KERNELS: &str = "checkpoint_kernels.txt";
pub const CKPT_OPTIMIZER: &str = "checkpoint_optimizer.txt";
pub const CKPT_STATE: &str = "checkpoint_state.txt";
pub const VAL_TRIPLETS: &str = "validation_triplets.csv";

/// Everything a training run needs besides the starting bank.
pub struct TrainSession<'a> {
    pub config: &'a TrainConfig,
    pub train_data: &'a LoadedDataset,
    pub val_data: &'a LoadedDataset,
    pub map: &'a SamplingMap,
    /// Directory for checkpoints and the persistent validation set; None
    /// keeps everything in memory (library-test use).
    pub checkpoint_dir: Option<PathBuf>,
}

impl<'a> TrainSession<'a> {
    fn check_split_disjoint(&self) -> Result<()> {
        let train_ids: std::collections::BTreeSet<&str> = self
            .train_data
            .classes
            .iter()
            .map(|c| c.class_id.as_str())
            .collect();
        for class in &self.val_data.classes {
            if train_ids.contains(class.class_id.as_str()) {
                return Err(Error::SplitOverlap {
                    class_id: class.class_id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Build the persistent validation set, or reload it from the checkpoint
    /// directory when it already exists there.
    fn validation_triplets(&self, points: &TrainPoints) -> Result<Vec<ValTriplet>> {
        if let Some(dir) = &self.checkpoint_dir {
            let path = dir.join(VAL_TRIPLETS);
            if path.exists() {
                return load_validation_set(&path);
            }
            let set = build_validation_set(
                self.val_data,
                points,
                self.config.validation_triplets,
                self.config.seed,
            )?;
            save_validation_set(&set, &path)?;
            return Ok(set);
        }
        build_validation_set(
            self.val_data,
            points,
            self.config.validation_triplets,
            self.config.seed,
        )
    }

    /// Train from an initial bank (batch counter starts at zero).
    pub fn run(
        &self,
        init: KernelBank,
        progress: impl FnMut(&BatchRecord),
    ) -> Result<TrainResult> {
        let opt = self.config.new_optimizer(&init);
        self.run_from(init, opt, 0, progress)
    }

    /// Resume from the checkpoint in `checkpoint_dir`.
    pub fn resume(&self, progress: impl FnMut(&BatchRecord)) -> Result<TrainResult> {
        let dir = self
            .checkpoint_dir
            .as_ref()
            .ok_or_else(|| Error::ConfigFormat("resume requires a checkpoint dir".into()))?;
        let bank = load_kernels(&dir.join(CKPT_KERNELS))?;
        let opt = Optimizer::load(&dir.join(CKPT_OPTIMIZER))?;
        let state = std::fs::read_to_string(dir.join(CKPT_STATE))
            .map_err(|e| Error::io(dir.join(CKPT_STATE), e))?;
        let batch: u64 = state
            .lines()
            .find_map(|l| l.strip_prefix("batch "))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::ConfigFormat("checkpoint state missing batch".into()))?;
        self.run_from(bank, opt, batch, progress)
    }

    fn write_checkpoint(&self, bank: &KernelBank, opt: &Optimizer, batch: u64) -> Result<()> {
        if let Some(dir) = &self.checkpoint_dir {
            save_kernels(bank, &dir.join(CKPT_KERNELS))?;
            opt.save(&dir.join(CKPT_OPTIMIZER), bank.kernels())?;
            let state = format!("batch {}\nseed {}\n", batch, self.config.seed);
            std::fs::write(dir.join(CKPT_STATE), state)
                .map_err(|e| Error::io(dir.join(CKPT_STATE), e))?;
        }
        Ok(())
    }

    fn run_from(
        &self,
        mut bank: KernelBank,
        mut opt: Optimizer,
        start_batch: u64,
        mut progress: impl FnMut(&BatchRecord),
    ) -> Result<TrainResult> {
        let cfg = self.config;
        cfg.validate()?;
        self.check_split_disjoint()?;
        let loss_kind = cfg.loss_kind()?;
        let points = TrainPoints::from_map(self.map);

        let val_set = self.validation_triplets(&points)?;
        let val_resolved: Vec<ResolvedTriplet> = resolve_triplets(self.val_data, &val_set)?;
        let eval_validation = |kernels: &KernelBank| -> Result<f64> {
            validation_loss(
                kernels.kernels(),
                &points,
                self.val_data,
                &val_resolved,
                loss_kind,
            )
        };

        let initial_val_loss = eval_validation(&bank)?;
        let mut history = TrainHistory::default();

        for batch in start_batch + 1..=cfg.total_batches {
            let started = Instant::now();
            let triplets = batch_hard_mine(
                bank.kernels(),
                self.train_data,
                cfg.batch_size,
                cfg.pool(),
                &points,
                cfg.seed,
                batch,
            )?;

            // forward/backward per triplet in parallel; reduce in index order
            let outcomes: Vec<Result<Option<(f64, GradientSet)>>> = triplets
                .par_iter()
                .map(|t| {
                    let data = TripletData {
                        anchor: self.train_data.image(t.anchor.0, t.anchor.1).iris.grid(),
                        positive: self
                            .train_data
                            .image(t.positive.0, t.positive.1)
                            .iris
                            .grid(),
                        negative: self
                            .train_data
                            .image(t.negative.0, t.negative.1)
                            .iris
                            .grid(),
                        ap_mask: &t.ap_mask,
                        an_mask: &t.an_mask,
                    };
                    match triplet_forward(bank.kernels(), &points, &data, loss_kind) {
                        Ok(fwd) => {
                            let grads =
                                triplet_backward(bank.kernels(), &points, &data, &fwd, loss_kind);
                            Ok(Some((fwd.loss, grads)))
                        }
                        Err(Error::DegenerateTriplet) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect();

            let mut total = GradientSet::zeros_like(bank.kernels());
            let mut loss_sum = 0.0;
            let mut contributing = 0usize;
            let mut skipped = 0usize;
            for o in outcomes {
                match o? {
                    Some((l, g)) => {
                        total.add_assign(&g);
                        loss_sum += l;
                        contributing += 1;
                    }
                    None => skipped += 1,
                }
            }

            let train_loss = if contributing > 0 {
                total.scale(1.0 / contributing as f64);
                opt.step(bank.kernels_mut(), &total)?;
                loss_sum / contributing as f64
            } else {
                f64::NAN // every triplet degenerate; weights untouched
            };

            let val_loss = if batch % cfg.validation_every == 0 || batch == cfg.total_batches {
                Some(eval_validation(&bank)?)
            } else {
                None
            };

            if batch % cfg.checkpoint_every == 0 || batch == cfg.total_batches {
                self.write_checkpoint(&bank, &opt, batch)?;
            }

            let record = BatchRecord {
                batch,
                train_loss,
                val_loss,
                skipped_triplets: skipped,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            };
            progress(&record);
            history.records.push(record);
        }

        Ok(TrainResult {
            trained: bank.zero_mean(),
            raw: bank,
            history,
            initial_val_loss,
        })
    }
}
