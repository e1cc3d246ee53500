//! Flat `key = value` experiment configuration. Every key is optional; the
//! defaults are the published training setup.

use std::path::{Path, PathBuf};

use codemix::augment::LmConfig;
use codemix::pipeline::MethodConfigs;
use codemix::taggers::{SeqConfig, SiameseConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub language_pair: String,
    /// Prepared splits live in `data_dir/lang0` and `data_dir/lang1`.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Instance file for `eval --level instance` when `--data` is not given.
    pub instances: Option<PathBuf>,

    pub split_seed: u64,
    /// Initialisation, shuffling, dropout and support-set selection.
    pub train_seed: u64,
    /// LM initialisation and word generation.
    pub augment_seed: u64,

    pub baseline_epochs: usize,
    pub baseline_batch: usize,
    pub baseline_lr: f64,
    pub conv1d_epochs: usize,
    pub conv1d_batch: usize,
    pub conv1d_lr: f64,
    pub lm_hidden: usize,
    pub lm_epochs: usize,
    pub lm_batch: usize,
    pub lm_lr: f64,
    pub siamese_epochs: usize,
    pub siamese_batch: usize,
    pub siamese_lr: f64,
    pub siamese_margin: f64,
    pub siamese_lambda: f64,
    pub siamese_l2: f64,
    pub siamese_support: usize,
    pub siamese_score_beta: f64,
    pub pair_subsample: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let (seq, lm, sia) = (SeqConfig::default(), LmConfig::default(), SiameseConfig::default());
        ExperimentConfig {
            language_pair: "bn-en".into(),
            data_dir: "data".into(),
            out_dir: "runs".into(),
            instances: None,
            split_seed: 13,
            train_seed: 1,
            augment_seed: 7,
            baseline_epochs: seq.epochs,
            baseline_batch: seq.batch,
            baseline_lr: seq.lr,
            conv1d_epochs: seq.epochs,
            conv1d_batch: seq.batch,
            conv1d_lr: seq.lr,
            lm_hidden: lm.hidden,
            lm_epochs: lm.epochs,
            lm_batch: lm.batch,
            lm_lr: lm.lr,
            siamese_epochs: sia.epochs,
            siamese_batch: sia.batch,
            siamese_lr: sia.lr,
            siamese_margin: sia.margin,
            siamese_lambda: sia.lambda,
            siamese_l2: sia.l2,
            siamese_support: sia.support_size,
            siamese_score_beta: sia.score_beta,
            pair_subsample: sia.pair_subsample,
        }
    }
}

fn check(ok: bool, key: &str, range: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("config key `{key}` must be {range}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                Self::parse(&text)?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (k, v) in [
            ("baseline_epochs", self.baseline_epochs),
            ("baseline_batch", self.baseline_batch),
            ("conv1d_epochs", self.conv1d_epochs),
            ("conv1d_batch", self.conv1d_batch),
            ("lm_hidden", self.lm_hidden),
            ("lm_epochs", self.lm_epochs),
            ("lm_batch", self.lm_batch),
            ("siamese_epochs", self.siamese_epochs),
            ("siamese_batch", self.siamese_batch),
            ("siamese_support", self.siamese_support),
        ] {
            check(v >= 1, k, "at least 1")?;
        }
        for (k, v) in [
            ("baseline_lr", self.baseline_lr),
            ("conv1d_lr", self.conv1d_lr),
            ("lm_lr", self.lm_lr),
            ("siamese_lr", self.siamese_lr),
        ] {
            check(v > 0.0 && v <= 1.0, k, "in (0, 1]")?;
        }
        check(self.siamese_margin > 0.0, "siamese_margin", "positive")?;
        check(self.siamese_lambda > 0.0, "siamese_lambda", "positive")?;
        check(self.siamese_l2 >= 0.0, "siamese_l2", "non-negative")?;
        check(self.siamese_score_beta > 0.0, "siamese_score_beta", "positive")?;
        check(self.pair_subsample > 0.0 && self.pair_subsample <= 1.0, "pair_subsample", "in (0, 1]")?;
        Ok(())
    }

    pub fn methods(&self) -> MethodConfigs {
        MethodConfigs {
            baseline: SeqConfig { epochs: self.baseline_epochs, batch: self.baseline_batch, lr: self.baseline_lr },
            conv1d: SeqConfig { epochs: self.conv1d_epochs, batch: self.conv1d_batch, lr: self.conv1d_lr },
            lm: LmConfig { hidden: self.lm_hidden, epochs: self.lm_epochs, batch: self.lm_batch, lr: self.lm_lr },
            siamese: SiameseConfig {
                epochs: self.siamese_epochs,
                batch: self.siamese_batch,
                lr: self.siamese_lr,
                margin: self.siamese_margin,
                lambda: self.siamese_lambda,
                l2: self.siamese_l2,
                pair_subsample: self.pair_subsample,
                support_size: self.siamese_support,
                score_beta: self.siamese_score_beta,
            },
        }
    }
}
