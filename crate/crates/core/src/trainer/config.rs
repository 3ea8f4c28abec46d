use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::TagScheme;
use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::model::OutputMode;

/// Every hyperparameter and switch of a run. Read from a flat TOML file in
/// which every key is optional and unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Weight of the language-modeling losses.
    pub gamma: f64,
    /// Word-level LSTM size per direction.
    pub hidden: usize,
    pub word_dim: usize,
    pub char_dim: usize,
    pub char_hidden: usize,
    /// Width of the tanh layer joining the two directions.
    pub combined: usize,
    pub lm_proj: usize,
    pub lm_k: usize,
    pub batch_size: usize,
    pub dropout_p: f64,
    pub use_dropout: bool,
    pub use_char: bool,
    pub patience: usize,
    pub max_epochs: usize,
    pub seeds: Vec<u64>,
    pub output_mode: OutputMode,
    pub rho: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub dev_metric: Metric,
    /// Positive class for token-level F0.5.
    pub positive_label: String,
    pub tag_scheme: TagScheme,
    pub token_column: usize,
    /// Defaults to the last column.
    pub label_column: Option<usize>,
    pub embeddings_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            hidden: 200,
            word_dim: 300,
            char_dim: 50,
            char_hidden: 200,
            combined: 50,
            lm_proj: 50,
            lm_k: 7500,
            batch_size: 64,
            dropout_p: 0.5,
            use_dropout: true,
            use_char: true,
            patience: 7,
            max_epochs: 200,
            seeds: (1..=10).collect(),
            output_mode: OutputMode::Softmax,
            rho: 0.95,
            epsilon: 1e-6,
            learning_rate: 1.0,
            dev_metric: Metric::F05,
            positive_label: "i".into(),
            tag_scheme: TagScheme::Bio,
            token_column: 0,
            label_column: None,
            embeddings_path: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p must be in [0, 1), got {}", self.dropout_p));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        let sizes = [
            ("hidden", self.hidden),
            ("word_dim", self.word_dim),
            ("char_dim", self.char_dim),
            ("char_hidden", self.char_hidden),
            ("combined", self.combined),
            ("lm_proj", self.lm_proj),
            ("lm_k", self.lm_k),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("max_epochs", self.max_epochs),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be at least 1"));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must be in (0, 1), got {}", self.rho));
        }
        if !(self.epsilon > 0.0) || !(self.learning_rate > 0.0) {
            return bad("epsilon and learning_rate must be positive".into());
        }
        Ok(())
    }

    /// Dropout probability actually applied, zero when dropout is off.
    pub fn effective_dropout(&self) -> f64 {
        if self.use_dropout {
            self.dropout_p
        } else {
            0.0
        }
    }
}
