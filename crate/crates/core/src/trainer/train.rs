use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AdaDelta, Mode, RunConfig};
use crate::autodiff::{Gradients, Graph};
use crate::data::{build_vocabularies, load_pretrained_embeddings_file, make_batches, Corpus};
use crate::error::{Error, Result};
use crate::eval::{evaluate, mean_score, MeanScore, Metric, Score};
use crate::model::{sentence_loss, CharCache, Model, ModelParams, ModelSizes};

/// One training epoch as written to the history file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub seed: u64,
    pub epoch: usize,
    /// Summed training objective over the epoch.
    pub train_loss: f64,
    pub dev_metric: f64,
    /// Not serialized, so history files are reproducible byte for byte.
    #[serde(skip)]
    pub wall_secs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub seed: u64,
    pub records: Vec<EpochRecord>,
    /// 1-based epoch with the highest dev metric (earliest on ties).
    pub best_epoch: usize,
    pub best_dev: f64,
    pub stop_reason: StopReason,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    seed: u64,
    best_epoch: usize,
    best_dev: f64,
    stop_reason: StopReason,
    epochs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<&'a str>,
}

impl TrainHistory {
    /// One JSON object per epoch followed by a summary object.
    pub fn to_jsonl(&self) -> String {
        self.to_jsonl_tagged(None)
    }

    pub(crate) fn to_jsonl_tagged(&self, system: Option<&str>) -> String {
        let mut out = String::new();
        for r in &self.records {
            let mut v = serde_json::to_value(r).expect("record serializes");
            if let Some(s) = system {
                v["system"] = s.into();
            }
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let summary = SummaryLine {
            seed: self.seed,
            best_epoch: self.best_epoch,
            best_dev: self.best_dev,
            stop_reason: self.stop_reason,
            epochs: self.records.len(),
            system,
        };
        out.push_str(&serde_json::to_string(&summary).expect("summary serializes"));
        out.push('\n');
        out
    }
}

/// Label ids predicted for every sentence of an encoded corpus.
pub fn predict_corpus(model: &Model, corpus: &Corpus) -> Result<Vec<Vec<usize>>> {
    corpus.sentences.iter().map(|s| model.predict(s)).collect()
}

/// Scores `model` on an encoded corpus.
pub fn evaluate_model(model: &Model, corpus: &Corpus, metric: Metric) -> Result<Score> {
    let labels = &model.vocab.labels;
    let pred: Vec<Vec<&str>> = predict_corpus(model, corpus)?
        .iter()
        .map(|p| p.iter().map(|&i| labels.label(i)).collect())
        .collect();
    let gold: Vec<Vec<&str>> = corpus
        .sentences
        .iter()
        .map(|s| s.labels.iter().map(|&i| labels.label(i)).collect())
        .collect();
    evaluate(metric, &pred, &gold, &model.positive_label)
}

/// A model being trained together with its optimizer and random stream.
pub struct Trainer {
    pub config: RunConfig,
    pub model: Model,
    /// Training corpus encoded against the model vocabularies.
    pub train: Corpus,
    optimizer: AdaDelta,
    rng: ChaCha8Rng,
    epochs_done: usize,
}

impl Trainer {
    /// Builds vocabularies from `train` and initializes parameters from
    /// `seed`. All later randomness (shuffling, dropout masks) is drawn from
    /// the same seeded stream.
    pub fn new(config: &RunConfig, train: &Corpus, seed: u64) -> Result<Self> {
        config.validate()?;
        let vocab = build_vocabularies(train, config.lm_k)?;
        let mut encoded = train.clone();
        vocab.encode_corpus(&mut encoded)?;
        let sizes = ModelSizes {
            word_dim: config.word_dim,
            char_dim: config.char_dim,
            char_hidden: config.char_hidden,
            hidden: config.hidden,
            combined: config.combined,
            lm_proj: config.lm_proj,
            n_words: vocab.words.len(),
            n_chars: vocab.chars.len(),
            n_labels: vocab.labels.len(),
            n_lm: vocab.lm.len(),
            use_char: config.use_char,
            output_mode: config.output_mode,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::init(sizes, &mut rng)?;
        if let Some(path) = &config.embeddings_path {
            let (matrix, _) = load_pretrained_embeddings_file(path, &vocab.words, config.word_dim, &mut rng)?;
            params.set_word_embeddings(matrix)?;
        }
        let optimizer = AdaDelta::new(&params.store, config.rho, config.epsilon, config.learning_rate);
        Ok(Self {
            config: config.clone(),
            model: Model {
                params,
                vocab,
                dropout_p: config.effective_dropout(),
                metric: config.dev_metric,
                positive_label: config.positive_label.clone(),
            },
            train: encoded,
            optimizer,
            rng,
            epochs_done: 0,
        })
    }

    /// Encodes another split against the training vocabularies.
    pub fn encode(&self, corpus: &Corpus) -> Result<Corpus> {
        let mut c = corpus.clone();
        self.model.vocab.encode_corpus(&mut c)?;
        Ok(c)
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn optimizer(&self) -> &AdaDelta {
        &self.optimizer
    }

    /// One pass over the shuffled training data with one AdaDelta step per
    /// batch on the summed batch objective. Returns the epoch's summed loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let shuffle_seed = self.rng.random();
        let mut mask_rng = ChaCha8Rng::seed_from_u64(self.rng.random());
        let batches = make_batches(self.train.sentences.len(), self.config.batch_size, Some(shuffle_seed));
        let params = &mut self.model.params;
        let mut grads = Gradients::zeros_like(&params.store);
        let mut epoch_loss = 0.0;
        for batch in batches {
            grads.zero();
            {
                let mut g = Graph::new(&params.store);
                let mut cache = CharCache::default();
                let mut totals = Vec::with_capacity(batch.len());
                for &i in &batch {
                    let loss = sentence_loss(
                        &mut g,
                        params,
                        &self.train.sentences[i],
                        self.config.gamma,
                        Mode::Train,
                        self.model.dropout_p,
                        &mut mask_rng,
                        &mut cache,
                    )?;
                    totals.push(loss.total);
                }
                let batch_loss = g.add_n(&totals)?;
                epoch_loss += g.scalar(batch_loss);
                g.backward(batch_loss, &mut grads)?;
            }
            self.optimizer.step(&mut params.store, &grads)?;
            if !params.store.all_finite() {
                return Err(Error::Numeric("parameters after optimizer step".into()));
            }
        }
        self.epochs_done += 1;
        Ok(epoch_loss)
    }
}

pub struct TrainOutcome {
    /// Snapshot from the best dev epoch.
    pub model: Model,
    pub history: TrainHistory,
}

/// Trains until the dev metric has not strictly improved for `patience`
/// epochs (or `max_epochs` is reached) and returns the best snapshot.
pub fn train(config: &RunConfig, train: &Corpus, dev: &Corpus, seed: u64) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config, train, seed)?;
    let dev = trainer.encode(dev)?;
    let mut best: Option<(f64, usize, Model)> = None;
    let mut records = Vec::new();
    let mut since_best = 0;
    let stop_reason = loop {
        let start = Instant::now();
        let train_loss = trainer.run_epoch()?;
        let epoch = trainer.epochs_done();
        let dev_metric = evaluate_model(&trainer.model, &dev, config.dev_metric)?.primary();
        records.push(EpochRecord {
            seed,
            epoch,
            train_loss,
            dev_metric,
            wall_secs: start.elapsed().as_secs_f64(),
        });
        match &best {
            Some((b, _, _)) if dev_metric <= *b => since_best += 1,
            _ => {
                best = Some((dev_metric, epoch, trainer.model.clone()));
                since_best = 0;
            }
        }
        if since_best >= config.patience {
            break StopReason::Patience;
        }
        if epoch >= config.max_epochs {
            break StopReason::MaxEpochs;
        }
    };
    let (best_dev, best_epoch, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        history: TrainHistory {
            seed,
            records,
            best_epoch,
            best_dev,
            stop_reason,
        },
    })
}

/// Result of one seed in [`run_seeds`].
pub struct SeedRun {
    pub seed: u64,
    pub dev: Score,
    pub test: Option<Score>,
    pub outcome: TrainOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedReport {
    pub seeds: Vec<u64>,
    pub dev: Vec<Score>,
    pub test: Vec<Score>,
    /// P, R and F (or accuracy) averaged independently over seeds.
    pub mean_dev: MeanScore,
    pub mean_test: Option<MeanScore>,
}

impl SeedReport {
    /// One line per seed followed by one line with the means.
    pub fn to_jsonl(&self, system: Option<&str>) -> String {
        let mut out = String::new();
        for (i, seed) in self.seeds.iter().enumerate() {
            let mut v = serde_json::json!({ "seed": seed, "dev": self.dev[i] });
            if let Some(t) = self.test.get(i) {
                v["test"] = serde_json::to_value(t).expect("score serializes");
            }
            if let Some(s) = system {
                v["system"] = s.into();
            }
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let mut v = serde_json::json!({ "mean_dev": self.mean_dev, "runs": self.seeds.len() });
        if let Some(t) = &self.mean_test {
            v["mean_test"] = serde_json::to_value(t).expect("score serializes");
        }
        if let Some(s) = system {
            v["system"] = s.into();
        }
        out.push_str(&v.to_string());
        out.push('\n');
        out
    }
}

/// Trains one model per configured seed and averages the dev (and test)
/// scores.
pub fn run_seeds(
    config: &RunConfig,
    train_data: &Corpus,
    dev: &Corpus,
    test: Option<&Corpus>,
) -> Result<(SeedReport, Vec<SeedRun>)> {
    if config.seeds.is_empty() {
        return Err(Error::Config("seeds must not be empty".into()));
    }
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let outcome = train(config, train_data, dev, seed)?;
        let encode = |c: &Corpus| {
            let mut c = c.clone();
            outcome.model.vocab.encode_corpus(&mut c).map(|_| c)
        };
        let dev_score = evaluate_model(&outcome.model, &encode(dev)?, config.dev_metric)?;
        let test_score = match test {
            Some(t) => Some(evaluate_model(&outcome.model, &encode(t)?, config.dev_metric)?),
            None => None,
        };
        runs.push(SeedRun {
            seed,
            dev: dev_score,
            test: test_score,
            outcome,
        });
    }
    let dev_scores: Vec<Score> = runs.iter().map(|r| r.dev).collect();
    let test_scores: Vec<Score> = runs.iter().filter_map(|r| r.test).collect();
    let report = SeedReport {
        seeds: config.seeds.clone(),
        mean_dev: mean_score(&dev_scores),
        mean_test: (!test_scores.is_empty()).then(|| mean_score(&test_scores)),
        dev: dev_scores,
        test: test_scores,
    };
    Ok((report, runs))
}
