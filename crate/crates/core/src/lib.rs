//! Sequence labeling with a bidirectional LSTM tagger trained jointly with
//! forward and backward language-modeling objectives.
//!
//! The crate is self-contained: a small reverse-mode autodiff engine
//! ([`autodiff`]), CoNLL-style data handling ([`data`]), the tagger with
//! softmax or CRF output ([`model`]), AdaDelta training with early stopping
//! ([`trainer`]), evaluation metrics ([`eval`]) and the `seqlabel`
//! command-line front end ([`cli`]).
//!
//! ```no_run
//! use seqlabel::data::{read_conll_file, ColumnSpec, Split};
//! use seqlabel::trainer::{train, RunConfig};
//!
//! # fn main() -> seqlabel::Result<()> {
//! let cols = ColumnSpec::default();
//! let tr = read_conll_file("train.conll".as_ref(), cols, Split::Train)?;
//! let dev = read_conll_file("dev.conll".as_ref(), cols, Split::Dev)?;
//! let out = train(&RunConfig::default(), &tr, &dev, 1)?;
//! out.model.save("tagger.model".as_ref())?;
//! # Ok(())
//! # }
//! ```

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod trainer;

pub use error::{Error, Result};
