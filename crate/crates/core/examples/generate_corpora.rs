//! Writes the bundled synthetic corpora.
//!
//! ```text
//! cargo run --example generate_corpora -- [output-dir]
//! ```
//!
//! Without an argument the files go to `crates/core/data/`, replacing the
//! copies checked into the repository (the output is deterministic, so this
//! is a no-op unless the generator changed).

use std::path::PathBuf;

use seqlabel::data::synthetic;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"));
    std::fs::create_dir_all(&dir)?;
    for (name, sentences) in synthetic::bundle() {
        let path = dir.join(name);
        std::fs::write(&path, sentences.to_conll())?;
        let tokens: usize = sentences.0.iter().map(|(t, _)| t.len()).sum();
        println!("{} ({} sentences, {tokens} tokens)", path.display(), sentences.len());
    }
    Ok(())
}
