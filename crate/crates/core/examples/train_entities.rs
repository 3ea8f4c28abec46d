//! Named-entity tagging with a CRF output layer and character features:
//! train on the bundled corpus, score entity-level F1 on the test split,
//! save the model and tag unseen sentences with the reloaded copy.

use std::path::Path;

use seqlabel::data::{read_conll_file, ColumnSpec, Split, Token};
use seqlabel::eval::Metric;
use seqlabel::model::Model;
use seqlabel::trainer::{evaluate_model, train, RunConfig};

fn main() -> seqlabel::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let read = |name: &str, split| read_conll_file(&root.join("data").join(name), ColumnSpec::default(), split);
    let train_data = read("entities.train.conll", Split::Train)?;
    let dev = read("entities.dev.conll", Split::Dev)?;
    let test = read("entities.test.conll", Split::Test)?;

    let config = RunConfig::from_file(&root.join("configs/entities.toml"))?;
    let out = train(&config, &train_data, &dev, 1)?;
    for r in &out.history.records {
        println!("epoch {:>2}  loss {:>9.3}  dev F1 {:.3}", r.epoch, r.train_loss, r.dev_metric);
    }
    println!("best epoch {} ({:?})", out.history.best_epoch, out.history.stop_reason);

    let mut encoded = test.clone();
    out.model.vocab.encode_corpus(&mut encoded)?;
    let score = evaluate_model(&out.model, &encoded, Metric::EntityF1)?;
    println!("test entity F1 {:.3}", score.primary());

    let dir = tempfile::tempdir().expect("temporary directory");
    let path = dir.path().join("entities.model");
    out.model.save(&path)?;
    let model = Model::load(&path)?;
    // "Zapomir" and "yesterday" never occur in training
    for text in ["yesterday Volo visited Julokeburg", "Zapomir proposes and Volo reported"] {
        let tokens = text.split(' ').map(Token::new).collect::<seqlabel::Result<Vec<_>>>()?;
        let labels = model.tag(&tokens)?;
        let tagged: Vec<String> = tokens.iter().zip(&labels).map(|(t, l)| format!("{}/{l}", t.surface)).collect();
        println!("{}", tagged.join(" "));
    }
    Ok(())
}
