//! The three-system ablation: no dropout and no language-modeling loss, then
//! dropout alone, then both. Learning curves go to a JSONL file.

use std::path::Path;

use seqlabel::data::{read_conll_file, ColumnSpec, Split};
use seqlabel::eval::{format_table, TableRow};
use seqlabel::trainer::{run_seeds, RunConfig};

fn main() -> seqlabel::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let read = |name: &str, split| read_conll_file(&root.join("data").join(name), ColumnSpec::default(), split);
    let train_data = read("errors.train.conll", Split::Train)?;
    let dev = read("errors.dev.conll", Split::Dev)?;
    let test = read("errors.test.conll", Split::Test)?;

    let mut config = RunConfig::from_file(&root.join("configs/errors.toml"))?;
    config.seeds = vec![1, 2];

    let mut curves = String::new();
    let mut results = Vec::new();
    for (name, cfg) in seqlabel::cli::ablation_configs(&config) {
        let (report, runs) = run_seeds(&cfg, &train_data, &dev, Some(&test))?;
        for r in &runs {
            for rec in &r.outcome.history.records {
                curves.push_str(&format!(
                    "{{\"system\":\"{name}\",\"seed\":{},\"epoch\":{},\"dev\":{}}}\n",
                    rec.seed, rec.epoch, rec.dev_metric
                ));
            }
        }
        results.push((name, report));
    }

    let rows: Vec<TableRow> = results
        .iter()
        .map(|(name, r)| TableRow {
            system: name,
            cells: vec![("dev", r.mean_dev), ("test", r.mean_test.expect("test split given"))],
        })
        .collect();
    println!("{}", format_table(config.dev_metric, &rows));

    let path = std::env::temp_dir().join("ablation_curves.jsonl");
    std::fs::write(&path, curves).expect("write curves");
    println!("learning curves in {}", path.display());
    Ok(())
}
