//! Token-level error detection scored with F0.5, trained with and without
//! the auxiliary language-modeling objective over several seeds.
//!
//! Pass a number to limit how many seeds are run (default: all in the config).

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

    let mut base = RunConfig::from_file(&root.join("configs/errors.toml"))?;
    if let Some(n) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        base.seeds.truncate(n);
    }

    let mut reports = Vec::new();
    for gamma in [0.0, 0.1] {
        let config = RunConfig { gamma, ..base.clone() };
        let (report, runs) = run_seeds(&config, &train_data, &dev, Some(&test))?;
        for r in &runs {
            println!(
                "gamma={gamma} seed={} epochs={} dev F0.5={:.3}",
                r.seed,
                r.outcome.history.records.len(),
                r.dev.primary()
            );
        }
        reports.push((format!("gamma={gamma}"), report));
    }

    let rows: Vec<TableRow> = reports
        .iter()
        .map(|(name, r)| TableRow {
            system: name,
            cells: vec![("dev", r.mean_dev), ("test", r.mean_test.expect("test split given"))],
        })
        .collect();
    println!("{}", format_table(base.dev_metric, &rows));
    println!(
        "mean dev gain from the language-modeling objective: {:+.4}",
        reports[1].1.mean_dev.primary - reports[0].1.mean_dev.primary
    );
    Ok(())
}
