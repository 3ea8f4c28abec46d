//! Token-level F0.5, entity-level F1 and accuracy on hand-made predictions.

use seqlabel::eval::{accuracy, entity_f1, extract_spans, format_table, mean_score, token_prf, Metric, Score, TableRow};

fn main() -> seqlabel::Result<()> {
    // error detection: "i" marks an incorrect token
    let gold = vec![vec!["c", "i", "c", "c"], vec!["i", "c", "i"]];
    let pred = vec![vec!["c", "i", "i", "c"], vec!["c", "c", "i"]];
    let r = token_prf(&pred, &gold, "i", 0.5)?;
    println!(
        "token F0.5: P={:.3} R={:.3} F={:.3} (tp={} pred={} gold={})",
        r.precision, r.recall, r.f_beta, r.true_positives, r.predicted_positives, r.gold_positives
    );

    let gold = vec![vec!["B-PER", "I-PER", "O", "B-LOC"]];
    let pred = vec![vec!["B-PER", "I-PER", "O", "I-ORG"]];
    println!("gold spans: {:?}", extract_spans(&gold[0])?);
    // a stray I- opens a new span
    println!("pred spans: {:?}", extract_spans(&pred[0])?);
    let e = entity_f1(&pred, &gold)?;
    println!("entity F1 = {:.3}", e.f_beta);

    let a = accuracy(&[vec!["DT", "NN", "VBZ"]], &[vec!["DT", "NN", "NNS"]])?;
    println!("accuracy = {:.3} ({}/{})", a.accuracy, a.correct, a.total);

    // per-seed scores are averaged component-wise
    let runs = [Score::Prf(e), Score::Prf(entity_f1(&gold, &gold)?)];
    let mean = mean_score(&runs);
    println!(
        "{}",
        format_table(
            Metric::EntityF1,
            &[TableRow {
                system: "example",
                cells: vec![("dev", mean), ("test", mean)],
            }],
        )
    );
    Ok(())
}
