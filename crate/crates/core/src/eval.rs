//! Token-level P/R/F_β, CoNLL entity-level F1 and token accuracy.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entity mention covering tokens `start..end`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub beta: f64,
    pub true_positives: usize,
    pub predicted_positives: usize,
    pub gold_positives: usize,
}

/// `(1+β²)PR / (β²P + R)`, or 0 when the denominator vanishes.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

impl MetricReport {
    pub fn from_counts(tp: usize, predicted: usize, gold: usize, beta: f64) -> Self {
        let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { tp as f64 / gold as f64 };
        Self {
            precision,
            recall,
            f_beta: f_beta(precision, recall, beta),
            beta,
            true_positives: tp,
            predicted_positives: predicted,
            gold_positives: gold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
}

fn check_shapes<A, B>(pred: &[Vec<A>], gold: &[Vec<B>]) -> Result<()> {
    let shape_err = || Error::Shape {
        op: "metric",
        left: pred.iter().map(Vec::len).collect(),
        right: gold.iter().map(Vec::len).collect(),
    };
    if pred.len() != gold.len() {
        return Err(shape_err());
    }
    if pred.iter().zip(gold).any(|(p, g)| p.len() != g.len()) {
        return Err(shape_err());
    }
    Ok(())
}

/// Precision/recall/F_β over tokens carrying `positive_label`.
pub fn token_prf<S: AsRef<str>>(
    pred: &[Vec<S>],
    gold: &[Vec<S>],
    positive_label: &str,
    beta: f64,
) -> Result<MetricReport> {
    check_shapes(pred, gold)?;
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for (p, g) in pred.iter().flatten().zip(gold.iter().flatten()) {
        let p = p.as_ref() == positive_label;
        let g = g.as_ref() == positive_label;
        np += p as usize;
        ng += g as usize;
        tp += (p && g) as usize;
    }
    Ok(MetricReport::from_counts(tp, np, ng, beta))
}

fn parse_bio(label: &str) -> Result<Option<(bool, &str)>> {
    if label == "O" {
        return Ok(None);
    }
    match label.split_once('-') {
        Some(("B", ty)) if !ty.is_empty() => Ok(Some((true, ty))),
        Some(("I", ty)) if !ty.is_empty() => Ok(Some((false, ty))),
        _ => Err(Error::Label(format!("'{label}' is not a BIO tag"))),
    }
}

fn spans(labels: &[impl AsRef<str>], strict: bool) -> Result<Vec<Span>> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, label) in labels.iter().enumerate() {
        match parse_bio(label.as_ref())? {
            None => {
                if let Some((s, ty)) = open.take() {
                    out.push(Span { start: s, end: i, kind: ty.to_string() });
                }
            }
            Some((is_begin, ty)) => {
                let continues = !is_begin && open.is_some_and(|(_, t)| t == ty);
                if continues {
                    continue;
                }
                if !is_begin && strict {
                    return Err(Error::Label(format!(
                        "I-{ty} at position {i} does not continue a {ty} span"
                    )));
                }
                if let Some((s, t)) = open.take() {
                    out.push(Span { start: s, end: i, kind: t.to_string() });
                }
                open = Some((i, ty));
            }
        }
    }
    if let Some((s, ty)) = open {
        out.push(Span { start: s, end: labels.len(), kind: ty.to_string() });
    }
    Ok(out)
}

/// Entity spans from BIO labels. An `I-X` that does not continue an open `X`
/// span starts a new one, as conlleval does.
pub fn extract_spans(labels: &[impl AsRef<str>]) -> Result<Vec<Span>> {
    spans(labels, false)
}

/// Like [`extract_spans`] but rejects `I-X` tags that do not continue a span.
pub fn extract_spans_strict(labels: &[impl AsRef<str>]) -> Result<Vec<Span>> {
    spans(labels, true)
}

/// Micro-averaged entity-level F1; a prediction counts only on an exact
/// `(start, end, type)` match.
pub fn entity_f1<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>]) -> Result<MetricReport> {
    entity_f1_with(pred, gold, false)
}

pub fn entity_f1_with<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>], strict: bool) -> Result<MetricReport> {
    check_shapes(pred, gold)?;
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let ps = spans(p, strict)?;
        let gs: std::collections::HashSet<Span> = spans(g, strict)?.into_iter().collect();
        np += ps.len();
        ng += gs.len();
        tp += ps.iter().filter(|s| gs.contains(s)).count();
    }
    Ok(MetricReport::from_counts(tp, np, ng, 1.0))
}

/// Fraction of tokens whose predicted label equals the gold label.
pub fn accuracy<T: PartialEq>(pred: &[Vec<T>], gold: &[Vec<T>]) -> Result<AccuracyReport> {
    check_shapes(pred, gold)?;
    let total = gold.iter().map(Vec::len).sum::<usize>();
    let correct = pred
        .iter()
        .flatten()
        .zip(gold.iter().flatten())
        .filter(|(p, g)| p == g)
        .count();
    Ok(AccuracyReport {
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        correct,
        total,
    })
}

/// Development/test metric selected for a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Token-level F0.5 on the positive label (error detection).
    F05,
    EntityF1,
    Accuracy,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f05" => Ok(Metric::F05),
            "entity_f1" => Ok(Metric::EntityF1),
            "accuracy" => Ok(Metric::Accuracy),
            _ => Err(Error::Config(format!(
                "unknown metric '{s}' (expected f05, entity_f1 or accuracy)"
            ))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::F05 => "f05",
            Metric::EntityF1 => "entity_f1",
            Metric::Accuracy => "accuracy",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Score {
    Prf(MetricReport),
    Accuracy(AccuracyReport),
}

impl Score {
    /// The value used for model selection: F_β or accuracy.
    pub fn primary(&self) -> f64 {
        match self {
            Score::Prf(r) => r.f_beta,
            Score::Accuracy(a) => a.accuracy,
        }
    }
}

pub fn evaluate<S: AsRef<str>>(
    metric: Metric,
    pred: &[Vec<S>],
    gold: &[Vec<S>],
    positive_label: &str,
) -> Result<Score> {
    Ok(match metric {
        Metric::F05 => Score::Prf(token_prf(pred, gold, positive_label, 0.5)?),
        Metric::EntityF1 => Score::Prf(entity_f1(pred, gold)?),
        Metric::Accuracy => {
            let p: Vec<Vec<&str>> = pred.iter().map(|s| s.iter().map(AsRef::as_ref).collect()).collect();
            let g: Vec<Vec<&str>> = gold.iter().map(|s| s.iter().map(AsRef::as_ref).collect()).collect();
            Score::Accuracy(accuracy(&p, &g)?)
        }
    })
}

/// Mean of P, R and F (or accuracy) taken independently over runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanScore {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub primary: f64,
}

pub fn mean_score(scores: &[Score]) -> MeanScore {
    let n = scores.len().max(1) as f64;
    let primary = scores.iter().map(Score::primary).sum::<f64>() / n;
    let prf: Vec<&MetricReport> = scores
        .iter()
        .filter_map(|s| match s {
            Score::Prf(r) => Some(r),
            Score::Accuracy(_) => None,
        })
        .collect();
    if prf.len() == scores.len() && !prf.is_empty() {
        MeanScore {
            precision: Some(prf.iter().map(|r| r.precision).sum::<f64>() / n),
            recall: Some(prf.iter().map(|r| r.recall).sum::<f64>() / n),
            primary,
        }
    } else {
        MeanScore {
            precision: None,
            recall: None,
            primary,
        }
    }
}

/// One row of a comparison table: system name and a score per split.
pub struct TableRow<'a> {
    pub system: &'a str,
    pub cells: Vec<(&'a str, MeanScore)>,
}

/// Renders rows as a fixed-width table in percent, with P / R / F columns
/// for precision-recall metrics and a single column otherwise.
pub fn format_table(metric: Metric, rows: &[TableRow<'_>]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let name = match metric {
        Metric::F05 => "F0.5",
        Metric::EntityF1 => "F1",
        Metric::Accuracy => "Acc",
    };
    let prf = metric != Metric::Accuracy;
    let _ = write!(out, "{:<12}", "");
    for (split, _) in &first.cells {
        if prf {
            let _ = write!(out, "| {:>24} ", split.to_uppercase());
        } else {
            let _ = write!(out, "| {:>8} ", split.to_uppercase());
        }
    }
    out.push('\n');
    let _ = write!(out, "{:<12}", "");
    for _ in &first.cells {
        if prf {
            let _ = write!(out, "| {:>8}{:>8}{:>8} ", "P", "R", name);
        } else {
            let _ = write!(out, "| {:>8} ", name);
        }
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:<12}", row.system);
        for (_, s) in &row.cells {
            if prf {
                let p = s.precision.unwrap_or(f64::NAN) * 100.0;
                let r = s.recall.unwrap_or(f64::NAN) * 100.0;
                let _ = write!(out, "| {:>8.2}{:>8.2}{:>8.2} ", p, r, s.primary * 100.0);
            } else {
                let _ = write!(out, "| {:>8.2} ", s.primary * 100.0);
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn equal_precision_and_recall_give_that_value() {
        for beta in [0.5, 1.0, 2.0] {
            assert!((f_beta(0.3, 0.3, beta) - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_token_prediction() {
        let g = vec![v(&["c", "i", "c"])];
        let r = token_prf(&g, &g, "i", 0.5).unwrap();
        assert_eq!((r.precision, r.recall, r.f_beta), (1.0, 1.0, 1.0));
    }

    #[test]
    fn token_prf_hand_count() {
        // gold positives {1,3}, predicted {1,2}
        let gold = vec![v(&["c", "i", "c", "i"])];
        let pred = vec![v(&["c", "i", "i", "c"])];
        let r = token_prf(&pred, &gold, "i", 0.5).unwrap();
        assert_eq!(r.true_positives, 1);
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.recall, 0.5);
        assert_eq!(r.f_beta, 0.5);
    }

    #[test]
    fn zero_counts_give_zero() {
        let g = vec![v(&["c", "c"])];
        let r = token_prf(&g, &g, "i", 0.5).unwrap();
        assert_eq!((r.precision, r.recall, r.f_beta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn span_examples() {
        assert_eq!(
            extract_spans(&["B-PER", "I-PER", "O"]).unwrap(),
            [Span { start: 0, end: 2, kind: "PER".into() }]
        );
        assert!(extract_spans(&["O", "O", "O"]).unwrap().is_empty());
        assert_eq!(
            extract_spans(&["I-LOC", "B-LOC", "I-ORG"]).unwrap(),
            [
                Span { start: 0, end: 1, kind: "LOC".into() },
                Span { start: 1, end: 2, kind: "LOC".into() },
                Span { start: 2, end: 3, kind: "ORG".into() },
            ]
        );
        assert!(extract_spans_strict(&["I-LOC"]).is_err());
        assert!(matches!(extract_spans(&["X-PER"]), Err(Error::Label(_))));
        assert!(matches!(extract_spans(&["B-"]), Err(Error::Label(_))));
    }

    #[test]
    fn entity_f1_examples() {
        let g = vec![v(&["B-PER", "I-PER", "O", "B-LOC"])];
        assert_eq!(entity_f1(&g, &g).unwrap().f_beta, 1.0);

        let gold = vec![v(&["B-PER", "I-PER", "I-PER"])];
        let pred = vec![v(&["B-PER", "I-PER", "O"])];
        let r = entity_f1(&pred, &gold).unwrap();
        assert_eq!((r.true_positives, r.f_beta), (0, 0.0));

        // gold {(0,1,A),(2,4,B)}, pred {(0,1,A),(2,3,B)}
        let gold = vec![v(&["B-A", "O", "B-B", "I-B"])];
        let pred = vec![v(&["B-A", "O", "B-B", "O"])];
        let r = entity_f1(&pred, &gold).unwrap();
        assert_eq!((r.precision, r.recall, r.f_beta), (0.5, 0.5, 0.5));
    }

    #[test]
    fn accuracy_examples() {
        let g = vec![vec![1, 2, 3], vec![4]];
        assert_eq!(accuracy(&g, &g).unwrap().accuracy, 1.0);
        let gold = vec![vec![0; 10]];
        let pred = vec![(0..10).map(|i| i % 2).collect::<Vec<_>>()];
        assert_eq!(accuracy(&pred, &gold).unwrap().accuracy, 0.5);
        assert!(accuracy(&[vec![1]], &[vec![1, 2]]).is_err());
    }

    #[test]
    fn shape_mismatch_is_error() {
        let a = vec![v(&["O"])];
        let b = vec![v(&["O", "O"])];
        assert!(matches!(token_prf(&a, &b, "O", 1.0), Err(Error::Shape { .. })));
        assert!(matches!(entity_f1(&a, &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn mean_of_one_and_two() {
        let s = |f| Score::Prf(MetricReport { f_beta: f, ..MetricReport::from_counts(1, 2, 2, 1.0) });
        assert_eq!(mean_score(&[s(0.4)]).primary, 0.4);
        assert_eq!(mean_score(&[s(0.40), s(0.50)]).primary, 0.45);
        assert!(mean_score(&[s(0.4)]).precision.is_some());
    }

    fn bio_labels() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            prop_oneof![
                Just("O".to_string()),
                Just("B-A".to_string()),
                Just("I-A".to_string()),
                Just("B-B".to_string()),
                Just("I-B".to_string()),
            ],
            1..20,
        )
    }

    proptest! {
        #[test]
        fn spans_are_sorted_disjoint_and_typed(labels in bio_labels()) {
            let spans = extract_spans(&labels).unwrap();
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
            for s in &spans {
                prop_assert!(s.start < s.end && s.end <= labels.len());
                for l in &labels[s.start..s.end] {
                    prop_assert!(l.ends_with(&s.kind));
                }
            }
        }

        #[test]
        fn token_and_entity_metrics_agree_on_isolated_positives(
            pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..40)
        ) {
            // no two adjacent positives in either sequence
            let mut gold = Vec::new();
            let mut pred = Vec::new();
            let (mut pg, mut pp) = (false, false);
            for (g, p) in pairs {
                let g = g && !pg;
                let p = p && !pp;
                gold.push(g);
                pred.push(p);
                pg = g;
                pp = p;
            }
            let tok = |xs: &[bool]| vec![xs.iter().map(|&b| if b { "E" } else { "O" }.to_string()).collect::<Vec<_>>()];
            let ent = |xs: &[bool]| vec![xs.iter().map(|&b| if b { "B-E" } else { "O" }.to_string()).collect::<Vec<_>>()];
            let t = token_prf(&tok(&pred), &tok(&gold), "E", 1.0).unwrap();
            let e = entity_f1(&ent(&pred), &ent(&gold)).unwrap();
            prop_assert_eq!(t, e);
        }

        #[test]
        fn f_beta_monotone_in_true_positives(pred in 1usize..50, gold in 1usize..50, beta in 0.1f64..3.0) {
            let max_tp = pred.min(gold);
            let mut last = -1.0;
            for tp in 0..=max_tp {
                let f = MetricReport::from_counts(tp, pred, gold, beta).f_beta;
                prop_assert!(f >= last);
                last = f;
            }
        }

        #[test]
        fn metrics_are_permutation_invariant(
            sents in proptest::collection::vec((bio_labels(), any::<u64>()), 1..8),
        ) {
            let gold: Vec<Vec<String>> = sents.iter().map(|(l, _)| l.clone()).collect();
            let pred: Vec<Vec<String>> = sents
                .iter()
                .map(|(l, seed)| l.iter().enumerate().map(|(i, x)| if (seed >> (i % 64)) & 1 == 1 { "O".to_string() } else { x.clone() }).collect())
                .collect();
            let mut order: Vec<usize> = (0..gold.len()).collect();
            order.reverse();
            let g2: Vec<_> = order.iter().map(|&i| gold[i].clone()).collect();
            let p2: Vec<_> = order.iter().map(|&i| pred[i].clone()).collect();
            prop_assert_eq!(entity_f1(&pred, &gold).unwrap(), entity_f1(&p2, &g2).unwrap());
            prop_assert_eq!(token_prf(&pred, &gold, "O", 0.5).unwrap(), token_prf(&p2, &g2, "O", 0.5).unwrap());
            prop_assert_eq!(accuracy(&pred, &gold).unwrap(), accuracy(&p2, &g2).unwrap());
            let flat_p = vec![pred.concat()];
            let flat_g = vec![gold.concat()];
            prop_assert_eq!(accuracy(&pred, &gold).unwrap(), accuracy(&flat_p, &flat_g).unwrap());
        }
    }
}
