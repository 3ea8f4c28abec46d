//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqlabel::autodiff::{Graph, Tensor};
use seqlabel::data::{read_conll_file, ColumnSpec, Corpus, Sentence, Split, Token, TokenIds};
use seqlabel::eval::{accuracy, entity_f1, extract_spans, token_prf, Metric, MetricReport, Span};
use seqlabel::model::{
    crf_loss, encode_sentence, log_partition, predict_traced, toy_gradcheck, toy_sizes, viterbi_decode, CharCache,
    EncodeOptions, ModelParams, OutputMode,
};
use seqlabel::trainer::{adadelta_update, evaluate_model, run_seeds, Mode, RunConfig, Trainer};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn read(name: &str, split: Split) -> Corpus {
    read_conll_file(&root().join("data").join(name), ColumnSpec::default(), split).expect("bundled data")
}

fn small_config() -> RunConfig {
    RunConfig {
        word_dim: 16,
        char_dim: 8,
        char_hidden: 8,
        hidden: 16,
        combined: 16,
        lm_proj: 8,
        batch_size: 8,
        seeds: vec![1],
        ..RunConfig::default()
    }
}

// 1
fn gradient_check() -> Outcome {
    let s = toy_sizes(OutputMode::Softmax);
    ensure(
        (s.word_dim, s.hidden, s.combined, s.lm_proj, s.n_labels, s.n_words, s.n_lm) == (5, 4, 4, 3, 3, 7, 5),
        || format!("toy sizes differ: {s:?}"),
    )?;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for mode in [OutputMode::Softmax, OutputMode::Crf] {
        for gamma in [0.0, 0.1] {
            let r = toy_gradcheck(mode, gamma, None).map_err(|e| e.to_string())?;
            let err = r.max_rel_error();
            ensure(err < 1e-4, || format!("{mode:?} gamma={gamma}: max relative error {err:e}"))?;
            worst = worst.max(err);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("max relative error {worst:.2e} over 4 settings in {secs:.1} s"))
}

fn brute_force_path_score(e: &[Vec<f64>], a: &[Vec<f64>], path: &[usize]) -> f64 {
    let k = e[0].len();
    let mut s = a[k][path[0]] + a[path[path.len() - 1]][k + 1];
    for t in 0..path.len() {
        s += e[t][path[t]];
        if t > 0 {
            s += a[path[t - 1]][path[t]];
        }
    }
    s
}

// 2
fn crf_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut instances = 0;
    let mut worst: f64 = 0.0;
    while instances < 150 {
        let k = rng.random_range(1..=5usize);
        let t = rng.random_range(1..=6usize);
        if k.pow(t as u32) > 4096 {
            continue;
        }
        instances += 1;
        let e: Vec<Vec<f64>> = (0..t).map(|_| (0..k).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let a: Vec<Vec<f64>> = (0..k + 2).map(|_| (0..k + 2).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let et = Tensor::matrix(t, k, e.concat()).unwrap();
        let at = Tensor::matrix(k + 2, k + 2, a.concat()).unwrap();

        let mut scores = Vec::new();
        for code in 0..k.pow(t as u32) {
            let path: Vec<usize> = (0..t).map(|i| code / k.pow(i as u32) % k).collect();
            scores.push((brute_force_path_score(&e, &a, &path), path));
        }
        let max = scores.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        let z = max + scores.iter().map(|s| (s.0 - max).exp()).sum::<f64>().ln();
        let best = scores.iter().find(|s| s.0 == max).unwrap();

        let log_z = log_partition(&et, &at).map_err(|e| e.to_string())?;
        let (path, score) = viterbi_decode(&et, &at).map_err(|e| e.to_string())?;
        let norm: f64 = scores.iter().map(|s| (s.0 - log_z).exp()).sum();

        // the training loss for a random gold path is logZ minus its score
        let gold = &scores[rng.random_range(0..scores.len())];
        let mut store = seqlabel::autodiff::ParamStore::new();
        let trans_id = store.add("t", at.clone());
        let mut g = Graph::new(&store);
        let rows: Vec<_> = e.iter().map(|r| g.input(Tensor::vector(r.clone()), false)).collect();
        let trans = g.param(trans_id);
        let loss = crf_loss(&mut g, &rows, &gold.1, trans).map_err(|e| e.to_string())?;
        let nll = g.scalar(loss);

        let errs = [(log_z - z).abs(), (score - best.0).abs(), (norm - 1.0).abs(), (nll - (z - gold.0)).abs()];
        let err = errs.iter().cloned().fold(0.0, f64::max);
        ensure(err <= 1e-10 && path == best.1, || {
            format!("K={k} T={t}: errors {errs:?}, viterbi {path:?} vs {:?}", best.1)
        })?;
        worst = worst.max(err);
    }
    Ok(format!("{instances} instances, max deviation {worst:.1e}"))
}

fn encoded(tokens: &[(usize, usize, Vec<usize>)]) -> Sentence {
    let toks = tokens
        .iter()
        .map(|(w, l, c)| Token {
            surface: "x".into(),
            normalized: "x".into(),
            ids: Some(TokenIds {
                input_id: *w,
                lm_id: *l,
                char_ids: c.clone(),
            }),
        })
        .collect();
    Sentence::new(toks, vec![0; tokens.len()]).unwrap()
}

fn lm_states(m: &ModelParams, s: &Sentence) -> (Vec<Tensor>, Vec<Tensor>) {
    let mut g = Graph::new(&m.store);
    let opts = EncodeOptions {
        mode: Mode::Eval,
        dropout_p: 0.5,
        with_lm: true,
    };
    let sg = encode_sentence(&mut g, m, s, opts, &mut ChaCha8Rng::seed_from_u64(0), &mut CharCache::default())
        .expect("encodes");
    (
        sg.lm_fwd.iter().map(|&n| g.value(n).clone()).collect(),
        sg.lm_bwd.iter().map(|&n| g.value(n).clone()).collect(),
    )
}

fn bits(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|x| x.to_bits()).collect()
}

// 3
fn causality() -> Outcome {
    let sizes = toy_sizes(OutputMode::Crf);
    let m = ModelParams::init(sizes, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let token = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..5);
        (
            rng.random_range(0..sizes.n_words),
            rng.random_range(0..sizes.n_lm),
            (0..n).map(|_| rng.random_range(0..sizes.n_chars)).collect::<Vec<_>>(),
        )
    };
    let mut checked = 0;
    for _ in 0..50 {
        let len = rng.random_range(2..10);
        let toks: Vec<_> = (0..len).map(|_| token(&mut rng)).collect();
        let (f0, b0) = lm_states(&m, &encoded(&toks));
        let t = rng.random_range(0..len);
        if t + 1 < len {
            let mut next = toks.clone();
            next[t + 1] = token(&mut rng);
            next[t + 1].0 = (toks[t + 1].0 + 1) % sizes.n_words;
            let (f1, _) = lm_states(&m, &encoded(&next));
            ensure(bits(&f0[t]) == bits(&f1[t]), || format!("forward state {t} saw token {}", t + 1))?;
            ensure(f0[t + 1] != f1[t + 1], || "perturbation had no effect".into())?;
            checked += 1;
        }
        if t > 0 {
            let mut prev = toks.clone();
            prev[t - 1] = token(&mut rng);
            prev[t - 1].0 = (toks[t - 1].0 + 1) % sizes.n_words;
            let (_, b1) = lm_states(&m, &encoded(&prev));
            ensure(bits(&b0[t]) == bits(&b1[t]), || format!("backward state {t} saw token {}", t - 1))?;
            ensure(b0[t - 1] != b1[t - 1], || "perturbation had no effect".into())?;
            checked += 1;
        }
    }
    Ok(format!("50 sentences, {checked} perturbations, directional LM states bitwise unchanged"))
}

// 4
fn baseline_recovery() -> Outcome {
    let train = read("entities.train.conll", Split::Train);
    let mut moved = Vec::new();
    for gamma in [0.0, 0.1] {
        let cfg = RunConfig { gamma, ..small_config() };
        let mut t = Trainer::new(&cfg, &train, 4).map_err(|e| e.to_string())?;
        let before = t.model.params.clone();
        for _ in 0..5 {
            t.run_epoch().map_err(|e| e.to_string())?;
        }
        let changed = before
            .layout
            .lm
            .ids()
            .iter()
            .filter(|&&id| bits(before.store.get(id)) != bits(t.model.params.store.get(id)))
            .count();
        moved.push(changed);
    }
    ensure(moved[0] == 0, || format!("{} LM tensors changed with gamma=0", moved[0]))?;
    ensure(moved[1] > 0, || "LM heads did not train with gamma=0.1 either".into())?;
    Ok(format!("gamma=0: 0 of 8 LM tensors changed in 5 epochs (gamma=0.1: {} changed)", moved[1]))
}

// 5
fn overfit() -> Outcome {
    let train = read("entities.train.conll", Split::Train);
    ensure(train.sentences.len() >= 50 && train.label_set.len() >= 3, || "corpus too small".into())?;
    let start = Instant::now();
    let mut reached = Vec::new();
    for mode in [OutputMode::Softmax, OutputMode::Crf] {
        let cfg = RunConfig {
            output_mode: mode,
            use_dropout: false,
            ..RunConfig::default()
        };
        let mut t = Trainer::new(&cfg, &train, 1).map_err(|e| e.to_string())?;
        let mut hit = None;
        for epoch in 1..=100 {
            t.run_epoch().map_err(|e| e.to_string())?;
            let acc = evaluate_model(&t.model, &t.train, Metric::Accuracy).map_err(|e| e.to_string())?.primary();
            if acc == 1.0 {
                hit = Some(epoch);
                break;
            }
        }
        let epoch = hit.ok_or_else(|| format!("{mode:?} did not reach 100% training accuracy in 100 epochs"))?;
        reached.push(format!("{mode:?} at epoch {epoch}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, || format!("took {secs:.0} s"))?;
    Ok(format!("100% training accuracy: {} ({secs:.0} s)", reached.join(", ")))
}

// 6
fn multitask_direction() -> Outcome {
    let train = read("errors.train.conll", Split::Train);
    let dev = read("errors.dev.conll", Split::Dev);
    let positive = train.label_strings().iter().flatten().filter(|l| *l == "i").count() as f64 / train.num_tokens() as f64;
    let base = RunConfig::from_file(&root().join("configs/errors.toml")).map_err(|e| e.to_string())?;
    ensure(base.seeds.len() == 5, || "expected five seeds".into())?;
    let mut means = Vec::new();
    for gamma in [0.0, 0.1] {
        let cfg = RunConfig { gamma, ..base.clone() };
        let (report, _) = run_seeds(&cfg, &train, &dev, None).map_err(|e| e.to_string())?;
        means.push(report.mean_dev.primary);
    }
    let gap = means[1] - means[0];
    let summary = format!(
        "mean dev F0.5 gamma=0: {:.4}, gamma=0.1: {:.4}, gap {gap:+.4} ({:.1}% positive tokens)",
        means[0],
        means[1],
        100.0 * positive
    );
    ensure(gap >= 0.0, || summary.clone())?;
    Ok(summary)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

// 7
fn metrics() -> Outcome {
    let e = |r: seqlabel::Result<MetricReport>| r.map_err(|e| e.to_string());
    let r = e(token_prf(&[vec!["i", "i", "c", "c"]], &[vec!["i", "c", "c", "i"]], "i", 0.5))?;
    ensure((r.true_positives, r.precision, r.recall, r.f_beta) == (1, 0.5, 0.5, 0.5), || format!("{r:?}"))?;
    let r = e(token_prf(&[vec!["c", "i"]], &[vec!["c", "i"]], "i", 0.5))?;
    ensure((r.precision, r.recall, r.f_beta) == (1.0, 1.0, 1.0), || format!("{r:?}"))?;

    let spans = extract_spans(&["I-LOC", "B-LOC", "I-ORG"]).map_err(|e| e.to_string())?;
    let span = |start, end, kind: &str| Span {
        start,
        end,
        kind: kind.into(),
    };
    ensure(spans == [span(0, 1, "LOC"), span(1, 2, "LOC"), span(2, 3, "ORG")], || format!("{spans:?}"))?;
    ensure(extract_spans(&["B-PER", "I-PER", "O"]).unwrap() == [span(0, 2, "PER")], || "B-PER I-PER O".into())?;
    ensure(extract_spans(&["O", "O", "O"]).unwrap().is_empty(), || "O O O".into())?;

    let r = e(entity_f1(&[vec!["B-A", "O", "B-B", "O"]], &[vec!["B-A", "O", "B-B", "I-B"]]))?;
    ensure((r.precision, r.recall, r.f_beta) == (0.5, 0.5, 0.5), || format!("{r:?}"))?;
    let r = e(entity_f1(&[vec!["B-PER", "I-PER", "O"]], &[vec!["B-PER", "I-PER", "I-PER"]]))?;
    ensure(r.true_positives == 0 && r.f_beta == 0.0, || format!("{r:?}"))?;
    let r = e(entity_f1(&[vec!["B-X", "I-X"]], &[vec!["B-X", "I-X"]]))?;
    ensure(r.f_beta == 1.0, || format!("{r:?}"))?;

    let pred = vec![vec![0, 1, 0, 1, 0], vec![1, 1, 1, 1, 1]];
    let gold = vec![vec![0, 0, 0, 0, 0], vec![1, 1, 0, 0, 0]];
    let split = accuracy(&pred, &gold).map_err(|e| e.to_string())?.accuracy;
    let joined = accuracy(&[pred.concat()], &[gold.concat()]).map_err(|e| e.to_string())?.accuracy;
    ensure(split == 0.5 && joined == 0.5, || format!("accuracy {split} / {joined}"))?;
    ensure(accuracy(&pred, &pred).unwrap().accuracy == 1.0, || "identical sequences".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let tp = rng.random_range(0..20usize);
        let predicted = tp + rng.random_range(0..20usize);
        let gold_n = tp + rng.random_range(0..20usize);
        let beta = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let p = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let r = if gold_n == 0 { 0.0 } else { tp as f64 / gold_n as f64 };
        let b2 = beta * beta;
        let f = if b2 * p + r == 0.0 { 0.0 } else { (1.0 + b2) * p * r / (b2 * p + r) };

        // label lists with exactly these counts
        let fp = predicted - tp;
        let fn_ = gold_n - tp;
        let mut pl = Vec::new();
        let mut gl = Vec::new();
        for (pv, gv, n) in [("i", "i", tp), ("i", "c", fp), ("c", "i", fn_), ("c", "c", 3)] {
            pl.extend(std::iter::repeat_n(pv, n));
            gl.extend(std::iter::repeat_n(gv, n));
        }
        let m = e(token_prf(&[pl], &[gl], "i", beta))?;
        let c = MetricReport::from_counts(tp, predicted, gold_n, beta);
        ensure(close(m.precision, p) && close(m.recall, r) && close(m.f_beta, f) && close(c.f_beta, f), || {
            format!("tp={tp} pred={predicted} gold={gold_n} beta={beta}: {} vs {f}", m.f_beta)
        })?;
    }
    Ok("hand-computed examples exact; 1000 random count triples agree".into())
}

// 8
fn test_time_parity() -> Outcome {
    let train = read("entities.train.conll", Split::Train);
    let test = read("entities.test.conll", Split::Test);
    let mut traces = Vec::new();
    for gamma in [0.0, 0.1] {
        let cfg = RunConfig { gamma, ..small_config() };
        let mut t = Trainer::new(&cfg, &train, 8).map_err(|e| e.to_string())?;
        t.run_epoch().map_err(|e| e.to_string())?;
        let data = t.encode(&test).map_err(|e| e.to_string())?;
        let mut per_sentence = Vec::new();
        for s in &data.sentences {
            let (_, trace) = predict_traced(&t.model.params, s, t.model.dropout_p).map_err(|e| e.to_string())?;
            let lm = t.model.params.layout.lm.ids();
            ensure(trace.params_read.iter().all(|p| !lm.contains(p)), || "prediction read an LM head".into())?;
            per_sentence.push(trace.op_counts);
        }
        traces.push(per_sentence);
    }
    ensure(traces[0] == traces[1], || "operation counts differ".into())?;
    let total: usize = traces[0].iter().flat_map(|c| c.values()).sum();
    Ok(format!("{} test sentences, {total} operations each way, identical counts", traces[0].len()))
}

fn train_via_cli(dir: &Path, name: &str) -> Result<(), String> {
    let args: Vec<PathBuf> = [
        "seqlabel",
        "train",
        "--config",
        root().join("configs/tiny.toml").to_str().unwrap(),
        "--train",
        root().join("data/entities.train.conll").to_str().unwrap(),
        "--dev",
        root().join("data/entities.dev.conll").to_str().unwrap(),
        "--model",
        dir.join(name).to_str().unwrap(),
        "--seed",
        "11",
    ]
    .iter()
    .map(PathBuf::from)
    .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    match seqlabel::cli::run(args, &mut out, &mut err) {
        0 => Ok(()),
        code => Err(format!("train exited {code}: {}", String::from_utf8_lossy(&err))),
    }
}

// 9
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    train_via_cli(dir.path(), "a")?;
    train_via_cli(dir.path(), "b")?;
    let read = |n: &str| std::fs::read(dir.path().join(n)).map_err(|e| e.to_string());
    let (ma, mb) = (read("a")?, read("b")?);
    let (ha, hb) = (read("a.history.jsonl")?, read("b.history.jsonl")?);
    ensure(ma == mb, || "model files differ".into())?;
    ensure(ha == hb, || "history files differ".into())?;
    Ok(format!("model ({} bytes) and history ({} bytes) identical", ma.len(), ha.len()))
}

// 10
fn adadelta_first_step() -> Outcome {
    let (mut p, mut eg2, mut edx2) = ([0.0], [0.0], [0.0]);
    adadelta_update(&mut p, &[1.0], &mut eg2, &mut edx2, 0.95, 1e-6, 1.0).map_err(|e| e.to_string())?;
    let expect = (1e-6f64).sqrt() / (0.05f64 + 1e-6).sqrt();
    let step = -p[0];
    ensure((step - expect).abs() <= 1e-9, || format!("|delta| {step} vs {expect}"))?;
    ensure((step - 0.0044721).abs() <= 1e-7, || format!("|delta| {step}"))?;
    Ok(format!("|delta| = {step:.10}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient correctness", gradient_check),
        ("CRF matches enumeration", crf_enumeration),
        ("language-model causality", causality),
        ("gamma=0 leaves LM heads untouched", baseline_recovery),
        ("overfits the entity corpus", overfit),
        ("LM objective helps error detection", multitask_direction),
        ("metric correctness", metrics),
        ("prediction cost independent of gamma", test_time_parity),
        ("training is deterministic", determinism),
        ("AdaDelta first step", adadelta_first_step),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if let Some(f) = &filter {
            if *f != n.to_string() {
                continue;
            }
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {n:>2} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
