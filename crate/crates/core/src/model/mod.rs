//! BiLSTM sequence tagger with optional character-level word vectors, a
//! softmax or CRF output layer, and forward/backward language-modeling heads
//! used only as an auxiliary training objective.

mod crf;
mod io;
mod lstm;
mod params;
mod tagger;

pub use crf::{crf_loss, log_partition, sequence_score, viterbi_decode};
pub use io::{write_atomic, Model, FORMAT_VERSION, MAGIC};
pub use lstm::{lstm_step, run_lstm};
pub use params::{Affine, CharParams, LmParams, LstmParams, ModelParams, ModelSizes, OutputMode, ParamLayout};
pub use tagger::{
    char_representation, combine_word_char, emissions, encode_sentence, label_loss, lm_losses, predict,
    predict_traced, sentence_loss, softmax_label_loss, total_loss, CharCache, EncodeOptions, PredictTrace,
    SentenceGraph, SentenceLoss,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check_with_fault, GradCheckReport, OpKind};
use crate::data::{Sentence, Token, TokenIds};
use crate::error::Result;
use crate::trainer::Mode;

/// Small configuration used by the finite-difference suite.
pub fn toy_sizes(output_mode: OutputMode) -> ModelSizes {
    ModelSizes {
        word_dim: 5,
        char_dim: 3,
        char_hidden: 2,
        hidden: 4,
        combined: 4,
        lm_proj: 3,
        n_words: 7,
        n_chars: 6,
        n_labels: 3,
        n_lm: 5,
        use_char: true,
        output_mode,
    }
}

/// Pre-encoded sentence over [`toy_sizes`]; the repeated word exercises
/// shared character vectors.
pub fn toy_sentence() -> Sentence {
    let spec: [(usize, usize, &[usize], usize); 4] = [
        (1, 1, &[1, 2], 0),
        (3, 2, &[3], 2),
        (1, 1, &[1, 2], 1),
        (6, 4, &[5, 4, 0], 2),
    ];
    let tokens = spec
        .iter()
        .map(|&(input_id, lm_id, chars, _)| Token {
            surface: "w".into(),
            normalized: "w".into(),
            ids: Some(TokenIds {
                input_id,
                lm_id,
                char_ids: chars.to_vec(),
            }),
        })
        .collect();
    Sentence::new(tokens, spec.iter().map(|s| s.3).collect()).expect("valid toy sentence")
}

/// Finite-difference check of every parameter of a toy model on the full
/// training objective (dropout active with a fixed mask).
pub fn toy_gradcheck(output_mode: OutputMode, gamma: f64, fault: Option<OpKind>) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut model = ModelParams::init(toy_sizes(output_mode), &mut rng)?;
    // move every parameter off its structured initial value
    for (_, t) in model.store.iter_mut() {
        for x in t.data_mut() {
            *x += rand::Rng::random_range(&mut rng, -0.3..0.3);
        }
    }
    let sentence = toy_sentence();
    let ids: Vec<_> = model.store.ids().collect();
    let frozen = model.clone();
    grad_check_with_fault(&mut model.store, &ids, 1e-4, fault, |g| {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(5);
        let loss = sentence_loss(
            g,
            &frozen,
            &sentence,
            gamma,
            Mode::Train,
            0.25,
            &mut mask_rng,
            &mut CharCache::default(),
        )?;
        Ok(loss.total)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Gradients, Graph, Tensor};
    use crate::data::{build_vocabularies, synthetic, Split};
    use crate::error::Error;
    use crate::eval::Metric;
    use rand::Rng;

    fn fresh(mode: OutputMode, use_char: bool, seed: u64) -> ModelParams {
        let mut sizes = toy_sizes(mode);
        sizes.use_char = use_char;
        ModelParams::init(sizes, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn zeroed(mut m: ModelParams) -> ModelParams {
        for (_, t) in m.store.iter_mut() {
            t.fill(0.0);
        }
        m
    }

    fn sentence_from(ids: &[(usize, usize, Vec<usize>)], labels: Vec<usize>) -> Sentence {
        let tokens = ids
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
        Sentence::new(tokens, labels).unwrap()
    }

    #[test]
    fn char_representation_of_zero_params_is_zero() {
        let m = zeroed(fresh(OutputMode::Softmax, true, 0));
        let cp = m.layout.chars.unwrap();
        let mut g = Graph::new(&m.store);
        let v = char_representation(&mut g, &cp, &[1, 2, 3]).unwrap();
        assert_eq!(g.value(v).data(), &[0.0; 5]);
    }

    #[test]
    fn empty_character_list_is_rejected() {
        let m = fresh(OutputMode::Softmax, true, 0);
        let mut g = Graph::new(&m.store);
        let err = char_representation(&mut g, &m.layout.chars.unwrap(), &[]).unwrap_err();
        assert!(matches!(err, Error::InvalidToken(_)));
    }

    #[test]
    fn single_character_uses_one_step_each_way() {
        let m = fresh(OutputMode::Softmax, true, 1);
        let cp = m.layout.chars.unwrap();
        let mut g = Graph::new(&m.store);
        let table = g.param(cp.embeddings);
        let x = g.row_lookup(table, 2).unwrap();
        let zero = g.input(Tensor::zeros(&[2]), false);
        let (hf, _) = lstm_step(&mut g, x, zero, zero, &cp.fwd).unwrap();
        let (hb, _) = lstm_step(&mut g, x, zero, zero, &cp.bwd).unwrap();
        let both = g.concat(hf, hb).unwrap();
        let (w, b) = (g.param(cp.proj.w), g.param(cp.proj.b));
        let wx = g.matmul(w, both).unwrap();
        let z = g.add(wx, b).unwrap();
        let expect = g.tanh(z).unwrap();
        let got = char_representation(&mut g, &cp, &[2]).unwrap();
        assert_eq!(g.value(got), g.value(expect));
    }

    #[test]
    fn reversed_characters_swap_direction_halves() {
        // same weights both ways and an identity projection expose the halves
        let mut sizes = toy_sizes(OutputMode::Softmax);
        sizes.word_dim = 4;
        let mut m = ModelParams::init(sizes, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let cp = m.layout.chars.unwrap();
        for (src, dst) in [(cp.fwd.w, cp.bwd.w), (cp.fwd.u, cp.bwd.u), (cp.fwd.b, cp.bwd.b)] {
            let t = m.store.get(src).clone();
            *m.store.get_mut(dst) = t;
        }
        let mut eye = Tensor::zeros(&[4, 4]);
        for i in 0..4 {
            eye.row_mut(i)[i] = 1.0;
        }
        *m.store.get_mut(cp.proj.w) = eye;
        let mut g = Graph::new(&m.store);
        let a = char_representation(&mut g, &cp, &[1, 3, 4]).unwrap();
        let b = char_representation(&mut g, &cp, &[4, 3, 1]).unwrap();
        let (a, b) = (g.value(a).data(), g.value(b).data());
        assert_eq!(a[..2], b[2..]);
        assert_eq!(a[2..], b[..2]);
    }

    #[test]
    fn combine_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = fresh(OutputMode::Softmax, true, 3);
        let cp = m.layout.chars.unwrap();
        for _ in 0..20 {
            let xw = Tensor::from_fn(&[5], || rng.random_range(-2.0..2.0));
            let xc = Tensor::from_fn(&[5], || rng.random_range(-2.0..2.0));
            let mut g = Graph::new(&m.store);
            let (a, b) = (g.input(xw.clone(), false), g.input(xc.clone(), false));
            let out = combine_word_char(&mut g, &cp, a, b).unwrap();
            for ((o, w), c) in g.value(out).data().iter().zip(xw.data()).zip(xc.data()) {
                assert!(*o >= w.min(*c) - 1e-12 && *o <= w.max(*c) + 1e-12);
            }
            let same = combine_word_char(&mut g, &cp, a, a).unwrap();
            assert_eq!(g.value(same), &xw);
        }
        m.store.get_mut(cp.gate_out.b).fill(60.0);
        let mut g = Graph::new(&m.store);
        let a = g.input(Tensor::vector(vec![1.0, -1.0, 0.5, 2.0, 0.0]), false);
        let b = g.input(Tensor::vector(vec![-3.0, 4.0, 0.0, 1.0, 9.0]), false);
        let out = combine_word_char(&mut g, &cp, a, b).unwrap();
        for (o, w) in g.value(out).data().iter().zip(g.value(a).data()) {
            assert!((o - w).abs() < 1e-20_f64.max(1e-12));
        }
    }

    #[test]
    fn uniform_softmax_loss_is_length_times_ln_k() {
        let s = crate::autodiff::ParamStore::new();
        let mut g = Graph::new(&s);
        let logits: Vec<_> = (0..3).map(|_| g.input(Tensor::zeros(&[2]), true)).collect();
        let loss = softmax_label_loss(&mut g, &logits, &[0, 1, 1]).unwrap();
        assert!((g.scalar(loss) - 3.0 * 2f64.ln()).abs() < 1e-15);
        assert!((g.scalar(loss) - 2.0794).abs() < 1e-4);
        let bad = softmax_label_loss(&mut g, &logits, &[0, 2, 1]).unwrap_err();
        assert!(matches!(bad, Error::Index { .. }));
    }

    #[test]
    fn softmax_loss_gradient_is_probs_minus_one_hot() {
        let s = crate::autodiff::ParamStore::new();
        let mut g = Graph::new(&s);
        let raw = [vec![0.3, -1.2, 2.0], vec![1.0, 1.0, -0.5]];
        let logits: Vec<_> = raw.iter().map(|v| g.input(Tensor::vector(v.clone()), true)).collect();
        let targets = [2, 0];
        let loss = softmax_label_loss(&mut g, &logits, &targets).unwrap();
        g.backward(loss, &mut Gradients::zeros_like(&s)).unwrap();
        for ((v, &l), &y) in raw.iter().zip(&logits).zip(&targets) {
            let z: f64 = v.iter().map(|x| x.exp()).sum();
            for (k, x) in v.iter().enumerate() {
                let expect = x.exp() / z - if k == y { 1.0 } else { 0.0 };
                assert!((g.grad(l).unwrap().data()[k] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn confident_logits_give_near_zero_loss() {
        let s = crate::autodiff::ParamStore::new();
        let mut g = Graph::new(&s);
        let l = g.input(Tensor::vector(vec![40.0, 0.0]), false);
        let loss = softmax_label_loss(&mut g, &[l], &[0]).unwrap();
        assert!(g.scalar(loss) < 1e-15);
    }

    fn lm_graph(m: &ModelParams, s: &Sentence) -> (f64, f64) {
        let mut g = Graph::new(&m.store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = EncodeOptions {
            mode: Mode::Eval,
            dropout_p: 0.0,
            with_lm: true,
        };
        let sg = encode_sentence(&mut g, m, s, opts, &mut rng, &mut CharCache::default()).unwrap();
        let lm: Vec<usize> = s.tokens.iter().map(|t| t.ids.as_ref().unwrap().lm_id).collect();
        let (f, b) = lm_losses(&mut g, m, &sg, &lm).unwrap();
        (g.scalar(f), g.scalar(b))
    }

    #[test]
    fn single_token_has_no_lm_loss() {
        let m = fresh(OutputMode::Softmax, true, 4);
        let s = sentence_from(&[(2, 3, vec![1])], vec![0]);
        assert_eq!(lm_graph(&m, &s), (0.0, 0.0));
    }

    #[test]
    fn zero_lm_logits_give_ln_vocab_per_term() {
        let mut sizes = toy_sizes(OutputMode::Softmax);
        sizes.n_lm = 3;
        let mut m = ModelParams::init(sizes, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for id in [m.layout.lm.fwd_out.w, m.layout.lm.bwd_out.w] {
            m.store.get_mut(id).fill(0.0);
        }
        let s = sentence_from(&[(1, 1, vec![1]), (2, 2, vec![2])], vec![0, 1]);
        let (f, b) = lm_graph(&m, &s);
        assert!((f - 3f64.ln()).abs() < 1e-15 && (b - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn lm_heads_target_neighbours_not_the_current_word() {
        // heads that always predict the word at the same position would be
        // perfect; the losses stay large because the targets are neighbours
        let mut m = fresh(OutputMode::Softmax, false, 6);
        for id in [m.layout.lm.fwd_out.w, m.layout.lm.bwd_out.w] {
            m.store.get_mut(id).fill(0.0);
        }
        let fwd_bias = vec![0.0, 30.0, 0.0, 0.0, 0.0];
        let bwd_bias = vec![0.0, 0.0, 30.0, 0.0, 0.0];
        *m.store.get_mut(m.layout.lm.fwd_out.b) = Tensor::vector(fwd_bias.clone());
        *m.store.get_mut(m.layout.lm.bwd_out.b) = Tensor::vector(bwd_bias.clone());
        // fwd head sees token 0 (lm 1) and must predict lm 2; bwd head sees
        // token 1 (lm 2) and must predict lm 1
        let s = sentence_from(&[(1, 1, vec![1]), (2, 2, vec![2])], vec![0, 0]);
        let (f, b) = lm_graph(&m, &s);
        let nll = |bias: &[f64], y: usize| crate::autodiff::logsumexp_slice(bias) - bias[y];
        assert!(nll(&fwd_bias, 1) < 1e-11 && nll(&bwd_bias, 2) < 1e-11);
        assert!((f - nll(&fwd_bias, 2)).abs() < 1e-12 && f > 29.0);
        assert!((b - nll(&bwd_bias, 1)).abs() < 1e-12 && b > 29.0);
    }

    #[test]
    fn total_loss_combination() {
        let s = crate::autodiff::ParamStore::new();
        let mut g = Graph::new(&s);
        let e = g.input(Tensor::scalar(2.0), false);
        let f = g.input(Tensor::scalar(3.0), false);
        let b = g.input(Tensor::scalar(5.0), false);
        let t = total_loss(&mut g, e, f, b, 0.1).unwrap();
        assert!((g.scalar(t) - 2.8).abs() < 1e-15);
        assert_eq!(total_loss(&mut g, e, f, b, 0.0).unwrap(), e);
        assert!(matches!(total_loss(&mut g, e, f, b, -0.5), Err(Error::Config(_))));
        for gamma in [0.05, 0.3, 1.7] {
            let t = total_loss(&mut g, e, f, b, gamma).unwrap();
            assert!((g.scalar(t) - 2.0 - gamma * 8.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_zero_objective_equals_label_loss_and_skips_lm() {
        let m = fresh(OutputMode::Crf, true, 7);
        let s = toy_sentence();
        let mut g = Graph::new(&m.store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = sentence_loss(&mut g, &m, &s, 0.0, Mode::Eval, 0.5, &mut rng, &mut CharCache::default()).unwrap();
        assert_eq!(l.total, l.label);
        assert!(l.lm.is_none());
        let read = g.params_read();
        assert!(m.layout.lm.ids().iter().all(|id| !read.contains(id)));
    }

    #[test]
    fn unencoded_sentence_is_a_state_error() {
        let m = fresh(OutputMode::Softmax, true, 8);
        let s = Sentence::new(vec![Token::new("a").unwrap()], vec![0]).unwrap();
        let mut g = Graph::new(&m.store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = encode_sentence(&mut g, &m, &s, EncodeOptions::eval(0.0), &mut rng, &mut CharCache::default())
            .unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }

    fn random_sentence(rng: &mut ChaCha8Rng, len: usize) -> Vec<(usize, usize, Vec<usize>)> {
        (0..len)
            .map(|_| {
                let n_chars = rng.random_range(1..4);
                (
                    rng.random_range(0..7),
                    rng.random_range(0..5),
                    (0..n_chars).map(|_| rng.random_range(0..6)).collect(),
                )
            })
            .collect()
    }

    fn lm_states(m: &ModelParams, toks: &[(usize, usize, Vec<usize>)]) -> (Vec<Tensor>, Vec<Tensor>) {
        let s = sentence_from(toks, vec![0; toks.len()]);
        let mut g = Graph::new(&m.store);
        let opts = EncodeOptions {
            mode: Mode::Eval,
            dropout_p: 0.5,
            with_lm: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sg = encode_sentence(&mut g, m, &s, opts, &mut rng, &mut CharCache::default()).unwrap();
        (
            sg.lm_fwd.iter().map(|&n| g.value(n).clone()).collect(),
            sg.lm_bwd.iter().map(|&n| g.value(n).clone()).collect(),
        )
    }

    #[test]
    fn directional_states_never_see_their_targets() {
        let m = fresh(OutputMode::Softmax, true, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let len = rng.random_range(2..7);
            let toks = random_sentence(&mut rng, len);
            let (f0, b0) = lm_states(&m, &toks);
            let t = rng.random_range(0..len - 1);
            let mut changed = toks.clone();
            changed[t + 1] = random_sentence(&mut rng, 1).remove(0);
            changed[t + 1].0 = (toks[t + 1].0 + 1) % 7;
            let (f1, _) = lm_states(&m, &changed);
            assert!(f0[..=t].iter().zip(&f1).all(|(a, b)| a == b));
            let mut changed = toks.clone();
            changed[t].0 = (toks[t].0 + 1) % 7;
            let (_, b1) = lm_states(&m, &changed);
            assert!(b0[t + 1..].iter().zip(&b1[t + 1..]).all(|(a, b)| a == b));
        }
    }

    #[test]
    fn softmax_prediction_is_argmax() {
        let mut m = fresh(OutputMode::Softmax, false, 11);
        let mut sizes = m.sizes;
        sizes.n_labels = 2;
        m = ModelParams::init(sizes, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        m.store.get_mut(m.layout.output.w).fill(0.0);
        *m.store.get_mut(m.layout.output.b) = Tensor::vector(vec![1.0, -1.0]);
        let s = sentence_from(&[(1, 1, vec![1]), (3, 2, vec![2])], vec![1, 1]);
        assert_eq!(predict(&m, &s, 0.5).unwrap(), [0, 0]);
    }

    #[test]
    fn prediction_reads_no_lm_parameters() {
        for mode in [OutputMode::Softmax, OutputMode::Crf] {
            let m = fresh(mode, true, 12);
            let (_, trace) = predict_traced(&m, &toy_sentence(), 0.5).unwrap();
            for id in m.layout.lm.ids() {
                assert!(!trace.params_read.contains(&id), "{}", m.store.name(id));
            }
        }
    }

    #[test]
    fn full_model_gradients_match_finite_differences() {
        for mode in [OutputMode::Softmax, OutputMode::Crf] {
            for gamma in [0.0, 0.1] {
                let report = toy_gradcheck(mode, gamma, None).unwrap();
                assert!(report.max_rel_error() < 1e-4, "{mode:?} γ={gamma}: {report:?}");
            }
        }
    }

    #[test]
    fn corrupted_backward_rule_is_caught() {
        let report = toy_gradcheck(OutputMode::Crf, 0.1, Some(OpKind::Sigmoid)).unwrap();
        assert!(report.max_rel_error() > 1e-2);
    }

    fn toy_model(mode: OutputMode) -> Model {
        let data = synthetic::entity_corpus(12, 4, 1).into_corpus(Split::Train).unwrap();
        let vocab = build_vocabularies(&data, 10).unwrap();
        let sizes = ModelSizes {
            n_words: vocab.words.len(),
            n_chars: vocab.chars.len(),
            n_labels: vocab.labels.len(),
            n_lm: vocab.lm.len(),
            ..toy_sizes(mode)
        };
        Model {
            params: ModelParams::init(sizes, &mut ChaCha8Rng::seed_from_u64(13)).unwrap(),
            vocab,
            dropout_p: 0.5,
            metric: Metric::EntityF1,
            positive_label: "i".into(),
        }
    }

    #[test]
    fn saved_model_predicts_identically() {
        for mode in [OutputMode::Softmax, OutputMode::Crf] {
            let model = toy_model(mode);
            let loaded = Model::from_bytes(&model.to_bytes().unwrap()).unwrap();
            assert_eq!(loaded.params, model.params);
            assert_eq!(loaded.dropout_p, model.dropout_p);
            let mut corpus = synthetic::entity_corpus(5, 4, 2).into_corpus(Split::Test).unwrap();
            model.vocab.encode_corpus(&mut corpus).unwrap();
            for s in &corpus.sentences {
                assert_eq!(model.predict(s).unwrap(), loaded.predict(s).unwrap());
            }
        }
    }

    #[test]
    fn damaged_model_files_are_rejected() {
        let bytes = toy_model(OutputMode::Crf).to_bytes().unwrap();
        assert!(matches!(Model::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::ModelFormat(_))));
        assert!(matches!(Model::from_bytes(b"garbage"), Err(Error::ModelFormat(_))));
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        let err = Model::from_bytes(&wrong_version).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
        // a softmax header with CRF tensors fails the shape check
        let mut other = toy_model(OutputMode::Softmax);
        other.params.store = toy_model(OutputMode::Crf).params.store;
        assert!(Model::from_bytes(&other.to_bytes().unwrap()).is_err());
    }
}
