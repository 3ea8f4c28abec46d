//! Reading column-format data: token normalization, IOB1 conversion, the
//! input, character, label and language-model vocabularies, and batching.

use seqlabel::data::{build_vocabularies, make_batches, normalize_token, read_conll_str, ColumnSpec, Split, TagScheme};

const TEXT: &str = "\
-DOCSTART- -X- O

Peter NNP I-PER
Blackburn NNP I-PER
visited VBD O
Paris NNP I-LOC
in IN O
1999 CD O

Paris NNP I-LOC
Hilton NNP I-PER
visited VBD O
Leeds NNP I-LOC
";

fn main() -> seqlabel::Result<()> {
    for s in ["Paris", "1999", "3.14", "déjà"] {
        println!("{s:>6} -> {}", normalize_token(s)?);
    }

    let columns = ColumnSpec {
        scheme: TagScheme::Iob1,
        ..ColumnSpec::new(0, 2)
    };
    let mut corpus = read_conll_str(TEXT, columns, Split::Train)?;
    for labels in corpus.label_strings() {
        println!("{labels:?}");
    }

    // the language-model vocabulary keeps the 3 most frequent words
    let vocab = build_vocabularies(&corpus, 3)?;
    println!("input words {:?}", vocab.words.words());
    println!("lm words {:?} (+ rest bucket {})", vocab.lm.words(), vocab.lm.rest_id());
    println!("{} characters, labels {:?}", vocab.chars.len(), vocab.labels.labels());

    vocab.encode_corpus(&mut corpus)?;
    let ids: Vec<usize> = corpus.sentences[1].tokens.iter().map(|t| t.ids.as_ref().unwrap().input_id).collect();
    println!("second sentence input ids {ids:?}");

    println!("batches of 2 over 5 items, shuffled with seed 3: {:?}", make_batches(5, 2, Some(3)));
    Ok(())
}
