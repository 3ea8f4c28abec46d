//! Forward algorithm and Viterbi decoding checked against brute force.

use seqlabel::autodiff::Tensor;
use seqlabel::model::{log_partition, sequence_score, viterbi_decode};

fn main() -> seqlabel::Result<()> {
    let (t, k) = (4, 3);
    // emissions T x K; transitions (K+2) x (K+2) with start row K and end column K+1
    let emissions = Tensor::matrix(
        t,
        k,
        vec![1.0, 0.2, -0.5, 0.1, 0.9, 0.0, -1.0, 0.4, 0.3, 0.6, -0.2, 0.8],
    )?;
    let mut transitions = Tensor::zeros(&[k + 2, k + 2]);
    transitions.row_mut(0)[1] = 1.5; // label 0 likes to be followed by 1
    transitions.row_mut(2)[2] = -2.0;
    transitions.row_mut(k)[2] = -1.0; // starting with label 2 is discouraged

    let log_z = log_partition(&emissions, &transitions)?;
    let (path, score) = viterbi_decode(&emissions, &transitions)?;

    let mut brute = Vec::new();
    for code in 0..k.pow(t as u32) {
        let p: Vec<usize> = (0..t).map(|i| code / k.pow(i as u32) % k).collect();
        brute.push((sequence_score(&emissions, &transitions, &p)?, p));
    }
    let max = brute.iter().map(|(s, _)| *s).fold(f64::MIN, f64::max);
    let brute_z = max + brute.iter().map(|(s, _)| (s - max).exp()).sum::<f64>().ln();
    let best = brute.iter().find(|(s, _)| *s == max).unwrap();

    println!("log Z   forward={log_z:.12} enumeration={brute_z:.12}");
    println!("viterbi {path:?} score {score:.6}; enumeration {:?} {:.6}", best.1, best.0);
    println!("P(best path) = {:.4}", (score - log_z).exp());
    Ok(())
}
