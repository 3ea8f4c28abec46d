//! AdaDelta on a badly scaled quadratic: no learning rate to tune, and the
//! per-coordinate step sizes adapt to the very different curvatures.

use seqlabel::trainer::adadelta_update;

fn main() -> seqlabel::Result<()> {
    let scales = [10.0, 1.0, 0.1];
    let mut x = [1.0, 1.0, 1.0];
    let (mut eg2, mut edx2) = ([0.0; 3], [0.0; 3]);

    let mut first = x;
    adadelta_update(&mut first, &[1.0, 0.0, -1.0], &mut [0.0; 3], &mut [0.0; 3], 0.95, 1e-6, 1.0)?;
    println!("first step with g = [1, 0, -1]: {:?}", first.map(|v| v - 1.0));

    for step in 1..=600 {
        let grad: Vec<f64> = x.iter().zip(scales).map(|(v, s)| 2.0 * s * v).collect();
        adadelta_update(&mut x, &grad, &mut eg2, &mut edx2, 0.95, 1e-6, 1.0)?;
        if step % 100 == 0 {
            let loss: f64 = x.iter().zip(scales).map(|(v, s)| s * v * v).sum();
            println!("step {step:>4} loss {loss:.3e} x = [{:.4}, {:.4}, {:.4}]", x[0], x[1], x[2]);
        }
    }
    Ok(())
}
