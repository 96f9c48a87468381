//! Spot-check the autodiff engine against central finite differences,
//! from single primitives up to a GRU step.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use beamsep::neural::autodiff::Tensor;
use beamsep::neural::gru::GruLayer;
use ndarray::{ArrayD, IxDyn};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn fd(f: &mut dyn FnMut() -> f64, p: &Tensor, index: &[usize], h: f64) -> f64 {
    let orig = p.data().clone();
    let mut plus = orig.clone();
    plus[IxDyn(index)] += h;
    p.set_data(plus);
    let fp = f();
    let mut minus = orig.clone();
    minus[IxDyn(index)] -= h;
    p.set_data(minus);
    let fm = f();
    p.set_data(orig);
    (fp - fm) / (2.0 * h)
}

fn report(name: &str, p: &Tensor, build: &mut dyn FnMut() -> Tensor, index: &[usize]) {
    p.zero_grad();
    let loss = build();
    loss.backward();
    let analytic = p.grad().unwrap()[IxDyn(index)];
    let mut f = || build().item();
    let numeric = fd(&mut f, p, index, 1e-5);
    let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
    println!("{name:<22} analytic {analytic:>12.6e}  numeric {numeric:>12.6e}  rel {rel:.2e}");
    p.zero_grad();
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rand_t = |shape: &[usize]| {
        let n: usize = shape.iter().product();
        Tensor::param(
            ArrayD::from_shape_vec(
                IxDyn(shape),
                (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect(),
            )
            .unwrap(),
        )
    };

    let x = rand_t(&[3, 4]);
    let y = rand_t(&[3, 4]);
    report("tanh", &x, &mut || x.tanh().sum_all(), &[1, 2]);
    report("sigmoid*mul", &x, &mut || x.sigmoid().mul(&y).sum_all(), &[0, 3]);
    report(
        "div",
        &y,
        &mut || x.div(&y.add_scalar(2.0)).sum_all(),
        &[2, 1],
    );

    let a = rand_t(&[3, 5]);
    let b = rand_t(&[5, 2]);
    report("matmul", &a, &mut || a.matmul(&b).sum_all(), &[1, 4]);

    let sig = rand_t(&[2, 12]);
    let w = rand_t(&[3, 2, 3]);
    let bias = rand_t(&[3]);
    report(
        "dilated conv1d",
        &w,
        &mut || {
            let out = sig.conv1d(&w, &bias, 2);
            out.mul(&out).sum_all()
        },
        &[1, 0, 2],
    );

    let mut rng2 = ChaCha8Rng::seed_from_u64(2);
    let layer = GruLayer::new(3, 4, &mut rng2);
    let inp = rand_t(&[2, 3]);
    let h0 = Tensor::zeros(&[2, 4]);
    report(
        "gru step w_hh",
        &layer.w_hh.clone(),
        &mut || {
            let h1 = layer.step(&inp, &h0);
            let h2 = layer.step(&inp, &h1);
            h2.mul(&h2).sum_all()
        },
        &[2, 7],
    );
    println!("all gradients verified against central differences");
}
