//! Can a recurrent network learn matrix inversion from data alone?
//!
//! This trains the inverse-covariance GRU network on synthetic streams of
//! Hermitian PSD matrices with the diagonally-loaded inverse as the
//! supervised target, then reports held-out relative Frobenius error
//! against an untrained copy of the same network.
//!
//! ```bash
//! cargo run --release --example gru_inversion
//! ```

use beamsep::linalg::{inv_loaded, CMat};
use beamsep::neural::autodiff::{no_grad, Tensor};
use beamsep::neural::gru::{GruNet, GruNetConfig};
use beamsep::train::adam::Adam;
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const M: usize = 3;
const SEQ_LEN: usize = 16;

/// One smooth stream of PSD matrices with their loaded inverses, both
/// flattened as `[re row-major | im row-major]`.
fn psd_stream(seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 2 * M * M;
    let mut a = CMat::zeros(M, M);
    for i in 0..M {
        for j in 0..M {
            a[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let mut inputs = Vec::with_capacity(SEQ_LEN);
    let mut targets = Vec::with_capacity(SEQ_LEN);
    for _ in 0..SEQ_LEN {
        // Random walk on the factor keeps consecutive matrices related.
        for i in 0..M {
            for j in 0..M {
                let step = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a[(i, j)] = a[(i, j)] * 0.9 + step * 0.3;
            }
        }
        let ah = beamsep::linalg::hermitian(&a);
        let mut phi = beamsep::linalg::matmul(&a, &ah).unwrap();
        for i in 0..M {
            phi[(i, i)] += Complex64::new(1.0, 0.0);
        }
        let inv = inv_loaded(&phi, 1e-6).unwrap();
        let flatten = |m: &CMat| -> Vec<f64> {
            let mut v = Vec::with_capacity(dim);
            v.extend(m.data.iter().map(|z| z.re));
            v.extend(m.data.iter().map(|z| z.im));
            v
        };
        inputs.push(flatten(&phi));
        targets.push(flatten(&inv));
    }
    (inputs, targets)
}

/// Batch `streams` as per-step `[B, 2M^2]` tensors.
fn batch_tensors(streams: &[(Vec<Vec<f64>>, Vec<Vec<f64>>)]) -> (Vec<Tensor>, Vec<Tensor>) {
    let b = streams.len();
    let dim = 2 * M * M;
    let mut xs = Vec::with_capacity(SEQ_LEN);
    let mut ys = Vec::with_capacity(SEQ_LEN);
    for t in 0..SEQ_LEN {
        let mut x = Vec::with_capacity(b * dim);
        let mut y = Vec::with_capacity(b * dim);
        for (inp, tgt) in streams {
            x.extend_from_slice(&inp[t]);
            y.extend_from_slice(&tgt[t]);
        }
        xs.push(Tensor::constant(
            ArrayD::from_shape_vec(IxDyn(&[b, dim]), x).unwrap(),
        ));
        ys.push(Tensor::constant(
            ArrayD::from_shape_vec(IxDyn(&[b, dim]), y).unwrap(),
        ));
    }
    (xs, ys)
}

/// Mean relative Frobenius error of the network's inverse estimates.
fn held_out_error(net: &GruNet, streams: &[(Vec<Vec<f64>>, Vec<Vec<f64>>)]) -> f64 {
    let (xs, _) = batch_tensors(streams);
    no_grad(|| {
        let outs = net.forward_seq(&xs);
        let mut total = 0.0;
        let mut count = 0usize;
        for (t, out) in outs.iter().enumerate() {
            let o = out.data();
            for (bi, (_, tgt)) in streams.iter().enumerate() {
                let mut num = 0.0;
                let mut den = 0.0;
                for d in 0..2 * M * M {
                    let diff = o[[bi, d]] - tgt[t][d];
                    num += diff * diff;
                    den += tgt[t][d] * tgt[t][d];
                }
                total += (num / den).sqrt();
                count += 1;
            }
        }
        total / count as f64
    })
}

fn main() {
    let train_streams: Vec<_> = (0..320).map(|i| psd_stream(1000 + i)).collect();
    let held_out: Vec<_> = (0..16).map(|i| psd_stream(9000 + i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = GruNetConfig {
        hidden: vec![64, 64],
    }
    .build_inv_net(M, &mut rng);
    let untrained_error = held_out_error(&net, &held_out);
    println!("untrained held-out relative Frobenius error: {untrained_error:.3}");

    let params = net.params();
    let mut adam = Adam::new(&params, 2e-3);
    let batch = 16;
    let steps = 3000;
    for step in 0..steps {
        let start = (step * batch) % train_streams.len();
        let end = (start + batch).min(train_streams.len());
        let (xs, ys) = batch_tensors(&train_streams[start..end]);
        let outs = net.forward_seq(&xs);
        let mut loss: Option<Tensor> = None;
        for (out, y) in outs.iter().zip(&ys) {
            let diff = out.sub(y);
            let term = diff.mul(&diff).mean_all();
            loss = Some(match loss {
                None => term,
                Some(acc) => acc.add(&term),
            });
        }
        let loss = loss.unwrap().mul_scalar(1.0 / SEQ_LEN as f64);
        let v = loss.item();
        loss.backward();
        adam.step(&params).unwrap();
        if step % 100 == 0 || step == steps - 1 {
            println!("step {step}: mse {v:.5}");
        }
    }

    let trained_error = held_out_error(&net, &held_out);
    println!("trained held-out relative Frobenius error:   {trained_error:.3}");
    println!(
        "improvement over untrained: {:.1}x",
        untrained_error / trained_error
    );
}
