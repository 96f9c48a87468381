//! Multi-tap MVDR: expand the channel dimension with one delayed frame
//! per microphone and beamform jointly over space and time. Compares
//! single-tap and 2-tap oracle-mask systems on the same scene.
//!
//! ```bash
//! cargo run --release --example multitap_mvdr
//! ```

use beamsep::features::ArrayGeometry;
use beamsep::metrics::si_snr;
use beamsep::signal::StftConfig;
use beamsep::simulate::{mix_scene, speechlike, Scene};
use beamsep::train::oracle::oracle_mvdr_enhance;

fn main() {
    let geometry = ArrayGeometry::uniform_linear(6, 0.04);
    let cfg = StftConfig::default();
    let scene = Scene {
        target_doa: 1.9,
        interferer_doas: vec![0.4, 3.6],
        sir_db: vec![1.0, -2.0],
        snr_db: 10.0,
        reverb_decay_s: 0.12,
        seed: 23,
    };
    let render = mix_scene(
        &scene,
        &speechlike(2.0, 300),
        &[speechlike(2.0, 301), speechlike(2.0, 302)],
        &geometry,
    )
    .unwrap();

    let n0 = render.mixture.len();
    let reference = render.target_reverberant.channels[0].samples.clone();
    let mix_score = si_snr(&render.mixture.channels[0].samples[..n0], &reference[..n0]).unwrap();
    println!("mixture Si-SNR: {mix_score:.2} dB");

    for taps in [1usize, 2] {
        let enhanced = oracle_mvdr_enhance(
            &render.mixture,
            &render.target_reverberant,
            &cfg,
            taps,
            1e-6,
        )
        .unwrap();
        let n = enhanced.len().min(n0);
        let score = si_snr(&enhanced.samples[..n], &reference[..n]).unwrap();
        println!(
            "{}-tap MVDR ({} weight dims/bin): {score:.2} dB ({:+.2} dB)",
            taps,
            taps * 6,
            score - mix_score
        );
    }
}
