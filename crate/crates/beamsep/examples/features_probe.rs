//! Inspect the estimator's input features on a rendered scene: log-power
//! spectra, interaural phase differences and the directional feature,
//! including how DF reacts when the assumed look direction is wrong.
//!
//! ```bash
//! cargo run --release --example features_probe
//! ```

use beamsep::features::{
    assemble_features, default_pairs, directional_feature, ArrayGeometry, FeatureSpec,
};
use beamsep::signal::stft;
use beamsep::simulate::{render_source, speechlike};

fn main() {
    let geometry = ArrayGeometry::uniform_linear(6, 0.04);
    let doa = 1.0f64;
    let rendered = render_source(&speechlike(1.0, 5), doa, &geometry, 0.0, 1).unwrap();
    let spec = stft(&rendered, &Default::default()).unwrap();

    let fs = FeatureSpec::new(geometry.clone());
    let feats = assemble_features(&spec, &fs, doa).unwrap();
    println!(
        "feature matrix: {} frames x {} dims",
        feats.data.nrows(),
        feats.data.ncols()
    );
    for (name, width) in &feats.layout.blocks {
        println!("  block {name:<4} width {width}");
    }

    let pairs = default_pairs(6);
    let mean_df = |look: f64| {
        let df = directional_feature(&spec, look, &geometry, &pairs).unwrap();
        df.iter().sum::<f64>() / df.len() as f64
    };
    println!("mean directional feature vs. assumed look direction:");
    for delta_deg in [0.0, 20.0, 60.0, 120.0, 180.0] {
        let look = (doa + delta_deg.to_radians()) % (2.0 * std::f64::consts::PI);
        println!("  offset {delta_deg:>5.0} deg -> DF {:.3}", mean_df(look));
    }
}
