//! Five-fold comparison of the two feature kinds on synthetic silhouettes.
//!
//! ```text
//! cargo run --release --example five_fold_synthetic -- [epochs]
//! ```

use shapetopo::classifier::{FeatureKind, LrSchedule, TrainConfig};
use shapetopo::experiment::{extract_masks, run_experiment, ExperimentConfig, ExtractConfig, PipelineConfig};
use shapetopo::synth::shape_dataset;

fn main() -> shapetopo::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let masks = shape_dataset(8, 20, 96, 7);
    let set = extract_masks(
        &masks,
        &ExtractConfig {
            image_size: 64,
            ..ExtractConfig::default()
        },
    )?;
    println!("{} masks, {} classes, {} records", set.samples.len(), set.classes.len(), set.records.len());

    for kind in [FeatureKind::SparsePi, FeatureKind::Amplitude] {
        let cfg = ExperimentConfig {
            kind,
            folds: 5,
            seed: 0,
            pipeline: PipelineConfig::from_features(&set),
            train: TrainConfig {
                epochs,
                schedule: LrSchedule::reference().compressed(epochs),
                ..TrainConfig::default()
            },
        };
        let out = run_experiment(&set, &cfg)?;
        let agg = &out.summary.aggregate;
        println!(
            "{kind:10} input {:4}  accuracy {}  weighted F1 {}",
            out.folds[0].report.input_dim, agg.accuracy, agg.weighted_f1
        );
    }
    Ok(())
}
