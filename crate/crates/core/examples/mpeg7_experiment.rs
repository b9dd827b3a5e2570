//! The full silhouette benchmark: 1400 MPEG-7 CE-Shape-1 Part B masks, both
//! feature kinds, five folds, 800 epochs. Writes one summary per kind.
//!
//! ```text
//! cargo run --release --example mpeg7_experiment -- <mpeg7_dir> [out_dir]
//! ```
//!
//! `<mpeg7_dir>` holds either `class-n.gif` files or one directory per class.

use std::path::PathBuf;

use shapetopo::classifier::{FeatureKind, TrainConfig};
use shapetopo::experiment::{extract_manifest, run_experiment, ExperimentConfig, ExtractConfig, PipelineConfig};
use shapetopo::manifest::{load_flat_manifest, load_manifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(args.next().ok_or("usage: mpeg7_experiment <mpeg7_dir> [out_dir]")?);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "mpeg7_runs".into()));
    std::fs::create_dir_all(&out)?;

    let nested = std::fs::read_dir(&root)?.any(|e| e.map(|e| e.path().is_dir()).unwrap_or(false));
    let manifest = if nested {
        load_manifest(&root, 125)?
    } else {
        load_flat_manifest(&root, 125)?
    };
    println!("{} masks in {} classes", manifest.len(), manifest.classes.len());
    let set = extract_manifest(&manifest, &ExtractConfig::default())?;
    set.save(out.join("features.bin"))?;

    for kind in [FeatureKind::SparsePi, FeatureKind::Amplitude] {
        let cfg = ExperimentConfig {
            kind,
            folds: 5,
            seed: 0,
            pipeline: PipelineConfig::from_features(&set),
            train: TrainConfig::default(),
        };
        let result = run_experiment(&set, &cfg)?;
        let agg = &result.summary.aggregate;
        println!(
            "{kind}: F1 {}, precision {}, recall {}, accuracy {}",
            agg.weighted_f1, agg.weighted_precision, agg.weighted_recall, agg.accuracy
        );
        std::fs::write(
            out.join(format!("{kind}.json")),
            serde_json::to_string_pretty(&result.summary)?,
        )?;
    }
    Ok(())
}
