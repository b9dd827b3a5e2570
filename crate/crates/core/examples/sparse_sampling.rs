//! Fit the pixel sampler on persistence images of a synthetic training set
//! and show how few pixels per direction it keeps.

use faer::Mat;
use shapetopo::experiment::{extract_masks, ExtractConfig};
use shapetopo::features::Payload;
use shapetopo::sampler::{fit_sampler, image_stack, thin_svd};
use shapetopo::synth::shape_dataset;
use shapetopo::vectorize::{persistence_image, PersistenceImageConfig};

fn main() -> shapetopo::Result<()> {
    let masks = shape_dataset(8, 12, 80, 5);
    let set = extract_masks(
        &masks,
        &ExtractConfig {
            image_size: 64,
            ..ExtractConfig::default()
        },
    )?;
    let all: Vec<_> = set
        .records
        .iter()
        .map(|r| match &r.payload {
            Payload::Diagrams(d) => d,
            Payload::Vector(_) => unreachable!("extraction stores diagrams"),
        })
        .collect();
    let cfg = PersistenceImageConfig::fit(all.iter().flat_map(|d| d.iter()), 50, 10.0)?;

    let mut stacks: Vec<Mat<f64>> = Vec::new();
    for k in 0..set.directions {
        let images = all
            .iter()
            .map(|d| persistence_image(&d[k], &cfg))
            .collect::<shapetopo::Result<Vec<_>>>()?;
        stacks.push(image_stack(images.iter()));
    }
    let sampler = fit_sampler(&stacks, cfg.grid_side)?;

    for (k, (d, x)) in sampler.directions.iter().zip(&stacks).enumerate() {
        let s = thin_svd(x.as_ref())?.singular_values;
        let energy: f64 = s.iter().map(|v| v * v).sum();
        let kept: f64 = s[..d.rank].iter().map(|v| v * v).sum();
        println!(
            "direction {k}: rank {} keeps {:.6} of the energy, first pixels {:?}",
            d.rank,
            kept / energy,
            &d.pivots[..d.pivots.len().min(6)]
        );
    }
    println!(
        "{} training images, {} of {} pixels per image kept",
        stacks[0].ncols(),
        sampler.feature_len(),
        set.directions * cfg.pixel_count()
    );
    Ok(())
}
