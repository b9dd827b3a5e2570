//! Load a mask (or draw one), crop and resize it, and write the four
//! quarter-turn copies as PGM files.
//!
//! ```text
//! cargo run --example mask_pipeline -- [mask.png] [out_dir]
//! ```

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shapetopo::mask::{augment_rotations, load_mask, normalize_mask, write_pgm, DEFAULT_THRESHOLD};
use shapetopo::synth::{render, ShapeClass};

fn main() -> shapetopo::Result<()> {
    let mut args = std::env::args().skip(1);
    let mask = match args.next() {
        Some(path) => load_mask(&path, DEFAULT_THRESHOLD)?,
        None => render(ShapeClass::Star, 90, &mut ChaCha8Rng::seed_from_u64(1)),
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "mask_pipeline_out".into()));
    std::fs::create_dir_all(&out)?;

    let bbox = mask.bounding_box().expect("mask has foreground");
    println!(
        "input {}x{}, {} foreground pixels, bounding box {}x{}",
        mask.width(),
        mask.height(),
        mask.foreground_count(),
        bbox.width(),
        bbox.height()
    );

    let norm = normalize_mask(&mask, 125)?;
    println!("normalized to {}x{}, {} foreground pixels", norm.width(), norm.height(), norm.foreground_count());
    for (k, m) in augment_rotations(&norm)?.iter().enumerate() {
        let path = out.join(format!("rot{}.pgm", 90 * k));
        write_pgm(m, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
