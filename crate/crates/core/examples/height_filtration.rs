//! Height-function filtrations of one shape in eight directions, saved as
//! grayscale images (dark = enters the filtration early).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shapetopo::filtration::{height_fields, make_directions};
use shapetopo::mask::normalize_mask;
use shapetopo::synth::{render, ShapeClass};

fn main() -> shapetopo::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "height_out".into()));
    std::fs::create_dir_all(&out)?;
    let mask = normalize_mask(&render(ShapeClass::TwinDisks, 100, &mut ChaCha8Rng::seed_from_u64(2)), 125)?;

    let dirs = make_directions(8);
    for hf in height_fields(&mask, &dirs) {
        let fg: Vec<f64> = hf.values.iter().copied().filter(|&v| v < hf.h_infinity).collect();
        let lo = fg.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fg.iter().copied().fold(0.0, f64::max);
        let d = hf.direction;
        println!(
            "direction {} ({:+.3}, {:+.3}): foreground heights {lo:.2}..{hi:.2}, background {:.2}",
            d.index, d.ux, d.uy, hf.h_infinity
        );
        hf.write_pgm(out.join(format!("height{}.pgm", d.index)))?;
    }
    Ok(())
}
